//! Link delay emulation.
//!
//! Profiles hold round-trip statistics as measured between two sites. A
//! one-way traversal samples from the halved profile so that a request and
//! its reply add back up to the configured round trip.
//!
//! Samples come from a normal distribution clamped to `[min, max]`. Clamping
//! an asymmetric window shifts the mean, so the sampler solves for the
//! location of the underlying normal that makes the clamped mean equal the
//! profile mean.

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Op,
    Rs,
    Cd,
    Tester,
}

impl Site {
    pub const NODE_SITES: [Site; 3] = [Site::Op, Site::Rs, Site::Cd];

    pub fn as_str(self) -> &'static str {
        match self {
            Site::Op => "OP",
            Site::Rs => "RS",
            Site::Cd => "CD",
            Site::Tester => "test",
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSite(pub String);

impl fmt::Display for UnknownSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown site {:?}", self.0)
    }
}

impl std::error::Error for UnknownSite {}

impl FromStr for Site {
    type Err = UnknownSite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "op" => Ok(Site::Op),
            "rs" => Ok(Site::Rs),
            "cd" => Ok(Site::Cd),
            "test" | "tester" => Ok(Site::Tester),
            _ => Err(UnknownSite(s.to_owned())),
        }
    }
}

/// Unordered site pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SitePair(Site, Site);

impl SitePair {
    pub fn new(a: Site, b: Site) -> Self {
        if a <= b {
            SitePair(a, b)
        } else {
            SitePair(b, a)
        }
    }

    pub fn sites(self) -> (Site, Site) {
        (self.0, self.1)
    }
}

impl fmt::Display for SitePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvalidProfile;

impl fmt::Display for InvalidProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("latency profile requires 0 <= min <= mean <= max and std >= 0")
    }
}

impl std::error::Error for InvalidProfile {}

/// Round-trip delay statistics in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyProfile {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl LatencyProfile {
    pub fn new(mean: f64, min: f64, max: f64, std: f64) -> Result<Self, InvalidProfile> {
        let p = Self { mean, min, max, std };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(InvalidProfile)
        }
    }

    pub const fn zero() -> Self {
        Self { mean: 0.0, min: 0.0, max: 0.0, std: 0.0 }
    }

    /// Constant delay.
    pub fn fixed(ms: f64) -> Self {
        Self { mean: ms, min: ms, max: ms, std: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        [self.mean, self.min, self.max, self.std].iter().all(|v| v.is_finite())
            && self.min >= 0.0
            && self.min <= self.mean
            && self.mean <= self.max
            && self.std >= 0.0
    }

    /// Profile of a single traversal of the link.
    pub fn one_way(&self) -> Self {
        Self { mean: self.mean / 2.0, min: self.min / 2.0, max: self.max / 2.0, std: self.std / 2.0 }
    }

    /// Same shape, every statistic multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { mean: self.mean * k, min: self.min * k, max: self.max * k, std: self.std * k }
    }

    /// Location of the underlying normal whose clamp to `[min, max]` has mean `self.mean`.
    pub fn clamped_location(&self) -> f64 {
        if self.std == 0.0 || self.max <= self.min {
            return self.mean;
        }
        let target = self.mean;
        let (mut lo, mut hi) = (self.min - 10.0 * self.std, self.max + 10.0 * self.std);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clamped_normal_mean(mid, self.std, self.min, self.max) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `E[clamp(X, a, b)]` for `X ~ Normal(mu, sigma)`.
pub fn clamped_normal_mean(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let alpha = (a - mu) / sigma;
    let beta = (b - mu) / sigma;
    let (pa, pb) = (n.cdf(alpha), n.cdf(beta));
    a * pa + b * (1.0 - pb) + mu * (pb - pa) + sigma * (n.pdf(alpha) - n.pdf(beta))
}

/// Overlay (Nebula) round-trip latencies of the reference testbed, in ms:
/// `(a, b, mean, min, max, std)`.
pub const NEBULA_TABLE: [(Site, Site, LatencyProfile); 7] = [
    (Site::Rs, Site::Rs, profile(1.23, 0.85, 1.77, 0.28)),
    (Site::Rs, Site::Tester, profile(27.57, 25.74, 34.33, 1.63)),
    (Site::Cd, Site::Cd, profile(1.32, 0.46, 10.06, 1.13)),
    (Site::Cd, Site::Tester, profile(231.5, 229.1, 242.4, 1.75)),
    (Site::Op, Site::Op, profile(0.78, 0.57, 1.25, 0.10)),
    (Site::Op, Site::Tester, profile(1.17, 0.79, 1.97, 0.17)),
    (Site::Rs, Site::Cd, profile(232.1, 231.6, 234.2, 0.28)),
];

/// Bare-metal counterparts of [`NEBULA_TABLE`], same row order.
pub const BAREMETAL_TABLE: [(Site, Site, LatencyProfile); 7] = [
    (Site::Rs, Site::Rs, profile(0.21, 0.19, 0.30, 0.02)),
    (Site::Rs, Site::Tester, profile(32.57, 28.37, 44.44, 2.63)),
    (Site::Cd, Site::Cd, profile(0.85, 0.31, 4.24, 0.55)),
    (Site::Cd, Site::Tester, profile(238.9, 227.7, 451.9, 30.35)),
    (Site::Op, Site::Op, profile(0.33, 0.24, 0.46, 0.05)),
    (Site::Op, Site::Tester, profile(0.57, 0.42, 0.69, 0.05)),
    (Site::Rs, Site::Cd, profile(231.0, 230.5, 231.6, 0.24)),
];

const fn profile(mean: f64, min: f64, max: f64, std: f64) -> LatencyProfile {
    LatencyProfile { mean, min, max, std }
}

pub fn nebula_profile(a: Site, b: Site) -> Option<LatencyProfile> {
    lookup(&NEBULA_TABLE, a, b)
}

pub fn baremetal_profile(a: Site, b: Site) -> Option<LatencyProfile> {
    lookup(&BAREMETAL_TABLE, a, b)
}

fn lookup(table: &[(Site, Site, LatencyProfile)], a: Site, b: Site) -> Option<LatencyProfile> {
    let key = SitePair::new(a, b);
    table.iter().find(|(x, y, _)| SitePair::new(*x, *y) == key).map(|(_, _, p)| *p)
}

/// Seeded stream of delays drawn from one profile.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    profile: LatencyProfile,
    location: f64,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    pub fn new(profile: LatencyProfile, seed: u64) -> Self {
        Self { profile, location: profile.clamped_location(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn profile(&self) -> LatencyProfile {
        self.profile
    }

    pub fn sample(&mut self) -> f64 {
        let p = &self.profile;
        if p.std == 0.0 {
            return p.mean;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        (self.location + p.std * z).clamp(p.min, p.max)
    }
}

/// One delay drawn from `profile` with a fresh generator seeded by `rng_seed`.
pub fn sample_delay(profile: &LatencyProfile, rng_seed: u64) -> f64 {
    DelaySampler::new(*profile, rng_seed).sample()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// No delay is applied or reported.
    #[default]
    Off,
    /// Delays are sampled and reported but nobody sleeps; callers advance a virtual clock.
    Virtual,
    /// Delays are sampled and slept on the calling thread.
    Real,
}

/// A link between two endpoints with its own delay stream.
#[derive(Debug)]
pub struct LinkEmulator {
    mode: DelayMode,
    sampler: Mutex<DelaySampler>,
}

impl LinkEmulator {
    /// `round_trip` is the link's round-trip profile; each call to
    /// [`LinkEmulator::one_way`] samples half of it.
    pub fn new(round_trip: LatencyProfile, seed: u64, mode: DelayMode) -> Self {
        Self { mode, sampler: Mutex::new(DelaySampler::new(round_trip.one_way(), seed)) }
    }

    pub fn disabled() -> Self {
        Self::new(LatencyProfile::zero(), 0, DelayMode::Off)
    }

    pub fn mode(&self) -> DelayMode {
        self.mode
    }

    /// Samples one traversal. Sleeps in [`DelayMode::Real`]; the sampler lock
    /// is released before sleeping.
    pub fn one_way(&self) -> f64 {
        let ms = self.sample_one_way();
        if self.mode == DelayMode::Real && ms > 0.0 {
            thread::sleep(Duration::from_secs_f64(ms / 1000.0));
        }
        ms
    }

    /// Samples one traversal without sleeping, whatever the mode.
    pub fn sample_one_way(&self) -> f64 {
        if self.mode == DelayMode::Off {
            return 0.0;
        }
        self.sampler.lock().sample()
    }

    /// Samples a full round trip as two independent traversals.
    pub fn round_trip(&self) -> f64 {
        self.one_way() + self.one_way()
    }
}

/// Derives a per-stream seed so that independent links never share a generator.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    // FNV-1a over the stream label, then splitmix64 to spread bits.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
