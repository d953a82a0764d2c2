use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use edgefaas_orchestrator::{reference_testbed, NodeSpec, Registry, ScheduleContext};
use edgefaas_overlay::latency::{BAREMETAL_TABLE, NEBULA_TABLE};
use edgefaas_overlay::{LatencyProfile, Site, SitePair};
use serde::Deserialize;

use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 4] = ["OP", "RS", "CD", "AS"];

/// Which measured table the link profiles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkPreset {
    #[default]
    Nebula,
    Baremetal,
    None,
}

impl FromStr for LinkPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nebula" | "overlay" => Ok(LinkPreset::Nebula),
            "baremetal" | "bare-metal" => Ok(LinkPreset::Baremetal),
            "none" => Ok(LinkPreset::None),
            _ => Err(Error::ParseError(format!("unknown link preset {s:?}"))),
        }
    }
}

impl LinkPreset {
    /// Every measured row plus the on-premises to remote links. The tester
    /// sits on premises, so OP-RS and OP-CD reuse the RS-test and CD-test rows.
    pub fn links(self) -> BTreeMap<SitePair, LatencyProfile> {
        let table = match self {
            LinkPreset::Nebula => &NEBULA_TABLE,
            LinkPreset::Baremetal => &BAREMETAL_TABLE,
            LinkPreset::None => return BTreeMap::new(),
        };
        let mut links: BTreeMap<_, _> = table.iter().map(|(a, b, p)| (SitePair::new(*a, *b), *p)).collect();
        for site in [Site::Rs, Site::Cd] {
            let via_tester = links[&SitePair::new(site, Site::Tester)];
            links.insert(SitePair::new(Site::Op, site), via_tester);
        }
        links
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub links: BTreeMap<SitePair, LatencyProfile>,
    pub seed: u64,
}

impl Scenario {
    /// One of the four testbed configurations with Nebula link profiles.
    pub fn builtin(name: &str, seed: u64) -> Result<Self> {
        Self::builtin_with(name, LinkPreset::Nebula, seed)
    }

    pub fn builtin_with(name: &str, preset: LinkPreset, seed: u64) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let keep = |n: &NodeSpec| match upper.as_str() {
            "OP" => n.site == Site::Op,
            "RS" => n.site == Site::Rs,
            "CD" => n.site == Site::Cd,
            _ => true,
        };
        if !BUILTIN_NAMES.contains(&upper.as_str()) {
            return Err(Error::UnknownScenario(name.to_owned()));
        }
        let nodes = reference_testbed().into_iter().filter(keep).collect();
        Ok(Self { name: upper, nodes, links: preset.links(), seed })
    }

    pub fn with_link(mut self, a: Site, b: Site, profile: LatencyProfile) -> Self {
        self.links.insert(SitePair::new(a, b), profile);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn link(&self, a: Site, b: Site) -> Option<LatencyProfile> {
        self.links.get(&SitePair::new(a, b)).copied()
    }

    pub fn workers(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.schedulable)
    }

    pub fn sites(&self) -> BTreeSet<Site> {
        self.nodes.iter().map(|n| n.site).collect()
    }

    /// Links the scenario needs: each site to the tester, each pair of
    /// distinct sites, and a site to itself when it holds two or more nodes.
    pub fn required_links(&self) -> Vec<SitePair> {
        let sites: Vec<Site> = self.sites().into_iter().collect();
        let mut need = BTreeSet::new();
        for (i, &a) in sites.iter().enumerate() {
            need.insert(SitePair::new(a, Site::Tester));
            if self.nodes.iter().filter(|n| n.site == a).count() > 1 {
                need.insert(SitePair::new(a, a));
            }
            for &b in &sites[i + 1..] {
                need.insert(SitePair::new(a, b));
            }
        }
        need.into_iter().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::ParseError(msg));
        if self.workers().next().is_none() {
            return invalid(format!("scenario {} has no schedulable nodes", self.name));
        }
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            n.validate()?;
            if !names.insert(n.name.as_str()) {
                return invalid(format!("duplicate node {}", n.name));
            }
        }
        for (pair, p) in &self.links {
            if !p.is_valid() {
                return invalid(format!("invalid profile for {pair}"));
            }
        }
        let missing: Vec<(Site, Site)> =
            self.required_links().into_iter().filter(|p| !self.links.contains_key(p)).map(SitePair::sites).collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteLinks { scenario: self.name.clone(), missing });
        }
        Ok(())
    }

    /// Fresh registry holding the scenario's nodes.
    pub fn registry(&self) -> Result<Registry> {
        Ok(Registry::with_nodes(self.nodes.iter().cloned())?)
    }

    /// Scheduling context with the mean tester round trip of every site.
    pub fn schedule_context(&self, work_units: f64) -> ScheduleContext {
        self.sites().into_iter().fold(ScheduleContext::new(work_units), |ctx, s| match self.link(s, Site::Tester) {
            Some(p) => ctx.with_rtt(s, p.mean),
            None => ctx,
        })
    }

    pub fn link_fn(&self) -> impl Fn(Site, Site) -> Option<LatencyProfile> + '_ {
        move |a, b| self.link(a, b)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} workers, seed {})", self.name, self.workers().count(), self.seed)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    base: Option<String>,
    #[serde(default)]
    seed: u64,
    preset: Option<String>,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    links: Vec<LinkEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    name: String,
    site: String,
    overlay_ip: Ipv4Addr,
    cpu_cores: u32,
    memory_gb: f64,
    #[serde(default = "one")]
    compute_factor: f64,
    #[serde(default = "yes")]
    schedulable: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    a: String,
    b: String,
    mean: f64,
    min: Option<f64>,
    max: Option<f64>,
    #[serde(default)]
    std: f64,
}

fn site(s: &str) -> Result<Site> {
    s.parse().map_err(|e: edgefaas_overlay::latency::UnknownSite| Error::ParseError(e.to_string()))
}

/// Parses a TOML scenario.
///
/// `base` starts from a built-in node set; `nodes` replaces it. `preset`
/// (nebula, baremetal or none) seeds the link map and `links` entries
/// override or extend it.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    let preset = file.preset.as_deref().map(str::parse).transpose()?.unwrap_or_default();
    let mut scenario = match &file.base {
        Some(base) => Scenario::builtin_with(base, preset, file.seed)?,
        None => Scenario { name: String::new(), nodes: Vec::new(), links: preset.links(), seed: file.seed },
    };
    if !file.nodes.is_empty() {
        scenario.nodes = file
            .nodes
            .iter()
            .map(|n| {
                let spec =
                    NodeSpec::new(&n.name, site(&n.site)?, n.overlay_ip, n.cpu_cores, n.memory_gb, n.compute_factor);
                Ok(if n.schedulable { spec } else { spec.control_plane() })
            })
            .collect::<Result<_>>()?;
    }
    for l in &file.links {
        let p = LatencyProfile::new(l.mean, l.min.unwrap_or(l.mean), l.max.unwrap_or(l.mean), l.std)
            .map_err(|e| Error::ParseError(format!("link {}-{}: {e}", l.a, l.b)))?;
        scenario.links.insert(SitePair::new(site(&l.a)?, site(&l.b)?), p);
    }
    if let Some(name) = file.name {
        scenario.name = name;
    }
    if scenario.name.is_empty() {
        scenario.name = "custom".into();
    }
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoError { path: path.into(), source })?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sizes() {
        let count = |n| Scenario::builtin(n, 1).unwrap().workers().count();
        assert_eq!((count("OP"), count("RS"), count("CD"), count("AS")), (2, 4, 2, 8));
        let op = Scenario::builtin("op", 1).unwrap();
        assert_eq!(op.nodes.len(), 3);
        assert_eq!(op.link(Site::Op, Site::Tester).unwrap().mean, 1.17);
        for name in BUILTIN_NAMES {
            Scenario::builtin(name, 1).unwrap().validate().unwrap();
        }
        assert!(matches!(Scenario::builtin("XX", 1), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn as_is_union_of_the_others() {
        let names =
            |n| -> BTreeSet<String> { Scenario::builtin(n, 1).unwrap().nodes.into_iter().map(|n| n.name).collect() };
        let union: BTreeSet<String> = ["OP", "RS", "CD"].iter().flat_map(|n| names(n)).collect();
        assert_eq!(union, names("AS"));
        let sites = Scenario::builtin("AS", 1).unwrap().sites();
        assert_eq!(sites.len(), 3);
    }

    #[test]
    fn baremetal_preset() {
        let s = Scenario::builtin_with("RS", LinkPreset::Baremetal, 1).unwrap();
        assert_eq!(s.link(Site::Rs, Site::Tester).unwrap().mean, 32.57);
        assert_eq!(s.link(Site::Op, Site::Cd).unwrap().mean, 238.9);
    }

    #[test]
    fn toml_with_base_and_override() {
        let s = parse_scenario(
            r#"
            base = "OP"
            seed = 9
            [[links]]
            a = "OP"
            b = "test"
            mean = 5.0
            "#,
        )
        .unwrap();
        assert_eq!((s.name.as_str(), s.seed), ("OP", 9));
        assert_eq!(s.link(Site::Op, Site::Tester), Some(LatencyProfile::fixed(5.0)));
    }

    #[test]
    fn missing_rs_cd_link() {
        let mut text = String::from("name = \"lab\"\npreset = \"none\"\n");
        for (i, (n, s)) in [("a", "OP"), ("b", "RS"), ("c", "CD")].iter().enumerate() {
            text += &format!(
                "[[nodes]]\nname = \"{n}\"\nsite = \"{s}\"\noverlay_ip = \"10.0.0.{}\"\ncpu_cores = 2\nmemory_gb = 8\n",
                i + 1
            );
        }
        for (a, b) in [("OP", "test"), ("RS", "test"), ("CD", "test"), ("OP", "RS"), ("OP", "CD")] {
            text += &format!("[[links]]\na = \"{a}\"\nb = \"{b}\"\nmean = 1.0\n");
        }
        match parse_scenario(&text) {
            Err(Error::IncompleteLinks { missing, .. }) => assert_eq!(missing, vec![(Site::Rs, Site::Cd)]),
            other => panic!("expected IncompleteLinks, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_scenario("nodes = 3"), Err(Error::ParseError(_))));
        assert!(matches!(parse_scenario("base = \"AS\"\npreset = \"fast\""), Err(Error::ParseError(_))));
        assert!(matches!(parse_scenario("preset = \"none\""), Err(Error::ParseError(_))));
    }
}
