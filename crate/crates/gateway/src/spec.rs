use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadKind {
    Sentiment,
    HeavyClassify,
}

impl WorkloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadKind::Sentiment => "sentiment",
            WorkloadKind::HeavyClassify => "heavy-classify",
        }
    }

    pub fn default_work_units(self) -> f64 {
        match self {
            WorkloadKind::Sentiment => 1.0,
            WorkloadKind::HeavyClassify => 1000.0,
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentiment" | "sentiment-analysis" => Ok(WorkloadKind::Sentiment),
            "heavy-classify" | "img-classifier-hub" => Ok(WorkloadKind::HeavyClassify),
            _ => Err(format!("unknown workload {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub workload_kind: WorkloadKind,
    pub work_units: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub cold_start_ms: f64,
}

impl FunctionSpec {
    pub const DEFAULT_MAX_REPLICAS: u32 = 20;
    pub const DEFAULT_COLD_START_MS: f64 = 500.0;

    pub fn new(name: impl Into<String>, kind: WorkloadKind) -> Self {
        Self {
            name: name.into(),
            workload_kind: kind,
            work_units: kind.default_work_units(),
            min_replicas: 1,
            max_replicas: Self::DEFAULT_MAX_REPLICAS,
            cold_start_ms: Self::DEFAULT_COLD_START_MS,
        }
    }

    pub fn sentiment() -> Self {
        Self::new("sentiment-analysis", WorkloadKind::Sentiment)
    }

    pub fn heavy_classify() -> Self {
        Self::new("img-classifier-hub", WorkloadKind::HeavyClassify)
    }

    pub fn replicas(mut self, min: u32, max: u32) -> Self {
        self.min_replicas = min;
        self.max_replicas = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains('/') {
            return Err(Error::InvalidSpec("name must be non-empty and contain no '/'"));
        }
        if self.min_replicas < 1 || self.min_replicas > self.max_replicas {
            return Err(Error::InvalidSpec("need 1 <= min_replicas <= max_replicas"));
        }
        if !(self.work_units > 0.0 && self.work_units.is_finite()) {
            return Err(Error::InvalidSpec("work_units must be positive"));
        }
        if !(self.cold_start_ms >= 0.0 && self.cold_start_ms.is_finite()) {
            return Err(Error::InvalidSpec("cold_start_ms must be non-negative"));
        }
        Ok(())
    }
}
