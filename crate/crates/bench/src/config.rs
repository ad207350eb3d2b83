//! JSON experiment configuration.
//!
//! Relative paths inside a config (datasets, point files, the output directory)
//! are resolved against the directory holding the config file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mmdpoints_core::baselines::{HerdingConfig, SupportPointsConfig};
use mmdpoints_core::{DescentConfig, GaussianMixture, KernelSpec, NoiseSchedule, StepSchedule, Target};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Normalize};
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    StationaryMmd,
    Iid,
    Herding,
    SupportPoints,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::StationaryMmd,
        Method::Iid,
        Method::Herding,
        Method::SupportPoints,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::StationaryMmd => "stationary-mmd",
            Method::Iid => "iid",
            Method::Herding => "herding",
            Method::SupportPoints => "support-points",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(m) = Method::ALL.iter().find(|m| m.name() == s) {
            return Ok(*m);
        }
        let implemented = Method::ALL.map(|m| m.name()).join(", ");
        match s {
            "kt" | "qmc" => Err(format!(
                "method `{s}` is reserved for externally produced results and is not implemented here; \
                 implemented methods: {implemented}"
            )),
            _ => Err(format!("unknown method `{s}`; implemented methods: {implemented}")),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// Integrand specification: `f1`, `f2`, `gradspan:self`, `gradspan:<points.csv>`
/// or `rkhs:<coeffs-and-centers.csv>` (first column coefficients, remaining
/// columns the center coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum IntegrandSpec {
    F1,
    F2,
    GradSpanSelf,
    GradSpanFile(PathBuf),
    Rkhs(PathBuf),
}

impl IntegrandSpec {
    /// Metric name used in result rows.
    pub fn metric(&self) -> &'static str {
        match self {
            IntegrandSpec::F1 => "err:f1",
            IntegrandSpec::F2 => "err:f2",
            IntegrandSpec::GradSpanSelf | IntegrandSpec::GradSpanFile(_) => "err:gradspan",
            IntegrandSpec::Rkhs(_) => "err:rkhs",
        }
    }
}

impl FromStr for IntegrandSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f1" => return Ok(IntegrandSpec::F1),
            "f2" => return Ok(IntegrandSpec::F2),
            "gradspan:self" => return Ok(IntegrandSpec::GradSpanSelf),
            _ => {}
        }
        match s.split_once(':') {
            Some(("gradspan", p)) if !p.is_empty() => Ok(IntegrandSpec::GradSpanFile(p.into())),
            Some(("rkhs", p)) if !p.is_empty() => Ok(IntegrandSpec::Rkhs(p.into())),
            _ => Err(format!(
                "unknown integrand `{s}` (expected f1, f2, gradspan:self, gradspan:<csv> or rkhs:<csv>)"
            )),
        }
    }
}

impl fmt::Display for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrandSpec::F1 => f.write_str("f1"),
            IntegrandSpec::F2 => f.write_str("f2"),
            IntegrandSpec::GradSpanSelf => f.write_str("gradspan:self"),
            IntegrandSpec::GradSpanFile(p) => write!(f, "gradspan:{}", p.display()),
            IntegrandSpec::Rkhs(p) => write!(f, "rkhs:{}", p.display()),
        }
    }
}

impl TryFrom<String> for IntegrandSpec {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<IntegrandSpec> for String {
    fn from(s: IntegrandSpec) -> String {
        s.to_string()
    }
}

/// Target specification. As a string: `gmm:benchmark` (the 10-component 2-d
/// mixture), `normal:d=<d>` (standard normal) or `dataset:<path.csv>` (z-scored,
/// no header row). As an object: an inline mixture `{weights, means, covs}` or
/// `{dataset, normalize, header}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum TargetSpec {
    Benchmark,
    StandardNormal {
        dim: usize,
    },
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        /// Row-major `d x d` covariances.
        covs: Vec<Vec<f64>>,
    },
    Dataset {
        path: PathBuf,
        normalize: Normalize,
        header: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Name(String),
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covs: Vec<Vec<f64>>,
    },
    Dataset {
        dataset: PathBuf,
        #[serde(default)]
        normalize: Normalize,
        #[serde(default)]
        header: bool,
    },
}

impl TryFrom<TargetRepr> for TargetSpec {
    type Error = String;
    fn try_from(r: TargetRepr) -> std::result::Result<Self, String> {
        match r {
            TargetRepr::Name(s) => s.parse(),
            TargetRepr::Mixture { weights, means, covs } => Ok(TargetSpec::Mixture { weights, means, covs }),
            TargetRepr::Dataset {
                dataset,
                normalize,
                header,
            } => Ok(TargetSpec::Dataset {
                path: dataset,
                normalize,
                header,
            }),
        }
    }
}

impl From<TargetSpec> for TargetRepr {
    fn from(t: TargetSpec) -> Self {
        match t {
            TargetSpec::Benchmark | TargetSpec::StandardNormal { .. } => TargetRepr::Name(t.to_string()),
            TargetSpec::Mixture { weights, means, covs } => TargetRepr::Mixture { weights, means, covs },
            TargetSpec::Dataset {
                path,
                normalize,
                header,
            } => TargetRepr::Dataset {
                dataset: path,
                normalize,
                header,
            },
        }
    }
}

impl FromStr for TargetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "gmm:benchmark" {
            return Ok(TargetSpec::Benchmark);
        }
        if let Some(d) = s.strip_prefix("normal:d=") {
            let dim: usize = d.parse().map_err(|_| format!("bad dimension in `{s}`"))?;
            if dim == 0 {
                return Err("dimension must be at least 1".into());
            }
            return Ok(TargetSpec::StandardNormal { dim });
        }
        if let Some(p) = s.strip_prefix("dataset:").filter(|p| !p.is_empty()) {
            return Ok(TargetSpec::Dataset {
                path: p.into(),
                normalize: Normalize::Zscore,
                header: false,
            });
        }
        Err(format!(
            "unknown target `{s}` (expected gmm:benchmark, normal:d=<d>, dataset:<path> or an inline mixture)"
        ))
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Benchmark => f.write_str("gmm:benchmark"),
            TargetSpec::StandardNormal { dim } => write!(f, "normal:d={dim}"),
            TargetSpec::Mixture { weights, .. } => write!(f, "mixture({} components)", weights.len()),
            TargetSpec::Dataset { path, .. } => write!(f, "dataset:{}", path.display()),
        }
    }
}

impl TargetSpec {
    /// Builds the target, reading dataset files relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Target<f64>> {
        Ok(match self {
            TargetSpec::Benchmark => GaussianMixture::benchmark_2d().into(),
            TargetSpec::StandardNormal { dim } => GaussianMixture::isotropic(*dim, 1.0)?.into(),
            TargetSpec::Mixture { weights, means, covs } => {
                GaussianMixture::new(weights.clone(), means.clone(), covs.clone())?.into()
            }
            TargetSpec::Dataset {
                path,
                normalize,
                header,
            } => load_dataset(&base.join(path), *normalize, *header)?.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSettings {
    pub end: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySettings {
    pub iterations: usize,
    pub gamma: f64,
    pub schedule: NoiseSchedule,
    /// Geometric decay of the step from `gamma` to `end` over `[from, to]`.
    pub anneal: Option<AnnealSettings>,
    pub noise_until: Option<usize>,
    pub stop_residual: Option<f64>,
    pub log_every: usize,
    /// Standard deviation of a seeded perturbation of the all-zero start.
    pub init_jitter: Option<f64>,
}

impl Default for StationarySettings {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            gamma: 1.0,
            schedule: NoiseSchedule::power_law(1.0, 0.5),
            anneal: None,
            noise_until: None,
            stop_residual: None,
            log_every: 1000,
            init_jitter: None,
        }
    }
}

impl StationarySettings {
    pub fn descent_config(&self, seed: u64) -> DescentConfig {
        let mut cfg = DescentConfig::new(self.gamma, self.iterations, self.schedule.clone(), seed);
        if let Some(a) = &self.anneal {
            cfg.step = StepSchedule::Anneal {
                start: self.gamma,
                end: a.end,
                from: a.from,
                to: a.to,
            };
        }
        cfg.noise_until = self.noise_until;
        cfg.stop_residual = self.stop_residual;
        cfg.log_every = self.log_every;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HerdingSettings {
    pub candidate_pool: Option<usize>,
    pub local_refine: bool,
    pub refine_steps: usize,
}

impl Default for HerdingSettings {
    fn default() -> Self {
        let h = HerdingConfig::new(1, 0);
        Self {
            candidate_pool: h.candidate_pool,
            local_refine: h.local_refine,
            refine_steps: h.refine_steps,
        }
    }
}

impl HerdingSettings {
    pub fn config(&self, n: usize, seed: u64) -> HerdingConfig {
        HerdingConfig {
            n,
            candidate_pool: self.candidate_pool,
            local_refine: self.local_refine,
            refine_steps: self.refine_steps,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportPointsSettings {
    pub iterations: usize,
    pub step: f64,
    pub smoothing: f64,
}

impl Default for SupportPointsSettings {
    fn default() -> Self {
        Self {
            iterations: 1000,
            step: 0.05,
            smoothing: 1e-12,
        }
    }
}

impl SupportPointsSettings {
    pub fn config(&self, n: usize, seed: u64) -> SupportPointsConfig {
        SupportPointsConfig {
            n,
            iterations: self.iterations,
            step: self.step,
            smoothing: self.smoothing,
            seed,
        }
    }
}

/// Metrics computed directly from the point set, besides integration errors.
pub const POINT_METRICS: [&str; 2] = ["mmd", "residual"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Kernel spec string, e.g. `gaussian:l=1`.
    pub kernel: String,
    pub target: TargetSpec,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub repetitions: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub integrands: Vec<IntegrandSpec>,
    #[serde(default)]
    pub seed_base: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stationary: StationarySettings,
    #[serde(default)]
    pub herding: HerdingSettings,
    #[serde(default)]
    pub support_points: SupportPointsSettings,
    /// Record construction wall time; off by default so outputs are byte-stable.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_metrics() -> Vec<String> {
    vec!["mmd".into()]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            BenchError::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel
            .parse()
            .map_err(|e: mmdpoints_core::Error| BenchError::config("kernel", e.to_string()))
    }

    /// Metric names in output order: point metrics, then integration errors.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names = self.metrics.clone();
        names.extend(self.integrands.iter().map(|i| i.metric().to_string()));
        names
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_spec()?;
        if self.methods.is_empty() {
            return Err(BenchError::config("methods", "at least one method is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            if !seen.insert(*m) {
                return Err(BenchError::config(
                    format!("methods[{i}]"),
                    format!("duplicate method `{m}`"),
                ));
            }
        }
        if self.n_grid.is_empty() {
            return Err(BenchError::config("n_grid", "must not be empty"));
        }
        if self.n_grid[0] == 0 {
            return Err(BenchError::config("n_grid", "sizes must be at least 1"));
        }
        if let Some(w) = self.n_grid.windows(2).find(|w| w[1] <= w[0]) {
            return Err(BenchError::config(
                "n_grid",
                format!("must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        if self.repetitions == 0 {
            return Err(BenchError::config("repetitions", "must be at least 1"));
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if !POINT_METRICS.contains(&m.as_str()) {
                return Err(BenchError::config(
                    format!("metrics[{i}]"),
                    format!(
                        "unknown metric `{m}` (expected mmd or residual; integration errors come from `integrands`)"
                    ),
                ));
            }
        }
        let names = self.metric_names();
        if names.is_empty() {
            return Err(BenchError::config(
                "metrics",
                "need the mmd metric or at least one integrand",
            ));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name) {
                return Err(BenchError::config(
                    "integrands",
                    format!("metric `{name}` requested twice"),
                ));
            }
        }
        if let TargetSpec::Mixture { weights, means, covs } = &self.target {
            GaussianMixture::new(weights.clone(), means.clone(), covs.clone())
                .map_err(|e| BenchError::config("target", e.to_string()))?;
        }
        let sub = |name: &str, r: mmdpoints_core::Result<()>| r.map_err(|e| BenchError::config(name, e.to_string()));
        if self.methods.contains(&Method::StationaryMmd) {
            sub("stationary", self.stationary.descent_config(0).validate())?;
        }
        if self.methods.contains(&Method::Herding) {
            sub(
                "herding",
                self.herding.config(self.n_grid[self.n_grid.len() - 1], 0).validate(),
            )?;
        }
        if self.methods.contains(&Method::SupportPoints) {
            sub("support_points", self.support_points.config(1, 0).validate())?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    ExperimentConfig::from_json(&text)
}
