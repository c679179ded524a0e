//! Experiment configuration, read from TOML. Every field except `name`,
//! `system` and `observable` has a default.
//!
//! ```toml
//! name = "doubling-cos4pi"
//! seed = 7
//!
//! [system]
//! kind = "doubling"            # or "lsv" with gamma, or "flow" with base and roof
//!
//! [observable]
//! components = [{ cos = [[2, 1.0]] }]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RatelabError;
use crate::decomp::TrigPoly;
use crate::dynsys::{MapSystem, DEFAULT_BURN_IN};
use crate::pathspace::DEFAULT_GRID;
use crate::suspension::{RoofFunction, SuspensionFlow, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    W1,
    Pi,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::W1 => "W1",
            Metric::Pi => "Pi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Doubling,
    Lsv { gamma: f64 },
}

impl MapSpec {
    pub fn build(self) -> Result<MapSystem, RatelabError> {
        Ok(match self {
            MapSpec::Doubling => MapSystem::doubling(),
            MapSpec::Lsv { gamma } => {
                MapSystem::lsv(gamma).map_err(|e| RatelabError::Config(e.to_string()))?
            }
        })
    }

    pub fn gamma(self) -> Option<f64> {
        match self {
            MapSpec::Doubling => None,
            MapSpec::Lsv { gamma } => Some(gamma),
        }
    }
}

/// `r(x) = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoofSpec {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    Doubling,
    Lsv { gamma: f64 },
    Flow { base: MapSpec, roof: RoofSpec },
}

/// What is simulated.
#[derive(Debug, Clone)]
pub enum Process {
    Map(MapSystem),
    Flow(SuspensionFlow),
}

impl SystemSpec {
    pub fn base(self) -> MapSpec {
        match self {
            SystemSpec::Doubling => MapSpec::Doubling,
            SystemSpec::Lsv { gamma } => MapSpec::Lsv { gamma },
            SystemSpec::Flow { base, .. } => base,
        }
    }

    pub fn build(self) -> Result<Process, RatelabError> {
        let base = self.base().build()?;
        Ok(match self {
            SystemSpec::Flow { roof, .. } => {
                let roof = RoofFunction::affine(roof.a, roof.b)
                    .map_err(|e| RatelabError::Config(e.to_string()))?;
                Process::Flow(
                    SuspensionFlow::new(base, roof)
                        .map_err(|e| RatelabError::Config(e.to_string()))?,
                )
            }
            _ => Process::Map(base),
        })
    }
}

/// One component `Σ a_k cos(2πkx) + b_k sin(2πkx)`, given as `[k, a]` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    #[serde(default)]
    pub cos: Vec<(usize, f64)>,
    #[serde(default)]
    pub sin: Vec<(usize, f64)>,
}

impl ComponentSpec {
    pub fn poly(&self) -> TrigPoly {
        let mut p = TrigPoly::zero();
        for &(k, a) in &self.cos {
            p = &p + &TrigPoly::cos(k, a);
        }
        for &(k, b) in &self.sin {
            p = &p + &TrigPoly::sin(k, b);
        }
        p
    }
}

/// A trigonometric observable of the base coordinate. On a flow it is
/// independent of the height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub components: Vec<ComponentSpec>,
}

impl ObservableSpec {
    pub fn polys(&self) -> Vec<TrigPoly> {
        self.components.iter().map(ComponentSpec::poly).collect()
    }
}

/// Either `"auto"` or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Keyword(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Keyword("auto".into())
    }
}

/// Long-orbit estimates used when no closed form is available: the
/// Green–Kubo covariance and the invariant mean. The mean gets its own,
/// longer orbit because its error is amplified by `√n` in the paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenKuboSpec {
    pub max_lag: usize,
    pub orbit_len: usize,
    pub mean_orbit_len: usize,
}

impl Default for GreenKuboSpec {
    fn default() -> Self {
        Self {
            max_lag: 400,
            orbit_len: 4_000_000,
            mean_orbit_len: 50_000_000,
        }
    }
}

fn default_n_grid() -> Vec<usize> {
    (7..=13).map(|e| 1 << e).collect()
}
fn default_m() -> usize {
    256
}
fn default_d() -> usize {
    DEFAULT_GRID
}
fn default_replicates() -> usize {
    8
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::W1, Metric::Pi]
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_burn_in() -> u64 {
    DEFAULT_BURN_IN
}
fn default_cells() -> usize {
    crate::decomp::DEFAULT_GRID
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemSpec,
    pub observable: ObservableSpec,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    /// Atoms per empirical measure.
    #[serde(rename = "M", alias = "m", default = "default_m")]
    pub m: usize,
    /// Comparison grid `i/d`.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    /// Replicate count when `seeds` is absent; replicate `r` then uses
    /// `mix(seed, r)`.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub sigma: SigmaSpec,
    #[serde(default)]
    pub green_kubo: GreenKuboSpec,
    /// Subtract the invariant mean of the observable before simulating.
    #[serde(default = "yes")]
    pub center: bool,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    /// Quadrature step for flow integrals.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Grid for tabulated decompositions.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults around the given system and observable.
    pub fn new(name: &str, system: SystemSpec, observable: ObservableSpec) -> Self {
        Self {
            name: name.to_owned(),
            system,
            observable,
            n_grid: default_n_grid(),
            m: default_m(),
            d: default_d(),
            seed: 0,
            replicates: default_replicates(),
            seeds: None,
            metrics: default_metrics(),
            sigma: SigmaSpec::default(),
            green_kubo: GreenKuboSpec::default(),
            center: true,
            burn_in: default_burn_in(),
            dt: default_dt(),
            cells: default_cells(),
            out_dir: default_out_dir(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RatelabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RatelabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RatelabError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RatelabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Replicate seeds, in configuration order.
    pub fn replicate_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.replicates as u64)
                .map(|r| crate::rng::mix(self.seed, r))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), RatelabError> {
        let bad = |msg: String| Err(RatelabError::Config(msg));
        if self.name.is_empty()
            || self.name.contains(['/', '\\'])
            || self.name == "."
            || self.name == ".."
        {
            return bad(format!(
                "name {:?} cannot be used as a directory name",
                self.name
            ));
        }
        if self.n_grid.is_empty()
            || self.n_grid[0] == 0
            || self.n_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("n_grid must be positive and strictly increasing".into());
        }
        if self.m < 2 {
            return bad(format!("M must be at least 2, got {}", self.m));
        }
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        let seeds = self.replicate_seeds();
        if seeds.is_empty() {
            return bad("at least one replicate is required".into());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return bad("replicate seeds must be distinct".into());
        }
        if self.metrics.is_empty() {
            return bad("select at least one metric".into());
        }
        if self.observable.components.is_empty() {
            return bad("observable needs at least one component".into());
        }
        let dim = self.observable.components.len();
        match &self.sigma {
            SigmaSpec::Keyword(k) if k == "auto" => {}
            SigmaSpec::Keyword(k) => {
                return bad(format!("sigma must be \"auto\" or a matrix, got {k:?}"))
            }
            SigmaSpec::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return bad(format!("sigma must be {dim}x{dim}"));
                }
            }
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.green_kubo.orbit_len <= self.green_kubo.max_lag {
            return bad("green_kubo.orbit_len must exceed max_lag".into());
        }
        if self.green_kubo.mean_orbit_len == 0 {
            return bad("green_kubo.mean_orbit_len must be positive".into());
        }
        if self.cells < 2 {
            return bad("cells must be at least 2".into());
        }
        if let Some(g) = self.system.base().gamma() {
            if !(0.0..0.5).contains(&g) {
                return bad(format!(
                    "gamma = {g} is outside [0, 1/2), where the invariance principle holds"
                ));
            }
        }
        self.system.build()?;
        Ok(())
    }
}
