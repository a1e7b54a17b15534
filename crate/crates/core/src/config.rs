//! Experiment configuration.
//!
//! A config is a TOML document with top-level keys and at most one level of
//! tables. Command-line overrides use the same dotted keys
//! (`eps.values=[0.1,0.05,0.025]`, `m.kind="power"`) and are applied before
//! validation.
//!
//! ```toml
//! experiment = "single_peak_sweep"
//! dim = 1
//! p = 4.0
//! v = "1 + x^2"
//! seed = 7
//! out = "out/sweep"
//!
//! [m]
//! kind = "affine"
//! a = 1.0
//! b = 1.0
//!
//! [eps]
//! max = 0.1
//! factor = 0.5
//! count = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expression;
use crate::kirchhoff_map::{KirchhoffFunction, KirchhoffSpec};
use crate::profiles::critical_exponent;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override '{0}': expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GroundState,
    Conditions,
    Roots,
    DeltaEps,
    SinglePeak,
    SinglePeakSweep,
    Zeros,
    MultipeakSweep,
    Threshold,
    Probe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::GroundState => "ground_state",
            Self::Conditions => "conditions",
            Self::Roots => "roots",
            Self::DeltaEps => "delta_eps",
            Self::SinglePeak => "single_peak",
            Self::SinglePeakSweep => "single_peak_sweep",
            Self::Zeros => "zeros",
            Self::MultipeakSweep => "multipeak_sweep",
            Self::Threshold => "threshold",
            Self::Probe => "probe",
        }
    }
}

/// Either an explicit list or a geometric sequence `max * factor^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    pub values: Option<Vec<f64>>,
    pub max: Option<f64>,
    pub factor: Option<f64>,
    pub count: Option<usize>,
}

impl Default for EpsConfig {
    fn default() -> Self {
        Self {
            values: Some(vec![0.1, 0.05, 0.025]),
            max: None,
            factor: None,
            count: None,
        }
    }
}

impl EpsConfig {
    pub fn list(&self) -> Result<Vec<f64>, ConfigError> {
        match (&self.values, self.max, self.factor, self.count) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(max), Some(factor), Some(count)) => {
                if !(factor > 0.0 && factor < 1.0) {
                    return Err(ConfigError::Invalid(format!("eps.factor must lie in (0, 1), got {factor}")));
                }
                Ok((0..count).map(|i| max * factor.powi(i as i32)).collect())
            }
            _ => Err(ConfigError::Invalid(
                "eps needs either `values` or all of `max`, `factor`, `count`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Exact rescaling when `V` is constant, finite differences otherwise.
    #[default]
    Auto,
    Exact,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub family: FamilyKind,
    pub cells_per_delta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            family: FamilyKind::Auto,
            cells_per_delta: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootsConfig {
    /// `A`; taken from the ground state at `V(P)` when absent.
    pub a: Option<f64>,
    pub bracket: [f64; 2],
    pub resolution: usize,
}

impl Default for RootsConfig {
    fn default() -> Self {
        Self {
            a: None,
            bracket: [1e-3, 1e3],
            resolution: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZerosConfig {
    /// Leading parts `h_i` of `dV/dx_i`, one expression per coordinate.
    pub leading: Vec<String>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub radius: f64,
    /// Search box per axis for the shift `y`; `[-2, 2]` when empty.
    pub bounds: Vec<[f64; 2]>,
    pub resolution: usize,
    /// Declared `(V0, V1)`.
    pub v_bounds: Option<[f64; 2]>,
    pub gamma: f64,
}

impl Default for ZerosConfig {
    fn default() -> Self {
        Self {
            leading: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            radius: 1.0,
            bounds: Vec::new(),
            resolution: 32,
            v_bounds: None,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiPeakConfig {
    pub peaks: Vec<Vec<f64>>,
    pub alpha: f64,
    pub polish: bool,
    pub cells_per_delta: f64,
    pub margin: f64,
}

impl Default for MultiPeakConfig {
    fn default() -> Self {
        Self {
            peaks: Vec::new(),
            alpha: 2.0,
            polish: true,
            cells_per_delta: 1000.0,
            margin: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonexistenceConfig {
    pub eta: f64,
    pub c_eta: f64,
    /// Constant potentials to probe; twice the computed bound when empty.
    pub v: Vec<f64>,
    pub trials: usize,
    /// Potentials at which a correspondence-seeded solve is attempted.
    pub seeded: Vec<f64>,
}

impl Default for NonexistenceConfig {
    fn default() -> Self {
        Self {
            eta: 0.0,
            c_eta: 1.0,
            v: Vec::new(),
            trials: 10,
            seeded: Vec::new(),
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_dim() -> usize {
    1
}

fn default_p() -> f64 {
    4.0
}

fn default_v() -> String {
    "1".into()
}

fn default_m() -> KirchhoffSpec {
    KirchhoffSpec::Constant { c: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Nonlinearity exponent (`l` in the nonexistence experiments).
    #[serde(default = "default_p")]
    pub p: f64,
    /// Potential as an expression in `x` (or `x1, x2, x3`).
    #[serde(default = "default_v")]
    pub v: String,
    /// Concentration point; the origin when absent.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default = "default_m")]
    pub m: KirchhoffSpec,
    #[serde(default)]
    pub eps: EpsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub roots: RootsConfig,
    #[serde(default)]
    pub zeros: ZerosConfig,
    #[serde(default)]
    pub multipeak: MultiPeakConfig,
    #[serde(default)]
    pub nonexistence: NonexistenceConfig,
}

impl ExperimentConfig {
    /// Read a TOML file into a raw table (no validation yet).
    pub fn read_table(path: &Path) -> Result<toml::Table, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Deserialize and validate.
    pub fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table = text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_table(Self::read_table(path)?)
    }

    pub fn kirchhoff(&self) -> KirchhoffFunction {
        KirchhoffFunction::from_spec(self.m).expect("validated M spec")
    }

    pub fn potential(&self) -> Expression {
        Expression::parse(&self.v).expect("validated potential")
    }

    pub fn point(&self) -> Vec<f64> {
        self.point.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn eps_list(&self) -> Vec<f64> {
        self.eps.list().expect("validated eps list")
    }

    fn needs_ground_state(&self) -> bool {
        use ExperimentKind::*;
        match self.experiment {
            GroundState | DeltaEps | SinglePeak | SinglePeakSweep | Zeros | MultipeakSweep => true,
            Roots => self.roots.a.is_none(),
            Probe => !self.nonexistence.seeded.is_empty(),
            Conditions | Threshold => false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use ExperimentKind::*;
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        KirchhoffFunction::from_spec(self.m).map_err(|e| ConfigError::Invalid(format!("m: {e}")))?;
        let v = Expression::parse(&self.v).map_err(|e| ConfigError::Invalid(format!("v: {e}")))?;
        if v.dim() > self.dim && !v.is_constant() {
            return bad(format!("v uses x{} but dim = {}", v.dim(), self.dim));
        }
        let point = self.point();
        if point.len() != self.dim {
            return bad(format!("point has {} coordinates, dim = {}", point.len(), self.dim));
        }
        if self.needs_ground_state() {
            if self.dim > 3 {
                return bad(format!("ground states are computed for dim 1..=3, got {}", self.dim));
            }
            let upper = critical_exponent(self.dim);
            if !(self.p > 2.0 && self.p < upper) {
                return bad(format!("p = {} outside (2, {upper}) for dim {}", self.p, self.dim));
            }
            let vp = v.eval(&point);
            if !(vp > 0.0) {
                return bad(format!("V(P) = {vp} must be positive"));
            }
        }
        if matches!(self.experiment, DeltaEps | SinglePeak | SinglePeakSweep | MultipeakSweep) {
            let eps = self.eps.list()?;
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                return bad("eps values must be positive and nonempty".into());
            }
            if matches!(self.experiment, SinglePeakSweep | MultipeakSweep) {
                if eps.len() < 3 {
                    return bad(format!("a sweep needs at least 3 eps values, got {}", eps.len()));
                }
                if eps.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("sweep eps values must be strictly decreasing".into());
                }
            }
            if !(self.grid.cells_per_delta >= 10.0) {
                return bad("grid.cells_per_delta must be at least 10".into());
            }
        }
        match self.experiment {
            Roots => {
                let [lo, hi] = self.roots.bracket;
                if !(lo > 0.0 && hi > lo) {
                    return bad(format!("roots.bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
                }
                if self.roots.resolution < 1000 {
                    return bad("roots.resolution must be at least 1000".into());
                }
                if let Some(a) = self.roots.a {
                    if !(a > 0.0) {
                        return bad("roots.a must be positive".into());
                    }
                }
            }
            Zeros => {
                let z = &self.zeros;
                if z.leading.len() != self.dim || z.alpha.len() != self.dim || z.beta.len() != self.dim {
                    return bad(format!("zeros.leading, zeros.alpha and zeros.beta need {} entries each", self.dim));
                }
                for h in &z.leading {
                    Expression::parse(h).map_err(|e| ConfigError::Invalid(format!("zeros.leading: {e}")))?;
                }
                if !z.bounds.is_empty() && z.bounds.len() != self.dim {
                    return bad(format!("zeros.bounds needs {} intervals", self.dim));
                }
                if z.bounds.iter().any(|[a, b]| !(b > a)) {
                    return bad("zeros.bounds intervals must have lo < hi".into());
                }
                if z.resolution < 32 {
                    return bad("zeros.resolution must be at least 32".into());
                }
            }
            MultipeakSweep => {
                let mp = &self.multipeak;
                if mp.peaks.is_empty() {
                    return bad("multipeak.peaks is empty".into());
                }
                if mp.peaks.iter().any(|q| q.len() != self.dim) {
                    return bad(format!("every peak needs {} coordinates", self.dim));
                }
                if self.dim != 1 {
                    return bad("multi-peak solutions are built in dim 1 only".into());
                }
            }
            Threshold | Probe => {
                if self.dim < 3 {
                    return bad(format!("nonexistence needs dim >= 3, got {}", self.dim));
                }
                let upper = critical_exponent(self.dim);
                if !(self.p > 2.0 + 4.0 / self.dim as f64 && self.p < upper) {
                    return bad(format!(
                        "p = {} outside (2 + 4/N, {upper}) for the threshold",
                        self.p
                    ));
                }
                let ne = &self.nonexistence;
                if !(ne.eta >= 0.0 && ne.c_eta > 0.0) {
                    return bad("nonexistence needs eta >= 0 and c_eta > 0".into());
                }
                if ne.v.iter().chain(&ne.seeded).any(|v| !(*v > 0.0)) {
                    return bad("probe potentials must be positive".into());
                }
                if self.experiment == Probe && ne.trials == 0 && ne.seeded.is_empty() {
                    return bad("probe needs trials > 0 or a seeded potential".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Apply `key=value` overrides; `value` is parsed as a TOML value and falls
/// back to a bare string. Keys are `name` or `table.name`.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.clone()))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = format!("value = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("value"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        set_key(table, key, value).map_err(|_| ConfigError::Override(item.clone()))?;
    }
    Ok(())
}

/// Set a dotted key, creating the table when needed.
pub fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    match key.split_once('.') {
        None if !key.is_empty() => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((outer, inner)) if !outer.is_empty() && !inner.is_empty() && !inner.contains('.') => {
            let entry = table
                .entry(outer.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => {
                    t.insert(inner.to_string(), value);
                    Ok(())
                }
                _ => Err(ConfigError::Override(key.to_string())),
            }
        }
        _ => Err(ConfigError::Override(key.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str("experiment = \"ground_state\"").unwrap();
        assert_eq!(cfg.dim, 1);
        assert_eq!(cfg.p, 4.0);
        assert_eq!(cfg.m, KirchhoffSpec::Constant { c: 1.0 });
        assert_eq!(cfg.eps_list(), vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn geometric_eps() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"single_peak_sweep\"\n[eps]\nmax = 0.1\nfactor = 0.5\ncount = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.eps_list(), vec![0.1, 0.05, 0.025, 0.0125]);
    }

    #[test]
    fn sweep_needs_three_values() {
        let err = ExperimentConfig::from_toml_str("experiment = \"single_peak_sweep\"\n[eps]\nvalues = [0.1]\n").unwrap_err();
        assert!(err.to_string().contains("at least 3"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("experiment = \"roots\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"").is_err());
    }

    #[test]
    fn overrides_replace_and_create_keys() {
        let mut t: toml::Table = "experiment = \"roots\"\ndim = 3\n".parse().unwrap();
        apply_overrides(
            &mut t,
            &["dim=5".into(), "m.kind=affine".into(), "m.a=0.05".into(), "m.b=1".into(), "roots.a=1".into()],
        )
        .unwrap();
        let cfg = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(cfg.dim, 5);
        assert_eq!(cfg.m, KirchhoffSpec::Affine { a: 0.05, b: 1.0 });
        assert_eq!(cfg.roots.a, Some(1.0));
        let mut t = toml::Table::new();
        assert!(apply_overrides(&mut t, &["novalue".into()]).is_err());
        assert!(apply_overrides(&mut t, &["a.b.c=1".into()]).is_err());
    }

    #[test]
    fn bad_exponent_is_a_config_error() {
        let err = ExperimentConfig::from_toml_str("experiment = \"ground_state\"\ndim = 3\np = 7.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }
}
