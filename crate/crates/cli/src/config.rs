//! Run configuration, accepted as TOML or JSON with identical keys.

use std::path::{Path, PathBuf};

use bs_core::symbols::{catalog_build, Params};
use bs_core::Interval;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub h_values: Vec<f64>,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub bs: BsConfig,
    #[serde(default)]
    pub orbit: OrbitConfig,
    #[serde(default)]
    pub actions: ActionsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub wkb: WkbConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(rename = "E_min")]
    pub e_min: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NRange {
    Auto(String),
    Explicit([i64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsConfig {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_n_range")]
    pub n_range: NRange,
}

fn default_orders() -> Vec<usize> {
    vec![0, 1, 2]
}

fn default_n_range() -> NRange {
    NRange::Auto("auto".into())
}

impl Default for BsConfig {
    fn default() -> Self {
        Self { orders: default_orders(), n_range: default_n_range() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    #[serde(default = "default_rk_tol")]
    pub rk_tol: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
}

fn default_rk_tol() -> f64 {
    1e-10
}

fn default_n_samples() -> usize {
    1024
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { rk_tol: default_rk_tol(), n_samples: default_n_samples() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionsConfig {
    #[serde(default, rename = "dE_step")]
    pub de_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxLength {
    Auto(String),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_box", rename = "L")]
    pub l: BoxLength,
    #[serde(default = "default_n", rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub dual_check: bool,
}

fn default_box() -> BoxLength {
    BoxLength::Auto("auto".into())
}

fn default_n() -> usize {
    bs_core::oracle::DEFAULT_N
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { l: default_box(), n: default_n(), dual_check: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WkbConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.1
}

impl Default for WkbConfig {
    fn default() -> Self {
        Self { enabled: false, margin: default_margin() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), formats: default_formats() }
    }
}

impl RunConfig {
    /// Reads a `.toml` or `.json` file; other extensions are parsed as TOML
    /// first and then as JSON.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let parsed = match ext.as_str() {
            "json" => serde_json::from_str(&text).map_err(|e| e.to_string()),
            "toml" => toml::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text)
                .map_err(|e| e.to_string())
                .or_else(|_| serde_json::from_str(&text).map_err(|e| e.to_string())),
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Validates the config and fills the window from the problem's default.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let model = catalog_build(&self.problem.name, &self.problem.params).map_err(|e| CliError::Config(e.to_string()))?;
        let allowed = model.energy_window();
        let window = self.window.unwrap_or(WindowConfig { e_min: allowed.min, e_max: allowed.max });
        if !(window.e_min < window.e_max) || !allowed.contains_interval(&Interval::new(window.e_min, window.e_max)) {
            return Err(CliError::Config(format!(
                "window [{}, {}] must be a non-empty sub-interval of the problem window [{}, {}]",
                window.e_min, window.e_max, allowed.min, allowed.max
            )));
        }
        self.window = Some(window);
        if self.h_values.is_empty() {
            return Err(CliError::Config("h_values must not be empty".into()));
        }
        if self.h_values.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(CliError::Config("h_values must be positive".into()));
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config("h_values must be strictly descending".into()));
        }
        if self.bs.orders.is_empty() || self.bs.orders.iter().any(|&o| o > 2) {
            return Err(CliError::Config("bs.orders must be a non-empty subset of {0, 1, 2}".into()));
        }
        self.bs.orders.sort_unstable();
        self.bs.orders.dedup();
        match &self.bs.n_range {
            NRange::Auto(s) if s != "auto" => {
                return Err(CliError::Config(format!("bs.n_range must be \"auto\" or [lo, hi], got \"{s}\"")))
            }
            NRange::Explicit([a, b]) if a > b => return Err(CliError::Config("bs.n_range lower bound exceeds upper".into())),
            _ => {}
        }
        if !(self.orbit.rk_tol > 0.0) || self.orbit.n_samples < 64 {
            return Err(CliError::Config("orbit.rk_tol must be positive and orbit.n_samples at least 64".into()));
        }
        if let Some(d) = self.actions.de_step {
            if !(d > 0.0) {
                return Err(CliError::Config("actions.dE_step must be positive".into()));
            }
        }
        match &self.oracle.l {
            BoxLength::Auto(s) if s != "auto" => {
                return Err(CliError::Config(format!("oracle.L must be \"auto\" or a number, got \"{s}\"")))
            }
            BoxLength::Fixed(l) if !(*l > 0.0) => return Err(CliError::Config("oracle.L must be positive".into())),
            _ => {}
        }
        if self.oracle.n < 2 || !self.oracle.n.is_power_of_two() {
            return Err(CliError::Config(format!("oracle.N = {} must be a power of two", self.oracle.n)));
        }
        if !(self.wkb.margin > 0.0 && self.wkb.margin < 0.25) {
            return Err(CliError::Config("wkb.margin must lie in (0, 0.25)".into()));
        }
        if self.output.formats.iter().any(|f| f != "csv" && f != "json") {
            return Err(CliError::Config("output.formats must be a subset of {csv, json}".into()));
        }
        Ok(self)
    }

    pub fn window_interval(&self) -> Interval {
        let w = self.window.expect("resolved config has a window");
        Interval::new(w.e_min, w.e_max)
    }

    pub fn n_range(&self) -> Option<(i64, i64)> {
        match self.bs.n_range {
            NRange::Explicit([a, b]) => Some((a, b)),
            NRange::Auto(_) => None,
        }
    }

    pub fn box_length(&self) -> Option<f64> {
        match self.oracle.l {
            BoxLength::Fixed(l) => Some(l),
            BoxLength::Auto(_) => None,
        }
    }

    pub fn writes(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    /// SHA-256 of the canonical JSON form of this config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
h_values = [0.1, 0.05]

[problem]
name = "harmonic"

[oracle]
L = 6.0
N = 256
"#;

    #[test]
    fn toml_and_json_agree() {
        let a: RunConfig = toml::from_str(TOML).unwrap();
        let json = r#"{"problem": {"name": "harmonic"}, "h_values": [0.1, 0.05], "oracle": {"L": 6.0, "N": 256}}"#;
        let b: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.resolve().unwrap().hash(), b.resolve().unwrap().hash());
    }

    #[test]
    fn defaults_are_materialized() {
        let c: RunConfig = toml::from_str(TOML).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.bs.orders, vec![0, 1, 2]);
        assert_eq!(r.window.unwrap().e_min, 0.005);
        assert_eq!(r.box_length(), Some(6.0));
        assert!(r.n_range().is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            r#"{"problem": {"name": "nope"}, "h_values": [0.1]}"#,
            r#"{"problem": {"name": "harmonic"}, "h_values": [0.05, 0.1]}"#,
            r#"{"problem": {"name": "harmonic"}, "h_values": [0.1], "oracle": {"N": 300}}"#,
            r#"{"problem": {"name": "harmonic"}, "h_values": [0.1], "window": {"E_min": 0.0, "E_max": 1.0}}"#,
            r#"{"problem": {"name": "harmonic"}, "h_values": [0.1], "bs": {"orders": [3]}}"#,
        ];
        for text in bad {
            let c: RunConfig = serde_json::from_str(text).unwrap();
            assert!(matches!(c.resolve(), Err(CliError::Config(_))), "{text}");
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"problem": {"name": "harmonic"}, "h_values": [0.1], "extra": 1}"#).is_err());
    }
}
