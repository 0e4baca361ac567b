use std::path::{Path, PathBuf};

use graphflow_core::{Grid, MapField, Mat2, Perturbation};
use serde::{Deserialize, Serialize};

use crate::Failure;

fn default_cfl() -> f64 {
    graphflow_core::flow::DEFAULT_CFL
}

/// One experiment, read from a TOML file.
///
/// ```toml
/// n = 64
/// L = 6.283185307179586
/// t_end = 1.0
/// cadence = 10
/// M = [0.8, 0.0, 0.0, 0.5]
/// output_dir = "out/example"
///
/// [perturbation]
/// kind = "sine"
/// amplitude = 0.1
/// mode = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    /// Diagnostics every `cadence` steps.
    pub cadence: u64,
    /// Linear part, row-major: `[M11, M12, M21, M22]`.
    #[serde(rename = "M")]
    pub linear: [f64; 4],
    #[serde(default)]
    pub seed: u64,
    /// Relative paths are taken from the working directory.
    pub output_dir: PathBuf,
    /// Requires `min tr(s) > 0` initially and at every emitted state.
    #[serde(default)]
    pub area_decreasing: bool,
    /// A snapshot every this many diagnostics records. With 0 only the
    /// initial and final states are written.
    #[serde(default)]
    pub snapshot_every: u64,
    pub perturbation: Perturbation,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Failure> {
        let config: Self =
            toml::from_str(text).map_err(|e| Failure::malformed(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::malformed(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.grid()?;
        let bad = |msg: String| Err(Failure::malformed(format!("config: {msg}")));
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl = {} must lie in (0, 0.5]", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1".into());
        }
        if !self.linear.iter().all(|v| v.is_finite()) {
            return bad("M must be finite".into());
        }
        if !self.perturbation.amplitude().is_finite() {
            return bad("perturbation amplitude must be finite".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        Grid::new(self.n, self.period).map_err(|e| Failure::malformed(format!("config: {e}")))
    }

    pub fn linear_map(&self) -> Mat2 {
        let m = self.linear;
        [[m[0], m[1]], [m[2], m[3]]]
    }

    /// The initial map at resolution `n` (which may differ from `self.n`).
    pub fn initial_field_at(&self, n: usize) -> Result<MapField, Failure> {
        let grid =
            Grid::new(n, self.period).map_err(|e| Failure::malformed(format!("config: {e}")))?;
        Ok(self.perturbation.field(grid, self.linear_map(), self.seed))
    }

    pub fn initial_field(&self) -> Result<MapField, Failure> {
        self.initial_field_at(self.n)
    }

    /// The configuration as TOML, one line per entry. Written into the
    /// header of every output file.
    pub fn echo(&self) -> Vec<String> {
        let text = toml::to_string(self).expect("config serializes");
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect()
    }

    /// Recovers a configuration from the `# ` header lines of an output file.
    pub fn from_echo(header: &str) -> Result<Self, Failure> {
        let body: String = header
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .filter(|l| !l.starts_with("graphflow-") && !l.starts_with("height="))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::from_toml(&body)
    }
}
