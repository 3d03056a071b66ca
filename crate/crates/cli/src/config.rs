//! Resolved run configurations. Each starts from defaults, is overlaid by an
//! optional JSON file (a bare config or a previous run's manifest) and then
//! by command-line flags.

use std::path::Path;

use quasipot::gates::ScanSettings;
use quasipot::mc::{SimSettings, StopCondition};
use quasipot::model::{ModelParams, ModelSpec, NetworkDrift, Preset, BASELINE_ALPHA, BASELINE_NU};
use quasipot::qp::{Grid2D, Quadrature, SolverParams, FULL_WINDOW};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Custom topology; replaces the preset when present.
    pub custom: Option<ModelSpec>,
    pub nu: f64,
    pub alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            preset: Preset::TwoNode,
            custom: None,
            nu: BASELINE_NU,
            alpha: BASELINE_ALPHA,
        }
    }
}

impl ModelConfig {
    /// Network at zero coupling with the configured `nu` and `alpha`.
    pub fn template(&self) -> Result<NetworkDrift, CliError> {
        let net = match &self.custom {
            Some(spec) => {
                let mut spec = spec.clone();
                spec.nu = self.nu;
                spec.alpha = self.alpha;
                spec.beta = 0.0;
                NetworkDrift::from_spec(&spec)?
            }
            None => self
                .preset
                .build(ModelParams::new(self.nu, 0.0, self.alpha)?)?,
        };
        Ok(net)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n: usize,
    pub window: (f64, f64),
}

impl GridConfig {
    fn with_n(n: usize) -> Self {
        Self {
            n,
            window: FULL_WINDOW,
        }
    }

    pub fn build(&self) -> Result<Grid2D, CliError> {
        Ok(Grid2D::square(self.window, self.n)?)
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::with_n(256)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub k: usize,
    pub quadrature: Quadrature,
    pub anchor_radius_cells: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        Self {
            k: p.k,
            quadrature: p.quadrature,
            anchor_radius_cells: p.anchor_radius_cells,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            k: self.k,
            quadrature: self.quadrature,
            anchor_radius_cells: self.anchor_radius_cells,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriaConfig {
    pub model: ModelConfig,
    pub beta_range: (f64, f64),
    pub step: f64,
}

impl Default for EquilibriaConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            beta_range: (0.0, 0.5),
            step: 1.0 / 256.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpConfig {
    pub model: ModelConfig,
    pub beta: f64,
    pub anchor: String,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    /// Contour levels; empty means fractions of the gate height.
    pub levels: Vec<f64>,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            beta: 0.1,
            anchor: "QQ".into(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            levels: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateScanConfig {
    pub model: ModelConfig,
    pub anchor: String,
    pub pair: (String, String),
    pub beta_range: (f64, f64),
    pub grid: GridConfig,
    /// Side of the square grid used for the coarse pass; the main grid when absent.
    pub coarse_n: Option<usize>,
    pub tol_beta: f64,
    pub coarse_samples: usize,
    pub solver: SolverConfig,
}

impl Default for GateScanConfig {
    fn default() -> Self {
        let s = ScanSettings::default();
        Self {
            model: ModelConfig::default(),
            anchor: "AQ".into(),
            pair: ("SQ".into(), "AS".into()),
            beta_range: (0.15, 0.20),
            grid: GridConfig::with_n(512),
            coarse_n: None,
            tol_beta: s.tol_beta,
            coarse_samples: s.coarse_samples,
            solver: SolverConfig::default(),
        }
    }
}

impl GateScanConfig {
    pub fn settings(&self) -> Result<ScanSettings, CliError> {
        let coarse_grid = self
            .coarse_n
            .map(|n| {
                GridConfig {
                    n,
                    window: self.grid.window,
                }
                .build()
            })
            .transpose()?;
        Ok(ScanSettings {
            tol_beta: self.tol_beta,
            coarse_samples: self.coarse_samples,
            coarse_grid,
            solver: self.solver.params(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub model: ModelConfig,
    /// Sweep values; every combination is run.
    pub betas: Vec<f64>,
    /// Overrides `model.alpha` when non-empty.
    pub alphas: Vec<f64>,
    /// Overrides `model.nu` when non-empty.
    pub nus: Vec<f64>,
    /// `"quiescent"` for all nodes at `x_Q`, or an equilibrium label.
    pub start: String,
    pub simulation: SimSettings,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            betas: vec![0.1],
            alphas: Vec::new(),
            nus: Vec::new(),
            start: "quiescent".into(),
            simulation: SimSettings::default(),
        }
    }
}

impl McConfig {
    /// Sweep points as `(nu, alpha, beta)`.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let nus = if self.nus.is_empty() {
            vec![self.model.nu]
        } else {
            self.nus.clone()
        };
        let alphas = if self.alphas.is_empty() {
            vec![self.model.alpha]
        } else {
            self.alphas.clone()
        };
        let mut out = Vec::new();
        for &nu in &nus {
            for &alpha in &alphas {
                for &beta in &self.betas {
                    out.push((nu, alpha, beta));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContoursConfig {
    pub field: String,
    pub levels: Vec<f64>,
}

impl Default for ContoursConfig {
    fn default() -> Self {
        Self {
            field: "field.qpf".into(),
            levels: Vec::new(),
        }
    }
}

/// Loads a config of type `T`, or the `config` member of a manifest written
/// by the same command.
pub fn load<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let body = match (doc.get("command"), doc.get("config")) {
        (Some(c), Some(cfg)) => {
            if c.as_str() != Some(command) {
                return Err(CliError::Config(format!(
                    "{} is a manifest for {c}, not {command:?}",
                    path.display()
                )));
            }
            cfg.clone()
        }
        _ => doc,
    };
    serde_json::from_value(body).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_stop(s: &str) -> Result<StopCondition, String> {
    match s {
        "all-above" => Ok(StopCondition::AllAbove),
        "first-event" => Ok(StopCondition::FirstEvent),
        _ => Err(format!("expected all-above or first-event, got {s:?}")),
    }
}

pub fn parse_quadrature(s: &str) -> Result<Quadrature, String> {
    match s {
        "midpoint" => Ok(Quadrature::Midpoint),
        "three-point" => Ok(Quadrature::ThreePoint),
        _ => Err(format!("expected midpoint or three-point, got {s:?}")),
    }
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// A comma list of numbers, or `start:stop:step` with both ends included.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("bad range {s:?}"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| a + k as f64 * step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("expected a list or start:stop:step, got {s:?}")),
    }
}
