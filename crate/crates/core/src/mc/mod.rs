//! Ensembles of the noisy network integrated with the stochastic Heun
//! scheme, with threshold-based escape and return detection.

mod events;
mod stats;

pub use events::{
    detect_events, final_order, EscapeRecord, EventDetector, SignedNode, StopCondition,
};
pub use stats::{sequence_key, summarize, write_records_csv, write_summary_json, StatsSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkDrift, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub network: NetworkDrift,
    pub dt: f64,
    /// Escape threshold, `x_S < xi <= x_A`.
    pub xi: f64,
    /// Return threshold, `x_Q <= xi_prime < x_S`.
    pub xi_prime: f64,
    pub n_realisations: usize,
    /// Realisations still running at this time are marked incomplete.
    pub t_max: f64,
    pub master_seed: u64,
    pub stop: StopCondition,
}

/// Serializable part of a [`SimConfig`], as written to run manifests.
/// Missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub dt: f64,
    pub xi: f64,
    pub xi_prime: f64,
    pub n_realisations: usize,
    pub t_max: f64,
    pub master_seed: u64,
    pub stop: StopCondition,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            xi: 0.55,
            xi_prime: 0.0,
            n_realisations: 2000,
            t_max: 1e5,
            master_seed: 0,
            stop: StopCondition::AllAbove,
        }
    }
}

impl SimConfig {
    pub fn new(network: NetworkDrift, s: &SimSettings) -> Result<Self> {
        let c = Self {
            network,
            dt: s.dt,
            xi: s.xi,
            xi_prime: s.xi_prime,
            n_realisations: s.n_realisations,
            t_max: s.t_max,
            master_seed: s.master_seed,
            stop: s.stop,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn settings(&self) -> SimSettings {
        SimSettings {
            dt: self.dt,
            xi: self.xi,
            xi_prime: self.xi_prime,
            n_realisations: self.n_realisations,
            t_max: self.t_max,
            master_seed: self.master_seed,
            stop: self.stop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.network.frozen().is_empty() {
            return Err(Error::InvalidConfig(
                "simulations need a network without frozen nodes".into(),
            ));
        }
        let s = self.network.params().node_states();
        if !(self.xi > s.saddle && self.xi <= s.active) {
            return Err(Error::InvalidConfig(format!(
                "xi = {} must lie in ({}, {}]",
                self.xi, s.saddle, s.active
            )));
        }
        if !(self.xi_prime >= s.quiescent && self.xi_prime < s.saddle) {
            return Err(Error::InvalidConfig(format!(
                "xi' = {} must lie in [{}, {})",
                self.xi_prime, s.quiescent, s.saddle
            )));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) {
            return Err(Error::InvalidConfig("dt and t_max must be positive".into()));
        }
        Ok(())
    }
}

/// One stochastic Heun step with unit normal draws `noise`; the same
/// increment enters predictor and corrector.
pub fn heun_step(
    network: &NetworkDrift,
    x: &StateVector,
    dt: f64,
    noise: &[f64],
) -> Result<StateVector> {
    let n = network.dim();
    if x.len() != n || noise.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { noise.len() },
        });
    }
    let mut out = x.0.clone();
    let mut scratch = Scratch::new(n);
    let amp = network.params().alpha * dt.sqrt();
    let dw: Vec<f64> = noise.iter().map(|z| amp * z).collect();
    heun_in_place(network, &mut out, dt, &dw, &mut scratch);
    Ok(StateVector(out))
}

struct Scratch {
    f0: Vec<f64>,
    f1: Vec<f64>,
    pred: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            f0: vec![0.0; n],
            f1: vec![0.0; n],
            pred: vec![0.0; n],
        }
    }
}

/// `dw` already carries the factor `alpha * sqrt(dt)`.
#[inline]
fn heun_in_place(network: &NetworkDrift, x: &mut [f64], dt: f64, dw: &[f64], s: &mut Scratch) {
    network.drift_into(x, &mut s.f0);
    for i in 0..x.len() {
        s.pred[i] = x[i] + s.f0[i] * dt + dw[i];
    }
    network.drift_into(&s.pred, &mut s.f1);
    for i in 0..x.len() {
        x[i] += 0.5 * (s.f0[i] + s.f1[i]) * dt + dw[i];
    }
}

/// Independent generator for realisation `k` and node `i`.
pub fn node_rng(master_seed: u64, k: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((k << 16) | i as u64);
    rng
}

/// Integrates one realisation from `initial` until the stop condition or `t_max`.
pub fn simulate(config: &SimConfig, initial: &[f64], k: u64) -> EscapeRecord {
    let n = initial.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| node_rng(config.master_seed, k, i)).collect();
    let amp = config.network.params().alpha * config.dt.sqrt();
    let mut x = initial.to_vec();
    let mut dw = vec![0.0; n];
    let mut scratch = Scratch::new(n);
    let mut det = EventDetector::new(initial, config.xi, config.xi_prime, config.stop, k);
    let steps = (config.t_max / config.dt).ceil() as u64;
    for step in 1..=steps {
        for (d, r) in dw.iter_mut().zip(rngs.iter_mut()) {
            let z: f64 = StandardNormal.sample(r);
            *d = amp * z;
        }
        heun_in_place(&config.network, &mut x, config.dt, &dw, &mut scratch);
        if det.observe(step as f64 * config.dt, &x) {
            break;
        }
    }
    det.finish()
}

/// Runs every realisation, in parallel, returning records ordered by index.
pub fn run_ensemble(config: &SimConfig, initial: &StateVector) -> Result<Vec<EscapeRecord>> {
    config.validate()?;
    if initial.len() != config.network.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.network.dim(),
            got: initial.len(),
        });
    }
    Ok((0..config.n_realisations as u64)
        .into_par_iter()
        .map(|k| simulate(config, initial, k))
        .collect())
}
