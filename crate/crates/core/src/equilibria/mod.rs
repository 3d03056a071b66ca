//! Equilibria of a drift field: location, stability, and their fate as the
//! coupling strength varies.

mod bifurcation;
mod continuation;
mod export;

pub use bifurcation::{
    detect_bifurcations, equilibria_at, trace_branches, BifurcationKind, BifurcationPoint,
    BifurcationReport, TrackedEquilibria,
};
pub use continuation::{
    continue_branch, refine_fold, ContinuationBranch, ContinuationSettings, EigenCrossing,
    FoldPoint, Termination,
};
pub use export::{write_bifurcations_csv, write_branches_csv};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkDrift;

/// Real parts closer to zero than this are treated as nonhyperbolic.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;
/// Residual bound every reported equilibrium satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this in the max norm are merged.
pub const MERGE_RADIUS: f64 = 1e-6;
/// Default search window per axis.
pub const DEFAULT_DOMAIN: (f64, f64) = (-0.6, 1.4);
/// Default number of Newton seeds per axis.
pub const DEFAULT_SEED_DENSITY: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Sink,
    Saddle,
    Source,
    Nonhyperbolic,
}

impl Stability {
    pub fn name(&self) -> &'static str {
        match self {
            Stability::Sink => "sink",
            Stability::Saddle => "saddle",
            Stability::Source => "source",
            Stability::Nonhyperbolic => "nonhyperbolic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub position: Vec<f64>,
    /// Sorted by increasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub stability: Stability,
    pub label: Option<String>,
}

impl Equilibrium {
    /// Classifies `position` (assumed to be an equilibrium) and wraps it.
    pub fn at(network: &NetworkDrift, position: Vec<f64>) -> Self {
        let (stability, eigenvalues) = classify_at(network, &position);
        Self {
            position,
            eigenvalues,
            stability,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("?")
    }

    /// Number of eigenvalues with positive real part.
    pub fn unstable_count(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.re > 0.0).count()
    }

    /// Smallest |real part| among the eigenvalues.
    pub fn min_abs_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }
}

/// Axis-aligned search box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn default_for(dim: usize) -> Self {
        Self::cube(dim, DEFAULT_DOMAIN.0, DEFAULT_DOMAIN.1)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

/// Outcome of [`find_equilibria`].
#[derive(Clone, Debug)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// Seeds whose Newton iteration did not converge (diagnostic only).
    pub failed_seeds: usize,
}

fn residual_norm(network: &NetworkDrift, x: &[f64]) -> f64 {
    let mut f = vec![0.0; x.len()];
    network.drift_into(x, &mut f);
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Plain Newton iteration on the drift. Returns the root when the residual
/// falls below [`RESIDUAL_TOL`].
pub fn newton(network: &NetworkDrift, start: &[f64], max_iter: usize) -> Option<Vec<f64>> {
    let n = network.dim();
    let mut x = DVector::from_column_slice(start);
    let mut f = vec![0.0; n];
    for _ in 0..max_iter {
        network.drift_into(x.as_slice(), &mut f);
        let res = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res <= 1e-15 {
            break;
        }
        let j = network.jacobian_at(x.as_slice());
        let step = j.lu().solve(&DVector::from_column_slice(&f))?;
        x -= &step;
        if !x.iter().all(|v| v.is_finite()) || x.amax() > 1e3 {
            return None;
        }
        if step.amax() <= 1e-16 * (1.0 + x.amax()) {
            break;
        }
    }
    (residual_norm(network, x.as_slice()) <= RESIDUAL_TOL).then(|| x.as_slice().to_vec())
}

pub(crate) fn eigenvalues_of(j: DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = if j.nrows() == 2 {
        let (a, b, c, d) = (j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
        let tr = a + d;
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            vec![
                Complex64::new(0.5 * tr - s, 0.0),
                Complex64::new(0.5 * tr + s, 0.0),
            ]
        } else {
            let s = (-disc).sqrt();
            vec![Complex64::new(0.5 * tr, -s), Complex64::new(0.5 * tr, s)]
        }
    } else {
        j.complex_eigenvalues().iter().copied().collect()
    };
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

fn stability_of(eigenvalues: &[Complex64]) -> Stability {
    if eigenvalues.iter().any(|l| l.re.abs() < HYPERBOLICITY_TOL) {
        Stability::Nonhyperbolic
    } else if eigenvalues.iter().all(|l| l.re < 0.0) {
        Stability::Sink
    } else if eigenvalues.iter().all(|l| l.re > 0.0) {
        Stability::Source
    } else {
        Stability::Saddle
    }
}

fn classify_at(network: &NetworkDrift, x: &[f64]) -> (Stability, Vec<Complex64>) {
    let ev = eigenvalues_of(network.jacobian_at(x));
    (stability_of(&ev), ev)
}

/// Stability class and eigenvalues of the Jacobian at `position`.
///
/// `position` must be an equilibrium to within [`RESIDUAL_TOL`].
pub fn classify(network: &NetworkDrift, position: &[f64]) -> Result<(Stability, Vec<Complex64>)> {
    if position.len() != network.dim() {
        return Err(Error::DimensionMismatch {
            expected: network.dim(),
            got: position.len(),
        });
    }
    let res = residual_norm(network, position);
    if res > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "point is not an equilibrium (residual {res:.3e})"
        )));
    }
    Ok(classify_at(network, position))
}

/// All equilibria inside `domain`, found by Newton iteration from a regular
/// seed lattice with `seed_density` points per axis.
pub fn find_equilibria(
    network: &NetworkDrift,
    domain: &Domain,
    seed_density: usize,
) -> Result<EquilibriumSearch> {
    let dim = network.dim();
    if domain.lo.len() != dim || domain.hi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: domain.lo.len(),
        });
    }
    if seed_density < 2 {
        return Err(Error::InvalidConfig(
            "seed density must be at least 2".into(),
        ));
    }
    let total = seed_density.pow(dim as u32);
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    let mut seed = vec![0.0; dim];
    for k in 0..total {
        let mut rem = k;
        for (d, s) in seed.iter_mut().enumerate() {
            let i = rem % seed_density;
            rem /= seed_density;
            let t = i as f64 / (seed_density - 1) as f64;
            *s = domain.lo[d] + t * (domain.hi[d] - domain.lo[d]);
        }
        match newton(network, &seed, 60) {
            Some(r) if domain.contains(&r) => {
                let dup = roots
                    .iter()
                    .any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() <= MERGE_RADIUS));
                if !dup {
                    roots.push(r);
                }
            }
            Some(_) => {}
            None => failed += 1,
        }
    }
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let equilibria = roots
        .into_iter()
        .map(|r| {
            let label = network.label_for(&r);
            Equilibrium::at(network, r).with_label(label)
        })
        .collect();
    Ok(EquilibriumSearch {
        equilibria,
        failed_seeds: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Preset};
    use approx::assert_abs_diff_eq;

    fn two_node(beta: f64) -> NetworkDrift {
        Preset::TwoNode.build(ModelParams::baseline(beta)).unwrap()
    }

    #[test]
    fn nine_equilibria_when_uncoupled() {
        let n = two_node(0.0);
        let found = find_equilibria(&n, &Domain::default_for(2), DEFAULT_SEED_DENSITY).unwrap();
        assert_eq!(found.equilibria.len(), 9);
        let lattice = [-0.1, 0.1, 1.0];
        for e in &found.equilibria {
            for v in &e.position {
                assert!(
                    lattice.iter().any(|l| (l - v).abs() < 1e-12),
                    "{:?}",
                    e.position
                );
            }
        }
        let mut labels: Vec<_> = found
            .equilibria
            .iter()
            .map(|e| e.label().to_string())
            .collect();
        labels.sort();
        assert_eq!(
            labels,
            ["AA", "AQ", "AS", "QA", "QQ", "QS", "SA", "SQ", "SS"]
        );
    }

    #[test]
    fn seven_equilibria_past_first_fold() {
        // Brute-force oracle: a much denser seed sweep must agree on the count.
        let n = two_node(0.05);
        let dense = find_equilibria(&n, &Domain::default_for(2), 161).unwrap();
        assert_eq!(dense.equilibria.len(), 7);
        let found = find_equilibria(&n, &Domain::default_for(2), DEFAULT_SEED_DENSITY).unwrap();
        assert_eq!(found.equilibria.len(), 7);
        for e in &found.equilibria {
            assert!(residual_norm(&n, &e.position) <= RESIDUAL_TOL);
        }
    }

    #[test]
    fn symmetric_saddle_equilibrium_persists() {
        for beta in [0.0, 0.07, 0.17, 0.25, 0.4] {
            let n = two_node(beta);
            let found = find_equilibria(&n, &Domain::default_for(2), DEFAULT_SEED_DENSITY).unwrap();
            assert!(found
                .equilibria
                .iter()
                .any(|e| (e.position[0] - 0.1).abs() < 1e-9 && (e.position[1] - 0.1).abs() < 1e-9));
        }
    }

    #[test]
    fn classification_examples() {
        let (s, ev) = classify(&two_node(0.1), &[-0.1, -0.1]).unwrap();
        assert_eq!(s, Stability::Sink);
        assert_abs_diff_eq!(ev[0].re, -0.32, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, -0.22, epsilon = 1e-14);

        let (s, ev) = classify(&two_node(0.1), &[0.1, 0.1]).unwrap();
        assert_eq!(s, Stability::Source);
        assert_abs_diff_eq!(ev[0].re, 0.08, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, 0.18, epsilon = 1e-14);

        let (s, ev) = classify(&two_node(0.25), &[0.1, 0.1]).unwrap();
        assert_eq!(s, Stability::Saddle);
        assert_abs_diff_eq!(ev[0].re, -0.07, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, 0.18, epsilon = 1e-14);
    }

    #[test]
    fn nonhyperbolic_at_transcritical_point() {
        let beta_tc = 2.0 * 0.1 - 2.0 * 0.01;
        let (s, _) = classify(&two_node(beta_tc), &[0.1, 0.1]).unwrap();
        assert_eq!(s, Stability::Nonhyperbolic);
    }

    #[test]
    fn classify_rejects_non_equilibria() {
        assert!(classify(&two_node(0.1), &[0.3, 0.3]).is_err());
        assert!(classify(&two_node(0.1), &[0.1]).is_err());
    }

    #[test]
    fn product_structure_in_three_dimensions() {
        let n = Preset::ThreeNode.build(ModelParams::baseline(0.0)).unwrap();
        let found = find_equilibria(&n, &Domain::default_for(3), 13).unwrap();
        assert_eq!(found.equilibria.len(), 27);
    }

    #[test]
    fn empty_domain_gives_no_roots() {
        let n = two_node(0.1);
        let d = Domain::cube(2, 2.0, 3.0);
        assert!(find_equilibria(&n, &d, 9).unwrap().equilibria.is_empty());
    }
}
