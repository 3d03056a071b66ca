use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{newton, Equilibrium};
use crate::error::{Error, Result};
use crate::model::NetworkDrift;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    /// Nominal step in beta.
    pub step: f64,
    /// Steps are halved down to this size before the branch is given up.
    pub min_step: f64,
    pub max_newton: usize,
    /// Leaving the box `|x_i| <= bound` ends the branch.
    pub bound: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            step: 1.0 / 256.0,
            min_step: 1e-11,
            max_newton: 60,
            bound: 5.0,
        }
    }
}

impl ContinuationSettings {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Reached the end of the requested range.
    None,
    Fold,
    DomainExit,
}

/// Located limit point of a branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub beta: f64,
    pub position: Vec<f64>,
    /// Jacobian determinant at the refined point.
    pub determinant: f64,
}

/// A point where an eigenvalue crosses zero while the branch carries on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenCrossing {
    pub beta: f64,
    pub position: Vec<f64>,
    pub unstable_before: usize,
    pub unstable_after: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationBranch {
    pub label: String,
    pub betas: Vec<f64>,
    pub states: Vec<Equilibrium>,
    pub terminated_by: Termination,
    pub fold: Option<FoldPoint>,
    pub crossings: Vec<EigenCrossing>,
}

impl ContinuationBranch {
    pub fn last(&self) -> &Equilibrium {
        self.states.last().expect("branch has at least its start")
    }

    pub fn last_beta(&self) -> f64 {
        *self.betas.last().expect("branch has at least its start")
    }

    /// Whether the branch exists at `beta` (within its computed range).
    pub fn exists_at(&self, beta: f64) -> bool {
        match self.terminated_by {
            Termination::Fold => beta <= self.fold.as_ref().map_or(self.last_beta(), |f| f.beta),
            _ => beta <= self.last_beta(),
        }
    }

    /// State at `beta` by linear interpolation between the bracketing samples.
    pub fn position_at(&self, beta: f64) -> Option<Vec<f64>> {
        if beta < self.betas[0] || beta > self.last_beta() {
            return None;
        }
        let k = self.betas.partition_point(|&b| b < beta);
        if k == 0 {
            return Some(self.states[0].position.clone());
        }
        let (b0, b1) = (self.betas[k - 1], self.betas[k]);
        let t = if b1 > b0 {
            (beta - b0) / (b1 - b0)
        } else {
            1.0
        };
        Some(
            self.states[k - 1]
                .position
                .iter()
                .zip(&self.states[k].position)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn tangent(net: &NetworkDrift, x: &[f64]) -> Option<Vec<f64>> {
    let j = net.jacobian_at(x);
    let db = DVector::from_vec(net.beta_derivative(x));
    let t = j.lu().solve(&db)?;
    Some(t.iter().map(|v| -v).collect())
}

fn determinant(net: &NetworkDrift, x: &[f64]) -> f64 {
    net.jacobian_at(x).determinant()
}

/// Newton iteration on the extended system `{f(x, beta) = 0, det J(x, beta) = 0}`
/// starting from a point close to a limit point.
pub fn refine_fold(template: &NetworkDrift, x0: &[f64], beta0: f64) -> Option<FoldPoint> {
    let n = template.dim();
    let mut x = x0.to_vec();
    let mut beta = beta0;
    let mut f = vec![0.0; n];
    for _ in 0..60 {
        let net = template.with_beta(beta.max(0.0)).ok()?;
        net.drift_into(&x, &mut f);
        let det = determinant(&net, &x);
        let res = f.iter().fold(det.abs(), |m, v| m.max(v.abs()));
        if res <= 1e-15 {
            break;
        }
        let mut g = DMatrix::zeros(n + 1, n + 1);
        let j = net.jacobian_at(&x);
        g.view_mut((0, 0), (n, n)).copy_from(&j);
        for (i, v) in net.beta_derivative(&x).into_iter().enumerate() {
            g[(i, n)] = v;
        }
        let h = 1e-7;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            g[(n, k)] = (determinant(&net, &xp) - determinant(&net, &xm)) / (2.0 * h);
        }
        let np = template.with_beta((beta + h).max(0.0)).ok()?;
        let nm = template.with_beta((beta - h).max(0.0)).ok()?;
        g[(n, n)] = (determinant(&np, &x) - determinant(&nm, &x)) / (2.0 * h);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = f[i];
        }
        rhs[n] = det;
        let step = g.lu().solve(&rhs)?;
        for i in 0..n {
            x[i] -= step[i];
        }
        beta -= step[n];
        if !beta.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if step.amax() <= 1e-16 {
            break;
        }
    }
    let net = template.with_beta(beta.max(0.0)).ok()?;
    net.drift_into(&x, &mut f);
    let det = determinant(&net, &x);
    let res = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (res <= 1e-10 && det.abs() <= 1e-8).then_some(FoldPoint {
        beta,
        position: x,
        determinant: det,
    })
}

/// Bisection on the count of unstable eigenvalues between two samples of the
/// same branch.
fn locate_crossing(
    template: &NetworkDrift,
    settings: &ContinuationSettings,
    lo: (f64, &[f64], usize),
    hi: (f64, &[f64], usize),
) -> Option<EigenCrossing> {
    let (mut b0, mut x0, n0) = (lo.0, lo.1.to_vec(), lo.2);
    let (mut b1, mut x1, n1) = (hi.0, hi.1.to_vec(), hi.2);
    for _ in 0..80 {
        if b1 - b0 <= 1e-13 {
            break;
        }
        let bm = 0.5 * (b0 + b1);
        let guess: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 0.5 * (a + b)).collect();
        let net = template.with_beta(bm).ok()?;
        let xm = newton(&net, &guess, settings.max_newton)?;
        if dist(&xm, &guess) > 2.0 * dist(&x0, &x1) + 1e-12 {
            return None;
        }
        let nm = Equilibrium::at(&net, xm.clone()).unstable_count();
        if nm == n0 {
            b0 = bm;
            x0 = xm;
        } else {
            b1 = bm;
            x1 = xm;
        }
    }
    Some(EigenCrossing {
        beta: 0.5 * (b0 + b1),
        position: x0.iter().zip(&x1).map(|(a, b)| 0.5 * (a + b)).collect(),
        unstable_before: n0,
        unstable_after: n1,
    })
}

/// Natural-parameter continuation in beta with Newton correction.
///
/// Steps are halved whenever the corrector fails or jumps away from the
/// predicted point. When the step underflows the branch is checked for a
/// limit point; a generic fold is then located exactly on the extended system.
pub fn continue_branch(
    template: &NetworkDrift,
    start: &Equilibrium,
    beta_range: (f64, f64),
    settings: &ContinuationSettings,
) -> Result<ContinuationBranch> {
    let (b_start, b_end) = beta_range;
    if !(b_end >= b_start) || b_start < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "invalid beta range [{b_start}, {b_end}]"
        )));
    }
    if !(settings.step > 0.0) {
        return Err(Error::InvalidConfig(
            "continuation step must be positive".into(),
        ));
    }
    let label = start.label().to_string();
    let net0 = template.with_beta(b_start)?;
    let x0 = newton(&net0, &start.position, settings.max_newton).ok_or_else(|| {
        Error::Numerical(format!("start of branch {label} is not an equilibrium"))
    })?;
    let mut betas = vec![b_start];
    let mut states = vec![Equilibrium::at(&net0, x0.clone()).with_label(label.clone())];
    let mut crossings = Vec::new();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let (mut beta, mut x) = (b_start, x0);
    let mut ds = settings.step;
    let mut terminated_by = Termination::None;
    let mut fold = None;

    while beta < b_end {
        let bn = (beta + ds).min(b_end);
        let net = template.with_beta(bn)?;
        let pred: Vec<f64> = match &prev {
            Some((bp, xp)) => x
                .iter()
                .zip(xp)
                .map(|(a, b)| a + (a - b) * (bn - beta) / (beta - bp))
                .collect(),
            None => match tangent(&template.with_beta(beta)?, &x) {
                Some(t) => x.iter().zip(&t).map(|(a, v)| a + v * (bn - beta)).collect(),
                None => x.clone(),
            },
        };
        let slack = 0.5 * dist(&pred, &x) + 0.01 * (bn - beta);
        let accepted =
            newton(&net, &pred, settings.max_newton).filter(|xn| dist(xn, &pred) <= slack);
        match accepted {
            Some(xn) => {
                if xn.iter().any(|v| v.abs() > settings.bound) {
                    terminated_by = Termination::DomainExit;
                    break;
                }
                let eq = Equilibrium::at(&net, xn.clone()).with_label(label.clone());
                let before = states.last().unwrap().unstable_count();
                if eq.unstable_count() != before {
                    if let Some(c) = locate_crossing(
                        template,
                        settings,
                        (beta, &x, before),
                        (bn, &xn, eq.unstable_count()),
                    ) {
                        crossings.push(c);
                    }
                }
                prev = Some((beta, std::mem::replace(&mut x, xn)));
                beta = bn;
                betas.push(beta);
                states.push(eq);
                ds = (ds * 2.0).min(settings.step);
            }
            None => {
                ds *= 0.5;
                if ds < settings.min_step {
                    match refine_fold(template, &x, beta) {
                        Some(fp)
                            if fp.beta >= beta - 1e-8
                                && fp.beta <= beta + 4.0 * settings.min_step + 1e-8
                                && dist(&fp.position, &x) <= 1e-3 =>
                        {
                            terminated_by = Termination::Fold;
                            fold = Some(fp);
                        }
                        _ => terminated_by = Termination::DomainExit,
                    }
                    break;
                }
            }
        }
    }
    // Sign changes of the vanishing eigenvalue right at a fold are not crossings.
    if let Some(fp) = &fold {
        crossings.retain(|c| (c.beta - fp.beta).abs() > 1e-6);
    }
    Ok(ContinuationBranch {
        label,
        betas,
        states,
        terminated_by,
        fold,
        crossings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Preset};

    fn template() -> NetworkDrift {
        Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap()
    }

    fn start(label: &str) -> Equilibrium {
        let t = template();
        Equilibrium::at(&t, t.product_state(label).unwrap().0).with_label(label)
    }

    #[test]
    fn quiescent_branch_survives_whole_range() {
        let b =
            continue_branch(&template(), &start("QQ"), (0.0, 0.5), &Default::default()).unwrap();
        assert_eq!(b.terminated_by, Termination::None);
        assert_eq!(b.last_beta(), 0.5);
        assert!(b.crossings.is_empty());
        let p = &b.last().position;
        assert!((p[0] + 0.1).abs() < 1e-12 && (p[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn first_fold_is_at_nu() {
        // Node 1 with x2 = 1 factors as -(x1 - 1)(x1^2 - nu + beta): fold at beta = nu.
        let b =
            continue_branch(&template(), &start("QA"), (0.0, 0.05), &Default::default()).unwrap();
        assert_eq!(b.terminated_by, Termination::Fold);
        let f = b.fold.unwrap();
        assert!((f.beta - 0.01).abs() < 1e-6, "{}", f.beta);
        assert!(f.position[0].abs() < 1e-4);
        assert!(f.determinant.abs() <= 1e-6);
    }

    #[test]
    fn active_quiescent_fold() {
        let b =
            continue_branch(&template(), &start("AQ"), (0.0, 0.3), &Default::default()).unwrap();
        let f = b.fold.expect("fold");
        assert!((f.beta - 0.2025).abs() < 1e-4, "{}", f.beta);
    }

    #[test]
    fn fold_location_is_step_independent() {
        let coarse = continue_branch(
            &template(),
            &start("AS"),
            (0.0, 0.4),
            &ContinuationSettings::with_step(0.01),
        )
        .unwrap();
        let fine = continue_branch(
            &template(),
            &start("AS"),
            (0.0, 0.4),
            &ContinuationSettings::with_step(0.005),
        )
        .unwrap();
        let (a, b) = (coarse.fold.unwrap().beta, fine.fold.unwrap().beta);
        assert!((a - b).abs() < 1e-4);
        assert!((a - 0.3025).abs() < 1e-4);
    }

    #[test]
    fn transcritical_crossing_is_recorded_on_both_branches() {
        for label in ["QS", "SS"] {
            let b = continue_branch(&template(), &start(label), (0.0, 0.25), &Default::default())
                .unwrap();
            assert_eq!(b.crossings.len(), 1, "{label}");
            let c = &b.crossings[0];
            assert!((c.beta - 0.18).abs() < 1e-8, "{label}: {}", c.beta);
            assert!((c.position[0] - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn consecutive_states_are_continuous() {
        let b =
            continue_branch(&template(), &start("SQ"), (0.0, 0.3), &Default::default()).unwrap();
        for w in b.states.windows(2) {
            assert!(dist(&w[0].position, &w[1].position) < 0.05);
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(
            continue_branch(&template(), &start("QQ"), (0.2, 0.1), &Default::default()).is_err()
        );
        assert!(continue_branch(
            &template(),
            &start("QQ"),
            (0.0, 0.1),
            &ContinuationSettings::with_step(0.0)
        )
        .is_err());
    }

    #[test]
    fn zero_width_range_returns_start() {
        let b =
            continue_branch(&template(), &start("AQ"), (0.0, 0.0), &Default::default()).unwrap();
        assert_eq!(b.states.len(), 1);
        assert_eq!(b.terminated_by, Termination::None);
    }
}
