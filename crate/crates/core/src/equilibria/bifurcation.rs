use serde::{Deserialize, Serialize};

use super::{
    continue_branch, find_equilibria, ContinuationBranch, ContinuationSettings, Domain,
    Equilibrium, Termination,
};
use crate::error::{Error, Result};
use crate::model::NetworkDrift;

/// Two branch events closer than this in beta are considered simultaneous.
const BETA_MATCH: f64 = 1e-6;
/// Two branch events closer than this in state space coincide.
const POSITION_MATCH: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BifurcationKind {
    SaddleNode,
    Transcritical,
}

impl BifurcationKind {
    pub fn name(&self) -> &'static str {
        match self {
            BifurcationKind::SaddleNode => "saddle-node",
            BifurcationKind::Transcritical => "transcritical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub beta: f64,
    pub kind: BifurcationKind,
    pub participants: (String, String),
    pub position: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BifurcationReport {
    /// Sorted by beta.
    pub points: Vec<BifurcationPoint>,
    pub warnings: Vec<String>,
    /// Label carried by each input branch at the end of its range. Branches
    /// meeting at a transcritical point exchange labels, so labels keep
    /// following the stability type.
    pub final_labels: Vec<String>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

enum Event {
    Fold(usize, usize, f64, Vec<f64>),
    Crossing(usize, usize, f64, Vec<f64>),
}

impl Event {
    fn beta(&self) -> f64 {
        match self {
            Event::Fold(_, _, b, _) | Event::Crossing(_, _, b, _) => *b,
        }
    }
}

/// Pairs fold terminations into saddle-node bifurcations and matching
/// eigenvalue crossings of distinct branches into transcritical ones.
pub fn detect_bifurcations(branches: &[ContinuationBranch]) -> BifurcationReport {
    let mut events = Vec::new();
    let mut warnings = Vec::new();

    let mut fold_used = vec![false; branches.len()];
    for i in 0..branches.len() {
        let Some(fi) = &branches[i].fold else {
            continue;
        };
        if fold_used[i] {
            continue;
        }
        let partner = (0..branches.len())
            .filter(|&j| j != i && !fold_used[j])
            .filter_map(|j| branches[j].fold.as_ref().map(|fj| (j, fj)))
            .filter(|(_, fj)| {
                (fj.beta - fi.beta).abs() <= BETA_MATCH
                    && dist(&fj.position, &fi.position) <= POSITION_MATCH
            })
            .min_by(|a, b| {
                dist(&a.1.position, &fi.position).total_cmp(&dist(&b.1.position, &fi.position))
            });
        match partner {
            Some((j, fj)) => {
                fold_used[i] = true;
                fold_used[j] = true;
                let beta = 0.5 * (fi.beta + fj.beta);
                events.push(Event::Fold(i, j, beta, fi.position.clone()));
            }
            None => warnings.push(format!(
                "fold of branch {} at beta = {:.6} has no partner branch",
                branches[i].label, fi.beta
            )),
        }
    }

    let mut crossing_used: Vec<Vec<bool>> = branches
        .iter()
        .map(|b| vec![false; b.crossings.len()])
        .collect();
    for i in 0..branches.len() {
        for (ci, c) in branches[i].crossings.iter().enumerate() {
            if crossing_used[i][ci] {
                continue;
            }
            let mut found = None;
            'outer: for j in (i + 1)..branches.len() {
                for (cj, d) in branches[j].crossings.iter().enumerate() {
                    if !crossing_used[j][cj]
                        && (c.beta - d.beta).abs() <= BETA_MATCH
                        && dist(&c.position, &d.position) <= POSITION_MATCH
                    {
                        found = Some((j, cj, d.beta));
                        break 'outer;
                    }
                }
            }
            match found {
                Some((j, cj, bj)) => {
                    crossing_used[i][ci] = true;
                    crossing_used[j][cj] = true;
                    events.push(Event::Crossing(
                        i,
                        j,
                        0.5 * (c.beta + bj),
                        c.position.clone(),
                    ));
                }
                None => warnings.push(format!(
                    "eigenvalue crossing on branch {} at beta = {:.6} without a partner branch",
                    branches[i].label, c.beta
                )),
            }
        }
    }

    events.sort_by(|a, b| a.beta().total_cmp(&b.beta()));
    let mut labels: Vec<String> = branches.iter().map(|b| b.label.clone()).collect();
    let mut points = Vec::with_capacity(events.len());
    for e in events {
        match e {
            Event::Fold(i, j, beta, position) => points.push(BifurcationPoint {
                beta,
                kind: BifurcationKind::SaddleNode,
                participants: (labels[i].clone(), labels[j].clone()),
                position,
            }),
            Event::Crossing(i, j, beta, position) => {
                points.push(BifurcationPoint {
                    beta,
                    kind: BifurcationKind::Transcritical,
                    participants: (labels[i].clone(), labels[j].clone()),
                    position,
                });
                labels.swap(i, j);
            }
        }
    }
    BifurcationReport {
        points,
        warnings,
        final_labels: labels,
    }
}

/// Labelled equilibria at one coupling strength, obtained by continuation
/// of the product states at `beta = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackedEquilibria {
    pub beta: f64,
    pub equilibria: Vec<Equilibrium>,
    /// Labels whose branch ended in a fold before `beta`, with the fold location.
    pub eliminated: Vec<(String, f64)>,
    pub report: BifurcationReport,
}

impl TrackedEquilibria {
    pub fn get(&self, label: &str) -> Result<&Equilibrium> {
        if let Some(e) = self.equilibria.iter().find(|e| e.label() == label) {
            return Ok(e);
        }
        match self.eliminated.iter().find(|(l, _)| l == label) {
            Some((_, at)) => Err(Error::Eliminated {
                label: label.to_string(),
                beta: self.beta,
                eliminated_at: *at,
            }),
            None => Err(Error::UnknownLabel(label.to_string())),
        }
    }

    pub fn saddles(&self) -> impl Iterator<Item = &Equilibrium> {
        self.equilibria
            .iter()
            .filter(|e| e.stability == super::Stability::Saddle)
    }
}

/// Continues every `beta = 0` equilibrium of `template` from zero coupling
/// up to `beta`.
pub fn trace_branches(
    template: &NetworkDrift,
    beta: f64,
    settings: &ContinuationSettings,
) -> Result<Vec<ContinuationBranch>> {
    let base = template.with_beta(0.0)?;
    let dim = base.dim();
    let seeds = match dim {
        1 | 2 => super::DEFAULT_SEED_DENSITY,
        3 => 13,
        _ => 7,
    };
    let start = find_equilibria(&base, &Domain::default_for(dim), seeds)?;
    start
        .equilibria
        .iter()
        .map(|e| continue_branch(template, e, (0.0, beta), settings))
        .collect()
}

/// Continues every `beta = 0` equilibrium of `template` up to `beta`.
pub fn equilibria_at(
    template: &NetworkDrift,
    beta: f64,
    settings: &ContinuationSettings,
) -> Result<TrackedEquilibria> {
    let branches = trace_branches(template, beta, settings)?;
    let report = detect_bifurcations(&branches);
    let mut equilibria = Vec::new();
    let mut eliminated = Vec::new();
    for (b, label) in branches.iter().zip(&report.final_labels) {
        match b.terminated_by {
            Termination::None => equilibria.push(b.last().clone().with_label(label.clone())),
            Termination::Fold => {
                let at = b.fold.as_ref().map_or(b.last_beta(), |f| f.beta);
                eliminated.push((label.clone(), at));
            }
            Termination::DomainExit => eliminated.push((label.clone(), b.last_beta())),
        }
    }
    Ok(TrackedEquilibria {
        beta,
        equilibria,
        eliminated,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Preset};

    #[test]
    fn two_node_bifurcation_table() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let tracked = equilibria_at(&t, 0.5, &Default::default()).unwrap();
        let pts = &tracked.report.points;
        assert_eq!(pts.len(), 4, "{pts:?}");
        let expect = [
            (0.01, BifurcationKind::SaddleNode, ["QA", "SA"]),
            (0.18, BifurcationKind::Transcritical, ["QS", "SS"]),
            (0.2025, BifurcationKind::SaddleNode, ["AQ", "SQ"]),
            (0.3025, BifurcationKind::SaddleNode, ["AS", "SS"]),
        ];
        for (p, (beta, kind, names)) in pts.iter().zip(expect) {
            assert!((p.beta - beta).abs() < 1e-4, "{p:?}");
            assert_eq!(p.kind, kind);
            let mut got = [p.participants.0.as_str(), p.participants.1.as_str()];
            got.sort();
            assert_eq!(got, names);
        }
        assert!(
            tracked.report.warnings.is_empty(),
            "{:?}",
            tracked.report.warnings
        );
        let mut alive: Vec<_> = tracked
            .equilibria
            .iter()
            .map(|e| e.label().to_string())
            .collect();
        alive.sort();
        assert_eq!(alive, ["AA", "QQ", "QS"]);
    }

    #[test]
    fn eliminated_anchor_reports_fold() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let tracked = equilibria_at(&t, 0.25, &Default::default()).unwrap();
        match tracked.get("AQ") {
            Err(Error::Eliminated { eliminated_at, .. }) => {
                assert!((eliminated_at - 0.2025).abs() < 1e-6)
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(tracked.get("XX"), Err(Error::UnknownLabel(_))));
        assert!(tracked.get("QQ").is_ok());
    }

    #[test]
    fn unpaired_fold_is_a_warning() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let start = Equilibrium::at(&t, vec![-0.1, 1.0]).with_label("QA");
        let b = continue_branch(&t, &start, (0.0, 0.05), &Default::default()).unwrap();
        let r = detect_bifurcations(&[b]);
        assert!(r.points.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    fn table(p: Preset) -> Vec<BifurcationPoint> {
        let t = p.build(ModelParams::baseline(0.0)).unwrap();
        let tracked = equilibria_at(&t, 0.5, &Default::default()).unwrap();
        assert!(tracked.report.warnings.is_empty());
        tracked.report.points
    }

    #[test]
    fn slice_with_quiescent_third_node() {
        let pts = table(Preset::ThreeNodeSliceQ);
        let betas: Vec<f64> = pts.iter().map(|p| p.beta).collect();
        assert_eq!(betas.len(), 4, "{pts:?}");
        assert!((betas[0] - 0.0101).abs() < 1e-3);
        assert!((betas[1] - 0.06).abs() < 5e-3);
        assert!((betas[2] - 0.2025).abs() < 1e-6 && (betas[3] - 0.2025).abs() < 1e-6);
        assert!(pts.iter().all(|p| p.kind == BifurcationKind::SaddleNode));
    }

    #[test]
    fn slice_with_active_third_node_folds_together() {
        let pts = table(Preset::ThreeNodeSliceA);
        assert_eq!(pts.len(), 4, "{pts:?}");
        for p in &pts {
            assert!((p.beta - 0.01).abs() < 1e-5, "{p:?}");
        }
    }
}
