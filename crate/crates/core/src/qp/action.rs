use super::{Path, Quadrature};
use crate::error::{Error, Result};
use crate::model::{NetworkDrift, PlanarDrift};

#[inline(always)]
fn integrand(d: [f64; 2], len: f64, f: [f64; 2]) -> f64 {
    len * f[0].hypot(f[1]) - (d[0] * f[0] + d[1] * f[1])
}

/// Single-panel action of the straight segment `a -> b` given the drift at
/// both ends. This is the kernel used by the solver.
#[inline(always)]
pub(crate) fn panel_action(
    drift: &PlanarDrift,
    a: [f64; 2],
    b: [f64; 2],
    fa: [f64; 2],
    fb: [f64; 2],
    quadrature: Quadrature,
) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let fm = drift.eval([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    match quadrature {
        Quadrature::Midpoint => integrand(d, len, fm),
        Quadrature::ThreePoint => {
            (integrand(d, len, fa) + 4.0 * integrand(d, len, fm) + integrand(d, len, fb)) / 6.0
        }
    }
}

/// Action of the straight segment `a -> b` using `panels` equal panels.
pub fn segment_action(
    drift: &PlanarDrift,
    a: [f64; 2],
    b: [f64; 2],
    quadrature: Quadrature,
    panels: usize,
) -> f64 {
    let n = panels.max(1);
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let mut p0 = a;
    let mut f0 = drift.eval(a);
    let mut total = 0.0;
    for k in 1..=n {
        let p1 = at(k as f64 / n as f64);
        let f1 = drift.eval(p1);
        total += panel_action(drift, p0, p1, f0, f1, quadrature);
        p0 = p1;
        f0 = f1;
    }
    total
}

fn planar(network: &NetworkDrift) -> Result<PlanarDrift> {
    network.planar().ok_or(Error::DimensionMismatch {
        expected: 2,
        got: network.dim(),
    })
}

/// Geometric action of the straight segment from `a` to `b`, by composite
/// Simpson quadrature with panels no longer than `1/200`.
pub fn geometric_action_segment(a: [f64; 2], b: [f64; 2], network: &NetworkDrift) -> Result<f64> {
    let drift = planar(network)?;
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let panels = ((len * 200.0).ceil() as usize).clamp(1, 10_000);
    Ok(segment_action(&drift, a, b, Quadrature::ThreePoint, panels))
}

/// Sum of segment actions along a polyline.
pub fn action_of_path(path: &Path, network: &NetworkDrift) -> Result<f64> {
    if path.vertices.len() < 2 {
        return Err(Error::InvalidConfig(
            "a path needs at least two vertices".into(),
        ));
    }
    path.vertices
        .windows(2)
        .map(|w| geometric_action_segment(w[0], w[1], network))
        .sum()
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
    fn heteroclinic_segment_costs_twice_the_barrier() {
        let a = geometric_action_segment([-0.1, -0.1], [0.1, -0.1], &two_node(0.0)).unwrap();
        assert_abs_diff_eq!(a, 8.0 / 3.0 * 0.01f64.powf(1.5), epsilon = 1e-12);
        // Single Simpson panel is exact for the cubic drift.
        let d = two_node(0.0).planar().unwrap();
        let one = segment_action(&d, [-0.1, -0.1], [0.1, -0.1], Quadrature::ThreePoint, 1);
        assert_abs_diff_eq!(one, a, epsilon = 1e-15);
    }

    #[test]
    fn segment_along_the_flow_is_free() {
        // From the saddle value 0.1 down towards the active state the drift
        // points along +x on the line y = -0.1.
        let a = geometric_action_segment([0.2, -0.1], [0.21, -0.1], &two_node(0.0)).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-15);
        let back = geometric_action_segment([0.21, -0.1], [0.2, -0.1], &two_node(0.0)).unwrap();
        assert!(back > 0.0);
    }

    #[test]
    fn path_sum_and_refinement() {
        let n = two_node(0.1);
        let seg = geometric_action_segment([-0.1, -0.1], [0.05, 0.2], &n).unwrap();
        let p = action_of_path(&Path::new(vec![[-0.1, -0.1], [0.05, 0.2]]), &n).unwrap();
        assert_eq!(seg, p);
        let mid = [-0.025, 0.05];
        let refined = action_of_path(&Path::new(vec![[-0.1, -0.1], mid, [0.05, 0.2]]), &n).unwrap();
        assert_abs_diff_eq!(refined, p, epsilon = 1e-9);
        assert!(action_of_path(&Path::new(vec![[0.0, 0.0]]), &n).is_err());
    }

    #[test]
    fn gradient_lower_bound_on_paths_to_the_saddle() {
        let n = two_node(0.0);
        let bound = 8.0 / 3.0 * 0.01f64.powf(1.5);
        let axis = action_of_path(&Path::new(vec![[-0.1, -0.1], [-0.1, 0.1]]), &n).unwrap();
        assert_abs_diff_eq!(axis, bound, epsilon = 1e-12);
        let detour = Path::new(vec![[-0.1, -0.1], [0.0, -0.05], [-0.05, 0.05], [-0.1, 0.1]]);
        assert!(action_of_path(&detour, &n).unwrap() >= bound - 1e-12);
    }

    #[test]
    fn three_dimensional_network_is_rejected() {
        let n = Preset::ThreeNode.build(ModelParams::baseline(0.1)).unwrap();
        assert!(matches!(
            geometric_action_segment([0.0, 0.0], [0.1, 0.0], &n),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
