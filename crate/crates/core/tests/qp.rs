use approx::assert_relative_eq;
use quasipot::model::{potential_uncoupled, ModelParams, NetworkDrift, Preset};
use quasipot::qp::{
    descend_path, extract_contours, hjb_residual, read_field, sample_field, solve, write_field,
    Contour, DescentParams, Grid2D, PointStatus, QPField, SolverParams, StopRule, MAGIC, QS_WINDOW,
};
use quasipot::Error;

const NU: f64 = 0.01;
const QQ: [f64; 2] = [-0.1, -0.1];

fn gate() -> f64 {
    8.0 / 3.0 * NU.powf(1.5)
}

fn uncoupled() -> NetworkDrift {
    Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap()
}

fn field(n: usize) -> QPField {
    let grid = Grid2D::square(QS_WINDOW, n).unwrap();
    solve(&uncoupled(), &grid, QQ, &SolverParams::default()).unwrap()
}

/// Basin of QQ below the gate level, where the identity holds.
fn sub_gate(p: [f64; 2]) -> bool {
    p[0] < 0.1 && p[1] < 0.1 && reference(p) < gate()
}

fn reference(p: [f64; 2]) -> f64 {
    2.0 * (potential_uncoupled(p[0], p[1], NU) - potential_uncoupled(QQ[0], QQ[1], NU))
}

#[test]
fn gradient_case_matches_twice_the_potential() {
    let f = field(128);
    let mut worst = 0.0f64;
    for (k, &v) in f.values.iter().enumerate() {
        let p = f.grid.point(k);
        let exact = reference(p);
        if f.status[k] == PointStatus::Accepted && sub_gate(p) && exact > 0.05 * gate() {
            worst = worst.max((v - exact).abs() / exact);
        }
    }
    assert!(worst < 0.03, "worst relative deviation {worst}");
}

#[test]
fn acceptance_order_is_monotone() {
    let f = field(96);
    let audit = f.audit.as_ref().expect("audit is on in test builds");
    assert_eq!(audit.len(), f.accepted_count());
    assert!(audit.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn symmetric_drift_gives_a_symmetric_field() {
    let f = field(96);
    let n = f.grid.nx;
    for j in 0..n {
        for i in 0..j {
            if !sub_gate(f.grid.point(f.grid.index(i, j))) {
                continue;
            }
            let (a, b) = (f.value_at(i, j).unwrap(), f.value_at(j, i).unwrap());
            assert!((a - b).abs() <= 1e-3 * a.max(b) + 1e-9, "({i},{j}) {a} {b}");
        }
    }
}

#[test]
fn whole_cell_translation_leaves_shared_nodes_unchanged() {
    let a = field(96);
    let shift = 3.0 * a.grid.hx();
    let grid = a.grid.translated(shift, 0.0);
    let b = solve(&uncoupled(), &grid, QQ, &SolverParams::default()).unwrap();
    for j in 0..a.grid.ny {
        for i in 3..a.grid.nx {
            let (Some(u), Some(v)) = (a.value_at(i, j), b.value_at(i - 3, j)) else {
                continue;
            };
            if sub_gate(a.grid.point(a.grid.index(i, j))) {
                assert!((u - v).abs() <= 1e-3 * u + 1e-9, "({i},{j}) {u} {v}");
            }
        }
    }
}

#[test]
fn invalid_anchors_and_grids_are_refused() {
    let net = uncoupled();
    let grid = Grid2D::square(QS_WINDOW, 64).unwrap();
    let p = SolverParams::default();
    assert!(matches!(
        solve(&net, &grid, [0.1, 0.1], &p),
        Err(Error::AnchorNotSink { .. })
    ));
    assert!(solve(&net, &grid, [-0.05, -0.1], &p).is_err());
    assert!(matches!(
        solve(&net, &grid, [2.0, 2.0], &p),
        Err(Error::OutsideGrid { .. })
    ));
    let coarse = Grid2D::square(QS_WINDOW, 32).unwrap();
    assert!(matches!(
        solve(&net, &coarse, QQ, &p),
        Err(Error::InvalidConfig(_))
    ));
    assert!(Grid2D::square(QS_WINDOW, 8).is_err());
    let three = Preset::ThreeNode.build(ModelParams::baseline(0.0)).unwrap();
    assert!(matches!(
        solve(&three, &grid, QQ, &p),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn sampling_reproduces_nodes_and_vanishes_at_the_anchor() {
    let f = field(64);
    let k = f.grid.index(40, 21);
    assert_eq!(
        sample_field(&f, f.grid.point(k)).unwrap(),
        Some(f.values[k])
    );
    let at_anchor = sample_field(&f, QQ).unwrap().unwrap();
    assert!(at_anchor.abs() < 0.02 * gate());
    assert!(matches!(
        sample_field(&f, [5.0, 0.0]),
        Err(Error::OutsideGrid { .. })
    ));
}

#[test]
fn capped_solve_leaves_an_unreachable_region() {
    let grid = Grid2D::square(QS_WINDOW, 64).unwrap();
    let params = SolverParams {
        stop: StopRule::ValueCap(0.3 * gate()),
        ..Default::default()
    };
    let f = solve(&uncoupled(), &grid, QQ, &params).unwrap();
    assert!(f.accepted_count() < grid.len());
    assert!(f.max_value() <= 0.3 * gate());
    assert_eq!(sample_field(&f, [0.3, 0.3]).unwrap(), None);
    let k = grid.nearest([0.3, 0.3]).unwrap();
    assert!(f.values[k].is_nan());
    assert_eq!(f.status[k], PointStatus::Unreachable);
}

#[test]
fn hjb_residual_is_small_where_the_field_is_smooth() {
    let net = uncoupled();
    let f = field(128);
    let res = hjb_residual(&f, &net).unwrap();
    let drift = net.planar().unwrap();
    let mut ratios: Vec<f64> = Vec::new();
    for (k, r) in res.iter().enumerate() {
        let p = f.grid.point(k);
        let exact = reference(p);
        if r.is_nan() || !sub_gate(p) || exact < 0.2 * gate() || exact > 0.8 * gate() {
            continue;
        }
        // |∇U|² = 4 |f|² for the exact solution, which sets the scale.
        let fp = drift.eval(p);
        ratios.push(r.abs() / (4.0 * (fp[0] * fp[0] + fp[1] * fp[1])));
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(!ratios.is_empty());
    assert!(median < 0.05, "median scaled residual {median}");
}

#[test]
fn sub_gate_contours_are_closed_loops_around_the_anchor() {
    let f = field(128);
    let level = 0.5 * gate();
    let c = &extract_contours(&f, &[level, 10.0])[..];
    assert_eq!(c[0].polylines.len(), 1);
    let line = &c[0].polylines[0];
    assert!(Contour::is_closed(line));
    for p in line {
        assert_relative_eq!(reference(*p), level, max_relative = 0.05);
        assert!((p[0] - QQ[0]).hypot(p[1] - QQ[1]) > 0.01);
    }
    assert!(c[1].polylines.is_empty());
}

#[test]
fn descent_from_the_anchor_is_trivial() {
    let f = field(64);
    let d = descend_path(&f, QQ, &DescentParams::default()).unwrap();
    assert!(d.complete);
    assert_eq!(d.path.vertices, vec![QQ]);
}

#[test]
fn descent_from_a_gate_follows_the_straight_heteroclinic() {
    let f = field(128);
    let h = f.grid.h();
    // Start just inside the basin below the QS saddle at (-0.1, 0.1).
    let d = descend_path(&f, [-0.1, 0.1 - 2.0 * h], &DescentParams::default()).unwrap();
    assert!(d.complete);
    for p in &d.path.vertices {
        assert!((p[0] + 0.1).abs() <= 2.0 * h, "{p:?}");
    }
    assert_eq!(*d.path.vertices.last().unwrap(), QQ);
}

#[test]
fn descent_stalls_on_a_plateau() {
    let mut f = field(64);
    f.values.iter_mut().for_each(|v| *v = 1.0);
    let d = descend_path(&f, [0.2, 0.2], &DescentParams::default()).unwrap();
    assert!(!d.complete);
    assert_eq!(d.path.vertices.len(), 1);
    assert!(descend_path(&f, [9.0, 0.0], &DescentParams::default()).is_err());
}

#[test]
fn binary_round_trip() {
    let grid = Grid2D::square(QS_WINDOW, 48).unwrap();
    let params = SolverParams {
        k: 6,
        stop: StopRule::ValueCap(0.5 * gate()),
        ..Default::default()
    };
    let f = solve(&uncoupled(), &grid, QQ, &params).unwrap();
    let mut buf = Vec::new();
    write_field(&mut buf, &f).unwrap();
    assert_eq!(&buf[..4], MAGIC);
    let g = read_field(&buf[..]).unwrap();
    assert_eq!(g.grid, f.grid);
    assert_eq!(g.status, f.status);
    assert_eq!((g.anchor, g.beta, g.nu), (f.anchor, f.beta, f.nu));
    for (a, b) in f.values.iter().zip(&g.values) {
        assert!(a.to_bits() == b.to_bits());
    }

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_field(&bad[..]), Err(Error::Format(_))));
    assert!(matches!(
        read_field(&buf[..buf.len() - 1]),
        Err(Error::Format(_))
    ));
    let mut status = buf.clone();
    *status.last_mut().unwrap() = 9;
    assert!(matches!(read_field(&status[..]), Err(Error::Format(_))));
}
