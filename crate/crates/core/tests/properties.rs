use proptest::prelude::*;
use quasipot::mc::final_order;
use quasipot::model::{potential_uncoupled, ModelParams, Preset, StateVector};
use quasipot::qp::geometric_action_segment;

fn coord() -> impl Strategy<Value = f64> {
    -0.6..1.4f64
}

fn preset() -> impl Strategy<Value = Preset> {
    prop::sample::select(Preset::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn uncoupled_drift_is_minus_the_potential_gradient(
        x1 in coord(), x2 in coord(), nu in 0.001..0.9f64
    ) {
        let net = Preset::TwoNode.build(ModelParams::new(nu, 0.0, 0.0).unwrap()).unwrap();
        let f = net.drift(&StateVector(vec![x1, x2])).unwrap();
        let h = 1e-5;
        let gx = (potential_uncoupled(x1 + h, x2, nu) - potential_uncoupled(x1 - h, x2, nu)) / (2.0 * h);
        let gy = (potential_uncoupled(x1, x2 + h, nu) - potential_uncoupled(x1, x2 - h, nu)) / (2.0 * h);
        for (fi, gi) in [(f[0], gx), (f[1], gy)] {
            prop_assert!((fi + gi).abs() <= 1e-6 * fi.abs().max(1e-3), "{fi} {gi}");
        }
    }

    #[test]
    fn jacobian_matches_central_differences(
        p in preset(), beta in 0.0..0.5f64, xs in prop::collection::vec(coord(), 3)
    ) {
        let net = p.build(ModelParams::baseline(beta)).unwrap();
        let x = StateVector(xs[..net.dim()].to_vec());
        let j = net.jacobian(&x).unwrap();
        let h = 1e-6;
        for c in 0..net.dim() {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up.0[c] += h;
            dn.0[c] -= h;
            let (fu, fd) = (net.drift(&up).unwrap(), net.drift(&dn).unwrap());
            for r in 0..net.dim() {
                let fd_entry = (fu[r] - fd[r]) / (2.0 * h);
                let scale = j[(r, c)].abs().max(1e-2);
                prop_assert!((fd_entry - j[(r, c)]).abs() <= 1e-6 * scale,
                    "{p:?} ({r},{c}) {fd_entry} {}", j[(r, c)]);
            }
        }
    }

    #[test]
    fn saddle_saddle_state_is_always_an_equilibrium(nu in 0.001..0.9f64, beta in 0.0..2.0f64) {
        let net = Preset::TwoNode.build(ModelParams::new(nu, beta, 0.05).unwrap()).unwrap();
        let f = net.drift(&StateVector(vec![nu.sqrt(); 2])).unwrap();
        prop_assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
    }

    #[test]
    fn uniform_states_are_equilibria_of_every_unfrozen_topology(
        beta in 0.0..1.0f64, which in prop::sample::select(vec!['Q', 'S', 'A'])
    ) {
        for p in [Preset::SingleNode, Preset::TwoNode, Preset::ThreeNode] {
            let net = p.build(ModelParams::baseline(beta)).unwrap();
            let label: String = std::iter::repeat_n(which, net.dim()).collect();
            let f = net.drift(&net.product_state(&label).unwrap()).unwrap();
            prop_assert!(f.0.iter().all(|v| v.abs() < 1e-15), "{p:?} {label}");
        }
    }

    #[test]
    fn segment_action_is_nonnegative(
        a in (coord(), coord()), b in (coord(), coord()), beta in 0.0..0.4f64
    ) {
        prop_assume!((a.0 - b.0).hypot(a.1 - b.1) > 1e-9);
        let net = Preset::TwoNode.build(ModelParams::baseline(beta)).unwrap();
        let s = geometric_action_segment([a.0, a.1], [b.0, b.1], &net).unwrap();
        prop_assert!(s >= -1e-12, "{s}");
    }

    #[test]
    fn final_order_keeps_each_escaped_node_once(moves in prop::collection::vec(0usize..3, 0..20)) {
        // Build a consistent signed sequence: toggle nodes between below and above.
        let mut above = [false; 3];
        let mut seq = Vec::new();
        for m in moves {
            let id = m as i32 + 1;
            seq.push(if above[m] { -id } else { id });
            above[m] = !above[m];
        }
        let order = final_order(&seq);
        let mut expect: Vec<i32> = (0..3).filter(|&i| above[i]).map(|i| i as i32 + 1).collect();
        let mut got = order.clone();
        got.sort_unstable();
        expect.sort_unstable();
        prop_assert_eq!(got, expect);
        if seq.iter().all(|&e| e > 0) {
            prop_assert_eq!(order, seq);
        }
    }
}
