use proptest::prelude::*;
use stabsim::quantizers::BinaryQuantizer;
use stabsim::schemes::{
    delta_mod_step, gg_step, zoom_step, DeltaModState, GGPolicy, GGState, LogSpacing, StepLattice, ZoomParams,
    ZoomState,
};

proptest! {
    #[test]
    fn delta_mod_stays_on_lattice(
        m in 0.01f64..10.0,
        origin in -5.0f64..5.0,
        xs in prop::collection::vec(-50.0f64..50.0, 1..200),
    ) {
        let q = BinaryQuantizer::new(m).unwrap();
        let mut s = DeltaModState::new(origin);
        for x in xs {
            let next = delta_mod_step(&s, x, &q).unwrap();
            prop_assert_eq!((next.steps() - s.steps()).abs(), 1);
            prop_assert_eq!(next.level(), origin + next.steps() as f64 * m);
            s = next;
        }
    }

    #[test]
    fn gg_moves_by_policy_steps(
        xs in prop::collection::vec(-1e3f64..1e3, 1..200),
        p in 1i64..4,
        q in 1i64..4,
    ) {
        let policy = GGPolicy::new(vec![0.5, 1.0], vec![-1, 0, 2], false).unwrap();
        let lattice = StepLattice::new(0.0, LogSpacing::new(p, q).unwrap()).unwrap();
        let mut s = GGState { log_index: 0, lattice };
        for x in xs {
            let next = gg_step(&s, &policy, x).unwrap();
            prop_assert!(policy.log_steps().contains(&(next.log_index - s.log_index)));
            prop_assert!(next.delta() > 0.0 && next.delta().is_finite());
            s = next;
        }
    }

    #[test]
    fn zoom_delta_bounded_below_and_error_within_half_step(
        xs in prop::collection::vec(-1e4f64..1e4, 1..200),
        levels in 3u32..8,
    ) {
        let (a, b, floor) = (2.0, 1.0, 1.0);
        let zp = ZoomParams::new(a, b, levels, 4.0, 0.5, floor, 1.0, LogSpacing::ONE, true).unwrap();
        let mut s = ZoomState::initial();
        for x in xs {
            let delta = zp.delta(&s);
            let out = zoom_step(&zp, &s, x).unwrap();
            let in_range = x.abs() < delta * levels as f64 / 2.0;
            prop_assert!(!(in_range && out.overflow));
            if !out.overflow {
                prop_assert!((x - out.state.xhat).abs() <= delta / 2.0 + 1e-9);
            }
            prop_assert_eq!(out.control, -(a / b) * out.state.xhat);
            prop_assert!(zp.delta(&out.state) >= 0.5 * floor);
            s = out.state;
        }
    }
}
