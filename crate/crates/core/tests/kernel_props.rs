use jumpflow::space_kernel::{build_grid, build_torus, coupling, cutoff, fractional_kernel, taming_bound, Mask};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coupling_is_exactly_symmetric(n in 2usize..40, s in 0.05..0.95f64, torus in any::<bool>()) {
        let g = if torus { build_torus(n).unwrap() } else { build_grid(-1.0, 1.0, n).unwrap() };
        let c = coupling(&g, &fractional_kernel(&g, s, Mask::Full).unwrap()).unwrap();
        let th = c.theta();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(th[[i, j]], th[[j, i]]);
            }
        }
    }

    #[test]
    fn cutoff_is_monotone_and_tamed(n in 2usize..40, s in 0.05..0.95f64, e1 in 1e-5..1.0f64, e2 in 1e-5..1.0f64) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let g = build_grid(-1.0, 1.0, n).unwrap();
        let k = fractional_kernel(&g, s, Mask::Full).unwrap();
        let (a, b) = (cutoff(&g, &k, lo).unwrap(), cutoff(&g, &k, hi).unwrap());
        for (x, y) in a.rates().iter().zip(b.rates()) {
            prop_assert!(x >= y);
        }
        prop_assert!(taming_bound(&g, &a) <= taming_bound(&g, &k) * (1.0 + 1e-15));
    }

    #[test]
    fn puncture_disconnects_components(n in 4usize..60, s in 0.05..0.95f64, split in -0.8..0.8f64) {
        let g = build_grid(-1.0, 1.0, n).unwrap();
        let mask = Mask::Punctured { split };
        let c = coupling(&g, &fractional_kernel(&g, s, mask).unwrap()).unwrap();
        let [left, right] = mask.components(&g).unwrap();
        for &i in &left {
            for &j in &right {
                prop_assert_eq!(c.theta()[[i, j]], 0.0);
                prop_assert_eq!(c.theta()[[j, i]], 0.0);
            }
        }
    }
}
