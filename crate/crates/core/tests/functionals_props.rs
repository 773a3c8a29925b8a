use jumpflow::densities::Triple;
use jumpflow::evolution::{concatenate, evolve, generator, IntegratorConfig};
use jumpflow::functionals::{
    action_r, driving_force, dual_r_star, f_upsilon, fisher_d, trajectory_l, AbsNorm, ConvexIntegrand, SquaredNorm,
};
use jumpflow::measure::{jordan_from_setfunction, PosMeasure};
use jumpflow::space_kernel::Coupling;
use ndarray::Array2;
use proptest::prelude::*;

fn triples() -> impl Strategy<Value = Triple> {
    prop_oneof![Just(Triple::linear_quadratic()), Just(Triple::linear_cosh())]
}

/// Random reversible coupling with a symmetric `theta` and positive `pi`.
fn couplings() -> impl Strategy<Value = Coupling> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.05..2.0f64], n * n),
            prop::collection::vec(0.2..2.0f64, n),
        )
            .prop_map(move |(raw, pi)| {
                let theta = Array2::from_shape_fn((n, n), |(i, j)| {
                    if i == j {
                        0.0
                    } else {
                        let (a, b) = (i.min(j), i.max(j));
                        raw[a * n + b]
                    }
                });
                Coupling::from_theta(theta, pi).unwrap()
            })
    })
}

fn with_vectors(c: Coupling) -> impl Strategy<Value = (Coupling, Vec<f64>, Array2<f64>, Array2<f64>)> {
    let n = c.n();
    (
        prop::collection::vec(0.05..4.0f64, n),
        prop::collection::vec(-3.0..3.0f64, n * n),
        prop::collection::vec(-3.0..3.0f64, n * n),
    )
        .prop_map(move |(u, w, xi)| {
            let anti = |v: &Vec<f64>| Array2::from_shape_fn((n, n), |(i, j)| v[i * n + j] - v[j * n + i]);
            (c.clone(), u, anti(&w), anti(&xi))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn young_inequality_on_edges(t in triples(), (c, u, w, xi) in couplings().prop_flat_map(with_vectors)) {
        let r = action_r(&u, &w, &t, &c).value;
        let rs = dual_r_star(&u, &xi, &t, &c);
        let th = c.theta();
        let mut pairing = 0.0;
        for i in 0..c.n() {
            for j in 0..c.n() {
                pairing += 0.5 * xi[[i, j]] * w[[i, j]] * th[[i, j]];
            }
        }
        prop_assert!(r + rs >= pairing - 1e-10 * (1.0 + pairing.abs()), "{} + {} < {}", r, rs, pairing);
    }

    #[test]
    fn fisher_is_dual_dissipation_of_the_force(t in triples(), (c, u, _, _) in couplings().prop_flat_map(with_vectors)) {
        let d = fisher_d(&u, &t, &c).value;
        let rs = dual_r_star(&u, &driving_force(&u, t.entropy), &t, &c);
        prop_assert!((d - rs).abs() <= 1e-10 * (1.0 + d.abs()), "{} vs {}", d, rs);
    }

    #[test]
    fn f_upsilon_is_midpoint_convex(
        (a, b, g, abs) in (1usize..8).prop_flat_map(|n| (
            prop::collection::vec(-4.0..4.0f64, n),
            prop::collection::vec(-4.0..4.0f64, n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.1..2.0f64], n),
            any::<bool>(),
        ))
    ) {
        let sq = SquaredNorm { dim: 1 };
        let ab = AbsNorm { dim: 1 };
        let ups: &dyn ConvexIntegrand = if abs { &ab } else { &sq };
        let nu = PosMeasure::new(g).unwrap();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let f = |v: &[f64]| f_upsilon(&[jordan_from_setfunction(v).unwrap()], &nu, ups).unwrap();
        let (fa, fb, fm) = (f(&a), f(&b), f(&mid));
        prop_assert!(fm <= 0.5 * (fa + fb) + 1e-12 * (1.0 + fa.abs() + fb.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectory_l_is_additive_under_concatenation(
        t in triples(),
        (c, u, _, _) in couplings().prop_flat_map(with_vectors),
        t1 in 0.1..1.0f64,
        t2 in 0.1..1.0f64,
    ) {
        let gen = generator(&c, &t).unwrap();
        let cfg = IntegratorConfig { checkpoints: Some(256), ..Default::default() };
        let first = evolve(&gen, &u, t1, &cfg).unwrap();
        let second = evolve(&gen, first.density(first.len() - 1), t2, &cfg).unwrap();
        let joined = concatenate(&first, &second).unwrap();
        let (l1, l2, l) = (
            trajectory_l(&first, &t, &c).unwrap(),
            trajectory_l(&second, &t, &c).unwrap(),
            trajectory_l(&joined, &t, &c).unwrap(),
        );
        let last = |s: &jumpflow::functionals::LSeries| *s.l.last().unwrap();
        let scale = 1.0 + l.dissipation.last().unwrap().abs();
        prop_assert!((last(&l) - last(&l1) - last(&l2)).abs() <= 1e-8 * scale);
    }
}
