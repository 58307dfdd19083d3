use involution_clt::array::{
    center_hat, moments, standardize, variance_of_centered, ScoreArray, SymmetricArray,
};
use involution_clt::coupling::{alpha_compose, classify, pi_dagger, pi_ddagger, Quadruple};
use involution_clt::distances::{kolmogorov_distance, l1_distance, lp_upper, PNorm, StepCdf};
use involution_clt::involution::{
    exact_w_distribution, for_each_involution, sample_involution, y_of_map, ExactDistribution,
    Involution, ENUMERATION_CAP,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn array_strategy() -> impl Strategy<Value = SymmetricArray> {
    prop::sample::select(vec![4usize, 6, 8, 10]).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * (n - 1) / 2).prop_map(move |upper| {
            let mut it = upper.into_iter();
            SymmetricArray::from_upper_fn(n, |_, _| it.next().unwrap()).unwrap()
        })
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardize_ignores_scale_and_shift(e in array_strategy(), c in 0.1f64..20.0, shift in -3.0f64..3.0) {
        let d = standardize(&e).unwrap();
        let scaled = standardize(&e.scaled(c).unwrap()).unwrap();
        let shifted = standardize(&e.shifted(shift).unwrap()).unwrap();
        prop_assert!(max_abs_diff(d.entries(), scaled.entries()) < 1e-10);
        prop_assert!(max_abs_diff(d.entries(), shifted.entries()) < 1e-10);
        prop_assert!((d.beta() - moments(&e).unwrap().beta.unwrap()).abs() < 1e-10 * d.beta().max(1.0));
    }

    #[test]
    fn hat_marginals_vanish(e in array_strategy()) {
        let hat = center_hat(&e);
        let n = e.n();
        let tol = 1e-9 * n as f64 * hat.array().max_abs().max(1e-300);
        for i in 0..n {
            prop_assert!(hat.array().row_sum(i).abs() <= tol);
            prop_assert_eq!(hat.array().get(i, i), 0.0);
        }
        prop_assert!(hat.array().total().abs() <= tol);
    }

    #[test]
    fn closed_form_moments_match_enumeration(e in array_strategy()) {
        let m = moments(&e).unwrap();
        let mut values = Vec::new();
        for_each_involution(e.n(), ENUMERATION_CAP, |map| values.push(y_of_map(&e, map))).unwrap();
        let law = ExactDistribution::from_equally_likely(values).unwrap();
        let scale = e.max_abs().max(1.0);
        prop_assert!((law.mean() - m.mu).abs() <= 1e-9 * scale * e.n() as f64);
        prop_assert!((law.variance() - m.sigma2).abs() <= 1e-9 * m.sigma2.max(scale * scale));
        let via_hat = variance_of_centered(&center_hat(&e));
        prop_assert!((via_hat - m.sigma2).abs() <= 1e-10 * m.sigma2.max(1e-300));
    }

    #[test]
    fn exact_law_is_standardized(e in array_strategy()) {
        let d = standardize(&e).unwrap();
        let law = exact_w_distribution(&d, ENUMERATION_CAP).unwrap();
        prop_assert!(law.mean().abs() < 1e-10);
        prop_assert!((law.variance() - 1.0).abs() < 1e-8);
        let total: f64 = law.atoms().iter().map(|a| law.probability(a)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(law.atoms().windows(2).all(|w| w[0].value < w[1].value));
    }

    #[test]
    fn lp_upper_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, l1a in 0.0f64..3.0, l1b in 0.0f64..3.0) {
        let (lo_inf, hi_inf) = (a.min(b), a.max(b));
        let (lo_1, hi_1) = (l1a.min(l1b), l1a.max(l1b));
        for p in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let p = PNorm::Finite(p);
            prop_assert!(lp_upper(lo_inf, lo_1, p) <= lp_upper(hi_inf, lo_1, p) + 1e-15);
            prop_assert!(lp_upper(lo_inf, lo_1, p) <= lp_upper(lo_inf, hi_1, p) + 1e-15);
        }
        // linf (l1/linf)^(1/p): rises towards linf when l1 <= linf, falls otherwise
        let ps = [1.0, 1.5, 2.0, 3.0, 8.0];
        let (linf, small, large) = (hi_inf, lo_1.min(hi_inf), hi_1.max(hi_inf));
        for w in ps.windows(2) {
            let (p, q) = (PNorm::Finite(w[0]), PNorm::Finite(w[1]));
            prop_assert!(lp_upper(linf, small, p) <= lp_upper(linf, small, q) + 1e-15);
            prop_assert!(lp_upper(linf, large, q) <= lp_upper(linf, large, p) + 1e-15);
        }
        prop_assert!(lp_upper(linf, small, PNorm::Finite(8.0)) <= lp_upper(linf, small, PNorm::Infinity) + 1e-15);
    }

    #[test]
    fn distances_ignore_duplicate_jumps(atoms in prop::collection::vec((-4.0f64..4.0, 0.1f64..3.0), 1..12), split in 0.1f64..0.9) {
        let merged = StepCdf::from_weighted(atoms.clone()).unwrap();
        let mut dup = Vec::new();
        for &(x, w) in &atoms {
            dup.push((x, w * split));
            dup.push((x, w * (1.0 - split)));
        }
        let duplicated = StepCdf::from_weighted(dup).unwrap();
        prop_assert!((kolmogorov_distance(&merged) - kolmogorov_distance(&duplicated)).abs() < 1e-12);
        prop_assert!((l1_distance(&merged) - l1_distance(&duplicated)).abs() < 1e-12);
        let ks = kolmogorov_distance(&merged);
        prop_assert!((0.0..=1.0).contains(&ks));
    }

    #[test]
    fn ecdf_is_order_free(mut xs in prop::collection::vec(-3.0f64..3.0, 1..50)) {
        let a = StepCdf::ecdf(&xs).unwrap();
        xs.reverse();
        prop_assert_eq!(a, StepCdf::ecdf(&xs).unwrap());
    }

    #[test]
    fn coupling_constructions_close(seed in any::<u64>(), half in 3usize..16) {
        let n = 2 * half;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = sample_involution(n, &mut rng).unwrap();
        let idx = rand::seq::index::sample(&mut rng, n, 4);
        let q = Quadruple::new(idx.index(0), idx.index(1), idx.index(2), idx.index(3));
        let c = classify(&pi, q).unwrap();
        prop_assert!(!matches!((c.r1, c.r2), (2, 1) | (1, 2)));
        let (dag, case) = pi_dagger(&pi, q).unwrap();
        prop_assert_eq!(case, c.case_id);
        prop_assert!(dag.has_cycle(q.i, q.k) && dag.has_cycle(q.j, q.l));
        let ddag = pi_ddagger(&dag, q).unwrap();
        prop_assert!(ddag.has_cycle(q.i, q.j) && ddag.has_cycle(q.k, q.l));
        let touched: Vec<usize> = q.as_array().iter().flat_map(|&x| [x, pi.image(x)]).collect();
        for x in (0..n).filter(|x| !touched.contains(x)) {
            prop_assert_eq!(dag.image(x), pi.image(x));
            prop_assert_eq!(ddag.image(x), pi.image(x));
        }
        let prime = alpha_compose(&pi, q.i, q.j).unwrap();
        prop_assert!(prime.has_cycle(q.i, q.j));
        prop_assert!(prime.has_cycle(pi.image(q.i), pi.image(q.j)));
        prop_assert!(Involution::from_map(prime.as_slice().to_vec()).is_ok());
    }
}
