use std::collections::HashMap;

use involution_clt::array::{random_centered, random_symmetric_with, standardize, ScoreArray};
use involution_clt::bounds::rate_bounds;
use involution_clt::coupling::square_bias::for_each_distinct_quadruple;
use involution_clt::coupling::{
    c_n, estimate_gap, exact_gap, exact_pi_dagger_marginal, pi_dagger, square_term,
    stein_pair_draw, zero_bias_draws, QuadSampler, Quadruple, QuadrupleTable, TABLE_CAP,
};
use involution_clt::distances::{l1_distance, StepCdf};
use involution_clt::involution::{exact_w_distribution, y_value, Involution, ENUMERATION_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn array(n: usize, seed: u64) -> involution_clt::CenteredArray {
    random_centered(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn gap_estimate_agrees_with_enumeration_at_n8() {
    let d = array(8, 31);
    let sampler = QuadSampler::new(&d, TABLE_CAP).unwrap();
    let exact = exact_gap(&d, 12).unwrap();
    let est = estimate_gap(&d, &sampler, 100_000, 77, None).unwrap();
    assert!((est.mean - exact).abs() < 4.0 * est.stderr, "exact {exact}, estimate {est:?}");
}

#[test]
fn gap_estimate_respects_bound_at_n10() {
    let d = array(10, 32);
    let sampler = QuadSampler::new(&d, TABLE_CAP).unwrap();
    let est = estimate_gap(&d, &sampler, 50_000, 5, None).unwrap();
    let b = rate_bounds(10, d.beta(), &[]);
    assert!(est.mean - 4.0 * est.stderr <= b.gap_bound);
}

#[test]
fn l1_link_on_exact_laws() {
    for (n, seed) in [(6, 1), (8, 2), (10, 3)] {
        let d = array(n, seed);
        let f = StepCdf::from_exact(&exact_w_distribution(&d, ENUMERATION_CAP).unwrap());
        assert!(l1_distance(&f) <= 2.0 * exact_gap(&d, 12).unwrap());
    }
}

#[test]
fn quadruple_frequencies_within_bands_at_n6() {
    let d = array(6, 40);
    let table = QuadrupleTable::build(&d, TABLE_CAP).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let m = 1_000_000;
    let mut counts: HashMap<Quadruple, u64> = HashMap::new();
    for _ in 0..m {
        *counts.entry(table.sample(&mut rng)).or_default() += 1;
    }
    let c = c_n(6);
    for_each_distinct_quadruple(6, |q| {
        let p = c * square_term(&d, q);
        let observed = counts.get(&q).copied().unwrap_or(0) as f64;
        let sd = (m as f64 * p * (1.0 - p)).sqrt();
        assert!((observed - m as f64 * p).abs() <= 4.0 * sd + 1e-9, "{q:?}");
    });
    assert_eq!(counts.keys().filter(|q| !q.is_distinct()).count(), 0);
}

/// Two-sample chi-square on the marginal law of `I` and of `{I, K}`.
#[test]
fn rejection_and_table_agree_at_n40() {
    let n = 40;
    let d = array(n, 50);
    let table = QuadSampler::new(&d, TABLE_CAP).unwrap();
    let rejection = QuadSampler::rejection(&d);
    let m = 200_000;
    let tally = |s: &QuadSampler, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; n * n];
        for _ in 0..m {
            let q = s.sample(&d, &mut rng);
            counts[q.i.min(q.k) * n + q.i.max(q.k)] += 1;
        }
        counts
    };
    let (a, b) = (tally(&table, 1), tally(&rejection, 2));
    let (mut stat, mut cells) = (0.0, 0usize);
    for (&x, &y) in a.iter().zip(&b) {
        if x + y > 0 {
            stat += (x as f64 - y as f64).powi(2) / (x + y) as f64;
            cells += 1;
        }
    }
    let q = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < q, "stat {stat}, quantile {q}");
}

#[test]
fn dagger_marginal_small_n() {
    let r = exact_pi_dagger_marginal(&array(6, 60), 8).unwrap();
    assert_eq!((r.expected_count, r.min_count, r.max_count, r.support_failures), (15, 15, 15, 0));
}

#[test]
fn spec_case_one_example() {
    let pi = Involution::from_one_based(&[2, 1, 4, 3, 6, 5]).unwrap();
    let (dag, case) = pi_dagger(&pi, Quadruple::one_based(1, 3, 2, 5)).unwrap();
    assert_eq!(case, 1);
    assert_eq!(dag.to_one_based(), vec![2, 1, 5, 6, 3, 4]);
}

#[test]
fn dumped_draws_satisfy_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    // n above the table cap goes through the rejection sampler
    let e = random_symmetric_with(60, &mut rng, |r| r.random_range(-1.0..1.0)).unwrap();
    let d = standardize(&e).unwrap();
    let sampler = QuadSampler::new(&d, 48).unwrap();
    assert!(matches!(sampler, QuadSampler::Rejection { .. }));
    for z in zero_bias_draws(&d, &sampler, 300, 9, None).unwrap() {
        let q = z.quad;
        assert_eq!((z.pi_dagger.image(q.i), z.pi_dagger.image(q.j)), (q.k, q.l));
        assert!((z.w - y_value(&d, &z.pi).unwrap()).abs() < 1e-12);
        assert!((z.w - (z.s + z.t)).abs() < 1e-12);
        assert!((z.w_dagger - (z.s + z.t_dagger)).abs() < 1e-12);
        assert!((z.w_ddagger - (z.s + z.t_ddagger)).abs() < 1e-12);
        assert!(z.w_dagger != z.w_ddagger);
        assert!((0.0..1.0).contains(&z.u));
        assert!((1..=10).contains(&z.case_id));
    }
}

#[test]
fn stein_pair_draws() {
    let d = array(12, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for _ in 0..1000 {
        let s = stein_pair_draw(&d, &mut rng).unwrap();
        assert_ne!(s.i, s.j);
        let (pi, i, j) = (s.pi.as_slice(), s.i, s.j);
        let formula = 2.0 * (d.get(i, pi[i]) + d.get(j, pi[j]) - d.get(i, j) - d.get(pi[i], pi[j]));
        assert!((s.w - s.w_prime - formula).abs() < 1e-12);
        assert!(s.pi_prime.has_cycle(i, j));
    }
}
