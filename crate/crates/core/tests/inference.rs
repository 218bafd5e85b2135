use kgresolve::grounding::HingePotential;
use kgresolve::inference::{brute_force_map, map_inference, objective, SolverConfig};
use kgresolve::rules::Exponent;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hinge(coeffs: Vec<(usize, f64)>, constant: f64, weight: f64, exponent: Exponent) -> HingePotential {
    HingePotential {
        rule: "test".into(),
        weight,
        coeffs,
        constant,
        exponent,
    }
}

/// Random program over `n` atoms. With `anchored`, every atom also gets
/// squared pulls toward both ends, which makes the minimiser unique.
fn program(rng: &mut impl Rng, n: usize, anchored: bool) -> Vec<HingePotential> {
    let mut ps = Vec::new();
    for _ in 0..rng.gen_range(1..=8) {
        let mut atoms: Vec<usize> = (0..n).collect();
        for i in 0..n {
            atoms.swap(i, rng.gen_range(i..n));
        }
        let k = rng.gen_range(1..=n);
        let mut coeffs: Vec<(usize, f64)> = atoms[..k]
            .iter()
            .map(|&a| (a, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
            .collect();
        coeffs.sort_by_key(|c| c.0);
        let exponent = if rng.gen_bool(0.5) { Exponent::Linear } else { Exponent::Squared };
        ps.push(hinge(coeffs, rng.gen_range(-1.0..=1.0), rng.gen_range(0.5..=5.0), exponent));
    }
    if anchored {
        for a in 0..n {
            ps.push(hinge(vec![(a, 1.0)], 0.0, rng.gen_range(0.5..=2.0), Exponent::Squared));
            ps.push(hinge(vec![(a, -1.0)], 1.0, rng.gen_range(0.5..=2.0), Exponent::Squared));
        }
    }
    ps
}

fn tight() -> SolverConfig {
    SolverConfig {
        primal_tol: 1e-9,
        dual_tol: 1e-9,
        max_iterations: 200_000,
        ..SolverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn close_to_grid_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let ps = program(&mut rng, n, false);
        let step = 0.01;
        let a = map_inference(&ps, n, &SolverConfig::default()).unwrap();
        let grid = brute_force_map(&ps, n, step).unwrap();
        let tol = (n as f64 * step).max(1e-3);
        prop_assert!((a.objective - grid.objective).abs() <= tol, "{} vs {}", a.objective, grid.objective);
    }

    #[test]
    fn never_worse_than_the_start(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6);
        let ps = program(&mut rng, n, false);
        let cfg = SolverConfig { max_iterations: rng.gen_range(1..50), ..SolverConfig::default() };
        let a = map_inference(&ps, n, &cfg).unwrap();
        let start = objective(&ps, &vec![cfg.initial_value; n]).unwrap();
        prop_assert!(a.objective <= start + 1e-9);
    }

    #[test]
    fn weight_scaling_keeps_the_argmin(seed in any::<u64>(), scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let ps = program(&mut rng, n, true);
        let scaled: Vec<HingePotential> =
            ps.iter().map(|p| HingePotential { weight: p.weight * scale, ..p.clone() }).collect();
        let a = map_inference(&ps, n, &tight()).unwrap();
        let b = map_inference(&scaled, n, &tight()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-4, "{:?} vs {:?}", a.values, b.values);
        }
    }

    #[test]
    fn potential_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let ps = program(&mut rng, n, false);
        let mut shuffled = ps.clone();
        for i in 0..shuffled.len() {
            let j = rng.gen_range(i..shuffled.len());
            shuffled.swap(i, j);
        }
        let a = map_inference(&ps, n, &tight()).unwrap();
        let b = map_inference(&shuffled, n, &tight()).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-6, "{} vs {}", a.objective, b.objective);
    }
}

#[test]
fn prior_balance_has_a_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (w1, w2) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let ps = [
            hinge(vec![(0, 1.0)], 0.0, w1, Exponent::Squared),
            hinge(vec![(0, -1.0)], 1.0, w2, Exponent::Squared),
        ];
        let a = map_inference(&ps, 1, &SolverConfig::default()).unwrap();
        assert!((a.values[0] - w2 / (w1 + w2)).abs() <= 1e-4);
    }
}
