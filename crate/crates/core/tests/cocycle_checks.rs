use std::f64::consts::PI;

use lqdim::cocycle::*;
use lqdim::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Four maps of scale 1/2 onto the quadrants of the unit square: planar Lebesgue measure.
fn planar_lebesgue() -> RuleSet {
    let rule = Rule::uniform(0.5, 0.0, vec![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]]).unwrap();
    RuleSet::new(AmbientDim::Two, vec![rule]).unwrap()
}

#[test]
fn lebesgue_projection_sums_are_bracketed() {
    let rs = planar_lebesgue();
    let om = OmegaSequence::constant(0, 16, 1);
    let cfg = CocycleConfig::default();
    for n in 1..=6 {
        let s = cocycle_sample(&rs, &om, 0.0, n, 2.0, &cfg).unwrap();
        let unit = 0.5f64.powi(s.level as i32);
        assert_eq!(s.level, n as u32);
        assert!((s.tau - unit).abs() < 1e-15);
        assert!(unit <= s.tau_smooth && s.tau_smooth <= 5.0 * unit, "n={n}: {:?}", s);
        let e = equivalence_of(&s);
        assert!(e.pass && (1.0..=5.0).contains(&e.ratio));
    }
}

#[test]
fn smoothing_ratio_is_bounded_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = CocycleConfig::default();
    for rs in [presets::four_corner(0.2, 1.0), presets::random_pair(1.0)] {
        for _ in 0..40 {
            let om = sample_omega(&vec![1.0 / rs.len() as f64; rs.len()], 10, rng.gen()).unwrap();
            let fiber = rng.gen_range(0.0..2.0 * PI);
            let n = rng.gen_range(1..=6);
            let e = check_equivalence(&rs, &om, fiber, n, 1.5, &cfg).unwrap();
            assert!(e.pass, "{e:?}");
            assert!(e.ratio >= 1.0 && e.ratio <= 5f64.sqrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn submultiplicativity_and_csv() {
    let rs = presets::four_corner(0.2, 1.0);
    let om = OmegaSequence::constant(0, 16, 1);
    let cfg = CocycleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let checks: Vec<SubmultiplicativeCheck> = (0..30)
        .map(|_| {
            let fiber = rng.gen_range(0.0..2.0 * PI);
            check_submultiplicative(&rs, &om, fiber, rng.gen_range(1..=3), rng.gen_range(1..=3), 2.0, 1.0, &cfg).unwrap()
        })
        .collect();
    assert!(checks.iter().all(|c| c.pass));
    let csv = checks_to_csv(&checks);
    assert_eq!(csv.lines().next().unwrap(), CHECK_CSV_HEADER);
    assert_eq!(csv.lines().count(), 31);
    assert!(check_submultiplicative(&rs, &om, 0.0, 1, 1, 2.0, 0.5, &cfg).is_err());
    assert!(check_submultiplicative(&rs, &om, 0.0, 10, 10, 2.0, 1.0, &cfg).is_err());
}

#[test]
fn planar_sums_are_submultiplicative() {
    let rs = presets::random_pair(1.0);
    let cfg = CocycleConfig::default();
    for seed in 0..10 {
        let om = sample_omega(&[0.5, 0.5], 12, seed).unwrap();
        for (n, m) in [(1, 1), (2, 3), (3, 2), (4, 4)] {
            let (lhs, rhs, pass) = check_xi_submultiplicative(&rs, &om, n, m, 2.0, &cfg).unwrap();
            assert!(pass && lhs <= rhs);
        }
    }
}

#[test]
fn phi_estimates_recover_dimensions() {
    let cfg = PhiConfig {
        samples: 32,
        seed: 9,
        k: 1.0,
        sampling: OmegaSampling::Iid,
        cocycle: CocycleConfig::default(),
    };
    let ns: Vec<usize> = (2..=7).collect();
    let leb = estimate_phi(&planar_lebesgue(), &[1.0], 2.0, &ns, &cfg).unwrap();
    assert!((leb.dimension - 1.0).abs() < 0.05, "{leb:?}");
    assert!(leb.dimension_from_infimum < leb.dimension);
    let fc = estimate_phi(&presets::four_corner(0.2, 1.0), &[1.0], 2.0, &ns, &cfg).unwrap();
    assert!((fc.dimension - 4f64.ln() / 5f64.ln()).abs() < 0.05, "{fc:?}");
    assert_eq!(fc.to_csv().lines().count(), ns.len() + 1);
    assert!(estimate_phi(&planar_lebesgue(), &[1.0], 2.0, &[0, 1], &cfg).is_err());
}
