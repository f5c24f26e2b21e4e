use lqdim::decomposition::decompose_self_similar;
use lqdim::dynamics::{skew_step, CircleRotation, SkewState};
use lqdim::ifs::{compose_cylinder, cylinder_center_and_diameter, CylinderFrame};
use lqdim::numeric::looks_rational;
use lqdim::spectrum::{correlation_sum, holder_check};
use lqdim::*;
use proptest::prelude::*;

fn frame() -> impl Strategy<Value = CylinderFrame> {
    (0.05f64..0.95, -3.0f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(s, r, x, y)| CylinderFrame {
        scale_product: s,
        rotation_sum: r,
        translation: [x, y],
    })
}

fn probability(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn random_measure() -> impl Strategy<Value = DyadicMeasure> {
    (8u32..14, prop::collection::vec((0i64..4096, 0i64..64, 0.001f64..1.0), 1..200), any::<bool>()).prop_map(
        |(level, raw, planar)| {
            let total: f64 = raw.iter().map(|r| r.2).sum();
            let dim = if planar { AmbientDim::Two } else { AmbientDim::One };
            let entries = raw
                .iter()
                .map(|&(x, y, m)| ([x, if planar { y } else { 0 }], m / total))
                .collect();
            DyadicMeasure::from_entries(level, dim, entries).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative(a in frame(), b in frame(), c in frame(), p in (-1.0f64..1.0, -1.0f64..1.0)) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        let p = [p.0, p.1];
        let (x, y) = (left.apply(p), right.apply(p));
        prop_assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
        let direct = a.apply(b.apply(c.apply(p)));
        prop_assert!((x[0] - direct[0]).abs() < 1e-12 && (x[1] - direct[1]).abs() < 1e-12);
    }

    #[test]
    fn cylinders_nest(seed in 0u64..1000, len in 1usize..8, picks in prop::collection::vec(0usize..3, 8)) {
        let rs = presets::random_pair(1.0);
        let om = sample_omega(&[0.5, 0.5], 8, seed).unwrap();
        let prefix = &om.symbols()[..len];
        let word: Vec<usize> = prefix.iter().zip(&picks).map(|(&i, &j)| j % rs.rule(i).len()).collect();
        let reference = rs.reference();
        let child = compose_cylinder(&rs, prefix, &Word::new(word.clone())).unwrap();
        let parent = compose_cylinder(&rs, &prefix[..len - 1], &Word::new(word[..len - 1].to_vec())).unwrap();
        let (cc, cd) = cylinder_center_and_diameter(&child, &reference);
        let (pc, pd) = cylinder_center_and_diameter(&parent, &reference);
        let gap = ((cc[0] - pc[0]).powi(2) + (cc[1] - pc[1]).powi(2)).sqrt();
        prop_assert!(gap + cd / 2.0 <= pd / 2.0 * (1.0 + 1e-12));
    }

    #[test]
    fn building_conserves_mass(seed in 0u64..1000, level in 4u32..12, v in 0.0f64..std::f64::consts::TAU) {
        let rs = presets::random_pair(1.0);
        let om = sample_omega(&[0.5, 0.5], 40, seed).unwrap();
        let depth = depth_for_level(&rs, &om, level).unwrap();
        let m = build_measure(&rs, &om, depth, level).unwrap();
        prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
        let p = project_measure(&rs, &om, [v.cos(), v.sin()], depth, level).unwrap();
        prop_assert!((p.total_mass() - 1.0).abs() < 1e-12);
        for l in 0..level {
            prop_assert!((m.coarsen(l).unwrap().total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(m in random_measure()) {
        prop_assert_eq!(DyadicMeasure::from_csv(&m.to_csv()).unwrap(), m);
    }

    #[test]
    fn holder_bound_holds(m in random_measure(), q in 1.05f64..4.0) {
        prop_assert!(holder_check(&m, q).unwrap().pass);
    }

    #[test]
    fn refinement_never_increases_moment_sums(m in random_measure(), q in 1.05f64..4.0) {
        let mut finer = correlation_sum(&m, q).unwrap();
        for l in (0..m.level()).rev() {
            let coarser = correlation_sum(&m.coarsen(l).unwrap(), q).unwrap();
            // equal sums may differ in the last bits when no cells merge
            prop_assert!(finer <= coarser * (1.0 + 1e-12), "L={}: {} > {}", l, finer, coarser);
            finer = coarser;
        }
    }

    #[test]
    fn decomposition_reconstructs_cylinders(
        pbar in (2usize..=4).prop_flat_map(probability),
        l in 1usize..=4,
        raw in prop::collection::vec(0usize..4, 12),
    ) {
        let d = decompose_self_similar(&pbar, l).unwrap();
        prop_assert!((d.total_weight() - 1.0).abs() < 1e-12);
        prop_assert!(d.class_entropy() <= d.entropy_bound());
        let blocks = 12 / l;
        let word: Vec<usize> = raw[..blocks * l].iter().map(|&s| s % pbar.len()).collect();
        let direct: f64 = word.iter().map(|&s| pbar[s]).product();
        prop_assert!((d.reconstruct_cylinder(&word).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn rotation_cocycle_identity(seed in 0u64..1000, s0 in 0.0f64..std::f64::consts::TAU, n in 0usize..50, m in 0usize..50) {
        let rs = presets::random_pair(1.0);
        let om = sample_omega(&[0.5, 0.5], 100, seed).unwrap();
        let dynamics = CircleRotation::new(&rs);
        let whole = skew_step(&dynamics, &om, SkewState::new(s0), n + m).unwrap();
        let split = skew_step(&dynamics, &om, skew_step(&dynamics, &om, SkewState::new(s0), n).unwrap(), m).unwrap();
        prop_assert_eq!(whole.base_position, split.base_position);
        let diff = (whole.fiber - split.fiber).rem_euclid(std::f64::consts::TAU);
        prop_assert!(diff.min(std::f64::consts::TAU - diff) < 1e-9);
    }

    #[test]
    fn small_rationals_are_recognised(p in 1i64..500, q in 1i64..500) {
        let (a, b) = looks_rational(p as f64 / q as f64).unwrap();
        prop_assert_eq!(a * q, b * p);
    }
}
