use lqdim::builder::CylinderMass;
use lqdim::spectrum::*;
use lqdim::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fine(rs: &RuleSet, level: u32) -> DyadicMeasure {
    let om = OmegaSequence::constant(0, 64, 1);
    let depth = depth_for_level(rs, &om, level).unwrap() + 1;
    build_measure(rs, &om, depth, level).unwrap()
}

#[test]
fn middle_thirds_sum_matches_cylinder_enumeration() {
    let rs = presets::middle_thirds([0.5, 0.5]);
    let om = OmegaSequence::constant(0, 8, 1);
    let level = dynamics::normalization_level(&rs, &om, 8).unwrap();
    let m = build_measure(&rs, &om, 8, level).unwrap();
    // oracle: enumerate the 2^8 left endpoints in integer units of 3^-8, bin the centers
    let mut cells = std::collections::BTreeMap::new();
    for w in 0u32..256 {
        let left: u64 = (0..8).map(|i| if w >> i & 1 == 1 { 2 * 3u64.pow(7 - i) } else { 0 }).sum();
        let center = (left as f64 + 0.5) / 3f64.powi(8);
        *cells.entry((center * 2f64.powi(level as i32)).floor() as i64).or_insert(0u32) += 1;
    }
    let oracle: f64 = cells.values().map(|&c| (c as f64 * 0.5f64.powi(8)).powi(2)).sum();
    assert!((correlation_sum(&m, 2.0).unwrap() - oracle).abs() < 1e-12);
    assert_eq!(box_count(&m), 256);
}

#[test]
fn estimator_matches_closed_forms() {
    let mt = fine(&presets::middle_thirds([0.5, 0.5]), 14);
    let d = estimate_from_finest(&mt, 2.0, (8, 14)).unwrap();
    assert!((d.dimension - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{}", d.dimension);

    let fc = fine(&presets::four_corner(0.2, 1.0), 11);
    let d = estimate_from_finest(&fc, 2.0, (6, 11)).unwrap();
    assert!((d.dimension - 4f64.ln() / 5f64.ln()).abs() < 0.03, "{}", d.dimension);

    let biased = fine(&presets::cantor(0.2, [0.9, 0.1]), 14);
    for q in [1.5, 2.0] {
        let d = estimate_from_finest(&biased, q, (8, 14)).unwrap();
        let closed = formulas::dq_formula_random(&[vec![0.9, 0.1]], &[0.2], &[1.0], q).unwrap();
        assert!((d.dimension - closed).abs() < 0.03, "q={q}: {} vs {closed}", d.dimension);
    }
}

#[test]
fn estimator_needs_three_levels() {
    let m = fine(&presets::lebesgue(), 10);
    assert!(estimate_from_finest(&m, 2.0, (8, 9)).is_err());
    assert!(estimate_from_finest(&m, 2.0, (8, 12)).is_err());
    assert!(estimate_from_finest(&m, 1.0, (2, 8)).is_err());
}

#[test]
fn spectrum_csv_shape() {
    let m = fine(&presets::middle_thirds([0.3, 0.7]), 12);
    let curves = estimate_spectrum(&m, &DEFAULT_Q_GRID, (6, 12)).unwrap();
    assert_eq!(curves.len(), 4);
    for c in &curves {
        assert_eq!(c.csv_rows().lines().count(), 7);
    }
    // a biased measure has a strictly decreasing spectrum
    for w in curves.windows(2) {
        assert!(w[1].dimension < w[0].dimension);
    }
}

#[test]
fn energy_scan_tracks_correlation_dimension() {
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
    let leb = fine(&presets::lebesgue(), 12);
    let e = energy_correlation_dimension(&leb, &grid).unwrap();
    assert!((e.dimension - 1.0).abs() <= 0.1, "{e:?}");
    let mt = fine(&presets::middle_thirds([0.5, 0.5]), 12);
    let e = energy_correlation_dimension(&mt, &grid).unwrap();
    assert!((e.dimension - 0.63).abs() <= 0.1, "{e:?}");
    let point = DyadicMeasure::point_mass(AmbientDim::One, [0.3, 0.0], 12).unwrap();
    assert!(energy_correlation_dimension(&point, &grid).unwrap().degenerate);
    let energies = discrete_energy(&mt, &[0.2, 0.6, 1.0]);
    assert!(energies[0] < energies[1] && energies[1] < energies[2]);
}

#[test]
fn comparable_interval_families_are_six_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mt = fine(&presets::middle_thirds([0.5, 0.5]), 12);
    for _ in 0..50 {
        let level = rng.gen_range(2..6);
        let ell = 0.5f64.powi(level);
        let width = rng.gen_range(ell / 2.0..ell);
        let count = (1.0 / width).ceil() as usize;
        let shift = rng.gen_range(0.0..width);
        let p: Vec<Rect> = (0..=count)
            .map(|i| Rect::interval(i as f64 * width - shift, (i + 1) as f64 * width - shift))
            .collect();
        let d: Vec<Rect> = (0..1usize << level)
            .map(|i| Rect::interval(i as f64 * ell, (i + 1) as f64 * ell))
            .collect();
        let window = Rect::interval(0.0, 1.0);
        let m = check_m_equivalence(&p, &d, &window).unwrap();
        assert!(m <= 6, "M = {m}");
        for q in [1.5, 2.0] {
            assert!(compare_moment_sums(&p, &d, m, &mt, q).unwrap().pass);
        }
    }
}

/// Stationary two-state Markov chain on binary words; condition (c) holds
/// with `K = max P(a, b) / π(b)`.
struct Markov {
    p: [[f64; 2]; 2],
    pi: [f64; 2],
}

impl CylinderMass for Markov {
    fn mass(&self, _omega: &[usize], word: &[usize]) -> f64 {
        match word.first() {
            None => 1.0,
            Some(&a) => self.pi[a] * word.windows(2).map(|w| self.p[w[0]][w[1]]).product::<f64>(),
        }
    }
}

#[test]
fn condition_c_with_markov_masses() {
    let p = [[0.9, 0.1], [0.3, 0.7]];
    let pi = [0.75, 0.25];
    let chain = Markov { p, pi };
    let k = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| p[a][b] / pi[b])
        .fold(0.0, f64::max);
    let rs = presets::middle_thirds([0.5, 0.5]);
    let om = OmegaSequence::constant(0, 12, 1);
    let ratio = check_condition_c(&rs, &chain, &om, 5, 4).unwrap();
    assert!(ratio <= k * (1.0 + 1e-12));
    assert!((ratio - k).abs() < 1e-12);
    let product = ProductMass { rules: &rs };
    assert!((check_condition_c(&rs, &product, &om, 5, 4).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn projection_spread_shrinks_with_deeper_windows() {
    let rs = presets::four_corner(0.2, 1.0);
    let om = OmegaSequence::constant(0, 64, 1);
    let spread = |lo: u32, hi: u32| {
        let depth = depth_for_level(&rs, &om, hi).unwrap() + 1;
        let dims: Vec<f64> = (0..16)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 16.0;
                let m = project_measure(&rs, &om, [th.cos(), th.sin()], depth, hi).unwrap();
                estimate_from_finest(&m, 2.0, (lo, hi)).unwrap().dimension
            })
            .collect();
        dims.iter().cloned().fold(f64::MIN, f64::max) - dims.iter().cloned().fold(f64::MAX, f64::min)
    };
    let (shallow, deep) = (spread(6, 11), spread(10, 17));
    assert!(deep < shallow, "{deep} vs {shallow}");
}
