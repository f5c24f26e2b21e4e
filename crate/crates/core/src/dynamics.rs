//! Shift and skew-product dynamics: fiber rotations on the unit circle and on
//! the β-circle, the dyadic normalization levels `L_n`, Birkhoff averages and
//! genericity diagnostics.

use std::f64::consts::{PI, TAU};

use crate::builder::OmegaSequence;
use crate::error::{Error, Result};
use crate::ifs::{reduce_angle, RuleSet};
use crate::numeric::looks_rational;

/// A product of contraction ratios kept as `mantissa · 2^exponent` with the
/// mantissa in `[1/2, 1)`, so long products never underflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleProduct {
    mantissa: f64,
    exponent: i64,
}

fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    if biased == 0 {
        // subnormal: scale up first
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let e = biased - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

impl ScaleProduct {
    pub fn one() -> Self {
        ScaleProduct {
            mantissa: 0.5,
            exponent: 1,
        }
    }

    pub fn times(self, factor: f64) -> Self {
        let (m, e) = frexp(self.mantissa * factor);
        ScaleProduct {
            mantissa: m,
            exponent: self.exponent + e,
        }
    }

    /// The unique `L ≥ 0` with `2^{-L} ≤ value < 2^{1-L}`.
    pub fn level(&self) -> u32 {
        (1 - self.exponent).max(0) as u32
    }

    pub fn log2(&self) -> f64 {
        self.mantissa.log2() + self.exponent as f64
    }

    pub fn value(&self) -> f64 {
        self.mantissa * 2f64.powi(self.exponent as i32)
    }
}

fn require_prefix(omega: &OmegaSequence, needed: usize) -> Result<()> {
    if needed > omega.len() {
        return Err(Error::PrefixExhausted {
            needed,
            available: omega.len(),
        });
    }
    Ok(())
}

/// `L_n^{(ω)}`: the dyadic level matched to `λ_{ω_1}⋯λ_{ω_n}`.
pub fn normalization_level(rs: &RuleSet, omega: &OmegaSequence, n: usize) -> Result<u32> {
    require_prefix(omega, n)?;
    Ok(omega.symbols()[..n]
        .iter()
        .fold(ScaleProduct::one(), |p, &i| p.times(rs.rule(i).scale()))
        .level())
}

/// `[L_0, L_1, …, L_n]` in one pass.
pub fn normalization_levels(rs: &RuleSet, omega: &OmegaSequence, n: usize) -> Result<Vec<u32>> {
    require_prefix(omega, n)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut p = ScaleProduct::one();
    out.push(p.level());
    for &i in &omega.symbols()[..n] {
        p = p.times(rs.rule(i).scale());
        out.push(p.level());
    }
    Ok(out)
}

/// `μ* = Σ r_i log₂ λ_i`.
pub fn lyapunov_constant(rs: &RuleSet, weights: &[f64]) -> Result<f64> {
    if weights.len() != rs.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} rules",
            weights.len(),
            rs.len()
        )));
    }
    crate::ifs::validate_probability_vector(weights)?;
    Ok(weights
        .iter()
        .zip(rs.rules())
        .map(|(r, rule)| if *r > 0.0 { r * rule.scale().log2() } else { 0.0 })
        .sum())
}

/// Largest deviation, over all cylinders of the given depth, between the
/// empirical visit frequency along `omega` and the Bernoulli(`weights`) mass.
pub fn genericity_test(omega: &OmegaSequence, weights: &[f64], cylinder_depth: usize) -> Result<f64> {
    crate::ifs::validate_probability_vector(weights)?;
    let n_sym = weights.len();
    if cylinder_depth == 0 {
        return Ok(0.0);
    }
    if omega.len() < cylinder_depth {
        return Err(Error::PrefixExhausted {
            needed: cylinder_depth,
            available: omega.len(),
        });
    }
    let cells = n_sym
        .checked_pow(cylinder_depth as u32)
        .filter(|&c| c <= 1 << 20)
        .ok_or_else(|| Error::Resource("too many cylinders for genericity test".into()))?;
    let symbols = omega.symbols();
    if symbols.iter().any(|&s| s >= n_sym) {
        return Err(Error::InvalidInput("symbol outside the weight vector".into()));
    }
    let windows = symbols.len() - cylinder_depth + 1;
    let mut counts = vec![0u64; cells];
    for w in symbols.windows(cylinder_depth) {
        counts[w.iter().fold(0, |acc, &s| acc * n_sym + s)] += 1;
    }
    let mut worst: f64 = 0.0;
    for (code, &c) in counts.iter().enumerate() {
        let mut mass = 1.0;
        let mut rem = code;
        for _ in 0..cylinder_depth {
            mass *= weights[rem % n_sym];
            rem /= n_sym;
        }
        worst = worst.max((c as f64 / windows as f64 - mass).abs());
    }
    Ok(worst)
}

/// Fiber dynamics driven by the symbol sequence.
pub trait FiberDynamics {
    /// Symbols consumed by one application of the skew product.
    fn symbols_per_step(&self) -> usize;
    /// Fiber after one step, given the block of symbols at the current base position.
    fn advance(&self, fiber: f64, block: &[usize]) -> f64;
    fn in_range(&self, fiber: f64) -> bool;
}

/// Rotation of the unit circle by the rule angles.
///
/// The fiber coordinate `s` stands for the unit vector `e^{-is}`; one step
/// adds `α_{ω_1}`, i.e. multiplies the vector by `e^{-iα_{ω_1}}`. With this
/// parametrization the fiber after `n` steps from `0` equals the rotation
/// part of the cylinder maps of length `n`, and the direction carried by the
/// fiber is the one seen by the rescaled measure `η^{(T^n ω)}`.
#[derive(Clone, Debug)]
pub struct CircleRotation {
    angles: Vec<f64>,
}

impl CircleRotation {
    pub fn new(rs: &RuleSet) -> Self {
        CircleRotation {
            angles: rs.rules().iter().map(|r| r.rotation()).collect(),
        }
    }

    pub fn from_angles(angles: Vec<f64>) -> Self {
        CircleRotation { angles }
    }
}

impl FiberDynamics for CircleRotation {
    fn symbols_per_step(&self) -> usize {
        1
    }

    fn advance(&self, fiber: f64, block: &[usize]) -> f64 {
        reduce_angle(fiber + self.angles[block[0]])
    }

    fn in_range(&self, fiber: f64) -> bool {
        (0.0..TAU).contains(&fiber)
    }
}

/// Unit vector represented by a circle fiber coordinate.
pub fn direction_of_fiber(s: f64) -> [f64; 2] {
    let (sin, cos) = s.sin_cos();
    [cos, -sin]
}

/// Circle fiber coordinate of a unit vector.
pub fn fiber_of_direction(v: [f64; 2]) -> f64 {
    reduce_angle(-v[1].atan2(v[0]))
}

/// `s ↦ s +_(β) a` on `[-β, β)` with endpoints identified.
pub fn beta_add(s: f64, a: f64, beta: f64) -> f64 {
    let width = 2.0 * beta;
    let mut x = s + a;
    if x >= beta || x < -beta {
        x = (x + beta).rem_euclid(width) - beta;
        if x >= beta {
            x -= width;
        }
    }
    x
}

/// Skew-product state: base offset into the ω prefix plus the fiber coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkewState {
    pub base_position: usize,
    pub fiber: f64,
}

impl SkewState {
    pub fn new(fiber: f64) -> Self {
        SkewState {
            base_position: 0,
            fiber,
        }
    }
}

/// Apply the skew product `steps` times.
pub fn skew_step<D: FiberDynamics + ?Sized>(
    dynamics: &D,
    omega: &OmegaSequence,
    state: SkewState,
    steps: usize,
) -> Result<SkewState> {
    let r = dynamics.symbols_per_step();
    let needed = state.base_position + steps * r;
    require_prefix(omega, needed)?;
    let symbols = omega.symbols();
    let mut st = state;
    for _ in 0..steps {
        let block = &symbols[st.base_position..st.base_position + r];
        st.fiber = dynamics.advance(st.fiber, block);
        assert!(dynamics.in_range(st.fiber), "fiber left its range: {}", st.fiber);
        st.base_position += r;
    }
    Ok(st)
}

/// Fiber orbit `[s_0, s_1, …, s_n]`.
pub fn fiber_orbit<D: FiberDynamics + ?Sized>(
    dynamics: &D,
    omega: &OmegaSequence,
    start: SkewState,
    steps: usize,
) -> Result<Vec<f64>> {
    let r = dynamics.symbols_per_step();
    require_prefix(omega, start.base_position + steps * r)?;
    let symbols = omega.symbols();
    let mut out = Vec::with_capacity(steps + 1);
    let mut st = start;
    out.push(st.fiber);
    for _ in 0..steps {
        st.fiber = dynamics.advance(st.fiber, &symbols[st.base_position..st.base_position + r]);
        assert!(dynamics.in_range(st.fiber));
        st.base_position += r;
        out.push(st.fiber);
    }
    Ok(out)
}

/// `(1/n) Σ_{i<n} f(S^i(ω, s))`; `f` sees the remaining symbols and the fiber.
pub fn birkhoff_average<D, F>(dynamics: &D, omega: &OmegaSequence, start: SkewState, n: usize, f: F) -> Result<f64>
where
    D: FiberDynamics + ?Sized,
    F: Fn(&[usize], f64) -> f64,
{
    if n == 0 {
        return Err(Error::InvalidParameter("Birkhoff average over zero steps".into()));
    }
    let r = dynamics.symbols_per_step();
    require_prefix(omega, start.base_position + n * r)?;
    let symbols = omega.symbols();
    let mut st = start;
    let mut acc = 0.0;
    for _ in 0..n {
        acc += f(&symbols[st.base_position..], st.fiber);
        st.fiber = dynamics.advance(st.fiber, &symbols[st.base_position..st.base_position + r]);
        st.base_position += r;
    }
    Ok(acc / n as f64)
}

/// Sufficient condition for ergodicity of `μ × Lebesgue` under the circle skew
/// product with Bernoulli `μ`: some rule with positive weight rotates by an
/// irrational multiple of π. Rationality is judged by continued fractions.
pub fn irrational_rotation_condition(rs: &RuleSet, weights: &[f64]) -> bool {
    rs.rules()
        .iter()
        .zip(weights)
        .any(|(rule, &w)| w > 0.0 && looks_rational(rule.rotation() / PI).is_none())
}

/// Heuristic equidistribution diagnostic: the largest deviation, over
/// `starts` evenly spaced starting fibers and the test functions `cos(ks)`,
/// `sin(ks)` for `k = 1..=harmonics`, between the Birkhoff average and its
/// Lebesgue integral (zero). Small values are consistent with ergodicity;
/// this is not a proof of it.
pub fn equidistribution_diagnostic(
    rs: &RuleSet,
    omega: &OmegaSequence,
    n: usize,
    starts: usize,
    harmonics: usize,
) -> Result<f64> {
    let dynamics = CircleRotation::new(rs);
    let mut worst: f64 = 0.0;
    for s in 0..starts {
        let s0 = TAU * s as f64 / starts as f64;
        let orbit = fiber_orbit(&dynamics, omega, SkewState::new(s0), n - 1)?;
        for k in 1..=harmonics {
            let kf = k as f64;
            let (c, si) = orbit
                .iter()
                .fold((0.0, 0.0), |(c, si), &x| (c + (kf * x).cos(), si + (kf * x).sin()));
            worst = worst.max((c / n as f64).abs()).max((si / n as f64).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{sample_omega, OmegaSequence};
    use crate::ifs::{presets, AmbientDim, Rule};

    fn single_rule(scale: f64, rotation: f64) -> RuleSet {
        let r = Rule::new(scale, rotation, vec![[0.0, 0.0]], vec![1.0]).unwrap();
        RuleSet::new(AmbientDim::Two, vec![r]).unwrap()
    }

    #[test]
    fn frexp_is_exact() {
        for &x in &[1.0, 0.5, 0.3, 0.75, 1e-300, 3.0] {
            let (m, e) = frexp(x);
            assert!((0.5..1.0).contains(&m));
            assert_eq!(m * 2f64.powi(e as i32), x);
        }
    }

    #[test]
    fn level_examples() {
        let half = single_rule(0.5, 0.0);
        let om = OmegaSequence::constant(0, 40, 1);
        for n in 0..40 {
            assert_eq!(normalization_level(&half, &om, n).unwrap(), n as u32);
        }
        let r3 = single_rule(0.3, 0.0);
        assert_eq!(normalization_level(&r3, &om, 1).unwrap(), 2);
        assert_eq!(normalization_level(&r3, &om, 2).unwrap(), 4);
        assert!(normalization_level(&r3, &om, 41).is_err());
    }

    #[test]
    fn level_bracket_holds_over_long_products() {
        let rs = presets::random_pair(1.0);
        let om = sample_omega(&[0.5, 0.5], 2000, 7).unwrap();
        let levels = normalization_levels(&rs, &om, 2000).unwrap();
        let mut log2p = 0.0;
        #[allow(clippy::needless_range_loop)]
        for n in 0..=2000 {
            if n > 0 {
                log2p += rs.rule(om.symbols()[n - 1]).scale().log2();
            }
            let l = levels[n] as f64;
            // 2^{-L} ≤ P < 2^{1-L}  ⇔  -L ≤ log2 P < 1-L
            assert!(-l <= log2p + 1e-9 && log2p < 1.0 - l + 1e-9, "n={n}");
        }
    }

    #[test]
    fn lyapunov_examples() {
        let half = single_rule(0.5, 0.0);
        assert_eq!(lyapunov_constant(&half, &[1.0]).unwrap(), -1.0);
        let a = Rule::new(0.25, 0.0, vec![[0.0, 0.0]], vec![1.0]).unwrap();
        let b = Rule::new(1.0 / 3.0, 0.0, vec![[0.0, 0.0]], vec![1.0]).unwrap();
        let rs = RuleSet::new(AmbientDim::Two, vec![a, b]).unwrap();
        let mu = lyapunov_constant(&rs, &[0.5, 0.5]).unwrap();
        assert!((mu + (2.0 + 3f64.log2()) / 2.0).abs() < 1e-12);
        assert!((mu + 1.79248).abs() < 1e-5);
    }

    #[test]
    fn skew_examples() {
        let flat = single_rule(0.5, 0.0);
        let om = OmegaSequence::constant(0, 100, 1);
        let d = CircleRotation::new(&flat);
        let st = skew_step(&d, &om, SkewState::new(1.234), 50).unwrap();
        assert_eq!(st.fiber, 1.234);
        assert_eq!(st.base_position, 50);

        let one = single_rule(0.5, 1.0);
        let d = CircleRotation::new(&one);
        let st = skew_step(&d, &om, SkewState::new(0.0), 7).unwrap();
        assert!((st.fiber - (7.0 - TAU)).abs() < 1e-12);
        assert!((st.fiber - 0.71681).abs() < 1e-5);

        assert!(matches!(
            skew_step(&d, &om, SkewState::new(0.0), 101),
            Err(Error::PrefixExhausted { .. })
        ));
    }

    #[test]
    fn beta_addition_wraps() {
        let beta = 3f64.ln();
        let alpha = (4.0f64 / 3.0).ln();
        let mut s = 0.0;
        for _ in 0..4 {
            s = beta_add(s, alpha, beta);
            assert!((-beta..beta).contains(&s));
        }
        assert!((s - (4.0 * alpha - 2.0 * beta)).abs() < 1e-12);
        assert!((s + 1.046497).abs() < 1e-6);
        assert_eq!(beta_add(beta - alpha, alpha, beta), -beta);
    }

    #[test]
    fn direction_round_trip() {
        for k in 0..16 {
            let s = TAU * k as f64 / 16.0 + 0.1;
            let back = fiber_of_direction(direction_of_fiber(s));
            assert!((back - reduce_angle(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_cocycle_identity() {
        let rs = presets::random_pair(1.0);
        let om = sample_omega(&[0.5, 0.5], 300, 3).unwrap();
        let d = CircleRotation::new(&rs);
        for (n, m) in [(5, 7), (100, 150), (0, 9)] {
            let s0 = 0.4;
            let whole = skew_step(&d, &om, SkewState::new(s0), n + m).unwrap();
            let first = skew_step(&d, &om, SkewState::new(s0), n).unwrap();
            let second = skew_step(&d, &om, first, m).unwrap();
            let diff = (whole.fiber - second.fiber).abs();
            assert!(diff.min(TAU - diff) < 1e-12);
        }
    }

    #[test]
    fn genericity_examples() {
        let om = OmegaSequence::constant(0, 1000, 1);
        assert_eq!(genericity_test(&om, &[1.0], 3).unwrap(), 0.0);
        let om = sample_omega(&[0.5, 0.5], 100_000, 11).unwrap();
        assert!(genericity_test(&om, &[0.5, 0.5], 2).unwrap() < 0.01);
        let dev = genericity_test(&om, &[0.9, 0.1], 1).unwrap();
        assert!((dev - 0.4).abs() < 0.01);
    }

    #[test]
    fn birkhoff_examples() {
        let rs = single_rule(0.5, 1.0);
        let om = OmegaSequence::constant(0, 100_000, 1);
        let d = CircleRotation::new(&rs);
        let c = birkhoff_average(&d, &om, SkewState::new(0.3), 1000, |_, _| 2.5).unwrap();
        assert_eq!(c, 2.5);
        let upper = birkhoff_average(&d, &om, SkewState::new(0.0), 100_000, |_, s| {
            if s < PI {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((upper - 0.5).abs() < 0.01);
    }

    #[test]
    fn rotation_condition() {
        assert!(irrational_rotation_condition(&single_rule(0.5, 1.0), &[1.0]));
        assert!(!irrational_rotation_condition(&single_rule(0.5, PI / 2.0), &[1.0]));
        assert!(!irrational_rotation_condition(&single_rule(0.5, 0.0), &[1.0]));
    }
}
