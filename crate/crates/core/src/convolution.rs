//! Bookkeeping for convolutions `ν^{(ω)} * A_t ϑ` of a random 1-D
//! self-similar measure with a deterministic one: the choice of `r`, `l`,
//! `β`, the β-circle rotation, crossing counts, the W/Y/Z rectangle
//! families, and dimension sweeps over the scaling `t`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::builder::{convolve_measures, OmegaSequence};
use crate::dynamics::{beta_add, FiberDynamics};
use crate::error::{Error, Result};
use crate::measure::DyadicMeasure;
use crate::numeric::looks_rational;
use crate::spectrum::{correlation_sum, SpectrumCurve};
use crate::ifs::AmbientDim;

/// Largest `r` or `l` searched before giving up.
const MAX_BLOCK: u32 = 10_000;

/// The `(a_i, b, r, l, β)` data of a convolution pair. Symbols index `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionScheme {
    random_scales: Vec<f64>,
    deterministic_scale: f64,
    r: usize,
    l: usize,
    beta: f64,
    ln_a: Vec<f64>,
}

/// Minimal `r` with `min_i b / a_i^r > 1`, then minimal `l` with
/// `max_i b / a_i^r < b^{-l}`; `β = -l ln b`.
pub fn select_scheme(a: &[f64], b: f64) -> Result<ConvolutionScheme> {
    if a.is_empty() {
        return Err(Error::InvalidInput("need at least one random scale".into()));
    }
    for &x in a.iter().chain(std::iter::once(&b)) {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidInput(format!("scale {x} outside (0, 1)")));
        }
    }
    let ln_b = b.ln();
    let ln_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let ln_a_max = ln_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_a_min = ln_a.iter().copied().fold(f64::INFINITY, f64::min);
    // min_i b/a_i^r > 1  ⇔  ln b - r ln a_max > 0
    let r = (1..=MAX_BLOCK)
        .find(|&r| ln_b - r as f64 * ln_a_max > 0.0)
        .ok_or_else(|| Error::InvalidInput("no block length r found".into()))? as usize;
    // max_i b/a_i^r < b^{-l}  ⇔  ln b - r ln a_min < -l ln b
    let top = ln_b - r as f64 * ln_a_min;
    let l = (1..=MAX_BLOCK)
        .find(|&l| top < -(l as f64) * ln_b)
        .ok_or_else(|| Error::InvalidInput("no deterministic block l found".into()))? as usize;
    let scheme = ConvolutionScheme {
        random_scales: a.to_vec(),
        deterministic_scale: b,
        r,
        l,
        beta: -(l as f64) * ln_b,
        ln_a,
    };
    debug_assert!(scheme.alpha_range().0 > 0.0 && scheme.alpha_range().1 < scheme.beta);
    Ok(scheme)
}

impl ConvolutionScheme {
    pub fn random_scales(&self) -> &[f64] {
        &self.random_scales
    }

    pub fn deterministic_scale(&self) -> f64 {
        self.deterministic_scale
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `α_{i_1…i_r} = ln(b / (a_{i_1} ⋯ a_{i_r}))`.
    pub fn alpha(&self, block: &[usize]) -> f64 {
        debug_assert_eq!(block.len(), self.r);
        self.deterministic_scale.ln() - block.iter().map(|&i| self.ln_a[i]).sum::<f64>()
    }

    /// Smallest and largest `α` over all blocks.
    pub fn alpha_range(&self) -> (f64, f64) {
        let ln_b = self.deterministic_scale.ln();
        let lo = self.ln_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = self.ln_a.iter().copied().fold(f64::INFINITY, f64::min);
        (ln_b - self.r as f64 * lo, ln_b - self.r as f64 * hi)
    }

    /// All `α` values keyed by block, in lexicographic block order.
    pub fn alphas(&self) -> Vec<(Vec<usize>, f64)> {
        let k = self.random_scales.len();
        let count = k.pow(self.r as u32);
        (0..count)
            .map(|mut code| {
                let mut block = vec![0; self.r];
                for slot in block.iter_mut().rev() {
                    *slot = code % k;
                    code /= k;
                }
                let a = self.alpha(&block);
                (block, a)
            })
            .collect()
    }

    /// Do the selection inequalities and `0 < α < β` hold?
    pub fn constraints_hold(&self) -> bool {
        let b = self.deterministic_scale;
        let ratios = self.random_scales.iter().map(|a| b / a.powi(self.r as i32));
        let min_ok = ratios.clone().all(|x| x > 1.0);
        let max_ok = ratios.into_iter().all(|x| x < b.powi(-(self.l as i32)));
        let (lo, hi) = self.alpha_range();
        min_ok && max_ok && lo > 0.0 && hi < self.beta
    }

    /// `log a_i / log b` for every random scale, with a flag for values that
    /// look rational (continued fractions).
    pub fn irrationality(&self) -> Vec<(f64, Option<(i64, i64)>)> {
        let ln_b = self.deterministic_scale.ln();
        self.ln_a
            .iter()
            .map(|&la| {
                let x = la / ln_b;
                (x, looks_rational(x))
            })
            .collect()
    }

    /// True when every ratio `log a_i / log b` looks irrational.
    pub fn irrational(&self) -> bool {
        self.irrationality().iter().all(|(_, r)| r.is_none())
    }

    /// Uniform grid in `s = ln t` over one period `[-β, β)`.
    pub fn t_log_grid(&self, count: usize) -> Vec<f64> {
        t_log_grid(self.beta, count)
    }
}

pub fn t_log_grid(beta: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (-beta + 2.0 * beta * k as f64 / count as f64).exp())
        .collect()
}

impl FiberDynamics for ConvolutionScheme {
    fn symbols_per_step(&self) -> usize {
        self.r
    }

    fn advance(&self, fiber: f64, block: &[usize]) -> f64 {
        beta_add(fiber, self.alpha(block), self.beta)
    }

    fn in_range(&self, fiber: f64) -> bool {
        (-self.beta..self.beta).contains(&fiber)
    }
}

fn check_prefix(scheme: &ConvolutionScheme, omega: &OmegaSequence, n: usize) -> Result<()> {
    if scheme.r * n > omega.len() {
        return Err(Error::PrefixExhausted {
            needed: scheme.r * n,
            available: omega.len(),
        });
    }
    if omega.symbols().iter().any(|&s| s >= scheme.random_scales.len()) {
        return Err(Error::InvalidInput("symbol outside the random scales".into()));
    }
    Ok(())
}

/// Fiber orbit from 0 with crossing counts: `(R^n(ω,0), ξ_n, Σ_{k≤n} α_k)`.
fn crossing_orbit(scheme: &ConvolutionScheme, omega: &OmegaSequence, n: usize) -> Result<(f64, usize, f64)> {
    check_prefix(scheme, omega, n)?;
    let mut fiber = 0.0;
    let mut xi = 0;
    let mut alpha_sum = 0.0;
    for block in omega.symbols()[..scheme.r * n].chunks(scheme.r) {
        let a = scheme.alpha(block);
        alpha_sum += a;
        if fiber + a >= scheme.beta {
            xi += 1;
        }
        fiber = beta_add(fiber, a, scheme.beta);
        assert!(scheme.in_range(fiber));
    }
    Ok((fiber, xi, alpha_sum))
}

/// `ξ_n`: how many of the first `n` steps wrap around the β-circle. Step `k`
/// wraps when `R^{k-1}(ω,0)` plus the `k`-th block's `α` reaches `β`.
pub fn crossing_count(scheme: &ConvolutionScheme, omega: &OmegaSequence, n: usize) -> Result<usize> {
    Ok(crossing_orbit(scheme, omega, n)?.1)
}

/// `R^n(ω, 0)`.
pub fn fiber_after(scheme: &ConvolutionScheme, omega: &OmegaSequence, n: usize) -> Result<f64> {
    Ok(crossing_orbit(scheme, omega, n)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    W,
    Y,
    Z,
}

/// Word lengths and rectangle sizes of one family at step `n`. Sizes are
/// kept as natural logs since they underflow quickly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyShape {
    pub family: Family,
    pub n: usize,
    pub crossing_count: usize,
    pub random_word_len: usize,
    pub deterministic_word_len: usize,
    /// `ln Π a` over the `rn` random symbols.
    pub ln_width: f64,
    /// `ln b^{deterministic_word_len}`.
    pub ln_height: f64,
    /// `ln(height / width)`.
    pub ln_eccentricity: f64,
    /// `R^n(ω, 0)`, shifted by `∓2β` for Y and Z.
    pub predicted_ln_eccentricity: f64,
}

pub fn family_rectangles(scheme: &ConvolutionScheme, omega: &OmegaSequence, n: usize, which: Family) -> Result<FamilyShape> {
    let (fiber, xi, _) = crossing_orbit(scheme, omega, n)?;
    let base = n + 2 * scheme.l * xi;
    let (len, predicted) = match which {
        Family::W => (base, fiber),
        Family::Y => (base + 2 * scheme.l, fiber - 2.0 * scheme.beta),
        Family::Z => {
            if n < 3 * scheme.l {
                return Err(Error::Precondition(format!(
                    "the Z family needs n ≥ 3l = {}, got n = {n}",
                    3 * scheme.l
                )));
            }
            (base - 2 * scheme.l, fiber + 2.0 * scheme.beta)
        }
    };
    let ln_width: f64 = omega.symbols()[..scheme.r * n].iter().map(|&i| scheme.ln_a[i]).sum();
    let ln_height = len as f64 * scheme.deterministic_scale.ln();
    Ok(FamilyShape {
        family: which,
        n,
        crossing_count: xi,
        random_word_len: scheme.r * n,
        deterministic_word_len: len,
        ln_width,
        ln_height,
        ln_eccentricity: ln_height - ln_width,
        predicted_ln_eccentricity: predicted,
    })
}

/// `min(D_q(ν) + D_q(ϑ), 1)`, flagged when `log a / log b` looks rational
/// (the formula is then not covered by the theorem).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Additivity {
    pub value: f64,
    pub theorem_backed: bool,
}

pub fn additivity_formula(nu_dim: f64, theta_dim: f64, scheme: Option<&ConvolutionScheme>) -> Additivity {
    Additivity {
        value: (nu_dim + theta_dim).min(1.0),
        theorem_backed: scheme.is_none_or(|s| s.irrational()),
    }
}

/// Dimension estimate of the convolution at one scaling `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub t: f64,
    pub curve: SpectrumCurve,
    pub closed_form: Option<f64>,
}

impl SweepPoint {
    pub fn abs_err(&self) -> Option<f64> {
        self.closed_form.map(|c| (self.curve.dimension - c).abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub const CSV_HEADER: &'static str = "t,q,dimension,residual,closed_form,abs_err";

    /// Largest dimension minus smallest over the grid.
    pub fn spread(&self) -> f64 {
        let dims = self.points.iter().map(|p| p.curve.dimension);
        let hi = dims.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = dims.fold(f64::INFINITY, f64::min);
        hi - lo
    }

    pub fn max_abs_err(&self) -> Option<f64> {
        self.points.iter().map(|p| p.abs_err()).try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
    }

    pub fn min_dimension(&self) -> f64 {
        self.points.iter().map(|p| p.curve.dimension).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            let (cf, err) = match (p.closed_form, p.abs_err()) {
                (Some(c), Some(e)) => (format!("{c:.12}"), format!("{e:.12}")),
                _ => (String::new(), String::new()),
            };
            let _ = writeln!(
                s,
                "{:.12},{},{:.12},{:.12},{},{}",
                p.t, p.curve.q, p.curve.dimension, p.curve.residual, cf, err
            );
        }
        s
    }
}

/// For each `t`: convolve `ν` and `A_t ϑ` at the window's finest level, then
/// fit `log₂ C^q` over the window by coarsening. `ν` and `ϑ` should be built
/// a few levels finer than the window top: pairing cell centers at the window
/// top itself biases the finest sums.
pub fn convolution_dimension_sweep(
    nu: &DyadicMeasure,
    theta: &DyadicMeasure,
    q: f64,
    t_grid: &[f64],
    window: (u32, u32),
    closed_form: Option<f64>,
) -> Result<Sweep> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    let points = t_grid
        .par_iter()
        .map(|&t| {
            let conv = convolve_measures(nu, theta, t, window.1)?;
            let levels: Vec<u32> = (window.0..=window.1).collect();
            let sums = levels
                .iter()
                .map(|&l| correlation_sum(&conv.coarsen(l)?, q).map(f64::log2))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepPoint {
                t,
                curve: SpectrumCurve::from_log_sums(q, levels, sums, AmbientDim::One)?,
                closed_form,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::sample_omega;

    #[test]
    fn scheme_examples() {
        let s = select_scheme(&[0.25], 1.0 / 3.0).unwrap();
        assert_eq!((s.r(), s.l()), (1, 1));
        assert!((s.beta() - 1.098612).abs() < 1e-6);
        assert!((s.alpha(&[0]) - 0.287682).abs() < 1e-6);
        assert!(s.constraints_hold());
        assert!(s.irrational());

        let s = select_scheme(&[0.5], 0.4).unwrap();
        assert_eq!((s.r(), s.l()), (2, 1));
        assert!((s.beta() - 2.5f64.ln()).abs() < 1e-12);
        assert!(s.constraints_hold());

        let s = select_scheme(&[1.0 / 3.0], 1.0 / 3.0).unwrap();
        assert_eq!(s.r(), 2);
        assert!(!s.irrational());
        assert!(select_scheme(&[1.5], 0.5).is_err());
    }

    #[test]
    fn crossing_examples() {
        let s = select_scheme(&[0.25], 1.0 / 3.0).unwrap();
        let om = OmegaSequence::constant(0, 100, 1);
        assert_eq!(crossing_count(&s, &om, 3).unwrap(), 0);
        assert_eq!(crossing_count(&s, &om, 4).unwrap(), 1);
        assert!((fiber_after(&s, &om, 4).unwrap() + 1.046497).abs() < 1e-6);
        assert!(crossing_count(&s, &om, 101).is_err());
    }

    #[test]
    fn family_examples() {
        let s = select_scheme(&[0.25], 1.0 / 3.0).unwrap();
        let om = OmegaSequence::constant(0, 100, 1);
        let w = family_rectangles(&s, &om, 4, Family::W).unwrap();
        let y = family_rectangles(&s, &om, 4, Family::Y).unwrap();
        let z = family_rectangles(&s, &om, 4, Family::Z).unwrap();
        assert_eq!((w.deterministic_word_len, y.deterministic_word_len, z.deterministic_word_len), (6, 8, 4));
        let w2 = family_rectangles(&s, &om, 2, Family::W).unwrap();
        assert_eq!(w2.deterministic_word_len, 2);
        assert!(family_rectangles(&s, &om, 2, Family::Z).is_err());
    }

    #[test]
    fn eccentricity_stays_in_period() {
        let s = select_scheme(&[0.25, 0.2], 1.0 / 3.0).unwrap();
        let om = sample_omega(&[0.5, 0.5], 1000 * s.r(), 4).unwrap();
        for n in 1..=1000 {
            let w = family_rectangles(&s, &om, n, Family::W).unwrap();
            assert!((w.ln_eccentricity - w.predicted_ln_eccentricity).abs() < 1e-9);
            assert!(w.ln_eccentricity >= -s.beta() - 1e-9 && w.ln_eccentricity < s.beta() + 1e-9);
        }
    }

    #[test]
    fn additivity_examples() {
        assert_eq!(additivity_formula(0.5, 0.63093, None).value, 1.0);
        assert!((additivity_formula(0.12331, 0.63093, None).value - 0.75424).abs() < 1e-12);
        assert_eq!(additivity_formula(0.4, 0.0, None).value, 0.4);
        let rational = select_scheme(&[1.0 / 9.0], 1.0 / 3.0).unwrap();
        assert!(!additivity_formula(0.3, 0.3, Some(&rational)).theorem_backed);
    }

    #[test]
    fn log_grid_covers_one_period() {
        let g = t_log_grid(2f64.ln(), 4);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 0.5).abs() < 1e-12);
        assert!(g.iter().all(|&t| (0.5..2.0).contains(&t)));
    }
}
