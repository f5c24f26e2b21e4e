//! The projection cocycle `τ_{q,n}`, its smoothed version `τ̄_{q,n}`, the
//! planar moment sums `ξ_n`, their exact inequalities, and the Monte Carlo
//! estimate of the cocycle constant `Φ`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::builder::{project_point, sample_omega, sample_omega_balanced, OmegaSequence, WordTree};
use crate::dynamics::{direction_of_fiber, lyapunov_constant, normalization_level, skew_step, CircleRotation, SkewState};
use crate::error::{Error, Result};
use crate::ifs::{AmbientDim, RuleSet};
use crate::measure::{cell_index, cell_of, DyadicMeasure};
use crate::numeric::{least_squares, mass_pow};
use crate::spectrum::correlation_sum;

/// Smoothstep bump: 1 on `[-1, 1]`, 0 outside `(-2, 2)`, `3t² - 2t³` with
/// `t = 2 - |x|` in between. Continuously differentiable.
pub fn psi(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let t = 2.0 - a;
        t * t * (3.0 - 2.0 * t)
    }
}

/// Multiplicative constant of the cocycle inequality, `(54K)^q`.
pub fn cocycle_constant(q: f64, k: f64) -> f64 {
    (54.0 * k).powf(q)
}

/// Constant used for the planar moment sums, `(1296K)^q`: the planar analogue
/// of `54`, with `81 = 9²` neighbouring squares in place of 9 intervals and
/// a factor 16 for rotated squares meeting dyadic ones.
pub fn planar_cocycle_constant(q: f64, k: f64) -> f64 {
    (1296.0 * k).powf(q)
}

/// Upper constant of `τ ≤ τ̄ ≤ 5^{q-1} τ`.
pub fn smoothing_constant(q: f64) -> f64 {
    5f64.powf(q - 1.0)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    Ok(())
}

/// Discretization settings shared by every cocycle evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[derive(Default)]
pub struct CocycleConfig {
    /// Cylinders of depth `n + extra_depth` stand in for `η^{(ω)}` at step `n`.
    pub extra_depth: usize,
}


/// `τ_{q,n}` and `τ̄_{q,n}` at one point `(ω, fiber)` of the skew product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleSample {
    pub omega_offset: usize,
    pub fiber: f64,
    pub n: usize,
    pub q: f64,
    pub level: u32,
    pub tau: f64,
    pub tau_smooth: f64,
}

fn require_planar(rs: &RuleSet) -> Result<()> {
    if rs.ambient_dim() != AmbientDim::Two {
        return Err(Error::InvalidInput("the projection cocycle needs a planar rule set".into()));
    }
    Ok(())
}

/// Projected cylinder centers of depth `depth`, sorted by coordinate.
fn projected_points(rs: &RuleSet, omega: &OmegaSequence, depth: usize, v: [f64; 2]) -> Result<Vec<(f64, f64)>> {
    let tree = WordTree::new(rs, omega, depth)?;
    let mut pts: Vec<(f64, f64)> = tree
        .points()
        .into_iter()
        .map(|(p, m)| (project_point(p, v), m))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

/// Both moment sums of the discrete measure `Σ m_i δ_{x_i}` on level-`L` cells.
///
/// `τ̄ = Σ_y m_y (Σ_x m_x ψ(2^L (x - y)))^{q-1}`. Points sharing a cell are
/// closer than one cell width, so they contribute their full mass `M_I`;
/// the sum is evaluated as `Σ_I [M_I^q + Σ_{y∈I} m_y (S_y^{q-1} - M_I^{q-1})]`
/// with `S_y = M_I + (neighbour terms)`, in the same cell order as `τ`. Every
/// bracket is a nonnegative increment, so `τ ≤ τ̄` survives rounding.
pub fn moment_pair(points_sorted: &[(f64, f64)], level: u32, q: f64) -> Result<(f64, f64)> {
    check_q(q)?;
    if points_sorted.is_empty() {
        return Err(Error::InvalidInput("empty measure".into()));
    }
    let scale = (level as f64).exp2();
    let cells: Vec<i64> = points_sorted.iter().map(|p| cell_index(p.0, level)).collect();
    let measure = DyadicMeasure::from_entries(
        level,
        AmbientDim::One,
        cells.iter().zip(points_sorted).map(|(&c, p)| ([c, 0], p.1)).collect(),
    )?;
    let tau = correlation_sum(&measure, q)?;
    let coarse = measure.cells();
    let mut tau_smooth = 0.0;
    let mut start = 0;
    for &([c, _], big_m) in coarse {
        // points are sorted, so the points of cell c are contiguous
        while cells[start] < c {
            start += 1;
        }
        let mut end = start;
        while end < cells.len() && cells[end] == c {
            end += 1;
        }
        let base = big_m.powf(q - 1.0);
        let mut extra = 0.0;
        for i in start..end {
            let (y, my) = points_sorted[i];
            let mut neighbours = 0.0;
            let mut j = start;
            while j > 0 {
                j -= 1;
                let d = (points_sorted[j].0 - y) * scale;
                if d <= -2.0 {
                    break;
                }
                neighbours += points_sorted[j].1 * psi(d);
            }
            for &(x, mx) in &points_sorted[end..] {
                let d = (x - y) * scale;
                if d >= 2.0 {
                    break;
                }
                neighbours += mx * psi(d);
            }
            let s = big_m + neighbours;
            extra += my * (s.powf(q - 1.0) - base);
        }
        tau_smooth += mass_pow(big_m, q) + extra;
        start = end;
    }
    Ok((tau, tau_smooth))
}

fn depth_for(rs: &RuleSet, omega: &OmegaSequence, n: usize, cfg: &CocycleConfig) -> Result<usize> {
    let depth = n + cfg.extra_depth;
    if depth > omega.len() {
        return Err(Error::PrefixExhausted {
            needed: depth,
            available: omega.len(),
        });
    }
    omega.check_rules(rs)?;
    Ok(depth)
}

/// `τ_{q,n}(ω, s)` and `τ̄_{q,n}(ω, s)` for the direction `e^{-is}`; `n = 0` gives `τ_0 = τ̄_0 = 1`.
pub fn cocycle_sample(
    rs: &RuleSet,
    omega: &OmegaSequence,
    fiber: f64,
    n: usize,
    q: f64,
    cfg: &CocycleConfig,
) -> Result<CocycleSample> {
    require_planar(rs)?;
    check_q(q)?;
    let (level, tau, tau_smooth) = if n == 0 {
        (0, 1.0, 1.0)
    } else {
        let depth = depth_for(rs, omega, n, cfg)?;
        let level = normalization_level(rs, omega, n)?;
        let pts = projected_points(rs, omega, depth, direction_of_fiber(fiber))?;
        let (t, ts) = moment_pair(&pts, level, q)?;
        (level, t, ts)
    };
    Ok(CocycleSample {
        omega_offset: 0,
        fiber,
        n,
        q,
        level,
        tau,
        tau_smooth,
    })
}

pub fn tau(rs: &RuleSet, omega: &OmegaSequence, fiber: f64, n: usize, q: f64) -> Result<f64> {
    Ok(cocycle_sample(rs, omega, fiber, n, q, &CocycleConfig::default())?.tau)
}

pub fn tau_smooth(rs: &RuleSet, omega: &OmegaSequence, fiber: f64, n: usize, q: f64) -> Result<f64> {
    Ok(cocycle_sample(rs, omega, fiber, n, q, &CocycleConfig::default())?.tau_smooth)
}

/// Both sides of `τ_{n+m}(ω,s) ≤ (54K)^q τ_n(ω,s) τ_m(S^n(ω,s))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubmultiplicativeCheck {
    pub n: usize,
    pub m: usize,
    pub fiber: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn check_submultiplicative(
    rs: &RuleSet,
    omega: &OmegaSequence,
    fiber: f64,
    n: usize,
    m: usize,
    q: f64,
    k: f64,
    cfg: &CocycleConfig,
) -> Result<SubmultiplicativeCheck> {
    if !(k >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition constant K = {k} must be at least 1")));
    }
    let whole = cocycle_sample(rs, omega, fiber, n + m, q, cfg)?;
    let first = cocycle_sample(rs, omega, fiber, n, q, cfg)?;
    let moved = skew_step(&CircleRotation::new(rs), omega, SkewState::new(fiber), n)?;
    let shifted = omega.shift(n)?;
    let second = cocycle_sample(rs, &shifted, moved.fiber, m, q, cfg)?;
    let lhs = whole.tau;
    let rhs = cocycle_constant(q, k) * first.tau * second.tau;
    Ok(SubmultiplicativeCheck {
        n,
        m,
        fiber,
        lhs,
        rhs,
        pass: lhs <= rhs,
    })
}

/// `τ ≤ τ̄ ≤ 5^{q-1} τ` at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceCheck {
    pub tau: f64,
    pub tau_smooth: f64,
    /// `τ̄ / τ`.
    pub ratio: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn check_equivalence(
    rs: &RuleSet,
    omega: &OmegaSequence,
    fiber: f64,
    n: usize,
    q: f64,
    cfg: &CocycleConfig,
) -> Result<EquivalenceCheck> {
    let s = cocycle_sample(rs, omega, fiber, n, q, cfg)?;
    Ok(equivalence_of(&s))
}

pub fn equivalence_of(s: &CocycleSample) -> EquivalenceCheck {
    let upper = smoothing_constant(s.q);
    EquivalenceCheck {
        tau: s.tau,
        tau_smooth: s.tau_smooth,
        ratio: s.tau_smooth / s.tau,
        upper,
        pass: s.tau <= s.tau_smooth && s.tau_smooth <= upper * s.tau,
    }
}

/// `ξ_n(ω) = Σ_{Q} η^{(ω)}(Q)^q` over dyadic squares of level `L_n`.
pub fn xi_planar(rs: &RuleSet, omega: &OmegaSequence, n: usize, q: f64, cfg: &CocycleConfig) -> Result<f64> {
    require_planar(rs)?;
    check_q(q)?;
    if n == 0 {
        return Ok(1.0);
    }
    let depth = depth_for(rs, omega, n, cfg)?;
    let level = normalization_level(rs, omega, n)?;
    let tree = WordTree::new(rs, omega, depth)?;
    let m = DyadicMeasure::from_entries(level, AmbientDim::Two, tree.deposit(|p| cell_of(p, level, AmbientDim::Two)))?;
    correlation_sum(&m, q)
}

/// Both sides of `ξ_{n+m}(ω) ≤ (1296K)^q ξ_n(ω) ξ_m(T^n ω)`.
pub fn check_xi_submultiplicative(
    rs: &RuleSet,
    omega: &OmegaSequence,
    n: usize,
    m: usize,
    q: f64,
    cfg: &CocycleConfig,
) -> Result<(f64, f64, bool)> {
    let lhs = xi_planar(rs, omega, n + m, q, cfg)?;
    let rhs = planar_cocycle_constant(q, 1.0) * xi_planar(rs, omega, n, q, cfg)? * xi_planar(rs, &omega.shift(n)?, m, q, cfg)?;
    Ok((lhs, rhs, lhs <= rhs))
}

/// How the rule sequences of the Monte Carlo samples are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OmegaSampling {
    Iid,
    /// Exact symbol counts inside consecutive blocks of the given length.
    Balanced { block: usize },
}

pub fn draw_omega(weights: &[f64], length: usize, seed: u64, sampling: OmegaSampling) -> Result<OmegaSequence> {
    match sampling {
        OmegaSampling::Iid => sample_omega(weights, length, seed),
        OmegaSampling::Balanced { block } => sample_omega_balanced(weights, length, seed, block),
    }
}

/// One row of the Φ estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiRow {
    pub n: usize,
    /// Sample mean of `φ_n = log₂(5^{q-1} K₁ τ̄_n)`.
    pub avg_phi: f64,
    pub phi_over_n: f64,
    pub running_inf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiEstimate {
    pub q: f64,
    pub rows: Vec<PhiRow>,
    /// `inf_n (1/n) ∫ φ_n`, estimated.
    pub infimum: f64,
    /// `Σ r_i log₂ λ_i`.
    pub lyapunov: f64,
    /// `infimum / ((q-1) μ*)`.
    pub dimension_from_infimum: f64,
    /// Regression slope of the mean `φ_n` against `n`, divided by `(q-1) μ*`.
    /// The constant `log₂(5^{q-1} K₁)` inflates `φ_n / n` by `O(1/n)`; the
    /// slope removes it. `NaN` with fewer than two values of `n`.
    pub dimension: f64,
}

impl PhiEstimate {
    pub const CSV_HEADER: &'static str = "n,avg_phi,phi_over_n,running_inf";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.12},{:.12},{:.12}", r.n, r.avg_phi, r.phi_over_n, r.running_inf);
        }
        s
    }
}

/// Settings of the Φ estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiConfig {
    pub samples: usize,
    pub seed: u64,
    /// Condition (c) constant `K` of the cylinder masses.
    pub k: f64,
    pub sampling: OmegaSampling,
    pub cocycle: CocycleConfig,
}

/// Monte Carlo average of `φ_n` over `(ω, s)` drawn from `μ × Lebesgue`.
pub fn estimate_phi(rs: &RuleSet, weights: &[f64], q: f64, n_list: &[usize], cfg: &PhiConfig) -> Result<PhiEstimate> {
    require_planar(rs)?;
    check_q(q)?;
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("empty list of steps".into()));
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let lyapunov = lyapunov_constant(rs, weights)?;
    let n_max = *n_list.iter().max().unwrap_or(&1);
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<(u64, f64)> = (0..cfg.samples).map(|_| (master.gen(), master.gen::<f64>() * TAU)).collect();
    let offset = (smoothing_constant(q) * cocycle_constant(q, cfg.k)).log2();
    let per_sample: Vec<Vec<f64>> = draws
        .par_iter()
        .map(|&(seed, fiber)| {
            let omega = draw_omega(weights, n_max + cfg.cocycle.extra_depth, seed, cfg.sampling)?;
            n_list
                .iter()
                .map(|&n| Ok(offset + cocycle_sample(rs, &omega, fiber, n, q, &cfg.cocycle)?.tau_smooth.log2()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n_list.len());
    let mut running = f64::INFINITY;
    for (idx, &n) in n_list.iter().enumerate() {
        let avg = per_sample.iter().map(|v| v[idx]).sum::<f64>() / cfg.samples as f64;
        running = running.min(avg / n as f64);
        rows.push(PhiRow {
            n,
            avg_phi: avg,
            phi_over_n: avg / n as f64,
            running_inf: running,
        });
    }
    let norm = (q - 1.0) * lyapunov;
    let dimension = if n_list.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.avg_phi).collect();
        least_squares(&x, &y).slope / norm
    } else {
        f64::NAN
    };
    Ok(PhiEstimate {
        q,
        rows,
        infimum: running,
        lyapunov,
        dimension_from_infimum: running / norm,
        dimension,
    })
}

pub const CHECK_CSV_HEADER: &str = "n,m,fiber,lhs,rhs,pass";

pub fn checks_to_csv(checks: &[SubmultiplicativeCheck]) -> String {
    let mut s = format!("{CHECK_CSV_HEADER}\n");
    for c in checks {
        let _ = writeln!(s, "{},{},{:.12},{:.12e},{:.12e},{}", c.n, c.m, c.fiber, c.lhs, c.rhs, c.pass);
    }
    s
}
