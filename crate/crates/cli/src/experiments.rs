//! Computations shared by the subcommands and the scenario runner. Each
//! returns in-memory results; nothing here writes files.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use anyhow::{bail, Result};
use lqdim::cocycle::{
    check_equivalence, check_submultiplicative, draw_omega, estimate_phi, CocycleConfig, EquivalenceCheck,
    OmegaSampling, PhiConfig, PhiEstimate, SubmultiplicativeCheck,
};
use lqdim::convolution::{convolution_dimension_sweep, select_scheme, Sweep};
use lqdim::decomposition::decompose_self_similar;
use lqdim::dynamics::{fiber_orbit, lyapunov_constant, CircleRotation, SkewState};
use lqdim::formulas::{dq_formula_for, dq_limit_entropy, hausdorff_formula, projection_hausdorff_lower_bound};
use lqdim::ifs::check_strong_separation;
use lqdim::spectrum::{estimate_from_finest, holder_check, SpectrumCurve};
use lqdim::{build_measure, depth_for_level, project_measure, DyadicMeasure, OmegaSequence, RuleSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// An exact inequality failed; the run exits with status 2.
#[derive(Debug)]
pub struct AssertionFailed(pub String);

impl fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

pub fn check_q_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.is_empty() {
        bail!("empty q grid");
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q > 1.0 && q.is_finite())) {
        bail!("q = {q} must exceed 1");
    }
    Ok(())
}

pub fn check_window(window: (u32, u32)) -> Result<()> {
    if window.0 + 2 > window.1 {
        bail!("level window {window:?} must contain at least 3 levels");
    }
    if window.1 > lqdim::measure::MAX_LEVEL {
        bail!("level {} exceeds the maximum {}", window.1, lqdim::measure::MAX_LEVEL);
    }
    Ok(())
}

/// The measure `η^{(ω)}` discretized at `level` from cylinders matched to that level.
pub fn build_fine(rs: &RuleSet, omega: &OmegaSequence, level: u32) -> Result<DyadicMeasure> {
    let depth = depth_for_level(rs, omega, level)?;
    Ok(build_measure(rs, omega, depth, level)?)
}

pub fn spectrum(m: &DyadicMeasure, q_grid: &[f64], window: (u32, u32)) -> Result<Vec<SpectrumCurve>> {
    q_grid
        .iter()
        .map(|&q| Ok(estimate_from_finest(m, q, window)?))
        .collect()
}

pub fn spectrum_csv(curves: &[SpectrumCurve]) -> String {
    let mut s = format!("{}\n", SpectrumCurve::CSV_HEADER);
    for c in curves {
        s.push_str(&c.csv_rows());
    }
    s
}

/// Levels of the window (coarsened from `m`) at which the Hölder box bound fails.
pub fn holder_failures(m: &DyadicMeasure, q_grid: &[f64], window: (u32, u32)) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for level in window.0..=window.1.min(m.level()) {
        let coarse = m.coarsen(level)?;
        for &q in q_grid {
            let h = holder_check(&coarse, q)?;
            if !h.pass {
                out.push(format!("level {level}, q {q}: {} boxes < bound {}", h.count, h.bound));
            }
        }
    }
    Ok(out)
}

/// `count` directions `(cos θ, sin θ)`, `θ = πk/count`.
pub fn direction_grid(count: usize) -> Vec<(f64, [f64; 2])> {
    (0..count)
        .map(|k| {
            let th = PI * k as f64 / count as f64;
            (th, [th.cos(), th.sin()])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionRow {
    pub index: usize,
    pub angle: f64,
    pub q: f64,
    pub dimension: f64,
    pub residual: f64,
}

pub const DIRECTIONS_HEADER: &str = "index,angle,q,dimension,residual";

pub fn sweep_directions(
    rs: &RuleSet,
    omega: &OmegaSequence,
    count: usize,
    q_grid: &[f64],
    window: (u32, u32),
    level: u32,
) -> Result<Vec<DirectionRow>> {
    if count == 0 {
        bail!("direction count must be positive");
    }
    let depth = depth_for_level(rs, omega, level)?;
    let per_direction: Vec<Vec<DirectionRow>> = direction_grid(count)
        .into_par_iter()
        .enumerate()
        .map(|(index, (angle, v))| {
            let m = project_measure(rs, omega, v, depth, level)?;
            q_grid
                .iter()
                .map(|&q| {
                    let c = estimate_from_finest(&m, q, window)?;
                    Ok(DirectionRow {
                        index,
                        angle,
                        q,
                        dimension: c.dimension,
                        residual: c.residual,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_direction.into_iter().flatten().collect())
}

pub fn directions_csv(rows: &[DirectionRow]) -> String {
    let mut s = format!("{DIRECTIONS_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.12},{},{:.12},{:.12}", r.index, r.angle, r.q, r.dimension, r.residual);
    }
    s
}

pub const SUMMARY_HEADER: &str = "q,min,max,spread,max_abs_err";

/// Per `q`: the range of the dimensions and, with a closed form, the largest deviation from it.
pub fn summary_rows(dims: &[(f64, f64)], q_grid: &[f64], closed_form: Option<f64>) -> String {
    let mut s = String::new();
    for &q in q_grid {
        let d: Vec<f64> = dims.iter().filter(|x| x.0 == q).map(|x| x.1).collect();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let err = closed_form
            .map(|c| format!("{:.12}", d.iter().map(|x| (x - c).abs()).fold(0.0, f64::max)))
            .unwrap_or_default();
        let _ = writeln!(s, "{q},{lo:.12},{hi:.12},{:.12},{err}", hi - lo);
    }
    s
}

/// `ν * A_t ϑ` dimension sweeps, one per `q`. `ν` follows `omega`; `ϑ` must be a single rule.
#[allow(clippy::too_many_arguments)]
pub fn convolution_sweeps(
    nu_rs: &RuleSet,
    omega: &OmegaSequence,
    theta_rs: &RuleSet,
    q_grid: &[f64],
    t_grid: Option<&[f64]>,
    t_count: usize,
    window: (u32, u32),
    input_level: u32,
    closed_form: Option<f64>,
) -> Result<Vec<Sweep>> {
    if theta_rs.len() != 1 {
        bail!("the deterministic factor needs exactly one rule, got {}", theta_rs.len());
    }
    let scheme = select_scheme(&nu_rs.scales(), theta_rs.rule(0).scale())?;
    let grid = match t_grid {
        Some(g) => g.to_vec(),
        None => scheme.t_log_grid(t_count),
    };
    let nu = build_fine(nu_rs, omega, input_level)?;
    let theta_omega = OmegaSequence::constant(0, omega.len().max(8) * 4, 1);
    let theta = build_fine(theta_rs, &theta_omega, input_level)?;
    q_grid
        .iter()
        .map(|&q| Ok(convolution_dimension_sweep(&nu, &theta, q, &grid, window, closed_form)?))
        .collect()
}

pub fn sweeps_csv(sweeps: &[Sweep]) -> String {
    let mut s = format!("{}\n", Sweep::CSV_HEADER);
    for sw in sweeps {
        s.extend(sw.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub struct CheckParams {
    pub instances: usize,
    pub n_max: usize,
    pub k: f64,
    pub seed: u64,
    pub sampling: OmegaSampling,
}

pub struct CheckResults {
    pub submultiplicative: Vec<SubmultiplicativeCheck>,
    pub equivalence: Vec<(usize, f64, f64, EquivalenceCheck)>,
}

impl CheckResults {
    pub fn failures(&self) -> usize {
        self.submultiplicative.iter().filter(|c| !c.pass).count()
            + self.equivalence.iter().filter(|e| !e.3.pass).count()
    }
}

pub const EQUIVALENCE_HEADER: &str = "n,fiber,q,tau,tau_smooth,ratio,upper,pass";

/// Random instances `(ω, s, n, m, q)` of `τ_{n+m} ≤ (54K)^q τ_n τ_m∘S^n` and `τ ≤ τ̄ ≤ 5^{q-1} τ`.
pub fn cocycle_checks(rs: &RuleSet, weights: &[f64], q_grid: &[f64], p: &CheckParams) -> Result<CheckResults> {
    if p.n_max == 0 || p.instances == 0 {
        bail!("cocycle checks need positive n_max and instance count");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let draws: Vec<(u64, f64, usize, usize, f64)> = (0..p.instances)
        .map(|i| {
            (
                rng.gen(),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(1..=p.n_max),
                rng.gen_range(1..=p.n_max),
                q_grid[i % q_grid.len()],
            )
        })
        .collect();
    let cfg = CocycleConfig::default();
    let rows: Vec<(SubmultiplicativeCheck, (usize, f64, f64, EquivalenceCheck))> = draws
        .par_iter()
        .map(|&(seed, fiber, n, m, q)| {
            let omega = if rs.len() == 1 {
                OmegaSequence::constant(0, 2 * p.n_max, 1)
            } else {
                draw_omega(weights, 2 * p.n_max, seed, p.sampling)?
            };
            let sub = check_submultiplicative(rs, &omega, fiber, n, m, q, p.k, &cfg)?;
            let eq = check_equivalence(rs, &omega, fiber, n + m, q, &cfg)?;
            Ok((sub, (n + m, fiber, q, eq)))
        })
        .collect::<Result<_>>()?;
    let (submultiplicative, equivalence) = rows.into_iter().unzip();
    Ok(CheckResults {
        submultiplicative,
        equivalence,
    })
}

pub fn equivalence_csv(rows: &[(usize, f64, f64, EquivalenceCheck)]) -> String {
    let mut s = format!("{EQUIVALENCE_HEADER}\n");
    for (n, fiber, q, e) in rows {
        let _ = writeln!(
            s,
            "{n},{fiber:.12},{q},{:.16e},{:.16e},{:.12},{:.12},{}",
            e.tau, e.tau_smooth, e.ratio, e.upper, e.pass
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub fn phi(rs: &RuleSet, weights: &[f64], q: f64, steps: &[usize], samples: usize, seed: u64, k: f64, sampling: OmegaSampling) -> Result<PhiEstimate> {
    let cfg = PhiConfig {
        samples,
        seed,
        k,
        sampling,
        cocycle: CocycleConfig::default(),
    };
    Ok(estimate_phi(rs, weights, q, steps, &cfg)?)
}

/// `name,value` rows of the closed forms that apply to the rule set.
pub fn formula_table(rs: &RuleSet, weights: &[f64], q_grid: &[f64], block_len: Option<usize>) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    rows.push(("lyapunov_log2".to_string(), lyapunov_constant(rs, weights)?));
    rows.push((
        "strongly_separated".to_string(),
        f64::from(u8::from(check_strong_separation(rs).iter().all(|&b| b))),
    ));
    for &q in q_grid {
        rows.push((format!("dq_formula_q{q}"), dq_formula_for(rs, weights, q)?));
    }
    let probs: Vec<Vec<f64>> = rs.rules().iter().map(|r| r.probs().to_vec()).collect();
    rows.push(("dq_limit_entropy".to_string(), dq_limit_entropy(&probs, &rs.scales(), weights)?));
    if rs.len() == 1 {
        let rule = rs.rule(0);
        let scales = vec![rule.scale(); rule.len()];
        rows.push(("hausdorff".to_string(), hausdorff_formula(rule.probs(), &scales)?));
        if let Some(l) = block_len {
            rows.push((
                format!("projection_lower_bound_l{l}"),
                projection_hausdorff_lower_bound(rule.probs(), &scales, l)?,
            ));
        }
    }
    Ok(rows)
}

pub fn formula_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("name,value\n");
    for (name, value) in rows {
        let _ = writeln!(s, "{name},{value}");
    }
    s
}

/// Pretty JSON of the block disintegration, checked against the entropy bound.
pub fn decomposition_json(pbar: &[f64], block_len: usize, max_words: usize) -> Result<(String, bool)> {
    let d = decompose_self_similar(pbar, block_len)?;
    let json = serde_json::to_string_pretty(&d.to_json(max_words)?)?;
    Ok((json + "\n", d.class_entropy() <= d.entropy_bound()))
}

pub fn orbit_csv(rs: &RuleSet, omega: &OmegaSequence, start: f64, steps: usize) -> Result<String> {
    let orbit = fiber_orbit(&CircleRotation::new(rs), omega, SkewState::new(start), steps)?;
    let mut s = String::from("step,fiber\n");
    for (i, f) in orbit.iter().enumerate() {
        let _ = writeln!(s, "{i},{f:.16e}");
    }
    Ok(s)
}
