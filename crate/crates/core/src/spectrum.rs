//! Dyadic correlation sums, L^q dimension estimates, box counts, the Hölder
//! box-count bound, M-equivalence of covers and discrete Riesz energies.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::AmbientDim;
use crate::measure::DyadicMeasure;
use crate::numeric::{least_squares, mass_pow};

/// Default moment exponents for sweeps.
pub const DEFAULT_Q_GRID: [f64; 4] = [1.25, 1.5, 1.75, 2.0];

fn check_q(q: f64) -> Result<()> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "q = {q}: moment sums need q > 1 (the q → 1 limit is the entropy formula)"
        )));
    }
    Ok(())
}

/// `C^q = Σ_I m(I)^q` over occupied cells, summed in ascending cell order.
pub fn correlation_sum(m: &DyadicMeasure, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(m.masses().map(|x| mass_pow(x, q)).sum())
}

/// Per-level `log₂ C^q` with the regression that turns it into a dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumCurve {
    pub q: f64,
    pub levels: Vec<u32>,
    pub log_cq: Vec<f64>,
    pub slope: f64,
    /// `slope / -(q-1)` clamped to `[0, ambient_dim]`.
    pub dimension: f64,
    /// `slope / -(q-1)` before clamping.
    pub raw_dimension: f64,
    /// Largest absolute regression residual.
    pub residual: f64,
}

impl SpectrumCurve {
    pub fn from_log_sums(q: f64, levels: Vec<u32>, log_cq: Vec<f64>, ambient_dim: AmbientDim) -> Result<Self> {
        check_q(q)?;
        if levels.len() != log_cq.len() {
            return Err(Error::InvalidInput("levels and sums differ in length".into()));
        }
        if levels.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a dimension fit needs at least 3 levels, got {}",
                levels.len()
            )));
        }
        let x: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        let fit = least_squares(&x, &log_cq);
        let raw_dimension = fit.slope / -(q - 1.0);
        Ok(SpectrumCurve {
            q,
            levels,
            log_cq,
            slope: fit.slope,
            dimension: raw_dimension.clamp(0.0, ambient_dim.as_usize() as f64),
            raw_dimension,
            residual: fit.max_residual,
        })
    }

    pub const CSV_HEADER: &'static str = "q,level,log2_cq,slope,dimension,residual";

    /// Rows `q,level,log2_cq,slope,dimension,residual`, one per level, no header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (l, c) in self.levels.iter().zip(&self.log_cq) {
            let _ = writeln!(
                s,
                "{},{},{:.12},{:.12},{:.12},{:.12}",
                self.q, l, c, self.slope, self.dimension, self.residual
            );
        }
        s
    }
}

fn check_window(window: (u32, u32)) -> Result<()> {
    if window.0 >= window.1 || window.1 - window.0 < 2 {
        return Err(Error::InvalidParameter(format!(
            "level window {window:?} must contain at least 3 levels"
        )));
    }
    Ok(())
}

/// Fits `log₂ C^q` against the level over `window` (inclusive), building the
/// measure at each level with `builder`.
pub fn estimate_dimension<F>(builder: F, q: f64, window: (u32, u32)) -> Result<SpectrumCurve>
where
    F: Fn(u32) -> Result<DyadicMeasure> + Sync,
{
    check_q(q)?;
    check_window(window)?;
    let levels: Vec<u32> = (window.0..=window.1).collect();
    let measures: Vec<DyadicMeasure> = levels.par_iter().map(|&l| builder(l)).collect::<Result<_>>()?;
    let dim = measures[0].dim();
    let log_cq = measures
        .iter()
        .map(|m| correlation_sum(m, q).map(f64::log2))
        .collect::<Result<Vec<_>>>()?;
    SpectrumCurve::from_log_sums(q, levels, log_cq, dim)
}

/// [`estimate_dimension`] for a single fine measure, coarsened to each level of the window.
pub fn estimate_from_finest(m: &DyadicMeasure, q: f64, window: (u32, u32)) -> Result<SpectrumCurve> {
    if window.1 > m.level() {
        return Err(Error::InvalidParameter(format!(
            "window top {} is finer than the measure level {}",
            window.1,
            m.level()
        )));
    }
    estimate_dimension(|l| m.coarsen(l), q, window)
}

/// One curve per `q`, sharing the coarsenings.
pub fn estimate_spectrum(m: &DyadicMeasure, q_grid: &[f64], window: (u32, u32)) -> Result<Vec<SpectrumCurve>> {
    check_window(window)?;
    if window.1 > m.level() {
        return Err(Error::InvalidParameter(format!(
            "window top {} is finer than the measure level {}",
            window.1,
            m.level()
        )));
    }
    let levels: Vec<u32> = (window.0..=window.1).collect();
    let coarse: Vec<DyadicMeasure> = levels.iter().map(|&l| m.coarsen(l)).collect::<Result<_>>()?;
    q_grid
        .iter()
        .map(|&q| {
            let sums = coarse
                .iter()
                .map(|c| correlation_sum(c, q).map(f64::log2))
                .collect::<Result<Vec<_>>>()?;
            SpectrumCurve::from_log_sums(q, levels.clone(), sums, m.dim())
        })
        .collect()
}

/// Number of occupied cells.
pub fn box_count(m: &DyadicMeasure) -> usize {
    m.len()
}

/// Lower bound on the number of occupied cells from Hölder's inequality:
/// `N ≥ (T^q / C^q)^{1/(q-1)}` with `T` the total mass. For probability
/// measures this is `(C^q)^{-q'/q}`.
pub fn holder_box_lower_bound(m: &DyadicMeasure, q: f64) -> Result<f64> {
    check_q(q)?;
    let total = m.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "Hölder bound needs a probability measure, total mass is {total}"
        )));
    }
    let c = correlation_sum(m, q)?;
    Ok((mass_pow(total, q) / c).powf(1.0 / (q - 1.0)))
}

/// Relative allowance for rounding in the bound's evaluation; the
/// inequality is tight (to the last bit) for uniform measures.
pub const HOLDER_ROUNDING: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderCheck {
    pub count: usize,
    pub bound: f64,
    pub pass: bool,
}

pub fn holder_check(m: &DyadicMeasure, q: f64) -> Result<HolderCheck> {
    let bound = holder_box_lower_bound(m, q)?;
    let count = box_count(m);
    Ok(HolderCheck {
        count,
        bound,
        pass: count as f64 >= bound * (1.0 - HOLDER_ROUNDING),
    })
}

/// Half-open box `[lo_x, hi_x) × [lo_y, hi_y)`; intervals use `[0, 1)` in `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Rect { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Rect {
            lo: [a, 0.0],
            hi: [b, 1.0],
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo[0] < self.hi[0] && self.lo[1] < self.hi[1])
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        (0..2).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| self.lo[k] <= p[k] && p[k] < self.hi[k])
    }

    fn clip(&self, w: &Rect) -> Rect {
        Rect {
            lo: [self.lo[0].max(w.lo[0]), self.lo[1].max(w.lo[1])],
            hi: [self.hi[0].min(w.hi[0]), self.hi[1].min(w.hi[1])],
        }
    }
}

/// Why two families are not M-equivalent on a window.
#[derive(Clone, Debug, PartialEq)]
pub enum EquivalenceFailure {
    /// An elementary box inside the window covered by one family but not the other.
    UnionMismatch { witness: Rect },
    Empty,
}

fn sorted_breaks(families: &[&[Rect]], w: &Rect, axis: usize) -> Vec<f64> {
    let mut v: Vec<f64> = vec![w.lo[axis], w.hi[axis]];
    for f in families {
        for r in f.iter() {
            let c = r.clip(w);
            if !c.is_empty() {
                v.push(c.lo[axis]);
                v.push(c.hi[axis]);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Smallest `M` such that the two families have the same union on `w` and
/// every member of either family meets at most `M` members of the other.
pub fn check_m_equivalence(p: &[Rect], p2: &[Rect], w: &Rect) -> std::result::Result<usize, EquivalenceFailure> {
    if p.is_empty() || p2.is_empty() || w.is_empty() {
        return Err(EquivalenceFailure::Empty);
    }
    let xs = sorted_breaks(&[p, p2], w, 0);
    let ys = sorted_breaks(&[p, p2], w, 1);
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let probe = [(xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0];
            let a = p.iter().any(|r| r.contains(probe));
            let b = p2.iter().any(|r| r.contains(probe));
            if a != b {
                return Err(EquivalenceFailure::UnionMismatch {
                    witness: Rect::new([xw[0], yw[0]], [xw[1], yw[1]]),
                });
            }
        }
    }
    let count = |a: &[Rect], b: &[Rect]| -> usize {
        a.iter()
            .map(|r| b.iter().filter(|s| r.intersects(s)).count())
            .max()
            .unwrap_or(0)
    };
    Ok(count(p, p2).max(count(p2, p)).max(1))
}

fn pairwise_disjoint(f: &[Rect]) -> bool {
    f.iter()
        .enumerate()
        .all(|(i, a)| f[i + 1..].iter().all(|b| !a.intersects(b)))
}

/// Result of comparing moment sums of two equivalent families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentComparison {
    pub sum_p: f64,
    pub sum_p2: f64,
    /// Exponent `e` in `M^{-e} Σ' ≤ Σ ≤ M^{e} Σ'`: `q-1` for two partitions, `q` otherwise.
    pub exponent: f64,
    pub pass: bool,
}

/// Evaluates `Σ_P μ(P)^q` for both families with `μ` the point masses at the
/// centers of `m`'s cells and checks `M^{1-q} Σ_{P'} ≤ Σ_P ≤ M^{q-1} Σ_{P'}`.
/// When either family overlaps itself the exponent `q` replaces `q - 1`.
pub fn compare_moment_sums(p: &[Rect], p2: &[Rect], m_const: usize, measure: &DyadicMeasure, q: f64) -> Result<MomentComparison> {
    check_q(q)?;
    let points: Vec<([f64; 2], f64)> = measure
        .cells()
        .iter()
        .map(|&(c, mass)| {
            let mut x = measure.cell_center(c);
            if measure.dim() == AmbientDim::One {
                x[1] = 0.5;
            }
            (x, mass)
        })
        .collect();
    let moment = |f: &[Rect]| -> f64 {
        f.iter()
            .map(|r| {
                let mu: f64 = points.iter().filter(|(x, _)| r.contains(*x)).map(|(_, m)| m).sum();
                if mu > 0.0 {
                    mass_pow(mu, q)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let (a, b) = (moment(p), moment(p2));
    let exponent = if pairwise_disjoint(p) && pairwise_disjoint(p2) {
        q - 1.0
    } else {
        q
    };
    let k = (m_const as f64).powf(exponent);
    let slack = 1.0 + 1e-12;
    Ok(MomentComparison {
        sum_p: a,
        sum_p2: b,
        exponent,
        pass: b / k <= a * slack && a <= k * b * slack,
    })
}

/// Pair masses grouped by squared lattice distance (in cell units), ascending.
fn pair_distance_classes(m: &DyadicMeasure) -> Vec<(i64, f64)> {
    let cells = m.cells();
    let by_dist2: HashMap<i64, f64> = cells
        .par_iter()
        .enumerate()
        .fold(HashMap::new, |mut acc: HashMap<i64, f64>, (i, &(a, ma))| {
            for &(b, mb) in &cells[i + 1..] {
                let dx = b[0] - a[0];
                let dy = b[1] - a[1];
                *acc.entry(dx * dx + dy * dy).or_insert(0.0) += 2.0 * ma * mb;
            }
            acc
        })
        .reduce(HashMap::new, |mut x, y| {
            for (k, v) in y {
                *x.entry(k).or_insert(0.0) += v;
            }
            x
        });
    let mut groups: Vec<(i64, f64)> = by_dist2.into_iter().collect();
    groups.sort_by_key(|g| g.0);
    groups
}

/// `Σ_{i≠j} m_i m_j |x_i - x_j|^{-s}` for each `s`, over cell centers. Pairs
/// are grouped by lattice offset so each distinct distance is raised to the
/// power only once.
pub fn discrete_energy(m: &DyadicMeasure, s_grid: &[f64]) -> Vec<f64> {
    let groups = pair_distance_classes(m);
    let w = m.cell_width();
    s_grid
        .iter()
        .map(|&s| {
            groups
                .iter()
                .map(|&(d2, c)| c * ((d2 as f64).sqrt() * w).powf(-s))
                .sum()
        })
        .collect()
}

/// Regression slope of `log₂ C(2^{-j})` against `j` over `j = 1 … L-2`,
/// where `C(r)` is the pair mass `Σ_{i≠j, |x_i-x_j|<r} m_i m_j`. The
/// coarsest shells see the support's diameter and the finest the
/// discretization, so both ends are left out.
pub fn pair_correlation_slope(m: &DyadicMeasure) -> Result<f64> {
    let level = m.level() as i64;
    if level < 5 {
        return Err(Error::InvalidParameter(format!(
            "pair correlation shells need level ≥ 5, got {level}"
        )));
    }
    let w = m.cell_width();
    let mut shell = vec![0.0; level as usize + 2];
    for (d2, c) in pair_distance_classes(m) {
        let d = (d2 as f64).sqrt() * w;
        let j = (-d.log2()).floor() as i64;
        if j >= 1 {
            shell[(j as usize).min(level as usize + 1)] += c;
        }
    }
    // cumulative from the finest shell outwards
    let mut cumulative = shell.clone();
    for j in (0..cumulative.len() - 1).rev() {
        cumulative[j] += cumulative[j + 1];
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (1..=level - 2)
        .filter(|&j| cumulative[j as usize] > 0.0)
        .map(|j| (j as f64, cumulative[j as usize].log2()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InvalidInput("too few occupied distance shells".into()));
    }
    Ok(least_squares(&xs, &ys).slope)
}

/// Per exponent `s`: the growth rate in `j` of `C(2^{-j}) 2^{js}`, which
/// bounds the energy carried by pairs at distance about `2^{-j}`. The energy
/// `∫ r^{-s} dC(r)` is finite exactly when this rate is negative.
pub fn energy_shell_slopes(m: &DyadicMeasure, s_grid: &[f64]) -> Result<Vec<f64>> {
    let slope = pair_correlation_slope(m)?;
    Ok(s_grid.iter().map(|&s| s + slope).collect())
}

/// Outcome of the energy scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub dimension: f64,
    /// Set when the measure has a single atom, so no pair contributes.
    pub degenerate: bool,
}

/// Largest grid exponent `s` at which the discrete energy counts as finite,
/// i.e. the shell bounds still decay (negative rate, see
/// [`energy_shell_slopes`]). A diagnostic cross-check of `D_2`.
pub fn energy_correlation_dimension(m: &DyadicMeasure, s_grid: &[f64]) -> Result<EnergyEstimate> {
    if s_grid.is_empty() {
        return Err(Error::InvalidParameter("empty exponent grid".into()));
    }
    let mut grid = s_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if m.len() < 2 {
        return Ok(EnergyEstimate {
            dimension: grid[0],
            degenerate: true,
        });
    }
    let slopes = energy_shell_slopes(m, &grid)?;
    let mut best = grid[0];
    for (&s, &slope) in grid.iter().zip(&slopes) {
        if !(slope < 0.0) {
            break;
        }
        best = s;
    }
    Ok(EnergyEstimate {
        dimension: best,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_measure, OmegaSequence};
    use crate::ifs::presets;

    fn lebesgue(level: u32) -> DyadicMeasure {
        let rs = presets::lebesgue();
        let om = OmegaSequence::constant(0, level as usize, 1);
        build_measure(&rs, &om, level as usize, level).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let pm = DyadicMeasure::point_mass(AmbientDim::Two, [0.1, 0.2], 7).unwrap();
        for q in [1.25, 2.0, 3.0] {
            assert_eq!(correlation_sum(&pm, q).unwrap(), 1.0);
        }
        assert_eq!(correlation_sum(&lebesgue(9), 2.0).unwrap(), 2f64.powi(-9));
        assert!(correlation_sum(&pm, 1.0).is_err());
    }

    #[test]
    fn lebesgue_dimension_is_one() {
        let m = lebesgue(12);
        for q in [1.25, 1.5, 2.0] {
            let c = estimate_from_finest(&m, q, (4, 12)).unwrap();
            assert!((c.dimension - 1.0).abs() < 1e-9);
        }
        assert!(estimate_from_finest(&m, 2.0, (4, 5)).is_err());
    }

    #[test]
    fn holder_is_tight_for_uniform() {
        for level in [0, 3, 10] {
            let h = holder_check(&lebesgue(level), 2.0).unwrap();
            assert!(h.pass);
            assert!((h.bound - (1u64 << level) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn m_equivalence_identical_and_dilated() {
        let d: Vec<Rect> = (0..16).map(|j| Rect::interval(j as f64 / 16.0, (j + 1) as f64 / 16.0)).collect();
        let w = Rect::interval(0.0, 1.0);
        assert_eq!(check_m_equivalence(&d, &d, &w), Ok(1));
        let dil: Vec<Rect> = d
            .iter()
            .map(|r| {
                let c = (r.lo[0] + r.hi[0]) / 2.0;
                let h = 4.5 * (r.hi[0] - r.lo[0]);
                Rect::interval(c - h, c + h)
            })
            .collect();
        assert_eq!(check_m_equivalence(&d, &dil, &w), Ok(9));
        let short = &d[..15];
        assert!(matches!(
            check_m_equivalence(short, &d, &w),
            Err(EquivalenceFailure::UnionMismatch { .. })
        ));
    }

    #[test]
    fn m_equivalence_two_dimensional() {
        let squares: Vec<Rect> = (0..4)
            .flat_map(|i| (0..4).map(move |j| Rect::new([i as f64 / 4.0, j as f64 / 4.0], [(i + 1) as f64 / 4.0, (j + 1) as f64 / 4.0])))
            .collect();
        let halves = vec![Rect::new([0.0, 0.0], [0.5, 1.0]), Rect::new([0.5, 0.0], [1.0, 1.0])];
        let w = Rect::new([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(check_m_equivalence(&squares, &halves, &w), Ok(8));
    }
}
