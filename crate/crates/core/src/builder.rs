//! Discretized random self-similar measures: symbol sequences, word-tree
//! traversal with dyadic aggregation, projections and convolutions.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{normalization_level, normalization_levels};
use crate::error::{Error, Result};
use crate::ifs::{validate_probability_vector, AmbientDim, CylinderFrame, Point, RuleSet};
use crate::measure::{cell_index, cell_of, Cell, DyadicMeasure, MAX_LEVEL};

/// Words per traversal are capped to keep runaway requests from hanging.
pub const MAX_WORDS: f64 = 4e9;

/// Minimum number of independent subtrees the word tree is split into.
/// Fixed, so results do not depend on the number of worker threads.
const SPLIT_TARGET: usize = 256;

/// A finite prefix of the rule sequence `ω`, with the weights it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaSequence {
    symbols: Vec<usize>,
    weights: Vec<f64>,
    seed: u64,
}

impl OmegaSequence {
    pub fn new(symbols: Vec<usize>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        validate_probability_vector(&weights)?;
        if let Some((pos, &s)) = symbols.iter().enumerate().find(|(_, &s)| s >= weights.len()) {
            return Err(Error::InvalidInput(format!(
                "symbol {s} at position {pos} outside 0..{}",
                weights.len()
            )));
        }
        Ok(OmegaSequence {
            symbols,
            weights,
            seed,
        })
    }

    /// `(s, s, s, …)` over `n_rules` rules, with all weight on `s`.
    pub fn constant(symbol: usize, length: usize, n_rules: usize) -> Self {
        assert!(symbol < n_rules, "symbol out of range");
        let mut weights = vec![0.0; n_rules];
        weights[symbol] = 1.0;
        OmegaSequence {
            symbols: vec![symbol; length],
            weights,
            seed: 0,
        }
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `T^n ω`.
    pub fn shift(&self, n: usize) -> Result<Self> {
        if n > self.symbols.len() {
            return Err(Error::PrefixExhausted {
                needed: n,
                available: self.symbols.len(),
            });
        }
        Ok(OmegaSequence {
            symbols: self.symbols[n..].to_vec(),
            weights: self.weights.clone(),
            seed: self.seed,
        })
    }

    pub(crate) fn check_rules(&self, rs: &RuleSet) -> Result<()> {
        if self.weights.len() != rs.len() {
            return Err(Error::InvalidInput(format!(
                "sequence drawn over {} symbols, rule set has {} rules",
                self.weights.len(),
                rs.len()
            )));
        }
        Ok(())
    }
}

fn check_length(length: usize) -> Result<()> {
    if length == 0 {
        return Err(Error::InvalidParameter("sequence length must be at least 1".into()));
    }
    Ok(())
}

/// I.i.d. symbols with the given weights, reproducible from `seed`.
pub fn sample_omega(weights: &[f64], length: usize, seed: u64) -> Result<OmegaSequence> {
    check_length(length)?;
    validate_probability_vector(weights)?;
    let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols = (0..length).map(|_| dist.sample(&mut rng)).collect();
    OmegaSequence::new(symbols, weights.to_vec(), seed)
}

/// Symbol counts proportional to `weights` over `len` slots (largest remainder).
fn quota(weights: &[f64], len: usize) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * len as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut missing = len - counts.iter().sum::<usize>().min(len);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            missing -= 1;
        }
    }
    counts
}

/// A seeded sequence whose symbol frequencies match `weights` as closely as
/// integers allow inside every consecutive block of `block` symbols; the
/// order inside a block is a uniformly random permutation.
///
/// Such sequences are generic for the Bernoulli measure in the sense of
/// empirical frequencies of single symbols, and their normalization levels
/// track the Lyapunov constant without the `√n` fluctuation of i.i.d. draws.
pub fn sample_omega_balanced(weights: &[f64], length: usize, seed: u64, block: usize) -> Result<OmegaSequence> {
    check_length(length)?;
    validate_probability_vector(weights)?;
    if block == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(length);
    while symbols.len() < length {
        let len = block.min(length - symbols.len());
        let mut chunk: Vec<usize> = quota(weights, len)
            .into_iter()
            .enumerate()
            .flat_map(|(i, c)| std::iter::repeat_n(i, c))
            .collect();
        chunk.shuffle(&mut rng);
        symbols.extend(chunk);
    }
    OmegaSequence::new(symbols, weights.to_vec(), seed)
}

/// Smallest depth `n` with `L_n ≥ level`.
pub fn depth_for_level(rs: &RuleSet, omega: &OmegaSequence, level: u32) -> Result<usize> {
    omega.check_rules(rs)?;
    let levels = normalization_levels(rs, omega, omega.len())?;
    levels
        .iter()
        .position(|&l| l >= level)
        .ok_or(Error::PrefixExhausted {
            needed: omega.len() + 1,
            available: omega.len(),
        })
}

/// Number of words with positive mass along a rule prefix.
pub fn word_count(rs: &RuleSet, symbols: &[usize]) -> f64 {
    symbols
        .iter()
        .map(|&i| rs.rule(i).probs().iter().filter(|&&p| p > 0.0).count() as f64)
        .product()
}

/// The word tree of depth `n` along a rule prefix, pre-split into subtrees
/// that are traversed independently and merged in a fixed order.
pub struct WordTree<'a> {
    rs: &'a RuleSet,
    symbols: &'a [usize],
    split: usize,
    roots: Vec<(CylinderFrame, f64)>,
}

impl<'a> WordTree<'a> {
    pub fn new(rs: &'a RuleSet, omega: &'a OmegaSequence, depth: usize) -> Result<Self> {
        omega.check_rules(rs)?;
        if depth > omega.len() {
            return Err(Error::PrefixExhausted {
                needed: depth,
                available: omega.len(),
            });
        }
        let symbols = &omega.symbols()[..depth];
        if word_count(rs, symbols) > MAX_WORDS {
            return Err(Error::Resource(format!(
                "{:.3e} words at depth {depth} exceed the traversal cap",
                word_count(rs, symbols)
            )));
        }
        let mut roots = vec![(CylinderFrame::identity(), 1.0)];
        let mut split = 0;
        while split < depth && roots.len() < SPLIT_TARGET {
            let rule = rs.rule(symbols[split]);
            roots = roots
                .iter()
                .flat_map(|&(frame, mass)| {
                    rule.probs()
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(move |(j, &p)| (frame.then(&rule.map(j)), mass * p))
                })
                .collect();
            split += 1;
        }
        Ok(WordTree {
            rs,
            symbols,
            split,
            roots,
        })
    }

    fn walk<K: Fn(Point) -> Cell>(
        &self,
        level_idx: usize,
        frame: &CylinderFrame,
        mass: f64,
        key: &K,
        out: &mut HashMap<Cell, f64>,
    ) {
        if level_idx == self.symbols.len() {
            let center = frame.apply(self.rs.reference().center());
            *out.entry(key(center)).or_insert(0.0) += mass;
            return;
        }
        let rule = self.rs.rule(self.symbols[level_idx]);
        for (j, &p) in rule.probs().iter().enumerate() {
            if p > 0.0 {
                self.walk(level_idx + 1, &frame.then(&rule.map(j)), mass * p, key, out);
            }
        }
    }

    /// Sends each depth-`n` cylinder's mass to `key(center)` and aggregates.
    pub fn deposit<K>(&self, key: K) -> Vec<(Cell, f64)>
    where
        K: Fn(Point) -> Cell + Sync,
    {
        let parts: Vec<Vec<(Cell, f64)>> = self
            .roots
            .par_iter()
            .map(|(frame, mass)| {
                let mut local = HashMap::new();
                self.walk(self.split, frame, *mass, &key, &mut local);
                let mut v: Vec<(Cell, f64)> = local.into_iter().collect();
                v.sort_by_key(|a| a.0);
                v
            })
            .collect();
        parts.into_iter().flatten().collect()
    }

    /// Every cylinder center with its mass, in lexicographic word order.
    pub fn points(&self) -> Vec<(Point, f64)> {
        let mut out = Vec::new();
        for (frame, mass) in &self.roots {
            let mut stack = vec![(self.split, *frame, *mass)];
            // depth-first, children pushed in reverse to keep lexicographic order
            while let Some((idx, f, m)) = stack.pop() {
                if idx == self.symbols.len() {
                    out.push((f.apply(self.rs.reference().center()), m));
                    continue;
                }
                let rule = self.rs.rule(self.symbols[idx]);
                for (j, &p) in rule.probs().iter().enumerate().rev() {
                    if p > 0.0 {
                        stack.push((idx + 1, f.then(&rule.map(j)), m * p));
                    }
                }
            }
        }
        out
    }
}

fn check_builder_level(rs: &RuleSet, omega: &OmegaSequence, depth: usize, level: u32) -> Result<()> {
    omega.check_rules(rs)?;
    if level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!("level {level} exceeds {MAX_LEVEL}")));
    }
    let ln = normalization_level(rs, omega, depth)?;
    if level > ln {
        return Err(Error::LevelTooFine {
            level,
            depth,
            required_depth: depth_for_level(rs, omega, level).ok(),
        });
    }
    Ok(())
}

/// The depth-`n` discretization of `η^{(ω)}` (or `ν^{(ω)}` in 1-D) on level-`L` cells.
pub fn build_measure(rs: &RuleSet, omega: &OmegaSequence, depth: usize, level: u32) -> Result<DyadicMeasure> {
    check_builder_level(rs, omega, depth, level)?;
    let tree = WordTree::new(rs, omega, depth)?;
    let dim = rs.ambient_dim();
    DyadicMeasure::from_entries(level, dim, tree.deposit(|p| cell_of(p, level, dim)))
}

/// `⟨x, v⟩`.
#[inline]
pub fn project_point(p: Point, v: [f64; 2]) -> f64 {
    p[0] * v[0] + p[1] * v[1]
}

pub(crate) fn check_unit(v: [f64; 2]) -> Result<()> {
    let n = v[0].hypot(v[1]);
    if !((n - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidInput(format!("direction {v:?} has norm {n}, expected 1")));
    }
    Ok(())
}

/// The depth-`n` discretization of the projection `η_v^{(ω)} = Π_v η^{(ω)}`.
pub fn project_measure(
    rs: &RuleSet,
    omega: &OmegaSequence,
    v: [f64; 2],
    depth: usize,
    level: u32,
) -> Result<DyadicMeasure> {
    if rs.ambient_dim() != AmbientDim::Two {
        return Err(Error::InvalidInput("projection needs a planar rule set".into()));
    }
    check_unit(v)?;
    check_builder_level(rs, omega, depth, level)?;
    let tree = WordTree::new(rs, omega, depth)?;
    let entries = tree.deposit(|p| [cell_index(project_point(p, v), level), 0]);
    DyadicMeasure::from_entries(level, AmbientDim::One, entries)
}

/// `ν * A_t ϑ` on level-`L` cells, pairing the cell centers of both inputs.
pub fn convolve_measures(nu: &DyadicMeasure, theta: &DyadicMeasure, t: f64, level: u32) -> Result<DyadicMeasure> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("scaling t = {t} must be positive")));
    }
    if nu.dim() != AmbientDim::One || theta.dim() != AmbientDim::One {
        return Err(Error::InvalidInput("convolution needs two 1-D measures".into()));
    }
    if level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!("level {level} exceeds {MAX_LEVEL}")));
    }
    let ys: Vec<(f64, f64)> = theta
        .cells()
        .iter()
        .map(|&(c, m)| (t * theta.cell_center(c)[0], m))
        .collect();
    let chunk = (nu.len() / SPLIT_TARGET).max(1);
    let parts: Vec<Vec<(Cell, f64)>> = nu
        .cells()
        .par_chunks(chunk)
        .map(|cells| {
            let mut local: HashMap<Cell, f64> = HashMap::new();
            for &(c, mx) in cells {
                let x = nu.cell_center(c)[0];
                for &(ty, my) in &ys {
                    *local.entry([cell_index(x + ty, level), 0]).or_insert(0.0) += mx * my;
                }
            }
            let mut v: Vec<(Cell, f64)> = local.into_iter().collect();
            v.sort_by_key(|a| a.0);
            v
        })
        .collect();
    DyadicMeasure::from_entries(level, AmbientDim::One, parts.into_iter().flatten().collect())
}

/// Masses `η̄^{(ω)}([u])` of symbolic cylinders.
pub trait CylinderMass {
    /// Mass of the cylinder `[word]` for the rule sequence `omega` (same length as `word`).
    fn mass(&self, omega: &[usize], word: &[usize]) -> f64;
}

/// The product measure `∏ p_{ω_i, u_i}`.
pub struct ProductMass<'a> {
    pub rules: &'a RuleSet,
}

impl CylinderMass for ProductMass<'_> {
    fn mass(&self, omega: &[usize], word: &[usize]) -> f64 {
        omega
            .iter()
            .zip(word)
            .map(|(&i, &j)| self.rules.rule(i).probs()[j])
            .product()
    }
}

fn enumerate_words(rs: &RuleSet, symbols: &[usize]) -> Vec<Vec<usize>> {
    let mut words = vec![Vec::new()];
    for &i in symbols {
        let k = rs.rule(i).len();
        words = words
            .into_iter()
            .flat_map(|w| {
                (0..k).map(move |j| {
                    let mut w2 = w.clone();
                    w2.push(j);
                    w2
                })
            })
            .collect();
    }
    words
}

fn random_word<R: Rng>(rs: &RuleSet, symbols: &[usize], rng: &mut R) -> Vec<usize> {
    symbols.iter().map(|&i| rng.gen_range(0..rs.rule(i).len())).collect()
}

/// Pairs enumerated exhaustively up to this count; sampled beyond it.
const CONDITION_C_EXHAUSTIVE: f64 = 1e6;
const CONDITION_C_SAMPLES: usize = 200_000;

/// Largest ratio `η̄([uv]) / (η̄([u]) η̄^{(T^n ω)}([v]))` over pairs of words
/// of lengths `n` and `m` with positive denominator.
pub fn check_condition_c<M: CylinderMass + ?Sized>(
    rs: &RuleSet,
    mass: &M,
    omega: &OmegaSequence,
    n: usize,
    m: usize,
) -> Result<f64> {
    omega.check_rules(rs)?;
    if n + m > omega.len() {
        return Err(Error::PrefixExhausted {
            needed: n + m,
            available: omega.len(),
        });
    }
    let syms = omega.symbols();
    let (head, tail) = (&syms[..n], &syms[n..n + m]);
    let ratio = |u: &[usize], v: &[usize]| -> Option<f64> {
        let den = mass.mass(head, u) * mass.mass(tail, v);
        if den > 0.0 {
            let uv: Vec<usize> = u.iter().chain(v).copied().collect();
            Some(mass.mass(&syms[..n + m], &uv) / den)
        } else {
            None
        }
    };
    let mut worst: f64 = 1.0;
    if word_count_all(rs, head) * word_count_all(rs, tail) <= CONDITION_C_EXHAUSTIVE {
        let us = enumerate_words(rs, head);
        let vs = enumerate_words(rs, tail);
        for u in &us {
            for v in &vs {
                if let Some(r) = ratio(u, v) {
                    worst = worst.max(r);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(omega.seed() ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..CONDITION_C_SAMPLES {
            let u = random_word(rs, head, &mut rng);
            let v = random_word(rs, tail, &mut rng);
            if let Some(r) = ratio(&u, &v) {
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

fn word_count_all(rs: &RuleSet, symbols: &[usize]) -> f64 {
    symbols.iter().map(|&i| rs.rule(i).len() as f64).product()
}
