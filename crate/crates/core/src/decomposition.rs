//! Block disintegration of a self-similar measure: words of length `ℓ` are
//! grouped by their type `σ = N(u)` (symbol counts), giving class weights
//! `r_σ` and uniform conditional laws `p_σ` on each class.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ifs::validate_probability_vector;
use crate::numeric::looks_rational;

/// Default cap on the number of type classes.
pub const DEFAULT_CLASS_CAP: usize = 1_000_000;

/// One type class `σ` with its weight and conditional word probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeClass {
    pub sigma: Vec<usize>,
    /// Number of words of type `σ` (multinomial coefficient).
    pub fiber_size: BigUint,
    /// `r_σ = Σ_{N(u)=σ} p̄_u`.
    pub weight: f64,
    /// `p_σ(u) = 1 / fiber_size` for each word of type `σ`.
    pub conditional: f64,
    pub exact_weight: Option<BigRational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub block_len: usize,
    pub pbar: Vec<f64>,
    /// `p̄` as exact rationals when every entry is a small rational.
    pub exact_pbar: Option<Vec<BigRational>>,
    pub classes: Vec<TypeClass>,
    index: HashMap<Vec<usize>, usize>,
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of compositions of `l` into `k` nonnegative parts.
pub fn class_count(l: usize, k: usize) -> f64 {
    binomial(l + k - 1, k - 1)
}

fn multinomial(sigma: &[usize]) -> BigUint {
    let mut total = 0u64;
    let mut acc = BigUint::one();
    for &s in sigma {
        for j in 1..=s as u64 {
            total += 1;
            acc = acc * BigUint::from(total) / BigUint::from(j);
        }
    }
    acc
}

/// Compositions of `l` into `k` parts in lexicographic order, largest first part first.
fn compositions(l: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0; k];
    fn rec(pos: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let k = current.len();
        if pos == k - 1 {
            current[pos] = left;
            out.push(current.clone());
            return;
        }
        for v in (0..=left).rev() {
            current[pos] = v;
            rec(pos + 1, left - v, current, out);
        }
    }
    rec(0, l, &mut current, &mut out);
    out
}

fn exact_probabilities(pbar: &[f64]) -> Option<Vec<BigRational>> {
    let v: Option<Vec<BigRational>> = pbar
        .iter()
        .map(|&p| looks_rational(p).map(|(a, b)| BigRational::new(BigInt::from(a), BigInt::from(b))))
        .collect();
    v.filter(|v| v.iter().fold(BigRational::zero(), |acc, x| acc + x) == BigRational::one())
}

fn pow_rational(x: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

pub fn decompose_self_similar(pbar: &[f64], block_len: usize) -> Result<BlockDecomposition> {
    decompose_self_similar_with_cap(pbar, block_len, DEFAULT_CLASS_CAP)
}

pub fn decompose_self_similar_with_cap(pbar: &[f64], block_len: usize, cap: usize) -> Result<BlockDecomposition> {
    if block_len < 1 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    if pbar.len() < 2 {
        return Err(Error::InvalidInput("the decomposition needs at least two symbols".into()));
    }
    validate_probability_vector(pbar)?;
    let count = class_count(block_len, pbar.len());
    if count > cap as f64 {
        return Err(Error::Resource(format!("{count:.3e} type classes exceed the cap {cap}")));
    }
    let exact_pbar = exact_probabilities(pbar);
    let mut classes = Vec::new();
    for sigma in compositions(block_len, pbar.len()) {
        if sigma.iter().zip(pbar).any(|(&s, &p)| s > 0 && p == 0.0) {
            continue;
        }
        let fiber_size = multinomial(&sigma);
        let size_f = fiber_size.to_f64().unwrap_or(f64::INFINITY);
        let word_prob: f64 = sigma.iter().zip(pbar).map(|(&s, &p)| p.powi(s as i32)).product();
        let exact_weight = exact_pbar.as_ref().map(|ep| {
            sigma
                .iter()
                .zip(ep)
                .fold(BigRational::from_integer(BigInt::from(fiber_size.clone())), |acc, (&s, p)| {
                    acc * pow_rational(p, s)
                })
        });
        classes.push(TypeClass {
            sigma,
            weight: size_f * word_prob,
            conditional: 1.0 / size_f,
            fiber_size,
            exact_weight,
        });
    }
    let index = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.sigma.clone(), i))
        .collect();
    Ok(BlockDecomposition {
        block_len,
        pbar: pbar.to_vec(),
        exact_pbar,
        classes,
        index,
    })
}

impl BlockDecomposition {
    pub fn k(&self) -> usize {
        self.pbar.len()
    }

    /// `N(u)`: how often each symbol occurs in `u`.
    pub fn type_of(&self, block: &[usize]) -> Result<Vec<usize>> {
        let mut sigma = vec![0; self.k()];
        for &s in block {
            if s >= self.k() {
                return Err(Error::InvalidInput(format!("symbol {s} outside 0..{}", self.k())));
            }
            sigma[s] += 1;
        }
        Ok(sigma)
    }

    pub fn class(&self, sigma: &[usize]) -> Option<&TypeClass> {
        self.index.get(sigma).map(|&i| &self.classes[i])
    }

    fn blocks<'w>(&self, word: &'w [usize]) -> Result<std::slice::Chunks<'w, usize>> {
        if !word.len().is_multiple_of(self.block_len) {
            return Err(Error::InvalidInput(format!(
                "word length {} is not a multiple of the block length {}",
                word.len(),
                self.block_len
            )));
        }
        Ok(word.chunks(self.block_len))
    }

    /// `Π_j r_{N(v_j)} p_{N(v_j)}(v_j)` over the blocks `v_j` of `word`.
    pub fn reconstruct_cylinder(&self, word: &[usize]) -> Result<f64> {
        let mut acc = 1.0;
        for block in self.blocks(word)? {
            let sigma = self.type_of(block)?;
            match self.class(&sigma) {
                Some(c) => acc *= c.weight * c.conditional,
                None => return Ok(0.0),
            }
        }
        Ok(acc)
    }

    /// Exact version of [`Self::reconstruct_cylinder`]; `None` when `p̄` is not a small rational vector.
    pub fn reconstruct_cylinder_exact(&self, word: &[usize]) -> Result<Option<BigRational>> {
        if self.exact_pbar.is_none() {
            return Ok(None);
        }
        let mut acc = BigRational::one();
        for block in self.blocks(word)? {
            let sigma = self.type_of(block)?;
            match self.class(&sigma) {
                Some(c) => {
                    let w = c.exact_weight.clone().expect("exact weights accompany exact p̄");
                    acc = acc * w / BigRational::from_integer(BigInt::from(c.fiber_size.clone()));
                }
                None => return Ok(Some(BigRational::zero())),
            }
        }
        Ok(Some(acc))
    }

    /// `Π p̄_{u_i}`, the direct cylinder mass.
    pub fn direct_cylinder(&self, word: &[usize]) -> Result<f64> {
        self.type_of(word)?;
        Ok(word.iter().map(|&s| self.pbar[s]).product())
    }

    pub fn direct_cylinder_exact(&self, word: &[usize]) -> Result<Option<BigRational>> {
        self.type_of(word)?;
        Ok(self
            .exact_pbar
            .as_ref()
            .map(|ep| word.iter().fold(BigRational::one(), |acc, &s| acc * &ep[s])))
    }

    /// `-Σ_σ r_σ ln r_σ`.
    pub fn class_entropy(&self) -> f64 {
        -self
            .classes
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight * c.weight.ln())
            .sum::<f64>()
    }

    /// `k ln(ℓ + 1)`, the bound on the class entropy.
    pub fn entropy_bound(&self) -> f64 {
        self.k() as f64 * (self.block_len as f64 + 1.0).ln()
    }

    pub fn total_weight(&self) -> f64 {
        self.classes.iter().map(|c| c.weight).sum()
    }

    /// All words of type `σ`, lexicographically.
    pub fn fiber_words(&self, sigma: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut left = sigma.to_vec();
        let mut word = Vec::with_capacity(self.block_len);
        fn rec(left: &mut Vec<usize>, word: &mut Vec<usize>, len: usize, out: &mut Vec<Vec<usize>>) {
            if word.len() == len {
                out.push(word.clone());
                return;
            }
            for s in 0..left.len() {
                if left[s] > 0 {
                    left[s] -= 1;
                    word.push(s);
                    rec(left, word, len, out);
                    word.pop();
                    left[s] += 1;
                }
            }
        }
        rec(&mut left, &mut word, self.block_len, &mut out);
        out
    }

    /// JSON: `{block_len, pbar, classes: [{sigma, r, fiber: [{word, p}]}]}`.
    /// Words are listed only when the total number of words stays below `max_words`.
    pub fn to_json(&self, max_words: usize) -> Result<Value> {
        let total: f64 = self.classes.iter().map(|c| c.fiber_size.to_f64().unwrap_or(f64::INFINITY)).sum();
        if total > max_words as f64 {
            return Err(Error::Resource(format!("{total:.3e} words exceed the dump limit {max_words}")));
        }
        let classes: Vec<Value> = self
            .classes
            .iter()
            .map(|c| {
                let fiber: Vec<Value> = self
                    .fiber_words(&c.sigma)
                    .into_iter()
                    .map(|w| json!({ "word": w, "p": c.conditional }))
                    .collect();
                json!({ "sigma": c.sigma, "r": c.weight, "fiber": fiber })
            })
            .collect();
        Ok(json!({ "block_len": self.block_len, "pbar": self.pbar, "classes": classes }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_pairs() {
        let d = decompose_self_similar(&[0.5, 0.5], 2).unwrap();
        let sig: Vec<Vec<usize>> = d.classes.iter().map(|c| c.sigma.clone()).collect();
        assert_eq!(sig, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let r: Vec<f64> = d.classes.iter().map(|c| c.weight).collect();
        assert_eq!(r, vec![0.25, 0.5, 0.25]);
        assert_eq!(d.classes[1].conditional, 0.5);
        assert_eq!(d.fiber_words(&[1, 1]), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(d.reconstruct_cylinder(&[0, 1, 1, 0]).unwrap(), 1.0 / 16.0);
        let exact = d.reconstruct_cylinder_exact(&[0, 1, 1, 0]).unwrap().unwrap();
        assert_eq!(exact, BigRational::new(1.into(), 16.into()));
        assert!(d.reconstruct_cylinder(&[0, 1, 1]).is_err());
    }

    #[test]
    fn single_block_and_degenerate() {
        let d = decompose_self_similar(&[0.3, 0.7], 1).unwrap();
        assert_eq!(d.classes.len(), 2);
        assert_eq!(d.classes[0].weight, 0.3);
        let d = decompose_self_similar(&[1.0, 0.0], 7).unwrap();
        assert_eq!(d.classes.len(), 1);
        assert_eq!(d.classes[0].sigma, vec![7, 0]);
        assert_eq!(d.classes[0].weight, 1.0);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            decompose_self_similar_with_cap(&[0.25; 4], 30, 1000),
            Err(Error::Resource(_))
        ));
        assert_eq!(class_count(2, 2), 3.0);
        assert_eq!(class_count(3, 3), 10.0);
    }

    #[test]
    fn json_dump() {
        let d = decompose_self_similar(&[0.5, 0.5], 2).unwrap();
        let v = d.to_json(100).unwrap();
        assert_eq!(v["classes"][1]["sigma"], json!([1, 1]));
        assert_eq!(v["classes"][1]["fiber"][1]["word"], json!([1, 0]));
        assert!(d.to_json(2).is_err());
    }
}
