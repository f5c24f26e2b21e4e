//! Closed-form dimension values for separated self-similar and random
//! homogeneous self-similar measures.

use crate::error::{Error, Result};
use crate::ifs::{validate_probability_vector, RuleSet};

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn check_scales(scales: &[f64]) -> Result<()> {
    for &l in scales {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidInput(format!("scale {l} outside (0, 1)")));
        }
    }
    Ok(())
}

fn check_shapes(probs: &[Vec<f64>], scales: &[f64], weights: &[f64]) -> Result<()> {
    if probs.len() != scales.len() || scales.len() != weights.len() || scales.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} probability vectors, {} scales, {} weights",
            probs.len(),
            scales.len(),
            weights.len()
        )));
    }
    check_scales(scales)?;
    validate_probability_vector(weights)?;
    for p in probs {
        validate_probability_vector(p)?;
    }
    Ok(())
}

/// `[Σ_i r_i log Σ_j p_{ij}^q] / [(q-1) Σ_i r_i log λ_i]`: the L^q dimension of
/// the random measure when every rule is strongly separated.
pub fn dq_formula_random(probs: &[Vec<f64>], scales: &[f64], weights: &[f64], q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    check_shapes(probs, scales, weights)?;
    let num: f64 = probs
        .iter()
        .zip(weights)
        .map(|(p, r)| r * p.iter().map(|x| if *x > 0.0 { x.powf(q) } else { 0.0 }).sum::<f64>().ln())
        .sum();
    let den: f64 = scales.iter().zip(weights).map(|(l, r)| r * l.ln()).sum();
    Ok(num / ((q - 1.0) * den))
}

/// [`dq_formula_random`] for the probability vectors and scales of a rule set.
pub fn dq_formula_for(rs: &RuleSet, weights: &[f64], q: f64) -> Result<f64> {
    let probs: Vec<Vec<f64>> = rs.rules().iter().map(|r| r.probs().to_vec()).collect();
    dq_formula_random(&probs, &rs.scales(), weights, q)
}

/// The `q → 1⁺` limit: `[Σ_i r_i Σ_j p_{ij} log p_{ij}] / [Σ_i r_i log λ_i]`.
pub fn dq_limit_entropy(probs: &[Vec<f64>], scales: &[f64], weights: &[f64]) -> Result<f64> {
    check_shapes(probs, scales, weights)?;
    let num: f64 = probs
        .iter()
        .zip(weights)
        .map(|(p, r)| r * p.iter().map(|&x| xlogx(x)).sum::<f64>())
        .sum();
    let den: f64 = scales.iter().zip(weights).map(|(l, r)| r * l.ln()).sum();
    Ok(num / den)
}

/// `Σ p̄_i log p̄_i / Σ p̄_i log λ_i` for a separated self-similar measure.
pub fn hausdorff_formula(pbar: &[f64], scales: &[f64]) -> Result<f64> {
    validate_probability_vector(pbar)?;
    if pbar.len() != scales.len() {
        return Err(Error::InvalidInput("one scale per map is required".into()));
    }
    check_scales(scales)?;
    let num: f64 = pbar.iter().map(|&p| xlogx(p)).sum();
    let den: f64 = pbar.iter().zip(scales).map(|(p, l)| p * l.ln()).sum();
    Ok(num / den)
}

/// `min(dim_H ν, 1) + k log(ℓ+1) / (ℓ Σ p̄_i log λ_i)`: the lower bound on the
/// dimension of projections obtained from the block-ℓ disintegration. The
/// correction is negative and vanishes as `ℓ → ∞`.
pub fn projection_hausdorff_lower_bound(pbar: &[f64], scales: &[f64], block_len: usize) -> Result<f64> {
    if block_len < 1 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let dim = hausdorff_formula(pbar, scales)?;
    let k = pbar.len() as f64;
    let l = block_len as f64;
    let den: f64 = pbar.iter().zip(scales).map(|(p, s)| p * s.ln()).sum();
    Ok(dim.min(1.0) + k * (l + 1.0).ln() / (l * den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_formula_examples() {
        let v = dq_formula_random(&[vec![0.5, 0.5]], &[1.0 / 3.0], &[1.0], 2.0).unwrap();
        assert!((v - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        let probs = vec![vec![0.5, 0.5], vec![1.0 / 3.0; 3]];
        for q in [1.25, 1.5, 2.0, 3.0] {
            let v = dq_formula_random(&probs, &[0.25, 1.0 / 3.0], &[0.5, 0.5], q).unwrap();
            assert!((v - 6f64.ln() / 12f64.ln()).abs() < 1e-12);
        }
        let v = dq_formula_random(&[vec![1.0, 0.0]], &[0.5], &[1.0], 2.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(dq_formula_random(&[vec![1.0]], &[1.5], &[1.0], 2.0).is_err());
        assert!(dq_formula_random(&[vec![1.0]], &[0.5], &[1.0], 1.0).is_err());
    }

    #[test]
    fn entropy_limit() {
        let v = dq_limit_entropy(&[vec![0.5, 0.5]], &[1.0 / 3.0], &[1.0]).unwrap();
        assert!((v - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert_eq!(dq_limit_entropy(&[vec![1.0, 0.0]], &[0.3], &[1.0]).unwrap(), 0.0);
        let probs = vec![vec![0.2, 0.8], vec![0.1, 0.3, 0.6]];
        let a = dq_limit_entropy(&probs, &[0.25, 0.3], &[0.4, 0.6]).unwrap();
        let b = dq_formula_random(&probs, &[0.25, 0.3], &[0.4, 0.6], 1.0001).unwrap();
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn hausdorff_examples() {
        let v = hausdorff_formula(&[0.5, 0.5], &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((v - 0.6309297535714574).abs() < 1e-12);
        assert_eq!(hausdorff_formula(&[1.0, 0.0], &[0.3, 0.3]).unwrap(), 0.0);
        assert!((hausdorff_formula(&[0.5, 0.5], &[0.25, 0.25]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_bound() {
        let s = [1.0 / 3.0, 1.0 / 3.0];
        let v = projection_hausdorff_lower_bound(&[0.5, 0.5], &s, 10).unwrap();
        assert!((v - 0.194398).abs() < 1e-6, "{v}");
        let mut prev = f64::NEG_INFINITY;
        for l in [1, 2, 5, 10, 100, 1000, 100_000] {
            let v = projection_hausdorff_lower_bound(&[0.5, 0.5], &s, l).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(projection_hausdorff_lower_bound(&[0.5, 0.5], &s, 0).is_err());
    }
}
