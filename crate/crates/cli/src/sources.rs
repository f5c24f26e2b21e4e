//! Rule sets, numbers and ω sequences as they appear on the command line and
//! in scenario files.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lqdim::cocycle::{draw_omega, OmegaSampling};
use lqdim::{presets, OmegaSequence, RuleSet};

pub const PRESET_HELP: &str = "middle-thirds, lebesgue, cantor:A[:P0], four-corner[:SCALE[:ROTATION]], random-pair[:ALPHA]";

/// A decimal number or a fraction `a/b`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

/// `name[:param[:param]]`, see [`PRESET_HELP`].
pub fn preset(spec: &str) -> Result<RuleSet> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let params = parts
        .map(|p| parse_number(p).map_err(|e| anyhow!(e)))
        .collect::<Result<Vec<f64>>>()?;
    let arity = |max: usize| -> Result<()> {
        if params.len() > max {
            bail!("preset {name} takes at most {max} parameters, got {}", params.len());
        }
        Ok(())
    };
    let p0_rule = |a: f64, p0: f64| -> Result<RuleSet> {
        if !(0.0..=1.0).contains(&p0) {
            bail!("weight {p0} outside [0, 1]");
        }
        if !(a > 0.0 && a < 0.5) {
            bail!("Cantor scale {a} must lie in (0, 1/2)");
        }
        Ok(presets::cantor(a, [p0, 1.0 - p0]))
    };
    match name {
        "middle-thirds" => {
            arity(0)?;
            Ok(presets::middle_thirds([0.5, 0.5]))
        }
        "lebesgue" => {
            arity(0)?;
            Ok(presets::lebesgue())
        }
        "cantor" => {
            arity(2)?;
            let a = *params.first().ok_or_else(|| anyhow!("cantor needs a scale, e.g. cantor:1/4"))?;
            p0_rule(a, params.get(1).copied().unwrap_or(0.5))
        }
        "four-corner" => {
            arity(2)?;
            let scale = params.first().copied().unwrap_or(0.2);
            if !(scale > 0.0 && scale < 0.5) {
                bail!("four-corner scale {scale} must lie in (0, 1/2)");
            }
            Ok(presets::four_corner(scale, params.get(1).copied().unwrap_or(1.0)))
        }
        "random-pair" => {
            arity(1)?;
            Ok(presets::random_pair(params.first().copied().unwrap_or(1.0)))
        }
        other => bail!("unknown preset {other:?}; known: {PRESET_HELP}"),
    }
}

/// A rule set given inline as JSON, as a preset string, or by file path.
pub fn ruleset_from_value(v: &serde_json::Value) -> Result<RuleSet> {
    match v {
        serde_json::Value::String(s) => preset(s),
        serde_json::Value::Object(_) => Ok(RuleSet::from_json(&v.to_string())?),
        _ => bail!("a rule set is a JSON object or a preset string"),
    }
}

pub fn ruleset_from_file(path: &Path) -> Result<RuleSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RuleSet::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `iid` or `balanced:BLOCK`.
pub fn parse_sampling(s: &str) -> Result<OmegaSampling> {
    match s.split_once(':') {
        None if s == "iid" => Ok(OmegaSampling::Iid),
        Some(("balanced", b)) => {
            let block: usize = b.parse().with_context(|| format!("bad block length in {s:?}"))?;
            if block == 0 {
                bail!("balanced sampling needs a positive block length");
            }
            Ok(OmegaSampling::Balanced { block })
        }
        _ => bail!("sampling must be \"iid\" or \"balanced:BLOCK\", got {s:?}"),
    }
}

/// Driving weights, uniform when absent; checked against the rule count.
pub fn weights_for(rs: &RuleSet, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let w = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0 / rs.len() as f64; rs.len()],
    };
    if w.len() != rs.len() {
        bail!("{} driving weights for {} rules", w.len(), rs.len());
    }
    let total: f64 = w.iter().sum();
    if w.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        bail!("driving weights {w:?} must be nonnegative and sum to 1");
    }
    Ok(w)
}

/// Enough rule symbols to reach dyadic level `level` plus `extra_steps`.
pub fn omega_for(
    rs: &RuleSet,
    weights: &[f64],
    seed: u64,
    level: u32,
    extra_steps: usize,
    sampling: OmegaSampling,
) -> Result<OmegaSequence> {
    let max_scale = rs.scales().into_iter().fold(0.0, f64::max);
    let len = (level as f64 / -max_scale.log2()).ceil() as usize + 2 + extra_steps;
    if rs.len() == 1 {
        return Ok(OmegaSequence::constant(0, len, 1));
    }
    Ok(draw_omega(weights, len, seed, sampling)?)
}
