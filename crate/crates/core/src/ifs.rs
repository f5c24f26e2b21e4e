//! Homogeneous similarity rules, words, cylinder frames and the coding geometry.
//!
//! Points are always stored as `[f64; 2]`; in 1-D mode the second coordinate is
//! zero and every rotation is zero. Rule and symbol indices are 0-based.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const PROB_SUM_TOL: f64 = 1e-12;
const NESTING_TOL: f64 = 1e-12;

/// Reduce an angle into `[0, 2π)`.
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub(crate) fn rotate(p: Point, angle: f64) -> Point {
    if angle == 0.0 {
        return p;
    }
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

pub(crate) fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AmbientDim {
    One,
    Two,
}

impl AmbientDim {
    pub fn as_usize(self) -> usize {
        match self {
            AmbientDim::One => 1,
            AmbientDim::Two => 2,
        }
    }

    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            1 => Ok(AmbientDim::One),
            2 => Ok(AmbientDim::Two),
            _ => Err(Error::InvalidInput(format!(
                "ambient dimension must be 1 or 2, got {d}"
            ))),
        }
    }
}

/// A contracting similarity `x ↦ scale · R(rotation) x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: f64,
    pub translation: Point,
}

impl Similarity {
    pub fn new(scale: f64, rotation: f64, translation: Point) -> Result<Self> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(Error::InvalidInput(format!(
                "similarity scale must lie in (0,1), got {scale}"
            )));
        }
        Ok(Similarity {
            scale,
            rotation: reduce_angle(rotation),
            translation,
        })
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = rotate(p, self.rotation);
        [
            self.scale * r[0] + self.translation[0],
            self.scale * r[1] + self.translation[1],
        ]
    }
}

/// A homogeneous IFS: every map shares `scale` and `rotation`; only the
/// translations differ. `probs[j]` is the weight of map `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    scale: f64,
    rotation: f64,
    translations: Vec<Point>,
    probs: Vec<f64>,
}

impl Rule {
    pub fn new(scale: f64, rotation: f64, translations: Vec<Point>, probs: Vec<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rule scale must lie in (0,1), got {scale}"
            )));
        }
        if !rotation.is_finite() {
            return Err(Error::InvalidInput("rule rotation must be finite".into()));
        }
        if translations.is_empty() {
            return Err(Error::InvalidInput("a rule needs at least one map".into()));
        }
        if translations.len() != probs.len() {
            return Err(Error::InvalidInput(format!(
                "rule has {} translations but {} probabilities",
                translations.len(),
                probs.len()
            )));
        }
        if translations.iter().any(|t| !t[0].is_finite() || !t[1].is_finite()) {
            return Err(Error::InvalidInput("translations must be finite".into()));
        }
        validate_probability_vector(&probs)?;
        Ok(Rule {
            scale,
            rotation: reduce_angle(rotation),
            translations,
            probs,
        })
    }

    /// Rule with uniform weights over its maps.
    pub fn uniform(scale: f64, rotation: f64, translations: Vec<Point>) -> Result<Self> {
        let k = translations.len().max(1);
        Rule::new(scale, rotation, translations, vec![1.0 / k as f64; k])
    }

    /// 1-D rule `x ↦ scale·x + t_j`.
    pub fn line(scale: f64, translations: &[f64], probs: Vec<f64>) -> Result<Self> {
        Rule::new(scale, 0.0, translations.iter().map(|&t| [t, 0.0]).collect(), probs)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn translations(&self) -> &[Point] {
        &self.translations
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of maps `k_i`.
    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    pub fn map(&self, j: usize) -> Similarity {
        Similarity {
            scale: self.scale,
            rotation: self.rotation,
            translation: self.translations[j],
        }
    }
}

pub(crate) fn validate_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "probabilities must be finite and nonnegative: {p:?}"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidInput(format!(
            "probabilities must sum to 1, sum is {s}"
        )));
    }
    Ok(())
}

/// The set whose images under cylinder maps form the construction pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceSet {
    /// Closed ball `B[0, R]`.
    Ball { radius: f64 },
    /// `[0,1]`, used for 1-D rules whose maps send `[0,1]` into itself.
    UnitInterval,
}

impl ReferenceSet {
    pub fn center(&self) -> Point {
        match self {
            ReferenceSet::Ball { .. } => [0.0, 0.0],
            ReferenceSet::UnitInterval => [0.5, 0.0],
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            ReferenceSet::Ball { radius } => *radius,
            ReferenceSet::UnitInterval => 0.5,
        }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    ambient_dim: AmbientDim,
    reference: ReferenceSet,
}

impl RuleSet {
    /// Builds a rule set and picks its reference set: `[0,1]` for 1-D rules
    /// that preserve the unit interval, `B[0, R*]` otherwise.
    pub fn new(ambient_dim: AmbientDim, rules: Vec<Rule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::InvalidInput("rule set needs at least one rule".into()));
        }
        if ambient_dim == AmbientDim::One {
            for (i, r) in rules.iter().enumerate() {
                if r.rotation != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "rule {i}: rotation must be 0 in 1-D mode"
                    )));
                }
                if r.translations.iter().any(|t| t[1] != 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "rule {i}: 1-D translations must have zero second coordinate"
                    )));
                }
            }
        }
        let mut rs = RuleSet {
            rules,
            ambient_dim,
            reference: ReferenceSet::UnitInterval,
        };
        if !(ambient_dim == AmbientDim::One && rs.preserves_unit_interval()) {
            rs.reference = ReferenceSet::Ball {
                radius: min_ball_radius(&rs),
            };
        }
        Ok(rs)
    }

    /// Replace the reference set by `B[0, radius]`; `radius` must satisfy the nesting bound.
    pub fn with_ball_radius(mut self, radius: f64) -> Result<Self> {
        let r_min = min_ball_radius(&self);
        if !(radius >= r_min - NESTING_TOL) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ball radius {radius} is below the nesting bound {r_min}"
            )));
        }
        self.reference = ReferenceSet::Ball { radius };
        Ok(self)
    }

    fn preserves_unit_interval(&self) -> bool {
        self.rules.iter().all(|r| {
            r.translations
                .iter()
                .all(|t| t[0] >= -NESTING_TOL && t[0] + r.scale <= 1.0 + NESTING_TOL)
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, i: usize) -> &Rule {
        &self.rules[i]
    }

    /// Number of rules `N`.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn ambient_dim(&self) -> AmbientDim {
        self.ambient_dim
    }

    pub fn reference(&self) -> ReferenceSet {
        self.reference
    }

    pub fn scales(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.scale).collect()
    }

    pub fn max_maps(&self) -> usize {
        self.rules.iter().map(Rule::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RuleSetJson::from(self)).expect("rule set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RuleSetJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("rule set JSON: {e}")))?;
        raw.try_into()
    }
}

/// `R* = max |t| / (1 - max λ)`: any `R ≥ R*` gives `f(B[0,R]) ⊆ B[0,R]` for every map.
pub fn min_ball_radius(rs: &RuleSet) -> f64 {
    let lam_max = rs.rules.iter().map(|r| r.scale).fold(0.0, f64::max);
    let t_max = rs
        .rules
        .iter()
        .flat_map(|r| r.translations.iter())
        .map(|&t| norm(t))
        .fold(0.0, f64::max);
    t_max / (1.0 - lam_max)
}

/// A finite word over the maps of the rules `ω_{offset+1}, ω_{offset+2}, …`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    pub symbols: Vec<usize>,
    pub offset: usize,
}

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Word { symbols, offset: 0 }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn validate(&self, rs: &RuleSet, omega_prefix: &[usize]) -> Result<()> {
        if self.symbols.len() != omega_prefix.len() {
            return Err(Error::Precondition(format!(
                "word length {} differs from rule prefix length {}",
                self.symbols.len(),
                omega_prefix.len()
            )));
        }
        for (m, (&j, &i)) in self.symbols.iter().zip(omega_prefix).enumerate() {
            if i >= rs.len() {
                return Err(Error::InvalidInput(format!(
                    "rule index {i} at position {m} out of range"
                )));
            }
            let k = rs.rules[i].len();
            if j >= k {
                return Err(Error::InvalidWord {
                    position: m,
                    symbol: j,
                    rule_size: k,
                });
            }
        }
        Ok(())
    }
}

/// The similarity `f_u = f_{u_1} ∘ ⋯ ∘ f_{u_n}` in normal form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderFrame {
    pub scale_product: f64,
    pub rotation_sum: f64,
    pub translation: Point,
}

impl CylinderFrame {
    pub fn identity() -> Self {
        CylinderFrame {
            scale_product: 1.0,
            rotation_sum: 0.0,
            translation: [0.0, 0.0],
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &CylinderFrame) -> CylinderFrame {
        let t = rotate(inner.translation, self.rotation_sum);
        CylinderFrame {
            scale_product: self.scale_product * inner.scale_product,
            rotation_sum: reduce_angle(self.rotation_sum + inner.rotation_sum),
            translation: [
                self.scale_product * t[0] + self.translation[0],
                self.scale_product * t[1] + self.translation[1],
            ],
        }
    }

    /// `self ∘ map`.
    pub fn then(&self, map: &Similarity) -> CylinderFrame {
        self.compose(&CylinderFrame {
            scale_product: map.scale,
            rotation_sum: map.rotation,
            translation: map.translation,
        })
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = rotate(p, self.rotation_sum);
        [
            self.scale_product * r[0] + self.translation[0],
            self.scale_product * r[1] + self.translation[1],
        ]
    }
}

pub fn compose_cylinder(rs: &RuleSet, omega_prefix: &[usize], u: &Word) -> Result<CylinderFrame> {
    u.validate(rs, omega_prefix)?;
    Ok(omega_prefix
        .iter()
        .zip(&u.symbols)
        .fold(CylinderFrame::identity(), |f, (&i, &j)| f.then(&rs.rules[i].map(j))))
}

/// Center and diameter of `f_u(reference)`.
pub fn cylinder_center_and_diameter(frame: &CylinderFrame, reference: &ReferenceSet) -> (Point, f64) {
    (
        frame.apply(reference.center()),
        reference.diameter() * frame.scale_product,
    )
}

/// Per rule: are the images of the reference set pairwise disjoint (strictly)?
pub fn check_strong_separation(rs: &RuleSet) -> Vec<bool> {
    let reference = rs.reference;
    rs.rules
        .iter()
        .map(|rule| {
            let k = rule.len();
            let child_radius = rule.scale * reference.radius();
            let centers: Vec<Point> = (0..k)
                .map(|j| rule.map(j).apply(reference.center()))
                .collect();
            (0..k).all(|a| {
                (a + 1..k).all(|b| {
                    let d = norm([centers[a][0] - centers[b][0], centers[a][1] - centers[b][1]]);
                    d > 2.0 * child_radius
                })
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// JSON representation

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TranslationJson {
    Scalar(f64),
    Planar([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleJson {
    scale: f64,
    #[serde(default)]
    rotation: f64,
    translations: Vec<TranslationJson>,
    #[serde(default)]
    probs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetJson {
    ambient_dim: usize,
    rules: Vec<RuleJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ball_radius: Option<f64>,
}

impl From<&RuleSet> for RuleSetJson {
    fn from(rs: &RuleSet) -> Self {
        let one_d = rs.ambient_dim == AmbientDim::One;
        RuleSetJson {
            ambient_dim: rs.ambient_dim.as_usize(),
            rules: rs
                .rules
                .iter()
                .map(|r| RuleJson {
                    scale: r.scale,
                    rotation: r.rotation,
                    translations: r
                        .translations
                        .iter()
                        .map(|&t| {
                            if one_d {
                                TranslationJson::Scalar(t[0])
                            } else {
                                TranslationJson::Planar(t)
                            }
                        })
                        .collect(),
                    probs: Some(r.probs.clone()),
                })
                .collect(),
            ball_radius: match rs.reference {
                ReferenceSet::Ball { radius } => Some(radius),
                ReferenceSet::UnitInterval => None,
            },
        }
    }
}

impl TryFrom<RuleSetJson> for RuleSet {
    type Error = Error;

    fn try_from(raw: RuleSetJson) -> Result<Self> {
        let dim = AmbientDim::from_usize(raw.ambient_dim)?;
        let rules = raw
            .rules
            .into_iter()
            .map(|r| {
                let translations: Vec<Point> = r
                    .translations
                    .into_iter()
                    .map(|t| match (t, dim) {
                        (TranslationJson::Scalar(x), AmbientDim::One) => Ok([x, 0.0]),
                        (TranslationJson::Planar(p), AmbientDim::Two) => Ok(p),
                        (TranslationJson::Scalar(_), AmbientDim::Two) => Err(Error::InvalidInput(
                            "planar rule sets need [x, y] translations".into(),
                        )),
                        (TranslationJson::Planar(_), AmbientDim::One) => Err(Error::InvalidInput(
                            "1-D rule sets need scalar translations".into(),
                        )),
                    })
                    .collect::<Result<_>>()?;
                match r.probs {
                    Some(p) => Rule::new(r.scale, r.rotation, translations, p),
                    None => Rule::uniform(r.scale, r.rotation, translations),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let rs = RuleSet::new(dim, rules)?;
        match raw.ball_radius {
            Some(radius) => rs.with_ball_radius(radius),
            None => Ok(rs),
        }
    }
}

/// Frequently used rule sets.
pub mod presets {
    use super::*;

    /// Middle-thirds Cantor measure with weights `p`.
    pub fn middle_thirds(p: [f64; 2]) -> RuleSet {
        cantor(1.0 / 3.0, p)
    }

    /// `{x/m, x/m + (m-1)/m}`-type Cantor rule with scale `a` and maps at `0` and `1 - a`.
    pub fn cantor(a: f64, p: [f64; 2]) -> RuleSet {
        let rule = Rule::line(a, &[0.0, 1.0 - a], p.to_vec()).expect("valid Cantor rule");
        RuleSet::new(AmbientDim::One, vec![rule]).expect("valid Cantor rule set")
    }

    /// `{x/2, x/2 + 1/2}` with uniform weights: Lebesgue measure on `[0,1]`.
    pub fn lebesgue() -> RuleSet {
        let rule = Rule::line(0.5, &[0.0, 0.5], vec![0.5, 0.5]).expect("valid rule");
        RuleSet::new(AmbientDim::One, vec![rule]).expect("valid rule set")
    }

    /// Four maps of scale `scale` placed at the corners of `[0, 1-scale]²`, uniform weights.
    pub fn four_corner(scale: f64, rotation: f64) -> RuleSet {
        let c = 1.0 - scale;
        let rule = Rule::uniform(scale, rotation, vec![[0.0, 0.0], [c, 0.0], [0.0, c], [c, c]])
            .expect("valid four-corner rule");
        RuleSet::new(AmbientDim::Two, vec![rule]).expect("valid rule set")
    }

    /// A single map fixing the origin: the attractor is a point mass.
    pub fn point_mass(ambient_dim: AmbientDim) -> RuleSet {
        let rule = Rule::new(0.5, 0.0, vec![[0.0, 0.0]], vec![1.0]).expect("valid rule");
        RuleSet::new(ambient_dim, vec![rule]).expect("valid rule set")
    }

    /// Two planar rules: scale 1/4 with two maps (rotation `alpha1`) and scale 1/3
    /// with three maps (no rotation), uniform weights, strongly separated.
    pub fn random_pair(alpha1: f64) -> RuleSet {
        let r1 = Rule::uniform(0.25, alpha1, vec![[-0.75, 0.0], [0.75, 0.0]]).expect("valid rule");
        let r2 = Rule::uniform(
            1.0 / 3.0,
            0.0,
            vec![[-0.9, -0.3], [0.9, -0.3], [0.0, 0.75]],
        )
        .expect("valid rule");
        RuleSet::new(AmbientDim::Two, vec![r1, r2]).expect("valid rule set")
    }
}
