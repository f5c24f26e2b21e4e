//! L^q dimensions of random self-similar measures on the line and the plane,
//! of their orthogonal projections, and of convolutions of Cantor measures.
//!
//! The crate builds discretized measures from sequences of homogeneous
//! similarity rules, evaluates dyadic moment sums and their scaling
//! exponents, and checks the structural inequalities that drive the
//! dimension theory (cocycle submultiplicativity, smoothed/unsmoothed
//! equivalence, closed-form dimension formulas).

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builder;
pub mod cocycle;
pub mod convolution;
pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod formulas;
pub mod ifs;
pub mod measure;
pub mod numeric;
pub mod spectrum;

pub use builder::{
    build_measure, check_condition_c, convolve_measures, depth_for_level, project_measure, sample_omega,
    sample_omega_balanced, CylinderMass, OmegaSequence, ProductMass,
};
pub use error::{Error, Result};
pub use ifs::{presets, AmbientDim, CylinderFrame, ReferenceSet, Rule, RuleSet, Similarity, Word};
pub use measure::DyadicMeasure;
