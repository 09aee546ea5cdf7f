//! Hermite eigenfunctions of `L = Delta - (1/2) y . grad + 1`, the cutoff
//! `chi`, the decomposition of `q` and membership in the shrinking set.

mod decompose;
mod hermite;
mod shrinking;

pub use decompose::{cutoff_chi, decompose, smoothstep_bridge, Decomposer, ModeDecomposition};
pub use hermite::{orthogonality_matrix, orthogonality_defect, HermiteBasis};
pub use shrinking::{Component, Membership, ShrinkingSetSpec};
