//! Reconstruction of multi-state perfect phylogenies and mixing proportions
//! from observed character-state frequency mixtures.
//!
//! The pipeline: a frequency tensor (or entrywise interval bounds on one)
//! plus one state tree per character define an instance; the cladistic
//! ancestry graph captures the admissible ancestral relationships; the
//! solutions are its threaded spanning trees satisfying the per-vertex sum
//! condition, enumerated by pruned backtracking. A cancer-specific layer
//! derives instances from VAF and copy-number measurements, a simulator
//! produces seeded ground-truth instances, and brute-force oracles verify
//! the whole stack on small inputs.

pub mod ancestry;
pub mod cli;
pub mod cna;
pub mod enumerate;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod sim;
pub mod usage;

pub use ancestry::{check_msac, check_mssc, AncestryGraph};
pub use enumerate::{enumerate, is_valid_tree, noisy_enumerate, Solution, SolutionSet};
pub use model::{
    CharStatePair, CloneTree, FrequencyIntervalTensor, FrequencyTensor, StateTree, StateTreeSet,
    UsageMatrix, Vertex,
};
pub use rational::Rational;
pub use usage::{compute_usage, generates, mix};
