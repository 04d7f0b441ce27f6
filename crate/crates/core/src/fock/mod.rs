//! Truncated multimode Fock space: mode layouts, sparse kets, weighted
//! ensembles and passive mode transforms.

mod dump;
mod ket;
mod layout;
mod transform;

pub use dump::{format_ensemble_dump, format_state_dump, parse_ensemble_dump, parse_state_dump};
pub use ket::{inner_product, project_mode_count, MixedEnsemble, PureKet, NORM_TOLERANCE};
pub use layout::{ModeLayout, Occupation, PolarizationPair, DEFAULT_N_MAX, MAX_CUTOFF, MAX_MODES};
pub use transform::{
    apply_mode_unitary, apply_pair_unitary, exp_series, expand_photons, ModeMatrix, UNITARY_TOLERANCE,
};
