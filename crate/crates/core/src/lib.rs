//! Unsupervised phoneme forced alignment with a forward-sum loss over a
//! monotonic state lattice, Gaussian gradient annealing and VAE-regularized
//! embeddings.

pub mod anneal;
pub mod dp;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod lattice;
pub mod nn;
pub mod special;
pub mod synth;
pub mod checks;
pub mod train;

pub use anneal::{anneal_occupancy, schedule_sigma, AnnealingSchedule};
pub use dp::{backward, forward_backward, forward_sum, occupancy, viterbi, AlignmentPath, ForwardLattice, OccupancyMatrix};
pub use error::{AlignError, Result};
pub use eval::{boundary_errors, metrics, path_to_boundaries, BoundarySet, MetricsReport, Segment};
pub use lattice::{
    build_lattice, expand_to_states, log_matching, log_position_prior, FeatureMatrix, LogLikelihoodLattice,
    PhonemeSequence, PriorParams, StateEntry, StateSequence, Vocabulary,
};
pub use train::{alignment_backward, total_loss, train_loop, TrainConfig, TrainReport, Trainer, Utterance};
