//! Optimization of quantum channels in the Kraus representation.
//!
//! A channel on a `d`-dimensional system with `m` Kraus operators is stored
//! as an `(m·d)×d` stack `𝕂` of the operators; trace preservation makes the
//! stack a point of the complex Stiefel manifold St(m·d, d). This crate
//! optimizes cost functions of `𝕂` by Riemannian gradient descent with a
//! Cayley-transform retraction, and provides the surrounding experiment
//! machinery: Choi-state diagnostics, rank-reducing regularizers, quantum
//! process tomography from Pauli measurement statistics, and small quantum
//! classifiers trained on tabular data.
//!
//! Entry points:
//! - [`channel::KrausStack`] — the manifold point; [`channel::apply_channel`]
//!   for the channel action.
//! - [`opt::optimize`] — gradient descent over any [`opt::CostFunction`].
//! - [`tomo::run_tomography`] / [`tomo::grid_search_gamma`] — process
//!   tomography from (sampled or exact) measurement tables.
//! - [`qml::run_classification`] — channel-based classification of the
//!   bundled Iris/Wine datasets.
//!
//! All stochastic code draws from [`sample::Prng`] seeded explicitly;
//! batches derive per-run seeds with [`sample::derive_seed`], so results
//! never depend on thread count or scheduling.

pub mod channel;
pub mod choi;
pub mod error;
pub mod linalg;
pub mod opt;
pub mod par;
pub mod povm;
pub mod qml;
pub mod reg;
pub mod sample;
pub mod tomo;

pub use channel::{apply_channel, outcome_probabilities, DensityMatrix, KrausStack};
pub use choi::{choi_fidelity, choi_purity, choi_spectrum, choi_state, ChoiState};
pub use error::{Error, Result};
pub use opt::{optimize, CostFunction, OptimizerConfig, TrainingTrace};
pub use reg::{RegKind, Regularizer};
pub use sample::{derive_seed, sample_random_channel, sample_unitary_init, Prng};
