//! Entanglement measures of bipartite quantum states and channels computed
//! by semidefinite programming.
//!
//! The crate is organised bottom-up:
//!
//! - [`operators`]: dense Hermitian operators on labelled tensor factors.
//! - [`channels`]: bipartite channels as Choi operators.
//! - [`divergences`]: entropies and quantum divergences.
//! - [`sdp`]: Hermitian semidefinite programs and their solver.
//! - [`state_measures`], [`channel_measures`]: the measures themselves.
//! - [`harness`]: randomized property suites.
//! - [`format`]: the text file format for operators and channels.

pub mod channel_measures;
pub mod channels;
pub mod divergences;
pub mod error;
pub mod format;
pub mod harness;
pub mod operators;
pub mod sdp;
pub mod state_measures;

pub use error::{Error, Result};
