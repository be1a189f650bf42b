//! Evolutionary neuro-fuzzy optimisation of Takagi-Sugeno fuzzy inference
//! systems.
//!
//! A grid-partitioned TS rule base is encoded into a layered chromosome
//! (membership shapes, angular-coded consequents, rule selection bits, the
//! Schweizer-Sklar T-norm exponent and the learning hyperparameters). A
//! rank-selection evolutionary loop with elitism and non-uniform mutation
//! searches over it, and every candidate is refined by a few epochs of
//! gradient descent whose result is written back into its genes. A
//! backpropagation MLP is provided as the comparison baseline.

pub mod dataset;
pub mod error;
pub mod evolution;
pub mod fuzzy;
pub mod genome;
pub mod inference;
pub mod local_search;
pub mod mlp;

pub use error::{Error, Result};
