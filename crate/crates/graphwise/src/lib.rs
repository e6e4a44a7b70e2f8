//! Structural hypothesis testing for Gaussian graphical models: graph
//! primitives, precision-matrix models, CLIME estimation, bootstrap
//! inference, witness tests, and computable minimax lower bounds.

pub mod estimation;
pub mod graphs;
pub mod harness;
pub mod inference;
pub mod lowerbound;
pub mod matrix_io;
pub mod model;
pub mod seeds;
pub mod witness;
