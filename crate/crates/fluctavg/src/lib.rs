//! Fluctuation averaging for random band matrices: sampling, resolvent
//! identities, control parameters, graph monomials, the expansion algorithm,
//! a Monte Carlo verifier and the command-line front end.

pub mod ensemble;
pub mod linalg;
pub mod resolvent;
pub mod control;
pub mod stats;
pub mod graphs;
pub mod expansion;
pub mod verifier;
pub mod cli;
