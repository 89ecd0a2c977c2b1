//! Shared fixtures for the benchmarks; see `benches/hot_paths.rs`.

use std::sync::Arc;

use nehari_core::solver::presets;
use nehari_core::{LatticeTorus, Problem, SchrodingerOperator, VertexFunction};

/// The reference indefinite instance: staggered potential, quartic term.
pub fn staggered_problem(side: usize) -> Problem {
    presets::staggered_problem(side, 1.0, 4.0).expect("reference instance assembles")
}

/// A free 1-D ring operator of the given side.
pub fn free_operator(side: usize) -> SchrodingerOperator {
    let torus = LatticeTorus::new(&[side], 1).expect("valid torus");
    SchrodingerOperator::new(VertexFunction::zeros(Arc::clone(&torus)))
        .expect("operator assembles")
}
