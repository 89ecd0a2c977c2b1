#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use nehari_core::solver::presets;
use nehari_core::{LatticeTorus, Problem, VertexFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_function(torus: &Arc<LatticeTorus>, rng: &mut ChaCha8Rng, half_width: f64) -> VertexFunction {
    VertexFunction::from_fn(Arc::clone(torus), |_| rng.random_range(-half_width..half_width))
}

/// Unit direction on the sphere of the positive subspace, in eigenbasis
/// coordinates.
pub fn random_sphere_direction(prob: &Problem, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let dim = prob.split().dim_plus();
    let c = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let norm = prob.plus_inner(&c, &c).sqrt();
    c / norm
}

pub fn staggered16() -> Problem {
    presets::staggered_problem(16, 1.0, 4.0).expect("valid instance")
}

pub fn definite8() -> Problem {
    presets::definite_problem(8, 4.0).expect("valid instance")
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol * (1.0 + hi.abs()) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}
