//! Pinned multistart behavior on the reference staggered instance. The
//! values were measured once from converged runs (residuals at machine
//! precision, stable across seeds 0/7/42) and are locked here so that any
//! drift in the optimizer or the orbit partition shows up as a failure.

mod common;

use nehari_core::solver::{multistart_search, SolveOptions};
use nehari_core::InnerOptions;

#[test]
fn staggered_census_with_32_starts_finds_four_orbit_classes() {
    let prob = common::staggered16();
    let opts = SolveOptions {
        n_starts: 32,
        seed: 7,
        tol_grad: 1e-10,
        inner: InnerOptions {
            tol: 1e-12,
            ..InnerOptions::default()
        },
        ..SolveOptions::default()
    };
    let outcome = multistart_search(&prob, &opts).unwrap();

    assert!(
        outcome.solutions.len() >= 2,
        "expected geometrically distinct critical orbits, found {}",
        outcome.solutions.len()
    );
    assert_eq!(outcome.solutions.len(), 4, "orbit census changed");

    let pinned = [
        1.044834093670548,
        2.0,
        5.714345509914844,
        17.999999999999979,
    ];
    for (sol, want) in outcome.solutions.iter().zip(&pinned) {
        assert!(
            (sol.point.energy - want).abs() <= 1e-9,
            "class {}: energy {} drifted from {}",
            sol.orbit_class,
            sol.point.energy,
            want
        );
    }

    assert!(outcome.solutions[0].hits >= 24, "ground orbit basin shrank");
    let failed = outcome
        .reports
        .iter()
        .filter(|r| r.orbit_class.is_none())
        .count();
    assert_eq!(failed, 0, "every start used to converge");
    let kappa = outcome.kappa.expect("more than one orbit");
    assert!(
        (kappa - 2.3776550156882488).abs() <= 1e-6,
        "orbit separation drifted: {kappa}"
    );
}
