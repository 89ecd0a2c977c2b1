//! The five subcommands: spectrum, gap-check, assumptions, solve, sweep.

use std::path::Path;

use serde_json::{json, Value};

use nehari_core::solver::{multistart_search, verify_solution, SearchOutcome, VerifyOptions};
use nehari_core::{
    AuditOptions, Error as CoreError, GapReport, Problem, SchrodingerOperator, SpectralSplit,
};

use crate::config::RunConfig;
use crate::emit::Emitter;
use crate::CliError;

fn core_err(err: CoreError) -> CliError {
    match err {
        CoreError::GapViolation { .. } => CliError::Hypothesis(err.to_string()),
        CoreError::NonConvergence { .. }
        | CoreError::InnerNonConvergence { .. }
        | CoreError::NoConvergedStarts { .. }
        | CoreError::MaximizerCollapsed { .. }
        | CoreError::UniquenessAudit { .. }
        | CoreError::Stagnation { .. } => CliError::NonConvergence(err.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

struct Instance {
    operator: SchrodingerOperator,
    report: GapReport,
    split: Option<SpectralSplit>,
}

/// Builds the operator, decomposes it, and runs the gap check once; the
/// split is present exactly when the check passed.
fn assemble(config: &RunConfig) -> Result<Instance, CliError> {
    let torus = config.build_torus()?;
    let potential = config.build_potential(&torus)?;
    let operator = SchrodingerOperator::new(potential).map_err(core_err)?;
    let eig = operator.eigendecompose().map_err(core_err)?;
    let report = eig.gap_report(config.solver.gap_tol);
    let split = if report.pass {
        Some(SpectralSplit::new(&eig, config.solver.gap_tol).map_err(core_err)?)
    } else {
        None
    };
    Ok(Instance {
        operator,
        report,
        split,
    })
}

pub fn cmd_spectrum(
    config: &RunConfig,
    out: Option<&Path>,
    plot: bool,
) -> Result<(), CliError> {
    let emitter = Emitter::new(config, out, plot)?;
    let torus = config.build_torus()?;
    let potential = config.build_potential(&torus)?;
    let operator = SchrodingerOperator::new(potential).map_err(core_err)?;
    let eig = operator.eigendecompose().map_err(core_err)?;
    let report = eig.gap_report(config.solver.gap_tol);
    let eigenvalues = eig.eigenvalues();

    let rows: Vec<Vec<String>> = eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &lambda)| vec![index.to_string(), lambda.to_string()])
        .collect();
    let csv = emitter.write_csv("spectrum.csv", &["index", "eigenvalue"], &rows)?;
    let body = json!({
        "min": eigenvalues[0],
        "max": eigenvalues[eigenvalues.len() - 1],
        "gap_report": &report,
    });
    let jsonp = emitter.write_json("spectrum.json", &Emitter::envelope(config, body))?;
    emitter.write_plot("spectrum.dat", &["index", "eigenvalue"], &rows)?;

    println!(
        "spectrum: {} eigenvalues in [{}, {}] -> {}, {}",
        eigenvalues.len(),
        eigenvalues[0],
        eigenvalues[eigenvalues.len() - 1],
        csv.display(),
        jsonp.display(),
    );
    Ok(())
}

pub fn cmd_gap_check(
    config: &RunConfig,
    out: Option<&Path>,
    plot: bool,
) -> Result<(), CliError> {
    let emitter = Emitter::new(config, out, plot)?;
    let instance = assemble(config)?;
    let report = &instance.report;
    let body = json!({ "gap_report": report });
    let path = emitter.write_json("gap_check.json", &Emitter::envelope(config, body))?;
    println!(
        "gap check: pass = {}, negative/positive dimensions = {}/{}, edges = {:?}/{:?} -> {}",
        report.pass,
        report.dim_minus,
        report.dim_plus,
        report.lambda_minus_max,
        report.lambda_plus_min,
        path.display(),
    );
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Hypothesis(format!(
            "zero is not inside a spectral gap at tolerance {:e}: offending eigenvalues {:?}",
            report.gap_tol, report.offending,
        )))
    }
}

pub fn cmd_assumptions(
    config: &RunConfig,
    out: Option<&Path>,
    plot: bool,
) -> Result<(), CliError> {
    let emitter = Emitter::new(config, out, plot)?;
    let torus = config.build_torus()?;
    let nl = config.build_nonlinearity(&torus)?;
    let bundle = nl.audit_all(&AuditOptions::default());

    let body = json!({ "audits": &bundle });
    let path = emitter.write_json("assumptions.json", &Emitter::envelope(config, body))?;
    for (name, report) in [
        ("growth", &bundle.growth),
        ("vanishing at zero", &bundle.small_o),
        ("superquadratic", &bundle.superquadratic),
        ("monotone", &bundle.monotone),
        ("antiderivative", &bundle.antiderivative),
        ("energy sign", &bundle.energy_sign),
    ] {
        println!(
            "audit {name}: {}",
            if report.pass { "pass" } else { "FAIL" }
        );
    }
    for eps in &bundle.epsilon_bounds {
        match (eps.c_epsilon, &eps.error) {
            (Some(c), _) => println!("epsilon bound {:e}: C = {c}", eps.epsilon),
            (None, err) => println!(
                "epsilon bound {:e}: unavailable ({})",
                eps.epsilon,
                err.as_deref().unwrap_or("no certificate")
            ),
        }
    }
    println!(
        "assumptions: all_pass = {} -> {}",
        bundle.all_pass,
        path.display()
    );
    Ok(())
}

/// JSON rows for the emitted solutions, in the stable field layout.
fn solution_rows(problem: &Problem, outcome: &SearchOutcome) -> Vec<Value> {
    outcome
        .solutions
        .iter()
        .map(|sol| {
            let u = &sol.point.u;
            let residual_pointwise = problem
                .phi_gradient(u)
                .expect("same torus")
                .linf_norm();
            let (on_ray, on_minus) = sol.point.residual_nehari();
            let (norm_plus, norm_minus) =
                problem.split().split_norms(u).expect("same torus");
            json!({
                "energy": sol.point.energy,
                "residual_pointwise": residual_pointwise,
                "residual_nehari": on_ray.max(on_minus),
                "norm_plus": norm_plus,
                "norm_minus": norm_minus,
                "orbit_class": sol.orbit_class,
                "values": u.as_slice(),
            })
        })
        .collect()
}

pub fn cmd_solve(
    config: &RunConfig,
    seed: Option<u64>,
    out: Option<&Path>,
    plot: bool,
) -> Result<(), CliError> {
    let emitter = Emitter::new(config, out, plot)?;
    let instance = assemble(config)?;
    let report = instance.report.clone();

    let Some(split) = instance.split else {
        let body = json!({
            "gap_report": &report,
            "solutions": [],
            "c_estimate": Value::Null,
            "diagnostics": { "failure": "gap check failed; no search attempted" },
        });
        let path = emitter.write_json("solve.json", &Emitter::envelope(config, body))?;
        println!("solve: gap check failed -> {}", path.display());
        return Err(CliError::Hypothesis(format!(
            "zero is not inside a spectral gap at tolerance {:e}: offending eigenvalues {:?}",
            report.gap_tol, report.offending,
        )));
    };

    let torus = config.build_torus()?;
    let nl = config.build_nonlinearity(&torus)?;
    let problem = Problem::new(instance.operator, split, nl).map_err(core_err)?;
    let opts = config.solve_options(seed);

    let outcome = match multistart_search(&problem, &opts) {
        Ok(outcome) => outcome,
        Err(err) => {
            let mapped = core_err(err);
            let body = json!({
                "gap_report": &report,
                "solutions": [],
                "c_estimate": Value::Null,
                "diagnostics": { "failure": mapped.to_string() },
            });
            let path = emitter.write_json("solve.json", &Emitter::envelope(config, body))?;
            println!("solve: search failed -> {}", path.display());
            return Err(mapped);
        }
    };

    let verify_opts = VerifyOptions {
        residual_tol: config.solver.residual_tol,
        level_lower_bound: Some(outcome.c_estimate),
    };
    let verifications: Vec<_> = outcome
        .solutions
        .iter()
        .map(|sol| verify_solution(&problem, &sol.point.u, &verify_opts).map_err(core_err))
        .collect::<Result<_, _>>()?;
    let n_verified = verifications.iter().filter(|v| v.pass).count();

    let body = json!({
        "gap_report": &report,
        "solutions": solution_rows(&problem, &outcome),
        "c_estimate": outcome.c_estimate,
        "diagnostics": {
            "attempted": outcome.attempted,
            "kappa": outcome.kappa,
            "reports": outcome.reports,
            "verification": verifications,
            "n_verified": n_verified,
            "seed": opts.seed,
        },
    });
    let path = emitter.write_json("solve.json", &Emitter::envelope(config, body))?;

    for sol in &outcome.solutions {
        let rows: Vec<Vec<String>> = sol
            .point
            .u
            .as_slice()
            .iter()
            .enumerate()
            .map(|(x, &v)| vec![x.to_string(), v.to_string()])
            .collect();
        emitter.write_plot(
            &format!("solve_orbit_{}.dat", sol.orbit_class),
            &["vertex", "u"],
            &rows,
        )?;
    }

    println!(
        "solve: {} orbit class(es), {} verified, lowest energy {} -> {}",
        outcome.solutions.len(),
        n_verified,
        outcome.c_estimate,
        path.display(),
    );
    if n_verified >= 1 {
        Ok(())
    } else {
        Err(CliError::NonConvergence(
            "no solution passed verification".into(),
        ))
    }
}

pub fn cmd_sweep(
    config: &RunConfig,
    seed: Option<u64>,
    out: Option<&Path>,
    plot: bool,
) -> Result<(), CliError> {
    let emitter = Emitter::new(config, out, plot)?;
    let sweep = config.sweep.as_ref().ok_or_else(|| {
        CliError::Config("a [sweep] block with `sides` is required for this command".into())
    })?;

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(sweep.sides.len());
    for &side in &sweep.sides {
        let mut sized = config.clone();
        sized.lattice.sides = vec![side; config.lattice.dim];
        sized.sweep = None;
        let row = match run_one_side(&sized, seed) {
            Ok((c_estimate, residual, n_orbits)) => vec![
                side.to_string(),
                c_estimate.to_string(),
                residual.to_string(),
                n_orbits.to_string(),
                "ok".to_string(),
            ],
            Err(err) => vec![
                side.to_string(),
                String::new(),
                String::new(),
                String::new(),
                err.to_string().replace('\n', "; "),
            ],
        };
        println!("sweep side {side}: {}", row[4]);
        rows.push(row);
    }

    let path = emitter.write_csv(
        "sweep.csv",
        &["side", "c_estimate", "residual", "n_orbits", "status"],
        &rows,
    )?;
    emitter.write_plot(
        "sweep.dat",
        &["side", "c_estimate", "residual", "n_orbits"],
        &rows
            .iter()
            .filter(|r| r[4] == "ok")
            .map(|r| r[..4].to_vec())
            .collect::<Vec<_>>(),
    )?;
    println!("sweep: {} row(s) -> {}", rows.len(), path.display());
    Ok(())
}

fn run_one_side(config: &RunConfig, seed: Option<u64>) -> Result<(f64, f64, usize), CliError> {
    let instance = assemble(config)?;
    let Some(split) = instance.split else {
        return Err(CliError::Hypothesis(format!(
            "gap check failed: offending eigenvalues {:?}",
            instance.report.offending
        )));
    };
    let torus = config.build_torus()?;
    let nl = config.build_nonlinearity(&torus)?;
    let problem = Problem::new(instance.operator, split, nl).map_err(core_err)?;
    let outcome = multistart_search(&problem, &config.solve_options(seed)).map_err(core_err)?;
    let ground = outcome.ground_state();
    let residual = problem
        .phi_gradient(&ground.point.u)
        .map_err(core_err)?
        .linf_norm();
    if residual > config.solver.residual_tol {
        return Err(CliError::NonConvergence(format!(
            "ground-state residual {residual:e} exceeds {:e}",
            config.solver.residual_tol
        )));
    }
    Ok((outcome.c_estimate, residual, outcome.solutions.len()))
}
