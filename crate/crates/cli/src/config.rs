//! Run configuration: a strict TOML schema (unknown keys are fatal) plus
//! builders that turn a parsed config into core objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use nehari_core::solver::presets;
use nehari_core::{
    InnerOptions, LatticeTorus, Nonlinearity, PowerTerm, SolveOptions, VertexFunction,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Number of axes; must equal `sides.len()`.
    pub dim: usize,
    /// Torus extent per axis; every side must be a multiple of `period`.
    pub sides: Vec<usize>,
    /// Periodicity cell width shared by the potential and the weights.
    pub period: usize,
}

/// `kind = "constant" | "staggered" | "table"`; exactly the fields of the
/// chosen kind may be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    /// `constant`: the uniform value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// `staggered`: amplitude `v` of `(-1)^(x_1+...+x_N) v - 2N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// `table`: one value per periodicity cell (`period^dim` entries,
    /// ordered by cell index), extended periodically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

/// `kind = "power" | "table"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: String,
    /// `power`: growth exponent (> 2) of `w(x) |u|^(p-2) u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// `power`: uniform weight (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// `power`: per-cell weights (`period^dim` entries), exclusive with
    /// `weight`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cells: Option<Vec<f64>>,
    /// `table`: sum of power terms `coeff |u|^(p-2) u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub p: f64,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_grad: f64,
    pub max_iters: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub flow_step: f64,
    pub orbit_tol: f64,
    pub fold_sign_orbit: bool,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub inner_agree_tol: f64,
    /// Spectral-gap tolerance around zero.
    pub gap_tol: f64,
    /// Pointwise residual bound a solution must meet to count as verified.
    pub residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let solve = SolveOptions::default();
        let inner = InnerOptions::default();
        SolverConfig {
            tol_grad: solve.tol_grad,
            max_iters: solve.max_iters,
            n_starts: solve.n_starts,
            seed: solve.seed,
            flow_step: solve.flow_step,
            orbit_tol: solve.orbit_tol,
            fold_sign_orbit: solve.fold_sign_orbit,
            inner_tol: inner.tol,
            inner_max_iters: inner.max_iters,
            inner_agree_tol: inner.agree_tol,
            gap_tol: 1e-8,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; overridden by `--out`.
    pub dir: PathBuf,
    /// Also write gnuplot-ready plain columns; overridden by
    /// `--emit-plot-data`.
    pub emit_plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            emit_plot_data: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Torus sides to solve on (applied to every axis); each must be a
    /// multiple of the period.
    pub sides: Vec<usize>,
}

fn only(kind: &str, field: &str, present: bool, wanted: bool) -> Result<(), CliError> {
    if present && !wanted {
        Err(CliError::Config(format!(
            "field `{field}` is not accepted for kind = \"{kind}\""
        )))
    } else if !present && wanted {
        Err(CliError::Config(format!(
            "kind = \"{kind}\" requires field `{field}`"
        )))
    } else {
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("in {}:\n{e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let lat = &self.lattice;
        if lat.dim != lat.sides.len() {
            return Err(CliError::Config(format!(
                "lattice.dim = {} but lattice.sides has {} entries",
                lat.dim,
                lat.sides.len()
            )));
        }
        if lat.period == 0 {
            return Err(CliError::Config("lattice.period must be positive".into()));
        }
        for (axis, &side) in lat.sides.iter().enumerate() {
            if side == 0 || side % lat.period != 0 {
                return Err(CliError::Config(format!(
                    "lattice.sides[{axis}] = {side} is not a positive multiple of \
                     lattice.period = {}",
                    lat.period
                )));
            }
        }
        let cells = lat.period.pow(lat.dim as u32);

        let pot = &self.potential;
        match pot.kind.as_str() {
            "constant" => {
                only("constant", "potential.value", pot.value.is_some(), true)?;
                only("constant", "potential.v", pot.v.is_some(), false)?;
                only("constant", "potential.values", pot.values.is_some(), false)?;
            }
            "staggered" => {
                only("staggered", "potential.v", pot.v.is_some(), true)?;
                only("staggered", "potential.value", pot.value.is_some(), false)?;
                only("staggered", "potential.values", pot.values.is_some(), false)?;
                if lat.period != 2 {
                    return Err(CliError::Config(format!(
                        "a staggered potential alternates with period 2, but \
                         lattice.period = {}",
                        lat.period
                    )));
                }
            }
            "table" => {
                only("table", "potential.values", pot.values.is_some(), true)?;
                only("table", "potential.value", pot.value.is_some(), false)?;
                only("table", "potential.v", pot.v.is_some(), false)?;
                let n = pot.values.as_ref().expect("checked above").len();
                if n != cells {
                    return Err(CliError::Config(format!(
                        "potential.values has {n} entries but one periodicity cell \
                         holds {cells} vertices"
                    )));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "potential.kind must be \"constant\", \"staggered\" or \"table\", \
                     got \"{other}\""
                )));
            }
        }

        let nl = &self.nonlinearity;
        match nl.kind.as_str() {
            "power" => {
                only("power", "nonlinearity.p", nl.p.is_some(), true)?;
                only("power", "nonlinearity.terms", nl.terms.is_some(), false)?;
                if nl.weight.is_some() && nl.weight_cells.is_some() {
                    return Err(CliError::Config(
                        "nonlinearity.weight and nonlinearity.weight_cells are exclusive"
                            .into(),
                    ));
                }
                let p = nl.p.expect("checked above");
                if !(p > 2.0) {
                    return Err(CliError::Config(format!(
                        "nonlinearity.p must exceed 2, got {p}"
                    )));
                }
                if let Some(cells_w) = &nl.weight_cells {
                    if cells_w.len() != cells {
                        return Err(CliError::Config(format!(
                            "nonlinearity.weight_cells has {} entries but one \
                             periodicity cell holds {cells} vertices",
                            cells_w.len()
                        )));
                    }
                }
            }
            "table" => {
                only("table", "nonlinearity.terms", nl.terms.is_some(), true)?;
                only("table", "nonlinearity.p", nl.p.is_some(), false)?;
                only("table", "nonlinearity.weight", nl.weight.is_some(), false)?;
                only(
                    "table",
                    "nonlinearity.weight_cells",
                    nl.weight_cells.is_some(),
                    false,
                )?;
                if nl.terms.as_ref().expect("checked above").is_empty() {
                    return Err(CliError::Config(
                        "nonlinearity.terms must not be empty".into(),
                    ));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "nonlinearity.kind must be \"power\" or \"table\", got \"{other}\""
                )));
            }
        }

        if let Some(sweep) = &self.sweep {
            if sweep.sides.is_empty() {
                return Err(CliError::Config("sweep.sides must not be empty".into()));
            }
            for &side in &sweep.sides {
                if side == 0 || side % lat.period != 0 {
                    return Err(CliError::Config(format!(
                        "sweep side {side} is not a positive multiple of \
                         lattice.period = {}",
                        lat.period
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn build_torus(&self) -> Result<Arc<LatticeTorus>, CliError> {
        LatticeTorus::new(&self.lattice.sides, self.lattice.period)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build_potential(&self, torus: &Arc<LatticeTorus>) -> Result<VertexFunction, CliError> {
        match self.potential.kind.as_str() {
            "constant" => Ok(VertexFunction::constant(
                Arc::clone(torus),
                self.potential.value.expect("validated"),
            )),
            "staggered" => Ok(presets::staggered_potential(
                torus,
                self.potential.v.expect("validated"),
            )),
            _ => {
                let cells = self.potential.values.as_ref().expect("validated");
                let per_vertex: Vec<f64> = (0..torus.vertex_count())
                    .map(|x| cells[torus.cell_index(x)])
                    .collect();
                VertexFunction::from_slice(Arc::clone(torus), &per_vertex)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn build_nonlinearity(&self, torus: &Arc<LatticeTorus>) -> Result<Nonlinearity, CliError> {
        match self.nonlinearity.kind.as_str() {
            "power" => {
                let p = self.nonlinearity.p.expect("validated");
                let weight = match &self.nonlinearity.weight_cells {
                    Some(cells) => {
                        let per_vertex: Vec<f64> = (0..torus.vertex_count())
                            .map(|x| cells[torus.cell_index(x)])
                            .collect();
                        VertexFunction::from_slice(Arc::clone(torus), &per_vertex)
                            .map_err(|e| CliError::Config(e.to_string()))?
                    }
                    None => VertexFunction::constant(
                        Arc::clone(torus),
                        self.nonlinearity.weight.unwrap_or(1.0),
                    ),
                };
                Nonlinearity::power(p, weight).map_err(|e| CliError::Config(e.to_string()))
            }
            _ => {
                let terms: Vec<PowerTerm> = self
                    .nonlinearity
                    .terms
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .map(|t| PowerTerm {
                        exponent: t.p,
                        coeff: t.coeff,
                    })
                    .collect();
                Nonlinearity::power_sum(Arc::clone(torus), &terms)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn solve_options(&self, seed_override: Option<u64>) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            tol_grad: s.tol_grad,
            max_iters: s.max_iters,
            n_starts: s.n_starts,
            seed: seed_override.unwrap_or(s.seed),
            flow_step: s.flow_step,
            orbit_tol: s.orbit_tol,
            fold_sign_orbit: s.fold_sign_orbit,
            inner: InnerOptions {
                tol: s.inner_tol,
                max_iters: s.inner_max_iters,
                agree_tol: s.inner_agree_tol,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"
            [lattice]
            dim = 1
            sides = [16]
            period = 2

            [potential]
            kind = "staggered"
            v = 1.0

            [nonlinearity]
            kind = "power"
            p = 4.0
        "#
        .to_string()
    }

    #[test]
    fn parses_and_round_trips() {
        let config: RunConfig = toml::from_str(&minimal()).unwrap();
        config.validate().unwrap();
        let text = toml::to_string(&config).unwrap();
        let again: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = minimal() + "\n[solver]\ntypo_field = 1\n";
        let err = toml::from_str::<RunConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("typo_field"), "{err}");
    }

    #[test]
    fn rejects_cross_kind_fields() {
        let text = minimal().replace("v = 1.0", "v = 1.0\nvalue = 3.0");
        let config: RunConfig = toml::from_str(&text).unwrap();
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("potential.value"), "{err}");
    }

    #[test]
    fn rejects_side_not_divisible_by_period() {
        let text = minimal().replace("sides = [16]", "sides = [15]");
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn builds_the_reference_problem() {
        let config: RunConfig = toml::from_str(&minimal()).unwrap();
        let torus = config.build_torus().unwrap();
        let potential = config.build_potential(&torus).unwrap();
        assert_eq!(potential.values()[0], -1.0);
        assert_eq!(potential.values()[1], -3.0);
        let nl = config.build_nonlinearity(&torus).unwrap();
        assert_eq!(nl.p(), 4.0);
    }
}
