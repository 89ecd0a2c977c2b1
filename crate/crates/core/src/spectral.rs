//! The operator `L = -Lap + V`, its spectrum, and the splitting of the
//! function space into the positive and negative spectral subspaces.
//!
//! For periodic potentials the torus spectrum can be cross-checked against a
//! Bloch (quasimomentum) decomposition of the infinite-lattice operator: on
//! commensurate momentum grids the two agree as multisets, which is the main
//! correctness oracle for this module.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DMatrixView, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeTorus, VertexFunction};

/// Relative Frobenius tolerance for the eigendecomposition reconstruction
/// `Q diag(lambda) Q^T = L`.
pub const EIGEN_RECONSTRUCTION_TOL: f64 = 1e-8;

/// Default tolerance below which an eigenvalue counts as "at zero" and the
/// spectral-gap condition fails.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// The Schrödinger operator `L u = -Lap u + V u` on a torus.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    torus: Arc<LatticeTorus>,
    potential: VertexFunction,
    matrix: DMatrix<f64>,
}

impl SchrodingerOperator {
    /// Assembles the operator from a potential, which must be periodic with
    /// the period declared by its torus.
    pub fn new(potential: VertexFunction) -> Result<Self> {
        potential.check_periodic("potential")?;
        let torus = Arc::clone(potential.torus());
        let n = torus.vertex_count();
        let deg = 2.0 * torus.dim() as f64;
        let mut matrix = DMatrix::zeros(n, n);
        for v in 0..n {
            matrix[(v, v)] = deg + potential.as_slice()[v];
            for &y in torus.neighbors(v) {
                matrix[(v, y)] -= 1.0;
            }
        }
        Ok(SchrodingerOperator {
            torus,
            potential,
            matrix,
        })
    }

    pub fn torus(&self) -> &Arc<LatticeTorus> {
        &self.torus
    }

    pub fn potential(&self) -> &VertexFunction {
        &self.potential
    }

    /// Dense symmetric matrix of the operator in the vertex basis.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, u: &VertexFunction) -> Result<VertexFunction> {
        let minus_lap = -&u.laplacian();
        let mut out = minus_lap.values().clone();
        for v in 0..out.len() {
            out[v] += self.potential.as_slice()[v] * u.as_slice()[v];
        }
        VertexFunction::new(Arc::clone(&self.torus), out)
    }

    /// The quadratic form `(L u, u)` in the counting-measure inner product.
    pub fn quadratic_form(&self, u: &VertexFunction) -> Result<f64> {
        self.apply(u)?.l2_inner(u)
    }

    /// Full symmetric eigendecomposition, eigenvalues ascending.
    ///
    /// The decomposition is verified by reconstructing the matrix; the error
    /// must stay below [`EIGEN_RECONSTRUCTION_TOL`] in relative Frobenius
    /// norm, otherwise this fails rather than hand back a dubious basis.
    pub fn eigendecompose(&self) -> Result<Eigensystem> {
        let eig = self
            .matrix
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;

        let n = self.matrix.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }

        let system = Eigensystem {
            torus: Arc::clone(&self.torus),
            eigenvalues,
            eigenvectors,
        };
        let rel = system.reconstruction_error(&self.matrix);
        if rel > EIGEN_RECONSTRUCTION_TOL {
            return Err(Error::Eigensolver(format!(
                "reconstruction error {rel:e} exceeds {EIGEN_RECONSTRUCTION_TOL:e}"
            )));
        }
        Ok(system)
    }
}

/// Sorted eigendecomposition of a Schrödinger operator.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    torus: Arc<LatticeTorus>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn torus(&self) -> &Arc<LatticeTorus> {
        &self.torus
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `j` paired with eigenvalue `j`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, j: usize) -> VertexFunction {
        VertexFunction::new(Arc::clone(&self.torus), self.eigenvectors.column(j).into_owned())
            .expect("eigenvector length matches torus")
    }

    /// Relative Frobenius error of `Q diag(lambda) Q^T` against `matrix`.
    pub fn reconstruction_error(&self, matrix: &DMatrix<f64>) -> f64 {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eigenvalues[j];
        }
        let reconstructed = &scaled * self.eigenvectors.transpose();
        let denom = matrix.norm().max(f64::MIN_POSITIVE);
        (reconstructed - matrix).norm() / denom
    }

    /// Classifies the spectrum around zero without failing.
    pub fn gap_report(&self, gap_tol: f64) -> GapReport {
        let mut offending = Vec::new();
        let mut dim_minus = 0;
        let mut dim_plus = 0;
        for &l in self.eigenvalues.iter() {
            if l <= -gap_tol {
                dim_minus += 1;
            } else if l >= gap_tol {
                dim_plus += 1;
            } else {
                offending.push(l);
            }
        }
        let lambda_minus_max = (dim_minus > 0).then(|| self.eigenvalues[dim_minus - 1]);
        let lambda_plus_min =
            (dim_plus > 0).then(|| self.eigenvalues[self.eigenvalues.len() - dim_plus]);
        let abs_max = self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let abs_min = self
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, l| m.min(l.abs()));
        GapReport {
            pass: offending.is_empty(),
            gap_tol,
            lambda_minus_max,
            lambda_plus_min,
            alpha: abs_max,
            beta: abs_min,
            dim_minus,
            dim_plus,
            offending,
        }
    }

    /// Hard gap check: errors unless every eigenvalue stays at distance
    /// `gap_tol` from zero.
    pub fn check_gap(&self, gap_tol: f64) -> Result<GapReport> {
        let report = self.gap_report(gap_tol);
        if report.pass {
            Ok(report)
        } else {
            Err(Error::GapViolation {
                gap_tol,
                offending: report.offending,
            })
        }
    }
}

/// Outcome of the spectral-gap classification of an eigensystem.
///
/// `alpha` and `beta` are the extreme absolute eigenvalues; they are the
/// instance constants in the equivalence between the spectral norm and the
/// counting-measure norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub pass: bool,
    pub gap_tol: f64,
    pub lambda_minus_max: Option<f64>,
    pub lambda_plus_min: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub dim_minus: usize,
    pub dim_plus: usize,
    pub offending: Vec<f64>,
}

/// Orthogonal splitting `E = E^+ (+) E^-` along the sign of the spectrum,
/// together with the equivalent inner product `<u, v> = sum_j |lambda_j| c_j d_j`
/// in eigencoordinates.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    torus: Arc<LatticeTorus>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    split: usize,
    report: GapReport,
}

impl SpectralSplit {
    /// Builds the splitting, failing when zero is not safely inside a gap.
    pub fn new(eigensystem: &Eigensystem, gap_tol: f64) -> Result<Self> {
        let report = eigensystem.check_gap(gap_tol)?;
        Ok(SpectralSplit {
            torus: Arc::clone(eigensystem.torus()),
            eigenvalues: eigensystem.eigenvalues().clone(),
            eigenvectors: eigensystem.eigenvectors().clone(),
            split: report.dim_minus,
            report,
        })
    }

    pub fn torus(&self) -> &Arc<LatticeTorus> {
        &self.torus
    }

    pub fn report(&self) -> &GapReport {
        &self.report
    }

    pub fn dim_minus(&self) -> usize {
        self.split
    }

    pub fn dim_plus(&self) -> usize {
        self.eigenvalues.len() - self.split
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Eigenvalues of the negative subspace, ascending.
    pub fn eigenvalues_minus(&self) -> &[f64] {
        &self.eigenvalues.as_slice()[..self.split]
    }

    pub fn eigenvalues_plus(&self) -> &[f64] {
        &self.eigenvalues.as_slice()[self.split..]
    }

    /// Counting-measure-orthonormal basis of `E^-`, as matrix columns.
    pub fn minus_basis(&self) -> DMatrixView<'_, f64> {
        self.eigenvectors.columns(0, self.split)
    }

    pub fn plus_basis(&self) -> DMatrixView<'_, f64> {
        self.eigenvectors.columns(self.split, self.dim_plus())
    }

    pub fn basis_vector(&self, j: usize) -> VertexFunction {
        VertexFunction::new(Arc::clone(&self.torus), self.eigenvectors.column(j).into_owned())
            .expect("basis vector length matches torus")
    }

    fn require_torus(&self, u: &VertexFunction, what: &str) -> Result<()> {
        if Arc::ptr_eq(u.torus(), &self.torus) || **u.torus() == *self.torus {
            Ok(())
        } else {
            Err(Error::TorusMismatch(format!(
                "{what}: {:?} vs {:?}",
                **u.torus(),
                *self.torus
            )))
        }
    }

    /// Eigenbasis coefficients of `u`.
    pub fn coeffs(&self, u: &VertexFunction) -> Result<DVector<f64>> {
        self.require_torus(u, "eigenbasis coefficients")?;
        Ok(self.eigenvectors.tr_mul(u.values()))
    }

    /// Reassembles a vertex function from eigenbasis coefficients.
    pub fn from_coeffs(&self, coeffs: &DVector<f64>) -> VertexFunction {
        VertexFunction::new(Arc::clone(&self.torus), &self.eigenvectors * coeffs)
            .expect("coefficient length matches torus")
    }

    /// Projections `(u^+, u^-)` onto the positive and negative subspaces.
    pub fn split_parts(&self, u: &VertexFunction) -> Result<(VertexFunction, VertexFunction)> {
        let mut c = self.coeffs(u)?;
        let mut c_minus = c.clone();
        for j in self.split..c.len() {
            c_minus[j] = 0.0;
        }
        for j in 0..self.split {
            c[j] = 0.0;
        }
        Ok((self.from_coeffs(&c), self.from_coeffs(&c_minus)))
    }

    pub fn project_plus(&self, u: &VertexFunction) -> Result<VertexFunction> {
        Ok(self.split_parts(u)?.0)
    }

    pub fn project_minus(&self, u: &VertexFunction) -> Result<VertexFunction> {
        Ok(self.split_parts(u)?.1)
    }

    /// The equivalent inner product `sum_j |lambda_j| c_j d_j`.
    pub fn equiv_inner(&self, u: &VertexFunction, v: &VertexFunction) -> Result<f64> {
        let cu = self.coeffs(u)?;
        let cv = self.coeffs(v)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(cu.iter().zip(cv.iter()))
            .map(|(l, (a, b))| l.abs() * a * b)
            .sum())
    }

    pub fn equiv_norm(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.equiv_inner(u, u)?.max(0.0).sqrt())
    }

    /// Equivalent norms of the two projections, `(|u^+|, |u^-|)`, computed in
    /// one pass through the eigencoordinates.
    pub fn split_norms(&self, u: &VertexFunction) -> Result<(f64, f64)> {
        let c = self.coeffs(u)?;
        Ok(self.split_norms_from_coeffs(&c))
    }

    pub fn split_norms_from_coeffs(&self, c: &DVector<f64>) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (j, (&l, &cj)) in self.eigenvalues.iter().zip(c.iter()).enumerate() {
            let term = l.abs() * cj * cj;
            if j < self.split {
                minus += term;
            } else {
                plus += term;
            }
        }
        (plus.sqrt(), minus.sqrt())
    }

    /// `(L u, u)` evaluated as `sum_j lambda_j c_j^2`; cross-checks the
    /// operator route through the quadratic form.
    pub fn l_form_from_coeffs(&self, c: &DVector<f64>) -> f64 {
        self.eigenvalues
            .iter()
            .zip(c.iter())
            .map(|(l, cj)| l * cj * cj)
            .sum()
    }

    /// Dense matrix of the orthogonal projector onto `E^+`.
    pub fn projector_plus_matrix(&self) -> DMatrix<f64> {
        let q = self.plus_basis();
        &q * q.transpose()
    }

    pub fn projector_minus_matrix(&self) -> DMatrix<f64> {
        let q = self.minus_basis();
        &q * q.transpose()
    }
}

/// One quasimomentum sample of a Bloch spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct BlochPoint {
    pub theta: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Spectrum of the periodic infinite-lattice operator sampled on a uniform
/// quasimomentum grid.
///
/// With `samples_per_axis = L / T` the union of the samples reproduces the
/// spectrum of the torus operator with sides `L` exactly, as a multiset.
#[derive(Debug, Clone, Serialize)]
pub struct BlochSpectrum {
    pub dim: usize,
    pub period: usize,
    pub samples_per_axis: usize,
    pub points: Vec<BlochPoint>,
}

impl BlochSpectrum {
    pub fn band_count(&self) -> usize {
        self.points.first().map_or(0, |p| p.eigenvalues.len())
    }

    /// Values of band `b` across all momentum samples.
    pub fn band(&self, b: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.eigenvalues[b]).collect()
    }

    /// `(min, max)` of band `b` over the sampled momenta.
    pub fn band_range(&self, b: usize) -> (f64, f64) {
        let band = self.band(b);
        let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// All sampled eigenvalues as one ascending multiset.
    pub fn all_eigenvalues_sorted(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .points
            .iter()
            .flat_map(|p| p.eigenvalues.iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// Samples the Bloch decomposition of `-Lap + V` for a `T`-periodic potential
/// given by its values on the fundamental cell (row-major, side `T` per axis).
///
/// For each quasimomentum `theta` on the uniform grid
/// `{2 pi m / samples : m < samples}^N`, the `T^N x T^N` Hermitian cell
/// operator carries hopping `-1` inside the cell and phase factors
/// `e^{+- i theta_i}` on hops that wrap the cell along axis `i`.
pub fn bloch_spectrum(
    dim: usize,
    period: usize,
    cell_potential: &[f64],
    samples_per_axis: usize,
) -> Result<BlochSpectrum> {
    if dim == 0 {
        return Err(Error::Config("at least one axis is required".into()));
    }
    if period == 0 {
        return Err(Error::Config("period must be positive".into()));
    }
    let cell_n = period.pow(dim as u32);
    if cell_potential.len() != cell_n {
        return Err(Error::Config(format!(
            "cell potential has {} values, expected {cell_n}",
            cell_potential.len()
        )));
    }
    if samples_per_axis == 0 {
        return Err(Error::Config("at least one momentum sample is required".into()));
    }

    let cell_sides = vec![period; dim];
    let mut points = Vec::with_capacity(samples_per_axis.pow(dim as u32));
    let mut grid_index = vec![0usize; dim];
    loop {
        let theta: Vec<f64> = grid_index
            .iter()
            .map(|&m| 2.0 * std::f64::consts::PI * m as f64 / samples_per_axis as f64)
            .collect();
        points.push(BlochPoint {
            eigenvalues: cell_operator_eigenvalues(&cell_sides, cell_potential, &theta)?,
            theta,
        });

        // Odometer increment over the momentum grid, last axis fastest.
        let mut axis = dim;
        loop {
            if axis == 0 {
                return Ok(BlochSpectrum {
                    dim,
                    period,
                    samples_per_axis,
                    points,
                });
            }
            axis -= 1;
            grid_index[axis] += 1;
            if grid_index[axis] < samples_per_axis {
                break;
            }
            grid_index[axis] = 0;
        }
    }
}

fn cell_operator_eigenvalues(
    cell_sides: &[usize],
    cell_potential: &[f64],
    theta: &[f64],
) -> Result<Vec<f64>> {
    let dim = cell_sides.len();
    let t = cell_sides[0];
    let n = cell_potential.len();
    let deg = 2.0 * dim as f64;
    let mut h = DMatrix::<Complex<f64>>::zeros(n, n);

    let mut coords = vec![0usize; dim];
    for a in 0..n {
        {
            let mut idx = a;
            for axis in (0..dim).rev() {
                coords[axis] = idx % t;
                idx /= t;
            }
        }
        h[(a, a)] += Complex::new(deg + cell_potential[a], 0.0);
        for axis in 0..dim {
            for dir in [-1i64, 1i64] {
                let c = coords[axis] as i64 + dir;
                let (wrapped, phase) = if c < 0 {
                    (t - 1, Complex::from_polar(1.0, -theta[axis]))
                } else if c as usize >= t {
                    (0, Complex::from_polar(1.0, theta[axis]))
                } else {
                    (c as usize, Complex::new(1.0, 0.0))
                };
                let orig = coords[axis];
                coords[axis] = wrapped;
                let b = coords.iter().fold(0usize, |acc, &ci| acc * t + ci);
                coords[axis] = orig;
                h[(a, b)] -= phase;
            }
        }
    }

    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("Hermitian cell eigensolver did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn free_ring(l: usize) -> SchrodingerOperator {
        let t = LatticeTorus::new(&[l], 1).unwrap();
        SchrodingerOperator::new(VertexFunction::zeros(t)).unwrap()
    }

    #[test]
    fn free_laplacian_spectrum_on_ring() {
        // Eigenvalues of -Lap on Z_L are 2 - 2 cos(2 pi k / L).
        let op = free_ring(8);
        let eigs = op.eigendecompose().unwrap();
        let mut expected: Vec<f64> = (0..8)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (got, want) in eigs.eigenvalues().iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn operator_matrix_matches_apply() {
        let t = LatticeTorus::new(&[4, 4], 2).unwrap();
        let v = VertexFunction::from_fn(Arc::clone(&t), |c| {
            if (c[0] % 2 + c[1] % 2) % 2 == 0 {
                1.5
            } else {
                -0.5
            }
        });
        let op = SchrodingerOperator::new(v).unwrap();
        let u = VertexFunction::from_fn(t, |c| (c[0] as f64 + 0.3).cos() * (c[1] as f64 - 1.1));
        let via_matrix = op.matrix() * u.values();
        let via_stencil = op.apply(&u).unwrap();
        assert_relative_eq!((via_matrix - via_stencil.values()).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_aperiodic_potential() {
        let t = LatticeTorus::new(&[4], 2).unwrap();
        let v = VertexFunction::from_slice(t, &[1.0, -1.0, 1.0, -0.9]).unwrap();
        assert!(matches!(
            SchrodingerOperator::new(v),
            Err(Error::NotPeriodic { .. })
        ));
    }

    #[test]
    fn gap_check_flags_zero_modes() {
        // The free Laplacian has the constant zero mode.
        let op = free_ring(4);
        let eigs = op.eigendecompose().unwrap();
        let report = eigs.gap_report(DEFAULT_GAP_TOL);
        assert!(!report.pass);
        assert_eq!(report.offending.len(), 1);
        assert_eq!(report.dim_minus, 0);
        assert_eq!(report.dim_plus, 3);
        assert!(matches!(
            eigs.check_gap(DEFAULT_GAP_TOL),
            Err(Error::GapViolation { .. })
        ));
    }

    #[test]
    fn staggered_potential_opens_a_gap() {
        // V(x) = (-1)^x - 2 on Z_16: spectrum is +-sqrt(3 + 2 cos k),
        // so the bands are [-sqrt(5), -1] and [1, sqrt(5)].
        let t = LatticeTorus::new(&[16], 2).unwrap();
        let v = VertexFunction::from_fn(t, |c| if c[0] % 2 == 0 { -1.0 } else { -3.0 });
        let op = SchrodingerOperator::new(v).unwrap();
        let eigs = op.eigendecompose().unwrap();
        let report = eigs.check_gap(DEFAULT_GAP_TOL).unwrap();
        assert_eq!(report.dim_minus, 8);
        assert_eq!(report.dim_plus, 8);
        assert_relative_eq!(report.lambda_minus_max.unwrap(), -1.0, epsilon = 1e-10);
        assert_relative_eq!(report.lambda_plus_min.unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(report.alpha, 5.0f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(report.beta, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn projections_are_orthogonal_and_sum_back() {
        let t = LatticeTorus::new(&[16], 2).unwrap();
        let v = VertexFunction::from_fn(Arc::clone(&t), |c| if c[0] % 2 == 0 { -1.0 } else { -3.0 });
        let op = SchrodingerOperator::new(v).unwrap();
        let split = SpectralSplit::new(&op.eigendecompose().unwrap(), DEFAULT_GAP_TOL).unwrap();

        let u = VertexFunction::from_fn(t, |c| ((c[0] * c[0]) as f64 * 0.37).sin());
        let (up, um) = split.split_parts(&u).unwrap();
        assert_relative_eq!((&(&up + &um) - &u).l2_norm(), 0.0, epsilon = 1e-12);
        assert!(up.l2_inner(&um).unwrap().abs() < 1e-12);
        assert!(split.equiv_inner(&up, &um).unwrap().abs() < 1e-12);

        // Idempotence of the projector matrices.
        let p = split.projector_plus_matrix();
        assert_relative_eq!((&p * &p - &p).norm(), 0.0, epsilon = 1e-10);
        let q = split.projector_minus_matrix();
        assert_relative_eq!((&p * &q).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn equiv_norm_is_the_l_form_up_to_signs() {
        let t = LatticeTorus::new(&[16], 2).unwrap();
        let v = VertexFunction::from_fn(Arc::clone(&t), |c| if c[0] % 2 == 0 { -1.0 } else { -3.0 });
        let op = SchrodingerOperator::new(v).unwrap();
        let split = SpectralSplit::new(&op.eigendecompose().unwrap(), DEFAULT_GAP_TOL).unwrap();
        let u = VertexFunction::from_fn(t, |c| 1.0 / (1.0 + c[0] as f64));
        let c = split.coeffs(&u).unwrap();
        let (np, nm) = split.split_norms_from_coeffs(&c);
        let via_form = split.l_form_from_coeffs(&c);
        assert_relative_eq!(np * np - nm * nm, via_form, max_relative = 1e-12);
        let op_form = op.quadratic_form(&u).unwrap();
        assert_relative_eq!(via_form, op_form, max_relative = 1e-10);
    }

    #[test]
    fn bloch_free_band_is_two_minus_two_cosine() {
        let b = bloch_spectrum(1, 1, &[0.0], 64).unwrap();
        assert_eq!(b.band_count(), 1);
        for p in &b.points {
            assert_relative_eq!(p.eigenvalues[0], 2.0 - 2.0 * p.theta[0].cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn bloch_staggered_bands_in_closed_form() {
        // Cell potential (v - 2, -v - 2) at v = 1: bands +-sqrt(v^2 + 2 + 2 cos k).
        let b = bloch_spectrum(1, 2, &[-1.0, -3.0], 32).unwrap();
        assert_eq!(b.band_count(), 2);
        for p in &b.points {
            let want = (3.0 + 2.0 * p.theta[0].cos()).sqrt();
            assert_relative_eq!(p.eigenvalues[0], -want, epsilon = 1e-12);
            assert_relative_eq!(p.eigenvalues[1], want, epsilon = 1e-12);
        }
        let (lo0, hi0) = b.band_range(0);
        let (lo1, hi1) = b.band_range(1);
        assert_relative_eq!(lo0, -5.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(hi0, -1.0, epsilon = 1e-12);
        assert_relative_eq!(lo1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(hi1, 5.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn commensurate_bloch_samples_reproduce_torus_spectrum() {
        let t = LatticeTorus::new(&[12], 2).unwrap();
        let v = VertexFunction::from_fn(t, |c| if c[0] % 2 == 0 { 0.7 } else { -1.9 });
        let op = SchrodingerOperator::new(v).unwrap();
        let torus_spec = op.eigendecompose().unwrap().eigenvalues().clone();
        let bloch = bloch_spectrum(1, 2, &[0.7, -1.9], 6).unwrap();
        let sampled = bloch.all_eigenvalues_sorted();
        assert_eq!(sampled.len(), torus_spec.len());
        for (a, b) in sampled.iter().zip(torus_spec.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }
}
