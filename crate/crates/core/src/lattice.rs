//! Finite periodic truncations of the integer lattice and the discrete
//! calculus on them.
//!
//! A [`LatticeTorus`] is the product of cyclic groups `Z_{L_1} x ... x Z_{L_N}`
//! with nearest-neighbour edges and unit weights, together with a declared
//! data period `T` dividing every side. Real-valued data on the vertices is a
//! [`VertexFunction`]; the combinatorial Laplacian, the gradient form, the
//! `l^p` norms and the discrete `W^{1,2}` inner product all live here.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Finite torus `Z_{L_1} x ... x Z_{L_N}` with a declared cell period `T`.
///
/// Vertices are indexed row-major: the last axis varies fastest. Each vertex
/// has exactly `2N` neighbours (sides are at least 3, so the two neighbours
/// along an axis are distinct).
#[derive(Clone)]
pub struct LatticeTorus {
    sides: Vec<usize>,
    period: usize,
    vertex_count: usize,
    /// Flat neighbour table with stride `2 * dim`: for vertex `v` and axis `i`,
    /// entry `v * 2 * dim + 2 * i` is the `-e_i` neighbour and the next entry
    /// is the `+e_i` neighbour.
    neighbors: Vec<usize>,
}

impl fmt::Debug for LatticeTorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeTorus")
            .field("sides", &self.sides)
            .field("period", &self.period)
            .field("vertex_count", &self.vertex_count)
            .finish()
    }
}

impl PartialEq for LatticeTorus {
    fn eq(&self, other: &Self) -> bool {
        self.sides == other.sides && self.period == other.period
    }
}

impl Eq for LatticeTorus {}

impl LatticeTorus {
    /// Builds the torus with the given side lengths and data period.
    ///
    /// Every side must be at least 3 and divisible by `period`, so that
    /// `T`-periodic data and the translation action by multiples of `T` are
    /// well defined.
    pub fn new(sides: &[usize], period: usize) -> Result<Arc<Self>> {
        if sides.is_empty() {
            return Err(Error::Config("at least one axis is required".into()));
        }
        if period == 0 {
            return Err(Error::Config("period must be positive".into()));
        }
        for (i, &l) in sides.iter().enumerate() {
            if l < 3 {
                return Err(Error::Config(format!(
                    "side {i} has length {l}; every side must be at least 3"
                )));
            }
            if l % period != 0 {
                return Err(Error::Config(format!(
                    "side {i} has length {l}, not divisible by the period {period}"
                )));
            }
        }
        let vertex_count: usize = sides.iter().product();
        let dim = sides.len();

        let mut neighbors = vec![0usize; vertex_count * 2 * dim];
        let mut coords = vec![0usize; dim];
        for v in 0..vertex_count {
            Self::unravel(sides, v, &mut coords);
            for axis in 0..dim {
                let l = sides[axis];
                let orig = coords[axis];
                coords[axis] = (orig + l - 1) % l;
                neighbors[v * 2 * dim + 2 * axis] = Self::ravel(sides, &coords);
                coords[axis] = (orig + 1) % l;
                neighbors[v * 2 * dim + 2 * axis + 1] = Self::ravel(sides, &coords);
                coords[axis] = orig;
            }
        }

        Ok(Arc::new(LatticeTorus {
            sides: sides.to_vec(),
            period,
            vertex_count,
            neighbors,
        }))
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Number of distinct translations by multiples of the period along each
    /// axis, i.e. the size of the translation group `prod_i (L_i / T)`.
    pub fn translation_count(&self) -> usize {
        self.sides.iter().map(|l| l / self.period).product()
    }

    fn ravel(sides: &[usize], coords: &[usize]) -> usize {
        let mut idx = 0;
        for (c, l) in coords.iter().zip(sides) {
            idx = idx * l + c;
        }
        idx
    }

    fn unravel(sides: &[usize], mut idx: usize, coords: &mut [usize]) {
        for axis in (0..sides.len()).rev() {
            coords[axis] = idx % sides[axis];
            idx /= sides[axis];
        }
    }

    /// Row-major linear index of the vertex with the given coordinates.
    pub fn index(&self, coords: &[usize]) -> usize {
        assert_eq!(coords.len(), self.dim(), "coordinate arity mismatch");
        for (c, l) in coords.iter().zip(&self.sides) {
            assert!(c < l, "coordinate {c} out of range for side {l}");
        }
        Self::ravel(&self.sides, coords)
    }

    /// Coordinates of the vertex with the given linear index.
    pub fn coords(&self, index: usize) -> Vec<usize> {
        assert!(index < self.vertex_count, "vertex index out of range");
        let mut coords = vec![0usize; self.dim()];
        Self::unravel(&self.sides, index, &mut coords);
        coords
    }

    /// The `2N` neighbours of a vertex, ordered `(-e_1, +e_1, -e_2, +e_2, ...)`.
    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        let stride = 2 * self.dim();
        &self.neighbors[vertex * stride..(vertex + 1) * stride]
    }

    /// Index of the cell `(x mod T, ...)` of a vertex inside the fundamental
    /// period cell, row-major with side `T` along every axis.
    pub fn cell_index(&self, vertex: usize) -> usize {
        let coords = self.coords(vertex);
        let mut idx = 0;
        for c in coords {
            idx = idx * self.period + c % self.period;
        }
        idx
    }

    /// Number of vertices in the fundamental period cell, `T^N`.
    pub fn cell_volume(&self) -> usize {
        self.period.pow(self.dim() as u32)
    }

    /// One vertex per periodicity cell: the vertices with all coordinates
    /// below `T`, ordered by cell index.
    pub fn cell_representatives(&self) -> Vec<usize> {
        let dim = self.dim();
        let t = self.period;
        let mut reps = Vec::with_capacity(self.cell_volume());
        let mut cell = vec![0usize; dim];
        loop {
            reps.push(Self::ravel(&self.sides, &cell));
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return reps;
                }
                axis -= 1;
                cell[axis] += 1;
                if cell[axis] < t {
                    break;
                }
                cell[axis] = 0;
            }
        }
    }
}

/// A real-valued function on the vertices of a torus.
#[derive(Clone, PartialEq)]
pub struct VertexFunction {
    torus: Arc<LatticeTorus>,
    values: DVector<f64>,
}

impl fmt::Debug for VertexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VertexFunction")
            .field("torus", &*self.torus)
            .field("values", &self.values.as_slice())
            .finish()
    }
}

impl VertexFunction {
    pub fn new(torus: Arc<LatticeTorus>, values: DVector<f64>) -> Result<Self> {
        if values.len() != torus.vertex_count() {
            return Err(Error::Config(format!(
                "value vector has length {}, torus has {} vertices",
                values.len(),
                torus.vertex_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("values must be finite".into()));
        }
        Ok(VertexFunction { torus, values })
    }

    pub fn from_slice(torus: Arc<LatticeTorus>, values: &[f64]) -> Result<Self> {
        Self::new(torus, DVector::from_column_slice(values))
    }

    /// Evaluates `f` at the coordinates of every vertex.
    pub fn from_fn(torus: Arc<LatticeTorus>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n = torus.vertex_count();
        let mut values = DVector::zeros(n);
        for v in 0..n {
            values[v] = f(&torus.coords(v));
        }
        VertexFunction { torus, values }
    }

    pub fn zeros(torus: Arc<LatticeTorus>) -> Self {
        let n = torus.vertex_count();
        VertexFunction {
            torus,
            values: DVector::zeros(n),
        }
    }

    pub fn constant(torus: Arc<LatticeTorus>, c: f64) -> Self {
        let n = torus.vertex_count();
        VertexFunction {
            torus,
            values: DVector::from_element(n, c),
        }
    }

    /// Kronecker delta at a vertex.
    pub fn delta(torus: Arc<LatticeTorus>, vertex: usize) -> Self {
        let mut u = Self::zeros(torus);
        u.values[vertex] = 1.0;
        u
    }

    pub fn torus(&self) -> &Arc<LatticeTorus> {
        &self.torus
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn same_torus(&self, other: &VertexFunction) -> bool {
        Arc::ptr_eq(&self.torus, &other.torus) || *self.torus == *other.torus
    }

    fn require_same_torus(&self, other: &VertexFunction, what: &str) -> Result<()> {
        if self.same_torus(other) {
            Ok(())
        } else {
            Err(Error::TorusMismatch(format!(
                "{what}: {:?} vs {:?}",
                *self.torus, *other.torus
            )))
        }
    }

    /// Combinatorial Laplacian, `(Lap u)(x) = sum_{y ~ x} (u(y) - u(x))`.
    pub fn laplacian(&self) -> VertexFunction {
        let n = self.len();
        let deg = 2.0 * self.torus.dim() as f64;
        let mut out = DVector::zeros(n);
        for v in 0..n {
            let mut acc = -deg * self.values[v];
            for &y in self.torus.neighbors(v) {
                acc += self.values[y];
            }
            out[v] = acc;
        }
        VertexFunction {
            torus: Arc::clone(&self.torus),
            values: out,
        }
    }

    /// Pointwise gradient form
    /// `Gamma(u, v)(x) = 1/2 sum_{y ~ x} (u(y) - u(x)) (v(y) - v(x))`.
    pub fn gradient_form(&self, other: &VertexFunction) -> Result<VertexFunction> {
        self.require_same_torus(other, "gradient form")?;
        let n = self.len();
        let mut out = DVector::zeros(n);
        for v in 0..n {
            let mut acc = 0.0;
            for &y in self.torus.neighbors(v) {
                acc += (self.values[y] - self.values[v]) * (other.values[y] - other.values[v]);
            }
            out[v] = 0.5 * acc;
        }
        Ok(VertexFunction {
            torus: Arc::clone(&self.torus),
            values: out,
        })
    }

    /// `l^p` norm with respect to counting measure; `p` must be in `[1, inf]`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Domain(format!("l^p norm needs p >= 1, got {p}")));
        }
        if p == f64::INFINITY {
            return Ok(self.values.amax());
        }
        if p == 1.0 {
            return Ok(self.values.iter().map(|v| v.abs()).sum());
        }
        if p == 2.0 {
            return Ok(self.values.norm());
        }
        // Scale out the sup to keep intermediate powers in range.
        let m = self.values.amax();
        if m == 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = self.values.iter().map(|v| (v.abs() / m).powf(p)).sum();
        Ok(m * sum.powf(1.0 / p))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.amax()
    }

    pub fn l2_inner(&self, other: &VertexFunction) -> Result<f64> {
        self.require_same_torus(other, "l2 inner product")?;
        Ok(self.values.dot(&other.values))
    }

    /// Discrete `W^{1,2}` inner product,
    /// `sum_x (Gamma(u, v)(x) + u(x) v(x))`.
    pub fn w12_inner(&self, other: &VertexFunction) -> Result<f64> {
        self.require_same_torus(other, "W^{1,2} inner product")?;
        let n = self.len();
        let mut acc = 0.0;
        for v in 0..n {
            let mut g = 0.0;
            for &y in self.torus.neighbors(v) {
                g += (self.values[y] - self.values[v]) * (other.values[y] - other.values[v]);
            }
            acc += 0.5 * g + self.values[v] * other.values[v];
        }
        Ok(acc)
    }

    pub fn w12_norm(&self) -> f64 {
        self.w12_inner(self).expect("same torus").sqrt()
    }

    /// Translation by `shift` cells: the result is `x -> u(x - shift * T)`.
    pub fn translate(&self, shift: &[i64]) -> VertexFunction {
        let dim = self.torus.dim();
        assert_eq!(shift.len(), dim, "shift arity mismatch");
        let t = self.torus.period() as i64;
        let n = self.len();
        let mut out = DVector::zeros(n);
        let mut coords = vec![0usize; dim];
        let mut src = vec![0usize; dim];
        for v in 0..n {
            LatticeTorus::unravel(&self.torus.sides, v, &mut coords);
            for i in 0..dim {
                let l = self.torus.sides[i] as i64;
                let c = coords[i] as i64 - shift[i] * t;
                src[i] = c.rem_euclid(l) as usize;
            }
            out[v] = self.values[LatticeTorus::ravel(&self.torus.sides, &src)];
        }
        VertexFunction {
            torus: Arc::clone(&self.torus),
            values: out,
        }
    }

    /// Checks that the values are `T`-periodic along every axis.
    pub fn check_periodic(&self, quantity: &'static str) -> Result<()> {
        let dim = self.torus.dim();
        let t = self.torus.period();
        let mut coords = vec![0usize; dim];
        for v in 0..self.len() {
            LatticeTorus::unravel(&self.torus.sides, v, &mut coords);
            for axis in 0..dim {
                let orig = coords[axis];
                coords[axis] = (orig + t) % self.torus.sides[axis];
                let w = LatticeTorus::ravel(&self.torus.sides, &coords);
                coords[axis] = orig;
                if self.values[v] != self.values[w] {
                    return Err(Error::NotPeriodic {
                        quantity,
                        period: t,
                        vertex: v,
                        axis,
                        value: self.values[v],
                        translated: self.values[w],
                    });
                }
            }
        }
        Ok(())
    }

    /// `self + alpha * other`, panicking on a torus mismatch.
    pub fn axpy(&self, alpha: f64, other: &VertexFunction) -> VertexFunction {
        assert!(self.same_torus(other), "torus mismatch in axpy");
        VertexFunction {
            torus: Arc::clone(&self.torus),
            values: &self.values + alpha * &other.values,
        }
    }

    pub fn scale(&self, alpha: f64) -> VertexFunction {
        VertexFunction {
            torus: Arc::clone(&self.torus),
            values: alpha * &self.values,
        }
    }
}

impl std::ops::Add for &VertexFunction {
    type Output = VertexFunction;
    fn add(self, rhs: &VertexFunction) -> VertexFunction {
        self.axpy(1.0, rhs)
    }
}

impl std::ops::Sub for &VertexFunction {
    type Output = VertexFunction;
    fn sub(self, rhs: &VertexFunction) -> VertexFunction {
        self.axpy(-1.0, rhs)
    }
}

impl std::ops::Neg for &VertexFunction {
    type Output = VertexFunction;
    fn neg(self) -> VertexFunction {
        self.scale(-1.0)
    }
}
