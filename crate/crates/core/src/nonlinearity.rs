//! Nonlinearities `f(x, u)` with their primitives `F(x, u)` and numerical
//! audits of the standing growth hypotheses.
//!
//! The equation needs `f` continuous in `u`, periodic in `x`, vanishing
//! faster than linearly at `u = 0`, superquadratic in the primitive at
//! infinity, polynomially bounded, and with `f(x, u)/|u|` strictly increasing
//! on each half-line. None of these can be proved for a black-box evaluator,
//! so each hypothesis gets a grid audit that emits a reproducible
//! certificate: the grid, the margins, and a witness for any failure.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeTorus, VertexFunction};

type Evaluator = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// A nonlinearity bound to a torus: `f(x, u)`, its primitive
/// `F(x, u) = integral of f(x, s) over s in [0, u]`, the growth exponent `p`
/// and the growth constant `a` of the bound `|f| <= a (|u| + |u|^{p-1})`.
#[derive(Clone)]
pub struct Nonlinearity {
    torus: Arc<LatticeTorus>,
    f: Evaluator,
    big_f: Evaluator,
    df: Option<Evaluator>,
    p: f64,
    a: f64,
    period_compatible: bool,
    odd: bool,
    /// Set when `f(x, u) = w(x) |u|^{p-2} u` exactly, in which case several
    /// variational quantities have closed forms.
    power_weight: Option<VertexFunction>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("torus", &**self.torus())
            .field("p", &self.p)
            .field("a", &self.a)
            .field("period_compatible", &self.period_compatible)
            .field("odd", &self.odd)
            .field("pure_power", &self.power_weight.is_some())
            .finish()
    }
}

/// One additive term `coeff * |u|^{exponent - 2} u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTerm {
    pub exponent: f64,
    pub coeff: f64,
}

impl Nonlinearity {
    /// The canonical model `f(x, u) = w(x) |u|^{p-2} u` with a positive
    /// `T`-periodic weight. All hypothesis audits pass by construction.
    pub fn power(p: f64, weight: VertexFunction) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::Config(format!(
                "growth exponent must exceed 2, got {p}"
            )));
        }
        weight.check_periodic("nonlinearity weight")?;
        if weight.as_slice().iter().any(|&w| w <= 0.0) {
            return Err(Error::Config("nonlinearity weight must be positive".into()));
        }
        let torus = Arc::clone(weight.torus());
        let a = weight.linf_norm();
        let wf = weight.clone();
        let wbig = weight.clone();
        let wdf = weight.clone();
        Ok(Nonlinearity {
            torus,
            f: Arc::new(move |x, u| wf.as_slice()[x] * abs_pow(u, p - 2.0) * u),
            big_f: Arc::new(move |x, u| wbig.as_slice()[x] * abs_pow(u, p) / p),
            df: Some(Arc::new(move |x, u| {
                wdf.as_slice()[x] * (p - 1.0) * abs_pow(u, p - 2.0)
            })),
            p,
            a,
            period_compatible: true,
            odd: true,
            power_weight: Some(weight),
        })
    }

    /// A sum of power terms `sum_k c_k |u|^{q_k - 2} u` with `q_k >= 2`,
    /// constant in `x`. The largest exponent must exceed 2. Coefficients may
    /// be negative, which is how the deliberately broken audit examples are
    /// built; the growth constant is `a = sum_k |c_k|`.
    pub fn power_sum(torus: Arc<LatticeTorus>, terms: &[PowerTerm]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("at least one power term is required".into()));
        }
        for t in terms {
            if !(t.exponent >= 2.0) || !t.exponent.is_finite() {
                return Err(Error::Config(format!(
                    "power term exponent must be >= 2, got {}",
                    t.exponent
                )));
            }
            if !t.coeff.is_finite() || t.coeff == 0.0 {
                return Err(Error::Config(format!(
                    "power term coefficient must be finite and nonzero, got {}",
                    t.coeff
                )));
            }
        }
        let p = terms.iter().map(|t| t.exponent).fold(f64::MIN, f64::max);
        if !(p > 2.0) {
            return Err(Error::Config(format!(
                "largest exponent must exceed 2, got {p}"
            )));
        }
        let a: f64 = terms.iter().map(|t| t.coeff.abs()).sum();
        let power_weight = match terms {
            [t] if t.coeff > 0.0 => Some(VertexFunction::constant(Arc::clone(&torus), t.coeff)),
            _ => None,
        };
        let tf = terms.to_vec();
        let tbig = terms.to_vec();
        let tdf = terms.to_vec();
        Ok(Nonlinearity {
            torus,
            f: Arc::new(move |_, u| {
                tf.iter()
                    .map(|t| t.coeff * abs_pow(u, t.exponent - 2.0) * u)
                    .sum()
            }),
            big_f: Arc::new(move |_, u| {
                tbig.iter()
                    .map(|t| t.coeff * abs_pow(u, t.exponent) / t.exponent)
                    .sum()
            }),
            df: Some(Arc::new(move |_, u| {
                tdf.iter()
                    .map(|t| t.coeff * (t.exponent - 1.0) * abs_pow(u, t.exponent - 2.0))
                    .sum()
            })),
            p,
            a,
            period_compatible: true,
            odd: true,
            power_weight,
        })
    }

    /// Wraps arbitrary evaluators. `big_f` must be the primitive of `f`
    /// vanishing at 0 (the antiderivative audit checks this); periodicity and
    /// oddness in `u` are probed on a small sample and recorded as flags.
    pub fn from_evaluators(
        torus: Arc<LatticeTorus>,
        f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        big_f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        df: Option<Evaluator>,
        p: f64,
        a: f64,
    ) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::Config(format!(
                "growth exponent must exceed 2, got {p}"
            )));
        }
        if !(a > 0.0) {
            return Err(Error::Config(format!(
                "growth constant must be positive, got {a}"
            )));
        }
        let mut nl = Nonlinearity {
            torus,
            f: Arc::new(f),
            big_f: Arc::new(big_f),
            df,
            p,
            a,
            period_compatible: false,
            odd: false,
            power_weight: None,
        };
        nl.period_compatible = nl.probe_periodicity();
        nl.odd = nl.probe_oddness();
        Ok(nl)
    }

    /// Like [`Nonlinearity::from_evaluators`] but synthesizes the primitive
    /// by adaptive quadrature of `f`, memoizing per `(x, u)`.
    pub fn from_f_with_quadrature(
        torus: Arc<LatticeTorus>,
        f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        df: Option<Evaluator>,
        p: f64,
        a: f64,
    ) -> Result<Self> {
        let f: Evaluator = Arc::new(f);
        let f_for_big = Arc::clone(&f);
        let cache: Arc<RwLock<HashMap<(usize, u64), f64>>> =
            Arc::new(RwLock::new(HashMap::new()));
        let big_f = move |x: usize, u: f64| -> f64 {
            let key = (x, u.to_bits());
            if let Some(&v) = cache.read().expect("quadrature cache poisoned").get(&key) {
                return v;
            }
            let v = adaptive_simpson(|s| f_for_big(x, s), 0.0, u, 1e-12);
            cache
                .write()
                .expect("quadrature cache poisoned")
                .insert(key, v);
            v
        };
        let mut nl = Nonlinearity {
            torus,
            f,
            big_f: Arc::new(big_f),
            df,
            p,
            a,
            period_compatible: false,
            odd: false,
            power_weight: None,
        };
        nl.period_compatible = nl.probe_periodicity();
        nl.odd = nl.probe_oddness();
        Ok(nl)
    }

    pub fn torus(&self) -> &Arc<LatticeTorus> {
        &self.torus
    }

    pub fn f(&self, vertex: usize, u: f64) -> f64 {
        (self.f)(vertex, u)
    }

    pub fn big_f(&self, vertex: usize, u: f64) -> f64 {
        (self.big_f)(vertex, u)
    }

    /// `d f / d u`, analytic when available and a central difference with
    /// step `~(1 + |u|) * 2e-6` otherwise.
    pub fn df(&self, vertex: usize, u: f64) -> f64 {
        match &self.df {
            Some(d) => d(vertex, u),
            None => {
                let h = 2e-6 * (1.0 + u.abs());
                ((self.f)(vertex, u + h) - (self.f)(vertex, u - h)) / (2.0 * h)
            }
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Whether `f(x + T e_i, u) = f(x, u)` (exact for the built-ins, probed
    /// on a sample for wrapped evaluators).
    pub fn period_compatible(&self) -> bool {
        self.period_compatible
    }

    pub fn odd(&self) -> bool {
        self.odd
    }

    /// The weight when `f` is exactly `w(x) |u|^{p-2} u`.
    pub fn power_weight(&self) -> Option<&VertexFunction> {
        self.power_weight.as_ref()
    }

    fn probe_periodicity(&self) -> bool {
        let t = self.torus.period() as i64;
        let probes = [-3.1, -0.7, 0.4, 1.9, 27.0];
        let dim = self.torus.dim();
        for &v in &self.torus.cell_representatives() {
            let coords = self.torus.coords(v);
            for axis in 0..dim {
                let mut shifted = coords.clone();
                shifted[axis] =
                    ((shifted[axis] as i64 + t).rem_euclid(self.torus.sides()[axis] as i64))
                        as usize;
                let w = self.torus.index(&shifted);
                for &u in &probes {
                    if (self.f)(v, u) != (self.f)(w, u) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn probe_oddness(&self) -> bool {
        let probes = [0.3, 1.1, 4.7, 65.0];
        for &v in &self.torus.cell_representatives() {
            for &u in &probes {
                let plus = (self.f)(v, u);
                let minus = (self.f)(v, -u);
                if (plus + minus).abs() > 1e-12 * (1.0 + plus.abs()) {
                    return false;
                }
            }
        }
        true
    }

    /// Audits the growth bound `|f(x, u)| <= a (|u| + |u|^{p-1})` on the
    /// grid, with a relative slack `tol`.
    pub fn verify_growth(&self, grid: &AuditGrid, tol: f64) -> AuditReport {
        let mut worst = f64::NEG_INFINITY;
        let mut witness = None;
        let mut checked = 0usize;
        for &v in &self.torus.cell_representatives() {
            for &m in grid.magnitudes() {
                for u in [m, -m] {
                    checked += 1;
                    let fv = (self.f)(v, u);
                    let bound = self.a * (m + m.powf(self.p - 1.0));
                    let excess = if fv.is_finite() {
                        (fv.abs() - bound * (1.0 + tol)) / bound.max(f64::MIN_POSITIVE)
                    } else {
                        f64::INFINITY
                    };
                    if excess > worst {
                        worst = excess;
                        witness = Some(AuditWitness {
                            vertex: v,
                            u,
                            lhs: fv.abs(),
                            rhs: bound,
                        });
                    }
                }
            }
        }
        let pass = worst <= 0.0;
        AuditReport {
            audit: AuditKind::GrowthBound,
            pass,
            checked_points: checked,
            margin: -worst,
            witness: if pass { None } else { witness },
            detail: format!(
                "|f| <= a(|u| + |u|^(p-1)) with a = {}, p = {}; worst relative excess {:e}",
                self.a, self.p, worst
            ),
        }
    }

    /// Audits that `f(x, u)/u` vanishes as `u -> 0`, uniformly over the cell:
    /// the sup of the ratio is evaluated on `u = 2^-j`, `j = 0..=40`, and must
    /// fall below `tol` at the finest scale.
    pub fn verify_small_o(&self, tol: f64) -> AuditReport {
        let reps = self.torus.cell_representatives();
        let mut ratios = Vec::with_capacity(41);
        let mut last_witness = None;
        for j in 0..=40 {
            let m = 2.0_f64.powi(-j);
            let mut sup = f64::NEG_INFINITY;
            for &v in &reps {
                for u in [m, -m] {
                    let r = ((self.f)(v, u) / u).abs();
                    if r > sup {
                        sup = r;
                        if j == 40 {
                            last_witness = Some(AuditWitness {
                                vertex: v,
                                u,
                                lhs: r,
                                rhs: tol,
                            });
                        }
                    }
                }
            }
            ratios.push(sup);
        }
        let first = ratios[0];
        let last = *ratios.last().expect("nonempty ratio sequence");
        let pass = last.is_finite() && last < tol;
        AuditReport {
            audit: AuditKind::VanishesAtZero,
            pass,
            checked_points: ratios.len() * reps.len() * 2,
            margin: tol - last,
            witness: if pass { None } else { last_witness },
            detail: format!(
                "sup_x |f(x,u)/u| on u = 2^-j: {first:e} at j=0, {last:e} at j=40; \
                 threshold {tol:e}"
            ),
        }
    }

    /// Audits superquadratic growth of the primitive: on the doubling grid
    /// from 1 to `u_max`, `inf_x F(x, u)/u^2` must increase strictly at every
    /// step and exceed `min_ratio` at the top.
    pub fn verify_superquadratic(&self, u_max: f64, min_ratio: f64) -> AuditReport {
        let reps = self.torus.cell_representatives();
        let mut grid = Vec::new();
        let mut m = 1.0f64;
        while m < u_max {
            grid.push(m);
            m *= 2.0;
        }
        grid.push(u_max);

        let inf_ratio = |m: f64| -> (f64, AuditWitness) {
            let mut inf = f64::INFINITY;
            let mut wit = AuditWitness {
                vertex: 0,
                u: m,
                lhs: 0.0,
                rhs: 0.0,
            };
            for &v in &reps {
                for u in [m, -m] {
                    let r = (self.big_f)(v, u) / (m * m);
                    if r < inf {
                        inf = r;
                        wit = AuditWitness {
                            vertex: v,
                            u,
                            lhs: r,
                            rhs: min_ratio,
                        };
                    }
                }
            }
            (inf, wit)
        };

        let evaluated: Vec<(f64, AuditWitness)> = grid.iter().map(|&m| inf_ratio(m)).collect();
        let mut pass = true;
        let mut witness = None;
        let mut detail = String::new();
        for k in 1..evaluated.len() {
            let (prev, _) = evaluated[k - 1];
            let (cur, ref wit) = evaluated[k];
            if !(cur > prev * (1.0 + 1e-12)) {
                pass = false;
                witness = Some(wit.clone());
                detail = format!(
                    "inf_x F/u^2 plateaus: {prev:e} at u = {:e}, {cur:e} at u = {:e}",
                    grid[k - 1],
                    grid[k]
                );
                break;
            }
        }
        let (top, top_wit) = evaluated.last().expect("nonempty grid").clone();
        if pass && !(top >= min_ratio) {
            pass = false;
            witness = Some(top_wit);
            detail = format!("inf_x F/u^2 = {top:e} at u = {u_max:e}, below {min_ratio:e}");
        }
        if pass {
            detail = format!(
                "inf_x F/u^2 strictly increasing over {} doublings, {top:e} at u = {u_max:e}",
                grid.len() - 1
            );
        }
        AuditReport {
            audit: AuditKind::Superquadratic,
            pass,
            checked_points: grid.len() * reps.len() * 2,
            margin: top - min_ratio,
            witness,
            detail,
        }
    }

    /// Audits strict monotonicity of `u -> f(x, u)/|u|` on each half-line.
    ///
    /// Consecutive grid points must increase by more than `margin`, and the
    /// one-sided values closest to zero must satisfy
    /// `f(-u_min)/u_min <= f(u_min)/u_min + margin`, which catches
    /// nonlinearities whose ratio jumps downward across 0.
    pub fn verify_monotone(&self, grid: &AuditGrid, margin: f64) -> AuditReport {
        let reps = self.torus.cell_representatives();
        let mags = grid.magnitudes();
        let mut checked = 0;
        for &v in &reps {
            // Positive half-line, ascending.
            let mut prev = f64::NEG_INFINITY;
            for &m in mags {
                let r = (self.f)(v, m) / m;
                checked += 1;
                if !(r > prev + margin) && prev.is_finite() {
                    return monotone_failure(v, m, r, prev, checked, margin, "(0, inf)");
                }
                prev = r;
            }
            // Negative half-line, ascending in u means descending magnitude.
            let mut prev = f64::NEG_INFINITY;
            for &m in mags.iter().rev() {
                let r = (self.f)(v, -m) / m;
                checked += 1;
                if !(r > prev + margin) && prev.is_finite() {
                    return monotone_failure(v, -m, r, prev, checked, margin, "(-inf, 0)");
                }
                prev = r;
            }
            // Across zero: the ratio may not drop when passing 0 upward.
            let m0 = mags[0];
            let left = (self.f)(v, -m0) / m0;
            let right = (self.f)(v, m0) / m0;
            checked += 2;
            if left > right + margin {
                return AuditReport {
                    audit: AuditKind::RatioMonotone,
                    pass: false,
                    checked_points: checked,
                    margin: right - left,
                    witness: Some(AuditWitness {
                        vertex: v,
                        u: m0,
                        lhs: left,
                        rhs: right,
                    }),
                    detail: format!(
                        "f(x,u)/|u| drops across 0: {left:e} at u = -{m0:e} vs {right:e} \
                         at u = {m0:e}"
                    ),
                };
            }
        }
        AuditReport {
            audit: AuditKind::RatioMonotone,
            pass: true,
            checked_points: checked,
            margin,
            witness: None,
            detail: format!(
                "f(x,u)/|u| strictly increasing on both half-lines (margin {margin:e})"
            ),
        }
    }

    /// The smallest grid-certified constant in
    /// `|f(x, u)| <= eps |u| + C |u|^{p-1}`.
    ///
    /// Certified only on the audited grid, and only up to evaluation
    /// precision: samples where the excess `|f| - eps |u|` sits below about
    /// `1e-13 |f|` are cancellation noise, not evidence, and count as
    /// non-binding. Errors when the objective is still climbing steeply at
    /// the top of the grid, which is how genuinely super-polynomial growth
    /// shows up here.
    pub fn epsilon_bound(&self, epsilon: f64, grid: &AuditGrid) -> Result<EpsilonBound> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let reps = self.torus.cell_representatives();
        let mags = grid.magnitudes();
        let top = *mags.last().expect("nonempty grid");
        let mut c = 0.0f64;
        let mut c_inner = 0.0f64; // over |u| <= top / 2
        let mut witness = AuditWitness {
            vertex: 0,
            u: 0.0,
            lhs: 0.0,
            rhs: 0.0,
        };
        for &v in &reps {
            for &m in mags {
                for u in [m, -m] {
                    let fv = (self.f)(v, u);
                    if !fv.is_finite() {
                        return Err(Error::UnboundedGrowth(format!(
                            "f({v}, {u:e}) is not finite"
                        )));
                    }
                    let noise = 1024.0 * f64::EPSILON * fv.abs();
                    let num = (fv.abs() - epsilon * m).max(0.0);
                    let cand = if num > noise {
                        num / m.powf(self.p - 1.0)
                    } else {
                        0.0
                    };
                    if cand > c {
                        c = cand;
                        witness = AuditWitness {
                            vertex: v,
                            u,
                            lhs: fv.abs(),
                            rhs: epsilon * m,
                        };
                    }
                    if m <= top / 2.0 && cand > c_inner {
                        c_inner = cand;
                    }
                }
            }
        }
        if !c.is_finite() || (c_inner > 0.0 && c > 10.0 * c_inner) {
            return Err(Error::UnboundedGrowth(format!(
                "(|f| - eps|u|)+ / |u|^(p-1) is {c:e} at the top of the grid but only \
                 {c_inner:e} on its lower half; no grid-certified constant"
            )));
        }
        // The certificate must actually hold where it was computed, up to the
        // declared evaluation-precision allowance.
        for &v in &reps {
            for &m in mags {
                for u in [m, -m] {
                    let fv = (self.f)(v, u).abs();
                    debug_assert!(
                        fv <= epsilon * m
                            + c * m.powf(self.p - 1.0)
                            + 1024.0 * f64::EPSILON * fv
                            + f64::MIN_POSITIVE
                    );
                }
            }
        }
        Ok(EpsilonBound {
            epsilon,
            c_epsilon: c,
            witness,
        })
    }

    /// Audits `|F(x, u) - integral of f(x, s) ds| <= tol` by adaptive
    /// quadrature on the sampled grid.
    pub fn antiderivative_audit(&self, grid: &AuditGrid, tol: f64) -> AuditReport {
        let reps = self.torus.cell_representatives();
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut checked = 0;
        for &v in &reps {
            for &m in grid.magnitudes() {
                for u in [m, -m] {
                    checked += 1;
                    let direct = (self.big_f)(v, u);
                    let quad = adaptive_simpson(|s| (self.f)(v, s), 0.0, u, 1e-10);
                    let err = (direct - quad).abs();
                    if err > worst {
                        worst = err;
                        witness = Some(AuditWitness {
                            vertex: v,
                            u,
                            lhs: direct,
                            rhs: quad,
                        });
                    }
                }
            }
        }
        let pass = worst <= tol;
        AuditReport {
            audit: AuditKind::Antiderivative,
            pass,
            checked_points: checked,
            margin: tol - worst,
            witness: if pass { None } else { witness },
            detail: format!("max |F - quadrature(f)| = {worst:e}, tolerance {tol:e}"),
        }
    }

    /// Audits the strict sign inequality `0 < F(x, u) < (1/2) f(x, u) u` for
    /// `u != 0`, the pointwise inequality behind positivity of the energy on
    /// the generalized Nehari manifold.
    ///
    /// Strictness is only meaningful where the margins exceed what the
    /// evaluators resolve in floating point, so the recommended grid is
    /// [`AuditGrid::strictness_window`] rather than the full standard grid.
    pub fn energy_sign_audit(&self, grid: &AuditGrid) -> AuditReport {
        let reps = self.torus.cell_representatives();
        let mut min_lower = f64::INFINITY;
        let mut min_upper = f64::INFINITY;
        let mut witness = None;
        let mut checked = 0;
        for &v in &reps {
            for &m in grid.magnitudes() {
                for u in [m, -m] {
                    checked += 1;
                    let big = (self.big_f)(v, u);
                    let half_fu = 0.5 * (self.f)(v, u) * u;
                    let upper = half_fu - big;
                    if big < min_lower || upper < min_upper {
                        if big.min(upper) < min_lower.min(min_upper) {
                            witness = Some(AuditWitness {
                                vertex: v,
                                u,
                                lhs: big,
                                rhs: half_fu,
                            });
                        }
                        min_lower = min_lower.min(big);
                        min_upper = min_upper.min(upper);
                    }
                }
            }
        }
        let margin = min_lower.min(min_upper);
        let pass = margin > 0.0;
        AuditReport {
            audit: AuditKind::EnergySign,
            pass,
            checked_points: checked,
            margin,
            witness: if pass { None } else { witness },
            detail: format!(
                "min F = {min_lower:e}, min (f u / 2 - F) = {min_upper:e} over the grid"
            ),
        }
    }

    /// Runs every audit with the given options.
    pub fn audit_all(&self, opts: &AuditOptions) -> AuditBundle {
        let growth = self.verify_growth(&opts.grid, opts.growth_tol);
        let small_o = self.verify_small_o(opts.small_o_tol);
        let superquadratic =
            self.verify_superquadratic(opts.superquadratic_umax, opts.superquadratic_min_ratio);
        let monotone = self.verify_monotone(&opts.monotone_grid, opts.monotone_margin);
        let antiderivative = self.antiderivative_audit(&opts.primitive_grid, opts.primitive_tol);
        let energy_sign = self.energy_sign_audit(&opts.energy_sign_grid);
        let epsilon_bounds = if growth.pass && small_o.pass {
            opts.epsilons
                .iter()
                .map(|&eps| match self.epsilon_bound(eps, &opts.grid) {
                    Ok(b) => EpsilonBoundOutcome {
                        epsilon: eps,
                        c_epsilon: Some(b.c_epsilon),
                        error: None,
                    },
                    Err(e) => EpsilonBoundOutcome {
                        epsilon: eps,
                        c_epsilon: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect()
        } else {
            Vec::new()
        };
        let all_pass = growth.pass
            && small_o.pass
            && superquadratic.pass
            && monotone.pass
            && antiderivative.pass
            && energy_sign.pass;
        AuditBundle {
            period_compatible: self.period_compatible,
            growth,
            small_o,
            superquadratic,
            monotone,
            antiderivative,
            energy_sign,
            epsilon_bounds,
            all_pass,
        }
    }
}

fn monotone_failure(
    vertex: usize,
    u: f64,
    ratio: f64,
    prev: f64,
    checked: usize,
    margin: f64,
    half_line: &str,
) -> AuditReport {
    AuditReport {
        audit: AuditKind::RatioMonotone,
        pass: false,
        checked_points: checked,
        margin: ratio - prev,
        witness: Some(AuditWitness {
            vertex,
            u,
            lhs: ratio,
            rhs: prev,
        }),
        detail: format!(
            "f(x,u)/|u| fails to increase on {half_line} at u = {u:e} \
             ({prev:e} -> {ratio:e}, margin {margin:e})"
        ),
    }
}

/// Which hypothesis an audit report speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// `|f| <= a (|u| + |u|^{p-1})`.
    GrowthBound,
    /// `f(x, u)/u -> 0` as `u -> 0`, uniformly in `x`.
    VanishesAtZero,
    /// `F(x, u)/u^2 -> inf` as `|u| -> inf`, uniformly in `x`.
    Superquadratic,
    /// `u -> f(x, u)/|u|` strictly increasing on each half-line.
    RatioMonotone,
    /// `0 < F < (1/2) f u` away from `u = 0`.
    EnergySign,
    /// `F` is the primitive of `f` vanishing at 0.
    Antiderivative,
}

/// Outcome of one hypothesis audit. `margin` is positive slack for a pass
/// and the (negative or violated) gap for a failure; `witness` pins the worst
/// sample of a failed audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub audit: AuditKind,
    pub pass: bool,
    pub checked_points: usize,
    pub margin: f64,
    pub witness: Option<AuditWitness>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditWitness {
    pub vertex: usize,
    pub u: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Grid-certified constant of `|f| <= eps |u| + C |u|^{p-1}`.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonBound {
    pub epsilon: f64,
    pub c_epsilon: f64,
    pub witness: AuditWitness,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonBoundOutcome {
    pub epsilon: f64,
    pub c_epsilon: Option<f64>,
    pub error: Option<String>,
}

/// Every audit in one report, as emitted by the command-line `assumptions`
/// subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct AuditBundle {
    pub period_compatible: bool,
    pub growth: AuditReport,
    pub small_o: AuditReport,
    pub superquadratic: AuditReport,
    pub monotone: AuditReport,
    pub antiderivative: AuditReport,
    pub energy_sign: AuditReport,
    pub epsilon_bounds: Vec<EpsilonBoundOutcome>,
    pub all_pass: bool,
}

/// Positive sample magnitudes for the audits; both signs are always probed.
#[derive(Debug, Clone)]
pub struct AuditGrid {
    magnitudes: Vec<f64>,
}

impl AuditGrid {
    /// `points` logarithmically spaced magnitudes in `[lo, hi]`.
    pub fn logarithmic(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || points < 2 {
            return Err(Error::Config(format!(
                "need 0 < lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"
            )));
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        let magnitudes = (0..points)
            .map(|k| (llo + (lhi - llo) * k as f64 / (points - 1) as f64).exp())
            .collect();
        Ok(AuditGrid { magnitudes })
    }

    /// The default audit grid: 512 points per sign, logarithmic on
    /// `[1e-8, 1e4]`.
    pub fn standard() -> Self {
        Self::logarithmic(1e-8, 1e4, 512).expect("valid bounds")
    }

    /// Grid for the strict-inequality audits (ratio monotonicity, energy
    /// sign): coarser and bounded away from zero, so that the theoretical
    /// margins of well-behaved nonlinearities stay above what the evaluators
    /// can resolve in floating point instead of drowning in rounding.
    pub fn strictness_window() -> Self {
        Self::logarithmic(1e-4, 1e4, 256).expect("valid bounds")
    }

    /// Moderate magnitudes where primitives stay far from the top of the
    /// floating-point range, keeping the quadrature comparison meaningful at
    /// absolute tolerance.
    pub fn primitive_window() -> Self {
        Self::logarithmic(1e-4, 10.0, 24).expect("valid bounds")
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }
}

/// Knobs for [`Nonlinearity::audit_all`]; the defaults match the per-audit
/// defaults documented on each method.
#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub grid: AuditGrid,
    pub monotone_grid: AuditGrid,
    pub energy_sign_grid: AuditGrid,
    pub primitive_grid: AuditGrid,
    pub growth_tol: f64,
    pub small_o_tol: f64,
    pub superquadratic_umax: f64,
    pub superquadratic_min_ratio: f64,
    pub monotone_margin: f64,
    pub primitive_tol: f64,
    pub epsilons: Vec<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            grid: AuditGrid::standard(),
            monotone_grid: AuditGrid::strictness_window(),
            energy_sign_grid: AuditGrid::strictness_window(),
            primitive_grid: AuditGrid::primitive_window(),
            growth_tol: 1e-12,
            small_o_tol: 1e-6,
            superquadratic_umax: 1e4,
            superquadratic_min_ratio: 1.0,
            monotone_margin: 1e-12,
            primitive_tol: 1e-8,
            epsilons: vec![0.1, 0.01, 0.001, 0.0001],
        }
    }
}

/// `|u|^e`, routed through `powi` for small integer exponents — these sit in
/// the hot loop of every energy evaluation, where `powf` costs an order of
/// magnitude more.
fn abs_pow(u: f64, e: f64) -> f64 {
    if e == e.trunc() && (0.0..=32.0).contains(&e) {
        u.abs().powi(e as i32)
    } else {
        u.abs().powf(e)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` (signed when `b < a`).
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (flo, fm, fhi) = (f(lo), f(m), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    sign * simpson_recurse(&f, lo, hi, flo, fm, fhi, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol * (1.0 + (left + right).abs()) {
        return left + right + err / 15.0;
    }
    simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring(l: usize, t: usize) -> Arc<LatticeTorus> {
        LatticeTorus::new(&[l], t).unwrap()
    }

    fn quartic(torus: &Arc<LatticeTorus>) -> Nonlinearity {
        Nonlinearity::power(4.0, VertexFunction::constant(Arc::clone(torus), 1.0)).unwrap()
    }

    #[test]
    fn power_evaluations() {
        let t = ring(4, 1);
        let nl = quartic(&t);
        assert_relative_eq!(nl.f(0, 2.0), 8.0);
        assert_relative_eq!(nl.big_f(0, 2.0), 4.0);
        assert_relative_eq!(nl.f(0, -2.0), -8.0);
        assert_relative_eq!(nl.big_f(0, -2.0), 4.0);
        assert_relative_eq!(nl.df(0, 2.0), 12.0);
        assert!(nl.odd());
        assert!(nl.period_compatible());
        assert!(nl.power_weight().is_some());
    }

    #[test]
    fn power_rejects_bad_parameters() {
        let t = ring(4, 1);
        let w = VertexFunction::constant(Arc::clone(&t), 1.0);
        assert!(Nonlinearity::power(2.0, w.clone()).is_err());
        let signed = VertexFunction::from_slice(t, &[1.0, -1.0, 1.0, 1.0]).unwrap();
        assert!(Nonlinearity::power(4.0, signed).is_err());
    }

    #[test]
    fn periodic_weight_is_exactly_periodic() {
        let t = ring(8, 2);
        let w = VertexFunction::from_fn(Arc::clone(&t), |c| if c[0] % 2 == 0 { 1.0 } else { 3.0 });
        let nl = Nonlinearity::power(4.0, w).unwrap();
        for v in 0..6 {
            assert_eq!(nl.f(v, 1.7), nl.f(v + 2, 1.7));
        }
        assert!(nl.period_compatible());
    }

    #[test]
    fn quartic_passes_every_audit() {
        let t = ring(4, 1);
        let bundle = quartic(&t).audit_all(&AuditOptions::default());
        assert!(bundle.growth.pass, "{}", bundle.growth.detail);
        assert!(bundle.small_o.pass, "{}", bundle.small_o.detail);
        assert!(bundle.superquadratic.pass, "{}", bundle.superquadratic.detail);
        assert!(bundle.monotone.pass, "{}", bundle.monotone.detail);
        assert!(bundle.antiderivative.pass, "{}", bundle.antiderivative.detail);
        assert!(bundle.energy_sign.pass, "{}", bundle.energy_sign.detail);
        assert!(bundle.all_pass);
        for b in &bundle.epsilon_bounds {
            let c = b.c_epsilon.expect("epsilon bound exists");
            assert!(c <= 1.0 + 1e-9 && c > 0.999, "C_eps = {c}");
        }
    }

    #[test]
    fn cubic_plus_linear_fails_exactly_the_vanishing_audit() {
        let t = ring(4, 1);
        let nl = Nonlinearity::power_sum(
            Arc::clone(&t),
            &[
                PowerTerm { exponent: 4.0, coeff: 1.0 },
                PowerTerm { exponent: 2.0, coeff: 1.0 },
            ],
        )
        .unwrap();
        assert_relative_eq!(nl.f(0, 2.0), 10.0);
        assert_relative_eq!(nl.big_f(0, 2.0), 6.0);
        let bundle = nl.audit_all(&AuditOptions::default());
        assert!(bundle.growth.pass, "{}", bundle.growth.detail);
        assert!(!bundle.small_o.pass);
        assert!(bundle.small_o.witness.is_some());
        assert!(bundle.superquadratic.pass, "{}", bundle.superquadratic.detail);
        assert!(bundle.monotone.pass, "{}", bundle.monotone.detail);
        assert!(bundle.antiderivative.pass, "{}", bundle.antiderivative.detail);
        assert!(bundle.energy_sign.pass, "{}", bundle.energy_sign.detail);
    }

    #[test]
    fn cubic_minus_linear_fails_monotonicity_across_zero() {
        let t = ring(4, 1);
        let nl = Nonlinearity::power_sum(
            Arc::clone(&t),
            &[
                PowerTerm { exponent: 4.0, coeff: 1.0 },
                PowerTerm { exponent: 2.0, coeff: -1.0 },
            ],
        )
        .unwrap();
        let report = nl.verify_monotone(&AuditGrid::strictness_window(), 1e-12);
        assert!(!report.pass, "{}", report.detail);
        assert!(report.witness.is_some());
        // It also breaks the strict energy inequality near zero.
        assert!(!nl.energy_sign_audit(&AuditGrid::standard()).pass);
    }

    #[test]
    fn softer_than_linear_power_decays_at_zero() {
        // f = |u|^0.5 u has ratio |u|^0.5 -> 0, even though its exponent is
        // too small for the growth audit's p > 2 regime.
        let t = ring(4, 1);
        let nl = Nonlinearity::from_evaluators(
            t,
            |_, u| u.abs().sqrt() * u,
            |_, u| u.abs().powf(2.5) / 2.5,
            None,
            2.5,
            1.0,
        )
        .unwrap();
        let report = nl.verify_small_o(1e-6);
        assert!(report.pass, "{}", report.detail);
    }

    #[test]
    fn exponential_fails_growth_audit() {
        let t = ring(4, 1);
        let nl = Nonlinearity::from_evaluators(
            t,
            |_, u| u.exp() - 1.0,
            |_, u| u.exp() - 1.0 - u,
            None,
            4.0,
            1.0,
        )
        .unwrap();
        let grid = AuditGrid::logarithmic(1e-2, 100.0, 64).unwrap();
        let report = nl.verify_growth(&grid, 1e-12);
        assert!(!report.pass);
        let w = report.witness.unwrap();
        assert!(w.u > 10.0, "violation should occur at large u, got {}", w.u);
        assert!(nl.epsilon_bound(0.1, &grid).is_err());
    }

    #[test]
    fn linear_map_fails_superquadratic_audit() {
        let t = ring(4, 1);
        let nl = Nonlinearity::from_evaluators(
            t,
            |_, u| u,
            |_, u| 0.5 * u * u,
            None,
            4.0,
            1.0,
        )
        .unwrap();
        let report = nl.verify_superquadratic(1e4, 1.0);
        assert!(!report.pass, "{}", report.detail);
    }

    #[test]
    fn log_enhanced_nonlinearity_passes_superquadratic_audit() {
        // f = u log(1 + u^2), F = ((1 + u^2) log(1 + u^2) - u^2) / 2.
        let t = ring(4, 1);
        let nl = Nonlinearity::from_evaluators(
            t,
            |_, u| u * (1.0 + u * u).ln(),
            |_, u| 0.5 * ((1.0 + u * u) * (1.0 + u * u).ln() - u * u),
            None,
            4.0,
            1.0,
        )
        .unwrap();
        assert!(nl.verify_superquadratic(1e4, 1.0).pass);
        assert!(nl.verify_monotone(&AuditGrid::strictness_window(), 1e-12).pass);
        assert!(nl.antiderivative_audit(&AuditGrid::primitive_window(), 1e-8).pass);
    }

    #[test]
    fn mixed_power_variant_passes_monotonicity() {
        let t = ring(4, 1);
        let nl = Nonlinearity::power_sum(
            Arc::clone(&t),
            &[
                PowerTerm { exponent: 4.0, coeff: 1.0 },
                PowerTerm { exponent: 3.0, coeff: 0.5 },
            ],
        )
        .unwrap();
        let bundle = nl.audit_all(&AuditOptions::default());
        assert!(bundle.all_pass);
    }

    #[test]
    fn epsilon_bound_matches_hand_values() {
        let t = ring(4, 1);
        let grid = AuditGrid::standard();
        let nl = quartic(&t);
        let b = nl.epsilon_bound(0.5, &grid).unwrap();
        assert!(b.c_epsilon <= 1.0 + 1e-12 && b.c_epsilon > 0.999);

        let shifted = Nonlinearity::power_sum(
            Arc::clone(&t),
            &[
                PowerTerm { exponent: 4.0, coeff: 1.0 },
                PowerTerm { exponent: 2.0, coeff: 0.1 },
            ],
        )
        .unwrap();
        // Up to cancellation noise at small grid magnitudes the certified
        // constant is exactly 1.
        let b = shifted.epsilon_bound(0.1, &grid).unwrap();
        assert_relative_eq!(b.c_epsilon, 1.0, max_relative = 1e-3);

        // C_eps is nonincreasing in eps.
        let c1 = nl.epsilon_bound(0.01, &grid).unwrap().c_epsilon;
        let c2 = nl.epsilon_bound(0.1, &grid).unwrap().c_epsilon;
        let c3 = nl.epsilon_bound(1.0, &grid).unwrap().c_epsilon;
        assert!(c1 >= c2 && c2 >= c3);
    }

    #[test]
    fn quadrature_synthesized_primitive_matches_analytic() {
        let t = ring(4, 1);
        let nl = Nonlinearity::from_f_with_quadrature(
            t,
            |_, u| u * u * u,
            None,
            4.0,
            1.0,
        )
        .unwrap();
        for &u in &[0.0, 0.3, -1.7, 4.0] {
            assert_relative_eq!(nl.big_f(0, u), u.powi(4) / 4.0, epsilon = 1e-10);
        }
        // Memoized second call returns the identical value.
        let once = nl.big_f(2, 1.234);
        let twice = nl.big_f(2, 1.234);
        assert_eq!(once, twice);
        assert!(nl.antiderivative_audit(&AuditGrid::primitive_window(), 1e-8).pass);
    }

    #[test]
    fn adaptive_simpson_handles_signed_ranges() {
        let quad = |x: f64| x * x;
        assert_relative_eq!(adaptive_simpson(quad, 0.0, 3.0, 1e-12), 9.0, epsilon = 1e-10);
        assert_relative_eq!(adaptive_simpson(quad, 3.0, 0.0, 1e-12), -9.0, epsilon = 1e-10);
        assert_relative_eq!(
            adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12),
            2.0,
            epsilon = 1e-10
        );
    }
}
