//! Dense Goldfarb–Idnani dual active-set solver for
//!
//! ```text
//! minimize ½ xᵀ G x + aᵀ x   subject to   l ≤ C x ≤ u
//! ```
//!
//! with `G` positive definite. Rows with `l_i = u_i` are equalities; infinite
//! bounds disable a side. The expensive parts (Cholesky factor `L`, `J = L⁻ᵀ`
//! and the QR data of the equality basis) live in a [`FactorCache`] that can
//! be reused while `G` and `C` are kept frozen and only `a`, `l`, `u` change.
//!
//! Active constraints are stored as `nᵀ x ≥ b`: the lower side of a row uses
//! `n = C_i, b = l_i`, the upper side `n = -C_i, b = -u_i`. For the active
//! normals `N`, `Jᵀ N = Q [R; 0]` and `M = J Q = [M₁ | M₂]`, so the primal
//! step is `z = M₂ M₂ᵀ n⁺` and the dual step `r = R⁻¹ M₁ᵀ n⁺`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, dot, Matrix};
use crate::math;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("Hessian is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("equality row {row} is linearly dependent on the previous equalities")]
    DependentEquality { row: usize },
    #[error("constraint normal is linearly dependent on the active basis")]
    DependentNormal,
    #[error("basis position {0} holds an equality and cannot be dropped")]
    DropEquality(usize),
    #[error("basis position {0} is out of range")]
    BadPosition(usize),
    #[error("dimension mismatch: {what} is {actual}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, actual: usize },
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Scaled feasibility tolerance: a row side is violated when its violation
    /// exceeds `tol_c (1 + ‖C_i‖)`.
    pub tol_c: f64,
    /// Dual tolerance on multipliers and step ratios.
    pub tol_d: f64,
    pub max_iter: usize,
    /// Start from the previous active set instead of the equalities only.
    pub warm_start: bool,
    /// Cache age above which [`FactorCache::exceeds_threshold`] reports true.
    pub refactor_threshold: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_c: 1e-8, tol_d: 1e-10, max_iter: 1000, warm_start: false, refactor_threshold: usize::MAX }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol_c > 0.0) || !(self.tol_d > 0.0) {
            return Err(SolverError::BadConfig("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::BadConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Borrowed problem data.
#[derive(Clone, Copy, Debug)]
pub struct QpProblem<'a> {
    pub g: &'a Matrix,
    pub a: &'a [f64],
    pub c: &'a Matrix,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl<'a> QpProblem<'a> {
    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn m(&self) -> usize {
        self.c.rows()
    }

    /// Rows with `l_i = u_i` (finite).
    pub fn equality_rows(&self) -> Vec<usize> {
        equality_rows(self.lower, self.upper)
    }

    fn check(&self) -> Result<(), SolverError> {
        let (n, m) = (self.n(), self.m());
        let dims = [
            ("G columns", n, self.g.cols()),
            ("a", n, self.a.len()),
            ("C columns", n, self.c.cols()),
            ("l", m, self.lower.len()),
            ("u", m, self.upper.len()),
        ];
        for (what, expected, actual) in dims {
            if expected != actual {
                return Err(SolverError::Dimension { what, expected, actual });
            }
        }
        Ok(())
    }
}

pub fn equality_rows(lower: &[f64], upper: &[f64]) -> Vec<usize> {
    lower.iter().zip(upper).enumerate().filter(|(_, (l, u))| l == u && l.is_finite()).map(|(i, _)| i).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
    Equality,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Upper => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActiveConstraint {
    pub row: usize,
    pub side: Side,
}

/// Active basis: `Mᵀ` stored row-wise (row `j` is column `j` of `M = J Q`)
/// and the leading `q × q` block of the upper-triangular `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    mt: Matrix,
    r: Matrix,
    active: Vec<ActiveConstraint>,
    n_eq: usize,
}

impl Basis {
    fn empty(jmat: &Matrix) -> Self {
        let n = jmat.rows();
        Basis { mt: jmat.transpose(), r: Matrix::zeros(n, n), active: Vec::new(), n_eq: 0 }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active(&self) -> &[ActiveConstraint] {
        &self.active
    }

    /// Number of leading equality members (never dropped).
    pub fn n_equalities(&self) -> usize {
        self.n_eq
    }

    /// `M` as an `n × n` matrix.
    pub fn m_matrix(&self) -> Matrix {
        self.mt.transpose()
    }

    /// Leading `q × q` block of `R`.
    pub fn r_matrix(&self) -> Matrix {
        let q = self.len();
        let mut out = Matrix::zeros(q, q);
        for i in 0..q {
            out.row_mut(i).copy_from_slice(&self.r.row(i)[..q]);
        }
        out
    }

    /// `d = Mᵀ n`.
    fn project(&self, normal: &[f64], d: &mut [f64]) {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = dot(self.mt.row(j), normal);
        }
    }

    fn rotate_columns(&mut self, j: usize, c: f64, s: f64) {
        let n = self.mt.cols();
        for k in 0..n {
            let a = self.mt[(j, k)];
            let b = self.mt[(j + 1, k)];
            self.mt[(j, k)] = c * a + s * b;
            self.mt[(j + 1, k)] = -s * a + c * b;
        }
    }

    /// Appends a normal given `d = Mᵀ n`. `d` is overwritten.
    fn add_projected(&mut self, d: &mut [f64], entry: ActiveConstraint, tol: f64) -> Result<(), SolverError> {
        let n = d.len();
        let q = self.len();
        if q >= n {
            return Err(SolverError::DependentNormal);
        }
        let scale = linalg::norm2(d);
        let tail = linalg::norm2(&d[q..]);
        if !(tail > tol * scale.max(1.0)) {
            return Err(SolverError::DependentNormal);
        }
        for j in (q + 1..n).rev() {
            if d[j] == 0.0 {
                continue;
            }
            let h = math::hypot(d[j - 1], d[j]);
            let (c, s) = (d[j - 1] / h, d[j] / h);
            d[j - 1] = h;
            d[j] = 0.0;
            self.rotate_columns(j - 1, c, s);
        }
        if d[q] < 0.0 {
            d[q] = -d[q];
            for v in self.mt.row_mut(q) {
                *v = -*v;
            }
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(entry);
        if entry.side == Side::Equality {
            self.n_eq += 1;
        }
        Ok(())
    }

    fn drop_at(&mut self, k: usize) -> Result<(), SolverError> {
        let q = self.len();
        if k >= q {
            return Err(SolverError::BadPosition(k));
        }
        if self.active[k].side == Side::Equality {
            return Err(SolverError::DropEquality(k));
        }
        // shift columns k+1.. of R left by one: Hessenberg from column k
        for col in k..q - 1 {
            for i in 0..=col + 1 {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for i in k..q - 1 {
            let (a, b) = (self.r[(i, i)], self.r[(i + 1, i)]);
            if b != 0.0 {
                let h = math::hypot(a, b);
                let (c, s) = (a / h, b / h);
                for col in i..q - 1 {
                    let (x, y) = (self.r[(i, col)], self.r[(i + 1, col)]);
                    self.r[(i, col)] = c * x + s * y;
                    self.r[(i + 1, col)] = -s * x + c * y;
                }
                self.r[(i + 1, i)] = 0.0;
                self.rotate_columns(i, c, s);
            }
            if self.r[(i, i)] < 0.0 {
                for col in i..q - 1 {
                    self.r[(i, col)] = -self.r[(i, col)];
                }
                for v in self.mt.row_mut(i) {
                    *v = -*v;
                }
            }
        }
        self.active.remove(k);
        Ok(())
    }

    /// `R⁻¹ v` for the leading block, in place.
    fn solve_r(&self, v: &mut [f64]) {
        let q = v.len();
        for i in (0..q).rev() {
            let mut s = v[i];
            for k in i + 1..q {
                s -= self.r[(i, k)] * v[k];
            }
            v[i] = s / self.r[(i, i)];
        }
    }

    /// `R⁻ᵀ v` for the leading block, in place.
    fn solve_rt(&self, v: &mut [f64]) {
        let q = v.len();
        for i in 0..q {
            let mut s = v[i];
            for k in 0..i {
                s -= self.r[(k, i)] * v[k];
            }
            v[i] = s / self.r[(i, i)];
        }
    }
}

/// Factorization data reusable while `G` and `C` stay frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorCache {
    l: Matrix,
    jmat: Matrix,
    eq_basis: Basis,
    basis: Basis,
    row_norms: Vec<f64>,
    age: usize,
    n: usize,
    m: usize,
}

/// Builds the cache: Cholesky factor of `G`, `J = L⁻ᵀ` and the QR data of the
/// equality rows activated in order.
pub fn factorize(g: &Matrix, c: &Matrix, equality_rows: &[usize]) -> Result<FactorCache, SolverError> {
    let n = g.rows();
    if g.cols() != n {
        return Err(SolverError::Dimension { what: "G columns", expected: n, actual: g.cols() });
    }
    if c.cols() != n {
        return Err(SolverError::Dimension { what: "C columns", expected: n, actual: c.cols() });
    }
    let l = linalg::cholesky(g).map_err(|e| SolverError::NotPositiveDefinite { index: e.index, pivot: e.pivot })?;
    let jmat = linalg::invert_lower(&l).transpose();
    let mut basis = Basis::empty(&jmat);
    let mut d = vec![0.0; n];
    for &row in equality_rows {
        if row >= c.rows() {
            return Err(SolverError::BadPosition(row));
        }
        basis.project(c.row(row), &mut d);
        basis
            .add_projected(&mut d, ActiveConstraint { row, side: Side::Equality }, 1e-10)
            .map_err(|_| SolverError::DependentEquality { row })?;
    }
    let row_norms = (0..c.rows()).map(|i| linalg::norm2(c.row(i))).collect();
    Ok(FactorCache { l, jmat, basis: basis.clone(), eq_basis: basis, row_norms, age: 0, n, m: c.rows() })
}

impl FactorCache {
    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn jmat(&self) -> &Matrix {
        &self.jmat
    }

    /// Current (last used) basis.
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Basis holding only the equality rows.
    pub fn equality_basis(&self) -> &Basis {
        &self.eq_basis
    }

    pub fn age(&self) -> usize {
        self.age
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn exceeds_threshold(&self, cfg: &SolverConfig) -> bool {
        self.age > cfg.refactor_threshold
    }

    /// Resets the working basis to the equalities.
    pub fn reset_basis(&mut self) {
        self.basis.clone_from(&self.eq_basis);
    }

    /// Appends `(row, side)` with normal `n` to the working basis.
    pub fn basis_add(&mut self, normal: &[f64], entry: ActiveConstraint) -> Result<(), SolverError> {
        if normal.len() != self.n {
            return Err(SolverError::Dimension { what: "normal", expected: self.n, actual: normal.len() });
        }
        let mut d = vec![0.0; self.n];
        self.basis.project(normal, &mut d);
        self.basis.add_projected(&mut d, entry, 1e-10)
    }

    /// Removes the member at `position` from the working basis.
    pub fn basis_drop(&mut self, position: usize) -> Result<(), SolverError> {
        self.basis.drop_at(position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub active_set: Vec<ActiveConstraint>,
    /// Multipliers aligned with `active_set`, non-negative for inequalities.
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub objective: f64,
}

impl QpSolution {
    /// Row multipliers `λ` with `G x + a = Cᵀ λ`: positive on active lower
    /// sides, negative on active upper sides.
    pub fn multipliers(&self, m: usize) -> Vec<f64> {
        let mut lambda = vec![0.0; m];
        for (act, &u) in self.active_set.iter().zip(&self.duals) {
            lambda[act.row] = act.side.sign() * u;
        }
        lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// Full step: the violated constraint joins the basis.
    Add,
    /// Partial step: a basis member with vanishing multiplier leaves.
    Drop,
    /// Partial step while the violated constraint is dependent on the basis.
    DropDependent,
    Infeasible,
}

/// One iteration of the dual method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub iteration: usize,
    pub kind: StepKind,
    pub row: usize,
    pub side: Side,
    pub t1: f64,
    pub t2: f64,
    /// Objective value after the step.
    pub objective: f64,
}

impl fmt::Display for TraceEvent {
    /// `iter <k> <add|drop|drop-dep|infeasible> row <i> <lower|upper> t1 <v> t2 <v>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            StepKind::Add => "add",
            StepKind::Drop => "drop",
            StepKind::DropDependent => "drop-dep",
            StepKind::Infeasible => "infeasible",
        };
        let side = match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
            Side::Equality => "eq",
        };
        write!(f, "iter {} {} row {} {} t1 {:e} t2 {:e}", self.iteration, kind, self.row, side, self.t1, self.t2)
    }
}

pub trait TraceSink {
    fn event(&mut self, event: &TraceEvent);
}

impl TraceSink for Vec<TraceEvent> {
    fn event(&mut self, event: &TraceEvent) {
        self.push(*event);
    }
}

struct NoTrace;

impl TraceSink for NoTrace {
    fn event(&mut self, _: &TraceEvent) {}
}

fn check_cache(qp: &QpProblem, cache: &FactorCache) -> Result<(), SolverError> {
    qp.check()?;
    if qp.n() != cache.n {
        return Err(SolverError::Dimension { what: "n", expected: cache.n, actual: qp.n() });
    }
    if qp.m() != cache.m {
        return Err(SolverError::Dimension { what: "m", expected: cache.m, actual: qp.m() });
    }
    Ok(())
}

/// Solves `qp` with the cached factors of its `G`, `C`.
pub fn solve(qp: &QpProblem, cache: &mut FactorCache, cfg: &SolverConfig) -> Result<QpSolution, SolverError> {
    solve_traced(qp, cache, cfg, &mut NoTrace)
}

/// Same algorithm as [`solve`] on a cache whose `G`, `C` may be older than
/// the vectors of `qp`. Increments the cache age.
pub fn solve_stale(qp: &QpProblem, cache: &mut FactorCache, cfg: &SolverConfig) -> Result<QpSolution, SolverError> {
    let sol = solve_traced(qp, cache, cfg, &mut NoTrace)?;
    cache.age += 1;
    Ok(sol)
}

pub fn solve_stale_traced(
    qp: &QpProblem,
    cache: &mut FactorCache,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<QpSolution, SolverError> {
    let sol = solve_traced(qp, cache, cfg, sink)?;
    cache.age += 1;
    Ok(sol)
}

/// Primal point and multipliers for the current basis: `x` minimizes the
/// objective with the basis members held as equalities.
fn basis_point(qp: &QpProblem, basis: &Basis, x: &mut [f64], u: &mut Vec<f64>) -> f64 {
    let n = x.len();
    let q = basis.len();
    // y₁ = R⁻ᵀ b, y₂ = -M₂ᵀ a
    let mut y1: Vec<f64> = basis
        .active
        .iter()
        .map(|act| match act.side {
            Side::Upper => -qp.upper[act.row],
            _ => qp.lower[act.row],
        })
        .collect();
    basis.solve_rt(&mut y1);
    x.fill(0.0);
    let mut norm_y = 0.0;
    for (j, &yj) in y1.iter().enumerate() {
        linalg::axpy(yj, basis.mt.row(j), x);
        norm_y += yj * yj;
    }
    for j in q..n {
        let yj = -dot(basis.mt.row(j), qp.a);
        linalg::axpy(yj, basis.mt.row(j), x);
        norm_y += yj * yj;
    }
    // u = R⁻¹ (y₁ + M₁ᵀ a)
    u.clear();
    for (j, &yj) in y1.iter().enumerate() {
        u.push(yj + dot(basis.mt.row(j), qp.a));
    }
    basis.solve_r(u);
    0.5 * norm_y + dot(qp.a, x)
}

pub fn solve_traced(
    qp: &QpProblem,
    cache: &mut FactorCache,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<QpSolution, SolverError> {
    cfg.validate()?;
    check_cache(qp, cache)?;
    let n = cache.n;
    let m = cache.m;
    if !cfg.warm_start {
        cache.reset_basis();
    }
    let basis = &mut cache.basis;
    let mut x = vec![0.0; n];
    let mut u = Vec::with_capacity(n);
    let mut f = basis_point(qp, basis, &mut x, &mut u);
    if cfg.warm_start {
        // keep only a dual-feasible part of the previous basis
        loop {
            let worst = (basis.n_eq..basis.len()).filter(|&k| u[k] < -cfg.tol_d).min_by(|&i, &j| u[i].total_cmp(&u[j]));
            match worst {
                Some(k) => {
                    basis.drop_at(k)?;
                    f = basis_point(qp, basis, &mut x, &mut u);
                }
                None => break,
            }
        }
    }

    let mut is_active = vec![false; m];
    for act in &basis.active {
        is_active[act.row] = true;
    }
    let mut rejected = vec![false; m];
    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut r = Vec::with_capacity(n);
    let mut normal = vec![0.0; n];
    let mut iterations = 0;
    let status = 'outer: loop {
        // most violated side, scaled by the row norm
        let mut best: Option<(usize, Side, f64)> = None;
        for i in 0..m {
            if is_active[i] || rejected[i] {
                continue;
            }
            let v = dot(qp.c.row(i), &x);
            let scale = 1.0 + cache.row_norms[i];
            let lo = (qp.lower[i] - v) / scale;
            let hi = (v - qp.upper[i]) / scale;
            let (viol, side) = if lo >= hi { (lo, Side::Lower) } else { (hi, Side::Upper) };
            if viol > cfg.tol_c && best.is_none_or(|(_, _, b)| viol > b) {
                best = Some((i, side, viol));
            }
        }
        let Some((row, side, _)) = best else {
            break SolveStatus::Optimal;
        };
        let sign = side.sign();
        for (nv, cv) in normal.iter_mut().zip(qp.c.row(row)) {
            *nv = sign * cv;
        }
        let b_plus = match side {
            Side::Upper => -qp.upper[row],
            _ => qp.lower[row],
        };
        let mut u_plus = 0.0;
        // inner loop: same violated constraint until it is added
        loop {
            if iterations >= cfg.max_iter {
                break 'outer SolveStatus::MaxIter;
            }
            iterations += 1;
            let q = basis.len();
            basis.project(&normal, &mut d);
            z.fill(0.0);
            for j in q..n {
                linalg::axpy(d[j], basis.mt.row(j), &mut z);
            }
            r.clear();
            r.extend_from_slice(&d[..q]);
            basis.solve_r(&mut r);
            let d2_sq: f64 = d[q..].iter().map(|v| v * v).sum();
            let d_norm = linalg::norm2(&d);
            let dependent = math::sqrt(d2_sq) <= 1e-10 * d_norm.max(1.0);

            // partial step over active inequalities
            let mut t1 = f64::INFINITY;
            let mut drop_k = None;
            for k in basis.n_eq..q {
                if r[k] > cfg.tol_d {
                    let t = u[k] / r[k];
                    if t < t1 {
                        t1 = t;
                        drop_k = Some(k);
                    }
                }
            }
            let slack = dot(&normal, &x) - b_plus;
            let t2 = if dependent { f64::INFINITY } else { -slack / d2_sq };
            let event = |kind, objective| TraceEvent { iteration: iterations, kind, row, side, t1, t2, objective };

            if dependent && drop_k.is_none() {
                sink.event(&event(StepKind::Infeasible, f));
                break 'outer SolveStatus::Infeasible;
            }
            let t = t1.min(t2);
            if !dependent {
                linalg::axpy(t, &z, &mut x);
                f += t * d2_sq * (0.5 * t + u_plus);
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            u_plus += t;

            if t2 <= t1 {
                sink.event(&event(StepKind::Add, f));
                match basis.add_projected(&mut d, ActiveConstraint { row, side }, 1e-12) {
                    Ok(()) => {
                        u.push(u_plus);
                        is_active[row] = true;
                        rejected.fill(false);
                    }
                    Err(_) => {
                        rejected[row] = true;
                    }
                }
                break;
            }
            let k = drop_k.expect("partial step has a blocking constraint");
            sink.event(&event(if dependent { StepKind::DropDependent } else { StepKind::Drop }, f));
            is_active[basis.active[k].row] = false;
            basis.drop_at(k)?;
            u.remove(k);
            rejected.fill(false);
        }
    };
    let objective = 0.5 * dot(&x, &qp.g.mul_vec(&x)) + dot(qp.a, &x);
    Ok(QpSolution { x, active_set: basis.active.clone(), duals: u, iterations, status, objective })
}
