//! Random strictly convex QPs and a brute-force active-set enumeration
//! oracle for `min ½xᵀGx + aᵀx  s.t.  l ≤ Cx ≤ u`.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use wbc_core::Matrix;

#[derive(Clone, Debug)]
pub struct RandomQp {
    pub g: Matrix,
    pub a: Vec<f64>,
    pub c: Matrix,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RandomQp {
    pub fn problem(&self) -> wbc_core::QpProblem<'_> {
        wbc_core::QpProblem { g: &self.g, a: &self.a, c: &self.c, lower: &self.lower, upper: &self.upper }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.lower.len()
    }
}

/// Feasible by construction: every bound brackets `C x_f` for a random `x_f`.
/// Rows are a mix of equalities, double-sided, lower-only and upper-only.
pub fn random_feasible_qp<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> RandomQp {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let n_eq = rng.gen_range(0..=(n - 1).min(3).min(m));
    let mut g = Matrix::zeros(n, n);
    let f: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| f[k * n + i] * f[k * n + j]).sum();
            g[(i, j)] = s + if i == j { 0.1 } else { 0.0 };
        }
    }
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let xf: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut c = Matrix::zeros(m, n);
    let mut lower = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            c[(i, j)] = rng.gen_range(-1.0..1.0);
        }
        let v: f64 = (0..n).map(|j| c[(i, j)] * xf[j]).sum();
        if i < n_eq {
            lower[i] = v;
            upper[i] = v;
            continue;
        }
        let lo = v - rng.gen_range(0.0..1.0);
        let hi = v + rng.gen_range(0.0..1.0);
        match rng.gen_range(0..3) {
            0 => (lower[i], upper[i]) = (lo, hi),
            1 => (lower[i], upper[i]) = (lo, f64::INFINITY),
            _ => (lower[i], upper[i]) = (f64::NEG_INFINITY, hi),
        }
    }
    RandomQp { g, a, c, lower, upper }
}

/// Appends two rows demanding `cᵀx ≥ 1` and `cᵀx ≤ 0`.
pub fn make_infeasible<R: Rng>(qp: &mut RandomQp, rng: &mut R) {
    let n = qp.n();
    let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = qp.m();
    let mut c = Matrix::zeros(m + 2, n);
    for i in 0..m {
        c.row_mut(i).copy_from_slice(qp.c.row(i));
    }
    c.row_mut(m).copy_from_slice(&row);
    c.row_mut(m + 1).copy_from_slice(&row);
    qp.c = c;
    qp.lower.extend([1.0, f64::NEG_INFINITY]);
    qp.upper.extend([f64::INFINITY, 0.0]);
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Act {
    Lower,
    Upper,
}

/// Minimizer found by enumerating active sets in order of size, or `None`
/// when no set satisfies the KKT conditions (infeasible problem).
pub fn brute_force(qp: &RandomQp) -> Option<Vec<f64>> {
    let n = qp.n();
    let m = qp.m();
    let eq: Vec<usize> = (0..m).filter(|&i| qp.lower[i] == qp.upper[i]).collect();
    let ineq: Vec<usize> = (0..m).filter(|&i| qp.lower[i] != qp.upper[i]).collect();
    let g = DMatrix::from_row_slice(n, n, qp.g.as_slice());
    let max_k = n.saturating_sub(eq.len()).min(ineq.len());
    for k in 0..=max_k {
        let mut chosen: Vec<(usize, Act)> = Vec::with_capacity(k);
        if let Some(x) = search(qp, &g, &eq, &ineq, 0, k, &mut chosen) {
            return Some(x);
        }
    }
    None
}

fn search(
    qp: &RandomQp,
    g: &DMatrix<f64>,
    eq: &[usize],
    ineq: &[usize],
    start: usize,
    k: usize,
    chosen: &mut Vec<(usize, Act)>,
) -> Option<Vec<f64>> {
    if chosen.len() == k {
        return kkt_point(qp, g, eq, chosen);
    }
    for p in start..ineq.len() {
        if ineq.len() - p < k - chosen.len() {
            break;
        }
        let i = ineq[p];
        for side in [Act::Lower, Act::Upper] {
            let bound = match side {
                Act::Lower => qp.lower[i],
                Act::Upper => qp.upper[i],
            };
            if !bound.is_finite() {
                continue;
            }
            chosen.push((i, side));
            let r = search(qp, g, eq, ineq, p + 1, k, chosen);
            chosen.pop();
            if r.is_some() {
                return r;
            }
        }
    }
    None
}

fn kkt_point(qp: &RandomQp, g: &DMatrix<f64>, eq: &[usize], act: &[(usize, Act)]) -> Option<Vec<f64>> {
    let n = qp.n();
    let rows: Vec<(usize, f64)> = eq
        .iter()
        .map(|&i| (i, qp.lower[i]))
        .chain(act.iter().map(|&(i, s)| (i, if s == Act::Lower { qp.lower[i] } else { qp.upper[i] })))
        .collect();
    let q = rows.len();
    let mut k = DMatrix::zeros(n + q, n + q);
    let mut rhs = DVector::zeros(n + q);
    k.view_mut((0, 0), (n, n)).copy_from(g);
    for j in 0..n {
        rhs[j] = -qp.a[j];
    }
    for (r, &(i, b)) in rows.iter().enumerate() {
        for j in 0..n {
            k[(n + r, j)] = qp.c[(i, j)];
            k[(j, n + r)] = -qp.c[(i, j)];
        }
        rhs[n + r] = b;
    }
    let sol = k.lu().solve(&rhs)?;
    let x: Vec<f64> = sol.iter().take(n).copied().collect();
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    const TOL: f64 = 1e-9;
    for i in 0..qp.m() {
        let v: f64 = (0..n).map(|j| qp.c[(i, j)] * x[j]).sum();
        if v < qp.lower[i] - TOL * (1.0 + qp.lower[i].abs()) || v > qp.upper[i] + TOL * (1.0 + qp.upper[i].abs()) {
            return None;
        }
    }
    // G x + a = Cᵀ λ with λ ≥ 0 on lower sides and λ ≤ 0 on upper sides
    for (r, &(_, s)) in act.iter().enumerate() {
        let lam = sol[n + eq.len() + r];
        let ok = match s {
            Act::Lower => lam >= -TOL,
            Act::Upper => lam <= TOL,
        };
        if !ok {
            return None;
        }
    }
    Some(x)
}
