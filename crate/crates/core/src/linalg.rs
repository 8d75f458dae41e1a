//! Dense vectors and matrices, plus the regularized normal-equation solver.
//!
//! The solver works on `(AᵀA + βI) u = Aᵀb + β·shift` with `A` supplied as a
//! pair of closures, so sparse selection operators never get materialized.
//! Iteration is a conjugate-residual recurrence: a conjugate-gradient method
//! for symmetric positive definite systems whose residual norm is minimized
//! over the Krylov space at every step, hence monotone. The recorded variant
//! keeps every intermediate so the fixed-budget iteration can be
//! differentiated in reverse mode.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().all(|v| v.is_finite()) {
            Ok(Self(data))
        } else {
            Err(Error::NonFinite("vector literal".into()))
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self(data)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix literal".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec", self.cols, x.len())?;
        Ok(self.matvec_unchecked(x))
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("transposed matvec", self.rows, y.len())?;
        Ok(self.matvec_t_unchecked(y))
    }

    pub(crate) fn matvec_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| dot(row, x))
            .collect()
    }

    pub(crate) fn matvec_t_unchecked(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols.max(1)).zip(y) {
            if yi != 0.0 {
                axpy(yi, row, &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_len("matmul", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(a, other.row(k), dst);
            }
        }
        Ok(out)
    }

    /// `self += scale · a bᵀ`.
    pub(crate) fn add_outer(&mut self, scale: f64, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (row, &ai) in self.data.chunks_exact_mut(self.cols.max(1)).zip(a) {
            let s = scale * ai;
            if s != 0.0 {
                axpy(s, b, row);
            }
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Lower-triangular Cholesky factor `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                context: "cholesky",
                expected: self.rows,
                actual: self.cols,
            });
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag -= l.get(j, k) * l.get(j, k);
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::Singular);
            }
            let ljj = diag.sqrt();
            l.set(j, j, ljj);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(l)
    }

    /// Solves `self · x = b` for symmetric positive definite `self`.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("spd solve", self.rows, b.len())?;
        let l = self.cholesky()?;
        Ok(cholesky_substitute(&l, b))
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn inverse_spd(&self) -> Result<Matrix> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = cholesky_substitute(&l, &e);
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        Ok(inv)
    }
}

fn cholesky_substitute(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a·x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iteration controls for the regularized solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Absolute stopping tolerance on the normal-equation residual norm.
    pub tol: f64,
}

impl SolveOptions {
    pub const fn new(max_iters: usize, tol: f64) -> Self {
        Self { max_iters, tol }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 8,
            tol: 0.0,
        }
    }
}

/// Residual norms below this fraction of the initial residual are treated as
/// converged. Iterating past it only propagates round-off, which the reverse
/// pass cannot differentiate meaningfully.
pub const RELATIVE_RESIDUAL_FLOOR: f64 = 1e-12;

/// Result of a solve, with the residual norm after every iteration.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vector,
    /// `‖c − M u_k‖` for k = 0..=iterations.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

/// `u ≈ (AᵀA + βI)⁻¹ Aᵀ b`.
pub fn solve_regularized<A, At>(
    apply_a: A,
    apply_at: At,
    b: &[f64],
    beta: f64,
    opts: SolveOptions,
) -> Result<Vector>
where
    A: Fn(&[f64]) -> Vec<f64>,
    At: Fn(&[f64]) -> Vec<f64>,
{
    solve_regularized_report(apply_a, apply_at, b, beta, None, opts).map(|r| r.solution)
}

/// `u ≈ (AᵀA + βI)⁻¹ (Aᵀ b + β·shift)`.
pub fn solve_regularized_shifted<A, At>(
    apply_a: A,
    apply_at: At,
    b: &[f64],
    beta: f64,
    shift: &[f64],
    opts: SolveOptions,
) -> Result<Vector>
where
    A: Fn(&[f64]) -> Vec<f64>,
    At: Fn(&[f64]) -> Vec<f64>,
{
    solve_regularized_report(apply_a, apply_at, b, beta, Some(shift), opts).map(|r| r.solution)
}

/// Full-report version of the regularized solve.
pub fn solve_regularized_report<A, At>(
    apply_a: A,
    apply_at: At,
    b: &[f64],
    beta: f64,
    shift: Option<&[f64]>,
    opts: SolveOptions,
) -> Result<SolveReport>
where
    A: Fn(&[f64]) -> Vec<f64>,
    At: Fn(&[f64]) -> Vec<f64>,
{
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be nonnegative, got {}", opts.tol)));
    }
    let mut rhs = apply_at(b);
    let n = rhs.len();
    if let Some(shift) = shift {
        check_len("solver shift", n, shift.len())?;
        axpy(beta, shift, &mut rhs);
    }
    // Probe the operator once so dimension errors surface before iterating.
    let probe = apply_a(&vec![0.0; n]);
    check_len("solver right-hand side", probe.len(), b.len())?;

    let apply_m = |v: &[f64]| -> Vec<f64> {
        let av = apply_a(v);
        let mut out = apply_at(&av);
        axpy(beta, v, &mut out);
        out
    };
    let run = conjugate_residual(apply_m, rhs, opts, false);
    Ok(SolveReport {
        solution: Vector(run.solution),
        residual_norms: run.residual_norms,
        iterations: run.iterations,
    })
}

pub(crate) struct KrylovRun {
    pub solution: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    pub tape: Option<KrylovTape>,
}

/// Every intermediate of a conjugate-residual run.
///
/// Index k holds the quantities entering iteration k: `r[k]`, `p[k]`, `s[k] = M p[k]`,
/// `z[k] = M r[k]`, `rho[k] = r[k]·z[k]`. `r` has one extra trailing entry.
#[derive(Debug, Clone, Default)]
pub(crate) struct KrylovTape {
    r: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    rho: Vec<f64>,
    ss: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Conjugate-residual iteration for `M x = c`, `M` symmetric positive definite.
pub(crate) fn conjugate_residual<M>(
    apply_m: M,
    c: Vec<f64>,
    opts: SolveOptions,
    record: bool,
) -> KrylovRun
where
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = c.len();
    let mut x = vec![0.0; n];
    let mut r = c;
    let r0_norm = norm(&r);
    let threshold = opts.tol.max(RELATIVE_RESIDUAL_FLOOR * r0_norm);
    let mut residual_norms = vec![r0_norm];
    let mut tape = record.then(KrylovTape::default);

    if r0_norm == 0.0 || r0_norm <= threshold || opts.max_iters == 0 {
        if let Some(t) = tape.as_mut() {
            t.r.push(r);
        }
        return KrylovRun {
            solution: x,
            residual_norms,
            iterations: 0,
            tape,
        };
    }

    let mut z = apply_m(&r);
    let mut rho = dot(&r, &z);
    let mut p = r.clone();
    let mut s = z.clone();
    let mut iterations = 0;

    loop {
        let ss = dot(&s, &s);
        let a = rho / ss;
        axpy(a, &p, &mut x);
        let mut r_next = r.clone();
        axpy(-a, &s, &mut r_next);
        iterations += 1;
        let r_norm = norm(&r_next);
        residual_norms.push(r_norm);

        let done = iterations >= opts.max_iters || r_norm <= threshold;
        if done {
            if let Some(t) = tape.as_mut() {
                t.r.push(std::mem::take(&mut r));
                t.p.push(p);
                t.s.push(s);
                t.z.push(z);
                t.rho.push(rho);
                t.ss.push(ss);
                t.a.push(a);
                t.r.push(r_next);
            }
            break;
        }

        let z_next = apply_m(&r_next);
        let rho_next = dot(&r_next, &z_next);
        let b = rho_next / rho;
        let mut p_next = r_next.clone();
        axpy(b, &p, &mut p_next);
        let mut s_next = z_next.clone();
        axpy(b, &s, &mut s_next);

        if let Some(t) = tape.as_mut() {
            t.r.push(std::mem::replace(&mut r, r_next));
            t.p.push(std::mem::replace(&mut p, p_next));
            t.s.push(std::mem::replace(&mut s, s_next));
            t.z.push(std::mem::replace(&mut z, z_next));
            t.rho.push(rho);
            t.ss.push(ss);
            t.a.push(a);
            t.b.push(b);
        } else {
            r = r_next;
            p = p_next;
            s = s_next;
            z = z_next;
        }
        rho = rho_next;
    }

    KrylovRun {
        solution: x,
        residual_norms,
        iterations,
        tape,
    }
}

impl KrylovTape {
    pub fn iterations(&self) -> usize {
        self.a.len()
    }

    /// Reverse pass. Given the adjoint of the returned solution, returns the
    /// adjoint of the right-hand side `c`.
    ///
    /// `apply_m` must be the same symmetric operator used in the forward run.
    /// `on_matvec(v, ybar)` is called once per forward product `y = M v` so the
    /// caller can accumulate gradients of the operator's own parameters.
    pub fn backward<M, G>(&self, xbar: &[f64], apply_m: M, mut on_matvec: G) -> Vec<f64>
    where
        M: Fn(&[f64]) -> Vec<f64>,
        G: FnMut(&[f64], &[f64]),
    {
        let n_iter = self.iterations();
        let dim = xbar.len();
        if n_iter == 0 {
            return vec![0.0; dim];
        }

        let mut rbar_next = vec![0.0; dim];
        let mut pbar_next = vec![0.0; dim];
        let mut sbar_next = vec![0.0; dim];
        let mut rhobar_next = 0.0;

        for k in (0..n_iter).rev() {
            let mut pbar = vec![0.0; dim];
            let mut sbar = vec![0.0; dim];
            let mut rhobar = 0.0;

            if k + 1 < n_iter {
                let b = self.b[k];
                let rho_next = self.rho[k + 1];
                let r_next = &self.r[k + 1];
                let z_next = &self.z[k + 1];
                // s_{k+1} = z_{k+1} + b s_k
                let mut zbar = sbar_next.clone();
                let mut bbar = dot(&sbar_next, &self.s[k]);
                axpy(b, &sbar_next, &mut sbar);
                // p_{k+1} = r_{k+1} + b p_k
                axpy(1.0, &pbar_next, &mut rbar_next);
                bbar += dot(&pbar_next, &self.p[k]);
                axpy(b, &pbar_next, &mut pbar);
                // b = rho_{k+1} / rho_k
                rhobar_next += bbar / self.rho[k];
                rhobar -= bbar * rho_next / (self.rho[k] * self.rho[k]);
                // rho_{k+1} = r_{k+1} · z_{k+1}
                axpy(rhobar_next, z_next, &mut rbar_next);
                axpy(rhobar_next, r_next, &mut zbar);
                // z_{k+1} = M r_{k+1}
                let mz = apply_m(&zbar);
                axpy(1.0, &mz, &mut rbar_next);
                on_matvec(r_next, &zbar);
            }

            // r_{k+1} = r_k − a s_k
            let a = self.a[k];
            let rbar = rbar_next;
            let mut abar = -dot(&rbar, &self.s[k]);
            axpy(-a, &rbar, &mut sbar);
            // x_{k+1} = x_k + a p_k
            abar += dot(xbar, &self.p[k]);
            axpy(a, xbar, &mut pbar);
            // a = rho_k / ss_k ; ss_k = s_k · s_k
            let ss = self.ss[k];
            rhobar += abar / ss;
            let ssbar = -abar * self.rho[k] / (ss * ss);
            axpy(2.0 * ssbar, &self.s[k], &mut sbar);

            rbar_next = rbar;
            pbar_next = pbar;
            sbar_next = sbar;
            rhobar_next = rhobar;
        }

        // Initialization: p_0 = r_0, s_0 = z_0 = M r_0, rho_0 = r_0 · z_0, r_0 = c.
        let r0 = &self.r[0];
        let z0 = &self.z[0];
        let mut rbar0 = rbar_next;
        axpy(1.0, &pbar_next, &mut rbar0);
        let mut zbar0 = sbar_next;
        axpy(rhobar_next, z0, &mut rbar0);
        axpy(rhobar_next, r0, &mut zbar0);
        let mz = apply_m(&zbar0);
        axpy(1.0, &mz, &mut rbar0);
        on_matvec(r0, &zbar0);
        rbar0
    }
}
