//! The margin QP of the cutting-plane trainer, solved in the dual.
//!
//! Primal: minimize `½‖w‖² + C Σ_i ξ_i` subject to `w·g_r ≥ Δ_r − ξ_i` for
//! every cached row `r` of sample `i`, `ξ_i ≥ 0`, and `w` in a polyhedral
//! cone (nonnegative pairwise weights, concave clique weights). The dual is
//! maximized by pairwise coordinate steps inside each sample's simplex and
//! single steps on the cone multipliers. The returned weights are projected
//! onto the cone, so they satisfy its constraints exactly even before the
//! dual has fully converged.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{JointFeature, ModelLayout};
use crate::scalar::Scalar;

/// Sparse vector stored as dense segments `(offset, values)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow<T> {
    pub segments: Vec<(usize, Vec<T>)>,
}

impl<T: Scalar> SparseRow<T> {
    pub fn dense(values: Vec<T>) -> Self {
        Self {
            segments: vec![(0, values)],
        }
    }

    /// `Ψ(ŷ) − Ψ(y)`.
    pub fn difference(hat: &JointFeature<T>, gt: &JointFeature<T>) -> Self {
        if hat.offset == gt.offset {
            let d = hat.block.iter().zip(&gt.block).map(|(&a, &b)| a - b).collect();
            Self {
                segments: vec![(hat.offset, d)],
            }
        } else {
            Self {
                segments: vec![
                    (hat.offset, hat.block.clone()),
                    (gt.offset, gt.block.iter().map(|&b| -b).collect()),
                ],
            }
        }
    }

    pub fn dot(&self, w: &[T]) -> T {
        self.segments
            .iter()
            .map(|(o, v)| v.iter().zip(&w[*o..*o + v.len()]).map(|(&a, &b)| a * b).sum::<T>())
            .sum()
    }

    pub fn axpy(&self, scale: T, out: &mut [T]) {
        for (o, v) in &self.segments {
            for (slot, &x) in out[*o..*o + v.len()].iter_mut().zip(v) {
                *slot += scale * x;
            }
        }
    }

    pub fn norm2(&self) -> T {
        self.segments.iter().flat_map(|(_, v)| v.iter()).map(|&x| x * x).sum()
    }

    pub fn dot_row(&self, other: &SparseRow<T>) -> T {
        let mut s = T::zero();
        for (oa, a) in &self.segments {
            for (ob, b) in &other.segments {
                let lo = (*oa).max(*ob);
                let hi = (oa + a.len()).min(ob + b.len());
                for j in lo..hi {
                    s += a[j - oa] * b[j - ob];
                }
            }
        }
        s
    }

    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut out = vec![T::zero(); dim];
        self.axpy(T::one(), &mut out);
        out
    }
}

/// Closed convex cone the weights are confined to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cone {
    /// Coordinates constrained to be `≥ 0`.
    pub nonneg: Vec<usize>,
    /// Ranges constrained to have nonpositive second differences.
    pub concave: Vec<Range<usize>>,
    /// Ranges fixed at zero.
    pub zero: Vec<Range<usize>>,
}

impl Cone {
    /// Pairwise weights nonnegative and clique weights concave in every
    /// viewpoint block; with `freeze_hop` the clique weights are held at 0.
    pub fn for_layout(layout: &ModelLayout, freeze_hop: bool) -> Self {
        let mut cone = Cone::default();
        for a in 0..layout.num_viewpoints() {
            let o = layout.offset(a);
            let b = layout.block(a);
            cone.nonneg.push(o + b.pairwise());
            let hop = o + b.hop().start..o + b.hop().end;
            if freeze_hop {
                cone.zero.push(hop);
            } else {
                cone.concave.push(hop);
            }
        }
        cone
    }

    /// Euclidean projection of `x` onto the cone.
    pub fn project<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut w = x.to_vec();
        for &j in &self.nonneg {
            w[j] = w[j].max(T::zero());
        }
        for r in &self.zero {
            w[r.clone()].iter_mut().for_each(|v| *v = T::zero());
        }
        for r in &self.concave {
            let p = project_concave(&x[r.clone()]);
            w[r.clone()].copy_from_slice(&p);
        }
        w
    }
}

/// Projection onto sequences with nonpositive second differences.
///
/// With `A` the second-difference operator (rows `−1 2 −1`, so `A w ≥ 0`
/// means concave), the projection is `x + Aᵀμ` where `μ ≥ 0` minimizes
/// `½μᵀ(AAᵀ)μ + (Ax)ᵀμ`; that bound-constrained QP is solved by an
/// active-set method.
pub fn project_concave<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    if n < 3 {
        return x.to_vec();
    }
    let m = n - 2;
    let apply_a = |v: &[T]| -> Vec<T> { (0..m).map(|j| v[j + 1] + v[j + 1] - v[j] - v[j + 2]).collect() };
    let c = apply_a(x);
    if c.iter().all(|&v| v >= T::zero()) {
        return x.to_vec();
    }
    let q = |i: usize, j: usize| -> T {
        match i.abs_diff(j) {
            0 => T::of(6.0),
            1 => T::of(-4.0),
            2 => T::one(),
            _ => T::zero(),
        }
    };
    let scale = x.iter().fold(T::one(), |acc, &v| acc.max(v.abs()));
    let tol = T::epsilon() * T::of(64.0) * scale;
    let mut mu = vec![T::zero(); m];
    let mut free = vec![false; m];
    for _ in 0..4 * m + 4 {
        let grad: Vec<T> = (0..m).map(|i| (0..m).map(|j| q(i, j) * mu[j]).sum::<T>() + c[i]).collect();
        let pick = (0..m)
            .filter(|&j| !free[j])
            .min_by(|&a, &b| grad[a].partial_cmp(&grad[b]).unwrap());
        match pick {
            Some(j) if grad[j] < -tol => free[j] = true,
            _ => break,
        }
        loop {
            let idx: Vec<usize> = (0..m).filter(|&j| free[j]).collect();
            let sys: Vec<Vec<T>> = idx.iter().map(|&i| idx.iter().map(|&j| q(i, j)).collect()).collect();
            let rhs: Vec<T> = idx.iter().map(|&i| -c[i]).collect();
            let z = solve_dense(sys, rhs);
            if z.iter().all(|&v| v > T::zero()) {
                for (&i, &v) in idx.iter().zip(&z) {
                    mu[i] = v;
                }
                break;
            }
            let mut step = T::one();
            for (&i, &v) in idx.iter().zip(&z) {
                if v <= T::zero() {
                    step = step.min(mu[i] / (mu[i] - v));
                }
            }
            for (&i, &v) in idx.iter().zip(&z) {
                mu[i] = mu[i] + step * (v - mu[i]);
                if mu[i] <= T::zero() || (v <= T::zero() && mu[i] <= tol) {
                    mu[i] = T::zero();
                    free[i] = false;
                }
            }
            if !free.iter().any(|&f| f) {
                break;
            }
        }
    }
    let mut w = x.to_vec();
    for j in 0..m {
        w[j] -= mu[j];
        w[j + 1] += mu[j] + mu[j];
        w[j + 2] -= mu[j];
    }
    w
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Vec<T> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[r][k] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Outcome of one QP solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpReport {
    pub dual: f64,
    pub primal: f64,
    pub sweeps: usize,
    pub residual: f64,
}

/// One dual variable: a margin row of some sample, or a cone face.
#[derive(Clone, Debug)]
struct DualVar<T> {
    row: SparseRow<T>,
    loss: T,
    x: T,
}

/// Working sets, multipliers and current solution of the margin QP.
///
/// The cone is written as `B w ≥ 0` (unit rows for nonnegative weights,
/// `−1 2 −1` rows for concave ranges), so the dual has one unbounded
/// multiplier `β ≥ 0` per face next to the capped `α` of each sample, and
/// `w = Σ α_r g_r + Bᵀβ`. The Gram matrix of all rows is cached, which
/// makes each coordinate step linear in the number of dual variables.
/// Coordinates fixed at zero are removed from every row.
#[derive(Clone, Debug)]
pub struct QpState<T> {
    dim: usize,
    c_reg: T,
    cone: Cone,
    vars: Vec<DualVar<T>>,
    /// Indices into `vars` of each sample's rows.
    samples: Vec<Vec<usize>>,
    /// Indices into `vars` of the cone faces.
    faces: Vec<usize>,
    gram: Vec<Vec<T>>,
    /// `Δ_j − v_j·w_lin` for every dual variable.
    h: Vec<T>,
    /// Unprojected `Σ x_j v_j`.
    w_lin: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> QpState<T> {
    pub fn new(dim: usize, num_samples: usize, c_reg: T, cone: Cone) -> Self {
        let mut s = Self {
            dim,
            c_reg,
            cone: cone.clone(),
            vars: Vec::new(),
            samples: (0..num_samples).map(|_| Vec::new()).collect(),
            faces: Vec::new(),
            gram: Vec::new(),
            h: Vec::new(),
            w_lin: vec![T::zero(); dim],
            w: vec![T::zero(); dim],
        };
        for &j in &cone.nonneg {
            let row = SparseRow {
                segments: vec![(j, vec![T::one()])],
            };
            let id = s.push_var(row, T::zero());
            s.faces.push(id);
        }
        let stencil = vec![-T::one(), T::of(2.0), -T::one()];
        for r in &cone.concave {
            for j in r.start..r.end.saturating_sub(2) {
                let row = SparseRow {
                    segments: vec![(j, stencil.clone())],
                };
                let id = s.push_var(row, T::zero());
                s.faces.push(id);
            }
        }
        s
    }

    fn push_var(&mut self, mut row: SparseRow<T>, loss: T) -> usize {
        for (o, v) in &mut row.segments {
            for z in &self.cone.zero {
                for j in z.start.max(*o)..z.end.min(*o + v.len()) {
                    v[j - *o] = T::zero();
                }
            }
        }
        let col: Vec<T> = self.vars.iter().map(|v| v.row.dot_row(&row)).collect();
        for (g, &c) in self.gram.iter_mut().zip(&col) {
            g.push(c);
        }
        let mut own = col;
        own.push(row.norm2());
        self.gram.push(own);
        self.h.push(loss - row.dot(&self.w_lin));
        self.vars.push(DualVar { row, loss, x: T::zero() });
        self.vars.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn num_constraints(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    pub fn rows(&self, sample: usize) -> impl Iterator<Item = (&SparseRow<T>, T)> {
        self.samples[sample].iter().map(|&j| (&self.vars[j].row, self.vars[j].loss))
    }

    /// Adds margin row `row` with loss `loss` to sample `sample`'s working set.
    pub fn add_row(&mut self, sample: usize, row: SparseRow<T>, loss: T) {
        let id = self.push_var(row, loss);
        self.samples[sample].push(id);
    }

    /// Slack of `sample` at the current weights.
    pub fn slack(&self, sample: usize) -> T {
        self.samples[sample]
            .iter()
            .map(|&j| self.vars[j].loss - self.vars[j].row.dot(&self.w))
            .fold(T::zero(), T::max)
    }

    pub fn dual_objective(&self) -> T {
        let lin: T = self.vars.iter().map(|v| v.x * v.loss).sum();
        lin - half_norm2(&self.w_lin)
    }

    pub fn primal_objective(&self) -> T {
        let slacks: T = (0..self.samples.len()).map(|i| self.slack(i)).sum();
        half_norm2(&self.w) + self.c_reg * slacks
    }

    /// Recomputes `w_lin`, `h` and the projected weights from the multipliers.
    fn recompute(&mut self) {
        let mut u = vec![T::zero(); self.dim];
        for v in &self.vars {
            if v.x != T::zero() {
                v.row.axpy(v.x, &mut u);
            }
        }
        for (h, v) in self.h.iter_mut().zip(&self.vars) {
            *h = v.loss - v.row.dot(&u);
        }
        self.w = self.cone.project(&u);
        self.w_lin = u;
    }

    /// Most and least violated directions of `sample`'s simplex; `None`
    /// stands for the slack (a zero row). Returns `(up, down, gap)`.
    fn working_pair(&self, sample: usize) -> (Option<usize>, Option<usize>, T) {
        let ids = &self.samples[sample];
        let spare = self.c_reg - ids.iter().map(|&j| self.vars[j].x).sum::<T>();
        let (mut up, mut h_up) = (None, T::zero());
        let (mut down, mut h_down) = (None, T::infinity());
        if spare > T::zero() {
            h_down = T::zero();
        }
        for &j in ids {
            let h = self.h[j];
            if h > h_up {
                up = Some(j);
                h_up = h;
            }
            if self.vars[j].x > T::zero() && h < h_down {
                down = Some(j);
                h_down = h;
            }
        }
        if h_down == T::infinity() {
            return (up, down, T::zero());
        }
        (up, down, (h_up - h_down).max(T::zero()))
    }

    fn face_gap(&self, j: usize) -> T {
        if self.vars[j].x > T::zero() {
            self.h[j].abs()
        } else {
            self.h[j].max(T::zero())
        }
    }

    /// Largest KKT gap over all samples and cone faces.
    pub fn residual(&self) -> T {
        let rows = (0..self.samples.len()).map(|i| self.working_pair(i).2);
        let faces = self.faces.iter().map(|&j| self.face_gap(j));
        rows.chain(faces).fold(T::zero(), T::max)
    }

    fn shift(&mut self, j: usize, delta: T) {
        self.vars[j].x += delta;
        for (h, &g) in self.h.iter_mut().zip(&self.gram[j]) {
            *h -= delta * g;
        }
    }

    /// Runs dual ascent until the KKT gap is at most `tol`, starting from
    /// the current multipliers.
    pub fn solve(&mut self, tol: T, max_sweeps: usize) -> Result<QpReport> {
        self.recompute();
        let mut residual = self.residual();
        let mut sweeps = 0;
        while residual > tol {
            if sweeps >= max_sweeps {
                return Err(Error::Convergence {
                    iterations: sweeps,
                    residual: residual.as_f64(),
                });
            }
            sweeps += 1;
            for i in 0..self.samples.len() {
                for _ in 0..50 * self.samples[i].len() {
                    let (up, down, gap) = self.working_pair(i);
                    if gap <= tol * T::of(0.25) || up == down {
                        break;
                    }
                    self.step(i, up, down, gap);
                }
            }
            for f in 0..self.faces.len() {
                let j = self.faces[f];
                let g = self.gram[j][j];
                if g > T::zero() {
                    let delta = (self.h[j] / g).max(-self.vars[j].x);
                    if delta != T::zero() {
                        self.shift(j, delta);
                    }
                }
            }
            if sweeps % 64 == 0 {
                self.recompute();
            }
            residual = self.residual();
        }
        self.recompute();
        Ok(QpReport {
            dual: self.dual_objective().as_f64(),
            primal: self.primal_objective().as_f64(),
            sweeps,
            residual: residual.as_f64(),
        })
    }

    fn step(&mut self, i: usize, up: Option<usize>, down: Option<usize>, gap: T) {
        let curvature = match (up, down) {
            (Some(a), Some(b)) => self.gram[a][a] + self.gram[b][b] - self.gram[a][b] * T::of(2.0),
            (Some(a), None) => self.gram[a][a],
            (None, Some(b)) => self.gram[b][b],
            (None, None) => unreachable!(),
        };
        let room = match down {
            Some(b) => self.vars[b].x,
            None => self.c_reg - self.samples[i].iter().map(|&j| self.vars[j].x).sum::<T>(),
        };
        let delta = if curvature > T::zero() {
            (gap / curvature).min(room)
        } else {
            room
        };
        if delta <= T::zero() {
            return;
        }
        if let Some(a) = up {
            self.shift(a, delta);
        }
        if let Some(b) = down {
            self.shift(b, -delta);
            if self.vars[b].x < T::zero() {
                self.vars[b].x = T::zero();
            }
        }
    }
}

fn half_norm2<T: Scalar>(w: &[T]) -> T {
    w.iter().map(|&x| x * x).sum::<T>() * T::of(0.5)
}

/// Solves the QP held in `state` to KKT gap 1e-6.
pub fn solve_qp<T: Scalar>(state: &mut QpState<T>) -> Result<QpReport> {
    state.solve(T::of(1e-6), 200_000)
}
