//! Dense bounded-variable revised simplex.
//!
//! Problems are `min c'x` subject to rows `a_i x {<=,>=,=} b_i` and
//! `l <= x <= u` with infinite bounds allowed. Every row gets a slack column
//! `s_i` so that `a_i x + s_i = b_i`, with the slack's bounds encoding the row
//! sense. A cold start begins from the all-slack basis and adds artificial
//! columns only for rows the slack cannot absorb (phase 1). A warm start
//! refactors a previous basis and continues with primal simplex when that
//! basis is still primal feasible, or with dual simplex when it is only dual
//! feasible, which is the common case for a chain of dispatch problems that
//! differ in right-hand sides and bounds.
//!
//! Pivoting rules are deterministic: entering variable by most negative
//! reduced cost (lowest index on ties), leaving variable by minimum ratio
//! (lowest index on ties), switching to Bland's rule after a run of
//! degenerate pivots.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Sparse coefficients `(column, value)`.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a column and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.lower.len() != n {
            return Err(Error::Dimension {
                what: "lower bounds",
                expected: n,
                found: self.lower.len(),
            });
        }
        if self.upper.len() != n {
            return Err(Error::Dimension {
                what: "upper bounds",
                expected: n,
                found: self.upper.len(),
            });
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("non-finite objective coefficient {c}")));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Validation(format!(
                    "variable {j}: invalid bounds [{l}, {u}]"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Validation(format!("row {i}: non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::Dimension {
                        what: "row coefficient column",
                        expected: n,
                        found: j,
                    });
                }
                if !a.is_finite() {
                    return Err(Error::Validation(format!("row {i}: non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Fixed-layout text rendering used for golden-file tests and debugging.
    ///
    /// ```text
    /// lp <vars> <rows>
    /// obj <c_0> ... <c_n-1>
    /// row <i> <sense> <rhs> : <j>:<a_ij> ...
    /// bound <j> <lower> <upper>
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lp {} {}", self.n_vars(), self.n_rows());
        out.push_str("obj");
        for c in &self.objective {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "row {i} {} {} :", row.sense.symbol(), row.rhs);
            for (j, a) in &row.coeffs {
                let _ = write!(out, " {j}:{a}");
            }
            out.push('\n');
        }
        for j in 0..self.n_vars() {
            let _ = writeln!(out, "bound {j} {} {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis descriptor over structural and slack columns (`n_vars + n_rows`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Basis {
    pub n_vars: usize,
    pub n_rows: usize,
    /// Basic column per row position.
    pub basic: Vec<usize>,
    /// For every column, whether it sits at its upper bound when nonbasic.
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    /// Row duals `y = c_B B^-1` of the final basis (empty unless optimal).
    pub duals: Vec<f64>,
    /// Final basis; `None` when artificial columns remained basic.
    pub basis: Option<Basis>,
    pub iterations: usize,
    pub warm_started: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before Bland's rule is engaged.
    pub bland_after: usize,
    pub refactor_every: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 50,
            refactor_every: 40,
            max_iterations: 100_000,
        }
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    solve_with(problem, None, &SolverOptions::default())
}

/// Solves starting from `basis`. An incompatible or singular basis silently
/// falls back to a cold start.
pub fn warm_hint(problem: &LpProblem, basis: &Basis) -> Result<LpSolution> {
    solve_with(problem, Some(basis), &SolverOptions::default())
}

pub fn solve_with(
    problem: &LpProblem,
    basis: Option<&Basis>,
    options: &SolverOptions,
) -> Result<LpSolution> {
    problem.validate()?;
    if let Some(b) = basis {
        let mut s = Simplex::new(problem, *options, 0);
        if s.load_basis(b) {
            if let Some(sol) = s.run_warm()? {
                return Ok(sol);
            }
        }
    }
    let mut s = Simplex::new(problem, *options, problem.n_rows());
    s.run_cold()
}

/// Lagrangian lower bound on the optimal objective implied by row duals `y`:
/// `y'b + sum_j min_{l_j<=x_j<=u_j} d_j x_j + sum_i min_{s_i} (-y_i s_i)`
/// with `d = c - A'y`. Returns `None` when the bound is `-inf`.
pub fn dual_bound(problem: &LpProblem, duals: &[f64], tol: f64) -> Option<f64> {
    let n = problem.n_vars();
    let mut d = problem.objective.clone();
    let mut bound = 0.0;
    for (row, &y) in problem.rows.iter().zip(duals) {
        bound += y * row.rhs;
        for &(j, a) in &row.coeffs {
            d[j] -= a * y;
        }
        let ds = -y;
        let (sl, su) = slack_bounds(row.sense);
        bound += box_min(ds, sl, su, tol)?;
    }
    for j in 0..n {
        bound += box_min(d[j], problem.lower[j], problem.upper[j], tol)?;
    }
    Some(bound)
}

fn box_min(d: f64, l: f64, u: f64, tol: f64) -> Option<f64> {
    if d > tol {
        l.is_finite().then_some(d * l)
    } else if d < -tol {
        u.is_finite().then_some(d * u)
    } else {
        Some(0.0)
    }
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

enum PrimalOutcome {
    Optimal,
    Unbounded,
}

enum DualOutcome {
    Optimal,
    Infeasible,
}

struct Simplex<'a> {
    problem: &'a LpProblem,
    opt: SolverOptions,
    m: usize,
    n: usize,
    /// Column-major dense columns: structurals, slacks, then artificials.
    cols: Vec<f64>,
    ncols: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    b: Vec<f64>,
    basic: Vec<usize>,
    /// Position in `basic`, or `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
}

const NONBASIC: usize = usize::MAX;
/// Ratio-test values closer than this are treated as ties.
const RATIO_TIE: f64 = 1e-12;

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem, opt: SolverOptions, max_artificials: usize) -> Self {
        let m = problem.n_rows();
        let n = problem.n_vars();
        let cap = n + m + max_artificials;
        let mut cols = Vec::with_capacity(cap * m);
        cols.resize((n + m) * m, 0.0);
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j * m + i] += a;
            }
            cols[(n + i) * m + i] = 1.0;
        }
        let mut lo = problem.lower.clone();
        let mut hi = problem.upper.clone();
        for row in &problem.rows {
            let (l, u) = slack_bounds(row.sense);
            lo.push(l);
            hi.push(u);
        }
        let mut cost = problem.objective.clone();
        cost.resize(n + m, 0.0);
        Simplex {
            problem,
            opt,
            m,
            n,
            cols,
            ncols: n + m,
            x: vec![0.0; n + m],
            lo,
            hi,
            cost,
            b: problem.rows.iter().map(|r| r.rhs).collect(),
            basic: Vec::new(),
            pos: vec![NONBASIC; n + m],
            binv: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.hi[j] - self.lo[j] <= 0.0
    }

    /// Default nonbasic resting value.
    fn rest_value(&self, j: usize, prefer_upper: bool) -> f64 {
        let (l, u) = (self.lo[j], self.hi[j]);
        if prefer_upper && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn add_artificial(&mut self, row: usize, sign: f64) -> usize {
        let j = self.ncols;
        self.cols.resize((j + 1) * self.m, 0.0);
        self.cols[j * self.m + row] = sign;
        self.lo.push(0.0);
        self.hi.push(f64::INFINITY);
        self.cost.push(0.0);
        self.x.push(0.0);
        self.pos.push(NONBASIC);
        self.ncols += 1;
        j
    }

    fn residual_rhs(&self) -> Vec<f64> {
        let mut r = self.b.clone();
        for j in 0..self.ncols {
            if self.pos[j] == NONBASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (ri, a) in r.iter_mut().zip(self.col(j)) {
                    *ri -= a * xj;
                }
            }
        }
        r
    }

    fn compute_basic_values(&mut self) {
        let r = self.residual_rhs();
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basic[i]] = v;
        }
    }

    /// Gauss-Jordan inversion of the current basis with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (p, &j) in self.basic.iter().enumerate() {
            for i in 0..m {
                a[i * m + p] = self.cols[j * m + i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(Error::Numerical(format!(
                    "singular basis (pivot {best:e} in column {c})"
                )));
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        Ok(())
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for p in 0..m {
            let cb = self.cost[self.basic[p]];
            if cb != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yi, a) in self.y.iter_mut().zip(row) {
                    *yi += cb * a;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = self.col(j);
        self.cost[j] - c.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>()
    }

    fn compute_alpha(&mut self, j: usize) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for (k, a) in self.cols[j * m..(j + 1) * m].iter().enumerate() {
                if *a != 0.0 {
                    s += row[k] * a;
                }
            }
            self.alpha[i] = s;
        }
    }

    /// Replaces the basic column at position `r` by column `q`, using the
    /// already computed `alpha = B^-1 a_q`.
    fn pivot(&mut self, r: usize, q: usize) -> Result<()> {
        let m = self.m;
        let piv = self.alpha[r];
        let leaving = self.basic[r];
        self.pos[leaving] = NONBASIC;
        self.basic[r] = q;
        self.pos[q] = r;
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.alpha[i];
            if f != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opt.refactor_every {
            self.refactor()?;
            self.compute_basic_values();
        }
        if self.iterations > self.opt.max_iterations {
            return Err(Error::Numerical("simplex iteration limit reached".into()));
        }
        Ok(())
    }

    fn primal(&mut self) -> Result<PrimalOutcome> {
        let otol = self.opt.optimality_tol;
        let ptol = self.opt.pivot_tol;
        self.degenerate_run = 0;
        loop {
            self.compute_duals();
            let bland = self.degenerate_run >= self.opt.bland_after;
            // Pricing: (column, direction, |d_j|)
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                if self.pos[j] != NONBASIC || self.is_fixed(j) {
                    continue;
                }
                let d = self.reduced_cost(j);
                let xj = self.x[j];
                let at_lo = self.lo[j].is_finite() && xj <= self.lo[j];
                let at_hi = self.hi[j].is_finite() && xj >= self.hi[j];
                let dir = if d < -otol && !at_hi {
                    1.0
                } else if d > otol && !at_lo {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                return Ok(PrimalOutcome::Optimal);
            };
            self.compute_alpha(q);
            // Ratio test. Basic i moves by -dir * theta * alpha_i.
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let rate = -dir * self.alpha[i];
                if rate.abs() <= ptol {
                    continue;
                }
                let j = self.basic[i];
                let (limit, target) = if rate < 0.0 {
                    if !self.lo[j].is_finite() {
                        continue;
                    }
                    (((self.x[j] - self.lo[j]) / -rate).max(0.0), self.lo[j])
                } else {
                    if !self.hi[j].is_finite() {
                        continue;
                    }
                    (((self.hi[j] - self.x[j]) / rate).max(0.0), self.hi[j])
                };
                let take = match leave {
                    None => true,
                    Some((r, _)) => {
                        limit < theta - RATIO_TIE
                            || (limit <= theta + RATIO_TIE && j < self.basic[r])
                    }
                };
                if take {
                    theta = if leave.is_none() { limit } else { theta.min(limit) };
                    leave = Some((i, target));
                }
            }
            if let Some((r, _)) = leave {
                let j = self.basic[r];
                let rate = -dir * self.alpha[r];
                theta = if rate < 0.0 {
                    ((self.x[j] - self.lo[j]) / -rate).max(0.0)
                } else {
                    ((self.hi[j] - self.x[j]) / rate).max(0.0)
                };
            }
            let flip = self.hi[q] - self.lo[q];
            if flip.is_finite() && flip <= theta {
                // Bound flip: entering variable crosses to its other bound.
                let step = dir * flip;
                self.x[q] += step;
                for i in 0..self.m {
                    let b = self.basic[i];
                    self.x[b] -= step * self.alpha[i];
                }
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                self.iterations += 1;
                self.degenerate_run = 0;
                if self.iterations > self.opt.max_iterations {
                    return Err(Error::Numerical("simplex iteration limit reached".into()));
                }
                continue;
            }
            let Some((r, target)) = leave else {
                return Ok(PrimalOutcome::Unbounded);
            };
            if theta <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            let step = dir * theta;
            self.x[q] += step;
            for i in 0..self.m {
                let b = self.basic[i];
                self.x[b] -= step * self.alpha[i];
            }
            let leaving = self.basic[r];
            self.pivot(r, q)?;
            self.x[leaving] = target;
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn dual(&mut self) -> Result<DualOutcome> {
        let ftol = self.opt.feasibility_tol;
        let ptol = self.opt.pivot_tol;
        loop {
            // Leaving row: largest bound violation, lowest column on ties.
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut worst = ftol;
            for i in 0..self.m {
                let j = self.basic[i];
                let (viol, below) = if self.x[j] < self.lo[j] - ftol {
                    (self.lo[j] - self.x[j], true)
                } else if self.x[j] > self.hi[j] + ftol {
                    (self.x[j] - self.hi[j], false)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((r, _, _)) => viol > worst || (viol == worst && j < self.basic[r]),
                };
                if better {
                    worst = viol;
                    leave = Some((i, viol, below));
                }
            }
            let Some((r, _, below)) = leave else {
                return Ok(DualOutcome::Optimal);
            };
            self.compute_duals();
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut enter: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for j in 0..self.ncols {
                if self.pos[j] != NONBASIC || self.is_fixed(j) {
                    continue;
                }
                let a: f64 = self.col(j).iter().zip(&rho).map(|(a, p)| a * p).sum();
                if a.abs() <= ptol {
                    continue;
                }
                let xj = self.x[j];
                let can_up = !(self.hi[j].is_finite() && xj >= self.hi[j]);
                let can_down = !(self.lo[j].is_finite() && xj <= self.lo[j]);
                // x_r changes by -a * delta_j; we need it to move toward the violated bound.
                let ok = if below {
                    (a < 0.0 && can_up) || (a > 0.0 && can_down)
                } else {
                    (a > 0.0 && can_up) || (a < 0.0 && can_down)
                };
                if !ok {
                    continue;
                }
                let ratio = self.reduced_cost(j).abs() / a.abs();
                if ratio < best_ratio - 1e-12 {
                    best_ratio = ratio;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(DualOutcome::Infeasible);
            };
            self.compute_alpha(q);
            let leaving = self.basic[r];
            let target = if below { self.lo[leaving] } else { self.hi[leaving] };
            let delta = (self.x[leaving] - target) / self.alpha[r];
            self.x[q] += delta;
            for i in 0..self.m {
                let b = self.basic[i];
                self.x[b] -= delta * self.alpha[i];
            }
            self.pivot(r, q)?;
            self.x[leaving] = target;
        }
    }

    fn primal_infeasibility(&self) -> f64 {
        self.basic
            .iter()
            .map(|&j| (self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn dual_feasible(&mut self) -> bool {
        self.compute_duals();
        let tol = self.opt.optimality_tol.max(1e-9) * 10.0;
        (0..self.ncols).all(|j| {
            if self.pos[j] != NONBASIC || self.is_fixed(j) {
                return true;
            }
            let d = self.reduced_cost(j);
            let xj = self.x[j];
            let at_lo = self.lo[j].is_finite() && xj <= self.lo[j];
            let at_hi = self.hi[j].is_finite() && xj >= self.hi[j];
            (d >= -tol || at_hi) && (d <= tol || at_lo)
        })
    }

    fn load_basis(&mut self, basis: &Basis) -> bool {
        let total = self.n + self.m;
        if basis.n_vars != self.n
            || basis.n_rows != self.m
            || basis.basic.len() != self.m
            || basis.at_upper.len() != total
        {
            return false;
        }
        let mut seen = vec![false; total];
        for &j in &basis.basic {
            if j >= total || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        self.basic = basis.basic.clone();
        for (p, &j) in self.basic.iter().enumerate() {
            self.pos[j] = p;
        }
        for j in 0..total {
            if self.pos[j] == NONBASIC {
                self.x[j] = self.rest_value(j, basis.at_upper[j]);
            }
        }
        if self.refactor().is_err() {
            return false;
        }
        self.compute_basic_values();
        true
    }

    fn run_warm(&mut self) -> Result<Option<LpSolution>> {
        if self.primal_infeasibility() > self.opt.feasibility_tol {
            if !self.dual_feasible() {
                return Ok(None);
            }
            match self.dual() {
                Ok(DualOutcome::Optimal) => {}
                // Let the cold path classify infeasibility with phase 1.
                Ok(DualOutcome::Infeasible) | Err(Error::Numerical(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        match self.primal() {
            Ok(PrimalOutcome::Optimal) => {}
            Ok(PrimalOutcome::Unbounded) | Err(Error::Numerical(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
        // Final refactor keeps reported values consistent with the basis.
        self.refactor()?;
        self.compute_basic_values();
        if self.primal_infeasibility() > self.opt.feasibility_tol {
            return Ok(None);
        }
        Ok(Some(self.solution(LpStatus::Optimal, true)))
    }

    fn run_cold(&mut self) -> Result<LpSolution> {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.x[j] = self.rest_value(j, false);
        }
        let r = {
            // residual with slacks at zero
            let mut r = self.b.clone();
            for j in 0..n {
                let xj = self.x[j];
                if xj != 0.0 {
                    for (ri, a) in r.iter_mut().zip(self.col(j)) {
                        *ri -= a * xj;
                    }
                }
            }
            r
        };
        self.basic = Vec::with_capacity(m);
        let mut artificials = Vec::new();
        for i in 0..m {
            let s = n + i;
            let (l, u) = (self.lo[s], self.hi[s]);
            if r[i] >= l - self.opt.feasibility_tol && r[i] <= u + self.opt.feasibility_tol {
                self.basic.push(s);
                self.pos[s] = i;
                self.x[s] = r[i];
            } else {
                let clip = r[i].clamp(l, u);
                self.x[s] = clip;
                let sign = if r[i] > clip { 1.0 } else { -1.0 };
                let a = self.add_artificial(i, sign);
                self.basic.push(a);
                self.pos[a] = i;
                self.x[a] = (r[i] - clip).abs();
                artificials.push(a);
            }
        }
        self.refactor()?;
        if !artificials.is_empty() {
            let real_cost = std::mem::take(&mut self.cost);
            self.cost = vec![0.0; self.ncols];
            for &a in &artificials {
                self.cost[a] = 1.0;
            }
            if let PrimalOutcome::Unbounded = self.primal()? {
                return Err(Error::Internal("phase 1 reported unbounded".into()));
            }
            self.refactor()?;
            self.compute_basic_values();
            let infeas: f64 = artificials.iter().map(|&a| self.x[a].max(0.0)).sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if infeas > self.opt.feasibility_tol * scale {
                return Ok(self.solution(LpStatus::Infeasible, false));
            }
            self.cost = real_cost;
            self.cost.resize(self.ncols, 0.0);
            for &a in &artificials {
                self.hi[a] = 0.0;
                if self.pos[a] == NONBASIC {
                    self.x[a] = 0.0;
                }
            }
            self.drive_out_artificials(&artificials)?;
        }
        let outcome = self.primal()?;
        self.refactor()?;
        self.compute_basic_values();
        match outcome {
            PrimalOutcome::Optimal => Ok(self.solution(LpStatus::Optimal, false)),
            PrimalOutcome::Unbounded => Ok(self.solution(LpStatus::Unbounded, false)),
        }
    }

    fn drive_out_artificials(&mut self, artificials: &[usize]) -> Result<()> {
        let limit = self.n + self.m;
        for &a in artificials {
            let r = self.pos[a];
            if r == NONBASIC {
                continue;
            }
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..limit {
                if self.pos[j] != NONBASIC {
                    continue;
                }
                let v: f64 = self.col(j).iter().zip(&rho).map(|(a, p)| a * p).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((q, _)) = best {
                self.compute_alpha(q);
                // Degenerate pivot: artificial is at zero so nothing moves.
                self.pivot(r, q)?;
                self.x[a] = 0.0;
            }
        }
        self.refactor()?;
        self.compute_basic_values();
        Ok(())
    }

    fn solution(&mut self, status: LpStatus, warm_started: bool) -> LpSolution {
        let n = self.n;
        let mut primal: Vec<f64> = self.x[..n].to_vec();
        if status == LpStatus::Optimal {
            for (j, v) in primal.iter_mut().enumerate() {
                let (l, u) = (self.problem.lower[j], self.problem.upper[j]);
                if *v < l {
                    *v = l;
                } else if *v > u {
                    *v = u;
                }
            }
        }
        let objective_value = primal
            .iter()
            .zip(&self.problem.objective)
            .map(|(x, c)| x * c)
            .sum();
        let duals = if status == LpStatus::Optimal {
            self.compute_duals();
            self.y.clone()
        } else {
            Vec::new()
        };
        let total = self.n + self.m;
        let basis = if self.basic.iter().all(|&j| j < total) {
            Some(Basis {
                n_vars: self.n,
                n_rows: self.m,
                basic: self.basic.clone(),
                at_upper: (0..total)
                    .map(|j| {
                        self.pos[j] == NONBASIC
                            && self.hi[j].is_finite()
                            && self.x[j] >= self.hi[j]
                            && self.hi[j] > self.lo[j]
                    })
                    .collect(),
            })
        } else {
            None
        };
        LpSolution {
            status,
            primal,
            objective_value,
            duals,
            basis,
            iterations: self.iterations,
            warm_started,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn one_var(lo: f64, hi: f64, rhs: f64) -> LpProblem {
        let mut p = LpProblem::new();
        let x = p.add_var(1.0, lo, hi);
        p.add_row(vec![(x, 1.0)], Sense::Ge, rhs);
        p
    }

    #[test]
    fn trivial_optimum() {
        let s = solve(&one_var(0.0, 10.0, 1.0)).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 1.0).abs() < 1e-12);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_infeasible() {
        let s = solve(&one_var(0.0, 2.0, 5.0)).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut p = LpProblem::new();
        let x = p.add_var(-1.0, 0.0, INF);
        let y = p.add_var(0.0, 0.0, INF);
        p.add_row(vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // min x + 2y  s.t. x + y = 3, x - y >= -1, y free, x in [0, 10]
        let mut p = LpProblem::new();
        let x = p.add_var(1.0, 0.0, 10.0);
        let y = p.add_var(2.0, -INF, INF);
        p.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        p.add_row(vec![(x, 1.0), (y, -1.0)], Sense::Ge, -1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // y as small as possible: x - y <= 10 from x <= 10 ... optimum x=10? y=-7, obj=-4
        assert!((s.primal[0] - 10.0).abs() < 1e-9);
        assert!((s.primal[1] + 7.0).abs() < 1e-9);
        assert!((s.objective_value + 4.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_errors_surface_before_solving() {
        let mut p = one_var(0.0, 1.0, 0.0);
        p.lower.pop();
        assert!(matches!(solve(&p), Err(Error::Dimension { .. })));
        let mut p = one_var(0.0, 1.0, 0.0);
        p.rows[0].coeffs.push((5, 1.0));
        assert!(matches!(solve(&p), Err(Error::Dimension { .. })));
        let p = one_var(2.0, 1.0, 0.0);
        assert!(matches!(solve(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn warm_start_on_own_basis_takes_at_most_one_pivot() {
        let mut p = LpProblem::new();
        let a = p.add_var(3.0, 0.0, 50.0);
        let b = p.add_var(5.0, 0.0, 50.0);
        p.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Ge, 70.0);
        p.add_row(vec![(a, 1.0), (b, -1.0)], Sense::Le, 10.0);
        let cold = solve(&p).unwrap();
        let warm = warm_hint(&p, cold.basis.as_ref().unwrap()).unwrap();
        assert!(warm.warm_started);
        assert!(warm.iterations <= 1);
        assert!((warm.objective_value - cold.objective_value).abs() < 1e-8);
    }

    #[test]
    fn warm_start_with_wrong_dimensions_falls_back() {
        let p = one_var(0.0, 10.0, 1.0);
        let bogus = Basis {
            n_vars: 3,
            n_rows: 1,
            basic: vec![0],
            at_upper: vec![false; 4],
        };
        let s = warm_hint(&p, &bogus).unwrap();
        assert!(!s.warm_started);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_after_rhs_perturbation_matches_cold() {
        let mut p = LpProblem::new();
        let a = p.add_var(3.0, 0.0, 50.0);
        let b = p.add_var(5.0, 5.0, 50.0);
        let c = p.add_var(4.0, 0.0, 30.0);
        p.add_row(vec![(a, 1.0), (b, 1.0), (c, 1.0)], Sense::Eq, 70.0);
        p.add_row(vec![(a, 1.0), (c, -1.0)], Sense::Le, 20.0);
        let base = solve(&p).unwrap();
        let mut q = p.clone();
        q.rows[0].rhs += 1e-3;
        q.rows[1].rhs -= 1e-3;
        let cold = solve(&q).unwrap();
        let warm = warm_hint(&q, base.basis.as_ref().unwrap()).unwrap();
        assert_eq!(warm.status, cold.status);
        assert!((warm.objective_value - cold.objective_value).abs() < 1e-8);
        // Objective is Lipschitz in the rhs with constant max |dual| * |perturbation|.
        let lip: f64 = base.duals.iter().map(|y| y.abs()).sum::<f64>() * 1e-3;
        assert!((cold.objective_value - base.objective_value).abs() <= lip + 1e-9);
    }

    #[test]
    fn dual_bound_matches_primal_at_optimum() {
        let mut p = LpProblem::new();
        let a = p.add_var(2.0, 0.0, 4.0);
        let b = p.add_var(3.0, 1.0, INF);
        p.add_row(vec![(a, 1.0), (b, 2.0)], Sense::Ge, 6.0);
        p.add_row(vec![(a, 1.0), (b, -1.0)], Sense::Le, 2.0);
        let s = solve(&p).unwrap();
        let bound = dual_bound(&p, &s.duals, 1e-9).unwrap();
        assert!(bound <= s.objective_value + 1e-6);
        assert!((bound - s.objective_value).abs() < 1e-7);
    }

    #[test]
    fn dump_layout_is_stable() {
        let mut p = LpProblem::new();
        let x = p.add_var(1.0, 0.0, 10.0);
        let y = p.add_var(-2.5, f64::NEG_INFINITY, INF);
        p.add_row(vec![(x, 1.0), (y, 3.0)], Sense::Le, 4.0);
        p.add_row(vec![(y, 1.0)], Sense::Eq, 0.5);
        let golden = "lp 2 2\nobj 1 -2.5\nrow 0 <= 4 : 0:1 1:3\nrow 1 = 0.5 : 1:1\n\
                      bound 0 0 10\nbound 1 -inf inf\n";
        assert_eq!(p.dump(), golden);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Klee-Minty-like degenerate vertex at origin with many tight rows.
        let mut p = LpProblem::new();
        let v: Vec<usize> = (0..4).map(|_| p.add_var(-1.0, 0.0, INF)).collect();
        for i in 0..4 {
            let coeffs = v.iter().map(|&j| (j, if j == v[i] { 1.0 } else { 0.5 })).collect();
            p.add_row(coeffs, Sense::Le, 0.0);
        }
        p.add_row(v.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective_value.abs() < 1e-9);
    }
}
