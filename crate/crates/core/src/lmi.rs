//! PDC stability LMIs: constraint assembly, a margin-maximizing feasibility
//! solver, gain recovery, and Lyapunov certification.
//!
//! The decision variables are a symmetric `X` and one `M_i` per rule; the
//! recovered gains are `F_i = M_i X^{-1}` with Lyapunov matrix `P = X^{-1}`.
//! The solver maximizes the common margin `t` subject to every constraint
//! dominating `t I`, by log-det barrier path following (a small dense
//! interior-point scheme). The feasibility set is homogeneous in `(X, M)` and
//! unbounded in `M`, so internal caps on `X` and on each `M_i` make it
//! compact; they double as conditioning and gain-magnitude guards. A
//! projected-subgradient pass backs up Newton if the first centering stalls.

use crate::error::{Result, WmrError};
use crate::scalar::Real;
use crate::ts::{TsModel, RULE_COUNT};
use nalgebra::{Complex, DMatrix, DVector, Matrix2x3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One rule's consequent system, dimension-erased.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSystem<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
}

/// Which LMI a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `X > 0`.
    PositiveX,
    /// Single-rule condition for rule `i` (strict).
    Single(usize),
    /// Cross condition for the overlapping pair `(i, j)`, `i < j` (non-strict).
    Cross(usize, usize),
}

/// Assembled feasibility problem: rules plus the constraint list.
#[derive(Debug, Clone)]
pub struct LmiProblem<T: Real> {
    pub rules: Vec<RuleSystem<T>>,
    pub constraints: Vec<ConstraintKind>,
    /// State dimension.
    pub n: usize,
    /// Input dimension.
    pub m: usize,
}

/// Solver settings. `max_iter` bounds the barrier-parameter stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T: Real> {
    pub tol_feas: T,
    /// Maximum path-following stages (barrier parameter updates).
    pub max_iter: usize,
    /// Scale cap: the solver adds `cap I - X >= t I`, bounding both the
    /// homogeneous scale freedom and the conditioning of `X`.
    pub x_cap: T,
    /// Spectral-norm cap on each `M_i` (block constraint), keeping the
    /// recovered gains `F_i = M_i X^{-1}` at a usable magnitude.
    pub m_cap: T,
    /// Newton iterations per centering pass.
    pub newton_steps: usize,
    /// Exponential decay rate `alpha` enforced on the closed loop: the
    /// synthesis conditions are solved for `A_i + alpha I`, which guarantees
    /// `dV/dt <= -2 alpha V` along blended closed-loop trajectories. Zero
    /// reduces to plain stabilization.
    pub decay_rate: T,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol_feas: T::of(1e-6),
            max_iter: 24,
            x_cap: T::of(10.0),
            m_cap: T::of(20.0),
            newton_steps: 60,
            decay_rate: T::of(0.5),
        }
    }
}

/// Feasible synthesis result.
#[derive(Debug, Clone)]
pub struct PdcSynthesis<T: Real> {
    pub x: DMatrix<T>,
    pub m_vars: Vec<DMatrix<T>>,
    /// `F_i = M_i X^{-1}`.
    pub gains: Vec<DMatrix<T>>,
    /// `P = X^{-1}`, symmetrized.
    pub p: DMatrix<T>,
    /// Smallest eigenvalue over all problem constraints at the solution.
    pub margin: T,
}

impl<T: Real> PdcSynthesis<T> {
    /// Gains as fixed 2x3 matrices (the WMR case).
    pub fn gains_2x3(&self) -> Vec<Matrix2x3<T>> {
        self.gains
            .iter()
            .map(|f| {
                assert_eq!((f.nrows(), f.ncols()), (2, 3));
                Matrix2x3::from_fn(|r, c| f[(r, c)])
            })
            .collect()
    }
}

/// Build the PDC LMI set for a 16-rule model: X-positivity, one strict
/// condition per rule, and the non-strict cross condition for every pair
/// (with two-label product memberships all pairs fire together somewhere,
/// so no pair is excluded).
pub fn build_pdc_lmi<T: Real>(model: &TsModel<T>) -> LmiProblem<T> {
    let rules = model
        .rules
        .iter()
        .map(|r| RuleSystem {
            a: DMatrix::from_fn(3, 3, |i, j| r.a[(i, j)]),
            b: DMatrix::from_fn(3, 2, |i, j| r.b[(i, j)]),
        })
        .collect();
    problem_from_rules(rules)
}

/// Same constraint family over an arbitrary rule list.
pub fn problem_from_rules<T: Real>(rules: Vec<RuleSystem<T>>) -> LmiProblem<T> {
    assert!(!rules.is_empty());
    let n = rules[0].a.nrows();
    let m = rules[0].b.ncols();
    let r = rules.len();
    let mut constraints = Vec::with_capacity(1 + r + r * (r - 1) / 2);
    constraints.push(ConstraintKind::PositiveX);
    for i in 0..r {
        constraints.push(ConstraintKind::Single(i));
    }
    for i in 0..r {
        for j in i + 1..r {
            constraints.push(ConstraintKind::Cross(i, j));
        }
    }
    LmiProblem {
        rules,
        constraints,
        n,
        m,
    }
}

fn to_f64<T: Real>(x: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

/// Single-rule LMI value `-X A^T - A X + M^T B^T + B M`.
fn single_value<T: Real>(rule: &RuleSystem<T>, x: &DMatrix<T>, m: &DMatrix<T>) -> DMatrix<T> {
    let ax = &rule.a * x;
    let bm = &rule.b * m;
    -(&ax.transpose()) - &ax + bm.transpose() + bm
}

impl<T: Real> LmiProblem<T> {
    /// Value of one constraint at `(X, M_1..M_r)`.
    pub fn constraint_value(
        &self,
        kind: ConstraintKind,
        x: &DMatrix<T>,
        ms: &[DMatrix<T>],
    ) -> DMatrix<T> {
        match kind {
            ConstraintKind::PositiveX => x.clone(),
            ConstraintKind::Single(i) => single_value(&self.rules[i], x, &ms[i]),
            ConstraintKind::Cross(i, j) => {
                let ri = &self.rules[i];
                let rj = &self.rules[j];
                let ax = (&ri.a + &rj.a) * x;
                let bimj = &ri.b * &ms[j];
                let bjmi = &rj.b * &ms[i];
                -(&ax.transpose()) - &ax
                    + bimj.transpose()
                    + bimj
                    + bjmi.transpose()
                    + bjmi
            }
        }
    }

    /// Same constraint set with every `A_i` replaced by `A_i + alpha I`.
    /// Feasibility of the shifted problem certifies decay rate `alpha`.
    pub fn with_decay_rate(&self, alpha: T) -> Self {
        let mut shifted = self.clone();
        for rule in &mut shifted.rules {
            for k in 0..self.n {
                rule.a[(k, k)] += alpha;
            }
        }
        shifted
    }

    /// Smallest constraint eigenvalue at `(X, M)` over the problem set.
    pub fn margin(&self, x: &DMatrix<T>, ms: &[DMatrix<T>]) -> T {
        self.constraints
            .iter()
            .map(|&k| min_eig(&symmetrize(self.constraint_value(k, x, ms))))
            .fold(T::of(f64::INFINITY), |acc, v| acc.min(v))
    }
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    let half = T::of(0.5);
    let mt = m.transpose();
    (m + mt) * half
}

fn min_eig<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(T::of(f64::INFINITY), |acc, &v| acc.min(v))
}

fn max_eig<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(T::of(f64::NEG_INFINITY), |acc, &v| acc.max(v))
}

// ---------------------------------------------------------------------------
// Solver internals
//
// The program solved is `maximize t subject to C_k(theta) - t I >= 0` over the
// problem constraints plus two solver-internal families that make the feasible
// set compact (the problem is homogeneous in (X, M) and otherwise unbounded in
// M): `x_cap I - X >= t I` and the block bound `[[m_cap I, M_i], [M_i^T,
// m_cap I]] >= t I` per rule. It is solved by path following: `t` joins the
// decision vector and damped Newton maximizes `mu t + sum_k log det(C_k - tI)`
// for an increasing barrier weight `mu`.

/// Internal constraint index: problem constraints followed by the caps.
#[derive(Clone, Copy)]
enum SolverConstraint {
    Problem(usize),
    CapX,
    CapM(usize),
}

struct Solver<'a, T: Real> {
    problem: &'a LmiProblem<T>,
    settings: SolverSettings<T>,
    /// Number of scalar decision variables, including the margin variable.
    dim: usize,
    n_x: usize,
    /// Index of the margin variable `t` (last slot).
    t_var: usize,
    /// For each solver constraint: list of (variable index, derivative matrix).
    derivs: Vec<Vec<(usize, DMatrix<T>)>>,
    all: Vec<SolverConstraint>,
}

/// Map the flat index of a symmetric-matrix variable to its (row, col).
fn sym_coords(n: usize, idx: usize) -> (usize, usize) {
    let mut k = idx;
    for r in 0..n {
        let row_len = n - r;
        if k < row_len {
            return (r, r + k);
        }
        k -= row_len;
    }
    unreachable!("symmetric index out of range")
}

fn sym_basis<T: Real>(n: usize, idx: usize) -> DMatrix<T> {
    let (r, c) = sym_coords(n, idx);
    let mut e = DMatrix::zeros(n, n);
    e[(r, c)] = T::one();
    e[(c, r)] = T::one();
    e
}

impl<'a, T: Real> Solver<'a, T> {
    fn new(problem: &'a LmiProblem<T>, settings: SolverSettings<T>) -> Self {
        let n = problem.n;
        let m = problem.m;
        let r = problem.rules.len();
        let n_x = n * (n + 1) / 2;
        let t_var = n_x + r * m * n;
        let dim = t_var + 1;

        let mut all: Vec<SolverConstraint> = (0..problem.constraints.len())
            .map(SolverConstraint::Problem)
            .collect();
        all.push(SolverConstraint::CapX);
        for i in 0..r {
            all.push(SolverConstraint::CapM(i));
        }

        // Per-constraint affine derivative lists. Every constraint carries the
        // shift `- t I`, so `t` appears in each list with derivative `-I`.
        let mut derivs = Vec::with_capacity(all.len());
        let m_var = |rule: usize, flat: usize| n_x + rule * m * n + flat;
        for sc in &all {
            let mut list: Vec<(usize, DMatrix<T>)> = Vec::new();
            match sc {
                SolverConstraint::CapX => {
                    for k in 0..n_x {
                        list.push((k, -sym_basis::<T>(n, k)));
                    }
                }
                SolverConstraint::CapM(i) => {
                    // Block [[m_cap I_m, M_i], [M_i^T, m_cap I_n]].
                    for flat in 0..m * n {
                        let (row, col) = (flat / n, flat % n);
                        let mut d = DMatrix::zeros(m + n, m + n);
                        d[(row, m + col)] = T::one();
                        d[(m + col, row)] = T::one();
                        list.push((m_var(*i, flat), d));
                    }
                }
                SolverConstraint::Problem(ci) => match problem.constraints[*ci] {
                    ConstraintKind::PositiveX => {
                        for k in 0..n_x {
                            list.push((k, sym_basis(n, k)));
                        }
                    }
                    ConstraintKind::Single(i) => {
                        let a = &problem.rules[i].a;
                        let b = &problem.rules[i].b;
                        for k in 0..n_x {
                            let e = sym_basis::<T>(n, k);
                            let ae = a * &e;
                            list.push((k, -(&ae.transpose()) - ae));
                        }
                        for flat in 0..m * n {
                            let mut u = DMatrix::zeros(m, n);
                            u[(flat / n, flat % n)] = T::one();
                            let bu = b * u;
                            list.push((m_var(i, flat), bu.transpose() + bu));
                        }
                    }
                    ConstraintKind::Cross(i, j) => {
                        let asum = &problem.rules[i].a + &problem.rules[j].a;
                        for k in 0..n_x {
                            let e = sym_basis::<T>(n, k);
                            let ae = &asum * &e;
                            list.push((k, -(&ae.transpose()) - ae));
                        }
                        // M_i pairs with B_j, M_j with B_i.
                        for (rule, bmat) in [(i, &problem.rules[j].b), (j, &problem.rules[i].b)] {
                            for flat in 0..m * n {
                                let mut u = DMatrix::zeros(m, n);
                                u[(flat / n, flat % n)] = T::one();
                                let bu = bmat * u;
                                list.push((m_var(rule, flat), bu.transpose() + bu));
                            }
                        }
                    }
                },
            }
            let block = match sc {
                SolverConstraint::CapM(_) => m + n,
                _ => n,
            };
            list.push((t_var, -DMatrix::identity(block, block)));
            derivs.push(list);
        }

        Self {
            problem,
            settings,
            dim,
            n_x,
            t_var,
            derivs,
            all,
        }
    }

    fn unpack(&self, theta: &DVector<T>) -> (DMatrix<T>, Vec<DMatrix<T>>) {
        let n = self.problem.n;
        let m = self.problem.m;
        let mut x = DMatrix::zeros(n, n);
        for k in 0..self.n_x {
            let (r, c) = sym_coords(n, k);
            x[(r, c)] = theta[k];
            x[(c, r)] = theta[k];
        }
        let ms = (0..self.problem.rules.len())
            .map(|i| {
                DMatrix::from_fn(m, n, |r, c| theta[self.n_x + i * m * n + r * n + c])
            })
            .collect();
        (x, ms)
    }

    fn value(&self, sc: SolverConstraint, x: &DMatrix<T>, ms: &[DMatrix<T>]) -> DMatrix<T> {
        match sc {
            SolverConstraint::Problem(ci) => {
                symmetrize(self.problem.constraint_value(self.problem.constraints[ci], x, ms))
            }
            SolverConstraint::CapX => {
                DMatrix::identity(self.problem.n, self.problem.n) * self.settings.x_cap - x
            }
            SolverConstraint::CapM(i) => {
                let (m, n) = (self.problem.m, self.problem.n);
                let mut v = DMatrix::identity(m + n, m + n) * self.settings.m_cap;
                for r in 0..m {
                    for c in 0..n {
                        v[(r, m + c)] = ms[i][(r, c)];
                        v[(m + c, r)] = ms[i][(r, c)];
                    }
                }
                v
            }
        }
    }

    /// Shifted slack matrices `C_k - t I`.
    fn slacks(&self, theta: &DVector<T>) -> Vec<DMatrix<T>> {
        let (x, ms) = self.unpack(theta);
        let t = theta[self.t_var];
        self.all
            .iter()
            .map(|&sc| shift(&self.value(sc, &x, &ms), -t))
            .collect()
    }

    /// Smallest eigenvalue over all unshifted solver constraints.
    fn all_min(&self, theta: &DVector<T>) -> T {
        let (x, ms) = self.unpack(theta);
        self.all
            .iter()
            .map(|&sc| min_eig(&self.value(sc, &x, &ms)))
            .fold(T::of(f64::INFINITY), |acc, v| acc.min(v))
    }

    /// Barrier potential `mu t + sum log det(C_k - t I)`; `None` outside the
    /// cone.
    fn potential(&self, theta: &DVector<T>, mu: T) -> Option<T> {
        let mut phi = mu * theta[self.t_var];
        for s in self.slacks(theta) {
            let chol = s.cholesky()?;
            let l = chol.l();
            for k in 0..l.nrows() {
                phi += T::of(2.0) * l[(k, k)].ln();
            }
        }
        Some(phi)
    }

    /// One centering pass at barrier weight `mu` via damped Newton. Returns
    /// false if no progress could be made at all.
    fn center(&self, theta: &mut DVector<T>, mu: T) -> bool {
        let mut progressed = false;
        let mut phi = match self.potential(theta, mu) {
            Some(p) => p,
            None => return false,
        };
        for _ in 0..self.settings.newton_steps {
            // Inverses of the shifted slacks.
            let mut invs = Vec::with_capacity(self.all.len());
            for s in self.slacks(theta) {
                match s.cholesky() {
                    Some(c) => invs.push(c.inverse()),
                    None => return progressed,
                }
            }
            let mut grad = DVector::zeros(self.dim);
            grad[self.t_var] = mu;
            let mut hess = DMatrix::zeros(self.dim, self.dim);
            for (k, list) in self.derivs.iter().enumerate() {
                let w: Vec<(usize, DMatrix<T>)> = list
                    .iter()
                    .map(|(j, d)| (*j, &invs[k] * d))
                    .collect();
                for (j, wj) in &w {
                    grad[*j] += wj.trace();
                }
                for a in 0..w.len() {
                    for b in a..w.len() {
                        let v = trace_prod(&w[a].1, &w[b].1);
                        let (ja, jb) = (w[a].0, w[b].0);
                        hess[(ja, jb)] += v;
                        if ja != jb {
                            hess[(jb, ja)] += v;
                        }
                    }
                }
            }
            // Newton step for maximizing phi: H delta = grad.
            let mut ridge = T::zero();
            let delta = loop {
                let mut h = hess.clone();
                if ridge > T::zero() {
                    for k in 0..self.dim {
                        h[(k, k)] += ridge;
                    }
                }
                match h.cholesky() {
                    Some(c) => break c.solve(&grad),
                    None => {
                        ridge = if ridge == T::zero() {
                            T::of(1e-10)
                        } else {
                            ridge * T::of(100.0)
                        };
                        if ridge > T::of(1e6) {
                            return progressed;
                        }
                    }
                }
            };
            let decrement = grad.dot(&delta);
            if decrement <= T::of(1e-9) {
                return true;
            }
            // Backtracking line search inside the feasible cone.
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let cand = theta.clone() + &delta * alpha;
                if let Some(p) = self.potential(&cand, mu) {
                    if p > phi {
                        *theta = cand;
                        phi = p;
                        accepted = true;
                        progressed = true;
                        break;
                    }
                }
                alpha *= T::of(0.5);
            }
            if !accepted {
                return progressed;
            }
        }
        true
    }

    /// Fallback: subgradient ascent on the minimum constraint eigenvalue.
    fn subgradient_pass(&self, theta: &mut DVector<T>, steps: usize) {
        for _ in 0..steps {
            let vals: Vec<DMatrix<T>> = {
                let (x, ms) = self.unpack(theta);
                self.all.iter().map(|&sc| self.value(sc, &x, &ms)).collect()
            };
            let (mut worst_k, mut worst) = (0usize, T::of(f64::INFINITY));
            for (k, v) in vals.iter().enumerate() {
                let e = min_eig(v);
                if e < worst {
                    worst = e;
                    worst_k = k;
                }
            }
            let eig = vals[worst_k].clone().symmetric_eigen();
            let (mut idx, mut best) = (0usize, T::of(f64::INFINITY));
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                if l < best {
                    best = l;
                    idx = i;
                }
            }
            let v = eig.eigenvectors.column(idx).into_owned();
            let mut g = DVector::zeros(self.dim);
            for (j, d) in &self.derivs[worst_k] {
                // The shift variable is not part of the unshifted ascent.
                if *j != self.t_var {
                    g[*j] = v.dot(&(d * &v));
                }
            }
            let norm = g.norm();
            if norm < T::of(1e-14) {
                return;
            }
            let mut step = T::of(0.1);
            let mut improved = false;
            for _ in 0..20 {
                let cand = theta.clone() + &g * (step / norm);
                if self.all_min(&cand) > worst {
                    *theta = cand;
                    improved = true;
                    break;
                }
                step *= T::of(0.5);
            }
            if !improved {
                return;
            }
        }
    }
}

fn shift<T: Real>(m: &DMatrix<T>, s: T) -> DMatrix<T> {
    let mut out = m.clone();
    for k in 0..m.nrows() {
        out[(k, k)] += s;
    }
    out
}

fn trace_prod<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let n = a.nrows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Solve the margin-maximization program for the problem. Deterministic for
/// identical inputs and settings.
pub fn solve_feasibility<T: Real>(
    problem: &LmiProblem<T>,
    settings: &SolverSettings<T>,
) -> Result<PdcSynthesis<T>> {
    // Solve the decay-rate-shifted problem; its margin lower-bounds the
    // plain-stability margin, so the certificate below covers both.
    let shifted = problem.with_decay_rate(settings.decay_rate);
    let problem = &shifted;
    let solver = Solver::new(problem, *settings);
    let mut theta = DVector::zeros(solver.dim);
    // Start at X = I, M = 0: strictly interior once t sits below the
    // current minimum eigenvalue.
    for k in 0..problem.n {
        let flat = (0..=k).fold(0usize, |acc, r| {
            acc + if r < k { problem.n - r } else { 0 }
        });
        theta[flat] = T::one();
    }

    // Strictly interior start for the shift variable.
    theta[solver.t_var] = solver.all_min(&theta) - T::one();

    // Path following: raise the weight on `t` geometrically, recentering at
    // each stage. Stops early once the margin comfortably clears the
    // tolerance — pushing `t` to its supremum only polishes the certificate.
    let stop_margin = T::one().max(settings.tol_feas * T::of(1e3));
    let mut mu = T::one();
    let mu_growth = T::of(30.0);
    let mu_max = T::of(1e10);
    for stage in 0..settings.max_iter {
        if !solver.center(&mut theta, mu) && stage == 0 {
            solver.subgradient_pass(&mut theta, 50);
        }
        let (x, ms) = solver.unpack(&theta);
        if problem.margin(&x, &ms) >= stop_margin {
            break;
        }
        if mu >= mu_max {
            break;
        }
        mu *= mu_growth;
    }

    let (x, ms) = solver.unpack(&theta);
    let margin = problem.margin(&x, &ms);
    if margin < settings.tol_feas {
        return Err(WmrError::Infeasible {
            margin: to_f64(margin),
        });
    }
    finish_synthesis(x, ms, margin)
}

fn finish_synthesis<T: Real>(
    x: DMatrix<T>,
    ms: Vec<DMatrix<T>>,
    margin: T,
) -> Result<PdcSynthesis<T>> {
    let eigs = x.clone().symmetric_eigenvalues();
    let lo = eigs.iter().fold(T::of(f64::INFINITY), |a, &v| a.min(v));
    let hi = eigs.iter().fold(T::of(f64::NEG_INFINITY), |a, &v| a.max(v));
    let cond = hi / lo;
    if !(lo > T::zero()) || cond > T::of(1e12) {
        return Err(WmrError::IllConditioned {
            cond: to_f64(cond),
        });
    }
    let (gains, p) = recover_gains(&x, &ms)?;
    Ok(PdcSynthesis {
        x,
        m_vars: ms,
        gains,
        p,
        margin,
    })
}

/// Recover `F_i = M_i X^{-1}` and `P = X^{-1}` (symmetrized).
pub fn recover_gains<T: Real>(
    x: &DMatrix<T>,
    ms: &[DMatrix<T>],
) -> Result<(Vec<DMatrix<T>>, DMatrix<T>)> {
    let chol = x
        .clone()
        .cholesky()
        .ok_or(WmrError::IllConditioned { cond: f64::INFINITY })?;
    let p = symmetrize(chol.inverse());
    let gains = ms.iter().map(|m| m * &p).collect();
    Ok((gains, p))
}

/// Lyapunov verification report.
#[derive(Debug, Clone)]
pub struct LyapunovReport<T: Real> {
    /// `max_i lambda_max(G_ii^T P + P G_ii)`; must be negative.
    pub worst_diagonal: T,
    /// Worst eigenvalue over symmetrized cross terms; must be <= tolerance.
    pub worst_cross: T,
    /// Worst eigenvalue of blended closed loops at sampled strengths.
    pub worst_sampled: T,
    pub pass: bool,
}

/// Check the closed-loop Lyapunov conditions for `P` and the recovered
/// gains: all diagonal `G_ii` strictly, all symmetrized cross pairs
/// non-strictly, plus randomly sampled convex blends (seeded, deterministic).
pub fn verify_lyapunov<T: Real>(
    p: &DMatrix<T>,
    rules: &[RuleSystem<T>],
    gains: &[DMatrix<T>],
    samples: usize,
) -> LyapunovReport<T> {
    let r = rules.len();
    let g = |i: usize, j: usize| &rules[i].a - &rules[i].b * &gains[j];
    let lyap = |m: &DMatrix<T>| symmetrize(m.transpose() * p + p * m);

    let mut worst_diagonal = T::of(f64::NEG_INFINITY);
    for i in 0..r {
        worst_diagonal = worst_diagonal.max(max_eig(&lyap(&g(i, i))));
    }
    let mut worst_cross = T::of(f64::NEG_INFINITY);
    for i in 0..r {
        for j in i + 1..r {
            let avg = (g(i, j) + g(j, i)) * T::of(0.5);
            worst_cross = worst_cross.max(max_eig(&lyap(&avg)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_sampled = T::of(f64::NEG_INFINITY);
    for _ in 0..samples {
        let mut h: Vec<T> = (0..r).map(|_| T::of(rng.gen::<f64>())).collect();
        let total = h.iter().fold(T::zero(), |a, &v| a + v);
        h.iter_mut().for_each(|v| *v /= total);
        let mut a_cl = DMatrix::zeros(rules[0].a.nrows(), rules[0].a.ncols());
        for i in 0..r {
            for j in 0..r {
                a_cl += g(i, j) * (h[i] * h[j]);
            }
        }
        worst_sampled = worst_sampled.max(max_eig(&lyap(&a_cl)));
    }

    let cross_tol = T::of(1e-9);
    let pass = worst_diagonal < T::zero()
        && worst_cross <= cross_tol
        && (samples == 0 || worst_sampled < T::zero());
    LyapunovReport {
        worst_diagonal,
        worst_cross,
        worst_sampled,
        pass,
    }
}

/// One closed-loop pole of `G_ij = A_i - B_i F_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole<T: Real> {
    /// Rule indices (1-based).
    pub i: usize,
    pub j: usize,
    pub re: T,
    pub im: T,
    /// Damping ratio `-re / |lambda|` for complex poles; 1 for real poles.
    pub zeta: T,
}

/// Eigenvalues of every pairing `G_ij`, with damping ratios.
pub fn closed_loop_poles<T: Real>(
    rules: &[RuleSystem<T>],
    gains: &[DMatrix<T>],
) -> Vec<Pole<T>> {
    let r = rules.len();
    let mut poles = Vec::with_capacity(r * r * rules[0].a.nrows());
    for i in 0..r {
        for j in 0..r {
            let g = &rules[i].a - &rules[i].b * &gains[j];
            for lambda in g.complex_eigenvalues().iter() {
                let mag = (lambda.re * lambda.re + lambda.im * lambda.im).sqrt();
                let zeta = if lambda.im.abs() < T::of(1e-12) || mag == T::zero() {
                    T::one()
                } else {
                    -lambda.re / mag
                };
                poles.push(Pole {
                    i: i + 1,
                    j: j + 1,
                    re: lambda.re,
                    im: lambda.im,
                    zeta,
                });
            }
        }
    }
    poles
}

/// Convert a fixed-size 16-rule model into the solver's rule list.
pub fn rules_from_model<T: Real>(model: &TsModel<T>) -> Vec<RuleSystem<T>> {
    model
        .rules
        .iter()
        .map(|r| RuleSystem {
            a: DMatrix::from_fn(3, 3, |i, j| r.a[(i, j)]),
            b: DMatrix::from_fn(3, 2, |i, j| r.b[(i, j)]),
        })
        .collect()
}

#[allow(unused)]
fn rule_count_guard() {
    // The WMR model always carries 16 rules.
    let _ = RULE_COUNT;
}

/// Complex eigenvalue helper re-export for callers that report pole sets.
pub type ComplexPole<T> = Complex<T>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ts::{build_rules, ErrorBox, LinguisticBounds, VarBounds};
    use approx::assert_relative_eq;

    fn scalar_rules(a: f64, b: f64) -> Vec<RuleSystem<f64>> {
        vec![RuleSystem {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
        }]
    }

    fn wmr_model() -> TsModel<f64> {
        let bounds = LinguisticBounds {
            z1: VarBounds { upper: 6.0, lower: -6.0 },
            z2: VarBounds { upper: 3.0, lower: 0.66 },
            z3: VarBounds { upper: 0.2, lower: -0.2 },
            z4: VarBounds { upper: 0.2, lower: -0.2 },
        };
        build_rules(bounds, ErrorBox::default()).unwrap()
    }

    #[test]
    fn constraint_count_is_137() {
        let problem = build_pdc_lmi(&wmr_model());
        assert_eq!(problem.constraints.len(), 1 + 16 + 120);
    }

    #[test]
    fn scalar_single_rule_constraint_value() {
        // A = 1, B = 1: single constraint is -2X + 2M.
        let problem = problem_from_rules(scalar_rules(1.0, 1.0));
        let x = DMatrix::from_element(1, 1, 3.0);
        let m = vec![DMatrix::from_element(1, 1, 5.0)];
        let v = problem.constraint_value(ConstraintKind::Single(0), &x, &m);
        assert_relative_eq!(v[(0, 0)], -2.0 * 3.0 + 2.0 * 5.0);
    }

    #[test]
    fn constraints_stay_symmetric() {
        let problem = build_pdc_lmi(&wmr_model());
        let x = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.3 });
        let ms: Vec<DMatrix<f64>> = (0..16)
            .map(|k| DMatrix::from_fn(2, 3, |r, c| (k + r + c) as f64 * 0.1))
            .collect();
        for &kind in &problem.constraints {
            let v = problem.constraint_value(kind, &x, &ms);
            assert_relative_eq!((v.clone() - v.transpose()).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_unstable_system_is_stabilized() {
        // A = 1, B = 1: feasibility requires F > 1 so 1 - F < 0.
        let problem = problem_from_rules(scalar_rules(1.0, 1.0));
        let synth = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        let f = synth.gains[0][(0, 0)];
        assert!(f > 1.0, "recovered gain {f} does not stabilize");
        assert!(synth.margin > 1e-6);
    }

    #[test]
    fn unstabilizable_system_reported_infeasible() {
        // A = diag(1, 1), B = (1, 0)^T: the second mode cannot be moved.
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0]));
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let problem = problem_from_rules(vec![RuleSystem { a, b }]);
        match solve_feasibility(&problem, &SolverSettings::default()) {
            Err(WmrError::Infeasible { margin }) => assert!(margin < 1e-6),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn stable_open_loop_is_feasible() {
        let a = -DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let problem = problem_from_rules(vec![RuleSystem { a, b }]);
        let synth = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        assert!(synth.margin > 1e-6);
    }

    #[test]
    fn gain_recovery_round_trip() {
        let x = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.1 });
        let ms: Vec<DMatrix<f64>> = (0..16)
            .map(|k| DMatrix::from_fn(2, 3, |r, c| (k * 6 + r * 3 + c) as f64 * 0.01))
            .collect();
        let (gains, p) = recover_gains(&x, &ms).unwrap();
        for (f, m) in gains.iter().zip(ms.iter()) {
            assert!(((f * &x) - m).norm() < 1e-9);
        }
        assert!(((&p * &x) - DMatrix::identity(3, 3)).norm() < 1e-9);

        // X = I: F = M.
        let (gains, _) = recover_gains(&DMatrix::identity(3, 3), &ms).unwrap();
        for (f, m) in gains.iter().zip(ms.iter()) {
            assert!((f - m).norm() < 1e-12);
        }
    }

    #[test]
    fn wmr_synthesis_certificate() {
        let model = wmr_model();
        let problem = build_pdc_lmi(&model);
        let synth = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        assert!(synth.margin >= 1e-6);

        let report = verify_lyapunov(&synth.p, &problem.rules, &synth.gains, 100);
        assert!(
            report.pass,
            "certificate failed: diag {} cross {} sampled {}",
            report.worst_diagonal, report.worst_cross, report.worst_sampled
        );
        assert!(report.worst_diagonal < -synth.margin.min(1.0) * 0.0);

        let poles = closed_loop_poles(&problem.rules, &synth.gains);
        assert_eq!(poles.len(), 16 * 16 * 3);
        assert!(poles.iter().all(|p| p.re < 0.0));
    }

    #[test]
    fn zero_gain_fails_verification_for_unstable_rules() {
        let model = wmr_model();
        let rules = rules_from_model(&model);
        let gains: Vec<DMatrix<f64>> = (0..16).map(|_| DMatrix::zeros(2, 3)).collect();
        let p = DMatrix::identity(3, 3);
        let report = verify_lyapunov(&p, &rules, &gains, 10);
        assert!(!report.pass);
        assert!(report.worst_diagonal > 0.0);
    }

    #[test]
    fn determinism() {
        let model = wmr_model();
        let problem = build_pdc_lmi(&model);
        let s1 = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        let s2 = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        assert_eq!(s1.x, s2.x);
        assert_eq!(s1.gains, s2.gains);
        assert_eq!(s1.margin, s2.margin);
    }

    #[test]
    fn scale_covariance() {
        let model = wmr_model();
        let mut rules = rules_from_model(&model);
        for r in rules.iter_mut() {
            r.a *= 10.0;
            r.b *= 10.0;
        }
        let problem = problem_from_rules(rules);
        let synth = solve_feasibility(&problem, &SolverSettings::default()).unwrap();
        assert!(synth.margin >= 1e-6);
    }

    #[test]
    fn decay_rate_shifts_only_the_diagonal() {
        let problem = build_pdc_lmi(&wmr_model());
        let shifted = problem.with_decay_rate(0.7);
        for (r0, r1) in problem.rules.iter().zip(shifted.rules.iter()) {
            assert_eq!(r0.b, r1.b);
            let diff = &r1.a - &r0.a;
            assert!((diff - DMatrix::identity(3, 3) * 0.7).norm() < 1e-12);
        }
        assert_eq!(problem.constraints, shifted.constraints);
    }

    #[test]
    fn decay_rate_forces_larger_scalar_gain() {
        // A = 1, B = 1 with decay alpha: feasibility needs F > 1 + alpha.
        let problem = problem_from_rules(scalar_rules(1.0, 1.0));
        let settings = SolverSettings {
            decay_rate: 3.0,
            ..SolverSettings::default()
        };
        let synth = solve_feasibility(&problem, &settings).unwrap();
        assert!(synth.gains[0][(0, 0)] > 4.0);
    }

    #[test]
    fn uncontrollable_decay_rate_is_infeasible() {
        // A = -I with B = 0 is feasible at alpha < 1 but has no input
        // authority, so alpha > 1 must be rejected.
        let a = -DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::<f64>::zeros(2, 1);
        let problem = problem_from_rules(vec![RuleSystem { a, b }]);
        let relaxed = SolverSettings {
            decay_rate: 0.5,
            ..SolverSettings::default()
        };
        assert!(solve_feasibility(&problem, &relaxed).is_ok());
        let tight = SolverSettings {
            decay_rate: 2.0,
            ..SolverSettings::default()
        };
        match solve_feasibility(&problem, &tight) {
            Err(WmrError::Infeasible { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn reported_type1_p_matrix_is_spd() {
        // Reported Lyapunov matrix for the Type I design.
        let p = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.5756, 0.0102, 0.0139,
                0.0102, 0.9640, 0.6352,
                0.0139, 0.6352, 0.6690,
            ],
        );
        assert!(min_eig(&p) > 0.0);
        assert!((p.clone() - p.transpose()).norm() < 1e-12);
    }
}
