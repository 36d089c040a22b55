//! Generic convex subproblem representation and solve contract.
//!
//! Both inner solvers (the beamforming and phase subproblems) build a
//! [`ConicProgram`]: real scalar variables, a linear objective plus optional
//! concave log2(1 + affine) terms, and constraints drawn from {affine
//! equality, affine inequality, sum-of-squares ≤ affine, log2(1+affine) ≥
//! affine}. Complex quantities are realified at this boundary (interleaved
//! re/im scalars) so the solve contract is purely real.
//!
//! The backend is Clarabel (interior point; second-order and exponential
//! cones). Every constraint kind also has an independent evaluator
//! ([`ConicProgram::max_violation`]) used to re-check returned assignments
//! without going through the backend.

use nalgebra::DVector;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus as ClarabelStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::scenario::LogMode;

const LN2: f64 = std::f64::consts::LN_2;

/// Affine expression over the program's scalar variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(id: usize) -> Self {
        Self::term(id, 1.0)
    }

    pub fn term(id: usize, coef: f64) -> Self {
        Self {
            terms: vec![(id, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, id: usize, coef: f64) {
        self.terms.push((id, coef));
    }

    pub fn add_const(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Combine duplicate indices, drop zeros, sort by index.
    fn normalized(&self) -> Vec<(usize, f64)> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.terms {
            *map.entry(i).or_insert(0.0) += c;
        }
        map.into_iter().filter(|&(_, c)| c != 0.0).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, c)| c * x[i])
            .sum::<f64>()
            + self.constant
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

impl std::ops::Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl std::ops::Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + (rhs * -1.0)
    }
}

impl std::ops::Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl std::ops::Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

/// Complex affine expression: a pair of real affine parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl ComplexExpr {
    pub fn constant(z: Complex64) -> Self {
        Self {
            re: LinExpr::constant(z.re),
            im: LinExpr::constant(z.im),
        }
    }

    pub fn add(self, rhs: ComplexExpr) -> Self {
        Self {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }

    pub fn add_const(self, z: Complex64) -> Self {
        self.add(Self::constant(z))
    }

    /// Multiply by a complex scalar.
    pub fn scale(self, z: Complex64) -> Self {
        Self {
            re: self.re.clone() * z.re - self.im.clone() * z.im,
            im: self.re * z.im + self.im * z.re,
        }
    }

    /// Real part as an affine expression.
    pub fn real(self) -> LinExpr {
        self.re
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Handle to a complex vector variable, stored as interleaved re/im scalars.
#[derive(Debug, Clone, Copy)]
pub struct CVec {
    start: usize,
    len: usize,
}

impl CVec {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn re_index(&self, i: usize) -> usize {
        self.start + 2 * i
    }

    pub fn im_index(&self, i: usize) -> usize {
        self.start + 2 * i + 1
    }

    /// The i-th entry as a complex affine expression.
    pub fn entry(&self, i: usize) -> ComplexExpr {
        ComplexExpr {
            re: LinExpr::var(self.re_index(i)),
            im: LinExpr::var(self.im_index(i)),
        }
    }

    /// a^H x = Σ conj(a_i) x_i.
    pub fn dot_conj(&self, a: &DVector<Complex64>) -> ComplexExpr {
        assert_eq!(a.len(), self.len, "dot_conj dimension mismatch");
        let mut re = LinExpr::default();
        let mut im = LinExpr::default();
        for i in 0..self.len {
            let (ar, ai) = (a[i].re, a[i].im);
            re.add_term(self.re_index(i), ar);
            re.add_term(self.im_index(i), ai);
            im.add_term(self.im_index(i), ar);
            im.add_term(self.re_index(i), -ai);
        }
        ComplexExpr { re, im }
    }
}

/// A concave `weight · log2(1 + arg)` objective term (maximization).
/// `anchor` is the current SCA value of `arg`, used in minorant mode.
#[derive(Debug, Clone)]
pub struct LogTerm {
    pub weight: f64,
    pub arg: LinExpr,
    pub anchor: f64,
}

#[derive(Debug, Clone)]
pub enum Constraint {
    /// expr == 0
    Eq(LinExpr),
    /// expr <= 0
    Le(LinExpr),
    /// Σ |squares_m|² + rest <= 0 (convex by construction)
    QuadLe {
        squares: Vec<ComplexExpr>,
        rest: LinExpr,
    },
    /// log2(1 + arg) >= bound, with the caller's SCA anchor for `arg`.
    LogGe {
        arg: LinExpr,
        bound: LinExpr,
        anchor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Convex program over named real scalars.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    var_names: Vec<String>,
    sense: Sense,
    objective: LinExpr,
    log_terms: Vec<LogTerm>,
    constraints: Vec<(String, Constraint)>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            var_names: Vec::new(),
            sense,
            objective: LinExpr::default(),
            log_terms: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    pub fn add_vars(&mut self, name: &str, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.add_var(format!("{name}[{i}]"))).collect()
    }

    pub fn add_cvec(&mut self, name: &str, n: usize) -> CVec {
        let start = self.var_names.len();
        for i in 0..n {
            self.var_names.push(format!("{name}[{i}].re"));
            self.var_names.push(format!("{name}[{i}].im"));
        }
        CVec { start, len: n }
    }

    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn add_log_term(&mut self, weight: f64, arg: LinExpr, anchor: f64) {
        self.log_terms.push(LogTerm { weight, arg, anchor });
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, c: Constraint) {
        self.constraints.push((label.into(), c));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check_expr = |e: &LinExpr, what: &str| -> Result<()> {
            if let Some(i) = e.max_index() {
                if i >= n {
                    return Err(Error::MalformedProgram(format!(
                        "{what} references variable {i}, program has {n}"
                    )));
                }
            }
            Ok(())
        };
        check_expr(&self.objective, "objective")?;
        for t in &self.log_terms {
            check_expr(&t.arg, "log term")?;
            if t.weight <= 0.0 {
                return Err(Error::MalformedProgram(
                    "log term weights must be positive".into(),
                ));
            }
            if self.sense == Sense::Minimize {
                return Err(Error::MalformedProgram(
                    "concave log terms require a maximization objective".into(),
                ));
            }
        }
        for (label, c) in &self.constraints {
            match c {
                Constraint::Eq(e) | Constraint::Le(e) => check_expr(e, label)?,
                Constraint::QuadLe { squares, rest } => {
                    for s in squares {
                        check_expr(&s.re, label)?;
                        check_expr(&s.im, label)?;
                    }
                    check_expr(rest, label)?;
                }
                Constraint::LogGe { arg, bound, .. } => {
                    check_expr(arg, label)?;
                    check_expr(bound, label)?;
                }
            }
        }
        Ok(())
    }

    /// Exact objective value (program's own sense and convention) at an
    /// assignment, with log terms computed exactly regardless of solve mode.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let mut v = self.objective.eval(x);
        for t in &self.log_terms {
            v += t.weight * (1.0 + t.arg.eval(x)).max(0.0).log2();
        }
        v
    }

    /// Independent re-evaluation of every stored constraint. Returns the
    /// largest relative violation (0 when all constraints hold).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (_, c) in &self.constraints {
            let v = match c {
                Constraint::Eq(e) => {
                    let val = e.eval(x);
                    val.abs() / scale_of(e, x)
                }
                Constraint::Le(e) => e.eval(x).max(0.0) / scale_of(e, x),
                Constraint::QuadLe { squares, rest } => {
                    let sq: f64 = squares.iter().map(|s| s.eval(x).norm_sqr()).sum();
                    let r = rest.eval(x);
                    let scale = sq.abs().max(r.abs()).max(1.0);
                    (sq + r).max(0.0) / scale
                }
                Constraint::LogGe { arg, bound, .. } => {
                    let lhs = (1.0 + arg.eval(x)).max(f64::MIN_POSITIVE).log2();
                    let rhs = bound.eval(x);
                    (rhs - lhs).max(0.0) / lhs.abs().max(rhs.abs()).max(1.0)
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Deterministic plain-text form for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {}",
            match self.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
            },
            self.fmt_expr(&self.objective)
        );
        for t in &self.log_terms {
            let _ = writeln!(
                out,
                "  + {:.6e} * log2(1 + {}) [anchor {:.6e}]",
                t.weight,
                self.fmt_expr(&t.arg),
                t.anchor
            );
        }
        let _ = writeln!(out, "subject to");
        for (label, c) in &self.constraints {
            match c {
                Constraint::Eq(e) => {
                    let _ = writeln!(out, "  {label}: {} == 0", self.fmt_expr(e));
                }
                Constraint::Le(e) => {
                    let _ = writeln!(out, "  {label}: {} <= 0", self.fmt_expr(e));
                }
                Constraint::QuadLe { squares, rest } => {
                    let sq: Vec<String> = squares
                        .iter()
                        .map(|s| {
                            format!(
                                "|({}) + j({})|^2",
                                self.fmt_expr(&s.re),
                                self.fmt_expr(&s.im)
                            )
                        })
                        .collect();
                    let _ = writeln!(
                        out,
                        "  {label}: {} + {} <= 0",
                        sq.join(" + "),
                        self.fmt_expr(rest)
                    );
                }
                Constraint::LogGe { arg, bound, .. } => {
                    let _ = writeln!(
                        out,
                        "  {label}: log2(1 + {}) >= {}",
                        self.fmt_expr(arg),
                        self.fmt_expr(bound)
                    );
                }
            }
        }
        out
    }

    fn fmt_expr(&self, e: &LinExpr) -> String {
        let mut parts: Vec<String> = e
            .normalized()
            .iter()
            .map(|&(i, c)| format!("{c:+.6e}*{}", self.var_names[i]))
            .collect();
        if e.constant != 0.0 || parts.is_empty() {
            parts.push(format!("{:+.6e}", e.constant));
        }
        parts.join(" ")
    }
}

fn scale_of(e: &LinExpr, x: &[f64]) -> f64 {
    let mag: f64 = e
        .terms
        .iter()
        .map(|&(i, c)| (c * x[i]).abs())
        .fold(e.constant.abs(), f64::max);
    mag.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
    IterationLimit,
}

/// Solve settings, config-exposed by the scenario.
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub max_iters: u32,
    pub feas_tol: f64,
    pub log_mode: LogMode,
    pub verbose: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            feas_tol: 1e-7,
            log_mode: LogMode::Native,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// Exact program objective (program sense) at the assignment.
    pub objective_value: f64,
    /// Assignment for the program's variables (epigraph extras stripped).
    pub x: Vec<f64>,
    pub iterations: u32,
    pub primal_residual: f64,
}

impl SolverResult {
    pub fn value(&self, var: usize) -> f64 {
        self.x[var]
    }

    pub fn cvec_value(&self, v: &CVec) -> DVector<Complex64> {
        DVector::from_iterator(
            v.len(),
            (0..v.len()).map(|i| Complex64::new(self.x[v.re_index(i)], self.x[v.im_index(i)])),
        )
    }
}

/// Row accumulator for the backend's `A x + s = b` data. Every row is
/// recorded as `s = expr(x)`, i.e. `A = −expr.coeffs`, `b = expr.constant`.
#[derive(Default)]
struct RowBuilder {
    a_rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl RowBuilder {
    fn push_slack(&mut self, e: &LinExpr) {
        self.a_rows
            .push(e.normalized().into_iter().map(|(i, c)| (i, -c)).collect());
        self.b.push(e.constant);
    }

    fn len(&self) -> usize {
        self.a_rows.len()
    }

    fn extend(&mut self, other: RowBuilder) {
        self.a_rows.extend(other.a_rows);
        self.b.extend(other.b);
    }
}

/// Tangent of log2(1+a) at `anchor`, as an affine expression in `arg`.
fn log_tangent(arg: &LinExpr, anchor: f64) -> LinExpr {
    let a0 = anchor.max(0.0);
    let slope = 1.0 / ((1.0 + a0) * LN2);
    arg.clone() * slope + LinExpr::constant((1.0 + a0).log2() - slope * a0)
}

/// Solve the program with the Clarabel backend.
pub fn solve(p: &ConicProgram, settings: &SolveSettings) -> Result<SolverResult> {
    p.validate()?;
    let n_user = p.num_vars();
    let minorant = settings.log_mode == LogMode::Minorant;

    // objective in minimize convention over (user vars + epigraph vars)
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q: Vec<f64> = vec![0.0; n_user];
    for (i, c) in p.objective.normalized() {
        q[i] += sign * c;
    }

    let mut n_total = n_user;
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // Zero cone (equalities) first, then nonnegatives, then SOC/EXP blocks.
    let mut eq_rows = RowBuilder::default();
    let mut ineq_rows = RowBuilder::default();
    let mut cone_rows = RowBuilder::default();

    // epigraph variables t with t <= log2(1 + arg), realized as exp cones
    let mut exp_blocks: Vec<(usize, LinExpr)> = Vec::new();

    for t in &p.log_terms {
        if minorant {
            for (i, c) in log_tangent(&t.arg, t.anchor).normalized() {
                q[i] += sign * t.weight * c;
            }
        } else {
            let t_idx = n_total;
            n_total += 1;
            q.push(-t.weight); // maximize weight·t ⇒ minimize −weight·t
            exp_blocks.push((t_idx, t.arg.clone()));
        }
    }

    for (_, c) in &p.constraints {
        match c {
            Constraint::Eq(e) => eq_rows.push_slack(e), // s = e(x) ∈ {0}
            Constraint::Le(e) => ineq_rows.push_slack(&-(e.clone())), // s = −e(x) ≥ 0
            Constraint::QuadLe { .. } => {}
            Constraint::LogGe { arg, bound, anchor } => {
                if minorant {
                    // tangent upper bound of the concave lhs; the exact
                    // constraint is restored by the caller's re-check
                    let e = log_tangent(arg, *anchor) - bound.clone();
                    ineq_rows.push_slack(&e);
                } else {
                    let t_idx = n_total;
                    n_total += 1;
                    q.push(0.0);
                    exp_blocks.push((t_idx, arg.clone()));
                    ineq_rows.push_slack(&(LinExpr::var(t_idx) - bound.clone()));
                }
            }
        }
    }

    let n_eq = eq_rows.len();
    let n_ineq = ineq_rows.len();
    if n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }
    if n_ineq > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
    }

    // SOC blocks for quadratic constraints: Σ|c_m|² + rest ≤ 0 as
    // ‖(2c, u−1)‖ ≤ u+1 with u = −rest.
    for (_, c) in &p.constraints {
        if let Constraint::QuadLe { squares, rest } = c {
            let u = -(rest.clone());
            cone_rows.push_slack(&(u.clone() + LinExpr::constant(1.0)));
            let mut dim = 1;
            for sq in squares {
                for part in [&sq.re, &sq.im] {
                    cone_rows.push_slack(&(part.clone() * 2.0));
                    dim += 1;
                }
            }
            cone_rows.push_slack(&(u - LinExpr::constant(1.0)));
            dim += 1;
            cones.push(SupportedConeT::SecondOrderConeT(dim));
        }
    }

    // Exponential-cone blocks: (ln2·t, 1, 1+arg) ∈ Kexp ⇔ t ≤ log2(1+arg).
    for (t_idx, arg) in &exp_blocks {
        cone_rows.push_slack(&LinExpr::term(*t_idx, LN2));
        cone_rows.push_slack(&LinExpr::constant(1.0));
        cone_rows.push_slack(&(arg.clone() + LinExpr::constant(1.0)));
        cones.push(SupportedConeT::ExponentialConeT());
    }

    let mut builder = eq_rows;
    builder.extend(ineq_rows);
    builder.extend(cone_rows);
    let m = builder.len();
    let mut ti: Vec<usize> = Vec::new();
    let mut tj: Vec<usize> = Vec::new();
    let mut tv: Vec<f64> = Vec::new();
    for (r, row) in builder.a_rows.iter().enumerate() {
        for &(j, c) in row {
            ti.push(r);
            tj.push(j);
            tv.push(c);
        }
    }
    let a_mat = CscMatrix::new_from_triplets(m, n_total, ti, tj, tv);
    let p_mat = CscMatrix::zeros((n_total, n_total));

    let mut clarabel_settings = DefaultSettings::default();
    clarabel_settings.verbose = settings.verbose;
    clarabel_settings.max_iter = settings.max_iters;
    clarabel_settings.tol_feas = settings.feas_tol;

    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &builder.b, &cones, clarabel_settings);
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        ClarabelStatus::Solved | ClarabelStatus::AlmostSolved => SolveStatus::Optimal,
        ClarabelStatus::PrimalInfeasible | ClarabelStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        ClarabelStatus::DualInfeasible | ClarabelStatus::AlmostDualInfeasible => {
            SolveStatus::NumericalFailure
        }
        ClarabelStatus::MaxIterations | ClarabelStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    };

    let x: Vec<f64> = sol.x[..n_user].to_vec();
    let objective_value = p.objective_at(&x);
    Ok(SolverResult {
        status,
        objective_value,
        x,
        iterations: sol.iterations,
        primal_residual: sol.r_prim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn maximize_bounded_scalar() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("x");
        p.set_objective(LinExpr::var(x));
        p.add_constraint("ub", Constraint::Le(LinExpr::var(x) - LinExpr::constant(3.0)));
        let r = solve(&p, &SolveSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.value(x), 3.0, epsilon = 1e-7);
        assert_relative_eq!(r.objective_value, 3.0, epsilon = 1e-7);
        assert!(p.max_violation(&r.x) <= 1e-7);
    }

    #[test]
    fn maximize_log_native() {
        // max log2(1+x), 0 <= x <= 1 → x = 1, objective 1
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("x");
        p.add_log_term(1.0, LinExpr::var(x), 0.0);
        p.add_constraint("lb", Constraint::Le(-LinExpr::var(x)));
        p.add_constraint("ub", Constraint::Le(LinExpr::var(x) - LinExpr::constant(1.0)));
        let r = solve(&p, &SolveSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.value(x), 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.objective_value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn maximize_log_minorant_mode() {
        // Same program in minorant mode: with anchor 1.0 the tangent still
        // increases in x, so x = 1 at the optimum.
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("x");
        p.add_log_term(1.0, LinExpr::var(x), 1.0);
        p.add_constraint("lb", Constraint::Le(-LinExpr::var(x)));
        p.add_constraint("ub", Constraint::Le(LinExpr::var(x) - LinExpr::constant(1.0)));
        let settings = SolveSettings {
            log_mode: LogMode::Minorant,
            ..Default::default()
        };
        let r = solve(&p, &settings).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.value(x), 1.0, epsilon = 1e-6);
        // objective_value reports the exact log, not the tangent
        assert_relative_eq!(r.objective_value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn min_norm_with_real_part_constraint() {
        // min ‖p‖² s.t. ℜ(h^H p) ≥ 1, h = [1, 0] → p = [1, 0], objective 1.
        // KKT by hand: gradient 2p = λh, ℜ(p_1) = 1 active.
        let mut p = ConicProgram::new(Sense::Minimize);
        let pv = p.add_cvec("p", 2);
        let t = p.add_var("t");
        p.set_objective(LinExpr::var(t));
        let h = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        p.add_constraint(
            "epigraph",
            Constraint::QuadLe {
                squares: vec![pv.entry(0), pv.entry(1)],
                rest: -LinExpr::var(t),
            },
        );
        p.add_constraint(
            "halfspace",
            Constraint::Le(LinExpr::constant(1.0) - pv.dot_conj(&h).real()),
        );
        let r = solve(&p, &SolveSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.objective_value, 1.0, epsilon = 1e-6);
        let pval = r.cvec_value(&pv);
        assert_relative_eq!(pval[0].re, 1.0, epsilon = 1e-5);
        assert!(pval[0].im.abs() < 1e-5);
        assert!(pval[1].norm() < 1e-5);
        assert!(p.max_violation(&r.x) <= 1e-6);
    }

    #[test]
    fn log_ge_constraint() {
        // min x s.t. log2(1+x) >= 2 → x = 3
        let mut p = ConicProgram::new(Sense::Minimize);
        let x = p.add_var("x");
        p.set_objective(LinExpr::var(x));
        p.add_constraint(
            "logge",
            Constraint::LogGe {
                arg: LinExpr::var(x),
                bound: LinExpr::constant(2.0),
                anchor: 3.0,
            },
        );
        let r = solve(&p, &SolveSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.value(x), 3.0, epsilon = 1e-5);
    }

    #[test]
    fn infeasible_reported_not_panicked() {
        let mut p = ConicProgram::new(Sense::Minimize);
        let x = p.add_var("x");
        p.set_objective(LinExpr::var(x));
        p.add_constraint("a", Constraint::Le(LinExpr::var(x) - LinExpr::constant(1.0)));
        p.add_constraint("b", Constraint::Le(LinExpr::constant(2.0) - LinExpr::var(x)));
        let r = solve(&p, &SolveSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn resolve_agrees_to_1e8() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.set_objective(LinExpr::var(x) + LinExpr::var(y) * 0.5);
        p.add_constraint(
            "ball",
            Constraint::QuadLe {
                squares: vec![
                    ComplexExpr {
                        re: LinExpr::var(x),
                        im: LinExpr::default(),
                    },
                    ComplexExpr {
                        re: LinExpr::var(y),
                        im: LinExpr::default(),
                    },
                ],
                rest: LinExpr::constant(-2.0),
            },
        );
        let a = solve(&p, &SolveSettings::default()).unwrap();
        let b = solve(&p, &SolveSettings::default()).unwrap();
        assert!((a.objective_value - b.objective_value).abs() <= 1e-8);
    }

    #[test]
    fn evaluator_flags_violations() {
        let mut p = ConicProgram::new(Sense::Minimize);
        let x = p.add_var("x");
        p.set_objective(LinExpr::var(x));
        p.add_constraint("le", Constraint::Le(LinExpr::var(x) - LinExpr::constant(1.0)));
        assert_eq!(p.max_violation(&[0.5]), 0.0);
        assert!(p.max_violation(&[2.0]) > 0.4);
    }

    #[test]
    fn dump_is_deterministic() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("x");
        p.set_objective(LinExpr::var(x));
        p.add_constraint("ub", Constraint::Le(LinExpr::var(x) - LinExpr::constant(3.0)));
        assert_eq!(p.dump(), p.dump());
        assert!(p.dump().contains("maximize"));
        assert!(p.dump().contains("ub:"));
    }

    #[test]
    fn validation_rejects_bad_index() {
        let mut p = ConicProgram::new(Sense::Minimize);
        let _x = p.add_var("x");
        p.set_objective(LinExpr::var(5));
        assert!(p.validate().is_err());
    }
}
