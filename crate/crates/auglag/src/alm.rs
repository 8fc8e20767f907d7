//! The augmented Lagrange method: active sets, the semismooth Newton inner
//! solver for the sub-problem KKT system, the multiplier update, the residual
//! R_k, and the outer loop.
//!
//! Each outer step k solves the control-constrained sub-problem for the
//! current multiplier estimate and penalty parameter, forms the candidate
//! update (mu + rho (y - psi))_+, and accepts it only if
//! R_k = max violation + positive complementarity pairing has decreased by
//! the factor tau against the last accepted value; otherwise rho grows by
//! theta and the multiplier is kept.

use crate::error::{invalid, Error, Result};
use crate::fem::Field;
use crate::linalg::{reverse_cuthill_mckee, BandMatrix, SparseMatrix};
use crate::pde::{penalty_cost, tracking_cost, Problem};
use serde::{Deserialize, Serialize};

/// Stopping parameters of the semismooth Newton inner solver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SsnConfig {
    /// Threshold on max(r1, r2, r3).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

/// Reading of the complementarity term of R_k.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingMode {
    /// max(0, lumped inner product (mu, psi - y)); one scalar positive part.
    #[default]
    Scalar,
    /// Positive part taken on the integrand: sum_i D_i (mu_i (psi_i - y_i))_+.
    Pointwise,
}

/// What the outer loop does when an inner solve fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerFailPolicy {
    /// Stop with a partial report.
    #[default]
    Abort,
    /// Treat the step as unsuccessful and increase rho.
    IncreaseRho,
}

/// Parameters of the outer augmented Lagrange loop.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AlConfig {
    pub rho0: f64,
    /// Sufficient-decrease factor for the success test, in (0, 1).
    pub tau: f64,
    /// Penalty growth factor on unsuccessful steps, > 1.
    pub theta: f64,
    pub eps_outer: f64,
    /// Initial comparison value R_0^+, much larger than any residual.
    pub r0_plus: f64,
    pub max_outer: usize,
    pub inner: SsnConfig,
    pub pairing: PairingMode,
    pub on_inner_fail: InnerFailPolicy,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            rho0: 0.5,
            tau: 0.1,
            theta: 10.0,
            eps_outer: 1e-6,
            r0_plus: 1e10,
            max_outer: 100,
            inner: SsnConfig::default(),
            pairing: PairingMode::Scalar,
            on_inner_fail: InnerFailPolicy::Abort,
        }
    }
}

impl AlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) {
            return Err(invalid("rho0 must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid("tau must lie in (0, 1)"));
        }
        if !(self.theta > 1.0) {
            return Err(invalid("theta must exceed 1"));
        }
        if !(self.eps_outer >= 0.0) {
            return Err(invalid("eps_outer must be nonnegative"));
        }
        if !(self.inner.tol > 0.0) {
            return Err(invalid("inner tolerance must be positive"));
        }
        if self.max_outer == 0 || self.inner.max_iter == 0 {
            return Err(invalid("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Nodal active sets of the sub-problem KKT system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSets {
    /// Control at the lower bound: -p/alpha <= u_a.
    pub lower: Vec<bool>,
    /// Control at the upper bound: -p/alpha >= u_b.
    pub upper: Vec<bool>,
    /// Penalty active: mu + rho (y - psi) > 0.
    pub penalty: Vec<bool>,
}

impl ActiveSets {
    pub fn lower_count(&self) -> usize {
        self.lower.iter().filter(|&&b| b).count()
    }

    pub fn upper_count(&self) -> usize {
        self.upper.iter().filter(|&&b| b).count()
    }

    pub fn penalty_count(&self) -> usize {
        self.penalty.iter().filter(|&&b| b).count()
    }
}

/// Evaluate the three active sets at the given iterate. Inequalities are
/// non-strict for the control bounds and strict for the penalty set.
pub fn compute_active_sets(
    y: &Field,
    p: &Field,
    mu: &Field,
    rho: f64,
    problem: &Problem,
) -> ActiveSets {
    let n = problem.n_dof();
    assert!(y.len() == n && p.len() == n && mu.len() == n);
    let alpha = problem.alpha();
    let data = problem.data();
    let mut lower = vec![false; n];
    let mut upper = vec![false; n];
    let mut penalty = vec![false; n];
    for i in 0..n {
        let candidate = -p.values()[i] / alpha;
        lower[i] = candidate <= data.u_lower[i];
        upper[i] = candidate >= data.u_upper[i];
        penalty[i] = mu.values()[i] + rho * (y.values()[i] - data.psi.values()[i]) > 0.0;
    }
    ActiveSets {
        lower,
        upper,
        penalty,
    }
}

/// One Newton step on the reformulated KKT system.
#[derive(Clone, Debug)]
pub struct SsnStep {
    pub dy: Field,
    pub du: Field,
    pub dp: Field,
    /// Euclidean norm of the stacked residual [F1; F2; F3].
    pub f_norm: f64,
    /// The active sets the step was computed with.
    pub sets: ActiveSets,
}

struct SsnResiduals {
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3_nodal: Vec<f64>,
    f3: Vec<f64>,
}

fn ssn_residuals(
    y: &Field,
    u: &Field,
    p: &Field,
    mu: &Field,
    rho: f64,
    problem: &Problem,
    sets: &ActiveSets,
    k_lin: &SparseMatrix,
) -> Result<SsnResiduals> {
    let n = problem.n_dof();
    let data = problem.data();
    let space = problem.space();
    let lumped = space.lumped();
    let alpha = problem.alpha();
    // F1 = K y + D d(y) - M (u + f).
    let f1 = problem.state_residual(y, u);
    // F2 = (K + D d_y(y)) p - M (y - y_d) - D chi_Y (mu + rho (y - psi)).
    let kp = k_lin.matvec(p.values())?;
    let diff: Vec<f64> = y
        .values()
        .iter()
        .zip(data.y_d.values())
        .map(|(a, b)| a - b)
        .collect();
    let m_diff = space.mass().matvec(&diff)?;
    let mut f2 = vec![0.0; n];
    for i in 0..n {
        let pen = if sets.penalty[i] {
            mu.values()[i] + rho * (y.values()[i] - data.psi.values()[i])
        } else {
            0.0
        };
        f2[i] = kp[i] - m_diff[i] - lumped[i] * pen;
    }
    // F3 = M (u + (1 - chi_a - chi_b) p / alpha - chi_a u_a - chi_b u_b).
    let mut f3_nodal = vec![0.0; n];
    for i in 0..n {
        let bound = if sets.lower[i] {
            data.u_lower[i]
        } else if sets.upper[i] {
            data.u_upper[i]
        } else {
            0.0
        };
        let indicator = if sets.lower[i] || sets.upper[i] { 0.0 } else { 1.0 };
        f3_nodal[i] = u.values()[i] + indicator * p.values()[i] / alpha - bound;
    }
    let f3 = space.mass().matvec(&f3_nodal)?;
    for v in f1.iter().chain(&f2).chain(&f3) {
        if !v.is_finite() {
            return Err(Error::ModelViolation(
                "non-finite residual in semismooth Newton assembly".into(),
            ));
        }
    }
    Ok(SsnResiduals { f1, f2, f3_nodal, f3 })
}

/// One semismooth Newton step: solves the 3n x 3n block system G delta = -F
/// with the blocks
///
/// ```text
///   G1 = [ K + D d_y(y),                      -M,              0            ]
///   G2 = [ -(M + chi_Y rho D) + D d_yy(y) p,   0,              K + D d_y(y) ]
///   G3 = [ 0,                                  M,   (1/alpha) M (1-chi_a-chi_b) ]
/// ```
///
/// The control row is a nodal identity under the mass matrix, so du is
/// eliminated exactly and the remaining 2n x 2n system in (dy, dp) is solved
/// by a banded LU with partial pivoting on an RCM-interleaved ordering,
/// followed by one step of iterative refinement.
pub fn ssn_step(
    y: &Field,
    u: &Field,
    p: &Field,
    mu: &Field,
    rho: f64,
    problem: &Problem,
) -> Result<SsnStep> {
    let n = problem.n_dof();
    if y.len() != n || u.len() != n || p.len() != n || mu.len() != n {
        return Err(invalid("iterate length does not match mesh"));
    }
    if !(rho > 0.0) {
        return Err(invalid("rho must be positive"));
    }
    let data = problem.data();
    let space = problem.space();
    let lumped = space.lumped();
    let alpha = problem.alpha();
    let sets = compute_active_sets(y, p, mu, rho, problem);
    let k_lin = problem.linearized_operator(y)?;
    let res = ssn_residuals(y, u, p, mu, rho, problem, &sets, &k_lin)?;
    let f_norm = res
        .f1
        .iter()
        .chain(&res.f2)
        .chain(&res.f3)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();

    // Reduced right-hand side after eliminating du = -f3_nodal - Pi dp / alpha:
    //   (K + D d_y) dy + (1/alpha) M Pi dp = -F1 - M f3_nodal
    //   W dy + (K + D d_y) dp             = -F2
    let rhs_y: Vec<f64> = res
        .f1
        .iter()
        .zip(&res.f3)
        .map(|(a, b)| -a - b)
        .collect();
    let rhs_p: Vec<f64> = res.f2.iter().map(|v| -v).collect();

    // W = -M + diag(-rho D chi_Y + D d_yy(y) p).
    let d_yy = data.nonlinearity.d_yy;
    let w_diag: Vec<f64> = (0..n)
        .map(|i| {
            let pen = if sets.penalty[i] { rho * lumped[i] } else { 0.0 };
            -pen + lumped[i] * d_yy(y.values()[i]) * p.values()[i]
        })
        .collect();
    let indicator: Vec<f64> = (0..n)
        .map(|i| if sets.lower[i] || sets.upper[i] { 0.0 } else { 1.0 })
        .collect();

    // Interleaved RCM ordering: y_i -> 2 perm[i], p_i -> 2 perm[i] + 1.
    let perm = reverse_cuthill_mckee(&problem.mesh().adjacency());
    let mut mesh_band = 0usize;
    for r in 0..n {
        let (cols, _) = k_lin.row(r);
        for &c in cols {
            mesh_band = mesh_band.max(perm[r].abs_diff(perm[c]));
        }
    }
    let band = 2 * mesh_band + 1;
    let m2 = 2 * n;
    // The banded factorization holds (3 band + 1) * 2n doubles; refuse
    // discretizations whose factors would not fit in memory.
    let band_bytes = (3 * band + 1) as u64 * m2 as u64 * 8;
    if band_bytes > 4 << 30 {
        return Err(invalid(format!(
            "Newton system factors would need {} GiB; the direct inner solver \
             targets desk-scale discretizations (up to ~1e4 nodes)",
            band_bytes >> 30
        )));
    }
    let mut ab = BandMatrix::zeros(m2, band, band);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * k_lin.nnz());
    {
        let mut push = |r: usize, c: usize, v: f64| {
            if v != 0.0 {
                triplets.push((r, c, v));
            }
        };
        for i in 0..n {
            let (ri, pi) = (2 * perm[i], 2 * perm[i] + 1);
            // A11 = K + D d_y and A22 = the same operator.
            let (cols, vals) = k_lin.row(i);
            for (k, &j) in cols.iter().enumerate() {
                push(ri, 2 * perm[j], vals[k]);
                push(pi, 2 * perm[j] + 1, vals[k]);
            }
            // A12 = (1/alpha) M Pi (column-scaled), A21 = -M + diag(w).
            let (cols, vals) = space.mass().row(i);
            for (k, &j) in cols.iter().enumerate() {
                push(ri, 2 * perm[j] + 1, vals[k] * indicator[j] / alpha);
                push(pi, 2 * perm[j], -vals[k]);
            }
            push(pi, 2 * perm[i], w_diag[i]);
        }
    }
    for &(r, c, v) in &triplets {
        ab.add(r, c, v);
    }
    let reduced = SparseMatrix::from_triplets(&triplets, m2, m2)?;
    let mut rhs = vec![0.0; m2];
    for i in 0..n {
        rhs[2 * perm[i]] = rhs_y[i];
        rhs[2 * perm[i] + 1] = rhs_p[i];
    }
    ab.factor()?;
    let mut sol = rhs.clone();
    ab.solve_factored(&mut sol)?;
    // One step of iterative refinement against the assembled reduced system.
    {
        let ax = reduced.matvec(&sol)?;
        let mut correction: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        ab.solve_factored(&mut correction)?;
        for (s, c) in sol.iter_mut().zip(&correction) {
            *s += c;
        }
    }
    let mut dy = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for i in 0..n {
        dy[i] = sol[2 * perm[i]];
        dp[i] = sol[2 * perm[i] + 1];
    }
    let du: Vec<f64> = (0..n)
        .map(|i| -res.f3_nodal[i] - indicator[i] * dp[i] / alpha)
        .collect();
    Ok(SsnStep {
        dy: Field::new(dy)?,
        du: Field::new(du)?,
        dp: Field::new(dp)?,
        f_norm,
        sets,
    })
}

/// A primal-dual iterate of the sub-problem.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub y: Field,
    pub u: Field,
    pub p: Field,
}

impl Iterate {
    pub fn zeros(n: usize) -> Self {
        Self {
            y: Field::zeros(n),
            u: Field::zeros(n),
            p: Field::zeros(n),
        }
    }
}

/// Result of one sub-problem solve.
#[derive(Clone, Debug)]
pub struct SubproblemSolve {
    pub iterate: Iterate,
    pub inner_iters: usize,
    /// (r1, r2, r3) after every Newton step.
    pub residuals: Vec<[f64; 3]>,
}

/// Solve the sub-problem KKT system for fixed (mu, rho) by semismooth Newton
/// steps, stopping when max(r1, r2, r3) <= tol with
///
/// - r1: linearization error of the state equation,
/// - r2: linearization error of the adjoint equation including the
///   active-set change term (chi_Yk - chi_Yk-1)(mu + rho (y_k - psi)),
/// - r3: ||u - P_[ua,ub](-p/alpha)||,
///
/// all in the lumped discrete L2 norm.
pub fn solve_subproblem(
    problem: &Problem,
    mu: &Field,
    rho: f64,
    init: &Iterate,
    cfg: &SsnConfig,
) -> Result<SubproblemSolve> {
    if let Some(i) = mu.values().iter().position(|&v| v < 0.0) {
        return Err(invalid(format!("multiplier negative at node {i}")));
    }
    let n = problem.n_dof();
    let data = problem.data();
    let space = problem.space();
    let d = data.nonlinearity.d;
    let d_y = data.nonlinearity.d_y;
    let d_yy = data.nonlinearity.d_yy;
    let mut cur = init.clone();
    let mut residuals: Vec<[f64; 3]> = Vec::new();
    for iter in 1..=cfg.max_iter {
        let prev_y = cur.y.clone();
        let prev_p = cur.p.clone();
        let step = ssn_step(&cur.y, &cur.u, &cur.p, mu, rho, problem)?;
        for i in 0..n {
            cur.y.values_mut()[i] += step.dy.values()[i];
            cur.u.values_mut()[i] += step.du.values()[i];
            cur.p.values_mut()[i] += step.dp.values()[i];
        }
        let new_sets = compute_active_sets(&cur.y, &cur.p, mu, rho, problem);
        // r1: state linearization error at the new iterate.
        let r1_vec: Vec<f64> = (0..n)
            .map(|i| {
                let (y_new, y_old) = (cur.y.values()[i], prev_y.values()[i]);
                d(y_new) - (d_y(y_old) * (y_new - y_old) + d(y_old))
            })
            .collect();
        // r2: adjoint linearization error plus the active-set change term.
        let r2_vec: Vec<f64> = (0..n)
            .map(|i| {
                let (y_new, y_old) = (cur.y.values()[i], prev_y.values()[i]);
                let p_new = cur.p.values()[i];
                let lin_err = d_y(y_new) * p_new
                    - (d_y(y_old) * p_new + d_yy(y_old) * prev_p.values()[i] * (y_new - y_old));
                let chi_new = if new_sets.penalty[i] { 1.0 } else { 0.0 };
                let chi_old = if step.sets.penalty[i] { 1.0 } else { 0.0 };
                let pen = mu.values()[i] + rho * (y_new - data.psi.values()[i]);
                lin_err - (chi_new - chi_old) * pen
            })
            .collect();
        // r3: projection residual of the control.
        let projected = problem.project_control(
            &cur.p
                .values()
                .iter()
                .map(|&v| -v / problem.alpha())
                .collect::<Vec<f64>>(),
        );
        let r3_vec: Vec<f64> = (0..n)
            .map(|i| cur.u.values()[i] - projected[i])
            .collect();
        let r = [
            space.norm_lumped_l2(&r1_vec),
            space.norm_lumped_l2(&r2_vec),
            space.norm_lumped_l2(&r3_vec),
        ];
        residuals.push(r);
        let r_max = r[0].max(r[1]).max(r[2]);
        if !r_max.is_finite() {
            return Err(Error::NewtonFailure {
                what: "semismooth Newton",
                iterations: iter,
                residual: r_max,
                trace: residuals.iter().map(|r| r[0].max(r[1]).max(r[2])).collect(),
            });
        }
        if r_max <= cfg.tol {
            return Ok(SubproblemSolve {
                iterate: cur,
                inner_iters: iter,
                residuals,
            });
        }
    }
    let trace: Vec<f64> = residuals.iter().map(|r| r[0].max(r[1]).max(r[2])).collect();
    Err(Error::NewtonFailure {
        what: "semismooth Newton",
        iterations: cfg.max_iter,
        residual: trace.last().copied().unwrap_or(f64::INFINITY),
        trace,
    })
}

/// The multiplier update (mu + rho (y - psi))_+, exact at nodes.
pub fn multiplier_update(mu: &Field, rho: f64, y: &Field, problem: &Problem) -> Field {
    let psi = problem.data().psi.values();
    Field::new(
        (0..problem.n_dof())
            .map(|i| (mu.values()[i] + rho * (y.values()[i] - psi[i])).max(0.0))
            .collect(),
    )
    .expect("finite update")
}

/// Maximal violation and complementarity terms of R_k, separately.
pub fn residual_parts(
    y: &Field,
    mu_bar: &Field,
    problem: &Problem,
    pairing: PairingMode,
) -> (f64, f64) {
    let space = problem.space();
    let psi = problem.data().psi.values();
    let n = problem.n_dof();
    let violation = (0..n)
        .map(|i| (y.values()[i] - psi[i]).max(0.0))
        .fold(0.0_f64, f64::max);
    let complementarity = match pairing {
        PairingMode::Scalar => {
            let pair: f64 = (0..n)
                .map(|i| space.lumped()[i] * mu_bar.values()[i] * (psi[i] - y.values()[i]))
                .sum();
            pair.max(0.0)
        }
        PairingMode::Pointwise => (0..n)
            .map(|i| space.lumped()[i] * (mu_bar.values()[i] * (psi[i] - y.values()[i])).max(0.0))
            .sum(),
    };
    (violation, complementarity)
}

/// R = ||(y - psi)_+||_C + (mu_bar, psi - y)_+ with the configured pairing.
pub fn residual_r(y: &Field, mu_bar: &Field, problem: &Problem, pairing: PairingMode) -> f64 {
    let (violation, complementarity) = residual_parts(y, mu_bar, problem, pairing);
    violation + complementarity
}

/// One row of the outer iteration history.
#[derive(Clone, Debug, Serialize)]
pub struct AlRecord {
    pub k: usize,
    /// Count of successful steps after this one.
    pub n: usize,
    pub rho: f64,
    pub r_k: f64,
    pub successful: bool,
    pub inner_iters: usize,
    /// L1 norm of the multiplier in effect after this step.
    pub mu_l1: f64,
    /// Tracking cost J(y_k, u_k).
    pub f: f64,
    /// Augmented cost including the penalty term.
    pub f_al: f64,
    pub max_violation: f64,
    pub complementarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxOuterReached,
    InnerSolveFailed { message: String },
}

/// Scalars summarizing a run; the JSON twin of the CSV carries these.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub n_dof: usize,
    pub outer_iters: usize,
    pub successful_steps: usize,
    pub inner_iters_total: usize,
    pub rho_final: f64,
    pub rho_max: f64,
    pub mu_l1: f64,
    pub max_violation: f64,
    pub complementarity: f64,
    pub f: f64,
    pub f_al: f64,
    pub converged: bool,
}

/// Full iteration history of the outer loop plus the final iterate.
#[derive(Clone, Debug, Serialize)]
pub struct AlReport {
    pub records: Vec<AlRecord>,
    pub termination: Termination,
    pub summary: RunSummary,
    #[serde(skip)]
    pub final_iterate: Iterate,
    #[serde(skip)]
    pub final_mu: Field,
}

impl AlReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// CSV with one row per outer step; RFC 4180, '.' decimal separator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,n,rho,R_k,successful,inner_iters,mu_l1,f,f_al,max_violation,complementarity\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.n,
                r.rho,
                r.r_k,
                r.successful,
                r.inner_iters,
                r.mu_l1,
                r.f,
                r.f_al,
                r.max_violation,
                r.complementarity
            ));
        }
        out
    }

    /// Verify the update-rule contract: successful residuals chain by tau,
    /// rho grows by exactly theta on unsuccessful steps and only there.
    pub fn check_update_contract(&self, cfg: &AlConfig) -> std::result::Result<(), String> {
        let mut r_plus = cfg.r0_plus;
        let mut rho = cfg.rho0;
        for rec in &self.records {
            if !rec.r_k.is_finite() && !rec.successful {
                // Inner-failure row under the increase-rho policy.
                rho *= cfg.theta;
                continue;
            }
            if (rec.rho - rho).abs() > 1e-12 * rho {
                return Err(format!("step {}: rho {} recorded, {} expected", rec.k, rec.rho, rho));
            }
            let should_succeed = rec.r_k <= cfg.tau * r_plus;
            if rec.successful != should_succeed {
                return Err(format!(
                    "step {}: successful={} but R_k={} vs tau*R+={}",
                    rec.k,
                    rec.successful,
                    rec.r_k,
                    cfg.tau * r_plus
                ));
            }
            if rec.successful {
                r_plus = rec.r_k;
            } else {
                rho *= cfg.theta;
            }
        }
        Ok(())
    }
}

/// The outer augmented Lagrange loop. Always returns a report; inspect
/// `termination` (or `converged()`) for the outcome.
pub fn outer_loop(problem: &Problem, cfg: &AlConfig) -> Result<AlReport> {
    cfg.validate()?;
    let n = problem.n_dof();
    let mut iterate = Iterate::zeros(n);
    let mut mu = Field::zeros(n);
    let mut rho = cfg.rho0;
    let mut r_plus = cfg.r0_plus;
    let mut n_success = 0usize;
    let mut records: Vec<AlRecord> = Vec::new();
    let mut termination = Termination::MaxOuterReached;
    for k in 1..=cfg.max_outer {
        let sub = match solve_subproblem(problem, &mu, rho, &iterate, &cfg.inner) {
            Ok(sub) => sub,
            Err(e) => match cfg.on_inner_fail {
                InnerFailPolicy::Abort => {
                    termination = Termination::InnerSolveFailed {
                        message: e.to_string(),
                    };
                    break;
                }
                InnerFailPolicy::IncreaseRho => {
                    records.push(AlRecord {
                        k,
                        n: n_success,
                        rho,
                        r_k: f64::INFINITY,
                        successful: false,
                        inner_iters: cfg.inner.max_iter,
                        mu_l1: problem.space().norm_l1(&mu),
                        f: f64::NAN,
                        f_al: f64::NAN,
                        max_violation: f64::NAN,
                        complementarity: f64::NAN,
                    });
                    rho *= cfg.theta;
                    continue;
                }
            },
        };
        iterate = sub.iterate;
        let mu_bar = multiplier_update(&mu, rho, &iterate.y, problem);
        debug_assert!(mu_bar.values().iter().all(|&v| v >= 0.0));
        let (violation, complementarity) = residual_parts(&iterate.y, &mu_bar, problem, cfg.pairing);
        let r_k = violation + complementarity;
        let successful = r_k <= cfg.tau * r_plus;
        if successful {
            mu = mu_bar;
            r_plus = r_k;
            n_success += 1;
        }
        let f = tracking_cost(problem, &iterate.y, &iterate.u);
        let f_al = f + penalty_cost(problem, &iterate.y, &mu, rho);
        records.push(AlRecord {
            k,
            n: n_success,
            rho,
            r_k,
            successful,
            inner_iters: sub.inner_iters,
            mu_l1: problem.space().norm_l1(&mu),
            f,
            f_al,
            max_violation: violation,
            complementarity,
        });
        if !successful {
            rho *= cfg.theta;
        }
        if r_plus <= cfg.eps_outer {
            termination = Termination::Converged;
            break;
        }
    }
    let summary = {
        let last = records.last();
        RunSummary {
            n_dof: n,
            outer_iters: records.len(),
            successful_steps: n_success,
            inner_iters_total: records.iter().map(|r| r.inner_iters).sum(),
            rho_final: last.map_or(cfg.rho0, |r| r.rho),
            rho_max: records.iter().map(|r| r.rho).fold(cfg.rho0, f64::max),
            mu_l1: problem.space().norm_l1(&mu),
            max_violation: last.map_or(f64::NAN, |r| r.max_violation),
            complementarity: last.map_or(f64::NAN, |r| r.complementarity),
            f: last.map_or(f64::NAN, |r| r.f),
            f_al: last.map_or(f64::NAN, |r| r.f_al),
            converged: termination == Termination::Converged,
        }
    };
    let report = AlReport {
        records,
        termination,
        summary,
        final_iterate: iterate,
        final_mu: mu,
    };
    debug_assert!(report.check_update_contract(cfg).is_ok());
    Ok(report)
}
