//! Runtime checks of the convergence guarantees on a finished trace.

use super::{Problem, RunTrace, Solution};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum StrongConvexityCheck {
    /// `sum |w_t - w_{t-1}|^2 <= (2/m) (F(w_0) - F_lb)` holds.
    Passed {
        lhs: f64,
        rhs: f64,
    },
    Failed {
        lhs: f64,
        rhs: f64,
    },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    /// `b_t(w_{t-1}) <= v_{t-1}` for all t.
    pub validity_chain: bool,
    /// `b_t(w_t) <= b_t(w_{t-1})` for all t.
    pub descent: bool,
    /// `b_t(w_t)` non-increasing.
    pub monotone_bound: bool,
    /// `F(w_t) <= v_0` for all t (`v_0 = F(w_0)` for point starts).
    pub safety: bool,
    /// For every prefix T: `eta * sum_{t<T} d_t <= v_0 - b_T(w_T)` and
    /// `eta * sum_{t<=T} d_t <= v_0 - F_lb`.
    pub telescoping: bool,
    pub strong_convexity: StrongConvexityCheck,
    pub violations: Vec<String>,
}

impl DiagnosticReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a completed trace against the guarantees every run must satisfy.
/// Any violation points at an engine or problem bug.
///
/// The reference level is `v_0`, which is `F(w_0)` for a point start. The
/// strong-convexity check bounds the squared steps by
/// `(2/m) (b_0(w_0) - F_lb)`, again `F(w_0)` for a point start.
pub fn check_theorem_diagnostics(trace: &RunTrace, f_lower_bound: f64) -> DiagnosticReport {
    let tol = trace.tol;
    let v0 = trace.records[0].v;
    let b0 = trace.records[0].bound;
    let mut violations = Vec::new();
    let mut validity_chain = true;
    let mut descent = true;
    let mut monotone_bound = true;
    let mut safety = true;
    let mut telescoping = true;

    let mut gap_sum = 0.0;
    for pair in trace.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.bound_at_prev > prev.v + tol {
            validity_chain = false;
            violations.push(format!(
                "t={}: b_t(w_(t-1)) = {} exceeds v_(t-1) = {}",
                cur.t, cur.bound_at_prev, prev.v
            ));
        }
        if cur.bound > cur.bound_at_prev + tol {
            descent = false;
            violations.push(format!(
                "t={}: b_t(w_t) = {} exceeds b_t(w_(t-1)) = {}",
                cur.t, cur.bound, cur.bound_at_prev
            ));
        }
        if cur.bound > prev.bound + tol {
            monotone_bound = false;
            violations.push(format!(
                "t={}: bound increased from {} to {}",
                cur.t, prev.bound, cur.bound
            ));
        }
        if cur.objective > v0 + tol {
            safety = false;
            violations.push(format!("t={}: F(w_t) = {} exceeds v_0 = {}", cur.t, cur.objective, v0));
        }
        let before = trace.eta * gap_sum;
        gap_sum += cur.d;
        let through = trace.eta * gap_sum;
        if before > v0 - cur.bound + tol || through > v0 - f_lower_bound + tol {
            telescoping = false;
            violations.push(format!(
                "t={}: eta * sum d = {} (before t) / {} (through t) exceeds v_0 - b_T(w_T) = {} / v_0 - F_lb = {}",
                cur.t,
                before,
                through,
                v0 - cur.bound,
                v0 - f_lower_bound
            ));
        }
    }

    let moduli: Option<Vec<f64>> = trace.records[1..].iter().map(|r| r.strong_convexity).collect();
    let strong_convexity = match moduli {
        None => StrongConvexityCheck::Skipped("a selected bound is not strongly convex".to_string()),
        Some(ms) if ms.is_empty() => StrongConvexityCheck::Skipped("no iterations".to_string()),
        Some(ms) => {
            let m = ms.iter().copied().fold(f64::INFINITY, f64::min);
            let lhs: f64 = trace.records.iter().map(|r| r.step_sq).sum();
            let rhs = 2.0 / m * (b0 - f_lower_bound);
            if lhs <= rhs + tol {
                StrongConvexityCheck::Passed { lhs, rhs }
            } else {
                violations.push(format!(
                    "sum of squared steps {lhs} exceeds (2/m)(F(w_0) - F_lb) = {rhs}"
                ));
                StrongConvexityCheck::Failed { lhs, rhs }
            }
        }
    };
    if let StrongConvexityCheck::Skipped(reason) = &strong_convexity {
        log::debug!("strong-convexity check skipped: {reason}");
    }

    DiagnosticReport {
        validity_chain,
        descent,
        monotone_bound,
        safety,
        telescoping,
        strong_convexity,
        violations,
    }
}

/// Distance moved by one greedy step from `w`. Near zero at a fixed point of
/// the MM map, which is where a converged run should sit.
pub fn fixed_point_residual<P: Problem + ?Sized>(problem: &P, w: &Solution) -> Result<f64> {
    let z = problem.touching_config(w);
    let next = problem.optimize_bound(&z, w)?;
    Ok(next.sq_distance(w).sqrt())
}
