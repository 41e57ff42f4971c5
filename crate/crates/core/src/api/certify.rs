use serde::{Deserialize, Serialize};

use super::bounds::{gap_bound, theorem_bound};
use super::ApiTrace;
use crate::error::Result;
use crate::scalar::Real;

/// Numerical slack allowed on every certified inequality.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// A failed inequality `lhs <= rhs` at iteration `k`; `slack = rhs − lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub checked: usize,
    /// Smallest `rhs − lhs` seen; `+inf` if nothing was checked.
    pub min_slack: f64,
    pub violations: Vec<Violation>,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub families: Vec<FamilyReport>,
}

impl CertificateSummary {
    pub fn passed(&self) -> bool {
        self.families.iter().all(FamilyReport::passed)
    }

    /// First violation in iteration order across all families.
    pub fn first_violation(&self) -> Option<&Violation> {
        self.families.iter().flat_map(|f| &f.violations).min_by_key(|v| v.k)
    }
}

pub(crate) struct Collector {
    family: &'static str,
    tol: f64,
    checked: usize,
    min_slack: f64,
    violations: Vec<Violation>,
}

impl Collector {
    pub(crate) fn new(family: &'static str, tol: f64) -> Self {
        Collector { family, tol, checked: 0, min_slack: f64::INFINITY, violations: Vec::new() }
    }

    pub(crate) fn le<T: Real>(&mut self, k: usize, inequality: &str, lhs: T, rhs: T) {
        let (lhs, rhs) = (lhs.to_f64_lossy(), rhs.to_f64_lossy());
        let slack = rhs - lhs;
        self.checked += 1;
        self.min_slack = self.min_slack.min(slack);
        if !(slack >= -self.tol) {
            self.violations.push(Violation { k, inequality: inequality.to_string(), lhs, rhs, slack });
        }
    }

    /// Stored and recomputed values must agree to `tol` relative accuracy.
    pub(crate) fn same<T: Real>(&mut self, k: usize, what: &str, stored: T, recomputed: T) {
        let (s, r) = (stored.to_f64_lossy(), recomputed.to_f64_lossy());
        let scale = 1.0 + r.abs();
        let dev = (s - r).abs();
        self.checked += 1;
        if !(dev <= self.tol * scale) {
            self.violations.push(Violation {
                k,
                inequality: format!("stored {what} equals recomputed value"),
                lhs: s,
                rhs: r,
                slack: -dev,
            });
        }
    }

    pub(crate) fn finish(self) -> FamilyReport {
        FamilyReport {
            family: self.family.to_string(),
            checked: self.checked,
            min_slack: self.min_slack,
            violations: self.violations,
        }
    }
}

/// `l_k − ε_k ≤ J_{μ_{k+1}} ≤ J* ≤ u_k` with the realized `ε_k`.
pub fn check_sandwich<T: Real>(trace: &ApiTrace<T>, tol: f64) -> FamilyReport {
    let j = trace.meta.j_star;
    let mut c = Collector::new("sandwich", tol);
    for r in &trace.rows {
        c.le(r.k, "l_k - eps_k <= J_next", r.l - r.eps_realized, r.j_next);
        c.le(r.k, "J_next <= J*", r.j_next, j);
        c.le(r.k, "J* <= u_k", j, r.u);
    }
    c.finish()
}

/// `J* − l_k ≤ (1−γ)(J* − l_{k−1}) + ε_{k−1} + 2δ_k` with realized errors.
pub fn check_contraction<T: Real>(trace: &ApiTrace<T>, gamma: T, tol: f64) -> FamilyReport {
    let j = trace.meta.j_star;
    let mut c = Collector::new("contraction", tol);
    for w in trace.rows.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let rhs = (T::one() - gamma) * (j - prev.l) + prev.eps_realized + T::lit(2.0) * prev.delta_realized;
        c.le(cur.k, "J* - l_k <= (1-gamma)(J* - l_{k-1}) + eps_{k-1} + 2 delta_k", j - cur.l, rhs);
    }
    c.finish()
}

/// `J* − J_{μ_{k+1}} ≤ theorem_bound(k)`, with the bound recomputed from
/// the trace metadata and compared against the stored column.
pub fn check_finite_horizon<T: Real>(trace: &ApiTrace<T>, tol: f64) -> Result<FamilyReport> {
    let m = &trace.meta;
    let (eps, delta) = m.injector.effective_budgets();
    let mut c = Collector::new("theorem_bound", tol);
    for r in &trace.rows {
        let b = theorem_bound(r.k, m.gamma, T::lit(eps), T::lit(delta), m.j_star, m.l0)?;
        c.same(r.k, "theorem_bound", r.theorem_bound, b);
        c.le(r.k, "J* - J_next <= theorem_bound(k)", m.j_star - r.j_next, b);
    }
    Ok(c.finish())
}

/// `u_k − l_k ≤ gap_bound(k+1)`.
pub fn check_gap<T: Real>(trace: &ApiTrace<T>, tol: f64) -> Result<FamilyReport> {
    let m = &trace.meta;
    let (eps, delta) = m.injector.effective_budgets();
    let mut c = Collector::new("gap_bound", tol);
    for r in &trace.rows {
        let b = gap_bound(r.k + 1, m.gamma, T::lit(eps), T::lit(delta), m.j_star, m.l0)?;
        c.same(r.k, "gap_bound", r.gap_bound, b);
        c.le(r.k, "u_k - l_k <= gap_bound(k+1)", r.u - r.l, b);
    }
    Ok(c.finish())
}

/// Realized errors never exceed the injector budgets.
pub fn check_budgets<T: Real>(trace: &ApiTrace<T>, tol: f64) -> FamilyReport {
    let (eps, delta) = trace.meta.injector.effective_budgets();
    let mut c = Collector::new("budgets", tol);
    for r in &trace.rows {
        c.le(r.k, "eps_realized <= eps", r.eps_realized, T::lit(eps));
        c.le(r.k, "delta_realized <= delta", r.delta_realized, T::lit(delta));
    }
    c.finish()
}

/// Every inequality family on one trace, using the γ recorded in its metadata.
pub fn certify<T: Real>(trace: &ApiTrace<T>, tol: f64) -> Result<CertificateSummary> {
    Ok(CertificateSummary {
        families: vec![
            check_budgets(trace, tol),
            check_sandwich(trace, tol),
            check_contraction(trace, trace.meta.gamma, tol),
            check_finite_horizon(trace, tol)?,
            check_gap(trace, tol)?,
        ],
    })
}
