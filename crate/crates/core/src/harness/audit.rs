//! Re-checks the certificates recorded in a stored trace.

use serde::{Deserialize, Serialize};

use crate::record::TraceRow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: usize,
    /// Number of individual checks evaluated.
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits a trace with absolute slack `tol`:
/// bound_obj ≥ obj_err − tol and bound_feas ≥ feas − tol,
/// ineq_slack ≥ −tol, φ nonincreasing up to tol·max(1, φ),
/// k strictly increasing and wall time nondecreasing.
pub fn audit_rows(rows: &[TraceRow], tol: f64) -> AuditReport {
    let mut report = AuditReport {
        rows: rows.len(),
        ..Default::default()
    };
    let flag = |report: &mut AuditReport, k: usize, kind: &str, detail: String| {
        report.violations.push(Violation {
            k,
            kind: kind.into(),
            detail,
        })
    };
    for (i, r) in rows.iter().enumerate() {
        if let (Some(b), Some(e)) = (r.bound_obj, r.obj_err) {
            report.checks += 1;
            if !(b >= e - tol) {
                flag(
                    &mut report,
                    r.k,
                    "bound_obj",
                    format!("obj_err {e:e} > bound {b:e}"),
                );
            }
        }
        if let (Some(b), Some(e)) = (r.bound_feas, r.feas) {
            report.checks += 1;
            if !(b >= e - tol) {
                flag(
                    &mut report,
                    r.k,
                    "bound_feas",
                    format!("feas {e:e} > bound {b:e}"),
                );
            }
        }
        if let Some(s) = r.ineq_slack {
            report.checks += 1;
            if !(s >= -tol) {
                flag(&mut report, r.k, "ineq_slack", format!("slack {s:e}"));
            }
        }
        if i == 0 {
            continue;
        }
        let prev = &rows[i - 1];
        report.checks += 2;
        if r.k <= prev.k {
            flag(
                &mut report,
                r.k,
                "k_order",
                format!("k={} follows k={}", r.k, prev.k),
            );
        }
        if r.wall_time_s < prev.wall_time_s {
            flag(
                &mut report,
                r.k,
                "wall_time",
                format!("{} s after {} s", r.wall_time_s, prev.wall_time_s),
            );
        }
        if let (Some(a), Some(b)) = (prev.phi, r.phi) {
            report.checks += 1;
            if b > a + tol * a.abs().max(1.0) {
                flag(&mut report, r.k, "phi_increase", format!("φ {a:e} → {b:e}"));
            }
        }
    }
    report
}
