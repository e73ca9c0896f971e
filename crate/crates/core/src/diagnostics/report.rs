use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::constants::ConstantUse;
use crate::error::Result;

pub const RELATIVE_TOLERANCE: f64 = 1e-9;
pub const ABSOLUTE_TOLERANCE: f64 = 1e-12;

/// One analytic bound compared against a measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub analytic: f64,
    pub measured: f64,
    /// One-sided 99% upper confidence bound for Monte-Carlo measurements.
    pub measured_upper: Option<f64>,
    pub margin: f64,
    pub pass: bool,
    pub constants_used: Vec<ConstantUse>,
    /// Set when any constant used was estimated rather than declared.
    pub estimated: bool,
    pub warning: Option<String>,
}

/// `x <= bound (1 + 1e-9) + 1e-12`.
pub fn within_bound(x: f64, bound: f64) -> bool {
    x <= bound * (1.0 + RELATIVE_TOLERANCE) + ABSOLUTE_TOLERANCE
}

impl BoundReport {
    pub fn new(name: impl Into<String>, analytic: f64, measured: f64, measured_upper: Option<f64>) -> Self {
        let pass = within_bound(measured, analytic) && measured_upper.map_or(true, |u| within_bound(u, analytic));
        Self {
            name: name.into(),
            analytic,
            measured,
            measured_upper,
            margin: analytic - measured,
            pass,
            constants_used: Vec::new(),
            estimated: false,
            warning: None,
        }
    }

    pub fn with_constants(mut self, used: Vec<ConstantUse>) -> Self {
        self.estimated = used.iter().any(|u| u.provenance == super::Provenance::Estimated);
        self.constants_used = used;
        self
    }

    pub fn with_warning(mut self, warning: Option<String>) -> Self {
        self.warning = warning;
        self
    }
}

pub fn reports_to_json(reports: &[BoundReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn write_reports_json(path: &Path, reports: &[BoundReport]) -> Result<()> {
    std::fs::write(path, reports_to_json(reports)?)?;
    Ok(())
}

/// Fixed-width table, one report per line. Failing rows list their constants.
pub fn render_table(reports: &[BoundReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>13}  {:>13}  {:>13}  {:>4}  flags",
        "bound", "analytic", "measured", "upper99", "pass"
    )
    .expect("string write");
    for r in reports {
        let upper = r.measured_upper.map_or_else(|| "-".to_string(), |u| format!("{u:.6e}"));
        let mut flags = Vec::new();
        if r.estimated {
            flags.push("estimated".to_string());
        }
        if let Some(w) = &r.warning {
            flags.push(w.clone());
        }
        writeln!(
            out,
            "{:<width$}  {:>13.6e}  {:>13.6e}  {:>13}  {:>4}  {}",
            r.name,
            r.analytic,
            r.measured,
            upper,
            if r.pass { "ok" } else { "FAIL" },
            flags.join("; ")
        )
        .expect("string write");
        if !r.pass {
            let used: Vec<String> = r
                .constants_used
                .iter()
                .map(|c| format!("{}={} ({:?})", c.symbol, c.value, c.provenance))
                .collect();
            writeln!(out, "    constants: {}", used.join(", ")).expect("string write");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Provenance;

    #[test]
    fn tolerance_rule() {
        assert!(BoundReport::new("x", 1.0, 1.0 + 5e-10, None).pass);
        assert!(!BoundReport::new("x", 1.0, 1.0 + 2e-9, None).pass);
        assert!(BoundReport::new("x", 0.0, 1e-13, None).pass);
        assert!(!BoundReport::new("x", 1.0, 0.5, Some(1.1)).pass);
    }

    #[test]
    fn table_names_constants_on_failure() {
        let r = BoundReport::new("gamma", 1.0, 2.0, None).with_constants(vec![ConstantUse {
            symbol: "B".into(),
            value: 3.0,
            provenance: Provenance::Estimated,
        }]);
        assert!(r.estimated);
        let t = render_table(&[r]);
        assert!(t.contains("FAIL"));
        assert!(t.contains("B=3 (Estimated)"));
        let json = reports_to_json(&[BoundReport::new("a", 1.0, 0.0, None)]).unwrap();
        let back: Vec<BoundReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[0].name, "a");
    }
}
