//! Machine-readable run reports: configuration echo, one record per check,
//! stable ordering, versioned schema.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::theta::LatticeParam;
use crate::Result;

pub const SCHEMA_VERSION: &str = "1";

/// Flat run configuration, mirrored by the CLI config file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    /// Period ratio as `[re, im]`.
    pub tau_lat: [f64; 2],
    /// `tau = (a + b tau_lat) / n`.
    pub torsion: (i64, i64, i64),
    pub d_max: usize,
    pub tol_rank: f64,
    pub tol_residual: f64,
    pub seed: u64,
    pub suites: Vec<String>,
    /// Permutation-count budget for standard-identity tests
    /// (`m! * dim^3` units).
    pub budget: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tau_lat: [0.31, 1.17],
            torsion: (1, 0, 3),
            d_max: 8,
            tol_rank: 1e-8,
            tol_residual: 1e-8,
            seed: 0xD5C0DE,
            suites: vec!["all".into()],
            budget: 1e10,
        }
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let n = match name {
            "n3" => 3,
            "n5" => 5,
            "n6" => 6,
            "n8" => 8,
            other => {
                return Err(Error::Precondition(format!("unknown preset {other:?}")));
            }
        };
        Ok(RunConfig {
            torsion: (1, 0, n),
            ..RunConfig::default()
        })
    }

    pub fn lattice(&self) -> Result<LatticeParam> {
        LatticeParam::new(
            num_complex::Complex64::new(self.tau_lat[0], self.tau_lat[1]),
            1e-14,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (_, _, n) = self.torsion;
        if matches!(n, 1 | 2 | 4) {
            return Err(Error::UnsupportedTorsion(format!("n = {n}")));
        }
        self.lattice()?;
        Ok(())
    }
}

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    SkippedBudget,
    Exceptional,
}

/// One verification record.  `status` is computed from
/// observed/expected/tolerance except for the skipped/exceptional variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Stable identifier of the claim being checked.
    pub claim: String,
    pub params: Value,
    pub observed: Value,
    pub expected: Value,
    pub tolerance: f64,
    pub status: CheckStatus,
    /// Wall-clock of the check in milliseconds.
    pub wall_ms: f64,
}

impl CheckRecord {
    /// Exact comparison of integer-valued observations.
    pub fn exact(name: &str, claim: &str, params: Value, observed: i64, expected: i64) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(observed),
            expected: Value::from(expected),
            tolerance: 0.0,
            status: if observed == expected {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            wall_ms: 0.0,
        }
    }

    /// A residual that must stay below `tol`.
    pub fn below(name: &str, claim: &str, params: Value, observed: f64, tol: f64) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(observed),
            expected: Value::from(format!("< {tol:e}")),
            tolerance: tol,
            status: if observed < tol {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            wall_ms: 0.0,
        }
    }

    /// A quantity that must exceed `bound` (separation checks).
    pub fn above(name: &str, claim: &str, params: Value, observed: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(observed),
            expected: Value::from(format!("> {bound:e}")),
            tolerance: bound,
            status: if observed > bound {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            wall_ms: 0.0,
        }
    }

    pub fn skipped_budget(name: &str, claim: &str, params: Value, estimate: f64) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(format!("cost ~{estimate:.2e}")),
            expected: Value::from("within budget"),
            tolerance: 0.0,
            status: CheckStatus::SkippedBudget,
            wall_ms: 0.0,
        }
    }

    pub fn exceptional(name: &str, claim: &str, params: Value, note: &str) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(note),
            expected: Value::from("generic configuration"),
            tolerance: 0.0,
            status: CheckStatus::Exceptional,
            wall_ms: 0.0,
        }
    }

    pub fn failed(name: &str, claim: &str, params: Value, why: &str) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            params,
            observed: Value::from(why),
            expected: Value::from("no error"),
            tolerance: 0.0,
            status: CheckStatus::Fail,
            wall_ms: 0.0,
        }
    }
}

/// Summary counters.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq, Eq)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skipped_budget: usize,
    pub exceptional: usize,
}

/// Engine identification embedded in each report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineInfo {
    pub version: String,
    pub git: String,
}

impl EngineInfo {
    pub fn current() -> Self {
        let git = std::process::Command::new("git")
            .args(["describe", "--always", "--dirty"])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
            .unwrap_or_else(|| "unknown".into());
        EngineInfo {
            version: env!("CARGO_PKG_VERSION").into(),
            git,
        }
    }
}

/// A full verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub engine: EngineInfo,
    pub config: RunConfig,
    pub session: Option<crate::session::SessionEcho>,
    pub generated_at_ms: u128,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: RunConfig, session: Option<crate::session::SessionEcho>) -> Self {
        Report {
            schema: SCHEMA_VERSION.into(),
            engine: EngineInfo::current(),
            config,
            session,
            generated_at_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            checks: Vec::new(),
            summary: Summary::default(),
        }
    }

    /// Sort records by name and recompute the summary.
    pub fn finalize(&mut self) {
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut s = Summary::default();
        for c in &self.checks {
            match c.status {
                CheckStatus::Pass => s.pass += 1,
                CheckStatus::Fail => s.fail += 1,
                CheckStatus::SkippedBudget => s.skipped_budget += 1,
                CheckStatus::Exceptional => s.exceptional += 1,
            }
        }
        self.summary = s;
    }

    pub fn any_fail(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Report> {
        serde_json::from_str(s).map_err(|e| Error::Precondition(format!("bad report JSON: {e}")))
    }

    /// Compare against a golden report modulo volatile fields (timestamps,
    /// wall-clock, git describe).
    pub fn matches_golden(&self, golden: &Report) -> bool {
        let strip = |r: &Report| -> Value {
            let mut v = serde_json::to_value(r).expect("report serializes");
            v["generated_at_ms"] = Value::from(0);
            v["engine"]["git"] = Value::from("");
            if let Some(arr) = v["checks"].as_array_mut() {
                for c in arr {
                    c["wall_ms"] = Value::from(0.0);
                }
            }
            v
        };
        strip(self) == strip(golden)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_roundtrip() {
        let mut r = Report::new(RunConfig::default(), None);
        r.finalize();
        let s = r.to_json_string();
        let back = Report::from_json_str(&s).unwrap();
        assert_eq!(back.checks.len(), 0);
        assert_eq!(back.schema, SCHEMA_VERSION);
        assert!(r.matches_golden(&back));
    }

    #[test]
    fn record_roundtrip_and_status() {
        let mut r = Report::new(RunConfig::default(), None);
        r.checks.push(CheckRecord::exact(
            "dim A_3",
            "hilbert-series",
            serde_json::json!({"d": 3}),
            20,
            20,
        ));
        r.checks.push(CheckRecord::below(
            "residual",
            "relations",
            Value::Null,
            1e-12,
            1e-8,
        ));
        r.checks.push(CheckRecord::above(
            "separation",
            "lower-bound",
            Value::Null,
            0.5,
            1e-3,
        ));
        r.finalize();
        assert_eq!(r.summary.pass, 3);
        let s = r.to_json_string();
        let back = Report::from_json_str(&s).unwrap();
        assert_eq!(back.summary.pass, 3);
        assert!(!back.any_fail());
    }

    #[test]
    fn golden_comparison_ignores_volatile_fields() {
        let mut a = Report::new(RunConfig::default(), None);
        a.finalize();
        let mut b = a.clone();
        b.generated_at_ms = 999;
        b.engine.git = "somewhere".into();
        assert!(a.matches_golden(&b));
        b.checks.push(CheckRecord::exact("x", "y", Value::Null, 1, 1));
        b.finalize();
        assert!(!a.matches_golden(&b));
    }
}
