//! Versioned estimate reports: a stable JSON schema plus CSV and plain-text
//! renderings for the CLI and the Python bindings.

use serde::Serialize;
use serde_json::Value;

use crate::bootstrap::DiagnosticPValues;
use crate::error::{Error, Result};
use crate::panel::AttritionSummary;

/// Bumped whenever the JSON layout changes incompatibly.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One estimator's row in a report.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub estimand: String,
    pub estimator: String,
    /// Identification route: respondents-only, random-assignment, or
    /// no-random-assignment (naive and difference rows say so too).
    pub route: String,
    pub point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    pub n_used: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub tool_version: String,
    /// Echo of the resolved run configuration.
    pub config: Value,
    /// FNV-1a digest of the canonical config JSON, for provenance checks.
    pub config_digest: String,
    pub attrition: AttritionSummary,
    pub estimates: Vec<EstimateRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticPValues>,
    pub warnings: Vec<String>,
}

/// 64-bit FNV-1a over the canonical (serde_json-ordered) config text.
pub fn config_digest(config: &Value) -> String {
    let text = config.to_string();
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

impl EstimateReport {
    pub fn new(config: Value, attrition: AttritionSummary) -> EstimateReport {
        let digest = config_digest(&config);
        EstimateReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_digest: digest,
            attrition,
            estimates: Vec::new(),
            diagnostics: None,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("report serialization: {e}")))
    }

    /// Estimates only; one row per estimator, fixed column order.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("estimand,estimator,route,point,se,ci_lower,ci_upper,n_used,notes\n");
        for row in &self.estimates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.estimand,
                row.estimator,
                row.route,
                row.point,
                row.se.map_or(String::new(), |v| v.to_string()),
                row.ci_lower.map_or(String::new(), |v| v.to_string()),
                row.ci_upper.map_or(String::new(), |v| v.to_string()),
                row.n_used,
                csv_field(&row.notes.join("; ")),
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Attrition: overall {:.3}, treatment {:.3}, control {:.3}\n\n",
            self.attrition.overall, self.attrition.treatment, self.attrition.control
        ));
        out.push_str(&format!(
            "{:<10} {:<22} {:<17} {:>9} {:>8} {:>19} {:>7}\n",
            "Estimand", "Estimator", "Route", "Point", "SE", "CI", "N"
        ));
        for row in &self.estimates {
            let se = row.se.map_or("-".to_string(), |v| format!("{v:.3}"));
            let ci = match (row.ci_lower, row.ci_upper) {
                (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
                _ => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<10} {:<22} {:<17} {:>9.3} {:>8} {:>19} {:>7}\n",
                row.estimand, row.estimator, row.route, row.point, se, ci, row.n_used
            ));
            for note in &row.notes {
                out.push_str(&format!("           note: {note}\n"));
            }
        }
        if let Some(diag) = &self.diagnostics {
            out.push_str(&format!(
                "\nRandom-assignment diagnostic: untreated sup {:.4} (p={:.3}), \
                 treated sup {:.4} (p={:.3})\n",
                diag.untreated_stat, diag.untreated_p, diag.treated_stat, diag.treated_p
            ));
        }
        for warning in &self.warnings {
            out.push_str(&format!("\nwarning: {warning}\n"));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn summary() -> AttritionSummary {
        AttritionSummary {
            overall: 0.25,
            treatment: 0.2,
            control: 0.3,
            baseline_means: Default::default(),
        }
    }

    #[test]
    fn digest_is_stable_and_order_insensitive_input_sensitive() {
        let a = json!({"seed": 1, "draws": 999});
        let b = json!({"draws": 999, "seed": 1});
        // serde_json maps are order-preserving only with preserve_order; the
        // default BTreeMap canonicalizes, so these must agree.
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_ne!(config_digest(&a), config_digest(&json!({"seed": 2, "draws": 999})));
    }

    #[test]
    fn json_round_trips_schema_version() {
        let mut report = EstimateReport::new(json!({"input": "x.csv"}), summary());
        report.estimates.push(EstimateRow {
            estimand: "ATT-R".into(),
            estimator: "CiC".into(),
            route: "respondents-only".into(),
            point: 1.25,
            se: Some(0.1),
            ci_lower: Some(1.05),
            ci_upper: Some(1.45),
            n_used: 100,
            notes: vec![],
        });
        let parsed: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(parsed["schema_version"], REPORT_SCHEMA_VERSION);
        assert_eq!(parsed["estimates"][0]["point"], 1.25);
        assert_eq!(parsed["config_digest"].as_str().unwrap().len(), 16);
    }

    #[test]
    fn csv_quotes_notes_with_commas() {
        let mut report = EstimateReport::new(json!({}), summary());
        report.estimates.push(EstimateRow {
            estimand: "ATE".into(),
            estimator: "IPW1".into(),
            route: "missing-at-random".into(),
            point: 0.5,
            se: None,
            ci_lower: None,
            ci_upper: None,
            n_used: 10,
            notes: vec!["a, b".into()],
        });
        let csv = report.to_csv();
        assert!(csv.contains("\"a, b\""));
        assert!(
            csv.starts_with("estimand,estimator,route,point,se,ci_lower,ci_upper,n_used,notes\n")
        );
    }
}
