//! Machine-readable run reports and their CSV renderings.
//!
//! Every report shares an envelope (model id, tool version, timestamp, seed,
//! input digest, convergence metadata) followed by model-specific fields.
//! Rerunning with the same input, seed and configuration reproduces the JSON
//! byte for byte apart from the `generated_at` timestamp.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub model: String,
    pub tool_version: String,
    pub generated_at: String,
    pub seed: u64,
    pub input_digest: String,
    pub converged: bool,
    pub stop_reason: String,
    pub iterations: usize,
}

impl Envelope {
    pub fn new(
        model: &str,
        seed: u64,
        input_digest: String,
        converged: bool,
        stop_reason: String,
        iterations: usize,
    ) -> Self {
        Self {
            model: model.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: chrono::Utc::now().to_rfc3339(),
            seed,
            input_digest,
            converged,
            stop_reason,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AboReport {
    #[serde(flatten)]
    pub envelope: Envelope,
    #[serde(rename = "p_A")]
    pub p_a: f64,
    #[serde(rename = "p_B")]
    pub p_b: f64,
    #[serde(rename = "p_O")]
    pub p_o: f64,
    pub loglik_trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IbdReport {
    #[serde(flatten)]
    pub envelope: Envelope,
    pub pi_0: f64,
    pub pi_1: f64,
    pub pi_2: f64,
    pub n_pairs: usize,
    pub n_uninformative: usize,
    pub loglik_trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceAlignment {
    /// 1-based most probable motif start.
    pub best_start: usize,
    pub posterior: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRun {
    pub restart: usize,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartsSummary {
    pub selected: usize,
    pub runs: Vec<RestartRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifReport {
    #[serde(flatten)]
    pub envelope: Envelope,
    pub consensus: String,
    /// 4×W matrix: one row per base (A, C, G, T), one column per position.
    pub theta: Vec<Vec<f64>>,
    pub theta_bg: Vec<f64>,
    pub per_sequence: Vec<SequenceAlignment>,
    pub loglik: f64,
    pub restarts_summary: RestartsSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeconvReport {
    #[serde(flatten)]
    pub envelope: Envelope,
    pub f_raw: Vec<f64>,
    pub f_normalized: Vec<f64>,
    pub total_mass: f64,
    pub fitted_mu: Vec<f64>,
    pub loglik_trace: Vec<f64>,
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports always serialize");
    text.push('\n');
    text
}

/// Renders a stored report as CSV: the normalized size distribution for
/// `deconv`, the 4×W probability table for `motif`. Other models have no
/// histogram form.
pub fn histogram_csv(report_json: &str) -> Result<String, HistogramError> {
    let value: serde_json::Value =
        serde_json::from_str(report_json).map_err(|e| HistogramError::Malformed(e.to_string()))?;
    let model = value
        .get("model")
        .and_then(|m| m.as_str())
        .ok_or_else(|| HistogramError::Malformed("report has no model field".into()))?;
    match model {
        "deconv" => {
            let report: DeconvReport = serde_json::from_str(report_json)
                .map_err(|e| HistogramError::Malformed(e.to_string()))?;
            let mut out = String::from("label,value\n");
            for (j, v) in report.f_normalized.iter().enumerate() {
                out.push_str(&format!("class_{},{}\n", j + 1, v));
            }
            if report.total_mass == 0.0 {
                out.push_str("# degenerate=true\n");
            }
            Ok(out)
        }
        "motif" => {
            let report: MotifReport = serde_json::from_str(report_json)
                .map_err(|e| HistogramError::Malformed(e.to_string()))?;
            let width = report.theta.first().map_or(0, Vec::len);
            let mut out = String::from("base");
            for p in 1..=width {
                out.push_str(&format!(",pos_{p}"));
            }
            out.push('\n');
            for (base, row) in ["A", "C", "G", "T"].iter().zip(&report.theta) {
                out.push_str(base);
                for v in row {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
            Ok(out)
        }
        other => Err(HistogramError::Unsupported(other.to_string())),
    }
}

#[derive(Debug)]
pub enum HistogramError {
    /// The report names a model without a histogram rendering.
    Unsupported(String),
    /// The file is not a report this tool wrote.
    Malformed(String),
}

impl std::fmt::Display for HistogramError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistogramError::Unsupported(model) => {
                write!(f, "no histogram form for {model:?} reports")
            }
            HistogramError::Malformed(detail) => write!(f, "not a valid report: {detail}"),
        }
    }
}
