use altmin::plk::{DistanceFloor, EstimateReport, GridReport, PlkCertificate};
use altmin::problems::EntrySummary;
use altmin::rates::{RateReport, TheoreticalRate};
use altmin::TerminationReason;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub problem: String,
    /// Completed iterations; the trace has one more row.
    pub iterations: usize,
    pub final_point: Vec<f64>,
    pub final_value: f64,
    pub final_residual: Option<f64>,
    pub termination_reason: TerminationReason,
    /// Iterations `k` where the sufficient-decrease inequality failed.
    pub descent_violations: Vec<usize>,
    pub trace_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub example: String,
    pub claim: String,
    pub certificate: Option<PlkCertificate<f64>>,
    pub grid: Option<GridReport>,
    /// The claim under test is expected to fail (a negative control).
    pub expect_violations: bool,
    pub distance_floor: Option<DistanceFloor>,
    pub flat_floor: Option<bool>,
    pub estimate: Option<EstimateReport>,
    pub seed: u64,
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub problem: String,
    pub box_radius: f64,
    pub reference_point: Vec<f64>,
    pub reference_value: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: EstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub trace: String,
    pub rows: usize,
    pub values: RateReport,
    pub iterates: Option<RateReport>,
    pub theoretical: Option<TheoreticalRate>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogListing {
    pub entries: Vec<EntrySummary>,
}
