use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Outcome of one two-sample test, serializable as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub statistic: f64,
    /// Rejection threshold on `statistic` when the rule is threshold based.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    pub pvalue: f64,
    pub reject: bool,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Map<String, Value>,
}

impl TestReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
