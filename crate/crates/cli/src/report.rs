use serde::Serialize;
use serde_json::Value;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Envelope shared by every command's JSON output.
#[derive(Debug, Serialize)]
pub struct Report<B> {
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Value,
    #[serde(flatten)]
    pub body: B,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FirmRow {
    pub ticker: String,
    pub d_over_v0: f64,
    pub sigma: f64,
    pub q: f64,
    pub eta: f64,
    pub survival: f64,
    pub default_prob: f64,
}

#[derive(Debug, Serialize)]
pub struct SurvivalBody {
    pub horizon_years: f64,
    pub firms: Vec<FirmRow>,
}

#[derive(Debug, Serialize)]
pub struct PairValue {
    pub pair: [String; 2],
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Joint survival report. Fields a method does not produce are null.
#[derive(Debug, Serialize)]
pub struct JointBody {
    pub method: &'static str,
    pub horizon_years: f64,
    pub p0: f64,
    pub p1_over_p0: f64,
    pub joint: f64,
    pub duration: Option<f64>,
    pub default_correlations: Vec<PairValue>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Cell {
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub ok: bool,
}

impl Cell {
    pub fn absolute(value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            value,
            reference,
            tolerance,
            ok: (value - reference).abs() <= tolerance,
        }
    }

    pub fn relative(value: f64, reference: f64, rel: f64) -> Self {
        Self::absolute(value, reference, rel * reference.abs())
    }
}

#[derive(Debug, Serialize)]
pub struct Table2Row {
    pub sigma: f64,
    pub d_over_v0: f64,
    pub survival: Cell,
    pub chi: Cell,
    pub a_fp_over_sigma2: Cell,
    pub a_c_over_sigma2: Cell,
}

#[derive(Debug, Serialize)]
pub struct Table2Body {
    pub horizon_years: f64,
    pub rows: Vec<Table2Row>,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub xi: f64,
    pub joint: f64,
    pub linear: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepBody {
    pub p0: f64,
    pub duration: f64,
    pub rows: Vec<SweepRow>,
}
