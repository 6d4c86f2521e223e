//! Machine-readable check records shared by the verification pipelines and
//! the CLI.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One named check: exact checks carry value 0.0 or the norm of the
/// offending polynomial; numeric checks carry the residual.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub context: String,
}

impl CheckRecord {
    pub fn pass(name: impl Into<String>, value: f64, context: impl Into<String>) -> Self {
        CheckRecord { name: name.into(), status: Status::Pass, value, context: context.into() }
    }

    pub fn fail(name: impl Into<String>, value: f64, context: impl Into<String>) -> Self {
        CheckRecord { name: name.into(), status: Status::Fail, value, context: context.into() }
    }

    pub fn residual(name: impl Into<String>, value: f64, tol: f64, context: impl Into<String>) -> Self {
        let status = if value.abs() <= tol { Status::Pass } else { Status::Fail };
        CheckRecord { name: name.into(), status, value, context: context.into() }
    }
}

/// Full run report; deterministic given the input spec and seed.
#[derive(Clone, Debug, Serialize, Default)]
pub struct Report {
    pub tool_version: String,
    pub input_hash: String,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn new(input_hash: impl Into<String>) -> Self {
        Report {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash: input_hash.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(rs);
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.status == Status::Fail)
    }
}
