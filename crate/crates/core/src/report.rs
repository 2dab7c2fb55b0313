//! Structured outcomes of verification passes.

use serde::{Deserialize, Serialize};

use crate::lattice::NodeId;
use crate::scalar::Scalar;

/// Where the worst margin of a check was attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location<T: Scalar> {
    Node(NodeId),
    Point { x: T, y: T },
    None,
}

/// One named check: its worst margin, where it happened, and how many
/// evaluation sites violated the tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord<T: Scalar> {
    pub name: String,
    pub passed: bool,
    pub worst_margin: T,
    pub location: Location<T>,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// A bundle of checks sharing one tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport<T: Scalar> {
    pub tol: T,
    pub checks: Vec<CheckRecord<T>>,
    pub passed: bool,
}

impl<T: Scalar> VerificationReport<T> {
    pub fn new(tol: T) -> Self {
        VerificationReport { tol, checks: Vec::new(), passed: true }
    }

    pub fn push(&mut self, record: CheckRecord<T>) {
        self.passed = self.passed && record.passed;
        self.checks.push(record);
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord<T>> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_violation(&self) -> Option<&CheckRecord<T>> {
        self.checks.iter().find(|c| !c.passed)
    }
}
