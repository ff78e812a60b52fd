//! Vulnerability detectors: regex rules, inline-assembly heuristics, the
//! uninitialized-local heuristic, tool-confirmation and label files.

mod assembly;
mod labels;
mod mitigation;
mod rules;
mod structure;
mod uninit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assembly::detect_assembly_logic;
pub use labels::{
    emit_labels_json, intersect_labels, parse_tool_output, run_tool, LabelDocument, LabelEntry, LabelMeta,
    ToolFinding, DEFAULT_TOLERANCE,
};
pub use mitigation::{suggest_mitigations, MitigationCatalog, StrategyId};
pub use rules::{python_compat, run_all, run_rule, CompiledRule, RegexRule, Ruleset, Scope};
pub use uninit::detect_uninitialized_locals;

use crate::corpus::Contract;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("rule `{id}` does not compile: {message}")]
    RegexCompileError { id: String, message: String },
    #[error("unknown vulnerability class `{0}`")]
    UnknownClass(String),
    #[error("tool output line {line}: {message}")]
    AdapterSchemaError { line: usize, message: String },
    #[error("tool `{command}` failed: {message}")]
    ToolFailed { command: String, message: String },
    #[error("{path}: {message}")]
    RulesetFile { path: String, message: String },
}

/// Vulnerability classes: the six trained classes, three extra regex
/// classes, and three inline-assembly heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VulnClass {
    RE,
    UL,
    CLP,
    LLC,
    LE,
    IE,
    ControlledDelegatecall,
    TimestampDependence,
    TxOrigin,
    AsmAccessBypass,
    AsmStateManipulation,
    SlotEnumeration,
}

impl VulnClass {
    pub const ALL: [VulnClass; 12] = [
        VulnClass::RE,
        VulnClass::UL,
        VulnClass::CLP,
        VulnClass::LLC,
        VulnClass::LE,
        VulnClass::IE,
        VulnClass::ControlledDelegatecall,
        VulnClass::TimestampDependence,
        VulnClass::TxOrigin,
        VulnClass::AsmAccessBypass,
        VulnClass::AsmStateManipulation,
        VulnClass::SlotEnumeration,
    ];

    /// Classes the sequence classifiers are trained on.
    pub const TRAINED: [VulnClass; 6] =
        [VulnClass::RE, VulnClass::UL, VulnClass::CLP, VulnClass::LLC, VulnClass::LE, VulnClass::IE];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::RE => "RE",
            VulnClass::UL => "UL",
            VulnClass::CLP => "CLP",
            VulnClass::LLC => "LLC",
            VulnClass::LE => "LE",
            VulnClass::IE => "IE",
            VulnClass::ControlledDelegatecall => "ControlledDelegatecall",
            VulnClass::TimestampDependence => "TimestampDependence",
            VulnClass::TxOrigin => "TxOrigin",
            VulnClass::AsmAccessBypass => "AsmAccessBypass",
            VulnClass::AsmStateManipulation => "AsmStateManipulation",
            VulnClass::SlotEnumeration => "SlotEnumeration",
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VulnClass {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| DetectorError::UnknownClass(s.to_string()))
    }
}

/// One detected vulnerability instance. `lines` is an inclusive 1-based span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub contract_id: String,
    pub vuln_class: VulnClass,
    pub lines: (usize, usize),
    pub matched_text: String,
    pub detector_id: String,
    pub confirmed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl Finding {
    fn sort_key(&self) -> (usize, VulnClass, usize, &str) {
        (self.lines.0, self.vuln_class, self.lines.1, &self.detector_id)
    }
}

/// Sorts by (line, class) and drops repeated (class, line span) pairs,
/// keeping the first.
pub fn normalize_findings(mut findings: Vec<Finding>) -> Vec<Finding> {
    let mut seen = std::collections::HashSet::new();
    findings.retain(|f| seen.insert((f.vuln_class, f.lines)));
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    findings
}

/// Every detector over one contract: the ruleset plus the assembly and
/// uninitialized-local heuristics.
pub fn detect(contract: &Contract, ruleset: &Ruleset) -> Vec<Finding> {
    let mut all = run_all(contract, ruleset);
    all.extend(detect_assembly_logic(contract));
    all.extend(detect_uninitialized_locals(contract));
    normalize_findings(all)
}
