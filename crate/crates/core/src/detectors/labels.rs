//! External-tool confirmation and per-contract label documents.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{normalize_findings, DetectorError, Finding, VulnClass};
use crate::corpus::Contract;

/// Lines a tool finding may sit away from a regex finding and still confirm it.
pub const DEFAULT_TOLERANCE: usize = 2;

/// One line of adapter output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFinding {
    pub class: VulnClass,
    pub line_start: usize,
    pub line_end: usize,
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

#[derive(Deserialize)]
struct RawToolFinding {
    class: String,
    line_start: usize,
    line_end: usize,
    tool: String,
    #[serde(default)]
    version: Option<String>,
}

/// Parses adapter output: one JSON object per line, blank lines ignored.
pub fn parse_tool_output(text: &str) -> Result<Vec<ToolFinding>, DetectorError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| DetectorError::AdapterSchemaError { line: n + 1, message };
        let raw: RawToolFinding = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let class = raw.class.parse().map_err(|_| bad(format!("unknown class `{}`", raw.class)))?;
        if raw.line_start == 0 || raw.line_end < raw.line_start {
            return Err(bad(format!("bad line span {}..{}", raw.line_start, raw.line_end)));
        }
        out.push(ToolFinding {
            class,
            line_start: raw.line_start,
            line_end: raw.line_end,
            tool: raw.tool,
            version: raw.version,
        });
    }
    Ok(out)
}

/// Runs `command` (whitespace-split) with the contract path appended and
/// parses its stdout.
pub fn run_tool(command: &str, contract_path: &Path) -> Result<Vec<ToolFinding>, DetectorError> {
    let failed = |message: String| DetectorError::ToolFailed { command: command.to_string(), message };
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| failed("empty command".into()))?;
    let output =
        Command::new(program).args(parts).arg(contract_path).output().map_err(|e| failed(e.to_string()))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(failed(format!("{}: {}", output.status, stderr.trim())));
    }
    parse_tool_output(&String::from_utf8_lossy(&output.stdout))
}

/// Marks a finding confirmed when a tool reports the same class on an
/// overlapping span, widened by `tolerance` lines. Nothing is dropped.
pub fn intersect_labels(
    mut findings: Vec<Finding>,
    tool_findings: &[ToolFinding],
    tolerance: usize,
) -> Vec<Finding> {
    for f in &mut findings {
        let (start, end) = f.lines;
        f.confirmed = tool_findings.iter().any(|t| {
            t.class == f.vuln_class && t.line_start <= end + tolerance && t.line_end + tolerance >= start
        });
    }
    findings
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub class: VulnClass,
    pub lines: [usize; 2],
    pub detector: String,
    pub confirmed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMeta {
    pub tool_versions: BTreeMap<String, String>,
    pub ruleset_hash: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LabelMeta {
    /// Collects `tool -> version` from tool output; tools that report no
    /// version are listed as "unknown".
    pub fn record_tools(&mut self, tool_findings: &[ToolFinding]) {
        for t in tool_findings {
            let v = t.version.clone().unwrap_or_else(|| "unknown".into());
            let slot = self.tool_versions.entry(t.tool.clone()).or_insert_with(|| v.clone());
            if slot == "unknown" {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDocument {
    pub contract: String,
    pub id: String,
    pub findings: Vec<LabelEntry>,
    pub meta: LabelMeta,
}

impl LabelDocument {
    /// Rebuilds findings; `matched_text` is recovered from the source lines.
    pub fn to_findings(&self, source: Option<&str>) -> Vec<Finding> {
        let lines: Vec<&str> = source.map(|s| s.split('\n').collect()).unwrap_or_default();
        self.findings
            .iter()
            .map(|e| Finding {
                contract_id: self.id.clone(),
                vuln_class: e.class,
                lines: (e.lines[0], e.lines[1]),
                matched_text: lines
                    .get(e.lines[0].saturating_sub(1)..e.lines[1].min(lines.len()))
                    .map(|l| l.join("\n"))
                    .unwrap_or_default(),
                detector_id: e.detector.clone(),
                confirmed: e.confirmed,
                explanation: e.explanation.clone(),
            })
            .collect()
    }
}

pub fn emit_labels_json(contract: &Contract, findings: &[Finding], meta: LabelMeta) -> LabelDocument {
    let findings = normalize_findings(findings.to_vec())
        .into_iter()
        .map(|f| LabelEntry {
            class: f.vuln_class,
            lines: [f.lines.0, f.lines.1],
            detector: f.detector_id,
            confirmed: f.confirmed,
            explanation: f.explanation,
        })
        .collect();
    LabelDocument { contract: contract.file_name().to_string(), id: contract.id.clone(), findings, meta }
}
