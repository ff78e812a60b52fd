use std::path::Path;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use super::{normalize_findings, DetectorError, Finding, VulnClass};
use crate::corpus::Contract;
use crate::hash::sha256_hex;
use crate::lexer::{strip_comments, LineIndex};

const DEFAULT_RULES: &str = include_str!("../../rules/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    WholeFile,
    NonCommentLines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexRule {
    pub id: String,
    pub class: VulnClass,
    pub pattern: String,
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub rule: RegexRule,
    regex: Regex,
}

impl CompiledRule {
    pub fn new(rule: RegexRule) -> Result<Self, DetectorError> {
        let translated = python_compat(&rule.pattern)
            .map_err(|message| DetectorError::RegexCompileError { id: rule.id.clone(), message })?;
        let regex = Regex::new(&translated)
            .map_err(|e| DetectorError::RegexCompileError { id: rule.id.clone(), message: e.to_string() })?;
        Ok(Self { rule, regex })
    }

    /// Byte ranges of all non-empty, non-overlapping matches in `text`.
    pub fn match_spans(&self, text: &str) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        for m in self.regex.find_iter(text) {
            match m {
                Ok(m) if m.start() < m.end() => spans.push((m.start(), m.end())),
                Ok(_) => {}
                Err(e) => {
                    log::warn!("rule {}: match aborted: {e}", self.rule.id);
                    break;
                }
            }
        }
        spans
    }
}

/// Rewrites Python `re` syntax the Rust engine reads differently. A global
/// flag group such as `(?i)` placed mid-pattern applies to the whole
/// pattern in Python, so it is moved to the front.
pub fn python_compat(pattern: &str) -> Result<String, String> {
    let bytes = pattern.as_bytes();
    let mut flags = String::new();
    let mut body = String::with_capacity(pattern.len());
    let mut i = 0;
    let mut in_class = false;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            let width = pattern[i + 1..].chars().next().map_or(0, char::len_utf8);
            body.push_str(&pattern[i..i + 1 + width]);
            i += 1 + width;
            continue;
        }
        if in_class {
            if b == b']' {
                in_class = false;
            }
        } else if b == b'[' {
            in_class = true;
            // A leading `]` (or `^]`) is a literal member of the class.
            let mut j = i + 1;
            if bytes.get(j) == Some(&b'^') {
                j += 1;
            }
            if bytes.get(j) == Some(&b']') {
                body.push_str(&pattern[i..=j]);
                i = j + 1;
                continue;
            }
        } else if pattern[i..].starts_with("(?") {
            let rest = &pattern[i + 2..];
            let letters: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
            if !letters.is_empty() && rest[letters.len()..].starts_with(')') {
                for c in letters.chars() {
                    match c {
                        'i' | 'm' | 's' | 'x' => {
                            if !flags.contains(c) {
                                flags.push(c);
                            }
                        }
                        'u' => {}
                        other => return Err(format!("unsupported inline flag `{other}`")),
                    }
                }
                i += 2 + letters.len() + 1;
                continue;
            }
        }
        let width = pattern[i..].chars().next().map_or(1, char::len_utf8);
        body.push_str(&pattern[i..i + width]);
        i += width;
    }
    if flags.is_empty() {
        Ok(body)
    } else {
        Ok(format!("(?{flags}){body}"))
    }
}

#[derive(Debug, Clone)]
pub struct Ruleset {
    rules: Vec<CompiledRule>,
}

impl Ruleset {
    pub fn new(rules: Vec<RegexRule>) -> Result<Self, DetectorError> {
        Ok(Self { rules: rules.into_iter().map(CompiledRule::new).collect::<Result<_, _>>()? })
    }

    /// The bundled rules, patterns verbatim.
    pub fn default_rules() -> Self {
        Self::from_json(DEFAULT_RULES).expect("bundled ruleset compiles")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_RULES
    }

    pub fn from_json(text: &str) -> Result<Self, DetectorError> {
        let rules: Vec<RegexRule> = serde_json::from_str(text)
            .map_err(|e| DetectorError::RulesetFile { path: "<inline>".into(), message: e.to_string() })?;
        Self::new(rules)
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let text = std::fs::read_to_string(path).map_err(|e| DetectorError::RulesetFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            DetectorError::RulesetFile { message, .. } => {
                DetectorError::RulesetFile { path: path.display().to_string(), message }
            }
            other => other,
        })
    }

    pub fn rules(&self) -> impl Iterator<Item = &CompiledRule> {
        self.rules.iter()
    }

    pub fn get(&self, id: &str) -> Option<&CompiledRule> {
        self.rules.iter().find(|r| r.rule.id == id)
    }

    /// SHA-256 over the compact JSON of the rule list.
    pub fn hash(&self) -> String {
        let raw: Vec<&RegexRule> = self.rules.iter().map(|r| &r.rule).collect();
        sha256_hex(&serde_json::to_vec(&raw).expect("rules serialize"))
    }
}

/// Runs one rule. Non-comment-scoped rules see the source with comments
/// blanked; offsets are unchanged so spans index the original source.
pub fn run_rule(rule: &CompiledRule, contract: &Contract) -> Vec<Finding> {
    let stripped;
    let text = match rule.rule.scope {
        Scope::WholeFile => contract.source.as_str(),
        Scope::NonCommentLines => {
            stripped = strip_comments(&contract.source);
            stripped.as_str()
        }
    };
    let index = LineIndex::new(text);
    rule.match_spans(text)
        .into_iter()
        .map(|(start, end)| Finding {
            contract_id: contract.id.clone(),
            vuln_class: rule.rule.class,
            lines: (index.line_of(start), index.line_of(end - 1)),
            matched_text: contract.source[start..end].to_string(),
            detector_id: rule.rule.id.clone(),
            confirmed: false,
            explanation: None,
        })
        .collect()
}

/// Union of every rule's findings, sorted by (line, class).
pub fn run_all(contract: &Contract, ruleset: &Ruleset) -> Vec<Finding> {
    normalize_findings(ruleset.rules().flat_map(|r| run_rule(r, contract)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contract(src: &str) -> Contract {
        Contract::from_source("t.sol", src)
    }

    fn rule(id: &str) -> CompiledRule {
        Ruleset::default_rules().get(id).unwrap().clone()
    }

    #[test]
    fn default_rules_load() {
        let rs = Ruleset::default_rules();
        assert_eq!(rs.rules().count(), 8);
        assert_eq!(rs.hash().len(), 64);
    }

    #[test]
    fn flag_hoisting() {
        assert_eq!(python_compat(r"\b((?i)send|transfer)\s*\(").unwrap(), r"(?i)\b(send|transfer)\s*\(");
        assert_eq!(python_compat(r"[(?i)]x").unwrap(), r"[(?i)]x");
        assert_eq!(python_compat(r"\(?i\)").unwrap(), r"\(?i\)");
        assert_eq!(python_compat(r"(?i:a)b").unwrap(), r"(?i:a)b");
        assert!(python_compat("(?L)x").is_err());
    }

    #[test]
    fn reentrancy_rule_matches_transfer() {
        let f = run_rule(&rule("re-send-transfer"), &contract("msg.sender.transfer(amount);"));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].vuln_class, VulnClass::RE);
        assert_eq!(f[0].matched_text, "transfer(");
        // Case-insensitive over both alternatives.
        let f = run_rule(&rule("re-send-transfer"), &contract("x.SEND(1); y.Transfer (2);"));
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn tx_origin_rule() {
        let f = run_rule(&rule("tx-origin"), &contract("require(tx.origin == owner);"));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].lines, (1, 1));
    }

    #[test]
    fn empty_file_has_no_findings() {
        assert!(run_all(&contract(""), &Ruleset::default_rules()).is_empty());
    }

    #[test]
    fn comment_matches_are_ignored() {
        let f = run_all(&contract("// x.transfer(1)\n/* y.send(2) */\n"), &Ruleset::default_rules());
        assert!(f.is_empty(), "{f:?}");
    }

    #[test]
    fn union_keeps_both_classes_on_a_line() {
        let src = "(bool ok, ) = to.call(data); to.transfer(v);";
        let f = run_all(&contract(src), &Ruleset::default_rules());
        let classes: Vec<_> = f.iter().map(|f| f.vuln_class).collect();
        assert_eq!(classes, [VulnClass::RE, VulnClass::LLC]);
        assert!(f.iter().all(|f| f.lines == (1, 1)));
    }

    #[test]
    fn equality_match_spanning_lines() {
        let f = run_rule(&rule("ie-equality"), &contract("a\n  == b"));
        assert_eq!(f[0].lines, (1, 2));
        assert_eq!(f[0].matched_text, "\n  == ");
    }

    #[test]
    fn same_class_same_line_is_deduplicated() {
        let f = run_all(&contract("if (a == b && c == d) {}"), &Ruleset::default_rules());
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn locked_ether_needs_vertical_tab() {
        let r = rule("le-locked-ether");
        let plain = "function () payable {\n x = 1;\n}\n}";
        assert!(run_rule(&r, &contract(plain)).is_empty());
        let vt = "function () payable {\n x = 1;\n}\u{b}}";
        let f = run_rule(&r, &contract(vt));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].lines, (1, 3));
    }

    #[test]
    fn calls_loop_rule_matches_bare_declarations() {
        let r = rule("clp-calls-loop");
        assert_eq!(run_rule(&r, &contract("uint x;")).len(), 1);
        assert!(run_rule(&r, &contract("uint256 x;")).is_empty());
        assert!(run_rule(&r, &contract("bytes memory;")).is_empty());
    }

    #[test]
    fn bad_pattern_fails_at_load() {
        let bad = RegexRule {
            id: "bad".into(),
            class: VulnClass::RE,
            pattern: "(unclosed".into(),
            scope: Scope::WholeFile,
            note: None,
        };
        assert!(matches!(Ruleset::new(vec![bad]), Err(DetectorError::RegexCompileError { .. })));
    }
}
