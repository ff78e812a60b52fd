//! Storage-slot heuristics for inline assembly.

use super::structure::{assembly_blocks, call_at, enclosing_body, function_bodies, references_slot};
use super::{normalize_findings, Finding, VulnClass};
use crate::corpus::Contract;
use crate::lexer::{tokenize_unhashed, Token};

/// Flags storage access through `.slot` inside `assembly { }`:
///
/// * `sstore(x.slot, ..)` writes state behind the compiler's back;
/// * `sload(x.slot)` in a function with no `require(` ahead of the block
///   reads access-control state without enforcing it;
/// * `add`/`mul` over a `.slot` computes neighbouring slots.
pub fn detect_assembly_logic(contract: &Contract) -> Vec<Finding> {
    let tokens = tokenize_unhashed(&contract.source).tokens;
    let bodies = function_bodies(&tokens);
    let mut out = Vec::new();
    for (open, close) in assembly_blocks(&tokens) {
        let guarded = enclosing_body(&bodies, open).is_some_and(|b| has_require(&tokens[b.open + 1..open]));
        for i in open + 1..close {
            let name = tokens[i].text.as_str();
            if !matches!(name, "sstore" | "sload" | "add" | "mul") {
                continue;
            }
            let Some(call) = call_at(&tokens, i) else { continue };
            let first_arg_slot = call.args.first().is_some_and(|a| references_slot(&tokens[a.clone()]));
            let (class, why) = match name {
                "sstore" if first_arg_slot => {
                    (VulnClass::AsmStateManipulation, "sstore writes a state variable's slot directly")
                }
                "sload" if first_arg_slot && !guarded => (
                    VulnClass::AsmAccessBypass,
                    "sload reads a state slot in a function with no prior require",
                ),
                "add" | "mul" if call.args.iter().any(|a| references_slot(&tokens[a.clone()])) => {
                    (VulnClass::SlotEnumeration, "arithmetic over a .slot value addresses adjacent storage")
                }
                _ => continue,
            };
            out.push(finding(contract, &tokens, i, call.close, class, why));
        }
    }
    normalize_findings(out)
}

fn has_require(tokens: &[Token]) -> bool {
    tokens.windows(2).any(|w| w[0].is("require") && w[1].is("("))
}

fn finding(
    contract: &Contract,
    tokens: &[Token],
    first: usize,
    last: usize,
    class: VulnClass,
    why: &str,
) -> Finding {
    let (a, b) = (&tokens[first], &tokens[last]);
    Finding {
        contract_id: contract.id.clone(),
        vuln_class: class,
        lines: (a.line as usize, b.line as usize),
        matched_text: contract.source[a.offset..b.end()].to_string(),
        detector_id: format!("asm-{}", class.as_str()),
        confirmed: false,
        explanation: Some(why.to_string()),
    }
}
