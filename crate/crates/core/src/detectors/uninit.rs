//! Uninitialized local variables: a declaration without initializer whose
//! first later use reads the value instead of assigning it.

use super::structure::{assembly_blocks, function_bodies, matching};
use super::{normalize_findings, Finding, VulnClass};
use crate::corpus::Contract;
use crate::lexer::{is_elementary_type, tokenize_unhashed, Token, TokenKind};

pub const DETECTOR_ID: &str = "ul-uninitialized-local";

const LOCATIONS: [&str; 3] = ["memory", "storage", "calldata"];

pub fn detect_uninitialized_locals(contract: &Contract) -> Vec<Finding> {
    let tokens = tokenize_unhashed(&contract.source).tokens;
    let asm = assembly_blocks(&tokens);
    let in_asm = |i: usize| asm.iter().any(|&(o, c)| o <= i && i <= c);
    let mut out = Vec::new();
    for body in function_bodies(&tokens) {
        let mut i = body.open + 1;
        while i < body.close {
            let at_statement = matches!(tokens[i - 1].text.as_str(), "{" | "}" | ";");
            if !at_statement || in_asm(i) {
                i += 1;
                continue;
            }
            let Some((name, semi)) = declaration(&tokens[..body.close], i) else {
                i += 1;
                continue;
            };
            if first_use_is_read(&tokens[semi + 1..body.close], &tokens[name].text) {
                let (a, b) = (&tokens[i], &tokens[semi]);
                out.push(Finding {
                    contract_id: contract.id.clone(),
                    vuln_class: VulnClass::UL,
                    lines: (a.line as usize, b.line as usize),
                    matched_text: contract.source[a.offset..b.end()].to_string(),
                    detector_id: DETECTOR_ID.to_string(),
                    confirmed: false,
                    explanation: Some(format!("`{}` is read before it is assigned", tokens[name].text)),
                });
            }
            i = semi + 1;
        }
    }
    normalize_findings(out)
}

/// Matches `Type [payable] [..]* [location] name ;` at `start`, returning the
/// indices of `name` and `;`.
fn declaration(tokens: &[Token], start: usize) -> Option<(usize, usize)> {
    let first = tokens.get(start)?;
    let mut j = start + 1;
    if first.kind == TokenKind::Identifier {
        // Qualified user type: Lib.Struct
        while tokens.get(j).is_some_and(|t| t.is(".")) && tokens.get(j + 1).is_some_and(is_ident) {
            j += 2;
        }
    } else if !is_elementary_type(&first.text) {
        return None;
    }
    if first.is("address") && tokens.get(j).is_some_and(|t| t.is("payable")) {
        j += 1;
    }
    while tokens.get(j).is_some_and(|t| t.is("[")) {
        j = matching(tokens, j)? + 1;
    }
    if tokens.get(j).is_some_and(|t| LOCATIONS.contains(&t.text.as_str())) {
        j += 1;
    }
    tokens.get(j).filter(|t| is_ident(t))?;
    tokens.get(j + 1).filter(|t| t.is(";"))?;
    Some((j, j + 1))
}

fn is_ident(t: &Token) -> bool {
    t.kind == TokenKind::Identifier
}

fn first_use_is_read(rest: &[Token], name: &str) -> bool {
    for (k, t) in rest.iter().enumerate() {
        if !t.is(name) || (k > 0 && rest[k - 1].is(".")) {
            continue;
        }
        return !(rest.get(k + 1).is_some_and(|n| n.is("=")) || in_tuple_target(rest, k));
    }
    false
}

/// `(a, name, ) = ...`
fn in_tuple_target(rest: &[Token], k: usize) -> bool {
    let tuple_item = |t: &Token| t.is(",") || is_ident(t);
    let mut back = k;
    while back > 0 && tuple_item(&rest[back - 1]) {
        back -= 1;
    }
    if back == 0 || !rest[back - 1].is("(") {
        return false;
    }
    let mut fwd = k + 1;
    while fwd < rest.len() && tuple_item(&rest[fwd]) {
        fwd += 1;
    }
    rest.get(fwd).is_some_and(|t| t.is(")")) && rest.get(fwd + 1).is_some_and(|t| t.is("="))
}
