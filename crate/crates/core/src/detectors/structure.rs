//! Token-level structure shared by the heuristics: bracket matching,
//! `assembly { }` blocks, function bodies and call arguments.

use std::ops::Range;

use crate::lexer::{Token, TokenKind};

/// Index of the bracket closing the one at `open`, if balanced.
pub(crate) fn matching(tokens: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match tokens.get(open)?.text.as_str() {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        if t.text == o {
            depth += 1;
        } else if t.text == c {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Brace indices (`{`, `}`) of every inline-assembly block.
pub(crate) fn assembly_blocks(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !tokens[i].is("assembly") {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        // assembly "evmasm" ("memory-safe") { ... }
        if tokens.get(j).is_some_and(|t| t.kind == TokenKind::String) {
            j += 1;
        }
        if tokens.get(j).is_some_and(|t| t.is("(")) {
            match matching(tokens, j) {
                Some(close) => j = close + 1,
                None => break,
            }
        }
        if tokens.get(j).is_some_and(|t| t.is("{")) {
            if let Some(close) = matching(tokens, j) {
                blocks.push((j, close));
                i = close + 1;
                continue;
            }
        }
        i += 1;
    }
    blocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Body {
    /// The introducing keyword.
    pub head: usize,
    pub open: usize,
    pub close: usize,
}

const FUNCTION_LIKE: [&str; 5] = ["function", "constructor", "modifier", "fallback", "receive"];

/// Bodies of functions, constructors and modifiers. Yul functions and
/// function-typed parameters are skipped.
pub(crate) fn function_bodies(tokens: &[Token]) -> Vec<Body> {
    let asm = assembly_blocks(tokens);
    let in_asm = |i: usize| asm.iter().any(|&(o, c)| o < i && i < c);
    let mut bodies: Vec<Body> = Vec::new();
    for head in 0..tokens.len() {
        let t = &tokens[head];
        if t.kind != TokenKind::Keyword || !FUNCTION_LIKE.contains(&t.text.as_str()) || in_asm(head) {
            continue;
        }
        if bodies.last().is_some_and(|b| head < b.close) {
            continue;
        }
        let mut depth = 0i32;
        let mut j = head + 1;
        while j < tokens.len() {
            let tj = &tokens[j];
            if tj.kind == TokenKind::Punctuation {
                match tj.text.as_str() {
                    "(" | "[" => depth += 1,
                    ")" | "]" => {
                        depth -= 1;
                        if depth < 0 {
                            break;
                        }
                    }
                    "{" if depth == 0 => {
                        if let Some(close) = matching(tokens, j) {
                            bodies.push(Body { head, open: j, close });
                        }
                        break;
                    }
                    ";" | "}" if depth == 0 => break,
                    _ => {}
                }
            }
            j += 1;
        }
    }
    bodies
}

/// The function body enclosing token `i`.
pub(crate) fn enclosing_body(bodies: &[Body], i: usize) -> Option<Body> {
    bodies.iter().copied().find(|b| b.open < i && i < b.close)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Call {
    pub name: usize,
    pub close: usize,
    /// Token ranges of the comma-separated arguments.
    pub args: Vec<Range<usize>>,
}

/// The call `name(...)` starting at `name`, if `name` is followed by `(`.
pub(crate) fn call_at(tokens: &[Token], name: usize) -> Option<Call> {
    let open = name + 1;
    if !tokens.get(open)?.is("(") {
        return None;
    }
    let close = matching(tokens, open)?;
    let mut args = Vec::new();
    let mut start = open + 1;
    let mut depth = 0usize;
    for (k, t) in tokens.iter().enumerate().take(close).skip(open + 1) {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            "," if depth == 0 => {
                args.push(start..k);
                start = k + 1;
            }
            _ => {}
        }
    }
    if start < close {
        args.push(start..close);
    }
    Some(Call { name, close, args })
}

/// True if the tokens contain a `<expr>.slot` access.
pub(crate) fn references_slot(tokens: &[Token]) -> bool {
    tokens.windows(2).any(|w| w[0].is(".") && w[1].is("slot"))
}
