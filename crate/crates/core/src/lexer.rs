//! Lexical scanner for Solidity (and inline Yul) source.
//!
//! The scanner produces a flat token stream with comments and whitespace
//! removed. It never fails outright: unterminated strings and block comments
//! are reported as [`LexError`]s and scanning resumes on the following line.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hash::content_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    String,
    Operator,
    Punctuation,
    AssemblyKeyword,
}

/// A single lexeme. `line` and `col` are 1-based; `col` counts bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
    /// Byte offset of the first byte of `text` in the source.
    #[serde(skip)]
    pub offset: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexErrorKind {
    UnterminatedString,
    UnterminatedComment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexError {
    pub kind: LexErrorKind,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            LexErrorKind::UnterminatedString => "unterminated string literal",
            LexErrorKind::UnterminatedComment => "unterminated block comment",
        };
        write!(f, "{what} at {}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<LexError>,
}

impl TokenStream {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Number of distinct token texts.
    pub fn vocab_count(&self) -> usize {
        let mut seen: Vec<&str> = self.texts().collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "after",
    "alias",
    "anonymous",
    "apply",
    "as",
    "auto",
    "break",
    "calldata",
    "case",
    "catch",
    "constant",
    "constructor",
    "continue",
    "contract",
    "copyof",
    "days",
    "default",
    "define",
    "delete",
    "do",
    "else",
    "emit",
    "enum",
    "error",
    "ether",
    "event",
    "external",
    "fallback",
    "false",
    "final",
    "for",
    "from",
    "function",
    "global",
    "gwei",
    "hours",
    "if",
    "immutable",
    "implements",
    "import",
    "in",
    "indexed",
    "inline",
    "interface",
    "internal",
    "is",
    "let",
    "library",
    "macro",
    "mapping",
    "match",
    "memory",
    "minutes",
    "modifier",
    "mutable",
    "new",
    "null",
    "of",
    "override",
    "partial",
    "payable",
    "pragma",
    "private",
    "promise",
    "public",
    "pure",
    "receive",
    "reference",
    "relocatable",
    "return",
    "returns",
    "sealed",
    "seconds",
    "sizeof",
    "static",
    "storage",
    "struct",
    "super",
    "supports",
    "switch",
    "this",
    "true",
    "try",
    "type",
    "typedef",
    "typeof",
    "unchecked",
    "using",
    "var",
    "view",
    "virtual",
    "weeks",
    "wei",
    "while",
    "years",
];

/// Yul builtins and keywords; tagged only inside `assembly { ... }`.
const YUL_WORDS: &[&str] = &[
    "add",
    "addmod",
    "and",
    "balance",
    "basefee",
    "blobbasefee",
    "blobhash",
    "blockhash",
    "break",
    "byte",
    "call",
    "callcode",
    "calldatacopy",
    "calldataload",
    "calldatasize",
    "caller",
    "callvalue",
    "case",
    "chainid",
    "codecopy",
    "codesize",
    "coinbase",
    "continue",
    "create",
    "create2",
    "default",
    "delegatecall",
    "div",
    "eq",
    "exp",
    "extcodecopy",
    "extcodehash",
    "extcodesize",
    "for",
    "function",
    "gas",
    "gaslimit",
    "gasprice",
    "gt",
    "if",
    "invalid",
    "iszero",
    "keccak256",
    "leave",
    "let",
    "log0",
    "log1",
    "log2",
    "log3",
    "log4",
    "lt",
    "mcopy",
    "mload",
    "mod",
    "msize",
    "mstore",
    "mstore8",
    "mul",
    "mulmod",
    "not",
    "or",
    "origin",
    "pop",
    "prevrandao",
    "return",
    "returndatacopy",
    "returndatasize",
    "revert",
    "sar",
    "sdiv",
    "selfbalance",
    "selfdestruct",
    "sgt",
    "shl",
    "shr",
    "signextend",
    "sload",
    "slt",
    "smod",
    "sstore",
    "staticcall",
    "stop",
    "sub",
    "switch",
    "timestamp",
    "tload",
    "tstore",
    "xor",
];

const OPERATORS: &[&str] = &[
    ">>>=", ">>>", "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "|=", "&=", "^=", "<<", ">>", "**", "->", "=>", ":=", "+", "-", "*", "/", "%", "=", "<", ">", "!",
    "&", "|", "^", "~", "?", ":",
];

pub(crate) fn is_elementary_type(word: &str) -> bool {
    fn sized(rest: &str, ok: impl Fn(u32) -> bool) -> bool {
        rest.is_empty()
            || (!rest.starts_with('0')
                && rest.bytes().all(|b| b.is_ascii_digit())
                && rest.parse::<u32>().map(&ok).unwrap_or(false))
    }
    match word {
        "address" | "bool" | "string" | "byte" | "bytes" | "fixed" | "ufixed" => true,
        _ => {
            if let Some(rest) = word.strip_prefix("uint") {
                sized(rest, |n| n % 8 == 0 && (8..=256).contains(&n))
            } else if let Some(rest) = word.strip_prefix("int") {
                sized(rest, |n| n % 8 == 0 && (8..=256).contains(&n))
            } else if let Some(rest) = word.strip_prefix("bytes") {
                sized(rest, |n| (1..=32).contains(&n))
            } else {
                false
            }
        }
    }
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok() || is_elementary_type(word)
}

fn is_yul_word(word: &str) -> bool {
    YUL_WORDS.binary_search(&word).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme {
    Token(TokenKind, usize, usize),
    Comment(usize, usize),
}

/// Tracks whether the scanner is inside an inline assembly block.
#[derive(Debug, Default)]
struct AsmTracker {
    /// Saw `assembly`, waiting for its opening brace.
    pending: bool,
    pending_parens: u32,
    depth: u32,
}

impl AsmTracker {
    fn inside(&self) -> bool {
        self.depth > 0
    }

    fn observe(&mut self, kind: TokenKind, text: &str) {
        if self.depth > 0 {
            match text {
                "{" => self.depth += 1,
                "}" => self.depth -= 1,
                _ => {}
            }
            return;
        }
        if self.pending {
            match (text, kind) {
                ("{", _) if self.pending_parens == 0 => {
                    self.pending = false;
                    self.depth = 1;
                }
                ("(", _) => self.pending_parens += 1,
                (")", _) if self.pending_parens > 0 => self.pending_parens -= 1,
                (_, TokenKind::String) => {}
                _ if self.pending_parens > 0 => {}
                _ => self.pending = false,
            }
            return;
        }
        if text == "assembly" {
            self.pending = true;
            self.pending_parens = 0;
        }
    }
}

struct Scanner<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    lexemes: Vec<Lexeme>,
    errors: Vec<(LexErrorKind, usize)>,
    asm: AsmTracker,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            lexemes: Vec::new(),
            errors: Vec::new(),
            asm: AsmTracker::default(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn next_line_start(&self, from: usize) -> usize {
        match self.bytes[from..].iter().position(|&b| b == b'\n') {
            Some(i) => from + i + 1,
            None => self.bytes.len(),
        }
    }

    fn line_end(&self, from: usize) -> usize {
        match self.bytes[from..].iter().position(|&b| b == b'\n') {
            Some(i) => from + i,
            None => self.bytes.len(),
        }
    }

    fn push_token(&mut self, kind: TokenKind, start: usize, end: usize) {
        let text = &self.src[start..end];
        let kind = match kind {
            TokenKind::Identifier if text == "assembly" => TokenKind::AssemblyKeyword,
            TokenKind::Identifier | TokenKind::Keyword if self.asm.inside() && is_yul_word(text) => {
                TokenKind::AssemblyKeyword
            }
            TokenKind::Identifier if is_keyword(text) => TokenKind::Keyword,
            other => other,
        };
        self.asm.observe(kind, text);
        self.lexemes.push(Lexeme::Token(kind, start, end));
    }

    fn run(mut self) -> Self {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let b = self.bytes[start];
            match b {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'/' if self.peek(1) == Some(b'/') => {
                    let end = self.line_end(start);
                    self.lexemes.push(Lexeme::Comment(start, end));
                    self.pos = end;
                }
                b'/' if self.peek(1) == Some(b'*') => self.block_comment(start),
                b'"' | b'\'' => self.string(start, start),
                b'0'..=b'9' => {
                    let end = self.number_end(start);
                    self.push_token(TokenKind::Number, start, end);
                    self.pos = end;
                }
                b if b.is_ascii_alphabetic() || b == b'_' || b == b'$' => {
                    let mut end = start + 1;
                    while end < self.bytes.len()
                        && (self.bytes[end].is_ascii_alphanumeric()
                            || self.bytes[end] == b'_'
                            || self.bytes[end] == b'$')
                    {
                        end += 1;
                    }
                    let word = &self.src[start..end];
                    let quoted = matches!(self.bytes.get(end), Some(b'"') | Some(b'\''));
                    if quoted && (word == "hex" || word == "unicode") {
                        self.string(start, end);
                    } else {
                        self.push_token(TokenKind::Identifier, start, end);
                        self.pos = end;
                    }
                }
                b'(' | b')' | b'[' | b']' | b'{' | b'}' | b';' | b',' | b'.' => {
                    self.push_token(TokenKind::Punctuation, start, start + 1);
                    self.pos += 1;
                }
                _ => {
                    let rest = &self.src[start..];
                    if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                        self.push_token(TokenKind::Operator, start, start + op.len());
                        self.pos += op.len();
                    } else {
                        let width = rest.chars().next().map_or(1, char::len_utf8);
                        self.push_token(TokenKind::Punctuation, start, start + width);
                        self.pos += width;
                    }
                }
            }
        }
        self
    }

    fn block_comment(&mut self, start: usize) {
        match self.src[start + 2..].find("*/") {
            Some(i) => {
                let end = start + 2 + i + 2;
                self.lexemes.push(Lexeme::Comment(start, end));
                self.pos = end;
            }
            None => {
                self.errors.push((LexErrorKind::UnterminatedComment, start));
                let end = self.line_end(start);
                self.lexemes.push(Lexeme::Comment(start, end));
                self.pos = self.next_line_start(start);
            }
        }
    }

    /// `start` is the token start (a prefix such as `hex` may precede the
    /// quote at `quote`).
    fn string(&mut self, start: usize, quote: usize) {
        let delim = self.bytes[quote];
        let mut i = quote + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\n' => break,
                b'\\' if matches!(self.bytes.get(i + 1), Some(c) if *c != b'\n') => {
                    let width = self.src[i + 1..].chars().next().map_or(1, char::len_utf8);
                    i += 1 + width;
                }
                c if c == delim => {
                    self.push_token(TokenKind::String, start, i + 1);
                    self.pos = i + 1;
                    return;
                }
                _ => i += 1,
            }
        }
        self.errors.push((LexErrorKind::UnterminatedString, start));
        self.pos = self.next_line_start(start);
    }

    fn number_end(&self, start: usize) -> usize {
        let bytes = self.bytes;
        let mut end = start;
        let take = |mut end: usize, pred: &dyn Fn(u8) -> bool| {
            while end < bytes.len() && pred(bytes[end]) {
                end += 1;
            }
            end
        };
        if bytes[start] == b'0' && matches!(bytes.get(start + 1), Some(b'x') | Some(b'X')) {
            return take(start + 2, &|b| b.is_ascii_hexdigit() || b == b'_');
        }
        end = take(end, &|b| b.is_ascii_digit() || b == b'_');
        if bytes.get(end) == Some(&b'.') && bytes.get(end + 1).is_some_and(u8::is_ascii_digit) {
            end = take(end + 1, &|b| b.is_ascii_digit() || b == b'_');
        }
        if matches!(bytes.get(end), Some(b'e') | Some(b'E')) {
            let digits_at = if bytes.get(end + 1) == Some(&b'-') { end + 2 } else { end + 1 };
            if bytes.get(digits_at).is_some_and(u8::is_ascii_digit) {
                end = take(digits_at, &|b| b.is_ascii_digit() || b == b'_');
            }
        }
        end
    }
}

/// Maps byte offsets to 1-based (line, byte column).
pub(crate) struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub(crate) fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.bytes().enumerate().filter(|(_, b)| *b == b'\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    pub(crate) fn line_of(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }

    pub(crate) fn position(&self, offset: usize) -> (u32, u32) {
        let line = self.line_of(offset);
        let col = offset - self.starts[line - 1] + 1;
        (line as u32, col as u32)
    }
}

fn scan(source: &str) -> (Scanner<'_>, LineIndex) {
    (Scanner::new(source).run(), LineIndex::new(source))
}

fn convert_errors(errors: &[(LexErrorKind, usize)], index: &LineIndex) -> Vec<LexError> {
    errors
        .iter()
        .map(|&(kind, offset)| {
            let (line, col) = index.position(offset);
            LexError { kind, line, col }
        })
        .collect()
}

/// Splits `source` into tokens, skipping whitespace and every comment form.
pub fn tokenize(source: &str) -> TokenStream {
    let mut stream = tokenize_unhashed(source);
    stream.source_id = content_hash(source);
    stream
}

/// Same as [`tokenize`] but leaves `source_id` empty. Used on fragments
/// (diff hunks, slices) where the hash is never read.
pub fn tokenize_unhashed(source: &str) -> TokenStream {
    let (scanner, index) = scan(source);
    let tokens = scanner
        .lexemes
        .iter()
        .filter_map(|lx| match *lx {
            Lexeme::Token(kind, start, end) => {
                let (line, col) = index.position(start);
                Some(Token { kind, text: source[start..end].to_string(), line, col, offset: start })
            }
            Lexeme::Comment(..) => None,
        })
        .collect();
    TokenStream { tokens, source_id: String::new(), errors: convert_errors(&scanner.errors, &index) }
}

/// Blanks every comment byte with a space, keeping newlines, so line
/// numbers, columns and byte offsets of the remaining code are unchanged.
pub fn strip_comments(source: &str) -> String {
    strip_comments_checked(source).0
}

pub fn strip_comments_checked(source: &str) -> (String, Vec<LexError>) {
    let (scanner, index) = scan(source);
    let mut out = source.as_bytes().to_vec();
    for lx in &scanner.lexemes {
        if let Lexeme::Comment(start, end) = *lx {
            for b in &mut out[start..end] {
                if *b != b'\n' {
                    *b = b' ';
                }
            }
        }
    }
    // Whole UTF-8 sequences inside comments were blanked, so this cannot fail.
    let text = String::from_utf8(out).expect("comment blanking keeps utf-8 valid");
    (text, convert_errors(&scanner.errors, &index))
}

/// Occurrence count of every token text across `streams`.
pub fn vocabulary<'a, I>(streams: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a TokenStream>,
{
    let mut counts = BTreeMap::new();
    for stream in streams {
        for token in &stream.tokens {
            *counts.entry(token.text.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).tokens.into_iter().map(|t| t.text).collect()
    }

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).tokens.into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn word_tables_are_sorted() {
        assert!(KEYWORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(YUL_WORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_source_gives_empty_stream() {
        let s = tokenize("");
        assert!(s.tokens.is_empty());
        assert!(s.is_clean());
    }

    #[test]
    fn block_comment_is_skipped() {
        assert_eq!(texts("a = b /*x*/ + 1;"), ["a", "=", "b", "+", "1", ";"]);
    }

    #[test]
    fn longest_operator_wins() {
        assert_eq!(
            texts("a >>>= b >= c == d += e -> f => g"),
            ["a", ">>>=", "b", ">=", "c", "==", "d", "+=", "e", "->", "f", "=>", "g"]
        );
    }

    #[test]
    fn numbers_lex_greedily() {
        assert_eq!(texts("0xdead_BEEF 1_000 2.5e-3 1e18 7"), ["0xdead_BEEF", "1_000", "2.5e-3", "1e18", "7"]);
    }

    #[test]
    fn strings_are_single_tokens() {
        let toks = kinds(r#"x = "a // not comment \" q"; y = hex"00ff"; z = 'ü';"#);
        let strings: Vec<_> =
            toks.iter().filter(|(k, _)| *k == TokenKind::String).map(|(_, t)| t.as_str()).collect();
        assert_eq!(strings, [r#""a // not comment \" q""#, r#"hex"00ff""#, "'ü'"]);
    }

    #[test]
    fn natspec_and_line_comments_skipped() {
        let src = "/// @notice hi\n/** @dev x */\nuint x; // tail\n";
        assert_eq!(texts(src), ["uint", "x", ";"]);
    }

    #[test]
    fn unterminated_string_resumes_next_line() {
        let s = tokenize("a = \"oops;\nb;");
        assert_eq!(s.errors, vec![LexError { kind: LexErrorKind::UnterminatedString, line: 1, col: 5 }]);
        let t: Vec<_> = s.texts().collect();
        assert_eq!(t, ["a", "=", "b", ";"]);
    }

    #[test]
    fn unterminated_comment_resumes_next_line() {
        let s = tokenize("a; /* open\nb;");
        assert_eq!(s.errors[0].kind, LexErrorKind::UnterminatedComment);
        assert_eq!((s.errors[0].line, s.errors[0].col), (1, 4));
        let t: Vec<_> = s.texts().collect();
        assert_eq!(t, ["a", ";", "b", ";"]);
    }

    #[test]
    fn assembly_words_tagged_only_inside_blocks() {
        let src = "function add(uint a) { assembly { let x := add(a, 1) sstore(0, x) } add(1); }";
        let toks = tokenize(src).tokens;
        let tagged: Vec<_> =
            toks.iter().filter(|t| t.kind == TokenKind::AssemblyKeyword).map(|t| t.text.as_str()).collect();
        assert_eq!(tagged, ["assembly", "let", "add", "sstore"]);
        assert_eq!(toks[1].kind, TokenKind::Identifier);
        assert_eq!(toks.iter().rev().find(|t| t.is("add")).unwrap().kind, TokenKind::Identifier);
    }

    #[test]
    fn assembly_dialect_and_flags() {
        let src = r#"assembly "evmasm" ("memory-safe") { mstore(0, 1) } mstore"#;
        let toks = tokenize(src).tokens;
        assert_eq!(toks.iter().find(|t| t.is("mstore")).unwrap().kind, TokenKind::AssemblyKeyword);
        assert_eq!(toks.last().unwrap().kind, TokenKind::Identifier);
    }

    #[test]
    fn positions_are_one_based_byte_columns() {
        let s = tokenize("a\n  bc");
        assert_eq!((s.tokens[0].line, s.tokens[0].col), (1, 1));
        assert_eq!((s.tokens[1].line, s.tokens[1].col), (2, 3));
    }

    #[test]
    fn strip_keeps_line_count() {
        let src = "// a\n/* b\n c */\n";
        let stripped = strip_comments(src);
        assert_eq!(stripped.matches('\n').count(), src.matches('\n').count());
        assert!(stripped.trim().is_empty());
        assert_eq!(strip_comments("x; // note"), "x;        ");
    }

    #[test]
    fn strip_blanks_multibyte_comment_bytes() {
        let src = "/* é */ x";
        let stripped = strip_comments(src);
        assert_eq!(stripped.len(), src.len());
        assert_eq!(tokenize(&stripped).tokens, tokenize(src).tokens);
    }

    #[test]
    fn vocabulary_counts() {
        let v = vocabulary([&tokenize("a a b")]);
        assert_eq!(v.get("a"), Some(&2));
        assert_eq!(v.get("b"), Some(&1));
        assert_eq!(tokenize("a a b").vocab_count(), 2);
        let (x, y) = (tokenize("a"), tokenize("b"));
        assert_eq!(vocabulary([&x, &y]).len(), 2);
    }

    #[test]
    fn elementary_types_are_keywords() {
        for w in ["uint", "uint256", "int8", "bytes32", "address", "bool", "string"] {
            assert!(is_keyword(w), "{w}");
        }
        for w in ["uint7", "uint264", "bytes33", "uint08", "owner"] {
            assert!(!is_keyword(w), "{w}");
        }
    }
}
