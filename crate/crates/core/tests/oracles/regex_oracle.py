#!/usr/bin/env python3
"""Reference match spans for the bundled rules, computed with CPython's `re`.

Patterns are compiled exactly as written in rules/default.json; CPython 3.10
still accepts the mid-pattern global flag and applies it to the whole pattern.
Spans are byte offsets into the scanned text (comment-blanked for
non-comment-lines rules). Output: tests/fixtures/regex_spans.json.
"""
import json
import pathlib
import re
import sys
import warnings

HERE = pathlib.Path(__file__).resolve().parent
CORE = HERE.parent.parent
CORPUS = HERE.parent / "fixtures" / "regex_corpus"
OUT = HERE.parent / "fixtures" / "regex_spans.json"


def blank_comments(src: str) -> str:
    """Replaces each byte of every comment with a space, keeping newlines.

    Strings are skipped so quotes or slashes inside them do not open comments.
    Strings do not span lines; an unterminated one ends at the newline.
    """
    out = []
    i, n = 0, len(src)

    def blank(text):
        return "".join(c if c == "\n" else " " * len(c.encode("utf-8")) for c in text)

    while i < n:
        c = src[i]
        if src.startswith("//", i):
            j = src.find("\n", i)
            j = n if j < 0 else j
            out.append(blank(src[i:j]))
            i = j
        elif src.startswith("/*", i):
            j = src.find("*/", i + 2)
            if j < 0:
                k = src.find("\n", i)
                k = n if k < 0 else k
                out.append(blank(src[i:k]))
                i = k
            else:
                out.append(blank(src[i : j + 2]))
                i = j + 2
        elif c in "\"'":
            j = i + 1
            while j < n and src[j] != "\n":
                if src[j] == "\\" and j + 1 < n and src[j + 1] != "\n":
                    j += 2
                    continue
                if src[j] == c:
                    j += 1
                    break
                j += 1
            out.append(src[i:j])
            i = j
        else:
            out.append(c)
            i += 1
    return "".join(out)


def byte_offsets(text: str):
    table = [0]
    for ch in text:
        table.append(table[-1] + len(ch.encode("utf-8")))
    return table


def main() -> int:
    rules = json.loads((CORE / "rules" / "default.json").read_text(encoding="utf-8"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        compiled = [(r["id"], r["scope"], re.compile(r["pattern"])) for r in rules]
    result = {}
    for path in sorted(CORPUS.glob("*.sol")):
        src = path.read_bytes().decode("utf-8").replace("\r\n", "\n")
        stripped = blank_comments(src)
        assert len(stripped.encode("utf-8")) == len(src.encode("utf-8"))
        per_rule = {}
        for rule_id, scope, rx in compiled:
            text = src if scope == "whole-file" else stripped
            table = byte_offsets(text)
            per_rule[rule_id] = [
                [table[m.start()], table[m.end()]] for m in rx.finditer(text) if m.end() > m.start()
            ]
        result[path.name] = per_rule
    OUT.write_text(json.dumps(result, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    total = sum(len(v) for f in result.values() for v in f.values())
    print(f"{len(result)} files, {total} spans", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
