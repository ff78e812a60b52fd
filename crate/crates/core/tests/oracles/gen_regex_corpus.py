#!/usr/bin/env python3
"""Writes the 30-file regex corpus under tests/fixtures/regex_corpus/.

Files are assembled from a fixed snippet pool with a seeded RNG so the corpus
can be regenerated byte for byte. Run regex_oracle.py afterwards to refresh
the expected spans.
"""
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "regex_corpus"

STATEMENTS = [
    "msg.sender.transfer(amount);",
    "payable(to).send(value);",
    "recipient.TRANSFER (x);",
    "bool ok = payable(owner).Send(1 ether);",
    "resend(x);",
    "_send(x);",
    "token.transferFrom(a, b, c);",
    "(bool ok, ) = target.call{value: v}(\"\");",
    "target.call(abi.encodeWithSignature(\"f()\"));",
    "addr.call (data) ; // trailing .call(x) note",
    "(bool s, bytes memory r) = a.call(\n            payload\n        );",
    "uint x;",
    "int  y ;",
    "bool flag;",
    "address owner2;",
    "bytes memory;",
    "uint256 total;",
    "uint storage s;",
    "mapping(address => uint) balances;",
    "if (a == b) { c = 1; }",
    "require(balance==0);",
    "bool eq = x\n            ==\n            y;",
    "assert(a != b && c >= d);",
    "target.delegatecall(data);",
    "delegatecallX(data);",
    "uint t = block.timestamp;",
    "uint n = now;",
    "uint h = block.number + 1;",
    "bytes32 bh = block.hash;",
    "bytes32 bh2 = blockhash(1);",
    "uint nowhere = 0;",
    "uint ts = block.timestamps;",
    "require(tx.origin == owner);",
    "address o = tx.originator;",
    "// msg.sender.transfer(x) in a comment",
    "/* uint y; block.timestamp */",
    "/* multi\n           line == comment\n           tx.origin */",
    "string memory s1 = \"a.call(b)\";",
    "string memory s2 = 'now';",
    "string memory u = \"http://x.transfer(1)\";",
    "// don't transfer( here",
    "string memory c = unicode\"café == ünïcode\";",
    "// café ünïcode == comment",
    "uint z = a /* inline == */ + b;",
    "if (x ==\n            // note\n            y) { return; }",
    "emit Sent(to, value);",
    "for (uint i = 0; i < n; i++) { to.transfer(i); }",
]

FUNCTION_NAMES = ["pay", "withdraw", "deposit", "claim", "update", "settle", "check", "sweep"]


def contract(rng: random.Random, idx: int) -> str:
    lines = ["pragma solidity ^0.8.0;", ""]
    lines.append(f"contract Sample{idx} {{")
    if rng.random() < 0.4:
        lines.append("    uint counter;")
    for f in range(rng.randint(2, 5)):
        name = rng.choice(FUNCTION_NAMES) + str(f)
        lines.append(f"    function {name}(address to, uint value) public {{")
        for stmt in rng.sample(STATEMENTS, rng.randint(2, 5)):
            lines.append("        " + stmt)
        lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"


LOCKED = """pragma solidity ^0.4.24;

contract Vault {
    uint deposits;
    function () public payable {
        deposits += 1;
    }\v
}
"""

LOCKED_MISS = """pragma solidity ^0.4.24;

contract Holder {
    // vertical tab below sits outside any payable fallback\v
    function () public payable{
        revert();
    }
    uint x;
}
"""


def main() -> None:
    rng = random.Random(2024)
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.sol"):
        old.unlink()
    for i in range(28):
        (OUT / f"c{i:02}.sol").write_bytes(contract(rng, i).encode("utf-8"))
    (OUT / "c28.sol").write_bytes(LOCKED.encode("utf-8"))
    (OUT / "c29.sol").write_bytes(LOCKED_MISS.encode("utf-8"))


if __name__ == "__main__":
    main()
