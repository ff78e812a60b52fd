#!/usr/bin/env python3
"""Writes the end-to-end fixture under tests/fixtures/e2e/.

contracts/*.sol   post-change sources
diffs/*.diff      unified diffs (old -> new) made with difflib
diffs/manifest.json  diff path -> contract path
run.json          pipeline config

Contracts are assembled from function templates with a seeded RNG.
"""
import difflib
import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "e2e"

TEMPLATES = {
    "re": """    function withdraw{n}(uint amount) public {{
        require(balances[msg.sender] >= amount);
        balances[msg.sender] -= amount;
        msg.sender.transfer(amount);
    }}""",
    "re_send": """    function refund{n}(address payable to) public {{
        uint owed = credit[to];
        credit[to] = 0;
        to.send(owed);
    }}""",
    "llc": """    function forward{n}(address target, bytes memory data) public {{
        (bool ok, ) = target.call(data);
        require(ok);
    }}""",
    "llc_value": """    function pay{n}(address target) public payable {{
        target.call(abi.encodeWithSignature("ping()"));
    }}""",
    "ie": """    function isEmpty{n}() public view returns (bool) {{
        return address(this).balance == 0;
    }}""",
    "ie_owner": """    function check{n}(address who) public view returns (bool) {{
        if (who == owner) {{
            return true;
        }}
        return false;
    }}""",
    "ul": """    function compute{n}(uint a) public pure returns (uint) {{
        uint acc;
        return acc + a;
    }}""",
    "ul_addr": """    function pick{n}() public view returns (address) {{
        address chosen;
        return chosen;
    }}""",
    "clean": """    function add{n}(uint a, uint b) public pure returns (uint) {{
        uint c = a + b;
        require(c >= a);
        return c;
    }}""",
    "clean_store": """    function store{n}(uint v) public {{
        values[msg.sender] = v;
        emit Stored(msg.sender, v);
    }}""",
    "ts": """    function late{n}() public view returns (bool) {{
        return block.timestamp > deadline;
    }}""",
}

HEADER = """pragma solidity ^0.8.0;

contract {name} {{
    mapping(address => uint) balances;
    mapping(address => uint) credit;
    mapping(address => uint) values;
    address owner;
    uint deadline;

    event Stored(address who, uint v);
"""


def contract(rng: random.Random, idx: int) -> str:
    kinds = list(TEMPLATES)
    body = []
    for n in range(rng.randint(4, 7)):
        body.append(TEMPLATES[rng.choice(kinds)].format(n=n))
        body.append("")
    return HEADER.format(name=f"Wallet{idx}") + "\n" + "\n".join(body).rstrip() + "\n}\n"


def old_version(choice: int, new: str) -> tuple[str, str]:
    """An earlier revision of `new` and a short tag describing the edit."""
    if choice == 0:
        return new.replace("pragma solidity ^0.8.0;", "pragma solidity ^0.7.6;"), "pragma"
    if choice == 1:
        return new.replace("    event Stored", "    // events\n    event Stored"), "comment"
    if choice == 2:
        return new.replace("msg.sender.transfer(", "msg.sender.send("), "fix"
    lines = new.split("\n")
    keep = [l for l in lines if "mapping(address => uint) values;" not in l]
    return "\n".join(keep), "storage"


def main() -> None:
    rng = random.Random(99)
    contracts = OUT / "contracts"
    diffs = OUT / "diffs"
    for d in (contracts, diffs):
        d.mkdir(parents=True, exist_ok=True)
        for f in d.iterdir():
            f.unlink()
    manifest = {}
    for i in range(24):
        name = f"wallet{i:02}.sol"
        new = contract(rng, i)
        (contracts / name).write_text(new, encoding="utf-8")
        for k, choice in enumerate(rng.sample(range(4), rng.randint(1, 2))):
            old, tag = old_version(choice, new)
            if old == new:
                continue
            text = "".join(
                difflib.unified_diff(
                    old.splitlines(keepends=True),
                    new.splitlines(keepends=True),
                    fromfile=f"a/{name}",
                    tofile=f"b/{name}",
                    n=3,
                )
            )
            diff_name = f"wallet{i:02}-{k}-{tag}.diff"
            (diffs / diff_name).write_text(text, encoding="utf-8")
            manifest[diff_name] = f"../contracts/{name}"
    (diffs / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    run = {
        "corpus_dir": "contracts",
        "diffs_dir": "diffs/manifest.json",
        "seed": 7,
        "window": 3,
        "ratio": 0.75,
        "output_dir": "out",
        "timestamp": "2024-01-01T00:00:00Z",
    }
    (OUT / "run.json").write_text(json.dumps(run, indent=2) + "\n")


if __name__ == "__main__":
    main()
