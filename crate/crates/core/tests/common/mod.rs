#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soley_core::corpus::Contract;
use soley_core::detectors::VulnClass;
use soley_core::slicer::{SliceLabel, SliceRecord};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Relative path -> bytes for every file under `root`.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

const FUNCTIONS: &[&str] = &[
    "    function withdraw{n}(uint amount) public {\n        require(balances[msg.sender] >= amount);\n        balances[msg.sender] -= amount;\n        msg.sender.transfer(amount);\n    }",
    "    function forward{n}(address target, bytes memory data) public {\n        (bool ok, ) = target.call(data);\n        require(ok);\n    }",
    "    function isEmpty{n}() public view returns (bool) {\n        return address(this).balance == 0;\n    }",
    "    function compute{n}(uint a) public pure returns (uint) {\n        uint acc;\n        return acc + a;\n    }",
    "    function add{n}(uint a, uint b) public pure returns (uint) {\n        uint c = a + b;\n        require(c >= a);\n        c = c * 2;\n        c = c / 2;\n        return c;\n    }",
    "    function store{n}(uint v) public {\n        values[msg.sender] = v;\n        total += v;\n        emit Stored(msg.sender, v);\n    }",
    "    function late{n}() public view returns (bool) {\n        return block.timestamp > deadline;\n    }",
    "    function sweep{n}(address target) public {\n        require(tx.origin == owner);\n        target.delegatecall(\"\");\n    }",
];

/// `n` synthetic contracts mixing vulnerable and clean functions.
pub fn slicer_corpus(n: usize, seed: u64) -> Vec<Contract> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut src = format!(
                "pragma solidity ^0.8.0;\n\ncontract Fixture{i} {{\n    mapping(address => uint) balances;\n    mapping(address => uint) values;\n    uint total;\n    uint deadline;\n\n    event Stored(address who, uint v);\n"
            );
            for k in 0..rng.gen_range(3..8) {
                let f = FUNCTIONS.choose(&mut rng).unwrap();
                src.push('\n');
                src.push_str(&f.replace("{n}", &k.to_string()));
                src.push('\n');
            }
            src.push_str("}\n");
            Contract::from_source(format!("fixture{i:02}.sol"), &src)
        })
        .collect()
}

const FILLER: &[&str] = &[
    "uint", "x", "y", "z", "=", "+", "-", ";", "(", ")", "{", "}", "return", "if", "else", "msg", ".",
    "sender", "value", "balance", "owner", "amount", "require", "emit", "event", "mapping", "address",
    "public", "view", "function", "total", "count", "data", "memory", "bytes", "index", "for", "while",
    "true", "false",
];

/// Six-class dataset where each slice carries its class's marker token
/// among random filler. 75% of each class goes to train.
pub fn marker_dataset(n: usize, seed: u64) -> (Vec<SliceRecord>, Vec<SliceRecord>) {
    let markers = ["reentrant", "uninitialized", "loopcall", "lowlevel", "locked", "equality"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    let per_class = n / VulnClass::TRAINED.len();
    for (class, marker) in VulnClass::TRAINED.into_iter().zip(markers) {
        for i in 0..per_class {
            let mut words: Vec<&str> =
                (0..rng.gen_range(15..40)).map(|_| *FILLER.choose(&mut rng).unwrap()).collect();
            for _ in 0..2 {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, marker);
            }
            let code = words.chunks(8).map(|c| c.join(" ")).collect::<Vec<_>>().join("\n");
            let record = SliceRecord {
                slice_id: format!("synthetic-{class}-{i:03}"),
                contract_id: format!("synthetic{i:03}"),
                label: SliceLabel::Vuln(class),
                code,
                line_span: [1, 1],
            };
            if i < per_class * 3 / 4 {
                train.push(record);
            } else {
                eval.push(record);
            }
        }
    }
    (train, eval)
}
