use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DetectorError, VulnClass};

/// A mitigation strategy. There is no S13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyId(u8);

const TITLES: [(u8, &str); 14] = [
    (1, "Optimizing and Simplifying Bitwise Operations in Inline Assembly"),
    (2, "Adding Checks for Low-Level Calls in Inline Assembly"),
    (3, "Removing Unnecessary Inline Assembly"),
    (4, "Invariant Validations in Upgradable Contracts"),
    (5, "Adding Validation to Ensure Withdrawals"),
    (6, "Adding Checks for Resetting Token Allowances"),
    (7, "Adding Checks for Incorrect Fee Calculations"),
    (8, "Adding Checks for Handling Zero Balances"),
    (9, "Optimizing and Refactoring Interest Rate Calculation"),
    (10, "Ensuring Consistency Between Function Modifiers and State Mutability Specifiers"),
    (11, "Validating Selection of Operations Based on Opcode Values"),
    (12, "Accurate Parameter Handling in Function Invocations"),
    (14, "Minimizing and Validation of External Function Calls"),
    (15, "Removing or Limiting Complex Data Structures"),
];

impl StrategyId {
    pub fn new(n: u8) -> Option<Self> {
        TITLES.iter().any(|&(k, _)| k == n).then_some(Self(n))
    }

    pub fn all() -> impl Iterator<Item = StrategyId> {
        TITLES.iter().map(|&(k, _)| Self(k))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn title(self) -> &'static str {
        TITLES.iter().find(|&&(k, _)| k == self.0).map(|&(_, t)| t).expect("valid id")
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

impl FromStr for StrategyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('S')
            .and_then(|n| n.parse().ok())
            .and_then(StrategyId::new)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

impl Serialize for StrategyId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Class to strategy mapping. Loadable from JSON such as
/// `{"LLC": ["S2", "S14"]}`; classes absent from the map get no suggestions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MitigationCatalog(BTreeMap<VulnClass, Vec<StrategyId>>);

impl Default for MitigationCatalog {
    fn default() -> Self {
        use VulnClass::*;
        let s = |ns: &[u8]| ns.iter().map(|&n| StrategyId(n)).collect::<Vec<_>>();
        Self(BTreeMap::from([
            (RE, s(&[14])),
            (UL, s(&[12])),
            (CLP, s(&[15, 14])),
            (LLC, s(&[2, 14])),
            (LE, s(&[5])),
            (IE, s(&[6, 8])),
            (ControlledDelegatecall, s(&[2, 14])),
            (TimestampDependence, s(&[12])),
            (TxOrigin, s(&[12])),
            (AsmAccessBypass, s(&[3, 2])),
            (AsmStateManipulation, s(&[2, 3])),
            (SlotEnumeration, s(&[1, 3])),
        ]))
    }
}

impl MitigationCatalog {
    pub fn suggest(&self, class: VulnClass) -> &[StrategyId] {
        self.0.get(&class).map_or(&[], Vec::as_slice)
    }
}

/// Default-catalog suggestions for a class name.
pub fn suggest_mitigations(vuln_class: &str) -> Result<Vec<StrategyId>, DetectorError> {
    let class: VulnClass = vuln_class.parse()?;
    Ok(MitigationCatalog::default().suggest(class).to_vec())
}
