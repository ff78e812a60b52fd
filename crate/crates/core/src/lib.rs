//! Corpus curation, vulnerability detection, slicing and evaluation for
//! Solidity smart contracts.

pub mod baseline;
pub mod corpus;
pub mod detectors;
pub mod diff;
pub mod eval;
pub mod hash;
pub mod io;
pub mod lexer;
pub mod pipeline;
pub mod slicer;
