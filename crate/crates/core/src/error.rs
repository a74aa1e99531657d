use thiserror::Error;

use crate::lattice::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("neighborhood code {0} is outside 1..=255")]
    InvalidCode(u32),

    #[error("neighborhood must contain at least one offset")]
    EmptyNeighborhood,

    #[error("offset (0,0) cannot belong to a neighborhood")]
    ZeroOffset,

    #[error("duplicate offset ({0},{1}) in neighborhood")]
    DuplicateOffset(i64, i64),

    #[error("cell {cell} holds {grains} grains, above the stable maximum {max}")]
    Unstable { cell: Cell, grains: u32, max: u32 },

    #[error("port {role} at {cell}: {msg}")]
    Port { role: String, cell: Cell, msg: String },

    #[error("gadget is missing required port {0}")]
    MissingPort(String),

    #[error("gadget kind {0} has no truth table")]
    NoTruthTable(String),

    #[error("planarity patch must be at least 3, got {0}")]
    PatchTooSmall(usize),

    #[error("not a verified timed crossover: {0}")]
    NotTimedCrossover(String),

    #[error("disjointified grid is unstable at {0}")]
    DisjointifyOverflow(Cell),

    #[error("invalid search spec: {0}")]
    SearchSpec(String),

    #[error("toolkit: {0}")]
    Toolkit(String),

    #[error("netlist errors:\n{}", .0.join("\n"))]
    Netlist(Vec<String>),

    #[error("layout: {0}")]
    Layout(String),
}
