//! Sandpile dynamics on the square lattice with arbitrary neighborhoods from
//! the 3x3 Moore window: simulation, neighborhood classification, gadget
//! verification and search, and compilation of monotone circuits into
//! sandpile configurations.

pub mod catalog;
pub mod circuit;
pub mod error;
pub mod firing;
pub mod gadget;
pub mod lattice;
pub mod par;
pub mod render;
pub mod search;

pub use catalog::MooreCode;
pub use error::{Error, Result};
pub use gadget::{Gadget, GadgetKind, PortRole};
pub use lattice::{AvalancheTrace, Cell, Configuration, Neighborhood};
pub use par::Exec;
