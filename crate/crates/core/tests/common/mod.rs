//! Oracles and fixtures shared by the integration tests. Everything here is
//! written independently of the library's simulation code.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use timed_sandpile::gadget::{parse_gadget, Gadget};
use timed_sandpile::lattice::{Cell, Configuration};

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn gadget(name: &str) -> Gadget {
    let path = assets().join(format!("{name}.gadget"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_gadget(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Offsets of a Moore code, decoded from the bit layout by hand.
pub fn moore_offsets(code: u8) -> Vec<(i64, i64)> {
    const BITS: [(u8, (i64, i64)); 8] = [
        (128, (0, -1)),
        (64, (1, 0)),
        (32, (0, 1)),
        (16, (-1, 0)),
        (8, (-1, -1)),
        (4, (1, -1)),
        (2, (1, 1)),
        (1, (-1, 1)),
    ];
    BITS.iter().filter(|(b, _)| code & b != 0).map(|&(_, o)| o).collect()
}

pub type Grid = BTreeMap<(i64, i64), u64>;

pub fn to_grid(c: &Configuration) -> Grid {
    c.iter().map(|(v, g)| ((v.x, v.y), g as u64)).collect()
}

pub fn from_grid(g: &Grid) -> Configuration {
    g.iter().filter(|(_, &n)| n > 0).map(|(&(x, y), &n)| (Cell::new(x, y), n as u32)).collect()
}

/// One synchronous step, straight from the update equation: every cell with
/// at least theta grains loses theta and each out-neighbour of a firing cell
/// gains one.
pub fn naive_step(c: &Grid, offsets: &[(i64, i64)]) -> Grid {
    let theta = offsets.len() as u64;
    let firing: Vec<(i64, i64)> = c.iter().filter(|(_, &n)| n >= theta).map(|(&p, _)| p).collect();
    let mut next = c.clone();
    for &(x, y) in &firing {
        *next.get_mut(&(x, y)).unwrap() -= theta;
        for &(dx, dy) in offsets {
            *next.entry((x + dx, y + dy)).or_insert(0) += 1;
        }
    }
    next.retain(|_, n| *n > 0);
    next
}

/// Topple one unstable cell at a time (the smallest) until stable.
pub fn sequential_stabilize(c: &Grid, offsets: &[(i64, i64)], max_topplings: u64) -> Option<Grid> {
    let theta = offsets.len() as u64;
    let mut g = c.clone();
    for _ in 0..max_topplings {
        let Some((&(x, y), _)) = g.iter().find(|(_, &n)| n >= theta) else {
            g.retain(|_, n| *n > 0);
            return Some(g);
        };
        *g.get_mut(&(x, y)).unwrap() -= theta;
        for &(dx, dy) in offsets {
            *g.entry((x + dx, y + dy)).or_insert(0) += 1;
        }
    }
    None
}

pub fn total(g: &Grid) -> u64 {
    g.values().sum()
}
