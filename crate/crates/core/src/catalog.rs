//! Subsets of the Moore neighborhood: 8-bit codes, spanning test, dihedral
//! orbits, planarity of the sandpile graph, and the five-way classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rustworkx_core::petgraph::graph::UnGraph;
use rustworkx_core::planar;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Cell, Neighborhood};
use crate::par::{self, Exec};

/// Bit weight of each Moore offset, most significant first:
/// n, e, s, w, nw, ne, se, sw.
pub const BIT_OFFSETS: [(u8, Cell); 8] = [
    (128, Cell::new(0, -1)),
    (64, Cell::new(1, 0)),
    (32, Cell::new(0, 1)),
    (16, Cell::new(-1, 0)),
    (8, Cell::new(-1, -1)),
    (4, Cell::new(1, -1)),
    (2, Cell::new(1, 1)),
    (1, Cell::new(-1, 1)),
];

pub const DEFAULT_PATCH: usize = 6;

/// A non-empty subset of the Moore neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct MooreCode(u8);

impl MooreCode {
    pub const VON_NEUMANN: MooreCode = MooreCode(240);
    pub const MOORE: MooreCode = MooreCode(255);

    pub fn new(code: u32) -> Result<Self> {
        match code {
            1..=255 => Ok(MooreCode(code as u8)),
            _ => Err(Error::InvalidCode(code)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = MooreCode> {
        (1..=255u8).map(MooreCode)
    }

    pub fn has(self, offset: Cell) -> bool {
        BIT_OFFSETS.iter().any(|&(bit, o)| o == offset && self.0 & bit != 0)
    }
}

impl fmt::Display for MooreCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for MooreCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v: u32 = s.trim().parse().map_err(|_| Error::InvalidCode(0))?;
        MooreCode::new(v)
    }
}

pub fn decode(code: MooreCode) -> Neighborhood {
    let offsets = BIT_OFFSETS
        .iter()
        .filter(|(bit, _)| code.0 & bit != 0)
        .map(|&(_, o)| o);
    Neighborhood::new(offsets).expect("non-empty code decodes to a valid neighborhood")
}

/// Code of a neighborhood, when it is a subset of Moore.
pub fn encode(n: &Neighborhood) -> Option<MooreCode> {
    let mut code = 0u8;
    for &o in n.offsets() {
        let (bit, _) = BIT_OFFSETS.iter().find(|(_, b)| *b == o)?;
        code |= bit;
    }
    Some(MooreCode(code))
}

/// Whether the offsets generate `Z^2` as a group.
///
/// The vectors are reduced to a Hermite basis `{(g, a), (0, h)}` by integer
/// column operations; they span iff `g * h = ±1`.
pub fn spans(n: &Neighborhood) -> bool {
    lattice_index(n.offsets()) == Some(1)
}

/// Index of the generated sublattice in `Z^2`, `None` if it has rank < 2.
pub fn lattice_index(vectors: &[Cell]) -> Option<u64> {
    let mut vs: Vec<(i64, i64)> = vectors.iter().map(|c| (c.x, c.y)).collect();
    // Euclid on the x column until at most one vector has x != 0.
    loop {
        vs.retain(|&(x, y)| x != 0 || y != 0);
        let mut nz: Vec<usize> = (0..vs.len()).filter(|&i| vs[i].0 != 0).collect();
        if nz.len() <= 1 {
            break;
        }
        nz.sort_by_key(|&i| vs[i].0.abs());
        let p = nz[0];
        let (px, py) = vs[p];
        for &i in &nz[1..] {
            let q = vs[i].0 / px;
            vs[i] = (vs[i].0 - q * px, vs[i].1 - q * py);
        }
    }
    let g = vs.iter().find(|v| v.0 != 0).map(|v| v.0.unsigned_abs())?;
    let h = vs
        .iter()
        .filter(|v| v.0 == 0)
        .fold(0u64, |acc, v| gcd(acc, v.1.unsigned_abs()));
    if h == 0 {
        None
    } else {
        Some(g * h)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The eight symmetries of the square acting on offsets.
pub const SYMMETRIES: [fn(Cell) -> Cell; 8] = [
    |c| c,
    |c| Cell::new(-c.y, c.x),
    |c| Cell::new(-c.x, -c.y),
    |c| Cell::new(c.y, -c.x),
    |c| Cell::new(-c.x, c.y),
    |c| Cell::new(c.x, -c.y),
    |c| Cell::new(c.y, c.x),
    |c| Cell::new(-c.y, -c.x),
];

pub fn transform(code: MooreCode, sym: fn(Cell) -> Cell) -> MooreCode {
    let moved = BIT_OFFSETS
        .iter()
        .filter(|(bit, _)| code.0 & bit != 0)
        .map(|&(_, o)| sym(o));
    let mut out = 0u8;
    for o in moved {
        let (bit, _) = BIT_OFFSETS.iter().find(|(_, b)| *b == o).expect("symmetry preserves Moore");
        out |= bit;
    }
    MooreCode(out)
}

pub fn orbit(code: MooreCode) -> BTreeSet<MooreCode> {
    SYMMETRIES.iter().map(|&s| transform(code, s)).collect()
}

/// Smallest code of the orbit.
pub fn representative(code: MooreCode) -> MooreCode {
    *orbit(code).iter().next().expect("orbit contains the code itself")
}

/// Undirected sandpile graph of a `patch x patch` block: edges `{p, p+v}` for
/// every offset `v` with both endpoints inside.
pub fn patch_graph(n: &Neighborhood, patch: usize) -> UnGraph<(), ()> {
    let k = patch as i64;
    let idx = |c: Cell| (c.y * k + c.x) as u32;
    let mut edges = BTreeSet::new();
    for y in 0..k {
        for x in 0..k {
            let p = Cell::new(x, y);
            for q in n.out_neighbors(p) {
                if (0..k).contains(&q.x) && (0..k).contains(&q.y) {
                    let (a, b) = (idx(p), idx(q));
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    let mut g = UnGraph::<(), ()>::with_capacity(patch * patch, edges.len());
    for _ in 0..patch * patch {
        g.add_node(());
    }
    g.extend_with_edges(edges);
    g
}

/// Finite-patch planarity certificate. Blocks nest, so the largest patch
/// decides: a non-planar block stays non-planar in every larger one.
pub fn is_planar(n: &Neighborhood, patch: usize) -> Result<bool> {
    if patch < 3 {
        return Err(Error::PatchTooSmall(patch));
    }
    Ok(planar::is_planar(&patch_graph(n, patch)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodClass {
    NonSpanning,
    PCompleteTimed,
    PlanarNoTimedCrossover,
    DelayIssue,
    ConjecturedNoTimedCrossover,
}

impl NeighborhoodClass {
    pub const ALL: [NeighborhoodClass; 5] = [
        NeighborhoodClass::NonSpanning,
        NeighborhoodClass::PCompleteTimed,
        NeighborhoodClass::PlanarNoTimedCrossover,
        NeighborhoodClass::DelayIssue,
        NeighborhoodClass::ConjecturedNoTimedCrossover,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NeighborhoodClass::NonSpanning => "non_spanning",
            NeighborhoodClass::PCompleteTimed => "p_complete_timed",
            NeighborhoodClass::PlanarNoTimedCrossover => "planar_no_timed_crossover",
            NeighborhoodClass::DelayIssue => "delay_issue",
            NeighborhoodClass::ConjecturedNoTimedCrossover => "conjectured_no_timed_crossover",
        }
    }
}

/// Orbit representatives with a complete timed toolkit.
pub const P_COMPLETE_SEEDS: [u8; 9] = [111, 127, 135, 143, 151, 195, 199, 211, 215];
/// Timed crossovers exist but gates cannot be synchronized.
pub const DELAY_ISSUE_SEEDS: [u8; 6] = [39, 67, 83, 87, 95, 131];
/// Conjectured to admit no timed crossover.
pub const CONJECTURED_SEEDS: [u8; 10] = [35, 99, 103, 115, 119, 163, 227, 243, 247, 255];
/// Listed planar neighborhoods.
pub const PLANAR_SEEDS: [u8; 18] = [
    66, 74, 82, 90, 98, 106, 130, 146, 192, 200, 202, 208, 210, 226, 234, 240, 242, 250,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClassEntry {
    pub class: NeighborhoodClass,
    pub representative: MooreCode,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassTable {
    pub entries: BTreeMap<MooreCode, ClassEntry>,
    /// Spanning codes whose orbit matched no seed list.
    pub unclassified: Vec<MooreCode>,
    /// Codes where the planarity test and the planar seed list disagree.
    pub planar_mismatches: Vec<MooreCode>,
}

impl ClassTable {
    pub fn class_of(&self, code: MooreCode) -> Option<NeighborhoodClass> {
        self.entries.get(&code).map(|e| e.class)
    }

    pub fn counts(&self) -> BTreeMap<NeighborhoodClass, usize> {
        let mut counts: BTreeMap<_, _> = NeighborhoodClass::ALL.iter().map(|&c| (c, 0)).collect();
        for e in self.entries.values() {
            *counts.get_mut(&e.class).unwrap() += 1;
        }
        counts
    }

    pub fn codes_in(&self, class: NeighborhoodClass) -> Vec<MooreCode> {
        self.entries
            .iter()
            .filter(|(_, e)| e.class == class)
            .map(|(&c, _)| c)
            .collect()
    }

    /// JSON document with sorted keys: class sizes plus one row per code.
    pub fn to_json(&self) -> serde_json::Value {
        let counts: serde_json::Map<String, serde_json::Value> = self
            .counts()
            .into_iter()
            .map(|(c, n)| (c.name().to_string(), n.into()))
            .collect();
        let codes: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(code, e)| {
                (
                    format!("{:03}", code.get()),
                    serde_json::json!({
                        "class": e.class.name(),
                        "representative": e.representative.get(),
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "counts": counts,
            "total": self.entries.len(),
            "codes": codes,
            "unclassified": self.unclassified,
            "planar_mismatches": self.planar_mismatches,
        })
    }
}

fn seed_class(rep: MooreCode) -> Option<NeighborhoodClass> {
    let hit = |seeds: &[u8]| seeds.iter().any(|&s| representative(MooreCode(s)) == rep);
    if hit(&P_COMPLETE_SEEDS) {
        Some(NeighborhoodClass::PCompleteTimed)
    } else if hit(&DELAY_ISSUE_SEEDS) {
        Some(NeighborhoodClass::DelayIssue)
    } else if hit(&CONJECTURED_SEEDS) {
        Some(NeighborhoodClass::ConjecturedNoTimedCrossover)
    } else {
        None
    }
}

pub fn classify_all() -> ClassTable {
    classify_all_with(Exec::default(), DEFAULT_PATCH)
}

pub fn classify_all_with(exec: Exec, patch: usize) -> ClassTable {
    let codes: Vec<MooreCode> = MooreCode::all().collect();
    let planar_seeds: BTreeSet<MooreCode> = PLANAR_SEEDS
        .iter()
        .flat_map(|&s| orbit(MooreCode(s)))
        .collect();
    let rows = par::map(exec, &codes, |&code| {
        let n = decode(code);
        let rep = representative(code);
        if !spans(&n) {
            return (code, rep, Some(NeighborhoodClass::NonSpanning), false);
        }
        let planar = is_planar(&n, patch).expect("default patch is valid");
        let mismatch = planar != planar_seeds.contains(&code);
        let class = if planar {
            Some(NeighborhoodClass::PlanarNoTimedCrossover)
        } else {
            seed_class(rep)
        };
        (code, rep, class, mismatch)
    });
    let mut table = ClassTable::default();
    for (code, representative, class, mismatch) in rows {
        if mismatch {
            table.planar_mismatches.push(code);
        }
        match class {
            Some(class) => {
                table.entries.insert(code, ClassEntry { class, representative });
            }
            None => table.unclassified.push(code),
        }
    }
    table
}
