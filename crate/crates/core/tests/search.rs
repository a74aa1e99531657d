mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use timed_sandpile::catalog::MooreCode;
use timed_sandpile::gadget::{self, Gadget, GadgetKind, PortRole};
use timed_sandpile::lattice::{Cell, Configuration};
use timed_sandpile::search::{evaluate_grid, prunes, search, SearchSpec};
use timed_sandpile::Exec;

fn code(c: u32) -> MooreCode {
    MooreCode::new(c).unwrap()
}

type Key = (Vec<(Cell, u32)>, Vec<(PortRole, Cell)>);

fn key(g: &Gadget) -> Key {
    (g.grid.sorted(), g.ports.iter().map(|(&r, &c)| (r, c)).collect())
}

/// Mirror in the main diagonal; north and west swap roles, as do south and
/// east.
fn transpose(g: &Gadget) -> Key {
    let t = |c: Cell| Cell::new(c.y, c.x);
    let mut grid: Vec<(Cell, u32)> = g.grid.iter().map(|(c, n)| (t(c), n)).collect();
    grid.sort();
    let role = |r: PortRole| match r {
        PortRole::N => PortRole::W,
        PortRole::W => PortRole::N,
        PortRole::S => PortRole::E,
        PortRole::E => PortRole::S,
        other => other,
    };
    let mut ports: Vec<(PortRole, Cell)> = g.ports.iter().map(|(&r, &c)| (role(r), t(c))).collect();
    ports.sort();
    (grid, ports)
}

#[test]
fn symmetry_reduction_keeps_one_member_per_orbit() {
    for kind in [GadgetKind::TimedCrossover, GadgetKind::Crossover] {
        let mut spec = SearchSpec::new(code(15), 4, 4, kind);
        let reduced = search(&spec).unwrap();
        spec.symmetry = false;
        let full = search(&spec).unwrap();
        assert!(reduced.exhaustive && full.exhaustive);
        assert!(!reduced.gadgets.is_empty());
        let full_keys: BTreeSet<Key> = full.gadgets.iter().map(key).collect();
        let closed: BTreeSet<Key> = reduced.gadgets.iter().flat_map(|g| [key(g), transpose(g)]).collect();
        assert_eq!(closed, full_keys, "{kind}");
        for g in &full.gadgets {
            assert!(gadget::verify(g).unwrap().verdict);
        }
    }
}

#[test]
fn sequential_and_parallel_search_agree() {
    let mut spec = SearchSpec::new(code(15), 5, 5, GadgetKind::TimedCrossover);
    // fix the middle row to keep the space small
    for x in 0..5 {
        spec.cell_alphabet.insert(Cell::new(x, 2), vec![if x % 2 == 0 { 3 } else { 0 }]);
    }
    spec.exec = Exec::Sequential;
    let seq = search(&spec).unwrap();
    spec.exec = Exec::Parallel;
    let par = search(&spec).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn seeded_search_refinds_the_131_crossover() {
    let seed = common::gadget("131-crossover");
    let mut spec = SearchSpec::new(code(131), 10, 10, GadgetKind::TimedCrossover)
        .with_delay(14, 14)
        .seeded(&seed, &[4]);
    for r in [PortRole::N, PortRole::S, PortRole::W, PortRole::E] {
        spec.ports.insert(r, vec![seed.ports[&r]]);
    }
    let out = search(&spec).unwrap();
    assert!(out.exhaustive);
    assert!(out.gadgets.iter().any(|g| g.grid == seed.grid), "seed grid not re-found");
    for g in &out.gadgets {
        assert!(gadget::verify(g).unwrap().verdict);
    }
}

#[test]
fn planar_and_conjectured_codes_have_no_small_timed_crossover() {
    for c in [240, 35] {
        for size in 3..=4 {
            let spec = SearchSpec::new(code(c), size, size, GadgetKind::TimedCrossover);
            let out = search(&spec).unwrap();
            assert!(out.exhaustive, "code {c} {size}x{size}");
            assert!(out.gadgets.is_empty(), "code {c} {size}x{size}");
        }
    }
}

fn completions(spec: &SearchSpec, prefix: &[u32], cells: usize) -> Vec<Configuration> {
    let free = cells - prefix.len();
    let alpha = &spec.alphabet;
    let count = alpha.len().pow(free as u32);
    (0..count)
        .map(|mut k| {
            let mut vals = prefix.to_vec();
            for _ in 0..free {
                vals.push(alpha[k % alpha.len()]);
                k /= alpha.len();
            }
            let mut c = Configuration::new();
            for (i, v) in vals.into_iter().enumerate() {
                c.set(Cell::new((i % spec.width) as i64, (i / spec.width) as i64), v);
            }
            c
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A pruned prefix has no verifying completion.
    #[test]
    fn pruning_is_sound(
        c in prop::sample::select(vec![15u32, 131, 127, 39]),
        kind in prop::sample::select(vec![GadgetKind::TimedCrossover, GadgetKind::Crossover, GadgetKind::Wire]),
        bits in prop::collection::vec(any::<bool>(), 8),
    ) {
        let spec = SearchSpec::new(code(c), 4, 4, kind);
        let theta = spec.theta();
        let prefix: Vec<u32> = bits.iter().map(|&b| if b { theta - 1 } else { 0 }).collect();
        let mut partial: Vec<Option<u32>> = prefix.iter().map(|&v| Some(v)).collect();
        partial.resize(16, None);
        if prunes(&spec, &partial) {
            for grid in completions(&spec, &prefix, 16) {
                prop_assert!(evaluate_grid(&spec, &grid).is_none());
            }
        }
    }
}

#[test]
fn pruning_fires_on_some_prefixes() {
    let spec = SearchSpec::new(code(15), 4, 4, GadgetKind::TimedCrossover);
    let mut pruned = 0;
    for k in 0..256u32 {
        let mut partial: Vec<Option<u32>> = (0..8).map(|i| Some(if k >> i & 1 == 1 { 3 } else { 0 })).collect();
        partial.resize(16, None);
        pruned += usize::from(prunes(&spec, &partial));
    }
    assert!(pruned > 0);
}
