mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};

use common::moore_offsets;
use timed_sandpile::catalog::{self, decode, is_planar, MooreCode, NeighborhoodClass, PLANAR_SEEDS};
use timed_sandpile::Exec;

/// Unit vectors reachable in the undirected offset graph inside a box: the
/// offsets generate Z^2 exactly when both are.
fn spans_oracle(code: u8) -> bool {
    let offs = moore_offsets(code);
    let mut seen = HashSet::from([(0i64, 0i64)]);
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    while let Some((x, y)) = queue.pop_front() {
        for &(dx, dy) in &offs {
            for s in [1, -1] {
                let v = (x + s * dx, y + s * dy);
                if v.0.abs() <= 4 && v.1.abs() <= 4 && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
    }
    seen.contains(&(1, 0)) && seen.contains(&(0, 1))
}

fn code_of(offs: &BTreeSet<(i64, i64)>) -> u8 {
    (1..=255u8).find(|&c| moore_offsets(c).into_iter().collect::<BTreeSet<_>>() == *offs).unwrap()
}

/// Orbit under rotations and reflections of the square, computed on
/// offsets directly.
fn orbit_oracle(code: u8) -> BTreeSet<u8> {
    let offs = moore_offsets(code);
    let maps: [fn((i64, i64)) -> (i64, i64); 8] = [
        |(x, y)| (x, y),
        |(x, y)| (-y, x),
        |(x, y)| (-x, -y),
        |(x, y)| (y, -x),
        |(x, y)| (-x, y),
        |(x, y)| (x, -y),
        |(x, y)| (y, x),
        |(x, y)| (-y, -x),
    ];
    maps.iter().map(|m| code_of(&offs.iter().map(|&o| m(o)).collect())).collect()
}

#[test]
fn spanning_matches_oracle() {
    for c in 1..=255u8 {
        let lib = catalog::spans(&decode(MooreCode::new(c as u32).unwrap()));
        assert_eq!(lib, spans_oracle(c), "code {c}");
    }
    assert_eq!((1..=255u8).filter(|&c| !spans_oracle(c)).count(), 21);
}

#[test]
fn orbits_match_oracle_and_give_43_spanning_classes() {
    let mut classes = BTreeSet::new();
    for c in 1..=255u8 {
        let lib: BTreeSet<u8> = catalog::orbit(MooreCode::new(c as u32).unwrap()).into_iter().map(|m| m.get()).collect();
        let want = orbit_oracle(c);
        assert_eq!(lib, want, "code {c}");
        if spans_oracle(c) {
            classes.insert(*want.first().unwrap());
        }
    }
    assert_eq!(classes.len(), 43);
}

#[test]
fn classification_sizes() {
    let seq = catalog::classify_all_with(Exec::Sequential, catalog::DEFAULT_PATCH);
    let par = catalog::classify_all_with(Exec::Parallel, catalog::DEFAULT_PATCH);
    assert_eq!(seq.entries, par.entries);
    assert!(seq.unclassified.is_empty());
    assert!(seq.planar_mismatches.is_empty());
    let counts = seq.counts();
    let want = [
        (NeighborhoodClass::NonSpanning, 21),
        (NeighborhoodClass::PCompleteTimed, 52),
        (NeighborhoodClass::PlanarNoTimedCrossover, 99),
        (NeighborhoodClass::DelayIssue, 34),
        (NeighborhoodClass::ConjecturedNoTimedCrossover, 49),
    ];
    for (class, n) in want {
        assert_eq!(counts.get(&class).copied().unwrap_or(0), n, "{}", class.name());
    }
    assert_eq!(counts.values().sum::<usize>(), 255);
    let class = |c: u32| seq.class_of(MooreCode::new(c).unwrap());
    assert_eq!(class(131), Some(NeighborhoodClass::DelayIssue));
    assert_eq!(class(135), Some(NeighborhoodClass::PCompleteTimed));
    assert_eq!(class(240), Some(NeighborhoodClass::PlanarNoTimedCrossover));
    assert_eq!(class(35), Some(NeighborhoodClass::ConjecturedNoTimedCrossover));
}

#[test]
fn planar_set_is_the_orbit_expansion_of_the_listed_codes() {
    let expanded: BTreeSet<u8> = PLANAR_SEEDS.iter().flat_map(|&s| orbit_oracle(s)).collect();
    assert_eq!(expanded.len(), 99);
    for c in (1..=255u8).filter(|&c| spans_oracle(c)) {
        let planar = is_planar(&decode(MooreCode::new(c as u32).unwrap()), 6).unwrap();
        assert_eq!(planar, expanded.contains(&c), "code {c}");
    }
}

#[test]
fn class_table_json_has_sorted_counts() {
    let v = catalog::classify_all().to_json();
    let keys: Vec<&String> = v["counts"].as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(v["total"], 255);
}
