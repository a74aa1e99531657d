//! Bounded exhaustive search for crossovers and logic gates.
//!
//! Grids are enumerated depth-first in row-major order over a per-cell
//! alphabet. A partial grid is pruned when its two extreme completions
//! (unknown cells at the alphabet minimum, then at the maximum) already rule
//! out every port placement: adding grains never delays a firing, so the
//! minimum completion bounds side leaks from below and the maximum
//! completion bounds output times from below.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::catalog::{decode, MooreCode};
use crate::error::{Error, Result};
use crate::gadget::{
    truth_table, verify_crossover, verify_logic_gate, verify_timed_crossover_at, Gadget,
    GadgetKind, Label, PortRole,
};
use crate::lattice::{AvalancheTrace, Cell, Configuration, Neighborhood};
use crate::par::{self, Exec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchSpec {
    pub code: MooreCode,
    pub width: usize,
    pub height: usize,
    pub kind: GadgetKind,
    pub delay_min: u32,
    pub delay_max: u32,
    /// Values allowed in every cell without an override.
    pub alphabet: Vec<u32>,
    pub cell_alphabet: BTreeMap<Cell, Vec<u32>>,
    /// Candidate cells per port role.
    pub ports: BTreeMap<PortRole, Vec<Cell>>,
    /// Node limit; `None` searches the whole space.
    pub budget: Option<u64>,
    pub symmetry: bool,
    pub label: Option<Label>,
    pub exec: Exec,
}

impl SearchSpec {
    /// Alphabet `{0, theta - 1}`, every non-corner cell of the matching side
    /// as port candidates, delays `1..=width * height`.
    pub fn new(code: MooreCode, width: usize, height: usize, kind: GadgetKind) -> Self {
        let theta = code.get().count_ones();
        let mut spec = SearchSpec {
            code,
            width,
            height,
            kind,
            delay_min: 1,
            delay_max: (width * height) as u32,
            alphabet: vec![0, theta - 1],
            cell_alphabet: BTreeMap::new(),
            ports: BTreeMap::new(),
            budget: None,
            symmetry: true,
            label: None,
            exec: Exec::default(),
        };
        let side = |i: usize| spec.side_candidates(i);
        let defaults: Vec<(PortRole, Vec<Cell>)> = match kind {
            GadgetKind::Crossover | GadgetKind::TimedCrossover => vec![
                (PortRole::N, side(1)),
                (PortRole::S, side(3)),
                (PortRole::W, side(0)),
                (PortRole::E, side(2)),
            ],
            GadgetKind::And | GadgetKind::Or => {
                vec![(PortRole::In1, side(0)), (PortRole::In2, side(1)), (PortRole::Out, side(3))]
            }
            GadgetKind::Duplicate => {
                vec![(PortRole::In1, side(0)), (PortRole::Out, side(2)), (PortRole::Out2, side(3))]
            }
            GadgetKind::Turn => vec![(PortRole::In1, side(0)), (PortRole::Out, side(3))],
            GadgetKind::Diode | GadgetKind::Wire => vec![(PortRole::In1, side(0)), (PortRole::Out, side(2))],
            GadgetKind::Const1 | GadgetKind::Const0 => Vec::new(),
        };
        spec.ports = defaults.into_iter().collect();
        spec
    }

    /// Non-corner cells of side `i` (0 west, 1 north, 2 east, 3 south).
    pub fn side_candidates(&self, i: usize) -> Vec<Cell> {
        let (m, n) = (self.width as i64, self.height as i64);
        match i {
            0 => (1..n - 1).map(|y| Cell::new(0, y)).collect(),
            1 => (1..m - 1).map(|x| Cell::new(x, 0)).collect(),
            2 => (1..n - 1).map(|y| Cell::new(m - 1, y)).collect(),
            _ => (1..m - 1).map(|x| Cell::new(x, n - 1)).collect(),
        }
    }

    pub fn with_delay(mut self, min: u32, max: u32) -> Self {
        self.delay_min = min;
        self.delay_max = max;
        self
    }

    pub fn with_ports(mut self, role: PortRole, cells: Vec<Cell>) -> Self {
        self.ports.insert(role, cells);
        self
    }

    /// Fix every cell of `seed` outside `free_rows` to its seed value, so the
    /// search only re-derives the free rows.
    pub fn seeded(mut self, seed: &Gadget, free_rows: &[i64]) -> Self {
        for y in 0..self.height as i64 {
            if free_rows.contains(&y) {
                continue;
            }
            for x in 0..self.width as i64 {
                let c = Cell::new(x, y);
                self.cell_alphabet.insert(c, vec![seed.grid.get(c)]);
            }
        }
        self
    }

    pub fn theta(&self) -> u32 {
        self.code.get().count_ones()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SearchSpec(m.into()));
        if self.width < 3 || self.height < 3 {
            return bad("dimensions must be at least 3x3");
        }
        if self.delay_min < 1 || self.delay_min > self.delay_max {
            return bad("delay range must satisfy 1 <= min <= max");
        }
        let theta = self.theta();
        let all = std::iter::once(&self.alphabet).chain(self.cell_alphabet.values());
        for a in all {
            if a.is_empty() {
                return bad("alphabet must not be empty");
            }
            if a.iter().any(|&v| v >= theta) {
                return bad("alphabet values must be below the threshold");
            }
        }
        let probe = Gadget {
            width: self.width,
            height: self.height,
            grid: Configuration::new(),
            code: self.code,
            ports: BTreeMap::new(),
            kind: self.kind,
            delay: None,
            label: None,
        };
        for role in required_roles(self.kind) {
            let Some(cands) = self.ports.get(&role) else {
                return Err(Error::SearchSpec(format!("no candidates for port {role}")));
            };
            if cands.is_empty() {
                return Err(Error::SearchSpec(format!("no candidates for port {role}")));
            }
            for &c in cands {
                let interior_ok = role == PortRole::Src && probe.contains(c);
                if !interior_ok && probe.side_of(c).is_none() {
                    return Err(Error::SearchSpec(format!("candidate {c} for {role} is not a side cell")));
                }
            }
        }
        Ok(())
    }

    fn cell_values(&self, c: Cell) -> Vec<u32> {
        let mut v = self.cell_alphabet.get(&c).cloned().unwrap_or_else(|| self.alphabet.clone());
        v.sort();
        v.dedup();
        v
    }

    fn cells(&self) -> Vec<Cell> {
        let mut v = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                v.push(Cell::new(x, y));
            }
        }
        v
    }
}

fn required_roles(kind: GadgetKind) -> Vec<PortRole> {
    if kind.is_crossover() {
        return vec![PortRole::N, PortRole::S, PortRole::W, PortRole::E];
    }
    match truth_table(kind) {
        Ok(t) => t.inputs.into_iter().chain(t.outputs).collect(),
        Err(_) => Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub gadgets: Vec<Gadget>,
    /// Cell assignments tried.
    pub nodes: u64,
    /// The space was enumerated completely (no budget cut).
    pub exhaustive: bool,
    /// The walk-length precheck ruled the spec out before enumeration.
    pub precheck_pruned: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    code: u8,
    exhaustive: bool,
    found: usize,
    kind: &'a str,
    nodes: u64,
    precheck_pruned: bool,
    size: [usize; 2],
}

impl SearchOutcome {
    pub fn summary_json(&self, spec: &SearchSpec) -> serde_json::Value {
        serde_json::to_value(Summary {
            code: spec.code.get(),
            exhaustive: self.exhaustive,
            found: self.gadgets.len(),
            kind: spec.kind.name(),
            nodes: self.nodes,
            precheck_pruned: self.precheck_pruned,
            size: [spec.width, spec.height],
        })
        .expect("summary serializes")
    }
}

/// Run the search, collecting every gadget found.
pub fn search(spec: &SearchSpec) -> Result<SearchOutcome> {
    search_streaming(spec, &|_| {})
}

/// Run the search, handing each gadget to `sink` as soon as it is found.
/// The returned list is sorted by grid so results do not depend on the
/// execution order.
pub fn search_streaming(spec: &SearchSpec, sink: &(dyn Fn(&Gadget) + Sync)) -> Result<SearchOutcome> {
    spec.validate()?;
    let nbhd = decode(spec.code);
    if !walk_precheck(spec, &nbhd) {
        return Ok(SearchOutcome { gadgets: Vec::new(), nodes: 0, exhaustive: true, precheck_pruned: true });
    }
    let ctx = Ctx::new(spec);
    let units = ctx.first_row_units();
    let sink = Mutex::new(sink);
    let results = par::map(spec.exec, &units, |unit| ctx.run_unit(unit, &sink));
    let mut gadgets: Vec<Gadget> = results.into_iter().flatten().collect();
    gadgets.sort_by_key(|g| (g.grid.sorted(), g.ports.clone()));
    Ok(SearchOutcome {
        gadgets,
        nodes: ctx.nodes.load(Ordering::Relaxed),
        exhaustive: !ctx.exhausted.load(Ordering::Relaxed),
        precheck_pruned: false,
    })
}

/// Cells reachable from `start` by walks of exactly `k` arcs, for
/// `k = 0..=max_len`.
fn walk_layers(n: &Neighborhood, start: Cell, max_len: u32) -> Vec<HashSet<Cell>> {
    let mut layers = vec![HashSet::from([start])];
    for _ in 0..max_len {
        let next: HashSet<Cell> = layers.last().unwrap().iter().flat_map(|&c| n.out_neighbors(c)).collect();
        layers.push(next);
    }
    layers
}

/// Delays `T` in range for which some input reaches some output by a walk of
/// exactly `T - 1` arcs. A cell first firing at step `T` needs an in-neighbor
/// firing at step `T - 1`, so such a walk must exist for any valid gadget.
fn feasible_delays(spec: &SearchSpec, n: &Neighborhood, from: &[Cell], to: &[Cell]) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for &s in from {
        let layers = walk_layers(n, s, spec.delay_max - 1);
        for t in spec.delay_min..=spec.delay_max {
            if to.iter().any(|c| layers[(t - 1) as usize].contains(c)) {
                out.insert(t);
            }
        }
    }
    out
}

/// Walk layers grow quadratically; beyond this delay the precheck is skipped.
const PRECHECK_MAX_DELAY: u32 = 96;

/// `false` when no port placement can meet any delay in range.
pub fn walk_precheck(spec: &SearchSpec, n: &Neighborhood) -> bool {
    if spec.delay_max > PRECHECK_MAX_DELAY {
        return true;
    }
    let cands = |r: PortRole| spec.ports.get(&r).cloned().unwrap_or_default();
    match spec.kind {
        GadgetKind::Crossover => {
            !feasible_delays(&SearchSpec { delay_min: 1, ..spec.clone() }, n, &cands(PortRole::N), &cands(PortRole::S)).is_empty()
                && !feasible_delays(&SearchSpec { delay_min: 1, ..spec.clone() }, n, &cands(PortRole::W), &cands(PortRole::E)).is_empty()
        }
        GadgetKind::TimedCrossover => {
            let ns = feasible_delays(spec, n, &cands(PortRole::N), &cands(PortRole::S));
            let we = feasible_delays(spec, n, &cands(PortRole::W), &cands(PortRole::E));
            ns.intersection(&we).next().is_some()
        }
        kind => {
            let Ok(table) = truth_table(kind) else { return true };
            if table.outputs.is_empty() {
                return true;
            }
            let inputs: Vec<Cell> = table.inputs.iter().flat_map(|&r| cands(r)).collect();
            let mut feasible: Option<BTreeSet<u32>> = None;
            for &o in &table.outputs {
                let f = feasible_delays(spec, n, &inputs, &cands(o));
                feasible = Some(match feasible {
                    None => f,
                    Some(prev) => prev.intersection(&f).copied().collect(),
                });
            }
            feasible.is_some_and(|f| !f.is_empty())
        }
    }
}

/// Transpose symmetry with the port-role relabelling it induces, when the
/// neighborhood, the rectangle and the candidate sets are all invariant.
fn symmetries(spec: &SearchSpec) -> Vec<fn(Cell) -> Cell> {
    let transpose: fn(Cell) -> Cell = |c| Cell::new(c.y, c.x);
    if !spec.symmetry || spec.width != spec.height {
        return Vec::new();
    }
    let n = decode(spec.code);
    if n.offsets().iter().any(|&o| !n.contains(transpose(o))) {
        return Vec::new();
    }
    let swap = |r: PortRole| match (spec.kind, r) {
        (_, PortRole::N) => PortRole::W,
        (_, PortRole::W) => PortRole::N,
        (_, PortRole::S) => PortRole::E,
        (_, PortRole::E) => PortRole::S,
        (GadgetKind::And | GadgetKind::Or, PortRole::In1) => PortRole::In2,
        (GadgetKind::And | GadgetKind::Or, PortRole::In2) => PortRole::In1,
        (_, r) => r,
    };
    for (&role, cands) in &spec.ports {
        let mut mapped: Vec<Cell> = cands.iter().map(|&c| transpose(c)).collect();
        let mut target = spec.ports.get(&swap(role)).cloned().unwrap_or_default();
        mapped.sort();
        target.sort();
        if mapped != target {
            return Vec::new();
        }
    }
    for (&c, vals) in &spec.cell_alphabet {
        let other = spec.cell_values(transpose(c));
        let mut mine = vals.clone();
        mine.sort();
        mine.dedup();
        if mine != other {
            return Vec::new();
        }
    }
    vec![transpose]
}

struct Ctx<'s> {
    spec: &'s SearchSpec,
    cells: Vec<Cell>,
    index: BTreeMap<Cell, usize>,
    values: Vec<Vec<u32>>,
    syms: Vec<fn(Cell) -> Cell>,
    nodes: AtomicU64,
    exhausted: AtomicBool,
}

type Partial = Vec<Option<u32>>;

impl<'s> Ctx<'s> {
    fn new(spec: &'s SearchSpec) -> Self {
        let cells = spec.cells();
        let index = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let values = cells.iter().map(|&c| spec.cell_values(c)).collect();
        Ctx {
            spec,
            cells,
            index,
            values,
            syms: symmetries(spec),
            nodes: AtomicU64::new(0),
            exhausted: AtomicBool::new(false),
        }
    }

    fn first_row_units(&self) -> Vec<Partial> {
        let mut units: Vec<Partial> = vec![vec![None; self.cells.len()]];
        for k in 0..self.spec.width {
            let mut next = Vec::new();
            for u in &units {
                for &v in &self.values[k] {
                    let mut w = u.clone();
                    w[k] = Some(v);
                    next.push(w);
                }
            }
            units = next;
        }
        units
    }

    fn tick(&self) -> bool {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if self.spec.budget.is_some_and(|b| n > b) {
            self.exhausted.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }

    fn run_unit(&self, unit: &Partial, sink: &Mutex<&(dyn Fn(&Gadget) + Sync)>) -> Vec<Gadget> {
        let mut found = Vec::new();
        let mut grid = unit.clone();
        let width = self.spec.width;
        for _ in 0..width {
            if !self.tick() {
                return found;
            }
        }
        if self.prunable(&grid) {
            return found;
        }
        self.dfs(&mut grid, width, &mut found, sink);
        found
    }

    fn dfs(&self, grid: &mut Partial, k: usize, found: &mut Vec<Gadget>, sink: &Mutex<&(dyn Fn(&Gadget) + Sync)>) {
        if self.exhausted.load(Ordering::Relaxed) {
            return;
        }
        if k == self.cells.len() {
            if let Some(g) = self.evaluate(grid) {
                (sink.lock().expect("sink lock"))(&g);
                found.push(g);
            }
            return;
        }
        for &v in &self.values[k] {
            if !self.tick() {
                return;
            }
            grid[k] = Some(v);
            let row_end = (k + 1) % self.spec.width == 0;
            if !(row_end && self.prunable(grid)) {
                self.dfs(grid, k + 1, found, sink);
            }
            grid[k] = None;
        }
    }

    fn completion(&self, grid: &Partial, high: bool) -> Configuration {
        let mut c = Configuration::new();
        for (i, &cell) in self.cells.iter().enumerate() {
            let v = grid[i].unwrap_or_else(|| {
                let vals = &self.values[i];
                if high {
                    *vals.last().unwrap()
                } else {
                    vals[0]
                }
            });
            c.set(cell, v);
        }
        c
    }

    fn gadget(&self, grid: Configuration, ports: BTreeMap<PortRole, Cell>) -> Gadget {
        Gadget {
            width: self.spec.width,
            height: self.spec.height,
            grid,
            code: self.spec.code,
            ports,
            kind: self.spec.kind,
            delay: None,
            label: self.spec.label,
        }
    }

    fn trace(&self, c: &Configuration, starts: &[Cell]) -> AvalancheTrace {
        self.gadget(c.clone(), BTreeMap::new()).avalanche(starts)
    }

    /// Lexicographically larger than one of its symmetric images.
    fn non_canonical(&self, grid: &Partial) -> bool {
        for sym in &self.syms {
            for (i, &c) in self.cells.iter().enumerate() {
                let j = self.index[&sym(c)];
                match (grid[i], grid[j]) {
                    (Some(a), Some(b)) if a < b => break,
                    (Some(a), Some(b)) if a > b => return true,
                    (Some(_), Some(_)) => continue,
                    _ => break,
                }
            }
        }
        false
    }

    fn prunable(&self, grid: &Partial) -> bool {
        if self.non_canonical(grid) {
            return true;
        }
        let lo = self.completion(grid, false);
        let hi = self.completion(grid, true);
        if self.spec.kind.is_crossover() {
            !self.crossover_feasible(&lo, &hi)
        } else {
            !self.gate_feasible(&lo, &hi)
        }
    }

    fn perpendicular(&self, role: PortRole) -> Vec<Cell> {
        let probe = self.gadget(Configuration::new(), BTreeMap::new());
        let sides: [usize; 2] = if role == PortRole::N { [0, 2] } else { [1, 3] };
        sides.iter().flat_map(|&i| probe.side_cells(i)).collect()
    }

    /// Delay intervals still reachable for the signal entering at `start`
    /// role and leaving at `end` role.
    fn signal_intervals(&self, lo: &Configuration, hi: &Configuration, start: PortRole, end: PortRole) -> Vec<(u32, u32)> {
        let timed = self.spec.kind == GadgetKind::TimedCrossover;
        let perp = self.perpendicular(start);
        let mut out = Vec::new();
        for &p in &self.spec.ports[&start] {
            let tlo = self.trace(lo, &[p]);
            let leak = perp.iter().filter_map(|&c| tlo.timestamp(c)).min();
            if !timed && leak.is_some() {
                continue;
            }
            let thi = self.trace(hi, &[p]);
            for &q in &self.spec.ports[&end] {
                let Some(earliest) = thi.timestamp(q) else { continue };
                let (min, max) = if timed {
                    let latest = tlo.timestamp(q).unwrap_or(u32::MAX).min(self.spec.delay_max);
                    let latest = leak.map_or(latest, |l| latest.min(l.saturating_sub(1)));
                    (earliest.max(self.spec.delay_min), latest)
                } else {
                    (earliest, u32::MAX)
                };
                if min <= max {
                    out.push((min, max));
                }
            }
        }
        out
    }

    fn crossover_feasible(&self, lo: &Configuration, hi: &Configuration) -> bool {
        let ns = self.signal_intervals(lo, hi, PortRole::N, PortRole::S);
        let we = self.signal_intervals(lo, hi, PortRole::W, PortRole::E);
        ns.iter().any(|a| we.iter().any(|b| a.0.max(b.0) <= a.1.min(b.1)))
    }

    fn port_combinations(&self) -> Vec<BTreeMap<PortRole, Cell>> {
        let mut combos = vec![BTreeMap::new()];
        for role in required_roles(self.spec.kind) {
            let mut next = Vec::new();
            for combo in &combos {
                for &c in &self.spec.ports[&role] {
                    if combo.values().any(|&d| d == c) {
                        continue;
                    }
                    let mut m = combo.clone();
                    m.insert(role, c);
                    next.push(m);
                }
            }
            combos = next;
        }
        combos
    }

    /// Some port placement keeps a delay interval open across all rows.
    fn gate_feasible(&self, lo: &Configuration, hi: &Configuration) -> bool {
        let Ok(table) = truth_table(self.spec.kind) else { return true };
        let probe = self.gadget(Configuration::new(), BTreeMap::new());
        let boundary = probe.boundary_cells();
        'combo: for ports in self.port_combinations() {
            let (mut min, mut max) = (self.spec.delay_min, self.spec.delay_max);
            let inputs: Vec<Cell> = table.inputs.iter().map(|r| ports[r]).collect();
            let outputs: Vec<Cell> = table.outputs.iter().map(|r| ports[r]).collect();
            for row in 1..(1usize << inputs.len()) {
                let bits: Vec<bool> = (0..inputs.len()).map(|i| row >> (inputs.len() - 1 - i) & 1 == 1).collect();
                let starts: Vec<Cell> = inputs.iter().zip(&bits).filter(|(_, &b)| b).map(|(&c, _)| c).collect();
                let want = (table.eval)(&bits);
                let tlo = self.trace(lo, &starts);
                let thi = self.trace(hi, &starts);
                let mut allowed = starts.clone();
                for (&o, &w) in outputs.iter().zip(&want) {
                    if w {
                        allowed.push(o);
                        let Some(earliest) = thi.timestamp(o) else { continue 'combo };
                        min = min.max(earliest);
                        if let Some(latest) = tlo.timestamp(o) {
                            max = max.min(latest);
                        }
                    }
                }
                for &b in &boundary {
                    if !allowed.contains(&b) {
                        if let Some(t) = tlo.timestamp(b) {
                            max = max.min(t.saturating_sub(1));
                        }
                    }
                }
                if min > max {
                    continue 'combo;
                }
            }
            return true;
        }
        false
    }

    fn evaluate(&self, grid: &Partial) -> Option<Gadget> {
        if self.non_canonical(grid) {
            return None;
        }
        let config = self.completion(grid, false);
        match self.spec.kind {
            GadgetKind::Crossover | GadgetKind::TimedCrossover => self.evaluate_crossover(config),
            _ => self.evaluate_gate(config),
        }
    }

    fn evaluate_crossover(&self, config: Configuration) -> Option<Gadget> {
        let timed = self.spec.kind == GadgetKind::TimedCrossover;
        let legs = |start: PortRole, end: PortRole| -> Vec<(Cell, Cell, u32)> {
            let perp = self.perpendicular(start);
            let mut out = Vec::new();
            for &p in &self.spec.ports[&start] {
                let tr = self.trace(&config, &[p]);
                if !tr.stabilized {
                    continue;
                }
                let leak = perp.iter().filter_map(|&c| tr.timestamp(c)).min();
                for &q in &self.spec.ports[&end] {
                    let Some(t) = tr.timestamp(q) else { continue };
                    let ok = if timed {
                        t >= self.spec.delay_min && t <= self.spec.delay_max && leak.is_none_or(|l| l > t)
                    } else {
                        leak.is_none()
                    };
                    if ok {
                        out.push((p, q, t));
                    }
                }
            }
            out
        };
        let ns = legs(PortRole::N, PortRole::S);
        if ns.is_empty() {
            return None;
        }
        let we = legs(PortRole::W, PortRole::E);
        for &(n, s, t1) in &ns {
            for &(w, e, t2) in &we {
                if timed && t1 != t2 {
                    continue;
                }
                let ports = BTreeMap::from([(PortRole::N, n), (PortRole::S, s), (PortRole::W, w), (PortRole::E, e)]);
                let mut g = self.gadget(config.clone(), ports);
                let report = if timed {
                    g.delay = Some(t1);
                    verify_timed_crossover_at(&g, t1)
                } else {
                    verify_crossover(&g)
                };
                if report.is_ok_and(|r| r.verdict) {
                    return Some(g);
                }
            }
        }
        None
    }

    fn evaluate_gate(&self, config: Configuration) -> Option<Gadget> {
        let table = truth_table(self.spec.kind).ok()?;
        for ports in self.port_combinations() {
            let mut g = self.gadget(config.clone(), ports);
            let inputs: Vec<Cell> = table.inputs.iter().map(|r| g.ports[r]).collect();
            let t = match table.outputs.first() {
                Some(o) => g.avalanche(&inputs).timestamp(g.ports[o])?,
                None => self.spec.delay_min,
            };
            if t < self.spec.delay_min || t > self.spec.delay_max {
                continue;
            }
            if verify_logic_gate(&g, t).is_ok_and(|r| r.verdict) {
                g.delay = Some(t);
                return Some(g);
            }
        }
        None
    }
}

/// Public form of the early-pruning test, for checking its soundness: `true`
/// means no completion of `partial` (row-major, `None` = unassigned) can
/// verify.
pub fn prunes(spec: &SearchSpec, partial: &[Option<u32>]) -> bool {
    let mut s = Ctx::new(spec);
    s.syms.clear();
    s.prunable(&partial.to_vec())
}

/// Evaluate one complete grid the way the search does (without symmetry
/// filtering).
pub fn evaluate_grid(spec: &SearchSpec, grid: &Configuration) -> Option<Gadget> {
    let mut ctx = Ctx::new(spec);
    ctx.syms.clear();
    let partial: Partial = ctx.cells.iter().map(|&c| Some(grid.get(c))).collect();
    ctx.evaluate(&partial)
}

/// Turn gates of label A for the parity-constrained codes: west input in the
/// middle of the west side, output anywhere on the south side.
pub fn search_turn_label_a(code: MooreCode, size: usize, delay: u32) -> Result<SearchOutcome> {
    let mid = (size / 2) as i64;
    let mut spec = SearchSpec::new(code, size, size, GadgetKind::Turn).with_delay(delay, delay);
    spec.label = Some(Label::A);
    spec.ports.insert(PortRole::In1, vec![Cell::new(0, mid)]);
    search(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(c: u32) -> MooreCode {
        MooreCode::new(c).unwrap()
    }

    #[test]
    fn spec_validation() {
        let s = SearchSpec::new(code(240), 2, 4, GadgetKind::TimedCrossover);
        assert!(matches!(s.validate(), Err(Error::SearchSpec(_))));
        let mut s = SearchSpec::new(code(240), 4, 4, GadgetKind::TimedCrossover);
        s.alphabet = vec![];
        assert!(s.validate().is_err());
        let s = SearchSpec::new(code(240), 4, 4, GadgetKind::TimedCrossover).with_delay(0, 3);
        assert!(s.validate().is_err());
        let s = SearchSpec::new(code(240), 4, 4, GadgetKind::TimedCrossover)
            .with_ports(PortRole::N, vec![Cell::new(1, 1)]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn wire_search_finds_straight_wire() {
        let mut spec = SearchSpec::new(code(240), 4, 3, GadgetKind::Wire).with_delay(4, 4);
        spec.ports.insert(PortRole::In1, vec![Cell::new(0, 1)]);
        spec.ports.insert(PortRole::Out, vec![Cell::new(3, 1)]);
        let out = search(&spec).unwrap();
        assert!(out.exhaustive);
        assert!(!out.gadgets.is_empty());
        for g in &out.gadgets {
            assert!(crate::gadget::verify(g).unwrap().verdict);
        }
    }

    #[test]
    fn budget_cut_is_not_exhaustive() {
        let mut spec = SearchSpec::new(code(240), 4, 4, GadgetKind::TimedCrossover);
        spec.budget = Some(10);
        let out = search(&spec).unwrap();
        assert!(!out.exhaustive);
    }

    #[test]
    fn parity_precheck_rules_out_label_a_turn() {
        let out = search_turn_label_a(code(39), 11, 11).unwrap();
        assert!(out.precheck_pruned);
        assert!(out.exhaustive);
        assert!(out.gadgets.is_empty());
    }
}
