//! Monotone circuits with fan-in and fan-out two, their evaluation, and their
//! compilation into sandpile prediction instances by tiling gadgets along
//! anti-diagonals.
//!
//! Layout model: tiles of the toolkit size sit at `(i * width, j * height)`
//! and signals only move east or south, so every tile on anti-diagonal
//! `D = i + j` is entered at the same time. A tile entered from the west and
//! from the north at once holds a crossover or a gate; a tile entered once
//! holds a diode, a turn or a duplicator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{decode, MooreCode};
use crate::error::{Error, Result};
use crate::gadget::{parse_gadget, verify, Gadget, GadgetKind, PortRole};
use crate::lattice::{
    content_lines, default_step_budget, format_block, parse_configurations, AvalancheTrace, Cell,
    Configuration, Neighborhood, Simulation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    And,
    Or,
}

impl Op {
    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            Op::And => a && b,
            Op::Or => a || b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::And => "AND",
            Op::Or => "OR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub name: String,
    pub op: Op,
    pub a: String,
    pub b: String,
}

/// Inputs, gates in topological order, and the output signal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netlist {
    pub inputs: Vec<(String, bool)>,
    pub gates: Vec<Gate>,
    pub output: String,
}

impl Netlist {
    /// Number of consumers of each signal, the output counting as one.
    pub fn fanout(&self) -> HashMap<&str, u32> {
        let mut uses: HashMap<&str, u32> = HashMap::new();
        for (name, _) in &self.inputs {
            uses.insert(name, 0);
        }
        for g in &self.gates {
            uses.entry(&g.name).or_insert(0);
            *uses.entry(&g.a).or_insert(0) += 1;
            *uses.entry(&g.b).or_insert(0) += 1;
        }
        *uses.entry(&self.output).or_insert(0) += 1;
        uses
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, bit) in &self.inputs {
            writeln!(f, "{name}={}", u8::from(*bit))?;
        }
        for g in &self.gates {
            writeln!(f, "{}={} {} {}", g.name, g.op.name(), g.a, g.b)?;
        }
        writeln!(f, "out {}", self.output)
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse the line format `name=0|1`, `name=AND|OR a b`, `out name`, with `#`
/// comments. All problems are collected, each tagged with its line.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut errors = Vec::new();
    let mut inputs = Vec::new();
    let mut gates = Vec::new();
    let mut gate_lines = Vec::new();
    let mut output: Option<(usize, String)> = None;
    let mut defined: HashMap<String, usize> = HashMap::new();
    for (ln, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("out ") {
            let name = rest.trim();
            if !valid_name(name) {
                errors.push(format!("line {ln}: bad output name `{name}`"));
            } else if output.is_some() {
                errors.push(format!("line {ln}: second `out` line"));
            } else {
                output = Some((ln, name.to_string()));
            }
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            errors.push(format!("line {ln}: expected `name=...` or `out name`"));
            continue;
        };
        let name = lhs.trim().to_string();
        if !valid_name(&name) {
            errors.push(format!("line {ln}: bad signal name `{name}`"));
            continue;
        }
        if let Some(prev) = defined.get(&name) {
            errors.push(format!("line {ln}: `{name}` already defined on line {prev}"));
            continue;
        }
        let toks: Vec<&str> = rhs.split_whitespace().collect();
        match toks[..] {
            ["0"] | ["1"] => {
                if !gates.is_empty() {
                    errors.push(format!("line {ln}: input `{name}` after the first gate"));
                }
                inputs.push((name.clone(), toks[0] == "1"));
            }
            [op, a, b] => {
                let op = match op.to_ascii_uppercase().as_str() {
                    "AND" => Op::And,
                    "OR" => Op::Or,
                    _ => {
                        errors.push(format!("line {ln}: unknown gate `{op}` (monotone circuits use AND and OR)"));
                        continue;
                    }
                };
                gates.push(Gate { name: name.clone(), op, a: a.into(), b: b.into() });
                gate_lines.push(ln);
            }
            _ => {
                errors.push(format!("line {ln}: expected `0`, `1` or `AND|OR a b` with exactly two arguments"));
                continue;
            }
        }
        defined.insert(name, ln);
    }
    let Some((out_line, output)) = output else {
        errors.push("line 0: missing `out` line".into());
        return Err(Error::Netlist(errors));
    };
    if !defined.contains_key(&output) {
        errors.push(format!("line {out_line}: output `{output}` is not defined"));
    }
    let position: HashMap<&str, usize> =
        gates.iter().enumerate().map(|(i, g)| (g.name.as_str(), i)).collect();
    for (i, g) in gates.iter().enumerate() {
        for arg in [&g.a, &g.b] {
            if !defined.contains_key(arg) {
                errors.push(format!("line {}: `{arg}` is not defined", gate_lines[i]));
            }
        }
    }
    if let Some(cycle) = find_cycle(&gates, &position) {
        let ln = gate_lines[position[cycle[0].as_str()]];
        errors.push(format!("line {ln}: cycle through {}", cycle.join(" -> ")));
    } else {
        for (i, g) in gates.iter().enumerate() {
            for arg in [&g.a, &g.b] {
                if position.get(arg.as_str()).is_some_and(|&j| j >= i) {
                    errors.push(format!("line {}: `{arg}` is used before its definition", gate_lines[i]));
                }
            }
        }
    }
    let netlist = Netlist { inputs, gates, output };
    let mut over: Vec<(&str, u32)> = netlist.fanout().into_iter().filter(|&(_, n)| n > 2).collect();
    over.sort();
    for (name, n) in over {
        errors.push(format!("line {}: `{name}` has fan-out {n}, at most 2 allowed", defined.get(name).copied().unwrap_or(0)));
    }
    if errors.is_empty() {
        Ok(netlist)
    } else {
        Err(Error::Netlist(errors))
    }
}

fn find_cycle(gates: &[Gate], position: &HashMap<&str, usize>) -> Option<Vec<String>> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; gates.len()];
    fn visit(
        i: usize,
        gates: &[Gate],
        position: &HashMap<&str, usize>,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        state[i] = 1;
        stack.push(i);
        for arg in [&gates[i].a, &gates[i].b] {
            let Some(&j) = position.get(arg.as_str()) else { continue };
            if state[j] == 1 {
                let from = stack.iter().position(|&k| k == j).unwrap();
                let mut names: Vec<String> = stack[from..].iter().map(|&k| gates[k].name.clone()).collect();
                names.push(gates[j].name.clone());
                return Some(names);
            }
            if state[j] == 0 {
                if let Some(c) = visit(j, gates, position, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }
    for i in 0..gates.len() {
        if state[i] == 0 {
            if let Some(c) = visit(i, gates, position, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

/// Value of every input and gate.
pub fn signal_values(c: &Netlist) -> HashMap<&str, bool> {
    let mut val: HashMap<&str, bool> = c.inputs.iter().map(|(n, b)| (n.as_str(), *b)).collect();
    for g in &c.gates {
        let v = g.op.apply(val[g.a.as_str()], val[g.b.as_str()]);
        val.insert(&g.name, v);
    }
    val
}

/// Monotone evaluation in gate order.
pub fn evaluate(c: &Netlist) -> bool {
    signal_values(c)[c.output.as_str()]
}

/// A random netlist with 2 to 5 inputs and 1 to `max_layers` gate layers;
/// the output is the single gate of the last layer.
pub fn random_netlist(seed: u64, max_layers: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.gen_range(2..=5);
    let inputs: Vec<(String, bool)> = (1..=n_inputs).map(|i| (format!("x{i}"), rng.gen_bool(0.5))).collect();
    let mut uses: BTreeMap<String, u32> = inputs.iter().map(|(n, _)| (n.clone(), 0)).collect();
    let mut previous: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();
    let mut gates = Vec::new();
    let layers = rng.gen_range(1..=max_layers.max(1));
    for layer in 0..layers {
        let width = if layer + 1 == layers { 1 } else { rng.gen_range(1..=3) };
        let mut current = Vec::new();
        for _ in 0..width {
            let free = |uses: &BTreeMap<String, u32>| -> Vec<String> {
                uses.iter().filter(|(_, &u)| u < 2).map(|(n, _)| n.clone()).collect()
            };
            let pool = free(&uses);
            if pool.len() < 2 {
                break;
            }
            let recent: Vec<String> = previous.iter().filter(|p| pool.contains(p)).cloned().collect();
            let a = recent.choose(&mut rng).unwrap_or_else(|| pool.choose(&mut rng).unwrap()).clone();
            let others: Vec<&String> = pool.iter().filter(|p| **p != a).collect();
            let b = (*others.choose(&mut rng).unwrap()).clone();
            *uses.get_mut(&a).unwrap() += 1;
            *uses.get_mut(&b).unwrap() += 1;
            let name = format!("g{}", gates.len() + 1);
            let op = if rng.gen_bool(0.5) { Op::And } else { Op::Or };
            gates.push(Gate { name: name.clone(), op, a, b });
            current.push(name);
        }
        if current.is_empty() {
            break;
        }
        for n in &current {
            uses.insert(n.clone(), 0);
        }
        previous = current;
    }
    let output = gates.last().map(|g| g.name.clone()).unwrap_or_else(|| inputs[0].0.clone());
    Netlist { inputs, gates, output }
}

/// Role of a tile in the layout; the name doubles as the asset file suffix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Const1,
    Const0,
    Hdiode,
    Vdiode,
    TurnWs,
    TurnNe,
    DupW,
    DupN,
    Crossover,
    And,
    Or,
}

impl Slot {
    pub const ALL: [Slot; 11] = [
        Slot::Const1,
        Slot::Const0,
        Slot::Hdiode,
        Slot::Vdiode,
        Slot::TurnWs,
        Slot::TurnNe,
        Slot::DupW,
        Slot::DupN,
        Slot::Crossover,
        Slot::And,
        Slot::Or,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Const1 => "const1",
            Slot::Const0 => "const0",
            Slot::Hdiode => "hdiode",
            Slot::Vdiode => "vdiode",
            Slot::TurnWs => "turn-ws",
            Slot::TurnNe => "turn-ne",
            Slot::DupW => "dup-w",
            Slot::DupN => "dup-n",
            Slot::Crossover => "crossover",
            Slot::And => "and",
            Slot::Or => "or",
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Slot::Const1 => "const1",
            Slot::Const0 => "const0",
            Slot::Hdiode => "diode (west to east)",
            Slot::Vdiode => "diode (north to south)",
            Slot::TurnWs => "turn (west to south)",
            Slot::TurnNe => "turn (north to east)",
            Slot::DupW => "duplicate (west to east and south)",
            Slot::DupN => "duplicate (north to east and south)",
            Slot::Crossover => "timed crossover",
            Slot::And => "and",
            Slot::Or => "or",
        }
    }
}

impl std::str::FromStr for Slot {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Slot::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Layout(format!("unknown tile role `{s}`")))
    }
}

const WEST: usize = 0;
const NORTH: usize = 1;
const EAST: usize = 2;
const SOUTH: usize = 3;

/// The layout role a gadget can fill, judged by kind and port sides.
pub fn slot_of(g: &Gadget) -> Option<Slot> {
    let side = |r: PortRole| g.ports.get(&r).and_then(|&c| g.side_of(c));
    let pair = |a: PortRole, b: PortRole| -> Option<BTreeSet<usize>> { Some(BTreeSet::from([side(a)?, side(b)?])) };
    match g.kind {
        GadgetKind::Const1 => (side(PortRole::Out) == Some(EAST)).then_some(Slot::Const1),
        GadgetKind::Const0 => Some(Slot::Const0),
        GadgetKind::Diode | GadgetKind::Wire => match (side(PortRole::In1)?, side(PortRole::Out)?) {
            (WEST, EAST) => Some(Slot::Hdiode),
            (NORTH, SOUTH) => Some(Slot::Vdiode),
            _ => None,
        },
        GadgetKind::Turn => match (side(PortRole::In1)?, side(PortRole::Out)?) {
            (WEST, SOUTH) => Some(Slot::TurnWs),
            (NORTH, EAST) => Some(Slot::TurnNe),
            _ => None,
        },
        GadgetKind::Duplicate => {
            if pair(PortRole::Out, PortRole::Out2)? != BTreeSet::from([EAST, SOUTH]) {
                return None;
            }
            match side(PortRole::In1)? {
                WEST => Some(Slot::DupW),
                NORTH => Some(Slot::DupN),
                _ => None,
            }
        }
        GadgetKind::And | GadgetKind::Or => {
            let ok = pair(PortRole::In1, PortRole::In2)? == BTreeSet::from([WEST, NORTH]) && side(PortRole::Out)? == SOUTH;
            ok.then_some(if g.kind == GadgetKind::And { Slot::And } else { Slot::Or })
        }
        GadgetKind::TimedCrossover => {
            let ok = side(PortRole::N)? == NORTH
                && side(PortRole::S)? == SOUTH
                && side(PortRole::W)? == WEST
                && side(PortRole::E)? == EAST;
            ok.then_some(Slot::Crossover)
        }
        GadgetKind::Crossover => None,
    }
}

/// Ports of a gadget grouped by side, as (side, cell) for entries and exits.
fn entries_exits(g: &Gadget) -> (Vec<(usize, Cell)>, Vec<(usize, Cell)>) {
    let mut entries = Vec::new();
    let mut exits = Vec::new();
    for (&role, &c) in &g.ports {
        let Some(side) = g.side_of(c) else { continue };
        let is_entry = match g.kind {
            GadgetKind::TimedCrossover | GadgetKind::Crossover => matches!(role, PortRole::N | PortRole::W),
            _ => matches!(role, PortRole::In1 | PortRole::In2),
        };
        if is_entry {
            entries.push((side, c));
        } else {
            exits.push((side, c));
        }
    }
    (entries, exits)
}

/// Delay shared by every gadget with a delay other than const1, or `None`
/// when they disagree (or none has one).
pub fn uniform_delay(gadgets: &[Gadget]) -> Option<u32> {
    let delays: BTreeSet<u32> = gadgets
        .iter()
        .filter(|g| !matches!(g.kind, GadgetKind::Const1 | GadgetKind::Const0))
        .filter_map(|g| g.delay)
        .collect();
    (delays.len() == 1).then(|| *delays.first().unwrap())
}

/// A verified gadget set for one neighborhood, one gadget per layout role.
#[derive(Clone, Debug)]
pub struct Toolkit {
    pub code: MooreCode,
    pub width: usize,
    pub height: usize,
    pub delay: u32,
    pub gadgets: BTreeMap<Slot, Gadget>,
    /// Row of every west entry and east exit.
    pub west_row: i64,
    /// Column of every north entry and south exit.
    pub north_col: i64,
}

impl Toolkit {
    /// Build from candidate gadgets of one neighborhood. Every gadget that
    /// fills a role must verify; the first one per role is used.
    pub fn from_gadgets(gadgets: Vec<Gadget>) -> Result<Toolkit> {
        let codes: BTreeSet<u8> = gadgets.iter().map(|g| g.code.get()).collect();
        if codes.len() != 1 {
            return Err(Error::Toolkit(format!("expected gadgets of one neighborhood, found codes {codes:?}")));
        }
        let code = gadgets[0].code;
        let mut chosen: BTreeMap<Slot, Gadget> = BTreeMap::new();
        for g in gadgets {
            let Some(slot) = slot_of(&g) else { continue };
            if chosen.contains_key(&slot) {
                // prefer a diode over a plain wire for the straight roles
                let current = &chosen[&slot];
                if !(current.kind == GadgetKind::Wire && g.kind == GadgetKind::Diode) {
                    continue;
                }
            }
            chosen.insert(slot, g);
        }
        let missing: Vec<&str> = Slot::ALL.iter().filter(|s| !chosen.contains_key(s)).map(|s| s.describe()).collect();
        if !missing.is_empty() {
            return Err(Error::Toolkit(format!("missing gadget: {}", missing.join(", "))));
        }
        for (slot, g) in &chosen {
            let report = verify(g)?;
            if !report.verdict {
                return Err(Error::Toolkit(format!("{} gadget does not verify", slot.name())));
            }
        }
        let sizes: BTreeSet<(usize, usize)> = chosen.values().map(|g| (g.width, g.height)).collect();
        if sizes.len() != 1 {
            return Err(Error::Toolkit(format!("gadget sizes differ: {sizes:?}")));
        }
        let (width, height) = *sizes.first().unwrap();
        let delays: BTreeMap<Slot, u32> = chosen
            .iter()
            .filter(|(s, _)| !matches!(s, Slot::Const1 | Slot::Const0))
            .map(|(&s, g)| (s, g.delay.unwrap_or(0)))
            .collect();
        let distinct: BTreeSet<u32> = delays.values().copied().collect();
        if distinct.len() != 1 {
            let list: Vec<String> = delays.iter().map(|(s, d)| format!("{} {d}", s.name())).collect();
            return Err(Error::Toolkit(format!("mismatched delays: {}", list.join(", "))));
        }
        let delay = *distinct.first().unwrap();
        let mut west_rows = BTreeSet::new();
        let mut north_cols = BTreeSet::new();
        for g in chosen.values() {
            let (entries, exits) = entries_exits(g);
            for (side, c) in entries.into_iter().chain(exits) {
                match side {
                    WEST | EAST => west_rows.insert(c.y),
                    _ => north_cols.insert(c.x),
                };
            }
        }
        if west_rows.len() != 1 || north_cols.len() != 1 {
            return Err(Error::Toolkit(format!(
                "ports do not line up: west/east rows {west_rows:?}, north/south columns {north_cols:?}"
            )));
        }
        let tk = Toolkit {
            code,
            width,
            height,
            delay,
            gadgets: chosen,
            west_row: *west_rows.first().unwrap(),
            north_col: *north_cols.first().unwrap(),
        };
        tk.const1_timing()?;
        Ok(tk)
    }

    /// Load every `*.gadget` file of `dir`. With several neighborhoods
    /// present, `code` selects one.
    pub fn load(dir: &Path, code: Option<MooreCode>) -> Result<Toolkit> {
        let mut by_code: BTreeMap<u8, Vec<Gadget>> = BTreeMap::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::Toolkit(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "gadget"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Toolkit(format!("{}: {e}", path.display())))?;
            let g = parse_gadget(&text).map_err(|e| Error::Toolkit(format!("{}: {e}", path.display())))?;
            by_code.entry(g.code.get()).or_default().push(g);
        }
        let key = match code {
            Some(c) => c.get(),
            None if by_code.len() == 1 => *by_code.keys().next().unwrap(),
            None => {
                let codes: Vec<u8> = by_code.keys().copied().collect();
                return Err(Error::Toolkit(format!("gadgets for several codes {codes:?}; pick one")));
            }
        };
        let gadgets = by_code.remove(&key).ok_or_else(|| Error::Toolkit(format!("no gadgets for code {key}")))?;
        Toolkit::from_gadgets(gadgets)
    }

    pub fn gadget(&self, slot: Slot) -> &Gadget {
        &self.gadgets[&slot]
    }

    /// `(src, z)`: the grain site of const1 and the 0-based step at which
    /// its output first becomes unstable.
    pub fn const1_timing(&self) -> Result<(Cell, u32)> {
        let g = self.gadget(Slot::Const1);
        let src = g.port(PortRole::Src)?;
        let out = g.port(PortRole::Out)?;
        let t = g
            .avalanche(&[src])
            .timestamp(out)
            .ok_or_else(|| Error::Toolkit("const1 output never fires".into()))?;
        Ok((src, t - 1))
    }

    /// Offset of the output within a straight tile entered at step 1.
    pub fn terminal_offset(&self, slot: Slot) -> Result<(Cell, u32)> {
        let g = self.gadget(slot);
        let out = g.port(PortRole::Out)?;
        let t = g
            .avalanche(&[g.port(PortRole::In1)?])
            .timestamp(out)
            .ok_or_else(|| Error::Toolkit(format!("{} output never fires", slot.name())))?;
        Ok((out, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Placement {
    pub i: i64,
    pub j: i64,
    pub slot: Slot,
}

/// Schedule data: a 1-signal leaves a tile on anti-diagonal `D` at 0-based
/// step `z + d * D`; `q` sits in the terminal tile on diagonal `U + 1` and
/// fires `y` steps after that tile is entered, hence `t = z + d * U + y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub placements: Vec<Placement>,
    pub tile_width: usize,
    pub tile_height: usize,
    pub d: u64,
    pub z: u64,
    pub u: u64,
    pub y: u64,
    pub diagonals: u64,
    /// Exit ports of every placed tile that pass a line on, with the value
    /// that line carries.
    pub crossings: Vec<Crossing>,
}

/// A line leaving the tile on anti-diagonal `diagonal` through `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Crossing {
    pub cell: Cell,
    pub diagonal: u64,
    pub value: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledInstance {
    pub code: MooreCode,
    pub configuration: Configuration,
    pub p: Cell,
    pub q: Cell,
    pub t: u64,
    pub layout: Layout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum From {
    W,
    N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Occ {
    Single { line: usize, from: From },
    Double { w: usize, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exit {
    E,
    S,
    /// East keeps the line, south carries the new one.
    Dup(usize),
    Sink,
    Cross,
    Gate(Op, usize),
}

struct LineInfo {
    signal: String,
    /// Consumers this copy still has to reach.
    uses: u32,
}

struct Builder {
    diag: i64,
    front: Vec<(i64, Occ)>,
    placements: BTreeMap<(i64, i64), Slot>,
    lines: Vec<LineInfo>,
    /// `(i, j, side, line)` for every line handed to a neighbouring tile.
    handoffs: Vec<(i64, i64, usize, usize)>,
}

impl Builder {
    fn new_line(&mut self, signal: &str, uses: u32) -> usize {
        self.lines.push(LineInfo { signal: signal.to_string(), uses });
        self.lines.len() - 1
    }

    fn place(&mut self, col: i64, slot: Slot) {
        self.placements.insert((col, self.diag - col), slot);
    }

    fn advance(&mut self, exits: &[Exit]) -> Result<()> {
        assert_eq!(exits.len(), self.front.len(), "one exit per occupied tile");
        let mut next: BTreeMap<i64, (Option<usize>, Option<usize>)> = BTreeMap::new();
        let diag = self.diag;
        let mut handoffs = Vec::new();
        let mut enter = |col: i64, from: From, line: usize| -> Result<()> {
            // entering column `col` from the west means leaving `col - 1` east
            let (i, side) = if from == From::W { (col - 1, EAST) } else { (col, SOUTH) };
            handoffs.push((i, diag - i, side, line));
            let e = next.entry(col).or_default();
            let slot = if from == From::W { &mut e.0 } else { &mut e.1 };
            if slot.replace(line).is_some() {
                return Err(Error::Layout(format!("two signals enter column {col} from the same side")));
            }
            Ok(())
        };
        let front = std::mem::take(&mut self.front);
        for (&(col, occ), &exit) in front.iter().zip(exits) {
            let slot = match (occ, exit) {
                (Occ::Single { line, from: From::W }, Exit::E) => {
                    enter(col + 1, From::W, line)?;
                    Slot::Hdiode
                }
                (Occ::Single { line, from: From::W }, Exit::S) => {
                    enter(col, From::N, line)?;
                    Slot::TurnWs
                }
                (Occ::Single { line, from: From::N }, Exit::E) => {
                    enter(col + 1, From::W, line)?;
                    Slot::TurnNe
                }
                (Occ::Single { line, from: From::N }, Exit::S) => {
                    enter(col, From::N, line)?;
                    Slot::Vdiode
                }
                (Occ::Single { line, from }, Exit::Dup(copy)) => {
                    enter(col + 1, From::W, line)?;
                    enter(col, From::N, copy)?;
                    if from == From::W {
                        Slot::DupW
                    } else {
                        Slot::DupN
                    }
                }
                (Occ::Single { .. }, Exit::Sink) => Slot::Const0,
                (Occ::Double { w, n }, Exit::Cross) => {
                    enter(col + 1, From::W, w)?;
                    enter(col, From::N, n)?;
                    Slot::Crossover
                }
                (Occ::Double { .. }, Exit::Gate(op, out)) => {
                    enter(col, From::N, out)?;
                    if op == Op::And {
                        Slot::And
                    } else {
                        Slot::Or
                    }
                }
                (occ, exit) => return Err(Error::Layout(format!("exit {exit:?} does not fit tile {occ:?}"))),
            };
            self.place(col, slot);
        }
        drop(enter);
        self.handoffs.append(&mut handoffs);
        self.front = next
            .into_iter()
            .map(|(col, pair)| {
                let occ = match pair {
                    (Some(w), Some(n)) => Occ::Double { w, n },
                    (Some(line), None) => Occ::Single { line, from: From::W },
                    (None, Some(line)) => Occ::Single { line, from: From::N },
                    (None, None) => unreachable!("entry map holds only entered columns"),
                };
                (col, occ)
            })
            .collect();
        self.diag += 1;
        Ok(())
    }

    fn line_at(&self, pos: usize) -> usize {
        match self.front[pos].1 {
            Occ::Single { line, .. } => line,
            Occ::Double { .. } => unreachable!("macros start from single-occupancy fronts"),
        }
    }

    /// `lo` lines (positions `< k`) take `left`, position `k` takes `mid`,
    /// the rest take `right`.
    fn split(&self, k: usize, left: Exit, mid: Exit, right: Exit) -> Vec<Exit> {
        (0..self.front.len())
            .map(|i| match i.cmp(&k) {
                std::cmp::Ordering::Less => left,
                std::cmp::Ordering::Equal => mid,
                std::cmp::Ordering::Greater => right,
            })
            .collect()
    }

    fn idle(&mut self) -> Result<()> {
        self.advance(&vec![Exit::S; self.front.len()])
    }

    /// Bring positions `k` and `k + 1` into one tile and apply `mid` there.
    fn meet(&mut self, k: usize, mid: Exit) -> Result<()> {
        let first = self.split(k + 1, Exit::E, Exit::S, Exit::S);
        self.advance(&first)?;
        let right = if mid == Exit::Cross { Exit::E } else { Exit::S };
        let second = self.split(k, Exit::S, mid, right);
        self.advance(&second)
    }

    fn swap(&mut self, k: usize) -> Result<()> {
        self.meet(k, Exit::Cross)
    }

    fn dup(&mut self, k: usize) -> Result<()> {
        let line = self.line_at(k);
        let copy = self.new_line(&self.lines[line].signal.clone(), 1);
        self.lines[line].uses = 1;
        let exits = self.split(k, Exit::S, Exit::Dup(copy), Exit::E);
        self.advance(&exits)
    }

    fn drop_line(&mut self, k: usize) -> Result<()> {
        let exits = self.split(k, Exit::E, Exit::Sink, Exit::S);
        self.advance(&exits)
    }

    fn position_of(&self, signal: &str, except: Option<usize>) -> Option<usize> {
        (0..self.front.len()).find(|&i| Some(i) != except && self.lines[self.line_at(i)].signal == signal)
    }
}

/// Tile the netlist with the toolkit's gadgets.
///
/// Inputs hang off a spine that starts at const1 in tile `(0, 0)` and runs
/// east along row 0: a 1-input is split off by a duplicator, a 0-input gets
/// a diode on the spine and an unfed line below. Gates are then applied in
/// order; each needs its two operands in adjacent lines, so the second
/// operand is walked next to the first through crossovers. The output line
/// ends in a straight terminal tile whose exit is `q`.
pub fn compile(c: &Netlist, toolkit: &Toolkit) -> Result<CompiledInstance> {
    let fanout = c.fanout();
    let used: Vec<&(String, bool)> = c.inputs.iter().filter(|(n, _)| fanout[n.as_str()] > 0).collect();
    if used.is_empty() {
        return Err(Error::Layout("no input reaches the output".into()));
    }
    let mut b = Builder { diag: 0, front: Vec::new(), placements: BTreeMap::new(), lines: Vec::new(), handoffs: Vec::new() };
    b.place(0, Slot::Const1);
    b.diag = 1;
    // the spine carries const1's signal until the last 1-input takes it over
    let spine = b.new_line("", 0);
    b.handoffs.push((0, 0, EAST, spine));
    b.front.push((1, Occ::Single { line: spine, from: From::W }));
    for (k, (name, bit)) in used.iter().enumerate() {
        let last = k + 1 == used.len();
        let uses = fanout[name.as_str()];
        let pos = b.front.len() - 1;
        match (bit, last) {
            (true, false) => {
                let line = b.new_line(name, uses);
                let exits = b.split(pos, Exit::S, Exit::Dup(line), Exit::S);
                b.advance(&exits)?;
            }
            (true, true) => {
                b.lines[spine] = LineInfo { signal: name.clone(), uses };
                b.idle()?;
            }
            (false, _) => {
                let col = b.front[pos].0;
                let exits = b.split(pos, Exit::S, Exit::E, Exit::S);
                b.advance(&exits)?;
                let line = b.new_line(name, uses);
                let spine_entry = b.front.pop().expect("spine continues east");
                b.front.push((col, Occ::Single { line, from: From::N }));
                if !last {
                    b.front.push(spine_entry);
                }
            }
        }
    }
    // The first tile of each unfed 0-line is entered from nothing; the
    // last spine tile exits east into empty ground.
    for g in &c.gates {
        for arg in [&g.a, &g.b] {
            let pos = b.position_of(arg, None).ok_or_else(|| Error::Layout(format!("signal `{arg}` has no line")))?;
            if b.lines[b.line_at(pos)].uses > 1 {
                b.dup(pos)?;
            }
        }
        let pa = b.position_of(&g.a, None).unwrap();
        let pb = b.position_of(&g.b, Some(pa)).ok_or_else(|| Error::Layout(format!("`{}` lacks a second line", g.b)))?;
        let (lo, mut hi) = (pa.min(pb), pa.max(pb));
        while hi > lo + 1 {
            b.swap(hi - 1)?;
            hi -= 1;
        }
        let out = b.new_line(&g.name, fanout[g.name.as_str()]);
        b.meet(lo, Exit::Gate(g.op, out))?;
        if fanout[g.name.as_str()] == 0 {
            let pos = b.position_of(&g.name, None).unwrap();
            b.drop_line(pos)?;
        }
    }
    if b.front.len() != 1 {
        return Err(Error::Layout(format!("{} lines left after the last gate", b.front.len())));
    }
    let (col, occ) = b.front[0];
    let Occ::Single { from, .. } = occ else {
        return Err(Error::Layout("output tile is entered twice".into()));
    };
    let terminal = if from == From::W { Slot::Hdiode } else { Slot::Vdiode };
    b.place(col, terminal);
    let (out_port, y) = toolkit.terminal_offset(terminal)?;
    let (src, z) = toolkit.const1_timing()?;
    let u = (b.diag - 1) as u64;
    let d = toolkit.delay as u64;
    let (w, h) = (toolkit.width as i64, toolkit.height as i64);
    let origin = |i: i64, j: i64| Cell::new(i * w, j * h);
    let q_tile = (col, b.diag - col);
    let q = Cell::new(origin(q_tile.0, q_tile.1).x + out_port.x, origin(q_tile.0, q_tile.1).y + out_port.y);
    let mut configuration = Configuration::new();
    let mut placements = Vec::new();
    for (&(i, j), &slot) in &b.placements {
        configuration.merge(&toolkit.gadget(slot).placed_at(origin(i, j)));
        placements.push(Placement { i, j, slot });
    }
    let values = signal_values(c);
    let mut crossings: Vec<Crossing> = b
        .handoffs
        .iter()
        .map(|&(i, j, side, line)| {
            let local = if side == EAST { Cell::new(w - 1, toolkit.west_row) } else { Cell::new(toolkit.north_col, h - 1) };
            let signal = b.lines[line].signal.as_str();
            Crossing {
                cell: Cell::new(origin(i, j).x + local.x, origin(i, j).y + local.y),
                diagonal: (i + j) as u64,
                value: signal.is_empty() || values[signal],
            }
        })
        .collect();
    crossings.sort();
    Ok(CompiledInstance {
        code: toolkit.code,
        configuration,
        p: src,
        q,
        t: z as u64 + d * u + y as u64,
        layout: Layout {
            placements,
            tile_width: toolkit.width,
            tile_height: toolkit.height,
            d,
            z: z as u64,
            u,
            y: y as u64,
            diagonals: b.diag as u64 + 1,
            crossings,
        },
    })
}

impl CompiledInstance {
    pub fn neighborhood(&self) -> Neighborhood {
        decode(self.code)
    }

    /// Cells of `slot` tiles at offset `cell` within the tile.
    fn tile_origin(&self, p: &Placement) -> Cell {
        Cell::new(p.i * self.layout.tile_width as i64, p.j * self.layout.tile_height as i64)
    }

    /// Exit and entry port cells of every placed tile, with the toolkit that
    /// built it: `(global cell, is_exit)`.
    pub fn port_cells(&self, toolkit: &Toolkit) -> Vec<(Cell, bool)> {
        let mut out = Vec::new();
        for p in &self.layout.placements {
            let g = toolkit.gadget(p.slot);
            let o = self.tile_origin(p);
            let (entries, exits) = entries_exits(g);
            for (_, c) in entries {
                out.push((Cell::new(o.x + c.x, o.y + c.y), false));
            }
            for (_, c) in exits {
                out.push((Cell::new(o.x + c.x, o.y + c.y), true));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Input-side boundary cells of diode tiles, entry port excluded.
    pub fn diode_input_sides(&self, toolkit: &Toolkit) -> Vec<Cell> {
        let mut out = Vec::new();
        for p in &self.layout.placements {
            let side = match p.slot {
                Slot::Hdiode => WEST,
                Slot::Vdiode => NORTH,
                _ => continue,
            };
            let g = toolkit.gadget(p.slot);
            let entry = g.ports[&PortRole::In1];
            let o = self.tile_origin(p);
            for c in g.side_cells(side) {
                if c != entry {
                    out.push(Cell::new(o.x + c.x, o.y + c.y));
                }
            }
        }
        out
    }

    /// Crossings off schedule in `trace`: a 1-line must leave its tile at
    /// 0-based step `z + d * D` exactly, a 0-line must not leave by then.
    /// Each entry carries the observed 0-based step.
    pub fn schedule_violations(&self, trace: &AvalancheTrace) -> Vec<(Crossing, Option<u64>)> {
        let l = &self.layout;
        l.crossings
            .iter()
            .filter_map(|&x| {
                let due = l.z + l.d * x.diagonal;
                let seen = trace.timestamp(x.cell).map(|t| t as u64 - 1);
                let ok = if x.value { seen == Some(due) } else { seen.map_or(true, |s| s > due) };
                (!ok).then_some((x, seen))
            })
            .collect()
    }

    /// Avalanche of the whole instance from `p`.
    pub fn avalanche(&self) -> AvalancheTrace {
        let mut c = self.configuration.clone();
        c.add(self.p, 1);
        let budget = default_step_budget(&c);
        crate::lattice::stabilize(&c, &self.neighborhood(), budget).1
    }
}

/// Outcome of the untimed prediction problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pred {
    /// `q` is unstable in `F^step(c + 1_p)`.
    Yes { step: u64 },
    No,
    /// The step budget ran out first.
    Undecided { steps: u64 },
}

fn require_stable(c: &Configuration, n: &Neighborhood) -> Result<()> {
    let theta = n.theta();
    match c.iter().find(|&(_, g)| g >= theta) {
        Some((cell, grains)) => Err(Error::Unstable { cell, grains, max: theta - 1 }),
        None => Ok(()),
    }
}

/// Does `q` ever become unstable after adding a grain at `p`? `budget`
/// defaults to [`default_step_budget`].
pub fn decide_pred(c: &Configuration, p: Cell, q: Cell, n: &Neighborhood, budget: Option<u64>) -> Result<Pred> {
    require_stable(c, n)?;
    let mut start = c.clone();
    start.add(p, 1);
    let budget = budget.unwrap_or_else(|| default_step_budget(&start));
    let theta = n.theta();
    let mut sim = Simulation::new(&start, n);
    loop {
        let step = sim.steps() as u64;
        if sim.height(q) >= theta {
            return Ok(Pred::Yes { step });
        }
        if sim.is_stable() {
            return Ok(Pred::No);
        }
        if step >= budget {
            return Ok(Pred::Undecided { steps: step });
        }
        sim.step();
    }
}

/// Is `q` unstable in `F^t(c + 1_p)`?
pub fn decide_timed_pred(c: &Configuration, p: Cell, q: Cell, t: u64, n: &Neighborhood) -> Result<bool> {
    require_stable(c, n)?;
    let mut start = c.clone();
    start.add(p, 1);
    let mut sim = Simulation::new(&start, n);
    while (sim.steps() as u64) < t && !sim.is_stable() {
        sim.step();
    }
    Ok(sim.height(q) >= n.theta())
}

/// Instance text: header lines, then one configuration block per non-empty
/// tile after a `config` line.
pub fn format_instance(inst: &CompiledInstance) -> String {
    let l = &inst.layout;
    let mut out = format!(
        "neighborhood {}\ntile {} {}\np {} {}\nq {} {}\nt {}\nd {}\nz {}\nU {}\ny {}\ndiagonals {}\n",
        inst.code, l.tile_width, l.tile_height, inst.p.x, inst.p.y, inst.q.x, inst.q.y, inst.t, l.d, l.z, l.u, l.y, l.diagonals
    );
    for p in &l.placements {
        out.push_str(&format!("place {} {} {}\n", p.i, p.j, p.slot.name()));
    }
    for x in &l.crossings {
        out.push_str(&format!("cross {} {} {} {}\n", x.cell.x, x.cell.y, x.diagonal, u8::from(x.value)));
    }
    out.push_str("config\n");
    for p in &l.placements {
        let o = Cell::new(p.i * l.tile_width as i64, p.j * l.tile_height as i64);
        let tile = Configuration::from_iter(
            inst.configuration
                .iter()
                .filter(|(c, _)| c.x >= o.x && c.y >= o.y && c.x < o.x + l.tile_width as i64 && c.y < o.y + l.tile_height as i64),
        );
        if !tile.is_empty() {
            out.push_str(&format_block(&tile, o, l.tile_width, l.tile_height));
        }
    }
    out
}

pub fn parse_instance(text: &str) -> Result<CompiledInstance> {
    let mut fields: HashMap<&str, Vec<i64>> = HashMap::new();
    let mut placements = Vec::new();
    let mut crossings = Vec::new();
    let mut body_start = None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "config" {
            body_start = Some(idx + 1);
            break;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap();
        let rest: Vec<&str> = toks.collect();
        let err = |msg: String| Error::Parse { line: ln, msg };
        if key == "place" {
            let [i, j, slot] = rest[..] else { return Err(err("expected `place i j role`".into())) };
            let num = |s: &str| s.parse::<i64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
            placements.push(Placement { i: num(i)?, j: num(j)?, slot: slot.parse()? });
            continue;
        }
        if key == "cross" {
            let nums: Vec<i64> = rest.iter().filter_map(|s| s.parse().ok()).collect();
            let [x, y, diag, v] = nums[..] else { return Err(err("expected `cross x y diagonal value`".into())) };
            if diag < 0 || !(v == 0 || v == 1) {
                return Err(err("bad crossing".into()));
            }
            crossings.push(Crossing { cell: Cell::new(x, y), diagonal: diag as u64, value: v == 1 });
            continue;
        }
        let nums = rest
            .iter()
            .map(|s| s.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("bad number: {e}")))?;
        let key = match key {
            "neighborhood" | "tile" | "p" | "q" | "t" | "d" | "z" | "U" | "y" | "diagonals" => key,
            other => return Err(err(format!("unknown header `{other}`"))),
        };
        fields.insert(key, nums);
    }
    let get = |k: &str, n: usize| -> Result<Vec<i64>> {
        match fields.get(k) {
            Some(v) if v.len() == n => Ok(v.clone()),
            _ => Err(Error::Parse { line: 0, msg: format!("missing or malformed `{k}` header") }),
        }
    };
    let code = MooreCode::new(get("neighborhood", 1)?[0] as u32)?;
    let tile = get("tile", 2)?;
    let p = get("p", 2)?;
    let q = get("q", 2)?;
    let body_start = body_start.ok_or(Error::Parse { line: 0, msg: "missing `config` line".into() })?;
    let body: String = text.lines().skip(body_start).map(|l| format!("{l}\n")).collect();
    let mut configuration = Configuration::new();
    for block in parse_configurations(&body).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line: line + body_start, msg },
        e => e,
    })? {
        configuration.merge(&block);
    }
    let nonneg = |k: &str| -> Result<u64> { Ok(get(k, 1)?[0].max(0) as u64) };
    Ok(CompiledInstance {
        code,
        configuration,
        p: Cell::new(p[0], p[1]),
        q: Cell::new(q[0], q[1]),
        t: nonneg("t")?,
        layout: Layout {
            placements,
            tile_width: tile[0] as usize,
            tile_height: tile[1] as usize,
            d: nonneg("d")?,
            z: nonneg("z")?,
            u: nonneg("U")?,
            y: nonneg("y")?,
            diagonals: nonneg("diagonals")?,
            crossings,
        },
    })
}
