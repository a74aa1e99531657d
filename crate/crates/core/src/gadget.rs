//! Rectangular gadgets, their text format, and verifiers for crossovers,
//! timed crossovers and logic gates.
//!
//! Times are the 1-based first-firing steps of [`AvalancheTrace`]: a port
//! receiving the stimulating grain fires at step 1, and a gate of delay `T`
//! fires its 1-outputs at step `T`. Abutting gadgets therefore pass a signal
//! across a tile boundary every `T` steps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::catalog::{decode, MooreCode};
use crate::error::{Error, Result};
use crate::firing;
use crate::lattice::{
    self, content_lines, default_step_budget, format_rows, parse_row, AvalancheTrace, Cell,
    Configuration, Neighborhood,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PortRole {
    N,
    S,
    W,
    E,
    In1,
    In2,
    Out,
    Out2,
    /// Grain-addition site of a constant-1 gate; may be interior.
    Src,
}

impl PortRole {
    pub const ALL: [PortRole; 9] = [
        PortRole::N,
        PortRole::S,
        PortRole::W,
        PortRole::E,
        PortRole::In1,
        PortRole::In2,
        PortRole::Out,
        PortRole::Out2,
        PortRole::Src,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PortRole::N => "n",
            PortRole::S => "s",
            PortRole::W => "w",
            PortRole::E => "e",
            PortRole::In1 => "in1",
            PortRole::In2 => "in2",
            PortRole::Out => "out",
            PortRole::Out2 => "out2",
            PortRole::Src => "src",
        }
    }
}

impl fmt::Display for PortRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PortRole {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PortRole::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown port role `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    Crossover,
    TimedCrossover,
    And,
    Or,
    Diode,
    Wire,
    Turn,
    Const1,
    Const0,
    Duplicate,
}

impl GadgetKind {
    pub const ALL: [GadgetKind; 10] = [
        GadgetKind::Crossover,
        GadgetKind::TimedCrossover,
        GadgetKind::And,
        GadgetKind::Or,
        GadgetKind::Diode,
        GadgetKind::Wire,
        GadgetKind::Turn,
        GadgetKind::Const1,
        GadgetKind::Const0,
        GadgetKind::Duplicate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GadgetKind::Crossover => "crossover",
            GadgetKind::TimedCrossover => "timed_crossover",
            GadgetKind::And => "and",
            GadgetKind::Or => "or",
            GadgetKind::Diode => "diode",
            GadgetKind::Wire => "wire",
            GadgetKind::Turn => "turn",
            GadgetKind::Const1 => "const1",
            GadgetKind::Const0 => "const0",
            GadgetKind::Duplicate => "duplicate",
        }
    }

    pub fn is_crossover(self) -> bool {
        matches!(self, GadgetKind::Crossover | GadgetKind::TimedCrossover)
    }
}

impl fmt::Display for GadgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GadgetKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        GadgetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown gadget kind `{s}`"))
    }
}

/// Which of the two west-input placements a gate of odd size uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    A,
    B,
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A" => Ok(Label::A),
            "B" => Ok(Label::B),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::A => "A",
            Label::B => "B",
        })
    }
}

/// A stable `width x height` block with declared ports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    pub width: usize,
    pub height: usize,
    pub grid: Configuration,
    pub code: MooreCode,
    pub ports: BTreeMap<PortRole, Cell>,
    pub kind: GadgetKind,
    pub delay: Option<u32>,
    pub label: Option<Label>,
}

impl Gadget {
    /// Validates stability, bounds and port placement.
    pub fn new(
        code: MooreCode,
        width: usize,
        height: usize,
        kind: GadgetKind,
        grid: Configuration,
        ports: BTreeMap<PortRole, Cell>,
    ) -> Result<Self> {
        let g = Gadget { width, height, grid, code, ports, kind, delay: None, label: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_delay(mut self, delay: u32) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let max = self.theta() - 1;
        for (cell, grains) in self.grid.iter() {
            if !self.contains(cell) {
                return Err(Error::Port {
                    role: "grid".into(),
                    cell,
                    msg: "grain outside the gadget rectangle".into(),
                });
            }
            if grains > max {
                return Err(Error::Unstable { cell, grains, max });
            }
        }
        for (&role, &cell) in &self.ports {
            let err = |msg: &str| Error::Port { role: role.to_string(), cell, msg: msg.into() };
            if !self.contains(cell) {
                return Err(err("outside the gadget"));
            }
            if role == PortRole::Src {
                continue;
            }
            if self.is_corner(cell) {
                return Err(err("ports cannot sit in a corner"));
            }
            if self.side_of(cell).is_none() {
                return Err(err("ports must lie on the boundary"));
            }
        }
        Ok(())
    }

    pub fn neighborhood(&self) -> Neighborhood {
        decode(self.code)
    }

    pub fn theta(&self) -> u32 {
        self.code.get().count_ones()
    }

    pub fn port(&self, role: PortRole) -> Result<Cell> {
        self.ports.get(&role).copied().ok_or_else(|| Error::MissingPort(role.to_string()))
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn is_corner(&self, c: Cell) -> bool {
        let (mx, my) = (self.width as i64 - 1, self.height as i64 - 1);
        (c.x == 0 || c.x == mx) && (c.y == 0 || c.y == my)
    }

    pub fn is_boundary(&self, c: Cell) -> bool {
        self.contains(c)
            && (c.x == 0
                || c.y == 0
                || c.x == self.width as i64 - 1
                || c.y == self.height as i64 - 1)
    }

    /// Side index of a non-corner boundary cell: 0 west, 1 north, 2 east,
    /// 3 south.
    pub fn side_of(&self, c: Cell) -> Option<usize> {
        if !self.contains(c) || self.is_corner(c) {
            return None;
        }
        if c.x == 0 {
            Some(0)
        } else if c.y == 0 {
            Some(1)
        } else if c.x == self.width as i64 - 1 {
            Some(2)
        } else if c.y == self.height as i64 - 1 {
            Some(3)
        } else {
            None
        }
    }

    /// All cells of side `i`, corners included.
    pub fn side_cells(&self, i: usize) -> Vec<Cell> {
        let (m, n) = (self.width as i64, self.height as i64);
        match i {
            0 => (0..n).map(|y| Cell::new(0, y)).collect(),
            1 => (0..m).map(|x| Cell::new(x, 0)).collect(),
            2 => (0..n).map(|y| Cell::new(m - 1, y)).collect(),
            3 => (0..m).map(|x| Cell::new(x, n - 1)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn boundary_cells(&self) -> Vec<Cell> {
        let mut v: Vec<Cell> = (0..4).flat_map(|i| self.side_cells(i)).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Add one grain at each of `starts` and stabilize.
    pub fn avalanche(&self, starts: &[Cell]) -> AvalancheTrace {
        let mut c = self.grid.clone();
        for &p in starts {
            c.add(p, 1);
        }
        let n = self.neighborhood();
        let budget = default_step_budget(&c);
        lattice::stabilize(&c, &n, budget).1
    }

    /// The grid translated so the gadget's top-left cell lands on `origin`.
    pub fn placed_at(&self, origin: Cell) -> Configuration {
        self.grid.shifted(origin)
    }
}

/// Parse the gadget text format.
pub fn parse_gadget(text: &str) -> Result<Gadget> {
    let mut code = None;
    let mut size = None;
    let mut kind = None;
    let mut delay = None;
    let mut label = None;
    let mut ports = BTreeMap::new();
    let mut lines = content_lines(text);
    let mut grid_line = None;
    for (ln, line) in lines.by_ref() {
        let perr = |msg: String| Error::Parse { line: ln, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let int = |t: &str| t.parse::<i64>().map_err(|_| perr(format!("bad integer `{t}`")));
        match toks[..] {
            ["neighborhood", c] => code = Some(c.parse::<MooreCode>().map_err(|e| perr(e.to_string()))?),
            ["size", m, n] => {
                let (m, n) = (int(m)?, int(n)?);
                if m < 3 || n < 3 {
                    return Err(perr("gadget sides must be at least 3".into()));
                }
                size = Some((m as usize, n as usize));
            }
            ["kind", k] => kind = Some(k.parse::<GadgetKind>().map_err(perr)?),
            ["delay", t] => {
                let t = int(t)?;
                if t < 1 {
                    return Err(perr("delay must be positive".into()));
                }
                delay = Some(t as u32);
            }
            ["label", l] => label = Some(l.parse::<Label>().map_err(perr)?),
            ["port", r, x, y] => {
                let role = r.parse::<PortRole>().map_err(perr)?;
                if ports.insert(role, Cell::new(int(x)?, int(y)?)).is_some() {
                    return Err(perr(format!("port {role} declared twice")));
                }
            }
            ["grid"] => {
                grid_line = Some(ln);
                break;
            }
            _ => return Err(perr(format!("unrecognized line `{line}`"))),
        }
    }
    let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing `{what}` line") };
    let grid_line = grid_line.ok_or_else(|| missing("grid"))?;
    let code = code.ok_or_else(|| missing("neighborhood"))?;
    let (m, n) = size.ok_or_else(|| missing("size"))?;
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let mut grid = Configuration::new();
    for y in 0..n {
        let (ln, row) = lines.next().ok_or(Error::Parse {
            line: grid_line,
            msg: format!("expected {n} grid rows, found {y}"),
        })?;
        for (x, g) in parse_row(ln, row, m)?.into_iter().enumerate() {
            grid.set(Cell::new(x as i64, y as i64), g);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing content after grid".into() });
    }
    let mut g = Gadget::new(code, m, n, kind, grid, ports)?;
    g.delay = delay;
    g.label = label;
    Ok(g)
}

pub fn format_gadget(g: &Gadget) -> String {
    let mut out = format!(
        "neighborhood {}\nsize {} {}\nkind {}\n",
        g.code, g.width, g.height, g.kind
    );
    if let Some(t) = g.delay {
        out.push_str(&format!("delay {t}\n"));
    }
    if let Some(l) = g.label {
        out.push_str(&format!("label {l}\n"));
    }
    for (role, c) in &g.ports {
        out.push_str(&format!("port {role} {} {}\n", c.x, c.y));
    }
    out.push_str("grid\n");
    out.push_str(&format_rows(&g.grid, Cell::ORIGIN, g.width, g.height));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Constraint {
    C1,
    C2,
    C3,
    C4,
    C5,
    Timing,
    Leakage,
    EndingCell,
    Row(String),
    Diode,
    Stabilization,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Row(r) => write!(f, "row {r}"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub label: String,
    pub trace: AvalancheTrace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub verdict: bool,
    pub violations: Vec<Violation>,
    pub witnesses: Vec<Witness>,
    pub delay: Option<u32>,
}

impl VerificationReport {
    fn from_parts(violations: Vec<Violation>, witnesses: Vec<Witness>, delay: Option<u32>) -> Self {
        VerificationReport { verdict: violations.is_empty(), violations, witnesses, delay }
    }

    pub fn violated(&self, c: &Constraint) -> bool {
        self.violations.iter().any(|v| &v.constraint == c)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "delay": self.delay,
            "violations": self.violations.iter().map(|v| serde_json::json!({
                "constraint": v.constraint.to_string(),
                "detail": v.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

fn violation(constraint: Constraint, detail: impl Into<String>) -> Violation {
    Violation { constraint, detail: detail.into() }
}

/// Side indices of `n, s, w, e` plus the C1-C3 violations.
fn check_placement(g: &Gadget) -> Result<([Option<usize>; 4], Vec<Violation>)> {
    let roles = [PortRole::N, PortRole::S, PortRole::W, PortRole::E];
    let mut sides = [None; 4];
    for (i, r) in roles.iter().enumerate() {
        sides[i] = g.side_of(g.port(*r)?);
    }
    let mut v = Vec::new();
    let opposite = |a: Option<usize>, b: Option<usize>| matches!((a, b), (Some(a), Some(b)) if a.abs_diff(b) == 2);
    if !opposite(sides[0], sides[1]) {
        v.push(violation(Constraint::C1, "n and s are not on opposite sides"));
    }
    if !opposite(sides[2], sides[3]) {
        v.push(violation(Constraint::C2, "w and e are not on opposite sides"));
    }
    let mut distinct: Vec<usize> = sides.iter().flatten().copied().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 4 {
        v.push(violation(Constraint::C3, "n, e, s, w are not on four different sides"));
    }
    Ok((sides, v))
}

fn side_union(g: &Gadget, a: Option<usize>, b: Option<usize>) -> Vec<Cell> {
    let mut cells: Vec<Cell> = [a, b].iter().flatten().flat_map(|&i| g.side_cells(i)).collect();
    cells.sort();
    cells.dedup();
    cells
}

fn stabilization_check(trace: &AvalancheTrace, label: &str, out: &mut Vec<Violation>) {
    if !trace.stabilized {
        out.push(violation(Constraint::Stabilization, format!("{label}: step budget exhausted")));
    }
}

/// Untimed crossover: constraints C1-C5 checked by simulating to stability.
pub fn verify_crossover(g: &Gadget) -> Result<VerificationReport> {
    let (sides, mut violations) = check_placement(g)?;
    let (n, s, w, e) = (g.port(PortRole::N)?, g.port(PortRole::S)?, g.port(PortRole::W)?, g.port(PortRole::E)?);
    let mut witnesses = Vec::new();
    for (start, end, perp, c, label) in [
        (n, s, side_union(g, sides[2], sides[3]), Constraint::C4, "n"),
        (w, e, side_union(g, sides[0], sides[1]), Constraint::C5, "w"),
    ] {
        let trace = g.avalanche(&[start]);
        stabilization_check(&trace, label, &mut violations);
        if trace.timestamp(end).is_none() {
            violations.push(violation(c.clone(), format!("grain at {label} never topples {end}")));
        }
        for p in perp {
            if let Some(t) = trace.timestamp(p) {
                violations.push(violation(c.clone(), format!("grain at {label} topples side cell {p} at {t}")));
            }
        }
        witnesses.push(Witness { label: label.to_string(), trace });
    }
    Ok(VerificationReport::from_parts(violations, witnesses, None))
}

/// Timed crossover of the declared delay `T`: the opposite port fires at
/// step `T`, perpendicular sides fire no earlier than `T + 1`, and each
/// ending cell belongs to its own timed firing graph only.
pub fn verify_timed_crossover(g: &Gadget) -> Result<VerificationReport> {
    let t = g.delay.ok_or_else(|| Error::MissingPort("delay".into()))?;
    verify_timed_crossover_at(g, t)
}

pub fn verify_timed_crossover_at(g: &Gadget, t: u32) -> Result<VerificationReport> {
    let (sides, mut violations) = check_placement(g)?;
    let (n, s, w, e) = (g.port(PortRole::N)?, g.port(PortRole::S)?, g.port(PortRole::W)?, g.port(PortRole::E)?);
    let ns = g.avalanche(&[n]);
    let we = g.avalanche(&[w]);
    for (trace, end, perp, label) in [
        (&ns, s, side_union(g, sides[2], sides[3]), "n"),
        (&we, e, side_union(g, sides[0], sides[1]), "w"),
    ] {
        stabilization_check(trace, label, &mut violations);
        match trace.timestamp(end) {
            Some(te) if te == t => {}
            other => violations.push(violation(
                Constraint::Timing,
                format!("grain at {label}: {end} first fires at {other:?}, expected {t}"),
            )),
        }
        for p in perp {
            if let Some(tp) = trace.timestamp(p) {
                if tp <= t {
                    violations.push(violation(
                        Constraint::Leakage,
                        format!("grain at {label}: side cell {p} fires at {tp} <= {t}"),
                    ));
                }
            }
        }
    }
    let (kept_ns, kept_we) = firing::kept_sets(&ns, &we);
    if !kept_ns.contains(&s) || kept_we.contains(&s) {
        violations.push(violation(Constraint::EndingCell, format!("{s} is not owned by the n->s timed firing graph")));
    }
    if !kept_we.contains(&e) || kept_ns.contains(&e) {
        violations.push(violation(Constraint::EndingCell, format!("{e} is not owned by the w->e timed firing graph")));
    }
    let witnesses = vec![
        Witness { label: "n".into(), trace: ns },
        Witness { label: "w".into(), trace: we },
    ];
    Ok(VerificationReport::from_parts(violations, witnesses, Some(t)))
}

/// Input roles, output roles and the boolean function of a gate kind.
pub struct TruthTable {
    pub inputs: Vec<PortRole>,
    pub outputs: Vec<PortRole>,
    pub eval: fn(&[bool]) -> Vec<bool>,
}

pub fn truth_table(kind: GadgetKind) -> Result<TruthTable> {
    use PortRole::*;
    let tt = |inputs: Vec<PortRole>, outputs: Vec<PortRole>, eval: fn(&[bool]) -> Vec<bool>| {
        Ok(TruthTable { inputs, outputs, eval })
    };
    match kind {
        GadgetKind::And => tt(vec![In1, In2], vec![Out], |b| vec![b[0] && b[1]]),
        GadgetKind::Or => tt(vec![In1, In2], vec![Out], |b| vec![b[0] || b[1]]),
        GadgetKind::Diode | GadgetKind::Wire | GadgetKind::Turn => tt(vec![In1], vec![Out], |b| vec![b[0]]),
        GadgetKind::Duplicate => tt(vec![In1], vec![Out, Out2], |b| vec![b[0], b[0]]),
        GadgetKind::Const1 => tt(vec![Src], vec![Out], |b| vec![b[0]]),
        GadgetKind::Const0 => tt(vec![], vec![], |_| vec![]),
        k => Err(Error::NoTruthTable(k.to_string())),
    }
}

/// Synchronized-input, exact-delay contract: for each row, one grain on every
/// input carrying 1; outputs carrying 1 fire at exactly `t`; every other
/// boundary cell (0-outputs and idle inputs included) fires at `t + 1` or
/// later, or never. Diodes must also not conduct backwards.
pub fn verify_logic_gate(g: &Gadget, t: u32) -> Result<VerificationReport> {
    let table = truth_table(g.kind)?;
    let inputs: Vec<Cell> = table.inputs.iter().map(|&r| g.port(r)).collect::<Result<_>>()?;
    let outputs: Vec<Cell> = table.outputs.iter().map(|&r| g.port(r)).collect::<Result<_>>()?;
    let boundary = g.boundary_cells();
    let mut violations = Vec::new();
    let mut witnesses = Vec::new();
    for row in 0..(1usize << inputs.len()) {
        let bits: Vec<bool> = (0..inputs.len()).map(|i| row >> (inputs.len() - 1 - i) & 1 == 1).collect();
        let name: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let starts: Vec<Cell> = inputs.iter().zip(&bits).filter(|(_, &b)| b).map(|(&c, _)| c).collect();
        let expected = (table.eval)(&bits);
        let trace = g.avalanche(&starts);
        stabilization_check(&trace, &name, &mut violations);
        let mut allowed = starts.clone();
        for ((&out, &want), role) in outputs.iter().zip(&expected).zip(&table.outputs) {
            let got = trace.timestamp(out);
            if want {
                allowed.push(out);
                if got != Some(t) {
                    violations.push(violation(
                        Constraint::Row(name.clone()),
                        format!("output {role} fires at {got:?}, expected {t}"),
                    ));
                }
            } else if matches!(got, Some(x) if x <= t) {
                violations.push(violation(
                    Constraint::Row(name.clone()),
                    format!("output {role} carries 0 but fires at {got:?}"),
                ));
            }
        }
        for &b in &boundary {
            if allowed.contains(&b) || outputs.contains(&b) {
                continue;
            }
            if let Some(tb) = trace.timestamp(b) {
                if tb <= t {
                    violations.push(violation(
                        Constraint::Leakage,
                        format!("row {name}: boundary cell {b} fires at {tb} <= {t}"),
                    ));
                }
            }
        }
        witnesses.push(Witness { label: name, trace });
    }
    if g.kind == GadgetKind::Diode {
        let trace = g.avalanche(&outputs);
        if let Some(tb) = trace.timestamp(inputs[0]) {
            violations.push(violation(Constraint::Diode, format!("grain at out fires the input at {tb}")));
        }
        witnesses.push(Witness { label: "reverse".into(), trace });
    }
    Ok(VerificationReport::from_parts(violations, witnesses, Some(t)))
}

/// Dispatch on the gadget kind, using the declared delay.
pub fn verify(g: &Gadget) -> Result<VerificationReport> {
    match g.kind {
        GadgetKind::Crossover => verify_crossover(g),
        GadgetKind::TimedCrossover => verify_timed_crossover(g),
        GadgetKind::Const0 => verify_logic_gate(g, g.delay.unwrap_or(1)),
        _ => {
            let t = g.delay.ok_or_else(|| Error::MissingPort("delay".into()))?;
            verify_logic_gate(g, t)
        }
    }
}

/// Axis along which every offset moves a signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParityAxis {
    X,
    Y,
}

impl ParityAxis {
    pub fn of(code: MooreCode) -> Option<ParityAxis> {
        let has = |x, y| code.has(Cell::new(x, y));
        if !has(1, 0) && !has(-1, 0) {
            Some(ParityAxis::Y)
        } else if !has(0, 1) && !has(0, -1) {
            Some(ParityAxis::X)
        } else {
            None
        }
    }

    pub fn coord(self, c: Cell) -> i64 {
        match self {
            ParityAxis::X => c.x,
            ParityAxis::Y => c.y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParityReport {
    pub axis: ParityAxis,
    /// Cells reached from an input by arcs that each advance time by one.
    pub tight_cells: usize,
    /// Tight cells whose time offset matches their axis distance mod 2.
    pub congruent_cells: usize,
    /// `(nominal time + axis coordinate) mod 2` per port; inputs fire at
    /// step 1, outputs at the gate delay.
    pub port_classes: BTreeMap<PortRole, u8>,
    /// Whether the two inputs of a two-input gadget share a parity class.
    pub inputs_share_parity: Option<bool>,
}

impl ParityReport {
    pub fn holds(&self) -> bool {
        self.tight_cells == self.congruent_cells
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParityDiagnostic {
    NotApplicable,
    Report(ParityReport),
}

fn io_roles(g: &Gadget) -> (Vec<PortRole>, Vec<PortRole>) {
    if g.kind.is_crossover() {
        (vec![PortRole::N, PortRole::W], vec![PortRole::S, PortRole::E])
    } else if let Ok(t) = truth_table(g.kind) {
        (t.inputs, t.outputs)
    } else {
        (Vec::new(), Vec::new())
    }
}

pub fn parity_diagnostic(g: &Gadget) -> Result<ParityDiagnostic> {
    let Some(axis) = ParityAxis::of(g.code) else {
        return Ok(ParityDiagnostic::NotApplicable);
    };
    let n = g.neighborhood();
    let (inputs, outputs) = io_roles(g);
    let mut tight_cells = 0;
    let mut congruent_cells = 0;
    for &role in &inputs {
        let start = g.port(role)?;
        let trace = g.avalanche(&[start]);
        let Some(t0) = trace.timestamp(start) else { continue };
        let tight = firing::tight_front(&trace, &n, start);
        for v in tight {
            let tv = trace.timestamp(v).expect("tight cells fired");
            tight_cells += 1;
            let dt = (tv - t0) as i64;
            let da = (axis.coord(v) - axis.coord(start)).abs();
            if (dt - da).rem_euclid(2) == 0 {
                congruent_cells += 1;
            }
        }
    }
    let delay = g.delay.unwrap_or(1) as i64;
    let mut port_classes = BTreeMap::new();
    for &role in &inputs {
        let c = g.port(role)?;
        port_classes.insert(role, (1 + axis.coord(c)).rem_euclid(2) as u8);
    }
    for &role in &outputs {
        let c = g.port(role)?;
        port_classes.insert(role, (delay + axis.coord(c)).rem_euclid(2) as u8);
    }
    let inputs_share_parity = match inputs[..] {
        [a, b] => Some(port_classes[&a] == port_classes[&b]),
        _ => None,
    };
    Ok(ParityDiagnostic::Report(ParityReport {
        axis,
        tight_cells,
        congruent_cells,
        port_classes,
        inputs_share_parity,
    }))
}

/// Two gadgets that combine two synchronized signals disagree on whether
/// those signals must share a parity class.
pub fn parity_mismatch(a: &ParityReport, b: &ParityReport) -> bool {
    matches!((a.inputs_share_parity, b.inputs_share_parity), (Some(x), Some(y)) if x != y)
}
