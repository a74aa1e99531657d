//! Configurations on the square lattice and the parallel toppling rule.
//!
//! A [`Configuration`] is a finitely supported map from [`Cell`] to grain
//! counts. One application of [`step`] fires, in parallel, every cell holding
//! at least `theta` grains: each firing cell loses `theta` grains and each of
//! its out-neighbors (the cell translated by every offset of the
//! [`Neighborhood`]) gains one. Firing sets are always computed from the
//! frozen configuration before any debit or credit is applied.
//!
//! Traces number steps from 1: a cell already unstable in the input fires
//! during step 1. The configuration reached after `t` steps is `F^t(c)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// A lattice site. `x` grows eastwards, `y` grows southwards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const ORIGIN: Cell = Cell { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Cell { x, y }
    }
}

// Row-major order, so sorted cell lists read like a printed grid.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Cell {
    type Output = Cell;
    fn add(self, rhs: Cell) -> Cell {
        Cell::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Cell {
    type Output = Cell;
    fn sub(self, rhs: Cell) -> Cell {
        Cell::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Cell {
    type Output = Cell;
    fn neg(self) -> Cell {
        Cell::new(-self.x, -self.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// A finite set of non-zero offsets. The firing threshold is its size.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Neighborhood {
    offsets: Vec<Cell>,
}

impl Neighborhood {
    pub fn new(offsets: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut offsets: Vec<Cell> = offsets.into_iter().collect();
        if offsets.is_empty() {
            return Err(Error::EmptyNeighborhood);
        }
        if offsets.contains(&Cell::ORIGIN) {
            return Err(Error::ZeroOffset);
        }
        offsets.sort();
        if let Some(w) = offsets.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateOffset(w[0].x, w[0].y));
        }
        Ok(Neighborhood { offsets })
    }

    pub fn von_neumann() -> Self {
        Self::new([(0, -1), (1, 0), (0, 1), (-1, 0)].map(|(x, y)| Cell::new(x, y))).unwrap()
    }

    pub fn moore() -> Self {
        let offsets = (-1..=1)
            .flat_map(|y| (-1..=1).map(move |x| Cell::new(x, y)))
            .filter(|&c| c != Cell::ORIGIN);
        Self::new(offsets).unwrap()
    }

    pub fn offsets(&self) -> &[Cell] {
        &self.offsets
    }

    pub fn theta(&self) -> u32 {
        self.offsets.len() as u32
    }

    pub fn contains(&self, offset: Cell) -> bool {
        self.offsets.binary_search(&offset).is_ok()
    }

    /// Largest absolute offset coordinate along each axis.
    pub fn reach(&self) -> (i64, i64) {
        self.offsets
            .iter()
            .fold((0, 0), |(rx, ry), o| (rx.max(o.x.abs()), ry.max(o.y.abs())))
    }

    pub fn out_neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.offsets.iter().map(move |&o| cell + o)
    }

    pub fn in_neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.offsets.iter().map(move |&o| cell - o)
    }
}

/// Finitely supported grain counts; zero entries are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Configuration {
    grains: HashMap<Cell, u32>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, cell: Cell) -> u32 {
        self.grains.get(&cell).copied().unwrap_or(0)
    }

    pub fn set(&mut self, cell: Cell, grains: u32) {
        if grains == 0 {
            self.grains.remove(&cell);
        } else {
            self.grains.insert(cell, grains);
        }
    }

    pub fn add(&mut self, cell: Cell, grains: u32) {
        if grains > 0 {
            *self.grains.entry(cell).or_insert(0) += grains;
        }
    }

    /// Total number of grains `|c|`.
    pub fn total(&self) -> u64 {
        self.grains.values().map(|&g| g as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grains.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.grains.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, u32)> + '_ {
        self.grains.iter().map(|(&c, &g)| (c, g))
    }

    /// Support in row-major order.
    pub fn sorted(&self) -> Vec<(Cell, u32)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort();
        v
    }

    pub fn is_stable(&self, n: &Neighborhood) -> bool {
        let theta = n.theta();
        self.grains.values().all(|&g| g < theta)
    }

    pub fn unstable_cells(&self, n: &Neighborhood) -> Vec<Cell> {
        let theta = n.theta();
        let mut v: Vec<Cell> = self
            .grains
            .iter()
            .filter(|&(_, &g)| g >= theta)
            .map(|(&c, _)| c)
            .collect();
        v.sort();
        v
    }

    /// Inclusive corners `(min, max)` of the support, `None` when empty.
    pub fn bounding_box(&self) -> Option<(Cell, Cell)> {
        let mut it = self.grains.keys();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), c| {
            (
                Cell::new(lo.x.min(c.x), lo.y.min(c.y)),
                Cell::new(hi.x.max(c.x), hi.y.max(c.y)),
            )
        }))
    }

    /// Translate every grain by `delta`.
    pub fn shifted(&self, delta: Cell) -> Configuration {
        Configuration {
            grains: self.grains.iter().map(|(&c, &g)| (c + delta, g)).collect(),
        }
    }

    /// Cell-wise sum.
    pub fn merge(&mut self, other: &Configuration) {
        for (c, g) in other.iter() {
            self.add(c, g);
        }
    }
}

impl FromIterator<(Cell, u32)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (Cell, u32)>>(iter: I) -> Self {
        let mut c = Configuration::new();
        for (cell, g) in iter {
            c.add(cell, g);
        }
        c
    }
}

/// `c + 1_p`.
pub fn add_grain(c: &Configuration, p: Cell) -> Configuration {
    let mut out = c.clone();
    out.add(p, 1);
    out
}

/// Record of an avalanche: who fired at which step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AvalancheTrace {
    /// First firing step of every cell that fired (1-based).
    pub timestamps: HashMap<Cell, u32>,
    /// `firings_per_step[i]` is the sorted firing set of step `i + 1`.
    pub firings_per_step: Vec<Vec<Cell>>,
    pub total_steps: u32,
    /// Whether the last configuration reached is stable.
    pub stabilized: bool,
}

impl AvalancheTrace {
    pub fn timestamp(&self, cell: Cell) -> Option<u32> {
        self.timestamps.get(&cell).copied()
    }

    /// Firing set of 1-based step `t`.
    pub fn fired_at(&self, t: u32) -> &[Cell] {
        t.checked_sub(1)
            .and_then(|i| self.firings_per_step.get(i as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of times `cell` fired.
    pub fn multiplicity(&self, cell: Cell) -> usize {
        self.firings_per_step
            .iter()
            .filter(|s| s.binary_search(&cell).is_ok())
            .count()
    }

    /// Timestamps in row-major cell order.
    pub fn sorted_timestamps(&self) -> BTreeMap<Cell, u32> {
        self.timestamps.iter().map(|(&c, &t)| (c, t)).collect()
    }
}

/// Incremental simulator. Only unstable cells are visited each step, so the
/// cost of a step is proportional to the size of its firing set.
#[derive(Clone, Debug)]
pub struct Simulation<'n> {
    heights: HashMap<Cell, u32>,
    nbhd: &'n Neighborhood,
    unstable: Vec<Cell>,
    steps: u32,
}

impl<'n> Simulation<'n> {
    pub fn new(c: &Configuration, nbhd: &'n Neighborhood) -> Self {
        let heights = c.grains.clone();
        let unstable = c.unstable_cells(nbhd);
        Simulation { heights, nbhd, unstable, steps: 0 }
    }

    pub fn is_stable(&self) -> bool {
        self.unstable.is_empty()
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn height(&self, cell: Cell) -> u32 {
        self.heights.get(&cell).copied().unwrap_or(0)
    }

    /// Cells that will fire on the next step, sorted.
    pub fn unstable(&self) -> &[Cell] {
        &self.unstable
    }

    /// Apply one parallel update and return the sorted firing set.
    pub fn step(&mut self) -> Vec<Cell> {
        let theta = self.nbhd.theta();
        let fired = std::mem::take(&mut self.unstable);
        let mut touched = Vec::with_capacity(fired.len() * (theta as usize + 1));
        for &v in &fired {
            let h = self.heights.get_mut(&v).expect("firing cell has grains");
            *h -= theta;
            touched.push(v);
        }
        for &v in &fired {
            for w in self.nbhd.out_neighbors(v) {
                *self.heights.entry(w).or_insert(0) += 1;
                touched.push(w);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let mut next = Vec::new();
        for v in touched {
            match self.heights.get(&v).copied() {
                Some(0) => {
                    self.heights.remove(&v);
                }
                Some(h) if h >= theta => next.push(v),
                _ => {}
            }
        }
        self.unstable = next;
        self.steps += 1;
        fired
    }

    pub fn configuration(&self) -> Configuration {
        Configuration { grains: self.heights.clone() }
    }

    pub fn into_configuration(self) -> Configuration {
        Configuration { grains: self.heights }
    }
}

/// One application of the parallel rule: `(F(c), fired)`.
pub fn step(c: &Configuration, n: &Neighborhood) -> (Configuration, Vec<Cell>) {
    let mut sim = Simulation::new(c, n);
    let fired = sim.step();
    (sim.into_configuration(), fired)
}

fn traced(c: &Configuration, n: &Neighborhood, max_steps: u64) -> (Configuration, AvalancheTrace) {
    let mut sim = Simulation::new(c, n);
    let mut trace = AvalancheTrace::default();
    while !sim.is_stable() && (trace.total_steps as u64) < max_steps {
        let fired = sim.step();
        trace.total_steps += 1;
        for &v in &fired {
            trace.timestamps.entry(v).or_insert(trace.total_steps);
        }
        trace.firings_per_step.push(fired);
    }
    trace.stabilized = sim.is_stable();
    (sim.into_configuration(), trace)
}

/// `F^t(c)` with the trace of steps `1..=t`. Steps after stabilization are
/// no-ops and are not recorded.
pub fn run(c: &Configuration, n: &Neighborhood, t: u64) -> (Configuration, AvalancheTrace) {
    traced(c, n, t)
}

/// Iterate until stable or until `step_budget` steps have elapsed; check
/// `trace.stabilized` to tell the two apart.
pub fn stabilize(
    c: &Configuration,
    n: &Neighborhood,
    step_budget: u64,
) -> (Configuration, AvalancheTrace) {
    traced(c, n, step_budget)
}

/// `4 * |c| * (diameter + 1)^2`, where the diameter is the longer side of the
/// support's bounding box.
pub fn default_step_budget(c: &Configuration) -> u64 {
    let diam = c
        .bounding_box()
        .map(|(lo, hi)| (hi.x - lo.x).max(hi.y - lo.y) as u64 + 1)
        .unwrap_or(1);
    (4 * c.total() * (diam + 1) * (diam + 1)).max(1)
}

/// Parse the block text format: a header `cols rows origin_x origin_y`
/// followed by `rows` lines of `cols` tokens, each an integer or `.`.
/// Blank lines and `#` comments are skipped.
pub fn parse_configuration(text: &str) -> Result<Configuration> {
    let mut lines = content_lines(text);
    parse_block(&mut lines)
}

/// Several blocks in sequence, e.g. successive frames of an evolution or the
/// tiles of a compiled layout.
pub fn parse_configurations(text: &str) -> Result<Vec<Configuration>> {
    let mut lines = content_lines(text).peekable();
    let mut out = Vec::new();
    while lines.peek().is_some() {
        out.push(parse_block(&mut lines)?);
    }
    Ok(out)
}

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub(crate) fn parse_block<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Configuration> {
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
    let nums: Vec<i64> = header
        .split_whitespace()
        .map(|t| t.parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: hl, msg: format!("bad header: {e}") })?;
    let [cols, rows, ox, oy] = nums[..] else {
        return Err(Error::Parse {
            line: hl,
            msg: "header must be `cols rows origin_x origin_y`".into(),
        });
    };
    if cols < 0 || rows < 0 {
        return Err(Error::Parse { line: hl, msg: "negative block size".into() });
    }
    let mut c = Configuration::new();
    for y in 0..rows {
        let (ln, row) = lines.next().ok_or(Error::Parse {
            line: hl,
            msg: format!("expected {rows} rows, found {y}"),
        })?;
        let cells = parse_row(ln, row, cols as usize)?;
        for (x, g) in cells.into_iter().enumerate() {
            c.set(Cell::new(ox + x as i64, oy + y), g);
        }
    }
    Ok(c)
}

pub(crate) fn parse_row(line: usize, row: &str, cols: usize) -> Result<Vec<u32>> {
    let toks: Vec<&str> = row.split_whitespace().collect();
    if toks.len() != cols {
        return Err(Error::Parse {
            line,
            msg: format!("expected {cols} tokens, found {}", toks.len()),
        });
    }
    toks.iter()
        .map(|t| match *t {
            "." => Ok(0),
            t => t.parse::<u32>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad cell token `{t}`"),
            }),
        })
        .collect()
}

/// Render the support's bounding box in the block format.
pub fn format_configuration(c: &Configuration) -> String {
    match c.bounding_box() {
        None => "0 0 0 0\n".to_string(),
        Some((lo, hi)) => format_block(c, lo, (hi.x - lo.x + 1) as usize, (hi.y - lo.y + 1) as usize),
    }
}

pub(crate) fn format_block(c: &Configuration, origin: Cell, cols: usize, rows: usize) -> String {
    let mut out = format!("{cols} {rows} {} {}\n", origin.x, origin.y);
    out.push_str(&format_rows(c, origin, cols, rows));
    out
}

pub(crate) fn format_rows(c: &Configuration, origin: Cell, cols: usize, rows: usize) -> String {
    let mut out = String::new();
    for y in 0..rows as i64 {
        let row: Vec<String> = (0..cols as i64)
            .map(|x| match c.get(origin + Cell::new(x, y)) {
                0 => ".".to_string(),
                g => g.to_string(),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
