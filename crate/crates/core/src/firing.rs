//! Firing graphs of gadget avalanches, their timed restrictions, and the
//! transform that makes the two timed firing graphs of a crossover disjoint.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::gadget::{verify_timed_crossover_at, Gadget, PortRole};
use crate::lattice::{AvalancheTrace, Cell, Neighborhood};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiringGraph {
    pub vertices: BTreeSet<Cell>,
    /// `(v1, v2)` with `v2 - v1` an offset and `v1` firing strictly first.
    pub arcs: BTreeSet<(Cell, Cell)>,
    pub start: Cell,
    pub end: Option<Cell>,
    pub timestamps: BTreeMap<Cell, u32>,
    pub stabilized: bool,
}

impl FiringGraph {
    pub fn from_trace(trace: &AvalancheTrace, n: &Neighborhood, start: Cell, end: Option<Cell>) -> Self {
        let timestamps = trace.sorted_timestamps();
        let mut arcs = BTreeSet::new();
        for (&v2, &t2) in &timestamps {
            for v1 in n.in_neighbors(v2) {
                if matches!(timestamps.get(&v1), Some(&t1) if t1 < t2) {
                    arcs.insert((v1, v2));
                }
            }
        }
        FiringGraph {
            vertices: timestamps.keys().copied().collect(),
            arcs,
            start,
            end,
            timestamps,
            stabilized: trace.stabilized,
        }
    }

    pub fn timestamp(&self, v: Cell) -> Option<u32> {
        self.timestamps.get(&v).copied()
    }

    pub fn predecessors(&self, v: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.arcs.iter().filter(move |a| a.1 == v).map(|a| a.0)
    }

    /// Graphviz rendering; vertices are labelled with their timestamps.
    pub fn to_dot(&self, name: &str) -> String {
        let id = |c: Cell| format!("\"{},{}\"", c.x, c.y);
        let mut out = format!("digraph {name} {{\n");
        for (&v, &t) in &self.timestamps {
            let mut attrs = format!("label=\"({},{}) t={t}\"", v.x, v.y);
            if v == self.start || Some(v) == self.end {
                attrs.push_str(", shape=box");
            }
            out.push_str(&format!("  {} [{attrs}];\n", id(v)));
        }
        for &(a, b) in &self.arcs {
            out.push_str(&format!("  {} -> {};\n", id(a), id(b)));
        }
        out.push_str("}\n");
        out
    }
}

fn opposite(role: PortRole) -> Option<PortRole> {
    match role {
        PortRole::N => Some(PortRole::S),
        PortRole::S => Some(PortRole::N),
        PortRole::W => Some(PortRole::E),
        PortRole::E => Some(PortRole::W),
        PortRole::In1 | PortRole::In2 | PortRole::Src => Some(PortRole::Out),
        PortRole::Out | PortRole::Out2 => None,
    }
}

/// Firing graph of `g + 1_port`. The step budget bounds the simulation; if
/// it runs out, `stabilized` is false and the graph covers the steps run.
pub fn firing_graph(g: &Gadget, role: PortRole, budget: u64) -> Result<FiringGraph> {
    let start = g.port(role)?;
    let end = opposite(role).and_then(|r| g.ports.get(&r).copied());
    let mut c = g.grid.clone();
    c.add(start, 1);
    let n = g.neighborhood();
    let (_, trace) = crate::lattice::stabilize(&c, &n, budget);
    Ok(FiringGraph::from_trace(&trace, &n, start, end))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedFiringGraph {
    pub base: FiringGraph,
    pub kept: BTreeSet<Cell>,
    pub delay: u32,
}

impl TimedFiringGraph {
    pub fn arcs(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.base
            .arcs
            .iter()
            .copied()
            .filter(|(a, b)| self.kept.contains(a) && self.kept.contains(b))
    }

    pub fn predecessors(&self, v: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.arcs().filter(move |a| a.1 == v).map(|a| a.0)
    }
}

/// `{v : t_a(v) <= t_b(v)}` for both orders, a missing time counting as
/// infinity.
pub fn kept_sets(a: &AvalancheTrace, b: &AvalancheTrace) -> (BTreeSet<Cell>, BTreeSet<Cell>) {
    let keep = |x: &AvalancheTrace, y: &AvalancheTrace| -> BTreeSet<Cell> {
        x.timestamps
            .iter()
            .filter(|(c, &t)| y.timestamp(**c).is_none_or(|u| t <= u))
            .map(|(&c, _)| c)
            .collect()
    };
    (keep(a, b), keep(b, a))
}

/// Both timed firing graphs of a crossover with ports `n, s, w, e` and a
/// declared delay. Rejects the gadget if an ending cell is shared or lost.
pub fn timed_firing_graphs(g: &Gadget) -> Result<(TimedFiringGraph, TimedFiringGraph)> {
    let delay = g.delay.ok_or_else(|| Error::MissingPort("delay".into()))?;
    let n = g.neighborhood();
    let (pn, ps, pw, pe) = (
        g.port(PortRole::N)?,
        g.port(PortRole::S)?,
        g.port(PortRole::W)?,
        g.port(PortRole::E)?,
    );
    let ns = g.avalanche(&[pn]);
    let we = g.avalanche(&[pw]);
    let (kept_ns, kept_we) = kept_sets(&ns, &we);
    if !kept_ns.contains(&ps) || kept_we.contains(&ps) {
        return Err(Error::NotTimedCrossover(format!("ending cell {ps} is not owned by the n->s graph")));
    }
    if !kept_we.contains(&pe) || kept_ns.contains(&pe) {
        return Err(Error::NotTimedCrossover(format!("ending cell {pe} is not owned by the w->e graph")));
    }
    let gns = TimedFiringGraph { base: FiringGraph::from_trace(&ns, &n, pn, Some(ps)), kept: kept_ns, delay };
    let gwe = TimedFiringGraph { base: FiringGraph::from_trace(&we, &n, pw, Some(pe)), kept: kept_we, delay };
    Ok((gns, gwe))
}

/// Empty the cells shared by the two timed firing graphs and compensate each
/// surviving cell with one grain per predecessor it lost, so the two signals
/// run through vertex-disjoint cells with unchanged timestamps.
pub fn disjointify(g: &Gadget) -> Result<Gadget> {
    let delay = g.delay.ok_or_else(|| Error::MissingPort("delay".into()))?;
    let report = verify_timed_crossover_at(g, delay)?;
    if !report.verdict {
        let what: Vec<String> = report.violations.iter().map(|v| v.detail.clone()).collect();
        return Err(Error::NotTimedCrossover(what.join("; ")));
    }
    let (gns, gwe) = timed_firing_graphs(g)?;
    let shared: BTreeSet<Cell> = gns.kept.intersection(&gwe.kept).copied().collect();
    if shared.is_empty() {
        return Ok(g.clone());
    }
    let mut out = g.clone();
    for &v in &shared {
        out.grid.set(v, 0);
    }
    let max = g.theta() - 1;
    for tg in [&gns, &gwe] {
        for &v in tg.kept.difference(&shared) {
            let lost = tg.predecessors(v).filter(|p| shared.contains(p)).count() as u32;
            if lost > 0 {
                out.grid.add(v, lost);
                if out.grid.get(v) > max {
                    return Err(Error::DisjointifyOverflow(v));
                }
            }
        }
    }
    Ok(out)
}

/// Cells reachable from `start` along arcs that advance the timestamp by
/// exactly one step.
pub fn tight_front(trace: &AvalancheTrace, n: &Neighborhood, start: Cell) -> Vec<Cell> {
    let Some(t0) = trace.timestamp(start) else {
        return Vec::new();
    };
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, t0)]);
    let mut out = vec![start];
    while let Some((u, tu)) = queue.pop_front() {
        for v in n.out_neighbors(u) {
            if trace.timestamp(v) == Some(tu + 1) && seen.insert(v) {
                out.push(v);
                queue.push_back((v, tu + 1));
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::parse_gadget;

    #[test]
    fn quiet_port_gives_empty_graph() {
        let text = "neighborhood 240\nsize 3 3\nkind wire\nport in1 0 1\nport out 2 1\ngrid\n. . .\n1 3 3\n. . .\n";
        let g = parse_gadget(text).unwrap();
        let fg = firing_graph(&g, PortRole::In1, 100).unwrap();
        assert!(fg.vertices.is_empty());
        assert!(fg.arcs.is_empty());
    }

    #[test]
    fn wire_graph_is_a_chain() {
        let text = "neighborhood 240\nsize 4 3\nkind wire\nport in1 0 1\nport out 3 1\ngrid\n. . . .\n3 3 3 3\n. . . .\n";
        let g = parse_gadget(text).unwrap();
        let fg = firing_graph(&g, PortRole::In1, 100).unwrap();
        let chain: BTreeSet<(Cell, Cell)> =
            (0..3).map(|x| (Cell::new(x, 1), Cell::new(x + 1, 1))).collect();
        assert_eq!(fg.arcs, chain);
        assert_eq!(fg.end, Some(Cell::new(3, 1)));
        assert!(fg.to_dot("g").contains("\"0,1\" -> \"1,1\""));
    }

    #[test]
    fn kept_sets_use_infinity_for_missing() {
        let mut a = AvalancheTrace::default();
        let mut b = AvalancheTrace::default();
        a.timestamps.insert(Cell::new(0, 0), 3);
        a.timestamps.insert(Cell::new(1, 0), 2);
        b.timestamps.insert(Cell::new(1, 0), 2);
        b.timestamps.insert(Cell::new(2, 0), 1);
        let (ka, kb) = kept_sets(&a, &b);
        assert_eq!(ka, BTreeSet::from([Cell::new(0, 0), Cell::new(1, 0)]));
        assert_eq!(kb, BTreeSet::from([Cell::new(1, 0), Cell::new(2, 0)]));
    }
}
