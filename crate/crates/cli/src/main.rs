//! `sandpile`: command-line front end for simulation, classification,
//! gadget verification and search, and circuit compilation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use timed_sandpile::catalog::{self, decode, MooreCode};
use timed_sandpile::circuit::{self, CompiledInstance, Pred, Toolkit};
use timed_sandpile::firing::{self, FiringGraph};
use timed_sandpile::gadget::{self, format_gadget, parse_gadget, Gadget, GadgetKind, ParityDiagnostic, PortRole};
use timed_sandpile::lattice::{self, default_step_budget, format_configuration, parse_configurations, Cell, Configuration};
use timed_sandpile::search::{self, SearchSpec};
use timed_sandpile::{par, render, Exec};

// A closed pipe (`| head`) ends output quietly instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "sandpile", version, about = "Sandpile dynamics, gadgets and circuit compilation")]
struct Cli {
    /// Directory that relative asset paths and the default toolkit resolve against.
    #[arg(long, global = true, env = "SANDPILE_ASSETS")]
    assets: Option<PathBuf>,
    /// Emit JSON (sorted keys) instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a fixed number of parallel update steps.
    Simulate(SimArgs),
    /// Update until stable or out of budget.
    Stabilize(SimArgs),
    /// Decide whether q becomes unstable after a grain at p.
    Predict(PredictArgs),
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Firing graph of a gadget avalanche.
    Fgraph(FgraphArgs),
    /// Check a gadget against its declared kind and delay.
    Verify(VerifyArgs),
    /// Empty the shared cells of a timed crossover's two timed firing graphs.
    Disjointify(DisjointifyArgs),
    /// Enumerate gadgets of a given kind and size.
    Search(SearchArgs),
    /// Tile a netlist with a gadget toolkit.
    Compile(CompileArgs),
    /// Compile seeded random netlists and compare prediction with evaluation.
    Sweep(SweepArgs),
    /// Timestamp map of an avalanche.
    Render(RenderArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Configuration file (the first block is used).
    file: PathBuf,
    /// Moore code of the neighborhood.
    #[arg(long, default_value_t = 255)]
    code: u32,
    /// Steps to run (`simulate`) or step budget (`stabilize`).
    #[arg(long)]
    steps: Option<u64>,
    /// Add one grain at `x,y` first.
    #[arg(long, value_parser = parse_cell)]
    grain: Vec<Cell>,
    /// Print the timestamp map instead of the final configuration.
    #[arg(long)]
    timestamps: bool,
}

#[derive(Args)]
struct PredictArgs {
    instance: PathBuf,
    /// Decide TIMED-PRED at the instance's `t` (or `--at`).
    #[arg(long)]
    timed: bool,
    #[arg(long)]
    at: Option<u64>,
    /// Step budget for the untimed question.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// Class of every code 1..=255.
    Classify {
        #[arg(long, default_value_t = catalog::DEFAULT_PATCH)]
        patch: usize,
    },
    /// Codes reachable by the square's symmetries.
    Orbit { code: u32 },
    /// Planarity of the sandpile graph on a finite patch.
    Planar {
        code: u32,
        #[arg(long, default_value_t = catalog::DEFAULT_PATCH)]
        patch: usize,
    },
}

#[derive(Args)]
struct FgraphArgs {
    gadget: PathBuf,
    /// Port receiving the grain.
    #[arg(long, default_value = "n", value_parser = parse_role)]
    port: PortRole,
    /// Graphviz output.
    #[arg(long)]
    dot: bool,
    /// Restrict to the timed firing graph (crossovers only).
    #[arg(long)]
    timed: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Pass,
    Fail,
}

#[derive(Args)]
struct VerifyArgs {
    gadget: PathBuf,
    /// Exit 1 unless the verdict matches.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Also report the timestamp parity diagnostic.
    #[arg(long)]
    parity: bool,
}

#[derive(Args)]
struct DisjointifyArgs {
    gadget: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    code: u32,
    /// `MxN` (columns x rows).
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, value_parser = parse_kind, required_unless_present = "turn_label_a")]
    kind: Option<GadgetKind>,
    #[arg(long)]
    delay_min: Option<u32>,
    #[arg(long)]
    delay_max: Option<u32>,
    /// `full`, or a comma-separated list of grain counts.
    #[arg(long)]
    alphabet: Option<String>,
    /// Node limit.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Fix a port: `role:x,y` (repeatable).
    #[arg(long = "port", value_parser = parse_port)]
    ports: Vec<(PortRole, Cell)>,
    /// Keep symmetric duplicates.
    #[arg(long)]
    no_symmetry: bool,
    /// Exhaustive search for label-A turns (in1 at the west midpoint).
    #[arg(long)]
    turn_label_a: bool,
    /// Write every gadget found here as it is found.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    netlist: PathBuf,
    /// Toolkit directory (defaults to the asset directory).
    #[arg(long)]
    toolkit: Option<PathBuf>,
    /// Neighborhood to pick when the toolkit holds several.
    #[arg(long, default_value_t = 127)]
    code: u32,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    count: u64,
    #[arg(long, default_value_t = 5)]
    layers: usize,
    #[arg(long)]
    toolkit: Option<PathBuf>,
    #[arg(long, default_value_t = 127)]
    code: u32,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct RenderArgs {
    /// Gadget or compiled instance.
    file: PathBuf,
    /// Gadget port receiving the grain (default: n, in1 or src).
    #[arg(long, value_parser = parse_role)]
    port: Option<PortRole>,
    /// Write SVG here instead of printing text.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    cell_px: u32,
}

fn parse_cell(s: &str) -> std::result::Result<Cell, String> {
    let (x, y) = s.split_once(',').ok_or("expected `x,y`")?;
    let num = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("bad coordinate `{t}`: {e}"));
    Ok(Cell::new(num(x)?, num(y)?))
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (m, n) = s.split_once(['x', 'X']).ok_or("expected `MxN`")?;
    let num = |t: &str| t.parse::<usize>().map_err(|e| format!("bad size `{t}`: {e}"));
    Ok((num(m)?, num(n)?))
}

fn parse_kind(s: &str) -> std::result::Result<GadgetKind, String> {
    s.parse()
}

fn parse_role(s: &str) -> std::result::Result<PortRole, String> {
    s.parse()
}

fn parse_port(s: &str) -> std::result::Result<(PortRole, Cell), String> {
    let (role, cell) = s.split_once(':').ok_or("expected `role:x,y`")?;
    Ok((role.parse()?, parse_cell(cell)?))
}

/// Domain failures exit 1; clap handles usage errors with exit 2.
struct Ctx {
    assets: PathBuf,
    json: bool,
}

impl Ctx {
    /// `path` as given if it exists, else relative to the asset directory.
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.exists() || path.is_absolute() {
            path.to_path_buf()
        } else {
            let alt = self.assets.join(path);
            if alt.exists() {
                alt
            } else {
                path.to_path_buf()
            }
        }
    }

    fn read(&self, path: &Path) -> Result<String> {
        let p = self.resolve(path);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    }

    fn gadget(&self, path: &Path) -> Result<Gadget> {
        parse_gadget(&self.read(path)?).with_context(|| format!("parsing {}", path.display()))
    }

    fn emit(&self, v: &Value) {
        outln!("{}", serde_json::to_string_pretty(v).expect("json"));
    }
}

fn default_assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn code(c: u32) -> Result<MooreCode> {
    Ok(MooreCode::new(c)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { assets: cli.assets.clone().unwrap_or_else(default_assets), json: cli.json };
    match dispatch(&ctx, cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Simulate(a) => simulate(ctx, a, false),
        Cmd::Stabilize(a) => simulate(ctx, a, true),
        Cmd::Predict(a) => predict(ctx, a),
        Cmd::Catalog(c) => catalog_cmd(ctx, c),
        Cmd::Fgraph(a) => fgraph(ctx, a),
        Cmd::Verify(a) => verify(ctx, a),
        Cmd::Disjointify(a) => disjointify(ctx, a),
        Cmd::Search(a) => search_cmd(ctx, a),
        Cmd::Compile(a) => compile(ctx, a),
        Cmd::Sweep(a) => sweep(ctx, a),
        Cmd::Render(a) => render_cmd(ctx, a),
    }
}

fn first_block(ctx: &Ctx, path: &Path) -> Result<Configuration> {
    parse_configurations(&ctx.read(path)?)?
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("{}: no configuration block", path.display()))
}

fn simulate(ctx: &Ctx, a: SimArgs, until_stable: bool) -> Result<ExitCode> {
    let n = decode(code(a.code)?);
    let mut c = first_block(ctx, &a.file)?;
    for &g in &a.grain {
        c.add(g, 1);
    }
    let (end, trace) = if until_stable {
        let budget = a.steps.unwrap_or_else(|| default_step_budget(&c));
        lattice::stabilize(&c, &n, budget)
    } else {
        lattice::run(&c, &n, a.steps.unwrap_or(1))
    };
    if ctx.json {
        ctx.emit(&json!({
            "steps": trace.total_steps,
            "stabilized": trace.stabilized,
            "fired": trace.timestamps.len(),
            "grains": end.total(),
            "configuration": format_configuration(&end),
        }));
    } else if a.timestamps {
        out!("{}", render::ascii_map(&c, &trace));
    } else {
        out!("{}", format_configuration(&end));
        if until_stable {
            let state = if trace.stabilized { "stable" } else { "budget exhausted" };
            eprintln!("{} steps, {state}", trace.total_steps);
        }
    }
    Ok(if until_stable && !trace.stabilized { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<ExitCode> {
    let inst = circuit::parse_instance(&ctx.read(&a.instance)?)?;
    let n = inst.neighborhood();
    let v = if a.timed {
        let t = a.at.unwrap_or(inst.t);
        let yes = circuit::decide_timed_pred(&inst.configuration, inst.p, inst.q, t, &n)?;
        json!({ "question": "timed", "t": t, "answer": yes })
    } else {
        match circuit::decide_pred(&inst.configuration, inst.p, inst.q, &n, a.budget)? {
            Pred::Yes { step } => json!({ "question": "untimed", "answer": true, "step": step }),
            Pred::No => json!({ "question": "untimed", "answer": false }),
            Pred::Undecided { steps } => json!({ "question": "untimed", "answer": null, "steps": steps }),
        }
    };
    if ctx.json {
        ctx.emit(&v);
    } else {
        match &v["answer"] {
            Value::Bool(b) => outln!("{}", if *b { "yes" } else { "no" }),
            _ => outln!("undecided after {} steps", v["steps"]),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn catalog_cmd(ctx: &Ctx, c: CatalogCmd) -> Result<ExitCode> {
    match c {
        CatalogCmd::Classify { patch } => {
            let table = catalog::classify_all_with(Exec::default(), patch);
            if ctx.json {
                ctx.emit(&table.to_json());
            } else {
                for (class, count) in table.counts() {
                    outln!("{:<32} {count}", class.name());
                }
                for (code, e) in &table.entries {
                    outln!("{:>3} {} (representative {})", code.get(), e.class.name(), e.representative.get());
                }
            }
            let ok = table.unclassified.is_empty() && table.planar_mismatches.is_empty();
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        CatalogCmd::Orbit { code: c } => {
            let orbit: Vec<u8> = catalog::orbit(code(c)?).into_iter().map(|m| m.get()).collect();
            if ctx.json {
                ctx.emit(&json!({ "code": c, "orbit": orbit }));
            } else {
                outln!("{}", orbit.iter().map(u8::to_string).collect::<Vec<_>>().join(" "));
            }
            Ok(ExitCode::SUCCESS)
        }
        CatalogCmd::Planar { code: c, patch } => {
            let planar = catalog::is_planar(&decode(code(c)?), patch)?;
            if ctx.json {
                ctx.emit(&json!({ "code": c, "patch": patch, "planar": planar }));
            } else {
                outln!("{}", if planar { "planar" } else { "non-planar" });
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn graph_json(g: &FiringGraph) -> Value {
    let vertices: Vec<Value> = g.timestamps.iter().map(|(c, t)| json!([c.x, c.y, t])).collect();
    let arcs: Vec<Value> = g.arcs.iter().map(|(a, b)| json!([[a.x, a.y], [b.x, b.y]])).collect();
    json!({ "vertices": vertices, "arcs": arcs, "stabilized": g.stabilized })
}

fn fgraph(ctx: &Ctx, a: FgraphArgs) -> Result<ExitCode> {
    let g = ctx.gadget(&a.gadget)?;
    let mut graph = firing::firing_graph(&g, a.port, default_step_budget(&g.grid) + 1000)?;
    let mut kept = None;
    if a.timed {
        let (ns, we) = firing::timed_firing_graphs(&g)?;
        let tg = match a.port {
            PortRole::N => ns,
            PortRole::W => we,
            other => bail!("timed firing graphs start at n or w, not {other}"),
        };
        graph = tg.base.clone();
        kept = Some(tg.kept);
    }
    if let Some(k) = &kept {
        graph.timestamps.retain(|c, _| k.contains(c));
        graph.vertices.retain(|c| k.contains(c));
        graph.arcs.retain(|(x, y)| k.contains(x) && k.contains(y));
    }
    if a.dot {
        out!("{}", graph.to_dot(a.port.name()));
    } else if ctx.json {
        ctx.emit(&graph_json(&graph));
    } else {
        for (c, t) in &graph.timestamps {
            outln!("v {} {} {t}", c.x, c.y);
        }
        for (x, y) in &graph.arcs {
            outln!("a {} {} {} {}", x.x, x.y, y.x, y.y);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(ctx: &Ctx, a: VerifyArgs) -> Result<ExitCode> {
    let g = ctx.gadget(&a.gadget)?;
    let report = gadget::verify(&g)?;
    let parity = if a.parity {
        match gadget::parity_diagnostic(&g)? {
            ParityDiagnostic::NotApplicable => Some(Value::Null),
            ParityDiagnostic::Report(r) => Some(serde_json::to_value(&r)?),
        }
    } else {
        None
    };
    if ctx.json {
        let mut v = report.to_json();
        v["kind"] = json!(g.kind.name());
        v["code"] = json!(g.code.get());
        if let Some(p) = &parity {
            v["parity"] = p.clone();
        }
        ctx.emit(&v);
    } else {
        let delay = report.delay.map_or("-".to_string(), |d| d.to_string());
        outln!("verdict {} delay {delay}", if report.verdict { "pass" } else { "fail" });
        for v in &report.violations {
            outln!("  {}: {}", v.constraint, v.detail);
        }
        if let Some(p) = &parity {
            outln!("parity {p}");
        }
    }
    let ok = match a.expect {
        Some(Expect::Pass) => report.verdict,
        Some(Expect::Fail) => !report.verdict,
        None => true,
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn disjointify(ctx: &Ctx, a: DisjointifyArgs) -> Result<ExitCode> {
    let g = ctx.gadget(&a.gadget)?;
    let (ns, we) = firing::timed_firing_graphs(&g)?;
    let shared = ns.kept.intersection(&we.kept).count();
    let out = firing::disjointify(&g)?;
    let report = gadget::verify(&out)?;
    let text = format_gadget(&out);
    match &a.out {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None if !ctx.json => out!("{text}"),
        None => {}
    }
    if ctx.json {
        ctx.emit(&json!({ "shared": shared, "verdict": report.verdict }));
    } else {
        eprintln!("{shared} shared cells emptied; result {}", if report.verdict { "verifies" } else { "does not verify" });
    }
    Ok(if report.verdict { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_alphabet(s: &str, theta: u32) -> Result<Vec<u32>> {
    if s == "full" {
        return Ok((0..theta).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| anyhow!("bad alphabet entry `{t}`: {e}")))
        .collect()
}

fn search_cmd(ctx: &Ctx, a: SearchArgs) -> Result<ExitCode> {
    let c = code(a.code)?;
    let (w, h) = a.size;
    if a.turn_label_a {
        if w != h {
            bail!("label-A turns are square");
        }
        let delay = a.delay_max.or(a.delay_min).ok_or_else(|| anyhow!("--delay-max is required"))?;
        let outcome = par::with_jobs(a.jobs, || search::search_turn_label_a(c, w, delay))?;
        let mut v = json!({
            "code": c.get(),
            "exhaustive": outcome.exhaustive,
            "found": outcome.gadgets.len(),
            "kind": "turn",
            "label": "A",
            "nodes": outcome.nodes,
            "precheck_pruned": outcome.precheck_pruned,
            "size": [w, h],
        });
        v["delay"] = json!(delay);
        ctx.emit(&v);
        return Ok(ExitCode::SUCCESS);
    }
    let kind = a.kind.expect("clap requires --kind here");
    let mut spec = SearchSpec::new(c, w, h, kind);
    if a.delay_min.is_some() || a.delay_max.is_some() {
        let lo = a.delay_min.unwrap_or(1);
        let hi = a.delay_max.unwrap_or((w * h) as u32);
        spec = spec.with_delay(lo, hi);
    }
    if let Some(al) = &a.alphabet {
        spec.alphabet = parse_alphabet(al, spec.theta())?;
    }
    spec.budget = a.budget;
    spec.symmetry = !a.no_symmetry;
    let mut by_role: std::collections::BTreeMap<PortRole, Vec<Cell>> = Default::default();
    for (r, cell) in &a.ports {
        by_role.entry(*r).or_default().push(*cell);
    }
    for (r, cells) in by_role {
        spec = spec.with_ports(r, cells);
    }
    spec.validate()?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let counter = Mutex::new(0usize);
    let write_err = Mutex::new(None);
    let sink = |g: &Gadget| {
        let Some(dir) = &a.out else { return };
        let mut k = counter.lock().unwrap();
        *k += 1;
        let path = dir.join(format!("{}-{}-{:04}.gadget", g.code.get(), g.kind.name(), *k));
        if let Err(e) = fs::write(&path, format_gadget(g)) {
            write_err.lock().unwrap().get_or_insert(format!("{}: {e}", path.display()));
        }
    };
    let outcome = par::with_jobs(a.jobs, || search::search_streaming(&spec, &sink))?;
    if let Some(e) = write_err.into_inner().unwrap() {
        bail!("writing results: {e}");
    }
    ctx.emit(&outcome.summary_json(&spec));
    Ok(ExitCode::SUCCESS)
}

fn load_toolkit(ctx: &Ctx, dir: Option<&Path>, c: u32) -> Result<Toolkit> {
    let dir = dir.map(|d| d.to_path_buf()).unwrap_or_else(|| ctx.assets.clone());
    Ok(Toolkit::load(&dir, Some(code(c)?))?)
}

fn compile(ctx: &Ctx, a: CompileArgs) -> Result<ExitCode> {
    let netlist = circuit::parse_netlist(&ctx.read(&a.netlist)?)?;
    let tk = load_toolkit(ctx, a.toolkit.as_deref(), a.code)?;
    let inst = circuit::compile(&netlist, &tk)?;
    let text = circuit::format_instance(&inst);
    match &a.out {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => out!("{text}"),
    }
    if a.out.is_some() || ctx.json {
        let l = &inst.layout;
        let v = json!({
            "t": inst.t, "d": l.d, "z": l.z, "U": l.u, "y": l.y,
            "tiles": l.placements.len(), "value": circuit::evaluate(&netlist),
        });
        if ctx.json {
            ctx.emit(&v);
        } else {
            eprintln!("{} tiles, t = {}", l.placements.len(), inst.t);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_one(inst: &CompiledInstance, want: bool) -> Result<Value> {
    let n = inst.neighborhood();
    let got = circuit::decide_timed_pred(&inst.configuration, inst.p, inst.q, inst.t, &n)?;
    let off = inst.schedule_violations(&inst.avalanche()).len();
    Ok(json!({ "expected": want, "predicted": got, "off_schedule": off, "t": inst.t }))
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<ExitCode> {
    let tk = load_toolkit(ctx, a.toolkit.as_deref(), a.code)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.count).collect();
    let rows = par::with_jobs(a.jobs, || {
        par::map(Exec::Parallel, &seeds, |&s| -> Result<Value> {
            let net = circuit::random_netlist(s, a.layers);
            let inst = circuit::compile(&net, &tk)?;
            let mut v = sweep_one(&inst, circuit::evaluate(&net))?;
            v["seed"] = json!(s);
            Ok(v)
        })
    });
    let rows: Vec<Value> = rows.into_iter().collect::<Result<_>>()?;
    let agree = rows
        .iter()
        .filter(|r| r["expected"] == r["predicted"] && r["off_schedule"] == 0)
        .count();
    if ctx.json {
        ctx.emit(&json!({ "agree": agree, "count": rows.len(), "instances": rows }));
    } else {
        for r in &rows {
            outln!(
                "seed {} expected {} predicted {} off-schedule {}",
                r["seed"], r["expected"], r["predicted"], r["off_schedule"]
            );
        }
        outln!("{agree}/{} agree", rows.len());
    }
    Ok(if agree == rows.len() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn default_port(g: &Gadget) -> Result<PortRole> {
    [PortRole::N, PortRole::In1, PortRole::Src]
        .into_iter()
        .find(|r| g.ports.contains_key(r))
        .ok_or_else(|| anyhow!("gadget has no n, in1 or src port; pick one with --port"))
}

fn render_cmd(ctx: &Ctx, a: RenderArgs) -> Result<ExitCode> {
    let text = ctx.read(&a.file)?;
    let is_gadget = text.lines().any(|l| l.trim() == "grid");
    let (config, trace) = if is_gadget {
        let g = parse_gadget(&text)?;
        let role = match a.port {
            Some(r) => r,
            None => default_port(&g)?,
        };
        (g.grid.clone(), g.avalanche(&[g.port(role)?]))
    } else {
        let inst = circuit::parse_instance(&text)?;
        (inst.configuration.clone(), inst.avalanche())
    };
    match &a.svg {
        Some(p) => fs::write(p, render::svg_map(&config, &trace, a.cell_px))
            .with_context(|| format!("writing {}", p.display()))?,
        None => out!("{}", render::ascii_map(&config, &trace)),
    }
    Ok(ExitCode::SUCCESS)
}
