//! Command-line front end: reads a complex (and map), runs one operation, writes reports.
//!
//! Exit codes: 0 success, 1 unparseable input, 2 precondition violation,
//! 3 numerical failure or failed ledger.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use pliso::fold::{edge_arclengths, isometrize_graph, FoldPlan};
use pliso::genpos::{perturb_to_embedding, verify_embedding, EmbeddingCheck, PerturbOptions};
use pliso::intersect::exact_verdict;
use pliso::io::{complex_to_json, complex_to_value, map_to_json, map_to_value, read_complex, read_map};
use pliso::pipeline::{iterate_nash, split_embed_pipeline, NashOptions};
use pliso::pullback::{all_pairs, isometry_defect, sample_graph};
use pliso::{EpsSchedule, Error, PLMap, SimplicialComplex};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Validate,
    Margin,
    Genpos,
    Perturb,
    Pullback,
    Fold,
    SplitPipeline,
    Iterate,
}

#[derive(Debug, Parser)]
#[command(name = "pliso", version, about = "PL isometric embeddings of Euclidean polyhedra")]
struct Cli {
    /// Operation to run (alternatively `--cmd`).
    #[arg(value_enum)]
    command: Option<Command>,
    #[arg(long = "cmd", value_enum)]
    cmd: Option<Command>,
    /// Complex JSON file.
    #[arg(long)]
    complex: PathBuf,
    /// Map JSON file on the complex.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Accuracy schedule "e1,e2,...", one entry per shell; the last entry repeats.
    #[arg(long)]
    eps: Option<String>,
    /// Shell base vertex; defaults to the least vertex id.
    #[arg(long = "base-vertex")]
    base_vertex: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subdivision level of the pullback sample graph.
    #[arg(long, default_value_t = 4)]
    level: u32,
    /// Chain step of the pullback estimate; defaults to the sample mesh.
    #[arg(long = "chain-eps")]
    chain_eps: Option<f64>,
    #[arg(long = "rank-tol", default_value_t = 1e-9)]
    rank_tol: f64,
    #[arg(long, default_value_t = 64)]
    retries: usize,
    /// Iterations of the alternating construction.
    #[arg(long, default_value_t = 6)]
    iters: usize,
    /// Report path; side files are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the fold plan.
    #[arg(long = "emit-plan")]
    emit_plan: bool,
}

enum Failure {
    Lib(Error),
    Usage(String),
    Io(String),
    Ledger,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// A finished command: the main report plus side files keyed by suffix.
struct Output {
    report: Value,
    sides: Vec<(&'static str, String)>,
    ledger_ok: bool,
}

impl Output {
    fn new(report: Value) -> Self {
        Output { report, sides: Vec::new(), ledger_ok: true }
    }

    fn with_map(mut self, map: &PLMap) -> Self {
        self.sides.push(("map.json", map_to_json(map)));
        self.sides.push(("complex.json", complex_to_json(map.domain())));
        self
    }

    fn with_plan(mut self, plan: &FoldPlan, emit: bool) -> Self {
        if emit {
            self.sides.push(("plan.json", plan.to_json()));
        }
        self
    }
}

struct Scene {
    cli: Cli,
    command: Command,
    complex: Arc<SimplicialComplex>,
}

impl Scene {
    fn map(&self) -> Run<PLMap> {
        let path = self.cli.map.as_ref().ok_or_else(|| Failure::Usage("this command needs --map".into()))?;
        Ok(read_map(path, Arc::clone(&self.complex))?)
    }

    fn eps(&self) -> Run<EpsSchedule> {
        let text = self.cli.eps.as_deref().ok_or_else(|| Failure::Usage("this command needs --eps".into()))?;
        Ok(EpsSchedule::parse(text)?)
    }

    fn base(&self) -> Run<String> {
        match &self.cli.base_vertex {
            Some(b) => {
                self.complex.vertex_index(b)?;
                Ok(b.clone())
            }
            None => Ok(self.complex.id(0).to_string()),
        }
    }

    fn perturb_options(&self) -> PerturbOptions {
        PerturbOptions { rank_tol: self.cli.rank_tol, retries: self.cli.retries, ..PerturbOptions::default() }
    }
}

fn max_displacement(a: &PLMap, b: &PLMap) -> f64 {
    a.images()
        .zip(b.images())
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn arclength_error(map: &PLMap) -> f64 {
    let root = map.domain().root();
    edge_arclengths(map)
        .iter()
        .zip(root.edges())
        .map(|(s, e)| {
            let len = root.length(e[0], e[1]);
            (s - len).abs() / len
        })
        .fold(0.0, f64::max)
}

fn run(scene: &Scene) -> Run<Output> {
    let c = &scene.complex;
    let validation = c.validate_metric(1e-10);
    if scene.command == Command::Validate {
        let report = json!({
            "command": "validate",
            "valid": validation.valid,
            "dimension": c.dimension(),
            "vertices": c.vertex_count(),
            "simplices": c.simplex_count(),
            "failures": validation.failures,
        });
        let mut out = Output::new(report);
        out.ledger_ok = validation.valid;
        return Ok(out);
    }
    if !validation.valid {
        return Err(Failure::Usage("complex fails the metric validation; run `validate` for details".into()));
    }
    let cli = &scene.cli;
    match scene.command {
        Command::Validate => unreachable!(),
        Command::Margin => {
            let m = scene.map()?.shortness_margin();
            Ok(Output::new(json!({
                "command": "margin",
                "margin": m.margin,
                "ratio": m.ratio,
                "short": m.is_short(),
                "strictly_short": m.is_strictly_short(),
                "worst_simplex": m.worst_simplex,
                "per_simplex": m.per_simplex,
            })))
        }
        Command::Genpos => {
            let f = scene.map()?;
            let k = 2 * c.dimension() + 1;
            let points: Vec<Vec<f64>> = f.images().map(<[f64]>::to_vec).collect();
            let genpos = if f.ambient_dim() >= k {
                Some(pliso::genpos::is_general_position(&points, k, cli.rank_tol)?)
            } else {
                None
            };
            let local = if f.ambient_dim() >= k {
                Some(verify_embedding(&f, EmbeddingCheck::LocalGenPos, cli.rank_tol)?)
            } else {
                None
            };
            let witness: Option<Vec<&str>> =
                genpos.as_ref().map(|g| g.witness.iter().map(|v| c.id(*v)).collect());
            Ok(Output::new(json!({
                "command": "genpos",
                "k": k,
                "general_position": genpos,
                "witness_ids": witness,
                "local_general_position": local,
                "exact": exact_verdict(&f),
            })))
        }
        Command::Perturb => {
            let f = scene.map()?;
            let base = scene.base()?;
            let g = perturb_to_embedding(&f, &scene.eps()?, &base, cli.seed, &scene.perturb_options())?;
            let m = g.shortness_margin();
            let report = json!({
                "command": "perturb",
                "base_vertex": base,
                "seed": cli.seed,
                "margin": m.margin,
                "strictly_short": m.is_strictly_short(),
                "max_displacement": max_displacement(&f, &g),
                "exact": exact_verdict(&g),
                "map": map_to_value(&g),
            });
            Ok(Output::new(report).with_map(&g))
        }
        Command::Pullback => {
            let f = scene.map()?;
            let graph = sample_graph(c, cli.level)?;
            let chain = cli.chain_eps.unwrap_or(graph.mesh());
            let nodes = graph.vertex_nodes();
            let d = isometry_defect(&f, &graph, chain, &all_pairs(&nodes))?;
            let rows: Vec<Value> = d
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "pair": r.pair,
                        "x": graph.refined().id(r.x),
                        "y": graph.refined().id(r.y),
                        "intrinsic": r.intrinsic,
                        "pullback": r.pullback,
                        "defect": r.defect,
                    })
                })
                .collect();
            let mut out = Output::new(json!({
                "command": "pullback",
                "level": cli.level,
                "mesh": graph.mesh(),
                "chain_eps": chain,
                "max_defect": d.max_defect,
                "rows": rows,
            }));
            out.sides.push(("csv", d.to_csv()));
            Ok(out)
        }
        Command::Fold => {
            let f = scene.map()?;
            let base = scene.base()?;
            let (h, plan) = isometrize_graph(&f, &scene.eps()?, &base)?;
            let report = json!({
                "command": "fold",
                "base_vertex": base,
                "vertices": h.domain().vertex_count(),
                "max_arclength_error": arclength_error(&h),
                "max_displacement_of_vertices": max_displacement_on_root(&f, &h),
                "folded_edges": plan.edges.iter().filter(|e| e.pieces > 1).count(),
                "map": map_to_value(&h),
                "complex": complex_to_value(h.domain()),
            });
            Ok(Output::new(report).with_map(&h).with_plan(&plan, cli.emit_plan))
        }
        Command::SplitPipeline => {
            let f = scene.map()?;
            let base = scene.base()?;
            let out = split_embed_pipeline(&f, &scene.eps()?, &base, cli.seed, &scene.perturb_options())?;
            let report = json!({
                "command": "split-pipeline",
                "base_vertex": base,
                "seed": cli.seed,
                "delta": out.delta,
                "level": out.level,
                "mu": out.mu,
                "caps": out.caps,
                "vertices": out.map.domain().vertex_count(),
                "max_arclength_error": arclength_error(&out.map),
                "exact": exact_verdict(&out.map),
                "map": map_to_value(&out.map),
                "complex": complex_to_value(out.map.domain()),
            });
            Ok(Output::new(report).with_map(&out.map).with_plan(&out.plan, cli.emit_plan))
        }
        Command::Iterate => {
            let f = scene.map()?;
            let base = scene.base()?;
            let (h, rep) = iterate_nash(&f, &scene.eps()?, &base, cli.iters, cli.seed, &NashOptions {
                perturb: scene.perturb_options(),
                ..NashOptions::default()
            })?;
            let report: Value = serde_json::from_str(&rep.to_json()).expect("report is valid JSON");
            let mut out = Output::new(json!({
                "command": "iterate",
                "base_vertex": base,
                "seed": cli.seed,
                "iterations": cli.iters,
                "all_passed": rep.all_passed(),
                "report": report,
            }))
            .with_map(&h);
            out.sides.push(("csv", rep.to_csv()));
            out.ledger_ok = rep.all_passed();
            Ok(out)
        }
    }
}

/// Largest vertex displacement of `h` against `f` at the original vertices.
fn max_displacement_on_root(f: &PLMap, h: &PLMap) -> f64 {
    (0..f.domain().vertex_count())
        .map(|v| {
            let id = f.domain().id(v);
            let w = h.domain().vertex_index(id).expect("refinements keep the original vertices");
            f.image(v).iter().zip(h.image(w)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".json").or_else(|| name.strip_suffix(".csv")).unwrap_or(&name);
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, text: &str) -> Run<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(cli: &Cli, out: &Output) -> Run<()> {
    let mut text = serde_json::to_string_pretty(&out.report).expect("reports serialize");
    text.push('\n');
    match &cli.out {
        None => print!("{text}"),
        Some(path) => {
            write(path, &text)?;
            for (suffix, body) in &out.sides {
                write(&side_path(path, suffix), body)?;
            }
        }
    }
    Ok(())
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Lib(e) if e.is_schema() => 1,
        Failure::Lib(e) if e.is_numerical() => 3,
        Failure::Lib(_) | Failure::Usage(_) => 2,
        Failure::Io(_) => 1,
        Failure::Ledger => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Run<()> {
        let command = match (cli.command, cli.cmd) {
            (Some(a), Some(b)) if a != b => return Err(Failure::Usage("positional command and --cmd disagree".into())),
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Failure::Usage("no command given".into())),
        };
        let complex = read_complex(&cli.complex)?;
        let scene = Scene { cli, command, complex };
        let out = run(&scene)?;
        emit(&scene.cli, &out)?;
        if !out.ledger_ok {
            return Err(if command == Command::Validate {
                Failure::Usage("metric validation failed".into())
            } else {
                Failure::Ledger
            });
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Lib(e) => e.to_string(),
                Failure::Usage(m) | Failure::Io(m) => m.clone(),
                Failure::Ledger => "ledger checks failed; see the report".into(),
            };
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&f))
        }
    }
}
