//! The `pathsim` command line: graph generation, building, the two
//! kernels, the concurrent-vs-sequential benchmark and an oracle-backed
//! verification pass.
//!
//! Exit codes: 0 success, 2 usage error, 3 context exhaustion, 4
//! verification failure, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algos::{self, KernelOptions};
use crate::edgefile::{self, EdgeFileMeta};
use crate::error::{SimError, SimResult};
use crate::graph::Graph;
use crate::machine::MachineConfig;
use crate::memsys::SimMemory;
use crate::oracle;
use crate::queries::{self, BenchReport, RunOptions};
use crate::rmat::{self, RmatParams};

/// Environment variable consulted for a machine description file when
/// `--machine` is absent.
pub const MACHINE_ENV: &str = "PATHSIM_MACHINE";

#[derive(Parser)]
#[command(
    name = "pathsim",
    version,
    about = "Simulator of a migratory-thread machine with memory-side processing, \
             plus a concurrent graph-query benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MachineArgs {
    /// Machine description file (one `key = value` per line). Falls back
    /// to $PATHSIM_MACHINE, then to the 8-node defaults.
    #[arg(long)]
    machine: Option<PathBuf>,
    /// Override one machine key, e.g. --set nodes=2. Repeatable; applied
    /// after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl MachineArgs {
    fn resolve(&self) -> SimResult<MachineConfig> {
        let mut cfg = match &self.machine {
            Some(path) => MachineConfig::from_kv_file(path)?,
            None => match std::env::var_os(MACHINE_ENV) {
                Some(path) => MachineConfig::from_kv_file(Path::new(&path))?,
                None => crate::machine::default_pathfinder_config(8)?,
            },
        };
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        cfg.validated()
    }
}

#[derive(Args)]
struct JobArgs {
    /// Per-job live-thread budget (default: contexts_per_node * nodes / 16).
    #[arg(long)]
    job_contexts: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a canonical edge file from the recursive-matrix model.
    Generate {
        /// log2 of the vertex count.
        #[arg(long)]
        scale: u32,
        /// Generated edges per vertex.
        #[arg(long, default_value_t = 16)]
        edgefactor: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Quadrant probabilities as `a,b,c,d`.
        #[arg(long, value_name = "A,B,C,D")]
        probs: Option<String>,
        /// Output edge file; a `<out>.meta` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Load an edge file into simulated memory and print structure stats.
    Build {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        machine: MachineArgs,
    },
    /// Run one breadth-first search.
    Bfs {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        source: u64,
        /// Write `<out>.levels.bin` and `<out>.parents.bin` (little-endian
        /// 64-bit words).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Run connected components.
    Cc {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = algos::DEFAULT_MAX_ITER)]
        max_iter: u64,
        /// Write `<out>.labels.bin`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Run a query set sequentially, concurrently or both, and report.
    Bench {
        #[arg(long)]
        graph: PathBuf,
        /// Number of queries in the set.
        #[arg(long)]
        queries: u64,
        /// seq, conc or both.
        #[arg(long, default_value = "both")]
        mode: String,
        /// Fraction of BFS jobs in the mix (remainder are CC).
        #[arg(long, default_value_t = 1.0)]
        mix_bfs: f64,
        /// Seed for source selection; logged in every report header.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write a JSON report with per-job rows.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Record host elapsed time alongside simulated time.
        #[arg(long)]
        wallclock: bool,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Check the kernels against independent oracles on a given graph.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        /// Number of BFS sources to check.
        #[arg(long, default_value_t = 4)]
        sources: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        job: JobArgs,
    },
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::InvalidArgument(_) | SimError::InvalidAddress(_) => 2,
                SimError::ContextExhaustion { .. } => 3,
                SimError::VerificationFailure(_) => 4,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command) -> SimResult<()> {
    match cmd {
        Command::Generate {
            scale,
            edgefactor,
            seed,
            probs,
            out,
        } => cmd_generate(scale, edgefactor, seed, probs.as_deref(), &out),
        Command::Build { graph, machine } => cmd_build(&graph, &machine),
        Command::Bfs {
            graph,
            source,
            out,
            machine,
            job,
        } => cmd_bfs(&graph, source, out.as_deref(), &machine, &job),
        Command::Cc {
            graph,
            max_iter,
            out,
            machine,
            job,
        } => cmd_cc(&graph, max_iter, out.as_deref(), &machine, &job),
        Command::Bench {
            graph,
            queries,
            mode,
            mix_bfs,
            seed,
            csv,
            json,
            wallclock,
            machine,
            job,
        } => cmd_bench(
            &graph, queries, &mode, mix_bfs, seed, csv, json, wallclock, &machine, &job,
        ),
        Command::Verify {
            graph,
            sources,
            seed,
            machine,
            job,
        } => cmd_verify(&graph, sources, seed, &machine, &job),
    }
}

fn parse_probs(params: &mut RmatParams, probs: &str) -> SimResult<()> {
    let parts: Vec<&str> = probs.split(',').collect();
    if parts.len() != 4 {
        return Err(SimError::InvalidArgument(
            "--probs expects four comma-separated values".into(),
        ));
    }
    let vals: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| SimError::InvalidArgument(format!("bad probability {p:?}")))
        })
        .collect::<SimResult<_>>()?;
    params.a = vals[0];
    params.b = vals[1];
    params.c = vals[2];
    params.d = vals[3];
    Ok(())
}

fn cmd_generate(
    scale: u32,
    edgefactor: u64,
    seed: u64,
    probs: Option<&str>,
    out: &Path,
) -> SimResult<()> {
    let mut params = RmatParams::new(scale, edgefactor, seed);
    if let Some(p) = probs {
        parse_probs(&mut params, p)?;
    }
    let params = params.validated()?;
    let raw = rmat::generate_edges(&params)?;
    let raw_count = raw.len();
    let edges = rmat::canonicalize(&raw);
    let meta = EdgeFileMeta {
        nvertices: params.nvertices(),
        nedges: edges.len() as u64,
        params: Some(params),
    };
    edgefile::write_edges(out, &meta, &edges)?;
    println!("generated {}", out.display());
    println!("vertices = {}", meta.nvertices);
    println!("raw tuples = {raw_count}");
    println!("canonical edges = {}", meta.nedges);
    println!("seed = {seed}");
    Ok(())
}

fn load_graph(path: &Path, cfg: &MachineConfig) -> SimResult<(Rc<SimMemory>, Rc<Graph>)> {
    let mem = Rc::new(SimMemory::new(cfg.clone()));
    let graph = Rc::new(crate::graph::load(&mem, path)?);
    Ok((mem, graph))
}

fn cmd_build(path: &Path, machine: &MachineArgs) -> SimResult<()> {
    let cfg = machine.resolve()?;
    let (mem, graph) = load_graph(path, &cfg)?;
    println!("graph = {}", path.display());
    println!("nodes = {}", cfg.nodes);
    println!("vertices = {}", graph.nvertices);
    println!("directed edges = {}", graph.nedges_directed);
    let degrees: Vec<u64> = (0..graph.nvertices)
        .map(|v| graph.host_degree(&mem, v))
        .collect::<SimResult<_>>()?;
    let total: u64 = degrees.iter().sum();
    if total != graph.nedges_directed || !total.is_multiple_of(2) {
        return Err(SimError::VerificationFailure(
            "degree sum does not match directed edge count".into(),
        ));
    }
    println!("max degree = {}", degrees.iter().max().unwrap_or(&0));
    for node in 0..cfg.nodes {
        println!("words on node {node} = {}", mem.used_words_on(node));
    }
    Ok(())
}

fn dump_words(path: &Path, words: &[u64]) -> SimResult<()> {
    let mut f = fs::File::create(path)?;
    let mut buf = Vec::with_capacity(words.len() * 8);
    for w in words {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    f.write_all(&buf)?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut os = prefix.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

fn kernel_options(cfg: &MachineConfig, job: &JobArgs) -> KernelOptions {
    let mut opts = KernelOptions::for_machine(cfg);
    if let Some(b) = job.job_contexts {
        opts = opts.with_budget(b);
    }
    opts
}

fn print_counters(
    before: &crate::machine::CounterSnapshot,
    after: &crate::machine::CounterSnapshot,
    clock_hz: f64,
) {
    let delta = after.delta(before);
    println!(
        "simulated time s = {:.6}",
        after.makespan_since(before) as f64 / clock_hz
    );
    println!("migrations = {}", delta.total_migrations());
    println!("local reads = {}", delta.total_local_reads());
    println!("local writes = {}", delta.total_local_writes());
    println!(
        "remote ops = {} (min {}, add {}, write {})",
        delta.total_remote_ops(),
        delta.total_remote_min(),
        delta.total_remote_add(),
        delta.total_remote_write()
    );
}

fn cmd_bfs(
    path: &Path,
    source: u64,
    out: Option<&Path>,
    machine: &MachineArgs,
    job: &JobArgs,
) -> SimResult<()> {
    let cfg = machine.resolve()?;
    let (mem, graph) = load_graph(path, &cfg)?;
    let opts = kernel_options(&cfg, job);
    let before = mem.counters().snapshot();
    let result = algos::bfs(&mem, &graph, source, &opts)?;
    let after = mem.counters().snapshot();
    println!("source = {source}");
    println!("levels = {}", result.levels_count);
    println!(
        "reached = {}",
        result
            .levels
            .iter()
            .filter(|&&l| l != algos::UNREACHED)
            .count()
    );
    print_counters(&before, &after, cfg.clock_hz);
    if let Some(prefix) = out {
        dump_words(&with_suffix(prefix, ".levels.bin"), &result.levels)?;
        dump_words(&with_suffix(prefix, ".parents.bin"), &result.parents)?;
        println!("wrote {}.levels.bin and {}.parents.bin", prefix.display(), prefix.display());
    }
    Ok(())
}

fn cmd_cc(
    path: &Path,
    max_iter: u64,
    out: Option<&Path>,
    machine: &MachineArgs,
    job: &JobArgs,
) -> SimResult<()> {
    let cfg = machine.resolve()?;
    let (mem, graph) = load_graph(path, &cfg)?;
    let opts = kernel_options(&cfg, job);
    let before = mem.counters().snapshot();
    let result = algos::connected_components(&mem, &graph, max_iter, &opts)?;
    let after = mem.counters().snapshot();
    let mut components = result.labels.clone();
    components.sort_unstable();
    components.dedup();
    println!("components = {}", components.len());
    println!("iterations = {}", result.iterations);
    println!("converged = {}", result.converged);
    print_counters(&before, &after, cfg.clock_hz);
    if let Some(prefix) = out {
        dump_words(&with_suffix(prefix, ".labels.bin"), &result.labels)?;
        println!("wrote {}.labels.bin", prefix.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    path: &Path,
    njobs: u64,
    mode: &str,
    mix_bfs: f64,
    seed: u64,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
    wallclock: bool,
    machine: &MachineArgs,
    job: &JobArgs,
) -> SimResult<()> {
    if njobs == 0 {
        return Err(SimError::InvalidArgument(
            "--queries must be at least 1".into(),
        ));
    }
    let modes: Vec<&str> = match mode {
        "seq" => vec!["seq"],
        "conc" => vec!["conc"],
        "both" => vec!["seq", "conc"],
        other => {
            return Err(SimError::InvalidArgument(format!(
                "--mode must be seq, conc or both, got {other:?}"
            )))
        }
    };
    let cfg = machine.resolve()?;
    let (mem, graph) = load_graph(path, &cfg)?;
    let jobs = queries::make_mix(njobs, mix_bfs, seed, graph.nvertices)?;
    let mut opts = RunOptions::for_machine(&cfg);
    if let Some(b) = job.job_contexts {
        opts.job_contexts = b.max(1);
    }
    opts.wallclock = wallclock;
    let mut runs = Vec::new();
    for m in modes {
        let report = match m {
            "seq" => queries::run_sequential(&mem, &graph, &jobs, &opts)?,
            _ => queries::run_concurrent(&mem, &graph, &jobs, &opts)?,
        };
        runs.push(report);
    }
    let bench = BenchReport::new(seed, runs);
    let rendered = bench.to_csv();
    match csv {
        Some(p) => {
            fs::write(&p, &rendered)?;
            println!("wrote {}", p.display());
            if let Some(i) = bench.improvement_pct {
                println!("improvement pct = {i:.3}");
            }
        }
        None => print!("{rendered}"),
    }
    if let Some(p) = json {
        fs::write(&p, bench.to_json())?;
    }
    Ok(())
}

fn cmd_verify(
    path: &Path,
    nsources: u64,
    seed: u64,
    machine: &MachineArgs,
    job: &JobArgs,
) -> SimResult<()> {
    let cfg = machine.resolve()?;
    // The oracles run on the edge list itself, independent of the
    // simulated storage.
    let (meta, edges) = edgefile::read_edges(path)?;
    let (mem, graph) = load_graph(path, &cfg)?;
    let opts = kernel_options(&cfg, job);
    let adj = oracle::adjacency(meta.nvertices, &edges);
    let mut failures = Vec::new();

    let cc = algos::connected_components(&mem, &graph, algos::DEFAULT_MAX_ITER, &opts)?;
    match (
        cc.converged,
        oracle::check_cc(meta.nvertices, &edges, &cc.labels),
    ) {
        (true, Ok(())) => println!("cc: PASS"),
        (false, _) => {
            println!("cc: FAIL (did not converge)");
            failures.push("cc convergence".to_string());
        }
        (_, Err(e)) => {
            println!("cc: FAIL ({e})");
            failures.push(format!("cc: {e}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(
        &mut rng,
        meta.nvertices as usize,
        (nsources as usize).min(meta.nvertices as usize),
    );
    for source in picks.iter() {
        let source = source as u64;
        let r = algos::bfs(&mem, &graph, source, &opts)?;
        match oracle::check_bfs(&adj, source, &r.levels, &r.parents) {
            Ok(()) => println!("bfs source {source}: PASS"),
            Err(e) => {
                println!("bfs source {source}: FAIL ({e})");
                failures.push(format!("bfs {source}: {e}"));
            }
        }
    }

    if failures.is_empty() {
        println!("verify: PASS");
        Ok(())
    } else {
        Err(SimError::VerificationFailure(failures.join("; ")))
    }
}
