//! Concurrent query engine: runs sets of BFS/CC jobs sequentially or
//! concurrently against one in-memory graph, enforcing thread-context
//! capacity, and producing timing/counter reports.
//!
//! Sequential mode runs the jobs one after another, each on its own engine
//! over the shared memory (nothing resets between jobs — there are no
//! caches to warm). Concurrent mode spawns every job's root up front on a
//! single engine; oversubscription shows up as simulated time, context
//! exhaustion as an error carrying the job-set size.

use std::rc::Rc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algos::{self};
use crate::error::{SimError, SimResult};
use crate::exec::{Engine, Schedule};
use crate::graph::Graph;
use crate::memsys::SimMemory;

/// What a job runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JobKind {
    Bfs { source: u64 },
    Cc,
}

impl JobKind {
    pub fn name(&self) -> &'static str {
        match self {
            JobKind::Bfs { .. } => "bfs",
            JobKind::Cc => "cc",
        }
    }
}

/// One query in a job set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryJob {
    pub id: u64,
    pub kind: JobKind,
    /// Per-job live-thread budget; `None` uses the run default.
    pub contexts_requested: Option<u64>,
}

/// Options for a run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub schedule: Schedule,
    /// Default per-job live-thread budget.
    pub job_contexts: u64,
    /// Iteration cap for CC jobs.
    pub max_iter: u64,
    /// Record host elapsed time alongside simulated time.
    pub wallclock: bool,
}

impl RunOptions {
    pub fn for_machine(cfg: &crate::machine::MachineConfig) -> RunOptions {
        RunOptions {
            schedule: Schedule::Fifo,
            job_contexts: algos::default_worker_budget(cfg),
            max_iter: algos::DEFAULT_MAX_ITER,
            wallclock: false,
        }
    }
}

/// Per-job outcome row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRow {
    pub id: u64,
    pub kind: &'static str,
    pub source: Option<u64>,
    pub sim_cycles: u64,
    pub sim_time_s: f64,
    pub migrations: u64,
    pub local_reads: u64,
    pub local_writes: u64,
    pub remote_min: u64,
    pub remote_add: u64,
    pub remote_write: u64,
}

/// Aggregate counter totals over a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct AggregateCounters {
    pub migrations: u64,
    pub local_reads: u64,
    pub local_writes: u64,
    pub remote_min: u64,
    pub remote_add: u64,
    pub remote_write: u64,
}

impl AggregateCounters {
    pub fn total_remote_ops(&self) -> u64 {
        self.remote_min + self.remote_add + self.remote_write
    }
}

/// Timing/counter results of one sequential or concurrent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: &'static str,
    pub njobs: usize,
    pub kind_mix: String,
    pub makespan_cycles: u64,
    pub makespan_s: f64,
    /// Five-number summary (0/25/50/75/100%) of per-job simulated times.
    pub quantiles: [f64; 5],
    pub aggregate: AggregateCounters,
    pub jobs: Vec<JobRow>,
    pub wallclock_s: Option<f64>,
}

fn kind_mix(jobs: &[QueryJob]) -> String {
    let nbfs = jobs
        .iter()
        .filter(|j| matches!(j.kind, JobKind::Bfs { .. }))
        .count();
    let ncc = jobs.len() - nbfs;
    format!("bfs:{nbfs};cc:{ncc}")
}

fn spawn_job(
    engine: &Engine,
    graph: &Rc<Graph>,
    job: &QueryJob,
    opts: &RunOptions,
) -> SimResult<()> {
    let jid = engine.register_job();
    let budget = job.contexts_requested.unwrap_or(opts.job_contexts);
    match job.kind {
        JobKind::Bfs { source } => {
            algos::spawn_bfs_root(engine, Some(jid), graph, source, budget, None)
        }
        JobKind::Cc => {
            algos::spawn_cc_root(engine, Some(jid), graph, opts.max_iter, budget, false, None)
        }
    }
}

fn job_rows(
    jobs: &[QueryJob],
    engine: &Engine,
    clock_hz: f64,
    times: &[u64],
) -> Vec<JobRow> {
    let tallies = engine.job_tallies();
    jobs.iter()
        .zip(tallies.iter())
        .zip(times.iter())
        .map(|((job, tally), &cycles)| JobRow {
            id: job.id,
            kind: job.kind.name(),
            source: match job.kind {
                JobKind::Bfs { source } => Some(source),
                JobKind::Cc => None,
            },
            sim_cycles: cycles,
            sim_time_s: cycles as f64 / clock_hz,
            migrations: tally.migrations,
            local_reads: tally.local_reads,
            local_writes: tally.local_writes,
            remote_min: tally.remote_min,
            remote_add: tally.remote_add,
            remote_write: tally.remote_write,
        })
        .collect()
}

fn aggregate_delta(mem: &SimMemory, before: &crate::machine::CounterSnapshot) -> AggregateCounters {
    let d = mem.counters().snapshot().delta(before);
    AggregateCounters {
        migrations: d.total_migrations(),
        local_reads: d.total_local_reads(),
        local_writes: d.total_local_writes(),
        remote_min: d.total_remote_min(),
        remote_add: d.total_remote_add(),
        remote_write: d.total_remote_write(),
    }
}

/// Run the jobs one after another in listed order. Counters accumulate
/// across jobs (deltas are recorded per job); the makespan is the sum of
/// per-job simulated times.
pub fn run_sequential(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    jobs: &[QueryJob],
    opts: &RunOptions,
) -> SimResult<RunReport> {
    if jobs.is_empty() {
        return Err(SimError::InvalidArgument("job set is empty".into()));
    }
    let started = Instant::now();
    let before = mem.counters().snapshot();
    let clock_hz = mem.config().clock_hz;
    let mut times = Vec::with_capacity(jobs.len());
    let mut rows = Vec::with_capacity(jobs.len());
    for job in jobs {
        let mut engine = Engine::new(Rc::clone(mem), opts.schedule);
        spawn_job(&engine, graph, job, opts)?;
        engine.run().map_err(|e| e.with_job_set(jobs.len() as u64))?;
        let cycles = engine.clock_cycles();
        times.push(cycles);
        rows.extend(job_rows(std::slice::from_ref(job), &engine, clock_hz, &[cycles]));
    }
    let makespan_cycles: u64 = times.iter().sum();
    let per_job_s: Vec<f64> = rows.iter().map(|r| r.sim_time_s).collect();
    Ok(RunReport {
        mode: "seq",
        njobs: jobs.len(),
        kind_mix: kind_mix(jobs),
        makespan_cycles,
        makespan_s: makespan_cycles as f64 / clock_hz,
        quantiles: quantile_summary(&per_job_s)?,
        aggregate: aggregate_delta(mem, &before),
        jobs: rows,
        wallclock_s: opts.wallclock.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Run all jobs overlapped on one engine. Every job holds a reservation of
/// `contexts_requested + 1` hardware contexts (its worker budget plus the
/// orchestrator) for its lifetime; when the job set demands more contexts
/// than the machine has, the run fails with context exhaustion carrying
/// the job-set size. Per-job time is completion timestamp minus start
/// timestamp on the simulated clock; the makespan is the largest per-node
/// clock delta.
pub fn run_concurrent(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    jobs: &[QueryJob],
    opts: &RunOptions,
) -> SimResult<RunReport> {
    if jobs.is_empty() {
        return Err(SimError::InvalidArgument("job set is empty".into()));
    }
    let capacity = mem.config().total_contexts();
    let mut demanded = 0u64;
    for job in jobs {
        demanded += job.contexts_requested.unwrap_or(opts.job_contexts) + 1;
        if demanded > capacity {
            return Err(SimError::ContextExhaustion {
                demanded,
                capacity,
                job_set: Some(jobs.len() as u64),
            });
        }
    }
    let started = Instant::now();
    let before = mem.counters().snapshot();
    let clock_hz = mem.config().clock_hz;
    let mut engine = Engine::new(Rc::clone(mem), opts.schedule);
    for job in jobs {
        spawn_job(&engine, graph, job, opts).map_err(|e| e.with_job_set(jobs.len() as u64))?;
    }
    engine.run().map_err(|e| e.with_job_set(jobs.len() as u64))?;
    let makespan_cycles = engine.clock_cycles();
    let times: Vec<u64> = engine
        .job_tallies()
        .iter()
        .map(|t| t.end_cycles.expect("run completed") - t.start_cycles)
        .collect();
    let rows = job_rows(jobs, &engine, clock_hz, &times);
    let per_job_s: Vec<f64> = rows.iter().map(|r| r.sim_time_s).collect();
    Ok(RunReport {
        mode: "conc",
        njobs: jobs.len(),
        kind_mix: kind_mix(jobs),
        makespan_cycles,
        makespan_s: makespan_cycles as f64 / clock_hz,
        quantiles: quantile_summary(&per_job_s)?,
        aggregate: aggregate_delta(mem, &before),
        jobs: rows,
        wallclock_s: opts.wallclock.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Percentage improvement of `conc_time` over `seq_time`:
/// `100 * (seq - conc) / conc`.
pub fn improvement_percent(seq_time: f64, conc_time: f64) -> SimResult<f64> {
    if seq_time.is_nan() || conc_time.is_nan() || seq_time <= 0.0 || conc_time <= 0.0 {
        return Err(SimError::InvalidArgument(
            "improvement requires positive times".into(),
        ));
    }
    Ok(100.0 * (seq_time - conc_time) / conc_time)
}

/// Build a job mix: `round(total * bfs_fraction)` BFS jobs from
/// reproducibly pseudo-random unique sources, the remainder CC jobs.
pub fn make_mix(
    total: u64,
    bfs_fraction: f64,
    seed: u64,
    nvertices: u64,
) -> SimResult<Vec<QueryJob>> {
    if !(0.0..=1.0).contains(&bfs_fraction) {
        return Err(SimError::InvalidArgument(format!(
            "bfs_fraction {bfs_fraction} outside [0, 1]"
        )));
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    let nbfs = (total as f64 * bfs_fraction).round() as u64;
    if nbfs > nvertices {
        return Err(SimError::InvalidArgument(format!(
            "cannot draw {nbfs} unique sources from {nvertices} vertices"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = rand::seq::index::sample(&mut rng, nvertices as usize, nbfs as usize);
    let mut jobs = Vec::with_capacity(total as usize);
    for (id, source) in sources.iter().enumerate() {
        jobs.push(QueryJob {
            id: id as u64,
            kind: JobKind::Bfs {
                source: source as u64,
            },
            contexts_requested: None,
        });
    }
    for id in nbfs..total {
        jobs.push(QueryJob {
            id,
            kind: JobKind::Cc,
            contexts_requested: None,
        });
    }
    Ok(jobs)
}

/// Five-number summary (min, 25th, median, 75th, max) using linear
/// interpolation between closest ranks: for quantile q over n sorted
/// samples, h = (n - 1) * q and the value is
/// `x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])`.
pub fn quantile_summary(samples: &[f64]) -> SimResult<[f64; 5]> {
    if samples.is_empty() {
        return Err(SimError::InvalidArgument(
            "quantiles of an empty sample".into(),
        ));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(SimError::InvalidArgument(
            "quantiles require finite samples".into(),
        ));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let q = |p: f64| -> f64 {
        let h = (xs.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if frac == 0.0 || lo + 1 == xs.len() {
            xs[lo]
        } else {
            xs[lo] + frac * (xs[lo + 1] - xs[lo])
        }
    };
    Ok([q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)])
}

/// A complete benchmark outcome: the runs plus the end-to-end improvement
/// when both modes are present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub improvement_pct: Option<f64>,
    pub runs: Vec<RunReport>,
}

impl BenchReport {
    pub fn new(seed: u64, runs: Vec<RunReport>) -> BenchReport {
        let seq = runs.iter().find(|r| r.mode == "seq");
        let conc = runs.iter().find(|r| r.mode == "conc");
        let improvement_pct = match (seq, conc) {
            (Some(s), Some(c)) => improvement_percent(s.makespan_s, c.makespan_s).ok(),
            _ => None,
        };
        BenchReport {
            seed,
            improvement_pct,
            runs,
        }
    }

    /// Stable CSV rendering: a seed header comment, the column schema, one
    /// row per run. The improvement column is filled on concurrent rows
    /// when a sequential companion exists.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# seed = {}\n", self.seed));
        out.push_str(
            "mode,njobs,kind_mix,makespan_s,improvement_pct,q0,q25,q50,q75,q100,migrations,remote_ops\n",
        );
        for run in &self.runs {
            let improvement = match (run.mode, self.improvement_pct) {
                ("conc", Some(p)) => format!("{p:.3}"),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                run.mode,
                run.njobs,
                run.kind_mix,
                run.makespan_s,
                improvement,
                run.quantiles[0],
                run.quantiles[1],
                run.quantiles[2],
                run.quantiles[3],
                run.quantiles[4],
                run.aggregate.migrations,
                run.aggregate.total_remote_ops(),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use crate::machine::default_pathfinder_config;
    use crate::rmat;

    fn setup(nodes: usize, scale: u32, ef: u64, seed: u64) -> (Rc<SimMemory>, Rc<Graph>) {
        let params = rmat::RmatParams::new(scale, ef, seed);
        let edges = rmat::canonicalize(&rmat::generate_edges(&params).unwrap());
        let mem = Rc::new(SimMemory::new(default_pathfinder_config(nodes).unwrap()));
        let g = graph::build_on(&mem, params.nvertices(), &edges).unwrap();
        (mem, g)
    }

    fn bfs_jobs(sources: &[u64]) -> Vec<QueryJob> {
        sources
            .iter()
            .enumerate()
            .map(|(id, &source)| QueryJob {
                id: id as u64,
                kind: JobKind::Bfs { source },
                contexts_requested: None,
            })
            .collect()
    }

    #[test]
    fn single_job_sequential_makespan_is_job_time() {
        let (mem, g) = setup(4, 7, 8, 1);
        let mut opts = RunOptions::for_machine(mem.config());
        opts.wallclock = true;
        let r = run_sequential(&mem, &g, &bfs_jobs(&[3]), &opts).unwrap();
        assert_eq!(r.makespan_cycles, r.jobs[0].sim_cycles);
        assert_eq!(r.njobs, 1);
        assert!(r.wallclock_s.is_some_and(|w| w > 0.0));
    }

    #[test]
    fn identical_jobs_take_identical_time() {
        // No caches: repeating a query costs the same every time.
        let (mem, g) = setup(4, 7, 8, 2);
        let opts = RunOptions::for_machine(mem.config());
        let r = run_sequential(&mem, &g, &bfs_jobs(&[5, 5, 5]), &opts).unwrap();
        assert_eq!(r.jobs[0].sim_cycles, r.jobs[1].sim_cycles);
        assert_eq!(r.jobs[1].sim_cycles, r.jobs[2].sim_cycles);
    }

    #[test]
    fn sequential_makespan_is_sum_of_individual_runs() {
        let sources = [1u64, 9, 33, 70];
        let (mem, g) = setup(4, 7, 8, 3);
        let opts = RunOptions::for_machine(mem.config());
        let all = run_sequential(&mem, &g, &bfs_jobs(&sources), &opts).unwrap();
        let mut sum = 0;
        for &s in &sources {
            let (mem2, g2) = setup(4, 7, 8, 3);
            let single = run_sequential(&mem2, &g2, &bfs_jobs(&[s]), &opts).unwrap();
            sum += single.makespan_cycles;
        }
        assert_eq!(all.makespan_cycles, sum);
    }

    #[test]
    fn single_job_concurrent_equals_sequential() {
        let (mem, g) = setup(4, 7, 8, 4);
        let opts = RunOptions::for_machine(mem.config());
        let seq = run_sequential(&mem, &g, &bfs_jobs(&[11]), &opts).unwrap();
        let (mem2, g2) = setup(4, 7, 8, 4);
        let conc = run_concurrent(&mem2, &g2, &bfs_jobs(&[11]), &opts).unwrap();
        assert_eq!(seq.makespan_cycles, conc.makespan_cycles);
    }

    #[test]
    fn concurrency_beats_sequential_on_independent_searches() {
        // Large enough that per-node core work dominates the hottest
        // memory-side queue; tiny graphs are bound by the hub vertex's
        // cell in both modes.
        let sources = [1u64, 17, 40, 77, 90, 111, 230, 411];
        let (mem, g) = setup(8, 14, 8, 5);
        let mut opts = RunOptions::for_machine(mem.config());
        opts.job_contexts = 64;
        let seq = run_sequential(&mem, &g, &bfs_jobs(&sources), &opts).unwrap();
        let (mem2, g2) = setup(8, 14, 8, 5);
        let conc = run_concurrent(&mem2, &g2, &bfs_jobs(&sources), &opts).unwrap();
        assert!(
            conc.makespan_cycles < seq.makespan_cycles,
            "conc {} >= seq {}",
            conc.makespan_cycles,
            seq.makespan_cycles
        );
        let imp = improvement_percent(seq.makespan_s, conc.makespan_s).unwrap();
        assert!(imp > 0.0);
    }

    #[test]
    fn counter_additivity_concurrent() {
        // Aggregate counters equal the union of per-job deltas:
        // concurrency changes time, not op counts.
        let sources = [2u64, 31, 64];
        let (mem, g) = setup(4, 8, 8, 6);
        let opts = RunOptions::for_machine(mem.config());
        let r = run_concurrent(&mem, &g, &bfs_jobs(&sources), &opts).unwrap();
        let sum = |f: fn(&JobRow) -> u64| r.jobs.iter().map(f).sum::<u64>();
        assert_eq!(r.aggregate.migrations, sum(|j| j.migrations));
        assert_eq!(r.aggregate.local_reads, sum(|j| j.local_reads));
        assert_eq!(r.aggregate.local_writes, sum(|j| j.local_writes));
        assert_eq!(r.aggregate.remote_min, sum(|j| j.remote_min));
        assert_eq!(r.aggregate.remote_add, sum(|j| j.remote_add));
        assert_eq!(r.aggregate.remote_write, sum(|j| j.remote_write));
    }

    #[test]
    fn adding_a_job_never_reduces_concurrent_makespan() {
        let sources = [4u64, 9, 16, 25, 36];
        let opts_for = |mem: &SimMemory| RunOptions::for_machine(mem.config());
        let mut last = 0;
        for k in 1..=sources.len() {
            let (mem, g) = setup(4, 8, 8, 7);
            let r = run_concurrent(&mem, &g, &bfs_jobs(&sources[..k]), &opts_for(&mem)).unwrap();
            assert!(
                r.makespan_cycles >= last,
                "makespan dropped from {last} to {} at k = {k}",
                r.makespan_cycles
            );
            last = r.makespan_cycles;
        }
    }

    #[test]
    fn context_exhaustion_is_an_error_not_a_crash() {
        // A deliberately tiny machine: 2 nodes x 2 cores x 8 contexts = 32
        // hardware contexts. Six jobs at a 16-thread budget cannot all hold
        // their waves at once, while any one of them fits.
        let tiny = || {
            let mut cfg = default_pathfinder_config(2).unwrap();
            cfg.cores_per_node = 2;
            cfg.contexts_per_core = 8;
            let params = rmat::RmatParams::new(8, 8, 8);
            let edges = rmat::canonicalize(&rmat::generate_edges(&params).unwrap());
            let mem = Rc::new(SimMemory::new(cfg.validated().unwrap()));
            let g = graph::build_on(&mem, params.nvertices(), &edges).unwrap();
            (mem, g)
        };
        let (mem, g) = tiny();
        let mut opts = RunOptions::for_machine(mem.config());
        opts.job_contexts = 16;
        let jobs = bfs_jobs(&[1, 2, 3, 4, 5, 6]);
        match run_concurrent(&mem, &g, &jobs, &opts) {
            Err(SimError::ContextExhaustion { job_set, .. }) => {
                assert_eq!(job_set, Some(6));
            }
            other => panic!("expected context exhaustion, got {other:?}"),
        }
        // The same set runs fine sequentially.
        let (mem2, g2) = tiny();
        assert!(run_sequential(&mem2, &g2, &jobs, &opts).is_ok());
    }

    #[test]
    fn improvement_examples() {
        let i = improvement_percent(884.0, 467.0).unwrap();
        assert!((i - 89.293).abs() < 0.05, "{i}");
        assert!((81.0..=97.0).contains(&i));

        let i = improvement_percent(493.0, 226.0).unwrap();
        assert!((i - 118.14).abs() < 0.05, "{i}");
        assert!(i > 100.0);

        assert_eq!(improvement_percent(5.0, 5.0).unwrap(), 0.0);
        assert!(improvement_percent(0.0, 1.0).is_err());
    }

    #[test]
    fn make_mix_splits() {
        let jobs = make_mix(170, 0.8, 42, 1 << 14).unwrap();
        let nbfs = jobs
            .iter()
            .filter(|j| matches!(j.kind, JobKind::Bfs { .. }))
            .count();
        assert_eq!(nbfs, 136);
        assert_eq!(jobs.len() - nbfs, 34);

        let jobs = make_mix(700, 0.9, 42, 1 << 14).unwrap();
        let nbfs = jobs
            .iter()
            .filter(|j| matches!(j.kind, JobKind::Bfs { .. }))
            .count();
        assert_eq!(nbfs, 630);
        assert_eq!(jobs.len() - nbfs, 70);

        assert!(make_mix(0, 0.5, 1, 100).unwrap().is_empty());
    }

    #[test]
    fn make_mix_sources_unique_and_reproducible() {
        let a = make_mix(64, 1.0, 9, 4096).unwrap();
        let b = make_mix(64, 1.0, 9, 4096).unwrap();
        assert_eq!(a, b);
        let mut sources: Vec<u64> = a
            .iter()
            .filter_map(|j| match j.kind {
                JobKind::Bfs { source } => Some(source),
                JobKind::Cc => None,
            })
            .collect();
        assert_eq!(sources.len(), 64);
        sources.sort_unstable();
        sources.dedup();
        assert_eq!(sources.len(), 64);

        let c = make_mix(64, 1.0, 10, 4096).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(
            quantile_summary(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
            [1.0, 2.0, 3.0, 4.0, 5.0]
        );
        assert_eq!(quantile_summary(&[7.0]).unwrap(), [7.0; 5]);
        assert_eq!(
            quantile_summary(&[1.0, 2.0]).unwrap(),
            [1.0, 1.25, 1.5, 1.75, 2.0]
        );
        assert!(quantile_summary(&[]).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let run = || {
            let (mem, g) = setup(4, 7, 8, 12);
            let jobs = make_mix(6, 0.5, 3, g.nvertices).unwrap();
            let opts = RunOptions::for_machine(mem.config());
            let seq = run_sequential(&mem, &g, &jobs, &opts).unwrap();
            let conc = run_concurrent(&mem, &g, &jobs, &opts).unwrap();
            BenchReport::new(3, vec![seq, conc])
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn csv_schema() {
        let (mem, g) = setup(2, 6, 4, 13);
        let jobs = make_mix(4, 0.75, 5, g.nvertices).unwrap();
        let opts = RunOptions::for_machine(mem.config());
        let seq = run_sequential(&mem, &g, &jobs, &opts).unwrap();
        let conc = run_concurrent(&mem, &g, &jobs, &opts).unwrap();
        let csv = BenchReport::new(5, vec![seq, conc]).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# seed = 5");
        assert_eq!(
            lines.next().unwrap(),
            "mode,njobs,kind_mix,makespan_s,improvement_pct,q0,q25,q50,q75,q100,migrations,remote_ops"
        );
        let seq_row = lines.next().unwrap();
        let conc_row = lines.next().unwrap();
        assert!(seq_row.starts_with("seq,4,bfs:3;cc:1,"));
        assert!(conc_row.starts_with("conc,4,bfs:3;cc:1,"));
        // Improvement filled on the concurrent row only.
        assert_eq!(seq_row.split(',').nth(4).unwrap(), "");
        assert!(!conc_row.split(',').nth(4).unwrap().is_empty());
    }
}
