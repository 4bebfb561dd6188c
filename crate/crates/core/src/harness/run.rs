//! Multi-seed orchestration with an ordered JSONL sink.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::games::{run_regime, GameConfig, Regime, RunRecord};
use crate::harness::report::{aggregate, AggregateReport, SeedFailure};

/// SplitMix64 finalizer; a bijection on u64.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run: the master seed mixed with the run's seed.
pub fn child_seed(master: u64, seed: u64) -> u64 {
    master ^ splitmix64(seed)
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// `config.seed` is the master seed.
    pub config: GameConfig,
    pub regime: Regime,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        Ok(())
    }

    /// Config of the run for `seed`.
    pub fn run_config(&self, seed: u64) -> GameConfig {
        self.config.with_seed(child_seed(self.config.seed, seed))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Worker threads; 1 runs seeds in order on the calling thread.
    pub jobs: usize,
    /// Seeds not yet started when this budget is spent are skipped.
    pub max_seconds: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { jobs: 1, max_seconds: None }
    }
}

/// Runs one regime for `seed` as the sweep would; the record carries `seed`.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<RunRecord> {
    let mut record = run_regime::<f64>(spec.regime, &spec.run_config(seed))?.record;
    record.seed = seed;
    Ok(record)
}

enum Outcome {
    Done(Box<RunRecord>),
    Failed(String),
    Skipped,
}

struct Sink {
    records: Option<BufWriter<File>>,
    failures: Option<BufWriter<File>>,
}

impl Sink {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self { records: None, failures: None });
        };
        fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            Ok(BufWriter::new(OpenOptions::new().create(true).append(true).open(dir.join(name))?))
        };
        Ok(Self { records: Some(open("records.jsonl")?), failures: Some(open("failures.jsonl")?) })
    }

    fn line(w: &mut Option<BufWriter<File>>, value: &impl serde::Serialize) -> Result<()> {
        if let Some(w) = w {
            let text = serde_json::to_string(value).map_err(|e| Error::Domain(e.to_string()))?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Runs every seed of `spec` and aggregates the completed ones. Records are
/// appended to `records.jsonl` in seed-list order whatever the job count.
pub fn run_experiment(spec: &ExperimentSpec, opts: SweepOptions) -> Result<AggregateReport> {
    let mut report = AggregateReport::default();
    let records = run_into(spec, opts, &mut report, Instant::now())?;
    if !records.is_empty() {
        report.rows.push(aggregate(&records)?);
    }
    Ok(report)
}

/// Several regimes over one seed list, sharing one budget and one sink.
pub fn run_sweep(specs: &[ExperimentSpec], opts: SweepOptions) -> Result<AggregateReport> {
    let started = Instant::now();
    let mut report = AggregateReport::default();
    for spec in specs {
        let records = run_into(spec, opts, &mut report, started)?;
        if !records.is_empty() {
            report.rows.push(aggregate(&records)?);
        }
    }
    Ok(report)
}

fn run_into(
    spec: &ExperimentSpec,
    opts: SweepOptions,
    report: &mut AggregateReport,
    started: Instant,
) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let deadline = opts.max_seconds.map(|s| started + Duration::from_secs_f64(s.max(0.0)));
    let mut sink = Sink::open(spec.out_dir.as_deref())?;
    let next = AtomicUsize::new(0);
    let n = spec.seeds.len();
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let work = |tx: mpsc::Sender<(usize, Outcome)>| loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            break;
        }
        let outcome = if deadline.is_some_and(|d| Instant::now() >= d) {
            Outcome::Skipped
        } else {
            match run_seed(spec, spec.seeds[i]) {
                Ok(r) => Outcome::Done(Box::new(r)),
                Err(e) => Outcome::Failed(e.to_string()),
            }
        };
        if tx.send((i, outcome)).is_err() {
            break;
        }
    };

    let mut done = Vec::new();
    let mut pending = BTreeMap::new();
    let mut next_out = 0;
    let mut emit = |i: usize, outcome: Outcome, sink: &mut Sink| -> Result<()> {
        let seed = spec.seeds[i];
        match outcome {
            Outcome::Done(r) => {
                Sink::line(&mut sink.records, &*r)?;
                done.push(*r);
            }
            Outcome::Failed(error) => {
                let f = SeedFailure { regime: spec.regime, seed, error };
                Sink::line(&mut sink.failures, &f)?;
                report.failures.push(f);
            }
            Outcome::Skipped => report.skipped.push((spec.regime, seed)),
        }
        Ok(())
    };

    std::thread::scope(|scope| -> Result<()> {
        for _ in 1..opts.jobs.max(1) {
            let tx = tx.clone();
            scope.spawn(move || work(tx));
        }
        if opts.jobs <= 1 {
            work(tx);
        } else {
            drop(tx);
        }
        for (i, outcome) in rx {
            pending.insert(i, outcome);
            while let Some(o) = pending.remove(&next_out) {
                emit(next_out, o, &mut sink)?;
                next_out += 1;
            }
        }
        Ok(())
    })?;
    Ok(done)
}
