//! `wifi-mode` command line: one subcommand per pipeline stage.
//!
//! Every artifact gets a `<artifact>.manifest.json` sidecar holding the run
//! manifest plus the wall-clock time. Model files and sweep summaries also
//! embed the manifest without the time, so reruns stay byte-identical.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{confusion, fmt_pct, metrics, with_jobs, SweepSpec, DEFAULT_FOLDS, SAMPLE_RATES};
use crate::features::FeatureTable;
use crate::mode::TravelMode;
use crate::pipeline::{datasets, featurize, ingest};
use crate::resnet::{gradcheck_suite, ArchitectureSpec, Model, ModelConfig};
use crate::seed;
use crate::sim::{simulate, ScenarioSpec};
use crate::trace::{read_log, read_roster, read_trip_rows, reattach_trips, write_trips, PodDeployment, DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S};
use crate::trainer::{evaluate_loss, train_semisupervised, PseudoLabelConfig, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ARCH: &str = "ResNet122";
pub const DEFAULT_CONFIG: &str = "c10";
pub const DEFAULT_SAMPLE_RATE: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(name = "wifi-mode", version, about = "Travel mode detection from Wi-Fi sensor logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for parallel runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl TrainArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic log, roster, ground truth and deployment.
    Simulate {
        /// Scenario JSON; defaults apply to missing fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sessionize a log into visits and trips, labelled by roster.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        roster: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IDLE_GAP_S)]
        idle_gap: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_TRIP_DURATION_S)]
        max_trip: f64,
        /// Trip CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the fifteen raw features of every trip.
    Featurize {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        trips: PathBuf,
        #[arg(long)]
        deployment: PathBuf,
        /// Feature CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model with pseudo-labelling on the unlabelled rows.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = DEFAULT_ARCH)]
        arch: String,
        #[arg(long, default_value = DEFAULT_CONFIG)]
        config: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: f64,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[command(flatten)]
        train: TrainArgs,
        /// Per-epoch loss and accuracy CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Model JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Confusion matrix and metrics of a model on labelled feature rows.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Metrics JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The sixteen-configuration sweep with a 20% validation split.
    SweepConfig {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "ResNet34")]
        arch: String,
        #[command(flatten)]
        train: TrainArgs,
        /// Record per-run wall-clock seconds.
        #[arg(long)]
        timing: bool,
        /// Directory for config_sweep.csv and config_sweep.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Architecture by sample-rate cross-validation sweep plus a plain baseline.
    SweepArch {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = DEFAULT_CONFIG)]
        config: String,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        /// Comma-separated architectures (default: the eight sweep depths).
        #[arg(long, value_delimiter = ',')]
        archs: Option<Vec<String>>,
        /// Comma-separated sample rates (default: 0 to 1 in steps of 0.2).
        #[arg(long = "sample-rate", value_delimiter = ',')]
        sample_rates: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        timing: bool,
        /// Directory for arch_sweep.csv and arch_sweep.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient check of every configuration.
    Gradcheck {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Results JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub overrides: BTreeMap<String, Value>,
    pub master_seed: u64,
}

impl RunManifest {
    fn new(subcommand: &str, master_seed: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            overrides: BTreeMap::new(),
            master_seed,
        }
    }

    fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.into(), path.display().to_string());
        self
    }

    fn output(mut self, key: &str, path: &Path) -> Self {
        self.outputs.insert(key.into(), path.display().to_string());
        self
    }

    fn set(mut self, key: &str, value: impl Serialize) -> Self {
        self.overrides.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    /// Writes `<artifact>.manifest.json` with the current time added.
    fn write_sidecar(&self, artifact: &Path) -> Result<()> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut value = self.to_value();
        value["timestamp_unix_s"] = json!(now);
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = artifact.with_file_name(name);
        let text = serde_json::to_string_pretty(&value)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn parse_config(s: &str) -> Result<ModelConfig> {
    s.parse()
}

fn parse_arch(s: &str) -> Result<ArchitectureSpec> {
    s.parse()
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn load_features(path: &Path) -> Result<FeatureTable> {
    FeatureTable::read(path)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Usage errors print help and return 2.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { scenario, seed, jobs, out } => {
            let mut spec = match &scenario {
                Some(p) => ScenarioSpec::load(p)?,
                None => ScenarioSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let output = with_jobs(jobs, || simulate(&spec))??;
            output.write(&out)?;
            let mut m = RunManifest::new("simulate", spec.seed).output("dir", &out);
            if let Some(p) = &scenario {
                m = m.input("scenario", p);
            }
            m.write_sidecar(&out.join("log.csv"))?;
            println!(
                "simulated {} records, {} trips ({} labelled devices) into {}",
                output.records.len(),
                output.truth.len(),
                output.roster.len(),
                out.display()
            );
            Ok(())
        }
        Command::Ingest { log, roster, idle_gap, max_trip, out } => {
            let parsed = read_log(&log)?;
            for e in &parsed.errors {
                eprintln!("{}:{}: {}", log.display(), e.line, e.message);
            }
            let roster_map = read_roster(&roster)?;
            let ingested = ingest(&parsed.records, &roster_map, idle_gap, max_trip)?;
            create_parent(&out)?;
            write_trips(&ingested.trips(), &out)?;
            RunManifest::new("ingest", 0)
                .input("log", &log)
                .input("roster", &roster)
                .output("trips", &out)
                .set("idle_gap_s", idle_gap)
                .set("max_trip_s", max_trip)
                .write_sidecar(&out)?;
            let d = ingested.discarded;
            println!(
                "{} records ({} bad lines), {} visits, {} labelled and {} unlabelled trips; discarded {} same-pod, {} non-positive gap, {} too long",
                parsed.records.len(),
                parsed.errors.len(),
                ingested.visits,
                ingested.labelled.len(),
                ingested.unlabelled.len(),
                d.same_pod,
                d.non_positive_gap,
                d.too_long
            );
            Ok(())
        }
        Command::Featurize { log, trips, deployment, out } => {
            let parsed = read_log(&log)?;
            let rows = read_trip_rows(&trips)?;
            let dep = PodDeployment::load(&deployment)?;
            let trips_full = reattach_trips(&rows, &parsed.records)?;
            let table = featurize(&trips_full, &dep)?;
            create_parent(&out)?;
            table.write(&out)?;
            RunManifest::new("featurize", 0)
                .input("log", &log)
                .input("trips", &trips)
                .input("deployment", &deployment)
                .output("features", &out)
                .write_sidecar(&out)?;
            println!("{} feature rows written to {}", table.len(), out.display());
            Ok(())
        }
        Command::Train { features, arch, config, sample_rate, rounds, train, trace, out } => {
            let table = load_features(&features)?;
            let (data, pool) = datasets(&table)?;
            let (cfg, spec) = (parse_config(&config)?, parse_arch(&arch)?);
            let mut model = Model::build(cfg, spec, seed::derive_seed(train.seed, 1))?;
            model.fit_normalization(&data.x)?;
            let plc = PseudoLabelConfig { rounds, ..PseudoLabelConfig::new(sample_rate, train.epochs) };
            let tc = TrainConfig { seed: seed::derive_seed(train.seed, 2), ..train.train_config() };
            let outcome = train_semisupervised(&mut model, &data, &pool, &plc, &tc, None)?;
            let manifest = RunManifest::new("train", train.seed)
                .input("features", &features)
                .output("model", &out)
                .set("arch", spec.name())
                .set("config", cfg.name())
                .set("sample_rate", sample_rate)
                .set("rounds", rounds)
                .set("epochs", train.epochs)
                .set("batch_size", train.batch_size);
            create_parent(&out)?;
            model.save(&out, Some(manifest.to_value()))?;
            manifest.write_sidecar(&out)?;
            if let Some(t) = &trace {
                create_parent(t)?;
                outcome.trace.write(t)?;
            }
            let (_, acc) = evaluate_loss(&model, &data)?;
            println!(
                "{} {} trained on {} labelled and {} pseudo-labelled rows; final loss {:.4}, train accuracy {:.1}%",
                spec.name(),
                cfg,
                data.len(),
                outcome.pools.iter().map(Vec::len).sum::<usize>(),
                outcome.trace.final_train_loss().unwrap_or(f64::NAN),
                100.0 * acc
            );
            Ok(())
        }
        Command::Evaluate { model, features, out } => {
            let m = Model::load(&model)?;
            let (data, _) = datasets(&load_features(&features)?)?;
            if data.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let predicted = m.predict(&data.x)?;
            let report = metrics(&confusion(&data.labels, &predicted)?);
            print!("{}", report.confusion);
            for (i, mode) in TravelMode::ALL.iter().enumerate() {
                println!(
                    "{mode}: recall {} precision {}",
                    fmt_pct(report.recall[i]),
                    fmt_pct(report.precision[i])
                );
            }
            println!("accuracy {}", fmt_pct(report.accuracy));
            if let Some(p) = &out {
                create_parent(p)?;
                let text = serde_json::to_string_pretty(&report)? + "\n";
                std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
                RunManifest::new("evaluate", m.seed)
                    .input("model", &model)
                    .input("features", &features)
                    .output("metrics", p)
                    .write_sidecar(p)?;
            }
            Ok(())
        }
        Command::SweepConfig { features, arch, train, timing, out } => {
            let (data, _) = datasets(&load_features(&features)?)?;
            let base = parse_arch(&arch)?;
            let mut spec = SweepSpec::config_grid(train.train_config(), train.seed);
            for c in &mut spec.cells {
                c.arch = base;
            }
            spec.timing = timing;
            let manifest = RunManifest::new("sweep-config", train.seed)
                .input("features", &features)
                .output("dir", &out)
                .set("arch", base.name())
                .set("epochs", train.epochs)
                .set("batch_size", train.batch_size);
            run_sweep_command(&spec, &data, &crate::nn::Matrix::zeros(0, data.x.cols()), train.jobs, manifest, &out, "config_sweep")
        }
        Command::SweepArch { features, config, folds, archs, sample_rates, rounds, train, timing, out } => {
            let (data, pool) = datasets(&load_features(&features)?)?;
            let cfg = parse_config(&config)?;
            let mut spec = SweepSpec::architecture_grid(cfg, train.train_config(), folds, train.seed);
            if archs.is_some() || sample_rates.is_some() {
                let archs: Vec<ArchitectureSpec> = match &archs {
                    Some(list) => list.iter().map(|a| parse_arch(a)).collect::<Result<_>>()?,
                    None => ArchitectureSpec::sweep(),
                };
                let rates = sample_rates.clone().unwrap_or_else(|| SAMPLE_RATES.to_vec());
                spec.cells.retain(|c| archs.contains(&c.arch) && rates.contains(&c.sample_rate) || !c.arch.residual);
            }
            spec.rounds = rounds;
            spec.timing = timing;
            let manifest = RunManifest::new("sweep-arch", train.seed)
                .input("features", &features)
                .output("dir", &out)
                .set("config", cfg.name())
                .set("folds", folds)
                .set("archs", &archs)
                .set("sample_rates", &sample_rates)
                .set("rounds", rounds)
                .set("epochs", train.epochs)
                .set("batch_size", train.batch_size);
            run_sweep_command(&spec, &data, &pool, train.jobs, manifest, &out, "arch_sweep")
        }
        Command::Gradcheck { seed, out } => {
            let cases = gradcheck_suite(seed)?;
            let mut failed = 0;
            let mut rows = Vec::new();
            for c in &cases {
                let r = &c.report;
                println!(
                    "{} {:<10} {:<5?} checked {:>5} max rel {:.3e} {}",
                    c.config,
                    c.arch.name(),
                    c.phase,
                    r.checked,
                    r.max_rel_error,
                    if r.passed() { "ok" } else { "FAIL" }
                );
                failed += usize::from(!r.passed());
                rows.push(json!({
                    "config": c.config.name(),
                    "arch": c.arch.name(),
                    "phase": format!("{:?}", c.phase),
                    "checked": r.checked,
                    "max_rel_error": r.max_rel_error,
                    "passed": r.passed(),
                }));
            }
            if let Some(p) = &out {
                create_parent(p)?;
                let doc = json!({ "manifest": RunManifest::new("gradcheck", seed).to_value(), "cases": rows });
                std::fs::write(p, serde_json::to_string_pretty(&doc)? + "\n").map_err(|e| Error::io(p, e))?;
            }
            if failed > 0 {
                return Err(Error::InvalidArgument(format!("{failed} of {} gradient checks failed", cases.len())));
            }
            println!("all {} gradient checks passed", cases.len());
            Ok(())
        }
    }
}

fn run_sweep_command(
    spec: &SweepSpec,
    data: &crate::trainer::Dataset,
    pool: &crate::nn::Matrix,
    jobs: usize,
    manifest: RunManifest,
    out: &Path,
    stem: &str,
) -> Result<()> {
    let mut report = with_jobs(jobs, || crate::eval::run_sweep(spec, data, pool))??;
    report.summary.manifest = Some(manifest.to_value());
    report.write(out, stem)?;
    manifest.write_sidecar(&out.join(format!("{stem}.csv")))?;
    for c in &report.summary.cells {
        println!(
            "{:<16} val {:>6} ± {:<5} train {:>6}{}",
            c.cell,
            fmt_pct(c.mean_val_acc),
            fmt_pct(c.std_val_acc),
            fmt_pct(c.mean_train_acc),
            if c.failed.is_empty() { String::new() } else { format!("  ({} failed)", c.failed.len()) }
        );
    }
    if let Some(best) = &report.summary.best {
        println!("best: {best}");
    }
    Ok(())
}
