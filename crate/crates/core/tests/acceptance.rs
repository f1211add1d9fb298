//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --test acceptance -- 1 3 9`.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::Rng as _;

use wifi_mode_detect::cli::dispatch;
use wifi_mode_detect::eval::{cross_validate, fmt_pct, metrics, run_architecture_sweep, ConfusionMatrix, CvResult, CvSpec};
use wifi_mode_detect::nn::{one_hot, Matrix, Phase};
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::resnet::{gradcheck_suite, ArchitectureSpec, Model, ModelConfig};
use wifi_mode_detect::seed;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::{
    combined_loss, train_semisupervised, train_supervised, AlphaSchedule, Dataset, PseudoLabelConfig, TrainConfig,
};
use wifi_mode_detect::TravelMode;

const BENCHMARK_SEED: u64 = 42;
const BENCHMARK_EPOCHS: usize = 200;
const BENCHMARK_FOLDS: usize = 10;
const SWEEP_FOLDS: usize = 3;
const SWEEP_EPOCHS: usize = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Bench {
    data: Dataset,
    pool: Matrix,
    resnet34: Option<CvResult>,
}

impl Bench {
    fn load() -> Bench {
        let (data, pool) = benchmark(&ScenarioSpec { seed: BENCHMARK_SEED, ..ScenarioSpec::default() }).expect("benchmark");
        Bench { data, pool, resnet34: None }
    }

    fn cv(&self, arch: &str, rate: f64) -> CvResult {
        let spec = CvSpec {
            config: "c10".parse().unwrap(),
            arch: arch.parse().unwrap(),
            plc: PseudoLabelConfig::new(rate, BENCHMARK_EPOCHS),
            train: TrainConfig { epochs: BENCHMARK_EPOCHS, ..TrainConfig::default() },
            folds: BENCHMARK_FOLDS,
            master_seed: BENCHMARK_SEED,
            timing: false,
        };
        cross_validate(&spec, &self.data, &self.pool).expect("cross-validation")
    }

    fn resnet34(&mut self) -> &CvResult {
        if self.resnet34.is_none() {
            self.resnet34 = Some(self.cv("ResNet34", 0.0));
        }
        self.resnet34.as_ref().unwrap()
    }
}

fn c1_metrics() -> Verdict {
    let t = Instant::now();
    let cm = ConfusionMatrix::from_counts([[36, 3, 5], [2, 33, 5], [4, 8, 74]]);
    let r = metrics(&cm);
    let recall = [81.8, 82.5, 86.0];
    let precision = [85.7, 75.0, 88.1];
    let close = |v: Option<f64>, want: f64| v.is_some_and(|v| (v - want).abs() <= 0.05);
    let ok = (0..3).all(|i| close(r.recall[i], recall[i]) && close(r.precision[i], precision[i]))
        && close(r.accuracy, 84.1)
        && t.elapsed().as_secs_f64() < 1.0;
    let show = |v: &[Option<f64>; 3]| v.iter().map(|x| fmt_pct(*x)).collect::<Vec<_>>().join("/");
    verdict(
        ok,
        format!("recall {} precision {} accuracy {}", show(&r.recall), show(&r.precision), fmt_pct(r.accuracy)),
    )
}

fn c2_gradcheck() -> Verdict {
    let t = Instant::now();
    let cases = gradcheck_suite(1).expect("gradcheck suite");
    let secs = t.elapsed().as_secs_f64();
    let worst = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<String> = cases
        .iter()
        .filter(|c| !c.report.passed())
        .map(|c| format!("{}/{}/{:?}", c.config, c.arch.name(), c.phase))
        .collect();
    let combos = cases.iter().map(|c| (c.config.name(), c.arch.name())).collect::<std::collections::BTreeSet<_>>().len();
    verdict(
        failed.is_empty() && combos == 32 && worst < 1e-4 && secs < 120.0,
        format!("{} cases over {combos} config/depth pairs, worst rel error {worst:.2e}, {secs:.1} s {failed:?}", cases.len()),
    )
}

fn c3_identity() -> Verdict {
    let mut worst = 0.0f64;
    let mut blocks = 0;
    let mut rng = seed::rng(3);
    for config in ModelConfig::grid().into_iter().filter(|c| !c.use_batchnorm) {
        for lpb in [2, 3] {
            let arch = ArchitectureSpec::from_depth(4 * lpb + 2, lpb).unwrap();
            let mut model = Model::build(config, arch, 11).unwrap();
            for block in &mut model.blocks {
                for layer in &mut block.layers {
                    layer.dense.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
                    layer.dense.bias.iter_mut().for_each(|v| *v = 0.0);
                }
            }
            let w = config.hidden_nodes;
            let h = Matrix::from_vec(8, w, (0..8 * w).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
            for block in &model.blocks {
                for phase in [Phase::Eval, Phase::Train] {
                    let y = block.forward(&h, true, phase).unwrap();
                    let dev = y.data().iter().zip(h.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst = worst.max(dev);
                }
                blocks += 1;
            }
        }
    }
    verdict(worst == 0.0, format!("{blocks} zeroed blocks, max abs deviation {worst:e}"))
}

fn c4_degeneracy(bench: &Bench) -> Verdict {
    let mut rng = seed::rng(4);
    let mut batch = |rows: usize| {
        let logits = Matrix::from_vec(rows, 3, (0..rows * 3).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let labels: Vec<TravelMode> = (0..rows).map(|i| TravelMode::ALL[i % 3]).collect();
        (logits, one_hot(&labels))
    };
    let labelled = vec![batch(32), batch(32), batch(17)];
    let pseudo = vec![batch(32), batch(9)];
    let schedule = AlphaSchedule::for_epochs(200);
    // independent supervised loss: mean over batches of mean per-row cross-entropy
    let oracle: f64 = labelled
        .iter()
        .map(|(z, y)| {
            (0..z.rows())
                .map(|i| {
                    let row = z.row(i);
                    let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
                    let k = y.row(i).iter().position(|&v| v == 1.0).unwrap();
                    lse - row[k]
                })
                .sum::<f64>()
                / z.rows() as f64
        })
        .sum::<f64>()
        / labelled.len() as f64;
    let rel = |v: f64| (v - oracle).abs() / oracle.abs();
    let no_pseudo = combined_loss(&labelled, &[], 150, &schedule).unwrap().total;
    let before_t1 = combined_loss(&labelled, &pseudo, 19, &schedule).unwrap();
    let loss_ok = rel(no_pseudo) <= 1e-12
        && rel(before_t1.total) <= 1e-12
        && before_t1.pseudo_grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0));

    let cfg = TrainConfig { epochs: 15, seed: 9, ..TrainConfig::default() };
    let run = |plc: Option<PseudoLabelConfig>| {
        let mut m = Model::build("c10".parse().unwrap(), "ResNet10".parse().unwrap(), 5).unwrap();
        m.fit_normalization(&bench.data.x).unwrap();
        let trace = match plc {
            None => train_supervised(&mut m, &bench.data, &cfg, None).unwrap(),
            Some(p) => train_semisupervised(&mut m, &bench.data, &bench.pool, &p, &cfg, None).unwrap().trace,
        };
        (trace.to_csv(), m.to_json(None).unwrap())
    };
    let supervised = run(None);
    let rate_zero = run(Some(PseudoLabelConfig::new(0.0, cfg.epochs)));
    let late_ramp = PseudoLabelConfig {
        schedule: AlphaSchedule { t1: 15.0, t2: 30.0, alpha_f: 3.0 },
        ..PseudoLabelConfig::new(0.2, cfg.epochs)
    };
    let below_t1 = run(Some(late_ramp));
    let trace_ok = rate_zero == supervised && below_t1 == supervised;
    verdict(
        loss_ok && trace_ok,
        format!(
            "rel error n'=0 {:.1e}, t<T1 {:.1e}; traces identical: rate 0 {}, t<T1 {}",
            rel(no_pseudo),
            rel(before_t1.total),
            rate_zero == supervised,
            below_t1 == supervised
        ),
    )
}

fn c5_benchmark(bench: &mut Bench) -> Verdict {
    let t = Instant::now();
    let counts: Vec<usize> =
        TravelMode::ALL.iter().map(|m| bench.data.labels.iter().filter(|l| *l == m).count()).collect();
    let unlabelled = bench.pool.rows();
    let within = |got: usize, want: f64| (got as f64 - want).abs() <= 0.05 * want;
    let shape_ok = within(counts[0], 213.0)
        && within(counts[1], 184.0)
        && within(counts[2], 451.0)
        && within(unlabelled, 1990.0);
    let cv = bench.resnet34();
    let acc = cv.mean_accuracy.unwrap_or(0.0);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        shape_ok && cv.failures().count() == 0 && acc >= 75.0 && secs <= 900.0,
        format!(
            "{counts:?} labelled, {} unlabelled; ResNet34-c10 {BENCHMARK_FOLDS}-fold accuracy {acc:.2}% (std {}), {secs:.0} s",
            unlabelled,
            fmt_pct(cv.std_accuracy)
        ),
    )
}

fn final_loss(bench: &Bench, arch: &str) -> f64 {
    let mut m = Model::build("c10".parse().unwrap(), arch.parse().unwrap(), 17).unwrap();
    m.fit_normalization(&bench.data.x).unwrap();
    let cfg = TrainConfig { epochs: BENCHMARK_EPOCHS, seed: 18, ..TrainConfig::default() };
    train_supervised(&mut m, &bench.data, &cfg, None).unwrap().final_train_loss().unwrap()
}

fn c6_residual_vs_plain(bench: &mut Bench) -> Verdict {
    let res_acc = bench.resnet34().mean_accuracy.unwrap_or(0.0);
    let plain_acc = bench.cv("Plain34", 0.0).mean_accuracy.unwrap_or(0.0);
    let (res_loss, plain_loss) = (final_loss(bench, "ResNet34"), final_loss(bench, "Plain34"));
    verdict(
        res_loss < plain_loss && res_acc - plain_acc >= 5.0,
        format!(
            "final train loss {res_loss:.4} vs {plain_loss:.4}; CV accuracy {res_acc:.2}% vs {plain_acc:.2}% ({:+.2} pp)",
            res_acc - plain_acc
        ),
    )
}

fn c7_semisupervised(bench: &Bench) -> Verdict {
    let supervised = bench.cv("ResNet50", 0.0).mean_accuracy.unwrap_or(0.0);
    let semi = bench.cv("ResNet50", 0.2).mean_accuracy.unwrap_or(0.0);
    let t = Instant::now();
    let train = TrainConfig { epochs: SWEEP_EPOCHS, ..TrainConfig::default() };
    let report = run_architecture_sweep("c10".parse().unwrap(), train, SWEEP_FOLDS, BENCHMARK_SEED, &bench.data, &bench.pool)
        .expect("architecture sweep");
    let secs = t.elapsed().as_secs_f64();
    let populated = report
        .summary
        .cells
        .iter()
        .filter(|c| c.arch != "Plain34" && c.failed.is_empty() && c.runs == SWEEP_FOLDS && c.mean_val_acc.is_some())
        .count();
    verdict(
        semi >= supervised - 1.0 && populated == 48 && secs <= 3600.0,
        format!(
            "ResNet50-c10 rate 0.2 {semi:.2}% vs supervised {supervised:.2}% ({:+.2} pp); sweep {populated}/48 cells at k={SWEEP_FOLDS}, {SWEEP_EPOCHS} epochs, {secs:.0} s",
            semi - supervised
        ),
    )
}

/// Every file under `dir`, with sidecar timestamps removed.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = path.strip_prefix(dir).unwrap().display().to_string();
            let mut bytes = std::fs::read(&path).unwrap();
            if name.ends_with(".manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timestamp_unix_s");
                bytes = v.to_string().into_bytes();
            }
            out.push((name, bytes));
        }
    }
    out.sort();
    out
}

fn c8_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap().to_string();
    let commands: Vec<Vec<String>> = [
        "simulate --out {d}/logs",
        "ingest --log {d}/logs/log.csv --roster {d}/logs/roster.csv --out {d}/trips.csv",
        "featurize --log {d}/logs/log.csv --trips {d}/trips.csv --deployment {d}/logs/deployment.json --out {d}/features.csv",
        "train --features {d}/features.csv --arch ResNet18 --epochs 5 --seed 7 --out {d}/model.json --trace {d}/trace.csv",
        "evaluate --model {d}/model.json --features {d}/features.csv --out {d}/metrics.json",
        "sweep-config --features {d}/features.csv --arch ResNet10 --epochs 2 --out {d}/cfg",
        "sweep-arch --features {d}/features.csv --epochs 2 --folds 3 --archs ResNet10,ResNet50 --sample-rate 0,0.2 --out {d}/arch",
    ]
    .iter()
    .map(|c| std::iter::once("wifi-mode".to_string()).chain(c.replace("{d}", &d).split(' ').map(String::from)).collect())
    .collect();
    let run_all = || commands.iter().all(|argv| dispatch(argv.clone()) == 0);
    if !run_all() {
        return verdict(false, "pipeline command failed");
    }
    let first = snapshot(tmp.path());
    if !run_all() {
        return verdict(false, "pipeline rerun failed");
    }
    let second = snapshot(tmp.path());
    let changed: Vec<&str> =
        first.iter().zip(&second).filter(|(a, b)| a != b).map(|(a, _)| a.0.as_str()).collect();
    verdict(
        first.len() == second.len() && changed.is_empty() && first.len() >= 20,
        format!("{} artifacts compared after rerun, {} differ {changed:?}", first.len(), changed.len()),
    )
}

fn c9_properties() -> Verdict {
    let results = common::all_properties();
    let failed: Vec<String> =
        results.iter().filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}"))).collect();
    verdict(failed.is_empty(), format!("{} property suites, failures {failed:?}", results.len()))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let titles = [
        "metrics reproduction from published counts",
        "gradient-check suite",
        "identity shortcut",
        "combined-loss degeneracy",
        "synthetic end-to-end benchmark",
        "residual vs plain",
        "semi-supervised non-degradation",
        "pipeline determinism",
        "property suites",
    ];
    let mut bench = None;
    let mut failures = 0;
    for n in 1..=9 {
        if !wanted(n) {
            continue;
        }
        if (4..=7).contains(&n) && bench.is_none() {
            bench = Some(Bench::load());
        }
        let t = Instant::now();
        let v = match n {
            1 => c1_metrics(),
            2 => c2_gradcheck(),
            3 => c3_identity(),
            4 => c4_degeneracy(bench.as_ref().unwrap()),
            5 => c5_benchmark(bench.as_mut().unwrap()),
            6 => c6_residual_vs_plain(bench.as_mut().unwrap()),
            7 => c7_semisupervised(bench.as_ref().unwrap()),
            8 => c8_determinism(),
            _ => c9_properties(),
        };
        failures += usize::from(!v.pass);
        println!(
            "criterion {n} [{}] {}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            titles[n - 1],
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

