//! Ten-fold cross-validation of supervised ResNet34-c10 on the benchmark.

use wifi_mode_detect::eval::{cross_validate, fmt_pct, CvSpec};
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::{PseudoLabelConfig, TrainConfig};

fn main() -> wifi_mode_detect::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let (data, pool) = benchmark(&ScenarioSpec::default())?;
    let spec = CvSpec {
        config: "c10".parse()?,
        arch: "ResNet34".parse()?,
        plc: PseudoLabelConfig::supervised(),
        train: TrainConfig { epochs, ..TrainConfig::default() },
        folds: 10,
        master_seed: 42,
        timing: true,
    };
    let cv = cross_validate(&spec, &data, &pool)?;
    for f in &cv.folds {
        match &f.report {
            Some(r) => println!(
                "fold {:>2} train {} val {} ({:.1}s)",
                f.fold,
                fmt_pct(r.train_accuracy),
                fmt_pct(r.validation_accuracy),
                r.runtime_s.unwrap_or(0.0)
            ),
            None => println!("fold {:>2} failed: {}", f.fold, f.error.as_deref().unwrap_or("?")),
        }
    }
    print!("{}", cv.pooled);
    println!("mean {} std {}", fmt_pct(cv.mean_accuracy), fmt_pct(cv.std_accuracy));
    Ok(())
}
