//! The sixteen-configuration grid on ResNet34 with a 20% validation split.

use wifi_mode_detect::eval::{fmt_pct, run_config_sweep};
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::TrainConfig;

fn main() -> wifi_mode_detect::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let (data, _) = benchmark(&ScenarioSpec::default())?;
    let report = run_config_sweep(TrainConfig { epochs, ..TrainConfig::default() }, 42, &data)?;
    println!("config  train    val    gap");
    for c in &report.summary.cells {
        println!(
            "{:<6} {:>6} {:>6} {:>6}",
            c.config,
            fmt_pct(c.mean_train_acc),
            fmt_pct(c.mean_val_acc),
            fmt_pct(c.mean_gap_pct)
        );
    }
    println!("ranking: {}", report.summary.ranking.join(" > "));
    Ok(())
}
