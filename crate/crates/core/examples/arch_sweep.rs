//! Architecture by sample-rate grid with three-fold CV, plus the plain
//! 34-layer baseline. Prints accuracy per (architecture, rate).

use wifi_mode_detect::eval::{fmt_pct, run_architecture_sweep, SAMPLE_RATES};
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::resnet::ArchitectureSpec;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::TrainConfig;

fn main() -> wifi_mode_detect::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let (data, pool) = benchmark(&ScenarioSpec::default())?;
    let train = TrainConfig { epochs, ..TrainConfig::default() };
    let report = run_architecture_sweep("c10".parse()?, train, 3, 42, &data, &pool)?;

    print!("{:<10}", "");
    for r in SAMPLE_RATES {
        print!("{r:>7}");
    }
    println!();
    for arch in ArchitectureSpec::sweep() {
        print!("{:<10}", arch.name());
        for r in SAMPLE_RATES {
            let cell = report.cell(&format!("{}@{r}", arch.name()));
            print!("{:>7}", fmt_pct(cell.and_then(|c| c.mean_val_acc)));
        }
        println!();
    }
    let plain = report.cell("Plain34@0").and_then(|c| c.mean_val_acc);
    println!("{:<10}{:>7}", "Plain34", fmt_pct(plain));
    Ok(())
}
