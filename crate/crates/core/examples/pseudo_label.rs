//! Semi-supervised training: a fifth of the unlabelled trips join training
//! with pseudo-labels weighted by the alpha ramp.

use wifi_mode_detect::eval::stratified_holdout;
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::resnet::Model;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::{pseudo_label_assign, train_semisupervised, PseudoLabelConfig, Split, TrainConfig};
use wifi_mode_detect::TravelMode;

fn main() -> wifi_mode_detect::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let (data, pool) = benchmark(&ScenarioSpec::default())?;
    let (train_idx, val_idx) = stratified_holdout(&data.labels, 0.2, 1)?;
    let (train, val) = (data.subset(&train_idx), data.subset(&val_idx));

    let mut model = Model::build("c10".parse()?, "ResNet50".parse()?, 1)?;
    model.fit_normalization(&train.x)?;
    let plc = PseudoLabelConfig::new(0.2, epochs);
    println!("alpha ramp: 0 until epoch {}, {} from epoch {}", plc.schedule.t1, plc.schedule.alpha_f, plc.schedule.t2);
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let outcome = train_semisupervised(&mut model, &train, &pool, &plc, &cfg, Some(&val))?;

    for r in outcome.trace.records.iter().filter(|r| r.split == Split::Validation && r.epoch % 10 == 0) {
        println!("{:>4} alpha {:.2} val acc {:.3}", r.epoch, r.alpha, r.accuracy);
    }
    let pooled = outcome.pools.concat();
    let labels = pseudo_label_assign(&model, &pool.select_rows(&pooled))?;
    for mode in TravelMode::ALL {
        println!("{mode:<8} {:>4} pseudo-labels", labels.iter().filter(|&&l| l == mode).count());
    }
    Ok(())
}
