//! Trains ResNet34-c10 on 80% of the labelled benchmark trips and reports the
//! held-out confusion matrix.

use wifi_mode_detect::eval::{confusion, metrics, stratified_holdout};
use wifi_mode_detect::pipeline::benchmark;
use wifi_mode_detect::resnet::Model;
use wifi_mode_detect::sim::ScenarioSpec;
use wifi_mode_detect::trainer::{train_supervised, TrainConfig};

fn main() -> wifi_mode_detect::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let (data, _) = benchmark(&ScenarioSpec::default())?;

    let (train_idx, val_idx) = stratified_holdout(&data.labels, 0.2, 1)?;
    let (train, val) = (data.subset(&train_idx), data.subset(&val_idx));

    let mut model = Model::build("c10".parse()?, "ResNet34".parse()?, 1)?;
    model.fit_normalization(&train.x)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let trace = train_supervised(&mut model, &train, &cfg, Some(&val))?;

    for r in trace.records.iter().filter(|r| r.epoch % 20 == 0 || r.epoch + 1 == epochs) {
        println!("{:>4} {:<10} loss {:.4} acc {:.3}", r.epoch, r.split.as_str(), r.loss, r.accuracy);
    }
    let report = metrics(&confusion(&val.labels, &model.predict(&val.x)?)?);
    print!("{}", report.confusion);
    Ok(())
}
