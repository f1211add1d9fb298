//! Builds a ResNet, checks the identity shortcut and round-trips the model
//! through its JSON document.

use wifi_mode_detect::nn::{Matrix, Phase};
use wifi_mode_detect::resnet::{ArchitectureSpec, Model, ModelConfig};

fn main() -> wifi_mode_detect::Result<()> {
    let config: ModelConfig = "c00".parse()?;
    let arch: ArchitectureSpec = "ResNet34".parse()?;
    let mut model = Model::build(config, arch, 7)?;
    println!("{} {}: {} blocks, {} parameters", arch.name(), config, model.blocks.len(), model.num_parameters());

    let x = Matrix::from_rows(&[[0.5; 15], [0.1; 15]])?;
    let proba = model.predict_proba(&x)?;
    println!("p(walk, bike, drive) = {:?}", proba.row(0));

    let text = model.to_json(None)?;
    let back = Model::from_json(&text)?;
    assert_eq!(back.predict_proba(&x)?, proba);
    println!("json round trip: {} bytes, predictions identical", text.len());

    // With every block weight zeroed each block passes its input through.
    for (name, t) in model.named_tensors_mut() {
        if name.starts_with("blocks.") && (name.ends_with("weight") || name.ends_with("bias")) {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let block = &model.blocks[0];
    let h = Matrix::from_rows(&[vec![0.3; model.config.hidden_nodes]])?;
    let y = block.forward(&h, true, Phase::Eval)?;
    println!("zeroed block output equals input: {}", y == h);
    let zeroed = model.predict_proba(&x)?;
    println!("p(walk, bike, drive) with identity blocks = {:?}", zeroed.row(0));
    Ok(())
}
