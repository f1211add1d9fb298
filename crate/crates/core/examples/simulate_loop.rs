//! Simulates the default four-pod loop and writes the log, roster, ground
//! truth and deployment to a directory (default `sim_out/`).

use std::path::PathBuf;

use wifi_mode_detect::sim::{simulate, ScenarioSpec};
use wifi_mode_detect::TravelMode;

fn main() -> wifi_mode_detect::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sim_out".into()));
    let spec = ScenarioSpec::default();
    let out = simulate(&spec)?;

    for pod in &out.deployment.pods {
        let n = out.records.iter().filter(|r| r.pod_id == pod.id).count();
        println!("{:<3} {:>6} records", pod.id, n);
    }
    for mode in TravelMode::ALL {
        let trips = out.truth.iter().filter(|t| t.mode == mode);
        let (lab, unlab): (Vec<_>, Vec<_>) = trips.partition(|t| t.labelled);
        println!("{mode:<8} {:>4} labelled {:>5} unlabelled trips", lab.len(), unlab.len());
    }
    out.write(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
