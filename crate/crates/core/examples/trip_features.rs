//! Extracts the fifteen trip features and shows per-mode means.

use wifi_mode_detect::features::{FEATURE_NAMES, NUM_FEATURES};
use wifi_mode_detect::pipeline::{featurize, ingest};
use wifi_mode_detect::sim::{simulate, ScenarioSpec};
use wifi_mode_detect::trace::{DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S};
use wifi_mode_detect::TravelMode;

fn main() -> wifi_mode_detect::Result<()> {
    let out = simulate(&ScenarioSpec::default())?;
    let ingested = ingest(&out.records, &out.roster, DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S)?;
    let table = featurize(&ingested.trips(), &out.deployment)?;
    let (lab, labels, _) = table.split_labelled();

    print!("{:<22}", "feature");
    for mode in TravelMode::ALL {
        print!("{:>12}", mode.to_string());
    }
    println!();
    for f in 0..NUM_FEATURES {
        print!("{:<22}", FEATURE_NAMES[f]);
        for mode in TravelMode::ALL {
            let vals: Vec<f64> = lab.iter().zip(&labels).filter(|(_, &l)| l == mode).map(|(r, _)| r.values[f]).collect();
            print!("{:>12.3}", vals.iter().sum::<f64>() / vals.len().max(1) as f64);
        }
        println!();
    }
    Ok(())
}
