//! Sessionizes a simulated log into pod visits and trips.

use wifi_mode_detect::pipeline::ingest;
use wifi_mode_detect::sim::{simulate, ScenarioSpec};
use wifi_mode_detect::trace::{DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S};

fn main() -> wifi_mode_detect::Result<()> {
    let out = simulate(&ScenarioSpec::default())?;
    let ingested = ingest(&out.records, &out.roster, DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S)?;

    println!("{} records -> {} visits", out.records.len(), ingested.visits);
    println!(
        "{} labelled, {} unlabelled trips ({} simulated)",
        ingested.labelled.len(),
        ingested.unlabelled.len(),
        out.truth.len()
    );
    println!("discarded: {:?}", ingested.discarded);

    for trip in ingested.labelled.iter().take(5) {
        println!(
            "{} {} -> {} gap {:.1}s {:?}",
            trip.device_id,
            trip.origin.pod_id,
            trip.destination.pod_id,
            trip.gap_time(),
            trip.label
        );
    }
    Ok(())
}
