//! Log-to-dataset plumbing shared by the command line and the examples.

use crate::error::Result;
use crate::features::{extract_all, FeatureTable, FeatureVector, NUM_FEATURES};
use crate::nn::Matrix;
use crate::sim::{simulate, ScenarioSpec};
use crate::trace::{assemble_trips, partition_labelled, sessionize, ConnectionRecord, DiscardReport, DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S, PodDeployment, Roster, Trip};
use crate::trainer::Dataset;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub labelled: Vec<Trip>,
    pub unlabelled: Vec<Trip>,
    pub visits: usize,
    pub discarded: DiscardReport,
}

impl Ingested {
    /// Labelled trips first, then unlabelled, with ids renumbered in that order.
    pub fn trips(&self) -> Vec<Trip> {
        self.labelled
            .iter()
            .chain(&self.unlabelled)
            .cloned()
            .enumerate()
            .map(|(id, t)| Trip { id, ..t })
            .collect()
    }
}

/// Sessionizes records, assembles trips and splits them by roster.
pub fn ingest(records: &[ConnectionRecord], roster: &Roster, idle_gap_s: f64, max_trip_s: f64) -> Result<Ingested> {
    let visits = sessionize(records, idle_gap_s)?;
    let assembly = assemble_trips(&visits, max_trip_s)?;
    let (labelled, unlabelled) = partition_labelled(assembly.trips, roster);
    Ok(Ingested {
        labelled,
        unlabelled,
        visits: visits.len(),
        discarded: assembly.discarded,
    })
}

/// Raw (unnormalized) feature rows for every trip, labels carried over.
pub fn featurize(trips: &[Trip], deployment: &PodDeployment) -> Result<FeatureTable> {
    let mut table = FeatureTable::default();
    for (fv, trip) in extract_all(trips, deployment)?.into_iter().zip(trips) {
        table.push(fv, trip.label);
    }
    Ok(table)
}

fn to_matrix(rows: &[FeatureVector]) -> Matrix {
    let data = rows.iter().flat_map(|r| r.values).collect();
    Matrix::from_vec(rows.len(), NUM_FEATURES, data).expect("rows have NUM_FEATURES values")
}

/// Labelled dataset and unlabelled feature matrix of a table.
pub fn datasets(table: &FeatureTable) -> Result<(Dataset, Matrix)> {
    let (lab, labels, unlab) = table.split_labelled();
    Ok((Dataset::new(to_matrix(&lab), labels)?, to_matrix(&unlab)))
}

/// Simulates a scenario and runs it through ingest and feature extraction
/// with default thresholds.
pub fn benchmark(spec: &ScenarioSpec) -> Result<(Dataset, Matrix)> {
    let out = simulate(spec)?;
    let ingested = ingest(&out.records, &out.roster, DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S)?;
    datasets(&featurize(&ingested.trips(), &out.deployment)?)
}
