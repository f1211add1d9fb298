use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COVERAGE_RADIUS_M: f64 = 50.0;

fn default_radius() -> f64 {
    DEFAULT_COVERAGE_RADIUS_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pod {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
}

/// Uncovered path length between two pods' coverage zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub from: String,
    pub to: String,
    pub distance_m: f64,
}

/// Pod positions plus the gap distances used by the travel speed feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodDeployment {
    pub pods: Vec<Pod>,
    #[serde(default)]
    pub gaps: Vec<GapEntry>,
}

impl PodDeployment {
    /// Gap distance for a directed pod pair, falling back to the reverse pair.
    pub fn gap_distance(&self, from: &str, to: &str) -> Option<f64> {
        let find = |a: &str, b: &str| {
            self.gaps
                .iter()
                .find(|g| g.from == a && g.to == b)
                .map(|g| g.distance_m)
        };
        find(from, to).or_else(|| find(to, from))
    }

    pub fn pod(&self, id: &str) -> Option<&Pod> {
        self.pods.iter().find(|p| p.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pod) in self.pods.iter().enumerate() {
            if pod.id.is_empty() {
                return Err(Error::InvalidArgument("pod with empty id".into()));
            }
            if !(pod.radius_m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "pod {} has non-positive coverage radius",
                    pod.id
                )));
            }
            if self.pods[..i].iter().any(|p| p.id == pod.id) {
                return Err(Error::InvalidArgument(format!("duplicate pod {}", pod.id)));
            }
        }
        for g in &self.gaps {
            if !(g.distance_m >= 0.0) || !g.distance_m.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "gap {}-{} must be a non-negative distance",
                    g.from, g.to
                )));
            }
            let reverse = self
                .gaps
                .iter()
                .find(|r| r.from == g.to && r.to == g.from);
            if let Some(r) = reverse {
                if (r.distance_m - g.distance_m).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "gap {}-{} is asymmetric",
                        g.from, g.to
                    )));
                }
            }
        }
        Ok(())
    }

    /// Errors when any two coverage spheres intersect.
    pub fn check_no_overlap(&self) -> Result<()> {
        for (i, a) in self.pods.iter().enumerate() {
            for b in &self.pods[i + 1..] {
                let d = (a.x_m - b.x_m).hypot(a.y_m - b.y_m);
                if d < a.radius_m + b.radius_m {
                    return Err(Error::OverlappingCoverage(a.id.clone(), b.id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dep: PodDeployment = serde_json::from_str(text)?;
        dep.validate()?;
        Ok(dep)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
