use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{GapEntry, Pod, PodDeployment, DEFAULT_COVERAGE_RADIUS_M};

/// Rectangular loop with its lower-left corner at the origin, parameterized
/// by arc length counter-clockwise from that corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for LoopGeometry {
    /// 250 m by 178.5 m, an 857 m perimeter.
    fn default() -> Self {
        LoopGeometry {
            width_m: 250.0,
            height_m: 178.5,
        }
    }
}

impl LoopGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(Error::InvalidArgument(format!("loop sides must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width_m + self.height_m)
    }

    /// Arc positions of the four corners.
    pub fn corners(&self) -> [f64; 4] {
        let (w, h) = (self.width_m, self.height_m);
        [0.0, w, w + h, 2.0 * w + h]
    }

    pub fn wrap(&self, s: f64) -> f64 {
        s.rem_euclid(self.perimeter())
    }

    pub fn point(&self, s: f64) -> (f64, f64) {
        let (w, h) = (self.width_m, self.height_m);
        let s = self.wrap(s);
        if s < w {
            (s, 0.0)
        } else if s < w + h {
            (w, s - w)
        } else if s < 2.0 * w + h {
            (w - (s - w - h), h)
        } else {
            (0.0, h - (s - 2.0 * w - h))
        }
    }

    /// Arc position of the loop point nearest to `(x, y)`.
    pub fn project(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.width_m, self.height_m);
        let candidates = [
            (x.clamp(0.0, w), 0.0, x.clamp(0.0, w)),
            (w, y.clamp(0.0, h), w + y.clamp(0.0, h)),
            (x.clamp(0.0, w), h, w + h + (w - x.clamp(0.0, w))),
            (0.0, y.clamp(0.0, h), 2.0 * w + h + (h - y.clamp(0.0, h))),
        ];
        let mut best = (f64::INFINITY, 0.0);
        for (px, py, s) in candidates {
            let d = (px - x).hypot(py - y);
            if d < best.0 {
                best = (d, s);
            }
        }
        self.wrap(best.1)
    }

    /// Shorter of the two path lengths between arc positions.
    pub fn path_distance(&self, a: f64, b: f64) -> f64 {
        let d = self.wrap(b - a);
        d.min(self.perimeter() - d)
    }

    /// Pods at the middle of each side with gap distances for every pair.
    pub fn mid_block_deployment(&self) -> PodDeployment {
        let (w, h) = (self.width_m, self.height_m);
        let arcs = [w / 2.0, w + h / 2.0, w + h + w / 2.0, 2.0 * w + h + h / 2.0];
        let pods = arcs
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let (x_m, y_m) = self.point(s);
                Pod {
                    id: format!("P{}", i + 1),
                    x_m,
                    y_m,
                    radius_m: DEFAULT_COVERAGE_RADIUS_M,
                }
            })
            .collect();
        let mut dep = PodDeployment { pods, gaps: Vec::new() };
        dep.gaps = self.gap_entries(&dep);
        dep
    }

    /// Path distance between pods minus both coverage radii, for each
    /// unordered pod pair.
    pub fn gap_entries(&self, dep: &PodDeployment) -> Vec<GapEntry> {
        let mut gaps = Vec::new();
        for (i, a) in dep.pods.iter().enumerate() {
            for b in &dep.pods[i + 1..] {
                let d = self.path_distance(self.project(a.x_m, a.y_m), self.project(b.x_m, b.y_m));
                gaps.push(GapEntry {
                    from: a.id.clone(),
                    to: b.id.clone(),
                    distance_m: (d - a.radius_m - b.radius_m).max(0.0),
                });
            }
        }
        gaps
    }
}
