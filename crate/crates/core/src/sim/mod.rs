//! Synthetic sensor logs for a loop of mid-block pods.
//!
//! Agents move along a rectangular loop at a per-agent cruise speed with
//! per-segment jitter and may stop at each corner signal. While a device is
//! inside a pod's coverage sphere it is logged at exponential inter-arrival
//! times with log-distance path-loss RSSI plus Gaussian noise.

mod geometry;

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::TravelMode;
use crate::seed::{self, Rng};
use crate::trace::{emit_log, serialize_roster, ConnectionRecord, Pod, PodDeployment, Roster};

pub use geometry::LoopGeometry;

pub const TRUTH_HEADER: &str = "device_id,mode,labelled,origin_pod,dest_pod,t_exit_origin,t_enter_dest";
const AGENT_STREAM: u64 = 0xA6E7;
const PLAN_STREAM: u64 = 0x9_1A4;
/// Distance outside coverage at which an agent appears and disappears.
const APPROACH_M: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub mode: TravelMode,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub stop_probability: f64,
    pub stop_min_s: f64,
    pub stop_max_s: f64,
    /// Relative half-width of the uniform per-segment speed factor.
    pub jitter: f64,
}

impl ModeProfile {
    pub fn default_for(mode: TravelMode) -> Self {
        let (lo, hi, p, smin, smax, jitter) = match mode {
            TravelMode::Walking => (1.2, 1.6, 0.3, 5.0, 30.0, 0.1),
            TravelMode::Biking => (3.0, 6.0, 0.4, 3.0, 30.0, 0.15),
            TravelMode::Driving => (4.0, 14.0, 0.5, 5.0, 45.0, 0.25),
        };
        ModeProfile {
            mode,
            speed_min_mps: lo,
            speed_max_mps: hi,
            stop_probability: p,
            stop_min_s: smin,
            stop_max_s: smax,
            jitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.speed_min_mps > 0.0
            && self.speed_min_mps <= self.speed_max_mps
            && (0.0..=1.0).contains(&self.stop_probability)
            && self.stop_min_s >= 0.0
            && self.stop_min_s <= self.stop_max_s
            && (0.0..1.0).contains(&self.jitter);
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid mode profile {self:?}")));
        }
        Ok(())
    }
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiModel {
    /// Received power at 1 m.
    pub tx_power_dbm: f64,
    pub path_loss_exponent: f64,
    pub noise_sigma_db: f64,
    /// Mean of the exponential beacon inter-arrival time.
    pub beacon_interval_s: f64,
}

impl Default for RssiModel {
    fn default() -> Self {
        RssiModel {
            tx_power_dbm: -40.0,
            path_loss_exponent: 2.7,
            noise_sigma_db: 4.0,
            beacon_interval_s: 2.0,
        }
    }
}

impl RssiModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma_db >= 0.0 && self.beacon_interval_s > 0.0 && self.path_loss_exponent >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid RSSI model {self:?}")));
        }
        Ok(())
    }

    /// Noise-free RSSI; distances under 1 m count as 1 m.
    pub fn mean_rssi(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm - 10.0 * self.path_loss_exponent * distance_m.max(1.0).log10()
    }
}

/// Arc position over time as piecewise-linear knots `(t, s)`; `s` is not
/// wrapped and is monotone along the direction of travel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub knots: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn stationary(s: f64, t0: f64, t1: f64) -> Self {
        Trajectory { knots: vec![(t0, s), (t1, s)] }
    }

    pub fn constant_speed(s0: f64, s1: f64, speed: f64, t0: f64) -> Self {
        Trajectory { knots: vec![(t0, s0), (t0 + (s1 - s0).abs() / speed, s1)] }
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn position(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&(kt, _)| kt <= t);
        if k == 0 {
            return self.knots[0].1;
        }
        if k == self.knots.len() {
            return self.knots[k - 1].1;
        }
        let ((t0, s0), (t1, s1)) = (self.knots[k - 1], self.knots[k]);
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }

    /// First time the agent reaches arc position `s`.
    pub fn time_at(&self, s: f64) -> Option<f64> {
        self.knots.windows(2).find_map(|w| {
            let ((t0, s0), (t1, s1)) = (w[0], w[1]);
            let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
            (s0 != s1 && (lo..=hi).contains(&s)).then(|| t0 + (t1 - t0) * (s - s0) / (s1 - s0))
        })
    }
}

/// Connection records for one device following `traj` past `pods`.
/// Timestamps are `epoch + t` rounded to milliseconds.
pub fn beacons(
    device_id: &str,
    traj: &Trajectory,
    geometry: &LoopGeometry,
    pods: &[Pod],
    rssi: &RssiModel,
    epoch: f64,
    rng: &mut Rng,
) -> Result<Vec<ConnectionRecord>> {
    rssi.validate()?;
    let arrivals = Exp::new(1.0 / rssi.beacon_interval_s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, rssi.noise_sigma_db).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = Vec::new();
    let mut t = traj.start() + arrivals.sample(rng);
    while t <= traj.end() {
        let (x, y) = geometry.point(traj.position(t));
        for pod in pods {
            let d = (pod.x_m - x).hypot(pod.y_m - y);
            if d <= pod.radius_m {
                let value = (rssi.mean_rssi(d) + noise.sample(rng)).round().min(-1.0);
                out.push(ConnectionRecord {
                    device_id: device_id.to_string(),
                    rssi: value,
                    timestamp: ((epoch + t) * 1000.0).round() / 1000.0,
                    pod_id: pod.id.clone(),
                });
            }
        }
        t += arrivals.sample(rng);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeCounts {
    pub walking: usize,
    pub biking: usize,
    pub driving: usize,
}

impl Default for ModeCounts {
    fn default() -> Self {
        ModeCounts { walking: 213, biking: 184, driving: 451 }
    }
}

impl ModeCounts {
    pub fn get(&self, mode: TravelMode) -> usize {
        match mode {
            TravelMode::Walking => self.walking,
            TravelMode::Biking => self.biking,
            TravelMode::Driving => self.driving,
        }
    }

    pub fn total(&self) -> usize {
        self.walking + self.biking + self.driving
    }
}

/// Scenario document. Every field has a default, so `{}` is the default
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub geometry: LoopGeometry,
    /// Pods must lie within their coverage radius of the loop.
    pub deployment: PodDeployment,
    /// Labelled trips per mode; participants travel the loop in one direction.
    pub labelled_trips: ModeCounts,
    pub trips_per_agent: usize,
    pub unlabelled_trips: usize,
    /// Walking, biking and driving shares of unlabelled agents.
    pub unlabelled_shares: [f64; 3],
    pub max_unlabelled_trips_per_agent: usize,
    pub profiles: [ModeProfile; 3],
    pub rssi: RssiModel,
    /// Agents depart uniformly within this window.
    pub duration_s: f64,
    pub epoch_s: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let geometry = LoopGeometry::default();
        ScenarioSpec {
            geometry,
            deployment: geometry.mid_block_deployment(),
            labelled_trips: ModeCounts::default(),
            trips_per_agent: 10,
            unlabelled_trips: 1990,
            unlabelled_shares: [0.25, 0.25, 0.5],
            max_unlabelled_trips_per_agent: 4,
            profiles: TravelMode::ALL.map(ModeProfile::default_for),
            rssi: RssiModel::default(),
            duration_s: 10_800.0,
            epoch_s: 1_497_535_200.0,
            seed: 42,
        }
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.deployment.validate()?;
        self.deployment.check_no_overlap()?;
        self.rssi.validate()?;
        for (p, m) in self.profiles.iter().zip(TravelMode::ALL) {
            if p.mode != m {
                return Err(Error::InvalidArgument(format!("profile for {m} is listed as {}", p.mode)));
            }
            p.validate()?;
        }
        let share_sum: f64 = self.unlabelled_shares.iter().sum();
        if self.unlabelled_shares.iter().any(|&s| !(0.0..=1.0).contains(&s)) || (share_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "unlabelled shares must be in [0, 1] and sum to 1, got {:?}",
                self.unlabelled_shares
            )));
        }
        if self.trips_per_agent == 0 || self.max_unlabelled_trips_per_agent == 0 {
            return Err(Error::InvalidArgument("trips per agent must be positive".into()));
        }
        if !(self.duration_s >= 0.0 && self.epoch_s.is_finite()) {
            return Err(Error::InvalidArgument("duration must be non-negative".into()));
        }
        if self.deployment.pods.len() < 2 {
            return Err(Error::InvalidArgument("need at least two pods".into()));
        }
        for pod in &self.deployment.pods {
            let (x, y) = self.geometry.point(self.geometry.project(pod.x_m, pod.y_m));
            if (x - pod.x_m).hypot(y - pod.y_m) >= pod.radius_m {
                return Err(Error::InvalidArgument(format!("pod {} does not cover the loop", pod.id)));
            }
        }
        Ok(())
    }
}

/// One simulated pod-to-pod movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTrip {
    pub device_id: String,
    pub mode: TravelMode,
    pub labelled: bool,
    pub origin_pod: String,
    pub dest_pod: String,
    pub t_exit_origin: f64,
    pub t_enter_dest: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Sorted by timestamp, device and pod.
    pub records: Vec<ConnectionRecord>,
    pub roster: Roster,
    pub truth: Vec<TruthTrip>,
    pub deployment: PodDeployment,
}

impl SimOutput {
    pub fn truth_csv(&self) -> String {
        let mut out = format!("{TRUTH_HEADER}\n");
        for t in &self.truth {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{:.3}\n",
                t.device_id,
                t.mode.code(),
                t.labelled,
                t.origin_pod,
                t.dest_pod,
                t.t_exit_origin,
                t.t_enter_dest
            ));
        }
        out
    }

    /// Writes `log.csv`, `roster.csv`, `truth.csv` and `deployment.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        emit_log(&self.records, &dir.join("log.csv"))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("roster.csv", serialize_roster(&self.roster))?;
        write("truth.csv", self.truth_csv())?;
        self.deployment.save(&dir.join("deployment.json"))
    }
}

#[derive(Debug, Clone)]
struct AgentPlan {
    device_id: String,
    mode: TravelMode,
    labelled: bool,
    start_pod: usize,
    direction: f64,
    legs: usize,
    depart_s: f64,
}

fn device_id(index: usize, rng: &mut Rng) -> String {
    let r: [u8; 2] = rng.random();
    format!(
        "02:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
        r[0],
        r[1],
        (index >> 16) & 0xff,
        (index >> 8) & 0xff,
        index & 0xff
    )
}

fn plan_agents(spec: &ScenarioSpec, pods: usize) -> Vec<AgentPlan> {
    let mut rng = seed::rng(seed::derive_seed(spec.seed, PLAN_STREAM));
    let mut plans = Vec::new();
    let mut push = |rng: &mut Rng, mode, labelled, direction, legs| {
        let id = device_id(plans.len(), rng);
        plans.push(AgentPlan {
            device_id: id,
            mode,
            labelled,
            start_pod: rng.random_range(0..pods),
            direction,
            legs,
            depart_s: uniform(rng, 0.0, spec.duration_s),
        });
    };
    for mode in TravelMode::ALL {
        let mut remaining = spec.labelled_trips.get(mode);
        while remaining > 0 {
            let legs = remaining.min(spec.trips_per_agent);
            push(&mut rng, mode, true, 1.0, legs);
            remaining -= legs;
        }
    }
    let mut remaining = spec.unlabelled_trips;
    while remaining > 0 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut mode = TravelMode::Driving;
        for (m, share) in TravelMode::ALL.into_iter().zip(spec.unlabelled_shares) {
            acc += share;
            if u < acc {
                mode = m;
                break;
            }
        }
        let legs = rng.random_range(1..=spec.max_unlabelled_trips_per_agent).min(remaining);
        let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        push(&mut rng, mode, false, direction, legs);
        remaining -= legs;
    }
    plans
}

/// Moves `distance` metres from `s0`, re-drawing the speed after every
/// corner and possibly stopping there.
fn drive(
    geometry: &LoopGeometry,
    profile: &ModeProfile,
    s0: f64,
    direction: f64,
    distance: f64,
    t0: f64,
    rng: &mut Rng,
) -> Trajectory {
    let cruise = uniform(rng, profile.speed_min_mps, profile.speed_max_mps);
    let segment_speed = |rng: &mut Rng| cruise * (1.0 + uniform(rng, -profile.jitter, profile.jitter));
    let corners = geometry.corners();
    let perimeter = geometry.perimeter();
    let mut knots = vec![(t0, s0)];
    let (mut t, mut s, mut left) = (t0, s0, distance);
    let mut speed = segment_speed(rng);
    while left > 0.0 {
        let here = geometry.wrap(s);
        let to_corner = corners
            .iter()
            .map(|&c| {
                let d = (direction * (c - here)).rem_euclid(perimeter);
                if d < 1e-9 { perimeter } else { d }
            })
            .fold(f64::INFINITY, f64::min);
        let step = to_corner.min(left);
        t += step / speed;
        s += direction * step;
        left -= step;
        knots.push((t, s));
        if left > 0.0 {
            if rng.random::<f64>() < profile.stop_probability {
                t += uniform(rng, profile.stop_min_s, profile.stop_max_s);
                knots.push((t, s));
            }
            speed = segment_speed(rng);
        }
    }
    Trajectory { knots }
}

fn simulate_agent(
    spec: &ScenarioSpec,
    order: &[(usize, f64)],
    plan: &AgentPlan,
    index: usize,
) -> Result<(Vec<ConnectionRecord>, Vec<TruthTrip>)> {
    let mut rng = seed::rng(seed::derive_seed(spec.seed, AGENT_STREAM + index as u64));
    let geometry = &spec.geometry;
    let pods = &spec.deployment.pods;
    let n = order.len();
    let step = |k: usize| if plan.direction > 0.0 { (k + 1) % n } else { (k + n - 1) % n };

    let (first, first_arc) = order[plan.start_pod];
    let lead = pods[first].radius_m + APPROACH_M;
    let start = first_arc - plan.direction * lead;
    // unwrapped arc of each visited pod
    let mut visited = vec![(plan.start_pod, first_arc)];
    for _ in 0..plan.legs {
        let &(k, arc) = visited.last().unwrap();
        let next = step(k);
        let gap = (plan.direction * (order[next].1 - arc)).rem_euclid(geometry.perimeter());
        visited.push((next, arc + plan.direction * gap));
    }
    let &(last, last_arc) = visited.last().unwrap();
    let end = last_arc + plan.direction * (pods[order[last].0].radius_m + APPROACH_M);

    let profile = &spec.profiles[plan.mode.index()];
    let traj = drive(geometry, profile, start, plan.direction, (end - start).abs(), plan.depart_s, &mut rng);
    let records = beacons(&plan.device_id, &traj, geometry, pods, &spec.rssi, spec.epoch_s, &mut rng)?;

    let stamp = |t: f64| ((spec.epoch_s + t) * 1000.0).round() / 1000.0;
    let truth = visited
        .windows(2)
        .map(|w| {
            let (o, d) = (&pods[order[w[0].0].0], &pods[order[w[1].0].0]);
            let exit = traj.time_at(w[0].1 + plan.direction * o.radius_m).unwrap_or(traj.start());
            let enter = traj.time_at(w[1].1 - plan.direction * d.radius_m).unwrap_or(traj.end());
            TruthTrip {
                device_id: plan.device_id.clone(),
                mode: plan.mode,
                labelled: plan.labelled,
                origin_pod: o.id.clone(),
                dest_pod: d.id.clone(),
                t_exit_origin: stamp(exit),
                t_enter_dest: stamp(enter),
            }
        })
        .collect();
    Ok((records, truth))
}

/// Runs the scenario. Agents are simulated in parallel on independent rng
/// streams, so the output depends only on the `ScenarioSpec`.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimOutput> {
    spec.validate()?;
    let geometry = &spec.geometry;
    let mut order: Vec<(usize, f64)> = spec
        .deployment
        .pods
        .iter()
        .enumerate()
        .map(|(i, p)| (i, geometry.project(p.x_m, p.y_m)))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));

    let plans = plan_agents(spec, order.len());
    let per_agent = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| simulate_agent(spec, &order, plan, i))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut truth = Vec::new();
    for (r, t) in per_agent {
        records.extend(r);
        truth.extend(t);
    }
    records.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.device_id.cmp(&b.device_id))
            .then_with(|| a.pod_id.cmp(&b.pod_id))
    });
    let roster = plans
        .iter()
        .filter(|p| p.labelled)
        .map(|p| (p.device_id.clone(), p.mode))
        .collect();
    Ok(SimOutput {
        records,
        roster,
        truth,
        deployment: spec.deployment.clone(),
    })
}
