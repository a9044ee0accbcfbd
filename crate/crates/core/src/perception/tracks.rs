use serde::{Deserialize, Serialize};

use super::kalman::{kf_predict, kf_update, ObstacleTrack};
use super::sensing::Detection;
use crate::Mat3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Association gate [m]
    pub gate: f64,
    /// Consecutive missed batches before a track is dropped.
    pub miss_limit: u32,
    /// Acceleration variance of the motion model [m²/s⁴]
    pub process_noise: f64,
    /// Measurement standard deviation per axis [m]
    pub measurement_sigma: f64,
    /// Initial position and velocity variances of a new track.
    pub init_position_var: f64,
    pub init_velocity_var: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gate: 3.0,
            miss_limit: 25,
            process_noise: 1.0,
            measurement_sigma: 0.05,
            init_position_var: 1.0,
            init_velocity_var: 100.0,
        }
    }
}

/// Track list plus the id counter, so ids are never reused.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackStore {
    pub tracks: Vec<ObstacleTrack>,
    pub next_id: u32,
}

/// Greedy nearest-neighbour association of one detection batch.
///
/// Every track is predicted to the batch time, each detection is matched to the
/// closest unclaimed track within the gate and applied as an update; unmatched
/// detections start new tracks and unmatched tracks accumulate misses.
pub fn manage_tracks(
    store: &TrackStore,
    detections: &[Detection],
    config: &TrackerConfig,
    t: f64,
) -> TrackStore {
    let t_batch = detections.iter().map(|d| d.timestamp).fold(f64::NEG_INFINITY, f64::max);
    let t_batch = if t_batch.is_finite() { t_batch } else { t };
    let r = Mat3::identity() * config.measurement_sigma.powi(2).max(1e-12);

    let mut tracks: Vec<ObstacleTrack> = store
        .tracks
        .iter()
        .map(|tr| {
            let dt = (t_batch - tr.last_update).max(0.0);
            kf_predict(tr, dt, config.process_noise).unwrap_or_else(|_| tr.clone())
        })
        .collect();

    let mut pairs = Vec::new();
    for (di, d) in detections.iter().enumerate() {
        for (ti, tr) in tracks.iter().enumerate() {
            let dist = (tr.position() - d.position).norm();
            if dist <= config.gate {
                pairs.push((dist, tr.id, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; detections.len()];
    let mut track_hit = vec![false; tracks.len()];
    for (_, _, di, ti) in pairs {
        if det_used[di] || track_hit[ti] {
            continue;
        }
        det_used[di] = true;
        track_hit[ti] = true;
        let d = &detections[di];
        if let Ok(updated) = kf_update(&tracks[ti], &d.position, &r) {
            tracks[ti] = updated;
        }
        tracks[ti].misses = 0;
        tracks[ti].radius = d.radius;
    }

    for (tr, hit) in tracks.iter_mut().zip(&track_hit) {
        if !hit {
            tr.misses += 1;
        }
    }
    tracks.retain(|tr| tr.misses <= config.miss_limit);

    let mut next_id = store.next_id;
    for (d, used) in detections.iter().zip(&det_used) {
        if !used {
            tracks.push(ObstacleTrack::new(
                next_id,
                d.position,
                d.radius,
                d.timestamp,
                config.init_position_var,
                config.init_velocity_var,
            ));
            next_id += 1;
        }
    }
    TrackStore { tracks, next_id }
}
