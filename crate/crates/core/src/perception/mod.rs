//! Simulated sensing, obstacle tracking and event detection.
//!
//! Two channels are modelled: a slow long-period channel reporting static
//! obstacles and a fast low-latency channel reporting moving ones. Both return
//! ground truth corrupted by seeded Gaussian noise.

mod events;
mod kalman;
mod sensing;
mod tracks;

pub use events::{detect_events, EventSet, TriggerConfig, TriggerMode};
pub use kalman::{kf_predict, kf_update, KalmanError, ObstacleTrack, Vec6, Mat6};
pub use sensing::{sense, sense_dynamic, sense_static, Channel, Detection, SensingConfig};
pub use tracks::{manage_tracks, TrackStore, TrackerConfig};
