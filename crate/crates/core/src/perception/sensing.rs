use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::{dynamic_obstacle_position, WorldModel};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Static,
    Dynamic,
}

/// A sensed obstacle, reported as a bounding sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Ground-truth identity when the channel provides one.
    pub obstacle_id: Option<u32>,
    pub position: Vec3,
    pub radius: f64,
    pub channel: Channel,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    /// [m], measured from any quadrotor to the box surface
    pub static_range: f64,
    /// [s]
    pub static_period: f64,
    /// [m]
    pub static_noise_sigma: f64,
    /// [m], measured to the sphere surface
    pub dynamic_range: f64,
    /// [s]
    pub dynamic_period: f64,
    /// [s]
    pub dynamic_latency: f64,
    /// [m]
    pub dynamic_noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            static_range: 15.0,
            static_period: 0.5,
            static_noise_sigma: 0.05,
            dynamic_range: 25.0,
            dynamic_period: 0.02,
            dynamic_latency: 0.01,
            dynamic_noise_sigma: 0.05,
            rng_seed: 0,
        }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.static_range > 0.0 && self.dynamic_range > 0.0) {
            return Err("sensing ranges must be positive".into());
        }
        if !(self.static_period > 0.0 && self.dynamic_period > 0.0) {
            return Err("sensing periods must be positive".into());
        }
        if !(self.dynamic_latency >= 0.0) || self.dynamic_latency > self.static_period {
            return Err("dynamic latency must lie in [0, static_period]".into());
        }
        if !(self.static_noise_sigma >= 0.0 && self.dynamic_noise_sigma >= 0.0) {
            return Err("noise sigmas must be non-negative".into());
        }
        Ok(())
    }
}

fn mix(mut h: u64, v: u64) -> u64 {
    // splitmix64 finaliser over a running hash
    h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn noisy(p: Vec3, sigma: f64, seed: u64, t: f64, id: u64, channel: Channel) -> Vec3 {
    if sigma == 0.0 {
        return p;
    }
    let tick = (t * 1e6).round() as i64 as u64;
    let key = mix(mix(mix(seed, tick), id), channel as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    p + Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng))
}

/// Static channel: every box whose surface is within range of a quadrotor,
/// reported as its noisy center and half-diagonal radius.
pub fn sense_static(world: &WorldModel, quads: &[Vec3], config: &SensingConfig, t: f64) -> Vec<Detection> {
    world
        .static_obstacles
        .iter()
        .enumerate()
        .filter(|(_, b)| quads.iter().any(|q| b.signed_distance(q) <= config.static_range))
        .map(|(i, b)| Detection {
            obstacle_id: Some(i as u32),
            position: noisy(b.center(), config.static_noise_sigma, config.rng_seed, t, i as u64, Channel::Static),
            radius: b.half_diagonal(),
            channel: Channel::Static,
            timestamp: t,
        })
        .collect()
}

/// Dynamic channel: every moving obstacle within range, observed `dynamic_latency`
/// seconds in the past. Identities are not reported.
pub fn sense_dynamic(world: &WorldModel, quads: &[Vec3], config: &SensingConfig, t: f64) -> Vec<Detection> {
    let ts = (t - config.dynamic_latency).max(0.0);
    world
        .dynamic_obstacles
        .iter()
        .filter_map(|o| {
            let (p, _) = dynamic_obstacle_position(o, ts);
            let near = quads.iter().any(|q| (p - q).norm() - o.radius <= config.dynamic_range);
            near.then(|| Detection {
                obstacle_id: None,
                position: noisy(p, config.dynamic_noise_sigma, config.rng_seed, ts, o.id as u64, Channel::Dynamic),
                radius: o.radius,
                channel: Channel::Dynamic,
                timestamp: ts,
            })
        })
        .collect()
}

/// Both channels at time `t`.
pub fn sense(world: &WorldModel, quads: &[Vec3], config: &SensingConfig, t: f64) -> Vec<Detection> {
    let mut out = sense_static(world, quads, config, t);
    out.extend(sense_dynamic(world, quads, config, t));
    out
}
