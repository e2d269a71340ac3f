//! Per-station frame sources.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::AccessCategory;
use crate::time::SimTime;

/// Queue depth used by finite-rate sources unless configured otherwise.
pub const DEFAULT_QUEUE_CAPACITY: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    /// A frame is always waiting; a new one is generated the moment the
    /// previous head-of-line frame leaves the MAC.
    Saturated,
    /// Periodic arrivals at `rate_fps` frames per second.
    ConstantRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSource {
    pub mode: TrafficMode,
    pub payload_bytes: u32,
    /// Frames per second; only meaningful for [`TrafficMode::ConstantRate`].
    pub rate_fps: f64,
    pub queue_capacity: usize,
}

impl TrafficSource {
    pub fn saturated(payload_bytes: u32) -> Self {
        Self {
            mode: TrafficMode::Saturated,
            payload_bytes,
            rate_fps: 0.0,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn constant_rate(payload_bytes: u32, rate_fps: f64) -> Self {
        Self {
            mode: TrafficMode::ConstantRate,
            payload_bytes,
            rate_fps,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn payload_bits(&self) -> u64 {
        self.payload_bytes as u64 * 8
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_bytes == 0 {
            return Err(Error::Config("payload must be at least one byte".into()));
        }
        if self.mode == TrafficMode::ConstantRate {
            if !(self.rate_fps.is_finite() && self.rate_fps > 0.0) {
                return Err(Error::Config(format!(
                    "constant-rate source needs a positive rate, got {}",
                    self.rate_fps
                )));
            }
            if self.queue_capacity == 0 {
                return Err(Error::Config("queue capacity must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Time of the `k`-th periodic arrival (`k = 0` at t = 0).
    pub fn arrival_time(&self, k: u64) -> SimTime {
        SimTime::from_micros((k as f64 * 1e6 / self.rate_fps).round() as u64)
    }

    /// Index of the first periodic arrival at or after `t`.
    pub fn first_arrival_at_or_after(&self, t: SimTime) -> u64 {
        let mut k = (t.as_secs_f64() * self.rate_fps).floor() as u64;
        while k > 0 && self.arrival_time(k - 1) >= t {
            k -= 1;
        }
        while self.arrival_time(k) < t {
            k += 1;
        }
        k
    }
}

/// Default source for each category: saturated, with 50 B voice, 8738 B
/// video and 100 B best-effort payloads.
pub fn default_source_for(ac: AccessCategory) -> Result<TrafficSource> {
    let payload = match ac {
        AccessCategory::Vo => 50,
        AccessCategory::Vi => 8738,
        AccessCategory::Be => 100,
        AccessCategory::Bk => return Err(Error::Unsupported(ac)),
    };
    Ok(TrafficSource::saturated(payload))
}

/// Load submitted to the MAC over `window_secs`.
///
/// A saturated source submits exactly the frames that entered service, so
/// its load is `generated_frames * payload`. A constant-rate source submits
/// `rate * window * payload` regardless of what was delivered.
pub fn offered_load_bits(
    source: &TrafficSource,
    window_secs: f64,
    _delivered_frames: u64,
    generated_frames: u64,
) -> f64 {
    debug_assert!(window_secs > 0.0);
    match source.mode {
        TrafficMode::Saturated => (generated_frames * source.payload_bits()) as f64,
        TrafficMode::ConstantRate => source.rate_fps * window_secs * source.payload_bits() as f64,
    }
}
