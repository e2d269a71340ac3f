//! Scenario descriptions and their TOML configuration format.
//!
//! ```toml
//! id = "128BE+30VO"
//! duration = 10.0          # simulated seconds
//! warmup = 1.0             # excluded from statistics
//! # beacon_interval = 0.1024, slot_time = 9e-6, phy_rate = 65e6,
//! # retry_limit = 7, sifs = 16e-6, ack_duration = 44e-6,
//! # preamble = 40e-6, beacon_bytes = 120
//!
//! [[group]]
//! ac = "BE"
//! count = 128
//!
//! [[group]]
//! ac = "VO"
//! count = 30
//! # mode = "saturated" | "constant_rate", payload_bytes, rate_fps,
//! # queue_capacity, join_time, leave_time
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::AccessCategory;
use crate::time::SimTime;
use crate::traffic::{default_source_for, TrafficMode, TrafficSource, DEFAULT_QUEUE_CAPACITY};

pub const DEFAULT_BEACON_INTERVAL: f64 = 0.1024;
pub const DEFAULT_SLOT_TIME: f64 = 9e-6;
pub const DEFAULT_PHY_RATE: f64 = 65e6;
pub const DEFAULT_RETRY_LIMIT: u32 = 7;
pub const DEFAULT_DURATION: f64 = 10.0;
pub const DEFAULT_WARMUP: f64 = 1.0;
pub const DEFAULT_SIFS: f64 = 16e-6;
pub const DEFAULT_ACK_DURATION: f64 = 44e-6;
pub const DEFAULT_PREAMBLE: f64 = 40e-6;
pub const DEFAULT_BEACON_BYTES: u32 = 120;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationGroup {
    pub ac: AccessCategory,
    pub count: u32,
    pub source: TrafficSource,
    /// Seconds.
    pub join_time: f64,
    pub leave_time: Option<f64>,
}

impl StationGroup {
    /// Saturated group with the category's default payload, present for the
    /// whole run.
    pub fn saturated(ac: AccessCategory, count: u32) -> Result<Self> {
        Ok(Self {
            ac,
            count,
            source: default_source_for(ac)?,
            join_time: 0.0,
            leave_time: None,
        })
    }
}

/// Everything needed to reproduce one simulated cell. Times are seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub station_groups: Vec<StationGroup>,
    pub duration: f64,
    pub warmup: f64,
    pub beacon_interval: f64,
    pub slot_time: f64,
    pub phy_rate: f64,
    pub retry_limit: u32,
    pub sifs: f64,
    pub ack_duration: f64,
    pub preamble: f64,
    pub beacon_bytes: u32,
}

impl ScenarioSpec {
    /// A scenario with default timing and the given groups.
    pub fn new(scenario_id: impl Into<String>, station_groups: Vec<StationGroup>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            station_groups,
            duration: DEFAULT_DURATION,
            warmup: DEFAULT_WARMUP,
            beacon_interval: DEFAULT_BEACON_INTERVAL,
            slot_time: DEFAULT_SLOT_TIME,
            phy_rate: DEFAULT_PHY_RATE,
            retry_limit: DEFAULT_RETRY_LIMIT,
            sifs: DEFAULT_SIFS,
            ack_duration: DEFAULT_ACK_DURATION,
            preamble: DEFAULT_PREAMBLE,
            beacon_bytes: DEFAULT_BEACON_BYTES,
        }
    }

    pub fn with_duration(mut self, duration: f64, warmup: f64) -> Self {
        self.duration = duration;
        self.warmup = warmup;
        self
    }

    pub fn total_stations(&self) -> u64 {
        self.station_groups.iter().map(|g| g.count as u64).sum()
    }

    /// Categories with at least one station, highest priority first.
    pub fn categories(&self) -> Vec<AccessCategory> {
        AccessCategory::ALL
            .into_iter()
            .filter(|ac| {
                self.station_groups
                    .iter()
                    .any(|g| g.ac == *ac && g.count > 0)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("{}: {msg}", self.scenario_id)));
        if self.scenario_id.is_empty() || self.scenario_id.contains([',', '\n', '"']) {
            return Err(Error::Config(format!(
                "scenario id `{}` must be non-empty and free of commas, quotes and newlines",
                self.scenario_id
            )));
        }
        if self.total_stations() == 0 {
            return fail("at least one station is required".into());
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{}: {name} must be positive, got {v}",
                    self.scenario_id
                )))
            }
        };
        positive("duration", self.duration)?;
        positive("beacon_interval", self.beacon_interval)?;
        positive("slot_time", self.slot_time)?;
        positive("phy_rate", self.phy_rate)?;
        positive("sifs", self.sifs)?;
        positive("ack_duration", self.ack_duration)?;
        if !(self.preamble.is_finite() && self.preamble >= 0.0) {
            return fail(format!(
                "preamble must be non-negative, got {}",
                self.preamble
            ));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return fail(format!("warmup must be non-negative, got {}", self.warmup));
        }
        if self.duration <= self.warmup {
            return fail(format!(
                "duration ({}) must exceed warmup ({})",
                self.duration, self.warmup
            ));
        }
        if SimTime::from_secs_f64(self.slot_time).as_micros() == 0 {
            return fail("slot_time must be at least one microsecond".into());
        }
        if SimTime::from_secs_f64(self.beacon_interval).as_micros() == 0 {
            return fail("beacon_interval must be at least one microsecond".into());
        }
        for (i, g) in self.station_groups.iter().enumerate() {
            g.source
                .validate()
                .map_err(|e| Error::Config(format!("{}: group[{i}]: {e}", self.scenario_id)))?;
            if !(g.join_time.is_finite() && g.join_time >= 0.0) {
                return fail(format!("group[{i}].join_time must be non-negative"));
            }
            if let Some(leave) = g.leave_time {
                if !(leave.is_finite() && leave > g.join_time) {
                    return fail(format!(
                        "group[{i}].leave_time ({leave}) must be after join_time ({})",
                        g.join_time
                    ));
                }
            }
        }
        Ok(())
    }

    /// Serializes to the configuration format accepted by [`parse_scenario`].
    pub fn to_config(&self) -> String {
        let groups = self
            .station_groups
            .iter()
            .map(|g| GroupFile {
                ac: g.ac.as_str().to_string(),
                count: g.count as i64,
                mode: Some(g.source.mode),
                payload_bytes: Some(g.source.payload_bytes),
                rate_fps: (g.source.mode == TrafficMode::ConstantRate).then_some(g.source.rate_fps),
                queue_capacity: Some(g.source.queue_capacity),
                join_time: Some(g.join_time),
                leave_time: g.leave_time,
            })
            .collect();
        let file = ScenarioFile {
            id: self.scenario_id.clone(),
            duration: Some(self.duration),
            warmup: Some(self.warmup),
            beacon_interval: Some(self.beacon_interval),
            slot_time: Some(self.slot_time),
            phy_rate: Some(self.phy_rate),
            retry_limit: Some(self.retry_limit as i64),
            sifs: Some(self.sifs),
            ack_duration: Some(self.ack_duration),
            preamble: Some(self.preamble),
            beacon_bytes: Some(self.beacon_bytes),
            group: groups,
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warmup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beacon_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slot_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phy_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    retry_limit: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sifs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ack_duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preamble: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beacon_bytes: Option<u32>,
    #[serde(default)]
    group: Vec<GroupFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    ac: String,
    count: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<TrafficMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    payload_bytes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_fps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    queue_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    join_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leave_time: Option<f64>,
}

impl GroupFile {
    fn into_group(self, index: usize) -> Result<StationGroup> {
        let field =
            |name: &str, msg: String| Error::Config(format!("group[{index}].{name}: {msg}"));
        let ac: AccessCategory = self
            .ac
            .parse()
            .map_err(|_| field("ac", format!("unknown access category `{}`", self.ac)))?;
        if self.count < 0 {
            return Err(field("count", format!("must be >= 0, got {}", self.count)));
        }
        let count = u32::try_from(self.count)
            .map_err(|_| field("count", format!("too large: {}", self.count)))?;
        let mode = self.mode.unwrap_or(TrafficMode::Saturated);
        let payload_bytes = match self.payload_bytes {
            Some(p) => p,
            None => {
                default_source_for(ac)
                    .map_err(|_| field("payload_bytes", format!("required for {ac} groups")))?
                    .payload_bytes
            }
        };
        let rate_fps = match (mode, self.rate_fps) {
            (TrafficMode::ConstantRate, Some(r)) => r,
            (TrafficMode::ConstantRate, None) => {
                return Err(field("rate_fps", "required for constant_rate mode".into()))
            }
            (TrafficMode::Saturated, Some(_)) => {
                return Err(field(
                    "rate_fps",
                    "only valid with mode = \"constant_rate\"".into(),
                ))
            }
            (TrafficMode::Saturated, None) => 0.0,
        };
        Ok(StationGroup {
            ac,
            count,
            source: TrafficSource {
                mode,
                payload_bytes,
                rate_fps,
                queue_capacity: self.queue_capacity.unwrap_or(DEFAULT_QUEUE_CAPACITY),
            },
            join_time: self.join_time.unwrap_or(0.0),
            leave_time: self.leave_time,
        })
    }
}

/// Parses and validates a scenario configuration, applying defaults for
/// every omitted key. Unknown keys are rejected.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let retry_limit = match file.retry_limit {
        None => DEFAULT_RETRY_LIMIT,
        Some(r) => u32::try_from(r)
            .map_err(|_| Error::Config(format!("retry_limit: must be >= 0, got {r}")))?,
    };
    let groups = file
        .group
        .into_iter()
        .enumerate()
        .map(|(i, g)| g.into_group(i))
        .collect::<Result<Vec<_>>>()?;
    let spec = ScenarioSpec {
        scenario_id: file.id,
        station_groups: groups,
        duration: file.duration.unwrap_or(DEFAULT_DURATION),
        warmup: file.warmup.unwrap_or(DEFAULT_WARMUP),
        beacon_interval: file.beacon_interval.unwrap_or(DEFAULT_BEACON_INTERVAL),
        slot_time: file.slot_time.unwrap_or(DEFAULT_SLOT_TIME),
        phy_rate: file.phy_rate.unwrap_or(DEFAULT_PHY_RATE),
        retry_limit,
        sifs: file.sifs.unwrap_or(DEFAULT_SIFS),
        ack_duration: file.ack_duration.unwrap_or(DEFAULT_ACK_DURATION),
        preamble: file.preamble.unwrap_or(DEFAULT_PREAMBLE),
        beacon_bytes: file.beacon_bytes.unwrap_or(DEFAULT_BEACON_BYTES),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_err(text: &str) -> String {
        match parse_scenario(text) {
            Err(Error::Config(msg)) => msg,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_scenario("id = \"32BE\"\n[[group]]\nac = \"BE\"\ncount = 32\n").unwrap();
        assert_eq!(spec.scenario_id, "32BE");
        assert_eq!(spec.beacon_interval, 0.1024);
        assert_eq!(spec.slot_time, 9e-6);
        assert_eq!(spec.phy_rate, 65e6);
        assert_eq!(spec.retry_limit, 7);
        assert_eq!(spec.duration, 10.0);
        assert_eq!(spec.warmup, 1.0);
        assert_eq!(spec.station_groups.len(), 1);
        let g = &spec.station_groups[0];
        assert_eq!(g.ac, AccessCategory::Be);
        assert_eq!(g.count, 32);
        assert_eq!(g.source, TrafficSource::saturated(100));
        assert_eq!(g.join_time, 0.0);
        assert_eq!(g.leave_time, None);
    }

    #[test]
    fn duration_must_exceed_warmup() {
        let msg = config_err(
            "id = \"x\"\nduration = 1.0\nwarmup = 1.0\n[[group]]\nac = \"BE\"\ncount = 1\n",
        );
        assert!(msg.contains("warmup"), "{msg}");
    }

    #[test]
    fn negative_count_rejected() {
        let msg = config_err("id = \"x\"\n[[group]]\nac = \"BE\"\ncount = -3\n");
        assert!(msg.contains("group[0].count"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let msg = config_err("id = \"x\"\ncolour = 3\n[[group]]\nac = \"BE\"\ncount = 1\n");
        assert!(msg.contains("colour"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        let msg = config_err("id = \"x\"\n[[group]]\nac = \"BE\"\ncount = 1\nspeed = 2\n");
        assert!(msg.contains("speed"), "{msg}");
    }

    #[test]
    fn empty_network_rejected() {
        config_err("id = \"x\"\n[[group]]\nac = \"BE\"\ncount = 0\n");
        config_err("id = \"x\"\n");
    }

    #[test]
    fn leave_must_follow_join() {
        let msg = config_err(
            "id = \"x\"\n[[group]]\nac = \"VO\"\ncount = 1\njoin_time = 2.0\nleave_time = 1.0\n",
        );
        assert!(msg.contains("leave_time"), "{msg}");
    }

    #[test]
    fn constant_rate_requires_rate() {
        config_err("id = \"x\"\n[[group]]\nac = \"VO\"\ncount = 1\nmode = \"constant_rate\"\n");
        let spec = parse_scenario(
            "id = \"x\"\n[[group]]\nac = \"VO\"\ncount = 2\nmode = \"constant_rate\"\nrate_fps = 50.0\n",
        )
        .unwrap();
        assert_eq!(spec.station_groups[0].source.rate_fps, 50.0);
        assert_eq!(spec.station_groups[0].source.queue_capacity, 50);
    }

    #[test]
    fn bk_needs_explicit_payload() {
        config_err("id = \"x\"\n[[group]]\nac = \"BK\"\ncount = 1\n");
        let spec =
            parse_scenario("id = \"x\"\n[[group]]\nac = \"BK\"\ncount = 1\npayload_bytes = 200\n")
                .unwrap();
        assert_eq!(spec.station_groups[0].source.payload_bytes, 200);
    }

    #[test]
    fn config_round_trip() {
        let mut spec = ScenarioSpec::new(
            "mix",
            vec![
                StationGroup::saturated(AccessCategory::Be, 12).unwrap(),
                StationGroup {
                    ac: AccessCategory::Vo,
                    count: 3,
                    source: TrafficSource::constant_rate(50, 25.0),
                    join_time: 0.5,
                    leave_time: Some(4.0),
                },
            ],
        );
        spec.retry_limit = 4;
        assert_eq!(parse_scenario(&spec.to_config()).unwrap(), spec);
    }
}
