use crate::runner::ScenarioSpec;
use crate::time::SimTime;

/// Air-time model: every transmission carries a fixed preamble, data is
/// clocked at the PHY rate, and an exchange ends with SIFS plus a
/// fixed-duration ACK. A collided exchange costs the longest data frame plus
/// the ACK timeout (SIFS + ACK).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhyTiming {
    pub slot: SimTime,
    pub sifs: SimTime,
    pub ack: SimTime,
    pub preamble: SimTime,
    pub beacon: SimTime,
    phy_rate_bps: u64,
}

impl PhyTiming {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        let mut timing = Self {
            slot: SimTime::from_secs_f64(spec.slot_time),
            sifs: SimTime::from_secs_f64(spec.sifs),
            ack: SimTime::from_secs_f64(spec.ack_duration),
            preamble: SimTime::from_secs_f64(spec.preamble),
            beacon: SimTime::ZERO,
            phy_rate_bps: spec.phy_rate.round() as u64,
        };
        timing.beacon = timing.data_duration(spec.beacon_bytes as u64 * 8);
        timing
    }

    /// Preamble plus payload air time, rounded up to whole microseconds.
    pub fn data_duration(&self, payload_bits: u64) -> SimTime {
        let air = (payload_bits as u128 * 1_000_000).div_ceil(self.phy_rate_bps as u128);
        self.preamble + SimTime::from_micros(air as u64)
    }

    pub fn exchange(&self, payload_bits: u64) -> FrameExchange {
        FrameExchange {
            payload_bits,
            data_duration: self.data_duration(payload_bits),
            sifs: self.sifs,
            ack_duration: self.ack,
        }
    }

    pub fn ack_timeout(&self) -> SimTime {
        self.sifs + self.ack
    }
}

/// Channel occupancy of one DATA/ACK exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameExchange {
    pub payload_bits: u64,
    pub data_duration: SimTime,
    pub sifs: SimTime,
    pub ack_duration: SimTime,
}

impl FrameExchange {
    pub fn success_occupancy(&self) -> SimTime {
        self.data_duration + self.sifs + self.ack_duration
    }

    pub fn collision_occupancy(&self) -> SimTime {
        self.data_duration + self.sifs + self.ack_duration
    }
}
