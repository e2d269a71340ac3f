//! Per-station EDCA state machine and slot-level arbitration.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{AcParams, AccessCategory};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Nothing to send, or not associated.
    Idle,
    /// Waiting for AIFSN idle slots after the channel went idle.
    AifsWait,
    /// Counting down the backoff counter.
    Backoff,
    Transmitting,
}

/// A frame waiting in a station's MAC queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub arrival: SimTime,
    /// Whether the frame arrived after warm-up and is tracked by the ledger.
    pub counted: bool,
}

/// Result of a failed transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureOutcome {
    /// The head frame stays queued for another attempt.
    Retry,
    /// The retry limit was exceeded and the head frame was discarded.
    Dropped { frame: Frame, retransmissions: u32 },
}

#[derive(Clone, Debug)]
pub struct StationState {
    pub station_id: usize,
    pub ac: AccessCategory,
    pub queue: VecDeque<Frame>,
    pub cw_current: u16,
    pub backoff_counter: u16,
    pub retry_count: u32,
    pub aifsn_remaining: u8,
    pub params: AcParams,
    /// Epoch of the parameter set the station last heard.
    pub param_epoch: u64,
    pub phase: Phase,
    /// First idle slot (relative to the start of the current idle period)
    /// from which this station counts.
    pub(crate) ready_slot: u64,
}

impl StationState {
    pub fn new(station_id: usize, ac: AccessCategory, params: AcParams, param_epoch: u64) -> Self {
        Self {
            station_id,
            ac,
            queue: VecDeque::new(),
            cw_current: params.cw_min,
            backoff_counter: 0,
            retry_count: 0,
            aifsn_remaining: params.aifsn,
            params,
            param_epoch,
            phase: Phase::Idle,
            ready_slot: 0,
        }
    }

    pub fn is_contending(&self) -> bool {
        matches!(self.phase, Phase::AifsWait | Phase::Backoff)
    }

    /// Enters contention for the head frame with a fresh backoff draw.
    pub fn begin_access<R: Rng + ?Sized>(&mut self, rng: &mut R, ready_slot: u64) {
        debug_assert!(!self.queue.is_empty());
        self.backoff_counter = draw_backoff(rng, self.cw_current);
        self.restart_aifs(ready_slot);
    }

    /// Starts a new AIFS wait, keeping the backoff counter.
    pub fn restart_aifs(&mut self, ready_slot: u64) {
        self.aifsn_remaining = self.params.aifsn;
        self.ready_slot = ready_slot;
        self.phase = Phase::AifsWait;
    }

    /// Idle slots, counted from the start of the current idle period, after
    /// which this station transmits if nothing interrupts it.
    pub fn transmit_slot(&self) -> u64 {
        self.ready_slot + self.aifsn_remaining as u64 + self.backoff_counter as u64
    }

    /// Applies `slots` idle slots at once; equivalent to that many rounds of
    /// [`arbitrate_slot`] without a transmission.
    pub fn advance_idle(&mut self, slots: u64) {
        let aifs = slots.min(self.aifsn_remaining as u64);
        self.aifsn_remaining -= aifs as u8;
        let rest = slots - aifs;
        debug_assert!(
            rest <= self.backoff_counter as u64,
            "advanced past transmit slot"
        );
        self.backoff_counter -= rest.min(self.backoff_counter as u64) as u16;
        if self.aifsn_remaining == 0 {
            self.phase = Phase::Backoff;
        }
    }

    /// ACK received for the head frame.
    pub fn on_success(&mut self) -> Option<(Frame, u32)> {
        let frame = self.queue.pop_front();
        let retries = self.retry_count;
        self.cw_current = self.params.cw_min;
        self.retry_count = 0;
        self.phase = Phase::Idle;
        frame.map(|f| (f, retries))
    }

    /// Collision or missing ACK for the head frame.
    ///
    /// The window grows as `min(2 * cw + 1, cw_max)`. Once the retry count
    /// exceeds `retry_limit` the frame is dropped and the state reset.
    pub fn on_failure(&mut self, retry_limit: u32) -> FailureOutcome {
        self.retry_count += 1;
        self.phase = Phase::Idle;
        if self.retry_count > retry_limit {
            let frame = self
                .queue
                .pop_front()
                .expect("failed station has a head frame");
            let retransmissions = self.retry_count - 1;
            self.retry_count = 0;
            self.cw_current = self.params.cw_min;
            return FailureOutcome::Dropped {
                frame,
                retransmissions,
            };
        }
        let doubled = (2 * self.cw_current as u32 + 1).min(self.params.cw_max as u32);
        self.cw_current = doubled as u16;
        FailureOutcome::Retry
    }

    /// Adopts newly advertised parameters. An in-progress backoff counter is
    /// kept; the current window is clamped into the new range.
    pub fn apply_params(&mut self, params: AcParams, epoch: u64) {
        self.params = params;
        self.param_epoch = epoch;
        self.cw_current = params.clamp_cw(self.cw_current);
    }
}

/// Uniform backoff in `[0, cw]`, both ends inclusive.
pub fn draw_backoff<R: Rng + ?Sized>(rng: &mut R, cw: u16) -> u16 {
    debug_assert!(cw >= 1);
    rng.random_range(0..=cw)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    Success(usize),
    Collision(Vec<usize>),
}

/// Advances every contending station through one idle slot.
///
/// A station still waiting out its AIFS consumes the slot there; otherwise
/// it decrements its backoff. Stations with both at zero transmit at the end
/// of the slot. Transmitters move to [`Phase::Transmitting`].
pub fn arbitrate_slot(stations: &mut [StationState]) -> SlotOutcome {
    let mut transmitters = Vec::new();
    for st in stations.iter_mut().filter(|s| s.is_contending()) {
        if st.aifsn_remaining > 0 {
            st.aifsn_remaining -= 1;
        } else if st.backoff_counter > 0 {
            st.backoff_counter -= 1;
        }
        if st.aifsn_remaining == 0 {
            st.phase = Phase::Backoff;
            if st.backoff_counter == 0 {
                st.phase = Phase::Transmitting;
                transmitters.push(st.station_id);
            }
        }
    }
    match transmitters.len() {
        0 => SlotOutcome::Idle,
        1 => SlotOutcome::Success(transmitters[0]),
        _ => SlotOutcome::Collision(transmitters),
    }
}
