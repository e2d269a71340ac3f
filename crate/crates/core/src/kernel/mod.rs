//! Discrete-event EDCA engine.
//!
//! One access point and a set of stations share a single channel. Time is
//! kept in microseconds; contention is resolved on a slot grid anchored at
//! the end of each busy period. Instead of stepping every idle slot the
//! engine computes, for each contending station, the slot at which it would
//! transmit (`ready + AIFSN remaining + backoff`) and jumps straight to the
//! earliest one. Anything that interrupts an idle period (a beacon, a new
//! frame, a departure) freezes the elapsed slots into each station's state
//! and reschedules.

mod phy;
mod station;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use phy::{FrameExchange, PhyTiming};
pub use station::{
    arbitrate_slot, draw_backoff, FailureOutcome, Frame, Phase, SlotOutcome, StationState,
};

use crate::error::{Error, Result};
use crate::event::EventQueue;
use crate::metrics::{MetricsLedger, RunInfo};
use crate::policy::{
    static_edca_params, AcCounters, AccessCategory, EdcaParamSet, EdcaPolicy, PolicyKind,
    QosCapabilityFlags,
};
use crate::runner::ScenarioSpec;
use crate::time::SimTime;
use crate::traffic::{TrafficMode, TrafficSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssociationKind {
    Join,
    Leave,
}

/// A station joining or leaving the cell at a given time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssociationEvent {
    pub station: usize,
    pub kind: AssociationKind,
    pub at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Association(AssociationKind, usize),
    Arrival(usize),
    Beacon,
    /// Earliest transmit slot of the idle period tagged with this generation.
    Contend(u64),
    BusyEnd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Busy {
    Data(Vec<usize>),
    Beacon,
}

/// Channel occupancy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelState {
    pub busy_until: SimTime,
    /// Start of the current idle period; slot boundaries are multiples of
    /// the slot time after it.
    pub idle_since: SimTime,
    busy: Option<Busy>,
}

impl ChannelState {
    pub fn is_idle(&self) -> bool {
        self.busy.is_none()
    }

    /// Stations transmitting data right now.
    pub fn active_transmitters(&self) -> &[usize] {
        match &self.busy {
            Some(Busy::Data(ids)) => ids,
            _ => &[],
        }
    }
}

/// What occupied the channel, recorded when trace capture is enabled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    Success(usize),
    Collision(Vec<usize>),
    Beacon { epoch: u64 },
    Drop(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub start: SimTime,
    pub end: SimTime,
    pub kind: TraceKind,
}

#[derive(Clone, Copy, Debug, Default)]
struct Membership {
    associated: bool,
    departed: bool,
    leave_pending: bool,
    next_arrival: u64,
}

/// A single simulation run.
pub struct Simulation<'p> {
    info: RunInfo,
    policy: &'p dyn EdcaPolicy,
    timing: PhyTiming,
    retry_limit: u32,
    beacon_interval: SimTime,
    warmup: SimTime,
    end: SimTime,
    now: SimTime,

    stations: Vec<StationState>,
    sources: Vec<TrafficSource>,
    rngs: Vec<ChaCha8Rng>,
    members: Vec<Membership>,

    channel: ChannelState,
    queue: EventQueue<Event>,
    contend_generation: u64,
    beacon_pending: bool,

    counters: AcCounters,
    /// Parameter set the AP has computed from the current counters; goes
    /// out with the next beacon.
    pending: EdcaParamSet,
    /// Parameter set carried by the most recent beacon.
    advertised: EdcaParamSet,

    ledger: MetricsLedger,
    trace: Option<Vec<TraceRecord>>,
}

impl<'p> Simulation<'p> {
    pub fn new(spec: &ScenarioSpec, policy: &'p dyn EdcaPolicy, seed: u64) -> Result<Self> {
        spec.validate()?;
        let timing = PhyTiming::from_spec(spec);
        let base = static_edca_params();
        let mut stations = Vec::new();
        let mut sources = Vec::new();
        let mut joins = Vec::new();
        for group in &spec.station_groups {
            for _ in 0..group.count {
                let id = stations.len();
                stations.push(StationState::new(
                    id,
                    group.ac,
                    base.get(group.ac),
                    base.epoch,
                ));
                sources.push(group.source);
                joins.push((id, group.join_time, group.leave_time));
            }
        }
        let rngs = (0..stations.len())
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(id as u64);
                rng
            })
            .collect();
        let info = RunInfo {
            scenario_id: spec.scenario_id.clone(),
            policy: policy.kind(),
            seed,
            duration_s: spec.duration,
            warmup_s: spec.warmup,
        };
        let ledger = MetricsLedger::new(info.clone(), spec.categories());
        let mut sim = Self {
            info,
            policy,
            timing,
            retry_limit: spec.retry_limit,
            beacon_interval: SimTime::from_secs_f64(spec.beacon_interval),
            warmup: SimTime::from_secs_f64(spec.warmup),
            end: SimTime::from_secs_f64(spec.duration),
            now: SimTime::ZERO,
            members: vec![Membership::default(); stations.len()],
            stations,
            sources,
            rngs,
            channel: ChannelState {
                busy_until: SimTime::ZERO,
                idle_since: SimTime::ZERO,
                busy: None,
            },
            queue: EventQueue::new(),
            contend_generation: 0,
            beacon_pending: false,
            counters: AcCounters::default(),
            pending: base,
            advertised: base,
            ledger,
            trace: None,
        };
        for (id, join, leave) in joins {
            sim.queue.push(
                SimTime::from_secs_f64(join),
                Event::Association(AssociationKind::Join, id),
            );
            if let Some(leave) = leave {
                sim.queue.push(
                    SimTime::from_secs_f64(leave),
                    Event::Association(AssociationKind::Leave, id),
                );
            }
        }
        sim.queue.push(sim.beacon_interval, Event::Beacon);
        Ok(sim)
    }

    /// Records every channel occupancy and drop in a trace.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn stations(&self) -> &[StationState] {
        &self.stations
    }

    pub fn channel(&self) -> &ChannelState {
        &self.channel
    }

    pub fn counters(&self) -> AcCounters {
        self.counters
    }

    pub fn advertised(&self) -> &EdcaParamSet {
        &self.advertised
    }

    /// The set the AP will put in its next beacon.
    pub fn pending(&self) -> &EdcaParamSet {
        &self.pending
    }

    pub fn timing(&self) -> &PhyTiming {
        &self.timing
    }

    pub fn is_associated(&self, station: usize) -> bool {
        self.members.get(station).is_some_and(|m| m.associated)
    }

    /// Schedules an extra join or leave. Join events must reference a
    /// station that has never been associated; leave events fail when
    /// processed if the station is not associated at that time.
    pub fn schedule_association(&mut self, event: AssociationEvent) -> Result<()> {
        if event.station >= self.stations.len() {
            return Err(Error::Protocol(format!(
                "station {} does not exist",
                event.station
            )));
        }
        if event.at < self.now {
            return Err(Error::Protocol(format!(
                "association event at {} is in the past (now {})",
                event.at, self.now
            )));
        }
        self.queue
            .push(event.at, Event::Association(event.kind, event.station));
        Ok(())
    }

    /// Processes the next event if it falls before the end of the run.
    /// Returns its time, or `None` once the run is over.
    pub fn step(&mut self) -> Result<Option<SimTime>> {
        match self.queue.peek_time() {
            Some(t) if t < self.end => {}
            _ => return Ok(None),
        }
        let (t, event) = self.queue.pop().expect("peeked");
        debug_assert!(t >= self.now);
        self.now = t;
        match event {
            Event::Association(AssociationKind::Join, id) => self.join(id)?,
            Event::Association(AssociationKind::Leave, id) => self.leave(id)?,
            Event::Arrival(id) => self.arrival(id),
            Event::Beacon => self.beacon(),
            Event::Contend(generation) => {
                if generation == self.contend_generation && self.channel.is_idle() {
                    self.contend();
                }
            }
            Event::BusyEnd => self.busy_end(),
        }
        Ok(Some(t))
    }

    /// Processes every event strictly before `t`.
    pub fn run_until(&mut self, t: SimTime) -> Result<()> {
        while self
            .queue
            .peek_time()
            .is_some_and(|next| next < t.min(self.end))
        {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<MetricsLedger> {
        while self.step()?.is_some() {}
        Ok(self.finish())
    }

    /// Closes the books: frames still queued (or in flight) are recorded as
    /// queued.
    pub fn finish(mut self) -> MetricsLedger {
        for st in &self.stations {
            let queued = st.queue.iter().filter(|f| f.counted).count() as u64;
            if queued > 0 {
                self.ledger.record_queued(st.ac, queued);
            }
        }
        debug_assert!(self.ledger.is_consistent(), "frame conservation violated");
        self.ledger
    }

    pub fn info(&self) -> &RunInfo {
        &self.info
    }

    fn record_trace(&mut self, start: SimTime, end: SimTime, kind: TraceKind) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord { start, end, kind });
        }
    }

    fn in_window(&self) -> bool {
        self.now >= self.warmup
    }

    /// Index of the current idle slot boundary at or after `now`.
    fn ready_slot_now(&self) -> u64 {
        let elapsed = self.now.as_micros() - self.channel.idle_since.as_micros();
        elapsed.div_ceil(self.timing.slot.as_micros())
    }

    fn enqueue_frame(&mut self, id: usize) -> bool {
        let counted = self.in_window();
        let source = self.sources[id];
        let ac = self.stations[id].ac;
        if counted {
            self.ledger.record_generated(ac, source.payload_bits());
        }
        let st = &mut self.stations[id];
        if source.mode == TrafficMode::ConstantRate && st.queue.len() >= source.queue_capacity {
            if counted {
                self.ledger.record_drop(ac, 0);
            }
            return false;
        }
        st.queue.push_back(Frame {
            arrival: self.now,
            counted,
        });
        true
    }

    /// Starts contention for a station that has a frame and is not already
    /// contending or transmitting.
    fn start_access(&mut self, id: usize) {
        let ready = if self.channel.is_idle() {
            self.ready_slot_now()
        } else {
            0
        };
        let st = &mut self.stations[id];
        st.begin_access(&mut self.rngs[id], ready);
    }

    fn join(&mut self, id: usize) -> Result<()> {
        let member = &mut self.members[id];
        if member.associated || member.departed {
            return Err(Error::Protocol(format!(
                "station {id} is already known to the AP"
            )));
        }
        member.associated = true;
        let ac = self.stations[id].ac;
        self.counters = self
            .counters
            .register_association(QosCapabilityFlags::for_category(ac));
        self.pending = self.policy.param_set(&self.counters, &self.advertised);

        let params = self.advertised.get(ac);
        let st = &mut self.stations[id];
        st.params = params;
        st.param_epoch = self.advertised.epoch;
        st.cw_current = params.cw_min;
        st.retry_count = 0;

        let source = self.sources[id];
        match source.mode {
            TrafficMode::Saturated => {
                self.enqueue_frame(id);
            }
            TrafficMode::ConstantRate => {
                let k = source.first_arrival_at_or_after(self.now);
                self.members[id].next_arrival = k;
                self.queue.push(source.arrival_time(k), Event::Arrival(id));
            }
        }
        if !self.stations[id].queue.is_empty() {
            self.start_access(id);
            self.reschedule();
        }
        Ok(())
    }

    fn leave(&mut self, id: usize) -> Result<()> {
        if !self.members[id].associated {
            return Err(Error::Protocol(format!(
                "leave of station {id}, which is not associated"
            )));
        }
        if self.stations[id].phase == Phase::Transmitting {
            self.members[id].leave_pending = true;
            return Ok(());
        }
        self.depart(id)?;
        self.reschedule();
        Ok(())
    }

    fn depart(&mut self, id: usize) -> Result<()> {
        let ac = self.stations[id].ac;
        self.counters = self
            .counters
            .register_disassociation(QosCapabilityFlags::for_category(ac))
            .map_err(|e| Error::Protocol(e.to_string()))?;
        self.pending = self.policy.param_set(&self.counters, &self.advertised);
        let member = &mut self.members[id];
        member.associated = false;
        member.departed = true;
        member.leave_pending = false;

        let st = &mut self.stations[id];
        let head_retries = st.retry_count as u64;
        for (i, frame) in st.queue.drain(..).enumerate() {
            if frame.counted {
                self.ledger
                    .record_drop(ac, if i == 0 { head_retries } else { 0 });
            }
        }
        st.retry_count = 0;
        st.phase = Phase::Idle;
        Ok(())
    }

    fn arrival(&mut self, id: usize) {
        if !self.members[id].associated {
            return;
        }
        let source = self.sources[id];
        let was_empty = self.stations[id].queue.is_empty();
        let accepted = self.enqueue_frame(id);
        let k = self.members[id].next_arrival + 1;
        self.members[id].next_arrival = k;
        self.queue.push(source.arrival_time(k), Event::Arrival(id));
        if accepted && was_empty && self.stations[id].phase == Phase::Idle {
            self.start_access(id);
            self.reschedule();
        }
    }

    /// Applies the idle slots elapsed so far to every contender.
    fn freeze(&mut self) {
        let elapsed =
            (self.now - self.channel.idle_since).as_micros() / self.timing.slot.as_micros();
        for st in self.stations.iter_mut().filter(|s| s.is_contending()) {
            st.advance_idle(elapsed.saturating_sub(st.ready_slot));
        }
    }

    /// Invalidates any pending contention event and schedules the next one.
    fn reschedule(&mut self) {
        self.contend_generation += 1;
        if !self.channel.is_idle() {
            return;
        }
        let next = self
            .stations
            .iter()
            .filter(|s| s.is_contending())
            .map(StationState::transmit_slot)
            .min();
        if let Some(slot) = next {
            let at =
                self.channel.idle_since + SimTime::from_micros(slot * self.timing.slot.as_micros());
            debug_assert!(at >= self.now);
            self.queue.push(at, Event::Contend(self.contend_generation));
        }
    }

    /// The earliest contenders transmit; everybody else freezes.
    fn contend(&mut self) {
        let slot = (self.now - self.channel.idle_since).as_micros() / self.timing.slot.as_micros();
        let mut transmitters = Vec::new();
        let mut data = SimTime::ZERO;
        for st in self.stations.iter_mut().filter(|s| s.is_contending()) {
            if st.transmit_slot() == slot {
                st.advance_idle(slot - st.ready_slot);
                st.phase = Phase::Transmitting;
                transmitters.push(st.station_id);
                let bits = self.sources[st.station_id].payload_bits();
                data = data.max(self.timing.data_duration(bits));
            } else {
                st.advance_idle(slot.saturating_sub(st.ready_slot));
            }
        }
        debug_assert!(!transmitters.is_empty());
        let occupancy = data + self.timing.ack_timeout();
        self.channel.busy = Some(Busy::Data(transmitters));
        self.channel.busy_until = self.now + occupancy;
        self.queue.push(self.channel.busy_until, Event::BusyEnd);
    }

    fn beacon(&mut self) {
        self.queue
            .push(self.now + self.beacon_interval, Event::Beacon);
        if self.channel.is_idle() {
            self.send_beacon();
        } else {
            self.beacon_pending = true;
        }
    }

    fn send_beacon(&mut self) {
        self.beacon_pending = false;
        self.freeze();
        self.contend_generation += 1;
        self.deliver_beacon(self.pending);
        self.channel.busy = Some(Busy::Beacon);
        self.channel.busy_until = self.now + self.timing.beacon;
        self.queue.push(self.channel.busy_until, Event::BusyEnd);
        self.record_trace(
            self.now,
            self.channel.busy_until,
            TraceKind::Beacon {
                epoch: self.advertised.epoch,
            },
        );
    }

    /// Hands `param_set` to every associated station.
    pub fn deliver_beacon(&mut self, param_set: EdcaParamSet) {
        let changed = param_set.epoch != self.advertised.epoch;
        self.advertised = param_set;
        if !changed {
            return;
        }
        for (st, m) in self.stations.iter_mut().zip(&self.members) {
            if m.associated {
                st.apply_params(param_set.get(st.ac), param_set.epoch);
            }
        }
    }

    fn busy_end(&mut self) {
        let busy = self.channel.busy.take().expect("busy period ends");
        let started = self.now;
        if let Busy::Data(transmitters) = busy {
            self.resolve(transmitters, started);
        }
        self.channel.idle_since = self.now;
        if self.beacon_pending {
            self.send_beacon();
            return;
        }
        self.open_idle_period();
    }

    fn resolve(&mut self, transmitters: Vec<usize>, end: SimTime) {
        if let [id] = transmitters[..] {
            let bits = self.sources[id].payload_bits();
            let exchange = self.timing.exchange(bits);
            let begin = end - exchange.data_duration - self.timing.ack_timeout();
            let ac = self.stations[id].ac;
            if let Some((frame, retries)) = self.stations[id].on_success() {
                if frame.counted {
                    let delay = (end - frame.arrival).as_micros();
                    self.ledger.record_delivery(ac, bits, delay, retries as u64);
                }
            }
            self.record_trace(begin, end, TraceKind::Success(id));
            self.after_service(id);
        } else {
            let longest = transmitters
                .iter()
                .map(|&id| self.timing.data_duration(self.sources[id].payload_bits()))
                .max()
                .unwrap_or_default();
            let begin = end - longest - self.timing.ack_timeout();
            if begin >= self.warmup {
                let acs: Vec<AccessCategory> = transmitters
                    .iter()
                    .map(|&id| self.stations[id].ac)
                    .collect();
                self.ledger.record_collision(acs);
            }
            self.record_trace(begin, end, TraceKind::Collision(transmitters.clone()));
            for id in transmitters {
                let ac = self.stations[id].ac;
                match self.stations[id].on_failure(self.retry_limit) {
                    FailureOutcome::Retry => {
                        if self.members[id].leave_pending {
                            self.after_service(id);
                        } else {
                            self.stations[id].begin_access(&mut self.rngs[id], 0);
                        }
                    }
                    FailureOutcome::Dropped {
                        frame,
                        retransmissions,
                    } => {
                        if frame.counted {
                            self.ledger.record_drop(ac, retransmissions as u64);
                        }
                        self.record_trace(end, end, TraceKind::Drop(id));
                        self.after_service(id);
                    }
                }
            }
        }
    }

    /// Head frame left the MAC: refill a saturated source, handle a deferred
    /// departure, or go back to contention with the next queued frame.
    fn after_service(&mut self, id: usize) {
        if self.members[id].leave_pending {
            // Leave validity was checked when the event arrived.
            self.depart(id)
                .expect("pending leave of an associated station");
            return;
        }
        if self.sources[id].mode == TrafficMode::Saturated && self.stations[id].queue.is_empty() {
            self.enqueue_frame(id);
        }
        if !self.stations[id].queue.is_empty() {
            self.stations[id].begin_access(&mut self.rngs[id], 0);
        }
    }

    /// Channel just went idle: every station with a frame restarts its AIFS.
    fn open_idle_period(&mut self) {
        for st in self.stations.iter_mut() {
            if st.is_contending() {
                st.restart_aifs(0);
            }
        }
        self.reschedule();
    }
}

/// Runs `spec` under `policy` with `seed` and returns the filled ledger.
pub fn run(spec: &ScenarioSpec, policy: PolicyKind, seed: u64) -> Result<MetricsLedger> {
    run_with(spec, policy.policy(), seed)
}

pub fn run_with(spec: &ScenarioSpec, policy: &dyn EdcaPolicy, seed: u64) -> Result<MetricsLedger> {
    Simulation::new(spec, policy, seed)?.run()
}
