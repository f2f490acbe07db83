//! Discrete-event network engine.
//!
//! Time is split into periods. Each period starts with a short duty-cycling
//! phase in which every live node fires one event at a random offset; the
//! rest of the period belongs to the application. Radios are unit disks whose
//! radius is the transmission level each sender picks, delivery is
//! instantaneous, and every (message, receiver) pair is dropped independently
//! with probability `p_loss`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::energy::{period_consumption, Battery, EnergyBuckets};
use crate::protocol::{
    ActivationState, Activity, CallbackId, DutyCycler, DutyCyclingMessage, NodeId, ProtocolError,
};
use crate::seeding::{node_period_rng, topology_rng, StreamRng};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("network must contain at least one node")]
    EmptyNetwork,
    #[error("node position ({x}, {y}) is outside the unit square")]
    OutOfSquare { x: f64, y: f64 },
    #[error("node {0} does not exist")]
    NoSuchNode(NodeId),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Static node placement in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
}

impl Topology {
    /// `k` positions i.i.d. uniform on `[0, 1]²`.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self, SimError> {
        if k == 0 {
            return Err(SimError::EmptyNetwork);
        }
        let positions = (0..k)
            .map(|_| Point {
                x: rng.random(),
                y: rng.random(),
            })
            .collect();
        Ok(Self { positions })
    }

    pub fn from_positions(positions: Vec<Point>) -> Result<Self, SimError> {
        if positions.is_empty() {
            return Err(SimError::EmptyNetwork);
        }
        if let Some(p) = positions
            .iter()
            .find(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
        {
            return Err(SimError::OutOfSquare { x: p.x, y: p.y });
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.positions[a].distance(&self.positions[b])
    }

    /// Nodes other than `from` within `radius`, in id order.
    pub fn in_range(&self, from: NodeId, radius: f64) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&j| j != from && self.distance(from, j) <= radius)
            .collect()
    }
}

/// Per-sender, per-level receiver lists, precomputed for a fixed level set.
#[derive(Debug, Clone)]
struct ReachTable {
    by_node: Vec<Vec<Vec<NodeId>>>,
}

impl ReachTable {
    fn new(topology: &Topology, levels: &[f64]) -> Self {
        let by_node = (0..topology.len())
            .map(|i| levels.iter().map(|&r| topology.in_range(i, r)).collect())
            .collect();
        Self { by_node }
    }

    fn receivers(&self, sender: NodeId, level: usize) -> &[NodeId] {
        &self.by_node[sender][level]
    }
}

/// Independent Bernoulli drop of each (message, receiver) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub p_loss: f64,
}

impl LossModel {
    /// `u` is uniform on `[0, 1)`; delivery happens with probability `1 - p_loss`.
    #[inline]
    pub fn delivers(&self, u: f64) -> bool {
        u >= self.p_loss
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.delivers(rng.random::<f64>())
    }
}

/// Receivers of one broadcast: in-range nodes in id order that survive the
/// loss draw.
pub fn deliver<R: Rng + ?Sized>(
    msg: &DutyCyclingMessage,
    radius: f64,
    topology: &Topology,
    loss: LossModel,
    rng: &mut R,
) -> Vec<NodeId> {
    topology
        .in_range(msg.sender, radius)
        .into_iter()
        .filter(|_| loss.draw(rng))
        .collect()
}

/// Period layout in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodSchedule {
    pub delta_seconds: f64,
    pub phase1_seconds: f64,
    pub total_periods: u64,
}

impl Default for PeriodSchedule {
    fn default() -> Self {
        Self {
            delta_seconds: 60.0,
            phase1_seconds: 0.05,
            total_periods: 30 * 1440,
        }
    }
}

impl PeriodSchedule {
    /// Share of the period spent in the duty-cycling phase.
    pub fn radio_fraction(&self) -> f64 {
        self.phase1_seconds / self.delta_seconds
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.phase1_seconds > 0.0 && self.phase1_seconds < self.delta_seconds) {
            return Err("phase1_seconds must satisfy 0 < phase1_seconds < delta_seconds".into());
        }
        if !self.delta_seconds.is_finite() {
            return Err("delta_seconds must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PeriodStart,
    DutyCycling(NodeId),
    PhaseOneEnd,
}

impl EventKind {
    fn rank(&self) -> (u8, NodeId) {
        match *self {
            EventKind::PeriodStart => (0, 0),
            EventKind::DutyCycling(id) => (1, id),
            EventKind::PhaseOneEnd => (2, 0),
        }
    }
}

/// An event at `offset` seconds into `period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub period: u64,
    pub offset: f64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.period
            .cmp(&other.period)
            .then(self.offset.total_cmp(&other.offset))
            .then(self.kind.rank().cmp(&other.kind.rank()))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events; equal timestamps pop in kind order, then by node id.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, event: Event) {
        self.heap.push(std::cmp::Reverse(event));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Network observables for one period.
///
/// `mean_activity` is the fraction of nodes active for the application phase
/// of this period, `mean_battery` and `sun` are taken at the period start and
/// `energy` is cumulative consumption through the end of the period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub period: u64,
    pub mean_activity: f64,
    pub mean_battery: f64,
    pub sun: f64,
    pub cloud: f64,
    pub energy: EnergyBuckets,
    #[serde(skip)]
    pub messages_sent: usize,
    #[serde(skip)]
    pub messages_received: usize,
}

/// Run-wide energy balance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    pub initial: f64,
    pub current: f64,
    pub debited: f64,
    pub credited: f64,
    pub deficit: f64,
    pub wasted: f64,
}

impl EnergyLedger {
    /// `(initial - current) + credited - (debited + wasted - deficit)`;
    /// zero up to rounding.
    pub fn imbalance(&self) -> f64 {
        (self.initial - self.current) + self.credited - (self.debited + self.wasted - self.deficit)
    }

    /// Total energy moved through the batteries.
    pub fn throughput(&self) -> f64 {
        self.initial + self.debited + self.credited
    }
}

#[derive(Debug)]
struct Node {
    protocol: DutyCycler,
    battery: Battery,
    sent: usize,
    received: usize,
}

/// One simulation run. Owns all mutable state; independent instances share
/// nothing.
#[derive(Debug)]
pub struct Simulation {
    config: RunConfig,
    topology: Topology,
    reach: ReachTable,
    nodes: Vec<Node>,
    streams: Vec<StreamRng>,
    queue: EventQueue,
    period: u64,
    energy: EnergyBuckets,
    initial_energy: f64,
    revive_level: f64,
    offsets: Option<Vec<f64>>,
}

impl Simulation {
    /// Validates `config` and places nodes with the topology stream.
    pub fn new(config: RunConfig) -> Result<Self, SimError> {
        config
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let topology = Topology::random(config.network.nodes, &mut topology_rng(config.seed))?;
        Self::with_topology(config, topology)
    }

    pub fn with_topology(config: RunConfig, topology: Topology) -> Result<Self, SimError> {
        config
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let reach = ReachTable::new(&topology, &config.protocol.levels);
        let nodes: Vec<Node> = (0..topology.len())
            .map(|i| Node {
                protocol: DutyCycler::new(i, &config.protocol),
                battery: Battery::new(config.network.initial_battery),
                sent: 0,
                received: 0,
            })
            .collect();
        let streams = (0..nodes.len())
            .map(|i| node_period_rng(config.seed, i, 0))
            .collect();
        let initial_energy = nodes.iter().map(|n| n.battery.level()).sum();
        let revive_level =
            config.energy.e_tx + config.energy.e_on * config.schedule.radio_fraction();
        Ok(Self {
            config,
            topology,
            reach,
            nodes,
            streams,
            queue: EventQueue::new(),
            period: 0,
            energy: EnergyBuckets::default(),
            initial_energy,
            revive_level,
            offsets: None,
        })
    }

    /// Pin the in-period event offsets instead of drawing them. The offset
    /// draw is still consumed from each node stream.
    pub fn set_fixed_offsets(&mut self, offsets: Vec<f64>) -> Result<(), SimError> {
        if offsets.len() != self.nodes.len() {
            return Err(SimError::Config(format!(
                "expected {} offsets, got {}",
                self.nodes.len(),
                offsets.len()
            )));
        }
        if offsets
            .iter()
            .any(|o| !(0.0..self.config.schedule.phase1_seconds).contains(o))
        {
            return Err(SimError::Config(
                "offsets must lie in [0, phase1_seconds)".into(),
            ));
        }
        self.offsets = Some(offsets);
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Index of the next period to run.
    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_state(&self, id: NodeId) -> Result<ActivationState, SimError> {
        self.node(id).map(|n| n.protocol.state())
    }

    pub fn battery(&self, id: NodeId) -> Result<Battery, SimError> {
        self.node(id).map(|n| n.battery)
    }

    /// Whether the node currently runs the protocol (false once its battery
    /// ran dry, until it recovers).
    pub fn is_alive(&self, id: NodeId) -> Result<bool, SimError> {
        self.node(id).map(|n| n.protocol.is_enabled())
    }

    pub fn inbox_len(&self, id: NodeId) -> Result<usize, SimError> {
        self.node(id).map(|n| n.protocol.inbox().len())
    }

    fn node(&self, id: NodeId) -> Result<&Node, SimError> {
        self.nodes.get(id).ok_or(SimError::NoSuchNode(id))
    }

    pub fn activities(&self) -> Vec<bool> {
        self.nodes.iter().map(|n| n.protocol.is_active()).collect()
    }

    pub fn register_changed_callback<F>(&mut self, id: NodeId, f: F) -> Result<CallbackId, SimError>
    where
        F: FnMut(NodeId, Activity) + Send + 'static,
    {
        let node = self.nodes.get_mut(id).ok_or(SimError::NoSuchNode(id))?;
        Ok(node.protocol.register_changed_callback(f))
    }

    pub fn unregister_changed_callback(
        &mut self,
        id: NodeId,
        handle: CallbackId,
    ) -> Result<bool, SimError> {
        let node = self.nodes.get_mut(id).ok_or(SimError::NoSuchNode(id))?;
        Ok(node.protocol.unregister_changed_callback(handle))
    }

    /// Cumulative consumption by bucket.
    pub fn energy(&self) -> EnergyBuckets {
        self.energy
    }

    pub fn ledger(&self) -> EnergyLedger {
        let mut l = EnergyLedger {
            initial: self.initial_energy,
            ..Default::default()
        };
        for n in &self.nodes {
            l.current += n.battery.level();
            l.debited += n.battery.debited();
            l.credited += n.battery.credited();
            l.deficit += n.battery.deficit();
            l.wasted += n.battery.wasted();
        }
        l
    }

    /// Run all remaining periods of the schedule.
    pub fn run(&mut self) -> Result<Vec<TraceRecord>, SimError> {
        let remaining = self
            .config
            .schedule
            .total_periods
            .saturating_sub(self.period);
        self.run_for(remaining)
    }

    pub fn run_for(&mut self, periods: u64) -> Result<Vec<TraceRecord>, SimError> {
        (0..periods).map(|_| self.run_period()).collect()
    }

    /// Advance by one period.
    pub fn run_period(&mut self) -> Result<TraceRecord, SimError> {
        let n = self.period;
        self.queue.schedule(Event {
            period: n,
            offset: 0.0,
            kind: EventKind::PeriodStart,
        });
        let mut record = None;
        while let Some(ev) = self.queue.pop() {
            match ev.kind {
                EventKind::PeriodStart => self.start_period(n),
                EventKind::DutyCycling(id) => self.duty_cycling(id)?,
                EventKind::PhaseOneEnd => {
                    record = Some(self.finish_period(n));
                    break;
                }
            }
        }
        self.period += 1;
        Ok(record.expect("every period ends with a PhaseOneEnd event"))
    }

    fn start_period(&mut self, n: u64) {
        let phase1 = self.config.schedule.phase1_seconds;
        for (i, (node, rng)) in self.nodes.iter_mut().zip(&mut self.streams).enumerate() {
            *rng = node_period_rng(self.config.seed, i, n);
            node.sent = 0;
            node.received = 0;
            let drawn = rng.random::<f64>() * phase1;
            let offset = self.offsets.as_ref().map_or(drawn, |o| o[i]);

            let level = node.battery.level();
            if node.protocol.is_enabled() && level <= 0.0 {
                node.protocol.disable();
            } else if !node.protocol.is_enabled() && level > self.revive_level {
                node.protocol.enable();
            }
            if node.protocol.is_enabled() {
                self.queue.schedule(Event {
                    period: n,
                    offset,
                    kind: EventKind::DutyCycling(i),
                });
            }
        }
        self.queue.schedule(Event {
            period: n,
            offset: phase1,
            kind: EventKind::PhaseOneEnd,
        });
    }

    fn duty_cycling(&mut self, id: NodeId) -> Result<(), SimError> {
        let params = &self.config.protocol;
        let rng = &mut self.streams[id];
        let node = &mut self.nodes[id];
        let battery = node.battery.level();
        let Some(outcome) = node.protocol.on_event(battery, params, rng)? else {
            return Ok(());
        };
        node.sent += 1;
        let loss = LossModel {
            p_loss: self.config.network.p_loss,
        };
        for &j in self.reach.receivers(id, outcome.level_index) {
            let receiver = &mut self.nodes[j];
            if !receiver.protocol.is_enabled() {
                continue;
            }
            if loss.draw(rng) {
                receiver.protocol.receive(outcome.message);
                receiver.received += 1;
            }
        }
        Ok(())
    }

    fn finish_period(&mut self, n: u64) -> TraceRecord {
        let env = &self.config.environment;
        let phi = self.config.schedule.radio_fraction();
        let harvest = env.harvest(n, self.config.energy.f);
        let k = self.nodes.len() as f64;
        let mut active = 0usize;
        let mut battery_sum = 0.0;
        let mut sent = 0;
        let mut received = 0;
        for node in &mut self.nodes {
            battery_sum += node.battery.level();
            if node.protocol.is_active() {
                active += 1;
            }
            sent += node.sent;
            received += node.received;
            if node.protocol.is_enabled() {
                let spent = period_consumption(
                    node.protocol.is_active(),
                    phi,
                    node.sent,
                    node.received,
                    &self.config.energy,
                );
                self.energy += spent;
                node.battery.debit(spent.total());
            }
            node.battery.credit(harvest);
        }
        TraceRecord {
            period: n,
            mean_activity: active as f64 / k,
            mean_battery: battery_sum / k,
            sun: env.sun(n as f64),
            cloud: env.cloud(n),
            energy: self.energy,
            messages_sent: sent,
            messages_received: received,
        }
    }
}
