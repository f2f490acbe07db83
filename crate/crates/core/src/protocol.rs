//! Per-node duty-cycling state machine.
//!
//! Each node carries a real-valued activation variable `s` and a binary
//! activity flag. Once per period, during the short duty-cycling phase, the
//! node runs [`duty_cycling_event`]:
//!
//! 1. decide activity from the current `s` ([`compute_activity`]),
//! 2. if inactive, possibly wake up spontaneously ([`spontaneous_activation`]),
//! 3. pick a transmission radius from the battery level
//!    ([`ideal_power`] followed by [`snap_power`]),
//! 4. fold the queued neighbour activities into `s` ([`update_state`]),
//! 5. broadcast the new `s`.
//!
//! [`DutyCycler`] wraps the same step with enable/disable and activity-change
//! callbacks for embedding in a node runtime.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node identifier, dense in `0..k`.
pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("battery level {0} is outside [0, 1]")]
    BatteryOutOfRange(f64),
    #[error("invalid protocol parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Activation variable and activity flag of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationState {
    pub s: f64,
    pub active: bool,
}

impl ActivationState {
    /// Start state: `s` at the threshold, which makes every node active.
    pub fn initial(params: &ProtocolParams) -> Self {
        Self {
            s: params.theta_act,
            active: compute_activity(params.theta_act, params.theta_act),
        }
    }
}

/// The single-field duty-cycling message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCyclingMessage {
    pub sender: NodeId,
    pub activity: f64,
}

/// Queue of received duty-cycling messages, consumed once per period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inbox {
    messages: Vec<DutyCyclingMessage>,
}

impl Inbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, msg: DutyCyclingMessage) {
        self.messages.push(msg);
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[DutyCyclingMessage] {
        &self.messages
    }

    /// Sum of the queued activities, in arrival order.
    pub fn activity_sum(&self) -> f64 {
        self.messages.iter().map(|m| m.activity).sum()
    }

    pub fn clear(&mut self) {
        self.messages.clear();
    }
}

impl FromIterator<DutyCyclingMessage> for Inbox {
    fn from_iter<I: IntoIterator<Item = DutyCyclingMessage>>(iter: I) -> Self {
        Self {
            messages: iter.into_iter().collect(),
        }
    }
}

/// Protocol parameters. Radii (`p_min`, `p_max`, `levels`) are in units of the
/// side of the unit deployment square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Activation threshold; also the initial value of `s`.
    pub theta_act: f64,
    /// Value `s` is set to on spontaneous activation.
    pub s_a: f64,
    /// Per-event probability that an inactive node wakes up by itself.
    pub p_a: f64,
    /// Gain of the tanh state update.
    pub g: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Available transmission radii, strictly increasing.
    pub levels: Vec<f64>,
}

/// Maximum radius of the default level set.
pub const DEFAULT_MAX_RADIUS: f64 = 0.5;

/// Activation threshold selected by the baseline activity calibration. Any
/// positive received activity keeps a node active, so activity waves persist
/// until the gain decay pushes `s` below this value.
pub const CALIBRATED_THETA_ACT: f64 = 1e-24;

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            theta_act: CALIBRATED_THETA_ACT,
            s_a: 1.0,
            p_a: 0.001,
            g: 0.1,
            p_min: 0.07,
            p_max: 0.14,
            levels: uniform_levels(6, DEFAULT_MAX_RADIUS),
        }
    }
}

/// `n` evenly spaced radii `max/n, 2·max/n, …, max`.
pub fn uniform_levels(n: usize, max: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * max / n as f64).collect()
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |field, reason: &str| {
            Err(ProtocolError::InvalidParam {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.theta_act > 0.0 && self.theta_act < 1.0) {
            return bad("theta_act", "must lie in (0, 1)");
        }
        if !self.s_a.is_finite() {
            return bad("s_a", "must be finite");
        }
        if !(0.0..=1.0).contains(&self.p_a) {
            return bad("p_a", "must lie in [0, 1]");
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return bad("g", "must be positive");
        }
        if !(self.p_min >= 0.0 && self.p_min.is_finite()) {
            return bad("p_min", "must be non-negative");
        }
        if !(self.p_max >= self.p_min && self.p_max.is_finite()) {
            return bad("p_max", "must be at least p_min");
        }
        if self.levels.is_empty() {
            return bad("levels", "must not be empty");
        }
        if self.levels.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return bad("levels", "must be finite and non-negative");
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels", "must be strictly increasing");
        }
        Ok(())
    }
}

/// Step function on `s - theta_act`; zero counts as active.
#[inline]
pub fn compute_activity(s: f64, theta_act: f64) -> bool {
    s - theta_act >= 0.0
}

/// Wake an inactive node when the draw `u` is at most `p_a`.
pub fn spontaneous_activation(
    state: ActivationState,
    params: &ProtocolParams,
    u: f64,
) -> ActivationState {
    if u <= params.p_a {
        ActivationState {
            s: params.s_a,
            active: true,
        }
    } else {
        state
    }
}

/// `tanh(g · (s + Σ activity))`; empties the inbox.
pub fn update_state(s: f64, inbox: &mut Inbox, g: f64) -> f64 {
    let next = (g * (s + inbox.activity_sum())).tanh();
    inbox.clear();
    next
}

/// Battery-weighted radius between `p_min` and `p_max`.
pub fn ideal_power(b: f64, p_min: f64, p_max: f64) -> Result<f64, ProtocolError> {
    if !(0.0..=1.0).contains(&b) {
        return Err(ProtocolError::BatteryOutOfRange(b));
    }
    Ok(p_min * (1.0 - b) + p_max * b)
}

/// Index of the level nearest to `p`, i.e. the level whose midpoint
/// interval `(lower mid, upper mid]` contains `p`; a tie goes to the lower
/// level. The first and last intervals extend to -inf and +inf.
pub fn snap_power_index(p: f64, levels: &[f64]) -> usize {
    debug_assert!(!levels.is_empty());
    // Distances rather than a computed midpoint: `(a + b) / 2` can round
    // across `p` and pick the farther level.
    levels
        .windows(2)
        .take_while(|w| (w[1] - p).abs() < (p - w[0]).abs())
        .count()
}

pub fn snap_power(p: f64, levels: &[f64]) -> f64 {
    levels[snap_power_index(p, levels)]
}

/// Result of one duty-cycling event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    pub state: ActivationState,
    pub message: DutyCyclingMessage,
    /// Index into `ProtocolParams::levels`.
    pub level_index: usize,
    /// Chosen radius.
    pub power: f64,
}

/// One duty-cycling event for node `id`.
///
/// The spontaneous-activation draw is taken from `rng` only when the node is
/// inactive. Draws are in `(0, 1]`, so `p_a = 0` never wakes a node.
pub fn duty_cycling_event<R: Rng + ?Sized>(
    id: NodeId,
    state: ActivationState,
    inbox: &mut Inbox,
    battery: f64,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<EventOutcome, ProtocolError> {
    let mut next = ActivationState {
        s: state.s,
        active: compute_activity(state.s, params.theta_act),
    };
    if !next.active {
        next = spontaneous_activation(next, params, unit_draw(rng));
    }
    let ideal = ideal_power(battery, params.p_min, params.p_max)?;
    let level_index = snap_power_index(ideal, &params.levels);
    next.s = update_state(next.s, inbox, params.g);
    Ok(EventOutcome {
        state: next,
        message: DutyCyclingMessage {
            sender: id,
            activity: next.s,
        },
        level_index,
        power: params.levels[level_index],
    })
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn unit_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Activity reported to callbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(C)]
pub enum Activity {
    Active,
    Inactive,
}

impl From<bool> for Activity {
    fn from(active: bool) -> Self {
        if active {
            Activity::Active
        } else {
            Activity::Inactive
        }
    }
}

/// Handle returned by [`DutyCycler::register_changed_callback`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CallbackId(u32);

impl CallbackId {
    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn from_raw(raw: u32) -> Self {
        Self(raw)
    }
}

type ChangedCallback = Box<dyn FnMut(NodeId, Activity) + Send>;

/// Duty-cycling runtime of a single node: state, inbox and observers.
///
/// While disabled the node neither runs events nor accepts messages, and it
/// reports itself inactive.
pub struct DutyCycler {
    id: NodeId,
    state: ActivationState,
    inbox: Inbox,
    enabled: bool,
    callbacks: Vec<(CallbackId, ChangedCallback)>,
    next_callback: u32,
}

impl std::fmt::Debug for DutyCycler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DutyCycler")
            .field("id", &self.id)
            .field("state", &self.state)
            .field("inbox", &self.inbox.len())
            .field("enabled", &self.enabled)
            .field("callbacks", &self.callbacks.len())
            .finish()
    }
}

impl DutyCycler {
    pub fn new(id: NodeId, params: &ProtocolParams) -> Self {
        Self::with_state(id, ActivationState::initial(params))
    }

    pub fn with_state(id: NodeId, state: ActivationState) -> Self {
        Self {
            id,
            state,
            inbox: Inbox::new(),
            enabled: true,
            callbacks: Vec::new(),
            next_callback: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn state(&self) -> ActivationState {
        self.state
    }

    pub fn is_active(&self) -> bool {
        self.state.active
    }

    pub fn inbox(&self) -> &Inbox {
        &self.inbox
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn enable(&mut self) {
        self.enabled = true;
    }

    /// Stops the node and drops it to inactive, notifying observers.
    pub fn disable(&mut self) {
        self.enabled = false;
        self.set_active(false);
    }

    pub fn register_changed_callback<F>(&mut self, f: F) -> CallbackId
    where
        F: FnMut(NodeId, Activity) + Send + 'static,
    {
        let id = CallbackId(self.next_callback);
        self.next_callback += 1;
        self.callbacks.push((id, Box::new(f)));
        id
    }

    /// Returns false when the handle was not registered.
    pub fn unregister_changed_callback(&mut self, id: CallbackId) -> bool {
        let before = self.callbacks.len();
        self.callbacks.retain(|(cid, _)| *cid != id);
        self.callbacks.len() != before
    }

    /// Queue an incoming message. Ignored while disabled.
    pub fn receive(&mut self, msg: DutyCyclingMessage) -> bool {
        if self.enabled {
            self.inbox.push(msg);
        }
        self.enabled
    }

    /// Run this period's event. `None` while disabled.
    pub fn on_event<R: Rng + ?Sized>(
        &mut self,
        battery: f64,
        params: &ProtocolParams,
        rng: &mut R,
    ) -> Result<Option<EventOutcome>, ProtocolError> {
        if !self.enabled {
            return Ok(None);
        }
        let outcome =
            duty_cycling_event(self.id, self.state, &mut self.inbox, battery, params, rng)?;
        self.state.s = outcome.state.s;
        self.set_active(outcome.state.active);
        Ok(Some(outcome))
    }

    /// Force the activity flag, firing callbacks on a transition.
    pub fn set_active(&mut self, active: bool) {
        if self.state.active != active {
            self.state.active = active;
            let activity = Activity::from(active);
            let id = self.id;
            for (_, cb) in &mut self.callbacks {
                cb(id, activity);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64Mcg;
    use std::sync::{Arc, Mutex};

    fn levels() -> Vec<f64> {
        (1..=6).map(|k| k as f64 / 12.0).collect()
    }

    #[test]
    fn activity_step() {
        assert!(compute_activity(0.1, 0.1));
        assert!(!compute_activity(0.0, 0.1));
        assert!(compute_activity(0.5, 0.1));
    }

    #[test]
    fn spontaneous_branches() {
        let p = ProtocolParams::default();
        let idle = ActivationState {
            s: 0.0,
            active: false,
        };
        let woke = spontaneous_activation(idle, &p, 0.0005);
        assert_eq!(
            woke,
            ActivationState {
                s: p.s_a,
                active: true
            }
        );
        assert_eq!(spontaneous_activation(idle, &p, 0.5), idle);
        let never = ProtocolParams { p_a: 0.0, ..p };
        assert_eq!(spontaneous_activation(idle, &never, 1e-300), idle);
    }

    #[test]
    fn update_state_examples() {
        let mut inbox = Inbox::new();
        assert_eq!(update_state(0.0, &mut inbox, 0.1), 0.0);
        // Reference values from an arbitrary-precision tanh.
        let v = update_state(1.0, &mut inbox, 0.1);
        assert!((v - 0.099_667_994_624_955_8).abs() < 1e-15);
        inbox.push(DutyCyclingMessage {
            sender: 3,
            activity: 0.3,
        });
        let v = update_state(0.5, &mut inbox, 0.1);
        assert!((v - 0.079_829_769_111_131_4).abs() < 1e-15);
        assert!(inbox.is_empty());
    }

    #[test]
    fn ideal_power_examples() {
        assert_eq!(ideal_power(1.0, 0.07, 0.14).unwrap(), 0.14);
        assert_eq!(ideal_power(0.0, 0.07, 0.14).unwrap(), 0.07);
        assert!((ideal_power(0.5, 0.07, 0.14).unwrap() - 0.105).abs() < 1e-15);
        assert!(matches!(
            ideal_power(1.2, 0.07, 0.14),
            Err(ProtocolError::BatteryOutOfRange(_))
        ));
        assert!(ideal_power(-0.1, 0.07, 0.14).is_err());
    }

    #[test]
    fn snap_examples() {
        let l = levels();
        assert_eq!(snap_power(0.105, &l), 1.0 / 12.0);
        for &lv in &l {
            assert_eq!(snap_power(lv, &l), lv);
        }
        assert_eq!(snap_power(0.5, &[0.25, 0.75]), 0.25);
        assert_eq!(snap_power(-5.0, &l), l[0]);
        assert_eq!(snap_power(9.0, &l), l[5]);
        assert_eq!(snap_power(0.3, &[0.2]), 0.2);
        // The rounded midpoint of 1/12 and 2/12 is 0.125, but 2/12 is nearer.
        assert_eq!(snap_power(0.125, &l), l[1]);
    }

    #[test]
    fn event_inactive_stays_inactive() {
        let p = ProtocolParams {
            theta_act: 0.1,
            p_a: 0.0,
            ..Default::default()
        };
        let mut rng = Pcg64Mcg::seed_from_u64(1);
        let st = ActivationState {
            s: 0.05,
            active: false,
        };
        let out = duty_cycling_event(0, st, &mut Inbox::new(), 0.5, &p, &mut rng).unwrap();
        assert!(!out.state.active);
        assert_eq!(out.message.activity, (p.g * 0.05).tanh());
    }

    #[test]
    fn event_active_then_decays() {
        let p = ProtocolParams {
            theta_act: 0.1,
            ..Default::default()
        };
        let mut rng = Pcg64Mcg::seed_from_u64(1);
        let st = ActivationState::initial(&p);
        let out = duty_cycling_event(0, st, &mut Inbox::new(), 0.5, &p, &mut rng).unwrap();
        assert!(out.state.active);
        assert!((out.state.s - 0.009_999_666_679_999_5).abs() < 1e-15);
        assert!(!compute_activity(out.state.s, p.theta_act));
    }

    #[test]
    fn event_full_battery_uses_level_nearest_pmax() {
        let p = ProtocolParams::default();
        let mut rng = Pcg64Mcg::seed_from_u64(1);
        let out = duty_cycling_event(
            0,
            ActivationState::initial(&p),
            &mut Inbox::new(),
            1.0,
            &p,
            &mut rng,
        )
        .unwrap();
        let nearest = p
            .levels
            .iter()
            .copied()
            .min_by(|a, b| (a - p.p_max).abs().total_cmp(&(b - p.p_max).abs()))
            .unwrap();
        assert_eq!(out.power, nearest);
    }

    #[test]
    fn callbacks_fire_on_transitions_only() {
        let p = ProtocolParams {
            theta_act: 0.1,
            p_a: 0.0,
            ..Default::default()
        };
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mut node = DutyCycler::new(7, &p);
        let sink = seen.clone();
        let h = node.register_changed_callback(move |id, a| sink.lock().unwrap().push((id, a)));
        let mut rng = Pcg64Mcg::seed_from_u64(3);
        for _ in 0..5 {
            node.on_event(0.5, &p, &mut rng).unwrap();
        }
        // Active in the first period, inactive from the second on.
        assert_eq!(*seen.lock().unwrap(), vec![(7, Activity::Inactive)]);
        node.set_active(true);
        assert!(node.unregister_changed_callback(h));
        assert!(!node.unregister_changed_callback(h));
        node.set_active(false);
        assert_eq!(seen.lock().unwrap().len(), 2);
    }

    #[test]
    fn disabled_node_ignores_events_and_messages() {
        let p = ProtocolParams::default();
        let mut node = DutyCycler::new(0, &p);
        node.disable();
        assert!(!node.is_active());
        let msg = DutyCyclingMessage {
            sender: 1,
            activity: 0.4,
        };
        assert!(!node.receive(msg));
        let mut rng = Pcg64Mcg::seed_from_u64(0);
        assert!(node.on_event(1.0, &p, &mut rng).unwrap().is_none());
        node.enable();
        assert!(node.receive(msg));
        assert_eq!(node.inbox().len(), 1);
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::default().validate().is_ok());
        let bad = ProtocolParams {
            levels: vec![0.2, 0.1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProtocolParams {
            p_a: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProtocolParams {
            p_max: 0.01,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
