//! Battery bookkeeping, per-period consumption buckets and solar harvesting.
//!
//! All energies are in normalized battery units: a full battery holds 1.
//! Time inside the environment is measured in periods, so one period of
//! full sun with no clouds harvests exactly `f`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid energy parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Subintervals per period used by the harvest quadrature.
pub const HARVEST_SUBINTERVALS: usize = 8;

/// Costs and harvesting efficiency in battery units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Per duty-cycling message sent.
    pub e_tx: f64,
    /// Per duty-cycling message received.
    pub e_rx: f64,
    /// Radio on for a whole period.
    pub e_on: f64,
    /// Radio off (sleep) for a whole period.
    pub e_off: f64,
    /// Application cost per active period.
    pub e_app: f64,
    /// Harvesting efficiency.
    pub f: f64,
}

/// Radio-on cost per period selected by the activity calibration sweep.
pub const CALIBRATED_E_ON: f64 = 1.0e-4;

/// Radio-off / radio-on current ratio of the reference hardware
/// (0.025 mA / 12.8 mA).
pub const SLEEP_TO_ON_RATIO: f64 = 0.025 / 12.8;

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_tx: 1.0e-5,
            e_rx: 1.0e-5,
            e_on: CALIBRATED_E_ON,
            e_off: CALIBRATED_E_ON * SLEEP_TO_ON_RATIO,
            e_app: 0.001,
            f: 0.0027,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let fields = [
            ("e_tx", self.e_tx),
            ("e_rx", self.e_rx),
            ("e_on", self.e_on),
            ("e_off", self.e_off),
            ("e_app", self.e_app),
            ("f", self.f),
        ];
        for (field, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidParam {
                    field,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if self.e_off > self.e_on {
            return Err(EnergyError::InvalidParam {
                field: "e_off",
                reason: "must not exceed e_on".into(),
            });
        }
        Ok(())
    }
}

/// Battery with clamping and its own ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    level: f64,
    debited: f64,
    credited: f64,
    deficit: f64,
    wasted: f64,
}

impl Battery {
    /// `level` is clamped into `[0, 1]`.
    pub fn new(level: f64) -> Self {
        Self {
            level: level.clamp(0.0, 1.0),
            debited: 0.0,
            credited: 0.0,
            deficit: 0.0,
            wasted: 0.0,
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Total requested consumption.
    pub fn debited(&self) -> f64 {
        self.debited
    }

    /// Total offered harvest.
    pub fn credited(&self) -> f64 {
        self.credited
    }

    /// Consumption that could not be paid because the battery hit 0.
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Harvest discarded because the battery hit 1.
    pub fn wasted(&self) -> f64 {
        self.wasted
    }

    /// Remove `amount`; returns the unpaid part.
    pub fn debit(&mut self, amount: f64) -> f64 {
        debug_assert!(amount >= 0.0);
        self.debited += amount;
        let raw = self.level - amount;
        if raw < 0.0 {
            self.level = 0.0;
            self.deficit -= raw;
            -raw
        } else {
            self.level = raw;
            0.0
        }
    }

    /// Add `amount`; returns the discarded part.
    pub fn credit(&mut self, amount: f64) -> f64 {
        debug_assert!(amount >= 0.0);
        self.credited += amount;
        let raw = self.level + amount;
        if raw > 1.0 {
            self.level = 1.0;
            self.wasted += raw - 1.0;
            raw - 1.0
        } else {
            self.level = raw;
            0.0
        }
    }
}

/// Consumption split by where it went.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBuckets {
    pub tx: f64,
    pub rx: f64,
    pub idle: f64,
    pub active: f64,
    pub app: f64,
}

impl EnergyBuckets {
    pub fn total(&self) -> f64 {
        self.tx + self.rx + self.idle + self.active + self.app
    }

    /// Duty-cycling share: everything except the application.
    pub fn duty_cycling(&self) -> f64 {
        self.tx + self.rx + self.idle + self.active
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.tx, self.rx, self.idle, self.active, self.app]
    }
}

impl Add for EnergyBuckets {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tx: self.tx + o.tx,
            rx: self.rx + o.rx,
            idle: self.idle + o.idle,
            active: self.active + o.active,
            app: self.app + o.app,
        }
    }
}

impl AddAssign for EnergyBuckets {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// One node's consumption for one period.
///
/// `radio_fraction` is the fraction of the period spent in the duty-cycling
/// phase, where every node listens. The remainder is charged as `active`
/// (radio on) or `idle` (asleep).
pub fn period_consumption(
    active: bool,
    radio_fraction: f64,
    sent: usize,
    received: usize,
    params: &EnergyParams,
) -> EnergyBuckets {
    debug_assert!((0.0..=1.0).contains(&radio_fraction));
    let rest = 1.0 - radio_fraction;
    EnergyBuckets {
        tx: params.e_tx * sent as f64,
        rx: params.e_rx * received as f64 + params.e_on * radio_fraction,
        idle: if active { 0.0 } else { params.e_off * rest },
        active: if active { params.e_on * rest } else { 0.0 },
        app: if active { params.e_app } else { 0.0 },
    }
}

/// Sun intensity profile over time in periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SunModel {
    /// `max(0, sin(2π·z/day))`: one smooth daylight arc, dark night.
    HalfSine,
    /// Fixed intensity, for tests and controlled scenarios.
    Constant { intensity: f64 },
}

/// `max(0, sin(2π·(z mod day)/day))`.
pub fn sun_intensity(z: f64, day_length: u32) -> f64 {
    let day = day_length as f64;
    let phase = z.rem_euclid(day) / day;
    (2.0 * PI * phase).sin().max(0.0)
}

/// Piecewise-constant cloud density, switching only at period boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSchedule {
    /// Density from period 0.
    pub density: f64,
    /// `(start period, density)` changes, sorted by start.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changes: Vec<(u64, f64)>,
}

impl Default for CloudSchedule {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl CloudSchedule {
    pub fn constant(density: f64) -> Self {
        Self {
            density,
            changes: Vec::new(),
        }
    }

    /// Density in effect during `period`.
    pub fn at_period(&self, period: u64) -> f64 {
        self.changes
            .iter()
            .take_while(|(start, _)| *start <= period)
            .last()
            .map_or(self.density, |&(_, c)| c)
    }
}

/// Light and weather seen by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    /// Periods per day.
    pub day_length: u32,
    pub sun: SunModel,
    pub cloud: CloudSchedule,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            day_length: 1440,
            sun: SunModel::HalfSine,
            cloud: CloudSchedule::default(),
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |field, reason: String| Err(EnergyError::InvalidParam { field, reason });
        if self.day_length == 0 {
            return bad("day_length", "must be positive".into());
        }
        if let SunModel::Constant { intensity } = self.sun {
            if !(0.0..=1.0).contains(&intensity) {
                return bad("sun.intensity", format!("{intensity} is outside [0, 1]"));
            }
        }
        let densities =
            std::iter::once(self.cloud.density).chain(self.cloud.changes.iter().map(|&(_, c)| c));
        for c in densities {
            if !(0.0..=1.0).contains(&c) {
                return bad("cloud", format!("density {c} is outside [0, 1]"));
            }
        }
        if self.cloud.changes.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("cloud.changes", "start periods must be increasing".into());
        }
        Ok(())
    }

    /// Sun intensity at time `z` (in periods).
    pub fn sun(&self, z: f64) -> f64 {
        match self.sun {
            SunModel::HalfSine => sun_intensity(z, self.day_length),
            SunModel::Constant { intensity } => intensity,
        }
    }

    pub fn cloud(&self, period: u64) -> f64 {
        self.cloud.at_period(period)
    }

    /// Composite trapezoid of the sun over `[start, start + len]`.
    pub fn sun_integral(&self, start: f64, len: f64, subintervals: usize) -> f64 {
        let n = subintervals.max(1);
        let h = len / n as f64;
        let inner: f64 = (1..n).map(|i| self.sun(start + i as f64 * h)).sum();
        h * (0.5 * (self.sun(start) + self.sun(start + len)) + inner)
    }

    /// Energy harvested by one node during `period`, i.e. over
    /// `(period, period + 1]` in period units.
    pub fn harvest(&self, period: u64, f: f64) -> f64 {
        let light = self.sun_integral(period as f64, 1.0, HARVEST_SUBINTERVALS);
        (1.0 - self.cloud(period)) * (f * light)
    }
}
