//! Self-synchronized, energy-aware duty-cycling for energy-harvesting sensor
//! networks.
//!
//! Nodes keep a tanh-driven activation variable, exchange it once per period
//! with neighbours reached at a battery-dependent radius, and sleep through
//! the period when it drops below a threshold. Activity waves emerge from the
//! local exchange and shrink as batteries drain.
//!
//! - [`protocol`]: the per-node state machine.
//! - [`energy`]: batteries, consumption buckets, solar harvesting.
//! - [`netsim`]: the discrete-event engine.
//! - [`experiments`]: metrics, size scaling and parameter sweeps.
//! - [`config`] and [`output`]: TOML configuration and CSV output.

pub mod config;
pub mod energy;
pub mod experiments;
pub mod netsim;
pub mod output;
pub mod protocol;
pub mod seeding;

pub use config::{ConfigError, RunConfig};
pub use energy::{Battery, EnergyBuckets, EnergyParams, Environment};
pub use netsim::{SimError, Simulation, Topology, TraceRecord};
pub use protocol::{ActivationState, Activity, DutyCycler, ProtocolParams};
