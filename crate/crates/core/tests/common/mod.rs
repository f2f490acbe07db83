//! Test support shared by the integration suites.

#![allow(dead_code)]

use rand::Rng;
use selfsync::energy::EnergyBuckets;
use selfsync::seeding::{node_period_rng, topology_rng};
use selfsync::{RunConfig, Topology, TraceRecord};

/// Straight-line simulator: no event queue, no protocol objects. Each
/// period draws every node's offset, sorts the live nodes by `(offset, id)`
/// and runs their events one after the other, then settles energy in id
/// order. Shares only the topology placement, the stream seeding and the
/// sun model with the engine.
pub fn reference_trace(config: &RunConfig) -> Vec<TraceRecord> {
    let k = config.network.nodes;
    let topo = Topology::random(k, &mut topology_rng(config.seed)).unwrap();
    let pos = topo.positions();
    let p = &config.protocol;
    let e = &config.energy;
    let phase1 = config.schedule.phase1_seconds;
    let phi = phase1 / config.schedule.delta_seconds;
    let revive = e.e_tx + e.e_on * phi;

    let mut s = vec![p.theta_act; k];
    let mut active = vec![true; k];
    let mut enabled = vec![true; k];
    let mut inbox: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut level = vec![config.network.initial_battery.clamp(0.0, 1.0); k];
    let mut total = EnergyBuckets::default();
    let mut trace = Vec::new();

    for n in 0..config.schedule.total_periods {
        let mut rngs: Vec<_> = (0..k).map(|i| node_period_rng(config.seed, i, n)).collect();
        let mut order = Vec::new();
        for i in 0..k {
            let offset = rngs[i].random::<f64>() * phase1;
            if enabled[i] && level[i] <= 0.0 {
                enabled[i] = false;
                active[i] = false;
            } else if !enabled[i] && level[i] > revive {
                enabled[i] = true;
            }
            if enabled[i] {
                order.push((offset, i));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut sent = vec![0usize; k];
        let mut recv = vec![0usize; k];
        for &(_, i) in &order {
            let rng = &mut rngs[i];
            active[i] = s[i] - p.theta_act >= 0.0;
            if !active[i] {
                let u = 1.0 - rng.random::<f64>();
                if u <= p.p_a {
                    s[i] = p.s_a;
                    active[i] = true;
                }
            }
            let b = level[i];
            let ideal = p.p_min * (1.0 - b) + p.p_max * b;
            // Nearest level by exhaustive scan; ties go to the lower one.
            let mut radius = p.levels[0];
            for &lv in &p.levels[1..] {
                if (lv - ideal).abs() < (radius - ideal).abs() {
                    radius = lv;
                }
            }
            let sum: f64 = inbox[i].iter().sum();
            s[i] = (p.g * (s[i] + sum)).tanh();
            inbox[i].clear();
            sent[i] += 1;
            for j in 0..k {
                if j == i || !enabled[j] || pos[i].distance(&pos[j]) > radius {
                    continue;
                }
                if rng.random::<f64>() >= config.network.p_loss {
                    inbox[j].push(s[i]);
                    recv[j] += 1;
                }
            }
        }

        let harvest = config.environment.harvest(n, e.f);
        let mut n_active = 0usize;
        let mut battery_sum = 0.0;
        for i in 0..k {
            battery_sum += level[i];
            n_active += active[i] as usize;
            if enabled[i] {
                let spent = EnergyBuckets {
                    tx: e.e_tx * sent[i] as f64,
                    rx: e.e_rx * recv[i] as f64 + e.e_on * phi,
                    idle: if active[i] {
                        0.0
                    } else {
                        e.e_off * (1.0 - phi)
                    },
                    active: if active[i] { e.e_on * (1.0 - phi) } else { 0.0 },
                    app: if active[i] { e.e_app } else { 0.0 },
                };
                total += spent;
                level[i] = (level[i] - spent.total()).max(0.0);
            }
            level[i] = (level[i] + harvest).min(1.0);
        }
        trace.push(TraceRecord {
            period: n,
            mean_activity: n_active as f64 / k as f64,
            mean_battery: battery_sum / k as f64,
            sun: config.environment.sun(n as f64),
            cloud: config.environment.cloud(n),
            energy: total,
            messages_sent: sent.iter().sum(),
            messages_received: recv.iter().sum(),
        });
    }
    trace
}

/// Baseline configuration shortened to `periods`.
pub fn short_config(nodes: usize, periods: u64, seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.network.nodes = nodes;
    c.schedule.total_periods = periods;
    c.seed = seed;
    c
}
