//! Benchmark policies and the common policy interface.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{slot_metrics, ChannelSlot, NetworkState, Scenario, SlotDecision};
use crate::scheduler::{
    drift_weights, freq_cap, objective, slot_offload_bits, solve_slot_with, Pipeline, SlotSolution,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// Drift-plus-penalty scheduler with local computing and offloading.
    Proposed,
    /// Local computing only.
    Lco,
    /// Full offloading.
    Fo,
    /// Greedy per-slot throughput maximization.
    Myopic,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Proposed, Policy::Lco, Policy::Fo, Policy::Myopic];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::Lco => "lco",
            Policy::Fo => "fo",
            Policy::Myopic => "myopic",
        }
    }

    /// Only the proposed scheduler maintains placeholder backlogs.
    pub fn uses_placeholders(self) -> bool {
        self == Policy::Proposed
    }

    pub fn decide(self, state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> Result<SlotSolution> {
        match self {
            Policy::Proposed => solve_slot_with(state, ch, sc, Pipeline::FULL),
            Policy::Lco => lco_policy(state, ch, sc),
            Policy::Fo => fo_policy(state, ch, sc),
            Policy::Myopic => Ok(myopic_policy(state, ch, sc)),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL.into_iter().find(|p| p.name() == s.trim().to_ascii_lowercase()).ok_or_else(|| {
            Error::InvalidParam(format!("unknown policy `{s}` (valid: proposed, lco, fo, myopic)"))
        })
    }
}

/// Proposed pipeline with offloading disabled.
pub fn lco_policy(state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> Result<SlotSolution> {
    solve_slot_with(state, ch, sc, Pipeline::LOCAL_ONLY)
}

/// Proposed pipeline with local computing disabled.
pub fn fo_policy(state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> Result<SlotSolution> {
    solve_slot_with(state, ch, sc, Pipeline::OFFLOAD_ONLY)
}

/// Process as many queued bits as the battery allows this slot.
///
/// Each device computes locally as fast as its queue and battery allow, then
/// offers its leftover energy to the AP with the best uplink. Every AP serves
/// the device offering the most bits. Energy is broadcast by the AP with the
/// largest aggregate harvesting gain whenever some battery is not full, and
/// broadcast wins any conflict with offloading at that AP.
pub fn myopic_policy(state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> SlotSolution {
    let (n, m) = (sc.num_devices(), sc.num_aps());
    let dt = sc.sys.slot_len;
    let mut d = SlotDecision::idle(n, m);

    if (0..n).any(|i| state.battery[i] < sc.devices[i].b_max) {
        let gain = |j: usize| -> f64 { sc.devices.iter().enumerate().map(|(i, dev)| dev.mu * ch.h_down[(i, j)]).sum() };
        let mut best = 0;
        for j in 1..m {
            if gain(j) > gain(best) {
                best = j;
            }
        }
        d.a_wpt[best] = true;
        d.p_wpt[best] = sc.aps[best].p_wpt_max;
        d.tau_wpt[best] = dt;
    }

    // (bits offered, device, power) per AP
    let mut offers: Vec<Option<(f64, usize, f64)>> = vec![None; m];
    for (i, dev) in sc.devices.iter().enumerate() {
        let backlog = state.effective_queue(i);
        let f_cap = freq_cap(state.battery[i], dev.kappa, dev.f_max, dt);
        if f_cap * dt / dev.phi >= backlog {
            d.freq[i] = backlog * dev.phi / dt;
            continue;
        }
        d.freq[i] = f_cap;
        let residual_bits = backlog - f_cap * dt / dev.phi;
        let residual_energy = state.battery[i] - dev.kappa * f_cap.powi(3) * dt;
        if residual_energy <= 0.0 {
            continue;
        }
        let mut j_best = 0;
        for j in 1..m {
            if ch.h_up[(i, j)] > ch.h_up[(i, j_best)] {
                j_best = j;
            }
        }
        let p = (residual_energy / dt).min(dev.p_off_max);
        let bits = slot_offload_bits(i, j_best, p, ch, sc).min(residual_bits);
        if bits <= 0.0 {
            continue;
        }
        if offers[j_best].is_none_or(|(b, _, _)| bits > b) {
            offers[j_best] = Some((bits, i, p));
        }
    }
    for (j, offer) in offers.into_iter().enumerate() {
        if let Some((_, i, p)) = offer {
            if d.a_wpt[j] {
                continue;
            }
            d.a_off[i][j] = true;
            d.p_off[i] = p;
            d.tau_off[i] = dt;
        }
    }

    let w = drift_weights(state, sc);
    let z = objective(&w, &slot_metrics(state, &d, ch, &[], sc), sc);
    SlotSolution { decision: d, objective_relaxed: z, objective_final: z, gap_cert: 0.0 }
}
