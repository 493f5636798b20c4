//! Per-slot drift-plus-penalty solver.
//!
//! The coupled per-slot problem is relaxed into three independent
//! subproblems (energy broadcast, local computing, offloading). Their
//! solutions are then adjusted: energy causality is restored per device by
//! balancing the marginal cost per bit of local computing and offloading
//! (see [`RepairRule`]), and the slot-time budget of the broadcasting AP is
//! restored by keeping whichever of broadcast or offload lowers the objective
//! more.
//!
//! All drift terms use the scaled weights `wq` and `wb` in place of the raw
//! queue and battery-deficit lengths.

use std::f64::consts::LN_2;

use crate::assignment::solve_assignment;
use crate::error::Result;
use crate::model::{
    local_bits_and_energy, offload_bits, slot_metrics, ChannelSlot, DeviceParams, Matrix, NetworkState, RepairRule,
    Scenario, SlotDecision, SlotMetrics,
};
use crate::roots::cubic_root;

/// Per-device coefficients of the per-slot objective.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftWeights {
    /// Weight on processed bits.
    pub wq: Vec<f64>,
    /// Weight on net harvested energy.
    pub wb: Vec<f64>,
}

/// Output of one scheduler invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotSolution {
    pub decision: SlotDecision,
    /// Objective of the relaxed problem at the pre-adjustment decision.
    pub objective_relaxed: f64,
    /// Objective at the final, feasible decision.
    pub objective_final: f64,
    /// Realized bound on `objective_final - objective_relaxed`.
    pub gap_cert: f64,
}

/// Which decision blocks the pipeline may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pipeline {
    pub local: bool,
    pub offload: bool,
}

impl Pipeline {
    pub const FULL: Pipeline = Pipeline { local: true, offload: true };
    pub const LOCAL_ONLY: Pipeline = Pipeline { local: true, offload: false };
    pub const OFFLOAD_ONLY: Pipeline = Pipeline { local: false, offload: true };
}

pub fn drift_weights(state: &NetworkState, sc: &Scenario) -> DriftWeights {
    let sq = sc.sys.weight_scaling.apply(sc.sys.beta_q);
    let sb = sc.sys.weight_scaling.apply(sc.sys.beta_b);
    let wq = (0..sc.num_devices()).map(|i| sq * state.effective_queue(i)).collect();
    let wb = sc.devices.iter().enumerate().map(|(i, d)| sb * state.deficit(i, d)).collect();
    DriftWeights { wq, wb }
}

/// Per-slot objective without the constant arrival term.
pub fn objective(w: &DriftWeights, m: &SlotMetrics, sc: &Scenario) -> f64 {
    let mut z = sc.sys.penalty * (m.e_wpt + m.e_edge);
    for i in 0..sc.num_devices() {
        z -= w.wq[i] * (m.d_local[i] + m.d_off[i]);
        z -= w.wb[i] * (m.e_harvest[i] - m.e_local[i] - m.e_off[i]);
    }
    z
}

/// Energy broadcast subproblem result.
#[derive(Clone, Debug, PartialEq)]
pub struct WptChoice {
    pub a_wpt: Vec<bool>,
    pub p_wpt: Vec<f64>,
    pub tau_wpt: Vec<f64>,
    /// `c^T_j = V - sum_i wb_i mu_i h^D_ij`.
    pub coeff: Vec<f64>,
    pub selected: Option<usize>,
}

impl WptChoice {
    /// Objective contribution per second of the selected AP, `c^T_j P^{T,max}_j`.
    pub fn rate(&self, sc: &Scenario) -> Option<f64> {
        self.selected.map(|j| self.coeff[j] * sc.aps[j].p_wpt_max)
    }
}

pub fn solve_wpt(w: &DriftWeights, ch: &ChannelSlot, sc: &Scenario) -> WptChoice {
    let m = sc.num_aps();
    let coeff: Vec<f64> = (0..m)
        .map(|j| {
            let gain: f64 = sc.devices.iter().enumerate().map(|(i, d)| w.wb[i] * d.mu * ch.h_down[(i, j)]).sum();
            sc.sys.penalty - gain
        })
        .collect();
    let mut selected = None;
    let mut best = 0.0;
    for (j, ap) in sc.aps.iter().enumerate() {
        let v = coeff[j] * ap.p_wpt_max;
        if v < best {
            best = v;
            selected = Some(j);
        }
    }
    let mut choice = WptChoice { a_wpt: vec![false; m], p_wpt: vec![0.0; m], tau_wpt: vec![0.0; m], coeff, selected };
    if let Some(j) = selected {
        choice.a_wpt[j] = true;
        choice.p_wpt[j] = sc.aps[j].p_wpt_max;
        choice.tau_wpt[j] = sc.sys.slot_len;
    }
    choice
}

/// Highest CPU frequency the battery can sustain for the whole slot.
pub fn freq_cap(battery: f64, kappa: f64, f_max: f64, slot_len: f64) -> f64 {
    (battery.max(0.0) / (kappa * slot_len)).cbrt().min(f_max)
}

/// Highest offload power the battery can sustain for the whole slot.
pub fn power_cap(battery: f64, p_max: f64, slot_len: f64) -> f64 {
    (battery.max(0.0) / slot_len).min(p_max)
}

/// Closed-form CPU frequency minimizing `wb kappa f^3 dt - wq f dt / phi` on `[0, f_ub]`.
pub fn solve_local(w: &DriftWeights, state: &NetworkState, sc: &Scenario) -> Vec<f64> {
    sc.devices
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let f_ub = freq_cap(state.battery[i], d.kappa, d.f_max, sc.sys.slot_len);
            if w.wq[i] <= 0.0 {
                0.0
            } else if w.wb[i] <= 0.0 {
                f_ub
            } else {
                (w.wq[i] / (3.0 * d.kappa * d.phi * w.wb[i])).sqrt().min(f_ub)
            }
        })
        .collect()
}

/// Stationary point of `c^O_ij` in the offload power, clamped to `[0, P^{O,ub}_i]`.
///
/// Returns `None` when `wb_i = 0`, where the coefficient is linear in the
/// rate term and has no interior stationary point.
pub fn stationary_power(
    i: usize,
    j: usize,
    w: &DriftWeights,
    state: &NetworkState,
    ch: &ChannelSlot,
    sc: &Scenario,
) -> Option<f64> {
    let (dev, ap) = (&sc.devices[i], &sc.aps[j]);
    let p_ub = power_cap(state.battery[i], dev.p_off_max, sc.sys.slot_len);
    let h = ch.h_up[(i, j)];
    if h <= 0.0 {
        return Some(0.0);
    }
    if w.wb[i] <= 0.0 {
        return None;
    }
    let drive = w.wq[i] - sc.sys.penalty * dev.phi * ap.eta;
    let p_hat = drive * sc.sys.bandwidth / (w.wb[i] * dev.nu * LN_2) - ap.noise / h;
    Some(p_hat.min(p_ub).max(0.0))
}

/// Offload power with the `wb = 0` limit resolved.
pub fn offload_power(i: usize, j: usize, w: &DriftWeights, state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> f64 {
    stationary_power(i, j, w, state, ch, sc).unwrap_or_else(|| {
        let dev = &sc.devices[i];
        if w.wq[i] > sc.sys.penalty * dev.phi * sc.aps[j].eta {
            power_cap(state.battery[i], dev.p_off_max, sc.sys.slot_len)
        } else {
            0.0
        }
    })
}

/// Coefficient of the offload time in the per-slot objective.
pub fn offload_coefficient(i: usize, j: usize, p_off: f64, w: &DriftWeights, ch: &ChannelSlot, sc: &Scenario) -> f64 {
    let (dev, ap) = (&sc.devices[i], &sc.aps[j]);
    let h = ch.h_up[(i, j)];
    if p_off <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let rate = sc.sys.bandwidth / dev.nu * (p_off * h / ap.noise).ln_1p() / LN_2;
    (sc.sys.penalty * ap.eta * dev.phi - w.wq[i]) * rate + w.wb[i] * p_off
}

/// Marginal energy per bit of local computing and of offloading to AP `j`.
pub fn marginal_efficiencies(i: usize, j: usize, freq: f64, p_off: f64, ch: &ChannelSlot, sc: &Scenario) -> (f64, f64) {
    let (dev, ap) = (&sc.devices[i], &sc.aps[j]);
    let eps_local = 3.0 * dev.kappa * dev.phi * freq * freq;
    let eps_off = dev.nu * LN_2 / sc.sys.bandwidth * (ap.noise / ch.h_up[(i, j)] + p_off) + ap.eta * dev.phi;
    (eps_local, eps_off)
}

/// Split the whole battery between local computing and offloading to AP `j`.
///
/// Returns `(freq, p_off)`. Under [`RepairRule::EnergyBalance`] both have the
/// same marginal energy per bit; under [`RepairRule::Weighted`] the split
/// minimizes the per-slot objective on the energy boundary. The frequency is
/// clamped to the range where the battery covers it and the power stays
/// within its cap, so the balance only holds at interior points.
pub fn joint_repair(i: usize, j: usize, w: &DriftWeights, state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> (f64, f64) {
    let (dev, ap) = (&sc.devices[i], &sc.aps[j]);
    let dt = sc.sys.slot_len;
    let battery = state.battery[i].max(0.0);
    let f_hi = freq_cap(battery, dev.kappa, dev.f_max, dt);
    let h = ch.h_up[(i, j)];
    if h <= 0.0 {
        return (f_hi, 0.0);
    }
    let k = dev.nu * LN_2 / sc.sys.bandwidth;
    let (square, rhs) = match sc.sys.repair {
        RepairRule::EnergyBalance => (3.0 * dev.kappa * dev.phi, k * (ap.noise / h + battery / dt) + ap.eta * dev.phi),
        RepairRule::Weighted => {
            let drive = w.wq[i] - sc.sys.penalty * ap.eta * dev.phi;
            if drive <= 0.0 {
                return (f_hi, 0.0);
            }
            (3.0 * dev.kappa * dev.phi * drive / w.wq[i], k * (ap.noise / h + battery / dt))
        }
    };
    let root = cubic_root(k * dev.kappa, square, rhs);
    let f_lo = ((battery / dt - dev.p_off_max).max(0.0) / dev.kappa).cbrt().min(f_hi);
    let f = root.clamp(f_lo, f_hi);
    let p = ((battery - dev.kappa * f.powi(3) * dt) / dt).clamp(0.0, dev.p_off_max);
    (f, p)
}

/// Local part of the per-slot objective, `wb kappa f^3 dt - wq f dt / phi`.
fn local_term(i: usize, freq: f64, w: &DriftWeights, dev: &DeviceParams, dt: f64) -> f64 {
    let (bits, energy) = local_bits_and_energy(freq, dt, dev);
    w.wb[i] * energy - w.wq[i] * bits
}

/// Preliminary offloading plan from the assignment step.
#[derive(Clone, Debug, PartialEq)]
pub struct OffloadPlan {
    pub a_off: Vec<Vec<bool>>,
    pub p_off: Vec<f64>,
    pub tau_off: Vec<f64>,
    pub freq: Vec<f64>,
    /// `c^O_ij` after any energy repair, `[device][ap]`.
    pub coeff: Matrix,
    /// Objective change of offloading pair `(i, j)` over the slot, relative
    /// to local computing alone. Negative entries are worth scheduling.
    pub gain: Matrix,
    /// Whether pair `(i, j)` needed the energy repair.
    pub repaired: Vec<Vec<bool>>,
}

/// Offloading subproblem.
///
/// `local_freq` is the local-computing solution; when `pipeline.local` is
/// false the local term is dropped from the energy check and no repair runs.
pub fn solve_offloading(
    state: &NetworkState,
    w: &DriftWeights,
    ch: &ChannelSlot,
    sc: &Scenario,
    local_freq: &[f64],
    pipeline: Pipeline,
) -> Result<OffloadPlan> {
    let (n, m) = (sc.num_devices(), sc.num_aps());
    let dt = sc.sys.slot_len;
    let mut power = Matrix::zeros(n, m);
    let mut repaired_freq = Matrix::zeros(n, m);
    let mut coeff = Matrix::zeros(n, m);
    let mut gain = Matrix::zeros(n, m);
    let mut repaired = vec![vec![false; m]; n];

    for j in 0..m {
        for i in 0..n {
            let dev = &sc.devices[i];
            let mut p = offload_power(i, j, w, state, ch, sc);
            let (_, e_local) = local_bits_and_energy(local_freq[i], dt, dev);
            if pipeline.local && e_local + p * dt > state.battery[i] {
                let (f, p_rep) = joint_repair(i, j, w, state, ch, sc);
                repaired[i][j] = true;
                repaired_freq[(i, j)] = f;
                p = p_rep;
            }
            power[(i, j)] = p;
            coeff[(i, j)] = offload_coefficient(i, j, p, w, ch, sc);
            gain[(i, j)] = coeff[(i, j)] * dt;
            if repaired[i][j] && sc.sys.repair == RepairRule::Weighted {
                gain[(i, j)] += local_term(i, repaired_freq[(i, j)], w, dev, dt) - local_term(i, local_freq[i], w, dev, dt);
            }
        }
    }

    let mut plan = OffloadPlan {
        a_off: vec![vec![false; m]; n],
        p_off: vec![0.0; n],
        tau_off: vec![0.0; n],
        freq: local_freq.to_vec(),
        coeff,
        gain,
        repaired,
    };

    // Pairs that would not lower the objective contribute nothing.
    let weight = |i: usize, j: usize| plan.gain[(i, j)].min(0.0);
    // Rows must not outnumber columns; with more APs than devices the roles swap.
    let pairs: Vec<(usize, usize)> = if m <= n {
        let a = solve_assignment(&Matrix::from_fn(m, n, |j, i| weight(i, j)))?;
        a.cols.iter().enumerate().map(|(j, &i)| (i, j)).collect()
    } else {
        let a = solve_assignment(&Matrix::from_fn(n, m, weight))?;
        a.cols.iter().enumerate().map(|(i, &j)| (i, j)).collect()
    };

    for (i, j) in pairs {
        if plan.gain[(i, j)] < 0.0 {
            plan.a_off[i][j] = true;
            plan.tau_off[i] = dt;
            plan.p_off[i] = power[(i, j)];
            if plan.repaired[i][j] {
                plan.freq[i] = repaired_freq[(i, j)];
            }
        }
    }
    Ok(plan)
}

/// Restore the slot-time budget at the broadcasting AP.
///
/// `gain` holds the per-slot objective change of each offload pair. Returns
/// the adjusted decision and whether a conflict was resolved. When the
/// offload loses, the device falls back to its local-computing frequency.
pub fn repair_time_allocation(
    decision: &SlotDecision,
    wpt: &WptChoice,
    gain: &Matrix,
    local_freq: &[f64],
    sc: &Scenario,
) -> (SlotDecision, bool) {
    let mut out = decision.clone();
    let Some(j) = decision.wpt_ap() else {
        return (out, false);
    };
    let dt = sc.sys.slot_len;
    let wpt_gain = wpt.coeff[j] * sc.aps[j].p_wpt_max * dt;
    let mut conflict = false;
    for i in 0..sc.num_devices() {
        if decision.a_off[i][j] && out.tau_wpt[j] + out.tau_off[i] > dt {
            conflict = true;
            if wpt_gain < gain[(i, j)] {
                out.clear_offload(i);
                out.freq[i] = local_freq[i];
            } else {
                out.a_wpt[j] = false;
                out.p_wpt[j] = 0.0;
                out.tau_wpt[j] = 0.0;
            }
        }
    }
    (out, conflict)
}

/// Run the full per-slot pipeline of the proposed scheduler.
pub fn solve_slot(state: &NetworkState, ch: &ChannelSlot, sc: &Scenario) -> Result<SlotSolution> {
    solve_slot_with(state, ch, sc, Pipeline::FULL)
}

/// Per-slot pipeline restricted to the enabled decision blocks.
pub fn solve_slot_with(state: &NetworkState, ch: &ChannelSlot, sc: &Scenario, pipeline: Pipeline) -> Result<SlotSolution> {
    let (n, m) = (sc.num_devices(), sc.num_aps());
    let w = drift_weights(state, sc);
    let wpt = solve_wpt(&w, ch, sc);
    let local_freq = if pipeline.local { solve_local(&w, state, sc) } else { vec![0.0; n] };

    let mut decision = SlotDecision::idle(n, m);
    decision.a_wpt.clone_from(&wpt.a_wpt);
    decision.p_wpt.clone_from(&wpt.p_wpt);
    decision.tau_wpt.clone_from(&wpt.tau_wpt);
    decision.freq.clone_from(&local_freq);

    let gain = if pipeline.offload {
        let plan = solve_offloading(state, &w, ch, sc, &local_freq, pipeline)?;
        decision.a_off = plan.a_off;
        decision.p_off = plan.p_off;
        decision.tau_off = plan.tau_off;
        decision.freq = plan.freq;
        plan.gain
    } else {
        Matrix::zeros(n, m)
    };

    let objective_relaxed = objective(&w, &slot_metrics(state, &decision, ch, &[], sc), sc);
    let (final_decision, conflict) = repair_time_allocation(&decision, &wpt, &gain, &local_freq, sc);
    let objective_final = if conflict {
        objective(&w, &slot_metrics(state, &final_decision, ch, &[], sc), sc)
    } else {
        objective_relaxed
    };
    let gap_cert = match (conflict, wpt.rate(sc)) {
        (true, Some(rate)) => -rate * sc.sys.slot_len,
        _ => 0.0,
    };
    Ok(SlotSolution { decision: final_decision, objective_relaxed, objective_final, gap_cert })
}

/// Bits a device would offload to AP `j` at power `p` for the whole slot.
pub fn slot_offload_bits(i: usize, j: usize, p: f64, ch: &ChannelSlot, sc: &Scenario) -> f64 {
    offload_bits(p, sc.sys.slot_len, ch.h_up[(i, j)], &sc.sys, &sc.devices[i], &sc.aps[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, ApParams, DeviceParams, SystemParams, WeightScaling};

    fn scenario(n: usize, m: usize) -> Scenario {
        let sys = SystemParams { num_devices: n, num_aps: m, ..Default::default() };
        Scenario::new(sys, vec![DeviceParams::default(); n], vec![ApParams::default(); m]).unwrap()
    }

    fn flat_channel(n: usize, m: usize, up: f64, down: f64) -> ChannelSlot {
        ChannelSlot { h_up: Matrix::from_fn(n, m, |_, _| up), h_down: Matrix::from_fn(n, m, |_, _| down) }
    }

    /// Toy device: every coefficient 1 except as overridden.
    fn toy() -> Scenario {
        let sys = SystemParams { num_devices: 1, num_aps: 1, slot_len: 1.0, bandwidth: 1.0, penalty: 0.0, ..Default::default() };
        let dev = DeviceParams { kappa: 1.0, phi: 1.0, nu: 1.0 + 1e-12, f_max: 1e9, p_off_max: 1e9, b_max: 1e9, ..Default::default() };
        let ap = ApParams { noise: 1.0, eta: 1.0, ..Default::default() };
        Scenario { sys, devices: vec![dev], aps: vec![ap] }
    }

    #[test]
    fn weights_zero_when_idle_and_full() {
        let sc = scenario(2, 1);
        let mut s = NetworkState::empty(2);
        s.battery = vec![sc.devices[0].b_max; 2];
        let w = drift_weights(&s, &sc);
        assert_eq!(w.wq, vec![0.0, 0.0]);
        assert_eq!(w.wb, vec![0.0, 0.0]);
    }

    #[test]
    fn squared_weight_example() {
        let mut sc = scenario(1, 1);
        sc.sys.weight_scaling = WeightScaling::Squared;
        let mut s = NetworkState::empty(1);
        s.q_act[0] = 1e4;
        let w = drift_weights(&s, &sc);
        assert!((w.wq[0] - 9e-10).abs() < 1e-22);
        sc.sys.weight_scaling = WeightScaling::Linear;
        assert!((drift_weights(&s, &sc).wq[0] - 3e-3).abs() < 1e-15);
    }

    #[test]
    fn placeholder_counts_like_real_backlog() {
        let sc = scenario(1, 1);
        let mut a = NetworkState::empty(1);
        a.q_act[0] = 700.0;
        a.q_ph[0] = 300.0;
        let mut b = NetworkState::empty(1);
        b.q_act[0] = 1000.0;
        assert_eq!(drift_weights(&a, &sc), drift_weights(&b, &sc));
    }

    #[test]
    fn no_wpt_when_batteries_full() {
        let sc = scenario(3, 2);
        let mut s = NetworkState::empty(3);
        s.battery = vec![sc.devices[0].b_max; 3];
        let ch = flat_channel(3, 2, 1e-4, 1e-4);
        let wpt = solve_wpt(&drift_weights(&s, &sc), &ch, &sc);
        assert_eq!(wpt.selected, None);
        assert!(wpt.coeff.iter().all(|&c| c == sc.sys.penalty));
    }

    #[test]
    fn wpt_always_on_with_zero_penalty() {
        let mut sc = scenario(3, 2);
        sc.sys.penalty = 0.0;
        let s = NetworkState::empty(3);
        let ch = flat_channel(3, 2, 1e-4, 1e-4);
        assert!(solve_wpt(&drift_weights(&s, &sc), &ch, &sc).selected.is_some());
    }

    #[test]
    fn wpt_picks_most_negative_rate() {
        // Effective harvest sums {0.5, 3}, caps {3, 1}, V = 1 -> rates {1.5, -2}.
        let mut sc = scenario(1, 2);
        sc.sys.penalty = 1.0;
        sc.aps[0].p_wpt_max = 3.0;
        sc.aps[1].p_wpt_max = 1.0;
        let mu = sc.devices[0].mu;
        let w = DriftWeights { wq: vec![0.0], wb: vec![1.0] };
        let ch = ChannelSlot {
            h_up: Matrix::zeros(1, 2),
            h_down: Matrix::from_rows(&[vec![0.5 / mu, 3.0 / mu]]),
        };
        let wpt = solve_wpt(&w, &ch, &sc);
        assert_eq!(wpt.selected, Some(1));
        assert!((wpt.coeff[0] * 3.0 - 1.5).abs() < 1e-12);
        assert!((wpt.coeff[1] - -2.0).abs() < 1e-12);
        assert_eq!((wpt.p_wpt[1], wpt.tau_wpt[1]), (1.0, sc.sys.slot_len));
    }

    #[test]
    fn local_frequency_cases() {
        let sc = toy();
        let mut s = NetworkState::empty(1);
        s.battery[0] = 1e6;
        assert_eq!(solve_local(&DriftWeights { wq: vec![0.0], wb: vec![1.0] }, &s, &sc), vec![0.0]);
        let f = solve_local(&DriftWeights { wq: vec![3.0], wb: vec![1.0] }, &s, &sc)[0];
        assert!((f - 1.0).abs() < 1e-12);
        // Grid check of the local objective wb f^3 - wq f.
        let best = (0..=20_000).map(|k| k as f64 * 1e-4).min_by(|a, b| {
            (a.powi(3) - 3.0 * a).partial_cmp(&(b.powi(3) - 3.0 * b)).unwrap()
        });
        assert!((best.unwrap() - f).abs() < 1e-3);
        s.battery[0] = 0.0;
        assert_eq!(solve_local(&DriftWeights { wq: vec![3.0], wb: vec![1.0] }, &s, &sc), vec![0.0]);
    }

    #[test]
    fn local_frequency_full_battery_runs_at_cap() {
        let sc = scenario(1, 1);
        let mut s = NetworkState::empty(1);
        s.battery[0] = sc.devices[0].b_max;
        s.q_act[0] = 10.0;
        let w = drift_weights(&s, &sc);
        assert_eq!(w.wb[0], 0.0);
        let f = solve_local(&w, &s, &sc)[0];
        assert_eq!(f, freq_cap(s.battery[0], 1e-28, 0.5e9, 0.01));
    }

    #[test]
    fn stationary_power_cases() {
        let mut sc = toy();
        sc.sys.bandwidth = 1.0;
        let mut s = NetworkState::empty(1);
        s.battery[0] = 1e6;
        // wq - V phi eta = ln 2, wb nu = 1, sigma^2 / h = 0.5 -> 0.5 W.
        sc.devices[0].nu = 1.0 + 1e-15;
        let ch = flat_channel(1, 1, 2.0, 0.0);
        let w = DriftWeights { wq: vec![LN_2], wb: vec![1.0] };
        let p = stationary_power(0, 0, &w, &s, &ch, &sc).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let grid = (0..=20_000).map(|k| k as f64 * 1e-4).min_by(|a, b| {
            offload_coefficient(0, 0, *a, &w, &ch, &sc).partial_cmp(&offload_coefficient(0, 0, *b, &w, &ch, &sc)).unwrap()
        });
        assert!((grid.unwrap() - 0.5).abs() < 1e-3);

        // Drive exactly cancelled by the edge cost.
        sc.sys.penalty = 2.0;
        let w = DriftWeights { wq: vec![2.0], wb: vec![1.0] };
        assert_eq!(stationary_power(0, 0, &w, &s, &ch, &sc), Some(0.0));

        // Empty battery.
        sc.sys.penalty = 0.0;
        s.battery[0] = 0.0;
        assert_eq!(stationary_power(0, 0, &DriftWeights { wq: vec![5.0], wb: vec![1.0] }, &s, &ch, &sc), Some(0.0));
    }

    #[test]
    fn degenerate_battery_weight_uses_cap() {
        let sc = scenario(1, 1);
        let mut s = NetworkState::empty(1);
        s.battery[0] = sc.devices[0].b_max;
        let ch = flat_channel(1, 1, 1e-5, 1e-5);
        let drive = sc.sys.penalty * 1e3 * 1e-9;
        let hi = DriftWeights { wq: vec![drive * 2.0], wb: vec![0.0] };
        assert_eq!(stationary_power(0, 0, &hi, &s, &ch, &sc), None);
        assert_eq!(offload_power(0, 0, &hi, &s, &ch, &sc), 0.1);
        let lo = DriftWeights { wq: vec![drive * 0.5], wb: vec![0.0] };
        assert_eq!(offload_power(0, 0, &lo, &s, &ch, &sc), 0.0);
    }

    #[test]
    fn offload_coefficient_cases() {
        let mut sc = toy();
        sc.devices[0].nu = 1.0 + 1e-15;
        let ch = flat_channel(1, 1, 3.0, 0.0);
        let w = DriftWeights { wq: vec![1.0], wb: vec![0.5] };
        assert_eq!(offload_coefficient(0, 0, 0.0, &w, &ch, &sc), 0.0);
        // -1 * log2(1 + 1 * 3) + 0.5 * 1 = -1.5
        assert!((offload_coefficient(0, 0, 1.0, &w, &ch, &sc) - -1.5).abs() < 1e-12);
        sc.sys.penalty = 1.0;
        assert!((offload_coefficient(0, 0, 1.0, &w, &ch, &sc) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn joint_repair_unit_cubic() {
        // nu ln2 / B = 1, kappa = 1, 3 kappa phi = 3, rhs = sigma^2/h + b/dt + eta phi = 4.
        let mut sc = toy();
        sc.sys.bandwidth = sc.devices[0].nu * LN_2;
        sc.aps[0].eta = 1.0;
        let ch = flat_channel(1, 1, 1.0, 0.0);
        let mut s = NetworkState::empty(1);
        s.battery[0] = 2.0;
        sc.sys.repair = RepairRule::EnergyBalance;
        let w = DriftWeights { wq: vec![1.0], wb: vec![1.0] };
        let (f, p) = joint_repair(0, 0, &w, &s, &ch, &sc);
        assert!((f - 1.0).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
        let (el, eo) = marginal_efficiencies(0, 0, f, p, &ch, &sc);
        assert!((el - eo).abs() <= 1e-9 * el);
    }

    #[test]
    fn weighted_repair_minimizes_boundary_objective() {
        // k = 1, V eta phi = 1, wq = 3: f^3 + 2 f^2 = sigma^2/h + b/dt = 3 -> f = 1, P = 1.
        let mut sc = toy();
        sc.sys.bandwidth = sc.devices[0].nu * LN_2;
        sc.sys.penalty = 1.0;
        let ch = flat_channel(1, 1, 1.0, 0.0);
        let mut s = NetworkState::empty(1);
        s.battery[0] = 2.0;
        let w = DriftWeights { wq: vec![3.0], wb: vec![0.7] };
        let (f, p) = joint_repair(0, 0, &w, &s, &ch, &sc);
        assert!((f - 1.0).abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
        let total = |f: f64| {
            let p = 2.0 - f.powi(3);
            local_term(0, f, &w, &sc.devices[0], 1.0) + offload_coefficient(0, 0, p, &w, &ch, &sc)
        };
        let cap = 2f64.cbrt();
        let best = (0..=10_000).map(|k| k as f64 * cap / 1e4).min_by(|a, b| total(*a).partial_cmp(&total(*b)).unwrap());
        assert!((best.unwrap() - f).abs() < 1e-3);
    }

    #[test]
    fn joint_repair_spends_whole_battery() {
        let sc = scenario(1, 1);
        let ch = flat_channel(1, 1, 1e-4, 1e-4);
        let mut s = NetworkState::empty(1);
        s.battery[0] = 1.5e-3;
        let w = DriftWeights { wq: vec![1.0], wb: vec![1e7] };
        let (f, p) = joint_repair(0, 0, &w, &s, &ch, &sc);
        let spent = 1e-28 * f.powi(3) * 0.01 + p * 0.01;
        assert!(spent <= s.battery[0] + 1e-15);
        assert!(f <= sc.devices[0].f_max);
    }

    #[test]
    fn no_offload_when_coefficients_nonnegative() {
        let sc = scenario(3, 2);
        let mut s = NetworkState::empty(3);
        s.battery = vec![1e-3; 3];
        let ch = flat_channel(3, 2, 1e-5, 1e-5);
        let w = DriftWeights { wq: vec![0.0; 3], wb: vec![1.0; 3] };
        let lf = solve_local(&w, &s, &sc);
        let plan = solve_offloading(&s, &w, &ch, &sc, &lf, Pipeline::FULL).unwrap();
        assert!(plan.tau_off.iter().all(|&t| t == 0.0));
        assert_eq!(plan.freq, lf);
    }

    #[test]
    fn single_ap_gives_time_to_most_negative_device() {
        let sc = scenario(2, 1);
        let mut coeff = Matrix::zeros(2, 1);
        coeff[(0, 0)] = -2.0;
        coeff[(1, 0)] = -1.0;
        let a = solve_assignment(&Matrix::from_fn(1, 2, |j, i| coeff[(i, j)] * sc.sys.slot_len)).unwrap();
        assert_eq!(a.cols, vec![0]);
    }

    #[test]
    fn time_repair_branches() {
        let sc = scenario(1, 1);
        let mut d = SlotDecision::idle(1, 1);
        d.a_wpt[0] = true;
        d.p_wpt[0] = 3.0;
        d.tau_wpt[0] = 0.01;
        d.a_off[0][0] = true;
        d.p_off[0] = 0.01;
        d.tau_off[0] = 0.01;
        d.freq[0] = 5.0;
        let mk = |c: f64| WptChoice {
            a_wpt: vec![true],
            p_wpt: vec![3.0],
            tau_wpt: vec![0.01],
            coeff: vec![c / 3.0],
            selected: Some(0),
        };
        let coeff = Matrix::from_rows(&[vec![-0.02]]);
        let (keep_wpt, hit) = repair_time_allocation(&d, &mk(-3.0), &coeff, &[7.0], &sc);
        assert!(hit);
        assert_eq!(keep_wpt.tau_off[0], 0.0);
        assert_eq!(keep_wpt.tau_wpt[0], 0.01);
        assert_eq!(keep_wpt.freq[0], 7.0);
        let (keep_off, _) = repair_time_allocation(&d, &mk(-1.0), &coeff, &[7.0], &sc);
        assert_eq!(keep_off.tau_wpt[0], 0.0);
        assert_eq!(keep_off.tau_off[0], 0.01);

        let idle = SlotDecision::idle(1, 1);
        let (same, hit) = repair_time_allocation(&idle, &mk(-1.0), &coeff, &[7.0], &sc);
        assert!(!hit);
        assert_eq!(same, idle);
    }

    #[test]
    fn idle_state_gives_idle_decision() {
        let sc = scenario(4, 2);
        let mut s = NetworkState::empty(4);
        s.battery = vec![sc.devices[0].b_max; 4];
        let ch = flat_channel(4, 2, 1e-5, 1e-5);
        let sol = solve_slot(&s, &ch, &sc).unwrap();
        assert_eq!(sol.decision, SlotDecision::idle(4, 2));
        assert_eq!(sol.objective_final, 0.0);
        assert_eq!(sol.gap_cert, 0.0);
    }

    #[test]
    fn more_aps_than_devices_is_handled() {
        let sc = scenario(2, 4);
        let mut s = NetworkState::empty(2);
        s.battery = vec![1e-3; 2];
        s.q_act = vec![1e6; 2];
        let ch = flat_channel(2, 4, 1e-5, 1e-5);
        let sol = solve_slot(&s, &ch, &sc).unwrap();
        assert!(check_feasibility(&s, &sol.decision, &sc).is_ok());
    }

    #[test]
    fn zero_uplink_gain_never_offloads() {
        let sc = scenario(2, 1);
        let mut s = NetworkState::empty(2);
        s.battery = vec![1e-3; 2];
        s.q_act = vec![1e7; 2];
        let ch = flat_channel(2, 1, 0.0, 0.0);
        let sol = solve_slot(&s, &ch, &sc).unwrap();
        assert!(sol.decision.tau_off.iter().all(|&t| t == 0.0));
        assert!(check_feasibility(&s, &sol.decision, &sc).is_ok());
    }
}
