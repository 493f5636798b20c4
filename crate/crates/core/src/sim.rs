//! Slot-by-slot simulation of one policy on one scenario.

use rand::Rng;

use crate::baselines::Policy;
use crate::channel::{sample_channel, stream_rng, FadingParams, Stream, Topology};
use crate::error::{Error, Result};
use crate::model::{apply_slot, check_feasibility, slot_metrics, DeviceParams, NetworkState, Scenario, SystemParams};
use crate::placeholder::step_placeholder;

/// Run-level settings that are not part of the physical model.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Slots excluded from the steady-state averages.
    pub warmup: usize,
    /// Keep one series point every `decimation` slots.
    pub decimation: usize,
    /// A run is flagged unstable when the mean effective backlog over the
    /// last tenth exceeds this multiple of the first-half mean.
    pub divergence_ratio: f64,
    /// Record every device's battery level at each series point.
    pub record_batteries: bool,
    pub fading: FadingParams,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            warmup: 2000,
            decimation: 10,
            divergence_ratio: 3.0,
            record_batteries: false,
            fading: FadingParams::default(),
        }
    }
}

/// Decimated trace of a run; queue values are per-device means in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub slot: usize,
    pub avg_q_eff: f64,
    pub avg_q_act: f64,
    pub avg_placeholder: f64,
    pub total_battery: f64,
    pub e_wpt: f64,
    pub e_edge: f64,
    /// Per-device batteries; empty unless requested.
    pub batteries: Vec<f64>,
}

/// Time averages of a run. Energies are per slot in joules, queues are
/// network totals in bits, latency is in seconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub slots: usize,
    /// Slots contributing to the steady-state fields.
    pub steady_slots: usize,
    pub avg_energy: f64,
    pub avg_wpt_energy: f64,
    pub avg_edge_energy: f64,
    pub avg_queue: f64,
    pub avg_actual_queue: f64,
    pub avg_latency: f64,
    pub full_avg_energy: f64,
    pub full_avg_queue: f64,
    pub full_avg_actual_queue: f64,
    pub full_avg_latency: f64,
    /// Fraction of slots with an AP broadcasting energy.
    pub wpt_duty: f64,
    /// Largest per-slot suboptimality certificate reported by the policy.
    pub gap_cert_max: f64,
    /// Slots where the repaired objective exceeded the relaxed one by more
    /// than the certificate allows.
    pub gap_violations: usize,
    pub diverging: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub series: Vec<SeriesPoint>,
}

/// Uniform task arrivals in bits, one draw per device.
pub fn sample_arrivals<R: Rng + ?Sized>(devs: &[DeviceParams], rng: &mut R) -> Vec<f64> {
    devs.iter()
        .map(|d| if d.arrival_hi > d.arrival_lo { rng.random_range(d.arrival_lo..d.arrival_hi) } else { d.arrival_lo })
        .collect()
}

/// Random device positions for the run seed in `sc.sys`, copied into a new scenario.
pub fn build_topology(sc: &Scenario, area_side: f64) -> (Scenario, Topology) {
    let mut rng = stream_rng(sc.sys.rng_seed, Stream::Topology);
    let topo = Topology::generate(sc.num_devices(), sc.num_aps(), area_side, &mut rng);
    let mut placed = sc.clone();
    for (dev, p) in placed.devices.iter_mut().zip(&topo.device_positions) {
        dev.position = *p;
    }
    for (ap, p) in placed.aps.iter_mut().zip(&topo.ap_positions) {
        ap.position = *p;
    }
    (placed, topo)
}

#[derive(Default)]
struct Accum {
    slots: usize,
    energy: f64,
    wpt: f64,
    edge: f64,
    queue: f64,
    actual: f64,
}

impl Accum {
    fn mean(total: f64, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }
}

/// Simulate `sc.sys.horizon` slots of `policy` starting from empty queues and batteries.
///
/// Arrivals and fading come from independent streams of `sc.sys.rng_seed`.
/// Any decision that violates a constraint aborts the run.
pub fn run(sc: &Scenario, topo: &Topology, policy: Policy, opts: &RunOptions) -> Result<RunOutput> {
    sc.validate()?;
    if topo.device_positions.len() != sc.num_devices() || topo.ap_positions.len() != sc.num_aps() {
        return Err(Error::Dimension("topology does not match the scenario".into()));
    }
    if opts.decimation == 0 {
        return Err(Error::InvalidParam("decimation must be at least 1".into()));
    }
    let horizon = sc.sys.horizon;
    let n = sc.num_devices();
    let mut arrival_rng = stream_rng(sc.sys.rng_seed, Stream::Arrivals);
    let mut fading_rng = stream_rng(sc.sys.rng_seed, Stream::Fading);
    let ph_sys = SystemParams { placeholders: sc.sys.placeholders && policy.uses_placeholders(), ..sc.sys.clone() };
    let warmup = if opts.warmup < horizon { opts.warmup } else { 0 };

    let mut state = NetworkState::empty(n);
    let mut full = Accum::default();
    let mut steady = Accum::default();
    let mut q_eff_trace = Vec::with_capacity(horizon);
    let mut series = Vec::new();
    let mut wpt_slots = 0usize;
    let mut gap_cert_max = 0.0f64;
    let mut gap_violations = 0usize;

    for t in 0..horizon {
        let ch = sample_channel(topo, &opts.fading, &mut fading_rng);
        let sol = policy.decide(&state, &ch, sc)?;
        check_feasibility(&state, &sol.decision, sc).map_err(|violation| Error::Infeasible { slot: t, violation })?;
        let arrivals = sample_arrivals(&sc.devices, &mut arrival_rng);
        let m = slot_metrics(&state, &sol.decision, &ch, &arrivals, sc);

        let q_eff: f64 = m.q_snapshot.iter().sum();
        let q_act: f64 = m.q_act_snapshot.iter().sum();
        q_eff_trace.push(q_eff);
        if sol.decision.wpt_ap().is_some() {
            wpt_slots += 1;
        }
        gap_cert_max = gap_cert_max.max(sol.gap_cert);
        let slack = 1e-9 * sol.gap_cert.abs().max(sol.objective_relaxed.abs()).max(1.0);
        if sol.objective_final - sol.objective_relaxed > sol.gap_cert + slack {
            gap_violations += 1;
        }
        for acc in [Some(&mut full), (t >= warmup).then_some(&mut steady)].into_iter().flatten() {
            acc.slots += 1;
            acc.energy += m.e_wpt + m.e_edge;
            acc.wpt += m.e_wpt;
            acc.edge += m.e_edge;
            acc.queue += q_eff;
            acc.actual += q_act;
        }
        if t % opts.decimation == 0 {
            series.push(SeriesPoint {
                slot: t,
                avg_q_eff: q_eff / n as f64,
                avg_q_act: q_act / n as f64,
                avg_placeholder: state.q_ph.iter().sum::<f64>() / n as f64,
                total_battery: state.battery.iter().sum(),
                e_wpt: m.e_wpt,
                e_edge: m.e_edge,
                batteries: if opts.record_batteries { state.battery.clone() } else { Vec::new() },
            });
        }

        state = apply_slot(&state, &m, &sc.devices)?;
        state = step_placeholder(&state, &ph_sys);
    }

    // Little's law: mean backlog over the mean arrival rate.
    let arrival_rate: f64 = sc.devices.iter().map(DeviceParams::mean_arrival).sum::<f64>() / sc.sys.slot_len;
    let latency = |queue: f64| if arrival_rate > 0.0 { queue / arrival_rate } else { 0.0 };
    let avg_actual_queue = Accum::mean(steady.actual, steady.slots);
    let full_avg_actual_queue = Accum::mean(full.actual, full.slots);
    let summary = RunSummary {
        slots: horizon,
        steady_slots: steady.slots,
        avg_energy: Accum::mean(steady.energy, steady.slots),
        avg_wpt_energy: Accum::mean(steady.wpt, steady.slots),
        avg_edge_energy: Accum::mean(steady.edge, steady.slots),
        avg_queue: Accum::mean(steady.queue, steady.slots),
        avg_actual_queue,
        avg_latency: latency(avg_actual_queue),
        full_avg_energy: Accum::mean(full.energy, full.slots),
        full_avg_queue: Accum::mean(full.queue, full.slots),
        full_avg_actual_queue,
        full_avg_latency: latency(full_avg_actual_queue),
        wpt_duty: Accum::mean(wpt_slots as f64, horizon),
        gap_cert_max,
        gap_violations,
        diverging: is_diverging(&q_eff_trace, opts.divergence_ratio),
    };
    Ok(RunOutput { summary, series })
}

/// Compare the mean of the last tenth of `trace` with the mean of its first half.
pub fn is_diverging(trace: &[f64], ratio: f64) -> bool {
    let len = trace.len();
    if len < 10 {
        return false;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let early = mean(&trace[..len / 2]);
    let late = mean(&trace[len - len / 10..]);
    early > 0.0 && late > ratio * early
}
