//! Domain types and the physical model of a wireless-powered MEC network.
//!
//! Units are fixed throughout the crate: bits, Joules, seconds, Hz and Watts.

use crate::error::{Error, Result};

/// Absolute slack (J) accepted when checking energy causality.
pub const ENERGY_TOLERANCE: f64 = 1e-15;

/// How the queue scaling coefficients enter the per-slot drift weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightScaling {
    /// `wq = beta_q * Q`, `wb = beta_b * B-`.
    Linear,
    /// `wq = beta_q^2 * Q`, `wb = beta_b^2 * B-` (gradient of the scaled quadratic Lyapunov function).
    Squared,
}

impl WeightScaling {
    pub fn name(self) -> &'static str {
        match self {
            WeightScaling::Linear => "linear",
            WeightScaling::Squared => "squared",
        }
    }

    pub fn apply(self, beta: f64) -> f64 {
        match self {
            WeightScaling::Linear => beta,
            WeightScaling::Squared => beta * beta,
        }
    }
}

/// How a device splits a short battery between local computing and offloading.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepairRule {
    /// Balance the objective-weighted marginal cost per bit, and score each
    /// offload pair by its full objective change including the local term.
    Weighted,
    /// Balance the raw marginal energy per bit of local computing and
    /// offloading (edge energy included), and score pairs by the offload-time
    /// coefficient alone.
    EnergyBalance,
}

impl RepairRule {
    pub fn name(self) -> &'static str {
        match self {
            RepairRule::Weighted => "weighted",
            RepairRule::EnergyBalance => "energy_balance",
        }
    }
}

/// Network-wide control and simulation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub num_devices: usize,
    pub num_aps: usize,
    /// Slot duration (s).
    pub slot_len: f64,
    /// Uplink bandwidth (Hz).
    pub bandwidth: f64,
    /// Drift-plus-penalty trade-off parameter.
    pub penalty: f64,
    pub beta_q: f64,
    pub beta_b: f64,
    pub weight_scaling: WeightScaling,
    pub repair: RepairRule,
    /// EMA learning rate of the placeholder estimator.
    pub ema_rate: f64,
    /// Placeholder tuning gain `r`.
    pub placeholder_gain: f64,
    /// When false the placeholder backlog is forced to zero.
    pub placeholders: bool,
    /// Number of slots.
    pub horizon: usize,
    pub rng_seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            num_devices: 30,
            num_aps: 5,
            slot_len: 0.01,
            bandwidth: 1e5,
            penalty: 1e4,
            beta_q: 3e-7,
            beta_b: 1e10,
            weight_scaling: WeightScaling::Linear,
            repair: RepairRule::Weighted,
            ema_rate: 3e-4,
            placeholder_gain: 50.0,
            placeholders: true,
            horizon: 10_000,
            rng_seed: 1,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::InvalidParam("num_devices must be >= 1".into()));
        }
        if self.num_aps == 0 {
            return Err(Error::InvalidParam("num_aps must be >= 1".into()));
        }
        if !(self.slot_len > 0.0) {
            return Err(Error::InvalidParam("slot_len must be > 0".into()));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidParam("bandwidth must be > 0".into()));
        }
        if !(self.penalty >= 0.0) || !self.penalty.is_finite() {
            return Err(Error::InvalidParam("penalty V must be finite and >= 0".into()));
        }
        if !(self.beta_q > 0.0) || !(self.beta_b > 0.0) {
            return Err(Error::InvalidParam("beta_q and beta_b must be > 0".into()));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate < 1.0) {
            return Err(Error::InvalidParam("ema_rate must lie in (0, 1)".into()));
        }
        if !(self.placeholder_gain >= 0.0) {
            return Err(Error::InvalidParam("placeholder_gain must be >= 0".into()));
        }
        Ok(())
    }
}

/// A point in the deployment plane (m).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Per-device hardware parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    /// Energy-conversion efficiency of the harvester.
    pub mu: f64,
    /// Effective switched capacitance of the CPU (J s^2 / cycle^3).
    pub kappa: f64,
    /// CPU cycles per bit.
    pub phi: f64,
    /// Communication overhead factor (> 1).
    pub nu: f64,
    pub f_max: f64,
    pub p_off_max: f64,
    /// Virtual battery capacity (J).
    pub b_max: f64,
    /// Support of the uniform per-slot arrival distribution (bits).
    pub arrival_lo: f64,
    pub arrival_hi: f64,
    pub position: Point,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            mu: 0.51,
            kappa: 1e-28,
            phi: 1e3,
            nu: 1.1,
            f_max: 0.5e9,
            p_off_max: 0.1,
            b_max: 2e-3,
            arrival_lo: 1000.0,
            arrival_hi: 2000.0,
            position: Point::default(),
        }
    }
}

impl DeviceParams {
    /// Mean arrival per slot (bits).
    pub fn mean_arrival(&self) -> f64 {
        0.5 * (self.arrival_lo + self.arrival_hi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidParam("device mu must lie in (0, 1)".into()));
        }
        if !(self.nu > 1.0) {
            return Err(Error::InvalidParam("device overhead nu must be > 1".into()));
        }
        if !(self.kappa > 0.0) || !(self.phi > 0.0) {
            return Err(Error::InvalidParam("device kappa and phi must be > 0".into()));
        }
        if !(self.f_max > 0.0) || !(self.b_max > 0.0) || !(self.p_off_max >= 0.0) {
            return Err(Error::InvalidParam("device f_max, b_max must be > 0 and p_off_max >= 0".into()));
        }
        if !(self.arrival_lo >= 0.0 && self.arrival_lo <= self.arrival_hi) {
            return Err(Error::InvalidParam("device arrivals need 0 <= lo <= hi".into()));
        }
        Ok(())
    }
}

/// Per-AP parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ApParams {
    pub p_wpt_max: f64,
    /// Receiver noise power (W).
    pub noise: f64,
    /// Edge-server energy per CPU cycle (J).
    pub eta: f64,
    pub position: Point,
}

impl Default for ApParams {
    fn default() -> Self {
        ApParams { p_wpt_max: 3.0, noise: 1e-9, eta: 1e-9, position: Point::default() }
    }
}

impl ApParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_wpt_max > 0.0 && self.noise > 0.0 && self.eta > 0.0) {
            return Err(Error::InvalidParam("AP p_wpt_max, noise and eta must be > 0".into()));
        }
        Ok(())
    }
}

/// Complete static description of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub sys: SystemParams,
    pub devices: Vec<DeviceParams>,
    pub aps: Vec<ApParams>,
}

impl Scenario {
    pub fn new(sys: SystemParams, devices: Vec<DeviceParams>, aps: Vec<ApParams>) -> Result<Self> {
        let s = Scenario { sys, devices, aps };
        s.validate()?;
        Ok(s)
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.sys.validate()?;
        if self.devices.len() != self.sys.num_devices {
            return Err(Error::Dimension(format!(
                "{} device records for num_devices = {}",
                self.devices.len(),
                self.sys.num_devices
            )));
        }
        if self.aps.len() != self.sys.num_aps {
            return Err(Error::Dimension(format!(
                "{} AP records for num_aps = {}",
                self.aps.len(),
                self.sys.num_aps
            )));
        }
        self.devices.iter().try_for_each(DeviceParams::validate)?;
        self.aps.iter().try_for_each(ApParams::validate)
    }
}

/// Dense row-major matrix indexed `[device][ap]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Channel gains of one slot, `[device][ap]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSlot {
    pub h_up: Matrix,
    pub h_down: Matrix,
}

/// Queue and battery state at the start of a slot.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    /// Real backlog (bits).
    pub q_act: Vec<f64>,
    /// Placeholder backlog (bits).
    pub q_ph: Vec<f64>,
    /// EMA estimate of the steady-state effective backlog (bits).
    pub q_hat: Vec<f64>,
    /// Battery level (J).
    pub battery: Vec<f64>,
}

impl NetworkState {
    /// Empty queues and empty batteries.
    pub fn empty(n: usize) -> Self {
        NetworkState { q_act: vec![0.0; n], q_ph: vec![0.0; n], q_hat: vec![0.0; n], battery: vec![0.0; n] }
    }

    pub fn num_devices(&self) -> usize {
        self.q_act.len()
    }

    /// Queue length seen by the controller.
    pub fn effective_queue(&self, i: usize) -> f64 {
        self.q_act[i] + self.q_ph[i]
    }

    pub fn deficit(&self, i: usize, dev: &DeviceParams) -> f64 {
        (dev.b_max - self.battery[i]).max(0.0)
    }
}

/// All control variables of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDecision {
    pub a_wpt: Vec<bool>,
    pub p_wpt: Vec<f64>,
    pub tau_wpt: Vec<f64>,
    /// Association, `[device][ap]`.
    pub a_off: Vec<Vec<bool>>,
    pub p_off: Vec<f64>,
    pub tau_off: Vec<f64>,
    pub freq: Vec<f64>,
}

impl SlotDecision {
    /// Everything off.
    pub fn idle(n: usize, m: usize) -> Self {
        SlotDecision {
            a_wpt: vec![false; m],
            p_wpt: vec![0.0; m],
            tau_wpt: vec![0.0; m],
            a_off: vec![vec![false; m]; n],
            p_off: vec![0.0; n],
            tau_off: vec![0.0; n],
            freq: vec![0.0; n],
        }
    }

    /// AP broadcasting energy this slot, if any.
    pub fn wpt_ap(&self) -> Option<usize> {
        self.a_wpt.iter().position(|&a| a)
    }

    /// AP that device `i` is associated with, if any.
    pub fn associated_ap(&self, i: usize) -> Option<usize> {
        self.a_off[i].iter().position(|&a| a)
    }

    /// Stop device `i` from offloading.
    pub fn clear_offload(&mut self, i: usize) {
        self.a_off[i].iter_mut().for_each(|a| *a = false);
        self.p_off[i] = 0.0;
        self.tau_off[i] = 0.0;
    }
}

/// Realized physical quantities of one slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlotMetrics {
    pub e_wpt: f64,
    pub e_edge: f64,
    pub e_local: Vec<f64>,
    pub e_off: Vec<f64>,
    pub e_harvest: Vec<f64>,
    pub d_local: Vec<f64>,
    pub d_off: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub q_snapshot: Vec<f64>,
    pub q_act_snapshot: Vec<f64>,
}

/// Bits offloaded over one uplink: `(B tau / nu) log2(1 + p h / sigma^2)`.
pub fn offload_bits(p_off: f64, tau: f64, h_up: f64, sys: &SystemParams, dev: &DeviceParams, ap: &ApParams) -> f64 {
    if tau <= 0.0 || p_off <= 0.0 || h_up <= 0.0 {
        return 0.0;
    }
    sys.bandwidth * tau / dev.nu * (p_off * h_up / ap.noise).ln_1p() / std::f64::consts::LN_2
}

/// Bits processed and energy spent by local computing at `freq` for `tau` seconds.
pub fn local_bits_and_energy(freq: f64, tau: f64, dev: &DeviceParams) -> (f64, f64) {
    (freq * tau / dev.phi, dev.kappa * freq.powi(3) * tau)
}

/// Energy harvested by each device from the broadcasting AP(s).
pub fn harvested_energy(decision: &SlotDecision, ch: &ChannelSlot, devs: &[DeviceParams]) -> Vec<f64> {
    devs.iter()
        .enumerate()
        .map(|(i, dev)| {
            decision
                .a_wpt
                .iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(j, _)| dev.mu * decision.p_wpt[j] * ch.h_down[(i, j)] * decision.tau_wpt[j])
                .sum()
        })
        .collect()
}

/// Evaluate all energies and data volumes implied by `decision`.
///
/// `arrivals` may be empty when only the control-dependent quantities are needed.
pub fn slot_metrics(
    state: &NetworkState,
    decision: &SlotDecision,
    ch: &ChannelSlot,
    arrivals: &[f64],
    sc: &Scenario,
) -> SlotMetrics {
    let n = sc.num_devices();
    let dt = sc.sys.slot_len;
    let mut m = SlotMetrics {
        e_local: Vec::with_capacity(n),
        e_off: Vec::with_capacity(n),
        d_local: Vec::with_capacity(n),
        d_off: Vec::with_capacity(n),
        arrivals: arrivals.to_vec(),
        q_snapshot: (0..n).map(|i| state.effective_queue(i)).collect(),
        q_act_snapshot: state.q_act.clone(),
        ..Default::default()
    };
    m.e_harvest = harvested_energy(decision, ch, &sc.devices);
    m.e_wpt = (0..sc.num_aps())
        .filter(|&j| decision.a_wpt[j])
        .map(|j| decision.p_wpt[j] * decision.tau_wpt[j])
        .sum();
    for (i, dev) in sc.devices.iter().enumerate() {
        let (dl, el) = local_bits_and_energy(decision.freq[i], dt, dev);
        m.d_local.push(dl);
        m.e_local.push(el);
        let mut d_off = 0.0;
        for (j, ap) in sc.aps.iter().enumerate() {
            if decision.a_off[i][j] {
                let d = offload_bits(decision.p_off[i], decision.tau_off[i], ch.h_up[(i, j)], &sc.sys, dev, ap);
                d_off += d;
                m.e_edge += ap.eta * dev.phi * d;
            }
        }
        m.d_off.push(d_off);
        let e_off = if decision.associated_ap(i).is_some() { decision.p_off[i] * decision.tau_off[i] } else { 0.0 };
        m.e_off.push(e_off);
    }
    m
}

/// Advance real queues and batteries by one slot.
///
/// Placeholder fields are carried over unchanged.
pub fn apply_slot(state: &NetworkState, metrics: &SlotMetrics, devs: &[DeviceParams]) -> Result<NetworkState> {
    let mut next = state.clone();
    for (i, dev) in devs.iter().enumerate() {
        let spent = metrics.e_local[i] + metrics.e_off[i];
        if spent > state.battery[i] + ENERGY_TOLERANCE {
            return Err(Error::EnergyCausality { device: i, spent, available: state.battery[i] });
        }
        let served = metrics.d_local[i] + metrics.d_off[i];
        let arrivals = metrics.arrivals.get(i).copied().unwrap_or(0.0);
        next.q_act[i] = (state.q_act[i] - served).max(0.0) + arrivals;
        next.battery[i] = (state.battery[i] - spent + metrics.e_harvest[i]).clamp(0.0, dev.b_max);
    }
    Ok(next)
}

/// A constraint violated by a decision.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Dimension,
    MultipleWpt,
    MultipleAssociation { device: usize },
    WptRange { ap: usize },
    OffloadRange { device: usize },
    FreqRange { device: usize },
    TimeBudget { ap: usize, used: f64 },
    EnergyCausality { device: usize, spent: f64, available: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dimension => write!(f, "decision dimensions do not match the scenario"),
            Violation::MultipleWpt => write!(f, "more than one AP broadcasts energy (1)"),
            Violation::MultipleAssociation { device } => write!(f, "device {device} associated with several APs (8)"),
            Violation::WptRange { ap } => write!(f, "AP {ap} WPT power or time out of range"),
            Violation::OffloadRange { device } => write!(f, "device {device} offload power or time out of range"),
            Violation::FreqRange { device } => write!(f, "device {device} CPU frequency out of range"),
            Violation::TimeBudget { ap, used } => write!(f, "AP {ap} uses {used} s of the slot"),
            Violation::EnergyCausality { device, spent, available } => {
                write!(f, "device {device} spends {spent} J with {available} J stored")
            }
        }
    }
}

/// Check every per-slot constraint of the original problem.
pub fn check_feasibility(state: &NetworkState, decision: &SlotDecision, sc: &Scenario) -> std::result::Result<(), Violation> {
    let (n, m) = (sc.num_devices(), sc.num_aps());
    let dt = sc.sys.slot_len;
    // Relative slack for time comparisons against the slot length.
    let t_eps = dt * 1e-12;
    if decision.a_wpt.len() != m
        || decision.p_wpt.len() != m
        || decision.tau_wpt.len() != m
        || decision.a_off.len() != n
        || decision.a_off.iter().any(|r| r.len() != m)
        || decision.p_off.len() != n
        || decision.tau_off.len() != n
        || decision.freq.len() != n
        || state.num_devices() != n
    {
        return Err(Violation::Dimension);
    }
    if decision.a_wpt.iter().filter(|&&a| a).count() > 1 {
        return Err(Violation::MultipleWpt);
    }
    for (j, ap) in sc.aps.iter().enumerate() {
        let (p, tau) = (decision.p_wpt[j], decision.tau_wpt[j]);
        if !(0.0..=ap.p_wpt_max).contains(&p) || !(0.0..=dt + t_eps).contains(&tau) {
            return Err(Violation::WptRange { ap: j });
        }
    }
    let mut used: Vec<f64> = (0..m).map(|j| if decision.a_wpt[j] { decision.tau_wpt[j] } else { 0.0 }).collect();
    for (i, dev) in sc.devices.iter().enumerate() {
        if decision.a_off[i].iter().filter(|&&a| a).count() > 1 {
            return Err(Violation::MultipleAssociation { device: i });
        }
        let (p, tau) = (decision.p_off[i], decision.tau_off[i]);
        if !(0.0..=dev.p_off_max).contains(&p) || !(0.0..=dt + t_eps).contains(&tau) {
            return Err(Violation::OffloadRange { device: i });
        }
        if !(0.0..=dev.f_max).contains(&decision.freq[i]) {
            return Err(Violation::FreqRange { device: i });
        }
        if let Some(j) = decision.associated_ap(i) {
            used[j] += tau;
        }
        let e_local = dev.kappa * decision.freq[i].powi(3) * dt;
        let e_off = if decision.associated_ap(i).is_some() { p * tau } else { 0.0 };
        if e_local + e_off > state.battery[i] + ENERGY_TOLERANCE {
            return Err(Violation::EnergyCausality { device: i, spent: e_local + e_off, available: state.battery[i] });
        }
    }
    if let Some((j, &u)) = used.iter().enumerate().find(|(_, &u)| u > dt + t_eps) {
        return Err(Violation::TimeBudget { ap: j, used: u });
    }
    Ok(())
}
