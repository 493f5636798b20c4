//! Placeholder backlogs.
//!
//! The controller acts on `q_act + q_ph`. The placeholder length follows an
//! exponential moving average of that effective queue, less a margin of
//! `r * ln(V)^2`, so that in steady state most of the backlog the controller
//! needs is virtual and real bits wait less.

use crate::model::{NetworkState, SystemParams};

pub fn update_ema(q_hat_prev: f64, q_effective: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * q_hat_prev + alpha * q_effective
}

/// `max(q_hat - r ln(V)^2, 0)`; zero when `V = 0` or placeholders are disabled.
pub fn placeholder_len(q_hat: f64, sys: &SystemParams) -> f64 {
    if !sys.placeholders || sys.penalty <= 0.0 {
        return 0.0;
    }
    let margin = sys.placeholder_gain * sys.penalty.ln().powi(2);
    (q_hat - margin).max(0.0)
}

/// Advance the estimator and placeholder lengths by one slot.
///
/// Call once per slot after the real queues have been updated. The EMA
/// consumes the current effective queue `q_act + q_ph`.
pub fn step_placeholder(state: &NetworkState, sys: &SystemParams) -> NetworkState {
    let mut next = state.clone();
    for i in 0..state.num_devices() {
        next.q_hat[i] = update_ema(state.q_hat[i], state.effective_queue(i), sys.ema_rate);
        next.q_ph[i] = placeholder_len(next.q_hat[i], sys);
    }
    next
}
