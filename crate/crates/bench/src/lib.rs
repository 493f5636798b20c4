//! Fixtures shared by the benchmarks and the runtime tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpmec_core::channel::sample_channel;
use wpmec_core::sim::build_topology;
use wpmec_core::{ApParams, ChannelSlot, DeviceParams, FadingParams, Matrix, NetworkState, Scenario, SystemParams};

/// Dense cost matrix with entries in `[-1, 0)`, as the offloading step produces.
pub fn cost_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| -rng.random::<f64>())
}

/// A default-parameter network in a busy mid-run state with one channel draw.
pub fn busy_slot(n: usize, m: usize, seed: u64) -> (Scenario, NetworkState, ChannelSlot) {
    let sys = SystemParams { num_devices: n, num_aps: m, rng_seed: seed, ..Default::default() };
    let sc = Scenario::new(sys, vec![DeviceParams::default(); n], vec![ApParams::default(); m]).unwrap();
    let (sc, topo) = build_topology(&sc, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = NetworkState::empty(n);
    for i in 0..n {
        state.q_act[i] = rng.random_range(1e3..1e6);
        state.battery[i] = rng.random_range(0.0..sc.devices[i].b_max);
    }
    let ch = sample_channel(&topo, &FadingParams::default(), &mut rng);
    (sc, state, ch)
}
