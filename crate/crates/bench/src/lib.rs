//! Benchmark fixtures.

use mdrd_core::optim::restart_rng;
use mdrd_core::regions::search::random_joint;
use mdrd_core::strategy::StateChannel;
use mdrd_core::suites::random_rational_joint;
use mdrd_core::{Alphabet, Channel, ExactPmf, JointPmf};

/// Exact joint over `U, V, W` with the given sizes.
pub fn uvw(seed: u64, nu: usize, nv: usize, nw: usize) -> ExactPmf {
    random_rational_joint(&mut restart_rng(seed, 0), &[("U", nu), ("V", nv), ("W", nw)], 9).expect("valid sizes")
}

/// Binary VKG joint for `l` descriptions.
pub fn vkg(seed: u64, l: usize) -> JointPmf<f64> {
    let aux: Vec<(u32, usize)> = (0..1u32 << l).map(|m| (m, 2)).collect();
    random_joint(&mut restart_rng(seed, 1), 2, &aux)
}

/// Channel with `ns` equiprobable states over binary input and output.
pub fn state_channel(ns: usize) -> StateChannel {
    let mut flat = Vec::new();
    for x in 0..2 {
        for s in 0..ns {
            let e = 0.05 + 0.4 * ((x * ns + s) as f64 / (2 * ns) as f64);
            flat.extend([1.0 - e, e]);
        }
    }
    let law = Channel::new(
        vec![Alphabet::new("X", 2).expect("size 2"), Alphabet::new("S", ns).expect("size ns")],
        vec![Alphabet::new("Y", 2).expect("size 2")],
        flat,
    )
    .expect("rows sum to one");
    StateChannel::new(vec![1.0 / ns as f64; ns], law).expect("valid channel")
}
