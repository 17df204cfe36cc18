#![allow(dead_code)]

use postsel_core::{ComplexAmp, MeasurementSetup, SpinState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn plus() -> SpinState {
    SpinState::from_real(1.0, 1.0).unwrap()
}

/// Normalized pair of complex standard normals.
pub fn random_state<R: Rng>(rng: &mut R) -> SpinState {
    loop {
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let a = ComplexAmp::new(n(), n());
        let b = ComplexAmp::new(n(), n());
        if let Ok(s) = SpinState::new(a, b) {
            return s;
        }
    }
}

/// Seeded random setups with `η` uniform in `[0, eta_max]`.
pub fn random_setups(seed: u64, count: usize, eta_max: f64) -> Vec<MeasurementSetup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pre = random_state(&mut rng);
            let post = random_state(&mut rng);
            let eta = rng.random::<f64>() * eta_max;
            MeasurementSetup::dimensionless(pre, post, eta).unwrap()
        })
        .collect()
}

pub fn agrees(got: f64, want: f64, rel: f64, abs: f64) -> bool {
    let diff = (got - want).abs();
    diff <= rel * want.abs() || diff <= abs
}
