use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::energy;
use crate::error::{Error, Result};
use crate::frequency::DyadicLadder;
use crate::grid::{Grid, RadialField, SpectralBasis, C64};

/// `amplitude · e^{−r²/(2σ²)}`
pub fn gaussian(grid: &Arc<Grid>, width: f64, amplitude: f64) -> Result<RadialField> {
    RadialField::from_real(grid.clone(), |r| amplitude * (-r * r / (2.0 * width * width)).exp())
}

/// Parameters of the seeded Gaussian-mixture initial data.
#[derive(Clone, Copy, Debug)]
pub struct MixtureSpec {
    pub terms: usize,
    pub width_min: f64,
    pub width_max: f64,
    pub chirp: f64,
    pub kinetic_min: f64,
    pub kinetic_max: f64,
}

/// A chirped Gaussian mixture with complex normal weights, rescaled so that its kinetic
/// energy is a seeded fraction of `kin_w`.
pub fn random_mixture(grid: &Arc<Grid>, seed: u64, spec: &MixtureSpec, kin_w: f64) -> Result<RadialField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(spec.terms);
    for _ in 0..spec.terms {
        let a = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let s = rng.gen_range(spec.width_min..=spec.width_max);
        let k = rng.gen_range(-spec.chirp..=spec.chirp);
        terms.push((a, s, k));
    }
    let fraction = if spec.kinetic_max > spec.kinetic_min {
        rng.gen_range(spec.kinetic_min..=spec.kinetic_max)
    } else {
        spec.kinetic_min
    };
    let raw = RadialField::from_fn(grid.clone(), |r| {
        terms
            .iter()
            .map(|&(a, s, k)| a * (-r * r / (2.0 * s * s)).exp() * C64::from_polar(1.0, k * r * r))
            .sum()
    })?;
    let kin = energy(&raw)?.kinetic;
    if !(kin > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(raw.scale_real((fraction * kin_w / kin).sqrt()))
}

/// Complex normal eigen-coefficients on the modes with eigenfrequency in `(lo, hi]`.
pub fn band_limited_noise(basis: &SpectralBasis, seed: u64, lo: f64, hi: f64) -> Result<RadialField> {
    if !(lo >= 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!("band ({lo}, {hi}] is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<C64> = basis
        .frequencies()
        .iter()
        .map(|&xi| {
            let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            if xi > lo && xi <= hi {
                z
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    if c.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroField);
    }
    basis.reconstruct(&c)
}

/// The middle third of a ladder as a frequency band `(lo, hi]`.
pub fn middle_band(ladder: &DyadicLadder) -> (f64, f64) {
    let f = &ladder.frequencies;
    let k = f.len();
    let (a, b) = (k / 3, (2 * k).div_ceil(3).max(k / 3 + 1).min(k));
    (f[a] / 2.0, f[b - 1])
}
