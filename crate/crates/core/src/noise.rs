//! Clipped Gaussian white noise.
//!
//! Every trace is drawn from a ChaCha8 generator seeded with `seed` and
//! positioned on stream `stream`, so `(seed, stream)` pairs give independent,
//! reproducible sequences that can be generated in any order or in parallel.
//! Draws happen at `noise_rate`, are clipped to `[clip_low, clip_high]` and
//! then held (zero-order hold) up to the acquisition sample rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::signal::{sample_count, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub clip_low: f64,
    pub clip_high: f64,
    pub noise_rate: f64,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, noise_rate: f64, seed: u64) -> Self {
        NoiseSpec {
            sigma,
            clip_low: -5.0,
            clip_high: 5.0,
            noise_rate,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.clip_low < self.clip_high) {
            return Err(Error::invalid(format!(
                "clip_low ({}) must be below clip_high ({})",
                self.clip_low, self.clip_high
            )));
        }
        if !(self.noise_rate > 0.0 && self.noise_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_rate must be > 0, got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Iterator over the clipped draws at the noise rate.
pub struct NoiseDraws {
    rng: ChaCha8Rng,
    sigma: f64,
    lo: f64,
    hi: f64,
}

impl Iterator for NoiseDraws {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let z: f64 = self.rng.sample(StandardNormal);
        Some((self.sigma * z).clamp(self.lo, self.hi))
    }
}

pub fn draws(spec: &NoiseSpec) -> Result<NoiseDraws> {
    spec.validate()?;
    Ok(NoiseDraws {
        rng: spec.rng(),
        sigma: spec.sigma,
        lo: spec.clip_low,
        hi: spec.clip_high,
    })
}

pub fn generate_noise(spec: &NoiseSpec, sample_rate: f64, duration: f64) -> Result<Trace> {
    let n = sample_count(sample_rate, duration)?;
    let mut out = Vec::with_capacity(n);
    fill_noise(spec, sample_rate, &mut out, n)?;
    Trace::new(0.0, 1.0 / sample_rate, out)
}

/// Appends `n` held noise samples to `out`. Shared by the Monte Carlo loops to
/// avoid reallocating per run.
pub(crate) fn fill_noise(
    spec: &NoiseSpec,
    sample_rate: f64,
    out: &mut Vec<f64>,
    n: usize,
) -> Result<()> {
    let mut d = draws(spec)?;
    if spec.sigma == 0.0 {
        out.extend(std::iter::repeat_n(0.0, n));
        return Ok(());
    }
    let ratio = spec.noise_rate / sample_rate;
    let mut held_idx = 0usize;
    let mut held = d.next().unwrap_or(0.0);
    for i in 0..n {
        let k = (i as f64 * ratio + 1e-9).floor() as usize;
        while held_idx < k {
            held = d.next().unwrap_or(0.0);
            held_idx += 1;
        }
        out.push(held);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sd(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn zero_sigma_is_silent() {
        let tr = generate_noise(&NoiseSpec::new(0.0, 20_000.0, 1), 20_000.0, 0.1).unwrap();
        assert!(tr.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empirical_sd_close() {
        let tr = generate_noise(&NoiseSpec::new(0.05, 20_000.0, 3), 20_000.0, 0.4).unwrap();
        assert_eq!(tr.len(), 8000);
        let s = sd(&tr.samples);
        assert!((s - 0.05).abs() / 0.05 < 0.05, "sd = {s}");
    }

    #[test]
    fn clipping_bounds() {
        let tr = generate_noise(&NoiseSpec::new(10.0, 1000.0, 9), 1000.0, 5.0).unwrap();
        assert!(tr.samples.iter().all(|&v| (-5.0..=5.0).contains(&v)));
        assert!(tr.samples.contains(&5.0));
        assert!(tr.samples.contains(&-5.0));
    }

    #[test]
    fn hold_repeats_each_draw() {
        let tr = generate_noise(&NoiseSpec::new(0.1, 4000.0, 5), 20_000.0, 0.1).unwrap();
        assert_eq!(tr.len(), 2000);
        for chunk in tr.samples.chunks(5) {
            assert!(chunk.iter().all(|&v| v == chunk[0]));
        }
        assert_ne!(tr.samples[0], tr.samples[5]);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a = NoiseSpec::new(0.1, 1000.0, 42);
        let x = generate_noise(&a, 1000.0, 1.0).unwrap();
        let y = generate_noise(&a, 1000.0, 1.0).unwrap();
        let z = generate_noise(&a.with_stream(1), 1000.0, 1.0).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn rejects_negative_sigma() {
        assert!(generate_noise(&NoiseSpec::new(-0.1, 1000.0, 1), 1000.0, 1.0).is_err());
        let mut s = NoiseSpec::new(0.1, 1000.0, 1);
        s.clip_low = 5.0;
        assert!(generate_noise(&s, 1000.0, 1.0).is_err());
    }
}
