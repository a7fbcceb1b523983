use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Ray, DIM};
use crate::ksset::KSSet;

use super::mask::ray_to_mask;
use super::rng::substream;

/// Imperfections of the preparation and projection masks plus the detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Std-dev of the relative error on each slit transmissivity.
    pub amplitude_jitter: f64,
    /// Std-dev of each slit phase error, in radians.
    pub phase_jitter: f64,
    /// Additive false-count probability per projection.
    pub background: f64,
    /// Overall detection scale, in (0, 1].
    pub efficiency: f64,
}

impl NoiseModel {
    pub const IDEAL: NoiseModel = NoiseModel {
        amplitude_jitter: 0.0,
        phase_jitter: 0.0,
        background: 0.0,
        efficiency: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let nonneg = |what, value: f64| {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain {
                    what,
                    value,
                    range: "[0, inf)",
                })
            }
        };
        nonneg("amplitude_jitter", self.amplitude_jitter)?;
        nonneg("phase_jitter", self.phase_jitter)?;
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::Domain {
                what: "background",
                value: self.background,
                range: "[0, 1]",
            });
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Domain {
                what: "efficiency",
                value: self.efficiency,
                range: "(0, 1]",
            });
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.amplitude_jitter == 0.0 && self.phase_jitter == 0.0 && self.background == 0.0
    }

    /// Realizes the mask for `v` with one draw of slit errors from `rng`.
    pub fn jittered_state<R: Rng>(&self, v: &Ray, rng: &mut R) -> [Complex64; DIM] {
        let mut mask = ray_to_mask(v);
        for l in 0..DIM {
            let ga: f64 = rng.sample(StandardNormal);
            let gp: f64 = rng.sample(StandardNormal);
            let t = mask.transmissivities[l] * (1.0 + self.amplitude_jitter * ga);
            mask.transmissivities[l] = t.clamp(0.0, 1.0);
            mask.phases[l] += self.phase_jitter * gp;
        }
        let mut amps = mask.amplitudes();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            amps.iter_mut().for_each(|a| *a /= norm);
        }
        amps
    }

    /// clamp(efficiency |<v|psi>|^2 + background, 0, 1)
    pub fn detection_probability(&self, v: &[Complex64; DIM], psi: &[Complex64; DIM]) -> f64 {
        let amp: Complex64 = v.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
        (self.efficiency * amp.norm_sqr() + self.background).clamp(0.0, 1.0)
    }
}

/// Jitter realizations per mask. Each pulse sees one frame chosen
/// uniformly at random, so its detection probability is the frame average.
pub const JITTER_FRAMES: usize = 64;

/// A prepared state: one jittered amplitude vector per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedState {
    frames: Vec<[Complex64; DIM]>,
}

/// One realization of the apparatus: jittered frames for every test mask,
/// fixed for the whole run.
#[derive(Clone, Debug)]
pub struct Apparatus {
    pub noise: NoiseModel,
    seed: u64,
    projectors: Vec<Vec<[Complex64; DIM]>>,
}

fn frames<R: Rng>(noise: &NoiseModel, v: &Ray, rng: &mut R) -> Vec<[Complex64; DIM]> {
    if noise.amplitude_jitter == 0.0 && noise.phase_jitter == 0.0 {
        return vec![noise.jittered_state(v, rng)];
    }
    (0..JITTER_FRAMES)
        .map(|_| noise.jittered_state(v, rng))
        .collect()
}

impl Apparatus {
    pub fn realize(set: &KSSet, noise: &NoiseModel, seed: u64) -> Self {
        let projectors = set
            .rays()
            .iter()
            .enumerate()
            .map(|(i, v)| frames(noise, v, &mut substream(seed, "measure", i as u64 + 1)))
            .collect();
        Apparatus {
            noise: *noise,
            seed,
            projectors,
        }
    }

    /// Prepares `state` with its own preparation-mask errors; `slot`
    /// distinguishes preparations within one apparatus.
    pub fn prepare(&self, state: &Ray, slot: u64) -> PreparedState {
        PreparedState {
            frames: frames(
                &self.noise,
                state,
                &mut substream(self.seed, "prepare", slot),
            ),
        }
    }

    /// Per-pulse detection probability (before the photon-number factor)
    /// for the 1-based test `index`, averaged over jitter frames.
    pub fn detection_probability(&self, psi: &PreparedState, index: usize) -> f64 {
        let masks = &self.projectors[index - 1];
        let n = masks.len().max(psi.frames.len());
        (0..n)
            .map(|k| {
                self.noise.detection_probability(
                    &masks[k % masks.len()],
                    &psi.frames[k % psi.frames.len()],
                )
            })
            .sum::<f64>()
            / n as f64
    }

    /// Detection probability of the all-pass flux calibration setting.
    pub fn flux_probability(&self) -> f64 {
        self.noise.efficiency
    }

    /// The probability the estimator converges to for test `index`:
    /// detection probability relative to the calibration flux.
    pub fn ground_truth(&self, psi: &PreparedState, index: usize) -> f64 {
        self.detection_probability(psi, index) / self.flux_probability()
    }
}
