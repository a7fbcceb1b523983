use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::{Ray, DIM};

/// Amplitude and phase settings of the eight-slit aperture encoding a ray:
/// slit `l` carries amplitude `sqrt(t_l) e^{i phi_l} / sqrt(N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitPreparation {
    pub transmissivities: [f64; DIM],
    pub phases: [f64; DIM],
    pub normalization: f64,
}

pub fn ray_to_mask(v: &Ray) -> SlitPreparation {
    let max = v.entries().iter().map(|e| e.unsigned_abs()).max().unwrap_or(1).max(1) as f64;
    let mut transmissivities = [0.0; DIM];
    let mut phases = [0.0; DIM];
    for (l, &e) in v.entries().iter().enumerate() {
        transmissivities[l] = (f64::from(e) / max).powi(2);
        phases[l] = if e < 0 { PI } else { 0.0 };
    }
    SlitPreparation {
        transmissivities,
        phases,
        normalization: transmissivities.iter().sum(),
    }
}

impl SlitPreparation {
    /// Normalized state vector produced by the mask.
    pub fn amplitudes(&self) -> [Complex64; DIM] {
        let n = self.normalization.sqrt();
        let mut out = [Complex64::new(0.0, 0.0); DIM];
        for (o, (&t, &phi)) in out
            .iter_mut()
            .zip(self.transmissivities.iter().zip(&self.phases))
        {
            *o = Complex64::from_polar(t.max(0.0).sqrt() / n, phi);
        }
        out
    }

    /// Recovers an integer ray, assuming every nonzero amplitude is an
    /// integer multiple of the smallest one (true for all table rays).
    pub fn decode(&self) -> Result<Ray> {
        let amps = self.amplitudes();
        let smallest = amps
            .iter()
            .map(|a| a.re.abs())
            .filter(|&a| a > 1e-9)
            .fold(f64::INFINITY, f64::min);
        let mut entries = [0i64; DIM];
        for (e, a) in entries.iter_mut().zip(&amps) {
            if a.re.abs() > 1e-9 {
                *e = (a.re / smallest).round() as i64;
            }
        }
        Ray::from_slice(&entries)
    }
}
