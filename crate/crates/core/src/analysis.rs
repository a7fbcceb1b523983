//! Estimators and figures of merit for simulated count records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{corrected_s_bound, corrected_sigma_bound};
use crate::error::{Error, Result};
use crate::ksset::{mermin_subset, KSSet, N_RAYS};
use crate::simulator::CountRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    fn sum<'a>(items: impl Iterator<Item = &'a Estimate>) -> Estimate {
        let (value, var) = items.fold((0.0, 0.0), |(v, s), e| (v + e.value, s + e.error * e.error));
        Estimate {
            value,
            error: var.sqrt(),
        }
    }
}

/// Raw tallies with real-valued counts, so the estimator can be fed exact
/// expectations as well as simulated counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tallies {
    pub pulses: BTreeMap<usize, f64>,
    pub counts: BTreeMap<usize, f64>,
    /// basis group (1-based) -> (calibration pulses, calibration counts)
    pub flux: BTreeMap<usize, (f64, f64)>,
}

impl From<&CountRecord> for Tallies {
    fn from(r: &CountRecord) -> Self {
        Tallies {
            pulses: r
                .pulses_per_projector
                .iter()
                .map(|(&k, &v)| (k, v as f64))
                .collect(),
            counts: r.counts.iter().map(|(&k, &v)| (k, v as f64)).collect(),
            flux: r
                .flux_calibration
                .iter()
                .map(|(&b, f)| (b, (f.pulses as f64, f.counts as f64)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateSet {
    pub probabilities: BTreeMap<usize, Estimate>,
    /// Per basis group (1-based): sum of the estimated probabilities present.
    pub basis_sums: BTreeMap<usize, Estimate>,
    /// Present only when all 40 tests were measured.
    pub sigma: Option<Estimate>,
    /// Present only when all 16 Mermin tests were measured.
    #[serde(rename = "S")]
    pub s: Option<Estimate>,
}

impl EstimateSet {
    /// Estimated probabilities indexed 1..=40, zero where not measured.
    pub fn dense(&self) -> Vec<f64> {
        (1..=N_RAYS)
            .map(|i| self.probabilities.get(&i).map_or(0.0, |e| e.value))
            .collect()
    }
}

pub fn estimate_probabilities(set: &KSSet, r: &CountRecord) -> Result<EstimateSet> {
    estimate_tallies(set, &Tallies::from(r))
}

/// P_i = (counts_i / pulses_i) / (flux_b / calibration_pulses_b), with
/// Poisson errors on both the test counts and the basis flux. Sums within a
/// basis share the flux error; different bases add in quadrature.
pub fn estimate_tallies(set: &KSSet, t: &Tallies) -> Result<EstimateSet> {
    // basis -> [(index, rate, rate variance)]
    let mut per_basis: BTreeMap<usize, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for (&i, &pulses) in &t.pulses {
        if pulses <= 0.0 {
            return Err(Error::Estimation(format!("test {i} received no pulses")));
        }
        let c = t.counts.get(&i).copied().unwrap_or(0.0);
        per_basis
            .entry(set.group_of(i) + 1)
            .or_default()
            .push((i, c / pulses, c / (pulses * pulses)));
    }
    let mut probabilities = BTreeMap::new();
    let mut basis_parts: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (&b, members) in &per_basis {
        let (cal_pulses, flux) = t.flux.get(&b).copied().unwrap_or((0.0, 0.0));
        if flux <= 0.0 || cal_pulses <= 0.0 {
            return Err(Error::Estimation(format!(
                "zero calibration flux for basis {b}"
            )));
        }
        let flux_rate = flux / cal_pulses;
        let flux_rel_var = 1.0 / flux;
        for &(i, rate, rate_var) in members {
            let p = rate / flux_rate;
            let var = rate_var / (flux_rate * flux_rate) + p * p * flux_rel_var;
            probabilities.insert(
                i,
                Estimate {
                    value: p,
                    error: var.sqrt(),
                },
            );
        }
        basis_parts.insert(b, (flux_rate, flux_rel_var));
    }
    let group_sum = |b: usize, filter: &dyn Fn(usize) -> bool| -> Option<Estimate> {
        let (flux_rate, flux_rel_var) = basis_parts.get(&b)?;
        let members: Vec<_> = per_basis[&b].iter().filter(|m| filter(m.0)).collect();
        if members.is_empty() {
            return None;
        }
        let rate: f64 = members.iter().map(|m| m.1).sum();
        let rate_var: f64 = members.iter().map(|m| m.2).sum();
        let value = rate / flux_rate;
        let var = rate_var / (flux_rate * flux_rate) + value * value * flux_rel_var;
        Some(Estimate {
            value,
            error: var.sqrt(),
        })
    };
    let basis_sums: BTreeMap<usize, Estimate> = per_basis
        .keys()
        .filter_map(|&b| group_sum(b, &|_| true).map(|e| (b, e)))
        .collect();
    let sigma = (t.pulses.len() == N_RAYS).then(|| Estimate::sum(basis_sums.values()));
    let mermin = mermin_subset();
    let s = mermin.iter().all(|i| t.pulses.contains_key(i)).then(|| {
        let parts: Vec<Estimate> = per_basis
            .keys()
            .filter_map(|&b| group_sum(b, &|i| mermin.contains(&i)))
            .collect();
        Estimate::sum(parts.iter())
    });
    Ok(EstimateSet {
        probabilities,
        basis_sums,
        sigma,
        s,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMode {
    /// Bhattacharyya coefficient per basis, averaged over bases.
    #[default]
    PerBasis,
    /// One coefficient over all tests after global normalization.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityReport {
    #[serde(rename = "F")]
    pub f: f64,
    pub per_basis: Vec<f64>,
    pub mode: SimilarityMode,
    pub p_hash: String,
    pub q_hash: String,
}

fn fingerprint(p: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in p {
        h.update(v.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn normalized(values: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain {
            what: "distribution total",
            value: total,
            range: "(0, inf)",
        });
    }
    Ok(values.iter().map(|v| v / total).collect())
}

/// Bhattacharyya similarity between two probability tables indexed by
/// 1-based test label (`p[i - 1]`). Each group is renormalized first.
pub fn bhattacharyya(
    p: &[f64],
    q: &[f64],
    groups: &[Vec<usize>],
    mode: SimilarityMode,
) -> Result<SimilarityReport> {
    if let Some(&v) = p.iter().chain(q).find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::Domain {
            what: "probability",
            value: v,
            range: "[0, inf)",
        });
    }
    let coefficient = |a: &[f64], b: &[f64]| -> Result<f64> {
        let (a, b) = (normalized(a)?, normalized(b)?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).sum::<f64>().min(1.0))
    };
    let pick = |v: &[f64], g: &[usize]| g.iter().map(|&i| v[i - 1]).collect::<Vec<_>>();
    let per_basis = groups
        .iter()
        .map(|g| coefficient(&pick(p, g), &pick(q, g)))
        .collect::<Result<Vec<_>>>()?;
    let f = match mode {
        SimilarityMode::PerBasis => per_basis.iter().sum::<f64>() / per_basis.len() as f64,
        SimilarityMode::Global => {
            let all: Vec<usize> = groups.iter().flatten().copied().collect();
            coefficient(&pick(p, &all), &pick(q, &all))?
        }
    };
    Ok(SimilarityReport {
        f,
        per_basis,
        mode,
        p_hash: fingerprint(p),
        q_hash: fingerprint(q),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityVerdict {
    pub quantity: String,
    pub estimate: f64,
    pub error: f64,
    pub nchv_ideal: f64,
    pub nchv_corrected: f64,
    pub quantum_ideal: f64,
    /// (estimate - corrected bound) / error
    pub margin_sigmas: f64,
    pub violates_ideal: bool,
    pub violates_corrected: bool,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub epsilon: f64,
    pub sigma: Option<QuantityVerdict>,
    #[serde(rename = "S")]
    pub s: Option<QuantityVerdict>,
}

pub fn classify(quantity: &str, e: Estimate, ideal: f64, corrected: f64, quantum: f64) -> QuantityVerdict {
    let margin_sigmas = if e.error > 0.0 {
        (e.value - corrected) / e.error
    } else if e.value > corrected {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let violates_corrected = e.value > corrected;
    let violates_ideal = e.value > ideal;
    let label = if violates_corrected {
        format!("violates corrected NCHV bound {corrected:.3} by {margin_sigmas:.2} sigma")
    } else if violates_ideal {
        format!("violates ideal NCHV bound {ideal} only; within corrected bound {corrected:.3}")
    } else {
        "no violation".to_string()
    };
    QuantityVerdict {
        quantity: quantity.to_string(),
        estimate: e.value,
        error: e.error,
        nchv_ideal: ideal,
        nchv_corrected: corrected,
        quantum_ideal: quantum,
        margin_sigmas,
        violates_ideal,
        violates_corrected,
        label,
    }
}

pub fn verdict(e: &EstimateSet, epsilon: f64) -> Result<Verdict> {
    Ok(Verdict {
        epsilon,
        sigma: e
            .sigma
            .map(|s| Ok::<_, Error>(classify("sigma", s, 4.0, corrected_sigma_bound(epsilon)?, 5.0)))
            .transpose()?,
        s: e
            .s
            .map(|s| Ok::<_, Error>(classify("S", s, 3.0, corrected_s_bound(epsilon)?, 4.0)))
            .transpose()?,
    })
}
