use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::estimate_probabilities;
use crate::error::{Error, Result};
use crate::ksset::{KSSet, N_RAYS};

use super::noise::{Apparatus, NoiseModel};
use super::rng::derive_seed;
use super::run::PulseRun;

/// Rays 27, 34, 36 and 40 plus the first ray of each of the first four bases.
pub const DEFAULT_INITIAL_RAYS: [usize; 8] = [1, 9, 17, 25, 27, 34, 36, 40];

/// Rays orthogonal to `index`, ascending.
pub fn partners(set: &KSSet, index: usize) -> Vec<usize> {
    let v = set.ray(index);
    (1..=N_RAYS)
        .filter(|&j| j != index && crate::exact::dot(v, set.ray(j)) == 0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub initial: usize,
    pub partner: usize,
    pub pulses: u64,
    pub counts: u64,
    pub probability: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusivityReport {
    /// Mean estimated probability over all should-be-zero pairs.
    pub epsilon: f64,
    pub epsilon_error: f64,
    pub n_tests: usize,
    pub initial_rays: Vec<usize>,
    pub per_initial: BTreeMap<usize, f64>,
    pub pulses_per_initial: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub pairs: Vec<PairRow>,
}

impl ExclusivityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("initial,partner,pulses,counts,probability,error\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                p.initial, p.partner, p.pulses, p.counts, p.probability, p.error
            ));
        }
        out
    }
}

fn check_initial(initial_rays: &[usize]) -> Result<()> {
    if initial_rays.is_empty() {
        return Err(Error::Validation("no initial rays".into()));
    }
    match initial_rays.iter().find(|&&i| !(1..=N_RAYS).contains(&i)) {
        Some(i) => Err(Error::Validation(format!("initial ray {i} out of range"))),
        None => Ok(()),
    }
}

/// Prepares each initial ray and projects it onto its 23 orthogonal
/// partners. `run.n_pulses` is spent per initial ray; `run.projector_pool`
/// is ignored.
pub fn run_exclusivity_campaign(
    set: &KSSet,
    noise: &NoiseModel,
    initial_rays: &[usize],
    run: &PulseRun,
) -> Result<ExclusivityReport> {
    noise.validate()?;
    let app = Apparatus::realize(set, noise, run.seed);
    exclusivity_with(&app, set, initial_rays, run)
}

pub fn exclusivity_with(
    app: &Apparatus,
    set: &KSSet,
    initial_rays: &[usize],
    run: &PulseRun,
) -> Result<ExclusivityReport> {
    check_initial(initial_rays)?;
    let mut pairs = Vec::new();
    let mut per_initial = BTreeMap::new();
    for &r in initial_rays {
        let sub = PulseRun {
            seed: derive_seed(run.seed, "exclusivity", r as u64),
            n_pulses: run.n_pulses,
            mu: run.mu,
            projector_pool: partners(set, r),
        };
        let record = app.run(set, set.ray(r), r as u64, &sub)?;
        let est = estimate_probabilities(set, &record)?;
        let mut sum = 0.0;
        for (&j, e) in &est.probabilities {
            sum += e.value;
            pairs.push(PairRow {
                initial: r,
                partner: j,
                pulses: record.pulses_per_projector[&j],
                counts: record.counts[&j],
                probability: e.value,
                error: e.error,
            });
        }
        per_initial.insert(r, sum / est.probabilities.len() as f64);
    }
    let n = pairs.len() as f64;
    let epsilon = pairs.iter().map(|p| p.probability).sum::<f64>() / n;
    let epsilon_error = pairs.iter().map(|p| p.error * p.error).sum::<f64>().sqrt() / n;
    Ok(ExclusivityReport {
        epsilon,
        epsilon_error,
        n_tests: pairs.len(),
        initial_rays: initial_rays.to_vec(),
        per_initial,
        pulses_per_initial: run.n_pulses,
        seed: run.seed,
        noise: app.noise,
        pairs,
    })
}

/// Infinite-statistics epsilon of one apparatus realization.
pub fn expected_epsilon(app: &Apparatus, set: &KSSet, initial_rays: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for &r in initial_rays {
        let psi = app.prepare(set.ray(r), r as u64);
        for j in partners(set, r) {
            total += app.ground_truth(&psi, j);
            n += 1;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksset::canonical_set;

    #[test]
    fn every_ray_has_23_partners() {
        let set = canonical_set().unwrap();
        assert!((1..=40).all(|i| partners(&set, i).len() == 23));
    }

    #[test]
    fn ideal_campaign_sees_no_false_positives() {
        let set = canonical_set().unwrap();
        let run = PulseRun::new(1, 200_000, vec![]);
        let r = run_exclusivity_campaign(&set, &NoiseModel::IDEAL, &DEFAULT_INITIAL_RAYS, &run).unwrap();
        assert_eq!(r.n_tests, 184);
        assert_eq!(r.epsilon, 0.0);
        assert!(r.pairs.iter().all(|p| p.counts == 0));
        assert_eq!(r.to_csv().lines().count(), 185);
    }

    #[test]
    fn simulated_epsilon_tracks_expectation() {
        let set = canonical_set().unwrap();
        let noise = NoiseModel {
            amplitude_jitter: 0.1,
            phase_jitter: 0.2,
            background: 0.004,
            efficiency: 0.9,
        };
        let run = PulseRun::new(12, 1_000_000, vec![]);
        let r = run_exclusivity_campaign(&set, &noise, &DEFAULT_INITIAL_RAYS, &run).unwrap();
        let app = Apparatus::realize(&set, &noise, 12);
        let expected = expected_epsilon(&app, &set, &DEFAULT_INITIAL_RAYS);
        assert!(r.epsilon_error > 0.0);
        assert!((r.epsilon - expected).abs() < 4.0 * r.epsilon_error, "{} vs {expected}", r.epsilon);
    }

    #[test]
    fn rejects_bad_initial_rays() {
        let set = canonical_set().unwrap();
        let run = PulseRun::new(1, 1000, vec![]);
        assert!(run_exclusivity_campaign(&set, &NoiseModel::IDEAL, &[41], &run).is_err());
        assert!(run_exclusivity_campaign(&set, &NoiseModel::IDEAL, &[], &run).is_err());
    }
}
