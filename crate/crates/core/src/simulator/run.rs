use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{estimate_probabilities, estimate_tallies, Estimate, Tallies};
use crate::error::{Error, Result};
use crate::exact::Ray;
use crate::ksset::{mermin_subset, KSSet, N_RAYS};

use super::noise::{Apparatus, NoiseModel, PreparedState};
use super::rng::substream;

/// Pulses per random substream. Fixed, so counts do not depend on the
/// number of worker threads.
pub const CHUNK: u64 = 1 << 16;

pub const DEFAULT_MU: f64 = 0.14;
pub const DEFAULT_PULSES: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    /// All 40 tests (Sigma).
    Ks40,
    /// The 16 Mermin tests (S).
    Mermin16,
}

impl Pool {
    pub fn indices(self) -> Vec<usize> {
        match self {
            Pool::Ks40 => (1..=N_RAYS).collect(),
            Pool::Mermin16 => mermin_subset(),
        }
    }
}

impl std::str::FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks40" => Ok(Pool::Ks40),
            "mermin16" => Ok(Pool::Mermin16),
            _ => Err(Error::Validation(format!(
                "unknown pool {s:?} (expected ks40 or mermin16)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRun {
    pub seed: u64,
    pub n_pulses: u64,
    /// Mean photon number per pulse.
    pub mu: f64,
    /// 1-based test labels a pulse may be projected onto.
    pub projector_pool: Vec<usize>,
}

impl PulseRun {
    pub fn new(seed: u64, n_pulses: u64, pool: Vec<usize>) -> Self {
        PulseRun {
            seed,
            n_pulses,
            mu: DEFAULT_MU,
            projector_pool: pool,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::Validation("n_pulses must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain {
                what: "mu",
                value: self.mu,
                range: "(0, inf)",
            });
        }
        if self.projector_pool.is_empty() {
            return Err(Error::Validation("empty projector pool".into()));
        }
        if let Some(&i) = self
            .projector_pool
            .iter()
            .find(|&&i| !(1..=N_RAYS).contains(&i))
        {
            return Err(Error::Validation(format!("projector {i} out of range")));
        }
        Ok(())
    }

    /// Probability that a pulse carries at least one photon.
    pub fn photon_probability(&self) -> f64 {
        -(-self.mu).exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxCalibration {
    pub pulses: u64,
    pub counts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub state: Ray,
    pub seed: u64,
    pub n_pulses: u64,
    pub mu: f64,
    pub noise: NoiseModel,
    pub projector_pool: Vec<usize>,
    pub counts: BTreeMap<usize, u64>,
    pub pulses_per_projector: BTreeMap<usize, u64>,
    /// Basis group (1-based) -> independent all-pass flux measurement.
    pub flux_calibration: BTreeMap<usize, FluxCalibration>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Tally {
    pulses: Vec<u64>,
    counts: Vec<u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        if self.pulses.is_empty() {
            return other;
        }
        for (a, b) in self.pulses.iter_mut().zip(other.pulses) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }
}

fn chunk_lengths(n: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(move |c| (c, CHUNK.min(n - c * CHUNK)))
}

/// Each pulse picks a test uniformly from the pool, then is detected with
/// that test's per-pulse probability.
fn simulate_pulses(seed: u64, detect: &[f64], n: u64) -> Tally {
    chunk_lengths(n)
        .map(|(c, len)| {
            let mut rng = substream(seed, "pulses", c);
            let mut t = Tally {
                pulses: vec![0; detect.len()],
                counts: vec![0; detect.len()],
            };
            for _ in 0..len {
                let k = rng.random_range(0..detect.len());
                let u: f64 = rng.random();
                t.pulses[k] += 1;
                t.counts[k] += u64::from(u < detect[k]);
            }
            t
        })
        .reduce(Tally::default, Tally::merge)
}

fn simulate_flux(seed: u64, basis: usize, p: f64, n: u64) -> u64 {
    let label = format!("flux/{basis}");
    chunk_lengths(n)
        .map(|(c, len)| {
            let mut rng = substream(seed, &label, c);
            (0..len).filter(|_| rng.random::<f64>() < p).count() as u64
        })
        .sum()
}

fn pool_groups(set: &KSSet, pool: &[usize]) -> Vec<usize> {
    pool.iter()
        .map(|&i| set.group_of(i) + 1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Calibration pulses per basis: the KS pulses split evenly over the bases
/// the pool touches.
fn calibration_pulses(set: &KSSet, run: &PulseRun) -> u64 {
    (run.n_pulses / pool_groups(set, &run.projector_pool).len() as u64).max(1)
}

impl Apparatus {
    fn detect_probabilities(&self, psi: &PreparedState, run: &PulseRun) -> Vec<f64> {
        let photon = run.photon_probability();
        run.projector_pool
            .iter()
            .map(|&i| photon * self.detection_probability(psi, i))
            .collect()
    }

    /// Runs the pulse sequence for `state`, prepared in preparation `slot`.
    pub fn run(&self, set: &KSSet, state: &Ray, slot: u64, run: &PulseRun) -> Result<CountRecord> {
        run.validate()?;
        let psi = self.prepare(state, slot);
        let detect = self.detect_probabilities(&psi, run);
        let tally = simulate_pulses(run.seed, &detect, run.n_pulses);
        let mut counts = BTreeMap::new();
        let mut pulses_per_projector = BTreeMap::new();
        for (k, &i) in run.projector_pool.iter().enumerate() {
            *counts.entry(i).or_insert(0) += tally.counts[k];
            *pulses_per_projector.entry(i).or_insert(0) += tally.pulses[k];
        }
        let cal = calibration_pulses(set, run);
        let flux_p = run.photon_probability() * self.flux_probability();
        let flux_calibration = pool_groups(set, &run.projector_pool)
            .into_iter()
            .map(|b| {
                let counts = simulate_flux(run.seed, b, flux_p, cal);
                (b, FluxCalibration { pulses: cal, counts })
            })
            .collect();
        Ok(CountRecord {
            state: *state,
            seed: run.seed,
            n_pulses: run.n_pulses,
            mu: run.mu,
            noise: self.noise,
            projector_pool: run.projector_pool.clone(),
            counts,
            pulses_per_projector,
            flux_calibration,
        })
    }

    /// Expected tallies of [`Apparatus::run`]: the infinite-statistics limit
    /// scaled to `run.n_pulses`.
    pub fn expected_tallies(&self, set: &KSSet, state: &Ray, slot: u64, run: &PulseRun) -> Tallies {
        let psi = self.prepare(state, slot);
        let detect = self.detect_probabilities(&psi, run);
        let share = run.n_pulses as f64 / run.projector_pool.len() as f64;
        let mut t = Tallies::default();
        for (&i, &p) in run.projector_pool.iter().zip(&detect) {
            *t.pulses.entry(i).or_insert(0.0) += share;
            *t.counts.entry(i).or_insert(0.0) += share * p;
        }
        let cal = calibration_pulses(set, run) as f64;
        let flux_p = run.photon_probability() * self.flux_probability();
        for b in pool_groups(set, &run.projector_pool) {
            t.flux.insert(b, (cal, cal * flux_p));
        }
        t
    }
}

pub fn run_ks_experiment(set: &KSSet, state: &Ray, noise: &NoiseModel, run: &PulseRun) -> Result<CountRecord> {
    noise.validate()?;
    Apparatus::realize(set, noise, run.seed).run(set, state, 0, run)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub pulses: u64,
    pub sigma: Option<Estimate>,
    #[serde(rename = "S")]
    pub s: Option<Estimate>,
}

/// Running estimates after the first `t` pulses for each checkpoint `t`.
/// Chunked substreams make every prefix identical to the corresponding
/// prefix of the full run.
pub fn convergence_trace(
    set: &KSSet,
    state: &Ray,
    noise: &NoiseModel,
    run: &PulseRun,
    checkpoints: &[u64],
) -> Result<Vec<TracePoint>> {
    noise.validate()?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("checkpoints must be strictly increasing".into()));
    }
    let app = Apparatus::realize(set, noise, run.seed);
    checkpoints
        .iter()
        .map(|&t| {
            let prefix = PulseRun {
                n_pulses: t,
                ..run.clone()
            };
            let record = app.run(set, state, 0, &prefix)?;
            let e = estimate_probabilities(set, &record)?;
            Ok(TracePoint {
                pulses: t,
                sigma: e.sigma,
                s: e.s,
            })
        })
        .collect()
}

pub fn trace_csv(points: &[TracePoint]) -> String {
    let cell = |e: &Option<Estimate>| {
        e.map_or(",".to_string(), |e| format!("{:.6},{:.6}", e.value, e.error))
    };
    let mut out = String::from("pulses,sigma,sigma_err,S,S_err\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.pulses, cell(&p.sigma), cell(&p.s)));
    }
    out
}

/// Geometric checkpoints ending at `n`.
pub fn default_checkpoints(n: u64) -> Vec<u64> {
    let mut points: Vec<u64> = (0..)
        .map(|k| 10_000u64 << k)
        .take_while(|&t| t < n)
        .collect();
    points.push(n);
    points
}

pub fn estimate_expected(set: &KSSet, app: &Apparatus, state: &Ray, run: &PulseRun) -> Result<crate::analysis::EstimateSet> {
    estimate_tallies(set, &app.expected_tallies(set, state, 0, run))
}
