use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{bhattacharyya, SimilarityMode};
use crate::error::{Error, Result};
use crate::ksset::KSSet;
use crate::quantum::{profile, StateName};

use super::campaign::{expected_epsilon, run_exclusivity_campaign, DEFAULT_INITIAL_RAYS};
use super::noise::{Apparatus, NoiseModel};
use super::rng::derive_seed;
use super::run::{estimate_expected, PulseRun, DEFAULT_PULSES};

/// Candidate values for each noise parameter; the search covers their
/// Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub amplitude_jitter: Vec<f64>,
    pub phase_jitter: Vec<f64>,
    pub background: Vec<f64>,
    pub efficiency: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            amplitude_jitter: vec![0.0, 0.1, 0.2, 0.3],
            phase_jitter: (0..=14).map(|k| k as f64 / 40.0).collect(),
            background: vec![0.0, 0.002, 0.004],
            efficiency: vec![0.9],
        }
    }
}

impl CalibrationGrid {
    pub fn points(&self) -> Vec<NoiseModel> {
        let mut out = Vec::new();
        for &amplitude_jitter in &self.amplitude_jitter {
            for &phase_jitter in &self.phase_jitter {
                for &background in &self.background {
                    for &efficiency in &self.efficiency {
                        out.push(NoiseModel {
                            amplitude_jitter,
                            phase_jitter,
                            background,
                            efficiency,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub epsilon: f64,
    /// Half-width of the accepted epsilon window.
    pub tolerance: f64,
    /// Window for the GHZ fidelity.
    pub fidelity_min: f64,
    pub fidelity_max: f64,
    /// Ceiling for every named state, so none comes out noiseless. The
    /// product state only sees background, which also inflates S, so this
    /// sits just under the 0.995 acceptance limit rather than at 0.99.
    pub fidelity_max_all: f64,
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget {
            epsilon: 0.0140,
            tolerance: 0.0036,
            fidelity_min: 0.90,
            fidelity_max: 0.99,
            fidelity_max_all: 0.9925,
        }
    }
}

impl CalibrationTarget {
    fn accepts(&self, p: &GridPoint) -> bool {
        (p.epsilon - self.epsilon).abs() <= self.tolerance
            && (self.fidelity_min..=self.fidelity_max).contains(&p.fidelity_ghz())
            && p.fidelity.values().all(|&f| f <= self.fidelity_max_all)
    }
}

/// Infinite-statistics effects of one grid point, averaged over apparatus
/// realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub noise: NoiseModel,
    pub epsilon: f64,
    /// Standard deviation of epsilon across realizations.
    pub epsilon_spread: f64,
    /// Per-basis similarity to the exact profile, per named state.
    pub fidelity: BTreeMap<StateName, f64>,
    pub feasible: bool,
}

impl GridPoint {
    pub fn fidelity_ghz(&self) -> f64 {
        self.fidelity[&StateName::Ghz]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub seed: u64,
    pub pulses_per_initial: u64,
    pub epsilon: f64,
    pub epsilon_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub seed: u64,
    pub realizations: u64,
    pub target: CalibrationTarget,
    pub grid: CalibrationGrid,
    pub chosen: GridPoint,
    pub closed_loop: ClosedLoop,
    pub trace: Vec<GridPoint>,
}

/// Contents of `noise.json`: the four noise parameters, plus the search
/// that produced them when written by the calibrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(flatten)]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
}

impl NoiseConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingCalibration(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let cfg: NoiseConfig = serde_json::from_str(&text)?;
        cfg.noise.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Evaluates one noise model over `realizations` apparatus draws.
pub fn evaluate_point(
    set: &KSSet,
    noise: &NoiseModel,
    target: &CalibrationTarget,
    seed: u64,
    realizations: u64,
) -> Result<GridPoint> {
    noise.validate()?;
    let run = PulseRun::new(0, DEFAULT_PULSES, (1..=set.rays().len()).collect());
    let n = realizations as f64;
    let mut eps = Vec::new();
    let mut fidelity: BTreeMap<StateName, f64> = BTreeMap::new();
    for k in 0..realizations {
        let app = Apparatus::realize(set, noise, derive_seed(seed, "calibrate/apparatus", k));
        eps.push(expected_epsilon(&app, set, &DEFAULT_INITIAL_RAYS));
        for state in StateName::ALL {
            let est = estimate_expected(set, &app, &state.ray(), &run)?;
            let ideal = profile(set, &state.ray()).to_f64();
            let f = bhattacharyya(&est.dense(), &ideal, set.basis_groups(), SimilarityMode::PerBasis)?.f;
            *fidelity.entry(state).or_default() += f / n;
        }
    }
    let epsilon = eps.iter().sum::<f64>() / n;
    let spread = (eps.iter().map(|e| (e - epsilon).powi(2)).sum::<f64>() / n).sqrt();
    let mut point = GridPoint {
        noise: *noise,
        epsilon,
        epsilon_spread: spread,
        fidelity,
        feasible: false,
    };
    point.feasible = target.accepts(&point);
    Ok(point)
}

/// Grid search for the noise model whose epsilon is closest to the target
/// among points with acceptable GHZ fidelity, followed by one simulated
/// exclusivity campaign at the chosen point.
pub fn calibrate(
    set: &KSSet,
    grid: &CalibrationGrid,
    target: &CalibrationTarget,
    seed: u64,
    realizations: u64,
    closed_loop_pulses: u64,
) -> Result<NoiseConfig> {
    if realizations == 0 {
        return Err(Error::Validation("at least one realization is required".into()));
    }
    let trace: Vec<GridPoint> = grid
        .points()
        .par_iter()
        .map(|noise| evaluate_point(set, noise, target, seed, realizations))
        .collect::<Result<_>>()?;
    let distance = |p: &GridPoint| (p.epsilon - target.epsilon).abs();
    let best = |pts: &mut dyn Iterator<Item = &GridPoint>| {
        pts.fold(None, |acc: Option<&GridPoint>, p| match acc {
            Some(a) if distance(a) <= distance(p) => Some(a),
            _ => Some(p),
        })
        .cloned()
    };
    let Some(chosen) = best(&mut trace.iter().filter(|p| p.feasible)) else {
        return Err(match best(&mut trace.iter()) {
            Some(p) => Error::CalibrationInfeasible {
                target: target.epsilon,
                lo: target.epsilon - target.tolerance,
                hi: target.epsilon + target.tolerance,
                nearest_epsilon: p.epsilon,
                nearest_fidelity: p.fidelity_ghz(),
            },
            None => Error::Validation("empty calibration grid".into()),
        });
    };
    let loop_seed = derive_seed(seed, "calibrate/closed-loop", 0);
    let report = run_exclusivity_campaign(
        set,
        &chosen.noise,
        &DEFAULT_INITIAL_RAYS,
        &PulseRun::new(loop_seed, closed_loop_pulses, vec![]),
    )?;
    Ok(NoiseConfig {
        noise: chosen.noise,
        calibration: Some(CalibrationRecord {
            seed,
            realizations,
            target: *target,
            grid: grid.clone(),
            chosen,
            closed_loop: ClosedLoop {
                seed: loop_seed,
                pulses_per_initial: closed_loop_pulses,
                epsilon: report.epsilon,
                epsilon_error: report.epsilon_error,
            },
            trace,
        }),
    })
}
