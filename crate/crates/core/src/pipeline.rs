//! End-to-end workflows behind the command-line tool. Every function that
//! writes a bundle also writes `manifest.json` with its inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bhattacharyya, estimate_probabilities, verdict, Estimate, EstimateSet, SimilarityMode,
    SimilarityReport, Verdict,
};
use crate::bounds::{corrected_sigma_bound, corrected_sigma_quantum_extrapolation};
use crate::error::{Error, Result};
use crate::exact::Ray;
use crate::ksset::{build_graph, canonical_set, enumerate_octads, regenerate, KSSet, N_RAYS};
use crate::pentagram::pentagram_unsat;
use crate::quantum::{profile, StateName};
use crate::simulator::rng::derive_seed;
use crate::simulator::{
    exclusivity_with, Apparatus, CountRecord, NoiseConfig, NoiseModel, Pool, PulseRun,
    DEFAULT_INITIAL_RAYS, DEFAULT_MU, DEFAULT_PULSES,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub inputs: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_manifest<T: Serialize>(dir: &Path, command: &str, inputs: &T, outputs: &[&str]) -> Result<()> {
    let manifest = Manifest {
        command: command.to_string(),
        version: VERSION.to_string(),
        inputs: serde_json::to_value(inputs)?,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_file(dir, "manifest.json", &to_json(&manifest)?)?;
    Ok(())
}

/// A named state or a comma-separated list of eight integers.
pub fn parse_state(text: &str) -> Result<Ray> {
    if text.contains(',') {
        let entries = text
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split(',')
            .map(|f| {
                f.trim().parse::<i64>().map_err(|_| Error::Parse {
                    row: 1,
                    msg: format!("entry {f:?} is not an integer"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ray::from_slice(&entries)
    } else {
        Ok(text.parse::<StateName>()?.ray())
    }
}

pub fn state_name(state: &Ray) -> Option<StateName> {
    StateName::ALL.into_iter().find(|s| s.ray().same_line(state))
}

/// Reads a ray table in either the JSON layout or the plain `N: (...)` layout.
pub fn load_set(path: &Path) -> Result<KSSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        KSSet::from_json(&text)
    } else {
        KSSet::from_table(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(out, "{mark} {:<14} {}", c.name, c.detail);
        }
        match self.first_failure() {
            Some(c) => {
                let _ = writeln!(out, "{} check failed", c.name);
            }
            None => out.push_str("all checks passed\n"),
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Alternative ray table; the built-in table when absent.
    pub data: Option<PathBuf>,
    /// Fault injection: delete this edge (1-based labels) before the graph checks.
    pub drop_edge: Option<(usize, usize)>,
}

/// Structural checks of the ray table. Parse and validation errors in a
/// supplied data file are returned as errors, not as failed checks.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let set = match &opts.data {
        Some(path) => load_set(path)?,
        None => canonical_set()?,
    };
    let mut checks = Vec::new();
    let regen = regenerate(&set)?;
    checks.push(Check {
        name: "regeneration",
        passed: regen.matched == N_RAYS,
        detail: format!("{}/{N_RAYS} rays matched", regen.matched),
    });

    let mut g = build_graph(&set);
    if let Some((i, j)) = opts.drop_edge {
        if !(1..=N_RAYS).contains(&i) || !(1..=N_RAYS).contains(&j) || !g.adjacent(i, j) {
            return Err(Error::Validation(format!("{i}-{j} is not an edge")));
        }
        g.remove_edge(i, j);
    }
    let bad: Vec<usize> = (1..=N_RAYS).filter(|&i| g.degree(i) != 23).collect();
    checks.push(Check {
        name: "degree",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "every ray has 23 orthogonal partners".into()
        } else {
            format!("rays {bad:?} do not have degree 23")
        },
    });
    let edges = g.edge_count();
    checks.push(Check {
        name: "edges",
        passed: edges == 460,
        detail: format!("{edges} edges (expected 460)"),
    });

    let octads = enumerate_octads(&g);
    let missing: Vec<usize> = set
        .basis_groups()
        .iter()
        .enumerate()
        .filter(|(_, grp)| !octads.iter().any(|o| grp.iter().all(|&i| o.contains(i))))
        .map(|(k, _)| k + 1)
        .collect();
    checks.push(Check {
        name: "octads",
        passed: octads.len() == 25 && missing.is_empty(),
        detail: if missing.is_empty() {
            format!("{} octads (expected 25); all basis groups present", octads.len())
        } else {
            format!("{} octads; basis groups {missing:?} missing", octads.len())
        },
    });

    let unsat = pentagram_unsat();
    checks.push(Check {
        name: "pentagram",
        passed: unsat.satisfying_count == 0 && unsat.max_lines_satisfiable == 4,
        detail: format!(
            "{}/{} assignments satisfy all lines; at most {} of 5",
            unsat.satisfying_count, unsat.assignments, unsat.max_lines_satisfiable
        ),
    });
    Ok(VerifyReport { checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub value: f64,
    pub error: f64,
}

const fn target(value: f64, error: f64) -> Target {
    Target { value, error }
}

pub const EPSILON_TARGET: Target = target(0.0140, 0.0012);

pub fn fidelity_target(state: StateName) -> Target {
    match state {
        StateName::Ghz => target(0.93, 0.03),
        StateName::W => target(0.97, 0.01),
        StateName::Prod => target(0.92, 0.02),
        StateName::Eta => target(0.98, 0.01),
        StateName::Beta => target(0.95, 0.02),
    }
}

pub fn s_target(state: StateName) -> Option<Target> {
    match state {
        StateName::Ghz => Some(target(3.98, 0.19)),
        StateName::W => Some(target(3.46, 0.1)),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaRow {
    pub state: StateName,
    pub sigma: Estimate,
    pub corrected_bound: f64,
    pub margin_sigmas: f64,
    pub violates_corrected: bool,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "F_target")]
    pub fidelity_target: Target,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SRow {
    pub state: StateName,
    #[serde(rename = "S")]
    pub s: Estimate,
    pub target: Option<Target>,
    pub corrected_bound: f64,
    pub margin_sigmas: f64,
    pub violates_corrected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: Estimate,
    pub target: Target,
    pub n_tests: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproduceSummary {
    pub seed: u64,
    pub n_pulses: u64,
    pub mu: f64,
    pub noise: NoiseModel,
    pub epsilon: EpsilonRow,
    pub sigma: Vec<SigmaRow>,
    #[serde(rename = "S")]
    pub s: Vec<SRow>,
}

impl ReproduceSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,state,estimate,error,target,target_error,corrected_bound,violates_corrected\n");
        let e = &self.epsilon;
        let _ = writeln!(
            out,
            "epsilon,,{:.6},{:.6},{},{},,",
            e.epsilon.value, e.epsilon.error, e.target.value, e.target.error
        );
        for r in &self.sigma {
            let _ = writeln!(
                out,
                "sigma,{},{:.6},{:.6},5,,{:.6},{}",
                r.state, r.sigma.value, r.sigma.error, r.corrected_bound, r.violates_corrected
            );
        }
        for r in &self.s {
            let (t, te) = r.target.map_or((String::new(), String::new()), |t| {
                (t.value.to_string(), t.error.to_string())
            });
            let _ = writeln!(
                out,
                "S,{},{:.6},{:.6},{t},{te},{:.6},{}",
                r.state, r.s.value, r.s.error, r.corrected_bound, r.violates_corrected
            );
        }
        for r in &self.sigma {
            let _ = writeln!(
                out,
                "F,{},{:.6},,{},{},,",
                r.state, r.fidelity, r.fidelity_target.value, r.fidelity_target.error
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproduceOptions {
    pub seed: u64,
    /// Pulses per KS run and per initial ray of the exclusivity campaign.
    pub n_pulses: u64,
    pub mu: f64,
}

impl ReproduceOptions {
    pub fn new(seed: u64) -> Self {
        ReproduceOptions {
            seed,
            n_pulses: DEFAULT_PULSES,
            mu: DEFAULT_MU,
        }
    }
}

pub struct Reproduction {
    pub summary: ReproduceSummary,
    pub records: Vec<(String, CountRecord)>,
    pub exclusivity_csv: String,
    pub fig3_csv: String,
    pub fig4_csv: String,
}

fn fig3_rows(out: &mut String, set: &KSSet, state: StateName, est: &EstimateSet) {
    let ideal = profile(set, &state.ray()).to_f64();
    for (g, group) in set.basis_groups().iter().enumerate() {
        for &i in group {
            let e = est.probabilities[&i];
            let _ = writeln!(
                out,
                "{state},{i},{},{:.6},{:.6},{:.6}",
                g + 1,
                e.value,
                e.error,
                ideal[i - 1]
            );
        }
    }
}

const FIG3_HEADER: &str = "state,index,basis_group,measured,error,ideal\n";
const FIG4_HEADER: &str = "state,quantity,estimate,error,nchv_ideal,nchv_corrected,quantum_ideal\n";

fn fig4_rows(out: &mut String, state: &str, v: &Verdict) {
    for q in [&v.sigma, &v.s].into_iter().flatten() {
        let _ = writeln!(
            out,
            "{state},{},{:.6},{:.6},{},{:.6},{}",
            q.quantity, q.estimate, q.error, q.nchv_ideal, q.nchv_corrected, q.quantum_ideal
        );
    }
}

/// Runs the exclusivity campaign, the five Sigma runs and the two S runs
/// on one apparatus realization. All randomness derives from `opts.seed`.
pub fn run_reproduction(set: &KSSet, noise: &NoiseModel, opts: &ReproduceOptions) -> Result<Reproduction> {
    noise.validate()?;
    let seed = opts.seed;
    let app = Apparatus::realize(set, noise, derive_seed(seed, "apparatus", 0));
    let run = |label: &str, k: u64, pool: Vec<usize>| PulseRun {
        seed: derive_seed(seed, label, k),
        n_pulses: opts.n_pulses,
        mu: opts.mu,
        projector_pool: pool,
    };

    let excl = exclusivity_with(&app, set, &DEFAULT_INITIAL_RAYS, &run("exclusivity", 0, vec![]))?;
    let eps = excl.epsilon.max(0.0);
    let mut records = Vec::new();
    let mut sigma = Vec::new();
    let mut fig3 = String::from(FIG3_HEADER);
    let mut fig4 = String::from(FIG4_HEADER);
    // Preparation slots above 40 keep these runs apart from the campaign's.
    for (k, state) in StateName::ALL.into_iter().enumerate() {
        let k = k as u64;
        let record = app.run(set, &state.ray(), 100 + k, &run("sigma", k, Pool::Ks40.indices()))?;
        let est = estimate_probabilities(set, &record)?;
        let ideal = profile(set, &state.ray()).to_f64();
        let f = bhattacharyya(&est.dense(), &ideal, set.basis_groups(), SimilarityMode::PerBasis)?;
        let v = verdict(&est, eps)?;
        let q = v.sigma.as_ref().expect("all 40 tests measured");
        sigma.push(SigmaRow {
            state,
            sigma: est.sigma.expect("all 40 tests measured"),
            corrected_bound: q.nchv_corrected,
            margin_sigmas: q.margin_sigmas,
            violates_corrected: q.violates_corrected,
            fidelity: f.f,
            fidelity_target: fidelity_target(state),
        });
        fig3_rows(&mut fig3, set, state, &est);
        fig4_rows(&mut fig4, state.as_str(), &Verdict { s: None, ..v });
        records.push((format!("sigma_{state}"), record));
    }
    let mut s = Vec::new();
    for (k, state) in [StateName::Ghz, StateName::W].into_iter().enumerate() {
        let k = k as u64;
        let record = app.run(set, &state.ray(), 200 + k, &run("mermin", k, Pool::Mermin16.indices()))?;
        let est = estimate_probabilities(set, &record)?;
        let v = verdict(&est, eps)?;
        let q = v.s.as_ref().expect("all 16 Mermin tests measured");
        s.push(SRow {
            state,
            s: est.s.expect("all 16 Mermin tests measured"),
            target: s_target(state),
            corrected_bound: q.nchv_corrected,
            margin_sigmas: q.margin_sigmas,
            violates_corrected: q.violates_corrected,
        });
        fig4_rows(&mut fig4, state.as_str(), &v);
        records.push((format!("S_{state}"), record));
    }
    Ok(Reproduction {
        summary: ReproduceSummary {
            seed,
            n_pulses: opts.n_pulses,
            mu: opts.mu,
            noise: *noise,
            epsilon: EpsilonRow {
                epsilon: Estimate {
                    value: excl.epsilon,
                    error: excl.epsilon_error,
                },
                target: EPSILON_TARGET,
                n_tests: excl.n_tests,
            },
            sigma,
            s,
        },
        records,
        exclusivity_csv: excl.to_csv(),
        fig3_csv: fig3,
        fig4_csv: fig4,
    })
}

/// `reproduce`: loads the calibrated noise config and writes the bundle.
pub fn reproduce(noise_path: &Path, opts: &ReproduceOptions, out: &Path) -> Result<ReproduceSummary> {
    let config = NoiseConfig::load(noise_path)?;
    let set = canonical_set()?;
    let r = run_reproduction(&set, &config.noise, opts)?;
    let mut outputs = vec![
        "summary.json".to_string(),
        "summary.csv".to_string(),
        "fig3.csv".to_string(),
        "fig4.csv".to_string(),
        "exclusivity.csv".to_string(),
    ];
    write_file(out, "summary.json", &to_json(&r.summary)?)?;
    write_file(out, "summary.csv", &r.summary.to_csv())?;
    write_file(out, "fig3.csv", &r.fig3_csv)?;
    write_file(out, "fig4.csv", &r.fig4_csv)?;
    write_file(out, "exclusivity.csv", &r.exclusivity_csv)?;
    for (name, record) in &r.records {
        let file = format!("records/{name}.json");
        write_file(out, &file, &to_json(record)?)?;
        outputs.push(file);
    }
    #[derive(Serialize)]
    struct Inputs<'a> {
        #[serde(flatten)]
        opts: &'a ReproduceOptions,
        noise: NoiseModel,
    }
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_manifest(
        out,
        "reproduce",
        &Inputs {
            opts,
            noise: config.noise,
        },
        &outputs,
    )?;
    Ok(r.summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub state: Ray,
    pub state_name: Option<StateName>,
    pub epsilon: f64,
    pub estimates: EstimateSet,
    /// Similarity to the exact profile of the prepared state; only the
    /// measured tests take part.
    pub similarity: Option<SimilarityReport>,
    pub verdict: Verdict,
    /// Present only when requested explicitly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum_corrected_sigma: Option<f64>,
}

pub struct Analysis {
    pub report: AnalysisReport,
    pub fig3_csv: String,
    pub fig4_csv: String,
}

/// Reads `epsilon` from any JSON object carrying that field, such as an
/// exclusivity report.
pub fn read_epsilon(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let eps = value
        .get("epsilon")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Validation(format!("{}: no numeric \"epsilon\" field", path.display())))?;
    corrected_sigma_bound(eps)?;
    Ok(eps)
}

pub fn analyze_record(
    set: &KSSet,
    record: &CountRecord,
    epsilon: f64,
    mode: SimilarityMode,
    quantum_extrapolation: bool,
) -> Result<Analysis> {
    let estimates = estimate_probabilities(set, record)?;
    let ideal = profile(set, &record.state).to_f64();
    let measured_groups: Vec<Vec<usize>> = set
        .basis_groups()
        .iter()
        .map(|g| g.iter().copied().filter(|i| estimates.probabilities.contains_key(i)).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    let similarity = bhattacharyya(&estimates.dense(), &ideal, &measured_groups, mode).ok();
    let v = verdict(&estimates, epsilon)?;
    let name = state_name(&record.state);
    let label = name.map_or_else(|| record.state.to_string().replace(',', " "), |s| s.to_string());
    let mut fig3 = String::from("index,basis_group,measured,error,ideal\n");
    for (g, group) in set.basis_groups().iter().enumerate() {
        for &i in group {
            if let Some(e) = estimates.probabilities.get(&i) {
                let _ = writeln!(fig3, "{i},{},{:.6},{:.6},{:.6}", g + 1, e.value, e.error, ideal[i - 1]);
            }
        }
    }
    let mut fig4 = String::from(FIG4_HEADER);
    fig4_rows(&mut fig4, &label, &v);
    let quantum_corrected_sigma = if quantum_extrapolation {
        Some(corrected_sigma_quantum_extrapolation(epsilon)?)
    } else {
        None
    };
    Ok(Analysis {
        report: AnalysisReport {
            state: record.state,
            state_name: name,
            epsilon,
            estimates,
            similarity,
            verdict: v,
            quantum_corrected_sigma,
        },
        fig3_csv: fig3,
        fig4_csv: fig4,
    })
}
