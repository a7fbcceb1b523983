//! Noncontextual (NCHV) bounds: maximum number of tests that can be
//! assigned 1 without two exclusive tests both giving 1, the KS colouring
//! search, and the epsilon-corrected limits used against noisy data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ksset::{
    build_graph, canonical_set, enumerate_octads, mermin_subset, Octad, OrthoGraph, N_RAYS,
};

/// The set of tests assigned result 1 (1-based labels, ascending); every
/// other test is assigned 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub ones: Vec<usize>,
}

impl Assignment {
    pub fn admissible(&self, g: &OrthoGraph) -> bool {
        g.is_independent(&self.ones)
    }

    pub fn value(&self, index: usize) -> u8 {
        u8::from(self.ones.contains(&index))
    }
}

fn mask_of(labels: &[usize]) -> u64 {
    labels.iter().fold(0, |m, &i| m | 1 << (i - 1))
}

fn labels_of(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize + 1);
        m &= m - 1;
    }
    out
}

/// Number of cliques in a greedy clique cover of `cand`; an upper bound on
/// any independent set inside it.
fn clique_cover_bound(g: &OrthoGraph, cand: u64) -> u32 {
    let mut rest = cand;
    let mut cliques = 0;
    while rest != 0 {
        cliques += 1;
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let mut common = rest & g.mask(v);
        while common != 0 {
            let u = common.trailing_zeros() as usize;
            rest &= !(1 << u);
            common &= g.mask(u);
        }
    }
    cliques
}

struct MisSearch<'a> {
    g: &'a OrthoGraph,
    best: u64,
    best_size: u32,
}

impl MisSearch<'_> {
    // Include-before-exclude in ascending vertex order reaches the
    // lexicographically smallest optimum first; later ties are pruned.
    fn branch(&mut self, chosen: u64, size: u32, cand: u64) {
        if cand == 0 {
            if size > self.best_size || self.best_size == 0 && size == 0 {
                self.best = chosen;
                self.best_size = size;
            }
            return;
        }
        if size + cand.count_ones() <= self.best_size
            || size + clique_cover_bound(self.g, cand) <= self.best_size
        {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let rest = cand & !(1 << v);
        self.branch(chosen | 1 << v, size + 1, rest & !self.g.mask(v));
        self.branch(chosen, size, rest);
    }
}

/// Exact maximum independent set on the subgraph induced by `subset`
/// (default: every vertex), with the lexicographically smallest optimal
/// witness.
pub fn max_ones(g: &OrthoGraph, subset: Option<&[usize]>) -> (usize, Assignment) {
    let cand = subset.map_or_else(|| g.all_mask(), mask_of);
    let mut search = MisSearch {
        g,
        best: 0,
        best_size: 0,
    };
    search.branch(0, 0, cand);
    (
        search.best_size as usize,
        Assignment {
            ones: labels_of(search.best),
        },
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ColoringReport {
    pub colorable: bool,
    pub octads: usize,
    /// Search-tree nodes visited before the answer was settled.
    pub nodes_explored: u64,
    pub witness: Option<Assignment>,
}

/// Looks for a 0/1 assignment with exactly one 1 in every octad and no two
/// exclusive tests both assigned 1.
pub fn ks_colorable(g: &OrthoGraph, octads: &[Octad]) -> ColoringReport {
    let masks: Vec<u64> = octads.iter().map(Octad::mask).collect();
    let mut nodes = 0u64;

    fn search(g: &OrthoGraph, masks: &[u64], chosen: u64, blocked: u64, nodes: &mut u64) -> Option<u64> {
        *nodes += 1;
        // most constrained open octad first
        let mut open: Option<u64> = None;
        for &m in masks {
            if m & chosen != 0 {
                continue;
            }
            let avail = m & !blocked;
            if avail == 0 {
                return None;
            }
            if open.is_none_or(|o| avail.count_ones() < o.count_ones()) {
                open = Some(avail);
            }
        }
        let Some(mut avail) = open else {
            return Some(chosen);
        };
        while avail != 0 {
            let v = avail.trailing_zeros() as usize;
            avail &= avail - 1;
            let found = search(g, masks, chosen | 1 << v, blocked | 1 << v | g.mask(v), nodes);
            if found.is_some() {
                return found;
            }
        }
        None
    }

    let found = search(g, &masks, 0, 0, &mut nodes);
    ColoringReport {
        colorable: found.is_some(),
        octads: octads.len(),
        nodes_explored: nodes,
        witness: found.map(|m| Assignment { ones: labels_of(m) }),
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            range: "[0, 1]",
        })
    }
}

/// S = kappa/2 + 2, rewriting the Mermin correlator sum as 16 probabilities.
pub fn mermin_kappa_to_s(kappa: f64) -> Result<f64> {
    if !(-4.0..=4.0).contains(&kappa) {
        return Err(Error::Domain {
            what: "kappa",
            value: kappa,
            range: "[-4, 4]",
        });
    }
    Ok(kappa / 2.0 + 2.0)
}

/// NCHV limit of Sigma when each of the 40 tests may fire falsely with
/// probability epsilon: 4(1 - eps) + 40 eps.
pub fn corrected_sigma_bound(epsilon: f64) -> Result<f64> {
    check_unit("epsilon", epsilon)?;
    Ok(4.0 * (1.0 - epsilon) + 40.0 * epsilon)
}

/// Same correction applied to the 16-test sum S: 3(1 - eps) + 16 eps.
pub fn corrected_s_bound(epsilon: f64) -> Result<f64> {
    check_unit("epsilon", epsilon)?;
    Ok(3.0 * (1.0 - epsilon) + 16.0 * epsilon)
}

/// Extrapolated quantum value of Sigma under the same false-positive
/// model, 5(1 - eps) + 40 eps. Not a derived limit; only reported on request.
pub fn corrected_sigma_quantum_extrapolation(epsilon: f64) -> Result<f64> {
    check_unit("epsilon", epsilon)?;
    Ok(5.0 * (1.0 - epsilon) + 40.0 * epsilon)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub sigma_nchv: usize,
    #[serde(rename = "S_nchv")]
    pub s_nchv: usize,
    pub ks_colorable: bool,
    pub epsilon: f64,
    pub sigma_corrected: f64,
    #[serde(rename = "S_corrected")]
    pub s_corrected: f64,
    pub witness: Assignment,
}

impl BoundReport {
    pub fn compute(epsilon: f64) -> Result<Self> {
        let set = canonical_set()?;
        let g = build_graph(&set);
        let (sigma_nchv, witness) = max_ones(&g, None);
        let (s_nchv, _) = max_ones(&g, Some(&mermin_subset()));
        let coloring = ks_colorable(&g, &enumerate_octads(&g));
        debug_assert_eq!(g.len(), N_RAYS);
        Ok(BoundReport {
            sigma_nchv,
            s_nchv,
            ks_colorable: coloring.colorable,
            epsilon,
            sigma_corrected: corrected_sigma_bound(epsilon)?,
            s_corrected: corrected_s_bound(epsilon)?,
            witness,
        })
    }
}
