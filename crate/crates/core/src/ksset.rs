//! The 40-ray Kernaghan-Peres set, its orthogonality graph and its complete
//! orthogonal bases (octads).
//!
//! Ray indices in the public API are 1-based labels in table order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{dot, overlap_prob, Ray, DIM};
use crate::pentagram::{common_eigenrays, pentagram_contexts};

pub const N_RAYS: usize = 40;
pub const N_GROUPS: usize = 5;

#[rustfmt::skip]
const TABLE: [[i32; DIM]; N_RAYS] = [
    [0, 1, 1, 0, 1, 0, 0, -1], [1, 0, 0, 1, 0, 1, -1, 0], [1, 0, 0, 1, 0, -1, 1, 0], [0, 1, 1, 0, -1, 0, 0, 1],
    [1, 0, 0, -1, 0, 1, 1, 0], [0, 1, -1, 0, 1, 0, 0, 1], [0, -1, 1, 0, 1, 0, 0, 1], [-1, 0, 0, 1, 0, 1, 1, 0],
    [1, 0, 0, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0], [0, 0, 0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1, 0, 1], [1, 0, -1, 0, 1, 0, -1, 0], [0, 1, 0, -1, 0, 1, 0, -1],
    [1, 0, 1, 0, -1, 0, -1, 0], [0, 1, 0, 1, 0, -1, 0, -1], [1, 0, -1, 0, -1, 0, 1, 0], [0, 1, 0, -1, 0, -1, 0, 1],
    [0, 0, 1, -1, 0, 0, -1, 1], [0, 0, 1, 1, 0, 0, -1, -1], [1, -1, 0, 0, -1, 1, 0, 0], [1, 1, 0, 0, -1, -1, 0, 0],
    [0, 0, 1, -1, 0, 0, 1, -1], [0, 0, 1, 1, 0, 0, 1, 1], [1, -1, 0, 0, 1, -1, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, -1, -1, 1], [0, 0, 0, 0, 1, 1, -1, -1], [0, 0, 0, 0, 1, -1, 1, -1], [0, 0, 0, 0, 1, 1, 1, 1],
    // Printed as "(1,-1-1,1,0,0,0,0)"; the {z1, x2, x3, zxx} line generates this ray.
    [1, -1, -1, 1, 0, 0, 0, 0], [1, 1, -1, -1, 0, 0, 0, 0], [1, -1, 1, -1, 0, 0, 0, 0], [1, 1, 1, 1, 0, 0, 0, 0],
];

const MERMIN: [usize; 16] = [10, 11, 13, 16, 17, 20, 22, 23, 26, 27, 29, 32, 34, 35, 37, 40];

/// The 16 tests entering the Mermin-type sum S, four from each of the last
/// four bases.
pub fn mermin_subset() -> Vec<usize> {
    MERMIN.to_vec()
}

fn default_groups() -> Vec<Vec<usize>> {
    (0..N_GROUPS)
        .map(|g| (g * 8 + 1..=g * 8 + 8).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSSet {
    rays: Vec<Ray>,
    basis_groups: Vec<Vec<usize>>,
}

impl KSSet {
    /// Builds and validates a set: 40 rays, 5 groups partitioning 1..=40,
    /// each group pairwise orthogonal.
    pub fn new(rays: Vec<Ray>, basis_groups: Vec<Vec<usize>>) -> Result<Self> {
        if rays.len() != N_RAYS {
            return Err(Error::Validation(format!(
                "expected {N_RAYS} rays, found {}",
                rays.len()
            )));
        }
        let rays: Vec<Ray> = rays
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.with_label(i as u8 + 1))
            .collect();
        let set = KSSet { rays, basis_groups };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        if self.basis_groups.len() != N_GROUPS {
            return Err(Error::Validation(format!(
                "expected {N_GROUPS} basis groups, found {}",
                self.basis_groups.len()
            )));
        }
        let mut seen = [0u8; N_RAYS + 1];
        for (g, group) in self.basis_groups.iter().enumerate() {
            if group.len() != DIM {
                return Err(Error::Validation(format!(
                    "basis group {} has {} rays",
                    g + 1,
                    group.len()
                )));
            }
            for &i in group {
                if !(1..=N_RAYS).contains(&i) {
                    return Err(Error::Validation(format!("ray index {i} out of range")));
                }
                seen[i] += 1;
            }
            for (k, &i) in group.iter().enumerate() {
                for &j in &group[k + 1..] {
                    if dot(self.ray(i), self.ray(j)) != 0 {
                        return Err(Error::Validation(format!(
                            "basis group {}: rays {i} and {j} are not orthogonal",
                            g + 1
                        )));
                    }
                }
            }
        }
        if let Some(i) = (1..=N_RAYS).find(|&i| seen[i] != 1) {
            return Err(Error::Validation(format!(
                "ray {i} belongs to {} basis groups",
                seen[i]
            )));
        }
        Ok(())
    }

    pub fn ray(&self, index: usize) -> &Ray {
        &self.rays[index - 1]
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn basis_groups(&self) -> &[Vec<usize>] {
        &self.basis_groups
    }

    /// 0-based basis group of a 1-based ray index.
    pub fn group_of(&self, index: usize) -> usize {
        self.basis_groups
            .iter()
            .position(|g| g.contains(&index))
            .expect("validated partition")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            rays: Vec<Vec<i64>>,
            basis_groups: Option<Vec<Vec<usize>>>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let rays = raw
            .rays
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ray::from_slice(r).map_err(|e| Error::Parse {
                    row: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        KSSet::new(rays, raw.basis_groups.unwrap_or_else(default_groups))
    }

    /// Parses the plain table layout, one ray per line:
    ///
    /// ```text
    /// 1: (0,1,1,0,1,0,0,-1)
    /// ```
    ///
    /// Blank lines and lines starting with `#` are skipped. Rows must be
    /// numbered 1..=40 in order; groups are consecutive runs of eight.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut rays = Vec::with_capacity(N_RAYS);
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let expected = rays.len() + 1;
            let (label, body) = line.split_once(':').ok_or_else(|| Error::Parse {
                row: expected,
                msg: format!("missing ':' in {line:?}"),
            })?;
            let row: usize = label.trim().parse().map_err(|_| Error::Parse {
                row: expected,
                msg: format!("bad row label {label:?}"),
            })?;
            if row != expected {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected row {expected}"),
                });
            }
            let body = body
                .trim()
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .ok_or_else(|| Error::Parse {
                    row,
                    msg: format!("expected a parenthesised vector, found {:?}", body.trim()),
                })?;
            let fields: Vec<&str> = body.split(',').map(str::trim).collect();
            if fields.len() != DIM {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected {DIM} entries, found {}", fields.len()),
                });
            }
            let entries = fields
                .iter()
                .map(|f| {
                    f.parse::<i64>().map_err(|_| Error::Parse {
                        row,
                        msg: format!("entry {f:?} is not an integer"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let ray = Ray::from_slice(&entries).map_err(|e| Error::Parse {
                row,
                msg: e.to_string(),
            })?;
            rays.push(ray);
        }
        KSSet::new(rays, default_groups())
    }

    pub fn to_table(&self) -> String {
        self.rays
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{}: {r}\n", i + 1))
            .collect()
    }
}

/// The hard-coded 40-ray table, validated against its own basis structure
/// and against the pentagram construction.
pub fn canonical_set() -> Result<KSSet> {
    let rays = TABLE.iter().map(|&e| Ray::new(e)).collect::<Result<_>>()?;
    let set = KSSet::new(rays, default_groups())?;
    let regen = regenerate(&set)?;
    if regen.matched != N_RAYS {
        return Err(Error::Validation(format!(
            "only {}/{N_RAYS} table rays match the pentagram eigenrays",
            regen.matched
        )));
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RayMatch {
    pub index: usize,
    pub table: Ray,
    pub generated: Option<Ray>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Regeneration {
    pub matched: usize,
    pub rays: Vec<RayMatch>,
}

/// Regenerates every basis group from the corresponding pentagram line and
/// pairs each table ray with the generated ray spanning the same line.
pub fn regenerate(set: &KSSet) -> Result<Regeneration> {
    let contexts = pentagram_contexts();
    let mut rays = Vec::with_capacity(N_RAYS);
    for (group, context) in set.basis_groups().iter().zip(&contexts) {
        let mut generated: Vec<Ray> = common_eigenrays(context)?
            .rays
            .into_iter()
            .map(|e| e.ray)
            .collect();
        for &index in group {
            let table = *set.ray(index);
            let hit = generated
                .iter()
                .position(|g| overlap_prob(g, &table) == crate::exact::Rational::one());
            let generated = hit.map(|k| generated.swap_remove(k));
            rays.push(RayMatch {
                index,
                table,
                generated,
            });
        }
    }
    rays.sort_by_key(|m| m.index);
    let matched = rays
        .iter()
        .filter(|m| m.generated.is_some_and(|g| g.same_line(&m.table)))
        .count();
    Ok(Regeneration { matched, rays })
}

/// Orthogonality (exclusivity) graph on at most 64 rays, stored as bitmasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrthoGraph {
    adjacency: Vec<u64>,
}

impl OrthoGraph {
    pub fn from_rays(rays: &[Ray]) -> Self {
        assert!(rays.len() <= 64, "bitmask graph holds at most 64 vertices");
        let adjacency = rays
            .iter()
            .enumerate()
            .map(|(i, a)| {
                rays.iter()
                    .enumerate()
                    .filter(|&(j, b)| i != j && dot(a, b) == 0)
                    .fold(0u64, |m, (j, _)| m | 1 << j)
            })
            .collect();
        OrthoGraph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Neighbour mask of the 0-based vertex `v`.
    pub fn mask(&self, v: usize) -> u64 {
        self.adjacency[v]
    }

    pub fn all_mask(&self) -> u64 {
        if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        }
    }

    /// Adjacency for 1-based labels.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i - 1] >> (j - 1) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.adjacency[i - 1].count_ones()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .map(|m| m.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adjacency[i - 1] &= !(1 << (j - 1));
        self.adjacency[j - 1] &= !(1 << (i - 1));
    }

    /// True iff no two of the 1-based labels are adjacent.
    pub fn is_independent(&self, labels: &[usize]) -> bool {
        let mask = labels.iter().fold(0u64, |m, &i| m | 1 << (i - 1));
        labels
            .iter()
            .all(|&i| self.adjacency[i - 1] & mask == 0)
    }

    pub fn is_clique(&self, labels: &[usize]) -> bool {
        labels.iter().enumerate().all(|(k, &i)| {
            labels[k + 1..].iter().all(|&j| self.adjacent(i, j))
        })
    }
}

pub fn build_graph(set: &KSSet) -> OrthoGraph {
    OrthoGraph::from_rays(set.rays())
}

/// Eight mutually orthogonal rays (1-based labels, ascending).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Octad(pub [usize; DIM]);

impl Octad {
    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1 << (i - 1))
    }
}

impl fmt::Display for Octad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// All 8-cliques of the graph in lexicographic order.
pub fn enumerate_octads(g: &OrthoGraph) -> Vec<Octad> {
    fn extend(g: &OrthoGraph, clique: &mut Vec<usize>, cand: u64, out: &mut Vec<Octad>) {
        if clique.len() == DIM {
            let mut labels = [0; DIM];
            for (l, &v) in labels.iter_mut().zip(clique.iter()) {
                *l = v + 1;
            }
            out.push(Octad(labels));
            return;
        }
        let mut rest = cand;
        while rest != 0 {
            if clique.len() + (rest.count_ones() as usize) < DIM {
                return;
            }
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            clique.push(v);
            extend(g, clique, rest & g.mask(v), out);
            clique.pop();
        }
    }
    let mut out = Vec::new();
    extend(g, &mut Vec::with_capacity(DIM), g.all_mask(), &mut out);
    out
}

pub fn octads_json(octads: &[Octad]) -> Result<String> {
    Ok(serde_json::to_string_pretty(octads)?)
}
