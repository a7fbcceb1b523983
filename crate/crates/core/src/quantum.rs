//! Exact quantum predictions: the 40 probabilities of result 1, Sigma and S.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{overlap_prob, Rational, Ray};
use crate::ksset::{mermin_subset, KSSet, N_GROUPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateName {
    #[serde(rename = "GHZ")]
    Ghz,
    W,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "prod")]
    Prod,
}

impl StateName {
    pub const ALL: [StateName; 5] = [
        StateName::Ghz,
        StateName::W,
        StateName::Beta,
        StateName::Eta,
        StateName::Prod,
    ];

    /// Unnormalized amplitudes.
    pub fn ray(self) -> Ray {
        let e = match self {
            StateName::Ghz => [0, 1, 1, 0, 1, 0, 0, -1],
            StateName::W => [0, 1, 1, 0, 1, 0, 0, 0],
            StateName::Beta => [0, 0, 1, 1, -1, -1, 0, 0],
            StateName::Eta => [1, 1, 1, 1, 1, 1, 0, 0],
            StateName::Prod => [1, 0, 0, 0, 0, 0, 0, 0],
        };
        Ray::new(e).expect("nonzero state")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateName::Ghz => "GHZ",
            StateName::W => "W",
            StateName::Beta => "beta",
            StateName::Eta => "eta",
            StateName::Prod => "prod",
        }
    }
}

impl std::fmt::Display for StateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StateName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownState(s.to_string()))
    }
}

/// Exact probabilities of result 1 for all 40 tests on one state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbabilityProfile {
    pub values: Vec<Rational>,
    pub basis_groups: Vec<Vec<usize>>,
}

impl ProbabilityProfile {
    /// Probability for the 1-based test index.
    pub fn get(&self, index: usize) -> &Rational {
        &self.values[index - 1]
    }

    pub fn group_sums(&self) -> Vec<Rational> {
        self.basis_groups
            .iter()
            .map(|g| g.iter().map(|&i| self.get(i)).sum())
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(Rational::to_f64).collect()
    }

    /// `index,basis_group,num,den,decimal` rows; basis groups are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,basis_group,num,den,decimal\n");
        for (g, group) in self.basis_groups.iter().enumerate() {
            for &i in group {
                let p = self.get(i);
                out.push_str(&format!(
                    "{i},{},{},{},{:.6}\n",
                    g + 1,
                    p.numer(),
                    p.denom(),
                    p.to_f64()
                ));
            }
        }
        out
    }
}

pub fn profile(set: &KSSet, state: &Ray) -> ProbabilityProfile {
    ProbabilityProfile {
        values: set.rays().iter().map(|v| overlap_prob(state, v)).collect(),
        basis_groups: set.basis_groups().to_vec(),
    }
}

/// Sum of all 40 probabilities; 5 for every state.
pub fn sigma_value(set: &KSSet, state: &Ray) -> Rational {
    set.rays().iter().map(|v| overlap_prob(state, v)).sum()
}

/// Sum over the 16 Mermin tests.
pub fn s_value(set: &KSSet, state: &Ray) -> Rational {
    mermin_subset()
        .into_iter()
        .map(|i| overlap_prob(state, set.ray(i)))
        .sum()
}

pub fn expected_sigma() -> Rational {
    Rational::integer(N_GROUPS as i64)
}
