//! Mermin's pentagram: ten three-qubit observables built from `I`, `X` and
//! `Z`, arranged in five lines of four mutually commuting words.
//!
//! The common eigenvectors of each line are the 40 rays of the
//! Kernaghan-Peres set. They are extracted here from exact integer
//! projectors, so the hard-coded table in [`crate::ksset`] can be checked
//! against an independent construction.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{Ray, DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    fn matrix(self) -> [[i64; 2]; 2] {
        match self {
            Pauli::I => [[1, 0], [0, 1]],
            Pauli::X => [[0, 1], [1, 0]],
            Pauli::Z => [[1, 0], [0, -1]],
        }
    }

    fn anticommutes(self, other: Pauli) -> bool {
        matches!((self, other), (Pauli::X, Pauli::Z) | (Pauli::Z, Pauli::X))
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of three single-qubit factors; qubit 1 is the most
/// significant bit of the basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord(pub [Pauli; 3]);

impl PauliWord {
    pub fn matrix(&self) -> IntMatrix8 {
        pauli_matrix(self)
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 3 {
            return Err(Error::Validation(format!(
                "Pauli word {s:?} must have exactly 3 factors"
            )));
        }
        let mut out = [Pauli::I; 3];
        for (o, c) in out.iter_mut().zip(chars) {
            *o = match c.to_ascii_uppercase() {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Z' => Pauli::Z,
                other => {
                    return Err(Error::Validation(format!(
                        "Pauli word {s:?}: factor {other:?} is not one of I, X, Z"
                    )))
                }
            };
        }
        Ok(PauliWord(out))
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

impl Serialize for PauliWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Dense 8x8 integer matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntMatrix8(pub [[i64; DIM]; DIM]);

impl IntMatrix8 {
    pub fn identity() -> Self {
        let mut m = [[0; DIM]; DIM];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1;
        }
        IntMatrix8(m)
    }

    pub fn zero() -> Self {
        IntMatrix8([[0; DIM]; DIM])
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0; DIM]; DIM];
        for (i, row) in self.0.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t[j][i] = v;
            }
        }
        IntMatrix8(t)
    }

    pub fn scale(&self, k: i64) -> Self {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|v| *v *= k);
        IntMatrix8(m)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.0;
        for (row, orow) in m.iter_mut().zip(&other.0) {
            for (v, o) in row.iter_mut().zip(orow) {
                *v += o;
            }
        }
        IntMatrix8(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&v| v == 0)
    }

    pub fn column(&self, j: usize) -> [i64; DIM] {
        let mut c = [0; DIM];
        for (i, row) in self.0.iter().enumerate() {
            c[i] = row[j];
        }
        c
    }

    /// Exact rank by fraction-free (Bareiss) elimination.
    pub fn rank(&self) -> usize {
        let mut a: Vec<[i128; DIM]> = self
            .0
            .iter()
            .map(|row| row.map(i128::from))
            .collect();
        let mut rank = 0;
        let mut prev = 1i128;
        for col in 0..DIM {
            let Some(pivot) = (rank..DIM).find(|&r| a[r][col] != 0) else {
                continue;
            };
            a.swap(rank, pivot);
            for r in rank + 1..DIM {
                for c in col + 1..DIM {
                    a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
                }
                a[r][col] = 0;
            }
            prev = a[rank][col];
            rank += 1;
        }
        rank
    }
}

impl Mul for &IntMatrix8 {
    type Output = IntMatrix8;

    fn mul(self, rhs: &IntMatrix8) -> IntMatrix8 {
        let mut out = [[0; DIM]; DIM];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..DIM).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        IntMatrix8(out)
    }
}

pub fn pauli_matrix(w: &PauliWord) -> IntMatrix8 {
    let [a, b, c] = w.0.map(Pauli::matrix);
    let mut m = [[0; DIM]; DIM];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i >> 2][j >> 2] * b[(i >> 1) & 1][(j >> 1) & 1] * c[i & 1][j & 1];
        }
    }
    IntMatrix8(m)
}

/// Two Pauli words commute iff they anticommute on an even number of qubits.
pub fn commutes(w1: &PauliWord, w2: &PauliWord) -> bool {
    w1.0
        .iter()
        .zip(&w2.0)
        .filter(|(a, b)| a.anticommutes(**b))
        .count()
        % 2
        == 0
}

/// A line of the pentagram: four pairwise commuting words whose product is
/// `product_sign` times the identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub words: [PauliWord; 4],
    pub product_sign: i8,
}

impl Context {
    /// Validates commutation and computes the product sign from matrices.
    pub fn new(words: [PauliWord; 4]) -> Result<Self> {
        for (i, a) in words.iter().enumerate() {
            for b in &words[i + 1..] {
                if !commutes(a, b) {
                    return Err(Error::Validation(format!("{a} and {b} do not commute")));
                }
            }
        }
        let product = words
            .iter()
            .fold(IntMatrix8::identity(), |acc, w| &acc * &w.matrix());
        let product_sign = if product == IntMatrix8::identity() {
            1
        } else if product == IntMatrix8::identity().scale(-1) {
            -1
        } else {
            return Err(Error::Validation(format!(
                "product of {} {} {} {} is not a multiple of the identity",
                words[0], words[1], words[2], words[3]
            )));
        };
        Ok(Context {
            words,
            product_sign,
        })
    }

    fn parse(words: [&str; 4]) -> Self {
        let words = words.map(|w| w.parse().expect("static word"));
        Context::new(words).expect("static pentagram line")
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}, {}, {}, {}}} ({:+})",
            self.words[0], self.words[1], self.words[2], self.words[3], self.product_sign
        )
    }
}

/// The five pentagram lines, in the column order of the ray table.
pub fn pentagram_contexts() -> [Context; 5] {
    [
        Context::parse(["ZXX", "XXZ", "XZX", "ZZZ"]),
        Context::parse(["ZII", "IZI", "IIZ", "ZZZ"]),
        Context::parse(["XII", "IXI", "IIZ", "XXZ"]),
        Context::parse(["XII", "IZI", "IIX", "XZX"]),
        Context::parse(["ZII", "IXI", "IIX", "ZXX"]),
    ]
}

/// The ten distinct words of the pentagram in order of first appearance.
pub fn pentagram_words() -> Vec<PauliWord> {
    let mut words = Vec::new();
    for c in pentagram_contexts() {
        for w in c.words {
            if !words.contains(&w) {
                words.push(w);
            }
        }
    }
    words
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eigenray {
    pub ray: Ray,
    pub signs: [i8; 4],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eigenbasis {
    pub rays: Vec<Eigenray>,
    /// Sign patterns whose product disagrees with the context sign; their
    /// projector is exactly zero.
    pub empty_patterns: Vec<[i8; 4]>,
}

/// 16 times the projector onto the joint eigenspace with eigenvalues `signs`.
pub fn scaled_projector(c: &Context, signs: [i8; 4]) -> IntMatrix8 {
    c.words
        .iter()
        .zip(signs)
        .fold(IntMatrix8::identity(), |acc, (w, s)| {
            let factor = IntMatrix8::identity().add(&w.matrix().scale(i64::from(s)));
            &acc * &factor
        })
}

fn sign_patterns() -> impl Iterator<Item = [i8; 4]> {
    (0u8..16).map(|bits| {
        let mut s = [1i8; 4];
        for (k, v) in s.iter_mut().enumerate() {
            if bits >> (3 - k) & 1 == 1 {
                *v = -1;
            }
        }
        s
    })
}

/// Common eigenrays of a context, one per consistent sign pattern, in
/// canonical form.
pub fn common_eigenrays(c: &Context) -> Result<Eigenbasis> {
    let mut rays = Vec::with_capacity(DIM);
    let mut empty_patterns = Vec::new();
    for signs in sign_patterns() {
        let p = scaled_projector(c, signs);
        let consistent = signs.iter().map(|&s| i64::from(s)).product::<i64>()
            == i64::from(c.product_sign);
        if !consistent {
            if !p.is_zero() {
                return Err(Error::Validation(format!(
                    "{c}: inconsistent pattern {signs:?} has a nonzero projector"
                )));
            }
            empty_patterns.push(signs);
            continue;
        }
        let rank = p.rank();
        if rank != 1 {
            return Err(Error::Validation(format!(
                "{c}: projector for {signs:?} has rank {rank}"
            )));
        }
        let col = (0..DIM)
            .map(|j| p.column(j))
            .find(|col| col.iter().any(|&v| v != 0))
            .expect("rank-1 matrix has a nonzero column");
        rays.push(Eigenray {
            ray: Ray::from_slice(&col)?.canonical(),
            signs,
        });
    }
    Ok(Eigenbasis {
        rays,
        empty_patterns,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnsatReport {
    pub assignments: u32,
    pub satisfying_count: u32,
    pub max_lines_satisfiable: u32,
}

fn lines_satisfied(bits: u32, lines: &[([usize; 4], i8)]) -> u32 {
    let value = |k: usize| if bits >> k & 1 == 1 { -1i8 } else { 1 };
    lines
        .iter()
        .filter(|(idx, sign)| idx.iter().map(|&k| value(k)).product::<i8>() == *sign)
        .count() as u32
}

fn indexed_lines() -> Vec<([usize; 4], i8)> {
    let words = pentagram_words();
    pentagram_contexts()
        .iter()
        .map(|c| {
            let idx = c
                .words
                .map(|w| words.iter().position(|x| *x == w).expect("word listed"));
            (idx, c.product_sign)
        })
        .collect()
}

/// Tries every +-1 assignment to the ten observables against the five line
/// product constraints.
pub fn pentagram_unsat() -> UnsatReport {
    let lines = indexed_lines();
    let n = pentagram_words().len() as u32;
    let (satisfying_count, max_lines_satisfiable) = (0u32..1 << n)
        .into_par_iter()
        .map(|bits| {
            let k = lines_satisfied(bits, &lines);
            (u32::from(k == lines.len() as u32), k)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    UnsatReport {
        assignments: 1 << n,
        satisfying_count,
        max_lines_satisfiable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    /// Kronecker product computed independently from `pauli_matrix`.
    fn kron(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let (n, m) = (a.len(), b.len());
        let mut out = vec![vec![0; n * m]; n * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..m {
                    for l in 0..m {
                        out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn kron_oracle(word: &str) -> Vec<Vec<i64>> {
        word.chars()
            .map(|c| match c {
                'I' => vec![vec![1, 0], vec![0, 1]],
                'X' => vec![vec![0, 1], vec![1, 0]],
                _ => vec![vec![1, 0], vec![0, -1]],
            })
            .reduce(|a, b| kron(&a, &b))
            .unwrap()
    }

    #[test]
    fn matrices_match_kronecker_oracle() {
        for word in pentagram_words() {
            let m = word.matrix();
            let oracle = kron_oracle(&word.to_string());
            for (i, row) in oracle.iter().enumerate() {
                assert_eq!(&m.0[i].to_vec(), row, "{word} row {i}");
            }
        }
        assert_eq!(w("III").matrix(), IntMatrix8::identity());
        let z1 = w("ZII").matrix();
        for i in 0..8 {
            assert_eq!(z1.0[i][i], if i < 4 { 1 } else { -1 });
        }
        let xxx = w("XXX").matrix();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(xxx.0[i][j], i64::from(i + j == 7));
            }
        }
    }

    #[test]
    fn words_are_symmetric_involutions() {
        for word in pentagram_words() {
            let m = word.matrix();
            assert_eq!(&m * &m, IntMatrix8::identity());
            assert_eq!(m.transpose(), m);
        }
    }

    #[test]
    fn commutation_matches_matrix_commutator() {
        assert!(commutes(&w("ZII"), &w("IZI")));
        assert!(!commutes(&w("ZII"), &w("XII")));
        assert!(commutes(&w("ZXX"), &w("XXZ")));
        let words = pentagram_words();
        for a in &words {
            for b in &words {
                let (ma, mb) = (a.matrix(), b.matrix());
                assert_eq!(commutes(a, b), &ma * &mb == &mb * &ma, "{a} {b}");
            }
        }
    }

    #[test]
    fn pentagram_structure() {
        let contexts = pentagram_contexts();
        let negative: Vec<_> = contexts.iter().filter(|c| c.product_sign == -1).collect();
        assert_eq!(negative.len(), 1);
        assert_eq!(negative[0].words, ["ZXX", "XXZ", "XZX", "ZZZ"].map(w));
        assert_eq!(contexts[1].words, ["ZII", "IZI", "IIZ", "ZZZ"].map(w));
        assert_eq!(contexts[1].product_sign, 1);
        let words = pentagram_words();
        assert_eq!(words.len(), 10);
        for word in &words {
            let n = contexts.iter().filter(|c| c.words.contains(word)).count();
            assert_eq!(n, 2, "{word}");
        }
    }

    #[test]
    fn context_rejects_noncommuting_lines() {
        // The column header "x1, z2, z3, xxz" read literally.
        let err = Context::new(["XII", "IZI", "IIZ", "XXZ"].map(w)).unwrap_err();
        assert!(err.to_string().contains("do not commute"));
    }

    #[test]
    fn computational_basis_from_z_line() {
        let basis = common_eigenrays(&pentagram_contexts()[1]).unwrap();
        let mut rays: Vec<_> = basis.rays.iter().map(|e| *e.ray.entries()).collect();
        rays.sort();
        let mut expected: Vec<[i32; 8]> = (0..8)
            .map(|i| {
                let mut e = [0; 8];
                e[i] = 1;
                e
            })
            .collect();
        expected.sort();
        assert_eq!(rays, expected);
        assert_eq!(basis.empty_patterns.len(), 8);
    }

    #[test]
    fn empty_patterns_have_zero_projector() {
        for c in pentagram_contexts() {
            for signs in sign_patterns() {
                let prod: i8 = signs.iter().product();
                let p = scaled_projector(&c, signs);
                assert_eq!(p.is_zero(), prod != c.product_sign, "{c} {signs:?}");
            }
        }
    }

    #[test]
    fn eigenrays_are_orthogonal_eigenvectors() {
        for c in pentagram_contexts() {
            let basis = common_eigenrays(&c).unwrap();
            assert_eq!(basis.rays.len(), 8);
            for (i, a) in basis.rays.iter().enumerate() {
                for (word, &s) in c.words.iter().zip(&a.signs) {
                    let m = word.matrix();
                    for (r, row) in m.0.iter().enumerate() {
                        let lhs: i64 = row
                            .iter()
                            .zip(a.ray.entries())
                            .map(|(x, &y)| x * i64::from(y))
                            .sum();
                        assert_eq!(lhs, i64::from(s) * i64::from(a.ray.entries()[r]));
                    }
                }
                for b in &basis.rays[i + 1..] {
                    assert_eq!(crate::exact::dot(&a.ray, &b.ray), 0);
                }
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(IntMatrix8::identity().rank(), 8);
        assert_eq!(IntMatrix8::zero().rank(), 0);
        let mut m = IntMatrix8::zero();
        m.0[0] = [1, 2, 3, 4, 5, 6, 7, 8];
        m.0[3] = [2, 4, 6, 8, 10, 12, 14, 16];
        m.0[5] = [0, 0, 0, 0, 0, 0, 0, 1];
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn pentagram_has_no_noncontextual_assignment() {
        let r = pentagram_unsat();
        assert_eq!(r.assignments, 1024);
        assert_eq!(r.satisfying_count, 0);
        assert_eq!(r.max_lines_satisfiable, 4);
        let lines = indexed_lines();
        // all +1: satisfies the four positive lines only
        assert_eq!(lines_satisfied(0, &lines), 4);
        let sequential = (0u32..1024)
            .map(|b| lines_satisfied(b, &lines))
            .fold((0, 0), |(s, m), k| (s + u32::from(k == 5), m.max(k)));
        assert_eq!(sequential, (r.satisfying_count, r.max_lines_satisfiable));
    }

    #[test]
    fn word_json() {
        assert_eq!(serde_json::to_string(&w("ZXX")).unwrap(), "\"ZXX\"");
        assert!(serde_json::from_str::<PauliWord>("\"ZYX\"").is_err());
        assert!("ZX".parse::<PauliWord>().is_err());
    }
}
