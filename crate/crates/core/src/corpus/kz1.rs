//! Simplices of the bar construction K(Z,1): an n-simplex is a list of n
//! integers.

use rand::Rng;
use thiserror::Error;

use crate::model::Value;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Simplex {
    entries: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaceError {
    #[error("face index {index} out of range for a {dim}-simplex")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("a 0-simplex has no faces")]
    NoFaces,
    #[error("not a simplex: {0}")]
    NotASimplex(String),
}

impl Simplex {
    pub fn new(entries: Vec<i64>) -> Self {
        Simplex { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    /// `(n (e1 ... en))`
    pub fn to_value(&self) -> Value {
        Value::list([
            Value::from(self.dim() as i64),
            Value::list(self.entries.iter().map(|&e| Value::from(e))),
        ])
    }

    pub fn from_value(v: &Value) -> Result<Simplex, FaceError> {
        let bad = || FaceError::NotASimplex(v.to_string());
        let Value::List(pair) = v else { return Err(bad()) };
        let (Some(Value::Integer(n)), Some(Value::List(items)), 2) = (pair.get(0), pair.get(1), pair.len()) else {
            return Err(bad());
        };
        let entries = items
            .iter()
            .map(|e| match e {
                Value::Integer(x) => i64::try_from(x).map_err(|_| bad()),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if usize::try_from(n).ok() != Some(entries.len()) {
            return Err(bad());
        }
        Ok(Simplex { entries })
    }
}

/// The i-th face: drop the first entry (i = 0), drop the last (i = n), or
/// add entries i and i+1 together.
pub fn face_kz1(s: &Simplex, i: usize) -> Result<Simplex, FaceError> {
    let n = s.dim();
    if n == 0 {
        return Err(FaceError::NoFaces);
    }
    if i > n {
        return Err(FaceError::IndexOutOfRange { index: i, dim: n });
    }
    let e = &s.entries;
    let entries = if i == 0 {
        e[1..].to_vec()
    } else if i == n {
        e[..n - 1].to_vec()
    } else {
        let mut out = Vec::with_capacity(n - 1);
        out.extend_from_slice(&e[..i - 1]);
        out.push(e[i - 1] + e[i]);
        out.extend_from_slice(&e[i + 1..]);
        out
    };
    Ok(Simplex { entries })
}

/// Uniform dimension in `1..=max_dim`, entries uniform in `[-magnitude, magnitude]`.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, max_dim: usize, magnitude: i64) -> Simplex {
    assert!(max_dim >= 1, "max_dim must be at least 1");
    let dim = rng.gen_range(1..=max_dim);
    Simplex { entries: (0..dim).map(|_| rng.gen_range(-magnitude..=magnitude)).collect() }
}

/// Checks d_i d_j = d_{j-1} d_i for every i < j ≤ n; returns the first
/// offending pair.
pub fn check_simplicial_identities(s: &Simplex) -> Result<(), (usize, usize)> {
    let n = s.dim();
    if n < 2 {
        return Ok(());
    }
    for j in 1..=n {
        for i in 0..j {
            let left = face_kz1(&face_kz1(s, j).expect("j ≤ n"), i).expect("i < j ≤ n");
            let right = face_kz1(&face_kz1(s, i).expect("i < n"), j - 1).expect("j - 1 ≤ n - 1");
            if left != right {
                return Err((i, j));
            }
        }
    }
    Ok(())
}
