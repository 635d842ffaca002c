//! Nonnegative step functions on an interval `[0, s]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub length: f64,
    pub value: f64,
}

/// Pieces laid out left to right from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Piece>", into = "Vec<Piece>")]
pub struct StepFunction {
    pieces: Vec<Piece>,
}

impl TryFrom<Vec<Piece>> for StepFunction {
    type Error = Error;

    fn try_from(pieces: Vec<Piece>) -> Result<Self> {
        Self::new(pieces)
    }
}

impl From<StepFunction> for Vec<Piece> {
    fn from(f: StepFunction) -> Self {
        f.pieces
    }
}

impl StepFunction {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Domain("a step function needs at least one piece".into()));
        }
        for (i, piece) in pieces.iter().enumerate() {
            if !(piece.length.is_finite() && piece.length > 0.0) {
                return Err(Error::Domain(format!("piece {i} has length {}", piece.length)));
            }
            if !(piece.value.is_finite() && piece.value >= 0.0) {
                return Err(Error::Domain(format!("piece {i} has value {}", piece.value)));
            }
        }
        Ok(Self { pieces })
    }

    /// From `(length, value)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(length, value)| Piece { length, value }).collect())
    }

    pub fn constant(length: f64, value: f64) -> Result<Self> {
        Self::new(vec![Piece { length, value }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.length).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.value).collect()
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| p.length * p.value).sum()
    }

    /// `∫ φ^p`.
    pub fn p_integral(&self, p: f64) -> f64 {
        self.pieces.iter().map(|piece| piece.length * piece.value.powf(p)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.total_length()
    }

    /// `(1/s) ∫ φ^p`.
    pub fn p_mean(&self, p: f64) -> f64 {
        self.p_integral(p) / self.total_length()
    }

    /// `∫_0^w φ`, with `φ = 0` past the right end.
    pub fn cumulative(&self, w: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for piece in &self.pieces {
            if w <= start {
                break;
            }
            acc += piece.value * (w - start).min(piece.length);
            start += piece.length;
        }
        acc
    }

    /// `(1/w) ∫_0^w φ` for `w > 0`.
    pub fn running_average(&self, w: f64) -> f64 {
        self.cumulative(w) / w
    }

    /// Value at `x`, with pieces closed on the left.
    pub fn value_at(&self, x: f64) -> f64 {
        let mut start = 0.0;
        for piece in &self.pieces {
            if x < start + piece.length {
                return piece.value;
            }
            start += piece.length;
        }
        0.0
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.pieces.windows(2).all(|w| w[0].value >= w[1].value)
    }

    /// The nonincreasing function with the same distribution; adjacent pieces
    /// with equal values are merged.
    pub fn rearrange_decreasing(&self) -> Self {
        let mut sorted = self.pieces.clone();
        sorted.sort_by(|a, b| b.value.total_cmp(&a.value));
        let mut merged: Vec<Piece> = Vec::with_capacity(sorted.len());
        for piece in sorted {
            match merged.last_mut() {
                Some(last) if last.value == piece.value => last.length += piece.length,
                _ => merged.push(piece),
            }
        }
        Self { pieces: merged }
    }

    /// `φ1` on `[0, s1]` followed by `φ2` on `[s1, s1 + s2]`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        Self { pieces }
    }

    /// `φ(·/T)` on `[0, T s]`.
    pub fn dilate(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Domain(format!("dilation factor {factor}")));
        }
        Self::new(self.pieces.iter().map(|p| Piece { length: p.length * factor, value: p.value }).collect())
    }

    /// `c φ`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.pieces.iter().map(|p| Piece { length: p.length, value: p.value * c }).collect())
    }

    /// Splits every piece into `k` equal parts.
    pub fn subdivide(&self, k: usize) -> Self {
        let k = k.max(1);
        let pieces = self
            .pieces
            .iter()
            .flat_map(|p| std::iter::repeat(Piece { length: p.length / k as f64, value: p.value }).take(k))
            .collect();
        Self { pieces }
    }

    /// Splits the longest pieces in half until there are `m` pieces.
    pub fn refine_to(&self, m: usize) -> Self {
        let mut pieces = self.pieces.clone();
        while pieces.len() < m {
            let (i, _) = pieces
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.length > best.1 { (i, p.length) } else { best });
            let half = Piece { length: pieces[i].length / 2.0, value: pieces[i].value };
            pieces[i] = half;
            pieces.insert(i + 1, half);
        }
        Self { pieces }
    }
}
