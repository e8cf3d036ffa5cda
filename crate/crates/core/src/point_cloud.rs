//! Point clouds, dense Euclidean distance matrices and per-point gradients.
//!
//! Coordinates are stored row-major in 64-bit floats. Distances are always
//! `sqrt(sum((a_k - b_k)^2))` accumulated in coordinate order, so a given pair
//! of points yields bit-identical distances regardless of argument order,
//! thread count or which routine computed it.

use rayon::prelude::*;

use crate::error::{Result, TregError};

/// An ordered set of `n` points in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a row-major buffer of `n * d` coordinates.
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(TregError::InvalidCloud("a cloud needs at least one point".into()));
        }
        if d == 0 {
            return Err(TregError::InvalidCloud("ambient dimension must be at least 1".into()));
        }
        if data.len() != n * d {
            return Err(TregError::InvalidCloud(format!(
                "expected {} coordinates for {n} points in dimension {d}, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(TregError::InvalidCloud(format!(
                "non-finite coordinate {} at point {}, axis {}",
                data[pos],
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(TregError::InvalidCloud(format!(
                    "row {i} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), d, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    pub fn norms(&self) -> Vec<f64> {
        self.points().map(norm).collect()
    }

    pub fn mean_norm(&self) -> f64 {
        self.norms().iter().sum::<f64>() / self.n as f64
    }

    /// Coordinate-wise mean.
    pub fn center_of_mass(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for p in self.points() {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_coords(|x| x * s)
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        assert_eq!(offset.len(), self.d);
        let data = self
            .points()
            .flat_map(|p| p.iter().zip(offset).map(|(x, o)| x + o))
            .collect();
        Self { n: self.n, d: self.d, data }
    }

    /// Subtracts the center of mass from every point.
    pub fn centered(&self) -> Self {
        let neg: Vec<f64> = self.center_of_mass().iter().map(|m| -m).collect();
        self.translated(&neg)
    }

    /// Reorders points so that row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let data = perm.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self { n: self.n, d: self.d, data }
    }

    /// Appends `k` all-zero coordinates to every point.
    pub fn with_zero_columns(&self, k: usize) -> Self {
        let d = self.d + k;
        let mut data = Vec::with_capacity(self.n * d);
        for p in self.points() {
            data.extend_from_slice(p);
            data.extend(std::iter::repeat_n(0.0, k));
        }
        Self { n: self.n, d, data }
    }

    /// Feature-wise concatenation `z_i ⊕ w_i`.
    pub fn concat_features(&self, other: &PointCloud) -> Result<Self> {
        if other.n != self.n {
            return Err(TregError::ShapeMismatch {
                expected: (self.n, other.d),
                actual: (other.n, other.d),
            });
        }
        let d = self.d + other.d;
        let mut data = Vec::with_capacity(self.n * d);
        for (a, b) in self.points().zip(other.points()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(Self { n: self.n, d, data })
    }

    /// Point-wise concatenation: the rows of `self` followed by the rows of `other`.
    pub fn concat_points(&self, other: &PointCloud) -> Result<Self> {
        if other.d != self.d {
            return Err(TregError::ShapeMismatch {
                expected: (other.n, self.d),
                actual: (other.n, other.d),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { n: self.n + other.n, d: self.d, data })
    }

    /// Rows `start..end` as a new cloud.
    pub fn slice_points(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(TregError::param("range", format!("{start}..{end} out of 0..{}", self.n)));
        }
        Self::from_flat(end - start, self.d, self.data[start * self.d..end * self.d].to_vec())
    }

    /// Sets the trailing `k` coordinates of every point to zero.
    pub fn zero_trailing_coords(&self, k: usize) -> Self {
        let k = k.min(self.d);
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.d) {
            row[self.d - k..].iter_mut().for_each(|x| *x = 0.0);
        }
        Self { n: self.n, d: self.d, data }
    }

    fn map_coords(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n: self.n, d: self.d, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Sum over unordered pairs `i < j`.
    pub fn pair_sum(&self) -> f64 {
        (0..self.n).map(|i| self.row(i)[i + 1..].iter().sum::<f64>()).sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// Exact pairwise distances. Rows are filled in parallel; every entry is
/// computed by the same sequential inner loop, so the result does not depend
/// on the thread count.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.n();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let pi = cloud.point(i);
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                *slot = euclidean(pi, cloud.point(j));
            }
        }
    });
    DistanceMatrix { n, entries }
}

pub fn center_of_mass(cloud: &PointCloud) -> Vec<f64> {
    cloud.center_of_mass()
}

/// Per-point gradient with the same `n x d` shape as the cloud it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    d: usize,
    data: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { d, data: vec![0.0; n * d] }
    }

    pub fn from_flat(d: usize, data: Vec<f64>) -> Self {
        assert!(d > 0 && data.len().is_multiple_of(d));
        Self { d, data }
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|g| *g *= s);
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Gradient) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }

    /// Sum of all rows.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.d];
        for r in self.rows() {
            for (a, b) in s.iter_mut().zip(r) {
                *a += b;
            }
        }
        s
    }

    /// Stacks two gradients row-wise.
    pub fn stacked(&self, other: &Gradient) -> Self {
        assert_eq!(self.d, other.d);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self { d: self.d, data }
    }
}
