//! Mixture weights on the probability simplex and its hierarchical
//! partitioning into simplicial cells.
//!
//! A cell at height `h` with index `i` (1-based, `i <= 2^h`) splits into the
//! cells `(h+1, 2i-1)` and `(h+1, 2i)`. Both strategies split by bisecting one
//! edge of the cell, so every cell stays a simplex with exactly `K` vertices,
//! the two children tile their parent, and their interiors are disjoint.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Absolute tolerance on `sum(weights) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Negative entries down to `-CLAMP_TOLERANCE` are clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-12;
/// Deepest height a cell can be split into (cell indices are `u128`).
pub const MAX_HEIGHT: u32 = 127;

/// A point on the `(K-1)`-dimensional probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    /// Validates `raw` and renormalizes it to sum to one.
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidMixture("empty weight vector".into()));
        }
        let mut weights = Vec::with_capacity(raw.len());
        for (i, &w) in raw.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidMixture(format!("entry {i} is not finite")));
            }
            if w < -CLAMP_TOLERANCE {
                return Err(Error::InvalidMixture(format!("entry {i} is negative ({w})")));
            }
            weights.push(w.max(0.0));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidMixture(format!("weights sum to {sum}, not 1")));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(MixtureWeights(weights))
    }

    /// The barycenter `(1/K, ..., 1/K)`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidMixture("K must be at least 1".into()));
        }
        Ok(MixtureWeights(vec![1.0 / k as f64; k]))
    }

    /// The standard basis vector `e_i` (0-based `i`).
    pub fn vertex(k: usize, i: usize) -> Result<Self> {
        if i >= k {
            return Err(Error::InvalidMixture(format!("vertex {i} out of range for K={k}")));
        }
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        Ok(MixtureWeights(w))
    }

    /// Wraps weights already known to lie on the simplex up to rounding
    /// (convex combinations of valid mixtures).
    pub(crate) fn from_convex(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|&w| w >= -CLAMP_TOLERANCE));
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        MixtureWeights(weights)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &MixtureWeights) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Compact JSON array, e.g. `[0.5,0.5]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("finite floats serialize")
    }
}

impl fmt::Display for MixtureWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Shorthand for [`MixtureWeights::new`].
pub fn validate_mixture(raw: &[f64]) -> Result<MixtureWeights> {
    MixtureWeights::new(raw)
}

/// How a cell is split into its two children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Bisect the longest edge (Euclidean length). Ties go to the
    /// lexicographically smallest vertex pair.
    LongestEdgeBisection,
    /// Halve the cell along a randomly chosen barycentric coordinate. The
    /// coordinate is drawn from a stream keyed by `(seed, height, index)`.
    CoordinateHalving { seed: u64 },
}

impl PartitionStrategy {
    /// Parses the CLI spelling: `bisect` or `coordhalf`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "bisect" | "longest-edge-bisection" => Ok(PartitionStrategy::LongestEdgeBisection),
            "coordhalf" | "coordinate-halving" => Ok(PartitionStrategy::CoordinateHalving { seed }),
            other => Err(Error::param(format!("unknown partition strategy `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PartitionStrategy::LongestEdgeBisection => "bisect",
            PartitionStrategy::CoordinateHalving { .. } => "coordhalf",
        }
    }
}

/// A simplicial cell of the hierarchical partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexCell {
    vertices: Vec<MixtureWeights>,
    height: u32,
    index: u128,
}

impl SimplexCell {
    /// The whole simplex: vertices `e_1, ..., e_K`, height 0, index 1.
    pub fn root(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCell("K must be at least 1".into()));
        }
        let vertices = (0..k)
            .map(|i| MixtureWeights::vertex(k, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimplexCell {
            vertices,
            height: 0,
            index: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.vertices.len()
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn index(&self) -> u128 {
        self.index
    }

    pub fn vertices(&self) -> &[MixtureWeights] {
        &self.vertices
    }

    /// Vertex list as a JSON array of arrays.
    pub fn vertices_json(&self) -> String {
        serde_json::to_string(&self.vertices).expect("finite floats serialize")
    }

    /// Centroid of the vertices.
    pub fn representative(&self) -> MixtureWeights {
        let k = self.k() as f64;
        let mut c = vec![0.0; self.k()];
        for v in &self.vertices {
            for (acc, &x) in c.iter_mut().zip(v.as_slice()) {
                *acc += x;
            }
        }
        c.iter_mut().for_each(|x| *x /= k);
        MixtureWeights::from_convex(c)
    }

    /// Largest ℓ1 distance between two vertices. The ℓ1 norm is convex, so
    /// this is the ℓ1 diameter of the whole cell.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for (a, va) in self.vertices.iter().enumerate() {
            for vb in &self.vertices[a + 1..] {
                best = best.max(va.l1_distance(vb));
            }
        }
        best
    }

    /// `(K-1)`-dimensional volume of the cell: `sqrt(det(Gram)) / (K-1)!`.
    pub fn volume(&self) -> f64 {
        let k = self.k();
        if k == 1 {
            return 1.0;
        }
        let base = self.vertices[0].as_slice();
        let edges: Vec<Vec<f64>> = self.vertices[1..]
            .iter()
            .map(|v| v.as_slice().iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        let gram: linalg::Matrix = edges
            .iter()
            .map(|e| edges.iter().map(|f| linalg::dot(e, f)).collect())
            .collect();
        let factorial: f64 = (1..k).map(|n| n as f64).product();
        linalg::determinant(&gram).max(0.0).sqrt() / factorial
    }

    /// Barycentric coordinates of `point` with respect to the vertices, or
    /// `None` for a degenerate cell.
    pub fn barycentric(&self, point: &MixtureWeights) -> Option<Vec<f64>> {
        let k = self.k();
        if point.k() != k {
            return None;
        }
        // Columns are vertices; the cell lies in the hyperplane sum = 1, which
        // misses the origin, so the system is square and nonsingular.
        let a: linalg::Matrix = (0..k)
            .map(|row| self.vertices.iter().map(|v| v.as_slice()[row]).collect())
            .collect();
        linalg::solve(&a, point.as_slice())
    }

    /// True when `point` lies in the closed cell (within `tol` on each
    /// barycentric coordinate).
    pub fn contains(&self, point: &MixtureWeights, tol: f64) -> bool {
        self.barycentric(point)
            .is_some_and(|c| c.iter().all(|&x| x >= -tol))
    }

    /// Splits the cell into children `(h+1, 2i-1)` and `(h+1, 2i)`.
    pub fn split(&self, strategy: &PartitionStrategy) -> Result<(SimplexCell, SimplexCell)> {
        if self.k() < 2 {
            return Err(Error::InvalidCell("a single-point simplex cannot be split".into()));
        }
        if self.height >= MAX_HEIGHT {
            return Err(Error::InvalidCell(format!(
                "cell height {} is at the partition depth limit",
                self.height
            )));
        }
        let (a, b) = match strategy {
            PartitionStrategy::LongestEdgeBisection => self.longest_edge(),
            PartitionStrategy::CoordinateHalving { seed } => self.halving_edge(*seed)?,
        };
        Ok(self.bisect(a, b))
    }

    fn longest_edge(&self) -> (usize, usize) {
        let mut best = (0, 1);
        let mut best_len = f64::NEG_INFINITY;
        for a in 0..self.k() {
            for b in a + 1..self.k() {
                let len = linalg::dist2_sq(self.vertices[a].as_slice(), self.vertices[b].as_slice());
                // Lengths equal up to rounding count as ties, so the first
                // pair in lexicographic order wins.
                if len > best_len * (1.0 + 1e-12) {
                    best_len = len;
                    best = (a, b);
                }
            }
        }
        best
    }

    /// Edge joining the vertices with the smallest and largest value of a
    /// randomly chosen coordinate. Its midpoint sits at the midpoint of the
    /// cell's bounding box along that coordinate.
    fn halving_edge(&self, seed: u64) -> Result<(usize, usize)> {
        let k = self.k();
        let extremes: Vec<(usize, usize)> = (0..k)
            .map(|j| {
                let coord = |v: usize| self.vertices[v].as_slice()[j];
                let lo = (0..k).min_by(|&x, &y| coord(x).total_cmp(&coord(y))).unwrap();
                let hi = (0..k).max_by(|&x, &y| coord(x).total_cmp(&coord(y))).unwrap();
                (lo, hi)
            })
            .collect();
        let candidates: Vec<usize> = (0..k)
            .filter(|&j| {
                let (lo, hi) = extremes[j];
                self.vertices[hi].as_slice()[j] > self.vertices[lo].as_slice()[j]
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::InvalidCell("degenerate cell has zero extent".into()));
        }
        let mut stream = rng::derived_stream(
            seed,
            &[u64::from(self.height), self.index as u64, (self.index >> 64) as u64],
        );
        let j = candidates[stream.random_range(0..candidates.len())];
        let (lo, hi) = extremes[j];
        Ok((lo.min(hi), lo.max(hi)))
    }

    fn bisect(&self, a: usize, b: usize) -> (SimplexCell, SimplexCell) {
        let mid: Vec<f64> = self.vertices[a]
            .as_slice()
            .iter()
            .zip(self.vertices[b].as_slice())
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        let mid = MixtureWeights::from_convex(mid);
        let mut first = self.vertices.clone();
        first[b] = mid.clone();
        let mut second = self.vertices.clone();
        second[a] = mid;
        let height = self.height + 1;
        (
            SimplexCell {
                vertices: first,
                height,
                index: 2 * self.index - 1,
            },
            SimplexCell {
                vertices: second,
                height,
                index: 2 * self.index,
            },
        )
    }
}

/// Shorthand for [`SimplexCell::root`].
pub fn root_cell(k: usize) -> Result<SimplexCell> {
    SimplexCell::root(k)
}

/// Shorthand for [`SimplexCell::split`].
pub fn split_cell(
    cell: &SimplexCell,
    strategy: &PartitionStrategy,
) -> Result<(SimplexCell, SimplexCell)> {
    cell.split(strategy)
}

/// Shorthand for [`SimplexCell::representative`].
pub fn representative(cell: &SimplexCell) -> MixtureWeights {
    cell.representative()
}

/// Shorthand for [`SimplexCell::diameter`].
pub fn cell_diameter(cell: &SimplexCell) -> f64 {
    cell.diameter()
}

/// ℓ1 diameter guaranteed for cells at height `h` under longest-edge
/// bisection: `sqrt(2K) (sqrt(3)/2)^(h/(K-1) - 1)`.
pub fn diameter_bound(h: u32, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("the diameter bound needs K >= 2"));
    }
    let exponent = f64::from(h) / (k as f64 - 1.0) - 1.0;
    Ok((2.0 * k as f64).sqrt() * (3.0_f64.sqrt() / 2.0).powf(exponent))
}

/// All cells at heights `0..=height`, level by level, in index order.
pub fn enumerate_cells(
    k: usize,
    height: u32,
    strategy: &PartitionStrategy,
) -> Result<Vec<SimplexCell>> {
    let mut out = vec![SimplexCell::root(k)?];
    let mut level = out.clone();
    for _ in 0..height {
        let mut next = Vec::with_capacity(level.len() * 2);
        for cell in &level {
            let (c1, c2) = cell.split(strategy)?;
            next.push(c1);
            next.push(c2);
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    Ok(out)
}
