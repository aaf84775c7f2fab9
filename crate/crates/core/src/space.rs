//! Finite metric measure spaces.
//!
//! A [`PointCloudSpace`] is a finite set of points with a metric (Euclidean
//! coordinates or an explicit distance matrix), strictly positive weights
//! (the measure of each point), a resolution `h` (the sampling pitch below
//! which geometry is meaningless), and a diameter.  All queries are exact and
//! deterministic: balls are open (`d < r`), always contain their centre, and
//! repeated calls return bit-identical results.
//!
//! A [`SubsetEmbedding`] models a closed subset `F ⊂ X` carrying its own
//! measure `μ`, the setting for trace and restriction operators.  The two
//! scaling exponents of interest — the volume growth `m(B(x,r)) ~ r^N` and
//! the quotient `m(B)/μ(B) ~ r^γ` — are estimated by per-point log–log
//! fits aggregated by the median, which is robust against the boundary
//! clipping that bends individual growth curves.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit;

/// How distances between points are evaluated.
#[derive(Debug, Clone)]
pub enum Metric {
    /// Points carry coordinates in `R^dim`; the metric is Euclidean.
    Euclidean {
        /// Ambient dimension (1, 2 or 3).
        dim: usize,
    },
    /// Distances are stored explicitly as a symmetric matrix with zero
    /// diagonal, row-major `n × n`.
    Matrix {
        /// The distance matrix entries.
        distances: Arc<Vec<f64>>,
    },
}

/// Number of points above which Euclidean spaces get a bucket index instead
/// of linear scans.
const BUCKET_THRESHOLD: usize = 512;

/// Spatial acceleration structure for ball queries.
#[derive(Debug, Clone)]
enum SpatialIndex {
    /// Linear scan over all points in index order.
    Scan,
    /// Uniform bucket grid over the bounding box (Euclidean only).
    Buckets {
        cell: f64,
        origin: Vec<f64>,
        counts: Vec<usize>,
        /// Bucket contents, concatenated; each bucket's slice is ascending.
        entries: Vec<u32>,
        /// Offsets into `entries`, one per bucket plus a terminator.
        offsets: Vec<usize>,
    },
}

/// Exact-lattice view of a Euclidean space whose coordinates are all integer
/// multiples of the resolution.  Grids and axis-aligned segments qualify;
/// gasket and Cantor geometries do not.  Used for structured row scans in
/// modulus-of-continuity sums.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// Lattice pitch (equals the space resolution).
    pub pitch: f64,
    /// Distinct second coordinates, ascending (one entry for dimension 1).
    pub row_keys: Vec<i64>,
    /// Per row: ascending first coordinates with their point indices.
    pub rows: Vec<Vec<(i64, u32)>>,
}

/// A finite metric measure space.
#[derive(Debug, Clone)]
pub struct PointCloudSpace {
    coords: Option<Vec<f64>>,
    metric: Metric,
    weights: Vec<f64>,
    resolution: f64,
    diameter: f64,
    total_measure: f64,
    index: SpatialIndex,
    lattice: Option<Arc<Lattice>>,
}

impl PointCloudSpace {
    /// Build a space from Euclidean coordinates (flattened row-major, `dim`
    /// values per point), weights and resolution.
    pub fn euclidean(coords: Vec<f64>, dim: usize, weights: Vec<f64>, resolution: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter {
                name: "dim",
                message: format!("supported ambient dimensions are 1..=3, got {dim}"),
            });
        }
        if coords.len() != weights.len() * dim {
            return Err(Error::LengthMismatch {
                expected: weights.len() * dim,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coords",
                message: "coordinates must be finite".into(),
            });
        }
        validate_weights(&weights)?;
        validate_resolution(resolution)?;
        let metric = Metric::Euclidean { dim };
        let mut space = PointCloudSpace {
            coords: Some(coords),
            metric,
            weights,
            resolution,
            diameter: 0.0,
            total_measure: 0.0,
            index: SpatialIndex::Scan,
            lattice: None,
        };
        space.finish_construction();
        Ok(space)
    }

    /// Build a space from an explicit distance matrix (row-major `n × n`).
    pub fn from_distance_matrix(distances: Vec<f64>, weights: Vec<f64>, resolution: f64) -> Result<Self> {
        let n = weights.len();
        if distances.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: distances.len(),
            });
        }
        validate_weights(&weights)?;
        validate_resolution(resolution)?;
        for i in 0..n {
            if distances[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "distances",
                    message: format!("diagonal entry {i} must be exactly zero"),
                });
            }
            for j in (i + 1)..n {
                let dij = distances[i * n + j];
                let dji = distances[j * n + i];
                if !(dij.is_finite() && dij >= 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "distances",
                        message: format!("entry ({i},{j}) must be finite and nonnegative, got {dij}"),
                    });
                }
                if dij != dji {
                    return Err(Error::InvalidParameter {
                        name: "distances",
                        message: format!("matrix not symmetric at ({i},{j}): {dij} vs {dji}"),
                    });
                }
                if dij == 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "distances",
                        message: format!("distinct points {i},{j} at distance zero"),
                    });
                }
            }
        }
        let mut space = PointCloudSpace {
            coords: None,
            metric: Metric::Matrix {
                distances: Arc::new(distances),
            },
            weights,
            resolution,
            diameter: 0.0,
            total_measure: 0.0,
            index: SpatialIndex::Scan,
            lattice: None,
        };
        space.finish_construction();
        Ok(space)
    }

    fn finish_construction(&mut self) {
        self.total_measure = self.weights.iter().sum();
        self.diameter = self.compute_diameter();
        self.index = self.build_index();
        self.lattice = self.detect_lattice().map(Arc::new);
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the space has no points (never constructible; kept for API
    /// completeness).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Ambient dimension for Euclidean spaces, `None` for matrix metrics.
    pub fn dim(&self) -> Option<usize> {
        match self.metric {
            Metric::Euclidean { dim } => Some(dim),
            Metric::Matrix { .. } => None,
        }
    }

    /// Coordinates of point `i` (Euclidean spaces only).
    pub fn coord(&self, i: usize) -> Option<&[f64]> {
        let dim = self.dim()?;
        self.coords.as_ref().map(|c| &c[i * dim..(i + 1) * dim])
    }

    /// Flattened coordinate array, if the metric is Euclidean.
    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    /// Point weight (measure of the point).
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// All weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total measure `m(X)`.
    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Sampling pitch below which the discretisation carries no geometry.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// The metric evaluator.
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Exact-lattice view, when all coordinates are integer multiples of the
    /// resolution (dimensions 1 and 2 only).
    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_deref()
    }

    /// Distance between two points.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Euclidean { dim } => {
                let c = self.coords.as_ref().expect("euclidean space has coords");
                let a = &c[i * dim..i * dim + dim];
                let b = &c[j * dim..j * dim + dim];
                let mut acc = 0.0;
                for k in 0..*dim {
                    let d = a[k] - b[k];
                    acc += d * d;
                }
                acc.sqrt()
            }
            Metric::Matrix { distances } => distances[i * self.len() + j],
        }
    }

    fn squared_distance(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Euclidean { dim } => {
                let c = self.coords.as_ref().expect("euclidean space has coords");
                let a = &c[i * dim..i * dim + dim];
                let b = &c[j * dim..j * dim + dim];
                let mut acc = 0.0;
                for k in 0..*dim {
                    let d = a[k] - b[k];
                    acc += d * d;
                }
                acc
            }
            Metric::Matrix { distances } => {
                let d = distances[i * self.len() + j];
                d * d
            }
        }
    }

    /// Open ball `B(centre, r)`: indices of points with `d < r`, ascending.
    /// Always contains the centre (requires `r > 0`).
    pub fn ball(&self, centre: usize, r: f64) -> Result<Vec<u32>> {
        self.check_index(centre)?;
        check_radius(r)?;
        let mut out = Vec::new();
        self.visit_ball(centre, r, |idx, _d2| out.push(idx));
        out.sort_unstable();
        Ok(out)
    }

    /// Measure of the open ball `B(centre, r)`.
    pub fn measure_ball(&self, centre: usize, r: f64) -> Result<f64> {
        self.check_index(centre)?;
        check_radius(r)?;
        let mut acc = 0.0;
        self.visit_ball(centre, r, |idx, _d2| acc += self.weights[idx as usize]);
        Ok(acc)
    }

    /// Measure of an arbitrary index set.  Indices are deduplicated and
    /// summed in ascending order, so the result does not depend on caller
    /// ordering.
    pub fn measure(&self, indices: &[u32]) -> Result<f64> {
        let mut sorted: Vec<u32> = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut acc = 0.0;
        for &i in &sorted {
            self.check_index(i as usize)?;
            acc += self.weights[i as usize];
        }
        Ok(acc)
    }

    /// Distance from point `x` to the set of points `set` (min over members).
    pub fn distance_to_set(&self, x: usize, set: &[u32]) -> Result<f64> {
        self.check_index(x)?;
        if set.is_empty() {
            return Err(Error::EmptyInput("distance to empty set"));
        }
        let mut best = f64::INFINITY;
        for &s in set {
            self.check_index(s as usize)?;
            let d = self.distance(x, s as usize);
            if d < best {
                best = d;
            }
        }
        Ok(best)
    }

    /// Visit every point of the open ball `B(centre, r)` in a fixed,
    /// deterministic order, passing `(index, squared_distance)`.
    ///
    /// The visiting order is ascending index for scan-indexed spaces and
    /// bucket raster order for bucket-indexed ones; it never changes between
    /// calls on the same space.
    pub fn visit_ball<F: FnMut(u32, f64)>(&self, centre: usize, r: f64, mut f: F) {
        let r2 = r * r;
        match &self.index {
            SpatialIndex::Scan => {
                for j in 0..self.len() {
                    let d2 = self.squared_distance(centre, j);
                    if d2 < r2 {
                        f(j as u32, d2);
                    }
                }
            }
            SpatialIndex::Buckets {
                cell,
                origin,
                counts,
                entries,
                offsets,
            } => {
                let dim = match self.metric {
                    Metric::Euclidean { dim } => dim,
                    Metric::Matrix { .. } => unreachable!("buckets imply euclidean"),
                };
                let c = self.coords.as_ref().expect("euclidean space has coords");
                let centre_coord = &c[centre * dim..centre * dim + dim];
                let mut lo = [0usize; 3];
                let mut hi = [0usize; 3];
                for k in 0..dim {
                    let lo_f = ((centre_coord[k] - r - origin[k]) / cell).floor();
                    let hi_f = ((centre_coord[k] + r - origin[k]) / cell).floor();
                    lo[k] = lo_f.max(0.0) as usize;
                    hi[k] = hi_f.clamp(0.0, (counts[k] - 1) as f64) as usize;
                }
                for k in dim..3 {
                    lo[k] = 0;
                    hi[k] = 0;
                }
                let mut cursor = [0usize; 3];
                let mut z = lo[2];
                while z <= hi[2] {
                    cursor[2] = z;
                    let mut y = lo[1];
                    while y <= hi[1] {
                        cursor[1] = y;
                        let mut x = lo[0];
                        while x <= hi[0] {
                            cursor[0] = x;
                            let mut bucket = 0usize;
                            for k in (0..dim).rev() {
                                bucket = bucket * counts[k] + cursor[k];
                            }
                            let start = offsets[bucket];
                            let end = offsets[bucket + 1];
                            for &j in &entries[start..end] {
                                let d2 = self.squared_distance(centre, j as usize);
                                if d2 < r2 {
                                    f(j, d2);
                                }
                            }
                            x += 1;
                        }
                        y += 1;
                    }
                    z += 1;
                }
            }
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    fn compute_diameter(&self) -> f64 {
        let n = self.len();
        if n <= 1 {
            return 0.0;
        }
        if n <= 4096 || matches!(self.metric, Metric::Matrix { .. }) {
            let mut best = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = self.distance(i, j);
                    if d > best {
                        best = d;
                    }
                }
            }
            best
        } else {
            // Iterated farthest-point sweeps from fixed starts.  Exact for
            // the convex-extremal geometries bundled with the crate; always a
            // lower bound within a factor of two in general.
            let mut best = 0.0f64;
            for &start in &[0usize, n / 2, n - 1] {
                let mut current = start;
                for _ in 0..3 {
                    let mut far = current;
                    let mut far_d = 0.0f64;
                    for j in 0..n {
                        let d = self.distance(current, j);
                        if d > far_d {
                            far_d = d;
                            far = j;
                        }
                    }
                    if far_d > best {
                        best = far_d;
                    }
                    current = far;
                }
            }
            best
        }
    }

    fn build_index(&self) -> SpatialIndex {
        let n = self.len();
        let dim = match self.metric {
            Metric::Euclidean { dim } => dim,
            Metric::Matrix { .. } => return SpatialIndex::Scan,
        };
        if n <= BUCKET_THRESHOLD {
            return SpatialIndex::Scan;
        }
        let coords = self.coords.as_ref().expect("euclidean space has coords");
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for i in 0..n {
            for k in 0..dim {
                let v = coords[i * dim + k];
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        // Aim for a handful of points per bucket; widen cells until the
        // bucket table stays proportional to the point count.
        let mut cell = self.resolution * 2.0;
        let mut counts: Vec<usize>;
        loop {
            counts = (0..dim)
                .map(|k| ((max[k] - min[k]) / cell).floor() as usize + 1)
                .collect();
            let total: usize = counts.iter().product();
            if total <= 8 * n {
                break;
            }
            cell *= 2.0;
        }
        let total: usize = counts.iter().product();
        let bucket_of = |i: usize| -> usize {
            let mut b = 0usize;
            for k in (0..dim).rev() {
                let idx = (((coords[i * dim + k] - min[k]) / cell).floor() as usize).min(counts[k] - 1);
                b = b * counts[k] + idx;
            }
            b
        };
        let mut histogram = vec![0usize; total];
        for i in 0..n {
            histogram[bucket_of(i)] += 1;
        }
        let mut offsets = vec![0usize; total + 1];
        for b in 0..total {
            offsets[b + 1] = offsets[b] + histogram[b];
        }
        let mut entries = vec![0u32; n];
        let mut cursor = offsets.clone();
        for i in 0..n {
            let b = bucket_of(i);
            entries[cursor[b]] = i as u32;
            cursor[b] += 1;
        }
        let mut origin = vec![0.0; 3];
        origin[..dim].copy_from_slice(&min);
        let mut counts3 = vec![1usize; 3];
        counts3[..dim].copy_from_slice(&counts);
        SpatialIndex::Buckets {
            cell,
            origin,
            counts: counts3,
            entries,
            offsets,
        }
    }

    fn detect_lattice(&self) -> Option<Lattice> {
        let dim = match self.metric {
            Metric::Euclidean { dim } => dim,
            Metric::Matrix { .. } => return None,
        };
        if dim > 2 {
            return None;
        }
        let coords = self.coords.as_ref()?;
        let h = self.resolution;
        let n = self.len();
        let to_int = |v: f64| -> Option<i64> {
            let q = v / h;
            let r = q.round();
            // Exact lattice membership only: any rounding residue disables
            // the structured path rather than risking membership mismatches.
            if q == r && r.abs() < 9.0e15 {
                Some(r as i64)
            } else {
                None
            }
        };
        let mut keyed: Vec<(i64, i64, u32)> = Vec::with_capacity(n);
        for i in 0..n {
            let x = to_int(coords[i * dim])?;
            let y = if dim == 2 { to_int(coords[i * dim + 1])? } else { 0 };
            keyed.push((y, x, i as u32));
        }
        keyed.sort_unstable();
        let mut row_keys = Vec::new();
        let mut rows: Vec<Vec<(i64, u32)>> = Vec::new();
        for (y, x, i) in keyed {
            if row_keys.last() != Some(&y) {
                row_keys.push(y);
                rows.push(Vec::new());
            }
            rows.last_mut().unwrap().push((x, i));
        }
        Some(Lattice {
            pitch: h,
            row_keys,
            rows,
        })
    }

    /// Content-addressed identity of the space: SHA-256 over the canonical
    /// byte encoding of metric, coordinates/distances, weights and
    /// resolution.  Used to key kernel cache files.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        match &self.metric {
            Metric::Euclidean { dim } => {
                hasher.update(b"euclidean");
                hasher.update((*dim as u64).to_le_bytes());
                for c in self.coords.as_ref().expect("euclidean space has coords") {
                    hasher.update(c.to_le_bytes());
                }
            }
            Metric::Matrix { distances } => {
                hasher.update(b"matrix");
                for d in distances.iter() {
                    hasher.update(d.to_le_bytes());
                }
            }
        }
        hasher.update(b"weights");
        for w in &self.weights {
            hasher.update(w.to_le_bytes());
        }
        hasher.update(b"resolution");
        hasher.update(self.resolution.to_le_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").expect("hex formatting");
        }
        out
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("space must contain at least one point"));
    }
    for (i, w) in weights.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                message: format!("weight {i} must be finite and strictly positive, got {w}"),
            });
        }
    }
    Ok(())
}

fn validate_resolution(resolution: f64) -> Result<()> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidParameter {
            name: "resolution",
            message: format!("must be finite and positive, got {resolution}"),
        });
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            message: format!("ball radius must be finite and positive, got {r}"),
        });
    }
    Ok(())
}

// ───────────────────────── subset embeddings ─────────────────────────

/// A closed subset `F` of a space, carrying its own measure `μ`.
#[derive(Debug, Clone)]
pub struct SubsetEmbedding {
    parent: Arc<PointCloudSpace>,
    indices: Vec<u32>,
    mu: Vec<f64>,
    gamma: Option<f64>,
}

/// How `μ`-weights are assigned when embedding a subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuRule {
    /// Every subset point gets weight `1/|F|` (total measure one).
    UniformPerPoint,
    /// Every subset point gets its nearest-neighbour spacing inside `F` as
    /// weight — the one-dimensional cell measure, appropriate for curves and
    /// segments.
    LowerDimensionalCell,
    /// Subset points keep their parent weights (`μ = m|_F`).
    ParentMeasure,
}

impl SubsetEmbedding {
    /// Embed the given subset indices with explicit `μ`-weights.
    pub fn new(parent: Arc<PointCloudSpace>, indices: Vec<u32>, mu: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset must contain at least one point"));
        }
        if indices.len() != mu.len() {
            return Err(Error::LengthMismatch {
                expected: indices.len(),
                got: mu.len(),
            });
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter {
                name: "indices",
                message: "subset indices must be distinct".into(),
            });
        }
        for &i in &indices {
            if (i as usize) >= parent.len() {
                return Err(Error::IndexOutOfRange {
                    index: i as usize,
                    len: parent.len(),
                });
            }
        }
        for (k, w) in mu.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "mu",
                    message: format!("mu weight {k} must be finite and strictly positive, got {w}"),
                });
            }
        }
        Ok(SubsetEmbedding {
            parent,
            indices,
            mu,
            gamma: None,
        })
    }

    /// Embed a subset, deriving `μ` from a [`MuRule`].
    pub fn with_rule(parent: Arc<PointCloudSpace>, indices: Vec<u32>, rule: MuRule) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset must contain at least one point"));
        }
        let mu = match rule {
            MuRule::UniformPerPoint => {
                vec![1.0 / indices.len() as f64; indices.len()]
            }
            MuRule::LowerDimensionalCell => {
                if indices.len() < 2 {
                    return Err(Error::InvalidParameter {
                        name: "indices",
                        message: "cell weights need at least two subset points".into(),
                    });
                }
                indices
                    .iter()
                    .map(|&i| {
                        let mut best = f64::INFINITY;
                        for &j in &indices {
                            if j != i {
                                let d = parent.distance(i as usize, j as usize);
                                if d < best {
                                    best = d;
                                }
                            }
                        }
                        best
                    })
                    .collect()
            }
            MuRule::ParentMeasure => indices.iter().map(|&i| parent.weight(i as usize)).collect(),
        };
        SubsetEmbedding::new(parent, indices, mu)
    }

    /// The ambient space.
    pub fn parent(&self) -> &Arc<PointCloudSpace> {
        &self.parent
    }

    /// Subset indices into the parent space (construction order).
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Number of subset points.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// True when the subset is empty (never constructible).
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `μ`-weight of subset position `k` (not parent index).
    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    /// All `μ`-weights, aligned with [`Self::indices`].
    pub fn mu_weights(&self) -> &[f64] {
        &self.mu
    }

    /// Total `μ(F)`.
    pub fn mu_total(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// The stored quotient exponent, if one has been attached.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Return a copy with the quotient exponent `γ` attached.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    /// Distance from a parent point to the subset.
    pub fn distance_to_subset(&self, x: usize) -> Result<f64> {
        self.parent.distance_to_set(x, &self.indices)
    }

    /// `μ`-measure of the ball `B(centre, r) ∩ F`, where `centre` is a parent
    /// index (not necessarily in `F`).
    pub fn mu_ball(&self, centre: usize, r: f64) -> Result<f64> {
        self.parent.check_index(centre)?;
        check_radius(r)?;
        let mut acc = 0.0;
        for (k, &i) in self.indices.iter().enumerate() {
            if self.parent.distance(centre, i as usize) < r {
                acc += self.mu[k];
            }
        }
        Ok(acc)
    }

    /// Materialise `F` with its `μ`-weights as a standalone space (metric
    /// inherited from the parent, resolution = nearest-neighbour spacing).
    pub fn subset_space(&self) -> Result<Arc<PointCloudSpace>> {
        let m = self.indices.len();
        let resolution = if m == 1 {
            self.parent.resolution()
        } else {
            let mut best = f64::INFINITY;
            for a in 0..m {
                for b in (a + 1)..m {
                    let d = self
                        .parent
                        .distance(self.indices[a] as usize, self.indices[b] as usize);
                    if d < best {
                        best = d;
                    }
                }
            }
            best
        };
        let space = match self.parent.metric() {
            Metric::Euclidean { dim } => {
                let parent_coords = self.parent.coords().expect("euclidean space has coords");
                let mut coords = Vec::with_capacity(m * dim);
                for &i in &self.indices {
                    coords.extend_from_slice(&parent_coords[i as usize * dim..(i as usize + 1) * dim]);
                }
                PointCloudSpace::euclidean(coords, *dim, self.mu.clone(), resolution)?
            }
            Metric::Matrix { distances } => {
                let n = self.parent.len();
                let mut sub = Vec::with_capacity(m * m);
                for &a in &self.indices {
                    for &b in &self.indices {
                        sub.push(distances[a as usize * n + b as usize]);
                    }
                }
                PointCloudSpace::from_distance_matrix(sub, self.mu.clone(), resolution)?
            }
        };
        Ok(Arc::new(space))
    }
}

// ───────────────────────── scaling exponents ─────────────────────────

/// Result of a power-law fit of ball growth (or ball quotients) against
/// radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Aggregate of the per-point log–log slopes; see [`TrimPolicy`] for the
    /// aggregation rule in force.
    pub fitted_exponent: f64,
    /// Radius window used, `(r_min, r_max)`.
    pub r_range: (f64, f64),
    /// Worst relative deviation of any sampled growth curve from its own
    /// fitted power law.
    pub max_rel_deviation: f64,
    /// Per sampled point: least-squares slope of `log measure` vs `log r`.
    pub per_point_slopes: Vec<f64>,
    /// The sampled point indices (parent indices for quotient fits).
    pub sample: Vec<u32>,
    /// Diameter of the (truncated) space the fit ran on.
    pub truncation_diameter: f64,
}

/// How per-point slopes are aggregated into one exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimPolicy {
    /// Median over the half of the sample whose balls at the largest radius
    /// are heaviest.  Right choice for finite truncations of a space with a
    /// boundary: clipped balls are lighter, so clipped growth curves rank
    /// themselves out.
    FullestHalf,
    /// Plain median over every sampled point.  Right choice for boundary-free
    /// models (e.g. unions of dilates), where mass-ranking would instead
    /// concentrate on the coarsest, heaviest regions.
    None,
}

/// Sampling and radius-window parameters for regularity estimation.
#[derive(Debug, Clone)]
pub struct RegularityParams {
    /// Radii at which balls are measured; strictly increasing, inside
    /// `(2h, diameter/2)`.
    pub r_grid: Vec<f64>,
    /// How many points to sample (capped at the space size).
    pub sample_size: usize,
    /// Seed for the sampling generator.
    pub seed: u64,
    /// Slope aggregation policy.
    pub trim: TrimPolicy,
}

impl RegularityParams {
    /// Default window for a space: a dozen log-spaced radii on
    /// `[3h, diameter/6]`.  The lower cutoff avoids lattice-parity noise in
    /// small ball counts; the upper cutoff keeps boundary clipping from
    /// bending the growth curves it fits.  On exact-lattice spaces the radii
    /// are snapped to half-odd multiples of the pitch, where open-ball counts
    /// change least erratically (an interval then holds exactly `2r/h`
    /// points).
    pub fn for_space(space: &PointCloudSpace) -> Result<Self> {
        let h = space.resolution();
        let lo = 3.0 * h;
        let hi = space.diameter() / 6.0;
        if !(hi > lo) {
            return Err(Error::InvalidParameter {
                name: "r_grid",
                message: format!(
                    "space too coarse for a regularity fit: 3h = {lo} is not below diameter/6 = {hi}"
                ),
            });
        }
        let mut r_grid = log_spaced(lo, hi, 12);
        if space.lattice().is_some() {
            for r in &mut r_grid {
                let k = (*r / h - 0.5).round().max(3.0);
                *r = (k + 0.5) * h;
            }
            r_grid.dedup();
        }
        Ok(RegularityParams {
            r_grid,
            sample_size: 256,
            seed: 0x5EED_0001,
            trim: TrimPolicy::FullestHalf,
        })
    }
}

/// Log-spaced radii including both endpoints.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > lo && lo > 0.0);
    let a = lo.ln();
    let b = hi.ln();
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn validate_r_grid(space: &PointCloudSpace, r_grid: &[f64]) -> Result<()> {
    if r_grid.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "r_grid",
            message: "need at least three radii for a growth fit".into(),
        });
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "r_grid",
            message: "radii must be strictly increasing".into(),
        });
    }
    let h = space.resolution();
    let lo = r_grid[0];
    let hi = *r_grid.last().unwrap();
    if !(lo > 2.0 * h) {
        return Err(Error::InvalidParameter {
            name: "r_grid",
            message: format!("smallest radius {lo} must exceed 2h = {}", 2.0 * h),
        });
    }
    if !(hi < space.diameter() / 2.0) {
        return Err(Error::InvalidParameter {
            name: "r_grid",
            message: format!(
                "largest radius {hi} must stay below diameter/2 = {}",
                space.diameter() / 2.0
            ),
        });
    }
    Ok(())
}

fn seeded_sample(n: usize, size: usize, seed: u64) -> Vec<u32> {
    let take = size.min(n);
    if take == n {
        return (0..n as u32).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, take)
        .into_iter()
        .map(|i| i as u32)
        .collect::<Vec<_>>();
    picked.sort_unstable();
    picked
}

/// Median of the per-point slopes over the half of the sample whose balls at
/// the largest radius carry the most mass.
///
/// A ball clipped by the edge of a finite model is visibly lighter than a
/// full one at the same radius, and clipping only bends growth curves, so
/// ranking points by that mass and taking the median over the fullest half
/// discards boundary artefacts without needing to know where the boundary
/// is.  Ties break by sample order, so the result is deterministic.
fn trimmed_median(slopes: &[f64], top_masses: &[f64]) -> Result<f64> {
    debug_assert_eq!(slopes.len(), top_masses.len());
    let mut order: Vec<usize> = (0..slopes.len()).collect();
    order.sort_by(|&a, &b| top_masses[b].total_cmp(&top_masses[a]).then(a.cmp(&b)));
    let keep = slopes.len().div_ceil(2);
    let kept: Vec<f64> = order[..keep].iter().map(|&i| slopes[i]).collect();
    fit::median(&kept)
}

/// Fit the volume-growth exponent `N` in `m(B(x,r)) ~ r^N`.
///
/// For each sampled point the ball measures over `r_grid` are fitted by
/// least squares in log–log coordinates; the reported exponent is the median
/// of the slopes over the half of the sample with the heaviest balls at the
/// largest radius (boundary-clipped growth curves rank themselves out).
pub fn estimate_regularity(space: &PointCloudSpace, params: &RegularityParams) -> Result<RegularityReport> {
    validate_r_grid(space, &params.r_grid)?;
    let sample = seeded_sample(space.len(), params.sample_size, params.seed);
    let mut slopes = Vec::with_capacity(sample.len());
    let mut devs = Vec::with_capacity(sample.len());
    let mut top_masses = Vec::with_capacity(sample.len());
    for &x in &sample {
        let measures: Vec<f64> = params
            .r_grid
            .iter()
            .map(|&r| space.measure_ball(x as usize, r))
            .collect::<Result<_>>()?;
        let (slope, intercept) = fit::log_log_slope(&params.r_grid, &measures)?;
        devs.push(fit::max_rel_deviation(&params.r_grid, &measures, slope, intercept));
        top_masses.push(*measures.last().unwrap());
        slopes.push(slope);
    }
    Ok(RegularityReport {
        fitted_exponent: match params.trim {
            TrimPolicy::FullestHalf => trimmed_median(&slopes, &top_masses)?,
            TrimPolicy::None => fit::median(&slopes)?,
        },
        r_range: (params.r_grid[0], *params.r_grid.last().unwrap()),
        max_rel_deviation: devs.iter().copied().fold(0.0, f64::max),
        per_point_slopes: slopes,
        sample,
        truncation_diameter: space.diameter(),
    })
}

/// Fit the quotient exponent `γ` in `m(B(s,r)) / μ(B(s,r)) ~ r^γ`, over balls
/// centred at subset points.
pub fn quotient_exponent(emb: &SubsetEmbedding, params: &RegularityParams) -> Result<RegularityReport> {
    let space = emb.parent().as_ref();
    validate_r_grid(space, &params.r_grid)?;
    let sample_positions = seeded_sample(emb.len(), params.sample_size, params.seed);
    let mut slopes = Vec::with_capacity(sample_positions.len());
    let mut devs = Vec::with_capacity(sample_positions.len());
    let mut top_masses = Vec::with_capacity(sample_positions.len());
    let mut sampled_parents = Vec::with_capacity(sample_positions.len());
    for &k in &sample_positions {
        let centre = emb.indices()[k as usize] as usize;
        sampled_parents.push(centre as u32);
        let quotients: Vec<f64> = params
            .r_grid
            .iter()
            .map(|&r| {
                let m = space.measure_ball(centre, r)?;
                let mu = emb.mu_ball(centre, r)?;
                if mu <= 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "r_grid",
                        message: format!(
                            "ball of radius {r} at subset point {centre} carries no mu-mass"
                        ),
                    });
                }
                Ok(m / mu)
            })
            .collect::<Result<_>>()?;
        let (slope, intercept) = fit::log_log_slope(&params.r_grid, &quotients)?;
        devs.push(fit::max_rel_deviation(&params.r_grid, &quotients, slope, intercept));
        top_masses.push(space.measure_ball(centre, *params.r_grid.last().unwrap())?);
        slopes.push(slope);
    }
    Ok(RegularityReport {
        fitted_exponent: match params.trim {
            TrimPolicy::FullestHalf => trimmed_median(&slopes, &top_masses)?,
            TrimPolicy::None => fit::median(&slopes)?,
        },
        r_range: (params.r_grid[0], *params.r_grid.last().unwrap()),
        max_rel_deviation: devs.iter().copied().fold(0.0, f64::max),
        per_point_slopes: slopes,
        sample: sampled_parents,
        truncation_diameter: space.diameter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_space(n: usize, h: f64) -> PointCloudSpace {
        let coords: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        PointCloudSpace::euclidean(coords, 1, vec![h; n], h).unwrap()
    }

    #[test]
    fn ball_matches_hand_enumeration() {
        // Points at 0, 0.1, 0.2, 0.3, 0.4; open ball of radius 0.15 at 0.2
        // contains exactly {0.1, 0.2, 0.3}.
        let s = line_space(5, 0.1);
        assert_eq!(s.ball(2, 0.15).unwrap(), vec![1, 2, 3]);
        // Strictness: radius exactly 0.1 excludes the neighbours.
        assert_eq!(s.ball(2, 0.1).unwrap(), vec![2]);
    }

    #[test]
    fn ball_always_contains_centre_and_is_pure() {
        let s = line_space(33, 0.125);
        for i in [0usize, 7, 32] {
            let b1 = s.ball(i, 0.3).unwrap();
            let b2 = s.ball(i, 0.3).unwrap();
            assert!(b1.contains(&(i as u32)));
            assert_eq!(b1, b2, "repeated queries must agree exactly");
        }
        let m1 = s.measure_ball(7, 0.3).unwrap();
        let m2 = s.measure_ball(7, 0.3).unwrap();
        assert_eq!(m1.to_bits(), m2.to_bits(), "measure must be bit-for-bit reproducible");
    }

    #[test]
    fn measure_is_weight_sum_independent_of_order() {
        let s = line_space(10, 0.5);
        let a = s.measure(&[3, 1, 7]).unwrap();
        let b = s.measure(&[7, 3, 1, 3]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bucket_index_agrees_with_linear_scan() {
        // 40×40 grid exceeds the bucket threshold; rebuild the same points as
        // a small-space scan oracle by querying distances directly.
        let m = 40usize;
        let h = 1.0 / (m as f64 - 1.0);
        let mut coords = Vec::new();
        for y in 0..m {
            for x in 0..m {
                coords.push(x as f64 * h);
                coords.push(y as f64 * h);
            }
        }
        let s = PointCloudSpace::euclidean(coords, 2, vec![h * h; m * m], h).unwrap();
        for &(centre, r) in &[(0usize, 0.2f64), (820, 0.13), (1599, 0.34), (777, 1.1)] {
            let got = s.ball(centre, r).unwrap();
            let want: Vec<u32> = (0..s.len() as u32)
                .filter(|&j| s.distance(centre, j as usize) < r)
                .collect();
            assert_eq!(got, want, "centre {centre} radius {r}");
        }
    }

    #[test]
    fn distance_matrix_validation() {
        // Asymmetric entry rejected.
        let d = vec![0.0, 1.0, 2.0, 0.0];
        assert!(PointCloudSpace::from_distance_matrix(d, vec![1.0, 1.0], 0.5).is_err());
        // Valid 3-point metric accepted.
        let d = vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
        let s = PointCloudSpace::from_distance_matrix(d, vec![1.0; 3], 0.5).unwrap();
        assert_eq!(s.distance(0, 2), 2.0);
        assert_eq!(s.ball(1, 1.5).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn lattice_detected_for_grid_but_not_offset_cloud() {
        let s = line_space(17, 0.0625);
        assert!(s.lattice().is_some());
        // Same points shifted by an irrational offset: quotients are no
        // longer exact integers.
        let coords: Vec<f64> = (0..17).map(|i| i as f64 * 0.0625 + 0.1234567).collect();
        let t = PointCloudSpace::euclidean(coords, 1, vec![0.0625; 17], 0.0625).unwrap();
        assert!(t.lattice().is_none());
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(PointCloudSpace::euclidean(vec![0.0, 1.0], 1, vec![1.0, 0.0], 0.5).is_err());
        assert!(PointCloudSpace::euclidean(vec![0.0, 1.0], 1, vec![1.0, -1.0], 0.5).is_err());
    }

    #[test]
    fn subset_embedding_validates_and_measures() {
        let s = Arc::new(line_space(9, 0.125));
        let emb = SubsetEmbedding::with_rule(s.clone(), vec![0, 4, 8], MuRule::UniformPerPoint).unwrap();
        assert!((emb.mu_total() - 1.0).abs() < 1e-15);
        // Ball of radius 0.6 around index 4 (=0.5) catches subset points 0.5
        // only (0.0 and 1.0 are at distance 0.5 < 0.6: all three).
        let mu = emb.mu_ball(4, 0.6).unwrap();
        assert!((mu - 1.0).abs() < 1e-15);
        let mu_small = emb.mu_ball(4, 0.4).unwrap();
        assert!((mu_small - 1.0 / 3.0).abs() < 1e-15);
        // Duplicate indices rejected.
        assert!(SubsetEmbedding::with_rule(s, vec![1, 1], MuRule::UniformPerPoint).is_err());
    }

    #[test]
    fn cell_rule_recovers_segment_length() {
        let s = Arc::new(line_space(9, 0.125));
        let emb =
            SubsetEmbedding::with_rule(s, (0..9).collect(), MuRule::LowerDimensionalCell).unwrap();
        // Every nearest-neighbour spacing is h; total ≈ length + one cell.
        assert!((emb.mu_total() - 9.0 * 0.125).abs() < 1e-12);
    }

    #[test]
    fn subset_space_inherits_metric() {
        let s = Arc::new(line_space(9, 0.125));
        let emb = SubsetEmbedding::with_rule(s, vec![0, 2, 4], MuRule::UniformPerPoint).unwrap();
        let f = emb.subset_space().unwrap();
        assert_eq!(f.len(), 3);
        assert!((f.distance(0, 2) - 0.5).abs() < 1e-15);
        assert!((f.resolution() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn regularity_params_reject_coarse_spaces() {
        let s = line_space(3, 0.5);
        assert!(RegularityParams::for_space(&s).is_err());
    }

    #[test]
    fn content_hash_is_stable_and_sensitive() {
        let a = line_space(5, 0.25);
        let b = line_space(5, 0.25);
        assert_eq!(a.content_hash(), b.content_hash());
        let c = line_space(6, 0.25);
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
