//! On-disk formats: space and subset descriptions (JSON), sampled
//! functions (CSV, `point_id,value`), and a binary kernel cache keyed by
//! the content hash of its inputs.
//!
//! All numeric fields round-trip exactly: JSON and CSV values are written
//! with shortest-exact float formatting, so reading a file back yields
//! bitwise-identical data (and an identical space content hash).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aoi::{bessel_kernel_from_dense, BesselKernel, CalculusConfig};
use crate::besov::DiscreteFunction;
use crate::error::{Error, Result};
use crate::quad::LogGrid;
use crate::space::{Metric, MuRule, PointCloudSpace, SubsetEmbedding};

/// JSON document describing a space: Euclidean coordinates or an explicit
/// distance matrix, plus weights and the nominal resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    /// Coordinate rows for Euclidean metrics; `null` for matrix metrics.
    pub points: Option<Vec<Vec<f64>>>,
    /// `"euclidean"` or `"matrix"`.
    pub metric: String,
    /// Full symmetric distance matrix, rows of length `n`; only for
    /// `"matrix"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<Vec<Vec<f64>>>,
    /// Measure of the cell each point represents.
    pub weights: Vec<f64>,
    /// Nominal minimum inter-point spacing.
    pub resolution: f64,
}

impl SpaceFile {
    /// Describe an existing space.
    pub fn from_space(space: &PointCloudSpace) -> Self {
        match space.metric() {
            Metric::Euclidean { .. } => {
                let dim = space.dim().expect("euclidean space has a dimension");
                let points = space
                    .coords()
                    .expect("euclidean space has coordinates")
                    .chunks(dim)
                    .map(|c| c.to_vec())
                    .collect();
                SpaceFile {
                    points: Some(points),
                    metric: "euclidean".into(),
                    distance_matrix: None,
                    weights: space.weights().to_vec(),
                    resolution: space.resolution(),
                }
            }
            Metric::Matrix { .. } => {
                let n = space.len();
                let matrix = (0..n)
                    .map(|i| (0..n).map(|j| space.distance(i, j)).collect())
                    .collect();
                SpaceFile {
                    points: None,
                    metric: "matrix".into(),
                    distance_matrix: Some(matrix),
                    weights: space.weights().to_vec(),
                    resolution: space.resolution(),
                }
            }
        }
    }

    /// Validate the document and construct the space it describes.
    pub fn into_space(self) -> Result<Arc<PointCloudSpace>> {
        let n = self.weights.len();
        match self.metric.as_str() {
            "euclidean" => {
                let points = self.points.ok_or_else(|| {
                    Error::MalformedFile("metric is \"euclidean\" but \"points\" is null".into())
                })?;
                if points.len() != n {
                    return Err(Error::MalformedFile(format!(
                        "{} coordinate rows but {n} weights",
                        points.len()
                    )));
                }
                let dim = points.first().map(Vec::len).unwrap_or(0);
                let mut coords = Vec::with_capacity(n * dim);
                for (i, row) in points.iter().enumerate() {
                    if row.len() != dim {
                        return Err(Error::MalformedFile(format!(
                            "coordinate row {i} has {} entries, expected {dim}",
                            row.len()
                        )));
                    }
                    coords.extend_from_slice(row);
                }
                Ok(Arc::new(PointCloudSpace::euclidean(
                    coords,
                    dim,
                    self.weights,
                    self.resolution,
                )?))
            }
            "matrix" => {
                let rows = self.distance_matrix.ok_or_else(|| {
                    Error::MalformedFile(
                        "metric is \"matrix\" but \"distance_matrix\" is missing".into(),
                    )
                })?;
                if rows.len() != n {
                    return Err(Error::MalformedFile(format!(
                        "{} distance rows but {n} weights",
                        rows.len()
                    )));
                }
                let mut distances = Vec::with_capacity(n * n);
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::MalformedFile(format!(
                            "distance row {i} has {} entries, expected {n}",
                            row.len()
                        )));
                    }
                    distances.extend_from_slice(row);
                }
                Ok(Arc::new(PointCloudSpace::from_distance_matrix(
                    distances,
                    self.weights,
                    self.resolution,
                )?))
            }
            other => Err(Error::MalformedFile(format!(
                "unknown metric \"{other}\" (expected \"euclidean\" or \"matrix\")"
            ))),
        }
    }
}

/// Read a space from a JSON file.
pub fn read_space(path: impl AsRef<Path>) -> Result<Arc<PointCloudSpace>> {
    let text = fs::read_to_string(path)?;
    let file: SpaceFile = serde_json::from_str(&text)?;
    file.into_space()
}

/// Write a space to a JSON file (pretty-printed, stable field order).
pub fn write_space(space: &PointCloudSpace, path: impl AsRef<Path>) -> Result<()> {
    let file = SpaceFile::from_space(space);
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// JSON document describing a subset of a parent space together with its
/// own measure.  Either explicit weights (`mu`) or a named rule must be
/// given; explicit weights take precedence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetFile {
    /// Parent-space indices of the subset points.
    pub indices: Vec<u32>,
    /// Explicit measure weights, one per index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Named measure rule: `"uniform-per-point"`, `"lower-dimensional-cell"`
    /// or `"parent-measure"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_rule: Option<String>,
    /// Known scaling exponent of the subset measure, when the caller has
    /// one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SubsetFile {
    /// Describe an existing embedding with its explicit weights.
    pub fn from_embedding(embedding: &SubsetEmbedding) -> Self {
        SubsetFile {
            indices: embedding.indices().to_vec(),
            mu: Some(embedding.mu_weights().to_vec()),
            mu_rule: None,
            gamma: embedding.gamma(),
        }
    }

    /// Validate the document and build the embedding over `parent`.
    pub fn into_embedding(self, parent: &Arc<PointCloudSpace>) -> Result<SubsetEmbedding> {
        let embedding = if let Some(mu) = self.mu {
            SubsetEmbedding::new(Arc::clone(parent), self.indices, mu)?
        } else {
            let rule = match self.mu_rule.as_deref() {
                Some("uniform-per-point") => MuRule::UniformPerPoint,
                Some("lower-dimensional-cell") => MuRule::LowerDimensionalCell,
                Some("parent-measure") => MuRule::ParentMeasure,
                Some(other) => {
                    return Err(Error::MalformedFile(format!(
                        "unknown mu_rule \"{other}\" (expected \"uniform-per-point\", \
                         \"lower-dimensional-cell\" or \"parent-measure\")"
                    )))
                }
                None => {
                    return Err(Error::MalformedFile(
                        "subset file needs either \"mu\" or \"mu_rule\"".into(),
                    ))
                }
            };
            SubsetEmbedding::with_rule(Arc::clone(parent), self.indices, rule)?
        };
        Ok(match self.gamma {
            Some(g) => embedding.with_gamma(g),
            None => embedding,
        })
    }
}

/// Read a subset embedding from a JSON file, attaching it to `parent`.
pub fn read_subset(
    path: impl AsRef<Path>,
    parent: &Arc<PointCloudSpace>,
) -> Result<SubsetEmbedding> {
    let text = fs::read_to_string(path)?;
    let file: SubsetFile = serde_json::from_str(&text)?;
    file.into_embedding(parent)
}

/// Write a subset embedding to a JSON file with its explicit weights.
pub fn write_subset(embedding: &SubsetEmbedding, path: impl AsRef<Path>) -> Result<()> {
    let file = SubsetFile::from_embedding(embedding);
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Read a sampled function from CSV rows `point_id,value`.  A header row is
/// optional; every point of `space` must receive exactly one value.
pub fn read_function(
    path: impl AsRef<Path>,
    space: &Arc<PointCloudSpace>,
) -> Result<DiscreteFunction> {
    let text = fs::read_to_string(path)?;
    parse_function(&text, space)
}

/// [`read_function`] on an in-memory document.
pub fn parse_function(text: &str, space: &Arc<PointCloudSpace>) -> Result<DiscreteFunction> {
    let n = space.len();
    let mut values = vec![0.0f64; n];
    let mut seen = vec![false; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id_field, value_field) = line.split_once(',').ok_or_else(|| {
            Error::MalformedFile(format!("line {}: expected `point_id,value`", lineno + 1))
        })?;
        let id_field = id_field.trim();
        if lineno == 0 && id_field.parse::<usize>().is_err() {
            // Header row.
            continue;
        }
        let id: usize = id_field.parse().map_err(|_| {
            Error::MalformedFile(format!("line {}: bad point id `{id_field}`", lineno + 1))
        })?;
        let value: f64 = value_field.trim().parse().map_err(|_| {
            Error::MalformedFile(format!(
                "line {}: bad value `{}`",
                lineno + 1,
                value_field.trim()
            ))
        })?;
        if id >= n {
            return Err(Error::IndexOutOfRange { index: id, len: n });
        }
        if seen[id] {
            return Err(Error::MalformedFile(format!(
                "line {}: duplicate value for point {id}",
                lineno + 1
            )));
        }
        seen[id] = true;
        values[id] = value;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::MalformedFile(format!(
            "no value for point {missing} (space has {n} points)"
        )));
    }
    DiscreteFunction::new(Arc::clone(space), values)
}

/// Write a sampled function as CSV rows `point_id,value` with a header.
pub fn write_function(f: &DiscreteFunction, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, function_to_csv(f))?;
    Ok(())
}

/// [`write_function`] to an in-memory document.
pub fn function_to_csv(f: &DiscreteFunction) -> String {
    let mut out = String::from("point_id,value\n");
    for (i, v) in f.values().iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

// ───────────────────────── kernel cache ─────────────────────────

const KERNEL_CACHE_MAGIC: &[u8; 8] = b"MBKCACH1";

/// The cache identity of a kernel: a digest of the space content hash, the
/// smoothness order, and the scale-quadrature grid.
pub fn kernel_cache_key(space: &PointCloudSpace, alpha: f64, grid: &LogGrid) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(space.content_hash().as_bytes());
    hasher.update(alpha.to_le_bytes());
    hasher.update(grid.t_min.to_le_bytes());
    hasher.update(grid.t_max.to_le_bytes());
    hasher.update((grid.nodes as u64).to_le_bytes());
    hasher.finalize().into()
}

/// Store a dense kernel to a binary cache file keyed by its inputs.
pub fn write_kernel_cache(kernel: &BesselKernel, path: impl AsRef<Path>) -> Result<()> {
    let mat = kernel.dense_matrix().ok_or_else(|| Error::InvalidParameter {
        name: "kernel",
        message: "only dense kernels can be cached".into(),
    })?;
    let space = kernel.space();
    let grid = kernel.grid();
    let key = kernel_cache_key(space, kernel.alpha, grid);
    let mut file = fs::File::create(path)?;
    file.write_all(KERNEL_CACHE_MAGIC)?;
    file.write_all(&key)?;
    file.write_all(&kernel.alpha.to_le_bytes())?;
    file.write_all(&grid.t_min.to_le_bytes())?;
    file.write_all(&grid.t_max.to_le_bytes())?;
    file.write_all(&(grid.nodes as u64).to_le_bytes())?;
    file.write_all(&(space.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(mat.len() * 8);
    for v in mat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_f64(file: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    file.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64(file: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    file.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Load a cached kernel, verifying that it was built for exactly this
/// space, order and quadrature configuration; the row-sum validation of the
/// assembler is re-run on the stored entries.
pub fn read_kernel_cache(
    path: impl AsRef<Path>,
    space: &Arc<PointCloudSpace>,
    alpha: f64,
    config: &CalculusConfig,
) -> Result<BesselKernel> {
    let grid = config.quadrature_grid()?;
    let expected_key = kernel_cache_key(space, alpha, &grid);
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != KERNEL_CACHE_MAGIC {
        return Err(Error::MalformedFile(
            "not a kernel cache file (bad magic)".into(),
        ));
    }
    let mut key = [0u8; 32];
    file.read_exact(&mut key)?;
    if key != expected_key {
        return Err(Error::MalformedFile(
            "kernel cache was built for a different space, order or quadrature grid".into(),
        ));
    }
    let stored_alpha = read_f64(&mut file)?;
    let t_min = read_f64(&mut file)?;
    let t_max = read_f64(&mut file)?;
    let nodes = read_u64(&mut file)? as usize;
    let n = read_u64(&mut file)? as usize;
    if stored_alpha != alpha || n != space.len() {
        return Err(Error::MalformedFile(
            "kernel cache header disagrees with its key".into(),
        ));
    }
    let stored_grid = LogGrid::new(t_min, t_max, nodes)?;
    let mut buf = vec![0u8; n * n * 8];
    file.read_exact(&mut buf)?;
    let mat: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    bessel_kernel_from_dense(space, alpha, stored_grid, mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi::bessel_kernel;
    use crate::ensemble::seeded_noise;
    use crate::generators::{grid_space, grid_with_bottom_edge};

    #[test]
    fn euclidean_space_round_trips_bitwise() {
        let space = grid_space(2, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("space.json");
        write_space(&space, &path).unwrap();
        let back = read_space(&path).unwrap();
        assert_eq!(back.len(), space.len());
        assert_eq!(back.content_hash(), space.content_hash());
    }

    #[test]
    fn matrix_space_round_trips_bitwise() {
        let distances = vec![
            0.0, 1.0, 2.0, //
            1.0, 0.0, 1.5, //
            2.0, 1.5, 0.0,
        ];
        let space = Arc::new(
            PointCloudSpace::from_distance_matrix(distances, vec![1.0, 1.0, 1.0], 1.0).unwrap(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("space.json");
        write_space(&space, &path).unwrap();
        let back = read_space(&path).unwrap();
        assert_eq!(back.content_hash(), space.content_hash());
        assert_eq!(back.distance(0, 2), 2.0);
    }

    #[test]
    fn malformed_space_documents_are_rejected() {
        let cases = [
            r#"{"points": null, "metric": "euclidean", "weights": [1.0], "resolution": 1.0}"#,
            r#"{"points": null, "metric": "matrix", "weights": [1.0], "resolution": 1.0}"#,
            r#"{"points": [[0.0]], "metric": "taxicab", "weights": [1.0], "resolution": 1.0}"#,
            r#"{"points": [[0.0],[1.0]], "metric": "euclidean", "weights": [1.0], "resolution": 1.0}"#,
            r#"{"points": [[0.0],[1.0, 2.0]], "metric": "euclidean", "weights": [1.0, 1.0], "resolution": 1.0}"#,
        ];
        for text in cases {
            let file: SpaceFile = serde_json::from_str(text).unwrap();
            assert!(file.into_space().is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn subset_documents_round_trip_and_validate() {
        let embedding = grid_with_bottom_edge(3).unwrap().with_gamma(1.0);
        let parent = Arc::clone(embedding.parent());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("subset.json");
        write_subset(&embedding, &path).unwrap();
        let back = read_subset(&path, &parent).unwrap();
        assert_eq!(back.indices(), embedding.indices());
        assert_eq!(back.mu_weights(), embedding.mu_weights());
        assert_eq!(back.gamma(), Some(1.0));

        let by_rule = SubsetFile {
            indices: embedding.indices().to_vec(),
            mu: None,
            mu_rule: Some("lower-dimensional-cell".into()),
            gamma: None,
        };
        let built = by_rule.into_embedding(&parent).unwrap();
        assert_eq!(built.len(), embedding.len());

        let bad_rule = SubsetFile {
            indices: vec![0, 1],
            mu: None,
            mu_rule: Some("made-up".into()),
            gamma: None,
        };
        assert!(matches!(
            bad_rule.into_embedding(&parent),
            Err(Error::MalformedFile(_))
        ));
        let no_measure = SubsetFile {
            indices: vec![0, 1],
            mu: None,
            mu_rule: None,
            gamma: None,
        };
        assert!(matches!(
            no_measure.into_embedding(&parent),
            Err(Error::MalformedFile(_))
        ));
    }

    #[test]
    fn function_csv_round_trips_bitwise() {
        let space = grid_space(1, 4).unwrap();
        let f = seeded_noise(&space, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_function(&f, &path).unwrap();
        let back = read_function(&path, &space).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn function_csv_accepts_headerless_and_shuffled_rows() {
        let space = grid_space(1, 1).unwrap();
        let f = parse_function("2,0.5\n0,-1\n1,3e-2\n", &space).unwrap();
        assert_eq!(f.values(), &[-1.0, 0.03, 0.5]);
    }

    #[test]
    fn function_csv_rejects_bad_documents() {
        let space = grid_space(1, 1).unwrap(); // 3 points
        let cases = [
            "point_id,value\n0,1\n1,2\n",          // missing point 2
            "point_id,value\n0,1\n1,2\n1,3\n",     // duplicate
            "point_id,value\n0,1\n1,2\n5,3\n",     // out of range
            "point_id,value\n0,1\n1,2\n2,zebra\n", // bad value
            "point_id,value\n0,1\n1,2\n2;3\n",     // bad separator
        ];
        for text in cases {
            assert!(parse_function(text, &space).is_err(), "accepted: {text:?}");
        }
    }

    #[test]
    fn kernel_cache_round_trips_and_verifies_its_key() {
        let space = grid_space(1, 4).unwrap();
        let config = CalculusConfig::default();
        let kernel = bessel_kernel(&space, 0.5, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        write_kernel_cache(&kernel, &path).unwrap();

        let back = read_kernel_cache(&path, &space, 0.5, &config).unwrap();
        let f = seeded_noise(&space, 3).unwrap();
        let original = crate::aoi::potential(&kernel, &f).unwrap();
        let reloaded = crate::aoi::potential(&back, &f).unwrap();
        assert_eq!(original.values(), reloaded.values());

        // Wrong order, wrong space, or a truncated file must all refuse.
        assert!(read_kernel_cache(&path, &space, 0.4, &config).is_err());
        let other = grid_space(1, 3).unwrap();
        assert!(read_kernel_cache(&path, &other, 0.5, &config).is_err());
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_kernel_cache(&path, &space, 0.5, &config).is_err());
    }
}
