//! Dataset container, on-disk formats, validation, and the synthetic
//! desk-scale dataset generator.
//!
//! Matrix files: magic "GCMX", one precision byte (4 or 8 = value width),
//! u32-le rows, u32-le cols, then row-major IEEE values. Label files: magic
//! "GCLB", u32-le count, u32-le ids. All integers little-endian. The manifest
//! is UTF-8 `key = value` text; long index lists may live in @-referenced
//! side files.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MATRIX_MAGIC: &[u8; 4] = b"GCMX";
const LABELS_MAGIC: &[u8; 4] = b"GCLB";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn width(self) -> u8 {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    pub fn from_width(w: u8, path: &Path) -> Result<Self> {
        match w {
            4 => Ok(Precision::Single),
            8 => Ok(Precision::Double),
            other => Err(Error::Data(format!(
                "{}: invalid precision byte {other} (expected 4 or 8)",
                path.display()
            ))),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            other => Err(Error::Config(format!(
                "precision must be 'single' or 'double', got '{other}'"
            ))),
        }
    }
}

// ── matrix container ───────────────────────────────────────────────

pub fn write_matrix(path: &Path, m: &Matrix, precision: Precision) -> Result<()> {
    let mut buf = Vec::with_capacity(13 + m.len() * precision.width() as usize);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.push(precision.width());
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    match precision {
        Precision::Double => {
            for &v in m.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Precision::Single => {
            for &v in m.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_matrix(path: &Path) -> Result<(Matrix, Precision)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 13 {
        return Err(Error::Data(format!(
            "{}: truncated header, {} bytes but at least 13 required",
            path.display(),
            bytes.len()
        )));
    }
    if &bytes[0..4] != MATRIX_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {:?}, expected \"GCMX\"",
            path.display(),
            &bytes[0..4]
        )));
    }
    let precision = Precision::from_width(bytes[4], path)?;
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let width = precision.width() as usize;
    let expected = 13 + rows * cols * width;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: expected {expected} bytes for {rows}x{cols} values, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[13..].chunks_exact(width) {
        data.push(match precision {
            Precision::Double => f64::from_le_bytes(chunk.try_into().unwrap()),
            Precision::Single => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
        });
    }
    Ok((Matrix::new(rows, cols, data), precision))
}

// ── label container ────────────────────────────────────────────────

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len() * 4);
    buf.extend_from_slice(LABELS_MAGIC);
    buf.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for &l in labels {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 8 {
        return Err(Error::Data(format!(
            "{}: truncated header, {} bytes but at least 8 required",
            path.display(),
            bytes.len()
        )));
    }
    if &bytes[0..4] != LABELS_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {:?}, expected \"GCLB\"",
            path.display(),
            &bytes[0..4]
        )));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + count * 4;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: expected {expected} bytes for {count} labels, found {}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[8..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

// ── dataset ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N x d_x, entries >= 0.
    pub features: Matrix,
    /// N class ids, 0-based.
    pub labels: Vec<u32>,
    /// (K+L) x d_a, row per class id.
    pub attributes: Matrix,
    pub seen_classes: Vec<u32>,
    pub unseen_classes: Vec<u32>,
    pub train_idx: Vec<usize>,
    pub test_unseen_idx: Vec<usize>,
    /// Empty for ZSL-only data.
    pub test_seen_idx: Vec<usize>,
}

impl Dataset {
    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn attribute_row(&self, class: u32) -> &[f64] {
        self.attributes.row(class as usize)
    }

    /// Every invariant violation, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let seen: HashSet<u32> = self.seen_classes.iter().copied().collect();
        let unseen: HashSet<u32> = self.unseen_classes.iter().copied().collect();

        let overlap: Vec<u32> = seen.intersection(&unseen).copied().collect();
        if !overlap.is_empty() {
            violations.push(format!(
                "seen_classes and unseen_classes overlap on {overlap:?}"
            ));
        }
        if self.labels.len() != self.features.rows() {
            violations.push(format!(
                "{} labels but {} feature rows",
                self.labels.len(),
                self.features.rows()
            ));
        }
        let n_classes = self.attributes.rows();
        for &c in seen.iter().chain(unseen.iter()) {
            if c as usize >= n_classes {
                violations.push(format!(
                    "class {c} has no attribute row (attribute table has {n_classes} rows)"
                ));
            }
        }
        for (name, idxs, allowed) in [
            ("train_idx", &self.train_idx, &seen),
            ("test_seen_idx", &self.test_seen_idx, &seen),
            ("test_unseen_idx", &self.test_unseen_idx, &unseen),
        ] {
            for &i in idxs.iter() {
                if i >= self.labels.len() {
                    violations.push(format!("{name}: index {i} out of range"));
                } else if !allowed.contains(&self.labels[i]) {
                    violations.push(format!(
                        "{name}: index {i} has label {} outside its class list",
                        self.labels[i]
                    ));
                }
            }
        }
        let train: HashSet<usize> = self.train_idx.iter().copied().collect();
        let clash: Vec<usize> = self
            .test_seen_idx
            .iter()
            .copied()
            .filter(|i| train.contains(i))
            .collect();
        if !clash.is_empty() {
            violations.push(format!(
                "train_idx and test_seen_idx share indices {clash:?}"
            ));
        }
        if let Some(v) = self.features.data().iter().find(|v| **v < 0.0) {
            violations.push(format!("features contain negative entry {v}"));
        }
        violations
    }

    pub fn save(&self, dir: &Path, precision: Precision) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_matrix(&dir.join("features.gcmx"), &self.features, precision)?;
        write_matrix(&dir.join("attributes.gcmx"), &self.attributes, precision)?;
        write_labels(&dir.join("labels.gclb"), &self.labels)?;

        let cls_to_string =
            |v: &[u32]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");

        write_index_file(&dir.join("train_idx.txt"), &self.train_idx)?;
        write_index_file(&dir.join("test_seen_idx.txt"), &self.test_seen_idx)?;
        write_index_file(&dir.join("test_unseen_idx.txt"), &self.test_unseen_idx)?;

        let manifest = format!(
            "features = features.gcmx\n\
             labels = labels.gclb\n\
             attributes = attributes.gcmx\n\
             seen_classes = {}\n\
             unseen_classes = {}\n\
             train_idx = @train_idx.txt\n\
             test_seen_idx = @test_seen_idx.txt\n\
             test_unseen_idx = @test_unseen_idx.txt\n",
            cls_to_string(&self.seen_classes),
            cls_to_string(&self.unseen_classes),
        );
        let mpath = dir.join("manifest.txt");
        fs::write(&mpath, manifest).map_err(|e| Error::io(mpath.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let mpath = dir.join("manifest.txt");
        let text =
            fs::read_to_string(&mpath).map_err(|e| Error::io(mpath.display().to_string(), e))?;
        let kv = parse_manifest(&text, &mpath)?;
        let need = |key: &str| -> Result<&String> {
            kv.get(key).ok_or_else(|| {
                Error::Data(format!("{}: missing required key '{key}'", mpath.display()))
            })
        };

        let (features, _) = read_matrix(&dir.join(need("features")?))?;
        let (attributes, _) = read_matrix(&dir.join(need("attributes")?))?;
        let labels = read_labels(&dir.join(need("labels")?))?;
        let seen_classes = parse_u32_list(need("seen_classes")?, dir, &mpath)?;
        let unseen_classes = parse_u32_list(need("unseen_classes")?, dir, &mpath)?;
        let train_idx = parse_usize_list(need("train_idx")?, dir, &mpath)?;
        let test_seen_idx = parse_usize_list(need("test_seen_idx")?, dir, &mpath)?;
        let test_unseen_idx = parse_usize_list(need("test_unseen_idx")?, dir, &mpath)?;

        let ds = Dataset {
            features,
            labels,
            attributes,
            seen_classes,
            unseen_classes,
            train_idx,
            test_unseen_idx,
            test_seen_idx,
        };
        let violations = ds.validate();
        if !violations.is_empty() {
            return Err(Error::Data(format!(
                "{}: dataset invariants violated: {}",
                dir.display(),
                violations.join("; ")
            )));
        }
        Ok(ds)
    }

    /// SHA-256 over the manifest and every file it references, in manifest
    /// order. Changes iff any byte of any file changes.
    pub fn content_hash(dir: &Path) -> Result<String> {
        let mpath = dir.join("manifest.txt");
        let text =
            fs::read_to_string(&mpath).map_err(|e| Error::io(mpath.display().to_string(), e))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let kv = parse_manifest(&text, &mpath)?;
        let mut referenced: Vec<PathBuf> = Vec::new();
        for key in ["features", "labels", "attributes"] {
            if let Some(v) = kv.get(key) {
                referenced.push(dir.join(v));
            }
        }
        for key in ["train_idx", "test_seen_idx", "test_unseen_idx"] {
            if let Some(v) = kv.get(key) {
                if let Some(f) = v.strip_prefix('@') {
                    referenced.push(dir.join(f));
                }
            }
        }
        for path in referenced {
            let bytes = fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            hasher.update(&bytes);
        }
        Ok(hex::encode(hasher.finalize()))
    }
}

fn write_index_file(path: &Path, idx: &[usize]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn parse_manifest(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Data(format!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                lineno + 1
            )));
        };
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

fn read_list_text(value: &str, dir: &Path) -> Result<String> {
    if let Some(file) = value.strip_prefix('@') {
        let path = dir.join(file);
        let mut s = String::new();
        fs::File::open(&path)
            .and_then(|mut f| f.read_to_string(&mut s))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(s)
    } else {
        Ok(value.to_string())
    }
}

fn parse_u32_list(value: &str, dir: &Path, mpath: &Path) -> Result<Vec<u32>> {
    let text = read_list_text(value, dir)?;
    text.split([',', '\n', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>().map_err(|_| {
                Error::Data(format!("{}: invalid class id '{s}'", mpath.display()))
            })
        })
        .collect()
}

fn parse_usize_list(value: &str, dir: &Path, mpath: &Path) -> Result<Vec<usize>> {
    let text = read_list_text(value, dir)?;
    text.split([',', '\n', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Data(format!("{}: invalid index '{s}'", mpath.display())))
        })
        .collect()
}

// ── synthetic generator ────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub d_a: usize,
    pub d_x: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seen_classes: 8,
            unseen_classes: 4,
            d_a: 8,
            d_x: 16,
            train_per_class: 60,
            test_per_class: 20,
            noise_scale: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seen_classes < 2 {
            return Err(Error::Config(format!(
                "seen class count must be >= 2, got {}",
                self.seen_classes
            )));
        }
        if self.unseen_classes < 2 {
            return Err(Error::Config(format!(
                "unseen class count must be >= 2, got {}",
                self.unseen_classes
            )));
        }
        if self.noise_scale <= 0.0 {
            return Err(Error::Config(format!(
                "noise scale must be > 0, got {}",
                self.noise_scale
            )));
        }
        if self.d_a == 0 || self.d_x == 0 {
            return Err(Error::Config("d_a and d_x must be positive".into()));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("samples per class must be positive".into()));
        }
        Ok(())
    }
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Class means along with the dataset, for oracle checks.
pub fn make_synthetic_with_means(spec: &SyntheticSpec) -> Result<(Dataset, Matrix)> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let total = spec.seen_classes + spec.unseen_classes;

    // per-class attributes: |N(0,1)| entries
    let attributes = Matrix::new(
        total,
        spec.d_a,
        (0..total * spec.d_a).map(|_| standard_normal(&mut rng).abs()).collect(),
    );
    // fixed mixing matrix, mean_c = relu(W a_c)
    let w = Matrix::new(
        spec.d_x,
        spec.d_a,
        (0..spec.d_x * spec.d_a).map(|_| standard_normal(&mut rng)).collect(),
    );
    let means = attributes.matmul(&w.transpose()).map(|v| v.max(0.0));

    let mut features_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut train_idx = Vec::new();
    let mut test_seen_idx = Vec::new();
    let mut test_unseen_idx = Vec::new();

    let emit = |class: u32,
                    count: usize,
                    sink: &mut Vec<usize>,
                    rng: &mut ChaCha12Rng,
                    rows: &mut Vec<Vec<f64>>,
                    labels: &mut Vec<u32>| {
        let mu = means.row(class as usize);
        let norm = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = spec.noise_scale * norm / (spec.d_x as f64).sqrt();
        for _ in 0..count {
            let row: Vec<f64> = mu
                .iter()
                .map(|&m| (m + scale * standard_normal(rng)).max(0.0))
                .collect();
            sink.push(rows.len());
            rows.push(row);
            labels.push(class);
        }
    };

    for c in 0..spec.seen_classes as u32 {
        emit(c, spec.train_per_class, &mut train_idx, &mut rng, &mut features_rows, &mut labels);
        emit(c, spec.test_per_class, &mut test_seen_idx, &mut rng, &mut features_rows, &mut labels);
    }
    for c in spec.seen_classes as u32..total as u32 {
        emit(
            c,
            spec.test_per_class,
            &mut test_unseen_idx,
            &mut rng,
            &mut features_rows,
            &mut labels,
        );
    }

    let ds = Dataset {
        features: Matrix::from_rows(&features_rows),
        labels,
        attributes,
        seen_classes: (0..spec.seen_classes as u32).collect(),
        unseen_classes: (spec.seen_classes as u32..total as u32).collect(),
        train_idx,
        test_unseen_idx,
        test_seen_idx,
    };
    Ok((ds, means))
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    make_synthetic_with_means(spec).map(|(ds, _)| ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn matrix_roundtrip_double_is_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.gcmx");
        let m = Matrix::from_rows(&[vec![1.5, -2.25], vec![0.0, 1e-300]]);
        write_matrix(&path, &m, Precision::Double).unwrap();
        let (back, p) = read_matrix(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(p, Precision::Double);
    }

    #[test]
    fn matrix_single_precision_narrows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.gcmx");
        let m = Matrix::from_rows(&[vec![0.5, 0.25]]);
        write_matrix(&path, &m, Precision::Single).unwrap();
        let (back, p) = read_matrix(&path).unwrap();
        assert_eq!(p, Precision::Single);
        assert_eq!(back, m); // exactly representable in f32
    }

    #[test]
    fn truncated_matrix_names_byte_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.gcmx");
        let m = Matrix::ones(2, 2);
        write_matrix(&path, &m, Precision::Double).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        fs::write(&path, bytes).unwrap();
        let err = read_matrix(&path).unwrap_err().to_string();
        assert!(err.contains("bytes"), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.gcmx");
        fs::write(&path, b"XXXX\x08aaaaaaaaaaaa").unwrap();
        let err = read_matrix(&path).unwrap_err().to_string();
        assert!(err.contains("GCMX"), "{err}");
    }

    #[test]
    fn labels_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("l.gclb");
        let labels = vec![0u32, 7, 42, u32::MAX];
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path).unwrap(), labels);
    }

    #[test]
    fn synthetic_is_deterministic_and_valid() {
        let spec = SyntheticSpec::default();
        let a = make_synthetic(&spec).unwrap();
        let b = make_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_empty());
        assert!(a.features.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn synthetic_spec_invariants() {
        let mut spec = SyntheticSpec::default();
        spec.seen_classes = 1;
        assert!(make_synthetic(&spec).is_err());
        let mut spec = SyntheticSpec::default();
        spec.noise_scale = 0.0;
        assert!(make_synthetic(&spec).is_err());
    }

    #[test]
    fn dataset_roundtrip_is_bitwise() {
        let spec = SyntheticSpec::default();
        let ds = make_synthetic(&spec).unwrap();
        let dir = tempdir().unwrap();
        ds.save(dir.path(), Precision::Double).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn content_hash_changes_with_any_byte() {
        let ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        let dir = tempdir().unwrap();
        ds.save(dir.path(), Precision::Double).unwrap();
        let h1 = Dataset::content_hash(dir.path()).unwrap();
        // flip one byte inside the features payload
        let fpath = dir.path().join("features.gcmx");
        let mut bytes = fs::read(&fpath).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xFF;
        fs::write(&fpath, bytes).unwrap();
        let h2 = Dataset::content_hash(dir.path()).unwrap();
        assert_ne!(h1, h2);
    }

    #[test]
    fn train_index_with_unseen_label_rejected() {
        let mut ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        let unseen_sample = ds.test_unseen_idx[0];
        ds.train_idx.push(unseen_sample);
        let violations = ds.validate();
        assert_eq!(violations.len(), 1, "{violations:?}");

        let dir = tempdir().unwrap();
        ds.save(dir.path(), Precision::Double).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Data(_))));
    }

    #[test]
    fn overlapping_class_lists_named_in_violation() {
        let mut ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        ds.unseen_classes.push(ds.seen_classes[0]);
        let violations = ds.validate();
        assert!(violations.iter().any(|v| v.contains("overlap")), "{violations:?}");
    }

    #[test]
    fn nearest_class_mean_oracle_on_unseen() {
        // sigma = 0.05 keeps classes separable: a nearest-true-mean classifier
        // must get >= 95% of unseen test samples right
        let spec = SyntheticSpec::default();
        let (ds, means) = make_synthetic_with_means(&spec).unwrap();
        let mut correct = 0usize;
        for &i in &ds.test_unseen_idx {
            let x = ds.features.row(i);
            let best = ds
                .unseen_classes
                .iter()
                .map(|&c| {
                    let mu = means.row(c as usize);
                    let d: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                    (c, d)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            if best == ds.labels[i] {
                correct += 1;
            }
        }
        let acc = correct as f64 / ds.test_unseen_idx.len() as f64;
        assert!(acc >= 0.95, "nearest-mean accuracy {acc}");
    }
}
