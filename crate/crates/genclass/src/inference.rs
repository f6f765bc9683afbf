//! Test-time protocol: per-class prototypes averaged from generated
//! features, pairwise argmax classification, and the per-class top-1 /
//! U-S-H metrics.

use rand::Rng;

use crate::data::{standard_normal, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{GeneratorNet, IntegratedClassifierNet};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub class_ids: Vec<u32>,
    /// One row per class in `class_ids`, each d_x wide.
    pub means: Matrix,
    pub n_g: usize,
    pub checkpoint_fingerprint: String,
}

/// Mean of n_g generated samples per class, fresh noise each sample.
pub fn compute_prototypes(
    generator: &GeneratorNet,
    attributes: &Matrix,
    class_ids: &[u32],
    n_g: usize,
    fingerprint: &str,
    rng: &mut impl Rng,
) -> Result<PrototypeSet> {
    if n_g < 1 {
        return Err(Error::Config("n_g must be >= 1".into()));
    }
    if class_ids.is_empty() {
        return Err(Error::Data("empty class set for prototypes".into()));
    }
    let mut uniq = std::collections::HashSet::new();
    for &c in class_ids {
        if !uniq.insert(c) {
            return Err(Error::Data(format!("duplicate class {c} in prototype set")));
        }
        if c as usize >= attributes.rows() {
            return Err(Error::Data(format!(
                "class {c} has no attribute row (table has {} rows)",
                attributes.rows()
            )));
        }
    }

    let mut means = Matrix::zeros(class_ids.len(), generator.d_x);
    for (row, &c) in class_ids.iter().enumerate() {
        let attr = Matrix::row_vector(attributes.row(c as usize));
        let mut acc = vec![0.0; generator.d_x];
        for _ in 0..n_g {
            let z = Matrix::new(
                1,
                generator.d_z,
                (0..generator.d_z).map(|_| standard_normal(rng)).collect(),
            );
            let sample = generator.forward(&z, &attr)?;
            for (a, &s) in acc.iter_mut().zip(sample.row(0)) {
                *a += s;
            }
        }
        for (col, a) in acc.iter().enumerate() {
            means.set(row, col, a / n_g as f64);
        }
    }
    Ok(PrototypeSet {
        class_ids: class_ids.to_vec(),
        means,
        n_g,
        checkpoint_fingerprint: fingerprint.to_string(),
    })
}

/// Class whose (prototype, query) similarity is maximal; ties break to the
/// smallest class id.
pub fn classify(
    classifier: &IntegratedClassifierNet,
    prototypes: &PrototypeSet,
    query: &[f64],
) -> Result<u32> {
    if prototypes.class_ids.is_empty() {
        return Err(Error::Data("empty prototype set".into()));
    }
    let n = prototypes.class_ids.len();
    let left = prototypes.means.clone();
    let right = Matrix::new(n, query.len(), query.iter().copied().cycle().take(n * query.len()).collect());
    let scores = classifier.forward(&left, &right)?;
    let mut best = (prototypes.class_ids[0], scores.get(0, 0));
    for i in 1..n {
        let s = scores.get(i, 0);
        let c = prototypes.class_ids[i];
        if s > best.1 || (s == best.1 && c < best.0) {
            best = (c, s);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub class_id: u32,
    pub count: usize,
    pub correct: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

/// Per-class accuracy table and the mean over classes with test samples.
pub fn per_class_top1(
    predictions: &[u32],
    labels: &[u32],
    class_set: &[u32],
) -> Result<(Vec<ClassAccuracy>, f64)> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    for &l in labels {
        if !class_set.contains(&l) {
            return Err(Error::Contract(format!("label {l} outside the class set")));
        }
    }
    let mut table: Vec<ClassAccuracy> = class_set
        .iter()
        .map(|&c| ClassAccuracy { class_id: c, count: 0, correct: 0 })
        .collect();
    for (&pred, &label) in predictions.iter().zip(labels) {
        let entry = table.iter_mut().find(|e| e.class_id == label).unwrap();
        entry.count += 1;
        if pred == label {
            entry.correct += 1;
        }
    }
    let accs: Vec<f64> = table.iter().filter_map(|e| e.accuracy()).collect();
    if accs.is_empty() {
        return Err(Error::Data("no class in the set has test samples".into()));
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    Ok((table, mean))
}

pub fn harmonic_mean(u: f64, s: f64) -> f64 {
    if u + s > 0.0 {
        2.0 * u * s / (u + s)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Zsl,
    Gzsl,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Zsl => "zsl",
            EvalMode::Gzsl => "gzsl",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zsl" => Ok(EvalMode::Zsl),
            "gzsl" => Ok(EvalMode::Gzsl),
            other => Err(Error::Config(format!("mode must be 'zsl' or 'gzsl', got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub n_g: usize,
    pub seed: u64,
    pub checkpoint_fingerprint: String,
    pub per_class: Vec<ClassAccuracy>,
    /// ZSL: unseen mean accuracy. GZSL: harmonic mean H.
    pub headline: f64,
    /// GZSL only: (U, S).
    pub unseen_seen: Option<(f64, f64)>,
}

impl EvalReport {
    /// Plain-text rendering: header block, per-class table, summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode = {}\n", self.mode.name()));
        out.push_str(&format!("n_g = {}\n", self.n_g));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("checkpoint_fingerprint = {}\n", self.checkpoint_fingerprint));
        out.push_str("\nclass\tcount\taccuracy\n");
        for entry in &self.per_class {
            match entry.accuracy() {
                Some(acc) => out.push_str(&format!(
                    "{}\t{}\t{:.4}\n",
                    entry.class_id, entry.count, acc
                )),
                None => out.push_str(&format!("{}\t0\t-\n", entry.class_id)),
            }
        }
        out.push('\n');
        match (self.mode, self.unseen_seen) {
            (EvalMode::Zsl, _) => {
                out.push_str(&format!("zsl_accuracy = {:.4}\n", self.headline));
            }
            (EvalMode::Gzsl, Some((u, s))) => {
                out.push_str(&format!(
                    "U = {:.4}\nS = {:.4}\nH = {:.4}\n",
                    u, s, self.headline
                ));
            }
            (EvalMode::Gzsl, None) => unreachable!("gzsl report without U/S"),
        }
        out
    }
}

fn predict_all(
    classifier: &IntegratedClassifierNet,
    prototypes: &PrototypeSet,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<u32>> {
    indices
        .iter()
        .map(|&i| classify(classifier, prototypes, dataset.features.row(i)))
        .collect()
}

/// Unseen-classes-only protocol: prototypes over C_unseen, accuracy on the
/// unseen test split.
pub fn evaluate_zsl(
    generator: &GeneratorNet,
    classifier: &IntegratedClassifierNet,
    dataset: &Dataset,
    n_g: usize,
    seed: u64,
    fingerprint: &str,
) -> Result<EvalReport> {
    if dataset.test_unseen_idx.is_empty() {
        return Err(Error::Data("dataset has no unseen test samples".into()));
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let prototypes = compute_prototypes(
        generator,
        &dataset.attributes,
        &dataset.unseen_classes,
        n_g,
        fingerprint,
        &mut rng,
    )?;
    let predictions = predict_all(classifier, &prototypes, dataset, &dataset.test_unseen_idx)?;
    let labels: Vec<u32> = dataset.test_unseen_idx.iter().map(|&i| dataset.labels[i]).collect();
    let (per_class, mean) = per_class_top1(&predictions, &labels, &dataset.unseen_classes)?;
    Ok(EvalReport {
        mode: EvalMode::Zsl,
        n_g,
        seed,
        checkpoint_fingerprint: fingerprint.to_string(),
        per_class,
        headline: mean,
        unseen_seen: None,
    })
}

/// Joint label space: prototypes over C_seen ∪ C_unseen, U and S computed on
/// the respective test splits, summarized by the harmonic mean.
pub fn evaluate_gzsl(
    generator: &GeneratorNet,
    classifier: &IntegratedClassifierNet,
    dataset: &Dataset,
    n_g: usize,
    seed: u64,
    fingerprint: &str,
) -> Result<EvalReport> {
    if dataset.test_seen_idx.is_empty() {
        return Err(Error::Data(
            "dataset has no seen test samples; generalized evaluation impossible".into(),
        ));
    }
    if dataset.test_unseen_idx.is_empty() {
        return Err(Error::Data("dataset has no unseen test samples".into()));
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut all_classes = dataset.seen_classes.clone();
    all_classes.extend_from_slice(&dataset.unseen_classes);
    let prototypes = compute_prototypes(
        generator,
        &dataset.attributes,
        &all_classes,
        n_g,
        fingerprint,
        &mut rng,
    )?;

    let unseen_preds = predict_all(classifier, &prototypes, dataset, &dataset.test_unseen_idx)?;
    let unseen_labels: Vec<u32> =
        dataset.test_unseen_idx.iter().map(|&i| dataset.labels[i]).collect();
    let (unseen_table, u) = per_class_top1(&unseen_preds, &unseen_labels, &all_classes)?;

    let seen_preds = predict_all(classifier, &prototypes, dataset, &dataset.test_seen_idx)?;
    let seen_labels: Vec<u32> = dataset.test_seen_idx.iter().map(|&i| dataset.labels[i]).collect();
    let (seen_table, s) = per_class_top1(&seen_preds, &seen_labels, &all_classes)?;

    // merge: seen rows from the seen table, unseen rows from the unseen table
    let per_class: Vec<ClassAccuracy> = all_classes
        .iter()
        .map(|&c| {
            let table = if dataset.seen_classes.contains(&c) { &seen_table } else { &unseen_table };
            table.iter().find(|e| e.class_id == c).unwrap().clone()
        })
        .collect();

    Ok(EvalReport {
        mode: EvalMode::Gzsl,
        n_g,
        seed,
        checkpoint_fingerprint: fingerprint.to_string(),
        per_class,
        headline: harmonic_mean(u, s),
        unseen_seen: Some((u, s)),
    })
}

use rand::SeedableRng;
