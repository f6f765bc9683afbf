//! Alternative classifier head: a linear softmax model trained by
//! cross-entropy on generated features, evaluated with the same metrics and
//! report format as the pairwise classifier.

use rand::Rng;

use crate::data::{standard_normal, Dataset};
use crate::error::{Error, Result};
use crate::inference::{harmonic_mean, per_class_top1, EvalMode, EvalReport};
use crate::matrix::Matrix;
use crate::models::{AdamState, GeneratorNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftmaxOptimizer {
    Adam,
    /// Plain full-batch gradient descent; loss is provably nonincreasing at a
    /// small enough rate, used as a sanity mode.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub steps: u64,
    pub optimizer: SoftmaxOptimizer,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig { learning_rate: 1e-3, steps: 500, optimizer: SoftmaxOptimizer::Adam }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// d_x x |C|
    pub w: Matrix,
    /// 1 x |C|
    pub b: Matrix,
    pub class_ids: Vec<u32>,
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row_max =
            (0..out.cols()).map(|c| out.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..out.cols() {
            let e = (out.get(r, c) - row_max).exp();
            out.set(r, c, e);
            sum += e;
        }
        for c in 0..out.cols() {
            out.set(r, c, out.get(r, c) / sum);
        }
    }
    out
}

impl SoftmaxClassifier {
    /// Row-wise class probabilities (each row sums to 1).
    pub fn probabilities(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.w.rows() {
            return Err(Error::Contract(format!(
                "features have {} columns but the classifier expects {}",
                features.cols(),
                self.w.rows()
            )));
        }
        let logits = features.matmul(&self.w).add(&self.b.broadcast_rows(features.rows()));
        Ok(softmax_rows(&logits))
    }

    /// Argmax class per row; ties break to the smallest class id.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<u32>> {
        let probs = self.probabilities(features)?;
        Ok((0..probs.rows())
            .map(|r| {
                let mut best = (self.class_ids[0], probs.get(r, 0));
                for c in 1..probs.cols() {
                    let p = probs.get(r, c);
                    let id = self.class_ids[c];
                    if p > best.1 || (p == best.1 && id < best.0) {
                        best = (id, p);
                    }
                }
                best.0
            })
            .collect())
    }

    /// Mean cross-entropy of the true classes.
    pub fn loss(&self, features: &Matrix, labels: &[u32]) -> Result<f64> {
        let probs = self.probabilities(features)?;
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let col = self.class_position(label)?;
            total -= probs.get(r, col).max(1e-300).ln();
        }
        Ok(total / labels.len() as f64)
    }

    fn class_position(&self, label: u32) -> Result<usize> {
        self.class_ids.iter().position(|&c| c == label).ok_or_else(|| {
            Error::Contract(format!("label {label} not in the classifier's class set"))
        })
    }
}

/// Full-batch cross-entropy training over a fixed feature/label set.
pub fn fit_softmax(
    features: &Matrix,
    labels: &[u32],
    class_ids: &[u32],
    config: &SoftmaxConfig,
) -> Result<SoftmaxClassifier> {
    config.validate()?;
    if features.rows() != labels.len() {
        return Err(Error::Contract(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if features.rows() == 0 {
        return Err(Error::Data("empty softmax training set".into()));
    }
    let n = features.rows();
    let k = class_ids.len();
    let mut model = SoftmaxClassifier {
        w: Matrix::zeros(features.cols(), k),
        b: Matrix::zeros(1, k),
        class_ids: class_ids.to_vec(),
    };
    let positions: Vec<usize> =
        labels.iter().map(|&l| model.class_position(l)).collect::<Result<_>>()?;

    let mut adam = AdamState::new(&[&model.w, &model.b]);
    for _ in 0..config.steps {
        let probs = model.probabilities(features)?;
        // d(loss)/d(logits) = (softmax - onehot) / N
        let mut dlogits = probs;
        for (r, &col) in positions.iter().enumerate() {
            dlogits.set(r, col, dlogits.get(r, col) - 1.0);
        }
        let dlogits = dlogits.scale(1.0 / n as f64);
        let dw = features.transpose().matmul(&dlogits);
        let db = dlogits.col_sums();
        match config.optimizer {
            SoftmaxOptimizer::Adam => {
                adam.step(
                    &mut [&mut model.w, &mut model.b],
                    &[dw, db],
                    config.learning_rate,
                )?;
            }
            SoftmaxOptimizer::GradientDescent => {
                model.w = model.w.sub(&dw.scale(config.learning_rate));
                model.b = model.b.sub(&db.scale(config.learning_rate));
            }
        }
    }
    Ok(model)
}

/// Generates `samples_per_class` fake features per class, optionally appends
/// real seen training data, and fits a softmax head on the pool.
pub fn train_softmax_on_generated(
    generator: &GeneratorNet,
    attributes: &Matrix,
    class_ids: &[u32],
    samples_per_class: usize,
    real: Option<(&Matrix, &[u32])>,
    config: &SoftmaxConfig,
    rng: &mut impl Rng,
) -> Result<SoftmaxClassifier> {
    if samples_per_class < 1 {
        return Err(Error::Config("samples per class must be >= 1".into()));
    }
    if class_ids.is_empty() {
        return Err(Error::Data("empty class set for softmax training".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    for &c in class_ids {
        if c as usize >= attributes.rows() {
            return Err(Error::Data(format!(
                "class {c} has no attribute row (table has {} rows)",
                attributes.rows()
            )));
        }
        let attr = Matrix::row_vector(attributes.row(c as usize));
        for _ in 0..samples_per_class {
            let z = Matrix::new(
                1,
                generator.d_z,
                (0..generator.d_z).map(|_| standard_normal(rng)).collect(),
            );
            rows.push(generator.forward(&z, &attr)?.row(0).to_vec());
            labels.push(c);
        }
    }
    if let Some((feats, real_labels)) = real {
        if feats.rows() != real_labels.len() {
            return Err(Error::Contract(format!(
                "{} real feature rows vs {} labels",
                feats.rows(),
                real_labels.len()
            )));
        }
        for (r, &l) in real_labels.iter().enumerate() {
            rows.push(feats.row(r).to_vec());
            labels.push(l);
        }
    }
    fit_softmax(&Matrix::from_rows(&rows), &labels, class_ids, config)
}

/// Same metric definitions and report format as the pairwise classifier.
pub fn evaluate_softmax(
    classifier: &SoftmaxClassifier,
    dataset: &Dataset,
    mode: EvalMode,
    seed: u64,
    fingerprint: &str,
) -> Result<EvalReport> {
    if dataset.test_unseen_idx.is_empty() {
        return Err(Error::Data("dataset has no unseen test samples".into()));
    }
    match mode {
        EvalMode::Zsl => {
            let feats = dataset.features.gather_rows(&dataset.test_unseen_idx);
            let labels: Vec<u32> =
                dataset.test_unseen_idx.iter().map(|&i| dataset.labels[i]).collect();
            let predictions = classifier.predict(&feats)?;
            let (per_class, mean) =
                per_class_top1(&predictions, &labels, &dataset.unseen_classes)?;
            Ok(EvalReport {
                mode,
                n_g: 0,
                seed,
                checkpoint_fingerprint: fingerprint.to_string(),
                per_class,
                headline: mean,
                unseen_seen: None,
            })
        }
        EvalMode::Gzsl => {
            if dataset.test_seen_idx.is_empty() {
                return Err(Error::Data(
                    "dataset has no seen test samples; generalized evaluation impossible".into(),
                ));
            }
            let mut all_classes = dataset.seen_classes.clone();
            all_classes.extend_from_slice(&dataset.unseen_classes);

            let feats_u = dataset.features.gather_rows(&dataset.test_unseen_idx);
            let labels_u: Vec<u32> =
                dataset.test_unseen_idx.iter().map(|&i| dataset.labels[i]).collect();
            let (table_u, u) =
                per_class_top1(&classifier.predict(&feats_u)?, &labels_u, &all_classes)?;

            let feats_s = dataset.features.gather_rows(&dataset.test_seen_idx);
            let labels_s: Vec<u32> =
                dataset.test_seen_idx.iter().map(|&i| dataset.labels[i]).collect();
            let (table_s, s) =
                per_class_top1(&classifier.predict(&feats_s)?, &labels_s, &all_classes)?;

            let per_class = all_classes
                .iter()
                .map(|&c| {
                    let t = if dataset.seen_classes.contains(&c) { &table_s } else { &table_u };
                    t.iter().find(|e| e.class_id == c).unwrap().clone()
                })
                .collect();
            Ok(EvalReport {
                mode,
                n_g: 0,
                seed,
                checkpoint_fingerprint: fingerprint.to_string(),
                per_class,
                headline: harmonic_mean(u, s),
                unseen_seen: Some((u, s)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn train_split(ds: &Dataset) -> (Matrix, Vec<u32>) {
        (
            ds.features.gather_rows(&ds.train_idx),
            ds.train_idx.iter().map(|&i| ds.labels[i]).collect(),
        )
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = SoftmaxClassifier {
            w: Matrix::from_rows(&[vec![0.3, -2.0, 5.0], vec![1.0, 0.0, -1.0]]),
            b: Matrix::from_rows(&[vec![0.1, 0.2, -0.5]]),
            class_ids: vec![0, 1, 2],
        };
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 100.0], vec![0.0, 0.0]]);
        let probs = model.probabilities(&x).unwrap();
        for r in 0..3 {
            let sum: f64 = (0..3).map(|c| probs.get(r, c)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!((0..3).all(|c| probs.get(r, c) >= 0.0));
        }
    }

    #[test]
    fn separable_clusters_reach_high_training_accuracy() {
        let ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        let (feats, labels) = train_split(&ds);
        let model = fit_softmax(
            &feats,
            &labels,
            &ds.seen_classes,
            &SoftmaxConfig { steps: 2000, learning_rate: 1e-2, ..SoftmaxConfig::default() },
        )
        .unwrap();
        let preds = model.predict(&feats).unwrap();
        let correct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        let acc = correct as f64 / labels.len() as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
    }

    #[test]
    fn gradient_descent_loss_is_monotone() {
        let ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        let (feats, labels) = train_split(&ds);
        let mut losses = Vec::new();
        // retrain with increasing step counts; full-batch GD at a small rate
        // must give nonincreasing loss as steps grow
        let mut prev = f64::INFINITY;
        for steps in [1u64, 5, 20, 80, 200] {
            let model = fit_softmax(
                &feats,
                &labels,
                &ds.seen_classes,
                &SoftmaxConfig {
                    steps,
                    learning_rate: 1e-3,
                    optimizer: SoftmaxOptimizer::GradientDescent,
                },
            )
            .unwrap();
            let loss = model.loss(&feats, &labels).unwrap();
            assert!(loss <= prev + 1e-6, "loss {loss} after {steps} steps, prev {prev}");
            prev = loss;
            losses.push(loss);
        }
        assert!(losses.last().unwrap() < losses.first().unwrap());
    }

    #[test]
    fn generated_training_is_deterministic() {
        let mut r = ChaCha12Rng::seed_from_u64(0);
        let gen = GeneratorNet::init(4, 4, 6, &[8], &mut r).unwrap();
        let attrs = Matrix::from_rows(&[vec![0.1; 4], vec![0.7; 4], vec![1.3; 4]]);
        let config = SoftmaxConfig { steps: 20, ..SoftmaxConfig::default() };
        let mut r1 = ChaCha12Rng::seed_from_u64(9);
        let a = train_softmax_on_generated(&gen, &attrs, &[0, 1, 2], 5, None, &config, &mut r1)
            .unwrap();
        let mut r2 = ChaCha12Rng::seed_from_u64(9);
        let b = train_softmax_on_generated(&gen, &attrs, &[0, 1, 2], 5, None, &config, &mut r2)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_attribute_and_zero_samples_rejected() {
        let mut r = ChaCha12Rng::seed_from_u64(1);
        let gen = GeneratorNet::init(2, 2, 3, &[4], &mut r).unwrap();
        let attrs = Matrix::from_rows(&[vec![0.5, 0.5]]);
        let config = SoftmaxConfig::default();
        assert!(matches!(
            train_softmax_on_generated(&gen, &attrs, &[0, 3], 2, None, &config, &mut r),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            train_softmax_on_generated(&gen, &attrs, &[0], 0, None, &config, &mut r),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_class_always_predicts_it() {
        let model = SoftmaxClassifier {
            w: Matrix::zeros(3, 1),
            b: Matrix::zeros(1, 1),
            class_ids: vec![4],
        };
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]]);
        assert_eq!(model.predict(&x).unwrap(), vec![4, 4]);
    }

    #[test]
    fn report_schema_matches_pairwise_reports() {
        let ds = make_synthetic(&SyntheticSpec::default()).unwrap();
        let (feats, labels) = train_split(&ds);
        let mut all_classes = ds.seen_classes.clone();
        all_classes.extend_from_slice(&ds.unseen_classes);
        // train on real data over all classes just to exercise the reports
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut lab: Vec<u32> = Vec::new();
        for (r, &l) in labels.iter().enumerate() {
            rows.push(feats.row(r).to_vec());
            lab.push(l);
        }
        for &i in &ds.test_unseen_idx {
            rows.push(ds.features.row(i).to_vec());
            lab.push(ds.labels[i]);
        }
        let model = fit_softmax(
            &Matrix::from_rows(&rows),
            &lab,
            &all_classes,
            &SoftmaxConfig { steps: 50, ..SoftmaxConfig::default() },
        )
        .unwrap();
        let report = evaluate_softmax(&model, &ds, EvalMode::Gzsl, 3, "fp").unwrap();
        let text = report.render();
        assert!(text.contains("mode = gzsl"));
        assert!(text.contains("U = "));
        let (u, s) = report.unseen_seen.unwrap();
        assert!((report.headline - harmonic_mean(u, s)).abs() < 1e-15);

        let zsl_model = fit_softmax(
            &ds.features.gather_rows(&ds.test_unseen_idx),
            &ds.test_unseen_idx.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>(),
            &ds.unseen_classes,
            &SoftmaxConfig { steps: 10, ..SoftmaxConfig::default() },
        )
        .unwrap();
        let report = evaluate_softmax(&zsl_model, &ds, EvalMode::Zsl, 3, "fp").unwrap();
        assert!(report.render().contains("zsl_accuracy = "));
    }
}
