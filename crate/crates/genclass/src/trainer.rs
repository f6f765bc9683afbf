//! The training loop: n_dis critic updates per outer iteration, then one
//! joint classifier/generator step on freshly sampled seen and unseen
//! batches, all updated with Adam.

use std::rc::Rc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::autodiff::{Mode, NodeId, Tape};
use crate::checkpoint::Checkpoint;
use crate::data::{standard_normal, Dataset, Precision};
use crate::error::{Error, Result};
use crate::losses::{
    combined_ci_loss, generator_objective, pair_mse, wgan_critic_loss, LossBreakdown,
};
use crate::matrix::Matrix;
use crate::models::{AdamState, CriticNet, GeneratorNet, IntegratedClassifierNet};
use crate::pairing::{build_seen_pairs, build_unseen_pairs};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Critic updates per outer iteration.
    pub n_dis: usize,
    /// Gradient-penalty weight.
    pub lambda: f64,
    /// Weight of the unseen pair loss inside L_CI.
    pub gamma: f64,
    /// Generated samples per prototype at evaluation time; echoed into
    /// manifests so training and evaluation share one config.
    pub n_g: usize,
    /// Noise dimension; defaults to the attribute dimension.
    pub d_z: Option<usize>,
    pub hidden_generator: Vec<usize>,
    pub hidden_critic: Vec<usize>,
    pub hidden_classifier: Vec<usize>,
    pub iterations: u64,
    pub seed: u64,
    pub precision: Precision,
    pub log_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            n_dis: 5,
            lambda: 10.0,
            gamma: 0.1,
            n_g: 50,
            d_z: None,
            hidden_generator: vec![4096, 4096],
            hidden_critic: vec![4096, 4096],
            hidden_classifier: vec![1024],
            iterations: 2000,
            seed: 0,
            precision: Precision::Double,
            log_interval: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if self.n_dis < 1 {
            return Err(Error::Config("n_dis must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.n_g < 1 {
            return Err(Error::Config("n_g must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.log_interval < 1 {
            return Err(Error::Config("log interval must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn noise_dim(&self, d_a: usize) -> usize {
        self.d_z.unwrap_or(d_a)
    }

    /// `key = value` lines echoing every effective hyperparameter.
    pub fn echo(&self, d_a: usize) -> String {
        let dims = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "learning_rate = {}\n\
             batch_size = {}\n\
             n_dis = {}\n\
             lambda = {}\n\
             gamma = {}\n\
             n_g = {}\n\
             d_z = {}\n\
             hidden_generator = {}\n\
             hidden_critic = {}\n\
             hidden_classifier = {}\n\
             iterations = {}\n\
             seed = {}\n\
             precision = {}\n\
             log_interval = {}\n",
            self.learning_rate,
            self.batch_size,
            self.n_dis,
            self.lambda,
            self.gamma,
            self.n_g,
            self.noise_dim(d_a),
            dims(&self.hidden_generator),
            dims(&self.hidden_critic),
            dims(&self.hidden_classifier),
            self.iterations,
            self.seed,
            match self.precision {
                Precision::Single => "single",
                Precision::Double => "double",
            },
            self.log_interval,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub critic_updates: u64,
    pub classifier_updates: u64,
    pub generator_updates: u64,
    /// Times the unseen attribute table was sampled for the pair loss.
    pub unseen_attr_reads: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub stats: TrainStats,
    /// TSV lines, header first, one row per logged iteration.
    pub loss_log: Vec<String>,
    pub final_losses: LossBreakdown,
}

pub struct SeenBatch {
    pub features: Matrix,
    pub attrs: Matrix,
    pub labels: Vec<u32>,
    pub noise: Matrix,
}

pub struct UnseenBatch {
    pub attrs: Matrix,
    pub labels: Vec<u32>,
    pub noise: Matrix,
}

fn noise_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| standard_normal(rng)).collect())
}

/// B uniform-with-replacement draws from the training portion, with attribute
/// lookups and fresh noise.
pub fn sample_seen_batch(
    dataset: &Dataset,
    b: usize,
    d_z: usize,
    rng: &mut impl Rng,
) -> Result<SeenBatch> {
    if dataset.train_idx.is_empty() {
        return Err(Error::Data("training index list is empty".into()));
    }
    let picks: Vec<usize> =
        (0..b).map(|_| dataset.train_idx[rng.gen_range(0..dataset.train_idx.len())]).collect();
    let labels: Vec<u32> = picks.iter().map(|&i| dataset.labels[i]).collect();
    let attr_rows: Vec<usize> = labels.iter().map(|&c| c as usize).collect();
    Ok(SeenBatch {
        features: dataset.features.gather_rows(&picks),
        attrs: dataset.attributes.gather_rows(&attr_rows),
        labels,
        noise: noise_matrix(rng, b, d_z),
    })
}

/// B uniform draws over unseen class attributes with fresh noise.
pub fn sample_unseen_attr_batch(
    dataset: &Dataset,
    b: usize,
    d_z: usize,
    rng: &mut impl Rng,
) -> Result<UnseenBatch> {
    if dataset.unseen_classes.len() < 2 {
        return Err(Error::Data(format!(
            "need >= 2 unseen classes for pair construction, got {}",
            dataset.unseen_classes.len()
        )));
    }
    let labels: Vec<u32> = (0..b)
        .map(|_| dataset.unseen_classes[rng.gen_range(0..dataset.unseen_classes.len())])
        .collect();
    let attr_rows: Vec<usize> = labels.iter().map(|&c| c as usize).collect();
    Ok(UnseenBatch {
        attrs: dataset.attributes.gather_rows(&attr_rows),
        labels,
        noise: noise_matrix(rng, b, d_z),
    })
}

const PAIRING_RESAMPLES: usize = 100;

/// Draws batches until pair construction is feasible (a class occupying more
/// than half the rows makes balanced dissimilar pairs impossible).
fn sample_with_pairs<B, P>(
    mut sample: impl FnMut(&mut ChaCha12Rng) -> Result<B>,
    mut pairs: impl FnMut(&B, &mut ChaCha12Rng) -> Result<P>,
    rng: &mut ChaCha12Rng,
) -> Result<(B, P)> {
    let mut last_err = None;
    for _ in 0..PAIRING_RESAMPLES {
        let batch = sample(rng)?;
        match pairs(&batch, rng) {
            Ok(plan) => return Ok((batch, plan)),
            Err(e @ Error::Pairing(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

fn numeric_abort(iteration: u64, losses: &LossBreakdown) -> Error {
    Error::Numeric {
        iteration,
        detail: format!("non-finite loss term; last values: {losses:?}"),
    }
}

pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let violations = dataset.validate();
    if !violations.is_empty() {
        return Err(Error::Data(format!(
            "dataset invariants violated: {}",
            violations.join("; ")
        )));
    }
    if dataset.unseen_classes.len() < 2 && config.gamma > 0.0 {
        return Err(Error::Data(format!(
            "gamma = {} needs >= 2 unseen classes, got {}",
            config.gamma,
            dataset.unseen_classes.len()
        )));
    }

    let d_x = dataset.feature_dim();
    let d_a = dataset.attribute_dim();
    let d_z = config.noise_dim(d_a);
    let b = config.batch_size;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let mut generator = GeneratorNet::init(d_z, d_a, d_x, &config.hidden_generator, &mut rng)?;
    let mut critic = CriticNet::init(d_x, d_a, &config.hidden_critic, &mut rng)?;
    let mut classifier = IntegratedClassifierNet::init(d_x, &config.hidden_classifier, &mut rng)?;

    let mut adam_d = AdamState::new(&critic.mlp.params());
    let mut adam_ci = AdamState::new(&classifier.mlp.params());
    let mut adam_g = AdamState::new(&generator.mlp.params());

    let mut stats = TrainStats::default();
    let mut loss_log = vec![LossBreakdown::log_header().to_string()];
    let mut last = LossBreakdown {
        wgan: 0.0,
        gp: 0.0,
        l_s: 0.0,
        l_u: 0.0,
        l_ci: 0.0,
        generator_objective: 0.0,
        lambda: config.lambda,
        gamma: config.gamma,
    };

    for it in 1..=config.iterations {
        // critic phase: the generator and classifier are read-only here
        let (mut wgan_v, mut gp_v) = (0.0, 0.0);
        for _ in 0..config.n_dis {
            let batch = sample_seen_batch(dataset, b, d_z, &mut rng)?;
            let fakes = generator.forward(&batch.noise, &batch.attrs)?;
            let alpha = Matrix::col_vector(
                &(0..b).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>(),
            );

            let tape = Tape::new(Mode::HigherOrder);
            let bound = critic.mlp.bind(&tape);
            let critic_fn =
                |t: &Tape, x: NodeId, a: NodeId| critic.forward_tape(t, &bound, x, a);
            let reals = tape.leaf(batch.features);
            let fakes_n = tape.leaf(fakes);
            let attrs = tape.leaf(batch.attrs);
            let out = wgan_critic_loss(
                &tape, &critic_fn, reals, fakes_n, attrs, config.lambda, &alpha,
            )?;
            wgan_v = tape.scalar_value(out.wgan);
            gp_v = tape.scalar_value(out.gp);
            if !(wgan_v.is_finite() && gp_v.is_finite()) {
                last.wgan = wgan_v;
                last.gp = gp_v;
                return Err(numeric_abort(it, &last));
            }

            let ids = bound.param_ids();
            let grad_ids = tape.backward(out.loss, &ids)?;
            let grads: Vec<Matrix> = grad_ids.iter().map(|&g| tape.value(g)).collect();
            adam_d.step(&mut critic.mlp.params_mut(), &grads, config.learning_rate)?;
            stats.critic_updates += 1;
        }

        // joint classifier/generator phase: the critic is read-only here
        let (batch, seen_plan) = sample_with_pairs(
            |r| sample_seen_batch(dataset, b, d_z, r),
            |batch: &SeenBatch, r| build_seen_pairs(&batch.labels, r),
            &mut rng,
        )?;

        let tape = Tape::new(Mode::FirstOrder);
        let g_bound = generator.mlp.bind(&tape);
        let d_bound = critic.mlp.bind(&tape);
        let ci_bound = classifier.mlp.bind(&tape);
        let classifier_fn =
            |t: &Tape, l: NodeId, r: NodeId| classifier.forward_tape(t, &ci_bound, l, r);
        let critic_fn =
            |t: &Tape, x: NodeId, a: NodeId| critic.forward_tape(t, &d_bound, x, a);

        let noise = tape.leaf(batch.noise);
        let attrs = tape.leaf(batch.attrs.clone());
        let fakes = generator.forward_tape(&tape, &g_bound, noise, attrs)?;

        let left_real = tape.leaf(batch.features.gather_rows(&seen_plan.left));
        let right_fake = tape.gather_rows(fakes, Rc::new(seen_plan.right.clone()))?;
        let l_s = pair_mse(&tape, &classifier_fn, left_real, right_fake, &seen_plan.targets)?;

        let l_u = if config.gamma > 0.0 {
            let (unseen, unseen_plan) = sample_with_pairs(
                |r| sample_unseen_attr_batch(dataset, b, d_z, r),
                |batch: &UnseenBatch, r| build_unseen_pairs(&batch.labels, r),
                &mut rng,
            )?;
            stats.unseen_attr_reads += 1;
            let noise_u = tape.leaf(unseen.noise);
            let attrs_u = tape.leaf(unseen.attrs);
            let fakes_u = generator.forward_tape(&tape, &g_bound, noise_u, attrs_u)?;
            let left = tape.gather_rows(fakes_u, Rc::new(unseen_plan.left.clone()))?;
            let right = tape.gather_rows(fakes_u, Rc::new(unseen_plan.right.clone()))?;
            pair_mse(&tape, &classifier_fn, left, right, &unseen_plan.targets)?
        } else {
            tape.leaf_scalar(0.0)
        };

        let l_ci = combined_ci_loss(&tape, l_s, l_u, config.gamma)?;
        let objective = generator_objective(&tape, &critic_fn, fakes, attrs, l_ci)?;

        last = LossBreakdown {
            wgan: wgan_v,
            gp: gp_v,
            l_s: tape.scalar_value(l_s),
            l_u: tape.scalar_value(l_u),
            l_ci: tape.scalar_value(l_ci),
            generator_objective: tape.scalar_value(objective),
            lambda: config.lambda,
            gamma: config.gamma,
        };
        if !last.all_finite() {
            return Err(numeric_abort(it, &last));
        }

        // both gradients before either update
        let ci_ids = ci_bound.param_ids();
        let ci_grad_ids = tape.backward(l_ci, &ci_ids)?;
        let ci_grads: Vec<Matrix> = ci_grad_ids.iter().map(|&g| tape.value(g)).collect();
        let g_ids = g_bound.param_ids();
        let g_grad_ids = tape.backward(objective, &g_ids)?;
        let g_grads: Vec<Matrix> = g_grad_ids.iter().map(|&g| tape.value(g)).collect();

        adam_ci.step(&mut classifier.mlp.params_mut(), &ci_grads, config.learning_rate)?;
        stats.classifier_updates += 1;
        adam_g.step(&mut generator.mlp.params_mut(), &g_grads, config.learning_rate)?;
        stats.generator_updates += 1;

        if it % config.log_interval == 0 {
            loss_log.push(last.log_line(it));
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            generator,
            critic,
            classifier,
            iteration: config.iterations,
            seed: config.seed,
        },
        stats,
        loss_log,
        final_losses: last,
    })
}

/// Runs training and writes checkpoint, loss log, and run manifest under
/// `out_dir`. Returns the outcome plus the checkpoint fingerprint.
pub fn train_to_dir(
    config: &TrainConfig,
    dataset: &Dataset,
    dataset_hash: &str,
    out_dir: &std::path::Path,
) -> Result<(TrainOutcome, String)> {
    let start = Instant::now();
    let outcome = train(config, dataset)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let ckpt_dir = out_dir.join("checkpoint");
    outcome.checkpoint.save(&ckpt_dir, config.precision)?;
    let fingerprint = Checkpoint::fingerprint(&ckpt_dir)?;

    let log_path = out_dir.join("loss_log.tsv");
    std::fs::write(&log_path, outcome.loss_log.join("\n") + "\n")
        .map_err(|e| Error::io(log_path.display().to_string(), e))?;

    let manifest = format!(
        "{}dataset_hash = {}\n\
         wall_clock_seconds = {:.3}\n\
         final_iteration = {}\n\
         checkpoint_path = checkpoint\n\
         checkpoint_fingerprint = {}\n\
         loss_log_path = loss_log.tsv\n",
        config.echo(dataset.attribute_dim()),
        dataset_hash,
        start.elapsed().as_secs_f64(),
        outcome.checkpoint.iteration,
        fingerprint,
    );
    let mpath = out_dir.join("run_manifest.txt");
    std::fs::write(&mpath, manifest).map_err(|e| Error::io(mpath.display().to_string(), e))?;
    Ok((outcome, fingerprint))
}
