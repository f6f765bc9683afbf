//! Loss terms: the critic's Wasserstein loss with gradient penalty, the
//! seen/unseen pair losses, their combination, and the generator objective.
//!
//! Network forwards are passed as closures over tape nodes so the same loss
//! code serves the real MLPs, hand-built test critics, and any future
//! backbone swap.

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Forward pass of a conditional critic: (features, attributes) -> Bx1 scores.
pub type CriticFn<'a> = dyn Fn(&Tape, NodeId, NodeId) -> Result<NodeId> + 'a;
/// Forward pass of the pair classifier: (left, right) -> Px1 similarities.
pub type ClassifierFn<'a> = dyn Fn(&Tape, NodeId, NodeId) -> Result<NodeId> + 'a;

/// Scalar values of every term, for logging and abort diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub wgan: f64,
    pub gp: f64,
    pub l_s: f64,
    pub l_u: f64,
    pub l_ci: f64,
    pub generator_objective: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl LossBreakdown {
    pub fn all_finite(&self) -> bool {
        [self.wgan, self.gp, self.l_s, self.l_u, self.l_ci, self.generator_objective]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn log_header() -> &'static str {
        "iteration\twgan\tgp\tl_s\tl_u\tl_ci\tgenerator_objective"
    }

    pub fn log_line(&self, iteration: u64) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            iteration, self.wgan, self.gp, self.l_s, self.l_u, self.l_ci,
            self.generator_objective
        )
    }
}

/// Mean over rows of (||grad_interp D(interp|a)||_2 - 1)^2.
///
/// `alpha` holds one U(0,1) draw per row; the interpolate mixes real and fake
/// features row-wise. Only the feature gradient is penalized; attributes are
/// conditioning. Requires a higher-order tape so the penalty stays
/// differentiable with respect to the critic parameters.
pub fn gradient_penalty(
    tape: &Tape,
    critic: &CriticFn,
    reals: NodeId,
    fakes: NodeId,
    attrs: NodeId,
    alpha: &Matrix,
) -> Result<NodeId> {
    let (rows, cols) = tape.shape(reals);
    if tape.shape(fakes) != (rows, cols) {
        return Err(Error::Contract(format!(
            "gradient penalty: reals {:?} vs fakes {:?}",
            tape.shape(reals),
            tape.shape(fakes)
        )));
    }
    if alpha.shape() != (rows, 1) {
        return Err(Error::Contract(format!(
            "gradient penalty: alpha must be {}x1, got {:?}",
            rows,
            alpha.shape()
        )));
    }
    let a = tape.leaf(alpha.clone());
    let a_full = tape.broadcast_cols(a, cols)?;
    let one_minus = tape.add_scalar(tape.scale(a, -1.0), 1.0);
    let om_full = tape.broadcast_cols(one_minus, cols)?;
    let interp = tape.add(tape.mul(a_full, reals)?, tape.mul(om_full, fakes)?)?;

    let scores = critic(tape, interp, attrs)?;
    // rows of an MLP are independent, so the gradient of the summed score
    // w.r.t. the interpolate stacks the per-row gradients
    let total = tape.sum_all(scores);
    let grad = tape.grad_wrt_input(total, interp)?;
    let norm = tape.row_norm(grad);
    let shifted = tape.add_scalar(norm, -1.0);
    Ok(tape.mean_all(tape.mul(shifted, shifted)?))
}

pub struct CriticLossNodes {
    /// mean[D(fake)] - mean[D(real)] + lambda * GP, minimized by the critic.
    pub loss: NodeId,
    /// The Wasserstein term alone.
    pub wgan: NodeId,
    pub gp: NodeId,
}

pub fn wgan_critic_loss(
    tape: &Tape,
    critic: &CriticFn,
    reals: NodeId,
    fakes: NodeId,
    attrs: NodeId,
    lambda: f64,
    alpha: &Matrix,
) -> Result<CriticLossNodes> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let real_scores = critic(tape, reals, attrs)?;
    let fake_scores = critic(tape, fakes, attrs)?;
    let wgan = tape.sub(tape.mean_all(fake_scores), tape.mean_all(real_scores))?;
    let gp = gradient_penalty(tape, critic, reals, fakes, attrs, alpha)?;
    let loss = tape.add(wgan, tape.scale(gp, lambda))?;
    Ok(CriticLossNodes { loss, wgan, gp })
}

/// Mean over pairs of (C_I(left, right) - target)^2.
pub fn pair_mse(
    tape: &Tape,
    classifier: &ClassifierFn,
    left: NodeId,
    right: NodeId,
    targets: &[f64],
) -> Result<NodeId> {
    if targets.is_empty() {
        return Err(Error::Contract("pair-mse: empty pair batch".into()));
    }
    let rows = tape.shape(left).0;
    if rows != targets.len() {
        return Err(Error::Contract(format!(
            "pair-mse: {} pair rows but {} targets",
            rows,
            targets.len()
        )));
    }
    let preds = classifier(tape, left, right)?;
    let t = tape.leaf(Matrix::col_vector(targets));
    Ok(tape.mse(preds, t)?)
}

/// L_CI = L_s + gamma * L_u with gamma in [0, 1].
pub fn combined_ci_loss(tape: &Tape, l_s: NodeId, l_u: NodeId, gamma: f64) -> Result<NodeId> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must be in [0, 1], got {gamma}")));
    }
    Ok(tape.add(l_s, tape.scale(l_u, gamma))?)
}

/// Generator objective: L_CI - mean[D(fake|a)], minimized w.r.t. theta_G.
///
/// `seen_fakes` must be a live generator output on this tape; a detached leaf
/// would silently starve the generator of gradients, so it is rejected.
pub fn generator_objective(
    tape: &Tape,
    critic: &CriticFn,
    seen_fakes: NodeId,
    attrs: NodeId,
    l_ci: NodeId,
) -> Result<NodeId> {
    if tape.is_leaf(seen_fakes) {
        return Err(Error::Contract(
            "generator objective: fakes are a detached leaf with no gradient path to the \
             generator"
                .into(),
        ));
    }
    let scores = critic(tape, seen_fakes, attrs)?;
    Ok(tape.sub(l_ci, tape.mean_all(scores))?)
}
