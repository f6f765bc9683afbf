//! The three networks (generator, critic, integrated classifier), Glorot
//! initialization, and the Adam update used by the trainer.

use rand::distributions::Distribution;
use rand::Rng;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    fn apply_tape(&self, tape: &Tape, x: NodeId) -> NodeId {
        match *self {
            Activation::LeakyRelu(s) => tape.leaky_relu(x, s),
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Linear => x,
        }
    }

    fn apply_plain(&self, x: Matrix) -> Matrix {
        match *self {
            Activation::LeakyRelu(s) => x.map(|v| if v > 0.0 { v } else { s * v }),
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::Sigmoid => x.map(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Linear => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// in x out
    pub w: Matrix,
    /// 1 x out
    pub b: Matrix,
}

/// An MLP with one activation for all hidden layers and one for the head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LinearLayer>,
    pub hidden: Activation,
    pub head: Activation,
}

/// Tape-bound parameter ids for one MLP.
pub struct BoundMlp {
    pub layers: Vec<(NodeId, NodeId)>,
}

impl BoundMlp {
    pub fn param_ids(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(
        dims: &[usize],
        hidden: Activation,
        head: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("mlp needs at least input and output dims".into()));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::Config(format!("layer dimension must be positive, got {bad}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = rand::distributions::Uniform::new_inclusive(-limit, limit);
                let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
                LinearLayer {
                    w: Matrix::new(fan_in, fan_out, data),
                    b: Matrix::zeros(1, fan_out),
                }
            })
            .collect();
        let mlp = Mlp { layers, hidden, head };
        debug_assert_eq!(mlp.param_count(), Self::param_count_for(dims));
        Ok(mlp)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.w.rows()).collect();
        d.push(self.layers.last().expect("nonempty mlp").w.cols());
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty mlp").w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn param_count_for(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    pub fn bind(&self, tape: &Tape) -> BoundMlp {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.w.clone()), tape.leaf(l.b.clone())))
                .collect(),
        }
    }

    pub fn forward_tape(&self, tape: &Tape, bound: &BoundMlp, input: NodeId) -> Result<NodeId> {
        let mut x = input;
        let last = bound.layers.len() - 1;
        for (i, &(w, b)) in bound.layers.iter().enumerate() {
            x = tape.affine(x, w, b)?;
            let act = if i == last { self.head } else { self.hidden };
            x = act.apply_tape(tape, x);
        }
        Ok(x)
    }

    pub fn forward_plain(&self, input: &Matrix) -> Matrix {
        let mut x = input.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = x.matmul(&l.w);
            for r in 0..z.rows() {
                for c in 0..z.cols() {
                    z.set(r, c, z.get(r, c) + l.b.get(0, c));
                }
            }
            let act = if i == last { self.head } else { self.hidden };
            x = act.apply_plain(z);
        }
        x
    }
}

/// G(z|a): concat(z, a) -> LeakyReLU hidden stack -> ReLU head, output >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    pub d_z: usize,
    pub d_a: usize,
    pub d_x: usize,
    pub mlp: Mlp,
}

impl GeneratorNet {
    pub fn init(
        d_z: usize,
        d_a: usize,
        d_x: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if d_z == 0 || d_a == 0 || d_x == 0 {
            return Err(Error::Config(format!(
                "generator dims must be positive, got d_z={d_z} d_a={d_a} d_x={d_x}"
            )));
        }
        let mut dims = vec![d_z + d_a];
        dims.extend_from_slice(hidden);
        dims.push(d_x);
        let mlp = Mlp::init(&dims, Activation::LeakyRelu(LEAKY_SLOPE), Activation::Relu, rng)?;
        Ok(GeneratorNet { d_z, d_a, d_x, mlp })
    }

    pub fn forward_tape(
        &self,
        tape: &Tape,
        bound: &BoundMlp,
        z: NodeId,
        a: NodeId,
    ) -> Result<NodeId> {
        let input = tape.concat_cols(z, a)?;
        self.mlp.forward_tape(tape, bound, input)
    }

    pub fn forward(&self, z: &Matrix, a: &Matrix) -> Result<Matrix> {
        if z.rows() != a.rows() {
            return Err(Error::Contract(format!(
                "generator: {} noise rows but {} attribute rows",
                z.rows(),
                a.rows()
            )));
        }
        Ok(self.mlp.forward_plain(&z.concat_cols(a)))
    }
}

/// D(x|a): concat(x, a) -> LeakyReLU hidden stack -> unbounded scalar score.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub d_x: usize,
    pub d_a: usize,
    pub mlp: Mlp,
}

impl CriticNet {
    pub fn init(d_x: usize, d_a: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if d_x == 0 || d_a == 0 {
            return Err(Error::Config(format!(
                "critic dims must be positive, got d_x={d_x} d_a={d_a}"
            )));
        }
        let mut dims = vec![d_x + d_a];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mlp = Mlp::init(&dims, Activation::LeakyRelu(LEAKY_SLOPE), Activation::Linear, rng)?;
        Ok(CriticNet { d_x, d_a, mlp })
    }

    pub fn forward_tape(
        &self,
        tape: &Tape,
        bound: &BoundMlp,
        x: NodeId,
        a: NodeId,
    ) -> Result<NodeId> {
        let input = tape.concat_cols(x, a)?;
        self.mlp.forward_tape(tape, bound, input)
    }

    pub fn forward(&self, x: &Matrix, a: &Matrix) -> Result<Matrix> {
        if x.rows() != a.rows() {
            return Err(Error::Contract(format!(
                "critic: {} feature rows but {} attribute rows",
                x.rows(),
                a.rows()
            )));
        }
        Ok(self.mlp.forward_plain(&x.concat_cols(a)))
    }
}

/// C_I(p, q): ordered pair concat -> LeakyReLU hidden -> sigmoid similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedClassifierNet {
    pub d_x: usize,
    pub mlp: Mlp,
}

impl IntegratedClassifierNet {
    pub fn init(d_x: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if d_x == 0 {
            return Err(Error::Config("classifier d_x must be positive".into()));
        }
        let mut dims = vec![2 * d_x];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mlp = Mlp::init(&dims, Activation::LeakyRelu(LEAKY_SLOPE), Activation::Sigmoid, rng)?;
        Ok(IntegratedClassifierNet { d_x, mlp })
    }

    pub fn forward_tape(
        &self,
        tape: &Tape,
        bound: &BoundMlp,
        left: NodeId,
        right: NodeId,
    ) -> Result<NodeId> {
        let input = tape.concat_cols(left, right)?;
        self.mlp.forward_tape(tape, bound, input)
    }

    pub fn forward(&self, left: &Matrix, right: &Matrix) -> Result<Matrix> {
        if left.shape() != right.shape() {
            return Err(Error::Contract(format!(
                "classifier: left {:?} vs right {:?}",
                left.shape(),
                right.shape()
            )));
        }
        Ok(self.mlp.forward_plain(&left.concat_cols(right)))
    }

    /// Similarity of a single ordered pair.
    pub fn score(&self, left: &[f64], right: &[f64]) -> f64 {
        let l = Matrix::row_vector(left);
        let r = Matrix::row_vector(right);
        self.mlp.forward_plain(&l.concat_cols(&r)).scalar_value()
    }
}

/// Adam with bias correction; decay rates follow the adversarial-training
/// convention (b1 = 0.5).
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
    pub b1: f64,
    pub b2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[&Matrix]) -> Self {
        AdamState {
            m: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            t: 0,
            b1: 0.5,
            b2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "adam: {} params, {} grads, {} state slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for ((p, g), (m, v)) in
            params.iter().zip(grads.iter()).zip(self.m.iter().zip(self.v.iter()))
        {
            if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
                return Err(Error::Contract(format!(
                    "adam: shape mismatch param {:?} grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.b1.powi(self.t as i32);
        let bc2 = 1.0 - self.b2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for k in 0..g.len() {
                let gk = g.data()[k];
                m.data_mut()[k] = self.b1 * m.data()[k] + (1.0 - self.b1) * gk;
                v.data_mut()[k] = self.b2 * v.data()[k] + (1.0 - self.b2) * gk * gk;
                let m_hat = m.data()[k] / bc1;
                let v_hat = v.data()[k] / bc2;
                p.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
