//! Shared actor-critic MLP over a flat parameter vector.
//!
//! Layout: tanh trunk layers, then a linear mean head, a linear value head and
//! a state-independent log standard deviation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Dense {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

impl Dense {
    fn weights<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.inputs, self.outputs), &p[self.w..self.w + self.inputs * self.outputs])
            .expect("layout matches parameter vector")
    }

    fn bias<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&p[self.b..self.b + self.outputs])
    }

    fn forward(&self, p: &[f64], x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights(p)) + self.bias(p)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    fn backward(&self, p: &[f64], x: &ArrayView2<f64>, dz: &Array2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let dw = x.t().dot(dz);
        for (g, d) in grad[self.w..self.w + self.inputs * self.outputs].iter_mut().zip(dw.iter()) {
            *g += d;
        }
        for (g, d) in grad[self.b..self.b + self.outputs].iter_mut().zip(dz.sum_axis(Axis(0)).iter()) {
            *g += d;
        }
        dz.dot(&self.weights(p).t())
    }
}

/// Network shape. Parameters live outside, in a flat `Vec<f64>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Shape", into = "Shape")]
pub struct ActorCritic {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
struct Shape {
    obs_dim: usize,
    hidden: Vec<usize>,
    act_dim: usize,
}

impl From<Shape> for ActorCritic {
    fn from(s: Shape) -> Self {
        ActorCritic::new(s.obs_dim, s.hidden, s.act_dim)
    }
}

impl From<ActorCritic> for Shape {
    fn from(n: ActorCritic) -> Self {
        Shape { obs_dim: n.obs_dim, hidden: n.hidden, act_dim: n.act_dim }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Layout {
    trunk: Vec<Dense>,
    mean: Dense,
    value: Dense,
    log_std: usize,
    len: usize,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each trunk layer followed by the final trunk output.
    activations: Vec<Array2<f64>>,
    pub mean: Array2<f64>,
    pub value: Array1<f64>,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, hidden: Vec<usize>, act_dim: usize) -> Self {
        let mut net = Self { obs_dim, hidden, act_dim, layout: Layout::default() };
        net.layout = net.build_layout();
        net
    }

    fn build_layout(&self) -> Layout {
        let mut offset = 0;
        let mut dense = |inputs: usize, outputs: usize| {
            let d = Dense { w: offset, b: offset + inputs * outputs, inputs, outputs };
            offset += inputs * outputs + outputs;
            d
        };
        let mut trunk = Vec::new();
        let mut width = self.obs_dim;
        for &h in &self.hidden {
            trunk.push(dense(width, h));
            width = h;
        }
        let mean = dense(width, self.act_dim);
        let value = dense(width, 1);
        let log_std = offset;
        Layout { trunk, mean, value, log_std, len: log_std + self.act_dim }
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn log_std<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.layout.log_std..self.layout.log_std + self.act_dim]
    }

    pub fn log_std_offset(&self) -> usize {
        self.layout.log_std
    }

    /// Scaled-normal trunk weights, a small mean head, a zero value head and
    /// zero log-std. Biases start at zero.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        let mut fill = |d: &Dense, gain: f64, p: &mut [f64]| {
            let normal = Normal::new(0.0, gain / (d.inputs as f64).sqrt()).expect("positive std");
            for w in &mut p[d.w..d.w + d.inputs * d.outputs] {
                *w = normal.sample(rng);
            }
        };
        for d in &self.layout.trunk {
            fill(d, 1.0, &mut p);
        }
        fill(&self.layout.mean, 0.01, &mut p);
        p
    }

    pub fn forward(&self, params: &[f64], obs: &ArrayView2<f64>) -> ForwardCache {
        let mut activations = vec![obs.to_owned()];
        for d in &self.layout.trunk {
            let z = d.forward(params, &activations[activations.len() - 1].view());
            activations.push(z.mapv(f64::tanh));
        }
        let top = activations[activations.len() - 1].view();
        let mean = self.layout.mean.forward(params, &top);
        let value = self.layout.value.forward(params, &top).index_axis_move(Axis(1), 0);
        ForwardCache { activations, mean, value }
    }

    /// Gradient of a loss with respect to all parameters, given its gradient
    /// with respect to the means, values and log-std.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        d_mean: &Array2<f64>,
        d_value: &Array1<f64>,
        d_log_std: &[f64],
    ) -> Vec<f64> {
        let mut grad = vec![0.0; self.param_count()];
        let top = cache.activations[cache.activations.len() - 1].view();
        let d_value = d_value.view().insert_axis(Axis(1)).to_owned();
        let mut dh = self.layout.mean.backward(params, &top, d_mean, &mut grad)
            + self.layout.value.backward(params, &top, &d_value, &mut grad);
        for (i, d) in self.layout.trunk.iter().enumerate().rev() {
            let out = &cache.activations[i + 1];
            let dz = dh * &out.mapv(|h| 1.0 - h * h);
            dh = d.backward(params, &cache.activations[i].view(), &dz, &mut grad);
        }
        for (g, d) in grad[self.layout.log_std..].iter_mut().zip(d_log_std) {
            *g += d;
        }
        grad
    }
}
