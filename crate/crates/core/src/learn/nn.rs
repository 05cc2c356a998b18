//! Minimal dense networks with hand-written backprop: ELU MLPs, a Gaussian
//! policy head with state-independent log-std, a multi-head value net, and
//! Adam over flattened parameters. Everything is f64 and single-threaded;
//! batched passes are GEMMs.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp() - 1.0
    }
}

fn elu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    /// (out x in)
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn new(inp: usize, out: usize, scale: f64, rng: &mut impl Rng) -> Linear {
        let s = scale * (6.0 / (inp + out) as f64).sqrt();
        Linear {
            w: Array2::from_shape_fn((out, inp), |_| rng.gen_range(-s..s)),
            b: Array1::zeros(out),
        }
    }
}

/// ELU between layers, linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Cached activations from one forward pass.
pub struct MlpCache {
    /// Input to each layer (B x in_i).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer (B x out_i).
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Mlp {
    /// `dims` = [input, hidden..., output]. The final layer weights scale by
    /// `out_scale` (small values keep initial policy outputs near zero).
    pub fn new(dims: &[usize], out_scale: f64, rng: &mut impl Rng) -> Mlp {
        assert!(dims.len() >= 2);
        let layers = (0..dims.len() - 1)
            .map(|i| {
                let scale = if i == dims.len() - 2 { out_scale } else { 1.0 };
                Linear::new(dims[i], dims[i + 1], scale, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            let mut z = cur.dot(&layer.w.t());
            z += &layer.b;
            if i + 1 < self.layers.len() {
                pre.push(z.clone());
                z.mapv_inplace(elu);
            }
            cur = z;
        }
        (cur, MlpCache { inputs, pre })
    }

    /// Output without caching (rollout-time inference).
    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = cur.dot(&layer.w.t());
            z += &layer.b;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(elu);
            }
            cur = z;
        }
        cur
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.dim())))
                .collect(),
        }
    }

    /// Accumulate parameter gradients for upstream gradient `d_out`
    /// (B x out). Returns the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        d_out: &Array2<f64>,
        grads: &mut MlpGrads,
    ) -> Array2<f64> {
        let mut dz = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                // Upstream crossed an ELU.
                let g = cache.pre[i].mapv(elu_grad);
                dz *= &g;
            }
            let x = &cache.inputs[i];
            grads.layers[i].0 += &dz.t().dot(x);
            grads.layers[i].1 += &dz.sum_axis(Axis(0));
            if i > 0 {
                dz = dz.dot(&self.layers[i].w);
            }
        }
        dz.dot(&self.layers[0].w)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
    }

    pub fn read_flat(&mut self, data: &[f64]) -> usize {
        let mut off = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut() {
                *v = data[off];
                off += 1;
            }
            for v in l.b.iter_mut() {
                *v = data[off];
                off += 1;
            }
        }
        off
    }
}

impl MlpGrads {
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
    }
}

/// Gaussian policy: MLP mean plus a state-independent learnable per-joint
/// log standard deviation.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub mlp: Mlp,
    pub log_std: Array1<f64>,
}

impl PolicyNet {
    pub fn new(obs_dim: usize, hidden: &[usize], act_dim: usize, init_std: f64, rng: &mut impl Rng) -> PolicyNet {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(act_dim);
        PolicyNet {
            mlp: Mlp::new(&dims, 0.01, rng),
            log_std: Array1::from_elem(act_dim, init_std.ln()),
        }
    }

    pub fn act_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    /// Diagonal Gaussian log density of `actions` under means `mean`.
    pub fn log_prob(&self, mean: &Array2<f64>, actions: &Array2<f64>) -> Array1<f64> {
        let half_log_tau = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let mut out = Array1::zeros(mean.nrows());
        for b in 0..mean.nrows() {
            let mut lp = 0.0;
            for j in 0..mean.ncols() {
                let sigma = self.log_std[j].exp();
                let z = (actions[(b, j)] - mean[(b, j)]) / sigma;
                lp += -0.5 * z * z - self.log_std[j] - half_log_tau;
            }
            out[b] = lp;
        }
        out
    }

    /// Entropy of the diagonal Gaussian (state independent).
    pub fn entropy(&self) -> f64 {
        let c = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        self.log_std.iter().map(|ls| ls + c).sum()
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params() + self.log_std.len()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        self.mlp.write_flat(out);
        out.extend(self.log_std.iter());
    }

    pub fn read_flat(&mut self, data: &[f64]) {
        let off = self.mlp.read_flat(data);
        for (i, v) in self.log_std.iter_mut().enumerate() {
            *v = data[off + i];
        }
        assert_eq!(off + self.log_std.len(), data.len());
    }
}

/// Multi-head critic: a shared trunk whose final linear layer emits one
/// value per reward term. The total value is the head sum by construction.
#[derive(Debug, Clone)]
pub struct ValueNet {
    pub mlp: Mlp,
}

impl ValueNet {
    pub fn new(obs_dim: usize, hidden: &[usize], heads: usize, rng: &mut impl Rng) -> ValueNet {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(heads);
        ValueNet {
            mlp: Mlp::new(&dims, 1.0, rng),
        }
    }

    pub fn heads(&self) -> usize {
        self.mlp.out_dim()
    }

    /// Per-head values (B x K).
    pub fn values(&self, obs: &Array2<f64>) -> Array2<f64> {
        self.mlp.infer(obs)
    }

    /// `V_total(s) = sum_i V_i(s)`.
    pub fn total(values: &Array2<f64>) -> Array1<f64> {
        values.sum_axis(Axis(1))
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Scale `grads` in place so the global L2 norm does not exceed `max_norm`.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}
