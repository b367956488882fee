//! Logistic regression and a one-hidden-layer tanh network over a flat
//! parameter vector, with softmax cross-entropy and focal losses.

use serde::{Deserialize, Serialize};

use crate::stats::SeededStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ModelKind {
    #[default]
    Logistic,
    Mlp { hidden: usize },
}

impl ModelKind {
    pub const DEFAULT_HIDDEN: usize = 16;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    /// `−ξ_t (1 − p_t)^υ ln p_t` with `ξ_t = ξ` for class 1 and `1 − ξ` for
    /// class 0. Binary labels only.
    Focal { xi: f64, upsilon: f64 },
}

impl LossKind {
    pub fn focal_default() -> Self {
        LossKind::Focal { xi: 0.25, upsilon: 2.0 }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if let LossKind::Focal { xi, upsilon } = *self {
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::param("xi", "must lie in [0, 1]"));
            }
            if !(upsilon >= 0.0 && upsilon.is_finite()) {
                return Err(Error::param("upsilon", "must be non-negative"));
            }
            if n_classes != 2 {
                return Err(Error::InvalidInput(format!("focal loss needs 2 classes, data has {n_classes}")));
            }
        }
        Ok(())
    }

    /// Loss of one sample and its gradient with respect to the logits.
    fn eval(&self, logits: &[f64], y: usize, dlogits: &mut [f64]) -> f64 {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let log_pt = logits[y] - lse;
        let pt = log_pt.exp();
        match *self {
            LossKind::CrossEntropy => {
                for (k, (d, z)) in dlogits.iter_mut().zip(logits).enumerate() {
                    *d = (z - lse).exp() - f64::from(u8::from(k == y));
                }
                -log_pt
            }
            LossKind::Focal { xi, upsilon } => {
                let alpha = if y == 1 { xi } else { 1.0 - xi };
                let q = 1.0 - pt;
                let loss = -alpha * q.powf(upsilon) * log_pt;
                // dL/dp_t, then chain through dp_t/dz_k = p_t (δ_ky − p_k)
                let mut dl_dpt = -alpha * q.powf(upsilon) / pt;
                if upsilon > 0.0 && q > 0.0 {
                    dl_dpt += alpha * upsilon * q.powf(upsilon - 1.0) * log_pt;
                }
                for (k, (d, z)) in dlogits.iter_mut().zip(logits).enumerate() {
                    let pk = (z - lse).exp();
                    *d = dl_dpt * pt * (f64::from(u8::from(k == y)) - pk);
                }
                loss
            }
        }
    }
}

/// Architecture bound to input and output sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub kind: ModelKind,
    pub n_features: usize,
    pub n_classes: usize,
}

impl Network {
    pub fn new(kind: ModelKind, n_features: usize, n_classes: usize) -> Result<Self> {
        if n_features == 0 || n_classes < 2 {
            return Err(Error::param("network", "need at least one feature and two classes"));
        }
        if kind == (ModelKind::Mlp { hidden: 0 }) {
            return Err(Error::param("hidden", "must be positive"));
        }
        Ok(Self {
            kind,
            n_features,
            n_classes,
        })
    }

    /// Layer shapes as `(fan_in, fan_out)`.
    fn layers(&self) -> Vec<(usize, usize)> {
        match self.kind {
            ModelKind::Logistic => vec![(self.n_features, self.n_classes)],
            ModelKind::Mlp { hidden } => vec![(self.n_features, hidden), (hidden, self.n_classes)],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| (i + 1) * o).sum()
    }

    /// Weights and biases uniform on `±1/sqrt(fan_in)`, layer by layer,
    /// each layer stored as `fan_out × fan_in` weights then `fan_out` biases.
    pub fn init(&self, stream: &mut SeededStream) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(fan_in + 1) * fan_out {
                params.push(bound * (2.0 * stream.uniform() - 1.0));
            }
        }
        params
    }

    fn affine(w: &[f64], fan_in: usize, fan_out: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let (weights, bias) = w.split_at(fan_in * fan_out);
        for o in 0..fan_out {
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            out.push(bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
        }
    }

    pub fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            ModelKind::Logistic => Self::affine(params, self.n_features, self.n_classes, x, &mut out),
            ModelKind::Mlp { hidden } => {
                let split = (self.n_features + 1) * hidden;
                let mut h = Vec::new();
                Self::affine(&params[..split], self.n_features, hidden, x, &mut h);
                h.iter_mut().for_each(|v| *v = v.tanh());
                Self::affine(&params[split..], hidden, self.n_classes, &h, &mut out);
            }
        }
        out
    }

    /// Argmax of the logits, ties to the lower class.
    pub fn predict(&self, params: &[f64], x: &[f64]) -> usize {
        let z = self.logits(params, x);
        let mut best = 0;
        for (k, v) in z.iter().enumerate().skip(1) {
            if *v > z[best] {
                best = k;
            }
        }
        best
    }

    /// Mean loss over `rows` of `xs` (row-major) with labels `ys`.
    pub fn loss(&self, params: &[f64], loss: &LossKind, xs: &[f64], ys: &[usize]) -> f64 {
        let mut scratch = vec![0.0; self.n_classes];
        let n = ys.len() as f64;
        xs.chunks(self.n_features)
            .zip(ys)
            .map(|(x, &y)| loss.eval(&self.logits(params, x), y, &mut scratch))
            .sum::<f64>()
            / n
    }

    /// Mean loss and its exact gradient with respect to `params`.
    pub fn loss_and_grad(&self, params: &[f64], loss: &LossKind, xs: &[f64], ys: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let mut dz = vec![0.0; self.n_classes];
        let mut total = 0.0;
        let n = ys.len() as f64;
        let (d, c) = (self.n_features, self.n_classes);
        for (x, &y) in xs.chunks(d).zip(ys) {
            match self.kind {
                ModelKind::Logistic => {
                    let mut z = Vec::new();
                    Self::affine(params, d, c, x, &mut z);
                    total += loss.eval(&z, y, &mut dz);
                    accumulate_affine(&mut grad, d, c, x, &dz, n);
                }
                ModelKind::Mlp { hidden } => {
                    let split = (d + 1) * hidden;
                    let (p1, p2) = params.split_at(split);
                    let mut h = Vec::new();
                    Self::affine(p1, d, hidden, x, &mut h);
                    h.iter_mut().for_each(|v| *v = v.tanh());
                    let mut z = Vec::new();
                    Self::affine(p2, hidden, c, &h, &mut z);
                    total += loss.eval(&z, y, &mut dz);
                    let (g1, g2) = grad.split_at_mut(split);
                    accumulate_affine(g2, hidden, c, &h, &dz, n);
                    // back through the output weights and tanh
                    let w2 = &p2[..hidden * c];
                    let dh: Vec<f64> = (0..hidden)
                        .map(|j| {
                            let back: f64 = (0..c).map(|o| w2[o * hidden + j] * dz[o]).sum();
                            back * (1.0 - h[j] * h[j])
                        })
                        .collect();
                    accumulate_affine(g1, d, hidden, x, &dh, n);
                }
            }
        }
        (total / n, grad)
    }
}

/// Adds `upstream ⊗ [x, 1] / n` into an affine layer's gradient block.
fn accumulate_affine(grad: &mut [f64], fan_in: usize, fan_out: usize, x: &[f64], upstream: &[f64], n: f64) {
    let (gw, gb) = grad.split_at_mut(fan_in * fan_out);
    for o in 0..fan_out {
        let u = upstream[o] / n;
        gb[o] += u;
        for (g, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
            *g += u * xi;
        }
    }
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖, 1e-12)` between the analytic
/// gradient `a` and central differences `n` with step `h`.
///
/// The error is taken over the whole vector: a single component near zero
/// carries round-off of order `ε·L/h` from the differences, which would
/// swamp a componentwise ratio without saying anything about the gradient.
pub fn gradient_check(
    net: &Network,
    params: &[f64],
    loss: &LossKind,
    xs: &[f64],
    ys: &[usize],
    h: f64,
) -> f64 {
    let (_, analytic) = net.loss_and_grad(params, loss, xs, ys);
    let mut p = params.to_vec();
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = net.loss(&p, loss, xs, ys);
        p[i] = orig - h;
        let down = net.loss(&p, loss, xs, ys);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        diff += (analytic[i] - numeric).powi(2);
        norm_a += analytic[i].powi(2);
        norm_n += numeric * numeric;
    }
    diff.sqrt() / norm_a.sqrt().max(norm_n.sqrt()).max(1e-12)
}
