//! Fully connected ELU network with a softmax cross-entropy head.
//!
//! Parameters are flattened layer by layer: the weight matrix of layer `l`
//! (row-major, `out x in`) followed by its bias. Gradients come from
//! backpropagation and Hessian-vector products from the R-operator applied
//! to the forward and backward passes, so both are exact.

use rand::Rng;

use super::dataset::{Dataset, LabeledSample};
use super::model::{Batch, LossModel};
use crate::error::{invalid, Result};
use crate::kernel::{ParamVector, Purpose, RngStream, StreamRng};

#[inline]
fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

#[inline]
fn elu_d1(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

#[inline]
fn elu_d2(z: f64) -> f64 {
    if z > 0.0 {
        0.0
    } else {
        z.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpEluModel {
    widths: Vec<usize>,
    layers: Vec<Layer>,
    n_params: usize,
}

struct Forward {
    /// Layer inputs; `acts[0]` is the feature vector.
    acts: Vec<Vec<f64>>,
    /// Pre-activations per layer; the last entry holds the logits.
    pre: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl MlpEluModel {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(invalid("network needs at least input and output widths, all positive"));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut off = 0;
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            layers.push(Layer {
                fan_in,
                fan_out,
                w_off: off,
                b_off: off + fan_in * fan_out,
            });
            off += fan_in * fan_out + fan_out;
        }
        Ok(Self {
            widths,
            layers,
            n_params: off,
        })
    }

    /// Two hidden layers of widths 80 and 60.
    pub fn standard(input: usize, classes: usize) -> Result<Self> {
        Self::new(vec![input, 80, 60, classes])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().expect("nonempty")
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init(&self, rng: &RngStream) -> ParamVector {
        let mut r = rng.child(Purpose::Init).rng();
        let mut w = vec![0.0; self.n_params];
        for l in &self.layers {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for x in &mut w[l.w_off..l.b_off] {
                *x = r.random_range(-limit..limit);
            }
        }
        ParamVector::from_raw(w)
    }

    pub fn check_sample(&self, s: &LabeledSample) -> Result<()> {
        if s.x.len() != self.input_dim() {
            return Err(invalid(format!(
                "sample has {} features, network expects {}",
                s.x.len(),
                self.input_dim()
            )));
        }
        if s.y >= self.num_classes() {
            return Err(invalid(format!(
                "label {} outside 0..{}",
                s.y,
                self.num_classes()
            )));
        }
        Ok(())
    }

    fn affine(&self, l: &Layer, w: &[f64], input: &[f64]) -> Vec<f64> {
        let mut out = w[l.b_off..l.b_off + l.fan_out].to_vec();
        for (o, out_j) in out.iter_mut().enumerate() {
            let row = &w[l.w_off + o * l.fan_in..l.w_off + (o + 1) * l.fan_in];
            *out_j += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
        }
        out
    }

    /// `W^T delta` for layer `l`.
    fn affine_t(&self, l: &Layer, w: &[f64], delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; l.fan_in];
        for (o, &d) in delta.iter().enumerate() {
            let row = &w[l.w_off + o * l.fan_in..l.w_off + (o + 1) * l.fan_in];
            for (x, r) in out.iter_mut().zip(row) {
                *x += r * d;
            }
        }
        out
    }

    fn forward(&self, w: &[f64], x: &[f64]) -> Forward {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut input = x.to_vec();
        for (k, l) in self.layers.iter().enumerate() {
            let z = self.affine(l, w, &input);
            acts.push(std::mem::take(&mut input));
            if k < last {
                input = z.iter().map(|&v| elu(v)).collect();
            }
            pre.push(z);
        }
        let logits = pre.last().expect("at least one layer");
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs = exps.into_iter().map(|e| e / total).collect();
        Forward { acts, pre, probs }
    }

    fn cross_entropy(fw: &Forward, y: usize) -> f64 {
        let logits = fw.pre.last().expect("logits");
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        lse - logits[y]
    }

    pub fn sample_loss(&self, w: &ParamVector, s: &LabeledSample) -> f64 {
        Self::cross_entropy(&self.forward(w.as_slice(), &s.x), s.y)
    }

    pub fn predict(&self, w: &ParamVector, x: &[f64]) -> usize {
        let fw = self.forward(w.as_slice(), x);
        fw.probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    /// Loss and gradient for one sample, accumulating the gradient into `grad`.
    fn backprop_into(&self, w: &[f64], s: &LabeledSample, grad: &mut [f64]) -> f64 {
        let fw = self.forward(w, &s.x);
        let loss = Self::cross_entropy(&fw, s.y);
        let mut delta = fw.probs.clone();
        delta[s.y] -= 1.0;
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let a = &fw.acts[k];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut grad[l.w_off + o * l.fan_in..l.w_off + (o + 1) * l.fan_in];
                for (g, &ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
                grad[l.b_off + o] += d;
            }
            if k > 0 {
                let back = self.affine_t(l, w, &delta);
                delta = back
                    .iter()
                    .zip(&fw.pre[k - 1])
                    .map(|(b, &z)| b * elu_d1(z))
                    .collect();
            }
        }
        loss
    }

    pub fn sample_grad(&self, w: &ParamVector, s: &LabeledSample) -> ParamVector {
        let mut g = vec![0.0; self.n_params];
        self.backprop_into(w.as_slice(), s, &mut g);
        ParamVector::from_raw(g)
    }

    /// Exact Hessian-vector product of the per-sample loss.
    pub fn sample_hvp(&self, w: &ParamVector, s: &LabeledSample, v: &ParamVector) -> ParamVector {
        let (w, v) = (w.as_slice(), v.as_slice());
        let fw = self.forward(w, &s.x);
        let last = self.layers.len() - 1;

        // R-forward: directional derivatives of pre-activations and layer inputs.
        let mut r_acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut r_pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut r_input = vec![0.0; self.input_dim()];
        for (k, l) in self.layers.iter().enumerate() {
            let mut rz = self.affine(l, v, &fw.acts[k]);
            let wr = self.affine_t_free(l, w, &r_input);
            for (a, b) in rz.iter_mut().zip(&wr) {
                *a += b;
            }
            r_acts.push(std::mem::take(&mut r_input));
            if k < last {
                r_input = rz.iter().zip(&fw.pre[k]).map(|(r, &z)| r * elu_d1(z)).collect();
            }
            r_pre.push(rz);
        }

        // Output layer: R{p - e_y} = diag(p) Rz - p (p . Rz).
        let rz_out = r_pre.last().expect("logits");
        let p_dot: f64 = fw.probs.iter().zip(rz_out).map(|(p, r)| p * r).sum();
        let mut r_delta: Vec<f64> = fw.probs.iter().zip(rz_out).map(|(p, r)| p * (r - p_dot)).collect();
        let mut delta = fw.probs.clone();
        delta[s.y] -= 1.0;

        let mut out = vec![0.0; self.n_params];
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let a = &fw.acts[k];
            let ra = &r_acts[k];
            for o in 0..l.fan_out {
                let row = &mut out[l.w_off + o * l.fan_in..l.w_off + (o + 1) * l.fan_in];
                let (d, rd) = (delta[o], r_delta[o]);
                for ((g, &ai), &rai) in row.iter_mut().zip(a).zip(ra) {
                    *g += rd * ai + d * rai;
                }
                out[l.b_off + o] += rd;
            }
            if k > 0 {
                let back = self.affine_t(l, w, &delta);
                let mut r_back = self.affine_t(l, v, &delta);
                for (rb, x) in r_back.iter_mut().zip(self.affine_t(l, w, &r_delta)) {
                    *rb += x;
                }
                let z = &fw.pre[k - 1];
                let rz = &r_pre[k - 1];
                r_delta = (0..l.fan_in)
                    .map(|j| elu_d2(z[j]) * rz[j] * back[j] + elu_d1(z[j]) * r_back[j])
                    .collect();
                delta = back.iter().zip(z).map(|(b, &zz)| b * elu_d1(zz)).collect();
            }
        }
        ParamVector::from_raw(out)
    }

    /// `W x` without the bias, for the R-forward pass.
    fn affine_t_free(&self, l: &Layer, w: &[f64], input: &[f64]) -> Vec<f64> {
        (0..l.fan_out)
            .map(|o| {
                w[l.w_off + o * l.fan_in..l.w_off + (o + 1) * l.fan_in]
                    .iter()
                    .zip(input)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Mean cross-entropy and its exact gradient over a batch.
pub fn mlp_loss_and_grad(
    model: &MlpEluModel,
    w: &ParamVector,
    batch: &Batch<LabeledSample>,
) -> Result<(f64, ParamVector)> {
    w.check_dim(model.param_count(), "parameter")?;
    for s in batch.samples() {
        model.check_sample(s)?;
    }
    let mut g = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    for s in batch.samples() {
        loss += model.backprop_into(w.as_slice(), s, &mut g);
    }
    let scale = 1.0 / batch.len() as f64;
    for x in &mut g {
        *x *= scale;
    }
    Ok((loss * scale, ParamVector::from_raw(g)))
}

/// A user whose objective is the empirical risk of an [`MlpEluModel`] over a
/// finite local dataset. Exact oracles are full-dataset evaluations and
/// batches are drawn uniformly with replacement.
#[derive(Clone, Debug)]
pub struct MlpTask {
    net: MlpEluModel,
    data: Dataset,
}

impl MlpTask {
    pub fn new(net: MlpEluModel, data: Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("user dataset is empty"));
        }
        if data.feature_dim() != net.input_dim() {
            return Err(invalid(format!(
                "dataset has {} features, network expects {}",
                data.feature_dim(),
                net.input_dim()
            )));
        }
        if data.num_classes() > net.num_classes() {
            return Err(invalid("dataset label set exceeds network outputs"));
        }
        Ok(Self { net, data })
    }

    pub fn net(&self) -> &MlpEluModel {
        &self.net
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn accuracy(&self, w: &ParamVector, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .samples()
            .iter()
            .filter(|s| self.net.predict(w, &s.x) == s.y)
            .count();
        hits as f64 / data.len() as f64
    }
}

impl LossModel for MlpTask {
    type Sample = LabeledSample;

    fn dim(&self) -> usize {
        self.net.param_count()
    }

    fn loss(&self, s: &LabeledSample, w: &ParamVector) -> f64 {
        self.net.sample_loss(w, s)
    }

    fn grad_sample(&self, s: &LabeledSample, w: &ParamVector) -> ParamVector {
        self.net.sample_grad(w, s)
    }

    fn hvp_sample(&self, s: &LabeledSample, w: &ParamVector, v: &ParamVector) -> ParamVector {
        self.net.sample_hvp(w, s, v)
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> LabeledSample {
        self.data.samples()[rng.random_range(0..self.data.len())].clone()
    }

    fn exact_loss(&self, w: &ParamVector) -> Option<f64> {
        let total: f64 = self.data.samples().iter().map(|s| self.net.sample_loss(w, s)).sum();
        Some(total / self.data.len() as f64)
    }

    fn exact_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        let mut g = vec![0.0; self.net.param_count()];
        for s in self.data.samples() {
            self.net.backprop_into(w.as_slice(), s, &mut g);
        }
        let mut g = ParamVector::from_raw(g);
        g.scale(1.0 / self.data.len() as f64);
        Some(g)
    }

    fn exact_hvp(&self, w: &ParamVector, v: &ParamVector) -> Option<ParamVector> {
        let mut acc = ParamVector::zeros(self.net.param_count());
        for s in self.data.samples() {
            acc += &self.net.sample_hvp(w, s, v);
        }
        acc.scale(1.0 / self.data.len() as f64);
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{finite_diff_grad, relative_error};
    use rand::Rng;

    fn tiny() -> MlpEluModel {
        MlpEluModel::new(vec![4, 6, 5, 3]).unwrap()
    }

    fn samples(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut r = RngStream::new(seed).rng();
        (0..n)
            .map(|i| LabeledSample {
                x: (0..4).map(|_| r.random_range(-1.0..1.0)).collect(),
                y: i % 3,
            })
            .collect()
    }

    #[test]
    fn layout_and_param_count() {
        let m = tiny();
        assert_eq!(m.param_count(), 4 * 6 + 6 + 6 * 5 + 5 + 5 * 3 + 3);
        assert_eq!(MlpEluModel::standard(784, 10).unwrap().widths(), &[784, 80, 60, 10]);
        assert!(MlpEluModel::new(vec![3]).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let m = MlpEluModel::new(vec![4, 6, 5, 10]).unwrap();
        let w = ParamVector::zeros(m.param_count());
        let batch = Batch::new(
            (0..10)
                .map(|y| LabeledSample { x: vec![0.3, -0.2, 0.9, 0.1], y })
                .collect(),
        )
        .unwrap();
        let (loss, _) = mlp_loss_and_grad(&m, &w, &batch).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = tiny();
        let w = m.init(&RngStream::new(4));
        let batch = Batch::new(samples(5, 9)).unwrap();
        let (_, g) = mlp_loss_and_grad(&m, &w, &batch).unwrap();
        let fd = finite_diff_grad(|x| Ok(mlp_loss_and_grad(&m, x, &batch)?.0), &w, 1e-5).unwrap();
        assert!(relative_error(&g, &fd) < 1e-5, "rel err {}", relative_error(&g, &fd));
    }

    #[test]
    fn hvp_matches_gradient_differences_and_is_symmetric() {
        let m = tiny();
        let w = m.init(&RngStream::new(4));
        let s = &samples(1, 3)[0];
        let mut r = RngStream::new(8).rng();
        let u = ParamVector::from_fn(m.param_count(), |_| r.random_range(-1.0..1.0));
        let v = ParamVector::from_fn(m.param_count(), |_| r.random_range(-1.0..1.0));
        let hv = m.sample_hvp(&w, s, &v);
        let fd = finite_diff_grad(|x| Ok(m.sample_grad(x, s).dot(&v)), &w, 1e-5).unwrap();
        assert!(relative_error(&hv, &fd) < 1e-6, "rel err {}", relative_error(&hv, &fd));
        let hu = m.sample_hvp(&w, s, &u);
        assert!((u.dot(&hv) - v.dot(&hu)).abs() < 1e-10);
    }

    #[test]
    fn duplicating_batch_changes_nothing() {
        let m = tiny();
        let w = m.init(&RngStream::new(1));
        let base = samples(5, 2);
        let mut twice = base.clone();
        twice.extend(base.clone());
        let (l1, g1) = mlp_loss_and_grad(&m, &w, &Batch::new(base).unwrap()).unwrap();
        let (l2, g2) = mlp_loss_and_grad(&m, &w, &Batch::new(twice).unwrap()).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        assert!(g1.dist(&g2) < 1e-14);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let m = tiny();
        let w = m.init(&RngStream::new(1));
        let batch = Batch::new(vec![LabeledSample { x: vec![0.0; 4], y: 3 }]).unwrap();
        assert!(mlp_loss_and_grad(&m, &w, &batch).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let m = tiny();
        let a = m.init(&RngStream::new(3));
        assert_eq!(a, m.init(&RngStream::new(3)));
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(a.as_slice()[..24].iter().all(|x| x.abs() <= limit));
        assert!(a.as_slice()[24..30].iter().all(|&x| x == 0.0));
    }
}
