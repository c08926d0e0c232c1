//! Batched forward pass and backpropagation through time.
//!
//! Sequences are stored time-major: row `t * B + b` holds frame `t` of
//! sequence `b`. Shorter sequences are zero-padded and their padded frames
//! carry zero loss weight.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};

use super::config::{CellType, PostfilterConfig};
use super::params::{cst, Params, RnnLayer, Scalar};
use crate::error::{Error, Result};

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Variable-length sequences packed into one time-major matrix.
#[derive(Debug, Clone)]
pub struct SequenceBatch<T> {
    x: Array2<T>,
    lengths: Vec<usize>,
    frames: usize,
}

impl<T: Scalar> SequenceBatch<T> {
    pub fn new(seqs: &[ArrayView2<'_, T>]) -> Result<Self> {
        let Some(first) = seqs.first() else {
            return Err(Error::InvalidInput("empty batch".into()));
        };
        let width = first.ncols();
        if let Some(bad) = seqs.iter().find(|q| q.ncols() != width) {
            return Err(Error::shape("batch feature width", width.to_string(), bad.ncols().to_string()));
        }
        let x = pack(seqs, width);
        let lengths: Vec<usize> = seqs.iter().map(|q| q.nrows()).collect();
        let frames = lengths.iter().copied().max().unwrap_or(0);
        Ok(Self { x, lengths, frames })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    /// Splits a packed `[T * B, K]` matrix back into per-sequence `[L_b, K]`.
    pub fn unpack(&self, packed: &Array2<T>) -> Vec<Array2<T>> {
        let b = self.batch_size();
        self.lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| Array2::from_shape_fn((len, packed.ncols()), |(t, k)| packed[[t * b + i, k]]))
            .collect()
    }
}

fn pack<T: Scalar>(seqs: &[ArrayView2<'_, T>], width: usize) -> Array2<T> {
    let b = seqs.len();
    let frames = seqs.iter().map(|q| q.nrows()).max().unwrap_or(0);
    let mut x = Array2::zeros((frames * b, width));
    for (i, q) in seqs.iter().enumerate() {
        for (t, row) in q.rows().into_iter().enumerate() {
            x.row_mut(t * b + i).assign(&row);
        }
    }
    x
}

/// One training sequence: input features, target mask and the per-bin loss
/// weight `|Y|^beta`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceExample<'a, T> {
    pub features: ArrayView2<'a, T>,
    pub target: ArrayView2<'a, T>,
    pub weight: ArrayView2<'a, T>,
}

#[derive(Debug, Clone)]
pub struct TrainingBatch<T> {
    inputs: SequenceBatch<T>,
    target: Array2<T>,
    weight_sq: Array2<T>,
    count: usize,
}

impl<T: Scalar> TrainingBatch<T> {
    pub fn new(examples: &[SequenceExample<'_, T>]) -> Result<Self> {
        let feats: Vec<_> = examples.iter().map(|e| e.features).collect();
        let inputs = SequenceBatch::new(&feats)?;
        let k = examples[0].target.ncols();
        for e in examples {
            if e.target.dim() != (e.features.nrows(), k) || e.weight.dim() != e.target.dim() {
                return Err(Error::shape(
                    "training example",
                    format!("({}, {k})", e.features.nrows()),
                    format!("{:?} / {:?}", e.target.dim(), e.weight.dim()),
                ));
            }
        }
        let targets: Vec<_> = examples.iter().map(|e| e.target).collect();
        let weights: Vec<_> = examples.iter().map(|e| e.weight).collect();
        let target = pack(&targets, k);
        let weight_sq = pack(&weights, k).mapv(|w| w * w);
        let count = examples.iter().map(|e| e.target.len()).sum();
        Ok(Self { inputs, target, weight_sq, count })
    }

    pub fn inputs(&self) -> &SequenceBatch<T> {
        &self.inputs
    }
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    input: Array2<T>,
    h_prev: Array2<T>,
    /// Activated gates, `[r, z, n]` or `[i, f, g, o]`.
    gates: Array2<T>,
    /// GRU: recurrent part of the candidate pre-activation, `W_hn h + b_hn`.
    /// LSTM: previous cell state.
    aux: Array2<T>,
    /// LSTM cell state (empty for GRU).
    cell: Array2<T>,
    output: Array2<T>,
}

#[derive(Debug, Clone)]
struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    /// Inverted-dropout scale masks applied to the input of layer `l >= 1`
    /// (index `l - 1`) and, last, to the input of the output layer.
    drop: Vec<Option<Array2<T>>>,
    fc_in: Array2<T>,
    mask: Array2<T>,
}

/// Recurrent mask estimator with analytic gradients, generic over precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Postfilter<T> {
    config: PostfilterConfig,
    params: Params<T>,
}

impl<T: Scalar> Postfilter<T> {
    pub fn new(config: PostfilterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn from_params(config: PostfilterConfig, params: Params<T>) -> Result<Self> {
        config.validate()?;
        let reference = Params::<T>::zeros(&config);
        for ((name, a), b) in reference.names().iter().zip(reference.tensors()).zip(params.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::shape("parameter tensor", format!("{name} {:?}", a.shape()), format!("{:?}", b.shape())));
            }
        }
        if reference.tensors().len() != params.tensors().len() {
            return Err(Error::shape("parameter set", reference.tensors().len().to_string(), params.tensors().len().to_string()));
        }
        if !params.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &PostfilterConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Scalar>(&self) -> Postfilter<U> {
        Postfilter { config: self.config.clone(), params: self.params.cast() }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.config.input_width() {
            return Err(Error::shape("postfilter features", self.config.input_width().to_string(), width.to_string()));
        }
        Ok(())
    }

    /// Mask estimate for one utterance `[L, F]`, dropout disabled.
    pub fn predict(&self, features: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self.predict_batch(&[features])?.pop().expect("one sequence"))
    }

    pub fn predict_batch(&self, features: &[ArrayView2<'_, T>]) -> Result<Vec<Array2<T>>> {
        let batch = SequenceBatch::new(features)?;
        self.check_width(batch.width())?;
        let cache = self.run(&batch, None);
        Ok(batch.unpack(&cache.mask))
    }

    /// Packed `[T * B, K]` mask estimate. Dropout is active when `rng` is given.
    pub fn forward(&self, batch: &SequenceBatch<T>, rng: Option<&mut dyn RngCore>) -> Result<Array2<T>> {
        self.check_width(batch.width())?;
        Ok(self.run(batch, rng).mask)
    }

    /// Mean of `((M - M_hat) |Y|^beta)^2` over all valid bins of the batch.
    pub fn loss(&self, batch: &TrainingBatch<T>, rng: Option<&mut dyn RngCore>) -> Result<T> {
        self.check_width(batch.inputs.width())?;
        let cache = self.run(&batch.inputs, rng);
        Ok(weighted_loss(&cache.mask, batch))
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &TrainingBatch<T>, rng: Option<&mut dyn RngCore>) -> Result<(T, Params<T>)> {
        self.check_width(batch.inputs.width())?;
        let cache = self.run(&batch.inputs, rng);
        let loss = weighted_loss(&cache.mask, batch);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss:?}")));
        }
        Ok((loss, self.backward(&batch.inputs, batch, &cache)))
    }

    fn run(&self, batch: &SequenceBatch<T>, mut rng: Option<&mut dyn RngCore>) -> ForwardCache<T> {
        let p = self.config.dropout;
        let mut drop = Vec::new();
        let mut layers = Vec::with_capacity(self.config.layers);
        let mut input = batch.x.clone();
        let norm = self.config.input_norm;
        if !norm.is_identity() {
            let (offset, scale) = (cst::<T>(norm.offset), cst::<T>(norm.scale));
            input.mapv_inplace(|v| (v - offset) * scale);
        }
        for (l, layer) in self.params.rnn.iter().enumerate() {
            if l > 0 {
                let mask = rng.as_deref_mut().filter(|_| p > 0.0).map(|r| dropout_mask(r, input.dim(), p));
                if let Some(m) = &mask {
                    input *= m;
                }
                drop.push(mask);
            }
            let cache = match self.config.cell {
                CellType::Gru => gru_forward(layer, input, batch.batch_size(), batch.frames()),
                CellType::Lstm => lstm_forward(layer, input, batch.batch_size(), batch.frames()),
            };
            input = cache.output.clone();
            layers.push(cache);
        }
        let mask = rng.filter(|_| p > 0.0).map(|r| dropout_mask(r, input.dim(), p));
        if let Some(m) = &mask {
            input *= m;
        }
        drop.push(mask);
        let mut logits = input.dot(&self.params.fc_w.t());
        logits += &self.params.fc_b;
        let out = logits.mapv(sigmoid);
        ForwardCache { layers, drop, fc_in: input, mask: out }
    }

    fn backward(&self, inputs: &SequenceBatch<T>, batch: &TrainingBatch<T>, cache: &ForwardCache<T>) -> Params<T> {
        let mut grad = Params::zeros(&self.config);
        let scale = cst::<T>(-2.0 / batch.count.max(1) as f64);
        let mut dlogit = Array2::zeros(cache.mask.dim());
        ndarray::Zip::from(&mut dlogit)
            .and(&cache.mask)
            .and(&batch.target)
            .and(&batch.weight_sq)
            .for_each(|d, &m_hat, &m, &w| *d = scale * (m - m_hat) * w * m_hat * (T::one() - m_hat));
        grad.fc_w = dlogit.t().dot(&cache.fc_in);
        grad.fc_b = dlogit.sum_axis(Axis(0));
        let mut dh = dlogit.dot(&self.params.fc_w);
        if let Some(m) = cache.drop.last().and_then(|m| m.as_ref()) {
            dh *= m;
        }
        let (b, frames) = (inputs.batch_size(), inputs.frames());
        for l in (0..self.config.layers).rev() {
            let layer = &self.params.rnn[l];
            let lc = &cache.layers[l];
            let (dgx, dgh) = match self.config.cell {
                CellType::Gru => gru_backward(layer, lc, &dh, b, frames),
                CellType::Lstm => lstm_backward(layer, lc, &dh, b, frames),
            };
            let g = &mut grad.rnn[l];
            g.w_ih = dgx.t().dot(&lc.input);
            g.b_ih = dgx.sum_axis(Axis(0));
            g.w_hh = dgh.t().dot(&lc.h_prev);
            g.b_hh = dgh.sum_axis(Axis(0));
            if l > 0 {
                dh = dgx.dot(&layer.w_ih);
                if let Some(m) = &cache.drop[l - 1] {
                    dh *= m;
                }
            }
        }
        grad
    }
}

fn dropout_mask<T: Scalar>(rng: &mut dyn RngCore, dim: (usize, usize), p: f64) -> Array2<T> {
    let keep = cst::<T>(1.0 / (1.0 - p));
    Array2::from_shape_simple_fn(dim, || if rng.random::<f64>() < p { T::zero() } else { keep })
}

fn weighted_loss<T: Scalar>(mask: &Array2<T>, batch: &TrainingBatch<T>) -> T {
    let terms = ndarray::Zip::from(mask).and(&batch.target).and(&batch.weight_sq).map_collect(|&m_hat, &m, &w| {
        let r = m - m_hat;
        r * r * w
    });
    terms.sum() / cst::<T>(batch.count.max(1) as f64)
}

/// Input projections for every frame at once: `X W_ih^T + b_ih`.
fn input_projection<T: Scalar>(layer: &RnnLayer<T>, input: &Array2<T>) -> Array2<T> {
    let mut gx = input.dot(&layer.w_ih.t());
    gx += &layer.b_ih;
    gx
}

fn recurrent_projection<T: Scalar>(layer: &RnnLayer<T>, h: &Array2<T>) -> Array2<T> {
    let mut gh = h.dot(&layer.w_hh.t());
    gh += &layer.b_hh;
    gh
}

fn gru_forward<T: Scalar>(layer: &RnnLayer<T>, input: Array2<T>, b: usize, frames: usize) -> LayerCache<T> {
    let h = layer.w_hh.ncols();
    let rows = b * frames;
    let gx = input_projection(layer, &input);
    let mut gates = Array2::zeros((rows, 3 * h));
    let mut aux = Array2::zeros((rows, h));
    let mut output = Array2::zeros((rows, h));
    let mut h_prev = Array2::zeros((rows, h));
    let mut state = Array2::<T>::zeros((b, h));
    for t in 0..frames {
        let gh = recurrent_projection(layer, &state);
        h_prev.slice_mut(s![t * b..(t + 1) * b, ..]).assign(&state);
        for i in 0..b {
            let row = t * b + i;
            for j in 0..h {
                let r = sigmoid(gx[[row, j]] + gh[[i, j]]);
                let z = sigmoid(gx[[row, h + j]] + gh[[i, h + j]]);
                let ghn = gh[[i, 2 * h + j]];
                let n = (gx[[row, 2 * h + j]] + r * ghn).tanh();
                let new = (T::one() - z) * n + z * state[[i, j]];
                gates[[row, j]] = r;
                gates[[row, h + j]] = z;
                gates[[row, 2 * h + j]] = n;
                aux[[row, j]] = ghn;
                output[[row, j]] = new;
                state[[i, j]] = new;
            }
        }
    }
    LayerCache { input, h_prev, gates, aux, cell: Array2::zeros((0, 0)), output }
}

fn gru_backward<T: Scalar>(
    layer: &RnnLayer<T>,
    cache: &LayerCache<T>,
    d_out: &Array2<T>,
    b: usize,
    frames: usize,
) -> (Array2<T>, Array2<T>) {
    let h = layer.w_hh.ncols();
    let one = T::one();
    let mut dgx = Array2::zeros((b * frames, 3 * h));
    let mut dgh = Array2::zeros((b * frames, 3 * h));
    let mut dh_next = Array2::<T>::zeros((b, h));
    let mut direct = Array2::<T>::zeros((b, h));
    for t in (0..frames).rev() {
        for i in 0..b {
            let row = t * b + i;
            for j in 0..h {
                let dh = d_out[[row, j]] + dh_next[[i, j]];
                let (r, z, n) = (cache.gates[[row, j]], cache.gates[[row, h + j]], cache.gates[[row, 2 * h + j]]);
                let hp = cache.h_prev[[row, j]];
                let dan = dh * (one - z) * (one - n * n);
                let dar = dan * cache.aux[[row, j]] * r * (one - r);
                let daz = dh * (hp - n) * z * (one - z);
                dgx[[row, j]] = dar;
                dgx[[row, h + j]] = daz;
                dgx[[row, 2 * h + j]] = dan;
                dgh[[row, j]] = dar;
                dgh[[row, h + j]] = daz;
                dgh[[row, 2 * h + j]] = dan * r;
                direct[[i, j]] = dh * z;
            }
        }
        dh_next = dgh.slice(s![t * b..(t + 1) * b, ..]).dot(&layer.w_hh);
        dh_next += &direct;
    }
    (dgx, dgh)
}

fn lstm_forward<T: Scalar>(layer: &RnnLayer<T>, input: Array2<T>, b: usize, frames: usize) -> LayerCache<T> {
    let h = layer.w_hh.ncols();
    let rows = b * frames;
    let gx = input_projection(layer, &input);
    let mut gates = Array2::zeros((rows, 4 * h));
    let mut aux = Array2::zeros((rows, h));
    let mut cell = Array2::zeros((rows, h));
    let mut output = Array2::zeros((rows, h));
    let mut h_prev = Array2::zeros((rows, h));
    let mut state = Array2::<T>::zeros((b, h));
    let mut c_state = Array2::<T>::zeros((b, h));
    for t in 0..frames {
        let gh = recurrent_projection(layer, &state);
        h_prev.slice_mut(s![t * b..(t + 1) * b, ..]).assign(&state);
        for i in 0..b {
            let row = t * b + i;
            for j in 0..h {
                let a = |g: usize| gx[[row, g * h + j]] + gh[[i, g * h + j]];
                let (ig, fg, gg, og) = (sigmoid(a(0)), sigmoid(a(1)), a(2).tanh(), sigmoid(a(3)));
                let cp = c_state[[i, j]];
                let c = fg * cp + ig * gg;
                let new = og * c.tanh();
                gates[[row, j]] = ig;
                gates[[row, h + j]] = fg;
                gates[[row, 2 * h + j]] = gg;
                gates[[row, 3 * h + j]] = og;
                aux[[row, j]] = cp;
                cell[[row, j]] = c;
                output[[row, j]] = new;
                state[[i, j]] = new;
                c_state[[i, j]] = c;
            }
        }
    }
    LayerCache { input, h_prev, gates, aux, cell, output }
}

fn lstm_backward<T: Scalar>(
    layer: &RnnLayer<T>,
    cache: &LayerCache<T>,
    d_out: &Array2<T>,
    b: usize,
    frames: usize,
) -> (Array2<T>, Array2<T>) {
    let h = layer.w_hh.ncols();
    let one = T::one();
    let mut dg = Array2::zeros((b * frames, 4 * h));
    let mut dh_next = Array2::<T>::zeros((b, h));
    let mut dc_next = Array2::<T>::zeros((b, h));
    for t in (0..frames).rev() {
        for i in 0..b {
            let row = t * b + i;
            for j in 0..h {
                let dh = d_out[[row, j]] + dh_next[[i, j]];
                let g = |k: usize| cache.gates[[row, k * h + j]];
                let (ig, fg, gg, og) = (g(0), g(1), g(2), g(3));
                let tc = cache.cell[[row, j]].tanh();
                let dc = dc_next[[i, j]] + dh * og * (one - tc * tc);
                dc_next[[i, j]] = dc * fg;
                dg[[row, j]] = dc * gg * ig * (one - ig);
                dg[[row, h + j]] = dc * cache.aux[[row, j]] * fg * (one - fg);
                dg[[row, 2 * h + j]] = dc * ig * (one - gg * gg);
                dg[[row, 3 * h + j]] = dh * tc * og * (one - og);
            }
        }
        dh_next = dg.slice(s![t * b..(t + 1) * b, ..]).dot(&layer.w_hh);
    }
    // Input and recurrent pre-activations are summed, so they share gradients.
    (dg.clone(), dg)
}
