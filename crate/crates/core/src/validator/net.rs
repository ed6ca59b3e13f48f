//! Forward and backward passes of the CNN-BiLSTM over a flat parameter
//! vector.
//!
//! Padding rows of the embedded input are zero, so every convolution
//! window that starts in the padding outputs `relu(bias)` and every
//! recurrent step over padding sees the same input. Those positions are
//! computed once and their gradients aggregated.

use rand::Rng;

use crate::validator::{LstmInput, NetConfig};

#[derive(Debug, Clone)]
pub(crate) struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Copy)]
struct LstmOffsets {
    w_input: usize,
    w_hidden: usize,
    bias: usize,
}

/// Sizes and parameter offsets derived from a config and vocabulary size.
#[derive(Debug, Clone)]
pub(crate) struct Net {
    pub s: usize,
    pub d: usize,
    pub sizes: Vec<usize>,
    pub nf: usize,
    /// Pooled vector width: filters per size times number of sizes.
    pub p: usize,
    pub hd: usize,
    pub h: usize,
    pub fin: usize,
    pub c: usize,
    /// Recurrent sequence length.
    pub t: usize,
    pub wiring: LstmInput,
    emb: usize,
    conv: Vec<(usize, usize)>,
    dense_w: usize,
    dense_b: usize,
    lstm: [LstmOffsets; 2],
    head_w: usize,
    head_b: usize,
    pub tensors: Vec<TensorSpec>,
    pub n_params: usize,
}

impl Net {
    pub fn new(config: &NetConfig, vocab: usize) -> Net {
        let s = config.embed_dim;
        let nf = config.filters_per_size;
        let p = nf * config.filter_sizes.len();
        let hmax = *config
            .filter_sizes
            .iter()
            .max()
            .expect("validated: filter sizes non-empty");
        let (fin, t) = match config.lstm_input {
            LstmInput::PooledSequence => (p, config.seq_len - hmax + 1),
            LstmInput::DenseOutput => (config.dense_hidden, 1),
        };
        let h = config.lstm_hidden;
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let spec = TensorSpec {
                name,
                shape,
                offset: total,
            };
            total += spec.len();
            let off = spec.offset;
            tensors.push(spec);
            off
        };
        let emb = add("embedding".into(), vec![vocab, s]);
        let conv = config
            .filter_sizes
            .iter()
            .map(|&k| {
                (
                    add(format!("conv{k}.weight"), vec![nf, k, s]),
                    add(format!("conv{k}.bias"), vec![nf]),
                )
            })
            .collect();
        let dense_w = add("dense.weight".into(), vec![config.dense_hidden, p]);
        let dense_b = add("dense.bias".into(), vec![config.dense_hidden]);
        let mut lstm_off = |dir: &str| LstmOffsets {
            w_input: add(format!("lstm_{dir}.w_input"), vec![4 * h, fin]),
            w_hidden: add(format!("lstm_{dir}.w_hidden"), vec![4 * h, h]),
            bias: add(format!("lstm_{dir}.bias"), vec![4 * h]),
        };
        let lstm = [lstm_off("fwd"), lstm_off("bwd")];
        let head_w = add(
            "head.weight".into(),
            vec![config.classes, config.dense_hidden + 2 * h],
        );
        let head_b = add("head.bias".into(), vec![config.classes]);
        Net {
            s,
            d: config.seq_len,
            sizes: config.filter_sizes.clone(),
            nf,
            p,
            hd: config.dense_hidden,
            h,
            fin,
            c: config.classes,
            t,
            wiring: config.lstm_input,
            emb,
            conv,
            dense_w,
            dense_b,
            lstm,
            head_w,
            head_b,
            tensors,
            n_params: total,
        }
    }

    /// Initial parameters: embeddings uniform in [-0.05, 0.05], weights
    /// uniform in ±1/sqrt(fan-in), convolution and dense biases 0.01, LSTM
    /// forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params];
        let mut uniform = |slice: &mut [f64], bound: f64| {
            for v in slice {
                *v = rng.gen_range(-bound..bound);
            }
        };
        for spec in &self.tensors {
            let slice = &mut params[spec.offset..spec.offset + spec.len()];
            let name = spec.name.as_str();
            if name == "embedding" {
                uniform(slice, 0.05);
            } else if name.ends_with("weight")
                || name.ends_with("w_input")
                || name.ends_with("w_hidden")
            {
                let fan_in: usize = spec.shape[1..].iter().product();
                uniform(slice, 1.0 / (fan_in as f64).sqrt());
            } else if name.starts_with("conv") || name.starts_with("dense") {
                slice.fill(0.01);
            } else if name.starts_with("lstm") {
                slice[self.h..2 * self.h].fill(1.0);
            }
        }
        params
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = W x + b` with `W` row-major `[rows, x.len()]`.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = b[r] + dot(&w[r * n..(r + 1) * n], x);
    }
}

/// `dx += W^T dy`.
fn affine_back_input(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let n = dx.len();
    for (r, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, &w[r * n..(r + 1) * n], dx);
        }
    }
}

/// `dW += dy x^T`, `db += dy`.
fn affine_back_params(dy: &[f64], x: &[f64], dw: &mut [f64], db: &mut [f64]) {
    let n = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, x, &mut dw[r * n..(r + 1) * n]);
            db[r] += g;
        }
    }
}

/// One direction of an LSTM over a list of input projections.
struct LstmTrace {
    /// Per step: gate activations (i, f, g, o) and the cell state.
    gates: Vec<f64>,
    cells: Vec<f64>,
    hiddens: Vec<f64>,
}

fn lstm_run(w_hidden: &[f64], h: usize, inputs: &[&[f64]]) -> LstmTrace {
    let steps = inputs.len();
    let mut trace = LstmTrace {
        gates: vec![0.0; steps * 4 * h],
        cells: vec![0.0; steps * h],
        hiddens: vec![0.0; steps * h],
    };
    let mut z = vec![0.0; 4 * h];
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for (step, a) in inputs.iter().enumerate() {
        for r in 0..4 * h {
            z[r] = a[r] + dot(&w_hidden[r * h..(r + 1) * h], &h_prev);
        }
        let gates = &mut trace.gates[step * 4 * h..(step + 1) * 4 * h];
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            gates[k] = i;
            gates[h + k] = f;
            gates[2 * h + k] = g;
            gates[3 * h + k] = o;
            let c = f * c_prev[k] + i * g;
            trace.cells[step * h + k] = c;
            trace.hiddens[step * h + k] = o * c.tanh();
        }
        h_prev.copy_from_slice(&trace.hiddens[step * h..(step + 1) * h]);
        c_prev.copy_from_slice(&trace.cells[step * h..(step + 1) * h]);
    }
    trace
}

/// Backpropagates a gradient on the last hidden state; returns the
/// gradient on each step's pre-activation (input projection plus bias).
fn lstm_back(
    w_hidden: &[f64],
    h: usize,
    trace: &LstmTrace,
    dh_last: &[f64],
    dw_hidden: &mut [f64],
) -> Vec<f64> {
    let steps = trace.cells.len() / h;
    let mut dz_all = vec![0.0; steps * 4 * h];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h];
    let zeros = vec![0.0; h];
    for step in (0..steps).rev() {
        let gates = &trace.gates[step * 4 * h..(step + 1) * 4 * h];
        let c_prev = if step > 0 {
            &trace.cells[(step - 1) * h..step * h]
        } else {
            &zeros[..]
        };
        let h_prev = if step > 0 {
            &trace.hiddens[(step - 1) * h..step * h]
        } else {
            &zeros[..]
        };
        let dz = &mut dz_all[step * 4 * h..(step + 1) * 4 * h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = trace.cells[step * h + k].tanh();
            let do_ = dh[k] * tc;
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dck * g * i * (1.0 - i);
            dz[h + k] = dck * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dck * i * (1.0 - g * g);
            dz[3 * h + k] = do_ * o * (1.0 - o);
            dc[k] = dck * f;
        }
        for r in 0..4 * h {
            if dz[r] != 0.0 {
                axpy(dz[r], h_prev, &mut dw_hidden[r * h..(r + 1) * h]);
            }
        }
        dh.fill(0.0);
        affine_back_input(w_hidden, dz, &mut dh);
    }
    dz_all
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace {
    ids: Vec<usize>,
    /// Embedded real rows, `[len, s]`.
    embedded: Vec<f64>,
    /// Per filter size: pre-activations at real window starts, `[n, nf]`.
    conv_pre: Vec<Vec<f64>>,
    /// Per pooled unit: winning window start (may be in the padding).
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    pooled_mask: Option<Vec<f64>>,
    dense_pre: Vec<f64>,
    /// Real-position recurrent inputs `[n, fin]` and the padding input.
    seq_real: Vec<f64>,
    seq_pad: Vec<f64>,
    lstm: [LstmTrace; 2],
    head_in: Vec<f64>,
    head_mask: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Net {
    fn real_len(&self, ids: &[usize]) -> usize {
        ids.len().min(self.d)
    }

    fn conv_out_len(&self, g: usize) -> usize {
        self.d - self.sizes[g] + 1
    }

    /// Runs the network on token ids (already including the separator).
    /// With `dropout = Some((rng, p))` inverted dropout masks are drawn.
    pub fn forward<R: Rng>(
        &self,
        params: &[f64],
        ids: &[usize],
        mut dropout: Option<(&mut R, f64)>,
    ) -> Trace {
        let (s, nf, h) = (self.s, self.nf, self.h);
        let len = self.real_len(ids);
        let ids = ids[..len].to_vec();
        let mut embedded = vec![0.0; len * s];
        for (t, &id) in ids.iter().enumerate() {
            embedded[t * s..(t + 1) * s]
                .copy_from_slice(&params[self.emb + id * s..self.emb + (id + 1) * s]);
        }

        let mut conv_pre = Vec::with_capacity(self.sizes.len());
        let mut pooled = vec![0.0; self.p];
        let mut argmax = vec![0usize; self.p];
        for (g, &k) in self.sizes.iter().enumerate() {
            let (wo, bo) = self.conv[g];
            let n_out = self.conv_out_len(g);
            let n_real = len.min(n_out);
            let mut pre = vec![0.0; n_real * nf];
            for t in 0..n_real {
                let width = k.min(len - t) * s;
                let window = &embedded[t * s..t * s + width];
                for j in 0..nf {
                    let w = &params[wo + j * k * s..wo + j * k * s + width];
                    pre[t * nf + j] = params[bo + j] + dot(w, window);
                }
            }
            for j in 0..nf {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for t in 0..n_real {
                    let v = pre[t * nf + j].max(0.0);
                    if v > best {
                        best = v;
                        at = t;
                    }
                }
                if n_out > len {
                    let v = params[bo + j].max(0.0);
                    if v > best {
                        best = v;
                        at = len;
                    }
                }
                pooled[g * nf + j] = best;
                argmax[g * nf + j] = at;
            }
            conv_pre.push(pre);
        }

        let mut draw_mask = |n: usize| -> Option<Vec<f64>> {
            let (rng, p) = dropout.as_mut()?;
            let keep = 1.0 - *p;
            Some(
                (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        };
        let pooled_mask = draw_mask(self.p);
        let dropped: Vec<f64> = match &pooled_mask {
            Some(m) => pooled.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => pooled.clone(),
        };
        let mut dense_pre = vec![0.0; self.hd];
        affine(
            &params[self.dense_w..self.dense_w + self.hd * self.p],
            &params[self.dense_b..self.dense_b + self.hd],
            &dropped,
            &mut dense_pre,
        );
        let dense: Vec<f64> = dense_pre.iter().map(|v| v.max(0.0)).collect();

        // Recurrent inputs.
        let (seq_real, seq_pad, n_real_steps) = match self.wiring {
            LstmInput::PooledSequence => {
                let n = len.min(self.t);
                let mut real = vec![0.0; n * self.fin];
                for t in 0..n {
                    for (g, pre) in conv_pre.iter().enumerate() {
                        for j in 0..nf {
                            real[t * self.fin + g * nf + j] = pre[t * nf + j].max(0.0);
                        }
                    }
                }
                let mut pad = vec![0.0; self.fin];
                for g in 0..self.sizes.len() {
                    let bo = self.conv[g].1;
                    for j in 0..nf {
                        pad[g * nf + j] = params[bo + j].max(0.0);
                    }
                }
                (real, pad, n)
            }
            LstmInput::DenseOutput => (dense.clone(), vec![0.0; self.fin], 1),
        };

        let lstm = [0, 1].map(|dir| {
            let off = self.lstm[dir];
            let w_in = &params[off.w_input..off.w_input + 4 * h * self.fin];
            let bias = &params[off.bias..off.bias + 4 * h];
            let mut proj_real = vec![0.0; n_real_steps * 4 * h];
            for t in 0..n_real_steps {
                affine(
                    w_in,
                    bias,
                    &seq_real[t * self.fin..(t + 1) * self.fin],
                    &mut proj_real[t * 4 * h..(t + 1) * 4 * h],
                );
            }
            let mut proj_pad = vec![0.0; 4 * h];
            if n_real_steps < self.t {
                affine(w_in, bias, &seq_pad, &mut proj_pad);
            }
            let at = |t: usize| -> &[f64] {
                if t < n_real_steps {
                    &proj_real[t * 4 * h..(t + 1) * 4 * h]
                } else {
                    &proj_pad
                }
            };
            let order: Vec<&[f64]> = if dir == 0 {
                (0..self.t).map(at).collect()
            } else {
                (0..self.t).rev().map(at).collect()
            };
            lstm_run(&params[off.w_hidden..off.w_hidden + 4 * h * h], h, &order)
        });

        let mut head_in = dense.clone();
        for tr in &lstm {
            head_in.extend_from_slice(&tr.hiddens[(self.t - 1) * h..self.t * h]);
        }
        let head_mask = draw_mask(head_in.len());
        let head_x: Vec<f64> = match &head_mask {
            Some(m) => head_in.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => head_in.clone(),
        };
        let mut logits = vec![0.0; self.c];
        let n_in = head_in.len();
        affine(
            &params[self.head_w..self.head_w + self.c * n_in],
            &params[self.head_b..self.head_b + self.c],
            &head_x,
            &mut logits,
        );
        let probs = softmax(&logits);
        Trace {
            ids,
            embedded,
            conv_pre,
            argmax,
            pooled,
            pooled_mask,
            dense_pre,
            seq_real,
            seq_pad,
            lstm,
            head_in,
            head_mask,
            logits,
            probs,
        }
    }

    /// Adds the gradient of `-log probs[label]` to `grad`; returns the loss.
    pub fn backward(&self, params: &[f64], tr: &Trace, label: usize, grad: &mut [f64]) -> f64 {
        let (s, nf, h) = (self.s, self.nf, self.h);
        let len = tr.ids.len();
        let loss = -tr.probs[label].max(f64::MIN_POSITIVE).ln();

        // Head.
        let mut dlogits = tr.probs.clone();
        dlogits[label] -= 1.0;
        let n_in = tr.head_in.len();
        let head_x: Vec<f64> = match &tr.head_mask {
            Some(m) => tr.head_in.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => tr.head_in.clone(),
        };
        {
            let (before, after) = grad.split_at_mut(self.head_b);
            affine_back_params(
                &dlogits,
                &head_x,
                &mut before[self.head_w..self.head_w + self.c * n_in],
                &mut after[..self.c],
            );
        }
        let mut dhead = vec![0.0; n_in];
        affine_back_input(
            &params[self.head_w..self.head_w + self.c * n_in],
            &dlogits,
            &mut dhead,
        );
        if let Some(m) = &tr.head_mask {
            for (g, mk) in dhead.iter_mut().zip(m) {
                *g *= mk;
            }
        }
        let mut ddense = dhead[..self.hd].to_vec();

        // Recurrent layers.
        let n_real_steps = tr.seq_real.len() / self.fin;
        let mut dseq_real = vec![0.0; tr.seq_real.len()];
        let mut dseq_pad = vec![0.0; self.fin];
        for dir in 0..2 {
            let off = self.lstm[dir];
            let dh_last = &dhead[self.hd + dir * h..self.hd + (dir + 1) * h];
            let dz = lstm_back(
                &params[off.w_hidden..off.w_hidden + 4 * h * h],
                h,
                &tr.lstm[dir],
                dh_last,
                &mut grad[off.w_hidden..off.w_hidden + 4 * h * h],
            );
            let w_in = &params[off.w_input..off.w_input + 4 * h * self.fin];
            let mut dz_pad = vec![0.0; 4 * h];
            for step in 0..self.t {
                let t = if dir == 0 { step } else { self.t - 1 - step };
                let dzt = &dz[step * 4 * h..(step + 1) * 4 * h];
                if t < n_real_steps {
                    let x = &tr.seq_real[t * self.fin..(t + 1) * self.fin];
                    let (before, after) = grad.split_at_mut(off.bias);
                    affine_back_params(
                        dzt,
                        x,
                        &mut before[off.w_input..off.w_input + 4 * h * self.fin],
                        &mut after[..4 * h],
                    );
                    affine_back_input(w_in, dzt, &mut dseq_real[t * self.fin..(t + 1) * self.fin]);
                } else {
                    axpy(1.0, dzt, &mut dz_pad);
                }
            }
            if n_real_steps < self.t {
                let (before, after) = grad.split_at_mut(off.bias);
                affine_back_params(
                    &dz_pad,
                    &tr.seq_pad,
                    &mut before[off.w_input..off.w_input + 4 * h * self.fin],
                    &mut after[..4 * h],
                );
                affine_back_input(w_in, &dz_pad, &mut dseq_pad);
            }
        }
        if self.wiring == LstmInput::DenseOutput {
            axpy(1.0, &dseq_real, &mut ddense);
        }

        // Dense layer.
        let dropped: Vec<f64> = match &tr.pooled_mask {
            Some(m) => tr.pooled.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => tr.pooled.clone(),
        };
        let ddense_pre: Vec<f64> = ddense
            .iter()
            .zip(&tr.dense_pre)
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        {
            let (before, after) = grad.split_at_mut(self.dense_b);
            affine_back_params(
                &ddense_pre,
                &dropped,
                &mut before[self.dense_w..self.dense_w + self.hd * self.p],
                &mut after[..self.hd],
            );
        }
        let mut dpooled = vec![0.0; self.p];
        affine_back_input(
            &params[self.dense_w..self.dense_w + self.hd * self.p],
            &ddense_pre,
            &mut dpooled,
        );
        if let Some(m) = &tr.pooled_mask {
            for (g, mk) in dpooled.iter_mut().zip(m) {
                *g *= mk;
            }
        }

        // Convolutions: gradient on each output, real positions and the
        // shared padding value.
        let mut dembedded = vec![0.0; len * s];
        for (g, &k) in self.sizes.iter().enumerate() {
            let (wo, bo) = self.conv[g];
            let pre = &tr.conv_pre[g];
            let n_real = pre.len() / nf;
            let mut dout = vec![0.0; n_real * nf];
            let mut dpad = vec![0.0; nf];
            for j in 0..nf {
                let at = tr.argmax[g * nf + j];
                let gj = dpooled[g * nf + j];
                if at < n_real {
                    dout[at * nf + j] += gj;
                } else {
                    dpad[j] += gj;
                }
            }
            if self.wiring == LstmInput::PooledSequence {
                for t in 0..n_real_steps.min(n_real) {
                    for j in 0..nf {
                        dout[t * nf + j] += dseq_real[t * self.fin + g * nf + j];
                    }
                }
                for j in 0..nf {
                    dpad[j] += dseq_pad[g * nf + j];
                }
            }
            for j in 0..nf {
                if params[bo + j] > 0.0 {
                    grad[bo + j] += dpad[j];
                }
            }
            for t in 0..n_real {
                let width = k.min(len - t) * s;
                for j in 0..nf {
                    let z = pre[t * nf + j];
                    let gz = if z > 0.0 { dout[t * nf + j] } else { 0.0 };
                    if gz == 0.0 {
                        continue;
                    }
                    grad[bo + j] += gz;
                    let w0 = wo + j * k * s;
                    axpy(
                        gz,
                        &tr.embedded[t * s..t * s + width],
                        &mut grad[w0..w0 + width],
                    );
                    axpy(
                        gz,
                        &params[w0..w0 + width],
                        &mut dembedded[t * s..t * s + width],
                    );
                }
            }
        }
        for (t, &id) in tr.ids.iter().enumerate() {
            let e0 = self.emb + id * s;
            axpy(1.0, &dembedded[t * s..(t + 1) * s], &mut grad[e0..e0 + s]);
        }
        loss
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

impl Trace {
    #[cfg(test)]
    pub fn dense_pre(&self) -> &[f64] {
        &self.dense_pre
    }

    pub fn merged_state(&self, net: &Net) -> Vec<f64> {
        self.head_in[net.hd..].to_vec()
    }
}

impl Trace {
    /// Which piecewise-linear branch every ReLU and max-pool took. Two
    /// parameter settings with equal patterns lie on the same smooth piece.
    pub fn pattern(&self, net: &Net, params: &[f64]) -> Vec<usize> {
        let mut p: Vec<usize> = self.argmax.clone();
        for pre in &self.conv_pre {
            p.extend(pre.iter().map(|&z| (z > 0.0) as usize));
        }
        p.extend(self.dense_pre.iter().map(|&z| (z > 0.0) as usize));
        for &(_, bo) in &net.conv {
            p.extend(params[bo..bo + net.nf].iter().map(|&b| (b > 0.0) as usize));
        }
        p
    }
}
