//! Post-LayerNorm transformer encoder with hand-written backpropagation.
//!
//! Row-vector convention throughout: a sequence is an `L × d` matrix and a
//! projection is `X · W + b`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EncoderConfig;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
}

/// All trainable parameters. The same type holds gradients and optimizer
/// moments.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Params {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_w: Array1<f64>,
    pub head_b: Array1<f64>,
}

macro_rules! layer_fields {
    ($m:ident) => {
        $m!(wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b)
    };
}

impl LayerParams {
    fn zeros(d: usize, f: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        Self {
            wq: m(d, d),
            bq: v(d),
            wk: m(d, d),
            bk: v(d),
            wv: m(d, d),
            bv: v(d),
            wo: m(d, d),
            bo: v(d),
            ln1_g: v(d),
            ln1_b: v(d),
            w1: m(d, f),
            b1: v(f),
            w2: m(f, d),
            b2: v(d),
            ln2_g: v(d),
            ln2_b: v(d),
        }
    }

    fn buffers(&self) -> Vec<(&'static str, &[f64])> {
        macro_rules! collect {
            ($($f:ident),*) => { vec![$((stringify!($f), self.$f.as_slice().unwrap())),*] };
        }
        layer_fields!(collect)
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        macro_rules! collect {
            ($($f:ident),*) => { vec![$(self.$f.as_slice_mut().unwrap()),*] };
        }
        layer_fields!(collect)
    }
}

impl Params {
    pub fn zeros(config: &EncoderConfig) -> Self {
        let d = config.d_model;
        Self {
            tok_emb: Array2::zeros((config.vocab_size, d)),
            pos_emb: Array2::zeros((config.max_len, d)),
            layers: (0..config.n_layers)
                .map(|_| LayerParams::zeros(d, config.ffn_dim))
                .collect(),
            head_w: Array1::zeros(d),
            head_b: Array1::zeros(1),
        }
    }

    /// Weights ~ N(0, init_std²), biases 0, LayerNorm gains 1.
    pub fn init(config: &EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, config.init_std).expect("finite std");
        let mut p = Self::zeros(config);
        let mut fill = |a: &mut [f64]| a.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
        fill(p.tok_emb.as_slice_mut().unwrap());
        fill(p.pos_emb.as_slice_mut().unwrap());
        for layer in &mut p.layers {
            for w in [
                &mut layer.wq,
                &mut layer.wk,
                &mut layer.wv,
                &mut layer.wo,
                &mut layer.w1,
                &mut layer.w2,
            ] {
                fill(w.as_slice_mut().unwrap());
            }
            layer.ln1_g.fill(1.0);
            layer.ln2_g.fill(1.0);
        }
        fill(p.head_w.as_slice_mut().unwrap());
        p
    }

    /// Named flat views in a fixed order.
    pub fn buffers(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("tok_emb".into(), self.tok_emb.as_slice().unwrap()),
            ("pos_emb".into(), self.pos_emb.as_slice().unwrap()),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            out.extend(
                layer
                    .buffers()
                    .into_iter()
                    .map(|(n, b)| (format!("layer{i}.{n}"), b)),
            );
        }
        out.push(("head_w".into(), self.head_w.as_slice().unwrap()));
        out.push(("head_b".into(), self.head_b.as_slice().unwrap()));
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.tok_emb.as_slice_mut().unwrap(),
            self.pos_emb.as_slice_mut().unwrap(),
        ];
        for layer in &mut self.layers {
            out.extend(layer.buffers_mut());
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(self.head_b.as_slice_mut().unwrap());
        out
    }

    pub fn num_values(&self) -> usize {
        self.buffers().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.buffers()
            .into_iter()
            .flat_map(|(_, b)| b.iter().copied())
            .collect()
    }

    pub fn assign_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for buf in self.buffers_mut() {
            buf.copy_from_slice(&values[offset..offset + buf.len()]);
            offset += buf.len();
        }
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, (_, b)) in self.buffers_mut().into_iter().zip(other.buffers()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for buf in self.buffers_mut() {
            buf.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.buffers()
            .iter()
            .all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }
}

struct LayerNormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = &centered * &rstd.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LayerNormCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mean_dxhat = dxhat.sum_axis(Axis(1)) / d;
    let mean_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / d;
    let inner = &dxhat
        - &mean_dxhat.view().insert_axis(Axis(1))
        - &(&cache.xhat * &mean_dxhat_xhat.view().insert_axis(Axis(1)));
    inner * cache.rstd.view().insert_axis(Axis(1))
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

pub(crate) struct LayerCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// One `L × L` attention matrix per head.
    pub attn: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln1: LayerNormCache,
    h1: Array2<f64>,
    f_pre: Array2<f64>,
    f_act: Array2<f64>,
    ln2: LayerNormCache,
}

pub(crate) struct ForwardCache {
    ids: Vec<u32>,
    pub layers: Vec<LayerCache>,
    /// Final-layer states, `L × d`; row 0 is the pooled position.
    pub output: Array2<f64>,
    pub logit: f64,
}

impl Params {
    fn n_heads_dim(&self, n_heads: usize) -> usize {
        self.tok_emb.ncols() / n_heads
    }

    /// Runs the encoder on one sequence (pooled id first).
    pub fn forward(&self, ids: &[u32], n_heads: usize) -> ForwardCache {
        let len = ids.len();
        let d = self.tok_emb.ncols();
        let dh = self.n_heads_dim(n_heads);
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = Array2::zeros((len, d));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row += &self.tok_emb.row(id as usize);
            row += &self.pos_emb.row(i);
        }

        let mut caches = Vec::with_capacity(self.layers.len());
        for p in &self.layers {
            let q = affine(&x, &p.wq, &p.bq);
            let k = affine(&x, &p.wk, &p.bk);
            let v = affine(&x, &p.wv, &p.bv);
            let mut ctx = Array2::zeros((len, d));
            let mut attn = Vec::with_capacity(n_heads);
            for h in 0..n_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                softmax_rows(&mut scores);
                ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                attn.push(scores);
            }
            let attn_out = affine(&ctx, &p.wo, &p.bo);
            let (h1, ln1) = layer_norm(&(&x + &attn_out), &p.ln1_g, &p.ln1_b);
            let f_pre = affine(&h1, &p.w1, &p.b1);
            let f_act = f_pre.mapv(gelu);
            let f_out = affine(&f_act, &p.w2, &p.b2);
            let (out, ln2) = layer_norm(&(&h1 + &f_out), &p.ln2_g, &p.ln2_b);
            caches.push(LayerCache {
                x,
                q,
                k,
                v,
                attn,
                ctx,
                ln1,
                h1,
                f_pre,
                f_act,
                ln2,
            });
            x = out;
        }
        let logit = x.row(0).dot(&self.head_w) + self.head_b[0];
        ForwardCache {
            ids: ids.to_vec(),
            layers: caches,
            output: x,
            logit,
        }
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the logit is `dlogit`.
    pub fn backward(&self, cache: &ForwardCache, dlogit: f64, n_heads: usize, grads: &mut Params) {
        let dh = self.n_heads_dim(n_heads);
        let scale = 1.0 / (dh as f64).sqrt();
        let len = cache.ids.len();

        grads.head_w.scaled_add(dlogit, &cache.output.row(0));
        grads.head_b[0] += dlogit;
        let mut dx = Array2::zeros(cache.output.raw_dim());
        dx.row_mut(0).scaled_add(dlogit, &self.head_w);

        for (l, c) in cache.layers.iter().enumerate().rev() {
            let p = &self.layers[l];
            let g = &mut grads.layers[l];

            let dr2 = layer_norm_backward(&dx, &c.ln2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
            let mut dh1 = dr2.clone();
            g.w2 += &c.f_act.t().dot(&dr2);
            g.b2 += &dr2.sum_axis(Axis(0));
            let df_act = dr2.dot(&p.w2.t());
            let df_pre = &df_act * &c.f_pre.mapv(gelu_grad);
            g.w1 += &c.h1.t().dot(&df_pre);
            g.b1 += &df_pre.sum_axis(Axis(0));
            dh1 += &df_pre.dot(&p.w1.t());

            let dr1 = layer_norm_backward(&dh1, &c.ln1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
            g.wo += &c.ctx.t().dot(&dr1);
            g.bo += &dr1.sum_axis(Axis(0));
            let dctx = dr1.dot(&p.wo.t());

            let d = c.x.ncols();
            let mut dq = Array2::zeros((len, d));
            let mut dk = Array2::zeros((len, d));
            let mut dv = Array2::zeros((len, d));
            for (h, a) in c.attn.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let dctx_h = dctx.slice(cols);
                let da = dctx_h.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&a.t().dot(&dctx_h));
                let row_dot = (&da * a).sum_axis(Axis(1));
                let ds = (a * &(&da - &row_dot.view().insert_axis(Axis(1)))) * scale;
                dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
            }
            let xt: ArrayView2<f64> = c.x.t();
            g.wq += &xt.dot(&dq);
            g.wk += &xt.dot(&dk);
            g.wv += &xt.dot(&dv);
            g.bq += &dq.sum_axis(Axis(0));
            g.bk += &dk.sum_axis(Axis(0));
            g.bv += &dv.sum_axis(Axis(0));
            dx = dr1 + dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
        }

        for (i, &id) in cache.ids.iter().enumerate() {
            let row = dx.row(i);
            let mut t = grads.tok_emb.row_mut(id as usize);
            t += &row;
            let mut pe = grads.pos_emb.row_mut(i);
            pe += &row;
        }
    }
}

/// Numerically stable binary cross-entropy on a logit and its derivative.
pub(crate) fn bce_with_logit(logit: f64, target: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - target)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
