use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{LayerParams, ParameterSet};
use super::{FineTuneExample, ModelError};
use crate::datasets::LabelVector;
use crate::instances::PretrainInstance;
use crate::seed::{self, stage, StageRng};

const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let n = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        *is = 1.0 / (var + LN_EPS).sqrt();
        row *= *is;
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let n = dy.ncols() as f64;
    let mut dx = dy * g;
    for ((mut row, xhat), &is) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_d = row.sum() / n;
        let mean_dx = row.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / n;
        row.iter_mut()
            .zip(xhat)
            .for_each(|(d, x)| *d = is * (*d - mean_d - x * mean_dx));
    }
    dx
}

/// Accumulates the gradients of `y = x · W + b` and returns `dL/dx`.
fn linear_backward(
    x: ArrayView2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

/// Inverted dropout driven by a per-sequence generator. With no generator or
/// zero rate it is the identity and records no mask.
struct Dropout {
    rng: Option<StageRng>,
    rate: f64,
}

impl Dropout {
    fn apply(&mut self, x: &mut Array2<f64>) -> Option<Array2<f64>> {
        let rng = self.rng.as_mut().filter(|_| self.rate > 0.0)?;
        let keep = 1.0 / (1.0 - self.rate);
        let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
            if rng.gen::<f64>() < self.rate {
                0.0
            } else {
                keep
            }
        });
        *x *= &mask;
        Some(mask)
    }
}

fn apply_mask(d: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *d *= m;
    }
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln1: LnCache,
    h1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    ln2: LnCache,
}

fn layer_forward(
    p: &LayerParams,
    heads: usize,
    x: Array2<f64>,
    drop: &mut Dropout,
) -> (Array2<f64>, LayerCache) {
    let (len, hidden) = x.dim();
    let dh = hidden / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = x.dot(&p.wq) + &p.bq;
    let k = x.dot(&p.wk) + &p.bk;
    let v = x.dot(&p.wv) + &p.bv;
    let mut ctx = Array2::zeros((len, hidden));
    let mut probs = Vec::with_capacity(heads);
    for a in 0..heads {
        let cols = s![.., a * dh..(a + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    let mut attn = ctx.dot(&p.wo) + &p.bo;
    let attn_mask = drop.apply(&mut attn);
    let (h1, ln1) = layer_norm(&(&x + &attn), &p.ln1_g, &p.ln1_b);
    let ff_pre = h1.dot(&p.w1) + &p.b1;
    let ff_act = ff_pre.mapv(gelu);
    let mut ff_out = ff_act.dot(&p.w2) + &p.b2;
    let ff_mask = drop.apply(&mut ff_out);
    let (h2, ln2) = layer_norm(&(&h1 + &ff_out), &p.ln2_g, &p.ln2_b);
    let cache = LayerCache {
        input: x,
        q,
        k,
        v,
        probs,
        ctx,
        attn_mask,
        ln1,
        h1,
        ff_pre,
        ff_act,
        ff_mask,
        ln2,
    };
    (h2, cache)
}

fn layer_backward(p: &LayerParams, g: &mut LayerParams, c: &LayerCache, dout: &Array2<f64>) -> Array2<f64> {
    let (len, hidden) = c.input.dim();
    let heads = c.probs.len();
    let dh = hidden / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let dsum2 = layer_norm_backward(dout, &c.ln2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
    let mut dff_out = dsum2.clone();
    apply_mask(&mut dff_out, &c.ff_mask);
    let dff_act = linear_backward(c.ff_act.view(), &p.w2, &dff_out, &mut g.w2, &mut g.b2);
    let dff_pre = dff_act * &c.ff_pre.mapv(gelu_grad);
    let dh1 = dsum2 + linear_backward(c.h1.view(), &p.w1, &dff_pre, &mut g.w1, &mut g.b1);

    let dsum1 = layer_norm_backward(&dh1, &c.ln1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
    let mut dattn = dsum1.clone();
    apply_mask(&mut dattn, &c.attn_mask);
    let dctx = linear_backward(c.ctx.view(), &p.wo, &dattn, &mut g.wo, &mut g.bo);

    let mut dq = Array2::zeros((len, hidden));
    let mut dk = Array2::zeros((len, hidden));
    let mut dv = Array2::zeros((len, hidden));
    for (a, probs) in c.probs.iter().enumerate() {
        let cols = s![.., a * dh..(a + 1) * dh];
        let dctx_a = dctx.slice(cols);
        let dprobs = dctx_a.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&probs.t().dot(&dctx_a));
        let row_dot = (&dprobs * probs).sum_axis(Axis(1)).insert_axis(Axis(1));
        let dscores = probs * &(dprobs - &row_dot) * scale;
        dq.slice_mut(cols).assign(&dscores.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&dscores.t().dot(&c.q.slice(cols)));
    }
    let x = c.input.view();
    dsum1
        + linear_backward(x, &p.wq, &dq, &mut g.wq, &mut g.bq)
        + linear_backward(x, &p.wk, &dk, &mut g.wk, &mut g.bk)
        + linear_backward(x, &p.wv, &dv, &mut g.wv, &mut g.bv)
}

/// Targets of one sequence. Empty or absent targets contribute nothing.
struct Targets<'a> {
    /// `(position, label id, weight)`
    mlm: Vec<(usize, u32, f64)>,
    nsp: Option<u8>,
    labels: Option<&'a LabelVector>,
}

/// Multipliers applied to each loss term's gradient, set from batch totals.
#[derive(Clone, Copy)]
struct Scales {
    mlm: f64,
    nsp: f64,
    cls: f64,
}

/// Raw model outputs for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutputs {
    /// One row per requested masked position.
    pub mlm_logits: Array2<f64>,
    pub nsp_logits: Array1<f64>,
    pub label_logits: Array1<f64>,
    pub pooled: Array1<f64>,
}

struct SequenceResult {
    outputs: SequenceOutputs,
    /// Σ weight · cross-entropy over masked positions.
    mlm_sum: f64,
    nsp: f64,
    cls: f64,
}

fn run_sequence(
    p: &ParameterSet,
    ids: &[u32],
    segments: &[u8],
    targets: &Targets,
    scales: Scales,
    mut drop: Dropout,
    grad: Option<&mut ParameterSet>,
) -> SequenceResult {
    let cfg = &p.config;
    let (len, hidden) = (ids.len(), cfg.hidden);

    // embeddings
    let mut emb = Array2::zeros((len, hidden));
    for (i, mut row) in emb.rows_mut().into_iter().enumerate() {
        row.assign(&p.tok_emb.row(ids[i] as usize));
        row += &p.pos_emb.row(i);
        row += &p.seg_emb.row(segments[i] as usize);
    }
    let (mut h, emb_ln) = layer_norm(&emb, &p.emb_ln_g, &p.emb_ln_b);
    let emb_mask = drop.apply(&mut h);

    let mut caches = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let (out, cache) = layer_forward(layer, cfg.heads, h, &mut drop);
        caches.push(cache);
        h = out;
    }

    // masked-LM head at the requested positions
    let positions: Vec<usize> = targets.mlm.iter().map(|t| t.0).collect();
    let h_sel = h.select(Axis(0), &positions);
    let t_pre = h_sel.dot(&p.mlm_dense_w) + &p.mlm_dense_b;
    let t_act = t_pre.mapv(gelu);
    let (t_ln, mlm_ln) = layer_norm(&t_act, &p.mlm_ln_g, &p.mlm_ln_b);
    // The decoder shares its weights with the token embeddings.
    let mlm_logits = t_ln.dot(&p.tok_emb.t()) + &p.mlm_out_b;

    // pooler and sentence-level heads
    let cls_row = h.slice(s![0..1, ..]);
    let pooled_pre = cls_row.dot(&p.pool_w) + &p.pool_b;
    let pooled = pooled_pre.mapv(f64::tanh);
    let mut pooled_drop = pooled.clone();
    let pooled_mask = drop.apply(&mut pooled_drop);
    let nsp_logits = pooled.dot(&p.nsp_w) + &p.nsp_b;
    let label_logits = pooled_drop.dot(&p.cls_w) + &p.cls_b;

    // losses and output-layer gradients
    let mut mlm_sum = 0.0;
    let mut d_mlm = Array2::zeros(mlm_logits.raw_dim());
    for (r, &(_, label, w)) in targets.mlm.iter().enumerate() {
        let row = mlm_logits.row(r);
        let lse = log_sum_exp(row);
        mlm_sum += w * (lse - row[label as usize]);
        let mut d = d_mlm.row_mut(r);
        d.assign(&row.mapv(|z| (z - lse).exp()));
        d[label as usize] -= 1.0;
        d *= w * scales.mlm;
    }
    let mut nsp = 0.0;
    let mut d_nsp = Array2::zeros((1, 2));
    if let Some(y) = targets.nsp {
        let row = nsp_logits.row(0);
        let lse = log_sum_exp(row);
        nsp = lse - row[y as usize];
        let mut d = d_nsp.row_mut(0);
        d.assign(&row.mapv(|z| (z - lse).exp()));
        d[y as usize] -= 1.0;
        d *= scales.nsp;
    }
    let mut cls = 0.0;
    let mut d_cls = Array2::zeros((1, cfg.num_labels));
    if let Some(labels) = targets.labels {
        for (l, &y) in labels.iter().enumerate() {
            let z = label_logits[[0, l]];
            cls += softplus(z) - y as f64 * z;
            d_cls[[0, l]] = (sigmoid(z) - y as f64) * scales.cls;
        }
    }

    let outputs = SequenceOutputs {
        mlm_logits,
        nsp_logits: nsp_logits.row(0).to_owned(),
        label_logits: label_logits.row(0).to_owned(),
        pooled: pooled.row(0).to_owned(),
    };
    let result = SequenceResult {
        outputs,
        mlm_sum,
        nsp,
        cls,
    };
    let Some(g) = grad else {
        return result;
    };

    let mut dh = Array2::<f64>::zeros((len, hidden));

    // masked-LM head
    if !positions.is_empty() {
        g.tok_emb += &d_mlm.t().dot(&t_ln);
        g.mlm_out_b += &d_mlm.sum_axis(Axis(0));
        let dt_ln = d_mlm.dot(&p.tok_emb);
        let dt_act = layer_norm_backward(&dt_ln, &mlm_ln, &p.mlm_ln_g, &mut g.mlm_ln_g, &mut g.mlm_ln_b);
        let dt_pre = dt_act * &t_pre.mapv(gelu_grad);
        let dh_sel = linear_backward(h_sel.view(), &p.mlm_dense_w, &dt_pre, &mut g.mlm_dense_w, &mut g.mlm_dense_b);
        for (r, &pos) in positions.iter().enumerate() {
            let mut row = dh.row_mut(pos);
            row += &dh_sel.row(r);
        }
    }

    // pooler
    let dpooled_nsp = linear_backward(pooled.view(), &p.nsp_w, &d_nsp, &mut g.nsp_w, &mut g.nsp_b);
    let mut dpooled_cls = linear_backward(pooled_drop.view(), &p.cls_w, &d_cls, &mut g.cls_w, &mut g.cls_b);
    apply_mask(&mut dpooled_cls, &pooled_mask);
    let dpooled = dpooled_nsp + dpooled_cls;
    let dpooled_pre = dpooled * &pooled.mapv(|t| 1.0 - t * t);
    let dcls_row = linear_backward(cls_row, &p.pool_w, &dpooled_pre, &mut g.pool_w, &mut g.pool_b);
    {
        let mut row = dh.row_mut(0);
        row += &dcls_row.row(0);
    }

    // encoder
    for ((layer, gl), cache) in p.layers.iter().zip(g.layers.iter_mut()).zip(&caches).rev() {
        dh = layer_backward(layer, gl, cache, &dh);
    }
    apply_mask(&mut dh, &emb_mask);
    let demb = layer_norm_backward(&dh, &emb_ln, &p.emb_ln_g, &mut g.emb_ln_g, &mut g.emb_ln_b);
    for (i, row) in demb.rows().into_iter().enumerate() {
        let mut t = g.tok_emb.row_mut(ids[i] as usize);
        t += &row;
        let mut pr = g.pos_emb.row_mut(i);
        pr += &row;
        let mut sr = g.seg_emb.row_mut(segments[i] as usize);
        sr += &row;
    }
    result
}

/// Loss terms of a batch. `total = mlm + nsp + labels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub mlm: f64,
    pub nsp: f64,
    pub labels: f64,
    pub total: f64,
}

/// Real length of a pretraining instance after trailing padding is dropped.
fn checked_len(p: &ParameterSet, inst: &PretrainInstance) -> Result<usize, ModelError> {
    let cfg = &p.config;
    let n = inst.input_ids.len();
    if inst.attention_mask.len() != n || inst.segment_ids.len() != n {
        return Err(ModelError::Shape("sequence features differ in length".into()));
    }
    let len = inst.len();
    if inst.attention_mask[..len].iter().any(|&m| m != 1) {
        return Err(ModelError::Shape("attention mask must be a prefix of ones".into()));
    }
    if len == 0 || len > cfg.max_seq_len {
        return Err(ModelError::Shape(format!(
            "sequence length {len} outside 1..={}",
            cfg.max_seq_len
        )));
    }
    if let Some(&t) = inst.input_ids[..len].iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(ModelError::Shape(format!("token id {t} outside vocabulary of {}", cfg.vocab_size)));
    }
    if inst.segment_ids[..len].iter().any(|&s| s > 1) {
        return Err(ModelError::Shape("segment ids must be 0 or 1".into()));
    }
    let m = inst.masked_positions.len();
    if inst.masked_label_ids.len() != m || inst.masked_weights.len() != m {
        return Err(ModelError::Shape("prediction features differ in length".into()));
    }
    for k in 0..m {
        if inst.masked_weights[k] != 0
            && (inst.masked_positions[k] as usize >= len
                || inst.masked_label_ids[k] as usize >= cfg.vocab_size)
        {
            return Err(ModelError::Shape("masked prediction out of range".into()));
        }
    }
    if inst.next_sentence_label > 1 {
        return Err(ModelError::Shape("next sentence label must be 0 or 1".into()));
    }
    Ok(len)
}

fn pretrain_targets(inst: &PretrainInstance) -> Targets<'static> {
    Targets {
        mlm: (0..inst.masked_positions.len())
            .filter(|&k| inst.masked_weights[k] != 0)
            .map(|k| {
                (
                    inst.masked_positions[k] as usize,
                    inst.masked_label_ids[k],
                    inst.masked_weights[k] as f64,
                )
            })
            .collect(),
        nsp: Some(inst.next_sentence_label),
        labels: None,
    }
}

/// Dropout for sequence `index` of training step `step`, or none.
fn dropout_for(p: &ParameterSet, dropout_seed: Option<(u64, u64)>, index: usize) -> Dropout {
    Dropout {
        rng: dropout_seed.map(|(seed, step)| seed::rng(seed, &[stage::DROPOUT, step, index as u64])),
        rate: p.config.dropout,
    }
}

fn sum_in_order(parts: Vec<Option<ParameterSet>>, p: &ParameterSet) -> ParameterSet {
    let mut total = ParameterSet::zeros(&p.config);
    for g in parts.into_iter().flatten() {
        total.add_assign(&g);
    }
    total
}

fn pretrain_pass(
    p: &ParameterSet,
    batch: &[PretrainInstance],
    dropout_seed: Option<(u64, u64)>,
    want_grad: bool,
) -> Result<(LossParts, Vec<SequenceOutputs>, Option<ParameterSet>), ModelError> {
    let lens = batch.iter().map(|i| checked_len(p, i)).collect::<Result<Vec<_>, _>>()?;
    if batch.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    let total_weight: f64 = batch
        .iter()
        .map(|i| i.masked_weights.iter().map(|&w| w as f64).sum::<f64>())
        .sum();
    let scales = Scales {
        mlm: 1.0 / total_weight.max(1.0),
        nsp: 1.0 / batch.len() as f64,
        cls: 0.0,
    };
    let results = crate::par::map_ordered(batch, |i, inst| {
        let len = lens[i];
        let mut grad = want_grad.then(|| ParameterSet::zeros(&p.config));
        let r = run_sequence(
            p,
            &inst.input_ids[..len],
            &inst.segment_ids[..len],
            &pretrain_targets(inst),
            scales,
            dropout_for(p, dropout_seed, i),
            grad.as_mut(),
        );
        (r, grad)
    });
    let mlm: f64 = results.iter().map(|(r, _)| r.mlm_sum).sum::<f64>() * scales.mlm;
    let nsp: f64 = results.iter().map(|(r, _)| r.nsp).sum::<f64>() * scales.nsp;
    let loss = LossParts {
        mlm,
        nsp,
        labels: 0.0,
        total: mlm + nsp,
    };
    let (outputs, grads): (Vec<_>, Vec<_>) = results.into_iter().map(|(r, g)| (r.outputs, g)).unzip();
    let grad = want_grad.then(|| sum_in_order(grads, p));
    Ok((loss, outputs, grad))
}

/// Outputs for every instance: MLM logits at the weight-1 masked positions,
/// NSP logits, multi-label logits and the pooled vector. Dropout is off.
pub fn forward(p: &ParameterSet, batch: &[PretrainInstance]) -> Result<Vec<SequenceOutputs>, ModelError> {
    Ok(pretrain_pass(p, batch, None, false)?.1)
}

/// `Σ weight·CE / max(1, Σ weight)` over masked positions plus the mean NSP
/// cross-entropy, without dropout.
pub fn pretrain_loss(p: &ParameterSet, batch: &[PretrainInstance]) -> Result<LossParts, ModelError> {
    Ok(pretrain_pass(p, batch, None, false)?.0)
}

/// Loss and gradient. `dropout_seed = Some((seed, step))` enables dropout with
/// generators derived from the seed, the step and each sequence's index.
pub fn pretrain_loss_and_grad(
    p: &ParameterSet,
    batch: &[PretrainInstance],
    dropout_seed: Option<(u64, u64)>,
) -> Result<(LossParts, ParameterSet), ModelError> {
    let (loss, _, grad) = pretrain_pass(p, batch, dropout_seed, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn check_example(p: &ParameterSet, ex: &FineTuneExample) -> Result<(), ModelError> {
    let cfg = &p.config;
    if ex.ids.is_empty() || ex.ids.len() > cfg.max_seq_len {
        return Err(ModelError::Shape(format!("sequence length {} outside 1..={}", ex.ids.len(), cfg.max_seq_len)));
    }
    if ex.ids.iter().any(|&t| t as usize >= cfg.vocab_size) {
        return Err(ModelError::Shape("token id outside vocabulary".into()));
    }
    Ok(())
}

pub(crate) fn multilabel_pass(
    p: &ParameterSet,
    batch: &[FineTuneExample],
    dropout_seed: Option<(u64, u64)>,
    want_grad: bool,
) -> Result<(f64, Vec<SequenceOutputs>, Option<ParameterSet>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    for ex in batch {
        check_example(p, ex)?;
    }
    let scales = Scales {
        mlm: 0.0,
        nsp: 0.0,
        cls: 1.0 / batch.len() as f64,
    };
    let results = crate::par::map_ordered(batch, |i, ex| {
        let segments = vec![0u8; ex.ids.len()];
        let targets = Targets {
            mlm: Vec::new(),
            nsp: None,
            labels: Some(&ex.labels),
        };
        let mut grad = want_grad.then(|| ParameterSet::zeros(&p.config));
        let r = run_sequence(p, &ex.ids, &segments, &targets, scales, dropout_for(p, dropout_seed, i), grad.as_mut());
        (r, grad)
    });
    let loss = results.iter().map(|(r, _)| r.cls).sum::<f64>() * scales.cls;
    let (outputs, grads): (Vec<_>, Vec<_>) = results.into_iter().map(|(r, g)| (r.outputs, g)).unzip();
    let grad = want_grad.then(|| sum_in_order(grads, p));
    Ok((loss, outputs, grad))
}

/// Mean over the batch of the binary cross-entropy summed over labels.
pub fn multilabel_loss(p: &ParameterSet, batch: &[FineTuneExample]) -> Result<f64, ModelError> {
    Ok(multilabel_pass(p, batch, None, false)?.0)
}

pub fn multilabel_loss_and_grad(
    p: &ParameterSet,
    batch: &[FineTuneExample],
    dropout_seed: Option<(u64, u64)>,
) -> Result<(f64, ParameterSet), ModelError> {
    let (loss, _, grad) = multilabel_pass(p, batch, dropout_seed, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

pub(crate) fn label_probabilities(outputs: &SequenceOutputs) -> Vec<f64> {
    outputs.label_logits.iter().map(|&z| sigmoid(z)).collect()
}
