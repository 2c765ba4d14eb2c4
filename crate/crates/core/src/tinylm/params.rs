use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};

use super::{ModelError, TinyLMConfig};
use crate::seed::{self, stage, StageRng};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
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

/// All model weights. Matrices map row vectors: `y = x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub config: TinyLMConfig,
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub seg_emb: Array2<f64>,
    pub emb_ln_g: Array1<f64>,
    pub emb_ln_b: Array1<f64>,
    pub layers: Vec<LayerParams>,
    pub mlm_dense_w: Array2<f64>,
    pub mlm_dense_b: Array1<f64>,
    pub mlm_ln_g: Array1<f64>,
    pub mlm_ln_b: Array1<f64>,
    /// Output bias of the MLM decoder, whose weights are the token embeddings.
    pub mlm_out_b: Array1<f64>,
    pub pool_w: Array2<f64>,
    pub pool_b: Array1<f64>,
    pub nsp_w: Array2<f64>,
    pub nsp_b: Array1<f64>,
    pub cls_w: Array2<f64>,
    pub cls_b: Array1<f64>,
}

impl LayerParams {
    fn zeros(c: &TinyLMConfig) -> Self {
        let (h, f) = (c.hidden, c.ffn);
        LayerParams {
            wq: Array2::zeros((h, h)),
            bq: Array1::zeros(h),
            wk: Array2::zeros((h, h)),
            bk: Array1::zeros(h),
            wv: Array2::zeros((h, h)),
            bv: Array1::zeros(h),
            wo: Array2::zeros((h, h)),
            bo: Array1::zeros(h),
            ln1_g: Array1::zeros(h),
            ln1_b: Array1::zeros(h),
            w1: Array2::zeros((h, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, h)),
            b2: Array1::zeros(h),
            ln2_g: Array1::zeros(h),
            ln2_b: Array1::zeros(h),
        }
    }

    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("attention.query.weight", self.wq.as_slice().unwrap()),
            ("attention.query.bias", self.bq.as_slice().unwrap()),
            ("attention.key.weight", self.wk.as_slice().unwrap()),
            ("attention.key.bias", self.bk.as_slice().unwrap()),
            ("attention.value.weight", self.wv.as_slice().unwrap()),
            ("attention.value.bias", self.bv.as_slice().unwrap()),
            ("attention.output.weight", self.wo.as_slice().unwrap()),
            ("attention.output.bias", self.bo.as_slice().unwrap()),
            ("attention.norm.gamma", self.ln1_g.as_slice().unwrap()),
            ("attention.norm.beta", self.ln1_b.as_slice().unwrap()),
            ("ffn.in.weight", self.w1.as_slice().unwrap()),
            ("ffn.in.bias", self.b1.as_slice().unwrap()),
            ("ffn.out.weight", self.w2.as_slice().unwrap()),
            ("ffn.out.bias", self.b2.as_slice().unwrap()),
            ("ffn.norm.gamma", self.ln2_g.as_slice().unwrap()),
            ("ffn.norm.beta", self.ln2_b.as_slice().unwrap()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.wq.as_slice_mut().unwrap(),
            self.bq.as_slice_mut().unwrap(),
            self.wk.as_slice_mut().unwrap(),
            self.bk.as_slice_mut().unwrap(),
            self.wv.as_slice_mut().unwrap(),
            self.bv.as_slice_mut().unwrap(),
            self.wo.as_slice_mut().unwrap(),
            self.bo.as_slice_mut().unwrap(),
            self.ln1_g.as_slice_mut().unwrap(),
            self.ln1_b.as_slice_mut().unwrap(),
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.ln2_g.as_slice_mut().unwrap(),
            self.ln2_b.as_slice_mut().unwrap(),
        ]
    }
}

fn is_gamma(name: &str) -> bool {
    name.ends_with("gamma")
}

fn is_bias_like(name: &str) -> bool {
    name.ends_with("bias") || name.ends_with("beta")
}

impl ParameterSet {
    /// Every weight zero, layer-norm gains included. All logits are then zero,
    /// so the MLM loss is exactly `ln(vocab_size)`.
    pub fn zeros(config: &TinyLMConfig) -> Self {
        let c = config;
        let (h, v) = (c.hidden, c.vocab_size);
        ParameterSet {
            config: c.clone(),
            tok_emb: Array2::zeros((v, h)),
            pos_emb: Array2::zeros((c.max_seq_len, h)),
            seg_emb: Array2::zeros((2, h)),
            emb_ln_g: Array1::zeros(h),
            emb_ln_b: Array1::zeros(h),
            layers: (0..c.layers).map(|_| LayerParams::zeros(c)).collect(),
            mlm_dense_w: Array2::zeros((h, h)),
            mlm_dense_b: Array1::zeros(h),
            mlm_ln_g: Array1::zeros(h),
            mlm_ln_b: Array1::zeros(h),
            mlm_out_b: Array1::zeros(v),
            pool_w: Array2::zeros((h, h)),
            pool_b: Array1::zeros(h),
            nsp_w: Array2::zeros((h, 2)),
            nsp_b: Array1::zeros(2),
            cls_w: Array2::zeros((h, c.num_labels)),
            cls_b: Array1::zeros(c.num_labels),
        }
    }

    /// Weights from a normal distribution truncated at two standard
    /// deviations, zero biases and unit layer-norm gains.
    pub fn init(config: &TinyLMConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = seed::rng(seed, &[stage::INIT]);
        let std = config.init_std;
        let names: Vec<&'static str> = p.tensors().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.into_iter().zip(p.tensors_mut()) {
            if is_gamma(name) {
                t.fill(1.0);
            } else if !is_bias_like(name) && std > 0.0 {
                fill_truncated_normal(t, std, &mut rng);
            }
        }
        Ok(p)
    }

    /// Like [`ParameterSet::init`] but with every tensor randomized, including
    /// biases and gains. Used for gradient checks, where zero biases would
    /// leave parts of the backward pass untested.
    pub fn random_dense(config: &TinyLMConfig, seed: u64, std: f64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = seed::rng(seed, &[stage::INIT, 1]);
        let names: Vec<&'static str> = p.tensors().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.into_iter().zip(p.tensors_mut()) {
            fill_truncated_normal(t, std, &mut rng);
            if is_gamma(name) {
                t.iter_mut().for_each(|x| *x += 1.0);
            }
        }
        p
    }

    /// Flat views of every tensor, in a fixed order shared with
    /// [`ParameterSet::tensors_mut`] and the checkpoint format.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out = vec![
            ("embeddings.token", self.tok_emb.as_slice().unwrap()),
            ("embeddings.position", self.pos_emb.as_slice().unwrap()),
            ("embeddings.segment", self.seg_emb.as_slice().unwrap()),
            ("embeddings.norm.gamma", self.emb_ln_g.as_slice().unwrap()),
            ("embeddings.norm.beta", self.emb_ln_b.as_slice().unwrap()),
        ];
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.extend([
            ("mlm.dense.weight", self.mlm_dense_w.as_slice().unwrap()),
            ("mlm.dense.bias", self.mlm_dense_b.as_slice().unwrap()),
            ("mlm.norm.gamma", self.mlm_ln_g.as_slice().unwrap()),
            ("mlm.norm.beta", self.mlm_ln_b.as_slice().unwrap()),
            ("mlm.decoder.bias", self.mlm_out_b.as_slice().unwrap()),
            ("pooler.weight", self.pool_w.as_slice().unwrap()),
            ("pooler.bias", self.pool_b.as_slice().unwrap()),
            ("nsp.weight", self.nsp_w.as_slice().unwrap()),
            ("nsp.bias", self.nsp_b.as_slice().unwrap()),
            ("labels.weight", self.cls_w.as_slice().unwrap()),
            ("labels.bias", self.cls_b.as_slice().unwrap()),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.tok_emb.as_slice_mut().unwrap(),
            self.pos_emb.as_slice_mut().unwrap(),
            self.seg_emb.as_slice_mut().unwrap(),
            self.emb_ln_g.as_slice_mut().unwrap(),
            self.emb_ln_b.as_slice_mut().unwrap(),
        ];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.extend([
            self.mlm_dense_w.as_slice_mut().unwrap(),
            self.mlm_dense_b.as_slice_mut().unwrap(),
            self.mlm_ln_g.as_slice_mut().unwrap(),
            self.mlm_ln_b.as_slice_mut().unwrap(),
            self.mlm_out_b.as_slice_mut().unwrap(),
            self.pool_w.as_slice_mut().unwrap(),
            self.pool_b.as_slice_mut().unwrap(),
            self.nsp_w.as_slice_mut().unwrap(),
            self.nsp_b.as_slice_mut().unwrap(),
            self.cls_w.as_slice_mut().unwrap(),
            self.cls_b.as_slice_mut().unwrap(),
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ParameterSet) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }
}

fn fill_truncated_normal(t: &mut [f64], std: f64, rng: &mut StageRng) {
    let normal = Normal::new(0.0, std).expect("valid std");
    for x in t.iter_mut() {
        *x = loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * std {
                break v;
            }
        };
    }
}
