use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{label_probabilities, multilabel_loss_and_grad, multilabel_pass, pretrain_loss_and_grad};
use super::{ModelError, ParameterSet, TinyLMConfig};
use crate::datasets::{LabelVector, ScoredPrediction};
use crate::instances::PretrainInstance;
use crate::seed::{self, stage};
use crate::vocab::{Vocabulary, CLS, SEP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Linear warmup length; the rate stays constant afterwards.
    pub warmup_steps: u64,
    pub batch_size: usize,
}

impl OptimizerConfig {
    /// Pretraining defaults. Warmup is shortened for desk-scale runs.
    pub fn pretrain() -> Self {
        OptimizerConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-6,
            warmup_steps: 100,
            batch_size: 32,
        }
    }

    pub fn fine_tune() -> Self {
        OptimizerConfig {
            learning_rate: 5e-5,
            warmup_steps: 0,
            ..Self::pretrain()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(
                "optimizer needs learning_rate > 0, betas in (0, 1), epsilon > 0 and batch_size > 0".into(),
            ))
        }
    }

    /// Learning rate used for update number `step` (0-based).
    pub fn rate_at(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 {
            self.learning_rate
        } else {
            self.learning_rate * ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }
}

/// Adam moments plus the number of updates applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: ParameterSet,
    pub v: ParameterSet,
    pub step: u64,
}

impl Adam {
    pub fn new(config: &TinyLMConfig) -> Self {
        Adam {
            m: ParameterSet::zeros(config),
            v: ParameterSet::zeros(config),
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut ParameterSet, grad: &ParameterSet, opt: &OptimizerConfig) {
        let lr = opt.rate_at(self.step);
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, (_, g)), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

/// Everything needed to continue pretraining exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParameterSet,
    pub adam: Adam,
    pub seed: u64,
    pub vocab_hash: String,
}

impl TrainState {
    pub fn new(config: &TinyLMConfig, seed: u64, vocab_hash: &str) -> Result<Self, ModelError> {
        Ok(TrainState {
            params: ParameterSet::init(config, seed)?,
            adam: Adam::new(config),
            seed,
            vocab_hash: vocab_hash.to_string(),
        })
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub mlm_loss: f64,
    pub nsp_loss: f64,
    pub total: f64,
}

pub fn loss_curve_csv(rows: &[LossRow]) -> String {
    let mut out = String::from("step,mlm_loss,nsp_loss,total\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.mlm_loss, r.nsp_loss, r.total));
    }
    out
}

/// Example indices of batch number `step`. Examples are visited in a fresh
/// seeded permutation per epoch, so the batch depends only on the step.
pub fn batch_indices(seed: u64, n: usize, batch_size: usize, step: u64) -> Vec<usize> {
    let mut cached: Option<(u64, Vec<usize>)> = None;
    let start = step as usize * batch_size;
    (start..start + batch_size)
        .map(|g| {
            let epoch = (g / n) as u64;
            if cached.as_ref().map(|c| c.0) != Some(epoch) {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut seed::rng(seed, &[stage::BATCH, epoch]));
                cached = Some((epoch, perm));
            }
            cached.as_ref().unwrap().1[g % n]
        })
        .collect()
}

fn ensure_finite(grad: &ParameterSet) -> Result<(), ModelError> {
    match grad.first_non_finite() {
        Some(name) => Err(ModelError::NonFinite(format!("gradient of {name}"))),
        None => Ok(()),
    }
}

/// Runs `steps` more Adam updates of the MLM + NSP objective and returns the
/// per-step losses (measured with dropout, before each update).
pub fn pretrain(
    state: &mut TrainState,
    instances: &[PretrainInstance],
    opt: &OptimizerConfig,
    steps: u64,
) -> Result<Vec<LossRow>, ModelError> {
    opt.validate()?;
    if instances.is_empty() {
        return Err(ModelError::Config("no pretraining instances".into()));
    }
    let mut curve = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let step = state.adam.step;
        let batch: Vec<PretrainInstance> = batch_indices(state.seed, instances.len(), opt.batch_size, step)
            .into_iter()
            .map(|i| instances[i].clone())
            .collect();
        let (loss, grad) = pretrain_loss_and_grad(&state.params, &batch, Some((state.seed, step)))?;
        ensure_finite(&grad)?;
        state.adam.update(&mut state.params, &grad, opt);
        curve.push(LossRow {
            step,
            mlm_loss: loss.mlm,
            nsp_loss: loss.nsp,
            total: loss.total,
        });
    }
    Ok(curve)
}

/// A tokenized report ready for the multi-label head.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneExample {
    pub id: String,
    pub ids: Vec<u32>,
    pub labels: LabelVector,
}

/// `[CLS] tokens [SEP]`, with the tokens truncated to fit `max_seq_len`.
pub fn encode_report(id: &str, text: &str, labels: LabelVector, vocab: &Vocabulary, max_seq_len: usize) -> FineTuneExample {
    let mut ids = vec![CLS];
    let body = vocab.tokenize_to_ids(text);
    ids.extend(body.into_iter().take(max_seq_len.saturating_sub(2)));
    ids.push(SEP);
    FineTuneExample {
        id: id.to_string(),
        ids,
        labels,
    }
}

/// Fine-tunes a copy of `params` on the multi-label objective with a fresh
/// optimizer. Returns the tuned parameters and the mean loss of each epoch.
pub fn fine_tune_multilabel(
    params: &ParameterSet,
    examples: &[FineTuneExample],
    opt: &OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<(ParameterSet, Vec<f64>), ModelError> {
    opt.validate()?;
    if examples.is_empty() {
        return Err(ModelError::Config("no fine-tuning examples".into()));
    }
    let mut p = params.clone();
    let mut adam = Adam::new(&p.config);
    let steps_per_epoch = examples.len().div_ceil(opt.batch_size);
    let mut epoch_losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut seed::rng(seed, &[stage::BATCH, epoch as u64]));
        let mut sum = 0.0;
        for chunk in order.chunks(opt.batch_size) {
            let batch: Vec<FineTuneExample> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grad) = multilabel_loss_and_grad(&p, &batch, Some((seed, adam.step)))?;
            ensure_finite(&grad)?;
            adam.update(&mut p, &grad, opt);
            sum += loss;
        }
        epoch_losses.push(sum / steps_per_epoch as f64);
    }
    Ok((p, epoch_losses))
}

/// Sigmoid scores per label, without dropout.
pub fn predict(params: &ParameterSet, examples: &[FineTuneExample]) -> Result<Vec<ScoredPrediction>, ModelError> {
    if examples.is_empty() {
        return Ok(Vec::new());
    }
    let (_, outputs, _) = multilabel_pass(params, examples, None, false)?;
    Ok(examples
        .iter()
        .zip(outputs)
        .map(|(ex, out)| ScoredPrediction {
            id: ex.id.clone(),
            scores: label_probabilities(&out),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{threshold_scores, NUM_LABELS};
    use crate::tinylm::pretrain_loss;

    fn tiny(v: usize) -> TinyLMConfig {
        TinyLMConfig {
            layers: 1,
            hidden: 16,
            heads: 2,
            ffn: 32,
            max_seq_len: 16,
            vocab_size: v,
            dropout: 0.0,
            num_labels: NUM_LABELS,
            init_std: 0.02,
        }
    }

    #[test]
    fn batches_cover_each_epoch_once() {
        let mut seen = vec![0; 10];
        for step in 0..5 {
            for i in batch_indices(3, 10, 4, step) {
                seen[i] += 1;
            }
        }
        assert_eq!(seen, vec![2; 10]);
        assert_eq!(batch_indices(3, 10, 4, 2), batch_indices(3, 10, 4, 2));
    }

    #[test]
    fn warmup_is_linear_then_flat() {
        let opt = OptimizerConfig {
            warmup_steps: 4,
            ..OptimizerConfig::pretrain()
        };
        let rates: Vec<f64> = (0..6).map(|s| opt.rate_at(s) / opt.learning_rate).collect();
        assert_eq!(rates, vec![0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let c = tiny(20);
        let mut p = ParameterSet::zeros(&c);
        let mut g = ParameterSet::zeros(&c);
        g.cls_b[0] = 3.0;
        g.cls_b[1] = -0.5;
        let opt = OptimizerConfig {
            learning_rate: 0.01,
            warmup_steps: 0,
            ..OptimizerConfig::pretrain()
        };
        Adam::new(&c).update(&mut p, &g, &opt);
        assert!((p.cls_b[0] + 0.01).abs() < 1e-7);
        assert!((p.cls_b[1] - 0.01).abs() < 1e-7);
        assert_eq!(p.cls_b[2], 0.0);
    }

    #[test]
    fn zero_head_scores_are_one_half() {
        let c = tiny(20);
        let p = ParameterSet::init(&c, 1).unwrap();
        let mut z = p.clone();
        z.cls_w.fill(0.0);
        z.cls_b.fill(0.0);
        let ex = FineTuneExample {
            id: "r".into(),
            ids: vec![2, 7, 8, 3],
            labels: [0; NUM_LABELS],
        };
        let scores = predict(&z, &[ex]).unwrap();
        assert!(scores[0].scores.iter().all(|&s| s == 0.5));
        let low = threshold_scores(&scores, 0.4).unwrap();
        let high = threshold_scores(&scores, 0.6).unwrap();
        assert!(low[0].labels.iter().all(|&l| l == 1));
        assert!(high[0].labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn pretraining_lowers_loss() {
        let c = tiny(30);
        let mut state = TrainState::new(&c, 2, "h").unwrap();
        let inst = crate::tinylm::gradcheck::tests::sample_batch(4, 30, 16, 1);
        let before = pretrain_loss(&state.params, &inst).unwrap().total;
        let opt = OptimizerConfig {
            learning_rate: 3e-3,
            warmup_steps: 5,
            batch_size: 4,
            ..OptimizerConfig::pretrain()
        };
        let curve = pretrain(&mut state, &inst, &opt, 60).unwrap();
        assert_eq!(curve.len(), 60);
        let after = pretrain_loss(&state.params, &inst).unwrap().total;
        assert!(after < 0.5 * before, "{before} -> {after}");
        assert!(loss_curve_csv(&curve).starts_with("step,mlm_loss,nsp_loss,total\n0,"));
    }
}
