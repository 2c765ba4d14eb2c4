use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{multilabel_loss_and_grad, pretrain_loss_and_grad};
use super::{multilabel_loss, pretrain_loss, FineTuneExample, ModelError, ParameterSet};
use crate::instances::PretrainInstance;
use crate::seed::{self, stage};

/// The loss whose gradient is checked.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Pretrain(&'a [PretrainInstance]),
    MultiLabel(&'a [FineTuneExample]),
}

impl Objective<'_> {
    fn loss(&self, p: &ParameterSet) -> Result<f64, ModelError> {
        match self {
            Objective::Pretrain(b) => Ok(pretrain_loss(p, b)?.total),
            Objective::MultiLabel(b) => multilabel_loss(p, b),
        }
    }

    fn grad(&self, p: &ParameterSet) -> Result<ParameterSet, ModelError> {
        match self {
            Objective::Pretrain(b) => Ok(pretrain_loss_and_grad(p, b, None)?.1),
            Objective::MultiLabel(b) => Ok(multilabel_loss_and_grad(p, b, None)?.1),
        }
    }

    /// Token ids present in the batch; other embedding rows have zero gradient.
    fn active_tokens(&self) -> Vec<usize> {
        let ids: BTreeSet<usize> = match self {
            Objective::Pretrain(b) => b
                .iter()
                .flat_map(|i| i.input_ids[..i.len()].iter().map(|&t| t as usize))
                .collect(),
            Objective::MultiLabel(b) => b.iter().flat_map(|e| e.ids.iter().map(|&t| t as usize)).collect(),
        };
        ids.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor name and index of the worst coordinate.
    pub worst: (String, usize),
    pub checked: usize,
}

/// Compares analytic gradients with central differences on `samples`
/// coordinates. A tensor is drawn uniformly, then a coordinate within it; for
/// the token embedding only rows of tokens in the batch are eligible. The
/// relative error is `|a − n| / max(|a| + |n|, 1e-6)`. Dropout is disabled.
pub fn grad_check(
    params: &ParameterSet,
    objective: Objective,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    let mut p = params.clone();
    p.config.dropout = 0.0;
    let analytic = objective.grad(&p)?;
    if let Some(name) = analytic.first_non_finite() {
        return Err(ModelError::NonFinite(format!("gradient of {name}")));
    }
    let names: Vec<&'static str> = p.tensors().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
    let active = objective.active_tokens();
    let hidden = p.config.hidden;
    let mut rng = seed::rng(seed, &[stage::GRADCHECK]);

    let mut worst = (0.0f64, (String::new(), 0usize));
    for _ in 0..samples {
        let t = rng.gen_range(0..names.len());
        let len = grads[t].len();
        let j = if t == 0 {
            active[rng.gen_range(0..active.len())] * hidden + rng.gen_range(0..hidden)
        } else {
            rng.gen_range(0..len)
        };
        let original = p.tensors()[t].1[j];
        p.tensors_mut()[t][j] = original + epsilon;
        let plus = objective.loss(&p)?;
        p.tensors_mut()[t][j] = original - epsilon;
        let minus = objective.loss(&p)?;
        p.tensors_mut()[t][j] = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = grads[t][j];
        if !numeric.is_finite() {
            return Err(ModelError::NonFinite(format!("loss near {}[{j}]", names[t])));
        }
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        if rel > worst.0 || worst.1 .0.is_empty() {
            worst = (rel, (names[t].to_string(), j));
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst: worst.1,
        checked: samples,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::datasets::NUM_LABELS;
    use crate::tinylm::TinyLMConfig;
    use crate::vocab::{CLS, SEP};

    /// Random well-formed instances with two predictions each.
    pub(crate) fn sample_batch(n: usize, vocab: u32, max_len: usize, seed_v: u64) -> Vec<PretrainInstance> {
        let mut rng = seed::rng(seed_v, &[99]);
        (0..n)
            .map(|_| {
                let len = rng.gen_range(6..=max_len);
                let a = rng.gen_range(1..len - 3);
                let mut ids = vec![CLS];
                ids.extend((0..a).map(|_| rng.gen_range(5..vocab)));
                ids.push(SEP);
                ids.extend((0..len - 3 - a).map(|_| rng.gen_range(5..vocab)));
                ids.push(SEP);
                let mut segments = vec![0u8; a + 2];
                segments.resize(len, 1);
                let positions = [1u32, (len - 2) as u32];
                let labels: Vec<u32> = positions.iter().map(|&p| ids[p as usize]).collect();
                for &p in &positions {
                    ids[p as usize] = crate::vocab::MASK;
                }
                let mut mask = vec![1u8; len];
                mask.resize(max_len, 0);
                ids.resize(max_len, 0);
                segments.resize(max_len, 0);
                PretrainInstance {
                    input_ids: ids,
                    attention_mask: mask,
                    segment_ids: segments,
                    masked_positions: positions.to_vec(),
                    masked_label_ids: labels,
                    masked_weights: vec![1, 1],
                    next_sentence_label: rng.gen_range(0..2),
                }
            })
            .collect()
    }

    fn cfg() -> TinyLMConfig {
        TinyLMConfig {
            layers: 2,
            hidden: 8,
            heads: 2,
            ffn: 16,
            max_seq_len: 12,
            vocab_size: 24,
            dropout: 0.1,
            num_labels: NUM_LABELS,
            init_std: 0.02,
        }
    }

    #[test]
    fn pretrain_gradients_match_differences() {
        let p = ParameterSet::random_dense(&cfg(), 1, 0.3);
        let batch = sample_batch(3, 24, 12, 2);
        let r = grad_check(&p, Objective::Pretrain(&batch), 1e-5, 300, 0).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        let again = grad_check(&p, Objective::Pretrain(&batch), 1e-5, 300, 0).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn multilabel_gradients_match_differences() {
        let p = ParameterSet::random_dense(&cfg(), 3, 0.3);
        let examples: Vec<FineTuneExample> = sample_batch(3, 24, 12, 4)
            .into_iter()
            .enumerate()
            .map(|(i, inst)| FineTuneExample {
                id: i.to_string(),
                ids: inst.input_ids[..inst.len()].to_vec(),
                labels: std::array::from_fn(|l| ((i + l) % 3 == 0) as u8),
            })
            .collect();
        let r = grad_check(&p, Objective::MultiLabel(&examples), 1e-5, 300, 1).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn zero_weight_batch_gives_zero_head_gradients() {
        let p = ParameterSet::random_dense(&cfg(), 5, 0.3);
        let mut batch = sample_batch(2, 24, 12, 6);
        for inst in &mut batch {
            inst.masked_weights = vec![0, 0];
        }
        let (_, g) = pretrain_loss_and_grad(&p, &batch, None).unwrap();
        for t in [&g.mlm_dense_w, &g.cls_w] {
            assert!(t.iter().all(|&x| x == 0.0));
        }
        assert!(g.nsp_w.iter().any(|&x| x != 0.0));
    }
}
