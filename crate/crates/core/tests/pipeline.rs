//! Library-level run of the whole pipeline on synthetic data.

use radmix::corpus::{
    corpus_stats, dedup_corpus, default_deid_rules, CleanOutcome, Cleaner, CleaningConfig, Deidentifier, Source,
};
use radmix::datasets::{per_label_metrics, stratified_split, threshold_scores, Split, SplitFractions};
use radmix::instances::{create_instances, read_records, write_records, InstanceConfig};
use radmix::mixing::{build_mix_plan, interleave, split_into_chunks, tokenize_document, unmixed, Chunk};
use radmix::synth::{self, SynonymSubset};
use radmix::tinylm::{
    encode_report, fine_tune_multilabel, load_checkpoint, predict, pretrain, save_checkpoint, OptimizerConfig,
    TinyLMConfig, TrainState,
};
use radmix::vocab::{train_wordpiece, VocabTrainerConfig, Vocabulary};

fn cleaned(raw: Vec<radmix::corpus::RawDocument>) -> Vec<radmix::corpus::CleanDocument> {
    let cleaner = Cleaner::new(&CleaningConfig::default()).unwrap();
    raw.iter()
        .filter_map(|d| match cleaner.clean(d) {
            CleanOutcome::Kept(c) => Some(c),
            CleanOutcome::Filtered { .. } => None,
        })
        .collect()
}

#[test]
fn corpus_to_fine_tuned_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let general = cleaned(synth::general_corpus(3, 80));
    let deid = Deidentifier::new(&default_deid_rules()).unwrap();
    let mut domain: Vec<_> = cleaned(synth::domain_corpus(3, 120))
        .iter()
        .map(|d| deid.apply(d).0)
        .collect();
    // a duplicate up to ASCII case and spacing is removed
    let mut twin = domain[0].clone();
    twin.id = "twin".into();
    twin.text = twin.text.to_ascii_uppercase().replace(' ', "  ");
    domain.push(twin);
    let (domain, removed) = dedup_corpus(domain);
    assert_eq!(removed, 1);

    let all: Vec<_> = general.iter().chain(&domain).cloned().collect();
    let manifest = corpus_stats(&all, "2024-01-01T00:00:00Z", "hash");
    let sources: Vec<Source> = manifest.rows.iter().map(|r| r.source).collect();
    assert_eq!(sources, [Source::General, Source::ClinicalReports]);

    let texts: Vec<&str> = all.iter().map(|d| d.text.as_str()).collect();
    let vocab = train_wordpiece(
        &texts,
        &VocabTrainerConfig {
            vocab_size: 700,
            ..Default::default()
        },
    )
    .unwrap();
    let reloaded = Vocabulary::from_vocab_txt(&vocab.to_vocab_txt(), vocab.cased()).unwrap();
    assert_eq!(reloaded.hash(), vocab.hash());

    let tok = |docs: &[radmix::corpus::CleanDocument]| docs.iter().map(|d| tokenize_document(d, &vocab)).collect::<Vec<_>>();
    let large = split_into_chunks(&tok(&general), 61).unwrap();
    let small = split_into_chunks(&tok(&domain), 61).unwrap();
    let plan = build_mix_plan(large.len(), small.len(), 3).unwrap();
    let stream: Vec<&Chunk> = interleave(&plan, &large, &small)
        .unwrap()
        .into_iter()
        .map(|e| e.resolve(&large, &small))
        .collect();
    assert_eq!(stream.len(), plan.stream_len());

    let cfg = InstanceConfig {
        max_seq_len: 64,
        dupe_factor: 2,
        seed: 3,
        ..Default::default()
    };
    let (instances, stats) = create_instances(&stream, &vocab, &cfg).unwrap();
    assert_eq!(stats.instances, 2 * stats.pairs);
    let path = dir.path().join("train.rec");
    write_records(&path, &instances).unwrap();
    assert_eq!(read_records(&path).unwrap(), instances);

    let task_stream: Vec<&Chunk> = unmixed(&small).into_iter().map(|e| e.resolve(&large, &small)).collect();
    let (task_instances, _) = create_instances(&task_stream, &vocab, &cfg).unwrap();
    assert!(task_instances.len() < instances.len());

    let model = TinyLMConfig {
        hidden: 16,
        ffn: 32,
        max_seq_len: 64,
        ..TinyLMConfig::desk(vocab.len())
    };
    let mut state = TrainState::new(&model, 3, &vocab.hash()).unwrap();
    let opt = OptimizerConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        ..OptimizerConfig::pretrain()
    };
    let curve = pretrain(&mut state, &instances, &opt, 6).unwrap();
    assert_eq!(curve.len(), 6);
    let ckpt = dir.path().join("pre.ckpt");
    save_checkpoint(&state, &ckpt).unwrap();
    assert_eq!(load_checkpoint(&ckpt).unwrap(), state);

    let reports = synth::task_reports(3, 60, 0.2, SynonymSubset::All);
    let split = stratified_split(&reports, SplitFractions::default(), 3).unwrap();
    let encode = |part| -> Vec<_> {
        split
            .select(&reports, part)
            .into_iter()
            .map(|r| encode_report(&r.id, &r.text, r.labels, &vocab, 64))
            .collect()
    };
    let fine_opt = OptimizerConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        ..OptimizerConfig::fine_tune()
    };
    let (tuned, losses) = fine_tune_multilabel(&state.params, &encode(Split::Train), &fine_opt, 2, 3).unwrap();
    assert_eq!(losses.len(), 2);
    let test = encode(Split::Test);
    let scores = predict(&tuned, &test).unwrap();
    let gold: Vec<_> = test.iter().map(|e| (e.id.clone(), e.labels)).collect();
    let metrics = per_label_metrics("tiny", "0", &gold, &threshold_scores(&scores, 0.5).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&metrics.macro_f1));
}
