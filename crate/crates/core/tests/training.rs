mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smiles_bert::model::{loss_and_grad, ModelConfig, TaskSet};
use smiles_bert::tokenizer::{Tokenizer, Vocabulary, MASK_ID};
use smiles_bert::training::{mask_tokens, metrics_csv, pretrain, PretrainConfig, TrainError};

fn tiny_setup() -> (Vec<String>, PretrainConfig, ModelConfig) {
    let smiles: Vec<String> = common::corpus_smiles().into_iter().filter(|s| s.len() < 30).take(60).collect();
    let cfg = PretrainConfig {
        batch_size: 8,
        epochs: 3,
        max_steps: Some(12),
        log_every: 3,
        descriptor_set: "SIMPLE".into(),
        seed: 5,
        ..Default::default()
    };
    let mut model = ModelConfig::tiny(Vocabulary::smiles_default().len(), 5);
    model.max_len = 72;
    (smiles, cfg, model)
}

#[test]
fn pretraining_is_bitwise_reproducible() {
    let (smiles, cfg, model) = tiny_setup();
    let a = pretrain(&smiles, &cfg, &model, None).unwrap();
    let b = pretrain(&smiles, &cfg, &model, None).unwrap();
    assert_eq!(a.steps, 12);
    assert_eq!(a.params, b.params);
    assert_eq!(a.metrics, b.metrics);
    let other = pretrain(&smiles, &PretrainConfig { seed: 6, ..cfg }, &model, None).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn metrics_and_checkpoint_callbacks() {
    let (smiles, mut cfg, model) = tiny_setup();
    cfg.checkpoint_interval = Some(5);
    let mut calls = Vec::new();
    let mut cb = |step: usize, _: &smiles_bert::model::Params<f32>, _: &smiles_bert::descriptors::Normalizer| {
        calls.push(step);
        Ok(())
    };
    let out = pretrain(&smiles, &cfg, &model, Some(&mut cb)).unwrap();
    assert_eq!(calls, vec![5, 10, 12]);
    let steps: Vec<usize> = out.metrics.iter().map(|r| r.step).collect();
    // the epoch's last step (7) is logged with the validation loss
    assert_eq!(steps, vec![3, 6, 7, 9, 12]);
    assert!(out.metrics[2].val_loss.is_some());
    assert!(out.metrics.iter().filter(|r| r.step != 7).all(|r| r.val_loss.is_none()));
    let csv = metrics_csv(&out.metrics);
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(csv.lines().next().unwrap(), "step,epoch,loss_total,loss_mlm,loss_eq,loss_physchem,val_loss");

    // a failing callback aborts training
    let mut fail = |_: usize, _: &smiles_bert::model::Params<f32>, _: &smiles_bert::descriptors::Normalizer| Err("disk full".to_string());
    assert!(matches!(
        pretrain(&smiles, &cfg, &model, Some(&mut fail)),
        Err(TrainError::Checkpoint(_))
    ));
}

#[test]
fn full_epoch_logs_validation_loss() {
    let (smiles, mut cfg, model) = tiny_setup();
    cfg.max_steps = None;
    cfg.log_every = 100;
    let out = pretrain(&smiles, &cfg, &model, None).unwrap();
    assert!(out.validation_size > 0);
    let last = out.metrics.last().unwrap();
    assert!(last.val_loss.unwrap().is_finite());
    assert_eq!(last.step, out.steps);
}

#[test]
fn config_errors() {
    let (smiles, cfg, model) = tiny_setup();
    let none = TaskSet {
        masked_lm: false,
        smiles_eq: false,
        physchem: false,
    };
    assert!(matches!(
        pretrain(&smiles, &PretrainConfig { tasks: none, ..cfg.clone() }, &model, None),
        Err(TrainError::InvalidConfig(_))
    ));
    // descriptor head width must match the descriptor set
    let wide = ModelConfig::tiny(Vocabulary::smiles_default().len(), 9);
    assert!(matches!(pretrain(&smiles, &cfg, &wide, None), Err(TrainError::InvalidConfig(_))));
    let r = pretrain(&["not a smiles".to_string()], &cfg, &model, None);
    assert!(matches!(r, Err(TrainError::EmptyCorpus { .. })), "{r:?}");
}

#[test]
fn masking_rate_over_ten_thousand_molecules() {
    let smiles = common::corpus_smiles();
    let tok = Tokenizer::new(Vocabulary::smiles_default(), 512);
    let vocab = Vocabulary::smiles_default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut content, mut chosen, mut masked, mut kept) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..10_000 {
        let seq = tok.encode_single(&smiles[i % smiles.len()]).unwrap();
        let ex = mask_tokens(&seq, &vocab, 0.15, &mut rng).unwrap();
        content += (0..seq.length).filter(|&p| !Vocabulary::is_special(seq.ids[p])).count();
        chosen += ex.positions.len();
        for &p in &ex.positions {
            if ex.tokens.ids[p] == MASK_ID {
                masked += 1;
            } else if ex.tokens.ids[p] == seq.ids[p] {
                kept += 1;
            }
        }
    }
    let rate = chosen as f64 / content as f64;
    assert!((0.14..=0.16).contains(&rate), "rate {rate}");
    let m = masked as f64 / chosen as f64;
    assert!((0.78..=0.82).contains(&m), "mask share {m}");
    // kept includes random replacements that happened to draw the original
    let k = kept as f64 / chosen as f64;
    assert!((0.09..=0.13).contains(&k), "kept share {k}");
}

#[test]
fn total_loss_is_mean_of_active_tasks() {
    let (cfg, params, batch, targets) = common::gradient_fixture(false, 9);
    let mut singles = Vec::new();
    for tasks in TaskSet::combinations() {
        let (report, _) = loss_and_grad(&params, &cfg, &batch, tasks, &targets, None).unwrap();
        let parts = report.task_losses();
        assert_eq!(parts.len(), tasks.count());
        let mean = parts.iter().sum::<f64>() / parts.len() as f64;
        assert!((report.total - mean).abs() < 1e-12, "{tasks:?}");
        if tasks.count() == 1 {
            singles.push(report.total);
        }
    }
    // each task's loss does not depend on which other tasks are active
    let (all, _) = loss_and_grad(&params, &cfg, &batch, TaskSet::ALL, &targets, None).unwrap();
    let mut expected = singles.clone();
    expected.sort_by(f64::total_cmp);
    let mut got = all.task_losses();
    got.sort_by(f64::total_cmp);
    for (a, b) in expected.iter().zip(&got) {
        assert!((a - b).abs() < 1e-12);
    }
}
