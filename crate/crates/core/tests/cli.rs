use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use smiles_bert::checkpoint::Checkpoint;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smiles-bert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMILES: &str = "CCO\nc1ccccc1O\nCC(=O)Nc1ccc(O)cc1\nCCN(CC)CC\nOC(=O)c1ccccc1\nCC(C)Cc1ccccc1\nC1CCNCC1\nCOc1ccccc1\nClc1ccccc1\nCC#N\nCCOC(=O)C\nNc1ccncc1\n";

fn tiny_checkpoint(dir: &Path) -> std::path::PathBuf {
    let corpus = dir.join("c.smi");
    fs::write(&corpus, SMILES).unwrap();
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"preset": "tiny", "model": {"max_len": 48}, "pretrain": {"batch_size": 4}}"#).unwrap();
    let ck = dir.join("m.ck");
    let out = bin(&[
        "pretrain",
        "--config",
        p(&cfg),
        "--corpus",
        p(&corpus),
        "--out",
        p(&ck),
        "--max-steps",
        "3",
        "--no-holdout",
        "--metrics",
        p(&dir.join("m.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    ck
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["canonicalize"]).status.code(), Some(1));

    let bad = dir.path().join("bad.smi");
    fs::write(&bad, "CCO\nC1CC\n").unwrap();
    let out = bin(&["canonicalize", "--input", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    // the error names the file and line, and nothing is written on failure
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
    assert!(out.stdout.is_empty());

    let missing = dir.path().join("nope.smi");
    assert_eq!(bin(&["canonicalize", "--input", p(&missing)]).status.code(), Some(2));

    let junk = dir.path().join("junk.ck");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let input = dir.path().join("in.smi");
    fs::write(&input, "CCO\n").unwrap();
    assert_eq!(
        bin(&["embed", "--checkpoint", p(&junk), "--input", p(&input)]).status.code(),
        Some(2)
    );

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"model": {"no_such_key": 1}}"#).unwrap();
    let out = bin(&["pretrain", "--config", p(&cfg), "--corpus", p(&input), "--out", p(&junk)]);
    assert_eq!(out.status.code(), Some(1));

    // a divergent learning rate surfaces as a numeric failure
    let corpus = dir.path().join("c.smi");
    fs::write(&corpus, SMILES).unwrap();
    fs::write(&cfg, r#"{"preset": "tiny", "model": {"max_len": 48}, "pretrain": {"batch_size": 4}}"#).unwrap();
    let ck = dir.path().join("x.ck");
    let out = bin(&["pretrain", "--config", p(&cfg), "--corpus", p(&corpus), "--out", p(&ck), "--max-steps", "20", "--lr", "1e30"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!ck.exists());
}

#[test]
fn canonicalize_and_enumerate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.smi");
    fs::write(&input, "OCC\nC(O)C\n").unwrap();
    let out = bin(&["canonicalize", "--input", p(&input)]);
    let lines: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);

    let o = dir.path().join("e.smi");
    let out = bin(&["enumerate", "--input", p(&input), "--count", "4", "--seed", "3", "--output", p(&o)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&o).unwrap();
    assert_eq!(text.lines().count(), 8);
    for l in text.lines() {
        assert!(smiles_bert::chem::same_molecule(l, "CCO").unwrap());
    }
    let again = bin(&["enumerate", "--input", p(&input), "--count", "4", "--seed", "3"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn checkpoint_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let ck = tiny_checkpoint(dir.path());
    let loaded = Checkpoint::load(&ck).unwrap();
    assert_eq!(loaded.step, 3);
    let copy = dir.path().join("copy.ck");
    loaded.save(&copy).unwrap();
    assert_eq!(fs::read(&ck).unwrap(), fs::read(&copy).unwrap());

    let metrics = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(metrics.starts_with("step,epoch,loss_total,loss_mlm,loss_eq,loss_physchem,val_loss\n"));

    // embeddings from the binary match the library on the loaded checkpoint
    let input = dir.path().join("in.smi");
    fs::write(&input, "CCO\nc1ccccc1\n").unwrap();
    let out = bin(&["embed", "--checkpoint", p(&ck), "--input", p(&input)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].len(), loaded.model.hidden + 1);
    let tok = smiles_bert::tokenizer::Tokenizer::new(loaded.vocabulary.clone(), loaded.model.max_len);
    let e = smiles_bert::model::embed_molecules(
        &loaded.params,
        &loaded.model,
        &tok,
        &["CCO", "c1ccccc1"],
        smiles_bert::model::EmbedStrategy::Pooled,
        8,
    );
    for (r, row) in rows.iter().enumerate() {
        for k in 0..loaded.model.hidden {
            assert_eq!(row[k + 1].parse::<f32>().unwrap(), e[[r, k]]);
        }
    }
}

#[test]
fn screen_qsar_and_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let ck = tiny_checkpoint(dir.path());
    let bench = dir.path().join("bench");
    let out = bin(&[
        "synth-benchmark",
        "--out",
        p(&bench),
        "--targets",
        "2",
        "--actives",
        "8",
        "--decoys",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(0));
    for embedder in ["model", "descriptors"] {
        let out = bin(&[
            "screen",
            "--checkpoint",
            p(&ck),
            "--benchmark",
            p(&bench),
            "--embedder",
            embedder,
            "--repetitions",
            "3",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("target,auroc_mean,auroc_std,bedroc_mean,bedroc_std\n"));
    }

    let ds = dir.path().join("q.csv");
    let mut csv = String::from("smiles,label\n");
    for (i, s) in SMILES.lines().enumerate() {
        csv.push_str(&format!("{s},{}\n", i as f64 * 0.1));
    }
    fs::write(&ds, csv).unwrap();
    let out = bin(&[
        "qsar",
        "--checkpoint",
        p(&ck),
        "--dataset",
        p(&ds),
        "--task",
        "regression",
        "--folds",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 + 2);
    assert!(text.contains("mean,rmse,"));

    let groups = dir.path().join("g.csv");
    fs::write(&groups, "a,CCO\na,OCC\nb,c1ccccc1\nb,C1=CC=CC=C1\nb,c1ccccc1C\n").unwrap();
    let out = bin(&["analyze-similarity", "--checkpoint", p(&ck), "--groups", p(&groups)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\na,2,1.000000\n"), "{text}");
}
