use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crydetect_synth::{write_corpus, CorpusSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crydetect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
    config: PathBuf,
}

fn fixture(n_per_class: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let spec = CorpusSpec {
        n_cry: n_per_class,
        n_not_cry: n_per_class,
        n_participants: 4,
        n_train_participants: 3,
        seconds: 1.0,
        ..CorpusSpec::default()
    };
    let manifest = write_corpus(&root, &spec).unwrap();
    let config = root.join("quick.json");
    fs::write(&config, r#"{"n_trees": 20, "seed": 3}"#).unwrap();
    Fixture {
        _dir: dir,
        root,
        manifest,
        config,
    }
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn features_rows_and_block_restriction() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        n_cry: 2,
        n_not_cry: 1,
        n_participants: 1,
        n_train_participants: 1,
        seconds: 0.5,
        ..CorpusSpec::default()
    };
    let manifest = write_corpus(dir.path(), &spec).unwrap();
    let out = dir.path().join("f.csv");
    ok(&["features", "--manifest", s(&manifest), "--out", s(&out)]);
    let rows = lines(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].split(',').count(), 1 + 40 + 24 + 14);

    ok(&[
        "features",
        "--manifest",
        s(&manifest),
        "--blocks",
        "mfcc,chroma",
        "--out",
        s(&out),
    ]);
    let rows = lines(&out);
    let header: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(header.len(), 1 + 40 + 24);
    assert!(header[1..]
        .iter()
        .all(|h| h.starts_with("mfcc_") || h.starts_with("chroma_")));

    let sidecar = fs::read_to_string(dir.path().join("f.csv.config.json")).unwrap();
    assert!(
        sidecar.contains("\"blocks\": [\n    \"mfcc\",\n    \"chroma\"\n  ]"),
        "{sidecar}"
    );

    // Stdout when --out is omitted.
    let o = ok(&["features", "--manifest", s(&manifest), "--blocks", "contrast"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn missing_wav_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    fs::write(
        &manifest,
        "id,path,label,participant,split\na,wav/nowhere.wav,cry,p1,train\n",
    )
    .unwrap();
    let o = run(&["features", "--manifest", s(&manifest)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nowhere.wav"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_config_exits_2() {
    let f = fixture(2);
    let cfg = f.root.join("bad.json");
    fs::write(&cfg, r#"{"n_tree": 5}"#).unwrap();
    let o = run(&["features", "--manifest", s(&f.manifest), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_tree"));

    fs::write(&cfg, r#"{"hop": 0}"#).unwrap();
    let o = run(&["features", "--manifest", s(&f.manifest), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hop"));

    let o = run(&["train", "--manifest", s(&f.manifest)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let f = fixture(8);
    let model = f.root.join("m.cryd");
    let o = ok(&[
        "train",
        "--manifest",
        s(&f.manifest),
        "--config",
        s(&f.config),
        "--out",
        s(&model),
    ]);
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("n_train=12"), "{summary}");

    let preds = f.root.join("train_preds.csv");
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--manifest",
        s(&f.manifest),
        "--split",
        "train",
        "--out",
        s(&preds),
    ]);
    assert_eq!(
        fs::read(&preds).unwrap(),
        fs::read(f.root.join("m.cryd.train_scores.csv")).unwrap()
    );

    let report = f.root.join("eval.txt");
    ok(&[
        "evaluate",
        "--manifest",
        s(&f.manifest),
        "--model",
        s(&model),
        "--out",
        s(&report),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    for key in ["auc=", "group_p3_auc=", "accuracy=", "class_1_f1=", "weighted_f1="] {
        assert!(text.contains(key), "{key} missing from {text}");
    }
    assert_eq!(lines(&f.root.join("eval.txt.groups.csv"))[0], "group,auc,n");
    assert_eq!(lines(&f.root.join("eval.txt.roc.csv"))[0], "threshold,fpr,tpr");

    // Single-file prediction uses the file stem as the id.
    let o = ok(&[
        "predict",
        "--model",
        s(&model),
        "--input",
        s(&f.root.join("wav/seg0000.wav")),
    ]);
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("seg0000,"));
}

#[test]
fn evaluate_perfect_predictions() {
    let f = fixture(4);
    let text = fs::read_to_string(&f.manifest).unwrap();
    let mut preds = String::from("segment_id,score,label,silenced\n");
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        preds.push_str(&format!("{},{}.0,{},0\n", cols[0], cols[2], cols[2]));
    }
    let p = f.root.join("p.csv");
    fs::write(&p, preds).unwrap();
    let o = ok(&[
        "evaluate",
        "--manifest",
        s(&f.manifest),
        "--predictions",
        s(&p),
        "--split",
        "all",
    ]);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().any(|l| l == "accuracy=1.0"), "{out}");
    assert!(out.lines().any(|l| l == "auc=1.0"), "{out}");

    fs::write(&p, "segment_id,score,label,silenced\nseg0000,1.0,1,0\n").unwrap();
    let o = run(&["evaluate", "--manifest", s(&f.manifest), "--predictions", s(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no prediction for segment"));
}

const PROPOSED: [f64; 6] = [0.9559, 0.9595, 0.9499, 0.9582, 0.9532, 0.8682];
const YAO: [f64; 6] = [0.8931, 0.9406, 0.9186, 0.9167, 0.8948, 0.8414];
const GROUPS: [&str; 6] = ["P26", "P15", "P38", "P36", "P20", "P22"];

fn group_csv(path: &Path, groups: &[&str], aucs: &[f64]) {
    let mut t = String::from("group,auc,n\n");
    for (g, a) in groups.iter().zip(aucs) {
        t.push_str(&format!("{g},{a},100\n"));
    }
    fs::write(path, t).unwrap();
}

#[test]
fn compare_pairs_and_key_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("proposed.csv");
    let b = dir.path().join("yao.csv");
    group_csv(&a, &GROUPS, &PROPOSED);
    group_csv(&b, &GROUPS, &YAO);
    let o = ok(&["compare", s(&a), s(&b)]);
    let out = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], &["proposed", "yao"]);
    let p_right: f64 = row[4].parse().unwrap();
    assert!((p_right - 1.0).abs() <= 0.005, "{out}");

    let c = dir.path().join("other.csv");
    group_csv(&c, &["P26", "P15", "P38", "P36", "P20", "P99"], &YAO);
    let o = run(&["compare", s(&a), s(&c)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("P22, P99"), "{err}");

    // Three files give three pairs.
    let d = dir.path().join("third.csv");
    group_csv(&d, &GROUPS, &[0.9, 0.9, 0.9, 0.9, 0.9, 0.9]);
    let o = ok(&["compare", s(&a), s(&b), s(&d), "--n-mc", "2000"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn ablate_default_subsets() {
    let f = fixture(6);
    let out = f.root.join("abl.csv");
    ok(&[
        "ablate",
        "--manifest",
        s(&f.manifest),
        "--config",
        s(&f.config),
        "--out",
        s(&out),
    ]);
    let rows = lines(&out);
    assert_eq!(rows[0], "subset,accuracy,f1");
    assert_eq!(rows.len(), 8);
    assert!(rows[7].starts_with("mfcc+chroma+contrast,"));

    ok(&[
        "ablate",
        "--manifest",
        s(&f.manifest),
        "--config",
        s(&f.config),
        "--subsets",
        "chroma;mfcc",
        "--out",
        s(&out),
    ]);
    let rows = lines(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("chroma,"));
}

#[test]
fn outputs_independent_of_worker_count() {
    let f = fixture(6);
    let mut outputs = Vec::new();
    for w in ["1", "8"] {
        let model = f.root.join(format!("m{w}.cryd"));
        let feats = f.root.join(format!("f{w}.csv"));
        let preds = f.root.join(format!("p{w}.csv"));
        ok(&[
            "train",
            "--manifest",
            s(&f.manifest),
            "--config",
            s(&f.config),
            "--workers",
            w,
            "--out",
            s(&model),
        ]);
        ok(&[
            "features",
            "--manifest",
            s(&f.manifest),
            "--workers",
            w,
            "--out",
            s(&feats),
        ]);
        ok(&[
            "predict",
            "--model",
            s(&model),
            "--manifest",
            s(&f.manifest),
            "--workers",
            w,
            "--out",
            s(&preds),
        ]);
        outputs.push([
            fs::read(model).unwrap(),
            fs::read(feats).unwrap(),
            fs::read(preds).unwrap(),
        ]);
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let f = fixture(4);
    let m = f.root.join("m.cryd");
    ok(&[
        "train",
        "--manifest",
        s(&f.manifest),
        "--config",
        s(&f.config),
        "--seed",
        "11",
        "--classifier",
        "svm-linear",
        "--out",
        s(&m),
    ]);
    let cfg = fs::read_to_string(f.root.join("m.cryd.config.json")).unwrap();
    assert!(cfg.contains("\"seed\": 11"));
    assert!(cfg.contains("\"n_trees\": 20"));
    assert!(cfg.contains("\"classifier\": \"svm-linear\""));
}
