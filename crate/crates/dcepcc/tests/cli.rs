use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcepcc::checkpoint::{net_record, Checkpoint, HeadRecord, Provenance, FORMAT_VERSION};
use dcepcc::config::RunConfig;
use dcepcc::csvio::{load_csv, save_csv, sha256_hex};
use dcepcc_core::data::make_blobs;
use dcepcc_core::model::FeatureNet;

fn dcepcc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcepcc")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

const BLOBS: &[&str] = &["--generator", "blobs", "--classes", "3", "--per-class", "30", "--spread", "0.8"];

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", out, "--set", "epochs=20", "--set", "hidden=[16]", "--set", "feature_dim=4"];
    args.extend_from_slice(extra);
    dcepcc(dir, &args)
}

#[test]
fn train_writes_checkpoint_and_one_metrics_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "m.json", BLOBS);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("m.json").exists());
    let metrics = std::fs::read_to_string(dir.path().join("m.metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 21);
    assert_eq!(metrics.lines().next().unwrap(), "epoch,reg,margin,compact,total,train_acc");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut seeded = BLOBS.to_vec();
    seeded.extend_from_slice(&["--seed", "5"]);
    assert!(train(dir.path(), "a.json", &seeded).status.success());
    assert!(train(dir.path(), "b.json", &seeded).status.success());
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.metrics.csv"), read("b.metrics.csv"));
}

#[test]
fn eval_reproduces_the_final_training_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let t = train(dir.path(), "m.json", BLOBS);
    let mut args = vec!["eval", "--checkpoint", "m.json", "--out", "report.json"];
    args.extend_from_slice(BLOBS);
    let e = dcepcc(dir.path(), &args);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    assert_eq!(field(&stdout(&t), "train_accuracy"), field(&stdout(&e), "accuracy"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["samples"], 90);
}

#[test]
fn separated_binary_one_vs_rest_has_perfect_ap() {
    let dir = tempfile::tempdir().unwrap();
    let data = ["--generator", "blobs", "--classes", "2", "--per-class", "40", "--spread", "0.2", "--data-seed", "11"];
    assert!(train(dir.path(), "m.json", &data).status.success());
    let mut args = vec!["eval", "--checkpoint", "m.json", "--one-vs-rest", "1"];
    args.extend_from_slice(&data);
    let e = dcepcc(dir.path(), &args);
    assert_eq!(field(&stdout(&e), "ap class 1"), "1");
}

#[test]
fn csv_training_and_label_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_blobs(3, 20, 2, 0.5, 1).unwrap();
    let path = dir.path().join("d.csv");
    save_csv(&ds, &path, "y").unwrap();
    let before = sha256_hex(&std::fs::read(&path).unwrap());

    let o = train(dir.path(), "m.json", &["--data", "d.csv", "--label-column", "y"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let e = dcepcc(dir.path(), &["eval", "--checkpoint", "m.json", "--data", "d.csv", "--label-column", "y"]);
    assert_eq!(field(&stdout(&o), "train_accuracy"), field(&stdout(&e), "accuracy"));
    assert_eq!(sha256_hex(&std::fs::read(&path).unwrap()), before);

    let bad = train(dir.path(), "x.json", &["--data", "d.csv", "--label-column", "target"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("`target`"), "{}", stderr(&bad));
}

#[test]
fn eval_rejects_a_feature_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), "m.json", BLOBS).status.success());
    let e = dcepcc(dir.path(), &["eval", "--checkpoint", "m.json", "--generator", "blobs", "--dim", "5"]);
    assert_eq!(e.status.code(), Some(2));
    assert!(stderr(&e).contains("features"), "{}", stderr(&e));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dcepcc(dir.path(), &["fly"]).status.code(), Some(1));
    assert_eq!(dcepcc(dir.path(), &["train", "--out", "m.json"]).status.code(), Some(1));
    assert_eq!(train(dir.path(), "m.json", &["--generator", "blobs", "--set", "kappa=-1"]).status.code(), Some(1));
    assert_eq!(dcepcc(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "epochs = 4\nkappa = 0.25\nhead = \"softmax\"\n").unwrap();
    let c = RunConfig::load(Some(&dir.path().join("c.toml")), &["epochs=6".into()]).unwrap();
    assert_eq!((c.epochs, c.kappa, c.head), (6, 0.25, dcepcc::config::HeadChoice::Softmax));
    let mut args = vec!["train", "--config", "c.toml", "--out", "s.json"];
    args.extend_from_slice(BLOBS);
    let o = dcepcc(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "epochs"), "4");
    let ckpt = Checkpoint::load(&dir.path().join("s.json")).unwrap();
    assert!(matches!(ckpt.head, HeadRecord::Softmax { .. }));
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), "m.json", BLOBS).status.success());
    let first = std::fs::read_to_string(dir.path().join("m.json")).unwrap();
    let ckpt = Checkpoint::from_json(&first).unwrap();
    assert_eq!(ckpt.to_json(), first);
    let restored = ckpt.model().unwrap();
    assert_eq!(restored.net().dims(), vec![2, 16, 4]);

    let bumped = first.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    assert!(Checkpoint::from_json(&bumped).unwrap_err().to_string().contains("format_version"));
}

/// Checkpoint whose class 0 is the L1 ball `|x| + |y| ≤ 1` in feature space.
fn l1_ball_checkpoint(dir: &Path) -> PathBuf {
    let ckpt = Checkpoint {
        format_version: FORMAT_VERSION,
        net: net_record(&FeatureNet::identity(2).unwrap()),
        head: HeadRecord::Conic {
            classes: 1,
            dim: 2,
            shared_vertex: false,
            w: vec![0.0, 0.0],
            gamma: vec![-1.0, -1.0],
            b: vec![1.0],
            centers: vec![0.0, 0.0],
        },
        scaler: None,
        standardizer: None,
        config: RunConfig::default(),
        provenance: Provenance { dataset: "hand-built".into(), class_names: None, seed: 0, epochs: 0 },
    };
    let path = dir.join("ball.json");
    ckpt.save(&path).unwrap();
    path
}

#[test]
fn grid_over_the_l1_ball() {
    let dir = tempfile::tempdir().unwrap();
    l1_ball_checkpoint(dir.path());
    let o = dcepcc(
        dir.path(),
        &["grid", "--checkpoint", "ball.json", "--bounds", "-1.5,1.5,-1.5,1.5", "--resolution", "12"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 12 * 12 + 1);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v[3] == 1.0, v[0].abs() + v[1].abs() <= 1.0, "{line}");
    }
    // reload → save → grid again
    let ckpt = Checkpoint::load(&dir.path().join("ball.json")).unwrap();
    ckpt.save(&dir.path().join("again.json")).unwrap();
    let again = dcepcc(
        dir.path(),
        &["grid", "--checkpoint", "again.json", "--bounds", "-1.5,1.5,-1.5,1.5", "--resolution", "12"],
    );
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn grid_needs_axes_above_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), "m.json", BLOBS).status.success());
    assert_eq!(dcepcc(dir.path(), &["grid", "--checkpoint", "m.json"]).status.code(), Some(1));
    let o =
        dcepcc(dir.path(), &["grid", "--checkpoint", "m.json", "--axes", "0,3", "--resolution", "3", "--out", "g.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("g.csv")).unwrap().lines().count(), 10);
    let i = dcepcc(dir.path(), &["grid", "--checkpoint", "m.json", "--space", "input", "--resolution", "3"]);
    assert_eq!(i.status.code(), Some(0), "{}", stderr(&i));
}

#[test]
fn gradcheck_passes_flags_faults_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dcepcc(dir.path(), &["gradcheck", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let b = dcepcc(dir.path(), &["gradcheck", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 10);
    let f = dcepcc(dir.path(), &["gradcheck", "--inject-fault", "--dims", "2", "--classes", "2"]);
    assert_eq!(f.status.code(), Some(3));
    assert!(stdout(&f).contains("FAIL"));
}

#[test]
fn openset_on_separable_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcepcc(
        dir.path(),
        &[
            "openset",
            "--generator",
            "blobs",
            "--classes",
            "10",
            "--per-class",
            "40",
            "--spread",
            "0.3",
            "--set",
            "epochs=30",
            "--set",
            "hidden=[32]",
            "--set",
            "feature_dim=8",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let runs: Vec<&str> = text.lines().filter(|l| l.starts_with("run ")).collect();
    assert_eq!(runs.len(), 5);
    for r in &runs {
        let w: Vec<&str> = r.split_whitespace().collect();
        let at = w.iter().position(|t| *t == "split_hash").unwrap();
        assert_eq!(w[at + 2], w[at + 4]);
        assert!(r.contains("known [") && r.matches(',').count() >= 5);
    }
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "run,auroc_dcepcc,auroc_softmax");
    let mean: Vec<f64> = table.lines().last().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!(mean[0] >= mean[1] - 0.02, "{mean:?}");

    let few = dcepcc(dir.path(), &["openset", "--generator", "blobs", "--classes", "5"]);
    assert_eq!(few.status.code(), Some(2));
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_blobs(3, 15, 4, 1.3, 8).unwrap();
    let path = dir.path().join("r.csv");
    save_csv(&ds, &path, "label").unwrap();
    let back = load_csv(&path, "label").unwrap();
    assert_eq!(back.features(), ds.features());
    assert_eq!(back.labels().len(), ds.labels().len());
    assert!(back.provenance().contains(&sha256_hex(&std::fs::read(&path).unwrap())));
}
