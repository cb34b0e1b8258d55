use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smdma::ranking::read_ranking_file;

const SMALL: &str = "\
run.seed = 3
data.dir = data
data.eval_dir = eval
semantic.hidden = 24
semantic.dim = 8
semantic.epochs = 5
train.epochs = 2
";

fn smdma(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smdma")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = smdma(cwd, args);
    assert!(
        out.status.success(),
        "smdma {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a failing command; returns (exit code, stderr).
fn fails(cwd: &Path, args: &[&str]) -> (i32, String) {
    let out = smdma(cwd, args);
    assert!(!out.status.success(), "smdma {} unexpectedly succeeded", args.join(" "));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "error must be one line: {err:?}");
    assert!(err.starts_with("error: "), "{err:?}");
    (out.status.code().unwrap(), err)
}

/// Dataset plus trained models in `dir/ws`.
fn workspace(dir: &Path, extra: &str) -> PathBuf {
    std::fs::write(dir.join("exp.cfg"), format!("{SMALL}{extra}")).unwrap();
    ok(dir, &["gen-data", "--out", "ws/data", "--count", "6", "--size", "8", "--seed", "1"]);
    ok(dir, &["gen-data", "--out", "ws/eval", "--count", "2", "--size", "8", "--seed", "2"]);
    ok(dir, &["train", "--stage", "semantic", "--config", "exp.cfg", "--out", "ws"]);
    ok(dir, &["train", "--stage", "channel", "--config", "exp.cfg", "--out", "ws"]);
    ok(dir, &["calibrate", "--config", "exp.cfg", "--out", "ws/ranking.txt"]);
    dir.join("ws")
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn manifest(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_slice(&read(path)).unwrap()
}

#[test]
fn gen_data_zero_edit_gives_identical_images() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen-data", "--out", "x", "--count", "1", "--size", "8", "--edit-fraction", "0"]);
    assert_eq!(read(d.path().join("x/pair_0000_a.pgm")), read(d.path().join("x/pair_0000_b.pgm")));
    let index = String::from_utf8(read(d.path().join("x/index.txt"))).unwrap();
    assert!(index.lines().any(|l| l == "pair_0000_a.pgm pair_0000_b.pgm"));
}

#[test]
fn gen_data_is_deterministic_and_guards_existing_data() {
    let d = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["gen-data", "--out", out, "--count", "3", "--size", "9", "--seed", "5"];
    ok(d.path(), &args("a"));
    ok(d.path(), &args("b"));
    for f in ["index.txt", "pair_0000_a.pgm", "pair_0002_b.pgm"] {
        assert_eq!(read(d.path().join("a").join(f)), read(d.path().join("b").join(f)));
    }
    let (code, err) = fails(d.path(), &args("a"));
    assert_eq!(code, 2);
    assert!(err.contains("--force"), "{err}");
    let mut forced = args("a").to_vec();
    forced.push("--force");
    ok(d.path(), &forced);
}

#[test]
fn gen_data_rejects_tiny_images() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = fails(d.path(), &["gen-data", "--out", "x", "--count", "1", "--size", "4"]);
    assert_eq!(code, 2);
    assert!(err.contains("too small"), "{err}");
    assert!(!d.path().join("x").exists());
}

#[test]
fn channel_training_with_zero_epochs_keeps_initialization() {
    let d = tempfile::tempdir().unwrap();
    let ws = workspace(d.path(), "train.epochs = 0\n");
    assert_eq!(read(ws.join("channel_encoder.nn")), read(ws.join("channel_encoder.init.nn")));
    assert_eq!(read(ws.join("channel_decoder.nn")), read(ws.join("channel_decoder.init.nn")));
    let csv = String::from_utf8(read(ws.join("channel_loss.csv"))).unwrap();
    assert_eq!(csv, "epoch,combined,user1,user2\n");
}

#[test]
fn loss_curves_have_one_row_per_epoch_and_runs_repeat() {
    let d = tempfile::tempdir().unwrap();
    let ws = workspace(d.path(), "train.epochs = 3\nchannel_codec.shared_decoder = false\n");
    let csv = String::from_utf8(read(ws.join("channel_loss.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    let sem = String::from_utf8(read(ws.join("semantic_loss.csv"))).unwrap();
    assert_eq!(sem.lines().count(), 1 + 5);
    for f in ["channel_decoder_1.nn", "channel_decoder_2.nn"] {
        assert!(ws.join(f).exists(), "{f}");
    }

    let m = manifest(ws.join("manifest-train-channel.json"));
    let outputs = m["outputs"].as_object().unwrap().clone();
    ok(d.path(), &["train", "--stage", "channel", "--config", "exp.cfg", "--out", "ws"]);
    let again = manifest(ws.join("manifest-train-channel.json"));
    assert_eq!(again["outputs"].as_object().unwrap(), &outputs);
    assert!(m["config"].as_str().unwrap().contains("train.epochs = 3"));
    assert!(m["seeds"]["run.seed"].as_u64() == Some(3));
    assert!(m["version"].is_string() && m["started_unix"].is_u64() && m["finished_unix"].is_u64());
}

#[test]
fn calibrated_ranking_parses_back() {
    let d = tempfile::tempdir().unwrap();
    let ws = workspace(d.path(), "");
    let (perm, eps) = read_ranking_file(&ws.join("ranking.txt")).unwrap();
    assert_eq!(perm.len(), 8);
    assert_eq!(eps, 0.01);
    let text = String::from_utf8(read(ws.join("ranking.txt"))).unwrap();
    let corrupted = text.replacen(&format!("{}", perm.as_slice()[0]), &format!("{}", perm.as_slice()[1]), 1);
    assert!(smdma::ranking::decode_ranking(&corrupted).is_err());
}

#[test]
fn sweep_grid_counts_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    workspace(d.path(), "sweep.seeds = 5\n");
    let stdout = ok(
        d.path(),
        &[
            "sweep", "--config", "exp.cfg", "--snr", "-10:10:5", "--ratio", "0.5,1", "--sorting", "sensitivity,random",
            "--seeds", "2", "--out", "ws", "--set", "channel.mode=awgn_only",
        ],
    );
    assert!(stdout.contains("channel uses"), "{stdout}");
    let csv = String::from_utf8(read(d.path().join("ws/sweep.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("snr_db,ratio,seed,user,sorting,normalization,mse,psnr_db,ssim"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5 * 2 * 2 * 2 * 2);
    let snrs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(snrs.into_iter().collect::<Vec<_>>(), vec!["-10", "-5", "0", "10", "5"]);
    assert!(rows.iter().all(|r| r[2] == "0" || r[2] == "1"));

    let m = manifest(d.path().join("ws/manifest-sweep.json"));
    let cfg = m["config"].as_str().unwrap();
    assert!(cfg.contains("sweep.seeds = 2"), "flags override the config file");
    assert!(cfg.contains("channel.mode = awgn_only"));
    assert!(m["inputs"].as_object().unwrap().keys().any(|k| k.ends_with("channel_encoder.nn")));
}

#[test]
fn sweep_replay_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    workspace(d.path(), "");
    ok(d.path(), &["sweep", "--config", "exp.cfg", "--snr", "0,inf", "--seeds", "2", "--out", "ws"]);
    let before = read(d.path().join("ws/sweep.csv"));
    // editing the config file must not affect a replay of the recorded run
    std::fs::write(d.path().join("exp.cfg"), "run.seed = 99\n").unwrap();
    let out = ok(d.path(), &["replay", "--manifest", "ws/manifest-sweep.json"]);
    assert!(out.contains("replay verified"), "{out}");
    assert_eq!(read(d.path().join("ws/sweep.csv")), before);

    std::fs::write(d.path().join("ws/sweep.csv"), "tampered").unwrap();
    let m = manifest(d.path().join("ws/manifest-sweep.json"));
    let mut m2 = m.clone();
    let key = m2["outputs"].as_object().unwrap().keys().next().unwrap().clone();
    m2["outputs"][&key] = serde_json::json!("00");
    std::fs::write(d.path().join("bad.json"), serde_json::to_string(&m2).unwrap()).unwrap();
    let (code, err) = fails(d.path(), &["replay", "--manifest", "bad.json"]);
    assert_eq!(code, 4);
    assert!(err.contains("differ"), "{err}");
}

#[test]
fn malformed_ranges_name_the_token() {
    let d = tempfile::tempdir().unwrap();
    workspace(d.path(), "");
    let (code, err) = fails(d.path(), &["sweep", "--config", "exp.cfg", "--snr", "-10:x:5", "--out", "ws"]);
    assert_eq!(code, 2);
    assert!(err.contains("-10:x:5"), "{err}");
    let (code, _) = fails(d.path(), &["sweep", "--config", "exp.cfg", "--ratio", "0", "--out", "ws"]);
    assert_eq!(code, 2);
}

#[test]
fn plot_renders_one_polyline_per_group() {
    let d = tempfile::tempdir().unwrap();
    let csv = "snr_db,ratio,seed,user,sorting,normalization,mse,psnr_db,ssim\n\
               -10,1,0,1,sensitivity,on,0.02,17.0,0.3\n\
               0,1,0,1,sensitivity,on,0.01,20.0,0.4\n\
               inf,1,0,1,sensitivity,on,0,inf,1\n\
               -10,1,0,2,sensitivity,on,0.03,15.2,0.2\n\
               0,1,0,2,sensitivity,on,0.02,17.0,0.3\n";
    std::fs::write(d.path().join("s.csv"), csv).unwrap();
    ok(d.path(), &["plot", "--in", "s.csv", "--x", "snr_db", "--y", "psnr_db", "--group", "user", "--out", "p.svg"]);
    let svg = String::from_utf8(read(d.path().join("p.svg"))).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">snr_db<") && svg.contains(">psnr_db<"));
    assert!(svg.contains("user=1") && svg.contains("user=2"));
    assert_eq!(svg.matches(r#"class="inf""#).count(), 1);
    assert!(!svg.contains("inf,") && !svg.contains("NaN"));

    std::fs::write(d.path().join("empty.csv"), "").unwrap();
    let (code, _) = fails(d.path(), &["plot", "--in", "empty.csv", "--x", "snr_db", "--y", "ssim", "--out", "e.svg"]);
    assert_eq!(code, 4);
    assert!(!d.path().join("e.svg").exists());
    let (code, _) = fails(d.path(), &["plot", "--in", "s.csv", "--x", "seed", "--y", "ssim", "--out", "e.svg"]);
    assert_eq!(code, 2);
}

#[test]
fn sample_channel_footer() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["sample-channel", "--n", "100000", "--seed", "8", "--out", "g.csv"]);
    let text = String::from_utf8(read(d.path().join("g.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,gain"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 100_001);
    let footer = text.lines().last().unwrap();
    let field = |name: &str| -> f64 {
        footer
            .split_whitespace()
            .find_map(|t| t.strip_prefix(&format!("{name}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((1.586..=1.626).contains(&field("mean")), "{footer}");
    assert!(field("ks") < field("ks_critical_0.01"), "{footer}");

    let (code, _) = fails(d.path(), &["sample-channel", "--n", "0", "--out", "z.csv"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d.path(), &["sample-channel", "--n", "5", "--params", "0.1,2", "--out", "z.csv"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d.path(), &["sample-channel", "--n", "5", "--params", "-1,2,1", "--out", "z.csv"]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes_by_failure_class() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fails(d.path(), &["train", "--stage", "semantic", "--out", "ws", "--set", "no.such=1"]).0, 3);
    std::fs::write(d.path().join("bad.cfg"), "fusion.tau = -1\n").unwrap();
    assert_eq!(fails(d.path(), &["calibrate", "--config", "bad.cfg", "--out", "r.txt"]).0, 3);
    assert_eq!(fails(d.path(), &["train", "--stage", "semantic", "--out", "ws"]).0, 4);
    assert_eq!(fails(d.path(), &["frobnicate"]).0, 2);

    std::fs::write(d.path().join("exp.cfg"), SMALL).unwrap();
    ok(d.path(), &["gen-data", "--out", "ws/data", "--count", "2", "--size", "8"]);
    let (code, err) = fails(
        d.path(),
        &["train", "--stage", "semantic", "--config", "exp.cfg", "--out", "ws", "--set", "semantic.learning_rate=1e300"],
    );
    assert_eq!(code, 5, "{err}");
}
