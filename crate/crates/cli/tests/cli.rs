use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: &[&str] = &["gen", "pretrain", "train", "score", "eval", "casestudy", "center-demo", "sweep"];

fn svdd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svdd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SVDD_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = svdd(args, cwd);
    assert!(
        out.status.success(),
        "svdd {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Long flags listed in the options section of `--help`, each with its description.
fn help_flags(sub: &str) -> Vec<(String, String)> {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&[sub, "--help"], dir.path());
    let mut flags = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim_start();
        if !t.starts_with('-') {
            continue;
        }
        let Some(start) = t.find("--") else { continue };
        let name: String = t[start + 2..].chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '-').collect();
        let after = t[start + 2 + name.len()..].trim_start();
        let after = after.strip_prefix('<').map_or(after, |r| r.split_once('>').map_or("", |(_, x)| x)).trim();
        let desc = if after.is_empty() {
            lines.get(i + 1).map_or(String::new(), |l| l.trim().to_string())
        } else {
            after.to_string()
        };
        flags.push((name, desc));
    }
    flags
}

#[test]
fn help_describes_every_flag_and_readme_lists_it() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    for sub in SUBCOMMANDS {
        let flags = help_flags(sub);
        assert!(!flags.is_empty(), "{sub}: no flags parsed");
        for (flag, desc) in flags {
            if flag == "help" {
                continue;
            }
            assert!(!desc.is_empty() && !desc.starts_with('-'), "{sub} --{flag} has no description");
            assert!(readme.contains(&format!("--{flag}")), "README does not document {sub} --{flag}");
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(svdd(&["--help"], d).status.code(), Some(0));
    assert_eq!(svdd(&["--version"], d).status.code(), Some(0));
    assert_eq!(svdd(&["train", "--bogus"], d).status.code(), Some(1));
    assert_eq!(svdd(&[], d).status.code(), Some(1));

    let out = svdd(&["train", "--objective", "ai_svdd", "--train", "x.emb", "--checkpoint", "m.ckpt"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--labels"), "{}", stderr(&out));
    assert_eq!(stderr(&out).trim().lines().count(), 1);

    // checked before the missing training file is touched
    fs::write(d.join("bad.cfg"), "learning_rate = 0.1\n").unwrap();
    let out = svdd(&["train", "--train", "x.emb", "--checkpoint", "m.ckpt", "--config", "bad.cfg"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("learning_rate"));

    let out = svdd(&["train", "--objective", "oc_joint", "--train", "missing.emb", "--checkpoint", "m.ckpt"], d);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = svdd(&["train", "--train", "x.emb", "--checkpoint", "m.ckpt", "--labels-inline"], d);
    assert_eq!(out.status.code(), Some(1));

    fs::write(d.join("garbage.emb"), b"NOPE").unwrap();
    let out = svdd(&["score", "--checkpoint", "m.ckpt", "--test", "garbage.emb", "--out", "s.csv"], d);
    assert_eq!(out.status.code(), Some(2), "missing checkpoint is an I/O failure");
    assert!(!d.join("m.ckpt").exists());
}

#[test]
fn gen_then_casestudy_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "case-study", "--seed", "7", "--out", "data"], d);
    for f in ["train.emb", "train.lbl", "test.emb", "test.lbl", "eval_anomalies.emb"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    let table = ok(&["casestudy", "--seed", "7", "--out", "reports"], d);
    assert!(table.contains("vol_reg") && table.contains("ratio_ai"));
    let csv = fs::read_to_string(d.join("reports/casestudy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("seed,steps,learning_rate,lambda,"));
    let points = fs::read_to_string(d.join("reports/casestudy_points.csv")).unwrap();
    assert!(points.starts_with("seed,method,kind,id,z0,z1\n"));
}

#[test]
fn center_demo_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["center-demo", "--seed", "0", "--seeds", "4", "--out", "out"], d);
    let csv = fs::read_to_string(d.join("out/center_illustration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let points = fs::read_to_string(d.join("out/center_illustration_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 4 * 19);
}

fn auc_from_table(table: &str) -> f64 {
    table
        .lines()
        .find_map(|l| l.strip_prefix("auc"))
        .map(|v| v.trim().parse().unwrap())
        .expect("auc row")
}

#[test]
fn benchmark_pipeline_separates_anomalies() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "benchmark", "--seed", "3", "--out", "data"], d);
    ok(
        &[
            "train", "--objective", "oc_fixed_center", "--train", "data/train_normals.emb", "--checkpoint",
            "m/oc.ckpt", "--hidden-size", "64", "--latent-size", "16", "--lr", "0.01", "--epochs", "10",
            "--pretrain-epochs", "10", "--pretrain-lr", "0.01", "--seed", "1",
        ],
        d,
    );
    ok(
        &["score", "--checkpoint", "m/oc.ckpt", "--test", "data/test.emb", "--labels", "data/test.lbl", "--out", "s.csv"],
        d,
    );
    let table = ok(&["eval", "--scores", "s.csv", "--recall-k", "5", "--recall-k", "10", "--out", "m.csv"], d);
    let auc = auc_from_table(&table);
    assert!(auc > 0.9, "auc {auc}");
    let metrics = fs::read_to_string(d.join("m.csv")).unwrap();
    assert!(metrics.starts_with("map,recall_at_5,recall_at_10,auc\n"));
}

#[test]
fn case_study_pipeline_runs_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "case-study", "--seed", "7", "--out", "data", "--format", "csv", "--labels-inline"], d);
    ok(
        &[
            "train", "--objective", "ai_svdd", "--train", "data/train.csv", "--format", "csv", "--labels-inline",
            "--checkpoint", "ai.ckpt", "--hidden-layers", "0", "--latent-size", "2", "--lr", "0.05", "--epochs",
            "500", "--batch-size", "105",
        ],
        d,
    );
    ok(
        &["score", "--checkpoint", "ai.ckpt", "--test", "data/test.csv", "--format", "csv", "--labels-inline", "--out", "s.csv"],
        d,
    );
    let table = ok(&["eval", "--scores", "s.csv", "--roc", "roc.csv"], d);
    let auc = auc_from_table(&table);
    assert!((0.0..=1.0).contains(&auc));
    let roc = fs::read_to_string(d.join("roc.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n0,0\n"));
    assert!(roc.trim_end().ends_with("1,1"));
}

#[test]
fn flag_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "case-study", "--seed", "2", "--out", "data"], d);
    fs::write(d.join("run.cfg"), "# flat config\nlr = 0.01\nhidden_size = 8\nlatent_size = 2\nobjective = oc_joint\n").unwrap();
    let run = |extra: &[&str], trace: &str| {
        let mut args = vec!["train", "--train", "data/train.emb", "--checkpoint", "m.ckpt", "--trace", trace];
        args.extend_from_slice(extra);
        ok(&args, d);
        fs::read(d.join(trace)).unwrap()
    };
    let file_and_flag = run(&["--config", "run.cfg", "--lr", "0.1"], "a.csv");
    let flags_only = run(
        &["--objective", "oc_joint", "--hidden-size", "8", "--latent-size", "2", "--lr", "0.1"],
        "b.csv",
    );
    let file_only = run(&["--config", "run.cfg"], "c.csv");
    assert_eq!(file_and_flag, flags_only);
    assert_ne!(file_and_flag, file_only);
}

#[test]
fn pretrain_then_fixed_center_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "case-study", "--seed", "4", "--out", "data"], d);
    let shape = ["--hidden-size", "8", "--latent-size", "2"];
    let mut args = vec!["pretrain", "--train", "data/train.emb", "--checkpoint", "pre.ckpt", "--losses", "pre.csv"];
    args.extend_from_slice(&shape);
    ok(&args, d);
    assert_eq!(fs::read_to_string(d.join("pre.csv")).unwrap().lines().count(), 1 + 10);

    let mut args = vec![
        "train", "--objective", "oc_fixed_center", "--train", "data/train.emb", "--init", "pre.ckpt", "--checkpoint",
        "oc.ckpt",
    ];
    args.extend_from_slice(&shape);
    ok(&args, d);

    // the initial network must match the configured shape
    let out = svdd(
        &["train", "--objective", "oc_fixed_center", "--train", "data/train.emb", "--init", "pre.ckpt", "--checkpoint", "x.ckpt"],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--init"));
}

#[test]
fn writes_stay_in_named_directories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--recipe", "center", "--seed", "1", "--out", "a"], d);
    ok(&["center-demo", "--seed", "1", "--out", "b"], d);
    ok(&["sweep", "--runs", "1", "--proportions", "0", "--methods", "rank_baseline", "--out", "c"], d);
    let top: BTreeSet<String> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(top, ["a", "b", "c"].iter().map(|s| s.to_string()).collect());
    let sweep = fs::read_to_string(d.join("c/sweep.csv")).unwrap();
    assert!(sweep.starts_with("# schema: svdd-sweep v1\nmethod,p,metric,mean,std,runs\n"));
}
