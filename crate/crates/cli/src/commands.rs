use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use svdd_core::checkpoint::Checkpoint;
use svdd_core::dataset::{
    generate_benchmark, generate_case_study, generate_center_illustration, load_dataset, save_dataset,
    BenchmarkSpec, CaseStudySpec,
};
use svdd_core::experiments::{
    case_study_csv, case_study_points_csv, case_study_table, center_csv, center_points_csv, center_table,
    run_case_study, run_center_illustration, run_pollution_sweep, split_pools, CaseStudyConfig, SweepConfig,
    SweepMethod,
};
use svdd_core::fsutil::write_atomic;
use svdd_core::metrics::{evaluate, roc_csv, roc_points, ScoreReport};
use svdd_core::optimizer::{fixed_center_from_pretrain, infer, pretrain_autoencoder, train, train_from, Objective};
use svdd_core::{EmbeddingDataset, EmbeddingFormat};

use crate::args::{
    CaseStudyArgs, CenterDemoArgs, Cli, Command, EvalArgs, FormatArgs, FormatKind, GenArgs, ModelArgs, PretrainArgs,
    Recipe, ScoreArgs, SweepArgs, TrainArgs,
};
use crate::config::{self, apply_config_text};
use crate::usage;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Casestudy(a) => casestudy(a),
        Command::CenterDemo(a) => center_demo(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn check_format(f: &FormatArgs, labels: Option<&Path>) -> Result<()> {
    if f.labels_inline && f.format != FormatKind::Csv {
        return Err(usage("--labels-inline requires --format csv"));
    }
    if f.labels_inline && labels.is_some() {
        return Err(usage("--labels and --labels-inline are mutually exclusive"));
    }
    Ok(())
}

fn resolve_config(m: &ModelArgs) -> Result<svdd_core::optimizer::TrainConfig> {
    config::resolve_from_path(m.preset.as_deref(), m.config.as_deref(), &m.overrides())
        .map_err(|e| usage(format!("{e:#}")))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Creates the parent directory of an output file named on the command line.
fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => ensure_dir(dir),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load(path: &Path, fmt: &FormatArgs, labels: Option<&Path>) -> Result<EmbeddingDataset> {
    Ok(load_dataset(path, fmt.format(), labels)?)
}

fn gen(a: GenArgs) -> Result<()> {
    check_format(&a.format, None)?;
    ensure_dir(&a.out)?;
    let fmt = a.format.format();
    let ext = a.format.extension();
    let mut written = Vec::new();
    let mut put = |ds: &EmbeddingDataset, stem: &str| -> Result<()> {
        let path = a.out.join(format!("{stem}.{ext}"));
        let lbl = a.out.join(format!("{stem}.lbl"));
        written.push(path.clone());
        if save_dataset(ds, &path, fmt, &lbl)? {
            written.push(lbl);
        }
        Ok(())
    };
    match a.recipe {
        Recipe::CaseStudy => {
            let data = generate_case_study(&CaseStudySpec::new(a.seed))?;
            put(&data.train, "train")?;
            put(&data.eval_anomalies, "eval_anomalies")?;
            put(&data.normals().concat(&data.eval_anomalies)?, "test")?;
        }
        Recipe::Center => put(&generate_center_illustration(a.seed)?, "center")?,
        Recipe::Benchmark => {
            let b = generate_benchmark(&BenchmarkSpec::new(a.seed))?;
            put(&b.train_normals, "train_normals")?;
            put(&b.anomaly_pool, "anomaly_pool")?;
            put(&b.test, "test")?;
        }
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    check_format(&a.format, None)?;
    let cfg = resolve_config(&a.model)?;
    let ds = load(&a.train, &a.format, None)?;
    let pre = pretrain_autoencoder(&ds, &cfg)?;
    let center = fixed_center_from_pretrain(&pre.autoencoder, &ds)?;
    ensure_parent(&a.checkpoint)?;
    Checkpoint::new(pre.autoencoder.encoder, center)?.save(&a.checkpoint)?;
    let mut table = String::from("epoch  reconstruction_loss\n");
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in pre.epoch_losses.iter().enumerate() {
        let _ = writeln!(table, "{e:>5}  {l:.6e}");
        let _ = writeln!(csv, "{e},{l}");
    }
    print!("{table}");
    if let Some(p) = &a.losses {
        write_text(p, &csv)?;
    }
    println!("checkpoint: {}", a.checkpoint.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    check_format(&a.format, a.labels.as_deref())?;
    let cfg = resolve_config(&a.model)?;
    if cfg.objective.uses_labels() && a.labels.is_none() && !a.format.labels_inline {
        return Err(usage(format!(
            "objective {} needs training labels: pass --labels <FILE> (or --format csv --labels-inline)",
            cfg.objective
        )));
    }
    let init = a.init.as_deref().map(Checkpoint::load).transpose()?;
    let ds = load(&a.train, &a.format, a.labels.as_deref())?;
    log::info!("training {} on {} rows (D={}, {} labelled anomalies)", cfg.objective, ds.len(), ds.dim(), ds.n_anomaly());
    let trace = match init {
        None => train(&ds, &cfg)?,
        Some(ck) => {
            let expected = cfg.shape(ds.dim());
            if ck.network.shape() != expected {
                return Err(usage(format!(
                    "--init network has shape {:?} but the configuration gives {:?}",
                    ck.network.shape(),
                    expected
                )));
            }
            if ck.network.biases().is_some() != cfg.use_bias {
                return Err(usage("--init network and --bias disagree on bias vectors"));
            }
            let center = (cfg.objective == Objective::OcFixedCenter).then_some(ck.center);
            train_from(&ds, &cfg, ck.network, center, Vec::new())?
        }
    };
    ensure_parent(&a.checkpoint)?;
    Checkpoint::new(trace.network.clone(), trace.center.clone())?.save(&a.checkpoint)?;
    if let Some(p) = &a.trace {
        write_text(p, &trace.to_csv())?;
    }
    println!("objective: {}  steps: {}", trace.objective, trace.len());
    println!("epoch  mean_batch_loss");
    for (e, l) in trace.epoch_losses().iter().enumerate() {
        println!("{e:>5}  {l:.6e}");
    }
    println!("checkpoint: {}", a.checkpoint.display());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    check_format(&a.format, a.labels.as_deref())?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let test = load(&a.test, &a.format, a.labels.as_deref())?;
    let report = infer(&ck.network, &ck.center, &test)?;
    ensure_parent(&a.out)?;
    report.save(&a.out)?;
    println!(
        "scored {} rows ({} labelled anomalies): {}",
        report.len(),
        report.n_anomaly(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let report = ScoreReport::load(&a.scores)?;
    let summary = evaluate(&report, &a.recall_k)?;
    print!("{}", summary.to_table());
    if let Some(p) = &a.out {
        write_text(p, &summary.to_csv())?;
    }
    if let Some(p) = &a.roc {
        write_text(p, &roc_csv(&roc_points(&report)?))?;
    }
    Ok(())
}

fn seed_range(seed: u64, seeds: u64) -> Result<Vec<u64>> {
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let end = seed.checked_add(seeds).ok_or_else(|| usage("--seed plus --seeds overflows"))?;
    Ok((seed..end).collect())
}

fn casestudy(a: CaseStudyArgs) -> Result<()> {
    let reports = seed_range(a.seed, a.seeds)?
        .into_iter()
        .map(|seed| {
            run_case_study(&CaseStudyConfig {
                seed,
                steps: a.steps,
                learning_rate: a.lr,
                lambda: a.lambda,
            })
        })
        .collect::<svdd_core::Result<Vec<_>>>()?;
    ensure_dir(&a.out)?;
    write_text(&a.out.join("casestudy.csv"), &case_study_csv(&reports))?;
    write_text(&a.out.join("casestudy_points.csv"), &case_study_points_csv(&reports))?;
    print!("{}", case_study_table(&reports));
    Ok(())
}

fn center_demo(a: CenterDemoArgs) -> Result<()> {
    let reports = seed_range(a.seed, a.seeds)?
        .into_iter()
        .map(run_center_illustration)
        .collect::<svdd_core::Result<Vec<_>>>()?;
    ensure_dir(&a.out)?;
    write_text(&a.out.join("center_illustration.csv"), &center_csv(&reports))?;
    write_text(&a.out.join("center_illustration_points.csv"), &center_points_csv(&reports))?;
    print!("{}", center_table(&reports));
    Ok(())
}

fn read_config(path: &Option<PathBuf>) -> Result<Option<String>> {
    path.as_ref()
        .map(|p| fs::read_to_string(p).with_context(|| format!("reading config {}", p.display())))
        .transpose()
}

fn sweep(a: SweepArgs) -> Result<()> {
    check_format(&a.format, None)?;
    let mut cfg = SweepConfig::benchmark(a.seed);
    cfg.runs = a.runs;
    cfg.threads = a.threads;
    cfg.proportions = a.proportions.clone();
    cfg.recall_k = a.recall_k.clone();
    cfg.methods = a
        .methods
        .iter()
        .map(|m| m.trim().parse::<SweepMethod>())
        .collect::<svdd_core::Result<_>>()?;
    if let Some(text) = read_config(&a.oc_config)? {
        apply_config_text(&mut cfg.oc_config, &text).map_err(|e| usage(format!("--oc-config: {e:#}")))?;
    }
    if let Some(text) = read_config(&a.ai_config)? {
        apply_config_text(&mut cfg.ai_config, &text).map_err(|e| usage(format!("--ai-config: {e:#}")))?;
    }
    cfg.validate()?;

    let data = match (&a.normals, &a.anomalies) {
        (Some(n), Some(an)) => {
            let fmt: EmbeddingFormat = a.format.format();
            let normals = load_dataset(n, fmt, None)?;
            let anomalies = load_dataset(an, fmt, None)?;
            split_pools(&normals, &anomalies, a.test_fraction, a.test_pollution, a.seed)?
        }
        _ => generate_benchmark(&BenchmarkSpec::new(a.seed))?,
    };
    let report = run_pollution_sweep(&data, &cfg)?;
    ensure_dir(&a.out)?;
    write_text(&a.out.join("sweep.csv"), &report.to_csv())?;
    write_text(&a.out.join("sweep_runs.csv"), &report.runs_csv())?;
    print!("{}", report.to_table());
    let failed = report.failures().count();
    if failed > 0 {
        anyhow::bail!("{failed} of {} runs failed; see sweep_runs.csv", report.outcomes.len());
    }
    Ok(())
}
