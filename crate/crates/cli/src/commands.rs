use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mdlood_core::coder::{CodelengthReport, CoderConfig};
use mdlood_core::eval::{run_trials, EvalSummary, MatrixSource, ShiftRegistry, TrialConfig};
use mdlood_core::io::{read_matrix, save_detector, load_detector, write_atomic, write_matrix};
use mdlood_core::select::GraphCoderRegistry;
use mdlood_core::{detect_known_model, log_grid, sample_gaussian, DataBatch, Decision, SelectionConfig};
use serde_json::json;

use crate::error::{code, CliError, CliResult, FileContext};
use crate::model_arg::parse_model;
use crate::{DetectArgs, EvalArgs, SelectionArgs, SynthArgs, TrainArgs};

fn parse_grid(raw: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::parse(format!("--lambda-grid expects lo,hi,count, got '{raw}'"));
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let [lo, hi, count] = parts[..] else {
        return Err(bad());
    };
    let (lo, hi, count) = (
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
        count.parse().map_err(|_| bad())?,
    );
    log_grid(lo, hi, count).map_err(|e| CliError::parse(format!("--lambda-grid: {e}")))
}

fn coder_config(args: &SelectionArgs) -> CliResult<(Vec<f64>, CoderConfig)> {
    let grid = parse_grid(&args.lambda_grid)?;
    let coder = GraphCoderRegistry::with_builtins().get(&args.graph_coder)?;
    let cfg = CoderConfig {
        selection: SelectionConfig::default().with_graph_coder(coder),
        ..CoderConfig::default()
    };
    Ok((grid, cfg))
}

fn read(role: &str, path: &Path) -> CliResult<DataBatch> {
    read_matrix(path).in_file(role, path)
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let (grid, cfg) = coder_config(&args.selection)?;
    let latents = read("latents", &args.latents)?;
    let residuals = read("residuals", &args.residuals)?;
    let det = mdlood_core::train(&latents, &residuals, &grid, &cfg)?;
    save_detector(&args.out, &det).in_file("detector", &args.out)?;
    let r = det.residual();
    println!("lambda_star {}", det.lambda_star());
    println!("edges {}", det.latent_graph().edge_count());
    println!("residual_mean {}", r.mean);
    println!("residual_var {}", r.var);
    Ok(())
}

fn report_json(report: &CodelengthReport, decision: &Decision) -> serde_json::Value {
    json!({
        "l1_bits": report.l1_bits,
        "l2_bits": report.l2_bits,
        "score": report.score,
        "ood_score": report.ood_score(),
        "tau": decision.tau,
        "is_ood": decision.is_ood,
        "lambda_star": report.lambda_star,
        "edge_count": report.edge_count,
        "parts": {
            "l1_latent": report.l1_latent,
            "l1_residual": report.l1_residual,
            "l2_latent_graph": report.l2_latent_graph,
            "l2_latent_data": report.l2_latent_data,
            "l2_residual": report.l2_residual,
        },
    })
}

fn report_text(report: &CodelengthReport, decision: &Decision) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| writeln!(s, "{k:<20} {v}").expect("write to String");
    line("L1 bits", report.l1_bits.to_string());
    line("  latent", report.l1_latent.to_string());
    line("  residual", report.l1_residual.to_string());
    line("L2 bits", report.l2_bits.to_string());
    line("  latent graph", report.l2_latent_graph.to_string());
    line("  latent data", report.l2_latent_data.to_string());
    line("  residual", report.l2_residual.to_string());
    line("lambda_star", report.lambda_star.to_string());
    line("edges", report.edge_count.to_string());
    line("score (L2 - L1)", report.score.to_string());
    line("ood_score", report.ood_score().to_string());
    line("tau", decision.tau.to_string());
    line(
        "decision",
        if decision.is_ood { "out-of-distribution" } else { "in-distribution" }.to_string(),
    );
    s
}

pub fn detect(args: &DetectArgs) -> CliResult<()> {
    let (grid, cfg) = coder_config(&args.selection)?;
    let det = load_detector(&args.detector).in_file("detector", &args.detector)?;
    let latents = read("latents", &args.latents)?;
    let (decision, report) = match &args.residuals {
        Some(path) => {
            let residuals = read("residuals", path)?;
            mdlood_core::detect(&latents, &residuals, &det, args.tau, &grid, &cfg)?
        }
        None => detect_known_model(&latents, det.latent_model(), args.tau, &grid, &cfg)?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report_json(&report, &decision)).expect("JSON value"));
    } else {
        print!("{}", report_text(&report, &decision));
    }
    Ok(())
}

fn sibling(report: &Path, suffix: &str) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.{suffix}"))
}

fn source(role: &str, latents: &Path, residuals: Option<&PathBuf>) -> CliResult<MatrixSource> {
    let l = read(&format!("{role} latents"), latents)?;
    let r = residuals.map(|p| read(&format!("{role} residuals"), p)).transpose()?;
    MatrixSource::new(l, r).map_err(|e| CliError::from(e).context(format_args!("{role} class")))
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let (grid, cfg) = coder_config(&args.selection)?;
    let trial_cfg = TrialConfig::new(args.batch_size, args.trials, args.seed)?;
    let det = load_detector(&args.detector).in_file("detector", &args.detector)?;
    let in_src = source("in", &args.in_latents, args.in_residuals.as_ref())?;
    let out_src = source("out", &args.out_latents, args.out_residuals.as_ref())?;
    let needed = args.batch_size.saturating_mul(args.trials);
    for (role, src) in [("in", &in_src), ("out", &out_src)] {
        if src.rows() < needed {
            return Err(CliError::new(
                code::INSUFFICIENT_ROWS,
                format!(
                    "{role} class has {} rows; {} trials of batch size {} need {needed}",
                    src.rows(),
                    args.trials,
                    args.batch_size
                ),
            ));
        }
    }
    let scores = run_trials(&det, &in_src, &out_src, &trial_cfg, &grid, &cfg)?;
    let roc = scores.roc();

    let mut csv = String::from("class,trial,score\n");
    for (class, list) in [("in", &scores.scores_in), ("out", &scores.scores_out)] {
        for (t, s) in list.iter().enumerate() {
            writeln!(csv, "{class},{t},{s}").expect("write to String");
        }
    }
    let mut roc_csv = String::from("fpr,tpr\n");
    for (fpr, tpr) in &roc.points {
        writeln!(roc_csv, "{fpr},{tpr}").expect("write to String");
    }
    let summary = EvalSummary {
        auroc: roc.auroc,
        batch_size: args.batch_size,
        trials: args.trials,
        shift_spec: args.shift_spec.clone(),
        seed: args.seed,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');

    let scores_path = sibling(&args.report, "scores.csv");
    let roc_path = sibling(&args.report, "roc.csv");
    write_atomic(&scores_path, csv.as_bytes()).in_file("scores", &scores_path)?;
    write_atomic(&roc_path, roc_csv.as_bytes()).in_file("roc", &roc_path)?;
    write_atomic(&args.report, json.as_bytes()).in_file("report", &args.report)?;
    println!("auroc {}", roc.auroc);
    Ok(())
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    if args.rows == 0 {
        return Err(CliError::parse("--rows must be at least 1"));
    }
    let mut model = parse_model(&args.model)?;
    if let Some(spec) = &args.shift {
        let shift = ShiftRegistry::with_builtins()
            .parse(spec)
            .map_err(|e| CliError::parse(format!("shift '{spec}': {e}")))?;
        model = shift
            .apply(&model, args.shift_seed)
            .map_err(|e| CliError::parse(format!("shift '{spec}': {e}")))?;
    }
    let batch = sample_gaussian(&model, args.rows, args.seed)?;
    write_matrix(&args.out, &batch).in_file("output", &args.out)?;
    Ok(())
}
