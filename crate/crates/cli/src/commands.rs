use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use xnn::dataset::{read_table_csv, sidecar_path, write_sidecar, DatasetMetadata};
use xnn::explain::{self, ExplanationMetadata};
use xnn::surrogate::BASE_PREDICTION_COLUMN;
use xnn::{Dataset, Result, XnnError};

use crate::args::{
    Cli, Command, DistillArgs, ExplainArgs, PredictArgs, RerunArgs, SeedArgs, SimulateArgs,
    TrainArgs,
};
use crate::manifest::{default_manifest_path, sha256_file, FileRecord, RunManifest, Seeds};

pub const SEED_ENV: &str = "XNN_SEED";

/// Runs one command. `forced_seeds` replaces flag and environment seeds when
/// repeating a recorded run.
pub fn run(cli: Cli, argv: Vec<String>, forced_seeds: Option<&Seeds>) -> Result<()> {
    let started = Instant::now();
    let ctx = Context {
        argv,
        forced_seeds: forced_seeds.cloned(),
        started,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Explain(a) => explain_cmd(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Distill(a) => distill(&ctx, a),
        Command::Rerun(a) => rerun(a),
    }
}

struct Context {
    argv: Vec<String>,
    forced_seeds: Option<Seeds>,
    started: Instant,
}

impl Context {
    fn seed(&self, flag: &SeedArgs) -> Result<(u64, bool)> {
        if let Some(s) = &self.forced_seeds {
            return Ok((s.seed, s.from_env));
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(|s| (s, true))
                .map_err(|_| XnnError::Argument(format!("{SEED_ENV}=`{v}` is not a seed"))),
            Err(_) => Ok((flag.seed, false)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn write_manifest(
        &self,
        command: &str,
        path: &Path,
        seeds: Seeds,
        config: serde_json::Value,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Result<()> {
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            argv: self.argv.clone(),
            seeds,
            config,
            inputs: inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        manifest.save(path)
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn simulate(ctx: &Context, a: SimulateArgs) -> Result<()> {
    let (seed, from_env) = ctx.seed(&a.seed)?;
    let data = xnn::simulate::generate_named(&a.generator, a.n, seed)?;
    data.save_csv(&a.out)?;
    let meta = DatasetMetadata {
        generator_tag: data.generator_tag.clone(),
        seed,
        n: a.n,
        feature_names: data.feature_names.clone(),
        response_name: xnn::dataset::DEFAULT_RESPONSE_NAME.to_owned(),
    };
    write_sidecar(&a.out, &meta)?;
    let sidecar = sidecar_path(&a.out);
    let manifest = a.manifest.unwrap_or_else(|| default_manifest_path(&a.out));
    ctx.write_manifest(
        "simulate",
        &manifest,
        Seeds { seed, shuffle_seed: None, from_env },
        json!({ "generator": a.generator, "n": a.n }),
        &[],
        &[&a.out, &sidecar],
    )
}

fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let (seed, from_env) = ctx.seed(&a.fit.seed)?;
    let data = Dataset::load_csv(&a.data, a.response.as_deref())?;
    let (xcfg, tcfg) = a.fit.configs(data.n_features(), seed);
    tcfg.validate()?;
    xcfg.validate()?;
    let (model, report) = xnn::fit(&data, &xcfg, &tcfg)?;
    xnn::save_model(&model, &a.model_out)?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.model_out, ".report.json"));
    write_json(&report_path, &report)?;
    eprintln!(
        "trained {} epochs (best {}), holdout mse {:.6}, {} active subnetworks",
        report.epochs_run, report.best_epoch, report.final_holdout_mse, report.active_subnet_count
    );
    let manifest = a.manifest.unwrap_or_else(|| default_manifest_path(&a.model_out));
    ctx.write_manifest(
        "train",
        &manifest,
        Seeds { seed, shuffle_seed: Some(tcfg.shuffle_seed), from_env },
        json!({ "model": xcfg, "training": tcfg, "response": a.response }),
        &[&a.data],
        &[&a.model_out, &report_path],
    )
}

fn explain_cmd(ctx: &Context, a: ExplainArgs) -> Result<()> {
    let model = xnn::load_model(&a.model)?;
    let data = Dataset::load_csv(&a.data, a.response.as_deref())?;
    if data.n_features() != model.input_dim() {
        return Err(XnnError::Dimension {
            what: "dataset features versus model input_dim".into(),
            expected: model.input_dim(),
            actual: data.n_features(),
        });
    }
    let params = model
        .standardization
        .as_ref()
        .ok_or_else(|| XnnError::Config("model has no standardization parameters".into()))?;
    let x = params.standardize_features(data.features.view());

    let mut ridge = explain::ridge_profiles(&model, x.view())?;
    let active = explain::active_subnets(&model, x.view(), a.active_threshold);
    for p in &mut ridge {
        p.active = active.contains(&p.subnet_index);
    }
    let conditional = (0..model.input_dim())
        .map(|j| explain::conditional_effects(&model, j))
        .collect::<Result<Vec<_>>>()?;
    let mut sparsity = explain::sparsity_report(&model, x.view(), explain::DEFAULT_ZERO_TOL)?;
    sparsity.active_subnets = active.clone();
    sparsity.threshold_used = a.active_threshold;

    let mut signatures = Vec::new();
    for (i, &s1) in active.iter().enumerate() {
        for &s2 in &active[i + 1..] {
            for f1 in 0..model.input_dim() {
                for f2 in f1 + 1..model.input_dim() {
                    signatures.push(explain::interaction_signature(&model, (s1, s2), (f1, f2))?);
                }
            }
        }
    }

    fs::create_dir_all(&a.out_dir)?;
    let profiles_path = a.out_dir.join("profiles.csv");
    let mut out = BufWriter::new(File::create(&profiles_path)?);
    explain::write_profiles_csv(&explain::profile_records(&ridge, &conditional), &mut out)?;
    out.flush()?;
    let meta_path = a.out_dir.join("explanation.json");
    write_json(&meta_path, &ExplanationMetadata::from_model(&model, &data.feature_names))?;
    let sparsity_path = a.out_dir.join("sparsity.json");
    write_json(&sparsity_path, &sparsity)?;
    let interactions_path = a.out_dir.join("interactions.json");
    write_json(&interactions_path, &signatures)?;

    let manifest = a.manifest.unwrap_or_else(|| a.out_dir.join("manifest.json"));
    ctx.write_manifest(
        "explain",
        &manifest,
        Seeds { seed: model.config.seed, shuffle_seed: None, from_env: false },
        json!({ "active_threshold": a.active_threshold, "response": a.response }),
        &[&a.model, &a.data],
        &[&profiles_path, &meta_path, &sparsity_path, &interactions_path],
    )
}

fn predict(ctx: &Context, a: PredictArgs) -> Result<()> {
    let model = xnn::load_model(&a.model)?;
    let (header, table) = read_table_csv(File::open(&a.data)?)?;
    let keep: Vec<usize> = (0..header.len()).filter(|&c| header[c] != a.response).collect();
    if keep.len() != model.input_dim() {
        return Err(XnnError::Dimension {
            what: "dataset features versus model input_dim".into(),
            expected: model.input_dim(),
            actual: keep.len(),
        });
    }
    let x = table.select(ndarray::Axis(1), &keep);
    let predictions = model.predict_batch(x.view(), true)?;
    let mut out = BufWriter::new(File::create(&a.out)?);
    writeln!(out, "row,prediction")?;
    for (i, p) in predictions.iter().enumerate() {
        writeln!(out, "{i},{p}")?;
    }
    out.flush()?;
    let manifest = a.manifest.unwrap_or_else(|| default_manifest_path(&a.out));
    ctx.write_manifest(
        "predict",
        &manifest,
        Seeds { seed: model.config.seed, shuffle_seed: None, from_env: false },
        json!({ "response": a.response }),
        &[&a.model, &a.data],
        &[&a.out],
    )
}

fn distill(ctx: &Context, a: DistillArgs) -> Result<()> {
    let (seed, from_env) = ctx.seed(&a.fit.seed)?;
    let probe = Dataset::load_csv(&a.probe, Some(BASE_PREDICTION_COLUMN))?;
    let (xcfg, tcfg) = a.fit.configs(probe.n_features(), seed);
    tcfg.validate()?;
    xcfg.validate()?;
    let base = probe.response.to_vec();
    let (model, fidelity, report) = xnn::distill(&probe.features, &base, &xcfg, &tcfg)?;
    xnn::save_model(&model, &a.model_out)?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.model_out, ".report.json"));
    write_json(&report_path, &json!({ "fidelity": fidelity, "fit": report }))?;
    eprintln!(
        "surrogate mse {:.3e}, r_squared {:.6} on {} probes",
        fidelity.surrogate_mse, fidelity.r_squared, fidelity.n_probe
    );
    let manifest = a.manifest.unwrap_or_else(|| default_manifest_path(&a.model_out));
    ctx.write_manifest(
        "distill",
        &manifest,
        Seeds { seed, shuffle_seed: Some(tcfg.shuffle_seed), from_env },
        json!({ "model": xcfg, "training": tcfg }),
        &[&a.probe],
        &[&a.model_out, &report_path],
    )
}

fn rerun(a: RerunArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    if recorded.command == "rerun" {
        return Err(XnnError::Argument("manifest records a rerun".into()));
    }
    let cli = Cli::try_parse_from(&recorded.argv)
        .map_err(|e| XnnError::Argument(format!("recorded command line: {e}")))?;
    run(cli, recorded.argv.clone(), Some(&recorded.seeds))?;
    let mut mismatched = Vec::new();
    for out in &recorded.outputs {
        if sha256_file(&out.path)? != out.sha256 {
            mismatched.push(out.path.display().to_string());
        }
    }
    if mismatched.is_empty() {
        eprintln!("reproduced {} outputs", recorded.outputs.len());
        Ok(())
    } else {
        Err(XnnError::Io(std::io::Error::other(format!(
            "outputs differ from the manifest: {}",
            mismatched.join(", ")
        ))))
    }
}
