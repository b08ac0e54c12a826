use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use transl2e::io::{load_dataset, write_dataset, write_results, write_summary, ColumnRef, CsvSchema};
use transl2e::l2e::{default_lambda_grid, fit_cv, fit_structured_l2e, CvResult, FitResult, Groups, Penalty, PenaltySpec};
use transl2e::simulate::{
    run_experiment, simulate, summarize, AblationVariant, ExperimentConfig, ExperimentKind, Method, SimConfig,
};
use transl2e::{trans_l2e, Dataset, SolverOptions, TransferConfig};

use crate::error::CliError;
use crate::manifest::{self, InputFile, RunManifest};
use crate::{plot, Cli, Command, CsvArgs, PenaltyArg, PenaltyArgs};

/// Run one command. `args` are the arguments after the program name, as
/// recorded in the manifest; `replay` carries the manifest being replayed.
pub fn dispatch(cmd: Command, args: &[String], replay: Option<&RunManifest>) -> Result<(), CliError> {
    let start = Instant::now();
    let record = match cmd {
        Command::Fit(a) => fit(a, args)?,
        Command::Transfer(a) => transfer(a, args, replay)?,
        Command::Simulate(a) => simulate_cmd(a, replay)?,
        Command::Experiment(a) => experiment(a, replay)?,
        Command::Plot(a) => plot_cmd(a)?,
        Command::Replay(a) => return replay_cmd(a),
    };
    let m = RunManifest {
        command: record.command.into(),
        args: args.to_vec(),
        config_digest: record.config_digest,
        config: record.config,
        master_seed: record.seed,
        library_version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        inputs: record.inputs,
        outputs: record.outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    manifest::write(&record.manifest_path, &m)?;
    for p in &record.outputs {
        println!("{}", p.display());
    }
    Ok(())
}

/// What a command reports for its manifest.
struct Record {
    command: &'static str,
    config_digest: String,
    config: Option<String>,
    seed: Option<u64>,
    inputs: Vec<InputFile>,
    outputs: Vec<PathBuf>,
    manifest_path: PathBuf,
}

fn args_digest(args: &[String]) -> Result<String, CliError> {
    Ok(manifest::digest_label(&serde_json::to_vec(args)?))
}

fn column(spec: &str, has_header: bool) -> Result<ColumnRef, CliError> {
    if let Some(idx) = spec.strip_prefix('#') {
        return idx
            .parse()
            .map(ColumnRef::Index)
            .map_err(|_| CliError::usage(format!("bad column index \"{spec}\"")));
    }
    if has_header {
        Ok(ColumnRef::Name(spec.to_string()))
    } else {
        spec.parse()
            .map(ColumnRef::Index)
            .map_err(|_| CliError::usage(format!("column \"{spec}\" must be an index when --no-header is set")))
    }
}

fn schema(csv: &CsvArgs) -> Result<CsvSchema, CliError> {
    let has_header = !csv.no_header;
    Ok(CsvSchema {
        response_column: column(&csv.response, has_header)?,
        label_column: csv.label_column.as_deref().map(|c| column(c, has_header)).transpose()?,
        has_header,
        standardize: csv.standardize,
        ..CsvSchema::default()
    })
}

fn load(path: &Path, schema: &CsvSchema) -> Result<(Dataset, InputFile), CliError> {
    let input = manifest::input_file(path)?;
    Ok((load_dataset(path, schema)?, input))
}

fn penalty(args: &PenaltyArgs, p: usize) -> Result<Penalty, CliError> {
    match (args.penalty, &args.groups) {
        (PenaltyArg::GroupLasso, Some(spec)) => {
            let text = if Path::new(spec).is_file() {
                fs::read_to_string(spec).map_err(|e| CliError::usage(format!("cannot read {spec}: {e}")))?
            } else {
                spec.clone()
            };
            let labels: Vec<usize> = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| CliError::usage(format!("bad group label \"{s}\""))))
                .collect::<Result<_, _>>()?;
            if labels.len() != p {
                return Err(CliError::usage(format!("{} group labels for {p} features", labels.len())));
            }
            Ok(Penalty::GroupLasso(Groups::from_assignment(&labels)?))
        }
        (PenaltyArg::GroupLasso, None) => Err(CliError::usage("--penalty group-lasso needs --groups")),
        (_, Some(_)) => Err(CliError::usage("--groups only applies to --penalty group-lasso")),
        (PenaltyArg::Lasso, None) => Ok(Penalty::Lasso),
        (PenaltyArg::None, None) => Ok(Penalty::None),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: FitResult,
    cv: Option<CvResult>,
}

fn fit(a: crate::FitArgs, args: &[String]) -> Result<Record, CliError> {
    let (data, input) = load(&a.data, &schema(&a.csv)?)?;
    let pen = penalty(&a.penalty, data.p())?;
    let opts = SolverOptions::default();
    let out = match (a.lambda, a.cv, &pen) {
        (Some(lambda), _, _) => FitOutput { fit: fit_structured_l2e(&data, &PenaltySpec { kind: pen, lambda }, &opts)?, cv: None },
        (None, true, Penalty::None) => return Err(CliError::usage("--cv needs a penalty")),
        (None, true, _) => {
            let (fit, cv) = fit_cv(&data, &pen, &default_lambda_grid(), a.folds, &opts, a.seed)?;
            FitOutput { fit, cv: Some(cv) }
        }
        (None, false, Penalty::None) => FitOutput { fit: fit_structured_l2e(&data, &PenaltySpec::none(), &opts)?, cv: None },
        (None, false, _) => return Err(CliError::usage("pass --lambda X or --cv")),
    };
    write_json(&a.out, &out)?;
    Ok(Record {
        command: "fit",
        config_digest: args_digest(args)?,
        config: None,
        seed: Some(a.seed),
        inputs: vec![input],
        outputs: vec![a.out.clone()],
        manifest_path: manifest::manifest_path(&a.out, false),
    })
}

#[derive(Serialize)]
struct SourceSummary {
    id: u64,
    path: String,
    lambda_k: f64,
    hellinger: f64,
    kept_count: usize,
    kept_proportion: f64,
    kept_labels: Vec<String>,
}

#[derive(Serialize)]
struct TransferOutput {
    beta_final: Vec<f64>,
    beta_colearn: Vec<f64>,
    delta: Vec<f64>,
    tau_colearn: f64,
    lambda: f64,
    mu: f64,
    per_source: Vec<SourceSummary>,
}

/// Configuration text from the replayed manifest when present, else from `path`.
fn config_text(path: &Path, replay: Option<&RunManifest>) -> Result<String, CliError> {
    if let Some(text) = replay.and_then(|m| m.config.clone()) {
        return Ok(text);
    }
    let bytes = manifest::read_input(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))
}

fn parse_config<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn transfer(a: crate::TransferArgs, args: &[String], replay: Option<&RunManifest>) -> Result<Record, CliError> {
    let sch = schema(&a.csv)?;
    let (target, target_input) = load(&a.target, &sch)?;
    let mut inputs = vec![target_input];
    let mut sources = Vec::with_capacity(a.sources.len());
    for path in &a.sources {
        let (d, input) = load(path, &sch)?;
        sources.push(d);
        inputs.push(input);
    }
    let (mut cfg, config) = match &a.config {
        Some(path) => {
            let text = config_text(path, replay)?;
            (parse_config::<TransferConfig>(&text, path)?, Some(text))
        }
        None => (TransferConfig::default(), None),
    };
    cfg.penalty = penalty(&a.penalty, target.p())?;
    cfg.seed = a.seed;
    if matches!(cfg.penalty, Penalty::None) {
        return Err(CliError::usage("transfer needs a penalty"));
    }

    let res = trans_l2e(&target, &sources, &cfg)?;
    let per_source = res
        .per_source
        .iter()
        .zip(&a.sources)
        .map(|(s, path)| SourceSummary {
            id: s.id,
            path: path.display().to_string(),
            lambda_k: s.lambda(),
            hellinger: s.report.hellinger,
            kept_count: s.report.kept_count,
            kept_proportion: s.report.kept_proportion,
            kept_labels: s.report.kept_labels.clone(),
        })
        .collect();
    let out = TransferOutput {
        beta_final: res.beta_final,
        beta_colearn: res.beta_colearn,
        delta: res.delta,
        tau_colearn: res.tau_colearn,
        lambda: res.lambda,
        mu: res.mu,
        per_source,
    };
    write_json(&a.out, &out)?;
    let config_digest = match &config {
        Some(text) => manifest::digest_label(text.as_bytes()),
        None => args_digest(args)?,
    };
    Ok(Record {
        command: "transfer",
        config_digest,
        config,
        seed: Some(a.seed),
        inputs,
        outputs: vec![a.out.clone()],
        manifest_path: manifest::manifest_path(&a.out, false),
    })
}

#[derive(Serialize)]
struct Truth<'a> {
    beta_target: &'a [f64],
    beta_sources: &'a [Vec<f64>],
    config: &'a SimConfig,
}

fn simulate_cmd(a: crate::SimulateArgs, replay: Option<&RunManifest>) -> Result<Record, CliError> {
    let text = config_text(&a.config, replay)?;
    let cfg: SimConfig = parse_config(&text, &a.config)?;
    cfg.validate()?;
    let data = simulate(&cfg, cfg.seed)?;
    create_dir(&a.out)?;
    let mut outputs = vec![a.out.join("target.csv")];
    write_dataset(&outputs[0], &data.target)?;
    for (k, s) in data.sources.iter().enumerate() {
        let path = a.out.join(format!("source_{}.csv", k + 1));
        write_dataset(&path, s)?;
        outputs.push(path);
    }
    let truth_path = a.out.join("truth.json");
    write_json(
        &truth_path,
        &Truth { beta_target: &data.beta_target, beta_sources: &data.beta_sources, config: &cfg },
    )?;
    outputs.push(truth_path);
    Ok(Record {
        command: "simulate",
        config_digest: manifest::digest_label(text.as_bytes()),
        config: Some(text),
        seed: Some(cfg.seed),
        inputs: Vec::new(),
        outputs,
        manifest_path: manifest::manifest_path(&a.out, true),
    })
}

/// Experiment configuration file: the experiment settings, a master seed and
/// generator overrides applied on top of the experiment's preset.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    experiment: ExperimentKind,
    #[serde(default)]
    grid: Option<Vec<f64>>,
    #[serde(default)]
    replicates: Option<usize>,
    #[serde(default)]
    methods: Option<Vec<Method>>,
    #[serde(default)]
    ablation_variants: Option<Vec<AblationVariant>>,
    #[serde(default)]
    record_runtime: bool,
    #[serde(default)]
    transfer: Option<TransferConfig>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    simulation: Option<serde_json::Map<String, serde_json::Value>>,
}

fn base_config(kind: ExperimentKind, overrides: Option<serde_json::Map<String, serde_json::Value>>) -> Result<SimConfig, CliError> {
    let mut merged = match serde_json::to_value(kind.preset())? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("SimConfig serializes to an object"),
    };
    merged.extend(overrides.unwrap_or_default());
    serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| CliError::usage(format!("simulation settings: {e}")))
}

fn experiment(a: crate::ExperimentArgs, replay: Option<&RunManifest>) -> Result<Record, CliError> {
    let text = config_text(&a.config, replay)?;
    let file: ExperimentFile = parse_config(&text, &a.config)?;
    let base = base_config(file.experiment, file.simulation)?;
    let mut ecfg = ExperimentConfig::new(file.experiment);
    ecfg.grid = file.grid;
    ecfg.replicates = file.replicates.unwrap_or(ecfg.replicates);
    ecfg.methods = file.methods;
    ecfg.ablation_variants = file.ablation_variants;
    ecfg.record_runtime = file.record_runtime;
    ecfg.transfer = file.transfer.unwrap_or_default();

    let rows = run_experiment(&ecfg, &base, file.seed)?;
    create_dir(&a.out)?;
    let results = a.out.join("results.csv");
    let summary = a.out.join("summary.csv");
    let io_err = |p: &Path, e: std::io::Error| CliError::runtime(format!("cannot write {}: {e}", p.display()));
    write_results(fs::File::create(&results).map_err(|e| io_err(&results, e))?, &rows)?;
    write_summary(fs::File::create(&summary).map_err(|e| io_err(&summary, e))?, &summarize(&rows))?;
    Ok(Record {
        command: "experiment",
        config_digest: manifest::digest_label(text.as_bytes()),
        config: Some(text),
        seed: Some(file.seed),
        inputs: Vec::new(),
        outputs: vec![results, summary],
        manifest_path: manifest::manifest_path(&a.out, true),
    })
}

fn plot_cmd(a: crate::PlotArgs) -> Result<Record, CliError> {
    let input = manifest::input_file(&a.results)?;
    let rows = transl2e::io::read_results(&a.results)?;
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for (name, svg) in plot::render(&rows) {
        let path = a.out.join(format!("{name}.svg"));
        fs::write(&path, svg).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        outputs.push(path);
    }
    if outputs.is_empty() {
        return Err(CliError::usage(format!("{} has no result rows", a.results.display())));
    }
    Ok(Record {
        command: "plot",
        config_digest: manifest::digest_label(input.sha256.as_bytes()),
        config: None,
        seed: None,
        inputs: vec![input],
        outputs,
        manifest_path: manifest::manifest_path(&a.out, true),
    })
}

fn replay_cmd(a: crate::ReplayArgs) -> Result<(), CliError> {
    use clap::Parser;

    let m = manifest::read(&a.manifest)?;
    manifest::verify_inputs(&m)?;
    if let Some(text) = &m.config {
        if manifest::digest_label(text.as_bytes()) != m.config_digest {
            return Err(CliError::usage("manifest config does not match its digest"));
        }
    }
    let mut args = m.args.clone();
    if let Some(out) = &a.out {
        let pos = args
            .iter()
            .position(|s| s == "--out")
            .ok_or_else(|| CliError::usage("recorded command has no --out"))?;
        args[pos + 1] = out.display().to_string();
    }
    let argv: Vec<String> = std::iter::once("transl2e".to_string()).chain(args.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::usage(format!("recorded arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::usage("cannot replay a replay"));
    }
    dispatch(cli.command, &args, Some(&m))
}
