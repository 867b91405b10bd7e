mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use twinkit::data::{evaluate_expression, DataEngine};
use twinkit::decimate::{decimate, default_grid, DecimationParams, ParamGrid};
use twinkit::forest::ForestConfig;
use twinkit::mesh::{load_model, read_obj, save_model, TriangleMesh};
use twinkit::metrics::{compute_similarity, measure, shape_ratios_flagged, SimilarityConfig};
use twinkit::pipeline::{
    assemble_datasets, export_label_tasks, measure_grid, oracle_labels, read_labels, read_pair_manifest, reduce_part,
    run_pipeline, train_gating_models, write_labels, GatingModels, QualityLabel,
};
use twinkit::player::{create_session, read_script, run_script, PlayerError};
use twinkit::process::{check_scenario, parse_process};
use twinkit::scenario::load_scenario;

use io::{emit, staged_dir, CliError, OrCli, EXIT_INVALID, EXIT_OK, EXIT_USAGE};

/// Digital-twin authoring toolkit. Every command prints a JSON report on
/// stdout (or to --out) and exits 0 on success, 1 on validation failure,
/// 2 on usage errors and 3 on I/O errors.
#[derive(Debug, Parser)]
#[command(name = "twinkit", version)]
struct Cli {
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shape metrics of a mesh, or of a high/low pair with ratios and similarity.
    Metrics {
        mesh: PathBuf,
        /// Reduced version of MESH to compare against.
        #[arg(long)]
        against: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Reduce one mesh, either gated by trained models or with fixed parameters.
    ReduceOne {
        mesh: PathBuf,
        /// Directory holding quality.json, poly.json and gate.json.
        #[arg(long, conflicts_with = "ratio", required_unless_present = "ratio")]
        models: Option<PathBuf>,
        /// Decimate directly to this face ratio instead of consulting models.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        edge_weight: f64,
        #[arg(long, default_value_t = 45.0)]
        normal_limit: f64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        preserve_boundary: bool,
        /// Where to write the reduced OBJ.
        #[arg(long, value_name = "OBJ")]
        output: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Reduce every unique mesh of a model and write the rebuilt model.
    Reduce {
        /// Model manifest (JSON).
        model: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Output directory for the reduced model.
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// List the decimation parameter grid.
    Grid {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Train the quality, poly-ratio and gate models.
    Train {
        /// Directory of OBJ files; object ids are the file stems.
        #[arg(long)]
        objects: PathBuf,
        /// Label CSV (object_id,param_id,replicate,rater,label).
        #[arg(long, conflicts_with = "oracle_replicates", required_unless_present = "oracle_replicates")]
        labels: Option<PathBuf>,
        /// Label with the synthetic oracle instead, this many judgments per pair.
        #[arg(long)]
        oracle_replicates: Option<u32>,
        /// Output directory for the three model files.
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Write mesh pairs and the pair manifest for the labeling app.
    LabelExport {
        #[arg(long)]
        objects: PathBuf,
        #[arg(long, default_value_t = 5)]
        replicates: u32,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Validate a label CSV against a pair manifest.
    LabelImport {
        labels: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Write the validated labels in canonical form.
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
    },
    /// Parse a process file and print the compiled model.
    Compile { process: PathBuf },
    /// Check a process against a scenario.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        process: PathBuf,
    },
    /// Data channel utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Play a scripted session and print the progress report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        script: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum DataCommand {
    /// Evaluate an expression over variables or a scenario's channels.
    Eval {
        expression: String,
        /// Variable binding, repeatable.
        #[arg(long = "var", value_name = "NAME=VALUE", value_parser = parse_binding)]
        vars: Vec<(String, f64)>,
        /// Bind the channels and constants of this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Scenario clock at which to read the channels.
        #[arg(long, default_value_t = 0.0, requires = "scenario")]
        at: f64,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Surface samples for the similarity metrics.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Seed for surface sampling.
    #[arg(long = "sample-seed", default_value_t = 0)]
    sample_seed: u64,
}

impl SimArgs {
    fn config(&self) -> SimilarityConfig {
        SimilarityConfig {
            samples: self.samples,
            seed: self.sample_seed,
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Parameter grid as JSON; the default 108-combination grid otherwise.
    #[arg(long = "grid", value_name = "JSON")]
    grid_file: Option<PathBuf>,
}

impl GridArgs {
    fn load(&self) -> Result<ParamGrid, CliError> {
        match &self.grid_file {
            None => Ok(default_grid()),
            Some(p) => {
                let grid: ParamGrid = serde_json::from_str(&fs::read_to_string(p).cli()?).cli()?;
                if grid.is_empty() {
                    return Err(CliError::invalid(format!("{}: grid has no combinations", p.display())));
                }
                Ok(grid)
            }
        }
    }
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let value = value.trim().parse().map_err(|e| format!("{value}: {e}"))?;
    Ok((name.trim().to_string(), value))
}

fn read_objects(dir: &Path) -> Result<Vec<(String, TriangleMesh)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .cli()?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .cli()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")));
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::invalid(format!("{}: no .obj files", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, read_obj(p).cli()?))
        })
        .collect()
}

/// A report plus the exit code it implies.
struct Outcome {
    report: serde_json::Value,
    code: u8,
}

impl Outcome {
    fn ok(report: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            report: serde_json::to_value(report).cli()?,
            code: EXIT_OK,
        })
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Metrics { mesh, against, sim } => {
            let high = read_obj(&mesh).cli()?;
            let h = measure(&high).cli()?;
            let Some(low_path) = against else {
                return Outcome::ok(json!({ "summary": h.summary, "metrics": h.metrics }));
            };
            let low = read_obj(&low_path).cli()?;
            let l = measure(&low).cli()?;
            let (ratios, flags) = shape_ratios_flagged(&h, &l);
            let similarity = compute_similarity(&high, &low, &sim.config()).cli()?;
            Outcome::ok(json!({
                "high": h.metrics,
                "low": l.metrics,
                "ratios": ratios,
                "similarity": similarity,
                "flags": flags,
                "poly_ratio": low.face_count() as f64 / high.face_count() as f64,
            }))
        }
        Command::ReduceOne {
            mesh,
            models,
            ratio,
            edge_weight,
            normal_limit,
            preserve_boundary,
            output,
            grid,
            sim,
        } => {
            let input = read_obj(&mesh).cli()?;
            let (reduced, report) = match (ratio, models) {
                (Some(r), _) => {
                    let params = DecimationParams {
                        target_ratio: r,
                        edge_weight,
                        normal_limit_deg: normal_limit,
                        preserve_boundary,
                    };
                    let d = decimate(&input, &params).cli()?;
                    let similarity = compute_similarity(&input, &d.mesh, &sim.config()).cli()?;
                    let report = json!({ "params": params, "decimation": d.report, "similarity": similarity });
                    (d.mesh, report)
                }
                (None, Some(dir)) => {
                    let models = GatingModels::load_dir(&dir).cli()?;
                    let out = reduce_part(&input, &models, &grid.load()?, &sim.config());
                    (out.mesh, serde_json::to_value(out.report).cli()?)
                }
                (None, None) => return Err(CliError::usage("either --models or --ratio is required")),
            };
            if let Some(path) = output {
                io::write_file(&path, twinkit::mesh::to_obj_string(&reduced).as_bytes())?;
            }
            Outcome::ok(report)
        }
        Command::Reduce {
            model,
            models,
            output,
            workers,
            grid,
            sim,
        } => {
            if workers == 0 {
                return Err(CliError::usage("--workers must be at least 1"));
            }
            let input = load_model(&model).cli()?;
            let gating = GatingModels::load_dir(&models).cli()?;
            let grid = grid.load()?;
            let (reduced, report) = run_pipeline(&input, &gating, &grid, &sim.config(), workers).cli()?;
            let name = model.file_name().map(PathBuf::from).unwrap_or_else(|| "model.json".into());
            staged_dir(&output, |stage| save_model(&reduced, &stage.join(&name)).cli())?;
            Outcome::ok(report)
        }
        Command::Grid { grid } => {
            let rows: Vec<_> = grid
                .load()?
                .combos()
                .into_iter()
                .enumerate()
                .map(|(param_id, p)| json!({ "param_id": param_id, "params": p }))
                .collect();
            Outcome::ok(rows)
        }
        Command::Train {
            objects,
            labels,
            oracle_replicates,
            output,
            seed,
            trees,
            max_depth,
            min_leaf,
            grid,
            sim,
        } => {
            let objects = read_objects(&objects)?;
            let grid = grid.load()?;
            let measurements = measure_grid(&objects, &grid, &sim.config()).cli()?;
            let labels = match (labels, oracle_replicates) {
                (Some(path), _) => read_labels(&path).cli()?,
                (None, Some(n)) => oracle_labels(&measurements, n),
                (None, None) => return Err(CliError::usage("either --labels or --oracle-replicates is required")),
            };
            let data = assemble_datasets(&measurements, &labels).cli()?;
            let config = ForestConfig {
                tree_count: trees,
                max_depth,
                min_samples_leaf: min_leaf,
                max_features: None,
                seed,
            };
            let models = train_gating_models(&data, &config).cli()?;
            staged_dir(&output, |stage| models.save_dir(stage).cli())?;
            Outcome::ok(json!({
                "objects": objects.len(),
                "combos": grid.len(),
                "rows": { "quality": data.quality.len(), "poly": data.poly.len(), "gate": data.gate.len() },
                "skipped_gate_rows": data.skipped_gate_rows,
                "oob": {
                    "quality": models.quality.oob_score,
                    "poly": models.poly.oob_score,
                    "gate": models.gate.oob_score,
                },
                "seed": seed,
            }))
        }
        Command::LabelExport {
            objects,
            replicates,
            output,
            grid,
        } => {
            let objects = read_objects(&objects)?;
            let grid = grid.load()?;
            let tasks = staged_dir(&output, |stage| export_label_tasks(&objects, &grid, replicates, stage).cli())?;
            Outcome::ok(json!({
                "tasks": tasks.len(),
                "objects": objects.len(),
                "combos": grid.len(),
                "replicates": replicates,
                "manifest": output.join("pairs.json"),
            }))
        }
        Command::LabelImport {
            labels,
            manifest,
            output,
        } => {
            let tasks = read_pair_manifest(&manifest).cli()?;
            let labels = read_labels(&labels).cli()?;
            let known: BTreeSet<(&str, usize, u32)> = tasks
                .iter()
                .map(|t| (t.object_id.as_str(), t.param_id, t.replicate))
                .collect();
            let unknown: Vec<&QualityLabel> = labels
                .iter()
                .filter(|l| !known.contains(&(l.object_id.as_str(), l.param_id, l.replicate)))
                .collect();
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for l in &labels {
                let name = serde_json::to_value(l.label).cli()?.as_str().unwrap_or_default().to_string();
                *counts.entry(name).or_default() += 1;
            }
            let report = json!({
                "labels": labels.len(),
                "tasks": tasks.len(),
                "unlabeled": tasks.len().saturating_sub(labels.len() - unknown.len()),
                "counts": counts,
                "unknown": unknown,
            });
            if !unknown.is_empty() {
                return Ok(Outcome {
                    report,
                    code: EXIT_INVALID,
                });
            }
            if let Some(path) = output {
                let stage = path.with_extension("partial.csv");
                write_labels(&stage, &labels).cli()?;
                fs::rename(&stage, &path).cli()?;
            }
            Outcome::ok(report)
        }
        Command::Compile { process } => {
            let text = fs::read_to_string(&process).cli()?;
            let model = parse_process(&text).map_err(|e| CliError::invalid(format!("{}: {e}", process.display())))?;
            Outcome::ok(model)
        }
        Command::Check { scenario, process } => {
            let text = fs::read_to_string(&process).cli()?;
            let model = parse_process(&text).map_err(|e| CliError::invalid(format!("{}: {e}", process.display())))?;
            let loaded = load_scenario(&scenario).cli()?;
            let mut diagnostics = loaded.validate();
            diagnostics.extend(check_scenario(&model, &loaded));
            let code = if diagnostics.is_empty() { EXIT_OK } else { EXIT_INVALID };
            Ok(Outcome {
                report: json!({ "diagnostics": diagnostics }),
                code,
            })
        }
        Command::Data {
            command: DataCommand::Eval {
                expression,
                vars,
                scenario,
                at,
            },
        } => {
            let vars: BTreeMap<String, f64> = vars.into_iter().collect();
            let engine = match scenario {
                Some(path) => {
                    let loaded = load_scenario(&path).cli()?;
                    let mut e = DataEngine::from_config(&loaded.scenario.data, &loaded.base_dir).cli()?;
                    e.tick(at).cli()?;
                    Some(e)
                }
                None => None,
            };
            let lookup = |name: &str| {
                vars.get(name)
                    .copied()
                    .or_else(|| engine.as_ref().and_then(|e| e.value(name)))
            };
            let value = evaluate_expression(&expression, &lookup).cli()?;
            Outcome::ok(json!({ "expression": expression, "value": value }))
        }
        Command::Run {
            scenario,
            process,
            script,
        } => {
            let loaded = load_scenario(&scenario).cli()?;
            let text = fs::read_to_string(&process).cli()?;
            let model = parse_process(&text).map_err(|e| CliError::invalid(format!("{}: {e}", process.display())))?;
            let file = fs::File::open(&script).cli()?;
            let lines = read_script(BufReader::new(file)).cli()?;
            let mut session = match create_session(loaded, model) {
                Ok(s) => s,
                Err(PlayerError::Diagnostics(diagnostics)) => {
                    return Ok(Outcome {
                        report: json!({ "diagnostics": diagnostics }),
                        code: EXIT_INVALID,
                    })
                }
                Err(e) => return Err(CliError::from_error(&e)),
            };
            run_script(&mut session, &lines).cli()?;
            Outcome::ok(session.progress_report())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = dispatch(cli.command).and_then(|o| {
        emit(&o.report, cli.out.as_deref(), cli.pretty)?;
        Ok(o.code)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
