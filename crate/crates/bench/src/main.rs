use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use seqplan::scene::{builtin_spec, BENCHMARK_SCENES, SCENE_NAMES};
use seqplan::{validate_path, PlannerKind, PlannerParams, Task, ValidateOptions};
use seqplan_bench::{
    aggregate, load_params, load_task, parse_planner, path_file_name, read_path_csv, run, run_seeds, sweep,
    write_csv_rows, write_path_csv, write_results_csv, write_results_jsonl, write_timings_csv, RunRecord,
    SweepParam, SweepSpec,
};

#[derive(Parser)]
#[command(name = "seqplan", version, about = "Plan over manifold sequences and benchmark the planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planner on one scene.
    Plan {
        /// Built-in scene name or scene JSON file.
        #[arg(long)]
        scene: String,
        #[arg(long, default_value = "psm")]
        planner: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with planner parameters; defaults depend on the scene.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Directory for the result record and path file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary rho or m over several seeds and report mean and std per value.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value = "point3d_free")]
        scene: String,
        #[arg(long, default_value = "psm")]
        planner: String,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenes x planners x seeds and write results, summaries and paths.
    Bench {
        #[arg(long, value_delimiter = ',')]
        scenes: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        planners: Option<Vec<String>>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Parameters applied to every scene instead of the scene defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Check a path file against a scene.
    Validate {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        scene: String,
        /// Residual tolerance; defaults to the scene's default eps.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        max_edge: Option<f64>,
    },
    /// Print a built-in scene as JSON.
    ExportScene {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in scenes and planners.
    List,
}

fn params_for(task: &Task, file: Option<&PathBuf>) -> anyhow::Result<PlannerParams> {
    match file {
        Some(p) => load_params(p),
        None => Ok(PlannerParams::defaults_for(task)),
    }
}

fn write_run_outputs(dir: &PathBuf, records: &[RunRecord]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_results_csv(&dir.join("results.csv"), records)?;
    write_results_jsonl(&dir.join("results.jsonl"), records)?;
    write_timings_csv(&dir.join("timings.csv"), records)?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Plan {
            scene,
            planner,
            seed,
            params,
            out,
        } => {
            let task = load_task(&scene)?;
            let kind = parse_planner(&planner)?;
            let params = params_for(&task, params.as_ref())?;
            let (record, plan) = run(&task, kind, &params, seed);
            println!("{}", serde_json::to_string(&record)?);
            eprintln!("wall time {:.3}s", record.wall_time);
            if let Some(dir) = out {
                write_run_outputs(&dir, std::slice::from_ref(&record))?;
                if let Some(plan) = &plan {
                    write_path_csv(&dir.join(path_file_name(&record)), &plan.path)?;
                }
            }
            Ok(if record.success { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep {
            param,
            values,
            seeds,
            scene,
            planner,
            params,
            out,
        } => {
            let task = load_task(&scene)?;
            let kind = parse_planner(&planner)?;
            let params = params_for(&task, params.as_ref())?;
            let spec = SweepSpec::new(param, values, seeds)?;
            let (rows, records) = sweep(&spec, &task, kind, &params);
            println!("{:>10} {:>5} {:>10} {:>8}", "value", "ok", "mean", "std");
            for r in &rows {
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("{:>10} {:>2}/{:<2} {:>10} {:>8}", r.value, r.successes, r.runs, fmt(r.mean), fmt(r.std));
            }
            if let Some(dir) = out {
                write_run_outputs(&dir, &records)?;
                write_csv_rows(&dir.join("sweep.csv"), &rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            scenes,
            planners,
            seeds,
            params,
            out,
        } => {
            let scenes = scenes.unwrap_or_else(|| BENCHMARK_SCENES.iter().map(|s| s.to_string()).collect());
            let kinds: Vec<PlannerKind> = match planners {
                Some(names) => names.iter().map(|n| parse_planner(n)).collect::<anyhow::Result<_>>()?,
                None => PlannerKind::ALL.to_vec(),
            };
            let fixed = params.as_deref().map(load_params).transpose()?;
            let seed_list: Vec<u64> = (0..seeds).collect();
            let paths_dir = out.join("paths");
            std::fs::create_dir_all(&paths_dir)?;
            let mut records = Vec::new();
            for scene in &scenes {
                let task = load_task(scene)?;
                let p = fixed.clone().unwrap_or_else(|| PlannerParams::defaults_for(&task));
                for &kind in &kinds {
                    for (record, plan) in run_seeds(&task, kind, &p, &seed_list) {
                        if let Some(plan) = plan {
                            write_path_csv(&paths_dir.join(path_file_name(&record)), &plan.path)?;
                        }
                        records.push(record);
                    }
                }
            }
            write_run_outputs(&out, &records)?;
            let summary = aggregate(&records);
            write_csv_rows(&out.join("summary.csv"), &summary)?;
            println!("{:<20} {:<12} {:>5} {:>10} {:>8}", "scene", "planner", "ok", "mean", "std");
            for s in &summary {
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:<20} {:<12} {:>2}/{:<2} {:>10} {:>8}",
                    s.scene,
                    s.planner,
                    s.successes,
                    s.runs,
                    fmt(s.mean),
                    fmt(s.std)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            path,
            scene,
            eps,
            max_edge,
        } => {
            let task = load_task(&scene)?;
            let sol = read_path_csv(&path)?;
            let mut opts = ValidateOptions::new(eps.unwrap_or_else(|| PlannerParams::defaults_for(&task).eps));
            opts.max_edge = max_edge;
            let report = validate_path(&task, &sol, &opts);
            for v in &report.violations {
                println!("{}", serde_json::to_string(v)?);
            }
            if report.is_valid() {
                println!("valid: {} configurations, cost {:.6}", sol.configs.len(), sol.total_cost);
                Ok(ExitCode::SUCCESS)
            } else {
                println!("invalid: {} violation(s)", report.violations.len());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::ExportScene { name, out } => {
            let json = builtin_spec(&name)?.to_json()?;
            match out {
                Some(p) => std::fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            println!("scenes: {}", SCENE_NAMES.join(", "));
            let names: Vec<_> = PlannerKind::ALL.iter().map(|k| k.name()).collect();
            println!("planners: {}", names.join(", "));
            Ok(ExitCode::SUCCESS)
        }
    }
}
