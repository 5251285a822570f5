//! Batch runs, aggregation, parameter sweeps and file formats for the
//! planner benchmarks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seqplan::scene::{build_benchmark_scene, SceneSpec, SCENE_NAMES};
use seqplan::{Configuration, Plan, PlannerKind, PlannerParams, SolutionPath, Task};

/// One planning run. Everything except `wall_time` is a function of the
/// inputs, so only that field is kept out of the result files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scene: String,
    pub planner: String,
    pub seed: u64,
    pub success: bool,
    pub path_length: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: f64,
    pub params: PlannerParams,
}

/// Resolves a built-in scene name or a path to a scene JSON file.
pub fn load_task(scene: &str) -> anyhow::Result<Task> {
    if SCENE_NAMES.contains(&scene) {
        return Ok(build_benchmark_scene(scene)?);
    }
    let path = Path::new(scene);
    if path.is_file() {
        let spec = SceneSpec::load(path).with_context(|| format!("reading scene file {scene}"))?;
        return Ok(spec.build()?);
    }
    Err(build_benchmark_scene(scene).unwrap_err().into())
}

pub fn parse_planner(name: &str) -> anyhow::Result<PlannerKind> {
    PlannerKind::from_name(name).with_context(|| {
        let names: Vec<_> = PlannerKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown planner '{name}' (available: {})", names.join(", "))
    })
}

pub fn load_params(path: &Path) -> anyhow::Result<PlannerParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params: PlannerParams = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    params.validate()?;
    Ok(params)
}

/// Runs one planner with `params` and the given seed.
pub fn run(task: &Task, planner: PlannerKind, params: &PlannerParams, seed: u64) -> (RunRecord, Option<Plan>) {
    let params = params.clone().with_seed(seed);
    let t0 = Instant::now();
    let outcome = planner.run(task, &params);
    let wall_time = t0.elapsed().as_secs_f64();
    let (plan, error) = match outcome {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let record = RunRecord {
        scene: task.name.clone(),
        planner: planner.name().to_string(),
        seed,
        success: plan.is_some(),
        path_length: plan.as_ref().map(|p| p.path.total_cost),
        error,
        wall_time,
        params,
    };
    (record, plan)
}

/// Runs the seeds in parallel; results come back in seed order.
pub fn run_seeds(
    task: &Task,
    planner: PlannerKind,
    params: &PlannerParams,
    seeds: &[u64],
) -> Vec<(RunRecord, Option<Plan>)> {
    seeds.par_iter().map(|&s| run(task, planner, params, s)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scene: String,
    pub planner: String,
    pub runs: usize,
    pub successes: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Mean and sample standard deviation of a non-empty sample.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Per (scene, planner) statistics over successful runs, in order of first
/// appearance.
pub fn aggregate(records: &[RunRecord]) -> Vec<Summary> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in records {
        let k = (r.scene.as_str(), r.planner.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(scene, planner)| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.scene == scene && r.planner == planner).collect();
            let costs: Vec<f64> = group.iter().filter_map(|r| r.path_length).collect();
            let stats = mean_std(&costs);
            Summary {
                scene: scene.to_string(),
                planner: planner.to_string(),
                runs: group.len(),
                successes: costs.len(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Rho,
    M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds_per_value: usize,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<f64>, seeds_per_value: usize) -> anyhow::Result<Self> {
        if values.is_empty() {
            bail!("a sweep needs at least one value");
        }
        if values.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            bail!("sweep values must be strictly increasing");
        }
        if seeds_per_value == 0 {
            bail!("a sweep needs at least one seed per value");
        }
        if param == SweepParam::M && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            bail!("m values must be positive integers");
        }
        Ok(SweepSpec {
            param,
            values,
            seeds_per_value,
        })
    }

    pub fn apply(&self, params: &PlannerParams, value: f64) -> PlannerParams {
        let mut p = params.clone();
        match self.param {
            SweepParam::Rho => p.rho = value,
            SweepParam::M => p.m = value as usize,
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub runs: usize,
    pub successes: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// One aggregate row per swept value, using seeds `0..seeds_per_value`.
pub fn sweep(
    spec: &SweepSpec,
    task: &Task,
    planner: PlannerKind,
    params: &PlannerParams,
) -> (Vec<SweepRow>, Vec<RunRecord>) {
    let seeds: Vec<u64> = (0..spec.seeds_per_value as u64).collect();
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &value in &spec.values {
        let p = spec.apply(params, value);
        let records: Vec<RunRecord> = run_seeds(task, planner, &p, &seeds).into_iter().map(|(r, _)| r).collect();
        let s = &aggregate(&records)[0];
        rows.push(SweepRow {
            value,
            runs: s.runs,
            successes: s.successes,
            mean: s.mean,
            std: s.std,
        });
        all.extend(records);
    }
    (rows, all)
}

#[derive(Serialize)]
struct ResultRow<'a> {
    scene: &'a str,
    planner: &'a str,
    seed: u64,
    success: bool,
    path_length: Option<f64>,
    error: Option<&'a str>,
    alpha: f64,
    beta: f64,
    eps: f64,
    rho: f64,
    r: f64,
    m: usize,
}

pub fn write_results_csv(path: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(ResultRow {
            scene: &r.scene,
            planner: &r.planner,
            seed: r.seed,
            success: r.success,
            path_length: r.path_length,
            error: r.error.as_deref(),
            alpha: r.params.alpha,
            beta: r.params.beta,
            eps: r.params.eps,
            rho: r.params.rho,
            r: r.params.r,
            m: r.params.m,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_jsonl(path: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Wall times live apart from the results so those stay reproducible.
pub fn write_timings_csv(path: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scene", "planner", "seed", "wall_time"])?;
    for r in records {
        w.write_record([r.scene.clone(), r.planner.clone(), r.seed.to_string(), format!("{:.6}", r.wall_time)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Path file: one configuration per row. `ends` counts the segments that
/// end at that row, which is enough to rebuild the segment bounds.
pub fn write_path_csv(path: &Path, sol: &SolutionPath) -> anyhow::Result<()> {
    let dim = sol.configs.first().map_or(0, |q| q.dim());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["ends".to_string()];
    header.extend((0..dim).map(|i| format!("q{i}")));
    w.write_record(&header)?;
    for (idx, q) in sol.configs.iter().enumerate() {
        let ends = sol.segment_bounds[1..].iter().filter(|&&b| b == idx).count();
        let mut row = vec![ends.to_string()];
        row.extend(q.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_csv(path: &Path) -> anyhow::Result<SolutionPath> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut configs = Vec::new();
    let mut bounds = vec![0];
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut fields = rec.iter();
        let ends: usize = fields.next().context("empty row")?.parse().context("bad 'ends' column")?;
        let coords = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad coordinate in row {idx}"))?;
        configs.push(Configuration::from(coords));
        bounds.extend(std::iter::repeat_n(idx, ends));
    }
    if configs.is_empty() {
        bail!("path file {} has no rows", path.display());
    }
    Ok(SolutionPath::new(configs, bounds))
}

pub fn path_file_name(record: &RunRecord) -> PathBuf {
    PathBuf::from(format!("{}_{}_{}.csv", record.scene, record.planner, record.seed))
}
