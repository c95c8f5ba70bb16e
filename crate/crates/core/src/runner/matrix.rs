//! Runs every (regime, method, order) cell of an experiment and persists the
//! results.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.json                      every cell with its status
//! runs/<regime>__<method>__o<id>.json one RunRecord per finished cell
//! runs/<regime>__<method>__o<id>.steps.csv   optional step log
//! ```
//!
//! Files are written through a temporary name and renamed into place, so a
//! killed process never leaves a half-written record. On restart, cells that
//! the manifest lists as done (and whose record exists) are skipped.

use std::fs;
use std::hash::Hasher;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::load_tasks;
use crate::data::{orders_digest, sample_orders, TaskData, TaskOrder};
use crate::error::{Error, Result};
use crate::methods::MethodKind;
use crate::metrics::{AccuracyMatrix, ForgettingConvention};
use crate::nn::NetworkSpec;
use crate::regime::depth_label;
use crate::rng::{child_seed, derive_seed};
use crate::trainer::{run_sequence, RunConfig, RunResult, StepRecord};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUNS_DIR: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub regime: String,
    pub k_blocks: usize,
    pub method: MethodKind,
    pub order_id: usize,
    pub status: CellStatus,
    /// Record path relative to the output directory.
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeEntry {
    pub label: String,
    pub k_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub config_digest: String,
    pub orders_digest: String,
    pub forgetting: ForgettingConvention,
    pub regimes: Vec<RegimeEntry>,
    pub methods: Vec<MethodKind>,
    pub orders: Vec<TaskOrder>,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

/// Persisted outcome of one cell. Aggregate metrics are recomputed from the
/// accuracy matrix at report time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub regime: String,
    pub k_blocks: usize,
    pub method: MethodKind,
    pub order_id: usize,
    pub order: Vec<usize>,
    pub orders_digest: String,
    pub stream_seed: u64,
    pub cell_seed: u64,
    pub accuracy_matrix: AccuracyMatrix,
    /// Per task, the mean over steps of the projected update-direction norm.
    pub task_grad_norms: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunRecord {
    fn from_result(r: &RunResult, orders_digest: &str) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            regime: r.regime.clone(),
            k_blocks: r.k_blocks,
            method: r.method,
            order_id: r.order.order_id,
            order: r.order.tasks.clone(),
            orders_digest: orders_digest.to_string(),
            stream_seed: r.stream_seed,
            cell_seed: r.cell_seed,
            accuracy_matrix: r.accuracy_matrix.clone(),
            task_grad_norms: r.task_grad_norms.clone(),
            warnings: r.warnings.clone(),
        }
    }

    pub fn mean_grad_norm(&self) -> f64 {
        if self.task_grad_norms.is_empty() {
            return 0.0;
        }
        self.task_grad_norms.iter().sum::<f64>() / self.task_grad_norms.len() as f64
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    /// Stop after executing this many cells, leaving the rest pending.
    pub max_cells: Option<usize>,
    /// Override the config's output directory.
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct MatrixOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub executed: usize,
    pub skipped: usize,
}

struct Cell {
    regime: String,
    k_blocks: usize,
    method: MethodKind,
    order: TaskOrder,
}

impl Cell {
    fn file(&self) -> String {
        format!("{RUNS_DIR}/{}__{}__o{:03}.json", self.regime, self.method, self.order.order_id)
    }
}

fn config_digest(cfg: &ExperimentConfig) -> Result<String> {
    let mut canonical = cfg.clone();
    canonical.output_dir = PathBuf::new();
    canonical.write_steps = false;
    let mut h = fnv::FnvHasher::default();
    h.write(serde_json::to_string(&canonical)?.as_bytes());
    Ok(format!("{:016x}", h.finish()))
}

/// Per-cell seed: a pinned hash of (master seed, regime, method, order), so
/// adding a method or regime leaves other cells untouched.
pub fn cell_seed(master_seed: u64, regime: &str, method: MethodKind, order_id: usize) -> u64 {
    derive_seed(&[&master_seed.to_string(), regime, method.label(), &order_id.to_string()])
}

/// Seed for network init and minibatch order, shared by every cell of one order.
pub fn stream_seed(master_seed: u64, order_id: usize) -> u64 {
    child_seed(master_seed, "stream", order_id as u64)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn steps_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from("task,step,loss,norm_g,norm_r,gamma,norm_update_sq\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.task_index, s.step, s.loss_task, s.norm_g, s.norm_r, s.gamma_interaction, s.norm_projected_update_sq
        ));
    }
    out
}

fn is_done(dir: &Path, entry: &CellEntry) -> bool {
    entry.status == CellStatus::Done && dir.join(&entry.file).is_file()
}

/// Execute (or resume) the full experiment matrix described by `cfg`.
///
/// Individual cell failures are recorded in the manifest; the call itself
/// only fails on setup or I/O errors.
pub fn run_matrix(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<MatrixOutcome> {
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.resolved_output_dir());
    let tasks = load_tasks(cfg)?;
    let input_dim = tasks.first().ok_or(Error::Empty("tasks"))?.train.inputs.ncols();
    let spec = NetworkSpec {
        input_dim,
        block_widths: cfg.block_widths.clone(),
        num_tasks: cfg.num_tasks,
        classes_per_task: cfg.classes_per_task,
    };
    spec.validate()?;

    let orders = sample_orders(cfg.num_tasks, cfg.n_random_orders, cfg.master_seed);
    let digest = orders_digest(&orders);
    let b = cfg.num_blocks();
    let regimes: Vec<RegimeEntry> = cfg
        .regimes
        .iter()
        .map(|&k| RegimeEntry {
            label: depth_label(k, b),
            k_blocks: k,
        })
        .collect();

    let mut cells = Vec::new();
    for r in &regimes {
        for &method in &cfg.methods {
            for order in &orders {
                cells.push(Cell {
                    regime: r.label.clone(),
                    k_blocks: r.k_blocks,
                    method,
                    order: order.clone(),
                });
            }
        }
    }

    let config_digest = config_digest(cfg)?;
    let previous = Manifest::load(&dir)
        .ok()
        .filter(|m| m.config_digest == config_digest && m.orders_digest == digest);
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        dataset: cfg.dataset_name.clone(),
        config_digest,
        orders_digest: digest.clone(),
        forgetting: cfg.forgetting,
        regimes,
        methods: cfg.methods.clone(),
        orders: orders.clone(),
        cells: cells
            .iter()
            .map(|c| CellEntry {
                regime: c.regime.clone(),
                k_blocks: c.k_blocks,
                method: c.method,
                order_id: c.order.order_id,
                status: CellStatus::Pending,
                file: c.file(),
                error: None,
            })
            .collect(),
    };
    let mut skipped = 0;
    if let Some(prev) = &previous {
        for entry in &mut manifest.cells {
            let done = prev
                .cells
                .iter()
                .any(|p| p.file == entry.file && is_done(&dir, p));
            if done {
                entry.status = CellStatus::Done;
                skipped += 1;
            }
        }
    }

    fs::create_dir_all(dir.join(RUNS_DIR))?;
    write_atomic(&dir.join(MANIFEST_FILE), &to_json(&manifest)?)?;

    let mut pending: Vec<usize> = (0..cells.len())
        .filter(|&i| manifest.cells[i].status != CellStatus::Done)
        .collect();
    if let Some(max) = opts.max_cells {
        pending.truncate(max);
    }
    let executed = pending.len();

    let collector = Mutex::new(manifest);
    let run_cell = |i: usize| -> Result<()> {
        let cell = &cells[i];
        let outcome = execute_cell(cfg, &spec, cell, &tasks);
        // one writer at a time: the record first, then the manifest that points at it
        let mut m = collector.lock().unwrap_or_else(|e| e.into_inner());
        match outcome {
            Ok(result) => {
                write_atomic(&dir.join(cell.file()), &to_json(&RunRecord::from_result(&result, &digest))?)?;
                if cfg.write_steps {
                    let steps = cell.file().replace(".json", ".steps.csv");
                    write_atomic(&dir.join(steps), steps_csv(&result.steps).as_bytes())?;
                }
                m.cells[i].status = CellStatus::Done;
                m.cells[i].error = None;
            }
            Err(e) => {
                m.cells[i].status = CellStatus::Failed;
                m.cells[i].error = Some(format!("{}: {e}", e.kind()));
            }
        }
        write_atomic(&dir.join(MANIFEST_FILE), &to_json(&*m)?)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| pending.par_iter().try_for_each(|&i| run_cell(i)))?;

    let manifest = collector.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(MatrixOutcome {
        output_dir: dir,
        manifest,
        executed,
        skipped,
    })
}

fn execute_cell(cfg: &ExperimentConfig, spec: &NetworkSpec, cell: &Cell, tasks: &[TaskData]) -> Result<RunResult> {
    let run = RunConfig {
        network: spec.clone(),
        k_blocks: cell.k_blocks,
        method: cell.method,
        method_hyper: cfg.method_hyper.clone(),
        order: cell.order.clone(),
        train: cfg.train.clone(),
        stream_seed: stream_seed(cfg.master_seed, cell.order.order_id),
        cell_seed: cell_seed(cfg.master_seed, &cell.regime, cell.method, cell.order.order_id),
    };
    run_sequence(&run, tasks)
}

/// Load every finished record listed in a manifest, in manifest order.
/// Missing or unreadable records are returned as problems, not errors.
pub fn load_records(dir: &Path, manifest: &Manifest) -> (Vec<RunRecord>, Vec<String>) {
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for cell in &manifest.cells {
        if cell.status != CellStatus::Done {
            problems.push(format!("{}: {:?}", cell.file, cell.status));
            continue;
        }
        match fs::read(dir.join(&cell.file))
            .map_err(Error::from)
            .and_then(|b| serde_json::from_slice::<RunRecord>(&b).map_err(Error::from))
        {
            Ok(r) => records.push(r),
            Err(e) => problems.push(format!("{}: {e}", cell.file)),
        }
    }
    (records, problems)
}
