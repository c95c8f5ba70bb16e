//! Experiment configuration: a TOML document validated field by field so that
//! every problem is reported in one pass.
//!
//! ```toml
//! [dataset]
//! name = "synthetic"          # label used in report files
//! source = "synthetic"        # or "idx"
//! dim = 16                    # synthetic only
//! n_per_class = 100           # synthetic only
//! separation = 3.0            # synthetic only
//! test_fraction = 0.25        # used unless idx test files are given
//! # train_images / train_labels / test_images / test_labels   (idx only)
//!
//! [network]
//! block_widths = [32, 32, 32, 32]
//!
//! [tasks]
//! num_tasks = 5
//! classes_per_task = 2
//!
//! [experiment]
//! regimes = [1, 2, 4]                       # trainable depths, 1..=B
//! methods = ["ewc", "lwf", "si", "gem"]
//! n_random_orders = 10
//! master_seed = 0
//! output_dir = "results"
//! write_steps = false
//! forgetting = "as_written"                 # or "peak_before_final"
//!
//! [train]
//! eta = 0.05
//! epochs = 5
//! batch_size = 64
//!
//! [ewc]  gamma = 0.9, lambda = 1.0
//! [si]   xi = 0.1, lambda = 1.0
//! [lwf]  temperature = 2.0, lambda = 1.0
//! [gem]  memory_per_task = 32, margin = 0.0
//! ```

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::methods::{MethodHyper, MethodKind};
use crate::metrics::ForgettingConvention;
use crate::trainer::TrainHyper;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        dim: usize,
        n_per_class: usize,
        separation: f64,
        test_fraction: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        test_fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub dataset: DatasetSource,
    pub block_widths: Vec<usize>,
    pub num_tasks: usize,
    pub classes_per_task: usize,
    pub regimes: Vec<usize>,
    pub methods: Vec<MethodKind>,
    pub method_hyper: MethodHyper,
    pub train: TrainHyper,
    pub n_random_orders: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub write_steps: bool,
    pub forgetting: ForgettingConvention,
}

/// Environment variable that overrides `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RL_OUTPUT_DIR";

struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn section(&mut self, root: &mut Table, name: &str, required: bool) -> Table {
        match root.remove(name) {
            Some(Value::Table(t)) => t,
            Some(_) => {
                self.errors.push(format!("{name}: expected a table"));
                Table::new()
            }
            None => {
                if required {
                    self.errors.push(format!("{name}: missing section"));
                }
                Table::new()
            }
        }
    }

    fn finish_section(&mut self, section: &str, table: Table) {
        for key in table.keys() {
            self.errors.push(format!("{section}.{key}: unknown key"));
        }
    }

    fn get<T>(
        &mut self,
        table: &mut Table,
        section: &str,
        key: &str,
        default: Option<T>,
        convert: impl Fn(&Value) -> Option<T>,
        expected: &str,
    ) -> Option<T> {
        match table.remove(key) {
            Some(v) => match convert(&v) {
                Some(x) => Some(x),
                None => {
                    self.errors.push(format!("{section}.{key}: expected {expected}, got {v}"));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.errors.push(format!("{section}.{key}: missing"));
                }
                default
            }
        }
    }

    fn usize(&mut self, t: &mut Table, section: &str, key: &str, default: Option<usize>) -> Option<usize> {
        self.get(t, section, key, default, as_usize, "a non-negative integer")
    }

    fn f64(&mut self, t: &mut Table, section: &str, key: &str, default: Option<f64>) -> Option<f64> {
        self.get(t, section, key, default, as_f64, "a number")
    }

    fn string(&mut self, t: &mut Table, section: &str, key: &str, default: Option<String>) -> Option<String> {
        self.get(t, section, key, default, |v| v.as_str().map(str::to_string), "a string")
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.errors.push(msg());
        }
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn as_usize_list(v: &Value) -> Option<Vec<usize>> {
    v.as_array()?.iter().map(as_usize).collect()
}

/// Parse and validate a config document, reporting all errors at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader { errors: Vec::new() };

    // [dataset]
    let mut ds = r.section(&mut root, "dataset", true);
    let source = r.string(&mut ds, "dataset", "source", Some("synthetic".into()));
    let dataset_name = r
        .string(&mut ds, "dataset", "name", source.clone())
        .unwrap_or_default();
    let test_fraction = r.f64(&mut ds, "dataset", "test_fraction", Some(0.25));
    if let Some(f) = test_fraction {
        r.check(f > 0.0 && f < 1.0, || format!("dataset.test_fraction: {f} not in (0, 1)"));
    }
    let dataset = match source.as_deref() {
        Some("synthetic") => {
            let dim = r.usize(&mut ds, "dataset", "dim", Some(16));
            let n = r.usize(&mut ds, "dataset", "n_per_class", Some(100));
            let sep = r.f64(&mut ds, "dataset", "separation", Some(3.0));
            if let Some(d) = dim {
                r.check(d >= 1, || "dataset.dim: must be at least 1".into());
            }
            if let Some(n) = n {
                r.check(n >= 2, || "dataset.n_per_class: must be at least 2".into());
            }
            if let Some(s) = sep {
                r.check(s >= 0.0 && s.is_finite(), || format!("dataset.separation: {s} must be finite and >= 0"));
            }
            match (dim, n, sep, test_fraction) {
                (Some(dim), Some(n_per_class), Some(separation), Some(test_fraction)) => Some(DatasetSource::Synthetic {
                    dim,
                    n_per_class,
                    separation,
                    test_fraction,
                }),
                _ => None,
            }
        }
        Some("idx") => {
            let path = |r: &mut Reader, ds: &mut Table, key: &str, required: bool| {
                let default = if required { None } else { Some(String::new()) };
                r.string(ds, "dataset", key, default)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
            };
            let train_images = path(&mut r, &mut ds, "train_images", true);
            let train_labels = path(&mut r, &mut ds, "train_labels", true);
            let test_images = path(&mut r, &mut ds, "test_images", false);
            let test_labels = path(&mut r, &mut ds, "test_labels", false);
            r.check(test_images.is_some() == test_labels.is_some(), || {
                "dataset.test_images / dataset.test_labels: give both or neither".into()
            });
            match (train_images, train_labels, test_fraction) {
                (Some(train_images), Some(train_labels), Some(test_fraction)) => Some(DatasetSource::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                    test_fraction,
                }),
                _ => None,
            }
        }
        Some(other) => {
            r.errors.push(format!("dataset.source: unknown source {other:?} (expected \"synthetic\" or \"idx\")"));
            None
        }
        None => None,
    };
    r.finish_section("dataset", ds);

    // [network]
    let mut net = r.section(&mut root, "network", true);
    let block_widths = r.get(&mut net, "network", "block_widths", None, as_usize_list, "a list of positive integers");
    if let Some(w) = &block_widths {
        r.check(!w.is_empty(), || "network.block_widths: at least one block is required".into());
        r.check(!w.contains(&0), || "network.block_widths: widths must be positive".into());
    }
    r.finish_section("network", net);

    // [tasks]
    let mut tasks = r.section(&mut root, "tasks", true);
    let num_tasks = r.usize(&mut tasks, "tasks", "num_tasks", None);
    let classes_per_task = r.usize(&mut tasks, "tasks", "classes_per_task", None);
    if let Some(t) = num_tasks {
        r.check(t >= 2, || format!("tasks.num_tasks: {t} < 2"));
    }
    if let Some(c) = classes_per_task {
        r.check(c >= 2, || format!("tasks.classes_per_task: {c} < 2"));
    }
    r.finish_section("tasks", tasks);

    // [experiment]
    let mut exp = r.section(&mut root, "experiment", true);
    let regimes = r.get(&mut exp, "experiment", "regimes", None, as_usize_list, "a list of block counts");
    if let (Some(regs), Some(widths)) = (&regimes, &block_widths) {
        let b = widths.len();
        r.check(!regs.is_empty(), || "experiment.regimes: at least one regime is required".into());
        for &k in regs {
            r.check((1..=b).contains(&k), || format!("experiment.regimes: {k} not in [1, {b}]"));
        }
        let unique: BTreeSet<_> = regs.iter().collect();
        r.check(unique.len() == regs.len(), || "experiment.regimes: duplicate regime".into());
    }
    let method_names = r.get(
        &mut exp,
        "experiment",
        "methods",
        None,
        |v| v.as_array()?.iter().map(|m| m.as_str().map(str::to_string)).collect::<Option<Vec<_>>>(),
        "a list of method names",
    );
    let mut methods = Vec::new();
    if let Some(names) = method_names {
        r.check(!names.is_empty(), || "experiment.methods: at least one method is required".into());
        let mut seen = BTreeSet::new();
        for name in names {
            match name.parse::<MethodKind>() {
                Ok(kind) => {
                    if !seen.insert(kind) {
                        r.errors.push(format!("experiment.methods: duplicate method {name:?}"));
                    }
                    methods.push(kind);
                }
                Err(e) => r.errors.push(format!("experiment.methods: {e}")),
            }
        }
    }
    let n_random_orders = r.usize(&mut exp, "experiment", "n_random_orders", Some(10));
    let master_seed = r.get(&mut exp, "experiment", "master_seed", Some(0), |v| v.as_integer().and_then(|i| u64::try_from(i).ok()), "a non-negative integer");
    let output_dir = r.string(&mut exp, "experiment", "output_dir", Some("results".into()));
    let write_steps = r.get(&mut exp, "experiment", "write_steps", Some(false), Value::as_bool, "a boolean");
    let forgetting = r.get(
        &mut exp,
        "experiment",
        "forgetting",
        Some(ForgettingConvention::AsWritten),
        |v| match v.as_str()? {
            "as_written" => Some(ForgettingConvention::AsWritten),
            "peak_before_final" => Some(ForgettingConvention::PeakBeforeFinal),
            _ => None,
        },
        "\"as_written\" or \"peak_before_final\"",
    );
    r.finish_section("experiment", exp);

    // [train]
    let defaults = TrainHyper::default();
    let mut train = r.section(&mut root, "train", false);
    let eta = r.f64(&mut train, "train", "eta", Some(defaults.eta));
    let epochs = r.usize(&mut train, "train", "epochs", Some(defaults.epochs_per_task));
    let batch_size = r.usize(&mut train, "train", "batch_size", Some(defaults.batch_size));
    if let Some(e) = eta {
        r.check(e > 0.0 && e.is_finite(), || format!("train.eta: {e} must be positive"));
    }
    if let Some(b) = batch_size {
        r.check(b >= 1, || "train.batch_size: must be at least 1".into());
    }
    r.finish_section("train", train);

    // method sections
    let mh = MethodHyper::default();
    let mut ewc = r.section(&mut root, "ewc", false);
    let ewc_gamma = r.f64(&mut ewc, "ewc", "gamma", Some(mh.ewc_gamma));
    let ewc_lambda = r.f64(&mut ewc, "ewc", "lambda", Some(mh.ewc_lambda));
    r.finish_section("ewc", ewc);
    let mut si = r.section(&mut root, "si", false);
    let si_xi = r.f64(&mut si, "si", "xi", Some(mh.si_xi));
    let si_lambda = r.f64(&mut si, "si", "lambda", Some(mh.si_lambda));
    r.finish_section("si", si);
    let mut lwf = r.section(&mut root, "lwf", false);
    let lwf_temperature = r.f64(&mut lwf, "lwf", "temperature", Some(mh.lwf_temperature));
    let lwf_lambda = r.f64(&mut lwf, "lwf", "lambda", Some(mh.lwf_lambda));
    r.finish_section("lwf", lwf);
    let mut gem = r.section(&mut root, "gem", false);
    let gem_memory = r.usize(&mut gem, "gem", "memory_per_task", Some(mh.gem_memory_per_task));
    let gem_margin = r.f64(&mut gem, "gem", "margin", Some(mh.gem_margin));
    r.finish_section("gem", gem);
    if let Some(g) = ewc_gamma {
        r.check(g > 0.0 && g <= 1.0, || format!("ewc.gamma: {g} not in (0, 1]"));
    }
    for (name, v) in [("ewc.lambda", ewc_lambda), ("si.lambda", si_lambda), ("lwf.lambda", lwf_lambda), ("gem.margin", gem_margin)] {
        if let Some(v) = v {
            r.check(v >= 0.0 && v.is_finite(), || format!("{name}: {v} must be finite and >= 0"));
        }
    }
    if let Some(x) = si_xi {
        r.check(x > 0.0, || format!("si.xi: {x} must be positive"));
    }
    if let Some(t) = lwf_temperature {
        r.check(t > 0.0, || format!("lwf.temperature: {t} must be positive"));
    }
    if let Some(m) = gem_memory {
        r.check(m >= 1, || "gem.memory_per_task: must be at least 1".into());
    }

    for key in root.keys() {
        r.errors.push(format!("{key}: unknown section"));
    }
    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }

    let unwrap = |what: &str| Error::Config(vec![format!("{what}: missing")]);
    Ok(ExperimentConfig {
        dataset_name,
        dataset: dataset.ok_or_else(|| unwrap("dataset"))?,
        block_widths: block_widths.ok_or_else(|| unwrap("network.block_widths"))?,
        num_tasks: num_tasks.ok_or_else(|| unwrap("tasks.num_tasks"))?,
        classes_per_task: classes_per_task.ok_or_else(|| unwrap("tasks.classes_per_task"))?,
        regimes: regimes.ok_or_else(|| unwrap("experiment.regimes"))?,
        methods,
        method_hyper: MethodHyper {
            ewc_gamma: ewc_gamma.unwrap_or(mh.ewc_gamma),
            ewc_lambda: ewc_lambda.unwrap_or(mh.ewc_lambda),
            si_xi: si_xi.unwrap_or(mh.si_xi),
            si_lambda: si_lambda.unwrap_or(mh.si_lambda),
            lwf_temperature: lwf_temperature.unwrap_or(mh.lwf_temperature),
            lwf_lambda: lwf_lambda.unwrap_or(mh.lwf_lambda),
            gem_memory_per_task: gem_memory.unwrap_or(mh.gem_memory_per_task),
            gem_margin: gem_margin.unwrap_or(mh.gem_margin),
        },
        train: TrainHyper {
            eta: eta.unwrap_or(defaults.eta),
            epochs_per_task: epochs.unwrap_or(defaults.epochs_per_task),
            batch_size: batch_size.unwrap_or(defaults.batch_size),
        },
        n_random_orders: n_random_orders.unwrap_or(10),
        master_seed: master_seed.unwrap_or(0),
        output_dir: PathBuf::from(output_dir.unwrap_or_else(|| "results".into())),
        write_steps: write_steps.unwrap_or(false),
        forgetting: forgetting.unwrap_or_default(),
    })
}

impl ExperimentConfig {
    pub fn num_blocks(&self) -> usize {
        self.block_widths.len()
    }

    /// Output directory with the `RL_OUTPUT_DIR` override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}
