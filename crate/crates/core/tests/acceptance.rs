//! Acceptance suite. Runs as a plain binary (`harness = false`) so that the
//! per-criterion verdict lines are always printed.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use regime_lab::data::{synth_gaussian_tasks, split_tasks, TaskData, TaskOrder};
use regime_lab::methods::{gem_project, EwcState, LwfState, Method, MethodHyper, MethodKind, SiState};
use regime_lab::metrics::{
    average_accuracy, average_forgetting, kendall_tau, kendall_tau_values, rank_methods, AccuracyMatrix,
    ForgettingConvention,
};
use regime_lab::nn::{central_difference, finite_diff_gradient};
use regime_lab::rng::Rng;
use regime_lab::runner::{emit_reports, parse_config, run_matrix, CellStatus, RunOptions};
use regime_lab::trainer::{run_sequence, train_task, RunConfig, TrainHyper};
use regime_lab::{Batch, Network, NetworkSpec, ParamVector, TrainableSubspace};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_vec(rng: &mut Rng, n: usize) -> ParamVector {
    (0..n).map(|_| rng.normal()).collect()
}

fn five_task_data(seed: u64) -> (NetworkSpec, Vec<TaskData>) {
    let ds = synth_gaussian_tasks(5, 2, 8, 30, 3.0, seed).unwrap();
    let split = split_tasks(&ds, 5, 2, 0.25, seed + 1).unwrap();
    let spec = NetworkSpec {
        input_dim: 8,
        block_widths: vec![10, 10, 10, 10],
        num_tasks: 5,
        classes_per_task: 2,
    };
    (spec, TaskData::from_split(&split, &ds, &ds))
}

fn run_config(spec: &NetworkSpec, k: usize, method: MethodKind) -> RunConfig {
    RunConfig {
        network: spec.clone(),
        k_blocks: k,
        method,
        method_hyper: MethodHyper {
            gem_memory_per_task: 16,
            ..MethodHyper::default()
        },
        order: TaskOrder {
            order_id: 0,
            tasks: vec![3, 0, 4, 1, 2],
            canonical: false,
        },
        train: TrainHyper {
            eta: 0.05,
            epochs_per_task: 2,
            batch_size: 8,
        },
        stream_seed: 11,
        cell_seed: 12 + k as u64,
    }
}

// 1 ------------------------------------------------------------------------

fn descent_bound() -> Verdict {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_regime-lab"))
        .args(["bound-check", "--trials", "1000", "--seed", "1"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success(), || format!("exit {:?}: {stdout}", out.status.code()))?;
    ensure(stdout.lines().any(|l| l == "violations: 0"), || format!("output: {stdout}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    let boundary = regime_lab::verifier::fuzz_descent_with(1000, 12, 2, regime_lab::verifier::StepSizeMode::Boundary)
        .map_err(|e| e.to_string())?;
    ensure(boundary.violations == 0, || format!("{} violations at eta = 1/L", boundary.violations))?;
    Ok(format!(
        "1000 trials, 0 violations ({:.2}s); eta = 1/L: 0 of 1000",
        elapsed.as_secs_f64()
    ))
}

// 2 ------------------------------------------------------------------------

fn projector_algebra() -> Verdict {
    let mut rng = Rng::new(2);
    let mut worst_identity = 0.0f64;
    for i in 0..10_000 {
        let d = 1 + rng.below(64) as usize;
        let p = rng.uniform();
        let mask: Vec<bool> = (0..d).map(|_| rng.bernoulli(p)).collect();
        let sub = TrainableSubspace::from_mask(mask, "random");
        let v = random_vec(&mut rng, d);
        let pv = sub.project(&v).unwrap();
        let ppv = sub.project(&pv).unwrap();
        ensure(ppv == pv, || format!("vector {i}: P(Pv) != Pv"))?;
        let lhs = v.dot(&pv);
        let rhs = pv.norm_sq();
        let rel = (lhs - rhs).abs() / rhs.max(1e-300);
        if rhs > 0.0 {
            worst_identity = worst_identity.max(rel);
        }
        ensure(lhs == 0.0 && rhs == 0.0 || rel <= 1e-12, || format!("vector {i}: <v,Pv> = {lhs}, |Pv|^2 = {rhs}"))?;
        ensure(pv.norm() <= v.norm(), || format!("vector {i}: |Pv| > |v|"))?;
        for (j, (&a, &b)) in v.iter().zip(pv.iter()).enumerate() {
            let expect = if sub.is_trainable(j) { a } else { 0.0 };
            ensure(b == expect, || format!("vector {i}: coordinate {j} not masked"))?;
        }
    }
    Ok(format!("10000 vectors: idempotent, contraction, identity rel err max {worst_identity:.1e}"))
}

// 3 ------------------------------------------------------------------------

/// Max coordinate-wise relative error over coordinates where either value
/// exceeds 1e-8 in magnitude.
fn max_rel_err(a: &ParamVector, b: &ParamVector) -> f64 {
    a.iter()
        .zip(b.iter())
        .filter(|(x, y)| x.abs() > 1e-8 || y.abs() > 1e-8)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

fn gradient_correctness() -> Verdict {
    let started = Instant::now();
    let mut rng = Rng::new(3);
    let spec = NetworkSpec {
        input_dim: 8,
        block_widths: vec![12, 12, 12],
        num_tasks: 3,
        classes_per_task: 2,
    };
    let mut net = Network::init(spec.clone(), 30).unwrap();
    ensure(net.num_params() <= 500, || format!("d = {}", net.num_params()))?;
    // biases start at zero, which can put a sample exactly on a relu kink
    for p in net.params_mut().iter_mut() {
        *p += 0.1 * rng.normal();
    }
    let d = net.num_params();
    let batch = |rng: &mut Rng, task: usize| {
        let x = Array2::from_shape_fn((16, 8), |_| rng.normal());
        let y = (0..16).map(|_| rng.below(2) as usize).collect();
        Batch::new(x, y, task).unwrap()
    };
    let mut worst = BTreeMap::new();

    for task in 0..3 {
        let b = batch(&mut rng, task);
        let (_, g) = net.task_loss_and_grad(&b).unwrap();
        let fd = finite_diff_gradient(&net, &b, 1e-6).unwrap();
        let e: f64 = max_rel_err(&g, &fd);
        let w = worst.entry("task loss").or_insert(0.0f64);
        *w = w.max(e);
    }

    let theta = net.params().clone();
    let mut ewc = EwcState::new(d, 0.9, 1.3).unwrap();
    let fisher: ParamVector = (0..d).map(|_| rng.uniform()).collect();
    let anchor = random_vec(&mut rng, d);
    ewc.consolidate_with(&fisher, &anchor).unwrap();
    let g = ewc.penalty_gradient(&theta).unwrap();
    let fd = central_difference(&theta, 1e-6, |t| ewc.penalty(&ParamVector::from(t.to_vec())).unwrap());
    worst.insert("ewc", max_rel_err(&g, &fd));

    let mut si = SiState::new(anchor.clone(), 0.1, 0.7).unwrap();
    for _ in 0..5 {
        let step = random_vec(&mut rng, d).scaled(0.01);
        let grad = random_vec(&mut rng, d);
        si.accumulate_step(&grad, &step).unwrap();
    }
    si.consolidate(&random_vec(&mut rng, d)).unwrap();
    let g = si.penalty_gradient(&theta).unwrap();
    let fd = central_difference(&theta, 1e-6, |t| si.penalty(&ParamVector::from(t.to_vec())).unwrap());
    worst.insert("si", max_rel_err(&g, &fd));

    let mut teacher = net.clone();
    for p in teacher.params_mut().iter_mut() {
        *p += 0.2 * rng.normal();
    }
    let mut lwf = LwfState::new(2.0, 1.0).unwrap();
    lwf.snapshot(&teacher, 0);
    lwf.snapshot(&teacher, 1);
    let x = Array2::from_shape_fn((16, 8), |_| rng.normal());
    let (_, g) = lwf.distill_gradient(&net, &x).unwrap();
    let mut probe = net.clone();
    let fd = central_difference(&theta, 1e-6, |t| {
        probe.params_mut().copy_from_slice(t);
        lwf.distill_gradient(&probe, &x).unwrap().0
    });
    worst.insert("lwf", max_rel_err(&g, &fd));

    let elapsed = started.elapsed();
    let summary: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    for (k, v) in &worst {
        ensure(*v <= 1e-4, || format!("{k}: max rel err {v:.3e}"))?;
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("d = {d}; max rel err: {} ({:.2}s)", summary.join(", "), elapsed.as_secs_f64()))
}

// 4 ------------------------------------------------------------------------

fn frozen_invariance() -> Verdict {
    let (spec, tasks) = five_task_data(40);
    let mut runs = 0;
    for k in 1..=spec.num_blocks() {
        for kind in MethodKind::ALL {
            let cfg = run_config(&spec, k, kind);
            let mut net = Network::init(spec.clone(), 41).unwrap();
            let initial = net.params().clone();
            let sub = TrainableSubspace::depth_regime(&net, k).unwrap();
            let mut method = Method::new(kind, &cfg.method_hyper, &net).unwrap();
            let mut moved_trainable = false;
            for (pos, &t) in cfg.order.tasks.iter().enumerate() {
                let data = &tasks[t];
                train_task(&mut net, &mut method, &sub, &data.train, &cfg.train, 100 + pos as u64, pos)
                    .map_err(|e| e.to_string())?;
                method
                    .end_task(&net, std::slice::from_ref(&data.train), 200 + pos as u64)
                    .map_err(|e| e.to_string())?;
                let max_frozen = sub
                    .frozen_indices()
                    .map(|i| (net.params()[i] - initial[i]).abs())
                    .fold(0.0, f64::max);
                ensure(max_frozen == 0.0, || {
                    format!("{} {kind} task {pos}: frozen coordinates moved by {max_frozen:e}", sub.label())
                })?;
                moved_trainable |= net.params().max_abs_diff(&initial) > 0.0;
            }
            ensure(moved_trainable, || format!("{} {kind}: nothing trained", sub.label()))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} five-task runs (4 regimes x 4 methods): max |dtheta| on frozen = 0"))
}

// 5 ------------------------------------------------------------------------

fn decomposition_identity() -> Verdict {
    let (spec, tasks) = five_task_data(50);
    let mut worst = 0.0f64;
    let mut steps = 0;
    for k in [1, 2, 4] {
        for kind in MethodKind::ALL {
            let result = run_sequence(&run_config(&spec, k, kind), &tasks).map_err(|e| e.to_string())?;
            for s in &result.steps {
                worst = worst.max(s.decomposition_error());
                steps += 1;
            }
            let with_r = result.steps.iter().filter(|s| s.norm_r > 0.0).count();
            ensure(with_r > 0, || format!("{kind} k={k}: preservation signal never active"))?;
        }
    }
    ensure(worst <= 1e-10, || format!("max rel err {worst:e}"))?;
    Ok(format!("{steps} steps, max rel err {worst:.1e}"))
}

// 6 ------------------------------------------------------------------------

fn gem_constraints() -> Verdict {
    let (spec, tasks) = five_task_data(60);
    let mut min_dot = f64::INFINITY;
    let mut checked = 0;
    for k in [1, 2, 4] {
        let result = run_sequence(&run_config(&spec, k, MethodKind::Gem), &tasks).map_err(|e| e.to_string())?;
        for s in &result.steps {
            if let Some(m) = s.gem_min_constraint {
                min_dot = min_dot.min(m);
                checked += 1;
            }
        }
    }
    ensure(checked > 0, || "no constrained steps".into())?;
    ensure(min_dot >= -1e-8, || format!("min <g~, g_k> = {min_dot:e}"))?;

    let mut rng = Rng::new(6);
    let mut worst = 0.0f64;
    let mut active = 0;
    for _ in 0..1000 {
        let d = 2 + rng.below(40) as usize;
        let g = random_vec(&mut rng, d);
        let r = random_vec(&mut rng, d);
        let proj = gem_project(&g, std::slice::from_ref(&r), 0.0).map_err(|e| e.to_string())?;
        let gr = g.dot(&r);
        let expected = if gr < 0.0 {
            active += 1;
            let mut e = g.clone();
            e.axpy(-gr / r.norm_sq(), &r);
            e
        } else {
            g.clone()
        };
        worst = worst.max(proj.gradient.max_abs_diff(&expected));
    }
    ensure(worst <= 1e-9, || format!("closed form max abs diff {worst:e}"))?;
    Ok(format!(
        "{checked} constrained steps, min <g~, g_k> = {min_dot:.2e}; single constraint ({active} active of 1000) max diff {worst:.1e}"
    ))
}

// 7 ------------------------------------------------------------------------

/// Tau-b from explicit concordant / discordant / one-sided-tie counts.
fn tau_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                (false, false) if (dx > 0.0) == (dy > 0.0) => c += 1,
                _ => d += 1,
            }
        }
    }
    let denom = (((c + d + ty) * (c + d + tx)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

fn all_assignments(n: usize, levels: usize) -> Vec<Vec<f64>> {
    let total = levels.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let v = code % levels;
                    code /= levels;
                    v as f64
                })
                .collect()
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn kendall_oracle() -> Verdict {
    let mut compared = 0u64;
    let mut undefined = 0u64;
    for n in 2..=5 {
        let values = all_assignments(n, n);
        for x in &values {
            for y in &values {
                let got = kendall_tau_values(x, y).ok();
                let want = tau_oracle(x, y);
                match (got, want) {
                    (Some(a), Some(b)) => ensure(a == b, || format!("x={x:?} y={y:?}: {a} vs {b}"))?,
                    (None, None) => undefined += 1,
                    _ => return Err(format!("x={x:?} y={y:?}: defined-ness differs ({got:?} vs {want:?})")),
                }
                compared += 1;
            }
        }
        // tie-free path through labelled rankings
        let labels: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let base: BTreeMap<String, f64> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i as f64)).collect();
        let base_rank = rank_methods(&base).unwrap();
        for perm in permutations(n) {
            let scores: BTreeMap<String, f64> = labels.iter().zip(&perm).map(|(l, &p)| (l.clone(), p as f64)).collect();
            let r = rank_methods(&scores).unwrap();
            let got = kendall_tau(&base_rank, &r).unwrap();
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let y: Vec<f64> = perm.iter().map(|&p| p as f64).collect();
            ensure(Some(got) == tau_oracle(&x, &y), || format!("perm {perm:?}"))?;
            compared += 1;
        }
        let reversed: BTreeMap<String, f64> = labels.iter().enumerate().map(|(i, l)| (l.clone(), -(i as f64))).collect();
        ensure(kendall_tau(&base_rank, &base_rank).unwrap() == 1.0, || "tau(identity) != 1".into())?;
        ensure(
            kendall_tau(&base_rank, &rank_methods(&reversed).unwrap()).unwrap() == -1.0,
            || "tau(reverse) != -1".into(),
        )?;
    }
    Ok(format!("{compared} pairs exact (n <= 5, with ties), {undefined} all-tie cases undefined in both"))
}

// 8 ------------------------------------------------------------------------

fn metrics_oracle() -> Verdict {
    let mut rng = Rng::new(8);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let t = 2 + rng.below(7) as usize;
        // coarse grid so that ties and repeated peaks occur
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|i| (0..=i).map(|_| rng.below(21) as f64 / 20.0).collect())
            .collect();
        let m = AccuracyMatrix::from_rows(rows.clone()).unwrap();

        let acc_direct = rows[t - 1].iter().sum::<f64>() / t as f64;
        let mut f_written = 0.0;
        let mut f_before = 0.0;
        for i in 0..t - 1 {
            let mut peak_all = f64::NEG_INFINITY;
            let mut peak_before = f64::NEG_INFINITY;
            for (r, row) in rows.iter().enumerate().skip(i) {
                peak_all = peak_all.max(row[i]);
                if r < t - 1 {
                    peak_before = peak_before.max(row[i]);
                }
            }
            f_written += peak_all - rows[t - 1][i];
            f_before += peak_before - rows[t - 1][i];
        }
        f_written /= (t - 1) as f64;
        f_before /= (t - 1) as f64;

        let acc = average_accuracy(&m).unwrap();
        let fw = average_forgetting(&m, ForgettingConvention::AsWritten).unwrap();
        let fb = average_forgetting(&m, ForgettingConvention::PeakBeforeFinal).unwrap();
        for (got, want) in [(acc, acc_direct), (fw, f_written), (fb, f_before)] {
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-12, || format!("matrix {trial}: {got} vs {want}"))?;
        }
        ensure((0.0..=1.0).contains(&fw), || format!("matrix {trial}: as-written forgetting {fw} outside [0, 1]"))?;
        ensure((0.0..=1.0).contains(&acc), || format!("matrix {trial}: accuracy {acc}"))?;
        ensure(fb <= fw, || format!("matrix {trial}: peak-before-final exceeds as-written"))?;
    }
    let improving = AccuracyMatrix::from_rows(vec![vec![0.5], vec![0.9, 0.8]]).unwrap();
    let fw = average_forgetting(&improving, ForgettingConvention::AsWritten).unwrap();
    let fb = average_forgetting(&improving, ForgettingConvention::PeakBeforeFinal).unwrap();
    ensure(fw == 0.0 && (fb + 0.4).abs() < 1e-15, || format!("convention flag: {fw}, {fb}"))?;
    Ok(format!("1000 matrices, max abs err {worst:.1e}; flag: improving task gives 0 vs -0.4"))
}

// 9-11 ---------------------------------------------------------------------

struct Protocol {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

fn run_protocol() -> Result<Protocol, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic.toml");
    let cfg = parse_config(&std::fs::read_to_string(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let out = run_matrix(
        &cfg,
        &RunOptions {
            output_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    emit_reports(dir.path()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(out.manifest.count(CellStatus::Done) == out.manifest.cells.len(), || {
        format!("{} of {} cells done", out.manifest.count(CellStatus::Done), out.manifest.cells.len())
    })?;
    Ok(Protocol { dir, elapsed })
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn protocol_shape(p: &Protocol) -> Verdict {
    let dir = p.dir.path();
    for f in ["summary.csv", "tau_matrix.csv", "grad_forget.csv"] {
        ensure(dir.join(f).is_file(), || format!("{f} missing"))?;
    }
    let summary = read_csv(&dir.join("summary.csv"));
    ensure(summary.len() == 12, || format!("summary has {} rows", summary.len()))?;
    ensure(summary.iter().all(|r| r["n_orders"] == "11"), || "n_orders != 11".into())?;
    let regimes: Vec<&str> = summary.iter().take(3).map(|r| r["regime"].as_str()).collect();
    ensure(regimes == ["last_1", "last_2", "full"], || format!("regimes {regimes:?}"))?;

    let tau = read_csv(&dir.join("tau_matrix.csv"));
    let mut offdiag = Vec::new();
    for row in &tau {
        for col in ["last_1", "last_2", "full"] {
            let v: f64 = row[col].parse().map_err(|_| format!("tau {} {col} = {}", row["regime"], row[col]))?;
            if row["regime"] == col {
                ensure(v == 1.0, || format!("diagonal {col} = {v}"))?;
            } else {
                ensure((-1.0..=1.0).contains(&v), || format!("tau {} {col} = {v}", row["regime"]))?;
                offdiag.push(v);
            }
        }
    }
    ensure(p.elapsed < Duration::from_secs(300), || format!("took {:?}", p.elapsed))?;
    Ok(format!(
        "132 cells in {:.1}s; tau diagonal 1, off-diagonal {:?}",
        p.elapsed.as_secs_f64(),
        offdiag.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
    ))
}

fn directional(p: &Protocol) -> Verdict {
    let runs = read_csv(&p.dir.path().join("plotdata/runs.csv"));
    let mut per_order: BTreeMap<usize, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r["method"] == "lwf") {
        per_order.entry(r["order_id"].parse().unwrap()).or_default().insert(
            r["k_blocks"].parse().unwrap(),
            (r["mean_grad_norm"].parse().unwrap(), r["avg_forget"].parse().unwrap()),
        );
    }
    ensure(per_order.len() == 11, || format!("{} lwf orders", per_order.len()))?;
    let (mut grad_ok, mut forget_ok, mut both) = (0, 0, 0);
    for regimes in per_order.values() {
        let grads: Vec<f64> = regimes.values().map(|v| v.0).collect();
        let g = grads.windows(2).all(|w| w[0] <= w[1]);
        let shallow = regimes.values().next().unwrap().1;
        let deep = regimes.values().last().unwrap().1;
        let f = deep >= shallow;
        grad_ok += g as usize;
        forget_ok += f as usize;
        both += (g && f) as usize;
    }
    let detail = format!(
        "lwf orders with grad non-decreasing in depth: {grad_ok}/11, forgetting full >= last_1: {forget_ok}/11, both: {both}/11"
    );
    ensure(grad_ok >= 8 && forget_ok >= 8, || detail.clone())?;
    Ok(detail)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "plotdata"] {
        let mut entries: Vec<_> = std::fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.extension().is_some_and(|e| e == "csv") {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&path).unwrap()));
            }
        }
    }
    out
}

fn determinism(first: &Protocol) -> Verdict {
    let second = run_protocol()?;
    let a = csv_files(first.dir.path());
    let b = csv_files(second.dir.path());
    ensure(a.len() >= 6, || format!("only {} csv files", a.len()))?;
    ensure(a.iter().map(|f| &f.0).eq(b.iter().map(|f| &f.0)), || "file sets differ".into())?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} csv files byte-identical across two runs", a.len()))
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, verdict: Verdict| {
        match &verdict {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    };
    report(1, "descent bound", descent_bound());
    report(2, "projector algebra", projector_algebra());
    report(3, "gradient correctness", gradient_correctness());
    report(4, "frozen-coordinate invariance", frozen_invariance());
    report(5, "update decomposition identity", decomposition_identity());
    report(6, "GEM constraints", gem_constraints());
    report(7, "Kendall tau oracle", kendall_oracle());
    report(8, "metrics oracle", metrics_oracle());
    match run_protocol() {
        Ok(p) => {
            report(9, "protocol shape", protocol_shape(&p));
            report(10, "depth direction (LwF)", directional(&p));
            report(11, "determinism", determinism(&p));
        }
        Err(e) => {
            for (n, name) in [(9, "protocol shape"), (10, "depth direction (LwF)"), (11, "determinism")] {
                report(n, name, Err(format!("protocol run failed: {e}")));
            }
        }
    }
    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 11 criteria passed");
}
