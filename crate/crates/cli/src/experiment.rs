use crate::config::{ExperimentConfig, Metric};
use crate::predict::{adjusted_samples, assemble_basis, PredictionBasis};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use vsnash::analysis::{
    self, fit_rate, fixed_point_residual, ground_truth_ne, FitRegime, GroundTruthMode, RateFit,
};
use vsnash::cournot::CournotInstance;
use vsnash::graph::GraphAudit;
use vsnash::schedules::{predict_complexity, BatchSchedule, Regime};
use vsnash::solvers::{run_scheme, RunStatus, RunTrace, Scheme};
use vsnash::{Error, Result};

/// One merged trace row: `mse` is the pointwise mean across replications,
/// `rel_err` is mean ‖x_k − x*‖ over replications divided by ‖x*‖ (norms are
/// averaged before dividing), counter columns are the shared deterministic
/// schedule totals, `tracker_dev` keeps the worst replication.
#[derive(Clone, Debug, Serialize)]
pub struct AveragedRow {
    pub k: u64,
    pub mse: f64,
    pub rel_err: Option<f64>,
    pub consensus_err: Option<f64>,
    pub tracker_dev: Option<f64>,
    pub prox_evals: u64,
    pub samples: u64,
    pub comm_rounds: u64,
    pub inner_solves: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CounterTotals {
    pub prox_evals: u64,
    pub samples: u64,
    pub comm_rounds: u64,
    pub inner_solves: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundTruthInfo {
    pub x: Vec<f64>,
    pub norm: f64,
    pub fixed_point_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub eps: f64,
    pub reached: bool,
    pub empirical_k: Option<u64>,
    pub empirical_samples_per_player: Option<f64>,
    pub empirical_comm: Option<u64>,
    pub bound_k: f64,
    pub bound_samples_per_player: f64,
    pub bound_comm: Option<f64>,
    pub regime: Regime,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Set when the rate-statement constants could not be assembled for this
    /// configuration (for example a step size outside the statement's range);
    /// rows are then empty.
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExperimentSummary {
    pub scheme: Scheme,
    pub config: ExperimentConfig,
    pub graph: Option<GraphAudit>,
    pub ground_truth: GroundTruthInfo,
    pub replications: u64,
    pub statuses: Vec<RunStatus>,
    pub rows: Vec<AveragedRow>,
    pub final_mse: f64,
    pub final_rel_err: Option<f64>,
    pub final_counters: CounterTotals,
    pub max_tracker_dev: Option<f64>,
    pub rate_fit: Option<RateFit>,
    pub comparison: Option<ComparisonReport>,
    pub metric: Metric,
    pub metric_final: f64,
    pub wall_clock_secs: f64,
}

fn worker_count() -> Result<usize> {
    match std::env::var("VSNASH_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!(
                "VSNASH_WORKERS must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Pointwise merge across replications, truncated to the shortest trace.
/// Counter columns must agree across replications (schedules are
/// deterministic); a mismatch means a solver bug, not noise.
fn merge_traces(traces: &[RunTrace], x_star_norm: f64) -> Result<Vec<AveragedRow>> {
    let min_len = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let reps = traces.len() as f64;
    let mut rows = Vec::with_capacity(min_len);
    for k in 0..min_len {
        let base = &traces[0].records[k];
        let mut mse_sum = 0.0;
        let mut norm_sum = 0.0;
        let mut consensus_sum = 0.0;
        let mut tracker_max: Option<f64> = None;
        for t in traces {
            let r = &t.records[k];
            if r.prox_evals != base.prox_evals
                || r.samples != base.samples
                || r.comm_rounds != base.comm_rounds
                || r.inner_solves != base.inner_solves
            {
                return Err(Error::Domain(
                    "replication counters disagree; schedules must be deterministic".into(),
                ));
            }
            let mse = r.mse.unwrap_or(f64::NAN);
            mse_sum += mse;
            norm_sum += mse.sqrt();
            consensus_sum += r.consensus_err.unwrap_or(0.0);
            if let Some(d) = r.tracker_dev {
                tracker_max = Some(tracker_max.map_or(d, |m: f64| m.max(d)));
            }
        }
        let rel_err = (!traces[0].mse_is_residual && x_star_norm > 0.0)
            .then(|| norm_sum / reps / x_star_norm);
        rows.push(AveragedRow {
            k: base.k,
            mse: mse_sum / reps,
            rel_err,
            consensus_err: base.consensus_err.map(|_| consensus_sum / reps),
            tracker_dev: tracker_max,
            prox_evals: base.prox_evals,
            samples: base.samples,
            comm_rounds: base.comm_rounds,
            inner_solves: base.inner_solves,
        });
    }
    Ok(rows)
}

/// Empirical iteration/oracle/communication counts at each accuracy level
/// next to the corresponding closed-form bounds. `violated` is only raised
/// when the level was reached and an empirical count exceeds its bound.
pub fn compare_complexity(
    rows: &[AveragedRow],
    n_players: usize,
    basis: &PredictionBasis,
    eps_list: &[f64],
) -> Result<ComparisonReport> {
    let mse: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pred = predict_complexity(&basis.params, eps)?;
        let bound_m = adjusted_samples(&pred, basis.sample_scale);
        let hit = analysis::epsilon_ne_index(&mse, eps);
        let (reached, emp_k, emp_m, emp_comm, violated) = match hit {
            None => (false, None, None, None, false),
            Some(idx) => {
                let row = &rows[idx];
                let per_player = row.samples as f64 / n_players as f64;
                let comm = row.comm_rounds;
                let mut violated = row.k as f64 > pred.k_eps.ceil() || per_player > bound_m.ceil();
                if let Some(bc) = pred.comm_eps {
                    violated = violated || comm as f64 > bc.ceil();
                }
                (true, Some(row.k), Some(per_player), Some(comm), violated)
            }
        };
        out.push(ComparisonRow {
            eps,
            reached,
            empirical_k: emp_k,
            empirical_samples_per_player: emp_m,
            empirical_comm: emp_comm,
            bound_k: pred.k_eps,
            bound_samples_per_player: bound_m,
            bound_comm: pred.comm_eps,
            regime: pred.regime,
            violated,
        });
    }
    Ok(ComparisonReport { rows: out, note: None })
}

fn fit_for_schedule(batch: &BatchSchedule, rows: &[AveragedRow]) -> Option<RateFit> {
    let regime = match batch {
        BatchSchedule::Polynomial { .. } => FitRegime::Polynomial,
        BatchSchedule::Constant { .. } => return None,
        _ => FitRegime::Linear,
    };
    let mse: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    fit_rate(&mse, regime, None).ok()
}

/// Run every replication, merge, and assemble the summary. No files are
/// touched; `run_experiment` adds the artifact stage.
pub fn execute(cfg: &ExperimentConfig) -> Result<(ExperimentSummary, CournotInstance)> {
    let start = Instant::now();
    let scheme = cfg.scheme_kind()?;
    let (game, inst) = cfg.build_instance()?;
    let graph = cfg.build_graph()?;
    if cfg.is_distributed()? && graph.is_none() {
        return Err(Error::Config(format!(
            "scheme.kind={} needs a [graph] section",
            cfg.scheme.kind
        )));
    }
    let mut base = cfg.solver_config()?;

    // surface contraction/monotonicity failures before any replication runs
    match scheme {
        Scheme::VsPgr | Scheme::DVsPgr => {
            if game.monotonicity.is_none() {
                return Err(Error::Precondition(
                    "gradient schemes need monotonicity constants (eta, L)".into(),
                ));
            }
        }
        Scheme::VsPbr | Scheme::DVsPbr => {
            if !base.contraction_override {
                let report = analysis::gamma_matrix(&game, base.mu)?;
                if !report.contractive {
                    return Err(Error::Precondition(format!(
                        "best-response map is not a contraction (|Gamma|_inf = {:.6}); \
                         set scheme.contraction_override to run anyway",
                        report.a_inf
                    )));
                }
            }
        }
    }

    let x_star = ground_truth_ne(&game, GroundTruthMode::FixedPoint, cfg.ground_truth_tol())?;
    let residual = fixed_point_residual(&game, &x_star)?;
    let gt_info = GroundTruthInfo {
        x: x_star.as_slice().to_vec(),
        norm: x_star.norm(),
        fixed_point_residual: residual,
    };
    base.ground_truth = Some(x_star.clone());

    let reps = cfg.replications();
    let base_seed = cfg.base_seed();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let traces: Vec<RunTrace> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut c = base.clone();
                c.seed = base_seed + r;
                run_scheme(scheme, &game, graph.as_ref(), &c)
            })
            .collect::<Result<_>>()
    })?;

    let rows = merge_traces(&traces, gt_info.norm)?;
    let last = rows.last().ok_or_else(|| Error::Domain("no trace rows produced".into()))?;
    let final_counters = CounterTotals {
        prox_evals: last.prox_evals,
        samples: last.samples,
        comm_rounds: last.comm_rounds,
        inner_solves: last.inner_solves,
    };
    let final_mse = last.mse;
    let final_rel_err = last.rel_err;
    let max_tracker_dev = rows.iter().filter_map(|r| r.tracker_dev).fold(None, |m, d| {
        Some(match m {
            None => d,
            Some(v) => f64::max(v, d),
        })
    });
    let rate_fit = fit_for_schedule(&cfg.batch_schedule()?, &rows);

    let comparison = match &cfg.compare {
        None => None,
        Some(cmp) => {
            let x0 = base.x0.clone().unwrap_or_else(|| analysis::default_start(&game));
            match assemble_basis(
                scheme,
                &game,
                &inst,
                graph.as_ref(),
                &base.batch,
                cfg.scheme.alpha,
                cfg.scheme.mu,
                &x0,
                &x_star,
            ) {
                Ok(basis) => Some(compare_complexity(&rows, game.n_players(), &basis, &cmp.eps)?),
                Err(e) => Some(ComparisonReport { rows: vec![], note: Some(e.to_string()) }),
            }
        }
    };

    let metric = cfg.metric()?;
    let metric_final = match metric {
        Metric::Mse => final_mse,
        Metric::RelativeError => final_rel_err.unwrap_or(f64::NAN),
    };
    let summary = ExperimentSummary {
        scheme,
        config: cfg.clone(),
        graph: graph.as_ref().map(|g| g.audit()),
        ground_truth: gt_info,
        replications: reps,
        statuses: traces.iter().map(|t| t.status.clone()).collect(),
        rows,
        final_mse,
        final_rel_err,
        final_counters,
        max_tracker_dev,
        rate_fit,
        comparison,
        metric,
        metric_final,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((summary, inst))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn write_trace_csv(path: &Path, rows: &[AveragedRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["k", "mse", "rel_err", "consensus_err", "prox_evals", "samples", "comm_rounds", "inner_solves"])
        .map_err(|e| io_err(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.mse.to_string(),
            opt(r.rel_err),
            opt(r.consensus_err),
            r.prox_evals.to_string(),
            r.samples.to_string(),
            r.comm_rounds.to_string(),
            r.inner_solves.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_artifacts(dir: &Path, summary: &ExperimentSummary, inst: &CournotInstance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_trace_csv(&dir.join("trace.csv"), &summary.rows)?;
    write_json(&dir.join("summary.json"), summary)?;
    write_json(&dir.join("instance.json"), inst)
}

fn first_divergence(statuses: &[RunStatus]) -> Result<()> {
    for (r, status) in statuses.iter().enumerate() {
        if let RunStatus::Diverged { at_iter, reason } = status {
            return Err(Error::Divergence(format!(
                "replication {r} diverged at iteration {at_iter}: {reason}"
            )));
        }
    }
    Ok(())
}

/// Full artifact run: execute, then write `trace.csv`, `summary.json` and
/// `instance.json` into the output directory. A diverged replication still
/// produces all three files, then surfaces as an error so the exit code
/// reflects it.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<(ExperimentSummary, PathBuf)> {
    let dir: PathBuf = match out_override {
        Some(p) => p.to_path_buf(),
        None => cfg.run.out_dir.as_deref().unwrap_or(".").into(),
    };
    let (summary, inst) = execute(cfg)?;
    write_artifacts(&dir, &summary, &inst)?;
    first_divergence(&summary.statuses)?;
    Ok((summary, dir))
}
