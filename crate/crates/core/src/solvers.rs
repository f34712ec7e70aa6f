use crate::analysis;
use crate::error::{Error, Result};
use crate::game::{
    draw_noise_samples, sampled_gradient_player, GameSpec, NoiseModel, SampleSet,
};
use crate::graph::{consensus_step, max_row_deviation, WeightedGraph};
use crate::profile::StrategyProfile;
use crate::prox::{prox_profile, ProxOperator};
use crate::schedules::{BatchSchedule, CommSchedule};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    VsPgr,
    DVsPgr,
    VsPbr,
    DVsPbr,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vs_pgr" => Ok(Scheme::VsPgr),
            "d_vs_pgr" => Ok(Scheme::DVsPgr),
            "vs_pbr" => Ok(Scheme::VsPbr),
            "d_vs_pbr" => Ok(Scheme::DVsPbr),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected vs_pgr|d_vs_pgr|vs_pbr|d_vs_pbr)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::VsPgr => "vs_pgr",
            Scheme::DVsPgr => "d_vs_pgr",
            Scheme::VsPbr => "vs_pbr",
            Scheme::DVsPbr => "d_vs_pbr",
        };
        f.write_str(s)
    }
}

/// Settings for the deterministic sample-average best-response subproblems.
/// `exact_qp` short-circuits the iterative solve when the subproblem is a
/// separable quadratic (quad_diag present and noise handled in mean form);
/// it exists so tests have an independent oracle for the iterative path.
#[derive(Clone, Copy, Debug)]
pub struct InnerConfig {
    pub tol: f64,
    pub max_iters: u64,
    pub exact_qp: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig { tol: 1e-10, max_iters: 10_000, exact_qp: false }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Gradient-scheme step size.
    pub alpha: f64,
    /// Best-response proximal regularization.
    pub mu: f64,
    pub batch: BatchSchedule,
    /// Rounds schedule for the distributed schemes.
    pub comm: Option<CommSchedule>,
    pub max_iters: u64,
    pub seed: u64,
    /// Equilibrium for exact error tracking; without it traces log the
    /// squared fixed-point residual instead.
    pub ground_truth: Option<StrategyProfile>,
    pub inner: InnerConfig,
    /// Largest admissible per-player batch; schedules that outgrow it abort
    /// the run instead of silently clamping.
    pub batch_cap: u64,
    /// Stop once cumulative samples (all players) reach this; the crossing
    /// iteration completes.
    pub sample_budget: Option<u64>,
    pub x0: Option<StrategyProfile>,
    /// Run best-response schemes even when the contraction check fails or
    /// cannot be evaluated.
    pub contraction_override: bool,
    /// Iterate snapshots every this many rows; None picks ⌈max_iters/200⌉,
    /// Some(0) disables.
    pub snapshot_stride: Option<u64>,
}

impl SolverConfig {
    pub fn gradient(alpha: f64, batch: BatchSchedule, max_iters: u64, seed: u64) -> Self {
        SolverConfig {
            alpha,
            mu: 0.0,
            batch,
            comm: None,
            max_iters,
            seed,
            ground_truth: None,
            inner: InnerConfig::default(),
            batch_cap: 1_000_000,
            sample_budget: None,
            x0: None,
            contraction_override: false,
            snapshot_stride: None,
        }
    }

    pub fn best_response(mu: f64, batch: BatchSchedule, max_iters: u64, seed: u64) -> Self {
        let mut c = Self::gradient(0.0, batch, max_iters, seed);
        c.mu = mu;
        c
    }

    fn validate_common(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        self.batch.validate()?;
        if let Some(c) = &self.comm {
            c.validate()?;
        }
        Ok(())
    }

    fn validate_gradient(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("step size alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    fn validate_br(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("regularization mu must be positive, got {}", self.mu)));
        }
        if !(self.inner.tol > 0.0) || self.inner.max_iters < 1 {
            return Err(Error::Config("inner solver needs tol > 0 and max_iters >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RunStatus {
    MaxItersReached,
    BudgetExhausted,
    Diverged { at_iter: u64, reason: String },
}

/// State at iteration k plus resources consumed by iterations 0..k. The
/// consensus error belongs to iteration k itself (the mixing that produces
/// x_{k+1}), so the final row carries none.
#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub k: u64,
    pub mse: Option<f64>,
    pub consensus_err: Option<f64>,
    pub tracker_dev: Option<f64>,
    pub prox_evals: u64,
    pub samples: u64,
    pub comm_rounds: u64,
    pub inner_solves: u64,
    pub snapshot: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace {
    pub scheme: Scheme,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    pub final_x: StrategyProfile,
    /// True when `mse` holds squared fixed-point residuals because no ground
    /// truth was supplied.
    pub mse_is_residual: bool,
}

impl RunTrace {
    pub fn mse_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mse.unwrap_or(f64::NAN)).collect()
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace always has a row")
    }
}

#[derive(Default, Clone, Copy)]
struct Counters {
    prox_evals: u64,
    samples: u64,
    comm_rounds: u64,
    inner_solves: u64,
}

struct Recorder<'a> {
    game: &'a GameSpec,
    ground_truth: Option<&'a StrategyProfile>,
    residual_alpha: f64,
    stride: u64,
    records: Vec<IterRecord>,
}

impl<'a> Recorder<'a> {
    fn new(game: &'a GameSpec, cfg: &'a SolverConfig, residual_alpha: f64) -> Self {
        let stride = match cfg.snapshot_stride {
            Some(s) => s,
            None => cfg.max_iters.div_ceil(200),
        };
        Recorder {
            game,
            ground_truth: cfg.ground_truth.as_ref(),
            residual_alpha,
            stride,
            records: Vec::with_capacity(cfg.max_iters as usize + 1),
        }
    }

    fn error_at(&self, x: &StrategyProfile) -> f64 {
        match self.ground_truth {
            Some(star) => x.dist_sq(star),
            None => {
                let g = self.game.deterministic_gradient(x);
                let mut y = x.clone();
                y.axpy(-self.residual_alpha, &g);
                let res = x.dist(&prox_profile(self.game, &y, self.residual_alpha));
                res * res
            }
        }
    }

    fn push(
        &mut self,
        k: u64,
        x: &StrategyProfile,
        consensus_err: Option<f64>,
        tracker_dev: Option<f64>,
        c: Counters,
    ) {
        let snapshot = if self.stride > 0 && k % self.stride == 0 {
            Some(x.as_slice().to_vec())
        } else {
            None
        };
        self.records.push(IterRecord {
            k,
            mse: Some(self.error_at(x)),
            consensus_err,
            tracker_dev,
            prox_evals: c.prox_evals,
            samples: c.samples,
            comm_rounds: c.comm_rounds,
            inner_solves: c.inner_solves,
            snapshot,
        });
    }
}

fn start_point(game: &GameSpec, cfg: &SolverConfig) -> Result<StrategyProfile> {
    match &cfg.x0 {
        Some(x) => {
            if x.dims() != game.dims() {
                return Err(Error::Config("x0 does not match the game's block layout".into()));
            }
            Ok(x.clone())
        }
        None => Ok(analysis::default_start(game)),
    }
}

fn divergence_guard(game: &GameSpec) -> f64 {
    let diam_sq: f64 = game
        .players
        .iter()
        .filter_map(|p| p.domain.as_ref())
        .map(|(lo, hi)| lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())
        .sum();
    1e6 * diam_sq.sqrt().max(1.0)
}

fn check_divergence(x: &StrategyProfile, guard: f64, k: u64) -> Option<RunStatus> {
    if !x.is_finite() {
        return Some(RunStatus::Diverged {
            at_iter: k,
            reason: "iterate left the finite range".into(),
        });
    }
    let norm = x.norm();
    if norm > guard {
        return Some(RunStatus::Diverged {
            at_iter: k,
            reason: format!("iterate norm {norm:.3e} exceeded guard {guard:.3e}"),
        });
    }
    None
}

fn checked_batch(cfg: &SolverConfig, k: u64) -> Result<u64> {
    let s = cfg.batch.batch_size(k)?;
    if s > cfg.batch_cap {
        return Err(Error::Config(format!(
            "batch schedule wants {s} samples per player at iteration {k}, above the cap {}",
            cfg.batch_cap
        )));
    }
    Ok(s)
}

fn budget_hit(cfg: &SolverConfig, c: &Counters) -> bool {
    cfg.sample_budget.is_some_and(|b| c.samples >= b)
}

/// Residual convention for traces without ground truth: gradient schemes use
/// their own step, best-response schemes fall back to η/L² when available.
fn residual_alpha_br(game: &GameSpec) -> f64 {
    match game.monotonicity {
        Some((eta, l)) => eta / (l * l),
        None => 1.0,
    }
}

/// Centralized variance-reduced proximal gradient:
/// x_{k+1} = prox_{αr}[x_k − (α/S_k)·Σ_p sampled gradient].
pub fn vs_pgr(game: &GameSpec, cfg: &SolverConfig) -> Result<RunTrace> {
    game.validate()?;
    cfg.validate_gradient()?;
    let n = game.n_players();
    let guard = divergence_guard(game);
    let mut rec = Recorder::new(game, cfg, cfg.alpha);
    let mut x = start_point(game, cfg)?;
    let mut c = Counters::default();
    let mut g = StrategyProfile::zeros(&game.dims());
    let mut status = RunStatus::MaxItersReached;
    for k in 0..cfg.max_iters {
        if budget_hit(cfg, &c) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        rec.push(k, &x, None, None, c);
        let s_k = checked_batch(cfg, k)?;
        for i in 0..n {
            let mut rng = NoiseModel::stream(cfg.seed, i, k);
            c.samples += sampled_gradient_player(game, &x, i, None, s_k, &mut rng, g.block_mut(i))?;
        }
        let mut y = x.clone();
        y.axpy(-cfg.alpha, &g);
        x = prox_profile(game, &y, cfg.alpha);
        c.prox_evals += 1;
        if let Some(d) = check_divergence(&x, guard, k + 1) {
            status = d;
            break;
        }
    }
    let k_final = rec.records.len() as u64;
    rec.push(k_final, &x, None, None, c);
    Ok(RunTrace {
        scheme: Scheme::VsPgr,
        records: rec.records,
        status,
        final_x: x,
        mse_is_residual: cfg.ground_truth.is_none(),
    })
}

struct TrackerState {
    /// Row i holds player i's running average estimate v_i.
    v: DMatrix<f64>,
}

impl TrackerState {
    fn init(x: &StrategyProfile) -> Self {
        let n = x.n_players();
        let d = x.dim(0);
        TrackerState { v: DMatrix::from_fn(n, d, |i, j| x.block(i)[j]) }
    }

    /// ‖mean_i v_i − mean_i x_i‖; exactly zero in theory at every iteration.
    fn deviation_from_mean_strategy(&self, x: &StrategyProfile) -> f64 {
        let n = x.n_players() as f64;
        let d = x.dim(0);
        let mut acc = 0.0;
        for j in 0..d {
            let vm = self.v.column(j).sum() / n;
            let xm: f64 = (0..x.n_players()).map(|i| x.block(i)[j]).sum::<f64>() / n;
            acc += (vm - xm) * (vm - xm);
        }
        acc.sqrt()
    }
}

fn require_aggregative(game: &GameSpec) -> Result<()> {
    if !game.is_aggregative() {
        return Err(Error::Precondition(
            "distributed schemes need the aggregative oracle on every player with equal block sizes"
                .into(),
        ));
    }
    Ok(())
}

fn comm_schedule_of(cfg: &SolverConfig) -> Result<&CommSchedule> {
    cfg.comm
        .as_ref()
        .ok_or_else(|| Error::Config("distributed scheme needs a communication schedule".into()))
}

fn check_graph(game: &GameSpec, graph: &WeightedGraph) -> Result<()> {
    if graph.n != game.n_players() {
        return Err(Error::Config(format!(
            "graph has {} nodes but the game has {} players",
            graph.n,
            game.n_players()
        )));
    }
    Ok(())
}

/// Distributed variant: each player tracks the strategy average through τ_k
/// consensus rounds and substitutes n·v̂_i for the aggregate in its sampled
/// gradient; v_{i,k+1} = v̂_{i,k} + x_{i,k+1} − x_{i,k} keeps the mean exact.
pub fn d_vs_pgr(game: &GameSpec, graph: &WeightedGraph, cfg: &SolverConfig) -> Result<RunTrace> {
    game.validate()?;
    cfg.validate_gradient()?;
    require_aggregative(game)?;
    check_graph(game, graph)?;
    let comm = comm_schedule_of(cfg)?.clone();
    let n = game.n_players();
    let d = game.players[0].dim;
    let guard = divergence_guard(game);
    let mut rec = Recorder::new(game, cfg, cfg.alpha);
    let mut x = start_point(game, cfg)?;
    let mut tracker = TrackerState::init(&x);
    let mut c = Counters::default();
    let mut status = RunStatus::MaxItersReached;
    let mut grad = vec![0.0; d];
    let mut agg = vec![0.0; d];
    for k in 0..cfg.max_iters {
        if budget_hit(cfg, &c) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        let tau = comm.comm_rounds(k);
        let v_hat = consensus_step(&tracker.v, &graph.a, tau);
        let consensus_err = max_row_deviation(&v_hat);
        let tracker_dev = tracker.deviation_from_mean_strategy(&x);
        rec.push(k, &x, Some(consensus_err), Some(tracker_dev), c);
        c.comm_rounds += tau;
        let s_k = checked_batch(cfg, k)?;
        let x_prev = x.clone();
        for i in 0..n {
            for j in 0..d {
                agg[j] = n as f64 * v_hat[(i, j)];
            }
            let mut rng = NoiseModel::stream(cfg.seed, i, k);
            c.samples +=
                sampled_gradient_player(game, &x_prev, i, Some(&agg), s_k, &mut rng, &mut grad)?;
            let xi = x.block_mut(i);
            for j in 0..d {
                xi[j] -= cfg.alpha * grad[j];
            }
            let stepped: Vec<f64> = xi.to_vec();
            game.players[i].prox.eval(&stepped, cfg.alpha, xi);
        }
        c.prox_evals += 1;
        for i in 0..n {
            for j in 0..d {
                tracker.v[(i, j)] = v_hat[(i, j)] + x.block(i)[j] - x_prev.block(i)[j];
            }
        }
        if let Some(dv) = check_divergence(&x, guard, k + 1) {
            status = dv;
            break;
        }
    }
    let k_final = rec.records.len() as u64;
    let tracker_dev = tracker.deviation_from_mean_strategy(&x);
    rec.push(k_final, &x, None, Some(tracker_dev), c);
    Ok(RunTrace {
        scheme: Scheme::DVsPgr,
        records: rec.records,
        status,
        final_x: x,
        mse_is_residual: cfg.ground_truth.is_none(),
    })
}

/// Minimize the sample-average best-response subproblem
/// (1/S)Σ_p ψ_i(x_i, x_i + s; ξ_p) + r_i(x_i) + (μ/2)‖x_i − anchor‖²
/// by proximal gradient with step 1/(sub_lip + μ), warm-started at the
/// anchor, stopping when the prox-gradient displacement falls to `tol`.
/// Returns the minimizer and the inner iterations spent (0 for the exact
/// quadratic path).
pub fn solve_sample_average_br(
    game: &GameSpec,
    player: usize,
    interaction: &[f64],
    samples: &SampleSet,
    mu: f64,
    anchor: &[f64],
    inner: &InnerConfig,
) -> Result<(Vec<f64>, u64)> {
    let p = &game.players[player];
    let br = p
        .br
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("player {player} has no best-response data")))?;
    let dim = p.dim;
    if inner.exact_qp {
        let (quad, noise) = match (&br.quad_diag, samples) {
            (Some(q), SampleSet::Mean { noise, .. }) => (q, noise),
            (None, _) => {
                return Err(Error::Precondition(
                    "exact_qp needs a separable quadratic subproblem (quad_diag)".into(),
                ))
            }
            (_, SampleSet::All { .. }) => {
                return Err(Error::Precondition(
                    "exact_qp needs mean-form samples (linear_in_noise players)".into(),
                ))
            }
        };
        let zero = vec![0.0; dim];
        let mut g0 = vec![0.0; dim];
        (br.sub_grad)(&zero, interaction, noise, &mut g0);
        let mut out = vec![0.0; dim];
        for l in 0..dim {
            let target = mu * anchor[l] - g0[l];
            let scale = quad[l] + mu;
            out[l] = match &p.prox {
                ProxOperator::Box { lower, upper } => (target / scale).clamp(lower[l], upper[l]),
                ProxOperator::Nonneg => (target / scale).max(0.0),
                ProxOperator::Zero => target / scale,
                ProxOperator::L1 { weight } => {
                    target.signum() * (target.abs() - weight).max(0.0) / scale
                }
            };
        }
        return Ok((out, 0));
    }
    let step = 1.0 / (br.sub_lip + mu);
    let mut x = anchor.to_vec();
    let mut grad = vec![0.0; dim];
    let mut stepped = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    for it in 0..inner.max_iters {
        samples.average_into(|noise, out| (br.sub_grad)(&x, interaction, noise, out), &mut grad);
        for l in 0..dim {
            stepped[l] = x[l] - step * (grad[l] + mu * (x[l] - anchor[l]));
        }
        p.prox.eval(&stepped, step, &mut next);
        let moved: f64 = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut x, &mut next);
        if moved <= inner.tol {
            return Ok((x, it + 1));
        }
    }
    Err(Error::OracleFailure(format!(
        "best-response subproblem for player {player} missed tol {:.1e} in {} iterations",
        inner.tol, inner.max_iters
    )))
}

fn check_br_preconditions(game: &GameSpec, cfg: &SolverConfig) -> Result<()> {
    let d0 = game.players[0].dim;
    if game.players.iter().any(|p| p.dim != d0) {
        return Err(Error::Precondition(
            "best-response schemes need equal block dimensions".into(),
        ));
    }
    if game.players.iter().any(|p| p.br.is_none()) {
        return Err(Error::Precondition(
            "best-response schemes need subproblem data for every player".into(),
        ));
    }
    if !cfg.contraction_override {
        let report = analysis::gamma_matrix(game, cfg.mu).map_err(|e| {
            Error::Precondition(format!("contraction check impossible ({e}); set the override to proceed"))
        })?;
        if !report.contractive {
            return Err(Error::Precondition(format!(
                "best-response map is not a contraction (|Gamma|_inf = {:.6}); set the override to proceed",
                report.a_inf
            )));
        }
    }
    Ok(())
}

/// Synchronous proximal best response: at every iteration each player solves
/// its sample-average subproblem against the frozen rivals of x_k.
pub fn vs_pbr(game: &GameSpec, cfg: &SolverConfig) -> Result<RunTrace> {
    game.validate()?;
    cfg.validate_br()?;
    check_br_preconditions(game, cfg)?;
    let n = game.n_players();
    let d = game.players[0].dim;
    let guard = divergence_guard(game);
    let mut rec = Recorder::new(game, cfg, residual_alpha_br(game));
    let mut x = start_point(game, cfg)?;
    let mut c = Counters::default();
    let mut status = RunStatus::MaxItersReached;
    for k in 0..cfg.max_iters {
        if budget_hit(cfg, &c) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        rec.push(k, &x, None, None, c);
        let s_k = checked_batch(cfg, k)?;
        let z_all = x.sum_blocks();
        let mut new_blocks: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let s_i: Vec<f64> = (0..d).map(|j| z_all[j] - x.block(i)[j]).collect();
            let mut rng = NoiseModel::stream(cfg.seed, i, k);
            let samples = draw_noise_samples(game, i, s_k, &mut rng);
            c.samples += samples.count();
            let (xi, _) =
                solve_sample_average_br(game, i, &s_i, &samples, cfg.mu, x.block(i), &cfg.inner)?;
            c.inner_solves += 1;
            new_blocks.push(xi);
        }
        x = StrategyProfile::from_blocks(&new_blocks);
        if let Some(dv) = check_divergence(&x, guard, k + 1) {
            status = dv;
            break;
        }
    }
    let k_final = rec.records.len() as u64;
    rec.push(k_final, &x, None, None, c);
    Ok(RunTrace {
        scheme: Scheme::VsPbr,
        records: rec.records,
        status,
        final_x: x,
        mse_is_residual: cfg.ground_truth.is_none(),
    })
}

/// Distributed proximal best response: the subproblem sees the self-shifted
/// aggregate estimate x_i + (n·v̂_i − x_{i,k}); tracker updates as in the
/// gradient variant.
pub fn d_vs_pbr(game: &GameSpec, graph: &WeightedGraph, cfg: &SolverConfig) -> Result<RunTrace> {
    game.validate()?;
    cfg.validate_br()?;
    check_br_preconditions(game, cfg)?;
    require_aggregative(game)?;
    check_graph(game, graph)?;
    let comm = comm_schedule_of(cfg)?.clone();
    let n = game.n_players();
    let d = game.players[0].dim;
    let guard = divergence_guard(game);
    let mut rec = Recorder::new(game, cfg, residual_alpha_br(game));
    let mut x = start_point(game, cfg)?;
    let mut tracker = TrackerState::init(&x);
    let mut c = Counters::default();
    let mut status = RunStatus::MaxItersReached;
    for k in 0..cfg.max_iters {
        if budget_hit(cfg, &c) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        let tau = comm.comm_rounds(k);
        let v_hat = consensus_step(&tracker.v, &graph.a, tau);
        let consensus_err = max_row_deviation(&v_hat);
        let tracker_dev = tracker.deviation_from_mean_strategy(&x);
        rec.push(k, &x, Some(consensus_err), Some(tracker_dev), c);
        c.comm_rounds += tau;
        let s_k = checked_batch(cfg, k)?;
        let x_prev = x.clone();
        let mut new_blocks: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let s_i: Vec<f64> =
                (0..d).map(|j| n as f64 * v_hat[(i, j)] - x_prev.block(i)[j]).collect();
            let mut rng = NoiseModel::stream(cfg.seed, i, k);
            let samples = draw_noise_samples(game, i, s_k, &mut rng);
            c.samples += samples.count();
            let (xi, _) = solve_sample_average_br(
                game,
                i,
                &s_i,
                &samples,
                cfg.mu,
                x_prev.block(i),
                &cfg.inner,
            )?;
            c.inner_solves += 1;
            new_blocks.push(xi);
        }
        x = StrategyProfile::from_blocks(&new_blocks);
        for i in 0..n {
            for j in 0..d {
                tracker.v[(i, j)] = v_hat[(i, j)] + x.block(i)[j] - x_prev.block(i)[j];
            }
        }
        if let Some(dv) = check_divergence(&x, guard, k + 1) {
            status = dv;
            break;
        }
    }
    let k_final = rec.records.len() as u64;
    let tracker_dev = tracker.deviation_from_mean_strategy(&x);
    rec.push(k_final, &x, None, Some(tracker_dev), c);
    Ok(RunTrace {
        scheme: Scheme::DVsPbr,
        records: rec.records,
        status,
        final_x: x,
        mse_is_residual: cfg.ground_truth.is_none(),
    })
}

/// Dispatch on the scheme tag; distributed schemes require `graph`.
pub fn run_scheme(
    scheme: Scheme,
    game: &GameSpec,
    graph: Option<&WeightedGraph>,
    cfg: &SolverConfig,
) -> Result<RunTrace> {
    match scheme {
        Scheme::VsPgr => vs_pgr(game, cfg),
        Scheme::VsPbr => vs_pbr(game, cfg),
        Scheme::DVsPgr | Scheme::DVsPbr => {
            let g = graph.ok_or_else(|| {
                Error::Config(format!("scheme {scheme} needs a communication graph"))
            })?;
            if scheme == Scheme::DVsPgr {
                d_vs_pgr(game, g, cfg)
            } else {
                d_vs_pbr(game, g, cfg)
            }
        }
    }
}
