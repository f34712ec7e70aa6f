use crate::error::{Error, Result};
use crate::profile::StrategyProfile;
use crate::prox::ProxOperator;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ∇_{x_i} f_i at a full strategy profile.
pub type GradFn = Box<dyn Fn(&StrategyProfile, &mut [f64]) + Send + Sync>;
/// Same map evaluated at one noise realization: (profile, noise, out).
pub type SampledGradFn = Box<dyn Fn(&StrategyProfile, &[f64], &mut [f64]) + Send + Sync>;
/// Aggregative form: (own block, aggregate Σ_j x_j, out).
pub type AggEvalFn = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Aggregative form at one noise realization: (own block, aggregate, noise, out).
pub type SampledAggFn = Box<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Best-response subproblem gradient: (candidate x_i, fixed interaction sum s,
/// noise, out). `s` is the rival sum in the centralized scheme and the shifted
/// aggregate estimate in the distributed one; the closure owns the convention
/// that the total interaction is x_i + s.
pub type SubGradFn = Box<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// How a player's partial gradient is computed. Aggregative players expose
/// F_i(x_i, z) with z = Σ_j x_j, which is what the tracker-based distributed
/// schemes need; `Full` players only support the centralized schemes.
pub enum GradOracle {
    Full { eval: GradFn, sampled: SampledGradFn },
    Aggregative { eval: AggEvalFn, sampled: SampledAggFn },
}

/// Data for the proximal best-response subproblem
/// argmin_{x_i} ψ̄_i(x_i) + r_i(x_i) + (μ/2)‖x_i − anchor‖².
pub struct BrSpec {
    pub sub_grad: SubGradFn,
    /// Lipschitz constant of `sub_grad` in its first argument; sets the inner
    /// prox-gradient step 1/(sub_lip + μ).
    pub sub_lip: f64,
    /// When the subproblem gradient is g0(s, noise) + diag(q)·x_i the inner
    /// solve reduces to a separable quadratic with a closed form.
    pub quad_diag: Option<Vec<f64>>,
}

pub struct PlayerSpec {
    pub dim: usize,
    pub oracle: GradOracle,
    pub prox: ProxOperator,
    /// Box known to contain the equilibrium; used for starting points and
    /// divergence guards.
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
    pub br: Option<BrSpec>,
    /// Gradients affine in the noise vector: a batch average equals one
    /// evaluation at the averaged noise, so solvers draw S_k noise vectors but
    /// call the oracle once.
    pub linear_in_noise: bool,
}

/// Per-player uniform noise: coordinate j of player i's sample is drawn from
/// U(−h, h) with h = half_widths[i][j]; h = 0 yields exactly 0.0.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub half_widths: Vec<Vec<f64>>,
}

impl NoiseModel {
    pub fn silent(dims: &[usize]) -> Self {
        NoiseModel { half_widths: dims.iter().map(|&d| vec![0.0; d]).collect() }
    }

    /// Counter-based stream: reseeding with the same (seed, player, iter)
    /// replays the same draws regardless of what other players consumed.
    pub fn stream(seed: u64, player: usize, iter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((player as u64) << 40) | iter);
        rng
    }

    pub fn draw(&self, player: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let hw = &self.half_widths[player];
        debug_assert_eq!(out.len(), hw.len());
        for (o, &h) in out.iter_mut().zip(hw) {
            *o = if h == 0.0 { 0.0 } else { rng.gen_range(-h..h) };
        }
    }

    pub fn dim(&self, player: usize) -> usize {
        self.half_widths[player].len()
    }

    pub fn is_silent(&self) -> bool {
        self.half_widths.iter().all(|hw| hw.iter().all(|&h| h == 0.0))
    }
}

/// Curvature range of the best-response subproblem Hessians: `zeta_min[i]`
/// lower-bounds ∇²_{x_i x_i}, `zeta_max[i][j]` upper-bounds ‖∇²_{x_i x_j}‖ for
/// j ≠ i. Drives the BR contraction matrix.
#[derive(Clone, Debug)]
pub struct HessianBounds {
    pub zeta_min: Vec<f64>,
    pub zeta_max: Vec<Vec<f64>>,
}

pub struct GameSpec {
    pub players: Vec<PlayerSpec>,
    pub noise: NoiseModel,
    /// (η, L): strong monotonicity and Lipschitz constants of the stacked
    /// smooth gradient map, when known.
    pub monotonicity: Option<(f64, f64)>,
    pub hessian_bounds: Option<HessianBounds>,
}

impl GameSpec {
    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.players.iter().map(|p| p.dim).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.players.is_empty() {
            return Err(Error::Config("game has no players".into()));
        }
        if self.noise.half_widths.len() != self.players.len() {
            return Err(Error::Config("noise model size does not match player count".into()));
        }
        for (i, p) in self.players.iter().enumerate() {
            if p.dim == 0 {
                return Err(Error::Config(format!("player {i} has empty strategy space")));
            }
            if let ProxOperator::Box { lower, upper } = &p.prox {
                if lower.len() != p.dim || upper.len() != p.dim {
                    return Err(Error::Config(format!("player {i}: box prox dimension mismatch")));
                }
            }
            if let Some((lo, hi)) = &p.domain {
                if lo.len() != p.dim || hi.len() != p.dim {
                    return Err(Error::Config(format!("player {i}: domain dimension mismatch")));
                }
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(Error::Config(format!("player {i}: domain has lower > upper")));
                }
            }
            if let Some(br) = &p.br {
                if !(br.sub_lip > 0.0 && br.sub_lip.is_finite()) {
                    return Err(Error::Config(format!("player {i}: sub_lip must be positive")));
                }
                if let Some(q) = &br.quad_diag {
                    if q.len() != p.dim {
                        return Err(Error::Config(format!("player {i}: quad_diag dimension mismatch")));
                    }
                }
            }
        }
        if let Some(hb) = &self.hessian_bounds {
            let n = self.players.len();
            if hb.zeta_min.len() != n || hb.zeta_max.len() != n {
                return Err(Error::Config("hessian bounds size does not match player count".into()));
            }
            if hb.zeta_max.iter().any(|row| row.len() != n) {
                return Err(Error::Config("hessian bound rows must have one entry per player".into()));
            }
        }
        if let Some((eta, l)) = self.monotonicity {
            if !(eta > 0.0 && l >= eta) {
                return Err(Error::Config(format!("need 0 < eta <= L, got eta={eta}, L={l}")));
            }
        }
        Ok(())
    }

    /// Every player exposes the aggregative oracle and all blocks share one
    /// dimension, so Σ_j x_j is well defined.
    pub fn is_aggregative(&self) -> bool {
        let same_dim = self.players.windows(2).all(|w| w[0].dim == w[1].dim);
        same_dim
            && self
                .players
                .iter()
                .all(|p| matches!(p.oracle, GradOracle::Aggregative { .. }))
    }

    /// Exact partial gradients stacked into a profile.
    pub fn deterministic_gradient(&self, x: &StrategyProfile) -> StrategyProfile {
        let mut g = StrategyProfile::zeros(&self.dims());
        let agg = if self.is_aggregative() { Some(x.sum_blocks()) } else { None };
        for (i, p) in self.players.iter().enumerate() {
            match &p.oracle {
                GradOracle::Full { eval, .. } => eval(x, g.block_mut(i)),
                GradOracle::Aggregative { eval, .. } => {
                    let z = agg
                        .clone()
                        .unwrap_or_else(|| x.sum_blocks());
                    eval(x.block(i), &z, g.block_mut(i));
                }
            }
        }
        g
    }
}

/// Noise realizations for one player and one iteration. `Mean` stores only
/// the batch average (valid when the oracle is affine in the noise), `All`
/// stores every row.
pub enum SampleSet {
    Mean { noise: Vec<f64>, count: u64 },
    All { flat: Vec<f64>, dim: usize, count: u64 },
}

impl SampleSet {
    pub fn count(&self) -> u64 {
        match self {
            SampleSet::Mean { count, .. } | SampleSet::All { count, .. } => *count,
        }
    }

    /// Average `eval` over the stored realizations, writing into `out`.
    pub fn average_into(&self, mut eval: impl FnMut(&[f64], &mut [f64]), out: &mut [f64]) {
        match self {
            SampleSet::Mean { noise, .. } => eval(noise, out),
            SampleSet::All { flat, dim, count } => {
                out.fill(0.0);
                let mut buf = vec![0.0; out.len()];
                for row in 0..*count as usize {
                    let noise = if *dim == 0 { &[][..] } else { &flat[row * dim..(row + 1) * dim] };
                    eval(noise, &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += b;
                    }
                }
                let inv = 1.0 / (*count as f64);
                for o in out.iter_mut() {
                    *o *= inv;
                }
            }
        }
    }
}

/// Draw `batch` noise vectors for `player` from `rng`. The RNG is advanced by
/// exactly batch·m_i uniform draws either way; only the storage differs.
pub fn draw_noise_samples(
    game: &GameSpec,
    player: usize,
    batch: u64,
    rng: &mut ChaCha8Rng,
) -> SampleSet {
    let m = game.noise.dim(player);
    if game.players[player].linear_in_noise {
        let mut mean = vec![0.0; m];
        let mut buf = vec![0.0; m];
        for _ in 0..batch {
            game.noise.draw(player, rng, &mut buf);
            for (acc, b) in mean.iter_mut().zip(&buf) {
                *acc += b;
            }
        }
        let inv = 1.0 / (batch as f64);
        for v in mean.iter_mut() {
            *v *= inv;
        }
        SampleSet::Mean { noise: mean, count: batch }
    } else {
        let mut flat = vec![0.0; m * batch as usize];
        for row in 0..batch as usize {
            game.noise.draw(player, rng, &mut flat[row * m..(row + 1) * m]);
        }
        SampleSet::All { flat, dim: m, count: batch }
    }
}

/// Batch-averaged sampled gradient for one player. `agg_override` substitutes
/// the tracker estimate of Σ_j x_j in the distributed schemes; it requires the
/// aggregative oracle.
pub fn sampled_gradient_player(
    game: &GameSpec,
    x: &StrategyProfile,
    player: usize,
    agg_override: Option<&[f64]>,
    batch: u64,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<u64> {
    if batch == 0 {
        return Err(Error::Precondition("sample batch must be positive".into()));
    }
    let samples = draw_noise_samples(game, player, batch, rng);
    match (&game.players[player].oracle, agg_override) {
        (GradOracle::Full { sampled, .. }, None) => {
            samples.average_into(|noise, o| sampled(x, noise, o), out);
        }
        (GradOracle::Full { .. }, Some(_)) => {
            return Err(Error::Precondition(format!(
                "player {player} has no aggregative oracle but an aggregate was supplied"
            )));
        }
        (GradOracle::Aggregative { sampled, .. }, maybe_z) => {
            let owned;
            let z = match maybe_z {
                Some(z) => z,
                None => {
                    owned = x.sum_blocks();
                    &owned
                }
            };
            samples.average_into(|noise, o| sampled(x.block(player), z, noise, o), out);
        }
    }
    Ok(samples.count())
}

/// Full-profile batch-averaged sampled gradient with per-player counter
/// streams at iteration `iter`. Returns total draws across players.
pub fn sampled_gradient(
    game: &GameSpec,
    x: &StrategyProfile,
    batch: u64,
    seed: u64,
    iter: u64,
) -> Result<(StrategyProfile, u64)> {
    let mut g = StrategyProfile::zeros(&game.dims());
    let mut total = 0;
    for i in 0..game.n_players() {
        let mut rng = NoiseModel::stream(seed, i, iter);
        total += sampled_gradient_player(game, x, i, None, batch, &mut rng, g.block_mut(i))?;
    }
    Ok((g, total))
}
