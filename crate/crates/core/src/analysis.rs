use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::profile::StrategyProfile;
use crate::prox::prox_profile;
use nalgebra::DMatrix;
use serde::Serialize;

/// Strong-monotonicity and smoothness constants of the gradient map, plus the
/// noise-adjusted constants L̃ = sqrt(1 + 2(1+2α²)ν₁² + 2L²) and κ̃ = L̃/η
/// that the step/schedule tuning uses. ν₁ scales state-proportional noise and
/// ν₂² bounds the additive second moment; both are recorded because they are
/// model-derived bounds, not measurements.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonotonicityReport {
    pub eta: f64,
    pub l: f64,
    pub alpha: f64,
    pub nu1: f64,
    pub nu2_sq: f64,
    pub l_tilde: f64,
    pub kappa_tilde: f64,
}

/// L̃ for step size α and constants (L, ν₁).
pub fn l_tilde(l: f64, alpha: f64, nu1: f64) -> f64 {
    (1.0 + 2.0 * (1.0 + 2.0 * alpha * alpha) * nu1 * nu1 + 2.0 * l * l).sqrt()
}

pub fn monotonicity_report(
    eta: f64,
    l: f64,
    alpha: f64,
    nu1: f64,
    nu2_sq: f64,
) -> Result<MonotonicityReport> {
    if !(eta > 0.0 && l >= eta) {
        return Err(Error::Domain(format!("need 0 < eta <= L, got eta={eta}, L={l}")));
    }
    if !(alpha > 0.0 && nu1 >= 0.0 && nu2_sq >= 0.0) {
        return Err(Error::Domain("alpha must be positive and noise constants nonnegative".into()));
    }
    let lt = l_tilde(l, alpha, nu1);
    Ok(MonotonicityReport { eta, l, alpha, nu1, nu2_sq, l_tilde: lt, kappa_tilde: lt / eta })
}

/// (η, L) of an affine map x ↦ Mx + b: η = λ_min((M+Mᵀ)/2), L = σ_max(M).
/// η ≤ 0 means the map is not strongly monotone; the caller decides whether
/// that is fatal.
pub fn quadratic_constants(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("need a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let eta = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let l = m
        .clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    Ok((eta, l))
}

/// Best-response sensitivity matrix: Γ_ii = μ/(μ+ζ_{i,min}),
/// Γ_ij = ζ_{ij,max}/(μ+ζ_{i,min}). The contraction gate is the max row sum
/// ‖Γ‖_∞; the spectral radius is informational.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub gamma: Vec<Vec<f64>>,
    pub a_inf: f64,
    pub spectral_radius: f64,
    pub contractive: bool,
}

pub fn gamma_matrix(game: &GameSpec, mu: f64) -> Result<ContractionReport> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!("mu must be positive, got {mu}")));
    }
    let hb = game
        .hessian_bounds
        .as_ref()
        .ok_or_else(|| Error::Config("game carries no Hessian-block bounds".into()))?;
    let n = game.n_players();
    let mut gamma = vec![vec![0.0; n]; n];
    let mut a_inf = 0.0f64;
    for i in 0..n {
        let denom = mu + hb.zeta_min[i];
        if !(denom > 0.0) {
            return Err(Error::Config(format!("mu + zeta_min must be positive for player {i}")));
        }
        let mut row = 0.0;
        for j in 0..n {
            gamma[i][j] = if i == j { mu / denom } else { hb.zeta_max[i][j] / denom };
            if gamma[i][j] < 0.0 {
                return Err(Error::Config(format!("negative Hessian bound for pair ({i},{j})")));
            }
            row += gamma[i][j];
        }
        a_inf = a_inf.max(row);
    }
    let gm = DMatrix::from_fn(n, n, |i, j| gamma[i][j]);
    let spectral_radius = gm
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    Ok(ContractionReport { gamma, a_inf, spectral_radius, contractive: a_inf < 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthMode {
    FixedPoint,
    Extragradient,
}

/// Starting point: domain midpoints where declared, otherwise the proximal
/// image of the origin.
pub fn default_start(game: &GameSpec) -> StrategyProfile {
    let mut x = StrategyProfile::zeros(&game.dims());
    for (i, p) in game.players.iter().enumerate() {
        match &p.domain {
            Some((lo, hi)) => {
                for (k, v) in x.block_mut(i).iter_mut().enumerate() {
                    *v = 0.5 * (lo[k] + hi[k]);
                }
            }
            None => {
                let zero = vec![0.0; p.dim];
                p.prox.eval(&zero, 1.0, x.block_mut(i));
            }
        }
    }
    x
}

/// Deterministic equilibrium solve to fixed-point residual
/// ‖x − prox_{αr}(x − αG(x))‖ ≤ tol with α = η/L². `FixedPoint` iterates the
/// contraction directly, `Extragradient` takes mirrored steps of size 1/(2L);
/// the two agreeing is the mutual correctness check.
pub fn ground_truth_ne(
    game: &GameSpec,
    mode: GroundTruthMode,
    tol: f64,
) -> Result<StrategyProfile> {
    game.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Precondition(format!("tol must be positive, got {tol}")));
    }
    let (eta, l) = game
        .monotonicity
        .ok_or_else(|| Error::Precondition("monotonicity constants (eta, L) required".into()))?;
    let alpha = eta / (l * l);
    let step = 1.0 / (2.0 * l);
    let mut x = default_start(game);
    let cap = 1_000_000u64;
    let mut res = f64::INFINITY;
    for _ in 0..cap {
        let g = game.deterministic_gradient(&x);
        let mut y = x.clone();
        y.axpy(-alpha, &g);
        let cand = prox_profile(game, &y, alpha);
        res = x.dist(&cand);
        if res <= tol {
            return Ok(x);
        }
        match mode {
            GroundTruthMode::FixedPoint => x = cand,
            GroundTruthMode::Extragradient => {
                let mut half = x.clone();
                half.axpy(-step, &g);
                let mid = prox_profile(game, &half, step);
                let g2 = game.deterministic_gradient(&mid);
                let mut full = x.clone();
                full.axpy(-step, &g2);
                x = prox_profile(game, &full, step);
            }
        }
        if !x.is_finite() {
            return Err(Error::OracleFailure("equilibrium solve left the finite domain".into()));
        }
    }
    Err(Error::OracleFailure(format!(
        "no equilibrium to residual {tol:.3e} within {cap} iterations (last residual {res:.3e})"
    )))
}

/// Residual of the equilibrium fixed-point identity at `x`, with the same
/// α = η/L² convention as the solver.
pub fn fixed_point_residual(game: &GameSpec, x: &StrategyProfile) -> Result<f64> {
    let (eta, l) = game
        .monotonicity
        .ok_or_else(|| Error::Precondition("monotonicity constants (eta, L) required".into()))?;
    let alpha = eta / (l * l);
    let g = game.deterministic_gradient(x);
    let mut y = x.clone();
    y.axpy(-alpha, &g);
    Ok(x.dist(&prox_profile(game, &y, alpha)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitRegime {
    Linear,
    Polynomial,
}

/// Least-squares decay fit over `window` (inclusive, defaults to the last 75%
/// of the trace). Linear regime regresses ln(mse) on k, so the slope
/// estimates the log of the per-iteration rate; polynomial regresses ln(mse)
/// on ln(k), estimating the negated exponent. Nonpositive or nonfinite
/// entries are dropped before fitting.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
}

pub fn fit_rate(
    mse: &[f64],
    regime: FitRegime,
    window: Option<(usize, usize)>,
) -> Result<RateFit> {
    if mse.len() < 2 {
        return Err(Error::Precondition("rate fit needs at least two trace entries".into()));
    }
    let k_max = mse.len() - 1;
    let (mut lo, hi) = match window {
        Some((a, b)) => (a, b.min(k_max)),
        None => (((k_max as f64) * 0.25).ceil() as usize, k_max),
    };
    if regime == FitRegime::Polynomial {
        lo = lo.max(1);
    }
    if lo > hi {
        return Err(Error::Precondition(format!("empty fit window [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&k| mse[k].is_finite() && mse[k] > 0.0)
        .map(|k| {
            let x = match regime {
                FitRegime::Linear => k as f64,
                FitRegime::Polynomial => (k as f64).ln(),
            };
            (x, mse[k].ln())
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition(
            "fit window has fewer than two positive entries".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("fit window has no spread in k".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    // effective window after dropping unusable entries
    let eff_lo = (lo..=hi).find(|&k| mse[k].is_finite() && mse[k] > 0.0).unwrap();
    let eff_hi = (lo..=hi).rev().find(|&k| mse[k].is_finite() && mse[k] > 0.0).unwrap();
    Ok(RateFit { slope, r_squared, window: (eff_lo, eff_hi) })
}

/// First iteration index whose averaged squared error is at or below `eps`.
pub fn epsilon_ne_index(mse: &[f64], eps: f64) -> Option<usize> {
    mse.iter().position(|&v| v <= eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GradFn, GradOracle, HessianBounds, NoiseModel, PlayerSpec, SampledGradFn};
    use crate::prox::ProxOperator;
    use approx::assert_relative_eq;

    fn scalar_player(
        grad: impl Fn(&StrategyProfile) -> f64 + Send + Sync + Clone + 'static,
        prox: ProxOperator,
        domain: Option<(Vec<f64>, Vec<f64>)>,
    ) -> PlayerSpec {
        let g2 = grad.clone();
        let eval: GradFn = Box::new(move |x, out| out[0] = grad(x));
        let sampled: SampledGradFn = Box::new(move |x, noise, out| {
            out[0] = g2(x) + noise.first().copied().unwrap_or(0.0)
        });
        PlayerSpec {
            dim: 1,
            oracle: GradOracle::Full { eval, sampled },
            prox,
            domain,
            br: None,
            linear_in_noise: true,
        }
    }

    #[test]
    fn quadratic_constants_hand_values() {
        let m = DMatrix::<f64>::identity(3, 3);
        let (eta, l) = quadratic_constants(&m).unwrap();
        assert_relative_eq!(eta, 1.0, max_relative = 1e-12);
        assert_relative_eq!(l, 1.0, max_relative = 1e-12);

        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (eta, l) = quadratic_constants(&m).unwrap();
        assert_relative_eq!(eta, 1.0, max_relative = 1e-12);
        assert_relative_eq!(l, 3.0, max_relative = 1e-12);

        assert!(quadratic_constants(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn monotonicity_report_constants() {
        let r = monotonicity_report(1.0, 1.0, 0.1, 0.0, 0.5).unwrap();
        assert_relative_eq!(r.l_tilde, 3.0f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.kappa_tilde, 3.0f64.sqrt(), max_relative = 1e-12);
        assert!(monotonicity_report(0.0, 1.0, 0.1, 0.0, 0.0).is_err());
        assert!(monotonicity_report(2.0, 1.0, 0.1, 0.0, 0.0).is_err());
    }

    fn two_player_game(zeta_min: [f64; 2], zeta_12: f64) -> GameSpec {
        GameSpec {
            players: vec![
                scalar_player(|x| 2.0 * x.block(0)[0] + x.block(1)[0], ProxOperator::Zero, None),
                scalar_player(|x| 2.0 * x.block(1)[0] + x.block(0)[0], ProxOperator::Zero, None),
            ],
            noise: NoiseModel::silent(&[1, 1]),
            monotonicity: Some((1.0, 3.0)),
            hessian_bounds: Some(HessianBounds {
                zeta_min: zeta_min.to_vec(),
                zeta_max: vec![vec![0.0, zeta_12], vec![zeta_12, 0.0]],
            }),
        }
    }

    #[test]
    fn gamma_matrix_hand_example() {
        let game = two_player_game([2.0, 2.0], 1.0);
        let r = gamma_matrix(&game, 1.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(r.gamma[i][j], 1.0 / 3.0, max_relative = 1e-15);
            }
        }
        assert_relative_eq!(r.a_inf, 2.0 / 3.0, max_relative = 1e-15);
        assert!(r.contractive);
        assert_relative_eq!(r.spectral_radius, 2.0 / 3.0, max_relative = 1e-9);

        let r = gamma_matrix(&game, 1e6).unwrap();
        assert!(r.a_inf > 0.999 && r.a_inf < 1.0);

        // exact row-sum identity
        let mu = 3.7;
        let r = gamma_matrix(&game, mu).unwrap();
        let row: f64 = r.gamma[0].iter().sum();
        assert_relative_eq!(row, (mu + 1.0) / (mu + 2.0), max_relative = 1e-15);
    }

    #[test]
    fn gamma_matrix_requires_bounds() {
        let mut game = two_player_game([2.0, 2.0], 1.0);
        game.hessian_bounds = None;
        assert!(matches!(gamma_matrix(&game, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn ground_truth_single_player_box() {
        // f(x) = (x-1)^2 on [0,2]: G(x) = 2(x-1), eta = L = 2
        let game = GameSpec {
            players: vec![scalar_player(
                |x| 2.0 * (x.block(0)[0] - 1.0),
                ProxOperator::box_indicator(vec![0.0], vec![2.0]).unwrap(),
                Some((vec![0.0], vec![2.0])),
            )],
            noise: NoiseModel::silent(&[1]),
            monotonicity: Some((2.0, 2.0)),
            hessian_bounds: None,
        };
        for mode in [GroundTruthMode::FixedPoint, GroundTruthMode::Extragradient] {
            let x = ground_truth_ne(&game, mode, 1e-12).unwrap();
            assert!((x.block(0)[0] - 1.0).abs() <= 1e-10, "{mode:?}: {}", x.block(0)[0]);
            assert!(fixed_point_residual(&game, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn ground_truth_two_player_symmetric() {
        let game = two_player_game([2.0, 2.0], 1.0);
        for mode in [GroundTruthMode::FixedPoint, GroundTruthMode::Extragradient] {
            let x = ground_truth_ne(&game, mode, 1e-12).unwrap();
            assert!(x.norm() <= 1e-10, "{mode:?}: |x| = {}", x.norm());
        }
    }

    #[test]
    fn ground_truth_modes_agree_on_cournot() {
        let (game, _) = crate::cournot::gen_linear_cournot(5, 3, 101).unwrap();
        let a = ground_truth_ne(&game, GroundTruthMode::FixedPoint, 1e-13).unwrap();
        let b = ground_truth_ne(&game, GroundTruthMode::Extragradient, 1e-13).unwrap();
        assert!(a.dist(&b) <= 1e-9, "modes disagree by {}", a.dist(&b));
        assert!(fixed_point_residual(&game, &a).unwrap() <= 1e-12);
    }

    #[test]
    fn fit_recovers_planted_rates() {
        let geo: Vec<f64> = (0..61).map(|k| 0.9f64.powi(k)).collect();
        let fit = fit_rate(&geo, FitRegime::Linear, None).unwrap();
        assert!((fit.slope - 0.9f64.ln()).abs() <= 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);

        let poly: Vec<f64> = (0..101)
            .map(|k| if k == 0 { 1.0 } else { (k as f64).powi(-2) })
            .collect();
        let fit = fit_rate(&poly, FitRegime::Polynomial, Some((1, 100))).unwrap();
        assert!((fit.slope + 2.0).abs() <= 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn fit_window_shrinks_past_zeros() {
        let mut trace: Vec<f64> = (0..40).map(|k| 0.8f64.powi(k)).collect();
        trace[35] = 0.0;
        trace[36] = 0.0;
        let fit = fit_rate(&trace, FitRegime::Linear, Some((10, 39))).unwrap();
        assert!((fit.slope - 0.8f64.ln()).abs() <= 1e-9);
        let all_dead = vec![0.0; 30];
        assert!(fit_rate(&all_dead, FitRegime::Linear, None).is_err());
    }

    #[test]
    fn epsilon_index_hand_examples() {
        assert_eq!(epsilon_ne_index(&[4.0, 1.0, 0.2], 0.5), Some(2));
        assert_eq!(epsilon_ne_index(&[4.0, 1.0, 0.2], 5.0), Some(0));
        assert_eq!(epsilon_ne_index(&[4.0, 1.0, 0.2], 0.1), None);
    }
}
