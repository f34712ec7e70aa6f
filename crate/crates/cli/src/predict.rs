use crate::config::ExperimentConfig;
use serde::Serialize;
use vsnash::analysis::{self, gamma_matrix};
use vsnash::cournot::{noise_second_moments, CournotInstance};
use vsnash::game::GameSpec;
use vsnash::graph::WeightedGraph;
use vsnash::schedules::{predict_complexity, BatchSchedule, ComplexityParams, ComplexityPrediction};
use vsnash::solvers::Scheme;
use vsnash::{Error, Result, StrategyProfile};

/// Rate-statement constants assembled from a concrete instance, plus the
/// multiplier that adapts the statement's per-player oracle count to the
/// configured schedule (the statements assume batch constants like α⁻² or
/// C_ns that the configured schedule may scale differently).
pub struct PredictionBasis {
    pub params: ComplexityParams,
    pub sample_scale: f64,
    pub details: Vec<(String, f64)>,
}

fn batch_rho(batch: &BatchSchedule) -> Result<(f64, f64)> {
    match batch {
        BatchSchedule::Geometric { alpha, rho } => Ok((*rho, 1.0 / (alpha * alpha))),
        BatchSchedule::RawGeometric { rho } => Ok((*rho, 1.0)),
        other => Err(Error::Precondition(format!(
            "rate statements cover geometric batch schedules, not {other:?}"
        ))),
    }
}

fn batch_eta_br(batch: &BatchSchedule) -> Result<(f64, f64)> {
    match batch {
        BatchSchedule::PbrGeometric { c_ns, eta_br } => Ok((*eta_br, *c_ns)),
        // ⌈ρ^{−(k+1)}⌉ = ⌈(√ρ)^{−2(k+1)}⌉, so a raw schedule is the η = √ρ,
        // C_ns = 1 member of the family
        BatchSchedule::RawGeometric { rho } => Ok((rho.sqrt(), 1.0)),
        other => Err(Error::Precondition(format!(
            "best-response statements cover pbr_geometric/raw_geometric schedules, not {other:?}"
        ))),
    }
}

/// Mixing constants: C₁ = D_R and the window-sum constant C₂; both vanish on
/// exact-consensus graphs (β = 0).
fn consensus_constants(beta: f64, d_r: f64) -> (f64, f64) {
    if beta == 0.0 {
        return (0.0, 0.0);
    }
    let ln_inv_beta = (1.0 / beta).ln();
    let c1 = d_r;
    let c2 = 2.0
        * d_r
        * (std::f64::consts::E * (1.0 / (0.5 * ln_inv_beta)).sqrt()
            + (2.0 + ln_inv_beta) / (beta.sqrt() * ln_inv_beta));
    (c1, c2)
}

fn subproblem_error_gain(mu: f64, l_f: f64) -> f64 {
    let den = mu * mu + l_f * l_f;
    (mu / den) / (1.0 - l_f / den.sqrt())
}

pub fn assemble_basis(
    scheme: Scheme,
    game: &GameSpec,
    inst: &CournotInstance,
    graph: Option<&WeightedGraph>,
    batch: &BatchSchedule,
    alpha: Option<f64>,
    mu: Option<f64>,
    x0: &StrategyProfile,
    x_star: &StrategyProfile,
) -> Result<PredictionBasis> {
    let (eta, l) = game
        .monotonicity
        .ok_or_else(|| Error::Precondition("game carries no monotonicity constants".into()))?;
    let nu_i_sq = noise_second_moments(inst);
    let nu2_total: f64 = nu_i_sq.iter().sum();
    let c0 = x0.dist_sq(x_star);
    let n = game.n_players();
    let need_alpha =
        || alpha.ok_or_else(|| Error::Config("gradient prediction needs scheme.alpha".into()));
    let need_mu =
        || mu.ok_or_else(|| Error::Config("best-response prediction needs scheme.mu".into()));
    let need_beta = || {
        graph
            .map(|g| g.beta)
            .ok_or_else(|| Error::Config("distributed prediction needs a [graph] section".into()))
    };
    // D_R = Σ_j max ‖x_j‖ over the box [0, cap]^L
    let d_r = n as f64 * inst.cap * (inst.l as f64).sqrt();

    match scheme {
        Scheme::VsPgr => {
            let alpha = need_alpha()?;
            let l_tilde = analysis::l_tilde(l, alpha, 0.0);
            let q = 1.0 - 2.0 * alpha * eta + alpha * alpha * l_tilde * l_tilde;
            if !(0.0 < q && q < 1.0) {
                return Err(Error::Precondition(format!(
                    "contraction q = {q:.6} outside (0,1); the rate statement needs alpha < {:.6}",
                    2.0 * eta / (l_tilde * l_tilde)
                )));
            }
            let nu_sq = (1.0 + 2.0 * alpha * alpha) * nu2_total;
            let (rho, sample_scale) = batch_rho(batch)?;
            Ok(PredictionBasis {
                params: ComplexityParams::VsPgr {
                    c0,
                    q,
                    rho,
                    alpha_sq_nu_sq: alpha * alpha * nu_sq,
                    q_tilde: None,
                },
                sample_scale,
                details: vec![
                    ("eta".into(), eta),
                    ("l".into(), l),
                    ("l_tilde".into(), l_tilde),
                    ("q".into(), q),
                    ("nu_sq".into(), nu_sq),
                    ("c0".into(), c0),
                ],
            })
        }
        Scheme::DVsPgr => {
            let alpha = need_alpha()?;
            let beta = need_beta()?;
            let l_phi_tilde_sq = 0.5 + 2.0 * l * l;
            let rho_phi = 1.0 - 2.0 * alpha * eta + 2.0 * alpha * alpha * l_phi_tilde_sq;
            if !(0.0 < rho_phi && rho_phi < 1.0) {
                return Err(Error::Precondition(format!(
                    "contraction rho_phi = {rho_phi:.6} outside (0,1)"
                )));
            }
            let nu_bar_sq = (1.0 + 2.0 * alpha * alpha) * nu2_total;
            let (c1, c2) = consensus_constants(beta, d_r);
            let sum_l = n as f64 * l;
            let sum_l_sq = n as f64 * l * l;
            let c3 = alpha * alpha * nu_bar_sq
                + 4.0 * alpha * n as f64 * d_r * (c1 + c2) * sum_l
                + 4.0 * alpha * alpha * (n * n) as f64 * beta * (c1 * c1 + c2 * c2) * sum_l_sq;
            let (rho_batch, sample_scale) = batch_rho(batch)?;
            let gamma = rho_batch.max(beta);
            Ok(PredictionBasis {
                params: ComplexityParams::DVsPgr {
                    c0,
                    rho_phi,
                    gamma,
                    rho_batch,
                    c3,
                    rho_phi_tilde: None,
                },
                sample_scale,
                details: vec![
                    ("eta".into(), eta),
                    ("l".into(), l),
                    ("rho_phi".into(), rho_phi),
                    ("beta".into(), beta),
                    ("gamma".into(), gamma),
                    ("c3".into(), c3),
                    ("d_r".into(), d_r),
                    ("c0".into(), c0),
                ],
            })
        }
        Scheme::VsPbr | Scheme::DVsPbr => {
            let mu = need_mu()?;
            let report = gamma_matrix(game, mu)?;
            // ‖Γ‖_∞ is a concrete choice of the statement's matrix norm and
            // upper-bounds the spectral radius, keeping the bound conservative
            let a = report.a_inf;
            if !(a < 1.0) {
                return Err(Error::Precondition(format!(
                    "best-response map is not a contraction (|Gamma|_inf = {a:.6})"
                )));
            }
            let sub_lips: Vec<f64> = game
                .players
                .iter()
                .map(|p| {
                    p.br.as_ref()
                        .map(|b| b.sub_lip)
                        .ok_or_else(|| Error::Precondition("missing best-response data".into()))
                })
                .collect::<Result<_>>()?;
            let (eta_br, c_ns_batch) = batch_eta_br(batch)?;
            if let Scheme::VsPbr = scheme {
                let c_ns_theory = nu_i_sq
                    .iter()
                    .zip(&sub_lips)
                    .map(|(nu, lf)| nu * subproblem_error_gain(mu, *lf).powi(2))
                    .fold(0.0f64, f64::max);
                Ok(PredictionBasis {
                    params: ComplexityParams::VsPbr {
                        c0,
                        n,
                        a,
                        eta_br,
                        c_ns: c_ns_theory,
                        a_tilde: None,
                    },
                    sample_scale: c_ns_batch / c_ns_theory,
                    details: vec![
                        ("a".into(), a),
                        ("spectral_radius".into(), report.spectral_radius),
                        ("c_ns".into(), c_ns_theory),
                        ("eta_br".into(), eta_br),
                        ("c0".into(), c0),
                    ],
                })
            } else {
                let beta = need_beta()?;
                let l_a = sub_lips.iter().fold(0.0f64, |m, &v| m.max(v));
                let l_g = inst.b.iter().fold(0.0f64, |m, &v| m.max(v));
                let den = mu * mu + l_a * l_a;
                let factor = 1.0 / (1.0 - l_a / den.sqrt());
                let l_t = mu * l_g / den * factor;
                let c_r = mu / den * factor;
                let c_ns_theory =
                    c_r * c_r * nu_i_sq.iter().fold(0.0f64, |m, &v| m.max(v));
                let (c1, c2) = consensus_constants(beta, d_r);
                let c4 = (n as f64).sqrt() + (n as f64).powf(1.5) * l_t * (c1 + c2);
                let gamma = eta_br.max(beta);
                Ok(PredictionBasis {
                    params: ComplexityParams::DVsPbr {
                        c0,
                        a,
                        gamma,
                        c4,
                        c_ns: c_ns_theory,
                        eta_br,
                        a_tilde: None,
                    },
                    sample_scale: c_ns_batch / c_ns_theory,
                    details: vec![
                        ("a".into(), a),
                        ("beta".into(), beta),
                        ("gamma".into(), gamma),
                        ("c4".into(), c4),
                        ("c_ns".into(), c_ns_theory),
                        ("eta_br".into(), eta_br),
                        ("c0".into(), c0),
                    ],
                })
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PredictionReport {
    pub scheme: Scheme,
    pub constants: Vec<(String, f64)>,
    pub predictions: Vec<EpsPrediction>,
}

#[derive(Debug, Serialize)]
pub struct EpsPrediction {
    pub eps: f64,
    pub k_eps: f64,
    pub samples_per_player: f64,
    pub samples_per_player_schedule_adjusted: f64,
    pub comm_rounds: Option<f64>,
    pub regime: vsnash::schedules::Regime,
}

/// Bound M(ε) restated for the configured schedule: the statement's
/// per-iteration batch is rescaled by `sample_scale` while the K(ε)
/// single-sample floor stays.
pub fn adjusted_samples(pred: &ComplexityPrediction, scale: f64) -> f64 {
    scale * (pred.m_eps - pred.k_eps) + pred.k_eps
}

pub fn prediction_report(cfg: &ExperimentConfig, eps: &[f64]) -> Result<PredictionReport> {
    let scheme = cfg.scheme_kind()?;
    let (game, inst) = cfg.build_instance()?;
    let graph = cfg.build_graph()?;
    let x_star = analysis::ground_truth_ne(
        &game,
        analysis::GroundTruthMode::FixedPoint,
        cfg.ground_truth_tol(),
    )?;
    let x0 = analysis::default_start(&game);
    let basis = assemble_basis(
        scheme,
        &game,
        &inst,
        graph.as_ref(),
        &cfg.batch_schedule()?,
        cfg.scheme.alpha,
        cfg.scheme.mu,
        &x0,
        &x_star,
    )?;
    let mut predictions = Vec::with_capacity(eps.len());
    for &e in eps {
        let p = predict_complexity(&basis.params, e)?;
        predictions.push(EpsPrediction {
            eps: e,
            k_eps: p.k_eps,
            samples_per_player: p.m_eps,
            samples_per_player_schedule_adjusted: adjusted_samples(&p, basis.sample_scale),
            comm_rounds: p.comm_eps,
            regime: p.regime,
        });
    }
    Ok(PredictionReport { scheme, constants: basis.details, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgr_config(alpha: f64) -> ExperimentConfig {
        let text = format!(
            r#"
            [instance]
            family = "linear_cournot"
            n = 3
            l = 2
            seed = 11

            [scheme]
            kind = "vs_pgr"
            alpha = {alpha}

            [batch]
            kind = "raw_geometric"
            rho = 0.9

            [run]
            max_iters = 10
        "#
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn small_step_gives_valid_contraction() {
        let cfg = pgr_config(1e-4);
        let report = prediction_report(&cfg, &[1e-2, 1e-4]).unwrap();
        assert_eq!(report.predictions.len(), 2);
        assert!(report.predictions[0].k_eps <= report.predictions[1].k_eps);
        let q = report.constants.iter().find(|(k, _)| k == "q").unwrap().1;
        assert!(q > 0.0 && q < 1.0);
    }

    #[test]
    fn oversized_step_is_rejected_with_limit() {
        let cfg = pgr_config(0.5);
        let err = prediction_report(&cfg, &[1e-2]).unwrap_err();
        assert!(err.to_string().contains("alpha <"), "{err}");
    }

    #[test]
    fn raw_schedule_maps_to_sqrt_eta() {
        let (eta, c_ns) = batch_eta_br(&BatchSchedule::RawGeometric { rho: 0.81 }).unwrap();
        assert!((eta - 0.9).abs() < 1e-15);
        assert_eq!(c_ns, 1.0);
    }
}
