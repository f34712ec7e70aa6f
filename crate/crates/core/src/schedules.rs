use crate::error::{Error, Result};
use serde::Serialize;

/// Sample-size schedule S_k (samples per player at iteration k).
///
/// `Geometric` and `Polynomial` carry their own `alpha` (the α⁻² scaling
/// the rate bounds assume); `RawGeometric` is the bare ⌈ρ^{−(k+1)}⌉ form
/// used by the benchmark experiments; `PbrGeometric` is the best-response
/// form ⌈C_ns·η^{−2(k+1)}⌉.
#[derive(Clone, Debug, PartialEq)]
pub enum BatchSchedule {
    Geometric { alpha: f64, rho: f64 },
    Polynomial { alpha: f64, v: f64 },
    PbrGeometric { c_ns: f64, eta_br: f64 },
    RawGeometric { rho: f64 },
    Constant { s: u64 },
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Config(format!("{name} must lie in (0,1), got {x}")));
    }
    Ok(())
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// x^p with the exact integer-power path when p is a small integer, so that
/// schedules like (k+1)^2 stay exact.
fn powf_exact(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= 120.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

impl BatchSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BatchSchedule::Geometric { alpha, rho } => {
                check_pos("schedule alpha", *alpha)?;
                check_unit_open("rho", *rho)
            }
            BatchSchedule::Polynomial { alpha, v } => {
                check_pos("schedule alpha", *alpha)?;
                check_pos("v", *v)
            }
            BatchSchedule::PbrGeometric { c_ns, eta_br } => {
                check_pos("C_ns", *c_ns)?;
                check_unit_open("eta_br", *eta_br)
            }
            BatchSchedule::RawGeometric { rho } => check_unit_open("rho", *rho),
            BatchSchedule::Constant { s } => {
                if *s < 1 {
                    return Err(Error::Config("constant batch must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// S_k. Saturates at u64::MAX on overflow; the solver enforces its
    /// configured per-iteration cap on the returned value.
    pub fn batch_size(&self, k: u64) -> Result<u64> {
        self.validate()?;
        if k > (i32::MAX as u64) - 2 {
            return Err(Error::Domain(format!("iteration index {k} out of range")));
        }
        let kk = k as i32;
        let raw = match self {
            BatchSchedule::Geometric { alpha, rho } => {
                (alpha * alpha).recip() * rho.powi(-(kk + 1))
            }
            BatchSchedule::Polynomial { alpha, v } => {
                (alpha * alpha).recip() * powf_exact((k + 1) as f64, *v)
            }
            BatchSchedule::PbrGeometric { c_ns, eta_br } => c_ns * eta_br.powi(-2 * (kk + 1)),
            BatchSchedule::RawGeometric { rho } => rho.powi(-(kk + 1)),
            BatchSchedule::Constant { s } => return Ok(*s),
        };
        if raw.is_nan() {
            return Err(Error::Domain("batch size evaluated to NaN".into()));
        }
        Ok((raw.ceil() as u64).max(1))
    }
}

/// Communication-round schedule τ_k for the distributed schemes.
///
/// `Log` is ⌈ln k⌉ with τ_0 = τ_1 = 1 (the logarithm is undefined or zero
/// there and one round is the minimum meaningful consensus step).
#[derive(Clone, Debug, PartialEq)]
pub enum CommSchedule {
    Linear,
    Polynomial { u: f64 },
    Log,
}

impl CommSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            CommSchedule::Polynomial { u } => {
                if !(*u > 0.0 && *u <= 1.0) {
                    return Err(Error::Config(format!("comm exponent u must lie in (0,1], got {u}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn comm_rounds(&self, k: u64) -> u64 {
        match self {
            CommSchedule::Linear => k + 1,
            CommSchedule::Polynomial { u } => powf_exact((k + 1) as f64, *u).ceil().max(1.0) as u64,
            CommSchedule::Log => {
                if k <= 1 {
                    1
                } else {
                    ((k as f64).ln().ceil() as u64).max(1)
                }
            }
        }
    }
}

/// Which side of the rate recursion dominates: the iteration contraction (`q`)
/// or the schedule-driven error decay (`rho`).
///
/// Scheme mapping: vs_pgr — rho vs q; d_vs_pgr — γ = max{ρ, β} vs ϱ_φ;
/// vs_pbr — η_br vs a; d_vs_pbr — γ = max{η_br, β} vs a. Ties are detected by
/// exact float equality (the tie branch exists for deliberately equal inputs).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    RhoLtQ,
    RhoEqQ,
    RhoGtQ,
}

fn regime_of(rho: f64, q: f64) -> Regime {
    if rho < q {
        Regime::RhoLtQ
    } else if rho == q {
        Regime::RhoEqQ
    } else {
        Regime::RhoGtQ
    }
}

/// Closed-form complexity bounds for reaching an ε-NE (E‖x−x*‖² ≤ ε).
///
/// `k_eps` counts iterations (proximal evaluations for the gradient schemes,
/// subproblems per player for the BR schemes), `m_eps` counts sampled
/// gradients per player, `comm_eps` consensus rounds (distributed schemes).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComplexityPrediction {
    pub k_eps: f64,
    pub m_eps: f64,
    pub comm_eps: Option<f64>,
    pub regime: Regime,
}

/// Rate constants per scheme, in the parameterization of the corresponding
/// complexity statement. `c0` bounds E‖x_0 − x*‖².
#[derive(Clone, Debug)]
pub enum ComplexityParams {
    /// Centralized gradient scheme: contraction q = 1 − 2αη + α²L̃²,
    /// batch decay rho, noise product α²ν².
    VsPgr { c0: f64, q: f64, rho: f64, alpha_sq_nu_sq: f64, q_tilde: Option<f64> },
    /// Distributed gradient scheme: contraction ϱ_φ, combined decay
    /// γ = max{ρ, β}, batch decay rho_batch and recursion constant C₃.
    DVsPgr {
        c0: f64,
        rho_phi: f64,
        gamma: f64,
        rho_batch: f64,
        c3: f64,
        rho_phi_tilde: Option<f64>,
    },
    /// Centralized best response: BR contraction a, batch decay η_br, and
    /// C_ns = max_i ν_i²C_{i,b}² from the subproblem error bound.
    VsPbr { c0: f64, n: usize, a: f64, eta_br: f64, c_ns: f64, a_tilde: Option<f64> },
    /// Distributed best response: γ = max{η_br, β}, consensus constant C₄,
    /// and the schedule constant c_ns = C_r²·max_i ν_i². The oracle bound is
    /// stated only up to order, so m_eps sums the schedule directly.
    DVsPbr {
        c0: f64,
        a: f64,
        gamma: f64,
        c4: f64,
        c_ns: f64,
        eta_br: f64,
        a_tilde: Option<f64>,
    },
}

fn check_tilde(name: &str, tilde: f64, base: f64) -> Result<f64> {
    if !(tilde > base && tilde < 1.0) {
        return Err(Error::Domain(format!("{name} must lie in ({base}, 1), got {tilde}")));
    }
    Ok(tilde)
}

/// ln((t/b)^e) = e·ln(t/b), the tie-case denominator.
fn tie_log(tilde: f64, base: f64) -> f64 {
    std::f64::consts::E * (tilde / base).ln()
}

/// Generic K/M of the gradient-scheme complexity statements. `q` is the
/// iteration contraction, `decay` drives the case split, `rho_batch` the
/// batch growth (equals `decay` for the centralized scheme), `noise` the
/// additive constant (α²ν² or C₃).
fn gradient_km(
    c0: f64,
    q: f64,
    decay: f64,
    rho_batch: f64,
    noise: f64,
    tilde: Option<f64>,
    eps: f64,
) -> Result<(f64, f64, Regime)> {
    let regime = regime_of(decay, q);
    let ln_inv = |x: f64| (1.0 / x).ln();
    let (k, m) = match regime {
        Regime::RhoLtQ => {
            let con = c0 + noise * decay / (q - decay);
            let k = (con / eps).ln().max(0.0) / ln_inv(q);
            let m = (con / eps).max(0.0).powf(ln_inv(rho_batch) / ln_inv(q))
                / (rho_batch * ln_inv(rho_batch))
                + k;
            (k, m)
        }
        Regime::RhoEqQ => {
            let qt = match tilde {
                Some(t) => check_tilde("q_tilde", t, q)?,
                None => (1.0 + q) / 2.0,
            };
            let con = c0 + noise / tie_log(qt, q);
            let k = (con / eps).ln().max(0.0) / ln_inv(qt);
            let m = (con / eps).max(0.0).powf(ln_inv(rho_batch) / ln_inv(qt))
                / (rho_batch * ln_inv(rho_batch))
                + k;
            (k, m)
        }
        Regime::RhoGtQ => {
            let con = c0 + noise * q / (decay - q);
            let k = (con / eps).ln().max(0.0) / ln_inv(decay);
            let m = (con / eps).max(0.0) / (rho_batch * ln_inv(rho_batch)) + k;
            (k, m)
        }
    };
    Ok((k, m, regime))
}

/// Evaluate the closed-form iteration/oracle/communication bounds for one of
/// the four schemes at accuracy `eps`.
///
/// The returned `m_eps` is the literal statement of each bound; for the
/// α-scaled geometric schedules the statements absorb the α⁻² batch factor
/// into the order constant, so empirical comparisons should rescale
/// (m_eps − k_eps) by the schedule's α⁻² before flagging violations.
pub fn predict_complexity(params: &ComplexityParams, eps: f64) -> Result<ComplexityPrediction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    match params {
        ComplexityParams::VsPgr { c0, q, rho, alpha_sq_nu_sq, q_tilde } => {
            check_unit_open("q", *q).map_err(to_domain)?;
            check_unit_open("rho", *rho).map_err(to_domain)?;
            require_nonneg("c0", *c0)?;
            require_nonneg("alpha_sq_nu_sq", *alpha_sq_nu_sq)?;
            let (k, m, regime) = gradient_km(*c0, *q, *rho, *rho, *alpha_sq_nu_sq, *q_tilde, eps)?;
            Ok(ComplexityPrediction { k_eps: k, m_eps: m, comm_eps: None, regime })
        }
        ComplexityParams::DVsPgr { c0, rho_phi, gamma, rho_batch, c3, rho_phi_tilde } => {
            check_unit_open("rho_phi", *rho_phi).map_err(to_domain)?;
            check_unit_open("gamma", *gamma).map_err(to_domain)?;
            check_unit_open("rho_batch", *rho_batch).map_err(to_domain)?;
            require_nonneg("c0", *c0)?;
            require_nonneg("c3", *c3)?;
            let (k, m, regime) =
                gradient_km(*c0, *rho_phi, *gamma, *rho_batch, *c3, *rho_phi_tilde, eps)?;
            Ok(ComplexityPrediction { k_eps: k, m_eps: m, comm_eps: Some(k * (k + 1.0) / 2.0), regime })
        }
        ComplexityParams::VsPbr { c0, n, a, eta_br, c_ns, a_tilde } => {
            check_unit_open("a", *a).map_err(to_domain)?;
            check_unit_open("eta_br", *eta_br).map_err(to_domain)?;
            require_nonneg("c0", *c0)?;
            require_nonneg("c_ns", *c_ns)?;
            let sqrt_c = c0.sqrt();
            let sqrt_n = (*n as f64).sqrt();
            let sqrt_eps = eps.sqrt();
            let ln_inv = |x: f64| (1.0 / x).ln();
            let regime = regime_of(*eta_br, *a);
            let (k, m) = match regime {
                Regime::RhoLtQ => {
                    let con = sqrt_c + eta_br * sqrt_n / (a - eta_br);
                    let k = (con / sqrt_eps).ln().max(0.0) / ln_inv(*a);
                    let m = c_ns / (eta_br * eta_br * ln_inv(eta_br * eta_br))
                        * (con * con / eps).max(0.0).powf(ln_inv(*eta_br) / ln_inv(*a))
                        + k;
                    (k, m)
                }
                Regime::RhoEqQ => {
                    let at = match a_tilde {
                        Some(t) => check_tilde("a_tilde", *t, *a)?,
                        None => (1.0 + a) / 2.0,
                    };
                    let con = sqrt_c + sqrt_n / tie_log(at, *a);
                    let k = (con / sqrt_eps).ln().max(0.0) / ln_inv(at);
                    let m = c_ns / (a * a * ln_inv(a * a))
                        * (con * con / eps).max(0.0).powf(ln_inv(*a) / ln_inv(at))
                        + k;
                    (k, m)
                }
                Regime::RhoGtQ => {
                    let con = sqrt_c + a * sqrt_n / (eta_br - a);
                    let k = (con / sqrt_eps).ln().max(0.0) / ln_inv(*eta_br);
                    let m = c_ns / (eta_br * eta_br * ln_inv(eta_br * eta_br))
                        * (con * con / eps).max(0.0)
                        + k;
                    (k, m)
                }
            };
            Ok(ComplexityPrediction { k_eps: k, m_eps: m, comm_eps: None, regime })
        }
        ComplexityParams::DVsPbr { c0, a, gamma, c4, c_ns, eta_br, a_tilde } => {
            check_unit_open("a", *a).map_err(to_domain)?;
            check_unit_open("gamma", *gamma).map_err(to_domain)?;
            check_unit_open("eta_br", *eta_br).map_err(to_domain)?;
            require_nonneg("c0", *c0)?;
            require_nonneg("c4", *c4)?;
            require_nonneg("c_ns", *c_ns)?;
            let regime = regime_of(*gamma, *a);
            let q_big = match regime {
                Regime::RhoEqQ => {
                    let at = match a_tilde {
                        Some(t) => check_tilde("a_tilde", *t, *a)?,
                        None => (1.0 + a) / 2.0,
                    };
                    c0.sqrt() + c4 / tie_log(at, *a)
                }
                _ => {
                    let ratio = (a / gamma).max(gamma / a);
                    c0.sqrt() + c4 / (ratio - 1.0)
                }
            };
            let rate = match regime {
                Regime::RhoEqQ => match a_tilde {
                    Some(t) => *t,
                    None => (1.0 + a) / 2.0,
                },
                _ => a.max(*gamma),
            };
            let k = ((q_big / eps.sqrt()).ln().max(0.0) / (1.0 / rate).ln()).ceil();
            let sched = BatchSchedule::PbrGeometric { c_ns: *c_ns, eta_br: *eta_br };
            let mut m = 0.0;
            for j in 0..(k as u64) {
                m += sched.batch_size(j)? as f64;
            }
            Ok(ComplexityPrediction {
                k_eps: k,
                m_eps: m.max(k),
                comm_eps: Some(k * (k + 1.0) / 2.0),
                regime,
            })
        }
    }
}

fn to_domain(e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Domain(m),
        other => other,
    }
}

fn require_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("{name} must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// Bound for v_{k+1} ≤ q·v_k + c1·ρ^{k+1} with v_0 ≤ c0:
/// (c0 + c1·ρ/|q−ρ|)·max{ρ,q}^k when ρ ≠ q, and the q̃ = (1+q)/2 relaxation
/// (c0 + c1/ln((q̃/q)^e))·q̃^k at the tie.
///
/// The noise constant must be ρ/|q−ρ|, not 1/(max{q/ρ,ρ/q}−1): the two agree
/// for q > ρ, but the ratio form undercounts the geometric sum when the noise
/// rate ρ dominates and then fails to bound v_1 already.
pub fn recursion_bound(c0: f64, c1: f64, q: f64, rho: f64, k: u64) -> Result<f64> {
    check_unit_open("q", q).map_err(to_domain)?;
    check_unit_open("rho", rho).map_err(to_domain)?;
    require_nonneg("c0", c0)?;
    require_nonneg("c1", c1)?;
    if k > (i32::MAX as u64) - 1 {
        return Err(Error::Domain(format!("k={k} out of range")));
    }
    if rho == q {
        let qt = (1.0 + q) / 2.0;
        Ok((c0 + c1 / tie_log(qt, q)) * qt.powi(k as i32))
    } else {
        Ok((c0 + c1 * rho / (q - rho).abs()) * q.max(rho).powi(k as i32))
    }
}

/// The constant c_{q,v} = e^{−v/u}·(v/(u·ln(1/q)))^{v/u} majorizing
/// q^{x^u}·x^v over x > 0, together with the maximizer
/// x* = (v/(u·ln(1/q)))^{1/u}.
pub fn cqv_constant(q: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    check_unit_open("q", q).map_err(to_domain)?;
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("u must lie in (0,1], got {u}")));
    }
    check_pos("v", v).map_err(to_domain)?;
    let base = v / (u * (1.0 / q).ln());
    let c = (-v / u).exp() * base.powf(v / u);
    let x_star = base.powf(1.0 / u);
    Ok((c, x_star))
}

/// Condition-number tuned step and batch decay: α = η/L̃² and
/// ρ = 1 − 1/(2κ̃²) with κ̃ = L̃/η.
pub fn kappa_tuned_params(eta: f64, l_tilde: f64) -> Result<(f64, f64)> {
    check_pos("eta", eta).map_err(to_domain)?;
    if !(l_tilde >= eta) {
        return Err(Error::Domain(format!(
            "L_tilde must be >= eta, got L_tilde={l_tilde}, eta={eta}"
        )));
    }
    let kappa = l_tilde / eta;
    Ok((eta / (l_tilde * l_tilde), 1.0 - 1.0 / (2.0 * kappa * kappa)))
}

/// Distributed analogue: α = η_φ/(2L̃_φ²) and ρ = max{1 − η_φ²/(a·L̃_φ²), β}
/// for a tuning constant a > 2.
pub fn kappa_tuned_params_distributed(
    eta_phi: f64,
    l_tilde_phi: f64,
    a: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    check_pos("eta_phi", eta_phi).map_err(to_domain)?;
    if !(l_tilde_phi >= eta_phi) {
        return Err(Error::Domain("L_tilde_phi must be >= eta_phi".into()));
    }
    if !(a > 2.0) {
        return Err(Error::Domain(format!("tuning constant a must exceed 2, got {a}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must lie in [0,1), got {beta}")));
    }
    let alpha = eta_phi / (2.0 * l_tilde_phi * l_tilde_phi);
    let rho = (1.0 - eta_phi * eta_phi / (a * l_tilde_phi * l_tilde_phi)).max(beta);
    Ok((alpha, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_batch_hand_values() {
        let s = BatchSchedule::Geometric { alpha: 1.0, rho: 0.5 };
        assert_eq!(s.batch_size(0).unwrap(), 2);
        assert_eq!(s.batch_size(2).unwrap(), 8);
        let s = BatchSchedule::Geometric { alpha: 0.01, rho: 0.98 };
        assert_eq!(s.batch_size(0).unwrap(), 10205);
    }

    #[test]
    fn polynomial_and_raw_and_pbr_values() {
        let s = BatchSchedule::Polynomial { alpha: 1.0, v: 2.0 };
        assert_eq!(s.batch_size(3).unwrap(), 16);
        let s = BatchSchedule::RawGeometric { rho: 0.98 };
        assert_eq!(s.batch_size(0).unwrap(), 2);
        let s = BatchSchedule::PbrGeometric { c_ns: 1.0, eta_br: 0.5 };
        assert_eq!(s.batch_size(0).unwrap(), 4);
        assert_eq!(s.batch_size(1).unwrap(), 16);
        let s = BatchSchedule::Constant { s: 7 };
        assert_eq!(s.batch_size(1000).unwrap(), 7);
    }

    #[test]
    fn batch_parameter_validation() {
        assert!(BatchSchedule::Geometric { alpha: 1.0, rho: 1.0 }.validate().is_err());
        assert!(BatchSchedule::Polynomial { alpha: 1.0, v: 0.0 }.validate().is_err());
        assert!(BatchSchedule::Constant { s: 0 }.validate().is_err());
        assert!(BatchSchedule::RawGeometric { rho: -0.1 }.batch_size(0).is_err());
    }

    #[test]
    fn batch_sizes_nondecreasing_and_at_least_one() {
        let kinds = [
            BatchSchedule::Geometric { alpha: 0.1, rho: 0.9 },
            BatchSchedule::Geometric { alpha: 10.0, rho: 0.99 },
            BatchSchedule::Polynomial { alpha: 2.0, v: 1.3 },
            BatchSchedule::PbrGeometric { c_ns: 0.037, eta_br: 0.95 },
            BatchSchedule::RawGeometric { rho: 0.97 },
            BatchSchedule::Constant { s: 3 },
        ];
        for s in &kinds {
            let mut prev = 0u64;
            for k in 0..200 {
                let cur = s.batch_size(k).unwrap();
                assert!(cur >= 1, "{s:?} emitted S_{k} = {cur}");
                assert!(cur >= prev, "{s:?} decreased at k={k}");
                prev = cur;
            }
        }
    }

    #[test]
    fn geometric_first_batch_dominates_inverse_alpha_sq() {
        for alpha in [0.05, 0.3, 1.0, 4.0] {
            for rho in [0.5, 0.9, 0.99] {
                let s = BatchSchedule::Geometric { alpha, rho };
                assert!(s.batch_size(0).unwrap() as f64 >= 1.0 / (alpha * alpha));
            }
        }
    }

    #[test]
    fn comm_round_hand_values() {
        assert_eq!(CommSchedule::Linear.comm_rounds(4), 5);
        assert_eq!(CommSchedule::Polynomial { u: 0.5 }.comm_rounds(8), 3);
        assert_eq!(CommSchedule::Log.comm_rounds(0), 1);
        assert_eq!(CommSchedule::Log.comm_rounds(1), 1);
        assert_eq!(CommSchedule::Log.comm_rounds(2), 1);
        assert_eq!(CommSchedule::Log.comm_rounds(3), 2);
        assert_eq!(CommSchedule::Log.comm_rounds(8), 3);
    }

    #[test]
    fn comm_rounds_nondecreasing() {
        for s in [CommSchedule::Linear, CommSchedule::Polynomial { u: 0.7 }] {
            let mut prev = 0;
            for k in 0..500 {
                let cur = s.comm_rounds(k);
                assert!(cur >= prev);
                prev = cur;
            }
        }
        assert!(CommSchedule::Polynomial { u: 1.5 }.validate().is_err());
    }

    #[test]
    fn recursion_bound_hand_value() {
        let b = recursion_bound(1.0, 1.0, 0.5, 0.25, 3).unwrap();
        assert_relative_eq!(b, 0.25, max_relative = 1e-12);
        // c1 = 0 collapses to pure geometric decay
        let b = recursion_bound(2.0, 0.0, 0.5, 0.9, 4).unwrap();
        assert_relative_eq!(b, 2.0 * 0.9f64.powi(4), max_relative = 1e-12);
    }

    fn brute_force(c0: f64, c1: f64, q: f64, rho: f64, k: u64) -> f64 {
        let mut v = c0;
        for j in 0..k {
            v = q * v + c1 * rho.powi(j as i32 + 1);
        }
        v
    }

    #[test]
    fn recursion_bound_dominates_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            let c0 = rng.gen_range(0.0..5.0);
            let c1 = rng.gen_range(0.0..5.0);
            let q = rng.gen_range(0.05..0.95);
            // every third case takes the exact tie branch
            let rho = if case % 3 == 0 { q } else { rng.gen_range(0.05..0.95) };
            for k in 0..=50 {
                let v = brute_force(c0, c1, q, rho, k);
                let b = recursion_bound(c0, c1, q, rho, k).unwrap();
                assert!(
                    v <= b + 1e-9,
                    "recursion escaped its bound: v_{k}={v}, bound={b} (c0={c0}, c1={c1}, q={q}, rho={rho})"
                );
            }
        }
    }

    #[test]
    fn cqv_analytic_values() {
        let e = std::f64::consts::E;
        let (c, x) = cqv_constant(1.0 / e, 1.0, 1.0).unwrap();
        assert_relative_eq!(c, 1.0 / e, max_relative = 1e-12);
        assert_relative_eq!(x, 1.0, max_relative = 1e-12);
        let (c, x) = cqv_constant(1.0 / e, 1.0, 2.0).unwrap();
        assert_relative_eq!(c, 4.0 / (e * e), max_relative = 1e-12);
        assert_relative_eq!(x, 2.0, max_relative = 1e-12);
        assert_relative_eq!(c, 0.541341, max_relative = 1e-5);
    }

    #[test]
    fn cqv_majorizes_grid() {
        let (q, u, v) = (0.9_f64, 1.0, 3.0);
        let (c, _) = cqv_constant(q, u, v).unwrap();
        for i in 0..2000 {
            let x = 0.1 + (200.0 - 0.1) * (i as f64) / 1999.0;
            let val = q.powf(x.powf(u)) * x.powi(3);
            assert!(val <= c + 1e-9, "q^(x^u)·x^v = {val} exceeded c = {c} at x = {x}");
        }
    }

    #[test]
    fn cqv_rejects_bad_domain() {
        assert!(cqv_constant(1.2, 1.0, 1.0).is_err());
        assert!(cqv_constant(0.5, 0.0, 1.0).is_err());
        assert!(cqv_constant(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn predict_vs_pgr_example() {
        let p = ComplexityParams::VsPgr {
            c0: 1.0,
            q: 0.5,
            rho: 0.9,
            alpha_sq_nu_sq: 0.0,
            q_tilde: None,
        };
        let pred = predict_complexity(&p, 0.01).unwrap();
        assert_eq!(pred.regime, Regime::RhoGtQ);
        assert_relative_eq!(pred.k_eps, (100.0_f64).ln() / (1.0_f64 / 0.9).ln(), max_relative = 1e-12);
        assert!((pred.k_eps - 43.71).abs() < 0.01);
        assert!(pred.comm_eps.is_none());

        let done = predict_complexity(&p, 1.0).unwrap();
        assert_eq!(done.k_eps, 0.0);
    }

    #[test]
    fn predict_comm_is_triangular_in_k() {
        // pick eps so K = 10 exactly: C·γ^K = eps with C = 1
        let gamma: f64 = 0.9;
        let p = ComplexityParams::DVsPgr {
            c0: 1.0,
            rho_phi: 0.5,
            gamma,
            rho_batch: gamma,
            c3: 0.0,
            rho_phi_tilde: None,
        };
        let pred = predict_complexity(&p, gamma.powi(10)).unwrap();
        assert_relative_eq!(pred.k_eps, 10.0, max_relative = 1e-9);
        assert_relative_eq!(pred.comm_eps.unwrap(), 55.0, max_relative = 1e-8);
    }

    #[test]
    fn predict_m_at_least_k_across_schemes_and_regimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let q = rng.gen_range(0.1..0.99);
            let rho = if rng.gen_bool(0.2) { q } else { rng.gen_range(0.1..0.99) };
            let eps = 10f64.powf(rng.gen_range(-6.0..0.5));
            let c0 = rng.gen_range(0.0..10.0);
            let noise = rng.gen_range(0.0..5.0);
            let cases = [
                ComplexityParams::VsPgr { c0, q, rho, alpha_sq_nu_sq: noise, q_tilde: None },
                ComplexityParams::DVsPgr {
                    c0,
                    rho_phi: q,
                    gamma: rho,
                    rho_batch: rng.gen_range(0.1..0.99),
                    c3: noise,
                    rho_phi_tilde: None,
                },
                ComplexityParams::VsPbr {
                    c0,
                    n: 5,
                    a: q,
                    eta_br: rho,
                    c_ns: noise.max(0.01),
                    a_tilde: None,
                },
                ComplexityParams::DVsPbr {
                    c0,
                    a: q,
                    gamma: rho,
                    c4: noise,
                    c_ns: noise.max(0.01),
                    eta_br: rng.gen_range(0.1..0.99),
                    a_tilde: None,
                },
            ];
            for p in &cases {
                let pred = predict_complexity(p, eps).unwrap();
                assert!(pred.k_eps >= 0.0);
                assert!(
                    pred.m_eps >= pred.k_eps - 1e-9,
                    "M < K for {p:?} at eps={eps}: M={}, K={}",
                    pred.m_eps,
                    pred.k_eps
                );
            }
        }
    }

    #[test]
    fn predict_rejects_bad_eps() {
        let p = ComplexityParams::VsPgr { c0: 1.0, q: 0.5, rho: 0.9, alpha_sq_nu_sq: 0.0, q_tilde: None };
        assert!(predict_complexity(&p, 0.0).is_err());
        assert!(predict_complexity(&p, -1.0).is_err());
    }

    #[test]
    fn kappa_tuning_hand_values() {
        let (alpha, rho) = kappa_tuned_params(1.0, 1.0).unwrap();
        assert_eq!((alpha, rho), (1.0, 0.5));
        let (alpha, rho) = kappa_tuned_params(1.0, 2.0).unwrap();
        assert_relative_eq!(alpha, 0.25, max_relative = 1e-12);
        assert_relative_eq!(rho, 0.875, max_relative = 1e-12);
    }

    #[test]
    fn kappa_tuning_distributed_hand_value() {
        let (alpha, rho) = kappa_tuned_params_distributed(1.0, 2.0, 4.0, 0.9).unwrap();
        assert_relative_eq!(alpha, 0.125, max_relative = 1e-12);
        assert_relative_eq!(rho, 0.9375, max_relative = 1e-12);
        assert!(kappa_tuned_params_distributed(1.0, 2.0, 2.0, 0.9).is_err());
    }

    #[test]
    fn tie_regime_detected_by_exact_equality() {
        let p = ComplexityParams::VsPgr {
            c0: 1.0,
            q: 0.75,
            rho: 0.75,
            alpha_sq_nu_sq: 1.0,
            q_tilde: None,
        };
        let pred = predict_complexity(&p, 1e-3).unwrap();
        assert_eq!(pred.regime, Regime::RhoEqQ);
        assert!(pred.k_eps.is_finite() && pred.m_eps.is_finite());
    }
}
