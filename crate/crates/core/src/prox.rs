use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::profile::StrategyProfile;

/// Proximal operator of a nonsmooth term r, prox_{αr}(x) = argmin_y r(y) + ‖y−x‖²/(2α).
///
/// Every supported kind has a closed form: box and nonnegative-orthant
/// projection, soft-thresholding, and the identity for r ≡ 0. All are
/// nonexpansive and map into dom(r).
#[derive(Clone, Debug, PartialEq)]
pub enum ProxOperator {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Nonneg,
    L1 { weight: f64 },
    Zero,
}

impl ProxOperator {
    pub fn box_indicator(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Config("box bounds have mismatched lengths".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("box is empty or has nonfinite bounds".into()));
        }
        Ok(ProxOperator::Box { lower, upper })
    }

    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Config(format!("l1 weight must be finite and >= 0, got {weight}")));
        }
        Ok(ProxOperator::L1 { weight })
    }

    /// Evaluate prox_{αr}(x) into `out`. `alpha` must be positive; indicator
    /// kinds ignore it (projections are α-independent).
    pub fn eval(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        debug_assert!(alpha > 0.0, "prox needs alpha > 0");
        debug_assert_eq!(x.len(), out.len());
        match self {
            ProxOperator::Box { lower, upper } => {
                debug_assert_eq!(x.len(), lower.len());
                for i in 0..x.len() {
                    out[i] = x[i].clamp(lower[i], upper[i]);
                }
            }
            ProxOperator::Nonneg => {
                for i in 0..x.len() {
                    out[i] = x[i].max(0.0);
                }
            }
            ProxOperator::L1 { weight } => {
                let t = alpha * weight;
                for i in 0..x.len() {
                    // soft threshold; |x| == t lands exactly on 0
                    out[i] = x[i].signum() * (x[i].abs() - t).max(0.0);
                }
            }
            ProxOperator::Zero => out.copy_from_slice(x),
        }
    }

    pub fn eval_vec(&self, x: &[f64], alpha: f64) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval(x, alpha, &mut out);
        out
    }
}

/// Blockwise prox over a whole profile: block i gets player i's operator.
///
/// This is the iteration-complexity unit of the gradient schemes: one call is
/// one profile-level proximal evaluation, regardless of n.
pub fn prox_profile(game: &GameSpec, x: &StrategyProfile, alpha: f64) -> StrategyProfile {
    let mut out = x.clone();
    for (i, player) in game.players.iter().enumerate() {
        player.prox.eval(x.block(i), alpha, out.block_mut(i));
    }
    out
}
