use crate::analysis;
use crate::error::{Error, Result};
use crate::game::{
    AggEvalFn, BrSpec, GameSpec, GradOracle, HessianBounds, NoiseModel, PlayerSpec, SampledAggFn,
    SubGradFn,
};
use crate::prox::ProxOperator;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which per-market scalar seeds the price-noise half-width h_l = base_l/5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceNoiseBase {
    D,
    B,
}

/// A networked Cournot market: n firms choose quantities across l markets,
/// market price is d_l − b_l·(total supply), firm i pays c_i per unit plus an
/// optional quadratic term (ρ_i/2)‖x_i‖². All coefficients are stored so the
/// instance replays exactly from its serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CournotInstance {
    pub n: usize,
    pub l: usize,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Option<Vec<f64>>,
    pub cap: f64,
    pub cost_noise_half: Vec<f64>,
    pub price_noise_half: Vec<f64>,
    pub price_noise_base: PriceNoiseBase,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    pub cap: f64,
    pub price_noise_base: PriceNoiseBase,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { cap: 2.0, price_noise_base: PriceNoiseBase::D }
    }
}

fn gen_instance(
    n: usize,
    l: usize,
    seed: u64,
    quadratic: bool,
    opts: GenOptions,
) -> Result<CournotInstance> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 firms, got {n}")));
    }
    if l < 1 {
        return Err(Error::Config("need at least one market".into()));
    }
    if !(opts.cap > 0.0 && opts.cap.is_finite()) {
        return Err(Error::Config(format!("capacity must be positive, got {}", opts.cap)));
    }
    // draw order is part of the reproducibility contract: d, b, c, then
    // quadratic margins
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..l).map(|_| rng.gen_range(40.0..50.0)).collect();
    let b: Vec<f64> = (0..l).map(|_| rng.gen_range(1.0..2.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(3.0..5.0)).collect();
    let rho = if quadratic {
        let b_max = b.iter().cloned().fold(f64::MIN, f64::max);
        let b_min = b.iter().cloned().fold(f64::MAX, f64::min);
        let base = (n as f64 - 1.0) * b_max - 2.0 * b_min;
        Some(
            (0..n)
                .map(|_| (base + rng.gen_range(0.5..1.5)).max(0.0))
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };
    let cost_noise_half: Vec<f64> = c.iter().map(|ci| ci / 5.0).collect();
    let price_noise_half: Vec<f64> = match opts.price_noise_base {
        PriceNoiseBase::D => d.iter().map(|v| v / 5.0).collect(),
        PriceNoiseBase::B => b.iter().map(|v| v / 5.0).collect(),
    };
    Ok(CournotInstance {
        n,
        l,
        d,
        b,
        c,
        rho,
        cap: opts.cap,
        cost_noise_half,
        price_noise_half,
        price_noise_base: opts.price_noise_base,
        seed,
    })
}

/// Stacked Jacobian of the deterministic gradient map: block (i,i) is
/// diag(ρ_i + 2b), block (i,j) is diag(b).
pub fn gradient_matrix(inst: &CournotInstance) -> DMatrix<f64> {
    let (n, l) = (inst.n, inst.l);
    let mut m = DMatrix::zeros(n * l, n * l);
    for i in 0..n {
        let rho_i = inst.rho.as_ref().map_or(0.0, |r| r[i]);
        for j in 0..n {
            for k in 0..l {
                m[(i * l + k, j * l + k)] = if i == j { rho_i + 2.0 * inst.b[k] } else { inst.b[k] };
            }
        }
    }
    m
}

/// Constant part of the gradient map: block i is c_i·1 − d.
pub fn gradient_offset(inst: &CournotInstance) -> Vec<f64> {
    let mut out = Vec::with_capacity(inst.n * inst.l);
    for i in 0..inst.n {
        for k in 0..inst.l {
            out.push(inst.c[i] - inst.d[k]);
        }
    }
    out
}

/// Per-player second moment ν_i² = E‖ξ_i·1 − ζ‖² of the additive gradient
/// noise (uniform on ±half-width, so each coordinate contributes h²/3).
pub fn noise_second_moments(inst: &CournotInstance) -> Vec<f64> {
    let zeta: f64 = inst.price_noise_half.iter().map(|h| h * h / 3.0).sum();
    inst.cost_noise_half
        .iter()
        .map(|h| inst.l as f64 * h * h / 3.0 + zeta)
        .collect()
}

/// (ν₁, ν₂²) for the stacked map: the noise is state-independent, so the
/// state-proportional part is exactly zero and ν₂² sums the per-player
/// moments.
pub fn noise_bounds(inst: &CournotInstance) -> (f64, f64) {
    (0.0, noise_second_moments(inst).iter().sum())
}

/// Materialize the playable game. Closures read only the stored coefficient
/// vectors, so edits to the instance (for example zeroing the noise
/// half-widths) take effect by rebuilding.
pub fn game_from_instance(inst: &CournotInstance) -> Result<GameSpec> {
    if inst.d.len() != inst.l
        || inst.b.len() != inst.l
        || inst.c.len() != inst.n
        || inst.price_noise_half.len() != inst.l
        || inst.cost_noise_half.len() != inst.n
        || inst.rho.as_ref().is_some_and(|r| r.len() != inst.n)
    {
        return Err(Error::Config("instance coefficient lengths are inconsistent".into()));
    }
    let b_max = inst.b.iter().cloned().fold(f64::MIN, f64::max);
    let b_min = inst.b.iter().cloned().fold(f64::MAX, f64::min);
    let mut players = Vec::with_capacity(inst.n);
    for i in 0..inst.n {
        let rho_i = inst.rho.as_ref().map_or(0.0, |r| r[i]);
        let (ci, d, b) = (inst.c[i], inst.d.clone(), inst.b.clone());
        let eval: AggEvalFn = {
            let (d, b) = (d.clone(), b.clone());
            Box::new(move |x_i: &[f64], z: &[f64], out: &mut [f64]| {
                for k in 0..out.len() {
                    out[k] = ci - d[k] + rho_i * x_i[k] + b[k] * x_i[k] + b[k] * z[k];
                }
            })
        };
        let sampled: SampledAggFn = {
            let (d, b) = (d.clone(), b.clone());
            Box::new(move |x_i: &[f64], z: &[f64], noise: &[f64], out: &mut [f64]| {
                for k in 0..out.len() {
                    out[k] = ci + noise[0] - (d[k] + noise[1 + k])
                        + rho_i * x_i[k]
                        + b[k] * x_i[k]
                        + b[k] * z[k];
                }
            })
        };
        let sub_grad: SubGradFn = {
            let (d, b) = (d.clone(), b.clone());
            Box::new(move |x_i: &[f64], s: &[f64], noise: &[f64], out: &mut [f64]| {
                for k in 0..out.len() {
                    out[k] = ci + noise[0] - (d[k] + noise[1 + k])
                        + (rho_i + 2.0 * b[k]) * x_i[k]
                        + b[k] * s[k];
                }
            })
        };
        players.push(PlayerSpec {
            dim: inst.l,
            oracle: GradOracle::Aggregative { eval, sampled },
            prox: ProxOperator::box_indicator(vec![0.0; inst.l], vec![inst.cap; inst.l])?,
            domain: Some((vec![0.0; inst.l], vec![inst.cap; inst.l])),
            br: Some(BrSpec {
                sub_grad,
                sub_lip: rho_i + 2.0 * b_max,
                quad_diag: Some(inst.b.iter().map(|bk| rho_i + 2.0 * bk).collect()),
            }),
            linear_in_noise: true,
        });
    }
    let half_widths: Vec<Vec<f64>> = (0..inst.n)
        .map(|i| {
            std::iter::once(inst.cost_noise_half[i])
                .chain(inst.price_noise_half.iter().copied())
                .collect()
        })
        .collect();
    let monotonicity = match &inst.rho {
        None => Some((b_min, (inst.n as f64 + 1.0) * b_max)),
        Some(_) => {
            let (eta, lip) = analysis::quadratic_constants(&gradient_matrix(inst))?;
            (eta > 0.0).then_some((eta, lip))
        }
    };
    let zeta_min: Vec<f64> = (0..inst.n)
        .map(|i| inst.rho.as_ref().map_or(0.0, |r| r[i]) + 2.0 * b_min)
        .collect();
    let zeta_max: Vec<Vec<f64>> = (0..inst.n)
        .map(|i| (0..inst.n).map(|j| if i == j { 0.0 } else { b_max }).collect())
        .collect();
    let game = GameSpec {
        players,
        noise: NoiseModel { half_widths },
        monotonicity,
        hessian_bounds: Some(HessianBounds { zeta_min, zeta_max }),
    };
    game.validate()?;
    Ok(game)
}

pub fn gen_linear_cournot(n: usize, l: usize, seed: u64) -> Result<(GameSpec, CournotInstance)> {
    gen_linear_cournot_opts(n, l, seed, GenOptions::default())
}

pub fn gen_linear_cournot_opts(
    n: usize,
    l: usize,
    seed: u64,
    opts: GenOptions,
) -> Result<(GameSpec, CournotInstance)> {
    let inst = gen_instance(n, l, seed, false, opts)?;
    Ok((game_from_instance(&inst)?, inst))
}

pub fn gen_quadratic_cournot(
    n: usize,
    l: usize,
    mu: f64,
    seed: u64,
) -> Result<(GameSpec, CournotInstance)> {
    gen_quadratic_cournot_opts(n, l, mu, seed, GenOptions::default())
}

pub fn gen_quadratic_cournot_opts(
    n: usize,
    l: usize,
    mu: f64,
    seed: u64,
    opts: GenOptions,
) -> Result<(GameSpec, CournotInstance)> {
    let inst = gen_instance(n, l, seed, true, opts)?;
    let game = game_from_instance(&inst)?;
    let report = analysis::gamma_matrix(&game, mu)?;
    if !report.contractive {
        return Err(Error::Config(format!(
            "quadratic instance is not best-response contractive at mu={mu} (a_inf={})",
            report.a_inf
        )));
    }
    Ok((game, inst))
}
