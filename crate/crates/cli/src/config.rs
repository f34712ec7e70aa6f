use serde::{Deserialize, Serialize};
use std::str::FromStr;
use vsnash::cournot::{
    gen_linear_cournot_opts, gen_quadratic_cournot_opts, CournotInstance, GenOptions,
    PriceNoiseBase,
};
use vsnash::game::GameSpec;
use vsnash::graph::{build_graph, Topology, WeightedGraph};
use vsnash::schedules::{BatchSchedule, CommSchedule};
use vsnash::solvers::{InnerConfig, Scheme, SolverConfig};
use vsnash::{Error, Result};

/// On-disk experiment description. Every section is flat key-value;
/// unknown keys anywhere are hard errors so schedule typos cannot pass
/// silently.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub scheme: SchemeConfig,
    pub batch: BatchConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm: Option<CommConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphConfig>,
    pub run: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// "linear_cournot" or "quadratic_cournot".
    pub family: String,
    pub n: usize,
    pub l: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Which price coefficient scales the price noise half-width: "d" or "b".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_noise_base: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// "vs_pgr", "d_vs_pgr", "vs_pbr" or "d_vs_pbr".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_max_iters: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_qp: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_override: Option<bool>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    /// "geometric", "polynomial", "pbr_geometric", "raw_geometric" or
    /// "constant".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_br: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    /// Largest admissible per-player batch (default 1e6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    /// "linear", "polynomial" or "log".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// "cycle", "star", "erdos_renyi" or "complete".
    pub topology: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Independent sample paths averaged pointwise (default 50).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    pub max_iters: u64,
    /// Total-sample stop across all players (default 1e6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_budget: Option<u64>,
    /// Base seed; replication r runs with seed + r.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// "mse" or "relative_error" (default): headline metric in the summary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    RelativeError,
}

impl InstanceConfig {
    pub fn gen_options(&self) -> Result<GenOptions> {
        let mut opts = GenOptions::default();
        if let Some(cap) = self.cap {
            opts.cap = cap;
        }
        match self.price_noise_base.as_deref() {
            None => {}
            Some("d") => opts.price_noise_base = PriceNoiseBase::D,
            Some("b") => opts.price_noise_base = PriceNoiseBase::B,
            Some(other) => {
                return Err(Error::Config(format!(
                    "instance.price_noise_base must be d or b, got '{other}'"
                )))
            }
        }
        Ok(opts)
    }

    pub fn build(&self, mu: Option<f64>) -> Result<(GameSpec, CournotInstance)> {
        let opts = self.gen_options()?;
        match self.family.as_str() {
            "linear_cournot" => gen_linear_cournot_opts(self.n, self.l, self.seed, opts),
            "quadratic_cournot" => {
                gen_quadratic_cournot_opts(self.n, self.l, mu.unwrap_or(20.0), self.seed, opts)
            }
            other => Err(Error::Config(format!(
                "unknown instance.family '{other}' (linear_cournot|quadratic_cournot)"
            ))),
        }
    }
}

/// Extract just the `[instance]` table (plus an optional `[scheme] mu` for
/// the quadratic family's contraction certificate) from either a standalone
/// instance file or a full experiment config.
pub fn parse_instance_section(text: &str) -> Result<(InstanceConfig, Option<f64>)> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    let table = value
        .get("instance")
        .ok_or_else(|| Error::Config("no [instance] section found".into()))?;
    let inst: InstanceConfig = table
        .clone()
        .try_into()
        .map_err(|e| Error::Config(format!("[instance] section: {e}")))?;
    let mu = value
        .get("scheme")
        .and_then(|s| s.get("mu"))
        .and_then(|m| m.as_float());
    Ok((inst, mu))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications() < 1 {
            return Err(Error::Config("run.replications must be >= 1".into()));
        }
        if self.sample_budget() < 1 {
            return Err(Error::Config("run.sample_budget must be >= 1".into()));
        }
        if self.run.max_iters < 1 {
            return Err(Error::Config("run.max_iters must be >= 1".into()));
        }
        self.scheme_kind()?;
        self.metric()?;
        self.batch_schedule()?;
        self.comm_schedule()?;
        if let Some(c) = &self.compare {
            if c.eps.is_empty() || c.eps.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::Config("compare.eps must be positive values".into()));
            }
        }
        Ok(())
    }

    pub fn replications(&self) -> u64 {
        self.run.replications.unwrap_or(50)
    }

    pub fn sample_budget(&self) -> u64 {
        self.run.sample_budget.unwrap_or(1_000_000)
    }

    pub fn base_seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn ground_truth_tol(&self) -> f64 {
        self.run.ground_truth_tol.unwrap_or(1e-13)
    }

    pub fn metric(&self) -> Result<Metric> {
        match self.run.metric.as_deref() {
            None | Some("relative_error") => Ok(Metric::RelativeError),
            Some("mse") => Ok(Metric::Mse),
            Some(other) => Err(Error::Config(format!(
                "run.metric must be mse or relative_error, got '{other}'"
            ))),
        }
    }

    pub fn scheme_kind(&self) -> Result<Scheme> {
        Scheme::from_str(&self.scheme.kind)
    }

    pub fn is_distributed(&self) -> Result<bool> {
        Ok(matches!(self.scheme_kind()?, Scheme::DVsPgr | Scheme::DVsPbr))
    }

    pub fn batch_schedule(&self) -> Result<BatchSchedule> {
        let b = &self.batch;
        let need = |o: Option<f64>, name: &str| {
            o.ok_or_else(|| Error::Config(format!("batch.kind={} needs batch.{name}", b.kind)))
        };
        let sched = match b.kind.as_str() {
            "geometric" => BatchSchedule::Geometric {
                alpha: need(b.alpha, "alpha")?,
                rho: need(b.rho, "rho")?,
            },
            "polynomial" => BatchSchedule::Polynomial {
                alpha: need(b.alpha, "alpha")?,
                v: need(b.v, "v")?,
            },
            "pbr_geometric" => BatchSchedule::PbrGeometric {
                c_ns: need(b.c_ns, "c_ns")?,
                eta_br: need(b.eta_br, "eta_br")?,
            },
            "raw_geometric" => BatchSchedule::RawGeometric { rho: need(b.rho, "rho")? },
            "constant" => BatchSchedule::Constant {
                s: b.s.ok_or_else(|| Error::Config("batch.kind=constant needs batch.s".into()))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown batch.kind '{other}' (geometric|polynomial|pbr_geometric|raw_geometric|constant)"
                )))
            }
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn comm_schedule(&self) -> Result<Option<CommSchedule>> {
        let Some(c) = &self.comm else { return Ok(None) };
        let sched = match c.kind.as_str() {
            "linear" => CommSchedule::Linear,
            "polynomial" => CommSchedule::Polynomial {
                u: c.u.ok_or_else(|| Error::Config("comm.kind=polynomial needs comm.u".into()))?,
            },
            "log" => CommSchedule::Log,
            other => {
                return Err(Error::Config(format!(
                    "unknown comm.kind '{other}' (linear|polynomial|log)"
                )))
            }
        };
        sched.validate()?;
        Ok(Some(sched))
    }

    /// Generate the benchmark game. The quadratic family certifies its
    /// best-response contraction at the scheme's μ (default 20, the value
    /// used throughout the quadratic experiments).
    pub fn build_instance(&self) -> Result<(GameSpec, CournotInstance)> {
        self.instance.build(self.scheme.mu)
    }

    pub fn build_graph(&self) -> Result<Option<WeightedGraph>> {
        match &self.graph {
            None => Ok(None),
            Some(g) => {
                let topo: Topology = g.topology.parse()?;
                Ok(Some(build_graph(topo, self.instance.n, g.seed.unwrap_or(0))?))
            }
        }
    }

    /// Solver settings shared by every replication; the caller fills in
    /// seed and ground truth.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let scheme = self.scheme_kind()?;
        let batch = self.batch_schedule()?;
        let mut cfg = match scheme {
            Scheme::VsPgr | Scheme::DVsPgr => {
                let alpha = self.scheme.alpha.ok_or_else(|| {
                    Error::Config(format!("scheme.kind={} needs scheme.alpha", self.scheme.kind))
                })?;
                SolverConfig::gradient(alpha, batch, self.run.max_iters, self.base_seed())
            }
            Scheme::VsPbr | Scheme::DVsPbr => {
                let mu = self.scheme.mu.ok_or_else(|| {
                    Error::Config(format!("scheme.kind={} needs scheme.mu", self.scheme.kind))
                })?;
                SolverConfig::best_response(mu, batch, self.run.max_iters, self.base_seed())
            }
        };
        cfg.comm = self.comm_schedule()?;
        cfg.sample_budget = Some(self.sample_budget());
        if let Some(cap) = self.batch.cap {
            cfg.batch_cap = cap;
        }
        cfg.inner = InnerConfig {
            tol: self.scheme.inner_tol.unwrap_or(1e-10),
            max_iters: self.scheme.inner_max_iters.unwrap_or(10_000),
            exact_qp: self.scheme.exact_qp.unwrap_or(false),
        };
        cfg.contraction_override = self.scheme.contraction_override.unwrap_or(false);
        // traces feed the CSV, which has no snapshot column; keep rows lean
        // unless the config asks for snapshots
        cfg.snapshot_stride = Some(self.run.snapshot_stride.unwrap_or(0));
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [instance]
        family = "linear_cournot"
        n = 3
        l = 2
        seed = 7

        [scheme]
        kind = "vs_pgr"
        alpha = 0.01

        [batch]
        kind = "raw_geometric"
        rho = 0.95

        [run]
        max_iters = 10
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.replications(), 50);
        assert_eq!(cfg.sample_budget(), 1_000_000);
        assert_eq!(cfg.base_seed(), 0);
        assert_eq!(cfg.metric().unwrap(), Metric::RelativeError);
        assert_eq!(cfg.scheme_kind().unwrap(), Scheme::VsPgr);
        let solver = cfg.solver_config().unwrap();
        assert_eq!(solver.alpha, 0.01);
        assert_eq!(solver.max_iters, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("max_iters = 10", "max_iters = 10\nmax_itres = 10");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = MINIMAL.replace("rho = 0.95", "rho = 0.95\nrh = 0.9");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn missing_schedule_fields_are_named() {
        let text = MINIMAL.replace("rho = 0.95", "");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("batch.rho"), "{err}");
    }

    #[test]
    fn br_scheme_requires_mu() {
        let text = MINIMAL
            .replace("kind = \"vs_pgr\"", "kind = \"vs_pbr\"")
            .replace("alpha = 0.01", "");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(cfg.solver_config().is_err());
    }

    #[test]
    fn quadratic_family_builds_and_certifies() {
        let text = MINIMAL
            .replace("family = \"linear_cournot\"", "family = \"quadratic_cournot\"")
            .replace("kind = \"vs_pgr\"", "kind = \"vs_pbr\"\nmu = 20.0");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let (game, inst) = cfg.build_instance().unwrap();
        assert_eq!(game.n_players(), 3);
        assert!(inst.rho.is_some());
    }

    #[test]
    fn instance_section_extracts_from_full_or_bare_config() {
        let (inst, mu) = parse_instance_section(MINIMAL).unwrap();
        assert_eq!(inst.n, 3);
        assert_eq!(mu, None);
        let bare = "[instance]\nfamily = \"quadratic_cournot\"\nn = 4\nl = 2\nseed = 1\n\n[scheme]\nmu = 15.0\nkind = \"vs_pbr\"\n";
        let (inst, mu) = parse_instance_section(bare).unwrap();
        assert_eq!(inst.family, "quadratic_cournot");
        assert_eq!(mu, Some(15.0));
        assert!(parse_instance_section("[run]\nmax_iters = 3\n").is_err());
    }

    #[test]
    fn graph_section_builds_weighted_graph() {
        let text = format!("{MINIMAL}\n[graph]\ntopology = \"star\"\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let g = cfg.build_graph().unwrap().unwrap();
        assert_eq!(g.n, 3);
        assert!(g.beta < 1.0);
    }
}
