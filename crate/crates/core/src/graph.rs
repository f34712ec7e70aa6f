use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Cycle,
    Star,
    ErdosRenyi,
    Complete,
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(Topology::Cycle),
            "star" => Ok(Topology::Star),
            "erdos_renyi" | "er" => Ok(Topology::ErdosRenyi),
            "complete" => Ok(Topology::Complete),
            other => Err(Error::Config(format!(
                "unknown topology '{other}' (expected cycle|star|erdos_renyi|complete)"
            ))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Topology::Cycle => "cycle",
            Topology::Star => "star",
            Topology::ErdosRenyi => "erdos_renyi",
            Topology::Complete => "complete",
        };
        f.write_str(s)
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

/// Undirected edge list (0-based, i < j) for the four benchmark families.
/// Star uses node 0 as the hub. Erdős–Rényi includes each edge independently
/// with probability 2/n and redraws from the same stream until the sample is
/// connected (at most 1000 attempts).
pub fn build_topology(kind: Topology, n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::Config(format!("graph needs at least 2 nodes, got {n}")));
    }
    match kind {
        Topology::Cycle => {
            if n == 2 {
                return Ok(vec![(0, 1)]);
            }
            let mut e: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
            e.push((0, n - 1));
            Ok(e)
        }
        Topology::Star => Ok((1..n).map(|i| (0, i)).collect()),
        Topology::Complete => {
            let mut e = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    e.push((i, j));
                }
            }
            Ok(e)
        }
        Topology::ErdosRenyi => {
            let p = 2.0 / n as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let mut e = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.gen_bool(p.min(1.0)) {
                            e.push((i, j));
                        }
                    }
                }
                if is_connected(n, &e) {
                    return Ok(e);
                }
            }
            Err(Error::Config(format!(
                "no connected Erdős–Rényi sample in 1000 attempts (n={n}, seed={seed})"
            )))
        }
    }
}

/// Max-degree mixing weights with implicit self-loops: with d(i) the neighbor
/// count including i itself and d_max its maximum, a_ij = 1/d_max on edges and
/// a_ii = 1 − (d(i) − 1)/d_max. The diagonal is computed as an exact integer
/// ratio so the complete graph yields the bitwise-uniform averaging matrix.
pub fn weight_matrix(edges: &[(usize, usize)], n: usize) -> DMatrix<f64> {
    let mut deg = vec![1usize; n];
    for &(i, j) in edges {
        deg[i] += 1;
        deg[j] += 1;
    }
    let d_max = *deg.iter().max().unwrap();
    let mut a = DMatrix::zeros(n, n);
    let off = 1.0 / d_max as f64;
    for &(i, j) in edges {
        a[(i, j)] = off;
        a[(j, i)] = off;
    }
    for i in 0..n {
        a[(i, i)] = (d_max - deg[i] + 1) as f64 / d_max as f64;
    }
    a
}

/// Second-largest eigenvalue modulus: max |λ| after removing one copy of the
/// Perron eigenvalue 1. A bitwise-constant matrix is the exact averaging map,
/// so it short-circuits to 0 before any floating-point eigensolve.
pub fn slem(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Domain("slem needs a square matrix".into()));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-12 {
        return Err(Error::Domain(format!("slem needs a symmetric matrix, asymmetry {asym:.3e}")));
    }
    let first = a[(0, 0)].to_bits();
    if a.iter().all(|v| v.to_bits() == first) {
        return Ok(0.0);
    }
    let eig = a.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let perron = vals
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    vals.swap_remove(perron);
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// τ synchronous mixing rounds applied to the n×d estimate stack (row i is
/// player i's vector), as repeated multiplication rather than a matrix power
/// so it matches message-passing round by round.
pub fn consensus_step(estimates: &DMatrix<f64>, a: &DMatrix<f64>, tau: u64) -> DMatrix<f64> {
    let mut x = estimates.clone();
    for _ in 0..tau {
        x = a * x;
    }
    x
}

/// Largest per-row Euclidean deviation from the column-mean row.
pub fn max_row_deviation(estimates: &DMatrix<f64>) -> f64 {
    let n = estimates.nrows();
    let mean = estimates.row_mean();
    let mut worst = 0.0f64;
    for i in 0..n {
        let dev = (estimates.row(i) - &mean).norm();
        worst = worst.max(dev);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub a: DMatrix<f64>,
    pub beta: f64,
}

impl WeightedGraph {
    pub fn audit(&self) -> GraphAudit {
        GraphAudit {
            n: self.n,
            edges: self.edges.clone(),
            beta: self.beta,
            weights: (0..self.n)
                .map(|i| (0..self.n).map(|j| self.a[(i, j)]).collect())
                .collect(),
        }
    }
}

/// Serializable snapshot of a consensus graph for result files.
#[derive(Clone, Debug, Serialize)]
pub struct GraphAudit {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub beta: f64,
    pub weights: Vec<Vec<f64>>,
}

pub fn build_graph(kind: Topology, n: usize, seed: u64) -> Result<WeightedGraph> {
    let edges = build_topology(kind, n, seed)?;
    let a = weight_matrix(&edges, n);
    let beta = slem(&a)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Config(format!("graph mixing does not contract (beta = {beta})")));
    }
    Ok(WeightedGraph { n, edges, a, beta })
}
