//! Network topology and its spectral quantities.
//!
//! Agents sit on an undirected connected graph. Cooperation is encoded by a
//! left-stochastic combination matrix `A` (columns sum to one); its right
//! Perron eigenvector `p` weights the network objective, and the mixing rate
//! `lambda2 = rho(A - p 1')` controls how fast disagreement dies out. The
//! graph Laplacian `L = diag(adj * 1) - adj` drives the multitask coupling
//! weights `C = I - mu*eta*L` and the synthesis of parameter vectors that
//! vary smoothly across neighboring agents.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const PERRON_TOL: f64 = 1e-12;
const PERRON_MAX_ITERS: usize = 500_000;
const CONNECT_ATTEMPTS: usize = 1000;

/// How the combination matrix is derived from the adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationRule {
    /// Averaging rule: agent k weighs itself and each neighbor by
    /// `1/(deg(k)+1)`. Left-stochastic but generally not symmetric.
    Uniform,
    /// Metropolis-Hastings weights; symmetric, hence doubly stochastic.
    Metropolis,
}

/// Breadth-first connectivity check on a nonnegative adjacency matrix.
pub fn is_connected(adjacency: &DMatrix<f64>) -> bool {
    let k = adjacency.nrows();
    if k == 0 {
        return false;
    }
    let mut seen = vec![false; k];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(node) = queue.pop_front() {
        for next in 0..k {
            if !seen[next] && adjacency[(node, next)] > 0.0 {
                seen[next] = true;
                count += 1;
                queue.push_back(next);
            }
        }
    }
    count == k
}

/// Draw a connected Erdos-Renyi graph with unit edge weights.
///
/// Resamples until connected, failing after a bounded number of attempts so
/// an edge probability too small for `agents` is reported rather than spun on.
pub fn random_connected_graph<R: Rng + ?Sized>(
    agents: usize,
    edge_probability: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if agents < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 agents, got {agents}"
        )));
    }
    if !(edge_probability > 0.0 && edge_probability <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1], got {edge_probability}"
        )));
    }
    for _ in 0..CONNECT_ATTEMPTS {
        let mut adj = DMatrix::zeros(agents, agents);
        for i in 0..agents {
            for j in (i + 1)..agents {
                if rng.random::<f64>() < edge_probability {
                    adj[(i, j)] = 1.0;
                    adj[(j, i)] = 1.0;
                }
            }
        }
        if is_connected(&adj) {
            return Ok(adj);
        }
    }
    Err(Error::GraphNotConnected {
        agents,
        attempts: CONNECT_ATTEMPTS,
    })
}

fn validate_adjacency(adjacency: &DMatrix<f64>) -> Result<()> {
    let k = adjacency.nrows();
    if k != adjacency.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: adjacency.ncols(),
        });
    }
    for i in 0..k {
        if adjacency[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "adjacency diagonal must be zero (node {i})"
            )));
        }
        for j in 0..k {
            if adjacency[(i, j)] < 0.0 {
                return Err(Error::InvalidParameter(
                    "adjacency entries must be nonnegative".into(),
                ));
            }
            if (adjacency[(i, j)] - adjacency[(j, i)]).abs() > 1e-12 {
                return Err(Error::NotSymmetric(
                    (adjacency[(i, j)] - adjacency[(j, i)]).abs(),
                ));
            }
        }
    }
    Ok(())
}

/// Build a left-stochastic combination matrix from an adjacency matrix.
///
/// Neighborhoods are determined by nonzero adjacency entries; both rules give
/// every agent a positive self-weight, so the result is primitive whenever
/// the graph is connected.
pub fn combination_matrix(adjacency: &DMatrix<f64>, rule: CombinationRule) -> DMatrix<f64> {
    let k = adjacency.nrows();
    let degree: Vec<usize> = (0..k)
        .map(|i| (0..k).filter(|&j| adjacency[(i, j)] > 0.0).count())
        .collect();
    let mut a = DMatrix::zeros(k, k);
    match rule {
        CombinationRule::Uniform => {
            for col in 0..k {
                let w = 1.0 / (degree[col] as f64 + 1.0);
                a[(col, col)] = w;
                for row in 0..k {
                    if adjacency[(row, col)] > 0.0 {
                        a[(row, col)] = w;
                    }
                }
            }
        }
        CombinationRule::Metropolis => {
            for col in 0..k {
                let mut off_sum = 0.0;
                for row in 0..k {
                    if row != col && adjacency[(row, col)] > 0.0 {
                        let w = 1.0 / (1.0 + degree[row].max(degree[col]) as f64);
                        a[(row, col)] = w;
                        off_sum += w;
                    }
                }
                a[(col, col)] = 1.0 - off_sum;
            }
        }
    }
    a
}

/// Right Perron eigenvector of a left-stochastic matrix, by power iteration.
///
/// Returns `p > 0` with `sum(p) = 1` and `||A p - p|| <= 1e-12`. Fails when
/// the iteration does not settle, which signals a non-primitive matrix.
pub fn perron_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = a.nrows();
    let mut p = DVector::from_element(k, 1.0 / k as f64);
    for _ in 0..PERRON_MAX_ITERS {
        let next = a * &p;
        let residual = (&next - &p).norm();
        p = &next / next.sum();
        if residual <= PERRON_TOL {
            return Ok(p);
        }
    }
    Err(Error::PowerIterationDiverged(PERRON_MAX_ITERS))
}

/// Mixing rate: the second largest eigenvalue magnitude of the combination
/// matrix, computed as the spectral radius of the deflated matrix `A - p 1'`.
///
/// For a column-stochastic `A` with right Perron vector `p` (`A p = p`) and
/// left Perron vector `1'`, subtracting the rank-one product `p 1'` removes
/// exactly the unit eigenvalue and leaves the rest of the spectrum intact.
///
/// The radius itself comes from repeated squaring with Frobenius rescaling:
/// `rho(B) = exp(sum_j ln||B_j||_F / 2^j)` where `B_{j+1} = B_j^2 / ||B_j^2||_F`.
/// The normalization keeps every intermediate representable, and the 1/2^j
/// weighting makes basis-conditioning and Jordan-block factors vanish in the
/// limit.
pub fn second_eigen_magnitude(a: &DMatrix<f64>, perron: &DVector<f64>) -> f64 {
    let k = a.nrows();
    let ones = DVector::from_element(k, 1.0);
    let deviation = a - perron * ones.transpose();
    spectral_radius(&deviation)
}

/// Spectral radius of a general square matrix via repeated squaring.
pub fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    let s0 = b.norm();
    if s0 == 0.0 || !s0.is_finite() {
        return if s0 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let mut m = b / s0;
    let mut log_rho = s0.ln();
    let mut weight = 0.5;
    for _ in 0..64 {
        m = &m * &m;
        let s = m.norm();
        if s == 0.0 {
            // nilpotent deviation: spectral radius is exactly zero
            return 0.0;
        }
        m /= s;
        log_rho += weight * s.ln();
        if (weight * s.ln()).abs() < 1e-16 && weight < 1e-9 {
            break;
        }
        weight *= 0.5;
    }
    log_rho.exp()
}

/// Graph Laplacian `L = diag(adj * 1) - adj`.
pub fn laplacian(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let k = adjacency.nrows();
    let degrees = adjacency * DVector::from_element(k, 1.0);
    DMatrix::from_diagonal(&degrees) - adjacency
}

/// Step-size-dependent multitask combination weights.
///
/// `C[k,k] = 1 - mu*eta*sum_l adj[l,k]` and `C[l,k] = mu*eta*adj[l,k]`
/// off-diagonal, which coincides with `I - mu*eta*L` for symmetric
/// zero-diagonal adjacency. Requires `mu*eta*max_k deg_w(k) < 1` so the
/// diagonal stays positive.
pub fn multitask_weights(adjacency: &DMatrix<f64>, mu: f64, eta: f64) -> Result<DMatrix<f64>> {
    let k = adjacency.nrows();
    let coupling = mu * eta;
    let max_deg = (0..k)
        .map(|col| (0..k).map(|row| adjacency[(row, col)]).sum::<f64>())
        .fold(0.0_f64, f64::max);
    if coupling * max_deg >= 1.0 {
        return Err(Error::WeightsOutOfRange(coupling * max_deg));
    }
    let mut c = DMatrix::zeros(k, k);
    for col in 0..k {
        let deg_w: f64 = (0..k).map(|row| adjacency[(row, col)]).sum();
        c[(col, col)] = 1.0 - coupling * deg_w;
        for row in 0..k {
            if row != col {
                c[(row, col)] = coupling * adjacency[(row, col)];
            }
        }
    }
    Ok(c)
}

/// Eigen-decomposition of the (symmetric PSD) Laplacian, eigenvalues ascending.
pub fn laplacian_eigs(l: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = l.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..l.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Per-agent parameter vectors that vary smoothly over the graph.
///
/// Each coordinate of the stacked signal is a random combination of the
/// `bandwidth` Laplacian eigenvectors with smallest eigenvalues, so the
/// Dirichlet energy of the result concentrates at the bottom of the graph
/// spectrum. The output is scaled so the root-mean-square per-agent norm
/// equals `amplitude`.
pub fn smooth_signal<R: Rng + ?Sized>(
    l: &DMatrix<f64>,
    bandwidth: usize,
    dimension: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let k = l.nrows();
    if bandwidth == 0 || bandwidth > k {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must lie in 1..={k}, got {bandwidth}"
        )));
    }
    let (_, basis) = laplacian_eigs(l);
    // coordinate slices across agents: signal[m][k]
    let mut coords = vec![DVector::zeros(k); dimension];
    for coord in coords.iter_mut() {
        for vec in basis.iter().take(bandwidth) {
            let g: f64 = rng.sample(StandardNormal);
            *coord += vec * g;
        }
    }
    let total: f64 = coords.iter().map(|c| c.norm_squared()).sum();
    let scale = if total > 0.0 {
        amplitude * (k as f64 / total).sqrt()
    } else {
        0.0
    };
    Ok((0..k)
        .map(|agent| DVector::from_fn(dimension, |m, _| coords[m][agent] * scale))
        .collect())
}

/// Dirichlet energy of a stacked per-agent signal: `sum_m x_m' L x_m`.
pub fn dirichlet_energy(l: &DMatrix<f64>, signal: &[DVector<f64>]) -> f64 {
    let k = l.nrows();
    let dim = signal[0].len();
    (0..dim)
        .map(|m| {
            let x = DVector::from_fn(k, |agent, _| signal[agent][m]);
            (l * &x).dot(&x)
        })
        .sum()
}

/// A connected topology with its combination matrix and spectral summaries.
#[derive(Debug, Clone)]
pub struct Network {
    adjacency: DMatrix<f64>,
    combination: DMatrix<f64>,
    perron: DVector<f64>,
    lambda2: f64,
    laplacian: DMatrix<f64>,
}

impl Network {
    pub fn new(adjacency: DMatrix<f64>, rule: CombinationRule) -> Result<Self> {
        validate_adjacency(&adjacency)?;
        if !is_connected(&adjacency) {
            return Err(Error::GraphNotConnected {
                agents: adjacency.nrows(),
                attempts: 0,
            });
        }
        let combination = combination_matrix(&adjacency, rule);
        let perron = perron_vector(&combination)?;
        let lambda2 = second_eigen_magnitude(&combination, &perron);
        let laplacian = laplacian(&adjacency);
        Ok(Self {
            adjacency,
            combination,
            perron,
            lambda2,
            laplacian,
        })
    }

    pub fn random<R: Rng + ?Sized>(
        agents: usize,
        edge_probability: f64,
        rule: CombinationRule,
        rng: &mut R,
    ) -> Result<Self> {
        let adjacency = random_connected_graph(agents, edge_probability, rng)?;
        Self::new(adjacency, rule)
    }

    /// Single agent: trivial 1x1 network with `A = [1]`.
    pub fn singleton() -> Self {
        Self {
            adjacency: DMatrix::zeros(1, 1),
            combination: DMatrix::from_element(1, 1, 1.0),
            perron: DVector::from_element(1, 1.0),
            lambda2: 0.0,
            laplacian: DMatrix::zeros(1, 1),
        }
    }

    pub fn agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn combination(&self) -> &DMatrix<f64> {
        &self.combination
    }

    pub fn perron(&self) -> &DVector<f64> {
        &self.perron
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn multitask_weights(&self, mu: f64, eta: f64) -> Result<DMatrix<f64>> {
        multitask_weights(&self.adjacency, mu, eta)
    }
}

/// Serialize an adjacency matrix as one `l k weight` triple per undirected
/// edge (0-based node indices).
pub fn edge_list_string(adjacency: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let k = adjacency.nrows();
    let _ = writeln!(out, "# nodes {k}");
    for i in 0..k {
        for j in (i + 1)..k {
            if adjacency[(i, j)] > 0.0 {
                let _ = writeln!(out, "{i} {j} {}", adjacency[(i, j)]);
            }
        }
    }
    out
}

/// Parse the edge-list format produced by [`edge_list_string`].
pub fn parse_edge_list(text: &str) -> Result<DMatrix<f64>> {
    let mut nodes: Option<usize> = None;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_node = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("nodes") {
                nodes = it.next().and_then(|s| s.parse().ok());
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>, what: &str| -> Result<f64> {
            tok.ok_or_else(|| Error::EdgeListParse {
                line: idx + 1,
                reason: format!("missing {what}"),
            })?
            .parse()
            .map_err(|_| Error::EdgeListParse {
                line: idx + 1,
                reason: format!("bad {what}"),
            })
        };
        let l = parse(it.next(), "source node")? as usize;
        let k = parse(it.next(), "target node")? as usize;
        let w = parse(it.next(), "weight")?;
        if w <= 0.0 {
            return Err(Error::EdgeListParse {
                line: idx + 1,
                reason: "weight must be positive".into(),
            });
        }
        max_node = max_node.max(l).max(k);
        edges.push((l, k, w));
    }
    let n = nodes.unwrap_or(max_node + 1);
    if n <= max_node {
        return Err(Error::EdgeListParse {
            line: 0,
            reason: format!("node index {max_node} exceeds declared count {n}"),
        });
    }
    let mut adj = DMatrix::zeros(n, n);
    for (l, k, w) in edges {
        adj[(l, k)] = w;
        adj[(k, l)] = w;
    }
    Ok(adj)
}

/// Write an adjacency matrix to a file in edge-list format.
pub fn write_edge_list(path: &Path, adjacency: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, edge_list_string(adjacency))?;
    Ok(())
}

/// Read an adjacency matrix from an edge-list file.
pub fn read_edge_list(path: &Path) -> Result<DMatrix<f64>> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}
