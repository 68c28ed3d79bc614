//! Exact solver for the discrete transportation problem.
//!
//! ```text
//! minimize   sum_ij c_ij x_ij
//! subject to sum_j x_ij = a_i,  sum_i x_ij = b_j,  x_ij >= 0
//! ```
//!
//! Solved as a min-cost flow `S -> rows -> cols -> T` by successive shortest
//! paths with Johnson potentials. Every augmentation saturates a residual arc,
//! so the method terminates after finitely many steps at an optimal vertex; no
//! iteration count or convergence threshold is involved. The final potentials
//! are returned as a dual certificate.

use crate::error::{Error, Result};

/// Marginal masses may differ by at most this much.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` coupling.
    pub flow: Vec<f64>,
    pub cost: f64,
    /// Dual variables `f_i`, `g_j` with `f_i + g_j <= c_ij`.
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Value of the dual objective `sum a_i f_i + sum b_j g_j`.
    pub fn dual_objective(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let r: f64 = supply.iter().zip(&self.row_potential).map(|(a, f)| a * f).sum();
        let c: f64 = demand.iter().zip(&self.col_potential).map(|(b, g)| b * g).sum();
        r + c
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Vertex {
    Source,
    Row(usize),
    Col(usize),
    Sink,
}

pub fn solve(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportPlan> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty marginals".into()));
    }
    for v in supply.iter().chain(demand) {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "marginal masses must be finite and nonnegative, got {v}"
            )));
        }
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if (total_supply - total_demand).abs() > MASS_TOLERANCE {
        return Err(Error::InfeasibleMarginals {
            supply: total_supply,
            demand: total_demand,
        });
    }

    let mut c = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let cij = cost(i, j);
            if !cij.is_finite() {
                return Err(Error::NonFinite(format!("cost({i}, {j})")));
            }
            c.push(cij);
        }
    }
    let min_cost = c.iter().copied().fold(f64::INFINITY, f64::min);

    // residual dust below this is treated as zero
    let tol = 1e-15 * total_supply.max(total_demand).max(f64::MIN_POSITIVE);
    let target = total_supply.min(total_demand);

    let mut flow = vec![0.0; n * m];
    let mut sent = vec![0.0; n];
    let mut recv = vec![0.0; m];
    // potentials indexed as [source, rows.., cols.., sink]
    let nv = n + m + 2;
    let idx = |v: Vertex| match v {
        Vertex::Source => 0,
        Vertex::Row(i) => 1 + i,
        Vertex::Col(j) => 1 + n + j,
        Vertex::Sink => 1 + n + m,
    };
    let vertex = |k: usize| {
        if k == 0 {
            Vertex::Source
        } else if k <= n {
            Vertex::Row(k - 1)
        } else if k <= n + m {
            Vertex::Col(k - 1 - n)
        } else {
            Vertex::Sink
        }
    };
    // negative costs are fine as long as initial reduced costs are >= 0
    let mut pi = vec![0.0; nv];
    if min_cost < 0.0 {
        for j in 0..m {
            pi[idx(Vertex::Col(j))] = min_cost;
        }
        pi[idx(Vertex::Sink)] = min_cost;
    }

    let mut shipped = 0.0;
    let mut dist = vec![f64::INFINITY; nv];
    let mut done = vec![false; nv];
    let mut prev = vec![usize::MAX; nv];

    while target - shipped > tol * (n + m) as f64 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        done.iter_mut().for_each(|d| *d = false);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        dist[0] = 0.0;
        let sink = idx(Vertex::Sink);

        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..nv {
                if !done[k] && dist[k] < best {
                    best = dist[k];
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == sink {
                break;
            }
            let du = dist[u];
            let relax = |v: usize, arc_cost: f64, dist: &mut [f64], prev: &mut [usize]| {
                if done[v] {
                    return;
                }
                let rc = (arc_cost + pi[u] - pi[v]).max(0.0);
                let nd = du + rc;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            match vertex(u) {
                Vertex::Source => {
                    for i in 0..n {
                        if supply[i] - sent[i] > tol {
                            relax(idx(Vertex::Row(i)), 0.0, &mut dist, &mut prev);
                        }
                    }
                }
                Vertex::Row(i) => {
                    for j in 0..m {
                        relax(idx(Vertex::Col(j)), c[i * m + j], &mut dist, &mut prev);
                    }
                    if sent[i] > tol {
                        relax(0, 0.0, &mut dist, &mut prev);
                    }
                }
                Vertex::Col(j) => {
                    for i in 0..n {
                        if flow[i * m + j] > tol {
                            relax(idx(Vertex::Row(i)), -c[i * m + j], &mut dist, &mut prev);
                        }
                    }
                    if demand[j] - recv[j] > tol {
                        relax(sink, 0.0, &mut dist, &mut prev);
                    }
                }
                Vertex::Sink => unreachable!(),
            }
        }

        if !dist[sink].is_finite() {
            break;
        }
        let dt = dist[sink];
        for k in 0..nv {
            pi[k] += dist[k].min(dt);
        }

        // bottleneck along the path
        let mut delta = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            let cap = match (vertex(u), vertex(v)) {
                (Vertex::Source, Vertex::Row(i)) => supply[i] - sent[i],
                (Vertex::Row(i), Vertex::Source) => sent[i],
                (Vertex::Row(_), Vertex::Col(_)) => f64::INFINITY,
                (Vertex::Col(j), Vertex::Row(i)) => flow[i * m + j],
                (Vertex::Col(j), Vertex::Sink) => demand[j] - recv[j],
                _ => unreachable!("arc not in residual graph"),
            };
            delta = delta.min(cap);
            v = u;
        }

        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            match (vertex(u), vertex(v)) {
                (Vertex::Source, Vertex::Row(i)) => {
                    sent[i] += delta;
                    if supply[i] - sent[i] <= tol {
                        sent[i] = supply[i];
                    }
                }
                (Vertex::Row(i), Vertex::Source) => {
                    sent[i] -= delta;
                    if sent[i] <= tol {
                        sent[i] = 0.0;
                    }
                }
                (Vertex::Row(i), Vertex::Col(j)) => flow[i * m + j] += delta,
                (Vertex::Col(j), Vertex::Row(i)) => {
                    flow[i * m + j] -= delta;
                    if flow[i * m + j] <= tol {
                        flow[i * m + j] = 0.0;
                    }
                }
                (Vertex::Col(j), Vertex::Sink) => {
                    recv[j] += delta;
                    if demand[j] - recv[j] <= tol {
                        recv[j] = demand[j];
                    }
                }
                _ => unreachable!(),
            }
            v = u;
        }
        shipped += delta;
    }

    let unshipped = target - shipped;
    if unshipped > MASS_TOLERANCE {
        return Err(Error::InfeasibleMarginals {
            supply: total_supply,
            demand: total_demand,
        });
    }

    let cost = flow.iter().zip(&c).map(|(x, cij)| x * cij).sum();
    let row_potential = (0..n).map(|i| -pi[idx(Vertex::Row(i))]).collect();
    let col_potential = (0..m).map(|j| pi[idx(Vertex::Col(j))]).collect();
    Ok(TransportPlan {
        rows: n,
        cols: m,
        flow,
        cost,
        row_potential,
        col_potential,
    })
}
