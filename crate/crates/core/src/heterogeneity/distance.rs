use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const MASS_TOL: f64 = 1e-12;

/// Largest support size accepted by [`wasserstein1`].
pub const W1_SUPPORT_CAP: usize = 64;

/// Finitely supported probability distribution over points of type `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution<P> {
    support: Vec<P>,
    mass: Vec<f64>,
}

impl<P: Clone + PartialEq> DiscreteDistribution<P> {
    /// Repeated support points are merged.
    pub fn new(support: Vec<P>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(invalid("support and mass lengths differ"));
        }
        if support.is_empty() {
            return Err(invalid("distribution has empty support"));
        }
        if mass.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(invalid("masses must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("masses sum to {total}, expected 1")));
        }
        let mut pts: Vec<P> = Vec::with_capacity(support.len());
        let mut ms: Vec<f64> = Vec::with_capacity(support.len());
        for (p, m) in support.into_iter().zip(mass) {
            match pts.iter().position(|q| *q == p) {
                Some(j) => ms[j] += m,
                None => {
                    pts.push(p);
                    ms.push(m);
                }
            }
        }
        Ok(Self { support: pts, mass: ms })
    }

    /// Uniform mass over the given points.
    pub fn empirical(points: Vec<P>) -> Result<Self> {
        let m = 1.0 / points.len().max(1) as f64;
        let mass = vec![m; points.len()];
        Self::new(points, mass)
    }

    pub fn point(p: P) -> Self {
        Self {
            support: vec![p],
            mass: vec![1.0],
        }
    }

    /// Equal-weight mixture `(1/n) sum_i p_i`.
    pub fn mixture(parts: &[Self]) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("mixture of no distributions"));
        }
        let w = 1.0 / parts.len() as f64;
        let mut support = Vec::new();
        let mut mass = Vec::new();
        for p in parts {
            for (x, m) in p.support.iter().zip(&p.mass) {
                support.push(x.clone());
                mass.push(m * w);
            }
        }
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        Self::new(support, mass)
    }

    pub fn support(&self) -> &[P] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Mass at `p`, zero off the support.
    pub fn prob(&self, p: &P) -> f64 {
        self.support
            .iter()
            .position(|q| q == p)
            .map_or(0.0, |j| self.mass[j])
    }
}

/// `1/2 sum_z |p(z) - q(z)|` over the union of supports.
pub fn tv_distance<P: Clone + PartialEq>(p: &DiscreteDistribution<P>, q: &DiscreteDistribution<P>) -> f64 {
    let mut total = 0.0;
    for (x, m) in p.support.iter().zip(&p.mass) {
        total += (m - q.prob(x)).abs();
    }
    for (x, m) in q.support.iter().zip(&q.mass) {
        if !p.support.contains(x) {
            total += m;
        }
    }
    (0.5 * total).min(1.0)
}

fn check_metric<P>(points: &[&P], metric: &impl Fn(&P, &P) -> f64) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        let self_dist = metric(a, a);
        if self_dist.abs() > 1e-12 {
            return Err(invalid(format!("metric gives d(x, x) = {self_dist}")));
        }
        for b in &points[..i] {
            let ab = metric(a, b);
            let ba = metric(b, a);
            if !(ab >= 0.0 && ab.is_finite()) {
                return Err(invalid(format!("metric returned {ab}")));
            }
            if (ab - ba).abs() > 1e-12 * (1.0 + ab.abs()) {
                return Err(invalid(format!("metric is not symmetric: {ab} vs {ba}")));
            }
        }
    }
    Ok(())
}

/// Exact 1-Wasserstein distance between finitely supported distributions
/// under `metric`, by min-cost flow on the transport graph. Supports are
/// limited to [`W1_SUPPORT_CAP`] points each.
pub fn wasserstein1<P, D>(p: &DiscreteDistribution<P>, q: &DiscreteDistribution<P>, metric: D) -> Result<f64>
where
    P: Clone + PartialEq,
    D: Fn(&P, &P) -> f64,
{
    if p.len() > W1_SUPPORT_CAP || q.len() > W1_SUPPORT_CAP {
        return Err(invalid(format!(
            "supports of {} and {} points exceed the cap of {W1_SUPPORT_CAP}; use the 1-d formula",
            p.len(),
            q.len()
        )));
    }
    let pts: Vec<&P> = p.support.iter().chain(&q.support).collect();
    check_metric(&pts, &metric)?;
    let cost: Vec<Vec<f64>> = p
        .support
        .iter()
        .map(|a| q.support.iter().map(|b| metric(a, b)).collect())
        .collect();
    Ok(transport_cost(&p.mass, &q.mass, &cost))
}

/// Successive shortest augmenting paths on the bipartite transport network
/// `source -> supply i -> demand j -> sink`.
fn transport_cost(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    // flow[i][j] on the transport edges; residual supply/demand on the ends.
    let mut flow = vec![vec![0.0f64; n]; m];
    let mut left: Vec<f64> = supply.to_vec();
    let mut need: Vec<f64> = demand.to_vec();
    let eps = 1e-15;
    // Node ids: supply i -> i, demand j -> m + j.
    loop {
        if left.iter().all(|&x| x <= eps) || need.iter().all(|&x| x <= eps) {
            break;
        }
        // Bellman-Ford from a virtual source to every node.
        let total = m + n;
        let mut dist = vec![f64::INFINITY; total];
        let mut prev: Vec<Option<usize>> = vec![None; total];
        for i in 0..m {
            if left[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..total {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_finite() {
                    for j in 0..n {
                        let nd = dist[i] + cost[i][j];
                        if nd < dist[m + j] - 1e-15 {
                            dist[m + j] = nd;
                            prev[m + j] = Some(i);
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..n {
                if dist[m + j].is_finite() {
                    for i in 0..m {
                        if flow[i][j] > eps {
                            let nd = dist[m + j] - cost[i][j];
                            if nd < dist[i] - 1e-15 {
                                dist[i] = nd;
                                prev[i] = Some(m + j);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..n)
            .filter(|&j| need[j] > eps && dist[m + j].is_finite())
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]));
        let Some(tj) = target else { break };

        // Walk back to find the path and its bottleneck.
        let mut path = vec![m + tj];
        let mut node = m + tj;
        while let Some(pn) = prev[node] {
            path.push(pn);
            node = pn;
        }
        let start = *path.last().expect("nonempty");
        let mut bottleneck = left[start].min(need[tj]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from >= m {
                // backward edge demand(from) -> supply(to) cancels flow[to][from-m]
                bottleneck = bottleneck.min(flow[to][from - m]);
            }
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < m {
                flow[from][to - m] += bottleneck;
            } else {
                flow[to][from - m] -= bottleneck;
            }
        }
        left[start] -= bottleneck;
        need[tj] -= bottleneck;
        if bottleneck <= eps {
            break;
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            total += flow[i][j].max(0.0) * cost[i][j];
        }
    }
    total
}

/// 1-Wasserstein distance on the real line: `integral |F_p - F_q|`.
pub fn wasserstein1_1d(p: &DiscreteDistribution<f64>, q: &DiscreteDistribution<f64>) -> Result<f64> {
    if p.support.iter().chain(&q.support).any(|x| !x.is_finite()) {
        return Err(invalid("support points must be finite"));
    }
    let mut events: Vec<(f64, f64)> = p
        .support
        .iter()
        .zip(&p.mass)
        .map(|(&x, &m)| (x, m))
        .chain(q.support.iter().zip(&q.mass).map(|(&x, &m)| (x, -m)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for w in events.windows(2) {
        cdf_gap += w[0].1;
        total += cdf_gap.abs() * (w[1].0 - w[0].0);
    }
    Ok(total)
}

/// Euclidean distance between equal-length feature vectors.
pub fn euclidean(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
