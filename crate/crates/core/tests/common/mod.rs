#![allow(dead_code)]

use std::sync::Arc;

use qlab_core::dirichlet::{complex_sqrt, MultiField};
use qlab_core::domains::disk;
use qlab_core::QPoint;
use rand::Rng;

pub fn random_qpoint<R: Rng>(rng: &mut R, q: usize, n: usize) -> QPoint {
    QPoint::new(q, n, (0..q * n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(q - 1) {
        for pos in 0..q {
            let mut x = p.clone();
            x.insert(pos, q - 1);
            out.push(x);
        }
    }
    out
}

/// Minimum of `Σ |a_i - b_σ(i)|²` over all `Q!` permutations.
pub fn brute_force_matching(a: &QPoint, b: &QPoint) -> f64 {
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    permutations(a.q())
        .iter()
        .map(|s| (0..a.q()).map(|i| sq(a.sheet(i), b.sheet(s[i]))).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Dense two-phase tableau simplex with Bland's rule: `min c·x` subject to
/// `A x = b`, `x >= 0`. `None` when infeasible or unbounded.
pub fn lp_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let (m, n) = (a.len(), c.len());
    let rhs = n + m;
    let mut t = vec![vec![0.0; n + m + 1]; m];
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = s * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][rhs] = s * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, j: usize) {
        let p = t[r][j];
        t[r].iter_mut().for_each(|x| *x /= p);
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[j] != 0.0 {
                let f = ti[j];
                ti.iter_mut().zip(&row).for_each(|(x, y)| *x -= f * y);
            }
        }
        basis[r] = j;
    }

    fn optimize(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
        let rhs = t[0].len() - 1;
        loop {
            let entering = (0..allowed).find(|&j| {
                !basis.contains(&j) && cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>() < -EPS
            });
            let Some(j) = entering else { return true };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..t.len() {
                if t[i][j] > EPS {
                    let ratio = t[i][rhs] / t[i][j];
                    let better = match best {
                        None => true,
                        Some((r, _, bi)) => ratio < r - EPS || (ratio <= r + EPS && basis[i] < bi),
                    };
                    if better {
                        best = Some((ratio, i, basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = best else { return false };
            pivot(t, basis, r, j);
        }
    }

    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    optimize(&mut t, &mut basis, &phase1, n + m);
    let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][rhs]).sum();
    let scale = b.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if infeasibility > 1e-9 * scale {
        return None;
    }
    for r in 0..m {
        if basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| t[r][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, r, j);
            }
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !optimize(&mut t, &mut basis, &cost, n) {
        return None;
    }
    Some((0..m).map(|i| cost[basis[i]] * t[i][rhs]).sum())
}

/// The splitting problem as a balanced transportation problem: supplies
/// `a ∪ {Σb}`, demands `b ∪ {Σa}`, pair costs `|x - y|²`, dump costs from the
/// given distance function, zero cost dump to dump.
pub struct TransportInstance {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    pub cost: Vec<Vec<f64>>,
}

impl TransportInstance {
    pub fn new(xs: &[(Vec<f64>, f64)], ys: &[(Vec<f64>, f64)], dist_sq: impl Fn(&[f64]) -> f64) -> Self {
        let ta: f64 = xs.iter().map(|a| a.1).sum();
        let tb: f64 = ys.iter().map(|a| a.1).sum();
        let mut supply: Vec<f64> = xs.iter().map(|a| a.1).collect();
        supply.push(tb);
        let mut demand: Vec<f64> = ys.iter().map(|a| a.1).collect();
        demand.push(ta);
        let mut cost = Vec::new();
        for (x, _) in xs {
            let mut row: Vec<f64> =
                ys.iter().map(|(y, _)| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum()).collect();
            row.push(dist_sq(x));
            cost.push(row);
        }
        let mut last: Vec<f64> = ys.iter().map(|(y, _)| dist_sq(y)).collect();
        last.push(0.0);
        cost.push(last);
        TransportInstance { supply, demand, cost }
    }

    pub fn solve_lp(&self) -> f64 {
        let (p, q) = (self.supply.len(), self.demand.len());
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..p {
            let mut row = vec![0.0; p * q];
            (0..q).for_each(|j| row[i * q + j] = 1.0);
            a.push(row);
            b.push(self.supply[i]);
        }
        for j in 0..q {
            let mut row = vec![0.0; p * q];
            (0..p).for_each(|i| row[i * q + j] = 1.0);
            a.push(row);
            b.push(self.demand[j]);
        }
        let c: Vec<f64> = self.cost.iter().flatten().copied().collect();
        lp_min(&a, &b, &c).expect("balanced transportation problems are feasible")
    }

    /// Minimum over all basic feasible solutions: every set of `p + q - 1`
    /// cells forming a spanning tree of the bipartite supply/demand graph,
    /// solved by peeling leaves.
    pub fn solve_by_bases(&self) -> f64 {
        let (p, q) = (self.supply.len(), self.demand.len());
        let cells: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..q).map(move |j| (i, j))).collect();
        let k = p + q - 1;
        let mut best = f64::INFINITY;
        let mut chosen = Vec::with_capacity(k);
        self.bases(&cells, 0, k, &mut chosen, &mut best);
        best
    }

    fn bases(&self, cells: &[(usize, usize)], from: usize, k: usize, chosen: &mut Vec<(usize, usize)>, best: &mut f64) {
        if chosen.len() == k {
            if let Some(c) = self.tree_cost(chosen) {
                *best = best.min(c);
            }
            return;
        }
        for idx in from..cells.len() {
            if cells.len() - idx < k - chosen.len() {
                break;
            }
            chosen.push(cells[idx]);
            self.bases(cells, idx + 1, k, chosen, best);
            chosen.pop();
        }
    }

    fn tree_cost(&self, cells: &[(usize, usize)]) -> Option<f64> {
        let (p, q) = (self.supply.len(), self.demand.len());
        let mut sup = self.supply.clone();
        let mut dem = self.demand.clone();
        let mut live = vec![true; cells.len()];
        let mut cost = 0.0;
        let scale = sup.iter().sum::<f64>().max(1.0);
        for _ in 0..cells.len() {
            let mut deg = vec![0usize; p + q];
            for (c, &(i, j)) in cells.iter().enumerate() {
                if live[c] {
                    deg[i] += 1;
                    deg[p + j] += 1;
                }
            }
            // A leaf fixes the flow on its only live cell.
            let pick = cells.iter().enumerate().find_map(|(c, &(i, j))| {
                if !live[c] {
                    None
                } else if deg[i] == 1 {
                    Some((c, sup[i]))
                } else if deg[p + j] == 1 {
                    Some((c, dem[j]))
                } else {
                    None
                }
            });
            let (c, x) = pick?;
            let (i, j) = cells[c];
            if x < -1e-12 * scale {
                return None;
            }
            sup[i] -= x;
            dem[j] -= x;
            cost += x * self.cost[i][j];
            live[c] = false;
        }
        let residual = sup.iter().chain(&dem).map(|r| r.abs()).fold(0.0, f64::max);
        (residual <= 1e-9 * scale).then_some(cost)
    }
}

/// Squared distance to `{s e_spine + t u : t >= 0}` with `u` a unit vector
/// orthogonal to the spine axis.
pub fn halfplane_dist_sq(x: &[f64], spine_axis: Option<usize>, u: &[f64]) -> f64 {
    let mut p = x.to_vec();
    if let Some(k) = spine_axis {
        p[k] = 0.0;
    }
    let t = p.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    p.iter().map(|a| a * a).sum::<f64>() - t * t
}

/// `z ↦ ±√z` on the unit disk.
pub fn sqrt_disk(h: f64) -> MultiField {
    let mesh = Arc::new(disk(1.0, h).unwrap());
    MultiField::from_fn(mesh, 2, 2, |x| {
        let w = complex_sqrt([x[0], x[1]]);
        QPoint::from_sheets(&[w.to_vec(), vec![-w[0], -w[1]]]).unwrap()
    })
    .unwrap()
}

/// Two sheets at a constant offset on the unit disk.
pub fn offset_disk(h: f64) -> MultiField {
    let mesh = Arc::new(disk(1.0, h).unwrap());
    MultiField::from_fn(mesh, 2, 2, |x| {
        QPoint::from_sheets(&[vec![x[0], 0.3 * x[1]], vec![x[0] + 1.0, 0.3 * x[1]]]).unwrap()
    })
    .unwrap()
}
