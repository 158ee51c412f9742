//! Min-cost flow by successive shortest paths with Dijkstra and potentials.
//! Capacities are real; arcs with non-finite cost are never added.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl Network {
    pub(crate) fn new(n: usize) -> Self {
        Network { arcs: Vec::new(), adj: vec![Vec::new(); n] }
    }

    /// Adds an arc and returns its id for [`Network::flow_on`].
    pub(crate) fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc { to: from, cap: 0.0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow on a forward arc: the residual capacity of its reverse.
    pub(crate) fn flow_on(&self, id: usize) -> f64 {
        self.arcs[id ^ 1].cap
    }

    /// Sends up to `amount` from `s` to `t` at minimum cost. Returns the
    /// amount sent and its cost (summed over arcs, not over path lengths).
    pub(crate) fn min_cost_flow(&mut self, s: usize, t: usize, amount: f64) -> (f64, f64) {
        let n = self.adj.len();
        let eps = 1e-13 * amount.max(1e-300);
        let mut potential = vec![0.0; n];
        let mut sent = 0.0;
        let mut dist = vec![f64::INFINITY; n];
        let mut via = vec![usize::MAX; n];
        while amount - sent > eps {
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            via.iter_mut().for_each(|p| *p = usize::MAX);
            dist[s] = 0.0;
            let mut heap = BinaryHeap::from([Entry(0.0, s)]);
            while let Some(Entry(d, v)) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for &id in &self.adj[v] {
                    let a = self.arcs[id];
                    if a.cap <= eps {
                        continue;
                    }
                    let reduced = (a.cost + potential[v] - potential[a.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        via[a.to] = id;
                        heap.push(Entry(nd, a.to));
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = amount - sent;
            let mut v = t;
            while v != s {
                let id = via[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let id = via[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                v = self.arcs[id ^ 1].to;
            }
            sent += push;
        }
        let cost = (0..self.arcs.len() / 2)
            .map(|k| {
                let f = self.flow_on(2 * k);
                if f > 0.0 {
                    f * self.arcs[2 * k].cost
                } else {
                    0.0
                }
            })
            .sum();
        (sent, cost)
    }
}
