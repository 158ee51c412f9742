//! Unordered Q-tuples of vectors in R^n with the optimal-matching metric.
//!
//! A [`QPoint`] is stored in canonical form: its sheets are sorted
//! lexicographically, so two QPoints are `==` exactly when they are equal as
//! multisets. Sheet indices used by [`Matching`] refer to this canonical order.

use std::cmp::Ordering;
use thiserror::Error;

use crate::perm::{next_lex, Permutation};

/// Largest Q solved by exhaustive permutation search; above it the
/// augmenting-path assignment solver is used.
pub const EXHAUSTIVE_MAX_Q: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QPointError {
    #[error("dimension mismatch: ({q1} sheets in R^{n1}) vs ({q2} sheets in R^{n2})")]
    DimensionMismatch { q1: usize, n1: usize, q2: usize, n2: usize },
    #[error("separation is undefined for a single sheet")]
    UndefinedSeparation,
    #[error("expected {expected} coordinates for {q} sheets in R^{n}, got {got}")]
    BadLength { q: usize, n: usize, expected: usize, got: usize },
    #[error("a QPoint needs q >= 1 and n >= 1")]
    Empty,
}

/// A point of A_Q(R^n).
#[derive(Debug, Clone, PartialEq)]
pub struct QPoint {
    q: usize,
    n: usize,
    coords: Vec<f64>,
}

impl QPoint {
    /// Builds a QPoint from `q` sheets laid out contiguously (`q * n` coordinates).
    pub fn new(q: usize, n: usize, coords: Vec<f64>) -> Result<Self, QPointError> {
        if q == 0 || n == 0 {
            return Err(QPointError::Empty);
        }
        if coords.len() != q * n {
            return Err(QPointError::BadLength { q, n, expected: q * n, got: coords.len() });
        }
        let mut p = QPoint { q, n, coords };
        p.canonicalize();
        Ok(p)
    }

    pub fn from_sheets(sheets: &[Vec<f64>]) -> Result<Self, QPointError> {
        let q = sheets.len();
        let n = sheets.first().map_or(0, |s| s.len());
        let mut coords = Vec::with_capacity(q * n);
        for s in sheets {
            if s.len() != n {
                return Err(QPointError::BadLength { q, n, expected: q * n, got: q * s.len() });
            }
            coords.extend_from_slice(s);
        }
        QPoint::new(q, n, coords)
    }

    /// Q copies of the origin.
    pub fn zero(q: usize, n: usize) -> Self {
        QPoint { q, n, coords: vec![0.0; q * n] }
    }

    /// Q copies of one vector.
    pub fn repeated(q: usize, v: &[f64]) -> Self {
        let n = v.len();
        let mut coords = Vec::with_capacity(q * n);
        for _ in 0..q {
            coords.extend_from_slice(v);
        }
        QPoint { q, n, coords }.canonical()
    }

    fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    fn canonicalize(&mut self) {
        for c in &mut self.coords {
            // -0.0 and 0.0 must compare equal structurally.
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        if self.q < 2 {
            return;
        }
        let n = self.n;
        let mut sheets: Vec<&[f64]> = self.coords.chunks(n).collect();
        sheets.sort_by(|a, b| lex_cmp(a, b));
        self.coords = sheets.concat();
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn sheet(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn sheets(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.n)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Applies `f` to every sheet and re-canonicalizes.
    pub fn map_sheets<F: FnMut(&[f64]) -> Vec<f64>>(&self, mut f: F) -> QPoint {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut n_out = 0;
        for s in self.sheets() {
            let v = f(s);
            n_out = v.len();
            coords.extend(v);
        }
        QPoint { q: self.q, n: n_out, coords }.canonical()
    }

    pub fn scaled(&self, c: f64) -> QPoint {
        self.map_sheets(|s| s.iter().map(|x| x * c).collect())
    }

    /// Sum of squared sheet norms, i.e. |f|^2 for the Q-valued function value.
    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum()
    }

    /// Barycenter (1/Q) * sum of sheets.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for s in self.sheets() {
            for (mi, si) in m.iter_mut().zip(s) {
                *mi += si;
            }
        }
        let inv = 1.0 / self.q as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }

    /// Minimum distance between two distinct sheets.
    pub fn separation(&self) -> Result<f64, QPointError> {
        if self.q < 2 {
            return Err(QPointError::UndefinedSeparation);
        }
        let mut best = f64::INFINITY;
        for i in 0..self.q {
            for j in i + 1..self.q {
                best = best.min(dist_sq(self.sheet(i), self.sheet(j)));
            }
        }
        Ok(best.sqrt())
    }

    /// Multiset equality where matched coordinates may differ by at most `tol`.
    pub fn eq_within(&self, other: &QPoint, tol: f64) -> bool {
        let Ok(m) = best_matching(self, other) else {
            return false;
        };
        (0..self.q).all(|i| {
            let a = self.sheet(i);
            let b = other.sheet(m.permutation.image(i));
            a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
        })
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// An optimal sheet assignment: sheet `i` of `a` is paired with sheet
/// `permutation.image(i)` of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub permutation: Permutation,
    /// Sum of squared Euclidean distances over the pairing.
    pub cost: f64,
}

fn check_dims(a: &QPoint, b: &QPoint) -> Result<(), QPointError> {
    if a.q != b.q || a.n != b.n {
        return Err(QPointError::DimensionMismatch { q1: a.q, n1: a.n, q2: b.q, n2: b.n });
    }
    Ok(())
}

/// Optimal-matching distance on A_Q(R^n).
pub fn g_distance(a: &QPoint, b: &QPoint) -> Result<f64, QPointError> {
    Ok(best_matching(a, b)?.cost.sqrt())
}

/// Squared optimal-matching distance without building a [`Matching`].
pub fn g_distance_sq(a: &QPoint, b: &QPoint) -> Result<f64, QPointError> {
    check_dims(a, b)?;
    Ok(match a.q {
        1 => dist_sq(&a.coords, &b.coords),
        2 => {
            let direct = dist_sq(a.sheet(0), b.sheet(0)) + dist_sq(a.sheet(1), b.sheet(1));
            let crossed = dist_sq(a.sheet(0), b.sheet(1)) + dist_sq(a.sheet(1), b.sheet(0));
            direct.min(crossed)
        }
        _ => best_matching(a, b)?.cost,
    })
}

/// Writes the optimal partner index of each sheet of `a` into `out` without
/// allocating for Q <= 2. Same tie-breaking as [`best_matching`].
pub(crate) fn match_into(a: &QPoint, b: &QPoint, out: &mut [usize]) {
    debug_assert!(a.q == b.q && a.n == b.n && out.len() == a.q);
    match a.q {
        1 => out[0] = 0,
        2 => {
            let direct = dist_sq(a.sheet(0), b.sheet(0)) + dist_sq(a.sheet(1), b.sheet(1));
            let crossed = dist_sq(a.sheet(0), b.sheet(1)) + dist_sq(a.sheet(1), b.sheet(0));
            if crossed < direct {
                out[0] = 1;
                out[1] = 0;
            } else {
                out[0] = 0;
                out[1] = 1;
            }
        }
        _ => {
            let m = best_matching(a, b).expect("dimensions checked by caller");
            out.copy_from_slice(m.permutation.as_slice());
        }
    }
}

/// Minimizing sheet assignment; ties go to the lexicographically smallest permutation.
pub fn best_matching(a: &QPoint, b: &QPoint) -> Result<Matching, QPointError> {
    check_dims(a, b)?;
    let q = a.q;
    let cost: Vec<f64> = (0..q)
        .flat_map(|i| (0..q).map(move |j| (i, j)))
        .map(|(i, j)| dist_sq(a.sheet(i), b.sheet(j)))
        .collect();
    let (perm, c) = if q <= EXHAUSTIVE_MAX_Q {
        exhaustive_assignment(&cost, q)
    } else {
        lex_smallest_assignment(&cost, q)
    };
    Ok(Matching { permutation: Permutation::from_map(perm).expect("assignment is a bijection"), cost: c })
}

fn exhaustive_assignment(cost: &[f64], q: usize) -> (Vec<usize>, f64) {
    let mut cur: Vec<usize> = (0..q).collect();
    let mut best = cur.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let c: f64 = cur.iter().enumerate().map(|(i, &j)| cost[i * q + j]).sum();
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&cur);
        }
        if !next_lex(&mut cur) {
            break;
        }
    }
    (best, best_cost)
}

/// Optimal assignment by the O(k^3) shortest augmenting path method over a
/// `k x k` row-major cost matrix. Returns `row -> column` and the total cost.
pub(crate) fn hungarian(cost: &[f64], k: usize) -> (Vec<usize>, f64) {
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; k];
    for j in 1..=k {
        row_to_col[p[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i * k + j]).sum();
    (row_to_col, total)
}

/// Hungarian optimum, then the lexicographically smallest permutation whose
/// cost stays within a relative 1e-12 of it (fixing one row at a time).
fn lex_smallest_assignment(cost: &[f64], q: usize) -> (Vec<usize>, f64) {
    let (_, optimum) = hungarian(cost, q);
    let slack = 1e-12 * optimum.abs().max(f64::MIN_POSITIVE);
    let mut fixed: Vec<usize> = Vec::with_capacity(q);
    let mut fixed_cost = 0.0;
    for row in 0..q {
        let mut chosen = None;
        for col in 0..q {
            if fixed.contains(&col) {
                continue;
            }
            let rows: Vec<usize> = (row + 1..q).collect();
            let cols: Vec<usize> = (0..q).filter(|c| *c != col && !fixed.contains(c)).collect();
            let k = rows.len();
            let sub: Vec<f64> = rows
                .iter()
                .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
                .map(|(r, c)| cost[r * q + c])
                .collect();
            let (_, rest) = hungarian(&sub, k);
            let total = fixed_cost + cost[row * q + col] + rest;
            if total <= optimum + slack {
                chosen = Some(col);
                break;
            }
        }
        let col = chosen.expect("some column completes an optimal assignment");
        fixed_cost += cost[row * q + col];
        fixed.push(col);
    }
    (fixed, fixed_cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp1(vals: &[f64]) -> QPoint {
        QPoint::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn permuted_values_are_equal() {
        let a = QPoint::from_sheets(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = QPoint::from_sheets(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(g_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_sheet_distance_is_euclidean() {
        let a = QPoint::new(1, 2, vec![0.0, 0.0]).unwrap();
        let b = QPoint::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(g_distance(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn two_sheet_line_example() {
        // identity pairing costs 1 + 1 = 2, crossed pairing costs 9 + 1 = 10
        let a = qp1(&[0.0, 2.0]);
        let b = qp1(&[1.0, 3.0]);
        assert!((g_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let m = best_matching(&a, &b).unwrap();
        assert!(m.permutation.is_identity());
        assert_eq!(m.cost, 2.0);
    }

    #[test]
    fn equal_inputs_match_by_identity() {
        let a = qp1(&[1.0, 1.0, -2.0]);
        let m = best_matching(&a, &a).unwrap();
        assert!(m.permutation.is_identity());
        assert_eq!(m.cost, 0.0);
    }

    #[test]
    fn mismatched_dimensions_error() {
        let a = qp1(&[0.0, 1.0]);
        let b = qp1(&[0.0, 1.0, 2.0]);
        assert!(matches!(g_distance(&a, &b), Err(QPointError::DimensionMismatch { .. })));
        let c = QPoint::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(best_matching(&a, &c).is_err());
    }

    #[test]
    fn means() {
        let v = QPoint::from_sheets(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        assert_eq!(v.mean(), vec![0.0, 0.0]);
        assert_eq!(QPoint::repeated(2, &[3.0, 4.0]).mean(), vec![3.0, 4.0]);
        let w = QPoint::from_sheets(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(w.mean(), vec![1.0, 0.0]);
    }

    #[test]
    fn separations() {
        assert_eq!(QPoint::repeated(2, &[1.5]).separation().unwrap(), 0.0);
        assert_eq!(qp1(&[0.0, 2.0]).separation().unwrap(), 2.0);
        // square-root sheets at z = 1
        assert_eq!(qp1(&[1.0, -1.0]).separation().unwrap(), 2.0);
        assert_eq!(qp1(&[3.0]).separation(), Err(QPointError::UndefinedSeparation));
    }

    #[test]
    fn hungarian_path_matches_exhaustive_on_ties() {
        // all sheets equal: every permutation ties, the identity must win
        let a = QPoint::repeated(6, &[0.5, 0.5]);
        let m = best_matching(&a, &a).unwrap();
        assert!(m.permutation.is_identity());
    }

    #[test]
    fn negative_zero_is_canonical() {
        assert_eq!(qp1(&[-0.0, 1.0]), qp1(&[0.0, 1.0]));
    }
}
