//! Discrete measures, the quadratic Wasserstein distance, the corner
//! distance with boundary dumping, and the strong excess.

use std::fmt::Write as _;

use thiserror::Error;

use crate::flow::Network;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("atom has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("atom weight {0} is not strictly positive and finite")]
    Weight(f64),
    #[error("unbalanced masses {0} and {1}")]
    Unbalanced(f64, f64),
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("bad spine or direction: {0}")]
    Wedge(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finitely many weighted atoms in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self, TransportError> {
        let mut m = DiscreteMeasure::empty(dim);
        for (x, w) in atoms {
            m.push(&x, w)?;
        }
        Ok(m)
    }

    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure { dim, coords: Vec::new(), weights: Vec::new(), total: 0.0 }
    }

    pub fn push(&mut self, x: &[f64], w: f64) -> Result<(), TransportError> {
        if x.len() != self.dim {
            return Err(TransportError::Dimension { expected: self.dim, got: x.len() });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(TransportError::Weight(w));
        }
        self.coords.extend_from_slice(x);
        self.weights.push(w);
        self.total += w;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Multiplies each weight by the matching factor; zero factors drop the atom.
    pub fn reweighted(&self, factors: &[f64]) -> DiscreteMeasure {
        let mut out = DiscreteMeasure::empty(self.dim);
        for k in 0..self.len() {
            let w = self.weights[k] * factors[k];
            if w > 0.0 {
                out.push(self.atom(k), w).expect("valid atom");
            }
        }
        out
    }

    /// Pushforward under `x -> lambda x` with weights multiplied by `mass`.
    pub fn scaled(&self, lambda: f64, mass: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * lambda).collect(),
            weights: self.weights.iter().map(|w| w * mass).collect(),
            total: self.total * mass,
        }
    }

    /// CSV, one atom per line: coordinates then weight.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        let _ = writeln!(s, "{},weight", header.join(","));
        for k in 0..self.len() {
            let row: Vec<String> = self.atom(k).iter().map(|c| format!("{c:e}")).collect();
            let _ = writeln!(s, "{},{:e}", row.join(","), self.weights[k]);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, TransportError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(TransportError::Parse { line: 1, msg: "empty".into() })?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut m = DiscreteMeasure::empty(dim);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| TransportError::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() != dim + 1 {
                return Err(TransportError::Parse { line: i + 1, msg: format!("expected {} fields", dim + 1) });
            }
            m.push(&vals[..dim], vals[dim])?;
        }
        Ok(m)
    }
}

/// Half-plane `{l + s d : l in L, s >= 0}` with `L` a linear subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlane {
    /// Orthonormal basis of the spine `L`.
    spine: Vec<Vec<f64>>,
    /// Unit direction orthogonal to `L`.
    direction: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl HalfPlane {
    /// Normalizes `direction` and checks orthogonality against the spine basis.
    pub fn new(spine: Vec<Vec<f64>>, direction: Vec<f64>) -> Result<Self, TransportError> {
        let dim = direction.len();
        for (i, e) in spine.iter().enumerate() {
            if e.len() != dim {
                return Err(TransportError::Dimension { expected: dim, got: e.len() });
            }
            if (dot(e, e) - 1.0).abs() > 1e-12 {
                return Err(TransportError::Wedge("spine basis is not unit length".into()));
            }
            for f in &spine[..i] {
                if dot(e, f).abs() > 1e-12 {
                    return Err(TransportError::Wedge("spine basis is not orthogonal".into()));
                }
            }
            if dot(e, &direction).abs() > 1e-12 {
                return Err(TransportError::Wedge("direction is not orthogonal to the spine".into()));
            }
        }
        let len = dot(&direction, &direction).sqrt();
        if len == 0.0 {
            return Err(TransportError::Wedge("zero direction".into()));
        }
        Ok(HalfPlane { spine, direction: direction.iter().map(|c| c / len).collect() })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dist_sq(&self, x: &[f64]) -> f64 {
        let mut perp = x.to_vec();
        for e in &self.spine {
            let c = dot(x, e);
            perp.iter_mut().zip(e).for_each(|(p, ei)| *p -= c * ei);
        }
        let s = dot(&perp, &self.direction).max(0.0);
        perp.iter().zip(&self.direction).map(|(p, d)| (p - s * d).powi(2)).sum()
    }
}

/// Union of half-planes `V_i^j` bounding a cornered cone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WedgeBoundary {
    pub halfplanes: Vec<HalfPlane>,
}

impl WedgeBoundary {
    pub fn new(halfplanes: Vec<HalfPlane>) -> Self {
        WedgeBoundary { halfplanes }
    }

    /// Squared distance to the union; infinite when there are no half-planes.
    pub fn dist_sq(&self, x: &[f64]) -> f64 {
        self.halfplanes.iter().map(|v| v.dist_sq(x)).fold(f64::INFINITY, f64::min)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(), TransportError> {
    if a.dim != b.dim {
        return Err(TransportError::Dimension { expected: a.dim, got: b.dim });
    }
    Ok(())
}

/// Relative tolerance on total masses for [`w2_squared`].
pub const BALANCE_TOL: f64 = 1e-9;

/// Squared quadratic Wasserstein distance between measures of equal mass.
pub fn w2_squared(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<f64, TransportError> {
    check_dims(mu1, mu2)?;
    let (t1, t2) = (mu1.total, mu2.total);
    if (t1 - t2).abs() > BALANCE_TOL * t1.max(t2) {
        return Err(TransportError::Unbalanced(t1, t2));
    }
    if mu1.is_empty() {
        return Ok(0.0);
    }
    let (n1, n2) = (mu1.len(), mu2.len());
    let (s, t) = (n1 + n2, n1 + n2 + 1);
    let mut g = Network::new(n1 + n2 + 2);
    // Rescale the second side so both sides carry the same mass exactly.
    let fix = t1 / t2;
    for i in 0..n1 {
        g.add_arc(s, i, mu1.weights[i], 0.0);
    }
    for j in 0..n2 {
        g.add_arc(n1 + j, t, mu2.weights[j] * fix, 0.0);
    }
    for i in 0..n1 {
        for j in 0..n2 {
            g.add_arc(i, n1 + j, f64::INFINITY, sq_dist(mu1.atom(i), mu2.atom(j)));
        }
    }
    Ok(g.min_cost_flow(s, t, t1).1)
}

/// An optimal splitting for [`corner_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct CornerPlan {
    pub cost: f64,
    /// `(i, j, mass)` moved from atom `i` of the first measure to atom `j` of the second.
    pub transported: Vec<(usize, usize, f64)>,
    pub dumped_first: Vec<f64>,
    pub dumped_second: Vec<f64>,
}

/// `min W2(μ¹_1, μ²_1)² + Σ_l ∫ dist(x, ∪V)² dμ^l_2` over splittings
/// `μ^l = μ^l_1 + μ^l_2`, solved as a balanced transportation problem with a
/// dump node on each side.
pub fn corner_plan(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, w: &WedgeBoundary) -> Result<CornerPlan, TransportError> {
    check_dims(mu1, mu2)?;
    for v in &w.halfplanes {
        if v.dim() != mu1.dim {
            return Err(TransportError::Dimension { expected: mu1.dim, got: v.dim() });
        }
    }
    let (n1, n2) = (mu1.len(), mu2.len());
    // Nodes: supplies 0..n1, dump supply n1; demands n1+1..n1+1+n2, dump demand; s, t.
    let dump_src = n1;
    let dem = |j: usize| n1 + 1 + j;
    let dump_dst = n1 + 1 + n2;
    let (s, t) = (dump_dst + 1, dump_dst + 2);
    let total = mu1.total + mu2.total;
    let mut g = Network::new(dump_dst + 3);
    for i in 0..n1 {
        g.add_arc(s, i, mu1.weights[i], 0.0);
    }
    g.add_arc(s, dump_src, mu2.total, 0.0);
    for j in 0..n2 {
        g.add_arc(dem(j), t, mu2.weights[j], 0.0);
    }
    g.add_arc(dump_dst, t, mu1.total, 0.0);
    let mut pairs = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let id = g.add_arc(i, dem(j), f64::INFINITY, sq_dist(mu1.atom(i), mu2.atom(j)));
            pairs.push((i, j, id));
        }
    }
    let mut dump1 = Vec::with_capacity(n1);
    for i in 0..n1 {
        let d = w.dist_sq(mu1.atom(i));
        dump1.push(if d.is_finite() { Some(g.add_arc(i, dump_dst, f64::INFINITY, d)) } else { None });
    }
    let mut dump2 = Vec::with_capacity(n2);
    for j in 0..n2 {
        let d = w.dist_sq(mu2.atom(j));
        dump2.push(if d.is_finite() { Some(g.add_arc(dump_src, dem(j), f64::INFINITY, d)) } else { None });
    }
    g.add_arc(dump_src, dump_dst, f64::INFINITY, 0.0);
    let (sent, cost) = g.min_cost_flow(s, t, total);
    if total - sent > 1e-9 * total.max(1.0) {
        // Only possible without half-planes and with unequal masses.
        return Err(TransportError::Unbalanced(mu1.total, mu2.total));
    }
    let flow = |id: Option<usize>| id.map_or(0.0, |id| g.flow_on(id).max(0.0));
    Ok(CornerPlan {
        cost,
        transported: pairs
            .iter()
            .filter_map(|&(i, j, id)| {
                let f = g.flow_on(id);
                (f > 0.0).then_some((i, j, f))
            })
            .collect(),
        dumped_first: dump1.into_iter().map(flow).collect(),
        dumped_second: dump2.into_iter().map(flow).collect(),
    })
}

/// The corner distance `d(μ¹, μ²)`.
pub fn corner_distance(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, w: &WedgeBoundary) -> Result<f64, TransportError> {
    corner_plan(mu1, mu2, w).map(|p| p.cost)
}

/// The bump profile: 1 on `|ξ| <= 1/2`, `(2(1 - |ξ|))²` up to 1, then 0.
pub fn bump(norm: f64) -> f64 {
    if norm <= 0.5 {
        1.0
    } else if norm < 1.0 {
        let a = 2.0 * (1.0 - norm);
        a * a
    } else {
        0.0
    }
}

/// `φ((x - center) / r)` for each atom.
pub fn bump_weights(mu: &DiscreteMeasure, center: &[f64], r: f64) -> Result<Vec<f64>, TransportError> {
    if !(r > 0.0) {
        return Err(TransportError::Radius(r));
    }
    if center.len() != mu.dim {
        return Err(TransportError::Dimension { expected: mu.dim, got: center.len() });
    }
    Ok((0..mu.len()).map(|k| bump(sq_dist(mu.atom(k), center).sqrt() / r)).collect())
}

/// `r^-(m+2) d(φ_r |T|, φ_r |C|)` with the bump centred at the origin.
pub fn strong_excess(t_mu: &DiscreteMeasure, c_mu: &DiscreteMeasure, w: &WedgeBoundary, r: f64, m: usize) -> Result<f64, TransportError> {
    let origin = vec![0.0; t_mu.dim];
    let t_w = t_mu.reweighted(&bump_weights(t_mu, &origin, r)?);
    let c_w = c_mu.reweighted(&bump_weights(c_mu, &origin, r)?);
    Ok(corner_distance(&t_w, &c_w, w)? * r.powi(-(m as i32 + 2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: &[f64], w: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(x.len(), vec![(x.to_vec(), w)]).unwrap()
    }

    fn axes_wedge() -> WedgeBoundary {
        WedgeBoundary::new(vec![
            HalfPlane::new(vec![], vec![1.0, 0.0]).unwrap(),
            HalfPlane::new(vec![], vec![0.0, 1.0]).unwrap(),
        ])
    }

    #[test]
    fn w2_simple_cases() {
        let a = point(&[0.0, 0.0], 1.0);
        let b = point(&[3.0, 4.0], 1.0);
        assert_eq!(w2_squared(&a, &a).unwrap(), 0.0);
        assert!((w2_squared(&a, &b).unwrap() - 25.0).abs() < 1e-12);
        assert!(matches!(w2_squared(&a, &point(&[0.0, 0.0], 2.0)), Err(TransportError::Unbalanced(..))));
    }

    #[test]
    fn halfplane_distance() {
        let v = HalfPlane::new(vec![vec![0.0, 0.0, 1.0]], vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.dist_sq(&[2.0, 3.0, 7.0]), 9.0);
        assert_eq!(v.dist_sq(&[-2.0, 3.0, 7.0]), 13.0);
        assert!(HalfPlane::new(vec![vec![1.0, 0.0, 0.0]], vec![1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn corner_distance_cases() {
        let w = axes_wedge();
        let a = point(&[1.0, 1.0], 1.0);
        assert_eq!(corner_distance(&a, &a, &w).unwrap(), 0.0);
        let empty = DiscreteMeasure::empty(2);
        assert!((corner_distance(&a, &empty, &w).unwrap() - 1.0).abs() < 1e-12);
        // |x - y|^2 = 36 > 1 + 1: both atoms are dumped.
        let b = point(&[1.0, 7.0], 1.0);
        let plan = corner_plan(&a, &b, &w).unwrap();
        assert!((plan.cost - 2.0).abs() < 1e-12);
        assert!(plan.transported.is_empty());
    }

    #[test]
    fn bump_profile() {
        assert_eq!(bump(0.25), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert!((bump(0.75) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::new(2, vec![(vec![0.5, -1.0], 0.25), (vec![3.0, 1e-7], 2.0)]).unwrap();
        assert_eq!(DiscreteMeasure::from_csv(&m.to_csv()).unwrap(), m);
        assert!(DiscreteMeasure::new(1, vec![(vec![0.0], 0.0)]).is_err());
    }
}
