//! Cornered open books: enumeration, exact densities and the combinatorial
//! side of the 2-d corner classification.
//!
//! Quadrants are identified by the pair of boundary pieces they connect, so
//! a book with given boundary multiplicities is a nonnegative integer matrix
//! `M[k0][k1]` (the multiplicity of the quadrant between `V⁰_k0` and `V¹_k1`)
//! with row sums `Q⁰` and column sums `Q¹`.

use std::fmt::{self, Write as _};

use num_rational::Rational64;
use thiserror::Error;

use crate::transport::{strong_excess, DiscreteMeasure, HalfPlane, TransportError, WedgeBoundary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("boundary multiplicities must be positive")]
    ZeroMultiplicity,
    #[error("boundary needs at least one piece of each orientation")]
    NoPieces,
    #[error("label {label} out of range 1..={max}")]
    Label { label: usize, max: usize },
    #[error("piece {0} of orientation {1} ends with multiplicity {2}, not a valid boundary")]
    InconsistentBoundary(usize, usize, i64),
    #[error("type 3 piece must connect two distinct pieces")]
    DegenerateType3,
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Multiplicities `Q_k⁰` and `Q_k¹` of the boundary half-planes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryConfig {
    pub q0: Vec<u32>,
    pub q1: Vec<u32>,
}

impl BoundaryConfig {
    pub fn new(q0: Vec<u32>, q1: Vec<u32>) -> Result<Self, ConeError> {
        if q0.is_empty() || q1.is_empty() {
            return Err(ConeError::NoPieces);
        }
        if q0.iter().chain(&q1).any(|&q| q == 0) {
            return Err(ConeError::ZeroMultiplicity);
        }
        Ok(BoundaryConfig { q0, q1 })
    }

    pub fn n0(&self) -> usize {
        self.q0.len()
    }

    pub fn n1(&self) -> usize {
        self.q1.len()
    }

    /// Total multiplicity when both orientations agree.
    pub fn q(&self) -> Option<u32> {
        let (a, b) = (self.q0.iter().sum::<u32>(), self.q1.iter().sum::<u32>());
        (a == b).then_some(a)
    }

    /// All configurations with `Q <= max_q` and `N0, N1 <= max_n`.
    pub fn all(max_q: u32, max_n: usize) -> Vec<BoundaryConfig> {
        let mut out = Vec::new();
        for q in 1..=max_q {
            let parts: Vec<Vec<u32>> = compositions(q).into_iter().filter(|c| c.len() <= max_n).collect();
            for a in &parts {
                for b in &parts {
                    out.push(BoundaryConfig { q0: a.clone(), q1: b.clone() });
                }
            }
        }
        out
    }
}

impl fmt::Display for BoundaryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        write!(f, "Q0=[{}] Q1=[{}]", show(&self.q0), show(&self.q1))
    }
}

/// Ordered ways of writing `q` as a sum of positive integers.
fn compositions(q: u32) -> Vec<Vec<u32>> {
    if q == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=q {
        for mut rest in compositions(q - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// One quadrant: connects `V⁰_k0` to `V¹_k1` (labels from 1) with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quadrant {
    pub k0: usize,
    pub k1: usize,
    pub mult: u32,
}

/// A cornered open book in canonical form: quadrants sorted by labels, at
/// most one quadrant per label pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorneredOpenBook {
    pub n0: usize,
    pub n1: usize,
    quadrants: Vec<Quadrant>,
}

impl CorneredOpenBook {
    /// Merges quadrants with equal labels and sorts.
    pub fn new(n0: usize, n1: usize, quadrants: &[Quadrant]) -> Result<Self, ConeError> {
        let mut table = vec![0u32; n0 * n1];
        for q in quadrants {
            check_label(q.k0, n0)?;
            check_label(q.k1, n1)?;
            table[(q.k0 - 1) * n1 + q.k1 - 1] += q.mult;
        }
        Ok(Self::from_table(n0, n1, &table))
    }

    fn from_table(n0: usize, n1: usize, table: &[u32]) -> Self {
        let quadrants = (0..n0 * n1)
            .filter(|&k| table[k] > 0)
            .map(|k| Quadrant { k0: k / n1 + 1, k1: k % n1 + 1, mult: table[k] })
            .collect();
        CorneredOpenBook { n0, n1, quadrants }
    }

    pub fn quadrants(&self) -> &[Quadrant] {
        &self.quadrants
    }

    pub fn q(&self) -> u32 {
        self.quadrants.iter().map(|q| q.mult).sum()
    }

    /// The boundary multiplicities this book induces.
    pub fn boundary(&self) -> BoundaryConfig {
        let mut q0 = vec![0; self.n0];
        let mut q1 = vec![0; self.n1];
        for q in &self.quadrants {
            q0[q.k0 - 1] += q.mult;
            q1[q.k1 - 1] += q.mult;
        }
        BoundaryConfig { q0, q1 }
    }

    /// Structured text: a header line then one `quadrant k0 k1 mult` line each.
    pub fn to_text(&self) -> String {
        let mut s = format!("book n0 {} n1 {}\n", self.n0, self.n1);
        for q in &self.quadrants {
            let _ = writeln!(s, "quadrant {} {} {}", q.k0, q.k1, q.mult);
        }
        s
    }
}

impl fmt::Display for CorneredOpenBook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.quadrants.iter().map(|q| format!("{}x({},{})", q.mult, q.k0, q.k1)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn check_label(label: usize, max: usize) -> Result<(), ConeError> {
    if label == 0 || label > max {
        return Err(ConeError::Label { label, max });
    }
    Ok(())
}

/// All books with boundary `b` using at most `max_sheets` distinct quadrants.
/// Unequal orientation totals give an empty list.
pub fn enumerate_admissible_books(b: &BoundaryConfig, max_sheets: usize) -> Vec<CorneredOpenBook> {
    let (n0, n1) = (b.n0(), b.n1());
    if b.q().is_none() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut table = vec![0u32; n0 * n1];
    let mut cols = b.q1.clone();
    fill_rows(b, 0, &mut table, &mut cols, &mut out, max_sheets);
    out
}

fn fill_rows(
    b: &BoundaryConfig,
    row: usize,
    table: &mut Vec<u32>,
    cols: &mut Vec<u32>,
    out: &mut Vec<CorneredOpenBook>,
    max_sheets: usize,
) {
    let (n0, n1) = (b.n0(), b.n1());
    if row == n0 {
        if cols.iter().all(|&c| c == 0) && table.iter().filter(|&&x| x > 0).count() <= max_sheets {
            out.push(CorneredOpenBook::from_table(n0, n1, table));
        }
        return;
    }
    fill_cells(b, row, 0, b.q0[row], table, cols, out, max_sheets);
}

#[allow(clippy::too_many_arguments)]
fn fill_cells(
    b: &BoundaryConfig,
    row: usize,
    col: usize,
    left: u32,
    table: &mut Vec<u32>,
    cols: &mut Vec<u32>,
    out: &mut Vec<CorneredOpenBook>,
    max_sheets: usize,
) {
    let n1 = b.n1();
    if col == n1 - 1 {
        if left <= cols[col] {
            table[row * n1 + col] = left;
            cols[col] -= left;
            fill_rows(b, row + 1, table, cols, out, max_sheets);
            cols[col] += left;
            table[row * n1 + col] = 0;
        }
        return;
    }
    for x in 0..=left.min(cols[col]) {
        table[row * n1 + col] = x;
        cols[col] -= x;
        fill_cells(b, row, col + 1, left - x, table, cols, out, max_sheets);
        cols[col] += x;
    }
    table[row * n1 + col] = 0;
}

/// `Θ(C, 0) = Σ Q'_i / 4`: each perpendicular quadrant is a quarter plane.
pub fn book_density(c: &CorneredOpenBook) -> Rational64 {
    Rational64::new(c.q() as i64, 4)
}

/// A plane piece of a 2-d cornered cone, with boundary labels from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Piece {
    /// No boundary.
    FullPlane,
    /// Boundary `V⁰_k0 - V¹_k1`.
    Type1 { k0: usize, k1: usize },
    /// Boundary `-V⁰_k0 + V¹_k1`.
    Type2 { k0: usize, k1: usize },
    /// Boundary `V^j_a - V^j_b`, `a != b`, `j ∈ {0, 1}`.
    Type3 { j: usize, a: usize, b: usize },
}

impl Piece {
    pub fn name(&self) -> &'static str {
        match self {
            Piece::FullPlane => "FULL_PLANE",
            Piece::Type1 { .. } => "TYPE1",
            Piece::Type2 { .. } => "TYPE2",
            Piece::Type3 { .. } => "TYPE3",
        }
    }

    fn density_quarters(&self) -> i64 {
        match self {
            Piece::FullPlane => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    MinimalBook,
    DensityAboveQ4,
    Inadmissible,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::MinimalBook => "MINIMAL_BOOK",
            Verdict::DensityAboveQ4 => "DENSITY_ABOVE_Q4",
            Verdict::Inadmissible => "INADMISSIBLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub theta: Rational64,
    pub boundary: BoundaryConfig,
}

impl Classification {
    pub fn q(&self) -> u32 {
        self.boundary.q().expect("classified boundaries are balanced")
    }
}

/// Classifies a decomposition into plane pieces with multiplicities against
/// its induced boundary `(n0, n1)` pieces.
///
/// The verdict follows the combinatorial ledger of the 2-d argument: a full
/// plane with positive multiplicity, or a type 2 quadrant with no type 3
/// quadrant (which forces a cancelling pair), is `INADMISSIBLE`; otherwise
/// `Θ = Q/4` with only type 1 pieces is `MINIMAL_BOOK` and anything else has
/// `Θ > Q/4`.
pub fn classify_2d_cone(n0: usize, n1: usize, pieces: &[(Piece, u32)]) -> Result<Classification, ConeError> {
    let mut c0 = vec![0i64; n0];
    let mut c1 = vec![0i64; n1];
    let mut quarters = 0i64;
    let (mut full, mut t2, mut t3) = (false, false, false);
    for &(p, mult) in pieces {
        if mult == 0 {
            continue;
        }
        let m = mult as i64;
        quarters += m * p.density_quarters();
        match p {
            Piece::FullPlane => full = true,
            Piece::Type1 { k0, k1 } | Piece::Type2 { k0, k1 } => {
                check_label(k0, n0)?;
                check_label(k1, n1)?;
                let s = if matches!(p, Piece::Type1 { .. }) { m } else { -m };
                t2 |= s < 0;
                c0[k0 - 1] += s;
                c1[k1 - 1] += s;
            }
            Piece::Type3 { j, a, b } => {
                let (c, n) = if j == 0 { (&mut c0, n0) } else { (&mut c1, n1) };
                check_label(a, n)?;
                check_label(b, n)?;
                if a == b {
                    return Err(ConeError::DegenerateType3);
                }
                t3 = true;
                // Q¹ counts -V¹, so the signs flip on that side.
                let s = if j == 0 { m } else { -m };
                c[a - 1] += s;
                c[b - 1] -= s;
            }
        }
    }
    for (j, c) in [&c0, &c1].into_iter().enumerate() {
        if let Some(k) = c.iter().position(|&x| x <= 0) {
            return Err(ConeError::InconsistentBoundary(k + 1, j, c[k]));
        }
    }
    let boundary = BoundaryConfig {
        q0: c0.iter().map(|&x| x as u32).collect(),
        q1: c1.iter().map(|&x| x as u32).collect(),
    };
    let q = boundary.q().expect("every piece preserves the balance") as i64;
    let theta = Rational64::new(quarters, 4);
    let quarter_q = Rational64::new(q, 4);
    let verdict = if full || (t2 && !t3) {
        Verdict::Inadmissible
    } else if theta == quarter_q && !t2 && !t3 {
        Verdict::MinimalBook
    } else {
        Verdict::DensityAboveQ4
    };
    Ok(Classification { verdict, theta, boundary })
}

/// Every piece kind available with `n0` and `n1` boundary pieces.
pub fn piece_kinds(n0: usize, n1: usize) -> Vec<Piece> {
    let mut out = vec![Piece::FullPlane];
    for k0 in 1..=n0 {
        for k1 in 1..=n1 {
            out.push(Piece::Type1 { k0, k1 });
            out.push(Piece::Type2 { k0, k1 });
        }
    }
    for (j, n) in [(0, n0), (1, n1)] {
        for a in 1..=n {
            for b in 1..=n {
                if a != b {
                    out.push(Piece::Type3 { j, a, b });
                }
            }
        }
    }
    out
}

/// Calls `visit` on every multiset of at most `max_slots` pieces with
/// multiplicities in `1..=max_mult` (each multiset once).
pub fn for_each_decomposition<F: FnMut(&[(Piece, u32)])>(n0: usize, n1: usize, max_slots: usize, max_mult: u32, mut visit: F) {
    let kinds = piece_kinds(n0, n1);
    let options: Vec<(Piece, u32)> = kinds.iter().flat_map(|&p| (1..=max_mult).map(move |m| (p, m))).collect();
    let mut current = Vec::with_capacity(max_slots);
    fn rec<F: FnMut(&[(Piece, u32)])>(opts: &[(Piece, u32)], from: usize, left: usize, cur: &mut Vec<(Piece, u32)>, visit: &mut F) {
        if !cur.is_empty() {
            visit(cur);
        }
        if left == 0 {
            return;
        }
        for k in from..opts.len() {
            cur.push(opts[k]);
            rec(opts, k, left - 1, cur, visit);
            cur.pop();
        }
    }
    rec(&options, 0, max_slots, &mut current, &mut visit);
}

/// The boundary half-lines of a 2-d book with all `V` directions mutually
/// orthogonal: `V⁰_k` along `e_k`, `V¹_k` along `e_{n0+k}`, in
/// `R^{n0+n1+1}` (the last axis is a common normal).
pub fn standard_wedge(n0: usize, n1: usize) -> WedgeBoundary {
    let dim = n0 + n1 + 1;
    WedgeBoundary::new(
        (0..n0 + n1)
            .map(|k| {
                let mut e = vec![0.0; dim];
                e[k] = 1.0;
                HalfPlane::new(Vec::new(), e).expect("unit vector")
            })
            .collect(),
    )
}

/// Area measure of a book inside `B_radius`, optionally perturbed as the
/// graph `p + λ a b ν` over each quadrant `{a v⁰ + b v¹}` (the bump vanishes
/// on both boundary half-lines). Atoms sit at cell centres of a grid of
/// spacing `radius * h` in `(a, b)`, weighted by cell area, area element and
/// multiplicity.
pub fn book_measure(c: &CorneredOpenBook, radius: f64, h: f64, lambda: f64) -> DiscreteMeasure {
    let dim = c.n0 + c.n1 + 1;
    let step = radius * h;
    let cells = (1.0 / h).ceil() as usize;
    let mut m = DiscreteMeasure::empty(dim);
    for q in c.quadrants() {
        for i in 0..cells {
            for j in 0..cells {
                let a = (i as f64 + 0.5) * step;
                let b = (j as f64 + 0.5) * step;
                if a * a + b * b >= radius * radius {
                    continue;
                }
                let mut x = vec![0.0; dim];
                x[q.k0 - 1] = a;
                x[c.n0 + q.k1 - 1] = b;
                x[dim - 1] = lambda * a * b;
                let area = (1.0 + lambda * lambda * (a * a + b * b)).sqrt();
                m.push(&x, step * step * area * q.mult as f64).expect("finite atom");
            }
        }
    }
    m
}

/// Quadrature resolution used by [`uniqueness_gap`].
pub const GAP_RESOLUTION: f64 = 1.0 / 8.0;

/// `min 𝔼(C, C', B_1)` over distinct admissible books; `None` (infinite)
/// when fewer than two books exist.
pub fn uniqueness_gap(b: &BoundaryConfig, max_sheets: usize) -> Result<Option<f64>, ConeError> {
    let books = enumerate_admissible_books(b, max_sheets);
    let w = standard_wedge(b.n0(), b.n1());
    let measures: Vec<DiscreteMeasure> = books.iter().map(|c| book_measure(c, 1.0, GAP_RESOLUTION, 0.0)).collect();
    let mut gap: Option<f64> = None;
    for i in 0..measures.len() {
        for j in i + 1..measures.len() {
            let e = strong_excess(&measures[i], &measures[j], &w, 1.0, 2)?;
            gap = Some(gap.map_or(e, |g| g.min(e)));
        }
    }
    Ok(gap)
}
