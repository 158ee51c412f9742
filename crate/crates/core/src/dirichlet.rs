//! Discrete Dirichlet energy of Q-valued fields and its minimization.
//!
//! The energy of a [`MultiField`] is `Σ_edges w_ab · G(f(a), f(b))²` where `G`
//! is the optimal-matching distance. [`minimize`] runs nonlinear Gauss–Seidel:
//! each free vertex is replaced by the sheet-wise weighted average of its
//! neighbours after matching every neighbour against the current value. For
//! fixed matchings that average is the exact vertex minimizer, so the energy
//! never increases.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::domains::{Mesh, Tag};
use crate::parallel::{self, Execution};
use crate::qpoints::{g_distance, g_distance_sq, match_into, QPoint, QPointError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirichletError {
    #[error(transparent)]
    QPoint(#[from] QPointError),
    #[error("trace domain error: {0}")]
    Domain(String),
    #[error("field has {got} samples but the mesh has {expected} vertices")]
    SampleCount { expected: usize, got: usize },
    #[error("sample at vertex {vertex} has shape ({q}, {n}), expected ({eq}, {en})")]
    SampleShape { vertex: usize, q: usize, n: usize, eq: usize, en: usize },
    #[error("field text parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A QPoint-valued sample field on a mesh together with its Dirichlet set.
#[derive(Debug, Clone)]
pub struct MultiField {
    mesh: Arc<Mesh>,
    q: usize,
    n: usize,
    samples: Vec<QPoint>,
    fixed: Vec<bool>,
}

impl MultiField {
    pub fn new(mesh: Arc<Mesh>, q: usize, n: usize, samples: Vec<QPoint>) -> Result<Self, DirichletError> {
        if samples.len() != mesh.num_vertices() {
            return Err(DirichletError::SampleCount { expected: mesh.num_vertices(), got: samples.len() });
        }
        for (v, s) in samples.iter().enumerate() {
            if s.q() != q || s.n() != n {
                return Err(DirichletError::SampleShape { vertex: v, q: s.q(), n: s.n(), eq: q, en: n });
            }
        }
        let fixed = vec![false; samples.len()];
        Ok(MultiField { mesh, q, n, samples, fixed })
    }

    pub fn zero(mesh: Arc<Mesh>, q: usize, n: usize) -> Self {
        let samples = vec![QPoint::zero(q, n); mesh.num_vertices()];
        let fixed = vec![false; samples.len()];
        MultiField { mesh, q, n, samples, fixed }
    }

    /// Samples `f` at every vertex position.
    pub fn from_fn<F>(mesh: Arc<Mesh>, q: usize, n: usize, f: F) -> Result<Self, DirichletError>
    where
        F: Fn(&[f64]) -> QPoint,
    {
        let samples = (0..mesh.num_vertices()).map(|v| f(mesh.point(v))).collect();
        MultiField::new(mesh, q, n, samples)
    }

    /// Marks every vertex carrying one of `tags` as Dirichlet data.
    pub fn with_fixed_tags(mut self, tags: &[Tag]) -> Self {
        for v in 0..self.samples.len() {
            if tags.contains(&self.mesh.tag(v)) {
                self.fixed[v] = true;
            }
        }
        self
    }

    /// Overwrites the samples on vertices tagged with any of `tags` by
    /// `data` and marks them fixed.
    pub fn impose<F>(&mut self, tags: &[Tag], data: F)
    where
        F: Fn(&[f64]) -> QPoint,
    {
        for v in 0..self.samples.len() {
            if tags.contains(&self.mesh.tag(v)) {
                let s = data(self.mesh.point(v));
                debug_assert!(s.q() == self.q && s.n() == self.n);
                self.samples[v] = s;
                self.fixed[v] = true;
            }
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample(&self, v: usize) -> &QPoint {
        &self.samples[v]
    }

    pub fn samples(&self) -> &[QPoint] {
        &self.samples
    }

    pub fn set_sample(&mut self, v: usize, value: QPoint) {
        assert!(value.q() == self.q && value.n() == self.n, "sample shape mismatch");
        self.samples[v] = value;
    }

    pub fn is_fixed(&self, v: usize) -> bool {
        self.fixed[v]
    }

    pub fn set_fixed(&mut self, v: usize, fixed: bool) {
        self.fixed[v] = fixed;
    }

    /// Applies `f` to every sheet of every sample (e.g. a target rotation).
    pub fn map_values<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> MultiField {
        let samples: Vec<QPoint> = self.samples.iter().map(|s| s.map_sheets(&f)).collect();
        let n = samples.first().map_or(self.n, |s| s.n());
        MultiField { mesh: self.mesh.clone(), q: self.q, n, samples, fixed: self.fixed.clone() }
    }

    /// Maximum of `G(f(a), f(b))` over mesh edges.
    pub fn max_oscillation(&self) -> f64 {
        self.mesh
            .edges()
            .iter()
            .map(|e| g_distance(&self.samples[e.a], &self.samples[e.b]).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Plain text: a header, then `index c_1 ... c_{Q n}` per vertex (sheets in canonical order).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qlab field v1");
        let _ = writeln!(s, "q {} n {} vertices {}", self.q, self.n, self.samples.len());
        for (v, p) in self.samples.iter().enumerate() {
            let _ = write!(s, "{v}");
            for c in p.coords() {
                let _ = write!(s, " {c:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Reads the output of [`MultiField::to_text`]; vertices carrying
    /// `fixed_tags` are marked as Dirichlet data.
    pub fn from_text(mesh: Arc<Mesh>, text: &str, fixed_tags: &[Tag]) -> Result<Self, DirichletError> {
        let err = |line: usize, msg: &str| DirichletError::Parse { line, msg: msg.to_string() };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, head) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "q" || parts[2] != "n" || parts[4] != "vertices" {
            return Err(err(ln, "expected `q <Q> n <n> vertices <N>`"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| err(ln, "bad integer"));
        let (q, n, nv) = (parse_usize(parts[1])?, parse_usize(parts[3])?, parse_usize(parts[5])?);
        let mut samples = vec![None; nv];
        for (ln, l) in lines {
            let mut it = l.split_whitespace();
            let v: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(|| err(ln, "bad index"))?;
            let coords: Result<Vec<f64>, _> = it.map(str::parse::<f64>).collect();
            let coords = coords.map_err(|_| err(ln, "bad coordinate"))?;
            if v >= nv {
                return Err(err(ln, "index out of range"));
            }
            samples[v] = Some(QPoint::new(q, n, coords)?);
        }
        let samples: Option<Vec<QPoint>> = samples.into_iter().collect();
        let samples = samples.ok_or_else(|| err(0, "missing vertex samples"))?;
        Ok(MultiField::new(mesh, q, n, samples)?.with_fixed_tags(fixed_tags))
    }
}

/// Discrete Dirichlet energy `Σ w_ab G(f(a), f(b))²`.
pub fn energy(f: &MultiField) -> f64 {
    energy_with(f, Execution::Sequential)
}

pub fn energy_with(f: &MultiField, exec: Execution) -> f64 {
    let edges = f.mesh.edges();
    let terms = parallel::map(exec, edges, |e| {
        e.weight * g_distance_sq(&f.samples[e.a], &f.samples[e.b]).expect("field samples share a shape")
    });
    parallel::ordered_sum(&terms)
}

/// Kind of boundary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Zero,
    SqrtCylinder,
    SqrtPlanar,
    Custom,
}

type Sampler = Arc<dyn Fn(&[f64]) -> QPoint + Send + Sync>;

/// Boundary data as a function of position.
#[derive(Clone)]
pub enum Trace {
    /// `Q[[0]]` in `R^n`.
    Zero { q: usize, n: usize },
    /// `(x, y, t) ↦ Σ_{w²=z} [[w t]]` with `z = x + iy`.
    SqrtCylinder,
    /// `(x, y) ↦ Σ_{w²=z} [[w]]`.
    SqrtPlanar,
    Custom(Sampler),
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Trace::{:?}", self.kind())
    }
}

impl Trace {
    pub fn custom<F: Fn(&[f64]) -> QPoint + Send + Sync + 'static>(f: F) -> Self {
        Trace::Custom(Arc::new(f))
    }

    pub fn kind(&self) -> TraceKind {
        match self {
            Trace::Zero { .. } => TraceKind::Zero,
            Trace::SqrtCylinder => TraceKind::SqrtCylinder,
            Trace::SqrtPlanar => TraceKind::SqrtPlanar,
            Trace::Custom(_) => TraceKind::Custom,
        }
    }

    pub fn eval(&self, x: &[f64]) -> QPoint {
        match self {
            Trace::Zero { q, n } => QPoint::zero(*q, *n),
            Trace::SqrtCylinder => sqrt_pair([x[0], x[1]], x[2]),
            Trace::SqrtPlanar => sqrt_pair([x[0], x[1]], 1.0),
            Trace::Custom(f) => f(x),
        }
    }
}

/// Principal complex square root, exact on the real and imaginary axes.
pub fn complex_sqrt(z: [f64; 2]) -> [f64; 2] {
    let r = z[0].hypot(z[1]);
    let re = ((r + z[0]) * 0.5).max(0.0).sqrt();
    let im = ((r - z[0]) * 0.5).max(0.0).sqrt();
    [re, if z[1] < 0.0 { -im } else { im }]
}

fn sqrt_pair(z: [f64; 2], t: f64) -> QPoint {
    let w = complex_sqrt(z);
    QPoint::new(2, 2, vec![w[0] * t, w[1] * t, -w[0] * t, -w[1] * t]).expect("two sheets in R^2")
}

/// `Σ_{w²=z} [[w t]]` at each `(z, t)`.
pub fn sqrt_trace(points: &[([f64; 2], f64)]) -> Vec<QPoint> {
    points.iter().map(|&(z, t)| sqrt_pair(z, t)).collect()
}

/// Largest `t` for which `1 - t² - t⁴ >= 0`, i.e. `sqrt((sqrt 5 - 1) / 2)`.
pub fn mobius_t_max() -> f64 {
    ((5f64.sqrt() - 1.0) / 2.0).sqrt()
}

/// Tolerance on `| |z| - 1 |` accepted by [`mobius_trace`].
pub const CIRCLE_TOL: f64 = 1e-9;

/// The two-valued map `Σ_{w²=z} [[(sqrt(1 - t² - t⁴) z, t², t w)]]` into `R^5`
/// for `z` on the unit circle. `t` is restricted to the range where the
/// square root is real.
pub fn mobius_trace(points: &[([f64; 2], f64)]) -> Result<Vec<QPoint>, DirichletError> {
    points
        .iter()
        .map(|&(z, t)| {
            let modulus = z[0].hypot(z[1]);
            if (modulus - 1.0).abs() > CIRCLE_TOL {
                return Err(DirichletError::Domain(format!("|z| = {modulus} is off the unit circle")));
            }
            let radicand = 1.0 - t * t - t.powi(4);
            if radicand < 0.0 || t < 0.0 {
                return Err(DirichletError::Domain(format!(
                    "t = {t} outside [0, {:.6}] where 1 - t^2 - t^4 >= 0",
                    mobius_t_max()
                )));
            }
            let a = radicand.sqrt();
            let w = complex_sqrt(z);
            let sheet = |s: f64| vec![a * z[0], a * z[1], t * t, s * t * w[0], s * t * w[1]];
            Ok(QPoint::from_sheets(&[sheet(1.0), sheet(-1.0)])?)
        })
        .collect()
}

/// Vertex visiting order of a Gauss–Seidel sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Increasing vertex index (lexicographic lattice order).
    #[default]
    Lexicographic,
    /// Two colours by lattice parity; each colour is updated as one batch,
    /// in parallel when the execution mode allows it.
    RedBlack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop once a sweep changes the energy by less than `tol * (E + 1)`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub schedule: Schedule,
    pub exec: Execution,
    /// Keep the free values of the input instead of the harmonic-barycenter start.
    pub warm_start: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-10,
            max_sweeps: 100_000,
            schedule: Schedule::Lexicographic,
            exec: Execution::Sequential,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub energy: f64,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: ConvergenceStatus,
    pub initial_energy: f64,
    /// One record per completed sweep.
    pub history: Vec<SweepRecord>,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.status == ConvergenceStatus::Converged
    }

    pub fn final_energy(&self) -> f64 {
        self.history.last().map_or(self.initial_energy, |r| r.energy)
    }

    /// CSV with header `sweep,energy,max_displacement`; sweep 0 is the start.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,energy,max_displacement\n");
        let _ = writeln!(s, "0,{:e},0", self.initial_energy);
        for r in &self.history {
            let _ = writeln!(s, "{},{:e},{:e}", r.sweep, r.energy, r.max_displacement);
        }
        s
    }
}

/// Sheet-wise weighted neighbour average after matching against the current value.
pub fn relaxed_value(mesh: &Mesh, samples: &[QPoint], v: usize) -> QPoint {
    let x = &samples[v];
    let (q, n) = (x.q(), x.n());
    let mut acc = vec![0.0; q * n];
    let mut wsum = 0.0;
    let mut pairing = vec![0usize; q];
    for &(nb, w) in mesh.neighbors(v) {
        let y = &samples[nb];
        match_into(x, y, &mut pairing);
        for (i, &j) in pairing.iter().enumerate() {
            let dst = &mut acc[i * n..(i + 1) * n];
            for (d, s) in dst.iter_mut().zip(y.sheet(j)) {
                *d += w * s;
            }
        }
        wsum += w;
    }
    if wsum == 0.0 {
        return x.clone();
    }
    let inv = 1.0 / wsum;
    acc.iter_mut().for_each(|c| *c *= inv);
    QPoint::new(q, n, acc).expect("shape preserved")
}

/// Harmonic extension of the barycenter, duplicated Q times and split by
/// `±h e_1` across sheets. Fixed vertices are left untouched.
pub fn initial_guess(f0: &MultiField, opts: &MinimizeOptions) -> MultiField {
    let mesh = f0.mesh_arc().clone();
    let (q, n) = (f0.q, f0.n);
    let means: Vec<QPoint> = f0
        .samples
        .iter()
        .enumerate()
        .map(|(v, s)| if f0.fixed[v] { QPoint::new(1, n, s.mean()).expect("n >= 1") } else { QPoint::zero(1, n) })
        .collect();
    let bary = MultiField { mesh: mesh.clone(), q: 1, n, samples: means, fixed: f0.fixed.clone() };
    let inner = MinimizeOptions { warm_start: true, ..*opts };
    let bary = minimize(&bary, &inner).0;
    let h = mesh.h();
    let mut out = f0.clone();
    for v in 0..out.samples.len() {
        if out.fixed[v] {
            continue;
        }
        let b = bary.samples[v].coords();
        let mut coords = Vec::with_capacity(q * n);
        for k in 0..q {
            let shift = if q > 1 { h * (2.0 * k as f64 / (q - 1) as f64 - 1.0) } else { 0.0 };
            coords.extend(b.iter().enumerate().map(|(c, x)| if c == 0 { x + shift } else { *x }));
        }
        out.samples[v] = QPoint::new(q, n, coords).expect("shape preserved");
    }
    out
}

/// Nonlinear Gauss–Seidel minimization of the discrete Dirichlet energy with
/// the fixed vertices of `f0` as Dirichlet data.
///
/// Returns the final iterate (the lowest-energy one, since sweeps never
/// increase the energy) and the per-sweep history. A run that hits
/// `max_sweeps` is flagged [`ConvergenceStatus::NotConverged`].
pub fn minimize(f0: &MultiField, opts: &MinimizeOptions) -> (MultiField, ConvergenceReport) {
    let mut f = if opts.warm_start { f0.clone() } else { initial_guess(f0, opts) };
    let mesh = f.mesh_arc().clone();
    let free: Vec<usize> = (0..f.samples.len()).filter(|&v| !f.fixed[v]).collect();
    let colors: [Vec<usize>; 2] = {
        let mut c = [Vec::new(), Vec::new()];
        for &v in &free {
            let l = mesh.lattice(v);
            c[((l[0] + l[1] + l[2]).rem_euclid(2)) as usize].push(v);
        }
        c
    };
    let initial_energy = energy_with(&f, opts.exec);
    let mut prev = initial_energy;
    let mut history = Vec::new();
    let mut status = ConvergenceStatus::NotConverged;
    for sweep in 1..=opts.max_sweeps {
        let mut max_disp: f64 = 0.0;
        match opts.schedule {
            Schedule::Lexicographic => {
                for &v in &free {
                    let new = relaxed_value(&mesh, &f.samples, v);
                    max_disp = max_disp.max(g_distance(&f.samples[v], &new).expect("same shape"));
                    f.samples[v] = new;
                }
            }
            Schedule::RedBlack => {
                for color in &colors {
                    let updates = parallel::map(opts.exec, color, |&v| {
                        let new = relaxed_value(&mesh, &f.samples, v);
                        let d = g_distance(&f.samples[v], &new).expect("same shape");
                        (new, d)
                    });
                    for (&v, (new, d)) in color.iter().zip(updates) {
                        max_disp = max_disp.max(d);
                        f.samples[v] = new;
                    }
                }
            }
        }
        let e = energy_with(&f, opts.exec);
        history.push(SweepRecord { sweep, energy: e, max_displacement: max_disp });
        let done = (prev - e).abs() < opts.tol * (e + 1.0);
        prev = e;
        if done {
            status = ConvergenceStatus::Converged;
            break;
        }
    }
    if free.is_empty() {
        status = ConvergenceStatus::Converged;
    }
    (f, ConvergenceReport { status, initial_energy, history })
}
