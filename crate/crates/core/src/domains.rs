//! Clipped tensor-grid meshes for the quarter ball, the disk and the cylinder.
//!
//! Vertices sit on the lattice `h * Z^m` intersected with the closed domain and
//! are numbered in lexicographic lattice order. Edges join axis neighbours.
//! An edge of length `h` carries the finite-difference weight `h^(m-2)`,
//! halved once for every flat wall that contains both endpoints (the dual
//! cell of such an edge lies half outside the domain).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

const CLIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh spacing h = {h} must satisfy 0 < h < {limit}")]
    Resolution { h: f64, limit: f64 },
    #[error("unsupported dimension {0}; expected 2 or 3")]
    Dimension(usize),
    #[error("mesh text parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Boundary-condition tag of a vertex.
///
/// One tag per vertex; where regions overlap the priority is
/// `CORNER_L > V0 = V1 > BOTTOM > TOP > LATERAL > FREE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    V0,
    V1,
    CornerL,
    Lateral,
    Bottom,
    Top,
    Free,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::V0 => "V0",
            Tag::V1 => "V1",
            Tag::CornerL => "CORNER_L",
            Tag::Lateral => "LATERAL",
            Tag::Bottom => "BOTTOM",
            Tag::Top => "TOP",
            Tag::Free => "FREE",
        }
    }

    pub fn is_boundary(self) -> bool {
        self != Tag::Free
    }
}

impl FromStr for Tag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "V0" => Tag::V0,
            "V1" => Tag::V1,
            "CORNER_L" => Tag::CornerL,
            "LATERAL" => Tag::Lateral,
            "BOTTOM" => Tag::Bottom,
            "TOP" => Tag::Top,
            "FREE" => Tag::Free,
            other => return Err(format!("unknown tag {other:?}")),
        })
    }
}

/// The analytic domain a mesh discretizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `B_r ∩ (R+ x R+ x R^(m-2))`.
    QuarterBall { m: usize, radius: f64 },
    /// `{|z| <= 1} x [0, 1]`.
    Cylinder,
    Disk { radius: f64 },
}

impl Shape {
    /// Whether `B_radius(center)` reaches the curved or top part of the
    /// boundary. Flat walls through which the domain is cut (V0, V1, BOTTOM)
    /// do not count: balls centred on them are partial balls by design.
    pub fn ball_exits(&self, center: &[f64], radius: f64) -> bool {
        let tol = 1e-12;
        match *self {
            Shape::QuarterBall { radius: r, .. } | Shape::Disk { radius: r } => {
                norm(center) + radius > r + tol
            }
            Shape::Cylinder => {
                let rz = (center[0] * center[0] + center[1] * center[1]).sqrt();
                rz + radius > 1.0 + tol || center[2] + radius > 1.0 + tol
            }
        }
    }

    /// Largest radius `r` with `!self.ball_exits(center, r)`.
    pub fn max_ball_radius(&self, center: &[f64]) -> f64 {
        match *self {
            Shape::QuarterBall { radius: r, .. } | Shape::Disk { radius: r } => r - norm(center),
            Shape::Cylinder => {
                let rz = (center[0] * center[0] + center[1] * center[1]).sqrt();
                (1.0 - rz).min(1.0 - center[2])
            }
        }
    }

    fn describe(&self) -> String {
        match *self {
            Shape::QuarterBall { m, radius } => format!("quarter_ball {m} {radius}"),
            Shape::Cylinder => "cylinder".to_string(),
            Shape::Disk { radius } => format!("disk {radius}"),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

type Lattice = [i32; 3];

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    h: f64,
    shape: Shape,
    points: Vec<f64>,
    lattice: Vec<Lattice>,
    tags: Vec<Tag>,
    /// Bit mask of the flat walls each vertex lies on.
    walls: Vec<u8>,
    edges: Vec<Edge>,
    index: HashMap<Lattice, usize>,
    adj_start: Vec<usize>,
    adj: Vec<(usize, f64)>,
}

const WALL_X0: u8 = 1;
const WALL_X1: u8 = 2;
const WALL_BOTTOM: u8 = 4;
const WALL_TOP: u8 = 8;

/// Regular-grid mesh of the quarter ball of radius `r` in dimension `m`.
pub fn quarter_ball(m: usize, r: f64, h: f64) -> Result<Mesh, MeshError> {
    if m != 2 && m != 3 {
        return Err(MeshError::Dimension(m));
    }
    check_resolution(h, r)?;
    let k = (r / h + CLIP_EPS).floor() as i32;
    let third = if m == 3 { -k..=k } else { 0..=0 };
    let mut cells = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            for l in third.clone() {
                let x = [i as f64 * h, j as f64 * h, l as f64 * h];
                let rad = norm(&x[..m]);
                if rad > r * (1.0 + CLIP_EPS) {
                    continue;
                }
                let tag = if i == 0 && j == 0 {
                    Tag::CornerL
                } else if i == 0 {
                    Tag::V0
                } else if j == 0 {
                    Tag::V1
                } else if rad > r - h {
                    Tag::Lateral
                } else {
                    Tag::Free
                };
                let mut walls = 0;
                if i == 0 {
                    walls |= WALL_X0;
                }
                if j == 0 {
                    walls |= WALL_X1;
                }
                cells.push(([i, j, l], tag, walls));
            }
        }
    }
    Ok(Mesh::assemble(m, h, Shape::QuarterBall { m, radius: r }, cells))
}

/// 3-d mesh of the unit cylinder `{|z| <= 1} x [0, 1]`.
pub fn cylinder(h: f64) -> Result<Mesh, MeshError> {
    check_resolution(h, 1.0)?;
    let k = (1.0 / h + CLIP_EPS).floor() as i32;
    let mut cells = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let rz = norm(&[i as f64 * h, j as f64 * h]);
            if rz > 1.0 + CLIP_EPS {
                continue;
            }
            for l in 0..=k {
                let tag = if l == 0 {
                    Tag::Bottom
                } else if l == k {
                    Tag::Top
                } else if rz > 1.0 - h {
                    Tag::Lateral
                } else {
                    Tag::Free
                };
                let mut walls = 0;
                if l == 0 {
                    walls |= WALL_BOTTOM;
                }
                if l == k {
                    walls |= WALL_TOP;
                }
                cells.push(([i, j, l], tag, walls));
            }
        }
    }
    Ok(Mesh::assemble(3, h, Shape::Cylinder, cells))
}

/// 2-d mesh of the disk of radius `r`; the boundary band is tagged LATERAL.
pub fn disk(r: f64, h: f64) -> Result<Mesh, MeshError> {
    check_resolution(h, r)?;
    let k = (r / h + CLIP_EPS).floor() as i32;
    let mut cells = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let rad = norm(&[i as f64 * h, j as f64 * h]);
            if rad > r * (1.0 + CLIP_EPS) {
                continue;
            }
            let tag = if rad > r - h { Tag::Lateral } else { Tag::Free };
            cells.push(([i, j, 0], tag, 0));
        }
    }
    Ok(Mesh::assemble(2, h, Shape::Disk { radius: r }, cells))
}

fn check_resolution(h: f64, limit: f64) -> Result<(), MeshError> {
    if !(h > 0.0 && h < limit) {
        return Err(MeshError::Resolution { h, limit });
    }
    Ok(())
}

impl Mesh {
    fn assemble(dim: usize, h: f64, shape: Shape, mut cells: Vec<(Lattice, Tag, u8)>) -> Mesh {
        cells.sort_by_key(|c| c.0);
        let mut index = HashMap::with_capacity(cells.len());
        let mut points = Vec::with_capacity(cells.len() * dim);
        let mut lattice = Vec::with_capacity(cells.len());
        let mut tags = Vec::with_capacity(cells.len());
        let mut walls = Vec::with_capacity(cells.len());
        for (v, (lat, tag, w)) in cells.into_iter().enumerate() {
            index.insert(lat, v);
            points.extend(lat[..dim].iter().map(|&c| c as f64 * h));
            lattice.push(lat);
            tags.push(tag);
            walls.push(w);
        }
        let base = h.powi(dim as i32 - 2);
        let mut edges = Vec::new();
        for (a, lat) in lattice.iter().enumerate() {
            for axis in 0..dim {
                let mut nb = *lat;
                nb[axis] += 1;
                if let Some(&b) = index.get(&nb) {
                    let shared = walls[a] & walls[b];
                    let weight = base * 0.5f64.powi(shared.count_ones() as i32);
                    edges.push(Edge { a, b, weight });
                }
            }
        }
        let mut mesh = Mesh {
            dim,
            h,
            shape,
            points,
            lattice,
            tags,
            walls,
            edges,
            index,
            adj_start: Vec::new(),
            adj: Vec::new(),
        };
        mesh.build_adjacency();
        mesh
    }

    fn build_adjacency(&mut self) {
        let n = self.num_vertices();
        let mut deg = vec![0usize; n];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        let mut start = vec![0usize; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + deg[v];
        }
        let mut fill = start.clone();
        let mut adj = vec![(0usize, 0.0); start[n]];
        for e in &self.edges {
            adj[fill[e.a]] = (e.b, e.weight);
            fill[e.a] += 1;
            adj[fill[e.b]] = (e.a, e.weight);
            fill[e.b] += 1;
        }
        for v in 0..n {
            adj[start[v]..start[v + 1]].sort_by_key(|x| x.0);
        }
        self.adj_start = start;
        self.adj = adj;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_vertices(&self) -> usize {
        self.tags.len()
    }

    pub fn point(&self, v: usize) -> &[f64] {
        &self.points[v * self.dim..(v + 1) * self.dim]
    }

    pub fn tag(&self, v: usize) -> Tag {
        self.tags[v]
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` with their edge weights, sorted by vertex index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    pub fn lattice(&self, v: usize) -> [i32; 3] {
        self.lattice[v]
    }

    pub fn vertex_at(&self, lattice: [i32; 3]) -> Option<usize> {
        self.index.get(&lattice).copied()
    }

    /// Vertex closest to `x`, by lattice rounding.
    pub fn nearest_vertex(&self, x: &[f64]) -> Option<usize> {
        let mut lat = [0i32; 3];
        for (k, c) in x.iter().take(self.dim).enumerate() {
            lat[k] = (c / self.h).round() as i32;
        }
        self.vertex_at(lat)
    }

    /// Quadrature volume of the dual cell of `v` (`h^m`, halved per flat wall).
    pub fn vertex_volume(&self, v: usize) -> f64 {
        self.h.powi(self.dim as i32) * 0.5f64.powi(self.walls[v].count_ones() as i32)
    }

    pub fn vertices_tagged(&self, tag: Tag) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(move |&v| self.tags[v] == tag)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Unit squares of a 2-d mesh whose four corners are all present, as
    /// counter-clockwise vertex quadruples `[(i,j), (i+1,j), (i+1,j+1), (i,j+1)]`.
    pub fn faces(&self) -> Vec<[usize; 4]> {
        if self.dim != 2 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for v in 0..self.num_vertices() {
            let [i, j, _] = self.lattice[v];
            let corners = [[i + 1, j, 0], [i + 1, j + 1, 0], [i, j + 1, 0]];
            let found: Option<Vec<usize>> = corners.iter().map(|c| self.vertex_at(*c)).collect();
            if let Some(f) = found {
                out.push([v, f[0], f[1], f[2]]);
            }
        }
        out
    }

    /// Plain-text export: a `shape` header, then one vertex per line
    /// (coordinates, tag), then one edge per line (endpoints, weight).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qlab mesh v1");
        let _ = writeln!(s, "shape {}", self.shape.describe());
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "h {:e}", self.h);
        let _ = writeln!(s, "vertices {}", self.num_vertices());
        for v in 0..self.num_vertices() {
            for c in self.point(v) {
                let _ = write!(s, "{c:e} ");
            }
            let _ = writeln!(s, "{}", self.tags[v].as_str());
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {:e}", e.a, e.b, e.weight);
        }
        s
    }

    /// Parses the output of [`Mesh::to_text`] back into a mesh.
    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };
        let mut header = |key: &str| -> Result<(usize, Vec<String>), MeshError> {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "unexpected end of input"))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(ln, &format!("expected `{key}`")));
            }
            Ok((ln, parts.map(String::from).collect()))
        };
        let (ln, shape_parts) = header("shape")?;
        let num = |ln: usize, s: Option<&String>| -> Result<f64, MeshError> {
            s.and_then(|x| x.parse().ok()).ok_or_else(|| err(ln, "bad number"))
        };
        let shape = match shape_parts.first().map(String::as_str) {
            Some("quarter_ball") => Shape::QuarterBall {
                m: num(ln, shape_parts.get(1))? as usize,
                radius: num(ln, shape_parts.get(2))?,
            },
            Some("cylinder") => Shape::Cylinder,
            Some("disk") => Shape::Disk { radius: num(ln, shape_parts.get(1))? },
            _ => return Err(err(ln, "unknown shape")),
        };
        let (ln, d) = header("dim")?;
        let dim = num(ln, d.first())? as usize;
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        let (ln, hh) = header("h")?;
        let h = num(ln, hh.first())?;
        let (ln, nv) = header("vertices")?;
        let nv = num(ln, nv.first())? as usize;
        let mut cells = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "missing vertex line"))?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != dim + 1 {
                return Err(err(ln, "vertex line needs coordinates and a tag"));
            }
            let mut lat = [0i32; 3];
            for k in 0..dim {
                let c: f64 = parts[k].parse().map_err(|_| err(ln, "bad coordinate"))?;
                lat[k] = (c / h).round() as i32;
            }
            let tag: Tag = parts[dim].parse().map_err(|m: String| err(ln, &m))?;
            cells.push((lat, tag, walls_for(shape, h, &lat)));
        }
        Ok(Mesh::assemble(dim, h, shape, cells))
    }
}

fn walls_for(shape: Shape, h: f64, lat: &Lattice) -> u8 {
    let mut w = 0;
    match shape {
        Shape::QuarterBall { .. } => {
            if lat[0] == 0 {
                w |= WALL_X0;
            }
            if lat[1] == 0 {
                w |= WALL_X1;
            }
        }
        Shape::Cylinder => {
            let k = (1.0 / h + CLIP_EPS).floor() as i32;
            if lat[2] == 0 {
                w |= WALL_BOTTOM;
            }
            if lat[2] == k {
                w |= WALL_TOP;
            }
        }
        Shape::Disk { .. } => {}
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_energy(mesh: &Mesh) -> f64 {
        mesh.edges()
            .iter()
            .map(|e| {
                let d = mesh.point(e.a)[0] - mesh.point(e.b)[0];
                e.weight * d * d
            })
            .sum()
    }

    #[test]
    fn quarter_ball_corner_is_origin() {
        let m = quarter_ball(2, 1.0, 0.5).unwrap();
        let v = m.vertex_at([0, 0, 0]).unwrap();
        assert_eq!(m.tag(v), Tag::CornerL);
        assert_eq!(m.point(v), &[0.0, 0.0]);
    }

    #[test]
    fn quarter_ball_vertex_count_matches_area() {
        let h = 1.0 / 64.0;
        let m = quarter_ball(2, 1.0, h).unwrap();
        let expected = std::f64::consts::FRAC_PI_4 / (h * h);
        let rel = (m.num_vertices() as f64 - expected).abs() / expected;
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn quarter_ball_tags_follow_geometry() {
        for (mdim, h) in [(2, 1.0 / 16.0), (3, 1.0 / 8.0)] {
            let m = quarter_ball(mdim, 1.0, h).unwrap();
            for v in 0..m.num_vertices() {
                let x = m.point(v);
                match m.tag(v) {
                    Tag::V0 => assert!(x[0] <= h),
                    Tag::V1 => assert!(x[1] <= h),
                    Tag::CornerL => assert!(x[0] == 0.0 && x[1] == 0.0),
                    Tag::Lateral => assert!((norm(x) - 1.0).abs() <= h),
                    Tag::Free => assert!(norm(x) <= 1.0 - h),
                    t => panic!("unexpected tag {t:?}"),
                }
            }
            assert!(m.is_connected());
        }
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(quarter_ball(2, 1.0, 1.0), Err(MeshError::Resolution { .. })));
        assert!(matches!(quarter_ball(4, 1.0, 0.1), Err(MeshError::Dimension(4))));
        assert!(cylinder(1.5).is_err());
        assert!(disk(1.0, 0.0).is_err());
    }

    #[test]
    fn cylinder_tags() {
        let m = cylinder(0.5).unwrap();
        let v = m.vertex_at([0, 0, 0]).unwrap();
        assert_eq!(m.tag(v), Tag::Bottom);
        let h = 1.0 / 16.0;
        let m = cylinder(h).unwrap();
        for v in m.vertices_tagged(Tag::Lateral) {
            let x = m.point(v);
            assert!((norm(&x[..2]) - 1.0).abs() <= h);
        }
        assert!(m.is_connected());
    }

    #[test]
    fn disk_boundary_band() {
        let m = disk(1.0, 0.5).unwrap();
        let o = m.vertex_at([0, 0, 0]).unwrap();
        assert_eq!(m.tag(o), Tag::Free);
        let h = 1.0 / 64.0;
        let m = disk(1.0, h).unwrap();
        let nb = m.vertices_tagged(Tag::Lateral).count() as f64;
        let expected = 2.0 * std::f64::consts::PI / h;
        assert!((nb - expected).abs() / expected < 0.10, "{nb} vs {expected}");
        assert!(m.tags().iter().all(|t| !matches!(t, Tag::V0 | Tag::V1 | Tag::CornerL)));
    }

    #[test]
    fn refinement_nests() {
        let coarse = quarter_ball(2, 1.0, 1.0 / 8.0).unwrap();
        let fine = quarter_ball(2, 1.0, 1.0 / 16.0).unwrap();
        for v in 0..coarse.num_vertices() {
            let w = fine.nearest_vertex(coarse.point(v)).unwrap();
            let d: f64 = norm(&[
                coarse.point(v)[0] - fine.point(w)[0],
                coarse.point(v)[1] - fine.point(w)[1],
            ]);
            assert!(d <= 1.0 / 16.0);
        }
    }

    #[test]
    fn affine_energy_is_consistent() {
        use std::f64::consts::PI;
        // ∫|∇x1|^2 equals the volume of the domain
        for (mesh, exact) in [
            (quarter_ball(2, 1.0, 1.0 / 64.0).unwrap(), PI / 4.0),
            (quarter_ball(3, 1.0, 1.0 / 24.0).unwrap(), PI / 3.0),
            (disk(1.0, 1.0 / 64.0).unwrap(), PI),
            (cylinder(1.0 / 24.0).unwrap(), PI),
        ] {
            let e = affine_energy(&mesh);
            let rel = (e - exact).abs() / exact;
            assert!(rel < 4.0 * mesh.h(), "{:?}: {e} vs {exact}", mesh.shape());
        }
    }

    #[test]
    fn faces_are_counter_clockwise_squares() {
        let m = disk(1.0, 0.25).unwrap();
        let faces = m.faces();
        assert!(!faces.is_empty());
        for f in faces {
            let p: Vec<&[f64]> = f.iter().map(|&v| m.point(v)).collect();
            let area: f64 = (0..4)
                .map(|k| p[k][0] * p[(k + 1) % 4][1] - p[(k + 1) % 4][0] * p[k][1])
                .sum::<f64>()
                / 2.0;
            assert!((area - 0.0625).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = quarter_ball(3, 1.0, 0.25).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.num_vertices(), m.num_vertices());
        assert_eq!(back.tags(), m.tags());
        assert_eq!(back.edges(), m.edges());
    }

    #[test]
    fn ball_exit_checks() {
        let s = Shape::Cylinder;
        assert!(!s.ball_exits(&[0.0, 0.0, 0.0], 0.9));
        assert!(s.ball_exits(&[0.0, 0.0, 0.0], 1.01));
        assert!(Shape::QuarterBall { m: 2, radius: 1.0 }.ball_exits(&[0.0, 0.0], 1.1));
    }
}
