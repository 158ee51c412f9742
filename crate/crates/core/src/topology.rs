//! Sheet tracking for continuous multi-valued fields on 2-d meshes.
//!
//! Where the sheets of a field stay apart, optimal matchings along mesh edges
//! glue the sheets of neighbouring vertices into a covering graph. Lifting a
//! closed loop through that graph gives its monodromy permutation; a
//! non-identity monodromy around a region means no continuous selection of
//! sheets exists there, so the sheets must collide inside it.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::dirichlet::MultiField;
use crate::domains::{disk, Mesh, MeshError, Shape, Tag};
use crate::perm::Permutation;
use crate::qpoints::{best_matching, g_distance, QPoint};

/// Factor between the default `s_min` and the largest edge oscillation on
/// the region it selects.
pub const DEFAULT_SMIN_FACTOR: f64 = 10.0;
/// Edges whose oscillation reaches `s_min / OSCILLATION_DIVISOR` are left
/// out of the cover: their matching is not certified unique.
pub const OSCILLATION_DIVISOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("sheet tracking needs a 2-d mesh, got dimension {0}")]
    Dimension(usize),
    #[error("loop vertex {0} is outside the separated region")]
    LeavesRegion(usize),
    #[error("vertices {0} and {1} are not adjacent in the mesh")]
    NotAdjacent(usize, usize),
    #[error("edge {a}-{b} oscillates by {oscillation}, too much for s_min = {s_min}; refine the mesh")]
    Refine { a: usize, b: usize, oscillation: f64, s_min: f64 },
    #[error("loop needs at least two vertices")]
    ShortLoop,
    #[error("the mesh boundary is not inside the separated region (vertex {0})")]
    BoundaryNotSeparated(usize),
    #[error("normal map needs a cylinder mesh")]
    NotCylinder,
    #[error("field is not zero on the bottom (vertex {0})")]
    NonzeroBottom(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// The covering graph of a multi-valued field over its separated region.
#[derive(Debug, Clone)]
pub struct SheetGraph {
    mesh: Arc<Mesh>,
    q: usize,
    s_min: f64,
    region: Vec<bool>,
    /// `(a, b)` with `a < b` maps to the sheet correspondence from `a` to `b`.
    cover: BTreeMap<(usize, usize), Permutation>,
    /// Region edges left out because their oscillation is too large.
    omitted: Vec<(usize, usize, f64)>,
}

/// Separation of a value; a single sheet counts as infinitely separated.
fn separation_of(p: &QPoint) -> f64 {
    if p.q() < 2 {
        f64::INFINITY
    } else {
        p.separation().expect("q >= 2")
    }
}

/// Builds the covering graph over `{v : separation(f(v)) > s_min}`.
///
/// Matchings are taken along every region edge whose oscillation is below
/// `s_min / 4`; since both ends are separated by more than `s_min`, the
/// optimal matching there is unique. Other region edges are recorded as
/// omitted and any loop through them fails with [`TopologyError::Refine`].
pub fn build_sheet_graph(f: &MultiField, s_min: f64) -> Result<SheetGraph, TopologyError> {
    let mesh = f.mesh_arc().clone();
    if mesh.dim() != 2 {
        return Err(TopologyError::Dimension(mesh.dim()));
    }
    let region: Vec<bool> = f.samples().iter().map(|s| separation_of(s) > s_min).collect();
    let mut cover = BTreeMap::new();
    let mut omitted = Vec::new();
    for e in mesh.edges() {
        if !(region[e.a] && region[e.b]) {
            continue;
        }
        let (a, b) = (e.a.min(e.b), e.a.max(e.b));
        let osc = g_distance(f.sample(a), f.sample(b)).expect("same shape");
        if osc < s_min / OSCILLATION_DIVISOR {
            let m = best_matching(f.sample(a), f.sample(b)).expect("same shape");
            cover.insert((a, b), m.permutation);
        } else {
            omitted.push((a, b, osc));
        }
    }
    Ok(SheetGraph { mesh, q: f.q(), s_min, region, cover, omitted })
}

/// The smallest threshold `s` among the sample separations with
/// `s >= 10 * max oscillation over edges of {separation > s}`.
///
/// Returns `None` for single-valued fields or when no threshold qualifies.
pub fn default_s_min(f: &MultiField) -> Option<f64> {
    if f.q() < 2 {
        return None;
    }
    let mesh = f.mesh();
    let seps: Vec<f64> = f.samples().iter().map(separation_of).collect();
    let mut edges: Vec<(f64, f64)> = mesh
        .edges()
        .iter()
        .map(|e| (seps[e.a].min(seps[e.b]), g_distance(f.sample(e.a), f.sample(e.b)).expect("same shape")))
        .collect();
    // Sweep thresholds from large to small, adding edges as they enter the region.
    edges.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut cands: Vec<f64> = seps.iter().copied().filter(|s| *s > 0.0).collect();
    cands.sort_by(|x, y| y.total_cmp(x));
    cands.dedup();
    let mut best = None;
    let mut max_osc: f64 = 0.0;
    let mut k = 0;
    for &s in &cands {
        while k < edges.len() && edges[k].0 > s {
            max_osc = max_osc.max(edges[k].1);
            k += 1;
        }
        if s >= DEFAULT_SMIN_FACTOR * max_osc {
            best = Some(s);
        } else {
            break;
        }
    }
    best
}

impl SheetGraph {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn in_region(&self, v: usize) -> bool {
        self.region[v]
    }

    pub fn region_size(&self) -> usize {
        self.region.iter().filter(|&&r| r).count()
    }

    pub fn omitted_edges(&self) -> &[(usize, usize, f64)] {
        &self.omitted
    }

    /// Number of cover vertices, `Q` per region vertex.
    pub fn num_cover_vertices(&self) -> usize {
        self.q * self.region_size()
    }

    /// Cover edges as pairs `((a, i), (b, j))`.
    pub fn cover_edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::with_capacity(self.cover.len() * self.q);
        for (&(a, b), p) in &self.cover {
            for i in 0..self.q {
                out.push(((a, i), (b, p.image(i))));
            }
        }
        out
    }

    /// Sheet correspondence from `a` to `b` along a cover edge.
    pub fn transport(&self, a: usize, b: usize) -> Result<Permutation, TopologyError> {
        for v in [a, b] {
            if !self.region[v] {
                return Err(TopologyError::LeavesRegion(v));
            }
        }
        let key = (a.min(b), a.max(b));
        if let Some(p) = self.cover.get(&key) {
            return Ok(if a < b { p.clone() } else { p.inverse() });
        }
        if let Some(&(x, y, osc)) = self.omitted.iter().find(|o| (o.0, o.1) == key) {
            return Err(TopologyError::Refine { a: x, b: y, oscillation: osc, s_min: self.s_min });
        }
        Err(TopologyError::NotAdjacent(a, b))
    }

    fn cover_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.region.len()];
        for &(a, b) in self.cover.keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Lifts a closed loop through the cover. The loop is cyclic: the last
/// vertex connects back to the first (a repeated first vertex at the end is
/// accepted). Sheet `i` at the start ends on sheet `p.image(i)`.
pub fn loop_monodromy(g: &SheetGraph, cycle: &[usize]) -> Result<Permutation, TopologyError> {
    let mut verts = cycle;
    if verts.len() > 1 && verts.first() == verts.last() {
        verts = &verts[..verts.len() - 1];
    }
    if verts.len() < 2 {
        return Err(TopologyError::ShortLoop);
    }
    let mut p = Permutation::identity(g.q);
    for k in 0..verts.len() {
        let (a, b) = (verts[k], verts[(k + 1) % verts.len()]);
        p = p.then(&g.transport(a, b)?);
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// `labels[v]` maps the sheets at the root of `v`'s component to sheets
    /// at `v`; `None` outside the region.
    Global { labels: Vec<Option<Permutation>> },
    /// A loop in the region whose lift swaps sheets.
    Obstructed { cycle: Vec<usize>, monodromy: Permutation },
}

impl Selection {
    pub fn exists(&self) -> bool {
        matches!(self, Selection::Global { .. })
    }
}

/// Breadth-first spanning forest of the cover edges: parent pointers and
/// sheet labels relative to each component root.
fn spanning_forest(g: &SheetGraph) -> (Vec<Option<usize>>, Vec<Option<Permutation>>, Vec<(usize, usize)>) {
    let n = g.region.len();
    let adj = g.cover_neighbors();
    let mut parent = vec![None; n];
    let mut label: Vec<Option<Permutation>> = vec![None; n];
    let mut tree = HashSet::new();
    for root in 0..n {
        if !g.region[root] || label[root].is_some() {
            continue;
        }
        label[root] = Some(Permutation::identity(g.q));
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if label[w].is_none() {
                    let step = g.transport(v, w).expect("cover edge");
                    label[w] = Some(label[v].as_ref().expect("visited").then(&step));
                    parent[w] = Some(v);
                    tree.insert((v.min(w), v.max(w)));
                    queue.push_back(w);
                }
            }
        }
    }
    let non_tree = g.cover.keys().copied().filter(|e| !tree.contains(e)).collect();
    (parent, label, non_tree)
}

fn path_to_root(parent: &[Option<usize>], mut v: usize) -> Vec<usize> {
    let mut out = vec![v];
    while let Some(p) = parent[v] {
        out.push(p);
        v = p;
    }
    out
}

/// Fundamental cycles of the cover's base graph: one per non-tree edge of a
/// breadth-first spanning forest.
pub fn fundamental_cycles(g: &SheetGraph) -> Vec<Vec<usize>> {
    let (parent, _, non_tree) = spanning_forest(g);
    non_tree
        .into_iter()
        .map(|(a, b)| {
            let pa = path_to_root(&parent, a);
            let pb = path_to_root(&parent, b);
            // Trim the common tail so the cycle goes through the lowest common ancestor.
            let mut i = pa.len();
            let mut j = pb.len();
            while i > 1 && j > 1 && pa[i - 2] == pb[j - 2] {
                i -= 1;
                j -= 1;
            }
            let mut cycle: Vec<usize> = pa[..i].to_vec();
            cycle.extend(pb[..j - 1].iter().rev());
            cycle
        })
        .collect()
}

/// Whether the cover splits into `Q` sheets over every component of the region.
pub fn has_global_selection(g: &SheetGraph) -> Selection {
    let (_, labels, _) = spanning_forest(g);
    for cycle in fundamental_cycles(g) {
        let m = loop_monodromy(g, &cycle).expect("cycle lies in the cover");
        if !m.is_identity() {
            return Selection::Obstructed { cycle, monodromy: m };
        }
    }
    Selection::Global { labels }
}

/// Closed walks bounding a set of faces, oriented with the faces on the left.
/// At pinch vertices the walk takes the rightmost turn, so the outer walk
/// encloses every face of a vertex-connected set.
fn boundary_walks(mesh: &Mesh, faces: &[[usize; 4]]) -> Vec<Vec<usize>> {
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for f in faces {
        for k in 0..4 {
            directed.insert((f[k], f[(k + 1) % 4]));
        }
    }
    let mut out_edges: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            out_edges.entry(a).or_default().push(b);
        }
    }
    for v in out_edges.values_mut() {
        v.sort_unstable();
    }
    let dir = |a: usize, b: usize| {
        let (la, lb) = (mesh.lattice(a), mesh.lattice(b));
        (lb[0] - la[0], lb[1] - la[1])
    };
    // Turn preference relative to the incoming direction: right, straight, left, back.
    let rank = |din: (i32, i32), dout: (i32, i32)| {
        let right = (din.1, -din.0);
        let left = (-din.1, din.0);
        if dout == right {
            0
        } else if dout == din {
            1
        } else if dout == left {
            2
        } else {
            3
        }
    };
    let mut walks = Vec::new();
    loop {
        let start = match out_edges.iter().find(|(_, v)| !v.is_empty()) {
            Some((&a, _)) => a,
            None => break,
        };
        let first = out_edges.get_mut(&start).expect("present").remove(0);
        let mut walk = vec![start];
        let (mut prev, mut cur) = (start, first);
        while cur != start {
            walk.push(cur);
            let din = dir(prev, cur);
            let outs = out_edges.get_mut(&cur).expect("boundary is closed");
            let k = (0..outs.len()).min_by_key(|&k| rank(din, dir(cur, outs[k]))).expect("boundary is closed");
            let next = outs.remove(k);
            prev = cur;
            cur = next;
        }
        walks.push(walk);
    }
    walks
}

fn signed_area(mesh: &Mesh, walk: &[usize]) -> f64 {
    let mut a = 0.0;
    for k in 0..walk.len() {
        let p = mesh.point(walk[k]);
        let q = mesh.point(walk[(k + 1) % walk.len()]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// The outer boundary walk of a face set (largest signed area).
fn outer_walk(mesh: &Mesh, faces: &[[usize; 4]]) -> Option<Vec<usize>> {
    boundary_walks(mesh, faces)
        .into_iter()
        .max_by(|x, y| signed_area(mesh, x).total_cmp(&signed_area(mesh, y)))
}

/// Counter-clockwise boundary loop of a 2-d mesh.
pub fn mesh_boundary_loop(mesh: &Mesh) -> Vec<usize> {
    outer_walk(mesh, &mesh.faces()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularComponent {
    /// Faces (counter-clockwise vertex quadruples) not covered by the sheet graph.
    pub cells: Vec<[usize; 4]>,
    /// Loop in the separated region around the cells.
    pub certificate: Vec<usize>,
    pub monodromy: Permutation,
}

impl SingularComponent {
    pub fn contains_vertex(&self, v: usize) -> bool {
        self.cells.iter().any(|c| c.contains(&v))
    }

    /// Largest distance between two cell corners.
    pub fn diameter(&self, mesh: &Mesh) -> f64 {
        let pts: Vec<&[f64]> = self.cells.iter().flatten().map(|&v| mesh.point(v)).collect();
        let mut d: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcedStatus {
    Forced,
    /// Trivial boundary monodromy: no singularity is forced.
    NotForced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub status: ForcedStatus,
    pub s_min: f64,
    pub boundary_loop: Vec<usize>,
    pub boundary_monodromy: Permutation,
    /// Components with non-identity monodromy around them.
    pub components: Vec<SingularComponent>,
    /// Uncovered components whose surrounding loop is trivial.
    pub trivial_components: usize,
}

impl SingularityReport {
    /// Structured-text rendering: one block per forced component.
    pub fn to_text(&self, mesh: &Mesh) -> String {
        let mut s = String::new();
        let status = match self.status {
            ForcedStatus::Forced => "FORCED",
            ForcedStatus::NotForced => "NOT_FORCED",
        };
        let _ = writeln!(s, "status {status}");
        let _ = writeln!(s, "s_min {:e}", self.s_min);
        let _ = writeln!(s, "boundary_loop_length {}", self.boundary_loop.len());
        let _ = writeln!(s, "boundary_monodromy {}", self.boundary_monodromy);
        let _ = writeln!(s, "forced_components {}", self.components.len());
        let _ = writeln!(s, "trivial_components {}", self.trivial_components);
        for (k, c) in self.components.iter().enumerate() {
            let _ = writeln!(s, "component {k}");
            let _ = writeln!(s, "  monodromy {}", c.monodromy);
            let _ = writeln!(s, "  diameter {:e}", c.diameter(mesh));
            let cells: Vec<String> = c
                .cells
                .iter()
                .map(|f| {
                    let l = mesh.lattice(f[0]);
                    format!("{},{}", l[0], l[1])
                })
                .collect();
            let _ = writeln!(s, "  cells {}", cells.join(" "));
            let loop_pts: Vec<String> = c
                .certificate
                .iter()
                .map(|&v| {
                    let l = mesh.lattice(v);
                    format!("{},{}", l[0], l[1])
                })
                .collect();
            let _ = writeln!(s, "  certificate_loop {}", loop_pts.join(" "));
        }
        s
    }
}

/// Groups faces into components that share at least one vertex.
fn face_components(faces: &[[usize; 4]]) -> Vec<Vec<[usize; 4]>> {
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, f) in faces.iter().enumerate() {
        for &v in f {
            by_vertex.entry(v).or_default().push(k);
        }
    }
    let mut seen = vec![false; faces.len()];
    let mut out = Vec::new();
    for start in 0..faces.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            comp.push(k);
            for v in faces[k] {
                for &o in &by_vertex[&v] {
                    if !seen[o] {
                        seen[o] = true;
                        stack.push(o);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp.into_iter().map(|k| faces[k]).collect());
    }
    out
}

/// Finds the uncovered regions of a 2-valued (or `Q`-valued) field on a
/// 2-d mesh around which the sheets are permuted.
///
/// A face is covered when its four corners are separated and its four edges
/// carry certified matchings. Uncovered faces are grouped by shared
/// vertices; each group whose outer boundary loop has non-identity monodromy
/// is reported with that loop as certificate.
pub fn locate_essential_singularity(f: &MultiField, s_min: f64) -> Result<SingularityReport, TopologyError> {
    let g = build_sheet_graph(f, s_min)?;
    let mesh = g.mesh.clone();
    let boundary = mesh_boundary_loop(&mesh);
    if let Some(&v) = boundary.iter().find(|&&v| !g.region[v]) {
        return Err(TopologyError::BoundaryNotSeparated(v));
    }
    let boundary_monodromy = loop_monodromy(&g, &boundary)?;
    if boundary_monodromy.is_identity() {
        return Ok(SingularityReport {
            status: ForcedStatus::NotForced,
            s_min,
            boundary_loop: boundary,
            boundary_monodromy,
            components: Vec::new(),
            trivial_components: 0,
        });
    }
    let covered = |face: &[usize; 4]| {
        (0..4).all(|k| {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            g.region[a] && g.cover.contains_key(&(a.min(b), a.max(b)))
        })
    };
    let bad: Vec<[usize; 4]> = mesh.faces().into_iter().filter(|fc| !covered(fc)).collect();
    let mut components = Vec::new();
    let mut trivial = 0;
    for cells in face_components(&bad) {
        let walk = outer_walk(&mesh, &cells).expect("nonempty component");
        match loop_monodromy(&g, &walk) {
            Ok(m) if !m.is_identity() => {
                components.push(SingularComponent { cells, certificate: walk, monodromy: m })
            }
            _ => trivial += 1,
        }
    }
    Ok(SingularityReport {
        status: ForcedStatus::Forced,
        s_min,
        boundary_loop: boundary,
        boundary_monodromy,
        components,
        trivial_components: trivial,
    })
}

/// One-sided normal derivative at the bottom of a cylinder field:
/// `η(z) = u(z, h) / h`, on the disk mesh matching the bottom lattice.
pub fn extract_normal_map(u: &MultiField) -> Result<MultiField, TopologyError> {
    let mesh = u.mesh();
    if mesh.shape() != Shape::Cylinder {
        return Err(TopologyError::NotCylinder);
    }
    let h = mesh.h();
    for v in mesh.vertices_tagged(Tag::Bottom) {
        if u.sample(v).coords().iter().any(|&c| c != 0.0) {
            return Err(TopologyError::NonzeroBottom(v));
        }
    }
    let base = Arc::new(disk(1.0, h)?);
    let inv = 1.0 / h;
    let samples = (0..base.num_vertices())
        .map(|v| {
            let [i, j, _] = base.lattice(v);
            let above = mesh.vertex_at([i, j, 1]).expect("cylinder column has a second layer");
            u.sample(above).scaled(inv)
        })
        .collect();
    Ok(MultiField::new(base, u.q(), u.n(), samples).expect("shapes agree"))
}
