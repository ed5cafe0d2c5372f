//! Conforming triangular meshes on polygonal domains.
//!
//! A [`Mesh`] stores vertices, counterclockwise triangles, the polygon's
//! corner points, and the derived connectivity (edges with incidence lists,
//! vertex classification, per-triangle affine reference maps).  Construction
//! through [`Mesh::from_raw`] validates the input: index ranges, duplicate
//! vertices and triangles, degenerate elements, non-manifold edges, hanging
//! vertices, boundary consistency, and corner matching all produce structured
//! errors instead of silently corrupt meshes.  Clockwise input triangles are
//! reoriented automatically and reported.
//!
//! The module also provides a plain-text file format with round-trip
//! fidelity, shape-regularity diagnostics, a corner-split predicate (no
//! element touches the boundary in more than one edge), and generators for
//! the two built-in test geometries: a wedge cavity with a moving lid and a
//! T-shaped channel with geometrically graded corner refinement.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::polyquad::BarycentricPoint;
use crate::refelem::EDGE_VERTICES;
use crate::{Error, Result};

/// Classification of a mesh vertex by its position on the domain boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VertexClass {
    /// A vertex coinciding with a corner of the polygonal boundary.
    Corner,
    /// A boundary vertex in the interior of a straight boundary segment.
    BoundaryNoncorner,
    /// A vertex not on the boundary.
    Interior,
}

/// An undirected mesh edge together with its incident triangles.
#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, sorted ascending.
    pub vertices: [usize; 2],
    /// Incident triangle indices (one for boundary edges, two for interior
    /// edges), sorted ascending.
    pub triangles: Vec<usize>,
}

impl Edge {
    /// Whether this edge lies on the domain boundary.
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }
}

/// The affine map `F_K(x̂) = v₀ + J x̂` from the reference triangle onto a
/// mesh triangle.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    /// Jacobian `J` in row-major order; column `i` is `v_{i+1} − v₀`.
    pub jacobian: [[f64; 2]; 2],
    /// Image of the reference origin, i.e. the first triangle vertex.
    pub translation: [f64; 2],
    /// Determinant of `J` (twice the signed triangle area; positive for
    /// counterclockwise triangles).
    pub det: f64,
}

impl AffineMap {
    fn new(v0: [f64; 2], v1: [f64; 2], v2: [f64; 2]) -> Self {
        let jacobian = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        Self { jacobian, translation: v0, det }
    }

    /// Maps reference Cartesian coordinates to physical coordinates.
    pub fn apply_xy(&self, x: f64, y: f64) -> [f64; 2] {
        [
            self.translation[0] + self.jacobian[0][0] * x + self.jacobian[0][1] * y,
            self.translation[1] + self.jacobian[1][0] * x + self.jacobian[1][1] * y,
        ]
    }

    /// Maps a barycentric reference point to physical coordinates.
    pub fn apply(&self, p: BarycentricPoint) -> [f64; 2] {
        let [x, y] = p.xy();
        self.apply_xy(x, y)
    }

    /// The inverse transpose `J^{-T}` in row-major order, used to push
    /// reference gradients forward: `∇φ = J^{-T} ∇̂φ̂`.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let d = self.det;
        [
            [self.jacobian[1][1] / d, -self.jacobian[1][0] / d],
            [-self.jacobian[0][1] / d, self.jacobian[0][0] / d],
        ]
    }
}

/// Shape-regularity diagnostics for a mesh.
///
/// For each triangle, `element_h` is its diameter (longest side) and
/// `element_rho` the diameter of its inscribed circle, computed as
/// `4·area/perimeter`.  `kappa` is the minimum of `ρ_K/h_K` over all
/// elements and `h` the maximum element diameter.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    /// Mesh shape-regularity constant `min_K ρ_K / h_K`; always in `(0, 1)`.
    pub kappa: f64,
    /// Mesh size `max_K h_K`.
    pub h: f64,
    /// Per-element diameters.
    pub element_h: Vec<f64>,
    /// Per-element inscribed-circle diameters.
    pub element_rho: Vec<f64>,
}

/// A validated conforming triangular mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Triangles as vertex-index triples, all counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Corner points of the polygonal boundary; each coincides with exactly
    /// one boundary vertex.
    pub corners: Vec<[f64; 2]>,
    /// All mesh edges.
    pub edges: Vec<Edge>,
    /// For each triangle, the global edge index opposite each local vertex
    /// (slot `e` holds the edge between local vertices `EDGE_VERTICES[e]`).
    pub triangle_edges: Vec<[usize; 3]>,
    /// Classification of every vertex.
    pub vertex_class: Vec<VertexClass>,
    /// For each vertex, the incident triangle indices, sorted ascending.
    pub vertex_triangles: Vec<Vec<usize>>,
    /// Reference-to-physical affine map of every triangle.
    pub maps: Vec<AffineMap>,
    /// Indices of input triangles that arrived clockwise and were flipped.
    pub reoriented: Vec<usize>,
}

/// Quantum used to key vertex coordinates when detecting duplicates and when
/// matching declared corner points to mesh vertices.
const COORD_QUANTUM: f64 = 1e-12;

fn coord_key(p: [f64; 2]) -> (i64, i64) {
    // Normalize -0.0 so it keys identically to +0.0.
    let x = if p[0] == 0.0 { 0.0 } else { p[0] };
    let y = if p[1] == 0.0 { 0.0 } else { p[1] };
    ((x / COORD_QUANTUM).round() as i64, (y / COORD_QUANTUM).round() as i64)
}

fn structure<S: Into<String>>(msg: S) -> Error {
    Error::MeshStructure(msg.into())
}

impl Mesh {
    /// Validates raw mesh data and derives the full connectivity.
    ///
    /// Checks performed, each yielding a structural error on failure:
    /// vertex/triangle lists nonempty, triangle indices in range and
    /// pairwise distinct, no duplicate vertices or triangles, no degenerate
    /// (zero-area) triangles, every edge incident to at most two triangles,
    /// the mesh edge-connected, no vertex lying on the open interior of
    /// another triangle's edge, every boundary vertex incident to exactly
    /// two boundary edges, the two boundary edges at a non-corner boundary
    /// vertex collinear, and every declared corner coinciding with exactly
    /// one boundary vertex.
    ///
    /// Clockwise triangles are reoriented (recorded in
    /// [`Mesh::reoriented`]); counterclockwise orientation is an invariant
    /// of the returned mesh.
    pub fn from_raw(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        corners: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(structure("mesh has no vertices"));
        }
        if triangles.is_empty() {
            return Err(structure("mesh has no triangles"));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(structure(format!("vertex {i} has non-finite coordinates")));
            }
        }

        // Duplicate vertices.
        let mut seen = HashMap::new();
        for (i, &v) in vertices.iter().enumerate() {
            if let Some(j) = seen.insert(coord_key(v), i) {
                return Err(structure(format!(
                    "vertices {j} and {i} coincide at ({}, {})",
                    v[0], v[1]
                )));
            }
        }

        // Index ranges, distinctness, duplicate triangles.
        let mut tri_sets = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(structure(format!(
                        "triangle {t} references vertex {v}, but only {} vertices exist",
                        vertices.len()
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(structure(format!("triangle {t} repeats a vertex")));
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(s) = tri_sets.insert(key, t) {
                return Err(structure(format!("triangles {s} and {t} cover the same vertex set")));
            }
        }

        // Orientation and degeneracy.  The degeneracy threshold is relative
        // to the squared mesh extent so it is scale-invariant.
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let extent2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
        let mut triangles = triangles;
        let mut reoriented = Vec::new();
        for (t, tri) in triangles.iter_mut().enumerate() {
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let twice_area =
                (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if twice_area.abs() <= 1e-14 * extent2 {
                return Err(structure(format!("triangle {t} is degenerate (zero area)")));
            }
            if twice_area < 0.0 {
                tri.swap(1, 2);
                reoriented.push(t);
            }
        }

        // Edge table.
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for (e, ev) in EDGE_VERTICES.iter().enumerate() {
                let (p, q) = (tri[ev[0]], tri[ev[1]]);
                let key = [p.min(q), p.max(q)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: key, triangles: Vec::new() });
                    edges.len() - 1
                });
                edges[id].triangles.push(t);
                triangle_edges[t][e] = id;
            }
        }
        for edge in &mut edges {
            edge.triangles.sort_unstable();
            if edge.triangles.len() > 2 {
                return Err(structure(format!(
                    "edge ({}, {}) is shared by {} triangles",
                    edge.vertices[0],
                    edge.vertices[1],
                    edge.triangles.len()
                )));
            }
        }

        // Edge-connectivity of the triangle graph.
        let mut visited = vec![false; triangles.len()];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(t) = stack.pop() {
            for &e in &triangle_edges[t] {
                for &s in &edges[e].triangles {
                    if !visited[s] {
                        visited[s] = true;
                        count += 1;
                        stack.push(s);
                    }
                }
            }
        }
        if count != triangles.len() {
            return Err(structure("mesh is not edge-connected"));
        }

        // Hanging vertices: no vertex may lie strictly inside another edge.
        let extent = extent2.sqrt();
        for (i, &v) in vertices.iter().enumerate() {
            for edge in &edges {
                let [p, q] = edge.vertices;
                if p == i || q == i {
                    continue;
                }
                let (a, b) = (vertices[p], vertices[q]);
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = dx * dx + dy * dy;
                let s = ((v[0] - a[0]) * dx + (v[1] - a[1]) * dy) / len2;
                if s <= 0.0 || s >= 1.0 {
                    continue;
                }
                let (px, py) = (a[0] + s * dx - v[0], a[1] + s * dy - v[1]);
                if (px * px + py * py).sqrt() <= 1e-12 * extent {
                    return Err(structure(format!(
                        "vertex {i} hangs on the interior of edge ({p}, {q})"
                    )));
                }
            }
        }

        // Boundary structure: every boundary vertex must carry exactly two
        // boundary edges, and those must be collinear unless the vertex is a
        // declared corner.
        let mut boundary_edges_at = vec![Vec::<usize>::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            if edge.is_boundary() {
                for &v in &edge.vertices {
                    boundary_edges_at[v].push(e);
                }
            }
        }

        let mut corner_vertex = vec![None; corners.len()];
        let mut corner_of_vertex: HashMap<usize, usize> = HashMap::new();
        for (c, &p) in corners.iter().enumerate() {
            match seen.get(&coord_key(p)) {
                Some(&v) => {
                    if boundary_edges_at[v].is_empty() {
                        return Err(structure(format!(
                            "corner ({}, {}) matches vertex {v}, which is not on the boundary",
                            p[0], p[1]
                        )));
                    }
                    if let Some(prev) = corner_of_vertex.insert(v, c) {
                        return Err(structure(format!(
                            "corners {prev} and {c} both match vertex {v}"
                        )));
                    }
                    corner_vertex[c] = Some(v);
                }
                None => {
                    return Err(structure(format!(
                        "corner ({}, {}) does not coincide with any mesh vertex",
                        p[0], p[1]
                    )));
                }
            }
        }

        let mut vertex_class = vec![VertexClass::Interior; vertices.len()];
        for (v, be) in boundary_edges_at.iter().enumerate() {
            match be.len() {
                0 => {}
                2 => {
                    if corner_of_vertex.contains_key(&v) {
                        vertex_class[v] = VertexClass::Corner;
                    } else {
                        // The two boundary segments must continue straight.
                        let dir = |e: usize| -> [f64; 2] {
                            let [p, q] = edges[e].vertices;
                            let (o, w) = if p == v { (p, q) } else { (q, p) };
                            [vertices[w][0] - vertices[o][0], vertices[w][1] - vertices[o][1]]
                        };
                        let (d0, d1) = (dir(be[0]), dir(be[1]));
                        let cross = d0[0] * d1[1] - d0[1] * d1[0];
                        let scale = (d0[0].hypot(d0[1])) * (d1[0].hypot(d1[1]));
                        if cross.abs() > 1e-10 * scale {
                            return Err(structure(format!(
                                "boundary vertex {v} sits at a kink of the boundary but is \
                                 not declared a corner"
                            )));
                        }
                        vertex_class[v] = VertexClass::BoundaryNoncorner;
                    }
                }
                n => {
                    return Err(structure(format!(
                        "boundary vertex {v} has {n} incident boundary edges (expected 2)"
                    )));
                }
            }
        }

        // Vertex-to-triangle incidence.
        let mut vertex_triangles = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }

        let maps = triangles
            .iter()
            .map(|tri| AffineMap::new(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]))
            .collect();

        Ok(Self {
            vertices,
            triangles,
            corners,
            edges,
            triangle_edges,
            vertex_class,
            vertex_triangles,
            maps,
            reoriented,
        })
    }

    /// Number of triangles.
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of vertices.
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// The vertex index matching each declared corner, in corner order.
    pub fn corner_vertices(&self) -> Vec<usize> {
        self.corners
            .iter()
            .map(|&p| {
                let key = coord_key(p);
                self.vertices
                    .iter()
                    .position(|&v| coord_key(v) == key)
                    .expect("corner matched a vertex during construction")
            })
            .collect()
    }

    /// Whether local edge `e` of triangle `t` runs opposite to the global
    /// (ascending-index) orientation of its edge.
    pub fn edge_flipped(&self, t: usize, e: usize) -> bool {
        let tri = self.triangles[t];
        tri[EDGE_VERTICES[e][0]] > tri[EDGE_VERTICES[e][1]]
    }

    /// Checks that every triangle has at most one boundary edge.
    ///
    /// Returns the predicate together with the offending triangle indices.
    pub fn corner_split_check(&self) -> (bool, Vec<usize>) {
        let mut offenders = Vec::new();
        for (t, te) in self.triangle_edges.iter().enumerate() {
            let n = te.iter().filter(|&&e| self.edges[e].is_boundary()).count();
            if n > 1 {
                offenders.push(t);
            }
        }
        (offenders.is_empty(), offenders)
    }

    /// Computes per-element and global shape-regularity numbers.
    pub fn shape_report(&self) -> Result<ShapeReport> {
        let mut element_h = Vec::with_capacity(self.triangles.len());
        let mut element_rho = Vec::with_capacity(self.triangles.len());
        let mut kappa = f64::INFINITY;
        let mut h = 0.0f64;
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]];
            let side = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]).hypot(q[1] - p[1]);
            let (sa, sb, sc) = (side(a, b), side(b, c), side(c, a));
            let area = 0.5 * self.maps[t].det;
            let perimeter = sa + sb + sc;
            if !(area > 0.0) || !(perimeter > 0.0) {
                return Err(structure(format!("triangle {t} is degenerate")));
            }
            let ht = sa.max(sb).max(sc);
            let rho = 4.0 * area / perimeter;
            kappa = kappa.min(rho / ht);
            h = h.max(ht);
            element_h.push(ht);
            element_rho.push(rho);
        }
        Ok(ShapeReport { kappa, h, element_h, element_rho })
    }

    /// Serializes the mesh in the `tris2d v1` text format.
    pub fn write_text(&self) -> String {
        let mut out = String::new();
        out.push_str("tris2d v1\n");
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {}", v[0], v[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "corners {}", self.corners.len());
        for c in &self.corners {
            let _ = writeln!(out, "{} {}", c[0], c[1]);
        }
        out
    }

    /// Parses a mesh from the `tris2d v1` text format.
    ///
    /// The format is line-oriented ASCII: a `tris2d v1` header, a
    /// `vertices N` section of `x y` lines, a `triangles M` section of
    /// `i j k` lines (0-based vertex indices), and a `corners P` section of
    /// `x y` lines.  `#` starts a comment; blank lines are ignored.  Parse
    /// errors carry the 1-based line number.
    pub fn read_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut last_line = 0usize;
        let mut next = |what: &str| -> Result<(usize, &str)> {
            match lines.next() {
                Some((n, l)) => {
                    last_line = n;
                    Ok((n, l))
                }
                None => Err(Error::Parse {
                    line: last_line + 1,
                    msg: format!("unexpected end of input, expected {what}"),
                }),
            }
        };

        let (n, header) = next("header")?;
        if header != "tris2d v1" {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected header 'tris2d v1', found '{header}'"),
            });
        }

        fn section_count(line: &str, n: usize, keyword: &str) -> Result<usize> {
            let mut parts = line.split_whitespace();
            let (kw, count) = (parts.next(), parts.next());
            if kw != Some(keyword) || parts.next().is_some() {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected '{keyword} <count>', found '{line}'"),
                });
            }
            count
                .ok_or(())
                .and_then(|c| c.parse::<usize>().map_err(|_| ()))
                .map_err(|_| Error::Parse {
                    line: n,
                    msg: format!("invalid count in '{line}'"),
                })
        }

        fn parse_pair(line: &str, n: usize) -> Result<[f64; 2]> {
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != 2 {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected two coordinates, found '{line}'"),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: n,
                    msg: format!("invalid number '{s}'"),
                })
            };
            Ok([parse(vals[0])?, parse(vals[1])?])
        }

        let (n, l) = next("'vertices <count>'")?;
        let nv = section_count(l, n, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (n, l) = next("a vertex line")?;
            vertices.push(parse_pair(l, n)?);
        }

        let (n, l) = next("'triangles <count>'")?;
        let nt = section_count(l, n, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (n, l) = next("a triangle line")?;
            let vals: Vec<&str> = l.split_whitespace().collect();
            if vals.len() != 3 {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected three vertex indices, found '{l}'"),
                });
            }
            let mut tri = [0usize; 3];
            for (slot, s) in tri.iter_mut().zip(&vals) {
                *slot = s.parse::<usize>().map_err(|_| Error::Parse {
                    line: n,
                    msg: format!("invalid vertex index '{s}'"),
                })?;
                if *slot >= nv {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("vertex index {slot} out of range (mesh has {nv} vertices)"),
                    });
                }
            }
            triangles.push(tri);
        }

        let (n, l) = next("'corners <count>'")?;
        let nc = section_count(l, n, "corners")?;
        let mut corners = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (n, l) = next("a corner line")?;
            corners.push(parse_pair(l, n)?);
        }

        if let Some((n, l)) = lines.next() {
            return Err(Error::Parse {
                line: n,
                msg: format!("unexpected trailing content '{l}'"),
            });
        }

        Self::from_raw(vertices, triangles, corners)
    }

    /// Reads a mesh file in the `tris2d v1` format.
    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::read_text(&text)
    }

    /// Writes the mesh to a file in the `tris2d v1` format.
    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.write_text())?;
        Ok(())
    }
}

/// Builder that dedups vertices by quantized coordinates while collecting
/// triangles given by raw coordinate triples.
struct MeshBuilder {
    vertices: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn new() -> Self {
        Self { vertices: Vec::new(), index: HashMap::new(), triangles: Vec::new() }
    }

    fn vertex(&mut self, p: [f64; 2]) -> usize {
        let key = coord_key(p);
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }

    /// Adds a triangle, orienting it counterclockwise.
    fn tri(&mut self, a: [f64; 2], b: [f64; 2], c: [f64; 2]) {
        let (ia, ib, ic) = (self.vertex(a), self.vertex(b), self.vertex(c));
        let twice_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if twice_area >= 0.0 {
            self.triangles.push([ia, ib, ic]);
        } else {
            self.triangles.push([ia, ic, ib]);
        }
    }

    fn build(self, corners: Vec<[f64; 2]>) -> Result<Mesh> {
        Mesh::from_raw(self.vertices, self.triangles, corners)
    }
}

/// Half-angle of the wedge cavity in degrees.
const WEDGE_HALF_ANGLE_DEG: f64 = 28.5;

/// Wall parameters (fraction of the distance from apex to lid) of the three
/// vertex rows below the lid, and placement of the free interior points.
/// Chosen so the mesh's shape-regularity constant κ ≈ 0.151.
const WEDGE_ROWS: [f64; 3] = [0.52, 0.26, 0.115];
const WEDGE_LID_X: f64 = 0.42;
const WEDGE_LID_DEPTH: f64 = 0.55;
const WEDGE_APEX_POINT: f64 = 0.37;

/// Builds the 18-element wedge-cavity mesh.
///
/// The domain is the triangle with lid `(−1, 1) × {0}` and apex on the
/// negative y-axis, the walls making an angle of 28.5° with the axis.  The
/// corners are the two lid endpoints and the apex; all other boundary
/// vertices (including the lid midpoint) are non-corner boundary vertices.
/// Every element touches the boundary in at most one edge.
pub fn gen_moffatt_wedge() -> Mesh {
    let h = 1.0 / (WEDGE_HALF_ANGLE_DEG * std::f64::consts::PI / 180.0).tan();
    // Points on the left/right walls at parameter s (s = 1 at the lid,
    // s = 0 at the apex), and on the centerline.
    let wall_l = |s: f64| [-s, -h * (1.0 - s)];
    let wall_r = |s: f64| [s, -h * (1.0 - s)];
    let mid = |s: f64| [0.0, -h * (1.0 - s)];

    let lid_l = [-1.0, 0.0];
    let lid_m = [0.0, 0.0];
    let lid_r = [1.0, 0.0];
    let apex = [0.0, -h];

    let [s1, s2, s3] = WEDGE_ROWS;
    let (pl1, m1, pr1) = (wall_l(s1), mid(s1), wall_r(s1));
    let (pl2, m2, pr2) = (wall_l(s2), mid(s2), wall_r(s2));
    let (pl3, pr3) = (wall_l(s3), wall_r(s3));
    // Interior points of the lid band, mixing lid level and first row.
    let y_x = -WEDGE_LID_DEPTH * h * (1.0 - s1);
    let xl = [-WEDGE_LID_X, y_x];
    let xr = [WEDGE_LID_X, y_x];
    // Interior point of the apex patch on the centerline.
    let g = mid(WEDGE_APEX_POINT * s3);

    let mut b = MeshBuilder::new();
    // Lid band.
    b.tri(lid_l, lid_m, xl);
    b.tri(lid_m, xr, xl);
    b.tri(lid_m, lid_r, xr);
    b.tri(lid_l, xl, pl1);
    b.tri(xl, m1, pl1);
    b.tri(xl, xr, m1);
    b.tri(xr, pr1, m1);
    b.tri(lid_r, pr1, xr);
    // First band.
    b.tri(pl1, m1, pl2);
    b.tri(m1, m2, pl2);
    b.tri(m1, pr1, m2);
    b.tri(pr1, pr2, m2);
    // Second band.
    b.tri(pl2, m2, pl3);
    b.tri(m2, pr3, pl3);
    b.tri(m2, pr2, pr3);
    // Apex patch.
    b.tri(pl3, pr3, g);
    b.tri(pr3, apex, g);
    b.tri(apex, pl3, g);

    b.build(vec![lid_l, lid_r, apex]).expect("built-in wedge mesh is valid")
}

/// Fraction of the quadrant side where the graded region starts; tuned so
/// the transition elements have ρ_K/h_K ≈ 0.1695.
const TSHAPE_FAN_T: f64 = 0.8225;

/// Side length of the graded corner quadrants.
const TSHAPE_QUADRANT: f64 = 0.5;

/// Builds the T-shaped channel mesh with geometric corner grading.
///
/// The domain is the union of the bar `(−3/2, 3/2) × (0, 1)` and the stem
/// `(−1/2, 1/2) × (−1, 0)`; it has eight corners (four outer bar corners,
/// two re-entrant corners where the stem meets the bar, and the two stem
/// bottom corners).  Around each of the latter four corners the mesh is
/// refined by `n_layers` geometrically graded layers with ratio `sigma`:
/// each additional layer shrinks the innermost elements by the factor
/// `sigma`.  Every element touches the boundary in at most one edge.
///
/// `n_layers` must lie in `1..=8` and `sigma` in `(0.001, 0.45)`.
pub fn gen_tshape(n_layers: usize, sigma: f64) -> Result<Mesh> {
    if !(1..=8).contains(&n_layers) {
        return Err(Error::InvalidInput(format!(
            "number of grading layers must be between 1 and 8, got {n_layers}"
        )));
    }
    if !(sigma > 0.001 && sigma < 0.45) {
        return Err(Error::InvalidInput(format!(
            "grading ratio must lie strictly between 0.001 and 0.45, got {sigma}"
        )));
    }

    let r = TSHAPE_QUADRANT;
    let mut b = MeshBuilder::new();

    // One graded quadrant in the local frame (corner at the origin, the two
    // corner-adjacent quadrant edges along the local +x and +y axes), mapped
    // to physical coordinates by p = c + a·ex + b·ey.
    let mut quadrant = |c: [f64; 2], ex: [f64; 2], ey: [f64; 2]| {
        let at = |a: f64, bb: f64| {
            [c[0] + a * ex[0] + bb * ey[0], c[1] + a * ex[1] + bb * ey[1]]
        };
        let s = TSHAPE_FAN_T * r;
        // Transition fan between square(r) and square(s).
        b.tri(at(s, 0.0), at(r, 0.0), at(s, s));
        b.tri(at(r, 0.0), at(r, r), at(s, s));
        b.tri(at(r, r), at(0.0, r), at(s, s));
        b.tri(at(0.0, r), at(0.0, s), at(s, s));
        // Graded rings between square(σ^{j-1} s) and square(σ^j s), each an
        // L-shaped fan around the inner-square corner.  The two triangles
        // hugging the axes are needles with aspect ratio σ/(1−σ); the fan
        // layout keeps every square side a single edge, so successive rings
        // conform without transition vertices.
        for j in 1..n_layers {
            let outer = s * sigma.powi(j as i32 - 1);
            let inner = outer * sigma;
            b.tri(at(inner, 0.0), at(outer, 0.0), at(inner, inner));
            b.tri(at(outer, 0.0), at(outer, outer), at(inner, inner));
            b.tri(at(outer, outer), at(0.0, outer), at(inner, inner));
            b.tri(at(0.0, outer), at(0.0, inner), at(inner, inner));
        }
        // Core square, split by the diagonal through the corner.
        let core = s * sigma.powi(n_layers as i32 - 1);
        b.tri(at(0.0, 0.0), at(core, 0.0), at(core, core));
        b.tri(at(0.0, 0.0), at(core, core), at(0.0, core));
    };

    // Re-entrant corners: three quadrants each (bar above both sides, stem
    // below the inner side).  Stem bottom corners: one quadrant each.
    let c1 = [-0.5, 0.0];
    let c2 = [0.5, 0.0];
    quadrant(c1, [-1.0, 0.0], [0.0, 1.0]); // bar, west of stem
    quadrant(c1, [1.0, 0.0], [0.0, 1.0]); // bar, east
    quadrant(c1, [1.0, 0.0], [0.0, -1.0]); // stem, west half top
    quadrant(c2, [1.0, 0.0], [0.0, 1.0]); // bar, east of stem
    quadrant(c2, [-1.0, 0.0], [0.0, 1.0]); // bar, west
    quadrant(c2, [-1.0, 0.0], [0.0, -1.0]); // stem, east half top
    quadrant([-0.5, -1.0], [1.0, 0.0], [0.0, 1.0]); // stem bottom west
    quadrant([0.5, -1.0], [-1.0, 0.0], [0.0, 1.0]); // stem bottom east

    // Coarse fill: top strip of the bar, split so only the top edge of each
    // square contributes a boundary edge.
    for i in 0..4 {
        let x0 = -1.0 + 0.5 * i as f64;
        let x1 = x0 + 0.5;
        b.tri([x0, 0.5], [x1, 0.5], [x1, 1.0]);
        b.tri([x0, 0.5], [x1, 1.0], [x0, 1.0]);
    }
    // Side blocks of the bar; diagonals pass through the outer domain
    // corners so each corner element keeps a single boundary edge.
    b.tri([-1.5, 0.0], [-1.0, 0.0], [-1.0, 0.5]);
    b.tri([-1.5, 0.0], [-1.0, 0.5], [-1.5, 0.5]);
    b.tri([-1.5, 0.5], [-1.0, 0.5], [-1.5, 1.0]);
    b.tri([-1.0, 0.5], [-1.0, 1.0], [-1.5, 1.0]);
    b.tri([1.5, 0.0], [1.0, 0.5], [1.0, 0.0]);
    b.tri([1.5, 0.0], [1.5, 0.5], [1.0, 0.5]);
    b.tri([1.5, 0.5], [1.5, 1.0], [1.0, 0.5]);
    b.tri([1.0, 0.5], [1.5, 1.0], [1.0, 1.0]);

    let corners = vec![
        [-1.5, 0.0],
        [-1.5, 1.0],
        [1.5, 0.0],
        [1.5, 1.0],
        [-0.5, 0.0],
        [0.5, 0.0],
        [-0.5, -1.0],
        [0.5, -1.0],
    ];
    b.build(corners)
}
