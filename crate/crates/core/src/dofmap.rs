//! Global degree-of-freedom enumeration.
//!
//! Builds the global numbering of velocity and pressure unknowns on a
//! corner-split mesh for a given polynomial order, together with everything
//! assembly and preconditioning need:
//!
//! - per-vertex direction sets for the derivative degrees of freedom
//!   (coordinate axes at interior vertices, tangent/normal at non-corner
//!   boundary vertices, one edge tangent per incident edge at corners);
//! - the constrained/free split realizing homogeneous essential boundary
//!   conditions on the velocity;
//! - a deterministic global ordering that keeps each preconditioner block
//!   index-contiguous (free C0 vertex unknowns, then C1 vertex pairs, then
//!   edge groups, then pressure vertex and average unknowns, then
//!   constrained boundary unknowns, then element-interior unknowns);
//! - per-element connectivity: for every local reference basis function the
//!   global functions it carries coefficients for, including the 2×2
//!   change of basis that turns the two reference vertex-derivative
//!   functions into the globally continuous derivative pair, and the parity
//!   sign of edge functions on elements that traverse the edge backwards.

use crate::mesh::{Mesh, VertexClass};
use crate::refelem::{velocity_roles, BasisRole, EDGE_VERTICES};
use crate::{check_order, Error, Result};

/// Unit direction vectors attached to one vertex.
///
/// Interior vertex: the two coordinate axes.  Non-corner boundary vertex:
/// the boundary tangent followed by the outward normal.  Corner vertex: one
/// unit tangent per incident edge, edges sorted ascending; `edges` records
/// which edge each tangent belongs to.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    /// Unit vectors, one per derivative degree of freedom at this vertex.
    pub vectors: Vec<[f64; 2]>,
    /// For corner vertices, the global edge index of each tangent.
    pub edges: Option<Vec<usize>>,
    /// Whether each direction survives in the homogeneous-BC subspace.
    pub free: Vec<bool>,
}

/// A global scalar velocity function (each pairs with both Cartesian
/// components to form two velocity degrees of freedom).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelFunction {
    /// Value degree of freedom at a vertex.
    C0Vertex {
        /// Vertex index.
        vertex: usize,
    },
    /// Derivative degree of freedom at a vertex along one direction of its
    /// [`DirectionSet`].
    C1Vertex {
        /// Vertex index.
        vertex: usize,
        /// Direction index within the vertex's [`DirectionSet`].
        dir: usize,
    },
    /// Edge function on a global edge.
    Edge {
        /// Global edge index.
        edge: usize,
        /// Edge-function index in `0..k-3`.
        l: usize,
    },
    /// Interior bubble of a triangle.
    Interior {
        /// Triangle index.
        tri: usize,
        /// Bubble index in `0..(k-1)(k-2)/2`.
        l: usize,
    },
}

/// A global pressure function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureFunction {
    /// Vertex value function.
    Vertex {
        /// Vertex index.
        vertex: usize,
        /// Patch member: the ordinal of the supporting element within the
        /// vertex patch at corner vertices, 0 elsewhere (one shared
        /// function for the whole patch).
        member: usize,
    },
    /// Elementwise average value function.
    Average {
        /// Triangle index.
        tri: usize,
    },
    /// Interior (zero-trace, zero-mean) function of a triangle.
    Interior {
        /// Triangle index.
        tri: usize,
        /// Interior-function index.
        l: usize,
    },
}

/// Coefficient link from one local basis function to one global function.
#[derive(Clone, Copy, Debug)]
pub struct LocalLink {
    /// Global scalar function index (velocity) or pressure function index.
    pub function: usize,
    /// Coefficient weight: local coefficient += weight × global coefficient.
    pub weight: f64,
}

/// The 2×2 change of basis tying the two reference vertex-derivative
/// functions on one element to the two global derivative functions at that
/// vertex.
#[derive(Clone, Copy, Debug)]
pub struct C1Link {
    /// Global scalar function indices of the derivative pair (rows of `g`).
    pub functions: [usize; 2],
    /// `g = [μ₁ μ₂]⁻¹ DF_K`; the local coefficient of the `s`-th reference
    /// derivative function is `Σ_r g[r][s] ·` (global coefficient `r`).
    pub g: [[f64; 2]; 2],
}

/// Classification of a global degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofClass {
    /// Velocity unknown supported on more than one element (vertex or edge).
    VelocityExterior,
    /// Velocity bubble supported on a single element.
    VelocityInterior,
    /// Pressure vertex or average unknown.
    PressureExterior,
    /// Pressure unknown supported inside a single element.
    PressureInterior,
}

/// Breakpoints of the global index layout.
///
/// The global indices are laid out as: free velocity C0 vertex unknowns,
/// free velocity C1 vertex pairs (both components of one scalar function
/// adjacent), free velocity edge groups (contiguous per edge), pressure
/// vertex unknowns, pressure average unknowns, constrained (boundary)
/// velocity unknowns, element-interior velocity unknowns, element-interior
/// pressure unknowns.  The condensed interface system lives on
/// `0..pressure_average_end`.
#[derive(Clone, Copy, Debug)]
pub struct Sections {
    /// End of the free velocity C0 vertex block.
    pub free_c0_end: usize,
    /// End of the free velocity C1 vertex block.
    pub free_c1_end: usize,
    /// End of the free velocity edge block (= free velocity interface count).
    pub free_edge_end: usize,
    /// End of the pressure vertex block.
    pub pressure_vertex_end: usize,
    /// End of the pressure average block (= interface system dimension).
    pub pressure_average_end: usize,
    /// End of the constrained velocity block.
    pub constrained_end: usize,
    /// End of the element-interior velocity block.
    pub velocity_interior_end: usize,
    /// Total number of degrees of freedom.
    pub total: usize,
}

/// Global degree-of-freedom map for one mesh and polynomial order.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// Polynomial order of the velocity space.
    pub k: usize,
    /// Direction set of every vertex.
    pub directions: Vec<DirectionSet>,
    /// All global scalar velocity functions.
    pub vel_functions: Vec<VelFunction>,
    /// All global pressure functions.
    pub pressure_functions: Vec<PressureFunction>,
    /// Global index of each (scalar velocity function, component) pair.
    pub vel_dof_index: Vec<[usize; 2]>,
    /// Global index of each pressure function.
    pub pressure_dof_index: Vec<usize>,
    /// Classification of every global index.
    pub class: Vec<DofClass>,
    /// Whether each global index is constrained by essential boundary data.
    pub constrained: Vec<bool>,
    /// Layout breakpoints.
    pub sections: Sections,
    /// Per triangle and local vertex, the derivative-pair change of basis.
    pub c1_links: Vec<[C1Link; 3]>,
    /// Per triangle, per local scalar velocity basis function (in reference
    /// role order), the global coefficient links.
    pub vel_connectivity: Vec<Vec<Vec<LocalLink>>>,
    /// Per triangle, per local pressure basis function, the global link.
    pub pressure_connectivity: Vec<Vec<LocalLink>>,
    /// Support area |ω| of each pressure vertex function, aligned with the
    /// pressure-vertex section of the global layout.
    pub pressure_vertex_areas: Vec<f64>,
    /// Area of each triangle (support of the average pressure functions).
    pub element_areas: Vec<f64>,
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Tangent of a global edge, oriented from the lower- to the
/// higher-indexed endpoint.
fn edge_tangent(mesh: &Mesh, edge: usize) -> [f64; 2] {
    let [lo, hi] = mesh.edges[edge].vertices;
    let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
    unit([b[0] - a[0], b[1] - a[1]])
}

fn build_directions(mesh: &Mesh) -> Vec<DirectionSet> {
    let nv = mesh.num_vertices();
    // Incident edges per vertex, ascending.
    let mut incident = vec![Vec::new(); nv];
    for (e, edge) in mesh.edges.iter().enumerate() {
        for &v in &edge.vertices {
            incident[v].push(e);
        }
    }

    (0..nv)
        .map(|a| match mesh.vertex_class[a] {
            VertexClass::Interior => DirectionSet {
                vectors: vec![[1.0, 0.0], [0.0, 1.0]],
                edges: None,
                free: vec![true, true],
            },
            VertexClass::BoundaryNoncorner => {
                let boundary: Vec<usize> = incident[a]
                    .iter()
                    .copied()
                    .filter(|&e| mesh.edges[e].is_boundary())
                    .collect();
                let t = edge_tangent(mesh, boundary[0]);
                // Outward normal: perpendicular to t, pointing away from the
                // incident elements.
                let mut n = [-t[1], t[0]];
                let k = mesh.vertex_triangles[a][0];
                let tri = mesh.triangles[k];
                let centroid = [
                    (mesh.vertices[tri[0]][0] + mesh.vertices[tri[1]][0] + mesh.vertices[tri[2]][0]) / 3.0,
                    (mesh.vertices[tri[0]][1] + mesh.vertices[tri[1]][1] + mesh.vertices[tri[2]][1]) / 3.0,
                ];
                let va = mesh.vertices[a];
                if n[0] * (centroid[0] - va[0]) + n[1] * (centroid[1] - va[1]) > 0.0 {
                    n = [-n[0], -n[1]];
                }
                DirectionSet { vectors: vec![t, n], edges: None, free: vec![false, true] }
            }
            VertexClass::Corner => {
                let edges = incident[a].clone();
                let vectors = edges.iter().map(|&e| edge_tangent(mesh, e)).collect();
                let free = edges.iter().map(|&e| !mesh.edges[e].is_boundary()).collect();
                DirectionSet { vectors, edges: Some(edges), free }
            }
        })
        .collect()
}

fn invert2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-14 {
        return Err(Error::NumericalBreakdown(
            "derivative direction pair is numerically collinear".into(),
        ));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn matmul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

impl DofMap {
    /// Builds the global numbering for `mesh` at polynomial order `k`.
    ///
    /// Requires `k` within the supported order range and a corner-split
    /// mesh (no element with more than one boundary edge); the latter is a
    /// standing assumption of the discretization and violating it is a
    /// configuration error.
    pub fn build(mesh: &Mesh, k: usize) -> Result<Self> {
        check_order(k)?;
        let (split, offenders) = mesh.corner_split_check();
        if !split {
            return Err(Error::Config(format!(
                "mesh is not corner-split: {} element(s) touch the boundary in more than one \
                 edge (first offender: triangle {})",
                offenders.len(),
                offenders[0]
            )));
        }

        let nv = mesh.num_vertices();
        let ne = mesh.edges.len();
        let nt = mesh.num_triangles();
        let per_edge = k - 3;
        let per_tri_vel = (k - 1) * (k - 2) / 2;
        let per_tri_pressure = k * (k + 1) / 2 - 4;

        let directions = build_directions(mesh);

        // ---- Scalar velocity functions ----
        // Layout of function ids: C0 per vertex, then C1 (per vertex, per
        // direction), then edge functions, then interior bubbles.
        let mut vel_functions = Vec::new();
        for vertex in 0..nv {
            vel_functions.push(VelFunction::C0Vertex { vertex });
        }
        let mut c1_offset = vec![0usize; nv + 1];
        for a in 0..nv {
            c1_offset[a + 1] = c1_offset[a] + directions[a].vectors.len();
        }
        let c1_base = vel_functions.len();
        for (vertex, dirs) in directions.iter().enumerate() {
            for dir in 0..dirs.vectors.len() {
                vel_functions.push(VelFunction::C1Vertex { vertex, dir });
            }
        }
        let edge_base = vel_functions.len();
        for edge in 0..ne {
            for l in 0..per_edge {
                vel_functions.push(VelFunction::Edge { edge, l });
            }
        }
        let interior_base = vel_functions.len();
        for tri in 0..nt {
            for l in 0..per_tri_vel {
                vel_functions.push(VelFunction::Interior { tri, l });
            }
        }
        let c1_id = |a: usize, dir: usize| c1_base + c1_offset[a] + dir;
        let edge_id = |e: usize, l: usize| edge_base + e * per_edge + l;

        // ---- Pressure functions ----
        let mut pressure_functions = Vec::new();
        let mut pvertex_offset = vec![0usize; nv + 1];
        let mut pressure_vertex_areas = Vec::new();
        let element_areas: Vec<f64> = mesh.maps.iter().map(|m| 0.5 * m.det).collect();
        for a in 0..nv {
            let members = if mesh.vertex_class[a] == VertexClass::Corner {
                mesh.vertex_triangles[a].len()
            } else {
                1
            };
            pvertex_offset[a + 1] = pvertex_offset[a] + members;
            for member in 0..members {
                pressure_functions.push(PressureFunction::Vertex { vertex: a, member });
                if mesh.vertex_class[a] == VertexClass::Corner {
                    pressure_vertex_areas.push(element_areas[mesh.vertex_triangles[a][member]]);
                } else {
                    pressure_vertex_areas
                        .push(mesh.vertex_triangles[a].iter().map(|&t| element_areas[t]).sum());
                }
            }
        }
        let paverage_base = pressure_functions.len();
        for tri in 0..nt {
            pressure_functions.push(PressureFunction::Average { tri });
        }
        let pinterior_base = pressure_functions.len();
        for tri in 0..nt {
            for l in 0..per_tri_pressure {
                pressure_functions.push(PressureFunction::Interior { tri, l });
            }
        }
        let pvertex_id = |a: usize, member: usize| pvertex_offset[a] + member;

        // ---- Free/constrained classification of velocity functions ----
        let vel_free: Vec<bool> = vel_functions
            .iter()
            .map(|f| match *f {
                VelFunction::C0Vertex { vertex } => {
                    mesh.vertex_class[vertex] == VertexClass::Interior
                }
                VelFunction::C1Vertex { vertex, dir } => directions[vertex].free[dir],
                VelFunction::Edge { edge, .. } => !mesh.edges[edge].is_boundary(),
                VelFunction::Interior { .. } => true,
            })
            .collect();

        // ---- Global numbering ----
        let num_vel_dofs = 2 * vel_functions.len();
        let total = num_vel_dofs + pressure_functions.len();
        let mut vel_dof_index = vec![[usize::MAX; 2]; vel_functions.len()];
        let mut pressure_dof_index = vec![usize::MAX; pressure_functions.len()];
        let mut class = vec![DofClass::VelocityExterior; total];
        let mut constrained = vec![false; total];
        let mut next = 0usize;

        let is_exterior = |f: &VelFunction| !matches!(f, VelFunction::Interior { .. });

        // (1) Free velocity interface unknowns: C0, then C1, then edges.
        let assign_free = |pred: &dyn Fn(&VelFunction) -> bool,
                               next: &mut usize,
                               vel_dof_index: &mut Vec<[usize; 2]>| {
            for (f, func) in vel_functions.iter().enumerate() {
                if vel_free[f] && is_exterior(func) && pred(func) {
                    for c in 0..2 {
                        vel_dof_index[f][c] = *next;
                        *next += 1;
                    }
                }
            }
        };
        assign_free(&|f| matches!(f, VelFunction::C0Vertex { .. }), &mut next, &mut vel_dof_index);
        let free_c0_end = next;
        assign_free(&|f| matches!(f, VelFunction::C1Vertex { .. }), &mut next, &mut vel_dof_index);
        let free_c1_end = next;
        assign_free(&|f| matches!(f, VelFunction::Edge { .. }), &mut next, &mut vel_dof_index);
        let free_edge_end = next;

        // (2) Pressure interface unknowns: vertex, then averages.
        for (p, _) in pressure_functions.iter().enumerate().take(paverage_base) {
            pressure_dof_index[p] = next;
            class[next] = DofClass::PressureExterior;
            next += 1;
        }
        let pressure_vertex_end = next;
        for p in paverage_base..pinterior_base {
            pressure_dof_index[p] = next;
            class[next] = DofClass::PressureExterior;
            next += 1;
        }
        let pressure_average_end = next;

        // (3) Constrained velocity interface unknowns, same internal order.
        let assign_constrained = |pred: &dyn Fn(&VelFunction) -> bool,
                                      next: &mut usize,
                                      vel_dof_index: &mut Vec<[usize; 2]>,
                                      constrained: &mut Vec<bool>| {
            for (f, func) in vel_functions.iter().enumerate() {
                if !vel_free[f] && pred(func) {
                    for c in 0..2 {
                        vel_dof_index[f][c] = *next;
                        constrained[*next] = true;
                        *next += 1;
                    }
                }
            }
        };
        assign_constrained(
            &|f| matches!(f, VelFunction::C0Vertex { .. }),
            &mut next,
            &mut vel_dof_index,
            &mut constrained,
        );
        assign_constrained(
            &|f| matches!(f, VelFunction::C1Vertex { .. }),
            &mut next,
            &mut vel_dof_index,
            &mut constrained,
        );
        assign_constrained(
            &|f| matches!(f, VelFunction::Edge { .. }),
            &mut next,
            &mut vel_dof_index,
            &mut constrained,
        );
        let constrained_end = next;

        // (4) Element-interior velocity unknowns.
        for (f, func) in vel_functions.iter().enumerate() {
            if matches!(func, VelFunction::Interior { .. }) {
                for c in 0..2 {
                    vel_dof_index[f][c] = next;
                    class[next] = DofClass::VelocityInterior;
                    next += 1;
                }
            }
        }
        let velocity_interior_end = next;

        // (5) Element-interior pressure unknowns.
        for p in pinterior_base..pressure_functions.len() {
            pressure_dof_index[p] = next;
            class[next] = DofClass::PressureInterior;
            next += 1;
        }
        debug_assert_eq!(next, total);

        let sections = Sections {
            free_c0_end,
            free_c1_end,
            free_edge_end,
            pressure_vertex_end,
            pressure_average_end,
            constrained_end,
            velocity_interior_end,
            total,
        };

        // ---- Per-element derivative-pair change of basis ----
        let mut c1_links = Vec::with_capacity(nt);
        for t in 0..nt {
            let tri = mesh.triangles[t];
            let jac = mesh.maps[t].jacobian;
            let mut links = [C1Link { functions: [0, 0], g: [[0.0; 2]; 2] }; 3];
            for i in 0..3 {
                let a = tri[i];
                let dirs = &directions[a];
                let (d0, d1) = if let Some(edge_list) = &dirs.edges {
                    // Corner: the pair is the tangents of the two element
                    // edges meeting at the vertex, ordered by direction id.
                    let locals: Vec<usize> = (0..3)
                        .filter(|&e| EDGE_VERTICES[e].contains(&i))
                        .map(|e| mesh.triangle_edges[t][e])
                        .collect();
                    let mut ids: Vec<usize> = locals
                        .iter()
                        .map(|ge| edge_list.iter().position(|x| x == ge).expect("incident edge"))
                        .collect();
                    ids.sort_unstable();
                    (ids[0], ids[1])
                } else {
                    (0, 1)
                };
                let m = [
                    [dirs.vectors[d0][0], dirs.vectors[d1][0]],
                    [dirs.vectors[d0][1], dirs.vectors[d1][1]],
                ];
                let g = matmul2(invert2(m)?, jac);
                links[i] = C1Link { functions: [c1_id(a, d0), c1_id(a, d1)], g };
            }
            c1_links.push(links);
        }

        // ---- Element connectivity ----
        let roles = velocity_roles(k);
        let pressure_roles = crate::refelem::pressure_roles(k);
        let mut vel_connectivity = Vec::with_capacity(nt);
        let mut pressure_connectivity = Vec::with_capacity(nt);
        for t in 0..nt {
            let tri = mesh.triangles[t];
            let mut per_fn = Vec::with_capacity(roles.len());
            for role in &roles {
                let links = match *role {
                    BasisRole::VelC0Vertex(i) => {
                        vec![LocalLink { function: tri[i], weight: 1.0 }]
                    }
                    BasisRole::VelC1Vertex(i, s) => {
                        let link = &c1_links[t][i];
                        vec![
                            LocalLink { function: link.functions[0], weight: link.g[0][s] },
                            LocalLink { function: link.functions[1], weight: link.g[1][s] },
                        ]
                    }
                    BasisRole::VelEdge(e, l) => {
                        let ge = mesh.triangle_edges[t][e];
                        let weight = if mesh.edge_flipped(t, e) {
                            if l % 2 == 1 {
                                -1.0
                            } else {
                                1.0
                            }
                        } else {
                            1.0
                        };
                        vec![LocalLink { function: edge_id(ge, l), weight }]
                    }
                    BasisRole::VelInterior(l) => {
                        vec![LocalLink { function: interior_base + t * per_tri_vel + l, weight: 1.0 }]
                    }
                    _ => unreachable!("velocity roles contain no pressure entries"),
                };
                per_fn.push(links);
            }
            vel_connectivity.push(per_fn);

            let mut per_p = Vec::with_capacity(pressure_roles.len());
            let mut interior_counter = 0usize;
            for role in &pressure_roles {
                let link = match *role {
                    BasisRole::PressureVertex(i) => {
                        let a = tri[i];
                        let member = if mesh.vertex_class[a] == VertexClass::Corner {
                            mesh.vertex_triangles[a]
                                .iter()
                                .position(|&x| x == t)
                                .expect("element in its vertex patch")
                        } else {
                            0
                        };
                        LocalLink { function: pvertex_id(a, member), weight: 1.0 }
                    }
                    BasisRole::PressureAverage => {
                        LocalLink { function: paverage_base + t, weight: 1.0 }
                    }
                    BasisRole::PressureInterior(_) => {
                        let l = interior_counter;
                        interior_counter += 1;
                        LocalLink {
                            function: pinterior_base + t * per_tri_pressure + l,
                            weight: 1.0,
                        }
                    }
                    _ => unreachable!("pressure roles contain no velocity entries"),
                };
                per_p.push(link);
            }
            pressure_connectivity.push(per_p);
        }

        Ok(Self {
            k,
            directions,
            vel_functions,
            pressure_functions,
            vel_dof_index,
            pressure_dof_index,
            class,
            constrained,
            sections,
            c1_links,
            vel_connectivity,
            pressure_connectivity,
            pressure_vertex_areas,
            element_areas,
        })
    }

    /// Dimension of the condensed interface system (free velocity interface
    /// plus all pressure vertex and average unknowns).
    pub fn interface_dim(&self) -> usize {
        self.sections.pressure_average_end
    }

    /// Number of free velocity unknowns on the interface.
    pub fn free_velocity_interface_dim(&self) -> usize {
        self.sections.free_edge_end
    }

    /// Total number of degrees of freedom.
    pub fn num_dofs(&self) -> usize {
        self.sections.total
    }

    /// Support areas |ω| of the pressure vertex unknowns, aligned with the
    /// pressure-vertex section of the layout (patch area at vertices whose
    /// patch is a single support, element area per patch member at corners).
    pub fn patch_areas(&self) -> &[f64] {
        &self.pressure_vertex_areas
    }
}
