//! Global assembly of the mixed saddle-point system.
//!
//! Element stiffness and divergence matrices are integrated once on the
//! reference triangle (tabulated basis × quadrature) and pulled back through
//! each element's affine map.  Global matrices are stored as sparse blocks
//! partitioned by the degree-of-freedom classes of [`crate::dofmap`]:
//! exterior velocity `E`, exterior pressure `e`, constrained velocity `C`,
//! interior velocity `I`, and interior pressure `ι`.  Couplings into the
//! constrained class are folded into lifting vectors so the free system
//! never references constrained indices.
//!
//! Conventions:
//! * the viscosity coefficient is 1, so the velocity block is the plain
//!   vector Laplacian `∫ ∇u : ∇v`;
//! * the mixed form is `b(v, q) = −∫ q ∇·v`, stored with velocity rows and
//!   pressure columns (the pressure equations use the implicit transpose);
//! * pressure test functions carry no load: body forces enter the velocity
//!   rows only, and the pressure right-hand side is purely boundary lifting.

use crate::dofmap::DofMap;
use crate::mesh::{AffineMap, Mesh};
use crate::polyquad::gauss_lobatto;
use crate::refelem::{edge_point, velocity_trace_on_edge, ReferenceBasisTable, EDGE_VERTICES};
use crate::{Error, Result, MAX_DENSE_DIM};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

/// Boundary-data closures must be callable from parallel element loops.
pub type FieldFn<'a> = &'a (dyn Fn([f64; 2]) -> [f64; 2] + Sync);

/// Dense element matrices for one triangle, in local basis enumeration
/// order (scalar velocity functions and pressure functions).
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    /// Scalar stiffness `∫_K ∇φ_i · ∇φ_j` (symmetric, shared by both
    /// Cartesian components of the velocity).
    pub stiffness: DMatrix<f64>,
    /// Mixed blocks `divergence[c][(p, i)] = −∫_K ψ_p ∂_c φ_i`, one per
    /// Cartesian component `c`.
    pub divergence: [DMatrix<f64>; 2],
}

/// Integrates the stiffness and divergence matrices of one element by
/// pulling the tabulated reference basis through the element map.
///
/// Gradients transform as `∇φ = J^{-T} ∇̂φ̂` and measures as `|det J|`
/// (quadrature weights on the reference triangle already sum to its area).
/// Fails with a numerical-breakdown error when the map is singular.
pub fn element_matrices(table: &ReferenceBasisTable, map: &AffineMap) -> Result<ElementMatrices> {
    let j = &map.jacobian;
    let frob2 = j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[1][0] * j[1][0] + j[1][1] * j[1][1];
    let scale = map.det.abs();
    if !(scale > 1e-14 * frob2) {
        return Err(Error::NumericalBreakdown(format!(
            "element map is singular (det = {:e})",
            map.det
        )));
    }
    let jit = map.inverse_transpose();
    let nq = table.rule.len();
    let nv = table.velocity.len();
    let np = table.pressure.len();
    let w = &table.rule.weights;

    // Physical gradients of every scalar velocity function at every
    // quadrature point, laid out as pushed[i][2q + c].
    let mut pushed = vec![0.0f64; nv * 2 * nq];
    for i in 0..nv {
        let row = &mut pushed[i * 2 * nq..(i + 1) * 2 * nq];
        for (q, g) in table.velocity.grads[i].iter().enumerate() {
            row[2 * q] = jit[0][0] * g[0] + jit[0][1] * g[1];
            row[2 * q + 1] = jit[1][0] * g[0] + jit[1][1] * g[1];
        }
    }

    let mut stiffness = DMatrix::zeros(nv, nv);
    for i in 0..nv {
        let pi = &pushed[i * 2 * nq..(i + 1) * 2 * nq];
        for jb in i..nv {
            let pj = &pushed[jb * 2 * nq..(jb + 1) * 2 * nq];
            let mut s = 0.0;
            for q in 0..nq {
                s += w[q] * (pi[2 * q] * pj[2 * q] + pi[2 * q + 1] * pj[2 * q + 1]);
            }
            s *= scale;
            stiffness[(i, jb)] = s;
            stiffness[(jb, i)] = s;
        }
    }

    let mut divergence = [DMatrix::zeros(np, nv), DMatrix::zeros(np, nv)];
    for c in 0..2 {
        for p in 0..np {
            let pv = &table.pressure.values[p];
            for i in 0..nv {
                let pi = &pushed[i * 2 * nq..(i + 1) * 2 * nq];
                let mut s = 0.0;
                for q in 0..nq {
                    s += w[q] * pv[q] * pi[2 * q + c];
                }
                divergence[c][(p, i)] = -scale * s;
            }
        }
    }

    Ok(ElementMatrices { stiffness, divergence })
}

/// Body-force element load `∫_K f_c φ_i`, laid out as `load[2i + c]`.
fn element_load(table: &ReferenceBasisTable, map: &AffineMap, f: FieldFn) -> Vec<f64> {
    let nv = table.velocity.len();
    let scale = map.det.abs();
    let mut load = vec![0.0f64; 2 * nv];
    for (q, (&p, &w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
        let fv = f(map.apply(p));
        let contrib = [scale * w * fv[0], scale * w * fv[1]];
        if contrib[0] == 0.0 && contrib[1] == 0.0 {
            continue;
        }
        for i in 0..nv {
            let v = table.velocity.values[i][q];
            load[2 * i] += contrib[0] * v;
            load[2 * i + 1] += contrib[1] * v;
        }
    }
    load
}

/// Interpolates essential boundary data into the constrained velocity
/// coefficients.
///
/// Each boundary edge carries, per Cartesian component, exactly `k + 1`
/// global functions with a nontrivial trace: the two endpoint value
/// functions, one endpoint derivative function per endpoint (the tangential
/// one at a smooth boundary vertex, the matching edge tangent at a corner),
/// and the `k − 3` edge functions.  Their coefficients are fixed by
/// collocating the trace at `k + 1` Gauss–Lobatto points along the edge.
///
/// Coefficients shared between neighbouring boundary edges (endpoint values,
/// and tangential derivatives where the boundary is straight) are written
/// first-comer-wins and cross-checked; a disagreement means the supplied
/// data cannot be matched by a velocity field that is differentiable at the
/// shared vertex, and is reported as invalid input.
pub fn interpolate_bc(mesh: &Mesh, dofmap: &DofMap, data: FieldFn) -> Result<DVector<f64>> {
    let k = dofmap.k;
    let s = &dofmap.sections;
    let base = s.pressure_average_end;
    let n_con = s.constrained_end - base;
    let mut values: DVector<f64> = DVector::zeros(n_con);
    let mut written = vec![false; n_con];
    let nodes = gauss_lobatto(k + 1);

    for (ge, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let t = edge.triangles[0];
        let le = mesh.triangle_edges[t]
            .iter()
            .position(|&x| x == ge)
            .expect("edge missing from its own triangle");
        let tr = velocity_trace_on_edge(k, le, &nodes)?;

        // The k + 1 trace-active global functions on this edge, each with
        // its trace at the collocation nodes.
        let mut cols: Vec<(usize, Vec<f64>)> = Vec::with_capacity(k + 1);
        for &li in &EDGE_VERTICES[le] {
            let a = mesh.triangles[t][li];
            // Endpoint value function.
            let c0 = &dofmap.vel_connectivity[t][li][0];
            debug_assert_eq!(c0.weight, 1.0);
            cols.push((c0.function, tr[li].clone()));
            // Endpoint derivative function with nonzero trace: direction 0
            // (the tangent) at a smooth boundary vertex, or the tangent of
            // this very edge at a corner.
            let dirs = &dofmap.directions[a];
            let d = match &dirs.edges {
                Some(list) => list
                    .iter()
                    .position(|&x| x == ge)
                    .expect("corner direction list misses an incident boundary edge"),
                None => 0,
            };
            let link = &dofmap.c1_links[t][li];
            let r = (0..2)
                .find(|&r| {
                    matches!(
                        dofmap.vel_functions[link.functions[r]],
                        crate::dofmap::VelFunction::C1Vertex { vertex, dir }
                            if vertex == a && dir == d
                    )
                })
                .expect("derivative pair misses the edge-tangential direction");
            let trace: Vec<f64> = (0..=k)
                .map(|q| {
                    link.g[r][0] * tr[3 + 2 * li][q] + link.g[r][1] * tr[3 + 2 * li + 1][q]
                })
                .collect();
            cols.push((link.functions[r], trace));
        }
        for l in 0..k - 3 {
            let role = 9 + le * (k - 3) + l;
            let link = &dofmap.vel_connectivity[t][role][0];
            let trace: Vec<f64> = tr[role].iter().map(|&v| v * link.weight).collect();
            cols.push((link.function, trace));
        }
        debug_assert_eq!(cols.len(), k + 1);

        let mut m = DMatrix::zeros(k + 1, k + 1);
        for (ci, (_, trace)) in cols.iter().enumerate() {
            for q in 0..=k {
                m[(q, ci)] = trace[q];
            }
        }
        let lu = m.lu();
        for c in 0..2 {
            let rhs = DVector::from_iterator(
                k + 1,
                nodes.iter().map(|&tq| data(mesh.maps[t].apply(edge_point(le, tq)))[c]),
            );
            let sol = lu.solve(&rhs).ok_or_else(|| {
                Error::NumericalBreakdown("boundary trace collocation system is singular".into())
            })?;
            for (ci, &(func, _)) in cols.iter().enumerate() {
                let g = dofmap.vel_dof_index[func][c];
                debug_assert!(dofmap.constrained[g]);
                let idx = g - base;
                let v = sol[ci];
                if written[idx] {
                    if (values[idx] - v).abs() > 1e-8 * (1.0 + values[idx].abs()) {
                        let at = match dofmap.vel_functions[func] {
                            crate::dofmap::VelFunction::C0Vertex { vertex }
                            | crate::dofmap::VelFunction::C1Vertex { vertex, .. } => {
                                let p = mesh.vertices[vertex];
                                format!("at boundary vertex ({}, {})", p[0], p[1])
                            }
                            _ => "along a boundary edge".into(),
                        };
                        return Err(Error::InvalidInput(format!(
                            "boundary data is incompatible with the velocity space's \
                             differentiability {at}: coefficient mismatch {:e} vs {:e}",
                            values[idx], v
                        )));
                    }
                } else {
                    values[idx] = v;
                    written[idx] = true;
                }
            }
        }
    }
    assert!(
        written.iter().all(|&w| w),
        "a constrained coefficient was not reached by any boundary edge"
    );
    Ok(values)
}

/// Which partition a global degree of freedom belongs to, with its
/// block-local index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    /// Exterior (interface) velocity.
    E(usize),
    /// Exterior pressure (vertex and average functions).
    Pe(usize),
    /// Constrained velocity.
    C(usize),
    /// Interior velocity bubble.
    I(usize),
    /// Interior pressure.
    Pi(usize),
}

fn slot(s: &crate::dofmap::Sections, g: usize) -> Slot {
    if g < s.free_edge_end {
        Slot::E(g)
    } else if g < s.pressure_average_end {
        Slot::Pe(g - s.free_edge_end)
    } else if g < s.constrained_end {
        Slot::C(g - s.pressure_average_end)
    } else if g < s.velocity_interior_end {
        Slot::I(g - s.constrained_end)
    } else {
        Slot::Pi(g - s.velocity_interior_end)
    }
}

/// Merges coordinate triplets into a CSR matrix, summing duplicates.
///
/// The sort is stable and the duplicate sums run in insertion order, so the
/// result is bit-identical however the triplets were produced.
fn csr_from_triplets(
    nrows: usize,
    ncols: usize,
    mut trip: Vec<(usize, usize, f64)>,
) -> CsrMatrix<f64> {
    trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut row_offsets = Vec::with_capacity(nrows + 1);
    let mut col_indices = Vec::new();
    let mut vals = Vec::new();
    row_offsets.push(0);
    let mut row = 0usize;
    let mut it = trip.into_iter().peekable();
    while let Some((r, c, v)) = it.next() {
        let mut sum = v;
        while let Some(&(r2, c2, v2)) = it.peek() {
            if r2 == r && c2 == c {
                sum += v2;
                it.next();
            } else {
                break;
            }
        }
        while row < r {
            row_offsets.push(col_indices.len());
            row += 1;
        }
        col_indices.push(c);
        vals.push(sum);
    }
    while row < nrows {
        row_offsets.push(col_indices.len());
        row += 1;
    }
    CsrMatrix::try_from_csr_data(nrows, ncols, row_offsets, col_indices, vals)
        .expect("triplet merge produced invalid sparse data")
}

/// Expands an upper-triangle triplet list into its full symmetric form.
fn mirror_upper(trip: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    let mut full = Vec::with_capacity(2 * trip.len());
    for (r, c, v) in trip {
        full.push((r, c, v));
        if r != c {
            full.push((c, r, v));
        }
    }
    full
}

/// The assembled saddle system, partitioned into sparse blocks over the
/// free global ordering `[u_E, p_e, u_I, p_ι]` with constrained couplings
/// folded into lifting vectors.
///
/// Velocity blocks are symmetric across the partition (`A_IE = A_EIᵀ` is
/// kept implicit); mixed blocks are stored with velocity rows and pressure
/// columns.  The vectors `lift_*` hold `(coupling into constrained dofs) ×
/// (boundary values)` and enter the right-hand sides with a minus sign;
/// `f_e`/`f_i` hold the body-force loads only.
#[derive(Clone, Debug)]
pub struct PartitionedSystem {
    /// Polynomial order.
    pub k: usize,
    /// Number of exterior (interface) velocity unknowns.
    pub n_exterior_velocity: usize,
    /// Number of exterior pressure unknowns (vertex + average functions).
    pub n_exterior_pressure: usize,
    /// Number of constrained velocity coefficients.
    pub n_constrained: usize,
    /// Number of interior velocity unknowns.
    pub n_interior_velocity: usize,
    /// Number of interior pressure unknowns.
    pub n_interior_pressure: usize,
    /// Exterior velocity × exterior velocity stiffness.
    pub a_ee: CsrMatrix<f64>,
    /// Exterior velocity × interior velocity stiffness.
    pub a_ei: CsrMatrix<f64>,
    /// Interior velocity × interior velocity stiffness.
    pub a_ii: CsrMatrix<f64>,
    /// Exterior velocity × exterior pressure mixed block.
    pub b_ee: CsrMatrix<f64>,
    /// Exterior velocity × interior pressure mixed block.
    pub b_ei: CsrMatrix<f64>,
    /// Interior velocity × exterior pressure mixed block.
    pub b_ie: CsrMatrix<f64>,
    /// Interior velocity × interior pressure mixed block.
    pub b_ii: CsrMatrix<f64>,
    /// Body-force load on exterior velocity rows.
    pub f_e: DVector<f64>,
    /// Body-force load on interior velocity rows.
    pub f_i: DVector<f64>,
    /// Boundary lifting on exterior velocity rows.
    pub lift_e: DVector<f64>,
    /// Boundary lifting on interior velocity rows.
    pub lift_i: DVector<f64>,
    /// Boundary lifting on exterior pressure rows.
    pub lift_pe: DVector<f64>,
    /// Boundary lifting on interior pressure rows.
    pub lift_pi: DVector<f64>,
    /// Interpolated boundary coefficients, indexed by constrained slot.
    pub boundary_values: DVector<f64>,
    /// Per-element dense matrices, retained for condensation and
    /// back-substitution.
    pub elements: Vec<ElementMatrices>,
}

impl PartitionedSystem {
    /// Dimension of the interface (exterior velocity + exterior pressure).
    pub fn interface_dim(&self) -> usize {
        self.n_exterior_velocity + self.n_exterior_pressure
    }

    /// Total number of free unknowns.
    pub fn n_free(&self) -> usize {
        self.n_exterior_velocity
            + self.n_exterior_pressure
            + self.n_interior_velocity
            + self.n_interior_pressure
    }

    /// Right-hand side of the exterior rows before condensation:
    /// `[f_E − lift_E; −lift_e]`.
    pub fn exterior_rhs(&self) -> DVector<f64> {
        let ne = self.n_exterior_velocity;
        let npe = self.n_exterior_pressure;
        let mut rhs = DVector::zeros(ne + npe);
        for i in 0..ne {
            rhs[i] = self.f_e[i] - self.lift_e[i];
        }
        for i in 0..npe {
            rhs[ne + i] = -self.lift_pe[i];
        }
        rhs
    }

    /// Right-hand side of the interior rows: `[f_I − lift_I; −lift_ι]`.
    pub fn interior_rhs(&self) -> DVector<f64> {
        let ni = self.n_interior_velocity;
        let npi = self.n_interior_pressure;
        let mut rhs = DVector::zeros(ni + npi);
        for i in 0..ni {
            rhs[i] = self.f_i[i] - self.lift_i[i];
        }
        for i in 0..npi {
            rhs[ni + i] = -self.lift_pi[i];
        }
        rhs
    }

    /// Materializes the full free saddle matrix and its right-hand side in
    /// the global free ordering `[u_E, p_e, u_I, p_ι]`.
    ///
    /// Intended for direct diagnostic solves on small problems; refuses
    /// systems larger than [`MAX_DENSE_DIM`].
    pub fn dense_free_saddle(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let ne = self.n_exterior_velocity;
        let npe = self.n_exterior_pressure;
        let ni = self.n_interior_velocity;
        let npi = self.n_interior_pressure;
        let n = ne + npe + ni + npi;
        if n > MAX_DENSE_DIM {
            return Err(Error::Capability(format!(
                "dense saddle dimension {n} exceeds the cap {MAX_DENSE_DIM}"
            )));
        }
        let (oe, ope, oi, opi) = (0, ne, ne + npe, ne + npe + ni);
        let mut m = DMatrix::zeros(n, n);
        let mut place_sym = |mtx: &CsrMatrix<f64>, ro: usize, co: usize, sym: bool| {
            for (r, c, v) in mtx.triplet_iter() {
                m[(ro + r, co + c)] = *v;
                if sym {
                    m[(co + c, ro + r)] = *v;
                }
            }
        };
        place_sym(&self.a_ee, oe, oe, false);
        place_sym(&self.a_ii, oi, oi, false);
        place_sym(&self.a_ei, oe, oi, true);
        place_sym(&self.b_ee, oe, ope, true);
        place_sym(&self.b_ei, oe, opi, true);
        place_sym(&self.b_ie, oi, ope, true);
        place_sym(&self.b_ii, oi, opi, true);
        let mut rhs = DVector::zeros(n);
        let ext = self.exterior_rhs();
        let int = self.interior_rhs();
        for i in 0..ne {
            rhs[oe + i] = ext[i];
        }
        for i in 0..npe {
            rhs[ope + i] = ext[ne + i];
        }
        for i in 0..ni {
            rhs[oi + i] = int[i];
        }
        for i in 0..npi {
            rhs[opi + i] = int[ni + i];
        }
        Ok((m, rhs))
    }
}

/// Assembles the partitioned saddle system for one mesh, degree-of-freedom
/// map, and reference table.
///
/// `body_force` omitted means `f ≡ 0`.  `dirichlet` supplies the essential
/// boundary velocity; it is interpolated by [`interpolate_bc`] and folded
/// into the lifting vectors.  Element integration runs in parallel; the
/// global scatter is a deterministic serial merge, so the result is
/// bit-identical across thread counts.
pub fn assemble(
    mesh: &Mesh,
    dofmap: &DofMap,
    table: &ReferenceBasisTable,
    body_force: Option<FieldFn>,
    dirichlet: FieldFn,
) -> Result<PartitionedSystem> {
    let nt = mesh.num_triangles();
    if dofmap.vel_connectivity.len() != nt {
        return Err(Error::DimensionMismatch {
            what: "degree-of-freedom map vs mesh".into(),
            expected: nt,
            got: dofmap.vel_connectivity.len(),
        });
    }
    if table.k != dofmap.k {
        return Err(Error::DimensionMismatch {
            what: "reference table order vs map order".into(),
            expected: dofmap.k,
            got: table.k,
        });
    }

    let boundary_values = interpolate_bc(mesh, dofmap, dirichlet)?;

    let computed: Result<Vec<(ElementMatrices, Vec<f64>)>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let em = element_matrices(table, &mesh.maps[t])?;
            let load = match body_force {
                Some(f) => element_load(table, &mesh.maps[t], f),
                None => Vec::new(),
            };
            Ok((em, load))
        })
        .collect();
    let computed = computed?;

    let s = &dofmap.sections;
    let ne = s.free_edge_end;
    let npe = s.pressure_average_end - s.free_edge_end;
    let nc = s.constrained_end - s.pressure_average_end;
    let ni = s.velocity_interior_end - s.constrained_end;
    let npi = s.total - s.velocity_interior_end;

    let mut t_aee: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_aei: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_aii: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_bee: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_bei: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_bie: Vec<(usize, usize, f64)> = Vec::new();
    let mut t_bii: Vec<(usize, usize, f64)> = Vec::new();
    let mut f_e = DVector::zeros(ne);
    let mut f_i = DVector::zeros(ni);
    let mut lift_e = DVector::zeros(ne);
    let mut lift_i = DVector::zeros(ni);
    let mut lift_pe = DVector::zeros(npe);
    let mut lift_pi = DVector::zeros(npi);

    let mut elements = Vec::with_capacity(nt);
    for (t, (em, load)) in computed.into_iter().enumerate() {
        let conn = &dofmap.vel_connectivity[t];
        let pconn = &dofmap.pressure_connectivity[t];
        let nv = conn.len();

        // Velocity–velocity couplings: both components share the scalar
        // stiffness.  Symmetric pairs are routed through the canonical
        // (upper-triangle) orientation so the merged matrix is exactly
        // symmetric.
        for i in 0..nv {
            for li in &conn[i] {
                for j in 0..nv {
                    for lj in &conn[j] {
                        let v = em.stiffness[(i, j)] * li.weight * lj.weight;
                        for c in 0..2 {
                            let gr = dofmap.vel_dof_index[li.function][c];
                            let gc = dofmap.vel_dof_index[lj.function][c];
                            if gr > gc {
                                continue; // lower triangle: mirrored later
                            }
                            match (slot(s, gr), slot(s, gc)) {
                                (Slot::E(r), Slot::E(cc)) => t_aee.push((r, cc, v)),
                                (Slot::E(r), Slot::I(cc)) => t_aei.push((r, cc, v)),
                                (Slot::I(r), Slot::I(cc)) => t_aii.push((r, cc, v)),
                                (Slot::E(r), Slot::C(cc)) => {
                                    lift_e[r] += v * boundary_values[cc];
                                }
                                (Slot::C(r), Slot::C(cc)) => {
                                    // Both constrained: no free equation.
                                    let _ = (r, cc);
                                }
                                (Slot::C(r), Slot::I(cc)) => {
                                    lift_i[cc] += v * boundary_values[r];
                                }
                                other => unreachable!(
                                    "velocity dofs routed to pressure slots: {other:?}"
                                ),
                            }
                        }
                    }
                }
            }
        }

        // Mixed couplings: velocity rows, pressure columns.  The dof layout
        // guarantees C < I globally but E < Pe < C, so both orientations of
        // the velocity–pressure pair occur; route on the velocity slot.
        for p in 0..pconn.len() {
            let lp = &pconn[p];
            let gp = dofmap.pressure_dof_index[lp.function];
            let pslot = slot(s, gp);
            for i in 0..nv {
                for li in &conn[i] {
                    for c in 0..2 {
                        let v = em.divergence[c][(p, i)] * li.weight * lp.weight;
                        let gv = dofmap.vel_dof_index[li.function][c];
                        match (slot(s, gv), pslot) {
                            (Slot::E(r), Slot::Pe(cc)) => t_bee.push((r, cc, v)),
                            (Slot::E(r), Slot::Pi(cc)) => t_bei.push((r, cc, v)),
                            (Slot::I(r), Slot::Pe(cc)) => t_bie.push((r, cc, v)),
                            (Slot::I(r), Slot::Pi(cc)) => t_bii.push((r, cc, v)),
                            (Slot::C(r), Slot::Pe(cc)) => {
                                lift_pe[cc] += v * boundary_values[r];
                            }
                            (Slot::C(r), Slot::Pi(cc)) => {
                                lift_pi[cc] += v * boundary_values[r];
                            }
                            other => {
                                unreachable!("mixed coupling routed to {other:?}")
                            }
                        }
                    }
                }
            }
        }

        if !load.is_empty() {
            for i in 0..nv {
                for li in &conn[i] {
                    for c in 0..2 {
                        let v = li.weight * load[2 * i + c];
                        match slot(s, dofmap.vel_dof_index[li.function][c]) {
                            Slot::E(r) => f_e[r] += v,
                            Slot::I(r) => f_i[r] += v,
                            Slot::C(_) => {}
                            other => unreachable!("velocity load routed to {other:?}"),
                        }
                    }
                }
            }
        }

        elements.push(em);
    }

    Ok(PartitionedSystem {
        k: dofmap.k,
        n_exterior_velocity: ne,
        n_exterior_pressure: npe,
        n_constrained: nc,
        n_interior_velocity: ni,
        n_interior_pressure: npi,
        a_ee: csr_from_triplets(ne, ne, mirror_upper(t_aee)),
        a_ei: csr_from_triplets(ne, ni, t_aei),
        a_ii: csr_from_triplets(ni, ni, mirror_upper(t_aii)),
        b_ee: csr_from_triplets(ne, npe, t_bee),
        b_ei: csr_from_triplets(ne, npi, t_bei),
        b_ie: csr_from_triplets(ni, npe, t_bie),
        b_ii: csr_from_triplets(ni, npi, t_bii),
        f_e,
        f_i,
        lift_e,
        lift_i,
        lift_pe,
        lift_pi,
        boundary_values,
        elements,
    })
}

/// Gathers the local scalar-velocity coefficient pairs of one element from
/// a full global coefficient vector (free and constrained entries).
pub fn velocity_element_coeffs(dofmap: &DofMap, t: usize, full: &DVector<f64>) -> Vec<[f64; 2]> {
    dofmap.vel_connectivity[t]
        .iter()
        .map(|links| {
            let mut c = [0.0; 2];
            for l in links {
                for (ci, v) in c.iter_mut().enumerate() {
                    *v += l.weight * full[dofmap.vel_dof_index[l.function][ci]];
                }
            }
            c
        })
        .collect()
}

/// Gathers the local pressure coefficients of one element from a full
/// global coefficient vector.
pub fn pressure_element_coeffs(dofmap: &DofMap, t: usize, full: &DVector<f64>) -> Vec<f64> {
    dofmap.pressure_connectivity[t]
        .iter()
        .map(|l| l.weight * full[dofmap.pressure_dof_index[l.function]])
        .collect()
}

/// Field values of a discrete solution at the quadrature points of one
/// element.
#[derive(Clone, Debug)]
pub struct ElementFieldSample {
    /// Physical quadrature points.
    pub points: Vec<[f64; 2]>,
    /// Physical quadrature weights (reference weights × |det J|), so that
    /// `Σ_q weights[q] f(points[q])` integrates over the element.
    pub weights: Vec<f64>,
    /// Velocity vector at each point.
    pub velocity: Vec<[f64; 2]>,
    /// Velocity gradient at each point: `gradient[q][c][d] = ∂_d u_c`.
    pub velocity_gradient: Vec<[[f64; 2]; 2]>,
    /// Velocity divergence at each point.
    pub divergence: Vec<f64>,
    /// Pressure at each point.
    pub pressure: Vec<f64>,
}

/// Evaluates a discrete solution (full global coefficient vector, free and
/// constrained entries populated) at the quadrature points of element `t`.
pub fn sample_element_fields(
    table: &ReferenceBasisTable,
    mesh: &Mesh,
    dofmap: &DofMap,
    t: usize,
    full: &DVector<f64>,
) -> ElementFieldSample {
    let vc = velocity_element_coeffs(dofmap, t, full);
    let pc = pressure_element_coeffs(dofmap, t, full);
    let map = &mesh.maps[t];
    let jit = map.inverse_transpose();
    let scale = map.det.abs();
    let nq = table.rule.len();
    let mut out = ElementFieldSample {
        points: Vec::with_capacity(nq),
        weights: Vec::with_capacity(nq),
        velocity: Vec::with_capacity(nq),
        velocity_gradient: Vec::with_capacity(nq),
        divergence: Vec::with_capacity(nq),
        pressure: Vec::with_capacity(nq),
    };
    for q in 0..nq {
        out.points.push(map.apply(table.rule.points[q]));
        out.weights.push(scale * table.rule.weights[q]);
        let mut val = [0.0; 2];
        let mut gref = [[0.0; 2]; 2];
        for (i, c) in vc.iter().enumerate() {
            let v = table.velocity.values[i][q];
            let g = table.velocity.grads[i][q];
            for comp in 0..2 {
                val[comp] += c[comp] * v;
                gref[comp][0] += c[comp] * g[0];
                gref[comp][1] += c[comp] * g[1];
            }
        }
        let mut grad = [[0.0; 2]; 2];
        for comp in 0..2 {
            for d in 0..2 {
                grad[comp][d] = jit[d][0] * gref[comp][0] + jit[d][1] * gref[comp][1];
            }
        }
        let mut p = 0.0;
        for (i, c) in pc.iter().enumerate() {
            p += c * table.pressure.values[i][q];
        }
        out.velocity.push(val);
        out.velocity_gradient.push(grad);
        out.divergence.push(grad[0][0] + grad[1][1]);
        out.pressure.push(p);
    }
    out
}

/// Composes a full global coefficient vector from the free solution in the
/// free ordering `[u_E, p_e, u_I, p_ι]` and the constrained boundary
/// coefficients.
pub fn full_coefficients(
    dofmap: &DofMap,
    free: &DVector<f64>,
    boundary: &DVector<f64>,
) -> DVector<f64> {
    let s = &dofmap.sections;
    let nc = s.constrained_end - s.pressure_average_end;
    assert_eq!(free.len(), s.total - nc, "free vector length mismatch");
    assert_eq!(boundary.len(), nc, "boundary vector length mismatch");
    let mut full = DVector::zeros(s.total);
    for g in 0..s.total {
        full[g] = if g < s.pressure_average_end {
            free[g]
        } else if g < s.constrained_end {
            boundary[g - s.pressure_average_end]
        } else {
            free[g - nc]
        };
    }
    full
}
