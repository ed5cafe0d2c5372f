//! Block-diagonal preconditioner for the condensed interface system.
//!
//! The interface operator has the saddle form `[[Ã, B̃ᵀ], [B̃, 0]]`.  The
//! preconditioner is `P = diag(Ā, M̄)` where both factors come from additive
//! Schwarz decompositions of the interface spaces:
//!
//! * **Velocity.**  The free exterior velocity space splits as a direct sum
//!   of (i) the span of all C0 vertex functions at interior vertices —
//!   one *global coupled block*, (ii) for every vertex and every free
//!   derivative direction the two Cartesian components of that derivative
//!   function — a 2×2 block each, and (iii) for every interior edge the
//!   `2(k−3)` edge functions of that edge.  Because the subspaces are
//!   spanned by disjoint groups of basis functions, the Schwarz operator
//!   `Ā` is exactly the block-diagonal part of `Ã` under the interface
//!   ordering (C0 vertices, C1 vertices, edges), and its inverse action is
//!   one solve per block with the corresponding principal submatrix of
//!   `Ã`.  The blocks are extracted and Cholesky-factored once at build
//!   time.
//!
//! * **Pressure.**  Every exterior pressure unknown spans its own subspace:
//!   a vertex function scaled by the inner product `|ω| k⁻⁴ p(a) q(a)`
//!   (`ω` the support patch) and an element-average function scaled by
//!   `|K|⁻¹ (∫_K p)(∫_K q)`.  Interior pressure functions have zero element
//!   mean and vanish at vertices, so projecting them out changes neither
//!   vertex values nor element integrals; in the coefficient basis `M̄` is
//!   therefore exactly diagonal with entries `|ω| k⁻⁴` and `|K|`.
//!
//! The apply routine performs exactly one solve per velocity block plus one
//! scaling per pressure unknown, so its cost is
//! `O(|V_c|² + |V| + |E| k²  + |T|)` per call.  Block solves are
//! independent; they run in parallel and write to disjoint index sets, so
//! the result is bit-identical no matter how the work is scheduled.

use crate::condense::CondensedSystem;
use crate::dofmap::{DofMap, VelFunction};
use crate::linalg::SpdFactor;
use crate::{Error, Result, MAX_DENSE_DIM};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// One velocity subspace: the global interface indices it spans and the
/// Cholesky factor of the corresponding principal submatrix of `Ã`.
#[derive(Clone, Debug)]
pub struct VelocityBlock {
    indices: Vec<usize>,
    factor: SpdFactor,
}

impl VelocityBlock {
    /// Global interface indices covered by this block.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Block dimension.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }
}

/// The block-diagonal interface preconditioner `P = diag(Ā, M̄)`.
#[derive(Clone, Debug)]
pub struct BlockPreconditioner {
    /// Polynomial order.
    pub k: usize,
    /// Number of exterior velocity unknowns.
    pub n_exterior_velocity: usize,
    /// Number of exterior pressure unknowns.
    pub n_exterior_pressure: usize,
    /// The coupled block over all C0 vertex functions (empty when the mesh
    /// has no interior vertices).
    c0: VelocityBlock,
    /// One 2×2 block per (vertex, free derivative direction) pair.
    c1: Vec<VelocityBlock>,
    /// One block per interior edge over its `2(k−3)` edge functions.
    edge: Vec<VelocityBlock>,
    /// Number of pressure vertex unknowns (the leading part of the
    /// pressure section; the rest are element averages).
    n_pressure_vertex: usize,
    /// Diagonal of `M̄`: `|ω| k⁻⁴` per pressure vertex unknown, `|K|` per
    /// element average.
    pressure_diag: Vec<f64>,
    /// Reciprocals of `pressure_diag`, used by the apply routine.
    pressure_inv: Vec<f64>,
    /// Exact arithmetic operations (multiplications and divisions) of one
    /// apply call.
    apply_cost: u64,
}

fn factor_block(
    a_tilde: &DMatrix<f64>,
    indices: Vec<usize>,
    what: &str,
) -> Result<VelocityBlock> {
    let n = indices.len();
    let mut sub = DMatrix::zeros(n, n);
    for (r, &gi) in indices.iter().enumerate() {
        for (c, &gj) in indices.iter().enumerate() {
            sub[(r, c)] = a_tilde[(gi, gj)];
        }
    }
    let factor = SpdFactor::factor(&sub).map_err(|_| {
        Error::Config(format!(
            "the {what} velocity preconditioner block is not positive \
             definite; the condensed velocity operator of a well-posed \
             problem restricts to a positive block"
        ))
    })?;
    Ok(VelocityBlock { indices, factor })
}

impl BlockPreconditioner {
    /// Extracts and factors the velocity blocks of `Ã` and builds the
    /// pressure diagonal from the patch and element areas.
    ///
    /// Fails with a dimension mismatch if the condensed system and the
    /// degree-of-freedom map disagree, and with a configuration error if a
    /// block is numerically singular.
    pub fn build(cond: &CondensedSystem, dofmap: &DofMap) -> Result<Self> {
        if cond.k != dofmap.k {
            return Err(Error::DimensionMismatch {
                what: "polynomial order of the condensed system".into(),
                expected: dofmap.k,
                got: cond.k,
            });
        }
        let s = &dofmap.sections;
        if cond.n_exterior_velocity != s.free_edge_end
            || cond.n_exterior_pressure != s.pressure_average_end - s.free_edge_end
        {
            return Err(Error::DimensionMismatch {
                what: "interface dimension of the condensed system".into(),
                expected: s.pressure_average_end,
                got: cond.interface_dim(),
            });
        }
        let k = cond.k;

        // Group the free exterior velocity unknowns into subspaces.  The
        // interface layout already orders them C0, C1, edges, so the C0
        // block is the leading index range; the C1 and edge groups are
        // collected from the function table.
        let c0_indices: Vec<usize> = (0..s.free_c0_end).collect();
        let mut c1_groups: Vec<Vec<usize>> = Vec::new();
        let mut edge_groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (f, func) in dofmap.vel_functions.iter().enumerate() {
            let [g0, g1] = dofmap.vel_dof_index[f];
            match *func {
                VelFunction::C1Vertex { .. } => {
                    if g0 < s.free_c1_end && g0 >= s.free_c0_end {
                        debug_assert!(g1 < s.free_c1_end);
                        c1_groups.push(vec![g0, g1]);
                    }
                }
                VelFunction::Edge { edge, .. } => {
                    if g0 < s.free_edge_end && g0 >= s.free_c1_end {
                        match edge_groups.last_mut() {
                            Some((e, group)) if *e == edge => {
                                group.push(g0);
                                group.push(g1);
                            }
                            _ => edge_groups.push((edge, vec![g0, g1])),
                        }
                    }
                }
                _ => {}
            }
        }
        let covered = c0_indices.len()
            + c1_groups.iter().map(Vec::len).sum::<usize>()
            + edge_groups.iter().map(|(_, g)| g.len()).sum::<usize>();
        assert_eq!(
            covered, s.free_edge_end,
            "every exterior velocity unknown must land in exactly one block"
        );
        for (_, group) in &edge_groups {
            assert_eq!(group.len(), 2 * (k - 3), "edge block width");
        }

        if cond.interface_dim() > MAX_DENSE_DIM {
            return Err(Error::Capability(format!(
                "interface dimension {} exceeds the dense cap {MAX_DENSE_DIM}",
                cond.interface_dim()
            )));
        }

        let c0 = factor_block(&cond.a_tilde, c0_indices, "C0 vertex")?;
        let c1: Vec<VelocityBlock> = c1_groups
            .into_par_iter()
            .map(|g| factor_block(&cond.a_tilde, g, "C1 vertex"))
            .collect::<Result<_>>()?;
        let edge: Vec<VelocityBlock> = edge_groups
            .into_par_iter()
            .map(|(_, g)| factor_block(&cond.a_tilde, g, "edge"))
            .collect::<Result<_>>()?;

        // Pressure diagonal: vertex entries |ω| k⁻⁴ aligned with the
        // pressure-vertex section, then element averages |K| in element
        // order.
        let k4 = (k as f64).powi(4);
        let n_pv = s.pressure_vertex_end - s.free_edge_end;
        let npe = cond.n_exterior_pressure;
        let mut pressure_diag = Vec::with_capacity(npe);
        for i in 0..npe {
            let d = if i < n_pv {
                dofmap.pressure_vertex_areas[i] / k4
            } else {
                dofmap.element_areas[i - n_pv]
            };
            if !(d > 0.0) {
                return Err(Error::Config(format!(
                    "pressure preconditioner weight {d:e} for interface \
                     unknown {i} is not strictly positive"
                )));
            }
            pressure_diag.push(d);
        }
        let pressure_inv: Vec<f64> = pressure_diag.iter().map(|d| 1.0 / d).collect();

        // Two triangular solves per block (n² + n operations each) plus one
        // scaling per pressure unknown.
        let mut apply_cost = 0u64;
        for b in std::iter::once(&c0).chain(&c1).chain(&edge) {
            let n = b.dim() as u64;
            apply_cost += 2 * n * n + 2 * n;
        }
        apply_cost += npe as u64;

        Ok(Self {
            k,
            n_exterior_velocity: cond.n_exterior_velocity,
            n_exterior_pressure: npe,
            c0,
            c1,
            edge,
            n_pressure_vertex: n_pv,
            pressure_diag,
            pressure_inv,
            apply_cost,
        })
    }

    /// Weights `w` such that `wᵀ p_e = ∫_Ω p` for an exterior pressure
    /// coefficient vector: zero on vertex unknowns (their functions have
    /// zero element integrals), `|K|` on element averages.
    pub fn pressure_integral_weights(&self) -> DVector<f64> {
        DVector::from_fn(self.n_exterior_pressure, |i, _| {
            if i < self.n_pressure_vertex {
                0.0
            } else {
                self.pressure_diag[i]
            }
        })
    }

    /// The coupled C0 vertex block.
    pub fn c0_block(&self) -> &VelocityBlock {
        &self.c0
    }

    /// The 2×2 derivative blocks.
    pub fn c1_blocks(&self) -> &[VelocityBlock] {
        &self.c1
    }

    /// The per-interior-edge blocks.
    pub fn edge_blocks(&self) -> &[VelocityBlock] {
        &self.edge
    }

    /// Diagonal entries of the pressure preconditioner `M̄`.
    pub fn pressure_diagonal(&self) -> &[f64] {
        &self.pressure_diag
    }

    /// Exact count of multiplications and divisions performed by one
    /// [`apply`](Self::apply) call.
    pub fn apply_cost(&self) -> u64 {
        self.apply_cost
    }

    /// Applies `P⁻¹` to an interface residual split into its velocity and
    /// pressure parts: one solve per velocity block, one scaling per
    /// pressure unknown.
    ///
    /// Panics if the input lengths do not match the exterior unknown
    /// counts; the operation itself cannot fail.
    pub fn apply(&self, f_e: &DVector<f64>, g_e: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        assert_eq!(
            f_e.len(),
            self.n_exterior_velocity,
            "velocity residual length"
        );
        assert_eq!(
            g_e.len(),
            self.n_exterior_pressure,
            "pressure residual length"
        );
        let blocks: Vec<&VelocityBlock> = std::iter::once(&self.c0)
            .chain(&self.c1)
            .chain(&self.edge)
            .collect();
        let solved: Vec<DVector<f64>> = blocks
            .par_iter()
            .map(|b| {
                let mut local = DVector::zeros(b.dim());
                for (i, &g) in b.indices.iter().enumerate() {
                    local[i] = f_e[g];
                }
                b.factor.solve_in_place(&mut local);
                local
            })
            .collect();
        let mut u = DVector::zeros(self.n_exterior_velocity);
        for (b, local) in blocks.iter().zip(&solved) {
            for (i, &g) in b.indices.iter().enumerate() {
                u[g] = local[i];
            }
        }
        let mut p = DVector::zeros(self.n_exterior_pressure);
        for i in 0..self.n_exterior_pressure {
            p[i] = g_e[i] * self.pressure_inv[i];
        }
        (u, p)
    }

    /// Applies `P⁻¹` to a stacked interface vector `[f_E; g_e]`.
    pub fn apply_interface(&self, r: &DVector<f64>) -> DVector<f64> {
        let ne = self.n_exterior_velocity;
        let npe = self.n_exterior_pressure;
        assert_eq!(r.len(), ne + npe, "interface residual length");
        let (u, p) = self.apply(&r.rows(0, ne).clone_owned(), &r.rows(ne, npe).clone_owned());
        let mut out = DVector::zeros(ne + npe);
        out.rows_mut(0, ne).copy_from(&u);
        out.rows_mut(ne, npe).copy_from(&p);
        out
    }
}
