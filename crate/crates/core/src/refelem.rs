// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local basis tables on the reference triangle.
//!
//! Two scalar families are constructed, both indexed by a [`BasisRole`] tag:
//!
//! **Pressure family** (degree `k − 1`, dimension `k(k+1)/2`), built from
//! Bernstein polynomials `B^{k−1}_α`:
//!
//! * three *vertex* functions `ψ̂_i = B_{(k−1)eᵢ} − B_β` with `ψ̂_i(â_j) =
//!   δ_ij` and zero mean;
//! * one *average* function `ψ̂_T̂ = 1 − Σ ψ̂_i` with unit mean and zero
//!   vertex values;
//! * `k(k+1)/2 − 4` *interior* functions `ψ̂_α = B_α − B_β` (zero mean, zero
//!   vertex values) for the remaining non-vertex indices `α`.
//!
//! The fixed reference index `β` is the lexicographically smallest non-vertex
//! multi-index, `(0, 1, k−2)`. A pressure coefficient vector therefore reads
//! off directly: vertex coefficients are point values at the vertices and the
//! average coefficient is the element mean.
//!
//! **Velocity family** (scalar, degree `k`, dimension `(k+1)(k+2)/2`):
//!
//! * three *C⁰ vertex* functions `φ̂_i = λ_i²(3 − 2λ_i)` (value-dual, zero
//!   gradient at every vertex);
//! * six *C¹ vertex* functions `φ̂_i^{(1,0)}, φ̂_i^{(0,1)}` with the exact
//!   derivative duality `D^β φ̂_i^α(â_j) = δ_{αβ} δ_{ij}`, built from the
//!   vector polynomials `J_i` based on the Jacobi polynomial `P^(3,3)_{k−3}`;
//! * `k − 3` *edge* functions per edge, `λ_i² λ_j² r_l(λ_j − λ_i)` with
//!   Legendre `r_l` of degree `l ≤ k − 4`;
//! * `(k−1)(k−2)/2` *interior* functions `λ₁λ₂λ₃ s_l` with `s_l` the
//!   Bernstein basis of degree `k − 3`.
//!
//! Velocity vector fields use each scalar function twice (times `e₁`, `e₂`);
//! that product structure lives in the DOF map, not here.
//!
//! Edges are numbered opposite their vertex: edge 0 = (â₂, â₃), edge 1 =
//! (â₃, â₁), edge 2 = (â₁, â₂), each oriented by its canonical endpoint
//! order.

use crate::polyquad::{
    bernstein_eval, bernstein_grad, gauss_legendre, interior_multi_indices, jacobi33_deriv,
    jacobi33_endpoint_minus_one, jacobi33_eval, legendre_deriv, legendre_eval, multi_indices,
    triangle_quadrature, BarycentricPoint, MultiIndex, QuadratureRule,
};
use crate::{check_order, Error, Result};

/// Cartesian gradients of the barycentric coordinates on the reference
/// triangle: `∇λ₁ = (−1,−1)`, `∇λ₂ = (1,0)`, `∇λ₃ = (0,1)`.
pub const BARYCENTRIC_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Endpoint vertex pairs of the reference edges, in canonical order; edge
/// `e` is opposite vertex `e`.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// Classification tag carried by each local basis function.
///
/// Vertex and edge indices are 0-based; `deriv_index` 0 tags the function
/// dual to the reference x-derivative, 1 the y-derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisRole {
    /// Pressure function with value 1 at vertex `i`, 0 at the others.
    PressureVertex(usize),
    /// Pressure function carrying the element average.
    PressureAverage,
    /// Zero-mean pressure function for the non-vertex index `α`.
    PressureInterior(MultiIndex),
    /// Velocity function value-dual at vertex `i`.
    VelC0Vertex(usize),
    /// Velocity function derivative-dual at vertex `i`, direction `d`.
    VelC1Vertex(usize, usize),
    /// Velocity function on edge `e` with modulation degree `l`.
    VelEdge(usize, usize),
    /// Velocity bubble function with Bernstein index `l` (enumeration order
    /// of the degree `k−3` indices).
    VelInterior(usize),
}

/// Number of local pressure basis functions at order `k`.
pub fn pressure_basis_count(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Number of local scalar velocity basis functions at order `k`.
pub fn velocity_basis_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Role tags of the pressure family in enumeration order.
pub fn pressure_roles(k: usize) -> Vec<BasisRole> {
    let m = (k - 1) as u32;
    let mut roles = vec![
        BasisRole::PressureVertex(0),
        BasisRole::PressureVertex(1),
        BasisRole::PressureVertex(2),
        BasisRole::PressureAverage,
    ];
    let interior = interior_multi_indices(m);
    // interior[0] is the reference index β; it is not a basis member.
    roles.extend(interior[1..].iter().map(|&a| BasisRole::PressureInterior(a)));
    roles
}

/// Role tags of the velocity family in enumeration order.
pub fn velocity_roles(k: usize) -> Vec<BasisRole> {
    let mut roles = Vec::with_capacity(velocity_basis_count(k));
    for i in 0..3 {
        roles.push(BasisRole::VelC0Vertex(i));
    }
    for i in 0..3 {
        for d in 0..2 {
            roles.push(BasisRole::VelC1Vertex(i, d));
        }
    }
    for e in 0..3 {
        for l in 0..k - 3 {
            roles.push(BasisRole::VelEdge(e, l));
        }
    }
    for l in 0..(k - 1) * (k - 2) / 2 {
        roles.push(BasisRole::VelInterior(l));
    }
    roles
}

/// Values and Cartesian gradients of the full pressure family at one point,
/// in enumeration order.
pub fn eval_pressure_basis(k: usize, p: BarycentricPoint) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    check_order(k)?;
    let m = (k - 1) as u32;
    let beta = MultiIndex::new(0, 1, m - 1);
    let b_beta = bernstein_eval(m, beta, p)?;
    let g_beta = bernstein_grad(m, beta, p)?;
    let n = pressure_basis_count(k);
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);

    // Vertex functions ψ̂_i = B_{m e_i} − B_β.
    let vertex_indices = [
        MultiIndex::new(m, 0, 0),
        MultiIndex::new(0, m, 0),
        MultiIndex::new(0, 0, m),
    ];
    let mut vertex_value_sum = 0.0;
    let mut vertex_grad_sum = [0.0, 0.0];
    for &a in &vertex_indices {
        let v = bernstein_eval(m, a, p)? - b_beta;
        let g = bernstein_grad(m, a, p)?;
        let g = [g[0] - g_beta[0], g[1] - g_beta[1]];
        vertex_value_sum += v;
        vertex_grad_sum[0] += g[0];
        vertex_grad_sum[1] += g[1];
        values.push(v);
        grads.push(g);
    }

    // Average function ψ̂_T̂ = 1 − Σ ψ̂_i.
    values.push(1.0 - vertex_value_sum);
    grads.push([-vertex_grad_sum[0], -vertex_grad_sum[1]]);

    // Interior functions ψ̂_α = B_α − B_β for non-vertex α ≠ β.
    for &a in &interior_multi_indices(m)[1..] {
        values.push(bernstein_eval(m, a, p)? - b_beta);
        let g = bernstein_grad(m, a, p)?;
        grads.push([g[0] - g_beta[0], g[1] - g_beta[1]]);
    }
    Ok((values, grads))
}

/// Value and gradient of the vector polynomial `J_i` at a point: returns
/// `([J₁, J₂], [∇J₁, ∇J₂])` for the two components.
///
/// `J_i = (λ_i² / c) [λ_j P(λ_j − λ_i); λ_l P(λ_l − λ_i)]` with `(i, j, l)`
/// a cyclic rotation of `(0, 1, 2)`, `P = P^(3,3)_{k−3}`, and
/// `c = P^(3,3)_{k−3}(−1)`.
fn eval_j(k: usize, i: usize, p: BarycentricPoint) -> ([f64; 2], [[f64; 2]; 2]) {
    let deg = k - 3;
    let c = jacobi33_endpoint_minus_one(deg);
    let lam = p.coords();
    let mut vals = [0.0; 2];
    let mut grads = [[0.0; 2]; 2];
    for (comp, m) in [(i + 1) % 3, (i + 2) % 3].into_iter().enumerate() {
        let t = lam[m] - lam[i];
        let pv = jacobi33_eval(deg, t);
        let pd = jacobi33_deriv(deg, t);
        let li = lam[i];
        let lm = lam[m];
        vals[comp] = li * li * lm * pv / c;
        // ∂/∂λ_i and ∂/∂λ_m of λ_i² λ_m P(λ_m − λ_i), other partials zero.
        let di = (2.0 * li * lm * pv - li * li * lm * pd) / c;
        let dm = (li * li * pv + li * li * lm * pd) / c;
        for x in 0..2 {
            grads[comp][x] =
                di * BARYCENTRIC_GRADS[i][x] + dm * BARYCENTRIC_GRADS[m][x];
        }
    }
    (vals, grads)
}

/// Per-vertex mixing matrices turning `J_i` into the derivative-dual pair
/// `(φ̂_i^{(1,0)}, φ̂_i^{(0,1)})`.
const C1_MIX: [[[f64; 2]; 2]; 3] = [
    [[1.0, 0.0], [0.0, 1.0]],
    [[-1.0, -1.0], [1.0, 0.0]],
    [[0.0, 1.0], [-1.0, -1.0]],
];

/// Values and Cartesian gradients of the full scalar velocity family at one
/// point, in enumeration order.
pub fn eval_velocity_basis(k: usize, p: BarycentricPoint) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    check_order(k)?;
    let lam = p.coords();
    let n = velocity_basis_count(k);
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);

    // C⁰ vertex functions λ_i²(3 − 2λ_i).
    for i in 0..3 {
        let li = lam[i];
        values.push(li * li * (3.0 - 2.0 * li));
        let d = 6.0 * li * (1.0 - li);
        grads.push([d * BARYCENTRIC_GRADS[i][0], d * BARYCENTRIC_GRADS[i][1]]);
    }

    // C¹ vertex pairs from the mixed J_i components.
    for i in 0..3 {
        let (jv, jg) = eval_j(k, i, p);
        for d in 0..2 {
            let m = C1_MIX[i][d];
            values.push(m[0] * jv[0] + m[1] * jv[1]);
            grads.push([
                m[0] * jg[0][0] + m[1] * jg[1][0],
                m[0] * jg[0][1] + m[1] * jg[1][1],
            ]);
        }
    }

    // Edge functions λ_i² λ_j² r_l(λ_j − λ_i), Legendre r_l.
    for e in 0..3 {
        let [i, j] = EDGE_VERTICES[e];
        let li = lam[i];
        let lj = lam[j];
        let t = lj - li;
        let base = li * li * lj * lj;
        for l in 0..k - 3 {
            let r = legendre_eval(l, t);
            let rd = legendre_deriv(l, t);
            values.push(base * r);
            let di = 2.0 * li * lj * lj * r - base * rd;
            let dj = 2.0 * li * li * lj * r + base * rd;
            grads.push([
                di * BARYCENTRIC_GRADS[i][0] + dj * BARYCENTRIC_GRADS[j][0],
                di * BARYCENTRIC_GRADS[i][1] + dj * BARYCENTRIC_GRADS[j][1],
            ]);
        }
    }

    // Interior bubbles λ₁λ₂λ₃ s_l with Bernstein s_l of degree k − 3.
    let bubble = lam[0] * lam[1] * lam[2];
    let grad_bubble = [
        lam[1] * lam[2] * BARYCENTRIC_GRADS[0][0]
            + lam[0] * lam[2] * BARYCENTRIC_GRADS[1][0]
            + lam[0] * lam[1] * BARYCENTRIC_GRADS[2][0],
        lam[1] * lam[2] * BARYCENTRIC_GRADS[0][1]
            + lam[0] * lam[2] * BARYCENTRIC_GRADS[1][1]
            + lam[0] * lam[1] * BARYCENTRIC_GRADS[2][1],
    ];
    let sdeg = (k - 3) as u32;
    for a in multi_indices(sdeg) {
        let s = bernstein_eval(sdeg, a, p)?;
        let sg = bernstein_grad(sdeg, a, p)?;
        values.push(bubble * s);
        grads.push([
            grad_bubble[0] * s + bubble * sg[0],
            grad_bubble[1] * s + bubble * sg[1],
        ]);
    }

    Ok((values, grads))
}

/// The barycentric point at parameter `t ∈ [−1, 1]` along reference edge
/// `e`, with `t = −1` at the first canonical endpoint.
pub fn edge_point(e: usize, t: f64) -> BarycentricPoint {
    let [i, j] = EDGE_VERTICES[e];
    let mut lam = [0.0; 3];
    lam[i] = 0.5 * (1.0 - t);
    lam[j] = 0.5 * (1.0 + t);
    BarycentricPoint::new(lam[0], lam[1], lam[2])
}

/// Values of every scalar velocity basis function restricted to reference
/// edge `e`, at the given parameters `t ∈ [−1, 1]`: `out[basis][point]`.
pub fn velocity_trace_on_edge(k: usize, e: usize, t: &[f64]) -> Result<Vec<Vec<f64>>> {
    if e >= 3 {
        return Err(Error::InvalidInput(format!("edge index {e} out of range 0..3")));
    }
    let n = velocity_basis_count(k);
    let mut out = vec![vec![0.0; t.len()]; n];
    for (pi, &tv) in t.iter().enumerate() {
        let (vals, _) = eval_velocity_basis(k, edge_point(e, tv))?;
        for (b, v) in vals.into_iter().enumerate() {
            out[b][pi] = v;
        }
    }
    Ok(out)
}

/// One family of basis functions tabulated at the points of a quadrature
/// rule.
#[derive(Clone, Debug)]
pub struct TabulatedBasis {
    /// Role tags in enumeration order.
    pub roles: Vec<BasisRole>,
    /// `values[basis][point]`.
    pub values: Vec<Vec<f64>>,
    /// `grads[basis][point] = [∂x, ∂y]` on the reference triangle.
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl TabulatedBasis {
    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.roles.len()
    }

    /// True if the table is empty.
    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

/// Velocity traces on one reference edge at 1-D Gauss points.
#[derive(Clone, Debug)]
pub struct EdgeTraceTable {
    /// Edge index (0-based; edge `e` is opposite vertex `e`).
    pub edge: usize,
    /// 1-D Gauss nodes in `[−1, 1]` along the canonical edge direction.
    pub nodes: Vec<f64>,
    /// Matching Gauss weights (sum 2).
    pub weights: Vec<f64>,
    /// `values[basis][point]` for every scalar velocity basis function.
    pub values: Vec<Vec<f64>>,
    /// Marks functions whose trace on this edge vanishes identically.
    pub zero_trace: Vec<bool>,
}

/// The complete local basis tables at one polynomial order.
#[derive(Clone, Debug)]
pub struct ReferenceBasisTable {
    /// Polynomial order of the velocity space (pressure runs at `k − 1`).
    pub k: usize,
    /// Quadrature rule on the reference triangle, exact to degree `2k + 2`.
    pub rule: QuadratureRule,
    /// Pressure family tabulated at the rule points.
    pub pressure: TabulatedBasis,
    /// Scalar velocity family tabulated at the rule points.
    pub velocity: TabulatedBasis,
    /// Per-edge velocity trace tables at `k + 1` Gauss points.
    pub edge_traces: Vec<EdgeTraceTable>,
}

/// Builds the pressure family tabulated at the points of `rule`.
pub fn build_pressure_basis(k: usize, rule: &QuadratureRule) -> Result<TabulatedBasis> {
    check_order(k)?;
    let roles = pressure_roles(k);
    let n = roles.len();
    let np = rule.len();
    let mut values = vec![vec![0.0; np]; n];
    let mut grads = vec![vec![[0.0; 2]; np]; n];
    for (pi, &p) in rule.points.iter().enumerate() {
        let (v, g) = eval_pressure_basis(k, p)?;
        for b in 0..n {
            values[b][pi] = v[b];
            grads[b][pi] = g[b];
        }
    }
    Ok(TabulatedBasis { roles, values, grads })
}

/// Builds the scalar velocity family tabulated at the points of `rule`.
pub fn build_velocity_basis(k: usize, rule: &QuadratureRule) -> Result<TabulatedBasis> {
    check_order(k)?;
    let roles = velocity_roles(k);
    let n = roles.len();
    let np = rule.len();
    let mut values = vec![vec![0.0; np]; n];
    let mut grads = vec![vec![[0.0; 2]; np]; n];
    for (pi, &p) in rule.points.iter().enumerate() {
        let (v, g) = eval_velocity_basis(k, p)?;
        for b in 0..n {
            values[b][pi] = v[b];
            grads[b][pi] = g[b];
        }
    }
    Ok(TabulatedBasis { roles, values, grads })
}

impl ReferenceBasisTable {
    /// Builds the full table at order `k` with a quadrature rule exact to
    /// degree `2k + 2`.
    pub fn build(k: usize) -> Result<Self> {
        check_order(k)?;
        let rule = triangle_quadrature(2 * k + 2)?;
        let pressure = build_pressure_basis(k, &rule)?;
        let velocity = build_velocity_basis(k, &rule)?;
        let (nodes, weights) = gauss_legendre(k + 1);
        let mut edge_traces = Vec::with_capacity(3);
        for e in 0..3 {
            let values = velocity_trace_on_edge(k, e, &nodes)?;
            let zero_trace = values
                .iter()
                .map(|row| row.iter().all(|v| v.abs() <= 1e-12))
                .collect();
            edge_traces.push(EdgeTraceTable {
                edge: e,
                nodes: nodes.clone(),
                weights: weights.clone(),
                values,
                zero_trace,
            });
        }
        Ok(Self { k, rule, pressure, velocity, edge_traces })
    }

    /// The velocity trace table of reference edge `e` (0-based).
    pub fn edge_trace(&self, e: usize) -> Result<&EdgeTraceTable> {
        self.edge_traces
            .get(e)
            .ok_or_else(|| Error::InvalidInput(format!("edge index {e} out of range 0..3")))
    }
}
