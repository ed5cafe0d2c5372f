// SPDX-License-Identifier: MIT OR Apache-2.0

//! Orthogonal polynomials, Bernstein polynomials, and triangle quadrature.
//!
//! Everything downstream — basis tables, element matrices, boundary
//! interpolation — reduces to the primitives in this module:
//!
//! * Jacobi polynomials `P_n^(α,β)` evaluated by the three-term recurrence in
//!   the degree (uniformly accurate in `n`), including the Legendre case
//!   `α = β = 0` used for edge bases and 1-D quadrature;
//! * Bernstein polynomials `B^k_α` on the reference triangle together with
//!   their Cartesian gradients;
//! * Gauss–Legendre and Gauss–Lobatto rules on `[-1, 1]`;
//! * quadrature on the reference triangle of prescribed exactness degree,
//!   built by collapsing a tensor-product Gauss rule onto the triangle.
//!
//! The reference triangle has vertices `â₁ = (0,0)`, `â₂ = (1,0)`,
//! `â₃ = (0,1)`; barycentric coordinates satisfy `λ₁ = 1 − x − y`, `λ₂ = x`,
//! `λ₃ = y`.

use crate::{Error, Result};

/// Largest exactness degree [`triangle_quadrature`] will build.
///
/// The discretization needs degree `2k + 2 ≤ 34`; the cap leaves headroom for
/// oracle-style cross checks at elevated degree.
pub const MAX_QUADRATURE_DEGREE: usize = 80;

/// A point of the reference triangle in barycentric coordinates.
///
/// Invariants: the coordinates sum to 1 (within 1e-14) and each is
/// nonnegative (within −1e-14).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycentricPoint {
    /// Coordinate attached to vertex `â₁ = (0,0)`.
    pub l1: f64,
    /// Coordinate attached to vertex `â₂ = (1,0)`.
    pub l2: f64,
    /// Coordinate attached to vertex `â₃ = (0,1)`.
    pub l3: f64,
}

impl BarycentricPoint {
    /// Creates a point from its three barycentric coordinates.
    ///
    /// Debug builds assert the partition-of-unity and nonnegativity
    /// invariants.
    pub fn new(l1: f64, l2: f64, l3: f64) -> Self {
        debug_assert!((l1 + l2 + l3 - 1.0).abs() <= 1e-14, "coordinates must sum to 1");
        debug_assert!(
            l1 >= -1e-14 && l2 >= -1e-14 && l3 >= -1e-14,
            "coordinates must be nonnegative"
        );
        Self { l1, l2, l3 }
    }

    /// Creates a point from Cartesian coordinates on the reference triangle.
    pub fn from_xy(x: f64, y: f64) -> Self {
        Self::new(1.0 - x - y, x, y)
    }

    /// Cartesian coordinates `(x, y) = (λ₂, λ₃)` on the reference triangle.
    pub fn xy(self) -> [f64; 2] {
        [self.l2, self.l3]
    }

    /// The three coordinates as an array `[λ₁, λ₂, λ₃]`.
    pub fn coords(self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }

    /// The `i`-th reference vertex (0-based): `â₁`, `â₂`, or `â₃`.
    pub fn vertex(i: usize) -> Self {
        match i {
            0 => Self::new(1.0, 0.0, 0.0),
            1 => Self::new(0.0, 1.0, 0.0),
            2 => Self::new(0.0, 0.0, 1.0),
            _ => panic!("vertex index {i} out of range 0..3"),
        }
    }
}

/// A Bernstein multi-index `α = (α₁, α₂, α₃)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    /// First component.
    pub a1: u32,
    /// Second component.
    pub a2: u32,
    /// Third component.
    pub a3: u32,
}

impl MultiIndex {
    /// Creates a multi-index.
    pub fn new(a1: u32, a2: u32, a3: u32) -> Self {
        Self { a1, a2, a3 }
    }

    /// Total degree `|α| = α₁ + α₂ + α₃`.
    pub fn degree(self) -> u32 {
        self.a1 + self.a2 + self.a3
    }

    /// Components as an array.
    pub fn components(self) -> [u32; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// True if some component equals the full degree `k`, i.e. the index
    /// sits at a vertex of the triangle.
    pub fn is_vertex(self, k: u32) -> bool {
        self.a1 == k || self.a2 == k || self.a3 == k
    }
}

/// All multi-indices of total degree `k`, in ascending lexicographic order
/// of `(α₁, α₂, α₃)`.
pub fn multi_indices(k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(((k + 1) * (k + 2) / 2) as usize);
    for a1 in 0..=k {
        for a2 in 0..=(k - a1) {
            out.push(MultiIndex::new(a1, a2, k - a1 - a2));
        }
    }
    out
}

/// Non-vertex multi-indices of degree `k` (every component `< k`), ascending
/// lexicographic. The first entry, `(0, 1, k−1)`, is the deterministic
/// reference index used by the pressure basis.
pub fn interior_multi_indices(k: u32) -> Vec<MultiIndex> {
    multi_indices(k)
        .into_iter()
        .filter(|a| !a.is_vertex(k))
        .collect()
}

/// A quadrature rule on the reference triangle.
///
/// Weights are normalized so they sum to the reference area `1/2`; the rule
/// integrates every polynomial of total degree `≤ exact_degree` exactly (to
/// roundoff).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Quadrature points.
    pub points: Vec<BarycentricPoint>,
    /// Matching weights (area-normalized).
    pub weights: Vec<f64>,
    /// Largest total polynomial degree integrated exactly.
    pub exact_degree: usize,
}

impl QuadratureRule {
    /// Number of quadrature points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True if the rule has no points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates a function over the reference triangle.
    pub fn integrate(&self, f: impl Fn(BarycentricPoint) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Builds a rule on the reference triangle exact to the requested total
/// degree.
///
/// A tensor-product Gauss–Legendre rule on the unit square is collapsed onto
/// the triangle by `λ₂ = u(1−v)`, `λ₃ = v`; the collapse Jacobian `(1−v)/4`
/// is folded into the weights, so the result is a plain weighted point set.
/// With `n = ⌈(d+2)/2⌉` points per direction the map keeps every integrand
/// of total degree `≤ d` inside the exactness range of both 1-D rules.
pub fn triangle_quadrature(exact_degree: usize) -> Result<QuadratureRule> {
    if exact_degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::Capability(format!(
            "quadrature exactness degree {exact_degree} exceeds supported maximum {MAX_QUADRATURE_DEGREE}"
        )));
    }
    let n = exact_degree.div_ceil(2) + 1;
    let (xs, ws) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&xi, &wu) in xs.iter().zip(&ws) {
        let u = 0.5 * (1.0 + xi);
        for (&eta, &wv) in xs.iter().zip(&ws) {
            let v = 0.5 * (1.0 + eta);
            let l2 = u * (1.0 - v);
            let l3 = v;
            points.push(BarycentricPoint::new(1.0 - l2 - l3, l2, l3));
            weights.push(wu * wv * (1.0 - v) / 4.0);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree,
    })
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`: `(nodes, weights)`.
///
/// Nodes are Newton-refined from the Chebyshev initial guess; the rule is
/// exact for polynomials of degree `≤ 2n − 1` and the weights sum to 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_eval(n, x);
            let dp = legendre_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let dp = legendre_deriv(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending node order, and exact symmetry by averaging mirror pairs.
    nodes.reverse();
    weights.reverse();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `n`-point Gauss–Lobatto node set on `[-1, 1]` (`n ≥ 2`), ascending.
///
/// Endpoints ±1 plus the `n − 2` roots of the derivative of the Legendre
/// polynomial of degree `n − 1`. Only nodes are provided; the boundary
/// interpolation solve needs no weights.
pub fn gauss_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2, "a Lobatto set needs at least the two endpoints");
    let m = n - 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[n - 1] = 1.0;
    for i in 1..m {
        // Interior initial guess: Chebyshev–Lobatto points, descending.
        let mut x = (std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let dp = legendre_deriv(m, x);
            // Legendre equation: (1 − x²) P″ = 2x P′ − m(m+1) P.
            let d2p =
                (2.0 * x * dp - (m as f64) * (m as f64 + 1.0) * legendre_eval(m, x)) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
    }
    // Exact symmetry by averaging mirror pairs.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    nodes
}

/// Evaluates the Jacobi polynomial `P_n^(α,β)` at `t` by the three-term
/// recurrence in the degree.
pub fn jacobi_eval(n: usize, alpha: u32, beta: u32, t: f64) -> f64 {
    let a = alpha as f64;
    let b = beta as f64;
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * t;
    for m in 2..=n {
        let m = m as f64;
        let c0 = 2.0 * m * (m + a + b) * (2.0 * m + a + b - 2.0);
        let c1 = (2.0 * m + a + b - 1.0)
            * ((2.0 * m + a + b) * (2.0 * m + a + b - 2.0) * t + a * a - b * b);
        let c2 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * (2.0 * m + a + b);
        let p_next = (c1 * p - c2 * p_prev) / c0;
        p_prev = p;
        p = p_next;
    }
    p
}

/// Evaluates `P_n^(3,3)` at `t`.
pub fn jacobi33_eval(n: usize, t: f64) -> f64 {
    jacobi_eval(n, 3, 3, t)
}

/// The endpoint value `P_n^(3,3)(−1) = (−1)ⁿ · C(n+3, 3)`, computed exactly.
///
/// This is the normalizer of the C¹ vertex construction on the reference
/// element.
pub fn jacobi33_endpoint_minus_one(n: usize) -> f64 {
    let n = n as i64;
    let binom = (n + 1) * (n + 2) * (n + 3) / 6;
    if n % 2 == 0 {
        binom as f64
    } else {
        -binom as f64
    }
}

/// Derivative `d/dt P_n^(3,3)(t)`, via `(n+7)/2 · P_{n−1}^(4,4)(t)`.
pub fn jacobi33_deriv(n: usize, t: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    0.5 * (n as f64 + 7.0) * jacobi_eval(n - 1, 4, 4, t)
}

/// Evaluates the Legendre polynomial `P_n` at `t`.
pub fn legendre_eval(n: usize, t: f64) -> f64 {
    jacobi_eval(n, 0, 0, t)
}

/// Derivative `d/dt P_n(t)`, via `(n+1)/2 · P_{n−1}^(1,1)(t)`.
pub fn legendre_deriv(n: usize, t: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    0.5 * (n as f64 + 1.0) * jacobi_eval(n - 1, 1, 1, t)
}

/// Multinomial coefficient `k! / (α₁! α₂! α₃!)` as a float (exact for the
/// supported degree range).
fn multinomial(k: u32, alpha: MultiIndex) -> f64 {
    debug_assert_eq!(alpha.degree(), k);
    let mut value: u128 = 1;
    // k!/(a1!(k-a1)!) * (k-a1)!/(a2!a3!) = C(k, a1) * C(k - a1, a2).
    let choose = |n: u32, r: u32| -> u128 {
        let mut c: u128 = 1;
        for i in 0..r {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        c
    };
    value *= choose(k, alpha.a1);
    value *= choose(k - alpha.a1, alpha.a2);
    value as f64
}

/// Evaluates the Bernstein polynomial `B^k_α` at a barycentric point.
///
/// Fails if `|α| ≠ k`.
pub fn bernstein_eval(k: u32, alpha: MultiIndex, p: BarycentricPoint) -> Result<f64> {
    if alpha.degree() != k {
        return Err(Error::InvalidInput(format!(
            "Bernstein index {:?} has degree {} ≠ k = {k}",
            alpha.components(),
            alpha.degree()
        )));
    }
    Ok(multinomial(k, alpha)
        * p.l1.powi(alpha.a1 as i32)
        * p.l2.powi(alpha.a2 as i32)
        * p.l3.powi(alpha.a3 as i32))
}

/// Cartesian gradient `(∂x, ∂y)` of `B^k_α` on the reference triangle.
///
/// Uses `∇λ₁ = (−1,−1)`, `∇λ₂ = (1,0)`, `∇λ₃ = (0,1)`.
pub fn bernstein_grad(k: u32, alpha: MultiIndex, p: BarycentricPoint) -> Result<[f64; 2]> {
    if alpha.degree() != k {
        return Err(Error::InvalidInput(format!(
            "Bernstein index {:?} has degree {} ≠ k = {k}",
            alpha.components(),
            alpha.degree()
        )));
    }
    let c = multinomial(k, alpha);
    let [a1, a2, a3] = alpha.components();
    let [l1, l2, l3] = p.coords();
    // d/dλ_i of the monomial, each zero when the exponent is zero.
    let dm = |ai: u32, li: f64, lj: f64, aj: u32, lk: f64, ak: u32| -> f64 {
        if ai == 0 {
            0.0
        } else {
            ai as f64 * li.powi(ai as i32 - 1) * lj.powi(aj as i32) * lk.powi(ak as i32)
        }
    };
    let d1 = dm(a1, l1, l2, a2, l3, a3);
    let d2 = dm(a2, l2, l1, a1, l3, a3);
    let d3 = dm(a3, l3, l1, a1, l2, a2);
    Ok([c * (d2 - d1), c * (d3 - d1)])
}
