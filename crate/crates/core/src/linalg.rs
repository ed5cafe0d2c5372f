// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear-algebra kernels shared across the solver.
//!
//! Three building blocks live here:
//!
//! * [`SymmetricIndefinite`] — an LDLᵀ factorization with Bunch–Kaufman
//!   partial pivoting (1×1 and 2×2 pivot blocks). The condensed per-element
//!   saddle blocks `[[A, Bᵀ], [B, 0]]` are symmetric but indefinite, so
//!   neither Cholesky nor unpivoted LDLᵀ applies; Bunch–Kaufman keeps the
//!   symmetric flop count and is backward stable.
//! * [`SpdFactor`] — a thin Cholesky wrapper with a uniform error type, used
//!   for Gram matrices and preconditioner blocks that are positive definite
//!   by construction.
//! * [`generalized_symmetric_eigenvalues`] — the symmetric generalized
//!   eigenproblem `A x = λ M x` with `M` positive definite, reduced to a
//!   standard symmetric problem through the Cholesky factor of `M`.
//!
//! Everything is dense: the matrices that reach these routines are either
//! per-element blocks or interface operators at diagnostic scale.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Worst absolute asymmetry `max |a_ij − a_ji|` of a square matrix.
pub fn symmetry_error(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetry check needs a square matrix");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Largest absolute entry of a matrix (0 for an empty matrix).
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// A pivot step recorded during Bunch–Kaufman elimination.
///
/// `k` is the leading column of the pivot block, `size` is 1 or 2, and `kp`
/// is the row/column that was interchanged with row `k + size − 1` of the
/// trailing submatrix before elimination (equal to it when no interchange
/// happened).
#[derive(Clone, Copy, Debug)]
struct PivotStep {
    k: usize,
    size: u8,
    kp: usize,
}

/// LDLᵀ factorization of a symmetric (possibly indefinite) matrix with
/// Bunch–Kaufman partial pivoting.
///
/// The factorization satisfies `PᵀAP = LDLᵀ` with unit lower-triangular `L`
/// and block-diagonal `D` (1×1 and 2×2 blocks); `solve` applies the inverse.
#[derive(Clone, Debug)]
pub struct SymmetricIndefinite {
    /// Lower triangle: `L` strictly below each pivot block, `D` inside it.
    f: DMatrix<f64>,
    steps: Vec<PivotStep>,
}

impl SymmetricIndefinite {
    /// Factors a symmetric matrix. Fails with a numerical-breakdown error if
    /// an exactly singular pivot is met.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "factorization needs a square matrix");
        let mut f = a.clone_owned();
        let mut steps = Vec::with_capacity(n);
        // Threshold that bounds element growth; the classical choice
        // minimizes the worst-case growth per double step.
        let alpha = (1.0 + 17.0f64.sqrt()) / 8.0;

        let mut k = 0;
        while k < n {
            let absakk = f[(k, k)].abs();
            // Largest below-diagonal entry of column k.
            let mut imax = k;
            let mut colmax = 0.0f64;
            for i in k + 1..n {
                let v = f[(i, k)].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) == 0.0 {
                return Err(Error::NumericalBreakdown(format!(
                    "symmetric factorization met an exactly zero pivot at column {k}"
                )));
            }

            let mut size = 1u8;
            let kp = if absakk >= alpha * colmax {
                k
            } else {
                // Largest off-diagonal magnitude in row/column `imax` of the
                // trailing submatrix (lower storage: row part then column part).
                let mut rowmax = 0.0f64;
                for j in k..imax {
                    rowmax = rowmax.max(f[(imax, j)].abs());
                }
                for i in imax + 1..n {
                    rowmax = rowmax.max(f[(i, imax)].abs());
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    k
                } else if f[(imax, imax)].abs() >= alpha * rowmax {
                    imax
                } else {
                    size = 2;
                    imax
                }
            };

            // Interchange row/column `kk` with `kp` in the trailing submatrix.
            let kk = k + usize::from(size) - 1;
            if kp != kk {
                for i in kp + 1..n {
                    f.swap((i, kk), (i, kp));
                }
                for j in kk + 1..kp {
                    f.swap((j, kk), (kp, j));
                }
                f.swap((kk, kk), (kp, kp));
                if size == 2 {
                    f.swap((kk, k), (kp, k));
                }
            }

            if size == 1 {
                // Rank-1 update of the trailing submatrix, then store L.
                let d = f[(k, k)];
                if d == 0.0 {
                    return Err(Error::NumericalBreakdown(format!(
                        "symmetric factorization met an exactly zero 1×1 pivot at column {k}"
                    )));
                }
                for j in k + 1..n {
                    let w = f[(j, k)] / d;
                    for i in j..n {
                        let delta = f[(i, k)] * w;
                        f[(i, j)] -= delta;
                    }
                }
                for i in k + 1..n {
                    f[(i, k)] /= d;
                }
            } else {
                // Rank-2 update with the 2×2 pivot block
                // [[f(k,k), f(k+1,k)], [f(k+1,k), f(k+1,k+1)]].
                let d21 = f[(k + 1, k)];
                if d21 == 0.0 {
                    return Err(Error::NumericalBreakdown(format!(
                        "symmetric factorization met a singular 2×2 pivot at column {k}"
                    )));
                }
                let d11 = f[(k + 1, k + 1)] / d21;
                let d22 = f[(k, k)] / d21;
                let t = 1.0 / (d11 * d22 - 1.0);
                let d21inv = t / d21;
                for j in k + 2..n {
                    let wk = d21inv * (d11 * f[(j, k)] - f[(j, k + 1)]);
                    let wk1 = d21inv * (d22 * f[(j, k + 1)] - f[(j, k)]);
                    for i in j..n {
                        let delta = f[(i, k)] * wk + f[(i, k + 1)] * wk1;
                        f[(i, j)] -= delta;
                    }
                    f[(j, k)] = wk;
                    f[(j, k + 1)] = wk1;
                }
            }

            steps.push(PivotStep { k, size, kp });
            k += usize::from(size);
        }

        Ok(Self { f, steps })
    }

    /// Matrix dimension.
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.n();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let f = &self.f;

        // Forward sweep: interchange, eliminate with L, solve the D block.
        for &PivotStep { k, size, kp } in &self.steps {
            let kk = k + usize::from(size) - 1;
            if kp != kk {
                b.swap_rows(kk, kp);
            }
            if size == 1 {
                let bk = b[k];
                for i in k + 1..n {
                    b[i] -= f[(i, k)] * bk;
                }
                b[k] /= f[(k, k)];
            } else {
                let bk = b[k];
                let bk1 = b[k + 1];
                for i in k + 2..n {
                    b[i] -= f[(i, k)] * bk + f[(i, k + 1)] * bk1;
                }
                let d11 = f[(k, k)];
                let d21 = f[(k + 1, k)];
                let d22 = f[(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                b[k] = (d22 * bk - d21 * bk1) / det;
                b[k + 1] = (d11 * bk1 - d21 * bk) / det;
            }
        }

        // Backward sweep: eliminate with Lᵀ, undo the interchange.
        for &PivotStep { k, size, kp } in self.steps.iter().rev() {
            if size == 1 {
                let mut s = 0.0;
                for i in k + 1..n {
                    s += f[(i, k)] * b[i];
                }
                b[k] -= s;
            } else {
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for i in k + 2..n {
                    s0 += f[(i, k)] * b[i];
                    s1 += f[(i, k + 1)] * b[i];
                }
                b[k] -= s0;
                b[k + 1] -= s1;
            }
            let kk = k + usize::from(size) - 1;
            if kp != kk {
                b.swap_rows(kk, kp);
            }
        }
    }

    /// Solves `A x = b`, returning a fresh vector.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone_owned();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.n(), "right-hand side row count mismatch");
        let mut x = b.clone_owned();
        for j in 0..x.ncols() {
            let mut col = DVector::from_column_slice(x.column(j).as_slice());
            self.solve_in_place(&mut col);
            x.set_column(j, &col);
        }
        x
    }
}

/// Cholesky factorization of a symmetric positive definite matrix with a
/// uniform error type.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors an SPD matrix; fails with a numerical-breakdown error when
    /// the matrix is not numerically positive definite.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(a.clone_owned()).ok_or_else(|| {
            Error::NumericalBreakdown(
                "Cholesky factorization failed: matrix is not positive definite".into(),
            )
        })?;
        Ok(Self { chol })
    }

    /// Matrix dimension.
    pub fn n(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Solves `A X = B`.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        self.chol.solve_mut(b);
    }

    /// The lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Eigenvalues of the symmetric pencil `A x = λ M x` with `M` positive
/// definite, in ascending order.
///
/// The pencil is reduced to the standard symmetric problem
/// `L⁻¹ A L⁻ᵀ y = λ y` via the Cholesky factor `M = L Lᵀ`; the reduced
/// matrix is re-symmetrized before the eigensolve to shed roundoff.
pub fn generalized_symmetric_eigenvalues(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "left operand must be square");
    assert_eq!((m.nrows(), m.ncols()), (n, n), "operand dimensions must agree");
    let l = SpdFactor::factor(m)?.l();
    // C = L⁻¹ A L⁻ᵀ by two triangular solves.
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::NumericalBreakdown("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::NumericalBreakdown("singular Cholesky factor".into()))?;
    let sym = 0.5 * (&c + c.transpose());
    Ok(symmetric_eigenvalues(&sym))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let eig = a.clone_owned().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}
