// SPDX-License-Identifier: MIT OR Apache-2.0

//! Preconditioned MINRES for the symmetric indefinite interface system.
//!
//! The solver runs the standard three-term Lanczos recurrence in the inner
//! product induced by the (symmetric positive definite) block
//! preconditioner `P`, updating the iterate through Givens rotations of the
//! tridiagonal matrix.  The tracked quantity is the relative residual in
//! the `P⁻¹` norm, `√(rᵀP⁻¹r / r₀ᵀP⁻¹r₀)`; iteration stops once it falls
//! to the requested tolerance.  By the MINRES minimization property the
//! history is nonincreasing.
//!
//! The interface operator has the one-dimensional kernel spanned by the
//! constant pressure.  A consistent right-hand side keeps the Krylov space
//! inside the operator's range, so the recurrence never notices the kernel;
//! the returned pressure is post-normalized to zero mean over the domain so
//! that callers always receive the same representative.  As a safeguard
//! against inconsistent data (for which the recurrence residual can reach
//! the tolerance while the true residual stalls), the solver recomputes the
//! true relative residual once at the end and withdraws the convergence
//! claim if it exceeds `10 × tol`.

use crate::precond::BlockPreconditioner;
use crate::{Error, Result};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Outcome of one MINRES run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Number of iterations performed.
    pub iterations: usize,
    /// Relative `P⁻¹`-norm residuals; entry 0 is exactly 1, entry `j` is
    /// the residual after `j` iterations.
    pub residual_history: Vec<f64>,
    /// Whether the tolerance was met (and confirmed by the recomputed true
    /// residual) before the iteration cap.
    pub converged: bool,
    /// Wall-clock time of the solve in seconds.
    pub wall_time: f64,
}

/// Tuning knobs for [`solve`].
#[derive(Clone, Copy, Debug)]
pub struct MinresOptions {
    /// Relative residual tolerance in the `P⁻¹` norm.
    pub tol: f64,
    /// Iteration cap; reaching it reports `converged = false` rather than
    /// failing.
    pub maxit: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 500,
        }
    }
}

/// Subtracts the domain-mean pressure from the pressure block of an
/// interface vector, pinning the constant-pressure kernel direction.
fn remove_pressure_mean(x: &mut DVector<f64>, p: &BlockPreconditioner) {
    let weights = p.pressure_integral_weights();
    let area: f64 = weights.sum();
    let ne = p.n_exterior_velocity;
    let mut integral = 0.0;
    for i in 0..p.n_exterior_pressure {
        integral += weights[i] * x[ne + i];
    }
    let mean = integral / area;
    for i in 0..p.n_exterior_pressure {
        x[ne + i] -= mean;
    }
}

/// Adds a perturbation with entries uniform in `(−1, 1)` to a vector —
/// the experiment protocol's "truth plus noise" starting iterate.  The
/// stream is seeded, so identical seeds give identical starts.
pub fn perturbed_start(truth: &DVector<f64>, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(truth.len(), |i, _| truth[i] + rng.gen_range(-1.0..1.0))
}

/// Runs preconditioned MINRES on `S x = rhs` where `apply_s` computes the
/// action of the symmetric operator `S` and `p` supplies the positive
/// definite block preconditioner.
///
/// `x0` is the starting iterate (zero when omitted).  The returned solution
/// has zero-mean pressure.  Reaching the iteration cap is reported through
/// `converged = false`; hard errors are reserved for invalid inputs and a
/// preconditioner that turns out not to be positive definite.
pub fn solve<F>(
    apply_s: F,
    p: &BlockPreconditioner,
    rhs: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    opts: &MinresOptions,
) -> Result<(DVector<f64>, SolveReport)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = p.n_exterior_velocity + p.n_exterior_pressure;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            what: "right-hand side length".into(),
            expected: n,
            got: rhs.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "starting iterate length".into(),
                expected: n,
                got: x0.len(),
            });
        }
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::Config(format!(
            "MINRES tolerance must be positive and finite, got {}",
            opts.tol
        )));
    }
    if opts.maxit == 0 {
        return Err(Error::Config("MINRES iteration cap must be at least 1".into()));
    }

    let clock = Instant::now();
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    // Remove any constant-pressure component from the start vector up front:
    // it lies in the operator's kernel, so leaving it in would let a start
    // shift drift through the iteration via roundoff instead of cancelling.
    remove_pressure_mean(&mut x, p);

    let p_norm_sq = |v: &DVector<f64>, z: &DVector<f64>| -> Result<f64> {
        let s = z.dot(v);
        // The pairing zᵀv = vᵀP⁻¹v is nonnegative for an SPD preconditioner;
        // tolerate roundoff-scale negativity near exhaustion.
        if s < -1e-10 * z.norm() * v.norm() {
            return Err(Error::NumericalBreakdown(format!(
                "the preconditioner is not positive definite: vᵀP⁻¹v = {s:e}"
            )));
        }
        Ok(s.max(0.0))
    };

    let mut v1 = rhs - apply_s(&x);
    let mut z1 = p.apply_interface(&v1);
    let gamma_init = p_norm_sq(&v1, &z1)?.sqrt();
    let mut history = vec![1.0];

    let finish = |x: DVector<f64>,
                  history: Vec<f64>,
                  converged: bool,
                  clock: Instant|
     -> (DVector<f64>, SolveReport) {
        // Pin the kernel: subtract the mean pressure so every run returns
        // the same representative.
        let mut x = x;
        remove_pressure_mean(&mut x, p);
        let iterations = history.len() - 1;
        (
            x,
            SolveReport {
                iterations,
                residual_history: history,
                converged,
                wall_time: clock.elapsed().as_secs_f64(),
            },
        )
    };

    if gamma_init == 0.0 {
        return Ok(finish(x, history, true, clock));
    }

    let mut v0 = DVector::zeros(n);
    let mut w0 = DVector::zeros(n);
    let mut w1 = DVector::zeros(n);
    let (mut gamma0, mut gamma1) = (1.0f64, gamma_init);
    let (mut c0, mut c1, mut s0, mut s1) = (1.0f64, 1.0f64, 0.0f64, 0.0f64);
    let mut eta = gamma1;
    let mut converged = false;

    for _ in 0..opts.maxit {
        z1 /= gamma1;
        let az = apply_s(&z1);
        let delta = az.dot(&z1);
        let v2 = az - (delta / gamma1) * &v1 - (gamma1 / gamma0) * &v0;
        let z2 = p.apply_interface(&v2);
        let gamma2 = p_norm_sq(&v2, &z2)?.sqrt();

        let alpha0 = c1 * delta - c0 * s1 * gamma1;
        let alpha1 = alpha0.hypot(gamma2);
        let alpha2 = s1 * delta + c0 * c1 * gamma1;
        let alpha3 = s0 * gamma1;
        if alpha1 == 0.0 {
            // The tridiagonal column vanished entirely; the residual can no
            // longer change, so stop with whatever has been achieved.
            break;
        }
        c0 = c1;
        c1 = alpha0 / alpha1;
        s0 = s1;
        s1 = gamma2 / alpha1;
        let w2 = (&z1 - alpha3 * &w0 - alpha2 * &w1) / alpha1;
        x += (c1 * eta) * &w2;
        eta = -s1 * eta;

        let rel = eta.abs() / gamma_init;
        history.push(rel);
        if rel <= opts.tol {
            converged = true;
            break;
        }
        if gamma2 == 0.0 {
            // Krylov space exhausted without meeting the tolerance.
            break;
        }
        v0 = v1;
        v1 = v2;
        z1 = z2;
        gamma0 = gamma1;
        gamma1 = gamma2;
        w0 = w1;
        w1 = w2;
    }

    // Guard against a recurrence that drifted from the true residual
    // (inconsistent data or severe cancellation): confirm the claim.
    if converged {
        let r = rhs - apply_s(&x);
        let z = p.apply_interface(&r);
        let true_rel = p_norm_sq(&r, &z)?.sqrt() / gamma_init;
        if true_rel > 10.0 * opts.tol {
            converged = false;
        }
    }
    Ok(finish(x, history, converged, clock))
}
