//! Edge-preserving denoising by total-variation regularization.
//!
//! Minimizes `J(u) = 1/2 * sum((u - f)^2) + weight * TV(u)` where `TV`
//! is the isotropic total variation built from forward differences with
//! replicated (Neumann) boundaries. The solver is a projection descent
//! on the dual problem; each accepted step is guaranteed not to
//! increase the objective, and the step size is halved whenever a trial
//! step would.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

const INITIAL_STEP: f64 = 1.0 / 12.0;
const MIN_STEP: f64 = 1e-12;

/// The regularized objective `1/2 * sum((u - f)^2) + weight * TV(u)`.
pub fn rof_objective(u: &[f64], f: &[f64], dims: [usize; 3], weight: f64) -> f64 {
    debug_assert_eq!(u.len(), f.len());
    let fidelity: f64 = u
        .iter()
        .zip(f)
        .map(|(&a, &b)| {
            let d = a - b;
            0.5 * d * d
        })
        .sum();
    fidelity + weight * total_variation(u, dims)
}

/// Isotropic total variation with forward differences; the difference
/// across the volume boundary is zero (replication).
pub fn total_variation(u: &[f64], dims: [usize; 3]) -> f64 {
    let [nx, ny, nz] = dims;
    let mut tv = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                let here = u[i];
                let gx = if x + 1 < nx { u[i + 1] - here } else { 0.0 };
                let gy = if y + 1 < ny { u[i + nx] - here } else { 0.0 };
                let gz = if z + 1 < nz { u[i + nx * ny] - here } else { 0.0 };
                tv += (gx * gx + gy * gy + gz * gz).sqrt();
            }
        }
    }
    tv
}

/// Denoise a scalar volume; see the module docs for the objective.
///
/// Stops after `max_iterations` accepted steps or once the relative
/// objective decrease falls to `tolerance` or below.
pub fn tv_denoise(
    volume: &ScalarVolume,
    weight: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<ScalarVolume> {
    tv_denoise_with_trace(volume, weight, max_iterations, tolerance).map(|(out, _)| out)
}

/// Like [`tv_denoise`] but also returns the objective value at every
/// accepted iterate, starting with the value at the noisy input. The
/// trace is non-increasing.
pub fn tv_denoise_with_trace(
    volume: &ScalarVolume,
    weight: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<(ScalarVolume, Vec<f64>)> {
    assert!(weight > 0.0, "weight must be positive");
    assert!(max_iterations >= 1, "max_iterations must be >= 1");
    assert!(tolerance >= 0.0, "tolerance must be non-negative");
    if let Some(index) = volume.first_non_finite() {
        return Err(Error::NonFiniteInput { index });
    }

    let dims = volume.meta.dims;
    let n = volume.voxels.len();
    let f: Vec<f64> = volume.voxels.iter().map(|&v| v as f64).collect();

    // Dual field p (one component per axis) and its divergence. With
    // p = 0 the first iterate is u = f itself.
    let mut p = vec![[0.0f64; 3]; n];
    let mut div = vec![0.0f64; n];
    let mut trace = Vec::with_capacity(max_iterations + 1);
    trace.push(rof_objective(&f, &f, dims, weight));

    let mut tau = INITIAL_STEP;
    let mut trial_p = vec![[0.0f64; 3]; n];
    let mut trial_div = vec![0.0f64; n];

    'outer: for _ in 0..max_iterations {
        let current = *trace.last().expect("trace starts non-empty");
        loop {
            projection_step(&p, &div, &f, weight, tau, dims, &mut trial_p);
            divergence(&trial_p, dims, &mut trial_div);
            let trial_objective = {
                let u: Vec<f64> = f
                    .par_iter()
                    .zip(trial_div.par_iter())
                    .map(|(&fv, &dv)| fv - weight * dv)
                    .collect();
                rof_objective(&u, &f, dims, weight)
            };
            let slack = 1e-12 * current.abs().max(1.0);
            if trial_objective <= current + slack {
                std::mem::swap(&mut p, &mut trial_p);
                std::mem::swap(&mut div, &mut trial_div);
                trace.push(trial_objective.min(current));
                let drop = current - trial_objective;
                if drop <= tolerance * current.abs().max(f64::MIN_POSITIVE) {
                    break 'outer;
                }
                break;
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                break 'outer;
            }
        }
    }

    let out: Vec<f32> = f
        .par_iter()
        .zip(div.par_iter())
        .map(|(&fv, &dv)| (fv - weight * dv) as f32)
        .collect();
    let denoised = ScalarVolume::from_voxels(volume.meta, out);
    Ok((denoised, trace))
}

/// One dual step: `p' = (p + tau * grad(div p - f / weight)) / (1 + tau * |grad ...|)`.
fn projection_step(
    p: &[[f64; 3]],
    div: &[f64],
    f: &[f64],
    weight: f64,
    tau: f64,
    dims: [usize; 3],
    out: &mut [[f64; 3]],
) {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    out.par_iter_mut().enumerate().for_each(|(i, slot)| {
        let x = i % nx;
        let y = (i / nx) % ny;
        let z = i / plane;
        let s_here = div[i] - f[i] / weight;
        let gx = if x + 1 < nx {
            (div[i + 1] - f[i + 1] / weight) - s_here
        } else {
            0.0
        };
        let gy = if y + 1 < ny {
            (div[i + nx] - f[i + nx] / weight) - s_here
        } else {
            0.0
        };
        let gz = if z + 1 < nz {
            (div[i + plane] - f[i + plane] / weight) - s_here
        } else {
            0.0
        };
        let norm = (gx * gx + gy * gy + gz * gz).sqrt();
        let denom = 1.0 + tau * norm;
        let q = p[i];
        *slot = [
            (q[0] + tau * gx) / denom,
            (q[1] + tau * gy) / denom,
            (q[2] + tau * gz) / denom,
        ];
    });
}

/// Discrete divergence adjoint to the forward-difference gradient; its
/// sum over the volume is identically zero, so the mean of `u` equals
/// the mean of `f`.
fn divergence(p: &[[f64; 3]], dims: [usize; 3], out: &mut [f64]) {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    out.par_iter_mut().enumerate().for_each(|(i, slot)| {
        let x = i % nx;
        let y = (i / nx) % ny;
        let z = i / plane;
        let mut d = 0.0;
        if x + 1 < nx {
            d += p[i][0];
        }
        if x > 0 {
            d -= p[i - 1][0];
        }
        if y + 1 < ny {
            d += p[i][1];
        }
        if y > 0 {
            d -= p[i - nx][1];
        }
        if z + 1 < nz {
            d += p[i][2];
        }
        if z > 0 {
            d -= p[i - plane][2];
        }
        *slot = d;
    });
}
