//! Independent reference solvers used by the integration and acceptance tests.
//!
//! Nothing in here touches the spectral machinery of the library: the heat
//! equation is discretized with second-order finite differences (Neumann
//! conditions through ghost nodes) and advanced with Crank–Nicolson.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Trapezoid weights for `n` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Applies the 1D Neumann finite-difference Laplacian (ghost-node closure).
fn laplacian_1d(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    let h2 = h * h;
    out[0] = 2.0 * (u[1] - u[0]) / h2;
    out[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) / h2;
    for i in 1..n - 1 {
        out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2;
    }
}

/// Crank–Nicolson for `u_t = D u_xx` on `[0, length]` with homogeneous
/// Neumann conditions. Returns the grid values at time `t_end`.
pub fn crank_nicolson_1d(
    initial: &[f64],
    length: f64,
    diffusivity: f64,
    t_end: f64,
    steps: usize,
) -> Vec<f64> {
    let n = initial.len();
    let h = length / (n - 1) as f64;
    let dt = t_end / steps as f64;
    let r = 0.5 * dt * diffusivity / (h * h);

    // (I - r L) on the left, tridiagonal with the doubled boundary coupling.
    let mut lower = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    let mut upper = vec![-r; n];
    upper[0] = -2.0 * r;
    lower[n - 1] = -2.0 * r;

    let mut u = initial.to_vec();
    let mut lap = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for _ in 0..steps {
        laplacian_1d(&u, h, &mut lap);
        for i in 0..n {
            rhs[i] = u[i] + 0.5 * dt * diffusivity * lap[i];
        }
        u = thomas(&lower, &diag, &upper, &rhs);
    }
    u
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// 2D Neumann Laplacian on an `nx * ny` grid stored row-major in `x`
/// (index `j * nx + i`).
fn laplacian_2d(u: &[f64], nx: usize, ny: usize, hx: f64, hy: f64, out: &mut [f64]) {
    let at = |i: usize, j: usize| u[j * nx + i];
    for j in 0..ny {
        for i in 0..nx {
            let c = at(i, j);
            let xx = if i == 0 {
                2.0 * (at(1, j) - c)
            } else if i == nx - 1 {
                2.0 * (at(nx - 2, j) - c)
            } else {
                at(i - 1, j) - 2.0 * c + at(i + 1, j)
            };
            let yy = if j == 0 {
                2.0 * (at(i, 1) - c)
            } else if j == ny - 1 {
                2.0 * (at(i, ny - 2) - c)
            } else {
                at(i, j - 1) - 2.0 * c + at(i, j + 1)
            };
            out[j * nx + i] = xx / (hx * hx) + yy / (hy * hy);
        }
    }
}

/// Crank–Nicolson for `u_t = D Δu` on a rectangle with Neumann conditions.
/// Each implicit solve uses conjugate gradients on the trapezoid-weighted
/// (hence symmetric) form of the system.
pub fn crank_nicolson_2d(
    initial: &[f64],
    nx: usize,
    ny: usize,
    lengths: [f64; 2],
    diffusivity: f64,
    t_end: f64,
    steps: usize,
) -> Vec<f64> {
    let hx = lengths[0] / (nx - 1) as f64;
    let hy = lengths[1] / (ny - 1) as f64;
    let wx = trapezoid_weights(nx, 1.0);
    let wy = trapezoid_weights(ny, 1.0);
    let weight: Vec<f64> = (0..nx * ny).map(|k| wx[k % nx] * wy[k / nx]).collect();
    let dt = t_end / steps as f64;
    let a = 0.5 * dt * diffusivity;

    let n = nx * ny;
    let mut u = initial.to_vec();
    let mut lap = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    // operator: v -> W (v - a L v)
    let apply = |v: &[f64], out: &mut [f64], scratch: &mut [f64]| {
        laplacian_2d(v, nx, ny, hx, hy, scratch);
        for k in 0..n {
            out[k] = weight[k] * (v[k] - a * scratch[k]);
        }
    };
    let mut scratch = vec![0.0; n];
    for _ in 0..steps {
        laplacian_2d(&u, nx, ny, hx, hy, &mut lap);
        for k in 0..n {
            rhs[k] = weight[k] * (u[k] + a * lap[k]);
        }
        // conjugate gradients warm-started from the previous step
        let mut x = u.clone();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax, &mut scratch);
        let mut r: Vec<f64> = (0..n).map(|k| rhs[k] - ax[k]).collect();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let rhs_norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut ap = vec![0.0; n];
        for _ in 0..10 * n {
            if rr.sqrt() <= 1e-14 * rhs_norm.max(1e-300) {
                break;
            }
            apply(&p, &mut ap, &mut scratch);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
            rr = rr_new;
        }
        u = x;
    }
    u
}

/// Eigenvalues (non-increasing) of the 1D Neumann finite-difference
/// Laplacian, obtained from its symmetrized form `W^{1/2} L W^{-1/2}`.
pub fn fd_neumann_eigenvalues_1d(n: usize, length: f64, diffusivity: f64) -> Vec<f64> {
    let h = length / (n - 1) as f64;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut out = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        laplacian_1d(&e, h, &mut out);
        for i in 0..n {
            lap[(i, j)] = diffusivity * out[i];
        }
    }
    let w = trapezoid_weights(n, h);
    let sym = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * lap[(i, j)] / w[j].sqrt());
    let sym = 0.5 * (&sym + sym.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Classical RK4 for the scalar ODE `x' = lambda x + forcing`.
pub fn rk4_scalar(lambda: f64, forcing: f64, x0: f64, t_end: f64, steps: usize) -> f64 {
    let dt = t_end / steps as f64;
    let f = |x: f64| lambda * x + forcing;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * dt * k1);
        let k3 = f(x + 0.5 * dt * k2);
        let k4 = f(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// Relative discrete L² error with trapezoid weights (tensor product in 2D).
pub fn relative_l2(reference: &[f64], candidate: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((r, c), w) in reference.iter().zip(candidate).zip(weights) {
        num += w * (r - c) * (r - c);
        den += w * r * r;
    }
    (num / den).sqrt()
}
