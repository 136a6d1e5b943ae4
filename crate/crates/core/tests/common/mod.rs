//! Independent reference solvers shared by integration tests.

#![allow(dead_code)]

use dfunet::svm::KernelSpec;

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let balance = |lam: f64| -> f64 { v.iter().zip(y).map(|(vi, yi)| yi * (vi - lam * yi).clamp(0.0, c)).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    while hi - lo > 1e-15 * bound {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect()
}

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub b: f64,
}

/// Maximizes the soft-margin dual by accelerated projected gradient with restarts.
pub fn dual_qp(x: &[Vec<f64>], y: &[f64], c: f64, kernel: KernelSpec) -> QpSolution {
    let n = x.len();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| kernel.eval(a, b)).collect())
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
        .collect();
    // minimize ½αᵀQα − 1ᵀα
    let loss = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += 0.5 * a[i] * a[j] * q[i][j];
            }
            s -= a[i];
        }
        s
    };
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let lipschitz = (0..n)
        .map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>())
        .fold(1e-12, f64::max);
    let step = 1.0 / lipschitz;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for it in 0..200_000 {
        let g = grad(&z);
        let next = project(
            &z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect::<Vec<_>>(),
            y,
            c,
        );
        if loss(&next) > loss(&a) {
            if t == 1.0 {
                // a plain projected step no longer descends
                break;
            }
            // restart momentum
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = next.iter().zip(&a).map(|(nx, ax)| nx + beta * (nx - ax)).collect();
        a = next;
        t = t_next;
        if it % 50 == 0 {
            // fixed-point residual of the projected gradient map
            let ga = grad(&a);
            let p = project(
                &a.iter().zip(&ga).map(|(ai, gi)| ai - step * gi).collect::<Vec<_>>(),
                y,
                c,
            );
            if p.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) < 1e-11 * c.max(1.0) {
                break;
            }
        }
    }
    let objective = -loss(&a);
    let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[j] * y[j] * k[j][i]).sum()).collect();
    let eps = 1e-9 * c;
    let free: Vec<f64> = (0..n)
        .filter(|&i| a[i] > eps && a[i] < c - eps)
        .map(|i| y[i] - g[i])
        .collect();
    let b = if free.is_empty() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let edge = y[i] - g[i];
            let lower = if a[i] <= eps { y[i] > 0.0 } else { y[i] < 0.0 };
            if lower {
                lo = lo.max(edge);
            } else {
                hi = hi.min(edge);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            _ => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    QpSolution { alpha: a, objective, b }
}
