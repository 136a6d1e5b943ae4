//! Binary soft-margin SVM trained with Platt's sequential minimal optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{matmul, Tensor};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("labels must be -1 or +1, got {0}")]
    BadLabel(f64),
    #[error("non-finite feature in row {0}")]
    NonFinite(usize),
    #[error("C must be positive and finite, got {0}")]
    BadC(f64),
    #[error("invalid kernel: {0}")]
    BadKernel(String),
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), SvmError> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(SvmError::BadKernel(format!("rbf gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub kernel: KernelSpec,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Cap on outer-loop sweeps.
    pub max_passes: usize,
}

impl Default for SmoParams {
    /// Linear kernel, C = 1, tol = 1e-3, 100 sweeps.
    fn default() -> Self {
        SmoParams {
            c: 1.0,
            kernel: KernelSpec::Linear,
            tol: 1e-3,
            max_passes: 100,
        }
    }
}

/// Per-dimension z-score fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Population statistics; constant dimensions get std 1.
    pub fn fit(rows: &[Vec<f64>]) -> Scaler {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        for r in rows {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { means, stds }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Successful two-α updates.
    pub iterations: usize,
    /// Outer-loop sweeps performed.
    pub passes: usize,
    /// Largest KKT violation at exit.
    pub kkt_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub b: f64,
    /// `αᵢ·yᵢ` of every support vector.
    pub coef: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    /// Applied to inputs before the kernel when present.
    pub scaler: Option<Scaler>,
    pub meta: TrainingMeta,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors[0].len()
    }

    /// Dual objective `Σαᵢ − ½ Σᵢⱼ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)` over the support vectors.
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = self.coef.iter().map(|c| c.abs()).sum();
        let mut quad = 0.0;
        for (i, si) in self.support_vectors.iter().enumerate() {
            for (j, sj) in self.support_vectors.iter().enumerate() {
                quad += self.coef[i] * self.coef[j] * self.kernel.eval(si, sj);
            }
        }
        linear - 0.5 * quad
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        let bad = |m: String| Err(SvmError::InvalidModel(m));
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::BadC(self.c));
        }
        if self.coef.is_empty() || self.coef.len() != self.support_vectors.len() {
            return bad(format!(
                "{} coefficients for {} support vectors",
                self.coef.len(),
                self.support_vectors.len()
            ));
        }
        let d = self.support_vectors[0].len();
        if self
            .support_vectors
            .iter()
            .any(|s| s.len() != d || s.iter().any(|v| !v.is_finite()))
        {
            return bad("support vectors must be finite and share one dimension".into());
        }
        if self
            .coef
            .iter()
            .any(|&a| !(a != 0.0 && a.abs() <= self.c * (1.0 + 1e-12)))
            || !self.b.is_finite()
        {
            return bad("coefficients must satisfy 0 < |αy| ≤ C and b must be finite".into());
        }
        let balance: f64 = self.coef.iter().sum();
        if balance.abs() > 1e-8 * self.c.max(1.0) * self.coef.len() as f64 {
            return bad(format!("Σαy = {balance:e} violates the equality constraint"));
        }
        if let Some(s) = &self.scaler {
            if s.means.len() != d || s.stds.len() != d || s.stds.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return bad("scaler does not match the support vectors".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SvmError> {
        let model: SvmModel = serde_json::from_slice(bytes)?;
        model.validate()?;
        Ok(model)
    }
}

/// `f(x) = Σ αᵢyᵢ K(xᵢ, x) + b` (after the model's scaler, if any).
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    if x.len() != model.dim() {
        return Err(SvmError::Dimension {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let scaled;
    let x = match &model.scaler {
        Some(s) => {
            scaled = s.apply(x);
            &scaled[..]
        }
        None => x,
    };
    Ok(model
        .coef
        .iter()
        .zip(&model.support_vectors)
        .map(|(a, s)| a * model.kernel.eval(s, x))
        .sum::<f64>()
        + model.b)
}

/// Sign of the decision value; `f = 0` maps to +1.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<i8, SvmError> {
    Ok(if svm_decision(model, x)? >= 0.0 { 1 } else { -1 })
}

fn gram(x: &[Vec<f64>], kernel: &KernelSpec) -> Vec<f64> {
    let (n, d) = (x.len(), x[0].len());
    if d == 0 {
        return vec![if matches!(kernel, KernelSpec::Linear) { 0.0 } else { 1.0 }; n * n];
    }
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let m = Tensor::new(&[n, d], flat).expect("rectangular rows");
    let dots = matmul(&m, &m.transpose().expect("rank 2"))
        .expect("conformable")
        .into_data();
    match *kernel {
        KernelSpec::Linear => dots,
        KernelSpec::Rbf { gamma } => {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    // exact squared distance; the dot-product expansion loses digits
                    let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    k[i * n + j] = (-gamma * d2).exp();
                }
            }
            k
        }
    }
}

struct Smo<'a> {
    k: Vec<f64>,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// Platt threshold: `u = Σ αy K − b`.
    b: f64,
    /// `u_i − y_i` for every point.
    err: Vec<f64>,
    rng: ChaCha8Rng,
    steps: usize,
}

const STEP_EPS: f64 = 1e-12;

impl Smo<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n() + j]
    }

    fn output(&self, i: usize) -> f64 {
        (0..self.n())
            .map(|j| self.alpha[j] * self.y[j] * self.kij(j, i))
            .sum::<f64>()
            - self.b
    }

    fn refresh_errors(&mut self) {
        self.err = (0..self.n()).map(|i| self.output(i) - self.y[i]).collect();
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2, y1, y2, e1, e2) = (
            self.alpha[i1],
            self.alpha[i2],
            self.y[i1],
            self.y[i2],
            self.err[i1],
            self.err[i2],
        );
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.kij(i1, i1), self.kij(i1, i2), self.kij(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut new_a2 = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective along the constraint line evaluated at both ends
            let f1 = y1 * (e1 + self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 + self.b) - s * a1 * k12 - a2 * k22;
            let obj = |a2n: f64| {
                let a1n = a1 + s * (a2 - a2n);
                a1n * f1 + a2n * f2 + 0.5 * a1n * a1n * k11 + 0.5 * a2n * a2n * k22 + s * a2n * a1n * k12
            };
            let (lobj, hobj) = (obj(lo), obj(hi));
            if lobj < hobj - STEP_EPS {
                lo
            } else if lobj > hobj + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        if new_a2 < STEP_EPS * c {
            new_a2 = 0.0;
        } else if new_a2 > c * (1.0 - STEP_EPS) {
            new_a2 = c;
        }
        if (new_a2 - a2).abs() < STEP_EPS * (new_a2 + a2 + STEP_EPS) {
            return false;
        }
        let mut new_a1 = a1 + s * (a2 - new_a2);
        if new_a1 < STEP_EPS * c {
            new_a1 = 0.0;
        } else if new_a1 > c * (1.0 - STEP_EPS) {
            new_a1 = c;
        }
        let (t1, t2) = (y1 * (new_a1 - a1), y2 * (new_a2 - a2));
        let b1 = e1 + t1 * k11 + t2 * k12 + self.b;
        let b2 = e2 + t1 * k12 + t2 * k22 + self.b;
        let free = |a: f64| a > 0.0 && a < c;
        let new_b = if free(new_a1) {
            b1
        } else if free(new_a2) {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_b - self.b;
        for i in 0..self.n() {
            self.err[i] += t1 * self.kij(i1, i) + t2 * self.kij(i2, i) - db;
        }
        self.alpha[i1] = new_a1;
        self.alpha[i2] = new_a2;
        self.b = new_b;
        self.steps += 1;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let (y2, a2, e2) = (self.y[i2], self.alpha[i2], self.err[i2]);
        let r2 = e2 * y2;
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }
        let n = self.n();
        let bound_free: Vec<usize> = (0..n).filter(|&i| self.non_bound(i)).collect();
        if bound_free.len() > 1 {
            let best = bound_free.iter().copied().max_by(|&a, &b| {
                (self.err[a] - e2)
                    .abs()
                    .total_cmp(&(self.err[b] - e2).abs())
                    .then(b.cmp(&a))
            });
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        if !bound_free.is_empty() {
            let start = self.rng.gen_range(0..bound_free.len());
            for k in 0..bound_free.len() {
                if self.take_step(bound_free[(start + k) % bound_free.len()], i2) {
                    return true;
                }
            }
        }
        let start = self.rng.gen_range(0..n);
        (0..n).any(|k| self.take_step((start + k) % n, i2))
    }

    /// Threshold from the KKT conditions, in the `f = Σ αy K + b` convention:
    /// the mean over free support vectors, else the midpoint of the feasible interval.
    fn final_bias(&self) -> f64 {
        let n = self.n();
        let g: Vec<f64> = (0..n).map(|i| self.output(i) + self.b).collect();
        let free: Vec<f64> = (0..n)
            .filter(|&i| self.non_bound(i))
            .map(|i| self.y[i] - g[i])
            .collect();
        if !free.is_empty() {
            return free.iter().sum::<f64>() / free.len() as f64;
        }
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        for (i, gi) in g.iter().enumerate() {
            let edge = self.y[i] - gi;
            let at_zero = self.alpha[i] == 0.0;
            if at_zero == (self.y[i] > 0.0) {
                lower = lower.max(edge);
            } else {
                upper = upper.min(edge);
            }
        }
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => (lower + upper) / 2.0,
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    }
}

fn kkt_violation(alpha: &[f64], y: &[f64], margins: &[f64], c: f64) -> f64 {
    alpha
        .iter()
        .zip(y)
        .zip(margins)
        .map(|((&a, &yi), &f)| {
            let m = yi * f;
            if a == 0.0 {
                (1.0 - m).max(0.0)
            } else if a == c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Full dual solution of [`smo_train`]: every α, in input order.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub model: SvmModel,
}

pub fn smo_train(x: &[Vec<f64>], y: &[f64], params: &SmoParams) -> Result<SvmModel, SvmError> {
    smo_solve(x, y, params).map(|s| s.model)
}

pub fn smo_solve(x: &[Vec<f64>], y: &[f64], params: &SmoParams) -> Result<SmoSolution, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(SvmError::BadC(params.c));
    }
    params.kernel.validate()?;
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::BadLabel(bad));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClass);
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(SvmError::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(i));
        }
    }

    let n = x.len();
    let mut smo = Smo {
        k: gram(x, &params.kernel),
        y,
        c: params.c,
        tol: params.tol,
        alpha: vec![0.0; n],
        b: 0.0,
        err: vec![0.0; n],
        rng: ChaCha8Rng::seed_from_u64(0),
        steps: 0,
    };
    smo.refresh_errors();
    let mut examine_all = true;
    let mut passes = 0;
    let mut converged = false;
    while passes < params.max_passes {
        passes += 1;
        let mut changed = 0;
        if examine_all {
            smo.refresh_errors();
            for i in 0..n {
                changed += usize::from(smo.examine(i));
            }
        } else {
            for i in 0..n {
                if smo.non_bound(i) {
                    changed += usize::from(smo.examine(i));
                }
            }
        }
        if examine_all && changed == 0 {
            converged = true;
            break;
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let b = smo.final_bias();
    let margins: Vec<f64> = (0..n).map(|i| smo.output(i) + smo.b + b).collect();
    let violation = kkt_violation(&smo.alpha, y, &margins, params.c);
    let (coef, support_vectors): (Vec<f64>, Vec<Vec<f64>>) = (0..n)
        .filter(|&i| smo.alpha[i] > 0.0)
        .map(|i| (smo.alpha[i] * y[i], x[i].clone()))
        .unzip();
    if coef.is_empty() {
        return Err(SvmError::InvalidModel("no support vectors".into()));
    }
    let model = SvmModel {
        kernel: params.kernel,
        c: params.c,
        b,
        coef,
        support_vectors,
        scaler: None,
        meta: TrainingMeta {
            iterations: smo.steps,
            passes,
            kkt_violation: violation,
            converged,
        },
    };
    Ok(SmoSolution {
        alpha: smo.alpha,
        model,
    })
}

/// Standardizes `rows`, maps labels `{0, 1}` to `{−1, +1}`, trains, and
/// stores the scaler in the model.
pub fn train_svm(rows: &[Vec<f64>], labels: &[usize], params: &SmoParams) -> Result<SvmModel, SvmError> {
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(SvmError::BadLabel(l as f64));
    }
    if rows.is_empty() {
        return Err(SvmError::SingleClass);
    }
    let scaler = Scaler::fit(rows);
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.apply(r)).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut model = smo_train(&scaled, &y, params)?;
    model.scaler = Some(scaler);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, kernel: KernelSpec) -> SmoParams {
        SmoParams {
            c,
            kernel,
            tol: 1e-9,
            max_passes: 1000,
        }
    }

    #[test]
    fn two_point_line() {
        // on α₁ = α₂ = α the dual is 2α − 2α², maximal at α = 0.5
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .max_by(|a, b| (2.0 * a - 2.0 * a * a).total_cmp(&(2.0 * b - 2.0 * b * b)))
            .unwrap();
        assert_eq!(best, 0.5);
        let sol = smo_solve(
            &[vec![-1.0], vec![1.0]],
            &[-1.0, 1.0],
            &params(10.0, KernelSpec::Linear),
        )
        .unwrap();
        assert!(sol.alpha.iter().all(|a| (a - 0.5).abs() < 1e-12));
        let m = sol.model;
        assert!(m.b.abs() < 1e-12);
        let w: f64 = m.coef.iter().zip(&m.support_vectors).map(|(a, s)| a * s[0]).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((svm_decision(&m, &[0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(svm_predict(&m, &[0.5]).unwrap(), 1);
        assert!((m.dual_objective() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn xor_with_rbf() {
        let x = [vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [1.0, 1.0, -1.0, -1.0];
        let m = smo_train(&x, &y, &params(10.0, KernelSpec::Rbf { gamma: 1.0 })).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(svm_predict(&m, xi).unwrap() as f64, yi);
        }
        // free support vectors sit on the margin
        for (a, s) in m.coef.iter().zip(&m.support_vectors) {
            if a.abs() < m.c {
                let yi = a.signum();
                assert!((yi * svm_decision(&m, s).unwrap() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn constraints_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| {
                if r[0] + 0.3 * r[1] + rng.gen_range(-0.3..0.3) > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let p = params(0.5, KernelSpec::Rbf { gamma: 0.7 });
        let sol = smo_solve(&x, &y, &p).unwrap();
        assert!(sol.alpha.iter().all(|&a| (0.0..=0.5).contains(&a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-10);
        assert!(sol.model.meta.converged);
        assert!(sol.model.meta.kkt_violation < 1e-6);
        assert_eq!(smo_train(&x, &y, &p).unwrap(), sol.model);
        sol.model.validate().unwrap();
    }

    #[test]
    fn rbf_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let a = smo_train(&x, &y, &params(1.0, KernelSpec::Rbf { gamma: 0.5 })).unwrap();
        let s = 4.0;
        let xs: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
        let b = smo_train(&xs, &y, &params(1.0, KernelSpec::Rbf { gamma: 0.5 / (s * s) })).unwrap();
        for (r, rs) in x.iter().zip(&xs) {
            assert_eq!(svm_predict(&a, r).unwrap(), svm_predict(&b, rs).unwrap());
        }
    }

    #[test]
    fn input_errors() {
        let p = SmoParams::default();
        let x = [vec![1.0], vec![2.0]];
        assert!(matches!(smo_train(&x, &[1.0, 1.0], &p), Err(SvmError::SingleClass)));
        assert!(matches!(smo_train(&x, &[1.0, 0.0], &p), Err(SvmError::BadLabel(_))));
        assert!(matches!(
            smo_train(&[vec![1.0], vec![f64::NAN]], &[1.0, -1.0], &p),
            Err(SvmError::NonFinite(1))
        ));
        assert!(matches!(
            smo_train(&x, &[1.0, -1.0], &SmoParams { c: 0.0, ..p }),
            Err(SvmError::BadC(_))
        ));
        let rbf = SmoParams {
            kernel: KernelSpec::Rbf { gamma: -1.0 },
            ..p
        };
        assert!(matches!(smo_train(&x, &[1.0, -1.0], &rbf), Err(SvmError::BadKernel(_))));
        let m = smo_train(&x, &[1.0, -1.0], &p).unwrap();
        assert!(matches!(svm_decision(&m, &[1.0, 2.0]), Err(SvmError::Dimension { .. })));
    }

    #[test]
    fn standardized_training_and_json() {
        let rows = vec![vec![100.0, 5.0], vec![102.0, 5.0], vec![110.0, 5.0], vec![112.0, 5.0]];
        let m = train_svm(&rows, &[0, 0, 1, 1], &SmoParams::default()).unwrap();
        let s = m.scaler.as_ref().unwrap();
        assert_eq!(s.means, [106.0, 5.0]);
        assert_eq!(s.stds[1], 1.0);
        assert_eq!(svm_predict(&m, &[101.0, 5.0]).unwrap(), -1);
        assert_eq!(svm_predict(&m, &[111.0, 5.0]).unwrap(), 1);
        let back = SvmModel::from_json(m.to_json().as_bytes()).unwrap();
        assert_eq!(back, m);
        let mut broken = m.clone();
        broken.coef[0] = 5.0;
        assert!(SvmModel::from_json(broken.to_json().as_bytes()).is_err());
    }
}
