//! Adam, the step-down learning-rate schedule, and the mini-batch trainer.

use std::io::Write;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netzoo::{self, NetError, NetworkSpec, Params};
use crate::Tensor;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("parameter, gradient and optimizer state disagree on {0:?}")]
    ShapeMismatch(String),
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("iteration {iteration} outside schedule of {total} iterations")]
    IterationOutOfRange { iteration: usize, total: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("sample {index} has shape {got:?}, network expects {expected:?}")]
    SampleShape {
        index: usize,
        expected: [usize; 3],
        got: Vec<usize>,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// First/second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Params,
    pub v: Params,
}

impl AdamState {
    /// Fresh state with the canonical defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &Params) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &Params, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Params = params.iter().map(|(k, t)| (k.clone(), t.zeros_like())).collect();
        AdamState {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One Adam update of every parameter, in place.
pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, lr: f64) -> Result<(), OptimError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(OptimError::BadLearningRate(lr));
    }
    for (name, p) in params.iter() {
        let ok = |t: Option<&Tensor>| t.is_some_and(|t| t.shape() == p.shape());
        if !ok(grads.get(name)) || !ok(state.m.get(name)) || !ok(state.v.get(name)) {
            return Err(OptimError::ShapeMismatch(name.clone()));
        }
    }
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(OptimError::ShapeMismatch("<parameter set>".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads[name].data();
        let m = state.m.get_mut(name).expect("checked").data_mut();
        let v = state.v.get_mut(name).expect("checked").data_mut();
        for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// `lr = base_lr · gamma^floor(iteration / ceil(step_fraction · total))`,
/// except that a trailing remainder shorter than a full stage stays in the
/// last full stage: a 33% step gives exactly three stages, never a fourth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub step_fraction: f64,
    pub total_iterations: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, gamma: f64, step_fraction: f64, total_iterations: usize) -> Result<Self, OptimError> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(OptimError::BadLearningRate(base_lr));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(OptimError::BadSchedule(format!("gamma {gamma} outside (0, 1]")));
        }
        if !(step_fraction > 0.0 && step_fraction <= 1.0) {
            return Err(OptimError::BadSchedule(format!(
                "step fraction {step_fraction} outside (0, 1]"
            )));
        }
        if total_iterations == 0 {
            return Err(OptimError::BadSchedule("zero iterations".into()));
        }
        Ok(LrSchedule {
            base_lr,
            gamma,
            step_fraction,
            total_iterations,
        })
    }

    /// Index of the last stage, `floor(1 / step_fraction) - 1`.
    pub fn last_stage(&self) -> usize {
        ((1.0 / self.step_fraction + 1e-9).floor() as usize).saturating_sub(1)
    }

    /// Iterations per stage.
    pub fn stage_length(&self) -> usize {
        ((self.step_fraction * self.total_iterations as f64).ceil() as usize).max(1)
    }
}

pub fn lr_at(schedule: &LrSchedule, iteration: usize) -> Result<f64, OptimError> {
    if iteration >= schedule.total_iterations {
        return Err(OptimError::IterationOutOfRange {
            iteration,
            total: schedule.total_iterations,
        });
    }
    let stage = (iteration / schedule.stage_length()).min(schedule.last_stage()) as i32;
    Ok(schedule.base_lr * schedule.gamma.powi(stage))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub gamma: f64,
    pub step_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// 40 epochs, batch 8, Adam at 0.001, ×0.1 every 33% of iterations.
    pub fn dfunet() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 8,
            base_lr: 0.001,
            gamma: 0.1,
            step_fraction: 0.33,
            seed: 0,
        }
    }

    /// 60 epochs at 0.01 with the same step-down policy.
    pub fn lenet() -> Self {
        TrainConfig {
            epochs: 60,
            base_lr: 0.01,
            ..Self::dfunet()
        }
    }

    pub fn batches_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.batch_size)
    }

    pub fn schedule(&self, samples: usize) -> Result<LrSchedule, OptimError> {
        LrSchedule::new(
            self.base_lr,
            self.gamma,
            self.step_fraction,
            self.epochs * self.batches_per_epoch(samples),
        )
    }
}

/// One training example: a `C×H×W` tensor and its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

/// Per-epoch training summary; one line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Global index of the epoch's last iteration.
    pub iteration: usize,
    pub lr: f64,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    /// Fraction of samples the network classified correctly while training.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Params,
    pub optimizer: AdamState,
    pub log: Vec<EpochReport>,
}

/// Stacks samples `indices` into an `N×C×H×W` batch.
pub fn stack_batch(samples: &[Sample], indices: &[usize]) -> Result<(Tensor, Vec<usize>), OptimError> {
    let first = &samples[indices[0]].input;
    let mut data = Vec::with_capacity(indices.len() * first.len());
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend_from_slice(samples[i].input.data());
        labels.push(samples[i].label);
    }
    let mut shape = vec![indices.len()];
    shape.extend_from_slice(first.shape());
    Ok((
        Tensor::new(&shape, data).map_err(|e| OptimError::BadConfig(e.to_string()))?,
        labels,
    ))
}

fn check_samples(spec: &NetworkSpec, samples: &[Sample]) -> Result<(), OptimError> {
    if samples.is_empty() {
        return Err(OptimError::EmptyDataset);
    }
    for (index, s) in samples.iter().enumerate() {
        if s.input.shape() != spec.input {
            return Err(OptimError::SampleShape {
                index,
                expected: spec.input,
                got: s.input.shape().to_vec(),
            });
        }
        if s.label >= spec.classes {
            return Err(OptimError::BadConfig(format!(
                "sample {index} has label {} >= {}",
                s.label, spec.classes
            )));
        }
    }
    Ok(())
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

/// Mini-batch Adam on `samples`, starting from `params`. Batch gradients are
/// means over the batch; the final partial batch is used. One seeded
/// permutation is drawn per epoch.
pub fn train(
    spec: &NetworkSpec,
    params: Params,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome, OptimError> {
    train_with(spec, params, samples, config, |_, _| ControlFlow::Continue(()))
}

/// [`train`] with a per-epoch hook that may stop training early.
pub fn train_with(
    spec: &NetworkSpec,
    mut params: Params,
    samples: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport, &Params) -> ControlFlow<()>,
) -> Result<TrainOutcome, OptimError> {
    check_samples(spec, samples)?;
    if config.epochs == 0 || config.batch_size == 0 || config.batch_size > samples.len() {
        return Err(OptimError::BadConfig(format!(
            "{} epochs with batch size {} over {} samples",
            config.epochs,
            config.batch_size,
            samples.len()
        )));
    }
    let schedule = config.schedule(samples.len())?;
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut iteration = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut lr = schedule.base_lr;
        for (batch, indices) in order.chunks(config.batch_size).enumerate() {
            let (x, labels) = stack_batch(samples, indices)?;
            let cache = netzoo::forward(spec, &params, &x)?;
            let out = netzoo::backward(spec, &params, &cache, &labels)?;
            if !out.loss.is_finite() {
                return Err(OptimError::NonFiniteLoss { epoch, batch });
            }
            loss_sum += out.loss * indices.len() as f64;
            correct += out
                .probs
                .data()
                .chunks(spec.classes)
                .zip(&labels)
                .filter(|(p, &l)| argmax(p) == l)
                .count();
            lr = lr_at(&schedule, iteration)?;
            adam_step(&mut params, &out.grads, &mut state, lr)?;
            iteration += 1;
        }
        let report = EpochReport {
            epoch,
            iteration: iteration - 1,
            lr,
            loss: loss_sum / samples.len() as f64,
            train_accuracy: correct as f64 / samples.len() as f64,
        };
        log::debug!(
            "epoch {} iter {} lr {:.3e} loss {:.5} acc {:.4}",
            report.epoch,
            report.iteration,
            report.lr,
            report.loss,
            report.train_accuracy
        );
        log.push(report);
        if on_epoch(&report, &params).is_break() {
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        optimizer: state,
        log,
    })
}

/// Loss, accuracy and class probabilities of `params` over `samples`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// `N×K` probabilities, in sample order.
    pub probs: Vec<Vec<f64>>,
}

pub fn evaluate(
    spec: &NetworkSpec,
    params: &Params,
    samples: &[Sample],
    batch_size: usize,
) -> Result<Evaluation, OptimError> {
    check_samples(spec, samples)?;
    let indices: Vec<usize> = (0..samples.len()).collect();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut probs = Vec::with_capacity(samples.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, labels) = stack_batch(samples, chunk)?;
        let logits = netzoo::predict(spec, params, &x)?;
        let head = crate::layers::softmax_cross_entropy_batch(&logits, &labels).map_err(|e| NetError::Layer {
            layer: spec.layers.len() - 1,
            source: e,
        })?;
        loss += head.loss * chunk.len() as f64;
        for (row, &label) in head.probs.data().chunks(spec.classes).zip(&labels) {
            correct += usize::from(argmax(row) == label);
            probs.push(row.to_vec());
        }
    }
    Ok(Evaluation {
        loss: loss / samples.len() as f64,
        accuracy: correct as f64 / samples.len() as f64,
        probs,
    })
}

/// Writes the training log as CSV: `epoch,iteration,lr,loss,train_accuracy`.
pub fn write_log_csv<W: Write>(log: &[EpochReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::FcSpec;
    use crate::netzoo::{init_params, LayerSpec};

    fn scalar_params(v: f64) -> Params {
        [("p".to_string(), Tensor::new(&[1], v).unwrap())].into_iter().collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_params(1.5);
        let mut state = AdamState::new(&p);
        let g = scalar_params(0.0);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut state, 0.01).unwrap();
        }
        assert_eq!(p["p"].data(), &[1.5]);
        assert_eq!(state.step, 3);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = scalar_params(0.0);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &scalar_params(10.0), &mut state, 0.001).unwrap();
        let expect = -0.001 * 10.0 / (10.0 + 1e-8);
        assert!((p["p"].data()[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn matches_scalar_recurrence() {
        // independent evaluation of the moment recurrences for a constant gradient
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8, 0.003, -0.7);
        let (mut m, mut v, mut x) = (0.0, 0.0, 2.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        let mut p = scalar_params(2.0);
        let mut state = AdamState::new(&p);
        for _ in 0..2 {
            adam_step(&mut p, &scalar_params(g), &mut state, lr).unwrap();
        }
        assert!((p["p"].data()[0] - x).abs() < 1e-12);
        assert!(state.v["p"].data()[0] >= 0.0);
    }

    #[test]
    fn adam_rejects_bad_input() {
        let mut p = scalar_params(0.0);
        let mut state = AdamState::new(&p);
        assert!(adam_step(&mut p, &scalar_params(1.0), &mut state, 0.0).is_err());
        let wrong: Params = [("p".to_string(), Tensor::new(&[2], 0.0).unwrap())]
            .into_iter()
            .collect();
        assert!(matches!(
            adam_step(&mut p, &wrong, &mut state, 0.1),
            Err(OptimError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn step_down_schedule() {
        let s = LrSchedule::new(0.001, 0.1, 0.33, 100).unwrap();
        assert_eq!(lr_at(&s, 0).unwrap(), 0.001);
        for t in 0..100 {
            let expect = match t {
                0..=32 => 0.001,
                33..=65 => 0.001 * 0.1,
                _ => 0.001 * 0.1 * 0.1,
            };
            assert!((lr_at(&s, t).unwrap() - expect).abs() < 1e-15 * expect, "t={t}");
        }
        assert!(lr_at(&s, 100).is_err());
        // without the remainder rule t=99 would start a fourth stage
        let s = LrSchedule::new(1.0, 0.5, 0.3, 100).unwrap();
        assert_eq!(s.stage_length(), 30);
        assert_eq!(lr_at(&s, 89).unwrap(), 0.25);
        assert_eq!(lr_at(&s, 99).unwrap(), 0.25);
        let s = LrSchedule::new(1.0, 0.5, 0.25, 100).unwrap();
        assert_eq!(lr_at(&s, 99).unwrap(), 0.125);
        let flat = LrSchedule::new(0.01, 1.0, 0.33, 50).unwrap();
        assert!((0..50).all(|t| lr_at(&flat, t).unwrap() == 0.01));
        assert!(LrSchedule::new(0.01, 1.5, 0.33, 50).is_err());
    }

    #[test]
    fn schedule_is_nonincreasing() {
        let s = LrSchedule::new(0.01, 0.5, 0.1, 97).unwrap();
        let lrs: Vec<f64> = (0..97).map(|t| lr_at(&s, t).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn dfunet_and_lenet_defaults() {
        let d = TrainConfig::dfunet();
        assert_eq!(
            (d.epochs, d.batch_size, d.base_lr, d.gamma, d.step_fraction),
            (40, 8, 0.001, 0.1, 0.33)
        );
        let l = TrainConfig::lenet();
        assert_eq!((l.epochs, l.base_lr), (60, 0.01));
    }

    fn toy_problem() -> (NetworkSpec, Vec<Sample>) {
        let spec = NetworkSpec::new(
            [2, 1, 1],
            2,
            vec![
                LayerSpec::FullyConnected(FcSpec {
                    in_units: 2,
                    out_units: 2,
                }),
                LayerSpec::Softmax,
            ],
        )
        .unwrap();
        let samples = (0..20)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let jitter = (i as f64 * 0.37).sin() * 0.4;
                Sample {
                    input: Tensor::new(&[2, 1, 1], vec![sign * (1.0 + jitter), 0.5 * jitter]).unwrap(),
                    label,
                }
            })
            .collect();
        (spec, samples)
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (spec, samples) = toy_problem();
        // 20 samples, batch 2 → 10 iterations per epoch, 200 iterations total
        let config = TrainConfig {
            epochs: 20,
            batch_size: 2,
            base_lr: 0.05,
            gamma: 1.0,
            step_fraction: 1.0,
            seed: 3,
        };
        let out = train(&spec, init_params(&spec, 1), &samples, &config).unwrap();
        assert_eq!(out.log.len(), 20);
        assert_eq!(out.log.last().unwrap().iteration, 199);
        let eval = evaluate(&spec, &out.params, &samples, 8).unwrap();
        assert_eq!(eval.accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let (spec, samples) = toy_problem();
        let config = TrainConfig {
            epochs: 3,
            batch_size: 3,
            seed: 9,
            ..TrainConfig::dfunet()
        };
        let a = train(&spec, init_params(&spec, 1), &samples, &config).unwrap();
        let b = train(&spec, init_params(&spec, 1), &samples, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn early_stop_and_bad_configs() {
        let (spec, samples) = toy_problem();
        let config = TrainConfig {
            epochs: 10,
            batch_size: 4,
            ..TrainConfig::dfunet()
        };
        let out = train_with(&spec, init_params(&spec, 1), &samples, &config, |r, _| {
            if r.epoch == 1 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(out.log.len(), 2);
        assert!(matches!(
            train(&spec, init_params(&spec, 1), &[], &config),
            Err(OptimError::EmptyDataset)
        ));
        let big = TrainConfig {
            batch_size: 21,
            ..config
        };
        assert!(train(&spec, init_params(&spec, 1), &samples, &big).is_err());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let (spec, mut samples) = toy_problem();
        samples[0].input = Tensor::new(&[2, 1, 1], vec![f64::NAN, 0.0]).unwrap();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 20,
            ..TrainConfig::dfunet()
        };
        assert!(matches!(
            train(&spec, init_params(&spec, 1), &samples, &config),
            Err(OptimError::NonFiniteLoss { epoch: 0, batch: 0 })
        ));
    }

    #[test]
    fn log_csv_header() {
        let mut buf = Vec::new();
        write_log_csv(
            &[EpochReport {
                epoch: 0,
                iteration: 4,
                lr: 0.001,
                loss: 0.5,
                train_accuracy: 0.75,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,iteration,lr,loss,train_accuracy");
        assert_eq!(text.lines().nth(1).unwrap(), "0,4,0.001,0.5,0.75");
    }
}
