//! The rank-pruning training loop.
//!
//! Iteration `t` with `t % m == 0` first replaces every convolution weight by
//! its low-rank projection, then takes the gradient step from the projected
//! weights. All other iterations are plain momentum SGD. When training stops
//! on a multiple of `m`, one last projection is applied so the exported
//! weights are low-rank.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrpConfig;
use super::trajectory::{energy_ratios, RankTrajectory, TsvdEvent};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::linalg::{nuclear_subgradient, MatrixF64};
use crate::net::{Batch, GradientSet, Layer, NetworkModel};
use crate::reshape::{from_matrix, low_rank_project, to_matrix};

/// Largest and summed per-step update norms of one layer since its last projection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradBoundTracker {
    pub window_max: f64,
    pub window_sum: f64,
    pub steps: u64,
}

impl GradBoundTracker {
    pub fn record(&mut self, step_norm: f64) {
        self.window_max = self.window_max.max(step_norm);
        self.window_sum += step_norm;
        self.steps += 1;
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub trajectory: RankTrajectory,
    pub history: Vec<EpochMetrics>,
}

/// Stepwise trainer holding parameters, momentum buffers and the trajectory.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: NetworkModel,
    config: TrpConfig,
    velocity: GradientSet,
    conv_layers: Vec<usize>,
    trackers: Vec<GradBoundTracker>,
    trajectory: RankTrajectory,
    iteration: u64,
    projections: u64,
}

impl Trainer {
    pub fn new(model: NetworkModel, config: TrpConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        let conv_layers = model.conv_indices();
        Ok(Self {
            velocity: GradientSet::zeros_like(&model),
            trackers: vec![GradBoundTracker::default(); conv_layers.len()],
            conv_layers,
            model,
            config,
            trajectory: RankTrajectory::default(),
            iteration: 0,
            projections: 0,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn config(&self) -> &TrpConfig {
        &self.config
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn trajectory(&self) -> &RankTrajectory {
        &self.trajectory
    }

    pub fn trackers(&self) -> &[GradBoundTracker] {
        &self.trackers
    }

    pub fn into_parts(self) -> (NetworkModel, RankTrajectory) {
        (self.model, self.trajectory)
    }

    /// Whether the current iteration is a projection iteration.
    pub fn projection_due(&self) -> bool {
        self.config
            .period_m
            .is_some_and(|m| self.iteration.is_multiple_of(m))
    }

    /// One iteration: `trp_step` when a projection is due, `sgd_step` otherwise.
    /// Returns the batch loss (at the weights the gradient was taken at).
    pub fn step(&mut self, batch: &Batch, lr: f64) -> Result<f64> {
        if self.projection_due() {
            self.trp_step(batch, lr).map(|(loss, _)| loss)
        } else {
            self.sgd_step(batch, lr)
        }
    }

    /// Projects every convolution, then takes a gradient step from the projected weights.
    pub fn trp_step(&mut self, batch: &Batch, lr: f64) -> Result<(f64, Vec<TsvdEvent>)> {
        let events = self.project()?;
        let loss = self.sgd_step(batch, lr)?;
        Ok((loss, events))
    }

    /// Applies the terminal projection if training stopped on a multiple of `m`
    /// that has not been projected yet.
    pub fn finish(&mut self) -> Result<Vec<TsvdEvent>> {
        let already = self
            .trajectory
            .events
            .last()
            .is_some_and(|e| e.t == self.iteration);
        if self.projection_due() && !already {
            self.project()
        } else {
            Ok(Vec::new())
        }
    }

    /// Replaces each convolution weight by its low-rank projection and logs one
    /// event per layer.
    pub fn project(&mut self) -> Result<Vec<TsvdEvent>> {
        let m = self
            .config
            .period_m
            .ok_or_else(|| Error::Config("projection requested with period_m disabled".into()))?;
        let e = self.config.energy_e;
        let sqrt_e = e.sqrt();
        let z = self.projections;
        let mut events = Vec::with_capacity(self.conv_layers.len());
        for (slot, &li) in self.conv_layers.iter().enumerate() {
            let Layer::Conv2d(conv) = &mut self.model.layers[li] else {
                unreachable!("conv index points at a conv layer");
            };
            let tracker = self.trackers[slot];
            let fro_norm = conv.weight.frobenius_norm();
            let bound_stat = if z == 0 || tracker.window_max == 0.0 {
                0.0
            } else if fro_norm == 0.0 {
                f64::INFINITY
            } else {
                m as f64 * tracker.window_max / fro_norm
            };
            let (projected, tsvd) = low_rank_project(&conv.weight, self.config.scheme, e)?;
            conv.weight = projected;
            let event = TsvdEvent {
                layer: li,
                t: self.iteration,
                z,
                k: tsvd.k,
                full_rank: tsvd.full_rank,
                energy_ratios: energy_ratios(&tsvd.factors.sigma, tsvd.k)
                    .unwrap_or_else(|_| vec![0.0; tsvd.k]),
                fro_norm,
                bound_stat,
                bound_holds: z == 0 || bound_stat < sqrt_e,
                discarded_energy: tsvd.discarded_energy,
                window_max: tracker.window_max,
                window_sum: tracker.window_sum,
            };
            log::debug!(
                "t={} z={} layer {li}: k={}/{} bound {:.4} (sqrt e {:.4})",
                event.t,
                z,
                event.k,
                event.full_rank,
                bound_stat,
                sqrt_e
            );
            self.trackers[slot].reset();
            self.trajectory.push(event.clone());
            events.push(event);
        }
        self.projections += 1;
        Ok(events)
    }

    /// Momentum SGD with weight decay; convolution gradients gain
    /// `lambda * U_tru V_tru^T` of the current weights when `nuclear_lambda > 0`.
    pub fn sgd_step(&mut self, batch: &Batch, lr: f64) -> Result<f64> {
        let (loss, mut grads) = self.model.value_and_grad(batch)?;
        for (li, g) in grads.layers.iter().enumerate() {
            if let Some(g) = g {
                if !g.weight.iter().chain(&g.bias).all(|x| x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of layer {li} ({})",
                        self.model.layers[li].name()
                    )));
                }
            }
        }
        if self.config.nuclear_lambda > 0.0 {
            self.add_nuclear_term(&mut grads)?;
        }

        let mu = self.config.momentum;
        let wd = self.config.weight_decay;
        for (li, layer) in self.model.layers.iter_mut().enumerate() {
            let Some((w, b)) = layer.params_mut() else {
                continue;
            };
            let g = grads.layers[li].as_ref().expect("grad for parameter layer");
            let v = self.velocity.layers[li].as_mut().expect("velocity for parameter layer");
            let mut step_sq = 0.0;
            for ((wi, vi), gi) in w.iter_mut().zip(v.weight.iter_mut()).zip(&g.weight) {
                *vi = mu * *vi + (gi + wd * *wi);
                let next = *wi - lr * *vi;
                step_sq += (next - *wi) * (next - *wi);
                *wi = next;
            }
            for ((bi, vi), gi) in b.iter_mut().zip(v.bias.iter_mut()).zip(&g.bias) {
                *vi = mu * *vi + (gi + wd * *bi);
                *bi -= lr * *vi;
            }
            if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "parameters of layer {li} after update (lr {lr})"
                )));
            }
            if let Some(slot) = self.conv_layers.iter().position(|&c| c == li) {
                self.trackers[slot].record(step_sq.sqrt());
            }
        }
        self.iteration += 1;
        Ok(loss)
    }

    fn add_nuclear_term(&self, grads: &mut GradientSet) -> Result<()> {
        let lambda = self.config.nuclear_lambda;
        let scheme = self.config.scheme;
        for &li in &self.conv_layers {
            let Layer::Conv2d(conv) = &self.model.layers[li] else {
                continue;
            };
            let sub: MatrixF64 = nuclear_subgradient(&to_matrix(&conv.weight, scheme))?;
            let sub = from_matrix(&sub, scheme, conv.weight.dims())?;
            let g = grads.layers[li].as_mut().expect("conv grad");
            for (gi, si) in g.weight.iter_mut().zip(sub.as_slice()) {
                *gi += lambda * si;
            }
        }
        Ok(())
    }
}

/// Seed offset for the shuffling stream, kept apart from model initialization.
const SHUFFLE_STREAM: u64 = 0x5eed_5417_u64;

/// Runs `epochs` passes over `data.train`, evaluating on `data.test` after each.
pub fn train(model: NetworkModel, data: &DataSplit, config: &TrpConfig) -> Result<TrainOutcome> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut trainer = Trainer::new(model, config.clone())?;
    let test = data.test.as_batch()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.train.batch(chunk)?;
            loss_sum += trainer.step(&batch, lr)?;
            batches += 1;
        }
        if epoch + 1 == config.epochs {
            trainer.finish()?;
        }
        let eval = trainer.model().evaluate(&test)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / batches as f64,
            test_acc: eval.accuracy,
            test_loss: eval.mean_loss,
        };
        log::info!(
            "epoch {epoch}: lr {lr} train_loss {:.5} test_acc {:.4}",
            metrics.train_loss,
            metrics.test_acc
        );
        history.push(metrics);
    }
    let (model, trajectory) = trainer.into_parts();
    Ok(TrainOutcome {
        model,
        trajectory,
        history,
    })
}
