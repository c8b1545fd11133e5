//! Prior fitting: minimize the query BCE over a stream of synthetic tasks.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};
use crate::model::checkpoint::{self, Checkpoint, OptimizerState};
use crate::model::{loss_and_grad, ModelParams};
use crate::preprocess::pad_to;
use crate::scm::ScmHyperparams;
use crate::task::{generate_task, Task, TaskConfig};

pub const BCE_EPS: f64 = 1e-7;
pub const METRICS_HEADER: &str = "step,loss,lr,tasks_seen,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: u64,
    pub steps_per_epoch: u64,
    pub tasks_per_step: usize,
    pub accum_steps: usize,
    pub max_lr: f64,
    pub warmup_epochs: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Optimizer steps between checkpoint writes; 0 writes only the final one.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 32,
            steps_per_epoch: 100,
            tasks_per_step: 8,
            accum_steps: 4,
            max_lr: 1e-3,
            warmup_epochs: 3.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.tasks_per_step == 0 || self.accum_steps == 0 {
            return Err(Error::InvalidConfig("training counts must be >= 1".into()));
        }
        if !(self.max_lr >= 0.0) || !self.max_lr.is_finite() {
            return Err(Error::InvalidConfig("max_lr must be finite and non-negative".into()));
        }
        if !(self.warmup_epochs >= 0.0) {
            return Err(Error::InvalidConfig("warmup_epochs must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("Adam needs betas in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.epochs * self.steps_per_epoch
    }

    pub fn tasks_per_update(&self) -> usize {
        self.tasks_per_step * self.accum_steps
    }

    pub fn total_tasks(&self) -> u64 {
        self.total_steps() * self.tasks_per_update() as u64
    }
}

/// Mean binary cross-entropy with probabilities clamped to `[ε, 1 − ε]`.
pub fn bce_query_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} probabilities but {} labels", probs.len(), labels.len())));
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

/// Linear warm-up to `max_lr`, then cosine decay to zero at the last step.
pub fn lr_at(step: u64, cfg: &TrainConfig) -> f64 {
    let total = cfg.total_steps() as f64;
    let warm = (cfg.warmup_epochs * cfg.steps_per_epoch as f64).min(total);
    let s = (step as f64).min(total);
    if s < warm {
        return cfg.max_lr * s / warm;
    }
    if total <= warm {
        return cfg.max_lr;
    }
    let progress = (s - warm) / (total - warm);
    cfg.max_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Where training tasks come from. Task `i` is a pure function of the source
/// and `i`, so runs are reproducible under any thread count.
#[derive(Clone, Debug)]
pub enum TaskSource {
    Synthetic { cfg: TaskConfig, hp: ScmHyperparams, seed: u64 },
    /// A fixed list, cycled.
    Fixed(Vec<Task>),
}

impl TaskSource {
    pub fn task(&self, index: u64) -> Result<Task> {
        match self {
            TaskSource::Synthetic { cfg, hp, seed } => generate_task(cfg, hp, *seed, index),
            TaskSource::Fixed(tasks) => {
                if tasks.is_empty() {
                    return Err(Error::InvalidInput("empty task list".into()));
                }
                Ok(tasks[(index % tasks.len() as u64) as usize].clone())
            }
        }
    }
}

/// Pads a task's normalized rows to the model width and returns its loss and gradient.
pub fn task_loss_and_grad<T: Scalar>(params: &ModelParams<T>, task: &Task) -> Result<(T, Vec<Matrix<T>>)> {
    let d_max = params.arch.d_max;
    let xs = pad_to(&task.support_x.cast::<T>(), d_max)?;
    let xq = pad_to(&task.query_x.cast::<T>(), d_max)?;
    loss_and_grad(params, &xs, &task.support_y, &xq, &task.query_y)
}

/// Mean loss and mean gradient over `tasks`, reduced in list order.
pub fn batch_gradient<T: Scalar>(params: &ModelParams<T>, tasks: &[Task]) -> Result<(f64, Vec<Matrix<T>>)> {
    let per_task: Vec<(T, Vec<Matrix<T>>)> =
        tasks.par_iter().map(|t| task_loss_and_grad(params, t)).collect::<Result<_>>()?;
    reduce_mean(params, per_task)
}

fn reduce_mean<T: Scalar>(params: &ModelParams<T>, per_task: Vec<(T, Vec<Matrix<T>>)>) -> Result<(f64, Vec<Matrix<T>>)> {
    let n = per_task.len().max(1);
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in per_task {
        loss += l.to_f64().unwrap_or(f64::NAN);
        for (acc, gi) in grad.iter_mut().zip(&g) {
            acc.add_assign(gi);
        }
    }
    let inv = T::from_f64_lossy(1.0 / n as f64);
    for g in &mut grad {
        g.scale(inv);
    }
    Ok((loss / n as f64, grad))
}

/// In-place Adam update without weight decay.
pub fn adam_step(params: &mut ModelParams<f32>, grad: &[Matrix<f32>], state: &mut OptimizerState, lr: f64, cfg: &TrainConfig) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params.tensors.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        let it = p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m.as_mut_slice()).zip(v.as_mut_slice());
        for (((p, &g), m), v) in it {
            let g = g as f64;
            let mm = b1 * *m as f64 + (1.0 - b1) * g;
            let vv = b2 * *v as f64 + (1.0 - b2) * g * g;
            *m = mm as f32;
            *v = vv as f32;
            let update = lr * (mm / c1) / ((vv / c2).sqrt() + cfg.adam_eps);
            *p = (*p as f64 - update) as f32;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub tasks_seen: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub checkpoint: Checkpoint,
    pub log: Vec<StepRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Directory receiving `metrics.csv` and `checkpoint/`.
    pub out_dir: Option<&'a Path>,
    /// Stop once this many optimizer steps have been taken in total.
    pub stop_at: Option<u64>,
}

fn append_metrics(path: &Path, rec: &StepRecord) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(Error::io(path))?;
    let mut line = String::new();
    if fresh {
        line.push_str(METRICS_HEADER);
        line.push('\n');
    }
    line.push_str(&format!("{},{},{},{},{}\n", rec.step, rec.loss, rec.lr, rec.tasks_seen, rec.wall_ms));
    f.write_all(line.as_bytes()).map_err(Error::io(path))
}

/// Runs (or resumes) training from `start` until the configured number of
/// optimizer steps. Step `s` (1-based) consumes tasks
/// `[(s-1)·B, s·B)` of `source`, where `B = tasks_per_step · accum_steps`,
/// and uses learning rate `lr_at(s)`.
pub fn train(start: Checkpoint, source: &TaskSource, cfg: &TrainConfig, opts: &TrainOptions) -> Result<TrainReport> {
    cfg.validate()?;
    let mut ck = start;
    let mut opt = ck.optimizer.take().unwrap_or_else(|| OptimizerState {
        t: 0,
        m: ck.params.zeros_like(),
        v: ck.params.zeros_like(),
    });
    let per_update = cfg.tasks_per_update() as u64;
    let total = cfg.total_steps();
    let stop = opts.stop_at.map_or(total, |s| s.min(total));
    if let Some(dir) = opts.out_dir {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let base_wall = ck.wall_ms;
    let clock = Instant::now();
    let mut log = Vec::new();
    let save = |ck: &Checkpoint, opt: &OptimizerState| -> Result<()> {
        if let Some(dir) = opts.out_dir {
            let mut c = ck.clone();
            c.optimizer = Some(opt.clone());
            checkpoint::save(&dir.join("checkpoint"), &c)?;
        }
        Ok(())
    };

    while ck.step < stop {
        let step = ck.step + 1;
        let first = (step - 1) * per_update;
        let mut grad = ck.params.zeros_like();
        let mut loss = 0.0;
        for micro in 0..cfg.accum_steps {
            let lo = first + (micro * cfg.tasks_per_step) as u64;
            let indices: Vec<u64> = (lo..lo + cfg.tasks_per_step as u64).collect();
            let params = &ck.params;
            let per_task: Vec<(u64, f32, Vec<Matrix<f32>>)> = indices
                .par_iter()
                .map(|&i| {
                    let task = source.task(i)?;
                    let (l, g) = task_loss_and_grad(params, &task)?;
                    Ok((task.meta.seed, l, g))
                })
                .collect::<Result<_>>()?;
            if let Some((seed, _, _)) = per_task.iter().find(|(_, l, _)| !l.is_finite()) {
                return Err(Error::NonFiniteLoss { step, task_seed: *seed });
            }
            let (l, g) = reduce_mean(params, per_task.into_iter().map(|(_, l, g)| (l, g)).collect())?;
            loss += l / cfg.accum_steps as f64;
            let w = 1.0 / cfg.accum_steps as f32;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                for (a, &b) in acc.as_mut_slice().iter_mut().zip(gi.as_slice()) {
                    *a += w * b;
                }
            }
        }
        if !loss.is_finite() || !grad.iter().all(Matrix::all_finite) {
            return Err(Error::NonFiniteLoss { step, task_seed: source.task(first).map(|t| t.meta.seed).unwrap_or(0) });
        }
        let lr = lr_at(step, cfg);
        adam_step(&mut ck.params, &grad, &mut opt, lr, cfg);
        ck.step = step;
        ck.tasks_seen += per_update;
        ck.wall_ms = base_wall + clock.elapsed().as_millis() as u64;
        let rec = StepRecord { step, loss, lr, tasks_seen: ck.tasks_seen, wall_ms: ck.wall_ms };
        if let Some(dir) = opts.out_dir {
            append_metrics(&dir.join("metrics.csv"), &rec)?;
        }
        log::info!("step {step}/{total} loss {loss:.4} lr {lr:.2e} tasks {}", ck.tasks_seen);
        log.push(rec);
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < stop {
            save(&ck, &opt)?;
        }
    }
    save(&ck, &opt)?;
    ck.optimizer = Some(opt);
    Ok(TrainReport { checkpoint: ck, log })
}
