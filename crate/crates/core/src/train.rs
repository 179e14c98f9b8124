//! Adam training of the network and the loss weights.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{sample, BatchSizes};
use crate::kernel::WidthSchedule;
use crate::loss::{terms_with_gradient, to_slots, LossTerms, Weighting};
use crate::net::MsSirenNet;
use crate::problems::ProblemSpec;
use crate::reference::{relative_l2, L2Error, ReferenceField};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr0: f64,
    /// Fractions of `iterations` after which the rate is multiplied by `decay`.
    pub milestones: Vec<f64>,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: BatchSizes,
    /// Relative-error evaluation cadence; 0 disables it.
    pub eval_every: usize,
    /// Checkpoint cadence handed to the observer; 0 disables it.
    pub checkpoint_every: usize,
    pub seed: u64,
    pub width_schedule: Option<WidthSchedule>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            lr0: 1e-3,
            milestones: vec![0.4, 0.6, 0.8],
            decay: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: BatchSizes {
                r0: 2048,
                r1: 2048,
                bc: 2048,
                ic: 2048,
            },
            eval_every: 1000,
            checkpoint_every: 0,
            seed: 0,
            width_schedule: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::Parameter("lr0 must be positive".into()));
        }
        let mut prev = 0.0;
        for &m in &self.milestones {
            if !(m > prev && m < 1.0) {
                return Err(Error::Parameter("milestones must increase strictly inside (0, 1)".into()));
            }
            prev = m;
        }
        if !(self.decay > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Parameter("decay and adam betas out of range".into()));
        }
        if !(self.adam_eps >= 0.0) {
            return Err(Error::Parameter("adam eps must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `lr0 · decay^(milestones passed)`.
pub fn lr_at(config: &TrainConfig, iter: usize) -> f64 {
    let passed = config
        .milestones
        .iter()
        .filter(|&&m| iter as f64 >= m * config.iterations as f64)
        .count();
    config.lr0 * config.decay.powi(passed as i32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::contract("adam parameter, gradient and state lengths differ"));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(format!("gradient entry {k}")));
    }
    let (b1, b2) = betas;
    state.step += 1;
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    }
    Ok(())
}

pub const METRICS_FORMAT_LINE: &str = "# deltapinn-metrics v1";
pub const METRICS_HEADER: &str =
    "iter,loss_r0,loss_r1,loss_ic,loss_bc,sigma0,sigma1,sigma2,sigma3,lr,alpha,l2_mean,l2_c1,l2_c2,l2_c3";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iter: usize,
    /// Loss terms in `r0, r1, ic, bc` order.
    pub terms: [Option<f64>; 4],
    /// Effective variances per slot, for trainable weights.
    pub sigma2: [Option<f64>; 4],
    pub lr: f64,
    pub alpha: f64,
    pub l2: Option<L2Error>,
}

impl MetricsRecord {
    pub fn loss_terms(&self) -> LossTerms {
        LossTerms {
            r0: self.terms[0].unwrap_or(0.0),
            r1: self.terms[1].unwrap_or(0.0),
            ic: self.terms[2],
            bc: self.terms[3].unwrap_or(0.0),
        }
    }

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut cols = vec![self.iter.to_string()];
        cols.extend(self.terms.iter().map(|v| opt(*v)));
        cols.extend(self.sigma2.iter().map(|v| opt(*v)));
        cols.push(opt(Some(self.lr)));
        cols.push(opt(Some(self.alpha)));
        cols.push(opt(self.l2.as_ref().map(|e| e.mean)));
        for c in 0..3 {
            cols.push(opt(self.l2.as_ref().and_then(|e| e.components.get(c).copied())));
        }
        cols.join(",")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 15 {
            return Err(Error::Format(format!("metrics line has {} columns, expected 15", cols.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Format(format!("bad number `{s}`")))
            }
        };
        let iter = cols[0].parse().map_err(|_| Error::Format(format!("bad iteration `{}`", cols[0])))?;
        let mut terms = [None; 4];
        let mut sigma2 = [None; 4];
        for k in 0..4 {
            terms[k] = num(cols[1 + k])?;
            sigma2[k] = num(cols[5 + k])?;
        }
        let need = |v: Option<f64>| v.ok_or_else(|| Error::Format("missing lr or alpha".into()));
        let lr = need(num(cols[9])?)?;
        let alpha = need(num(cols[10])?)?;
        let l2 = match num(cols[11])? {
            Some(mean) => {
                let mut components = Vec::new();
                for c in &cols[12..15] {
                    if let Some(v) = num(c)? {
                        components.push(v);
                    }
                }
                Some(L2Error { components, mean })
            }
            None => None,
        };
        Ok(Self {
            iter,
            terms,
            sigma2,
            lr,
            alpha,
            l2,
        })
    }
}

pub fn write_metrics_header<W: Write>(mut w: W) -> Result<()> {
    writeln!(w, "{METRICS_FORMAT_LINE}")?;
    writeln!(w, "{METRICS_HEADER}")?;
    Ok(())
}

pub fn read_metrics<R: BufRead>(r: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = r.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim_end() != METRICS_FORMAT_LINE {
        return Err(Error::Format(format!("unknown metrics version line `{first}`")));
    }
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != METRICS_HEADER {
        return Err(Error::Format("unexpected metrics header".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(MetricsRecord::parse_line(line.trim_end())?);
        }
    }
    Ok(out)
}

/// Receives every metrics record and checkpoint requests during training.
pub trait Observer {
    fn record(&mut self, _record: &MetricsRecord) -> Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _iter: usize, _net: &MsSirenNet, _weighting: &Weighting) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

impl<F: FnMut(&MetricsRecord)> Observer for F {
    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        self(record);
        Ok(())
    }
}

pub struct TrainOutcome {
    pub net: MsSirenNet,
    pub weighting: Weighting,
    pub metrics: Vec<MetricsRecord>,
}

fn abort(iter: usize, e: Error, fallback: &str) -> Error {
    match e {
        Error::Numeric { location } => Error::TrainingAborted {
            iter,
            term: location.strip_prefix("loss term ").unwrap_or(fallback).to_string(),
        },
        e => e,
    }
}

fn slot_values(values: Option<Vec<f64>>, transient: bool) -> [Option<f64>; 4] {
    match values {
        Some(v) => {
            let s = to_slots(&v, transient);
            [Some(s[0]), Some(s[1]), transient.then_some(s[2]), Some(s[3])]
        }
        None => [None; 4],
    }
}

/// Runs the training loop. Metrics are recorded for every iteration (loss
/// terms at the parameters before that iteration's update) plus a final
/// record at `iter = iterations`.
pub fn train(
    problem: &mut ProblemSpec,
    mut net: MsSirenNet,
    mut weighting: Weighting,
    config: &TrainConfig,
    reference: Option<&ReferenceField>,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome> {
    config.validate()?;
    let transient = problem.is_transient();
    let active = if transient { 4 } else { 3 };
    if weighting.len() != active {
        return Err(Error::contract(format!(
            "{} has {active} loss terms but the weighting has {}",
            problem.name(),
            weighting.len()
        )));
    }
    if net.in_dim() != problem.in_dim() || net.out_dim() != problem.out_dim() {
        return Err(Error::contract("network dimensions do not match the problem"));
    }
    if config.eval_every > 0 && reference.is_none() {
        return Err(Error::contract("evaluation requested without a reference field"));
    }
    let n_theta = net.param_count();
    let n_w = match &weighting {
        Weighting::Uncertainty(a) => a.w.len(),
        Weighting::Fixed(_) => 0,
    };
    let mut adam = AdamState::new(n_theta + n_w);
    let mut flat = vec![0.0; n_theta + n_w];
    let mut grad = vec![0.0; n_theta + n_w];
    let mut metrics = Vec::with_capacity(config.iterations + 1);

    for iter in 0..=config.iterations {
        if let Some(s) = &config.width_schedule {
            let alpha = s.alpha_at(iter);
            if alpha != problem.source.alpha {
                problem.set_alpha(alpha)?;
            }
        }
        let last = iter == config.iterations;
        let batch = sample(&problem.domain, &problem.source, config.batch, config.seed, iter)?;
        let coefs = to_slots(&weighting.coefficients(), transient);
        let lr = lr_at(config, iter.min(config.iterations.saturating_sub(1)));
        let (terms, theta_grad) = if last {
            (crate::loss::compute_terms(&net, problem, &batch).map_err(|e| abort(iter, e, "loss"))?, Vec::new())
        } else {
            terms_with_gradient(&net, problem, &batch, coefs).map_err(|e| abort(iter, e, "loss"))?
        };
        let l2 = if config.eval_every > 0 && (iter % config.eval_every == 0 || last) {
            let reference = reference.expect("checked above");
            Some(relative_l2(&reference.predict(&net)?, reference)?)
        } else {
            None
        };
        let record = MetricsRecord {
            iter,
            terms: terms.slots(),
            sigma2: slot_values(weighting.sigma2(), transient),
            lr,
            alpha: problem.source.alpha,
            l2,
        };
        observer.record(&record)?;
        metrics.push(record);
        if last {
            break;
        }

        let values = terms.to_vec();
        flat[..n_theta].copy_from_slice(net.params());
        grad[..n_theta].copy_from_slice(&theta_grad);
        if let Weighting::Uncertainty(a) = &weighting {
            flat[n_theta..].copy_from_slice(&a.w);
            grad[n_theta..].copy_from_slice(&a.w_gradient(&values));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            let term = if k < n_theta { "parameter gradient".to_string() } else { format!("weight gradient {}", k - n_theta) };
            return Err(Error::TrainingAborted { iter, term });
        }
        adam_step(&mut flat, &grad, &mut adam, lr, (config.beta1, config.beta2), config.adam_eps)
            .map_err(|e| abort(iter, e, "gradient"))?;
        net.params_mut().copy_from_slice(&flat[..n_theta]);
        if let Weighting::Uncertainty(a) = &mut weighting {
            a.w.copy_from_slice(&flat[n_theta..]);
        }
        if config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0 {
            observer.checkpoint(iter + 1, &net, &weighting)?;
        }
    }
    Ok(TrainOutcome {
        net,
        weighting,
        metrics,
    })
}
