//! Loss terms over the collocation batches and their weighting.

use crate::autodiff::{Jet, JetSpec};
use crate::error::{Error, Result};
use crate::geometry::SampleBatch;
use crate::net::MsSirenNet;
use crate::problems::{LinearOperator, ProblemSpec};
use crate::tensor::Tensor;

/// Names of the four loss slots, in storage order.
pub const TERM_NAMES: [&str; 4] = ["r0", "r1", "ic", "bc"];

/// Mean-squared residuals on the four batches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    pub r0: f64,
    pub r1: f64,
    /// `None` for steady problems.
    pub ic: Option<f64>,
    pub bc: f64,
}

impl LossTerms {
    /// Slot values in [`TERM_NAMES`] order.
    pub fn slots(&self) -> [Option<f64>; 4] {
        [Some(self.r0), Some(self.r1), self.ic, Some(self.bc)]
    }

    /// Active terms in slot order (three for steady problems, four otherwise).
    pub fn to_vec(&self) -> Vec<f64> {
        self.slots().into_iter().flatten().collect()
    }

    pub fn sum(&self) -> f64 {
        self.to_vec().iter().sum()
    }
}

/// Trainable log-variance-like parameters with a lower bound on the variance.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveWeights {
    pub w: Vec<f64>,
    pub epsilon: f64,
}

impl AdaptiveWeights {
    pub fn new(terms: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Parameter(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        Ok(Self {
            w: vec![1.0; terms],
            epsilon,
        })
    }

    /// Effective variance `ε² + w_i²`.
    pub fn sigma2(&self, i: usize) -> f64 {
        self.epsilon * self.epsilon + self.w[i] * self.w[i]
    }

    /// `∂ total / ∂ L_i`.
    pub fn coefficient(&self, i: usize) -> f64 {
        0.5 / self.sigma2(i)
    }

    /// `∂ total / ∂ w_i` at loss values `terms`.
    pub fn w_gradient(&self, terms: &[f64]) -> Vec<f64> {
        terms
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let s2 = self.sigma2(i);
                -l * self.w[i] / (s2 * s2) + 2.0 * self.w[i] / s2
            })
            .collect()
    }
}

/// `Σ L_i / (2(ε² + w_i²)) + ln(ε² + w_i²)`.
pub fn weighted_total(terms: &[f64], weights: &AdaptiveWeights) -> Result<f64> {
    if terms.len() != weights.w.len() {
        return Err(Error::contract(format!(
            "{} loss terms but {} weights",
            terms.len(),
            weights.w.len()
        )));
    }
    let mut total = 0.0;
    for (i, l) in terms.iter().enumerate() {
        let s2 = weights.sigma2(i);
        total += l / (2.0 * s2) + s2.ln();
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Weighting {
    /// `Σ λ_i L_i` with constant `λ`.
    Fixed(Vec<f64>),
    Uncertainty(AdaptiveWeights),
}

impl Weighting {
    pub fn equal(terms: usize) -> Self {
        Weighting::Fixed(vec![1.0; terms])
    }

    pub fn len(&self) -> usize {
        match self {
            Weighting::Fixed(l) => l.len(),
            Weighting::Uncertainty(a) => a.w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self, terms: &[f64]) -> Result<f64> {
        match self {
            Weighting::Fixed(l) => {
                if l.len() != terms.len() {
                    return Err(Error::contract("loss term count does not match the weights"));
                }
                Ok(terms.iter().zip(l).map(|(t, l)| t * l).sum())
            }
            Weighting::Uncertainty(a) => weighted_total(terms, a),
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Weighting::Fixed(l) => l.clone(),
            Weighting::Uncertainty(a) => (0..a.w.len()).map(|i| a.coefficient(i)).collect(),
        }
    }

    /// Effective variances, if trainable.
    pub fn sigma2(&self) -> Option<Vec<f64>> {
        match self {
            Weighting::Fixed(_) => None,
            Weighting::Uncertainty(a) => Some((0..a.w.len()).map(|i| a.sigma2(i)).collect()),
        }
    }
}

/// Points per forward/backward chunk; bounds memory for large batches.
const CHUNK: usize = 128;

enum Rows<'a> {
    Same(&'a LinearOperator),
    PerRow(Vec<&'a LinearOperator>),
}

impl Rows<'_> {
    fn op(&self, b: usize) -> &LinearOperator {
        match self {
            Rows::Same(op) => op,
            Rows::PerRow(ops) => ops[b],
        }
    }

    fn entries(&self) -> Vec<crate::autodiff::Entry> {
        let mut all = match self {
            Rows::Same(op) => op.entries(),
            Rows::PerRow(ops) => ops.iter().flat_map(|op| op.entries()).collect(),
        };
        all.sort_unstable();
        all.dedup();
        all
    }
}

/// Mean over `points` of the summed squared equation residuals. When `grad`
/// is given, `coef · ∂term/∂θ` is accumulated into it.
fn term(
    net: &MsSirenNet,
    problem: &ProblemSpec,
    points: &Tensor,
    rows: Rows<'_>,
    forced: bool,
    name: &str,
    coef: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let n = points.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let entries = rows.entries();
    let spec = JetSpec::from_entries(&entries);
    let channels: Vec<usize> = entries.iter().map(|e| spec.channel_of(*e).unwrap()).collect();
    let dim = points.row_len();
    let neq = rows.op(0).len();
    let scale = 2.0 * coef / n as f64;
    let mut forcing = vec![0.0; neq];
    let mut r = vec![0.0; neq];
    let mut total = 0.0;
    for start in (0..n).step_by(CHUNK) {
        let len = CHUNK.min(n - start);
        let pts = &points.data()[start * dim..(start + len) * dim];
        let (jet, tape) = net.jet_forward(pts, len, &spec, grad.is_some())?;
        let mut out_bar = grad.as_ref().map(|_| Jet::zeros(spec.channels(), len, net.out_dim()));
        for b in 0..len {
            let op = rows.op(start + b);
            if forced {
                problem.forcing(&pts[b * dim..(b + 1) * dim], &mut forcing);
            }
            for (e, eq) in op.equations.iter().enumerate() {
                let mut v = if forced { forcing[e] } else { 0.0 };
                for (entry, c) in eq {
                    let ch = channels[entries.binary_search(entry).unwrap()];
                    v += c * jet.get(ch, b, entry.output());
                }
                r[e] = v;
                total += v * v;
            }
            if let Some(ob) = out_bar.as_mut() {
                for (e, eq) in op.equations.iter().enumerate() {
                    let g = scale * r[e];
                    for (entry, c) in eq {
                        let ch = channels[entries.binary_search(entry).unwrap()];
                        ob.add(ch, b, entry.output(), g * c);
                    }
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::numeric(format!("loss term {name}")));
        }
        if let (Some(g), Some(ob), Some(t)) = (grad.as_deref_mut(), out_bar.as_ref(), tape.as_ref()) {
            net.jet_backward(t, ob, g)?;
        }
    }
    Ok(total / n as f64)
}

fn all_terms(
    net: &MsSirenNet,
    problem: &ProblemSpec,
    batch: &SampleBatch,
    coefs: Option<[f64; 4]>,
    mut grad: Option<&mut [f64]>,
) -> Result<LossTerms> {
    if batch.boundary.rows() != batch.sides.len() {
        return Err(Error::contract("boundary rows and side tags differ in length"));
    }
    let c = coefs.unwrap_or([0.0; 4]);
    let res = problem.residual_operator();
    let r0 = term(net, problem, &batch.interior0, Rows::Same(res), true, "r0", c[0], grad.as_deref_mut())?;
    let r1 = term(net, problem, &batch.interior1, Rows::Same(res), true, "r1", c[1], grad.as_deref_mut())?;
    let ic = match (problem.ic_operator(), &batch.initial) {
        (Some(op), Some(pts)) => {
            Some(term(net, problem, pts, Rows::Same(op), false, "ic", c[2], grad.as_deref_mut())?)
        }
        (Some(_), None) => return Err(Error::contract("transient problem needs an initial batch")),
        (None, _) => None,
    };
    let ops = batch.sides.iter().map(|s| problem.bc_operator(*s)).collect();
    let bc = term(net, problem, &batch.boundary, Rows::PerRow(ops), false, "bc", c[3], grad)?;
    Ok(LossTerms { r0, r1, ic, bc })
}

/// Loss terms of `net` on `batch`.
pub fn compute_terms(net: &MsSirenNet, problem: &ProblemSpec, batch: &SampleBatch) -> Result<LossTerms> {
    all_terms(net, problem, batch, None, None)
}

/// Loss terms together with `Σ_i coefs[i] · ∂L_i/∂θ` (slots in
/// [`TERM_NAMES`] order; the `ic` slot is ignored for steady problems).
pub fn terms_with_gradient(
    net: &MsSirenNet,
    problem: &ProblemSpec,
    batch: &SampleBatch,
    coefs: [f64; 4],
) -> Result<(LossTerms, Vec<f64>)> {
    let mut grad = vec![0.0; net.param_count()];
    let terms = all_terms(net, problem, batch, Some(coefs), Some(&mut grad))?;
    Ok((terms, grad))
}

/// Expands per-active-term values to the four slots.
pub fn to_slots(values: &[f64], transient: bool) -> [f64; 4] {
    if transient {
        [values[0], values[1], values[2], values[3]]
    } else {
        [values[0], values[1], 0.0, values[2]]
    }
}
