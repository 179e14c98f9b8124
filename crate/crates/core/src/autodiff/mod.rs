//! Network evaluation with input derivatives, and parameter gradients of
//! scalar losses built from them.
//!
//! Input derivatives are propagated forward in closed form (the inputs are at
//! most three-dimensional), and parameter gradients come from a reverse sweep
//! over that extended forward pass. Losses involving second input derivatives
//! therefore get exact third-order mixed derivatives without a nested tape.

pub mod graph;
pub mod jet;

pub use graph::Expr;
pub use jet::{Jet, JetSpec, Tape};

use crate::error::{Error, Result};
use crate::net::MsSirenNet;
use crate::tensor::Tensor;

/// One scalar per point of a [`DerivativeBundle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    /// Output component.
    Value(usize),
    /// `∂ out / ∂ x_i`.
    Grad(usize, usize),
    /// `∂² out / ∂ x_i ∂ x_j`.
    Hess(usize, usize, usize),
}

impl Entry {
    pub fn output(self) -> usize {
        match self {
            Entry::Value(o) | Entry::Grad(o, _) | Entry::Hess(o, _, _) => o,
        }
    }

    /// Second derivatives with `i <= j`.
    pub fn normalized(self) -> Self {
        match self {
            Entry::Hess(o, i, j) if i > j => Entry::Hess(o, j, i),
            e => e,
        }
    }

    fn check(self, in_dim: usize, out_dim: usize) -> Result<()> {
        let ok = match self {
            Entry::Value(o) => o < out_dim,
            Entry::Grad(o, i) => o < out_dim && i < in_dim,
            Entry::Hess(o, i, j) => o < out_dim && i < in_dim && j < in_dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{self:?} is out of range for a network with {in_dim} inputs and {out_dim} outputs"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle {
    /// `[batch × out]`
    pub value: Tensor,
    /// `[batch × out × in]`
    pub grad_input: Tensor,
    /// `[batch × out × in × in]`
    pub hess_input: Tensor,
}

impl DerivativeBundle {
    pub fn batch(&self) -> usize {
        self.value.rows()
    }

    pub fn get(&self, b: usize, entry: Entry) -> f64 {
        match entry {
            Entry::Value(o) => self.value.get(&[b, o]),
            Entry::Grad(o, i) => self.grad_input.get(&[b, o, i]),
            Entry::Hess(o, i, j) => self.hess_input.get(&[b, o, i, j]),
        }
    }

    fn from_jet(jet: &Jet, spec: &JetSpec, in_dim: usize) -> Result<Self> {
        let (batch, out) = (jet.batch(), jet.width());
        let value = Tensor::new(vec![batch, out], jet.channel(0).to_vec())?;
        let mut grad_input = Tensor::zeros(vec![batch, out, in_dim]);
        let mut hess_input = Tensor::zeros(vec![batch, out, in_dim, in_dim]);
        for b in 0..batch {
            for o in 0..out {
                for (k, &i) in spec.dirs().iter().enumerate() {
                    grad_input.set(&[b, o, i], jet.get(1 + k, b, o));
                }
                for (p, (i, j)) in spec.coord_pairs().enumerate() {
                    let v = jet.get(1 + spec.dirs().len() + p, b, o);
                    hess_input.set(&[b, o, i, j], v);
                    hess_input.set(&[b, o, j, i], v);
                }
            }
        }
        Ok(Self {
            value,
            grad_input,
            hess_input,
        })
    }
}

/// Value, input gradient and input Hessian of `net` at `points`
/// (`[batch × in_dim]`).
pub fn forward_with_derivatives(net: &MsSirenNet, points: &Tensor) -> Result<DerivativeBundle> {
    net.check_points(points)?;
    let spec = JetSpec::full(net.in_dim());
    let (jet, _) = net.jet_forward(points.data(), points.rows(), &spec, false)?;
    DerivativeBundle::from_jet(&jet, &spec, net.in_dim())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// `∂ loss / ∂ θ` in the network's parameter layout.
    pub grad: Tensor,
}

/// Evaluates `loss` (a scalar expression over bundle entries at `points`) and
/// its gradient with respect to every network parameter.
pub fn loss_parameter_gradient(
    net: &MsSirenNet,
    points: &Tensor,
    loss: &Expr,
) -> Result<LossGradient> {
    net.check_points(points)?;
    let entries = loss.entries();
    for e in &entries {
        e.check(net.in_dim(), net.out_dim())?;
    }
    let spec = JetSpec::from_entries(&entries);
    let batch = points.rows();
    let (jet, tape) = net.jet_forward(points.data(), batch, &spec, true)?;
    let lookup = |e: Entry| -> Vec<f64> {
        let c = spec.channel_of(e).expect("spec covers graph entries");
        (0..batch).map(|b| jet.get(c, b, e.output())).collect()
    };
    let evaluated = loss.evaluate(batch, &lookup)?;
    let value = evaluated.scalar()?;
    if !value.is_finite() {
        return Err(Error::numeric("loss value"));
    }
    let mut out_bar = Jet::zeros(spec.channels(), batch, net.out_dim());
    loss.backward(&evaluated, &mut |e, bar| {
        let c = spec.channel_of(e).expect("spec covers graph entries");
        for (b, v) in bar.iter().enumerate() {
            out_bar.add(c, b, e.output(), *v);
        }
    });
    let mut grad = vec![0.0; net.param_count()];
    net.jet_backward(tape.as_ref().expect("tape kept"), &out_bar, &mut grad)?;
    Ok(LossGradient {
        loss: value,
        grad: Tensor::new(vec![grad.len()], grad)?,
    })
}
