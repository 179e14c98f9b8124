//! Benchmark PDEs expressed as linear functionals of network derivatives.
//!
//! Every residual, boundary and initial condition used here is linear in the
//! network outputs and their input derivatives with constant coefficients, plus
//! a known forcing term. [`LinearOperator`] stores that structure so the
//! trainer can back-propagate residuals without a general expression graph.

pub mod barry_mercer;
pub mod maxwell;
pub mod poisson;

pub use barry_mercer::BarryMercerConstants;
pub use maxwell::MaxwellConstants;

use crate::autodiff::{DerivativeBundle, Entry};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Side};
use crate::kernel::{KernelFamily, PointSource};
use crate::tensor::Tensor;

/// A set of equations, each `Σ coefficient · entry`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    pub equations: Vec<Vec<(Entry, f64)>>,
}

impl LinearOperator {
    pub fn new(equations: Vec<Vec<(Entry, f64)>>) -> Self {
        let equations = equations
            .into_iter()
            .map(|eq| eq.into_iter().map(|(e, c)| (e.normalized(), c)).collect())
            .collect();
        Self { equations }
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn entries(&self) -> Vec<Entry> {
        let mut out: Vec<Entry> = self.equations.iter().flatten().map(|(e, _)| *e).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Equation values at bundle row `b`, without forcing.
    pub fn apply(&self, bundle: &DerivativeBundle, b: usize, out: &mut [f64]) {
        for (o, eq) in out.iter_mut().zip(&self.equations) {
            *o = eq.iter().map(|(e, c)| c * bundle.get(b, *e)).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Poisson,
    Maxwell,
    BarryMercer,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Maxwell => "maxwell",
            ProblemKind::BarryMercer => "barry-mercer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ProblemKind::Poisson, ProblemKind::Maxwell, ProblemKind::BarryMercer]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constants {
    Poisson,
    Maxwell(MaxwellConstants),
    BarryMercer(BarryMercerConstants),
}

/// One benchmark: geometry, source and the residual functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub domain: Domain,
    pub source: PointSource,
    pub constants: Constants,
    residual: LinearOperator,
    /// Indexed in [`Side::ALL`] order.
    bc: Vec<LinearOperator>,
    ic: Option<LinearOperator>,
}

impl ProblemSpec {
    /// Benchmark with its default constants.
    pub fn from_kind(kind: ProblemKind, kernel: KernelFamily, alpha: f64) -> Result<Self> {
        match kind {
            ProblemKind::Poisson => poisson::problem(kernel, alpha),
            ProblemKind::Maxwell => maxwell::problem(kernel, alpha, MaxwellConstants::default()),
            ProblemKind::BarryMercer => {
                barry_mercer::problem(kernel, alpha, BarryMercerConstants::default())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn in_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn out_dim(&self) -> usize {
        self.output_names().len()
    }

    pub fn is_transient(&self) -> bool {
        self.ic.is_some()
    }

    pub fn output_names(&self) -> &'static [&'static str] {
        match self.kind {
            ProblemKind::Poisson => &["u"],
            ProblemKind::Maxwell => &["Ex", "Ey", "Hz"],
            ProblemKind::BarryMercer => &["u", "v", "p"],
        }
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self.kind {
            ProblemKind::Poisson => &["x", "y"],
            ProblemKind::Maxwell => &["x", "y", "t"],
            ProblemKind::BarryMercer => &["x", "z", "t"],
        }
    }

    pub fn residual_operator(&self) -> &LinearOperator {
        &self.residual
    }

    pub fn bc_operator(&self, side: Side) -> &LinearOperator {
        &self.bc[side as usize]
    }

    pub fn ic_operator(&self) -> Option<&LinearOperator> {
        self.ic.as_ref()
    }

    /// Replaces the kernel width (used by the width schedule).
    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        self.source = PointSource::new(self.source.location.clone(), self.source.kernel, alpha)?;
        Ok(())
    }

    /// Known term added to each residual equation at `point`.
    pub fn forcing(&self, point: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.constants {
            Constants::Poisson => out[0] = -self.source.density_at(&point[..2]),
            Constants::Maxwell(c) => out[2] = c.pulse(point[2]) * self.source.density_at(&point[..2]),
            Constants::BarryMercer(c) => {
                out[0] = -c.beta * self.source.density_at(&point[..2]) * (c.omega * point[2]).sin()
            }
        }
    }

    fn check_bundle(&self, bundle: &DerivativeBundle, points: &Tensor) -> Result<()> {
        if points.shape().len() != 2 || points.row_len() != self.in_dim() {
            return Err(Error::contract(format!(
                "{} expects points with {} coordinates",
                self.name(),
                self.in_dim()
            )));
        }
        if bundle.batch() != points.rows() || bundle.value.row_len() != self.out_dim() {
            return Err(Error::contract("derivative bundle does not match the points"));
        }
        Ok(())
    }

    /// PDE residual per point and equation (`[batch × equations]`).
    pub fn residual(&self, bundle: &DerivativeBundle, points: &Tensor) -> Result<Tensor> {
        self.check_bundle(bundle, points)?;
        let n = self.residual.len();
        let mut out = vec![0.0; points.rows() * n];
        let mut f = vec![0.0; n];
        for (b, row) in out.chunks_exact_mut(n).enumerate() {
            self.residual.apply(bundle, b, row);
            self.forcing(points.row(b), &mut f);
            for (r, fv) in row.iter_mut().zip(&f) {
                *r += fv;
            }
        }
        Tensor::new(vec![points.rows(), n], out)
    }

    pub fn bc_residual(&self, bundle: &DerivativeBundle, points: &Tensor, side: Side) -> Result<Tensor> {
        self.check_bundle(bundle, points)?;
        apply_all(self.bc_operator(side), bundle, points.rows())
    }

    /// `None` for steady problems.
    pub fn ic_residual(&self, bundle: &DerivativeBundle, points: &Tensor) -> Result<Option<Tensor>> {
        self.check_bundle(bundle, points)?;
        self.ic
            .as_ref()
            .map(|op| apply_all(op, bundle, points.rows()))
            .transpose()
    }
}

fn apply_all(op: &LinearOperator, bundle: &DerivativeBundle, rows: usize) -> Result<Tensor> {
    let n = op.len();
    let mut out = vec![0.0; rows * n];
    for (b, row) in out.chunks_exact_mut(n).enumerate() {
        op.apply(bundle, b, row);
    }
    Tensor::new(vec![rows, n], out)
}

fn value_op(outputs: &[usize]) -> LinearOperator {
    LinearOperator::new(outputs.iter().map(|&o| vec![(Entry::Value(o), 1.0)]).collect())
}
