//! Nondimensional poroelastic consolidation with an oscillating fluid source.
//!
//! Outputs are the displacements `u`, `v` and the pore pressure `p` over
//! `(x, z, t)`.

use std::f64::consts::PI;

use super::{value_op, Constants, LinearOperator, ProblemKind, ProblemSpec};
use crate::autodiff::Entry;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::{KernelFamily, PointSource};

const U: usize = 0;
const V: usize = 1;
const P: usize = 2;
const X: usize = 0;
const Z: usize = 1;
const T: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarryMercerConstants {
    pub beta: f64,
    pub eta: f64,
    pub omega: f64,
    pub t_end: f64,
}

impl Default for BarryMercerConstants {
    fn default() -> Self {
        Self {
            beta: 2.0,
            eta: 1.5,
            omega: 1.0,
            t_end: 2.0 * PI,
        }
    }
}

impl BarryMercerConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.eta.is_finite() && self.beta.is_finite() && self.omega.is_finite()) {
            return Err(Error::Parameter("barry-mercer constants must be finite with t_end > 0".into()));
        }
        Ok(())
    }
}

pub const SOURCE: [f64; 2] = [0.25, 0.25];

pub fn problem(kernel: KernelFamily, alpha: f64, constants: BarryMercerConstants) -> Result<ProblemSpec> {
    problem_at(kernel, alpha, constants, SOURCE.to_vec())
}

pub fn problem_at(
    kernel: KernelFamily,
    alpha: f64,
    constants: BarryMercerConstants,
    location: Vec<f64>,
) -> Result<ProblemSpec> {
    constants.validate()?;
    let (h, g) = (Entry::Hess, Entry::Grad);
    let e1 = constants.eta + 1.0;
    let residual = LinearOperator::new(vec![
        vec![(h(U, T, X), 1.0), (h(V, T, Z), 1.0), (h(P, X, X), -1.0), (h(P, Z, Z), -1.0)],
        vec![(h(U, X, X), e1), (h(U, Z, Z), 1.0), (h(V, X, Z), constants.eta), (g(P, X), -e1)],
        vec![(h(V, X, X), 1.0), (h(V, Z, Z), e1), (h(U, X, Z), constants.eta), (g(P, Z), -e1)],
    ]);
    let vertical = LinearOperator::new(vec![
        vec![(Entry::Value(P), 1.0)],
        vec![(Entry::Value(V), 1.0)],
        vec![(g(U, X), 1.0)],
    ]);
    let horizontal = LinearOperator::new(vec![
        vec![(Entry::Value(P), 1.0)],
        vec![(Entry::Value(U), 1.0)],
        vec![(g(V, Z), 1.0)],
    ]);
    Ok(ProblemSpec {
        kind: ProblemKind::BarryMercer,
        domain: Domain::new(vec![0.0, 0.0], vec![1.0, 1.0], Some((0.0, constants.t_end)))?,
        source: PointSource::new(location, kernel, alpha)?,
        constants: Constants::BarryMercer(constants),
        residual,
        bc: vec![vertical.clone(), vertical, horizontal.clone(), horizontal],
        ic: Some(value_op(&[U, V, P])),
    })
}
