//! Rectangular space(-time) domains and seeded collocation sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::PointSource;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub space_lo: Vec<f64>,
    pub space_hi: Vec<f64>,
    pub time: Option<(f64, f64)>,
}

impl Domain {
    pub fn new(space_lo: Vec<f64>, space_hi: Vec<f64>, time: Option<(f64, f64)>) -> Result<Self> {
        if space_lo.len() != space_hi.len() || space_lo.is_empty() {
            return Err(Error::Geometry("corner dimensions differ".into()));
        }
        if space_lo.iter().zip(&space_hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Geometry("domain corners must satisfy lo < hi".into()));
        }
        if let Some((t0, t1)) = time {
            if !(t0 < t1) {
                return Err(Error::Geometry("time interval must satisfy lo < hi".into()));
            }
        }
        Ok(Self {
            space_lo,
            space_hi,
            time,
        })
    }

    pub fn space_dim(&self) -> usize {
        self.space_lo.len()
    }

    /// Coordinates per point: space, then time if present.
    pub fn dim(&self) -> usize {
        self.space_dim() + usize::from(self.time.is_some())
    }

    pub fn contains_space(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.space_lo.iter().zip(&self.space_hi))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Face of a two-dimensional rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// `x = x_lo`
    Left,
    /// `x = x_hi`
    Right,
    /// `y = y_lo`
    Bottom,
    /// `y = y_hi`
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|side| side.name() == s)
            .ok_or_else(|| Error::Geometry(format!("unknown side `{s}`")))
    }

    /// Coordinate held fixed on this face and whether it is the upper one.
    pub fn axis(self) -> (usize, bool) {
        match self {
            Side::Left => (0, false),
            Side::Right => (0, true),
            Side::Bottom => (1, false),
            Side::Top => (1, true),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct BatchSizes {
    pub r0: usize,
    pub r1: usize,
    pub bc: usize,
    pub ic: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub interior0: Tensor,
    pub interior1: Tensor,
    pub boundary: Tensor,
    /// Face of each boundary row.
    pub sides: Vec<Side>,
    pub initial: Option<Tensor>,
}

/// Draws one batch; identical `(seed, iter)` pairs give identical batches.
pub fn sample(
    domain: &Domain,
    src: &PointSource,
    sizes: BatchSizes,
    seed: u64,
    iter: usize,
) -> Result<SampleBatch> {
    if src.dim() != domain.space_dim() {
        return Err(Error::Geometry("source and domain dimensions differ".into()));
    }
    if !domain.contains_space(&src.location) {
        return Err(Error::Geometry(format!(
            "source {:?} lies outside the domain, so the near-source region is empty",
            src.location
        )));
    }
    if domain.space_dim() != 2 {
        return Err(Error::Geometry("sampling supports two spatial dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter as u64);
    let dim = domain.dim();
    let r = src.omega0_radius();

    let ball_lo: Vec<f64> = (0..2).map(|k| (src.location[k] - r).max(domain.space_lo[k])).collect();
    let ball_hi: Vec<f64> = (0..2).map(|k| (src.location[k] + r).min(domain.space_hi[k])).collect();
    let mut interior0 = Vec::with_capacity(sizes.r0 * dim);
    let mut p = [0.0; 2];
    let mut taken = 0;
    while taken < sizes.r0 {
        for k in 0..2 {
            p[k] = uniform(&mut rng, ball_lo[k], ball_hi[k]);
        }
        if src.in_omega0(&p) {
            interior0.extend_from_slice(&p);
            push_time(&mut interior0, &mut rng, domain);
            taken += 1;
        }
    }

    let mut interior1 = Vec::with_capacity(sizes.r1 * dim);
    taken = 0;
    while taken < sizes.r1 {
        for k in 0..2 {
            p[k] = uniform(&mut rng, domain.space_lo[k], domain.space_hi[k]);
        }
        if !src.in_omega0(&p) {
            interior1.extend_from_slice(&p);
            push_time(&mut interior1, &mut rng, domain);
            taken += 1;
        }
    }

    let mut boundary = Vec::with_capacity(sizes.bc * dim);
    let mut sides = Vec::with_capacity(sizes.bc);
    for (f, side) in Side::ALL.into_iter().enumerate() {
        let count = sizes.bc / 4 + usize::from(f < sizes.bc % 4);
        let (axis, upper) = side.axis();
        for _ in 0..count {
            for k in 0..2 {
                p[k] = if k == axis {
                    if upper {
                        domain.space_hi[k]
                    } else {
                        domain.space_lo[k]
                    }
                } else {
                    uniform(&mut rng, domain.space_lo[k], domain.space_hi[k])
                };
            }
            boundary.extend_from_slice(&p);
            push_time(&mut boundary, &mut rng, domain);
            sides.push(side);
        }
    }

    let initial = match domain.time {
        Some((t0, _)) => {
            let mut pts = Vec::with_capacity(sizes.ic * dim);
            for _ in 0..sizes.ic {
                for k in 0..2 {
                    pts.push(uniform(&mut rng, domain.space_lo[k], domain.space_hi[k]));
                }
                pts.push(t0);
            }
            Some(Tensor::new(vec![sizes.ic, dim], pts)?)
        }
        None => None,
    };

    Ok(SampleBatch {
        interior0: Tensor::new(vec![sizes.r0, dim], interior0)?,
        interior1: Tensor::new(vec![sizes.r1, dim], interior1)?,
        boundary: Tensor::new(vec![sizes.bc, dim], boundary)?,
        sides,
        initial,
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn push_time(out: &mut Vec<f64>, rng: &mut ChaCha8Rng, domain: &Domain) {
    if let Some((t0, t1)) = domain.time {
        out.push(uniform(rng, t0, t1));
    }
}
