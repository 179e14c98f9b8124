//! Forward propagation of (value, input gradient, input Hessian) through the
//! network, and the reverse sweep over that extended computation.
//!
//! A jet holds one plane per channel: channel 0 is the value, then one plane
//! per differentiated input coordinate, then one plane per requested
//! second-derivative pair. Planes are `[batch × width]` row-major and stored
//! back to back, so a linear layer acts on all channels with one GEMM.

use crate::autodiff::Entry;
use crate::error::{Error, Result};
use crate::net::{Activation, MsSirenNet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetSpec {
    dirs: Vec<usize>,
    /// Positions into `dirs`, `a <= b`.
    pairs: Vec<(usize, usize)>,
}

impl JetSpec {
    pub fn value_only() -> Self {
        Self {
            dirs: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub fn first_order(in_dim: usize) -> Self {
        Self {
            dirs: (0..in_dim).collect(),
            pairs: Vec::new(),
        }
    }

    pub fn full(in_dim: usize) -> Self {
        let mut pairs = Vec::new();
        for a in 0..in_dim {
            for b in a..in_dim {
                pairs.push((a, b));
            }
        }
        Self {
            dirs: (0..in_dim).collect(),
            pairs,
        }
    }

    /// Smallest spec that can produce every entry in `entries`.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Self {
        let mut dirs = Vec::new();
        let mut coord_pairs = Vec::new();
        for e in entries {
            match *e {
                Entry::Value(_) => {}
                Entry::Grad(_, i) => dirs.push(i),
                Entry::Hess(_, i, j) => {
                    dirs.push(i);
                    dirs.push(j);
                    coord_pairs.push((i.min(j), i.max(j)));
                }
            }
        }
        dirs.sort_unstable();
        dirs.dedup();
        coord_pairs.sort_unstable();
        coord_pairs.dedup();
        let pos = |c: usize| dirs.binary_search(&c).unwrap();
        let pairs = coord_pairs.iter().map(|&(i, j)| (pos(i), pos(j))).collect();
        Self { dirs, pairs }
    }

    pub fn channels(&self) -> usize {
        1 + self.dirs.len() + self.pairs.len()
    }

    /// Input coordinates carrying a first-derivative channel.
    pub fn dirs(&self) -> &[usize] {
        &self.dirs
    }

    /// Second-derivative pairs as input coordinates `(i, j)`, `i <= j`.
    pub fn coord_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(a, b)| (self.dirs[a], self.dirs[b]))
    }

    pub fn max_coord(&self) -> Option<usize> {
        self.dirs.last().copied()
    }

    /// Channel index holding `entry`, if this spec computes it.
    pub fn channel_of(&self, entry: Entry) -> Option<usize> {
        match entry {
            Entry::Value(_) => Some(0),
            Entry::Grad(_, i) => self.dirs.iter().position(|&d| d == i).map(|k| 1 + k),
            Entry::Hess(_, i, j) => {
                let a = self.dirs.iter().position(|&d| d == i.min(j))?;
                let b = self.dirs.iter().position(|&d| d == i.max(j))?;
                self.pairs
                    .iter()
                    .position(|&p| p == (a, b))
                    .map(|p| 1 + self.dirs.len() + p)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    channels: usize,
    batch: usize,
    width: usize,
    data: Vec<f64>,
}

impl Jet {
    pub fn zeros(channels: usize, batch: usize, width: usize) -> Self {
        Self {
            channels,
            batch,
            width,
            data: vec![0.0; channels * batch * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn plane(&self) -> usize {
        self.batch * self.width
    }

    /// `[batch × width]` plane of channel `c`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn get(&self, c: usize, b: usize, w: usize) -> f64 {
        self.data[(c * self.batch + b) * self.width + w]
    }

    #[inline]
    pub fn add(&mut self, c: usize, b: usize, w: usize, v: f64) {
        self.data[(c * self.batch + b) * self.width + w] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Intermediate state kept by a forward pass for the reverse sweep.
pub struct Tape {
    spec: JetSpec,
    batch: usize,
    subnets: Vec<SubnetTape>,
}

pub(crate) struct SubnetTape {
    /// Jet entering each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation jet of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// σ', σ'', σ''' at the pre-activation value, per hidden layer.
    derivs: Vec<[Vec<f64>; 3]>,
}

impl Tape {
    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl MsSirenNet {
    /// Jet of the network output at `batch` points (`points` is
    /// `[batch × in_dim]` row-major).
    pub fn jet_forward(
        &self,
        points: &[f64],
        batch: usize,
        spec: &JetSpec,
        keep_tape: bool,
    ) -> Result<(Jet, Option<Tape>)> {
        self.check_jet_args(points, batch, spec)?;
        let c = self.config();
        let mut out = Jet::zeros(spec.channels(), batch, c.out_dim);
        let mut tapes = Vec::new();
        for s in 0..c.num_subnets {
            let (y, tape) = self.subnet_jet(s, points, batch, spec, keep_tape)?;
            for (o, v) in out.data.iter_mut().zip(&y.data) {
                *o += v;
            }
            if let Some(t) = tape {
                tapes.push(t);
            }
        }
        if c.num_subnets > 1 {
            let inv = c.num_subnets as f64;
            for o in out.data.iter_mut() {
                *o /= inv;
            }
        }
        let tape = keep_tape.then(|| Tape {
            spec: spec.clone(),
            batch,
            subnets: tapes,
        });
        Ok((out, tape))
    }

    fn check_jet_args(&self, points: &[f64], batch: usize, spec: &JetSpec) -> Result<()> {
        if points.len() != batch * self.in_dim() {
            return Err(Error::contract(format!(
                "expected {batch} points of dimension {}, got {} coordinates",
                self.in_dim(),
                points.len()
            )));
        }
        if let Some(m) = spec.max_coord() {
            if m >= self.in_dim() {
                return Err(Error::contract(format!(
                    "derivative along input {m} but the network has {} inputs",
                    self.in_dim()
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn subnet_jet(
        &self,
        subnet: usize,
        points: &[f64],
        batch: usize,
        spec: &JetSpec,
        keep_tape: bool,
    ) -> Result<(Jet, Option<SubnetTape>)> {
        let c = self.config();
        let nc = spec.channels();
        let in_dim = c.in_dim;
        let scale = c.scales[subnet];

        let mut h = vec![0.0; nc * batch * in_dim];
        for (dst, src) in h[..batch * in_dim].iter_mut().zip(points) {
            *dst = scale * src;
        }
        for (k, &dir) in spec.dirs.iter().enumerate() {
            let plane = &mut h[(1 + k) * batch * in_dim..(2 + k) * batch * in_dim];
            for b in 0..batch {
                plane[b * in_dim + dir] = scale;
            }
        }

        let layers = c.layers_per_subnet;
        let mut tape = SubnetTape {
            inputs: Vec::with_capacity(layers),
            pre: Vec::with_capacity(layers - 1),
            derivs: Vec::with_capacity(layers - 1),
        };
        for l in 0..layers {
            let slot = *self.slot(subnet, l);
            let rows = nc * batch;
            let mut z = vec![0.0; rows * slot.fan_out];
            gemm_a_wt(rows, slot.fan_in, slot.fan_out, &h, self.weights(&slot), &mut z);
            for row in z[..batch * slot.fan_out].chunks_exact_mut(slot.fan_out) {
                for (v, b) in row.iter_mut().zip(self.biases(&slot)) {
                    *v += b;
                }
            }
            if !z.iter().all(|v| v.is_finite()) {
                return Err(Error::numeric(format!("subnet {subnet} layer {l}")));
            }
            if l == layers - 1 {
                if keep_tape {
                    tape.inputs.push(h);
                }
                let y = Jet {
                    channels: nc,
                    batch,
                    width: slot.fan_out,
                    data: z,
                };
                return Ok((y, keep_tape.then_some(tape)));
            }
            let (mut next, d) = activate(c.activation, spec, batch * slot.fan_out, &z);
            if l >= 1 && c.skip_connections {
                for (n, p) in next.iter_mut().zip(&h) {
                    *n += p;
                }
            }
            if keep_tape {
                tape.inputs.push(std::mem::replace(&mut h, next));
                tape.pre.push(z);
                tape.derivs.push(d);
            } else {
                h = next;
            }
        }
        unreachable!("layers_per_subnet >= 2")
    }

    /// Accumulates `∂L/∂θ` into `grad` given `out_bar = ∂L/∂(output jet)`.
    pub fn jet_backward(&self, tape: &Tape, out_bar: &Jet, grad: &mut [f64]) -> Result<()> {
        let c = self.config();
        let nc = tape.spec.channels();
        let batch = tape.batch;
        if out_bar.channels != nc || out_bar.batch != batch || out_bar.width != c.out_dim {
            return Err(Error::contract("output cotangent does not match the tape"));
        }
        if grad.len() != self.param_count() {
            return Err(Error::contract("gradient buffer has the wrong length"));
        }
        if tape.subnets.len() != c.num_subnets {
            return Err(Error::contract("tape was recorded without intermediates"));
        }
        let inv = 1.0 / c.num_subnets as f64;
        let layers = c.layers_per_subnet;
        let rows = nc * batch;
        for (s, st) in tape.subnets.iter().enumerate() {
            let mut g: Vec<f64> = if c.num_subnets > 1 {
                out_bar.data.iter().map(|v| v * inv).collect()
            } else {
                out_bar.data.clone()
            };
            for l in (0..layers).rev() {
                let slot = *self.slot(s, l);
                let (z_bar, g_out) = if l == layers - 1 {
                    (g, None)
                } else {
                    let zb = activate_backward(
                        &tape.spec,
                        batch * slot.fan_out,
                        &g,
                        &st.pre[l],
                        &st.derivs[l],
                    );
                    (zb, Some(g))
                };
                let h_in = &st.inputs[l];
                let (wgrad, rest) = grad[slot.weight_offset..].split_at_mut(slot.fan_in * slot.fan_out);
                gemm_at_b_acc(slot.fan_out, rows, slot.fan_in, &z_bar, h_in, wgrad);
                let bgrad = &mut rest[..slot.fan_out];
                for row in z_bar[..batch * slot.fan_out].chunks_exact(slot.fan_out) {
                    for (bg, v) in bgrad.iter_mut().zip(row) {
                        *bg += v;
                    }
                }
                if l == 0 {
                    break;
                }
                // The identity skip hands the output cotangent straight to the input.
                let mut h_bar = match g_out {
                    Some(v) if c.skip_connections => v,
                    _ => vec![0.0; rows * slot.fan_in],
                };
                gemm_a_w_acc(rows, slot.fan_out, slot.fan_in, &z_bar, self.weights(&slot), &mut h_bar);
                g = h_bar;
            }
        }
        Ok(())
    }
}

/// Applies the activation to every channel of `z`; returns the output jet
/// and `[σ', σ'', σ''']` evaluated at the value channel.
fn activate(act: Activation, spec: &JetSpec, plane: usize, z: &[f64]) -> (Vec<f64>, [Vec<f64>; 3]) {
    let nd = spec.dirs.len();
    let mut h = vec![0.0; z.len()];
    let mut d1 = vec![0.0; plane];
    let mut d2 = vec![0.0; plane];
    let mut d3 = vec![0.0; plane];
    {
        let (h0, z0) = (&mut h[..plane], &z[..plane]);
        match act {
            Activation::Sine => {
                for e in 0..plane {
                    let (s, c) = z0[e].sin_cos();
                    h0[e] = s;
                    d1[e] = c;
                    d2[e] = -s;
                    d3[e] = -c;
                }
            }
            _ => {
                for e in 0..plane {
                    let [s0, s1, s2, s3] = act.derivatives(z0[e]);
                    h0[e] = s0;
                    d1[e] = s1;
                    d2[e] = s2;
                    d3[e] = s3;
                }
            }
        }
    }
    for k in 0..nd {
        let off = (1 + k) * plane;
        let (hk, zk) = (&mut h[off..off + plane], &z[off..off + plane]);
        for e in 0..plane {
            hk[e] = d1[e] * zk[e];
        }
    }
    for (p, &(a, b)) in spec.pairs.iter().enumerate() {
        let off = (1 + nd + p) * plane;
        let za = &z[(1 + a) * plane..(2 + a) * plane];
        let zb = &z[(1 + b) * plane..(2 + b) * plane];
        let zp = &z[off..off + plane];
        let hp = &mut h[off..off + plane];
        for e in 0..plane {
            hp[e] = d2[e] * za[e] * zb[e] + d1[e] * zp[e];
        }
    }
    (h, [d1, d2, d3])
}

fn activate_backward(
    spec: &JetSpec,
    plane: usize,
    h_bar: &[f64],
    z: &[f64],
    d: &[Vec<f64>; 3],
) -> Vec<f64> {
    let nd = spec.dirs.len();
    let (d1, d2, d3) = (&d[0], &d[1], &d[2]);
    let mut z_bar = vec![0.0; z.len()];
    {
        let (zb0, hb0) = (&mut z_bar[..plane], &h_bar[..plane]);
        for e in 0..plane {
            zb0[e] = hb0[e] * d1[e];
        }
    }
    for k in 0..nd {
        let off = (1 + k) * plane;
        let (head, tail) = z_bar.split_at_mut(off);
        let zb0 = &mut head[..plane];
        let zbk = &mut tail[..plane];
        let hbk = &h_bar[off..off + plane];
        let zk = &z[off..off + plane];
        for e in 0..plane {
            zb0[e] += hbk[e] * d2[e] * zk[e];
            zbk[e] = hbk[e] * d1[e];
        }
    }
    for (p, &(a, b)) in spec.pairs.iter().enumerate() {
        let off = (1 + nd + p) * plane;
        let (oa, ob) = ((1 + a) * plane, (1 + b) * plane);
        let hbp = &h_bar[off..off + plane];
        let zp = &z[off..off + plane];
        let za = &z[oa..oa + plane];
        let zb = &z[ob..ob + plane];
        for e in 0..plane {
            let g = hbp[e];
            z_bar[e] += g * (d3[e] * za[e] * zb[e] + d2[e] * zp[e]);
            z_bar[oa + e] += g * d2[e] * zb[e];
            z_bar[ob + e] += g * d2[e] * za[e];
            z_bar[off + e] = g * d1[e];
        }
    }
    z_bar
}

/// `out[m×n] = a[m×k] · wᵀ` with `w` stored `[n×k]` row-major.
fn gemm_a_wt(m: usize, k: usize, n: usize, a: &[f64], w: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: slice lengths checked above; strides describe those slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[m×n] += a[m×k] · w[k×n]`.
fn gemm_a_w_acc(m: usize, k: usize, n: usize, a: &[f64], w: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(w.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[m×n] += aᵀ · b` with `a` stored `[k×m]` and `b` stored `[k×n]`.
fn gemm_at_b_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
