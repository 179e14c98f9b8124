//! Multi-scale sine network: parallel subnets fed with scaled copies of the
//! input, identity skips between consecutive hidden layers, and outputs
//! averaged across subnets.
//!
//! Parameters live in one flat vector. For each subnet (in order) and each
//! layer (in order) the weight matrix is stored row-major as
//! `[fan_out × fan_in]`, immediately followed by the `fan_out` biases. The
//! aggregation head is the arithmetic mean and carries no parameters.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::jet::JetSpec;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Sine,
    Tanh,
    ReLU,
}

impl Activation {
    /// `(σ, σ', σ'', σ''')` at `z`.
    #[inline(always)]
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Sine => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                let d2 = -2.0 * t * d1;
                let d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1;
                [t, d1, d2, d3]
            }
            Activation::ReLU => {
                if z > 0.0 {
                    [z, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Tanh => "tanh",
            Activation::ReLU => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sine" | "sin" => Some(Activation::Sine),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::ReLU),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Sine => 0,
            Activation::Tanh => 1,
            Activation::ReLU => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Sine),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::ReLU),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub num_subnets: usize,
    /// Number of fully connected layers per subnet, output layer included.
    pub layers_per_subnet: usize,
    pub neurons_per_layer: usize,
    pub scales: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub skip_connections: bool,
    pub activation: Activation,
}

/// Scales `1, 2, 4, ...` for `n` subnets.
pub fn default_scales(n: usize) -> Vec<f64> {
    (0..n).map(|i| f64::from(1u32 << i.min(31))).collect()
}

impl NetConfig {
    /// Four subnets, seven layers of 64 neurons, scales `{1, 2, 4, 8}`.
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            num_subnets: 4,
            layers_per_subnet: 7,
            neurons_per_layer: 64,
            scales: default_scales(4),
            in_dim,
            out_dim,
            skip_connections: true,
            activation: Activation::Sine,
        }
    }

    pub fn with_shape(mut self, subnets: usize, layers: usize, neurons: usize) -> Self {
        self.num_subnets = subnets;
        self.layers_per_subnet = layers;
        self.neurons_per_layer = neurons;
        self.scales = default_scales(subnets);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_subnets == 0 {
            return fail("at least one subnet is required".into());
        }
        if self.layers_per_subnet < 2 {
            return fail(format!(
                "layers_per_subnet must be at least 2, got {}",
                self.layers_per_subnet
            ));
        }
        if self.neurons_per_layer == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return fail("zero-width layer".into());
        }
        if self.scales.len() != self.num_subnets {
            return fail(format!(
                "{} scales given for {} subnets",
                self.scales.len(),
                self.num_subnets
            ));
        }
        if let Some(s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return fail(format!("scale {s} is not strictly positive"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer of one subnet.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let h = self.neurons_per_layer;
        let last = self.layers_per_subnet - 1;
        (0..self.layers_per_subnet)
            .map(|l| {
                let fan_in = if l == 0 { self.in_dim } else { h };
                let fan_out = if l == last { self.out_dim } else { h };
                (fan_in, fan_out)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.num_subnets
            * self
                .layer_dims()
                .iter()
                .map(|(i, o)| (i + 1) * o)
                .sum::<usize>()
    }
}

/// Location of one layer's weights and biases in the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub subnet: usize,
    pub layer: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    /// Subnet-major, then layer order.
    pub slots: Vec<LayerSlot>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &NetConfig) -> Self {
        let mut slots = Vec::new();
        let mut offset = 0;
        for subnet in 0..config.num_subnets {
            for (layer, (fan_in, fan_out)) in config.layer_dims().into_iter().enumerate() {
                slots.push(LayerSlot {
                    subnet,
                    layer,
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                });
                offset += (fan_in + 1) * fan_out;
            }
        }
        Self {
            slots,
            total: offset,
        }
    }

    pub fn slot(&self, subnet: usize, layer: usize, layers_per_subnet: usize) -> &LayerSlot {
        &self.slots[subnet * layers_per_subnet + layer]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsSirenNet {
    config: NetConfig,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl MsSirenNet {
    /// Uniform initialization: first layer in `±1/in_dim`, later layers in
    /// `±sqrt(6/fan_in)`, zero biases.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in &layout.slots {
            let bound = if slot.layer == 0 {
                1.0 / config.in_dim as f64
            } else {
                (6.0 / slot.fan_in as f64).sqrt()
            };
            let w = &mut params[slot.weight_offset..slot.bias_offset];
            for v in w {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn in_dim(&self) -> usize {
        self.config.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.config.out_dim
    }

    pub(crate) fn slot(&self, subnet: usize, layer: usize) -> &LayerSlot {
        self.layout
            .slot(subnet, layer, self.config.layers_per_subnet)
    }

    pub(crate) fn weights(&self, slot: &LayerSlot) -> &[f64] {
        &self.params[slot.weight_offset..slot.bias_offset]
    }

    pub(crate) fn biases(&self, slot: &LayerSlot) -> &[f64] {
        &self.params[slot.bias_offset..slot.bias_offset + slot.fan_out]
    }

    /// Network output for a `[batch × in_dim]` tensor.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_points(x)?;
        let batch = x.rows();
        let mut out = Vec::with_capacity(batch * self.out_dim());
        const CHUNK: usize = 1024;
        let spec = JetSpec::value_only();
        for start in (0..batch).step_by(CHUNK) {
            let n = CHUNK.min(batch - start);
            let pts = &x.data()[start * self.in_dim()..(start + n) * self.in_dim()];
            let (jet, _) = self.jet_forward(pts, n, &spec, false)?;
            out.extend_from_slice(jet.channel(0));
        }
        Tensor::new(vec![batch, self.out_dim()], out)
    }

    /// Output of a single subnet, before averaging.
    pub fn subnet_forward(&self, subnet: usize, x: &Tensor) -> Result<Tensor> {
        self.check_points(x)?;
        let batch = x.rows();
        let (jet, _) = self.subnet_jet(subnet, x.data(), batch, &JetSpec::value_only(), false)?;
        Tensor::new(vec![batch, self.out_dim()], jet.channel(0).to_vec())
    }

    pub(crate) fn check_points(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.in_dim() {
            return Err(Error::contract(format!(
                "points must be [batch × {}], got {:?}",
                self.in_dim(),
                x.shape()
            )));
        }
        if !x.is_finite() {
            return Err(Error::contract("points contain non-finite coordinates"));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for v in [
            c.in_dim,
            c.out_dim,
            c.num_subnets,
            c.layers_per_subnet,
            c.neurons_per_layer,
        ] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        w.write_all(&[u8::from(c.skip_connections), c.activation.code()])?;
        for s in &c.scales {
            w.write_all(&s.to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a network checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let num_subnets = read_u32(&mut r)? as usize;
        let layers_per_subnet = read_u32(&mut r)? as usize;
        let neurons_per_layer = read_u32(&mut r)? as usize;
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let activation = Activation::from_code(flags[1])
            .ok_or_else(|| Error::Format(format!("unknown activation code {}", flags[1])))?;
        let scales = (0..num_subnets)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        let config = NetConfig {
            num_subnets,
            layers_per_subnet,
            neurons_per_layer,
            scales,
            in_dim,
            out_dim,
            skip_connections: flags[0] != 0,
            activation,
        };
        config.validate()?;
        let count = read_u64(&mut r)? as usize;
        if count != config.param_count() {
            return Err(Error::Format(format!(
                "checkpoint holds {count} parameters but its configuration needs {}",
                config.param_count()
            )));
        }
        let params = (0..count)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(config, params)
    }

    pub fn save_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(f))
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MSSIREN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
