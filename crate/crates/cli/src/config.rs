//! `section.key = value` run configuration with schema validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use deltapinn::geometry::BatchSizes;
use deltapinn::kernel::{KernelFamily, WidthSchedule};
use deltapinn::loss::{AdaptiveWeights, Weighting};
use deltapinn::net::{default_scales, Activation, NetConfig, CHECKPOINT_VERSION};
use deltapinn::problems::{
    barry_mercer, maxwell, poisson, BarryMercerConstants, MaxwellConstants, ProblemKind, ProblemSpec,
};
use deltapinn::train::TrainConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Every accepted key.
const KEYS: &[&str] = &[
    "format_version",
    "problem",
    "seed",
    "output.dir",
    "net.subnets",
    "net.layers",
    "net.neurons",
    "net.scales",
    "net.skip",
    "net.activation",
    "source.kernel",
    "source.alpha",
    "source.location",
    "source.schedule.first",
    "source.schedule.period",
    "batch.r0",
    "batch.r1",
    "batch.bc",
    "batch.ic",
    "weighting.mode",
    "weighting.epsilon",
    "weighting.fixed_lambdas",
    "trainer.iterations",
    "trainer.lr0",
    "trainer.milestones",
    "trainer.decay",
    "trainer.beta1",
    "trainer.beta2",
    "trainer.adam_eps",
    "trainer.eval_every",
    "trainer.checkpoint_every",
    "reference.terms",
    "reference.mesh",
    "reference.modes",
    "reference.times",
    "reference.resolution",
    "reference.courant",
    "reference.snapshots",
    "reference.stride",
    "maxwell.tau",
    "maxwell.delay",
    "maxwell.t_end",
    "barry_mercer.beta",
    "barry_mercer.eta",
    "barry_mercer.omega",
    "barry_mercer.t_end",
];

/// Where a raw value came from, for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    File { path: String, line: usize },
    Flag(&'static str),
    Override,
    Default,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag(name) => write!(f, "--{name}"),
            Origin::Override => write!(f, "--override"),
            Origin::Default => write!(f, "default"),
        }
    }
}

/// Unvalidated key/value pairs; later insertions win.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File {
                path: path.to_string(),
                line: i + 1,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}: expected `key = value`, got `{line}`"))?;
            raw.set(k.trim(), v.trim(), origin)?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("{origin}: unknown key `{key}`");
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    /// Sets `key` only if it has no value yet.
    pub fn set_default(&mut self, key: &str, value: &str) -> Result<()> {
        if self.entries.contains_key(key) {
            return Ok(());
        }
        self.set(key, value, Origin::Default)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--override expects key=value, got `{kv}`"))?;
        self.set(k.trim(), v.trim(), Origin::Override)
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("{origin}: invalid value `{v}` for `{key}`")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| anyhow!("{origin}: invalid number list `{v}` for `{key}`")),
        }
    }

    fn origin(&self, key: &str) -> String {
        self.get(key).map(|(_, o)| o.to_string()).unwrap_or_else(|| "config".into())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightingMode {
    Fixed(Vec<f64>),
    Uncertainty { epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSettings {
    pub terms: usize,
    pub mesh: usize,
    pub modes: usize,
    pub times: usize,
    pub resolution: f64,
    pub courant: f64,
    pub snapshots: Vec<f64>,
    pub stride: usize,
}

/// Fully resolved and validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub net: NetConfig,
    pub kernel: KernelFamily,
    pub alpha: f64,
    pub location: Vec<f64>,
    pub train: TrainConfig,
    pub weighting: WeightingMode,
    pub output_dir: PathBuf,
    pub reference: ReferenceSettings,
    pub maxwell: MaxwellConstants,
    pub barry_mercer: BarryMercerConstants,
}

fn activation_name(a: Activation) -> &'static str {
    a.name()
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        if let Some(v) = raw.parsed::<u32>("format_version")? {
            if v != CONFIG_FORMAT_VERSION {
                bail!("{}: unsupported config format version {v}", raw.origin("format_version"));
            }
        }
        let problem = match raw.get("problem") {
            Some((v, origin)) => {
                ProblemKind::parse(v).ok_or_else(|| anyhow!("{origin}: unknown problem `{v}`"))?
            }
            None => bail!("missing required key `problem`"),
        };
        let (in_dim, out_dim) = match problem {
            ProblemKind::Poisson => (2, 1),
            _ => (3, 3),
        };

        let mut net = NetConfig::new(in_dim, out_dim);
        let subnets = raw.parsed("net.subnets")?.unwrap_or(net.num_subnets);
        let layers = raw.parsed("net.layers")?.unwrap_or(net.layers_per_subnet);
        let neurons = raw.parsed("net.neurons")?.unwrap_or(net.neurons_per_layer);
        net = net.with_shape(subnets, layers, neurons);
        net.scales = raw.list("net.scales")?.unwrap_or_else(|| default_scales(subnets));
        net.skip_connections = raw.parsed("net.skip")?.unwrap_or(true);
        if let Some((v, origin)) = raw.get("net.activation") {
            net.activation = Activation::parse(v).ok_or_else(|| anyhow!("{origin}: unknown activation `{v}`"))?;
        }
        net.validate().with_context(|| format!("{}: invalid network settings", raw.origin("net.scales")))?;

        let kernel = match raw.get("source.kernel") {
            Some((v, origin)) => KernelFamily::parse(v).ok_or_else(|| anyhow!("{origin}: unknown kernel `{v}`"))?,
            None => KernelFamily::Gaussian,
        };
        let alpha = raw.parsed("source.alpha")?.unwrap_or(0.01);
        if !(alpha > 0.0) {
            bail!("{}: source.alpha must be positive", raw.origin("source.alpha"));
        }
        let location = match raw.list("source.location")? {
            Some(l) => l,
            None => match problem {
                ProblemKind::Poisson => poisson::SOURCE.to_vec(),
                ProblemKind::Maxwell => vec![0.0, 0.0],
                ProblemKind::BarryMercer => barry_mercer::SOURCE.to_vec(),
            },
        };
        if location.len() != 2 {
            bail!("{}: source.location needs two coordinates", raw.origin("source.location"));
        }
        let schedule = match (raw.parsed::<usize>("source.schedule.first")?, raw.parsed::<usize>("source.schedule.period")?) {
            (None, None) => None,
            (Some(first), Some(period)) => Some(
                WidthSchedule::new(alpha, first, period)
                    .with_context(|| raw.origin("source.schedule.first"))?,
            ),
            _ => bail!("source.schedule.first and source.schedule.period must be given together"),
        };

        let defaults = TrainConfig::default();
        let transient = problem != ProblemKind::Poisson;
        let batch = BatchSizes {
            r0: raw.parsed("batch.r0")?.unwrap_or(defaults.batch.r0),
            r1: raw.parsed("batch.r1")?.unwrap_or(defaults.batch.r1),
            bc: raw.parsed("batch.bc")?.unwrap_or(defaults.batch.bc),
            ic: raw.parsed("batch.ic")?.unwrap_or(if transient { defaults.batch.ic } else { 0 }),
        };
        let train = TrainConfig {
            iterations: raw.parsed("trainer.iterations")?.unwrap_or(defaults.iterations),
            lr0: raw.parsed("trainer.lr0")?.unwrap_or(defaults.lr0),
            milestones: raw.list("trainer.milestones")?.unwrap_or(defaults.milestones.clone()),
            decay: raw.parsed("trainer.decay")?.unwrap_or(defaults.decay),
            beta1: raw.parsed("trainer.beta1")?.unwrap_or(defaults.beta1),
            beta2: raw.parsed("trainer.beta2")?.unwrap_or(defaults.beta2),
            adam_eps: raw.parsed("trainer.adam_eps")?.unwrap_or(defaults.adam_eps),
            batch,
            eval_every: raw.parsed("trainer.eval_every")?.unwrap_or(defaults.eval_every),
            checkpoint_every: raw.parsed("trainer.checkpoint_every")?.unwrap_or(defaults.checkpoint_every),
            seed: raw.parsed("seed")?.unwrap_or(0),
            width_schedule: schedule,
        };
        train.validate().with_context(|| raw.origin("trainer.lr0"))?;

        let active = if transient { 4 } else { 3 };
        let mode = raw.get("weighting.mode").map(|(v, _)| v.as_str()).unwrap_or("uncertainty");
        let weighting = match mode {
            "fixed" => {
                let lambdas = raw.list("weighting.fixed_lambdas")?.unwrap_or(vec![1.0; active]);
                if lambdas.len() != active {
                    bail!(
                        "{}: weighting.fixed_lambdas needs {active} values for {}",
                        raw.origin("weighting.fixed_lambdas"),
                        problem.name()
                    );
                }
                WeightingMode::Fixed(lambdas)
            }
            "uncertainty" => {
                let epsilon: f64 = raw
                    .parsed("weighting.epsilon")?
                    .ok_or_else(|| anyhow!("missing key `weighting.epsilon` (required when weighting.mode = uncertainty)"))?;
                if !(epsilon >= 0.0) {
                    bail!("{}: weighting.epsilon must be nonnegative", raw.origin("weighting.epsilon"));
                }
                WeightingMode::Uncertainty { epsilon }
            }
            other => bail!("{}: unknown weighting.mode `{other}`", raw.origin("weighting.mode")),
        };

        let mut mx = MaxwellConstants::default();
        mx.tau = raw.parsed("maxwell.tau")?.unwrap_or(mx.tau);
        mx.delay = raw.parsed("maxwell.delay")?.unwrap_or(2.0 * mx.tau);
        mx.t_end = raw.parsed("maxwell.t_end")?.unwrap_or(mx.t_end);
        mx.validate().with_context(|| raw.origin("maxwell.tau"))?;
        let mut bm = BarryMercerConstants::default();
        bm.beta = raw.parsed("barry_mercer.beta")?.unwrap_or(bm.beta);
        bm.eta = raw.parsed("barry_mercer.eta")?.unwrap_or(bm.eta);
        bm.omega = raw.parsed("barry_mercer.omega")?.unwrap_or(bm.omega);
        bm.t_end = raw.parsed("barry_mercer.t_end")?.unwrap_or(bm.t_end);
        bm.validate().with_context(|| raw.origin("barry_mercer.beta"))?;

        let default_mesh = match problem {
            ProblemKind::BarryMercer => 41,
            _ => 101,
        };
        let reference = ReferenceSettings {
            terms: raw.parsed("reference.terms")?.unwrap_or(400),
            mesh: raw.parsed("reference.mesh")?.unwrap_or(default_mesh),
            modes: raw.parsed("reference.modes")?.unwrap_or(64),
            times: raw.parsed("reference.times")?.unwrap_or(8),
            resolution: raw.parsed("reference.resolution")?.unwrap_or(0.005),
            courant: raw.parsed("reference.courant")?.unwrap_or(0.5),
            snapshots: raw
                .list("reference.snapshots")?
                .unwrap_or_else(|| (1..=4).map(|k| mx.t_end * k as f64 / 4.0).collect()),
            stride: raw.parsed("reference.stride")?.unwrap_or(4),
        };
        if reference.terms == 0 || reference.modes == 0 || reference.stride == 0 || reference.times == 0 {
            bail!("reference.terms, modes, times and stride must be positive");
        }
        if !(reference.courant > 0.0 && reference.courant <= 1.0) {
            bail!("{}: reference.courant violates the stability bound (0, 1]", raw.origin("reference.courant"));
        }

        let output_dir = raw
            .get("output.dir")
            .map(|(v, _)| PathBuf::from(v))
            .unwrap_or_else(|| default_output_root().join(problem.name()));

        let cfg = Self {
            problem,
            net,
            kernel,
            alpha,
            location,
            train,
            weighting,
            output_dir,
            reference,
            maxwell: mx,
            barry_mercer: bm,
        };
        cfg.problem_spec().context("invalid problem settings")?;
        Ok(cfg)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let loc = self.location.clone();
        Ok(match self.problem {
            ProblemKind::Poisson => poisson::problem_at(self.kernel, self.alpha, loc)?,
            ProblemKind::Maxwell => maxwell::problem_at(self.kernel, self.alpha, self.maxwell, loc)?,
            ProblemKind::BarryMercer => barry_mercer::problem_at(self.kernel, self.alpha, self.barry_mercer, loc)?,
        })
    }

    pub fn weighting(&self) -> Result<Weighting> {
        let active = if self.problem == ProblemKind::Poisson { 3 } else { 4 };
        Ok(match &self.weighting {
            WeightingMode::Fixed(l) => Weighting::Fixed(l.clone()),
            WeightingMode::Uncertainty { epsilon } => Weighting::Uncertainty(AdaptiveWeights::new(active, *epsilon)?),
        })
    }

    /// Resolved configuration as a re-loadable config file.
    pub fn manifest(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let t = &self.train;
        let r = &self.reference;
        let _ = writeln!(s, "# deltapinn run manifest");
        let _ = writeln!(s, "# checkpoint format {CHECKPOINT_VERSION}, metrics format 1, field format 1");
        let _ = writeln!(s, "format_version = {CONFIG_FORMAT_VERSION}");
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "net.subnets = {}", self.net.num_subnets);
        let _ = writeln!(s, "net.layers = {}", self.net.layers_per_subnet);
        let _ = writeln!(s, "net.neurons = {}", self.net.neurons_per_layer);
        let _ = writeln!(s, "net.scales = {}", list(&self.net.scales));
        let _ = writeln!(s, "net.skip = {}", self.net.skip_connections);
        let _ = writeln!(s, "net.activation = {}", activation_name(self.net.activation));
        let _ = writeln!(s, "source.kernel = {}", self.kernel.name());
        let _ = writeln!(s, "source.alpha = {:?}", self.alpha);
        let _ = writeln!(s, "source.location = {}", list(&self.location));
        if let Some(ws) = &t.width_schedule {
            let _ = writeln!(s, "source.schedule.first = {}", ws.first_halving_iter);
            let _ = writeln!(s, "source.schedule.period = {}", ws.halving_period);
        }
        let _ = writeln!(s, "batch.r0 = {}", t.batch.r0);
        let _ = writeln!(s, "batch.r1 = {}", t.batch.r1);
        let _ = writeln!(s, "batch.bc = {}", t.batch.bc);
        let _ = writeln!(s, "batch.ic = {}", t.batch.ic);
        match &self.weighting {
            WeightingMode::Fixed(l) => {
                let _ = writeln!(s, "weighting.mode = fixed");
                let _ = writeln!(s, "weighting.fixed_lambdas = {}", list(l));
            }
            WeightingMode::Uncertainty { epsilon } => {
                let _ = writeln!(s, "weighting.mode = uncertainty");
                let _ = writeln!(s, "weighting.epsilon = {epsilon:?}");
            }
        }
        let _ = writeln!(s, "trainer.iterations = {}", t.iterations);
        let _ = writeln!(s, "trainer.lr0 = {:?}", t.lr0);
        let _ = writeln!(s, "trainer.milestones = {}", list(&t.milestones));
        let _ = writeln!(s, "trainer.decay = {:?}", t.decay);
        let _ = writeln!(s, "trainer.beta1 = {:?}", t.beta1);
        let _ = writeln!(s, "trainer.beta2 = {:?}", t.beta2);
        let _ = writeln!(s, "trainer.adam_eps = {:?}", t.adam_eps);
        let _ = writeln!(s, "trainer.eval_every = {}", t.eval_every);
        let _ = writeln!(s, "trainer.checkpoint_every = {}", t.checkpoint_every);
        let _ = writeln!(s, "reference.terms = {}", r.terms);
        let _ = writeln!(s, "reference.mesh = {}", r.mesh);
        let _ = writeln!(s, "reference.modes = {}", r.modes);
        let _ = writeln!(s, "reference.times = {}", r.times);
        let _ = writeln!(s, "reference.resolution = {:?}", r.resolution);
        let _ = writeln!(s, "reference.courant = {:?}", r.courant);
        let _ = writeln!(s, "reference.snapshots = {}", list(&r.snapshots));
        let _ = writeln!(s, "reference.stride = {}", r.stride);
        let _ = writeln!(s, "maxwell.tau = {:?}", self.maxwell.tau);
        let _ = writeln!(s, "maxwell.delay = {:?}", self.maxwell.delay);
        let _ = writeln!(s, "maxwell.t_end = {:?}", self.maxwell.t_end);
        let _ = writeln!(s, "barry_mercer.beta = {:?}", self.barry_mercer.beta);
        let _ = writeln!(s, "barry_mercer.eta = {:?}", self.barry_mercer.eta);
        let _ = writeln!(s, "barry_mercer.omega = {:?}", self.barry_mercer.omega);
        let _ = writeln!(s, "barry_mercer.t_end = {:?}", self.barry_mercer.t_end);
        s
    }
}

/// Root for outputs when `--out` is absent.
pub fn default_output_root() -> PathBuf {
    std::env::var_os("DELTAPINN_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Parses a time given either nondimensionally or with a unit suffix
/// (`ns`, `ps`, `s`), e.g. `2.4ns`.
pub fn parse_time(s: &str) -> Result<f64> {
    let s = s.trim();
    let (num, scale) = if let Some(v) = s.strip_suffix("ns") {
        (v, Some(1e-9))
    } else if let Some(v) = s.strip_suffix("ps") {
        (v, Some(1e-12))
    } else if let Some(v) = s.strip_suffix('s') {
        (v, Some(1.0))
    } else {
        (s, None)
    };
    let v: f64 = num.trim().parse().map_err(|_| anyhow!("invalid time `{s}`"))?;
    Ok(match scale {
        Some(k) => maxwell::nondimensional_time(v * k),
        None => v,
    })
}

pub fn parse_times(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_time).collect()
}
