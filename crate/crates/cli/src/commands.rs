//! `train`, `eval` and `reference` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use deltapinn::kernel::KernelFamily;
use deltapinn::loss::{Weighting, TERM_NAMES};
use deltapinn::net::MsSirenNet;
use deltapinn::problems::{BarryMercerConstants, MaxwellConstants, ProblemKind};
use deltapinn::reference::barry_mercer_series::{barry_mercer_mesh, BarryMercerSeries};
use deltapinn::reference::fdtd::{fdtd_run, subsample, Boundary, FdtdConfig};
use deltapinn::reference::poisson_series::{poisson_mesh, poisson_series};
use deltapinn::reference::{relative_l2, L2Error, ReferenceField};
use deltapinn::tensor::Tensor;
use deltapinn::train::{train, write_metrics_header, MetricsRecord, Observer};

use crate::config::{RawConfig, RunConfig};

/// Writes the metrics stream and checkpoints into the run directory.
struct RunObserver {
    dir: PathBuf,
    metrics: BufWriter<File>,
    progress_every: usize,
}

impl Observer for RunObserver {
    fn record(&mut self, r: &MetricsRecord) -> deltapinn::Result<()> {
        writeln!(self.metrics, "{}", r.csv_line())?;
        if r.l2.is_some() || (self.progress_every > 0 && r.iter.is_multiple_of(self.progress_every)) {
            self.metrics.flush()?;
            let total: f64 = r.terms.iter().flatten().sum();
            let l2 = r.l2.as_ref().map(|e| format!(" l2 {:.4e}", e.mean)).unwrap_or_default();
            eprintln!("iter {:>7} loss {total:.4e}{l2}", r.iter);
        }
        Ok(())
    }

    fn checkpoint(&mut self, iter: usize, net: &MsSirenNet, weighting: &Weighting) -> deltapinn::Result<()> {
        net.save_file(self.dir.join(format!("checkpoint-{iter:07}.bin")))?;
        fs::write(self.dir.join(format!("weights-{iter:07}.txt")), weights_text(weighting))?;
        Ok(())
    }
}

fn weights_text(weighting: &Weighting) -> String {
    match weighting {
        Weighting::Fixed(l) => format!("fixed {l:?}\n"),
        Weighting::Uncertainty(a) => {
            let mut s = format!("epsilon {:?}\n", a.epsilon);
            for (i, w) in a.w.iter().enumerate() {
                s += &format!("w{i} {w:?} sigma2 {:?}\n", a.sigma2(i));
            }
            s
        }
    }
}

/// Builds the configuration from a file, dedicated flags and overrides, in
/// increasing precedence.
pub fn load_config(
    file: Option<&Path>,
    problem: Option<&str>,
    seed: Option<u64>,
    out: Option<&Path>,
    overrides: &[String],
    defaults: &[(&str, &str)],
) -> Result<RunConfig> {
    let mut raw = match file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RawConfig::parse(&text, &p.display().to_string())?
        }
        None => RawConfig::default(),
    };
    if let Some(p) = problem {
        raw.set("problem", p, crate::config::Origin::Flag("problem"))?;
    }
    if let Some(s) = seed {
        raw.set("seed", &s.to_string(), crate::config::Origin::Flag("seed"))?;
    }
    if let Some(o) = out {
        raw.set("output.dir", &o.display().to_string(), crate::config::Origin::Flag("out"))?;
    }
    for kv in overrides {
        raw.apply_override(kv)?;
    }
    for (k, v) in defaults {
        raw.set_default(k, v)?;
    }
    RunConfig::from_raw(&raw)
}

/// Reference field used for evaluation.
pub fn build_reference(cfg: &RunConfig) -> Result<ReferenceField> {
    let r = &cfg.reference;
    let loc = [cfg.location[0], cfg.location[1]];
    Ok(match cfg.problem {
        ProblemKind::Poisson => {
            poisson_series(&poisson_mesh(r.mesh, loc)?, loc, r.terms)?.with_meta("mesh", r.mesh)
        }
        ProblemKind::BarryMercer => {
            let mut s = BarryMercerSeries::new(cfg.barry_mercer, r.modes)?;
            s.source = loc;
            s.field(&barry_mercer_mesh(r.mesh, r.times, cfg.barry_mercer.t_end)?)?
                .with_meta("mesh", r.mesh)
                .with_meta("times", r.times)
        }
        ProblemKind::Maxwell => fdtd_reference(
            &FdtdConfig {
                resolution: r.resolution,
                courant: r.courant,
                boundary: Boundary::Mur,
                kernel: cfg.kernel,
                alpha: cfg.alpha,
                source_location: loc,
                pulse: Some(cfg.maxwell),
            },
            &r.snapshots,
            r.stride,
        )?,
    })
}

fn fdtd_reference(fc: &FdtdConfig, times: &[f64], stride: usize) -> Result<ReferenceField> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let snaps = fdtd_run(fc, t_end, times)?;
    let parts = snaps.iter().map(|s| subsample(s, stride)).collect::<deltapinn::Result<Vec<_>>>()?;
    let actual: Vec<String> = snaps.iter().map(|s| s.meta("t").unwrap_or("").to_string()).collect();
    let mut field = ReferenceField::concat(&parts)?;
    field.meta = vec![
        ("generator".into(), "fdtd".into()),
        ("resolution".into(), fc.resolution.to_string()),
        ("courant".into(), fc.courant.to_string()),
        ("stride".into(), stride.to_string()),
        ("t".into(), actual.join(" ")),
    ];
    Ok(field)
}

pub struct TrainSummary {
    pub dir: PathBuf,
    pub final_record: MetricsRecord,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("manifest.cfg"), cfg.manifest())?;
    let mut problem = cfg.problem_spec()?;
    let net = MsSirenNet::init(cfg.net.clone(), cfg.train.seed)?;
    let reference = if cfg.train.eval_every > 0 {
        let r = build_reference(cfg).context("building the evaluation reference")?;
        r.write_file(dir.join("reference.csv"))?;
        Some(r)
    } else {
        None
    };
    let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    write_metrics_header(&mut metrics)?;
    let mut observer = RunObserver {
        dir: dir.clone(),
        metrics,
        progress_every: (cfg.train.iterations / 20).max(1),
    };
    let result = train(
        &mut problem,
        net,
        cfg.weighting()?,
        &cfg.train,
        reference.as_ref(),
        &mut observer,
    );
    observer.metrics.flush()?;
    let outcome = result.with_context(|| format!("training aborted; partial outputs kept in {}", dir.display()))?;
    outcome.net.save_file(dir.join("checkpoint.bin"))?;
    fs::write(dir.join("weights.txt"), weights_text(&outcome.weighting))?;
    if let Some(r) = &reference {
        r.predict(&outcome.net)?.write_file(dir.join("prediction.csv"))?;
    }
    let final_record = outcome.metrics.last().cloned().context("training produced no metrics")?;
    Ok(TrainSummary { dir, final_record })
}

pub fn print_train_summary(s: &TrainSummary) {
    let r = &s.final_record;
    println!("run directory: {}", s.dir.display());
    for (name, v) in TERM_NAMES.iter().zip(r.terms) {
        if let Some(v) = v {
            println!("loss_{name} = {v:.6e}");
        }
    }
    if let Some(e) = &r.l2 {
        print_l2(e);
    }
}

fn print_l2(e: &L2Error) {
    println!("l2_mean = {:.6e}", e.mean);
    for (i, c) in e.components.iter().enumerate() {
        println!("l2_c{} = {c:.6e}", i + 1);
    }
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub reference: Option<&'a Path>,
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<L2Error> {
    let net = MsSirenNet::load_file(args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let problem = cfg.problem_spec()?;
    if net.in_dim() != problem.in_dim() || net.out_dim() != problem.out_dim() {
        bail!(
            "checkpoint network maps {} -> {} values but {} needs {} -> {}",
            net.in_dim(),
            net.out_dim(),
            problem.name(),
            problem.in_dim(),
            problem.out_dim()
        );
    }
    let reference = match args.reference {
        Some(p) => ReferenceField::read_file(p, problem.in_dim())
            .with_context(|| format!("reading reference {}", p.display()))?,
        None => build_reference(cfg)?,
    };
    let mut prediction = reference.predict(&net)?;
    if let Some(t) = reference.meta("t") {
        prediction = prediction.with_meta("t", t);
    }
    let err = relative_l2(&prediction, &reference)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    prediction.write_file(dir.join("prediction.csv"))?;
    if args.reference.is_none() {
        reference.write_file(dir.join("reference.csv"))?;
    }
    let abs: Vec<f64> = prediction
        .values
        .data()
        .iter()
        .zip(reference.values.data())
        .map(|(p, r)| (p - r).abs())
        .collect();
    let mut error_field = reference.with_values(Tensor::new(reference.values.shape().to_vec(), abs)?)?;
    error_field.meta = vec![("generator".into(), "abs-error".into())];
    error_field.write_file(dir.join("abs_error.csv"))?;
    let mut summary = format!("l2_mean = {:e}\n", err.mean);
    for (i, c) in err.components.iter().enumerate() {
        summary += &format!("l2_c{} = {c:e}\n", i + 1);
    }
    fs::write(dir.join("summary.txt"), summary)?;
    Ok(err)
}

pub fn print_eval(e: &L2Error) {
    print_l2(e);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceKind {
    Fdtd,
    PoissonSeries,
    BarryMercerSeries,
}

impl ReferenceKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fdtd" => Some(Self::Fdtd),
            "poisson-series" => Some(Self::PoissonSeries),
            "barry-mercer-series" => Some(Self::BarryMercerSeries),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fdtd => "fdtd",
            Self::PoissonSeries => "poisson-series",
            Self::BarryMercerSeries => "barry-mercer-series",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceArgs {
    pub kind: ReferenceKind,
    pub terms: usize,
    pub mesh: Option<usize>,
    pub modes: usize,
    pub times: usize,
    pub resolution: f64,
    pub courant: f64,
    pub t_end: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
    pub stride: usize,
    pub kernel: KernelFamily,
    pub alpha: f64,
    pub boundary: Boundary,
    pub out: PathBuf,
}

/// Writes the requested reference fields and returns the file paths.
pub fn cmd_reference(a: &ReferenceArgs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut written = Vec::new();
    match a.kind {
        ReferenceKind::PoissonSeries => {
            let x0 = deltapinn::problems::poisson::SOURCE;
            let mesh = a.mesh.unwrap_or(101);
            let f = poisson_series(&poisson_mesh(mesh, x0)?, x0, a.terms)?.with_meta("mesh", mesh);
            let p = a.out.join("poisson-series.csv");
            f.write_file(&p)?;
            written.push(p);
        }
        ReferenceKind::BarryMercerSeries => {
            let c = BarryMercerConstants::default();
            let mesh = a.mesh.unwrap_or(41);
            let s = BarryMercerSeries::new(c, a.modes)?;
            let f = s.field(&barry_mercer_mesh(mesh, a.times, c.t_end)?)?.with_meta("mesh", mesh);
            let p = a.out.join("barry-mercer-series.csv");
            f.write_file(&p)?;
            written.push(p);
        }
        ReferenceKind::Fdtd => {
            let fc = FdtdConfig {
                resolution: a.resolution,
                courant: a.courant,
                boundary: a.boundary,
                kernel: a.kernel,
                alpha: a.alpha,
                source_location: [0.0, 0.0],
                pulse: Some(MaxwellConstants::default()),
            };
            fc.validate()?;
            let snapshots = a.snapshots.clone().unwrap_or_else(|| vec![a.t_end.unwrap_or(fc.pulse.unwrap().t_end)]);
            let t_end = a.t_end.unwrap_or_else(|| snapshots.iter().cloned().fold(0.0, f64::max));
            for (k, snap) in fdtd_run(&fc, t_end, &snapshots)?.iter().enumerate() {
                let p = a.out.join(format!("fdtd-{k}.csv"));
                subsample(snap, a.stride)?.write_file(&p)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
