//! Batch sweeps, CSV emission and finite-size-scaling analysis.
//!
//! A sweep is the Cartesian product `sizes x theta x theta_y x phi`, each
//! point sampled `samples` times. Sample `s` of point `p` draws its
//! randomness from `RngKey::new(seed, (p << 32) | s)`, so rows never depend
//! on the worker count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::code::{ErrorModel, Lattice, LogicalInit, ModelKind};
use crate::decode::{decode_syndrome, mean_stderr, ClassLabel, ContractionTrace, DecodeResult};
use crate::error::{Error, Result};
use crate::isotns::{apply_errors, build_isotns, sample_syndrome, IsoTns, SampleRecord, SamplerOptions};
use crate::rng::RngKey;
use crate::C64;

/// Bumped whenever the column set or order of the sample CSV changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Second-angle grid.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiGrid {
    Values(Vec<f64>),
    /// `phi = theta` at every point.
    TiedToTheta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub model: ModelKind,
    /// Rotation angles; for `xyz-xx` with `theta_y` set these are `theta_x`.
    pub theta: Vec<f64>,
    /// Y components for the coupled model; empty means "use `axis`".
    pub theta_y: Vec<f64>,
    pub phi: PhiGrid,
    pub axis: [f64; 3],
    pub lx: Vec<usize>,
    /// `Ly = aspect * Lx` unless `ly` is fixed.
    pub aspect: usize,
    pub ly: Option<usize>,
    pub chi: usize,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub init: LogicalInit,
    pub out: Option<PathBuf>,
    /// Write per-step entanglement to `<out>.trace.csv`.
    pub trace: bool,
    /// Fill the `wall_s` column; off for byte-reproducible output.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::XXx,
            theta: vec![0.1 * PI],
            theta_y: Vec::new(),
            phi: PhiGrid::TiedToTheta,
            axis: [1.0, 0.0, 0.0],
            lx: vec![4],
            aspect: 4,
            ly: None,
            chi: 128,
            tol: 1e-10,
            samples: 10,
            seed: 1,
            init: LogicalInit::Plus,
            out: None,
            trace: false,
            timing: true,
        }
    }
}

/// Parses an angle: a number in radians, or a multiple of pi written
/// `0.1pi` / `0.1π` / `pi`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || Error::Invalid(format!("bad angle {s:?}"));
    let scaled = t.strip_suffix("pi").or_else(|| t.strip_suffix('π'));
    match scaled {
        Some(m) => {
            let m = m.trim().trim_end_matches('*');
            if m.is_empty() {
                Ok(PI)
            } else {
                m.parse::<f64>().map(|v| v * PI).map_err(|_| bad())
            }
        }
        None => t.parse::<f64>().map_err(|_| bad()),
    }
}

/// Comma list of angles; an item `a:b:n` expands to `n` evenly spaced values.
pub fn parse_angle_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [one] => out.push(parse_angle(one)?),
            [a, b, n] => {
                let (a, b) = (parse_angle(a)?, parse_angle(b)?);
                let n: usize = n.trim().parse().map_err(|_| Error::Invalid(format!("bad count in {item:?}")))?;
                if n == 0 {
                    return Err(Error::Invalid(format!("empty range {item:?}")));
                }
                for k in 0..n {
                    out.push(if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 });
                }
            }
            _ => return Err(Error::Invalid(format!("bad angle range {item:?}"))),
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Invalid(format!("bad value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("bad boolean {v:?} for {key}"))),
    }
}

impl SweepConfig {
    /// Sets one key. Keys match the long CLI flags without dashes
    /// (`theta-x` and `l` are aliases of `theta` and `lx`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "model" => self.model = ModelKind::parse(v)?,
            "theta" | "theta-x" | "theta_x" => self.theta = parse_angle_list(v)?,
            "theta-y" | "theta_y" => self.theta_y = parse_angle_list(v)?,
            "phi" => {
                self.phi = if v == "theta" { PhiGrid::TiedToTheta } else { PhiGrid::Values(parse_angle_list(v)?) };
            }
            "nx" => self.axis[0] = parse_num(key, v)?,
            "ny" => self.axis[1] = parse_num(key, v)?,
            "nz" => self.axis[2] = parse_num(key, v)?,
            "axis" => {
                let c: Vec<f64> = v.split(',').map(|x| parse_num(key, x)).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Invalid("axis needs three components".into()));
                }
                self.axis = [c[0], c[1], c[2]];
            }
            "lx" | "l" => {
                self.lx = v.split(',').filter(|x| !x.trim().is_empty()).map(|x| parse_num(key, x)).collect::<Result<_>>()?;
            }
            "ly" => self.ly = Some(parse_num(key, v)?),
            "aspect" => self.aspect = parse_num(key, v)?,
            "chi" => self.chi = parse_num(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "samples" => self.samples = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "init" => self.init = LogicalInit::parse(v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "trace" => self.trace = parse_bool(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            other => return Err(Error::Invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Err(Error::Invalid(format!("empty {name} grid")));
        if self.theta.is_empty() {
            return empty("theta");
        }
        if matches!(&self.phi, PhiGrid::Values(v) if v.is_empty()) {
            return empty("phi");
        }
        if self.lx.is_empty() {
            return empty("size");
        }
        if self.samples == 0 {
            return Err(Error::Invalid("samples must be at least 1".into()));
        }
        if self.aspect == 0 {
            return Err(Error::Invalid("aspect must be at least 1".into()));
        }
        if self.chi < 2 {
            return Err(Error::Invalid("chi must be at least 2".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Invalid("tol must be non-negative".into()));
        }
        if !self.theta_y.is_empty() && self.model != ModelKind::GeneralXx {
            return Err(Error::Invalid("theta-y requires the xyz-xx model".into()));
        }
        for p in self.points()? {
            Lattice::new(p.lx, p.ly)?;
        }
        Ok(())
    }

    /// Points in canonical order: size, then theta, theta_y, phi.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let ty: Vec<Option<f64>> = if self.theta_y.is_empty() { vec![None] } else { self.theta_y.iter().map(|&t| Some(t)).collect() };
        let mut out = Vec::new();
        for &lx in &self.lx {
            let ly = self.ly.unwrap_or(self.aspect * lx);
            for &th in &self.theta {
                for &y in &ty {
                    let phis = match &self.phi {
                        PhiGrid::TiedToTheta => vec![th],
                        PhiGrid::Values(v) => v.clone(),
                    };
                    for ph in phis {
                        let phi = if self.model == ModelKind::XOnly { 0.0 } else { ph };
                        let model = match (self.model, y) {
                            (ModelKind::GeneralXx, Some(y)) => ErrorModel::from_components(th, y, phi)?,
                            (kind, _) => ErrorModel::new(kind, th, phi, self.axis)?,
                        };
                        out.push(SweepPoint { index: out.len(), lx, ly, model });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub lx: usize,
    pub ly: usize,
    pub model: ErrorModel,
}

/// The random stream of one sample.
pub fn sample_key(seed: u64, point: usize, sample: usize) -> RngKey {
    RngKey::new(seed, ((point as u64) << 32) | sample as u64)
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub record: SampleRecord,
    pub labels: Vec<ClassLabel>,
    pub log_z: Vec<C64>,
    pub decode: DecodeResult,
    pub contraction_max_bond: usize,
    pub contraction_max_discarded: f64,
    /// Entanglement traces of every class, kept only when requested.
    pub traces: Option<Vec<ContractionTrace>>,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub sample: usize,
    pub key: RngKey,
    pub chi: usize,
    pub tol: f64,
    pub init: LogicalInit,
    pub wall_s: Option<f64>,
    /// Error text for a failed sample.
    pub outcome: std::result::Result<SampleOutcome, String>,
}

impl SweepRow {
    pub fn ok(&self) -> Option<&SampleOutcome> {
        self.outcome.as_ref().ok()
    }
}

/// Samples one syndrome and decodes it.
pub fn run_sample(
    point: &SweepPoint,
    tns: &IsoTns,
    chi: usize,
    tol: f64,
    init: LogicalInit,
    key: RngKey,
    keep_traces: bool,
) -> Result<SampleOutcome> {
    let record = sample_syndrome(tns, &SamplerOptions::new(chi, tol), key)?;
    let lat = tns.lattice();
    let (amps, decode) = decode_syndrome(&point.model, lat, &record.syndrome, chi, tol, init)?;
    Ok(SampleOutcome {
        contraction_max_bond: amps.traces.iter().map(|t| t.max_bond()).max().unwrap_or(1),
        contraction_max_discarded: amps.traces.iter().map(|t| t.max_discarded()).fold(0.0, f64::max),
        labels: amps.labels,
        log_z: amps.log_z,
        decode,
        traces: keep_traces.then_some(amps.traces),
        record,
    })
}

/// Runs every `(point, sample)` task on the rayon pool. Rows come back in
/// canonical `(point, sample)` order.
pub fn run_sweep_rows(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = cfg.points()?;
    let networks: Vec<IsoTns> = points
        .iter()
        .map(|p| Ok(apply_errors(&build_isotns(&Lattice::new(p.lx, p.ly)?), &p.model)))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.samples).map(move |s| (p, s))).collect();
    let rows = tasks
        .par_iter()
        .map(|&(p, s)| {
            let key = sample_key(cfg.seed, p, s);
            let start = Instant::now();
            let outcome = run_sample(&points[p], &networks[p], cfg.chi, cfg.tol, cfg.init, key, cfg.trace).map_err(|e| e.to_string());
            SweepRow {
                point: points[p],
                sample: s,
                key,
                chi: cfg.chi,
                tol: cfg.tol,
                init: cfg.init,
                wall_s: cfg.timing.then(|| start.elapsed().as_secs_f64()),
                outcome,
            }
        })
        .collect();
    Ok(rows)
}

/// Column names of the sample CSV, in order.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "schema", "point", "sample", "model", "theta", "phi", "nx", "ny", "nz", "lx", "ly", "chi", "tol", "init", "rng_key",
        "status", "syndrome", "syndrome_weight", "log_prob", "retries",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for lab in ["00", "10", "01", "11"] {
        h.push(format!("ln_abs_z{lab}"));
        h.push(format!("arg_z{lab}"));
    }
    for c in [
        "chosen_class", "df_x_re", "df_x_mod", "df_x_capped", "df_z_re", "df_z_mod", "df_z_capped", "success_prob",
        "coeff0_re", "coeff0_im", "coeff1_re", "coeff1_im", "steady_s", "sampler_max_bond", "sampler_max_discarded",
        "contraction_max_bond", "contraction_max_discarded", "wall_s",
    ] {
        h.push(c.to_string());
    }
    h
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// One CSV record, aligned with [`csv_header`].
pub fn csv_record(row: &SweepRow) -> Vec<String> {
    let p = &row.point;
    let m = &p.model;
    let mut r = vec![
        CSV_SCHEMA_VERSION.to_string(),
        p.index.to_string(),
        row.sample.to_string(),
        m.kind.name().to_string(),
        num(m.theta),
        num(m.phi),
        num(m.axis[0]),
        num(m.axis[1]),
        num(m.axis[2]),
        p.lx.to_string(),
        p.ly.to_string(),
        row.chi.to_string(),
        num(row.tol),
        row.init.name().to_string(),
        row.key.to_string(),
    ];
    let wall = row.wall_s.map(num).unwrap_or_default();
    match &row.outcome {
        Err(msg) => {
            r.push(format!("error: {msg}"));
            let blanks = csv_header().len() - r.len() - 1;
            r.extend(std::iter::repeat_n(String::new(), blanks));
        }
        Ok(o) => {
            let d = &o.decode;
            r.push("ok".into());
            r.push(o.record.syndrome.to_hex());
            r.push(o.record.syndrome.weight().to_string());
            r.push(num(o.record.log_prob));
            r.push(o.record.retries.to_string());
            for (x, z) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                match o.labels.iter().position(|l| l.x == x && l.z == z) {
                    Some(i) => {
                        r.push(num(o.log_z[i].re));
                        r.push(num(o.log_z[i].im));
                    }
                    None => r.extend([String::new(), String::new()]),
                }
            }
            r.push(d.chosen_class.name(m.kind));
            r.push(num(d.df_x.real));
            r.push(num(d.df_x.modulus));
            r.push(u8::from(d.df_x.capped).to_string());
            match d.df_z {
                Some(f) => r.extend([num(f.real), num(f.modulus), u8::from(f.capped).to_string()]),
                None => r.extend([String::new(), String::new(), String::new()]),
            }
            r.push(num(d.success_prob_contrib));
            for c in [d.post_coeffs.0, d.post_coeffs.1] {
                r.push(num(c.re));
                r.push(num(c.im));
            }
            r.push(num(d.steady_entropy));
            r.push(o.record.chi_max_reached.to_string());
            r.push(num(o.record.max_discarded_weight));
            r.push(o.contraction_max_bond.to_string());
            r.push(num(o.contraction_max_discarded));
        }
    }
    r.push(wall);
    r
}

pub fn write_rows<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(csv_header()).map_err(csv_err)?;
    for row in rows {
        out.write_record(csv_record(row)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-step contraction entropies of every class.
pub fn write_traces<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["point", "sample", "class", "step", "layer", "y", "entropy", "max_bond", "discarded"]).map_err(csv_err)?;
    for row in rows {
        let Some(o) = row.ok() else { continue };
        let Some(traces) = &o.traces else { continue };
        for (lab, tr) in o.labels.iter().zip(traces) {
            for (k, st) in tr.steps.iter().enumerate() {
                out.write_record([
                    row.point.index.to_string(),
                    row.sample.to_string(),
                    lab.name(row.point.model.kind),
                    k.to_string(),
                    st.kind.name().to_string(),
                    st.y.to_string(),
                    num(st.entropy),
                    st.max_bond.to_string(),
                    num(st.discarded),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs the sweep and writes `out`, plus `out.summary.csv` and, with
/// tracing on, `out.trace.csv`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let path = cfg.out.clone().ok_or_else(|| Error::Invalid("sweep needs an output path".into()))?;
    // Fail on an unwritable path before spending compute.
    let file = fs::File::create(&path)?;
    let rows = run_sweep_rows(cfg)?;
    write_rows(&rows, std::io::BufWriter::new(file))?;
    write_summary(&summarize(&rows), std::io::BufWriter::new(fs::File::create(sidecar(&path, ".summary.csv"))?))?;
    if cfg.trace {
        write_traces(&rows, std::io::BufWriter::new(fs::File::create(sidecar(&path, ".trace.csv"))?))?;
    }
    Ok(rows)
}

/// Mean and standard error, or `None` without samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Option<Self> {
        mean_stderr(xs).ok().map(|(mean, stderr)| Self { mean, stderr, count: xs.len() })
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4} (n={})", self.mean, self.stderr, self.count)
    }
}

/// Aggregates of one sweep point. `filtered` drops failed samples and
/// capped free energies; `all` keeps capped values at the sentinel.
#[derive(Clone, Debug)]
pub struct PointSummary {
    pub point: SweepPoint,
    pub samples: usize,
    pub failed: usize,
    pub capped: usize,
    pub df_x: Option<Estimate>,
    pub df_x_all: Option<Estimate>,
    pub df_z: Option<Estimate>,
    pub df_z_all: Option<Estimate>,
    pub steady_s: Option<Estimate>,
    pub fidelity: Option<Estimate>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut groups: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.point.index).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let ok: Vec<&SampleOutcome> = g.iter().filter_map(|r| r.ok()).collect();
            let df_x_all: Vec<f64> = ok.iter().map(|o| o.decode.df_x.modulus).collect();
            let df_x: Vec<f64> = ok.iter().filter(|o| !o.decode.df_x.capped).map(|o| o.decode.df_x.modulus).collect();
            let dz: Vec<_> = ok.iter().filter_map(|o| o.decode.df_z).collect();
            let df_z_all: Vec<f64> = dz.iter().map(|f| f.modulus).collect();
            let df_z: Vec<f64> = dz.iter().filter(|f| !f.capped).map(|f| f.modulus).collect();
            let capped = ok.iter().filter(|o| o.decode.df_x.capped || o.decode.df_z.is_some_and(|f| f.capped)).count();
            PointSummary {
                point: g[0].point,
                samples: g.len(),
                failed: g.len() - ok.len(),
                capped,
                df_x: Estimate::of(&df_x),
                df_x_all: Estimate::of(&df_x_all),
                df_z: Estimate::of(&df_z),
                df_z_all: Estimate::of(&df_z_all),
                steady_s: Estimate::of(&ok.iter().map(|o| o.decode.steady_entropy).collect::<Vec<_>>()),
                fidelity: Estimate::of(&ok.iter().map(|o| o.decode.success_prob_contrib).collect::<Vec<_>>()),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(sums: &[PointSummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["point", "model", "theta", "phi", "nx", "ny", "nz", "lx", "ly", "samples", "failed", "capped"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for q in ["df_x", "df_x_all", "df_z", "df_z_all", "steady_s", "fidelity"] {
        head.push(format!("{q}_mean"));
        head.push(format!("{q}_stderr"));
    }
    out.write_record(&head).map_err(csv_err)?;
    for s in sums {
        let m = &s.point.model;
        let mut r = vec![
            s.point.index.to_string(),
            m.kind.name().into(),
            num(m.theta),
            num(m.phi),
            num(m.axis[0]),
            num(m.axis[1]),
            num(m.axis[2]),
            s.point.lx.to_string(),
            s.point.ly.to_string(),
            s.samples.to_string(),
            s.failed.to_string(),
            s.capped.to_string(),
        ];
        for e in [s.df_x, s.df_x_all, s.df_z, s.df_z_all, s.steady_s, s.fidelity] {
            match e {
                Some(e) => r.extend([num(e.mean), num(e.stderr)]),
                None => r.extend([String::new(), String::new()]),
            }
        }
        out.write_record(&r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One `(theta, L, dF, sigma)` observation for scaling analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPoint {
    pub theta: f64,
    pub size: f64,
    pub value: f64,
    pub sigma: f64,
}

/// Search box of the collapse fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseBox {
    pub theta_c: (f64, f64),
    pub nu: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseFit {
    pub theta_c: f64,
    pub nu: f64,
    pub residual: f64,
    /// Number of interpolated pairs behind the residual at the optimum.
    pub pairs: usize,
    /// False when the residual barely depends on `nu` or the optimum sits on the box edge.
    pub nu_identifiable: bool,
    /// `(theta_c, nu, residual)` on the coarse grid.
    pub grid: Vec<(f64, f64, f64)>,
}

fn by_size(data: &[ScalingPoint]) -> Vec<(f64, Vec<ScalingPoint>)> {
    let mut groups: Vec<(f64, Vec<ScalingPoint>)> = Vec::new();
    for d in data {
        match groups.iter_mut().find(|g| g.0 == d.size) {
            Some(g) => g.1.push(*d),
            None => groups.push((d.size, vec![*d])),
        }
    }
    for g in &mut groups {
        g.1.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups
}

/// Linear interpolation of `(x, y, sigma)` at `x0`, `None` outside the data.
fn interpolate(pts: &[(f64, f64, f64)], x0: f64) -> Option<(f64, f64)> {
    let k = pts.windows(2).position(|w| w[0].0 <= x0 && x0 <= w[1].0)?;
    let (a, b) = (pts[k], pts[k + 1]);
    let t = if b.0 > a.0 { (x0 - a.0) / (b.0 - a.0) } else { 0.0 };
    Some((a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2)))
}

/// Collapse residual at `(theta_c, nu)` and the number of pairs used.
///
/// Each point is compared with the local linear interpolation of every
/// other size at the same scaled abscissa `x = (theta - theta_c) L^{1/nu}`;
/// the residual is the mean of `(y - y')^2 / (sigma^2 + sigma'^2)`.
pub fn collapse_residual(data: &[ScalingPoint], theta_c: f64, nu: f64) -> (f64, usize) {
    let groups = by_size(data);
    let scaled: Vec<Vec<(f64, f64, f64)>> = groups
        .iter()
        .map(|(l, pts)| pts.iter().map(|p| ((p.theta - theta_c) * l.powf(1.0 / nu), p.value, p.sigma)).collect())
        .collect();
    let floor = 1e-12;
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, gi) in scaled.iter().enumerate() {
        for (j, gj) in scaled.iter().enumerate() {
            if i == j {
                continue;
            }
            for &(x, y, s) in gi {
                if let Some((yj, sj)) = interpolate(gj, x) {
                    sum += (y - yj).powi(2) / (s * s + sj * sj).max(floor);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        (f64::INFINITY, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Derivative-free minimization of `f` over a box (Nelder-Mead, clamped).
fn nelder_mead(f: &dyn Fn(f64, f64) -> f64, start: (f64, f64), step: (f64, f64), bx: &CollapseBox) -> (f64, f64, f64) {
    let clamp = |p: (f64, f64)| (p.0.clamp(bx.theta_c.0, bx.theta_c.1), p.1.clamp(bx.nu.0, bx.nu.1));
    let eval = |p: (f64, f64)| {
        let p = clamp(p);
        (p, f(p.0, p.1))
    };
    let mut s = [eval(start), eval((start.0 + step.0, start.1)), eval((start.0, start.1 + step.1))];
    for _ in 0..400 {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = ((s[2].0 .0 - s[0].0 .0) / step.0).abs() + ((s[2].0 .1 - s[0].0 .1) / step.1).abs();
        if spread < 1e-7 {
            break;
        }
        let c = ((s[0].0 .0 + s[1].0 .0) / 2.0, (s[0].0 .1 + s[1].0 .1) / 2.0);
        let along = |t: f64| (c.0 + t * (s[2].0 .0 - c.0), c.1 + t * (s[2].0 .1 - c.1));
        let r = eval(along(-1.0));
        if r.1 < s[0].1 {
            let e = eval(along(-2.0));
            s[2] = if e.1 < r.1 { e } else { r };
        } else if r.1 < s[1].1 {
            s[2] = r;
        } else {
            let k = eval(along(0.5));
            if k.1 < s[2].1 {
                s[2] = k;
            } else {
                let b = s[0].0;
                for v in &mut s[1..] {
                    *v = eval(((v.0 .0 + b.0) / 2.0, (v.0 .1 + b.1) / 2.0));
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    (s[0].0 .0, s[0].0 .1, s[0].1)
}

/// Fits `dF = f((theta - theta_c) L^{1/nu})`: coarse grid over the box,
/// then Nelder-Mead from the best grid point.
pub fn collapse_fit(data: &[ScalingPoint], bx: &CollapseBox) -> Result<CollapseFit> {
    let groups = by_size(data);
    if groups.len() < 2 {
        return Err(Error::Invalid("collapse needs at least two system sizes".into()));
    }
    if let Some(g) = groups.iter().find(|g| g.1.len() < 4) {
        return Err(Error::Invalid(format!("size {} has fewer than four theta points", g.0)));
    }
    if data.iter().any(|d| !d.theta.is_finite() || !d.value.is_finite() || !(d.sigma >= 0.0) || !(d.size > 0.0)) {
        return Err(Error::NonFinite("collapse data".into()));
    }
    if !(bx.theta_c.0 < bx.theta_c.1 && 0.0 < bx.nu.0 && bx.nu.0 < bx.nu.1) {
        return Err(Error::Invalid("empty collapse search box".into()));
    }
    let f = |t: f64, n: f64| collapse_residual(data, t, n).0;
    let steps = 40;
    let mut grid = Vec::with_capacity((steps + 1) * (steps + 1));
    for a in 0..=steps {
        let t = bx.theta_c.0 + (bx.theta_c.1 - bx.theta_c.0) * a as f64 / steps as f64;
        for b in 0..=steps {
            let n = bx.nu.0 + (bx.nu.1 - bx.nu.0) * b as f64 / steps as f64;
            grid.push((t, n, f(t, n)));
        }
    }
    let best = grid.iter().copied().min_by(|a, b| a.2.total_cmp(&b.2)).expect("grid is nonempty");
    if !best.2.is_finite() {
        return Err(Error::Invalid("no overlap between sizes anywhere in the search box".into()));
    }
    let step = ((bx.theta_c.1 - bx.theta_c.0) / steps as f64, (bx.nu.1 - bx.nu.0) / steps as f64);
    let (theta_c, nu, residual) = nelder_mead(&f, (best.0, best.1), step, bx);
    let (_, pairs) = collapse_residual(data, theta_c, nu);
    // Residual profile along nu at the fitted theta_c.
    let profile: Vec<f64> = (0..=steps).map(|b| f(theta_c, bx.nu.0 + (bx.nu.1 - bx.nu.0) * b as f64 / steps as f64)).collect();
    let pmax = profile.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let flat = pmax - residual <= 0.1 * residual.max(1e-300);
    let edge = (nu - bx.nu.0).abs() < 1e-3 * (bx.nu.1 - bx.nu.0) || (bx.nu.1 - nu).abs() < 1e-3 * (bx.nu.1 - bx.nu.0);
    Ok(CollapseFit { theta_c, nu, residual, pairs, nu_identifiable: !flat && !edge, grid })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub size_a: f64,
    pub size_b: f64,
    /// First sign change of `dF_b - dF_a`, `None` when the curves never cross.
    pub theta: Option<f64>,
    /// More than one sign change inside the overlap.
    pub multiple: bool,
}

/// Pairwise crossings of the piecewise-linear curves `dF_L(theta)`.
pub fn crossing_estimate(data: &[ScalingPoint]) -> Result<Vec<Crossing>> {
    let groups = by_size(data);
    if groups.len() < 2 {
        return Err(Error::Invalid("crossings need at least two system sizes".into()));
    }
    let curves: Vec<Vec<(f64, f64, f64)>> = groups.iter().map(|g| g.1.iter().map(|p| (p.theta, p.value, 0.0)).collect()).collect();
    let mut out = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let (ca, cb) = (&curves[a], &curves[b]);
            let mut xs: Vec<f64> = ca.iter().chain(cb.iter()).map(|p| p.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let diffs: Vec<(f64, f64)> = xs
                .iter()
                .filter_map(|&x| Some((x, interpolate(cb, x)?.0 - interpolate(ca, x)?.0)))
                .collect();
            let mut found = Vec::new();
            for w in diffs.windows(2) {
                let ((x0, d0), (x1, d1)) = (w[0], w[1]);
                if d0 == 0.0 {
                    found.push(x0);
                } else if d0 * d1 < 0.0 {
                    found.push(x0 + (x1 - x0) * d0 / (d0 - d1));
                }
            }
            if let Some(&(x, d)) = diffs.last() {
                if d == 0.0 && diffs.len() > 1 {
                    found.push(x);
                }
            }
            found.dedup();
            out.push(Crossing { size_a: groups[a].0, size_b: groups[b].0, theta: found.first().copied(), multiple: found.len() > 1 });
        }
    }
    Ok(out)
}

/// Scaling points of `dF_X` (or `dF_Z`) from point summaries, with `L = Lx`.
pub fn scaling_points(sums: &[PointSummary], z_defect: bool) -> Vec<ScalingPoint> {
    sums.iter()
        .filter_map(|s| {
            let e = if z_defect { s.df_z } else { s.df_x }?;
            Some(ScalingPoint { theta: s.point.model.theta, size: s.point.lx as f64, value: e.mean, sigma: e.stderr })
        })
        .collect()
}

/// Reads `(theta, L, dF, sigma)` from a CSV with those four named columns
/// (`theta`, `l`, `df`, `sigma`), or from a sweep summary file.
pub fn read_scaling_csv(path: &Path, z_defect: bool) -> Result<Vec<ScalingPoint>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let head = rd.headers().map_err(csv_err)?.clone();
    let col = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| head.iter().position(|h| h == *n))
            .ok_or_else(|| Error::Invalid(format!("missing column {}", names[0])))
    };
    let q = if z_defect { "df_z" } else { "df_x" };
    let (ct, cl) = (col(&["theta"])?, col(&["l", "lx"])?);
    let cv = col(&["df", &format!("{q}_mean")])?;
    let cs = col(&["sigma", &format!("{q}_stderr")])?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        if f(cv).is_empty() {
            continue;
        }
        out.push(ScalingPoint {
            theta: parse_num("theta", f(ct))?,
            size: parse_num("l", f(cl))?,
            value: parse_num("df", f(cv))?,
            sigma: parse_num("sigma", f(cs))?,
        });
    }
    Ok(out)
}

/// Least-squares line `y = a + b x`; returns `(slope, slope_stderr)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::Invalid("a slope error needs at least three points".into()));
    }
    let nf = n as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / nf, ys.iter().sum::<f64>() / nf);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("degenerate abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Ok((b, (rss / (nf - 2.0) / sxx).sqrt()))
}

/// Error-weighted line through `(x, y ± sigma)`; returns `(slope, stderr)`.
/// The error is inflated by `sqrt(chi2 / dof)` when the points scatter more
/// than their error bars allow.
pub fn weighted_slope(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n || sigmas.len() != n {
        return Err(Error::Invalid("a slope error needs at least three points".into()));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Invalid("weighted fit needs positive error bars".into()));
    }
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("degenerate abscissae".into()));
    }
    let b = xs.iter().zip(ys).zip(&w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum::<f64>() / sxx;
    let a = my - b * mx;
    let chi2: f64 = xs.iter().zip(ys).zip(&w).map(|((x, y), w)| w * (y - a - b * x).powi(2)).sum();
    let scale = (chi2 / (n as f64 - 2.0)).max(1.0);
    Ok((b, (scale / sxx).sqrt()))
}

/// Agreement between contracted and statevector class amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub instances: usize,
    /// Largest `|Z_tn - Z_exact| / max_class |Z_exact|`.
    pub max_rel_err: f64,
    /// Largest relative deviation of `sum |Z|^2` from the syndrome
    /// probability averaged over the logical basis states.
    pub max_weight_err: f64,
}

/// Draws `instances` syndromes from the exact Born distribution of the
/// corrupted `|+>` state and compares every class amplitude with the
/// statevector oracle.
pub fn oracle_check(model: &ErrorModel, lat: &Lattice, instances: usize, seed: u64, chi: usize, tol: f64) -> Result<OracleReport> {
    use crate::code::{exact_class_amplitudes, exact_corrupt, exact_logical_state, exact_syndrome_distribution};
    use crate::decode::class_amplitudes;
    use crate::rbim::straight_gauge;
    let psi = exact_corrupt(lat, &exact_logical_state(lat, LogicalInit::Plus)?, model)?;
    let dist: Vec<_> = exact_syndrome_distribution(lat, &psi)?.into_iter().collect();
    let zero = exact_corrupt(lat, &exact_logical_state(lat, LogicalInit::Zero)?, model)?;
    let (xbar, _) = crate::code::logicals(lat);
    let one = exact_corrupt(lat, &exact_logical_state(lat, LogicalInit::Zero)?.apply_pauli(&xbar)?, model)?;
    let (d0, d1) = (exact_syndrome_distribution(lat, &zero)?, exact_syndrome_distribution(lat, &one)?);
    let mut report = OracleReport { instances, max_rel_err: 0.0, max_weight_err: 0.0 };
    for k in 0..instances {
        let u = RngKey::new(seed, k as u64).stream().uniform();
        let mut acc = 0.0;
        let (s, _) = dist.iter().find(|(_, p)| {
            acc += p;
            acc > u
        }).unwrap_or(&dist[dist.len() - 1]);
        let (rx, rz, _) = straight_gauge(lat, s)?;
        let exact = exact_class_amplitudes(lat, model, s, &rx, &rz)?;
        let amps = class_amplitudes(model, lat, s, chi, tol)?;
        let got = amps.matrix();
        let scale = exact.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        for l in &amps.labels {
            let (a, b) = (l.x as usize, l.z as usize);
            report.max_rel_err = report.max_rel_err.max((got[a][b] - exact[a][b]).norm() / scale);
        }
        let p = 0.5 * (d0.get(s).copied().unwrap_or(0.0) + d1.get(s).copied().unwrap_or(0.0));
        let w = amps.log_total_weight().exp();
        report.max_weight_err = report.max_weight_err.max((w - p).abs() / p);
    }
    Ok(report)
}
