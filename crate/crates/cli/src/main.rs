use std::error::Error as StdError;
use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cohdec::code::{Lattice, Syndrome};
use cohdec::decode::{class_amplitudes, decode_amplitudes};
use cohdec::exper::{
    collapse_fit, crossing_estimate, oracle_check, parse_angle, read_scaling_csv, run_sweep, sample_key, summarize,
    CollapseBox, SweepConfig, SweepPoint,
};
use cohdec::isotns::{apply_errors, build_isotns, sample_syndrome, SamplerOptions};

type CliResult<T> = Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "cohdec", version, about = "Surface-code syndrome sampling and tensor-network decoding under coherent errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw syndromes from the corrupted code state.
    Sample(Common),
    /// Contract class amplitudes for given syndromes.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Hex syndrome (plaquettes row-major, then stars row-major); repeatable.
        #[arg(long = "syndrome")]
        syndromes: Vec<String>,
        /// File with one hex syndrome per line, or a CSV with a `syndrome` column.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a parameter sweep and write per-sample rows.
    Sweep {
        /// `key = value` config file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-size-scaling collapse and pairwise crossings.
    Collapse {
        /// Sweep summary CSV, or a CSV with columns theta, l, df, sigma.
        #[arg(long)]
        input: PathBuf,
        /// Use dF_Z instead of dF_X.
        #[arg(long)]
        z: bool,
        #[arg(long, default_value = "0.05pi")]
        theta_c_min: String,
        #[arg(long, default_value = "0.2pi")]
        theta_c_max: String,
        #[arg(long, default_value_t = 0.5)]
        nu_min: f64,
        #[arg(long, default_value_t = 5.0)]
        nu_max: f64,
    },
    /// Compare contracted amplitudes with the statevector oracle on a small code.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-9)]
        max_err: f64,
    },
}

/// Shared physics and run flags. Angles accept radians or `0.1pi`.
#[derive(Args, Default)]
struct Common {
    /// Error model: x, x-xx or xyz-xx.
    #[arg(long)]
    model: Option<String>,
    /// Rotation angle (comma list or a:b:n range for sweeps).
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// XX angle, or `theta` to tie it to theta.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nx: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ny: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nz: Option<String>,
    /// X component of the rotation (xyz-xx).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "theta")]
    theta_x: Option<String>,
    /// Y component of the rotation (xyz-xx).
    #[arg(long, allow_hyphen_values = true)]
    theta_y: Option<String>,
    /// Code width (comma list for sweeps).
    #[arg(long)]
    lx: Option<String>,
    #[arg(long)]
    ly: Option<String>,
    /// Alias of --lx used with --aspect.
    #[arg(long, conflicts_with = "lx")]
    l: Option<String>,
    /// Ly = aspect * Lx.
    #[arg(long)]
    aspect: Option<String>,
    #[arg(long)]
    chi: Option<String>,
    /// Relative singular-value cutoff.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Logical initial state: plus or zero.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit per-step contraction entanglement.
    #[arg(long)]
    trace: bool,
    /// Leave the wall-time column empty (byte-reproducible sweeps).
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn apply(&self, cfg: &mut SweepConfig) -> CliResult<()> {
        let pairs = [
            ("model", &self.model),
            ("theta", &self.theta),
            ("theta", &self.theta_x),
            ("theta-y", &self.theta_y),
            ("phi", &self.phi),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("nz", &self.nz),
            ("lx", &self.lx),
            ("lx", &self.l),
            ("ly", &self.ly),
            ("aspect", &self.aspect),
            ("chi", &self.chi),
            ("tol", &self.tol),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("init", &self.init),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.trace |= self.trace;
        if self.no_timing {
            cfg.timing = false;
        }
        Ok(())
    }

    fn config(&self) -> CliResult<SweepConfig> {
        let mut cfg = SweepConfig::default();
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

/// The single point a non-sweep command works on.
fn single_point(cfg: &SweepConfig) -> CliResult<SweepPoint> {
    let pts = cfg.points()?;
    if pts.len() != 1 {
        return Err(format!("expected a single parameter point, got {}", pts.len()).into());
    }
    for w in pts[0].model.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(pts[0])
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn cmd_sample(common: &Common) -> CliResult<()> {
    let cfg = common.config()?;
    cfg.validate()?;
    let p = single_point(&cfg)?;
    let tns = apply_errors(&build_isotns(&Lattice::new(p.lx, p.ly)?), &p.model);
    let opts = SamplerOptions::new(cfg.chi, cfg.tol);
    let mut w = csv::Writer::from_writer(output(cfg.out.as_deref())?);
    w.write_record(["sample", "rng_key", "syndrome", "syndrome_weight", "log_prob", "retries", "max_bond", "max_discarded"])?;
    for s in 0..cfg.samples {
        let rec = sample_syndrome(&tns, &opts, sample_key(cfg.seed, 0, s))?;
        w.write_record([
            s.to_string(),
            rec.rng_key.to_string(),
            rec.syndrome.to_hex(),
            rec.syndrome.weight().to_string(),
            num(rec.log_prob),
            rec.retries.to_string(),
            rec.chi_max_reached.to_string(),
            num(rec.max_discarded_weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_syndromes(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    if first.split(',').any(|h| h.trim() == "syndrome") {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let col = rd.headers()?.iter().position(|h| h == "syndrome").expect("checked above");
        let mut out = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if let Some(h) = rec.get(col).filter(|h| !h.is_empty()) {
                out.push(h.to_string());
            }
        }
        return Ok(out);
    }
    Ok(io::BufReader::new(text.as_bytes())
        .lines()
        .map_while(Result::ok)
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn cmd_decode(common: &Common, syndromes: &[String], input: Option<&Path>) -> CliResult<()> {
    let cfg = common.config()?;
    cfg.validate()?;
    let p = single_point(&cfg)?;
    let lat = Lattice::new(p.lx, p.ly)?;
    let mut hexes = syndromes.to_vec();
    if let Some(path) = input {
        hexes.extend(read_syndromes(path)?);
    }
    if hexes.is_empty() {
        return Err("no syndromes given (use --syndrome or --input)".into());
    }
    let mut w = csv::Writer::from_writer(output(cfg.out.as_deref())?);
    let mut head: Vec<String> = vec!["syndrome".into()];
    for lab in ["00", "10", "01", "11"] {
        head.push(format!("ln_abs_z{lab}"));
        head.push(format!("arg_z{lab}"));
    }
    for c in [
        "chosen_class", "df_x_re", "df_x_mod", "df_z_re", "df_z_mod", "success_prob", "coeff0_re", "coeff0_im", "coeff1_re",
        "coeff1_im", "steady_s", "contraction_max_bond", "contraction_max_discarded",
    ] {
        head.push(c.into());
    }
    w.write_record(&head)?;
    let mut trace: Option<csv::Writer<Box<dyn Write>>> = None;
    if cfg.trace {
        let sink: Box<dyn Write> = match &cfg.out {
            Some(o) => Box::new(BufWriter::new(fs::File::create(sidecar(o, ".trace.csv"))?)),
            None => Box::new(io::stderr()),
        };
        let mut t = csv::Writer::from_writer(sink);
        t.write_record(["syndrome", "class", "step", "layer", "y", "entropy", "max_bond", "discarded"])?;
        trace = Some(t);
    }
    for hex in &hexes {
        let s = Syndrome::from_hex(&lat, hex)?;
        let amps = class_amplitudes(&p.model, &lat, &s, cfg.chi, cfg.tol)?;
        let d = decode_amplitudes(&amps, cfg.init)?;
        let mut r = vec![hex.clone()];
        for (x, z) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            match amps.labels.iter().position(|l| l.x == x && l.z == z) {
                Some(i) => r.extend([num(amps.log_z[i].re), num(amps.log_z[i].im)]),
                None => r.extend([String::new(), String::new()]),
            }
        }
        r.push(d.chosen_class.name(p.model.kind));
        r.extend([num(d.df_x.real), num(d.df_x.modulus)]);
        match d.df_z {
            Some(f) => r.extend([num(f.real), num(f.modulus)]),
            None => r.extend([String::new(), String::new()]),
        }
        r.push(num(d.success_prob_contrib));
        for c in [d.post_coeffs.0, d.post_coeffs.1] {
            r.extend([num(c.re), num(c.im)]);
        }
        r.push(num(d.steady_entropy));
        r.push(amps.traces.iter().map(|t| t.max_bond()).max().unwrap_or(1).to_string());
        r.push(num(amps.traces.iter().map(|t| t.max_discarded()).fold(0.0, f64::max)));
        w.write_record(&r)?;
        if let Some(t) = trace.as_mut() {
            for (lab, tr) in amps.labels.iter().zip(&amps.traces) {
                for (k, st) in tr.steps.iter().enumerate() {
                    t.write_record([
                        hex.clone(),
                        lab.name(p.model.kind),
                        k.to_string(),
                        st.kind.name().to_string(),
                        st.y.to_string(),
                        num(st.entropy),
                        st.max_bond.to_string(),
                        num(st.discarded),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    if let Some(mut t) = trace {
        t.flush()?;
    }
    Ok(())
}

fn cmd_sweep(config: Option<&Path>, common: &Common) -> CliResult<()> {
    let mut cfg = match config {
        Some(p) => SweepConfig::from_file(p)?,
        None => SweepConfig::default(),
    };
    common.apply(&mut cfg)?;
    if cfg.out.is_none() {
        return Err("sweep needs --out (or `out =` in the config)".into());
    }
    let rows = run_sweep(&cfg)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{:>5} {:>4} {:>4} {:>9} {:>9} {:>24} {:>24} {:>7} {:>6}", "point", "lx", "ly", "theta/pi", "phi/pi", "dF_X", "steady_S", "failed", "capped")?;
    for s in summarize(&rows) {
        let fmt = |e: Option<cohdec::exper::Estimate>| e.map(|e| format!("{:.4} ± {:.4}", e.mean, e.stderr)).unwrap_or_else(|| "-".into());
        writeln!(
            stdout,
            "{:>5} {:>4} {:>4} {:>9.4} {:>9.4} {:>24} {:>24} {:>7} {:>6}",
            s.point.index,
            s.point.lx,
            s.point.ly,
            s.point.model.theta / PI,
            s.point.model.phi / PI,
            fmt(s.df_x),
            fmt(s.steady_s),
            s.failed,
            s.capped
        )?;
    }
    Ok(())
}

fn cmd_collapse(input: &Path, z: bool, tc: (String, String), nu: (f64, f64)) -> CliResult<()> {
    let data = read_scaling_csv(input, z)?;
    let bx = CollapseBox { theta_c: (parse_angle(&tc.0)?, parse_angle(&tc.1)?), nu };
    let fit = collapse_fit(&data, &bx)?;
    println!("theta_c = {:.6} ({:.5} pi)", fit.theta_c, fit.theta_c / PI);
    println!("nu = {:.4}{}", fit.nu, if fit.nu_identifiable { "" } else { " (not identifiable)" });
    println!("residual = {:.6e} over {} pairs", fit.residual, fit.pairs);
    for c in crossing_estimate(&data)? {
        match c.theta {
            Some(t) => println!(
                "crossing L={} / L={}: theta = {:.6} ({:.5} pi){}",
                c.size_a,
                c.size_b,
                t,
                t / PI,
                if c.multiple { " [multiple]" } else { "" }
            ),
            None => println!("crossing L={} / L={}: none", c.size_a, c.size_b),
        }
    }
    Ok(())
}

fn cmd_oracle(common: &Common, max_err: f64) -> CliResult<bool> {
    let cfg = common.config()?;
    let p = single_point(&cfg)?;
    let lat = Lattice::new(p.lx, p.ly)?;
    let rep = oracle_check(&p.model, &lat, cfg.samples, cfg.seed, cfg.chi.max(1 << 12), cfg.tol.min(1e-14))?;
    let ok = rep.max_rel_err <= max_err && rep.max_weight_err <= max_err;
    println!(
        "{} on {}x{}: {} syndromes, max relative amplitude error {:.3e}, max weight error {:.3e}: {}",
        p.model.kind.name(),
        p.lx,
        p.ly,
        rep.instances,
        rep.max_rel_err,
        rep.max_weight_err,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(ok)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Sample(c) => cmd_sample(&c)?,
        Command::Decode { common, syndromes, input } => cmd_decode(&common, &syndromes, input.as_deref())?,
        Command::Sweep { config, common } => cmd_sweep(config.as_deref(), &common)?,
        Command::Collapse { input, z, theta_c_min, theta_c_max, nu_min, nu_max } => {
            cmd_collapse(&input, z, (theta_c_min, theta_c_max), (nu_min, nu_max))?
        }
        Command::OracleCheck { common, max_err } => return cmd_oracle(&common, max_err),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
