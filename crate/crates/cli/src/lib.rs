//! Command-line front end for the cvqss model: key rates, variance
//! optimisation, parameter sweeps, discrimination bounds, detector checks
//! and bit-level protocol sessions.

pub mod config;
pub mod optimize;
pub mod output;
pub mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cvqss_core::constellation::build_mixed_constellation;
use cvqss_core::protocol::{decode_secret, encode_secret, run_session, BitSequence, DetectorKind, SessionConfig, SessionResult};
use cvqss_core::sdd::{enumerate_outcome_tree, monte_carlo_error_rate, MonteCarloEstimate};
use cvqss_core::security::Reconciliation;

use config::{alpha_for_variance, SimulationConfig, Variance};
use optimize::{optimize_config, ProfilePoint};
use output::{format_number, write_csv, write_json, Document, SCHEMA_VERSION};
use sweep::{alpha_for_mean_photon, run_sweep, KeyRateRow, Range, SweepParameter, SweepRows, SweepSpec};

/// Leaves written by `discriminate --tree-dump`.
pub const TREE_DUMP_LIMIT: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "cvqss", version, about = "CV quantum secret sharing with an adaptive state-discrimination detector")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON simulation config; missing fields take laboratory defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout if omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write negative rates as 0.
    #[arg(long, global = true)]
    pub clamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub distance: Option<f64>,
    /// User 1 → user 2 distance as a fraction of the total.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Modulation variance V = 2α², or `optimize`.
    #[arg(long)]
    pub variance: Option<Variance>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// dr or rr.
    #[arg(long)]
    pub reconciliation: Option<Reconciliation>,
    #[arg(long)]
    pub post_selection: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rates at one operating point.
    Keyrate(#[command(flatten)] Overrides),
    /// Optimise the modulation variance for the configured rate.
    Optimize(#[command(flatten)] Overrides),
    /// Sweep one or two parameters (`--sweep name:from:to:step`).
    Sweep {
        #[arg(long = "sweep", required = true)]
        sweeps: Vec<SweepSpec>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// SDD error probabilities against SQL, heterodyne and Helstrom.
    Bounds {
        /// Mean photon number range `from:to:step`.
        #[arg(long)]
        n_mean: Range,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Analytic and Monte Carlo error rate of the detector.
    Discriminate {
        /// Mean photon number of the received states (instead of a variance).
        #[arg(long)]
        n_mean: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Write the outcome tree (first 10000 leaves) as JSON.
        #[arg(long)]
        tree_dump: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// One bit-level session with the XOR secret split.
    Protocol {
        /// Bits per user (even).
        #[arg(long, default_value_t = 1000)]
        bits: usize,
        #[arg(long, default_value = "monte_carlo")]
        detector: DetectorKind,
        #[command(flatten)]
        overrides: Overrides,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Keyrate(_) => "keyrate",
            Command::Optimize(_) => "optimize",
            Command::Sweep { .. } => "sweep",
            Command::Bounds { .. } => "bounds",
            Command::Discriminate { .. } => "discriminate",
            Command::Protocol { .. } => "protocol",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::Keyrate(o) | Command::Optimize(o) => o,
            Command::Sweep { overrides, .. }
            | Command::Bounds { overrides, .. }
            | Command::Discriminate { overrides, .. }
            | Command::Protocol { overrides, .. } => overrides,
        }
    }
}

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(common: &CommonArgs, o: &Overrides) -> anyhow::Result<SimulationConfig> {
    let mut cfg = match &common.config {
        Some(path) => SimulationConfig::load(path)?,
        None => SimulationConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.distance {
        cfg.distance_km = v;
    }
    if let Some(v) = o.ratio {
        cfg.ratio = v;
    }
    if let Some(v) = o.variance {
        cfg.variance = v;
    }
    if let Some(v) = o.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = o.reconciliation {
        cfg.reconciliation = v;
    }
    if o.post_selection {
        cfg.post_selection = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve_config(&cli.common, cli.command.overrides())?;
    let mut sink: Box<dyn Write> = match &cli.common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let fmt = cli.common.format;
    let clamp = cli.common.clamp;
    let name = cli.command.name();

    match &cli.command {
        Command::Keyrate(_) => {
            let rows = SweepRows::KeyRate(vec![sweep::key_rate_row(&cfg)?]);
            emit_rows(&mut sink, fmt, clamp, name, &cfg, &rows)?;
        }
        Command::Optimize(_) => {
            let opt = optimize_config(&cfg)?;
            let row = KeyRateRow::new(&cfg, opt.variance, opt.value, true, opt.below_threshold, opt.rate)?;
            match fmt {
                Format::Csv => write_csv(&mut sink, &SweepRows::KeyRate(vec![row]), clamp)?,
                Format::Json => {
                    #[derive(Serialize)]
                    struct Payload<'a> {
                        result: KeyRateRow,
                        profile: &'a [ProfilePoint],
                    }
                    let payload = Payload {
                        result: row,
                        profile: &opt.profile,
                    };
                    write_json(&mut sink, &document(name, &cfg, payload))?;
                }
            }
        }
        Command::Sweep { sweeps, .. } => {
            let rows = run_sweep(&cfg, sweeps)?;
            emit_rows(&mut sink, fmt, clamp, name, &cfg, &rows)?;
        }
        Command::Bounds { n_mean, .. } => {
            let spec = SweepSpec {
                parameter: SweepParameter::MeanPhoton,
                range: *n_mean,
            };
            let rows = run_sweep(&cfg, &[spec])?;
            emit_rows(&mut sink, fmt, clamp, name, &cfg, &rows)?;
        }
        Command::Discriminate {
            n_mean,
            trials,
            tree_dump,
            ..
        } => {
            let report = discriminate(&cfg, *n_mean, *trials, tree_dump.as_deref())?;
            match fmt {
                Format::Csv => report.write_csv(&mut sink)?,
                Format::Json => write_json(&mut sink, &document(name, &cfg, report))?,
            }
        }
        Command::Protocol { bits, detector, .. } => {
            let report = protocol_session(&cfg, *bits, *detector)?;
            match fmt {
                Format::Csv => report.write_csv(&mut sink)?,
                Format::Json => write_json(&mut sink, &document(name, &cfg, report))?,
            }
        }
    }
    sink.flush()?;
    Ok(())
}

fn document<'a, T: Serialize>(command: &'a str, cfg: &'a SimulationConfig, payload: T) -> Document<'a, SimulationConfig, T> {
    Document {
        schema_version: SCHEMA_VERSION,
        command,
        config: cfg,
        payload,
    }
}

fn emit_rows<W: Write>(
    out: W,
    fmt: Format,
    clamp: bool,
    name: &str,
    cfg: &SimulationConfig,
    rows: &SweepRows,
) -> anyhow::Result<()> {
    match fmt {
        Format::Csv => write_csv(out, rows, clamp),
        Format::Json => {
            let mut rows = rows.clone();
            if clamp {
                if let SweepRows::KeyRate(rows) = &mut rows {
                    for r in rows {
                        r.rate = r.rate.max(0.0);
                        r.report.r_dr = r.report.r_dr.max(0.0);
                        r.report.r_rr = r.report.r_rr.max(0.0);
                        r.report.r_ps = r.report.r_ps.max(0.0);
                    }
                }
            }
            #[derive(Serialize)]
            struct Payload {
                rows: SweepRows,
            }
            write_json(out, &document(name, cfg, Payload { rows }))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminationReport {
    /// Mean photon number at user 2's output, before the last hop.
    pub n_mean: f64,
    pub alpha: f64,
    pub rounds: usize,
    pub p_analytic: f64,
    pub discarded_mass: f64,
    pub monte_carlo: MonteCarloEstimate,
    /// `(p_mc - p_analytic) / σ_mc`.
    pub z_score: f64,
    pub tree_leaves: usize,
}

impl DiscriminationReport {
    fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "schema_version",
            "n_mean",
            "alpha",
            "rounds",
            "p_analytic",
            "discarded_mass",
            "trials",
            "errors",
            "p_monte_carlo",
            "std_error",
            "z_score",
            "tree_leaves",
        ])?;
        w.write_record([
            SCHEMA_VERSION.to_string(),
            format_number(self.n_mean),
            format_number(self.alpha),
            self.rounds.to_string(),
            format_number(self.p_analytic),
            format_number(self.discarded_mass),
            self.monte_carlo.trials.to_string(),
            self.monte_carlo.errors.to_string(),
            format_number(self.monte_carlo.error_rate),
            format_number(self.monte_carlo.std_error),
            format_number(self.z_score),
            self.tree_leaves.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Compare the enumerated error probability with a Monte Carlo estimate.
pub fn discriminate(
    cfg: &SimulationConfig,
    n_mean: Option<f64>,
    trials: u64,
    tree_dump: Option<&Path>,
) -> anyhow::Result<DiscriminationReport> {
    let alpha = match (n_mean, cfg.variance) {
        (Some(n), _) => alpha_for_mean_photon(n, cfg)?,
        (None, Variance::Fixed(v)) => alpha_for_variance(v),
        (None, Variance::Optimize) => bail!("discriminate needs --n-mean or a fixed --variance"),
    };
    let mixed = build_mixed_constellation(alpha, &cfg.channel()?, None)?;
    let params = cfg.detector_params();
    let tree = enumerate_outcome_tree(mixed.states(), &params, &cfg.truncation)?;
    let exact = tree.error_probability();
    if let Some(path) = tree_dump {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_json(BufWriter::new(f), &tree.export(TREE_DUMP_LIMIT))?;
    }
    let mc = sweep::with_workers(|| monte_carlo_error_rate(mixed.states(), &params, &cfg.truncation, trials, cfg.seed))?;
    let z = if mc.std_error > 0.0 {
        (mc.error_rate - exact.probability) / mc.std_error
    } else {
        0.0
    };
    Ok(DiscriminationReport {
        n_mean: mixed.states().mean_photon_number() / mixed.channel().eta2(),
        alpha,
        rounds: params.rounds,
        p_analytic: exact.probability,
        discarded_mass: exact.discarded_mass,
        monte_carlo: mc,
        z_score: z,
        tree_leaves: tree.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecretCheck {
    pub secret: BitSequence,
    pub encrypted: BitSequence,
    /// Decoding with both users' keys (ideal error correction) recovers Y.
    pub reconstructed_with_both: bool,
    /// Bit disagreements when only one share is used.
    pub errors_user1_only: usize,
    pub errors_user2_only: usize,
    /// Bit disagreements when the dealer's raw keys are used.
    pub errors_raw_keys: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub alpha: f64,
    pub ber_u1: f64,
    pub ber_u2: f64,
    pub symbol_error_rate: f64,
    pub session: SessionResult,
    pub secret_check: SecretCheck,
}

impl ProtocolReport {
    fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "schema_version",
            "bits",
            "detector",
            "ber_u1",
            "ber_u2",
            "symbol_error_rate",
            "reconstructed_with_both",
            "errors_user1_only",
            "errors_user2_only",
            "errors_raw_keys",
        ])?;
        let detector = match self.session.detector {
            DetectorKind::Ideal => "ideal",
            DetectorKind::MonteCarlo => "monte_carlo",
        };
        let c = &self.secret_check;
        w.write_record([
            SCHEMA_VERSION.to_string(),
            self.session.m.to_string(),
            detector.to_string(),
            format_number(self.ber_u1),
            format_number(self.ber_u2),
            format_number(self.symbol_error_rate),
            c.reconstructed_with_both.to_string(),
            c.errors_user1_only.to_string(),
            c.errors_user2_only.to_string(),
            c.errors_raw_keys.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Run a session, then split a random secret of the same length with the
/// users' keys and check who can reconstruct it.
pub fn protocol_session(cfg: &SimulationConfig, bits: usize, detector: DetectorKind) -> anyhow::Result<ProtocolReport> {
    let variance = cfg
        .variance
        .fixed()
        .context("protocol needs a fixed --variance")?;
    let alpha = alpha_for_variance(variance);
    let session = run_session(&SessionConfig {
        alpha,
        channel: cfg.channel()?,
        detector_params: cfg.detector_params(),
        truncation: cfg.truncation,
        m: bits,
        seed: cfg.seed,
        detector,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let secret = BitSequence::random(bits, &mut rng);
    let (k1, k2) = (&session.sent_u1, &session.sent_u2);
    let encrypted = encode_secret(&secret, k1, k2)?;
    let zeros = BitSequence::zeros(bits);
    let check = SecretCheck {
        reconstructed_with_both: decode_secret(&encrypted, k1, k2)? == secret,
        errors_user1_only: decode_secret(&encrypted, k1, &zeros)?.hamming_distance(&secret)?,
        errors_user2_only: decode_secret(&encrypted, &zeros, k2)?.hamming_distance(&secret)?,
        errors_raw_keys: decode_secret(&encrypted, &session.recovered_u1, &session.recovered_u2)?
            .hamming_distance(&secret)?,
        secret,
        encrypted,
    };
    Ok(ProtocolReport {
        alpha,
        ber_u1: session.ber_u1(),
        ber_u2: session.ber_u2(),
        symbol_error_rate: session.symbol_error_rate(),
        session,
        secret_check: check,
    })
}

/// Parse `args` (including the program name) and run the command.
pub fn run_from_args<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(&Cli::try_parse_from(args)?)
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_entry() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_apply() {
        let cli = Cli::try_parse_from([
            "cvqss", "keyrate", "--distance", "35", "--variance", "2.5", "--rounds", "2", "--reconciliation", "dr",
            "--seed", "9",
        ])
        .unwrap();
        let cfg = resolve_config(&cli.common, cli.command.overrides()).unwrap();
        assert_eq!(cfg.distance_km, 35.0);
        assert_eq!(cfg.variance, Variance::Fixed(2.5));
        assert_eq!(cfg.rounds, 2);
        assert_eq!(cfg.reconciliation, Reconciliation::Dr);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(Cli::try_parse_from(["cvqss", "sweep"]).is_err());
        assert!(Cli::try_parse_from(["cvqss", "sweep", "--sweep", "distance:5:1:1"]).is_err());
        assert!(Cli::try_parse_from(["cvqss", "bounds", "--n-mean", "1:2"]).is_err());
        assert!(Cli::try_parse_from(["cvqss", "keyrate", "--format", "xml"]).is_err());
        assert!(Cli::try_parse_from(["cvqss", "protocol", "--detector", "psychic"]).is_err());
    }

    #[test]
    fn protocol_with_ideal_detector() {
        let cfg = SimulationConfig {
            variance: Variance::Fixed(2.0),
            ..SimulationConfig::default()
        };
        let r = protocol_session(&cfg, 200, DetectorKind::Ideal).unwrap();
        assert_eq!(r.ber_u1, 0.0);
        assert!(r.secret_check.reconstructed_with_both);
        assert_eq!(r.secret_check.errors_raw_keys, 0);
        // one share alone is a one-time pad away from the secret
        assert!(r.secret_check.errors_user1_only > 50 && r.secret_check.errors_user1_only < 150);
    }

    #[test]
    fn discriminate_agrees_with_enumeration() {
        let cfg = SimulationConfig {
            rounds: 2,
            ..SimulationConfig::default()
        };
        let r = discriminate(&cfg, Some(2.0), 20_000, None).unwrap();
        assert!(r.z_score.abs() < 4.0, "{r:?}");
        assert!((r.n_mean - 2.0).abs() < 1e-9);
    }
}
