//! Flag parsing, the optional config file, and the merge between them.
//!
//! Flags always win over file values, file values over built-in defaults.
//! Resolution validates every numeric field against its subcommand's
//! preconditions before any computation starts, and the resolved job is
//! what the record hash fingerprints.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "xnet", version, about = "X-network interference alignment experiments")]
pub struct Cli {
    /// TOML file supplying defaults for any flag below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write records to this path instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Record encoding.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Master seed; every module derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    StructuredRecord,
}

/// Which construction a single-hop subcommand drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    /// Exact M x 2 alignment; needs n = 2.
    Perfect,
    /// Dual 2 x N plan built from a mirrored exact primal; needs m = 2.
    Reciprocal,
    /// Partial alignment at --order n, any shape.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HopSchemeArg {
    Perfect,
    General,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact total-DoF outerbound of the M x N message region.
    Outerbound {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Remove the diagonal messages before optimizing.
        #[arg(long)]
        null_diag: bool,
    },
    /// Construct a beamforming plan and report its stream accounting.
    Build {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Alignment order; required for --kind general.
        #[arg(long)]
        order: Option<u32>,
    },
    /// Build, zero-force and check alignment; exit 1 on failure.
    Verify {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        order: Option<u32>,
        /// Relative residual ceiling.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Measure sum rates over an SNR sweep and fit the DoF slope.
    Slope {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        order: Option<u32>,
        /// SNR points in dB; the slope uses the first and last.
        #[arg(long, value_delimiter = ',')]
        rho_db: Option<Vec<f64>>,
        /// Monte-Carlo trials per SNR point.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run the delayed 2 x 2 schedule and report its throughput.
    Delay {
        /// Four slot delays, row-major by (receiver, transmitter).
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<u64>>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Compose a two-hop relay scheme and report the end-to-end DoF.
    Relay {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        scheme: Option<HopSchemeArg>,
        /// Alignment order; required for --scheme general.
        #[arg(long)]
        order: Option<u32>,
    },
    /// Run the acceptance battery; table on stderr, records on stdout.
    Suite,
}

/// Config file counterpart of the flags. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub kind: Option<String>,
    pub scheme: Option<String>,
    pub order: Option<u32>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub rho_db: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub delays: Option<Vec<u64>>,
    pub horizon: Option<u64>,
    pub null_diag: Option<bool>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

pub fn load_file(path: &PathBuf) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        field: "config",
        msg: e.to_string(),
    })
}

/// Settings shared by every subcommand.
#[derive(Debug)]
pub struct Common {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// A fully resolved, validated experiment.
#[derive(Debug)]
pub enum Job {
    Outerbound {
        m: usize,
        n: usize,
        null_diag: bool,
    },
    Build {
        m: usize,
        n: usize,
        kind: KindArg,
        order: Option<u32>,
    },
    Verify {
        m: usize,
        n: usize,
        kind: KindArg,
        order: Option<u32>,
        tol: f64,
    },
    Slope {
        m: usize,
        n: usize,
        kind: KindArg,
        order: Option<u32>,
        rho_db: Vec<f64>,
        trials: usize,
    },
    Delay {
        delays: [[u64; 2]; 2],
        horizon: u64,
    },
    Relay {
        m: usize,
        k: usize,
        scheme: HopSchemeArg,
        order: Option<u32>,
    },
    Suite,
}

fn err(field: &'static str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field,
        msg: msg.into(),
    }
}

fn require<T>(flag: Option<T>, file: Option<T>, field: &'static str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| err(field, "required (flag or config file)"))
}

fn kind_from_file(s: &str) -> Result<KindArg, CliError> {
    match s {
        "perfect" => Ok(KindArg::Perfect),
        "reciprocal" => Ok(KindArg::Reciprocal),
        "general" => Ok(KindArg::General),
        other => Err(err("kind", format!("unknown kind {other:?}"))),
    }
}

fn scheme_from_file(s: &str) -> Result<HopSchemeArg, CliError> {
    match s {
        "perfect" => Ok(HopSchemeArg::Perfect),
        "general" => Ok(HopSchemeArg::General),
        other => Err(err("scheme", format!("unknown scheme {other:?}"))),
    }
}

fn format_from_file(s: &str) -> Result<Format, CliError> {
    match s {
        "csv" => Ok(Format::Csv),
        "structured-record" => Ok(Format::StructuredRecord),
        other => Err(err("format", format!("unknown format {other:?}"))),
    }
}

fn check_network(m: usize, n: usize) -> Result<(), CliError> {
    if m < 1 {
        return Err(err("m", "need at least one transmitter"));
    }
    if n < 1 {
        return Err(err("n", "need at least one receiver"));
    }
    Ok(())
}

/// Kind-specific shape and order rules shared by build/verify/slope.
fn check_kind(
    m: usize,
    n: usize,
    kind: KindArg,
    order: Option<u32>,
) -> Result<Option<u32>, CliError> {
    check_network(m, n)?;
    match kind {
        KindArg::Perfect => {
            if n != 2 {
                return Err(err("kind", format!("perfect needs n = 2, got n = {n}")));
            }
            if order.is_some() {
                return Err(err("order", "only meaningful for kind general"));
            }
            Ok(None)
        }
        KindArg::Reciprocal => {
            if m != 2 {
                return Err(err("kind", format!("reciprocal needs m = 2, got m = {m}")));
            }
            if order.is_some() {
                return Err(err("order", "only meaningful for kind general"));
            }
            Ok(None)
        }
        KindArg::General => {
            let o = order.ok_or_else(|| err("order", "required for kind general"))?;
            if o < 1 {
                return Err(err("order", "must be at least 1"));
            }
            Ok(Some(o))
        }
    }
}

/// Merge flags with the config file and validate everything.
pub fn resolve(cli: Cli) -> Result<(Common, Job), CliError> {
    let file = match &cli.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let file_format = file.format.as_deref().map(format_from_file).transpose()?;
    let common = Common {
        seed: cli.seed.or(file.seed).unwrap_or(1),
        output: cli.output.or(file.output),
        format: cli.format.or(file_format).unwrap_or(Format::Csv),
    };
    let file_kind = file.kind.as_deref().map(kind_from_file).transpose()?;
    let file_scheme = file.scheme.as_deref().map(scheme_from_file).transpose()?;

    let job = match cli.command {
        Command::Outerbound { m, n, null_diag } => {
            let m = require(m, file.m, "m")?;
            let n = require(n, file.n, "n")?;
            check_network(m, n)?;
            Job::Outerbound {
                m,
                n,
                null_diag: null_diag || file.null_diag.unwrap_or(false),
            }
        }
        Command::Build { m, n, kind, order } => {
            let m = require(m, file.m, "m")?;
            let n = require(n, file.n, "n")?;
            let kind = require(kind, file_kind, "kind")?;
            let order = check_kind(m, n, kind, order.or(file.order))?;
            Job::Build { m, n, kind, order }
        }
        Command::Verify {
            m,
            n,
            kind,
            order,
            tol,
        } => {
            let m = require(m, file.m, "m")?;
            let n = require(n, file.n, "n")?;
            let kind = require(kind, file_kind, "kind")?;
            let order = check_kind(m, n, kind, order.or(file.order))?;
            let tol = tol.or(file.tol).unwrap_or(1e-9);
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(err("tol", "must be a positive finite number"));
            }
            Job::Verify {
                m,
                n,
                kind,
                order,
                tol,
            }
        }
        Command::Slope {
            m,
            n,
            kind,
            order,
            rho_db,
            trials,
        } => {
            let m = require(m, file.m, "m")?;
            let n = require(n, file.n, "n")?;
            let kind = require(kind, file_kind, "kind")?;
            let order = check_kind(m, n, kind, order.or(file.order))?;
            let rho_db = rho_db.or(file.rho_db).unwrap_or_else(|| vec![40.0, 60.0]);
            if rho_db.len() < 2 {
                return Err(err("rho_db", "need at least two SNR points"));
            }
            if rho_db.windows(2).any(|w| w[1] <= w[0]) {
                return Err(err("rho_db", "points must be strictly increasing"));
            }
            let (lo, hi) = (rho_db[0], *rho_db.last().expect("nonempty"));
            if lo < 30.0 || hi < lo + 20.0 {
                return Err(err(
                    "rho_db",
                    "slope needs the first point >= 30 dB and a span >= 20 dB",
                ));
            }
            let trials = trials.or(file.trials).unwrap_or(200);
            if trials < 1 {
                return Err(err("trials", "must be at least 1"));
            }
            Job::Slope {
                m,
                n,
                kind,
                order,
                rho_db,
                trials,
            }
        }
        Command::Delay { delays, horizon } => {
            let flat = delays
                .or(file.delays)
                .unwrap_or_else(|| vec![0, 1, 0, 2]);
            if flat.len() != 4 {
                return Err(err("delays", format!("need 4 values, got {}", flat.len())));
            }
            let delays = [[flat[0], flat[1]], [flat[2], flat[3]]];
            if !xnet::delay_tdma::validate_delays(&delays) {
                return Err(err(
                    "delays",
                    "residues mod 3 must be (0,1) at receiver 1 and (0,2) at receiver 2",
                ));
            }
            let horizon = horizon.or(file.horizon).unwrap_or(300);
            if horizon == 0 || horizon % xnet::delay_tdma::PERIOD != 0 {
                return Err(err("horizon", "must be a positive multiple of 3"));
            }
            Job::Delay { delays, horizon }
        }
        Command::Relay {
            m,
            k,
            scheme,
            order,
        } => {
            let m = require(m, file.m, "m")?;
            let k = require(k, file.k, "k")?;
            if m < 1 {
                return Err(err("m", "need at least one end node per side"));
            }
            if k < 1 {
                return Err(err("k", "need at least one relay"));
            }
            let scheme = require(scheme, file_scheme, "scheme")?;
            let order = order.or(file.order);
            let order = match scheme {
                HopSchemeArg::Perfect => {
                    if order.is_some() {
                        return Err(err("order", "only meaningful for scheme general"));
                    }
                    if m != 2 && k != 2 {
                        return Err(err(
                            "scheme",
                            "perfect hops need 2 nodes on one side (m = 2 or k = 2)",
                        ));
                    }
                    None
                }
                HopSchemeArg::General => {
                    let o = order.ok_or_else(|| err("order", "required for scheme general"))?;
                    if o < 1 {
                        return Err(err("order", "must be at least 1"));
                    }
                    Some(o)
                }
            };
            Job::Relay {
                m,
                k,
                scheme,
                order,
            }
        }
        Command::Suite => Job::Suite,
    };
    Ok((common, job))
}

/// Canonical fingerprint text of the resolved computation.
///
/// Covers exactly the fields that influence the numbers (so not the
/// output path or encoding); sorted key=value pairs, space separated.
pub fn canonical(common: &Common, job: &Job) -> String {
    let mut pairs: Vec<(&'static str, String)> = vec![("seed", common.seed.to_string())];
    let command = match job {
        Job::Outerbound { m, n, null_diag } => {
            pairs.push(("m", m.to_string()));
            pairs.push(("n", n.to_string()));
            pairs.push(("null_diag", null_diag.to_string()));
            "outerbound"
        }
        Job::Build { m, n, kind, order } => {
            pairs.push(("m", m.to_string()));
            pairs.push(("n", n.to_string()));
            pairs.push(("kind", format!("{kind:?}").to_lowercase()));
            pairs.push(("order", order.map_or_else(String::new, |o| o.to_string())));
            "build"
        }
        Job::Verify {
            m,
            n,
            kind,
            order,
            tol,
        } => {
            pairs.push(("m", m.to_string()));
            pairs.push(("n", n.to_string()));
            pairs.push(("kind", format!("{kind:?}").to_lowercase()));
            pairs.push(("order", order.map_or_else(String::new, |o| o.to_string())));
            pairs.push(("tol", tol.to_string()));
            "verify"
        }
        Job::Slope {
            m,
            n,
            kind,
            order,
            rho_db,
            trials,
        } => {
            pairs.push(("m", m.to_string()));
            pairs.push(("n", n.to_string()));
            pairs.push(("kind", format!("{kind:?}").to_lowercase()));
            pairs.push(("order", order.map_or_else(String::new, |o| o.to_string())));
            let mut points = String::new();
            for (i, p) in rho_db.iter().enumerate() {
                if i > 0 {
                    points.push(',');
                }
                let _ = write!(points, "{p}");
            }
            pairs.push(("rho_db", points));
            pairs.push(("trials", trials.to_string()));
            "slope"
        }
        Job::Delay { delays, horizon } => {
            pairs.push((
                "delays",
                format!(
                    "{},{},{},{}",
                    delays[0][0], delays[0][1], delays[1][0], delays[1][1]
                ),
            ));
            pairs.push(("horizon", horizon.to_string()));
            "delay"
        }
        Job::Relay {
            m,
            k,
            scheme,
            order,
        } => {
            pairs.push(("m", m.to_string()));
            pairs.push(("k", k.to_string()));
            pairs.push(("scheme", format!("{scheme:?}").to_lowercase()));
            pairs.push(("order", order.map_or_else(String::new, |o| o.to_string())));
            "relay"
        }
        Job::Suite => "suite",
    };
    pairs.push(("command", command.to_string()));
    pairs.sort_unstable_by_key(|(k, _)| *k);
    let mut out = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{k}={v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).expect("valid args")
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "m = 3\nn = 2\nkind = \"perfect\"\nseed = 5\n").unwrap();
        let cli = parse(&[
            "xnet",
            "build",
            "--config",
            path.to_str().unwrap(),
            "--m",
            "4",
        ]);
        let (common, job) = resolve(cli).unwrap();
        assert_eq!(common.seed, 5);
        match job {
            Job::Build { m, n, kind, .. } => {
                assert_eq!((m, n), (4, 2));
                assert_eq!(kind, KindArg::Perfect);
            }
            other => panic!("wrong job {other:?}"),
        }
    }

    #[test]
    fn missing_required_field_names_it() {
        let cli = parse(&["xnet", "build", "--m", "3"]);
        let e = resolve(cli).unwrap_err();
        assert!(e.to_string().contains("field n"), "{e}");
    }

    #[test]
    fn perfect_kind_rejects_wrong_receiver_count() {
        let cli = parse(&["xnet", "verify", "--m", "3", "--n", "3", "--kind", "perfect"]);
        let e = resolve(cli).unwrap_err();
        assert!(e.to_string().contains("field kind"), "{e}");
    }

    #[test]
    fn general_kind_requires_an_order() {
        let cli = parse(&["xnet", "build", "--m", "2", "--n", "2", "--kind", "general"]);
        let e = resolve(cli).unwrap_err();
        assert!(e.to_string().contains("field order"), "{e}");
    }

    #[test]
    fn slope_range_is_validated() {
        let cli = parse(&[
            "xnet", "slope", "--m", "2", "--n", "2", "--kind", "perfect", "--rho-db", "40,50",
        ]);
        let e = resolve(cli).unwrap_err();
        assert!(e.to_string().contains("field rho_db"), "{e}");
    }

    #[test]
    fn canonical_ignores_output_and_format() {
        let make = |fmt: Format| {
            let cli = parse(&["xnet", "outerbound", "--m", "2", "--n", "2"]);
            let (mut common, job) = resolve(cli).unwrap();
            common.format = fmt;
            canonical(&common, &job)
        };
        assert_eq!(make(Format::Csv), make(Format::StructuredRecord));
    }

    #[test]
    fn canonical_tracks_the_seed() {
        let at_seed = |seed: &str| {
            let cli = parse(&["xnet", "outerbound", "--m", "2", "--n", "2", "--seed", seed]);
            let (common, job) = resolve(cli).unwrap();
            canonical(&common, &job)
        };
        assert_ne!(at_seed("1"), at_seed("2"));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "m = 2\nbogus = 1\n").unwrap();
        let cli = parse(&["xnet", "suite", "--config", path.to_str().unwrap()]);
        let e = resolve(cli).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }
}
