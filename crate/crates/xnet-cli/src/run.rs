//! Subcommand bodies: compute, stamp every record with the config hash
//! and master seed, render, write to the chosen sink.
//!
//! Computation failures (rank breakdowns, unverified plans) are results,
//! not aborts: they emit a diagnostic record and map to exit code 1.
//! Only config and i/o problems surface as `CliError`.

use std::io::Write as _;

use num::ToPrimitive;

use xnet::channel::{extend, sample_channel, ExtendedChannel, DEFAULT_H_MAX, DEFAULT_H_MIN};
use xnet::delay_tdma::{
    collision_slots, per_message_throughput, simulate, throughput, DelaySchedule,
};
use xnet::dof_region::{region_constraints, solve_lp, DofRegionSpec};
use xnet::link_sim::{db_to_linear, dof_slope, sum_rate};
use xnet::relay_chain::{compose_sampled, relay_dof, HopScheme};
use xnet::schemes::{
    achieved_dof, build_2xm_reciprocal, build_general, build_mx2, compute_zero_forcing,
    general_extension_len, verify_plan, BeamformingPlan,
};
use xnet::{seeds, suite};

use crate::config::{self, Cli, HopSchemeArg, Job, KindArg};
use crate::emit::{render, Record};
use crate::CliError;

/// Plans must verify at this residual before a slope is measured.
const SLOPE_GATE_TOL: f64 = 1e-9;

pub fn execute(cli: Cli) -> Result<bool, CliError> {
    let (common, job) = config::resolve(cli)?;
    let hash = format!("{:016x}", seeds::fnv1a(&config::canonical(&common, &job)));
    let stamp = Stamp {
        command: command_name(&job),
        hash,
        seed: common.seed,
    };
    let (records, pass) = dispatch(&stamp, &job);
    let bytes = render(&records, common.format);
    match &common.output {
        Some(path) => std::fs::write(path, &bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?,
    }
    Ok(pass)
}

fn command_name(job: &Job) -> &'static str {
    match job {
        Job::Outerbound { .. } => "outerbound",
        Job::Build { .. } => "build",
        Job::Verify { .. } => "verify",
        Job::Slope { .. } => "slope",
        Job::Delay { .. } => "delay",
        Job::Relay { .. } => "relay",
        Job::Suite => "suite",
    }
}

/// Reproducibility prefix every record starts with.
struct Stamp {
    command: &'static str,
    hash: String,
    seed: u64,
}

impl Stamp {
    fn record(&self) -> Record {
        Record::new()
            .field("command", self.command)
            .field("config", &self.hash)
            .field("seed", self.seed)
    }

    fn diagnostic(&self, msg: &str) -> (Vec<Record>, bool) {
        (vec![self.record().field("error", msg)], false)
    }
}

fn dispatch(stamp: &Stamp, job: &Job) -> (Vec<Record>, bool) {
    match job {
        Job::Outerbound { m, n, null_diag } => run_outerbound(stamp, *m, *n, *null_diag),
        Job::Build { m, n, kind, order } => run_build(stamp, *m, *n, *kind, *order),
        Job::Verify {
            m,
            n,
            kind,
            order,
            tol,
        } => run_verify(stamp, *m, *n, *kind, *order, *tol),
        Job::Slope {
            m,
            n,
            kind,
            order,
            rho_db,
            trials,
        } => run_slope(stamp, *m, *n, *kind, *order, rho_db, *trials),
        Job::Delay { delays, horizon } => run_delay(stamp, *delays, *horizon),
        Job::Relay {
            m,
            k,
            scheme,
            order,
        } => run_relay(stamp, *m, *k, *scheme, *order),
        Job::Suite => run_suite(stamp),
    }
}

fn run_outerbound(stamp: &Stamp, m: usize, n: usize, null_diag: bool) -> (Vec<Record>, bool) {
    let spec = if null_diag {
        let side = m.min(n);
        DofRegionSpec::with_null_mask(m, n, (1..=side).map(|i| (i, i)))
    } else {
        DofRegionSpec::single_antenna(m, n)
    };
    let lp = match region_constraints(&spec) {
        Ok(lp) => lp,
        Err(e) => return stamp.diagnostic(&e.to_string()),
    };
    let sol = match solve_lp(&lp) {
        Ok(sol) => sol,
        Err(e) => return stamp.diagnostic(&e.to_string()),
    };
    let rec = stamp
        .record()
        .field("m", m)
        .field("n", n)
        .field("null_diag", null_diag)
        .field("dof_bound", sol.value);
    (vec![rec], true)
}

fn kind_label(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Perfect => "perfect",
        KindArg::Reciprocal => "reciprocal",
        KindArg::General => "general",
    }
}

fn order_label(order: Option<u32>) -> String {
    order.map_or_else(String::new, |o| o.to_string())
}

/// Build the requested plan on a freshly sampled channel.
///
/// The master seed splits into one stream for the channel draw and one
/// for the beam directions. `zero_force` adds the decode rows, which the
/// reciprocal kind carries by construction.
fn construct(
    m: usize,
    n: usize,
    kind: KindArg,
    order: Option<u32>,
    seed: u64,
    zero_force: bool,
) -> Result<(BeamformingPlan, ExtendedChannel), String> {
    let chan_seed = seeds::derive(seed, "channel");
    let beam_seed = seeds::derive(seed, "beams");
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let (plan, ext) = match kind {
        KindArg::Perfect => {
            let mu = m + 1;
            let proc = sample_channel(m, 2, mu, chan_seed, DEFAULT_H_MIN, DEFAULT_H_MAX)
                .map_err(|e| err(&e))?;
            let ext = extend(&proc, 0, mu).map_err(|e| err(&e))?;
            let plan = build_mx2(&ext, beam_seed).map_err(|e| err(&e))?;
            (plan, ext)
        }
        KindArg::Reciprocal => {
            // Build the exact construction on the mirrored N x 2 network,
            // then swap beam and decode roles.
            let mu = n + 1;
            let proc = sample_channel(n, 2, mu, chan_seed, DEFAULT_H_MIN, DEFAULT_H_MAX)
                .map_err(|e| err(&e))?;
            let primal_ext = extend(&proc, 0, mu).map_err(|e| err(&e))?;
            let primal = build_mx2(&primal_ext, beam_seed)
                .and_then(|p| compute_zero_forcing(p, &primal_ext))
                .map_err(|e| err(&e))?;
            let dual = build_2xm_reciprocal(&primal, &primal_ext).map_err(|e| err(&e))?;
            (dual, primal_ext.reciprocal())
        }
        KindArg::General => {
            let o = order.expect("validated with the kind");
            let mu = general_extension_len(m, n, o);
            let proc = sample_channel(m, n, mu, chan_seed, DEFAULT_H_MIN, DEFAULT_H_MAX)
                .map_err(|e| err(&e))?;
            let ext = extend(&proc, 0, mu).map_err(|e| err(&e))?;
            let plan = build_general(&ext, o, beam_seed).map_err(|e| err(&e))?;
            (plan, ext)
        }
    };
    if zero_force && !plan.has_zero_forcing() {
        let plan = compute_zero_forcing(plan, &ext).map_err(|e| err(&e))?;
        return Ok((plan, ext));
    }
    Ok((plan, ext))
}

fn run_build(
    stamp: &Stamp,
    m: usize,
    n: usize,
    kind: KindArg,
    order: Option<u32>,
) -> (Vec<Record>, bool) {
    let (plan, _) = match construct(m, n, kind, order, stamp.seed, false) {
        Ok(built) => built,
        Err(msg) => return stamp.diagnostic(&msg),
    };
    let rec = stamp
        .record()
        .field("m", m)
        .field("n", n)
        .field("kind", kind_label(kind))
        .field("order", order_label(order))
        .field("mu", plan.mu)
        .field("streams", plan.total_streams())
        .field("dof", achieved_dof(&plan));
    (vec![rec], true)
}

fn run_verify(
    stamp: &Stamp,
    m: usize,
    n: usize,
    kind: KindArg,
    order: Option<u32>,
    tol: f64,
) -> (Vec<Record>, bool) {
    let (plan, ext) = match construct(m, n, kind, order, stamp.seed, true) {
        Ok(built) => built,
        Err(msg) => return stamp.diagnostic(&msg),
    };
    let report = verify_plan(&plan, &ext, tol);
    let records = (0..plan.rx_count)
        .map(|r| {
            stamp
                .record()
                .field("m", m)
                .field("n", n)
                .field("kind", kind_label(kind))
                .field("order", order_label(order))
                .field("receiver", r + 1)
                .field("interference_dim", report.interference_dims[r])
                .field("expected_dim", report.expected_dims[r])
                .field("lambda_ratio", report.lambda_ratios[r])
                .field("max_residual", report.max_residual)
                .field("dof", report.achieved_dof)
                .field("pass", report.pass)
        })
        .collect();
    (records, report.pass)
}

fn run_slope(
    stamp: &Stamp,
    m: usize,
    n: usize,
    kind: KindArg,
    order: Option<u32>,
    rho_db: &[f64],
    trials: usize,
) -> (Vec<Record>, bool) {
    let (plan, ext) = match construct(m, n, kind, order, stamp.seed, true) {
        Ok(built) => built,
        Err(msg) => return stamp.diagnostic(&msg),
    };
    let report = verify_plan(&plan, &ext, SLOPE_GATE_TOL);
    if !report.pass {
        return stamp.diagnostic(&format!(
            "plan failed verification before measurement: max residual {:.3e}",
            report.max_residual
        ));
    }
    let trial_seed = seeds::derive(stamp.seed, "trials");
    let dof = achieved_dof(&plan);
    let dof_f = dof.to_f64().expect("desk-scale rational");
    let lo = db_to_linear(rho_db[0]);
    let hi = db_to_linear(*rho_db.last().expect("validated nonempty"));
    let slope = dof_slope(&plan, &ext, lo, hi, trials, trial_seed).expect("validated range");
    let rel_err = (slope - dof_f).abs() / dof_f;
    let records = rho_db
        .iter()
        .map(|&db| {
            let rho = db_to_linear(db);
            let rate = sum_rate(&plan, &ext, rho, trials, trial_seed).expect("zero-forced plan");
            stamp
                .record()
                .field("m", m)
                .field("n", n)
                .field("kind", kind_label(kind))
                .field("order", order_label(order))
                .field("trials", trials)
                .field("rho_db", db)
                .field("sum_rate", rate)
                .field("gap", dof_f * rho.log2() - rate)
                .field("slope", slope)
                .field("dof", dof)
                .field("rel_err", rel_err)
        })
        .collect();
    (records, true)
}

fn run_delay(stamp: &Stamp, delays: [[u64; 2]; 2], horizon: u64) -> (Vec<Record>, bool) {
    let schedule = DelaySchedule::new(delays, horizon).expect("validated in resolve");
    let sim = simulate(&schedule).expect("validated schedule");
    let per_msg = per_message_throughput(&sim);
    let collisions: usize = (1..=2).map(|j| collision_slots(&sim, j).len()).sum();
    let rec = stamp
        .record()
        .field("d11", delays[0][0])
        .field("d12", delays[0][1])
        .field("d21", delays[1][0])
        .field("d22", delays[1][1])
        .field("horizon", horizon)
        .field("throughput", throughput(&sim))
        .field("msg11", per_msg[0][0])
        .field("msg12", per_msg[0][1])
        .field("msg21", per_msg[1][0])
        .field("msg22", per_msg[1][1])
        .field("collisions", collisions);
    (vec![rec], true)
}

fn run_relay(
    stamp: &Stamp,
    m: usize,
    k: usize,
    scheme: HopSchemeArg,
    order: Option<u32>,
) -> (Vec<Record>, bool) {
    let hop_scheme = match scheme {
        HopSchemeArg::Perfect => HopScheme::Perfect,
        HopSchemeArg::General => HopScheme::General {
            order: order.expect("validated with the scheme"),
        },
    };
    let composed = match compose_sampled(m, k, hop_scheme, seeds::derive(stamp.seed, "relay")) {
        Ok(c) => c,
        Err(e) => return stamp.diagnostic(&e.to_string()),
    };
    let bound = relay_dof(m as u64, k as u64);
    let scheme_label = match scheme {
        HopSchemeArg::Perfect => "perfect",
        HopSchemeArg::General => "general",
    };
    let records = composed
        .stream_map
        .iter()
        .map(|link| {
            stamp
                .record()
                .field("m", m)
                .field("k", k)
                .field("scheme", scheme_label)
                .field("order", order_label(order))
                .field("source", link.source)
                .field("relay", link.relay)
                .field("streams", link.streams)
                .field("lost_phase1", link.lost_phase1)
                .field("lost_phase2", link.lost_phase2)
                .field("mu1", composed.plan1.mu)
                .field("mu2", composed.plan2.mu)
                .field("paired", composed.paired_streams())
                .field("dof", composed.end_to_end_dof)
                .field("bound", bound)
        })
        .collect();
    (records, true)
}

fn run_suite(stamp: &Stamp) -> (Vec<Record>, bool) {
    let results = suite::run_all();
    for r in &results {
        eprintln!("{}", r.line());
    }
    let pass = results.iter().all(|r| r.pass);
    let records = results
        .into_iter()
        .map(|r| {
            // No timing columns: records must be byte-identical across
            // runs of the same config.
            stamp
                .record()
                .field("criterion", r.index)
                .field("name", r.name)
                .field("pass", r.pass)
                .field("details", r.details)
        })
        .collect();
    (records, pass)
}
