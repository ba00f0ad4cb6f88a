//! The acceptance battery: eight end-to-end checks tying the outerbound,
//! the alignment constructions, the link simulator and the schedulers to
//! the numbers they are supposed to produce. Each criterion returns one
//! pass/fail result with a timing budget; the integration test target and
//! the `suite` subcommand both just run these and print the lines.
//!
//! Tolerances and experiment sizes are pinned here as constants so the
//! battery cannot drift apart from the library defaults silently.

use std::time::{Duration, Instant};

use num::rational::Ratio;
use num::ToPrimitive;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment_core::{
    build_subspace_pair, monomial_matrix, numeric_rank, RANK_TOL,
};
use crate::channel::{extend, sample_channel, ExtendedChannel, DEFAULT_H_MAX, DEFAULT_H_MIN};
use crate::delay_tdma::{
    collision_slots, residue_classes, simulate, throughput, DelaySchedule, Role,
};
use crate::dof_region::{
    oracle, rat, region_constraints, solve_lp, total_dof_bound, DofRegionSpec,
};
use crate::link_sim::{db_to_linear, dof_slope, sum_rate};
use crate::relay_chain::{compose_sampled, relay_dof, HopScheme};
use crate::schemes::{
    achieved_dof, build_2xm_reciprocal, build_general, build_mx2, compute_zero_forcing,
    cross_gain_matrix, general_extension_len, verify_plan, BeamformingPlan, Dof,
};
use crate::seeds;
use nalgebra::DVector;

/// Master seed of the battery; every experiment derives from it.
pub const SUITE_SEED: u64 = 987654321;

/// Exact-alignment residual ceiling for the perfect construction.
pub const MX2_RESIDUAL_TOL: f64 = 1e-12;
/// Cross-gain deviation ceiling for reciprocal plans.
pub const CROSS_GAIN_TOL: f64 = 1e-9;
/// Residual ceiling for general partial plans.
pub const GENERAL_RESIDUAL_TOL: f64 = 1e-9;
/// Relative slope error ceiling.
pub const SLOPE_REL_TOL: f64 = 0.03;
/// Rate-gap variation ceiling for perfect plans, in bits.
pub const GAP_VARIATION_TOL: f64 = 0.1;
/// Containment residual ceiling for the shift identity.
pub const CONTAINMENT_TOL: f64 = 1e-12;
/// Seeds per configuration in the slope experiment; the reported number
/// is the median, which a rare ill-conditioned realization cannot move.
pub const SLOPE_SEEDS: usize = 11;
/// Monte-Carlo trials per SNR point.
pub const SLOPE_TRIALS: usize = 200;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    /// Checks passed and the run stayed within its time budget.
    pub pass: bool,
    pub details: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionResult {
    /// One printable pass/fail line.
    pub fn line(&self) -> String {
        format!(
            "criterion {} {:<26} {} [{:6.2}s / {:3.0}s] {}",
            self.index,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.limit.as_secs_f64(),
            self.details
        )
    }
}

const CRITERIA: [(&str, u64, fn() -> (bool, String)); 8] = [
    ("outerbound-exact", 1, criterion_outerbound),
    ("perfect-mx2-alignment", 10, criterion_perfect_mx2),
    ("reciprocal-duality", 30, criterion_reciprocity),
    ("general-partial-alignment", 60, criterion_general),
    ("dof-slope", 120, criterion_slope),
    ("full-rank-and-containment", 30, criterion_rank_and_containment),
    ("delay-throughput", 5, criterion_delay),
    ("relay-composition", 60, criterion_relay),
];

/// Run one criterion (1-based) and wrap its timing.
pub fn run_criterion(index: usize) -> CriterionResult {
    assert!((1..=CRITERIA.len()).contains(&index), "no criterion {index}");
    let (name, limit_s, body) = CRITERIA[index - 1];
    let limit = Duration::from_secs(limit_s);
    let start = Instant::now();
    let (checks_pass, details) = body();
    let elapsed = start.elapsed();
    CriterionResult {
        index,
        name,
        pass: checks_pass && elapsed <= limit,
        details,
        elapsed,
        limit,
    }
}

/// Run the whole battery in order.
pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA.len()).map(run_criterion).collect()
}

// ---------- criterion bodies ----------

fn criterion_outerbound() -> (bool, String) {
    let mut grid_ok = true;
    for m in 1..=6u64 {
        for n in 1..=6u64 {
            let spec = DofRegionSpec::single_antenna(m as usize, n as usize);
            let lp = region_constraints(&spec).expect("valid spec");
            let sol = solve_lp(&lp).expect("feasible LP");
            if sol.value != total_dof_bound(m, n) {
                grid_ok = false;
            }
        }
    }
    let spec = DofRegionSpec::with_null_mask(3, 3, [(1, 1), (2, 2), (3, 3)]);
    let lp = region_constraints(&spec).expect("valid spec");
    let lp_value = solve_lp(&lp).expect("feasible LP").value;
    let oracle_value = oracle::best_vertex(&lp).expect("bounded polytope").0;
    let null_ok = lp_value == oracle_value && lp_value == rat(3, 2);
    (
        grid_ok && null_ok,
        format!(
            "36 grid values exact; 3x3 null-diagonal LP {} vertex oracle (both {})",
            if lp_value == oracle_value { "matches" } else { "differs from" },
            lp_value
        ),
    )
}

fn criterion_perfect_mx2() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [2usize, 3, 4, 5] {
        let mu = m + 1;
        let mut rank_ok = 0usize;
        let mut resid_ok = true;
        let mut dof_ok = true;
        for s in 0..100u64 {
            let chan = seeds::derive(SUITE_SEED, &format!("c2-m{m}-s{s}-chan"));
            let beams = seeds::derive(SUITE_SEED, &format!("c2-m{m}-s{s}-beams"));
            let proc = sample_channel(m, 2, mu, chan, DEFAULT_H_MIN, DEFAULT_H_MAX).unwrap();
            let ext = extend(&proc, 0, mu).unwrap();
            let plan = build_mx2(&ext, beams).expect("bounded channels are fully connected");
            let report = verify_plan(&plan, &ext, MX2_RESIDUAL_TOL);
            resid_ok &= report.max_residual < MX2_RESIDUAL_TOL;
            if report.lambda_ratios.iter().all(|&r| r >= RANK_TOL) {
                rank_ok += 1;
            }
            dof_ok &= achieved_dof(&plan) == Dof::new(2 * m as u64, m as u64 + 1);
        }
        let ok = resid_ok && rank_ok >= 99 && dof_ok;
        pass &= ok;
        parts.push(format!("M={m}: rank {rank_ok}/100{}", if ok { "" } else { " FAIL" }));
    }
    (pass, parts.join("; "))
}

fn criterion_reciprocity() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [2usize, 3, 4] {
        let mu = m + 1;
        let mut primal_ok = 0usize;
        let mut dual_ok = 0usize;
        for s in 0..100u64 {
            let chan = seeds::derive(SUITE_SEED, &format!("c3-m{m}-s{s}-chan"));
            let beams = seeds::derive(SUITE_SEED, &format!("c3-m{m}-s{s}-beams"));
            let proc = sample_channel(m, 2, mu, chan, DEFAULT_H_MIN, DEFAULT_H_MAX).unwrap();
            let ext = extend(&proc, 0, mu).unwrap();
            let plan = build_mx2(&ext, beams).expect("bounded channels are fully connected");
            let plan = match compute_zero_forcing(plan, &ext) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let dual = match build_2xm_reciprocal(&plan, &ext) {
                Ok(d) => d,
                Err(_) => continue,
            };
            primal_ok += 1;
            let dual_ext = ext.reciprocal();
            let report = verify_plan(&dual, &dual_ext, CROSS_GAIN_TOL);
            let gains = cross_gain_matrix(&dual, &dual_ext);
            let eye_dev = (0..gains.nrows())
                .flat_map(|r| (0..gains.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| (gains[(r, c)] - if r == c { 1.0 } else { 0.0 }).abs())
                .fold(0.0_f64, f64::max);
            if report.pass
                && eye_dev < CROSS_GAIN_TOL
                && dual.total_streams() == plan.total_streams()
            {
                dual_ok += 1;
            }
        }
        // Every verified primal must dualize cleanly; the handful of
        // rank-degenerate primals are the same tail criterion 2 allows.
        let ok = primal_ok >= 99 && dual_ok == primal_ok;
        pass &= ok;
        parts.push(format!(
            "M={m}: dual {dual_ok}/{primal_ok}{}",
            if ok { "" } else { " FAIL" }
        ));
    }
    (pass, parts.join("; "))
}

const GENERAL_GRID: [(usize, usize, u32); 8] = [
    (2, 2, 1),
    (2, 2, 2),
    (2, 2, 3),
    (2, 3, 1),
    (2, 3, 2),
    (3, 2, 1),
    (3, 2, 2),
    (3, 3, 1),
];

fn criterion_general() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut last_dof: std::collections::BTreeMap<(usize, usize), Dof> =
        std::collections::BTreeMap::new();
    for (m, n_rx, order) in GENERAL_GRID {
        let mu = general_extension_len(m, n_rx, order);
        let chan = seeds::derive(SUITE_SEED, &format!("c4-{m}x{n_rx}-n{order}-chan"));
        let beams = seeds::derive(SUITE_SEED, &format!("c4-{m}x{n_rx}-n{order}-beams"));
        let proc = sample_channel(m, n_rx, mu, chan, DEFAULT_H_MIN, DEFAULT_H_MAX).unwrap();
        let ext = extend(&proc, 0, mu).unwrap();
        let plan = build_general(&ext, order, beams).expect("bounded channels");
        let report = verify_plan(&plan, &ext, GENERAL_RESIDUAL_TOL);

        let gamma = ((m - 1) * (n_rx - 1)) as u32;
        let per_rx_interference = (n_rx - 1) * (order as usize + 1).pow(gamma);
        let dims_ok = report
            .interference_dims
            .iter()
            .all(|&d| d == per_rx_interference);
        let streams = n_rx as u64
            * ((order as u64 + 1).pow(gamma) + (m as u64 - 1) * (order as u64).pow(gamma));
        let dof = achieved_dof(&plan);
        let dof_ok = dof == Dof::new(streams, mu as u64);
        let monotone_ok = match last_dof.get(&(m, n_rx)) {
            Some(prev) => dof > *prev,
            None => true,
        };
        last_dof.insert((m, n_rx), dof);

        let ok = report.pass && dims_ok && dof_ok && monotone_ok;
        pass &= ok;
        parts.push(format!(
            "{m}x{n_rx} n={order}: dof {dof}{}",
            if ok { "" } else { " FAIL" }
        ));
    }
    (pass, parts.join("; "))
}

/// Plan families the slope experiment sweeps.
#[derive(Debug, Clone, Copy)]
enum SlopeSpec {
    Perfect { m: usize },
    General { m: usize, n_rx: usize, order: u32 },
}

impl SlopeSpec {
    fn label(self) -> String {
        match self {
            SlopeSpec::Perfect { m } => format!("perfect-{m}x2"),
            SlopeSpec::General { m, n_rx, order } => format!("general-{m}x{n_rx}-n{order}"),
        }
    }

    fn build(
        self,
        chan_seed: u64,
        beam_seed: u64,
    ) -> Option<(BeamformingPlan, ExtendedChannel)> {
        let (m, n_rx, mu) = match self {
            SlopeSpec::Perfect { m } => (m, 2, m + 1),
            SlopeSpec::General { m, n_rx, order } => {
                (m, n_rx, general_extension_len(m, n_rx, order))
            }
        };
        let proc = sample_channel(m, n_rx, mu, chan_seed, DEFAULT_H_MIN, DEFAULT_H_MAX).ok()?;
        let ext = extend(&proc, 0, mu).ok()?;
        let plan = match self {
            SlopeSpec::Perfect { .. } => build_mx2(&ext, beam_seed).ok()?,
            SlopeSpec::General { order, .. } => build_general(&ext, order, beam_seed).ok()?,
        };
        let plan = compute_zero_forcing(plan, &ext).ok()?;
        verify_plan(&plan, &ext, GENERAL_RESIDUAL_TOL).pass.then_some(())?;
        Some((plan, ext))
    }
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn criterion_slope() -> (bool, String) {
    let specs: Vec<SlopeSpec> = [2usize, 3, 4, 5]
        .into_iter()
        .map(|m| SlopeSpec::Perfect { m })
        .chain(
            GENERAL_GRID
                .into_iter()
                .map(|(m, n_rx, order)| SlopeSpec::General { m, n_rx, order }),
        )
        .collect();

    let rho40 = db_to_linear(40.0);
    let rho60 = db_to_linear(60.0);
    let rho70 = db_to_linear(70.0);

    let mut pass = true;
    let mut parts = Vec::new();
    for spec in specs {
        let label = spec.label();
        let mut rels = Vec::new();
        let mut gap_vars = Vec::new();
        let mut skipped = 0usize;
        for s in 0..SLOPE_SEEDS {
            let chan = seeds::derive(SUITE_SEED, &format!("c5-{label}-s{s}-chan"));
            let beams = seeds::derive(SUITE_SEED, &format!("c5-{label}-s{s}-beams"));
            let trials = seeds::derive(SUITE_SEED, &format!("c5-{label}-s{s}-trials"));
            let Some((plan, ext)) = spec.build(chan, beams) else {
                skipped += 1;
                continue;
            };
            let dof_f = achieved_dof(&plan).to_f64().expect("small rationals");
            let slope =
                dof_slope(&plan, &ext, rho40, rho60, SLOPE_TRIALS, trials).expect("valid range");
            rels.push(((slope - dof_f) / dof_f).abs());
            if let SlopeSpec::Perfect { .. } = spec {
                let r40 = sum_rate(&plan, &ext, rho40, SLOPE_TRIALS, trials).unwrap();
                let r70 = sum_rate(&plan, &ext, rho70, SLOPE_TRIALS, trials).unwrap();
                let gap40 = dof_f * rho40.log2() - r40;
                let gap70 = dof_f * rho70.log2() - r70;
                gap_vars.push((gap40 - gap70).abs());
            }
        }
        if rels.is_empty() {
            pass = false;
            parts.push(format!("{label}: no verified realization"));
            continue;
        }
        let med = median(&mut rels);
        let mut ok = med <= SLOPE_REL_TOL && skipped <= SLOPE_SEEDS / 2;
        let mut note = format!("{label}: slope err {:.1}%", med * 100.0);
        if !gap_vars.is_empty() {
            let gap_med = median(&mut gap_vars);
            ok &= gap_med < GAP_VARIATION_TOL;
            note.push_str(&format!(", gap var {gap_med:.3}b"));
        }
        if !ok {
            note.push_str(" FAIL");
        }
        pass &= ok;
        parts.push(note);
    }
    if !pass {
        parts.push(
            "large extensions are pre-asymptotic at 40-60 dB: their per-stream gains \
             sit orders of magnitude below the perfect schemes', so the linear-in-log \
             regime has not started yet and the finite-SNR slope undershoots"
                .to_string(),
        );
    }
    (pass, parts.join("; "))
}

fn criterion_rank_and_containment() -> (bool, String) {
    // Monte-Carlo full-rank rate of the random monomial matrices.
    let mut mc_ok = true;
    let mut worst_rate = 1000usize;
    for m in 1..=6usize {
        let mut full = 0usize;
        for s in 0..1000u64 {
            let seed = seeds::derive(SUITE_SEED, &format!("c6-mono-m{m}-s{s}"));
            let mat = monomial_matrix(m, 1, seed);
            let (rank, _) = numeric_rank(&mat, RANK_TOL).expect("finite entries");
            if rank == m {
                full += 1;
            }
        }
        worst_rate = worst_rate.min(full);
        mc_ok &= full >= 999;
    }

    // Shift containment and order-(n+1) rank for small generator counts.
    let mut shift_ok = true;
    for gamma in 1..=3usize {
        for n in 1..=2u32 {
            let mu = (n as usize + 1).pow(gamma as u32) + 3;
            for s in 0..100u64 {
                let seed = seeds::derive(SUITE_SEED, &format!("c6-pair-g{gamma}-n{n}-s{s}"));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = |len: usize| {
                    DVector::from_fn(len, |_, _| {
                        let mag =
                            DEFAULT_H_MIN + (DEFAULT_H_MAX - DEFAULT_H_MIN) * rng.gen::<f64>();
                        if rng.gen::<bool>() {
                            mag
                        } else {
                            -mag
                        }
                    })
                };
                let generators: Vec<DVector<f64>> = (0..gamma).map(|_| draw(mu)).collect();
                let w = draw(mu);
                let pair = build_subspace_pair(&generators, &w, n).expect("desk-scale pair");
                for g in 0..gamma {
                    shift_ok &= pair.containment_residual(g) < CONTAINMENT_TOL;
                }
                let (rank, _) = numeric_rank(&pair.vp, RANK_TOL).expect("finite entries");
                shift_ok &= rank == (n as usize + 1).pow(gamma as u32);
            }
        }
    }
    (
        mc_ok && shift_ok,
        format!(
            "full-rank worst {worst_rate}/1000; containment and rank over 600 pairs {}",
            if shift_ok { "exact" } else { "FAIL" }
        ),
    )
}

const DELAY_CONFIGS: [[[u64; 2]; 2]; 5] = [
    [[0, 1], [0, 2]],
    [[3, 4], [6, 8]],
    [[0, 4], [3, 2]],
    [[6, 1], [9, 5]],
    [[3, 7], [0, 11]],
];

fn criterion_delay() -> (bool, String) {
    let mut pass = true;
    for delays in DELAY_CONFIGS {
        let schedule = DelaySchedule::new(delays, 300).expect("valid residues");
        let sim = simulate(&schedule).expect("validated schedule");
        let ok = throughput(&sim) == Ratio::new(4, 3)
            && crate::delay_tdma::per_message_throughput(&sim)
                .iter()
                .flatten()
                .all(|&r| r == Ratio::new(1, 3))
            && (1..=2).all(|j| collision_slots(&sim, j).is_empty())
            && (1..=2).all(|j| residue_classes(&sim, j, Role::Interference).len() == 1);
        pass &= ok;
    }
    (
        pass,
        format!(
            "5 delay configs over horizon 300: throughput 4/3, no collisions{}",
            if pass { "" } else { " FAIL" }
        ),
    )
}

fn criterion_relay() -> (bool, String) {
    let mut formula_ok = true;
    for m in 1..=4u64 {
        for k in 1..=4u64 {
            formula_ok &= relay_dof(m, k) == Ratio::new(m * k, 2 * (m + k - 1));
            formula_ok &= relay_dof(m, k) == relay_dof(k, m);
        }
    }
    formula_ok &= relay_dof(2, 2) == Ratio::new(2, 3)
        && relay_dof(1, 1) == Ratio::new(1, 2)
        && relay_dof(2, 1000).to_f64().expect("small rational") > 0.999;

    let perfect = compose_sampled(2, 2, HopScheme::Perfect, SUITE_SEED)
        .expect("perfect 2x2 composes");
    let perfect_ok = perfect.end_to_end_dof == Dof::new(2, 3);

    let bound = relay_dof(2, 2);
    let mut climb_ok = true;
    let mut prev: Option<Dof> = None;
    for order in 1..=3u32 {
        let composed = compose_sampled(2, 2, HopScheme::General { order }, SUITE_SEED)
            .expect("general 2x2 composes");
        let dof = composed.end_to_end_dof;
        climb_ok &= dof < bound;
        if let Some(p) = prev {
            climb_ok &= dof > p;
        }
        prev = Some(dof);
    }

    (
        formula_ok && perfect_ok && climb_ok,
        format!(
            "formula grid 4x4 exact; perfect 2x2 = {}; general climbs {}",
            perfect.end_to_end_dof,
            if climb_ok { "upward" } else { "FAIL" }
        ),
    )
}
