//! Finite-SNR Monte Carlo: push symbols through a plan, zero-force at the
//! receivers, and read the DoF off the sum-rate slope.
//!
//! Conventions, fixed across the module:
//! - noise variance 1 per received component;
//! - total transmit power rho, split equally over streams (p = rho / S);
//! - beams rescaled to squared norm mu, so a stream's block energy is
//!   mu * p and the per-slot average power over all transmitters is rho;
//! - per-stream rate log2(1 + SINR) with the expected post-projection
//!   noise power ‖u‖^2 in the denominator and the realized interference
//!   spill on top of it.

use crate::channel::ExtendedChannel;
use crate::schemes::BeamformingPlan;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const NOISE_VAR: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("plan has no zero-forcing matrices; compute them first")]
    UnverifiedPlan,
    #[error("SNR range [{lo}, {hi}] is not high-SNR with a factor-100 spread")]
    BadSnrRange { lo: f64, hi: f64 },
}

/// Per-stream decode gains of a plan, precomputed once.
///
/// `gains[(s, t)]` is u_s^T H[j_s, i_t] v~_t over the canonical stream
/// order, with v~ the norm-sqrt(mu) rescaled beam. Zero-forcing makes the
/// matrix diagonal up to rounding; the diagonal itself is the per-stream
/// effective amplitude.
pub struct GainTable {
    pub layout: Vec<(usize, usize, usize)>,
    pub gains: DMatrix<f64>,
    pub u_norms_sq: Vec<f64>,
    scaled_beams: Vec<DVector<f64>>,
}

impl GainTable {
    pub fn new(plan: &BeamformingPlan, ext: &ExtendedChannel) -> Result<GainTable, SimError> {
        if !plan.has_zero_forcing() {
            return Err(SimError::UnverifiedPlan);
        }
        let layout = plan.stream_layout();
        let s = layout.len();
        let mu = plan.mu as f64;
        let scaled_beams: Vec<DVector<f64>> = layout
            .iter()
            .map(|&(j, i, k)| {
                let col = plan.v(j, i).column(k).into_owned();
                let norm = col.norm();
                col * (mu.sqrt() / norm)
            })
            .collect();
        let mut gains = DMatrix::zeros(s, s);
        let mut u_norms_sq = Vec::with_capacity(s);
        for (row, &(j, i, k)) in layout.iter().enumerate() {
            let u = plan.u(j, i).expect("checked above").column(k).into_owned();
            u_norms_sq.push(u.norm_squared());
            for (col, &(_, li, _)) in layout.iter().enumerate() {
                gains[(row, col)] = u.dot(&ext.apply(j, li, &scaled_beams[col]));
            }
        }
        Ok(GainTable {
            layout,
            gains,
            u_norms_sq,
            scaled_beams,
        })
    }

    pub fn stream_count(&self) -> usize {
        self.layout.len()
    }
}

/// One transmission block: payload symbols, noise draws and the power
/// split for a single pass through the channel.
pub struct LinkTrial<'a> {
    pub plan: &'a BeamformingPlan,
    pub ext: &'a ExtendedChannel,
    pub table: &'a GainTable,
    pub rho: f64,
    /// Unit-variance payload, one symbol per stream.
    pub payload: Vec<f64>,
    /// Per-receiver noise, variance 1 per component.
    pub noise: Vec<DVector<f64>>,
}

impl<'a> LinkTrial<'a> {
    /// Draw payload and noise. Symbols are Rademacher (so exactly unit
    /// variance), noise is standard Gaussian.
    pub fn new(
        plan: &'a BeamformingPlan,
        ext: &'a ExtendedChannel,
        table: &'a GainTable,
        rho: f64,
        rng: &mut ChaCha8Rng,
    ) -> LinkTrial<'a> {
        let payload = (0..table.stream_count())
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let noise = (0..plan.rx_count)
            .map(|_| DVector::from_fn(plan.mu, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        LinkTrial {
            plan,
            ext,
            table,
            rho,
            payload,
            noise,
        }
    }

    /// Equal split of the total power over streams.
    pub fn per_stream_power(&self) -> f64 {
        self.rho / self.table.stream_count() as f64
    }
}

/// Per-transmitter channel inputs X[i] for a trial.
pub fn transmit_signals(trial: &LinkTrial) -> Vec<DVector<f64>> {
    let amp = trial.per_stream_power().sqrt();
    let mut x = vec![DVector::zeros(trial.plan.mu); trial.plan.tx_count];
    for (s, &(_, i, _)) in trial.table.layout.iter().enumerate() {
        x[i - 1] += &trial.table.scaled_beams[s] * (amp * trial.payload[s]);
    }
    x
}

/// Per-receiver outputs Y[j] = sum_i H[ji] X[i] + Z[j].
pub fn transmit_receive(trial: &LinkTrial) -> Vec<DVector<f64>> {
    let x = transmit_signals(trial);
    (1..=trial.plan.rx_count)
        .map(|j| {
            let mut y = trial.noise[j - 1].clone();
            for (i, xi) in x.iter().enumerate() {
                y += trial.ext.apply(j, i + 1, xi);
            }
            y
        })
        .collect()
}

/// Per-stream decode measurements for one trial.
#[derive(Debug, Clone, Copy)]
pub struct StreamDecode {
    /// Effective amplitude u^T H v~ of the stream's own symbol.
    pub gain: f64,
    /// Realized power of everything in the projection that is neither the
    /// desired symbol nor noise.
    pub interference_power: f64,
    /// Expected noise power after projection, ‖u‖^2.
    pub noise_power: f64,
    pub sinr: f64,
}

/// Project each receiver's output onto its zero-forcing vectors and split
/// the result into desired, interference and noise parts. The noise draw
/// is known to the trial, so the interference amplitude is exact up to
/// rounding rather than estimated.
pub fn zf_decode(trial: &LinkTrial, received: &[DVector<f64>]) -> Vec<StreamDecode> {
    let p = trial.per_stream_power();
    let amp = p.sqrt();
    let mut out = Vec::with_capacity(trial.table.stream_count());
    for (s, &(j, i, k)) in trial.table.layout.iter().enumerate() {
        let u = trial
            .plan
            .u(j, i)
            .expect("gain table construction checked zero-forcing")
            .column(k)
            .into_owned();
        let projection = u.dot(&received[j - 1]);
        let noise_part = u.dot(&trial.noise[j - 1]);
        let gain = trial.table.gains[(s, s)];
        let desired = amp * trial.payload[s] * gain;
        let interference = projection - noise_part - desired;
        let interference_power = interference * interference;
        let noise_power = trial.table.u_norms_sq[s] * NOISE_VAR;
        let sinr = p * gain * gain / (noise_power + interference_power);
        out.push(StreamDecode {
            gain,
            interference_power,
            noise_power,
            sinr,
        });
    }
    out
}

/// Average sum rate in bits per channel use at total SNR rho.
///
/// Each trial contributes (1/mu) * sum_s log2(1 + SINR_s); trials share
/// one seeded generator, so a (plan, ext, rho, trials, seed) tuple always
/// reproduces the same figure.
pub fn sum_rate(
    plan: &BeamformingPlan,
    ext: &ExtendedChannel,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, SimError> {
    let table = GainTable::new(plan, ext)?;
    if table.stream_count() == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let trial = LinkTrial::new(plan, ext, &table, rho, &mut rng);
        let received = transmit_receive(&trial);
        let decoded = zf_decode(&trial, &received);
        let block: f64 = decoded.iter().map(|d| (1.0 + d.sinr).log2()).sum();
        total += block / plan.mu as f64;
    }
    Ok(total / trials as f64)
}

/// Empirical DoF: the sum-rate slope against log2(rho) between two
/// high-SNR points. Requires rho_hi >= 100 * rho_lo and rho_lo >= 30 dB.
pub fn dof_slope(
    plan: &BeamformingPlan,
    ext: &ExtendedChannel,
    rho_lo: f64,
    rho_hi: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, SimError> {
    if rho_hi < 100.0 * rho_lo || rho_lo < 1e3 {
        return Err(SimError::BadSnrRange {
            lo: rho_lo,
            hi: rho_hi,
        });
    }
    let lo = sum_rate(plan, ext, rho_lo, trials, seed)?;
    let hi = sum_rate(plan, ext, rho_hi, trials, seed)?;
    Ok((hi - lo) / (rho_hi.log2() - rho_lo.log2()))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
