//! Time-varying X-network channel realizations and their symbol extensions.
//!
//! Coefficients are drawn i.i.d. per (receiver, transmitter, slot) from a
//! bounded continuous law: magnitude uniform on [h_min, h_max] with an
//! independent fair sign. The nonzero lower bound keeps every link alive
//! (fully connected network) and the upper bound keeps monomial products
//! of coefficients well scaled in the alignment constructions.
//!
//! A symbol extension treats mu consecutive slots as one super-symbol, so
//! each scalar link becomes a mu x mu diagonal matrix. `ExtendedChannel`
//! stores those diagonals for one block of slots.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("coefficient bounds must satisfy 0 < h_min < h_max, got [{h_min}, {h_max}]")]
    InvalidBounds { h_min: f64, h_max: f64 },
    #[error(
        "extension block {kappa} of length {mu} ends at slot {needed}, \
         only {available} slots generated"
    )]
    HorizonExceeded {
        kappa: usize,
        mu: usize,
        needed: usize,
        available: usize,
    },
}

/// One seeded realization of the fading process for an M x N network.
///
/// Reproducible: identical (seed, tx_count, rx_count, slots, h_min, h_max)
/// yields bitwise-identical coefficients.
#[derive(Debug, Clone)]
pub struct ChannelProcess {
    /// Transmitter count M.
    pub tx_count: usize,
    /// Receiver count N.
    pub rx_count: usize,
    /// Number of slots generated.
    pub slots: usize,
    pub seed: u64,
    pub h_min: f64,
    pub h_max: f64,
    coeffs: Vec<f64>,
}

/// Default coefficient magnitude bounds.
pub const DEFAULT_H_MIN: f64 = 0.5;
pub const DEFAULT_H_MAX: f64 = 2.0;

/// Draw a fresh channel realization.
///
/// Each coefficient is sign * magnitude with magnitude uniform on
/// [h_min, h_max] and the sign fair, independently per (j, i, t).
pub fn sample_channel(
    tx_count: usize,
    rx_count: usize,
    slots: usize,
    seed: u64,
    h_min: f64,
    h_max: f64,
) -> Result<ChannelProcess, ChannelError> {
    assert!(tx_count >= 1 && rx_count >= 1 && slots >= 1, "empty network");
    if !(h_min > 0.0 && h_max > h_min && h_max.is_finite()) {
        return Err(ChannelError::InvalidBounds { h_min, h_max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::with_capacity(tx_count * rx_count * slots);
    for _t in 0..slots {
        for _j in 0..rx_count {
            for _i in 0..tx_count {
                let mag = h_min + (h_max - h_min) * rng.gen::<f64>();
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                coeffs.push(sign * mag);
            }
        }
    }
    Ok(ChannelProcess {
        tx_count,
        rx_count,
        slots,
        seed,
        h_min,
        h_max,
        coeffs,
    })
}

impl ChannelProcess {
    /// Coefficient of the link from transmitter i to receiver j at slot t.
    /// All three indices are 1-based.
    pub fn coeff(&self, j: usize, i: usize, t: usize) -> f64 {
        assert!(
            (1..=self.rx_count).contains(&j)
                && (1..=self.tx_count).contains(&i)
                && (1..=self.slots).contains(&t),
            "coefficient index (j={j}, i={i}, t={t}) out of range"
        );
        self.coeffs[(t - 1) * self.rx_count * self.tx_count + (j - 1) * self.tx_count + (i - 1)]
    }
}

/// Diagonal per-link matrices of one mu-slot extension block.
#[derive(Debug, Clone)]
pub struct ExtendedChannel {
    pub tx_count: usize,
    pub rx_count: usize,
    pub mu: usize,
    /// First slot of the block is base_slot + 1.
    pub base_slot: usize,
    diag: Vec<DVector<f64>>,
}

/// Slice block kappa (0-based) of mu slots out of the process.
///
/// Diagonal entry r of H[(j,i)] is the coefficient at slot
/// kappa * mu + r with r = 1..=mu, matching 1-based slot counting.
pub fn extend(
    proc: &ChannelProcess,
    kappa: usize,
    mu: usize,
) -> Result<ExtendedChannel, ChannelError> {
    assert!(mu >= 1, "empty extension");
    let needed = (kappa + 1) * mu;
    if needed > proc.slots {
        return Err(ChannelError::HorizonExceeded {
            kappa,
            mu,
            needed,
            available: proc.slots,
        });
    }
    let base_slot = kappa * mu;
    let mut diag = Vec::with_capacity(proc.rx_count * proc.tx_count);
    for j in 1..=proc.rx_count {
        for i in 1..=proc.tx_count {
            diag.push(DVector::from_fn(mu, |r, _| {
                proc.coeff(j, i, base_slot + r + 1)
            }));
        }
    }
    Ok(ExtendedChannel {
        tx_count: proc.tx_count,
        rx_count: proc.rx_count,
        mu,
        base_slot,
        diag,
    })
}

impl ExtendedChannel {
    /// Build directly from per-link diagonals, indexed diags[j-1][i-1].
    ///
    /// No degeneracy screening happens here; consumers that require a fully
    /// connected block must check for zero entries themselves.
    pub fn from_diagonals(diags: Vec<Vec<DVector<f64>>>) -> ExtendedChannel {
        let rx_count = diags.len();
        assert!(rx_count >= 1, "no receivers");
        let tx_count = diags[0].len();
        assert!(tx_count >= 1, "no transmitters");
        let mu = diags[0][0].len();
        let mut diag = Vec::with_capacity(rx_count * tx_count);
        for row in &diags {
            assert_eq!(row.len(), tx_count, "ragged diagonal table");
            for d in row {
                assert_eq!(d.len(), mu, "mixed extension lengths");
                diag.push(d.clone());
            }
        }
        ExtendedChannel {
            tx_count,
            rx_count,
            mu,
            base_slot: 0,
            diag,
        }
    }

    /// Diagonal of H[(j,i)], 1-based indices.
    pub fn diag(&self, j: usize, i: usize) -> &DVector<f64> {
        assert!(
            (1..=self.rx_count).contains(&j) && (1..=self.tx_count).contains(&i),
            "link index (j={j}, i={i}) out of range"
        );
        &self.diag[(j - 1) * self.tx_count + (i - 1)]
    }

    /// Materialize H[(j,i)] as a dense mu x mu matrix.
    pub fn matrix(&self, j: usize, i: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(self.diag(j, i))
    }

    /// H[(j,i)] * v without materializing the matrix.
    pub fn apply(&self, j: usize, i: usize, v: &DVector<f64>) -> DVector<f64> {
        self.diag(j, i).component_mul(v)
    }

    /// H[(j,i)] * V columnwise.
    pub fn apply_matrix(&self, j: usize, i: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.diag(j, i);
        DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| d[r] * v[(r, c)])
    }

    /// H[(j,i)]^{-1} * v. Requires a fully connected block.
    pub fn solve(&self, j: usize, i: usize, v: &DVector<f64>) -> DVector<f64> {
        let d = self.diag(j, i);
        DVector::from_fn(v.len(), |r, _| v[r] / d[r])
    }

    /// True when every diagonal entry of every link is nonzero.
    pub fn fully_connected(&self) -> bool {
        self.diag.iter().all(|d| d.iter().all(|&x| x != 0.0))
    }

    /// The reciprocal network: roles of transmitters and receivers swap and
    /// each link keeps its gains, so Hbar[(i,j)] = H[(j,i)].
    pub fn reciprocal(&self) -> ExtendedChannel {
        let mut diag = Vec::with_capacity(self.diag.len());
        for i in 1..=self.tx_count {
            for j in 1..=self.rx_count {
                diag.push(self.diag(j, i).clone());
            }
        }
        ExtendedChannel {
            tx_count: self.rx_count,
            rx_count: self.tx_count,
            mu: self.mu,
            base_slot: self.base_slot,
            diag,
        }
    }
}
