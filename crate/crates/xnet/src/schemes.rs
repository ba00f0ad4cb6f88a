//! Beamforming plans: perfect alignment for M x 2, its reciprocal 2 x M
//! twin, and the general M x N partial-alignment construction.
//!
//! A plan assigns every message (receiver j, transmitter i) a block of
//! beamforming columns V[ji] over a mu-slot symbol extension, plus, once
//! computed, matching zero-forcing columns u[ji]_k satisfying
//!
//! ```text
//! (u[ji]_k)^T H[jm] v[lm]_r  ==  1 if (l, m, r) = (j, i, k), else 0
//! ```
//!
//! The three constructions:
//! - `build_mx2`: with mu = M + 1, both receivers see all interference
//!   squeezed onto a single vector; every one of the 2M messages carries
//!   one stream, for 2M/(M+1) total DoF. Componentwise the beams only use
//!   the current slot's coefficients, so the transmitters need nothing
//!   beyond causal channel knowledge.
//! - `build_2xm_reciprocal`: swaps the roles of the verified primal plan's
//!   beamformers and zero-forcers on the reciprocal channel, achieving the
//!   same stream total over the same extension. The swap uses future slots
//!   inside the extension block, so read the extension index as frequency
//!   rather than time.
//! - `build_general`: for any M, N it spends mu_n = N(n+1)^G + (M-1)n^G
//!   dimensions (G = (M-1)(N-1)) and aligns interference via monomial
//!   subspace pairs, reaching N(n+1)^G + (M-1)N n^G streams; the DoF ratio
//!   climbs toward MN/(M+N-1) as the order n grows.
//!
//! `verify_plan` measures rather than trusts: alignment residuals,
//! per-receiver interference dimension, and decode-matrix conditioning all
//! land in an `AlignmentReport`, and failures are reported, not thrown.

use crate::alignment_core::{build_subspace_pair, numeric_rank, AlignError, SubspacePair, RANK_TOL};
use crate::channel::{ExtendedChannel, DEFAULT_H_MAX, DEFAULT_H_MIN};
use nalgebra::{DMatrix, DVector};
use num::rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Exact DoF bookkeeping: integer streams over an integer extension.
pub type Dof = Ratio<u64>;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("plan shape mismatch: {0}")]
    WrongShape(String),
    #[error("extension length {got} does not match the required {want}")]
    WrongExtension { want: usize, got: usize },
    #[error("degenerate channel: {0}")]
    Degenerate(String),
    #[error(
        "decode matrix at receiver {receiver} is rank deficient \
         (singular-value ratio {ratio:.3e})"
    )]
    RankFailure { receiver: usize, ratio: f64 },
    #[error("primal plan failed verification: {0}")]
    UnverifiedPrimal(String),
    #[error(transparent)]
    Align(#[from] AlignError),
}

/// Which construction produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    PerfectMx2,
    Reciprocal2xM,
    GeneralPartial { order: u32 },
}

/// Beamforming matrices, stream counts and (optionally) zero-forcing
/// matrices for every message of an M x N network over a mu extension.
#[derive(Debug, Clone)]
pub struct BeamformingPlan {
    pub tx_count: usize,
    pub rx_count: usize,
    pub mu: usize,
    pub kind: PlanKind,
    streams: Vec<usize>,
    vmat: Vec<DMatrix<f64>>,
    umat: Option<Vec<DMatrix<f64>>>,
    /// General construction only: the subspace pair of each receiver group.
    subspaces: Vec<SubspacePair>,
}

impl BeamformingPlan {
    fn msg(&self, j: usize, i: usize) -> usize {
        assert!(
            (1..=self.rx_count).contains(&j) && (1..=self.tx_count).contains(&i),
            "message index (j={j}, i={i}) out of range"
        );
        (j - 1) * self.tx_count + (i - 1)
    }

    /// Stream count of message (j, i).
    pub fn streams(&self, j: usize, i: usize) -> usize {
        self.streams[self.msg(j, i)]
    }

    /// Beamforming matrix of message (j, i), mu x streams(j, i).
    pub fn v(&self, j: usize, i: usize) -> &DMatrix<f64> {
        &self.vmat[self.msg(j, i)]
    }

    /// Zero-forcing matrix of message (j, i), if computed.
    pub fn u(&self, j: usize, i: usize) -> Option<&DMatrix<f64>> {
        self.umat.as_ref().map(|u| &u[self.msg(j, i)])
    }

    pub fn has_zero_forcing(&self) -> bool {
        self.umat.is_some()
    }

    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }

    /// Every stream as (receiver, transmitter, stream index), messages in
    /// lexicographic (j, i) order. This is the canonical stream order used
    /// by the link simulator and the cross-gain matrix.
    pub fn stream_layout(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.total_streams());
        for j in 1..=self.rx_count {
            for i in 1..=self.tx_count {
                for k in 0..self.streams(j, i) {
                    out.push((j, i, k));
                }
            }
        }
        out
    }

    /// Subspace pair of receiver group k (general construction only).
    pub fn subspace(&self, k: usize) -> Option<&SubspacePair> {
        if self.subspaces.is_empty() {
            None
        } else {
            Some(&self.subspaces[k - 1])
        }
    }
}

/// Verification measurements of a plan against its extension.
#[derive(Debug, Clone)]
pub struct AlignmentReport {
    /// Numeric rank of the stacked interference columns, per receiver.
    pub interference_dims: Vec<usize>,
    /// What the construction promises those ranks to be.
    pub expected_dims: Vec<usize>,
    /// Smallest/largest singular-value ratio of each decode matrix.
    pub lambda_ratios: Vec<f64>,
    /// Largest relative alignment residual over all interference columns.
    pub max_residual: f64,
    pub achieved_dof: Dof,
    pub pass: bool,
}

fn bounded_column(mu: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(mu, |_, _| {
        let mag = DEFAULT_H_MIN + (DEFAULT_H_MAX - DEFAULT_H_MIN) * rng.gen::<f64>();
        if rng.gen::<bool>() {
            mag
        } else {
            -mag
        }
    })
}

// ---------- perfect M x 2 ----------

/// Perfect alignment for M transmitters and 2 receivers over mu = M + 1.
///
/// v[11] and v[21] are drawn from the bounded continuous law; the rest
/// solve the per-slot alignment equations
/// H[1m] v[2m] = H[11] v[21] and H[2m] v[1m] = H[21] v[11] for m >= 2,
/// so each receiver's M interfering streams collapse onto one direction.
/// One stream per message.
pub fn build_mx2(ext: &ExtendedChannel, seed: u64) -> Result<BeamformingPlan, SchemeError> {
    let m = ext.tx_count;
    if ext.rx_count != 2 {
        return Err(SchemeError::WrongShape(format!(
            "perfect alignment needs exactly 2 receivers, got {}",
            ext.rx_count
        )));
    }
    if ext.mu != m + 1 {
        return Err(SchemeError::WrongExtension {
            want: m + 1,
            got: ext.mu,
        });
    }
    if !ext.fully_connected() {
        return Err(SchemeError::Degenerate(
            "zero diagonal entry in the extension block".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v11 = bounded_column(ext.mu, &mut rng);
    let v21 = bounded_column(ext.mu, &mut rng);

    let mut vmat = vec![DMatrix::zeros(ext.mu, 1); 2 * m];
    let put = |vmat: &mut Vec<DMatrix<f64>>, j: usize, i: usize, col: &DVector<f64>| {
        vmat[(j - 1) * m + (i - 1)] = DMatrix::from_column_slice(ext.mu, 1, col.as_slice());
    };
    put(&mut vmat, 1, 1, &v11);
    put(&mut vmat, 2, 1, &v21);
    for i in 2..=m {
        // Componentwise ratios: slot l of the beam uses slot l of the
        // channel only, preserving causality.
        let v2i = ext.solve(1, i, &ext.apply(1, 1, &v21));
        let v1i = ext.solve(2, i, &ext.apply(2, 1, &v11));
        put(&mut vmat, 2, i, &v2i);
        put(&mut vmat, 1, i, &v1i);
    }
    Ok(BeamformingPlan {
        tx_count: m,
        rx_count: 2,
        mu: ext.mu,
        kind: PlanKind::PerfectMx2,
        streams: vec![1; 2 * m],
        vmat,
        umat: None,
        subspaces: Vec::new(),
    })
}

// ---------- decode matrices and zero-forcing ----------

/// Desired-signal columns of receiver j followed by the aligned
/// interference basis (the transmitter-1 columns of the other groups).
/// Returns the square matrix and the (i, stream) label of each desired
/// column.
fn decode_matrix(
    plan: &BeamformingPlan,
    ext: &ExtendedChannel,
    j: usize,
) -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(plan.mu);
    let mut labels = Vec::new();
    for i in 1..=plan.tx_count {
        let v = plan.v(j, i);
        for k in 0..v.ncols() {
            cols.push(ext.apply(j, i, &v.column(k).into_owned()));
            labels.push((i, k));
        }
    }
    for l in 1..=plan.rx_count {
        if l != j {
            let v = plan.v(l, 1);
            for k in 0..v.ncols() {
                cols.push(ext.apply(j, 1, &v.column(k).into_owned()));
            }
        }
    }
    let mut lambda = DMatrix::zeros(plan.mu, cols.len());
    for (c, col) in cols.iter().enumerate() {
        lambda.set_column(c, col);
    }
    (lambda, labels)
}

/// Populate the zero-forcing matrices by inverting each receiver's decode
/// matrix; u[ji]_k is the matching row of the inverse, transposed.
///
/// One factorization per receiver, and biorthogonality is exact by
/// construction: the desired gain of every stream is 1 and cross gains
/// vanish to rounding error.
pub fn compute_zero_forcing(
    mut plan: BeamformingPlan,
    ext: &ExtendedChannel,
) -> Result<BeamformingPlan, SchemeError> {
    assert_eq!(
        (plan.tx_count, plan.rx_count, plan.mu),
        (ext.tx_count, ext.rx_count, ext.mu),
        "plan and extension disagree on shape"
    );
    let mut umat: Vec<DMatrix<f64>> =
        plan.vmat.iter().map(|v| DMatrix::zeros(plan.mu, v.ncols())).collect();
    for j in 1..=plan.rx_count {
        let (lambda, labels) = decode_matrix(&plan, ext, j);
        assert_eq!(lambda.ncols(), plan.mu, "decode matrix is not square");
        let (rank, ratio) = numeric_rank(&lambda, RANK_TOL).map_err(SchemeError::from)?;
        if rank < plan.mu {
            return Err(SchemeError::RankFailure { receiver: j, ratio });
        }
        let inv = lambda
            .clone()
            .try_inverse()
            .ok_or(SchemeError::RankFailure { receiver: j, ratio })?;
        for (row, &(i, k)) in labels.iter().enumerate() {
            let u = inv.row(row).transpose();
            umat[plan.msg(j, i)].set_column(k, &u);
        }
    }
    plan.umat = Some(umat);
    Ok(plan)
}

// ---------- reciprocal 2 x M ----------

/// Dual plan for the reciprocal channel: beamformers and zero-forcers swap
/// roles, v_dual[ij] = u[ji] and u_dual[ij] = v[ji], keeping the stream
/// total over the same extension.
///
/// The primal must be a perfect M x 2 plan with zero-forcing computed and
/// a passing verification; the dual then lives on `ext.reciprocal()`.
pub fn build_2xm_reciprocal(
    primal: &BeamformingPlan,
    ext_primal: &ExtendedChannel,
) -> Result<BeamformingPlan, SchemeError> {
    if primal.kind != PlanKind::PerfectMx2 {
        return Err(SchemeError::WrongShape(
            "reciprocal construction expects a perfect M x 2 primal".into(),
        ));
    }
    if !primal.has_zero_forcing() {
        return Err(SchemeError::UnverifiedPrimal(
            "zero-forcing matrices missing".into(),
        ));
    }
    let report = verify_plan(primal, ext_primal, 1e-9);
    if !report.pass {
        return Err(SchemeError::UnverifiedPrimal(format!(
            "max residual {:.3e}, interference dims {:?}",
            report.max_residual, report.interference_dims
        )));
    }
    let m = primal.tx_count;
    let mut vmat = Vec::with_capacity(2 * m);
    let mut umat = Vec::with_capacity(2 * m);
    for jd in 1..=m {
        for id in 1..=2 {
            vmat.push(primal.u(id, jd).expect("primal zero-forcers").clone());
            umat.push(primal.v(id, jd).clone());
        }
    }
    Ok(BeamformingPlan {
        tx_count: 2,
        rx_count: m,
        mu: primal.mu,
        kind: PlanKind::Reciprocal2xM,
        streams: vec![1; 2 * m],
        vmat,
        umat: Some(umat),
        subspaces: Vec::new(),
    })
}

// ---------- general partial alignment ----------

/// Extension length the general construction needs at order n.
pub fn general_extension_len(tx_count: usize, rx_count: usize, n: u32) -> usize {
    let gamma = (tx_count - 1) * (rx_count - 1);
    rx_count * (n as usize + 1).pow(gamma as u32)
        + (tx_count - 1) * (n as usize).pow(gamma as u32)
}

/// Partial alignment for any M x N at order n over mu_n slots.
///
/// Group k (the messages bound for receiver k) shares one subspace pair
/// built over the generators T[ji] = H[j1]^{-1} H[ji] with j != k and
/// i >= 2: transmitter 1 sends V[k1] = Vp ((n+1)^G streams) and every
/// other transmitter reuses V[k2] = V (n^G streams each). At any receiver
/// j != k the group's interference lands inside the span of H[j1] V[k1],
/// because each generator shifts V's columns onto columns of Vp.
pub fn build_general(
    ext: &ExtendedChannel,
    n: u32,
    seed: u64,
) -> Result<BeamformingPlan, SchemeError> {
    let (m, nn) = (ext.tx_count, ext.rx_count);
    if n == 0 {
        return Err(SchemeError::WrongShape("order must be at least 1".into()));
    }
    let want = general_extension_len(m, nn, n);
    if ext.mu != want {
        return Err(SchemeError::WrongExtension {
            want,
            got: ext.mu,
        });
    }
    if !ext.fully_connected() {
        return Err(SchemeError::Degenerate(
            "zero diagonal entry in the extension block".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if m == 1 && nn == 1 {
        // Point to point: no interference to align, a single random beam.
        let w = bounded_column(ext.mu, &mut rng);
        return Ok(BeamformingPlan {
            tx_count: 1,
            rx_count: 1,
            mu: ext.mu,
            kind: PlanKind::GeneralPartial { order: n },
            streams: vec![1],
            vmat: vec![DMatrix::from_column_slice(ext.mu, 1, w.as_slice())],
            umat: None,
            subspaces: Vec::new(),
        });
    }

    let mut vmat = vec![DMatrix::zeros(ext.mu, 0); m * nn];
    let mut streams = vec![0usize; m * nn];
    let mut subspaces = Vec::with_capacity(nn);
    for k in 1..=nn {
        // Generator order is fixed: j ascending skipping k, then i = 2..=M.
        let mut generators = Vec::new();
        for j in (1..=nn).filter(|&j| j != k) {
            for i in 2..=m {
                generators.push(ext.solve(j, 1, ext.diag(j, i)));
            }
        }
        let w = bounded_column(ext.mu, &mut rng);
        let pair = build_subspace_pair(&generators, &w, n)?;
        // The construction pins the subspaces, not the basis inside them.
        // Monomial columns are nearly parallel, which wrecks the decode
        // conditioning at finite SNR, so the plan carries orthonormal
        // bases of the same spans; the pair keeps the raw monomials for
        // index arithmetic.
        let vp_basis = orthonormal_basis(&pair.vp);
        let v_basis = orthonormal_basis(&pair.v);
        for i in 1..=m {
            let idx = (k - 1) * m + (i - 1);
            if i == 1 {
                streams[idx] = vp_basis.ncols();
                vmat[idx] = vp_basis.clone();
            } else {
                streams[idx] = v_basis.ncols();
                vmat[idx] = v_basis.clone();
            }
        }
        subspaces.push(pair);
    }
    Ok(BeamformingPlan {
        tx_count: m,
        rx_count: nn,
        mu: ext.mu,
        kind: PlanKind::GeneralPartial { order: n },
        streams,
        vmat,
        umat: None,
        subspaces,
    })
}

// ---------- verification ----------

fn orthonormal_basis(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let ncols = mat.ncols();
    let q = mat.clone().qr().q();
    q.columns(0, ncols).into_owned()
}

fn expected_interference_dims(plan: &BeamformingPlan) -> Vec<usize> {
    let per_receiver = match plan.kind {
        PlanKind::PerfectMx2 => 1,
        // Zero-forcing pins 2 directions per receiver; everything else is
        // interference room.
        PlanKind::Reciprocal2xM => plan.mu - 2,
        PlanKind::GeneralPartial { .. } => {
            if plan.rx_count == 1 {
                0
            } else {
                let pair_cols = plan.v(1, 1).ncols();
                (plan.rx_count - 1) * pair_cols
            }
        }
    };
    vec![per_receiver; plan.rx_count]
}

fn least_squares_residual(basis: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let svd = basis.clone().svd(true, true);
    let x = svd.solve(y, 0.0).expect("least squares solve");
    (basis * x - y).norm() / y.norm()
}

/// Measure a plan: alignment residuals, interference dimensions, decode
/// conditioning and the achieved DoF. Failures land in the report.
///
/// Alignment is judged per interfering group for the perfect and general
/// constructions (each group's spill must sit in the span of its own
/// transmitter-1 image) and against the pooled transmitter-1 basis for the
/// reciprocal construction, whose interference compresses jointly rather
/// than group by group.
pub fn verify_plan(plan: &BeamformingPlan, ext: &ExtendedChannel, tol: f64) -> AlignmentReport {
    assert_eq!(
        (plan.tx_count, plan.rx_count, plan.mu),
        (ext.tx_count, ext.rx_count, ext.mu),
        "plan and extension disagree on shape"
    );
    let mut max_residual = 0.0_f64;
    let mut interference_dims = Vec::with_capacity(plan.rx_count);
    let mut lambda_ratios = Vec::with_capacity(plan.rx_count);

    for k in 1..=plan.rx_count {
        // Stack every interference column arriving at receiver k.
        let mut all_cols: Vec<DVector<f64>> = Vec::new();
        for j in (1..=plan.rx_count).filter(|&j| j != k) {
            for i in 1..=plan.tx_count {
                let v = plan.v(j, i);
                for c in 0..v.ncols() {
                    all_cols.push(ext.apply(k, i, &v.column(c).into_owned()));
                }
            }
        }
        if all_cols.is_empty() {
            interference_dims.push(0);
        } else {
            let mut stack = DMatrix::zeros(plan.mu, all_cols.len());
            for (c, col) in all_cols.iter().enumerate() {
                stack.set_column(c, col);
            }
            // Normalize columns so the rank tolerance is scale-free.
            for mut col in stack.column_iter_mut() {
                let n2 = col.norm();
                if n2 > 0.0 {
                    col /= n2;
                }
            }
            let (rank, _) = numeric_rank(&stack, RANK_TOL).expect("finite interference");
            interference_dims.push(rank);
        }

        // Residuals of the spill columns against the aligned basis.
        match plan.kind {
            PlanKind::Reciprocal2xM => {
                let basis_cols: Vec<DVector<f64>> = (1..=plan.rx_count)
                    .filter(|&j| j != k)
                    .flat_map(|j| {
                        let img = ext.apply_matrix(k, 1, plan.v(j, 1));
                        img.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>()
                    })
                    .collect();
                let basis = DMatrix::from_columns(&basis_cols);
                for j in (1..=plan.rx_count).filter(|&j| j != k) {
                    for i in 2..=plan.tx_count {
                        let img = ext.apply_matrix(k, i, plan.v(j, i));
                        for c in 0..img.ncols() {
                            let r = least_squares_residual(&basis, &img.column(c).into_owned());
                            max_residual = max_residual.max(r);
                        }
                    }
                }
            }
            _ => {
                for j in (1..=plan.rx_count).filter(|&j| j != k) {
                    let basis = ext.apply_matrix(k, 1, plan.v(j, 1));
                    for i in 2..=plan.tx_count {
                        let img = ext.apply_matrix(k, i, plan.v(j, i));
                        for c in 0..img.ncols() {
                            let r = least_squares_residual(&basis, &img.column(c).into_owned());
                            max_residual = max_residual.max(r);
                        }
                    }
                }
            }
        }

        let (lambda, _) = decode_matrix(plan, ext, k);
        let (_, ratio) = numeric_rank(&lambda, RANK_TOL).expect("finite decode matrix");
        lambda_ratios.push(ratio);
    }

    let expected_dims = expected_interference_dims(plan);
    let pass = max_residual < tol
        && lambda_ratios.iter().all(|&r| r >= RANK_TOL)
        && interference_dims == expected_dims;
    AlignmentReport {
        interference_dims,
        expected_dims,
        lambda_ratios,
        max_residual,
        achieved_dof: achieved_dof(plan),
        pass,
    }
}

/// Total streams over the extension length, exactly.
pub fn achieved_dof(plan: &BeamformingPlan) -> Dof {
    Dof::new(plan.total_streams() as u64, plan.mu as u64)
}

/// All pairwise decode gains u_s^T H v_t in the canonical stream order.
/// For a correct plan this is the identity up to rounding.
pub fn cross_gain_matrix(plan: &BeamformingPlan, ext: &ExtendedChannel) -> DMatrix<f64> {
    let layout = plan.stream_layout();
    let s = layout.len();
    let mut g = DMatrix::zeros(s, s);
    for (row, &(j, i, k)) in layout.iter().enumerate() {
        let u = plan
            .u(j, i)
            .expect("zero-forcing must be computed first")
            .column(k)
            .into_owned();
        for (col, &(lj, li, lk)) in layout.iter().enumerate() {
            let v = plan.v(lj, li).column(lk).into_owned();
            g[(row, col)] = u.dot(&ext.apply(j, li, &v));
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{extend, sample_channel};
    use proptest::prelude::*;

    fn mx2_ext(m: usize, seed: u64) -> ExtendedChannel {
        let p = sample_channel(m, 2, m + 1, seed, 0.5, 2.0).unwrap();
        extend(&p, 0, m + 1).unwrap()
    }

    fn general_ext(m: usize, n_rx: usize, order: u32, seed: u64) -> ExtendedChannel {
        let mu = general_extension_len(m, n_rx, order);
        let p = sample_channel(m, n_rx, mu, seed, 0.5, 2.0).unwrap();
        extend(&p, 0, mu).unwrap()
    }

    #[test]
    fn perfect_alignment_equations_hold_exactly() {
        let ext = mx2_ext(2, 11);
        let plan = build_mx2(&ext, 1).unwrap();
        // H[12] v[22] = H[11] v[21] and H[22] v[12] = H[21] v[11].
        let lhs = ext.apply(1, 2, &plan.v(2, 2).column(0).into_owned());
        let rhs = ext.apply(1, 1, &plan.v(2, 1).column(0).into_owned());
        assert!((lhs - rhs).amax() < 1e-13, "receiver-1 alignment broken");
        let lhs = ext.apply(2, 2, &plan.v(1, 2).column(0).into_owned());
        let rhs = ext.apply(2, 1, &plan.v(1, 1).column(0).into_owned());
        assert!((lhs - rhs).amax() < 1e-13, "receiver-2 alignment broken");
    }

    #[test]
    fn mx2_stream_accounting() {
        for m in [1usize, 2, 3, 5] {
            let ext = mx2_ext(m, 40 + m as u64);
            let plan = build_mx2(&ext, 7).unwrap();
            assert_eq!(plan.total_streams(), 2 * m);
            assert_eq!(achieved_dof(&plan), Dof::new(2 * m as u64, m as u64 + 1));
        }
    }

    #[test]
    fn mx2_rejects_bad_shapes() {
        let p = sample_channel(2, 3, 3, 1, 0.5, 2.0).unwrap();
        let ext = extend(&p, 0, 3).unwrap();
        assert!(matches!(build_mx2(&ext, 0), Err(SchemeError::WrongShape(_))));
        let p = sample_channel(2, 2, 4, 1, 0.5, 2.0).unwrap();
        let ext = extend(&p, 0, 4).unwrap();
        assert!(matches!(
            build_mx2(&ext, 0),
            Err(SchemeError::WrongExtension { want: 3, got: 4 })
        ));
    }

    #[test]
    fn mx2_rejects_degenerate_channels() {
        let ext = mx2_ext(2, 5);
        let mut diags = Vec::new();
        for j in 1..=2 {
            let mut row = Vec::new();
            for i in 1..=2 {
                row.push(ext.diag(j, i).clone());
            }
            diags.push(row);
        }
        diags[0][1][2] = 0.0;
        let broken = ExtendedChannel::from_diagonals(diags);
        assert!(matches!(
            build_mx2(&broken, 0),
            Err(SchemeError::Degenerate(_))
        ));
    }

    #[test]
    fn mx2_beams_are_slotwise_causal() {
        // Rebuilding component l from slot-l channel entries alone must
        // reproduce the derived beams.
        let ext = mx2_ext(4, 17);
        let plan = build_mx2(&ext, 23).unwrap();
        for i in 2..=4 {
            for l in 0..ext.mu {
                let expect2 = ext.diag(1, 1)[l] * plan.v(2, 1)[(l, 0)] / ext.diag(1, i)[l];
                assert_eq!(plan.v(2, i)[(l, 0)], expect2);
                let expect1 = ext.diag(2, 1)[l] * plan.v(1, 1)[(l, 0)] / ext.diag(2, i)[l];
                assert_eq!(plan.v(1, i)[(l, 0)], expect1);
            }
        }
    }

    #[test]
    fn zero_forcing_gains_form_the_identity() {
        let ext = mx2_ext(3, 29);
        let plan = compute_zero_forcing(build_mx2(&ext, 31).unwrap(), &ext).unwrap();
        let g = cross_gain_matrix(&plan, &ext);
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!(
                    (g[(r, c)] - want).abs() < 1e-9,
                    "gain ({r},{c}) = {} off identity",
                    g[(r, c)]
                );
            }
        }
    }

    #[test]
    fn umat_rows_invert_the_decode_matrix() {
        let ext = mx2_ext(2, 3);
        let plan = compute_zero_forcing(build_mx2(&ext, 4).unwrap(), &ext).unwrap();
        // Cross term (u[11])^T H[12] v[22] vanishes: that interference sits
        // in the zero-forced direction.
        let u11 = plan.u(1, 1).unwrap().column(0).into_owned();
        let cross = u11.dot(&ext.apply(1, 2, &plan.v(2, 2).column(0).into_owned()));
        assert!(cross.abs() < 1e-12);
        let desired = u11.dot(&ext.apply(1, 1, &plan.v(1, 1).column(0).into_owned()));
        assert!((desired - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mx2_plans_verify_across_seeds() {
        for m in [2usize, 4] {
            let mut passes = 0;
            for seed in 0..100 {
                let ext = mx2_ext(m, 1000 + seed);
                let plan = compute_zero_forcing(build_mx2(&ext, seed).unwrap(), &ext).unwrap();
                let report = verify_plan(&plan, &ext, 1e-9);
                assert_eq!(report.interference_dims, vec![1, 1]);
                if report.pass {
                    passes += 1;
                }
            }
            assert!(passes >= 99, "M = {m}: only {passes}/100 verified");
        }
    }

    #[test]
    fn reciprocal_plan_mirrors_the_primal() {
        let ext = mx2_ext(3, 41);
        let primal = compute_zero_forcing(build_mx2(&ext, 43).unwrap(), &ext).unwrap();
        let dual = build_2xm_reciprocal(&primal, &ext).unwrap();
        assert_eq!((dual.tx_count, dual.rx_count, dual.mu), (2, 3, 4));
        assert_eq!(dual.total_streams(), primal.total_streams());
        for jd in 1..=3 {
            for id in 1..=2 {
                assert_eq!(dual.v(jd, id), primal.u(id, jd).unwrap());
                // Dual of the dual: the zero-forcers are the primal beams.
                assert_eq!(dual.u(jd, id).unwrap(), primal.v(id, jd));
            }
        }
    }

    #[test]
    fn reciprocal_plan_verifies_on_the_reciprocal_channel() {
        for m in [2usize, 3, 4] {
            let ext = mx2_ext(m, 60 + m as u64);
            let primal = compute_zero_forcing(build_mx2(&ext, 5).unwrap(), &ext).unwrap();
            let dual = build_2xm_reciprocal(&primal, &ext).unwrap();
            let dual_ext = ext.reciprocal();
            let report = verify_plan(&dual, &dual_ext, 1e-9);
            assert!(report.pass, "M = {m}: {report:?}");
            assert_eq!(report.interference_dims, vec![m - 1; m]);
            let g = cross_gain_matrix(&dual, &dual_ext);
            for r in 0..g.nrows() {
                for c in 0..g.ncols() {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((g[(r, c)] - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reciprocal_requires_a_verified_primal() {
        let ext = mx2_ext(2, 71);
        let plan = build_mx2(&ext, 73).unwrap();
        assert!(matches!(
            build_2xm_reciprocal(&plan, &ext),
            Err(SchemeError::UnverifiedPrimal(_))
        ));
    }

    #[test]
    fn general_stream_counts_match_the_formula() {
        // (M, N, n) -> total streams, mu.
        for (m, n_rx, order, streams, mu) in [
            (2usize, 2usize, 1u32, 6usize, 5usize),
            (2, 2, 2, 10, 8),
            (2, 2, 3, 14, 11),
            (2, 3, 1, 15, 13),
            (3, 2, 1, 12, 10),
            (3, 3, 1, 54, 50),
        ] {
            let ext = general_ext(m, n_rx, order, 90 + order as u64);
            let plan = build_general(&ext, order, 7).unwrap();
            assert_eq!(plan.mu, mu, "({m},{n_rx},{order}) extension length");
            assert_eq!(
                plan.total_streams(),
                streams,
                "({m},{n_rx},{order}) stream total"
            );
        }
    }

    #[test]
    fn general_dof_climbs_toward_the_bound() {
        use crate::dof_region::total_dof_bound;
        use num::BigInt;
        use num::rational::BigRational;
        let to_big = |d: Dof| {
            BigRational::new(BigInt::from(*d.numer()), BigInt::from(*d.denom()))
        };
        let mut last = None;
        for order in 1..=4u32 {
            let plan_dof = Dof::new(
                2 * (order as u64 + 1) + 2 * order as u64,
                general_extension_len(2, 2, order) as u64,
            );
            if let Some(prev) = last {
                assert!(plan_dof > prev, "DoF not strictly increasing at {order}");
            }
            assert!(to_big(plan_dof) < total_dof_bound(2, 2));
            last = Some(plan_dof);
        }
    }

    #[test]
    fn general_plans_verify_with_expected_interference() {
        for (m, n_rx, order) in [(2usize, 2usize, 1u32), (2, 2, 2), (2, 3, 1), (3, 2, 1)] {
            let ext = general_ext(m, n_rx, order, 7 * order as u64 + m as u64);
            let plan =
                compute_zero_forcing(build_general(&ext, order, 3).unwrap(), &ext).unwrap();
            let report = verify_plan(&plan, &ext, 1e-9);
            let gamma = ((m - 1) * (n_rx - 1)) as u32;
            let expect = (n_rx - 1) * (order as usize + 1).pow(gamma);
            assert!(report.pass, "({m},{n_rx},{order}): {report:?}");
            assert_eq!(report.interference_dims, vec![expect; n_rx]);
        }
    }

    #[test]
    fn general_interference_lands_on_exact_partner_columns() {
        // Each spill column of group k at receiver j is collinear with the
        // transmitter-1 column whose exponent tuple is shifted by one in
        // the matching generator slot.
        let ext = general_ext(2, 2, 2, 123);
        let plan = build_general(&ext, 2, 5).unwrap();
        for k in 1..=2usize {
            let j = 3 - k; // the other receiver
            let pair = plan.subspace(k).unwrap();
            // Single generator: T[j2] in the j != k, i = 2 slot.
            let img = ext.apply_matrix(j, 2, &pair.v);
            let basis = ext.apply_matrix(j, 1, &pair.vp);
            for (c, tuple) in pair.v_exponents.iter().enumerate() {
                let mut shifted = tuple.clone();
                shifted[0] += 1;
                let d = pair.vp_col(&shifted);
                let y = img.column(c).into_owned().normalize();
                let x = basis.column(d).into_owned().normalize();
                let res = (y.clone() - &x).amax().min((y + x).amax());
                assert!(res < 1e-12, "column {c} missed its partner (res {res})");
            }
        }
    }

    #[test]
    fn general_beams_avoid_own_receiver_coefficients() {
        // Group k generators exclude j = k, so rebuilding the pair from
        // channels of the other receivers reproduces V[k1] exactly.
        let ext = general_ext(2, 2, 1, 55);
        let plan = build_general(&ext, 1, 9).unwrap();
        for k in 1..=2usize {
            let pair = plan.subspace(k).unwrap();
            for gen in &pair.generators {
                let j = 3 - k;
                let expect = ext.solve(j, 1, ext.diag(j, 2));
                assert_eq!(gen, &expect, "group {k} generator touches receiver {k}");
            }
        }
    }

    #[test]
    fn tight_packing_fills_the_extension() {
        for (m, n_rx, order) in [(2usize, 2usize, 1u32), (2, 3, 1), (3, 2, 2)] {
            let ext = general_ext(m, n_rx, order, 31);
            let plan = build_general(&ext, order, 2).unwrap();
            let gamma = ((m - 1) * (n_rx - 1)) as u32;
            let desired: usize = (1..=m).map(|i| plan.streams(1, i)).sum();
            let interference = (n_rx - 1) * (order as usize + 1).pow(gamma);
            assert_eq!(desired + interference, plan.mu);
        }
    }

    #[test]
    fn perturbed_plans_fail_verification() {
        let ext = general_ext(2, 2, 1, 77);
        let mut plan = build_general(&ext, 1, 11).unwrap();
        let msg = plan.msg(1, 2);
        plan.vmat[msg][(0, 0)] += 0.01;
        let report = verify_plan(&plan, &ext, 1e-9);
        assert!(!report.pass);
        assert!(report.max_residual > 1e-9);
    }

    #[test]
    fn point_to_point_plan_is_a_single_stream() {
        let ext = general_ext(1, 1, 1, 5);
        let plan = compute_zero_forcing(build_general(&ext, 1, 6).unwrap(), &ext).unwrap();
        assert_eq!(plan.total_streams(), 1);
        assert_eq!(achieved_dof(&plan), Dof::new(1, 1));
        assert!(verify_plan(&plan, &ext, 1e-9).pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn mx2_alignment_is_exact_for_any_seed(
            m in 1usize..=5,
            chan_seed in 0u64..(1u64 << 40),
            beam_seed in 0u64..(1u64 << 40),
        ) {
            let p = sample_channel(m, 2, m + 1, chan_seed, 0.5, 2.0).unwrap();
            let ext = extend(&p, 0, m + 1).unwrap();
            let plan = build_mx2(&ext, beam_seed).unwrap();
            for i in 2..=m {
                let r1 = (ext.apply(1, i, &plan.v(2, i).column(0).into_owned())
                    - ext.apply(1, 1, &plan.v(2, 1).column(0).into_owned()))
                .amax();
                let r2 = (ext.apply(2, i, &plan.v(1, i).column(0).into_owned())
                    - ext.apply(2, 1, &plan.v(1, 1).column(0).into_owned()))
                .amax();
                prop_assert!(r1 < 1e-12 && r2 < 1e-12);
            }
            prop_assert_eq!(
                achieved_dof(&plan),
                Dof::new(2 * m as u64, m as u64 + 1)
            );
        }
    }

    #[test]
    fn broadcast_and_mac_rows_degenerate_cleanly() {
        // 1 x N and M x 1 have gamma = 0: every group is one stream wide.
        let ext = general_ext(1, 3, 1, 8);
        let plan = compute_zero_forcing(build_general(&ext, 1, 9).unwrap(), &ext).unwrap();
        assert_eq!(plan.total_streams(), 3);
        assert!(verify_plan(&plan, &ext, 1e-9).pass);
        let ext = general_ext(4, 1, 1, 9);
        let plan = compute_zero_forcing(build_general(&ext, 1, 10).unwrap(), &ext).unwrap();
        assert_eq!(plan.total_streams(), 4);
        assert!(verify_plan(&plan, &ext, 1e-9).pass);
    }
}
