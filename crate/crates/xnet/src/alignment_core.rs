//! Rank certification and aligned subspace construction.
//!
//! Two building blocks shared by every beamforming scheme in this crate:
//!
//! - `numeric_rank`: SVD-based rank decision with a relative tolerance,
//!   reporting the smallest/largest singular-value ratio so near-degenerate
//!   inputs are diagnosable instead of silently passing or failing.
//! - `SubspacePair`: given commuting diagonal generators T_1..T_G and a seed
//!   column w, the matrices V (columns prod T_i^{a_i} w over exponents
//!   a_i in 1..=n) and Vp (same with a_i in 1..=n+1). Multiplying any
//!   column of V by any generator lands exactly on a column of Vp, which is
//!   the containment T_i V < Vp that partial alignment is built on. Each
//!   row of V and Vp is a monomial function of that row's generator entries,
//!   so full column rank holds with probability 1 for continuous draws.
//!
//! `monomial_matrix` generates the canonical random matrix family behind
//! that rank claim: row i holds ascending powers of a row-private random
//! variable, making all entries of a row pairwise different monomials.

use crate::channel::{DEFAULT_H_MAX, DEFAULT_H_MIN};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("extension length {mu} must exceed (n+1)^gamma = {needed} (n = {n}, gamma = {gamma})")]
    TooShort {
        mu: usize,
        n: u32,
        gamma: usize,
        needed: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

// ---------- numeric rank ----------

/// SVD rank at a relative tolerance.
///
/// Counts singular values at or above rel_tol times the largest one and
/// reports (rank, smallest/largest ratio). A zero matrix has rank 0 and
/// ratio 0 by convention.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> Result<(usize, f64), AlignError> {
    assert!(a.nrows() > 0 && a.ncols() > 0, "empty matrix");
    assert!(rel_tol > 0.0 && rel_tol < 1.0, "tolerance must sit in (0,1)");
    if a.iter().any(|x| !x.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let s_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if s_max == 0.0 {
        return Ok((0, 0.0));
    }
    let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let rank = sv.iter().filter(|&&s| s >= rel_tol * s_max).count();
    Ok((rank, s_min / s_max))
}

/// Default relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

// ---------- random monomial matrices ----------

/// Square random matrix whose row i is [x_i, x_i^2, ..., x_i^m] for a
/// row-private bounded variable x_i.
///
/// Entries within a row are pairwise different monomials of the row's
/// variables, which makes the determinant a nonzero polynomial and the
/// matrix full rank for almost every draw. `vars_per_row` variables are
/// drawn per row; the canonical exponent pattern uses the first.
pub fn monomial_matrix(m: usize, vars_per_row: usize, seed: u64) -> DMatrix<f64> {
    assert!(m >= 1 && vars_per_row >= 1, "empty construction");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let vars: Vec<f64> = (0..vars_per_row)
            .map(|_| {
                let mag = DEFAULT_H_MIN + (DEFAULT_H_MAX - DEFAULT_H_MIN) * rng.gen::<f64>();
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        rows.push(DVector::from_fn(m, |j, _| vars[0].powi(j as i32 + 1)).transpose());
    }
    DMatrix::from_rows(&rows)
}

// ---------- aligned subspace pairs ----------

/// The pair (V, Vp) of monomial column spaces over commuting diagonal
/// generators, with V shifted into Vp by every generator.
///
/// Columns are ordered lexicographically by exponent tuple (first generator
/// most significant) and scale-normalized to unit 2-norm; the original
/// norms are kept in `v_scale` / `vp_scale` so exact containment can be
/// checked with matched rescaling. Exponents start at 1, so a generator
/// shift a -> a + e_i stays inside 1..=n+1.
#[derive(Debug, Clone)]
pub struct SubspacePair {
    pub mu: usize,
    /// Alignment order n: V exponents range over 1..=n.
    pub order: u32,
    /// Generator count.
    pub gamma: usize,
    /// Diagonals of the generators T_1..T_G.
    pub generators: Vec<DVector<f64>>,
    /// The seed column w.
    pub seed_col: DVector<f64>,
    /// mu x n^gamma, unit columns.
    pub v: DMatrix<f64>,
    /// mu x (n+1)^gamma, unit columns.
    pub vp: DMatrix<f64>,
    /// Pre-normalization 2-norms, one per column of `v`.
    pub v_scale: Vec<f64>,
    /// Pre-normalization 2-norms, one per column of `vp`.
    pub vp_scale: Vec<f64>,
    /// Column c of `v` carries exponent tuple `v_exponents[c]`.
    pub v_exponents: Vec<Vec<u32>>,
    pub vp_exponents: Vec<Vec<u32>>,
}

/// Enumerate exponent tuples over {1..=base}^gamma in lexicographic order.
fn exponent_tuples(gamma: usize, base: u32) -> Vec<Vec<u32>> {
    let count = (base as usize).pow(gamma as u32);
    let mut out = Vec::with_capacity(count);
    for mut c in 0..count {
        let mut tuple = vec![1u32; gamma];
        for slot in (0..gamma).rev() {
            tuple[slot] = 1 + (c % base as usize) as u32;
            c /= base as usize;
        }
        out.push(tuple);
    }
    out
}

/// Lexicographic column index of an exponent tuple over {1..=base}^gamma.
fn tuple_index(base: u32, tuple: &[u32]) -> usize {
    let mut idx = 0usize;
    for &a in tuple {
        debug_assert!((1..=base).contains(&a));
        idx = idx * base as usize + (a as usize - 1);
    }
    idx
}

fn monomial_column(generators: &[DVector<f64>], w: &DVector<f64>, tuple: &[u32]) -> DVector<f64> {
    DVector::from_fn(w.len(), |r, _| {
        let mut x = w[r];
        for (t, &a) in generators.iter().zip(tuple) {
            x *= t[r].powi(a as i32);
        }
        x
    })
}

/// Build the aligned pair (V, Vp) of orders n and n+1.
///
/// Requires mu > (n+1)^gamma (the padding argument for the enclosing full
/// rank matrix wants strict slack), every generator diagonal nonzero, and
/// a seed column with no zero entries.
pub fn build_subspace_pair(
    generators: &[DVector<f64>],
    w: &DVector<f64>,
    n: u32,
) -> Result<SubspacePair, AlignError> {
    assert!(n >= 1, "order must be at least 1");
    let gamma = generators.len();
    let mu = w.len();
    let needed = (n as usize + 1).pow(gamma as u32);
    if mu <= needed {
        return Err(AlignError::TooShort {
            mu,
            n,
            gamma,
            needed,
        });
    }
    for (i, t) in generators.iter().enumerate() {
        if t.len() != mu {
            return Err(AlignError::Degenerate(format!(
                "generator {i} has length {} but the seed column has {mu}",
                t.len()
            )));
        }
        if t.iter().any(|&x| x == 0.0 || !x.is_finite()) {
            return Err(AlignError::Degenerate(format!(
                "generator {i} has a zero or non-finite diagonal entry"
            )));
        }
    }
    if w.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(AlignError::Degenerate(
            "seed column has a zero or non-finite entry".into(),
        ));
    }

    let build = |base: u32| {
        let tuples = exponent_tuples(gamma, base);
        let mut mat = DMatrix::zeros(mu, tuples.len());
        let mut scale = Vec::with_capacity(tuples.len());
        for (c, tuple) in tuples.iter().enumerate() {
            let col = monomial_column(generators, w, tuple);
            let norm = col.norm();
            scale.push(norm);
            mat.set_column(c, &(col / norm));
        }
        (mat, scale, tuples)
    };
    let (v, v_scale, v_exponents) = build(n);
    let (vp, vp_scale, vp_exponents) = build(n + 1);

    Ok(SubspacePair {
        mu,
        order: n,
        gamma,
        generators: generators.to_vec(),
        seed_col: w.clone(),
        v,
        vp,
        v_scale,
        vp_scale,
        v_exponents,
        vp_exponents,
    })
}

impl SubspacePair {
    /// Column index of an exponent tuple in `v`.
    pub fn v_col(&self, tuple: &[u32]) -> usize {
        assert_eq!(tuple.len(), self.gamma);
        tuple_index(self.order, tuple)
    }

    /// Column index of an exponent tuple in `vp`.
    pub fn vp_col(&self, tuple: &[u32]) -> usize {
        assert_eq!(tuple.len(), self.gamma);
        tuple_index(self.order + 1, tuple)
    }

    /// Largest relative error of the shift identity for one generator:
    /// T_i V[:, a] against Vp[:, a + e_i] at original scale, over all a.
    ///
    /// Pure column-index arithmetic, no searching. Construction makes the
    /// identity exact, so only floating-point error shows up here.
    pub fn containment_residual(&self, gen_index: usize) -> f64 {
        assert!(gen_index < self.gamma);
        let t = &self.generators[gen_index];
        let mut worst = 0.0_f64;
        for (c, tuple) in self.v_exponents.iter().enumerate() {
            let mut shifted = tuple.clone();
            shifted[gen_index] += 1;
            let d = self.vp_col(&shifted);
            let lhs = t.component_mul(&self.v.column(c).into_owned()) * self.v_scale[c];
            let rhs = self.vp.column(d) * self.vp_scale[d];
            let scale = lhs.amax().max(rhs.amax());
            let err = (lhs - rhs).amax() / scale;
            worst = worst.max(err);
        }
        worst
    }
}

/// Does T map every column of `pair.v` into the columns of `pair.vp`?
///
/// A column counts as contained when some column of Vp matches it up to a
/// scalar within `tol` (max-abs, relative to the column scale) and its
/// least-squares residual against the whole of Vp is below `tol` as well.
/// Generators of the pair always pass; an unrelated diagonal fails almost
/// surely.
pub fn check_containment(t: &DVector<f64>, pair: &SubspacePair, tol: f64) -> bool {
    assert_eq!(t.len(), pair.mu, "generator length mismatch");
    let svd = pair.vp.clone().svd(true, true);
    for c in 0..pair.v.ncols() {
        let y = t.component_mul(&pair.v.column(c).into_owned());
        let y_inf = y.amax();
        let matched = (0..pair.vp.ncols()).any(|d| {
            let col = pair.vp.column(d);
            let s = col.dot(&y);
            (&y - col * s).amax() <= tol * y_inf
        });
        if !matched {
            return false;
        }
        let x = svd.solve(&y, 0.0).expect("least squares solve");
        if (&pair.vp * x - &y).norm() > tol * y.norm() {
            return false;
        }
    }
    true
}
