//! Degrees-of-freedom region outerbound and its linear programs.
//!
//! For every transmitter m and receiver n of an M x N X network the region
//! obeys
//!
//! ```text
//! sum_q d_{q m} + sum_p d_{n p} - d_{n m} <= max(At_m, Ar_n)
//! ```
//!
//! one constraint per (m, n) pair, together with nonnegativity and any
//! absent messages pinned to zero. Everything here runs in exact rational
//! arithmetic: the data are small integers and degenerate vertices are the
//! rule, so floating-point tie-breaking would be the only source of wrong
//! answers. A brute-force vertex-enumeration oracle certifies the simplex
//! on small instances through a fully independent code path.

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use std::collections::BTreeSet;
use thiserror::Error;

/// Exact rational scalar used throughout this module.
pub type Rat = BigRational;

/// Shorthand rational constructor.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("antenna counts must all be at least 1")]
    BadAntennas,
    #[error("antenna list lengths must match the node counts")]
    AntennaLength,
    #[error("null mask entry ({j}, {i}) outside {{1..N}} x {{1..M}}")]
    MaskOutOfRange { j: usize, i: usize },
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("objective is unbounded over the feasible region")]
    Unbounded,
    #[error("negative right-hand side; the slack basis is not a feasible start")]
    NegativeRhs,
}

// ---------- region description ----------

/// Which outerbound polytope: node counts, antenna counts, absent messages.
#[derive(Debug, Clone)]
pub struct DofRegionSpec {
    /// Transmitter count M.
    pub tx_count: usize,
    /// Receiver count N.
    pub rx_count: usize,
    /// Transmit antennas At_m, length M.
    pub tx_antennas: Vec<u32>,
    /// Receive antennas Ar_n, length N.
    pub rx_antennas: Vec<u32>,
    /// Messages (j, i) that do not exist; their d_{ji} is pinned to 0.
    pub null_mask: BTreeSet<(usize, usize)>,
}

impl DofRegionSpec {
    /// All antennas 1, every message present.
    pub fn single_antenna(tx_count: usize, rx_count: usize) -> DofRegionSpec {
        DofRegionSpec {
            tx_count,
            rx_count,
            tx_antennas: vec![1; tx_count],
            rx_antennas: vec![1; rx_count],
            null_mask: BTreeSet::new(),
        }
    }

    /// Same, with the given messages removed.
    pub fn with_null_mask(
        tx_count: usize,
        rx_count: usize,
        mask: impl IntoIterator<Item = (usize, usize)>,
    ) -> DofRegionSpec {
        DofRegionSpec {
            null_mask: mask.into_iter().collect(),
            ..DofRegionSpec::single_antenna(tx_count, rx_count)
        }
    }

    /// Flat variable index of d_{ji} (receiver j, transmitter i, 1-based).
    pub fn var_index(&self, j: usize, i: usize) -> usize {
        assert!((1..=self.rx_count).contains(&j) && (1..=self.tx_count).contains(&i));
        (j - 1) * self.tx_count + (i - 1)
    }

    fn validate(&self) -> Result<(), RegionError> {
        assert!(self.tx_count >= 1 && self.rx_count >= 1, "empty network");
        if self.tx_antennas.len() != self.tx_count || self.rx_antennas.len() != self.rx_count {
            return Err(RegionError::AntennaLength);
        }
        if self.tx_antennas.iter().chain(&self.rx_antennas).any(|&a| a == 0) {
            return Err(RegionError::BadAntennas);
        }
        for &(j, i) in &self.null_mask {
            if !(1..=self.rx_count).contains(&j) || !(1..=self.tx_count).contains(&i) {
                return Err(RegionError::MaskOutOfRange { j, i });
            }
        }
        Ok(())
    }
}

/// Maximize objective . d subject to the rows, d >= 0, pinned vars at 0.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Rat>,
    /// Rows (coefficients, rhs) meaning coefficients . d <= rhs.
    pub constraints: Vec<(Vec<Rat>, Rat)>,
    /// Variables fixed to zero (absent messages).
    pub pinned: BTreeSet<usize>,
}

/// Assemble the outerbound polytope for a region spec.
///
/// Constraint rows are ordered lexicographically by (m, n); the default
/// objective weights every present message 1, so the optimum is the total
/// DoF bound over the region.
pub fn region_constraints(spec: &DofRegionSpec) -> Result<LinearProgram, RegionError> {
    spec.validate()?;
    let (m_cnt, n_cnt) = (spec.tx_count, spec.rx_count);
    let num_vars = m_cnt * n_cnt;
    let pinned: BTreeSet<usize> = spec
        .null_mask
        .iter()
        .map(|&(j, i)| spec.var_index(j, i))
        .collect();
    let mut constraints = Vec::with_capacity(num_vars);
    for m in 1..=m_cnt {
        for n in 1..=n_cnt {
            let mut row = vec![Rat::zero(); num_vars];
            for q in 1..=n_cnt {
                row[spec.var_index(q, m)] += Rat::one();
            }
            for p in 1..=m_cnt {
                row[spec.var_index(n, p)] += Rat::one();
            }
            row[spec.var_index(n, m)] -= Rat::one();
            let rhs = Rat::from_integer(BigInt::from(
                spec.tx_antennas[m - 1].max(spec.rx_antennas[n - 1]),
            ));
            constraints.push((row, rhs));
        }
    }
    let objective = (0..num_vars)
        .map(|v| if pinned.contains(&v) { Rat::zero() } else { Rat::one() })
        .collect();
    Ok(LinearProgram {
        num_vars,
        objective,
        constraints,
        pinned,
    })
}

// ---------- simplex ----------

/// An exact optimum: value, a maximizing point, and the tight rows.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: Rat,
    pub point: Vec<Rat>,
    /// Indices into `constraints` that hold with equality at `point`.
    pub binding: Vec<usize>,
}

/// Dense tableau simplex with Bland's pivoting rule, exact arithmetic.
///
/// Right-hand sides must be nonnegative so the slack basis is feasible;
/// every outerbound LP satisfies that (antenna counts are positive).
/// Bland's rule never cycles, which matters because these polytopes are
/// highly degenerate at the symmetric optimum.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.constraints.len();
    let n = lp.num_vars;
    if lp.constraints.iter().any(|(_, b)| b.is_negative()) {
        return Err(LpError::NegativeRhs);
    }

    // Columns: structural variables 0..n, slacks n..n+m, rhs last.
    let width = n + m + 1;
    let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m + 1);
    for (r, (row, rhs)) in lp.constraints.iter().enumerate() {
        let mut t = vec![Rat::zero(); width];
        t[..n].clone_from_slice(row);
        t[n + r] = Rat::one();
        t[width - 1] = rhs.clone();
        tab.push(t);
    }
    // Objective row keeps c - z; positive entries are improving directions.
    let mut obj = vec![Rat::zero(); width];
    obj[..n].clone_from_slice(&lp.objective);
    for v in &lp.pinned {
        obj[*v] = Rat::zero();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering column is the lowest-index improving variable.
        let entering = (0..n + m)
            .filter(|c| !lp.pinned.contains(c))
            .find(|&c| obj[c].is_positive());
        let Some(col) = entering else { break };

        // Leaving row: minimum ratio, ties to the smallest basis variable.
        let mut leave: Option<(usize, Rat)> = None;
        for r in 0..m {
            if tab[r][col].is_positive() {
                let ratio = &tab[r][width - 1] / &tab[r][col];
                let better = match &leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < *lratio || (ratio == *lratio && basis[r] < basis[*lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return Err(LpError::Unbounded);
        };

        // Pivot.
        let piv = tab[row][col].clone();
        for x in tab[row].iter_mut() {
            *x /= &piv;
        }
        for r in 0..m {
            if r != row && !tab[r][col].is_zero() {
                let f = tab[r][col].clone();
                for c in 0..width {
                    let d = &tab[row][c] * &f;
                    tab[r][c] -= d;
                }
            }
        }
        if !obj[col].is_zero() {
            let f = obj[col].clone();
            for c in 0..width {
                let d = &tab[row][c] * &f;
                obj[c] -= d;
            }
        }
        basis[row] = col;
    }

    let mut point = vec![Rat::zero(); n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            point[b] = tab[r][width - 1].clone();
        }
    }
    let value = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .fold(Rat::zero(), |a, b| a + b);
    let binding = lp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, (row, rhs))| {
            let lhs = row
                .iter()
                .zip(&point)
                .map(|(c, x)| c * x)
                .fold(Rat::zero(), |a, b| a + b);
            lhs == *rhs
        })
        .map(|(r, _)| r)
        .collect();
    Ok(LpSolution {
        value,
        point,
        binding,
    })
}

// ---------- closed forms ----------

/// Total DoF outerbound MN / (M + N - 1) of the single-antenna network.
pub fn total_dof_bound(tx_count: u64, rx_count: u64) -> Rat {
    assert!(tx_count >= 1 && rx_count >= 1);
    Rat::new(
        BigInt::from(tx_count * rx_count),
        BigInt::from(tx_count + rx_count - 1),
    )
}

/// The A-antenna achievable total AMN / (M + N - 1/A), as the exact
/// rational A^2 MN / (A(M+N) - 1). Formula only; no scheme behind it.
pub fn mimo_innerbound_formula(tx_count: u64, rx_count: u64, antennas: u64) -> Rat {
    assert!(tx_count >= 1 && rx_count >= 1 && antennas >= 1);
    Rat::new(
        BigInt::from(antennas * antennas * tx_count * rx_count),
        BigInt::from(antennas * (tx_count + rx_count) - 1),
    )
}

// ---------- independent certification ----------

pub mod oracle {
    //! Brute-force vertex enumeration, kept deliberately separate from the
    //! simplex: every size-k subset of the constraint rows (structural and
    //! nonnegativity alike, k = free variable count) is solved as an exact
    //! equality system, feasible solutions are collected, and the best
    //! objective value over them certifies the LP answer on small regions.

    use super::{LinearProgram, Rat};
    use itertools::Itertools;
    use num::{Signed, Zero};

    /// Maximum free-variable count the enumeration will attempt.
    pub const MAX_FREE_VARS: usize = 9;

    /// Exact maximum of the objective over the polytope's vertices.
    ///
    /// Returns the optimal value and one optimal vertex. With a bounded
    /// feasible region this equals the LP optimum. Panics past
    /// `MAX_FREE_VARS` free variables; the subset count explodes.
    pub fn best_vertex(lp: &LinearProgram) -> Option<(Rat, Vec<Rat>)> {
        let free: Vec<usize> = (0..lp.num_vars).filter(|v| !lp.pinned.contains(v)).collect();
        let k = free.len();
        assert!(k <= MAX_FREE_VARS, "vertex enumeration capped at {MAX_FREE_VARS} free vars");
        if k == 0 {
            return Some((Rat::zero(), vec![Rat::zero(); lp.num_vars]));
        }

        // Project rows onto free coordinates; append -x_v <= 0 rows.
        let mut rows: Vec<(Vec<Rat>, Rat)> = lp
            .constraints
            .iter()
            .map(|(row, rhs)| {
                (
                    free.iter().map(|&v| row[v].clone()).collect(),
                    rhs.clone(),
                )
            })
            .collect();
        for f in 0..k {
            let mut row = vec![Rat::zero(); k];
            row[f] = -Rat::from_integer(1.into());
            rows.push((row, Rat::zero()));
        }

        let mut best: Option<(Rat, Vec<Rat>)> = None;
        for subset in (0..rows.len()).combinations(k) {
            let system: Vec<&(Vec<Rat>, Rat)> = subset.iter().map(|&r| &rows[r]).collect();
            let Some(x) = solve_square(&system) else {
                continue;
            };
            if x.iter().any(|xi| xi.is_negative())
                || rows.iter().any(|(row, rhs)| {
                    let lhs = row
                        .iter()
                        .zip(&x)
                        .map(|(c, v)| c * v)
                        .fold(Rat::zero(), |a, b| a + b);
                    lhs > *rhs
                })
            {
                continue;
            }
            let value = free
                .iter()
                .zip(&x)
                .map(|(&v, xi)| &lp.objective[v] * xi)
                .fold(Rat::zero(), |a, b| a + b);
            let replace = match &best {
                None => true,
                Some((bv, _)) => value > *bv,
            };
            if replace {
                let mut full = vec![Rat::zero(); lp.num_vars];
                for (&v, xi) in free.iter().zip(&x) {
                    full[v] = xi.clone();
                }
                best = Some((value, full));
            }
        }
        best
    }

    /// Gaussian elimination over the rationals; None when singular.
    fn solve_square(rows: &[&(Vec<Rat>, Rat)]) -> Option<Vec<Rat>> {
        let k = rows.len();
        let mut a: Vec<Vec<Rat>> = rows
            .iter()
            .map(|(row, rhs)| {
                let mut r = row.clone();
                r.push(rhs.clone());
                r
            })
            .collect();
        for col in 0..k {
            let pivot = (col..k).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, pivot);
            let p = a[col][col].clone();
            for x in a[col].iter_mut() {
                *x /= &p;
            }
            for r in 0..k {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in col..=k {
                        let d = &a[col][c] * &f;
                        a[r][c] -= d;
                    }
                }
            }
        }
        Some(a.into_iter().map(|row| row[k].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sum_lp(m: usize, n: usize) -> LinearProgram {
        region_constraints(&DofRegionSpec::single_antenna(m, n)).unwrap()
    }

    #[test]
    fn two_by_two_rows_have_the_expected_shape() {
        let lp = sum_lp(2, 2);
        assert_eq!(lp.constraints.len(), 4);
        for (row, rhs) in &lp.constraints {
            assert_eq!(rhs, &Rat::one());
            let ones = row.iter().filter(|c| **c == Rat::one()).count();
            let zeros = row.iter().filter(|c| c.is_zero()).count();
            assert_eq!((ones, zeros), (3, 1), "row is not 3 ones and 1 zero");
        }
    }

    #[test]
    fn point_to_point_is_a_single_unit_bound() {
        let lp = sum_lp(1, 1);
        assert_eq!(lp.constraints.len(), 1);
        assert_eq!(lp.constraints[0].0, vec![Rat::one()]);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.value, Rat::one());
    }

    #[test]
    fn null_diagonal_pins_three_variables() {
        let spec = DofRegionSpec::with_null_mask(3, 3, [(1, 1), (2, 2), (3, 3)]);
        let lp = region_constraints(&spec).unwrap();
        assert_eq!(lp.constraints.len(), 9);
        assert_eq!(lp.pinned.len(), 3);
        let sol = solve_lp(&lp).unwrap();
        for &v in &lp.pinned {
            assert!(sol.point[v].is_zero(), "pinned variable moved");
        }
    }

    #[test]
    fn square_network_total_matches_the_closed_form() {
        let sol = solve_lp(&sum_lp(2, 2)).unwrap();
        assert_eq!(sol.value, rat(4, 3));
        assert_eq!(sol.binding.len(), 4, "all four rows tight at the optimum");
    }

    #[test]
    fn null_diagonal_three_by_three_reaches_three_halves() {
        let spec = DofRegionSpec::with_null_mask(3, 3, [(1, 1), (2, 2), (3, 3)]);
        let lp = region_constraints(&spec).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.value, rat(3, 2));
        // Independent certification by vertex enumeration.
        let (oracle_value, oracle_point) = oracle::best_vertex(&lp).unwrap();
        assert_eq!(oracle_value, rat(3, 2));
        assert_eq!(sol.value, oracle_value);
        let check = |point: &Vec<Rat>| {
            lp.constraints.iter().all(|(row, rhs)| {
                row.iter()
                    .zip(point)
                    .map(|(c, x)| c * x)
                    .fold(Rat::zero(), |a, b| a + b)
                    <= *rhs
            })
        };
        assert!(check(&sol.point) && check(&oracle_point));
    }

    #[test]
    fn single_message_objective_maxes_at_one() {
        for (m, n) in [(2, 3), (3, 3), (4, 2)] {
            let mut lp = sum_lp(m, n);
            lp.objective = vec![Rat::zero(); lp.num_vars];
            lp.objective[0] = Rat::one();
            let sol = solve_lp(&lp).unwrap();
            assert_eq!(sol.value, Rat::one(), "({m},{n}) d_11 bound is not 1");
        }
    }

    #[test]
    fn totals_match_the_closed_form_bound() {
        assert_eq!(total_dof_bound(2, 2), rat(4, 3));
        assert_eq!(total_dof_bound(5, 5), rat(25, 9));
        for n in 1..=6 {
            assert_eq!(total_dof_bound(1, n), Rat::one());
        }
        for (m, n) in [(2, 3), (3, 2), (4, 4), (4, 3)] {
            let sol = solve_lp(&sum_lp(m, n)).unwrap();
            assert_eq!(sol.value, total_dof_bound(m as u64, n as u64), "({m},{n})");
        }
    }

    #[test]
    fn antenna_formula_special_cases() {
        assert_eq!(mimo_innerbound_formula(2, 2, 1), rat(4, 3));
        assert_eq!(mimo_innerbound_formula(2, 2, 2), rat(16, 7));
        // At M = N = 1 the printed formula evaluates to A^2 / (2A - 1),
        // which is below the point-to-point value A for A > 1; the formula
        // is a scheme's innerbound, not a capacity claim.
        for a in 1..=5i64 {
            assert_eq!(mimo_innerbound_formula(1, 1, a as u64), rat(a * a, 2 * a - 1));
        }
    }

    #[test]
    fn transmitter_relabeling_preserves_the_argmax_set() {
        // Swap transmitters 1 and 2 of a 3 x 2 network; the permuted
        // optimizer must stay optimal for the permuted program.
        let spec = DofRegionSpec::single_antenna(3, 2);
        let lp = region_constraints(&spec).unwrap();
        let sol = solve_lp(&lp).unwrap();
        let perm = [2usize, 1, 3];
        let mut permuted_point = vec![Rat::zero(); lp.num_vars];
        for j in 1..=2 {
            for i in 1..=3 {
                permuted_point[spec.var_index(j, perm[i - 1])] =
                    sol.point[spec.var_index(j, i)].clone();
            }
        }
        let feasible = lp.constraints.iter().all(|(row, rhs)| {
            row.iter()
                .zip(&permuted_point)
                .map(|(c, x)| c * x)
                .fold(Rat::zero(), |a, b| a + b)
                <= *rhs
        });
        let value = permuted_point.iter().fold(Rat::zero(), |a, b| a + b);
        assert!(feasible, "permuted optimizer left the region");
        assert_eq!(value, sol.value, "permuted optimizer lost optimality");
    }

    #[test]
    fn dropping_a_row_never_shrinks_the_optimum() {
        for (m, n) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
            let lp = sum_lp(m, n);
            let base = solve_lp(&lp).unwrap().value;
            for drop in 0..lp.constraints.len() {
                let mut relaxed = lp.clone();
                relaxed.constraints.remove(drop);
                match solve_lp(&relaxed) {
                    Ok(sol) => assert!(
                        sol.value >= base,
                        "({m},{n}) dropping row {drop} shrank the optimum"
                    ),
                    Err(LpError::Unbounded) => {} // relaxation blew the roof off
                    Err(e) => panic!("unexpected error: {e}"),
                }
            }
        }
    }

    #[test]
    fn oracle_certifies_small_networks() {
        for (m, n) in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2)] {
            let lp = sum_lp(m, n);
            let sol = solve_lp(&lp).unwrap();
            let (value, _) = oracle::best_vertex(&lp).unwrap();
            assert_eq!(sol.value, value, "simplex and oracle disagree on ({m},{n})");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_simplex_matches_oracle_with_masks(
            m in 1usize..4,
            n in 1usize..4,
            mask_bits in 0u32..512,
            at in proptest::collection::vec(1u32..3, 3),
            ar in proptest::collection::vec(1u32..3, 3),
        ) {
            let mut mask = BTreeSet::new();
            for j in 1..=n {
                for i in 1..=m {
                    if mask_bits & (1 << ((j - 1) * m + (i - 1))) != 0 {
                        mask.insert((j, i));
                    }
                }
            }
            // Keep the enumeration honest but fast.
            prop_assume!(m * n - mask.len() <= 6);
            let spec = DofRegionSpec {
                tx_count: m,
                rx_count: n,
                tx_antennas: at[..m].to_vec(),
                rx_antennas: ar[..n].to_vec(),
                null_mask: mask,
            };
            let lp = region_constraints(&spec).unwrap();
            let sol = solve_lp(&lp).unwrap();
            let (value, _) = oracle::best_vertex(&lp).unwrap();
            prop_assert_eq!(sol.value.clone(), value);
            // The optimizer itself must be feasible and nonnegative.
            for (row, rhs) in &lp.constraints {
                let lhs = row.iter().zip(&sol.point)
                    .map(|(c, x)| c * x)
                    .fold(Rat::zero(), |a, b| a + b);
                prop_assert!(lhs <= *rhs);
            }
            for x in &sol.point {
                prop_assert!(!x.is_negative());
            }
        }
    }
}
