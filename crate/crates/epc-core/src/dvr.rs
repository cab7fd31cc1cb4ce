//! Exact linear solving over the discrete valuation ring Z_(p).
//!
//! A system A·x = b is solvable over Z_(p) iff Gauss-Jordan elimination that
//! always pivots on a remaining entry of minimal p-valuation (ties: lowest
//! row, then lowest column) leaves no row demanding a negative-valuation
//! division. The pivot rule makes pivot valuations nondecreasing, so after
//! elimination each pivot row's entries all have valuation at least the
//! pivot's own; a right-hand side entry below that valuation is then
//! genuinely unreachable over Z_(p) (ultrametric inequality), and the tracked
//! left-transform row of the offending equation is an infeasibility
//! certificate. The same determinism makes witnesses bit-reproducible.

use crate::padic::{big_rational_valuation, PrimeBase, Valuation};
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DvrError {
    #[error("matrix is ragged or does not match rhs: {0}")]
    Dimension(String),
}

/// An exact linear system over Z_(p): solve A·x = b with every solution entry
/// of nonnegative p-valuation.
#[derive(Debug, Clone)]
pub struct DvrSystem {
    pub matrix: Vec<Vec<BigRational>>,
    pub rhs: Vec<BigRational>,
    pub p: PrimeBase,
}

/// A solution with all entries in Z_(p). Free variables are set to zero, so
/// the solution is the canonical one for the pivot order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvrSolution {
    pub values: Vec<BigRational>,
}

/// Witness that no Z_(p)-solution exists: a rational row vector r such that
/// r·A has every entry of p-valuation >= 1 while r·b is a p-unit. Any
/// hypothetical integral solution x would force the unit r·b = (r·A)·x into
/// the maximal ideal, a contradiction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibilityCertificate {
    pub row: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DvrOutcome {
    Solved(DvrSolution),
    Infeasible(InfeasibilityCertificate),
}

impl DvrOutcome {
    pub fn solution(self) -> Option<DvrSolution> {
        match self {
            DvrOutcome::Solved(s) => Some(s),
            DvrOutcome::Infeasible(_) => None,
        }
    }
}

pub fn dvr_solve(system: &DvrSystem) -> Result<DvrOutcome, DvrError> {
    let m = system.matrix.len();
    if system.rhs.len() != m {
        return Err(DvrError::Dimension(format!(
            "{} rows vs {} rhs entries",
            m,
            system.rhs.len()
        )));
    }
    let n = system.matrix.first().map_or(0, Vec::len);
    if system.matrix.iter().any(|row| row.len() != n) {
        return Err(DvrError::Dimension("ragged matrix".into()));
    }
    let p = system.p;

    let mut a = system.matrix.clone();
    let mut b = system.rhs.clone();
    // left transform: t[i] is the row of the accumulated row-operation matrix,
    // so t[i]·A_original = a[i] and t[i]·b_original = b[i] at every stage
    let mut t: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut row = vec![BigRational::zero(); m];
            row[i] = BigRational::one();
            row
        })
        .collect();

    let mut pivot_of_row: Vec<Option<usize>> = vec![None; m];
    let mut col_used = vec![false; n];
    let mut row_used = vec![false; m];

    loop {
        // global minimal-valuation pivot among unused rows/columns
        let mut best: Option<(i64, usize, usize)> = None;
        for (i, row) in a.iter().enumerate() {
            if row_used[i] {
                continue;
            }
            for (j, entry) in row.iter().enumerate() {
                if col_used[j] || entry.is_zero() {
                    continue;
                }
                let v = match big_rational_valuation(entry, p) {
                    Valuation::Finite(v) => v,
                    Valuation::Infinity => unreachable!("nonzero entry"),
                };
                let candidate = (v, i, j);
                if best.map_or(true, |cur| candidate < cur) {
                    best = Some(candidate);
                }
            }
        }
        let Some((_, pi, pj)) = best else { break };
        row_used[pi] = true;
        col_used[pj] = true;
        pivot_of_row[pi] = Some(pj);
        let pivot = a[pi][pj].clone();
        for i in 0..m {
            if i == pi || a[i][pj].is_zero() {
                continue;
            }
            let factor = &a[i][pj] / &pivot;
            for j in 0..n {
                if !a[pi][j].is_zero() {
                    let delta = &factor * &a[pi][j];
                    a[i][j] -= delta;
                }
            }
            let delta = &factor * &b[pi];
            b[i] -= delta;
            for j in 0..m {
                if !t[pi][j].is_zero() {
                    let delta = &factor * &t[pi][j];
                    t[i][j] -= delta;
                }
            }
        }
    }

    // zero rows must carry zero rhs; pivot rows must divide integrally
    for i in 0..m {
        match pivot_of_row[i] {
            None => {
                if !b[i].is_zero() {
                    return Ok(DvrOutcome::Infeasible(certificate(&t[i], &b[i], p)));
                }
            }
            Some(j) => {
                let x = &b[i] / &a[i][j];
                if !x.is_zero() && big_rational_valuation(&x, p) < Valuation::Finite(0) {
                    return Ok(DvrOutcome::Infeasible(certificate(&t[i], &b[i], p)));
                }
            }
        }
    }

    let mut values = vec![BigRational::zero(); n];
    for i in 0..m {
        if let Some(j) = pivot_of_row[i] {
            values[j] = &b[i] / &a[i][j];
        }
    }
    Ok(DvrOutcome::Solved(DvrSolution { values }))
}

/// Scales the transform row so that row·b becomes a p-unit: divide by
/// p^{v(row·b)}. Every entry of row·A_original then has valuation >= 1
/// because the reduced row's entries all sit at or above the pivot valuation,
/// which strictly exceeds v(b_i) on an infeasible row.
fn certificate(t_row: &[BigRational], b_i: &BigRational, p: PrimeBase) -> InfeasibilityCertificate {
    let scale = match big_rational_valuation(b_i, p) {
        Valuation::Finite(v) => power(p, -v),
        Valuation::Infinity => BigRational::one(),
    };
    InfeasibilityCertificate { row: t_row.iter().map(|x| x * &scale).collect() }
}

fn power(p: PrimeBase, e: i64) -> BigRational {
    let base = BigRational::from_integer(p.get().into());
    if e >= 0 {
        base.pow(e as i32)
    } else {
        BigRational::one() / base.pow((-e) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn qq(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn p2() -> PrimeBase {
        PrimeBase::new(2).unwrap()
    }

    fn solve(matrix: Vec<Vec<BigRational>>, rhs: Vec<BigRational>, p: PrimeBase) -> DvrOutcome {
        dvr_solve(&DvrSystem { matrix, rhs, p }).unwrap()
    }

    #[test]
    fn scalar_solvable() {
        let out = solve(vec![vec![q(2)]], vec![q(2)], p2());
        assert_eq!(out, DvrOutcome::Solved(DvrSolution { values: vec![q(1)] }));
    }

    #[test]
    fn scalar_infeasible() {
        // 2 f = 1 needs f = 1/2, not in Z_(2)
        match solve(vec![vec![q(2)]], vec![q(1)], p2()) {
            DvrOutcome::Infeasible(cert) => {
                // cert . A must land in (p), cert . b must be a unit
                let ca = &cert.row[0] * q(2);
                assert!(big_rational_valuation(&ca, p2()) >= Valuation::Finite(1));
                let cb = &cert.row[0] * q(1);
                assert_eq!(big_rational_valuation(&cb, p2()), Valuation::Finite(0));
            }
            DvrOutcome::Solved(_) => panic!("should be infeasible"),
        }
    }

    #[test]
    fn underdetermined_picks_low_column() {
        // [1 2; 0 0] f = [3; 0]: minimal-valuation pivot is the 1 at (0,0),
        // free column gets zero, so f = (3, 0)
        let out = solve(vec![vec![q(1), q(2)], vec![q(0), q(0)]], vec![q(3), q(0)], p2());
        assert_eq!(out, DvrOutcome::Solved(DvrSolution { values: vec![q(3), q(0)] }));
    }

    #[test]
    fn inconsistent_zero_row() {
        let out = solve(vec![vec![q(1), q(1)], vec![q(1), q(1)]], vec![q(1), q(2)], p2());
        match out {
            DvrOutcome::Infeasible(cert) => {
                // r.A has min valuation >= 1 entry-wise; r.b is a unit
                let ra0 = &cert.row[0] * q(1) + &cert.row[1] * q(1);
                let ra1 = &cert.row[0] * q(1) + &cert.row[1] * q(1);
                assert!(ra0.is_zero() || big_rational_valuation(&ra0, p2()) >= Valuation::Finite(1));
                assert!(ra1.is_zero() || big_rational_valuation(&ra1, p2()) >= Valuation::Finite(1));
                let rb = &cert.row[0] * q(1) + &cert.row[1] * q(2);
                assert_eq!(big_rational_valuation(&rb, p2()), Valuation::Finite(0));
            }
            DvrOutcome::Solved(_) => panic!("inconsistent system solved"),
        }
    }

    #[test]
    fn valuation_pivot_beats_gaussian_order() {
        // Plain elimination pivoting on the 2 first would demand halves;
        // minimal-valuation pivoting starts at the 1 and stays integral.
        // System: 2a + b = 1, a = 1 -> b = -1.
        let out = solve(vec![vec![q(2), q(1)], vec![q(1), q(0)]], vec![q(1), q(1)], p2());
        assert_eq!(out, DvrOutcome::Solved(DvrSolution { values: vec![q(1), q(-1)] }));
    }

    #[test]
    fn rational_entries_allowed() {
        // (3/2) f = 3 -> f = 2, fine over Z_(2) even though entries are not integers
        let out = solve(vec![vec![qq(3, 2)]], vec![q(3)], p2());
        assert_eq!(out, DvrOutcome::Solved(DvrSolution { values: vec![q(2)] }));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sys = DvrSystem { matrix: vec![vec![q(1)]], rhs: vec![q(1), q(2)], p: p2() };
        assert!(dvr_solve(&sys).is_err());
        let sys = DvrSystem { matrix: vec![vec![q(1)], vec![q(1), q(2)]], rhs: vec![q(1), q(2)], p: p2() };
        assert!(dvr_solve(&sys).is_err());
    }

    #[test]
    fn empty_system() {
        let out = solve(vec![], vec![], p2());
        assert_eq!(out, DvrOutcome::Solved(DvrSolution { values: vec![] }));
    }

    /// Brute-force oracle on tiny systems over a small search grid: whenever
    /// the grid contains an integral solution, the solver must find one too
    /// (and vice versa on the certificate side the solver's answer is final).
    #[test]
    fn small_system_enumeration_oracle() {
        let p = p2();
        let candidates: Vec<BigRational> =
            (-4..=4).map(q).collect();
        let entries = [-2i64, -1, 0, 1, 2];
        let mut checked = 0;
        for a11 in entries {
            for a12 in entries {
                for a21 in entries {
                    for a22 in entries {
                        for b1 in [-2i64, 0, 1, 2] {
                            for b2 in [-1i64, 0, 3] {
                                let matrix =
                                    vec![vec![q(a11), q(a12)], vec![q(a21), q(a22)]];
                                let rhs = vec![q(b1), q(b2)];
                                let found = solve(matrix.clone(), rhs.clone(), p);
                                let grid_hit = candidates.iter().any(|x| {
                                    candidates.iter().any(|y| {
                                        (&matrix[0][0] * x) + (&matrix[0][1] * y) == rhs[0]
                                            && (&matrix[1][0] * x) + (&matrix[1][1] * y)
                                                == rhs[1]
                                    })
                                });
                                match (&found, grid_hit) {
                                    (DvrOutcome::Infeasible(_), true) => {
                                        panic!(
                                            "solver missed integral solution for {matrix:?} = {rhs:?}"
                                        )
                                    }
                                    (DvrOutcome::Solved(s), _) => {
                                        // verify the solution exactly and integrally
                                        for (i, row) in matrix.iter().enumerate() {
                                            let dot = &(&row[0] * &s.values[0])
                                                + &(&row[1] * &s.values[1]);
                                            assert_eq!(dot, rhs[i]);
                                        }
                                        for v in &s.values {
                                            assert!(
                                                big_rational_valuation(v, p)
                                                    >= Valuation::Finite(0)
                                            );
                                        }
                                    }
                                    _ => {}
                                }
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 0);
    }
}
