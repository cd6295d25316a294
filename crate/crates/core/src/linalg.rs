//! Exact linear systems over the rationals.

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::Rational;

/// Solution set of `A x = b`: `particular + span(nullspace)`.
///
/// Free variables are the non-pivot columns of the reduced row echelon form; the
/// nullspace vector for free column `j` has a 1 in position `j` and zeros in the
/// other free positions, so free values can be set directly.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub particular: Vec<Rational>,
    pub nullspace: Vec<Vec<Rational>>,
    pub free: Vec<usize>,
}

pub fn solve(rows: &[Vec<Rational>], rhs: &[Rational], cols: usize) -> Result<Solution> {
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(b.clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot = m[r].clone();
                for (x, p) in m[i].iter_mut().zip(&pivot).skip(c) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    if m[r..].iter().any(|row| !row[cols].is_zero()) {
        return Err(Error::Inconsistent("linear system has no solution".into()));
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut particular = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        particular[c] = m[i][cols].clone();
    }
    let nullspace = free
        .iter()
        .map(|&j| {
            let mut v = vec![Rational::zero(); cols];
            v[j] = Rational::one();
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = -m[i][j].clone();
            }
            v
        })
        .collect();
    Ok(Solution { particular, nullspace, free })
}
