//! Jacobian windows of the prolonged system and their evaluation.
//!
//! Entries are kept in formal form, where X-jets of positive order are still
//! present. They denote elements of `k[X, U-jets]` after replacing each
//! `X^(s)` by the `(s−1)`-fold induced derivative of `f`. Evaluation computes
//! those X-jet values at the sample point first, which gives the same number
//! as evaluating the reduced entry. [`Reducer`] performs the symbolic
//! replacement for the exact-rank oracle and the identity checks.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use rand::Rng;

use crate::coeff::Coeff;
use crate::diffpoly::{Assignment, DiffPoly, EvalError, JetVar, VarId};
use crate::error::{Error, Result};
use crate::parse::{jet_name, serialize};
use crate::sysmodel::DaeSystem;

/// The matrix 𝔍_{k,i}: block (p, q) holds `∂(F, G)^(i−e+p) / ∂(X, U)^(i+q)`.
#[derive(Clone, Debug)]
pub struct JacobianWindow {
    pub k: u32,
    pub i: u32,
    pub block_rows: usize,
    pub block_cols: usize,
    /// `(equation row, prolongation order)` per matrix row.
    pub row_labels: Vec<(usize, u32)>,
    pub col_vars: Vec<JetVar>,
    pub entries: Vec<Vec<DiffPoly>>,
}

pub fn build_window(sys: &DaeSystem, k: u32, i: u32) -> Result<JacobianWindow> {
    let e = sys.e();
    if i + 1 < e {
        return Err(Error::Precondition(format!(
            "window needs i ≥ e − 1 = {} (got i = {i})",
            e - 1
        )));
    }
    if k == 0 {
        return Err(Error::Precondition("window needs k ≥ 1".into()));
    }
    let unknowns = sys.unknowns();
    let (br, bc) = (sys.block_rows(), sys.block_cols());
    let mut row_labels = Vec::with_capacity(k as usize * br);
    for p in 1..=k {
        for row in 0..br {
            row_labels.push((row, i + p - e));
        }
    }
    let mut col_vars = Vec::with_capacity(k as usize * bc);
    for q in 1..=k {
        for &z in &unknowns {
            col_vars.push(JetVar::new(z, i + q));
        }
    }
    let entries = row_labels
        .iter()
        .enumerate()
        .map(|(ri, &(row, l))| {
            let p = ri / br + 1;
            col_vars
                .iter()
                .enumerate()
                .map(|(ci, &v)| {
                    // Blocks strictly above the diagonal vanish by order count.
                    if ci / bc + 1 > p {
                        DiffPoly::zero()
                    } else {
                        sys.h_partial(row, l, v)
                    }
                })
                .collect()
        })
        .collect();
    Ok(JacobianWindow {
        k,
        i,
        block_rows: br,
        block_cols: bc,
        row_labels,
        col_vars,
        entries,
    })
}

impl JacobianWindow {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.col_vars.len()
    }

    /// Highest jet order a sample point must cover.
    pub fn max_jet(&self) -> u32 {
        self.i + self.k
    }

    /// The window 𝔍_{kk,i} obtained by dropping trailing block rows and columns.
    pub fn leading(&self, kk: u32) -> JacobianWindow {
        assert!(kk >= 1 && kk <= self.k);
        let rows = kk as usize * self.block_rows;
        let cols = kk as usize * self.block_cols;
        JacobianWindow {
            k: kk,
            i: self.i,
            block_rows: self.block_rows,
            block_cols: self.block_cols,
            row_labels: self.row_labels[..rows].to_vec(),
            col_vars: self.col_vars[..cols].to_vec(),
            entries: self.entries[..rows]
                .iter()
                .map(|r| r[..cols].to_vec())
                .collect(),
        }
    }

    /// Block `(p, q)`, 1-indexed.
    pub fn block(&self, p: u32, q: u32) -> Vec<Vec<DiffPoly>> {
        let r0 = (p as usize - 1) * self.block_rows;
        let c0 = (q as usize - 1) * self.block_cols;
        self.entries[r0..r0 + self.block_rows]
            .iter()
            .map(|r| r[c0..c0 + self.block_cols].to_vec())
            .collect()
    }

    /// Rows whose entries are all formally zero.
    pub fn null_rows(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&r| self.entries[r].iter().all(DiffPoly::is_zero))
            .collect()
    }

    /// Text grid, one row per line, entries separated by ` | `.
    pub fn dump(&self, names: &[String]) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.col_vars.iter().map(|&v| jet_name(v, names)).collect();
        out.push_str(&header.join(" | "));
        out.push('\n');
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|p| serialize(p, names)).collect();
            out.push_str(&cells.join(" | "));
            out.push('\n');
        }
        out
    }
}

/// Upper bound on the total degree of reduced window entries.
pub fn entry_degree_bound(d: u32, jet_span: u32) -> u64 {
    let d = d.max(1) as u64;
    d * (1 + jet_span as u64 * d.saturating_sub(1).max(1))
}

/// Symbolic replacement of `X^(s)`, `s ≥ 1`, by induced derivatives of `f`.
pub struct Reducer<'a> {
    sys: &'a DaeSystem,
    cache: Mutex<HashMap<(usize, u32), Arc<DiffPoly>>>,
    term_cap: usize,
}

/// Signals that a reduced polynomial outgrew the term cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TooLarge;

impl<'a> Reducer<'a> {
    pub fn new(sys: &'a DaeSystem, term_cap: usize) -> Self {
        Reducer {
            sys,
            cache: Mutex::new(HashMap::new()),
            term_cap,
        }
    }

    fn state_index(&self, v: VarId) -> Option<usize> {
        self.sys.x().iter().position(|&x| x == v)
    }

    /// Reduced value of `X_i^(s)` for `s ≥ 1`.
    pub fn induced(&self, xi: usize, s: u32) -> std::result::Result<Arc<DiffPoly>, TooLarge> {
        if let Some(p) = self.cache.lock().expect("reducer lock").get(&(xi, s)) {
            return Ok(Arc::clone(p));
        }
        let value = if s == 1 {
            self.sys.f()[xi].clone()
        } else {
            let prev = self.induced(xi, s - 1)?;
            self.reduce(&prev.total_derivative())?
        };
        if value.len() > self.term_cap {
            return Err(TooLarge);
        }
        let value = Arc::new(value);
        self.cache
            .lock()
            .expect("reducer lock")
            .insert((xi, s), Arc::clone(&value));
        Ok(value)
    }

    pub fn reduce(&self, p: &DiffPoly) -> std::result::Result<DiffPoly, TooLarge> {
        let needed: Vec<(usize, JetVar)> = p
            .vars()
            .into_iter()
            .filter(|v| v.deriv > 0)
            .filter_map(|v| self.state_index(v.var).map(|i| (i, v)))
            .collect();
        if needed.is_empty() {
            return Ok(p.clone());
        }
        let mut subs = HashMap::new();
        for (xi, v) in needed {
            subs.insert(v, self.induced(xi, v.deriv)?);
        }
        let out = p.substitute(|v| subs.get(&v).map(|a| (**a).clone()));
        if out.len() > self.term_cap {
            return Err(TooLarge);
        }
        Ok(out)
    }

    /// The derivation induced by `Ẋ = f` on reduced polynomials.
    pub fn induced_derivative(&self, p: &DiffPoly) -> std::result::Result<DiffPoly, TooLarge> {
        self.reduce(&p.total_derivative())
    }

    pub fn reduce_matrix(
        &self,
        m: &[Vec<DiffPoly>],
    ) -> std::result::Result<Vec<Vec<DiffPoly>>, TooLarge> {
        m.iter()
            .map(|row| row.iter().map(|p| self.reduce(p)).collect())
            .collect()
    }
}

/// A sample point of 𝕂: random X, U-jets, parameter jets and `t`, with X-jets
/// induced by the differential equations.
#[derive(Clone, Debug)]
pub struct KPoint {
    pub assignment: Assignment,
}

fn draw(rng: &mut impl Rng, bound: i128) -> BigRational {
    BigRational::from_integer(rng.random_range(-bound..=bound).into())
}

/// Draws a point covering every jet of order ≤ `max_jet`.
pub fn sample_kpoint(
    sys: &DaeSystem,
    max_jet: u32,
    rng: &mut impl Rng,
    bound: i128,
) -> std::result::Result<KPoint, EvalError> {
    let mut pt = Assignment::default();
    if sys.field().has_t() {
        pt.t = Some(draw(rng, bound));
    }
    for &x in sys.x() {
        pt.set(JetVar::new(x, 0), draw(rng, bound));
    }
    for &v in sys.u().iter().chain(sys.params()) {
        for l in 0..=max_jet {
            pt.set(JetVar::new(v, l), draw(rng, bound));
        }
    }
    extend_states(sys, &mut pt, max_jet)?;
    Ok(KPoint { assignment: pt })
}

/// Fills `X^(s)` for `1 ≤ s ≤ max_jet` from `X^(s) = f^(s−1)` at the point.
pub(crate) fn extend_states(
    sys: &DaeSystem,
    pt: &mut Assignment,
    max_jet: u32,
) -> std::result::Result<(), EvalError> {
    for s in 1..=max_jet {
        for (i, &x) in sys.x().iter().enumerate() {
            let value = sys.f_prolonged(i, s - 1).eval(pt)?;
            pt.set(JetVar::new(x, s), value);
        }
    }
    Ok(())
}

pub fn evaluate_matrix(
    m: &[Vec<DiffPoly>],
    pt: &Assignment,
) -> std::result::Result<Vec<Vec<BigRational>>, EvalError> {
    m.iter()
        .map(|row| row.iter().map(|p| p.eval(pt)).collect())
        .collect()
}

pub fn evaluate_window(
    w: &JacobianWindow,
    pt: &KPoint,
) -> std::result::Result<Vec<Vec<BigRational>>, EvalError> {
    evaluate_matrix(&w.entries, &pt.assignment)
}

/// Lower bound on the number of structurally null rows of 𝔍_{k,i}.
pub fn null_row_lower_bound(sys: &DaeSystem, k: u32) -> u64 {
    let e = sys.e();
    let n = sys.n() as u64;
    n * k.min(e - 1) as u64
        + sys
            .e_j()
            .iter()
            .map(|&ej| k.min(e - ej) as u64)
            .sum::<u64>()
}

/// True when `c` is a constant equal to `v`.
pub fn is_constant_value(p: &DiffPoly, v: i64) -> bool {
    p.as_constant().is_some_and(|c| c == Coeff::from_i64(v))
}
