//! Rank of matrices with polynomial entries.
//!
//! The probabilistic path evaluates the matrix at random integer points and
//! keeps the largest exact rational rank seen. Specialization can only lower
//! the rank, so the result never overshoots. The exact path runs fraction-free
//! elimination over the polynomial ring.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffpoly::{Assignment, DiffPoly, JetVar};
use crate::error::{Error, Result};
use crate::prolong::{sample_kpoint, TooLarge};
use crate::sysmodel::DaeSystem;

/// Largest coordinate bound the sampler supports.
const MAX_BOUND_BITS: u32 = 120;
/// Each trial is required to fail with probability at most 2^-SAFETY_BITS.
const SAFETY_BITS: f64 = 20.0;

/// Schwartz–Zippel accounting for one rank query.
#[derive(Clone, Debug, PartialEq)]
pub struct RankBudget {
    pub epsilon: f64,
    /// Degree bound for a single entry.
    pub degree: u64,
    pub trials: u32,
    /// Coordinates are drawn from `[-bound, bound]`.
    pub bound: i128,
    /// Degree bound for any minor: `min(rows, cols) · degree`.
    pub minor_degree: u64,
}

impl RankBudget {
    /// `T = ⌈log2(1/ε) / 20⌉` and the least power-of-two `B ≥ 2^20` with
    /// `T · minor_degree / (2B + 1) ≤ ε`.
    pub fn new(epsilon: f64, rows: usize, cols: usize, degree: u64) -> Self {
        assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
        let trials = ((1.0 / epsilon).log2() / SAFETY_BITS).ceil().max(1.0) as u32;
        let minor_degree = (rows.min(cols) as u64).max(1) * degree.max(1);
        let need = (trials as f64 * minor_degree as f64 / epsilon).log2() - 1.0;
        let bits = (need.ceil() as i64).clamp(20, MAX_BOUND_BITS as i64) as u32;
        RankBudget {
            epsilon,
            degree,
            trials,
            bound: 1i128 << bits,
            minor_degree,
        }
    }

    /// Union bound on the probability that some trial undershoots.
    pub fn failure_bound(&self) -> f64 {
        self.trials as f64 * self.minor_degree as f64 / (2.0 * self.bound as f64 + 1.0)
    }
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Randomness of one trial, a pure function of (seed, label, trial).
pub fn trial_rng(seed: u64, label: &str, trial: u32) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label).to_le_bytes());
    key[16..20].copy_from_slice(&trial.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Produces evaluation points for the variables of a matrix.
pub trait PointSource: Sync {
    fn sample(&self, rng: &mut ChaCha20Rng, bound: i128) -> Option<Assignment>;
}

/// Points of 𝕂 for a system: X-jets follow the differential equations.
pub struct SystemPoints<'a> {
    pub sys: &'a DaeSystem,
    pub max_jet: u32,
}

impl PointSource for SystemPoints<'_> {
    fn sample(&self, rng: &mut ChaCha20Rng, bound: i128) -> Option<Assignment> {
        sample_kpoint(self.sys, self.max_jet, rng, bound)
            .ok()
            .map(|k| k.assignment)
    }
}

/// Independent draws for a fixed list of jet variables.
pub struct IndependentPoints {
    pub vars: Vec<JetVar>,
    pub with_t: bool,
}

impl IndependentPoints {
    pub fn covering(m: &[Vec<DiffPoly>], with_t: bool) -> Self {
        let mut vars = std::collections::BTreeSet::new();
        for row in m {
            for p in row {
                vars.extend(p.vars());
            }
        }
        IndependentPoints {
            vars: vars.into_iter().collect(),
            with_t,
        }
    }
}

impl PointSource for IndependentPoints {
    fn sample(&self, rng: &mut ChaCha20Rng, bound: i128) -> Option<Assignment> {
        use rand::Rng;
        let mut pt = Assignment::default();
        if self.with_t {
            pt.t = Some(BigRational::from_integer(
                rng.random_range(-bound..=bound).into(),
            ));
        }
        for &v in &self.vars {
            pt.set(
                v,
                BigRational::from_integer(rng.random_range(-bound..=bound).into()),
            );
        }
        Some(pt)
    }
}

/// Rank of a rational matrix by fraction-free elimination over the integers.
pub fn rank_rational(m: &[Vec<BigRational>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            row.iter().map(|q| q.numer() * (&lcm / q.denom())).collect()
        })
        .collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let (top, rest) = a.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in rest.iter_mut() {
            let factor = row[col].clone();
            for j in col + 1..cols {
                let v = &pivot_row[col] * &row[j] - &factor * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Limits for symbolic elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactCap {
    /// Largest admissible `rows · cols`.
    pub max_cells: usize,
    /// Largest admissible term count of an input or intermediate entry.
    pub max_terms: usize,
}

impl ExactCap {
    /// Cap used to confirm probabilistic ranks.
    pub const CONFIRM: ExactCap = ExactCap {
        max_cells: 1200,
        max_terms: 600,
    };
    /// Cap used when exact ranks are forced.
    pub const FORCED: ExactCap = ExactCap {
        max_cells: 10_000,
        max_terms: 50_000,
    };
}

/// Rank over the fraction field of the entry ring by fraction-free
/// (Bareiss) elimination with full pivoting on the shortest entry.
pub fn rank_exact(m: &[Vec<DiffPoly>], cap: ExactCap) -> std::result::Result<usize, TooLarge> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows * cols > cap.max_cells {
        return Err(TooLarge);
    }
    let mut a: Vec<Vec<DiffPoly>> = m.to_vec();
    if a.iter().flatten().any(|p| p.len() > cap.max_terms) {
        return Err(TooLarge);
    }
    // Column permutation is tracked implicitly: `live` lists unused columns.
    let mut live: Vec<usize> = (0..cols).collect();
    let mut prev = DiffPoly::one();
    let mut rank = 0;
    while rank < rows && !live.is_empty() {
        let mut best: Option<(usize, usize, (usize, u32))> = None;
        for (r, row) in a.iter().enumerate().skip(rank) {
            for (li, &c) in live.iter().enumerate() {
                let p = &row[c];
                if p.is_zero() {
                    continue;
                }
                let key = (p.len(), p.total_degree());
                if best.as_ref().is_none_or(|b| key < b.2) {
                    best = Some((r, li, key));
                }
            }
        }
        let Some((pr, li, _)) = best else { break };
        a.swap(rank, pr);
        let pc = live.remove(li);
        let (top, rest) = a.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        let pivot = &pivot_row[pc];
        for row in rest.iter_mut() {
            let factor = std::mem::take(&mut row[pc]);
            for &c in &live {
                let lhs = pivot * &row[c];
                let v = if factor.is_zero() || pivot_row[c].is_zero() {
                    lhs
                } else {
                    &lhs - &(&factor * &pivot_row[c])
                };
                let q = v.div_exact(&prev).expect("Bareiss quotient is exact");
                if q.len() > cap.max_terms {
                    return Err(TooLarge);
                }
                row[c] = q;
            }
        }
        prev = a[rank][pc].clone();
        rank += 1;
    }
    Ok(rank)
}

/// Outcome of the probabilistic path.
#[derive(Clone, Debug)]
pub struct ProbRank {
    pub rank: usize,
    pub trial_ranks: Vec<usize>,
}

/// Maximum exact rational rank over `budget.trials` random evaluations.
pub fn rank_probabilistic(
    m: &[Vec<DiffPoly>],
    budget: &RankBudget,
    source: &dyn PointSource,
    seed: u64,
    label: &str,
) -> ProbRank {
    let trial_ranks: Vec<usize> = (0..budget.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, label, trial);
            // A pole of a ℚ(t) coefficient spoils a sample; redraw a few times.
            for _ in 0..4 {
                let Some(pt) = source.sample(&mut rng, budget.bound) else {
                    continue;
                };
                if let Ok(vals) = crate::prolong::evaluate_matrix(m, &pt) {
                    return rank_rational(&vals);
                }
            }
            0
        })
        .collect();
    ProbRank {
        rank: trial_ranks.iter().copied().max().unwrap_or(0),
        trial_ranks,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    /// Probabilistic ranks confirmed exactly when the matrix fits the cap.
    #[default]
    Default,
    Exact,
    Probabilistic,
}

impl RankMode {
    pub fn name(self) -> &'static str {
        match self {
            RankMode::Default => "default",
            RankMode::Exact => "exact",
            RankMode::Probabilistic => "probabilistic",
        }
    }
}

/// One rank query as recorded for `--audit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub method: String,
    pub epsilon: f64,
    pub trials: u32,
    pub bound: String,
    pub degree: u64,
    pub failure_bound: f64,
    pub seed: u64,
}

/// Rank evaluator carrying mode, seed, error target and an audit log.
pub struct RankEngine {
    pub mode: RankMode,
    pub epsilon: f64,
    pub seed: u64,
    log: Mutex<Vec<AuditEntry>>,
}

impl Clone for RankEngine {
    fn clone(&self) -> Self {
        RankEngine {
            mode: self.mode,
            epsilon: self.epsilon,
            seed: self.seed,
            log: Mutex::new(self.audit()),
        }
    }
}

/// Symbolic reduction of window entries for the exact path.
pub type ReduceFn<'a> =
    dyn Fn(&[Vec<DiffPoly>]) -> std::result::Result<Vec<Vec<DiffPoly>>, TooLarge> + 'a;

/// A matrix query: formal entries plus the means to sample and reduce them.
pub struct RankQuery<'a> {
    pub label: String,
    pub entries: &'a [Vec<DiffPoly>],
    pub source: &'a dyn PointSource,
    pub degree: u64,
    /// Produces the entries over the polynomial ring used by the exact path.
    pub reduce: &'a ReduceFn<'a>,
}

impl RankEngine {
    pub fn new(mode: RankMode, epsilon: f64, seed: u64) -> Self {
        RankEngine {
            mode,
            epsilon,
            seed,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn audit(&self) -> Vec<AuditEntry> {
        self.log.lock().expect("audit lock").clone()
    }

    fn record(&self, entry: AuditEntry) {
        self.log.lock().expect("audit lock").push(entry);
    }

    pub fn rank(&self, q: &RankQuery<'_>) -> Result<usize> {
        let rows = q.entries.len();
        let cols = q.entries.first().map_or(0, Vec::len);
        let budget = RankBudget::new(self.epsilon, rows, cols, q.degree);
        let mut entry = AuditEntry {
            label: q.label.clone(),
            rows,
            cols,
            rank: 0,
            method: String::new(),
            epsilon: self.epsilon,
            trials: 0,
            bound: String::new(),
            degree: q.degree,
            failure_bound: 0.0,
            seed: self.seed,
        };
        let exact = |cap: ExactCap| -> std::result::Result<usize, TooLarge> {
            let reduced = (q.reduce)(q.entries)?;
            rank_exact(&reduced, cap)
        };
        let rank = match self.mode {
            RankMode::Exact => {
                let r = exact(ExactCap::FORCED).map_err(|_| {
                    Error::ResourceCap(format!(
                        "exact rank of {} ({rows}×{cols}) exceeds the symbolic cap",
                        q.label
                    ))
                })?;
                entry.method = "exact".into();
                r
            }
            RankMode::Probabilistic | RankMode::Default => {
                let pr = rank_probabilistic(q.entries, &budget, q.source, self.seed, &q.label);
                entry.trials = budget.trials;
                entry.bound = budget.bound.to_string();
                entry.failure_bound = budget.failure_bound();
                if self.mode == RankMode::Probabilistic {
                    entry.method = "probabilistic".into();
                    pr.rank
                } else if pr.rank == rows.min(cols) {
                    entry.method = "probabilistic, full rank certified".into();
                    pr.rank
                } else {
                    match exact(ExactCap::CONFIRM) {
                        Ok(r) if r == pr.rank => {
                            entry.method = "probabilistic, confirmed exactly".into();
                            r
                        }
                        Ok(r) => {
                            entry.method = format!("exact (probabilistic gave {})", pr.rank);
                            r
                        }
                        Err(TooLarge) => {
                            entry.method = "probabilistic (exact confirmation over cap)".into();
                            pr.rank
                        }
                    }
                }
            }
        };
        entry.rank = rank;
        self.record(entry);
        Ok(rank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffpoly::jet;

    fn q(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    fn var(i: u32) -> DiffPoly {
        DiffPoly::var(jet(i, 0))
    }

    #[test]
    fn rational_rank() {
        let m = vec![
            vec![q(1), q(2), q(3)],
            vec![q(2), q(4), q(6)],
            vec![q(0), q(1), q(1)],
        ];
        assert_eq!(rank_rational(&m), 2);
        let half = BigRational::new(1.into(), 2.into());
        let m = vec![vec![half.clone(), q(1)], vec![q(1), q(2)]];
        assert_eq!(rank_rational(&m), 1);
        assert_eq!(rank_rational(&[]), 0);
    }

    #[test]
    fn exact_rank_small_cases() {
        let z = DiffPoly::zero();
        let diag = vec![
            vec![var(0), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), var(1)],
        ];
        assert_eq!(rank_exact(&diag, ExactCap::FORCED), Ok(2));
        // [[a, b], [a·c, b·c]] is singular.
        let c = &var(0) + &var(2);
        let sing = vec![vec![var(0), var(1)], vec![&var(0) * &c, &var(1) * &c]];
        assert_eq!(rank_exact(&sing, ExactCap::FORCED), Ok(1));
        let zero = vec![vec![z.clone(); 3]; 2];
        assert_eq!(rank_exact(&zero, ExactCap::FORCED), Ok(0));
    }

    #[test]
    fn budget_meets_its_target() {
        let b = RankBudget::new(2f64.powi(-40), 15, 15, 4);
        assert_eq!(b.trials, 2);
        assert!(b.failure_bound() <= b.epsilon);
        assert!(b.bound >= 1 << 20);
        let half = RankBudget {
            bound: b.bound / 2,
            ..b.clone()
        };
        assert!(half.failure_bound() > b.epsilon || b.bound == 1 << 20);
    }

    #[test]
    fn probabilistic_rank_is_reproducible() {
        let m = vec![vec![var(0), var(1)], vec![var(1), var(0)]];
        let budget = RankBudget::new(1e-6, 2, 2, 1);
        let src = IndependentPoints::covering(&m, false);
        let a = rank_probabilistic(&m, &budget, &src, 7, "m");
        let b = rank_probabilistic(&m, &budget, &src, 7, "m");
        assert_eq!(a.trial_ranks, b.trial_ranks);
        assert_eq!(a.rank, 2);
    }
}
