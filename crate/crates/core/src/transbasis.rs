//! Transcendence bases by the Jacobian criterion, for first-order systems.
//!
//! At level `L` the generators are `F^(l), G^(l)` for `l < σ + L`, and the
//! Jacobian is taken against every X/U jet of order at most `σ + L`. A set of
//! jets is independent modulo the generators exactly when deleting its
//! columns keeps the rank.

use serde::{Deserialize, Serialize};

use crate::diffpoly::{DiffPoly, JetVar, VarId};
use crate::error::{Error, Result};
use crate::indexcore::{differentiation_index, matrix_rank};
use crate::invariants::ideal_order;
use crate::parse::jet_name;
use crate::ranklab::RankEngine;
use crate::sysmodel::DaeSystem;

/// Jacobian of the level-`level` generators with its column jets.
pub struct LevelJacobian {
    pub entries: Vec<Vec<DiffPoly>>,
    pub columns: Vec<JetVar>,
    pub max_jet: u32,
}

pub fn level_jacobian(sys: &DaeSystem, sigma: u32, level: u32) -> LevelJacobian {
    let top = sigma + level;
    let unknowns = sys.unknowns();
    let columns: Vec<JetVar> = (0..=top)
        .flat_map(|d| unknowns.iter().map(move |&v| JetVar::new(v, d)))
        .collect();
    let mut entries = Vec::new();
    for l in 0..top {
        for row in 0..sys.block_rows() {
            entries.push(columns.iter().map(|&c| sys.h_partial(row, l, c)).collect());
        }
    }
    LevelJacobian {
        entries,
        columns,
        max_jet: top,
    }
}

fn require_first_order(sys: &DaeSystem) -> Result<()> {
    if sys.e() != 1 {
        return Err(Error::Precondition(format!(
            "transcendence bases need a first-order system (e = {}); reduce it first",
            sys.e()
        )));
    }
    Ok(())
}

fn rank_without(
    sys: &DaeSystem,
    engine: &RankEngine,
    jac: &LevelJacobian,
    drop: &[JetVar],
    label: String,
) -> Result<usize> {
    let keep: Vec<usize> = (0..jac.columns.len())
        .filter(|&c| !drop.contains(&jac.columns[c]))
        .collect();
    let sub: Vec<Vec<DiffPoly>> = jac
        .entries
        .iter()
        .map(|row| keep.iter().map(|&c| row[c].clone()).collect())
        .collect();
    if sub.is_empty() || keep.is_empty() {
        return Ok(0);
    }
    matrix_rank(sys, engine, label, &sub, jac.max_jet)
}

fn label_for(sys: &DaeSystem, level: u32, vars: &[JetVar]) -> String {
    let names: Vec<String> = vars.iter().map(|&v| jet_name(v, sys.names())).collect();
    format!("indep{level}/{{{}}}", names.join(","))
}

/// Whether the classes of `vars` are algebraically independent at `level` (0 or 1).
pub fn is_algebraically_independent(
    sys: &DaeSystem,
    engine: &RankEngine,
    sigma: u32,
    vars: &[JetVar],
    level: u32,
) -> Result<bool> {
    require_first_order(sys)?;
    if level > 1 {
        return Err(Error::Precondition("level must be 0 or 1".into()));
    }
    let unknowns = sys.unknowns();
    if let Some(bad) = vars
        .iter()
        .find(|v| v.deriv > level || !unknowns.contains(&v.var))
    {
        return Err(Error::Precondition(format!(
            "`{}` is not an unknown jet of order ≤ {level}",
            jet_name(*bad, sys.names())
        )));
    }
    let jac = level_jacobian(sys, sigma, level);
    let full = rank_without(sys, engine, &jac, &[], format!("indep{level}/full"))?;
    let reduced = rank_without(sys, engine, &jac, vars, label_for(sys, level, vars))?;
    Ok(full == reduced)
}

/// One greedy decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisStep {
    pub candidate: String,
    pub level: u32,
    pub accepted: bool,
    pub rank_full: usize,
    pub rank_without: usize,
}

/// Partition of the unknowns into `W`, `ξ` and `η`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisReport {
    pub w: Vec<String>,
    pub xi: Vec<String>,
    pub eta: Vec<String>,
    /// The level-0 basis 𝓑_0.
    pub level0: Vec<String>,
    pub steps: Vec<BasisStep>,
}

struct Greedy<'a> {
    sys: &'a DaeSystem,
    engine: &'a RankEngine,
    jac: LevelJacobian,
    full: usize,
    level: u32,
}

impl Greedy<'_> {
    fn try_extend(
        &self,
        accepted: &[JetVar],
        cand: JetVar,
        steps: &mut Vec<BasisStep>,
    ) -> Result<bool> {
        let mut set = accepted.to_vec();
        set.push(cand);
        let r = rank_without(
            self.sys,
            self.engine,
            &self.jac,
            &set,
            label_for(self.sys, self.level, &set),
        )?;
        let ok = r == self.full;
        steps.push(BasisStep {
            candidate: jet_name(cand, self.sys.names()),
            level: self.level,
            accepted: ok,
            rank_full: self.full,
            rank_without: r,
        });
        Ok(ok)
    }
}

/// Greedy order-preserving differential transcendence basis (declared order, X before U).
pub fn differential_transcendence_basis(
    sys: &DaeSystem,
    engine: &RankEngine,
    sigma: u32,
) -> Result<BasisReport> {
    require_first_order(sys)?;
    let unknowns = sys.unknowns();
    let mut steps = Vec::new();
    let greedy = |level: u32| -> Result<Greedy<'_>> {
        let jac = level_jacobian(sys, sigma, level);
        let full = rank_without(sys, engine, &jac, &[], format!("indep{level}/full"))?;
        Ok(Greedy {
            sys,
            engine,
            jac,
            full,
            level,
        })
    };

    let g0 = greedy(0)?;
    let mut b0: Vec<JetVar> = Vec::new();
    for &v in &unknowns {
        let cand = JetVar::new(v, 0);
        if g0.try_extend(&b0, cand, &mut steps)? {
            b0.push(cand);
        }
    }

    let want = sys.m().saturating_sub(sys.r());
    let g1 = greedy(1)?;
    let mut accepted = b0.clone();
    let mut w: Vec<VarId> = Vec::new();
    for &b in &b0 {
        if w.len() == want {
            break;
        }
        let cand = b.shifted(1);
        if g1.try_extend(&accepted, cand, &mut steps)? {
            accepted.push(cand);
            w.push(b.var);
        }
    }
    if w.len() < want {
        return Err(Error::RankFailure(format!(
            "only {} of m − r = {want} independent derivatives found; retry with exact ranks",
            w.len()
        )));
    }
    let name = |v: &VarId| sys.name(*v).to_string();
    let xi: Vec<VarId> = b0
        .iter()
        .map(|j| j.var)
        .filter(|v| !w.contains(v))
        .collect();
    let eta: Vec<VarId> = unknowns
        .iter()
        .copied()
        .filter(|v| !w.contains(v) && !xi.contains(v))
        .collect();
    Ok(BasisReport {
        w: w.iter().map(name).collect(),
        xi: xi.iter().map(name).collect(),
        eta: eta.iter().map(name).collect(),
        level0: b0.iter().map(|j| name(&j.var)).collect(),
        steps,
    })
}

/// Orders before and after localizing at `w`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderPreservation {
    pub preserved: bool,
    pub ord: u64,
    pub ord_localized: u64,
}

pub fn verify_order_preservation(
    sys: &DaeSystem,
    engine: &RankEngine,
    w: &[VarId],
) -> Result<OrderPreservation> {
    let mu = differentiation_index(sys, engine, "base", None)?;
    let ord = ideal_order(sys, &mu)?;
    let local = sys.localize(w)?;
    let mu_l = differentiation_index(&local, engine, "localized", None)?;
    let ord_localized = ideal_order(&local, &mu_l)?;
    Ok(OrderPreservation {
        preserved: ord == ord_localized,
        ord,
        ord_localized,
    })
}
