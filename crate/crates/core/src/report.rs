//! The analysis record emitted by the command-line front end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexcore::MuSequence;
use crate::invariants::HilbertKolchin;
use crate::ranklab::{AuditEntry, RankMode};
use crate::sysmodel::{DaeSystem, Field};
use crate::transbasis::{BasisReport, OrderPreservation};

pub const FORMAT_VERSION: u32 = 1;

/// Marker serialized as the string `"n/a"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NotApplicable {
    #[serde(rename = "n/a")]
    Na,
}

/// A value or `"n/a"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Avail<T> {
    Value(T),
    Na(NotApplicable),
}

impl<T> Avail<T> {
    pub fn na() -> Self {
        Avail::Na(NotApplicable::Na)
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Avail::Value(v) => Some(v),
            Avail::Na(_) => None,
        }
    }
}

impl<T> From<Option<T>> for Avail<T> {
    fn from(v: Option<T>) -> Self {
        v.map_or_else(Avail::na, Avail::Value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemEcho {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub field: Field,
    pub x: Vec<String>,
    pub u: Vec<String>,
    pub y: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub e: u32,
    pub e_j: Vec<u32>,
    /// `None` for a U variable absent from every g.
    pub eps: Vec<Option<u32>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SystemEcho {
    pub fn of(sys: &DaeSystem, name: Option<String>) -> Self {
        let names =
            |ids: &[crate::diffpoly::VarId]| ids.iter().map(|&v| sys.name(v).to_string()).collect();
        SystemEcho {
            name,
            field: sys.field(),
            x: names(sys.x()),
            u: names(sys.u()),
            y: names(&sys.output_symbols()),
            n: sys.n(),
            m: sys.m(),
            r: sys.r(),
            e: sys.e(),
            e_j: sys.e_j().to_vec(),
            eps: sys.eps().to_vec(),
            warnings: sys.warnings().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSection {
    pub mu: MuSequence,
    pub sigma: u32,
    pub search_cap: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_tilde: Option<Avail<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_tilde: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_tilde_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_hat: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsSection {
    pub ord: u64,
    pub hilbert_kolchin: HilbertKolchin,
    pub greenspan: u64,
    pub ritt: u64,
    pub jacobi: Avail<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi_note: Option<String>,
    pub tight: Vec<String>,
    /// ord does not exceed any applicable bound.
    pub order_bounds_hold: bool,
    /// Every μ_k lies within its a-priori window.
    pub mu_bounds_hold: bool,
    /// σ was reached within the termination cap.
    pub sigma_within_cap: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSection {
    /// Set when the basis is computed on the first-order reduction.
    pub reduced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub sigma: u32,
    pub basis: BasisReport,
    pub order_preservation: Avail<OrderPreservation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSection {
    pub target: String,
    pub basis: Vec<String>,
    pub y_jets: Vec<String>,
    pub max_degree: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub localized: Vec<String>,
    /// The relation, or `"n/a"` when none exists up to `max_degree`.
    pub relation: Avail<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified_points: Option<usize>,
    /// `d^((σ+1)(n+r))` and `d^(σ(n+r))` as decimal strings.
    pub degree_bound_v1: String,
    pub degree_bound_v0: String,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSettings {
    pub mode: RankMode,
    pub epsilon: f64,
    pub seed: u64,
}

/// Everything one invocation computed; absent sections were not requested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub format_version: u32,
    pub command: String,
    pub ranks: RankSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Avail<BasisSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<RelationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<AuditEntry>>,
}

impl AnalysisReport {
    pub fn empty(command: &str, ranks: RankSettings) -> Self {
        AnalysisReport {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            ranks,
            system: None,
            index: None,
            bounds: None,
            basis: None,
            basis_note: None,
            relation: None,
            audit: None,
        }
    }
}

/// Pretty JSON with a trailing newline; key order follows the declarations.
pub fn emit_report(r: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub fn load_report(text: &str) -> Result<AnalysisReport> {
    let r: AnalysisReport =
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    if r.format_version != FORMAT_VERSION {
        return Err(Error::Document(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            r.format_version
        )));
    }
    Ok(r)
}
