//! Decision procedure mapping measured quantities (d, n, F_g, f_g) to
//! structural conclusions about the underlying state — distinguishability,
//! entanglement, the number of maximally entangled structures, and the DoF
//! count — plus generation of the fidelity-relation curve table.
//!
//! Rule boundaries follow the source inequalities exactly: strict where the
//! conclusion needs a strict excess (entanglement witnesses, the
//! distinguishable bound), inclusive where the threshold itself belongs to
//! the conclusion (separability at F_g ≤ 1/d, the DoF-count branch at
//! f_g ≤ 2/(d+1)). Equalities against 1 and n are tested with a 1e-6
//! tolerance because Monte Carlo estimates never land exactly.

use serde::Serialize;

use crate::channels::RelationParams;
use crate::error::{Error, Result};

/// Tolerance for testing f_g = 1 and F_g = n.
pub const EQUALITY_TOL: f64 = 1e-6;
/// Downward nudge applied before the ceiling in the DoF-count rule, so a
/// floating-point 2.0000000003 still yields 2.
pub const CEIL_NUDGE: f64 = 1e-9;

/// Measured quantities to characterize. At least one of `big_f_g`
/// (generalized singlet fraction) and `f_g` (generalized teleportation
/// fidelity) is required.
#[derive(Clone, Copy, Debug)]
pub struct CharacterizationInput {
    pub d: usize,
    pub n: Option<usize>,
    pub big_f_g: Option<f64>,
    pub f_g: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Distinguishability {
    Distinguishable,
    Indistinguishable,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Entanglement {
    Entangled,
    Separable,
    Unknown,
}

/// Conclusion about the number of DoFs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum DofConclusion {
    /// More than one DoF must be present (F_g exceeds the single-DoF cap).
    MoreThanOne,
    /// Exact DoF count ⌈d·F_g⌉ from the separable branch.
    Exactly(usize),
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CharacterizationReport {
    pub distinguishability: Distinguishability,
    pub entanglement: Entanglement,
    pub mes_count: Option<usize>,
    pub dof_conclusion: Option<DofConclusion>,
    pub fired_rules: Vec<String>,
    /// Populated when firable rules disagree; conclusions involved are
    /// reported as unknown rather than raising an error.
    pub contradictions: Vec<String>,
    /// Inputs outside their theoretical ranges (reported, not fatal).
    pub range_flags: Vec<String>,
}

/// Applies the four characterization cases in order. Unfirable rules yield
/// `unknown`, never a guess; mutually contradictory firings produce a
/// structured contradiction report.
pub fn characterize(input: &CharacterizationInput) -> Result<CharacterizationReport> {
    if input.d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need d >= 2, got {}",
            input.d
        )));
    }
    if input.big_f_g.is_none() && input.f_g.is_none() {
        return Err(Error::InvalidArgument(
            "at least one of F_g and f_g is required".into(),
        ));
    }
    if let Some(n) = input.n {
        if n < 1 {
            return Err(Error::InvalidArgument("DoF count must be >= 1".into()));
        }
    }
    let d = input.d as f64;

    let mut fired = Vec::new();
    let mut contradictions = Vec::new();
    let mut range_flags = Vec::new();
    if let Some(f) = input.f_g {
        if !(0.0..=1.0 + EQUALITY_TOL).contains(&f) {
            range_flags.push(format!("f_g = {f} outside [0, 1]"));
        }
    }
    if let Some(big_f) = input.big_f_g {
        let cap = input.n.map(|n| n as f64).unwrap_or(d);
        if big_f < 0.0 || big_f > cap + EQUALITY_TOL {
            range_flags.push(format!("F_g = {big_f} outside [0, {cap}]"));
        }
    }

    // Case 1: distinguishability.
    let mut dist_votes: Vec<(Distinguishability, &str)> = Vec::new();
    if let Some(f) = input.f_g {
        if (f - 1.0).abs() <= EQUALITY_TOL {
            dist_votes.push((
                Distinguishability::Distinguishable,
                "case1.unit-fidelity-distinguishable",
            ));
        }
    }
    if let (Some(big_f), Some(n)) = (input.big_f_g, input.n) {
        let bound = 1.0 + (n as f64 - 1.0) / d;
        if big_f > bound {
            dist_votes.push((
                Distinguishability::Indistinguishable,
                "case1.gsf-bound-indistinguishable",
            ));
        }
    }
    for (_, rule) in &dist_votes {
        fired.push(rule.to_string());
    }
    let distinguishability = match dist_votes.as_slice() {
        [] => Distinguishability::Unknown,
        votes => {
            let first = votes[0].0;
            if votes.iter().all(|(v, _)| *v == first) {
                first
            } else {
                contradictions.push(
                    "distinguishability: unit teleportation fidelity conflicts with the \
                     generalized-singlet-fraction bound"
                        .to_string(),
                );
                Distinguishability::Unknown
            }
        }
    };

    // Case 2: entanglement.
    let mut ent_votes: Vec<(Entanglement, &str)> = Vec::new();
    if let Some(f) = input.f_g {
        let classical = 2.0 / (d + 1.0);
        if f > classical {
            ent_votes.push((Entanglement::Entangled, "case2.fidelity-entangled"));
        } else {
            ent_votes.push((Entanglement::Separable, "case2.fidelity-separable"));
        }
    }
    if let Some(big_f) = input.big_f_g {
        if let Some(n) = input.n {
            if big_f > n as f64 / d {
                ent_votes.push((Entanglement::Entangled, "case2.gsf-entangled"));
            }
        }
        if big_f <= 1.0 / d {
            ent_votes.push((Entanglement::Separable, "case2.gsf-separable"));
        }
    }
    for (_, rule) in &ent_votes {
        fired.push(rule.to_string());
    }
    let entanglement = match ent_votes.as_slice() {
        [] => Entanglement::Unknown,
        votes => {
            let first = votes[0].0;
            if votes.iter().all(|(v, _)| *v == first) {
                first
            } else {
                contradictions.push(
                    "entanglement: the fidelity witness and the singlet-fraction bounds disagree"
                        .to_string(),
                );
                Entanglement::Unknown
            }
        }
    };

    // Case 3: number of maximally entangled structures.
    let mut mes_count = None;
    if let Some(f) = input.f_g {
        if (f - 1.0).abs() <= EQUALITY_TOL {
            mes_count = Some(1);
            fired.push("case3.single-mes".to_string());
        }
    }
    if let (Some(big_f), Some(n)) = (input.big_f_g, input.n) {
        if (big_f - n as f64).abs() <= EQUALITY_TOL {
            // The stronger statement wins when both equalities hold.
            mes_count = Some(n);
            fired.push("case3.n-mes".to_string());
        }
    }

    // Case 4: DoF count.
    let mut dof_conclusion = None;
    if let Some(big_f) = input.big_f_g {
        if big_f > 1.0 {
            dof_conclusion = Some(DofConclusion::MoreThanOne);
            fired.push("case4.multi-dof".to_string());
        }
    }
    if let (Some(f), Some(big_f)) = (input.f_g, input.big_f_g) {
        if f <= 2.0 / (d + 1.0) {
            let count = (d * big_f - CEIL_NUDGE).ceil().max(1.0) as usize;
            dof_conclusion = Some(DofConclusion::Exactly(count));
            fired.push("case4.dof-count".to_string());
        }
    }

    Ok(CharacterizationReport {
        distinguishability,
        entanglement,
        mes_count,
        dof_conclusion,
        fired_rules: fired,
        contradictions,
        range_flags,
    })
}

// ---------------------------------------------------------------------------
// Relation-curve table
// ---------------------------------------------------------------------------

/// One row of the relation-curve table: the attainable F_g and f_g ranges
/// for a DoF count in one regime.
#[derive(Clone, Debug, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub fg_big_min: f64,
    pub fg_big_max: f64,
    pub fg_min: f64,
    pub fg_max: f64,
    pub regime: &'static str,
}

/// Emits, for every n in the range, the endpoint pairs of the affine
/// fidelity relation in both regimes: distinguishable (F_max = 1+(n−1)/d,
/// f_max from the distinguishable template, normally 1) and
/// indistinguishable (F_max = n, f_max strictly below 1 as required by the
/// no-go constraint).
pub fn fig3_curves(
    d: usize,
    n_range: impl IntoIterator<Item = usize>,
    f_max_dist: f64,
    f_max_indist: f64,
) -> Result<Vec<CurveRow>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2, got {d}")));
    }
    if f_max_indist >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "indistinguishable f_max must be < 1 (no-go constraint), got {f_max_indist}"
        )));
    }
    let mut rows = Vec::new();
    for n in n_range {
        if n < 1 {
            return Err(Error::InvalidArgument("DoF counts must be >= 1".into()));
        }
        let dist_f_max = 1.0 + (n as f64 - 1.0) / d as f64;
        let specs = [
            ("distinguishable", f_max_dist, dist_f_max),
            ("indistinguishable", f_max_indist, n as f64),
        ];
        for (regime, f_max, big_f_max) in specs {
            let params = RelationParams::new(n, d, f_max, big_f_max)?;
            let floor = params.gsf_floor();
            let fg_min = crate::channels::relation_fg(floor, &params)?;
            let fg_max = crate::channels::relation_fg(big_f_max, &params)?;
            rows.push(CurveRow {
                n,
                fg_big_min: floor,
                fg_big_max: big_f_max,
                fg_min,
                fg_max,
                regime,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("DoF range must be nonempty".into()));
    }
    Ok(rows)
}
