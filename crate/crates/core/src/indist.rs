//! Spatially-labeled indistinguishable two-particle states with boson or
//! fermion statistics: the symmetrized inner product, maximally entangled
//! states, the DoF trace-out rule with exchange cross terms, sLOCC
//! projection onto one particle per region, region-wise deformations, and
//! the symmetrized channel–state construction.
//!
//! # Representation
//!
//! A single-particle basis label is a (region, DoF-tuple) pair. A
//! two-particle basis ket |φ, ψ⟩ is represented on the two-slot product
//! space as the symmetrized vector φ⊗ψ + η·ψ⊗φ (no 1/√2 inside the
//! bracket; normalization is carried by the state). Under this convention
//! the symmetrized inner product of basis kets is
//! ⟨φ₁,φ₂|ψ₁,ψ₂⟩ = ⟨φ₁|ψ₁⟩⟨φ₂|ψ₂⟩ + η⟨φ₁|ψ₂⟩⟨φ₂|ψ₁⟩, which is exactly half
//! the two-slot inner product of the symmetrized vectors. A normalized
//! state therefore has two-slot norm² = 2 and its density matrix is
//! vv†/2, which has unit trace.
//!
//! Exchange-parity bookkeeping is handled by canonical term ordering:
//! terms are stored with (region₁, dofs₁) ≤ (region₂, dofs₂)
//! lexicographically, and the statistics sign η is applied on swap, since
//! |ψ₂, ψ₁⟩ = η|ψ₁, ψ₂⟩.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{c, cr, kron, max_norm_diff, CMatrix, CVector, DensityMatrix};
use crate::multidof::{pairwise_reduction, DistState, STATE_SCHEMA_VERSION};

/// Hard cap on the single-particle dimension (regions × d^n).
pub const SINGLE_PARTICLE_CAP: usize = 64;

/// Particle exchange statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    /// Exchange sign η: +1 for bosons, −1 for fermions.
    pub fn eta(&self) -> f64 {
        match self {
            Statistics::Boson => 1.0,
            Statistics::Fermion => -1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Statistics::Boson => "boson",
            Statistics::Fermion => "fermion",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "boson" => Ok(Statistics::Boson),
            "fermion" => Ok(Statistics::Fermion),
            other => Err(Error::Parse(format!(
                "statistics must be \"boson\" or \"fermion\", got \"{other}\""
            ))),
        }
    }
}

/// One symmetrized basis term |region₁ dofs₁, region₂ dofs₂⟩ with an
/// amplitude. Regions are indices into the owning state's region table.
#[derive(Clone, Debug, PartialEq)]
pub struct IndistTerm {
    pub region1: usize,
    pub dofs1: Vec<usize>,
    pub region2: usize,
    pub dofs2: Vec<usize>,
    pub amplitude: Complex64,
}

impl IndistTerm {
    pub fn new(
        region1: usize,
        dofs1: Vec<usize>,
        region2: usize,
        dofs2: Vec<usize>,
        amplitude: Complex64,
    ) -> Self {
        Self {
            region1,
            dofs1,
            region2,
            dofs2,
            amplitude,
        }
    }

    fn key1(&self) -> (usize, &[usize]) {
        (self.region1, &self.dofs1)
    }

    fn key2(&self) -> (usize, &[usize]) {
        (self.region2, &self.dofs2)
    }
}

/// Symmetrized inner product ⟨a|b⟩ of two terms, amplitudes included:
/// conj(κ_a)·κ_b·(⟨φ₁|ψ₁⟩⟨φ₂|ψ₂⟩ + η⟨φ₁|ψ₂⟩⟨φ₂|ψ₁⟩) with basis-ket deltas.
pub fn sym_inner(a: &IndistTerm, b: &IndistTerm, statistics: Statistics) -> Result<Complex64> {
    if a.dofs1.len() != b.dofs1.len()
        || a.dofs1.len() != a.dofs2.len()
        || b.dofs1.len() != b.dofs2.len()
    {
        return Err(Error::DimensionMismatch(
            "terms must carry the same number of DoFs on every slot".into(),
        ));
    }
    let delta = |x: (usize, &[usize]), y: (usize, &[usize])| -> f64 {
        if x == y {
            1.0
        } else {
            0.0
        }
    };
    let direct = delta(a.key1(), b.key1()) * delta(a.key2(), b.key2());
    let crossed = delta(a.key1(), b.key2()) * delta(a.key2(), b.key1());
    Ok(a.amplitude.conj() * b.amplitude * cr(direct + statistics.eta() * crossed))
}

/// A normalized superposition of symmetrized two-particle terms.
#[derive(Clone, Debug)]
pub struct IndistState {
    terms: Vec<IndistTerm>,
    statistics: Statistics,
    n: usize,
    d: usize,
    regions: Vec<String>,
    embedded: CVector,
}

impl IndistState {
    /// Builds and normalizes a state. Terms are canonicalized (slot order,
    /// merge) first; fermionic terms violating Pauli exclusion are rejected,
    /// and term sets that cancel entirely under symmetrization are
    /// degenerate.
    pub fn new(
        regions: Vec<String>,
        n: usize,
        d: usize,
        statistics: Statistics,
        terms: Vec<IndistTerm>,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidArgument("at least one region required".into()));
        }
        if n < 1 || d < 2 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 1 DoFs of dimension d >= 2, got n={n}, d={d}"
            )));
        }
        {
            let mut sorted = regions.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != regions.len() {
                return Err(Error::InvalidArgument("region names must be unique".into()));
            }
        }
        let per_region = d.pow(n as u32);
        let single = regions.len() * per_region;
        if single > SINGLE_PARTICLE_CAP {
            return Err(Error::InvalidArgument(format!(
                "single-particle dimension {single} exceeds the cap {SINGLE_PARTICLE_CAP}"
            )));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("state needs at least one term".into()));
        }
        for t in &terms {
            if t.region1 >= regions.len() || t.region2 >= regions.len() {
                return Err(Error::InvalidArgument(format!(
                    "region index out of range (have {} regions)",
                    regions.len()
                )));
            }
            if t.dofs1.len() != n || t.dofs2.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "every DoF tuple must have length n = {n}"
                )));
            }
            if t.dofs1.iter().chain(t.dofs2.iter()).any(|&l| l >= d) {
                return Err(Error::InvalidArgument(format!(
                    "DoF label out of range for dimension {d}"
                )));
            }
        }

        let canonical = canonicalize_terms(terms, statistics)?;
        if canonical.is_empty() {
            return Err(Error::DegenerateState(
                "all terms cancelled during canonicalization".into(),
            ));
        }

        let mut state = Self {
            terms: canonical,
            statistics,
            n,
            d,
            regions,
            embedded: CVector::zeros(single * single),
        };
        state.embedded = state.embed_terms();
        let norm_sq = state.embedded.norm_squared();
        if norm_sq < 1e-14 {
            return Err(Error::DegenerateState(
                "state vanishes under symmetrization".into(),
            ));
        }
        let scale = (2.0 / norm_sq).sqrt();
        state.embedded *= cr(scale);
        for t in &mut state.terms {
            t.amplitude *= cr(scale);
        }
        Ok(state)
    }

    /// Reconstructs a state from a symmetrized two-slot vector.
    pub fn from_embedded(
        v: &CVector,
        regions: Vec<String>,
        n: usize,
        d: usize,
        statistics: Statistics,
    ) -> Result<Self> {
        let single = regions.len() * d.pow(n as u32);
        if v.len() != single * single {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs two-slot dimension {}",
                v.len(),
                single * single
            )));
        }
        let eta = statistics.eta();
        let mut max_asym = 0.0f64;
        for k1 in 0..single {
            for k2 in 0..single {
                let asym = (v[k1 * single + k2] - cr(eta) * v[k2 * single + k1]).norm();
                max_asym = max_asym.max(asym);
            }
        }
        if max_asym > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "vector is not exchange-symmetric (deviation {max_asym:.3e})"
            )));
        }
        let decode = |k: usize| -> (usize, Vec<usize>) {
            let per = d.pow(n as u32);
            let region = k / per;
            let mut flat = k % per;
            let mut dofs = vec![0usize; n];
            for slot in (0..n).rev() {
                dofs[slot] = flat % d;
                flat /= d;
            }
            (region, dofs)
        };
        let mut terms = Vec::new();
        for k1 in 0..single {
            for k2 in k1..single {
                let raw = v[k1 * single + k2];
                let amp = if k1 == k2 { raw / cr(2.0) } else { raw };
                if amp.norm() <= 1e-13 {
                    continue;
                }
                let (r1, d1) = decode(k1);
                let (r2, d2) = decode(k2);
                terms.push(IndistTerm::new(r1, d1, r2, d2, amp));
            }
        }
        Self::new(regions, n, d, statistics, terms)
    }

    fn embed_terms(&self) -> CVector {
        let m = self.single_particle_dim();
        let mut v = CVector::zeros(m * m);
        let eta = cr(self.statistics.eta());
        for t in &self.terms {
            let k1 = self.encode(t.region1, &t.dofs1);
            let k2 = self.encode(t.region2, &t.dofs2);
            v[k1 * m + k2] += t.amplitude;
            v[k2 * m + k1] += eta * t.amplitude;
        }
        v
    }

    /// Flat single-particle index of a (region, DoF-tuple) label.
    pub fn encode(&self, region: usize, dofs: &[usize]) -> usize {
        let per = self.d.pow(self.n as u32);
        region * per + dofs.iter().fold(0, |acc, &l| acc * self.d + l)
    }

    pub fn terms(&self) -> &[IndistTerm] {
        &self.terms
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn region_index(&self, name: &str) -> Result<usize> {
        self.regions
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region \"{name}\"")))
    }

    /// Regions × d^n.
    pub fn single_particle_dim(&self) -> usize {
        self.regions.len() * self.d.pow(self.n as u32)
    }

    /// Symmetrized two-slot vector (norm² = 2).
    pub fn embedded(&self) -> &CVector {
        &self.embedded
    }

    /// Density matrix vv†/2 on the two-slot space (unit trace).
    pub fn embedded_density(&self) -> DensityMatrix {
        let m = self.single_particle_dim();
        let mat = (&self.embedded * self.embedded.adjoint()).scale(0.5);
        DensityMatrix::from_trusted(mat, vec![m, m]).expect("embedded density is valid")
    }
}

fn canonicalize_terms(terms: Vec<IndistTerm>, statistics: Statistics) -> Result<Vec<IndistTerm>> {
    type Key = ((usize, Vec<usize>), (usize, Vec<usize>));
    let mut merged: BTreeMap<Key, Complex64> = BTreeMap::new();
    for mut t in terms {
        let k1 = (t.region1, t.dofs1.clone());
        let k2 = (t.region2, t.dofs2.clone());
        if k1 == k2 && statistics == Statistics::Fermion {
            return Err(Error::InvalidArgument(format!(
                "Pauli exclusion: fermionic term with identical single-particle states \
                 (region {}, dofs {:?})",
                t.region1, t.dofs1
            )));
        }
        if k2 < k1 {
            std::mem::swap(&mut t.region1, &mut t.region2);
            std::mem::swap(&mut t.dofs1, &mut t.dofs2);
            t.amplitude *= cr(statistics.eta());
        }
        let key = (
            (t.region1, t.dofs1.clone()),
            (t.region2, t.dofs2.clone()),
        );
        *merged.entry(key).or_insert_with(Complex64::default) += t.amplitude;
    }
    Ok(merged
        .into_iter()
        .filter(|(_, amp)| amp.norm() > 1e-14)
        .map(|(((r1, d1), (r2, d2)), amp)| IndistTerm::new(r1, d1, r2, d2, amp))
        .collect())
}

/// Maximally entangled state of two indistinguishable particles:
/// (1/√d) Σ_a |s₁ a, s₂ a⟩ over one d-dimensional DoF and two regions.
pub fn indist_mes(d: usize, statistics: Statistics) -> Result<IndistState> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximally entangled state needs d >= 2, got {d}"
        )));
    }
    let amp = cr(1.0 / (d as f64).sqrt());
    let terms = (0..d)
        .map(|a| IndistTerm::new(0, vec![a], 1, vec![a], amp))
        .collect();
    IndistState::new(vec!["s1".into(), "s2".into()], 1, d, statistics, terms)
}

// ---------------------------------------------------------------------------
// Ragged label spaces and the DoF trace-out rule
// ---------------------------------------------------------------------------

/// One block of a ragged single-particle label space: a region together with
/// the original DoF indices still attached to a particle found there.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Sector {
    pub region: usize,
    pub dofs: Vec<usize>,
}

/// Single-particle label space as a disjoint union of sectors. Freshly built
/// states have one sector per region carrying all n DoFs; trace-outs add
/// reduced sectors and prune unpopulated ones.
#[derive(Clone, Debug)]
pub struct LabelSpace {
    d: usize,
    region_names: Vec<String>,
    sectors: Vec<Sector>,
}

impl LabelSpace {
    fn full(d: usize, n: usize, region_names: Vec<String>) -> Self {
        let sectors = (0..region_names.len())
            .map(|region| Sector {
                region,
                dofs: (0..n).collect(),
            })
            .collect();
        Self {
            d,
            region_names,
            sectors,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn region_names(&self) -> &[String] {
        &self.region_names
    }

    pub fn region_index(&self, name: &str) -> Result<usize> {
        self.region_names
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region \"{name}\"")))
    }

    pub fn sector_dim(&self, sector: usize) -> usize {
        self.d.pow(self.sectors[sector].dofs.len() as u32)
    }

    pub fn sector_offset(&self, sector: usize) -> usize {
        (0..sector).map(|s| self.sector_dim(s)).sum()
    }

    pub fn dim(&self) -> usize {
        (0..self.sectors.len()).map(|s| self.sector_dim(s)).sum()
    }

    pub fn sector_of(&self, label: usize) -> usize {
        let mut off = 0usize;
        for (idx, _) in self.sectors.iter().enumerate() {
            off += self.sector_dim(idx);
            if label < off {
                return idx;
            }
        }
        unreachable!("label out of range")
    }

    pub fn find_sector(&self, region: usize, dofs: &[usize]) -> Option<usize> {
        self.sectors
            .iter()
            .position(|s| s.region == region && s.dofs == dofs)
    }
}

/// A density matrix over a ragged two-slot label space, as produced by the
/// indistinguishable DoF trace-out rule. `weight` accumulates the
/// pre-normalization trace of every rule application (the rule's implicit
/// normalization, reported because it is the sLOCC-relevant weight).
#[derive(Clone, Debug)]
pub struct IndistDensity {
    space: LabelSpace,
    statistics: Statistics,
    mat: CMatrix,
    weight: f64,
}

impl IndistDensity {
    pub fn from_state(state: &IndistState) -> Self {
        let space = LabelSpace::full(state.d(), state.n(), state.regions().to_vec());
        Self {
            space,
            statistics: state.statistics(),
            mat: state.embedded_density().matrix().clone(),
            weight: 1.0,
        }
    }

    pub(crate) fn from_parts(
        space: LabelSpace,
        statistics: Statistics,
        mat: CMatrix,
        weight: f64,
    ) -> Self {
        Self {
            space,
            statistics,
            mat,
            weight,
        }
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// Two-slot matrix, renormalized to unit trace.
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Accumulated pre-normalization weight of all trace-out applications.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn slot_dim(&self) -> usize {
        self.space.dim()
    }

    /// Extracts the physical block where one particle sits in sector `x` and
    /// the other in sector `y` (x ≠ y), expressed on the orthonormal basis
    /// e(p,q)/√2. Returns the renormalized block as an ordered
    /// (x-tuple ⊗ y-tuple) density matrix together with the projection
    /// probability.
    pub fn extract_pair_block(&self, x: usize, y: usize) -> Result<(DensityMatrix, f64)> {
        if x == y {
            return Err(Error::InvalidArgument(
                "pair block needs two distinct sectors".into(),
            ));
        }
        if x >= self.space.sectors().len() || y >= self.space.sectors().len() {
            return Err(Error::InvalidArgument("sector index out of range".into()));
        }
        let eta = cr(self.statistics.eta());
        let m = self.slot_dim();
        let dim_x = self.space.sector_dim(x);
        let dim_y = self.space.sector_dim(y);
        let off_x = self.space.sector_offset(x);
        let off_y = self.space.sector_offset(y);
        let out_dim = dim_x * dim_y;
        let mut block = CMatrix::zeros(out_dim, out_dim);
        // ⟨e(p,q)| ρ |e(p',q')⟩ / 2 with e(p,q) = |p,q⟩ + η|q,p⟩.
        for p in 0..dim_x {
            for q in 0..dim_y {
                let row_a = (off_x + p) * m + (off_y + q);
                let row_b = (off_y + q) * m + (off_x + p);
                for pp in 0..dim_x {
                    for qq in 0..dim_y {
                        let col_a = (off_x + pp) * m + (off_y + qq);
                        let col_b = (off_y + qq) * m + (off_x + pp);
                        let val = self.mat[(row_a, col_a)]
                            + eta * self.mat[(row_a, col_b)]
                            + eta.conj() * self.mat[(row_b, col_a)]
                            + self.mat[(row_b, col_b)];
                        block[(p * dim_y + q, pp * dim_y + qq)] = val * cr(0.5);
                    }
                }
            }
        }
        let prob = block.trace().re;
        if prob < 1e-12 {
            return Err(Error::DegenerateState(format!(
                "projection onto sectors ({x}, {y}) has vanishing probability"
            )));
        }
        let nx = self.space.sectors()[x].dofs.len();
        let ny = self.space.sectors()[y].dofs.len();
        let mut dims = Vec::new();
        dims.extend(std::iter::repeat(self.space.d()).take(nx));
        dims.extend(std::iter::repeat(self.space.d()).take(ny));
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "both sectors are bare; nothing to extract".into(),
            ));
        }
        let rho = DensityMatrix::from_trusted(block.scale(1.0 / prob), dims)?;
        Ok((rho, prob))
    }

    fn sector_is_populated(&self, sector: usize, tol: f64) -> bool {
        let m = self.slot_dim();
        let off = self.space.sector_offset(sector);
        let dim = self.space.sector_dim(sector);
        let in_sector = |label: usize| label >= off && label < off + dim;
        for row in 0..m * m {
            let (r1, r2) = (row / m, row % m);
            for col in 0..m * m {
                if self.mat[(row, col)].norm() <= tol {
                    continue;
                }
                let (c1, c2) = (col / m, col % m);
                if in_sector(r1) || in_sector(r2) || in_sector(c1) || in_sector(c2) {
                    return true;
                }
            }
        }
        false
    }

    /// Drops sectors with no numerical support and compacts the matrix.
    fn pruned(self) -> Self {
        let keep: Vec<usize> = (0..self.space.sectors().len())
            .filter(|&s| self.sector_is_populated(s, 1e-13))
            .collect();
        if keep.len() == self.space.sectors().len() || keep.is_empty() {
            return self;
        }
        let old_m = self.slot_dim();
        let mut label_map = Vec::new(); // new slot label -> old slot label
        for &s in &keep {
            let off = self.space.sector_offset(s);
            for t in 0..self.space.sector_dim(s) {
                label_map.push(off + t);
            }
        }
        let new_m = label_map.len();
        let mut mat = CMatrix::zeros(new_m * new_m, new_m * new_m);
        for (nr1, &or1) in label_map.iter().enumerate() {
            for (nr2, &or2) in label_map.iter().enumerate() {
                for (nc1, &oc1) in label_map.iter().enumerate() {
                    for (nc2, &oc2) in label_map.iter().enumerate() {
                        mat[(nr1 * new_m + nr2, nc1 * new_m + nc2)] =
                            self.mat[(or1 * old_m + or2, oc1 * old_m + oc2)];
                    }
                }
            }
        }
        let space = LabelSpace {
            d: self.space.d,
            region_names: self.space.region_names.clone(),
            sectors: keep
                .iter()
                .map(|&s| self.space.sectors()[s].clone())
                .collect(),
        };
        Self {
            space,
            statistics: self.statistics,
            mat,
            weight: self.weight,
        }
    }
}

/// Traces out one DoF at one region, applying the four-term rule with η on
/// the exchange cross terms. Both the ket- and bra-side slots respond
/// independently, so the output lives on an enlarged ragged label space; the
/// result is renormalized to unit trace and the pre-normalization weight is
/// accumulated on the output.
pub fn dof_trace_out_region(
    rho: &IndistDensity,
    region: &str,
    dof: usize,
) -> Result<IndistDensity> {
    let region_idx = rho.space().region_index(region)?;
    let old_space = rho.space();
    let d = old_space.d();

    // Classify the populated sectors at this region.
    let mut has_dof = Vec::new();
    let mut lacks_dof = Vec::new();
    for (idx, sector) in old_space.sectors().iter().enumerate() {
        if sector.region != region_idx || !rho.sector_is_populated(idx, 1e-13) {
            continue;
        }
        if sector.dofs.contains(&dof) {
            has_dof.push(idx);
        } else {
            lacks_dof.push(idx);
        }
    }
    if has_dof.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no particle at region \"{region}\" still carries DoF {dof}"
        )));
    }
    if !lacks_dof.is_empty() {
        return Err(Error::UnsupportedReduction(format!(
            "region \"{region}\" mixes sectors with and without DoF {dof}; \
             this reduction sequence is not supported"
        )));
    }

    // New space: all old sectors plus a reduced replacement per contracted
    // sector.
    let mut new_sectors = old_space.sectors().to_vec();
    let mut replacement_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in &has_dof {
        let mut reduced = old_space.sectors()[s].clone();
        reduced.dofs.retain(|&k| k != dof);
        let pos = new_sectors.iter().position(|x| *x == reduced).unwrap_or_else(|| {
            new_sectors.push(reduced.clone());
            new_sectors.len() - 1
        });
        replacement_of.insert(s, pos);
    }
    let new_space = LabelSpace {
        d,
        region_names: old_space.region_names().to_vec(),
        sectors: new_sectors,
    };

    // Per-label maps: identity embedding and the DoF-m contraction.
    let old_m = old_space.dim();
    let new_m = new_space.dim();
    let mut identity_map = vec![0usize; old_m];
    // contraction[k] = Some((new label, dof value at `dof`))
    let mut contraction: Vec<Option<(usize, usize)>> = vec![None; old_m];
    for (s, sector) in old_space.sectors().iter().enumerate() {
        let off = old_space.sector_offset(s);
        let sdim = old_space.sector_dim(s);
        // The same sector exists in the new space (sector order preserved).
        let new_off = new_space.sector_offset(s);
        for t in 0..sdim {
            identity_map[off + t] = new_off + t;
        }
        if let Some(&rs) = replacement_of.get(&s) {
            let r_off = new_space.sector_offset(rs);
            let pos_in_tuple = sector.dofs.iter().position(|&k| k == dof).unwrap();
            for t in 0..sdim {
                // Decode tuple, remove the traced DoF, re-encode.
                let mut labels = Vec::with_capacity(sector.dofs.len());
                let mut rem = t;
                for _ in 0..sector.dofs.len() {
                    labels.push(rem % d);
                    rem /= d;
                }
                labels.reverse();
                let value = labels[pos_in_tuple];
                let mut rest = labels.clone();
                rest.remove(pos_in_tuple);
                let flat = rest.iter().fold(0, |acc, &l| acc * d + l);
                contraction[off + t] = Some((r_off + flat, value));
            }
        }
    }

    let eta = cr(rho.statistics().eta());
    let mut out = CMatrix::zeros(new_m * new_m, new_m * new_m);
    for r1 in 0..old_m {
        for r2 in 0..old_m {
            let row = r1 * old_m + r2;
            for c1 in 0..old_m {
                for c2 in 0..old_m {
                    let z = rho.matrix()[(row, c1 * old_m + c2)];
                    if z.norm() <= 1e-16 {
                        continue;
                    }
                    // Term 1: contract ket slot 1 and bra slot 1.
                    if let (Some((kr1, vr1)), Some((kc1, vc1))) = (contraction[r1], contraction[c1])
                    {
                        if vr1 == vc1 {
                            out[(
                                kr1 * new_m + identity_map[r2],
                                kc1 * new_m + identity_map[c2],
                            )] += z;
                        }
                    }
                    // Term 2 (η): contract ket slot 2 and bra slot 1.
                    if let (Some((kr2, vr2)), Some((kc1, vc1))) = (contraction[r2], contraction[c1])
                    {
                        if vr2 == vc1 {
                            out[(
                                identity_map[r1] * new_m + kr2,
                                kc1 * new_m + identity_map[c2],
                            )] += eta * z;
                        }
                    }
                    // Term 3 (η): contract ket slot 1 and bra slot 2.
                    if let (Some((kr1, vr1)), Some((kc2, vc2))) = (contraction[r1], contraction[c2])
                    {
                        if vr1 == vc2 {
                            out[(
                                kr1 * new_m + identity_map[r2],
                                identity_map[c1] * new_m + kc2,
                            )] += eta * z;
                        }
                    }
                    // Term 4: contract ket slot 2 and bra slot 2.
                    if let (Some((kr2, vr2)), Some((kc2, vc2))) = (contraction[r2], contraction[c2])
                    {
                        if vr2 == vc2 {
                            out[(
                                identity_map[r1] * new_m + kr2,
                                identity_map[c1] * new_m + kc2,
                            )] += z;
                        }
                    }
                }
            }
        }
    }

    let weight = out.trace().re;
    if weight < 1e-14 {
        return Err(Error::DegenerateState(
            "trace-out left no support".into(),
        ));
    }
    let result = IndistDensity::from_parts(
        new_space,
        rho.statistics(),
        out.scale(1.0 / weight),
        rho.weight() * weight,
    );
    Ok(result.pruned())
}

/// sLOCC projection: post-selects exactly one particle in each of two
/// regions and returns the ordered two-particle state (region_x side first)
/// with the post-selection probability.
pub fn slocc_project(
    state: &IndistState,
    region_x: &str,
    region_y: &str,
) -> Result<(DistState, f64)> {
    if region_x == region_y {
        return Err(Error::InvalidArgument(
            "sLOCC projection needs two distinct regions".into(),
        ));
    }
    let density = IndistDensity::from_state(state);
    let x = density
        .space()
        .find_sector(state.region_index(region_x)?, &(0..state.n()).collect::<Vec<_>>())
        .expect("full sector exists");
    let y = density
        .space()
        .find_sector(state.region_index(region_y)?, &(0..state.n()).collect::<Vec<_>>())
        .expect("full sector exists");
    let (rho, prob) = density.extract_pair_block(x, y)?;
    let dist = DistState::from_density(rho, state.d(), state.n(), state.n())?;
    Ok((dist, prob))
}

/// Conditional pair state ρ_{x_i y_j}: sLOCC projection onto one particle
/// per region followed by tracing out every DoF except DoF `i` at `region_x`
/// and DoF `j` at `region_y`. Returns the d⊗d state and the sLOCC
/// probability.
///
/// Projecting first and tracing after is equivalent to applying the
/// trace-out rule first: the rule never moves population between the
/// one-particle-per-region block and the doubly-occupied blocks, so the two
/// operations commute.
pub fn pairwise_reduction_indist(
    state: &IndistState,
    region_x: &str,
    i: usize,
    region_y: &str,
    j: usize,
) -> Result<(DensityMatrix, f64)> {
    if i >= state.n() || j >= state.n() {
        return Err(Error::InvalidArgument(format!(
            "DoF indices ({i}, {j}) out of range for n = {}",
            state.n()
        )));
    }
    let (dist, prob) = slocc_project(state, region_x, region_y)?;
    let pair = pairwise_reduction(&dist, i, j)?;
    Ok((pair, prob))
}

// ---------------------------------------------------------------------------
// Deformations
// ---------------------------------------------------------------------------

/// Region-wise unitary action: the indistinguishable-particle analogue of a
/// local unitary. Each region is assigned a d^n-dimensional unitary acting
/// on the DoF tuple of any particle found there.
#[derive(Clone, Debug)]
pub struct Deformation {
    per_region: BTreeMap<usize, CMatrix>,
}

impl Deformation {
    /// Builds a deformation from (region index, unitary) pairs; every
    /// unitary is checked to 1e-10.
    pub fn new(entries: Vec<(usize, CMatrix)>) -> Result<Self> {
        let mut per_region = BTreeMap::new();
        for (region, u) in entries {
            if u.nrows() != u.ncols() {
                return Err(Error::NotSquare {
                    rows: u.nrows(),
                    cols: u.ncols(),
                });
            }
            let gram = u.adjoint() * &u;
            let dev = max_norm_diff(&gram, &CMatrix::identity(u.nrows(), u.ncols()));
            if dev > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "deformation entry for region {region} is not unitary (deviation {dev:.3e})"
                )));
            }
            per_region.insert(region, u);
        }
        Ok(Self { per_region })
    }

    pub fn unitary_for(&self, region: usize) -> Option<&CMatrix> {
        self.per_region.get(&region)
    }
}

/// Applies a deformation to a state. Every region of the state must carry an
/// assigned unitary of dimension d^n.
pub fn apply_deformation(state: &IndistState, def: &Deformation) -> Result<IndistState> {
    let per = state.d().pow(state.n() as u32);
    let mut blocks = Vec::with_capacity(state.regions().len());
    for (idx, name) in state.regions().iter().enumerate() {
        let u = def.unitary_for(idx).ok_or_else(|| {
            Error::InvalidArgument(format!("deformation is missing region \"{name}\""))
        })?;
        if u.nrows() != per {
            return Err(Error::DimensionMismatch(format!(
                "deformation for region \"{name}\" has dimension {}, expected {per}",
                u.nrows()
            )));
        }
        blocks.push(u);
    }
    let m = state.single_particle_dim();
    let mut w = CMatrix::zeros(m, m);
    for (idx, block) in blocks.iter().enumerate() {
        let off = idx * per;
        for r in 0..per {
            for cidx in 0..per {
                w[(off + r, off + cidx)] = block[(r, cidx)];
            }
        }
    }
    let big = kron(&w, &w);
    let v = &big * state.embedded();
    IndistState::from_embedded(&v, state.regions().to_vec(), state.n(), state.d(), state.statistics())
}

// ---------------------------------------------------------------------------
// Symmetrized channel–state construction
// ---------------------------------------------------------------------------

/// Symmetrized Choi-like state of a channel: (I⊗Λ) ℙ + η (Λ⊗I) ℙ,
/// renormalized, where ℙ is the indistinguishable MES projector and the
/// channel acts on the DoF factor of one slot. For fermions with channels
/// close to the identity the two terms cancel and the construction is
/// degenerate.
pub fn indist_choi(channel: &QuantumChannel, statistics: Statistics) -> Result<IndistDensity> {
    let d = channel.dim();
    let mes = indist_mes(d, statistics)?;
    let rho = mes.embedded_density();
    let m = mes.single_particle_dim();
    let eye_m = CMatrix::identity(m, m);
    let eye_regions = CMatrix::identity(2, 2);

    let mut slot2 = CMatrix::zeros(m * m, m * m);
    let mut slot1 = CMatrix::zeros(m * m, m * m);
    for k in channel.kraus() {
        let lifted = kron(&eye_regions, k); // acts on region ⊗ DoF
        let op2 = kron(&eye_m, &lifted);
        let op1 = kron(&lifted, &eye_m);
        slot2 += &op2 * rho.matrix() * op2.adjoint();
        slot1 += &op1 * rho.matrix() * op1.adjoint();
    }
    let combined = slot2 + slot1.scale(statistics.eta());
    let weight = combined.trace().re;
    if weight < 1e-12 {
        return Err(Error::DegenerateState(
            "symmetrized channel state vanishes (exchange terms cancel)".into(),
        ));
    }
    let space = LabelSpace::full(d, 1, mes.regions().to_vec());
    Ok(IndistDensity::from_parts(
        space,
        statistics,
        combined.scale(1.0 / weight),
        weight,
    ))
}

// ---------------------------------------------------------------------------
// JSON state schema ("kind": "indistinguishable", schema version 1)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub(crate) struct IndistTermEntry {
    pub r1: String,
    pub dofs1: Vec<usize>,
    pub r2: String,
    pub dofs2: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct IndistStateFile {
    pub v: u32,
    pub kind: String,
    pub statistics: String,
    pub n: usize,
    pub d: usize,
    pub regions: Vec<String>,
    pub terms: Vec<IndistTermEntry>,
}

/// Parses the JSON schema
/// `{"v":1,"kind":"indistinguishable","statistics":…,"n":…,"d":…,"regions":[…],"terms":[…]}`.
pub fn indist_state_from_json(text: &str) -> Result<IndistState> {
    let file: IndistStateFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))?;
    indist_state_from_file(file)
}

pub(crate) fn indist_state_from_file(file: IndistStateFile) -> Result<IndistState> {
    if file.v != STATE_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported state schema version {} (expected {STATE_SCHEMA_VERSION})",
            file.v
        )));
    }
    if file.kind != "indistinguishable" {
        return Err(Error::Parse(format!(
            "expected kind \"indistinguishable\", got \"{}\"",
            file.kind
        )));
    }
    let statistics = Statistics::parse(&file.statistics)?;
    let lookup = |name: &str| -> Result<usize> {
        file.regions
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::Parse(format!("term references unknown region \"{name}\"")))
    };
    let mut terms = Vec::with_capacity(file.terms.len());
    for t in &file.terms {
        terms.push(IndistTerm::new(
            lookup(&t.r1)?,
            t.dofs1.clone(),
            lookup(&t.r2)?,
            t.dofs2.clone(),
            c(t.re, t.im),
        ));
    }
    IndistState::new(file.regions, file.n, file.d, statistics, terms)
}

/// Serializes a state back to the JSON schema using its canonical terms.
pub fn indist_state_to_json(state: &IndistState) -> Result<String> {
    let file = IndistStateFile {
        v: STATE_SCHEMA_VERSION,
        kind: "indistinguishable".into(),
        statistics: state.statistics().as_str().into(),
        n: state.n(),
        d: state.d(),
        regions: state.regions().to_vec(),
        terms: state
            .terms()
            .iter()
            .map(|t| IndistTermEntry {
                r1: state.regions()[t.region1].clone(),
                dofs1: t.dofs1.clone(),
                r2: state.regions()[t.region2].clone(),
                dofs2: t.dofs2.clone(),
                re: t.amplitude.re,
                im: t.amplitude.im,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(format!("serialize: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, hermitian_eigenvalues, SeededSampler};
    use crate::multidof::standard_mes_vector;
    use approx::assert_abs_diff_eq;

    fn term(r1: usize, d1: &[usize], r2: usize, d2: &[usize], amp: f64) -> IndistTerm {
        IndistTerm::new(r1, d1.to_vec(), r2, d2.to_vec(), cr(amp))
    }

    #[test]
    fn sym_inner_anchor_values() {
        // Distinct regions, orthogonal single-particle states → 1.
        let a = term(0, &[0], 1, &[1], 1.0);
        assert_abs_diff_eq!(
            sym_inner(&a, &a, Statistics::Boson).unwrap().re,
            1.0,
            epsilon = 1e-15
        );
        // Doubly occupied boson term → 2 (two of the four products survive).
        let b = term(0, &[0], 0, &[0], 1.0);
        assert_abs_diff_eq!(
            sym_inner(&b, &b, Statistics::Boson).unwrap().re,
            2.0,
            epsilon = 1e-15
        );
        // Same configuration for fermions → 0 (Pauli exclusion).
        assert_abs_diff_eq!(
            sym_inner(&b, &b, Statistics::Fermion).unwrap().re,
            0.0,
            epsilon = 1e-15
        );
        // Exchange-related kets: ⟨s₁0,s₂1 | s₂1,s₁0⟩ = η.
        let sw = term(1, &[1], 0, &[0], 1.0);
        assert_abs_diff_eq!(
            sym_inner(&a, &sw, Statistics::Fermion).unwrap().re,
            -1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn sym_inner_gram_matrices_are_psd() {
        let terms = vec![
            term(0, &[0], 1, &[0], 1.0),
            term(0, &[0], 1, &[1], 1.0),
            term(0, &[1], 1, &[0], 1.0),
            term(0, &[0], 0, &[1], 1.0),
        ];
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let k = terms.len();
            let gram = CMatrix::from_fn(k, k, |i, j| {
                sym_inner(&terms[i], &terms[j], stats).unwrap()
            });
            let evs = hermitian_eigenvalues(&gram).unwrap();
            assert!(evs.iter().all(|&v| v >= -1e-10), "{stats:?}: {evs:?}");
        }
    }

    #[test]
    fn normalization_uses_symmetrized_norm() {
        // Two distinct-region terms with equal weight: |v|² per term is 2,
        // so amplitudes end up at 1/√2.
        let state = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Boson,
            vec![term(0, &[0], 1, &[0], 3.0), term(0, &[1], 1, &[1], 3.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(state.embedded().norm_squared(), 2.0, epsilon = 1e-12);
        for t in state.terms() {
            assert_abs_diff_eq!(t.amplitude.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        }
        // Doubly occupied boson term alone: sym norm² = 2|κ|², κ = 1/√2.
        let dbl = IndistState::new(
            vec!["s1".into()],
            1,
            2,
            Statistics::Boson,
            vec![term(0, &[0], 0, &[0], 5.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(
            dbl.terms()[0].amplitude.norm(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn fermion_pauli_exclusion_rejected_at_construction() {
        let err = IndistState::new(
            vec!["s1".into()],
            1,
            2,
            Statistics::Fermion,
            vec![term(0, &[0], 0, &[0], 1.0)],
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fermion_swapped_terms_give_same_state() {
        // Swapping both slots and multiplying by η is the identity.
        let base = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Fermion,
            vec![term(0, &[0], 1, &[1], 1.0), term(0, &[1], 1, &[0], -1.0)],
        )
        .unwrap();
        let swapped = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Fermion,
            vec![
                IndistTerm::new(1, vec![1], 0, vec![0], cr(-1.0)),
                IndistTerm::new(1, vec![0], 0, vec![1], cr(1.0)),
            ],
        )
        .unwrap();
        assert!(
            max_norm_diff(
                base.embedded_density().matrix(),
                swapped.embedded_density().matrix()
            ) < 1e-12
        );
    }

    #[test]
    fn fermion_cancelling_terms_are_degenerate() {
        let err = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Fermion,
            vec![term(0, &[0], 1, &[1], 1.0), IndistTerm::new(1, vec![1], 0, vec![0], cr(1.0))],
        );
        assert!(matches!(err, Err(Error::DegenerateState(_))));
    }

    #[test]
    fn indist_mes_slocc_projection_is_standard_mes() {
        for stats in [Statistics::Boson, Statistics::Fermion] {
            for d in [2usize, 3] {
                let mes = indist_mes(d, stats).unwrap();
                let (dist, prob) = slocc_project(&mes, "s1", "s2").unwrap();
                assert_abs_diff_eq!(prob, 1.0, epsilon = 1e-12);
                let phi = standard_mes_vector(d);
                assert_abs_diff_eq!(
                    dist.density().overlap(&phi).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
            }
        }
        // Purity of the embedded projector.
        let mes = indist_mes(2, Statistics::Boson).unwrap();
        assert_abs_diff_eq!(mes.embedded_density().purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn boson_mes_trace_out_gives_maximally_mixed_marginal() {
        for d in [2usize, 3] {
            let mes = indist_mes(d, Statistics::Boson).unwrap();
            let rho = IndistDensity::from_state(&mes);
            let reduced = dof_trace_out_region(&rho, "s1", 0).unwrap();
            // Weight of the rule application on the MES is 1.
            assert_abs_diff_eq!(reduced.weight(), 1.0, epsilon = 1e-12);
            // The remaining particle sits at s2 with its DoF; the bare
            // particle at s1 has an empty tuple.
            let bare = reduced
                .space()
                .find_sector(0, &[])
                .expect("bare sector at s1");
            let full = reduced
                .space()
                .find_sector(1, &[0])
                .expect("full sector at s2");
            let (marg, prob) = reduced.extract_pair_block(bare, full).unwrap();
            assert_abs_diff_eq!(prob, 1.0, epsilon = 1e-12);
            let expected = CMatrix::identity(d, d) * cr(1.0 / d as f64);
            assert!(max_norm_diff(marg.matrix(), &expected) < 1e-12);
        }
    }

    #[test]
    fn product_like_state_trace_out_leaves_other_particle() {
        // |s₁0, s₂1⟩: tracing the DoF at s1 leaves |1⟩⟨1| at s2.
        let state = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Boson,
            vec![term(0, &[0], 1, &[1], 1.0)],
        )
        .unwrap();
        let rho = IndistDensity::from_state(&state);
        let reduced = dof_trace_out_region(&rho, "s1", 0).unwrap();
        let bare = reduced.space().find_sector(0, &[]).unwrap();
        let full = reduced.space().find_sector(1, &[0]).unwrap();
        let (marg, _) = reduced.extract_pair_block(bare, full).unwrap();
        let mut expected = CMatrix::zeros(2, 2);
        expected[(1, 1)] = cr(1.0);
        assert!(max_norm_diff(marg.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn cross_term_free_trace_out_matches_distinguishable_rule() {
        // All-distinct region/DoF labels: the η cross terms vanish, so the
        // rule must agree with the distinguishable partial trace applied to
        // the sLOCC-ordered state.
        let mut s = SeededSampler::new(314);
        for stats in [Statistics::Boson, Statistics::Fermion] {
            for _ in 0..5 {
                // Random two-term n=2, d=2 state with one particle per
                // region.
                let amps: Vec<f64> = (0..2).map(|_| s.uniform() + 0.2).collect();
                let state = IndistState::new(
                    vec!["s1".into(), "s2".into()],
                    2,
                    2,
                    stats,
                    vec![
                        term(0, &[0, 0], 1, &[1, 1], amps[0]),
                        term(0, &[1, 1], 1, &[0, 0], amps[1]),
                    ],
                )
                .unwrap();

                // Indistinguishable path: trace DoF 1 at s1 then DoF 1 at
                // s2, then read off the one-per-region block.
                let rho = IndistDensity::from_state(&state);
                let step1 = dof_trace_out_region(&rho, "s1", 1).unwrap();
                let step2 = dof_trace_out_region(&step1, "s2", 1).unwrap();
                let x = step2.space().find_sector(0, &[0]).unwrap();
                let y = step2.space().find_sector(1, &[0]).unwrap();
                let (indist_red, _) = step2.extract_pair_block(x, y).unwrap();

                // Distinguishable path: sLOCC first, then partial trace.
                let (dist, _) = slocc_project(&state, "s1", "s2").unwrap();
                let dist_red = pairwise_reduction(&dist, 0, 0).unwrap();

                assert!(
                    max_norm_diff(indist_red.matrix(), dist_red.matrix()) < 1e-10,
                    "{stats:?}"
                );
            }
        }
    }

    #[test]
    fn pairwise_reduction_on_doubly_occupied_state_is_degenerate() {
        let state = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Boson,
            vec![term(0, &[0], 0, &[1], 1.0)],
        )
        .unwrap();
        let err = pairwise_reduction_indist(&state, "s1", 0, "s2", 0);
        assert!(matches!(err, Err(Error::DegenerateState(_))));
    }

    #[test]
    fn same_region_repeated_trace_out() {
        // Both particles at s1 with one DoF each: tracing that DoF reduces
        // both slots; the rule reports weight 2 on |s₁0, s₁1⟩.
        let state = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Boson,
            vec![term(0, &[0], 0, &[1], 1.0)],
        )
        .unwrap();
        let rho = IndistDensity::from_state(&state);
        let reduced = dof_trace_out_region(&rho, "s1", 0).unwrap();
        assert_abs_diff_eq!(reduced.weight(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reduced.matrix().trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deformation_preserves_norm_and_missing_region_errors() {
        let mes = indist_mes(2, Statistics::Boson).unwrap();
        let mut s = SeededSampler::new(2718);
        for _ in 0..20 {
            let u1 = haar_unitary(2, &mut s).unwrap();
            let u2 = haar_unitary(2, &mut s).unwrap();
            let def = Deformation::new(vec![(0, u1), (1, u2)]).unwrap();
            let out = apply_deformation(&mes, &def).unwrap();
            assert_abs_diff_eq!(out.embedded().norm_squared(), 2.0, epsilon = 1e-10);
        }
        let def = Deformation::new(vec![(0, CMatrix::identity(2, 2))]).unwrap();
        assert!(matches!(
            apply_deformation(&mes, &def),
            Err(Error::InvalidArgument(_))
        ));
        // Non-unitary entries are rejected.
        assert!(Deformation::new(vec![(0, CMatrix::zeros(2, 2))]).is_err());
    }

    #[test]
    fn mes_projector_invariant_under_conjugate_deformations() {
        // U at s1 and U* at s2 leave the MES projector unchanged.
        let mes = indist_mes(2, Statistics::Boson).unwrap();
        let before = mes.embedded_density();
        let mut s = SeededSampler::new(99);
        for _ in 0..25 {
            let u = haar_unitary(2, &mut s).unwrap();
            let uc = u.map(|z| z.conj());
            let def = Deformation::new(vec![(0, u), (1, uc)]).unwrap();
            let after = apply_deformation(&mes, &def).unwrap().embedded_density();
            assert!(max_norm_diff(before.matrix(), after.matrix()) < 1e-10);
        }
    }

    #[test]
    fn identity_deformation_is_identity() {
        let state = IndistState::new(
            vec!["s1".into(), "s2".into()],
            1,
            2,
            Statistics::Fermion,
            vec![term(0, &[0], 1, &[1], 0.6), term(0, &[1], 1, &[0], 0.8)],
        )
        .unwrap();
        let def = Deformation::new(vec![
            (0, CMatrix::identity(2, 2)),
            (1, CMatrix::identity(2, 2)),
        ])
        .unwrap();
        let out = apply_deformation(&state, &def).unwrap();
        assert!(
            max_norm_diff(
                out.embedded_density().matrix(),
                state.embedded_density().matrix()
            ) < 1e-12
        );
    }

    #[test]
    fn indist_choi_identity_channel() {
        let id = QuantumChannel::identity(2).unwrap();
        // Bosons: the two symmetrized terms coincide, giving back the MES
        // projector.
        let choi = indist_choi(&id, Statistics::Boson).unwrap();
        let mes = indist_mes(2, Statistics::Boson).unwrap();
        assert!(max_norm_diff(choi.matrix(), mes.embedded_density().matrix()) < 1e-12);
        // Fermions: the exchange terms cancel exactly.
        assert!(matches!(
            indist_choi(&id, Statistics::Fermion),
            Err(Error::DegenerateState(_))
        ));
    }

    #[test]
    fn indist_choi_depolarizing_region_marginals() {
        let channel = crate::channels::depolarizing(0.0, 2).unwrap();
        let choi = indist_choi(&channel, Statistics::Boson).unwrap();
        // Tracing the DoF at either region leaves I/d at the other.
        for (traced, kept_region) in [("s1", 1usize), ("s2", 0usize)] {
            let reduced = dof_trace_out_region(&choi, traced, 0).unwrap();
            let bare = reduced
                .space()
                .sectors()
                .iter()
                .position(|s| s.dofs.is_empty())
                .unwrap();
            let full = reduced
                .space()
                .find_sector(kept_region, &[0])
                .unwrap();
            let (marg, _) = reduced.extract_pair_block(bare, full).unwrap();
            let expected = CMatrix::identity(2, 2) * cr(0.5);
            assert!(max_norm_diff(marg.matrix(), &expected) < 1e-10, "{traced}");
        }
    }

    #[test]
    fn json_round_trip() {
        let state = IndistState::new(
            vec!["left".into(), "right".into()],
            2,
            2,
            Statistics::Fermion,
            vec![
                IndistTerm::new(0, vec![0, 1], 1, vec![1, 0], c(0.6, 0.1)),
                IndistTerm::new(0, vec![1, 0], 1, vec![0, 1], c(-0.3, 0.2)),
            ],
        )
        .unwrap();
        let text = indist_state_to_json(&state).unwrap();
        let back = indist_state_from_json(&text).unwrap();
        assert!(
            max_norm_diff(
                back.embedded_density().matrix(),
                state.embedded_density().matrix()
            ) < 1e-12
        );
        assert!(indist_state_from_json("{\"v\":1,\"kind\":\"indistinguishable\",\"statistics\":\"anyon\",\"n\":1,\"d\":2,\"regions\":[\"a\"],\"terms\":[]}").is_err());
    }

    #[test]
    fn single_particle_cap_enforced() {
        let regions: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        // 5 regions × 4^2 = 80 > 64.
        let err = IndistState::new(
            regions,
            2,
            4,
            Statistics::Boson,
            vec![term(0, &[0, 0], 1, &[0, 0], 1.0)],
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
