//! Distinguishable two-particle states with multiple degrees of freedom:
//! construction from amplitude lists, DoF trace-out, pairwise reductions,
//! and the reference state families (standard maximally entangled state,
//! matched-Bell product, noisy singlet).
//!
//! Tensor factors are ordered (A₁…A_n, B₁…B_n): all of particle A's DoFs
//! first, then all of particle B's. Pair indices are 0-based in code and
//! 1-based in emitted reports.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, partial_trace, CMatrix, CVector, DensityMatrix};

/// Hard cap on the total Hilbert-space dimension d^(2n) of a two-particle
/// layout; dense algebra beyond this is out of scope.
pub const DIMENSION_CAP: usize = 4096;

/// Which particle a DoF belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Particle {
    A,
    B,
}

/// Two particles, `n` degrees of freedom each, every DoF `d`-dimensional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    n: usize,
    d: usize,
}

impl DofLayout {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument(
                "a layout needs at least one DoF per particle".into(),
            ));
        }
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "DoF dimension must be at least 2, got {d}"
            )));
        }
        let total = d
            .checked_pow(2 * n as u32)
            .ok_or_else(|| Error::InvalidArgument("layout dimension overflows".into()))?;
        if total > DIMENSION_CAP {
            return Err(Error::InvalidArgument(format!(
                "total dimension d^(2n) = {total} exceeds the cap {DIMENSION_CAP}"
            )));
        }
        Ok(Self { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// d^(2n), the full two-particle dimension.
    pub fn total_dim(&self) -> usize {
        self.d.pow(2 * self.n as u32)
    }
}

/// A two-particle state over a DoF layout. Trace-outs can leave the two
/// sides with different DoF counts, so the counts are tracked per particle;
/// freshly built states have `dofs_a == dofs_b == n`.
#[derive(Clone, Debug)]
pub struct DistState {
    d: usize,
    dofs_a: usize,
    dofs_b: usize,
    rho: DensityMatrix,
}

impl DistState {
    /// Wraps an existing density matrix; `rho.dims()` must equal
    /// `[d; dofs_a + dofs_b]`.
    pub fn from_density(rho: DensityMatrix, d: usize, dofs_a: usize, dofs_b: usize) -> Result<Self> {
        let expected = vec![d; dofs_a + dofs_b];
        if rho.dims() != expected.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "density dims {:?} do not match layout dims {:?}",
                rho.dims(),
                expected
            )));
        }
        Ok(Self {
            d,
            dofs_a,
            dofs_b,
            rho,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dofs_a(&self) -> usize {
        self.dofs_a
    }

    pub fn dofs_b(&self) -> usize {
        self.dofs_b
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn into_density(self) -> DensityMatrix {
        self.rho
    }
}

/// Mixing weight and maximally-entangled backbone of a noisy singlet.
#[derive(Clone, Debug)]
pub struct WernerParams {
    p: f64,
    mes_structure: DensityMatrix,
}

impl WernerParams {
    pub fn new(p: f64, mes_structure: DensityMatrix) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "mixing weight must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self { p, mes_structure })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mes_structure(&self) -> &DensityMatrix {
        &self.mes_structure
    }
}

fn check_labels(layout: &DofLayout, labels: &[usize]) -> Result<()> {
    if labels.len() != 2 * layout.n() {
        return Err(Error::InvalidArgument(format!(
            "label tuple must have 2n = {} entries, got {}",
            2 * layout.n(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= layout.d()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for dimension {}",
            layout.d()
        )));
    }
    Ok(())
}

fn flat_index(d: usize, labels: &[usize]) -> usize {
    labels.iter().fold(0, |acc, &l| acc * d + l)
}

/// Builds a pure state from a list of (label-tuple, amplitude) entries.
/// Label tuples are (a₁…a_n, b₁…b_n); the amplitude vector is normalized.
pub fn build_dist_state(
    layout: &DofLayout,
    amplitudes: &[(Vec<usize>, Complex64)],
) -> Result<DistState> {
    let mut v = CVector::zeros(layout.total_dim());
    for (labels, amp) in amplitudes {
        check_labels(layout, labels)?;
        v[flat_index(layout.d(), labels)] += *amp;
    }
    if v.norm() < 1e-14 {
        return Err(Error::InvalidArgument(
            "amplitude list sums to the zero vector".into(),
        ));
    }
    let rho = DensityMatrix::from_pure(&v, vec![layout.d(); 2 * layout.n()])?;
    DistState::from_density(rho, layout.d(), layout.n(), layout.n())
}

/// Traces out one DoF of one particle. Remaining DoFs of that particle are
/// renumbered to close the gap (indices always refer to the current state).
pub fn dof_trace_out(state: &DistState, particle: Particle, dof: usize) -> Result<DistState> {
    let (count, offset) = match particle {
        Particle::A => (state.dofs_a(), 0),
        Particle::B => (state.dofs_b(), state.dofs_a()),
    };
    if dof >= count {
        return Err(Error::InvalidArgument(format!(
            "DoF index {dof} out of range: particle has {count} DoFs"
        )));
    }
    let total = state.dofs_a() + state.dofs_b();
    if total == 1 {
        return Err(Error::InvalidArgument(
            "cannot trace out the last remaining DoF".into(),
        ));
    }
    let drop = offset + dof;
    let keep: Vec<usize> = (0..total).filter(|&k| k != drop).collect();
    let rho = partial_trace(state.density(), &keep)?;
    let (na, nb) = match particle {
        Particle::A => (state.dofs_a() - 1, state.dofs_b()),
        Particle::B => (state.dofs_a(), state.dofs_b() - 1),
    };
    DistState::from_density(rho, state.d(), na, nb)
}

/// Keeps DoF `i` of particle A and DoF `j` of particle B, tracing out
/// everything else. The result is the d⊗d pair state ρ_{a_i b_j}.
pub fn pairwise_reduction(state: &DistState, i: usize, j: usize) -> Result<DensityMatrix> {
    if i >= state.dofs_a() || j >= state.dofs_b() {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) out of range for a {}x{} DoF layout",
            state.dofs_a(),
            state.dofs_b()
        )));
    }
    partial_trace(state.density(), &[i, state.dofs_a() + j])
}

/// The canonical maximally entangled ket (1/√d) Σ_a |aa⟩.
pub fn standard_mes_vector(d: usize) -> CVector {
    let mut v = CVector::zeros(d * d);
    let w = cr(1.0 / (d as f64).sqrt());
    for a in 0..d {
        v[a * d + a] = w;
    }
    v
}

/// Projector onto the canonical maximally entangled state, dims [d, d].
pub fn standard_mes(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximally entangled state needs d >= 2, got {d}"
        )));
    }
    DensityMatrix::from_pure(&standard_mes_vector(d), vec![d, d])
}

/// Matched-DoF Bell product: Φ⁺ on every pair (A_k, B_k). Its pairwise
/// reduction (k, k) is maximally entangled for every k, which makes it the
/// canonical monogamy-respecting maximally-entangled structure.
pub fn mes_structure_state(layout: &DofLayout) -> Result<DistState> {
    let d = layout.d();
    let n = layout.n();
    let side = d.pow(n as u32);
    let mut v = CVector::zeros(layout.total_dim());
    let w = cr(1.0 / (side as f64).sqrt());
    for a in 0..side {
        v[a * side + a] = w;
    }
    let rho = DensityMatrix::from_pure(&v, vec![d; 2 * n])?;
    DistState::from_density(rho, d, n, n)
}

/// p · ℙ + (1−p) · I/d^(2n), mixing the backbone ℙ with white noise.
pub fn noisy_singlet(params: &WernerParams, layout: &DofLayout) -> Result<DistState> {
    let total = layout.total_dim();
    let backbone = params.mes_structure();
    if backbone.dim() != total {
        return Err(Error::DimensionMismatch(format!(
            "backbone dimension {} does not match layout dimension {}",
            backbone.dim(),
            total
        )));
    }
    let p = params.p();
    let mixed = CMatrix::identity(total, total) * cr((1.0 - p) / total as f64);
    let mat = backbone.matrix() * cr(p) + mixed;
    let rho = DensityMatrix::from_trusted(mat, vec![layout.d(); 2 * layout.n()])?;
    DistState::from_density(rho, layout.d(), layout.n(), layout.n())
}

// ---------------------------------------------------------------------------
// JSON state schema ("kind": "distinguishable", schema version 1)
// ---------------------------------------------------------------------------

pub const STATE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub(crate) struct AmplitudeEntry {
    pub labels: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DistStateFile {
    pub v: u32,
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub amplitudes: Vec<AmplitudeEntry>,
}

/// Parses the JSON schema
/// `{"v":1,"kind":"distinguishable","n":…,"d":…,"amplitudes":[…]}`.
pub fn dist_state_from_json(text: &str) -> Result<DistState> {
    let file: DistStateFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))?;
    dist_state_from_file(file)
}

pub(crate) fn dist_state_from_file(file: DistStateFile) -> Result<DistState> {
    if file.v != STATE_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported state schema version {} (expected {STATE_SCHEMA_VERSION})",
            file.v
        )));
    }
    if file.kind != "distinguishable" {
        return Err(Error::Parse(format!(
            "expected kind \"distinguishable\", got \"{}\"",
            file.kind
        )));
    }
    let layout = DofLayout::new(file.n, file.d)?;
    let amplitudes: Vec<(Vec<usize>, Complex64)> = file
        .amplitudes
        .into_iter()
        .map(|e| (e.labels, Complex64::new(e.re, e.im)))
        .collect();
    build_dist_state(&layout, &amplitudes)
}

/// Serializes a pure, side-symmetric state back to the JSON schema. The
/// global phase is fixed by making the first nonzero amplitude real and
/// positive, so output is deterministic.
pub fn dist_state_to_json(state: &DistState) -> Result<String> {
    if state.dofs_a() != state.dofs_b() {
        return Err(Error::InvalidArgument(
            "only states with equal DoF counts on both sides can be serialized".into(),
        ));
    }
    let purity = state.density().purity();
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "only pure states can be serialized as amplitude lists (purity {purity})"
        )));
    }
    let (values, vectors) = crate::linalg::hermitian_eigen(state.density().matrix())?;
    let top = values.len() - 1;
    let mut psi: CVector = vectors.column(top).into();
    let pivot = psi
        .iter()
        .find(|z| z.norm() > 1e-12)
        .copied()
        .unwrap_or(cr(1.0));
    let phase = pivot / pivot.norm();
    psi = psi.map(|z| z / phase);

    let d = state.d();
    let n = state.dofs_a();
    let mut amplitudes = Vec::new();
    for (flat, z) in psi.iter().enumerate() {
        if z.norm() <= 1e-12 {
            continue;
        }
        let mut labels = vec![0usize; 2 * n];
        let mut rem = flat;
        for slot in (0..2 * n).rev() {
            labels[slot] = rem % d;
            rem /= d;
        }
        amplitudes.push(AmplitudeEntry {
            labels,
            re: z.re,
            im: z.im,
        });
    }
    let file = DistStateFile {
        v: STATE_SCHEMA_VERSION,
        kind: "distinguishable".into(),
        n,
        d,
        amplitudes,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(format!("serialize: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_norm_diff, random_pure_state, SeededSampler};
    use approx::assert_abs_diff_eq;

    fn bell_layout() -> DofLayout {
        DofLayout::new(1, 2).unwrap()
    }

    fn random_dist_state(layout: &DofLayout, sampler: &mut SeededSampler) -> DistState {
        let v = random_pure_state(layout.total_dim(), sampler).unwrap();
        let rho = DensityMatrix::from_pure(&v, vec![layout.d(); 2 * layout.n()]).unwrap();
        DistState::from_density(rho, layout.d(), layout.n(), layout.n()).unwrap()
    }

    #[test]
    fn bell_construction_matches_standard_mes() {
        let amps = vec![
            (vec![0, 0], cr(1.0 / 2f64.sqrt())),
            (vec![1, 1], cr(1.0 / 2f64.sqrt())),
        ];
        let state = build_dist_state(&bell_layout(), &amps).unwrap();
        let mes = standard_mes(2).unwrap();
        assert!(max_norm_diff(state.density().matrix(), mes.matrix()) < 1e-14);

        // Scale invariance: unnormalized input yields the same state.
        let unnormalized = vec![(vec![0, 0], cr(1.0)), (vec![1, 1], cr(1.0))];
        let state2 = build_dist_state(&bell_layout(), &unnormalized).unwrap();
        assert!(max_norm_diff(state2.density().matrix(), mes.matrix()) < 1e-14);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(build_dist_state(&bell_layout(), &[(vec![0, 2], cr(1.0))]).is_err());
        assert!(build_dist_state(&bell_layout(), &[(vec![0], cr(1.0))]).is_err());
        assert!(build_dist_state(&bell_layout(), &[(vec![0, 0], cr(0.0))]).is_err());
        // Cancelling amplitudes also leave the zero vector.
        let cancel = vec![(vec![0, 0], cr(1.0)), (vec![0, 0], cr(-1.0))];
        assert!(build_dist_state(&bell_layout(), &cancel).is_err());
    }

    #[test]
    fn layout_enforces_dimension_cap() {
        assert!(DofLayout::new(6, 2).is_ok()); // 2^12 = 4096
        assert!(DofLayout::new(7, 2).is_err());
        assert!(DofLayout::new(2, 8).is_ok()); // 8^4 = 4096
        assert!(DofLayout::new(2, 9).is_err());
        assert!(DofLayout::new(0, 2).is_err());
        assert!(DofLayout::new(1, 1).is_err());
    }

    #[test]
    fn mes_structure_state_reductions() {
        let layout = DofLayout::new(2, 2).unwrap();
        let state = mes_structure_state(&layout).unwrap();
        let mes = standard_mes(2).unwrap();

        let matched = pairwise_reduction(&state, 0, 0).unwrap();
        assert!(max_norm_diff(matched.matrix(), mes.matrix()) < 1e-12);
        let matched2 = pairwise_reduction(&state, 1, 1).unwrap();
        assert!(max_norm_diff(matched2.matrix(), mes.matrix()) < 1e-12);

        // Cross pair is exactly the product of maximally mixed states.
        let cross = pairwise_reduction(&state, 0, 1).unwrap();
        let quarter = CMatrix::identity(4, 4) * cr(0.25);
        assert!(max_norm_diff(cross.matrix(), &quarter) < 1e-12);

        // Every single-DoF marginal is I/d.
        for k in 0..4 {
            let marg = partial_trace(state.density(), &[k]).unwrap();
            assert!(max_norm_diff(marg.matrix(), &(CMatrix::identity(2, 2) * cr(0.5))) < 1e-12);
        }
    }

    #[test]
    fn standard_mes_properties() {
        let mes = standard_mes(3).unwrap();
        assert_abs_diff_eq!(mes.purity(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mes.overlap(&standard_mes_vector(3)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let marg = partial_trace(&mes, &[1]).unwrap();
        assert!(max_norm_diff(marg.matrix(), &(CMatrix::identity(3, 3) * cr(1.0 / 3.0))) < 1e-12);
        assert!(standard_mes(1).is_err());
    }

    #[test]
    fn noisy_singlet_endpoints_and_overlap() {
        let layout = bell_layout();
        let mes = standard_mes(2).unwrap();
        let phi = standard_mes_vector(2);

        let pure = noisy_singlet(&WernerParams::new(1.0, mes.clone()).unwrap(), &layout).unwrap();
        assert!(max_norm_diff(pure.density().matrix(), mes.matrix()) < 1e-14);

        let noise = noisy_singlet(&WernerParams::new(0.0, mes.clone()).unwrap(), &layout).unwrap();
        assert!(
            max_norm_diff(noise.density().matrix(), &(CMatrix::identity(4, 4) * cr(0.25))) < 1e-14
        );
        let red = pairwise_reduction(&noise, 0, 0).unwrap();
        assert!(max_norm_diff(red.matrix(), &(CMatrix::identity(4, 4) * cr(0.25))) < 1e-14);

        // Linearity of the MES overlap: p + (1-p)/d².
        let half = noisy_singlet(&WernerParams::new(0.5, mes.clone()).unwrap(), &layout).unwrap();
        assert_abs_diff_eq!(
            half.density().overlap(&phi).unwrap(),
            0.625,
            epsilon = 1e-12
        );

        let wrong = standard_mes(3).unwrap();
        assert!(noisy_singlet(&WernerParams::new(0.5, wrong).unwrap(), &layout).is_err());
        assert!(WernerParams::new(1.5, mes).is_err());
    }

    #[test]
    fn trace_out_on_product_state_preserves_other_marginal() {
        let layout = DofLayout::new(2, 2).unwrap();
        // |Φ⁺⟩ across matched DoFs: a product over DoF pairs.
        let state = mes_structure_state(&layout).unwrap();
        let before = partial_trace(state.density(), &[2, 3]).unwrap();
        let after_state = dof_trace_out(&state, Particle::A, 1).unwrap();
        assert_eq!(after_state.dofs_a(), 1);
        assert_eq!(after_state.dofs_b(), 2);
        let after = partial_trace(after_state.density(), &[1, 2]).unwrap();
        assert!(max_norm_diff(before.matrix(), after.matrix()) < 1e-12);
    }

    #[test]
    fn repeated_dof_trace_equals_particle_trace() {
        let layout = DofLayout::new(2, 2).unwrap();
        let mut s = SeededSampler::new(17);
        for _ in 0..10 {
            let state = random_dist_state(&layout, &mut s);
            // Trace out all of particle A one DoF at a time.
            let step1 = dof_trace_out(&state, Particle::A, 0).unwrap();
            let step2 = dof_trace_out(&step1, Particle::A, 0).unwrap();
            let direct = partial_trace(state.density(), &[2, 3]).unwrap();
            assert!(max_norm_diff(step2.density().matrix(), direct.matrix()) < 1e-12);
        }
    }

    #[test]
    fn dof_trace_out_commutes_across_distinct_dofs() {
        let layout = DofLayout::new(2, 2).unwrap();
        let mut s = SeededSampler::new(23);
        for _ in 0..10 {
            let state = random_dist_state(&layout, &mut s);
            // A₀ then B₁ vs B₁ then A₀ (indices shift after each removal).
            let ab = dof_trace_out(&dof_trace_out(&state, Particle::A, 0).unwrap(), Particle::B, 1)
                .unwrap();
            let ba = dof_trace_out(&dof_trace_out(&state, Particle::B, 1).unwrap(), Particle::A, 0)
                .unwrap();
            assert!(max_norm_diff(ab.density().matrix(), ba.density().matrix()) < 1e-12);
        }
    }

    #[test]
    fn pairwise_reduction_preserves_trace() {
        let layout = DofLayout::new(2, 2).unwrap();
        let mut s = SeededSampler::new(29);
        for _ in 0..10 {
            let state = random_dist_state(&layout, &mut s);
            for i in 0..2 {
                for j in 0..2 {
                    let red = pairwise_reduction(&state, i, j).unwrap();
                    assert_abs_diff_eq!(red.trace(), 1.0, epsilon = 1e-12);
                    assert_eq!(red.dims(), &[2, 2]);
                }
            }
        }
        assert!(pairwise_reduction(&mes_structure_state(&layout).unwrap(), 2, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let layout = DofLayout::new(2, 2).unwrap();
        let theta = std::f64::consts::PI / 5.0;
        let amps = vec![
            (vec![0, 0, 1, 1], cr(theta.cos())),
            (vec![1, 1, 0, 0], Complex64::new(0.2, 0.3)),
        ];
        let state = build_dist_state(&layout, &amps).unwrap();
        let text = dist_state_to_json(&state).unwrap();
        let back = dist_state_from_json(&text).unwrap();
        assert!(max_norm_diff(back.density().matrix(), state.density().matrix()) < 1e-12);

        assert!(dist_state_from_json("{\"v\":2,\"kind\":\"distinguishable\",\"n\":1,\"d\":2,\"amplitudes\":[]}").is_err());
        assert!(dist_state_from_json("{\"v\":1,\"kind\":\"bogus\",\"n\":1,\"d\":2,\"amplitudes\":[]}").is_err());
    }
}
