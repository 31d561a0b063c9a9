//! Channel calculus: Kraus-form quantum channels, the Choi state↔channel
//! isomorphism, depolarizing channels, Monte Carlo state/channel twirling,
//! and the affine relation between the generalized teleportation fidelity
//! and the generalized singlet fraction.

use crate::error::{Error, Result};
use crate::linalg::{
    c, cr, hermitian_eigen, kron, max_norm_diff, partial_trace, weyl_x, weyl_z, CMatrix,
    DensityMatrix, SeededSampler,
};

/// Trace-preservation tolerance for channel construction.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;

/// How far the kept marginal of a state may deviate from I/d and still be
/// accepted by [`channel_from_state`].
pub const ISOMORPHISM_MARGINAL_TOL: f64 = 1e-8;

/// A completely positive trace-preserving map in Kraus form, with equal
/// input and output dimension.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    kraus: Vec<CMatrix>,
    dim: usize,
}

impl QuantumChannel {
    /// Builds a channel from Kraus operators, verifying Σ K†K = I.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidArgument("channel needs at least one Kraus operator".into()))?;
        if first.nrows() != first.ncols() {
            return Err(Error::NotSquare {
                rows: first.nrows(),
                cols: first.ncols(),
            });
        }
        let dim = first.nrows();
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "channel dimension must be at least 2, got {dim}"
            )));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch(
                    "all Kraus operators must share one square dimension".into(),
                ));
            }
            sum += k.adjoint() * k;
        }
        let dev = max_norm_diff(&sum, &CMatrix::identity(dim, dim));
        if dev > TRACE_PRESERVATION_TOL {
            return Err(Error::ContractViolation {
                what: "channel is not trace-preserving".into(),
                diagnostics: format!("‖ΣK†K − I‖_max = {dev:.3e} > {TRACE_PRESERVATION_TOL:.0e}"),
            });
        }
        Ok(Self { kraus, dim })
    }

    /// The identity channel on a d-dimensional system.
    pub fn identity(d: usize) -> Result<Self> {
        Self::new(vec![CMatrix::identity(d, d)])
    }

    /// A unitary conjugation channel σ ↦ UσU†.
    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Applies the channel to a raw matrix.
    pub fn apply_matrix(&self, sigma: &CMatrix) -> Result<CMatrix> {
        if sigma.nrows() != self.dim || sigma.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "input is {}×{}, channel acts on {}×{}",
                sigma.nrows(),
                sigma.ncols(),
                self.dim,
                self.dim
            )));
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k * sigma * k.adjoint();
        }
        Ok(out)
    }

    /// Applies the channel to a density matrix (output is PSD with unit
    /// trace by complete positivity and trace preservation).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_matrix(rho.matrix())?;
        DensityMatrix::from_trusted(out, rho.dims().to_vec())
    }
}

/// Choi state (I⊗Λ)|Φ⁺⟩⟨Φ⁺| of a channel, as a d⊗d density matrix. Its
/// kept (first-slot) marginal is I/d for any trace-preserving Λ.
pub fn choi_state(channel: &QuantumChannel) -> Result<DensityMatrix> {
    let d = channel.dim();
    let eye = CMatrix::identity(d, d);
    let phi = crate::multidof::standard_mes(d)?;
    let mut out = CMatrix::zeros(d * d, d * d);
    for k in channel.kraus() {
        let op = kron(&eye, k);
        out += &op * phi.matrix() * op.adjoint();
    }
    DensityMatrix::from_trusted(out, vec![d, d])
}

/// Inverse of [`choi_state`] on the isomorphism domain: states whose kept
/// marginal is I/d. Kraus operators come from the spectral decomposition,
/// V_r[b, a] = √(d·λ_r)·χ_r[(a, b)], followed by an exact
/// trace-preservation polish (the spectral data inherits the marginal's
/// numerical error).
pub fn channel_from_state(rho: &DensityMatrix) -> Result<QuantumChannel> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::DimensionMismatch(format!(
            "Choi state must be bipartite d⊗d, got dims {dims:?}"
        )));
    }
    let d = dims[0];
    let kept = partial_trace(rho, &[0])?;
    let target = CMatrix::identity(d, d) * cr(1.0 / d as f64);
    let marginal_dev = max_norm_diff(kept.matrix(), &target);
    if marginal_dev > ISOMORPHISM_MARGINAL_TOL {
        return Err(Error::Domain(format!(
            "kept marginal deviates from I/d by {marginal_dev:.3e}; \
             the state is outside the channel-isomorphism domain"
        )));
    }

    let (evals, evecs) = hermitian_eigen(rho.matrix())?;
    let mut kraus = Vec::new();
    for (r, &lambda) in evals.iter().enumerate() {
        if lambda <= 1e-12 {
            continue;
        }
        let scale = (d as f64 * lambda).sqrt();
        let mut k = CMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                k[(b, a)] = evecs[(a * d + b, r)] * cr(scale);
            }
        }
        kraus.push(k);
    }
    if kraus.is_empty() {
        return Err(Error::DegenerateState(
            "state has no spectral weight above tolerance".into(),
        ));
    }

    // Polish Σ K†K back to exactly I: S is within d·(marginal tolerance) of
    // the identity, so S^{-1/2} is well-conditioned.
    let mut s = CMatrix::zeros(d, d);
    for k in &kraus {
        s += k.adjoint() * k;
    }
    let (s_evals, s_evecs) = hermitian_eigen(&s)?;
    if s_evals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "Kraus normalizer is singular; state marginal is defective".into(),
        ));
    }
    let inv_sqrt_diag = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            cr(1.0 / s_evals[i].sqrt())
        } else {
            c(0.0, 0.0)
        }
    });
    let s_inv_sqrt = &s_evecs * inv_sqrt_diag * s_evecs.adjoint();
    for k in &mut kraus {
        *k = &*k * &s_inv_sqrt;
    }
    QuantumChannel::new(kraus)
}

/// Depolarizing channel σ ↦ p·σ + (1−p)·I/d, realized as a Weyl-operator
/// Kraus mixture.
pub fn depolarizing(p: f64, d: usize) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "depolarizing strength must lie in [0, 1], got {p}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "depolarizing channel needs d >= 2, got {d}"
        )));
    }
    let dd = (d * d) as f64;
    let uniform = (1.0 - p) / dd;
    let x = weyl_x(d);
    let z = weyl_z(d);
    let mut kraus = Vec::with_capacity(d * d);
    for a in 0..d {
        let xa = (0..a).fold(CMatrix::identity(d, d), |acc, _| acc * &x);
        for b in 0..d {
            let w = (0..b).fold(xa.clone(), |acc, _| acc * &z);
            let weight = if a == 0 && b == 0 { p + uniform } else { uniform };
            if weight <= 0.0 {
                continue;
            }
            kraus.push(w * cr(weight.sqrt()));
        }
    }
    QuantumChannel::new(kraus)
}

/// Monte Carlo twirl: averages (U⊗U*)ρ(U⊗U*)† over `samples` Haar
/// unitaries. Converges to the isotropic state with the same Φ⁺ overlap.
pub fn twirl_state(
    rho: &DensityMatrix,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::DimensionMismatch(format!(
            "twirl needs a bipartite d⊗d state, got dims {dims:?}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("twirl needs at least one sample".into()));
    }
    let d = dims[0];
    let mut acc = CMatrix::zeros(d * d, d * d);
    for _ in 0..samples {
        let u = crate::linalg::haar_unitary(d, sampler)?;
        let uc = u.map(|z| z.conj());
        let op = kron(&u, &uc);
        acc += &op * rho.matrix() * op.adjoint();
    }
    DensityMatrix::from_trusted(acc.scale(1.0 / samples as f64), dims.to_vec())
}

/// Monte Carlo channel twirl: averages U† ∘ Λ ∘ U over Haar U. Acting on
/// the Choi state this is exactly a state twirl, so the result converges to
/// a depolarizing channel with the same average fidelity. Each sampled
/// (U⊗U*) conjugation preserves the kept marginal exactly, so the result
/// stays on the isomorphism domain.
pub fn twirl_channel(
    channel: &QuantumChannel,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<QuantumChannel> {
    let choi = choi_state(channel)?;
    let twirled = twirl_state(&choi, samples, sampler)?;
    channel_from_state(&twirled)
}

// ---------------------------------------------------------------------------
// The fidelity–singlet-fraction relation
// ---------------------------------------------------------------------------

/// Parameters of the affine fidelity relation: DoF count, local dimension,
/// and the attainable maxima of the two quantities.
#[derive(Clone, Copy, Debug)]
pub struct RelationParams {
    n: usize,
    d: usize,
    f_max: f64,
    big_f_max: f64,
}

impl RelationParams {
    pub fn new(n: usize, d: usize, f_max: f64, big_f_max: f64) -> Result<Self> {
        if n < 1 || d < 2 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 1 and d >= 2, got n={n}, d={d}"
            )));
        }
        let inv_d = 1.0 / d as f64;
        if !(inv_d..=1.0).contains(&f_max) {
            return Err(Error::InvalidArgument(format!(
                "f_max must lie in [1/d, 1] = [{inv_d}, 1], got {f_max}"
            )));
        }
        let floor = n as f64 / (d * d) as f64;
        if big_f_max <= floor || big_f_max > n as f64 {
            return Err(Error::InvalidArgument(format!(
                "F_max must lie in (n/d², n] = ({floor}, {n}], got {big_f_max}"
            )));
        }
        Ok(Self {
            n,
            d,
            f_max,
            big_f_max,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn big_f_max(&self) -> f64 {
        self.big_f_max
    }

    /// The uniform-noise floor n/d² of the generalized singlet fraction.
    pub fn gsf_floor(&self) -> f64 {
        self.n as f64 / (self.d * self.d) as f64
    }
}

/// The affine relation mapping a generalized singlet fraction to the
/// generalized teleportation fidelity:
/// f_g = (F_g − n/d²)(f_max − 1/d)/(F_max − n/d²) + 1/d.
pub fn relation_fg(big_f_g: f64, params: &RelationParams) -> Result<f64> {
    let floor = params.gsf_floor();
    if big_f_g < floor - 1e-12 || big_f_g > params.big_f_max() + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "F_g = {big_f_g} outside [n/d², F_max] = [{floor}, {}]",
            params.big_f_max()
        )));
    }
    let inv_d = 1.0 / params.d() as f64;
    Ok((big_f_g - floor) * (params.f_max() - inv_d) / (params.big_f_max() - floor) + inv_d)
}

/// Both fidelities of the noisy-singlet family at noise parameter p:
/// f_g = p·f_max + (1−p)/d and F_g = p·F_max + (1−p)·n/d². The pair
/// satisfies [`relation_fg`] identically.
pub fn relation_lemmas(p: f64, params: &RelationParams) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "noise parameter must lie in [0, 1], got {p}"
        )));
    }
    let inv_d = 1.0 / params.d() as f64;
    let f_g = p * params.f_max() + (1.0 - p) * inv_d;
    let big_f_g = p * params.big_f_max() + (1.0 - p) * params.gsf_floor();
    Ok((f_g, big_f_g))
}

/// A seeded random channel: Ginibre-distributed Kraus candidates polished
/// to exact trace preservation. `env_dim` controls the Kraus rank.
pub fn random_channel(d: usize, env_dim: usize, sampler: &mut SeededSampler) -> Result<QuantumChannel> {
    if d < 2 || env_dim < 1 {
        return Err(Error::InvalidArgument(format!(
            "random channel needs d >= 2 and env_dim >= 1, got d={d}, env_dim={env_dim}"
        )));
    }
    let raw: Vec<CMatrix> = (0..env_dim)
        .map(|_| CMatrix::from_fn(d, d, |_, _| sampler.complex_normal()))
        .collect();
    let mut s = CMatrix::zeros(d, d);
    for g in &raw {
        s += g.adjoint() * g;
    }
    let (evals, evecs) = hermitian_eigen(&s)?;
    if evals.iter().any(|&v| v <= 1e-12) {
        return Err(Error::DegenerateState(
            "Ginibre normalizer is singular".into(),
        ));
    }
    let inv_sqrt = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            cr(1.0 / evals[i].sqrt())
        } else {
            c(0.0, 0.0)
        }
    });
    let s_inv_sqrt = &evecs * inv_sqrt * evecs.adjoint();
    let kraus = raw.into_iter().map(|g| g * &s_inv_sqrt).collect();
    QuantumChannel::new(kraus)
}
