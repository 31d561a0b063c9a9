//! Dense complex linear algebra, the fidelity functional, and seeded random
//! sampling used by every other module.
//!
//! All matrices are dense [`nalgebra`] matrices over `Complex64`. Density
//! matrices carry a factorization annotation (`dims`) so that partial traces
//! can address individual tensor factors. Randomness flows exclusively
//! through [`SeededSampler`] so that every stochastic result in the library
//! is reproducible bit-for-bit from a 64-bit seed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Default tolerance for unit-trace checks.
pub const TRACE_TOL: f64 = 1e-10;
/// Default lower bound tolerated for eigenvalues of a density matrix.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below this threshold are clamped to zero when taking matrix
/// square roots, so numerical PSD drift never produces NaN.
pub const EIGEN_CLAMP: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Maximum absolute entry of `m - m†`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum absolute entry difference between two matrices.
pub fn max_norm_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A positive-semidefinite, unit-trace complex matrix together with an
/// ordered list of tensor-factor dimensions whose product equals the side
/// length. The factorization drives [`partial_trace`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates all three density-matrix invariants (Hermiticity, unit
    /// trace, positive semidefiniteness) at the default tolerances. The PSD
    /// check runs a full eigendecomposition, so prefer [`Self::from_pure`]
    /// or the library constructors for large matrices.
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        Self::with_tolerances(mat, dims, HERMITICITY_TOL, TRACE_TOL, PSD_TOL)
    }

    /// As [`Self::new`] with caller-chosen tolerances.
    pub fn with_tolerances(
        mat: CMatrix,
        dims: Vec<usize>,
        herm_tol: f64,
        trace_tol: f64,
        psd_tol: f64,
    ) -> Result<Self> {
        let dm = Self::from_trusted_with(mat, dims, herm_tol, trace_tol)?;
        let min_eig = hermitian_eigenvalues(&dm.mat)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -psd_tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min_eig });
        }
        Ok(dm)
    }

    /// Constructor for matrices that are positive semidefinite by
    /// construction (mixtures, conjugations and traces of valid states).
    /// Checks shape, Hermiticity and trace but skips the eigendecomposition.
    pub(crate) fn from_trusted(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        Self::from_trusted_with(mat, dims, HERMITICITY_TOL, TRACE_TOL)
    }

    fn from_trusted_with(
        mat: CMatrix,
        dims: Vec<usize>,
        herm_tol: f64,
        trace_tol: f64,
    ) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        let side: usize = dims.iter().product();
        if dims.is_empty() || side != mat.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "factor dimensions {:?} do not multiply to side length {}",
                dims,
                mat.nrows()
            )));
        }
        let dev = hermiticity_deviation(&mat);
        if dev > herm_tol {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: herm_tol,
            });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvalidTrace {
                trace: tr.re,
                tolerance: trace_tol,
            });
        }
        Ok(Self { mat, dims })
    }

    /// Projector onto a pure state. The vector is normalized first; an
    /// all-zero vector is rejected.
    pub fn from_pure(psi: &CVector, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.is_empty() || side != psi.len() {
            return Err(Error::DimensionMismatch(format!(
                "factor dimensions {:?} do not multiply to vector length {}",
                dims,
                psi.len()
            )));
        }
        let norm = psi.norm();
        if norm < 1e-14 {
            return Err(Error::InvalidArgument(
                "cannot build a state from the zero vector".into(),
            ));
        }
        let unit = psi.map(|z| z / norm);
        let mat = &unit * unit.adjoint();
        Ok(Self { mat, dims })
    }

    /// Maximally mixed state over the given factor dimensions.
    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.is_empty() || side == 0 {
            return Err(Error::InvalidArgument(
                "maximally mixed state needs at least one nonzero factor".into(),
            ));
        }
        let mat = CMatrix::identity(side, side) * cr(1.0 / side as f64);
        Ok(Self { mat, dims })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length (product of all factor dimensions).
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Reinterprets the tensor factorization without touching the matrix.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.is_empty() || side != self.mat.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "factor dimensions {:?} do not multiply to side length {}",
                dims,
                self.mat.nrows()
            )));
        }
        Ok(Self {
            mat: self.mat,
            dims,
        })
    }

    /// Expectation ⟨ψ|ρ|ψ⟩ of the state on a (normalized) vector.
    pub fn overlap(&self, psi: &CVector) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs matrix side {}",
                psi.len(),
                self.dim()
            )));
        }
        Ok(psi.dotc(&(&self.mat * psi)).re)
    }
}

/// Kronecker product of raw matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of density matrices; factor dimensions concatenate.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let mut dims = a.dims().to_vec();
    dims.extend_from_slice(b.dims());
    DensityMatrix {
        mat: a.matrix().kronecker(b.matrix()),
        dims,
    }
}

/// Row-major strides for a factor-dimension list (first factor most
/// significant).
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Partial trace keeping the listed factors (a set of indices into `dims`).
/// Kept factors retain their original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "partial trace must keep at least one factor".into(),
        ));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "keep indices {:?} out of range for {} factors",
            keep,
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    if traced.is_empty() {
        return Ok(rho.clone());
    }

    let st = strides(dims);
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = keep_dims.iter().product();
    let traced_dims: Vec<usize> = traced.iter().map(|&t| dims[t]).collect();
    let traced_total: usize = traced_dims.iter().product();

    // Flat offsets contributed by every kept and traced multi-index.
    let offsets_of = |axes: &[usize], axis_dims: &[usize]| -> Vec<usize> {
        let total: usize = axis_dims.iter().product();
        let mut out = Vec::with_capacity(total);
        for mut flat in 0..total {
            let mut off = 0usize;
            for i in (0..axes.len()).rev() {
                let idx = flat % axis_dims[i];
                flat /= axis_dims[i];
                off += idx * st[axes[i]];
            }
            out.push(off);
        }
        out
    };
    let keep_offsets = offsets_of(&keep, &keep_dims);
    let traced_offsets = offsets_of(&traced, &traced_dims);
    debug_assert_eq!(keep_offsets.len(), out_dim);
    debug_assert_eq!(traced_offsets.len(), traced_total);

    let src = rho.matrix();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for (r, &ro) in keep_offsets.iter().enumerate() {
        for (cidx, &co) in keep_offsets.iter().enumerate() {
            let mut acc = Complex64::default();
            for &to in &traced_offsets {
                acc += src[(ro + to, co + to)];
            }
            out[(r, cidx)] = acc;
        }
    }
    DensityMatrix::from_trusted(out, keep_dims)
}

/// Eigenvalues of a Hermitian matrix (ascending). Validates Hermiticity at a
/// loose tolerance suitable for numerically accumulated matrices.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(m)?.0)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending, matching
/// eigenvectors as columns. This is the library's single spectral primitive;
/// square roots, PSD projections and matrix exponentials all route through
/// it.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    hermitian_eigen_with_tol(m, 1e-8)
}

/// As [`hermitian_eigen`] with a caller-chosen Hermiticity tolerance.
pub fn hermitian_eigen_with_tol(m: &CMatrix, herm_tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let dev = hermiticity_deviation(m);
    if dev > herm_tol {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: herm_tol,
        });
    }
    // Symmetrize away the numerical drift before decomposing.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &srcidx) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(srcidx));
    }
    Ok((values, vectors))
}

/// Square root of a PSD Hermitian matrix. Eigenvalues below [`EIGEN_CLAMP`]
/// are clamped to zero; eigenvalues below `-PSD_TOL` are rejected.
pub fn matrix_sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m)?;
    if let Some(&min) = values
        .iter()
        .min_by(|a, b| a.partial_cmp(b).expect("finite"))
        .as_ref()
    {
        if *min < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: *min });
        }
    }
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| if v < EIGEN_CLAMP { 0.0 } else { v.sqrt() })
        .collect();
    Ok(reconstruct(&roots, &vectors))
}

/// exp(iH) for Hermitian H, via the spectral decomposition.
pub fn matrix_exp_i_hermitian(h: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen_with_tol(h, 1e-7)?;
    let n = values.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let phase = Complex64::new(0.0, lambda).exp();
        let col = vectors.column(k);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += phase * col[r] * col[c].conj();
            }
        }
    }
    Ok(out)
}

fn reconstruct(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = values.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        for r in 0..n {
            for cidx in 0..n {
                out[(r, cidx)] += cr(v) * col[r] * col[cidx].conj();
            }
        }
    }
    out
}

/// Uhlmann fidelity Tr √(√ρ_in ρ_out √ρ_in) ∈ [0, 1]. Symmetric in its
/// arguments and equal to |⟨ψ|φ⟩| on pure inputs.
pub fn uhlmann_fidelity(rho_in: &DensityMatrix, rho_out: &DensityMatrix) -> Result<f64> {
    if rho_in.dim() != rho_out.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity needs equal dimensions, got {} and {}",
            rho_in.dim(),
            rho_out.dim()
        )));
    }
    let sqrt_in = matrix_sqrt_psd(rho_in.matrix())?;
    let inner = &sqrt_in * rho_out.matrix() * &sqrt_in;
    let values = hermitian_eigenvalues(&inner)?;
    // Eigenvalues at the numerical-noise floor would contribute √noise ≈ 1e-8
    // to the sum; suppress them with a cutoff relative to the largest one.
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    let cutoff = max * 1e-13;
    let f: f64 = values
        .iter()
        .filter(|&&v| v > cutoff)
        .map(|&v| v.sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Cyclic shift on C^d: X|j⟩ = |j+1 mod d⟩.
pub fn weyl_x(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |r, c| {
        if r == (c + 1) % d {
            cr(1.0)
        } else {
            Complex64::default()
        }
    })
}

/// Phase clock on C^d: Z|j⟩ = ω^j |j⟩ with ω = exp(2πi/d).
pub fn weyl_z(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::new(0.0, 2.0 * std::f64::consts::PI * r as f64 / d as f64).exp()
        } else {
            Complex64::default()
        }
    })
}

/// Deterministic random source. Identical seeds and draw sequences reproduce
/// identical streams bit-for-bit. A sampler is single-owner; parallel code
/// must [`SeededSampler::split`] children, never share one.
#[derive(Clone, Debug)]
pub struct SeededSampler {
    seed: u64,
    counter: u64,
    rng: ChaCha12Rng,
}

impl SeededSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of primitive draws taken so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.counter += 1;
        self.rng.sample(StandardNormal)
    }

    /// Standard complex Gaussian with E|z|² = 1.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.standard_normal();
        let im: f64 = self.standard_normal();
        Complex64::new(re, im) / 2f64.sqrt()
    }

    /// Uniform index in 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        self.counter += 1;
        self.rng.random_range(0..n)
    }

    /// Fair bit.
    pub fn bit(&mut self) -> u8 {
        self.index(2) as u8
    }

    /// Derives an independent child sampler; deterministic given the parent
    /// stream position.
    pub fn split(&mut self) -> SeededSampler {
        self.counter += 1;
        let child_seed = self.rng.random::<u64>();
        SeededSampler::new(child_seed)
    }
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the
/// R-diagonal phase correction, which makes the distribution exactly Haar.
pub fn haar_unitary(d: usize, sampler: &mut SeededSampler) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "haar_unitary needs dimension >= 2, got {d}"
        )));
    }
    let g = CMatrix::from_fn(d, d, |_, _| sampler.complex_normal());
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for i in 0..d {
        let rii = r[(i, i)];
        let phase = if rii.norm() < 1e-300 {
            cr(1.0)
        } else {
            rii / rii.norm()
        };
        for row in 0..d {
            u[(row, i)] *= phase;
        }
    }
    Ok(u)
}

/// Haar-random pure state on C^d.
pub fn random_pure_state(d: usize, sampler: &mut SeededSampler) -> Result<CVector> {
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    loop {
        let v = CVector::from_fn(d, |_, _| sampler.complex_normal());
        let n = v.norm();
        if n > 1e-9 {
            return Ok(v.map(|z| z / n));
        }
    }
}

/// Random density matrix of the given rank (Haar purification, traced).
pub fn random_density(d: usize, rank: usize, sampler: &mut SeededSampler) -> Result<DensityMatrix> {
    if rank < 1 || rank > d {
        return Err(Error::InvalidArgument(format!(
            "rank must lie in 1..={d}, got {rank}"
        )));
    }
    let g = CMatrix::from_fn(d, rank, |_, _| sampler.complex_normal());
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    if tr < 1e-12 {
        return Err(Error::DegenerateState(
            "random Gram matrix had vanishing trace".into(),
        ));
    }
    DensityMatrix::from_trusted(m.scale(1.0 / tr), vec![d])
}
