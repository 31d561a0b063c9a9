//! Fully entangled fraction (singlet fraction) optimization over the
//! maximally entangled manifold, the generalized singlet fraction over DoF
//! pairs, and monogamy bounds.
//!
//! The FEF of a d⊗d state is max over |ψ⟩ = (I⊗U)|Φ⁺⟩ of ⟨ψ|ρ|ψ⟩. Since
//! (U₁⊗U₂)|Φ⁺⟩ = (I⊗U₂U₁ᵀ)|Φ⁺⟩, a single-unitary search is complete. The
//! optimizer ascends the unitary manifold through U ← exp(iH)U with H
//! Hermitian (d² real parameters), finite-difference gradients, and a
//! backtracking line search, restarted from Haar-random points plus the
//! identity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::indist::{pairwise_reduction_indist, IndistState};
use crate::linalg::{
    c, cr, haar_unitary, matrix_exp_i_hermitian, CMatrix, CVector, DensityMatrix, SeededSampler,
};
use crate::multidof::{pairwise_reduction, DistState};

/// Finite-difference step for manifold gradients.
const GRADIENT_STEP: f64 = 1e-5;
/// Ascent stops once a step improves the objective by less than this.
const CONVERGENCE_GAIN: f64 = 1e-10;
/// Hard iteration cap per restart.
const MAX_ITERS: usize = 2000;

/// Options for the FEF optimizer.
#[derive(Clone, Copy, Debug)]
pub struct FefOptions {
    /// Number of Haar-random starts (the identity start is always added).
    pub restarts: usize,
    /// Seed for the restart sampler.
    pub seed: u64,
}

impl Default for FefOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 7,
        }
    }
}

/// Result of an FEF optimization.
#[derive(Clone, Debug)]
pub struct FefResult {
    pub value: f64,
    pub optimal_unitary: CMatrix,
    pub restarts_used: usize,
    pub converged: bool,
}

/// |Φ_U⟩ = (I⊗U)|Φ⁺⟩ as a d²-vector: entry (a·d + b) = U[b, a]/√d.
pub fn mes_from_unitary(u: &CMatrix) -> CVector {
    let d = u.nrows();
    let scale = cr(1.0 / (d as f64).sqrt());
    CVector::from_fn(d * d, |k, _| u[(k % d, k / d)] * scale)
}

fn objective(rho: &CMatrix, u: &CMatrix) -> f64 {
    let v = mes_from_unitary(u);
    (v.dotc(&(rho * &v))).re
}

/// Hermitian operator basis: d diagonal units, then the symmetric and
/// antisymmetric off-diagonal combinations (d² elements total).
fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(i, i)] = cr(1.0);
        basis.push(m);
    }
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(i, j)] = cr(inv_sqrt2);
            sym[(j, i)] = cr(inv_sqrt2);
            basis.push(sym);
            let mut asym = CMatrix::zeros(d, d);
            asym[(i, j)] = c(0.0, inv_sqrt2);
            asym[(j, i)] = c(0.0, -inv_sqrt2);
            basis.push(asym);
        }
    }
    basis
}

/// One gradient-ascent run from a given start; returns (value, unitary,
/// converged).
fn ascend(rho: &CMatrix, start: CMatrix, basis: &[CMatrix]) -> Result<(f64, CMatrix, bool)> {
    let mut u = start;
    let mut value = objective(rho, &u);
    for _ in 0..MAX_ITERS {
        // Central finite-difference gradient at the current point.
        let mut grad = vec![0.0f64; basis.len()];
        let mut grad_norm_sq = 0.0;
        for (k, b) in basis.iter().enumerate() {
            let plus = matrix_exp_i_hermitian(&(b * cr(GRADIENT_STEP)))? * &u;
            let minus = matrix_exp_i_hermitian(&(b * cr(-GRADIENT_STEP)))? * &u;
            let g = (objective(rho, &plus) - objective(rho, &minus)) / (2.0 * GRADIENT_STEP);
            grad[k] = g;
            grad_norm_sq += g * g;
        }
        if grad_norm_sq.sqrt() < 1e-9 {
            return Ok((value, u, true));
        }
        let mut h = CMatrix::zeros(u.nrows(), u.ncols());
        for (k, b) in basis.iter().enumerate() {
            h += b * cr(grad[k]);
        }
        // Backtracking line search with an Armijo acceptance test.
        let mut step = 0.5;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = matrix_exp_i_hermitian(&(&h * cr(step)))? * &u;
            let cand_value = objective(rho, &candidate);
            if cand_value >= value + 1e-4 * step * grad_norm_sq {
                accepted = Some((cand_value, candidate));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((new_value, new_u)) => {
                let gain = new_value - value;
                u = new_u;
                value = new_value;
                if gain < CONVERGENCE_GAIN {
                    return Ok((value, u, true));
                }
            }
            // No ascent direction survives the line search: stationary.
            None => return Ok((value, u, true)),
        }
    }
    Ok((value, u, false))
}

/// Maximizes ⟨ψ|ρ|ψ⟩ over maximally entangled |ψ⟩ for a d⊗d state.
/// Deterministic for a fixed seed.
pub fn fef(rho: &DensityMatrix, opts: &FefOptions) -> Result<FefResult> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::DimensionMismatch(format!(
            "FEF needs a bipartite d⊗d state, got dims {dims:?}"
        )));
    }
    let d = dims[0];
    let basis = hermitian_basis(d);
    let mut sampler = SeededSampler::new(opts.seed);

    let mut best: Option<(f64, CMatrix, bool)> = None;
    let mut restarts_used = 0;
    for r in 0..=opts.restarts {
        let start = if r == 0 {
            CMatrix::identity(d, d)
        } else {
            haar_unitary(d, &mut sampler)?
        };
        let run = ascend(rho.matrix(), start, &basis)?;
        restarts_used += 1;
        let better = match &best {
            Some((v, _, _)) => run.0 > *v,
            None => true,
        };
        if better {
            best = Some(run);
        }
        if best.as_ref().map(|(v, _, _)| *v >= 1.0 - 1e-12).unwrap() {
            break;
        }
    }
    let (value, optimal_unitary, converged) = best.expect("at least one restart runs");
    debug_assert!(value >= 1.0 / (d * d) as f64 - 1e-9);
    Ok(FefResult {
        value,
        optimal_unitary,
        restarts_used,
        converged,
    })
}

/// Anti-hallucination oracle: max of ⟨Φ_U|ρ|Φ_U⟩ over `samples` Haar
/// unitaries, followed by one ascent pass from the best sample. Lower-bounds
/// the optimizer within statistical tolerance. Restricted to d ≤ 4.
pub fn fef_bruteforce_oracle(
    rho: &DensityMatrix,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<f64> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::DimensionMismatch(format!(
            "FEF oracle needs a bipartite d⊗d state, got dims {dims:?}"
        )));
    }
    let d = dims[0];
    if d > 4 {
        return Err(Error::InvalidArgument(format!(
            "oracle is limited to d <= 4, got {d}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("oracle needs at least one sample".into()));
    }
    let mut best_value = f64::NEG_INFINITY;
    let mut best_u = CMatrix::identity(d, d);
    for _ in 0..samples {
        let u = haar_unitary(d, sampler)?;
        let v = objective(rho.matrix(), &u);
        if v > best_value {
            best_value = v;
            best_u = u;
        }
    }
    let basis = hermitian_basis(d);
    let (refined, _, _) = ascend(rho.matrix(), best_u, &basis)?;
    Ok(refined.max(best_value))
}

// ---------------------------------------------------------------------------
// Generalized singlet fraction
// ---------------------------------------------------------------------------

/// Which axis of the pair-FEF matrix attained the maximum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Col,
}

/// Full report of a generalized-singlet-fraction computation: the n×n
/// pairwise FEF matrix, its row/column sums F(i) and F(j), the overall
/// maximum, and (for indistinguishable inputs) the sLOCC post-selection
/// probabilities. Degenerate reductions are flagged and excluded from the
/// sums.
#[derive(Clone, Debug, Serialize)]
pub struct GsfReport {
    pub pair_fef: Vec<Vec<Option<f64>>>,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    pub value: f64,
    pub argmax: (Axis, usize),
    pub post_select_probs: Option<Vec<Vec<f64>>>,
    pub flagged: Vec<(usize, usize)>,
}

/// Input to [`gsf`]: a distinguishable state, or an indistinguishable state
/// with the two regions whose particles define the sLOCC pair.
pub enum GsfInput<'a> {
    Dist(&'a DistState),
    Indist {
        state: &'a IndistState,
        region_x: &'a str,
        region_y: &'a str,
    },
}

fn pair_seed(base: u64, i: usize, j: usize, n: usize) -> u64 {
    base.wrapping_add(((i * n + j) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generalized singlet fraction: pairFef[i][j] = FEF of the (i, j) pair
/// reduction, F(i)/F(j) are the row/column sums with each pair maximized
/// independently, and the value is the overall maximum.
pub fn gsf(input: GsfInput<'_>, opts: &FefOptions) -> Result<GsfReport> {
    let n = match &input {
        GsfInput::Dist(state) => {
            if state.dofs_a() != state.dofs_b() {
                return Err(Error::InvalidArgument(format!(
                    "generalized singlet fraction needs matching DoF counts, got {} vs {}",
                    state.dofs_a(),
                    state.dofs_b()
                )));
            }
            state.dofs_a()
        }
        GsfInput::Indist { state, .. } => state.n(),
    };

    let mut pair_fef: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n];
    let mut probs: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    let mut flagged = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let pair_opts = FefOptions {
                restarts: opts.restarts,
                seed: pair_seed(opts.seed, i, j, n),
            };
            let reduced = match &input {
                GsfInput::Dist(state) => pairwise_reduction(state, i, j).map(|rho| (rho, 1.0)),
                GsfInput::Indist {
                    state,
                    region_x,
                    region_y,
                } => pairwise_reduction_indist(state, region_x, i, region_y, j),
            };
            match reduced {
                Ok((rho, prob)) => {
                    pair_fef[i][j] = Some(fef(&rho, &pair_opts)?.value);
                    probs[i][j] = prob;
                }
                Err(Error::DegenerateState(_)) => flagged.push((i, j)),
                Err(e) => return Err(e),
            }
        }
    }
    if flagged.len() == n * n {
        return Err(Error::DegenerateState(
            "every pairwise reduction is degenerate".into(),
        ));
    }

    let row_sums: Vec<f64> = (0..n)
        .map(|i| pair_fef[i].iter().flatten().sum())
        .collect();
    let col_sums: Vec<f64> = (0..n)
        .map(|j| (0..n).filter_map(|i| pair_fef[i][j]).sum())
        .collect();
    let (mut value, mut argmax) = (f64::NEG_INFINITY, (Axis::Row, 0));
    for (i, &s) in row_sums.iter().enumerate() {
        if s > value {
            value = s;
            argmax = (Axis::Row, i);
        }
    }
    for (j, &s) in col_sums.iter().enumerate() {
        if s > value {
            value = s;
            argmax = (Axis::Col, j);
        }
    }
    let post_select_probs = match &input {
        GsfInput::Dist(_) => None,
        GsfInput::Indist { .. } => Some(probs),
    };
    Ok(GsfReport {
        pair_fef,
        row_sums,
        col_sums,
        value,
        argmax,
        post_select_probs,
        flagged,
    })
}

/// Convenience wrapper for distinguishable states.
pub fn gsf_dist(state: &DistState, opts: &FefOptions) -> Result<GsfReport> {
    gsf(GsfInput::Dist(state), opts)
}

/// Convenience wrapper for indistinguishable states with an sLOCC region
/// pair.
pub fn gsf_indist(
    state: &IndistState,
    region_x: &str,
    region_y: &str,
    opts: &FefOptions,
) -> Result<GsfReport> {
    gsf(
        GsfInput::Indist {
            state,
            region_x,
            region_y,
        },
        opts,
    )
}

/// Monogamy check on a list of per-DoF singlet fractions: lhs = Σ F_j,
/// rhs = (d−1)/d + (Σ √F_j)²/(n+d−1), satisfied iff lhs ≤ rhs + 1e-9.
pub fn kay_monogamy_check(fefs: &[f64], d: usize) -> Result<(f64, f64, bool)> {
    if fefs.is_empty() {
        return Err(Error::InvalidArgument("need at least one fidelity".into()));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2, got {d}")));
    }
    for &f in fefs {
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "singlet fractions must lie in [0, 1], got {f}"
            )));
        }
    }
    let n = fefs.len() as f64;
    let lhs: f64 = fefs.iter().sum();
    let sqrt_sum: f64 = fefs.iter().map(|&f| f.max(0.0).sqrt()).sum();
    let rhs = (d as f64 - 1.0) / d as f64 + sqrt_sum * sqrt_sum / (n + d as f64 - 1.0);
    Ok((lhs, rhs, lhs <= rhs + 1e-9))
}

/// Upper bound 1 + (n−1)/d on the generalized singlet fraction of
/// distinguishable states.
pub fn gsf_upper_bound(n: usize, d: usize) -> Result<f64> {
    if n < 1 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and d >= 2, got n={n}, d={d}"
        )));
    }
    Ok(1.0 + (n as f64 - 1.0) / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, random_density, random_pure_state};
    use crate::multidof::{
        mes_structure_state, noisy_singlet, standard_mes, standard_mes_vector, DofLayout,
        WernerParams,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn opts() -> FefOptions {
        FefOptions::default()
    }

    #[test]
    fn fef_of_mes_is_one() {
        for d in [2usize, 3] {
            let rho = standard_mes(d).unwrap();
            let res = fef(&rho, &opts()).unwrap();
            assert_abs_diff_eq!(res.value, 1.0, epsilon = 1e-6);
            assert!(res.converged);
        }
    }

    #[test]
    fn fef_of_maximally_mixed_is_inverse_square() {
        let rho = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
        let res = fef(&rho, &opts()).unwrap();
        assert_abs_diff_eq!(res.value, 0.25, epsilon = 1e-6);
    }

    #[test]
    fn fef_of_werner_grid_matches_affine_formula() {
        let layout = DofLayout::new(1, 2).unwrap();
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let params = WernerParams::new(p, standard_mes(2).unwrap()).unwrap();
            let state = noisy_singlet(&params, &layout).unwrap();
            let res = fef(state.density(), &opts()).unwrap();
            assert_abs_diff_eq!(res.value, p + (1.0 - p) / 4.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn fef_of_classically_correlated_mixture_is_half() {
        // diag(0, cos²θ, sin²θ, 0): the overlap of any MES with the two
        // populated basis states is capped at 1/2 in total.
        for theta in [std::f64::consts::PI / 8.0, std::f64::consts::PI / 4.0, 3.0 * std::f64::consts::PI / 8.0] {
            let mut m = CMatrix::zeros(4, 4);
            m[(1, 1)] = cr(theta.cos().powi(2));
            m[(2, 2)] = cr(theta.sin().powi(2));
            let rho = DensityMatrix::new(m, vec![2, 2]).unwrap();
            let res = fef(&rho, &opts()).unwrap();
            assert_abs_diff_eq!(res.value, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn fef_never_below_unoptimized_overlap() {
        let mut s = SeededSampler::new(42);
        let phi = standard_mes_vector(2);
        for _ in 0..10 {
            let rho = random_density(4, 4, &mut s).unwrap().with_dims(vec![2, 2]).unwrap();
            let res = fef(&rho, &opts()).unwrap();
            assert!(res.value >= rho.overlap(&phi).unwrap() - 1e-9);
            assert!(res.value >= 0.25 - 1e-9 && res.value <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn fef_agrees_with_bruteforce_oracle() {
        let mut s = SeededSampler::new(13);
        for k in 0..12 {
            let rho = random_density(4, if k % 2 == 0 { 4 } else { 2 }, &mut s)
                .unwrap()
                .with_dims(vec![2, 2])
                .unwrap();
            let optimized = fef(&rho, &opts()).unwrap().value;
            let oracle = fef_bruteforce_oracle(&rho, 2000, &mut s).unwrap();
            assert!(
                (optimized - oracle).abs() <= 5e-3,
                "optimizer {optimized} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn fef_invariant_under_local_unitaries() {
        let mut s = SeededSampler::new(31);
        for _ in 0..5 {
            let rho = random_density(4, 3, &mut s).unwrap().with_dims(vec![2, 2]).unwrap();
            let u = haar_unitary(2, &mut s).unwrap();
            let v = haar_unitary(2, &mut s).unwrap();
            let op = kron(&u, &v);
            let rotated = DensityMatrix::from_trusted(
                &op * rho.matrix() * op.adjoint(),
                vec![2, 2],
            )
            .unwrap();
            let f0 = fef(&rho, &opts()).unwrap().value;
            let f1 = fef(&rotated, &opts()).unwrap().value;
            assert!((f0 - f1).abs() <= 1e-5, "{f0} vs {f1}");
        }
    }

    #[test]
    fn fef_of_separable_states_respects_horodecki_bound() {
        // Convex mixtures of random product states stay at or below 1/d.
        let mut s = SeededSampler::new(77);
        for _ in 0..20 {
            let mut m = CMatrix::zeros(4, 4);
            let k = 1 + s.index(4);
            let mut weights: Vec<f64> = (0..k).map(|_| s.uniform() + 1e-3).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            for &w in &weights {
                let a = random_pure_state(2, &mut s).unwrap();
                let b = random_pure_state(2, &mut s).unwrap();
                let mut prod = CVector::zeros(4);
                for i in 0..2 {
                    for j in 0..2 {
                        prod[i * 2 + j] = a[i] * b[j];
                    }
                }
                m += (&prod * prod.adjoint()).scale(w);
            }
            let rho = DensityMatrix::new(m, vec![2, 2]).unwrap();
            let res = fef(&rho, &opts()).unwrap();
            assert!(res.value <= 0.5 + 5e-3, "separable FEF {}", res.value);
        }
    }

    #[test]
    fn gsf_of_maximally_mixed_is_exact_floor() {
        let rho = DensityMatrix::maximally_mixed(vec![2; 4]).unwrap();
        let state = DistState::from_density(rho, 2, 2, 2).unwrap();
        let report = gsf_dist(&state, &opts()).unwrap();
        assert_abs_diff_eq!(report.value, 0.5, epsilon = 1e-9);
        for row in &report.pair_fef {
            for entry in row {
                assert_abs_diff_eq!(entry.unwrap(), 0.25, epsilon = 1e-9);
            }
        }
        assert!(report.flagged.is_empty());
        assert!(report.post_select_probs.is_none());
    }

    #[test]
    fn gsf_of_matched_bell_product() {
        let layout = DofLayout::new(2, 2).unwrap();
        let state = mes_structure_state(&layout).unwrap();
        let report = gsf_dist(&state, &opts()).unwrap();
        assert_abs_diff_eq!(report.value, 1.25, epsilon = 1e-6);
        assert_abs_diff_eq!(report.pair_fef[0][0].unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.pair_fef[1][1].unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.pair_fef[0][1].unwrap(), 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(report.pair_fef[1][0].unwrap(), 0.25, epsilon = 1e-6);
        // Row and column sums coincide by symmetry here.
        assert_abs_diff_eq!(report.row_sums[0], 1.25, epsilon = 1e-6);
    }

    #[test]
    fn gsf_indist_mes_reports_probability_one_pair() {
        let mes = crate::indist::indist_mes(2, crate::indist::Statistics::Boson).unwrap();
        let report = gsf_indist(&mes, "s1", "s2", &opts()).unwrap();
        assert_abs_diff_eq!(report.value, 1.0, epsilon = 1e-6);
        let probs = report.post_select_probs.as_ref().unwrap();
        assert_abs_diff_eq!(probs[0][0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn kay_monogamy_anchor_values() {
        let (lhs, rhs, ok) = kay_monogamy_check(&[1.0], 2).unwrap();
        assert_abs_diff_eq!(lhs, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, 1.0, epsilon = 1e-15);
        assert!(ok);

        let (lhs, rhs, ok) = kay_monogamy_check(&[1.0, 0.25], 2).unwrap();
        assert_abs_diff_eq!(lhs, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 1.25, epsilon = 1e-12);
        assert!(ok);

        let (lhs, rhs, ok) = kay_monogamy_check(&[1.0, 1.0], 2).unwrap();
        assert_abs_diff_eq!(lhs, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, 0.5 + 4.0 / 3.0, epsilon = 1e-12);
        assert!(!ok);

        assert!(kay_monogamy_check(&[1.5], 2).is_err());
        assert!(kay_monogamy_check(&[], 2).is_err());
    }

    #[test]
    fn gsf_upper_bound_anchor_values() {
        assert_abs_diff_eq!(gsf_upper_bound(1, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gsf_upper_bound(2, 2).unwrap(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gsf_upper_bound(3, 3).unwrap(), 5.0 / 3.0, epsilon = 1e-15);
        assert!(gsf_upper_bound(0, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn kay_check_is_consistent(fs in proptest::collection::vec(0.0f64..=1.0, 1..5), d in 2usize..=4) {
            let (lhs, rhs, ok) = kay_monogamy_check(&fs, d).unwrap();
            prop_assert_eq!(ok, lhs <= rhs + 1e-9);
            prop_assert!(rhs >= (d as f64 - 1.0) / d as f64);
        }

        #[test]
        fn gsf_bound_monotone_in_n(n in 1usize..=6, d in 2usize..=4) {
            let lo = gsf_upper_bound(n, d).unwrap();
            let hi = gsf_upper_bound(n + 1, d).unwrap();
            prop_assert!(hi > lo);
        }
    }
}
