//! Standard-protocol teleportation through an arbitrary d⊗d channel state:
//! generalized Bell-state measurement, per-outcome Weyl corrections,
//! Monte Carlo pair fidelities f_i^j over Haar-random pure inputs, the
//! generalized teleportation fidelity f_g, and Haar-averaged channel
//! fidelities.
//!
//! Fidelity convention: all Haar averages use the transition probability
//! ⟨φ|ρ_out|φ⟩ — the square of the Uhlmann fidelity for pure inputs — which
//! is the convention under which the qubit average maps a singlet fraction
//! F to (2F+1)/3.

use serde::Serialize;

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::fidelity::{fef, FefOptions};
use crate::indist::{pairwise_reduction_indist, IndistState};
use crate::linalg::{
    kron, random_pure_state, weyl_x, weyl_z, CMatrix, CVector, DensityMatrix, SeededSampler,
};
use crate::multidof::{pairwise_reduction, standard_mes_vector, DistState};

/// All d² outcomes of a Bell-state-measurement teleportation round.
#[derive(Clone, Debug)]
pub struct TeleportOutcome {
    pub outcome_probs: Vec<f64>,
    pub corrected_outputs: Vec<DensityMatrix>,
    pub averaged_output: DensityMatrix,
}

/// A seeded Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FidelityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Weyl operator Z^a X^b.
fn weyl_za_xb(d: usize, a: usize, b: usize) -> CMatrix {
    let x = weyl_x(d);
    let z = weyl_z(d);
    let za = (0..a).fold(CMatrix::identity(d, d), |acc, _| acc * &z);
    (0..b).fold(za, |acc, _| acc * &x)
}

/// The generalized Bell basis (I⊗Z^a X^b)|Φ⁺⟩ for a, b ∈ 0..d, listed with
/// index a·d + b. Pairwise orthonormal and maximally entangled.
pub fn generalized_bell_basis(d: usize) -> Result<Vec<CVector>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "Bell basis needs d >= 2, got {d}"
        )));
    }
    let phi = standard_mes_vector(d);
    let eye = CMatrix::identity(d, d);
    let mut basis = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let op = kron(&eye, &weyl_za_xb(d, a, b));
            basis.push(&op * &phi);
        }
    }
    Ok(basis)
}

/// Runs one teleportation: Bell-state measurement on (input ⊗ sender half)
/// and the per-outcome correction (Z^a X^b)ᵀ on the receiver half, which
/// makes the ideal Φ⁺ channel reproduce the input exactly for every
/// outcome.
pub fn teleport(channel: &DensityMatrix, input: &DensityMatrix) -> Result<TeleportOutcome> {
    let cdims = channel.dims();
    if cdims.len() != 2 || cdims[0] != cdims[1] {
        return Err(Error::DimensionMismatch(format!(
            "channel must be bipartite d⊗d, got dims {cdims:?}"
        )));
    }
    let d = cdims[0];
    if input.dims() != [d] {
        return Err(Error::DimensionMismatch(format!(
            "input must be a single d = {d} system, got dims {:?}",
            input.dims()
        )));
    }

    // Full state on (input C, sender A, receiver B); flat index c·d² + a·d + b.
    let full = kron(input.matrix(), channel.matrix());
    let basis = generalized_bell_basis(d)?;

    let mut outcome_probs = Vec::with_capacity(d * d);
    let mut corrected_outputs = Vec::with_capacity(d * d);
    let mut averaged = CMatrix::zeros(d, d);
    for (k, bell) in basis.iter().enumerate() {
        // ⟨bell|_{CA} ρ |bell⟩_{CA}, leaving an unnormalized matrix on B.
        let mut block = CMatrix::zeros(d, d);
        for c_idx in 0..d {
            for a_idx in 0..d {
                let amp_row = bell[c_idx * d + a_idx].conj();
                if amp_row.norm() == 0.0 {
                    continue;
                }
                for cp in 0..d {
                    for ap in 0..d {
                        let amp_col = bell[cp * d + ap];
                        if amp_col.norm() == 0.0 {
                            continue;
                        }
                        let w = amp_row * amp_col;
                        for b1 in 0..d {
                            let row = c_idx * d * d + a_idx * d + b1;
                            for b2 in 0..d {
                                block[(b1, b2)] += w * full[(row, cp * d * d + ap * d + b2)];
                            }
                        }
                    }
                }
            }
        }
        let p = block.trace().re.max(0.0);
        outcome_probs.push(p);
        let (a, b) = (k / d, k % d);
        let correction = weyl_za_xb(d, a, b).transpose();
        let corrected_raw = &correction * block * correction.adjoint();
        averaged += &corrected_raw;
        let corrected = if p > 1e-14 {
            DensityMatrix::from_trusted(corrected_raw.scale(1.0 / p), vec![d])?
        } else {
            // Zero-probability branch: report the maximally mixed
            // placeholder rather than dividing by zero.
            DensityMatrix::maximally_mixed(vec![d])?
        };
        corrected_outputs.push(corrected);
    }
    let total: f64 = outcome_probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::ContractViolation {
            what: "teleportation outcome probabilities do not sum to 1".into(),
            diagnostics: format!("sum = {total}"),
        });
    }
    let averaged_output = DensityMatrix::from_trusted(averaged, vec![d])?;
    Ok(TeleportOutcome {
        outcome_probs,
        corrected_outputs,
        averaged_output,
    })
}

/// Input selector for pair-channel teleportation.
pub enum TeleportInput<'a> {
    Dist(&'a DistState),
    Indist {
        state: &'a IndistState,
        region_x: &'a str,
        region_y: &'a str,
    },
}

impl TeleportInput<'_> {
    fn n(&self) -> usize {
        match self {
            TeleportInput::Dist(s) => s.dofs_a().min(s.dofs_b()),
            TeleportInput::Indist { state, .. } => state.n(),
        }
    }

    fn reduction(&self, i: usize, j: usize) -> Result<DensityMatrix> {
        match self {
            TeleportInput::Dist(s) => pairwise_reduction(s, i, j),
            TeleportInput::Indist {
                state,
                region_x,
                region_y,
            } => pairwise_reduction_indist(state, region_x, i, region_y, j).map(|(rho, _)| rho),
        }
    }
}

/// Estimates the teleportation fidelity through one pair channel: the
/// (i, j) DoF reduction is aligned with the optimal maximally entangled
/// basis (receiver-side rotation by the FEF maximizer's adjoint), then the
/// mean transition probability over Haar-random pure inputs is returned.
pub fn pair_fidelity(
    input: TeleportInput<'_>,
    i: usize,
    j: usize,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<FidelityEstimate> {
    let channel = input.reduction(i, j)?;
    haar_average_teleport_fidelity(&channel, samples, sampler)
}

/// Core Monte Carlo loop shared by [`pair_fidelity`] and the acceptance
/// checks: aligns the channel state, teleports Haar-random pure inputs, and
/// averages ⟨φ|ρ_out|φ⟩.
pub fn haar_average_teleport_fidelity(
    channel: &DensityMatrix,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<FidelityEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let dims = channel.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::DimensionMismatch(format!(
            "channel must be bipartite d⊗d, got dims {dims:?}"
        )));
    }
    let d = dims[0];
    let seed = sampler.seed();

    // Protocol alignment: rotate the receiver side by U† where U is the FEF
    // maximizer, so the standard Bell measurement is optimal for this
    // channel.
    let opt = fef(
        channel,
        &FefOptions {
            restarts: 16,
            seed,
        },
    )?;
    let align = kron(
        &CMatrix::identity(d, d),
        &opt.optimal_unitary.adjoint(),
    );
    let aligned = DensityMatrix::from_trusted(
        &align * channel.matrix() * align.adjoint(),
        vec![d, d],
    )?;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let phi = random_pure_state(d, sampler)?;
        let rho_in = DensityMatrix::from_pure(&phi, vec![d])?;
        let outcome = teleport(&aligned, &rho_in)?;
        let score = outcome.averaged_output.overlap(&phi)?;
        sum += score;
        sum_sq += score * score;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    let stderr = (var / samples as f64).sqrt();
    Ok(FidelityEstimate {
        mean,
        stderr,
        samples,
        seed,
    })
}

/// Generalized teleportation fidelity: the maximum pair fidelity over all
/// n² DoF pairs, with the attaining pair.
pub fn f_g(
    input: TeleportInput<'_>,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<(FidelityEstimate, (usize, usize))> {
    let n = input.n();
    let mut best: Option<(FidelityEstimate, (usize, usize))> = None;
    for i in 0..n {
        for j in 0..n {
            let mut pair_sampler = sampler.split();
            let est = match &input {
                TeleportInput::Dist(s) => {
                    pair_fidelity(TeleportInput::Dist(s), i, j, samples, &mut pair_sampler)?
                }
                TeleportInput::Indist {
                    state,
                    region_x,
                    region_y,
                } => pair_fidelity(
                    TeleportInput::Indist {
                        state,
                        region_x,
                        region_y,
                    },
                    i,
                    j,
                    samples,
                    &mut pair_sampler,
                )?,
            };
            let better = match &best {
                Some((b, _)) => est.mean > b.mean,
                None => true,
            };
            if better {
                best = Some((est, (i, j)));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("state has no DoF pairs".into()))
}

/// Haar-averaged channel fidelity ⟨φ|Λ(|φ⟩⟨φ|)|φ⟩ over random pure inputs.
pub fn haar_average_channel_fidelity(
    channel: &QuantumChannel,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<FidelityEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = channel.dim();
    let seed = sampler.seed();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let phi = random_pure_state(d, sampler)?;
        let rho_in = DensityMatrix::from_pure(&phi, vec![d])?;
        let out = channel.apply(&rho_in)?;
        let score = out.overlap(&phi)?;
        sum += score;
        sum_sq += score * score;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    Ok(FidelityEstimate {
        mean,
        stderr: (var / samples as f64).sqrt(),
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::depolarizing;
    use crate::linalg::{cr, max_norm_diff, partial_trace, random_density};
    use crate::multidof::{
        mes_structure_state, noisy_singlet, standard_mes, DofLayout, WernerParams,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn bell_basis_is_orthonormal_and_maximally_entangled() {
        for d in [2usize, 3] {
            let basis = generalized_bell_basis(d).unwrap();
            assert_eq!(basis.len(), d * d);
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let ip = a.dotc(b);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((ip.norm() - expected).abs() < 1e-12, "d={d} ({i},{j})");
                }
                let rho = DensityMatrix::from_pure(a, vec![d, d]).unwrap();
                let marg = partial_trace(&rho, &[0]).unwrap();
                let mixed = CMatrix::identity(d, d) * cr(1.0 / d as f64);
                assert!(max_norm_diff(marg.matrix(), &mixed) < 1e-12);
            }
        }
    }

    #[test]
    fn bell_basis_d2_matches_textbook_bell_states() {
        let basis = generalized_bell_basis(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // (a,b) = (0,0) → Φ⁺; (0,1) → Ψ⁺; (1,0) → Φ⁻; (1,1) → Ψ⁻ up to sign.
        let expect = [
            vec![s, 0.0, 0.0, s],
            vec![0.0, s, s, 0.0],
            vec![s, 0.0, 0.0, -s],
            vec![0.0, s, -s, 0.0],
        ];
        for (vec_got, vec_want) in basis.iter().zip(expect.iter()) {
            // Compare up to global phase via overlap magnitude.
            let overlap: f64 = vec_got
                .iter()
                .zip(vec_want.iter())
                .map(|(g, w)| (g.conj() * cr(*w)).re)
                .sum::<f64>()
                .abs();
            assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ideal_channel_teleports_exactly() {
        let channel = standard_mes(2).unwrap();
        let mut s = SeededSampler::new(4);
        for _ in 0..5 {
            let phi = random_pure_state(2, &mut s).unwrap();
            let input = DensityMatrix::from_pure(&phi, vec![2]).unwrap();
            let out = teleport(&channel, &input).unwrap();
            for (k, p) in out.outcome_probs.iter().enumerate() {
                assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-12);
                assert!(
                    max_norm_diff(out.corrected_outputs[k].matrix(), input.matrix()) < 1e-12
                );
            }
            assert!(max_norm_diff(out.averaged_output.matrix(), input.matrix()) < 1e-12);
        }
    }

    #[test]
    fn white_noise_channel_outputs_maximally_mixed() {
        let channel = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
        let input = DensityMatrix::from_pure(
            &CVector::from_vec(vec![cr(1.0), cr(0.0)]),
            vec![2],
        )
        .unwrap();
        let out = teleport(&channel, &input).unwrap();
        let mixed = CMatrix::identity(2, 2) * cr(0.5);
        for rho in &out.corrected_outputs {
            assert!(max_norm_diff(rho.matrix(), &mixed) < 1e-12);
        }
    }

    #[test]
    fn outcome_probs_input_independent_for_mixed_sender_marginal() {
        // Werner channels have maximally mixed marginals, so the BSM
        // statistics cannot depend on the input.
        let layout = DofLayout::new(1, 2).unwrap();
        let params = WernerParams::new(0.3, standard_mes(2).unwrap()).unwrap();
        let channel = noisy_singlet(&params, &layout).unwrap().into_density();
        let mut s = SeededSampler::new(8);
        let mut reference: Option<Vec<f64>> = None;
        for _ in 0..4 {
            let phi = random_pure_state(2, &mut s).unwrap();
            let input = DensityMatrix::from_pure(&phi, vec![2]).unwrap();
            let out = teleport(&channel, &input).unwrap();
            match &reference {
                Some(probs) => {
                    for (a, b) in probs.iter().zip(out.outcome_probs.iter()) {
                        assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
                    }
                }
                None => reference = Some(out.outcome_probs.clone()),
            }
        }
    }

    #[test]
    fn pair_fidelity_matched_and_crossed_pairs() {
        let layout = DofLayout::new(2, 2).unwrap();
        let state = mes_structure_state(&layout).unwrap();
        let mut s = SeededSampler::new(55);
        let matched = pair_fidelity(TeleportInput::Dist(&state), 0, 0, 800, &mut s).unwrap();
        assert_abs_diff_eq!(matched.mean, 1.0, epsilon = 5e-3);
        let crossed = pair_fidelity(TeleportInput::Dist(&state), 0, 1, 800, &mut s).unwrap();
        assert_abs_diff_eq!(crossed.mean, 0.5, epsilon = 1e-2);
    }

    #[test]
    fn pair_fidelity_of_white_noise_is_inverse_dimension() {
        for d in [2usize, 3] {
            let layout = DofLayout::new(1, d).unwrap();
            let rho = DensityMatrix::maximally_mixed(vec![d, d]).unwrap();
            let state = DistState::from_density(rho, d, 1, 1).unwrap();
            let _ = &layout;
            let mut s = SeededSampler::new(66);
            let est = pair_fidelity(TeleportInput::Dist(&state), 0, 0, 600, &mut s).unwrap();
            assert_abs_diff_eq!(est.mean, 1.0 / d as f64, epsilon = 1e-2);
        }
    }

    #[test]
    fn f_g_of_noisy_singlet_matches_affine_formula() {
        let layout = DofLayout::new(1, 2).unwrap();
        for p in [0.3, 0.7] {
            let params = WernerParams::new(p, standard_mes(2).unwrap()).unwrap();
            let state = noisy_singlet(&params, &layout).unwrap();
            let mut s = SeededSampler::new(91);
            let (est, pair) = f_g(TeleportInput::Dist(&state), 1500, &mut s).unwrap();
            assert_eq!(pair, (0, 0));
            assert_abs_diff_eq!(est.mean, p + (1.0 - p) * 0.5, epsilon = 1e-2);
        }
    }

    #[test]
    fn f_g_of_matched_bell_product_attains_unity() {
        let layout = DofLayout::new(2, 2).unwrap();
        let state = mes_structure_state(&layout).unwrap();
        let mut s = SeededSampler::new(17);
        let (est, pair) = f_g(TeleportInput::Dist(&state), 400, &mut s).unwrap();
        assert_abs_diff_eq!(est.mean, 1.0, epsilon = 5e-3);
        assert!(pair == (0, 0) || pair == (1, 1));
    }

    #[test]
    fn channel_fidelity_of_identity_and_depolarizing() {
        let mut s = SeededSampler::new(21);
        let id = QuantumChannel::identity(2).unwrap();
        let est = haar_average_channel_fidelity(&id, 100, &mut s).unwrap();
        assert_abs_diff_eq!(est.mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.stderr, 0.0, epsilon = 1e-12);
        // The depolarizing integrand is constant, so the estimate is exact.
        for p in [0.0, 0.4, 1.0] {
            let ch = depolarizing(p, 2).unwrap();
            let est = haar_average_channel_fidelity(&ch, 100, &mut s).unwrap();
            assert_abs_diff_eq!(est.mean, p + (1.0 - p) * 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn estimates_are_reproducible_bit_for_bit() {
        let layout = DofLayout::new(1, 2).unwrap();
        let params = WernerParams::new(0.5, standard_mes(2).unwrap()).unwrap();
        let state = noisy_singlet(&params, &layout).unwrap();
        let runs: Vec<FidelityEstimate> = (0..2)
            .map(|_| {
                let mut s = SeededSampler::new(1234);
                pair_fidelity(TeleportInput::Dist(&state), 0, 0, 300, &mut s).unwrap()
            })
            .collect();
        assert_eq!(runs[0].mean.to_bits(), runs[1].mean.to_bits());
        assert_eq!(runs[0].stderr.to_bits(), runs[1].stderr.to_bits());
    }

    #[test]
    fn horodecki_relation_spot_check() {
        // One random channel state: the simulated average fidelity must
        // match (2F+1)/3 with F the optimized singlet fraction.
        let mut s = SeededSampler::new(2025);
        let rho = random_density(4, 4, &mut s).unwrap().with_dims(vec![2, 2]).unwrap();
        let f_opt = fef(&rho, &FefOptions::default()).unwrap().value;
        let est = haar_average_teleport_fidelity(&rho, 4000, &mut s).unwrap();
        assert_abs_diff_eq!(est.mean, (2.0 * f_opt + 1.0) / 3.0, epsilon = 0.01);
    }
}
