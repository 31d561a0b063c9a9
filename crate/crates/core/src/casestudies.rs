//! Worked examples: the two-DoF optical-circuit state, the hyper-hybrid
//! reference construction, the private-query entangled states with their
//! closed-form singlet fractions, and the device-independence protocols
//! (key generation, private query, the CHSH-style local test, and the
//! three-qubit pseudo-telepathy game).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fidelity::{gsf_dist, gsf_indist, FefOptions, GsfReport};
use crate::indist::{IndistState, IndistTerm, Statistics};
use crate::linalg::{c, cr, CMatrix, CVector, DensityMatrix, SeededSampler};
use crate::multidof::{build_dist_state, DistState, DofLayout};

/// Parameters of the two-photon optical circuit: polarization mixing angle,
/// relative phase, and the orbital-angular-momentum order whose ±l values
/// form the second two-level DoF.
#[derive(Clone, Copy, Debug)]
pub struct OpticalCircuitParams {
    theta: f64,
    phi: f64,
    oam_order: u32,
}

impl OpticalCircuitParams {
    /// θ is nominally strictly interior to (0, π/2); the degenerate
    /// endpoints are accepted but flagged via [`Self::is_degenerate`].
    pub fn new(theta: f64, phi: f64, oam_order: u32) -> Result<Self> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, π/2], got {theta}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument("phi must be finite".into()));
        }
        Ok(Self {
            theta,
            phi,
            oam_order,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn oam_order(&self) -> u32 {
        self.oam_order
    }

    /// True when θ sits on an endpoint and the state degenerates to a
    /// product.
    pub fn is_degenerate(&self) -> bool {
        self.theta == 0.0 || self.theta == std::f64::consts::FRAC_PI_2
    }
}

/// The optical-circuit output cosθ|H,+l⟩|V,−l⟩ + e^{iφ}sinθ|V,−l⟩|H,+l⟩ as
/// a distinguishable n=2, d=2 state. DoF 0 is polarization (H=0, V=1);
/// DoF 1 is the OAM sign (+l=0, −l=1).
pub fn optical_circuit_state(params: &OpticalCircuitParams) -> Result<DistState> {
    let layout = DofLayout::new(2, 2)?;
    let phase = Complex64::from_polar(1.0, params.phi());
    let amplitudes = vec![
        (vec![0usize, 0, 1, 1], cr(params.theta().cos())),
        (vec![1, 1, 0, 0], phase * cr(params.theta().sin())),
    ];
    build_dist_state(&layout, &amplitudes)
}

/// The candidate two-boson, two-DoF reference state with fully
/// anti-correlated DoF pairs: (1/2) Σ_{a,b} |s₁(a,b), s₂(ā,b̄)⟩. Its
/// one-per-region projection is a product of two Bell pairs. Exposed

/// separately from [`hyper_hybrid_state`] so the candidate can be examined
/// even though it fails the all-pairs-maximal contract.
pub fn hyper_hybrid_candidate() -> Result<IndistState> {
    let mut terms = Vec::new();
    for a in 0..2usize {
        for b in 0..2usize {
            terms.push(IndistTerm::new(
                0,
                vec![a, b],
                1,
                vec![1 - a, 1 - b],
                cr(0.5),
            ));
        }
    }
    IndistState::new(
        vec!["s1".into(), "s2".into()],
        2,
        2,
        Statistics::Boson,
        terms,
    )
}

/// Constructs the hyper-hybrid reference state and verifies its defining
/// contract: every sLOCC pairwise reduction maximally entangled (pair FEF
/// = 1 within 1e-6). The literal amplitudes are external to this project
/// and could not be validated; the best documented candidate reaches pair
/// FEFs of only {1, 1/4}, because the conditional pair state obeys the
/// same singlet-fraction monogamy as any two-particle two-DoF state. The
/// constructor therefore fails loudly with the measured FEF matrix.
pub fn hyper_hybrid_state() -> Result<IndistState> {
    let candidate = hyper_hybrid_candidate()?;
    let opts = FefOptions {
        restarts: 16,
        seed: 40,
    };
    let report = gsf_indist(&candidate, "s1", "s2", &opts)?;
    let all_maximal = report
        .pair_fef
        .iter()
        .flatten()
        .all(|entry| entry.map(|v| v >= 1.0 - 1e-6).unwrap_or(false));
    if all_maximal {
        return Ok(candidate);
    }
    let matrix: Vec<Vec<f64>> = report
        .pair_fef
        .iter()
        .map(|row| row.iter().map(|e| e.unwrap_or(f64::NAN)).collect())
        .collect();
    Err(Error::ContractViolation {
        what: "hyper-hybrid contract (every pairwise reduction maximally entangled) \
               is not met by the candidate construction"
            .into(),
        diagnostics: format!(
            "pair FEF matrix {:?}; generalized singlet fraction {:.6}; the \
             one-per-region conditional state is subject to the monogamy bound, \
             which caps any row sum strictly below 2",
            matrix, report.value
        ),
    })
}

// ---------------------------------------------------------------------------
// Private-query states and closed forms
// ---------------------------------------------------------------------------

/// Parameters of the private-query protocol family.
#[derive(Clone, Copy, Debug)]
pub struct QpqParams {
    theta: f64,
    key_length: usize,
    seed: u64,
}

impl QpqParams {
    pub fn new(theta: f64, key_length: usize, seed: u64) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie strictly inside (0, π/2), got {theta}"
            )));
        }
        if key_length < 1 {
            return Err(Error::InvalidArgument("key length must be >= 1".into()));
        }
        Ok(Self {
            theta,
            key_length,
            seed,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn key_length(&self) -> usize {
        self.key_length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < std::f64::consts::FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "theta must lie strictly inside (0, π/2), got {theta}"
        )))
    }
}

/// Bob-side key states |φ₀⟩ = cos(θ/2)|0⟩ + sin(θ/2)|1⟩ and
/// |φ₁⟩ = cos(θ/2)|0⟩ − sin(θ/2)|1⟩.
fn phi_state(theta: f64, bit: u8) -> CVector {
    let sign = if bit == 0 { 1.0 } else { -1.0 };
    CVector::from_vec(vec![
        cr((theta / 2.0).cos()),
        cr(sign * (theta / 2.0).sin()),
    ])
}

/// The shared key-generation pair (1/√2)(|0⟩_B|φ₀⟩_A + |1⟩_B|φ₁⟩_A) as a
/// 2⊗2 density matrix (B first).
pub fn qpq_state(theta: f64) -> Result<DensityMatrix> {
    check_theta(theta)?;
    let mut v = CVector::zeros(4);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    for bit in 0..2usize {
        let phi = phi_state(theta, bit as u8);
        for a in 0..2 {
            v[bit * 2 + a] += phi[a] * cr(inv_sqrt2);
        }
    }
    DensityMatrix::from_pure(&v, vec![2, 2])
}

/// The ancilla-particle form: (1/√2)(cos(θ/2)|000⟩ + sin(θ/2)|010⟩ +
/// cos(θ/2)|111⟩ − sin(θ/2)|100⟩) on registers (B, A, X), returned as an
/// 8-dimensional ket.
pub fn qpq_ancilla_particle(theta: f64) -> Result<CVector> {
    check_theta(theta)?;
    let ct = cr((theta / 2.0).cos() / 2f64.sqrt());
    let st = cr((theta / 2.0).sin() / 2f64.sqrt());
    let mut v = CVector::zeros(8);
    v[0b000] = ct;
    v[0b010] = st;
    v[0b111] = ct;
    v[0b100] = -st;
    Ok(v)
}

/// The ancilla-DoF form on registers (B, A₁, A₂): the same four amplitudes
/// with the third register read as a second DoF of Alice's particle.
pub fn qpq_ancilla_dof_vector(theta: f64) -> Result<CVector> {
    check_theta(theta)?;
    let ct = cr((theta / 2.0).cos() / 2f64.sqrt());
    let st = cr((theta / 2.0).sin() / 2f64.sqrt());
    let mut v = CVector::zeros(8);
    v[0b000] = ct; // B=0, A₁=0, A₂=0
    v[0b010] = st; // B=0, A₁=1, A₂=0
    v[0b111] = ct; // B=1, A₁=1, A₂=1
    v[0b100] = -st; // B=1, A₁=0, A₂=0
    Ok(v)
}

/// The ancilla-DoF state as a distinguishable two-particle state with two
/// DoFs per side. Bob's particle carries the key qubit plus a |0⟩ padding
/// DoF (he physically has one DoF; the grouping needs a square DoF table);
/// Alice's particle carries (A₁, A₂). Both ancilla variants produce this
/// same state under the documented grouping convention.
pub fn qpq_ancilla_dof(theta: f64) -> Result<DistState> {
    let v = qpq_ancilla_dof_vector(theta)?;
    let layout = DofLayout::new(2, 2)?;
    let mut amplitudes = Vec::new();
    for b in 0..2usize {
        for a1 in 0..2usize {
            for a2 in 0..2usize {
                let amp = v[b * 4 + a1 * 2 + a2];
                if amp.norm() > 0.0 {
                    // Labels: (Bob key, Bob pad, A₁, A₂).
                    amplitudes.push((vec![b, 0usize, a1, a2], amp));
                }
            }
        }
    }
    build_dist_state(&layout, &amplitudes)
}

/// Closed-form generalized singlet fractions of the two ancilla variants:
/// (1/2 + cos²(θ/2), 1/2 + cos²(θ/2) + 2cos(θ/2)sin(θ/2)).
pub fn qpq_gsf_closed_forms(theta: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    let half = theta / 2.0;
    let particle = 0.5 + half.cos().powi(2);
    let dof = particle + 2.0 * half.cos() * half.sin();
    Ok((particle, dof))
}

/// Numeric generalized singlet fraction of the ancilla states under the
/// documented grouping (Bob row = {key, pad}, Alice row = {A₁, A₂}). Both
/// variants share one padded state, so one number serves both columns of
/// the comparison table.
pub fn qpq_numeric_gsf(theta: f64, opts: &FefOptions) -> Result<GsfReport> {
    let state = qpq_ancilla_dof(theta)?;
    gsf_dist(&state, opts)
}

// ---------------------------------------------------------------------------
// Key generation and private query
// ---------------------------------------------------------------------------

/// Outcome of a key-generation run: Bob's raw key, Alice's conclusive
/// positions with the values she inferred, and the conclusive fraction.
#[derive(Clone, Debug, Serialize)]
pub struct KeyStats {
    pub bob_key: Vec<u8>,
    pub alice_conclusive: Vec<(usize, u8)>,
    pub conclusive_rate: f64,
}

/// Simulates the key-generation phase: per pair, Bob measures his qubit in
/// the computational basis; Alice measures a uniformly random choice of
/// {|φ₀⟩, |φ₀⊥⟩} or {|φ₁⟩, |φ₁⊥⟩}; the orthogonal outcome is conclusive
/// (φ₀⊥ ⇒ Bob holds 1, φ₁⊥ ⇒ Bob holds 0).
pub fn qpq_key_generation(params: &QpqParams) -> Result<KeyStats> {
    let theta = params.theta();
    let mut sampler = SeededSampler::new(params.seed());
    // |⟨φ_c⊥|φ_b⟩|² for b ≠ c; zero for b = c by orthogonality.
    let p_conclusive = theta.sin().powi(2);

    let mut bob_key = Vec::with_capacity(params.key_length());
    let mut alice_conclusive = Vec::new();
    for position in 0..params.key_length() {
        // Bob's marginal is I/2: uniform bit.
        let b = sampler.bit();
        bob_key.push(b);
        // Alice's basis choice c and the Born probability of the
        // orthogonal outcome on her conditional state |φ_b⟩.
        let c_choice = sampler.bit();
        let p_perp = if c_choice == b { 0.0 } else { p_conclusive };
        if sampler.uniform() < p_perp {
            // Outcome φ_c⊥: Alice concludes Bob holds 1 − c.
            alice_conclusive.push((position, 1 - c_choice));
        }
    }
    let conclusive_rate = alice_conclusive.len() as f64 / params.key_length() as f64;
    Ok(KeyStats {
        bob_key,
        alice_conclusive,
        conclusive_rate,
    })
}

/// Result of one private-query exchange.
#[derive(Clone, Debug, Serialize)]
pub struct QueryOutcome {
    pub retrieved_bit: u8,
    pub encrypted: Vec<u8>,
    pub shift: usize,
}

/// Executes the query phase: Alice, knowing key bit j, asks for database
/// bit i by announcing the shift s = j − i (mod N). Bob shifts his key by
/// s and one-time-pads the database; Alice decrypts exactly position i.
pub fn qpq_private_query(
    bob_key: &[u8],
    alice_position: usize,
    query_index: usize,
    database: &[u8],
) -> Result<QueryOutcome> {
    let n = bob_key.len();
    if n == 0 || database.len() != n {
        return Err(Error::InvalidArgument(format!(
            "database and key lengths must match and be nonzero ({} vs {n})",
            database.len()
        )));
    }
    if alice_position >= n || query_index >= n {
        return Err(Error::InvalidArgument(format!(
            "positions ({alice_position}, {query_index}) out of range for length {n}"
        )));
    }
    let shift = (alice_position + n - query_index) % n;
    let encrypted: Vec<u8> = (0..n)
        .map(|m| database[m] ^ bob_key[(m + shift) % n])
        .collect();
    let retrieved_bit = encrypted[query_index] ^ bob_key[alice_position];
    Ok(QueryOutcome {
        retrieved_bit,
        encrypted,
        shift,
    })
}

// ---------------------------------------------------------------------------
// Nonlocal-game simulations
// ---------------------------------------------------------------------------

/// Empirical-vs-analytic outcome of a nonlocal-game run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GameResult {
    pub trials: usize,
    pub wins: usize,
    pub empirical: f64,
    pub analytic: f64,
    /// |empirical − analytic| ≤ 4·√(analytic(1−analytic)/trials).
    pub within_four_sigma: bool,
}

fn game_result(trials: usize, wins: usize, analytic: f64) -> GameResult {
    let empirical = wins as f64 / trials as f64;
    let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    GameResult {
        trials,
        wins,
        empirical,
        analytic,
        within_four_sigma: (empirical - analytic).abs() <= 4.0 * sigma,
    }
}

fn sample_categorical(probs: &[f64], sampler: &mut SeededSampler) -> usize {
    let u = sampler.uniform();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Analytic success probability of the local test:
/// (1/8)(sinθ(sinψ₁+sinψ₂) + cosψ₁ − cosψ₂) + 1/2.
pub fn chsh_analytic(theta: f64, psi1: f64, psi2: f64) -> f64 {
    (theta.sin() * (psi1.sin() + psi2.sin()) + psi1.cos() - psi2.cos()) / 8.0 + 0.5
}

/// Measurement kets for the local test. Bob (register B): x = 0 the
/// computational basis, x = 1 the Hadamard basis; outcome a = 0 picks the
/// first element. Alice (register A): the {|ψ⟩, |ψ⊥⟩} basis at angle ψ_y
/// with |ψ⟩ = cos(ψ/2)|0⟩ + sin(ψ/2)|1⟩.
fn chsh_outcome_table(theta: f64, psi1: f64, psi2: f64) -> [[f64; 4]; 4] {
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let bob_bases = [
        [
            CVector::from_vec(vec![cr(1.0), cr(0.0)]),
            CVector::from_vec(vec![cr(0.0), cr(1.0)]),
        ],
        [
            CVector::from_vec(vec![cr(inv_sqrt2), cr(inv_sqrt2)]),
            CVector::from_vec(vec![cr(inv_sqrt2), cr(-inv_sqrt2)]),
        ],
    ];
    let alice_basis = |psi: f64| {
        [
            CVector::from_vec(vec![cr((psi / 2.0).cos()), cr((psi / 2.0).sin())]),
            CVector::from_vec(vec![cr(-(psi / 2.0).sin()), cr((psi / 2.0).cos())]),
        ]
    };
    let alice_bases = [alice_basis(psi1), alice_basis(psi2)];

    // Shared state (1/√2)(|0⟩|φ₀⟩ + |1⟩|φ₁⟩) on (B, A).
    let mut state = CVector::zeros(4);
    let inv = cr(inv_sqrt2);
    for bit in 0..2usize {
        let phi = phi_state(theta, bit as u8);
        for a in 0..2 {
            state[bit * 2 + a] += phi[a] * inv;
        }
    }

    let mut table = [[0.0f64; 4]; 4];
    for x in 0..2usize {
        for y in 0..2usize {
            for a in 0..2usize {
                for b in 0..2usize {
                    let mut amp = c(0.0, 0.0);
                    for i in 0..2 {
                        for j in 0..2 {
                            amp += bob_bases[x][a][i].conj()
                                * alice_bases[y][b][j].conj()
                                * state[i * 2 + j];
                        }
                    }
                    table[x * 2 + y][a * 2 + b] = amp.norm_sqr();
                }
            }
        }
    }
    table
}

/// Exact success probability by enumerating settings and outcomes;
/// coincides with [`chsh_analytic`] and pins the measurement conventions.
pub fn chsh_exact_win_probability(theta: f64, psi1: f64, psi2: f64) -> f64 {
    let table = chsh_outcome_table(theta, psi1, psi2);
    let mut total = 0.0;
    for x in 0..2usize {
        for y in 0..2usize {
            for a in 0..2usize {
                for b in 0..2usize {
                    if (a ^ b) == (x & y) {
                        total += 0.25 * table[x * 2 + y][a * 2 + b];
                    }
                }
            }
        }
    }
    total
}

/// Monte Carlo run of the local test: uniform settings (x, y), Born-rule
/// outcomes, win iff a ⊕ b = x ∧ y.
pub fn chsh_local_test(
    theta: f64,
    psi1: f64,
    psi2: f64,
    trials: usize,
    sampler: &mut SeededSampler,
) -> Result<GameResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    for angle in [theta, psi1, psi2] {
        if !angle.is_finite() {
            return Err(Error::InvalidArgument("angles must be finite".into()));
        }
    }
    let table = chsh_outcome_table(theta, psi1, psi2);
    let mut wins = 0usize;
    for _ in 0..trials {
        let x = sampler.bit() as usize;
        let y = sampler.bit() as usize;
        let k = sample_categorical(&table[x * 2 + y], sampler);
        let (a, b) = (k / 2, k % 2);
        if (a ^ b) == (x & y) {
            wins += 1;
        }
    }
    Ok(game_result(trials, wins, chsh_analytic(theta, psi1, psi2)))
}

/// Analytic success probability (3 + cosθ)/4 of the three-qubit
/// pseudo-telepathy game on the ancilla-particle state.
pub fn pseudo_telepathy_analytic(theta: f64) -> f64 {
    (3.0 + theta.cos()) / 4.0
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), cr(1.0), cr(1.0), c(0.0, 0.0)])
}

fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

/// Win probability for each of the four even-parity input triples by exact
/// projector algebra: players measure X for input 0 and Y for input 1; the
/// outputs must satisfy a⊕b⊕c = r∨s∨t.
pub fn pseudo_telepathy_exact_win_probabilities(theta: f64) -> Result<[f64; 4]> {
    let state = qpq_ancilla_particle(theta)?;
    let inputs = [(0u8, 0u8, 0u8), (0, 1, 1), (1, 0, 1), (1, 1, 0)];
    let x = pauli_x();
    let y = pauli_y();
    let mut probs = [0.0f64; 4];
    for (idx, (r, s, t)) in inputs.iter().enumerate() {
        let ops: Vec<&CMatrix> = [r, s, t]
            .iter()
            .map(|&&bit| if bit == 0 { &x } else { &y })
            .collect();
        let big = crate::linalg::kron(&crate::linalg::kron(ops[0], ops[1]), ops[2]);
        let expectation = (state.dotc(&(&big * &state))).re;
        let target_parity = if *r | *s | *t == 0 { 0.0 } else { 1.0 };
        // P(parity p) = (1 + (−1)^p ⟨M₁M₂M₃⟩)/2.
        probs[idx] = (1.0 + (1.0 - 2.0 * target_parity) * expectation) / 2.0;
    }
    Ok(probs)
}

/// Monte Carlo run of the pseudo-telepathy game: inputs drawn uniformly
/// from the even-parity triples, X/Y measurements per input bit, win iff
/// the output parity matches the game rule. θ = 0 plays the perfect GHZ
/// strategy.
pub fn pseudo_telepathy_test(
    theta: f64,
    trials: usize,
    sampler: &mut SeededSampler,
) -> Result<GameResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in [0, π/2), got {theta}"
        )));
    }
    // θ = 0 degenerates the key states but the game state stays valid; the
    // construction below only needs the amplitudes, so evaluate them
    // directly when the constructor's open interval excludes θ.
    let state = if theta > 0.0 {
        qpq_ancilla_particle(theta)?
    } else {
        let inv = cr(1.0 / 2f64.sqrt());
        let mut v = CVector::zeros(8);
        v[0b000] = inv;
        v[0b111] = inv;
        v
    };

    let x = pauli_x();
    let y = pauli_y();
    let inputs = [(0u8, 0u8, 0u8), (0, 1, 1), (1, 0, 1), (1, 1, 0)];
    // Outcome distributions per input triple, indexed by the 3-bit outcome.
    let mut tables = Vec::with_capacity(4);
    for (r, s, t) in inputs {
        let mut probs = [0.0f64; 8];
        for outcome in 0..8usize {
            let mut projector = CMatrix::identity(1, 1);
            for (slot, &bit) in [r, s, t].iter().enumerate() {
                let m = if bit == 0 { &x } else { &y };
                let sign = if (outcome >> (2 - slot)) & 1 == 0 { 1.0 } else { -1.0 };
                let p = (CMatrix::identity(2, 2) + m * cr(sign)).scale(0.5);
                projector = crate::linalg::kron(&projector, &p);
            }
            probs[outcome] = (state.dotc(&(&projector * &state))).re.max(0.0);
        }
        tables.push(probs);
    }

    let mut wins = 0usize;
    for _ in 0..trials {
        let which = sampler.index(4);
        let (r, s, t) = inputs[which];
        let outcome = sample_categorical(&tables[which], sampler);
        let parity = (outcome.count_ones() & 1) as u8;
        if parity == (r | s | t) {
            wins += 1;
        }
    }
    Ok(game_result(trials, wins, pseudo_telepathy_analytic(theta)))
}
