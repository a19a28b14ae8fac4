//! Exact statevector engine for a single EPR pair.
//!
//! Every pair in a dialogue is an independent two-qubit system, so the joint
//! state never grows beyond four amplitudes. Amplitudes are stored in
//! computational-basis order `|00⟩, |01⟩, |10⟩, |11⟩` where the left qubit is
//! the half kept by the pair's creator ([`Half::Retained`]) and the right qubit
//! is the half sent across the channel ([`Half::Transmitted`]).
//!
//! Measurements draw from a [`RandomSource`], which is the only stateful piece
//! here. Everything else is value-in, value-out.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for every exact-arithmetic comparison.
pub const TOLERANCE: f64 = 1e-9;

/// Branch probabilities below this are numerical residue and never sampled.
const ZERO_PROBABILITY: f64 = 1e-12;

pub type Amplitude = Complex64;

const ZERO: Amplitude = Complex64::new(0.0, 0.0);
const ONE: Amplitude = Complex64::new(1.0, 0.0);
const HALF_ROOT: Amplitude = Complex64::new(FRAC_1_SQRT_2, 0.0);

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("amplitude {index} is not finite")]
    NonFinite { index: usize },
    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
}

/// Which qubit of a pair an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    /// Qubit 0, kept by whoever prepared the pair.
    Retained,
    /// Qubit 1, sent to the other party when the pair is distributed.
    Transmitted,
}

impl Half {
    pub fn index(self) -> usize {
        match self {
            Half::Retained => 0,
            Half::Transmitted => 1,
        }
    }

    pub fn other(self) -> Half {
        match self {
            Half::Retained => Half::Transmitted,
            Half::Transmitted => Half::Retained,
        }
    }
}

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasBasis {
    Z,
    X,
}

impl MeasBasis {
    pub const ALL: [MeasBasis; 2] = [MeasBasis::Z, MeasBasis::X];

    /// Eigenstate associated with outcome `bit` (`|0⟩/|1⟩` or `|+⟩/|−⟩`).
    pub fn eigenstate(self, bit: bool) -> QubitState {
        match (self, bit) {
            (MeasBasis::Z, false) => QubitState([ONE, ZERO]),
            (MeasBasis::Z, true) => QubitState([ZERO, ONE]),
            (MeasBasis::X, false) => QubitState([HALF_ROOT, HALF_ROOT]),
            (MeasBasis::X, true) => QubitState([HALF_ROOT, -HALF_ROOT]),
        }
    }
}

impl fmt::Display for MeasBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasBasis::Z => f.write_str("Z"),
            MeasBasis::X => f.write_str("X"),
        }
    }
}

/// The four Bell states, in serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellKind {
    #[serde(rename = "Phi+")]
    PhiPlus = 0,
    #[serde(rename = "Phi-")]
    PhiMinus = 1,
    #[serde(rename = "Psi+")]
    PsiPlus = 2,
    #[serde(rename = "Psi-")]
    PsiMinus = 3,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "Phi+",
            BellKind::PhiMinus => "Phi-",
            BellKind::PsiPlus => "Psi+",
            BellKind::PsiMinus => "Psi-",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The encoding operators.
///
/// | variant | operator              | gate |
/// |---------|-----------------------|------|
/// | `I`     | `|0⟩⟨0| + |1⟩⟨1|`     | I    |
/// | `X`     | `|0⟩⟨1| + |1⟩⟨0|`     | X    |
/// | `Z`     | `|0⟩⟨0| − |1⟩⟨1|`     | Z    |
/// | `ZX`    | `|0⟩⟨1| − |1⟩⟨0|`     | Z·X  |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Z,
    ZX,
}

impl PauliOp {
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::X, PauliOp::Z, PauliOp::ZX];

    /// Row-major 2×2 matrix. `ZX` is the product Z·X (X acts first).
    pub fn matrix(self) -> [[Amplitude; 2]; 2] {
        match self {
            PauliOp::I => [[ONE, ZERO], [ZERO, ONE]],
            PauliOp::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliOp::Z => [[ONE, ZERO], [ZERO, -ONE]],
            PauliOp::ZX => [[ZERO, ONE], [-ONE, ZERO]],
        }
    }

    pub fn gate_label(self) -> &'static str {
        match self {
            PauliOp::I => "I",
            PauliOp::X => "X",
            PauliOp::Z => "Z",
            PauliOp::ZX => "ZX",
        }
    }

    /// Operator name in the `U1..U4` numbering.
    pub fn operator_label(self) -> &'static str {
        match self {
            PauliOp::I => "U1",
            PauliOp::X => "U2",
            PauliOp::Z => "U3",
            PauliOp::ZX => "U4",
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.gate_label())
    }
}

/// A single-qubit pure state, used for carriers that travel without a partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState(pub [Amplitude; 2]);

impl QubitState {
    pub fn zero() -> Self {
        QubitState([ONE, ZERO])
    }
}

/// Joint pure state of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [Amplitude; 4],
}

fn basis_index(retained: usize, transmitted: usize) -> usize {
    retained * 2 + transmitted
}

impl TwoQubitState {
    pub fn from_amplitudes(amps: [Amplitude; 4]) -> Result<Self, StateError> {
        if let Some(index) = amps
            .iter()
            .position(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(StateError::NonFinite { index });
        }
        let state = TwoQubitState { amps };
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > TOLERANCE {
            return Err(StateError::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    /// Computational basis state `|retained transmitted⟩`.
    pub fn computational(retained: bool, transmitted: bool) -> Self {
        let mut amps = [ZERO; 4];
        amps[basis_index(retained as usize, transmitted as usize)] = ONE;
        TwoQubitState { amps }
    }

    /// `|retained⟩ ⊗ |transmitted⟩`. Inputs are normalized first.
    pub fn product(retained: QubitState, transmitted: QubitState) -> Self {
        let a = normalize_qubit(retained.0);
        let b = normalize_qubit(transmitted.0);
        let mut amps = [ZERO; 4];
        for i in 0..2 {
            for j in 0..2 {
                amps[basis_index(i, j)] = a[i] * b[j];
            }
        }
        TwoQubitState { amps }
    }

    pub fn amplitudes(&self) -> &[Amplitude; 4] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &TwoQubitState) -> Amplitude {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &TwoQubitState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Concurrence `2|a₀₀a₁₁ − a₀₁a₁₀|`: 0 for product states, 1 for Bell states.
    pub fn concurrence(&self) -> f64 {
        2.0 * (self.amps[0] * self.amps[3] - self.amps[1] * self.amps[2]).norm()
    }

    pub fn is_product(&self) -> bool {
        self.concurrence() < TOLERANCE
    }

    /// Applies a 2×2 matrix to one qubit, identity on the other.
    fn apply_local(&self, target: Half, m: &[[Amplitude; 2]; 2]) -> TwoQubitState {
        let mut out = [ZERO; 4];
        for other in 0..2 {
            let idx = |t: usize| match target {
                Half::Retained => basis_index(t, other),
                Half::Transmitted => basis_index(other, t),
            };
            let (a0, a1) = (self.amps[idx(0)], self.amps[idx(1)]);
            out[idx(0)] = m[0][0] * a0 + m[0][1] * a1;
            out[idx(1)] = m[1][0] * a0 + m[1][1] * a1;
        }
        TwoQubitState { amps: out }
    }

    /// Amplitudes of `target` projected on `e`, i.e. the unnormalized state of
    /// the remaining qubit: `(⟨e| ⊗ I)|ψ⟩`.
    fn project_onto(&self, target: Half, e: &QubitState) -> [Amplitude; 2] {
        let mut rest = [ZERO; 2];
        for (other, slot) in rest.iter_mut().enumerate() {
            for t in 0..2 {
                let idx = match target {
                    Half::Retained => basis_index(t, other),
                    Half::Transmitted => basis_index(other, t),
                };
                *slot += e.0[t].conj() * self.amps[idx];
            }
        }
        rest
    }
}

fn normalize_qubit(q: [Amplitude; 2]) -> [Amplitude; 2] {
    let norm = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
    [q[0] / norm, q[1] / norm]
}

/// Seeded generator driving every random choice in a simulation.
///
/// Backed by ChaCha8, so a `(seed, stream)` pair fully determines the output.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream of the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn basis(&mut self) -> MeasBasis {
        if self.rng.gen::<bool>() {
            MeasBasis::X
        } else {
            MeasBasis::Z
        }
    }

    /// Samples an index from unnormalized weights, skipping negligible entries.
    pub fn sample_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().filter(|w| **w > ZERO_PROBABILITY).sum();
        let mut r = self.uniform() * total;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= ZERO_PROBABILITY {
                continue;
            }
            last = i;
            if r < w {
                return i;
            }
            r -= w;
        }
        last
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

pub fn bell_state(kind: BellKind) -> TwoQubitState {
    let h = HALF_ROOT;
    let amps = match kind {
        BellKind::PhiPlus => [h, ZERO, ZERO, h],
        BellKind::PhiMinus => [h, ZERO, ZERO, -h],
        BellKind::PsiPlus => [ZERO, h, h, ZERO],
        BellKind::PsiMinus => [ZERO, h, -h, ZERO],
    };
    TwoQubitState { amps }
}

/// `U ⊗ I` when `target` is the retained half, `I ⊗ U` otherwise.
pub fn apply_pauli(state: &TwoQubitState, target: Half, op: PauliOp) -> TwoQubitState {
    state.apply_local(target, &op.matrix())
}

/// Projective measurement of one qubit. Returns the outcome bit and the
/// collapsed state, which is the product of the observed eigenstate with the
/// conditional state of the other qubit.
pub fn measure_single(
    state: &TwoQubitState,
    target: Half,
    basis: MeasBasis,
    rng: &mut RandomSource,
) -> (bool, TwoQubitState) {
    let branches = [false, true].map(|bit| {
        let e = basis.eigenstate(bit);
        let rest = state.project_onto(target, &e);
        (e, rest, rest[0].norm_sqr() + rest[1].norm_sqr())
    });
    let outcome = rng.sample_index(&[branches[0].2, branches[1].2]) == 1;
    let (e, rest, _) = branches[outcome as usize];
    let rest = QubitState(rest);
    let post = match target {
        Half::Retained => TwoQubitState::product(e, rest),
        Half::Transmitted => TwoQubitState::product(rest, e),
    };
    (outcome, post)
}

/// Measures both qubits in the same basis and consumes the pair.
/// Returns `(retained bit, transmitted bit)`.
pub fn measure_pair_in_basis(
    state: TwoQubitState,
    basis: MeasBasis,
    rng: &mut RandomSource,
) -> (bool, bool) {
    let weights: Vec<f64> = (0..4)
        .map(|k| {
            let joint =
                TwoQubitState::product(basis.eigenstate(k >> 1 == 1), basis.eigenstate(k & 1 == 1));
            joint.fidelity(&state)
        })
        .collect();
    let k = rng.sample_index(&weights);
    (k >> 1 == 1, k & 1 == 1)
}

/// Born-rule probabilities of the four Bell outcomes, indexed by [`BellKind::index`].
pub fn bell_distribution(state: &TwoQubitState) -> [f64; 4] {
    BellKind::ALL.map(|k| bell_state(k).fidelity(state))
}

/// Bell-basis measurement; consumes the pair.
pub fn bell_measure(state: TwoQubitState, rng: &mut RandomSource) -> BellKind {
    BellKind::ALL[rng.sample_index(&bell_distribution(&state))]
}
