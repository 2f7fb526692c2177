//! BBPSSW and DEJMPS purification kernels plus twirling operations.
//!
//! Both protocols act on exact 16×16 joint states in the (A, B, A′, B′)
//! ordering: local pre-rotations, the bilateral CNOT (BXOR), Z-basis
//! post-selection on matching (A′, B′) outcomes, partial trace over the
//! measured pair, and a final local Y-rotation on the kept pair.

use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

#[cfg(test)]
use crate::qstate::{bell_state, BellKind};
use crate::qstate::{
    dagger, embed_pair_pair, haar_unitary, partial_trace_target, random_state_with_fidelity,
    singlet_fidelity, werner_state, CMat, DensityOperator, StateError, C64,
};

#[derive(Debug, Error)]
pub enum PurifyError {
    #[error("success probability {0:.3e} below 1e-12; post-selected state undefined")]
    DegenerateSuccess(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

/// How (or whether) inputs are brought to Werner form before a BBPSSW round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlMode {
    #[default]
    Deterministic,
    HaarRandom,
    None,
}

/// Which single-qubit rotations the DEJMPS pre-measurement operation uses.
///
/// `ConjugateB` (u₁ at node A, u₁* at node B) is the default: it reproduces
/// the canonical DEJMPS recursion and yields strict fidelity gain above
/// threshold, whereas `AsWritten` (u₁ at both nodes) destroys the singlet
/// component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DejmpsVariant {
    AsWritten,
    #[default]
    ConjugateB,
}

/// Result of one purification round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    /// Probability that the Z-outcomes at A′ and B′ match.
    pub success_prob: f64,
    /// Post-selected, renormalized output pair state.
    pub output: DensityOperator,
    pub input_fidelity: f64,
    pub output_fidelity: f64,
}

/// Protocol selector used by the round-loop machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Protocol {
    Bbpssw {
        #[serde(default)]
        twirl: TwirlMode,
    },
    Dejmps {
        #[serde(default)]
        variant: DejmpsVariant,
    },
}

impl Protocol {
    pub fn run_round<R: Rng + ?Sized>(
        &self,
        rho1: &DensityOperator,
        rho2: &DensityOperator,
        rng: &mut R,
    ) -> Result<RoundOutcome, PurifyError> {
        match self {
            Protocol::Bbpssw { twirl } => bbpssw_round(rho1, rho2, *twirl, rng),
            Protocol::Dejmps { variant } => dejmps_round(rho1, rho2, *variant),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Bbpssw { .. } => "bbpssw",
            Protocol::Dejmps { .. } => "dejmps",
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn identity2() -> CMat {
    CMat::identity(2, 2)
}

fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

/// The four single-qubit rotations generating the deterministic twirl.
fn twirl_generators() -> [CMat; 4] {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let u1 = (identity2() + sigma_x() * c(0.0, 1.0)) * s;
    let u2 = (identity2() - sigma_y() * c(0.0, 1.0)) * s;
    let u3 = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let u4 = identity2();
    [u1, u2, u3, u4]
}

/// σ_y ⊗ I on a single pair (the unilateral Y-rotation at node A).
fn y_rotation_pair() -> &'static CMat {
    static M: OnceLock<CMat> = OnceLock::new();
    M.get_or_init(|| sigma_y().kronecker(&identity2()))
}

/// CNOT on the 4-qubit register; `control`/`target` index qubits in the
/// (A, B, A′, B′) order.
fn cnot(control: usize, target: usize) -> CMat {
    let mut m = CMat::zeros(16, 16);
    for i in 0..16 {
        let mut bits = [(i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1];
        if bits[control] == 1 {
            bits[target] ^= 1;
        }
        let j = bits[0] * 8 + bits[1] * 4 + bits[2] * 2 + bits[3];
        m[(j, i)] = c(1.0, 0.0);
    }
    m
}

/// Bilateral exclusive OR: CNOT_{A→A′} · CNOT_{B→B′}.
fn bxor() -> &'static CMat {
    static M: OnceLock<CMat> = OnceLock::new();
    M.get_or_init(|| cnot(0, 2) * cnot(1, 3))
}

/// POVM elements projecting the measured (A′, B′) pair onto |00⟩ and |11⟩.
/// The remaining outcome mass, I − P₀ − P₁, is the discarded failure branch.
pub fn povm_elements() -> &'static (CMat, CMat) {
    static M: OnceLock<(CMat, CMat)> = OnceLock::new();
    M.get_or_init(|| {
        let i4 = CMat::identity(4, 4);
        let mut k00 = CMat::zeros(4, 4);
        k00[(0, 0)] = c(1.0, 0.0);
        let mut k11 = CMat::zeros(4, 4);
        k11[(3, 3)] = c(1.0, 0.0);
        (i4.kronecker(&k00), i4.kronecker(&k11))
    })
}

/// Deterministic twirl: the 12-term Kraus map built from bilateral
/// π-rotations (inner sum) followed by bilateral π/2-rotations (outer sum).
/// Maps any state to the Werner form with the same singlet fidelity.
pub fn deterministic_twirl(rho: &DensityOperator) -> DensityOperator {
    let us = twirl_generators();
    let bilateral: Vec<CMat> = us.iter().map(|u| u.kronecker(u)).collect();
    let mut inner = CMat::zeros(4, 4);
    for t in &bilateral {
        let tt = t * t;
        inner += &tt * rho.matrix() * dagger(&tt);
    }
    let mut outer = CMat::zeros(4, 4);
    for t in &bilateral[..3] {
        outer += t * &inner * dagger(t);
    }
    DensityOperator::normalized(outer / c(12.0, 0.0)).expect("twirl of a valid state stays valid")
}

/// Haar-random twirl: a single U ~ Haar(2) applied as U ⊗ U to both parties.
/// The singlet is invariant under U ⊗ U up to phase, so singlet fidelity is
/// preserved for every draw.
pub fn haar_twirl<R: Rng + ?Sized>(rho: &DensityOperator, rng: &mut R) -> DensityOperator {
    let u = haar_unitary(2, rng);
    rho.conjugate_by(&u.kronecker(&u))
}

/// Shared measure-and-exchange step: embed, BXOR, post-select matching Z
/// outcomes, trace out the measured pair, undo the Y-rotation on the kept one.
fn measure_exchange(
    s1: &DensityOperator,
    s2: &DensityOperator,
) -> Result<(f64, DensityOperator), PurifyError> {
    let joint = embed_pair_pair(s1, s2);
    let bx = bxor();
    let mixed = bx * joint.matrix() * dagger(bx);
    let (p0, p1) = povm_elements();
    let projected = p0 * &mixed * p0 + p1 * &mixed * p1;
    let success = projected.trace().re;
    if success < 1e-12 {
        return Err(PurifyError::DegenerateSuccess(success));
    }
    let kept = partial_trace_target(&(projected / c(success, 0.0)));
    let y = y_rotation_pair();
    let out = DensityOperator::normalized(y * kept * dagger(y))?;
    Ok((success, out))
}

/// One BBPSSW round on two pair states.
///
/// Inputs are twirled to Werner form per `twirl` (the protocol's input
/// precondition), Y-rotated at node A, then run through the shared
/// measure-and-exchange step.
pub fn bbpssw_round<R: Rng + ?Sized>(
    rho1: &DensityOperator,
    rho2: &DensityOperator,
    twirl: TwirlMode,
    rng: &mut R,
) -> Result<RoundOutcome, PurifyError> {
    let input_fidelity = 0.5 * (singlet_fidelity(rho1) + singlet_fidelity(rho2));
    let prep = |rho: &DensityOperator, rng: &mut R| match twirl {
        TwirlMode::Deterministic => deterministic_twirl(rho),
        TwirlMode::HaarRandom => haar_twirl(rho, rng),
        TwirlMode::None => rho.clone(),
    };
    let y = y_rotation_pair();
    let s1 = prep(rho1, rng).conjugate_by(y);
    let s2 = prep(rho2, rng).conjugate_by(y);
    let (success_prob, output) = measure_exchange(&s1, &s2)?;
    let output_fidelity = singlet_fidelity(&output);
    Ok(RoundOutcome {
        success_prob,
        output,
        input_fidelity,
        output_fidelity,
    })
}

/// One DEJMPS round on two pair states; no Werner precondition.
pub fn dejmps_round(
    rho1: &DensityOperator,
    rho2: &DensityOperator,
    variant: DejmpsVariant,
) -> Result<RoundOutcome, PurifyError> {
    let input_fidelity = 0.5 * (singlet_fidelity(rho1) + singlet_fidelity(rho2));
    let u1 = &twirl_generators()[0];
    let r = match variant {
        DejmpsVariant::AsWritten => u1.kronecker(u1),
        DejmpsVariant::ConjugateB => u1.kronecker(&u1.map(|z| z.conj())),
    };
    let s1 = rho1.conjugate_by(&r);
    let s2 = rho2.conjugate_by(&r);
    let (success_prob, output) = measure_exchange(&s1, &s2)?;
    let output_fidelity = singlet_fidelity(&output);
    Ok(RoundOutcome {
        success_prob,
        output,
        input_fidelity,
        output_fidelity,
    })
}

/// Closed-form BBPSSW recursion for Werner inputs with deterministic twirl:
/// F′ = [F² + ((1−F)/3)²] / D and p = D = F² + (2/3)F(1−F) + 5((1−F)/3)².
pub fn analytic_bbpssw(f: f64) -> (f64, f64) {
    let rest = (1.0 - f) / 3.0;
    let denom = f * f + 2.0 * f * rest + 5.0 * rest * rest;
    ((f * f + rest * rest) / denom, denom)
}

/// Monte-Carlo means with standard errors for the single-round protocol gap.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ProtocolDelta {
    pub mean_delta_fidelity: f64,
    pub se_delta_fidelity: f64,
    pub mean_delta_success: f64,
    pub se_delta_success: f64,
    pub samples: usize,
}

/// Single-round DEJMPS-minus-BBPSSW gap over random initial states.
///
/// Each sample draws one random state with exact fidelity `f` and feeds two
/// copies to DEJMPS (symmetric matched-fidelity scheduling). The BBPSSW
/// reference is the deterministic-twirl round, which on any fixed-fidelity
/// input reduces exactly to the Werner-input value.
pub fn protocol_delta<R: Rng + ?Sized>(
    f: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ProtocolDelta, PurifyError> {
    assert!(samples >= 1, "samples must be >= 1");
    let w = werner_state(f)?;
    let baseline = bbpssw_round(&w, &w, TwirlMode::Deterministic, rng)?;
    let mut df = Vec::with_capacity(samples);
    let mut dp = Vec::with_capacity(samples);
    for _ in 0..samples {
        let state = random_state_with_fidelity(f, rng)?;
        let out = dejmps_round(&state, &state, DejmpsVariant::default())?;
        df.push(out.output_fidelity - baseline.output_fidelity);
        dp.push(out.success_prob - baseline.success_prob);
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, (var / n).sqrt())
    };
    let (mf, sf) = stats(&df);
    let (mp, sp) = stats(&dp);
    Ok(ProtocolDelta {
        mean_delta_fidelity: mf,
        se_delta_fidelity: sf,
        mean_delta_success: mp,
        se_delta_success: sp,
        samples,
    })
}
