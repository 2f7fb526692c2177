//! Continuous-time Markovian decoherence of stored pairs.
//!
//! Amplitude damping (rate γ₁ = 1/T₁) and dephasing (rate γ₂ = 1/T₂) act
//! locally on both qubits of a pair; the idling Hamiltonian is the identity,
//! so the unitary commutator vanishes and only the dissipators remain. Time
//! evolution uses a fixed-step classical RK4 integrator with a configurable
//! number of substeps.

use rand::Rng;
use thiserror::Error;

use crate::purify::{Protocol, PurifyError};
use crate::qstate::{
    dagger, singlet_fidelity, werner_state, CMat, DensityOperator, StateError, C64,
};

#[derive(Debug, Error)]
pub enum DecoherenceError {
    #[error("relaxation times must be positive: T1 = {t1}, T2 = {t2}")]
    InvalidMemoryParams { t1: f64, t2: f64 },
    #[error("integrator produced an invalid state (step size too large?): {0}")]
    StepFailed(#[from] StateError),
    #[error(transparent)]
    Purify(#[from] PurifyError),
}

/// T1/T2 relaxation times of a quantum memory, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MemoryParams {
    pub t1: f64,
    pub t2: f64,
}

impl MemoryParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self, DecoherenceError> {
        if t1 <= 0.0 || t2 <= 0.0 || !t1.is_finite() || !t2.is_finite() {
            return Err(DecoherenceError::InvalidMemoryParams { t1, t2 });
        }
        Ok(Self { t1, t2 })
    }

    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1
    }

    pub fn gamma2(&self) -> f64 {
        1.0 / self.t2
    }
}

/// Fixed-step RK4 configuration: the latency window is subdivided into
/// `substeps` equal steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub substeps: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { substeps: 1 }
    }
}

impl IntegratorConfig {
    pub fn new(substeps: u32) -> Self {
        assert!(substeps >= 1, "substeps must be >= 1");
        Self { substeps }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Jump operators on the pair space, in order
/// (√γ₁ σ⁻_A, √γ₁ σ⁻_B, √γ₂ σᶻ_A, √γ₂ σᶻ_B).
///
/// Rate convention is the literal γ_j = 1/T_j with L₂ = √γ₂ σᶻ; swap this
/// function to use a pure-dephasing rate instead.
pub fn jump_operators(mem: &MemoryParams) -> Vec<CMat> {
    let id = CMat::identity(2, 2);
    let mut sminus = CMat::zeros(2, 2);
    sminus[(0, 1)] = c(1.0, 0.0); // |1⟩ -> |0⟩
    let mut sz = CMat::zeros(2, 2);
    sz[(0, 0)] = c(1.0, 0.0);
    sz[(1, 1)] = c(-1.0, 0.0);

    let g1 = c(mem.gamma1().sqrt(), 0.0);
    let g2 = c(mem.gamma2().sqrt(), 0.0);
    vec![
        sminus.kronecker(&id) * g1,
        id.kronecker(&sminus) * g1,
        sz.kronecker(&id) * g2,
        id.kronecker(&sz) * g2,
    ]
}

/// Right-hand side dρ/dt = Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}).
pub fn lindblad_rhs(rho: &CMat, mem: &MemoryParams) -> CMat {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    let half = c(0.5, 0.0);
    for l in jump_operators(mem) {
        let ld = dagger(&l);
        let ldl = &ld * &l;
        out += &l * rho * &ld - (&ldl * rho + rho * &ldl) * half;
    }
    out
}

/// Evolve a pair state for `dt` seconds using `cfg.substeps` RK4 steps.
///
/// The output is Hermitized and trace-renormalized; the renormalization
/// correction stays below 1e-9 at the timescales of interest.
pub fn evolve(
    rho: &DensityOperator,
    dt: f64,
    mem: &MemoryParams,
    cfg: &IntegratorConfig,
) -> Result<DensityOperator, DecoherenceError> {
    assert!(dt >= 0.0, "dt must be non-negative");
    if dt == 0.0 {
        return Ok(rho.clone());
    }
    let h = dt / cfg.substeps as f64;
    let hc = c(h, 0.0);
    let mut state = rho.matrix().clone();
    for _ in 0..cfg.substeps {
        let k1 = lindblad_rhs(&state, mem);
        let k2 = lindblad_rhs(&(&state + &k1 * (hc * 0.5)), mem);
        let k3 = lindblad_rhs(&(&state + &k2 * (hc * 0.5)), mem);
        let k4 = lindblad_rhs(&(&state + &k3 * hc), mem);
        let two = c(2.0, 0.0);
        state += (k1 + k2 * two + k3 * two + k4) * (hc / 6.0);
    }
    Ok(DensityOperator::normalized(state)?)
}

/// Substep count keeping the dimensionless RK4 step dt·max(γ₁, γ₂)/ν at or
/// below 0.05, where truncation error is ~1e-8 per step.
pub fn auto_substeps(dt: f64, mem: &MemoryParams) -> u32 {
    let rate = mem.gamma1().max(mem.gamma2());
    ((dt * rate / 0.05).ceil() as u32).max(1)
}

/// Singlet fidelity of a Werner(F₀) state after idling for each latency.
pub fn fidelity_decay_curve(
    mem: &MemoryParams,
    latencies: &[f64],
    f0: f64,
) -> Result<Vec<(f64, f64)>, DecoherenceError> {
    let initial = werner_state(f0)?;
    decay_curve_from(&initial, mem, latencies)
}

/// Same as [`fidelity_decay_curve`] but from an arbitrary supplied state.
/// The substep count is chosen per point via [`auto_substeps`], so long
/// idles on fast-decaying memories stay stable.
pub fn decay_curve_from(
    initial: &DensityOperator,
    mem: &MemoryParams,
    latencies: &[f64],
) -> Result<Vec<(f64, f64)>, DecoherenceError> {
    latencies
        .iter()
        .map(|&t| {
            assert!(t >= 0.0, "latencies must be non-negative");
            let cfg = IntegratorConfig::new(auto_substeps(t, mem));
            let evolved = evolve(initial, t, mem, &cfg)?;
            Ok((t, singlet_fidelity(&evolved)))
        })
        .collect()
}

/// Per-substep-count deviation of round-loop fidelity trajectories.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub nus: Vec<u32>,
    /// `fidelities[i][r]` = post-round fidelity at round `r` for `nus[i]`.
    pub fidelities: Vec<Vec<f64>>,
    /// Max per-round absolute deviation of each ν from the largest ν.
    pub max_deviation: Vec<f64>,
}

/// Run the purification round-loop once per substep count and compare the
/// resulting fidelity trajectories against the finest integrator.
pub fn convergence_report<R: Rng + ?Sized>(
    mem: &MemoryParams,
    dt: f64,
    nus: &[u32],
    rounds: usize,
    protocol: Protocol,
    f0: f64,
    rng: &mut R,
) -> Result<ConvergenceReport, DecoherenceError> {
    assert!(!nus.is_empty(), "nus must be non-empty");
    let mut fidelities = Vec::with_capacity(nus.len());
    for &nu in nus {
        let cfg = IntegratorConfig::new(nu);
        let mut state = werner_state(f0)?;
        let mut track = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let out = protocol.run_round(&state, &state, rng)?;
            state = evolve(&out.output, dt, mem, &cfg)?;
            track.push(singlet_fidelity(&state));
        }
        fidelities.push(track);
    }
    let reference = nus
        .iter()
        .enumerate()
        .max_by_key(|(_, &nu)| nu)
        .map(|(i, _)| i)
        .unwrap();
    let max_deviation = fidelities
        .iter()
        .map(|track| {
            track
                .iter()
                .zip(fidelities[reference].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ConvergenceReport {
        nus: nus.to_vec(),
        fidelities,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::purify::DejmpsVariant;
    use crate::qstate::{bell_state, hermitian_eigen, random_state_with_fidelity, BellKind};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ca40() -> MemoryParams {
        MemoryParams::new(1.14, 0.5).unwrap()
    }

    #[test]
    fn memory_params_validation() {
        assert!(MemoryParams::new(0.0, 1.0).is_err());
        assert!(MemoryParams::new(1.0, -0.5).is_err());
        assert!(MemoryParams::new(1.14, 0.5).is_ok());
    }

    #[test]
    fn rhs_ground_state_fixed_point() {
        let mut ground = CMat::zeros(4, 4);
        ground[(0, 0)] = C64::new(1.0, 0.0);
        let d = lindblad_rhs(&ground, &ca40());
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn rhs_zero_rates() {
        let mem = MemoryParams::new(1e300, 1e300).unwrap();
        let w = werner_state(0.75).unwrap();
        assert!(lindblad_rhs(w.matrix(), &mem).norm() < 1e-14);
    }

    #[test]
    fn rhs_is_trace_free() {
        let w = werner_state(0.75).unwrap();
        let d = lindblad_rhs(w.matrix(), &ca40());
        assert!(d.trace().norm() < 1e-14);
    }

    #[test]
    fn evolve_zero_dt_is_identity() {
        let w = werner_state(0.75).unwrap();
        let out = evolve(&w, 0.0, &ca40(), &IntegratorConfig::default()).unwrap();
        assert_eq!(out.matrix(), w.matrix());
    }

    /// Dephasing-only singlet: F(t) = ½ + ½ e^{−4γ₂ t}, the closed-form
    /// solution of the symmetric two-qubit dephasing master equation (the
    /// |01⟩⟨10| coherence decays at rate 4γ₂).
    #[test]
    fn dephasing_only_singlet_closed_form() {
        let mem = MemoryParams::new(1e12, 0.5).unwrap();
        let singlet = bell_state(BellKind::PsiMinus).projector();
        let cfg = IntegratorConfig::new(50);
        for t in [0.001, 0.01, 0.05] {
            let out = evolve(&singlet, t, &mem, &cfg).unwrap();
            let expected = 0.5 + 0.5 * (-4.0 * mem.gamma2() * t).exp();
            assert_abs_diff_eq!(singlet_fidelity(&out), expected, epsilon = 1e-9);
        }
    }

    /// Dephasing-only Werner input: the off-singlet block contributes a
    /// constant, giving F(t) = (1+2F₀)/6 + (4F₀−1)/6 · e^{−4γ₂ t}.
    #[test]
    fn dephasing_only_werner_closed_form() {
        let mem = MemoryParams::new(1e12, 0.5).unwrap();
        let f0 = 0.75;
        let fine = IntegratorConfig::new(50);
        let w = werner_state(f0).unwrap();
        for t in [0.0, 0.005, 0.02, 0.05] {
            let expected =
                (1.0 + 2.0 * f0) / 6.0 + (4.0 * f0 - 1.0) / 6.0 * (-4.0 * mem.gamma2() * t).exp();
            let out = evolve(&w, t, &mem, &fine).unwrap();
            assert_abs_diff_eq!(singlet_fidelity(&out), expected, epsilon = 1e-9);
        }
        // The single-step convenience curve agrees to truncation error.
        let curve = fidelity_decay_curve(&mem, &[0.0, 0.005, 0.02, 0.05], f0).unwrap();
        for (t, f) in curve {
            let expected =
                (1.0 + 2.0 * f0) / 6.0 + (4.0 * f0 - 1.0) / 6.0 * (-4.0 * mem.gamma2() * t).exp();
            assert_abs_diff_eq!(f, expected, epsilon = 1e-4);
        }
    }

    #[test]
    fn single_step_matches_fine_integrator() {
        let w = werner_state(0.75).unwrap();
        let coarse = evolve(&w, 0.015, &ca40(), &IntegratorConfig::new(1)).unwrap();
        let fine = evolve(&w, 0.015, &ca40(), &IntegratorConfig::new(10)).unwrap();
        assert!((singlet_fidelity(&coarse) - singlet_fidelity(&fine)).abs() < 1e-6);
    }

    #[test]
    fn decay_curve_boundaries_and_monotonicity() {
        let curve = fidelity_decay_curve(&ca40(), &[0.0, 0.01, 0.02, 0.03, 0.05], 0.75).unwrap();
        assert_abs_diff_eq!(curve[0].1, 0.75, epsilon = 1e-12);
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12, "curve not non-increasing");
        }
        // noiseless memory: flat curve
        let flat = fidelity_decay_curve(
            &MemoryParams::new(1e300, 1e300).unwrap(),
            &[0.0, 0.05],
            0.75,
        )
        .unwrap();
        assert_abs_diff_eq!(flat[1].1, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn invariants_preserved_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = IntegratorConfig::default();
        for i in 0..1000 {
            let f = 0.999 * (i as f64 / 1000.0);
            let s = random_state_with_fidelity(f, &mut rng).unwrap();
            let out = evolve(&s, 0.02, &ca40(), &cfg).unwrap();
            // construction already enforced Hermiticity/trace; check PSD margin
            let (vals, _) = hermitian_eigen(out.matrix());
            assert!(vals[0] >= -1e-10);
        }
    }

    #[test]
    fn trace_drift_before_renormalization() {
        // raw RK4 step without normalization
        let w = werner_state(0.75).unwrap();
        let h = C64::new(0.05, 0.0);
        let mem = ca40();
        let s = w.matrix();
        let k1 = lindblad_rhs(s, &mem);
        let k2 = lindblad_rhs(&(s + &k1 * (h * 0.5)), &mem);
        let k3 = lindblad_rhs(&(s + &k2 * (h * 0.5)), &mem);
        let k4 = lindblad_rhs(&(s + &k3 * h), &mem);
        let two = C64::new(2.0, 0.0);
        let stepped = s + (k1 + k2 * two + k3 * two + k4) * (h / 6.0);
        assert!((stepped.trace().re - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn semigroup_property() {
        let w = werner_state(0.75).unwrap();
        let mem = ca40();
        let (t1, t2) = (0.02, 0.025);
        let whole = evolve(&w, t1 + t2, &mem, &IntegratorConfig::new(20)).unwrap();
        let first = evolve(&w, t1, &mem, &IntegratorConfig::new(10)).unwrap();
        let split = evolve(&first, t2, &mem, &IntegratorConfig::new(10)).unwrap();
        let dist = (whole.matrix() - split.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dist < 1e-8, "semigroup deviation {dist:.3e}");
    }

    #[test]
    fn werner_fidelity_strictly_decreases() {
        for f0 in [0.55, 0.75, 0.95, 1.0] {
            for dt in [0.001, 0.01, 0.05] {
                let w = werner_state(f0).unwrap();
                let out = evolve(&w, dt, &ca40(), &IntegratorConfig::default()).unwrap();
                assert!(
                    singlet_fidelity(&out) < f0,
                    "F0={f0}, dt={dt}: fidelity did not decrease"
                );
            }
        }
    }

    #[test]
    fn convergence_single_nu_is_exact_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let report = convergence_report(
            &ca40(),
            0.015,
            &[3],
            10,
            Protocol::Dejmps {
                variant: DejmpsVariant::default(),
            },
            0.75,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.max_deviation, vec![0.0]);
    }

    #[test]
    fn convergence_baseline_and_stressed() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let protocol = Protocol::Dejmps {
            variant: DejmpsVariant::default(),
        };
        let mut base_dev_nu1 = 0.0;
        for dt in [0.005, 0.015] {
            let report =
                convergence_report(&ca40(), dt, &[1, 2, 10], 30, protocol, 0.75, &mut rng).unwrap();
            for (nu, dev) in report.nus.iter().zip(report.max_deviation.iter()) {
                assert!(*dev < 1e-6, "nu={nu} dt={dt}: deviation {dev:.3e}");
            }
            if dt == 0.015 {
                base_dev_nu1 = report.max_deviation[0];
            }
        }
        let stressed = MemoryParams::new(1.14 / 20.0, 0.5 / 20.0).unwrap();
        let report =
            convergence_report(&stressed, 0.015, &[1, 10], 30, protocol, 0.75, &mut rng).unwrap();
        assert!(
            report.max_deviation[0] > 10.0 * base_dev_nu1,
            "stressed nu=1 deviation {:.3e} not > 10x baseline {:.3e}",
            report.max_deviation[0],
            base_dev_nu1
        );
    }
}
