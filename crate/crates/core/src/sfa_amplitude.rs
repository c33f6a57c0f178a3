//! SFA direct-orbit action, prefactor and saddle-point amplitude.

use crate::error::{domain, Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_times::{grouped_times, is_beyond_stokes, Group, IonizationSolution, StokesVerdict};
use num_complex::Complex64 as C;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SfaOrbit {
    A,
    B,
}

impl SfaOrbit {
    pub fn group(self) -> Group {
        match self {
            SfaOrbit::A => Group::T1,
            SfaOrbit::B => Group::T2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DipoleModel {
    #[default]
    Unit,
    Hydrogenic1s,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StokesPolicy {
    /// Keep both saddles for eps ≤ 0.35, discard past the transition above.
    #[default]
    Auto,
    KeepBoth,
    Discard,
}

impl StokesPolicy {
    pub fn discards(self, eps: f64) -> bool {
        match self {
            StokesPolicy::Auto => eps > 0.35,
            StokesPolicy::KeepBoth => false,
            StokesPolicy::Discard => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfaOrbitContribution {
    pub t_prime: C,
    pub action: C,
    pub prefactor: C,
    pub amplitude: C,
    pub orbit_label: SfaOrbit,
}

/// S = (p²/2 + Ip + Up)t' + Up(1−ε²)/(2ω(1+ε²)) sin 2θ + (a/ω)(p_z sin θ − ε p_x cos θ).
pub fn direct_action(field: &LaserField, atom: &TargetAtom, p: Vec2, t_prime: C) -> C {
    let th = field.phase(t_prime);
    let e2 = field.eps * field.eps;
    let p2 = p[0] * p[0] + p[1] * p[1];
    let k = field.amplitude() / field.omega;
    t_prime * (0.5 * p2 + atom.ip + field.up)
        + (th * 2.0).sin() * (field.up * (1.0 - e2) / (2.0 * field.omega * (1.0 + e2)))
        + (th.sin() * p[0] - th.cos() * (field.eps * p[1])) * k
}

/// ∂²S/∂t'² = (p + A)·dA/dt.
pub fn action_second_derivative(field: &LaserField, p: Vec2, t_prime: C) -> C {
    let a = field.vector_potential(t_prime);
    let da = field.vector_potential_rate(t_prime);
    let s2 = (a[0] + p[0]) * da[0] + (a[1] + p[1]) * da[1];
    if s2.norm() < 1e-3 {
        log::warn!("coalescing saddles: |S''| = {:e} at t' = {t_prime}", s2.norm());
    }
    s2
}

/// Inter-cycle action increment (2π/ω)(p²/2 + Ip + Up).
pub fn cycle_increment(field: &LaserField, atom: &TargetAtom, p: Vec2) -> f64 {
    field.period() * (0.5 * (p[0] * p[0] + p[1] * p[1]) + atom.ip + field.up)
}

/// Bound-state matrix element ⟨p + A(t')|r·E(t')|ψ0⟩.
///
/// For the 1s model (κ = √(2Ip)) the element has a third-order pole at the
/// saddle. There the returned value is the effective element d_eff for which
/// √(2πi/S'')·d_eff equals the pole-regularized Gaussian integral
/// g·(2S'')⁻³·w⁻²·J₃, w = √(i/S''), J₃ = −iπ/2 (contour below the pole).
pub fn dipole_matrix_element(atom: &TargetAtom, field: &LaserField, p: Vec2, t_prime: C, model: DipoleModel) -> C {
    match model {
        DipoleModel::Unit => C::from(1.0),
        DipoleModel::Hydrogenic1s => {
            let kappa2 = 2.0 * atom.ip;
            let norm = 2f64.powf(1.5) * kappa2.powf(1.25) / PI;
            let a = field.vector_potential(t_prime);
            let e = field.electric_field(t_prime);
            let v = [a[0] + p[0], a[1] + p[1]];
            let g = C::new(0.0, -4.0 * norm) * (e[0] * v[0] + e[1] * v[1]);
            let d = v[0] * v[0] + v[1] * v[1] + kappa2;
            if d.norm() > 1e-6 * kappa2 {
                return g / (d * d * d);
            }
            let s2 = action_second_derivative(field, p, t_prime);
            let w = (C::i() / s2).sqrt();
            let j3 = C::new(0.0, -PI / 2.0);
            let fused = g / (s2 * 2.0).powi(3) / (w * w) * j3;
            fused / (C::new(0.0, 2.0 * PI) / s2).sqrt()
        }
    }
}

pub fn orbit_amplitude(field: &LaserField, atom: &TargetAtom, p: Vec2, sol: &IonizationSolution, model: DipoleModel) -> Result<SfaOrbitContribution> {
    if sol.stokes_discarded {
        return Err(Error::Rejected("saddle discarded past a Stokes transition".into()));
    }
    let t = sol.t_prime;
    let action = direct_action(field, atom, p, t);
    let s2 = action_second_derivative(field, p, t);
    let prefactor = (C::new(0.0, 2.0 * PI) / s2).sqrt() * dipole_matrix_element(atom, field, p, t, model);
    Ok(SfaOrbitContribution {
        t_prime: t,
        action,
        prefactor,
        amplitude: prefactor * (C::i() * action).exp(),
        orbit_label: match sol.group {
            Group::T1 => SfaOrbit::A,
            Group::T2 => SfaOrbit::B,
        },
    })
}

/// Σ_{k<n} e^{ikΔ}.
pub fn cycle_sum(delta: f64, n_cycles: u32) -> C {
    (0..n_cycles).map(|k| C::from_polar(1.0, k as f64 * delta)).sum()
}

/// Single-cycle orbit amplitudes (a, b) at p, None where discarded.
pub fn sfa_orbit_amplitudes(field: &LaserField, atom: &TargetAtom, p: Vec2, model: DipoleModel, stokes: StokesPolicy) -> Result<[Option<C>; 2]> {
    let (mut t1, mut t2) = grouped_times(field, atom, p, 0)?;
    if stokes.discards(field.eps) {
        match is_beyond_stokes(field, atom, p)? {
            StokesVerdict::KeepBoth => {}
            StokesVerdict::DiscardT1 => t1.stokes_discarded = true,
            StokesVerdict::DiscardT2 => t2.stokes_discarded = true,
        }
    }
    let amp = |s: &IonizationSolution| -> Result<Option<C>> {
        if s.stokes_discarded {
            Ok(None)
        } else {
            Ok(Some(orbit_amplitude(field, atom, p, s, model)?.amplitude))
        }
    };
    Ok([amp(&t1)?, amp(&t2)?])
}

/// Coherent sum over the selected orbits and cycles 0..n_cycles−1.
pub fn sfa_transition_amplitude(
    field: &LaserField,
    atom: &TargetAtom,
    p: Vec2,
    orbits: &[SfaOrbit],
    n_cycles: u32,
    model: DipoleModel,
    stokes: StokesPolicy,
) -> Result<C> {
    if orbits.is_empty() {
        return domain("empty orbit set");
    }
    if n_cycles == 0 {
        return domain("n_cycles must be at least 1");
    }
    let amps = sfa_orbit_amplitudes(field, atom, p, model, stokes)?;
    let mut m = C::from(0.0);
    for o in orbits {
        if let Some(a) = amps[*o as usize] {
            m += a;
        }
    }
    Ok(m * cycle_sum(cycle_increment(field, atom, p), n_cycles))
}
