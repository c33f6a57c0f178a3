//! Two-leg CQSFA saddles: sub-barrier leg, Newton shooting, labels and amplitude.

use super::propagate::{asymptotic_jacobian, asymptotic_momentum, coulomb_tail, propagate_with, Tolerances, Trajectory};
use crate::error::{domain, Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_amplitude::{action_second_derivative, dipole_matrix_element, DipoleModel};
use crate::sfa_times::{grouped_times, Group};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C;
use std::f64::consts::PI;
use std::fmt;

/// Continuation class: seed group × sweep sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolutionClass {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepDirection {
    Clockwise,
    CounterClockwise,
}

impl SolutionClass {
    pub const ALL: [SolutionClass; 4] = [SolutionClass::A, SolutionClass::B, SolutionClass::C, SolutionClass::D];

    pub fn from_parts(group: Group, direction: SweepDirection) -> Self {
        match (group, direction) {
            (Group::T1, SweepDirection::CounterClockwise) => SolutionClass::A,
            (Group::T1, SweepDirection::Clockwise) => SolutionClass::B,
            (Group::T2, SweepDirection::CounterClockwise) => SolutionClass::C,
            (Group::T2, SweepDirection::Clockwise) => SolutionClass::D,
        }
    }

    pub fn seed_group(self) -> Group {
        match self {
            SolutionClass::A | SolutionClass::B => Group::T1,
            SolutionClass::C | SolutionClass::D => Group::T2,
        }
    }

    pub fn direction(self) -> SweepDirection {
        match self {
            SolutionClass::A | SolutionClass::C => SweepDirection::CounterClockwise,
            SolutionClass::B | SolutionClass::D => SweepDirection::Clockwise,
        }
    }

    /// Angle of the seed ray, measured from +p_z towards +p_x.
    pub fn seed_angle(self) -> f64 {
        match self.seed_group() {
            Group::T1 => 0.0,
            Group::T2 => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrbitLabel {
    A,
    B,
    C,
    D,
}

impl OrbitLabel {
    pub const ALL: [OrbitLabel; 4] = [OrbitLabel::A, OrbitLabel::B, OrbitLabel::C, OrbitLabel::D];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "a" => Ok(OrbitLabel::A),
            "b" => Ok(OrbitLabel::B),
            "c" => Ok(OrbitLabel::C),
            "d" => Ok(OrbitLabel::D),
            other => domain(format!("unknown orbit label '{other}'")),
        }
    }
}

impl fmt::Display for OrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            OrbitLabel::A => "a",
            OrbitLabel::B => "b",
            OrbitLabel::C => "c",
            OrbitLabel::D => "d",
        };
        f.write_str(c)
    }
}

/// Linear-polarization orbit numbering 1–4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LegacyLabel {
    One = 1,
    Two = 2,
    Three = 3,
    Four = 4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSeed {
    pub t_prime: C,
    pub p0: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSolution {
    pub t_prime: C,
    pub p0: Vec2,
    pub exit_position: Vec2,
    pub pf: Vec2,
    pub target: Vec2,
    pub action: C,
    pub stability_det: C,
    /// Phase of (det + i0): 0 or π.
    pub maslov_phase: f64,
    pub class_label: Option<SolutionClass>,
    pub orbit_label: OrbitLabel,
    pub legacy_label: LegacyLabel,
    pub label_tie: bool,
    pub iterations: u32,
    pub residual: f64,
}

impl OrbitSolution {
    pub fn seed(&self) -> OrbitSeed {
        OrbitSeed { t_prime: self.t_prime, p0: self.p0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqsfaOptions {
    /// Field cycles of propagation after the first one.
    pub n_prop_cycles: u32,
    pub max_iterations: u32,
    pub fd_step: f64,
    pub tolerance: f64,
}

impl Default for CqsfaOptions {
    fn default() -> Self {
        Self { n_prop_cycles: 20, max_iterations: 50, fd_step: 1e-6, tolerance: 1e-8 }
    }
}

impl CqsfaOptions {
    /// Field switch-off time for an orbit born at t_r: the start of its half
    /// cycle plus (1 + n_prop_cycles) periods, so inversion partners propagate
    /// through identical field histories.
    pub fn horizon(&self, field: &LaserField, t_r: f64) -> f64 {
        let half = (field.phase(C::from(t_r)).re / PI).floor();
        (half * PI - field.phi) / field.omega + (1 + self.n_prop_cycles) as f64 * field.period()
    }
}

/// r(Re t') = Re[∫_{t'}^{Re t'} (p0 + A) dτ]; the p0 term is purely imaginary.
pub fn tunnel_exit(field: &LaserField, p0: Vec2, t_prime: C) -> Vec2 {
    let _ = p0;
    let g1 = field.a_integral(C::from(t_prime.re));
    let g0 = field.a_integral(t_prime);
    [(g1[0] - g0[0]).re, (g1[1] - g0[1]).re]
}

/// F_p(t) = ∫^t (p + A)² dτ.
fn kinetic_antiderivative(field: &LaserField, p: Vec2, t: C) -> C {
    let g = field.a_integral(t);
    t * (p[0] * p[0] + p[1] * p[1]) + (g[0] * p[0] + g[1] * p[1]) * 2.0 + field.a_squared_integral(t)
}

/// ip·t' − ∫_{t'}^{Re t'} ½(p0 + A)² dτ.
pub fn sub_barrier_action(field: &LaserField, atom: &TargetAtom, p0: Vec2, t_prime: C) -> C {
    let tr = C::from(t_prime.re);
    t_prime * atom.ip - (kinetic_antiderivative(field, p0, tr) - kinetic_antiderivative(field, p0, t_prime)) * 0.5
}

/// Continuum-leg action −∫(ṗ·r + H)dτ plus the Coulomb tail and the
/// field-free reference phase of the final momentum.
pub fn real_time_action(traj: &Trajectory, atom: &TargetAtom, field: &LaserField, pf: Vec2) -> Result<C> {
    let s = traj.start();
    let e = traj.end();
    let dot = |a: Vec2, b: Vec2| a[0] * b[0] + a[1] * b[1];
    let ia = field.a_squared_integral_real(traj.t_field_off) - field.a_squared_integral_real(traj.t_start);
    let leg = -dot(e.p, e.r) + dot(s.p, s.r) + traj.q_integral - 0.5 * ia;
    let tail = coulomb_tail(atom, e.r, e.p)?;
    let t_off = traj.t_field_off;
    let reference = 0.5 * kinetic_antiderivative(field, pf, C::from(t_off)).re + 0.5 * dot(pf, pf) * (traj.t_end - t_off);
    Ok(C::from(leg + tail + reference))
}

/// (p0 + A(t'))² + 2ip.
pub fn tunneling_residual(field: &LaserField, atom: &TargetAtom, p0: Vec2, t_prime: C) -> C {
    let a = field.vector_potential(t_prime);
    let v = [a[0] + p0[0], a[1] + p0[1]];
    v[0] * v[0] + v[1] * v[1] + 2.0 * atom.ip
}

/// SFA seed: the grouped time of the requested group at p, with p0 = p.
pub fn sfa_seed(field: &LaserField, atom: &TargetAtom, p: Vec2, group: Group) -> Result<OrbitSeed> {
    let (t1, t2) = grouped_times(field, atom, p, 0)?;
    let t = match group {
        Group::T1 => t1.t_prime,
        Group::T2 => t2.t_prime,
    };
    Ok(OrbitSeed { t_prime: t, p0: p })
}

struct Evaluation {
    residual: [f64; 4],
    traj: Trajectory,
    pf: Vec2,
    exit: Vec2,
}

fn evaluate(field: &LaserField, atom: &TargetAtom, x: &[f64; 4], target: Vec2, t_off: f64) -> Result<Evaluation> {
    let t_prime = C::new(x[0], x[1]);
    if !(x[1] > 0.0) {
        return domain("Im t' must be positive");
    }
    let p0 = [x[2], x[3]];
    let f = tunneling_residual(field, atom, p0, t_prime);
    let exit = tunnel_exit(field, p0, t_prime);
    let traj = propagate_with(field, atom, exit, p0, x[0], t_off, true, Tolerances::default())?;
    let e = traj.end();
    let pf = asymptotic_momentum(atom, e.r, e.p)?;
    Ok(Evaluation { residual: [f.re, f.im, pf[0] - target[0], pf[1] - target[1]], traj, pf, exit })
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle swept from a class's seed ray to `p` in the class's sense: [0, 2π)
/// counterclockwise, (0, 2π] clockwise, 0 at the origin.
pub fn swept_angle(class: SolutionClass, p: Vec2) -> f64 {
    // the origin keeps the direct label
    if p == [0.0, 0.0] {
        return 0.0;
    }
    let th = p[1].atan2(p[0]);
    let s = class.seed_angle();
    match class.direction() {
        SweepDirection::CounterClockwise => (th - s).rem_euclid(2.0 * PI),
        SweepDirection::Clockwise => {
            let u = (s - th).rem_euclid(2.0 * PI);
            if u == 0.0 {
                2.0 * PI
            } else {
                u
            }
        }
    }
}

/// Orbit of a continued class at p: within half a turn of the seed ray the
/// class stays direct (a for t1 seeds, b for t2), beyond it has wound past the
/// core (d, c). On the opposite ray the counter-clockwise class is direct and
/// the clockwise one flipped, so the two solutions there keep distinct labels.
pub fn class_orbit(class: SolutionClass, p: Vec2) -> OrbitLabel {
    let swept = swept_angle(class, p);
    let direct = swept < PI || (swept == PI && class.direction() == SweepDirection::CounterClockwise);
    match (class.seed_group(), direct) {
        (Group::T1, true) => OrbitLabel::A,
        (Group::T1, false) => OrbitLabel::D,
        (Group::T2, true) => OrbitLabel::B,
        (Group::T2, false) => OrbitLabel::C,
    }
}

/// Legacy label and a–d label from the exit side and the minor-axis momentum
/// flip, judged on the target momentum.
/// A solution carrying a continuation class is labelled by [`class_orbit`].
pub fn classify_orbit(sol: &OrbitSolution) -> (OrbitLabel, LegacyLabel) {
    let (o, l, _) = classify_parts(sol.exit_position, sol.p0, sol.target, sol.class_label);
    match sol.class_label {
        Some(c) => (class_orbit(c, sol.target), l),
        None => (o, l),
    }
}

fn classify_parts(exit: Vec2, p0: Vec2, pf: Vec2, class: Option<SolutionClass>) -> (OrbitLabel, LegacyLabel, bool) {
    let mut tie = false;
    let z_side = if exit[0].abs() < 1e-10 {
        tie = true;
        match class.map(|c| c.seed_group()) {
            Some(Group::T1) => 1.0,
            Some(Group::T2) => -1.0,
            None => pf[0].signum(),
        }
    } else {
        exit[0].signum()
    };
    let flip_q = pf[1] * p0[1];
    let flipped = if flip_q.abs() < 1e-10 {
        tie = true;
        false
    } else {
        flip_q < 0.0
    };
    let orbit = match (z_side > 0.0, flipped) {
        (true, false) => OrbitLabel::A,
        (false, false) => OrbitLabel::B,
        (false, true) => OrbitLabel::C,
        (true, true) => OrbitLabel::D,
    };
    if pf[0].abs() < 1e-10 {
        tie = true;
    }
    let same_side = z_side * pf[0] >= 0.0;
    let legacy = match (same_side, !flipped) {
        (true, true) => LegacyLabel::One,
        (false, true) => LegacyLabel::Two,
        (false, false) => LegacyLabel::Three,
        (true, false) => LegacyLabel::Four,
    };
    (orbit, legacy, tie)
}

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn assemble(field: &LaserField, atom: &TargetAtom, x: &[f64; 4], ev: Evaluation, target: Vec2, iterations: u32, class: Option<SolutionClass>) -> Result<OrbitSolution> {
    let t_prime = C::new(x[0], x[1]);
    let p0 = [x[2], x[3]];
    let action = sub_barrier_action(field, atom, p0, t_prime) + real_time_action(&ev.traj, atom, field, ev.pf)?;
    let e = ev.traj.end();
    let m = ev.traj.end_stability();
    let k = asymptotic_jacobian(atom, e.r, e.p)?;
    let mut jac = [[0.0; 2]; 2];
    for (i, row) in jac.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|l| k[i][l] * m[l][2 + j]).sum();
        }
    }
    let det = det2(jac);
    let (mut orbit_label, legacy_label, label_tie) = classify_parts(ev.exit, p0, target, class);
    if let Some(c) = class {
        orbit_label = class_orbit(c, target);
    }
    Ok(OrbitSolution {
        t_prime,
        p0,
        exit_position: ev.exit,
        pf: ev.pf,
        target,
        action,
        stability_det: C::from(det),
        maslov_phase: if det < 0.0 { PI } else { 0.0 },
        class_label: class,
        orbit_label,
        legacy_label,
        label_tie,
        iterations,
        residual: norm4(&ev.residual),
    })
}

/// Newton shooting on (Re t', Im t', p0z, p0x) towards a final momentum.
pub fn shoot(field: &LaserField, atom: &TargetAtom, guess: &OrbitSeed, p_target: Vec2, opts: &CqsfaOptions) -> Result<OrbitSolution> {
    shoot_labelled(field, atom, guess, p_target, opts, None)
}

pub(crate) fn shoot_labelled(
    field: &LaserField,
    atom: &TargetAtom,
    guess: &OrbitSeed,
    target: Vec2,
    opts: &CqsfaOptions,
    class: Option<SolutionClass>,
) -> Result<OrbitSolution> {
    if !(guess.t_prime.im > 0.0) {
        return domain("seed must have Im t' > 0");
    }
    let t_off = opts.horizon(field, guess.t_prime.re);
    let mut x = [guess.t_prime.re, guess.t_prime.im, guess.p0[0], guess.p0[1]];
    let mut ev = evaluate(field, atom, &x, target, t_off)?;
    let mut fnorm = norm4(&ev.residual);
    let max_dt = 0.05 * field.period();
    let h = opts.fd_step;
    let mut iterations = 0;
    while iterations < opts.max_iterations && fnorm > 1e-12 {
        let mut jac = Matrix4::zeros();
        for k in 0..4 {
            let mut xk = x;
            xk[k] += h;
            let (col, step) = match evaluate(field, atom, &xk, target, t_off) {
                Ok(e) => (e.residual, h),
                Err(_) => {
                    xk[k] = x[k] - h;
                    match evaluate(field, atom, &xk, target, t_off) {
                        Ok(e) => (e.residual, -h),
                        Err(_) => return Err(Error::NonConvergence { best_residual: fnorm }),
                    }
                }
            };
            for i in 0..4 {
                jac[(i, k)] = (col[i] - ev.residual[i]) / step;
            }
        }
        let rhs = -Vector4::from_column_slice(&ev.residual);
        let Some(mut dx) = jac.lu().solve(&rhs) else { break };
        let scale = (dx[0].hypot(dx[1]) / max_dt).max(dx[2].hypot(dx[3]) / 0.2);
        if scale > 1.0 {
            dx /= scale;
        }
        iterations += 1;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let xn = [x[0] + lambda * dx[0], x[1] + lambda * dx[1], x[2] + lambda * dx[2], x[3] + lambda * dx[3]];
            if xn[1] > 0.0 {
                if let Ok(e) = evaluate(field, atom, &xn, target, t_off) {
                    if norm4(&e.residual) < fnorm {
                        accepted = Some((xn, e));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        let Some((xn, en)) = accepted else { break };
        let nn = norm4(&en.residual);
        let stalled = nn > 0.25 * fnorm;
        x = xn;
        ev = en;
        fnorm = nn;
        if fnorm < opts.tolerance && stalled {
            break;
        }
    }
    if fnorm < opts.tolerance {
        log::debug!("shoot converged in {iterations} iterations, residual {fnorm:e}");
        assemble(field, atom, &x, ev, target, iterations, class)
    } else {
        Err(Error::NonConvergence { best_residual: fnorm })
    }
}

/// Stationary-phase prefactor at the initial momentum, without the stability factor.
pub fn ionization_prefactor(field: &LaserField, sol: &OrbitSolution, atom: &TargetAtom, model: DipoleModel) -> C {
    let s2 = action_second_derivative(field, sol.p0, sol.t_prime);
    (C::new(0.0, 2.0 * PI) / s2).sqrt() * dipole_matrix_element(atom, field, sol.p0, sol.t_prime, model)
}

/// Single-orbit term (det + i0)^{−1/2}·C(t')·e^{iS}.
pub fn orbit_term(field: &LaserField, atom: &TargetAtom, sol: &OrbitSolution, model: DipoleModel) -> Result<C> {
    if !sol.maslov_phase.is_finite() {
        return Err(Error::MissingData("Maslov phase".into()));
    }
    let det = sol.stability_det.norm();
    if det == 0.0 {
        return Err(Error::Singularity);
    }
    let stab = C::from_polar(det.powf(-0.5), -0.5 * sol.maslov_phase);
    Ok(stab * ionization_prefactor(field, sol, atom, model) * (C::i() * sol.action).exp())
}

/// Coherent sum over solutions sharing one final momentum.
pub fn cqsfa_amplitude(field: &LaserField, atom: &TargetAtom, solutions: &[OrbitSolution], model: DipoleModel) -> Result<C> {
    let mut m = C::from(0.0);
    for s in solutions {
        let t0 = solutions[0].target;
        if (s.target[0] - t0[0]).abs() > 1e-6 || (s.target[1] - t0[1]).abs() > 1e-6 {
            return domain("solutions do not share a target momentum");
        }
        m += orbit_term(field, atom, s, model)?;
    }
    Ok(m)
}
