//! Real-time continuum propagation with co-integrated stability matrix and action.
//!
//! The integrator works in drift coordinates R = r − (G(τ) − G(t₀)), G' = A, so
//! that Ṙ = p and the field only enters through the force evaluation point.

use crate::error::{Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use ode_solvers::{Dop853, OutputType, SVector, System};
use std::cell::Cell;

pub const RTOL: f64 = 1e-10;
pub const ATOL: f64 = 1e-12;
/// |r| below which propagation aborts.
pub const COLLISION_RADIUS: f64 = 1e-4;
pub const CLOSE_RADIUS: f64 = 0.1;
pub const STEP_FLOOR: f64 = 1e-6;
const MAX_STEPS: u32 = 400_000;
/// Longest field-free continuation used to leave a truncated potential.
const MAX_EXIT_TIME: f64 = 2e4;

// Time rides along as the last component: ode_solvers' DOP853 tableau
// evaluates its final stage at the wrong abscissa, so the RHS must not
// read the solver-supplied time.
type State = SVector<f64, 22>;
const Q: usize = 4;
const M0: usize = 5;
const TAU: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub tau: f64,
    pub r: Vec2,
    pub p: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// ∂(r,p)(τ)/∂(r,p)(t_start), ordered (r_z, r_x, p_z, p_x).
    pub stability: Vec<[[f64; 4]; 4]>,
    pub t_start: f64,
    pub t_end: f64,
    /// Time at which the field was switched off (t_end when it never was).
    pub t_field_off: f64,
    /// ∫(p²/2 − V) dτ over [t_start, t_end].
    pub q_integral: f64,
}

impl Trajectory {
    pub fn start(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn end(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn end_stability(&self) -> &[[f64; 4]; 4] {
        self.stability.last().expect("trajectory has samples")
    }

    /// Largest |Mᵀ J M − J| entry at t_end.
    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(self.end_stability())
    }
}

pub fn symplectic_defect(m: &[[f64; 4]; 4]) -> f64 {
    let j = |a: usize, b: usize| -> f64 {
        match (a, b) {
            (0, 2) | (1, 3) => 1.0,
            (2, 0) | (3, 1) => -1.0,
            _ => 0.0,
        }
    };
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += m[k][a] * j(k, l) * m[l][b];
                }
            }
            worst = worst.max((s - j(a, b)).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
enum Stop {
    Collision(f64),
    Floor(f64),
}

struct Eom<'a> {
    field: &'a LaserField,
    atom: &'a TargetAtom,
    g_start: Vec2,
    /// Field is applied for τ ≤ t_off; beyond, the drift offset is frozen.
    t_off: f64,
    g_off: Vec2,
    exit_radius: Option<f64>,
    last_tau: Cell<f64>,
    stop: &'a Cell<Option<Stop>>,
    exited: &'a Cell<bool>,
}

impl Eom<'_> {
    fn offset(&self, tau: f64) -> Vec2 {
        let g = if tau <= self.t_off { self.field.a_integral_real(tau) } else { self.g_off };
        [g[0] - self.g_start[0], g[1] - self.g_start[1]]
    }

    fn position(&self, tau: f64, y: &State) -> Vec2 {
        let d = self.offset(tau);
        [y[0] + d[0], y[1] + d[1]]
    }
}

impl System<f64, State> for Eom<'_> {
    fn system(&self, _x: f64, y: &State, dy: &mut State) {
        let tau = y[TAU];
        let r = self.position(tau, y);
        let mut rn = r[0].hypot(r[1]);
        let n = if rn > 1e-300 { [r[0] / rn, r[1] / rn] } else { [1.0, 0.0] };
        rn = rn.max(1e-12);
        let (v, v1, v2) = self.atom.radial(rn);
        let t = v1 / rn;
        let h = [
            [v2 * n[0] * n[0] + t * (1.0 - n[0] * n[0]), (v2 - t) * n[0] * n[1]],
            [(v2 - t) * n[0] * n[1], v2 * n[1] * n[1] + t * (1.0 - n[1] * n[1])],
        ];
        let p = [y[2], y[3]];
        dy[0] = p[0];
        dy[1] = p[1];
        dy[2] = -v1 * n[0];
        dy[3] = -v1 * n[1];
        dy[Q] = 0.5 * (p[0] * p[0] + p[1] * p[1]) - v;
        for c in 0..4 {
            let m = |row: usize| y[M0 + 4 * row + c];
            dy[M0 + c] = m(2);
            dy[M0 + 4 + c] = m(3);
            dy[M0 + 8 + c] = -(h[0][0] * m(0) + h[0][1] * m(1));
            dy[M0 + 12 + c] = -(h[1][0] * m(0) + h[1][1] * m(1));
        }
        dy[TAU] = 1.0;
    }

    fn solout(&mut self, tau: f64, y: &State, _dy: &State) -> bool {
        let r = self.position(tau, y);
        let rn = r[0].hypot(r[1]);
        let step = tau - self.last_tau.get();
        self.last_tau.set(tau);
        if rn < COLLISION_RADIUS {
            self.stop.set(Some(Stop::Collision(tau)));
            return true;
        }
        if rn < CLOSE_RADIUS && step > 0.0 && step < STEP_FLOOR {
            self.stop.set(Some(Stop::Floor(tau)));
            return true;
        }
        if let Some(l) = self.exit_radius {
            if rn >= l {
                self.exited.set(true);
                return true;
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: RTOL, atol: ATOL }
    }
}

struct Leg {
    taus: Vec<f64>,
    states: Vec<State>,
    exited: bool,
}

#[allow(clippy::too_many_arguments)]
fn integrate_leg(
    field: &LaserField,
    atom: &TargetAtom,
    g_start: Vec2,
    t_off: f64,
    y0: State,
    t0: f64,
    t1: f64,
    exit_radius: Option<f64>,
    tol: Tolerances,
) -> Result<Leg> {
    let stop = Cell::new(None);
    let exited = Cell::new(false);
    let g_off = field.a_integral_real(t_off);
    let eom = Eom { field, atom, g_start, t_off, g_off, exit_radius, last_tau: Cell::new(t0), stop: &stop, exited: &exited };
    let span = t1 - t0;
    let mut solver = Dop853::from_param(
        eom,
        t0,
        t1,
        span,
        y0,
        tol.rtol,
        tol.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        span,
        0.0,
        MAX_STEPS,
        u32::MAX,
        OutputType::Sparse,
    );
    let res = solver.integrate();
    match stop.get() {
        Some(Stop::Collision(tau)) => return Err(Error::HardCollision { tau }),
        Some(Stop::Floor(tau)) => return Err(Error::IntegrationFailure(format!("step below floor near the core at tau = {tau}"))),
        None => {}
    }
    res.map_err(|e| Error::IntegrationFailure(e.to_string()))?;
    let (taus, states) = solver.results().get();
    Ok(Leg { taus: taus.clone(), states: states.clone(), exited: exited.get() })
}

fn initial_state(r: Vec2, p: Vec2, tau: f64) -> State {
    let mut y = State::zeros();
    y[TAU] = tau;
    y[0] = r[0];
    y[1] = r[1];
    y[2] = p[0];
    y[3] = p[1];
    for i in 0..4 {
        y[M0 + 5 * i] = 1.0;
    }
    y
}

fn stability_of(y: &State) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = y[M0 + 4 * i + j];
        }
    }
    m
}

/// Field-on propagation from `t_off`-capped start, optionally followed by a
/// field-free continuation until a truncated potential is left behind.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propagate_with(
    field: &LaserField,
    atom: &TargetAtom,
    r_start: Vec2,
    p_start: Vec2,
    t_start: f64,
    t_off: f64,
    leave_potential: bool,
    tol: Tolerances,
) -> Result<Trajectory> {
    if r_start[0].hypot(r_start[1]) == 0.0 {
        return Err(Error::Singularity);
    }
    if !(t_off > t_start) {
        return Err(Error::Domain("propagation duration must be positive".into()));
    }
    let g_start = field.a_integral_real(t_start);
    let mut leg = integrate_leg(field, atom, g_start, t_off, initial_state(r_start, p_start, t_start), t_start, t_off, None, tol)?;
    let mut taus = std::mem::take(&mut leg.taus);
    let mut states = std::mem::take(&mut leg.states);

    let cutoff = atom.truncation.map(|t| t.l).filter(|_| atom.z_eff > 0.0);
    if let (true, Some(l)) = (leave_potential, cutoff) {
        let g_off = field.a_integral_real(t_off);
        let shift = [g_off[0] - g_start[0], g_off[1] - g_start[1]];
        let mut t = t_off;
        loop {
            let y = *states.last().unwrap();
            let r = [y[0] + shift[0], y[1] + shift[1]];
            let rn = r[0].hypot(r[1]);
            if rn >= l {
                break;
            }
            let energy = 0.5 * (y[2] * y[2] + y[3] * y[3]) + atom.radial(rn).0;
            if energy <= 0.0 {
                return Err(Error::BoundElectron { energy });
            }
            if t - t_off > MAX_EXIT_TIME {
                return Err(Error::IntegrationFailure("electron did not leave the truncated potential".into()));
            }
            let next = integrate_leg(field, atom, g_start, t_off, y, t, t + 100.0, Some(l), tol)?;
            taus.extend_from_slice(&next.taus[1..]);
            states.extend_from_slice(&next.states[1..]);
            t = *taus.last().unwrap();
            if next.exited {
                break;
            }
        }
    }

    let g_off = field.a_integral_real(t_off);
    let mut samples = Vec::with_capacity(taus.len());
    let mut stability = Vec::with_capacity(taus.len());
    for (&tau, y) in taus.iter().zip(&states) {
        let g = if tau <= t_off { field.a_integral_real(tau) } else { g_off };
        samples.push(TrajectorySample { tau, r: [y[0] + g[0] - g_start[0], y[1] + g[1] - g_start[1]], p: [y[2], y[3]] });
        stability.push(stability_of(y));
    }
    let t_end = *taus.last().unwrap();
    Ok(Trajectory { samples, stability, t_start, t_end, t_field_off: t_off.min(t_end), q_integral: states.last().unwrap()[Q] })
}

/// Propagates under ṙ = p + A(τ), ṗ = −∇V(r) for `duration` with the field on.
pub fn propagate(field: &LaserField, atom: &TargetAtom, r_start: Vec2, p_start: Vec2, t_start: f64, duration: f64) -> Result<Trajectory> {
    propagate_with(field, atom, r_start, p_start, t_start, t_start + duration, false, Tolerances::default())
}

fn kepler_map(z: f64, r: Vec2, p: Vec2) -> Result<Vec2> {
    let rn = r[0].hypot(r[1]);
    let p2 = p[0] * p[0] + p[1] * p[1];
    let energy = 0.5 * p2 - z / rn;
    if energy <= 0.0 {
        return Err(Error::BoundElectron { energy });
    }
    let k = (2.0 * energy).sqrt();
    let l = r[0] * p[1] - r[1] * p[0];
    // Runge–Lenz vector p × L − z r̂.
    let a = [p[1] * l - z * r[0] / rn, -p[0] * l - z * r[1] / rn];
    let lxa = [-l * a[1], l * a[0]];
    let d = 1.0 + k * k * l * l;
    Ok([k * (k * lxa[0] - a[0]) / d, k * (k * lxa[1] - a[1]) / d])
}

/// Detector momentum of a field-free state.
pub fn asymptotic_momentum(atom: &TargetAtom, r: Vec2, p: Vec2) -> Result<Vec2> {
    let rn = r[0].hypot(r[1]);
    if rn == 0.0 {
        return Err(Error::Singularity);
    }
    if atom.z_eff == 0.0 {
        return Ok(p);
    }
    match atom.truncation {
        None => kepler_map(atom.z_eff, r, p),
        Some(tr) if rn >= tr.l => Ok(p),
        Some(_) => {
            let energy = 0.5 * (p[0] * p[0] + p[1] * p[1]) + atom.radial(rn).0;
            if energy <= 0.0 {
                return Err(Error::BoundElectron { energy });
            }
            // Any field works here: its switch-off time precedes the start.
            let quiet = LaserField { up: 1.0, omega: 1.0, eps: 0.0, phi: 0.0 };
            let traj = propagate_with(&quiet, atom, r, p, 1.0, 1.0 + 1e-9, true, Tolerances::default())?;
            Ok(traj.end().p)
        }
    }
}

/// Regularized Coulomb phase ∫_T^∞ z/r dτ, up to a term depending on |p_f| only.
pub fn coulomb_tail(atom: &TargetAtom, r: Vec2, p: Vec2) -> Result<f64> {
    let z = atom.z_eff;
    if z == 0.0 || atom.truncation.is_some() {
        return Ok(0.0);
    }
    let rn = r[0].hypot(r[1]);
    let energy = 0.5 * (p[0] * p[0] + p[1] * p[1]) - z / rn;
    if energy <= 0.0 {
        return Err(Error::BoundElectron { energy });
    }
    let k = (2.0 * energy).sqrt();
    let arg = 1.0 + (k * k * rn + k * (r[0] * p[0] + r[1] * p[1])) / z;
    Ok(-(z / k) * arg.ln())
}

/// ∂p_f/∂(r, p) of the asymptotic map by central differences, 2×4.
pub(crate) fn asymptotic_jacobian(atom: &TargetAtom, r: Vec2, p: Vec2) -> Result<[[f64; 4]; 2]> {
    let mut jac = [[0.0; 4]; 2];
    if atom.z_eff == 0.0 || atom.truncation.is_some() {
        jac[0][2] = 1.0;
        jac[1][3] = 1.0;
        return Ok(jac);
    }
    let x = [r[0], r[1], p[0], p[1]];
    for k in 0..4 {
        let h = 1e-6 * x[k].abs().max(1.0);
        let eval = |s: f64| {
            let mut y = x;
            y[k] += s;
            kepler_map(atom.z_eff, [y[0], y[1]], [y[2], y[3]])
        };
        let (hi, lo) = (eval(h)?, eval(-h)?);
        for i in 0..2 {
            jac[i][k] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}
