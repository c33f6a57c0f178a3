//! Closed-form SFA ionization times for elliptical polarization.
//!
//! The saddle equation (p + A(t'))² + 2Ip = 0 is squared into a quartic in
//! ξ = cos(ωt' + φ), solved by Ferrari's method, then every root used is
//! validated against the unsquared equation and polished by Newton's method
//! in the phase variable.

use crate::error::{Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_amplitude::direct_action;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    T11,
    T12,
    T21,
    T22,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    T1,
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSource {
    ClosedForm,
    Polished,
    Companion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonizationSolution {
    pub t_prime: C,
    pub branch: Branch,
    pub group: Group,
    pub cycle_n: i64,
    pub valid_quadrant: bool,
    pub stokes_discarded: bool,
    pub source: RootSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoefficients {
    pub a3: C,
    pub a2: C,
    pub a1: C,
    pub a0: C,
    pub pz_bar: f64,
    pub px_bar: f64,
    pub u_bar: f64,
    pub eps: f64,
}

impl QuarticCoefficients {
    pub fn eval(&self, x: C) -> C {
        (((x + self.a3) * x + self.a2) * x + self.a1) * x + self.a0
    }

    fn deriv(&self, x: C) -> C {
        ((x * 4.0 + self.a3 * 3.0) * x + self.a2 * 2.0) * x + self.a1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticResolvent {
    pub coeffs: QuarticCoefficients,
    pub delta0: C,
    pub delta1: C,
    /// Depressed-quartic coefficients y⁴ + p y² + q y + r after ξ = y − a3/4.
    pub p: C,
    pub q: C,
    pub r: C,
    pub zeta: C,
    pub eta: C,
}

impl QuarticResolvent {
    /// ξ = −a3/4 + sζ + (j·i/2)√(4ζ² + 2p + sη) for s, j ∈ {+1, −1}.
    pub fn root(&self, s: f64, j: f64) -> C {
        let inner = (self.zeta * self.zeta * 4.0 + self.p * 2.0 + self.eta * s).sqrt();
        -self.coeffs.a3 / 4.0 + self.zeta * s + C::new(0.0, 0.5 * j) * inner
    }
}

pub fn residual_tolerance(atom: &TargetAtom) -> f64 {
    1e-9 * (2.0 * atom.ip).max(1.0)
}

/// Monic quartic in ξ = cos(ωt'+φ).
pub fn quartic_coefficients(field: &LaserField, atom: &TargetAtom, p: Vec2) -> Result<QuarticCoefficients> {
    let eps = field.eps;
    if eps >= 1.0 {
        return Err(Error::DegenerateParameterization);
    }
    if eps > 0.995 {
        log::warn!("eps = {eps}: quartic scaling 1/(1-eps^2) is ill-conditioned");
    }
    let e2 = eps * eps;
    let scale = field.amplitude() * (1.0 - e2);
    let pz = p[0] / scale;
    let px = p[1] / scale;
    let p2 = p[0] * p[0] + p[1] * p[1];
    let u = ((1.0 + e2) * (2.0 * atom.ip + p2) / (4.0 * field.up) + e2) / (1.0 - e2);
    let k = 4.0 * e2 * px * px;
    Ok(QuarticCoefficients {
        a3: C::from(4.0 * pz),
        a2: C::from(2.0 * u + 4.0 * pz * pz + k),
        a1: C::from(4.0 * pz * u),
        a0: C::from(u * u - k),
        pz_bar: pz,
        px_bar: px,
        u_bar: u,
        eps,
    })
}

/// Ferrari resolvent quantities with principal branches throughout.
///
/// The resolvent root m = 2ζ² is Newton-polished on the resolvent cubic so
/// that the zero-ellipticity limit ζ → 0 is reached to rounding rather than
/// to the square root of rounding.
pub fn resolvent(coeffs: &QuarticCoefficients) -> Result<QuarticResolvent> {
    let (a3, a2, a1, a0) = (coeffs.a3, coeffs.a2, coeffs.a1, coeffs.a0);
    let delta0 = a2 * a2 - a3 * a1 * 3.0 + a0 * 12.0;
    let delta1 = a2 * a2 * a2 * 2.0 - a3 * a2 * a1 * 9.0 + a3 * a3 * a0 * 27.0 + a1 * a1 * 27.0 - a2 * a0 * 72.0;
    let disc = (delta1 * delta1 - delta0 * delta0 * delta0 * 4.0).sqrt();
    let mut qq = ((delta1 + disc) / 2.0).cbrt();
    if qq.norm() == 0.0 {
        qq = ((delta1 - disc) / 2.0).cbrt();
    }
    // Depressed form with ξ = y − p̄_z, kept in structured form so the
    // zero-ellipticity factorization survives rounding:
    // y⁴ + (2β + k)y² − 2k p̄_z y + β² − k(1 − p̄_z²), β = Ū − p̄_z², k = 4ε²p̄_x².
    let pzb = coeffs.pz_bar;
    let beta = coeffs.u_bar - pzb * pzb;
    let k = 4.0 * coeffs.eps * coeffs.eps * coeffs.px_bar * coeffs.px_bar;
    let p = C::from(2.0 * beta + k);
    let q = C::from(-2.0 * k * pzb);
    let r = C::from(beta * beta - k * (1.0 - pzb * pzb));
    let c1 = C::from(2.0 * k * (4.0 * beta + k + 4.0 - 4.0 * pzb * pzb));
    let sum = if qq.norm() == 0.0 { C::from(0.0) } else { qq + delta0 / qq };
    let zeta0 = (p * (-2.0 / 3.0) + sum / 3.0).sqrt() * 0.5;

    // Resolvent cubic 8m³ + 8pm² + c1·m − q² = 0 with m = 2ζ², c1 = 2p² − 8r.
    let cubic = |m: C| ((m * 8.0 + p * 8.0) * m + c1) * m - q * q;
    let dcubic = |m: C| (m * 24.0 + p * 16.0) * m + c1;
    let mut m = zeta0 * zeta0 * 2.0;
    for _ in 0..200 {
        let d = dcubic(m);
        if d.norm() == 0.0 {
            break;
        }
        let step = cubic(m) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        m -= step;
        if step.norm() <= 1e-16 * m.norm() {
            break;
        }
    }
    let mut zeta = (m / 2.0).sqrt();
    if (zeta + zeta0).norm() < (zeta - zeta0).norm() {
        zeta = -zeta;
    }
    let eta = if q.norm() == 0.0 {
        C::from(0.0)
    } else if zeta.norm() == 0.0 {
        return Err(Error::ResolventDegeneracy);
    } else {
        q / zeta
    };
    Ok(QuarticResolvent { coeffs: *coeffs, delta0, delta1, p, q, r, zeta, eta })
}

pub fn resolvent_zeta_eta(coeffs: &QuarticCoefficients) -> Result<(C, C)> {
    let res = resolvent(coeffs)?;
    Ok((res.zeta, res.eta))
}

/// Eq. 17 residual (p + A(t'))² + 2Ip.
pub fn saddle_residual(field: &LaserField, atom: &TargetAtom, p: Vec2, t_prime: C) -> C {
    let a = field.vector_potential(t_prime);
    let vz = a[0] + p[0];
    let vx = a[1] + p[1];
    vz * vz + vx * vx + 2.0 * atom.ip
}

fn residual_phase(field: &LaserField, atom: &TargetAtom, p: Vec2, theta: C) -> (C, C) {
    let a = field.amplitude();
    let ea = field.eps * a;
    let (s, c) = (theta.sin(), theta.cos());
    let vz = c * a + p[0];
    let vx = s * ea + p[1];
    let f = vz * vz + vx * vx + 2.0 * atom.ip;
    let df = vz * s * (-2.0 * a) + vx * c * (2.0 * ea);
    (f, df)
}

/// Newton refinement of the phase θ on the unsquared saddle equation.
pub fn polish_phase(field: &LaserField, atom: &TargetAtom, p: Vec2, theta0: C) -> C {
    let mut th = theta0;
    for _ in 0..40 {
        let (f, df) = residual_phase(field, atom, p, th);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        th -= step;
        if step.norm() <= 1e-15 * (1.0 + th.norm()) {
            break;
        }
    }
    th
}

/// Roots of a monic quartic by simultaneous (Durand–Kerner) iteration with
/// a final Newton pass on each root.
pub fn quartic_roots(coeffs: &QuarticCoefficients) -> [C; 4] {
    let seed = C::new(0.4, 0.9);
    let scale = 1.0 + [coeffs.a3, coeffs.a2, coeffs.a1, coeffs.a0].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z = [seed * scale, seed.powi(2) * scale, seed.powi(3) * scale, seed.powi(4) * scale];
    for _ in 0..1000 {
        let mut delta: f64 = 0.0;
        for i in 0..4 {
            let mut den = C::from(1.0);
            for j in 0..4 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                z[i] += C::new(1e-8, 1e-8) * scale;
                delta = f64::INFINITY;
                continue;
            }
            let step = coeffs.eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-16 * scale {
            break;
        }
    }
    for zi in &mut z {
        for _ in 0..3 {
            let d = coeffs.deriv(*zi);
            if d.norm() == 0.0 {
                break;
            }
            let step = coeffs.eval(*zi) / d;
            if step.norm() > 1e-6 * (1.0 + zi.norm()) || !step.re.is_finite() {
                break;
            }
            *zi -= step;
        }
    }
    z
}

fn group_of(branch: Branch) -> Group {
    match branch {
        Branch::T11 | Branch::T12 => Group::T1,
        _ => Group::T2,
    }
}

/// Eq. 21: p_z·p_x ≥ 0 selects (t11, t21), otherwise (t12, t22).
pub fn quadrant_branches(p: Vec2) -> (Branch, Branch) {
    if p[0] * p[1] >= 0.0 {
        (Branch::T11, Branch::T21)
    } else {
        (Branch::T12, Branch::T22)
    }
}

/// Phase θ = ωt'+φ of an analytic candidate, Re θ ∈ [0, 2π].
fn analytic_phase(res: &QuarticResolvent, branch: Branch) -> C {
    match branch {
        Branch::T11 => C::from(TWO_PI) - res.root(1.0, 1.0).acos(),
        Branch::T12 => C::from(TWO_PI) - res.root(-1.0, 1.0).acos(),
        Branch::T21 => res.root(-1.0, -1.0).acos(),
        Branch::T22 => res.root(1.0, -1.0).acos(),
        Branch::Circular => unreachable!("circular branch has no quartic candidate"),
    }
}

fn wrap_phase(th: C) -> C {
    C::new(th.re.rem_euclid(TWO_PI), th.im)
}

fn in_half(group: Group, th: C, slack: f64) -> bool {
    let re = th.re.rem_euclid(TWO_PI);
    let re = if re > TWO_PI - slack { re - TWO_PI } else { re };
    match group {
        Group::T2 => re >= -slack && re <= PI + slack,
        Group::T1 => (re >= PI - slack && re <= TWO_PI + slack) || re <= slack,
    }
}

/// Time in cycle window n, Re ωt ∈ [2πn, 2π(n+1)).
pub fn phase_to_time(field: &LaserField, theta: C, cycle_n: i64) -> C {
    let shifted = theta - field.phi;
    let k = (shifted.re / TWO_PI).floor();
    let t0 = (shifted - TWO_PI * k) / field.omega;
    t0 + field.period() * cycle_n as f64
}

/// Companion-root replacement: the valid upper-half-plane phase in the
/// group's half cycle that lies nearest the analytic candidate.
fn companion_phase(field: &LaserField, atom: &TargetAtom, p: Vec2, coeffs: &QuarticCoefficients, group: Group, near: C) -> Option<C> {
    let tol = residual_tolerance(atom);
    let mut best: Option<(f64, C)> = None;
    for xi in quartic_roots(coeffs) {
        let base = xi.acos();
        for cand in [base, C::from(TWO_PI) - base] {
            let th = polish_phase(field, atom, p, cand);
            let th = wrap_phase(th);
            if !(th.im > 0.0) || !in_half(group, th, 1e-9) {
                continue;
            }
            let (f, _) = residual_phase(field, atom, p, th);
            if f.norm() >= tol {
                continue;
            }
            let d = (th - near).norm().min((th - near - TWO_PI).norm()).min((th - near + TWO_PI).norm());
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, th));
            }
        }
    }
    best.map(|(_, th)| th)
}

fn validated(field: &LaserField, atom: &TargetAtom, p: Vec2, coeffs: &QuarticCoefficients, branch: Branch, th0: C) -> Result<(C, RootSource)> {
    let tol = residual_tolerance(atom);
    let group = group_of(branch);
    let (f0, _) = residual_phase(field, atom, p, th0);
    let th = polish_phase(field, atom, p, th0);
    let (f, _) = residual_phase(field, atom, p, th);
    if f.norm() < tol && th.im > 0.0 && (th - th0).norm() < 1e-4 && in_half(group, th, 1e-9) {
        let src = if f0.norm() < tol { RootSource::ClosedForm } else { RootSource::Polished };
        return Ok((th, src));
    }
    companion_phase(field, atom, p, coeffs, group, th0)
        .map(|th| (th, RootSource::Companion))
        .ok_or_else(|| Error::NoSolution(format!("no valid {group:?} saddle at p = {p:?}")))
}

/// The four arccos-form candidates. Only the two selected by the quadrant
/// rule are validated; the other two are returned as raw analytic values
/// flagged `valid_quadrant = false` (they solve the squared quartic only).
pub fn candidate_times(field: &LaserField, atom: &TargetAtom, p: Vec2, cycle_n: i64) -> Result<[IonizationSolution; 4]> {
    let coeffs = quartic_coefficients(field, atom, p)?;
    let res = resolvent(&coeffs)?;
    let (b1, b2) = quadrant_branches(p);
    let mut out = Vec::with_capacity(4);
    for branch in [Branch::T11, Branch::T12, Branch::T21, Branch::T22] {
        let th0 = analytic_phase(&res, branch);
        let selected = branch == b1 || branch == b2;
        let (th, source) = if selected {
            validated(field, atom, p, &coeffs, branch, th0)?
        } else {
            (th0, RootSource::ClosedForm)
        };
        out.push(IonizationSolution {
            t_prime: phase_to_time(field, th, cycle_n),
            branch,
            group: group_of(branch),
            cycle_n,
            valid_quadrant: selected,
            stokes_discarded: false,
            source,
        });
    }
    Ok([out[0], out[1], out[2], out[3]])
}

/// (t1, t2) per the quadrant rule, both satisfying the saddle equation.
pub fn grouped_times(field: &LaserField, atom: &TargetAtom, p: Vec2, cycle_n: i64) -> Result<(IonizationSolution, IonizationSolution)> {
    let coeffs = quartic_coefficients(field, atom, p)?;
    let res = resolvent(&coeffs)?;
    let (b1, b2) = quadrant_branches(p);
    let pick = |branch: Branch| -> Result<IonizationSolution> {
        let (th, source) = validated(field, atom, p, &coeffs, branch, analytic_phase(&res, branch))?;
        Ok(IonizationSolution {
            t_prime: phase_to_time(field, th, cycle_n),
            branch,
            group: group_of(branch),
            cycle_n,
            valid_quadrant: true,
            stokes_discarded: false,
            source,
        })
    };
    Ok((pick(b1)?, pick(b2)?))
}

/// Circular polarization: one saddle per cycle at θ = α + π + i·arccosh(c),
/// α the momentum angle from the z axis, c = (Ip + Up + p²/2)/(|p|√(2Up)).
/// Along the axes this is the cos/sin closed form rotated by α.
pub fn circular_limit_times(field: &LaserField, atom: &TargetAtom, p: Vec2, cycle_n: i64) -> Result<Vec<IonizationSolution>> {
    let pn = p[0].hypot(p[1]);
    if pn == 0.0 {
        return Err(Error::NoSolution("circular limit undefined at p = 0".into()));
    }
    if field.eps != 1.0 {
        return Err(Error::Domain("circular_limit_times requires eps = 1".into()));
    }
    let c = (atom.ip + field.up + 0.5 * pn * pn) / (pn * (2.0 * field.up).sqrt());
    let alpha = p[1].atan2(p[0]);
    let theta = C::new((alpha + PI).rem_euclid(TWO_PI), c.acosh());
    let group = if theta.re >= PI { Group::T1 } else { Group::T2 };
    Ok(vec![IonizationSolution {
        t_prime: phase_to_time(field, theta, cycle_n),
        branch: Branch::Circular,
        group,
        cycle_n,
        valid_quadrant: true,
        stokes_discarded: false,
        source: RootSource::ClosedForm,
    }])
}

/// Re S(t1) − Re S(t2) at momentum p.
pub fn stokes_difference(field: &LaserField, atom: &TargetAtom, p: Vec2) -> Result<f64> {
    let (t1, t2) = grouped_times(field, atom, p, 0)?;
    Ok(direct_action(field, atom, p, t1.t_prime).re - direct_action(field, atom, p, t2.t_prime).re)
}

pub const STOKES_SCAN_STEP: f64 = 0.01;
pub const STOKES_SCAN_RADIUS: f64 = 10.0;

/// Radial momentum along `angle` (from +z towards +x) where Re S(t1) = Re S(t2),
/// or +∞ when the scan to `STOKES_SCAN_RADIUS` finds no crossing.
pub fn stokes_critical_momentum(field: &LaserField, atom: &TargetAtom, angle: f64) -> Result<f64> {
    stokes_critical_momentum_within(field, atom, angle, STOKES_SCAN_RADIUS)
}

pub fn stokes_critical_momentum_within(field: &LaserField, atom: &TargetAtom, angle: f64, radius: f64) -> Result<f64> {
    if !(field.eps > 0.0 && field.eps < 1.0) {
        return Err(Error::Domain("stokes search requires 0 < eps < 1".into()));
    }
    let dir = [angle.cos(), angle.sin()];
    let d = |rho: f64| stokes_difference(field, atom, [rho * dir[0], rho * dir[1]]).ok();
    let n = (radius / STOKES_SCAN_STEP).round() as usize;
    let mut prev: Option<(f64, f64)> = None;
    for k in 1..=n {
        let rho = k as f64 * STOKES_SCAN_STEP;
        let Some(v) = d(rho) else {
            prev = None;
            continue;
        };
        if let Some((r0, v0)) = prev {
            // On a symmetry axis the difference vanishes identically past the
            // crossing; locate where it starts.
            if v == 0.0 {
                let (mut lo, mut hi) = (r0, rho);
                while hi - lo > 1e-13 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    match d(mid) {
                        Some(vm) if vm == 0.0 => hi = mid,
                        Some(_) => lo = mid,
                        None => break,
                    }
                }
                return Ok(hi);
            }
            if v0.signum() != v.signum() {
                let (mut lo, mut hi, mut vlo) = (r0, rho, v0);
                while hi - lo > 1e-13 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    let Some(vm) = d(mid) else { break };
                    if vm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if vm.signum() == vlo.signum() {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                // A sign flip through a label jump is not a crossing.
                if d(root).map_or(false, |v| v.abs() < 1e-6) {
                    return Ok(root);
                }
            }
        }
        prev = Some((rho, v));
    }
    Ok(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StokesVerdict {
    KeepBoth,
    DiscardT1,
    DiscardT2,
}

/// Past the critical momentum on its ray, the saddle with the larger Im S is discarded.
pub fn is_beyond_stokes(field: &LaserField, atom: &TargetAtom, p: Vec2) -> Result<StokesVerdict> {
    let pn = p[0].hypot(p[1]);
    if field.eps <= 0.0 || field.eps >= 1.0 || pn == 0.0 {
        return Ok(StokesVerdict::KeepBoth);
    }
    let crit = stokes_critical_momentum_within(field, atom, p[1].atan2(p[0]), pn.min(STOKES_SCAN_RADIUS))?;
    if !(pn > crit) {
        return Ok(StokesVerdict::KeepBoth);
    }
    let (t1, t2) = grouped_times(field, atom, p, 0)?;
    let s1 = direct_action(field, atom, p, t1.t_prime).im;
    let s2 = direct_action(field, atom, p, t2.t_prime).im;
    Ok(if s1 > s2 { StokesVerdict::DiscardT1 } else { StokesVerdict::DiscardT2 })
}
