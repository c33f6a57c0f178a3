//! Laser field, atomic-unit conversions and the (optionally truncated) binding potential.
//!
//! Vectors are ordered (z, x): z is the major polarization axis.

use crate::error::{domain, Error, Result};
use num_complex::Complex64 as C;
use std::f64::consts::PI;

/// Atomic unit of intensity in W/cm².
pub const INTENSITY_AU: f64 = 3.50944758e16;
/// ω(a.u.) = OMEGA_NM / λ(nm).
pub const OMEGA_NM: f64 = 45.5633525316;

pub type CVec2 = [C; 2];
pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserField {
    pub up: f64,
    pub omega: f64,
    pub eps: f64,
    pub phi: f64,
}

impl LaserField {
    pub fn new(up: f64, omega: f64, eps: f64, phi: f64) -> Result<Self> {
        if !(up > 0.0) || !(omega > 0.0) {
            return domain("up and omega must be positive");
        }
        if !(0.0..=1.0).contains(&eps) {
            return domain(format!("eps = {eps} outside [0, 1]"));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return domain(format!("phi = {phi} outside [0, 2pi)"));
        }
        Ok(Self { up, omega, eps, phi })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.up, self.omega, eps, self.phi)
    }

    /// Peak amplitude of A_z, 2√Up/√(1+ε²).
    pub fn amplitude(&self) -> f64 {
        2.0 * self.up.sqrt() / (1.0 + self.eps * self.eps).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn e_max(&self) -> f64 {
        self.omega * self.amplitude()
    }

    pub fn phase(&self, t: C) -> C {
        t * self.omega + self.phi
    }

    pub fn vector_potential(&self, t: C) -> CVec2 {
        let th = self.phase(t);
        let a = self.amplitude();
        [th.cos() * a, th.sin() * (self.eps * a)]
    }

    pub fn electric_field(&self, t: C) -> CVec2 {
        let th = self.phase(t);
        let e = self.e_max();
        [th.sin() * e, -th.cos() * (self.eps * e)]
    }

    /// dA/dt.
    pub fn vector_potential_rate(&self, t: C) -> CVec2 {
        let e = self.electric_field(t);
        [-e[0], -e[1]]
    }

    /// G(t) with dG/dt = A(t).
    pub fn a_integral(&self, t: C) -> CVec2 {
        let th = self.phase(t);
        let k = self.amplitude() / self.omega;
        [th.sin() * k, -th.cos() * (self.eps * k)]
    }

    /// Antiderivative of A(t)².
    pub fn a_squared_integral(&self, t: C) -> C {
        let th = self.phase(t);
        let a2 = self.amplitude().powi(2);
        let e2 = self.eps * self.eps;
        (t * (1.0 + e2) + (th * 2.0).sin() * ((1.0 - e2) / (2.0 * self.omega))) * (0.5 * a2)
    }

    pub fn vector_potential_real(&self, t: f64) -> Vec2 {
        let th = self.omega * t + self.phi;
        let a = self.amplitude();
        [a * th.cos(), self.eps * a * th.sin()]
    }

    pub fn a_integral_real(&self, t: f64) -> Vec2 {
        let th = self.omega * t + self.phi;
        let k = self.amplitude() / self.omega;
        [k * th.sin(), -self.eps * k * th.cos()]
    }

    pub fn a_squared_integral_real(&self, t: f64) -> f64 {
        self.a_squared_integral(C::new(t, 0.0)).re
    }
}

/// Field from laboratory parameters; Up is independent of eps.
pub fn field_from_experiment(intensity: f64, wavelength_nm: f64, eps: f64, phi: f64) -> Result<LaserField> {
    if !(intensity > 0.0) || !(wavelength_nm > 0.0) {
        return domain("intensity and wavelength must be positive");
    }
    let omega = OMEGA_NM / wavelength_nm;
    let e0 = (intensity / INTENSITY_AU).sqrt();
    let up = e0 * e0 / (4.0 * omega * omega);
    LaserField::new(up, omega, eps, phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub r0: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetAtom {
    pub ip: f64,
    pub z_eff: f64,
    pub truncation: Option<Truncation>,
}

impl TargetAtom {
    pub fn new(ip: f64, z_eff: f64, truncation: Option<Truncation>) -> Result<Self> {
        if !(ip > 0.0) {
            return domain("ip must be positive");
        }
        if !(z_eff >= 0.0) {
            return domain("z_eff must be nonnegative");
        }
        if let Some(tr) = truncation {
            if !(tr.r0 > 0.0 && tr.l > tr.r0) {
                return domain("truncation requires 0 < r0 < l");
            }
        }
        Ok(Self { ip, z_eff, truncation })
    }

    pub fn with_z_eff(&self, z_eff: f64) -> Self {
        Self { z_eff, ..*self }
    }

    /// Taper f(r) and its first two radial derivatives.
    fn taper(&self, r: f64) -> (f64, f64, f64) {
        match self.truncation {
            None => (1.0, 0.0, 0.0),
            Some(tr) if r < tr.r0 => (1.0, 0.0, 0.0),
            Some(tr) if r >= tr.l => (0.0, 0.0, 0.0),
            Some(tr) => {
                let k = PI / (2.0 * (tr.l - tr.r0));
                let u = k * (r - tr.r0);
                let (s, c) = u.sin_cos();
                let c5 = c.powi(5);
                let c6 = c5 * c;
                (c6 * c, -7.0 * k * c6 * s, k * k * (42.0 * c5 * s * s - 7.0 * c6 * c))
            }
        }
    }

    /// V(r) and its first two radial derivatives.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        let z = self.z_eff;
        let (f, f1, f2) = self.taper(r);
        let v = -z * f / r;
        let v1 = -z * (f1 / r - f / (r * r));
        let v2 = -z * (f2 / r - 2.0 * f1 / (r * r) + 2.0 * f / (r * r * r));
        (v, v1, v2)
    }

    /// Radius beyond which the potential vanishes identically.
    pub fn cutoff(&self) -> Option<f64> {
        if self.z_eff == 0.0 {
            return Some(0.0);
        }
        self.truncation.map(|t| t.l)
    }
}

fn norm(r: Vec2) -> f64 {
    r[0].hypot(r[1])
}

pub fn potential_value(atom: &TargetAtom, r: Vec2) -> Result<f64> {
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(atom.radial(rn).0)
}

pub fn potential_gradient(atom: &TargetAtom, r: Vec2) -> Result<Vec2> {
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::Singularity);
    }
    let v1 = atom.radial(rn).1;
    Ok([v1 * r[0] / rn, v1 * r[1] / rn])
}

/// Hessian of V, row-major [[zz, zx], [xz, xx]].
pub fn potential_hessian(atom: &TargetAtom, r: Vec2) -> Result<[[f64; 2]; 2]> {
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::Singularity);
    }
    let (_, v1, v2) = atom.radial(rn);
    let n = [r[0] / rn, r[1] / rn];
    let t = v1 / rn;
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let d = if i == j { 1.0 } else { 0.0 };
            h[i][j] = v2 * n[i] * n[j] + t * (d - n[i] * n[j]);
        }
    }
    Ok(h)
}

/// (r0, l) = (m·ip/E_max, r0 + E_max/(2ω²)).
pub fn truncation_bounds(field: &LaserField, atom: &TargetAtom, multiplier: f64) -> Result<Truncation> {
    if !(multiplier > 0.0) {
        return domain("multiplier must be positive");
    }
    let e_max = field.e_max();
    let r0 = multiplier * atom.ip / e_max;
    Ok(Truncation { r0, l: r0 + e_max / (2.0 * field.omega * field.omega) })
}
