//! Closed-form estimates, ionization-time scans and visibility measures.

use crate::cqsfa::{minor_axis_orbits, CqsfaOptions, OrbitLabel};
use crate::error::{domain, Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_times::grouped_times;
use num_complex::Complex64 as C;
use std::io::Write;

/// Centre of the n-th half-cycle lobe, −A at the n-th field peak.
pub fn distribution_centers(field: &LaserField, n: i64) -> Vec2 {
    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    [0.0, -field.eps * field.amplitude() * sign]
}

/// −A(t) for an arbitrary (real) ionization time.
pub fn distribution_center_at(field: &LaserField, t: f64) -> Vec2 {
    let a = field.vector_potential_real(t);
    [-a[0], -a[1]]
}

/// Separation of the two half-cycle lobes, 4ε√Up/√(1+ε²).
pub fn center_separation(field: &LaserField) -> f64 {
    2.0 * field.eps * field.amplitude()
}

pub fn transverse_width(field: &LaserField, atom: &TargetAtom) -> f64 {
    let e2 = field.eps * field.eps;
    (field.omega * field.up.sqrt() / ((1.0 + e2).sqrt() * (2.0 * atom.ip).sqrt())).sqrt()
}

/// Ellipticity at which the lobes sit five widths apart.
pub fn critical_ellipticity(field: &LaserField, atom: &TargetAtom) -> f64 {
    let (w, ip, up) = (field.omega, atom.ip, field.up);
    5.0 * w.sqrt() / (32.0 * ip.sqrt() * up.sqrt()) * (25.0 * w + (2048.0 * ip * up + 625.0 * w * w).sqrt()).sqrt()
}

/// Ellipticity at which the lobes sit `k` widths apart.
pub fn critical_ellipticity_for(field: &LaserField, atom: &TargetAtom, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return domain("threshold must be positive");
    }
    let up = field.up;
    let c = k.powi(4) * field.omega * field.omega * up / (2.0 * atom.ip);
    let x = (c + (c * c + 1024.0 * up * up * c).sqrt()) / (512.0 * up * up);
    Ok(x.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMethod {
    Sfa,
    Cqsfa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    FinalPx,
    InitialPx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCurve {
    pub abscissa: Vec<f64>,
    /// NaN marks a continuation gap.
    pub ordinate: Vec<f64>,
    pub orbit_label: OrbitLabel,
    pub method: ScanMethod,
    pub axis_kind: AxisKind,
}

impl ScanCurve {
    pub fn write<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> std::io::Result<()> {
        writeln!(w, "# orbit = {}", self.orbit_label)?;
        writeln!(w, "# method = {}", if self.method == ScanMethod::Sfa { "sfa" } else { "cqsfa" })?;
        writeln!(w, "# axis = {}", if self.axis_kind == AxisKind::FinalPx { "final_px" } else { "initial_px" })?;
        for (k, v) in extra {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# p  im_t")?;
        for (x, y) in self.abscissa.iter().zip(&self.ordinate) {
            writeln!(w, "{x:.16e} {y:.16e}")?;
        }
        Ok(())
    }

    /// Ordinate at an abscissa value present in the scan.
    pub fn at(&self, x: f64) -> Option<f64> {
        self.abscissa.iter().position(|&a| (a - x).abs() < 1e-12).map(|i| self.ordinate[i]).filter(|y| y.is_finite())
    }
}

/// Im t' along the p_fz = 0 cut. `samples` are p_x values in increasing order.
pub fn imaginary_time_scan(
    method: ScanMethod,
    field: &LaserField,
    atom: &TargetAtom,
    orbit: OrbitLabel,
    axis_kind: AxisKind,
    samples: &[f64],
    opts: &CqsfaOptions,
) -> Result<ScanCurve> {
    Ok(imaginary_time_scans(method, field, atom, &[orbit], axis_kind, samples, opts)?.remove(0))
}

/// Several orbits from one continuation pass.
pub fn imaginary_time_scans(
    method: ScanMethod,
    field: &LaserField,
    atom: &TargetAtom,
    orbits: &[OrbitLabel],
    axis_kind: AxisKind,
    samples: &[f64],
    opts: &CqsfaOptions,
) -> Result<Vec<ScanCurve>> {
    if samples.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("scan samples must be strictly increasing");
    }
    let points: Vec<Vec<Option<(f64, f64)>>> = match method {
        ScanMethod::Sfa => {
            if orbits.iter().any(|o| !matches!(o, OrbitLabel::A | OrbitLabel::B)) {
                return domain("the SFA has only orbits a and b");
            }
            let times = samples.iter().map(|&px| grouped_times(field, atom, [0.0, px], 0)).collect::<Result<Vec<_>>>()?;
            orbits
                .iter()
                .map(|&o| {
                    samples
                        .iter()
                        .zip(&times)
                        .map(|(&px, (t1, t2))| {
                            let t = if o == OrbitLabel::A { t1.t_prime } else { t2.t_prime };
                            Some((px, t.im))
                        })
                        .collect()
                })
                .collect()
        }
        ScanMethod::Cqsfa => {
            let by = minor_axis_orbits(field, atom, samples, opts)?;
            orbits
                .iter()
                .map(|o| {
                    by[o]
                        .iter()
                        .map(|s| {
                            s.map(|s| {
                                let x = if axis_kind == AxisKind::InitialPx { s.p0[1] } else { s.target[1] };
                                (x, s.t_prime.im)
                            })
                        })
                        .collect()
                })
                .collect()
        }
    };
    Ok(orbits
        .iter()
        .zip(points)
        .map(|(&orbit_label, points)| {
            let mut abscissa = Vec::new();
            let mut ordinate = Vec::new();
            match axis_kind {
                AxisKind::FinalPx => {
                    for (x, p) in samples.iter().zip(&points) {
                        abscissa.push(*x);
                        ordinate.push(p.map_or(f64::NAN, |q| q.1));
                    }
                }
                AxisKind::InitialPx => {
                    let mut pts: Vec<(f64, f64)> = points.into_iter().flatten().collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pts.dedup_by(|a, b| a.0 == b.0);
                    for (x, y) in pts {
                        abscissa.push(x);
                        ordinate.push(y);
                    }
                }
            }
            ScanCurve { abscissa, ordinate, orbit_label, method, axis_kind }
        })
        .collect())
}

fn window_bounds(i: usize, window: usize, len: usize) -> (usize, usize) {
    let lo = i.saturating_sub(window / 2).min(len - window);
    (lo, lo + window)
}

fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let (lo, hi) = window_bounds(i, window, v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local fringe contrast of a cut: divide by a moving-average envelope of
/// width `window` samples, take (max−min)/(max+min) over the same window, and
/// average with the cut's intensity as weight.
pub fn fringe_visibility(cut: &[f64], window: usize) -> Result<f64> {
    if cut.len() < 8 {
        return domain("visibility needs at least 8 samples");
    }
    if cut.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return domain("cut must be finite and nonnegative");
    }
    if cut.iter().all(|&v| v == 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    let window = window.clamp(2, cut.len());
    let env = moving_average(cut, window);
    let ratio: Vec<f64> = cut.iter().zip(&env).map(|(c, e)| if *e > 0.0 { c / e } else { 0.0 }).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..cut.len() {
        let (lo, hi) = window_bounds(i, window, cut.len());
        let seg = &ratio[lo..hi];
        let mx = seg.iter().cloned().fold(f64::MIN, f64::max);
        let mn = seg.iter().cloned().fold(f64::MAX, f64::min);
        let v = if mx + mn > 0.0 { (mx - mn) / (mx + mn) } else { 0.0 };
        num += cut[i] * v;
        den += cut[i];
    }
    Ok(num / den)
}

/// Fringe period in samples from the relative phase of two orbits along a cut.
pub fn fringe_window(phase_difference: &[f64]) -> usize {
    let mut slopes: Vec<f64> = phase_difference.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|s| s.is_finite() && *s > 0.0).collect();
    if slopes.is_empty() {
        return phase_difference.len().max(2);
    }
    slopes.sort_by(f64::total_cmp);
    let median = slopes[slopes.len() / 2];
    ((2.0 * std::f64::consts::PI / median).round() as usize).clamp(2, phase_difference.len().max(2))
}

/// Two-orbit visibility Σ2|A||B| / Σ(|A|² + |B|²): the intensity-weighted
/// contrast of the fringes |A + B|² can show, independent of their spacing.
/// Non-finite pairs are skipped.
pub fn pair_visibility(a: &[C], b: &[C]) -> Result<f64> {
    if a.len() != b.len() {
        return domain("amplitude cuts differ in length");
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        num += 2.0 * x.norm() * y.norm();
        den += x.norm_sqr() + y.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(num / den)
}
