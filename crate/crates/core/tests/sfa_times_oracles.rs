use nalgebra::Matrix4;
use num_complex::Complex64 as C;
use orbit_holography::field::{field_from_experiment, LaserField, TargetAtom};
use orbit_holography::sfa_times::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn paper(eps: f64) -> LaserField {
    field_from_experiment(2.5e14, 735.0, eps, 0.0).unwrap()
}

fn helium() -> TargetAtom {
    TargetAtom::new(0.90357, 1.0, None).unwrap()
}

/// Eigenvalues of the companion matrix, each given three Newton steps on the polynomial.
fn companion_roots(c: &QuarticCoefficients) -> Vec<C> {
    let z = C::new(0.0, 0.0);
    let o = C::new(1.0, 0.0);
    let m = Matrix4::new(-c.a3, -c.a2, -c.a1, -c.a0, o, z, z, z, z, o, z, z, z, z, o, z);
    let ev = m.schur().eigenvalues().expect("complex schur is triangular");
    ev.iter()
        .map(|&x0| {
            let mut x = x0;
            for _ in 0..3 {
                let f = (((x + c.a3) * x + c.a2) * x + c.a1) * x + c.a0;
                let d = ((x * 4.0 + c.a3 * 3.0) * x + c.a2 * 2.0) * x + c.a1;
                if d.norm() > 0.0 {
                    let s = f / d;
                    if s.norm() < 1e-4 * (1.0 + x.norm()) {
                        x -= s;
                    }
                }
            }
            x
        })
        .collect()
}

/// Independent 2D Newton on the real and imaginary parts of the saddle equation in t.
fn newton_2d(field: &LaserField, atom: &TargetAtom, p: [f64; 2], t0: C) -> C {
    let f = |t: C| saddle_residual(field, atom, p, t);
    let (mut x, mut y) = (t0.re, t0.im);
    for _ in 0..30 {
        let r = f(C::new(x, y));
        let h = 1e-7 * (1.0 + x.abs());
        let rx = (f(C::new(x + h, y)) - f(C::new(x - h, y))) / (2.0 * h);
        let ry = (f(C::new(x, y + h)) - f(C::new(x, y - h))) / (2.0 * h);
        let det = rx.re * ry.im - ry.re * rx.im;
        if det == 0.0 {
            break;
        }
        let dx = (r.re * ry.im - ry.re * r.im) / det;
        let dy = (rx.re * r.im - r.re * rx.im) / det;
        x -= dx;
        y -= dy;
        if dx.abs() + dy.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    C::new(x, y)
}

#[test]
fn residual_and_companion_suite() {
    let atom = helium();
    let tol = residual_tolerance(&atom);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_res: f64 = 0.0;
    let mut worst_root: f64 = 0.0;
    for _ in 0..10_000 {
        let eps = rng.gen_range(0.0..0.95);
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let f = paper(eps);
        let c = quartic_coefficients(&f, &atom, p).unwrap();
        let oracle = companion_roots(&c);
        let (t1, t2) = grouped_times(&f, &atom, p, 0).unwrap();
        for s in [t1, t2] {
            assert!(s.t_prime.im > 0.0);
            let r = saddle_residual(&f, &atom, p, s.t_prime).norm();
            worst_res = worst_res.max(r / tol);
            assert!(r < tol, "eps {eps} p {p:?} residual {r:e}");
            let xi = f.phase(s.t_prime).cos();
            let d = oracle.iter().map(|o| (o - xi).norm()).fold(f64::INFINITY, f64::min);
            worst_root = worst_root.max(d / xi.norm().max(1.0));
            assert!(d < 1e-10 * xi.norm().max(1.0), "eps {eps} p {p:?} companion mismatch {d:e}");
        }
    }
    println!("worst residual/tol {worst_res:e}, worst root mismatch {worst_root:e}");
}

#[test]
fn newton_refinement_is_a_fixed_point() {
    let atom = helium();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let eps = rng.gen_range(0.0..0.95);
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let f = paper(eps);
        let (t1, t2) = grouped_times(&f, &atom, p, 0).unwrap();
        for s in [t1, t2] {
            let refined = newton_2d(&f, &atom, p, s.t_prime);
            let d = ((refined - s.t_prime) * f.omega).norm();
            assert!(d < 1e-12, "eps {eps} p {p:?} drift {d:e}");
        }
    }
}

#[test]
fn linear_limit_equivalence() {
    let f = paper(0.0);
    let atom = helium();
    let n = 50;
    for i in 0..n {
        for j in 0..n {
            let p = [-2.0 + 4.0 * i as f64 / (n - 1) as f64, -2.0 + 4.0 * j as f64 / (n - 1) as f64];
            let c = quartic_coefficients(&f, &atom, p).unwrap();
            let (zeta, eta) = resolvent_zeta_eta(&c).unwrap();
            assert!(zeta.norm() < 1e-12 && eta.norm() < 1e-12);
            let k = C::new(0.0, (2.0 * atom.ip + p[1] * p[1]).sqrt());
            let lin: Vec<C> = [(-p[0] + k), (-p[0] - k)].iter().map(|x| x / (2.0 * f.up.sqrt())).collect();
            let (t1, t2) = grouped_times(&f, &atom, p, 0).unwrap();
            for s in [t1, t2] {
                let xi = f.phase(s.t_prime).cos();
                let d = lin.iter().map(|l| (l - xi).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-10 * xi.norm().max(1.0), "p {p:?} {d:e}");
            }
        }
    }
}

#[test]
fn reflection_symmetry_at_linear() {
    let f = paper(0.0);
    let atom = helium();
    for p in [[0.3, 0.4], [-1.1, 0.2], [0.0, 1.3], [1.7, 1.9]] {
        let (a1, a2) = grouped_times(&f, &atom, p, 0).unwrap();
        let (b1, b2) = grouped_times(&f, &atom, [p[0], -p[1]], 0).unwrap();
        assert!((a1.t_prime.im - b1.t_prime.im).abs() <= 1e-12 * a1.t_prime.im);
        assert!((a2.t_prime.im - b2.t_prime.im).abs() <= 1e-12 * a2.t_prime.im);
    }
}

#[test]
fn half_cycle_mapping() {
    let atom = helium();
    for eps in [0.0, 0.2, 0.5, 0.8] {
        let f = paper(eps);
        let half = f.period() / 2.0;
        for p in [[0.3, 0.4], [-1.1, 0.2], [0.7, -1.3]] {
            let (a1, a2) = grouped_times(&f, &atom, p, 0).unwrap();
            let (b1, b2) = grouped_times(&f, &atom, [-p[0], -p[1]], 0).unwrap();
            assert!((b1.t_prime - (a2.t_prime + half)).norm() < 1e-9, "eps {eps} p {p:?}");
            assert!((b2.t_prime - (a1.t_prime - half)).norm() < 1e-9, "eps {eps} p {p:?}");
        }
    }
}

#[test]
fn circular_approach_on_major_axis() {
    let atom = helium();
    let f = paper(0.999);
    for pz in [-1.5, -0.8, -0.3, 0.3, 0.8, 1.5] {
        let (t1, t2) = grouped_times(&f, &atom, [pz, 0.0], 0).unwrap();
        for s in [t1, t2] {
            let wt = (s.t_prime * f.omega).re;
            let m = (wt / PI - (wt / PI).round()).abs() * PI;
            assert!(m < 0.02, "pz {pz} wt {wt}");
        }
    }
    let fc = paper(1.0);
    for (p, n) in [([0.9, 0.0], 0), ([-0.4, 0.0], 3)] {
        let s = circular_limit_times(&fc, &atom, p, n).unwrap()[0];
        let wt = (s.t_prime * fc.omega).re;
        assert!((wt / PI - (wt / PI).round()).abs() * PI < 1e-10);
    }
}

#[test]
fn circular_rotated_residual() {
    let atom = helium();
    let f = paper(1.0);
    for ang in [0.3f64, 1.1, 2.5, 4.0, 5.9] {
        let p = [0.9 * ang.cos(), 0.9 * ang.sin()];
        let s = circular_limit_times(&f, &atom, p, 0).unwrap()[0];
        assert!(saddle_residual(&f, &atom, p, s.t_prime).norm() < 1e-10);
        let th = f.phase(s.t_prime).re;
        let expected = (ang + PI).rem_euclid(2.0 * PI);
        assert!((th - expected).abs() < 1e-12);
    }
}

#[test]
fn minor_axis_continuity() {
    let atom = helium();
    for eps in [0.0, 0.1, 0.3, 0.6] {
        let f = paper(eps);
        for px in [-1.2, -0.4, 0.3, 0.9] {
            let d = 1e-6;
            let (a1, a2) = grouped_times(&f, &atom, [d, px], 0).unwrap();
            let (b1, b2) = grouped_times(&f, &atom, [-d, px], 0).unwrap();
            assert!(((a1.t_prime - b1.t_prime) * f.omega).norm() < 1e-4, "eps {eps} px {px}");
            assert!(((a2.t_prime - b2.t_prime) * f.omega).norm() < 1e-4, "eps {eps} px {px}");
        }
    }
}

#[test]
fn residual_grows_linearly_off_saddle() {
    let atom = helium();
    let f = paper(0.3);
    let p = [0.5, 0.2];
    let (t1, _) = grouped_times(&f, &atom, p, 0).unwrap();
    let r1 = saddle_residual(&f, &atom, p, t1.t_prime + 1e-3).norm();
    let r2 = saddle_residual(&f, &atom, p, t1.t_prime + 2e-3).norm();
    assert!(r1 > 1e-6);
    assert!((r2 / r1 - 2.0).abs() < 0.01);
}

#[test]
fn stokes_crossings_shrink_with_ellipticity() {
    let atom = helium();
    let angle = 0.0;
    let mut prev = f64::INFINITY;
    for eps in [0.2, 0.4, 0.7] {
        let f = paper(eps);
        let pc = stokes_critical_momentum(&f, &atom, angle).unwrap();
        assert!(pc.is_finite());
        let d = stokes_difference(&f, &atom, [pc * angle.cos(), pc * angle.sin()]).unwrap();
        assert!(d.abs() < 1e-6, "eps {eps} residual {d}");
        assert!(pc < prev, "eps {eps}: {pc} !< {prev}");
        prev = pc;
    }
}

#[test]
fn stokes_absent_at_low_ellipticity() {
    let atom = helium();
    let f = paper(0.1);
    let pc = stokes_critical_momentum(&f, &atom, PI).unwrap();
    assert!(pc > 1.5);
    let f7 = paper(0.7);
    let pc7 = stokes_critical_momentum(&f7, &atom, 0.0).unwrap();
    let v = is_beyond_stokes(&f7, &atom, [pc7 + 0.05, 0.0]).unwrap();
    assert_ne!(v, StokesVerdict::KeepBoth);
    assert_eq!(is_beyond_stokes(&paper(0.0), &atom, [2.0, 0.0]).unwrap(), StokesVerdict::KeepBoth);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn grouped_times_solve_saddle(eps in 0.0f64..0.95, pz in -2.0f64..2.0, px in -2.0f64..2.0, n in 0i64..4) {
        let f = paper(eps);
        let atom = helium();
        let (t1, t2) = grouped_times(&f, &atom, [pz, px], n).unwrap();
        for s in [t1, t2] {
            prop_assert!(s.t_prime.im > 0.0);
            prop_assert!(saddle_residual(&f, &atom, [pz, px], s.t_prime).norm() < residual_tolerance(&atom));
            let w = (s.t_prime * f.omega).re;
            prop_assert!(w >= 2.0 * PI * n as f64 - 1e-9 && w < 2.0 * PI * (n + 1) as f64 + 1e-9);
        }
        prop_assert_eq!(t1.group, Group::T1);
        prop_assert_eq!(t2.group, Group::T2);
    }

    #[test]
    fn offset_phase_shifts_times(eps in 0.0f64..0.9, pz in -1.5f64..1.5, px in -1.5f64..1.5, phi in 0.0f64..6.28) {
        let atom = helium();
        let f0 = paper(eps);
        let f = LaserField::new(f0.up, f0.omega, eps, phi).unwrap();
        let (a1, a2) = grouped_times(&f0, &atom, [pz, px], 0).unwrap();
        let (b1, b2) = grouped_times(&f, &atom, [pz, px], 0).unwrap();
        for (a, b) in [(a1, b1), (a2, b2)] {
            let d = f0.phase(a.t_prime) - f.phase(b.t_prime);
            let k = (d.re / (2.0 * PI)).round();
            prop_assert!((d - 2.0 * PI * k).norm() < 1e-9);
        }
    }
}
