//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Run a subset with `cargo test --test acceptance -- 3 5`. The process fails
//! on any FAIL outside `KNOWN_FAILURES`; those stay reported as FAIL.

use nalgebra::Matrix4;
use orbit_holography::analysis::{imaginary_time_scans, pair_visibility, AxisKind, ScanMethod};
use orbit_holography::cqsfa::{minor_axis_orbits, CqsfaOptions, OrbitLabel};
use orbit_holography::field::{field_from_experiment, LaserField, TargetAtom};
use orbit_holography::pmd::{build_grid, compute_pmd, write_pmd, GridAxes, Method, PmdGrid, PmdOptions};
use orbit_holography::sfa_amplitude::{sfa_orbit_amplitudes, DipoleModel, StokesPolicy};
use orbit_holography::sfa_times::*;
use orbit_holography::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

/// 6: the ε = 0.3 lobes sit at the nonadiabatic maxima, not at εa.
/// 8: the Coulomb shift of Im t' halves between |p_x| = 0.3 and 1.5, it does not quarter.
const KNOWN_FAILURES: &[u32] = &[6, 8];

type Check = fn() -> (bool, String);

fn field(eps: f64) -> LaserField {
    field_from_experiment(2.5e14, 735.0, eps, 0.0).unwrap()
}

fn helium() -> TargetAtom {
    TargetAtom::new(0.90357, 1.0, None).unwrap()
}

fn main() {
    let picks: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, f64, Check); 10] = [
        (1, "critical ellipticity", 1.0, critical_ellipticity),
        (2, "saddle residual suite", 30.0, saddle_residuals),
        (3, "linear limit", 5.0, linear_limit),
        (4, "circular limit", 5.0, circular_limit),
        (5, "stokes monotonicity", 20.0, stokes_monotonicity),
        (6, "sfa pmd properties", 120.0, sfa_pmd_properties),
        (7, "zero-charge reduction", 600.0, zero_charge_reduction),
        (8, "cqsfa im t' behaviour", 900.0, cqsfa_imaginary_times),
        (9, "flipping-orbit suppression", 900.0, suppression_trend),
        (10, "holographic regressions", 1800.0, holographic_regressions),
    ];
    let mut unexpected = Vec::new();
    for (n, name, limit, check) in criteria {
        if !picks.is_empty() && !picks.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let pass = ok && secs < limit;
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} {n:>2} {name}: {detail} [{secs:.1} s of {limit} s]");
        if !pass && !KNOWN_FAILURES.contains(&n) {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn critical_ellipticity() -> (bool, String) {
    let mut out = Vec::new();
    let code = orbit_holography_cli::run(
        ["orbit-holography", "estimate", "--intensity", "2.5e14", "--wavelength", "735", "--ip", "0.90357"],
        &mut out,
    );
    let text = String::from_utf8(out).unwrap();
    let ec: f64 = match text.lines().find_map(|l| l.strip_prefix("eps_c = ")).and_then(|v| v.parse().ok()) {
        Some(v) => v,
        None => return (false, format!("exit {code}, no eps_c in output")),
    };
    ((ec - 0.334).abs() <= 0.005, format!("eps_c = {ec:.4}"))
}

/// Eigenvalues of the companion matrix with three guarded Newton steps.
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

fn saddle_residuals() -> (bool, String) {
    let atom = helium();
    let tol = 1e-9 * (2.0 * atom.ip).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_res, mut worst_root, mut bad) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..10_000 {
        let eps = rng.gen_range(0.0..=0.95);
        let p = [rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)];
        let f = field(eps);
        let Ok((t1, t2)) = grouped_times(&f, &atom, p, 0) else {
            bad += 1;
            continue;
        };
        let oracle = companion_roots(&quartic_coefficients(&f, &atom, p).unwrap());
        for s in [t1, t2] {
            let r = saddle_residual(&f, &atom, p, s.t_prime).norm();
            let xi = f.phase(s.t_prime).cos();
            let d = oracle.iter().map(|o| (o - xi).norm()).fold(f64::INFINITY, f64::min) / xi.norm().max(1.0);
            worst_res = worst_res.max(r);
            worst_root = worst_root.max(d);
            if !(r < tol && d < 1e-10) {
                bad += 1;
            }
        }
    }
    (bad == 0, format!("{bad} bad of 20000, worst residual {worst_res:.1e}, worst companion mismatch {worst_root:.1e}"))
}

/// Upper-half-plane phases in one cycle solving cos θ = (−p_z ± i√(2ip + p_x²)) / (2√Up).
fn linear_phases(f: &LaserField, atom: &TargetAtom, p: [f64; 2]) -> Vec<C> {
    let k = C::new(0.0, (2.0 * atom.ip + p[1] * p[1]).sqrt());
    let mut out = Vec::new();
    for xi in [(-p[0] + k), (-p[0] - k)] {
        let th = (xi / (2.0 * f.up.sqrt())).acos();
        for c in [th, -th] {
            if c.im > 0.0 {
                out.push(C::new(c.re.rem_euclid(2.0 * PI), c.im));
            }
        }
    }
    out
}

fn linear_limit() -> (bool, String) {
    let f = field(0.0);
    let atom = helium();
    let n = 50;
    let (mut worst_t, mut worst_ze) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let p = [-2.0 + 4.0 * i as f64 / (n - 1) as f64, -2.0 + 4.0 * j as f64 / (n - 1) as f64];
            let (zeta, eta) = resolvent_zeta_eta(&quartic_coefficients(&f, &atom, p).unwrap()).unwrap();
            worst_ze = worst_ze.max(zeta.norm()).max(eta.norm());
            let reference = linear_phases(&f, &atom, p);
            let (t1, t2) = grouped_times(&f, &atom, p, 0).unwrap();
            for s in [t1, t2] {
                let th = f.phase(s.t_prime);
                let d = reference
                    .iter()
                    .map(|r| {
                        let dre = (th.re - r.re + PI).rem_euclid(2.0 * PI) - PI;
                        dre.hypot(th.im - r.im)
                    })
                    .fold(f64::INFINITY, f64::min);
                worst_t = worst_t.max(d);
            }
        }
    }
    (worst_t < 1e-10 && worst_ze < 1e-12, format!("max |Δωt'| {worst_t:.1e}, max |ζ|,|η| {worst_ze:.1e}"))
}

fn distance_to_multiple_of_pi(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    r.min(PI - r)
}

fn circular_limit() -> (bool, String) {
    let atom = helium();
    let near = field(0.999);
    let exact = field(1.0);
    let pz: Vec<f64> = (1..=20).flat_map(|k| [0.1 * k as f64, -0.1 * k as f64]).collect();
    let (mut worst_near, mut worst_exact) = (0.0f64, 0.0f64);
    for &z in &pz {
        let (t1, t2) = grouped_times(&near, &atom, [z, 0.0], 0).unwrap();
        let dominant = if t1.t_prime.im < t2.t_prime.im { t1 } else { t2 };
        worst_near = worst_near.max(distance_to_multiple_of_pi(near.phase(dominant.t_prime).re));
        for s in circular_limit_times(&exact, &atom, [z, 0.0], 0).unwrap() {
            worst_exact = worst_exact.max(distance_to_multiple_of_pi(exact.phase(s.t_prime).re));
        }
    }
    (
        worst_near < 0.02 && worst_exact < 1e-10,
        format!("eps 0.999 max |Re ωt' mod π| {worst_near:.2e}, eps 1 {worst_exact:.1e}"),
    )
}

fn stokes_monotonicity() -> (bool, String) {
    let atom = helium();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    let mut parts = Vec::new();
    for eps in [0.2, 0.4, 0.7] {
        let f = field(eps);
        let Ok(pc) = stokes_critical_momentum(&f, &atom, 0.0) else {
            return (false, format!("no p_crit at eps {eps}"));
        };
        let d = stokes_difference(&f, &atom, [pc, 0.0]).unwrap().abs();
        ok &= pc < prev && d < 1e-6;
        prev = pc;
        parts.push(format!("{eps}: {pc:.3} (|ΔRe S| {d:.0e})"));
    }
    (ok, format!("p_crit {}", parts.join(", ")))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "off"
    }
}

fn square_axes(n: usize) -> GridAxes {
    GridAxes { pz_min: -1.5, pz_max: 1.5, n_z: n, px_min: -1.5, px_max: 1.5, n_x: n }
}

fn sfa_cut_visibility(eps: f64) -> f64 {
    let f = field(eps);
    let atom = helium();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for k in 0..=200 {
        let px = -1.5 + 3.0 * k as f64 / 200.0;
        let m = sfa_orbit_amplitudes(&f, &atom, [0.0, px], DipoleModel::Unit, StokesPolicy::Auto).unwrap();
        a.push(m[0].unwrap_or(C::from(0.0)));
        b.push(m[1].unwrap_or(C::from(0.0)));
    }
    pair_visibility(&a, &b).unwrap()
}

fn sfa_pmd_properties() -> (bool, String) {
    let f = field(0.3);
    let atom = helium();
    let axes = square_axes(200);
    let grid = compute_pmd(Method::Sfa, &f, &atom, build_grid(axes).unwrap(), &PmdOptions::default()).unwrap();
    let (h, _) = axes.spacing();
    let strongest = |upper: bool| {
        (0..axes.len())
            .filter(|&i| (axes.cell(i)[1] > 0.0) == upper)
            .max_by(|&i, &j| grid.probability[i].total_cmp(&grid.probability[j]))
            .map(|i| axes.cell(i))
            .unwrap()
    };
    let expected = 0.3 * f.amplitude();
    let lobes = [strongest(true), strongest(false)];
    let lobes_ok = lobes.iter().all(|p| p[0].abs() <= h && (p[1].abs() - expected).abs() <= h);

    let vis: Vec<f64> = [0.1, 0.2, 0.3, 0.35].iter().map(|&e| sfa_cut_visibility(e)).collect();
    let vis_ok = vis.windows(2).all(|w| w[1] < w[0]) && vis[3] < 0.1;
    (
        lobes_ok && vis_ok,
        format!(
            "lobes ({:.3}, {:.3}) and ({:.3}, {:.3}) vs (0, ±{expected:.3}) with cell {h:.4} [{}]; visibility {:.3} {:.3} {:.3} {:.3} [{}]",
            lobes[0][0],
            lobes[0][1],
            lobes[1][0],
            lobes[1][1],
            verdict(lobes_ok),
            vis[0],
            vis[1],
            vis[2],
            vis[3],
            verdict(vis_ok),
        ),
    )
}

fn zero_charge_reduction() -> (bool, String) {
    let f = field(0.3);
    let atom = TargetAtom::new(0.90357, 0.0, None).unwrap();
    let axes = square_axes(41);
    let opts = PmdOptions { orbits: vec![OrbitLabel::A, OrbitLabel::B], stokes: StokesPolicy::KeepBoth, ..Default::default() };
    let grid = compute_pmd(Method::Cqsfa, &f, &atom, build_grid(axes).unwrap(), &opts).unwrap();
    let (mut worst, mut missing) = (0.0f64, 0usize);
    for i in 0..axes.len() {
        let sfa = sfa_orbit_amplitudes(&f, &atom, axes.cell(i), DipoleModel::Unit, StokesPolicy::KeepBoth).unwrap();
        let scale = sfa[0].unwrap().norm().max(sfa[1].unwrap().norm());
        for (k, label) in [OrbitLabel::A, OrbitLabel::B].into_iter().enumerate() {
            match grid.channel(label).unwrap().amplitude[i] {
                Some(m) => worst = worst.max((m - sfa[k].unwrap()).norm() / scale),
                None => missing += 1,
            }
        }
    }
    (missing == 0 && worst < 1e-8, format!("max relative deviation {worst:.1e}, {missing} missing amplitudes"))
}

fn scan_samples() -> Vec<f64> {
    (0..21).map(|i| -1.5 + 0.15 * i as f64).collect()
}

fn cqsfa_imaginary_times() -> (bool, String) {
    let atom = helium();
    let opts = CqsfaOptions::default();
    let px = scan_samples();
    let n = px.len();
    let orbits = OrbitLabel::ALL;
    let scans = imaginary_time_scans(ScanMethod::Cqsfa, &field(0.0), &atom, &orbits, AxisKind::FinalPx, &px, &opts).unwrap();
    let (mut even_worst, mut gaps) = (0.0f64, 0usize);
    for s in &scans {
        for i in 0..n / 2 {
            let (l, r) = (s.ordinate[i], s.ordinate[n - 1 - i]);
            if l.is_finite() && r.is_finite() {
                even_worst = even_worst.max((l - r).abs());
            } else {
                gaps += 1;
            }
        }
    }
    let even_ok = gaps == 0 && even_worst < 1e-6;

    let sfa = imaginary_time_scans(ScanMethod::Sfa, &field(0.0), &atom, &[OrbitLabel::A], AxisKind::FinalPx, &px, &opts).unwrap();
    let dev = |i: usize| (scans[0].ordinate[i] - sfa[0].ordinate[i]).abs();
    let (far, near) = ([0, n - 1], [8, 12]);
    let ratios: Vec<f64> = far.iter().zip(near).map(|(&f, c)| dev(f) / dev(c)).collect();
    let tends_ok = ratios.iter().all(|r| *r < 0.25);

    let mirror = imaginary_time_scans(ScanMethod::Cqsfa, &field(0.1), &atom, &[OrbitLabel::A, OrbitLabel::B], AxisKind::FinalPx, &px, &opts).unwrap();
    let mut mirror_worst = 0.0f64;
    let mut mirror_gaps = 0usize;
    // p = 0 has no asymptotic continuum orbit, so the self-mirrored centre is skipped
    for i in (0..n).filter(|&i| i != n / 2) {
        let (a, b) = (mirror[0].ordinate[i], mirror[1].ordinate[n - 1 - i]);
        if a.is_finite() && b.is_finite() {
            mirror_worst = mirror_worst.max((a - b).abs());
        } else {
            mirror_gaps += 1;
        }
    }
    let mirror_ok = mirror_gaps == 0 && mirror_worst < 1e-4;
    (
        even_ok && tends_ok && mirror_ok,
        format!(
            "evenness {even_worst:.1e} ({gaps} gap pairs) [{}]; a vs SFA deviation ratio 1.5/0.3 {:.3} (-) {:.3} (+) [{}]; eps 0.1 a/b mirror {mirror_worst:.1e} ({mirror_gaps} gaps) [{}]",
            verdict(even_ok),
            ratios[0],
            ratios[1],
            verdict(tends_ok),
            verdict(mirror_ok)
        ),
    )
}

fn suppression_trend() -> (bool, String) {
    let atom = helium();
    let mut prev = [f64::NEG_INFINITY; 2];
    let mut ok = true;
    let mut rows = Vec::new();
    for eps in [0.0, 0.1, 0.2, 0.3] {
        let by = minor_axis_orbits(&field(eps), &atom, &[0.5], &CqsfaOptions::default()).unwrap();
        let mut row = Vec::new();
        for (k, l) in [OrbitLabel::C, OrbitLabel::D].into_iter().enumerate() {
            let v = by[&l][0].map_or(f64::NAN, |s| s.t_prime.im);
            ok &= v >= prev[k];
            prev[k] = v;
            row.push(format!("{v:.3}"));
        }
        rows.push(format!("{eps}: c {} d {}", row[0], row[1]));
    }
    (ok, rows.join(", "))
}

fn visibility_over(grid: &PmdGrid, pair: (OrbitLabel, OrbitLabel), cells: impl Iterator<Item = usize>) -> (f64, usize) {
    let a = &grid.channel(pair.0).unwrap().amplitude;
    let b = &grid.channel(pair.1).unwrap().amplitude;
    let (mut x, mut y, mut skipped) = (Vec::new(), Vec::new(), 0usize);
    for i in cells {
        match (a[i], b[i]) {
            (Some(u), Some(v)) => {
                x.push(u);
                y.push(v);
            }
            _ => skipped += 1,
        }
    }
    (pair_visibility(&x, &y).unwrap_or(f64::NAN), skipped)
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/cqsfa_eps0_101.pmd")
}

fn holographic_regressions() -> (bool, String) {
    let axes = square_axes(101);
    let opts = PmdOptions { orbits: OrbitLabel::ALL.to_vec(), ..Default::default() };
    let grid = compute_pmd(Method::Cqsfa, &field(0.0), &helium(), build_grid(axes).unwrap(), &opts).unwrap();

    let inner = (0..axes.len()).filter(|&i| {
        let p = axes.cell(i);
        p[0].hypot(p[1]) < 0.35
    });
    let (fan, fan_skipped) = visibility_over(&grid, (OrbitLabel::A, OrbitLabel::B), inner);
    let row = |px: f64| {
        let (_, hx) = axes.spacing();
        let ix = ((px - axes.px_min) / hx).round() as usize;
        (axes.px(ix), (0..axes.n_z).map(move |iz| axes.index(iz, ix)))
    };
    let (x0, on_axis) = row(0.0);
    let (x1, off_axis) = row(0.5);
    let (spider0, s0) = visibility_over(&grid, (OrbitLabel::B, OrbitLabel::C), on_axis);
    let (spider1, s1) = visibility_over(&grid, (OrbitLabel::B, OrbitLabel::C), off_axis);
    let verified = fan > 0.5 && spider0 > spider1;

    let mut bytes = Vec::new();
    write_pmd(&grid, &mut bytes).unwrap();
    let path = golden_path();
    let golden = if path.exists() {
        if std::fs::read(&path).unwrap() == bytes {
            "bit-identical to golden"
        } else {
            "differs from golden"
        }
    } else if verified {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &bytes).unwrap();
        "golden written"
    } else {
        "not verified, no golden written"
    };
    (
        verified && golden != "differs from golden",
        format!(
            "a+b visibility |p|<0.35 {fan:.3} ({fan_skipped} masked); b+c at p_x={x0:.2} {spider0:.3} ({s0} masked) vs p_x={x1:.2} {spider1:.3} ({s1} masked); masked {:.1}%; {golden}",
            100.0 * grid.masked_fraction()
        ),
    )
}
