use crate::config::{resolve_physics, ConfigFile, Physics, PhysicsFlags};
use crate::{CliError, Command, PairArgs, PhysicsArgs, PmdArgs, ScanArgs, SolverArgs, StokesArgs, TimesArgs, TrajArgs, EstimateArgs};
use orbit_holography::analysis::{
    center_separation, critical_ellipticity, critical_ellipticity_for, distribution_centers, imaginary_time_scans, transverse_width, AxisKind, ScanMethod,
};
use orbit_holography::cqsfa::{assign_orbits, fill_class, propagate, CqsfaOptions, OrbitLabel, SolutionClass};
use orbit_holography::pmd::{build_grid, compute_pmd, normalize_log, pair_interference, read_pmd, write_pmd, GridAxes, Method, PmdOptions, Scale};
use orbit_holography::sfa_amplitude::{DipoleModel, StokesPolicy};
use orbit_holography::sfa_times::{grouped_times, saddle_residual, stokes_critical_momentum};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn dispatch<W: Write>(cmd: Command, out: &mut W) -> Result<(), CliError> {
    match cmd {
        Command::Pmd(a) => pmd(a, out),
        Command::Pair(a) => pair(a, out),
        Command::Times(a) => times(a, out),
        Command::ScanImt(a) => scan(a, out),
        Command::Stokes(a) => stokes(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Traj(a) => traj(a, out),
    }
}

fn io<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io(path))
}

fn report<W: Write>(out: &mut W, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::Io(e.to_string()))
}

fn load(args: &PhysicsArgs) -> Result<(ConfigFile, Physics), CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = PhysicsFlags {
        intensity: args.intensity,
        wavelength: args.wavelength,
        up: args.up,
        omega: args.omega,
        eps: args.eps,
        phi: args.phi,
        ip: args.ip,
        z_eff: args.z_eff,
        truncation: args.truncation.clone(),
    };
    let physics = resolve_physics(&flags, &file)?;
    Ok((file, physics))
}

fn solver(args: &SolverArgs, file: &ConfigFile, snapshot: &mut Vec<(String, String)>) -> Result<CqsfaOptions, CliError> {
    let d = CqsfaOptions::default();
    let opts = CqsfaOptions {
        n_prop_cycles: file.pick_or(args.n_prop, "n_prop", d.n_prop_cycles)?,
        tolerance: file.pick_or(args.tolerance, "tolerance", d.tolerance)?,
        max_iterations: file.pick_or(args.max_iterations, "max_iterations", d.max_iterations)?,
        ..d
    };
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(CliError::Config("tolerance and max_iterations must be positive".into()));
    }
    snapshot.push(("n_prop".into(), opts.n_prop_cycles.to_string()));
    snapshot.push(("tolerance".into(), opts.tolerance.to_string()));
    snapshot.push(("max_iterations".into(), opts.max_iterations.to_string()));
    Ok(opts)
}

fn parse_orbits(s: &str) -> Result<Vec<OrbitLabel>, CliError> {
    let v = s.split(',').map(|l| OrbitLabel::parse(l.trim())).collect::<orbit_holography::Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(CliError::Config("empty orbit list".into()));
    }
    Ok(v)
}

fn parse_scale(s: &str) -> Result<Scale, CliError> {
    match s {
        "linear" => Ok(Scale::Linear),
        "log10" => Ok(Scale::Log10),
        _ => Err(CliError::Config(format!("scale must be linear or log10, got {s:?}"))),
    }
}

fn pmd<W: Write>(a: PmdArgs, out: &mut W) -> Result<(), CliError> {
    let (file, physics) = load(&a.physics)?;
    let mut snapshot = physics.snapshot.clone();
    let method_s = file.pick_or(a.method, "method", "sfa".to_string())?;
    let method = Method::parse(&method_s)?;
    let orbits_s = file.pick_or(a.orbits, "orbits", "a,b".to_string())?;
    let orbits = parse_orbits(&orbits_s)?;
    let n_cycles = file.pick_or(a.n_cycles, "n_cycles", 4u32)?;
    let axes = GridAxes {
        pz_min: file.pick_or(a.pz_min, "pz_min", -1.5)?,
        pz_max: file.pick_or(a.pz_max, "pz_max", 1.5)?,
        n_z: file.pick_or(a.n_z, "n_z", 101)?,
        px_min: file.pick_or(a.px_min, "px_min", -1.5)?,
        px_max: file.pick_or(a.px_max, "px_max", 1.5)?,
        n_x: file.pick_or(a.n_x, "n_x", 101)?,
    };
    let dipole_s = file.pick_or(a.dipole, "dipole", "unit".to_string())?;
    let dipole = match dipole_s.as_str() {
        "unit" => DipoleModel::Unit,
        "hydrogenic" => DipoleModel::Hydrogenic1s,
        d => return Err(CliError::Config(format!("dipole must be unit or hydrogenic, got {d:?}"))),
    };
    let stokes_s = file.pick_or(a.stokes, "stokes", "auto".to_string())?;
    let stokes = match stokes_s.as_str() {
        "auto" => StokesPolicy::Auto,
        "keep" => StokesPolicy::KeepBoth,
        "discard" => StokesPolicy::Discard,
        s => return Err(CliError::Config(format!("stokes must be auto, keep or discard, got {s:?}"))),
    };
    let scale_s = file.pick_or(a.scale, "scale", "log10".to_string())?;
    parse_scale(&scale_s)?;
    let floor = file.pick_or(a.floor, "floor", 6.0)?;
    if !(floor > 0.0) {
        return Err(CliError::Config("floor must be positive".into()));
    }
    snapshot.push(("method".into(), method_s));
    snapshot.push(("orbits".into(), orbits_s));
    snapshot.push(("n_cycles".into(), n_cycles.to_string()));
    let cqsfa = solver(&a.solver, &file, &mut snapshot)?;
    snapshot.push(("dipole".into(), dipole_s));
    snapshot.push(("stokes".into(), stokes_s));
    snapshot.push(("scale".into(), scale_s.clone()));
    snapshot.push(("floor".into(), floor.to_string()));

    let mut grid = build_grid(axes)?;
    grid.metadata = snapshot;
    let opts = PmdOptions { orbits, n_cycles, dipole, stokes, cqsfa };
    let grid = compute_pmd(method, &physics.field, &physics.atom, grid, &opts)?;
    let mut w = create(&a.output)?;
    write_pmd(&grid, &mut w).and_then(|_| w.flush()).map_err(io(&a.output))?;
    let script = plot_script_path(&a.output);
    std::fs::write(&script, plot_script(&a.output, &scale_s, floor)).map_err(io(&script))?;

    let best = (0..axes.len()).filter(|&i| grid.probability[i].is_finite()).max_by(|&x, &y| grid.probability[x].total_cmp(&grid.probability[y]));
    if let Some(i) = best {
        let p = axes.cell(i);
        report(out, format_args!("max at pz = {:.4}, px = {:.4}\n", p[0], p[1]))?;
    }
    report(out, format_args!("masked fraction = {}\nstatus = {}\n", grid.meta("masked_fraction").unwrap_or("0"), grid.meta("status").unwrap_or("ok")))?;
    report(out, format_args!("wrote {} and {}\n", a.output.display(), script.display()))
}

pub fn plot_script_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".plot.py");
    PathBuf::from(s)
}

fn plot_script(data: &Path, scale: &str, floor: f64) -> String {
    let name = data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        r##"# Plot recipe for {name}: columns pz,px,prob,... with pz fastest.
import sys
import numpy as np
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{name}"
header = {{}}
with open(path) as fh:
    for line in fh:
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition("=")
        header[key.strip()] = value.strip()
data = np.loadtxt(path, delimiter=",", comments="#")
nz, nx = int(header["n_z"]), int(header["n_x"])
prob = data[:, 2].reshape(nx, nz)
prob = prob / np.nanmax(prob)
if "{scale}" == "log10":
    prob = np.maximum(np.log10(prob), -{floor})
extent = [float(header["pz_min"]), float(header["pz_max"]), float(header["px_min"]), float(header["px_max"])]
plt.imshow(prob, origin="lower", extent=extent, aspect="equal", cmap="viridis")
plt.xlabel("p_z (a.u.)")
plt.ylabel("p_x (a.u.)")
plt.colorbar()
plt.savefig(path + ".png", dpi=150)
"##
    )
}

fn pair<W: Write>(a: PairArgs, out: &mut W) -> Result<(), CliError> {
    let labels = parse_orbits(&a.pair)?;
    if labels.len() != 2 {
        return Err(CliError::Config("pair needs exactly two orbit labels".into()));
    }
    let scale = parse_scale(&a.scale)?;
    let f = File::open(&a.input).map_err(io(&a.input))?;
    let grid = read_pmd(BufReader::new(f))?;
    let values = normalize_log(&pair_interference(&grid, (labels[0], labels[1]))?, scale, a.floor)?;
    let mut w = create(&a.output)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "# pair = {},{}", labels[0], labels[1])?;
        writeln!(w, "# scale = {}", a.scale)?;
        writeln!(w, "# pz px value")?;
        for (i, v) in values.iter().enumerate() {
            let p = grid.axes.cell(i);
            writeln!(w, "{:.16e} {:.16e} {:.16e}", p[0], p[1], v)?;
        }
        w.flush()
    })();
    body.map_err(io(&a.output))?;
    report(out, format_args!("wrote {}\n", a.output.display()))
}

fn times<W: Write>(a: TimesArgs, out: &mut W) -> Result<(), CliError> {
    let (_, ph) = load(&a.physics)?;
    let p = [a.pz, a.px];
    let (t1, t2) = grouped_times(&ph.field, &ph.atom, p, a.cycle)?;
    for (name, s) in [("t1", t1), ("t2", t2)] {
        let res = saddle_residual(&ph.field, &ph.atom, p, s.t_prime).norm();
        report(out, format_args!("{name} = {:.12} {:+.12}i  branch {:?}  residual {:.3e}\n", s.t_prime.re, s.t_prime.im, s.branch, res))?;
    }
    Ok(())
}

fn scan<W: Write>(a: ScanArgs, out: &mut W) -> Result<(), CliError> {
    let (file, ph) = load(&a.physics)?;
    let mut snapshot = ph.snapshot.clone();
    let opts = solver(&a.solver, &file, &mut snapshot)?;
    let method = match a.method.as_str() {
        "sfa" => ScanMethod::Sfa,
        "cqsfa" => ScanMethod::Cqsfa,
        m => return Err(CliError::Config(format!("unknown method {m:?}"))),
    };
    let axis = match a.axis.as_str() {
        "final_px" => AxisKind::FinalPx,
        "initial_px" => AxisKind::InitialPx,
        x => return Err(CliError::Config(format!("axis must be final_px or initial_px, got {x:?}"))),
    };
    if a.n < 2 || !(a.px_max > a.px_min) {
        return Err(CliError::Config("scan needs n ≥ 2 and px_max > px_min".into()));
    }
    let samples: Vec<f64> = (0..a.n).map(|i| a.px_min + (a.px_max - a.px_min) * i as f64 / (a.n - 1) as f64).collect();
    let orbits = parse_orbits(&a.orbits)?;
    let curves = imaginary_time_scans(method, &ph.field, &ph.atom, &orbits, axis, &samples, &opts)?;
    for c in curves {
        let mut path = a.output.as_os_str().to_owned();
        path.push(format!("_{}.dat", c.orbit_label));
        let path = PathBuf::from(path);
        let mut w = create(&path)?;
        c.write(&mut w, &snapshot).and_then(|_| w.flush()).map_err(io(&path))?;
        let gaps = c.ordinate.iter().filter(|v| v.is_nan()).count();
        report(out, format_args!("orbit {}: {} points, {gaps} gaps -> {}\n", c.orbit_label, c.abscissa.len(), path.display()))?;
    }
    Ok(())
}

fn stokes<W: Write>(a: StokesArgs, out: &mut W) -> Result<(), CliError> {
    let (_, ph) = load(&a.physics)?;
    if a.n_angles == 0 {
        return Err(CliError::Config("n_angles must be positive".into()));
    }
    let mut text = String::from("# angle p_crit\n");
    for k in 0..a.n_angles {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / a.n_angles as f64;
        let pc = stokes_critical_momentum(&ph.field, &ph.atom, angle)?;
        text.push_str(&format!("{angle:.16e} {pc:.16e}\n"));
    }
    match a.output {
        Some(path) => {
            std::fs::write(&path, text).map_err(io(&path))?;
            report(out, format_args!("wrote {}\n", path.display()))
        }
        None => report(out, format_args!("{text}")),
    }
}

fn estimate<W: Write>(a: EstimateArgs, out: &mut W) -> Result<(), CliError> {
    let (_, ph) = load(&a.physics)?;
    let (f, atom) = (&ph.field, &ph.atom);
    report(out, format_args!("eps_c = {:.4}\n", critical_ellipticity(f, atom)))?;
    if a.threshold != 5.0 {
        report(out, format_args!("eps_c({}) = {:.4}\n", a.threshold, critical_ellipticity_for(f, atom, a.threshold)?))?;
    }
    for n in [0, 1] {
        let c = distribution_centers(f, n);
        report(out, format_args!("center_{n} = ({:.4}, {:.4})\n", c[0], c[1]))?;
    }
    report(out, format_args!("separation = {:.4}\nsigma_perp = {:.4}\n", center_separation(f), transverse_width(f, atom)))
}

fn traj<W: Write>(a: TrajArgs, out: &mut W) -> Result<(), CliError> {
    let (file, ph) = load(&a.physics)?;
    let opts = solver(&a.solver, &file, &mut Vec::new())?;
    let label = OrbitLabel::parse(&a.orbit)?;
    let p = [a.pz, a.px];
    let shell = p[0].hypot(p[1]).max(0.05);
    let mut by_class = Vec::new();
    for class in SolutionClass::ALL {
        by_class.push((class, fill_class(&ph.field, &ph.atom, class, &[p], shell, &opts)?));
    }
    let sol = assign_orbits(&by_class)[&label][0].ok_or_else(|| orbit_holography::Error::NoSolution(format!("orbit {label} not found at {p:?}")))?;
    let t_r = sol.t_prime.re;
    let t_off = opts.horizon(&ph.field, t_r);
    let tr = propagate(&ph.field, &ph.atom, sol.exit_position, sol.p0, t_r, t_off - t_r)?;
    let mut w = create(&a.output)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "# orbit = {label}")?;
        writeln!(w, "# t_prime = {} {}", sol.t_prime.re, sol.t_prime.im)?;
        writeln!(w, "# p0 = {} {}", sol.p0[0], sol.p0[1])?;
        writeln!(w, "# p canonical")?;
        writeln!(w, "# tau r_z r_x p_z p_x")?;
        for s in &tr.samples {
            writeln!(w, "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}", s.tau, s.r[0], s.r[1], s.p[0], s.p[1])?;
        }
        w.flush()
    })();
    body.map_err(io(&a.output))?;
    report(out, format_args!("orbit {label}: t' = {:.6}{:+.6}i, {} samples -> {}\n", sol.t_prime.re, sol.t_prime.im, tr.samples.len(), a.output.display()))
}
