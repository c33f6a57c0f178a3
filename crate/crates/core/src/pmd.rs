//! Momentum-grid assembly, pair panels, normalization and the PMD text format.

use crate::cqsfa::{assign_orbits, fill_class, orbit_term, CqsfaOptions, OrbitLabel, SolutionClass};
use crate::error::{domain, Error, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_amplitude::{cycle_increment, cycle_sum, sfa_orbit_amplitudes, DipoleModel, StokesPolicy};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use std::io::{BufRead, Write};

pub const FORMAT_VERSION: u32 = 1;
/// Masked fraction above which a run is flagged.
pub const MASK_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxes {
    pub pz_min: f64,
    pub pz_max: f64,
    pub n_z: usize,
    pub px_min: f64,
    pub px_max: f64,
    pub n_x: usize,
}

impl GridAxes {
    pub fn pz(&self, iz: usize) -> f64 {
        linspace_at(self.pz_min, self.pz_max, self.n_z, iz)
    }

    pub fn px(&self, ix: usize) -> f64 {
        linspace_at(self.px_min, self.px_max, self.n_x, ix)
    }

    pub fn len(&self) -> usize {
        self.n_z * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell index, p_z fastest.
    pub fn index(&self, iz: usize, ix: usize) -> usize {
        ix * self.n_z + iz
    }

    pub fn cell(&self, idx: usize) -> Vec2 {
        [self.pz(idx % self.n_z), self.px(idx / self.n_z)]
    }

    pub fn cells(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.cell(i)).collect()
    }

    pub fn spacing(&self) -> (f64, f64) {
        ((self.pz_max - self.pz_min) / (self.n_z - 1) as f64, (self.px_max - self.px_min) / (self.n_x - 1) as f64)
    }
}

fn linspace_at(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sfa,
    Cqsfa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sfa => "sfa",
            Method::Cqsfa => "cqsfa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sfa" => Ok(Method::Sfa),
            "cqsfa" => Ok(Method::Cqsfa),
            _ => domain(format!("unknown method {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitChannel {
    pub label: OrbitLabel,
    /// None for a masked cell.
    pub amplitude: Vec<Option<C>>,
    /// Saddle dropped past its Stokes transition (SFA only); amplitude is then zero.
    pub stokes_discarded: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmdGrid {
    pub axes: GridAxes,
    pub method: Option<Method>,
    pub channels: Vec<OrbitChannel>,
    /// |Σ channel amplitudes|², NaN where any channel is masked.
    pub probability: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

pub fn build_grid(axes: GridAxes) -> Result<PmdGrid> {
    if axes.n_z < 2 || axes.n_x < 2 {
        return domain("grid needs at least 2 points per axis");
    }
    let finite = [axes.pz_min, axes.pz_max, axes.px_min, axes.px_max].iter().all(|v| v.is_finite());
    if !finite || !(axes.pz_max > axes.pz_min) || !(axes.px_max > axes.px_min) {
        return domain("grid bounds must be finite with max > min");
    }
    Ok(PmdGrid { axes, method: None, channels: Vec::new(), probability: vec![0.0; axes.len()], metadata: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmdOptions {
    pub orbits: Vec<OrbitLabel>,
    pub n_cycles: u32,
    pub dipole: DipoleModel,
    pub stokes: StokesPolicy,
    pub cqsfa: CqsfaOptions,
}

impl Default for PmdOptions {
    fn default() -> Self {
        Self { orbits: vec![OrbitLabel::A, OrbitLabel::B], n_cycles: 1, dipole: DipoleModel::Unit, stokes: StokesPolicy::Auto, cqsfa: CqsfaOptions::default() }
    }
}

impl PmdGrid {
    pub fn channel(&self, label: OrbitLabel) -> Result<&OrbitChannel> {
        self.channels.iter().find(|c| c.label == label).ok_or_else(|| Error::MissingData(format!("orbit {label} not computed")))
    }

    pub fn masked_fraction(&self) -> f64 {
        self.probability.iter().filter(|p| p.is_nan()).count() as f64 / self.probability.len() as f64
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn set_meta(&mut self, key: &str, value: String) {
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    /// Recompute the coherent probability from the stored channels.
    pub fn recompute_probability(&mut self) {
        self.probability = (0..self.axes.len())
            .map(|i| {
                let mut m = C::from(0.0);
                for ch in &self.channels {
                    match ch.amplitude[i] {
                        Some(a) => m += a,
                        None => return f64::NAN,
                    }
                }
                m.norm_sqr()
            })
            .collect();
    }

    /// Value at the cell nearest to p.
    pub fn nearest(&self, values: &[f64], p: Vec2) -> f64 {
        let (hz, hx) = self.axes.spacing();
        let iz = (((p[0] - self.axes.pz_min) / hz).round().max(0.0) as usize).min(self.axes.n_z - 1);
        let ix = (((p[1] - self.axes.px_min) / hx).round().max(0.0) as usize).min(self.axes.n_x - 1);
        values[self.axes.index(iz, ix)]
    }
}

/// Fill `grid` with per-orbit amplitudes summed over `n_cycles` cycles.
pub fn compute_pmd(method: Method, field: &LaserField, atom: &TargetAtom, grid: PmdGrid, opts: &PmdOptions) -> Result<PmdGrid> {
    let mut orbits = opts.orbits.clone();
    orbits.sort();
    orbits.dedup();
    if orbits.is_empty() {
        return domain("orbit set is empty");
    }
    if opts.n_cycles == 0 {
        return domain("n_cycles must be at least 1");
    }
    let cells = grid.axes.cells();
    let mut grid = grid;
    grid.method = Some(method);
    grid.channels = match method {
        Method::Sfa => sfa_channels(field, atom, &cells, &orbits, opts)?,
        Method::Cqsfa => cqsfa_channels(field, atom, &cells, &orbits, opts)?,
    };
    grid.recompute_probability();
    let masked = grid.masked_fraction();
    let stokes: usize = grid.channels.iter().map(|c| c.stokes_discarded.iter().filter(|&&d| d).count()).sum();
    grid.set_meta("method", method.name().into());
    grid.set_meta("orbits", orbits.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(","));
    grid.set_meta("n_cycles", opts.n_cycles.to_string());
    grid.set_meta("masked_fraction", format!("{masked:.6}"));
    grid.set_meta("stokes_discarded", stokes.to_string());
    let status = if masked > MASK_WARNING {
        log::warn!("{:.1}% of cells masked", 100.0 * masked);
        "warning"
    } else {
        "ok"
    };
    grid.set_meta("status", status.into());
    Ok(grid)
}

fn sfa_channels(field: &LaserField, atom: &TargetAtom, cells: &[Vec2], orbits: &[OrbitLabel], opts: &PmdOptions) -> Result<Vec<OrbitChannel>> {
    if orbits.iter().any(|o| !matches!(o, OrbitLabel::A | OrbitLabel::B)) {
        return domain("the SFA has only orbits a and b");
    }
    let per_cell: Vec<[Option<C>; 2]> = cells
        .par_iter()
        .map(|&p| {
            let amps = sfa_orbit_amplitudes(field, atom, p, opts.dipole, opts.stokes)?;
            let sum = cycle_sum(cycle_increment(field, atom, p), opts.n_cycles);
            Ok(amps.map(|a| a.map(|a| a * sum)))
        })
        .collect::<Result<_>>()?;
    Ok(orbits
        .iter()
        .map(|&label| {
            let k = if label == OrbitLabel::A { 0 } else { 1 };
            OrbitChannel {
                label,
                amplitude: per_cell.iter().map(|a| Some(a[k].unwrap_or(C::from(0.0)))).collect(),
                stokes_discarded: per_cell.iter().map(|a| a[k].is_none()).collect(),
            }
        })
        .collect())
}

fn cqsfa_channels(field: &LaserField, atom: &TargetAtom, cells: &[Vec2], orbits: &[OrbitLabel], opts: &PmdOptions) -> Result<Vec<OrbitChannel>> {
    let (hz, hx) = {
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for p in cells {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n = (cells.len() as f64).sqrt().max(2.0);
        ((hi[0] - lo[0]) / (n - 1.0), (hi[1] - lo[1]) / (n - 1.0))
    };
    let shell = hz.max(hx);
    let mut by_class = Vec::new();
    for class in SolutionClass::ALL {
        by_class.push((class, fill_class(field, atom, class, cells, shell, &opts.cqsfa)?));
    }
    let by_label = assign_orbits(&by_class);
    Ok(orbits
        .iter()
        .map(|&label| {
            let sols = &by_label[&label];
            let amplitude = sols
                .par_iter()
                .map(|s| {
                    let s = s.as_ref()?;
                    let term = orbit_term(field, atom, s, opts.dipole).ok()?;
                    Some(term * cycle_sum(cycle_increment(field, atom, s.target), opts.n_cycles))
                })
                .collect();
            OrbitChannel { label, amplitude, stokes_discarded: vec![false; cells.len()] }
        })
        .collect())
}

/// |M_i + M_j|² per cell, NaN where either orbit is masked.
pub fn pair_interference(grid: &PmdGrid, pair: (OrbitLabel, OrbitLabel)) -> Result<Vec<f64>> {
    let a = grid.channel(pair.0)?;
    let b = grid.channel(pair.1)?;
    Ok(a.amplitude.iter().zip(&b.amplitude).map(|(x, y)| match (x, y) {
        (Some(x), Some(y)) => (x + y).norm_sqr(),
        _ => f64::NAN,
    }).collect())
}

/// Amplitudes of one orbit along a set of cells, NaN where masked.
pub fn channel_values(grid: &PmdGrid, label: OrbitLabel, cells: &[usize]) -> Result<Vec<C>> {
    let ch = grid.channel(label)?;
    Ok(cells.iter().map(|&i| ch.amplitude[i].unwrap_or(C::new(f64::NAN, f64::NAN))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

pub const DEFAULT_FLOOR_DECADES: f64 = 6.0;

/// Divide by the maximum; on the log scale clamp at −floor decades.
/// Masked (NaN) cells stay NaN.
pub fn normalize_log(values: &[f64], scale: Scale, floor: f64) -> Result<Vec<f64>> {
    if !(floor > 0.0) {
        return domain("floor must be positive");
    }
    let max = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, &v| m.max(v));
    if !(max > 0.0) {
        return domain("cannot normalize an all-zero grid");
    }
    Ok(values
        .iter()
        .map(|&v| match scale {
            _ if v.is_nan() => v,
            Scale::Linear => v / max,
            Scale::Log10 => (v / max).log10().max(-floor),
        })
        .collect())
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

const RESERVED: [&str; 9] = ["format_version", "pz_min", "pz_max", "n_z", "px_min", "px_max", "n_x", "channels", "columns"];

pub fn write_pmd<W: Write>(grid: &PmdGrid, mut w: W) -> std::io::Result<()> {
    let a = &grid.axes;
    writeln!(w, "# format_version = {FORMAT_VERSION}")?;
    for (k, v) in [("pz_min", fmt(a.pz_min)), ("pz_max", fmt(a.pz_max)), ("n_z", a.n_z.to_string()), ("px_min", fmt(a.px_min)), ("px_max", fmt(a.px_max)), ("n_x", a.n_x.to_string())] {
        writeln!(w, "# {k} = {v}")?;
    }
    for (k, v) in &grid.metadata {
        if !RESERVED.contains(&k.as_str()) {
            writeln!(w, "# {k} = {v}")?;
        }
    }
    let labels: Vec<String> = grid.channels.iter().map(|c| c.label.to_string()).collect();
    writeln!(w, "# channels = {}", labels.join(","))?;
    let mut cols = vec!["pz".to_string(), "px".into(), "prob".into()];
    for l in &labels {
        cols.push(format!("re_{l}"));
        cols.push(format!("im_{l}"));
    }
    writeln!(w, "# columns = {}", cols.join(","))?;
    let mut line = String::new();
    for i in 0..a.len() {
        let p = a.cell(i);
        line.clear();
        line.push_str(&fmt(p[0]));
        line.push(',');
        line.push_str(&fmt(p[1]));
        line.push(',');
        line.push_str(&fmt(grid.probability[i]));
        for ch in &grid.channels {
            let z = ch.amplitude[i].unwrap_or(C::new(f64::NAN, f64::NAN));
            line.push(',');
            line.push_str(&fmt(z.re));
            line.push(',');
            line.push_str(&fmt(z.im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn parse_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::MissingData(msg.into()))
}

pub fn read_pmd<R: BufRead>(r: R) -> Result<PmdGrid> {
    let mut header: Vec<(String, String)> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::MissingData(e.to_string()))?;
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.split_once('=') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::MissingData(format!("bad value: {e}")))?);
    }
    let get = |k: &str| header.iter().find(|(h, _)| h == k).map(|(_, v)| v.clone());
    let num = |k: &str| -> Result<f64> {
        get(k).ok_or_else(|| Error::MissingData(format!("header key {k}")))?.parse::<f64>().map_err(|e| Error::MissingData(format!("{k}: {e}")))
    };
    match get("format_version").as_deref() {
        Some("1") => {}
        other => return parse_err(format!("unsupported format_version {other:?}")),
    }
    let axes = GridAxes { pz_min: num("pz_min")?, pz_max: num("pz_max")?, n_z: num("n_z")? as usize, px_min: num("px_min")?, px_max: num("px_max")?, n_x: num("n_x")? as usize };
    let mut grid = build_grid(axes)?;
    let labels: Vec<OrbitLabel> = match get("channels") {
        Some(s) if !s.is_empty() => s.split(',').map(|l| OrbitLabel::parse(l.trim())).collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    if rows.len() != axes.len() {
        return parse_err(format!("expected {} rows, found {}", axes.len(), rows.len()));
    }
    let width = 3 + 2 * labels.len();
    grid.channels = labels
        .iter()
        .map(|&label| OrbitChannel { label, amplitude: Vec::with_capacity(axes.len()), stokes_discarded: vec![false; axes.len()] })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return parse_err(format!("row {i} has {} columns, expected {width}", row.len()));
        }
        grid.probability[i] = row[2];
        for (k, ch) in grid.channels.iter_mut().enumerate() {
            let z = C::new(row[3 + 2 * k], row[4 + 2 * k]);
            ch.amplitude.push(if z.re.is_nan() { None } else { Some(z) });
        }
    }
    grid.method = get("method").map(|m| Method::parse(&m)).transpose()?;
    grid.metadata = header.into_iter().filter(|(k, _)| !RESERVED.contains(&k.as_str())).collect();
    Ok(grid)
}
