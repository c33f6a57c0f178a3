//! key = value run configuration with flag overrides.

use crate::CliError;
use orbit_holography::field::{field_from_experiment, truncation_bounds, LaserField, TargetAtom};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "intensity", "wavelength", "up", "omega", "eps", "phi", "ip", "z_eff", "truncation", "method", "orbits", "n_cycles", "pz_min", "pz_max",
    "n_z", "px_min", "px_max", "n_x", "n_prop", "tolerance", "max_iterations", "dipole", "stokes", "scale", "floor",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Plain lines must hold known keys. '#'-prefixed `key = value` lines are
    /// also read, so a PMD header works as a config; unknown keys there are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let (line, commented) = match raw.trim().strip_prefix('#') {
                Some(rest) => (rest.trim(), true),
                None => (raw.trim(), false),
            };
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                if commented {
                    continue;
                }
                // data rows of a PMD file
                if line.contains(',') {
                    continue;
                }
                return Err(CliError::Config(format!("line {}: expected key = value", n + 1)));
            };
            let k = k.trim().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                if commented {
                    continue;
                }
                return Err(CliError::Config(format!("line {}: unknown key {k:?}", n + 1)));
            }
            entries.insert(k, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}

/// Field and atom settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Physics {
    pub field: LaserField,
    pub atom: TargetAtom,
    /// Resolved settings in header order.
    pub snapshot: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct PhysicsFlags {
    pub intensity: Option<f64>,
    pub wavelength: Option<f64>,
    pub up: Option<f64>,
    pub omega: Option<f64>,
    pub eps: Option<f64>,
    pub phi: Option<f64>,
    pub ip: Option<f64>,
    pub z_eff: Option<f64>,
    pub truncation: Option<String>,
}

pub const DEFAULT_INTENSITY: f64 = 2.5e14;
pub const DEFAULT_WAVELENGTH: f64 = 735.0;
pub const DEFAULT_IP: f64 = 0.90357;

pub fn resolve_physics(flags: &PhysicsFlags, file: &ConfigFile) -> Result<Physics, CliError> {
    let mut snapshot = Vec::new();
    let eps = file.pick_or(flags.eps, "eps", 0.0)?;
    let phi = file.pick_or(flags.phi, "phi", 0.0)?;
    let up = file.pick(flags.up, "up")?;
    let omega = file.pick(flags.omega, "omega")?;
    let field = match (up, omega) {
        (Some(up), Some(omega)) => {
            if flags.intensity.is_some() || flags.wavelength.is_some() {
                return Err(CliError::Config("give either up/omega or intensity/wavelength".into()));
            }
            snapshot.push(("up".into(), up.to_string()));
            snapshot.push(("omega".into(), omega.to_string()));
            LaserField::new(up, omega, eps, phi)?
        }
        (None, None) => {
            let intensity = file.pick_or(flags.intensity, "intensity", DEFAULT_INTENSITY)?;
            let wavelength = file.pick_or(flags.wavelength, "wavelength", DEFAULT_WAVELENGTH)?;
            snapshot.push(("intensity".into(), intensity.to_string()));
            snapshot.push(("wavelength".into(), wavelength.to_string()));
            field_from_experiment(intensity, wavelength, eps, phi)?
        }
        _ => return Err(CliError::Config("up and omega must be given together".into())),
    };
    snapshot.push(("eps".into(), eps.to_string()));
    snapshot.push(("phi".into(), phi.to_string()));
    let ip = file.pick_or(flags.ip, "ip", DEFAULT_IP)?;
    let z_eff = file.pick_or(flags.z_eff, "z_eff", 1.0)?;
    let trunc = file.pick_or(flags.truncation.clone(), "truncation", "off".to_string())?;
    let bare = TargetAtom::new(ip, z_eff, None)?;
    let atom = match trunc.as_str() {
        "off" => bare,
        m => {
            let m: f64 = m.parse().map_err(|_| CliError::Config(format!("truncation: expected a multiplier or off, got {m:?}")))?;
            TargetAtom::new(ip, z_eff, Some(truncation_bounds(&field, &bare, m)?))?
        }
    };
    snapshot.push(("ip".into(), ip.to_string()));
    snapshot.push(("z_eff".into(), z_eff.to_string()));
    snapshot.push(("truncation".into(), trunc));
    Ok(Physics { field, atom, snapshot })
}
