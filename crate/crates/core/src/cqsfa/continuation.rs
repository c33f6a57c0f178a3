//! Neighbour-seeded continuation: sweeps, class-grid fill and orbit assignment.

use super::orbit::{sfa_seed, shoot_labelled, swept_angle, CqsfaOptions, OrbitLabel, OrbitSolution, SolutionClass, SweepDirection};
use crate::error::{domain, Result};
use crate::field::{LaserField, TargetAtom, Vec2};
use crate::sfa_times::Group;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Radius of the seed ring.
pub const SEED_RADIUS: f64 = 1.2;
pub const MAX_BISECTIONS: u32 = 6;
/// Largest angular step on a seed-ring walk.
const RING_STEP: f64 = 0.05;

/// Half cycle of a complex ionization time: T1 for Re ωt'+φ in [π, 2π) mod 2π.
pub fn group_of(field: &LaserField, t_prime: C) -> Group {
    let th = field.phase(t_prime).re.rem_euclid(2.0 * PI);
    if th >= PI {
        Group::T1
    } else {
        Group::T2
    }
}

fn reach(field: &LaserField, atom: &TargetAtom, prev: &OrbitSolution, target: Vec2, class: SolutionClass, opts: &CqsfaOptions, depth: u32) -> Option<OrbitSolution> {
    match shoot_labelled(field, atom, &prev.seed(), target, opts, Some(class)) {
        Ok(s) => Some(s),
        Err(e) if depth < MAX_BISECTIONS => {
            log::trace!("bisecting towards {target:?}: {e}");
            let mid = [0.5 * (prev.target[0] + target[0]), 0.5 * (prev.target[1] + target[1])];
            let m = reach(field, atom, prev, mid, class, opts, depth + 1)?;
            reach(field, atom, &m, target, class, opts, depth + 1)
        }
        Err(e) => {
            log::debug!("continuation gap at {target:?}: {e}");
            None
        }
    }
}

/// Marches along `targets`, seeding each solve with the last converged point.
/// Gaps are `None`; the march resumes from the last good solution.
pub fn continuation_sweep(
    field: &LaserField,
    atom: &TargetAtom,
    seed: &OrbitSolution,
    targets: &[Vec2],
    direction: SweepDirection,
    opts: &CqsfaOptions,
) -> Vec<Option<OrbitSolution>> {
    let class = seed.class_label.unwrap_or_else(|| SolutionClass::from_parts(group_of(field, seed.t_prime), direction));
    let mut prev = *seed;
    prev.class_label = Some(class);
    targets
        .iter()
        .map(|&t| {
            let s = reach(field, atom, &prev, t, class, opts, 0);
            if let Some(s) = s {
                prev = s;
            }
            s
        })
        .collect()
}

/// Converged seed of a class on its seed ray at |p| = SEED_RADIUS.
pub fn class_seed(field: &LaserField, atom: &TargetAtom, class: SolutionClass, opts: &CqsfaOptions) -> Result<OrbitSolution> {
    let th = class.seed_angle();
    let p = [SEED_RADIUS * th.cos(), SEED_RADIUS * th.sin()];
    let guess = sfa_seed(field, atom, p, class.seed_group())?;
    shoot_labelled(field, atom, &guess, p, opts, Some(class))
}

fn ray_point(class: SolutionClass, radius: f64, swept: f64) -> Vec2 {
    let th = match class.direction() {
        SweepDirection::CounterClockwise => class.seed_angle() + swept,
        SweepDirection::Clockwise => class.seed_angle() - swept,
    };
    [radius * th.cos(), radius * th.sin()]
}

/// Radial continuation along the seed ray to each radius (any order in, results in input order).
fn radial_sweep(field: &LaserField, atom: &TargetAtom, seed: &OrbitSolution, class: SolutionClass, radii: &[f64], opts: &CqsfaOptions) -> Vec<Option<OrbitSolution>> {
    let mut out = vec![None; radii.len()];
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let (inner, outer): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| radii[i] < SEED_RADIUS);
    for side in [outer, inner.into_iter().rev().collect::<Vec<_>>()] {
        let targets: Vec<Vec2> = side.iter().map(|&i| ray_point(class, radii[i], 0.0)).collect();
        let sols = continuation_sweep(field, atom, seed, &targets, class.direction(), opts);
        for (i, s) in side.into_iter().zip(sols) {
            out[i] = s;
        }
    }
    out
}

/// Solutions of one class on arbitrary cells. Cells are grouped into radial
/// shells of `shell_width`; each shell is entered from the seed ray and walked
/// in the class's angular sense.
pub fn fill_class(
    field: &LaserField,
    atom: &TargetAtom,
    class: SolutionClass,
    cells: &[Vec2],
    shell_width: f64,
    opts: &CqsfaOptions,
) -> Result<Vec<Option<OrbitSolution>>> {
    if !(shell_width > 0.0) {
        return domain("shell width must be positive");
    }
    let seed = class_seed(field, atom, class, opts)?;
    let mut shells: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut origin = Vec::new();
    for (i, p) in cells.iter().enumerate() {
        let r = p[0].hypot(p[1]);
        if r > 0.0 {
            shells.entry((r / shell_width).floor() as u64).or_default().push(i);
        } else {
            origin.push(i);
        }
    }
    let keys: Vec<u64> = shells.keys().copied().collect();
    let radii: Vec<f64> = keys.iter().map(|&k| (k as f64 + 0.5) * shell_width).collect();
    let starts = radial_sweep(field, atom, &seed, class, &radii, opts);
    let centre = match (origin.is_empty(), starts.first()) {
        (false, Some(Some(inner))) => reach(field, atom, inner, [0.0, 0.0], class, opts, 0),
        _ => None,
    };
    let jobs: Vec<(Option<OrbitSolution>, Vec<usize>)> = keys.iter().zip(starts).map(|(k, s)| (s, shells[k].clone())).collect();
    let results: Vec<Vec<(usize, Option<OrbitSolution>)>> = jobs
        .into_par_iter()
        .map(|(start, mut idx)| {
            let Some(start) = start else {
                return idx.into_iter().map(|i| (i, None)).collect();
            };
            idx.sort_by(|&a, &b| swept_angle(class, cells[a]).total_cmp(&swept_angle(class, cells[b])).then(a.cmp(&b)));
            let targets: Vec<Vec2> = idx.iter().map(|&i| cells[i]).collect();
            let sols = continuation_sweep(field, atom, &start, &targets, class.direction(), opts);
            idx.into_iter().zip(sols).collect()
        })
        .collect();
    let mut out = vec![None; cells.len()];
    for (i, s) in results.into_iter().flatten() {
        out[i] = s;
    }
    for i in origin {
        out[i] = centre;
    }
    Ok(out)
}

/// Per-orbit view of class results: each cell's solutions keyed by a–d label.
/// Direct-orbit labels are placed first; a solution that repeats one already
/// placed in the cell is dropped, and on a label collision the earlier class wins.
pub fn assign_orbits(by_class: &[(SolutionClass, Vec<Option<OrbitSolution>>)]) -> BTreeMap<OrbitLabel, Vec<Option<OrbitSolution>>> {
    let n = by_class.first().map_or(0, |c| c.1.len());
    let mut out: BTreeMap<OrbitLabel, Vec<Option<OrbitSolution>>> = OrbitLabel::ALL.iter().map(|&l| (l, vec![None; n])).collect();
    let mut sorted: Vec<&(SolutionClass, Vec<Option<OrbitSolution>>)> = by_class.iter().collect();
    sorted.sort_by_key(|c| c.0);
    let (mut collisions, mut duplicates) = (0usize, 0usize);
    for i in 0..n {
        let mut cands: Vec<OrbitSolution> = sorted.iter().filter_map(|(_, v)| v[i]).collect();
        cands.sort_by_key(|s| !matches!(s.orbit_label, OrbitLabel::A | OrbitLabel::B));
        let mut placed: Vec<OrbitSolution> = Vec::new();
        for s in cands {
            if placed.iter().any(|o| same_saddle(o, &s)) {
                duplicates += 1;
                continue;
            }
            let slot = &mut out.get_mut(&s.orbit_label).expect("all labels present")[i];
            if slot.is_none() {
                *slot = Some(s);
                placed.push(s);
            } else {
                collisions += 1;
            }
        }
    }
    if collisions + duplicates > 0 {
        log::info!("{collisions} label collisions and {duplicates} repeated saddles between classes");
    }
    out
}

fn same_saddle(a: &OrbitSolution, b: &OrbitSolution) -> bool {
    (a.t_prime - b.t_prime).norm() < 1e-6 && (a.p0[0] - b.p0[0]).abs() < 1e-6 && (a.p0[1] - b.p0[1]).abs() < 1e-6
}

/// Solutions along p_z = 0 at the given p_x values for one class: walk the
/// seed ring to the minor axis, then continue radially along it.
pub fn minor_axis_class(
    field: &LaserField,
    atom: &TargetAtom,
    class: SolutionClass,
    px: &[f64],
    opts: &CqsfaOptions,
) -> Result<Vec<Option<OrbitSolution>>> {
    let seed = class_seed(field, atom, class, opts)?;
    let mut out = vec![None; px.len()];
    for sign in [1.0, -1.0] {
        let end = swept_angle(class, [0.0, sign * SEED_RADIUS]);
        let n = (end / RING_STEP).ceil().max(1.0) as usize;
        let ring: Vec<Vec2> = (1..=n).map(|k| ray_point(class, SEED_RADIUS, end * k as f64 / n as f64)).collect();
        let walked = continuation_sweep(field, atom, &seed, &ring, class.direction(), opts);
        let Some(Some(anchor)) = walked.last().copied() else {
            log::debug!("class {class:?} did not reach the minor axis (side {sign})");
            continue;
        };
        // p_x = 0 is attached to the positive side
        let side: Vec<usize> = (0..px.len()).filter(|&i| if sign > 0.0 { px[i] >= 0.0 } else { px[i] < 0.0 }).collect();
        let (inner, outer): (Vec<usize>, Vec<usize>) = side.into_iter().partition(|&i| px[i].abs() < SEED_RADIUS);
        let mut outer = outer;
        outer.sort_by(|&a, &b| px[a].abs().total_cmp(&px[b].abs()));
        let mut inner = inner;
        inner.sort_by(|&a, &b| px[b].abs().total_cmp(&px[a].abs()));
        for part in [outer, inner] {
            let targets: Vec<Vec2> = part.iter().map(|&i| [0.0, px[i]]).collect();
            let sols = continuation_sweep(field, atom, &anchor, &targets, class.direction(), opts);
            for (i, s) in part.into_iter().zip(sols) {
                out[i] = s;
            }
        }
    }
    Ok(out)
}

/// All four orbits along p_z = 0, keyed by a–d label.
pub fn minor_axis_orbits(field: &LaserField, atom: &TargetAtom, px: &[f64], opts: &CqsfaOptions) -> Result<BTreeMap<OrbitLabel, Vec<Option<OrbitSolution>>>> {
    let by_class: Vec<(SolutionClass, Vec<Option<OrbitSolution>>)> = SolutionClass::ALL
        .par_iter()
        .map(|&c| minor_axis_class(field, atom, c, px, opts).map(|v| (c, v)))
        .collect::<Result<_>>()?;
    Ok(assign_orbits(&by_class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::field_from_experiment;

    #[test]
    fn swept_angles() {
        assert_eq!(swept_angle(SolutionClass::A, [1.0, 0.0]), 0.0);
        assert_eq!(swept_angle(SolutionClass::B, [1.0, 0.0]), 2.0 * PI);
        assert_eq!(swept_angle(SolutionClass::B, [0.0, 0.0]), 0.0);
        assert!((swept_angle(SolutionClass::B, [0.0, -1.0]) - PI / 2.0).abs() < 1e-15);
        assert!((swept_angle(SolutionClass::C, [0.0, -1.0]) - PI / 2.0).abs() < 1e-15);
        assert!((swept_angle(SolutionClass::D, [0.0, 1.0]) - PI / 2.0).abs() < 1e-15);
        let p = ray_point(SolutionClass::D, 2.0, PI / 2.0);
        assert!(p[0].abs() < 1e-15 && (p[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn groups_by_half_cycle() {
        let f = field_from_experiment(2.5e14, 735.0, 0.0, 0.0).unwrap();
        assert_eq!(group_of(&f, C::new(1.5 * PI / f.omega, 10.0)), Group::T1);
        assert_eq!(group_of(&f, C::new(0.5 * PI / f.omega, 10.0)), Group::T2);
        assert_eq!(group_of(&f, C::new(-0.5 * PI / f.omega, 10.0)), Group::T1);
    }

    #[test]
    fn free_sweeps_coincide() {
        let f = field_from_experiment(2.5e14, 735.0, 0.2, 0.0).unwrap();
        let atom = TargetAtom::new(0.90357, 0.0, None).unwrap();
        let opts = CqsfaOptions::default();
        let cells = [[0.3, 0.4], [-0.6, 0.2], [-0.2, -0.9], [0.8, -0.1]];
        let a = fill_class(&f, &atom, SolutionClass::A, &cells, 0.1, &opts).unwrap();
        let b = fill_class(&f, &atom, SolutionClass::B, &cells, 0.1, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!((x.t_prime - y.t_prime).norm() < 1e-9);
        }
    }
}
