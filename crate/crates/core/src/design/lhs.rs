use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::problems::Domain;

/// Plain Latin hypercube of `count` points in the domain's box: each axis is
/// cut into `count` equal strata, each stratum holds one uniform coordinate,
/// and the strata are permuted independently per axis.
pub fn lhs_candidates(domain: &Domain, count: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::invalid("LHS needs at least one point"));
    }
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for axis in 0..d {
        strata.shuffle(rng);
        let (lo, hi) = (domain.lower[axis], domain.upper[axis]);
        for (point, &stratum) in points.iter_mut().zip(&strata) {
            let u = (stratum as f64 + rng.random::<f64>()) / count as f64;
            point[axis] = (lo + u * (hi - lo)).clamp(lo, hi);
        }
    }
    Ok(points)
}

/// Rounds points to the integer lattice and drops duplicates, keeping the
/// first occurrence.
pub fn snap_to_lattice(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut seen = std::collections::HashSet::new();
    points
        .into_iter()
        .map(|p| p.into_iter().map(f64::round).collect::<Vec<_>>())
        .filter(|p| seen.insert(p.iter().map(|v| *v as i64).collect::<Vec<_>>()))
        .collect()
}

/// LHS candidates, snapped and deduplicated on lattice domains.
pub fn candidate_set(domain: &Domain, count: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    let points = lhs_candidates(domain, count, rng)?;
    Ok(if domain.lattice { snap_to_lattice(points) } else { points })
}

/// Regular grid with `per_axis[k]` points along axis `k`, endpoints included
/// (a single point sits at the midpoint). Snapped on lattice domains.
pub fn regular_grid(domain: &Domain, per_axis: &[usize]) -> Result<Vec<Vec<f64>>> {
    if per_axis.len() != domain.dim() || per_axis.contains(&0) {
        return Err(Error::invalid("grid needs a positive point count for every axis"));
    }
    let axes: Vec<Vec<f64>> = per_axis
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (lo, hi) = (domain.lower[k], domain.upper[k]);
            if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        })
        .collect();
    let points = cartesian(&axes);
    Ok(if domain.lattice { snap_to_lattice(points) } else { points })
}

/// Integer lattice points of the domain with the given stride per axis.
pub fn lattice_grid(domain: &Domain, stride: &[u32]) -> Result<Vec<Vec<f64>>> {
    if stride.len() != domain.dim() || stride.contains(&0) {
        return Err(Error::invalid("lattice grid needs a positive stride for every axis"));
    }
    let axes: Vec<Vec<f64>> = stride
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let (lo, hi) = (domain.lower[k], domain.upper[k]);
            let steps = ((hi - lo) / f64::from(s)).floor() as usize;
            (0..=steps).map(|i| lo + (i as f64) * f64::from(s)).collect()
        })
        .collect();
    Ok(cartesian(&axes))
}

/// Cartesian product with the first axis varying slowest.
fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}
