//! Deterministic sampling: a small splittable RNG, Latin hypercube
//! designs, and the boundary point sets the certifiers use.
//!
//! The RNG is a fixed SplitMix64 so that reports are byte-identical for a
//! given seed across platforms and dependency upgrades.

use crate::models::Domain;

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Latin hypercube design over the box: one point per stratum on every
/// axis, strata paired by random permutation.
pub fn latin_hypercube(rng: &mut Rng, domain: &Domain, count: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    if count == 0 {
        return Vec::new();
    }
    let mut strata: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut order: Vec<usize> = (0..count).collect();
            rng.shuffle(&mut order);
            order
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let mut p = Vec::with_capacity(n);
        for (axis, order) in strata.iter_mut().enumerate() {
            let cell = order[i] as f64;
            let frac = (cell + rng.next_f64()) / count as f64;
            let l = domain.lower()[axis];
            let u = domain.upper()[axis];
            p.push(l + frac * (u - l));
        }
        points.push(p);
    }
    points
}

/// The certifier point set: Latin hypercube interior points plus all box
/// corners and face midpoints (worst cases of the built-in systems sit on
/// the boundary).
pub fn certification_points(rng: &mut Rng, domain: &Domain, interior: usize) -> Vec<Vec<f64>> {
    let mut points = latin_hypercube(rng, domain, interior);
    points.extend(domain.corners());
    points.extend(domain.face_midpoints());
    points
}

/// Draws `pairs` index pairs from `points`, skipping pairs closer than
/// `min_separation` in the max norm.
pub fn sample_pairs(
    rng: &mut Rng,
    points: &[Vec<f64>],
    pairs: usize,
    min_separation: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::with_capacity(pairs);
    if points.len() < 2 {
        return out;
    }
    let mut attempts = 0;
    while out.len() < pairs && attempts < 50 * pairs.max(1) {
        attempts += 1;
        let i = rng.below(points.len());
        let j = rng.below(points.len());
        if i == j {
            continue;
        }
        let sep = points[i]
            .iter()
            .zip(points[j].iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if sep <= min_separation {
            continue;
        }
        out.push((points[i].clone(), points[j].clone()));
    }
    out
}

/// Uniform grid on one face of the box (`axis` pinned to its lower or
/// upper bound), `per_axis` points along each free axis.
pub fn face_grid(domain: &Domain, axis: usize, upper: bool, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let pinned = if upper {
        domain.upper()[axis]
    } else {
        domain.lower()[axis]
    };
    if n == 1 {
        return vec![vec![pinned]];
    }
    let free_axes: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
    let mut out = Vec::new();
    let total = per_axis.pow(free_axes.len() as u32);
    for mut code in 0..total {
        let mut p = vec![0.0; n];
        p[axis] = pinned;
        for &free in &free_axes {
            let idx = code % per_axis;
            code /= per_axis;
            let l = domain.lower()[free];
            let u = domain.upper()[free];
            let frac = if per_axis == 1 {
                0.5
            } else {
                idx as f64 / (per_axis - 1) as f64
            };
            p[free] = l + frac * (u - l);
        }
        out.push(p);
    }
    out
}
