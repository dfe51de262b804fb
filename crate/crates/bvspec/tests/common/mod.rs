//! Shared generators for randomized boundary-condition systems.

use bvspec::bc::BoundaryConditions;
use bvspec::coeffmat::{check_regularity, StructureMatrices};
use bvspec::C64;
use rand::Rng;

/// Conditioning margin for randomized regular systems: identities asserted at
/// 1e-10 need limit matrices a few digits away from degeneracy.
pub const REGULAR_MARGIN: f64 = 1e-3;

pub fn random_unit(rng: &mut impl Rng) -> C64 {
    loop {
        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.2 {
            return v;
        }
    }
}

fn random_poly(rng: &mut impl Rng, degree: usize, lead_nonzero: bool) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); degree + 1];
    for c in coeffs.iter_mut() {
        if rng.gen_bool(0.6) {
            *c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    if lead_nonzero {
        coeffs[degree] = random_unit(rng);
    }
    coeffs
}

/// A normalized, Birkhoff-regular random system with a conditioning margin.
pub fn random_regular_bcs(rng: &mut impl Rng, n: usize) -> BoundaryConditions {
    loop {
        let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..n)
            .map(|_| {
                let dp = rng.gen_range(0..n);
                let dq = rng.gen_range(0..n);
                let lead_p = rng.gen_bool(0.7);
                let lead_q = !lead_p || rng.gen_bool(0.5);
                let p = random_poly(rng, dp, lead_p);
                let q = random_poly(rng, dq, lead_q);
                (p, q)
            })
            .collect();
        let Ok(bcs) = BoundaryConditions::new(n, 0.0, 1.0, &rows) else {
            continue;
        };
        let Ok(bcs) = bcs.normalize() else { continue };
        let reg = check_regularity(&StructureMatrices::build(&bcs));
        if reg.regular && reg.sv_ratio.iter().all(|&r| r > REGULAR_MARGIN) {
            return bcs;
        }
    }
}

fn distinct_degrees(rng: &mut impl Rng, count: usize, n: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for i in (1..all.len()).rev() {
        let j = rng.gen_range(0..=i);
        all.swap(i, j);
    }
    all.truncate(count);
    all
}

/// Almost-separated system: per side, distinct condition orders with the
/// leading coefficient on that side only; lower-order cross terms are allowed
/// and exercised. Odd orders add one genuinely mixed condition.
pub fn random_almost_separated(rng: &mut impl Rng, n: usize) -> BoundaryConditions {
    let m = n / 2;
    loop {
        let deg_a = distinct_degrees(rng, m, n);
        let deg_b = distinct_degrees(rng, m, n);
        let mut rows: Vec<(Vec<C64>, Vec<C64>)> = Vec::new();
        for &d in &deg_a {
            let p = random_poly(rng, d, true);
            // Cross term at the other endpoint strictly below the order.
            let q = if d > 0 && rng.gen_bool(0.6) {
                random_poly(rng, d - 1, false)
            } else {
                Vec::new()
            };
            rows.push((p, q));
        }
        for &d in &deg_b {
            let q = random_poly(rng, d, true);
            let p = if d > 0 && rng.gen_bool(0.6) {
                random_poly(rng, d - 1, false)
            } else {
                Vec::new()
            };
            rows.push((p, q));
        }
        if n % 2 == 1 {
            let dm = rng.gen_range(0..n);
            if deg_a.contains(&dm) && deg_b.contains(&dm) {
                continue;
            }
            rows.push((random_poly(rng, dm, true), random_poly(rng, dm, true)));
        }
        let Ok(bcs) = BoundaryConditions::new(n, 0.0, 1.0, &rows) else {
            continue;
        };
        // The construction should already be normalized; verify and resample
        // if an unlucky draw reduces.
        let Ok(norm) = bcs.normalize() else { continue };
        if norm.total_order() != bcs.total_order() {
            continue;
        }
        let reg = check_regularity(&StructureMatrices::build(&bcs));
        if reg.regular && reg.sv_ratio.iter().all(|&r| r > REGULAR_MARGIN) {
            return bcs;
        }
    }
}

/// Quasi-periodic system with the given coupling: orders `0..n-1`, leading
/// coefficients tied by `b_j = coupling a_j`, arbitrary lower-order parts.
pub fn random_quasi_periodic(rng: &mut impl Rng, n: usize, coupling: C64) -> BoundaryConditions {
    loop {
        let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..n)
            .map(|j| {
                let a = random_unit(rng);
                let mut p = random_poly(rng, j, false);
                p[j] = a;
                let mut q = random_poly(rng, j, false);
                q[j] = a * coupling;
                (p, q)
            })
            .collect();
        let Ok(bcs) = BoundaryConditions::new(n, 0.0, 1.0, &rows) else {
            continue;
        };
        let reg = check_regularity(&StructureMatrices::build(&bcs));
        if reg.regular {
            return bcs;
        }
    }
}
