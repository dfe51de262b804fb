//! Eigenvalue computation for the leading-term operator and for operators
//! with lower-order coefficients.
//!
//! The leading-term spectrum comes from the zeros of the characteristic
//! determinant in the spectral sector `Arg z in [0, 2 pi / n)`: zeros are
//! located by winding numbers over annular sector boxes, refined by Newton
//! polishing, and mapped to eigenvalues by `lambda = z^n`. A possible
//! `lambda = 0` eigenvalue sits at the degenerate point `z = 0` of the
//! parametrization and is detected separately from the polynomial solution
//! space of the leading differential expression.
//!
//! Operators with coefficients are discretized by Chebyshev collocation with
//! boundary rows, reduced to a standard dense eigenproblem, and filtered for
//! spurious modes by comparing two resolutions.

use ndarray::Array2;
use ndarray_linalg::{Eig, SVD};

use crate::bc::BoundaryConditions;
use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::greenfn::{char_det_derivs, char_det_rel, char_det_scaled};
use crate::profile::FunctionProfile;
use crate::C64;

/// How a spectrum was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    CharDetRoots,
    Collocation,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Eigenvalue {
    #[serde(serialize_with = "crate::jsonfmt::c64")]
    pub value: C64,
    pub multiplicity: usize,
}

/// An ordered spectrum prefix with resolution metadata.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectrumResult {
    /// Ordered by ascending `|lambda|`, ties by ascending argument.
    pub eigenvalues: Vec<Eigenvalue>,
    pub method: SpectrumMethod,
    /// Collocation grid size, when applicable.
    pub grid_size: Option<usize>,
    /// Root polish tolerance or spurious-drift tolerance.
    pub tolerance: f64,
    pub count_requested: usize,
    /// Set when fewer eigenvalues were resolved than requested.
    pub truncated: bool,
}

impl SpectrumResult {
    /// Eigenvalues repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for e in &self.eigenvalues {
            for _ in 0..e.multiplicity {
                out.push(e.value);
            }
        }
        out
    }

    pub fn expanded_len(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// Deterministic total order: ascending modulus, then argument in
/// `[0, 2 pi)`, then lexicographic on parts.
pub fn eigenvalue_sort_key(v: C64) -> (f64, f64, f64, f64) {
    let arg = v.arg().rem_euclid(2.0 * std::f64::consts::PI);
    (v.norm(), arg, v.re, v.im)
}

fn sort_eigenvalues(vals: &mut [C64]) {
    vals.sort_by(|&x, &y| {
        eigenvalue_sort_key(x)
            .partial_cmp(&eigenvalue_sort_key(y))
            .expect("finite eigenvalues")
    });
}

/// Options for the characteristic-determinant root search.
#[derive(Debug, Clone, Copy)]
pub struct RootSearchOptions {
    /// Exclusion radius around the degenerate point `z = 0`; `None` picks
    /// `0.3 pi / span`.
    pub z_min: Option<f64>,
    /// Relative Newton step tolerance.
    pub newton_tol: f64,
    /// Hard cap on the search radius, `None` picks a generous default.
    pub max_radius: Option<f64>,
}

impl Default for RootSearchOptions {
    fn default() -> Self {
        RootSearchOptions {
            z_min: None,
            newton_tol: 1e-13,
            max_radius: None,
        }
    }
}

/// Multiplicity of a possible zero eigenvalue: the dimension of the space of
/// polynomials of degree below `n` (the solutions of the leading expression)
/// that satisfy all boundary conditions.
pub fn zero_eigenvalue_multiplicity(bcs: &BoundaryConditions) -> usize {
    let n = bcs.order();
    let (a, b) = bcs.segment();
    // (D^k x^l)(t) = l!/(l-k)! t^{l-k} for k <= l.
    let deriv_val = |l: usize, k: usize, t: f64| -> f64 {
        if k > l {
            return 0.0;
        }
        let mut c = 1.0;
        for i in (l - k + 1)..=l {
            c *= i as f64;
        }
        c * t.powi((l - k) as i32)
    };
    let mut m = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for l in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += bcs.p_coeff(j, k) * deriv_val(l, k, a) + bcs.q_coeff(j, k) * deriv_val(l, k, b);
            }
            m[[j, l]] = acc;
        }
    }
    let (_, sv, _) = m.svd(false, false).expect("svd of finite matrix");
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return n;
    }
    sv.iter().filter(|&&s| s < 1e-10 * top).count()
}

/// An annular sector box in the `z` plane.
#[derive(Debug, Clone, Copy)]
struct SectorBox {
    r_lo: f64,
    r_hi: f64,
    th_lo: f64,
    th_hi: f64,
}

impl SectorBox {
    fn center(&self) -> C64 {
        C64::from_polar(
            0.5 * (self.r_lo + self.r_hi),
            0.5 * (self.th_lo + self.th_hi),
        )
    }

    fn diameter(&self) -> f64 {
        let dr = self.r_hi - self.r_lo;
        let ds = self.r_hi * (self.th_hi - self.th_lo);
        (dr * dr + ds * ds).sqrt()
    }

    fn contains(&self, z: C64, slack: f64) -> bool {
        let r = z.norm();
        if r < self.r_lo - slack || r > self.r_hi + slack {
            return false;
        }
        // Compare angles relative to the box's own frame to avoid wrap issues.
        let mid = 0.5 * (self.th_lo + self.th_hi);
        let half = 0.5 * (self.th_hi - self.th_lo);
        let d = (z.arg() - mid + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        d.abs() <= half + slack / r.max(1e-6)
    }
}

/// Winding number of the characteristic determinant around a box, by phase
/// tracking of the scaled determinant along the contour. Refines the sample
/// count until every phase step is below `pi / 2`.
fn winding_number(bcs: &BoundaryConditions, bx: &SectorBox) -> Result<i64> {
    let mut samples = 128usize;
    loop {
        let pts = contour_points(bx, samples);
        let mut args = Vec::with_capacity(pts.len());
        for &z in &pts {
            let (det, hadamard) = char_det_scaled(bcs, z);
            if det.norm() < 1e-9 * hadamard {
                // Root essentially on the contour; the caller must shift it.
                return Err(Error::EigenvalueOnContour {
                    dist: det.norm() / hadamard,
                });
            }
            args.push(det.arg());
        }
        let mut total = 0.0;
        let mut ok = true;
        for i in 0..args.len() {
            let next = args[(i + 1) % args.len()];
            let mut d = next - args[i];
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            if d.abs() > std::f64::consts::FRAC_PI_2 {
                ok = false;
                break;
            }
            total += d;
        }
        if ok {
            let w = total / (2.0 * std::f64::consts::PI);
            let rounded = w.round();
            if (w - rounded).abs() < 0.2 {
                return Ok(rounded as i64);
            }
        }
        samples *= 2;
        if samples > 1 << 17 {
            if std::env::var("BVSPEC_DEBUG").is_ok() {
                eprintln!("winding exhausted on box r=[{}, {}] th=[{}, {}]", bx.r_lo, bx.r_hi, bx.th_lo, bx.th_hi);
            }
            return Err(Error::QuadratureNotConverged {
                change: f64::NAN,
            });
        }
    }
}

fn contour_points(bx: &SectorBox, samples: usize) -> Vec<C64> {
    // Positively oriented boundary: out along the lower cut, across the
    // outer arc, back along the upper cut, and across the inner arc.
    // Samples are distributed over the edges proportionally to length.
    let arc_len_hi = bx.r_hi * (bx.th_hi - bx.th_lo);
    let arc_len_lo = bx.r_lo * (bx.th_hi - bx.th_lo);
    let rad_len = bx.r_hi - bx.r_lo;
    let total = arc_len_hi + arc_len_lo + 2.0 * rad_len;
    let count = |len: f64| ((samples as f64 * len / total).ceil() as usize).max(8);
    let mut pts = Vec::new();
    let k1 = count(rad_len);
    for i in 0..k1 {
        let r = bx.r_lo + rad_len * i as f64 / k1 as f64;
        pts.push(C64::from_polar(r, bx.th_lo));
    }
    let k2 = count(arc_len_hi);
    for i in 0..k2 {
        let th = bx.th_lo + (bx.th_hi - bx.th_lo) * i as f64 / k2 as f64;
        pts.push(C64::from_polar(bx.r_hi, th));
    }
    let k3 = count(rad_len);
    for i in 0..k3 {
        let r = bx.r_hi - rad_len * i as f64 / k3 as f64;
        pts.push(C64::from_polar(r, bx.th_hi));
    }
    let k4 = count(arc_len_lo);
    for i in 0..k4 {
        let th = bx.th_hi - (bx.th_hi - bx.th_lo) * i as f64 / k4 as f64;
        pts.push(C64::from_polar(bx.r_lo, th));
    }
    pts
}

/// Newton polish: plain Newton for simple roots, Newton on `Delta / Delta'`
/// for multiple ones.
fn newton_polish(
    bcs: &BoundaryConditions,
    start: C64,
    multiple: bool,
    tol: f64,
) -> Result<C64> {
    let mut z = start;
    for _ in 0..80 {
        let (d0, d1, d2) = char_det_derivs(bcs, z);
        let step = if multiple {
            // g = d0/d1 has a simple zero at a multiple root.
            let g = d0 / d1;
            let gp = 1.0 - d0 * d2 / (d1 * d1);
            g / gp
        } else {
            d0 / d1
        };
        if !step.re.is_finite() || !step.im.is_finite() {
            return Err(Error::NonFinite {
                context: "Newton step for determinant root",
            });
        }
        z -= step;
        if step.norm() <= tol * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    if std::env::var("BVSPEC_DEBUG").is_ok() {
        eprintln!("newton stalled from start {start} at z={z}");
    }
    Err(Error::QuadratureNotConverged { change: f64::NAN })
}

/// Recursively localize the roots inside a box whose winding number is known.
fn roots_in_box(
    bcs: &BoundaryConditions,
    bx: SectorBox,
    winding: i64,
    opts: &RootSearchOptions,
    depth: usize,
    out: &mut Vec<(C64, usize)>,
) -> Result<()> {
    if winding <= 0 {
        return Ok(());
    }
    if depth > 48 {
        return Err(Error::LocalizationFailure {
            expected: winding as usize,
            found: 0,
        });
    }
    let merge_scale = 1e-7 * bx.r_hi.max(1.0);
    if winding == 1 || bx.diameter() < merge_scale {
        // Newton may stall or escape toward a zero outside the box (the
        // degenerate origin attracts from far-off starts); both cases fall
        // back to subdivision, which shrinks the basin around the true root.
        let polished = newton_polish(bcs, bx.center(), winding > 1, opts.newton_tol);
        match polished {
            Ok(root) if bx.contains(root, 0.05 * bx.diameter().max(merge_scale)) => {
                out.push((root, winding as usize));
                return Ok(());
            }
            _ => {
                if bx.diameter() < merge_scale {
                    return Err(Error::LocalizationFailure {
                        expected: winding as usize,
                        found: 0,
                    });
                }
            }
        }
    }
    // Subdivide into four children, shifting interior cuts off any root.
    let r_mid = shift_off_roots(bcs, 0.5 * (bx.r_lo + bx.r_hi), &bx, true)?;
    let th_mid = shift_off_roots(bcs, 0.5 * (bx.th_lo + bx.th_hi), &bx, false)?;
    let children = [
        SectorBox { r_hi: r_mid, th_hi: th_mid, ..bx },
        SectorBox { r_lo: r_mid, th_hi: th_mid, ..bx },
        SectorBox { r_hi: r_mid, th_lo: th_mid, ..bx },
        SectorBox { r_lo: r_mid, th_lo: th_mid, ..bx },
    ];
    let mut found = 0i64;
    let mut winds = Vec::new();
    for child in &children {
        let w = winding_with_retry(bcs, child)?;
        found += w;
        winds.push(w);
    }
    if found != winding {
        return Err(Error::LocalizationFailure {
            expected: winding as usize,
            found: found.max(0) as usize,
        });
    }
    for (child, w) in children.into_iter().zip(winds) {
        roots_in_box(bcs, child, w, opts, depth + 1, out)?;
    }
    Ok(())
}

/// Choose an interior cut (radius or angle) whose line avoids determinant
/// zeros, probing a few shifted candidates.
fn shift_off_roots(
    bcs: &BoundaryConditions,
    candidate: f64,
    bx: &SectorBox,
    radial: bool,
) -> Result<f64> {
    let width = if radial {
        bx.r_hi - bx.r_lo
    } else {
        bx.th_hi - bx.th_lo
    };
    let offsets = [
        0.0, 0.083, -0.083, 0.171, -0.171, 0.257, -0.257, 0.331, -0.331, 0.401, -0.401,
    ];
    // Acceptance floor: phase tracking needs contour points a few 1e-3 away
    // from any root, which in relative-determinant units is about 1e-2.
    let mut best = candidate;
    let mut best_min = -1.0;
    for &off in &offsets {
        let value = candidate + off * width * 0.5;
        let min_rel = (0..129)
            .map(|i| {
                let t = i as f64 / 128.0;
                let z = if radial {
                    C64::from_polar(value, bx.th_lo + t * (bx.th_hi - bx.th_lo))
                } else {
                    C64::from_polar(bx.r_lo + t * (bx.r_hi - bx.r_lo), value)
                };
                char_det_rel(bcs, z)
            })
            .fold(f64::INFINITY, f64::min);
        if min_rel > 1e-2 {
            return Ok(value);
        }
        if min_rel > best_min {
            best_min = min_rel;
            best = value;
        }
    }
    Ok(best)
}

fn winding_with_retry(bcs: &BoundaryConditions, bx: &SectorBox) -> Result<i64> {
    match winding_number(bcs, bx) {
        Ok(w) => Ok(w),
        Err(Error::EigenvalueOnContour { .. }) => {
            // Grow the box slightly; the caller's tiling still covers the
            // roots because growth happens identically on shared cuts only
            // when both neighbors fail, which the count consistency check
            // catches.
            let grown = SectorBox {
                r_lo: bx.r_lo * 0.9993,
                r_hi: bx.r_hi * 1.0007,
                th_lo: bx.th_lo - 0.0007,
                th_hi: bx.th_hi + 0.0007,
            };
            winding_number(bcs, &grown)
        }
        Err(e) => Err(e),
    }
}

/// Zeros of the characteristic determinant with `|z|` in `[r_lo, r_hi]` and
/// argument in the fundamental sector, with multiplicities.
fn roots_in_annulus(
    bcs: &BoundaryConditions,
    r_lo: f64,
    r_hi: f64,
    opts: &RootSearchOptions,
) -> Result<Vec<(C64, usize)>> {
    let n = bcs.order();
    let sector = 2.0 * std::f64::consts::PI / n as f64;
    // Angular tiling starts slightly below zero so that boundary-ray roots
    // sit inside boxes; cuts are nudged off roots.
    let chunks = ((sector / 0.5).ceil() as usize).max(2);
    let dth = sector / chunks as f64;
    let th_base = -0.31 * dth;

    let r_lo = shift_off_roots(
        bcs,
        r_lo,
        &SectorBox { r_lo, r_hi, th_lo: th_base, th_hi: th_base + sector },
        true,
    )?;
    let r_hi = shift_off_roots(
        bcs,
        r_hi,
        &SectorBox { r_lo, r_hi, th_lo: th_base, th_hi: th_base + sector },
        true,
    )?;

    let mut cuts = vec![th_base];
    for i in 1..chunks {
        let candidate = th_base + i as f64 * dth;
        let cut = shift_off_roots(
            bcs,
            candidate,
            &SectorBox { r_lo, r_hi, th_lo: candidate - 0.4 * dth, th_hi: candidate + 0.4 * dth },
            false,
        )?;
        cuts.push(cut);
    }
    cuts.push(th_base + sector);

    let mut out = Vec::new();
    for i in 0..chunks {
        let bx = SectorBox {
            r_lo,
            r_hi,
            th_lo: cuts[i],
            th_hi: cuts[i + 1],
        };
        let w = winding_with_retry(bcs, &bx)?;
        roots_in_box(bcs, bx, w, opts, 0, &mut out)?;
    }
    Ok(out)
}

/// First `n_max` eigenvalues of the leading-term operator, from determinant
/// roots in the fundamental sector plus the separate zero-eigenvalue test.
pub fn unperturbed_spectrum(
    bcs: &BoundaryConditions,
    n_max: usize,
    opts: &RootSearchOptions,
) -> Result<SpectrumResult> {
    let n = bcs.order();
    let span = bcs.span();
    let z_min = opts
        .z_min
        .unwrap_or(0.3 * std::f64::consts::PI / span);
    let dr = 0.5 * std::f64::consts::PI / span;
    let max_radius = opts
        .max_radius
        .unwrap_or(z_min + dr * (8.0 + 4.0 * n_max as f64));

    let mut eigens: Vec<Eigenvalue> = Vec::new();
    let zero_mult = zero_eigenvalue_multiplicity(bcs);
    if zero_mult > 0 {
        eigens.push(Eigenvalue {
            value: C64::new(0.0, 0.0),
            multiplicity: zero_mult,
        });
    }
    let mut count = zero_mult;
    let mut r = z_min;
    while count < n_max {
        if r > max_radius {
            return Err(Error::RootSearchExhausted {
                radius: r,
                found: count,
            });
        }
        let roots = roots_in_annulus(bcs, r, r + dr, opts)?;
        for (z, mult) in roots {
            let lambda = z.powu(n as u32);
            count += mult;
            eigens.push(Eigenvalue {
                value: lambda,
                multiplicity: mult,
            });
        }
        r += dr;
    }

    eigens.sort_by(|x, y| {
        eigenvalue_sort_key(x.value)
            .partial_cmp(&eigenvalue_sort_key(y.value))
            .expect("finite eigenvalues")
    });
    // Truncate the expanded count to exactly n_max.
    let mut kept = Vec::new();
    let mut total = 0usize;
    for e in eigens {
        if total >= n_max {
            break;
        }
        let take = e.multiplicity.min(n_max - total);
        total += take;
        kept.push(Eigenvalue {
            value: e.value,
            multiplicity: take,
        });
    }
    Ok(SpectrumResult {
        eigenvalues: kept,
        method: SpectrumMethod::CharDetRoots,
        grid_size: None,
        tolerance: opts.newton_tol,
        count_requested: n_max,
        truncated: total < n_max,
    })
}

/// A differential operator: leading term `(-i)^n D^n` plus lower-order
/// coefficient profiles (index `k` holds the sum of profiles multiplying
/// `D^k`, `k <= n-2`).
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub bcs: BoundaryConditions,
    pub lower: Vec<Vec<FunctionProfile>>,
}

impl OperatorSpec {
    pub fn leading(bcs: BoundaryConditions) -> Self {
        let n = bcs.order();
        OperatorSpec {
            bcs,
            lower: vec![Vec::new(); n.saturating_sub(1)],
        }
    }

    pub fn new(bcs: BoundaryConditions, lower: Vec<Vec<FunctionProfile>>) -> Result<Self> {
        let n = bcs.order();
        if lower.len() > n - 1 {
            return Err(Error::invalid(
                "lower-order coefficients must stop at derivative order n-2",
            ));
        }
        let mut padded = lower;
        padded.resize(n - 1, Vec::new());
        Ok(OperatorSpec { bcs, lower: padded })
    }

    /// The same operator with `q` added to the zero-order coefficient.
    pub fn with_added_potential(&self, q: &FunctionProfile) -> Self {
        let mut lower = self.lower.clone();
        lower[0].push(q.clone());
        OperatorSpec {
            bcs: self.bcs.clone(),
            lower,
        }
    }

    pub fn coeff_value(&self, k: usize, x: f64) -> C64 {
        self.lower[k]
            .iter()
            .map(|p| p.eval(x))
            .fold(C64::new(0.0, 0.0), |acc, v| acc + v)
    }

    pub fn has_lower_terms(&self) -> bool {
        self.lower.iter().any(|terms| !terms.is_empty())
    }
}

/// Collocation discretization: the full bordered matrix with boundary rows in
/// place of the collocation rows nearest the endpoints.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: ChebGrid,
    pub order: usize,
    /// `m x m`: operator rows at interior indices, boundary rows at replaced ones.
    pub full: Array2<C64>,
    pub is_bc_row: Vec<bool>,
    /// Interior (non-replaced) row indices.
    pub interior: Vec<usize>,
}

/// Builds the collocation matrix on an `m`-point Chebyshev grid.
///
/// The `ceil(n/2)` rows nearest `a` and `floor(n/2)` nearest `b` are replaced
/// by the discretized boundary conditions, keeping exactly `n` boundary rows.
pub fn discretize(op: &OperatorSpec, m: usize) -> Result<Discretization> {
    let n = op.bcs.order();
    if m < 4 * n {
        return Err(Error::GridTooSmall { got: m, min: 4 * n });
    }
    let (a, b) = op.bcs.segment();
    let grid = ChebGrid::new(a, b, m)?;
    let dmats = grid.diff_matrices(n);

    for k in 0..n.saturating_sub(1) {
        for &x in &grid.nodes {
            let v = op.coeff_value(k, x);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite {
                    context: "lower-order coefficient sample",
                });
            }
        }
    }

    let n_a = n.div_ceil(2);
    let n_b = n / 2;
    let mut is_bc_row = vec![false; m];
    for i in 0..n_a {
        is_bc_row[i] = true;
    }
    for i in (m - n_b)..m {
        is_bc_row[i] = true;
    }

    let lead = C64::new(0.0, -1.0).powu(n as u32);
    let mut full = Array2::<C64>::zeros((m, m));
    let mut bc_rows_iter = 0..n;
    for i in 0..m {
        if is_bc_row[i] {
            let j = bc_rows_iter.next().expect("n boundary rows");
            // Row of the j-th boundary functional: sum_k p_jk (D^k at a) +
            // q_jk (D^k at b); D^0 rows are unit vectors.
            for k in 0..n {
                let pc = op.bcs.p_coeff(j, k);
                let qc = op.bcs.q_coeff(j, k);
                if k == 0 {
                    full[[i, 0]] += pc;
                    full[[i, m - 1]] += qc;
                } else {
                    for c in 0..m {
                        full[[i, c]] += pc * dmats[k - 1][[0, c]] + qc * dmats[k - 1][[m - 1, c]];
                    }
                }
            }
        } else {
            for c in 0..m {
                full[[i, c]] = lead * dmats[n - 1][[i, c]];
            }
            for k in 0..n - 1 {
                let coeff = op.coeff_value(k, grid.nodes[i]);
                if coeff.norm() == 0.0 {
                    continue;
                }
                if k == 0 {
                    full[[i, i]] += coeff;
                } else {
                    for c in 0..m {
                        full[[i, c]] += coeff * dmats[k - 1][[i, c]];
                    }
                }
            }
        }
    }
    debug_assert!(bc_rows_iter.next().is_none());

    let interior = (0..m).filter(|&i| !is_bc_row[i]).collect();
    Ok(Discretization {
        grid,
        order: n,
        full,
        is_bc_row,
        interior,
    })
}

/// Eliminates the boundary rows against pivot columns and returns the dense
/// standard-form eigenvalue matrix on the remaining unknowns.
fn reduce_to_standard(disc: &Discretization) -> Result<Array2<C64>> {
    let m = disc.full.nrows();
    let n = disc.order;
    // Boundary block C (n x m), Gauss-Jordan with full column pivoting.
    let bc_rows: Vec<usize> = (0..m).filter(|&i| disc.is_bc_row[i]).collect();
    let mut work = Array2::<C64>::zeros((n, m));
    for (r, &i) in bc_rows.iter().enumerate() {
        for c in 0..m {
            work[[r, c]] = disc.full[[i, c]];
        }
    }
    let scale = work.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut pivot_cols: Vec<usize> = Vec::with_capacity(n);
    let mut pivot_row_of: Vec<usize> = Vec::with_capacity(n);
    let mut used_rows = vec![false; n];
    for _ in 0..n {
        let mut best = (0usize, 0usize, -1.0f64);
        for r in 0..n {
            if used_rows[r] {
                continue;
            }
            for c in 0..m {
                if pivot_cols.contains(&c) {
                    continue;
                }
                let v = work[[r, c]].norm();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        let (pr, pc, pv) = best;
        if pv <= 1e-13 * scale {
            return Err(Error::RankDeficient { row: pr });
        }
        let piv = work[[pr, pc]];
        for c in 0..m {
            work[[pr, c]] /= piv;
        }
        for r in 0..n {
            if r == pr {
                continue;
            }
            let f = work[[r, pc]];
            if f.norm() == 0.0 {
                continue;
            }
            for c in 0..m {
                let sub = f * work[[pr, c]];
                work[[r, c]] -= sub;
            }
        }
        used_rows[pr] = true;
        pivot_cols.push(pc);
        pivot_row_of.push(pr);
    }
    let rest: Vec<usize> = (0..m).filter(|c| !pivot_cols.contains(c)).collect();
    let mr = rest.len();
    // u_e = T u_r with T = -work[e-rows, rest-cols] after Gauss-Jordan.
    let mut t = Array2::<C64>::zeros((n, mr));
    for (e, (&_pc, &pr)) in pivot_cols.iter().zip(&pivot_row_of).enumerate() {
        for (rj, &c) in rest.iter().enumerate() {
            t[[e, rj]] = -work[[pr, c]];
        }
    }

    // A_red = A[S, rest] + A[S, pivots] T ; E_red likewise from unit rows.
    let mut a_red = Array2::<C64>::zeros((mr, mr));
    let mut e_red = Array2::<C64>::zeros((mr, mr));
    let mut e_is_identity = true;
    for (si, &srow) in disc.interior.iter().enumerate() {
        for (rj, &c) in rest.iter().enumerate() {
            a_red[[si, rj]] = disc.full[[srow, c]];
        }
        for (e, &pc) in pivot_cols.iter().enumerate() {
            let f = disc.full[[srow, pc]];
            if f.norm() == 0.0 {
                continue;
            }
            for rj in 0..mr {
                let add = f * t[[e, rj]];
                a_red[[si, rj]] += add;
            }
        }
        // The eigen-row weight is the unknown u_{srow} itself.
        if let Some(pos) = rest.iter().position(|&c| c == srow) {
            e_red[[si, pos]] = C64::new(1.0, 0.0);
        } else {
            let e = pivot_cols
                .iter()
                .position(|&c| c == srow)
                .expect("row index is either a rest or pivot column");
            for rj in 0..mr {
                e_red[[si, rj]] = t[[e, rj]];
            }
            e_is_identity = false;
        }
    }
    if !(0..mr).all(|i| e_red[[i, i]] == C64::new(1.0, 0.0)) {
        e_is_identity = false;
    }
    if e_is_identity {
        Ok(a_red)
    } else {
        use ndarray_linalg::Factorize;
        use ndarray_linalg::Solve;
        let f = e_red.factorize()?;
        let mut out = Array2::<C64>::zeros((mr, mr));
        for c in 0..mr {
            let col = a_red.column(c).to_owned();
            let x = f.solve(&col)?;
            out.column_mut(c).assign(&x);
        }
        Ok(out)
    }
}

/// Raw collocation eigenvalues at one resolution (unfiltered).
pub fn collocation_eigenvalues(disc: &Discretization) -> Result<Vec<C64>> {
    let reduced = reduce_to_standard(disc)?;
    let (vals, _) = reduced.eig()?;
    Ok(vals.to_vec())
}

#[derive(Debug, Clone, Copy)]
pub struct CollocationOptions {
    /// Relative drift between the two resolutions below which an eigenvalue
    /// counts as resolved.
    pub drift_tol: f64,
}

impl Default for CollocationOptions {
    fn default() -> Self {
        CollocationOptions { drift_tol: 1e-6 }
    }
}

/// Collocation spectrum with the two-resolution spurious filter: eigenvalues
/// of the `m`-point matrix are kept when a `ceil(3m/2)`-point run confirms
/// them within the drift tolerance, and the refined values are returned.
pub fn operator_spectrum(
    op: &OperatorSpec,
    n_max: usize,
    m: usize,
    opts: &CollocationOptions,
) -> Result<SpectrumResult> {
    let coarse = collocation_eigenvalues(&discretize(op, m)?)?;
    let m2 = (3 * m).div_ceil(2);
    let fine = collocation_eigenvalues(&discretize(op, m2)?)?;

    let mut coarse = coarse;
    sort_eigenvalues(&mut coarse);
    let mut fine_used = vec![false; fine.len()];
    let mut kept: Vec<C64> = Vec::new();
    for &v in &coarse {
        let mut best: Option<(usize, f64)> = None;
        for (i, &f) in fine.iter().enumerate() {
            if fine_used[i] {
                continue;
            }
            let d = (v - f).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, d)) = best {
            if d <= opts.drift_tol * v.norm().max(1.0) {
                fine_used[i] = true;
                kept.push(fine[i]);
            }
        }
    }
    sort_eigenvalues(&mut kept);
    let truncated = kept.len() < n_max;
    kept.truncate(n_max);
    Ok(SpectrumResult {
        eigenvalues: kept
            .into_iter()
            .map(|value| Eigenvalue {
                value,
                multiplicity: 1,
            })
            .collect(),
        method: SpectrumMethod::Collocation,
        grid_size: Some(m),
        tolerance: opts.drift_tol,
        count_requested: n_max,
        truncated,
    })
}

/// Contour radii separated from the spectral moduli `|lambda|^{1/n}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RadiiPlan {
    pub radii: Vec<f64>,
    /// Smallest distance from any planned radius to the set of moduli.
    pub separation: f64,
}

/// Places one radius per unit-length window at the midpoint of the widest
/// gap between consecutive distinct moduli; windows whose widest gap is
/// narrower than 1e-6 are skipped.
pub fn admissible_radii(spec0: &SpectrumResult, count: usize, n: usize) -> Result<RadiiPlan> {
    if spec0.eigenvalues.is_empty() {
        return Err(Error::EmptySamples("spectrum for radii planning"));
    }
    let mut moduli: Vec<f64> = spec0
        .eigenvalues
        .iter()
        .map(|e| e.value.norm().powf(1.0 / n as f64))
        .collect();
    moduli.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    moduli.dedup_by(|x, y| (*x - *y).abs() < 1e-9);

    let top = *moduli.last().expect("nonempty");
    let mut radii = Vec::new();
    let mut separation = f64::INFINITY;
    let mut window_lo = moduli[0];
    while radii.len() < count && window_lo < top {
        let window_hi = window_lo + 1.0;
        // Gap intervals between consecutive moduli, clipped to the window.
        let mut best: Option<(f64, f64)> = None;
        let mut prev = f64::NEG_INFINITY;
        for &mv in moduli.iter().chain(std::iter::once(&f64::INFINITY)) {
            let lo = prev.max(window_lo);
            let hi = mv.min(window_hi);
            if hi > lo {
                let width = hi - lo;
                if best.map_or(true, |(bw, _)| width > bw) {
                    best = Some((width, 0.5 * (lo + hi)));
                }
            }
            prev = mv;
            if prev > window_hi {
                break;
            }
        }
        if let Some((width, mid)) = best {
            if width >= 1e-6 {
                let sep = moduli
                    .iter()
                    .map(|&mv| (mv - mid).abs())
                    .fold(f64::INFINITY, f64::min);
                // Keep radii strictly inside the resolved range.
                if mid < top {
                    radii.push(mid);
                    separation = separation.min(sep);
                }
            }
        }
        window_lo = window_hi;
    }
    if radii.is_empty() {
        return Err(Error::EmptySamples("no admissible radii in spectral range"));
    }
    Ok(RadiiPlan { radii, separation })
}

/// Index-wise pairing of two ordered spectra, truncated to the shorter.
pub fn pair_spectra(lam: &SpectrumResult, mu: &SpectrumResult) -> Vec<(C64, C64)> {
    let l = lam.expanded();
    let m = mu.expanded();
    l.into_iter().zip(m).collect()
}
