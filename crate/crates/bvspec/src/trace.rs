//! Regularized trace series: contour-grouped partial sums of the eigenvalue
//! differences, closed-form comparison, and the matrix contour-trace identity.
//!
//! The regularized trace of a perturbation `q` is the grouped series
//! `S(q) = sum_N (mu_N - lambda_N - mean q)`, summed over eigenvalues inside
//! contours `|lambda| = R_l^n` with admissible radii `R_l`, then extrapolated
//! in `1/R_l`. The closed form is `c_a psi_a(a+) + c_b psi_b(b-)` with the
//! coefficients from the structure matrices.

use ndarray::Array2;
use ndarray_linalg::{Eig, Inverse};

use crate::bc::BoundaryConditions;
use crate::coeffmat::{trace_coefficients, StructureMatrices};
use crate::error::{Error, Result};
use crate::profile::FunctionProfile;
use crate::spectrum::{
    admissible_radii, operator_spectrum, pair_spectra, unperturbed_spectrum, CollocationOptions,
    OperatorSpec, RadiiPlan, RootSearchOptions,
};
use crate::C64;

/// Outcome of a full trace experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceReport {
    /// Radii actually used (possibly truncated to the resolved range).
    pub radii: Vec<f64>,
    /// Grouped partial sums over `|lambda_N| < R_l^n`.
    #[serde(serialize_with = "crate::jsonfmt::c64_vec")]
    pub partial_sums: Vec<C64>,
    #[serde(serialize_with = "crate::jsonfmt::c64")]
    pub mean_q: C64,
    #[serde(serialize_with = "crate::jsonfmt::c64")]
    pub closed_form: C64,
    /// Tail extrapolation of the partial sums.
    #[serde(serialize_with = "crate::jsonfmt::c64")]
    pub extrapolated: C64,
    /// `|extrapolated - closed_form|`.
    pub deviation: f64,
    pub resolved_pairs: usize,
    pub grid_size: usize,
    pub plan_separation: f64,
    /// Set when the radii plan was cut to the resolved spectral range.
    pub plan_truncated: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub n_max: usize,
    pub grid: usize,
    pub radii_count: usize,
    pub drift_tol: f64,
    pub root_search: RootSearchOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            n_max: 60,
            grid: 128,
            radii_count: 12,
            drift_tol: 1e-6,
            root_search: RootSearchOptions::default(),
        }
    }
}

/// Grouped partial sums `S_l = sum_{|lambda_N| < R_l^n} (mu_N - lambda_N - mean_q)`.
///
/// Radii whose contour exceeds the resolved pair range are dropped; the flag
/// reports whether that truncation happened.
pub fn regularized_partial_sums(
    pairs: &[(C64, C64)],
    mean_q: C64,
    plan: &RadiiPlan,
    n: usize,
) -> (Vec<C64>, bool) {
    let coverage = pairs.last().map(|(l, _)| l.norm()).unwrap_or(0.0);
    let mut sums = Vec::new();
    let mut truncated = false;
    for &radius in &plan.radii {
        let bound = radius.powi(n as i32);
        if bound > coverage {
            truncated = true;
            break;
        }
        let mut acc = C64::new(0.0, 0.0);
        for &(lam, mu) in pairs {
            if lam.norm() < bound {
                acc += mu - lam - mean_q;
            }
        }
        sums.push(acc);
    }
    (sums, truncated)
}

/// Closed-form value `c_a psi_a(a+) + c_b psi_b(b-)`.
pub fn closed_form_trace(bcs: &BoundaryConditions, q: &FunctionProfile) -> Result<C64> {
    let sm = StructureMatrices::build(bcs);
    let tc = trace_coefficients(&sm)?;
    let (psi_a, psi_b) = q.endpoint_means()?;
    Ok(tc.at_a * psi_a + tc.at_b * psi_b)
}

/// Least-squares fit `S_l ~ S_inf + c / R_l` over the last (up to) five
/// groups; returns `S_inf`.
fn extrapolate_tail(radii: &[f64], sums: &[C64]) -> C64 {
    let len = sums.len();
    if len == 0 {
        return C64::new(0.0, 0.0);
    }
    if len == 1 {
        return sums[0];
    }
    let take = len.min(5);
    let rs = &radii[len - take..];
    let ss = &sums[len - take..];
    // Normal equations for the design [1, 1/R].
    let (mut s11, mut s1x, mut sxx) = (0.0f64, 0.0f64, 0.0f64);
    let (mut b1, mut bx) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (&r, &s) in rs.iter().zip(ss) {
        let x = 1.0 / r;
        s11 += 1.0;
        s1x += x;
        sxx += x * x;
        b1 += s;
        bx += s * x;
    }
    let det = s11 * sxx - s1x * s1x;
    if det.abs() < 1e-14 {
        return ss[take - 1];
    }
    (b1 * sxx - bx * s1x) / det
}

/// Full pipeline: spectra of the operator and its perturbation by `q`,
/// radii plan from the leading-term spectrum, grouped sums, tail
/// extrapolation, and comparison against the closed form.
pub fn trace_experiment(
    op0: &OperatorSpec,
    q: &FunctionProfile,
    opts: &TraceOptions,
) -> Result<TraceReport> {
    let n = op0.bcs.order();
    let colloc = CollocationOptions {
        drift_tol: opts.drift_tol,
    };
    let lam = operator_spectrum(op0, opts.n_max, opts.grid, &colloc)?;
    let perturbed = op0.with_added_potential(q);
    let mu = operator_spectrum(&perturbed, opts.n_max, opts.grid, &colloc)?;
    let anchor = unperturbed_spectrum(&op0.bcs, opts.n_max, &opts.root_search)?;
    let plan = admissible_radii(&anchor, opts.radii_count, n)?;
    let pairs = pair_spectra(&lam, &mu);
    let mean_q = q.mean()?;
    let (sums, truncated) = regularized_partial_sums(&pairs, mean_q, &plan, n);
    let radii: Vec<f64> = plan.radii[..sums.len()].to_vec();
    let extrapolated = extrapolate_tail(&radii, &sums);
    let closed_form = closed_form_trace(&op0.bcs, q)?;
    Ok(TraceReport {
        deviation: (extrapolated - closed_form).norm(),
        radii,
        partial_sums: sums,
        mean_q,
        closed_form,
        extrapolated,
        resolved_pairs: pairs.len(),
        grid_size: opts.grid,
        plan_separation: plan.separation,
        plan_truncated: truncated,
    })
}

/// Residual of the matrix contour-trace identity
/// `-(2 pi i)^{-1} closed-contour-integral of lambda tr((M - lambda)^{-1})
/// equals the sum of the enclosed eigenvalues`.
///
/// The contour is `|lambda| = radius`; quadrature nodes double until two
/// successive values agree to 1e-9.
pub fn contour_trace_residual(mat: &Array2<C64>, radius: f64) -> Result<f64> {
    let (eigs, _) = mat.eig()?;
    let min_dist = eigs
        .iter()
        .map(|v| (v.norm() - radius).abs())
        .fold(f64::INFINITY, f64::min);
    if min_dist < 1e-6 * radius.max(1.0) {
        return Err(Error::EigenvalueOnContour { dist: min_dist });
    }
    let target: C64 = eigs.iter().filter(|v| v.norm() < radius).sum();

    let m = mat.nrows();
    let value_at = |nodes: usize| -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..nodes {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            let lambda = C64::from_polar(radius, theta);
            let mut shifted = mat.clone();
            for i in 0..m {
                shifted[[i, i]] -= lambda;
            }
            let inv = shifted.inv()?;
            let tr: C64 = (0..m).map(|i| inv[[i, i]]).sum();
            acc += lambda * lambda * tr;
        }
        // With d lambda = i lambda d theta the prefactor -(2 pi i)^{-1}
        // reduces to -step / (2 pi) on the accumulated lambda^2 tr sum.
        let step = 2.0 * std::f64::consts::PI / nodes as f64;
        Ok(acc * (-step / (2.0 * std::f64::consts::PI)))
    };
    let mut nodes = 64;
    let mut prev = value_at(nodes)?;
    loop {
        nodes *= 2;
        let next = value_at(nodes)?;
        let change = (next - prev).norm();
        if change < 1e-9 * next.norm().max(1.0) {
            return Ok((next - target).norm());
        }
        prev = next;
        if nodes > 1 << 16 {
            return Err(Error::QuadratureNotConverged { change });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BoundaryConditions;
    use crate::profile::TrigForm;
    use std::f64::consts::PI;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn partial_sums_vanish_for_equal_spectra() {
        let pairs: Vec<(C64, C64)> = (1..=20)
            .map(|k| {
                let v = r((k * k) as f64);
                (v, v)
            })
            .collect();
        let plan = RadiiPlan {
            radii: vec![1.5, 2.5, 3.5],
            separation: 0.5,
        };
        let (sums, truncated) = regularized_partial_sums(&pairs, r(0.0), &plan, 2);
        assert!(!truncated);
        assert!(sums.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn partial_sums_absorb_constant_shift() {
        let c = C64::new(0.25, -0.1);
        let pairs: Vec<(C64, C64)> = (1..=20)
            .map(|k| {
                let v = r((k * k) as f64);
                (v, v + c)
            })
            .collect();
        let plan = RadiiPlan {
            radii: vec![1.5, 2.5, 3.5, 4.5],
            separation: 0.5,
        };
        let (sums, _) = regularized_partial_sums(&pairs, c, &plan, 2);
        assert!(sums.iter().all(|s| s.norm() < 1e-13));
    }

    #[test]
    fn partial_sums_truncate_beyond_coverage() {
        let pairs: Vec<(C64, C64)> = (1..=5)
            .map(|k| (r((k * k) as f64), r((k * k) as f64)))
            .collect();
        let plan = RadiiPlan {
            radii: vec![1.5, 2.5, 9.5],
            separation: 0.5,
        };
        let (sums, truncated) = regularized_partial_sums(&pairs, r(0.0), &plan, 2);
        assert_eq!(sums.len(), 2);
        assert!(truncated);
    }

    #[test]
    fn closed_form_worked_values() {
        let q = FunctionProfile::trig(0.0, PI, TrigForm::Cos, 2.0, r(1.0), 0.0).unwrap();
        let bcs = BoundaryConditions::dirichlet(0.0, PI).unwrap();
        let v = closed_form_trace(&bcs, &q).unwrap();
        assert!((v - r(-0.5)).norm() < 1e-12, "{v}");
        let bcs = BoundaryConditions::neumann(0.0, PI).unwrap();
        let v = closed_form_trace(&bcs, &q).unwrap();
        assert!((v - r(0.5)).norm() < 1e-12, "{v}");
    }

    #[test]
    fn closed_form_vanishes_for_zero_boundary_averages() {
        // sin(2x) has vanishing averaged limits at both endpoints of [0, pi].
        let q = FunctionProfile::trig(0.0, PI, TrigForm::Sin, 2.0, r(1.0), 0.0).unwrap();
        for bcs in [
            BoundaryConditions::dirichlet(0.0, PI).unwrap(),
            BoundaryConditions::neumann(0.0, PI).unwrap(),
        ] {
            let v = closed_form_trace(&bcs, &q).unwrap();
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_vanishes_for_quasi_periodic() {
        let q = FunctionProfile::trig(0.0, 2.0 * PI, TrigForm::Cos, 1.0, r(1.0), 0.0).unwrap();
        let bcs = BoundaryConditions::periodic(0.0, 2.0 * PI).unwrap();
        let v = closed_form_trace(&bcs, &q).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn zero_perturbation_report_is_exact() {
        let bcs = BoundaryConditions::dirichlet(0.0, PI).unwrap();
        let op = OperatorSpec::leading(bcs);
        let q = FunctionProfile::constant(0.0, PI, r(0.0)).unwrap();
        let opts = TraceOptions {
            n_max: 12,
            grid: 48,
            radii_count: 5,
            ..Default::default()
        };
        let report = trace_experiment(&op, &q, &opts).unwrap();
        assert!(report.deviation < 1e-8, "deviation {}", report.deviation);
        assert!(report.partial_sums.iter().all(|s| s.norm() < 1e-10));
    }

    #[test]
    fn dirichlet_cosine_trace_small_scale() {
        let bcs = BoundaryConditions::dirichlet(0.0, PI).unwrap();
        let op = OperatorSpec::leading(bcs);
        let q = FunctionProfile::trig(0.0, PI, TrigForm::Cos, 2.0, r(1.0), 0.0).unwrap();
        let opts = TraceOptions {
            n_max: 25,
            grid: 80,
            radii_count: 8,
            ..Default::default()
        };
        let report = trace_experiment(&op, &q, &opts).unwrap();
        assert!((report.closed_form - r(-0.5)).norm() < 1e-12);
        assert!(
            report.deviation < 5e-2,
            "deviation {} sums {:?}",
            report.deviation,
            report.partial_sums
        );
    }

    #[test]
    fn shift_invariance_of_full_pipeline() {
        let bcs = BoundaryConditions::dirichlet(0.0, PI).unwrap();
        let op = OperatorSpec::leading(bcs);
        let q1 = FunctionProfile::trig(0.0, PI, TrigForm::Cos, 2.0, r(1.0), 0.0).unwrap();
        let opts = TraceOptions {
            n_max: 14,
            grid: 56,
            radii_count: 5,
            ..Default::default()
        };
        let r1 = trace_experiment(&op, &q1, &opts).unwrap();
        // Same potential plus a constant, sampled to keep the preset exact.
        let c = r(1.5);
        let m = 3001;
        let xs: Vec<f64> = (0..m).map(|i| PI * i as f64 / (m - 1) as f64).collect();
        let vals: Vec<C64> = xs.iter().map(|&x| q1.eval(x) + c).collect();
        let q2 = FunctionProfile::samples(0.0, PI, xs, vals).unwrap();
        let r2 = trace_experiment(&op, &q2, &opts).unwrap();
        for (s1, s2) in r1.partial_sums.iter().zip(&r2.partial_sums) {
            assert!((s1 - s2).norm() < 1e-6, "{s1} vs {s2}");
        }
    }

    #[test]
    fn contour_trace_diagonal_case() {
        let mut m = Array2::<C64>::zeros((2, 2));
        m[[0, 0]] = r(1.0);
        m[[1, 1]] = r(5.0);
        let res = contour_trace_residual(&m, 4.0).unwrap();
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn contour_trace_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut m = Array2::<C64>::zeros((8, 8));
        for i in 0..8 {
            for j in 0..8 {
                m[[i, j]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        // Radius chosen to enclose part of the spectrum.
        let (eigs, _) = m.eig().unwrap();
        let mut moduli: Vec<f64> = eigs.iter().map(|v| v.norm()).collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let radius = 0.5 * (moduli[2] + moduli[3]);
        let res = contour_trace_residual(&m, radius).unwrap();
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn contour_enclosing_nothing_gives_zero() {
        let mut m = Array2::<C64>::zeros((3, 3));
        m[[0, 0]] = r(4.0);
        m[[1, 1]] = r(5.0);
        m[[2, 2]] = r(6.0);
        let res = contour_trace_residual(&m, 1.0).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn contour_rejects_eigenvalue_on_contour() {
        let mut m = Array2::<C64>::zeros((2, 2));
        m[[0, 0]] = r(2.0);
        m[[1, 1]] = r(3.0);
        assert!(matches!(
            contour_trace_residual(&m, 2.0),
            Err(Error::EigenvalueOnContour { .. })
        ));
    }

    #[test]
    fn extrapolation_recovers_inverse_radius_decay() {
        let radii: Vec<f64> = (1..=8).map(|k| k as f64 + 0.5).collect();
        let target = C64::new(-0.5, 0.25);
        let sums: Vec<C64> = radii.iter().map(|&r0| target + r(1.7) / r0).collect();
        let got = extrapolate_tail(&radii, &sums);
        assert!((got - target).norm() < 1e-12, "{got}");
    }
}
