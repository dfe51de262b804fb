//! The four experiment commands: identities, spectrum, trace, equiconv.

use std::path::Path;

use serde::Serialize;

use bvspec::bc::{BoundaryClass, BoundaryConditions};
use bvspec::coeffmat::{
    abel_partial_sums, check_regularity, sector_traces, series_term, special_trace_coefficients,
    sum_identity_residual, trace_coefficients, StructureMatrices,
};
use bvspec::equiconv::{
    equiconv_experiment, oscillatory_decay, phi_arc_integrals, ContourDiagnostics,
    EquiconvOptions,
};
use bvspec::greenfn::{decay_scan, DecayRow, DecayScanOptions};
use bvspec::profile::{FunctionProfile, TrigForm};
use bvspec::spectrum::{
    admissible_radii, operator_spectrum, unperturbed_spectrum, CollocationOptions,
    RootSearchOptions, SpectrumResult,
};
use bvspec::trace::{trace_experiment, TraceOptions, TraceReport};
use bvspec::C64;

use crate::config::{ExperimentConfig, Numerics};
use crate::report::{write_csv, write_json, Envelope};
use crate::CliError;

fn pair(v: C64) -> [f64; 2] {
    [v.re, v.im]
}

fn root_options(num: &Numerics) -> RootSearchOptions {
    RootSearchOptions {
        z_min: num.z_min,
        newton_tol: num.newton_tol,
        max_radius: None,
    }
}

/// Checked structure matrices of a normalized system; degenerate limit
/// matrices are an input-class failure with the canonical message.
fn regular_structures(bcs: &BoundaryConditions) -> Result<(StructureMatrices, [f64; 2]), CliError> {
    let sm = StructureMatrices::build(bcs);
    let reg = check_regularity(&sm);
    if !reg.regular {
        return Err(CliError::Input(format!(
            "not Birkhoff regular: singular value ratios {:.3e}, {:.3e}",
            reg.sv_ratio[0], reg.sv_ratio[1]
        )));
    }
    Ok((sm, reg.sv_ratio))
}

#[derive(Serialize)]
struct IdentityResults {
    regular: bool,
    sv_ratio: [f64; 2],
    class: String,
    coupling: Option<[f64; 2]>,
    trace_coefficients: CoeffOut,
    special_case: Option<SpecialOut>,
    sum_identity_residuals: [f64; 2],
    series_terms: Vec<SeriesOut>,
    series_rollup: Vec<RollupOut>,
    abel: Vec<AbelOut>,
}

#[derive(Serialize)]
struct CoeffOut {
    at_a: [f64; 2],
    at_b: [f64; 2],
}

#[derive(Serialize)]
struct SpecialOut {
    at_a: [f64; 2],
    at_b: [f64; 2],
    deviation: f64,
}

#[derive(Serialize)]
struct SeriesOut {
    sector: usize,
    k: usize,
    trace_a: [f64; 2],
    trace_b: [f64; 2],
}

/// Abel-weighted rollup of the rank-one trace series against the sector
/// traces; the terms are periodic in `k`, so the geometric tail is summed in
/// closed form.
#[derive(Serialize)]
struct RollupOut {
    sector: usize,
    distance_a: f64,
    distance_b: f64,
}

#[derive(Serialize)]
struct AbelOut {
    sector: usize,
    distance_p: f64,
    distance_q: f64,
}

pub fn run_identities(
    cfg: &ExperimentConfig,
    hash: String,
    seed: u64,
    out: &Path,
) -> Result<bool, CliError> {
    let num = &cfg.numerics;
    let bcs = cfg.boundary_conditions()?;
    let (sm, sv_ratio) = regular_structures(&bcs)?;
    let n = bcs.order();

    let class = bcs.classify();
    let (class_name, coupling) = match &class {
        BoundaryClass::AlmostSeparatedEven => ("almost_separated_even", None),
        BoundaryClass::AlmostSeparatedOdd => ("almost_separated_odd", None),
        BoundaryClass::QuasiPeriodic { coupling } => ("quasi_periodic", Some(pair(*coupling))),
        BoundaryClass::General => ("general", None),
    };

    let tc = trace_coefficients(&sm)?;
    let special = match &class {
        BoundaryClass::General => None,
        _ => {
            let sp = special_trace_coefficients(&bcs, &class)?;
            let deviation = (sp.at_a - tc.at_a).norm().max((sp.at_b - tc.at_b).norm());
            Some(SpecialOut {
                at_a: pair(sp.at_a),
                at_b: pair(sp.at_b),
                deviation,
            })
        }
    };

    let residuals = [
        sum_identity_residual(&sm, 1)?,
        sum_identity_residual(&sm, 2)?,
    ];

    let mut series = Vec::new();
    let mut rollup = Vec::new();
    let mut abel = Vec::new();
    for sector in 1..=2 {
        let mut period_terms = Vec::with_capacity(n);
        for k in 0..n {
            period_terms.push(series_term(&sm, sector, k)?);
        }
        for k in 0..num.series_terms {
            let (ta, tb) = period_terms[k % n];
            series.push(SeriesOut {
                sector,
                k,
                trace_a: pair(ta),
                trace_b: pair(tb),
            });
        }
        // sum_{k<=K} r^k t_{k mod n} in closed geometric form per residue.
        let r = num.abel_r;
        let kmax = num.abel_k;
        let rn = r.powi(n as i32);
        let mut sum_a = C64::new(0.0, 0.0);
        let mut sum_b = C64::new(0.0, 0.0);
        for (m, &(ta, tb)) in period_terms.iter().enumerate() {
            if m > kmax {
                break;
            }
            let reps = (kmax - m) / n + 1;
            let factor = r.powi(m as i32) * (1.0 - rn.powi(reps as i32)) / (1.0 - rn);
            sum_a += ta * factor;
            sum_b += tb * factor;
        }
        let (tr_a, tr_b) = sector_traces(&sm, sector)?;
        rollup.push(RollupOut {
            sector,
            distance_a: (-sum_a - tr_a).norm(),
            distance_b: (-sum_b - tr_b).norm(),
        });

        let (sp, sq) = abel_partial_sums(&sm, sector, r, kmax)?;
        let s = sector - 1;
        let dp = (&sp - &sm.coupling_a[s])
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let dq = (&sq - &sm.coupling_b[s])
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        abel.push(AbelOut {
            sector,
            distance_p: dp,
            distance_q: dq,
        });
    }

    let pass = residuals.iter().all(|&r| r < num.identity_tol)
        && special
            .as_ref()
            .map_or(true, |s| s.deviation < num.special_tol)
        && rollup
            .iter()
            .all(|r| r.distance_a < num.abel_tol && r.distance_b < num.abel_tol)
        && abel
            .iter()
            .all(|a| a.distance_p < num.abel_tol && a.distance_q < num.abel_tol);

    let envelope = Envelope {
        command: "identities",
        config_sha256: hash,
        seed,
        tolerances: num.clone(),
        pass,
        results: IdentityResults {
            regular: true,
            sv_ratio,
            class: class_name.to_string(),
            coupling,
            trace_coefficients: CoeffOut {
                at_a: pair(tc.at_a),
                at_b: pair(tc.at_b),
            },
            special_case: special,
            sum_identity_residuals: residuals,
            series_terms: series,
            series_rollup: rollup,
            abel,
        },
    };
    write_json(out, &envelope)?;
    Ok(pass)
}

#[derive(Serialize)]
struct SpectrumResults {
    unperturbed: SpectrumResult,
    operator: SpectrumResult,
    perturbed: Option<SpectrumResult>,
}

fn spectrum_csv(dir: &Path, name: &str, spec: &SpectrumResult) -> Result<(), CliError> {
    write_csv(
        dir,
        name,
        "index,re,im,multiplicity",
        spec.eigenvalues.iter().enumerate().map(|(i, e)| {
            format!("{},{},{},{}", i + 1, e.value.re, e.value.im, e.multiplicity)
        }),
    )
}

pub fn run_spectrum(
    cfg: &ExperimentConfig,
    hash: String,
    seed: u64,
    out: &Path,
) -> Result<bool, CliError> {
    let num = &cfg.numerics;
    let bcs = cfg.boundary_conditions()?;
    regular_structures(&bcs)?;
    let op = cfg.operator(&bcs)?;
    let colloc_opts = CollocationOptions {
        drift_tol: num.drift_tol,
    };

    let unperturbed = unperturbed_spectrum(&bcs, num.n_max, &root_options(num))?;
    let operator = operator_spectrum(&op, num.n_max, num.grid, &colloc_opts)?;
    spectrum_csv(out, "spectrum_unperturbed.csv", &unperturbed)?;
    spectrum_csv(out, "spectrum.csv", &operator)?;

    let perturbed = match cfg.potential(&bcs)? {
        Some(q) => {
            let mu = operator_spectrum(&op.with_added_potential(&q), num.n_max, num.grid, &colloc_opts)?;
            spectrum_csv(out, "spectrum_perturbed.csv", &mu)?;
            Some(mu)
        }
        None => None,
    };

    let pass = !operator.truncated;
    let envelope = Envelope {
        command: "spectrum",
        config_sha256: hash,
        seed,
        tolerances: num.clone(),
        pass,
        results: SpectrumResults {
            unperturbed,
            operator,
            perturbed,
        },
    };
    write_json(out, &envelope)?;
    Ok(pass)
}

pub fn run_trace(
    cfg: &ExperimentConfig,
    hash: String,
    seed: u64,
    out: &Path,
) -> Result<bool, CliError> {
    let num = &cfg.numerics;
    let bcs = cfg.boundary_conditions()?;
    regular_structures(&bcs)?;
    let op = cfg.operator(&bcs)?;
    let q = cfg
        .potential(&bcs)?
        .ok_or_else(|| CliError::Input("trace experiment needs a potential".into()))?;
    let opts = TraceOptions {
        n_max: num.n_max,
        grid: num.grid,
        radii_count: num.radii_count,
        drift_tol: num.drift_tol,
        root_search: root_options(num),
    };
    let report: TraceReport = trace_experiment(&op, &q, &opts)?;
    write_csv(
        out,
        "trace_partial_sums.csv",
        "radius,re_sum,im_sum",
        report
            .radii
            .iter()
            .zip(&report.partial_sums)
            .map(|(radius, s)| format!("{},{},{}", radius, s.re, s.im)),
    )?;
    let pass = report.deviation.is_finite();
    let envelope = Envelope {
        command: "trace",
        config_sha256: hash,
        seed,
        tolerances: num.clone(),
        pass,
        results: report,
    };
    write_json(out, &envelope)?;
    Ok(pass)
}

#[derive(Serialize)]
struct EquiconvResults {
    plan_separation: f64,
    diagnostics: ContourDiagnostics,
    appendix: Option<AppendixResults>,
}

#[derive(Serialize)]
struct AppendixResults {
    envelope_radii: Vec<f64>,
    envelope_integrals: Vec<f64>,
    envelope_bounded: bool,
    oscillatory: Vec<OscillatoryOut>,
    decay_scan: Vec<DecayRow>,
}

#[derive(Serialize)]
struct OscillatoryOut {
    profile: String,
    radii: Vec<f64>,
    values: Vec<f64>,
    decreasing: bool,
}

pub fn run_equiconv(
    cfg: &ExperimentConfig,
    hash: String,
    seed: u64,
    out: &Path,
) -> Result<bool, CliError> {
    let num = &cfg.numerics;
    let bcs = cfg.boundary_conditions()?;
    regular_structures(&bcs)?;
    let op = cfg.operator(&bcs)?;
    let n = bcs.order();
    let (a, b) = bcs.segment();

    let spec0 = unperturbed_spectrum(&bcs, num.n_max, &root_options(num))?;
    let plan = admissible_radii(&spec0, num.radii_count, n)?;
    let eq_opts = EquiconvOptions {
        xy_points: num.xy_points,
        contour_nodes: num.contour_nodes,
        quad_guard: 0.05,
    };
    let diagnostics = equiconv_experiment(&op, num.grid, &plan, &eq_opts)?;
    write_csv(
        out,
        "equiconv.csv",
        "radius,equiconv_value,phi_integral",
        diagnostics
            .radii
            .iter()
            .zip(diagnostics.integral.iter().zip(&diagnostics.phi_integral))
            .map(|(radius, (v, phi))| format!("{radius},{v},{phi}")),
    )?;

    let appendix = if cfg.appendix {
        let envelope_integrals = phi_arc_integrals(n, b - a, &num.prop_radii);
        let first = envelope_integrals.first().copied().unwrap_or(0.0);
        let envelope_bounded = envelope_integrals.iter().all(|&v| v <= 2.0 * first);
        write_csv(
            out,
            "prop2.csv",
            "radius,envelope_integral",
            num.prop_radii
                .iter()
                .zip(&envelope_integrals)
                .map(|(radius, v)| format!("{radius},{v}")),
        )?;

        let directions = [
            C64::from_polar(1.0, 0.25),
            C64::from_polar(1.0, 0.9),
            C64::from_polar(1.0, 1.57),
            C64::from_polar(1.0, 2.6),
        ];
        let mut profiles: Vec<(String, FunctionProfile)> = Vec::new();
        if let Some(q) = cfg.potential(&bcs)? {
            profiles.push(("potential".into(), q));
        } else {
            profiles.push((
                "cosine".into(),
                FunctionProfile::trig(a, b, TrigForm::Cos, 2.0, C64::new(1.0, 0.0), 0.0)?,
            ));
        }
        profiles.push((
            "step".into(),
            FunctionProfile::step(
                a,
                b,
                vec![a + 0.4 * (b - a)],
                vec![C64::new(1.0, 0.0), C64::new(-0.5, 0.0)],
            )?,
        ));
        profiles.push((
            "linear".into(),
            FunctionProfile::polynomial(a, b, vec![C64::new(0.3, 0.0), C64::new(1.0, 0.0)])?,
        ));
        let mut oscillatory = Vec::new();
        let mut osc_rows: Vec<String> = Vec::new();
        for (name, q) in &profiles {
            let values = oscillatory_decay(
                q,
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                &directions,
                &num.osc_radii,
            )?;
            for (radius, v) in num.osc_radii.iter().zip(&values) {
                osc_rows.push(format!("{name},{radius},{v}"));
            }
            oscillatory.push(OscillatoryOut {
                profile: name.clone(),
                radii: num.osc_radii.clone(),
                values: values.clone(),
                decreasing: values.windows(2).all(|w| w[1] < w[0]),
            });
        }
        write_csv(out, "prop1.csv", "profile,radius,sup_value", osc_rows)?;

        let scan = decay_scan(
            &bcs,
            &num.decay_radii,
            &DecayScanOptions {
                margin: num.margin,
                ..Default::default()
            },
        )?;
        write_csv(
            out,
            "decay_scan.csv",
            "radius,max_compact,max_global",
            scan.iter()
                .map(|row| format!("{},{},{}", row.radius, row.max_compact, row.max_global)),
        )?;
        Some(AppendixResults {
            envelope_radii: num.prop_radii.clone(),
            envelope_integrals,
            envelope_bounded,
            oscillatory,
            decay_scan: scan,
        })
    } else {
        None
    };

    let pass = diagnostics.converged.iter().all(|&c| c)
        && appendix.as_ref().map_or(true, |ap| {
            ap.envelope_bounded && ap.oscillatory.iter().all(|o| o.decreasing)
        });
    let envelope = Envelope {
        command: "equiconv",
        config_sha256: hash,
        seed,
        tolerances: num.clone(),
        pass,
        results: EquiconvResults {
            plan_separation: plan.separation,
            diagnostics,
            appendix,
        },
    };
    write_json(out, &envelope)?;
    Ok(pass)
}
