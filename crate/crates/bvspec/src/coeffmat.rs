//! Structure matrices of a normalized boundary-condition system and the
//! closed-form trace coefficients built from them.
//!
//! For a system of order `n` with condition orders `d_j` and leading
//! coefficients `(a_j, b_j)`, let `rho = exp(2 pi i / n)` and split indices
//! `nu_1 = floor((n+1)/2)`, `nu_2 = floor(n/2)`. The limit boundary matrices
//! are, for sector `kappa`,
//!
//! ```text
//! W[kappa]_{j+1,k} = rho^{(k-1) d_j} * (a_j  if k <= nu_kappa, else b_j)
//! ```
//!
//! together with the one-sided Vandermonde-type matrices
//! `A_{j+1,k} = a_j rho^{(k-1) d_j}`, `B_{j+1,k} = b_j rho^{(k-1) d_j}` and the
//! sector coupling weights
//! `P[kappa]_{ab} = 1/(rho^{b-a} - 1)` on the block `a > nu_kappa >= b`
//! (zero elsewhere), `Q[kappa] = conj(P[kappa])^T`.
//!
//! The regularized trace of a perturbation `q` is
//! `S(q) = c_a psi_a(a+) + c_b psi_b(b-)` with
//! `c_a = (2n)^{-1} sum_kappa tr(P W^{-1} A)` and
//! `c_b = (2n)^{-1} sum_kappa tr(Q W^{-1} B)`, and the two traces satisfy
//! `tr(P W^{-1} A) + tr(Q W^{-1} B) = sum_j d_j - n(n-1)/2` in each sector.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve, SVD};

use crate::bc::{BoundaryClass, BoundaryConditions};
use crate::error::{Error, Result};
use crate::C64;

/// Singular value ratio below which a limit matrix counts as degenerate.
pub const REGULARITY_SV_RATIO: f64 = 1e-10;

/// The sector-split algebraic data of a normalized system.
#[derive(Debug, Clone)]
pub struct StructureMatrices {
    pub n: usize,
    /// Primitive n-th root of unity `exp(2 pi i / n)`.
    pub root: C64,
    /// Split indices per sector: `[floor((n+1)/2), floor(n/2)]`.
    pub split: [usize; 2],
    /// Condition orders of the underlying system.
    pub orders: Vec<usize>,
    /// Leading coefficients at the endpoints.
    pub lead_a: Vec<C64>,
    pub lead_b: Vec<C64>,
    /// Limit boundary matrices, one per sector.
    pub limit_w: [Array2<C64>; 2],
    /// Leading coefficients at `a` spread over root powers.
    pub vand_a: Array2<C64>,
    /// Leading coefficients at `b` spread over root powers.
    pub vand_b: Array2<C64>,
    /// Coupling weights pairing with `vand_a` (lower-left block).
    pub coupling_a: [Array2<C64>; 2],
    /// Coupling weights pairing with `vand_b` (upper-right block).
    pub coupling_b: [Array2<C64>; 2],
}

/// Outcome of the regularity test on the limit matrices.
#[derive(Debug, Clone, Copy)]
pub struct Regularity {
    pub regular: bool,
    /// Smallest/largest singular value ratio per sector.
    pub sv_ratio: [f64; 2],
    pub threshold: f64,
}

/// Coefficients of the closed-form trace `S(q) = at_a * psi_a(a+) + at_b * psi_b(b-)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCoefficients {
    pub at_a: C64,
    pub at_b: C64,
}

pub fn root_of_unity(n: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / n as f64)
}

/// Integer power of the unit root, reduced modulo `n` to avoid drift.
fn root_pow(n: usize, e: i64) -> C64 {
    let m = e.rem_euclid(n as i64) as usize;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / n as f64)
}

impl StructureMatrices {
    pub fn build(bcs: &BoundaryConditions) -> Self {
        let n = bcs.order();
        let root = root_of_unity(n);
        let split = [(n + 1) / 2, n / 2];
        let d = bcs.orders().to_vec();
        let la = bcs.leads_a().to_vec();
        let lb = bcs.leads_b().to_vec();

        let mut vand_a = Array2::zeros((n, n));
        let mut vand_b = Array2::zeros((n, n));
        for j in 0..n {
            for k in 0..n {
                let p = root_pow(n, (k as i64) * (d[j] as i64));
                vand_a[[j, k]] = la[j] * p;
                vand_b[[j, k]] = lb[j] * p;
            }
        }

        let limit_w = [0, 1].map(|s| {
            let nu = split[s];
            let mut w = Array2::zeros((n, n));
            for j in 0..n {
                for k in 0..n {
                    w[[j, k]] = if k < nu { vand_a[[j, k]] } else { vand_b[[j, k]] };
                }
            }
            w
        });

        let coupling_a = [0, 1].map(|s| {
            let nu = split[s];
            let mut p = Array2::zeros((n, n));
            for alpha in 1..=n {
                for beta in 1..=n {
                    if alpha > nu && nu >= beta {
                        let denom = root_pow(n, beta as i64 - alpha as i64) - 1.0;
                        p[[alpha - 1, beta - 1]] = denom.inv();
                    }
                }
            }
            p
        });
        let coupling_b = [0, 1].map(|s| coupling_a[s].t().map(|c| c.conj()));

        StructureMatrices {
            n,
            root,
            split,
            orders: d,
            lead_a: la,
            lead_b: lb,
            limit_w,
            vand_a,
            vand_b,
            coupling_a,
            coupling_b,
        }
    }

    pub fn total_order(&self) -> usize {
        self.orders.iter().sum()
    }

    /// Solves `W[sector] x = rhs` for a single right-hand side.
    #[cfg(test)]
    fn solve_w(&self, s: usize, rhs: &Array1<C64>) -> Result<Array1<C64>> {
        Ok(self.limit_w[s].solve(rhs)?)
    }
}

/// Tests non-degeneracy of both limit matrices by singular value ratio.
pub fn check_regularity(sm: &StructureMatrices) -> Regularity {
    let ratio = [0, 1].map(|s| {
        let (_, sv, _) = sm.limit_w[s]
            .svd(false, false)
            .expect("svd of a finite matrix");
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let bottom = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if top == 0.0 {
            0.0
        } else {
            bottom / top
        }
    });
    Regularity {
        regular: ratio.iter().all(|&r| r > REGULARITY_SV_RATIO),
        sv_ratio: ratio,
        threshold: REGULARITY_SV_RATIO,
    }
}

fn require_regular(sm: &StructureMatrices) -> Result<()> {
    let reg = check_regularity(sm);
    if !reg.regular {
        return Err(Error::NotRegular {
            ratio: reg.sv_ratio[0].min(reg.sv_ratio[1]),
        });
    }
    Ok(())
}

/// `tr(P[sector] W^{-1} A)` and `tr(Q[sector] W^{-1} B)`; `sector` is 1 or 2.
pub fn sector_traces(sm: &StructureMatrices, sector: usize) -> Result<(C64, C64)> {
    assert!(sector == 1 || sector == 2, "sector must be 1 or 2");
    let s = sector - 1;
    let winv_a = solve_matrix(&sm.limit_w[s], &sm.vand_a)?;
    let winv_b = solve_matrix(&sm.limit_w[s], &sm.vand_b)?;
    Ok((
        trace_prod(&sm.coupling_a[s], &winv_a),
        trace_prod(&sm.coupling_b[s], &winv_b),
    ))
}

fn solve_matrix(w: &Array2<C64>, rhs: &Array2<C64>) -> Result<Array2<C64>> {
    let f = w.factorize()?;
    let mut out = Array2::zeros(rhs.raw_dim());
    for c in 0..rhs.ncols() {
        let col = rhs.column(c).to_owned();
        let x = f.solve(&col)?;
        out.column_mut(c).assign(&x);
    }
    Ok(out)
}

fn trace_prod(m1: &Array2<C64>, m2: &Array2<C64>) -> C64 {
    let n = m1.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += m1[[i, k]] * m2[[k, i]];
        }
    }
    acc
}

/// Closed-form trace coefficients `(c_a, c_b)` averaged over both sectors.
pub fn trace_coefficients(sm: &StructureMatrices) -> Result<TraceCoefficients> {
    require_regular(sm)?;
    let mut at_a = C64::new(0.0, 0.0);
    let mut at_b = C64::new(0.0, 0.0);
    for sector in 1..=2 {
        let (ta, tb) = sector_traces(sm, sector)?;
        at_a += ta;
        at_b += tb;
    }
    let scale = 1.0 / (2.0 * sm.n as f64);
    Ok(TraceCoefficients {
        at_a: at_a * scale,
        at_b: at_b * scale,
    })
}

/// Residual of the sector trace identity
/// `|tr(P W^{-1} A) + tr(Q W^{-1} B) - (sum d_j - n(n-1)/2)|`.
pub fn sum_identity_residual(sm: &StructureMatrices, sector: usize) -> Result<f64> {
    require_regular(sm)?;
    let (ta, tb) = sector_traces(sm, sector)?;
    let n = sm.n as f64;
    let target = sm.total_order() as f64 - n * (n - 1.0) / 2.0;
    Ok((ta + tb - target).norm())
}

/// Closed-form trace coefficients for the special boundary classes.
///
/// Almost separated, `n = 2m`:
/// `c_a = (sum of a-side orders - m(2m-1)/2) / (2m)`, symmetric at `b`.
/// Almost separated, `n = 2m+1`: the mixed condition contributes half its
/// order to each side and the denominator is `2m+1`.
/// Quasi-periodic: both coefficients vanish.
pub fn special_trace_coefficients(
    bcs: &BoundaryConditions,
    class: &BoundaryClass,
) -> Result<TraceCoefficients> {
    let n = bcs.order();
    let d = bcs.orders();
    let la = bcs.leads_a();
    let lb = bcs.leads_b();
    match class {
        BoundaryClass::QuasiPeriodic { .. } => Ok(TraceCoefficients {
            at_a: C64::new(0.0, 0.0),
            at_b: C64::new(0.0, 0.0),
        }),
        BoundaryClass::AlmostSeparatedEven => {
            let m = n / 2;
            let sum_a: usize = (0..n).filter(|&j| lb[j].norm() == 0.0).map(|j| d[j]).sum();
            let sum_b: usize = (0..n).filter(|&j| la[j].norm() == 0.0).map(|j| d[j]).sum();
            let off = m as f64 * (2.0 * m as f64 - 1.0) / 2.0;
            let den = 2.0 * m as f64;
            Ok(TraceCoefficients {
                at_a: C64::new((sum_a as f64 - off) / den, 0.0),
                at_b: C64::new((sum_b as f64 - off) / den, 0.0),
            })
        }
        BoundaryClass::AlmostSeparatedOdd => {
            let m = n / 2;
            let sum_a: usize = (0..n).filter(|&j| lb[j].norm() == 0.0).map(|j| d[j]).sum();
            let sum_b: usize = (0..n).filter(|&j| la[j].norm() == 0.0).map(|j| d[j]).sum();
            let mixed: Vec<usize> = (0..n)
                .filter(|&j| la[j].norm() > 0.0 && lb[j].norm() > 0.0)
                .collect();
            if mixed.len() != 1 {
                return Err(Error::invalid(
                    "almost separated odd system must have exactly one mixed condition",
                ));
            }
            let dm = d[mixed[0]] as f64;
            let off = m as f64 * (2.0 * m as f64 + 1.0) / 2.0;
            let den = 2.0 * m as f64 + 1.0;
            Ok(TraceCoefficients {
                at_a: C64::new((sum_a as f64 + dm / 2.0 - off) / den, 0.0),
                at_b: C64::new((sum_b as f64 + dm / 2.0 - off) / den, 0.0),
            })
        }
        BoundaryClass::General => Err(Error::invalid(
            "no special closed form for general boundary conditions",
        )),
    }
}

/// Row vector supported on the first `nu` coordinates: `(1, r^k, .., r^{(nu-1)k}, 0..)`.
fn lower_row(n: usize, nu: usize, k: i64) -> Array1<C64> {
    let mut v = Array1::zeros(n);
    for b in 0..nu {
        v[b] = root_pow(n, b as i64 * k);
    }
    v
}

/// Row vector supported on the last `n - nu` coordinates.
fn upper_row(n: usize, nu: usize, k: i64) -> Array1<C64> {
    let mut u = Array1::zeros(n);
    for b in nu..n {
        u[b] = root_pow(n, b as i64 * k);
    }
    u
}

/// The `k`-th rank-one expansion term of the sector traces: builds the rows
/// `v_k`, `u_k`, the rank-one matrices `conj(u_k)^T v_k` and `conj(v_k)^T u_k`,
/// and returns `(tr(P_k W^{-1} A), tr(Q_k W^{-1} B))`.
pub fn series_term(sm: &StructureMatrices, sector: usize, k: usize) -> Result<(C64, C64)> {
    assert!(sector == 1 || sector == 2, "sector must be 1 or 2");
    require_regular(sm)?;
    let s = sector - 1;
    let n = sm.n;
    let nu = sm.split[s];
    let v = lower_row(n, nu, k as i64);
    let u = upper_row(n, nu, k as i64);

    let p_k = rank_one(&u.map(|c| c.conj()), &v);
    let q_k = rank_one(&v.map(|c| c.conj()), &u);

    let winv_a = solve_matrix(&sm.limit_w[s], &sm.vand_a)?;
    let winv_b = solve_matrix(&sm.limit_w[s], &sm.vand_b)?;
    Ok((trace_prod(&p_k, &winv_a), trace_prod(&q_k, &winv_b)))
}

fn rank_one(col: &Array1<C64>, row: &Array1<C64>) -> Array2<C64> {
    let n = col.len();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = col[i] * row[j];
        }
    }
    m
}

/// Truncated Abel sums `-sum_{k<=kmax} r^k P_k` and `-sum_{k<=kmax} r^k Q_k`,
/// which approach the coupling weights as `r -> 1-`, `kmax -> inf`.
pub fn abel_partial_sums(
    sm: &StructureMatrices,
    sector: usize,
    r: f64,
    kmax: usize,
) -> Result<(Array2<C64>, Array2<C64>)> {
    assert!(sector == 1 || sector == 2, "sector must be 1 or 2");
    if !(0.0 < r && r < 1.0) {
        return Err(Error::invalid("Abel parameter r must lie in (0, 1)"));
    }
    let s = sector - 1;
    let n = sm.n;
    let nu = sm.split[s];
    let mut sum_p: Array2<C64> = Array2::zeros((n, n));
    let mut sum_q: Array2<C64> = Array2::zeros((n, n));
    // Entry (alpha, beta) of P_k is conj(u_k[alpha]) v_k[beta]; accumulate the
    // geometric factors directly.
    let mut rk = 1.0;
    for k in 0..=kmax {
        let v = lower_row(n, nu, k as i64);
        let u = upper_row(n, nu, k as i64);
        for alpha in nu..n {
            let cu = u[alpha].conj() * rk;
            for beta in 0..nu {
                sum_p[[alpha, beta]] -= cu * v[beta];
            }
        }
        for alpha in 0..nu {
            let cv = v[alpha].conj() * rk;
            for beta in nu..n {
                sum_q[[alpha, beta]] -= cv * u[beta];
            }
        }
        rk *= r;
    }
    Ok((sum_p, sum_q))
}

/// Residual of the rank-one expansion identity
/// `A conj(u_k)^T + W conj(v_k)^T - n sigma(k, d_j) a_j e_{j+1}`
/// where `sigma` tests congruence mod `n`; exposed for verification.
pub fn expansion_identity_residual(
    sm: &StructureMatrices,
    sector: usize,
    k: usize,
) -> Array1<C64> {
    let s = sector - 1;
    let n = sm.n;
    let nu = sm.split[s];
    let v = lower_row(n, nu, k as i64);
    let u = upper_row(n, nu, k as i64);
    let uc = u.map(|c| c.conj());
    let vc = v.map(|c| c.conj());
    let mut lhs: Array1<C64> = Array1::zeros(n);
    for j in 0..n {
        for c in 0..n {
            lhs[j] += sm.vand_a[[j, c]] * uc[c] + sm.limit_w[s][[j, c]] * vc[c];
        }
    }
    for j in 0..n {
        if (k as i64 - sm.orders[j] as i64).rem_euclid(n as i64) == 0 {
            lhs[j] -= sm.lead_a[j] * n as f64;
        }
    }
    lhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BoundaryConditions;
    use std::f64::consts::PI;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn dirichlet() -> BoundaryConditions {
        BoundaryConditions::dirichlet(0.0, PI).unwrap()
    }

    fn neumann() -> BoundaryConditions {
        BoundaryConditions::neumann(0.0, PI).unwrap()
    }

    #[test]
    fn dirichlet_structure_matrices() {
        let sm = StructureMatrices::build(&dirichlet());
        assert!((sm.root - r(-1.0)).norm() < 1e-15);
        assert_eq!(sm.split, [1, 1]);
        // Limit matrix is the identity.
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { r(1.0) } else { r(0.0) };
                assert!((sm.limit_w[0][[i, j]] - expect).norm() < 1e-15);
            }
        }
        // Vandermonde blocks.
        assert!((sm.vand_a[[0, 0]] - r(1.0)).norm() < 1e-15);
        assert!((sm.vand_a[[0, 1]] - r(1.0)).norm() < 1e-15);
        assert!(sm.vand_a[[1, 0]].norm() < 1e-15);
        assert!((sm.vand_b[[1, 0]] - r(1.0)).norm() < 1e-15);
        assert!((sm.vand_b[[1, 1]] - r(1.0)).norm() < 1e-15);
        // Coupling weights: only the (2,1) / (1,2) entries, value -1/2.
        assert!((sm.coupling_a[0][[1, 0]] - r(-0.5)).norm() < 1e-15);
        assert!((sm.coupling_b[0][[0, 1]] - r(-0.5)).norm() < 1e-15);
        assert_eq!(sm.coupling_a[0][[0, 0]], r(0.0));
        assert_eq!(sm.coupling_b[0][[1, 1]], r(0.0));
    }

    #[test]
    fn neumann_limit_matrix() {
        let sm = StructureMatrices::build(&neumann());
        assert!((sm.limit_w[0][[0, 0]] - r(1.0)).norm() < 1e-15);
        assert!((sm.limit_w[0][[1, 1]] - r(-1.0)).norm() < 1e-15);
        assert!(sm.limit_w[0][[0, 1]].norm() < 1e-15);
        assert!(sm.limit_w[0][[1, 0]].norm() < 1e-15);
    }

    #[test]
    fn coupling_blocks_have_reciprocal_form() {
        for n in 2..=6 {
            let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..n)
                .map(|j| {
                    let mut p = vec![r(0.0); j + 1];
                    p[j] = r(1.0);
                    (p, vec![r(1.0)])
                })
                .collect();
            let bcs = BoundaryConditions::new(n, 0.0, 1.0, &rows).unwrap();
            let sm = StructureMatrices::build(&bcs);
            for s in 0..2 {
                let nu = sm.split[s];
                for alpha in 1..=n {
                    for beta in 1..=n {
                        let got = sm.coupling_a[s][[alpha - 1, beta - 1]];
                        if alpha > nu && nu >= beta {
                            let expect =
                                (root_pow(n, beta as i64 - alpha as i64) - 1.0).inv();
                            assert!((got - expect).norm() < 1e-14);
                        } else {
                            assert_eq!(got, r(0.0));
                        }
                        // Q is the conjugate transpose of P.
                        let q = sm.coupling_b[s][[beta - 1, alpha - 1]];
                        assert!((q - got.conj()).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn even_order_sectors_coincide() {
        for bcs in [dirichlet(), neumann()] {
            let sm = StructureMatrices::build(&bcs);
            assert_eq!(sm.split[0], sm.split[1]);
            assert!((&sm.limit_w[0] - &sm.limit_w[1])
                .iter()
                .all(|c| c.norm() == 0.0));
            assert!((&sm.coupling_a[0] - &sm.coupling_a[1])
                .iter()
                .all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn regularity_verdicts() {
        assert!(check_regularity(&StructureMatrices::build(&dirichlet())).regular);

        // y(a) + y(b) = 0 and y(a) - y(b) = 0: limit matrix [[1,1],[1,-1]].
        let bcs = BoundaryConditions::new(
            2,
            0.0,
            1.0,
            &[(vec![r(1.0)], vec![r(1.0)]), (vec![r(1.0)], vec![r(-1.0)])],
        )
        .unwrap();
        assert!(check_regularity(&StructureMatrices::build(&bcs)).regular);

        // Degenerate: both rows have leading pair (1, 1), limit matrix [[1,1],[1,1]].
        let bcs = BoundaryConditions::new(
            2,
            0.0,
            1.0,
            &[
                (vec![r(1.0)], vec![r(1.0)]),
                (vec![r(1.0), r(0.0)], vec![r(1.0), r(0.0)]),
            ],
        )
        .unwrap();
        let sm = StructureMatrices::build(&bcs);
        assert!(!check_regularity(&sm).regular);
        assert!(matches!(
            trace_coefficients(&sm).unwrap_err(),
            Error::NotRegular { .. }
        ));
    }

    #[test]
    fn dirichlet_trace_coefficients() {
        let sm = StructureMatrices::build(&dirichlet());
        let tc = trace_coefficients(&sm).unwrap();
        assert!((tc.at_a - r(-0.25)).norm() < 1e-13);
        assert!((tc.at_b - r(-0.25)).norm() < 1e-13);
    }

    #[test]
    fn neumann_trace_coefficients() {
        let sm = StructureMatrices::build(&neumann());
        let tc = trace_coefficients(&sm).unwrap();
        assert!((tc.at_a - r(0.25)).norm() < 1e-13);
        assert!((tc.at_b - r(0.25)).norm() < 1e-13);
    }

    #[test]
    fn sum_identity_on_worked_cases() {
        let sm = StructureMatrices::build(&dirichlet());
        for sector in 1..=2 {
            assert!(sum_identity_residual(&sm, sector).unwrap() < 1e-13);
            let (ta, tb) = sector_traces(&sm, sector).unwrap();
            assert!((ta + tb - r(-1.0)).norm() < 1e-13);
        }
        let sm = StructureMatrices::build(&neumann());
        for sector in 1..=2 {
            let (ta, tb) = sector_traces(&sm, sector).unwrap();
            assert!((ta + tb - r(1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn special_case_dirichlet_matches_general() {
        let bcs = dirichlet();
        let sm = StructureMatrices::build(&bcs);
        let tc = trace_coefficients(&sm).unwrap();
        let sp = special_trace_coefficients(&bcs, &bcs.classify()).unwrap();
        assert!((tc.at_a - sp.at_a).norm() < 1e-13);
        assert!((tc.at_b - sp.at_b).norm() < 1e-13);
        assert!((sp.at_a - r(-0.25)).norm() < 1e-15);
    }

    #[test]
    fn special_case_odd_order() {
        // n = 3, orders (0, 1, 0), mixed condition of order 1.
        let bcs = BoundaryConditions::new(
            3,
            0.0,
            1.0,
            &[
                (vec![r(1.0)], vec![]),
                (vec![r(0.0), r(2.0)], vec![r(0.0), r(3.0)]),
                (vec![], vec![r(1.0)]),
            ],
        )
        .unwrap();
        let class = bcs.classify();
        assert_eq!(class, BoundaryClass::AlmostSeparatedOdd);
        let sp = special_trace_coefficients(&bcs, &class).unwrap();
        assert!((sp.at_a - r(-1.0 / 3.0)).norm() < 1e-15);
        assert!((sp.at_b - r(-1.0 / 3.0)).norm() < 1e-15);
        let sm = StructureMatrices::build(&bcs);
        let tc = trace_coefficients(&sm).unwrap();
        assert!((tc.at_a - sp.at_a).norm() < 1e-12, "{:?} vs {:?}", tc, sp);
        assert!((tc.at_b - sp.at_b).norm() < 1e-12);
    }

    #[test]
    fn quasi_periodic_coefficients_vanish() {
        let bcs = BoundaryConditions::periodic(0.0, 2.0 * PI).unwrap();
        let class = bcs.classify();
        let sp = special_trace_coefficients(&bcs, &class).unwrap();
        assert_eq!(sp.at_a, r(0.0));
        assert_eq!(sp.at_b, r(0.0));
        let sm = StructureMatrices::build(&bcs);
        let tc = trace_coefficients(&sm).unwrap();
        assert!(tc.at_a.norm() < 1e-13);
        assert!(tc.at_b.norm() < 1e-13);
    }

    #[test]
    fn series_terms_dirichlet() {
        let sm = StructureMatrices::build(&dirichlet());
        let (t0, _) = series_term(&sm, 1, 0).unwrap();
        assert!((t0 - r(1.0)).norm() < 1e-13, "k=0 trace {t0}");
        let (t1, _) = series_term(&sm, 1, 1).unwrap();
        assert!((t1 - r(-1.0)).norm() < 1e-13, "k=1 trace {t1}");
    }

    #[test]
    fn series_terms_match_closed_form() {
        // tr(P_k W^{-1} A) = -nu + n sum_j sigma(k, d_j) a_j v_k W^{-1} e_{j+1},
        // and the symmetric form for the b-side.
        let bcs = BoundaryConditions::new(
            3,
            0.0,
            1.0,
            &[
                (vec![r(1.0), r(0.5)], vec![C64::new(0.0, 1.0)]),
                (vec![r(0.0), r(2.0)], vec![r(0.0), r(0.0), r(3.0)]),
                (vec![r(1.0)], vec![r(1.0), r(0.0), r(0.0)]),
            ],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let sm = StructureMatrices::build(&bcs);
        assert!(check_regularity(&sm).regular, "test system must be regular");
        let n = sm.n;
        for sector in 1..=2 {
            let s = sector - 1;
            let nu = sm.split[s];
            for k in 0..(3 * n) {
                let (ta, tb) = series_term(&sm, sector, k).unwrap();
                let v = lower_row(n, nu, k as i64);
                let u = upper_row(n, nu, k as i64);
                let mut expect_a = r(-(nu as f64));
                let mut expect_b = r(-((n - nu) as f64));
                for j in 0..n {
                    if (k as i64 - sm.orders[j] as i64).rem_euclid(n as i64) == 0 {
                        let mut e = Array1::zeros(n);
                        e[j] = r(1.0);
                        let w_e = sm.solve_w(s, &e).unwrap();
                        let va: C64 = (0..n).map(|c| v[c] * w_e[c]).sum();
                        let ub: C64 = (0..n).map(|c| u[c] * w_e[c]).sum();
                        expect_a += sm.lead_a[j] * va * n as f64;
                        expect_b += sm.lead_b[j] * ub * n as f64;
                    }
                }
                assert!((ta - expect_a).norm() < 1e-11, "sector {sector} k {k}");
                assert!((tb - expect_b).norm() < 1e-11, "sector {sector} k {k}");
            }
        }
    }

    #[test]
    fn quasi_periodic_series_terms_vanish() {
        let bcs = BoundaryConditions::periodic(0.0, 2.0 * PI).unwrap();
        let sm = StructureMatrices::build(&bcs);
        for sector in 1..=2 {
            for k in 0..8 {
                let (ta, tb) = series_term(&sm, sector, k).unwrap();
                assert!(ta.norm() < 1e-13, "sector {sector} k {k}: {ta}");
                assert!(tb.norm() < 1e-13, "sector {sector} k {k}: {tb}");
            }
        }
    }

    #[test]
    fn abel_sums_approach_coupling_weights() {
        for n in [2usize, 3, 4] {
            let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..n)
                .map(|j| {
                    let mut p = vec![r(0.0); j + 1];
                    p[j] = r(1.0);
                    (p, vec![r(1.0)])
                })
                .collect();
            let bcs = BoundaryConditions::new(n, 0.0, 1.0, &rows).unwrap();
            let sm = StructureMatrices::build(&bcs);
            for sector in 1..=2 {
                let (sp, sq) = abel_partial_sums(&sm, sector, 0.999, 100_000).unwrap();
                let s = sector - 1;
                let da = (&sp - &sm.coupling_a[s])
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                let db = (&sq - &sm.coupling_b[s])
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                assert!(da < 1e-2, "n={n} sector {sector}: {da}");
                assert!(db < 1e-2, "n={n} sector {sector}: {db}");
            }
        }
    }

    #[test]
    fn abel_sums_respect_zero_pattern_exactly() {
        let bcs = BoundaryConditions::new(
            4,
            0.0,
            1.0,
            &[
                (vec![r(1.0)], vec![r(0.5)]),
                (vec![r(0.0), r(1.0)], vec![r(0.0), r(1.0)]),
                (vec![r(0.0), r(0.0), r(1.0)], vec![r(0.0), r(0.0), r(2.0)]),
                (vec![r(0.0), r(0.0), r(0.0), r(1.0)], vec![r(1.0)]),
            ],
        )
        .unwrap();
        let sm = StructureMatrices::build(&bcs);
        let (sp, sq) = abel_partial_sums(&sm, 1, 0.9, 500).unwrap();
        let nu = sm.split[0];
        for alpha in 0..4 {
            for beta in 0..4 {
                if !(alpha + 1 > nu && nu >= beta + 1) {
                    assert_eq!(sp[[alpha, beta]], r(0.0));
                }
                if !(beta + 1 > nu && nu >= alpha + 1) {
                    assert_eq!(sq[[alpha, beta]], r(0.0));
                }
            }
        }
    }

    #[test]
    fn expansion_identity_holds() {
        let bcs = BoundaryConditions::new(
            3,
            0.0,
            1.0,
            &[
                (vec![C64::new(1.0, 0.5)], vec![r(2.0)]),
                (vec![r(0.0), r(2.0)], vec![r(1.0), r(1.0)]),
                (
                    vec![r(0.0), r(0.0), r(1.0)],
                    vec![r(0.0), r(0.0), C64::new(0.0, -1.0)],
                ),
            ],
        )
        .unwrap();
        let sm = StructureMatrices::build(&bcs);
        for sector in 1..=2 {
            for k in 0..=(4 * sm.n) {
                let res = expansion_identity_residual(&sm, sector, k);
                let max = res.iter().map(|c| c.norm()).fold(0.0, f64::max);
                assert!(max < 1e-12, "sector {sector} k {k}: {max}");
            }
        }
    }

    #[test]
    fn trace_coefficients_invariant_under_row_scaling() {
        let scale0 = C64::new(0.0, 2.0);
        let base = BoundaryConditions::new(
            2,
            0.0,
            1.0,
            &[
                (vec![r(1.0), r(0.3)], vec![r(2.0)]),
                (vec![r(0.5)], vec![r(1.0), r(-1.0)]),
            ],
        )
        .unwrap();
        let scaled = BoundaryConditions::new(
            2,
            0.0,
            1.0,
            &[
                (vec![r(1.0) * scale0, r(0.3) * scale0], vec![r(2.0) * scale0]),
                (vec![r(1.5)], vec![r(3.0), r(-3.0)]),
            ],
        )
        .unwrap();
        let t1 = trace_coefficients(&StructureMatrices::build(&base)).unwrap();
        let t2 = trace_coefficients(&StructureMatrices::build(&scaled)).unwrap();
        assert!((t1.at_a - t2.at_a).norm() < 1e-12);
        assert!((t1.at_b - t2.at_b).norm() < 1e-12);
    }
}
