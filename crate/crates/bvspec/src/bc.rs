//! Two-point boundary-condition systems: parsing, normalization, classification.
//!
//! A system of order `n` on `[a, b]` consists of `n` conditions
//! `P_j(D)y(a) + Q_j(D)y(b) = 0` where `P_j`, `Q_j` are polynomials of degree
//! below `n`. The condition order `d_j` is the larger of the two degrees, and
//! the leading coefficients `(a_j, b_j)` are the `d_j`-th coefficients of
//! `P_j` and `Q_j`. A system is normalized when the total order `sum d_j` is
//! minimal among all systems obtained by invertible row combinations.

use crate::error::{Error, Result};
use crate::C64;

/// Relative threshold below which a coefficient counts as zero within its row.
pub const COEFF_ZERO_REL: f64 = 1e-12;

/// An order-`n` system of two-point boundary conditions.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    n: usize,
    a: f64,
    b: f64,
    /// `pcoef[j][k]` is the coefficient of `D^k` in `P_j`; `n x n`.
    pcoef: Vec<Vec<C64>>,
    /// `qcoef[j][k]` is the coefficient of `D^k` in `Q_j`; `n x n`.
    qcoef: Vec<Vec<C64>>,
    /// Condition orders `d_j`.
    d: Vec<usize>,
    /// Leading coefficients of `P_j` at degree `d_j` (exact zero when below tolerance).
    lead_a: Vec<C64>,
    /// Leading coefficients of `Q_j` at degree `d_j`.
    lead_b: Vec<C64>,
}

/// Classification of a normalized system by its leading-coefficient pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryClass {
    /// `n = 2m`: after permutation, `m` conditions lead at `a` and `m` at `b`.
    AlmostSeparatedEven,
    /// `n = 2m+1`: as even, plus one condition leading at both endpoints.
    AlmostSeparatedOdd,
    /// Orders are `{0, .., n-1}` and `b_j = coupling * a_j` for every row.
    QuasiPeriodic { coupling: C64 },
    /// No special pattern applies.
    General,
}

fn row_scale(p: &[C64], q: &[C64]) -> f64 {
    p.iter()
        .chain(q.iter())
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Largest `k` with a coefficient above the row-relative tolerance, if any.
fn row_order(p: &[C64], q: &[C64], tol: f64) -> Option<usize> {
    (0..p.len().max(q.len()))
        .rev()
        .find(|&k| p.get(k).is_some_and(|c| c.norm() > tol) || q.get(k).is_some_and(|c| c.norm() > tol))
}

impl BoundaryConditions {
    /// Builds a system from raw polynomial coefficient rows.
    ///
    /// Each row is a pair `(p, q)` of coefficient vectors indexed by derivative
    /// order. Rows shorter than `n` are zero-padded; entries at index `>= n`
    /// must be absent or zero.
    pub fn new(n: usize, a: f64, b: f64, rows: &[(Vec<C64>, Vec<C64>)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::OrderTooSmall(n));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidSegment { a, b });
        }
        if rows.len() != n {
            return Err(Error::invalid(format!(
                "expected {} boundary condition rows, got {}",
                n,
                rows.len()
            )));
        }
        let mut pcoef = Vec::with_capacity(n);
        let mut qcoef = Vec::with_capacity(n);
        for (j, (p, q)) in rows.iter().enumerate() {
            let scale = row_scale(p, q);
            if scale == 0.0 {
                return Err(Error::VoidCondition { row: j });
            }
            if !scale.is_finite() {
                return Err(Error::NonFinite {
                    context: "boundary condition coefficients",
                });
            }
            let tol = COEFF_ZERO_REL * scale;
            let order = row_order(p, q, tol).ok_or(Error::VoidCondition { row: j })?;
            if order >= n {
                return Err(Error::DegreeTooLarge {
                    row: j,
                    degree: order,
                    order: n,
                });
            }
            let mut prow = vec![C64::new(0.0, 0.0); n];
            let mut qrow = vec![C64::new(0.0, 0.0); n];
            for k in 0..n {
                if let Some(c) = p.get(k) {
                    prow[k] = *c;
                }
                if let Some(c) = q.get(k) {
                    qrow[k] = *c;
                }
            }
            pcoef.push(prow);
            qcoef.push(qrow);
        }
        let mut bcs = BoundaryConditions {
            n,
            a,
            b,
            pcoef,
            qcoef,
            d: vec![0; n],
            lead_a: vec![C64::new(0.0, 0.0); n],
            lead_b: vec![C64::new(0.0, 0.0); n],
        };
        bcs.refresh_leads()?;
        Ok(bcs)
    }

    /// Recomputes `d`, `lead_a`, `lead_b` from the coefficient tables,
    /// snapping sub-tolerance coefficients to exact zero.
    fn refresh_leads(&mut self) -> Result<()> {
        for j in 0..self.n {
            let scale = row_scale(&self.pcoef[j], &self.qcoef[j]);
            if scale == 0.0 {
                return Err(Error::VoidCondition { row: j });
            }
            let tol = COEFF_ZERO_REL * scale;
            for k in 0..self.n {
                if self.pcoef[j][k].norm() <= tol {
                    self.pcoef[j][k] = C64::new(0.0, 0.0);
                }
                if self.qcoef[j][k].norm() <= tol {
                    self.qcoef[j][k] = C64::new(0.0, 0.0);
                }
            }
            let order = row_order(&self.pcoef[j], &self.qcoef[j], 0.0)
                .ok_or(Error::VoidCondition { row: j })?;
            self.d[j] = order;
            self.lead_a[j] = self.pcoef[j][order];
            self.lead_b[j] = self.qcoef[j][order];
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn segment(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn span(&self) -> f64 {
        self.b - self.a
    }

    /// Coefficient of `D^k` in `P_j`.
    pub fn p_coeff(&self, j: usize, k: usize) -> C64 {
        self.pcoef[j][k]
    }

    /// Coefficient of `D^k` in `Q_j`.
    pub fn q_coeff(&self, j: usize, k: usize) -> C64 {
        self.qcoef[j][k]
    }

    /// Condition orders `d_j`.
    pub fn orders(&self) -> &[usize] {
        &self.d
    }

    /// Leading coefficients at the left endpoint.
    pub fn leads_a(&self) -> &[C64] {
        &self.lead_a
    }

    /// Leading coefficients at the right endpoint.
    pub fn leads_b(&self) -> &[C64] {
        &self.lead_b
    }

    /// Total order `sum d_j`.
    pub fn total_order(&self) -> usize {
        self.d.iter().sum()
    }

    /// Evaluates `P_j` at a complex argument.
    pub fn p_eval(&self, j: usize, s: C64) -> C64 {
        horner(&self.pcoef[j], s)
    }

    /// Evaluates `Q_j` at a complex argument.
    pub fn q_eval(&self, j: usize, s: C64) -> C64 {
        horner(&self.qcoef[j], s)
    }

    /// Derivative polynomial `P_j'` evaluated at a complex argument.
    pub fn p_eval_deriv(&self, j: usize, s: C64) -> C64 {
        horner_deriv(&self.pcoef[j], s)
    }

    pub fn q_eval_deriv(&self, j: usize, s: C64) -> C64 {
        horner_deriv(&self.qcoef[j], s)
    }

    /// Applies condition `j` to a function given by the vectors of its
    /// derivative values at the endpoints: `sum_k p_jk ya[k] + q_jk yb[k]`.
    pub fn apply_row(&self, j: usize, ya: &[C64], yb: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.n {
            acc += self.pcoef[j][k] * ya[k] + self.qcoef[j][k] * yb[k];
        }
        acc
    }

    /// Returns an equivalent system with minimal total order.
    ///
    /// Works degree level by degree level, from `n-1` downward. At each level
    /// the rows of that order form a set of leading pairs `(a_j, b_j)` in C^2;
    /// Gaussian elimination keeps at most two rows with independent pairs and
    /// cancels the leading pair of every dependent row, which strictly lowers
    /// that row's order. Repeats to a fixed point, then sorts rows by
    /// descending order with the original index as tie-break.
    pub fn normalize(&self) -> Result<Self> {
        #[derive(Clone)]
        struct Row {
            p: Vec<C64>,
            q: Vec<C64>,
            orig: usize,
        }
        let n = self.n;
        let mut rows: Vec<Row> = (0..n)
            .map(|j| Row {
                p: self.pcoef[j].clone(),
                q: self.qcoef[j].clone(),
                orig: j,
            })
            .collect();

        let order_of = |r: &Row| -> Option<usize> {
            let scale = row_scale(&r.p, &r.q);
            if scale == 0.0 {
                return None;
            }
            row_order(&r.p, &r.q, COEFF_ZERO_REL * scale)
        };

        // Each elimination lowers sum d_j by at least one, so the outer loop
        // runs at most n*(n-1) times.
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > n * n + 2 {
                return Err(Error::invalid(
                    "normalization did not reach a fixed point",
                ));
            }
            let mut orders = Vec::with_capacity(n);
            for (idx, r) in rows.iter().enumerate() {
                match order_of(r) {
                    Some(o) => orders.push(o),
                    None => return Err(Error::RankDeficient { row: rows[idx].orig }),
                }
            }
            let mut changed = false;
            for level in (0..n).rev() {
                let bucket: Vec<usize> = (0..n).filter(|&i| orders[i] == level).collect();
                if bucket.len() <= 1 {
                    continue;
                }
                // Leading pairs of the bucket rows.
                let pair = |r: &Row| (r.p[level], r.q[level]);
                // First pivot: largest pair norm against the a-component.
                let mut remaining = bucket.clone();
                for comp in 0..2 {
                    let comp_of = |r: &Row| {
                        let (pa, pb) = pair(r);
                        if comp == 0 {
                            pa
                        } else {
                            pb
                        }
                    };
                    let piv = remaining
                        .iter()
                        .copied()
                        .max_by(|&i, &j| {
                            comp_of(&rows[i])
                                .norm()
                                .partial_cmp(&comp_of(&rows[j]).norm())
                                .unwrap()
                        })
                        .filter(|&i| {
                            let scale = row_scale(&rows[i].p, &rows[i].q);
                            comp_of(&rows[i]).norm() > COEFF_ZERO_REL * scale
                        });
                    let Some(piv) = piv else { continue };
                    let piv_val = comp_of(&rows[piv]);
                    let piv_row = rows[piv].clone();
                    remaining.retain(|&i| i != piv);
                    for &i in &remaining {
                        let factor = comp_of(&rows[i]) / piv_val;
                        if factor.norm() == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            rows[i].p[k] -= factor * piv_row.p[k];
                            rows[i].q[k] -= factor * piv_row.q[k];
                        }
                    }
                }
                // Rows left in `remaining` had both components eliminated:
                // their order dropped below `level`.
                for &i in &remaining {
                    let (pa, pb) = pair(&rows[i]);
                    let scale = row_scale(&rows[i].p, &rows[i].q);
                    if scale == 0.0 {
                        return Err(Error::RankDeficient { row: rows[i].orig });
                    }
                    let tol = COEFF_ZERO_REL * scale;
                    if pa.norm() <= tol && pb.norm() <= tol {
                        changed = true;
                    }
                }
                if changed {
                    break;
                }
            }
            if !changed {
                break;
            }
        }

        let mut keyed: Vec<(usize, usize, Row)> = rows
            .into_iter()
            .map(|r| {
                let o = order_of(&r).expect("checked above");
                (o, r.orig, r)
            })
            .collect();
        keyed.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        let rows: Vec<(Vec<C64>, Vec<C64>)> =
            keyed.into_iter().map(|(_, _, r)| (r.p, r.q)).collect();
        BoundaryConditions::new(n, self.a, self.b, &rows)
    }

    /// Classifies a normalized system by its leading-coefficient pattern.
    ///
    /// Counting rows by which leading coefficient vanishes is equivalent to
    /// searching permutations: a row leading only at `a` can occupy only an
    /// `a`-slot of the pattern and vice versa.
    pub fn classify(&self) -> BoundaryClass {
        let n = self.n;
        // Quasi-periodic: orders are exactly {0..n-1} and all leading ratios agree.
        let mut sorted = self.d.clone();
        sorted.sort_unstable();
        let orders_complete = sorted.iter().copied().eq(0..n);
        if orders_complete && self.lead_a.iter().all(|c| c.norm() > 0.0) {
            let theta = self.lead_b[0] / self.lead_a[0];
            let all_match = theta.norm() > 0.0
                && (1..n).all(|j| {
                    let t = self.lead_b[j] / self.lead_a[j];
                    (t - theta).norm() <= 1e-9 * theta.norm().max(1.0)
                });
            if all_match {
                return BoundaryClass::QuasiPeriodic { coupling: theta };
            }
        }

        let at_a = (0..n)
            .filter(|&j| self.lead_b[j].norm() == 0.0 && self.lead_a[j].norm() > 0.0)
            .count();
        let at_b = (0..n)
            .filter(|&j| self.lead_a[j].norm() == 0.0 && self.lead_b[j].norm() > 0.0)
            .count();
        let mixed = n - at_a - at_b;
        if n % 2 == 0 {
            let m = n / 2;
            if at_a == m && at_b == m && mixed == 0 {
                return BoundaryClass::AlmostSeparatedEven;
            }
        } else {
            let m = n / 2;
            if at_a == m && at_b == m && mixed == 1 {
                return BoundaryClass::AlmostSeparatedOdd;
            }
        }
        BoundaryClass::General
    }
}

fn horner(coeffs: &[C64], s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

fn horner_deriv(coeffs: &[C64], s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate().rev() {
        if k == 0 {
            break;
        }
        acc = acc * s + c * (k as f64);
    }
    acc
}

/// Convenience constructors for common systems, used widely in tests and
/// as config shorthands.
impl BoundaryConditions {
    /// `y(a) = 0`, `y(b) = 0` (order 2).
    pub fn dirichlet(a: f64, b: f64) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        BoundaryConditions::new(
            2,
            a,
            b,
            &[(vec![one], vec![]), (vec![], vec![one])],
        )
    }

    /// `y'(a) = 0`, `y'(b) = 0` (order 2).
    pub fn neumann(a: f64, b: f64) -> Result<Self> {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        BoundaryConditions::new(
            2,
            a,
            b,
            &[(vec![zero, one], vec![]), (vec![], vec![zero, one])],
        )
    }

    /// `y(a) = y(b)`, `y'(a) = y'(b)` (order 2, coupling -1).
    pub fn periodic(a: f64, b: f64) -> Result<Self> {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let neg = C64::new(-1.0, 0.0);
        BoundaryConditions::new(
            2,
            a,
            b,
            &[(vec![one], vec![neg]), (vec![zero, one], vec![zero, neg])],
        )
    }
}
