//! Chebyshev-Gauss-Lobatto grids: differentiation matrices, Clenshaw-Curtis
//! quadrature, and barycentric interpolation.

use ndarray::Array2;

use crate::error::{Error, Result};

/// A Chebyshev-Gauss-Lobatto grid on `[a, b]` with quadrature and barycentric
/// weights. Nodes are stored in ascending order with `nodes[0] = a`.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    /// Clenshaw-Curtis quadrature weights (sum to `b - a`).
    pub weights: Vec<f64>,
    /// Barycentric interpolation weights (defined up to a common factor).
    pub bary: Vec<f64>,
}

impl ChebGrid {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::GridTooSmall { got: m, min: 2 });
        }
        if !(a < b) {
            return Err(Error::InvalidSegment { a, b });
        }
        let nn = m - 1;
        let mut nodes = Vec::with_capacity(m);
        for i in 0..m {
            let t = (i as f64 * std::f64::consts::PI / nn as f64).cos();
            nodes.push(a + (b - a) * (1.0 - t) / 2.0);
        }
        nodes[0] = a;
        nodes[nn] = b;

        let weights = clenshaw_curtis(nn)
            .into_iter()
            .map(|w| w * (b - a) / 2.0)
            .collect();

        let mut bary = Vec::with_capacity(m);
        for i in 0..m {
            let delta = if i == 0 || i == nn { 0.5 } else { 1.0 };
            bary.push(if i % 2 == 0 { delta } else { -delta });
        }
        Ok(ChebGrid {
            a,
            b,
            nodes,
            weights,
            bary,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Interpolation weights: `f(x) = sum_i c_i f(nodes[i])` for the degree
    /// `m-1` interpolant. Exact node hits give a unit vector.
    pub fn interp_row(&self, x: f64) -> Vec<f64> {
        interp_row(&self.nodes, &self.bary, x)
    }

    /// First `max_order` differentiation matrices, computed by the barycentric
    /// recursion of Welfert; `out[k-1]` maps node values to values of the k-th
    /// derivative.
    pub fn diff_matrices(&self, max_order: usize) -> Vec<Array2<f64>> {
        let m = self.len();
        let x = &self.nodes;
        let w = &self.bary;
        let mut out: Vec<Array2<f64>> = Vec::with_capacity(max_order);
        let mut prev = Array2::<f64>::eye(m);
        for k in 1..=max_order {
            let mut d = Array2::<f64>::zeros((m, m));
            for i in 0..m {
                let mut diag = 0.0;
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let v = (k as f64) / (x[i] - x[j])
                        * ((w[j] / w[i]) * prev[[i, i]] - prev[[i, j]]);
                    d[[i, j]] = v;
                    diag -= v;
                }
                d[[i, i]] = diag;
            }
            out.push(d.clone());
            prev = d;
        }
        out
    }
}

/// Barycentric interpolation weights for one evaluation point on an arbitrary
/// node set.
pub fn interp_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let m = nodes.len();
    let mut row = vec![0.0; m];
    for i in 0..m {
        if x == nodes[i] {
            row[i] = 1.0;
            return row;
        }
    }
    let mut denom = 0.0;
    for i in 0..m {
        let t = bary[i] / (x - nodes[i]);
        row[i] = t;
        denom += t;
    }
    for r in row.iter_mut() {
        *r /= denom;
    }
    row
}

/// Barycentric weights for an arbitrary strictly increasing node set, scaled
/// to avoid overflow.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let span = nodes[m - 1] - nodes[0];
    let scale = 4.0 / span;
    let mut w = vec![0.0_f64; m];
    let mut maxw = 0.0_f64;
    for i in 0..m {
        let mut acc = 1.0_f64;
        for j in 0..m {
            if i != j {
                acc *= (nodes[i] - nodes[j]) * scale;
            }
        }
        w[i] = 1.0 / acc;
        maxw = maxw.max(w[i].abs());
    }
    for wi in w.iter_mut() {
        *wi /= maxw;
    }
    w
}

/// Clenshaw-Curtis weights for nodes `cos(j pi / nn)`, `j = 0..=nn`, on `[-1, 1]`.
fn clenshaw_curtis(nn: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut w = vec![0.0; nn + 1];
    if nn == 1 {
        w[0] = 1.0;
        w[1] = 1.0;
        return w;
    }
    let end = if nn % 2 == 0 {
        1.0 / (nn as f64 * nn as f64 - 1.0)
    } else {
        1.0 / (nn as f64 * nn as f64)
    };
    w[0] = end;
    w[nn] = end;
    for j in 1..nn {
        let theta = j as f64 * PI / nn as f64;
        let mut v = 1.0;
        if nn % 2 == 0 {
            for k in 1..nn / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nn as f64 * theta).cos() / (nn as f64 * nn as f64 - 1.0);
        } else {
            for k in 1..=(nn - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        w[j] = 2.0 * v / nn as f64;
    }
    w
}
