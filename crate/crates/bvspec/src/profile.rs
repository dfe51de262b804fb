//! Potentials and lower-order coefficients as function profiles on a segment.
//!
//! A profile is either a closed-form preset (constant, trig, polynomial, step)
//! or a table of samples. Profiles report their mean and the one-sided limits
//! of the endpoint averaged integrals
//! `psi_a(x) = (x-a)^{-1} int_a^x q` and `psi_b(x) = (b-x)^{-1} int_x^b q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigForm {
    Cos,
    Sin,
}

#[derive(Debug, Clone)]
enum Repr {
    Constant(C64),
    /// `amp * form(freq * x + phase)`
    Trig {
        form: TrigForm,
        freq: f64,
        amp: C64,
        phase: f64,
    },
    /// Coefficients in ascending powers of `x`.
    Polynomial(Vec<C64>),
    /// Piecewise constant: `values[i]` on `(breaks[i-1], breaks[i]]`,
    /// with `breaks` strictly increasing interior points.
    Step {
        breaks: Vec<f64>,
        values: Vec<C64>,
    },
    /// Sample table on a strictly increasing grid covering `[a, b]`;
    /// evaluation is piecewise linear.
    Samples {
        xs: Vec<f64>,
        vals: Vec<C64>,
    },
}

/// A function on `[a, b]` with quadrature and endpoint averaged limits.
#[derive(Debug, Clone)]
pub struct FunctionProfile {
    a: f64,
    b: f64,
    repr: Repr,
}

/// Serializable description of a profile, as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ProfileSpec {
    Constant {
        value: [f64; 2],
    },
    Trig {
        form: TrigForm,
        frequency: f64,
        #[serde(default = "default_amp")]
        amplitude: [f64; 2],
        #[serde(default)]
        phase: f64,
    },
    Polynomial {
        coefficients: Vec<[f64; 2]>,
    },
    Step {
        breakpoints: Vec<f64>,
        values: Vec<[f64; 2]>,
    },
    Samples {
        xs: Vec<f64>,
        values: Vec<[f64; 2]>,
    },
}

fn default_amp() -> [f64; 2] {
    [1.0, 0.0]
}

fn pair(c: [f64; 2]) -> C64 {
    C64::new(c[0], c[1])
}

impl FunctionProfile {
    pub fn constant(a: f64, b: f64, value: C64) -> Result<Self> {
        Self::build(a, b, Repr::Constant(value))
    }

    pub fn trig(a: f64, b: f64, form: TrigForm, freq: f64, amp: C64, phase: f64) -> Result<Self> {
        if !freq.is_finite() || !phase.is_finite() {
            return Err(Error::NonFinite {
                context: "trig profile parameters",
            });
        }
        Self::build(a, b, Repr::Trig { form, freq, amp, phase })
    }

    pub fn polynomial(a: f64, b: f64, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptySamples("polynomial coefficients"));
        }
        Self::build(a, b, Repr::Polynomial(coeffs))
    }

    pub fn step(a: f64, b: f64, breaks: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::invalid(
                "step profile needs one more value than breakpoints",
            ));
        }
        let mut prev = a;
        for &t in &breaks {
            if !(t > prev && t < b) {
                return Err(Error::invalid(
                    "step breakpoints must be strictly increasing interior points",
                ));
            }
            prev = t;
        }
        Self::build(a, b, Repr::Step { breaks, values })
    }

    pub fn samples(a: f64, b: f64, xs: Vec<f64>, vals: Vec<C64>) -> Result<Self> {
        if xs.len() != vals.len() {
            return Err(Error::invalid("sample grid and values differ in length"));
        }
        if xs.len() < 4 {
            return Err(Error::EmptySamples("sample table needs at least 4 points"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sample grid must be strictly increasing"));
        }
        if (xs[0] - a).abs() > 1e-9 * (b - a) || (xs[xs.len() - 1] - b).abs() > 1e-9 * (b - a) {
            return Err(Error::invalid("sample grid must cover the full segment"));
        }
        if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { context: "sample values" });
        }
        Self::build(a, b, Repr::Samples { xs, vals })
    }

    pub fn from_spec(spec: &ProfileSpec, a: f64, b: f64) -> Result<Self> {
        match spec {
            ProfileSpec::Constant { value } => Self::constant(a, b, pair(*value)),
            ProfileSpec::Trig {
                form,
                frequency,
                amplitude,
                phase,
            } => Self::trig(a, b, *form, *frequency, pair(*amplitude), *phase),
            ProfileSpec::Polynomial { coefficients } => {
                Self::polynomial(a, b, coefficients.iter().copied().map(pair).collect())
            }
            ProfileSpec::Step {
                breakpoints,
                values,
            } => Self::step(
                a,
                b,
                breakpoints.clone(),
                values.iter().copied().map(pair).collect(),
            ),
            ProfileSpec::Samples { xs, values } => Self::samples(
                a,
                b,
                xs.clone(),
                values.iter().copied().map(pair).collect(),
            ),
        }
    }

    fn build(a: f64, b: f64, repr: Repr) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidSegment { a, b });
        }
        Ok(FunctionProfile { a, b, repr })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Interior discontinuity locations (step breakpoints); empty for
    /// continuous representations.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Step { breaks, .. } => breaks.clone(),
            _ => Vec::new(),
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        match &self.repr {
            Repr::Constant(c) => *c,
            Repr::Trig { form, freq, amp, phase } => {
                let arg = freq * x + phase;
                let v = match form {
                    TrigForm::Cos => arg.cos(),
                    TrigForm::Sin => arg.sin(),
                };
                amp * v
            }
            Repr::Polynomial(coeffs) => {
                let mut acc = C64::new(0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc
            }
            Repr::Step { breaks, values } => {
                let idx = breaks.partition_point(|&t| t < x);
                values[idx]
            }
            Repr::Samples { xs, vals } => {
                if x <= xs[0] {
                    return vals[0];
                }
                if x >= xs[xs.len() - 1] {
                    return vals[vals.len() - 1];
                }
                let i = xs.partition_point(|&t| t <= x) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                vals[i] * (1.0 - t) + vals[i + 1] * t
            }
        }
    }

    /// Antiderivative value `int_a^x` for closed-form presets.
    fn integral_to(&self, x: f64) -> C64 {
        match &self.repr {
            Repr::Constant(c) => c * (x - self.a),
            Repr::Trig { form, freq, amp, phase } => {
                if freq.abs() == 0.0 {
                    let v = match form {
                        TrigForm::Cos => phase.cos(),
                        TrigForm::Sin => phase.sin(),
                    };
                    return amp * v * (x - self.a);
                }
                let prim = |t: f64| match form {
                    TrigForm::Cos => (freq * t + phase).sin() / freq,
                    TrigForm::Sin => -(freq * t + phase).cos() / freq,
                };
                amp * (prim(x) - prim(self.a))
            }
            Repr::Polynomial(coeffs) => {
                let prim = |t: f64| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, &c) in coeffs.iter().enumerate().rev() {
                        acc = acc * t + c / (k as f64 + 1.0);
                    }
                    acc * t
                };
                prim(x) - prim(self.a)
            }
            Repr::Step { breaks, values } => {
                let mut acc = C64::new(0.0, 0.0);
                let mut left = self.a;
                for (i, &t) in breaks.iter().enumerate() {
                    if x <= t {
                        acc += values[i] * (x - left);
                        return acc;
                    }
                    acc += values[i] * (t - left);
                    left = t;
                }
                acc += values[values.len() - 1] * (x - left);
                acc
            }
            Repr::Samples { xs, vals } => {
                // Trapezoid over full sample intervals plus a partial cell.
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..xs.len() - 1 {
                    if xs[i + 1] <= x {
                        acc += (vals[i] + vals[i + 1]) * 0.5 * (xs[i + 1] - xs[i]);
                    } else {
                        if xs[i] < x {
                            let fx = self.eval(x);
                            acc += (vals[i] + fx) * 0.5 * (x - xs[i]);
                        }
                        break;
                    }
                }
                acc
            }
        }
    }

    /// Mean value `(b-a)^{-1} int_a^b f`.
    ///
    /// Presets integrate in closed form. Uniform sample tables use composite
    /// Simpson (with a 3/8 cell when the interval count is odd); non-uniform
    /// tables fall back to the trapezoid rule.
    pub fn mean(&self) -> Result<C64> {
        let span = self.b - self.a;
        match &self.repr {
            Repr::Samples { xs, vals } => {
                let h = xs[1] - xs[0];
                let uniform = xs
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
                let total = if uniform {
                    simpson_uniform(h, vals)?
                } else {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..xs.len() - 1 {
                        acc += (vals[i] + vals[i + 1]) * 0.5 * (xs[i + 1] - xs[i]);
                    }
                    acc
                };
                Ok(total / span)
            }
            _ => Ok(self.integral_to(self.b) / span),
        }
    }

    /// One-sided limits `(psi_a(a+), psi_b(b-))` of the endpoint averages.
    ///
    /// Presets use closed forms; sample tables extrapolate the averages on a
    /// geometric window sequence and fail when the estimates do not settle.
    pub fn endpoint_means(&self) -> Result<(C64, C64)> {
        match &self.repr {
            Repr::Constant(c) => Ok((*c, *c)),
            Repr::Trig { .. } | Repr::Polynomial(_) => {
                Ok((self.eval(self.a), self.eval(self.b)))
            }
            Repr::Step { values, .. } => Ok((values[0], values[values.len() - 1])),
            Repr::Samples { .. } => {
                let h0 = (self.b - self.a) / 16.0;
                let psi_a = |h: f64| self.integral_to(self.a + h) / h;
                let psi_b = |h: f64| (self.integral_to(self.b) - self.integral_to(self.b - h)) / h;
                let left = richardson_limit(h0, psi_a)?;
                let right = richardson_limit(h0, psi_b)?;
                Ok((left, right))
            }
        }
    }
}

/// First-order Richardson extrapolation of `f(h)` toward `h -> 0` on the
/// geometric window sequence `h0 / 2^j`, accepted once two successive
/// extrapolants agree within the consistency guard.
fn richardson_limit(h0: f64, f: impl Fn(f64) -> C64) -> Result<C64> {
    let vals: Vec<C64> = (0..=6).map(|j| f(h0 / f64::powi(2.0, j))).collect();
    let mut prev: Option<C64> = None;
    let mut best_diff = f64::INFINITY;
    for w in vals.windows(2) {
        let l = w[1] * 2.0 - w[0];
        if let Some(p) = prev {
            let diff = (l - p).norm();
            best_diff = best_diff.min(diff);
            if diff <= 1e-3 * l.norm().max(1.0) {
                return Ok(l);
            }
        }
        prev = Some(l);
    }
    Err(Error::LimitNotResolved { diff: best_diff })
}

fn simpson_uniform(h: f64, vals: &[C64]) -> Result<C64> {
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite { context: "quadrature samples" });
    }
    let n = vals.len() - 1; // interval count
    let mut acc = C64::new(0.0, 0.0);
    let even_intervals = if n % 2 == 0 { n } else { n - 3 };
    let mut i = 0;
    while i + 2 <= even_intervals {
        acc += (vals[i] + vals[i + 1] * 4.0 + vals[i + 2]) * (h / 3.0);
        i += 2;
    }
    if n % 2 != 0 {
        // Simpson 3/8 on the last three intervals.
        let j = n - 3;
        acc += (vals[j] + vals[j + 1] * 3.0 + vals[j + 2] * 3.0 + vals[j + 3]) * (3.0 * h / 8.0);
    }
    Ok(acc)
}
