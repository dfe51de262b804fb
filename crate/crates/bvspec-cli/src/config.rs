//! Experiment configuration: a single JSON document describing the boundary
//! conditions, the operator coefficients, the perturbation, and the numeric
//! options. Complex numbers appear as `[re, im]` pairs.

use serde::{Deserialize, Serialize};

use bvspec::bc::BoundaryConditions;
use bvspec::profile::{FunctionProfile, ProfileSpec};
use bvspec::spectrum::OperatorSpec;
use bvspec::C64;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub order: usize,
    pub segment: [f64; 2],
    pub boundary_conditions: Vec<BcRow>,
    /// `lower_coefficients[k]` multiplies the k-th derivative, `k <= order-2`.
    #[serde(default)]
    pub lower_coefficients: Vec<Option<ProfileSpec>>,
    #[serde(default)]
    pub potential: Option<ProfileSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    /// Appends the appendix tables (oscillatory decay, envelope bounds,
    /// decay scan) to the equiconvergence command.
    #[serde(default)]
    pub appendix: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcRow {
    #[serde(default)]
    pub p: Vec<[f64; 2]>,
    #[serde(default)]
    pub q: Vec<[f64; 2]>,
}

/// Numeric options with documented defaults; all overridable per config and
/// partly per command line. Serialized into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Eigenvalue count for spectra and trace experiments.
    pub n_max: usize,
    /// Collocation grid size.
    pub grid: usize,
    /// Number of contour radii in trace and equiconvergence plans.
    pub radii_count: usize,
    /// Relative drift between collocation resolutions below which an
    /// eigenvalue counts as resolved.
    pub drift_tol: f64,
    /// Pass threshold on the sector trace identity residual.
    pub identity_tol: f64,
    /// Pass threshold on special-case versus general coefficients.
    pub special_tol: f64,
    /// Abel summation parameters and pass threshold.
    pub abel_r: f64,
    pub abel_k: usize,
    pub abel_tol: f64,
    /// Rank-one expansion terms listed per sector in the identities report.
    pub series_terms: usize,
    /// Evaluation grid per axis for equiconvergence sup.
    pub xy_points: usize,
    /// Base contour node count (one doubling verifies convergence).
    pub contour_nodes: usize,
    /// Exclusion radius around `z = 0` for the determinant root search;
    /// `null` picks `0.3 pi / span`.
    pub z_min: Option<f64>,
    /// Relative Newton tolerance for root polishing.
    pub newton_tol: f64,
    /// Radii for the envelope-integral boundedness table.
    pub prop_radii: Vec<f64>,
    /// Radii for the oscillatory decay table.
    pub osc_radii: Vec<f64>,
    /// Radii for the decay scan table.
    pub decay_radii: Vec<f64>,
    /// Compact-set margin for the decay scan.
    pub margin: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_max: 60,
            grid: 128,
            radii_count: 12,
            drift_tol: 1e-6,
            identity_tol: 1e-10,
            special_tol: 1e-10,
            abel_r: 0.999,
            abel_k: 100_000,
            abel_tol: 1e-2,
            series_terms: 8,
            xy_points: 21,
            contour_nodes: 64,
            z_min: None,
            newton_tol: 1e-13,
            prop_radii: vec![1.0, 10.0, 100.0, 1000.0],
            osc_radii: vec![10.0, 100.0, 1000.0],
            decay_radii: vec![1.5, 3.5, 5.5, 7.5, 9.5],
            margin: 0.2,
        }
    }
}

fn pair(c: [f64; 2]) -> C64 {
    C64::new(c[0], c[1])
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<(Self, Vec<u8>), CliError> {
        let raw = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Input(format!("malformed config: {e}")))?;
        Ok((cfg, raw))
    }

    /// Parsed and normalized boundary conditions.
    pub fn boundary_conditions(&self) -> Result<BoundaryConditions, CliError> {
        let rows: Vec<(Vec<C64>, Vec<C64>)> = self
            .boundary_conditions
            .iter()
            .map(|row| {
                (
                    row.p.iter().copied().map(pair).collect(),
                    row.q.iter().copied().map(pair).collect(),
                )
            })
            .collect();
        let bcs = BoundaryConditions::new(self.order, self.segment[0], self.segment[1], &rows)?;
        Ok(bcs.normalize()?)
    }

    pub fn operator(&self, bcs: &BoundaryConditions) -> Result<OperatorSpec, CliError> {
        let (a, b) = bcs.segment();
        if self.lower_coefficients.len() > self.order.saturating_sub(1) {
            return Err(CliError::Input(format!(
                "lower_coefficients supports derivative orders up to {}, got {} entries",
                self.order.saturating_sub(2),
                self.lower_coefficients.len()
            )));
        }
        let mut lower: Vec<Vec<FunctionProfile>> = Vec::new();
        for spec in &self.lower_coefficients {
            match spec {
                Some(s) => lower.push(vec![FunctionProfile::from_spec(s, a, b)?]),
                None => lower.push(Vec::new()),
            }
        }
        Ok(OperatorSpec::new(bcs.clone(), lower)?)
    }

    pub fn potential(&self, bcs: &BoundaryConditions) -> Result<Option<FunctionProfile>, CliError> {
        let (a, b) = bcs.segment();
        Ok(match &self.potential {
            Some(spec) => Some(FunctionProfile::from_spec(spec, a, b)?),
            None => None,
        })
    }
}
