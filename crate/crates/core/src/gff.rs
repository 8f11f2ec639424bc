//! Discrete Gaussian free field pinned to the boundary through `(x0, c)`.
//!
//! The density is proportional to
//! `exp(-Σ_e β_e (h_x - h_y)² / 2 - c h_{x0}² / 2)`, so the precision matrix
//! is the weighted Laplacian plus `c` at `x0`. Self-loops contribute nothing.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};
use crate::graph::{Clusters, Network};
use crate::sampling::{cluster_signs, LabRng, SeedSpec};

/// Default pinning conductance; matches a boundary factor exp(-h_{x0}²).
pub const DEFAULT_PINNING_CONDUCTANCE: f64 = 2.0;

pub fn precision_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for (&(u, v), &b) in net.edges().iter().zip(net.beta()) {
        if u != v {
            l[(u, u)] += b;
            l[(v, v)] += b;
            l[(u, v)] -= b;
            l[(v, u)] -= b;
        }
    }
    if let Some(p) = net.pinning() {
        l[(p.vertex, p.vertex)] += p.conductance;
    }
    l
}

fn pinned(net: &Network) -> Result<()> {
    match net.pinning() {
        Some(p) if p.conductance > 0.0 => Ok(()),
        _ => Err(LabError::Unpinned),
    }
}

/// Covariance of the pinned field, G = L⁻¹.
pub fn green_matrix(net: &Network) -> Result<DMatrix<f64>> {
    Ok(GffSampler::new(net)?.green())
}

/// One field sample with its magnitude/sign split (sign of 0 is +1).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub h: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub sign: Vec<i8>,
}

impl FieldSample {
    pub fn from_field(h: Vec<f64>) -> Self {
        let magnitude = h.iter().map(|x| x.abs()).collect();
        let sign = h.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect();
        FieldSample { h, magnitude, sign }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("vertex,h,u,sign\n");
        for x in 0..self.h.len() {
            s.push_str(&format!("{x},{},{},{}\n", self.h[x], self.magnitude[x], self.sign[x]));
        }
        s
    }
}

/// Factorizes the precision matrix once; draws are `L^{-T} z` with
/// `L Lᵀ` the Cholesky factorization and `z` standard normal.
#[derive(Debug, Clone)]
pub struct GffSampler {
    precision: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl GffSampler {
    pub fn new(net: &Network) -> Result<Self> {
        pinned(net)?;
        let precision = precision_matrix(net);
        let chol = precision
            .clone()
            .cholesky()
            .ok_or_else(|| LabError::Numerical("precision matrix is not positive definite".into()))?;
        Ok(GffSampler {
            precision,
            upper: chol.l().transpose(),
        })
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn green(&self) -> DMatrix<f64> {
        let n = self.precision.nrows();
        let lower = self.upper.transpose();
        let g = lower
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .and_then(|y| self.upper.solve_upper_triangular(&y))
            .expect("triangular factor is nonsingular");
        // Symmetrize the rounding.
        (&g + g.transpose()) * 0.5
    }

    pub fn sample(&self, rng: &mut LabRng) -> FieldSample {
        let n = self.precision.nrows();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let h = self
            .upper
            .solve_upper_triangular(&z)
            .expect("triangular factor is nonsingular");
        FieldSample::from_field(h.iter().copied().collect())
    }
}

pub fn sample_field(net: &Network, seed: SeedSpec) -> Result<FieldSample> {
    Ok(GffSampler::new(net)?.sample(&mut seed.rng()))
}

/// Weights β_e u_x u_y for the conditional sign law given |h| = u; the
/// pinning is dropped since it does not involve the signs.
pub fn conditional_sign_weights(net: &Network, u: &[f64]) -> Result<Network> {
    check_magnitudes(net, u)?;
    let beta = net
        .edges()
        .iter()
        .zip(net.beta())
        .map(|(&(x, y), &b)| b * u[x] * u[y])
        .collect();
    net.reweighted(beta)?.with_pinning(None)
}

pub(crate) fn check_magnitudes(net: &Network, u: &[f64]) -> Result<()> {
    if u.len() != net.vertex_count() {
        return Err(LabError::contract(format!(
            "{} magnitudes for {} vertices",
            u.len(),
            net.vertex_count()
        )));
    }
    if let Some(x) = u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(LabError::contract(format!("magnitude at vertex {x} is {}", u[x])));
    }
    Ok(())
}

/// h_x = σ_{cluster(x)} u_x with one fair sign per cluster.
pub fn reconstruct_field_with(u: &[f64], clusters: &Clusters, rng: &mut LabRng) -> Result<FieldSample> {
    if clusters.labels.len() != u.len() {
        return Err(LabError::contract("partition size differs from magnitude count"));
    }
    if clusters
        .labels
        .iter()
        .enumerate()
        .any(|(x, &l)| l > x || clusters.labels[l] != l)
    {
        return Err(LabError::contract("malformed partition labels"));
    }
    let signs = cluster_signs(clusters, rng);
    Ok(FieldSample::from_field(
        u.iter().zip(&signs.0).map(|(&m, &s)| m * s as f64).collect(),
    ))
}

pub fn reconstruct_field(u: &[f64], clusters: &Clusters, seed: SeedSpec) -> Result<FieldSample> {
    reconstruct_field_with(u, clusters, &mut seed.rng())
}

/// Dense matrix CSV preceded by a JSON header.
pub fn matrix_csv(m: &DMatrix<f64>, net: &Network) -> String {
    let header = serde_json::json!({
        "dimension": m.nrows(),
        "pinning": net.pinning(),
    });
    let mut s = format!("{header}\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
