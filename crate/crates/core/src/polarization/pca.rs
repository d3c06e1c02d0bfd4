use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PolarizationError, Result};
use crate::corpus::Side;

pub const PCA_TOLERANCE: f64 = 1e-10;
pub const PCA_MAX_ITERATIONS: usize = 10_000;
const START_SEED: u64 = 0x9ca;
/// Components at or below this magnitude are skipped by the sign convention.
const SIGN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// n × target_dim.
    pub coordinates: Array2<f64>,
    /// target_dim × dim, one unit eigenvector per row.
    pub components: Array2<f64>,
    /// Covariance eigenvalues, descending.
    pub explained_variance: Vec<f64>,
}

fn orient(v: &mut Array1<f64>) {
    if let Some(&first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

fn orthogonalize(v: &mut Array1<f64>, basis: &[Array1<f64>]) {
    for b in basis {
        let d = v.dot(b);
        v.scaled_add(-d, b);
    }
}

/// Projects mean-centered `vectors` (one per row) onto the top
/// `target_dim` covariance eigenvectors, found by power iteration with
/// deflation.
pub fn pca_project(vectors: &Array2<f64>, target_dim: usize) -> Result<Projection> {
    let (n, dim) = vectors.dim();
    if n < 2 {
        return Err(PolarizationError::Pca(format!(
            "need at least 2 vectors, got {n}"
        )));
    }
    if target_dim == 0 || target_dim > dim {
        return Err(PolarizationError::Pca(format!(
            "target_dim {target_dim} must lie in 1..={dim}"
        )));
    }
    let mean = vectors.mean_axis(Axis(0)).expect("n >= 2");
    let centered = vectors - &mean;
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    let scale = cov.diag().iter().fold(0.0f64, |m, &x| m.max(x.abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(target_dim);
    let mut values = Vec::with_capacity(target_dim);
    for _ in 0..target_dim {
        let mut v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        orthogonalize(&mut v, &basis);
        v /= v.dot(&v).sqrt();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w = cov.dot(&v);
            orthogonalize(&mut w, &basis);
            let norm = w.dot(&w).sqrt();
            if norm <= scale * 1e-14 || norm == 0.0 {
                // remaining spectrum is numerically zero; any orthogonal
                // direction is an eigenvector
                converged = true;
                residual = norm;
                break;
            }
            w /= norm;
            residual = (&w - &v).mapv(|x| x * x).sum().sqrt();
            v = w;
            if residual < PCA_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(PolarizationError::PcaNotConverged {
                component: basis.len(),
                residual,
            });
        }
        orient(&mut v);
        let lambda = v.dot(&cov.dot(&v));
        // deflate
        let outer = v
            .view()
            .insert_axis(Axis(1))
            .dot(&v.view().insert_axis(Axis(0)));
        cov.scaled_add(-lambda, &outer);
        basis.push(v);
        values.push(lambda);
    }
    let mut components = Array2::zeros((target_dim, dim));
    for (i, b) in basis.iter().enumerate() {
        components.row_mut(i).assign(b);
    }
    Ok(Projection {
        coordinates: centered.dot(&components.t()),
        components,
        explained_variance: values,
    })
}

/// One row of the projection CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub doc_id: String,
    /// `None` for a document's pooled vector.
    pub topic_id: Option<usize>,
    pub side: Side,
    pub x: f64,
    pub y: f64,
}

/// CSV with header `doc_id,topic_id,side,x,y`.
pub fn pca_csv(points: &[PcaPoint]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
