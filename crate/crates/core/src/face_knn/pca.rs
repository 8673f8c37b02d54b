use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::KnnError;
use crate::ingest::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// One row of `dims_out` coordinates per input row.
    pub coords: Vec<Vec<f64>>,
    /// Orthonormal principal axes, one per output dimension.
    pub components: Vec<Vec<f64>>,
    /// Share of total variance along each axis, non-increasing.
    pub explained_variance_ratio: Vec<f64>,
}

/// Project mean-centred rows onto their top principal components.
///
/// Each axis is sign-normalised so its largest-magnitude entry is positive.
pub fn pca_project(matrix: &EmbeddingMatrix, dims_out: usize) -> Result<PcaResult, KnnError> {
    let (n, d) = (matrix.rows(), matrix.dims());
    if n < 2 {
        return Err(KnnError::Degenerate(format!("need at least 2 rows, got {n}")));
    }
    if dims_out == 0 || dims_out > d {
        return Err(KnnError::BadConfig(format!("dims_out {dims_out} outside 1..={d}")));
    }
    let mut x = DMatrix::<f64>::from_fn(n, d, |r, c| matrix.data()[r * d + c] as f64);
    for c in 0..d {
        let mean = x.column(c).mean();
        x.column_mut(c).add_scalar_mut(-mean);
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= f64::EPSILON * (n * d) as f64 {
        return Err(KnnError::Degenerate("all rows identical".into()));
    }
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = Vec::with_capacity(dims_out);
    let mut ratios = Vec::with_capacity(dims_out);
    for j in 0..dims_out {
        let (axis, s) = match order.get(j) {
            Some(&i) => (v_t.row(i).iter().copied().collect::<Vec<f64>>(), svd.singular_values[i]),
            None => (vec![0.0; d], 0.0),
        };
        let pivot = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.push(axis.into_iter().map(|v| v * sign).collect::<Vec<_>>());
        ratios.push((s * s / total).clamp(0.0, 1.0));
    }
    let coords = (0..n)
        .map(|r| {
            components
                .iter()
                .map(|axis| x.row(r).iter().zip(axis).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult { coords, components, explained_variance_ratio: ratios })
}
