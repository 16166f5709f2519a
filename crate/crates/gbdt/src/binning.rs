use crate::Matrix;

/// Bin index reserved for missing values.
pub(crate) const MISSING_BIN: u16 = u16::MAX;

/// Per-feature quantile cut points.
///
/// Bin `b` of a feature holds the values `x` with `edges[b-1] < x <= edges[b]`,
/// so a split "left = bins `0..=b`" is exactly the raw test `x <= edges[b]`.
/// The last edge is always the largest observed value.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    edges: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(x: &Matrix, max_bins: usize) -> Self {
        let mut edges = Vec::with_capacity(x.n_cols());
        let mut column = Vec::with_capacity(x.n_rows());
        for f in 0..x.n_cols() {
            column.clear();
            column.extend((0..x.n_rows()).map(|r| x.get(r, f)).filter(|v| !v.is_nan()));
            column.sort_by(f64::total_cmp);
            edges.push(quantile_edges(&column, max_bins));
        }
        BinMapper { edges }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len()
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    /// Upper edge of `bin`, i.e. the raw split threshold.
    pub fn threshold(&self, feature: usize, bin: usize) -> f64 {
        self.edges[feature][bin]
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        if value.is_nan() {
            return MISSING_BIN;
        }
        let e = &self.edges[feature];
        // Values above the fitted range fall into the top bin.
        e.partition_point(|&edge| edge < value)
            .min(e.len().saturating_sub(1)) as u16
    }

    /// Column-major bin codes for every cell of `x`.
    pub(crate) fn bin_matrix(&self, x: &Matrix) -> Vec<Vec<u16>> {
        (0..x.n_cols())
            .map(|f| (0..x.n_rows()).map(|r| self.bin(f, x.get(r, f))).collect())
            .collect()
    }
}

fn quantile_edges(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut unique: Vec<f64> = sorted.to_vec();
    unique.dedup();
    if unique.len() <= max_bins {
        return unique;
    }
    let n = sorted.len();
    let mut edges = Vec::with_capacity(max_bins);
    for b in 1..=max_bins {
        let idx = (b * n).div_ceil(max_bins) - 1;
        let v = sorted[idx];
        if edges.last() != Some(&v) {
            edges.push(v);
        }
    }
    edges
}
