//! Spectra, eigenvalue counting on intervals, and magnetic level projectors.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{HermitianOperator, TorusGeometry};
use crate::linalg;

/// Default half-window, as a fraction of the inter-level gap `2B`, used to
/// collect a level's eigencluster.
pub const DEFAULT_GAP_FRACTION: f64 = 0.25;

/// Eigenvalues (ascending) and optional orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<Array2<Complex64>>,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> Option<&Array2<Complex64>> {
        self.eigenvectors.as_ref()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Residual invariants against the operator that produced this spectrum:
    /// orthonormality `|V*V - I|_max` and the eigen-equation defect
    /// `|HV - V diag|_max` relative to `|H|_max`.
    pub fn residuals(&self, h: &HermitianOperator) -> Option<(f64, f64)> {
        let v = self.eigenvectors.as_ref()?;
        let n = v.nrows();
        let mut gram_defect = 0.0f64;
        for a in 0..v.ncols() {
            for b in a..v.ncols() {
                let g: Complex64 = (0..n).map(|i| v[(i, a)].conj() * v[(i, b)]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                gram_defect = gram_defect.max((g - Complex64::new(expect, 0.0)).norm());
            }
        }
        let hv = h.entries().dot(v);
        let mut eq_defect = 0.0f64;
        for k in 0..v.ncols() {
            for i in 0..n {
                let d = hv[(i, k)] - v[(i, k)] * self.eigenvalues[k];
                eq_defect = eq_defect.max(d.norm());
            }
        }
        let scale = linalg::max_norm(h.entries()).max(f64::MIN_POSITIVE);
        Some((gram_defect, eq_defect / scale))
    }
}

/// Full dense eigendecomposition of a Hermitian operator.
pub fn eigendecompose(h: &HermitianOperator, want_vectors: bool) -> Result<SpectralData> {
    let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(h.entries(), want_vectors)?;
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
    })
}

/// Number of eigenvalues in the closed interval `[a, b]`.
pub fn count_in_interval(spec: &SpectralData, interval: [f64; 2]) -> usize {
    count_sorted(&spec.eigenvalues, interval)
}

/// Closed-interval count on any ascending slice.
pub fn count_sorted(sorted: &[f64], interval: [f64; 2]) -> usize {
    let [a, b] = interval;
    assert!(a <= b, "interval must be ordered");
    let lo = sorted.partition_point(|&x| x < a);
    let hi = sorted.partition_point(|&x| x <= b);
    hi - lo
}

/// Orthonormal basis of one magnetic level's eigencluster.
#[derive(Debug, Clone)]
pub struct LevelProjector {
    pub level_index: u32,
    pub level_energy: f64,
    pub basis: Array2<Complex64>,
    pub cluster_width: f64,
}

impl LevelProjector {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `|B*B - I|_max` of the stored basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.basis.nrows();
        let m = self.basis.ncols();
        let mut defect = 0.0f64;
        for a in 0..m {
            for b in a..m {
                let g: Complex64 = (0..n)
                    .map(|i| self.basis[(i, a)].conj() * self.basis[(i, b)])
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                defect = defect.max((g - Complex64::new(expect, 0.0)).norm());
            }
        }
        defect
    }
}

/// Collect the eigencluster of the `level`-th magnetic level.
///
/// Eigenvectors with `|eigenvalue - B(2 level - 1)| < gap_fraction * 2B` are
/// gathered; the cluster must have exactly the flux-count size and must be
/// separated from the rest of the spectrum by at least ten cluster widths.
pub fn extract_level_projector(
    spec: &SpectralData,
    geom: &TorusGeometry,
    level: u32,
    gap_fraction: f64,
) -> Result<LevelProjector> {
    assert!(level >= 1, "levels are indexed from 1");
    assert!(
        gap_fraction > 0.0 && gap_fraction < 1.0,
        "gap fraction must lie in (0, 1)"
    );
    let vectors = spec.eigenvectors().ok_or_else(|| Error::ClusterAmbiguous {
        level,
        reason: "spectral data was computed without eigenvectors".into(),
    })?;
    let b = geom.b_field();
    let center = geom.level_energy(level);
    if center + b > geom.validity_ceiling() {
        return Err(Error::ClusterAmbiguous {
            level,
            reason: format!(
                "level energy {center:.3} + B exceeds the validity ceiling {:.3}",
                geom.validity_ceiling()
            ),
        });
    }
    let window = gap_fraction * 2.0 * b;
    let vals = spec.eigenvalues();
    let lo = vals.partition_point(|&x| x <= center - window);
    let hi = vals.partition_point(|&x| x < center + window);
    let count = hi - lo;
    let expected = geom.flux_quanta() as usize;
    if count != expected {
        return Err(Error::ClusterAmbiguous {
            level,
            reason: format!("cluster size {count} != flux count {expected}"),
        });
    }
    let cluster_width = vals[lo..hi]
        .iter()
        .fold(0.0f64, |acc, &v| acc.max((v - center).abs()));
    let gap_below = if lo > 0 {
        (vals[lo] - vals[lo - 1]).abs()
    } else {
        f64::INFINITY
    };
    let gap_above = if hi < vals.len() {
        (vals[hi] - vals[hi - 1]).abs()
    } else {
        f64::INFINITY
    };
    let gap = gap_below.min(gap_above);
    if gap < 10.0 * cluster_width {
        return Err(Error::ClusterAmbiguous {
            level,
            reason: format!(
                "spectral gap {gap:.3e} below ten cluster widths ({:.3e})",
                cluster_width
            ),
        });
    }
    let n = vectors.nrows();
    let mut basis = Array2::<Complex64>::zeros((n, count));
    for (col, k) in (lo..hi).enumerate() {
        for i in 0..n {
            basis[(i, col)] = vectors[(i, k)];
        }
    }
    Ok(LevelProjector {
        level_index: level,
        level_energy: center,
        basis,
        cluster_width,
    })
}

/// Compression `B* D B` of a nonnegative diagonal multiplication operator to
/// the level subspace.
pub fn compress(projector: &LevelProjector, diag: &Array1<f64>) -> Array2<Complex64> {
    linalg::compress_diagonal(&projector.basis, diag)
}

/// Smallest eigenvalue of the compression of a diagonal observable.
pub fn compressed_floor(projector: &LevelProjector, diag: &Array1<f64>) -> Result<f64> {
    linalg::smallest_eigenvalue(&compress(projector, diag))
}

/// Write a spectrum as CSV, one eigenvalue per line.
pub fn eigenvalues_csv(values: ArrayView1<f64>) -> String {
    let mut out = String::from("eigenvalue\n");
    for v in values.iter() {
        out.push_str(&format!("{v}\n"));
    }
    out
}
