//! Unique-continuation measurements and the abstract trace bound.
//!
//! The observable is a union of one small ball per unit cell. Compressing
//! its indicator to a magnetic level subspace and taking the smallest
//! eigenvalue measures how far the level is from being localizable away
//! from the balls; the floor should stay positive uniformly in the box side
//! and in the ball configuration. The same floor feeds the trace-bound
//! checker as the constant `c2`.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{
    assemble_free_hamiltonian, breather_diagonal, HermitianOperator, TorusGeometry,
};
use crate::linalg;
use crate::model::{
    lattice_sites, torus_displacement, DisorderSample, HypothesisCertificate,
    SingleSitePotential,
};
use crate::rng;
use crate::spectral::{
    compress, count_in_interval, eigendecompose, extract_level_projector, LevelProjector,
    SpectralData, DEFAULT_GAP_FRACTION,
};

/// How the per-cell ball centers are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// Every ball sits at its lattice site.
    Centers,
    /// Centers drawn uniformly in the admissible sub-square of each cell,
    /// reproducibly keyed by (seed, site).
    Seeded(u64),
}

/// One ball center per unit cell, each ball contained in its cell.
#[derive(Debug, Clone)]
pub struct EquidistributedSet {
    radius: f64,
    box_side: f64,
    points: BTreeMap<(i64, i64), [f64; 2]>,
}

impl EquidistributedSet {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64), &[f64; 2])> {
        self.points.iter()
    }

    /// Ball-in-cell containment: `|x_j - j|_inf + r <= 1/2` for every site.
    pub fn validate_containment(&self) -> Result<()> {
        for (&(jx, jy), &p) in &self.points {
            let dx = (p[0] - jx as f64).abs();
            let dy = (p[1] - jy as f64).abs();
            if dx.max(dy) + self.radius > 0.5 + 1e-12 {
                return Err(Error::ConfigError(format!(
                    "ball at site ({jx}, {jy}) leaves its unit cell"
                )));
            }
        }
        Ok(())
    }
}

/// Place one ball center per lattice site of the box.
pub fn generate_equidistributed(
    radius: f64,
    box_side: f64,
    mode: PlacementMode,
) -> EquidistributedSet {
    assert!(
        radius > 0.0 && radius < 0.5,
        "ball radius must lie in (0, 1/2)"
    );
    let mut points = BTreeMap::new();
    for site in lattice_sites(box_side) {
        let center = match mode {
            PlacementMode::Centers => [site.0 as f64, site.1 as f64],
            PlacementMode::Seeded(seed) => {
                let slack = 0.5 - radius;
                let ox = (2.0 * rng::site_unit(seed, site, 1) - 1.0) * slack;
                let oy = (2.0 * rng::site_unit(seed, site, 2) - 1.0) * slack;
                [site.0 as f64 + ox, site.1 as f64 + oy]
            }
        };
        points.insert(site, center);
    }
    EquidistributedSet {
        radius,
        box_side,
        points,
    }
}

/// 0/1 diagonal of the union-of-balls indicator at the grid points.
pub fn assemble_w(points: &EquidistributedSet, geom: &TorusGeometry) -> Result<Array1<f64>> {
    if (points.box_side() - geom.box_side()).abs() > 1e-9 {
        return Err(Error::BoxMismatch {
            sample: points.box_side(),
            geometry: geom.box_side(),
        });
    }
    let n = geom.points_per_axis();
    let h = geom.grid_spacing();
    let r2 = points.radius() * points.radius();
    let mut diag = Array1::<f64>::zeros(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let x = [ix as f64 * h, iy as f64 * h];
            let covered = points.iter().any(|(_, &c)| {
                let d = torus_displacement(x, c, geom.box_side());
                d[0] * d[0] + d[1] * d[1] < r2
            });
            if covered {
                diag[ix + n * iy] = 1.0;
            }
        }
    }
    Ok(diag)
}

/// Centers shifted to the certificate position for each site's dilation:
/// ball `j` sits at `j + x0(w_j)` with the certificate radius.
pub fn certificate_ball_set(
    cert: &HypothesisCertificate,
    sample: &DisorderSample,
) -> EquidistributedSet {
    let mut points = BTreeMap::new();
    for (&(jx, jy), &w) in sample.iter() {
        let c = cert.center_for(w);
        points.insert((jx, jy), [jx as f64 + c[0], jy as f64 + c[1]]);
    }
    EquidistributedSet {
        radius: cert.ball_radius,
        box_side: sample.box_side(),
        points,
    }
}

/// One measured compression floor.
#[derive(Debug, Clone, Serialize)]
pub struct C1Entry {
    pub box_multiple: u32,
    pub box_side: f64,
    pub sample_id: u32,
    pub c1: f64,
}

/// Compression floors across box sides and ball configurations.
#[derive(Debug, Clone, Serialize)]
pub struct UcpReport {
    pub level_index: u32,
    pub radius: f64,
    pub entries: Vec<C1Entry>,
    pub c1_min: f64,
}

impl UcpReport {
    pub fn c1_max(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, e| a.max(e.c1))
    }

    /// CSV with header `L,sample_id,c1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,sample_id,c1\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.box_side, e.sample_id, e.c1));
        }
        out
    }
}

/// Measure the compression floor of the level projector against seeded
/// equidistributed ball sets, across a family of box sides.
///
/// All geometries must share the field strength. Sample `k` on multiple `m`
/// uses the ball-placement seed derived from `(seed, m, k)`.
pub fn estimate_c1(
    geom_family: &[TorusGeometry],
    level: u32,
    radius: f64,
    samples: u32,
    seed: u64,
) -> Result<UcpReport> {
    assert!(!geom_family.is_empty(), "need at least one geometry");
    assert!(samples >= 1, "need at least one sample");
    let b = geom_family[0].b_field();
    for g in geom_family {
        assert!(
            (g.b_field() - b).abs() < 1e-12,
            "geometries must share the field strength"
        );
    }
    let mut entries = Vec::new();
    for geom in geom_family {
        let spec = eigendecompose(&assemble_free_hamiltonian(geom), true)?;
        let projector = extract_level_projector(&spec, geom, level, DEFAULT_GAP_FRACTION)?;
        for sample_id in 0..samples {
            let placement_seed =
                rng::derive_seed(seed, &[geom.box_multiple() as u64, sample_id as u64]);
            let set = generate_equidistributed(
                radius,
                geom.box_side(),
                PlacementMode::Seeded(placement_seed),
            );
            set.validate_containment()?;
            let w = assemble_w(&set, geom)?;
            let c1 = linalg::smallest_eigenvalue(&compress(&projector, &w))?;
            entries.push(C1Entry {
                box_multiple: geom.box_multiple(),
                box_side: geom.box_side(),
                sample_id,
                c1,
            });
        }
    }
    let c1_min = entries.iter().fold(f64::INFINITY, |a, e| a.min(e.c1));
    Ok(UcpReport {
        level_index: level,
        radius,
        entries,
        c1_min,
    })
}

/// Direct sum of the eigenclusters of levels `1..=max_level`, for the
/// experimental multi-level compression sweep.
pub fn multi_level_projector(
    spec: &SpectralData,
    geom: &TorusGeometry,
    max_level: u32,
    gap_fraction: f64,
) -> Result<LevelProjector> {
    assert!(max_level >= 1);
    let mut bases = Vec::new();
    let mut width = 0.0f64;
    let mut total = 0usize;
    for level in 1..=max_level {
        let p = extract_level_projector(spec, geom, level, gap_fraction)?;
        width = width.max(p.cluster_width);
        total += p.rank();
        bases.push(p.basis);
    }
    let n = bases[0].nrows();
    let mut basis = Array2::<Complex64>::zeros((n, total));
    let mut col = 0;
    for b in bases {
        for k in 0..b.ncols() {
            for i in 0..n {
                basis[(i, col)] = b[(i, k)];
            }
            col += 1;
        }
    }
    Ok(LevelProjector {
        level_index: max_level,
        level_energy: geom.level_energy(max_level),
        basis,
        cluster_width: width,
    })
}

/// Weak-disorder threshold `B sqrt(ct / (32 vinf^2 (ct + 2)))`.
pub fn compute_lambda0(b_field: f64, c_tilde: f64, v_inf: f64) -> f64 {
    assert!(b_field > 0.0 && c_tilde > 0.0 && v_inf > 0.0);
    b_field * (c_tilde / (32.0 * v_inf * v_inf * (c_tilde + 2.0))).sqrt()
}

/// An instance of the abstract trace bound: a base operator `H`, a bounded
/// symmetric perturbation `V`, a nonnegative observable `W`, nested
/// intervals `I` inside `J`, and a claimed compression floor `c2` for `W`
/// on the `J`-spectral subspace of `H`.
#[derive(Debug, Clone)]
pub struct TraceBoundInstance {
    pub h_op: HermitianOperator,
    pub v_op: HermitianOperator,
    pub w_op: HermitianOperator,
    pub interval_i: [f64; 2],
    pub interval_j: [f64; 2],
    pub c2: f64,
}

/// Outcome of one trace-bound check.
#[derive(Debug, Clone, Serialize)]
pub struct TraceBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub c3: f64,
    pub v_norm: f64,
    pub w_norm: f64,
    pub separation: f64,
    pub precondition_met: bool,
    pub holds: bool,
}

fn columns_in_interval(
    spec: &SpectralData,
    interval: [f64; 2],
) -> (usize, usize) {
    let vals = spec.eigenvalues();
    let lo = vals.partition_point(|&x| x < interval[0]);
    let hi = vals.partition_point(|&x| x <= interval[1]);
    (lo, hi)
}

/// Evaluate both sides of the trace bound on an instance.
///
/// The claimed `c2` is re-verified by compressing `W` to the span of the
/// eigenvectors of `H` in `J`; if the measured floor falls short the check
/// aborts with `HypothesisFailure`. The constant is
/// `c3 = sep^2 / (c2 sep^2 - |V|^2 (c2 + 1 + |W|))` with `sep = dist(I, Jc)`,
/// and the precondition is `|V| < sep sqrt(c2 / (c2 + 1 + |W|))`.
pub fn check_trace_bound(inst: &TraceBoundInstance) -> Result<TraceBoundCheck> {
    let [i_lo, i_hi] = inst.interval_i;
    let [j_lo, j_hi] = inst.interval_j;
    if !(j_lo <= i_lo && i_lo <= i_hi && i_hi <= j_hi) {
        return Err(Error::ConfigError(
            "intervals must be ordered with I inside J".into(),
        ));
    }
    let separation = (i_lo - j_lo).min(j_hi - i_hi);
    if separation <= 0.0 {
        return Err(Error::ConfigError(
            "I must be strictly inside J (positive separation)".into(),
        ));
    }

    let w_vals = linalg::hermitian_eigen(inst.w_op.entries(), false)?.0;
    let w_min = w_vals.first().copied().unwrap_or(0.0);
    let w_norm = w_vals.last().copied().unwrap_or(0.0).abs();
    if w_min < -1e-10 * w_norm.max(1.0) {
        return Err(Error::ConfigError(format!(
            "observable W is not positive semidefinite (smallest eigenvalue {w_min:.3e})"
        )));
    }

    // Hypothesis: the compression of W to the J-subspace of H dominates c2.
    let h_spec = eigendecompose(&inst.h_op, true)?;
    let (j_lo_idx, j_hi_idx) = columns_in_interval(&h_spec, inst.interval_j);
    if j_hi_idx > j_lo_idx {
        let vecs = h_spec.eigenvectors().expect("vectors requested");
        let n = vecs.nrows();
        let m = j_hi_idx - j_lo_idx;
        let mut q = Array2::<Complex64>::zeros((n, m));
        for (col, k) in (j_lo_idx..j_hi_idx).enumerate() {
            for i in 0..n {
                q[(i, col)] = vecs[(i, k)];
            }
        }
        let wq = inst.w_op.entries().dot(&q);
        let mut comp = Array2::<Complex64>::zeros((m, m));
        for a in 0..m {
            for b in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    acc += q[(i, a)].conj() * wq[(i, b)];
                }
                comp[(a, b)] = acc;
            }
        }
        let measured = linalg::smallest_eigenvalue(&comp)?;
        if measured < inst.c2 * (1.0 - 1e-9) - 1e-12 {
            return Err(Error::HypothesisFailure {
                claimed: inst.c2,
                measured,
            });
        }
    }

    let v_norm = linalg::spectral_norm(inst.v_op.entries())?;
    let c2 = inst.c2;
    let precondition_met = v_norm < separation * (c2 / (c2 + 1.0 + w_norm)).sqrt();
    let denom = c2 * separation * separation - v_norm * v_norm * (c2 + 1.0 + w_norm);
    let c3 = if denom > 0.0 {
        separation * separation / denom
    } else {
        f64::INFINITY
    };

    // Both traces over the range of the I-projection of H + V.
    let perturbed = HermitianOperator::new(inst.h_op.entries() + inst.v_op.entries());
    let p_spec = eigendecompose(&perturbed, true)?;
    let (lo, hi) = columns_in_interval(&p_spec, inst.interval_i);
    let lhs = (hi - lo) as f64;
    let vecs = p_spec.eigenvectors().expect("vectors requested");
    let n = vecs.nrows();
    let mut trace_w_plus_w2 = 0.0f64;
    for k in lo..hi {
        // <q, W q> + |W q|^2 accumulates Tr(P (W + W^2)) column by column.
        let mut wq = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += inst.w_op.entries()[(i, j)] * vecs[(j, k)];
            }
            wq[i] = acc;
        }
        let mut quad = 0.0f64;
        let mut square = 0.0f64;
        for i in 0..n {
            quad += (vecs[(i, k)].conj() * wq[i]).re;
            square += wq[i].norm_sqr();
        }
        trace_w_plus_w2 += quad + square;
    }
    let rhs = c3 * trace_w_plus_w2;
    let holds = lhs <= rhs + 1e-8;

    Ok(TraceBoundCheck {
        lhs,
        rhs,
        c3,
        v_norm,
        w_norm,
        separation,
        precondition_met,
        holds,
    })
}

/// Fixed windows for the random instance family.
pub const RANDOM_INSTANCE_I: [f64; 2] = [0.4, 0.6];
pub const RANDOM_INSTANCE_J: [f64; 2] = [0.2, 0.8];

/// Draw a random abstract instance meeting the trace-bound precondition.
///
/// The base spectrum is uniform in `[-1, 2]` in a Haar-ish random basis,
/// the observable is a nonnegative random diagonal, `c2` is measured by
/// compression onto the `J`-subspace (known analytically from the
/// construction basis), and the perturbation norm is scaled to a random
/// fraction of the precondition bound.
pub fn random_instance(seed: u64, max_dim: usize) -> TraceBoundInstance {
    assert!(max_dim >= 8);
    let mut stream = rng::SplitMix64::new(seed);
    let dim = 8 + stream.below((max_dim - 8 + 1) as u64) as usize;

    // Random orthonormal basis by modified Gram-Schmidt on a Gaussian matrix.
    let mut basis = Array2::<Complex64>::zeros((dim, dim));
    for k in 0..dim {
        let mut col: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(stream.normal(), stream.normal()))
            .collect();
        for prev in 0..k {
            let proj: Complex64 = (0..dim).map(|i| basis[(i, prev)].conj() * col[i]).sum();
            for i in 0..dim {
                let b = basis[(i, prev)];
                col[i] -= proj * b;
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            basis[(i, k)] = col[i] / norm;
        }
    }

    let spectrum: Vec<f64> = (0..dim).map(|_| stream.uniform(-1.0, 2.0)).collect();
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += basis[(i, k)] * Complex64::new(spectrum[k], 0.0) * basis[(j, k)].conj();
            }
            h[(i, j)] = acc;
        }
    }
    // Symmetrize away round-off.
    for i in 0..dim {
        for j in 0..i {
            let avg = (h[(i, j)] + h[(j, i)].conj()) * Complex64::new(0.5, 0.0);
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
        h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
    }

    let w_diag: Vec<f64> = (0..dim).map(|_| stream.next_f64()).collect();
    let mut w = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        w[(i, i)] = Complex64::new(w_diag[i], 0.0);
    }
    let w_norm = w_diag.iter().fold(0.0f64, |a, &b| a.max(b));

    // c2 from the construction basis: compress W onto the J-columns.
    let j_cols: Vec<usize> = (0..dim)
        .filter(|&k| spectrum[k] >= RANDOM_INSTANCE_J[0] && spectrum[k] <= RANDOM_INSTANCE_J[1])
        .collect();
    let c2 = if j_cols.is_empty() {
        1.0
    } else {
        let m = j_cols.len();
        let mut comp = Array2::<Complex64>::zeros((m, m));
        for (a, &ka) in j_cols.iter().enumerate() {
            for (b, &kb) in j_cols.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..dim {
                    acc += basis[(i, ka)].conj() * Complex64::new(w_diag[i], 0.0) * basis[(i, kb)];
                }
                comp[(a, b)] = acc;
            }
        }
        linalg::smallest_eigenvalue(&comp).expect("small dense eigenproblem")
    };

    let separation = (RANDOM_INSTANCE_I[0] - RANDOM_INSTANCE_J[0])
        .min(RANDOM_INSTANCE_J[1] - RANDOM_INSTANCE_I[1]);
    let bound = separation * (c2 / (c2 + 1.0 + w_norm)).sqrt();
    let target = bound * stream.uniform(0.05, 0.95);

    let mut v = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..=i {
            if i == j {
                v[(i, i)] = Complex64::new(stream.normal(), 0.0);
            } else {
                let z = Complex64::new(stream.normal(), stream.normal());
                v[(i, j)] = z;
                v[(j, i)] = z.conj();
            }
        }
    }
    let v_norm = linalg::spectral_norm(&v).expect("small dense eigenproblem");
    let scale = Complex64::new(target / v_norm, 0.0);
    let v = v.mapv(|z| z * scale);

    TraceBoundInstance {
        h_op: HermitianOperator::new(h),
        v_op: HermitianOperator::new(v),
        w_op: HermitianOperator::new(w),
        interval_i: RANDOM_INSTANCE_I,
        interval_j: RANDOM_INSTANCE_J,
        c2,
    }
}

/// Physical instance around one magnetic level: `H` free, `V` the sampled
/// breather diagonal times the coupling, `W` the indicator of the
/// certificate balls, `I` a window around the level, `J` its widening by a
/// quarter field strength on both sides, and `c2` measured on the free
/// `J`-subspace.
pub fn physical_instance(
    geom: &TorusGeometry,
    free: &HermitianOperator,
    free_spec: &SpectralData,
    u: &SingleSitePotential,
    cert: &HypothesisCertificate,
    sample: &DisorderSample,
    coupling: f64,
) -> Result<TraceBoundInstance> {
    let b = geom.b_field();
    let level_energy = geom.level_energy(1);
    let interval_i = [level_energy - b / 8.0, level_energy + b / 8.0];
    let interval_j = [interval_i[0] - b / 4.0, interval_i[1] + b / 4.0];

    let dim = geom.matrix_dimension();
    let balls = certificate_ball_set(cert, sample);
    let w_diag = assemble_w(&balls, geom)?;
    let mut w = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        w[(i, i)] = Complex64::new(w_diag[i], 0.0);
    }

    let v_diag = breather_diagonal(geom, u, sample)?;
    let mut v = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        v[(i, i)] = Complex64::new(coupling * v_diag[i], 0.0);
    }

    // Measured compression floor on the free J-subspace.
    let vecs = free_spec
        .eigenvectors()
        .ok_or_else(|| Error::ConfigError("free spectrum needs eigenvectors".into()))?;
    let vals = free_spec.eigenvalues();
    let lo = vals.partition_point(|&x| x < interval_j[0]);
    let hi = vals.partition_point(|&x| x <= interval_j[1]);
    if hi == lo {
        return Err(Error::ConfigError(
            "no free eigenvalues in the widened interval".into(),
        ));
    }
    let m = hi - lo;
    let n = vecs.nrows();
    let mut q = Array2::<Complex64>::zeros((n, m));
    for (col, k) in (lo..hi).enumerate() {
        for i in 0..n {
            q[(i, col)] = vecs[(i, k)];
        }
    }
    let comp = linalg::compress_diagonal(&q, &w_diag);
    let c2 = linalg::smallest_eigenvalue(&comp)?;
    if c2 <= 0.0 {
        return Err(Error::HypothesisFailure {
            claimed: 0.0,
            measured: c2,
        });
    }

    Ok(TraceBoundInstance {
        h_op: free.clone(),
        v_op: HermitianOperator::new(v),
        w_op: HermitianOperator::new(w),
        interval_i,
        interval_j,
        c2,
    })
}

/// Count of eigenvalues of the perturbed operator in `I` (used by tests as
/// an independent route to the checker's `lhs`).
pub fn perturbed_count(inst: &TraceBoundInstance) -> Result<usize> {
    let perturbed = HermitianOperator::new(inst.h_op.entries() + inst.v_op.entries());
    let spec = eigendecompose(&perturbed, false)?;
    Ok(count_in_interval(&spec, inst.interval_i))
}
