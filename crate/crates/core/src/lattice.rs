//! Magnetic torus geometry and gauge-phase finite-difference assembly.
//!
//! The box side is always an integer multiple of the integer-flux scale, so
//! the total flux through the torus is an even integer number of quanta and
//! magnetic-periodic boundary conditions close consistently. The kinetic
//! part is the 5-point stencil with Peierls phases: hopping in one axis
//! accumulates the per-plaquette flux, and a twist column on the wrapping
//! links carries the remainder.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{evaluate_breather, DisorderSample, SingleSitePotential};

/// Per-plaquette flux fraction above which the discretization no longer
/// resolves the low magnetic levels (calibration threshold).
pub const PLAQUETTE_FLUX_LIMIT: f64 = 0.05;

/// Gauge convention for the link phases. Both realize the same flux and the
/// same spectrum; the axis names which hopping direction accumulates phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    AxisX,
    AxisY,
}

/// An integer-flux torus with its grid resolution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TorusGeometry {
    b_field: f64,
    k_b: u32,
    l_b: f64,
    box_multiple: u32,
    grid_points_per_unit: u32,
}

impl TorusGeometry {
    /// Build and validate a geometry.
    ///
    /// The integer-flux scale is `L_B = K_B sqrt(4 pi / B)` with
    /// `K_B = 2 ceil(sqrt(B / 4 pi))`, and the box side is
    /// `box_multiple * L_B`.
    pub fn new(b_field: f64, box_multiple: u32, grid_points_per_unit: u32) -> Result<Self> {
        if !(b_field > 0.0) {
            return Err(Error::ConfigError(format!(
                "magnetic field strength must be positive, got {b_field}"
            )));
        }
        if box_multiple == 0 || grid_points_per_unit == 0 {
            return Err(Error::ConfigError(
                "box multiple and grid resolution must be positive".into(),
            ));
        }
        let k_b = 2 * (b_field / (4.0 * PI)).sqrt().ceil() as u32;
        let l_b = k_b as f64 * (4.0 * PI / b_field).sqrt();
        let geom = Self {
            b_field,
            k_b,
            l_b,
            box_multiple,
            grid_points_per_unit,
        };
        let fraction = geom.plaquette_flux_fraction();
        if fraction >= PLAQUETTE_FLUX_LIMIT {
            return Err(Error::FluxTooCoarse {
                flux_fraction: fraction,
                limit: PLAQUETTE_FLUX_LIMIT,
            });
        }
        Ok(geom)
    }

    /// Same torus at a different integer multiple of the flux scale.
    pub fn with_multiple(&self, box_multiple: u32) -> Result<Self> {
        Self::new(self.b_field, box_multiple, self.grid_points_per_unit)
    }

    pub fn b_field(&self) -> f64 {
        self.b_field
    }

    pub fn flux_scale_factor(&self) -> u32 {
        self.k_b
    }

    pub fn flux_scale(&self) -> f64 {
        self.l_b
    }

    pub fn box_multiple(&self) -> u32 {
        self.box_multiple
    }

    pub fn box_side(&self) -> f64 {
        self.box_multiple as f64 * self.l_b
    }

    pub fn grid_points_per_unit(&self) -> u32 {
        self.grid_points_per_unit
    }

    /// Total flux quanta through the torus: `B L^2 / 2 pi = 2 (m K_B)^2`,
    /// an even integer by construction.
    pub fn flux_quanta(&self) -> u64 {
        let mk = self.box_multiple as u64 * self.k_b as u64;
        2 * mk * mk
    }

    /// Grid points per axis.
    pub fn points_per_axis(&self) -> usize {
        (self.grid_points_per_unit as f64 * self.box_side()).round() as usize
    }

    /// Grid spacing `h`.
    pub fn grid_spacing(&self) -> f64 {
        self.box_side() / self.points_per_axis() as f64
    }

    /// Matrix dimension of the discretized operator.
    pub fn matrix_dimension(&self) -> usize {
        let n = self.points_per_axis();
        n * n
    }

    /// Flux through one plaquette as a fraction of a flux quantum.
    pub fn plaquette_flux_fraction(&self) -> f64 {
        let n = self.points_per_axis() as f64;
        self.flux_quanta() as f64 / (n * n)
    }

    /// Nominal energy of the `level`-th magnetic level, `B (2 level - 1)`.
    pub fn level_energy(&self, level: u32) -> f64 {
        self.b_field * (2.0 * level as f64 - 1.0)
    }

    /// Energies above this are dominated by lattice dispersion artifacts.
    pub fn validity_ceiling(&self) -> f64 {
        let h = self.grid_spacing();
        1.0 / (h * h)
    }
}

/// Row-major map between matrix indices and torus grid points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridLayout {
    pub points_per_axis: usize,
    pub spacing: f64,
    pub box_side: f64,
}

impl GridLayout {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.points_per_axis * iy
    }

    pub fn point(&self, index: usize) -> [f64; 2] {
        let ix = index % self.points_per_axis;
        let iy = index / self.points_per_axis;
        [ix as f64 * self.spacing, iy as f64 * self.spacing]
    }
}

/// Dense complex Hermitian matrix, optionally carrying its grid layout.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: Array2<Complex64>,
    grid: Option<GridLayout>,
}

impl HermitianOperator {
    pub fn new(entries: Array2<Complex64>) -> Self {
        Self {
            entries,
            grid: None,
        }
    }

    pub fn with_grid(entries: Array2<Complex64>, grid: GridLayout) -> Self {
        Self {
            entries,
            grid: Some(grid),
        }
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn grid(&self) -> Option<&GridLayout> {
        self.grid.as_ref()
    }

    /// `max |M - M*|` relative to `max |M|`.
    pub fn relative_hermiticity_defect(&self) -> f64 {
        let scale = linalg::max_norm(&self.entries);
        if scale == 0.0 {
            return 0.0;
        }
        linalg::hermiticity_defect(&self.entries) / scale
    }

    /// Add `coupling * diag` to the diagonal, in place.
    pub fn add_diagonal(&mut self, coupling: f64, diag: &Array1<f64>) {
        assert_eq!(diag.len(), self.dimension());
        for (i, d) in diag.iter().enumerate() {
            self.entries[(i, i)] += Complex64::new(coupling * d, 0.0);
        }
    }

    /// Binary dump: u64 little-endian dimension header, then row-major
    /// `(re, im)` f64 little-endian pairs.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&(self.dimension() as u64).to_le_bytes())?;
        for z in self.entries.iter() {
            f.write_all(&z.re.to_le_bytes())?;
            f.write_all(&z.im.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Read a matrix written by [`HermitianOperator::write_binary`].
    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header = [0u8; 8];
        f.read_exact(&mut header)?;
        let dim = u64::from_le_bytes(header) as usize;
        let mut buf = vec![0u8; 16];
        let mut entries = Array2::<Complex64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                f.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
                entries[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(Self::new(entries))
    }
}

/// Peierls assembly with an explicit flux-quanta count. Used with the
/// geometry's own flux by the public constructors; a zero override gives the
/// plain periodic Laplacian.
fn assemble_peierls(points_per_axis: usize, spacing: f64, flux_quanta: u64, gauge: Gauge) -> Array2<Complex64> {
    let n = points_per_axis;
    let dim = n * n;
    let inv_h2 = 1.0 / (spacing * spacing);
    let phi = flux_quanta as f64;
    let mut m = Array2::<Complex64>::zeros((dim, dim));

    // Phase of a hop in the accumulating axis at transverse index k, and of
    // a wrapping hop in the other axis at longitudinal index i.
    let hop_phase = |k: usize| -TAU * phi * k as f64 / (n * n) as f64;
    let twist_phase = |i: usize| TAU * phi * i as f64 / n as f64;

    let idx = |ix: usize, iy: usize| ix + n * iy;
    for iy in 0..n {
        for ix in 0..n {
            let p = idx(ix, iy);
            m[(p, p)] = Complex64::new(4.0 * inv_h2, 0.0);

            // +x and +y hops; Hermitian partners filled in together.
            let (theta_x, theta_y) = match gauge {
                Gauge::AxisX => {
                    let tx = hop_phase(iy);
                    let ty = if iy + 1 == n { twist_phase(ix) } else { 0.0 };
                    (tx, ty)
                }
                Gauge::AxisY => {
                    let ty = hop_phase(ix);
                    let tx = if ix + 1 == n { twist_phase(iy) } else { 0.0 };
                    (tx, ty)
                }
            };

            let qx = idx((ix + 1) % n, iy);
            let amp_x = Complex64::from_polar(inv_h2, theta_x);
            m[(p, qx)] -= amp_x;
            m[(qx, p)] -= amp_x.conj();

            let qy = idx(ix, (iy + 1) % n);
            let amp_y = Complex64::from_polar(inv_h2, theta_y);
            m[(p, qy)] -= amp_y;
            m[(qy, p)] -= amp_y.conj();
        }
    }
    m
}

/// Free magnetic Hamiltonian on the torus grid, default gauge.
pub fn assemble_free_hamiltonian(geom: &TorusGeometry) -> HermitianOperator {
    assemble_free_hamiltonian_with_gauge(geom, Gauge::AxisX)
}

/// Free magnetic Hamiltonian in an explicit gauge.
pub fn assemble_free_hamiltonian_with_gauge(geom: &TorusGeometry, gauge: Gauge) -> HermitianOperator {
    let layout = GridLayout {
        points_per_axis: geom.points_per_axis(),
        spacing: geom.grid_spacing(),
        box_side: geom.box_side(),
    };
    let entries = assemble_peierls(
        layout.points_per_axis,
        layout.spacing,
        geom.flux_quanta(),
        gauge,
    );
    HermitianOperator::with_grid(entries, layout)
}

/// Plain periodic 5-point Laplacian on the same grid (zero-field limit).
pub fn assemble_zero_field_laplacian(geom: &TorusGeometry) -> HermitianOperator {
    let layout = GridLayout {
        points_per_axis: geom.points_per_axis(),
        spacing: geom.grid_spacing(),
        box_side: geom.box_side(),
    };
    let entries = assemble_peierls(layout.points_per_axis, layout.spacing, 0, Gauge::AxisX);
    HermitianOperator::with_grid(entries, layout)
}

/// Diagonal of the random breather potential sampled at the grid points.
pub fn breather_diagonal(
    geom: &TorusGeometry,
    u: &SingleSitePotential,
    sample: &DisorderSample,
) -> Result<Array1<f64>> {
    if (sample.box_side() - geom.box_side()).abs() > 1e-9 {
        return Err(Error::BoxMismatch {
            sample: sample.box_side(),
            geometry: geom.box_side(),
        });
    }
    let n = geom.points_per_axis();
    let h = geom.grid_spacing();
    let mut diag = Array1::<f64>::zeros(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let x = [ix as f64 * h, iy as f64 * h];
            diag[ix + n * iy] = evaluate_breather(u, sample, x);
        }
    }
    Ok(diag)
}

/// Random breather Hamiltonian: free part plus `coupling` times the sampled
/// potential on the diagonal.
pub fn assemble_random_hamiltonian(
    geom: &TorusGeometry,
    u: &SingleSitePotential,
    sample: &DisorderSample,
    coupling: f64,
) -> Result<HermitianOperator> {
    assemble_random_hamiltonian_with_gauge(geom, u, sample, coupling, Gauge::AxisX)
}

pub fn assemble_random_hamiltonian_with_gauge(
    geom: &TorusGeometry,
    u: &SingleSitePotential,
    sample: &DisorderSample,
    coupling: f64,
    gauge: Gauge,
) -> Result<HermitianOperator> {
    assert!(coupling >= 0.0, "coupling must be nonnegative");
    let diag = breather_diagonal(geom, u, sample)?;
    let mut op = assemble_free_hamiltonian_with_gauge(geom, gauge);
    op.add_diagonal(coupling, &diag);
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use crate::model::{make_builtin_potential, sample_disorder, DisorderDistribution, PotentialKind};

    const B4PI: f64 = 4.0 * PI;

    #[test]
    fn geometry_formulas() {
        let g = TorusGeometry::new(B4PI, 1, 16).unwrap();
        assert_eq!(g.flux_scale_factor(), 2);
        assert!((g.flux_scale() - 2.0).abs() < 1e-12);
        assert_eq!(g.flux_quanta(), 8);

        let g = TorusGeometry::new(PI, 1, 8).unwrap();
        assert_eq!(g.flux_scale_factor(), 2);
        assert!((g.flux_scale() - 4.0).abs() < 1e-12);
        assert_eq!(g.flux_quanta(), 8);

        let g = TorusGeometry::new(B4PI, 2, 16).unwrap();
        assert!((g.box_side() - 4.0).abs() < 1e-12);
        assert_eq!(g.flux_quanta(), 32);
    }

    #[test]
    fn flux_too_coarse_rejected() {
        // One grid point per unit at B = 4 pi: flux fraction 8/4 = 2.
        let err = TorusGeometry::new(B4PI, 1, 1).unwrap_err();
        assert!(matches!(err, Error::FluxTooCoarse { .. }), "{err}");
    }

    #[test]
    fn noninteger_flux_scale_keeps_integer_quanta() {
        // B = 2 pi has an irrational flux scale; the quanta count stays even.
        let g = TorusGeometry::new(2.0 * PI, 1, 12).unwrap();
        assert!((g.flux_scale() - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.flux_quanta(), 8);
        let n = g.points_per_axis() as f64;
        assert!((g.b_field() * g.grid_spacing().powi(2) / TAU - g.flux_quanta() as f64 / (n * n)).abs() < 1e-12);
    }

    #[test]
    fn assembly_is_hermitian() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let h = assemble_free_hamiltonian(&g);
        assert!(h.relative_hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn zero_field_laplacian_ground_state() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let lap = assemble_zero_field_laplacian(&g);
        let (vals, vecs) = hermitian_eigen(lap.entries(), true).unwrap();
        assert!(vals[0].abs() < 1e-9, "lowest eigenvalue {}", vals[0]);
        let v = vecs.unwrap();
        let dim = lap.dimension();
        let first = v[(0, 0)];
        for i in 1..dim {
            assert!((v[(i, 0)] - first).norm() < 1e-7, "ground state not constant");
        }
    }

    #[test]
    fn lowest_cluster_near_first_level() {
        // Flux-count oracle: the lowest cluster has exactly `flux_quanta`
        // eigenvalues near B; the next sits near 3B.
        let g = TorusGeometry::new(B4PI, 1, 12).unwrap();
        let h = assemble_free_hamiltonian(&g);
        let (vals, _) = hermitian_eigen(h.entries(), false).unwrap();
        let b = g.b_field();
        let phi = g.flux_quanta() as usize;
        let near_first = vals.iter().filter(|&&e| (e - b).abs() < 0.5 * b).count();
        assert_eq!(near_first, phi);
        let near_second = vals.iter().filter(|&&e| (e - 3.0 * b).abs() < 0.5 * b).count();
        assert_eq!(near_second, phi);
    }

    #[test]
    fn gauge_conventions_share_spectrum() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let hx = assemble_free_hamiltonian_with_gauge(&g, Gauge::AxisX);
        let hy = assemble_free_hamiltonian_with_gauge(&g, Gauge::AxisY);
        let (vx, _) = hermitian_eigen(hx.entries(), false).unwrap();
        let (vy, _) = hermitian_eigen(hy.entries(), false).unwrap();
        let scale = vx.last().unwrap().abs();
        for (a, b) in vx.iter().zip(vy.iter()) {
            assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_coupling_matches_free() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let dist = DisorderDistribution::uniform(0.2, 0.4).unwrap();
        let s = sample_disorder(&dist, g.box_side(), 9);
        let u = make_builtin_potential(PotentialKind::Hat);
        let free = assemble_free_hamiltonian(&g);
        let random = assemble_random_hamiltonian(&g, &u, &s, 0.0).unwrap();
        let diff = free
            .entries()
            .iter()
            .zip(random.entries().iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()));
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn box_mismatch_detected() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let dist = DisorderDistribution::uniform(0.2, 0.4).unwrap();
        let s = sample_disorder(&dist, 4.0, 9);
        let u = make_builtin_potential(PotentialKind::Hat);
        let err = assemble_random_hamiltonian(&g, &u, &s, 0.1).unwrap_err();
        assert!(matches!(err, Error::BoxMismatch { .. }), "{err}");
    }

    #[test]
    fn nonnegative_potential_raises_spectrum() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let dist = DisorderDistribution::uniform(0.2, 0.4).unwrap();
        let s = sample_disorder(&dist, g.box_side(), 21);
        let u = make_builtin_potential(PotentialKind::Hat);
        let free = assemble_free_hamiltonian(&g);
        let random = assemble_random_hamiltonian(&g, &u, &s, 0.7).unwrap();
        let (vf, _) = hermitian_eigen(free.entries(), false).unwrap();
        let (vr, _) = hermitian_eigen(random.entries(), false).unwrap();
        for (a, b) in vf.iter().zip(vr.iter()) {
            assert!(b + 1e-9 >= *a, "eigenvalue dropped: {a} -> {b}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum_exactly() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let c = 0.7;
        // A flat wide bump covers the whole torus from every site, so the
        // breather sum is the constant c * (number of sites).
        let u = crate::model::SingleSitePotential::custom(move |_| c, 10.0, c);
        let s = DisorderSample::constant(g.box_side(), 0.25);
        let sites = s.len() as f64;
        let free = assemble_free_hamiltonian(&g);
        let shifted = assemble_random_hamiltonian(&g, &u, &s, 1.0).unwrap();
        let (vf, _) = hermitian_eigen(free.entries(), false).unwrap();
        let (vs, _) = hermitian_eigen(shifted.entries(), false).unwrap();
        for (a, b) in vf.iter().zip(vs.iter()) {
            assert!((b - a - c * sites).abs() < 1e-8, "{a} -> {b}");
        }
    }

    #[test]
    fn single_site_monotonicity() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let dist = DisorderDistribution::uniform(0.2, 0.4).unwrap();
        let u = make_builtin_potential(PotentialKind::Hat);
        for pair in 0..3u64 {
            let s = sample_disorder(&dist, g.box_side(), 100 + pair);
            let site = *s.iter().nth(pair as usize % s.len()).unwrap().0;
            let w = s.value(site).unwrap();
            let bumped = s.with_value(site, (w + 0.05).min(0.4));
            let h_lo = assemble_random_hamiltonian(&g, &u, &s, 0.5).unwrap();
            let h_hi = assemble_random_hamiltonian(&g, &u, &bumped, 0.5).unwrap();
            let (v_lo, _) = hermitian_eigen(h_lo.entries(), false).unwrap();
            let (v_hi, _) = hermitian_eigen(h_hi.entries(), false).unwrap();
            for (a, b) in v_lo.iter().zip(v_hi.iter()) {
                assert!(b + 1e-9 >= *a);
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = TorusGeometry::new(B4PI, 1, 8).unwrap();
        let h = assemble_free_hamiltonian(&g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.mat");
        h.write_binary(&path).unwrap();
        let back = HermitianOperator::read_binary(&path).unwrap();
        assert_eq!(back.dimension(), h.dimension());
        let diff = h
            .entries()
            .iter()
            .zip(back.entries().iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()));
        assert_eq!(diff, 0.0);
    }
}
