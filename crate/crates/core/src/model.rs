//! Single-site potentials, dilation-monotonicity certificates, and random
//! breather potentials on the torus.
//!
//! A breather potential dilates one bump per lattice site: site `j` with
//! random dilation `w` contributes `u((x - j)/w)`. The certificate machinery
//! measures, by central finite differences in the dilation parameter, a
//! constant `c_u > 0` and a ball on which the derivative of the dilated bump
//! is bounded below — the quantitative input for everything downstream.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Step used for central finite differences in the dilation parameter.
pub const DILATION_FD_STEP: f64 = 1e-4;

/// Kind tag for a single-site potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    SmoothBump,
    Hat,
    Custom,
}

#[derive(Clone)]
enum Profile {
    SmoothBump,
    Hat,
    Custom(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

/// A nonnegative bump `u` on the plane, compactly supported in a ball.
#[derive(Clone)]
pub struct SingleSitePotential {
    kind: PotentialKind,
    profile: Profile,
    support_radius: f64,
    sup_norm: f64,
}

impl fmt::Debug for SingleSitePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SingleSitePotential")
            .field("kind", &self.kind)
            .field("support_radius", &self.support_radius)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

/// Build one of the two built-in single-site potentials.
///
/// * `SmoothBump`: `u(x) = exp(-1/(1-|x|^2))` for `|x| < 1`, else 0.
/// * `Hat`: `u(x) = 1 - |x|` for `|x| < 1`, else 0.
pub fn make_builtin_potential(kind: PotentialKind) -> SingleSitePotential {
    match kind {
        PotentialKind::SmoothBump => SingleSitePotential {
            kind,
            profile: Profile::SmoothBump,
            support_radius: 1.0,
            sup_norm: (-1.0f64).exp(),
        },
        PotentialKind::Hat => SingleSitePotential {
            kind,
            profile: Profile::Hat,
            support_radius: 1.0,
            sup_norm: 1.0,
        },
        PotentialKind::Custom => panic!("custom potentials are built via SingleSitePotential::custom"),
    }
}

/// Parse a built-in potential by its CLI name.
pub fn potential_by_name(name: &str) -> Result<SingleSitePotential> {
    match name {
        "hat" => Ok(make_builtin_potential(PotentialKind::Hat)),
        "smooth-bump" => Ok(make_builtin_potential(PotentialKind::SmoothBump)),
        other => Err(Error::ConfigError(format!(
            "unknown potential name {other:?}; expected \"hat\" or \"smooth-bump\""
        ))),
    }
}

impl SingleSitePotential {
    /// Wrap a user-supplied callable with its declared support radius and
    /// sup norm.
    pub fn custom(
        profile: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        support_radius: f64,
        sup_norm: f64,
    ) -> Self {
        assert!(support_radius > 0.0 && sup_norm > 0.0);
        Self {
            kind: PotentialKind::Custom,
            profile: Profile::Custom(Arc::new(profile)),
            support_radius,
            sup_norm,
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Evaluate `u(x)`.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match &self.profile {
            Profile::SmoothBump => {
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            Profile::Hat => {
                if r2 < 1.0 {
                    1.0 - r2.sqrt()
                } else {
                    0.0
                }
            }
            Profile::Custom(f) => f(x),
        }
    }

    /// Evaluate the dilated bump `u(x/t)`.
    pub fn evaluate_dilated(&self, x: [f64; 2], t: f64) -> f64 {
        self.evaluate([x[0] / t, x[1] / t])
    }

    /// Central finite difference of `t -> u(x/t)`.
    pub fn dilation_derivative(&self, x: [f64; 2], t: f64) -> f64 {
        let h = DILATION_FD_STEP;
        (self.evaluate_dilated(x, t + h) - self.evaluate_dilated(x, t - h)) / (2.0 * h)
    }

    /// Uniform bound on the breather sum: `ceil(support_radius)^2 * sup_norm`.
    ///
    /// The dilated bump at site `j` reaches at most `w_j * support_radius`
    /// from `j`, so at any point the number of contributing cells is bounded
    /// by the squared ceiling of the support radius.
    pub fn breather_sup_bound(&self) -> f64 {
        let cells = self.support_radius.ceil();
        cells * cells * self.sup_norm
    }

    /// Sampled shape invariants: nonnegativity, support containment, and
    /// attainment of the declared sup norm within 1% on a fine grid.
    pub fn validate_shape(&self, resolution: usize) -> Result<()> {
        // Odd point count so the grid contains the center of the support.
        let n = resolution.max(16) | 1;
        let rho = self.support_radius;
        let mut max_seen = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let x = [
                    -1.5 * rho + 3.0 * rho * i as f64 / (n - 1) as f64,
                    -1.5 * rho + 3.0 * rho * k as f64 / (n - 1) as f64,
                ];
                let v = self.evaluate(x);
                if v < 0.0 {
                    return Err(Error::HypothesisViolation(format!(
                        "profile is negative at ({:.4}, {:.4}): {v}",
                        x[0], x[1]
                    )));
                }
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r > rho && v != 0.0 {
                    return Err(Error::HypothesisViolation(format!(
                        "profile does not vanish at |x| = {r:.4} > support radius {rho}"
                    )));
                }
                if v > self.sup_norm * (1.0 + 1e-12) {
                    return Err(Error::HypothesisViolation(format!(
                        "profile exceeds declared sup norm at ({:.4}, {:.4})",
                        x[0], x[1]
                    )));
                }
                max_seen = max_seen.max(v);
            }
        }
        if max_seen < self.sup_norm * 0.99 {
            return Err(Error::HypothesisViolation(format!(
                "declared sup norm {} not attained on the sampling grid (max seen {max_seen})",
                self.sup_norm
            )));
        }
        Ok(())
    }
}

/// Probability law of a single dilation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Density {
    Uniform,
}

/// Law of the i.i.d. dilation field: a bounded density on
/// `[omega_minus, omega_plus]` inside `(0, 1/2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DisorderDistribution {
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub density: Density,
}

impl DisorderDistribution {
    pub fn uniform(omega_minus: f64, omega_plus: f64) -> Result<Self> {
        if !(omega_minus > 0.0 && omega_minus < omega_plus && omega_plus < 0.5) {
            return Err(Error::ConfigError(format!(
                "disorder support must satisfy 0 < omega_minus < omega_plus < 1/2, \
                 got [{omega_minus}, {omega_plus}]"
            )));
        }
        Ok(Self {
            omega_minus,
            omega_plus,
            density: Density::Uniform,
        })
    }

    /// Density value at `t`.
    pub fn density_at(&self, t: f64) -> f64 {
        match self.density {
            Density::Uniform => {
                if t >= self.omega_minus && t <= self.omega_plus {
                    1.0 / (self.omega_plus - self.omega_minus)
                } else {
                    0.0
                }
            }
        }
    }

    /// Sup norm of the density.
    pub fn density_sup(&self) -> f64 {
        match self.density {
            Density::Uniform => 1.0 / (self.omega_plus - self.omega_minus),
        }
    }

    /// Inverse cumulative distribution, mapping `[0,1)` into the support.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match self.density {
            Density::Uniform => self.omega_minus + (self.omega_plus - self.omega_minus) * p,
        }
    }

    /// Numerical normalization and boundedness check: the trapezoid integral
    /// of the density over the support must be 1 within 1e-6 and the density
    /// must not exceed its declared sup on the sampling grid.
    pub fn validate_numerically(&self, resolution: usize) -> Result<()> {
        let n = resolution.max(64);
        let (a, b) = (self.omega_minus, self.omega_plus);
        let h = (b - a) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let t = a + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let d = self.density_at(t);
            if d > self.density_sup() * (1.0 + 1e-12) {
                return Err(Error::ConfigError(format!(
                    "density exceeds its declared sup at t = {t}"
                )));
            }
            integral += w * d * h;
        }
        if (integral - 1.0).abs() > 1e-6 {
            return Err(Error::ConfigError(format!(
                "density does not integrate to 1 over the support: got {integral}"
            )));
        }
        Ok(())
    }
}

/// One realization of the dilation field on the lattice sites of a box.
#[derive(Debug, Clone)]
pub struct DisorderSample {
    values: BTreeMap<(i64, i64), f64>,
    seed: u64,
    box_side: f64,
}

/// Integer lattice sites in the half-open box `[-L/2, L/2)^2`.
///
/// For integer `L` this yields exactly `L^2` sites, one per unit cell of the
/// torus.
pub fn lattice_sites(box_side: f64) -> Vec<(i64, i64)> {
    let lo = (-box_side / 2.0).ceil() as i64;
    let mut axis = Vec::new();
    let mut j = lo;
    while (j as f64) < box_side / 2.0 {
        axis.push(j);
        j += 1;
    }
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &jx in &axis {
        for &jy in &axis {
            out.push((jx, jy));
        }
    }
    out
}

/// Draw one dilation per lattice site, i.i.d. from `dist`.
///
/// Each site's value is the inverse CDF of a counter-based uniform keyed by
/// `(seed, site)`, so the value at any site is independent of enumeration
/// order and reproducible in parallel.
pub fn sample_disorder(dist: &DisorderDistribution, box_side: f64, seed: u64) -> DisorderSample {
    assert!(box_side >= 1.0, "box side must be at least 1");
    let mut values = BTreeMap::new();
    for site in lattice_sites(box_side) {
        let p = rng::site_unit(seed, site, 0);
        values.insert(site, dist.inverse_cdf(p));
    }
    DisorderSample {
        values,
        seed,
        box_side,
    }
}

impl DisorderSample {
    /// Build a sample with every site pinned to the same dilation.
    pub fn constant(box_side: f64, value: f64) -> Self {
        let mut values = BTreeMap::new();
        for site in lattice_sites(box_side) {
            values.insert(site, value);
        }
        Self {
            values,
            seed: 0,
            box_side,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, site: (i64, i64)) -> Option<f64> {
        self.values.get(&site).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64), &f64)> {
        self.values.iter()
    }

    /// Replace the value at one site (used for coupled monotonicity checks).
    pub fn with_value(&self, site: (i64, i64), value: f64) -> Self {
        let mut out = self.clone();
        out.values.insert(site, value);
        out
    }
}

/// Shortest displacement from `b` to `a` on the `L`-torus, component-wise in
/// `[-L/2, L/2)`.
pub fn torus_displacement(a: [f64; 2], b: [f64; 2], box_side: f64) -> [f64; 2] {
    let wrap = |mut d: f64| {
        d -= box_side * (d / box_side).round();
        if d < -box_side / 2.0 {
            d += box_side;
        } else if d >= box_side / 2.0 {
            d -= box_side;
        }
        d
    };
    [wrap(a[0] - b[0]), wrap(a[1] - b[1])]
}

/// Value of the random breather potential at a point of the torus:
/// the sum over lattice sites of the dilated bump, with displacements taken
/// as shortest torus vectors so the result is periodic.
pub fn evaluate_breather(u: &SingleSitePotential, sample: &DisorderSample, x: [f64; 2]) -> f64 {
    let box_side = sample.box_side();
    let mut total = 0.0;
    for (&(jx, jy), &w) in sample.iter() {
        let d = torus_displacement(x, [jx as f64, jy as f64], box_side);
        let reach = w * u.support_radius();
        if d[0].abs() < reach && d[1].abs() < reach {
            let r2 = d[0] * d[0] + d[1] * d[1];
            if r2 < reach * reach {
                total += u.evaluate_dilated(d, w);
            }
        }
    }
    total
}

/// A verified dilation-derivative lower bound: on the ball of radius
/// `ball_radius` around `center_for(t)`, the derivative of `t -> u(x/t)`
/// dominates `c_u`, for every `t` on the verified grid.
#[derive(Debug, Clone)]
pub struct HypothesisCertificate {
    pub c_u: f64,
    pub ball_radius: f64,
    /// Verified `(t, center)` pairs, ascending in `t`.
    pub centers: Vec<(f64, [f64; 2])>,
}

/// JSON form of a certificate: `{c_u, r, centers: [[t, x0_x, x0_y]]}`.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateJson {
    pub c_u: f64,
    pub r: f64,
    pub centers: Vec<[f64; 3]>,
}

impl HypothesisCertificate {
    pub fn t_grid(&self) -> Vec<f64> {
        self.centers.iter().map(|(t, _)| *t).collect()
    }

    /// Center for the verified `t` nearest to the query.
    pub fn center_for(&self, t: f64) -> [f64; 2] {
        let mut best = self.centers[0];
        for &(tt, c) in &self.centers {
            if (tt - t).abs() < (best.0 - t).abs() {
                best = (tt, c);
            }
        }
        best.1
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            c_u: self.c_u,
            r: self.ball_radius,
            centers: self
                .centers
                .iter()
                .map(|&(t, c)| [t, c[0], c[1]])
                .collect(),
        }
    }
}

/// Deterministic sample points of the closed ball `B(center, radius)`:
/// the center plus concentric rings.
fn ball_samples(center: [f64; 2], radius: f64, rings: usize, angles: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(1 + rings * angles);
    pts.push(center);
    for ring in 1..=rings {
        let rho = radius * ring as f64 / rings as f64;
        for a in 0..angles {
            let th = TAU * a as f64 / angles as f64;
            pts.push([center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
        }
    }
    pts
}

/// Search for a dilation-derivative certificate.
///
/// For each `t` on a grid of `t_resolution` points in the disorder support,
/// candidate centers on a polar grid and candidate radii
/// `{w_-/16, w_-/8, w_-/4}` are scanned; a candidate's constant is the
/// minimum of the finite-difference derivative over sampled ball points.
/// The radius is shared across `t` while the center may move with `t`; among
/// admissible radii the largest `c_u * r^2` wins. The search also verifies
/// that the derivative is nowhere significantly negative.
pub fn verify_hypotheses(
    u: &SingleSitePotential,
    dist: &DisorderDistribution,
    t_resolution: usize,
    x_resolution: usize,
) -> Result<HypothesisCertificate> {
    assert!(t_resolution >= 16 && x_resolution >= 16, "resolutions must be >= 16");
    let (w_minus, w_plus) = (dist.omega_minus, dist.omega_plus);
    let t_grid: Vec<f64> = (0..t_resolution)
        .map(|i| w_minus + (w_plus - w_minus) * i as f64 / (t_resolution - 1) as f64)
        .collect();

    // Global nonnegativity of the dilation derivative. The derivative can
    // only be nonzero where some dilated bump lives, i.e. inside the box of
    // half-width w_plus * support_radius (+ slack for the FD step).
    let reach = w_plus * u.support_radius() + 2.0 * DILATION_FD_STEP;
    let grid_n = 2 * x_resolution;
    let mut max_derivative = 0.0f64;
    for &t in &t_grid {
        for i in 0..grid_n {
            for k in 0..grid_n {
                let x = [
                    -reach + 2.0 * reach * (i as f64 + 0.5) / grid_n as f64,
                    -reach + 2.0 * reach * (k as f64 + 0.5) / grid_n as f64,
                ];
                let d = u.dilation_derivative(x, t);
                max_derivative = max_derivative.max(d);
                if d < -1e-6 * (1.0 + max_derivative) {
                    return Err(Error::HypothesisViolation(format!(
                        "dilation derivative is negative ({d:.3e}) at x = ({:.4}, {:.4}), t = {t:.4}",
                        x[0], x[1]
                    )));
                }
            }
        }
    }

    let radii = [w_minus / 16.0, w_minus / 8.0, w_minus / 4.0];
    let rings = (x_resolution / 8).max(4);
    let angles = (x_resolution / 2).max(12);
    let n_theta = 16usize;
    let n_rho = x_resolution;

    let mut best: Option<(f64, f64, Vec<(f64, [f64; 2])>)> = None; // (c_u, r, centers)
    for &radius in &radii {
        let mut per_t_centers = Vec::with_capacity(t_grid.len());
        let mut c_for_radius = f64::INFINITY;
        let mut radius_ok = true;
        for &t in &t_grid {
            // Candidate centers: polar grid clipped so the ball stays in the
            // open unit cell (-1/2, 1/2)^2.
            let mut best_center: Option<([f64; 2], f64)> = None;
            for a in 0..n_theta {
                let th = TAU * a as f64 / n_theta as f64;
                let (c_th, s_th) = (th.cos(), th.sin());
                let axis_max = c_th.abs().max(s_th.abs());
                let rho_max = (0.5 - radius - 1e-9) / axis_max;
                // rho = 0 is shared across angles; scan it only once.
                let ri_start = if a == 0 { 0 } else { 1 };
                for ri in ri_start..n_rho {
                    let rho = rho_max * ri as f64 / (n_rho - 1) as f64;
                    let center = [rho * c_th, rho * s_th];
                    let mut c_min = f64::INFINITY;
                    for p in ball_samples(center, radius, rings, angles) {
                        let d = u.dilation_derivative(p, t);
                        c_min = c_min.min(d);
                        if c_min <= 0.0 {
                            break;
                        }
                    }
                    if c_min > 0.0 {
                        match best_center {
                            Some((_, c)) if c >= c_min => {}
                            _ => best_center = Some((center, c_min)),
                        }
                    }
                }
            }
            match best_center {
                Some((center, c_min)) => {
                    c_for_radius = c_for_radius.min(c_min);
                    per_t_centers.push((t, center));
                }
                None => {
                    radius_ok = false;
                    break;
                }
            }
        }
        if radius_ok && c_for_radius > 1e-9 {
            let score = c_for_radius * radius * radius;
            let replace = match &best {
                Some((c, r, _)) => score > *c * *r * *r,
                None => true,
            };
            if replace {
                best = Some((c_for_radius, radius, per_t_centers));
            }
        }
    }

    match best {
        Some((c_u, ball_radius, centers)) => Ok(HypothesisCertificate {
            c_u,
            ball_radius,
            centers,
        }),
        None => Err(Error::HypothesisViolation(format!(
            "no positive dilation-derivative constant found on any candidate ball \
             (t_resolution = {t_resolution}, x_resolution = {x_resolution})"
        ))),
    }
}

/// Re-check a certificate against fresh, finer ball sampling.
///
/// Independent of the search path: draws `checks` quasi-random points in
/// each verified ball and requires the finite-difference derivative to
/// dominate `c_u` up to `tolerance`.
pub fn validate_certificate(
    u: &SingleSitePotential,
    cert: &HypothesisCertificate,
    checks: usize,
    tolerance: f64,
) -> Result<()> {
    for &(t, center) in &cert.centers {
        let mut stream = rng::SplitMix64::new(rng::derive_seed(0xCE87, &[t.to_bits()]));
        for _ in 0..checks {
            // Uniform in the disc by rejection from the bounding square.
            let p = loop {
                let dx = stream.uniform(-cert.ball_radius, cert.ball_radius);
                let dy = stream.uniform(-cert.ball_radius, cert.ball_radius);
                if dx * dx + dy * dy <= cert.ball_radius * cert.ball_radius {
                    break [center[0] + dx, center[1] + dy];
                }
            };
            let d = u.dilation_derivative(p, t);
            if d < cert.c_u - tolerance {
                return Err(Error::HypothesisViolation(format!(
                    "certificate fails re-check: derivative {d:.6e} < c_u {:.6e} at \
                     t = {t:.4}, x = ({:.4}, {:.4})",
                    cert.c_u, p[0], p[1]
                )));
            }
        }
        if center[0].abs() + cert.ball_radius > 0.5 || center[1].abs() + cert.ball_radius > 0.5 {
            return Err(Error::HypothesisViolation(
                "certificate ball is not contained in the unit cell".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hat() -> SingleSitePotential {
        make_builtin_potential(PotentialKind::Hat)
    }

    fn bump() -> SingleSitePotential {
        make_builtin_potential(PotentialKind::SmoothBump)
    }

    fn dist() -> DisorderDistribution {
        DisorderDistribution::uniform(0.2, 0.4).unwrap()
    }

    #[test]
    fn builtin_pointwise_values() {
        assert_eq!(hat().evaluate([0.0, 0.0]), 1.0);
        assert_eq!(hat().evaluate([1.5, 0.0]), 0.0);
        let e_inv = (-1.0f64).exp();
        assert!((bump().evaluate([0.0, 0.0]) - e_inv).abs() < 1e-15);
        assert_eq!(bump().evaluate([0.0, 1.0]), 0.0);
    }

    #[test]
    fn builtin_shapes_validate() {
        hat().validate_shape(64).unwrap();
        bump().validate_shape(64).unwrap();
    }

    #[test]
    fn sup_bound_values() {
        assert_eq!(hat().breather_sup_bound(), 1.0);
        assert!((bump().breather_sup_bound() - (-1.0f64).exp()).abs() < 1e-15);
        let wide = SingleSitePotential::custom(|_| 3.0, 2.5, 3.0);
        assert_eq!(wide.breather_sup_bound(), 27.0);
    }

    #[test]
    fn disorder_sample_support_and_determinism() {
        let d = dist();
        let s = sample_disorder(&d, 2.0, 42);
        assert_eq!(s.len(), 4);
        for (_, &v) in s.iter() {
            assert!((0.2..=0.4).contains(&v));
        }
        let s2 = sample_disorder(&d, 2.0, 42);
        for ((k1, v1), (k2, v2)) in s.iter().zip(s2.iter()) {
            assert_eq!(k1, k2);
            assert_eq!(v1.to_bits(), v2.to_bits());
        }
    }

    #[test]
    fn disorder_sample_law_of_large_numbers() {
        // 256 i.i.d. uniform values on [0.2, 0.4]: Var(mean) = 0.2^2/12/256,
        // so sigma ~ 0.0036 and 0.02 is a 5.5-sigma allowance.
        let s = sample_disorder(&dist(), 16.0, 7);
        assert_eq!(s.len(), 256);
        let mean: f64 = s.iter().map(|(_, v)| v).sum::<f64>() / s.len() as f64;
        assert!((mean - 0.3).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn breather_values_on_lattice() {
        let u = hat();
        let s = DisorderSample::constant(2.0, 0.25);
        // At a lattice site the local bump contributes u(0) = 1 and the
        // neighbors are out of range (0.25 * 1 < distance 1).
        assert!((evaluate_breather(&u, &s, [0.0, 0.0]) - 1.0).abs() < 1e-15);
        // Midpoint between sites: distance 0.5 > 0.25 from every site.
        assert_eq!(evaluate_breather(&u, &s, [0.5, 0.0]), 0.0);
        // Distance 0.2 from one site with dilation 0.4: 1 - 0.2/0.4 = 0.5.
        let s2 = DisorderSample::constant(2.0, 0.4);
        assert!((evaluate_breather(&u, &s2, [0.2, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn breather_respects_sup_bound() {
        let u = hat();
        let d = dist();
        let s = sample_disorder(&d, 4.0, 11);
        let bound = u.breather_sup_bound();
        let mut stream = rng::SplitMix64::new(5);
        for _ in 0..500 {
            let x = [stream.uniform(0.0, 4.0), stream.uniform(0.0, 4.0)];
            let v = evaluate_breather(&u, &s, x);
            assert!(v >= 0.0 && v <= bound + 1e-12, "v = {v}");
        }
    }

    #[test]
    fn breather_is_periodic() {
        let u = hat();
        let s = sample_disorder(&dist(), 2.0, 3);
        let a = evaluate_breather(&u, &s, [0.3, 1.7]);
        let b = evaluate_breather(&u, &s, [0.3 + 2.0, 1.7 - 2.0]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hat_certificate_positive() {
        let cert = verify_hypotheses(&hat(), &dist(), 16, 24).unwrap();
        assert!(cert.c_u > 0.0);
        // The hat derivative grows toward the support edge, so the largest
        // catalog radius w_-/4 wins the c_u * r^2 score. Direct evaluation of
        // the derivative |x|/t^2 on balls of that radius bounds c_u by
        // (t - 2r)/t^2, which stays below 2.5 = 1/w_- and above 1 on the grid.
        assert!((cert.ball_radius - 0.05).abs() < 1e-12);
        assert!(cert.c_u > 1.0 && cert.c_u < 2.5, "c_u = {}", cert.c_u);
        validate_certificate(&hat(), &cert, 200, 1e-6).unwrap();
    }

    #[test]
    fn hat_derivative_matches_closed_form() {
        // d/dt (1 - |x|/t) = |x|/t^2 inside the support.
        let u = hat();
        for &(x, t) in &[(0.15, 0.2), (0.1, 0.3), (0.25, 0.4)] {
            let fd = u.dilation_derivative([x, 0.0], t);
            let exact = x / (t * t);
            assert!((fd - exact).abs() < 1e-6, "fd = {fd}, exact = {exact}");
        }
    }

    #[test]
    fn bump_certificate_positive_and_valid() {
        let cert = verify_hypotheses(&bump(), &dist(), 16, 24).unwrap();
        assert!(cert.c_u > 0.0);
        validate_certificate(&bump(), &cert, 200, 1e-6).unwrap();
    }

    #[test]
    fn bump_derivative_on_reference_ball() {
        // Closed form: d/dt u(x/t) = u(x/t) * 2 t |x|^2 / (t^2 - |x|^2)^2.
        // On the ball of radius w_-/8 around |x0| = 3 w_-/8 the minimum over
        // t in [0.2, 0.4] sits at t = 0.4, |x| = w_-/4 = 0.05.
        let u = bump();
        let t = 0.4;
        let x = 0.05;
        let s2: f64 = (x / t) * (x / t);
        let exact = (-1.0 / (1.0 - s2)).exp() * 2.0 * t * x * x / ((t * t - x * x) * (t * t - x * x));
        let fd = u.dilation_derivative([x, 0.0], t);
        assert!((fd - exact).abs() < 1e-7 * exact.max(1.0), "fd = {fd}, exact = {exact}");
        assert!((exact - 0.0292).abs() < 1e-3, "reference-ball floor moved: {exact}");
    }

    #[test]
    fn indicator_potential_rejected() {
        let indicator = SingleSitePotential::custom(
            |x| {
                if x[0] * x[0] + x[1] * x[1] < 1.0 {
                    1.0
                } else {
                    0.0
                }
            },
            1.0,
            1.0,
        );
        let err = verify_hypotheses(&indicator, &dist(), 16, 24).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)), "{err}");
    }

    #[test]
    fn certified_potentials_are_monotone_in_dilation() {
        let d = dist();
        for u in [hat(), bump()] {
            let mut stream = rng::SplitMix64::new(17);
            for _ in 0..100 {
                let x = [stream.uniform(-0.5, 0.5), stream.uniform(-0.5, 0.5)];
                let t = stream.uniform(d.omega_minus, d.omega_plus);
                assert!(u.dilation_derivative(x, t) >= -1e-9);
            }
        }
    }

    #[test]
    fn certificate_stable_under_resolution_doubling() {
        let c1 = verify_hypotheses(&hat(), &dist(), 16, 24).unwrap();
        let c2 = verify_hypotheses(&hat(), &dist(), 16, 48).unwrap();
        let rel = (c1.c_u - c2.c_u).abs() / c2.c_u;
        assert!(rel < 0.2, "c_u moved by {rel:.3} under doubling");
    }

    #[test]
    fn density_validates() {
        dist().validate_numerically(512).unwrap();
        assert!((dist().density_sup() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_json_schema() {
        let cert = HypothesisCertificate {
            c_u: 1.5,
            ball_radius: 0.05,
            centers: vec![(0.2, [0.1, 0.0]), (0.4, [0.2, 0.0])],
        };
        let js = serde_json::to_value(cert.to_json()).unwrap();
        assert!(js["c_u"].is_number());
        assert!(js["r"].is_number());
        assert_eq!(js["centers"].as_array().unwrap().len(), 2);
        assert_eq!(js["centers"][0].as_array().unwrap().len(), 3);
    }
}
