//! Majorana linear dynamics of the open environment chain.
//!
//! A period acts on the `2L` Majoranas as the rotation `O = O_J · O_g`, with
//! `O_g` rotating pairs `(2j, 2j+1)` by `2g` and `O_J` rotating `(2j+1, 2j+2)`
//! by `2J` (0-based). The first and last Majoranas are left alone by `O_J`.
//! The memory kernel is `κ(τ) = 2 tan²J [O^τ]_{00}`.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use ndarray_linalg::{Determinant, Eigh, UPLO};
use thiserror::Error;

use crate::model::{self, EdgeKind, EdgeMode, ModelError, ModelParams};
use crate::quad::{self, QuadError};

#[derive(Debug, Error)]
pub enum MajoranaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("need at least 2 sites (got {0})")]
    TooFewSites(usize),
    #[error("map is not orthogonal (residual {0:e})")]
    NotOrthogonal(f64),
    #[error("conjugate-pair structure broken (residual {0:e})")]
    PairStructure(f64),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("2 tan²J is not finite at J = {0}")]
    SingularPrefactor(f64),
}

pub type MajoranaResult<T> = Result<T, MajoranaError>;

fn linalg<E: std::fmt::Display>(e: E) -> MajoranaError {
    MajoranaError::Linalg(e.to_string())
}

/// Apply `Oᵀ` in place using the factored rotations, O(L) per call.
fn apply_transpose(v: &mut [f64], cg: f64, sg: f64, cj: f64, sj: f64) {
    let n = v.len();
    let mut a = 1;
    while a + 1 < n {
        let (x, y) = (v[a], v[a + 1]);
        v[a] = cj * x + sj * y;
        v[a + 1] = -sj * x + cj * y;
        a += 2;
    }
    let mut a = 0;
    while a + 1 < n {
        let (x, y) = (v[a], v[a + 1]);
        v[a] = cg * x + sg * y;
        v[a + 1] = -sg * x + cg * y;
        a += 2;
    }
}

/// Dense single-period Majorana map of an `L`-site open chain.
#[derive(Debug, Clone)]
pub struct MajoranaMap {
    sites: usize,
    params: ModelParams,
    matrix: Array2<f64>,
}

pub fn build_majorana_map(sites: usize, params: &ModelParams) -> MajoranaResult<MajoranaMap> {
    params.require_integrable()?;
    if sites < 2 {
        return Err(MajoranaError::TooFewSites(sites));
    }
    let n = 2 * sites;
    let rot = |c: f64, s: f64, start: usize, stop: usize| {
        let mut m = Array2::<f64>::eye(n);
        let mut a = start;
        while a + 1 < stop {
            m[[a, a]] = c;
            m[[a, a + 1]] = -s;
            m[[a + 1, a]] = s;
            m[[a + 1, a + 1]] = c;
            a += 2;
        }
        m
    };
    let (sg, cg) = (2.0 * params.g).sin_cos();
    let (sj, cj) = (2.0 * params.j).sin_cos();
    let og = rot(cg, sg, 0, n);
    let oj = rot(cj, sj, 1, n - 1);
    Ok(MajoranaMap { sites, params: *params, matrix: oj.dot(&og) })
}

impl MajoranaMap {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// `max |OᵀO − I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let g = self.matrix.t().dot(&self.matrix) - Array2::<f64>::eye(self.matrix.nrows());
        g.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn determinant(&self) -> MajoranaResult<f64> {
        self.matrix.det().map_err(linalg)
    }
}

/// One invariant subspace of the map: a conjugate pair `e^{±iφ}`, or a
/// self-paired eigenvalue `±1`, possibly degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajoranaMode {
    pub quasienergy: f64,
    /// `|ψ_1|²` summed over the subspace.
    pub weight: f64,
    /// Real dimension of the subspace.
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub modes: Vec<MajoranaMode>,
    basis: Array2<f64>,
    ranges: Vec<(usize, usize)>,
}

impl ModeDecomposition {
    pub fn quasienergies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.quasienergy).collect()
    }

    /// Orthonormal real basis (columns) of the `i`-th invariant subspace.
    pub fn subspace(&self, i: usize) -> ndarray::ArrayView2<'_, f64> {
        let (a, b) = self.ranges[i];
        self.basis.slice(s![.., a..b])
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// `Σ_m |C_m|² cos(φ_m τ)`, equal to `[O^τ]_{00}`.
    pub fn mode_sum(&self, tau: usize) -> f64 {
        self.modes.iter().map(|m| m.weight * (m.quasienergy * tau as f64).cos()).sum()
    }

    /// Boundary weight carried by modes within `tol` of quasienergy `phi`.
    pub fn weight_near(&self, phi: f64, tol: f64) -> f64 {
        self.modes.iter().filter(|m| (m.quasienergy - phi).abs() < tol).map(|m| m.weight).sum()
    }
}

const CLUSTER_TOL: f64 = 1e-10;

pub fn diagonalize_map(map: &MajoranaMap) -> MajoranaResult<ModeDecomposition> {
    let o = &map.matrix;
    let res = map.orthogonality_residual();
    if res > 1e-10 {
        return Err(MajoranaError::NotOrthogonal(res));
    }
    // invariant planes of a rotation are the eigenspaces of its symmetric part
    let sym = (o + &o.t()) * 0.5;
    let (vals, vecs) = sym.eigh(UPLO::Lower).map_err(linalg)?;
    let n = vals.len();
    let mut ranges = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || vals[i] - vals[i - 1] > CLUSTER_TOL {
            ranges.push((start, i));
            start = i;
        }
    }
    let mut modes = Vec::with_capacity(ranges.len());
    for &(a, b) in &ranges {
        let q = vecs.slice(s![.., a..b]);
        let d = (b - a) as f64;
        let bm = q.t().dot(&o.dot(&q));
        let resid = (&o.dot(&q) - &q.dot(&bm)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if resid > 1e-8 {
            return Err(MajoranaError::PairStructure(resid));
        }
        let anti = (&bm - &bm.t()) * 0.5;
        let sin = (anti.iter().map(|x| x * x).sum::<f64>() / d).sqrt();
        let cos = bm.diag().sum() / d;
        // the subspace must be a pure rotation by one angle
        let unit = (sin * sin + cos * cos - 1.0).abs();
        if unit > 1e-8 {
            return Err(MajoranaError::PairStructure(unit));
        }
        let weight = q.row(0).iter().map(|x| x * x).sum();
        modes.push(MajoranaMode { quasienergy: sin.atan2(cos), weight, multiplicity: b - a });
    }
    Ok(ModeDecomposition { modes, basis: vecs, ranges })
}

/// Memory kernel over `0..=tau_max` together with the edge-mode weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaKernel {
    pub tau_max: usize,
    pub values: Vec<f64>,
    pub edge_zero_sq: f64,
    pub edge_pi_sq: f64,
    pub prefactor: f64,
}

impl KappaKernel {
    /// Undamped edge contribution at lag `tau`.
    pub fn edge_part(&self, tau: usize) -> f64 {
        let sign = if tau % 2 == 0 { 1.0 } else { -1.0 };
        self.prefactor * (self.edge_zero_sq + sign * self.edge_pi_sq)
    }

    /// Kernel with the edge constants removed.
    pub fn continuum(&self) -> Vec<f64> {
        self.values.iter().enumerate().map(|(t, v)| v - self.edge_part(t)).collect()
    }
}

fn prefactor(params: &ModelParams) -> MajoranaResult<f64> {
    let p = params.kappa_prefactor();
    if !p.is_finite() || params.j.cos() < 1e-8 {
        return Err(MajoranaError::SingularPrefactor(params.j));
    }
    Ok(p)
}

/// `[O^τ]_{00}` for `τ = 0..=tau_max` on a chain of `sites` sites.
pub fn boundary_autocorrelation(params: &ModelParams, sites: usize, tau_max: usize) -> MajoranaResult<Vec<f64>> {
    params.require_integrable()?;
    if sites < 2 {
        return Err(MajoranaError::TooFewSites(sites));
    }
    let (sg, cg) = (2.0 * params.g).sin_cos();
    let (sj, cj) = (2.0 * params.j).sin_cos();
    let mut v = vec![0.0; 2 * sites];
    v[0] = 1.0;
    let mut out = Vec::with_capacity(tau_max + 1);
    for tau in 0..=tau_max {
        out.push(v[0]);
        if tau < tau_max {
            apply_transpose(&mut v, cg, sg, cj, sj);
        }
    }
    Ok(out)
}

/// κ(0..=tau_max) alone, exact through the light cone (`L = tau_max + 2`).
pub fn kappa_values(params: &ModelParams, tau_max: usize) -> MajoranaResult<Vec<f64>> {
    let pre = prefactor(params)?;
    let a = boundary_autocorrelation(params, tau_max + 2, tau_max)?;
    Ok(a.into_iter().map(|x| pre * x).collect())
}

pub fn kappa_exact(params: &ModelParams, tau_max: usize) -> MajoranaResult<KappaKernel> {
    let values = kappa_values(params, tau_max)?;
    let (mut edge_zero_sq, mut edge_pi_sq) = (0.0, 0.0);
    for m in edge_modes_with_weights(params)? {
        match m.kind {
            EdgeKind::Zero => edge_zero_sq = m.amplitude_sq.unwrap_or(0.0),
            EdgeKind::Pi => edge_pi_sq = m.amplitude_sq.unwrap_or(0.0),
        }
    }
    Ok(KappaKernel { tau_max, values, edge_zero_sq, edge_pi_sq, prefactor: prefactor(params)? })
}

/// Chain length beyond which a mode with decay ratio `|λ| ≤ 0.5` is converged.
const SHORT_EDGE_SITES: usize = 48;

/// Boundary weight `|C_e|²` of a semi-infinite-chain edge mode.
///
/// Strongly localized modes (`|λ| ≤ 1/2`) are read off a finite chain; otherwise
/// the decaying eigenvector of the real transfer matrix `T_φ` at `φ ∈ {0, π}`
/// gives `|C_e|² = (1 − λ²) p_0² / |p|²`.
pub fn edge_weight(params: &ModelParams, mode: &EdgeMode) -> MajoranaResult<f64> {
    if mode.lambda.abs() <= 0.5 {
        return edge_weight_finite(params, mode.kind, SHORT_EDGE_SITES);
    }
    let e = match mode.kind {
        EdgeKind::Zero => 1.0,
        EdgeKind::Pi => -1.0,
    };
    let (s2j, c2j) = (2.0 * params.j).sin_cos();
    let (s2g, c2g) = (2.0 * params.g).sin_cos();
    let cot = c2g / s2g;
    let t00 = s2g * e / s2j;
    let t01 = (c2j - c2g * e) / s2j;
    let t11 = (e / s2g - 2.0 * c2j * cot + e * c2g * cot) / s2j;
    let lam = mode.lambda;
    let p1 = [t01, lam - t00];
    let p2 = [lam - t11, t01];
    let n1 = p1[0] * p1[0] + p1[1] * p1[1];
    let n2 = p2[0] * p2[0] + p2[1] * p2[1];
    let (p, n) = if n1 >= n2 { (p1, n1) } else { (p2, n2) };
    Ok((1.0 - lam * lam) * p[0] * p[0] / n)
}

/// Edge weight from the modes of an `L`-site chain within `1e-6` of the edge quasienergy.
pub fn edge_weight_finite(params: &ModelParams, kind: EdgeKind, sites: usize) -> MajoranaResult<f64> {
    let dec = diagonalize_map(&build_majorana_map(sites, params)?)?;
    Ok(dec.weight_near(kind.quasienergy(), 1e-6))
}

pub fn edge_modes_with_weights(params: &ModelParams) -> MajoranaResult<Vec<EdgeMode>> {
    let mut modes = model::edge_modes(params)?;
    for m in modes.iter_mut() {
        m.amplitude_sq = Some(edge_weight(params, m)?);
    }
    Ok(modes)
}

/// κ(τ) from the momentum integral `∫_0^π dk/π |C_k|² cos(φ_k τ)` plus edge terms.
pub fn kappa_quadrature(params: &ModelParams, tau: usize) -> MajoranaResult<f64> {
    let pre = prefactor(params)?;
    let mut bloch = model::Bloch::new(*params)?;
    if params.is_critical() {
        // no endpoint limit exists; Kronrod nodes are interior anyway
        bloch = bloch.with_k_guard(0.0);
    }
    let t = tau as f64;
    let f = |k: f64| match bloch.point(k) {
        Ok(pt) => pt.c.norm_sqr() * (pt.phi * t).cos(),
        Err(_) => f64::NAN,
    };
    let (integral, _) = quad::integrate(f, 0.0, PI, 1e-8, 1e-10, 4000)?;
    let mut total = integral / PI;
    for m in edge_modes_with_weights(params)? {
        let w = m.amplitude_sq.unwrap_or(0.0);
        total += match m.kind {
            EdgeKind::Zero => w,
            EdgeKind::Pi => {
                if tau % 2 == 0 {
                    w
                } else {
                    -w
                }
            }
        };
    }
    Ok(pre * total)
}

/// Default spectral window in periods.
pub const SPECTRAL_WINDOW: usize = 8192;
/// Fraction of the window covered by the cosine taper.
pub const TAPER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub omega: Vec<f64>,
    pub jr: Vec<f64>,
    pub ji: Vec<f64>,
    /// Delta weights at ω = 0 and ω = π.
    pub delta_zero: f64,
    pub delta_pi: f64,
    pub window: usize,
    pub taper_fraction: f64,
    /// `max |JR|` outside the band support (beyond `leakage_margin`), relative to `max |JR|`.
    pub leakage: f64,
    pub leakage_margin: f64,
    pub warnings: Vec<String>,
}

fn taper(tau: usize, window: usize, frac: f64) -> f64 {
    let start = (1.0 - frac) * window as f64;
    let x = tau as f64;
    if x < start {
        1.0
    } else {
        0.5 * (1.0 + (PI * (x - start) / (window as f64 - start)).cos())
    }
}

/// `JR(ω) = Σ_τ κ_c(|τ|) e^{iωτ}` and its principal-value cotangent transform
/// `JI(ω) = −2 Σ_{τ≥1} κ_c(τ) sin ωτ` on `n_omega` points of `(−π, π]`.
pub fn spectral_density(params: &ModelParams, n_omega: usize) -> MajoranaResult<SpectralDensity> {
    spectral_density_with_window(params, n_omega, SPECTRAL_WINDOW)
}

pub fn spectral_density_with_window(params: &ModelParams, n_omega: usize, window: usize) -> MajoranaResult<SpectralDensity> {
    let kernel = kappa_exact(params, window)?;
    let cont = kernel.continuum();
    let w: Vec<f64> = (0..window).map(|t| taper(t, window, TAPER_FRACTION) * cont[t]).collect();
    let omega: Vec<f64> = (0..n_omega).map(|m| -PI + 2.0 * PI * (m + 1) as f64 / n_omega as f64).collect();
    let mut jr = Vec::with_capacity(n_omega);
    let mut ji = Vec::with_capacity(n_omega);
    for &om in &omega {
        let (mut re, mut im) = (w[0], 0.0);
        for (t, wt) in w.iter().enumerate().skip(1) {
            let (s, c) = (om * t as f64).sin_cos();
            re += 2.0 * wt * c;
            im -= 2.0 * wt * s;
        }
        jr.push(re);
        ji.push(im);
    }
    let margin = 64.0 * 2.0 * PI / window as f64;
    let bands = model::band_edges(params);
    let inside = |om: f64| bands.iter().any(|&(lo, hi)| om >= lo - margin && om <= hi + margin);
    let peak = jr.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let outside = omega.iter().zip(&jr).filter(|(o, _)| !inside(**o)).fold(0.0f64, |m, (_, x)| m.max(x.abs()));
    let leakage = if peak > 0.0 { outside / peak } else { 0.0 };
    let mut warnings = Vec::new();
    if leakage > 1e-4 {
        let msg = format!("spectral window leakage {leakage:.2e} exceeds 1e-4 of peak");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(SpectralDensity {
        omega,
        jr,
        ji,
        delta_zero: kernel.prefactor * kernel.edge_zero_sq,
        delta_pi: kernel.prefactor * kernel.edge_pi_sq,
        window,
        taper_fraction: TAPER_FRACTION,
        leakage,
        leakage_margin: margin,
        warnings,
    })
}

/// Least-squares slope of `ln JR` against `ln |ω − edge|` over offsets in `[lo, hi]`
/// on the side of the edge given by `inward` (`+1` above, `−1` below).
pub fn band_edge_exponent(sd: &SpectralDensity, edge: f64, inward: f64, lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sd
        .omega
        .iter()
        .zip(&sd.jr)
        .filter_map(|(&om, &j)| {
            let d = inward * (om - edge);
            (d >= lo && d <= hi && j > 0.0).then(|| (d.ln(), j.ln()))
        })
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Log-log slope of the upper envelope of `|κ|` over `[lo, hi]`.
///
/// The envelope keeps the local maxima of `|κ(τ)|`, which removes the
/// oscillation at the band-edge frequencies.
pub fn tail_exponent(kappa: &[f64], lo: usize, hi: usize) -> Option<f64> {
    let a: Vec<f64> = kappa.iter().map(|x| x.abs()).collect();
    let pts: Vec<(f64, f64)> =
        (lo.max(1)..hi.min(a.len() - 1)).filter(|&t| a[t] >= a[t - 1] && a[t] >= a[t + 1] && a[t] > 0.0).map(|t| ((t as f64).ln(), a[t].ln())).collect();
    least_squares_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use std::f64::consts::FRAC_PI_4;

    fn p(j: f64, g: f64) -> ModelParams {
        ModelParams::integrable(j, g).unwrap()
    }

    #[test]
    fn map_examples() {
        let m = build_majorana_map(2, &p(0.0, 0.0)).unwrap();
        assert_eq!(m.matrix(), &Array2::<f64>::eye(4));
        let m = build_majorana_map(6, &p(0.31, 0.5)).unwrap();
        assert!(m.orthogonality_residual() < 1e-14);
        assert!((m.determinant().unwrap() - 1.0).abs() < 1e-12);
        let m = build_majorana_map(4, &p(0.0, 0.4)).unwrap();
        let o = m.matrix();
        for a in 0..8 {
            for b in 0..8 {
                if a / 2 != b / 2 {
                    assert_eq!(o[[a, b]], 0.0);
                }
            }
        }
        assert!(build_majorana_map(1, &p(0.3, 0.3)).is_err());
        assert!(build_majorana_map(4, &ModelParams::new(0.3, 0.3, 0.1).unwrap()).is_err());
    }

    #[test]
    fn factored_matches_dense() {
        let pp = p(0.31, 0.5);
        let m = build_majorana_map(12, &pp).unwrap();
        let mut v = vec![0.0; 24];
        v[0] = 1.0;
        let mut dense = Array1::from(v.clone());
        let (sg, cg) = (2.0 * pp.g).sin_cos();
        let (sj, cj) = (2.0 * pp.j).sin_cos();
        for _ in 0..9 {
            apply_transpose(&mut v, cg, sg, cj, sj);
            dense = m.matrix().t().dot(&dense);
        }
        for (a, b) in v.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_sites() {
        let dec = diagonalize_map(&build_majorana_map(5, &p(0.0, 0.4)).unwrap()).unwrap();
        assert_eq!(dec.modes.len(), 1);
        assert!((dec.modes[0].quasienergy - 0.8).abs() < 1e-12);
        assert_eq!(dec.modes[0].multiplicity, 10);
    }

    #[test]
    fn dephaser_kernel() {
        let k = kappa_exact(&p(FRAC_PI_4, FRAC_PI_4), 50).unwrap();
        assert!((k.values[0] - 2.0).abs() < 1e-14);
        assert!(k.values[1..].iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn taper_shape() {
        assert_eq!(taper(0, 100, 0.1), 1.0);
        assert_eq!(taper(89, 100, 0.1), 1.0);
        assert!((taper(95, 100, 0.1) - 0.5).abs() < 1e-12);
    }
}
