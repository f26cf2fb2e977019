//! Single-particle analytics of the kicked Ising chain.
//!
//! Parameters are the angles `(J, g, h)` of one Floquet period
//! `F = exp(iJ Σ Z_j Z_{j+1}) · Π_j exp(i g X_j) exp(i h Z_j)`. Everything here
//! except [`ModelParams`] itself requires the integrable case `h = 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance used to decide that a parameter point sits on a critical line.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Default distance from `k = 0, π` below which analytic limits are returned.
pub const K_GUARD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} = {value} is outside [0, π/2]")]
    OutOfQuadrant { name: &'static str, value: f64 },
    #[error("parameter {name} is not finite")]
    NotFinite { name: &'static str },
    #[error("integrable analytics require h = 0 (got h = {0})")]
    NonIntegrable(f64),
    #[error("momentum k = {0} outside [0, π]")]
    BadMomentum(f64),
    #[error("cos φ = {0} outside [-1, 1]")]
    DispersionRange(f64),
    #[error("degenerate Bloch axis at k = {0} (sin φ_k ≈ 0)")]
    DegenerateAxis(f64),
    #[error("phase-shift denominator vanishes at k = {0}")]
    SingularPhaseShift(f64),
    #[error("(J, g) = ({0}, {1}) lies on a critical line")]
    Critical(f64, f64),
}

pub type ModelResult<T> = Result<T, ModelError>;

/// Circuit couplings: Ising angle `j`, transverse kick `g`, longitudinal kick `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub j: f64,
    pub g: f64,
    pub h: f64,
}

impl ModelParams {
    /// Validated constructor; `J` and `g` must lie in `[0, π/2]`.
    pub fn new(j: f64, g: f64, h: f64) -> ModelResult<Self> {
        for (name, value) in [("J", j), ("g", g), ("h", h)] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name });
            }
        }
        // a few ulps of slack so that e.g. π/2 - 0.31 + 0.31 round trips
        let hi = FRAC_PI_2 * (1.0 + 1e-15);
        for (name, value) in [("J", j), ("g", g)] {
            if !(0.0..=hi).contains(&value) {
                return Err(ModelError::OutOfQuadrant { name, value });
            }
        }
        Ok(Self { j, g, h })
    }

    /// Integrable point `h = 0`.
    pub fn integrable(j: f64, g: f64) -> ModelResult<Self> {
        Self::new(j, g, 0.0)
    }

    pub fn require_integrable(&self) -> ModelResult<()> {
        if self.h != 0.0 {
            Err(ModelError::NonIntegrable(self.h))
        } else {
            Ok(())
        }
    }

    /// `2 tan²J`, the value of κ(0).
    pub fn kappa_prefactor(&self) -> f64 {
        2.0 * self.j.tan().powi(2)
    }

    pub fn is_critical(&self) -> bool {
        (self.j - self.g).abs() < CRITICAL_TOL || (self.j + self.g - FRAC_PI_2).abs() < CRITICAL_TOL
    }
}

/// Bloch-wave data at one momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPoint {
    pub k: f64,
    pub phi: f64,
    pub eta: f64,
    pub xi: f64,
    pub rho: C64,
    pub c: C64,
}

/// Quasienergy of an edge mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Zero,
    Pi,
}

impl EdgeKind {
    pub fn quasienergy(self) -> f64 {
        match self {
            EdgeKind::Zero => 0.0,
            EdgeKind::Pi => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMode {
    pub kind: EdgeKind,
    /// Decay ratio per unit cell, `|λ| < 1`.
    pub lambda: f64,
    /// `-1 / ln|λ|`; zero for a perfectly localized mode.
    pub loc_length: f64,
    /// Boundary weight `|C_e|²`, filled in by [`crate::majorana::edge_modes_with_weights`].
    pub amplitude_sq: Option<f64>,
}

impl EdgeMode {
    pub fn quasienergy(&self) -> f64 {
        self.kind.quasienergy()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseLabel {
    Trivial,
    ZeroMode,
    PiMode,
    ZeroAndPiMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInfo {
    pub label: PhaseLabel,
    /// Support of the continuous spectral density as closed intervals, negative band first.
    pub band_edges: Vec<(f64, f64)>,
}

fn check_k(k: f64) -> ModelResult<()> {
    if !(k.is_finite() && (-1e-15..=PI + 1e-15).contains(&k)) {
        return Err(ModelError::BadMomentum(k));
    }
    Ok(())
}

fn cos_phi(p: &ModelParams, k: f64) -> f64 {
    let (s2j, c2j) = (2.0 * p.j).sin_cos();
    let (s2g, c2g) = (2.0 * p.g).sin_cos();
    c2j * c2g + s2j * s2g * k.cos()
}

/// Quasienergy `φ_k ∈ [0, π]`.
pub fn dispersion(p: &ModelParams, k: f64) -> ModelResult<f64> {
    p.require_integrable()?;
    if !k.is_finite() {
        return Err(ModelError::BadMomentum(k));
    }
    let c = cos_phi(p, k);
    if c.abs() > 1.0 + 1e-12 {
        return Err(ModelError::DispersionRange(c));
    }
    // half-angle forms keep full relative precision near φ = 0 and φ = π
    let s = (2.0 * p.j).sin() * (2.0 * p.g).sin();
    if c >= 0.0 {
        let x = (p.j - p.g).sin().powi(2) + s * (0.5 * k).sin().powi(2);
        Ok(2.0 * x.clamp(0.0, 1.0).sqrt().asin())
    } else {
        let x = (p.j + p.g).cos().powi(2) + s * (0.5 * k).cos().powi(2);
        Ok(PI - 2.0 * x.clamp(0.0, 1.0).sqrt().asin())
    }
}

/// Continuous band support `±[lo, hi]` in quasienergy.
pub fn band_edges(p: &ModelParams) -> Vec<(f64, f64)> {
    let lo = 2.0 * (p.j - p.g).abs();
    let s = p.j + p.g;
    let hi = if s < FRAC_PI_2 { 2.0 * s } else { 2.0 * PI - 2.0 * s };
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    vec![(-hi, -lo), (lo, hi)]
}

/// Analytic `ξ` at `k → 0` (`at_pi = false`) or `k → π`.
fn xi_limit(p: &ModelParams, at_pi: bool) -> ModelResult<f64> {
    // n_y at the band edge is -sin(2(g-J))/|.| resp. -sin(2(J+g))/|.|
    let s = if at_pi { -(2.0 * (p.j + p.g)).sin() } else { -(2.0 * (p.g - p.j)).sin() };
    if s.abs() < CRITICAL_TOL {
        return Err(ModelError::DegenerateAxis(if at_pi { PI } else { 0.0 }));
    }
    Ok(FRAC_PI_2.copysign(s))
}

/// Bloch-wave evaluator with a configurable endpoint guard.
#[derive(Debug, Clone, Copy)]
pub struct Bloch {
    params: ModelParams,
    k_guard: f64,
}

impl Bloch {
    pub fn new(params: ModelParams) -> ModelResult<Self> {
        params.require_integrable()?;
        Ok(Self { params, k_guard: K_GUARD })
    }

    pub fn with_k_guard(mut self, eps: f64) -> Self {
        self.k_guard = eps;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn endpoint(&self, k: f64) -> Option<bool> {
        if k < self.k_guard {
            Some(false)
        } else if PI - k < self.k_guard {
            Some(true)
        } else {
            None
        }
    }

    /// Unit rotation axis `n̂_k` of the 2×2 Bloch matrix.
    pub fn axis_vector(&self, k: f64) -> ModelResult<[f64; 3]> {
        check_k(k)?;
        let p = &self.params;
        let phi = dispersion(p, k)?;
        let sphi = phi.sin();
        if sphi < 1e-12 {
            return Err(ModelError::DegenerateAxis(k));
        }
        let s2j = (2.0 * p.j).sin();
        let (s2g, c2g) = (2.0 * p.g).sin_cos();
        let sk = k.sin();
        let f = -1.0 / sphi;
        // c2j s2g − s2j c2g cos k without cancellation at small k
        let ny = (2.0 * (p.g - p.j)).sin() + 2.0 * s2j * c2g * (0.5 * k).sin().powi(2);
        Ok([f * s2j * c2g * sk, f * ny, f * s2j * s2g * sk])
    }

    /// Polar and azimuthal angles `(η_k, ξ_k)`; analytic limits within the guard of `0, π`.
    pub fn axis(&self, k: f64) -> ModelResult<(f64, f64)> {
        check_k(k)?;
        if let Some(at_pi) = self.endpoint(k) {
            return Ok((FRAC_PI_2, xi_limit(&self.params, at_pi)?));
        }
        let n = self.axis_vector(k)?;
        Ok((n[0].hypot(n[1]).atan2(n[2]), n[1].atan2(n[0])))
    }

    /// Boundary phase shift `ρ_k`, unit modulus.
    pub fn phase_shift(&self, k: f64) -> ModelResult<C64> {
        check_k(k)?;
        if let Some(at_pi) = self.endpoint(k) {
            return Ok(C64::from_polar(1.0, xi_limit(&self.params, at_pi)?));
        }
        let phi = dispersion(&self.params, k)?;
        let (eta, xi) = self.axis(k)?;
        Ok(rho_from(&self.params, phi, eta, xi, k)?)
    }

    /// `C_k = sin(η/2) e^{iξ} − cos(η/2) ρ_k`, minus the first component of the
    /// normalized boundary eigenfunction.
    pub fn boundary_coefficient(&self, k: f64) -> ModelResult<C64> {
        Ok(self.point(k)?.c)
    }

    pub fn point(&self, k: f64) -> ModelResult<BlochPoint> {
        check_k(k)?;
        let phi = dispersion(&self.params, k)?;
        let (eta, xi) = self.axis(k)?;
        if let Some(at_pi) = self.endpoint(k) {
            let rho = C64::from_polar(1.0, xi_limit(&self.params, at_pi)?);
            return Ok(BlochPoint { k, phi, eta, xi, rho, c: C64::new(0.0, 0.0) });
        }
        let rho = rho_from(&self.params, phi, eta, xi, k)?;
        let c = C64::from_polar((eta / 2.0).sin(), xi) - rho * (eta / 2.0).cos();
        Ok(BlochPoint { k, phi, eta, xi, rho, c })
    }
}

fn rho_from(p: &ModelParams, phi: f64, eta: f64, xi: f64, k: f64) -> ModelResult<C64> {
    let (s2g, c2g) = (2.0 * p.g).sin_cos();
    let omega = C64::from_polar((eta / 2.0).tan(), xi);
    let e = C64::from_polar(1.0, phi) - c2g;
    let den = e + omega * s2g;
    if den.norm() < 1e-14 {
        return Err(ModelError::SingularPhaseShift(k));
    }
    Ok((e * omega - s2g) / den)
}

/// The 2×2 Bloch matrix `M_k`, with `M_k |+⟩_k = e^{iφ_k} |+⟩_k`.
pub fn bloch_matrix(p: &ModelParams, k: f64) -> [[C64; 2]; 2] {
    let (s2j, c2j) = (2.0 * p.j).sin_cos();
    let (s2g, c2g) = (2.0 * p.g).sin_cos();
    let em = C64::from_polar(1.0, -k);
    let ep = C64::from_polar(1.0, k);
    [[c2j * c2g + s2j * s2g * em, -c2j * s2g + s2j * c2g * em], [c2j * s2g - s2j * c2g * ep, c2j * c2g + s2j * s2g * ep]]
}

pub fn bloch_axis(p: &ModelParams, k: f64) -> ModelResult<(f64, f64)> {
    Bloch::new(*p)?.axis(k)
}

pub fn phase_shift(p: &ModelParams, k: f64) -> ModelResult<C64> {
    Bloch::new(*p)?.phase_shift(k)
}

pub fn boundary_coefficient(p: &ModelParams, k: f64) -> ModelResult<C64> {
    Bloch::new(*p)?.boundary_coefficient(k)
}

/// Edge-mode decay ratios `λ_0 = tan g / tan J`, `λ_π = −1/(tan g tan J)`.
pub fn edge_lambda(p: &ModelParams, kind: EdgeKind) -> f64 {
    let (tg, tj) = (p.g.tan(), p.j.tan());
    match kind {
        EdgeKind::Zero => tg / tj,
        EdgeKind::Pi => -1.0 / (tg * tj),
    }
}

/// Edge modes present at `(J, g)`; ordered zero mode first.
pub fn edge_modes(p: &ModelParams) -> ModelResult<Vec<EdgeMode>> {
    p.require_integrable()?;
    let mut out = Vec::new();
    for kind in [EdgeKind::Zero, EdgeKind::Pi] {
        let lambda = edge_lambda(p, kind);
        if lambda.is_finite() && lambda.abs() < 1.0 {
            let ln = lambda.abs().ln();
            let loc_length = if ln.is_finite() { -1.0 / ln } else { 0.0 };
            out.push(EdgeMode { kind, lambda, loc_length, amplitude_sq: None });
        }
    }
    Ok(out)
}

pub fn phase_label(p: &ModelParams) -> ModelResult<PhaseInfo> {
    p.require_integrable()?;
    if p.is_critical() {
        return Err(ModelError::Critical(p.j, p.g));
    }
    let zero = p.g < p.j;
    let pi = p.g > FRAC_PI_2 - p.j;
    let label = match (zero, pi) {
        (false, false) => PhaseLabel::Trivial,
        (true, false) => PhaseLabel::ZeroMode,
        (false, true) => PhaseLabel::PiMode,
        (true, true) => PhaseLabel::ZeroAndPiMode,
    };
    Ok(PhaseInfo { label, band_edges: band_edges(p) })
}
