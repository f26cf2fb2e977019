//! Dense spin-basis oracles for finite open chains.
//!
//! Basis convention: site `j` is bit `j` of the basis index, bit 0 meaning `Z = +1`.
//! Folded single-spin index `x = 2·b⁺ + b⁻` orders the forward/backward pairs as
//! `(++, +−, −+, −−)`.

use std::io::{Read, Write};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::ModelParams;

pub const MAX_DENSE_SITES: usize = 14;
pub const MAX_IM_PERIODS: usize = 4;

const GOLDEN_MAGIC: &[u8; 4] = b"TEIM";
const GOLDEN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("dense chain limited to L ≤ {max} (got {l})")]
    TooManySites { l: usize, max: usize },
    #[error("chain needs at least one site")]
    NoSites,
    #[error("kernel requires h = 0 (got h = {0})")]
    NonIntegrable(f64),
    #[error("τ_max = {tau_max} beyond the light-cone bound {limit} for this L")]
    LightCone { tau_max: usize, limit: usize },
    #[error("IM tensor limited to 1 ≤ t ≤ {max} periods (got {t})")]
    BadPeriods { t: usize, max: usize },
    #[error("environment of {l} sites too short for t = {t} (need L ≥ t + 1)")]
    ShortEnvironment { l: usize, t: usize },
    #[error("folded IM has {got} entries, expected {want}")]
    BadLength { got: usize, want: usize },
    #[error("golden file: {0}")]
    Golden(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type SpinResult<T> = Result<T, SpinError>;

fn check_sites(l: usize) -> SpinResult<()> {
    if l == 0 {
        return Err(SpinError::NoSites);
    }
    if l > MAX_DENSE_SITES {
        return Err(SpinError::TooManySites { l, max: MAX_DENSE_SITES });
    }
    Ok(())
}

/// Single-site kick `exp(igX)·exp(ihZ)` in the `(↑, ↓)` basis.
pub fn kick_matrix(p: &ModelParams) -> [[C64; 2]; 2] {
    let (c, s) = (p.g.cos(), p.g.sin());
    let e = C64::from_polar(1.0, p.h);
    [[e * c, e.conj() * C64::new(0.0, s)], [e * C64::new(0.0, s), e.conj() * c]]
}

#[inline]
fn spin(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `z⁺` and `z⁻` of a folded index.
#[inline]
pub fn folded_spins(x: usize) -> (f64, f64) {
    (spin(x >> 1), spin(x & 1))
}

/// Folded kick `Kf[b][a] = K[b⁺,a⁺]·conj(K[b⁻,a⁻])`, acting on column vectors.
pub fn folded_kick(k: &[[C64; 2]; 2]) -> [[C64; 4]; 4] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for (b, row) in out.iter_mut().enumerate() {
        for (a, v) in row.iter_mut().enumerate() {
            *v = k[b >> 1][a >> 1] * k[b & 1][a & 1].conj();
        }
    }
    out
}

/// Folded Ising gate between two spins, `exp(iJ(z⁺₀z⁺₁ − z⁻₀z⁻₁))`.
pub fn folded_coupling(j: f64) -> [[C64; 4]; 4] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for (x0, row) in out.iter_mut().enumerate() {
        let (p0, m0) = folded_spins(x0);
        for (x1, v) in row.iter_mut().enumerate() {
            let (p1, m1) = folded_spins(x1);
            *v = C64::from_polar(1.0, j * (p0 * p1 - m0 * m1));
        }
    }
    out
}

/// Folded vector of a single-spin operator `O`, `v[(z⁺,z⁻)] = O[z⁺,z⁻]`.
pub fn fold_operator(o: &[[C64; 2]; 2]) -> [C64; 4] {
    [o[0][0], o[0][1], o[1][0], o[1][1]]
}

/// Folded functional `ρ ↦ Tr[O ρ]`, `w[(z⁺,z⁻)] = O[z⁻,z⁺]`.
pub fn fold_observable(o: &[[C64; 2]; 2]) -> [C64; 4] {
    [o[0][0], o[1][0], o[0][1], o[1][1]]
}

/// Factored one-period evolution `ψ ↦ Fψ` on an open chain.
#[derive(Debug, Clone)]
pub struct FloquetStepper {
    l: usize,
    kick: [[C64; 2]; 2],
    phases: Vec<C64>,
}

impl FloquetStepper {
    pub fn new(l: usize, p: &ModelParams) -> SpinResult<Self> {
        check_sites(l)?;
        let phases = (0..1usize << l)
            .map(|b| {
                let e: f64 = (0..l.saturating_sub(1)).map(|j| spin((b >> j) & 1) * spin((b >> (j + 1)) & 1)).sum();
                C64::from_polar(1.0, p.j * e)
            })
            .collect();
        Ok(Self { l, kick: kick_matrix(p), phases })
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        1 << self.l
    }

    pub fn step(&self, psi: &mut [C64]) {
        let k = &self.kick;
        for j in 0..self.l {
            let m = 1usize << j;
            for hi in (0..psi.len()).step_by(2 * m) {
                for i in hi..hi + m {
                    let (a, b) = (psi[i], psi[i + m]);
                    psi[i] = k[0][0] * a + k[0][1] * b;
                    psi[i + m] = k[1][0] * a + k[1][1] * b;
                }
            }
        }
        for (x, ph) in psi.iter_mut().zip(&self.phases) {
            *x *= ph;
        }
    }
}

/// Dense one-period unitary of an open chain.
#[derive(Debug, Clone)]
pub struct DenseFloquet {
    pub l: usize,
    pub u: Array2<C64>,
}

impl DenseFloquet {
    pub fn unitarity_residual(&self) -> f64 {
        let uh = self.u.t().mapv(|z| z.conj());
        let prod = uh.dot(&self.u);
        prod.indexed_iter().fold(0.0, |m, ((i, j), z)| {
            let target = if i == j { 1.0 } else { 0.0 };
            m.max((z - target).norm())
        })
    }
}

pub fn build_floquet(l: usize, p: &ModelParams) -> SpinResult<DenseFloquet> {
    let stepper = FloquetStepper::new(l, p)?;
    let n = stepper.dim();
    let mut u = Array2::zeros((n, n));
    let mut col = vec![C64::new(0.0, 0.0); n];
    for b in 0..n {
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        col[b] = C64::new(1.0, 0.0);
        stepper.step(&mut col);
        u.column_mut(b).iter_mut().zip(&col).for_each(|(d, s)| *d = *s);
    }
    Ok(DenseFloquet { l, u })
}

/// `Tr[F^{-t} Z_s F^t Z_s] / 2^L` for `t = 0..=t_max`.
///
/// Uses `Tr Z_s(t) = 0`, so only basis states with `z_s = +1` are propagated.
pub fn autocorrelation(l: usize, p: &ModelParams, site: usize, t_max: usize) -> SpinResult<Vec<f64>> {
    let stepper = FloquetStepper::new(l, p)?;
    assert!(site < l, "site {site} outside chain of {l}");
    let n = stepper.dim();
    let m = 1usize << site;
    let starts: Vec<usize> = (0..n).filter(|b| b & m == 0).collect();
    let per_state: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&b| {
            let mut psi = vec![C64::new(0.0, 0.0); n];
            psi[b] = C64::new(1.0, 0.0);
            let mut out = Vec::with_capacity(t_max + 1);
            for t in 0..=t_max {
                if t > 0 {
                    stepper.step(&mut psi);
                }
                out.push(psi.iter().enumerate().map(|(i, z)| spin((i >> site) & 1) * z.norm_sqr()).sum::<f64>());
            }
            out
        })
        .collect();
    let mut acc = vec![0.0; t_max + 1];
    for v in &per_state {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let norm = 2.0 / n as f64;
    Ok(acc.into_iter().map(|x| x * norm).collect())
}

/// Memory kernel from the edge-spin autocorrelation, `2tan²J · Tr[Z₁(τ)Z₁]/2^L`.
pub fn heisenberg_kappa(l: usize, p: &ModelParams, tau_max: usize) -> SpinResult<Vec<f64>> {
    if p.h != 0.0 {
        return Err(SpinError::NonIntegrable(p.h));
    }
    let limit = l.saturating_sub(2);
    if tau_max > limit {
        return Err(SpinError::LightCone { tau_max, limit });
    }
    let pref = p.kappa_prefactor();
    Ok(autocorrelation(l, p, 0, tau_max)?.into_iter().map(|c| pref * c).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzzSeries {
    pub values: Vec<f64>,
    /// 0-based index of the probed site.
    pub site: usize,
    /// Largest `t` at which the value equals the infinite-chain one.
    pub exact_up_to: usize,
}

impl CzzSeries {
    pub fn finite_size(&self) -> bool {
        self.values.len() > self.exact_up_to + 1
    }
}

/// `C_zz(t)` at the central site `⌈L/2⌉` (1-based).
pub fn czz_ed(l: usize, p: &ModelParams, t_max: usize) -> SpinResult<CzzSeries> {
    check_sites(l)?;
    let site = l.div_ceil(2) - 1;
    let exact_up_to = (l - 1) / 2;
    if t_max > exact_up_to {
        log::warn!("czz_ed: t_max = {t_max} exceeds light-cone bound {exact_up_to} for L = {l}; later values are finite-size");
    }
    let values = autocorrelation(l, p, site, t_max)?;
    Ok(CzzSeries { values, site, exact_up_to })
}

/// Influence matrix on `t` periods, 16 entries per period.
///
/// Entry layout: per period the digit `σ⁺ + 2s⁺ + 4σ⁻ + 8s⁻` (bit 1 meaning spin down),
/// periods ascending little-endian, so period 0 is the least significant digit.
/// `s` is the subsystem spin entering the coupling gate and `σ` the one leaving it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImTensor {
    pub t: usize,
    pub l: usize,
    pub params: ModelParams,
    pub data: Vec<C64>,
}

impl ImTensor {
    pub fn index(periods: &[[usize; 4]]) -> usize {
        periods.iter().rev().fold(0, |acc, &[sp, sgp, sm, sgm]| acc * 16 + (sgp + 2 * sp + 4 * sgm + 8 * sm))
    }

    /// Entry at per-period `[s⁺, σ⁺, s⁻, σ⁻]` bits.
    pub fn get(&self, periods: &[[usize; 4]]) -> C64 {
        assert_eq!(periods.len(), self.t);
        self.data[Self::index(periods)]
    }

    /// Embeds a folded (4 per period) IM; the coupling is diagonal so `s = σ` on each branch.
    pub fn from_folded(t: usize, l: usize, params: ModelParams, folded: &[C64]) -> SpinResult<Self> {
        let want = 1usize << (2 * t);
        if folded.len() != want {
            return Err(SpinError::BadLength { got: folded.len(), want });
        }
        let mut data = vec![C64::new(0.0, 0.0); 1usize << (4 * t)];
        let mut periods = vec![[0usize; 4]; t];
        for (x, v) in folded.iter().enumerate() {
            for (tau, slot) in periods.iter_mut().enumerate() {
                let f = (x >> (2 * tau)) & 3;
                let (bp, bm) = (f >> 1, f & 1);
                *slot = [bp, bp, bm, bm];
            }
            data[Self::index(&periods)] = *v;
        }
        Ok(Self { t, l, params, data })
    }

    /// Diagonal part (`s = σ` on both branches) as a folded IM.
    pub fn folded(&self) -> Vec<C64> {
        let mut periods = vec![[0usize; 4]; self.t];
        (0..1usize << (2 * self.t))
            .map(|x| {
                for (tau, slot) in periods.iter_mut().enumerate() {
                    let f = (x >> (2 * tau)) & 3;
                    *slot = [f >> 1, f >> 1, f & 1, f & 1];
                }
                self.get(&periods)
            })
            .collect()
    }

    /// Largest entry with `s ≠ σ` on some branch.
    pub fn off_diagonal_max(&self) -> f64 {
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                (0..self.t).any(|tau| {
                    let d = (i >> (4 * tau)) & 15;
                    (d & 1) != ((d >> 1) & 1) || ((d >> 2) & 1) != ((d >> 3) & 1)
                })
            })
            .fold(0.0, |m, (_, z)| m.max(z.norm()))
    }

    /// Contracts with a subsystem spin kicked by `kick` each period, starting from `rho`
    /// and measuring `obs` after the last period.
    pub fn contract(&self, kick: &[[C64; 2]; 2], rho: &[[C64; 2]; 2], obs: &[[C64; 2]; 2]) -> C64 {
        contract_folded(&self.folded(), self.t, kick, rho, obs)
    }

    /// Keldysh partition function with a trivial subsystem; equals 1.
    pub fn trace_normalization(&self) -> C64 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let id = [[one, zero], [zero, one]];
        let half = [[one * 0.5, zero], [zero, one * 0.5]];
        self.contract(&id, &half, &id)
    }

    /// `max |I(±-swapped) − conj I|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let swap = |i: usize| -> usize {
            (0..self.t).fold(0, |acc, tau| {
                let d = (i >> (4 * tau)) & 15;
                acc | (((d >> 2) | ((d & 3) << 2)) << (4 * tau))
            })
        };
        self.data.iter().enumerate().fold(0.0, |m, (i, z)| m.max((self.data[swap(i)] - z.conj()).norm()))
    }

    /// Binary dump: magic, version, t, L (u32), J, g, h (f64), then `16^t` complex
    /// doubles `(re, im)`, all little-endian.
    pub fn write_golden<W: Write>(&self, mut w: W) -> SpinResult<()> {
        w.write_all(GOLDEN_MAGIC)?;
        for v in [GOLDEN_VERSION, self.t as u32, self.l as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.params.j, self.params.g, self.params.h] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_golden<R: Read>(mut r: R) -> SpinResult<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GOLDEN_MAGIC {
            return Err(SpinError::Golden("bad magic".into()));
        }
        let mut u = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> SpinResult<u32> {
            r.read_exact(&mut u)?;
            Ok(u32::from_le_bytes(u))
        };
        let version = read_u32(&mut r)?;
        if version != GOLDEN_VERSION {
            return Err(SpinError::Golden(format!("unsupported version {version}")));
        }
        let t = read_u32(&mut r)? as usize;
        let l = read_u32(&mut r)? as usize;
        if t == 0 || t > MAX_IM_PERIODS {
            return Err(SpinError::Golden(format!("t = {t} out of range")));
        }
        let mut f = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> SpinResult<f64> {
            r.read_exact(&mut f)?;
            Ok(f64::from_le_bytes(f))
        };
        let (j, g, h) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
        let params = ModelParams::new(j, g, h).map_err(|e| SpinError::Golden(e.to_string()))?;
        let mut data = Vec::with_capacity(1 << (4 * t));
        for _ in 0..1usize << (4 * t) {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        Ok(Self { t, l, params, data })
    }
}

/// Subsystem contraction of a folded IM, see [`ImTensor::contract`].
pub fn contract_folded(folded: &[C64], t: usize, kick: &[[C64; 2]; 2], rho: &[[C64; 2]; 2], obs: &[[C64; 2]; 2]) -> C64 {
    let kf = folded_kick(kick);
    let init = fold_operator(rho);
    let fin = fold_observable(obs);
    // forward sweep over periods keeping the full history index
    let mut amps: Vec<C64> = (0..4).map(|x| (0..4).map(|a| kf[x][a] * init[a]).sum()).collect();
    for tau in 1..t {
        let mut next = vec![C64::new(0.0, 0.0); amps.len() * 4];
        for (hist, a) in amps.iter().enumerate() {
            let prev = (hist >> (2 * (tau - 1))) & 3;
            for x in 0..4 {
                next[hist | (x << (2 * tau))] = kf[x][prev] * a;
            }
        }
        amps = next;
    }
    amps.iter().zip(folded).enumerate().map(|(hist, (a, i))| a * i * fin[(hist >> (2 * (t - 1))) & 3]).sum()
}

/// Influence matrix of an open environment of `l` spins with infinite-temperature
/// initial state, coupled through its edge spin.
pub fn im_tensor_ed(l: usize, p: &ModelParams, t: usize) -> SpinResult<ImTensor> {
    if t == 0 || t > MAX_IM_PERIODS {
        return Err(SpinError::BadPeriods { t, max: MAX_IM_PERIODS });
    }
    if l < t + 1 {
        return Err(SpinError::ShortEnvironment { l, t });
    }
    let folded = im_folded_ed(l, p, t)?;
    ImTensor::from_folded(t, l, *p, &folded)
}

/// Folded IM of an `l`-spin environment by explicit density-matrix branching.
///
/// No light-cone requirement; `l = 0` gives the empty environment (all ones).
pub fn im_folded_ed(l: usize, p: &ModelParams, t: usize) -> SpinResult<Vec<C64>> {
    if l == 0 {
        return Ok(vec![C64::new(1.0, 0.0); 1 << (2 * t)]);
    }
    let fe = build_floquet(l, p)?;
    let n = 1usize << l;
    let uh = fe.u.t().mapv(|z| z.conj());
    let z0: Vec<f64> = (0..n).map(|b| spin(b & 1)).collect();
    let mut out = vec![C64::new(0.0, 0.0); 1 << (2 * t)];
    let rho = Array2::from_diag_elem(n, C64::new(1.0 / n as f64, 0.0));
    let mut stack = vec![(rho, 0usize, 0usize)];
    while let Some((rho, depth, hist)) = stack.pop() {
        if depth == t {
            out[hist] = rho.diag().sum();
            continue;
        }
        let evolved = fe.u.dot(&rho).dot(&uh);
        for x in 0..4 {
            let (zp, zm) = folded_spins(x);
            let mut child = evolved.clone();
            for ((a, b), v) in child.indexed_iter_mut() {
                *v *= C64::from_polar(1.0, p.j * (zp * z0[a] - zm * z0[b]));
            }
            stack.push((child, depth + 1, hist | (x << (2 * depth))));
        }
    }
    Ok(out)
}

/// One dual-transfer step on a dense folded IM: a new spin is inserted between the
/// subsystem and the existing environment.
pub fn dual_transfer_dense(folded: &[C64], t: usize, p: &ModelParams) -> SpinResult<Vec<C64>> {
    let n = 1usize << (2 * t);
    if folded.len() != n {
        return Err(SpinError::BadLength { got: folded.len(), want: n });
    }
    let kf = folded_kick(&kick_matrix(p));
    let w = folded_coupling(p.j);
    let half = C64::new(0.5, 0.0);
    let zero = C64::new(0.0, 0.0);
    let init = [half, zero, zero, half];
    let fin = [C64::new(1.0, 0.0), zero, zero, C64::new(1.0, 0.0)];
    // weight of each trajectory of the inserted spin, times the old IM seen by it
    let weighted: Vec<C64> = (0..n)
        .map(|x1| {
            let digit = |tau: usize| (x1 >> (2 * tau)) & 3;
            let mut a: C64 = (0..4).map(|b| kf[digit(0)][b] * init[b]).sum();
            for tau in 1..t {
                a *= kf[digit(tau)][digit(tau - 1)];
            }
            a * fin[digit(t - 1)] * folded[x1]
        })
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|x0| {
            weighted
                .iter()
                .enumerate()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|(x1, v)| (0..t).fold(*v, |acc, tau| acc * w[(x0 >> (2 * tau)) & 3][(x1 >> (2 * tau)) & 3]))
                .sum()
        })
        .collect())
}

/// Product IM of the perfect dephaser, `Π_τ δ(z⁺_τ = z⁻_τ)`.
pub fn perfect_dephaser_folded(t: usize) -> Vec<C64> {
    (0..1usize << (2 * t))
        .map(|x| {
            let diag = (0..t).all(|tau| matches!((x >> (2 * tau)) & 3, 0 | 3));
            C64::new(if diag { 1.0 } else { 0.0 }, 0.0)
        })
        .collect()
}
