//! Temporal MPS of the influence matrix and its dual-transfer iteration.
//!
//! One site per period, each a folded subsystem spin (local dimension 4, order
//! `++, +−, −+, −−`). The Ising coupling is diagonal in `Z`, so the IM only depends
//! on one folded value per period and every temporal cut is a single bond.
//! Site tensors are stored as `(χ_left, 4, χ_right)`.

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView2, Axis};
use ndarray_linalg::{JobSvd, QR, SVD, SVDDC};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::ModelParams;
use crate::spin::{fold_observable, fold_operator, folded_coupling, folded_kick, kick_matrix};

pub const LOCAL_DIM: usize = 4;
/// Singular values below this fraction of the largest are always discarded.
pub const SV_FLOOR: f64 = 1e-12;
const BREAKDOWN: f64 = 1e-300;
const CHECKPOINT_MAGIC: &[u8; 4] = b"TEMP";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("t must be ≥ 1")]
    EmptyHorizon,
    #[error("χ must be ≥ 1")]
    BadChi,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular values collapsed below 1e-300")]
    Breakdown,
    #[error("MPS not canonical at bond {bond} (center {center:?})")]
    NotCanonical { bond: usize, center: Option<usize> },
    #[error("bond {bond} outside 1..{t}")]
    BadBond { bond: usize, t: usize },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type MpsResult<T> = Result<T, MpsError>;

fn linalg<E: std::fmt::Display>(e: E) -> MpsError {
    MpsError::Linalg(e.to_string())
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn cplx(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Folded weights that close a period without constraining it, `½(δ₊₊ + δ₋₋)`.
const DIAG_AVERAGE: [f64; 4] = [0.5, 0.0, 0.0, 0.5];

/// Thin SVD `m = U·diag(s)·Vt`.
fn svd(m: ArrayView2<C64>) -> MpsResult<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    match m.svddc(JobSvd::Some) {
        Ok((u, s, vt)) => Ok((u.ok_or_else(|| linalg("no U"))?, s, vt.ok_or_else(|| linalg("no Vt"))?)),
        Err(e) => {
            // gesdd occasionally fails to converge on nearly degenerate spectra
            log::debug!("svddc failed ({e}), retrying with gesvd");
            let (u, s, vt) = m.svd(true, true).map_err(linalg)?;
            let k = s.len();
            let u = u.ok_or_else(|| linalg("no U"))?.slice(s![.., ..k]).to_owned();
            let vt = vt.ok_or_else(|| linalg("no Vt"))?.slice(s![..k, ..]).to_owned();
            Ok((u, s, vt))
        }
    }
}

/// Number of singular values kept and the discarded fraction of `Σ s²`.
fn truncation(s: &Array1<f64>, chi: usize) -> MpsResult<(usize, f64)> {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax < BREAKDOWN {
        return Err(MpsError::Breakdown);
    }
    let keep = s.iter().take(chi).filter(|&&x| x > SV_FLOOR * smax).count().max(1);
    let total: f64 = s.iter().map(|x| x * x).sum();
    let dropped: f64 = s.iter().skip(keep).map(|x| x * x).sum();
    Ok((keep, dropped / total))
}

fn entropy_of(s: &Array1<f64>) -> f64 {
    let total: f64 = s.iter().map(|x| x * x).sum();
    s.iter().map(|x| x * x / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.ncols(), m.nrows()), |(i, j)| m[[j, i]].conj())
}

fn reshape3(m: Array2<C64>, dims: (usize, usize, usize)) -> Array3<C64> {
    m.as_standard_layout().into_owned().into_shape_with_order(dims).unwrap()
}

fn as_left_matrix(a: &Array3<C64>) -> Array2<C64> {
    let (l, d, r) = a.dim();
    a.as_standard_layout().into_owned().into_shape_with_order((l * d, r)).unwrap()
}

fn as_right_matrix(a: &Array3<C64>) -> Array2<C64> {
    let (l, d, r) = a.dim();
    a.as_standard_layout().into_owned().into_shape_with_order((l, d * r)).unwrap()
}

/// `m · a` contracting the left bond of `a`.
fn absorb_left(m: &Array2<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (_, d, r) = a.dim();
    reshape3(m.dot(&as_right_matrix(a)), (m.nrows(), d, r))
}

/// `a · m` contracting the right bond of `a`.
fn absorb_right(a: &Array3<C64>, m: &Array2<C64>) -> Array3<C64> {
    let (l, d, _) = a.dim();
    reshape3(as_left_matrix(a).dot(m), (l, d, m.ncols()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMps {
    sites: Vec<Array3<C64>>,
    /// Orthogonality center if the state is in mixed canonical form.
    center: Option<usize>,
}

impl TemporalMps {
    pub fn from_sites(sites: Vec<Array3<C64>>) -> MpsResult<Self> {
        if sites.is_empty() {
            return Err(MpsError::EmptyHorizon);
        }
        for (i, a) in sites.iter().enumerate() {
            if a.dim().1 != LOCAL_DIM {
                return Err(MpsError::Shape(format!("site {i} has local dimension {}", a.dim().1)));
            }
            let left = if i == 0 { 1 } else { sites[i - 1].dim().2 };
            if a.dim().0 != left {
                return Err(MpsError::Shape(format!("bond {i}: {} vs {left}", a.dim().0)));
            }
        }
        if sites.last().unwrap().dim().2 != 1 {
            return Err(MpsError::Shape("open right boundary must have dimension 1".into()));
        }
        Ok(Self { sites, center: None })
    }

    /// Product state with the same folded vector on every site.
    pub fn product(t: usize, v: [C64; 4]) -> MpsResult<Self> {
        if t == 0 {
            return Err(MpsError::EmptyHorizon);
        }
        let a = Array3::from_shape_fn((1, LOCAL_DIM, 1), |(_, x, _)| v[x]);
        Ok(Self { sites: vec![a; t], center: None })
    }

    /// Exact MPS of a dense folded tensor (period τ is base-4 digit τ).
    pub fn from_dense(dense: &[C64], t: usize) -> MpsResult<Self> {
        if t == 0 {
            return Err(MpsError::EmptyHorizon);
        }
        if dense.len() != 1 << (2 * t) {
            return Err(MpsError::Shape(format!("dense tensor of {} entries for t = {t}", dense.len())));
        }
        // row-major over (x_0, rest) with x_0 slowest needs the digits reversed
        let mut rest = Array2::from_shape_fn((1, dense.len()), |(_, i)| {
            let idx = (0..t).fold(0, |acc, tau| acc | (((i >> (2 * (t - 1 - tau))) & 3) << (2 * tau)));
            dense[idx]
        });
        let mut sites = Vec::with_capacity(t);
        for _ in 0..t - 1 {
            let (bond, cols) = rest.dim();
            let m = rest.as_standard_layout().into_owned().into_shape_with_order((bond * LOCAL_DIM, cols / LOCAL_DIM)).unwrap();
            let (u, sv, vt) = svd(m.view())?;
            let (keep, _) = truncation(&sv, usize::MAX)?;
            sites.push(reshape3(u.slice(s![.., ..keep]).to_owned(), (bond, LOCAL_DIM, keep)));
            let sv = sv.slice(s![..keep]).mapv(cplx);
            rest = &vt.slice(s![..keep, ..]) * &sv.insert_axis(Axis(1));
        }
        let bond = rest.nrows();
        sites.push(reshape3(rest, (bond, LOCAL_DIM, 1)));
        Ok(Self { sites, center: Some(t - 1) })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Array3<C64>] {
        &self.sites
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Dimensions of the `t − 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|a| a.dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Value at a folded trajectory.
    pub fn amplitude(&self, xs: &[usize]) -> C64 {
        assert_eq!(xs.len(), self.len());
        let mut v = Array2::from_elem((1, 1), cplx(1.0));
        for (a, &x) in self.sites.iter().zip(xs) {
            v = v.dot(&a.index_axis(Axis(1), x));
        }
        v[[0, 0]]
    }

    /// Dense folded tensor; only sensible for small `t`.
    pub fn to_dense(&self) -> Vec<C64> {
        assert!(self.len() <= 10, "dense expansion of {} sites", self.len());
        let t = self.len();
        (0..1usize << (2 * t)).map(|i| self.amplitude(&(0..t).map(|tau| (i >> (2 * tau)) & 3).collect::<Vec<_>>())).collect()
    }

    /// Largest deviation of the gauge conditions implied by the center flag.
    pub fn isometry_residual(&self) -> Option<f64> {
        let c = self.center?;
        let eye_dev = |m: Array2<C64>| m.indexed_iter().fold(0.0f64, |acc, ((i, j), z)| acc.max((z - if i == j { 1.0 } else { 0.0 }).norm()));
        let mut worst = 0.0f64;
        for (i, a) in self.sites.iter().enumerate() {
            if i < c {
                let m = as_left_matrix(a);
                worst = worst.max(eye_dev(m.t().mapv(|z| z.conj()).dot(&m)));
            } else if i > c {
                let m = as_right_matrix(a);
                worst = worst.max(eye_dev(m.dot(&m.t().mapv(|z| z.conj()))));
            }
        }
        Some(worst)
    }

    fn qr_step_right(&mut self, i: usize) -> MpsResult<()> {
        let (l, d, _) = self.sites[i].dim();
        let (q, r) = as_left_matrix(&self.sites[i]).qr().map_err(linalg)?;
        let k = q.ncols();
        self.sites[i] = reshape3(q, (l, d, k));
        self.sites[i + 1] = absorb_left(&r, &self.sites[i + 1]);
        Ok(())
    }

    fn qr_step_left(&mut self, i: usize) -> MpsResult<()> {
        let (_, d, r) = self.sites[i].dim();
        let m = as_right_matrix(&self.sites[i]);
        let (q, rr) = adjoint(&m).qr().map_err(linalg)?;
        let k = q.ncols();
        self.sites[i] = reshape3(adjoint(&q), (k, d, r));
        self.sites[i - 1] = absorb_right(&self.sites[i - 1], &adjoint(&rr));
        Ok(())
    }

    /// Brings the state into mixed canonical form with center `target`.
    pub fn move_center(&mut self, target: usize) -> MpsResult<()> {
        assert!(target < self.len());
        let (from_left, from_right) = match self.center {
            Some(c) => (c, c),
            None => (0, self.len() - 1),
        };
        for i in from_left..target {
            self.qr_step_right(i)?;
        }
        for i in (target + 1..=from_right).rev() {
            self.qr_step_left(i)?;
        }
        self.center = Some(target);
        Ok(())
    }

    /// Entanglement entropy of every internal bond (nats).
    pub fn bond_entropies(&self) -> MpsResult<Vec<f64>> {
        let mut m = self.clone();
        m.move_center(0)?;
        let mut out = Vec::with_capacity(self.len() - 1);
        for i in 0..m.len() - 1 {
            let (l, d, _) = m.sites[i].dim();
            let (u, sv, vt) = svd(as_left_matrix(&m.sites[i]).view())?;
            out.push(entropy_of(&sv));
            let k = sv.len();
            m.sites[i] = reshape3(u, (l, d, k));
            let svt = &vt * &sv.mapv(cplx).insert_axis(Axis(1));
            m.sites[i + 1] = absorb_left(&svt, &m.sites[i + 1]);
        }
        Ok(out)
    }

    /// IM on the first `t` periods: later periods closed with equal forward and
    /// backward subsystem histories, which the environment cannot distinguish.
    pub fn restrict(&self, t: usize) -> MpsResult<Self> {
        if t == 0 || t > self.len() {
            return Err(MpsError::Shape(format!("restriction to {t} of {} periods", self.len())));
        }
        let mut v = Array1::from_elem(1, cplx(1.0));
        for a in self.sites[t..].iter().rev() {
            let mut m = Array2::<C64>::zeros((a.dim().0, a.dim().2));
            for (x, w) in DIAG_AVERAGE.iter().enumerate() {
                if *w != 0.0 {
                    m.scaled_add(cplx(*w), &a.index_axis(Axis(1), x));
                }
            }
            v = m.dot(&v);
        }
        let mut sites = self.sites[..t].to_vec();
        let last = sites.pop().unwrap();
        sites.push(absorb_right(&last, &v.insert_axis(Axis(1))));
        Ok(Self { sites, center: None })
    }

    /// Contraction with a subsystem spin kicked by `kick` each period, initial state
    /// `rho`, observable `obs` measured after the last period.
    pub fn contract_subsystem(&self, kick: &[[C64; 2]; 2], rho: &[[C64; 2]; 2], obs: &[[C64; 2]; 2]) -> C64 {
        let kf = folded_kick(kick);
        let init = fold_operator(rho);
        let fin = fold_observable(obs);
        // e[x] is a row vector over the MPS bond
        let mut e: Vec<Array1<C64>> = init.iter().map(|v| Array1::from_elem(1, *v)).collect();
        for a in &self.sites {
            let mixed: Vec<Array1<C64>> = (0..4)
                .map(|x| {
                    let mut acc = Array1::zeros(e[0].len());
                    for (y, ey) in e.iter().enumerate() {
                        acc.scaled_add(kf[x][y], ey);
                    }
                    acc
                })
                .collect();
            e = mixed.iter().enumerate().map(|(x, v)| v.dot(&a.index_axis(Axis(1), x))).collect();
        }
        e.iter().zip(fin).map(|(v, f)| v[0] * f).sum()
    }

    /// Keldysh partition function with a trivial subsystem; 1 for an exact IM.
    pub fn trace_normalization(&self) -> C64 {
        let (one, z) = (cplx(1.0), zero());
        self.contract_subsystem(&[[one, z], [z, one]], &[[cplx(0.5), z], [z, cplx(0.5)]], &[[one, z], [z, one]])
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut env = Array2::from_elem((1, 1), cplx(1.0));
        for a in &self.sites {
            let mut next = Array2::zeros((a.dim().2, a.dim().2));
            for x in 0..LOCAL_DIM {
                let ax = a.index_axis(Axis(1), x);
                next = next + ax.t().mapv(|z| z.conj()).dot(&env).dot(&ax);
            }
            env = next;
        }
        env[[0, 0]].re
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> MpsResult<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        let center = self.center.map_or(u32::MAX, |c| c as u32);
        for v in [CHECKPOINT_VERSION, self.len() as u32, center] {
            w.write_all(&v.to_le_bytes())?;
        }
        for a in &self.sites {
            let (l, d, r) = a.dim();
            for v in [l, d, r] {
                w.write_all(&(v as u32).to_le_bytes())?;
            }
            for z in a.as_standard_layout().iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> MpsResult<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(MpsError::Checkpoint("bad magic".into()));
        }
        let mut u = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> MpsResult<usize> {
            r.read_exact(&mut u)?;
            Ok(u32::from_le_bytes(u) as usize)
        };
        if read_u32(&mut r)? != CHECKPOINT_VERSION as usize {
            return Err(MpsError::Checkpoint("unsupported version".into()));
        }
        let t = read_u32(&mut r)?;
        let center = read_u32(&mut r)?;
        let mut sites = Vec::with_capacity(t);
        let mut f = [0u8; 8];
        for _ in 0..t {
            let (l, d, rr) = (read_u32(&mut r)?, read_u32(&mut r)?, read_u32(&mut r)?);
            let mut data = Vec::with_capacity(l * d * rr);
            for _ in 0..l * d * rr {
                r.read_exact(&mut f)?;
                let re = f64::from_le_bytes(f);
                r.read_exact(&mut f)?;
                data.push(C64::new(re, f64::from_le_bytes(f)));
            }
            sites.push(Array3::from_shape_vec((l, d, rr), data).map_err(|e| MpsError::Checkpoint(e.to_string()))?);
        }
        let mut mps = Self::from_sites(sites)?;
        if center != u32::MAX as usize {
            if center >= t {
                return Err(MpsError::Checkpoint(format!("center {center} out of range")));
            }
            mps.center = Some(center);
        }
        Ok(mps)
    }
}

/// Dual transfer matrix as an MPO over the temporal sites, tensors `(b_left, out, in, b_right)`.
///
/// The bond carries the folded state of the inserted environment spin; the first
/// and last tensors have its initial state `I/2` and the final trace absorbed.
#[derive(Debug, Clone)]
pub struct TransferMpo {
    tensors: Vec<Array4<C64>>,
}

impl TransferMpo {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Array4<C64>] {
        &self.tensors
    }

    /// Dimensions of the internal bonds (all 4).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|m| m.dim().3).collect()
    }
}

pub fn build_dual_mpo(p: &ModelParams, t: usize) -> MpsResult<TransferMpo> {
    if t == 0 {
        return Err(MpsError::EmptyHorizon);
    }
    let kf = folded_kick(&kick_matrix(p));
    let w = folded_coupling(p.j);
    let init = [0.5, 0.0, 0.0, 0.5];
    let fin = [1.0, 0.0, 0.0, 1.0];
    let tensors = (0..t)
        .map(|tau| {
            let bl = if tau == 0 { 1 } else { 4 };
            let br = if tau == t - 1 { 1 } else { 4 };
            Array4::from_shape_fn((bl, 4, 4, br), |(a, x0, x1, b)| {
                if br == 4 && b != x1 {
                    return zero();
                }
                let step = if tau == 0 { (0..4).map(|y| kf[x1][y] * init[y]).sum() } else { kf[x1][a] };
                let close = if br == 1 { cplx(fin[x1]) } else { cplx(1.0) };
                step * w[x0][x1] * close
            })
        })
        .collect();
    Ok(TransferMpo { tensors })
}

/// Exact MPO·MPS product, bond dimensions multiply.
pub fn apply_mpo(mps: &TemporalMps, mpo: &TransferMpo) -> MpsResult<TemporalMps> {
    if mps.len() != mpo.len() {
        return Err(MpsError::Shape(format!("MPS of {} sites, MPO of {}", mps.len(), mpo.len())));
    }
    let sites = mps
        .sites
        .iter()
        .zip(&mpo.tensors)
        .map(|(a, m)| {
            let (al, _, ar) = a.dim();
            let (ml, _, _, mr) = m.dim();
            let mut out = Array3::zeros((ml * al, LOCAL_DIM, mr * ar));
            for x0 in 0..LOCAL_DIM {
                for x1 in 0..LOCAL_DIM {
                    let ax = a.index_axis(Axis(1), x1);
                    for i in 0..ml {
                        for j in 0..mr {
                            let c = m[[i, x0, x1, j]];
                            if c == zero() {
                                continue;
                            }
                            let mut block = out.slice_mut(s![i * al..(i + 1) * al, x0, j * ar..(j + 1) * ar]);
                            block.scaled_add(c, &ax);
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(TemporalMps { sites, center: None })
}

/// Left-to-right QR sweep followed by a right-to-left SVD truncation to `chi`.
///
/// Returns the summed relative discarded weight; the result has center 0.
pub fn compress(mps: &mut TemporalMps, chi: usize) -> MpsResult<f64> {
    if chi == 0 {
        return Err(MpsError::BadChi);
    }
    let n = mps.len();
    if mps.center != Some(n - 1) {
        mps.move_center(n - 1)?;
    }
    let mut discarded = 0.0;
    for i in (1..n).rev() {
        let (_, d, r) = mps.sites[i].dim();
        let (u, sv, vt) = svd(as_right_matrix(&mps.sites[i]).view())?;
        let (keep, lost) = truncation(&sv, chi)?;
        discarded += lost;
        mps.sites[i] = reshape3(vt.slice(s![..keep, ..]).to_owned(), (keep, d, r));
        let us = &u.slice(s![.., ..keep]) * &sv.slice(s![..keep]).mapv(cplx);
        mps.sites[i - 1] = absorb_right(&mps.sites[i - 1], &us);
    }
    mps.center = Some(0);
    Ok(discarded)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationStep {
    pub discarded: f64,
    pub max_bond: usize,
}

/// MPO application by a truncating left-to-right sweep (zip-up), then a
/// right-to-left SVD sweep on the compressed state.
///
/// The input is first brought to center 0 so the untouched right part is
/// orthonormal; each step contracts the carried remainder with the next MPS and MPO
/// tensors and truncates by SVD. The result has center 0.
pub fn apply_and_truncate(mps: &TemporalMps, mpo: &TransferMpo, chi: usize) -> MpsResult<(TemporalMps, TruncationStep)> {
    if chi == 0 {
        return Err(MpsError::BadChi);
    }
    if mps.len() != mpo.len() {
        return Err(MpsError::Shape(format!("MPS of {} sites, MPO of {}", mps.len(), mpo.len())));
    }
    let mut src = mps.clone();
    if src.center != Some(0) {
        src.move_center(0)?;
    }
    let n = src.len();
    // carry[k, (a, α)]: new left bond k, MPO bond a, old MPS bond α
    let mut carry = Array2::from_elem((1, 1), cplx(1.0));
    let mut sites = Vec::with_capacity(n);
    let mut discarded = 0.0;
    for (i, (a, m)) in src.sites.iter().zip(&mpo.tensors).enumerate() {
        let (al, _, ar) = a.dim();
        let (ml, _, _, mr) = m.dim();
        let k = carry.nrows();
        // x[(k, a), x1, β] = Σ_α carry[k, (a, α)] A[α, x1, β]
        let c = carry.as_standard_layout().into_owned().into_shape_with_order((k * ml, al)).unwrap();
        let x = reshape3(c.dot(&as_right_matrix(a)), (k * ml, LOCAL_DIM, ar));
        let mut out = Array2::<C64>::zeros((k * LOCAL_DIM, mr * ar));
        for x0 in 0..LOCAL_DIM {
            for x1 in 0..LOCAL_DIM {
                for ia in 0..ml {
                    // rows k·ml + ia of x, rows k·4 + x0 of out
                    let src = x.slice(s![ia..; ml, x1, ..]);
                    for jb in 0..mr {
                        let coef = m[[ia, x0, x1, jb]];
                        if coef == zero() {
                            continue;
                        }
                        out.slice_mut(s![x0..; LOCAL_DIM, jb * ar..(jb + 1) * ar]).scaled_add(coef, &src);
                    }
                }
            }
        }
        if i + 1 == n {
            sites.push(reshape3(out, (k, LOCAL_DIM, 1)));
            break;
        }
        let (u, sv, vt) = svd(out.view())?;
        let (keep, lost) = truncation(&sv, chi)?;
        discarded += lost;
        sites.push(reshape3(u.slice(s![.., ..keep]).to_owned(), (k, LOCAL_DIM, keep)));
        carry = &vt.slice(s![..keep, ..]) * &sv.slice(s![..keep]).mapv(cplx).insert_axis(Axis(1));
    }
    let mut out = TemporalMps { sites, center: Some(n - 1) };
    // the zip-up saw a non-orthonormal remainder; a sweep back gives exact Schmidt bonds
    discarded += compress(&mut out, chi)?;
    let max_bond = out.max_bond();
    Ok((out, TruncationStep { discarded, max_bond }))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruncationReport {
    /// Relative discarded weight summed over bonds, per iteration.
    pub discarded: Vec<f64>,
    pub max_bond: usize,
    pub iterations: usize,
    pub chi: usize,
    pub floor: f64,
}

impl TruncationReport {
    pub fn total_discarded(&self) -> f64 {
        self.discarded.iter().sum()
    }

    pub fn max_discarded(&self) -> f64 {
        self.discarded.iter().cloned().fold(0.0, f64::max)
    }
}

/// Product boundary IM of a perfect dephaser.
pub fn perfect_dephaser_im(t: usize) -> MpsResult<TemporalMps> {
    let mut m = TemporalMps::product(t, [cplx(1.0), zero(), zero(), cplx(1.0)])?;
    m.move_center(0)?;
    Ok(m)
}

/// `t` dual-transfer iterations starting from the perfect dephaser.
pub fn fixed_point_im(p: &ModelParams, t: usize, chi: usize) -> MpsResult<(TemporalMps, TruncationReport)> {
    let start = perfect_dephaser_im(t)?;
    continue_fixed_point(p, start, TruncationReport { chi, floor: SV_FLOOR, max_bond: 1, ..Default::default() }, t)
}

/// Resumes an iteration (e.g. from a checkpoint) until `iterations` in total.
pub fn continue_fixed_point(
    p: &ModelParams,
    mut mps: TemporalMps,
    mut report: TruncationReport,
    iterations: usize,
) -> MpsResult<(TemporalMps, TruncationReport)> {
    if report.chi == 0 {
        return Err(MpsError::BadChi);
    }
    let mpo = build_dual_mpo(p, mps.len())?;
    while report.iterations < iterations {
        let (next, step) = apply_and_truncate(&mps, &mpo, report.chi)?;
        mps = next;
        report.discarded.push(step.discarded);
        report.max_bond = report.max_bond.max(step.max_bond);
        report.iterations += 1;
        log::debug!("iteration {}: bond {} discarded {:e}", report.iterations, step.max_bond, step.discarded);
    }
    Ok((mps, report))
}

/// Entropy across the cut after `bond` sites; the center must be adjacent to the cut.
pub fn mps_entropy(mps: &TemporalMps, bond: usize) -> MpsResult<f64> {
    let t = mps.len();
    if bond == 0 || bond >= t {
        return Err(MpsError::BadBond { bond, t });
    }
    let m = match mps.center {
        Some(c) if c + 1 == bond => as_left_matrix(&mps.sites[c]),
        Some(c) if c == bond => as_right_matrix(&mps.sites[c]),
        center => return Err(MpsError::NotCanonical { bond, center }),
    };
    let (_, sv, _) = svd(m.view())?;
    Ok(entropy_of(&sv))
}

/// Entropy at cut `⌊fraction·t⌋` of the horizon-`t` IM for each requested `t`,
/// all read off one longer IM by restriction. Trivial cuts give 0.
pub fn entropy_curve(im: &TemporalMps, ts: &[usize], fraction: f64) -> MpsResult<Vec<(usize, f64)>> {
    ts.iter()
        .map(|&t| {
            let cut = (fraction * t as f64).floor() as usize;
            if cut == 0 || cut >= t {
                return Ok((t, 0.0));
            }
            let mut r = im.restrict(t)?;
            r.move_center(cut)?;
            Ok((t, mps_entropy(&r, cut)?))
        })
        .collect()
}

/// `C_zz(t)` for `t = 0..=t_max` of the spin between two environments.
///
/// Both IMs are right-environment IMs; the chain is reflection symmetric and the
/// coupling is diagonal, so the left IM is the same tensor with no leg reordering.
pub fn czz_from_im(left: &TemporalMps, right: &TemporalMps, p: &ModelParams, t_max: usize) -> MpsResult<Vec<f64>> {
    if left.len() != right.len() {
        return Err(MpsError::Shape(format!("IMs of {} and {} periods", left.len(), right.len())));
    }
    if t_max > left.len() {
        return Err(MpsError::Shape(format!("t_max = {t_max} beyond horizon {}", left.len())));
    }
    let kf = folded_kick(&kick_matrix(p));
    let closing = |m: &TemporalMps| -> Vec<Array1<C64>> {
        let n = m.len();
        let mut out = vec![Array1::from_elem(1, cplx(1.0)); n + 1];
        for i in (0..n).rev() {
            let a = &m.sites[i];
            let mut mat = Array2::<C64>::zeros((a.dim().0, a.dim().2));
            for (x, w) in DIAG_AVERAGE.iter().enumerate() {
                if *w != 0.0 {
                    mat.scaled_add(cplx(*w), &a.index_axis(Axis(1), x));
                }
            }
            out[i] = mat.dot(&out[i + 1]);
        }
        out
    };
    let (bl, br) = (closing(left), closing(right));
    let z_half = [cplx(0.5), zero(), zero(), cplx(-0.5)];
    let z_obs = [cplx(1.0), zero(), zero(), cplx(-1.0)];
    let mut e: Vec<Array2<C64>> = z_half.iter().map(|v| Array2::from_elem((1, 1), *v)).collect();
    let mut out = vec![1.0];
    for tau in 0..t_max {
        let mixed: Vec<Array2<C64>> = (0..4)
            .map(|x| {
                let mut acc = Array2::zeros(e[0].dim());
                for (y, ey) in e.iter().enumerate() {
                    if kf[x][y] != zero() {
                        acc.scaled_add(kf[x][y], ey);
                    }
                }
                acc
            })
            .collect();
        e = mixed
            .iter()
            .enumerate()
            .map(|(x, m)| {
                let lx = left.sites[tau].index_axis(Axis(1), x);
                let rx = right.sites[tau].index_axis(Axis(1), x);
                lx.t().dot(m).dot(&rx)
            })
            .collect();
        let c: C64 = e.iter().zip(z_obs).map(|(m, w)| w * bl[tau + 1].dot(&m.dot(&br[tau + 1]))).sum();
        if c.im.abs() > 1e-8 * c.norm().max(1.0) {
            log::warn!("C_zz({}) has imaginary part {:e}", tau + 1, c.im);
        }
        out.push(c.re);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_counts() {
        let s = Array1::from(vec![1.0, 0.5, 1e-13, 0.0]);
        assert_eq!(truncation(&s, 10).unwrap().0, 2);
        let (k, lost) = truncation(&s, 1).unwrap();
        assert_eq!(k, 1);
        assert!((lost - 0.25 / 1.25).abs() < 1e-15);
        assert!(matches!(truncation(&Array1::zeros(3), 2), Err(MpsError::Breakdown)));
    }

    #[test]
    fn maximally_entangled_pair() {
        // Σ_x |x⟩|x⟩ over the four folded states
        let a = Array3::from_shape_fn((1, 4, 4), |(_, x, b)| cplx(if x == b { 1.0 } else { 0.0 }));
        let b = Array3::from_shape_fn((4, 4, 1), |(a, x, _)| cplx(if x == a { 1.0 } else { 0.0 }));
        let mut m = TemporalMps::from_sites(vec![a, b]).unwrap();
        assert!(mps_entropy(&m, 1).is_err());
        m.move_center(1).unwrap();
        assert!((mps_entropy(&m, 1).unwrap() - 4f64.ln()).abs() < 1e-12);
    }
}
