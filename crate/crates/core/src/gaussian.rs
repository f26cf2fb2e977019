//! The exact influence matrix as a fermionic pairing state on the temporal lattice.
//!
//! Modes are time-major: period `τ` (0-based) owns indices `4τ..4τ+4` in the
//! flavor order `(↑+, ↓+, ↑−, ↓−)`. The state is
//! `|I⟩ = exp(½ Σ_ij A_ij f_i† f_j†)|∅⟩` with real antisymmetric `A`.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{EigValsh, Inverse, UPLO};
use thiserror::Error;

use crate::majorana::{self, KappaKernel, MajoranaError};
use crate::model::ModelParams;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error(transparent)]
    Majorana(#[from] MajoranaError),
    #[error("kernel horizon {have} too short for t = {t} (need ≥ t − 1)")]
    ShortKernel { have: usize, t: usize },
    #[error("t must be ≥ 1")]
    EmptyHorizon,
    #[error("cut {cut} outside 1..{t}")]
    BadCut { cut: usize, t: usize },
    #[error("empty or out-of-range index subset")]
    BadSubset,
    #[error("pairing system ill-conditioned (condition ≈ {0:e})")]
    IllConditioned(f64),
    #[error("correlation eigenvalue {0} outside [0, 1]")]
    EigenvalueRange(f64),
    #[error("correlation eigenvalues not paired as (p, 1 − p) (defect {0:e})")]
    Unpaired(f64),
    #[error("dense Fock oracle limited to t ≤ 4 (got {0})")]
    OracleTooLarge(usize),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type GaussianResult<T> = Result<T, GaussianError>;

fn linalg<E: std::fmt::Display>(e: E) -> GaussianError {
    GaussianError::Linalg(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    UpPlus = 0,
    DownPlus = 1,
    UpMinus = 2,
    DownMinus = 3,
}

/// Mode index of `flavor` at period `tau` (0-based).
pub fn mode(flavor: Flavor, tau: usize) -> usize {
    4 * tau + flavor as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianIm {
    t: usize,
    a: Array2<f64>,
}

impl GaussianIm {
    /// Wrap an antisymmetric `4t × 4t` pairing matrix.
    pub fn from_matrix(a: Array2<f64>) -> GaussianResult<Self> {
        let n = a.nrows();
        if n == 0 || n % 4 != 0 || a.ncols() != n {
            return Err(GaussianError::BadSubset);
        }
        Ok(Self { t: n / 4, a })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn modes(&self) -> usize {
        4 * self.t
    }

    pub fn pairing(&self) -> &Array2<f64> {
        &self.a
    }
}

pub fn build_pairing_matrix(kernel: &KappaKernel, t: usize) -> GaussianResult<GaussianIm> {
    pairing_from_values(&kernel.values, t)
}

/// Pairing matrix from raw κ values `κ(0..)`; needs at least `t` of them.
pub fn pairing_from_values(kappa: &[f64], t: usize) -> GaussianResult<GaussianIm> {
    if t == 0 {
        return Err(GaussianError::EmptyHorizon);
    }
    if kappa.len() < t {
        return Err(GaussianError::ShortKernel { have: kappa.len().saturating_sub(1), t });
    }
    let n = 4 * t;
    let mut a = Array2::<f64>::zeros((n, n));
    let mut put = |i: usize, j: usize, c: f64| {
        a[[i, j]] += c;
        a[[j, i]] -= c;
    };
    use Flavor::*;
    for tau in 0..t {
        put(mode(UpPlus, tau), mode(DownPlus, tau), 1.0);
        put(mode(UpMinus, tau), mode(DownMinus, tau), -1.0);
    }
    for x in 0..t {
        for y in 0..t {
            put(mode(UpPlus, x), mode(UpMinus, y), kappa[x.abs_diff(y)]);
            if x < y {
                put(mode(UpPlus, x), mode(UpPlus, y), kappa[y - x]);
                put(mode(UpMinus, x), mode(UpMinus, y), -kappa[y - x]);
            }
        }
    }
    Ok(GaussianIm { t, a })
}

/// Normalized two-point functions of the full state.
///
/// With `M = AᵀA` and `R = (1 + M)⁻¹`: `⟨f f†⟩ = R`, `⟨f† f⟩ = M R`,
/// `⟨f f⟩ = −A R`, `⟨f† f†⟩ = A R`.
#[derive(Debug, Clone)]
pub struct FullCorrelations {
    r: Array2<f64>,
    ar: Array2<f64>,
}

impl FullCorrelations {
    pub fn new(im: &GaussianIm) -> GaussianResult<Self> {
        let a = &im.a;
        let n = a.nrows();
        let mut m = a.t().dot(a);
        // crude bound first, exact spectrum only when it matters
        let fro2: f64 = a.iter().map(|x| x * x).sum();
        for i in 0..n {
            m[[i, i]] += 1.0;
        }
        if 1.0 + fro2 > 1e12 {
            let ev = m.eigvalsh(UPLO::Lower).map_err(linalg)?;
            let cond = ev[n - 1] / ev[0];
            if cond > 1e12 {
                return Err(GaussianError::IllConditioned(cond));
            }
        }
        let r = m.inv().map_err(linalg)?;
        let r = (&r + &r.t()) * 0.5;
        let ar = a.dot(&r);
        Ok(Self { r, ar })
    }

    /// Blocks restricted to `subset` (in the given order).
    pub fn restrict(&self, subset: &[usize]) -> GaussianResult<CorrelationMatrix> {
        let n = self.r.nrows();
        if subset.is_empty() || subset.iter().any(|&i| i >= n) {
            return Err(GaussianError::BadSubset);
        }
        let k = subset.len();
        let pick = |m: &Array2<f64>| Array2::from_shape_fn((k, k), |(x, y)| m[[subset[x], subset[y]]]);
        let ff_dag = pick(&self.r);
        let fdag_f = Array2::from_shape_fn((k, k), |(x, y)| {
            let d = if subset[x] == subset[y] { 1.0 } else { 0.0 };
            d - self.r[[subset[y], subset[x]]]
        });
        let fdag_fdag = pick(&self.ar);
        let ff = -&fdag_fdag;
        Ok(CorrelationMatrix { indices: subset.to_vec(), ff_dag, ff, fdag_fdag, fdag_f })
    }

    /// Entropy of periods `0..cut` (all four flavors).
    pub fn entropy(&self, cut: usize) -> GaussianResult<EntropySpectrum> {
        let t = self.r.nrows() / 4;
        if cut == 0 || cut >= t {
            return Err(GaussianError::BadCut { cut, t });
        }
        let idx: Vec<usize> = (0..4 * cut).collect();
        self.restrict(&idx)?.entropy()
    }
}

/// Correlators `⟨f_i f_j†⟩, ⟨f_i f_j⟩, ⟨f_i† f_j†⟩, ⟨f_i† f_j⟩` over an index subset.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub indices: Vec<usize>,
    pub ff_dag: Array2<f64>,
    pub ff: Array2<f64>,
    pub fdag_fdag: Array2<f64>,
    pub fdag_f: Array2<f64>,
}

impl CorrelationMatrix {
    /// `C = [[⟨f f†⟩, ⟨f f⟩], [⟨f† f†⟩, ⟨f† f⟩]]`.
    pub fn assembled(&self) -> Array2<f64> {
        let k = self.indices.len();
        let mut c = Array2::<f64>::zeros((2 * k, 2 * k));
        c.slice_mut(s![..k, ..k]).assign(&self.ff_dag);
        c.slice_mut(s![..k, k..]).assign(&self.ff);
        c.slice_mut(s![k.., ..k]).assign(&self.fdag_fdag);
        c.slice_mut(s![k.., k..]).assign(&self.fdag_f);
        c
    }

    pub fn entropy(&self) -> GaussianResult<EntropySpectrum> {
        let c = self.assembled();
        let c = (&c + &c.t()) * 0.5;
        let ev = c.eigvalsh(UPLO::Lower).map_err(linalg)?;
        EntropySpectrum::from_eigenvalues(ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyUnit {
    Nats,
    Bits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropySpectrum {
    /// One `p ≤ 1/2` per `(p, 1 − p)` eigenvalue pair, ascending.
    pub probabilities: Vec<f64>,
    pub entropy: f64,
    pub unit: EntropyUnit,
}

const CLIP: f64 = 1e-14;

impl EntropySpectrum {
    fn from_eigenvalues(ev: Array1<f64>) -> GaussianResult<Self> {
        let n = ev.len();
        for &x in ev.iter() {
            if !(-1e-8..=1.0 + 1e-8).contains(&x) {
                return Err(GaussianError::EigenvalueRange(x));
            }
        }
        let defect = (0..n / 2).map(|i| (ev[i] + ev[n - 1 - i] - 1.0).abs()).fold(0.0, f64::max);
        if defect > 1e-8 {
            return Err(GaussianError::Unpaired(defect));
        }
        let probabilities: Vec<f64> = (0..n / 2).map(|i| 0.5 * (ev[i] + 1.0 - ev[n - 1 - i])).map(|q: f64| q.clamp(0.0, 0.5)).collect();
        let entropy = ev
            .iter()
            .map(|&x| {
                let p = x.clamp(CLIP, 1.0 - CLIP);
                -p * p.ln()
            })
            .sum();
        Ok(Self { probabilities, entropy, unit: EntropyUnit::Nats })
    }

    pub fn in_bits(&self) -> f64 {
        match self.unit {
            EntropyUnit::Nats => self.entropy / std::f64::consts::LN_2,
            EntropyUnit::Bits => self.entropy,
        }
    }
}

pub fn correlations(im: &GaussianIm, subset: &[usize]) -> GaussianResult<CorrelationMatrix> {
    FullCorrelations::new(im)?.restrict(subset)
}

pub fn entanglement_entropy(im: &GaussianIm, cut: usize) -> GaussianResult<EntropySpectrum> {
    if cut == 0 || cut >= im.t {
        return Err(GaussianError::BadCut { cut, t: im.t });
    }
    FullCorrelations::new(im)?.entropy(cut)
}

/// Cut used for a fraction of the horizon; `0` and `t` mean a trivial bipartition.
pub fn cut_for(t: usize, fraction: f64) -> usize {
    ((fraction * t as f64 + 1e-9).floor() as usize).min(t)
}

/// Entropy at cut `⌊fraction · t⌋` for horizon `t` (zero for a trivial cut).
pub fn te_entropy(params: &ModelParams, t: usize, fraction: f64) -> GaussianResult<f64> {
    let kappa = majorana::kappa_values(params, t.max(1) - 1)?;
    let im = pairing_from_values(&kappa, t)?;
    let cut = cut_for(t, fraction);
    if cut == 0 || cut >= t {
        return Ok(0.0);
    }
    Ok(entanglement_entropy(&im, cut)?.entropy)
}

pub fn te_entropy_curve(params: &ModelParams, t_list: &[usize], fraction: f64) -> GaussianResult<Vec<(usize, f64)>> {
    params.require_integrable().map_err(MajoranaError::from)?;
    t_list.iter().map(|&t| Ok((t, te_entropy(params, t, fraction)?))).collect()
}

/// Dense Fock-space expansion of the pairing state, a validation oracle.
///
/// Basis states are bitmasks with bit `i` the occupation of mode `i`; the
/// Jordan–Wigner sign of `f_i†` counts occupied modes below `i`.
#[derive(Debug, Clone)]
pub struct FockState {
    modes: usize,
    pub amplitudes: Array1<f64>,
}

fn jw_sign(state: usize, i: usize) -> f64 {
    if (state & ((1usize << i) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `f_i†` (`dagger`) or `f_i` applied to a basis state; `None` if it vanishes.
fn apply(state: usize, i: usize, dagger: bool) -> Option<(usize, f64)> {
    let occ = state >> i & 1 == 1;
    if occ == dagger {
        return None;
    }
    Some((state ^ (1 << i), jw_sign(state, i)))
}

pub fn dense_fock_oracle(im: &GaussianIm) -> GaussianResult<FockState> {
    if im.t > 4 {
        return Err(GaussianError::OracleTooLarge(im.t));
    }
    let n = im.modes();
    let dim = 1usize << n;
    let mut psi = Array1::<f64>::zeros(dim);
    psi[0] = 1.0;
    // exp(½ f†Af†) = Π_{i<j} (1 + A_ij f_i† f_j†); the pair factors commute
    for i in 0..n {
        for j in (i + 1)..n {
            let c = im.a[[i, j]];
            if c == 0.0 {
                continue;
            }
            let mut add = Array1::<f64>::zeros(dim);
            for (b, &amp) in psi.iter().enumerate() {
                if amp == 0.0 {
                    continue;
                }
                if let Some((b1, s1)) = apply(b, j, true) {
                    if let Some((b2, s2)) = apply(b1, i, true) {
                        add[b2] += c * s1 * s2 * amp;
                    }
                }
            }
            psi += &add;
        }
    }
    let norm = psi.dot(&psi).sqrt();
    psi /= norm;
    Ok(FockState { modes: n, amplitudes: psi })
}

impl FockState {
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `⟨o_i o_j⟩` with `o = f†` when the flag is set, `f` otherwise.
    pub fn two_point(&self, i: usize, di: bool, j: usize, dj: bool) -> f64 {
        let mut acc = 0.0;
        for (b, &amp) in self.amplitudes.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            if let Some((b1, s1)) = apply(b, j, dj) {
                if let Some((b2, s2)) = apply(b1, i, di) {
                    acc += self.amplitudes[b2] * s1 * s2 * amp;
                }
            }
        }
        acc
    }

    /// All four blocks over `subset`.
    pub fn correlations(&self, subset: &[usize]) -> CorrelationMatrix {
        let k = subset.len();
        let block = |di: bool, dj: bool| Array2::from_shape_fn((k, k), |(x, y)| self.two_point(subset[x], di, subset[y], dj));
        CorrelationMatrix {
            indices: subset.to_vec(),
            ff_dag: block(false, true),
            ff: block(false, false),
            fdag_fdag: block(true, true),
            fdag_f: block(true, false),
        }
    }

    /// Von Neumann entropy of the first `n_modes` modes, from Schmidt values.
    pub fn block_entropy(&self, n_modes: usize) -> GaussianResult<f64> {
        use ndarray_linalg::SVD;
        let rows = 1usize << n_modes;
        let cols = self.amplitudes.len() / rows;
        // bit i is mode i, so low bits index the block
        let m = Array2::from_shape_fn((rows, cols), |(r, c)| self.amplitudes[r + rows * c]);
        let (_, sv, _) = m.svd(false, false).map_err(linalg)?;
        Ok(sv.iter().map(|s| s * s).filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_period_layout() {
        let im = pairing_from_values(&[0.7], 1).unwrap();
        let a = im.pairing();
        assert_eq!(a[[0, 1]], 1.0);
        assert_eq!(a[[1, 0]], -1.0);
        assert_eq!(a[[2, 3]], -1.0);
        assert_eq!(a[[0, 2]], 0.7);
        assert_eq!(a[[2, 0]], -0.7);
        assert_eq!(a[[1, 3]], 0.0);
        assert_eq!(a[[0, 3]], 0.0);
    }

    #[test]
    fn vacuum() {
        let im = GaussianIm::from_matrix(Array2::zeros((8, 8))).unwrap();
        let c = correlations(&im, &(0..8).collect::<Vec<_>>()).unwrap();
        assert_eq!(c.ff_dag, Array2::<f64>::eye(8));
        assert!(c.ff.iter().chain(c.fdag_f.iter()).chain(c.fdag_fdag.iter()).all(|x| *x == 0.0));
        let f = dense_fock_oracle(&im).unwrap();
        assert_eq!(f.amplitudes[0], 1.0);
        assert_eq!(f.amplitudes.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(pairing_from_values(&[1.0, 0.5], 3), Err(GaussianError::ShortKernel { .. })));
        let im = pairing_from_values(&[1.0, 0.5], 2).unwrap();
        assert!(entanglement_entropy(&im, 0).is_err());
        assert!(entanglement_entropy(&im, 2).is_err());
        assert!(correlations(&im, &[]).is_err());
        assert!(correlations(&im, &[8]).is_err());
        let big = pairing_from_values(&[0.0; 5], 5).unwrap();
        assert!(matches!(dense_fock_oracle(&big), Err(GaussianError::OracleTooLarge(5))));
    }

    #[test]
    fn cut_rounding() {
        assert_eq!(cut_for(150, 0.5), 75);
        assert_eq!(cut_for(150, 1.0 / 3.0), 50);
        assert_eq!(cut_for(1, 0.5), 0);
    }
}
