//! Derived quantities read off autocorrelation curves.

/// Least-squares line `ln C ≈ a + b t` through the points of `curve` with
/// `t ≥ from` and positive `C`; `None` with fewer than three such points.
pub fn log_linear_fit(curve: &[f64], from: usize) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve.iter().enumerate().skip(from).filter(|(_, c)| **c > 0.0).map(|(t, c)| (t as f64, c.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Time at which the fast decay of `reference` hands over to the slow tail of `curve`.
///
/// The tail is the log-linear fit of `curve` over `t ≥ tail_from`; the crossover
/// is the first point where `ln reference` falls below it, linearly interpolated
/// in `t`. A non-positive reference value counts as `−∞`, in which case the
/// crossover is placed at that integer time.
pub fn crossover_time(reference: &[f64], curve: &[f64], tail_from: usize) -> Option<f64> {
    let (a, b) = log_linear_fit(curve, tail_from)?;
    let gap = |t: usize| (reference[t] > 0.0).then(|| reference[t].ln() - (a + b * t as f64));
    for t in 0..reference.len().saturating_sub(1) {
        let Some(now) = gap(t) else { continue };
        if now < 0.0 {
            return Some(t as f64);
        }
        match gap(t + 1) {
            None => return Some((t + 1) as f64),
            Some(next) if next < 0.0 => return Some(t as f64 + now / (now - next)),
            Some(_) => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_fit() {
        let c: Vec<f64> = (0..20).map(|t| 0.5 * (-0.1 * t as f64).exp()).collect();
        let (a, b) = log_linear_fit(&c, 5).unwrap();
        assert!((a - 0.5f64.ln()).abs() < 1e-12 && (b + 0.1).abs() < 1e-12);
        assert!(log_linear_fit(&c, 18).is_none());
    }

    #[test]
    fn crossing_of_two_exponentials() {
        // fast e^{-t} meets the tail 0.1 e^{-0.1 t} at t = ln(10) / 0.9
        let fast: Vec<f64> = (0..30).map(|t| (-(t as f64)).exp()).collect();
        let slow: Vec<f64> = (0..30).map(|t| (-(t as f64)).exp() + 0.1 * (-0.1 * t as f64).exp()).collect();
        let x = crossover_time(&fast, &slow, 15).unwrap();
        let want = 10f64.ln() / 0.9;
        assert!(x > want.floor() && x < want.ceil() && (x - want).abs() < 0.1, "{x} vs {want}");
    }

    #[test]
    fn vanishing_reference() {
        let fast = vec![1.0, 0.5, 0.0, 0.0, 0.0];
        let slow = vec![0.4; 5];
        assert_eq!(crossover_time(&fast, &slow, 0), Some(2.0));
    }
}
