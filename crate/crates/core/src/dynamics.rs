//! Orbit iteration in log-scaled coordinates, escape-rate estimation and
//! basin classification, partial Green functions, and the small-scale
//! growth exponent on large spheres.

use crate::scaled::{EvalError, ScaledEvaluator, ScaledPoint};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynError {
    #[error("orbit too short to estimate a rate")]
    TooShort,
    #[error("Green iteration did not converge")]
    NonConvergent,
}

#[derive(Debug, Clone)]
pub struct DynParams {
    /// Log magnitude beyond which an orbit counts as escaped.
    pub escape_ell: f64,
    /// Log magnitude below which the tail counts as bounded.
    pub bound_ell: f64,
    /// Tail window length for boundedness / growth decisions.
    pub window: usize,
    /// Iteration budget for classification.
    pub max_n: usize,
    /// Mantissa bits allowed when cancellation forces retries.
    pub precision_cap: u32,
    /// Relative tolerance when matching an observed rate to the spectrum.
    pub basin_rel_tol: f64,
}

impl Default for DynParams {
    fn default() -> Self {
        Self {
            escape_ell: 1e4,
            bound_ell: 1e6f64.ln(),
            window: 50,
            max_n: 200,
            precision_cap: 1024,
            basin_rel_tol: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitStatus {
    Escaped,
    Bounded,
    MaxedOut,
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct OrbitRecord {
    /// Log magnitudes along the orbit, starting with the seed point
    /// (`-inf` encodes the origin).
    pub ells: Vec<f64>,
    pub status: OrbitStatus,
    pub steps: usize,
    /// Highest mantissa precision any step needed.
    pub max_bits: u32,
    /// Multiplicative escape-rate estimate from the tail, when escaped.
    pub alpha_hat: Option<f64>,
}

/// Iterate until escape, a bounded tail, or the step budget runs out.
pub fn iterate(eval: &ScaledEvaluator, start: &ScaledPoint, params: &DynParams) -> OrbitRecord {
    let mut point = start.clone();
    let mut ells = vec![point.log_magnitude()];
    let mut max_bits = 53u32;
    let mut status = OrbitStatus::MaxedOut;
    for _ in 0..params.max_n {
        match eval.eval_adaptive(&point, params.precision_cap) {
            Ok((step, bits)) => {
                max_bits = max_bits.max(bits);
                point = step.point;
                ells.push(point.log_magnitude());
                if point.ell > params.escape_ell {
                    status = OrbitStatus::Escaped;
                    break;
                }
            }
            Err(_) => {
                status = OrbitStatus::Indeterminate;
                break;
            }
        }
    }
    if status == OrbitStatus::MaxedOut {
        let w = params.window.min(ells.len().saturating_sub(1)).max(1);
        let tail = &ells[ells.len() - w..];
        if tail.iter().all(|&e| e < params.bound_ell) {
            status = OrbitStatus::Bounded;
        } else {
            // Steady additive growth past the bound counts as (slow) escape.
            let incs: Vec<f64> = tail.windows(2).map(|p| p[1] - p[0]).collect();
            let last = *ells.last().unwrap();
            if last > params.bound_ell
                && !incs.is_empty()
                && incs.iter().all(|&d| d.is_finite() && d > 0.01)
            {
                status = OrbitStatus::Escaped;
            }
        }
    }
    let steps = ells.len() - 1;
    let mut record = OrbitRecord { ells, status, steps, max_bits, alpha_hat: None };
    if status == OrbitStatus::Escaped {
        record.alpha_hat = tail_rate(&record.ells);
    }
    record
}

/// Geometric mean of the tail ratios of consecutive log magnitudes.
fn tail_rate(ells: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = ells
        .windows(2)
        .filter(|p| p[0] > 1.0 && p[1] > 1.0)
        .map(|p| (p[0], p[1]))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let take = pairs.len().min(6);
    let tail = &pairs[pairs.len() - take..];
    let mean = tail.iter().map(|(a, b)| (b / a).ln()).sum::<f64>() / take as f64;
    Some(mean.exp())
}

/// Multiplicative escape rate: the limit of `ell_{n+1}/ell_n` along the
/// tail; zero for orbits with a bounded tail.
pub fn escape_degree(record: &OrbitRecord) -> Result<f64, DynError> {
    match record.status {
        OrbitStatus::Bounded => Ok(0.0),
        OrbitStatus::Escaped => {
            if record.ells.len() < 4 {
                return Err(DynError::TooShort);
            }
            record.alpha_hat.or_else(|| tail_rate(&record.ells)).ok_or(DynError::TooShort)
        }
        _ => Err(DynError::TooShort),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Basin {
    /// Escaping at the rate of block `i` (1-based).
    U(usize),
    /// Bounded orbit.
    K,
    Indeterminate,
}

/// Match an orbit against the rate spectrum `alpha` (descending).
pub fn classify(
    eval: &ScaledEvaluator,
    alpha: &[f64],
    start: &ScaledPoint,
    params: &DynParams,
) -> Basin {
    let record = iterate(eval, start, params);
    classify_record(&record, alpha, params)
}

pub fn classify_record(record: &OrbitRecord, alpha: &[f64], params: &DynParams) -> Basin {
    match record.status {
        OrbitStatus::Bounded => Basin::K,
        OrbitStatus::Escaped => {
            let ahat = match record.alpha_hat {
                Some(a) => a,
                None => return Basin::Indeterminate,
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                let rel = (ahat - a).abs() / a;
                if rel <= params.basin_rel_tol && best.map(|(_, b)| rel < b).unwrap_or(true) {
                    best = Some((i + 1, rel));
                }
            }
            match best {
                Some((i, _)) => Basin::U(i),
                None => Basin::Indeterminate,
            }
        }
        _ => Basin::Indeterminate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GreenResult {
    Finite(f64),
    /// The orbit escapes strictly faster than the requested rate.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: GreenResult,
    pub iterations: usize,
    pub residual: f64,
}

impl GreenValue {
    pub fn finite(&self) -> Option<f64> {
        match self.value {
            GreenResult::Finite(g) => Some(g),
            GreenResult::Infinite => None,
        }
    }
}

/// Partial Green function `lim ell_n^+ / alpha^n` for a single rate
/// `alpha > 1`, iterated until successive normalized values differ by at
/// most `tol`.
pub fn green(
    eval: &ScaledEvaluator,
    alpha: f64,
    start: &ScaledPoint,
    tol: f64,
    params: &DynParams,
) -> Result<GreenValue, DynError> {
    assert!(alpha > 1.0, "Green normalization needs a rate above one");
    let ln_alpha = alpha.ln();
    let plus = |ell: f64, n: usize| -> f64 {
        if ell <= 0.0 || ell == f64::NEG_INFINITY {
            0.0
        } else {
            (ell.ln() - n as f64 * ln_alpha).exp()
        }
    };
    let mut point = start.clone();
    let mut g_prev = plus(point.log_magnitude(), 0);
    let mut growth_streak = 0u32;
    let max_iter = 5000usize;
    for n in 1..=max_iter {
        let (step, _) = eval
            .eval_adaptive(&point, params.precision_cap)
            .map_err(|_: EvalError| DynError::NonConvergent)?;
        point = step.point;
        let g = plus(point.log_magnitude(), n);
        let residual = (g - g_prev).abs();
        if g > 1e3 && g > 1.5 * g_prev && g_prev > 0.0 {
            growth_streak += 1;
            if growth_streak >= 3 {
                return Ok(GreenValue { value: GreenResult::Infinite, iterations: n, residual });
            }
        } else {
            growth_streak = 0;
        }
        if n >= 5 && residual <= tol {
            return Ok(GreenValue { value: GreenResult::Finite(g), iterations: n, residual });
        }
        if point.ell > 1e290 {
            return Ok(GreenValue { value: GreenResult::Finite(g), iterations: n, residual });
        }
        g_prev = g;
    }
    Err(DynError::NonConvergent)
}

/// Largest deviation of `G(f(z)) - alpha * G(z)` over the sample points
/// (pairs where both values are finite).
pub fn invariance_residual(
    eval: &ScaledEvaluator,
    alpha: f64,
    points: &[ScaledPoint],
    tol: f64,
    params: &DynParams,
) -> f64 {
    let mut worst = 0.0f64;
    for p in points {
        let g_here = match green(eval, alpha, p, tol, params) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let image = match eval.eval_adaptive(p, params.precision_cap) {
            Ok((s, _)) => s.point,
            Err(_) => continue,
        };
        let g_image = match green(eval, alpha, &image, tol, params) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if let (Some(a), Some(b)) = (g_here.finite(), g_image.finite()) {
            worst = worst.max((b - alpha * a).abs());
        }
    }
    worst
}

/// Minimum of `log|f(z)| / log|z|` over the sphere `|z| = R`
/// (`radius_log = ln R`), by seeded multistart plus compass-search descent.
pub fn lojasiewicz_estimate(
    eval: &ScaledEvaluator,
    radius_log: f64,
    n_samples: usize,
    descent_steps: usize,
    seed: u64,
    params: &DynParams,
) -> f64 {
    let k = eval.k();
    let two_pi = std::f64::consts::TAU;
    // Parameters per candidate: dominant coordinate j0 fixed at modulus R,
    // the rest with log-radius fractions x in [0,1], all phases free.
    let objective = |j0: usize, x: &[f64], phi: &[f64]| -> f64 {
        let u: Vec<Complex64> = (0..k)
            .map(|j| {
                let mag = if j == j0 { 1.0 } else { ((x[j] - 1.0) * radius_log).exp() };
                Complex64::from_polar(mag, phi[j])
            })
            .collect();
        let p = ScaledPoint { u, ell: radius_log };
        match eval.eval_adaptive(&p, params.precision_cap) {
            Ok((step, _)) => {
                let out = step.point.log_magnitude();
                if out.is_finite() {
                    out / radius_log
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(f64, usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for _ in 0..n_samples.max(1) {
        let j0 = rng.gen_range(0..k);
        let mut x: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        x[j0] = 1.0;
        let phi: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..two_pi)).collect();
        let v = objective(j0, &x, &phi);
        candidates.push((v, j0, x, phi));
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = candidates.first().map(|c| c.0).unwrap_or(f64::INFINITY);

    for (v0, j0, x0, phi0) in candidates.into_iter().take(8) {
        let mut val = v0;
        let mut x = x0;
        let mut phi = phi0;
        let mut step = 0.3f64;
        for _ in 0..descent_steps {
            let mut improved = false;
            for j in 0..k {
                if j != j0 {
                    for sgn in [1.0f64, -1.0] {
                        let old = x[j];
                        x[j] = (old + sgn * step).clamp(0.0, 1.0);
                        let v = objective(j0, &x, &phi);
                        if v < val {
                            val = v;
                            improved = true;
                        } else {
                            x[j] = old;
                        }
                    }
                }
                for sgn in [1.0f64, -1.0] {
                    let old = phi[j];
                    phi[j] = old + sgn * step;
                    let v = objective(j0, &x, &phi);
                    if v < val {
                        val = v;
                        improved = true;
                    } else {
                        phi[j] = old;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-13 {
                    break;
                }
            }
        }
        best = best.min(val);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::scaled::ScaledEvaluator;

    fn pt(re1: f64, im1: f64, re2: f64, im2: f64) -> ScaledPoint {
        ScaledPoint::from_coords(&[Complex64::new(re1, im1), Complex64::new(re2, im2)])
    }

    #[test]
    fn squaring_orbit_escapes_at_rate_two() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        let rec = iterate(&eval, &pt(2.0, 0.0, 0.5, 0.0), &params);
        assert_eq!(rec.status, OrbitStatus::Escaped);
        let rate = escape_degree(&rec).unwrap();
        assert!((rate - 2.0).abs() < 1e-6, "rate {rate}");
    }

    #[test]
    fn squaring_orbit_inside_disc_is_bounded() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        let rec = iterate(&eval, &pt(0.5, 0.0, 0.9, 0.0), &params);
        assert_eq!(rec.status, OrbitStatus::Bounded);
        assert_eq!(escape_degree(&rec).unwrap(), 0.0);
    }

    #[test]
    fn additive_growth_counts_as_slow_escape() {
        // Second component grows like 2^n in modulus: ell increments ~ln 2.
        let eval = ScaledEvaluator::new(&corpus::triangular_affine());
        let params = DynParams::default();
        let rec = iterate(&eval, &pt(0.0, 0.0, 4.0, 0.0), &params);
        assert_eq!(rec.status, OrbitStatus::Escaped);
        let rate = escape_degree(&rec).unwrap();
        assert!((rate - 1.0).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn classify_two_rate_map() {
        let f = corpus::semi_regular_deg12();
        let eval = ScaledEvaluator::new(&f);
        let params = DynParams::default();
        let alpha = [6.0, 2.0];
        assert_eq!(classify(&eval, &alpha, &pt(3.0, 0.0, 0.1, 0.0), &params), Basin::U(1));
        assert_eq!(classify(&eval, &alpha, &pt(0.01, 0.0, 0.01, 0.0), &params), Basin::K);
    }

    #[test]
    fn squaring_green_matches_closed_form() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        for (z1, z2) in [(3.0, 0.7), (1.5, 1.5), (0.3, 5.0), (0.2, 0.4)] {
            let p = pt(z1, 0.0, z2, 0.0);
            let g = green(&eval, 2.0, &p, 1e-12, &params).unwrap();
            let expected = z1.abs().max(z2.abs()).ln().max(0.0);
            assert!((g.finite().unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn green_detects_faster_escape() {
        // Rate-6 orbit queried at rate 2 diverges.
        let eval = ScaledEvaluator::new(&corpus::semi_regular_deg12());
        let params = DynParams::default();
        let g = green(&eval, 2.0, &pt(3.0, 0.0, 0.1, 0.0), 1e-9, &params).unwrap();
        assert_eq!(g.value, GreenResult::Infinite);
    }

    #[test]
    fn green_invariance_squaring() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        let pts: Vec<ScaledPoint> = (0..50)
            .map(|i| {
                let t = i as f64 / 7.0;
                pt(1.0 + t, 0.3 * t, 2.0 - 0.02 * i as f64, 0.1)
            })
            .collect();
        let r = invariance_residual(&eval, 2.0, &pts, 1e-12, &params);
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn lojasiewicz_squaring_is_exactly_two() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        let l = lojasiewicz_estimate(&eval, 1e6f64.ln(), 50, 50, 1, &params);
        assert!((l - 2.0).abs() < 1e-6, "lambda {l}");
    }

    #[test]
    fn lojasiewicz_regular_deg8() {
        let eval = ScaledEvaluator::new(&corpus::regular_deg8());
        let params = DynParams::default();
        let l = lojasiewicz_estimate(&eval, 1e6f64.ln(), 200, 200, 2, &params);
        assert!(l > 1.9 && l < 2.2, "lambda {l}");
    }
}
