//! Slice-based measure diagnostics: Green-function fields on complex lines,
//! discrete Laplacian densities, Lyapunov-type norm growth on point clouds,
//! dimension bounds, and a Holder-continuity regression.

use crate::dynamics::{classify_record, green, iterate, Basin, DynParams, GreenResult};
use crate::poly::{BlockStructure, PolynomialMap, spectral_norm};
use crate::preimage::MeasureCloud;
use crate::regularity::predict_invariants;
use crate::scaled::{ScaledEvaluator, ScaledPoint};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("indeterminate fraction {0:.3} exceeds the 5% budget")]
    TooManyIndeterminate(f64),
    #[error("norm growth estimate is at most one; exponents are undefined")]
    MBelowOne,
    #[error("need at least {needed} usable samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

/// Axis-aligned rectangle in one complex coordinate with the others fixed.
#[derive(Debug, Clone, Serialize)]
pub struct SliceSpec {
    /// 0-based index of the varying complex coordinate.
    pub coord: usize,
    pub center: Complex64,
    pub width: f64,
    pub height: f64,
    pub res_x: usize,
    pub res_y: usize,
    /// Values of the remaining coordinates, in increasing index order.
    pub fixed: Vec<Complex64>,
}

impl SliceSpec {
    pub fn k(&self) -> usize {
        self.fixed.len() + 1
    }

    /// Pixel-center point, row-major with row 0 at the top.
    pub fn point(&self, i: usize, j: usize) -> Vec<Complex64> {
        let x = self.center.re + ((i as f64 + 0.5) / self.res_x as f64 - 0.5) * self.width;
        let y = self.center.im + (0.5 - (j as f64 + 0.5) / self.res_y as f64) * self.height;
        let mut z = Vec::with_capacity(self.k());
        let mut fixed = self.fixed.iter();
        for c in 0..self.k() {
            if c == self.coord {
                z.push(Complex64::new(x, y));
            } else {
                z.push(*fixed.next().unwrap());
            }
        }
        z
    }

    pub fn hx(&self) -> f64 {
        self.width / self.res_x as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.res_y as f64
    }
}

/// Green values on a slice; `None` marks indeterminate pixels and
/// `f64::INFINITY` marks pixels escaping faster than the requested rate.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub spec: SliceSpec,
    pub alpha: f64,
    pub values: Vec<Option<f64>>,
}

impl GreenField {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.spec.res_x + i]
    }

    pub fn indeterminate_fraction(&self) -> f64 {
        let n = self.values.len().max(1);
        self.values.iter().filter(|v| v.is_none()).count() as f64 / n as f64
    }
}

pub fn green_field(
    eval: &ScaledEvaluator,
    alpha: f64,
    spec: &SliceSpec,
    tol: f64,
    params: &DynParams,
) -> GreenField {
    let values: Vec<Option<f64>> = (0..spec.res_y)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..spec.res_x).map(move |i| (i, j)).collect::<Vec<_>>().into_iter()
        })
        .map(|(i, j)| {
            let p = ScaledPoint::from_coords(&spec.point(i, j));
            match green(eval, alpha, &p, tol, params) {
                Ok(v) => match v.value {
                    GreenResult::Finite(g) => Some(g),
                    GreenResult::Infinite => Some(f64::INFINITY),
                },
                Err(_) => None,
            }
        })
        .collect();
    GreenField { spec: spec.clone(), alpha, values }
}

/// Basin labels over a slice.
pub fn basin_grid(
    eval: &ScaledEvaluator,
    alpha: &[f64],
    spec: &SliceSpec,
    params: &DynParams,
) -> Vec<Basin> {
    (0..spec.res_y)
        .into_par_iter()
        .flat_map_iter(|j| (0..spec.res_x).map(move |i| (i, j)).collect::<Vec<_>>().into_iter())
        .map(|(i, j)| {
            let p = ScaledPoint::from_coords(&spec.point(i, j));
            let record = iterate(eval, &p, params);
            classify_record(&record, alpha, params)
        })
        .collect()
}

/// Discrete Laplacian of a Green field, interpreted as a density. Negative
/// values (discretization noise) are clamped to zero and accounted for.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub values: Vec<Option<f64>>,
    pub res_x: usize,
    pub res_y: usize,
    /// Fraction of the raw unsigned mass that was negative and clamped.
    pub clamped_fraction: f64,
    pub most_negative: f64,
    /// Sum of clamped values times the pixel area.
    pub total_mass: f64,
}

pub fn laplacian_density(field: &GreenField) -> Result<DensityGrid, MeasureError> {
    let frac = field.indeterminate_fraction();
    if frac > 0.05 {
        return Err(MeasureError::TooManyIndeterminate(frac));
    }
    let (rx, ry) = (field.spec.res_x, field.spec.res_y);
    let (hx, hy) = (field.spec.hx(), field.spec.hy());
    let mut values = vec![None; rx * ry];
    let mut neg_mass = 0.0f64;
    let mut pos_mass = 0.0f64;
    let mut most_negative = 0.0f64;
    for j in 1..ry.saturating_sub(1) {
        for i in 1..rx.saturating_sub(1) {
            let sten = [
                field.get(i, j),
                field.get(i - 1, j),
                field.get(i + 1, j),
                field.get(i, j - 1),
                field.get(i, j + 1),
            ];
            if sten.iter().any(|v| v.map(|x| !x.is_finite()).unwrap_or(true)) {
                continue;
            }
            let c = sten[0].unwrap();
            let raw = (sten[1].unwrap() + sten[2].unwrap() - 2.0 * c) / (hx * hx)
                + (sten[3].unwrap() + sten[4].unwrap() - 2.0 * c) / (hy * hy);
            if raw < 0.0 {
                neg_mass += -raw;
                most_negative = most_negative.min(raw);
                values[j * rx + i] = Some(0.0);
            } else {
                pos_mass += raw;
                values[j * rx + i] = Some(raw);
            }
        }
    }
    let denom = pos_mass + neg_mass;
    Ok(DensityGrid {
        values,
        res_x: rx,
        res_y: ry,
        clamped_fraction: if denom > 0.0 { neg_mass / denom } else { 0.0 },
        most_negative,
        total_mass: pos_mass * hx * hy,
    })
}

/// Max over cloud points of the n-step derivative norm growth rate
/// `||Df^n||^(1/n)`, with per-step renormalization of the matrix product.
pub fn lyapunov_norm(
    map: &PolynomialMap,
    points: &[Vec<Complex64>],
    n: usize,
) -> Result<f64, MeasureError> {
    let k = map.k();
    let jac = map.jacobian();
    let rates: Vec<f64> = points
        .par_iter()
        .filter_map(|start| {
            let mut z = start.clone();
            let mut b: Vec<Vec<Complex64>> = (0..k)
                .map(|i| (0..k).map(|j| Complex64::new(f64::from(i == j), 0.0)).collect())
                .collect();
            let mut log_acc = 0.0f64;
            for _ in 0..n {
                let a: Vec<Vec<Complex64>> = jac
                    .iter()
                    .map(|row| row.iter().map(|p| p.eval(&z)).collect())
                    .collect();
                let mut nb = vec![vec![Complex64::new(0.0, 0.0); k]; k];
                for r in 0..k {
                    for cc in 0..k {
                        for t in 0..k {
                            nb[r][cc] += a[r][t] * b[t][cc];
                        }
                    }
                }
                let frob: f64 = nb.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if frob == 0.0 || !frob.is_finite() {
                    return None;
                }
                for row in &mut nb {
                    for x in row.iter_mut() {
                        *x /= frob;
                    }
                }
                log_acc += frob.ln();
                b = nb;
                z = map.eval(&z);
                if z.iter().any(|c| !c.is_finite() || c.norm() > 1e8) {
                    return None;
                }
            }
            let sigma = spectral_norm(&b, k);
            if sigma <= 0.0 {
                return None;
            }
            Some(((log_acc + sigma.ln()) / n as f64).exp())
        })
        .collect();
    if rates.is_empty() {
        return Err(MeasureError::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(rates.into_iter().fold(0.0, f64::max))
}

/// Exponent bookkeeping derived from the rate spectrum and a measured norm
/// growth rate: per-block Holder exponents, their block-size weighted sum,
/// and the dimension lower bound they certify.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub m_hat: f64,
    pub a: Vec<f64>,
    pub weighted_sum: f64,
    pub mu_bound: f64,
    /// |weighted_sum - mu_bound|; zero up to rounding by construction.
    pub identity_residual: f64,
}

pub fn dimension_report(
    blocks: &BlockStructure,
    alpha: &[f64],
    m_hat: f64,
) -> Result<DimensionReport, MeasureError> {
    if m_hat <= 1.0 {
        return Err(MeasureError::MBelowOne);
    }
    let ln_m = m_hat.ln();
    let a: Vec<f64> = alpha.iter().map(|&x| x.ln() / ln_m).collect();
    let weighted_sum: f64 = a
        .iter()
        .enumerate()
        .map(|(i, &ai)| blocks.block_size(i + 1) as f64 * ai)
        .sum();
    let (d_t, _) = predict_invariants(blocks, alpha);
    let mu_bound = d_t.ln() / ln_m;
    Ok(DimensionReport {
        m_hat,
        a,
        weighted_sum,
        mu_bound,
        identity_residual: (weighted_sum - mu_bound).abs(),
    })
}

/// Least-squares regression of `ln G` against `ln(distance to the cloud)`
/// over samples with Green value in (0, 1).
#[derive(Debug, Clone, Serialize)]
pub struct HolderDiagnostic {
    pub slope: f64,
    pub stderr: f64,
    pub n_used: usize,
}

pub fn holder_diagnostic(
    samples: &[(Vec<Complex64>, f64)],
    cloud: &MeasureCloud,
) -> Result<HolderDiagnostic, MeasureError> {
    let stride = (cloud.points.len() / 2000).max(1);
    let anchors: Vec<&Vec<Complex64>> = cloud.points.iter().step_by(stride).collect();
    if anchors.is_empty() {
        return Err(MeasureError::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (pt, g) in samples {
        if !(*g > 0.0 && *g < 1.0) {
            continue;
        }
        let d = anchors
            .iter()
            .map(|a| {
                pt.iter()
                    .zip(a.iter())
                    .map(|(p, q)| (p - q).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if d > 0.0 && d.is_finite() {
            xs.push(d.ln());
            ys.push(g.ln());
        }
    }
    let n = xs.len();
    if n < 10 {
        return Err(MeasureError::InsufficientSamples { needed: 10, got: n });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid_ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - my - slope * (x - mx);
            e * e
        })
        .sum();
    let stderr = (resid_ss / ((n as f64 - 2.0).max(1.0)) / sxx).sqrt();
    Ok(HolderDiagnostic { slope, stderr, n_used: n })
}

/// Total-variation distance between two empirical distributions on C^k,
/// measured on a shared uniform grid with `bins` cells per real axis.
pub fn empirical_tv(a: &[Vec<Complex64>], b: &[Vec<Complex64>], bins: usize) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let k = a[0].len();
    let dims = 2 * k;
    let coords = |p: &Vec<Complex64>, d: usize| -> f64 {
        let c = p[d / 2];
        if d % 2 == 0 { c.re } else { c.im }
    };
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for p in a.iter().chain(b.iter()) {
        for d in 0..dims {
            let v = coords(p, d);
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let cell = |p: &Vec<Complex64>| -> u64 {
        let mut idx = 0u64;
        for d in 0..dims {
            let span = (hi[d] - lo[d]).max(1e-300);
            let mut q = ((coords(p, d) - lo[d]) / span * bins as f64) as u64;
            if q >= bins as u64 {
                q = bins as u64 - 1;
            }
            idx = idx * bins as u64 + q;
        }
        idx
    };
    use std::collections::HashMap;
    let mut ha: HashMap<u64, f64> = HashMap::new();
    let mut hb: HashMap<u64, f64> = HashMap::new();
    for p in a {
        *ha.entry(cell(p)).or_insert(0.0) += 1.0 / a.len() as f64;
    }
    for p in b {
        *hb.entry(cell(p)).or_insert(0.0) += 1.0 / b.len() as f64;
    }
    let keys: std::collections::BTreeSet<u64> = ha.keys().chain(hb.keys()).copied().collect();
    0.5 * keys
        .into_iter()
        .map(|key| (ha.get(&key).unwrap_or(&0.0) - hb.get(&key).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::poly::block_structure;
    use crate::preimage::equilibrium_sample;

    fn unit_slice(res: usize) -> SliceSpec {
        SliceSpec {
            coord: 0,
            center: Complex64::new(0.0, 0.0),
            width: 4.0,
            height: 4.0,
            res_x: res,
            res_y: res,
            fixed: vec![Complex64::new(0.5, 0.0)],
        }
    }

    #[test]
    fn green_field_matches_closed_form_for_squaring() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let spec = unit_slice(16);
        let field = green_field(&eval, 2.0, &spec, 1e-10, &DynParams::default());
        assert_eq!(field.indeterminate_fraction(), 0.0);
        for j in 0..16 {
            for i in 0..16 {
                let z = spec.point(i, j);
                let expected = z[0].norm().max(z[1].norm()).ln().max(0.0);
                let got = field.get(i, j).unwrap();
                assert!((got - expected).abs() < 1e-8, "pixel {i},{j}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn laplacian_mass_concentrates_on_circle() {
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let spec = unit_slice(64);
        let field = green_field(&eval, 2.0, &spec, 1e-10, &DynParams::default());
        let density = laplacian_density(&field).unwrap();
        assert!(density.total_mass > 0.0);
        // log^+ |z| is harmonic off |z|=1; mass should sit near the circle.
        let mut near = 0.0;
        let mut far = 0.0;
        for j in 1..63 {
            for i in 1..63 {
                if let Some(v) = density.values[j * 64 + i] {
                    let z = spec.point(i, j)[0];
                    if (z.norm() - 1.0).abs() < 0.15 {
                        near += v;
                    } else {
                        far += v;
                    }
                }
            }
        }
        assert!(near > 10.0 * far.max(1e-12), "near {near} far {far}");
    }

    #[test]
    fn lyapunov_rate_of_squaring_on_torus() {
        let cloud = equilibrium_sample(&corpus::squaring(), 200, 30, 5).unwrap();
        let m = lyapunov_norm(&corpus::squaring(), &cloud.points, 20).unwrap();
        assert!((m - 2.0).abs() < 0.05, "m_hat {m}");
    }

    #[test]
    fn dimension_identity_is_structural() {
        for (_, map) in corpus::all() {
            let (blocks, _) = block_structure(&map).unwrap();
            let alpha: Vec<f64> = blocks.d.iter().map(|&d| d as f64).collect();
            if alpha.last().copied().unwrap_or(0.0) < 1.0 {
                continue;
            }
            let rep = dimension_report(&blocks, &alpha, 2.37).unwrap();
            assert!(rep.identity_residual < 1e-9);
        }
        let (blocks, _) = block_structure(&corpus::squaring()).unwrap();
        let rep = dimension_report(&blocks, &[2.0], 2.0).unwrap();
        assert!((rep.mu_bound - 2.0).abs() < 1e-12);
        assert!(dimension_report(&blocks, &[2.0], 0.9).is_err());
    }

    #[test]
    fn tv_of_identical_clouds_is_zero() {
        let cloud = equilibrium_sample(&corpus::squaring(), 500, 20, 7).unwrap();
        assert_eq!(empirical_tv(&cloud.points, &cloud.points, 6), 0.0);
        let other = equilibrium_sample(&corpus::squaring(), 500, 20, 8).unwrap();
        let tv = empirical_tv(&cloud.points, &other.points, 4);
        assert!(tv < 0.5, "tv {tv}");
    }

    #[test]
    fn holder_slope_near_one_for_squaring() {
        let cloud = equilibrium_sample(&corpus::squaring(), 2000, 30, 9).unwrap();
        let eval = ScaledEvaluator::new(&corpus::squaring());
        let params = DynParams::default();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let mut samples = Vec::new();
        for _ in 0..400 {
            let r1 = 1.0 + rng.gen_range(0.001..1.5f64);
            let r2: f64 = rng.gen_range(0.2..1.0);
            let t1 = rng.gen_range(0.0..std::f64::consts::TAU);
            let t2 = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = vec![Complex64::from_polar(r1, t1), Complex64::from_polar(r2, t2)];
            let p = ScaledPoint::from_coords(&z);
            if let Ok(v) = green(&eval, 2.0, &p, 1e-12, &params) {
                if let Some(g) = v.finite() {
                    samples.push((z, g));
                }
            }
        }
        let diag = holder_diagnostic(&samples, &cloud).unwrap();
        // G = log r1 ~ (r1 - 1) = distance to the torus in the r1 direction.
        assert!(diag.slope > 0.6 && diag.slope < 1.4, "slope {}", diag.slope);
    }
}
