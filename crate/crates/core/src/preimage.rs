//! Fiber computations: polynomial root finding (Aberth-Ehrlich), exact
//! preimage enumeration for two-dimensional maps via resultant elimination,
//! topological degree by generic fiber counting, and equilibrium-measure
//! sampling by inverse iteration.

use crate::gaussian::GaussianRational;
use crate::poly::{Polynomial, PolynomialMap};
use crate::resultant::eliminate_z2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreimageError {
    #[error("root iteration did not converge")]
    NonConvergent,
    #[error("target lies on a degenerate fiber")]
    DegenerateTarget,
    #[error("fiber counts disagree across generic targets")]
    Inconsistent,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Roots with multiplicities from cluster analysis, plus per-cluster
/// residuals of the (max-normalized) polynomial.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<(Complex64, usize)>,
    pub residuals: Vec<f64>,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a polynomial with ascending coefficients.
/// Multiple roots are merged into clusters whose size is the multiplicity.
pub fn roots(coeffs: &[Complex64], tol: f64) -> Result<RootSet, PreimageError> {
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.last().map(|x| x.norm() == 0.0).unwrap_or(false) {
        c.pop();
    }
    if c.is_empty() {
        return Err(PreimageError::InvalidInput("zero polynomial".into()));
    }
    if c.len() == 1 {
        return Ok(RootSet { roots: Vec::new(), residuals: Vec::new() });
    }
    // Normalize and strip exact zero roots.
    let scale = c.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    for x in &mut c {
        *x /= scale;
    }
    let mut zero_mult = 0usize;
    while c.first().map(|x| x.norm() == 0.0).unwrap_or(false) {
        c.remove(0);
        zero_mult += 1;
    }
    let n = c.len() - 1;
    let mut z: Vec<Complex64> = Vec::new();
    if n > 0 {
        let lead = c[n].norm();
        let radius = 1.0
            + (0..n)
                .map(|j| (c[j].norm() / lead).powf(1.0 / (n - j) as f64))
                .fold(0.0f64, f64::max);
        z = (0..n)
            .map(|k| {
                let theta = std::f64::consts::TAU * (k as f64 + 0.35) / n as f64 + 0.3;
                Complex64::from_polar(radius, theta)
            })
            .collect();
        let eps = tol.max(1e-8);
        let mut converged = false;
        let mut stall = 0usize;
        let mut prev_max = f64::INFINITY;
        for _ in 0..400 {
            let mut max_corr = 0.0f64;
            let snapshot = z.clone();
            for k in 0..n {
                let (p, dp) = horner(&c, snapshot[k]);
                if p.norm() == 0.0 {
                    continue;
                }
                let w = if dp.norm() > 0.0 { p / dp } else { p };
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    if j != k {
                        let d = snapshot[k] - snapshot[j];
                        if d.norm() > 1e-300 {
                            s += 1.0 / d;
                        }
                    }
                }
                let denom = 1.0 - w * s;
                let corr = if denom.norm() > 1e-300 { w / denom } else { w };
                if corr.is_finite() {
                    z[k] -= corr;
                    max_corr = max_corr.max(corr.norm() / (1.0 + z[k].norm()));
                }
            }
            if max_corr <= eps {
                converged = true;
                break;
            }
            if max_corr >= prev_max * 0.95 {
                stall += 1;
                // Multiple roots stop improving near eps^(1/mult); accept
                // once corrections have plateaued at a small level.
                if stall > 25 && max_corr < 1e-5 {
                    converged = true;
                    break;
                }
            } else {
                stall = 0;
            }
            prev_max = max_corr;
        }
        if !converged {
            return Err(PreimageError::NonConvergent);
        }
        // Newton polish (helps simple roots; harmless on clusters).
        for zk in z.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = horner(&c, *zk);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() || step.norm() > 1.0 + zk.norm() {
                    break;
                }
                *zk -= step;
            }
        }
    }
    // Cluster within sqrt(tol) relative distance.
    let merge_tol = tol.max(1e-14).sqrt();
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &r in &z {
        match clusters
            .iter_mut()
            .find(|(c0, _)| (*c0 - r).norm() <= merge_tol * (1.0 + r.norm()))
        {
            Some((c0, m)) => {
                *c0 = (*c0 * *m as f64 + r) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => clusters.push((r, 1)),
        }
    }
    if zero_mult > 0 {
        clusters.push((Complex64::new(0.0, 0.0), zero_mult));
    }
    let residuals = clusters.iter().map(|(r, _)| horner(&c, *r).0.norm()).collect();
    Ok(RootSet { roots: clusters, residuals })
}

fn sub_constant(p: &Polynomial, c: &GaussianRational) -> Polynomial {
    let mut out = p.clone();
    out.add_term(vec![0; p.nvars()], -c);
    out
}

/// Specialize the first variable of a bivariate polynomial at a complex
/// number, returning ascending coefficients in the second variable.
fn specialize_z1(p: &Polynomial, z1: Complex64) -> Vec<Complex64> {
    let d2 = p.terms().map(|(e, _)| e[1]).max().unwrap_or(0) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); d2 + 1];
    for (e, c) in p.terms() {
        out[e[1] as usize] += c.to_complex() * z1.powu(e[0]);
    }
    out
}

fn newton_polish_2d(map: &PolynomialMap, target: &[Complex64], pt: &mut [Complex64]) {
    let jac = map.jacobian();
    for _ in 0..4 {
        let f = map.eval(pt);
        let r0 = f[0] - target[0];
        let r1 = f[1] - target[1];
        let a = jac[0][0].eval(pt);
        let b = jac[0][1].eval(pt);
        let c = jac[1][0].eval(pt);
        let d = jac[1][1].eval(pt);
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return;
        }
        let dx = (r0 * d - r1 * b) / det;
        let dy = (r1 * a - r0 * c) / det;
        if !dx.is_finite() || !dy.is_finite() {
            return;
        }
        pt[0] -= dx;
        pt[1] -= dy;
    }
}

/// All solutions of `f(z) = w` for a two-dimensional map, via exact
/// elimination of the second variable followed by numerical root solving
/// and full-system verification.
pub fn preimages(
    map: &PolynomialMap,
    target: &[GaussianRational],
    tol: f64,
    expected_elim_degree: Option<usize>,
) -> Result<Vec<Vec<Complex64>>, PreimageError> {
    if map.k() != 2 || target.len() != 2 {
        return Err(PreimageError::InvalidInput(
            "preimage enumeration is implemented for two-dimensional maps".into(),
        ));
    }
    let a = sub_constant(&map.components[0], &target[0]);
    let b = sub_constant(&map.components[1], &target[1]);
    let elim = eliminate_z2(&a, &b).ok_or(PreimageError::DegenerateTarget)?;
    if elim.is_zero() {
        return Err(PreimageError::DegenerateTarget);
    }
    if let Some(exp) = expected_elim_degree {
        if elim.degree().unwrap_or(0) < exp {
            return Err(PreimageError::DegenerateTarget);
        }
    }
    let z1_roots = roots(&elim.to_complex_coeffs(), tol)?;
    let w_c: Vec<Complex64> = target.iter().map(|g| g.to_complex()).collect();
    let w_scale = 1.0 + w_c.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for &(z1, _) in &z1_roots.roots {
        let sa = specialize_z1(&a, z1);
        let sb = specialize_z1(&b, z1);
        let (primary, _secondary) = if poly_deg(&sa) >= poly_deg(&sb) { (&sa, &sb) } else { (&sb, &sa) };
        if poly_deg(primary) == 0 {
            continue;
        }
        let z2_roots = match roots(primary, tol) {
            Ok(r) => r,
            Err(_) => continue,
        };
        for &(z2, _) in &z2_roots.roots {
            let mut pt = vec![z1, z2];
            newton_polish_2d(map, &w_c, &mut pt);
            let f = map.eval(&pt);
            let res = (f[0] - w_c[0]).norm().max((f[1] - w_c[1]).norm());
            if res > tol * w_scale {
                continue;
            }
            let dup = out
                .iter()
                .any(|q| (q[0] - pt[0]).norm() + (q[1] - pt[1]).norm()
                    <= tol.sqrt() * (1.0 + pt[0].norm() + pt[1].norm()));
            if !dup {
                out.push(pt);
            }
        }
    }
    Ok(out)
}

fn poly_deg(c: &[Complex64]) -> usize {
    c.iter().rposition(|x| x.norm() > 0.0).unwrap_or(0)
}

fn random_target(rng: &mut ChaCha8Rng) -> Vec<GaussianRational> {
    (0..2)
        .map(|_| {
            let re = GaussianRational::from_ratio(rng.gen_range(-400i64..=400), 64);
            let im = GaussianRational::from_ratio(rng.gen_range(-400i64..=400), 64);
            GaussianRational::new(re.re, im.re)
        })
        .collect()
}

/// Degree of the eliminant for a generic target, probed on random targets.
pub fn generic_elim_degree(map: &PolynomialMap, seed: u64) -> Result<usize, PreimageError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut best = 0usize;
    for _ in 0..8 {
        let t = random_target(&mut rng);
        let a = sub_constant(&map.components[0], &t[0]);
        let b = sub_constant(&map.components[1], &t[1]);
        if let Some(e) = eliminate_z2(&a, &b) {
            best = best.max(e.degree().unwrap_or(0));
        }
    }
    if best == 0 {
        return Err(PreimageError::DegenerateTarget);
    }
    Ok(best)
}

/// Number of preimages of a generic point, as the modal fiber count over
/// random targets.
pub fn topological_degree(map: &PolynomialMap, trials: usize, seed: u64) -> Result<usize, PreimageError> {
    let generic = generic_elim_degree(map, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: Vec<usize> = Vec::new();
    for _ in 0..trials.max(1) {
        let mut attempts = 0;
        loop {
            let t = random_target(&mut rng);
            match preimages(map, &t, 1e-10, Some(generic)) {
                Ok(pts) => {
                    counts.push(pts.len());
                    break;
                }
                Err(PreimageError::DegenerateTarget) | Err(PreimageError::NonConvergent) => {
                    attempts += 1;
                    if attempts > 5 {
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    if counts.is_empty() {
        return Err(PreimageError::NonConvergent);
    }
    let mut tally: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &c in &counts {
        *tally.entry(c).or_insert(0) += 1;
    }
    let (&mode, &freq) = tally.iter().max_by_key(|(_, &v)| v).unwrap();
    if (freq as f64) < 0.6 * counts.len() as f64 {
        return Err(PreimageError::Inconsistent);
    }
    Ok(mode)
}

/// Point cloud sampled by inverse iteration: random backward orbits whose
/// recorded tails distribute according to pulling back and normalizing a
/// smooth probability measure.
#[derive(Debug, Clone)]
pub struct MeasureCloud {
    pub points: Vec<Vec<Complex64>>,
    pub seed: u64,
    pub burn_in: usize,
    pub chains: usize,
    /// Stable hash of the canonical map text, for provenance checks.
    pub map_id: u64,
}

pub fn map_id(map: &PolynomialMap) -> u64 {
    // FNV-1a over the canonical formatted text.
    let s = crate::parser::format_map(map);
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

pub fn equilibrium_sample(
    map: &PolynomialMap,
    n_points: usize,
    burn_in: usize,
    seed: u64,
) -> Result<MeasureCloud, PreimageError> {
    if map.k() != 2 {
        return Err(PreimageError::InvalidInput(
            "equilibrium sampling is implemented for two-dimensional maps".into(),
        ));
    }
    let generic = generic_elim_degree(map, seed)?;
    let chains = 8usize.min(n_points.max(1));
    let quotas: Vec<usize> = (0..chains)
        .map(|c| n_points / chains + usize::from(c < n_points % chains))
        .collect();
    let results: Result<Vec<Vec<Vec<Complex64>>>, PreimageError> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ (chain as u64 + 1)));
            let mut collected: Vec<Vec<Complex64>> = Vec::with_capacity(quotas[chain]);
            let mut current: Vec<Complex64> = fresh_start(&mut rng);
            let mut warm = 0usize;
            let mut failures = 0usize;
            while collected.len() < quotas[chain] {
                let target: Vec<GaussianRational> = current
                    .iter()
                    .map(|&z| GaussianRational::from_complex_exact(z).unwrap())
                    .collect();
                match preimages(map, &target, 1e-10, Some(generic)) {
                    Ok(pts) if !pts.is_empty() => {
                        failures = 0;
                        let idx = rng.gen_range(0..pts.len());
                        current = pts[idx].clone();
                        if warm >= burn_in {
                            collected.push(current.clone());
                        } else {
                            warm += 1;
                        }
                    }
                    _ => {
                        failures += 1;
                        if failures > 50 {
                            return Err(PreimageError::NonConvergent);
                        }
                        current = fresh_start(&mut rng);
                        warm = 0;
                    }
                }
            }
            Ok(collected)
        })
        .collect();
    let points = results?.into_iter().flatten().collect();
    Ok(MeasureCloud { points, seed, burn_in, chains, map_id: map_id(map) })
}

fn fresh_start(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..2)
        .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn roots_of_simple_quartic() {
        // (x^2 - 1)(x^2 + 4): roots +/-1, +/-2i.
        let coeffs = [
            Complex64::new(-4.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let rs = roots(&coeffs, 1e-10).unwrap();
        assert_eq!(rs.roots.len(), 4);
        for (r, m) in &rs.roots {
            assert_eq!(*m, 1);
            let near = [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(0.0, -2.0),
            ]
            .iter()
            .any(|t| (r - t).norm() < 1e-8);
            assert!(near, "unexpected root {r}");
        }
        assert!(rs.residuals.iter().all(|&r| r < 1e-8));
    }

    #[test]
    fn roots_with_multiplicity() {
        // (x - 1)^2 (x + 2)
        let coeffs = [
            Complex64::new(2.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let rs = roots(&coeffs, 1e-10).unwrap();
        let mut mults: Vec<usize> = rs.roots.iter().map(|(_, m)| *m).collect();
        mults.sort();
        assert_eq!(mults, vec![1, 2]);
    }

    fn gi(n: i64) -> GaussianRational {
        GaussianRational::from_int(n)
    }

    #[test]
    fn squaring_preimages_of_four_four() {
        let pts = preimages(&corpus::squaring(), &[gi(4), gi(4)], 1e-10, None).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!((p[0].norm() - 2.0).abs() < 1e-9);
            assert!((p[1].norm() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn triangular_preimages() {
        // z1^2 = 4, z1 + 2 z2 = 10: points (2, 4) and (-2, 6).
        let pts = preimages(&corpus::triangular_affine(), &[gi(4), gi(10)], 1e-10, None).unwrap();
        assert_eq!(pts.len(), 2);
        let mut found = [false, false];
        for p in &pts {
            if (p[0] - Complex64::new(2.0, 0.0)).norm() < 1e-9 {
                assert!((p[1] - Complex64::new(4.0, 0.0)).norm() < 1e-9);
                found[0] = true;
            } else {
                assert!((p[0] + Complex64::new(2.0, 0.0)).norm() < 1e-9);
                assert!((p[1] - Complex64::new(6.0, 0.0)).norm() < 1e-9);
                found[1] = true;
            }
        }
        assert!(found[0] && found[1]);
    }

    #[test]
    fn regular_deg8_fiber() {
        // z2^2 = 16, z1^4 = 17 - 16 = 1: 8 points.
        let pts = preimages(&corpus::regular_deg8(), &[gi(17), gi(16)], 1e-10, None).unwrap();
        assert_eq!(pts.len(), 8);
    }

    #[test]
    fn degrees_match_theory() {
        assert_eq!(topological_degree(&corpus::squaring(), 5, 11).unwrap(), 4);
        assert_eq!(topological_degree(&corpus::triangular_affine(), 5, 11).unwrap(), 2);
    }

    #[test]
    fn equilibrium_cloud_is_deterministic() {
        let a = equilibrium_sample(&corpus::squaring(), 64, 10, 99).unwrap();
        let b = equilibrium_sample(&corpus::squaring(), 64, 10, 99).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 64);
        // The squaring map's equilibrium measure sits on the unit torus.
        let on_torus = a
            .points
            .iter()
            .filter(|p| (p[0].norm() - 1.0).abs() < 1e-2 && (p[1].norm() - 1.0).abs() < 1e-2)
            .count();
        assert!(on_torus as f64 >= 0.99 * a.points.len() as f64);
    }
}
