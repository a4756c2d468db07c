//! Regularity analysis: algebraic stability, level-by-level regularity of
//! top homogeneous parts, the two-dimensional Newton-polygon criterion with
//! its monomial change of variables, and prediction of the associated
//! degree invariants.

use crate::poly::{block_structure, BlockStructure, Polynomial, PolynomialMap};
use crate::resultant::{binary_form_resultant, binary_forms_only_trivial_zero};
use num_complex::Complex64;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegularityError {
    #[error("map error: {0}")]
    Malformed(#[from] crate::poly::PolyError),
    #[error("Newton-polygon criterion requires a two-dimensional map with two distinct degrees")]
    NotApplicable,
    #[error("map is not algebraically stable")]
    NotAlgebraicallyStable,
    #[error("dominant support line is horizontal")]
    SlopeZero,
    #[error("restricted parts share a common zero direction")]
    SharedComponent,
    #[error("monomial exponents must be positive and non-decreasing")]
    InvalidPi,
}

/// Exponent pairs of the nonzero monomials of each component (k = 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewtonDiagram {
    pub sigma: Vec<Vec<(u32, u32)>>,
}

pub fn newton_diagram(map: &PolynomialMap) -> NewtonDiagram {
    NewtonDiagram {
        sigma: map
            .components
            .iter()
            .map(|p| p.terms().map(|(e, _)| (e[0], e[1])).collect())
            .collect(),
    }
}

/// Line `p*m + q*n = r` in the exponent plane with slope `-p/q`,
/// `gcd(p, q) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupportLine {
    pub p: u64,
    pub q: u64,
    pub r: i64,
}

impl SupportLine {
    pub fn value(&self, pt: (u32, u32)) -> i64 {
        self.p as i64 * pt.0 as i64 + self.q as i64 * pt.1 as i64
    }

    pub fn contains(&self, pt: (u32, u32)) -> bool {
        self.value(pt) == self.r
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd_u64(b, a % b) }
}

/// Steepest line through `(d1, 0)` that dominates all exponents of both
/// components; its slope lies in `[-1, 0)` for a degree-sorted stable map.
pub fn support_line_d1(diag: &NewtonDiagram, d1: u32) -> Result<SupportLine, RegularityError> {
    if !diag.sigma[0].contains(&(d1, 0)) {
        return Err(RegularityError::NotAlgebraicallyStable);
    }
    // Minimize slope -n/(d1 - m) over all other support points, i.e.
    // maximize the fraction n/(d1 - m).
    let mut best: Option<(u64, u64)> = None; // (n, d1 - m) with n > 0
    for pt in diag.sigma.iter().flatten() {
        let &(m, n) = pt;
        if (m, n) == (d1, 0) || n == 0 {
            continue;
        }
        debug_assert!(m < d1, "support point beyond the top degree");
        let num = n as u64;
        let den = (d1 - m) as u64;
        let better = match best {
            None => true,
            Some((bn, bd)) => num as u128 * bd as u128 > bn as u128 * den as u128,
        };
        if better {
            best = Some((num, den));
        }
    }
    match best {
        None => Err(RegularityError::SlopeZero),
        Some((n, d)) => {
            let g = gcd_u64(n, d);
            let (p, q) = (n / g, d / g);
            Ok(SupportLine { p, q, r: (p * d1 as u64) as i64 })
        }
    }
}

/// Parallel line supporting the second component's exponents from above.
pub fn support_line_d2(diag: &NewtonDiagram, d1_line: &SupportLine) -> SupportLine {
    let r = diag.sigma[1]
        .iter()
        .map(|&pt| d1_line.value(pt))
        .max()
        .unwrap_or(0);
    SupportLine { p: d1_line.p, q: d1_line.q, r }
}

/// Terms of `poly` lying on the support line.
pub fn restrict_to_line(poly: &Polynomial, line: &SupportLine) -> Polynomial {
    let mut out = Polynomial::zero(poly.nvars());
    for (e, c) in poly.terms() {
        if line.contains((e[0], e[1])) {
            out.add_term(e.clone(), c.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// Numerical certificate could not separate the minimum from zero.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    ExactResultant,
    NumericalCertificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelVerdict {
    pub level: usize,
    pub verdict: Verdict,
    pub method: Method,
    /// Smallest max-residual found on the unit sphere (numerical method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_on_sphere: Option<f64>,
}

/// Level-by-level regularity of the top homogeneous parts, for the block
/// partition given by cut points `l` (1-based). Block degrees are recomputed
/// from the map, so the same partition can be reused after a monomial
/// composition.
pub fn check_s_regularity(map: &PolynomialMap, l: &[usize], s: usize) -> Vec<LevelVerdict> {
    let m = l.len() - 1;
    let s = s.min(m);
    let block_of = |j: usize| (1..=m).find(|&i| j + 1 >= l[i - 1] && j + 1 < l[i]).unwrap();
    let block_degree: Vec<u32> = (1..=m)
        .map(|i| {
            (l[i - 1] - 1..l[i] - 1)
                .map(|j| map.components[j].degree().unwrap_or(0))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = Vec::new();
    for level in 1..=s {
        let keep = l[level] - 1;
        let gens: Vec<(Polynomial, u32)> = (0..l[level] - 1)
            .map(|j| {
                let d = block_degree[block_of(j) - 1];
                (map.components[j].homogeneous_part(d).restrict_to_first(keep), d)
            })
            .collect();
        out.push(level_verdict(level, keep, &gens));
    }
    out
}

fn level_verdict(level: usize, keep: usize, gens: &[(Polynomial, u32)]) -> LevelVerdict {
    if keep <= 1 {
        let pass = gens.iter().any(|(p, _)| !p.is_zero());
        return LevelVerdict {
            level,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            method: Method::ExactResultant,
            min_on_sphere: None,
        };
    }
    if keep == 2 {
        let pass = binary_forms_only_trivial_zero(gens);
        return LevelVerdict {
            level,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            method: Method::ExactResultant,
            min_on_sphere: None,
        };
    }
    let polys: Vec<&Polynomial> = gens.iter().map(|(p, _)| p).collect();
    let (verdict, min) = match sphere_certificate(&polys, keep, 0x5eed_c0de) {
        CertOutcome::Pass { min } => (Verdict::Pass, min),
        CertOutcome::Fail { residual, .. } => (Verdict::Fail, residual),
        CertOutcome::Indeterminate { min } => (Verdict::Indeterminate, min),
    };
    LevelVerdict { level, verdict, method: Method::NumericalCertificate, min_on_sphere: Some(min) }
}

/// Whether the top parts of the first block have only the trivial common
/// zero in the first block's variables (level-1 regularity).
pub fn check_algebraic_stability(map: &PolynomialMap, l: &[usize]) -> bool {
    check_s_regularity(map, l, 1)
        .first()
        .map(|v| v.verdict == Verdict::Pass)
        .unwrap_or(false)
}

#[derive(Debug, Clone)]
pub enum CertOutcome {
    Pass { min: f64 },
    Fail { witness: Vec<Complex64>, residual: f64 },
    Indeterminate { min: f64 },
}

const CERT_PASS_THRESHOLD: f64 = 1e-6;
const CERT_FAIL_THRESHOLD: f64 = 1e-10;

/// Numerical common-zero certificate for a homogeneous system: minimize the
/// max component residual over the unit sphere of the first `nactive`
/// coordinates by seeded multistart compass search.
pub fn sphere_certificate(polys: &[&Polynomial], nactive: usize, seed: u64) -> CertOutcome {
    let nvars = polys.first().map(|p| p.nvars()).unwrap_or(nactive);
    let live: Vec<&&Polynomial> = polys.iter().filter(|p| !p.is_zero()).collect();
    if live.is_empty() {
        // No equations cut anything: every direction is a zero.
        let mut w = vec![Complex64::zero(); nvars];
        w[0] = Complex64::new(1.0, 0.0);
        return CertOutcome::Fail { witness: w, residual: 0.0 };
    }
    let objective = |x: &[f64]| -> f64 {
        let mut z = vec![Complex64::zero(); nvars];
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..nactive {
            z[j] = Complex64::new(x[2 * j] / norm, x[2 * j + 1] / norm);
        }
        live.iter().map(|p| p.eval(&z).norm()).fold(0.0, f64::max)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 2 * nactive;
    let mut best_val = f64::INFINITY;
    let mut best_x = vec![0.0; dims];
    for _ in 0..64 {
        let mut x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if x.iter().all(|&v| v == 0.0) {
            x[0] = 1.0;
        }
        let mut val = objective(&x);
        let mut step = 0.3f64;
        for _ in 0..200 {
            let mut improved = false;
            for d in 0..dims {
                for sgn in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[d] += sgn * step;
                    if cand.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let cv = objective(&cand);
                    if cv < val {
                        val = cv;
                        x = cand;
                        improved = true;
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
        if val < best_val {
            best_val = val;
            best_x = x;
        }
        if best_val < CERT_FAIL_THRESHOLD {
            break;
        }
    }
    let norm: f64 = best_x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let witness: Vec<Complex64> = (0..nvars)
        .map(|j| {
            if j < nactive {
                Complex64::new(best_x[2 * j] / norm, best_x[2 * j + 1] / norm)
            } else {
                Complex64::zero()
            }
        })
        .collect();
    if best_val < CERT_FAIL_THRESHOLD {
        CertOutcome::Fail { witness, residual: best_val }
    } else if best_val > CERT_PASS_THRESHOLD {
        CertOutcome::Pass { min: best_val }
    } else {
        CertOutcome::Indeterminate { min: best_val }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonSummary {
    pub d1: SupportLine,
    pub d2: SupportLine,
}

/// Full regularity report for a map, including predicted invariants.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub k: usize,
    pub blocks: BlockStructure,
    pub alg_stable: bool,
    /// Number of leading levels that pass on the map itself.
    pub s_max: usize,
    pub levels: Vec<LevelVerdict>,
    pub semi_regular: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Per-block monomial exponents of the composition that certifies
    /// semi-regularity (all ones when the map is regular as-is).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonSummary>,
    /// Escape-rate spectrum per block (multiplicative rates, descending).
    pub alpha: Vec<f64>,
    /// Predicted topological degree, when semi-regularity holds.
    #[serde(serialize_with = "ser_opt_number")]
    pub d_t: Option<f64>,
    /// Predicted dominant small-scale rate (last alpha).
    pub lambda: f64,
}

fn ser_opt_number<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.fract() == 0.0 && x.abs() < 9e15 => s.serialize_i64(*x as i64),
        Some(x) => s.serialize_f64(*x),
    }
}

/// Predicted invariants from per-block rates: total degree as the product of
/// the rates weighted by block sizes, and the last rate as the small-scale
/// exponent.
pub fn predict_invariants(blocks: &BlockStructure, alpha: &[f64]) -> (f64, f64) {
    let mut d_t = 1.0f64;
    for (i, &a) in alpha.iter().enumerate() {
        d_t *= a.powi(blocks.block_size(i + 1) as i32);
    }
    (d_t, *alpha.last().unwrap())
}

fn count_leading_passes(levels: &[LevelVerdict]) -> usize {
    levels
        .iter()
        .take_while(|v| v.verdict == Verdict::Pass)
        .count()
}

/// Newton-polygon semi-regularity test for k = 2 with two distinct degrees.
/// On success the report carries the certifying monomial exponents and the
/// predicted invariants.
pub fn semi_regularity_2d(map: &PolynomialMap) -> Result<RegularityReport, RegularityError> {
    let (blocks, g) = block_structure(map)?;
    if g.k() != 2 || blocks.m != 2 {
        return Err(RegularityError::NotApplicable);
    }
    let levels = check_s_regularity(&g, &blocks.l, blocks.m);
    let s_max = count_leading_passes(&levels);
    let alg_stable = s_max >= 1;
    let d1 = blocks.d[0];
    if !alg_stable {
        return Err(RegularityError::NotAlgebraicallyStable);
    }
    let diag = newton_diagram(&g);
    let line1 = support_line_d1(&diag, d1)?;
    let line2 = support_line_d2(&diag, &line1);
    let p1 = restrict_to_line(&g.components[0], &line1);
    let p2 = restrict_to_line(&g.components[1], &line2);
    let pull = [line1.p as u32, line1.q as u32];
    let f1 = p1.scale_exponents(&pull);
    let f2 = p2.scale_exponents(&pull);
    let (r1, r2) = (line1.r as u32, line2.r as u32);
    let res = binary_form_resultant(&f1, r1, &f2, r2);
    if res.is_zero() {
        return Err(RegularityError::SharedComponent);
    }
    let alpha = vec![d1 as f64, r2 as f64 / line1.q as f64];
    let (d_t, lambda) = predict_invariants(&blocks, &alpha);
    Ok(RegularityReport {
        k: 2,
        blocks,
        alg_stable,
        s_max,
        levels,
        semi_regular: Some(true),
        reason: None,
        pi: Some(vec![line1.p as u32, line1.q as u32]),
        newton: Some(NewtonSummary { d1: line1, d2: line2 }),
        alpha,
        d_t: Some(d_t),
        lambda,
    })
}

/// Regularity of the composition with the blockwise monomial map given by
/// per-block exponents `pexp` (non-decreasing), using the block partition of
/// the original map.
pub fn check_pi_regularity(map: &PolynomialMap, pexp: &[u32]) -> Result<RegularityReport, RegularityError> {
    let (blocks, sorted) = block_structure(map)?;
    let g = sorted
        .compose_monomial(&blocks, pexp)
        .map_err(|_| RegularityError::InvalidPi)?;
    let levels = check_s_regularity(&g, &blocks.l, blocks.m);
    let s_max = count_leading_passes(&levels);
    let semi = levels.iter().all(|v| v.verdict == Verdict::Pass);
    let indet = levels.iter().any(|v| v.verdict == Verdict::Indeterminate);
    let alpha: Vec<f64> = (1..=blocks.m)
        .map(|i| {
            let dpi = blocks
                .block_range(i)
                .map(|j| g.components[j].degree().unwrap_or(0))
                .max()
                .unwrap_or(0);
            dpi as f64 / pexp[i - 1] as f64
        })
        .collect();
    let (d_t, lambda) = predict_invariants(&blocks, &alpha);
    Ok(RegularityReport {
        k: map.k(),
        alg_stable: s_max >= 1,
        s_max,
        levels,
        semi_regular: if indet { None } else { Some(semi) },
        reason: if semi { None } else { Some("composed map fails a regularity level".into()) },
        pi: Some(pexp.to_vec()),
        newton: None,
        d_t: if semi { Some(d_t) } else { None },
        lambda,
        alpha,
        blocks,
    })
}

/// One-stop analysis: exact level checks, and for two-dimensional maps with
/// distinct degrees the Newton-polygon semi-regularity criterion.
pub fn analyze(map: &PolynomialMap) -> Result<RegularityReport, RegularityError> {
    let (blocks, g) = block_structure(map)?;
    let levels = check_s_regularity(&g, &blocks.l, blocks.m);
    let s_max = count_leading_passes(&levels);
    let regular = levels.iter().all(|v| v.verdict == Verdict::Pass);
    let indet = levels.iter().any(|v| v.verdict == Verdict::Indeterminate);

    if regular {
        let alpha: Vec<f64> = blocks.d.iter().map(|&d| d as f64).collect();
        let (d_t, lambda) = predict_invariants(&blocks, &alpha);
        return Ok(RegularityReport {
            k: g.k(),
            alg_stable: s_max >= 1,
            s_max,
            levels,
            semi_regular: Some(true),
            reason: None,
            pi: Some(vec![1; blocks.m]),
            newton: None,
            alpha,
            d_t: Some(d_t),
            lambda,
            blocks,
        });
    }

    if g.k() == 2 && blocks.m == 2 {
        match semi_regularity_2d(map) {
            Ok(report) => return Ok(report),
            Err(RegularityError::NotApplicable) => unreachable!(),
            Err(e) => {
                let alpha: Vec<f64> = blocks.d.iter().map(|&d| d as f64).collect();
                let lambda = *alpha.last().unwrap();
                return Ok(RegularityReport {
                    k: g.k(),
                    alg_stable: s_max >= 1,
                    s_max,
                    levels,
                    semi_regular: Some(false),
                    reason: Some(e.to_string()),
                    pi: None,
                    newton: None,
                    alpha,
                    d_t: None,
                    lambda,
                    blocks,
                });
            }
        }
    }

    let alpha: Vec<f64> = blocks.d.iter().map(|&d| d as f64).collect();
    let lambda = *alpha.last().unwrap();
    Ok(RegularityReport {
        k: g.k(),
        alg_stable: s_max >= 1,
        s_max,
        levels,
        semi_regular: if indet { None } else { Some(false) },
        reason: Some("map fails a regularity level; no monomial certificate searched".into()),
        pi: None,
        newton: None,
        alpha,
        d_t: None,
        lambda,
        blocks,
    })
}
