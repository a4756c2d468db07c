//! Overflow-free evaluation of polynomial maps on log-scaled points.
//!
//! A point is stored as a direction vector `u` (max modulus 1) plus a log
//! magnitude `ell`, so orbits whose coordinates grow doubly exponentially
//! stay representable. Evaluation sums homogeneous parts with the dominant
//! exponential factored out, detects catastrophic cancellation, and can
//! re-run in arbitrary precision when doubles run out of bits.

use crate::gaussian::GaussianRational;
use crate::mp::{bf_exp, bf_ln_abs, Ctx, MpComplex};
use crate::poly::PolynomialMap;
use astro_float::BigFloat;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("cancellation ratio {cancellation:.3e} exceeds precision budget")]
    PrecisionLoss { cancellation: f64 },
    #[error("cancellation persists at the precision cap")]
    Indeterminate,
}

/// Extra mantissa bits demanded beyond the observed cancellation ratio.
const GUARD_BITS: u32 = 26;

/// `z` factored as `u * e^ell` with `max_j |u_j| = 1` (all-zero `u` encodes
/// the origin, with `ell = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPoint {
    pub u: Vec<Complex64>,
    pub ell: f64,
}

impl ScaledPoint {
    pub fn origin(k: usize) -> Self {
        Self { u: vec![Complex64::new(0.0, 0.0); k], ell: 0.0 }
    }

    pub fn from_coords(z: &[Complex64]) -> Self {
        let max = z.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if max == 0.0 {
            return Self::origin(z.len());
        }
        Self { u: z.iter().map(|c| c / max).collect(), ell: max.ln() }
    }

    pub fn is_origin(&self) -> bool {
        self.u.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// ln of the max-norm; `-inf` at the origin.
    pub fn log_magnitude(&self) -> f64 {
        if self.is_origin() {
            f64::NEG_INFINITY
        } else {
            self.ell
        }
    }

    /// Back to plain coordinates (may overflow to inf for huge `ell`).
    pub fn to_coords(&self) -> Vec<Complex64> {
        let s = self.ell.exp();
        self.u.iter().map(|c| c * s).collect()
    }
}

struct CompiledTerm {
    c64: Complex64,
    exact: GaussianRational,
    exps: Vec<u32>,
}

struct CompiledPart {
    degree: u32,
    terms: Vec<CompiledTerm>,
}

struct CompiledComponent {
    parts: Vec<CompiledPart>,
}

/// Precompiled homogeneous decomposition of a map for repeated evaluation.
pub struct ScaledEvaluator {
    comps: Vec<CompiledComponent>,
    max_exps: Vec<u32>,
    k: usize,
}

pub struct ScaledStep {
    pub point: ScaledPoint,
    /// Worst ratio (largest term magnitude) / (component sum magnitude).
    pub cancellation: f64,
}

impl ScaledEvaluator {
    pub fn new(map: &PolynomialMap) -> Self {
        let k = map.k();
        let mut max_exps = vec![0u32; k];
        let comps = map
            .components
            .iter()
            .map(|p| {
                let parts = p
                    .homogeneous_parts()
                    .into_iter()
                    .map(|(d, part)| CompiledPart {
                        degree: d,
                        terms: part
                            .terms()
                            .map(|(e, c)| {
                                for (v, &x) in e.iter().enumerate() {
                                    max_exps[v] = max_exps[v].max(x);
                                }
                                CompiledTerm { c64: c.to_complex(), exact: c.clone(), exps: e.clone() }
                            })
                            .collect(),
                    })
                    .collect();
                CompiledComponent { parts }
            })
            .collect();
        Self { comps, max_exps, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One application of the map at the given mantissa precision.
    pub fn eval(&self, p: &ScaledPoint, bits: u32) -> Result<ScaledStep, EvalError> {
        if bits <= 53 {
            self.eval_f64(p)
        } else {
            self.eval_mp(p, bits as usize)
        }
    }

    /// Retry with doubling precision up to `cap` bits; returns the step and
    /// the precision that succeeded.
    pub fn eval_adaptive(&self, p: &ScaledPoint, cap: u32) -> Result<(ScaledStep, u32), EvalError> {
        let mut bits = 53u32;
        loop {
            match self.eval(p, bits) {
                Ok(step) => return Ok((step, bits)),
                Err(EvalError::PrecisionLoss { .. }) => {
                    if bits >= cap {
                        return Err(EvalError::Indeterminate);
                    }
                    bits = (bits.max(64) * 2).min(cap);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn eval_f64(&self, p: &ScaledPoint) -> Result<ScaledStep, EvalError> {
        let ell = p.ell;
        let tables: Vec<Vec<Complex64>> = p
            .u
            .iter()
            .zip(&self.max_exps)
            .map(|(&uv, &m)| {
                let mut t = Vec::with_capacity(m as usize + 1);
                t.push(Complex64::new(1.0, 0.0));
                for j in 1..=m as usize {
                    let prev = t[j - 1];
                    t.push(prev * uv);
                }
                t
            })
            .collect();

        let mut log_mags: Vec<Option<f64>> = Vec::with_capacity(self.k);
        let mut phases: Vec<Complex64> = Vec::with_capacity(self.k);
        let mut worst_cancel = 1.0f64;

        for comp in &self.comps {
            let shift = comp
                .parts
                .iter()
                .map(|part| part.degree as f64 * ell)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut maxmag = 0.0f64;
            for part in &comp.parts {
                let factor = (part.degree as f64 * ell - shift).exp();
                for t in &part.terms {
                    let mut m = t.c64;
                    for (v, &e) in t.exps.iter().enumerate() {
                        m *= tables[v][e as usize];
                    }
                    let term = m * factor;
                    maxmag = maxmag.max(term.norm());
                    sum += term;
                }
            }
            if maxmag == 0.0 {
                log_mags.push(None);
                phases.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let smag = sum.norm();
            let cancel = if smag == 0.0 { f64::INFINITY } else { maxmag / smag };
            if cancel > exp2u(53 - GUARD_BITS) {
                return Err(EvalError::PrecisionLoss { cancellation: cancel });
            }
            worst_cancel = worst_cancel.max(cancel);
            log_mags.push(Some(shift + smag.ln()));
            phases.push(sum / smag);
        }
        Ok(self.assemble(log_mags, phases, worst_cancel))
    }

    fn eval_mp(&self, p: &ScaledPoint, bits: usize) -> Result<ScaledStep, EvalError> {
        let mut ctx = Ctx::new(bits);
        let ell_bf = BigFloat::from_f64(p.ell, bits);
        let u_mp: Vec<MpComplex> = p.u.iter().map(|&c| MpComplex::from_f64(c, &ctx)).collect();
        let tables: Vec<Vec<MpComplex>> = u_mp
            .iter()
            .zip(&self.max_exps)
            .map(|(uv, &m)| {
                let mut t = Vec::with_capacity(m as usize + 1);
                t.push(MpComplex::from_f64(Complex64::new(1.0, 0.0), &ctx));
                for j in 1..=m as usize {
                    let prev = t[j - 1].mul(uv, &ctx);
                    t.push(prev);
                }
                t
            })
            .collect();

        let mut log_mags: Vec<Option<f64>> = Vec::with_capacity(self.k);
        let mut phases: Vec<Complex64> = Vec::with_capacity(self.k);
        let mut worst_cancel = 1.0f64;
        let ln_threshold = (bits as f64 - GUARD_BITS as f64) * std::f64::consts::LN_2;

        for comp in &self.comps {
            let shift = comp
                .parts
                .iter()
                .map(|part| part.degree as f64 * p.ell)
                .fold(f64::NEG_INFINITY, f64::max);
            let shift_bf = BigFloat::from_f64(shift, bits);
            let mut sum = MpComplex::zero(&ctx);
            let mut max_ln = f64::NEG_INFINITY;
            for part in &comp.parts {
                let arg = ell_bf
                    .mul(&BigFloat::from_f64(part.degree as f64, bits), bits, astro_float::RoundingMode::ToEven)
                    .sub(&shift_bf, bits, astro_float::RoundingMode::ToEven);
                let factor = bf_exp(&arg, &mut ctx);
                let ln_factor = bf_ln_abs(&factor);
                for t in &part.terms {
                    let mut m = MpComplex::from_rational(&t.exact.re, &t.exact.im, &ctx);
                    for (v, &e) in t.exps.iter().enumerate() {
                        if e > 0 {
                            m = m.mul(&tables[v][e as usize], &ctx);
                        }
                    }
                    let term = m.scale(&factor, &ctx);
                    let term_ln = m.ln_abs(&ctx) + ln_factor;
                    max_ln = max_ln.max(term_ln);
                    sum = sum.add(&term, &ctx);
                }
            }
            if max_ln == f64::NEG_INFINITY {
                log_mags.push(None);
                phases.push(Complex64::new(0.0, 0.0));
                continue;
            }
            if sum.is_zero() {
                // Exact cancellation of exactly representable terms.
                log_mags.push(None);
                phases.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let ln_sum = sum.ln_abs(&ctx);
            let ln_cancel = max_ln - ln_sum;
            if ln_cancel > ln_threshold {
                return Err(EvalError::PrecisionLoss { cancellation: ln_cancel.exp() });
            }
            worst_cancel = worst_cancel.max(ln_cancel.exp().max(1.0));
            log_mags.push(Some(shift + ln_sum));
            phases.push(sum.unit().unwrap_or(Complex64::new(0.0, 0.0)));
        }
        Ok(self.assemble(log_mags, phases, worst_cancel))
    }

    fn assemble(&self, log_mags: Vec<Option<f64>>, phases: Vec<Complex64>, cancel: f64) -> ScaledStep {
        let ell = log_mags.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if ell == f64::NEG_INFINITY {
            return ScaledStep { point: ScaledPoint::origin(self.k), cancellation: cancel };
        }
        let u = log_mags
            .iter()
            .zip(&phases)
            .map(|(lm, ph)| match lm {
                Some(l) => ph * (l - ell).exp(),
                None => Complex64::new(0.0, 0.0),
            })
            .collect();
        ScaledStep { point: ScaledPoint { u, ell }, cancellation: cancel }
    }
}

fn exp2u(e: u32) -> f64 {
    f64::from_bits(((e as u64) + 1023) << 52)
}
