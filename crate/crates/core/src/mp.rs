//! Minimal arbitrary-precision complex arithmetic on top of `astro-float`,
//! used only when double precision loses too many bits to cancellation.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;

const RM: RoundingMode = RoundingMode::ToEven;

pub struct Ctx {
    pub p: usize,
    pub cc: Consts,
}

impl Ctx {
    pub fn new(bits: usize) -> Self {
        Self { p: bits, cc: Consts::new().expect("constants cache") }
    }
}

#[derive(Clone, Debug)]
pub struct MpComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl MpComplex {
    pub fn zero(ctx: &Ctx) -> Self {
        Self { re: BigFloat::from_f64(0.0, ctx.p), im: BigFloat::from_f64(0.0, ctx.p) }
    }

    pub fn from_f64(z: Complex64, ctx: &Ctx) -> Self {
        Self { re: BigFloat::from_f64(z.re, ctx.p), im: BigFloat::from_f64(z.im, ctx.p) }
    }

    pub fn from_rational(re: &BigRational, im: &BigRational, ctx: &Ctx) -> Self {
        Self { re: rational_to_bf(re, ctx.p), im: rational_to_bf(im, ctx.p) }
    }

    pub fn add(&self, o: &Self, ctx: &Ctx) -> Self {
        Self { re: self.re.add(&o.re, ctx.p, RM), im: self.im.add(&o.im, ctx.p, RM) }
    }

    pub fn mul(&self, o: &Self, ctx: &Ctx) -> Self {
        let re = self.re.mul(&o.re, ctx.p, RM).sub(&self.im.mul(&o.im, ctx.p, RM), ctx.p, RM);
        let im = self.re.mul(&o.im, ctx.p, RM).add(&self.im.mul(&o.re, ctx.p, RM), ctx.p, RM);
        Self { re, im }
    }

    pub fn scale(&self, r: &BigFloat, ctx: &Ctx) -> Self {
        Self { re: self.re.mul(r, ctx.p, RM), im: self.im.mul(r, ctx.p, RM) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Natural log of the modulus, as f64; `-inf` for zero.
    pub fn ln_abs(&self, ctx: &Ctx) -> f64 {
        let s = self
            .re
            .mul(&self.re, ctx.p, RM)
            .add(&self.im.mul(&self.im, ctx.p, RM), ctx.p, RM);
        0.5 * bf_ln_abs(&s)
    }

    /// Unit-modulus direction as complex double; `None` for zero.
    pub fn unit(&self) -> Option<Complex64> {
        let er = bf_exponent(&self.re);
        let ei = bf_exponent(&self.im);
        let shift = er.max(ei)?;
        let re = bf_to_f64_shifted(&self.re, shift);
        let im = bf_to_f64_shifted(&self.im, shift);
        let n = re.hypot(im);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(Complex64::new(re / n, im / n))
    }
}

/// e^x at context precision (x given as BigFloat).
pub fn bf_exp(x: &BigFloat, ctx: &mut Ctx) -> BigFloat {
    x.exp(ctx.p, RM, &mut ctx.cc)
}

fn bf_exponent(x: &BigFloat) -> Option<i64> {
    x.as_raw_parts().map(|(_, _, _, e, _)| e as i64)
}

/// Natural log of |x| computed from the raw mantissa/exponent; `-inf` for 0.
pub fn bf_ln_abs(x: &BigFloat) -> f64 {
    match x.as_raw_parts() {
        None => f64::NEG_INFINITY, // NaN/Inf never reach here in our use
        Some((words, _, _, e, _)) => {
            if words.iter().all(|&w| w == 0) {
                return f64::NEG_INFINITY;
            }
            let top = *words.last().unwrap();
            // value = +/- 0.mantissa * 2^e with the mantissa MSB set, so
            // |x| = (top/2^64) * 2^e up to lower-word corrections below 2^-64.
            (e as f64 - 64.0) * std::f64::consts::LN_2 + (top as f64).ln()
        }
    }
}

/// |x| * 2^-shift rounded to f64, with sign.
fn bf_to_f64_shifted(x: &BigFloat, shift: i64) -> f64 {
    match x.as_raw_parts() {
        None => 0.0,
        Some((words, _, sign, e, _)) => {
            if words.iter().all(|&w| w == 0) {
                return 0.0;
            }
            let top = *words.last().unwrap();
            let mut v = top as f64 * exp2_i64(e as i64 - 64 - shift);
            if words.len() >= 2 {
                v += words[words.len() - 2] as f64 * exp2_i64(e as i64 - 128 - shift);
            }
            if sign == Sign::Neg {
                v = -v;
            }
            v
        }
    }
}

/// Rounded f64 value of a BigFloat.
pub fn bf_to_f64(x: &BigFloat) -> f64 {
    bf_to_f64_shifted(x, 0)
}

/// Exact 2^e as f64 (0 on underflow, inf on overflow).
fn exp2_i64(e: i64) -> f64 {
    if e < -1074 {
        0.0
    } else if e < -1022 {
        f64::from_bits(1u64 << (e + 1074))
    } else if e <= 1023 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::INFINITY
    }
}

fn bigint_to_bf(n: &BigInt, p: usize) -> BigFloat {
    let (sign, mag) = (n.sign(), n.magnitude());
    let digits: Vec<u64> = mag.iter_u64_digits().collect();
    let work = (digits.len() * 64 + 64).max(p);
    let two64 = BigFloat::from_f64(18446744073709551616.0, work);
    let mut acc = BigFloat::from_f64(0.0, work);
    for &d in digits.iter().rev() {
        acc = acc.mul(&two64, work, RM).add(&BigFloat::from_u64(d, work), work, RM);
    }
    if sign == num_bigint::Sign::Minus {
        acc = acc.neg();
    }
    acc
}

pub fn rational_to_bf(r: &BigRational, p: usize) -> BigFloat {
    if r.is_zero() {
        return BigFloat::from_f64(0.0, p);
    }
    let num = bigint_to_bf(r.numer(), p + 64);
    let den = bigint_to_bf(r.denom(), p + 64);
    num.div(&den, p, RM)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_abs_matches_f64() {
        let ctx = Ctx::new(128);
        for &x in &[1.0, 0.5, 3.25e10, 7.1e-9] {
            let b = BigFloat::from_f64(x, ctx.p);
            assert!((bf_ln_abs(&b) - x.ln()).abs() < 1e-12 * (1.0 + x.ln().abs()));
        }
    }

    #[test]
    fn round_trip_f64() {
        for &x in &[1.0, -2.5, 1.25e100, -3.0e-120, 0.0] {
            let b = BigFloat::from_f64(x, 128);
            assert_eq!(bf_to_f64(&b), x);
        }
    }

    #[test]
    fn rational_conversion() {
        let r = BigRational::new(BigInt::from(1), BigInt::from(3));
        let b = rational_to_bf(&r, 128);
        assert!((bf_to_f64(&b) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn complex_mul_and_unit() {
        let ctx = Ctx::new(128);
        let a = MpComplex::from_f64(Complex64::new(3.0, 4.0), &ctx);
        let b = MpComplex::from_f64(Complex64::new(1.0, -2.0), &ctx);
        let c = a.mul(&b, &ctx);
        assert!((bf_to_f64(&c.re) - 11.0).abs() < 1e-12);
        assert!((bf_to_f64(&c.im) + 2.0).abs() < 1e-12);
        let u = a.unit().unwrap();
        assert!((u.re - 0.6).abs() < 1e-12 && (u.im - 0.8).abs() < 1e-12);
        assert!((a.ln_abs(&ctx) - 5.0f64.ln()).abs() < 1e-12);
    }
}
