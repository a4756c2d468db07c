//! Exact univariate polynomials over the Gaussian rationals, Sylvester
//! resultants of binary forms, and fraction-free bivariate elimination.

use crate::gaussian::GaussianRational;
use crate::poly::Polynomial;
use num_complex::Complex64;

/// Dense univariate polynomial, coefficients ascending, trailing zeros
/// trimmed (empty = zero polynomial).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniPoly {
    pub coeffs: Vec<GaussianRational>,
}

impl UniPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: GaussianRational) -> Self {
        let mut p = Self { coeffs: vec![c] };
        p.trim();
        p
    }

    pub fn from_coeffs(coeffs: Vec<GaussianRational>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.is_zero() { None } else { Some(self.coeffs.len() - 1) }
    }

    pub fn leading(&self) -> Option<&GaussianRational> {
        self.coeffs.last()
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut c = vec![GaussianRational::zero(); n];
        for (i, x) in self.coeffs.iter().enumerate() {
            c[i] = &c[i] + x;
        }
        for (i, x) in o.coeffs.iter().enumerate() {
            c[i] = &c[i] + x;
        }
        Self::from_coeffs(c)
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut c = vec![GaussianRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] = &c[i + j] + &(a * b);
            }
        }
        Self::from_coeffs(c)
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }

    /// Quotient and remainder (coefficients form a field, so always defined
    /// for nonzero divisor).
    pub fn divmod(&self, d: &Self) -> Option<(Self, Self)> {
        let dd = d.degree()?;
        let lead_inv = d.leading().unwrap().recip().unwrap();
        let mut rem = self.clone();
        let mut quot = vec![GaussianRational::zero(); self.coeffs.len().saturating_sub(dd)];
        while let Some(rd) = rem.degree() {
            if rd < dd {
                break;
            }
            let q = rem.leading().unwrap() * &lead_inv;
            quot[rd - dd] = q.clone();
            // rem -= q * x^(rd-dd) * d
            let mut sub = vec![GaussianRational::zero(); rd + 1];
            for (j, c) in d.coeffs.iter().enumerate() {
                sub[rd - dd + j] = c * &q;
            }
            rem = rem.sub(&Self::from_coeffs(sub));
        }
        Some((Self::from_coeffs(quot), rem))
    }

    /// Exact division; panics if the remainder is nonzero (used where the
    /// algorithm guarantees divisibility).
    pub fn div_exact(&self, d: &Self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let (q, r) = self.divmod(d).expect("division by zero polynomial");
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    /// Monic gcd (field coefficients).
    pub fn gcd(&self, o: &Self) -> Self {
        let mut a = self.clone();
        let mut b = o.clone();
        while !b.is_zero() {
            let (_, r) = a.divmod(&b).unwrap();
            a = b;
            b = r;
        }
        match a.leading() {
            Some(l) => a.scale(&l.recip().unwrap()),
            None => a,
        }
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c.to_complex();
        }
        acc
    }

    pub fn to_complex_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c.to_complex()).collect()
    }
}

/// Determinant over an integral domain by fraction-free (Bareiss)
/// elimination with row pivoting.
fn bareiss_det(mut m: Vec<Vec<UniPoly>>) -> UniPoly {
    let n = m.len();
    if n == 0 {
        return UniPoly::constant(GaussianRational::one());
    }
    let mut sign = false;
    let mut prev = UniPoly::constant(GaussianRational::one());
    for c in 0..n {
        let pivot = (c..n).find(|&r| !m[r][c].is_zero());
        let pr = match pivot {
            Some(pr) => pr,
            None => return UniPoly::zero(),
        };
        if pr != c {
            m.swap(pr, c);
            sign = !sign;
        }
        for r in c + 1..n {
            for cc in c + 1..n {
                let num = m[c][c].mul(&m[r][cc]).sub(&m[r][c].mul(&m[c][cc]));
                m[r][cc] = num.div_exact(&prev);
            }
            m[r][c] = UniPoly::zero();
        }
        prev = m[c][c].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign { det.neg() } else { det }
}

/// Bivariate polynomial viewed as a polynomial in the second variable with
/// coefficients in the first: `coeffs[j]` multiplies `z2^j`.
pub fn poly_as_z2_coeffs(p: &Polynomial) -> Vec<UniPoly> {
    assert_eq!(p.nvars(), 2);
    let d2 = p.terms().map(|(e, _)| e[1]).max().unwrap_or(0) as usize;
    let d1 = p.terms().map(|(e, _)| e[0]).max().unwrap_or(0) as usize;
    let mut out = vec![vec![GaussianRational::zero(); d1 + 1]; d2 + 1];
    for (e, c) in p.terms() {
        out[e[1] as usize][e[0] as usize] = c.clone();
    }
    out.into_iter().map(UniPoly::from_coeffs).collect()
}

/// Sylvester resultant of two polynomials in one eliminated variable with
/// coefficients in a commutative domain; `a`, `b` ascending in the
/// eliminated variable. Returns `None` if both are constant in it.
pub fn sylvester_resultant(a: &[UniPoly], b: &[UniPoly]) -> Option<UniPoly> {
    let da = a.len().checked_sub(1)?;
    let db = b.len().checked_sub(1)?;
    if da == 0 && db == 0 {
        return None;
    }
    let n = da + db;
    let mut m = vec![vec![UniPoly::zero(); n]; n];
    for row in 0..db {
        for (j, c) in a.iter().enumerate() {
            m[row][row + (da - j)] = c.clone();
        }
    }
    for row in 0..da {
        for (j, c) in b.iter().enumerate() {
            m[db + row][row + (db - j)] = c.clone();
        }
    }
    Some(bareiss_det(m))
}

/// Eliminate `z2` from two bivariate polynomials, returning a univariate
/// polynomial in `z1` whose roots are the `z1`-coordinates of common zeros.
pub fn eliminate_z2(p: &Polynomial, q: &Polynomial) -> Option<UniPoly> {
    let a = poly_as_z2_coeffs(p);
    let b = poly_as_z2_coeffs(q);
    match (a.len() - 1, b.len() - 1) {
        (0, 0) => None,
        (0, db) => {
            // Resultant reduces to a^db.
            let mut r = UniPoly::constant(GaussianRational::one());
            for _ in 0..db {
                r = r.mul(&a[0]);
            }
            Some(r)
        }
        (da, 0) => {
            let mut r = UniPoly::constant(GaussianRational::one());
            for _ in 0..da {
                r = r.mul(&b[0]);
            }
            Some(r)
        }
        _ => sylvester_resultant(&a, &b),
    }
}

/// Dehomogenized coefficient vector of a homogeneous binary form of nominal
/// degree `d`: entry `j` is the coefficient of `z1^j z2^(d-j)`.
pub fn binary_form_coeffs(p: &Polynomial, d: u32) -> Vec<GaussianRational> {
    assert_eq!(p.nvars(), 2);
    let mut out = vec![GaussianRational::zero(); d as usize + 1];
    for (e, c) in p.terms() {
        assert_eq!(e[0] + e[1], d, "form is not homogeneous of the nominal degree");
        out[e[0] as usize] = c.clone();
    }
    out
}

/// Resultant of two homogeneous binary forms of nominal degrees `da`, `db`.
/// Zero iff the forms share a projective root, i.e. their common zero set
/// in C^2 is larger than the origin.
pub fn binary_form_resultant(a: &Polynomial, da: u32, b: &Polynomial, db: u32) -> GaussianRational {
    let ca: Vec<UniPoly> = binary_form_coeffs(a, da).into_iter().map(UniPoly::constant).collect();
    let cb: Vec<UniPoly> = binary_form_coeffs(b, db).into_iter().map(UniPoly::constant).collect();
    match sylvester_resultant(&ca, &cb) {
        Some(r) => r.coeffs.first().cloned().unwrap_or_else(GaussianRational::zero),
        None => GaussianRational::zero(),
    }
}

/// Whether a family of homogeneous binary forms has only the trivial common
/// zero. Uses the gcd of the dehomogenizations plus a shared-root-at-infinity
/// check; exact.
pub fn binary_forms_only_trivial_zero(forms: &[(Polynomial, u32)]) -> bool {
    let nonzero: Vec<&(Polynomial, u32)> = forms.iter().filter(|(p, _)| !p.is_zero()).collect();
    if nonzero.is_empty() {
        return false;
    }
    // Shared root at [1:0] iff every form misses the pure z1^d monomial.
    let all_drop = nonzero.iter().all(|(p, d)| {
        let mut e = vec![*d, 0];
        e.truncate(2);
        p.coeff(&e).is_zero()
    });
    if all_drop {
        return false;
    }
    let mut g: Option<UniPoly> = None;
    for (p, d) in &nonzero {
        let u = UniPoly::from_coeffs(binary_form_coeffs(p, *d));
        g = Some(match g {
            None => u,
            Some(prev) => prev.gcd(&u),
        });
        if g.as_ref().unwrap().degree() == Some(0) {
            return true;
        }
    }
    g.unwrap().degree() == Some(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_map;

    fn c(n: i64) -> GaussianRational {
        GaussianRational::from_int(n)
    }

    #[test]
    fn divmod_round_trip() {
        // (x^3 - 1) = (x - 1)(x^2 + x + 1)
        let p = UniPoly::from_coeffs(vec![c(-1), c(0), c(0), c(1)]);
        let d = UniPoly::from_coeffs(vec![c(-1), c(1)]);
        let (q, r) = p.divmod(&d).unwrap();
        assert!(r.is_zero());
        assert_eq!(q, UniPoly::from_coeffs(vec![c(1), c(1), c(1)]));
    }

    #[test]
    fn gcd_finds_common_factor() {
        let f = UniPoly::from_coeffs(vec![c(-1), c(1)]); // x - 1
        let a = f.mul(&UniPoly::from_coeffs(vec![c(2), c(1)]));
        let b = f.mul(&UniPoly::from_coeffs(vec![c(5), c(0), c(3)]));
        let g = a.gcd(&b);
        assert_eq!(g, f);
    }

    #[test]
    fn resultant_of_coprime_forms_is_nonzero() {
        // x^2 + y^2 and x*y share only the origin.
        let m = parse_map("z1^2 + z2^2, z1*z2").unwrap();
        let r = binary_form_resultant(&m.components[0], 2, &m.components[1], 2);
        assert!(!r.is_zero());
        assert!(binary_forms_only_trivial_zero(&[
            (m.components[0].clone(), 2),
            (m.components[1].clone(), 2)
        ]));
    }

    #[test]
    fn resultant_detects_shared_factor() {
        // (z1 - z2) divides both.
        let m = parse_map("z1^2 - z2^2, z1^2 - z1*z2").unwrap();
        let r = binary_form_resultant(&m.components[0], 2, &m.components[1], 2);
        assert!(r.is_zero());
        assert!(!binary_forms_only_trivial_zero(&[
            (m.components[0].clone(), 2),
            (m.components[1].clone(), 2)
        ]));
    }

    #[test]
    fn elimination_matches_hand_computation() {
        // z1^2 - w1 = 0, z2^2 - w2 = 0 with w = (4, 4):
        // eliminating z2 gives (z1^2 - 4)^2 up to scalar.
        let m = parse_map("z1^2 - 4, z2^2 - 4").unwrap();
        let r = eliminate_z2(&m.components[0], &m.components[1]).unwrap();
        assert_eq!(r.degree(), Some(4));
        for root in [2.0, -2.0] {
            let v = r.eval_complex(Complex64::new(root, 0.0));
            assert!(v.norm() < 1e-12);
        }
    }

    use num_complex::Complex64;

    #[test]
    fn bareiss_matches_numeric_determinant() {
        // Random-ish small integer matrix of constants.
        let vals = [[3, -1, 2], [0, 4, 5], [-2, 1, 1]];
        let m: Vec<Vec<UniPoly>> = vals
            .iter()
            .map(|row| row.iter().map(|&v| UniPoly::constant(c(v))).collect())
            .collect();
        let det = bareiss_det(m);
        // det = 3*(4-5) - (-1)*(0+10) + 2*(0+8) = -3 + 10 + 16 = 23
        assert_eq!(det, UniPoly::constant(c(23)));
    }
}
