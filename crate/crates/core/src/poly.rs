//! Sparse multivariate polynomials over the Gaussian rationals, polynomial
//! self-maps of C^k, and their block structure by descending component degree.

use crate::gaussian::GaussianRational;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("map has a constant or zero component (index {0})")]
    MalformedMap(usize),
    #[error("monomial exponents must be non-decreasing across blocks")]
    InvalidPi,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A single monomial term `coeff * z1^e1 * ... * zk^ek`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: GaussianRational,
    pub exponents: Vec<u32>,
}

/// Sparse polynomial in `nvars` variables with exact coefficients.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, GaussianRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: GaussianRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut e = vec![0; nvars];
        e[idx] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, GaussianRational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exponents: &[u32]) -> GaussianRational {
        self.terms.get(exponents).cloned().unwrap_or_else(GaussianRational::zero)
    }

    pub fn add_term(&mut self, exponents: Vec<u32>, coeff: GaussianRational) {
        debug_assert_eq!(exponents.len(), self.nvars);
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(exponents) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = &*o.get() + &coeff;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut result = Self::constant(self.nvars, GaussianRational::one());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Homogeneous part of total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == d)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// All nonzero homogeneous parts, as `(degree, part)` in ascending degree.
    pub fn homogeneous_parts(&self) -> Vec<(u32, Polynomial)> {
        let mut by_deg: BTreeMap<u32, Polynomial> = BTreeMap::new();
        for (e, c) in self.terms() {
            let d = e.iter().sum();
            by_deg
                .entry(d)
                .or_insert_with(|| Polynomial::zero(self.nvars))
                .add_term(e.clone(), c.clone());
        }
        by_deg.into_iter().collect()
    }

    /// Top-degree homogeneous part (zero polynomial for the zero polynomial).
    pub fn top_part(&self) -> Self {
        match self.degree() {
            Some(d) => self.homogeneous_part(d),
            None => Self::zero(self.nvars),
        }
    }

    /// Partial derivative with respect to variable `v`.
    pub fn partial(&self, v: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in self.terms() {
            if e[v] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[v] -= 1;
            out.add_term(e2, c * &GaussianRational::from_int(e[v] as i64));
        }
        out
    }

    /// Substitute zero for every variable with index >= `keep`.
    pub fn restrict_to_first(&self, keep: usize) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().skip(keep).all(|&x| x == 0))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Substitute `z_v -> z_v^{p_v}` for per-variable exponents `p`.
    pub fn scale_exponents(&self, p: &[u32]) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.iter().zip(p).map(|(a, b)| a * b).collect(), c.clone()))
                .collect(),
        }
    }

    /// Rename variables: new variable `j` carries the exponent of old
    /// variable `perm[j]`.
    pub fn rename_vars(&self, perm: &[usize]) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let e2: Vec<u32> = perm.iter().map(|&old| e[old]).collect();
                    (e2, c.clone())
                })
                .collect(),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.nvars);
        let pow_tables = power_tables(z, &self.max_exponents());
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in self.terms() {
            let mut m = c.to_complex();
            for (v, &ev) in e.iter().enumerate() {
                m *= pow_tables[v][ev as usize];
            }
            acc += m;
        }
        acc
    }

    fn max_exponents(&self) -> Vec<u32> {
        let mut m = vec![0u32; self.nvars];
        for e in self.terms.keys() {
            for (v, &x) in e.iter().enumerate() {
                m[v] = m[v].max(x);
            }
        }
        m
    }
}

fn power_tables(z: &[Complex64], max_exp: &[u32]) -> Vec<Vec<Complex64>> {
    z.iter()
        .zip(max_exp)
        .map(|(&zv, &m)| {
            let mut t = Vec::with_capacity(m as usize + 1);
            t.push(Complex64::new(1.0, 0.0));
            for j in 1..=m as usize {
                let prev = t[j - 1];
                t.push(prev * zv);
            }
            t
        })
        .collect()
}

/// Polynomial self-map of C^k.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolynomialMap {
    pub components: Vec<Polynomial>,
}

impl PolynomialMap {
    pub fn new(components: Vec<Polynomial>) -> Self {
        Self { components }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.components.iter().map(|p| p.degree().unwrap_or(0)).collect()
    }

    pub fn eval(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.components.iter().map(|p| p.eval(z)).collect()
    }

    /// Conjugation by the coordinate permutation sigma with
    /// `sigma(new j) = old perm[j]`: reorders components and renames variables.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            components: perm.iter().map(|&old| self.components[old].rename_vars(perm)).collect(),
        }
    }

    /// Composition with the blockwise monomial map
    /// `pi(z)_(i) = z_(i)^{p_i}` for a block structure; `pexp` gives one
    /// exponent per block and must be non-decreasing.
    pub fn compose_monomial(&self, blocks: &BlockStructure, pexp: &[u32]) -> Result<Self, PolyError> {
        if pexp.len() != blocks.m {
            return Err(PolyError::DimensionMismatch { expected: blocks.m, got: pexp.len() });
        }
        if pexp.windows(2).any(|w| w[0] > w[1]) || pexp.iter().any(|&p| p == 0) {
            return Err(PolyError::InvalidPi);
        }
        let per_var = blocks.per_variable(pexp);
        Ok(Self {
            components: self.components.iter().map(|p| p.scale_exponents(&per_var)).collect(),
        })
    }

    /// Jacobian matrix of partial derivatives, row-major.
    pub fn jacobian(&self) -> Vec<Vec<Polynomial>> {
        let k = self.k();
        self.components
            .iter()
            .map(|p| (0..k).map(|v| p.partial(v)).collect())
            .collect()
    }

    /// Operator 2-norm of the Jacobian at a point, via power iteration on
    /// the Hermitian product.
    pub fn jacobian_norm_at(&self, z: &[Complex64]) -> f64 {
        let k = self.k();
        let a: Vec<Vec<Complex64>> = self
            .jacobian()
            .iter()
            .map(|row| row.iter().map(|p| p.eval(z)).collect())
            .collect();
        spectral_norm(&a, k)
    }
}

/// Largest singular value of a k x k complex matrix (row-major).
pub fn spectral_norm(a: &[Vec<Complex64>], k: usize) -> f64 {
    let mut v: Vec<Complex64> = (0..k)
        .map(|j| Complex64::new(1.0 + 0.1 * j as f64, 0.3 - 0.05 * j as f64))
        .collect();
    let mut sigma = 0.0f64;
    for _ in 0..100 {
        // w = A v, u = A^H w
        let w: Vec<Complex64> = (0..k)
            .map(|i| (0..k).map(|j| a[i][j] * v[j]).sum())
            .collect();
        let u: Vec<Complex64> = (0..k)
            .map(|j| (0..k).map(|i| a[i][j].conj() * w[i]).sum())
            .collect();
        let norm = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let new_sigma = norm.sqrt();
        v = u.iter().map(|x| x / norm).collect();
        if (new_sigma - sigma).abs() <= 1e-14 * new_sigma {
            sigma = new_sigma;
            break;
        }
        sigma = new_sigma;
    }
    sigma
}

/// Block structure of a map sorted by descending component degree:
/// cut points `l = (l_0, ..., l_m)` with `l_0 = 1`, `l_m = k + 1` (1-based),
/// block degrees `d` strictly decreasing, and the sorting permutation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockStructure {
    pub m: usize,
    pub l: Vec<usize>,
    pub d: Vec<u32>,
    pub permutation: Vec<usize>,
}

impl BlockStructure {
    /// 0-based component range of block `i` (1-based block index).
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        (self.l[i - 1] - 1)..(self.l[i] - 1)
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.l[i] - self.l[i - 1]
    }

    /// 1-based block index containing 0-based component `j`.
    pub fn block_of(&self, j: usize) -> usize {
        (1..=self.m).find(|&i| self.block_range(i).contains(&j)).unwrap()
    }

    /// Expand per-block values to per-variable values.
    pub fn per_variable(&self, per_block: &[u32]) -> Vec<u32> {
        let k = self.l[self.m] - 1;
        (0..k).map(|j| per_block[self.block_of(j) - 1]).collect()
    }
}

/// Sort components by descending degree (stable) and return the block
/// structure together with the conjugated map.
pub fn block_structure(map: &PolynomialMap) -> Result<(BlockStructure, PolynomialMap), PolyError> {
    let k = map.k();
    for (j, p) in map.components.iter().enumerate() {
        if p.degree().unwrap_or(0) == 0 {
            return Err(PolyError::MalformedMap(j));
        }
    }
    let degs = map.degrees();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by_key(|&j| std::cmp::Reverse(degs[j]));
    let sorted = map.permuted(&perm);
    let sorted_degs = sorted.degrees();
    let mut l = vec![1usize];
    let mut d = Vec::new();
    let mut j = 0;
    while j < k {
        let dj = sorted_degs[j];
        let mut end = j + 1;
        while end < k && sorted_degs[end] == dj {
            end += 1;
        }
        d.push(dj);
        l.push(end + 1);
        j = end;
    }
    let blocks = BlockStructure { m: d.len(), l, d, permutation: perm };
    Ok((blocks, sorted))
}
