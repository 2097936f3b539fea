//! Sparse multivariate polynomials, unreduced rational functions and
//! polynomial matrices over `f64`.
//!
//! Monomials are kept in graded order: lower total degree first, and within a
//! degree the monomial with the higher power of the lower-indexed variable
//! first. For variables `x1 < x2` the degree-2 basis is therefore
//! `[1, x1, x2, x1², x1·x2, x2²]`. Gram-matrix indexing in the certificate
//! layer depends on this order, so it must not change.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable {0} is not bound")]
    UnboundVariable(Var),
    #[error("denominator vanishes at the evaluation point")]
    DivisionByZero,
    #[error("the zero polynomial cannot be a denominator")]
    ZeroDenominator,
    #[error("polynomial is not univariate in {var}: found {found}")]
    NotUnivariate { var: Var, found: Var },
    #[error("binding for {0} is a rational function; only polynomial bindings compose")]
    RationalBinding(Var),
    #[error("polynomial is not affine in the unknowns (monomial {0})")]
    NotAffine(String),
    #[error("matrix is not symmetric at entry ({0}, {1})")]
    Asymmetric(usize, usize),
}

pub type Result<T> = std::result::Result<T, PolyError>;

/// A polynomial variable, namespaced by role.
///
/// `Config(i)` are TC-space coordinates of a kinematic chain, `Time` is the
/// plan parameter and `Unknown(k)` are decision variables of a certificate
/// program (hyperplane coefficients).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Config(u32),
    Time,
    Unknown(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Config(i) => write!(f, "s{i}"),
            Var::Time => write!(f, "t"),
            Var::Unknown(k) => write!(f, "u{k}"),
        }
    }
}

/// Product of variable powers. Exponents are strictly positive and the
/// variables are sorted; the empty monomial is the constant `1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn pow(v: Var, e: u32) -> Self {
        if e == 0 {
            Self::one()
        } else {
            Monomial(vec![(v, e)])
        }
    }

    /// Builds a monomial from arbitrary `(var, exponent)` pairs, merging
    /// repeats and dropping zero exponents.
    pub fn from_exponents(iter: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in iter {
            *map.entry(v).or_default() += e;
        }
        Monomial(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn exponents(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|&&(w, _)| w == v)
            .map_or(0, |&(_, e)| e)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (va, ea) = self.0[i];
            let (vb, eb) = other.0[j];
            match va.cmp(&vb) {
                Ordering::Less => {
                    out.push((va, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((vb, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((va, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Splits off the power of `v`, returning `(exponent, rest)`.
    pub fn split(&self, v: Var) -> (u32, Monomial) {
        let mut e = 0;
        let rest = self
            .0
            .iter()
            .filter(|&&(w, k)| {
                if w == v {
                    e = k;
                    false
                } else {
                    true
                }
            })
            .copied()
            .collect();
        (e, Monomial(rest))
    }

    pub fn eval(&self, mut value: impl FnMut(Var) -> Option<f64>) -> Result<f64> {
        let mut acc = 1.0;
        for &(v, e) in &self.0 {
            let x = value(v).ok_or(PolyError::UnboundVariable(v))?;
            acc *= x.powi(e as i32);
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            let va = a.get(i).map(|p| p.0);
            let vb = b.get(j).map(|p| p.0);
            let v = match (va, vb) {
                (None, None) => return Ordering::Equal,
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (Some(x), Some(y)) => x.min(y),
            };
            let ea = if va == Some(v) { a[i].1 } else { 0 };
            let eb = if vb == Some(v) { b[j].1 } else { 0 };
            if ea != eb {
                // higher power of the lower-indexed variable sorts first
                return eb.cmp(&ea);
            }
            if va == Some(v) {
                i += 1;
            }
            if vb == Some(v) {
                j += 1;
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, &(v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials in `vars` of total degree at most `d`, in graded order.
/// The list has `C(m + d, d)` entries for `m` variables.
pub fn monomial_basis(vars: &[Var], d: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut frontier = vec![(Monomial::one(), 0usize)];
    for _ in 0..d {
        let mut next = Vec::new();
        for (m, first) in &frontier {
            // extend with variables at index >= first so each monomial is produced once
            for (k, &v) in vars.iter().enumerate().skip(*first) {
                next.push((m.mul(&Monomial::var(v)), k));
            }
        }
        out.extend(next.iter().map(|(m, _)| m.clone()));
        frontier = next;
    }
    out.sort();
    out.dedup();
    out
}

/// Sparse polynomial with `f64` coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(Monomial::var(v), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// Univariate polynomial from ascending coefficients `c0 + c1 v + ...`.
    pub fn univariate(v: Var, coeffs: &[f64]) -> Self {
        let mut p = Self::zero();
        for (k, &c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::pow(v, k as u32), c);
        }
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m.degree_in(v)).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.exponents().iter().map(|&(v, _)| v))
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn eval_with(&self, mut value: impl FnMut(Var) -> Option<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (m, &c) in &self.terms {
            acc += c * m.eval(&mut value)?;
        }
        Ok(acc)
    }

    pub fn eval(&self, point: &BTreeMap<Var, f64>) -> Result<f64> {
        self.eval_with(|v| point.get(&v).copied())
    }

    /// Evaluates a polynomial univariate in `v` by Horner's rule.
    pub fn eval_univariate(&self, v: Var, x: f64) -> Result<f64> {
        let c = self.univariate_coeff_vector(v)?;
        Ok(c.iter().rev().fold(0.0, |acc, &a| acc * x + a))
    }

    /// Dense ascending coefficient list in `v`, length `deg + 1` (`[0]` for the
    /// zero polynomial).
    pub fn univariate_coeff_vector(&self, v: Var) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.degree_in(v) as usize + 1];
        for (m, &c) in &self.terms {
            let (e, rest) = m.split(v);
            if let Some(&(other, _)) = rest.exponents().first() {
                return Err(PolyError::NotUnivariate { var: v, found: other });
            }
            out[e as usize] += c;
        }
        Ok(out)
    }

    /// Polynomial composition. Variables without a binding stay free.
    pub fn compose(&self, bindings: &BTreeMap<Var, Polynomial>) -> Polynomial {
        let mut powers: BTreeMap<Var, Vec<Polynomial>> = BTreeMap::new();
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            let mut term = Polynomial::constant(c);
            let mut free = Vec::new();
            for &(v, e) in m.exponents() {
                match bindings.get(&v) {
                    Some(q) => {
                        let table = powers.entry(v).or_insert_with(|| vec![Polynomial::constant(1.0)]);
                        while table.len() <= e as usize {
                            let next = &table[table.len() - 1] * q;
                            table.push(next);
                        }
                        term = &term * &table[e as usize];
                    }
                    None => free.push((v, e)),
                }
            }
            if !free.is_empty() {
                term = &term * &Polynomial::monomial(Monomial::from_exponents(free), 1.0);
            }
            out = out + term;
        }
        out
    }

    /// Extracts the part of `self` that is affine in `Unknown` variables,
    /// returned as `(constant, [(unknown, coefficient)])` polynomials free of
    /// unknowns. Fails if any monomial is at least quadratic in unknowns.
    pub fn split_affine(&self) -> Result<(Polynomial, BTreeMap<Var, Polynomial>)> {
        let mut constant = Polynomial::zero();
        let mut linear: BTreeMap<Var, Polynomial> = BTreeMap::new();
        for (m, &c) in &self.terms {
            let unknowns: Vec<(Var, u32)> = m
                .exponents()
                .iter()
                .filter(|(v, _)| matches!(v, Var::Unknown(_)))
                .copied()
                .collect();
            match unknowns.as_slice() {
                [] => constant.add_term(m.clone(), c),
                [(u, 1)] => {
                    let (_, rest) = m.split(*u);
                    linear.entry(*u).or_default().add_term(rest, c);
                }
                _ => return Err(PolyError::NotAffine(m.to_string())),
            }
        }
        Ok((constant, linear))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &'a Polynomial) -> Polynomial {
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                *terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial { terms }
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

/// Quotient `num / den` kept in unreduced form. `den_positive` records that
/// the denominator is known to be positive on the whole domain of interest;
/// it is set by constructors that can guarantee it and preserved by
/// composition with polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
    den_positive: bool,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial, den_positive: bool) -> Result<Self> {
        if den.is_zero() {
            return Err(PolyError::ZeroDenominator);
        }
        Ok(Self { num, den, den_positive })
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self { num: p, den: Polynomial::constant(1.0), den_positive: true }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(Polynomial::constant(c))
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn denominator_positive(&self) -> bool {
        self.den_positive
    }

    pub fn into_parts(self) -> (Polynomial, Polynomial) {
        (self.num, self.den)
    }

    pub fn eval_with(&self, mut value: impl FnMut(Var) -> Option<f64>) -> Result<f64> {
        let d = self.den.eval_with(&mut value)?;
        if d == 0.0 || !d.is_finite() {
            return Err(PolyError::DivisionByZero);
        }
        Ok(self.num.eval_with(&mut value)? / d)
    }

    pub fn eval(&self, point: &BTreeMap<Var, f64>) -> Result<f64> {
        self.eval_with(|v| point.get(&v).copied())
    }

    /// Composes with the given bindings. Bindings must be polynomial; a
    /// binding whose denominator is a nonzero constant is folded in, any other
    /// rational binding is rejected.
    pub fn substitute(&self, bindings: &BTreeMap<Var, RationalFunction>) -> Result<RationalFunction> {
        let mut polys = BTreeMap::new();
        for (&v, rf) in bindings {
            if !rf.den.is_constant() {
                return Err(PolyError::RationalBinding(v));
            }
            let d = rf.den.constant_term();
            polys.insert(v, rf.num.scale(1.0 / d));
        }
        Ok(self.compose(&polys))
    }

    pub fn compose(&self, bindings: &BTreeMap<Var, Polynomial>) -> RationalFunction {
        RationalFunction {
            num: self.num.compose(bindings),
            den: self.den.compose(bindings),
            den_positive: self.den_positive,
        }
    }

    pub fn scale(&self, s: f64) -> RationalFunction {
        RationalFunction { num: self.num.scale(s), den: self.den.clone(), den_positive: self.den_positive }
    }

    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        RationalFunction {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
            den_positive: self.den_positive && other.den_positive,
        }
    }

    /// Sum without cancellation; shares the denominator when both operands
    /// carry structurally equal denominators.
    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        if self.den == other.den {
            return RationalFunction {
                num: &self.num + &other.num,
                den: self.den.clone(),
                den_positive: self.den_positive && other.den_positive,
            };
        }
        RationalFunction {
            num: &(&self.num * &other.den) + &(&other.num * &self.den),
            den: &self.den * &other.den,
            den_positive: self.den_positive && other.den_positive,
        }
    }
}

/// Dense matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
    symmetric: bool,
}

impl PolyMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Polynomial) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries, symmetric: false }
    }

    /// Symmetric matrix filled from the upper triangle `f(i, j)`, `i <= j`.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Polynomial) -> Self {
        let mut entries = vec![Polynomial::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let p = f(i, j);
                entries[j * n + i] = p.clone();
                entries[i * n + j] = p;
            }
        }
        Self { rows: n, cols: n, entries, symmetric: true }
    }

    /// Marks a square matrix symmetric after checking it coefficient-wise.
    pub fn into_symmetric(mut self) -> Result<Self> {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return Err(PolyError::Asymmetric(i, j));
                }
            }
        }
        if self.rows != self.cols {
            return Err(PolyError::Asymmetric(self.rows, self.cols));
        }
        self.symmetric = true;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.entries.iter().map(|p| p.degree_in(v)).max().unwrap_or(0)
    }
}
