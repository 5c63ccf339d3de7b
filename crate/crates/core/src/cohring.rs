//! Graded commutative ℚ-algebras with monomial bases.
//!
//! Rings are built from points, projective spaces, tensor products and
//! monic extensions `A[x]/P(x)`. Every class is stored as a dense vector of
//! exact rationals in the canonical basis, so reduction happens once, at
//! multiplication time, through a precomputed structure-constant table.

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `(-1)^n` as a rational.
pub fn sign(n: i64) -> Q {
    if n.rem_euclid(2) == 0 {
        q(1)
    } else {
        q(-1)
    }
}

/// Serialize a rational as the string `"n"` or `"n/d"`.
pub fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub fn ser_qvec<S: serde::Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.to_string()))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("classes live in different rings: {0} and {1}")]
    Mismatch(String, String),
    #[error("unsupported base kind: {0}")]
    Unsupported(String),
    #[error("relation coefficient {index} has degree {got}, expected {want}")]
    Inhomogeneous { index: usize, got: usize, want: usize },
}

pub struct Ring {
    name: String,
    labels: Vec<String>,
    degrees: Vec<usize>,
    table: Vec<Vec<(usize, Q)>>,
    integral: Vec<Q>,
    top: usize,
    parent: Option<(Arc<Ring>, usize)>,
}

impl fmt::Debug for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring({}, rank {}, top {})", self.name, self.rank(), self.top)
    }
}

impl Ring {
    fn from_parts(
        name: String,
        labels: Vec<String>,
        degrees: Vec<usize>,
        table: Vec<Vec<(usize, Q)>>,
        integral: Vec<Q>,
        top: usize,
        parent: Option<(Arc<Ring>, usize)>,
    ) -> Arc<Ring> {
        Arc::new(Ring { name, labels, degrees, table, integral, top, parent })
    }

    pub fn point() -> Arc<Ring> {
        Ring::from_parts(
            "pt".into(),
            vec!["1".into()],
            vec![0],
            vec![vec![(0, q(1))]],
            vec![q(1)],
            0,
            None,
        )
    }

    /// `ℚ[p]/(p^{n+1})` with `∫ p^n = 1`.
    pub fn projective(n: usize, var: &str) -> Arc<Ring> {
        let rank = n + 1;
        let labels = (0..rank).map(|i| monomial_label(var, i)).collect();
        let mut table = Vec::with_capacity(rank * rank);
        for i in 0..rank {
            for j in 0..rank {
                if i + j <= n {
                    table.push(vec![(i + j, q(1))]);
                } else {
                    table.push(vec![]);
                }
            }
        }
        let mut integral = vec![q(0); rank];
        integral[n] = q(1);
        Ring::from_parts(format!("P{n}"), labels, (0..rank).collect(), table, integral, n, None)
    }

    /// Tensor product over ℚ; integration is the product of integrations.
    pub fn tensor(a: &Arc<Ring>, b: &Arc<Ring>) -> Arc<Ring> {
        let (ra, rb) = (a.rank(), b.rank());
        let idx = |i: usize, j: usize| i * rb + j;
        let mut labels = Vec::with_capacity(ra * rb);
        let mut degrees = Vec::with_capacity(ra * rb);
        let mut integral = Vec::with_capacity(ra * rb);
        for i in 0..ra {
            for j in 0..rb {
                labels.push(join_labels(&a.labels[i], &b.labels[j]));
                degrees.push(a.degrees[i] + b.degrees[j]);
                integral.push(&a.integral[i] * &b.integral[j]);
            }
        }
        let rank = ra * rb;
        let mut table = vec![Vec::new(); rank * rank];
        for i1 in 0..ra {
            for j1 in 0..rb {
                for i2 in 0..ra {
                    for j2 in 0..rb {
                        let mut out = Vec::new();
                        for (ka, ca) in &a.table[i1 * ra + i2] {
                            for (kb, cb) in &b.table[j1 * rb + j2] {
                                out.push((idx(*ka, *kb), ca * cb));
                            }
                        }
                        table[idx(i1, j1) * rank + idx(i2, j2)] = out;
                    }
                }
            }
        }
        Ring::from_parts(
            format!("{}x{}", a.name, b.name),
            labels,
            degrees,
            table,
            integral,
            a.top + b.top,
            None,
        )
    }

    /// `A[x]/(x^k + c_1 x^{k-1} + ... + c_k)` where `coeffs = [c_1, ..., c_k]`
    /// and `c_i` has degree `i`. Basis `a·x^e` with `e < k`; `∫ a·x^{k-1} = ∫_A a`.
    pub fn extend(base: &Arc<Ring>, var: &str, coeffs: &[Class]) -> Result<Arc<Ring>, RingError> {
        let k = coeffs.len();
        assert!(k >= 1, "monic extension needs a relation of positive degree");
        for (i, c) in coeffs.iter().enumerate() {
            base.check(c)?;
            if let Some(d) = c.homogeneous_degree() {
                if d != i + 1 {
                    return Err(RingError::Inhomogeneous { index: i + 1, got: d, want: i + 1 });
                }
            } else if !c.is_zero() {
                return Err(RingError::Inhomogeneous { index: i + 1, got: usize::MAX, want: i + 1 });
            }
        }
        // red[n][e] = coefficient (in A) of x^e in the reduction of x^n.
        let mut red: Vec<Vec<Class>> = Vec::with_capacity(2 * k);
        for n in 0..k {
            let mut v = vec![base.zero(); k];
            v[n] = base.unit();
            red.push(v);
        }
        for n in k..(2 * k - 1).max(k + 1) {
            let prev = &red[n - 1];
            let mut v = vec![base.zero(); k];
            for e in 0..k - 1 {
                v[e + 1] = prev[e].clone();
            }
            let top = &prev[k - 1];
            if !top.is_zero() {
                for i in 0..k {
                    v[k - 1 - i] = &v[k - 1 - i] - &(top * &coeffs[i]);
                }
            }
            red.push(v);
        }
        let ra = base.rank();
        let rank = ra * k;
        let mut labels = Vec::with_capacity(rank);
        let mut degrees = Vec::with_capacity(rank);
        let mut integral = Vec::with_capacity(rank);
        for a in 0..ra {
            for e in 0..k {
                labels.push(join_labels(&base.labels[a], &monomial_label(var, e)));
                degrees.push(base.degrees[a] + e);
                integral.push(if e == k - 1 { base.integral[a].clone() } else { q(0) });
            }
        }
        let mut table = vec![Vec::new(); rank * rank];
        for a in 0..ra {
            for e in 0..k {
                for b in 0..ra {
                    for f in 0..k {
                        let ab = &base.basis(a) * &base.basis(b);
                        let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
                        if !ab.is_zero() {
                            for (e2, rc) in red[e + f].iter().enumerate() {
                                if rc.is_zero() {
                                    continue;
                                }
                                let prod = &ab * rc;
                                for (n, cn) in prod.coeffs.iter().enumerate() {
                                    if !cn.is_zero() {
                                        *acc.entry(n * k + e2).or_insert_with(Q::zero) += cn;
                                    }
                                }
                            }
                        }
                        table[(a * k + e) * rank + (b * k + f)] =
                            acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
                    }
                }
            }
        }
        Ok(Ring::from_parts(
            format!("{}[{}]", base.name, var),
            labels,
            degrees,
            table,
            integral,
            base.top + k - 1,
            Some((base.clone(), k)),
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn top_degree(&self) -> usize {
        self.top
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn parent(&self) -> Option<&Arc<Ring>> {
        self.parent.as_ref().map(|(p, _)| p)
    }

    /// Structure constants `T_i · T_j = Σ c_k T_k`.
    pub fn product_of_basis(&self, i: usize, j: usize) -> &[(usize, Q)] {
        &self.table[i * self.rank() + j]
    }

    pub fn integral_of_basis(&self, i: usize) -> &Q {
        &self.integral[i]
    }

    fn check(&self, c: &Class) -> Result<(), RingError> {
        if std::ptr::eq(self, Arc::as_ptr(&c.ring)) {
            Ok(())
        } else {
            Err(RingError::Mismatch(self.name.clone(), c.ring.name.clone()))
        }
    }

    pub fn zero(self: &Arc<Self>) -> Class {
        Class { ring: self.clone(), coeffs: vec![q(0); self.rank()] }
    }

    pub fn unit(self: &Arc<Self>) -> Class {
        self.basis(0)
    }

    pub fn basis(self: &Arc<Self>, i: usize) -> Class {
        let mut c = self.zero();
        c.coeffs[i] = q(1);
        c
    }

    pub fn scalar(self: &Arc<Self>, s: Q) -> Class {
        let mut c = self.zero();
        c.coeffs[0] = s;
        c
    }

    pub fn from_coeffs(self: &Arc<Self>, coeffs: Vec<Q>) -> Class {
        assert_eq!(coeffs.len(), self.rank());
        Class { ring: self.clone(), coeffs }
    }

    /// The generator `x` of a monic extension.
    pub fn generator(self: &Arc<Self>) -> Class {
        let (_, k) = self.parent.as_ref().expect("not an extension ring");
        if *k > 1 {
            self.basis(1)
        } else {
            panic!("degree-one extension has no independent generator")
        }
    }

    /// Pull back a class from the parent ring of a monic extension.
    pub fn lift(self: &Arc<Self>, c: &Class) -> Class {
        let (p, k) = self.parent.as_ref().expect("not an extension ring");
        p.check(c).expect("class is not from the parent ring");
        let mut out = self.zero();
        for (a, v) in c.coeffs.iter().enumerate() {
            out.coeffs[a * k] = v.clone();
        }
        out
    }

    /// Express a class as `Σ_e a_e x^e` with `a_e` in the parent ring.
    pub fn split(self: &Arc<Self>, c: &Class) -> Vec<Class> {
        let (p, k) = self.parent.as_ref().expect("not an extension ring");
        self.check(c).expect("class is not from this ring");
        let mut out = vec![p.zero(); *k];
        for (i, v) in c.coeffs.iter().enumerate() {
            if !v.is_zero() {
                out[i % k].coeffs[i / k] = v.clone();
            }
        }
        out
    }

    /// Gram matrix `∫ T_i T_j`.
    pub fn pairing_matrix(self: &Arc<Self>) -> Vec<Vec<Q>> {
        let n = self.rank();
        (0..n)
            .map(|i| (0..n).map(|j| (self.basis(i) * self.basis(j)).integrate()).collect())
            .collect()
    }

    /// Matrix of multiplication by `v`: column `e` holds `v·T_e`.
    pub fn mult_matrix(self: &Arc<Self>, v: &Class) -> Vec<Vec<Q>> {
        let n = self.rank();
        let mut m = vec![vec![q(0); n]; n];
        for e in 0..n {
            let p = v * &self.basis(e);
            for (i, c) in p.coeffs.iter().enumerate() {
                m[i][e] = c.clone();
            }
        }
        m
    }
}

fn monomial_label(var: &str, e: usize) -> String {
    match e {
        0 => "1".into(),
        1 => var.into(),
        _ => format!("{var}^{e}"),
    }
}

fn join_labels(a: &str, b: &str) -> String {
    match (a, b) {
        ("1", _) => b.into(),
        (_, "1") => a.into(),
        _ => format!("{a}{b}"),
    }
}

#[derive(Clone)]
pub struct Class {
    ring: Arc<Ring>,
    coeffs: Vec<Q>,
}

impl PartialEq for Class {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring) && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let label = &self.ring.labels[i];
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            if label == "1" {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{label}")?;
            } else {
                write!(f, "{mag}{label}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Class {
    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Q {
        &self.coeffs[i]
    }

    pub fn same_ring(&self, other: &Class) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, s: &Q) -> Class {
        Class { ring: self.ring.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn try_add(&self, other: &Class) -> Result<Class, RingError> {
        self.ring.check(other)?;
        Ok(Class {
            ring: self.ring.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn try_mul(&self, other: &Class) -> Result<Class, RingError> {
        self.ring.check(other)?;
        let n = self.ring.rank();
        let mut out = vec![q(0); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let ab = a * b;
                for (k, c) in &self.ring.table[i * n + j] {
                    out[*k] += &ab * c;
                }
            }
        }
        Ok(Class { ring: self.ring.clone(), coeffs: out })
    }

    pub fn pow(&self, e: usize) -> Class {
        let mut acc = self.ring.unit();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// `∫` over the ring's fundamental class; only the top-degree part counts.
    pub fn integrate(&self) -> Q {
        self.coeffs.iter().zip(&self.ring.integral).map(|(a, b)| a * b).sum()
    }

    pub fn degree_part(&self, d: usize) -> Class {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| if self.ring.degrees[i] == d { c.clone() } else { q(0) })
            .collect();
        Class { ring: self.ring.clone(), coeffs }
    }

    /// `Some(d)` when all nonzero components have degree `d`.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut deg = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            match deg {
                None => deg = Some(self.ring.degrees[i]),
                Some(d) if d != self.ring.degrees[i] => return None,
                _ => {}
            }
        }
        deg
    }

    /// Largest degree carried by a nonzero component.
    pub fn max_degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| self.ring.degrees[i])
            .max()
    }

    /// The scalar part (coefficient of the unit).
    pub fn constant(&self) -> Q {
        self.coeffs[0].clone()
    }
}

impl<'a> Add<&'a Class> for &'a Class {
    type Output = Class;
    fn add(self, rhs: &Class) -> Class {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<'a> Sub<&'a Class> for &'a Class {
    type Output = Class;
    fn sub(self, rhs: &Class) -> Class {
        self.try_add(&-rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<'a> Mul<&'a Class> for &'a Class {
    type Output = Class;
    fn mul(self, rhs: &Class) -> Class {
        self.try_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Add for Class {
    type Output = Class;
    fn add(self, rhs: Class) -> Class {
        &self + &rhs
    }
}

impl Sub for Class {
    type Output = Class;
    fn sub(self, rhs: Class) -> Class {
        &self - &rhs
    }
}

impl Mul for Class {
    type Output = Class;
    fn mul(self, rhs: Class) -> Class {
        &self * &rhs
    }
}

impl Neg for &Class {
    type Output = Class;
    fn neg(self) -> Class {
        Class { ring: self.ring.clone(), coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Neg for Class {
    type Output = Class;
    fn neg(self) -> Class {
        -&self
    }
}

/// Graded components `c_0, ..., c_n` of `∏ (1 + x_i)`.
pub fn chern_of_roots(ring: &Arc<Ring>, roots: &[Class]) -> Vec<Class> {
    let mut c = vec![ring.unit()];
    for x in roots {
        let mut next = c.clone();
        next.push(ring.zero());
        for i in 0..c.len() {
            next[i + 1] = &next[i + 1] + &(&c[i] * x);
        }
        c = next;
    }
    c
}

/// Inverse of a graded series `1 + c_1 + c_2 + ...`, up to degree `upto`.
pub fn invert_series(ring: &Arc<Ring>, c: &[Class], upto: usize) -> Vec<Class> {
    let mut s = vec![ring.unit()];
    for n in 1..=upto {
        let mut acc = ring.zero();
        for i in 1..=n.min(c.len().saturating_sub(1)) {
            acc = &acc - &(&c[i] * &s[n - i]);
        }
        s.push(acc);
    }
    s
}

/// Graded product of two series, truncated at `upto`.
pub fn series_product(ring: &Arc<Ring>, a: &[Class], b: &[Class], upto: usize) -> Vec<Class> {
    (0..=upto)
        .map(|n| {
            let mut acc = ring.zero();
            for i in 0..=n {
                if i < a.len() && n - i < b.len() {
                    acc = &acc + &(&a[i] * &b[n - i]);
                }
            }
            acc
        })
        .collect()
}

/// Segre classes `s_i(F + F'^*)` of a virtual split bundle, `i = 0..=upto`.
pub fn segre_of_virtual(ring: &Arc<Ring>, f_roots: &[Class], fdual_roots: &[Class], upto: usize) -> Vec<Class> {
    let neg: Vec<Class> = fdual_roots.iter().map(|x| -x).collect();
    let c = series_product(
        ring,
        &chern_of_roots(ring, f_roots),
        &chern_of_roots(ring, &neg),
        upto,
    );
    invert_series(ring, &c, upto)
}

/// Laurent polynomial in `z` with ring-valued coefficients.
#[derive(Clone)]
pub struct ZClass {
    ring: Arc<Ring>,
    terms: BTreeMap<i32, Class>,
}

impl PartialEq for ZClass {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring) && self.terms == other.terms
    }
}

impl fmt::Debug for ZClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(k, c)| format!("z^{k}·({c})")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl ZClass {
    pub fn zero(ring: &Arc<Ring>) -> ZClass {
        ZClass { ring: ring.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(c: Class) -> ZClass {
        ZClass::monomial(0, c)
    }

    pub fn monomial(k: i32, c: Class) -> ZClass {
        let ring = c.ring.clone();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(k, c);
        }
        ZClass { ring, terms }
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn terms(&self) -> &BTreeMap<i32, Class> {
        &self.terms
    }

    pub fn coeff(&self, k: i32) -> Class {
        self.terms.get(&k).cloned().unwrap_or_else(|| self.ring.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, k: i32, c: &Class) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(k).or_insert_with(|| self.ring.zero());
        *entry = &*entry + c;
        if entry.is_zero() {
            self.terms.remove(&k);
        }
    }

    pub fn add(&self, other: &ZClass) -> ZClass {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, c);
        }
        out
    }

    pub fn scale(&self, s: &Q) -> ZClass {
        let mut out = ZClass::zero(&self.ring);
        for (k, c) in &self.terms {
            out.add_term(*k, &c.scale(s));
        }
        out
    }

    pub fn shift(&self, dk: i32) -> ZClass {
        ZClass { ring: self.ring.clone(), terms: self.terms.iter().map(|(k, c)| (k + dk, c.clone())).collect() }
    }

    pub fn mul(&self, other: &ZClass) -> ZClass {
        let mut out = ZClass::zero(&self.ring);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                out.add_term(k1 + k2, &(c1 * c2));
            }
        }
        out
    }

    pub fn mul_class(&self, c: &Class) -> ZClass {
        let mut out = ZClass::zero(&self.ring);
        for (k, a) in &self.terms {
            out.add_term(*k, &(a * c));
        }
        out
    }

    /// `v + m z` for a class `v`.
    pub fn linear(v: &Class, m: i64) -> ZClass {
        let mut out = ZClass::constant(v.clone());
        out.add_term(1, &v.ring.scalar(q(m)));
        out
    }

    /// `1/(v + m z)` for nilpotent `v` and `m ≠ 0`, expanded as
    /// `(mz)^{-1} Σ_k (-v/(mz))^k` until the powers of `v` vanish.
    pub fn inverse_linear(v: &Class, m: i64) -> ZClass {
        assert!(m != 0, "cannot invert a nilpotent class");
        let ring = v.ring.clone();
        let mut out = ZClass::zero(&ring);
        let mut pw = ring.unit();
        let mut k = 0i32;
        let inv_m = qr(1, m);
        let mut coef = inv_m.clone();
        while !pw.is_zero() {
            out.add_term(-1 - k, &pw.scale(&coef));
            pw = &pw * v;
            coef = -&coef * &inv_m;
            k += 1;
            assert!(k as usize <= ring.rank() + 1, "class is not nilpotent");
        }
        out
    }

    pub fn max_z(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    pub fn min_z(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }
}

/// Requested shape of the base `S`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Point,
    Projspace(usize),
    Product(Vec<BaseKind>),
}

impl BaseKind {
    fn factors(&self) -> Result<Vec<usize>, RingError> {
        match self {
            BaseKind::Point => Ok(vec![]),
            BaseKind::Projspace(0) => Err(RingError::Unsupported("projspace(0)".into())),
            BaseKind::Projspace(n) => Ok(vec![*n]),
            BaseKind::Product(list) => {
                let mut out = Vec::new();
                for k in list {
                    out.extend(k.factors()?);
                }
                Ok(out)
            }
        }
    }
}

/// One structure constant of the small quantum product on `S`:
/// `p_g ∗ T̄_j ∋ coeff · q^{beta} T̄_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct QdeTerm {
    pub beta: Vec<i64>,
    pub k: usize,
    pub coeff: Q,
}

/// Cohomology of a product of projective spaces together with its
/// Mori generators, small quantum product and base `J` coefficients.
#[derive(Debug)]
pub struct BaseRing {
    pub kind: BaseKind,
    pub ring: Arc<Ring>,
    /// `n_g` for each projective factor.
    pub dims: Vec<usize>,
    /// Exponent vector of every basis monomial.
    pub exps: Vec<Vec<usize>>,
    /// Ring index of the hyperplane class `p_g`.
    pub divisor_basis: Vec<usize>,
    /// Lines of each factor, as vectors in `N_1(S) = ℤ^{#factors}`.
    pub mori_generators: Vec<Vec<i64>>,
}

pub fn build_base(kind: &BaseKind) -> Result<Arc<BaseRing>, RingError> {
    let dims = kind.factors()?;
    let mut ring = Ring::point();
    let mut exps: Vec<Vec<usize>> = vec![vec![]];
    for (g, &n) in dims.iter().enumerate() {
        let var = if dims.len() == 1 { "p".to_string() } else { format!("p{}", g + 1) };
        let pn = Ring::projective(n, &var);
        ring = if g == 0 { pn } else { Ring::tensor(&ring, &pn) };
        let mut next = Vec::new();
        for e in &exps {
            for a in 0..=n {
                let mut v = e.clone();
                v.push(a);
                next.push(v);
            }
        }
        exps = next;
    }
    let ng = dims.len();
    let divisor_basis = (0..ng)
        .map(|g| {
            let mut v = vec![0; ng];
            v[g] = 1;
            exps.iter().position(|e| *e == v).unwrap()
        })
        .collect();
    let mori_generators = (0..ng)
        .map(|g| (0..ng).map(|h| i64::from(g == h)).collect())
        .collect();
    Ok(Arc::new(BaseRing { kind: kind.clone(), ring, dims, exps, divisor_basis, mori_generators }))
}

impl BaseRing {
    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn rank(&self) -> usize {
        self.ring.rank()
    }

    pub fn index_of(&self, exps: &[usize]) -> Option<usize> {
        self.exps.iter().position(|e| e == exps)
    }

    pub fn divisor(&self, g: usize) -> Class {
        self.ring.basis(self.divisor_basis[g])
    }

    /// `Σ_g deg_g p_g`.
    pub fn divisor_class(&self, deg: &[i64]) -> Class {
        assert_eq!(deg.len(), self.num_factors(), "degree vector length");
        let mut c = self.ring.zero();
        for (g, k) in deg.iter().enumerate() {
            c = &c + &self.divisor(g).scale(&q(*k));
        }
        c
    }

    pub fn is_effective(&self, beta: &[i64]) -> bool {
        beta.iter().all(|b| *b >= 0)
    }

    pub fn degree(beta: &[i64]) -> i64 {
        beta.iter().sum()
    }

    /// `p_g ∗ T̄_j` in the small quantum ring.
    pub fn qde(&self, g: usize, j: usize) -> Vec<QdeTerm> {
        let mut e = self.exps[j].clone();
        let mut beta = vec![0; self.num_factors()];
        if e[g] < self.dims[g] {
            e[g] += 1;
        } else {
            e[g] = 0;
            beta[g] = 1;
        }
        vec![QdeTerm { beta, k: self.index_of(&e).unwrap(), coeff: q(1) }]
    }

    /// `J^S_β = ∏_g 1/∏_{m=1}^{β_g} (p_g + m z)^{n_g + 1}`, zero off the cone.
    pub fn base_j(&self, beta: &[i64]) -> ZClass {
        if !self.is_effective(beta) {
            return ZClass::zero(&self.ring);
        }
        let mut out = ZClass::constant(self.ring.unit());
        for (g, &b) in beta.iter().enumerate() {
            let p = self.divisor(g);
            for m in 1..=b {
                let inv = ZClass::inverse_linear(&p, m);
                for _ in 0..=self.dims[g] {
                    out = out.mul(&inv);
                }
            }
        }
        out
    }

    /// Check the shipped data against their defining identities:
    /// `(p_g + β_g z)^{n_g+1} J_β = J_{β - e_g}` and associativity of the
    /// quantum product of divisors.
    pub fn validate(&self, max_degree: i64) -> Result<(), String> {
        let ng = self.num_factors();
        let mut betas: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..ng {
            let mut next = Vec::new();
            for b in &betas {
                for k in 0..=max_degree {
                    let mut v = b.clone();
                    v.push(k);
                    next.push(v);
                }
            }
            betas = next;
        }
        for beta in &betas {
            for g in 0..ng {
                if beta[g] == 0 {
                    continue;
                }
                let p = self.divisor(g);
                let mut lhs = self.base_j(beta);
                for _ in 0..=self.dims[g] {
                    lhs = lhs.mul(&ZClass::linear(&p, beta[g]));
                }
                let mut lower = beta.clone();
                lower[g] -= 1;
                if lhs != self.base_j(&lower) {
                    return Err(format!("base J fails its equation at {beta:?}, factor {g}"));
                }
            }
        }
        for g in 0..ng {
            for h in 0..ng {
                for j in 0..self.rank() {
                    let apply = |a: usize, b: usize| -> BTreeMap<(Vec<i64>, usize), Q> {
                        let mut out = BTreeMap::new();
                        for t1 in self.qde(b, j) {
                            for t2 in self.qde(a, t1.k) {
                                let beta: Vec<i64> =
                                    t1.beta.iter().zip(&t2.beta).map(|(x, y)| x + y).collect();
                                *out.entry((beta, t2.k)).or_insert_with(Q::zero) += &t1.coeff * &t2.coeff;
                            }
                        }
                        out
                    };
                    if apply(g, h) != apply(h, g) {
                        return Err(format!("quantum product of p{g}, p{h} is not commutative on T{j}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Poincaré-dual basis `Ť_i` with `∫ T̄_j Ť_i = δ_ij`.
    pub fn dual_basis(&self) -> Vec<Class> {
        let gram = self.ring.pairing_matrix();
        let inv = crate::linalg::inverse(&gram).expect("pairing on S is degenerate");
        (0..self.rank())
            .map(|i| self.ring.from_coeffs((0..self.rank()).map(|j| inv[j][i].clone()).collect()))
            .collect()
    }
}
