//! Local models of a split ordinary `P^r` flop.
//!
//! `Z = P(F) → S` with `F = ⊕ L_i`, and `X = P(N ⊕ O) → Z` with
//! `N = ψ^*F' ⊗ O(-1)`. The flopped side `X'` is the same construction with
//! `F` and `F'` exchanged. Line bundles on `S` are given by degree vectors
//! against the Mori generators of the base.

use crate::cohring::{build_base, chern_of_roots, invert_series, q, BaseKind, BaseRing, Class, Ring, RingError, Q};
use crate::linalg::{self, Matrix};
use num::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("expected {want} line bundles, got {got}")]
    WrongLength { want: usize, got: usize },
    #[error("degree vector of length {got}, base has {want} Mori generators")]
    WrongDegreeLength { want: usize, got: usize },
    #[error("r must be at least 1")]
    BadRank,
    #[error("class is not a divisor on the base")]
    NotDivisor,
    #[error("curve class {0:?} is not effective on the base")]
    NotEffective(Vec<i64>),
    #[error("not a canonical basis element")]
    NonBasis,
    #[error("class {0} is not admissible")]
    Inadmissible(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// `β = β_S + dℓ + d₂γ` in `N_1(X) = N_1(S) ⊕ ℤℓ ⊕ ℤγ`, where `β_S` is the
/// canonical lift with `h·β_S = ξ·β_S = 0`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurveClass {
    pub bs: Vec<i64>,
    pub d: i64,
    pub d2: i64,
}

impl fmt::Debug for CurveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CurveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{},{})", self.bs, self.d, self.d2)
    }
}

impl CurveClass {
    pub fn new(bs: Vec<i64>, d: i64, d2: i64) -> Self {
        CurveClass { bs, d, d2 }
    }

    pub fn zero(ng: usize) -> Self {
        CurveClass { bs: vec![0; ng], d: 0, d2: 0 }
    }

    pub fn ell(ng: usize) -> Self {
        CurveClass { bs: vec![0; ng], d: 1, d2: 0 }
    }

    pub fn gamma(ng: usize) -> Self {
        CurveClass { bs: vec![0; ng], d: 0, d2: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.d == 0 && self.d2 == 0 && self.bs.iter().all(|b| *b == 0)
    }

    pub fn base_degree(&self) -> i64 {
        self.bs.iter().sum()
    }

    pub fn scale(&self, k: i64) -> Self {
        CurveClass { bs: self.bs.iter().map(|b| b * k).collect(), d: self.d * k, d2: self.d2 * k }
    }
}

impl Add for &CurveClass {
    type Output = CurveClass;
    fn add(self, o: &CurveClass) -> CurveClass {
        CurveClass {
            bs: self.bs.iter().zip(&o.bs).map(|(a, b)| a + b).collect(),
            d: self.d + o.d,
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for &CurveClass {
    type Output = CurveClass;
    fn sub(self, o: &CurveClass) -> CurveClass {
        self + &(-o)
    }
}

impl Neg for &CurveClass {
    type Output = CurveClass;
    fn neg(self) -> CurveClass {
        self.scale(-1)
    }
}

/// Effectivity data of a curve class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Effectivity {
    pub i_effective: bool,
    pub fi_effective: bool,
    pub admissible: bool,
    pub n: Vec<i64>,
    pub np: Vec<i64>,
    pub np_last: i64,
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One total space `P(N ⊕ O) → P(F) → S`.
#[derive(Debug)]
pub struct TotalSpace {
    pub r: usize,
    pub base: Arc<BaseRing>,
    /// Degree vectors of the summands of `F`.
    pub l: Vec<Vec<i64>>,
    /// Degree vectors of the summands of `F'`.
    pub lp: Vec<Vec<i64>>,
    pub hz: Arc<Ring>,
    pub hx: Arc<Ring>,
    pub h: Class,
    pub xi: Class,
    pub primed: bool,
}

impl TotalSpace {
    pub fn new(
        base: &Arc<BaseRing>,
        r: usize,
        l: Vec<Vec<i64>>,
        lp: Vec<Vec<i64>>,
        primed: bool,
    ) -> Result<TotalSpace, ModelError> {
        if r == 0 {
            return Err(ModelError::BadRank);
        }
        for list in [&l, &lp] {
            if list.len() != r + 1 {
                return Err(ModelError::WrongLength { want: r + 1, got: list.len() });
            }
            for v in list.iter() {
                if v.len() != base.num_factors() {
                    return Err(ModelError::WrongDegreeLength { want: base.num_factors(), got: v.len() });
                }
            }
        }
        let s = &base.ring;
        let lc: Vec<Class> = l.iter().map(|v| base.divisor_class(v)).collect();
        let cf = chern_of_roots(s, &lc);
        let (hname, xname) = if primed { ("h'", "ξ'") } else { ("h", "ξ") };
        let hz = Ring::extend(s, hname, &cf[1..])?;
        let hzg = hz.generator();
        let nroots: Vec<Class> =
            lp.iter().map(|v| &hz.lift(&base.divisor_class(v)) - &hzg).collect();
        let mut cn = chern_of_roots(&hz, &nroots);
        cn.push(hz.zero());
        let hx = Ring::extend(&hz, xname, &cn[1..])?;
        let h = hx.lift(&hzg);
        let xi = hx.generator();
        Ok(TotalSpace { r, base: base.clone(), l, lp, hz, hx, h, xi, primed })
    }

    pub fn rank(&self) -> usize {
        self.hx.rank()
    }

    pub fn num_factors(&self) -> usize {
        self.base.num_factors()
    }

    /// Index of `T̄_i h^l ξ^m` in the canonical basis.
    pub fn index(&self, i: usize, l: usize, m: usize) -> usize {
        (i * (self.r + 1) + l) * (self.r + 2) + m
    }

    /// Inverse of [`TotalSpace::index`].
    pub fn triple(&self, e: usize) -> (usize, usize, usize) {
        let m = e % (self.r + 2);
        let rest = e / (self.r + 2);
        (rest / (self.r + 1), rest % (self.r + 1), m)
    }

    /// Pull back a class from `S`.
    pub fn from_base(&self, c: &Class) -> Class {
        self.hx.lift(&self.hz.lift(c))
    }

    pub fn base_divisor(&self, deg: &[i64]) -> Class {
        self.from_base(&self.base.divisor_class(deg))
    }

    /// `a_i = h + L_i`.
    pub fn root_a(&self, i: usize) -> Class {
        &self.h + &self.base_divisor(&self.l[i])
    }

    /// `b_i = ξ - h + L'_i`.
    pub fn root_b(&self, i: usize) -> Class {
        &(&self.xi - &self.h) + &self.base_divisor(&self.lp[i])
    }

    /// All roots `a_0..a_r, b_0..b_r, ξ` paired with their intersection numbers.
    pub fn roots_with_pairings(&self, beta: &CurveClass) -> Vec<(Class, i64)> {
        let mut out = Vec::with_capacity(2 * self.r + 3);
        for i in 0..=self.r {
            out.push((self.root_a(i), self.pair_a(beta, i)));
        }
        for i in 0..=self.r {
            out.push((self.root_b(i), self.pair_b(beta, i)));
        }
        out.push((self.xi.clone(), beta.d2));
        out
    }

    pub fn pair_a(&self, beta: &CurveClass, i: usize) -> i64 {
        beta.d + dot(&beta.bs, &self.l[i])
    }

    pub fn pair_b(&self, beta: &CurveClass, i: usize) -> i64 {
        beta.d2 - beta.d + dot(&beta.bs, &self.lp[i])
    }

    pub fn mu_i(&self, bs: &[i64]) -> Vec<i64> {
        self.l.iter().map(|v| dot(bs, v)).collect()
    }

    pub fn mup_i(&self, bs: &[i64]) -> Vec<i64> {
        self.lp.iter().map(|v| dot(bs, v)).collect()
    }

    pub fn mu_i_max(&self, bs: &[i64]) -> i64 {
        self.mu_i(bs).into_iter().max().unwrap()
    }

    pub fn mup_i_max(&self, bs: &[i64]) -> i64 {
        self.mup_i(bs).into_iter().max().unwrap()
    }

    pub fn nu_i(&self, bs: &[i64]) -> i64 {
        (self.mu_i_max(bs) + self.mup_i_max(bs)).max(0)
    }

    /// `λ_β = (c_1(F) + c_1(F'))·β_S + (r+2) d₂`.
    pub fn lambda(&self, beta: &CurveClass) -> i64 {
        let c1: i64 = self.mu_i(&beta.bs).iter().sum::<i64>() + self.mup_i(&beta.bs).iter().sum::<i64>();
        c1 + (self.r as i64 + 2) * beta.d2
    }

    /// `β_S - μ^I ℓ - ν^I γ`.
    pub fn i_minimal_lift(&self, bs: &[i64]) -> Result<CurveClass, ModelError> {
        if bs.len() != self.num_factors() {
            return Err(ModelError::WrongDegreeLength { want: self.num_factors(), got: bs.len() });
        }
        if !self.base.is_effective(bs) {
            return Err(ModelError::NotEffective(bs.to_vec()));
        }
        Ok(CurveClass { bs: bs.to_vec(), d: -self.mu_i_max(bs), d2: -self.nu_i(bs) })
    }

    /// Geometric minimal lift with respect to a decomposition
    /// `β_S = Σ m_j C_j` into primitive classes.
    pub fn geometric_lift(&self, decomposition: &[(i64, Vec<i64>)]) -> Result<CurveClass, ModelError> {
        let ng = self.num_factors();
        let mut bs = vec![0; ng];
        let (mut mu, mut nu) = (0, 0);
        for (m, c) in decomposition {
            if *m < 0 || !self.base.is_effective(c) {
                return Err(ModelError::NotEffective(c.clone()));
            }
            for g in 0..ng {
                bs[g] += m * c[g];
            }
            mu += m * self.mu_i_max(c);
            nu += m * (self.mu_i_max(c) + self.mup_i_max(c)).max(0);
        }
        Ok(CurveClass { bs, d: -mu, d2: -nu })
    }

    /// Default decomposition: expansion along the Mori generators.
    pub fn mori_decomposition(&self, bs: &[i64]) -> Vec<(i64, Vec<i64>)> {
        self.base
            .mori_generators
            .iter()
            .zip(bs)
            .filter(|(_, m)| **m != 0)
            .map(|(g, m)| (*m, g.clone()))
            .collect()
    }

    pub fn is_i_effective(&self, beta: &CurveClass) -> bool {
        self.base.is_effective(&beta.bs)
            && beta.d >= -self.mu_i_max(&beta.bs)
            && beta.d2 >= -self.nu_i(&beta.bs)
    }

    pub fn effectivity(&self, beta: &CurveClass) -> Effectivity {
        let eff_s = self.base.is_effective(&beta.bs);
        let mu = self.mu_i_max(&beta.bs);
        let mup = self.mup_i_max(&beta.bs);
        let n: Vec<i64> = (0..=self.r).map(|i| -self.pair_a(beta, i)).collect();
        let np: Vec<i64> = (0..=self.r).map(|i| -self.pair_b(beta, i)).collect();
        let np_last = -beta.d2;
        Effectivity {
            i_effective: self.is_i_effective(beta),
            fi_effective: eff_s && beta.d + mu >= 0 && beta.d2 - beta.d + mup >= 0,
            admissible: n.iter().all(|x| *x >= 0) && np.iter().all(|x| *x >= 0) && np_last >= 0,
            n,
            np,
            np_last,
        }
    }

    /// Per-generator shifts `(c_g, ν_g)` making every `I`-effective class and
    /// every admissible lift used by the reduction nonnegative in the
    /// coordinates `d + Σ β_g c_g`, `d₂ + Σ β_g ν_g`.
    pub fn window_shifts(&self) -> (Vec<i64>, Vec<i64>) {
        let mut c = Vec::new();
        let mut n = Vec::new();
        for g in &self.base.mori_generators {
            let mu = self.mu_i_max(g);
            let mup = self.mup_i_max(g);
            c.push(mu.max(-mup).max(0));
            n.push(self.nu_i(g));
        }
        (c, n)
    }

    pub fn chern_f(&self) -> Vec<Class> {
        let roots: Vec<Class> = self.l.iter().map(|v| self.base.divisor_class(v)).collect();
        chern_of_roots(&self.base.ring, &roots)
    }

    pub fn chern_fp(&self) -> Vec<Class> {
        let roots: Vec<Class> = self.lp.iter().map(|v| self.base.divisor_class(v)).collect();
        chern_of_roots(&self.base.ring, &roots)
    }

    /// `c(N)` as classes on `X`.
    pub fn chern_n(&self) -> Vec<Class> {
        let roots: Vec<Class> = (0..=self.r).map(|i| &self.root_b(i) - &self.xi).collect();
        chern_of_roots(&self.hx, &roots)
    }

    /// `H_k = c_k(Q_F) = Σ_i c_i(F) h^{k-i}`.
    pub fn h_class(&self, k: usize) -> Class {
        let cf = self.chern_f();
        let mut out = self.hx.zero();
        for i in 0..=k.min(self.r + 1) {
            out = &out + &(&self.from_base(&cf[i]) * &self.h.pow(k - i));
        }
        out
    }

    /// `Θ_j = c_j(Q_N) = Σ_i c_i(N) ξ^{j-i}`; `Θ_{r+1}` is the class of `Z`.
    pub fn theta(&self, j: usize) -> Class {
        let cn = self.chern_n();
        let mut out = self.hx.zero();
        for i in 0..=j.min(self.r + 1) {
            out = &out + &(&cn[i] * &self.xi.pow(j - i));
        }
        out
    }

    pub fn class_of_z(&self) -> Class {
        self.theta(self.r + 1)
    }

    pub fn basis_class(&self, e: usize) -> Class {
        self.hx.basis(e)
    }

    /// Poincaré dual of the basis element `T̄_i h^l ξ^m`: `Ť_i H_{r-l} Θ_{r+1-m}`.
    pub fn dual_class(&self, t: &Class) -> Result<Class, ModelError> {
        if !t.same_ring(&self.basis_class(0)) {
            return Err(ModelError::NonBasis);
        }
        let nz: Vec<usize> = (0..self.rank()).filter(|&i| !t.coeff(i).is_zero()).collect();
        if nz.len() != 1 || *t.coeff(nz[0]) != q(1) {
            return Err(ModelError::NonBasis);
        }
        Ok(self.dual_of_index(nz[0]))
    }

    pub fn dual_of_index(&self, e: usize) -> Class {
        let (i, l, m) = self.triple(e);
        let tcheck = &self.base.dual_basis()[i];
        &(&self.from_base(tcheck) * &self.h_class(self.r - l)) * &self.theta(self.r + 1 - m)
    }

    /// `∫_X T̄_i h^l ξ^m` for arbitrary exponents, by pushing forward along
    /// the two projective bundles with Segre classes; no ring reduction used.
    pub fn integrate_monomial(&self, i: usize, l: usize, m: usize) -> Q {
        let r = self.r;
        let s = &self.base.ring;
        // c(N ⊕ O) = ∏ (1 + L'_j - h) as a graded series of polynomials in h.
        type HPoly = BTreeMap<usize, Class>;
        let hp_add = |a: &HPoly, b: &HPoly| -> HPoly {
            let mut out = a.clone();
            for (k, c) in b {
                let e = out.entry(*k).or_insert_with(|| s.zero());
                *e = &*e + c;
            }
            out
        };
        let hp_mul = |a: &HPoly, b: &HPoly| -> HPoly {
            let mut out: HPoly = BTreeMap::new();
            for (k1, c1) in a {
                for (k2, c2) in b {
                    let e = out.entry(k1 + k2).or_insert_with(|| s.zero());
                    *e = &*e + &(c1 * c2);
                }
            }
            out
        };
        let hp_neg = |a: &HPoly| -> HPoly { a.iter().map(|(k, c)| (*k, -c)).collect() };
        let one: HPoly = [(0usize, s.unit())].into_iter().collect();
        let zero: HPoly = BTreeMap::new();
        // graded pieces: c[n] is the degree-n part
        let mut c: Vec<HPoly> = vec![one.clone()];
        for v in &self.lp {
            let mut root: HPoly = BTreeMap::new();
            root.insert(0, s.zero());
            let lc = self.base.divisor_class(v);
            root.insert(0, lc);
            root.insert(1, -&s.unit());
            let mut next = c.clone();
            next.push(zero.clone());
            for n in 0..c.len() {
                next[n + 1] = hp_add(&next[n + 1], &hp_mul(&c[n], &root));
            }
            c = next;
        }
        let need = m.saturating_sub(r + 1);
        let mut segre: Vec<HPoly> = vec![one];
        for n in 1..=need {
            let mut acc = zero.clone();
            for k in 1..=n.min(c.len() - 1) {
                acc = hp_add(&acc, &hp_neg(&hp_mul(&c[k], &segre[n - k])));
            }
            segre.push(acc);
        }
        if m < r + 1 {
            return q(0);
        }
        let pushed = &segre[need];
        let sf = invert_series(s, &self.chern_f(), l + pushed.keys().max().copied().unwrap_or(0) + 1);
        let tbar = s.basis(i);
        let mut total = q(0);
        for (k, coeff) in pushed {
            let n = l + k;
            if n < r {
                continue;
            }
            let cls = &(&tbar * coeff) * &sf[n - r];
            total += cls.integrate();
        }
        total
    }
}

/// Both sides of the flop and the correspondence between them.
#[derive(Debug)]
pub struct FlopModel {
    pub r: usize,
    pub base: Arc<BaseRing>,
    pub x: TotalSpace,
    pub xp: TotalSpace,
    /// Column `e` holds `𝓕 T_e` in the canonical basis of `X'`.
    pub fmat: Matrix,
    /// Column `e` holds `𝓕^{-1} T'_e` in the canonical basis of `X`.
    pub finv: Matrix,
}

impl FlopModel {
    pub fn new(base: &Arc<BaseRing>, r: usize, l: Vec<Vec<i64>>, lp: Vec<Vec<i64>>) -> Result<FlopModel, ModelError> {
        let x = TotalSpace::new(base, r, l.clone(), lp.clone(), false)?;
        let xp = TotalSpace::new(base, r, lp, l, true)?;
        let fmat = correspondence_matrix(&x, &xp);
        let finv = correspondence_matrix(&xp, &x);
        Ok(FlopModel { r, base: base.clone(), x, xp, fmat, finv })
    }

    pub fn from_kind(kind: &BaseKind, r: usize, l: Vec<Vec<i64>>, lp: Vec<Vec<i64>>) -> Result<FlopModel, ModelError> {
        let base = build_base(kind)?;
        FlopModel::new(&base, r, l, lp)
    }

    /// Variant taking divisor classes on `S` instead of degree vectors.
    pub fn from_classes(base: &Arc<BaseRing>, r: usize, l: &[Class], lp: &[Class]) -> Result<FlopModel, ModelError> {
        let to_deg = |c: &Class| -> Result<Vec<i64>, ModelError> {
            match c.homogeneous_degree() {
                Some(1) | None => {}
                _ => return Err(ModelError::NotDivisor),
            }
            if c.homogeneous_degree().is_none() && !c.is_zero() {
                return Err(ModelError::NotDivisor);
            }
            base.divisor_basis
                .iter()
                .map(|&i| {
                    let v = c.coeff(i);
                    if v.is_integer() {
                        Ok(num::ToPrimitive::to_i64(&v.to_integer()).unwrap())
                    } else {
                        Err(ModelError::NotDivisor)
                    }
                })
                .collect()
        };
        if l.len() != r + 1 {
            return Err(ModelError::WrongLength { want: r + 1, got: l.len() });
        }
        if lp.len() != r + 1 {
            return Err(ModelError::WrongLength { want: r + 1, got: lp.len() });
        }
        let l = l.iter().map(to_deg).collect::<Result<Vec<_>, _>>()?;
        let lp = lp.iter().map(to_deg).collect::<Result<Vec<_>, _>>()?;
        FlopModel::new(base, r, l, lp)
    }

    pub fn transform_class(&self, a: &Class) -> Class {
        assert!(a.same_ring(&self.x.basis_class(0)), "class is not on X");
        self.xp.hx.from_coeffs(linalg::matvec(&self.fmat, a.coeffs()))
    }

    pub fn inverse_transform(&self, a: &Class) -> Class {
        assert!(a.same_ring(&self.xp.basis_class(0)), "class is not on X'");
        self.x.hx.from_coeffs(linalg::matvec(&self.finv, a.coeffs()))
    }

    /// `(β_S, d, d₂) ↦ (β_S, d₂ - d, d₂)`.
    pub fn transform_curve(beta: &CurveClass) -> CurveClass {
        CurveClass { bs: beta.bs.clone(), d: beta.d2 - beta.d, d2: beta.d2 }
    }
}

/// `T̄_i h^l ξ^m ↦ T̄_i (ξ' - h')^l ξ'^m`.
fn correspondence_matrix(from: &TotalSpace, to: &TotalSpace) -> Matrix {
    let n = from.rank();
    let mut m = linalg::zeros(n, n);
    let diff = &to.xi - &to.h;
    for e in 0..n {
        let (i, l, k) = from.triple(e);
        let img = &(&to.from_base(&to.base.ring.basis(i)) * &diff.pow(l)) * &to.xi.pow(k);
        for (row, c) in img.coeffs().iter().enumerate() {
            m[row][e] = c.clone();
        }
    }
    m
}
