//! Extremal-ray generating series as polynomials in `f(q) = q/(1 - σq)`,
//! `σ = (-1)^{r+1}`.

use crate::cohring::{q, segre_of_virtual, sign, Class, Ring, Q};
use crate::flopmodel::{FlopModel, TotalSpace};
use num::Zero;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtremalError {
    #[error("ν = {nu} outside 0..={max}")]
    NuOutOfRange { nu: usize, max: i64 },
    #[error("need at least {need} coefficients, got {got}")]
    ShortSeries { need: usize, got: usize },
    #[error("series is not an f-polynomial of degree ≤ {deg}: mismatch at q^{index}")]
    NoFit { deg: usize, index: usize },
}

/// Polynomial in `f` with coefficients in a cohomology ring.
#[derive(Clone)]
pub struct FPoly {
    r: usize,
    ring: Arc<Ring>,
    coeffs: BTreeMap<usize, Class>,
}

impl PartialEq for FPoly {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r && Arc::ptr_eq(&self.ring, &other.ring) && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for FPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})f"),
                _ => format!("({c})f^{k}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl FPoly {
    pub fn zero(ring: &Arc<Ring>, r: usize) -> FPoly {
        FPoly { r, ring: ring.clone(), coeffs: BTreeMap::new() }
    }

    pub fn constant(c: Class, r: usize) -> FPoly {
        FPoly::monomial(0, c, r)
    }

    /// `c · f^k`.
    pub fn monomial(k: usize, c: Class, r: usize) -> FPoly {
        let mut p = FPoly::zero(c.ring(), r);
        p.add_term(k, &c);
        p
    }

    /// The series `f` itself with unit coefficient.
    pub fn f(ring: &Arc<Ring>, r: usize) -> FPoly {
        FPoly::monomial(1, ring.unit(), r)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, Class> {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Class {
        self.coeffs.get(&k).cloned().unwrap_or_else(|| self.ring.zero())
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn sigma(&self) -> Q {
        sign(self.r as i64 + 1)
    }

    pub fn add_term(&mut self, k: usize, c: &Class) {
        if c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(k).or_insert_with(|| self.ring.zero());
        *e = &*e + c;
        if e.is_zero() {
            self.coeffs.remove(&k);
        }
    }

    pub fn add(&self, o: &FPoly) -> FPoly {
        let mut out = self.clone();
        for (k, c) in &o.coeffs {
            out.add_term(*k, c);
        }
        out
    }

    pub fn sub(&self, o: &FPoly) -> FPoly {
        self.add(&o.scale(&q(-1)))
    }

    pub fn scale(&self, s: &Q) -> FPoly {
        let mut out = FPoly::zero(&self.ring, self.r);
        for (k, c) in &self.coeffs {
            out.add_term(*k, &c.scale(s));
        }
        out
    }

    pub fn mul_class(&self, c: &Class) -> FPoly {
        let mut out = FPoly::zero(&self.ring, self.r);
        for (k, a) in &self.coeffs {
            out.add_term(*k, &(a * c));
        }
        out
    }

    pub fn mul(&self, o: &FPoly) -> FPoly {
        let mut out = FPoly::zero(&self.ring, self.r);
        for (k1, a) in &self.coeffs {
            for (k2, b) in &o.coeffs {
                out.add_term(k1 + k2, &(a * b));
            }
        }
        out
    }

    /// `δ = q d/dq` through `δf = f + σf²` and Leibniz.
    pub fn delta(&self) -> FPoly {
        let sigma = self.sigma();
        let mut out = FPoly::zero(&self.ring, self.r);
        for (k, c) in &self.coeffs {
            if *k == 0 {
                continue;
            }
            let kq = q(*k as i64);
            out.add_term(*k, &c.scale(&kq));
            out.add_term(k + 1, &c.scale(&(&kq * &sigma)));
        }
        out
    }

    /// `f ↦ (-1)^r - f`, the continuation `q ↦ q^{-1}`.
    pub fn continue_f(&self) -> FPoly {
        let sub = FPoly::constant(self.ring.scalar(sign(self.r as i64)), self.r).sub(&FPoly::f(&self.ring, self.r));
        let mut out = FPoly::zero(&self.ring, self.r);
        let mut power = FPoly::constant(self.ring.unit(), self.r);
        let top = self.degree().unwrap_or(0);
        for k in 0..=top {
            if let Some(c) = self.coeffs.get(&k) {
                out = out.add(&power.mul_class(c));
            }
            power = power.mul(&sub);
        }
        out
    }

    /// Coefficients of `q^1..=q^{d_max}`; a constant term does not appear.
    pub fn expand_f_series(&self, d_max: usize) -> Vec<Class> {
        let table = f_power_table(self.r, self.degree().unwrap_or(0), d_max);
        (1..=d_max)
            .map(|d| {
                let mut acc = self.ring.zero();
                for (k, c) in &self.coeffs {
                    if *k >= 1 && !table[*k][d].is_zero() {
                        acc = &acc + &c.scale(&table[*k][d]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Coefficients `w_i` with `p - p(0) = Σ_{i≥0} w_i δ^i f`.
    pub fn to_delta_form(&self) -> Vec<Class> {
        let top = match self.degree() {
            Some(0) | None => return vec![],
            Some(d) => d,
        };
        let mut rest = self.clone();
        rest.coeffs.remove(&0);
        let mut w = vec![self.ring.zero(); top];
        let dpows = delta_powers(&self.ring, self.r, top - 1);
        for i in (0..top).rev() {
            let c = rest.coeff(i + 1);
            let lead = dpows[i].coeff(i + 1).coeff(0).clone();
            let wi = c.scale(&(q(1) / lead));
            rest = rest.sub(&dpows[i].mul_class(&wi));
            w[i] = wi;
        }
        debug_assert!(rest.is_zero());
        w
    }

    /// Inverse of [`FPoly::to_delta_form`] (without constant term).
    pub fn from_delta_form(ring: &Arc<Ring>, r: usize, w: &[Class]) -> FPoly {
        let dpows = delta_powers(ring, r, w.len().saturating_sub(1));
        let mut out = FPoly::zero(ring, r);
        for (i, c) in w.iter().enumerate() {
            out = out.add(&dpows[i].mul_class(c));
        }
        out
    }
}

/// `[δ^0 f, δ^1 f, …, δ^m f]` with unit coefficients.
fn delta_powers(ring: &Arc<Ring>, r: usize, m: usize) -> Vec<FPoly> {
    let mut out = vec![FPoly::f(ring, r)];
    for i in 0..m {
        let next = out[i].delta();
        out.push(next);
    }
    out
}

/// `table[k][d]` = coefficient of `q^d` in `f^k`, for `k ≤ kmax`, `d ≤ dmax`.
fn f_power_table(r: usize, kmax: usize, dmax: usize) -> Vec<Vec<Q>> {
    let sigma = sign(r as i64 + 1);
    let mut f = vec![Q::zero(); dmax + 1];
    let mut s = q(1);
    for d in 1..=dmax {
        f[d] = s.clone();
        s = &s * &sigma;
    }
    let mut table = vec![vec![Q::zero(); dmax + 1]];
    table[0][0] = q(1);
    for k in 1..=kmax.max(1) {
        let prev = &table[k - 1];
        let mut next = vec![Q::zero(); dmax + 1];
        for (a, pa) in prev.iter().enumerate() {
            if pa.is_zero() {
                continue;
            }
            for b in 1..=dmax - a.min(dmax) {
                if a + b > dmax {
                    break;
                }
                next[a + b] += pa * &f[b];
            }
        }
        table.push(next);
    }
    table
}

/// Scalar coefficients of `q^1..=q^{d_max}` of `f`.
pub fn f_series(r: usize, d_max: usize) -> Vec<Q> {
    f_power_table(r, 1, d_max)[1][1..].to_vec()
}

/// Fit a scalar series `[c_1, c_2, …]` (coefficient of `q^d` at index `d-1`,
/// no constant term) by `Σ_{k=1}^{deg} a_k f^k`. At least two trailing
/// coefficients must be matched as a guard. Returns `[a_1..a_deg]`.
pub fn fit_f_scalars(series: &[Q], deg_bound: usize, r: usize) -> Result<Vec<Q>, ExtremalError> {
    let need = deg_bound + 2;
    if series.len() < need {
        return Err(ExtremalError::ShortSeries { need, got: series.len() });
    }
    let dmax = series.len();
    let table = f_power_table(r, deg_bound, dmax);
    let mut a = vec![Q::zero(); deg_bound + 1];
    for k in 1..=deg_bound {
        let mut c = series[k - 1].clone();
        for j in 1..k {
            c -= &a[j] * &table[j][k];
        }
        a[k] = c;
    }
    for d in deg_bound + 1..=dmax {
        let mut v = Q::zero();
        for k in 1..=deg_bound {
            v += &a[k] * &table[k][d];
        }
        if v != series[d - 1] {
            return Err(ExtremalError::NoFit { deg: deg_bound, index: d });
        }
    }
    Ok(a[1..].to_vec())
}

/// Class-valued version of [`fit_f_scalars`], fitted coordinatewise.
pub fn fit_f_polynomial(series: &[Class], deg_bound: usize, r: usize, ring: &Arc<Ring>) -> Result<FPoly, ExtremalError> {
    let mut out = FPoly::zero(ring, r);
    for i in 0..ring.rank() {
        let scal: Vec<Q> = series.iter().map(|c| c.coeff(i).clone()).collect();
        let a = fit_f_scalars(&scal, deg_bound, r)?;
        for (k, v) in a.iter().enumerate() {
            if !v.is_zero() {
                out.add_term(k + 1, &ring.basis(i).scale(v));
            }
        }
    }
    Ok(out)
}

/// Chern and Segre data of one side entering the recursion.
pub struct ExtremalData {
    pub r: usize,
    pub ring: Arc<Ring>,
    pub c: Vec<Class>,
    pub cp: Vec<Class>,
    pub s: Vec<Class>,
    pub stilde: Vec<Class>,
}

impl ExtremalData {
    pub fn new(x: &TotalSpace) -> ExtremalData {
        let ring = x.base.ring.clone();
        let top = ring.top_degree().max(x.r);
        let pad = |mut v: Vec<Class>| {
            while v.len() <= top {
                v.push(ring.zero());
            }
            v
        };
        let c = pad(x.chern_f());
        let cp = pad(x.chern_fp());
        let s = crate::cohring::invert_series(&ring, &c, top);
        let lc: Vec<Class> = x.l.iter().map(|v| x.base.divisor_class(v)).collect();
        let lpc: Vec<Class> = x.lp.iter().map(|v| x.base.divisor_class(v)).collect();
        let stilde = segre_of_virtual(&ring, &lc, &lpc, top);
        ExtremalData { r: x.r, ring, c, cp, s, stilde }
    }

    /// `W_ν = s_ν f + Σ_{j=1}^{ν} W_{ν-j}((-1)^r c_j f - (-1)^{r+j} c'_j f - c_j)`.
    pub fn w_recursive(&self, nu: usize) -> Result<FPoly, ExtremalError> {
        if nu + 1 > self.r {
            return Err(ExtremalError::NuOutOfRange { nu, max: self.r as i64 - 1 });
        }
        let r = self.r;
        let ring = &self.ring;
        let mut w: Vec<FPoly> = Vec::with_capacity(nu + 1);
        for n in 0..=nu {
            let mut acc = FPoly::monomial(1, self.s[n].clone(), r);
            for j in 1..=n {
                let mut factor = FPoly::zero(ring, r);
                let lin = &self.c[j].scale(&sign(r as i64)) - &self.cp[j].scale(&sign((r + j) as i64));
                factor.add_term(1, &lin);
                factor.add_term(0, &-&self.c[j]);
                acc = acc.add(&w[n - j].mul(&factor));
            }
            w.push(acc);
        }
        Ok(w.pop().unwrap())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalEquationReport {
    pub nu: usize,
    pub w: String,
    pub w_primed: String,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

/// `W_ν - (-1)^{ν+1} W'_ν` after continuation, against `(-1)^r s̃_ν`.
pub fn functional_equation_check(model: &FlopModel, nu: usize) -> Result<FunctionalEquationReport, ExtremalError> {
    let data = ExtremalData::new(&model.x);
    let data_p = ExtremalData::new(&model.xp);
    let w = data.w_recursive(nu)?;
    let wp = data_p.w_recursive(nu)?;
    let lhs = w.sub(&wp.continue_f().scale(&sign(nu as i64 + 1)));
    let rhs = FPoly::constant(data.stilde[nu].scale(&sign(model.r as i64)), model.r);
    Ok(FunctionalEquationReport {
        nu,
        w: w.to_string(),
        w_primed: wp.to_string(),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        pass: lhs == rhs,
    })
}

/// The two-point series `Σ_d σ^{d-1} q^d / d`, coefficients of `q^1..=q^{d_max}`.
pub fn two_point_series(r: usize, d_max: usize) -> Vec<Q> {
    f_series(r, d_max).into_iter().enumerate().map(|(i, c)| c / q(i as i64 + 1)).collect()
}

/// `δ` on a series given by its coefficients of `q^1, q^2, …`.
pub fn delta_series(series: &[Q]) -> Vec<Q> {
    series.iter().enumerate().map(|(i, c)| c * q(i as i64 + 1)).collect()
}
