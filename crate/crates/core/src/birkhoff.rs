//! Birkhoff factorization of the `I`-function: removal of nonnegative
//! `z`-powers by naively quantized operators, the mirror map `τ`, and
//! quantum products read off the reduced structure constants.

use crate::cohring::{q, Class, ZClass, Q};
use crate::flopmodel::{CurveClass, TotalSpace};
use crate::ifunc::{lex_key, IVector, TruncationWindow};
use crate::linalg;
use crate::pfops::{gen_class, gen_pairing, DiffOp};
use crate::qlh::ConnectionMatrix;
use num::{One, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BirkhoffError {
    #[error("class is not a canonical basis element")]
    NonCanonical,
    #[error("removal did not stop within {0} steps at {1}")]
    Runaway(usize, CurveClass),
    #[error("window too small to invert the quantum monomial frame")]
    Frame,
    #[error("order does not list every window class exactly once")]
    BadOrder,
}

/// Exponents `[0, l, m, exps(T̄_i)]` of `∂^{z e}` for `T_e = T̄_i h^l ξ^m`;
/// base classes are quantized as products of hyperplane derivatives.
pub fn quantize_exps(x: &TotalSpace, e: usize) -> Vec<u32> {
    let (i, l, m) = x.triple(e);
    let mut exps = vec![0, l as u32, m as u32];
    exps.extend(x.base.exps[i].iter().map(|v| *v as u32));
    exps
}

/// `∂^{z e}` for the canonical basis element with index `e`.
pub fn quantize_index(x: &TotalSpace, e: usize) -> DiffOp {
    let ng = x.num_factors();
    DiffOp::monomial(ng, CurveClass::zero(ng), 0, quantize_exps(x, e), Q::one())
}

/// Naive quantization of a class that is a canonical basis element.
pub fn naive_quantize(x: &TotalSpace, t: &Class) -> Result<DiffOp, BirkhoffError> {
    let nz: Vec<(usize, &Q)> = t.coeffs().iter().enumerate().filter(|(_, c)| !c.is_zero()).collect();
    match nz.as_slice() {
        [(e, c)] if c.is_one() && t.same_ring(&x.hx.unit()) => Ok(quantize_index(x, *e)),
        _ => Err(BirkhoffError::NonCanonical),
    }
}

#[derive(Clone, Debug)]
pub struct GMTResult {
    pub window: TruncationWindow,
    /// `P = 1 + Σ_{β≠0} Q^β P_β`.
    pub p: DiffOp,
    /// `(P·I)_β` on the window.
    pub jtrunc: BTreeMap<CurveClass, ZClass>,
    /// Nonzero `τ_β`, so that `τ = t̂ + Σ Q^β τ_β`.
    pub tau: BTreeMap<CurveClass, Class>,
}

/// `(op·terms)_β`.
pub fn apply_at(op: &DiffOp, x: &TotalSpace, terms: &BTreeMap<CurveClass, ZClass>, beta: &CurveClass) -> ZClass {
    let ngen = 3 + x.num_factors();
    let gens: Vec<Class> = (0..ngen).map(|i| gen_class(x, i)).collect();
    let mut out = ZClass::zero(&x.hx);
    for ((alpha, k, e), c) in op.terms() {
        let src = beta - alpha;
        let Some(t) = terms.get(&src) else { continue };
        let mut v = t.clone();
        for (i, p) in e.iter().enumerate() {
            if *p == 0 {
                continue;
            }
            let mut f = ZClass::constant(gens[i].clone());
            f.add_term(1, &x.hx.scalar(q(gen_pairing(i, &src))));
            for _ in 0..*p {
                v = v.mul(&f);
            }
        }
        out = out.add(&v.shift(*k).scale(c));
    }
    out
}

/// The window classes with `β_S` reversed at equal `(|β_S|, d₂, d)`; another
/// linear extension of the cone order.
pub fn alternative_order(x: &TotalSpace, window: &TruncationWindow) -> Vec<CurveClass> {
    let mut cl = window.classes(x);
    cl.sort_by_key(|b| {
        let (a, d2, d, bs) = lex_key(b);
        (a, d2, d, bs.into_iter().map(|v| -v).collect::<Vec<_>>())
    });
    cl
}

pub fn birkhoff_factorize(x: &TotalSpace, i: &IVector) -> Result<GMTResult, BirkhoffError> {
    birkhoff_factorize_ordered(x, i, &i.window.classes(x))
}

/// Remove the nonnegative `z`-part of `(P·I)_β` class by class along `order`.
pub fn birkhoff_factorize_ordered(x: &TotalSpace, i: &IVector, order: &[CurveClass]) -> Result<GMTResult, BirkhoffError> {
    let ng = x.num_factors();
    let mut seen: Vec<CurveClass> = order.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != order.len() || seen.len() != i.window.classes(x).len() {
        return Err(BirkhoffError::BadOrder);
    }
    let mut p = DiffOp::one(ng);
    let mut jtrunc = BTreeMap::new();
    let mut tau = BTreeMap::new();
    for beta in order {
        let mut val = apply_at(&p, x, &i.terms, beta);
        if !beta.is_zero() {
            let top = val.max_z().unwrap_or(-1);
            let mut steps = 0;
            while let Some(k) = val.max_z().filter(|k| *k >= 0) {
                steps += 1;
                if steps > (top + 1) as usize {
                    return Err(BirkhoffError::Runaway(steps, beta.clone()));
                }
                let a = val.coeff(k);
                for (e, f) in a.coeffs().iter().enumerate() {
                    if !f.is_zero() {
                        p.add_term((beta.clone(), k, quantize_exps(x, e)), -f.clone());
                    }
                }
                val = apply_at(&p, x, &i.terms, beta);
            }
            let t = val.coeff(-1);
            if !t.is_zero() {
                tau.insert(beta.clone(), t);
            }
        }
        if !val.is_zero() {
            jtrunc.insert(beta.clone(), val);
        }
    }
    Ok(GMTResult { window: i.window, p, jtrunc, tau })
}

#[derive(Clone, Debug, Serialize)]
pub struct GmtReport {
    pub p_is_one: bool,
    pub p_terms: usize,
    /// `P·I = 1 + O(1/z)` recomputed from scratch on the window.
    pub normalized: bool,
    /// `P ≡ 1` and `τ ≡ t̂` on the pure fiber weight `β_S = 0`, `d₂ = 0`.
    pub trivial_on_fiber: bool,
    pub tau_trivial: bool,
    pub jtrunc_equals_i: bool,
    pub deterministic: bool,
    /// Largest `z`-power of `(P·I)_β` per class, listed where nonzero.
    pub residual_profile: Vec<(CurveClass, i32)>,
}

pub fn gmt_report(x: &TotalSpace, i: &IVector, res: &GMTResult) -> Result<GmtReport, BirkhoffError> {
    let ng = x.num_factors();
    let mut normalized = true;
    let mut profile = Vec::new();
    for beta in i.window.classes(x) {
        let mut v = apply_at(&res.p, x, &i.terms, &beta);
        if beta.is_zero() {
            v = v.add(&ZClass::constant(x.hx.unit()).scale(&q(-1)));
        }
        if let Some(k) = v.max_z() {
            profile.push((beta.clone(), k));
            normalized &= k < 0;
        }
    }
    let fiber = |b: &CurveClass| b.d2 == 0 && b.bs.iter().all(|v| *v == 0);
    let trivial_on_fiber = res.p.terms().keys().all(|(b, _, _)| b.is_zero() || !fiber(b))
        && res.tau.keys().all(|b| !fiber(b));
    let alt = birkhoff_factorize_ordered(x, i, &alternative_order(x, &i.window))?;
    Ok(GmtReport {
        p_is_one: res.p == DiffOp::one(ng),
        p_terms: res.p.terms().len(),
        normalized,
        trivial_on_fiber,
        tau_trivial: res.tau.is_empty(),
        jtrunc_equals_i: res.jtrunc == i.terms,
        deterministic: alt.p == res.p && alt.tau == res.tau,
        residual_profile: profile,
    })
}

type VecSeries = BTreeMap<CurveClass, Vec<Q>>;

fn mat_vec_series(m: &ConnectionMatrix, v: &VecSeries, keep: &dyn Fn(&CurveClass) -> bool) -> VecSeries {
    let mut out: VecSeries = BTreeMap::new();
    for ((b1, _), mm) in &m.terms {
        for (b2, vv) in v {
            let b = b1 + b2;
            if !keep(&b) {
                continue;
            }
            let w = linalg::matvec(mm, vv);
            let slot = out.entry(b).or_insert_with(|| vec![Q::zero(); vv.len()]);
            for (s, x) in slot.iter_mut().zip(w) {
                *s += x;
            }
        }
    }
    out.retain(|_, v| v.iter().any(|c| !c.is_zero()));
    out
}

/// Matrix of quantum multiplication by `alpha`, from the `z`-free matrices of
/// the divisor directions (`ctilde[i]` along generator `i`).
pub fn quantum_mult_matrix(
    x: &TotalSpace,
    alpha: &Class,
    ctilde: &[ConnectionMatrix],
    window: &TruncationWindow,
) -> Result<ConnectionMatrix, BirkhoffError> {
    let ng = x.num_factors();
    let n = x.rank();
    let keep = |b: &CurveClass| window.contains(x, b);
    let mut powers: BTreeMap<Vec<u32>, ConnectionMatrix> = BTreeMap::new();
    let mut frame = ConnectionMatrix::zero(n);
    for e in 0..n {
        let exps = quantize_exps(x, e);
        let mut m = ConnectionMatrix::identity(n, ng);
        for (g, p) in exps.iter().enumerate() {
            for _ in 0..*p {
                m = ctilde[g].mul(&m, &keep);
            }
        }
        for ((b, k), mm) in &m.terms {
            for row in 0..n {
                frame.add_entry(b, *k, row, e, &mm[row][0]);
            }
        }
        powers.insert(exps, m);
    }
    let finv = frame.inverse_unipotent(ng, &keep).map_err(|_| BirkhoffError::Frame)?;
    let a: VecSeries = BTreeMap::from([(CurveClass::zero(ng), alpha.coeffs().to_vec())]);
    let s = mat_vec_series(&finv, &a, &keep);
    let mut out = ConnectionMatrix::zero(n);
    for (b, coeffs) in &s {
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for ((b2, k), mm) in &powers[&quantize_exps(x, e)].terms {
                let t = b + b2;
                if keep(&t) {
                    out.add_at(&t, *k, &linalg::scale(mm, c));
                }
            }
        }
    }
    Ok(out)
}

/// `⟨a, b, c⟩` per curve class as `∫ (a ∘ b)_β · c`, optionally restricted to
/// one weight `(β_S, d₂)`.
pub fn three_point_extract(
    x: &TotalSpace,
    a: &Class,
    b: &Class,
    c: &Class,
    ctilde: &[ConnectionMatrix],
    window: &TruncationWindow,
    weight: Option<(&[i64], i64)>,
) -> Result<BTreeMap<CurveClass, Q>, BirkhoffError> {
    let m = quantum_mult_matrix(x, a, ctilde, window)?;
    let mut out = BTreeMap::new();
    for ((beta, _), mm) in &m.terms {
        if let Some((bs, d2)) = weight {
            if beta.bs != bs || beta.d2 != d2 {
                continue;
            }
        }
        let prod = x.hx.from_coeffs(linalg::matvec(mm, b.coeffs()));
        let v = (&prod * c).integrate();
        if !v.is_zero() {
            out.insert(beta.clone(), v);
        }
    }
    Ok(out)
}
