//! Normal-ordered differential operators in `z∂_{t⁰}, z∂_{t¹}, z∂_{t²}, z∂_{t̄^g}`
//! with Novikov prefactors `Q^β = q^β e^{D·β}` kept on the left.
//!
//! Generator `0` is the unit direction, `1` and `2` are `h` and `ξ`, and
//! `3 + g` is the hyperplane class of the `g`-th base factor.

use crate::cohring::{q, Class, ZClass, Q};
use crate::flopmodel::{CurveClass, FlopModel, TotalSpace};
use crate::ifunc::{IVector, TruncationWindow};
use num::{One, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// `(β, z-power, exponents)` of a normal-ordered monomial.
pub type MonoKey = (CurveClass, i32, Vec<u32>);

#[derive(Clone, PartialEq, Eq)]
pub struct DiffOp {
    ng: usize,
    terms: BTreeMap<MonoKey, Q>,
}

impl fmt::Debug for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn gen_name(i: usize, ng: usize) -> String {
    match i {
        0 => "D0".into(),
        1 => "D1".into(),
        2 => "D2".into(),
        _ if ng == 1 => "Dp".into(),
        _ => format!("Dp{}", i - 2),
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for ((beta, k, e), c) in &self.terms {
            let mut s = format!("{c}");
            if !beta.is_zero() {
                s.push_str(&format!(" Q^{beta}"));
            }
            if *k != 0 {
                s.push_str(&format!(" z^{k}"));
            }
            for (i, p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => s.push_str(&format!(" {}", gen_name(i, self.ng))),
                    _ => s.push_str(&format!(" {}^{p}", gen_name(i, self.ng))),
                }
            }
            parts.push(s);
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// `v·β` for generator `i`.
pub fn gen_pairing(i: usize, beta: &CurveClass) -> i64 {
    match i {
        0 => 0,
        1 => beta.d,
        2 => beta.d2,
        g => beta.bs[g - 3],
    }
}

fn binomial(n: u32, k: u32) -> Q {
    let mut b = Q::one();
    for j in 0..k {
        b = b * q((n - j) as i64) / q((j + 1) as i64);
    }
    b
}

impl DiffOp {
    pub fn zero(ng: usize) -> DiffOp {
        DiffOp { ng, terms: BTreeMap::new() }
    }

    pub fn monomial(ng: usize, beta: CurveClass, zpow: i32, exps: Vec<u32>, c: Q) -> DiffOp {
        let mut op = DiffOp::zero(ng);
        op.add_term((beta, zpow, exps), c);
        op
    }

    pub fn one(ng: usize) -> DiffOp {
        DiffOp::monomial(ng, CurveClass::zero(ng), 0, vec![0; 3 + ng], Q::one())
    }

    pub fn scalar(ng: usize, c: Q) -> DiffOp {
        DiffOp::one(ng).scale(&c)
    }

    /// The generator `z∂` in direction `i`.
    pub fn gen(ng: usize, i: usize) -> DiffOp {
        let mut e = vec![0; 3 + ng];
        e[i] = 1;
        DiffOp::monomial(ng, CurveClass::zero(ng), 0, e, Q::one())
    }

    /// `Q^β`.
    pub fn novikov(beta: &CurveClass) -> DiffOp {
        let ng = beta.bs.len();
        DiffOp::monomial(ng, beta.clone(), 0, vec![0; 3 + ng], Q::one())
    }

    pub fn z(ng: usize) -> DiffOp {
        DiffOp::monomial(ng, CurveClass::zero(ng), 1, vec![0; 3 + ng], Q::one())
    }

    /// `Σ_i coeffs[i] · z∂_i`.
    pub fn linear(ng: usize, coeffs: &[i64]) -> DiffOp {
        let mut op = DiffOp::zero(ng);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0 {
                op = op.add(&DiffOp::gen(ng, i).scale(&q(*c)));
            }
        }
        op
    }

    pub fn num_generators(&self) -> usize {
        3 + self.ng
    }

    pub fn ng(&self) -> usize {
        self.ng
    }

    pub fn terms(&self) -> &BTreeMap<MonoKey, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: MonoKey, c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key.clone()).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, o: &DiffOp) -> DiffOp {
        let mut out = self.clone();
        for (k, c) in &o.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &DiffOp) -> DiffOp {
        self.add(&o.scale(&q(-1)))
    }

    pub fn scale(&self, s: &Q) -> DiffOp {
        let mut out = DiffOp::zero(self.ng);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    /// Composition, normal ordered by `X_v^n Q^β = Q^β (X_v + z(v·β))^n`.
    pub fn mul(&self, o: &DiffOp) -> DiffOp {
        let mut out = DiffOp::zero(self.ng);
        for ((b1, k1, e1), c1) in &self.terms {
            for ((b2, k2, e2), c2) in &o.terms {
                let beta = b1 + b2;
                // expand ∏_i (X_i + z p_i)^{e1_i}
                let mut partial: Vec<(i32, Vec<u32>, Q)> = vec![(k1 + k2, e2.clone(), c1 * c2)];
                for (i, &n) in e1.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let p = gen_pairing(i, b2);
                    let mut next = Vec::new();
                    for (zk, ex, c) in &partial {
                        if p == 0 {
                            let mut ex2 = ex.clone();
                            ex2[i] += n;
                            next.push((*zk, ex2, c.clone()));
                            continue;
                        }
                        let pq = q(p);
                        for j in 0..=n {
                            let mut ex2 = ex.clone();
                            ex2[i] += j;
                            let coef = c * binomial(n, j) * num::pow::pow(pq.clone(), (n - j) as usize);
                            next.push((zk + (n - j) as i32, ex2, coef));
                        }
                    }
                    partial = next;
                }
                for (zk, ex, c) in partial {
                    out.add_term((beta.clone(), zk, ex), c);
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> DiffOp {
        let mut out = DiffOp::one(self.ng);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Keep only monomials whose class satisfies `keep`.
    pub fn retain_classes(&self, keep: impl Fn(&CurveClass) -> bool) -> DiffOp {
        DiffOp { ng: self.ng, terms: self.terms.iter().filter(|((b, _, _), _)| keep(b)).map(|(k, c)| (k.clone(), c.clone())).collect() }
    }

    /// Distinct classes carried by the monomials.
    pub fn shifts(&self) -> BTreeSet<CurveClass> {
        self.terms.keys().map(|(b, _, _)| b.clone()).collect()
    }

    /// `𝓕`: `z∂_{t¹} ↦ z∂_{t²'} - z∂_{t¹'}`, other generators fixed,
    /// `Q^β ↦ Q'^{𝓕β}`.
    pub fn transform(&self) -> DiffOp {
        let ng = self.ng;
        let x1 = DiffOp::gen(ng, 2).sub(&DiffOp::gen(ng, 1));
        let mut out = DiffOp::zero(ng);
        for ((beta, k, e), c) in &self.terms {
            let mut rest = e.clone();
            let n1 = rest[1];
            rest[1] = 0;
            let fb = FlopModel::transform_curve(beta);
            let head = DiffOp::monomial(ng, fb, *k, vec![0; 3 + ng], c.clone());
            let tail = DiffOp::monomial(ng, CurveClass::zero(ng), 0, rest, Q::one());
            out = out.add(&head.mul(&x1.pow(n1)).mul(&tail));
        }
        out
    }
}

/// Cohomology class acted on by generator `i` of `x`.
pub fn gen_class(x: &TotalSpace, i: usize) -> Class {
    match i {
        0 => x.hx.unit(),
        1 => x.h.clone(),
        2 => x.xi.clone(),
        g => x.base_divisor(&unit_vec(x.num_factors(), g - 3)),
    }
}

fn unit_vec(n: usize, g: usize) -> Vec<i64> {
    (0..n).map(|i| i64::from(i == g)).collect()
}

/// `z∂_{a_j} = z∂_{t¹} + L_j(z∂_{t̄})`.
pub fn d_a(x: &TotalSpace, j: usize) -> DiffOp {
    let ng = x.num_factors();
    let mut c = vec![0, 1, 0];
    c.extend(&x.l[j]);
    DiffOp::linear(ng, &c)
}

/// `z∂_{b_j} = z∂_{t²} - z∂_{t¹} + L'_j(z∂_{t̄})`.
pub fn d_b(x: &TotalSpace, j: usize) -> DiffOp {
    let ng = x.num_factors();
    let mut c = vec![0, -1, 1];
    c.extend(&x.lp[j]);
    DiffOp::linear(ng, &c)
}

pub fn d_xi(x: &TotalSpace) -> DiffOp {
    DiffOp::gen(x.num_factors(), 2)
}

/// `(□_ℓ, □_γ)` of one side.
pub fn picard_fuchs_pair(x: &TotalSpace) -> (DiffOp, DiffOp) {
    let ng = x.num_factors();
    let mut pa = DiffOp::one(ng);
    let mut pb = DiffOp::one(ng);
    for j in 0..=x.r {
        pa = pa.mul(&d_a(x, j));
        pb = pb.mul(&d_b(x, j));
    }
    let box_l = pa.sub(&DiffOp::novikov(&CurveClass::ell(ng)).mul(&pb));
    let box_g = d_xi(x).mul(&pb).sub(&DiffOp::novikov(&CurveClass::gamma(ng)));
    (box_l, box_g)
}

/// `(□_ℓ, □_γ, □_{ℓ'}, □_{γ'})`.
pub fn picard_fuchs_ops(model: &FlopModel) -> (DiffOp, DiffOp, DiffOp, DiffOp) {
    let (a, b) = picard_fuchs_pair(&model.x);
    let (c, d) = picard_fuchs_pair(&model.xp);
    (a, b, c, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct IdealReport {
    pub box_l_identity: bool,
    pub box_g_identity: bool,
    pub pass: bool,
}

/// `𝓕□_ℓ = -Q'^{-ℓ'}□_{ℓ'}` and `𝓕□_γ = z∂_{ξ'}□_{ℓ'} + Q'^{ℓ'}□_{γ'}`.
pub fn pf_ideal_check(model: &FlopModel) -> IdealReport {
    let ng = model.base.num_factors();
    let (bl, bg, blp, bgp) = picard_fuchs_ops(model);
    let ell = CurveClass::ell(ng);
    let lhs1 = bl.transform();
    let rhs1 = DiffOp::novikov(&(-&ell)).mul(&blp).scale(&q(-1));
    let lhs2 = bg.transform();
    let rhs2 = d_xi(&model.xp).mul(&blp).add(&DiffOp::novikov(&ell).mul(&bgp));
    let a = lhs1 == rhs1;
    let b = lhs2 == rhs2;
    IdealReport { box_l_identity: a, box_g_identity: b, pass: a && b }
}

/// Exact action on a finite family of terms, without any truncation.
pub fn apply_raw(op: &DiffOp, x: &TotalSpace, terms: &BTreeMap<CurveClass, ZClass>) -> BTreeMap<CurveClass, ZClass> {
    let mut out: BTreeMap<CurveClass, ZClass> = BTreeMap::new();
    let gens: Vec<Class> = (0..op.num_generators()).map(|i| gen_class(x, i)).collect();
    for (alpha, ia) in terms {
        // (v_i + z(v_i·α)) for every generator
        let factors: Vec<ZClass> = (0..gens.len())
            .map(|i| {
                let mut f = ZClass::constant(gens[i].clone());
                f.add_term(1, &x.hx.scalar(q(gen_pairing(i, alpha))));
                f
            })
            .collect();
        let mut cache: BTreeMap<Vec<u32>, ZClass> = BTreeMap::new();
        for ((beta, k, e), c) in &op.terms {
            let base = cache
                .entry(e.clone())
                .or_insert_with(|| {
                    let mut v = ia.clone();
                    for (i, p) in e.iter().enumerate() {
                        for _ in 0..*p {
                            v = v.mul(&factors[i]);
                        }
                    }
                    v
                })
                .clone();
            let contrib = base.shift(*k).scale(c);
            let target = alpha + beta;
            let slot = out.entry(target).or_insert_with(|| ZClass::zero(&x.hx));
            *slot = slot.add(&contrib);
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Result of applying an operator to a truncated `I`.
#[derive(Clone, Debug)]
pub struct Applied {
    pub values: BTreeMap<CurveClass, ZClass>,
    /// Window classes where the result is exact.
    pub interior: BTreeSet<CurveClass>,
    /// Classes with a nonzero computed value that are not exact.
    pub boundary: BTreeSet<CurveClass>,
}

/// A class is interior if it lies in the window and every preimage under the
/// operator's shifts is either in the window or off the support of `I`.
pub fn is_interior(op: &DiffOp, x: &TotalSpace, window: &TruncationWindow, beta: &CurveClass) -> bool {
    window.contains(x, beta)
        && op.shifts().iter().all(|s| {
            let pre = beta - s;
            window.contains(x, &pre) || !x.is_i_effective(&pre)
        })
}

pub fn apply_operator(op: &DiffOp, x: &TotalSpace, i: &IVector) -> Applied {
    let values = apply_raw(op, x, &i.terms);
    let interior: BTreeSet<CurveClass> =
        i.window.classes(x).into_iter().filter(|b| is_interior(op, x, &i.window, b)).collect();
    let boundary = values.keys().filter(|b| !interior.contains(*b)).cloned().collect();
    Applied { values, interior, boundary }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnihilationReport {
    pub interior_classes: usize,
    pub nonzero_interior: Vec<CurveClass>,
    pub boundary_classes: usize,
    pub pass: bool,
}

pub fn check_annihilation(op: &DiffOp, x: &TotalSpace, i: &IVector) -> AnnihilationReport {
    let a = apply_operator(op, x, i);
    let nonzero: Vec<CurveClass> = a.interior.iter().filter(|b| a.values.contains_key(*b)).cloned().collect();
    AnnihilationReport {
        interior_classes: a.interior.len(),
        pass: nonzero.is_empty(),
        nonzero_interior: nonzero,
        boundary_classes: a.boundary.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohring::BaseKind;
    use crate::ifunc::assemble_i;
    use proptest::prelude::*;

    fn model(kind: BaseKind, l: &[Vec<i64>], lp: &[Vec<i64>]) -> FlopModel {
        FlopModel::from_kind(&kind, l.len() - 1, l.to_vec(), lp.to_vec()).unwrap()
    }

    fn sf(r: usize) -> FlopModel {
        model(BaseKind::Point, &vec![vec![]; r + 1], &vec![vec![]; r + 1])
    }

    fn sp1(l: &[i64], lp: &[i64]) -> FlopModel {
        let w = |v: &[i64]| v.iter().map(|k| vec![*k]).collect::<Vec<_>>();
        model(BaseKind::Projspace(1), &w(l), &w(lp))
    }

    fn fixtures() -> Vec<FlopModel> {
        vec![sf(1), sf(2), sp1(&[1, 0], &[1, 0]), sp1(&[-1, -1], &[0, 0]), sp1(&[1, 0, -1], &[-1, 0, 0])]
    }

    #[test]
    fn sf1_operators_instantiate() {
        let m = sf(1);
        let (bl, bg) = picard_fuchs_pair(&m.x);
        let x1 = DiffOp::gen(0, 1);
        let x2 = DiffOp::gen(0, 2);
        let ql = DiffOp::novikov(&CurveClass::ell(0));
        let expect = x1.pow(2).sub(&ql.mul(&x2.sub(&x1).pow(2)));
        assert_eq!(bl, expect);
        let expect = x2.mul(&x2.sub(&x1).pow(2)).sub(&DiffOp::novikov(&CurveClass::gamma(0)));
        assert_eq!(bg, expect);
        assert_eq!(bl.to_string(), "1 D1^2 + -1 Q^([],1,0) D2^2 + 2 Q^([],1,0) D1 D2 + -1 Q^([],1,0) D1^2");
    }

    #[test]
    fn commutation_rule() {
        let x1 = DiffOp::gen(0, 1);
        let ql = DiffOp::novikov(&CurveClass::ell(0));
        let lhs = x1.mul(&ql);
        let rhs = ql.mul(&x1).add(&ql.mul(&DiffOp::z(0)));
        assert_eq!(lhs, rhs);
        let g = DiffOp::novikov(&CurveClass::gamma(0));
        assert_eq!(x1.mul(&g), g.mul(&x1));
    }

    #[test]
    fn ideal_identities() {
        for m in fixtures() {
            assert!(pf_ideal_check(&m).pass);
        }
        assert_eq!(DiffOp::one(0).transform(), DiffOp::one(0));
    }

    #[test]
    fn annihilation_on_fixtures() {
        let w = TruncationWindow::new(2, 3, 3);
        for m in fixtures() {
            for x in [&m.x, &m.xp] {
                let i = assemble_i(x, &w);
                let (bl, bg) = picard_fuchs_pair(x);
                let rl = check_annihilation(&bl, x, &i);
                let rg = check_annihilation(&bg, x, &i);
                assert!(rl.pass, "{:?}", rl.nonzero_interior);
                assert!(rg.pass, "{:?}", rg.nonzero_interior);
                assert!(rl.interior_classes > 0 && rg.interior_classes > 0);
            }
        }
    }

    #[test]
    fn truncation_residue_is_boundary_only() {
        let m = sf(1);
        let w = TruncationWindow::new(0, 0, 0);
        let i = assemble_i(&m.x, &w);
        let (bl, _) = picard_fuchs_pair(&m.x);
        let a = apply_operator(&bl, &m.x, &i);
        assert!(a.values.contains_key(&CurveClass::ell(0)));
        assert!(a.boundary.contains(&CurveClass::ell(0)));
        assert!(check_annihilation(&bl, &m.x, &i).pass);
    }

    #[test]
    fn string_and_basic_actions() {
        let m = sp1(&[1, 0], &[1, 0]);
        let w = TruncationWindow::new(1, 2, 2);
        let i = assemble_i(&m.x, &w);
        let a = apply_raw(&DiffOp::gen(1, 0), &m.x, &i.terms);
        assert_eq!(a, i.terms);
        assert_eq!(apply_raw(&DiffOp::one(1), &m.x, &i.terms), i.terms);
        let a = apply_raw(&DiffOp::gen(1, 2), &m.x, &i.terms);
        for (beta, t) in &i.terms {
            let mut f = ZClass::constant(m.x.xi.clone());
            f.add_term(1, &m.x.hx.scalar(q(beta.d2)));
            let expect = t.mul(&f);
            assert_eq!(a.get(beta).cloned().unwrap_or_else(|| ZClass::zero(&m.x.hx)), expect);
        }
        let shift = apply_raw(&DiffOp::novikov(&CurveClass::new(vec![0], 1, 0)), &m.x, &i.terms);
        for (beta, t) in &i.terms {
            assert_eq!(&shift[&(beta + &CurveClass::new(vec![0], 1, 0))], t);
        }
    }

    proptest! {
        #[test]
        fn composition_is_action(
            e1 in proptest::collection::vec(0u32..3, 4),
            e2 in proptest::collection::vec(0u32..3, 4),
            d1 in 0i64..2, d2 in 0i64..2, k in 0i32..2,
        ) {
            let m = sp1(&[1, 0], &[1, 0]);
            let w = TruncationWindow::new(1, 2, 1);
            let i = assemble_i(&m.x, &w);
            let op1 = DiffOp::monomial(1, CurveClass::new(vec![0], d1, 0), k, e1, q(2))
                .add(&DiffOp::gen(1, 1));
            let op2 = DiffOp::monomial(1, CurveClass::new(vec![0], 0, d2), 0, e2, q(-1))
                .add(&DiffOp::novikov(&CurveClass::new(vec![1], -1, -2)));
            let lhs = apply_raw(&op1.mul(&op2), &m.x, &i.terms);
            let rhs = apply_raw(&op1, &m.x, &apply_raw(&op2, &m.x, &i.terms));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn transform_is_multiplicative(
            e1 in proptest::collection::vec(0u32..3, 4),
            e2 in proptest::collection::vec(0u32..3, 4),
            d in -1i64..2, d2 in -1i64..2,
        ) {
            let a = DiffOp::monomial(1, CurveClass::new(vec![0], d, d2), 0, e1, q(1));
            let b = DiffOp::monomial(1, CurveClass::new(vec![1], d2, d), 1, e2, q(3));
            prop_assert_eq!(a.mul(&b).transform(), a.transform().mul(&b.transform()));
        }
    }
}
