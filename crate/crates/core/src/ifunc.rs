//! Truncated hypergeometric `I`-functions of the double projective bundle.
//!
//! Every term carries the implicit prefactor `q^β e^{D/z + D·β}`; only the
//! Laurent coefficient in `z` is stored.

use crate::cohring::ZClass;
use crate::flopmodel::{CurveClass, FlopModel, TotalSpace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Box `|β_S| ≤ bs_bound`, `0 ≤ d̃ ≤ d_max`, `0 ≤ d̃₂ ≤ d2_max` in the shifted
/// coordinates `d̃ = d + Σ β_g c_g`, `d̃₂ = d₂ + Σ β_g ν_g` of a total space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationWindow {
    pub bs_bound: i64,
    pub d_max: i64,
    pub d2_max: i64,
}

impl TruncationWindow {
    pub fn new(bs_bound: i64, d_max: i64, d2_max: i64) -> Self {
        TruncationWindow { bs_bound, d_max, d2_max }
    }

    /// Shifted coordinates `(|β_S|, d̃, d̃₂)`.
    pub fn coords(x: &TotalSpace, beta: &CurveClass) -> (i64, i64, i64) {
        let (c, n) = x.window_shifts();
        let dt = beta.d + beta.bs.iter().zip(&c).map(|(b, s)| b * s).sum::<i64>();
        let d2t = beta.d2 + beta.bs.iter().zip(&n).map(|(b, s)| b * s).sum::<i64>();
        (beta.base_degree(), dt, d2t)
    }

    pub fn contains(&self, x: &TotalSpace, beta: &CurveClass) -> bool {
        if !x.base.is_effective(&beta.bs) {
            return false;
        }
        let (b, dt, d2t) = Self::coords(x, beta);
        b <= self.bs_bound && (0..=self.d_max).contains(&dt) && (0..=self.d2_max).contains(&d2t)
    }

    /// Effective base classes of degree at most `bs_bound`.
    pub fn base_classes(&self, ng: usize) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..ng {
            let mut next = Vec::new();
            for v in &out {
                let used: i64 = v.iter().sum();
                for k in 0..=self.bs_bound - used {
                    let mut w = v.clone();
                    w.push(k);
                    next.push(w);
                }
            }
            out = next;
        }
        out
    }

    /// Every class of the box.
    pub fn classes(&self, x: &TotalSpace) -> Vec<CurveClass> {
        let (c, n) = x.window_shifts();
        let mut out = Vec::new();
        for bs in self.base_classes(x.num_factors()) {
            let sc: i64 = bs.iter().zip(&c).map(|(b, s)| b * s).sum();
            let sn: i64 = bs.iter().zip(&n).map(|(b, s)| b * s).sum();
            for d2 in -sn..=self.d2_max - sn {
                for d in -sc..=self.d_max - sc {
                    out.push(CurveClass::new(bs.clone(), d, d2));
                }
            }
        }
        out.sort_by_key(lex_key);
        out
    }

    /// The `I`-effective classes of the box, in processing order.
    pub fn i_effective_classes(&self, x: &TotalSpace) -> Vec<CurveClass> {
        self.classes(x).into_iter().filter(|b| x.is_i_effective(b)).collect()
    }

    /// Remaining room after spending `beta`.
    pub fn minus(&self, x: &TotalSpace, beta: &CurveClass) -> Option<TruncationWindow> {
        let (b, dt, d2t) = Self::coords(x, beta);
        let w = TruncationWindow { bs_bound: self.bs_bound - b, d_max: self.d_max - dt, d2_max: self.d2_max - d2t };
        (w.bs_bound >= 0 && w.d_max >= 0 && w.d2_max >= 0).then_some(w)
    }
}

/// Processing order `(|β_S|, d₂, d)`, refined by `β_S` itself.
pub fn lex_key(b: &CurveClass) -> (i64, i64, i64, Vec<i64>) {
    (b.base_degree(), b.d2, b.d, b.bs.clone())
}

/// `1/∏_{m=1}^{s}(v + mz)` for `s > 0`, `∏_{m=s+1}^{0}(v + mz)` for `s ≤ 0`.
pub fn directed_factor(v: &crate::cohring::Class, s: i64) -> ZClass {
    let mut out = ZClass::constant(v.ring().unit());
    if s > 0 {
        for m in 1..=s {
            out = out.mul(&ZClass::inverse_linear(v, m));
        }
    } else {
        for m in s + 1..=0 {
            out = out.mul(&ZClass::linear(v, m));
        }
    }
    out
}

/// `I^{X/S}_β`: the product of the directed factors of all roots.
pub fn relative_factor(x: &TotalSpace, beta: &CurveClass) -> ZClass {
    let mut out = ZClass::constant(x.hx.unit());
    for (v, s) in x.roots_with_pairings(beta) {
        out = out.mul(&directed_factor(&v, s));
        if out.is_zero() {
            break;
        }
    }
    out
}

/// `J^S_{β_S}` pulled back to `X`.
pub fn base_j_coefficient(x: &TotalSpace, bs: &[i64]) -> ZClass {
    let js = x.base.base_j(bs);
    let mut out = ZClass::zero(&x.hx);
    for (k, c) in js.terms() {
        out.add_term(*k, &x.from_base(c));
    }
    out
}

/// `I_β = I^{X/S}_β J^S_{β_S}`.
pub fn i_term(x: &TotalSpace, beta: &CurveClass) -> ZClass {
    if !x.base.is_effective(&beta.bs) {
        return ZClass::zero(&x.hx);
    }
    let rel = relative_factor(x, beta);
    if rel.is_zero() {
        return rel;
    }
    rel.mul(&base_j_coefficient(x, &beta.bs))
}

/// Truncated `I`-function.
#[derive(Clone, Debug)]
pub struct IVector {
    pub window: TruncationWindow,
    pub terms: BTreeMap<CurveClass, ZClass>,
}

impl IVector {
    pub fn term(&self, beta: &CurveClass) -> Option<&ZClass> {
        self.terms.get(beta)
    }

    /// Per class, the list of `(z-power, class)` rows.
    pub fn dump(&self) -> Vec<(CurveClass, Vec<(i32, String)>)> {
        self.terms
            .iter()
            .map(|(b, zc)| (b.clone(), zc.terms().iter().map(|(k, c)| (*k, c.to_string())).collect()))
            .collect()
    }
}

pub fn assemble_i(x: &TotalSpace, window: &TruncationWindow) -> IVector {
    let mut terms = BTreeMap::new();
    for beta in window.i_effective_classes(x) {
        let t = i_term(x, &beta);
        if !t.is_zero() {
            terms.insert(beta, t);
        }
    }
    IVector { window: *window, terms }
}

/// `z`-weight of the relative factor: every term `z^k c` with `c` of degree
/// `p` must have `k + p = -λ_β`. Returns the offending weights.
pub fn weight_defects(x: &TotalSpace, beta: &CurveClass, zc: &ZClass, include_base: bool) -> Vec<i64> {
    let mut expect = -x.lambda(beta);
    if include_base {
        expect -= beta.bs.iter().zip(&x.base.dims).map(|(b, n)| b * (*n as i64 + 1)).sum::<i64>();
    }
    let mut bad = Vec::new();
    for (k, c) in zc.terms() {
        for p in 0..=x.hx.top_degree() {
            if !c.degree_part(p).is_zero() && *k as i64 + p as i64 != expect {
                bad.push(*k as i64 + p as i64);
            }
        }
    }
    bad
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiLinearityReport {
    pub classes_checked: usize,
    pub failures: Vec<CurveClass>,
    pub pass: bool,
}

/// `𝓕(I_β)·ξ' = I'_{𝓕β}·ξ'` on every `I`-effective class of the window, and
/// `𝓕 I_β = I'_{𝓕β}` when `d₂ < 0`.
pub fn quasi_linearity_check(model: &FlopModel, window: &TruncationWindow) -> QuasiLinearityReport {
    let mut failures = Vec::new();
    let mut checked = 0;
    for beta in window.i_effective_classes(&model.x) {
        checked += 1;
        let fb = FlopModel::transform_curve(&beta);
        let lhs = transform_z(model, &i_term(&model.x, &beta));
        let rhs = i_term(&model.xp, &fb);
        let ok = if beta.d2 < 0 {
            lhs == rhs
        } else {
            lhs.mul_class(&model.xp.xi) == rhs.mul_class(&model.xp.xi)
        };
        if !ok {
            failures.push(beta);
        }
    }
    QuasiLinearityReport { classes_checked: checked, pass: failures.is_empty(), failures }
}

/// Apply `𝓕` coefficientwise.
pub fn transform_z(model: &FlopModel, zc: &ZClass) -> ZClass {
    let mut out = ZClass::zero(&model.xp.hx);
    for (k, c) in zc.terms() {
        out.add_term(*k, &model.transform_class(c));
    }
    out
}

/// Margin scan: classes near the window whose base part is effective but
/// which are not `I`-effective must have vanishing `I_β`.
pub fn vanishing_violations(x: &TotalSpace, window: &TruncationWindow, margin: i64) -> Vec<CurveClass> {
    let mut bad = Vec::new();
    for bs in window.base_classes(x.num_factors()) {
        let mu = x.mu_i_max(&bs);
        let nu = x.nu_i(&bs);
        for d in -mu - margin..=-mu + window.d_max {
            for d2 in -nu - margin..=-nu + window.d2_max {
                let beta = CurveClass::new(bs.clone(), d, d2);
                if !x.is_i_effective(&beta) && !i_term(x, &beta).is_zero() {
                    bad.push(beta);
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohring::{q, BaseKind};

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

    #[test]
    fn sf1_low_terms() {
        let m = sf(1);
        let x = &m.x;
        assert_eq!(i_term(x, &CurveClass::zero(0)), ZClass::constant(x.hx.unit()));
        let il = i_term(x, &CurveClass::ell(0));
        let xi2 = x.xi.pow(2);
        let hxi = &x.h * &x.xi;
        let mut expect = ZClass::monomial(-2, &xi2 - &hxi.scale(&q(2)));
        expect.add_term(-3, &(&x.h * &xi2).scale(&q(-2)));
        assert_eq!(il, expect);
        let ig = i_term(x, &CurveClass::gamma(0));
        let b = &x.xi - &x.h;
        let manual = ZClass::inverse_linear(&b, 1).mul(&ZClass::inverse_linear(&b, 1)).mul(&ZClass::inverse_linear(&x.xi, 1));
        assert_eq!(ig, manual);
    }

    #[test]
    fn base_j_on_p1() {
        let m = sp1(&[1, 0], &[1, 0]);
        let j = base_j_coefficient(&m.x, &[1]);
        let p = m.x.base_divisor(&[1]);
        let mut expect = ZClass::monomial(-2, m.x.hx.unit());
        expect.add_term(-3, &p.scale(&q(-2)));
        assert_eq!(j, expect);
        assert_eq!(base_j_coefficient(&m.x, &[0]), ZClass::constant(m.x.hx.unit()));
    }

    #[test]
    fn window_basics() {
        let m = sf(1);
        let w = TruncationWindow::new(0, 0, 0);
        let i = assemble_i(&m.x, &w);
        assert_eq!(i.terms.len(), 1);
        let w = TruncationWindow::new(0, 2, 0);
        let i = assemble_i(&m.x, &w);
        assert_eq!(i.terms.keys().cloned().collect::<Vec<_>>(), vec![
            CurveClass::zero(0),
            CurveClass::ell(0),
            CurveClass::ell(0).scale(2)
        ]);
        let m = sp1(&[1, 0], &[1, 0]);
        let w = TruncationWindow::new(1, 2, 2);
        assert!(w.contains(&m.x, &m.x.i_minimal_lift(&[1]).unwrap()));
        for beta in w.classes(&m.x) {
            for a in [CurveClass::new(vec![0], 1, 0), CurveClass::new(vec![0], 0, 1), m.x.i_minimal_lift(&[1]).unwrap()] {
                let diff = &beta - &a;
                if m.x.base.is_effective(&diff.bs) {
                    let (_, dt, d2t) = TruncationWindow::coords(&m.x, &diff);
                    if dt >= 0 && d2t >= 0 {
                        assert!(w.contains(&m.x, &diff));
                    }
                }
            }
        }
    }

    #[test]
    fn homogeneity() {
        for m in [sf(1), sf(2), sp1(&[1, 0], &[1, 0]), sp1(&[-1, -1], &[0, 0]), sp1(&[1, 0, -1], &[-1, 0, 0])] {
            let w = TruncationWindow::new(2, 3, 2);
            for beta in w.i_effective_classes(&m.x) {
                let rel = relative_factor(&m.x, &beta);
                assert!(weight_defects(&m.x, &beta, &rel, false).is_empty(), "{beta}");
                let full = i_term(&m.x, &beta);
                assert!(weight_defects(&m.x, &beta, &full, true).is_empty(), "{beta}");
            }
        }
    }

    #[test]
    fn vanishing_off_support() {
        for m in [sf(1), sp1(&[1, 0], &[1, 0]), sp1(&[-1, -1], &[0, 0]), sp1(&[1, 0, -1], &[-1, 0, 0])] {
            assert!(vanishing_violations(&m.x, &TruncationWindow::new(2, 3, 2), 3).is_empty());
        }
    }

    #[test]
    fn naive_quasi_linearity() {
        for m in [sf(1), sf(2), sp1(&[1, 0], &[1, 0]), sp1(&[-1, -1], &[0, 0]), sp1(&[1, 0, -1], &[-1, 0, 0])] {
            let rep = quasi_linearity_check(&m, &TruncationWindow::new(2, 3, 2));
            assert!(rep.pass, "{:?}", rep.failures);
        }
    }
}
