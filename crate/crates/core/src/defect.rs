//! Failure of `𝓕` to preserve triple intersections, computed directly and
//! through the Segre-class formula.

use crate::cohring::{segre_of_virtual, ser_q, sign, Class, Q};
use crate::flopmodel::FlopModel;
use num::{Signed, Zero};
use serde::Serialize;

/// Result of a direct defect evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectDefect {
    #[serde(serialize_with = "ser_q")]
    pub value: Q,
    /// False when the degrees of the inputs do not add up to `dim X`.
    pub degree_ok: bool,
}

/// `∫_{X'} 𝓕a₁·𝓕a₂·𝓕a₃ − ∫_X a₁·a₂·a₃`.
pub fn triple_defect_direct(model: &FlopModel, a1: &Class, a2: &Class, a3: &Class) -> DirectDefect {
    let dim = model.x.hx.top_degree();
    let degree_ok = match (a1.homogeneous_degree(), a2.homogeneous_degree(), a3.homogeneous_degree()) {
        (Some(k1), Some(k2), Some(k3)) => k1 + k2 + k3 == dim,
        _ => false,
    };
    if !degree_ok {
        return DirectDefect { value: Q::zero(), degree_ok };
    }
    let lhs = (&(&model.transform_class(a1) * &model.transform_class(a2)) * &model.transform_class(a3)).integrate();
    let rhs = (&(a1 * a2) * a3).integrate();
    DirectDefect { value: lhs - rhs, degree_ok }
}

/// Precomputed pieces of the defect formula for one model.
pub struct DefectFormula<'a> {
    model: &'a FlopModel,
    /// `(i, j, Ť_i H_{r-j} [Z])` for `1 ≤ j ≤ r`.
    probes: Vec<(usize, usize, Class)>,
    /// `s_k(F + F'^*)` on `S`.
    stilde: Vec<Class>,
}

impl<'a> DefectFormula<'a> {
    pub fn new(model: &'a FlopModel) -> Self {
        let x = &model.x;
        let z = x.class_of_z();
        let dual = x.base.dual_basis();
        let mut probes = Vec::new();
        for j in 1..=model.r {
            let hz = &x.h_class(model.r - j) * &z;
            for (i, t) in dual.iter().enumerate() {
                probes.push((i, j, &x.from_base(t) * &hz));
            }
        }
        let s = &x.base.ring;
        let lc: Vec<Class> = x.l.iter().map(|v| x.base.divisor_class(v)).collect();
        let lpc: Vec<Class> = x.lp.iter().map(|v| x.base.divisor_class(v)).collect();
        let stilde = segre_of_virtual(s, &lc, &lpc, s.top_degree());
        DefectFormula { model, probes, stilde }
    }

    pub fn stilde(&self) -> &[Class] {
        &self.stilde
    }

    fn pairings(&self, a: &Class) -> Vec<(usize, usize, Q)> {
        self.probes
            .iter()
            .filter_map(|(i, j, c)| {
                let v = (a * c).integrate();
                (!v.is_zero()).then_some((*i, *j, v))
            })
            .collect()
    }

    /// Right-hand side of the defect theorem.
    pub fn evaluate(&self, a1: &Class, a2: &Class, a3: &Class) -> Q {
        self.combine(&self.pairings(a1), &self.pairings(a2), &self.pairings(a3))
    }
}

/// Convenience wrapper around [`DefectFormula::evaluate`].
pub fn triple_defect_formula(model: &FlopModel, a1: &Class, a2: &Class, a3: &Class) -> Q {
    DefectFormula::new(model).evaluate(a1, a2, a3)
}

/// The simplified form for `P¹` flops:
/// `−Σ (a₁·Ť₁)(a₂·Ť₂)(a₃·Ť₃)(T̄₁T̄₂T̄₃)`, pairings taken along `Z`.
pub fn p1_corollary(model: &FlopModel, a1: &Class, a2: &Class, a3: &Class) -> Q {
    assert_eq!(model.r, 1, "only for P^1 flops");
    let x = &model.x;
    let s = &x.base.ring;
    let z = x.class_of_z();
    let dual: Vec<Class> = x.base.dual_basis().iter().map(|t| &x.from_base(t) * &z).collect();
    let pair = |a: &Class| -> Vec<Q> { dual.iter().map(|d| (a * d).integrate()).collect() };
    let (v1, v2, v3) = (pair(a1), pair(a2), pair(a3));
    let n = s.rank();
    let mut total = Q::zero();
    for i1 in 0..n {
        if v1[i1].is_zero() {
            continue;
        }
        for i2 in 0..n {
            if v2[i2].is_zero() {
                continue;
            }
            for i3 in 0..n {
                if v3[i3].is_zero() {
                    continue;
                }
                let w = (&(&s.basis(i1) * &s.basis(i2)) * &s.basis(i3)).integrate();
                total += &v1[i1] * &v2[i2] * &v3[i3] * w;
            }
        }
    }
    -total
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub rank: usize,
    pub pairs_checked: usize,
    #[serde(serialize_with = "ser_q")]
    pub max_deviation: Q,
    pub pass: bool,
}

/// Compare the full pairing matrices of `X` and `X'` under `𝓕`.
pub fn pairing_check(model: &FlopModel) -> PairingReport {
    let x = &model.x;
    let n = x.rank();
    let g = x.hx.pairing_matrix();
    let gp = model.xp.hx.pairing_matrix();
    let f = &model.fmat;
    // (F^T G' F)_{ef}
    let ft = crate::linalg::transpose(f);
    let pulled = crate::linalg::matmul(&crate::linalg::matmul(&ft, &gp), f);
    let mut max_dev = Q::zero();
    for e in 0..n {
        for k in 0..n {
            let dev = (&pulled[e][k] - &g[e][k]).abs();
            if dev > max_dev {
                max_dev = dev;
            }
        }
    }
    PairingReport { rank: n, pairs_checked: n * n, pass: max_dev.is_zero(), max_deviation: max_dev }
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleRow {
    pub triple: [usize; 3],
    #[serde(serialize_with = "ser_q")]
    pub direct: Q,
    #[serde(serialize_with = "ser_q")]
    pub formula: Q,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub triples_checked: usize,
    pub nonzero_defects: usize,
    pub failures: usize,
    pub rows: Vec<TripleRow>,
    pub pass: bool,
}

/// Check direct against formula on every degree-compatible basis triple
/// `e₁ ≤ e₂ ≤ e₃`. Only nonzero or failing rows are kept in the report.
pub fn check_all_triples(model: &FlopModel) -> DefectReport {
    let x = &model.x;
    let n = x.rank();
    let dim = x.hx.top_degree();
    let formula = DefectFormula::new(model);
    let basis: Vec<Class> = (0..n).map(|e| x.basis_class(e)).collect();
    let images: Vec<Class> = basis.iter().map(|b| model.transform_class(b)).collect();
    let pairings: Vec<Vec<(usize, usize, Q)>> = basis.iter().map(|b| formula.pairings(b)).collect();
    let mut rows = Vec::new();
    let mut checked = 0;
    let mut nonzero = 0;
    let mut failures = 0;
    for e1 in 0..n {
        for e2 in e1..n {
            let d12 = x.hx.degree(e1) + x.hx.degree(e2);
            if d12 > dim {
                continue;
            }
            let p12 = &basis[e1] * &basis[e2];
            let i12 = &images[e1] * &images[e2];
            for e3 in e2..n {
                if d12 + x.hx.degree(e3) != dim {
                    continue;
                }
                checked += 1;
                let direct = (&i12 * &images[e3]).integrate() - (&p12 * &basis[e3]).integrate();
                let rhs = formula.combine(&pairings[e1], &pairings[e2], &pairings[e3]);
                let pass = direct == rhs;
                if !direct.is_zero() {
                    nonzero += 1;
                }
                if !pass {
                    failures += 1;
                }
                if !pass || !direct.is_zero() {
                    rows.push(TripleRow { triple: [e1, e2, e3], direct, formula: rhs, pass });
                }
            }
        }
    }
    DefectReport { triples_checked: checked, nonzero_defects: nonzero, failures, rows, pass: failures == 0 }
}

impl DefectFormula<'_> {
    fn combine(&self, p1: &[(usize, usize, Q)], p2: &[(usize, usize, Q)], p3: &[(usize, usize, Q)]) -> Q {
        let r = self.model.r;
        let s = &self.model.base.ring;
        let mut total = Q::zero();
        for (i1, j1, v1) in p1 {
            for (i2, j2, v2) in p2 {
                let t12 = &s.basis(*i1) * &s.basis(*i2);
                for (i3, j3, v3) in p3 {
                    let jsum = j1 + j2 + j3;
                    if jsum < 2 * r + 1 || jsum - (2 * r + 1) >= self.stilde.len() {
                        continue;
                    }
                    let w = (&(&t12 * &s.basis(*i3)) * &self.stilde[jsum - 2 * r - 1]).integrate();
                    if !w.is_zero() {
                        total += v1 * v2 * v3 * w;
                    }
                }
            }
        }
        sign(r as i64) * total
    }
}
