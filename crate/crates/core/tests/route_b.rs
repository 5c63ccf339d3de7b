//! Connection matrices recomputed from the frame `G = Σ Q^β [∂^{ze} I]_β` as
//! `C_a = G⁻¹ (z∂_a G)` and compared with the normal-form construction.

use flopcalc::birkhoff::quantize_index;
use flopcalc::cohring::{q, BaseKind};
use flopcalc::flopmodel::{CurveClass, FlopModel, TotalSpace};
use flopcalc::ifunc::{assemble_i, TruncationWindow};
use flopcalc::pfops::{apply_raw, DiffOp};
use flopcalc::qlh::{build_connection, ConnectionMatrix, LiftChoice};

fn frame(x: &TotalSpace, w: &TruncationWindow, dir: Option<usize>) -> ConnectionMatrix {
    let i = assemble_i(x, w);
    let n = x.rank();
    let ng = x.num_factors();
    let mut g = ConnectionMatrix::zero(n);
    for e in 0..n {
        let mut op = quantize_index(x, e);
        if let Some(a) = dir {
            op = DiffOp::gen(ng, a).mul(&op);
        }
        for (beta, zc) in apply_raw(&op, x, &i.terms) {
            if !w.contains(x, &beta) {
                continue;
            }
            for (k, c) in zc.terms() {
                for row in 0..n {
                    if *c.coeff(row) != q(0) {
                        g.add_entry(&beta, *k, row, e, c.coeff(row));
                    }
                }
            }
        }
    }
    g
}

fn route_b(x: &TotalSpace, w: &TruncationWindow) -> Vec<ConnectionMatrix> {
    let keep = |b: &CurveClass| w.contains(x, b);
    let g = frame(x, w, None);
    let ginv = g.inverse_unipotent(x.num_factors(), &keep).unwrap();
    (0..3 + x.num_factors()).map(|a| ginv.mul(&frame(x, w, Some(a)), &keep)).collect()
}

fn check(m: &FlopModel, w: TruncationWindow) {
    for x in [&m.x, &m.xp] {
        let b = route_b(x, &w);
        for mat in &b {
            assert!(mat.min_z().map_or(true, |k| k >= 0), "negative z survives");
        }
        for choice in [LiftChoice::IMinimal, LiftChoice::Twisted] {
            let a = build_connection(x, &w, choice).unwrap();
            for (k, (ma, mb)) in a.mats.iter().zip(&b).enumerate() {
                assert!(ma.sub(mb).is_zero(), "direction {k}, {choice:?}");
            }
        }
    }
}

fn over_p1(l: &[i64], lp: &[i64]) -> FlopModel {
    let w = |v: &[i64]| v.iter().map(|k| vec![*k]).collect::<Vec<_>>();
    FlopModel::from_kind(&BaseKind::Projspace(1), l.len() - 1, w(l), w(lp)).unwrap()
}

#[test]
fn simple_flops() {
    for r in [1, 2] {
        let m = FlopModel::from_kind(&BaseKind::Point, r, vec![vec![]; r + 1], vec![vec![]; r + 1]).unwrap();
        check(&m, TruncationWindow::new(0, 4, 2));
    }
}

#[test]
fn sp1_pos() {
    check(&over_p1(&[1, 0], &[1, 0]), TruncationWindow::new(2, 3, 2));
}

#[test]
fn sp1_neg() {
    check(&over_p1(&[-1, -1], &[0, 0]), TruncationWindow::new(2, 3, 2));
}

#[test]
fn sp2() {
    check(&over_p1(&[1, 0, -1], &[-1, 0, 0]), TruncationWindow::new(1, 3, 1));
}
