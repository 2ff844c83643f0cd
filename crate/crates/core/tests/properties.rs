//! Structural invariants as property tests over random fields and parameters.

use std::f64::consts::PI;

use proptest::prelude::*;
use vll_core::elliptic::{solve_neumann, split_pressure, NeumannProblem};
use vll_core::fields::{make_initial_data, project_div_free, wall_slip_defect, Field, PhysParams, Recipe, State};
use vll_core::grid::{conormal_apply, ddx, z2, ConormalIndex, Grid};
use vll_core::norms::{em_parts, hco_norm, hco_norm_vec};
use vll_core::snapshot::Snapshot;
use vll_core::study::fit_rate;

const NX: usize = 16;
const NY: usize = 24;

fn grid() -> Grid {
    Grid::build(2.0 * PI, 6.0, NX, NY, 2.0, 1.0).unwrap()
}

fn field() -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0f64..1.0, NX * NY).prop_map(|v| Field::from_vec(NX, NY, v).unwrap())
}

/// Smooth field: a few x modes times Gaussian-damped polynomials.
fn smooth() -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0f64..1.0, 6).prop_map(|c| {
        grid().sample(|x, y| {
            let e = (-0.5 * y * y).exp();
            (c[0] + c[1] * x.sin() + c[2] * (2.0 * x).cos()) * e * (1.0 + c[3] * y)
                + c[4] * x.cos() * (-y).exp()
                + c[5]
        })
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn periodic_orthogonality(rows in prop::collection::vec(-1.0f64..1.0, NY)) {
        let g = grid();
        let mut f = Field::zeros(NX, NY);
        for j in 0..NY {
            for i in 0..NX {
                f.set(i, j, g.x(i).sin() * rows[j]);
            }
        }
        prop_assert!(g.integrate(&f).abs() <= 1e-12);
        let one = g.sample(|_, _| 1.0);
        prop_assert!(rel(g.integrate(&one), g.lx() * g.ly()) <= 1e-12);
    }

    #[test]
    fn z2_annihilates_the_wall_row(f in field(), b1 in 0usize..3, b2 in 1usize..3) {
        let g = grid();
        let z = conormal_apply(&g, &f, ConormalIndex::new(b1, b2)).unwrap();
        prop_assert!(z.row(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conormal_factors_commute(f in smooth()) {
        let g = grid();
        let both = conormal_apply(&g, &f, ConormalIndex::new(1, 1)).unwrap();
        let a = ddx(&g, &z2(&g, &f).unwrap()).unwrap();
        let b = z2(&g, &ddx(&g, &f).unwrap()).unwrap();
        prop_assert!(both.max_diff(&a) <= 1e-10);
        prop_assert!(both.max_diff(&b) <= 1e-10);
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(u1 in field(), u2 in field()) {
        let g = grid();
        let (p1, p2) = project_div_free(&g, &u1, &u2).unwrap();
        let (q1, q2) = project_div_free(&g, &p1, &p2).unwrap();
        let scale = (g.inner(&u1, &u1) + g.inner(&u2, &u2)).sqrt();
        prop_assert!(q1.max_diff(&p1).max(q2.max_diff(&p2)) <= 1e-10 * scale.max(1.0));
        let cross = g.inner(&p1, &u1.sub(&p1)) + g.inner(&p2, &u2.sub(&p2));
        prop_assert!(cross.abs() <= 1e-8 * scale * scale);
        prop_assert!(p2.row(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_data_is_prepared(alpha in 0.0f64..3.0, amp in 0.1f64..2.0) {
        let g = grid();
        let s = make_initial_data(&g, Recipe::VortexPair, amp, alpha).unwrap();
        prop_assert!(s.u2.row(0).iter().all(|v| *v == 0.0));
        prop_assert!(wall_slip_defect(&g, &s.u1, alpha) <= 1e-2 * amp);
        prop_assert!(s.is_finite());
    }

    #[test]
    fn neumann_solve_is_linear_with_zero_mean(r1 in smooth(), r2 in smooth(), a in -2.0f64..2.0) {
        let g = grid();
        let solve = |r: &Field| solve_neumann(&g, &NeumannProblem::homogeneous(r.clone())).unwrap();
        let (p1, p2) = (solve(&r1), solve(&r2));
        let combo = solve(&r1.scale(a).add(&r2));
        let expect = p1.scale(a).add(&p2);
        prop_assert!(combo.max_diff(&expect) <= 1e-10 * expect.max_abs().max(1.0));
        prop_assert!(g.integrate(&combo).abs() <= 1e-10 * expect.max_abs().max(1.0));
    }

    #[test]
    fn pressure_split_adds_up(f1 in smooth(), f2 in smooth(), u1 in smooth(), alpha in 0.0f64..2.0) {
        let g = grid();
        let params = PhysParams::headline(0.2, alpha);
        let s = split_pressure(&g, &f1, &f2, &u1, &params).unwrap();
        prop_assert!(s.p.max_diff(&s.p1.add(&s.p2)) <= 1e-10 * s.p.max_abs().max(1.0));
        if alpha == 0.0 {
            prop_assert_eq!(s.p2.max_abs(), 0.0);
        }
    }

    #[test]
    fn hco_is_a_monotone_seminorm(f in field(), h in field(), c in -5.0f64..5.0) {
        let g = grid();
        let norms: Vec<f64> = (0..=4).map(|m| hco_norm(&g, &f, m).unwrap()).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] >= w[0]));
        for (m, n) in norms.iter().enumerate() {
            prop_assert!(rel(hco_norm(&g, &f.scale(c), m).unwrap(), c.abs() * n) <= 1e-12);
            let sum = hco_norm(&g, &f.add(&h), m).unwrap();
            prop_assert!(sum <= n + hco_norm(&g, &h, m).unwrap() + 1e-10);
        }
        let v = hco_norm_vec(&g, &[&f], 2).unwrap();
        prop_assert!(rel(v, norms[2]) <= 1e-12);
    }

    #[test]
    fn em_parts_sum(u1 in smooth(), u2 in smooth(), th in smooth(), alpha in 0.0f64..2.0) {
        let g = grid();
        let s = State { u1, u2, theta: th, p: Field::zeros(NX, NY), time: 0.0, wall_ghost: None };
        let e = em_parts(&g, &s, alpha, 2).unwrap();
        prop_assert!(rel(e.total(), e.state + e.normal + e.sup) <= 1e-12);
        prop_assert!(e.state >= 0.0 && e.normal >= 0.0 && e.sup >= 0.0);
    }

    #[test]
    fn fit_recovers_power_laws(c in 0.01f64..100.0, p in 0.5f64..3.0) {
        let pts: Vec<(f64, f64)> = [0.2f64, 0.1, 0.05, 0.025].iter().map(|&e| (e, c * e.powf(p))).collect();
        let (s, r) = fit_rate(&pts).unwrap();
        prop_assert!((s - p).abs() <= 1e-10);
        prop_assert!(r <= 1e-10);
    }

    #[test]
    fn snapshot_roundtrip(f in field(), t in 0.0f64..10.0) {
        let s = Snapshot::new(t, vec![("a".into(), f.clone()), ("b".into(), f.scale(-2.0))]);
        let back = Snapshot::decode(&s.encode()).unwrap();
        prop_assert_eq!(back.header.time, t);
        prop_assert_eq!(back.field("a"), Some(&f));
    }

    #[test]
    fn snapshot_decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = Snapshot::decode(&bytes);
    }
}
