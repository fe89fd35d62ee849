use wei_norman::hierarchy::{derive_hierarchy_for, RiccatiStage};
use wei_norman::reference::{compare_with_reference, QUOTED_SL4_C2_ENTRY, REFERENCE_ORDER};
use wei_norman::symbolic::Var;
use wei_norman::verify::{random_vec, trial_rng};
use wei_norman::{dense_rhs, derive_hierarchy, emit, Algebra, Format, RowOrder, Stage, SymbolicExpr};

fn expr(s: &str) -> SymbolicExpr {
    SymbolicExpr::parse(s).unwrap()
}

fn riccati(stage: &Stage) -> &RiccatiStage {
    match stage {
        Stage::Riccati(r) => r,
        other => panic!("expected a Riccati stage, got {}", other.kind()),
    }
}

#[test]
fn reference_systems_match_term_by_term() {
    for dim in 2..=4 {
        let schedule = derive_hierarchy(dim, REFERENCE_ORDER).unwrap();
        let mismatches = compare_with_reference(&schedule).unwrap();
        assert!(mismatches.is_empty(), "N = {dim}: {mismatches:#?}");
    }
}

#[test]
fn sl2_plain_text_is_exact() {
    let schedule = derive_hierarchy(2, RowOrder::Descending).unwrap();
    assert_eq!(
        emit(&schedule, Format::Plain),
        "u1' = a1 + 2 a2 u1 - a3 u1^2\nu2' = a2 - a3 u1\nu3' = a3 e^(2 u2)\n"
    );
}

#[test]
fn sl3_exponential_forms() {
    let schedule = derive_hierarchy(3, RowOrder::Descending).unwrap();
    let eqs = schedule.equations();
    let rhs = |u: usize| eqs.iter().find(|(g, _)| g.get() == u).unwrap().1.clone();
    assert_eq!(rhs(6), expr("a6 e^(2 u4 - u5) - a7 u1 e^(2 u4 - u5)"));
    assert_eq!(rhs(7), expr("a7 u3 u6 e^(-u4 + 2 u5) + a7 e^(u4 + u5) + a8 u6 e^(-u4 + 2 u5)"));
    assert_eq!(rhs(8), expr("a7 u3 e^(-u4 + 2 u5) + a8 e^(-u4 + 2 u5)"));
}

#[test]
fn sl4_has_fifteen_unknowns_and_three_riccati_stages() {
    let schedule = derive_hierarchy(4, RowOrder::Descending).unwrap();
    assert_eq!(schedule.num_unknowns(), 15);
    let kinds: Vec<&str> = schedule.stages.iter().map(Stage::kind).collect();
    assert_eq!(kinds[..3], ["riccati", "riccati", "riccati"]);
    let last = riccati(&schedule.stages[2]);
    assert_eq!(last.unknowns.len(), 1);
    assert_eq!(last.b[0], expr("-a10 + u4 a11 - a13 u1 u4 + a13 u2"));
}

#[test]
fn quoted_sl4_entry_contradicts_the_dense_solve() {
    let alg = Algebra::new(4, RowOrder::Descending).unwrap();
    let schedule = derive_hierarchy_for(&alg).unwrap();
    let stage = riccati(&schedule.stages[1]);
    let derived = &stage.cmat[0][1];
    let quoted = expr(QUOTED_SL4_C2_ENTRY);
    assert_eq!(*derived, expr("a10 - a13 u2"));
    assert_ne!(*derived, quoted);

    // u4' = c1 + C11 u4 + C12 u5 + u4 (b1 u4 + b2 u5) against the dense solve.
    let mut rng = trial_rng(11, 4, 0);
    for _ in 0..20 {
        let u = random_vec(&mut rng, 15);
        let a = random_vec(&mut rng, 15);
        let dense = dense_rhs(&alg, &u, &a).unwrap();
        let with = |c12: &SymbolicExpr| {
            stage.c[0].eval(&u, &a)
                + stage.cmat[0][0].eval(&u, &a) * u[3]
                + c12.eval(&u, &a) * u[4]
                + u[3] * (stage.b[0].eval(&u, &a) * u[3] + stage.b[1].eval(&u, &a) * u[4])
        };
        let scale = dense[3].norm().max(1.0);
        assert!((with(derived) - dense[3]).norm() < 1e-10 * scale);
        // The extra term is a15 u5.
        let gap = (with(&quoted) - dense[3]).norm();
        assert!((gap - (a[14] * u[4]).norm()).abs() < 1e-10 * scale);
        assert!(gap > 1e-6);
    }
}

#[test]
fn row_orders_agree_up_to_relabelling() {
    for dim in 2..=4 {
        let asc = Algebra::new(dim, RowOrder::Ascending).unwrap();
        let desc = Algebra::new(dim, RowOrder::Descending).unwrap();
        let perm: Vec<usize> = asc
            .basis
            .elements()
            .iter()
            .map(|el| desc.basis.position_of(el.label).unwrap())
            .collect();
        let relabel = |v: Var| match v {
            Var::A(i) => Var::A(perm[i]),
            Var::U(i) => Var::U(perm[i]),
        };
        let from_asc = derive_hierarchy_for(&asc).unwrap().equations();
        let from_desc = derive_hierarchy_for(&desc).unwrap().equations();
        for (g, e) in from_asc {
            let target = perm[g.pos()];
            let (_, want) = from_desc.iter().find(|(h, _)| h.pos() == target).unwrap();
            assert_eq!(e.map_vars(relabel), *want, "N = {dim}, u{}", g.get());
        }
    }
}

#[test]
fn symbolic_schedule_matches_numeric_solve() {
    for dim in 2..=4 {
        for order in [RowOrder::Ascending, RowOrder::Descending] {
            let alg = Algebra::new(dim, order).unwrap();
            let schedule = derive_hierarchy_for(&alg).unwrap();
            let mut rng = trial_rng(5, dim, order as usize);
            for _ in 0..10 {
                let u = random_vec(&mut rng, alg.len());
                let a = random_vec(&mut rng, alg.len());
                let sym = schedule.eval(&u, &a);
                let num = dense_rhs(&alg, &u, &a).unwrap();
                let scale = num.iter().map(|z| z.norm()).fold(1.0, f64::max);
                let err = sym.iter().zip(&num).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                assert!(err < 1e-10 * scale, "N = {dim}, {order}: {err:e}");
            }
        }
    }
}
