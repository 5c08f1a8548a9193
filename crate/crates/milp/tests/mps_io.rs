use proptest::prelude::*;
use v2g_milp::mps::{read_mps, to_mps_string, NameTable};
use v2g_milp::{solve_lp, LpProblem, MilpProblem, Sense, SimplexOptions};

#[test]
fn one_variable_golden_file() {
    let mut lp = LpProblem::new();
    let x = lp.add_column(1.0, 0.0, f64::INFINITY);
    lp.add_row([(x, 1.0)], Sense::Ge, 3.0);
    let text = to_mps_string(&MilpProblem::new(lp), "GOLDEN");
    assert_eq!(text, include_str!("data/one_var.mps"));
}

#[test]
fn golden_file_fields_sit_in_fixed_columns() {
    // Field 2 starts at column 5, field 3 at 15, field 4 ends at column 36.
    let golden = include_str!("data/one_var.mps");
    let line = golden.lines().find(|l| l.contains("R0000000") && l.starts_with("    C")).unwrap();
    assert_eq!(&line[4..12], "C0000000");
    assert_eq!(&line[14..22], "R0000000");
    assert_eq!(line.len(), 36);
}

#[test]
fn reader_solves_what_writer_wrote() {
    let mut lp = LpProblem::new();
    let x = lp.add_column(1.0, 0.0, f64::INFINITY);
    lp.add_row([(x, 1.0)], Sense::Ge, 3.0);
    let parsed = read_mps(include_str!("data/one_var.mps").as_bytes()).unwrap();
    let sol = solve_lp(&parsed.problem.lp, &SimplexOptions::default()).unwrap();
    assert_eq!(sol.objective, 3.0);
    assert_eq!(parsed.name, "GOLDEN");
}

#[test]
fn name_table_lists_short_and_long_names() {
    let table = NameTable::new(&["x[0]".into(), "w[0]".into()], &["stock_lo[0]".into()]);
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "C0000000 x[0]\nC0000001 w[0]\nR0000000 stock_lo[0]\n");
    let lookup = table.column_lookup();
    assert_eq!(lookup["w[0]"], 1);
    assert_eq!(lookup["C0000001"], 1);
}

fn bound_strategy() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![
        Just((0.0, f64::INFINITY)),
        Just((f64::NEG_INFINITY, f64::INFINITY)),
        (-20i32..0).prop_map(|l| (l as f64, f64::INFINITY)),
        (-20i32..20, 0i32..20).prop_map(|(l, w)| (l as f64, (l + w) as f64)),
        (-20i32..20).prop_map(|u| (f64::NEG_INFINITY, u as f64 + 0.25)),
        Just((0.0, 1.0)),
    ]
}

fn milp_strategy() -> impl Strategy<Value = MilpProblem> {
    (1usize..8, 0usize..6).prop_flat_map(|(n, m)| {
        let cols = proptest::collection::vec((-100i32..100, bound_strategy(), any::<bool>()), n);
        let rows = proptest::collection::vec(
            (proptest::collection::vec((0..n, -50i32..50), 0..5), 0u8..3, -100i32..100),
            m,
        );
        (cols, rows).prop_map(|(cols, rows)| {
            let mut lp = LpProblem::new();
            let mut integer = Vec::new();
            for (c, (lo, hi), int) in cols {
                lp.add_column(c as f64 / 8.0, lo, hi);
                integer.push(int && lo.is_finite() && hi.is_finite());
            }
            for (coeffs, s, rhs) in rows {
                let sense = [Sense::Le, Sense::Ge, Sense::Eq][s as usize];
                lp.add_row(coeffs.into_iter().map(|(j, a)| (j, a as f64 / 4.0)), sense, rhs as f64 / 2.0);
            }
            MilpProblem { lp, integer }
        })
    })
}

proptest! {
    #[test]
    fn export_then_read_is_structurally_identical(p in milp_strategy()) {
        let text = to_mps_string(&p, "RT");
        let parsed = read_mps(text.as_bytes()).unwrap();
        prop_assert_eq!(&parsed.problem, &p);
        prop_assert_eq!(parsed.column_names.len(), p.lp.num_cols());
        prop_assert_eq!(to_mps_string(&parsed.problem, "RT"), text);
    }
}
