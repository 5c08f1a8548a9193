//! Aggregation of a sweep directory into summary and per-figure CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use v2g_core::experiments::{CaseKind, ExperimentPlan, SweepResult};

/// Level key that sorts numerically and prints with one decimal.
fn level_key(level: f64) -> i64 {
    (level * 10.0).round() as i64
}

#[derive(Default, Clone, Copy)]
struct Acc {
    seeds: usize,
    failed: usize,
    shed: f64,
    unmet: f64,
    opened: f64,
    objective: f64,
}

impl Acc {
    fn mean(&self, total: f64) -> Option<f64> {
        (self.seeds > 0).then(|| total / self.seeds as f64)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub struct Report {
    pub summary: String,
    /// `(file stem, csv)` for each figure table.
    pub figures: Vec<(String, String)>,
}

/// Seed-averaged metrics per `(case, level)` plus wide tables laid out like the
/// published figures: one row per penetration level, one column per case.
pub fn build(plan: &ExperimentPlan, sweep: &SweepResult) -> Report {
    let case_order: Vec<&str> = plan.cases.iter().map(|c| c.name.as_str()).collect();
    let mut acc: BTreeMap<(usize, i64), Acc> = BTreeMap::new();
    for cell in &sweep.cells {
        let Some(case) = case_order.iter().position(|&n| n == cell.case) else { continue };
        let a = acc.entry((case, level_key(cell.level))).or_default();
        match &cell.metrics {
            Some(m) => {
                a.seeds += 1;
                a.shed += m.load_shed_fraction;
                a.unmet += m.unmet_battery_fraction;
                a.opened += m.opened_stations as f64;
                a.objective += m.objective;
            }
            None => a.failed += 1,
        }
    }

    let mut summary = String::from("case,level,seeds,failed,load_shed_frac,unmet_frac,opened,objective\n");
    for (&(case, level), a) in &acc {
        let _ = writeln!(
            summary,
            "{},{:.1},{},{},{},{},{},{}",
            case_order[case],
            level as f64 / 10.0,
            a.seeds,
            a.failed,
            fmt_opt(a.mean(a.shed)),
            fmt_opt(a.mean(a.unmet)),
            fmt_opt(a.mean(a.opened)),
            fmt_opt(a.mean(a.objective)),
        );
    }

    let mut levels: Vec<i64> = acc.keys().map(|&(_, l)| l).collect();
    levels.sort_unstable();
    levels.dedup();
    let is_ge = |k: &CaseKind| matches!(k, CaseKind::Ge { .. });
    let metrics: [(&str, fn(&Acc) -> Option<f64>); 3] = [
        ("shed", |a| a.mean(a.shed)),
        ("unmet", |a| a.mean(a.unmet)),
        ("opened", |a| a.mean(a.opened)),
    ];
    let mut figures = Vec::new();
    for (group, want_ge) in [("ge", true), ("v2g", false)] {
        let cases: Vec<usize> = (0..plan.cases.len()).filter(|&c| is_ge(&plan.cases[c].kind) == want_ge).collect();
        if cases.is_empty() {
            continue;
        }
        for (metric, get) in metrics {
            let mut csv = String::from("level");
            for &c in &cases {
                let _ = write!(csv, ",{}", case_order[c]);
            }
            csv.push('\n');
            for &l in &levels {
                let _ = write!(csv, "{:.1}", l as f64 / 10.0);
                for &c in &cases {
                    let _ = write!(csv, ",{}", fmt_opt(acc.get(&(c, l)).and_then(get)));
                }
                csv.push('\n');
            }
            figures.push((format!("{group}_{metric}"), csv));
        }
    }
    Report { summary, figures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use v2g_core::experiments::{Case, CellResult, Metrics};

    fn cell(case: &str, level: f64, seed: u64, shed: f64) -> CellResult {
        CellResult {
            case: case.into(),
            level,
            seed,
            status: None,
            metrics: Some(Metrics { load_shed_fraction: shed, unmet_battery_fraction: 0.0, opened_stations: 2, objective: 1.0 }),
            gap: Some(0.0),
            nodes: 1,
            wall_ms: 0,
            error: None,
        }
    }

    #[test]
    fn seeds_are_averaged_and_groups_split() {
        let plan = ExperimentPlan {
            cases: vec![
                Case { name: "GE-1".into(), kind: CaseKind::Ge { shed_multiplier: 1.0, budget: Some(0) } },
                Case { name: "V2G-2".into(), kind: CaseKind::V2gBudget { budget: Some(2) } },
            ],
            ..ExperimentPlan::default()
        };
        let sweep = SweepResult {
            cells: vec![cell("GE-1", 0.1, 1, 0.2), cell("GE-1", 0.1, 2, 0.4), cell("V2G-2", 0.1, 1, 0.5)],
        };
        let r = build(&plan, &sweep);
        let lines: Vec<&str> = r.summary.lines().collect();
        assert_eq!(lines[1], "GE-1,0.1,2,0,0.30000000000000004,0,2,1");
        let names: Vec<&str> = r.figures.iter().map(|f| f.0.as_str()).collect();
        assert_eq!(names, ["ge_shed", "ge_unmet", "ge_opened", "v2g_shed", "v2g_unmet", "v2g_opened"]);
        assert_eq!(r.figures[3].1, "level,V2G-2\n0.1,0.5\n");
    }
}
