use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use v2g_milp::{solve_lp, solve_milp, LpProblem, LpStatus, MilpOptions, MilpProblem, MilpStatus, Sense, SimplexOptions};

fn pick(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> f64 {
    (lo + (rng.next_u64() % (hi - lo + 1) as u64) as i64) as f64
}

/// Facility-style MILP: binaries open capacity, continuous flows meet demand.
fn random_facility(seed: u64) -> MilpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (rng.next_u64() % 4) as usize;
    let demands = 1 + (rng.next_u64() % 3) as usize;
    let mut lp = LpProblem::new();
    let open: Vec<usize> = (0..n).map(|_| lp.add_column(pick(&mut rng, 5, 40), 0.0, 1.0)).collect();
    let mut flows = vec![Vec::new(); n];
    for j in 0..demands {
        let d = pick(&mut rng, 2, 9);
        let mut row = Vec::new();
        for (i, f) in flows.iter_mut().enumerate() {
            let c = lp.add_column(pick(&mut rng, 1, 6), 0.0, f64::INFINITY);
            f.push(c);
            row.push((c, 1.0));
            let _ = i;
        }
        let shortfall = lp.add_column(pick(&mut rng, 20, 60), 0.0, f64::INFINITY);
        row.push((shortfall, 1.0));
        lp.add_row(row, Sense::Eq, d);
        let _ = j;
    }
    for i in 0..n {
        let cap = pick(&mut rng, 3, 12);
        let mut row: Vec<(usize, f64)> = flows[i].iter().map(|&c| (c, 1.0)).collect();
        row.push((open[i], -cap));
        lp.add_row(row, Sense::Le, 0.0);
    }
    let mut integer = vec![false; lp.num_cols()];
    for &c in &open {
        integer[c] = true;
    }
    MilpProblem { lp, integer }
}

fn enumerate(p: &MilpProblem) -> f64 {
    let bins: Vec<usize> = (0..p.lp.num_cols()).filter(|&c| p.integer[c]).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << bins.len()) {
        let mut lp = p.lp.clone();
        for (k, &c) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            lp.col_lower[c] = v;
            lp.col_upper[c] = v;
        }
        let s = solve_lp(&lp, &SimplexOptions::default()).unwrap();
        if s.status == LpStatus::Optimal {
            best = best.min(s.objective);
        }
    }
    best
}

#[test]
fn exact_search_matches_enumeration() {
    for seed in 0..60 {
        let p = random_facility(seed);
        let opts = MilpOptions { gap_target: 1e-9, ..MilpOptions::default() };
        let sol = solve_milp(&p, &opts).unwrap();
        assert_eq!(sol.status, MilpStatus::GapReached, "seed {seed}");
        let truth = enumerate(&p);
        let obj = sol.objective.unwrap();
        assert!((obj - truth).abs() <= 1e-6 * truth.abs().max(1.0), "seed {seed}: {obj} vs {truth}");
    }
}

#[test]
fn gap_target_is_honoured_and_bound_is_valid() {
    for seed in 100..140 {
        let p = random_facility(seed);
        let sol = solve_milp(&p, &MilpOptions::default()).unwrap();
        let truth = enumerate(&p);
        let obj = sol.objective.unwrap();
        assert!(sol.gap.unwrap() <= 0.01 + 1e-12);
        assert!(sol.bound <= truth + 1e-6, "seed {seed}: bound {} above optimum {truth}", sol.bound);
        assert!(obj >= truth - 1e-6);
        assert!(p.lp.max_violation(sol.x.as_ref().unwrap()) <= 1e-6);
    }
}
