//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::collections::BTreeSet;
use std::time::Instant;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phylomix::ancestry::AncestryGraph;
use phylomix::cna::{self, CnaInstanceData, Proportions};
use phylomix::enumerate::{enumerate, noisy_enumerate};
use phylomix::model::CloneTree;
use phylomix::oracle::{brute_enumerate, subset_sum_feasible, subset_sum_instance};
use phylomix::rational::Rational;
use phylomix::sim::{self, simulate_instance, SimulationConfig};
use phylomix::usage::{compute_usage, mix};

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

/// 1. Oracle equivalence on 100 seeded instances with n ≤ 4.
#[test]
fn criterion_1_oracle_equivalence() {
    let t0 = Instant::now();
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 3);
        let m = 1 + (seed as usize % 3);
        let cfg = SimulationConfig::new(n, m, seed).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        let g = AncestryGraph::cladistic(&inst.tensor, &inst.state_trees).unwrap();
        let fast: BTreeSet<CloneTree> = enumerate(&g, &inst.tensor, &inst.state_trees, None)
            .unwrap()
            .solutions
            .into_iter()
            .map(|s| s.tree)
            .collect();
        let slow: BTreeSet<CloneTree> = brute_enumerate(&inst.tensor, &inst.state_trees, None)
            .unwrap()
            .solutions
            .into_iter()
            .map(|s| s.tree)
            .collect();
        assert_eq!(fast, slow, "seed {seed}: enumerate disagrees with brute force");
        checked += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "1 (oracle equivalence)",
        checked == 100 && secs < 120.0,
        &format!("{checked}/100 instances set-equal in {secs:.1}s (budget 120s)"),
    );
}

/// 2. Ground-truth recovery on 60 instances, n ∈ {4,5,6}, m ∈ {2,5,10}.
#[test]
fn criterion_2_ground_truth_recovery() {
    let ns = [4usize, 5, 6];
    let ms = [2usize, 5, 10];
    let mut hits = 0usize;
    let mut worst = 0.0f64;
    for i in 0..60u64 {
        let n = ns[i as usize % 3];
        let m = ms[(i as usize / 3) % 3];
        let cfg = SimulationConfig::new(n, m, 1000 + i).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        let t0 = Instant::now();
        let g = AncestryGraph::cladistic(&inst.tensor, &inst.state_trees).unwrap();
        let sols = enumerate(&g, &inst.tensor, &inst.state_trees, None).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        worst = worst.max(secs);
        assert!(secs < 60.0, "instance {i} took {secs:.1}s");
        if sols.contains_tree(&inst.tree) {
            hits += 1;
        }
    }
    report(
        "2 (ground-truth recovery)",
        hits == 60,
        &format!("true tree recovered in {hits}/60 instances, slowest {worst:.2}s (budget 60s each)"),
    );
}

/// 3. Ambiguity trend: n = 6, median count at m = 10 at most 5% of m = 2.
#[test]
fn criterion_3_ambiguity_trend() {
    let t0 = Instant::now();
    let count_for = |m: usize| -> Vec<usize> {
        let mut counts: Vec<usize> = (0..20u64)
            .map(|seed| {
                let cfg = SimulationConfig::new(6, m, seed).unwrap();
                let inst = simulate_instance(&cfg).unwrap();
                let g = AncestryGraph::cladistic(&inst.tensor, &inst.state_trees).unwrap();
                enumerate(&g, &inst.tensor, &inst.state_trees, None).unwrap().len()
            })
            .collect();
        counts.sort_unstable();
        counts
    };
    let c2 = count_for(2);
    let c10 = count_for(10);
    // Doubled medians keep the comparison in integers: median×2 = c[9]+c[10].
    let med2_x2 = c2[9] + c2[10];
    let med10_x2 = c10[9] + c10[10];
    let ok = med10_x2 * 20 <= med2_x2;
    let secs = t0.elapsed().as_secs_f64();
    report(
        "3 (ambiguity trend)",
        ok && secs < 1800.0,
        &format!(
            "median m=10 is {}/2 vs m=2 {}/2 (5% bound), {secs:.1}s (budget 1800s)",
            med10_x2, med2_x2
        ),
    );
}

/// 4. Table golden tests: all 13 state trees over a 50-point admissible grid.
#[test]
fn criterion_4_table_golden() {
    let t0 = Instant::now();
    let rat = |num: i64, den: i64| Rational::new(num.into(), den.into());
    let mut points = 0usize;
    for id in 0..13usize {
        let class = cna::catalog()[id].class;
        // Five proportion settings per tree × ten h points = 50.
        for step in 0..5i64 {
            let share = rat(step, 5);
            let mu = match class {
                cna::CnaClass::Neutral => Proportions::neutral(),
                cna::CnaClass::Loh => Proportions {
                    mu0: Rational::one() - &share,
                    loh: share.clone(),
                    scd: Rational::zero(),
                    sca: Rational::zero(),
                },
                cna::CnaClass::Scd => Proportions {
                    mu0: Rational::one() - &share,
                    loh: Rational::zero(),
                    scd: share.clone(),
                    sca: Rational::zero(),
                },
                cna::CnaClass::Sca => Proportions {
                    mu0: Rational::one() - &share,
                    loh: Rational::zero(),
                    scd: Rational::zero(),
                    sca: share.clone(),
                },
            };
            let (lo, hi) = cna::vaf_interval(id, &mu).unwrap();
            for step_h in 0..10i64 {
                let h = &lo + (&hi - &lo) * rat(step_h, 9);
                let f = cna::derive_frequencies(id, &h, &mu).unwrap();
                let sum: Rational = f.iter().sum();
                assert!(sum.is_one(), "S{id}: row sum");
                assert!(f.iter().all(|x| !x.is_negative()), "S{id}: admissible negativity");
                assert_eq!(cna::vaf_from_frequencies(&f).unwrap(), h, "S{id}: round trip");
                points += 1;
            }
            // Interval membership coincides with nonnegativity: cross the
            // boundary by a sliver on both sides.
            let eps = rat(1, 997);
            for h in [&lo - &eps, &hi + &eps] {
                if h.is_negative() || h > Rational::one() {
                    continue;
                }
                let f = cna::derive_frequencies(id, &h, &mu).unwrap();
                assert!(
                    f.iter().any(|x| x.is_negative()),
                    "S{id}: h outside the interval must force a negative frequency"
                );
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "4 (table golden tests)",
        points == 13 * 50 && secs < 10.0,
        &format!("{points} grid points verified, {secs:.2}s (budget 10s)"),
    );
}

/// 5. Exact round trips on 100 random valid instances.
#[test]
fn criterion_5_round_trips() {
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 4);
        let m = 1 + (seed as usize % 3);
        let cfg = SimulationConfig::new(n, m, 5000 + seed).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        // A: compute_usage(mix(T,U), T) = U.
        let f = mix(&inst.tree, &inst.usage).unwrap();
        let u2 = compute_usage(&f, &inst.tree, &inst.state_trees).unwrap();
        assert_eq!(u2.rows(), inst.usage.rows(), "seed {seed}: usage round trip");
        // B: mix(T, compute_usage(F,T)) = F.
        let f2 = mix(&inst.tree, &u2).unwrap();
        assert_eq!(f2, inst.tensor, "seed {seed}: tensor round trip");
        checked += 1;
    }
    report("5 (round trips)", checked == 100, &format!("{checked}/100 exact"));
}

/// 6. Noisy containment: with coverage 1000, whenever the true frequencies
/// lie inside the derived intervals the true tree must be a subtree of a
/// reported maximal state-complete tree.
#[test]
fn criterion_6_noisy_containment() {
    let t0 = Instant::now();
    let mut restricted = 0usize;
    let mut contained = 0usize;
    for seed in 0..20u64 {
        let cfg = SimulationConfig::new(4, 5, seed).unwrap().with_coverage(1000.0).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        let loci = sim::measurements(&inst).unwrap();
        let (instances, _dropped) = cna::combinations(&loci, true).unwrap();
        let Some(ci) = instances.iter().find(|i| i.combination == inst.catalog_ids) else {
            continue;
        };
        let CnaInstanceData::Noisy(intervals) = &ci.data else {
            panic!("noisy combinations must carry intervals")
        };
        let mut inside = true;
        for p in 0..inst.tensor.sample_count() {
            for c in 0..inst.tensor.character_count() {
                for i in 0..inst.tensor.state_counts()[c] {
                    let v = inst.tensor.get(p, c, i);
                    if v < intervals.lower(p, c, i) || v > intervals.upper(p, c, i) {
                        inside = false;
                    }
                }
            }
        }
        if !inside {
            continue;
        }
        restricted += 1;
        let g = AncestryGraph::noisy(intervals, &ci.state_trees).unwrap();
        let sols = noisy_enumerate(&g, intervals, &ci.state_trees, Some(100_000)).unwrap();
        if sols.solutions.iter().any(|s| inst.tree.is_subtree_of(&s.tree)) {
            contained += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "6 (noisy containment)",
        restricted > 0 && contained == restricted && secs < 600.0,
        &format!("{contained}/{restricted} restricted seeds contained the truth, {secs:.1}s (budget 600s)"),
    );
}

/// 7. SUBSET SUM gadget agrees with the DP solver on 50 random inputs.
#[test]
fn criterion_7_subset_sum() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut agreements = 0usize;
    let mut feasible_seen = 0usize;
    for _ in 0..50 {
        let t = rng.random_range(2..=8usize);
        // Distinct positive values.
        let mut values = BTreeSet::new();
        while values.len() < t {
            values.insert(rng.random_range(1..=25u64));
        }
        let b: Vec<u64> = values.into_iter().collect();
        let e: u64 = b.iter().sum();
        let d = rng.random_range(1..e);
        let (f, s) = subset_sum_instance(&b, d).unwrap();
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, None).unwrap();
        let dp = subset_sum_feasible(&b, d);
        assert_eq!(!sols.is_empty(), dp, "B={b:?} d={d}");
        agreements += 1;
        if dp {
            feasible_seen += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "7 (subset-sum gadget)",
        agreements == 50 && secs < 60.0,
        &format!("50/50 agreement ({feasible_seen} feasible), {secs:.1}s (budget 60s)"),
    );
}

/// 8. Noisy convergence: the coverage-10,000 median within 2× of the
/// error-free count and medians non-increasing as coverage rises.
#[test]
fn criterion_8_noisy_convergence() {
    let t0 = Instant::now();
    let counts_at = |coverage: Option<f64>| -> Vec<usize> {
        let mut counts: Vec<usize> = (0..10u64)
            .map(|seed| {
                let mut cfg = SimulationConfig::new(4, 5, seed).unwrap();
                if let Some(cov) = coverage {
                    cfg = cfg.with_coverage(cov).unwrap();
                }
                let inst = simulate_instance(&cfg).unwrap();
                match coverage {
                    None => {
                        let g = AncestryGraph::cladistic(&inst.tensor, &inst.state_trees)
                            .unwrap();
                        enumerate(&g, &inst.tensor, &inst.state_trees, None).unwrap().len()
                    }
                    Some(_) => {
                        let loci = sim::measurements(&inst).unwrap();
                        let (instances, _) = cna::combinations(&loci, true).unwrap();
                        let Some(ci) =
                            instances.iter().find(|i| i.combination == inst.catalog_ids)
                        else {
                            return 0;
                        };
                        let CnaInstanceData::Noisy(intervals) = &ci.data else {
                            panic!("noisy instances carry intervals")
                        };
                        let g = AncestryGraph::noisy(intervals, &ci.state_trees).unwrap();
                        let sols =
                            noisy_enumerate(&g, intervals, &ci.state_trees, Some(200_000))
                                .unwrap();
                        let max_v = sols
                            .solutions
                            .iter()
                            .map(|s| s.tree.vertex_count())
                            .max()
                            .unwrap_or(0);
                        sols.solutions
                            .iter()
                            .filter(|s| s.tree.vertex_count() == max_v)
                            .count()
                    }
                }
            })
            .collect();
        counts.sort_unstable();
        counts
    };
    let exact = counts_at(None);
    let c50 = counts_at(Some(50.0));
    let c1k = counts_at(Some(1000.0));
    let c10k = counts_at(Some(10_000.0));
    // Doubled medians: median×2 = c[4] + c[5].
    let (me, m50, m1k, m10k) =
        (exact[4] + exact[5], c50[4] + c50[5], c1k[4] + c1k[5], c10k[4] + c10k[5]);
    let within = m10k <= 2 * me && 2 * m10k >= me;
    let monotone = m50 >= m1k && m1k >= m10k;
    let secs = t0.elapsed().as_secs_f64();
    report(
        "8 (noisy convergence)",
        within && monotone,
        &format!(
            "doubled medians: exact {me}, cov50 {m50}, cov1000 {m1k}, cov10000 {m10k}; {secs:.1}s"
        ),
    );
}

/// 9. Determinism: identical seeds and flags give byte-identical output.
#[test]
fn criterion_9_determinism() {
    let base = std::env::temp_dir().join(format!("phylomix_acceptance_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let run_once = |tag: &str| -> (String, String) {
        let dir = base.join(tag);
        let sim_dir = dir.join("sim");
        let sol_dir = dir.join("sols");
        let code = phylomix::cli::run([
            "phylomix",
            "simulate",
            "--n",
            "4",
            "--m",
            "3",
            "--seed",
            "42",
            "--out-dir",
            sim_dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let code = phylomix::cli::run([
            "phylomix",
            "enumerate",
            "--input",
            sim_dir.join("measurements.tsv").to_str().unwrap(),
            "--mode",
            "exact",
            "--jobs",
            "2",
            "--out-dir",
            sol_dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let truth = std::fs::read_to_string(sim_dir.join("ground_truth.json")).unwrap();
        // Concatenate every per-combination solution file in sorted order.
        let mut names: Vec<_> = std::fs::read_dir(&sol_dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.path())
            .collect();
        names.sort();
        let mut combined = String::new();
        for dir in names {
            combined.push_str(&std::fs::read_to_string(dir.join("solutions.json")).unwrap());
        }
        (truth, combined)
    };
    let (truth_a, sols_a) = run_once("a");
    let (truth_b, sols_b) = run_once("b");
    let ok = truth_a == truth_b && sols_a == sols_b && !sols_a.is_empty();
    let _ = std::fs::remove_dir_all(&base);
    report(
        "9 (determinism)",
        ok,
        &format!("{} bytes of solution JSON byte-identical across runs", sols_a.len()),
    );
}
