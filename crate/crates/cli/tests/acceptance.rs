//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! `SPLITCOUNT_LONG=1` enables the hour-long finch table run.
//! `SPLITCOUNT_STRICT=1` turns any FAIL into a nonzero exit status.

use std::collections::{HashMap, HashSet};
use std::process::Command;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use splitcount::caprecap::{
    cap_recap, cap_recap_counts, draw_final_batches, extended_cap_recap, relative_error, BatchConfig,
    CapRecapError, CapRecapResult, EcapConfig,
};
use splitcount::oracle::{self, OracleBudget};
use splitcount::sat::random_3sat;
use splitcount::{
    run_splitting, BranchChoice, CountingModel, DegreeInstance, SplitConfig, TableInstance,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { verdict: if pass { Verdict::Pass } else { Verdict::Fail }, detail }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn variance(v: &[f64]) -> f64 {
    mean_std(v).1.powi(2)
}

fn exact_f64(x: splitcount::bigcount::BigUint) -> f64 {
    x.to_string().parse().unwrap()
}

/// Runs `runs` splitting runs with seeds `0..runs`.
fn split_runs<M: CountingModel>(model: &M, n: usize, rho: f64, runs: u64) -> Vec<(f64, usize)> {
    (0..runs)
        .map(|seed| {
            let cfg = SplitConfig { sample_size: n, rho, seed, ..Default::default() };
            let r = run_splitting(model, &cfg).expect("splitting run");
            (r.estimate(), r.iterations)
        })
        .collect()
}

fn table_criterion(r: Vec<u32>, c: Vec<u32>, n: usize, exact: f64, tol: f64, re_max: Option<f64>, t_range: Option<(usize, usize)>) -> Outcome {
    let inst = TableInstance::new(r, c, BranchChoice::Auto).unwrap();
    let runs = split_runs(&inst, n, 0.5, 10);
    let est: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let its: Vec<usize> = runs.iter().map(|r| r.1).collect();
    let (mean, _) = mean_std(&est);
    let re = relative_error(&est).unwrap();
    let dev = (mean - exact).abs() / exact;
    let mut pass = dev <= tol;
    if let Some(m) = re_max {
        pass &= re <= m;
    }
    if let Some((lo, hi)) = t_range {
        pass &= its.iter().all(|&t| (lo..=hi).contains(&t));
    }
    check(pass, format!("mean {mean:.4e} (dev {:.2}%), RE {re:.4}, T {its:?}", dev * 100.0))
}

fn c1_small_graph() -> Outcome {
    let mut d = vec![5, 6];
    d.extend([1; 11]);
    let inst = DegreeInstance::new(d).unwrap();
    let exact = exact_f64(oracle::exact_count_graphs(&inst, OracleBudget::default()).unwrap());
    let est: Vec<f64> = split_runs(&inst, 50_000, 0.5, 10).iter().map(|r| r.0).collect();
    let (mean, _) = mean_std(&est);
    let re = relative_error(&est).unwrap();
    let dev = (mean - exact).abs() / exact;
    check(
        exact == 7392.0 && dev <= 0.05 && re <= 0.06,
        format!("exact {exact}, mean {mean:.1} (dev {:.2}% <= 5%), RE {re:.4} (<= 0.06)", dev * 100.0),
    )
}

fn c2_all_twos() -> Outcome {
    table_criterion(vec![2; 12], vec![2; 12], 50_000, 2.19595e16, 0.15, Some(0.12), Some((6, 9)))
}

fn c3_finch() -> Outcome {
    if std::env::var("SPLITCOUNT_LONG").as_deref() != Ok("1") {
        return Outcome { verdict: Verdict::Skip, detail: "set SPLITCOUNT_LONG=1 (about 10 min)".into() };
    }
    let r = vec![14, 13, 14, 10, 12, 2, 10, 1, 10, 11, 6, 2];
    let c = vec![3, 3, 10, 9, 9, 7, 8, 9, 7, 8, 2, 9, 3, 6, 8, 2, 2];
    table_criterion(r, c, 200_000, 6.71491e16, 0.20, None, None)
}

fn c4_sat_sweep() -> Outcome {
    let mut master = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = Vec::new();
    while instances.len() < 20 {
        let n = master.random_range(10..=16);
        let m = master.random_range(20..=60);
        let inst = random_3sat(n, m, &mut master);
        let k = exact_f64(oracle::exact_count_sat(&inst, OracleBudget::default()).unwrap());
        if k >= 1.0 {
            instances.push((inst, k));
        }
    }
    let mut hits = 0;
    let mut misses = Vec::new();
    for (i, (inst, k)) in instances.iter().enumerate() {
        let est: Vec<f64> = split_runs(inst, 10_000, 0.2, 10).iter().map(|r| r.0).collect();
        let (mean, std) = mean_std(&est);
        let se = std / 10f64.sqrt();
        if (mean - k).abs() <= 3.0 * se || (mean - k).abs() <= 1e-9 * k {
            hits += 1;
        } else {
            misses.push(format!("#{i} n={} m={} K={k} mean={mean:.2} se={se:.2}", inst.n_vars(), inst.n_clauses()));
        }
    }
    check(hits >= 18, format!("{hits}/20 within 3 SE (need 18) {}", misses.join("; ")))
}

fn c5_chapman_urn() -> Outcome {
    let (m, n1, n2, reps) = (100_000usize, 5_000usize, 5_000usize, 1_000u64);
    let res: Vec<CapRecapResult> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i);
            let a: HashSet<usize> = index::sample(&mut rng, m, n1).into_iter().collect();
            let r = index::sample(&mut rng, m, n2).into_iter().filter(|x| a.contains(x)).count();
            match cap_recap_counts(n1, n2, r) {
                Ok(x) | Err(CapRecapError::ZeroOverlap(x)) => x,
                Err(e) => panic!("{e}"),
            }
        })
        .collect();
    let est: Vec<f64> = res.iter().map(|r| r.chapman_estimate).collect();
    let (mean, _) = mean_std(&est);
    let bias = (mean - m as f64).abs() / m as f64;
    let emp = variance(&est);
    let formula = res.iter().map(|r| r.chapman_variance).sum::<f64>() / res.len() as f64;
    let ratio = formula / emp;
    check(
        bias <= 0.02 && (0.5..=2.0).contains(&ratio),
        format!("bias {:.3}% (<= 2%), variance formula / empirical = {ratio:.3}", bias * 100.0),
    )
}

fn c6_variance_dominance() -> Outcome {
    let (inst, k) = (0..)
        .find_map(|s| {
            let inst = random_3sat(20, 30, &mut ChaCha8Rng::seed_from_u64(600 + s));
            let k = exact_f64(oracle::exact_count_sat(&inst, OracleBudget::default()).unwrap());
            (1e4..=1e5).contains(&k).then_some((inst, k))
        })
        .unwrap();
    // Effort is the number of sampled states. A batch draw counts as one sample even though
    // its chain runs `sweeps` Gibbs sweeps; the sweep totals are reported alongside.
    let (n_climb, rho) = (1_000, 0.1);
    let mut cap = Vec::new();
    let mut cap_effort = Vec::new();
    let mut cap_sweeps = Vec::new();
    let mut levels = Vec::new();
    for seed in 0..10 {
        let cfg = SplitConfig { sample_size: n_climb, rho, seed, ..Default::default() };
        let run = run_splitting(&inst, &cfg).unwrap();
        let b = BatchConfig { n1: 20_000, n2: 20_000, chain_length: 1, sweeps: 5, seed };
        let (b1, b2) = draw_final_batches(&inst, &run.final_states, &b).unwrap();
        cap.push(cap_recap(&inst, &b1, &b2).unwrap().chapman_estimate);
        cap_effort.push((run.sampled_states + b.n1 + b.n2) as f64);
        cap_sweeps.push((run.sampled_states + b.sweep_cost()) as f64);
        levels.push(run.iterations as f64);
    }
    let effort = cap_effort.iter().sum::<f64>() / 10.0;
    let n_split = (effort / (levels.iter().sum::<f64>() / 10.0)).round() as usize;
    let mut split = Vec::new();
    let mut split_effort = Vec::new();
    for seed in 100..110 {
        let cfg = SplitConfig { sample_size: n_split, rho, seed, ..Default::default() };
        let run = run_splitting(&inst, &cfg).unwrap();
        split.push(run.estimate());
        split_effort.push(run.sampled_states as f64);
    }
    let s_effort = split_effort.iter().sum::<f64>() / 10.0;
    let (vc, vs) = (variance(&cap), variance(&split));
    check(
        vc <= vs,
        format!(
            "K={k}, samples cap {effort:.0} vs split {s_effort:.0} (N={n_split}), cap sweeps {:.0}; var cap {vc:.4e} <= var split {vs:.4e}; means {:.0} / {:.0}",
            cap_sweeps.iter().sum::<f64>() / 10.0,
            mean_std(&cap).0,
            mean_std(&split).0
        ),
    )
}

fn c7_ecap() -> Outcome {
    let (inst, k) = (0..)
        .find_map(|s| {
            let inst = random_3sat(26, 28, &mut ChaCha8Rng::seed_from_u64(700 + s));
            let k = exact_f64(oracle::exact_count_sat(&inst, OracleBudget::default()).unwrap());
            (1e6..=1e7).contains(&k).then_some((inst, k))
        })
        .unwrap();
    let cfg = SplitConfig { sample_size: 10_000, rho: 0.1, seed: 1, ..Default::default() };
    let run = run_splitting(&inst, &cfg).unwrap();
    let ecfg = EcapConfig { batches: BatchConfig { n1: 10_000, n2: 10_000, seed: 1, ..Default::default() }, ..Default::default() };
    let r = match extended_cap_recap(&inst, &run.final_states, &ecfg) {
        Ok(r) => r,
        Err(e) => return check(false, format!("ecap failed: {e}")),
    };
    let identity = r.inner.chapman_estimate.ln() - r.c_hat_aux.ln();
    let id_err = (r.log_estimate - identity).abs();
    let dev = (r.estimate() - k).abs() / k;
    check(
        id_err <= 1e-12 && dev <= 0.25,
        format!(
            "K={k}, split {:.3e}, tau {}, c_hat {:.3e}, inner {:.3e}, ecap {:.3e} (dev {:.1}% <= 25%), identity error {id_err:.1e}",
            run.estimate(),
            r.tau,
            r.c_hat_aux,
            r.inner.chapman_estimate,
            r.estimate(),
            dev * 100.0
        ),
    )
}

fn c8_cli_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let degrees = concat!(env!("CARGO_MANIFEST_DIR"), "/data/degrees_5_6_1x11.txt");
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4", "1", "4"].iter().enumerate() {
        let path = dir.path().join(format!("r{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_splitcount"))
            .args(["count", "graph", "--degrees", degrees, "--samples", "5000", "--rho", "0.5", "--runs", "3"])
            .args(["--seed", "42", "--format", "json", "--threads", threads, "--report"])
            .arg(&path)
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return check(false, format!("invocation {i} exited with {status}"));
        }
        reports.push(std::fs::read(&path).unwrap());
    }
    let same = reports.iter().all(|r| r == &reports[0]);
    check(same, format!("4 invocations (threads 1,4,1,4), {} bytes each, identical: {same}", reports[0].len()))
}

fn chi2_levels<M: CountingModel>(model: &M, space: &[M::State], thresholds: &[i64], seed: u64) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &t in thresholds {
        let level: Vec<&M::State> = space.iter().filter(|s| model.score(s) >= t).collect();
        let idx: HashMap<Vec<u8>, usize> = level.iter().enumerate().map(|(i, s)| (model.canonical_key(s), i)).collect();
        let mut counts = vec![0usize; level.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
        let draws = 100 * level.len();
        for _ in 0..draws {
            let mut s = level[rng.random_range(0..level.len())].clone();
            model.gibbs_sweep(&mut s, t, &mut rng);
            counts[idx[&model.canonical_key(&s)]] += 1;
        }
        let e = draws as f64 / level.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let crit = ChiSquared::new((level.len() - 1) as f64).unwrap().inverse_cdf(0.99);
        ok &= level.len() >= 2 && level.len() <= 4096 && chi2 < crit;
        parts.push(format!("{t}:{}st {chi2:.0}/{crit:.0}", level.len()));
    }
    (ok, parts.join(" "))
}

fn c9_stationarity() -> Outcome {
    let sat = random_3sat(10, 30, &mut ChaCha8Rng::seed_from_u64(9));
    let sat_space: Vec<_> = (0u32..1 << 10)
        .map(|x| sat.assignment((0..10).map(|i| x >> i & 1 == 1).collect()))
        .collect();
    let m = sat.target_score();
    let (a, da) = chi2_levels(&sat, &sat_space, &[m - 2, m - 1, m], 1);

    let graph = DegreeInstance::new(vec![2, 2, 2, 1, 3]).unwrap();
    let mut graph_space = Vec::new();
    for mask in 0u32..1 << graph.n_slots() {
        if mask.count_ones() as usize == graph.edge_target() {
            let slots = (0..graph.n_slots() as u32).filter(|&i| mask >> i & 1 == 1).collect();
            graph_space.push(graph.state_from_slots(slots));
        }
    }
    let (b, db) = chi2_levels(&graph, &graph_space, &[-4, -2, 0], 2);

    let table = TableInstance::new(vec![2; 4], vec![2; 4], BranchChoice::Column).unwrap();
    let table_space: Vec<_> = (0u32..1 << 16)
        .filter_map(|x| {
            let rows: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| x >> (4 * i + j) & 1 == 1).collect()).collect();
            table.state_from_matrix(&rows)
        })
        .collect();
    let (c, dc) = chi2_levels(&table, &table_space, &[-4, -2, 0], 3);
    check(a && b && c, format!("chi2/crit(0.99) sat [{da}] graph [{db}] table [{dc}]"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("small graph d=(5,6,1x11) against 7392", c1_small_graph),
        ("12x12 table with all margins 2", c2_all_twos),
        ("12x17 finch presence table", c3_finch),
        ("oracle sweep over 20 random 3-SAT instances", c4_sat_sweep),
        ("Chapman urn calibration", c5_chapman_urn),
        ("capture-recapture variance dominance", c6_variance_dominance),
        ("extended capture-recapture identity and accuracy", c7_ecap),
        ("CLI report determinism", c8_cli_determinism),
        ("Gibbs stationarity, 3 levels per model", c9_stationarity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|x| x == &id) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{tag} [{id}] {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), out.detail);
    }
    println!("acceptance: {failed} failing criteria");
    if failed > 0 && std::env::var("SPLITCOUNT_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
