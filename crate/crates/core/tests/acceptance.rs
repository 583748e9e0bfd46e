//! End-to-end acceptance criteria. Each criterion runs against an
//! independent oracle where one exists, and prints one PASS/FAIL line.

use rand::seq::SliceRandom;
use rand::Rng;
use stable_lottery::combos;
use stable_lottery::gen::{cyclic_example, pav_lower_bound, random_approval, PavFamilyParams};
use stable_lottery::model::{capture_count, violation_ratio, Committee, Instance, Lottery, Voter};
use stable_lottery::rng::stream;
use stable_lottery::rounding::dependent_round;
use stable_lottery::rules::{pav_greedy, stable_k3};
use stable_lottery::solver::{mwu_solve, SolverConfig};
use stable_lottery::verify::{
    exists_stable_committee, is_stable_committee, is_stable_lottery_exact, lemma1_check, lemma5_check,
    poisson_binomial_cdf, search_stable_existence, worst_blocking, ProfileEnumeration,
};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `Pr[X < eta]` by summing over all `2^ℓ` outcomes.
fn brute_cdf_below(probs: &[f64], eta: usize) -> f64 {
    (0u32..1 << probs.len())
        .filter(|mask| (mask.count_ones() as usize) < eta)
        .map(|mask| {
            probs
                .iter()
                .enumerate()
                .map(|(i, p)| if mask >> i & 1 == 1 { *p } else { 1.0 - p })
                .product::<f64>()
        })
        .sum()
}

fn random_probs<R: Rng>(rng: &mut R, max_len: usize) -> Vec<f64> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| 1.0 - rng.gen::<f64>()).collect()
}

fn example_impossibility() -> Outcome {
    let inst = cyclic_example();
    ensure(combos::of_size(6, 3).count() == 20, || "expected 20 committees".into())?;
    ensure(combos::up_to(6, 3).count() == 41, || "expected 41 attackers".into())?;
    ensure(exists_stable_committee(&inst).unwrap().is_none(), || "found a stable committee".into())?;
    // Independent recount: every committee has some blocker.
    for c in combos::of_size(6, 3) {
        let blocked = combos::up_to(6, 3).any(|a| 3 * capture_count(&inst, &c, &a) >= 6 * a.len() as u64);
        ensure(blocked, || format!("{c} is unblocked"))?;
    }
    Ok("20 committees, 41 attackers, none stable".into())
}

fn example_solvable() -> Outcome {
    let inst = cyclic_example();
    let out = mwu_solve(&inst, &SolverConfig::new(0.1, 1, 42)).unwrap();
    ensure(out.certified, || format!("not certified, ratio {}", out.report.ratio))?;
    let worst = (0..6)
        .map(|i| violation_ratio(&inst, &out.lottery, &Committee::new([i])))
        .fold(0.0, f64::max);
    ensure(worst <= 1.1, || format!("singleton ratio {worst}"))?;
    let report = worst_blocking(&inst, &out.lottery, 1).unwrap();
    ensure(report.holds_at(0.1), || format!("verify ratio {}", report.ratio))?;
    Ok(format!("worst singleton ratio {worst:.4} after {} rounds", out.rounds))
}

fn pav_family() -> Outcome {
    let mut details = Vec::new();
    for (p, expected) in [(8usize, 1.0), (16, 1.5), (24, 2.0)] {
        let start = Instant::now();
        let (inst, labels) = pav_lower_bound(PavFamilyParams::new(p)).unwrap();
        let greedy = pav_greedy(&inst).unwrap();
        let abc = Committee::new(labels.a.iter().chain(&labels.b).chain(&labels.c).copied());
        ensure(greedy == abc, || format!("P={p}: greedy {greedy} differs from A∪B∪C"))?;
        let bd = Committee::new(labels.b.iter().chain(&labels.d).copied());
        let v = capture_count(&inst, &greedy, &bd);
        ensure(2 * v == inst.n(), || format!("P={p}: V = {v}, n = {}", inst.n()))?;
        let k = inst.k() as u64;
        // K·V / (n·|B∪D|) = K / (2P) = 1/2 + P/16, compared as integers
        let (num, den) = (k * v, inst.n() * bd.len() as u64);
        ensure(num * 2 * p as u64 == den * k, || format!("P={p}: ratio {num}/{den} is not K/2P"))?;
        ensure(16 * k == 8 * 2 * p as u64 + 2 * (p * p) as u64, || format!("P={p}: K/2P ≠ 1/2 + P/16"))?;
        let ratio = violation_ratio(&inst, &Lottery::point_mass(greedy), &bd);
        ensure(ratio == expected, || format!("P={p}: ratio {ratio}"))?;
        ensure(start.elapsed() < Duration::from_secs(10), || format!("P={p} over 10 s"))?;
        details.push(format!("P={p}: {ratio}"));
    }
    Ok(details.join(", "))
}

fn k3_random() -> Outcome {
    let mut rng = stream(2024, 7);
    for trial in 0..1000u64 {
        let m = rng.gen_range(3..=8);
        let n = rng.gen_range(1..=12);
        let density = rng.gen_range(0.15..0.7);
        let inst = random_approval(m, n, 3, density, trial).unwrap();
        let c = stable_k3(&inst).unwrap();
        ensure(c.len() == 3, || format!("trial {trial}: size {}", c.len()))?;
        ensure(is_stable_committee(&inst, &c, 3).unwrap(), || format!("trial {trial}: {c} is blocked"))?;
    }
    Ok("1000/1000 stable".into())
}

fn lemma5() -> Outcome {
    let mut rng = stream(5, 11);
    let (mut checks, mut worst_err) = (0, 0.0f64);
    for trial in 0..200 {
        let probs = random_probs(&mut rng, 20);
        for eta in 1..=probs.len() {
            let c = lemma5_check(&probs, eta).unwrap();
            ensure(c.holds && c.lhs < c.rhs, || format!("trial {trial}, η={eta}: {} ≥ {}", c.lhs, c.rhs))?;
            if probs.len() <= 14 {
                let err = (poisson_binomial_cdf(&probs, eta).unwrap() - brute_cdf_below(&probs, eta)).abs();
                worst_err = worst_err.max(err);
            }
            checks += 1;
        }
    }
    ensure(worst_err <= 1e-12, || format!("dynamic programme off by {worst_err:e}"))?;
    Ok(format!("{checks} thresholds hold; max deviation from enumeration {worst_err:.1e}"))
}

fn lemma1() -> Outcome {
    let mut rng = stream(6, 12);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let probs = random_probs(&mut rng, 12);
        let mu: f64 = probs.iter().sum();
        let beta = 1.0 - rng.gen::<f64>();
        let raw: Vec<f64> = (0..probs.len() + 2).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut y: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let ey: f64 = y.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let target = beta * mu * (1.0 - 1e-9);
        if ey > target {
            let keep = target / ey;
            y.iter_mut().for_each(|p| *p *= keep);
            y[0] += 1.0 - keep;
        }
        let c = lemma1_check(&probs, beta, &y).unwrap();
        let oracle: f64 = y.iter().enumerate().map(|(eta, p)| p * brute_cdf_below(&probs, eta)).sum();
        ensure((c.lhs - oracle).abs() <= 1e-12, || format!("trial {trial}: {} vs enumeration {oracle}", c.lhs))?;
        ensure(c.holds && oracle < beta, || format!("trial {trial}: Pr[X<Y] = {oracle} ≥ β = {beta}"))?;
        worst = worst.max(oracle / beta);
    }
    Ok(format!("200/200 hold; worst Pr[X<Y]/β = {worst:.4}"))
}

fn rounding_properties() -> Outcome {
    const SAMPLES: usize = 100_000;
    let (m, k) = (10usize, 4usize);
    let mut gen = stream(7, 13);
    let mut rng = stream(7, 14);
    let mut worst_z = 0.0f64;
    for trial in 0..20 {
        let alpha = loop {
            let raw: Vec<f64> = (0..m).map(|_| gen.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let a: Vec<f64> = raw.iter().map(|r| r * k as f64 / total).collect();
            if a.iter().all(|x| *x <= 1.0) {
                break a;
            }
        };
        let mut freq = vec![0usize; m];
        let mut pair = vec![0usize; m * m];
        for _ in 0..SAMPLES {
            let c = dependent_round(&alpha, &mut rng).unwrap();
            assert_eq!(c.len(), k, "trial {trial}: committee {c} has the wrong size");
            for i in c.iter() {
                freq[i] += 1;
                for j in c.iter() {
                    pair[i * m + j] += 1;
                }
            }
        }
        for i in 0..m {
            let f = freq[i] as f64 / SAMPLES as f64;
            let sd = (alpha[i] * (1.0 - alpha[i]) / SAMPLES as f64).sqrt();
            ensure((f - alpha[i]).abs() <= 5.0 * sd, || format!("trial {trial}: freq_{i} {f} vs α {}", alpha[i]))?;
            worst_z = worst_z.max((f - alpha[i]).abs() / sd);
            for j in 0..m {
                if i == j {
                    continue;
                }
                let joint = pair[i * m + j] as f64 / SAMPLES as f64;
                let bound = alpha[i] * alpha[j] + 5.0 / (SAMPLES as f64).sqrt();
                ensure(joint <= bound, || format!("trial {trial}: E[X{i}X{j}] = {joint} > {bound}"))?;
            }
        }
    }
    Ok(format!("2,000,000 samples; worst marginal z-score {worst_z:.2}"))
}

fn existence_search() -> Outcome {
    let summary = search_stable_existence(3, 4, ProfileEnumeration::AllMatrices).unwrap();
    let expected: u64 = (1..=3u32)
        .flat_map(|m| (1..=4u32).map(move |n| (1u64 << (m * n)) * m as u64))
        .sum();
    ensure(summary.instances == expected, || format!("{} instances, expected {expected}", summary.instances))?;
    ensure(summary.counterexamples.is_empty(), || {
        format!("{} instances without a stable committee", summary.counterexamples.len())
    })?;
    Ok(format!("{} (matrix, K) pairs, all admit a stable committee", summary.instances))
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..m).permutations(m).collect()
}

/// Nondecreasing index sequences of length `n` over `0..base`.
fn multisets(base: usize, n: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..base).combinations_with_replacement(n).collect()
}

fn ranking_equivalence() -> Outcome {
    let weightings: [&[u64]; 6] = [&[1], &[1, 1], &[1, 2], &[2, 1], &[1, 1, 1], &[1, 2, 3]];
    let (mut committees, mut lotteries, mut instances) = (0u64, 0u64, 0u64);
    for m in 1..=4 {
        let perms = permutations(m);
        for n in 1..=4 {
            for profile in multisets(perms.len(), n) {
                let voters: Vec<Voter> = profile.iter().map(|&p| Voter::ranking(perms[p].clone(), 1).unwrap()).collect();
                for k in 1..=m {
                    let inst = Instance::new(m, k, voters.clone()).unwrap();
                    instances += 1;
                    let all: Vec<Committee> = combos::of_size(m, k).collect();
                    for c in &all {
                        let one = is_stable_committee(&inst, c, 1).unwrap();
                        let full = is_stable_committee(&inst, c, k).unwrap();
                        ensure(one == full, || format!("m={m} n={n} K={k} {c}: 1-stable {one}, K-stable {full}"))?;
                        committees += 1;
                    }
                    for size in 1..=3.min(all.len()) {
                        for support in combos::of_size(all.len(), size) {
                            for w in weightings.iter().filter(|w| w.len() == size) {
                                let entries: Vec<(Committee, u64)> =
                                    support.iter().zip(w.iter()).map(|(i, w)| (all[i].clone(), *w)).collect();
                                let one = is_stable_lottery_exact(&inst, &entries, 1).unwrap();
                                let full = is_stable_lottery_exact(&inst, &entries, k).unwrap();
                                ensure(one == full, || format!("m={m} n={n} K={k} {entries:?}: {one} vs {full}"))?;
                                lotteries += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{instances} instances, {committees} committees, {lotteries} lotteries agree"))
}

fn mixed_solver() -> Outcome {
    let mut rng = stream(10, 15);
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let m = rng.gen_range(3..=6);
        let k = rng.gen_range(1..=3.min(m - 1));
        let n = rng.gen_range(3..=8);
        let voters: Vec<Voter> = (0..n)
            .map(|v| {
                // alternate so every instance mixes both ballot types
                if v % 2 == 0 {
                    let approves: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
                    Voter::approval(m, approves, rng.gen_range(1..=3)).unwrap()
                } else {
                    let mut order: Vec<usize> = (0..m).collect();
                    order.shuffle(&mut rng);
                    Voter::ranking(order, 1).unwrap()
                }
            })
            .collect();
        let inst = Instance::new(m, k, voters).unwrap();
        let out = mwu_solve(&inst, &SolverConfig::new(0.1, k, trial)).unwrap();
        ensure(out.certified, || format!("trial {trial}: not certified, ratio {}", out.report.ratio))?;
        let brute = combos::up_to(m, k)
            .map(|a| violation_ratio(&inst, &out.lottery, &a))
            .fold(0.0, f64::max);
        ensure(brute <= 1.1, || format!("trial {trial}: exhaustive ratio {brute}"))?;
        worst = worst.max(brute);
    }
    Ok(format!("50/50 certified; worst exhaustive ratio {worst:.4}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("1 cyclic example has no stable committee", 1, example_impossibility),
        ("2 cyclic example admits a certified lottery", 10, example_solvable),
        ("3 sequential PAV lower-bound family", 30, pav_family),
        ("4 K=3 construction on random instances", 60, k3_random),
        ("5 Poisson-binomial lower tail", 5, lemma5),
        ("6 probability matching bound", 5, lemma1),
        ("7 dependent rounding properties", 60, rounding_properties),
        ("8 exhaustive existence search", 120, existence_search),
        ("9 ranking 1-stability equals K-stability", 60, ranking_equivalence),
        ("10 solver on mixed ballots", 120, mixed_solver),
    ];
    let mut failed = Vec::new();
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed.as_secs_f64() < limit as f64 {
                Ok(detail)
            } else {
                Err(format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
            }
        });
        let line = match &result {
            Ok(detail) => format!("PASS  {name} ({:.2} s): {detail}\n", elapsed.as_secs_f64()),
            Err(why) => format!("FAIL  {name} ({:.2} s): {why}\n", elapsed.as_secs_f64()),
        };
        // Bypass the harness's output capture so the summary always shows.
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if result.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
