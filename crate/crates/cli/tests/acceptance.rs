//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pgg_cli::commands::cloud::{payoff_cloud, CloudSettings};
use pgg_cli::commands::learn::{learn, EpsilonFlags, LearnSettings};
use pgg_cli::config::{ExperimentConfig, Format};
use pgg_core::enforcement::{
    check_enforcing, collusion_gain, collusion_scan, necessary_conditions, sample_enforcing,
};
use pgg_core::game::{
    Action, ClassicStrategy, MemoryOneStrategy, PublicGoodsGame, StrategyProfile,
};
use pgg_core::learning::Scenario;
use pgg_core::markov::{
    akin_marginal_sides, akin_residual, expected_payoffs, marginalize, payoff_gap,
    simulate_empirical, stationary_exact, TransitionMatrix, STATIONARY_TOLERANCE,
};
use pgg_core::seed;
use rand::Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn mixed<R: Rng>(n: usize, rng: &mut R) -> MemoryOneStrategy {
    let flat: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.05..0.95)).collect();
    MemoryOneStrategy::from_flat(&flat, rng.gen_range(0.05..0.95)).unwrap()
}

fn mixed_profile<R: Rng>(n: usize, rng: &mut R) -> StrategyProfile {
    StrategyProfile::new((0..n).map(|_| mixed(n, rng)).collect()).unwrap()
}

/// `1 < r < n` on a grid of `step`, rounded to kill accumulation error.
fn r_grid(n: usize, step: f64) -> Vec<f64> {
    let count = ((n as f64 - 1.0) / step).round() as u64;
    (1..count)
        .map(|i| ((1.0 + i as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

fn payoff_formulas() -> Verdict {
    let started = Instant::now();
    let mut mismatches = 0;
    let mut points = 0;
    for n in 2..=6usize {
        for r in r_grid(n, 0.1) {
            let game = PublicGoodsGame::new(n, r).unwrap();
            let nf = n as f64;
            for k in 0..n {
                points += 1;
                let c = game.stage_payoff(Action::Cooperate, k).unwrap();
                let d = game.stage_payoff(Action::Defect, k).unwrap();
                if c != r * (k as f64 + 1.0) / nf - 1.0 || d != r * k as f64 / nf {
                    mismatches += 1;
                }
            }
        }
    }
    let mutual = PublicGoodsGame::new(3, 2.0)
        .unwrap()
        .mutual_cooperation_payoff();
    let elapsed = started.elapsed();
    verdict(
        mismatches == 0 && mutual == 1.0 && elapsed < Duration::from_secs(1),
        format!(
            "{points} points, {mismatches} mismatches, R_c,2(n=3,r=2) = {mutual}, {elapsed:.2?}"
        ),
    )
}

fn akin_identity() -> Verdict {
    let mut rng = seed::rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = 2 + case % 3;
        let profile = mixed_profile(n, &mut rng);
        let p = TransitionMatrix::build(&profile).unwrap();
        let v = stationary_exact(&p, STATIONARY_TOLERANCE).unwrap();
        for i in 0..n {
            worst = worst.max(akin_residual(profile.seat(i), i, &v).unwrap().abs());
        }
    }
    verdict(
        worst < 1e-8,
        format!("1000 profiles, max |residual| = {worst:.3e}"),
    )
}

fn stationary_vs_simulation() -> Verdict {
    let started = Instant::now();
    let mut rng = seed::rng(3);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let profile = mixed_profile(3, &mut rng);
        let exact = stationary_exact(
            &TransitionMatrix::build(&profile).unwrap(),
            STATIONARY_TOLERANCE,
        )
        .unwrap();
        let empirical = simulate_empirical(&profile, 1_000_000, seed::split(3, case)).unwrap();
        worst = worst.max(exact.l1_distance(&empirical));
    }
    let elapsed = started.elapsed();
    verdict(
        worst < 0.02 && elapsed < Duration::from_secs(60),
        format!("20 profiles, max L1 = {worst:.4}, {elapsed:.2?}"),
    )
}

fn grouped_expressions() -> Verdict {
    let mut rng = seed::rng(4);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 2 + case % 3;
        let r = rng.gen_range(1.01..n as f64 - 0.01);
        let game = PublicGoodsGame::new(n, r).unwrap();
        let profile = mixed_profile(n, &mut rng);
        let v = stationary_exact(
            &TransitionMatrix::build(&profile).unwrap(),
            STATIONARY_TOLERANCE,
        )
        .unwrap();
        let pi = expected_payoffs(&game, &v).unwrap();
        let mutual = game.mutual_cooperation_payoff();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let u = marginalize(&v, i, j).unwrap();
                let gap = payoff_gap(&game, &u).unwrap();
                let (lhs, rhs) = akin_marginal_sides(profile.seat(i), &u).unwrap();
                worst = worst
                    .max((gap - (pi[j] - mutual)).abs())
                    .max((lhs - rhs).abs());
            }
        }
    }
    verdict(
        worst < 1e-8,
        format!("100 profiles, max deviation = {worst:.3e}"),
    )
}

fn figure_two() -> Verdict {
    let started = Instant::now();
    let settings = CloudSettings::from_config(&ExperimentConfig::default()).unwrap();
    let report = payoff_cloud(&settings).unwrap();
    let focal = report.records.iter().find(|r| r.label == "focal").unwrap();
    let red_point = focal.payoffs.iter().all(|x| (x - 1.0).abs() <= 1e-9);
    let random = report
        .records
        .iter()
        .filter(|r| r.label.parse::<u64>().is_ok())
        .count();
    verdict(
        report.violations == 0 && red_point && random == 100_000,
        format!(
            "{random} samples, {} violations, max opponent payoff {:.9}, injected (WSLS, WSLS) -> {:?}, {:.2?}",
            report.violations,
            report.max_opponent_payoff,
            focal.payoffs,
            started.elapsed()
        ),
    )
}

fn checker_grid() -> Verdict {
    let mut wsls_off = Vec::new();
    let mut gt_off = Vec::new();
    let mut repeat_off = 0;
    let mut applicability_off = 0;
    let mut points = 0;
    for n in 2..=8usize {
        let nf = n as f64;
        let wsls = ClassicStrategy::Wsls.build(n).unwrap();
        let gt = ClassicStrategy::GrimTrigger.build(n).unwrap();
        let repeat = ClassicStrategy::Repeat.build(n).unwrap();
        for r in r_grid(n, 0.05) {
            points += 1;
            let game = PublicGoodsGame::new(n, r).unwrap();
            let want_wsls = r > (nf / 2.0).max(2.0 * nf / (nf + 1.0));
            if check_enforcing(&game, &wsls).unwrap().overall != want_wsls {
                wsls_off.push(format!("n={n} r={r}"));
            }
            if check_enforcing(&game, &gt).unwrap().overall != (r > nf / 2.0) {
                gt_off.push(format!("n={n} r={r}"));
            }
            let rep = check_enforcing(&game, &repeat).unwrap();
            let second = rep.constraint(&format!("p_c[{}]", n - 2)).unwrap();
            let prop1 = necessary_conditions(&game, &repeat).unwrap()[0].holds;
            if rep.overall || second.satisfied || prop1 {
                repeat_off += 1;
            }
            if r <= nf / 2.0 {
                for s in ClassicStrategy::ALL {
                    let v = check_enforcing(&game, &s.build(n).unwrap()).unwrap();
                    if v.applicable || v.overall {
                        applicability_off += 1;
                    }
                }
            }
        }
    }
    let mut sampler_fail = 0;
    let games = [(2, 1.5), (3, 2.0), (4, 2.5), (5, 3.0), (6, 4.5)];
    for s in 0..10_000u64 {
        let (n, r) = games[(s % 5) as usize];
        let game = PublicGoodsGame::new(n, r).unwrap();
        if !check_enforcing(&game, &sample_enforcing(&game, s).unwrap())
            .unwrap()
            .overall
        {
            sampler_fail += 1;
        }
    }
    let show = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            format!("{} [{} .. {}]", v.len(), v[0], v[v.len() - 1])
        }
    };
    verdict(
        wsls_off.is_empty() && gt_off.is_empty() && repeat_off == 0 && applicability_off == 0 && sampler_fail == 0,
        format!(
            "{points} grid points; WSLS mismatches {}; GT mismatches {}; Repeat mismatches {repeat_off}; \
             applicability mismatches {applicability_off}; sampler failures {sampler_fail}/10000",
            show(&wsls_off),
            show(&gt_off)
        ),
    )
}

fn collusion() -> Verdict {
    let mut bad = 0;
    let mut checked = 0;
    for n in 2..=6usize {
        for r in r_grid(n, 0.05).into_iter().filter(|&r| 2.0 * r > n as f64) {
            let game = PublicGoodsGame::new(n, r).unwrap();
            for m in 2..=n {
                for k in 0..=m {
                    checked += 1;
                    let gain = collusion_gain(&game, m, k).unwrap().gain;
                    let zero_allowed = k == m || (m as f64 * r - n as f64).abs() < 1e-12;
                    let zero = gain.abs() <= 1e-12;
                    if gain > 1e-12 || (zero && !zero_allowed) || (!zero && k == m) {
                        bad += 1;
                    }
                }
            }
        }
    }
    let scan = collusion_scan(&PublicGoodsGame::new(4, 1.8).unwrap());
    let hit = scan
        .reports
        .iter()
        .find(|rep| rep.m == 2 && rep.k == 0)
        .unwrap();
    let positive = !scan.resistant && (hit.gain - 0.1).abs() < 1e-12;
    verdict(
        bad == 0 && positive,
        format!(
            "{checked} (n, r, m, k) cases, {bad} violations; n=4 r=1.8 (m=2, k=0) gain = {}",
            hit.gain
        ),
    )
}

fn learning(scenario: Scenario, dir: Option<&Path>) -> (u64, u64, Duration) {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        scenario: Some(scenario),
        ..Default::default()
    };
    let settings = LearnSettings::from_config(&cfg, EpsilonFlags::default()).unwrap();
    let summary = learn(&settings, dir, Format::Csv).unwrap();
    (summary.converged, settings.seeds, started.elapsed())
}

fn scenario_a() -> Verdict {
    let (ok, seeds, elapsed) = learning(Scenario::A, None);
    verdict(
        ok >= 8 && elapsed < Duration::from_secs(120),
        format!("{ok}/{seeds} seeds converged, {elapsed:.2?}"),
    )
}

fn scenario_c_and_b() -> Verdict {
    let (ok, seeds, elapsed) = learning(Scenario::C, None);
    let dir = tempfile::tempdir().unwrap();
    let (b_ok, b_seeds, _) = learning(Scenario::B, Some(dir.path()));
    let files = std::fs::read_dir(dir.path()).unwrap().count() as u64;
    verdict(
        ok >= 8 && files == b_seeds,
        format!(
            "C: {ok}/{seeds} seeds converged ({elapsed:.2?}); B: {files} trajectories written, {b_ok}/{b_seeds} flagged converged (recorded only)"
        ),
    )
}

fn cli(args: &[&str], dir: &Path) -> (i32, Vec<(String, Vec<u8>)>) {
    let status = Command::new(env!("CARGO_BIN_EXE_pgg"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    let mut files: Vec<_> = walk(dir);
    files.sort();
    (status.status.code().unwrap_or(-1), files)
}

fn walk(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push((path.display().to_string(), std::fs::read(&path).unwrap()));
        }
    }
    out
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 7] = [
        &[
            "payoff-cloud",
            "--samples",
            "3000",
            "--seed",
            "5",
            "--out",
            "out/cloud.csv",
        ],
        &[
            "payoff-cloud",
            "--samples",
            "500",
            "--seed",
            "5",
            "--format",
            "json",
            "--out",
            "out/cloud.json",
        ],
        &["region-map", "--out", "out/region.csv"],
        &["check", "--strategy", "gt", "--out", "out/check.json"],
        &[
            "learn",
            "--scenario",
            "C",
            "--seeds",
            "3",
            "--horizon",
            "20000",
            "--seed",
            "9",
            "--out",
            "out/learn",
        ],
        &[
            "collusion",
            "--n",
            "5",
            "--r",
            "2.2",
            "--out",
            "out/collusion.json",
        ],
        &[
            "collusion",
            "--n",
            "4",
            "--r",
            "1.8",
            "--format",
            "csv",
            "--out",
            "out/collusion.csv",
        ],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (code_a, files_a) = cli(args, a.path());
        let (code_b, files_b) = cli(args, b.path());
        let strip = |files: Vec<(String, Vec<u8>)>, root: &Path| -> Vec<(String, Vec<u8>)> {
            let prefix = root.display().to_string();
            files
                .into_iter()
                .map(|(p, bytes)| (p.replacen(&prefix, "", 1), bytes))
                .collect()
        };
        let same = code_a == code_b
            && !files_a.is_empty()
            && strip(files_a, a.path()) == strip(files_b, b.path());
        if !same || code_a == 2 {
            differing.push(args[0].to_string());
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} invocations re-run; differing: {:?}",
            runs.len(),
            differing
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("payoff formulas", payoff_formulas),
        ("akin identity on stationary distributions", akin_identity),
        ("stationary vs simulation", stationary_vs_simulation),
        ("grouped payoff and akin expressions", grouped_expressions),
        ("payoff cloud bound planes", figure_two),
        ("enforcement checker grid and sampler", checker_grid),
        ("collusion gains", collusion),
        ("scenario A learning", scenario_a),
        ("scenario C learning, scenario B recorded", scenario_c_and_b),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
