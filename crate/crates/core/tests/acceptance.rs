//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! line per criterion and exits non-zero if any fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use simulcomp::algorithms::{self, run_extended_deutsch, run_extended_grover};
use simulcomp::machine;
use simulcomp::qsim::{backward_preparation, Projector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn is_one_hot(v: &[f64], q: f64) -> bool {
    v.iter().filter(|&&x| x != 0.0).count() == 1 && v.contains(&q)
}

fn one_hot_lemma() -> Outcome {
    let mut rng = machine::seeded_rng(0x1e55);
    let (mut one_hot, mut mismatches) = (0, 0);
    for i in 0..10_000 {
        let m = rng.random_range(1..=8usize);
        let q = rng.random_range(1e-3..10.0);
        let mut v = vec![0.0; m];
        // label by construction; only the last family is classified by inspection
        let mut label = None;
        match i % 4 {
            0 => {
                v[rng.random_range(0..m)] = q;
                label = Some(true);
            }
            1 if m > 1 => {
                let hot = rng.random_range(0..m);
                let eps = q * rng.random_range(1e-6..0.5);
                v[hot] = q - eps;
                v[(hot + rng.random_range(1..m)) % m] = eps;
                label = Some(false);
            }
            2 => {
                for x in v.iter_mut() {
                    *x = rng.random_range(0.0..1.0);
                }
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x *= q / s);
                // a single entry rescaled to Q is one-hot up to rounding
                label = Some(m == 1);
            }
            _ => {
                for x in v.iter_mut() {
                    *x = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0 * q) };
                }
                let nonzero: Vec<usize> = (0..m).filter(|&j| v[j] != 0.0).collect();
                if nonzero.len() == 1 && rng.random_bool(0.5) {
                    v[nonzero[0]] = q;
                }
            }
        }
        let expect = label.unwrap_or_else(|| is_one_hot(&v, q));
        one_hot += expect as usize;
        if machine::group_is_valid(q, &v, 1e-12) != expect {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    Ok(format!("10000 vectors, {one_hot} one-hot, 0 mismatches"))
}

fn machine_soundness() -> Outcome {
    let mut rng = machine::seeded_rng(0xc1c0);
    let (mut solutions, mut unsat) = (0, 0);
    for i in 0..200 {
        let sys = common::random_system(&mut rng, 12, 8);
        let circuit = machine::build_circuit(&sys);
        let truth = common::brute_force(&sys);
        let configs = machine::enumerate_configurations(&circuit, 1.0).map_err(|e| format!("system {i}: {e}"))?;
        let mut decoded = Vec::with_capacity(configs.len());
        for c in &configs {
            let r = machine::validate_configuration(&circuit, c, 1e-12).map_err(|e| e.to_string())?;
            ensure(r.valid, || format!("system {i}: enumerated configuration invalid"))?;
            let a = machine::configuration_to_assignment(&circuit, c).map_err(|e| format!("system {i}: {e}"))?;
            decoded.push(a.bit_string(&sys).map_err(|e| e.to_string())?);
        }
        decoded.sort();
        ensure(decoded == truth, || format!("system {i}: machine {} vs brute force {}", decoded.len(), truth.len()))?;
        solutions += truth.len();
        unsat += truth.is_empty() as usize;
    }
    Ok(format!("200 systems, {solutions} solutions, {unsat} unsatisfiable, 0 mismatches"))
}

fn grover_final_state() -> Outcome {
    let run = run_extended_grover(2, 1, None).map_err(|e| e.to_string())?;
    // (1/2) sum_k |k>_K |k>_X |->_F, indices K X F big-endian
    let a = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
    let mut want = vec![0.0f64; 32];
    for k in 0..4 {
        want[(k << 3) | (k << 1)] = a;
        want[(k << 3) | (k << 1) | 1] = -a;
    }
    let got = run.final_state.amplitudes();
    let phase = (0..32).find(|&i| want[i] != 0.0).map(|i| got[i] / want[i]).unwrap();
    ensure((phase.norm() - 1.0).abs() < 1e-12, || format!("global factor {phase}"))?;
    let dev = got.iter().zip(&want).map(|(g, &w)| (g / phase - w).norm()).fold(0.0, f64::max);
    ensure(dev <= 1e-12, || format!("max deviation {dev:e}"))?;
    ensure(run.report.oracle_calls == 1, || format!("oracle_calls {}", run.report.oracle_calls))?;
    Ok(format!("max deviation {dev:.1e}, oracle_calls 1"))
}

fn deutsch_distribution() -> Outcome {
    let run = run_extended_deutsch(1).map_err(|e| e.to_string())?;
    let p = run.final_state.marginal_probabilities(&run.measured).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for k in 0..4usize {
        let (f0, f1) = (k >> 1, k & 1);
        for x in 0..2usize {
            let want = if x == f0 ^ f1 { 0.25 } else { 0.0 };
            dev = dev.max((p[(k << 1) | x] - want).abs());
        }
    }
    ensure(dev <= 1e-12, || format!("distribution deviation {dev:e}"))?;
    ensure(run.report.oracle_calls == 1, || format!("oracle_calls {}", run.report.oracle_calls))?;
    let signs: Vec<String> = run.report.sign_discrepancies.iter().map(|s| format!("k={}:{}", s.k, s.relative_sign)).collect();
    Ok(format!(
        "deviation {dev:.1e}, oracle_calls 1, sign discrepancies [{}]",
        if signs.is_empty() { "none".into() } else { signs.join(" ") }
    ))
}

fn metrics() -> Outcome {
    let tol = 1e-9;
    let grover = run_extended_grover(2, 1, None).map_err(|e| e.to_string())?;
    let deutsch = run_extended_deutsch(1).map_err(|e| e.to_string())?;
    for r in [&grover.report, &deutsch.report] {
        let name = r.algorithm.name();
        ensure((r.delta_s_nominal - 1.0).abs() <= tol, || format!("{name}: delta_s {}", r.delta_s_nominal))?;
        ensure((r.delta_r - 2.0).abs() <= tol, || format!("{name}: delta_r {}", r.delta_r))?;
        ensure((r.delta_s_nominal - r.delta_r / 2.0).abs() <= tol, || format!("{name}: half ratio"))?;
        ensure(r.delta_s_nominal <= r.delta_r + tol, || format!("{name}: bound"))?;
        let c = algorithms::check_inequality(r);
        ensure(c.bounded && c.half_ratio, || format!("{name}: library verdict {c:?}"))?;
    }
    let mut larger = Vec::new();
    for n in [4usize, 6] {
        let r = run_extended_grover(n, 1, None).map_err(|e| e.to_string())?.report;
        ensure(r.delta_s_operational <= r.delta_r + tol, || {
            format!("N={}: operational delta_s {} > delta_r {}", r.big_n, r.delta_s_operational, r.delta_r)
        })?;
        larger.push(format!("N={}: {} <= {:.6}", r.big_n, r.delta_s_operational, r.delta_r));
    }
    Ok(format!("N=4 delta_s 1, delta_r 2 for both; {}", larger.join(", ")))
}

fn backdating() -> Outcome {
    let run = run_extended_grover(2, 1, None).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..4 {
        let c = algorithms::backdate_full(&run, k).map_err(|e| e.to_string())?;
        ensure(c.pass, || format!("full k={k}: {c:?}"))?;
        worst = worst.max(c.max_deviation).max(c.forward_deviation);
    }
    for bit in 0..2 {
        for value in 0..2u8 {
            let c = algorithms::backdate_partial(&run, bit, value).map_err(|e| e.to_string())?;
            ensure(c.pass, || format!("partial bit {bit} = {value}: {c:?}"))?;
            worst = worst.max(c.max_deviation).max(c.forward_deviation);
            // K populations: 1/2 on each k with that bit, nothing else
            let x_qubit = run.x_qubits()[bit];
            let back = backward_preparation(&run.gates, &run.prep, &Projector::new(vec![x_qubit], value as u64))
                .map_err(|e| e.to_string())?;
            let pk = back.marginal_probabilities(&run.k_qubits()).map_err(|e| e.to_string())?;
            for (k, p) in pk.iter().enumerate() {
                let want = if (k >> (1 - bit)) & 1 == value as usize { 0.5 } else { 0.0 };
                ensure((p - want).abs() <= 1e-12, || format!("partial bit {bit} = {value}: p(k={k:02b}) = {p}"))?;
            }
        }
    }
    Ok(format!("4 full, 4 partial, worst deviation {worst:.1e}"))
}

fn measurement_order() -> Outcome {
    let mut parts = Vec::new();
    for n in [2, 3] {
        let run = run_extended_grover(n, 1, None).map_err(|e| e.to_string())?;
        let d = algorithms::measurement_order_deviation(&run).map_err(|e| e.to_string())?;
        ensure(d <= 1e-12, || format!("N={}: {d:e}", run.report.big_n))?;
        parts.push(format!("N={}: {d:.1e}", run.report.big_n));
    }
    Ok(parts.join(", "))
}

fn correspondence() -> Outcome {
    let first = algorithms::correspondence_check(1).map_err(|e| e.to_string())?;
    ensure(!first.pre_valid, || "pre-measurement populations validate".into())?;
    ensure((first.pre_nonlinear_residual - 0.5).abs() <= 1e-12, || format!("residual {}", first.pre_nonlinear_residual))?;
    let mut counts = [0usize; 2];
    for k in 0..1000u64 {
        let r = algorithms::correspondence_check(machine::split_seed(1, k)).map_err(|e| e.to_string())?;
        ensure(r.post_valid, || format!("trial {k}: post-measurement configuration invalid"))?;
        counts[r.outcome as usize] += 1;
    }
    let freq = [counts[0] as f64 / 1000.0, counts[1] as f64 / 1000.0];
    ensure(freq.iter().all(|f| (0.45..=0.55).contains(f)), || format!("frequencies {freq:?}"))?;
    Ok(format!("residual 0.5, outcome frequencies {:.3} / {:.3}", freq[0], freq[1]))
}

fn reproducibility() -> Outcome {
    let input = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/half_adder.txt");
    let commands: [&[&str]; 7] = [
        &["machine", "--input", input, "--samples", "1000", "--seed", "7"],
        &["machine", "--input", input, "--samples", "300", "--seed", "7", "--mode", "fast"],
        &["grover", "--n", "2", "--seed", "7", "--samples", "10"],
        &["grover", "--n", "4", "--seed", "7", "--samples", "10"],
        &["deutsch", "--seed", "7", "--samples", "10"],
        &["trajectory", "--preset", "grover", "--outcome", "1010", "--seed", "7"],
        &["correspondence", "--seed", "7", "--samples", "200"],
    ];
    for args in commands {
        let go = || {
            Command::new(env!("CARGO_BIN_EXE_simulcomp"))
                .args(args)
                .args(["--format", "json"])
                .output()
                .map_err(|e| e.to_string())
        };
        let (a, b) = (go()?, go()?);
        ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || format!("{} differs between runs", args.join(" ")))?;
    }
    Ok(format!("{} commands byte-identical", commands.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1", "one-hot lemma", Duration::from_secs(1), one_hot_lemma),
        ("2", "machine soundness and completeness", Duration::from_secs(30), machine_soundness),
        ("3", "extended Grover final state at N=4", Duration::from_secs(1), grover_final_state),
        ("4", "extended Deutsch distribution", Duration::from_secs(1), deutsch_distribution),
        ("5", "entropy metrics", Duration::from_secs(5), metrics),
        ("6", "backdating", Duration::from_secs(1), backdating),
        ("7", "measurement order", Duration::from_secs(1), measurement_order),
        ("8", "two-qubit correspondence", Duration::from_secs(2), correspondence),
        ("9", "reproducibility", Duration::from_secs(60), reproducibility),
    ];
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let t = Instant::now();
        let result = f();
        let elapsed = t.elapsed();
        let (verdict, detail) = match result {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
            Err(e) => ("FAIL", e),
        };
        failed += (verdict == "FAIL") as usize;
        println!("[{verdict}] criterion {id} {name} ({:.3} s): {detail}", elapsed.as_secs_f64());
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
