//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mdrd_core::prob::binary_entropy;
use mdrd_core::scalable::total_rate::bss_source;
use mdrd_core::scalable::{min_total_rate, rd_function, ScalableInstance, SearchOptions};
use mdrd_core::suites::{
    bss_suite, egc_suite, elimination_suite, frl_suite, identity_suite, polymatroid_suite, strategy_suite, SuiteReport,
};
use serde_json::Value;

const SEED: u64 = 20240;

struct Verdict {
    pass: bool,
    detail: String,
}

fn suite(r: SuiteReport, elapsed: Duration, limit: Option<Duration>) -> Verdict {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let mut detail = format!("{}/{} cases", r.passed, r.cases);
    for (k, v) in &r.metrics {
        detail.push_str(&format!(", {k} {v:.3e}"));
    }
    detail.push_str(&format!(", {:.1}s", elapsed.as_secs_f64()));
    if let Some(l) = limit {
        detail.push_str(&format!(" (limit {}s)", l.as_secs()));
    }
    if let Some(f) = r.failures.first() {
        detail.push_str(&format!(", first failure: {f}"));
    }
    Verdict { pass: r.passes() && in_time, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn c1() -> Verdict {
    let (r, t) = timed(|| frl_suite(SEED, 500));
    suite(r, t, Some(Duration::from_secs(30)))
}

fn c2() -> Verdict {
    let (r, t) = timed(|| polymatroid_suite(SEED, 200));
    suite(r, t, Some(Duration::from_secs(60)))
}

fn c3() -> Verdict {
    let (r, t) = timed(|| egc_suite(SEED, 100));
    suite(r, t, None)
}

fn c4() -> Verdict {
    let (r, t) = timed(|| elimination_suite(SEED, 100, 20));
    suite(r, t, None)
}

fn c5() -> Verdict {
    let (r, t) = timed(|| identity_suite(SEED, 100));
    suite(r, t, None)
}

fn c6() -> Verdict {
    let (r, t) = timed(|| bss_suite(SEED, 0.05, Some(64)));
    suite(r, t, Some(Duration::from_secs(300)))
}

fn c7() -> Verdict {
    let (src, d) = bss_source();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for i in 1..=9 {
        let target = 0.05 * i as f64;
        match rd_function(&src, &d, target) {
            Ok(p) => worst = worst.max((p.rate - (1.0 - binary_entropy(target))).abs()),
            Err(e) => errors.push(format!("D = {target}: {e}")),
        }
    }
    Verdict { pass: errors.is_empty() && worst <= 1e-4, detail: format!("worst gap {worst:.3e} bits {errors:?}") }
}

fn c8() -> Verdict {
    let want = 1.0 - binary_entropy(0.1);
    let run = || -> mdrd_core::Result<f64> {
        let (src, d) = bss_source();
        let r1 = rd_function(&src, &d, 0.3)?.rate;
        let inst = ScalableInstance::bss(r1, 0.3, 0.1)?;
        Ok(min_total_rate(&inst, &SearchOptions { seed: SEED, ..SearchOptions::default() })?.rate)
    };
    match run() {
        Ok(rate) => Verdict {
            pass: (rate - want).abs() <= 5e-3,
            detail: format!("rate {rate:.6} vs {want:.6}, gap {:.3e}", (rate - want).abs()),
        },
        Err(e) => Verdict { pass: false, detail: e.to_string() },
    }
}

fn c9() -> Verdict {
    let (r, t) = timed(|| strategy_suite(SEED, 50));
    suite(r, t, None)
}

fn results_payload(args: &[&str]) -> Result<String, String> {
    let out = mdrd_cli::run(args.iter().map(|s| s.to_string()));
    let v: Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
    if out.code != 0 {
        return Err(format!("{args:?} exited {}: {}", out.code, out.stderr.trim()));
    }
    Ok(v["results"].to_string())
}

fn c10() -> Verdict {
    let seed = SEED.to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["verify", "--suite", "frl"],
        vec!["verify", "--suite", "polymatroid"],
        vec!["verify", "--suite", "equivalence"],
        vec!["verify", "--suite", "bss", "--grid", "0.05", "--general"],
        vec!["verify", "--suite", "strategy"],
        vec!["region", "optimize", "--family", "zb", "--weights", "1,1", "--distortions", "{\"1\":0.3,\"12\":0.1}"],
        vec!["scalable", "d2star", "--D1", "0.3", "--D12", "0.1", "--general"],
    ];
    let mut problems = Vec::new();
    for r in &runs {
        let mut args = r.clone();
        args.extend(["--seed", seed.as_str(), "--restarts", "8"]);
        match (results_payload(&args), results_payload(&args)) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => problems.push(format!("{} payloads differ", r[..2].join(" "))),
            (Err(e), _) | (_, Err(e)) => problems.push(e),
        }
    }
    Verdict {
        pass: problems.is_empty(),
        detail: format!("{} commands rerun, {problems:?}", runs.len()),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("FRL suite", c1),
        ("contra-polymatroid suite", c2),
        ("EGC corners to EGC*", c3),
        ("top-layer elimination", c4),
        ("weighted-sum identity", c5),
        ("binary D2* grid and spot cases", c6),
        ("binary R(D)", c7),
        ("scalable total rate", c8),
        ("Shannon strategies", c9),
        ("CLI determinism", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, name, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
