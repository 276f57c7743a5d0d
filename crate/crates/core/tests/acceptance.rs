//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mixmatch::harness::ingest::{self, SourceSplit};
use mixmatch::harness::{self, ConcentrationSettings, ExperimentConfig, IngestSpec, RegretOracle};
use mixmatch::problems::{ProblemSuite, SuiteConfig};
use mixmatch::rng;
use mixmatch::sgd::{self, StepSchedule};
use mixmatch::simplex::{self, PartitionStrategy};
use mixmatch::treesearch::{self, SearchConfig};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let passed = out.passed && in_time;
    let timing = match limit {
        Some(l) => format!("{:.1}s of {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64()),
        None => format!("{:.1}s", elapsed.as_secs_f64()),
    };
    println!(
        "{} criterion {id}: {name} [{timing}] {}",
        if passed { "PASS" } else { "FAIL" },
        out.detail
    );
    passed
}

fn partition_diameter() -> Outcome {
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut cells = 0;
    for k in 2..=4usize {
        let h = 3 * (k as u32 - 1);
        let bound = simplex::diameter_bound(h, k).unwrap();
        for cell in simplex::enumerate_cells(k, h, &PartitionStrategy::LongestEdgeBisection).unwrap() {
            if cell.height() != h {
                continue;
            }
            cells += 1;
            let d = cell.diameter();
            worst = worst.max(d / bound);
            violations += usize::from(d > bound);
        }
    }
    Outcome {
        passed: violations == 0 && cells == 8 + 64 + 512,
        detail: format!("{cells} cells, {violations} over the bound, max diameter/bound {worst:.4}"),
    }
}

fn smoothness_inequality() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for config in [SuiteConfig::scalar_quadratic(), SuiteConfig::planar_quadratic()] {
        let suite = config.build().unwrap();
        let r = harness::verify_smoothness(&suite, 1000, 2024).unwrap();
        ok &= r.model_violations == 0 && r.pairs.len() == 1000;
        parts.push(format!(
            "{}: {} violations, max ratio {:.4}",
            suite.name(),
            r.model_violations,
            r.max_model_ratio
        ));
    }
    Outcome {
        passed: ok,
        detail: parts.join("; "),
    }
}

fn sgd_rate() -> Outcome {
    let suite = SuiteConfig::noisy_scalar().build().unwrap();
    let mut settings = ConcentrationSettings::new(100_000, 100_001.0, 200, 0, 31);
    settings.checkpoints = vec![1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000];
    let r = harness::verify_concentration(&suite, &settings).unwrap();
    let slope = r.median_slope(1000, 100_000).unwrap();
    let slope_ok = (-1.25..=-0.75).contains(&slope);
    let mut bound_ok = true;
    let mut decades = Vec::new();
    for c in r.checkpoints.iter().filter(|c| [1000, 10_000, 100_000].contains(&c.t)) {
        let b = c.bound.as_ref().unwrap().total;
        bound_ok &= c.p99 <= b;
        decades.push(format!("t={} p99 {:.3e} <= {:.3e}", c.t, c.p99, b));
    }
    Outcome {
        passed: slope_ok && bound_ok,
        detail: format!(
            "median slope {slope:.3} (need [-1.25,-0.75], E = {:.4e}); {}",
            r.e,
            decades.join(", ")
        ),
    }
}

fn zero_noise() -> Outcome {
    let suite = SuiteConfig::zero_noise_scalar().build().unwrap();
    let c = suite.constants();
    let t = 10_000u64;
    let e = sgd::compute_e(c.kappa, t as f64 + 1.0).unwrap();
    let schedule = StepSchedule::theoretical(c.mu, e).unwrap();
    let alpha = suite.alpha_star().unwrap().clone();
    let w_star = suite.optimal_model(&alpha).unwrap().value;
    let w0 = vec![0.0; suite.model_dim()];
    let d0sq: f64 = w_star.iter().map(|x| x * x).sum();
    let mut stream = rng::stream(4);
    let run = sgd::run_sgd(&suite, &alpha, &w0, t, &schedule, &mut stream, Some(&w_star)).unwrap();
    let dsq = run.trace.unwrap().dsq;
    let mut increases = 0;
    for s in 0..t as usize {
        if sgd::step_size(s as u64, &schedule) <= 1.0 && dsq[s + 1] > dsq[s] * (1.0 + 1e-12) {
            increases += 1;
        }
    }
    let target = e * d0sq / (t as f64 + e);
    let last = dsq[t as usize];
    Outcome {
        passed: increases == 0 && last <= target * (1.0 + 1e-12),
        detail: format!("{increases} increases; d_T^2 = {last:.6e} vs E d0^2/(T+E) = {target:.6e}"),
    }
}

fn budget_accounting() -> Outcome {
    let suites: Vec<ProblemSuite> = [SuiteConfig::scalar_quadratic(), SuiteConfig::planar_quadratic(), SuiteConfig::latent_quadratic()]
        .iter()
        .map(|c| c.build().unwrap())
        .collect();
    let mut stream = rng::stream(55);
    let mut bad = Vec::new();
    for i in 0..50 {
        let suite = &suites[stream.random_range(0..suites.len())];
        let lambda = stream.random_range(10..=300u64);
        let budget = stream.random_range(2 * lambda..=20_000);
        let seed: u64 = stream.random();
        let eta = [0.005, 0.02, 0.1][stream.random_range(0..3)];
        let mut config = SearchConfig::new(suite, budget, lambda, StepSchedule::practical(eta).unwrap(), seed);
        if stream.random_bool(0.5) {
            config.strategy = PartitionStrategy::CoordinateHalving { seed };
        }
        let before = suite.training_draws();
        let r = treesearch::mix_and_match(suite, &config).unwrap();
        let audit_sum: u64 = r.audit.iter().map(|a| a.steps).sum();
        let tally = suite.training_draws() - before;
        if r.total_steps > budget + 2 * lambda || r.oracle_draws != audit_sum || tally != audit_sum || r.total_steps != audit_sum {
            bad.push(i);
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: format!("50 configurations, failing: {bad:?}"),
    }
}

fn experiment(algorithms: &[&str], budgets: &[u64]) -> harness::ExperimentOutput {
    let config = ExperimentConfig {
        suite: "builtin:latent".into(),
        algorithms: algorithms.iter().map(|s| s.to_string()).collect(),
        budgets: budgets.to_vec(),
        replicas: 20,
        seed: 2026,
        node_steps: 500,
        schedule: "practical:0.01".into(),
        strategy: "bisect".into(),
        final_pool: "deepest".into(),
    };
    let suite = SuiteConfig::latent_quadratic().build().unwrap();
    harness::run_experiment(&config, &suite).unwrap()
}

fn median(v: &[f64]) -> f64 {
    harness::regret::quantile(v, 0.5).unwrap()
}

fn regret_ordering() -> Outcome {
    let out = experiment(&["mixmatch", "genie", "uniform"], &[200_000]);
    let [m, g, u] = ["mixmatch", "genie", "uniform"].map(|a| out.report(a, 200_000).unwrap());
    let (mm, gm, um) = (median(&m.regrets), median(&g.regrets), median(&u.regrets));
    let wins = m.regrets.iter().zip(&u.regrets).filter(|(a, b)| a < b).count();
    let order = gm <= mm && mm <= um;
    let factor = mm <= 2.0 * gm;
    let model = |r: &harness::RegretReport| median(&r.model_regrets);
    Outcome {
        passed: order && wins >= 15 && factor,
        detail: format!(
            "median regret genie {gm:.4e}, mixmatch {mm:.4e}, uniform {um:.4e}; genie<=mm<=uniform {order}; \
             mm<uniform in {wins}/20; mm<=2*genie {factor} | model regret medians genie {:.4e}, mixmatch {:.4e}, uniform {:.4e}",
            model(g),
            model(m),
            model(u)
        ),
    }
}

fn regret_trend() -> Outcome {
    let budgets = [20_000u64, 50_000, 200_000];
    let out = experiment(&["mixmatch"], &budgets);
    let reports: Vec<_> = budgets.iter().map(|&b| out.report("mixmatch", b).unwrap()).collect();
    let medians: Vec<f64> = reports.iter().map(|r| median(&r.regrets)).collect();
    let model: Vec<f64> = reports.iter().map(|r| median(&r.model_regrets)).collect();
    let nonincreasing = medians.windows(2).all(|w| w[1] <= w[0]);
    let heights_ok = (0..20).all(|i| reports.windows(2).all(|w| w[1].heights[i] >= w[0].heights[i]));
    let h: Vec<String> = reports.iter().map(|r| format!("{}", r.median_height().unwrap())).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ");
    Outcome {
        passed: nonincreasing && heights_ok,
        detail: format!(
            "median regret [{}] nonincreasing {nonincreasing}; h nondecreasing in every seed {heights_ok} \
             (median h {}) | model regret medians [{}]",
            fmt(&medians),
            h.join("/"),
            fmt(&model)
        ),
    }
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_mixmatch"))
        .args(args)
        .status()
        .expect("the binary runs")
        .code()
        .unwrap_or(-1)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data.csv");
    ingest::write_fixture_csv(&data, &[("a", 300), ("b", 200)], 3).unwrap();
    let spec = IngestSpec {
        path: data,
        source_column: "source".into(),
        label_column: "y".into(),
        features: vec![],
        one_hot: vec![],
        seed: 8,
        loss: "quadratic".into(),
        regularization: 0.0,
        split: vec![split("a", [60.0, 20.0, 20.0, 0.0]), split("b", [50.0, 30.0, 10.0, 10.0])],
    };
    std::fs::write(root.join("ingest.toml"), spec.to_toml()).unwrap();
    let experiment = ExperimentConfig {
        suite: "builtin:planar".into(),
        algorithms: vec!["mixmatch".into(), "genie".into(), "validation".into()],
        budgets: vec![3000, 6000],
        replicas: 4,
        seed: 5,
        node_steps: 150,
        schedule: "practical:0.05".into(),
        strategy: "coordhalf".into(),
        final_pool: "deepest".into(),
    };
    std::fs::write(root.join("experiment.toml"), experiment.to_toml()).unwrap();
    let ingest_spec = root.join("ingest.toml");
    let experiment_config = root.join("experiment.toml");
    let invocations: Vec<Vec<String>> = vec![
        vec!["run", "--suite", "builtin:latent", "--budget", "20000", "--node-steps", "300", "--seed", "7"],
        vec!["run", "--suite", "builtin:planar", "--budget", "8000", "--node-steps", "200", "--strategy", "coordhalf", "--schedule", "theoretical", "--seed", "1"],
        vec!["baseline", "--kind", "only:2", "--suite", "builtin:planar", "--budget", "5000", "--seed", "9"],
        vec!["baseline", "--kind", "validation", "--suite", "builtin:latent", "--budget", "5000", "--seed", "9"],
        vec!["verify-sgd", "--suite", "builtin:noisy-scalar", "--t", "2000", "--replicas", "16", "--seed", "2"],
        vec!["verify-smoothness", "--suite", "builtin:latent", "--pairs", "200", "--seed", "4"],
        vec!["partition-demo", "--k", "4", "--height", "6", "--strategy", "coordhalf", "--seed", "12"],
        vec!["ingest-check", "--spec", ingest_spec.to_str().unwrap()],
        vec!["experiment", "--config", experiment_config.to_str().unwrap()],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut differing = Vec::new();
    let mut errors = Vec::new();
    for (i, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = root.join(format!("out-{i}-{rep}"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.extend(["--out", dir.to_str().unwrap()]);
            let code = run_cli(&full);
            if code != 0 {
                errors.push(format!("{} exited {code}", args[0]));
            }
            outputs.push(csv_files(&dir));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            differing.push(args[0].clone());
        }
    }
    Outcome {
        passed: differing.is_empty() && errors.is_empty(),
        detail: format!(
            "{} invocations run twice; differing {differing:?}; errors {errors:?}",
            invocations.len()
        ),
    }
}

fn split(source: &str, p: [f64; 4]) -> SourceSplit {
    SourceSplit {
        source: source.into(),
        train: p[0],
        validate: p[1],
        test: p[2],
        discard: p[3],
    }
}

fn ingestion() -> Outcome {
    // Percentages in hundredths so the expected counts use integer floors.
    let table: [(&str, usize, [u64; 4]); 3] = [
        ("FL", 14605, [4934, 16, 50, 5000]),
        ("CT", 2836, [5000, 750, 4250, 0]),
        ("OH", 6664, [225, 75, 225, 9475]),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("fixture.csv");
    let sources: Vec<(&str, usize)> = table.iter().map(|(s, n, _)| (*s, *n)).collect();
    ingest::write_fixture_csv(&data, &sources, 17).unwrap();
    let spec = IngestSpec {
        path: data,
        source_column: "source".into(),
        label_column: "y".into(),
        features: vec![],
        one_hot: vec![],
        seed: 99,
        loss: "quadratic".into(),
        regularization: 0.0,
        split: table
            .iter()
            .map(|(s, _, p)| split(s, p.map(|x| x as f64 / 100.0)))
            .collect(),
    };
    let out = harness::ingest_csv(&spec).unwrap();
    let mut mismatches = Vec::new();
    let mut covered = vec![0u8; 24_105];
    for ((name, n, p), (counts, rows)) in table.iter().zip(out.counts.iter().zip(&out.rows)) {
        let floor = |h: u64| (h * *n as u64 / 10_000) as usize;
        let expect = [floor(p[0]), floor(p[1]), floor(p[2])];
        let got = [counts.train, counts.validate, counts.test];
        let discard = n - expect.iter().sum::<usize>();
        if counts.total != *n || got != expect || counts.discard != discard {
            mismatches.push(format!("{name}: got {got:?}+{} expected {expect:?}+{discard}", counts.discard));
        }
        for &r in rows.train.iter().chain(&rows.validate).chain(&rows.test).chain(&rows.discard) {
            covered[r] += 1;
        }
    }
    let partition = covered.iter().all(|&c| c == 1);
    let summary: Vec<String> = out
        .counts
        .iter()
        .map(|c| format!("{} {}/{}/{}/{}", c.source, c.train, c.validate, c.test, c.discard))
        .collect();
    Outcome {
        passed: mismatches.is_empty() && partition && out.suite.k() == 3,
        detail: format!(
            "{}; disjoint and exhaustive {partition}; mismatches {mismatches:?}",
            summary.join(", ")
        ),
    }
}

fn main() {
    // Regret oracle warm-up keeps its one-off cost out of criterion timings.
    let latent = SuiteConfig::latent_quadratic().build().unwrap();
    RegretOracle::new(&latent).unwrap();

    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        check(1, "partition diameter bound", secs(5), partition_diameter),
        check(2, "mixture-to-optimum smoothness", secs(5), smoothness_inequality),
        check(3, "SGD rate and concentration", secs(180), sgd_rate),
        check(4, "zero-noise contraction", secs(10), zero_noise),
        check(5, "budget accounting", secs(120), budget_accounting),
        check(6, "end-to-end regret ordering", secs(600), regret_ordering),
        check(7, "regret decreases with budget", secs(900), regret_trend),
        check(8, "CLI determinism", None, determinism),
        check(9, "ingestion split protocol", None, ingestion),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
