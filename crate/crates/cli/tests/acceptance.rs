//! One PASS/FAIL line per acceptance criterion, with its tolerance and
//! runtime budget.

use nanoplate_cli::config::DEFAULT_SEED;
use nanoplate_cli::verify::{self, Suite};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

fn seeded(f: fn(&mut Suite, u64)) -> impl Fn(&mut Suite) {
    move |s| f(s, DEFAULT_SEED)
}

type Group = Box<dyn Fn(&mut Suite)>;

fn run_groups(groups: &[Group]) -> Suite {
    let mut s = Suite::default();
    for g in groups {
        g(&mut s);
    }
    s
}

fn report(id: u32, title: &str, suite: &Suite, elapsed: Duration, budget: Duration) -> bool {
    let in_time = elapsed <= budget;
    let passed = in_time && suite.failures().next().is_none() && !suite.checks.is_empty();
    println!(
        "{} criterion {id:>2}: {title} ({} checks, {:.2} s of {} s)",
        if passed { "PASS" } else { "FAIL" },
        suite.checks.len(),
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    for c in &suite.checks {
        let mark = if c.passed { " " } else { "!" };
        println!("    {mark} [{}] {}: {:.3e} vs {:.3e}", c.module, c.property, c.value, c.tolerance);
    }
    passed
}

fn determinism() -> (bool, String) {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let dir = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_nanoplate"))
            .args(["verify", "--out", dir.to_str().expect("utf-8 path")])
            .output()
            .expect("verify binary runs");
        if !status.status.success() {
            return (false, format!("{run} run exited with {:?}", status.status.code()));
        }
        let read = |f: &str| std::fs::read(dir.join(f)).expect("verify output present");
        outputs.push((read("verify.csv"), read("verify.json")));
    }
    let same = outputs[0] == outputs[1];
    (same, format!("verify.csv {} bytes, verify.json {} bytes", outputs[0].0.len(), outputs[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<(u32, &str, u64, Vec<Group>)> = vec![
        (
            1,
            "tensor symmetry and closed-form contraction to 1e-12 on 100 random inputs",
            1,
            vec![Box::new(seeded(verify::tensor_algebra))],
        ),
        (
            2,
            "convexity probe positive on 20 materials and split-invariant to 1e-12",
            5,
            vec![Box::new(seeded(verify::convexity))],
        ),
        (
            3,
            "unit-disk cubics compatible and recovered to 1e-6 relative H3 at p = 4 n_el = 8",
            120,
            vec![Box::new(verify::neumann), Box::new(verify::recovery)],
        ),
        (
            4,
            "H3-seminorm rate >= p - 2 - 0.3 for exp(x1)cos(x2) at p = 5 over n_el = 4..32",
            300,
            vec![Box::new(verify::convergence)],
        ),
        (
            5,
            "stiffness kills affines to 1e-10 |K| and permuted solves agree to 1e-10",
            60,
            vec![Box::new(verify::kernel), Box::new(verify::uniqueness)],
        ),
        (
            6,
            "three integration-by-parts identities to 1e-7 on the 20-pair battery",
            10,
            vec![Box::new(seeded(verify::identities))],
        ),
        (
            7,
            "reduction gap <= 1e-6 on degree-6 polynomials and exact fifth-order coefficient",
            10,
            vec![Box::new(seeded(verify::reduction))],
        ),
        (
            8,
            "Carleman constants finite and quadrature-stable to 5% for orders 1 2 3",
            120,
            vec![Box::new(seeded(verify::carleman))],
        ),
        (
            9,
            "doubling and three-sphere certified; exact ratios to 1e-7; exponent 1/17",
            60,
            vec![Box::new(verify::doubling)],
        ),
    ];
    let mut all = true;
    for (id, title, budget, groups) in &criteria {
        let start = Instant::now();
        let suite = run_groups(groups);
        all &= report(*id, title, &suite, start.elapsed(), Duration::from_secs(*budget));
    }
    let start = Instant::now();
    let (same, detail) = determinism();
    println!(
        "{} criterion 10: repeated verify runs are byte-identical ({detail}, {:.2} s)",
        if same { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    all &= same;
    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}
