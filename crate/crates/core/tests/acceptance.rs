//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use pairflow::cohomology::{basic_h2_dimension, SpectralBasis};
use pairflow::gallery::builtin::{builtin, mutations, BUILTIN_NAMES, EXTRA_NAMES};
use pairflow::gallery::{report, run, Command, RunFlags};
use pairflow::rank::FoliationSpec;
use pairflow::sample::{effective_points_per_axis, Grid, Sampling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const IDENTITY_TOL: f64 = 1e-10;
/// Identity grids use 9 points per axis up to this many points in total.
const IDENTITY_POINTS: usize = 60_000;
const REEB_TOL: f64 = 1e-9;
const PROJECTION_TOL: f64 = 1e-8;
const PULLBACK_TOL: f64 = 1e-6;
const CONVERGENCE_RATIO: f64 = 12.0;
const GRAY_TOL: f64 = 1e-6;
const PERIOD_TOL: f64 = 1e-9;
/// Relative residual of the Ghys obstruction, fixed by the invariant-complex
/// computation in the moser integration tests.
const GHYS_RESIDUAL: f64 = 1.0;
const DRIFT_TOL: f64 = 1e-8;

struct Line {
    pass: bool,
    text: String,
}

fn line(pass: bool, text: impl Into<String>) -> Line {
    Line { pass, text: text.into() }
}

struct Run {
    json: String,
    value: Value,
    elapsed: Duration,
}

fn task<'a>(r: &'a Run, op: &str) -> Vec<&'a Value> {
    r.value["tasks"].as_array().unwrap().iter().filter(|t| t["op"] == op).collect()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn run_all(name: &str) -> Run {
    let s = builtin(name).unwrap();
    let start = Instant::now();
    let rep = run(&s, Command::All, &RunFlags::default()).unwrap();
    let elapsed = start.elapsed();
    let json = report::to_json(&rep);
    let value = serde_json::from_str(&json).unwrap();
    Run { json, value, elapsed }
}

fn identities() -> Line {
    let start = Instant::now();
    let mut worst = IdentityResiduals::default();
    let mut forms = 0;
    let mut grids = Vec::new();
    for (mi, name) in SHIPPED_MODELS.iter().enumerate() {
        let m = model(name);
        let k = effective_points_per_axis(9, m.dim, IDENTITY_POINTS);
        grids.push(format!("{k}^{}", m.dim));
        let s = Sampling::with_points(Grid::new(&m.periods, k).points().collect(), vec![0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0x1d3 + mi as u64);
        let mut prev = random_form(&m, 1, &mut rng);
        for _ in 0..50 {
            let p = rng.gen_range(0..m.dim);
            let a = random_form(&m, p, &mut rng);
            let x = random_field(&m, &mut rng);
            let b = if prev.degree() + p <= m.dim { prev } else { random_form(&m, 1.min(m.dim - p), &mut rng) };
            worst.merge(&identity_residuals(&a, &b, &x, &s));
            prev = a;
            forms += 1;
        }
        worst.duality = worst.duality.max(duality_residual(&m, &s));
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        worst.max() <= IDENTITY_TOL && secs < 30.0,
        format!(
            "identities on {} grids, {forms} forms: d^2 {:.1e}, graded {:.1e}, leibniz {:.1e}, cartan {:.1e}, duality {:.1e}; {secs:.1}s",
            grids.join("/"),
            worst.d_squared,
            worst.graded_commutativity,
            worst.leibniz,
            worst.cartan,
            worst.duality
        ),
    )
}

fn validation(runs: &BTreeMap<&str, Run>) -> Line {
    let valid = BUILTIN_NAMES
        .iter()
        .filter(|n| task(&runs[*n], "validate")[0]["outcome"] == "pass")
        .count();
    let mut rejected = 0;
    let mut bad = Vec::new();
    let muts = mutations();
    for s in &muts {
        let r = run(s, Command::Validate, &RunFlags::default()).unwrap();
        if r.matched {
            rejected += 1;
        } else {
            bad.push(s.name().to_string());
        }
    }
    line(
        valid == BUILTIN_NAMES.len() && rejected == muts.len() && muts.len() == 16,
        format!(
            "{valid}/{} builtins valid, {rejected}/{} mutations rejected on their condition{}",
            BUILTIN_NAMES.len(),
            muts.len(),
            if bad.is_empty() { String::new() } else { format!(" (wrong: {})", bad.join(", ")) }
        ),
    )
}

fn reeb(runs: &BTreeMap<&str, Run>) -> Line {
    let mut worst = 0.0f64;
    let mut solved = 0;
    let mut projections = 0;
    let mut proj_err = 0.0f64;
    let mut commuting = Vec::new();
    for (name, r) in runs {
        for t in task(r, "reeb") {
            let d = &t["detail"];
            if d.is_null() {
                continue;
            }
            solved += 1;
            worst = worst.max(f(&d["max_residual"]));
            if let Some(p) = d["projection"].as_object() {
                if p["holds"] == true {
                    projections += 1;
                }
                proj_err = proj_err.max(f(&p["max_error"]));
            }
            if let Some(c) = d["commutation"].as_object() {
                commuting.push((*name, c["commuting"] == true, c["agrees"] == true));
            }
        }
    }
    let product = commuting.iter().any(|&(n, c, a)| n == "t6-cc-structure" && c && a);
    let perturbed = commuting.iter().any(|&(n, c, a)| n == "t4-cc-perturbed" && !c && a);
    line(
        worst <= REEB_TOL && product && perturbed && projections >= 3 && proj_err <= PROJECTION_TOL,
        format!(
            "{solved} scenarios, max residual {worst:.1e}; commuting product {product}, non-commuting perturbed {perturbed}; projection on {projections} scenarios, error {proj_err:.1e}"
        ),
    )
}

fn moser_detail(r: &Run) -> &Value {
    &task(r, "moser")[0]["detail"]
}

fn moser(runs: &BTreeMap<&str, Run>) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["t4-exact", "suspension-hamiltonian"] {
        let r = &runs[name];
        let d = moser_detail(r);
        let v = &d["verification"];
        let err = f(&v["pullback_error"]);
        let ratio = f(&d["convergence"]["ratio"]);
        let seeds = v["seeds"].as_u64().unwrap_or(0);
        let steps = v["t_steps"].as_u64().unwrap_or(0);
        let secs = r.elapsed.as_secs_f64();
        pass &= err <= PULLBACK_TOL && ratio >= CONVERGENCE_RATIO && seeds >= 100 && steps >= 1000 && secs < 120.0;
        parts.push(format!(
            "{name}: pullback {err:.1e} ({seeds} seeds, {steps} steps), halving ratio {ratio:.1}, {secs:.1}s"
        ));
    }
    line(pass, parts.join("; "))
}

fn gray(runs: &BTreeMap<&str, Run>) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["t4-contact-pair", "t5-cs-structure", "t6-cc-structure"] {
        let v = &moser_detail(&runs[name])["verification"];
        let (prop, fm) = (f(&v["proportionality_residual"]), f(&v["factor_mismatch"]));
        pass &= prop <= GRAY_TOL && fm <= GRAY_TOL;
        parts.push(format!("{name}: proportionality {prop:.1e}, factor mismatch {fm:.1e}"));
    }
    line(pass, parts.join("; "))
}

fn necessity(runs: &BTreeMap<&str, Run>) -> Line {
    let g = &runs["ghys-nil"];
    let variation = task(g, "periods").iter().map(|t| f(&t["detail"]["variation"])).fold(0.0, f64::max);
    let entries = task(g, "primitive")[0]["detail"]["entries"].as_array().unwrap().clone();
    let orders: Vec<u64> = entries.iter().filter_map(|e| e["order"].as_u64()).collect();
    let min_res = entries.iter().map(|e| f(&e["residual"])).fold(f64::INFINITY, f64::min);
    let two_orders = orders.iter().any(|&o| o == 4) && orders.iter().any(|&o| o == 8);
    let ghys_fail = task(g, "necessity")[0]["outcome"] == "fail";
    let exact_pass = task(&runs["t4-exact"], "necessity")[0]["outcome"] == "pass";
    line(
        variation <= PERIOD_TOL && two_orders && min_res >= GHYS_RESIDUAL - 1e-9 && ghys_fail && exact_pass,
        format!(
            "ghys periods vary by {variation:.1e}, primitive residual {min_res:.6} at orders 4 and 8 (c = {GHYS_RESIDUAL}), necessity fails; t4-exact necessity passes {exact_pass}"
        ),
    )
}

fn basic_cohomology(runs: &BTreeMap<&str, Run>) -> Line {
    let t = task(&runs["t4-exact"], "basic_h2")[0];
    let (lo, hi) = (
        t["detail"]["low"]["dim"].as_u64().unwrap_or(0),
        t["detail"]["high"]["dim"].as_u64().unwrap_or(0),
    );
    let g = builtin("ghys-nil").unwrap();
    let spec = FoliationSpec::FrameSpan(vec![0, 3]);
    let mut dims = Vec::new();
    let mut grows = true;
    for n in [2usize, 3, 4] {
        let d = |order| basic_h2_dimension(&SpectralBasis::new(&g.model, &spec, order).unwrap()).unwrap().dim;
        let (a, b) = (d(n), d(2 * n));
        grows &= b > a;
        dims.push(format!("{a}->{b}"));
    }
    line(
        lo == 1 && hi == 1 && grows,
        format!("T^4 fiber H^2 = {lo} at N, {hi} at 2N; ghys dimensions N->2N {}", dims.join(", ")),
    )
}

fn drift(runs: &BTreeMap<&str, Run>) -> Line {
    let r = &runs["fol-drift"];
    let nec = task(r, "necessity")[0];
    let mos = task(r, "moser")[0];
    let d = f(&mos["detail"]["drift"]);
    let pass = nec["outcome"] == "inapplicable" && mos["outcome"] == "inapplicable" && d > DRIFT_TOL;
    line(
        pass,
        format!(
            "kernel drift {d:.2e}; necessity {}, moser {}",
            nec["outcome"].as_str().unwrap_or("?"),
            mos["outcome"].as_str().unwrap_or("?")
        ),
    )
}

fn determinism(runs: &BTreeMap<&str, Run>) -> Line {
    let mut same = 0;
    let mut differ = Vec::new();
    for name in BUILTIN_NAMES {
        if run_all(name).json == runs[name].json {
            same += 1;
        } else {
            differ.push(name);
        }
    }
    line(
        differ.is_empty(),
        format!(
            "{same}/{} builtin reports byte-identical across two runs{}",
            BUILTIN_NAMES.len(),
            if differ.is_empty() { String::new() } else { format!(" (differ: {})", differ.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let mut lines = vec![identities()];
    let runs: BTreeMap<&str, Run> = BUILTIN_NAMES
        .iter()
        .chain(EXTRA_NAMES.iter())
        .map(|n| (*n, run_all(n)))
        .collect();
    let mut mismatched: Vec<&str> = runs.iter().filter(|(_, r)| r.value["matched"] != true).map(|(n, _)| *n).collect();
    mismatched.sort();
    lines.push(validation(&runs));
    lines.push(reeb(&runs));
    lines.push(moser(&runs));
    lines.push(gray(&runs));
    lines.push(necessity(&runs));
    lines.push(basic_cohomology(&runs));
    lines.push(drift(&runs));
    lines.push(determinism(&runs));
    let mut failed = 0;
    for (i, l) in lines.iter().enumerate() {
        println!("criterion {}: {} | {}", i + 1, if l.pass { "PASS" } else { "FAIL" }, l.text);
        failed += usize::from(!l.pass);
    }
    if mismatched.is_empty() {
        println!("scenario annotations: all {} scenarios matched", runs.len());
    } else {
        println!("scenario annotations: mismatched in {}", mismatched.join(", "));
    }
    if failed == 0 && mismatched.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
