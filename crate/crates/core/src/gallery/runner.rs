//! Executes scenario tasks and compares outcomes with their annotations.

use serde::Serialize;
use serde_json::{json, Value};

use super::scenario::{Expect, PrimitiveChoice, Scenario, TaskEntry};
use crate::cohomology::{
    basic_h2_dimension, basic_primitive_at, de_rham_periods, reeb_class, SpectralBasis, DEFAULT_ORDER,
    PRIMITIVE_TOL,
};
use crate::error::{Error, Result};
use crate::moser::{
    convergence_study, integrate_isotopy, kernel_drift, moser_field, necessity_check, seed_points, verify_isotopy,
    IntegratorSettings, MoserProblem, MoserVariant, Verdict, CONSISTENCY_TOL, DRIFT_TOL, FIELD_TOL, SPLITTING_TOL,
};
use crate::rank::{validate_structure, GeometricStructure, ValidationReport};
use crate::reeb::solve_structure;
use crate::sample::Sampling;

/// Reeb residual bound.
pub const REEB_TOL: f64 = 1e-9;
/// Leafwise projection bound.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Period variation bound.
pub const PERIOD_TOL: f64 = 1e-9;
/// Pullback, proportionality and factor bound for isotopies.
pub const ISOTOPY_TOL: f64 = 1e-6;
/// Transported tangent vectors must stay tangent within this bound.
pub const FOLIATION_TOL: f64 = 1e-7;
/// Minimum error ratio for a step halving.
pub const CONVERGENCE_RATIO: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Reeb,
    Cohomology,
    Moser,
    All,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "validate" => Command::Validate,
            "reeb" => Command::Reeb,
            "cohomology" => Command::Cohomology,
            "moser" => Command::Moser,
            "all" => Command::All,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Reeb => "reeb",
            Command::Cohomology => "cohomology",
            Command::Moser => "moser",
            Command::All => "all",
        }
    }

    fn selects(self, task: &TaskEntry) -> bool {
        let group = match task {
            TaskEntry::Validate { .. } => Command::Validate,
            TaskEntry::Reeb { .. } => Command::Reeb,
            TaskEntry::Periods { .. }
            | TaskEntry::Primitive { .. }
            | TaskEntry::BasicH2 { .. }
            | TaskEntry::ReebClass { .. }
            | TaskEntry::Monodromy { .. } => Command::Cohomology,
            TaskEntry::Necessity { .. } | TaskEntry::Moser { .. } => Command::Moser,
        };
        self == Command::All || self == group
    }
}

/// Command-line overrides; `None` falls back to the scenario, then to the
/// defaults below.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunFlags {
    pub grid: Option<usize>,
    pub t_samples: Option<usize>,
    pub t_steps: Option<usize>,
    pub seeds: Option<usize>,
    pub fourier_order: Option<usize>,
    pub tol: Option<f64>,
}

/// Settings in effect for a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub grid: usize,
    pub t_samples: usize,
    pub t_steps: usize,
    pub seeds: usize,
    pub fourier_order: usize,
    pub tol: f64,
}

pub const DEFAULT_GRID: usize = 8;
pub const DEFAULT_T_SAMPLES: usize = 3;
pub const DEFAULT_SEEDS: usize = 100;

impl RunFlags {
    pub fn resolve(&self, scenario: &Scenario) -> Resolved {
        let s = &scenario.file.settings;
        let integ = IntegratorSettings::default();
        Resolved {
            grid: self.grid.or(s.grid).unwrap_or(DEFAULT_GRID),
            t_samples: self.t_samples.or(s.t_samples).unwrap_or(DEFAULT_T_SAMPLES),
            t_steps: self.t_steps.or(s.t_steps).unwrap_or(integ.t_steps),
            seeds: self.seeds.or(s.seeds).unwrap_or(DEFAULT_SEEDS),
            fourier_order: self.fourier_order.or(s.fourier_order).unwrap_or(DEFAULT_ORDER),
            tol: self.tol.unwrap_or(integ.tol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inapplicable,
    Skipped,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inapplicable => "inapplicable",
            Outcome::Skipped => "skipped",
        }
    }
}

fn matches(expect: Expect, outcome: Outcome) -> bool {
    matches!(
        (expect, outcome),
        (Expect::Pass, Outcome::Pass) | (Expect::Fail, Outcome::Fail) | (Expect::Inapplicable, Outcome::Inapplicable)
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub index: usize,
    pub op: String,
    pub expect: Expect,
    pub outcome: Outcome,
    pub matched: bool,
    pub summary: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub command: Command,
    pub settings: Resolved,
    pub tasks: Vec<TaskReport>,
    pub matched: bool,
    pub first_mismatch: Option<String>,
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    settings: Resolved,
    sampling: Sampling,
}

type TaskResult = (Outcome, String, Value);

fn outcome_of(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Computation failures are outcomes; malformed input propagates.
fn absorb(r: Result<TaskResult>) -> Result<TaskResult> {
    match r {
        Ok(x) => Ok(x),
        Err(e @ Error::Unsupported(_)) => Ok((Outcome::Inapplicable, e.to_string(), Value::Null)),
        Err(
            e @ (Error::Structure(_)
            | Error::Singular(_)
            | Error::Integration(_)
            | Error::NonConstantClass(_)
            | Error::Dimension(_)
            | Error::Eval { .. }),
        ) => Ok((Outcome::Fail, e.to_string(), Value::Null)),
        Err(e) => Err(e),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

/// Runs the tasks selected by `command`. Validation always runs first; if
/// it fails unexpectedly, downstream tasks are skipped.
pub fn run(scenario: &Scenario, command: Command, flags: &RunFlags) -> Result<RunReport> {
    let settings = flags.resolve(scenario);
    let sampling = Sampling::new(&scenario.model.periods, settings.grid, settings.t_samples);
    let ctx = Ctx {
        scenario,
        settings: settings.clone(),
        sampling,
    };
    let validation = validate_structure(&scenario.structure, &ctx.sampling)?;
    let mut tasks = Vec::new();
    let declared_validate = scenario
        .file
        .tasks
        .iter()
        .find(|t| matches!(t, TaskEntry::Validate { .. }))
        .cloned();
    let validate_entry = declared_validate.unwrap_or(TaskEntry::Validate {
        expect: Expect::Pass,
        failed_condition: None,
    });
    let (vo, vs, vd) = validate_outcome(&validation, &validate_entry);
    let v_matched = matches(validate_entry.expect(), vo);
    let gate_open = validation.valid;
    for (index, task) in scenario.file.tasks.iter().enumerate() {
        if !command.selects(task) && !matches!(task, TaskEntry::Validate { .. }) {
            continue;
        }
        let (outcome, summary, detail) = if matches!(task, TaskEntry::Validate { .. }) {
            (vo, vs.clone(), vd.clone())
        } else if !gate_open {
            (Outcome::Skipped, "structure did not validate".to_string(), Value::Null)
        } else {
            absorb(run_task(&ctx, task))?
        };
        tasks.push(TaskReport {
            index: index + 1,
            op: task.op().to_string(),
            expect: task.expect(),
            outcome,
            matched: matches(task.expect(), outcome) && (!matches!(task, TaskEntry::Validate { .. }) || v_matched),
            summary,
            detail,
        });
    }
    if !scenario.file.tasks.iter().any(|t| matches!(t, TaskEntry::Validate { .. })) {
        tasks.insert(
            0,
            TaskReport {
                index: 0,
                op: "validate".into(),
                expect: Expect::Pass,
                outcome: vo,
                matched: v_matched,
                summary: vs,
                detail: vd,
            },
        );
    }
    let first_mismatch = tasks
        .iter()
        .find(|t| !t.matched)
        .map(|t| {
            let want = format!("{:?}", t.expect).to_lowercase();
            format!("task {} ({}): expected {want}, got {}", t.index, t.op, t.outcome.label())
        });
    Ok(RunReport {
        schema: super::scenario::SCHEMA,
        scenario: scenario.name().to_string(),
        command,
        settings,
        matched: first_mismatch.is_none(),
        first_mismatch,
        tasks,
    })
}

fn validate_outcome(report: &ValidationReport, task: &TaskEntry) -> TaskResult {
    let failed = report.failed();
    let defining = report.failed_defining();
    let mut outcome = outcome_of(report.valid);
    let summary = if report.valid {
        format!("valid {} of type {:?}", report.structure, report.type_hk)
    } else {
        format!("invalid: {}", failed.join(", "))
    };
    if let TaskEntry::Validate {
        failed_condition: Some(want),
        ..
    } = task
    {
        // The named condition must be the only defining failure, or the
        // failing derived check when no defining condition fails.
        let named = if defining.is_empty() {
            failed.contains(&want.as_str())
        } else {
            defining == [want.as_str()]
        };
        if !report.valid && !named {
            outcome = Outcome::Pass;
        }
    }
    (outcome, summary, to_value(report))
}

fn run_task(ctx: &Ctx, task: &TaskEntry) -> Result<TaskResult> {
    let sc = ctx.scenario;
    match task {
        TaskEntry::Validate { .. } => unreachable!("validation runs separately"),
        TaskEntry::Reeb { commuting, .. } => reeb_task(ctx, *commuting),
        TaskEntry::Periods { form, cycles, .. } => {
            let f = sc.form(form)?;
            let cyc: Vec<(usize, usize)> = cycles.iter().map(|c| (c[0].wrapping_sub(1), c[1].wrapping_sub(1))).collect();
            let ts = crate::sample::uniform_ts(ctx.settings.t_samples.max(2));
            let r = de_rham_periods(f, &cyc, &ts)?;
            let pass = r.variation <= PERIOD_TOL;
            Ok((
                outcome_of(pass),
                format!("period variation {:.3e} over {} cycles", r.variation, r.cycles.len()),
                to_value(&r),
            ))
        }
        TaskEntry::Primitive {
            form,
            derivative,
            foliation,
            ..
        } => {
            let mut target = sc.form(form)?.clone();
            if *derivative {
                target = target.t_derivative();
            }
            let spec = sc.foliation(foliation)?;
            let n = ctx.settings.fourier_order;
            let mut entries = Vec::new();
            let mut worst = 0.0f64;
            let mut witness = Value::Null;
            for order in [n, 2 * n] {
                let basis = SpectralBasis::new(&sc.model, spec, order)?;
                for &t in &ctx.sampling.ts {
                    let r = basic_primitive_at(&target, &basis, t)?;
                    worst = worst.max(r.residual);
                    if witness.is_null() && !r.witness.is_empty() {
                        witness = to_value(&r.witness);
                    }
                    entries.push(json!({
                        "order": order,
                        "t": t,
                        "residual": r.residual,
                        "soundness": r.soundness,
                        "found": r.found(),
                    }));
                    if !target.depends_on_t() {
                        break;
                    }
                }
            }
            let pass = worst <= PRIMITIVE_TOL;
            Ok((
                outcome_of(pass),
                format!("largest relative residual {worst:.3e} at orders {n} and {}", 2 * n),
                json!({ "entries": entries, "witness": witness }),
            ))
        }
        TaskEntry::BasicH2 { foliation, dim, grows, .. } => {
            let spec = sc.foliation(foliation)?;
            let n = ctx.settings.fourier_order;
            let lo = basic_h2_dimension(&SpectralBasis::new(&sc.model, spec, n)?)?;
            let hi = basic_h2_dimension(&SpectralBasis::new(&sc.model, spec, 2 * n)?)?;
            let mut pass = true;
            if let Some(d) = dim {
                pass &= lo.dim == *d && hi.dim == *d;
            }
            if let Some(g) = grows {
                pass &= (hi.dim > lo.dim) == *g;
            }
            Ok((
                outcome_of(pass),
                format!("dimension {} at order {n}, {} at order {}", lo.dim, hi.dim, 2 * n),
                json!({ "low": lo, "high": hi }),
            ))
        }
        TaskEntry::ReebClass { form, .. } => {
            let r = reeb_class(sc.form(form)?, &ctx.sampling, ctx.settings.fourier_order)?;
            Ok((
                outcome_of(r.class_vanishes),
                format!("leafwise residual {:.3e}", r.leafwise_residual),
                to_value(&r),
            ))
        }
        TaskEntry::Monodromy { shift, matrix, .. } => {
            let a = shift.wrapping_sub(1);
            let shears: Vec<_> = sc.model.shears.iter().filter(|s| s.shift == a && s.coef != 0.0).collect();
            let got = match shears.as_slice() {
                [] => [[1.0, 0.0], [0.0, 1.0]],
                [s] => [[1.0, s.coef], [0.0, 1.0]],
                _ => return Err(Error::Unsupported("several shears along one coordinate".into())),
            };
            let fiber: Vec<String> = shears
                .iter()
                .flat_map(|s| [sc.model.coord_names[s.target].clone(), sc.model.coord_names[s.source].clone()])
                .collect();
            Ok((
                outcome_of(got == *matrix),
                format!("monodromy {got:?} on ({})", fiber.join(", ")),
                json!({ "matrix": got, "fiber": fiber }),
            ))
        }
        TaskEntry::Necessity { .. } => {
            let r = necessity_check(&sc.structure, &ctx.sampling, ctx.settings.fourier_order)?;
            let outcome = match r.verdict {
                Verdict::Pass => Outcome::Pass,
                Verdict::Fail => Outcome::Fail,
                Verdict::Inapplicable => Outcome::Inapplicable,
            };
            let summary = match (&r.reason, r.min_residual) {
                (Some(reason), _) => reason.clone(),
                (None, Some(m)) => format!("obstructed: smallest residual {m:.3e}"),
                (None, None) => "derivatives are basic-exact".to_string(),
            };
            Ok((outcome, summary, to_value(&r)))
        }
        TaskEntry::Moser { primitives, .. } => moser_task(ctx, *primitives),
    }
}

fn reeb_task(ctx: &Ctx, commuting: Option<bool>) -> Result<TaskResult> {
    let s = &ctx.scenario.structure;
    if matches!(s, GeometricStructure::SymplecticPair { .. }) {
        return Ok((Outcome::Inapplicable, "symplectic pairs carry no Reeb fields".into(), Value::Null));
    }
    let suite = solve_structure(s, &ctx.sampling)?;
    let mut pass = suite.max_residual <= REEB_TOL;
    let mut notes = vec![format!("max residual {:.3e}", suite.max_residual)];
    if let Some(c) = suite.consistency {
        pass &= c <= REEB_TOL;
    }
    if let Some(c) = &suite.commutation {
        pass &= c.agrees;
        notes.push(format!(
            "bracket {:.3e}, ranks {:?}, {}",
            c.bracket_sup,
            c.rank_range,
            if c.commuting { "commuting" } else { "non-commuting" }
        ));
        if let Some(want) = commuting {
            pass &= c.commuting == want;
        }
    } else if commuting.is_some() {
        pass = false;
    }
    if let Some(p) = &suite.projection {
        pass &= p.holds && p.max_error <= PROJECTION_TOL;
        notes.push(format!("projection error {:.3e}", p.max_error));
    }
    Ok((outcome_of(pass), notes.join("; "), to_value(&suite)))
}

fn moser_task(ctx: &Ctx, choice: Option<PrimitiveChoice>) -> Result<TaskResult> {
    let sc = ctx.scenario;
    let st = &sc.structure;
    let ts = if ctx.sampling.ts.len() >= 2 { ctx.sampling.ts.clone() } else { vec![0.0, 0.5, 1.0] };
    let (rho_f, rho_g) = st.foliation_forms()?;
    let mut drift = 0.0f64;
    for r in [&rho_f, &rho_g] {
        drift = drift.max(kernel_drift(r, &ctx.sampling.points, &ts)?);
    }
    if drift > DRIFT_TOL {
        return Ok((
            Outcome::Inapplicable,
            format!("foliation moves with t (kernel drift {drift:.3e}); no isotopy is attempted"),
            json!({ "drift": drift }),
        ));
    }
    let integ = IntegratorSettings {
        t_steps: ctx.settings.t_steps,
        tol: ctx.settings.tol,
        ..Default::default()
    };
    let variant = MoserProblem::variant_of(st);
    let use_spectral = match choice {
        Some(PrimitiveChoice::Spectral) => true,
        Some(PrimitiveChoice::Supplied) => false,
        None => variant != MoserVariant::ContactContactStructure && sc.primitives.is_empty(),
    };
    let problem = if use_spectral {
        match MoserProblem::with_spectral_primitives(st.clone(), ctx.settings.fourier_order, integ, &ctx.sampling) {
            Ok(p) => p,
            Err(Error::Structure(msg)) => {
                let nec = necessity_check(st, &ctx.sampling, ctx.settings.fourier_order)?;
                return Ok((
                    Outcome::Fail,
                    format!("no basic primitive, so no isotopy: {msg}"),
                    json!({ "drift": drift, "necessity": nec }),
                ));
            }
            Err(e) => return Err(e),
        }
    } else {
        MoserProblem::new(st.clone(), sc.primitives.clone(), integ)?
    };
    let checks = problem.check_primitives(&ctx.sampling)?;
    let prim_ok = checks.iter().all(|c| c.exactness <= PRIMITIVE_TOL && c.basic);
    let seeds = seed_points(&sc.model, ctx.settings.seeds);
    let mut field = json!({});
    let (mut res, mut split, mut ann, mut mu_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in seeds.iter().take(16) {
        for &t in &[0.0, 0.5, 1.0] {
            let f = moser_field(&problem, p, t)?;
            res = res.max(f.residual);
            split = split.max(f.splitting[0]).max(f.splitting[1]);
            ann = ann.max(f.reeb_annihilation);
            if let (Some(a), Some(b)) = (f.mu, f.mu_reeb) {
                mu_gap = mu_gap.max((a - b).abs());
            }
            if let (Some(a), Some(b)) = (f.nu, f.nu_reeb) {
                mu_gap = mu_gap.max((a - b).abs());
            }
        }
    }
    field["residual"] = json!(res);
    field["splitting"] = json!(split);
    field["reeb_annihilation"] = json!(ann);
    field["multiplier_gap"] = json!(mu_gap);
    let field_ok = res <= FIELD_TOL && split <= SPLITTING_TOL && ann <= CONSISTENCY_TOL && mu_gap <= CONSISTENCY_TOL;
    let result = integrate_isotopy(&problem, &seeds)?;
    let verify = verify_isotopy(&result, &problem)?;
    let conv = convergence_study(&problem, &seeds[..seeds.len().min(4)], 8)?;
    let conv_ok = variant != MoserVariant::SymplecticPair || conv.errors[0] <= 1e-11 || conv.ratio >= CONVERGENCE_RATIO;
    let verify_ok = verify.max_error() <= ISOTOPY_TOL
        && verify.foliation_error <= FOLIATION_TOL
        && verify.mu_consistency.is_none_or(|m| m <= ISOTOPY_TOL);
    let pass = prim_ok && field_ok && verify_ok && conv_ok;
    let mut summary = format!(
        "pullback {:.3e}, proportionality {:.3e}, factor mismatch {:.3e}, convergence ratio {:.1}",
        verify.pullback_error, verify.proportionality_residual, verify.factor_mismatch, conv.ratio
    );
    if let Some((lo, hi)) = verify.factor_range {
        summary.push_str(&format!(", factor in [{lo:.4}, {hi:.4}]"));
    }
    Ok((
        outcome_of(pass),
        summary,
        json!({
            "variant": problem.variant,
            "primitive_source": problem.source,
            "primitives": checks,
            "drift": drift,
            "field": field,
            "verification": verify,
            "convergence": conv,
        }),
    ))
}
