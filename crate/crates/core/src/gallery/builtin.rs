//! Shipped scenarios and single-condition mutations of them.

use super::scenario::{ComponentEntry, Expect, FormEntry, Scenario, ScenarioFile, TaskEntry};
use crate::error::{Error, Result};

/// The eight reference scenarios.
pub const BUILTIN_NAMES: [&str; 8] = [
    "t4-exact",
    "suspension-hamiltonian",
    "ghys-nil",
    "t4-contact-pair",
    "t3-cs-pair",
    "t5-cs-structure",
    "t6-cc-structure",
    "fol-drift",
];

/// Additional scenarios: a moving suspension and a non-commuting
/// contact-contact structure.
pub const EXTRA_NAMES: [&str; 2] = ["suspension-drift", "t4-cc-perturbed"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "t4-exact" => include_str!("../../scenarios/t4-exact.json"),
        "suspension-hamiltonian" => include_str!("../../scenarios/suspension-hamiltonian.json"),
        "ghys-nil" => include_str!("../../scenarios/ghys-nil.json"),
        "t4-contact-pair" => include_str!("../../scenarios/t4-contact-pair.json"),
        "t3-cs-pair" => include_str!("../../scenarios/t3-cs-pair.json"),
        "t5-cs-structure" => include_str!("../../scenarios/t5-cs-structure.json"),
        "t6-cc-structure" => include_str!("../../scenarios/t6-cc-structure.json"),
        "fol-drift" => include_str!("../../scenarios/fol-drift.json"),
        "suspension-drift" => include_str!("../../scenarios/suspension-drift.json"),
        "t4-cc-perturbed" => include_str!("../../scenarios/t4-cc-perturbed.json"),
        _ => return None,
    })
}

pub fn builtin_file(name: &str) -> Option<ScenarioFile> {
    if let Some(src) = source(name) {
        return Some(ScenarioFile::from_json(src).expect("shipped scenario parses"));
    }
    mutation_files().into_iter().find(|m| m.name == name)
}

pub fn builtin(name: &str) -> Result<Scenario> {
    builtin_file(name)
        .ok_or_else(|| Error::Scenario(format!("unknown builtin scenario '{name}'")))?
        .resolve()
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("shipped scenario resolves"))
        .collect()
}

pub fn extra_scenarios() -> Vec<Scenario> {
    EXTRA_NAMES
        .iter()
        .map(|n| builtin(n).expect("shipped scenario resolves"))
        .collect()
}

/// Every name accepted by `builtin:`.
pub fn all_names() -> Vec<String> {
    BUILTIN_NAMES
        .iter()
        .chain(EXTRA_NAMES.iter())
        .map(|s| s.to_string())
        .chain(mutation_files().into_iter().map(|m| m.name))
        .collect()
}

/// `(base, suffix, form, new components, failing condition)`.
type MutationDef = (
    &'static str,
    &'static str,
    &'static str,
    &'static [(&'static [usize], &'static str)],
    &'static str,
);

const MUTATIONS: [MutationDef; 16] = [
    (
        "t4-exact",
        "omega-square",
        "omega",
        &[(&[1, 2], "1 + 0.5*t*(0.4*cos(th1) + 0.3*sin(th2))"), (&[3, 4], "0.1")],
        "omega_power_vanishes",
    ),
    (
        "t4-exact",
        "omega-open",
        "omega",
        &[(&[1, 2], "1 + 0.5*t*(0.4*cos(th1) + 0.3*sin(th2)) + 0.1*sin(th3)")],
        "d_omega_zero",
    ),
    (
        "suspension-hamiltonian",
        "eta-parallel",
        "eta",
        &[(&[1, 2], "1")],
        "volume",
    ),
    (
        "suspension-hamiltonian",
        "eta-open",
        "eta",
        &[(&[3, 4], "1 + 0.4*t*cos(th3) + 0.1*sin(th1)")],
        "d_eta_zero",
    ),
    (
        "ghys-nil",
        "eta-square",
        "eta",
        &[(&[1, 4], "1"), (&[2, 3], "0.1")],
        "eta_power_vanishes",
    ),
    (
        "ghys-nil",
        "omega-open",
        "omega",
        &[(&[2, 3], "1 + 0.5*t*cos(y) + 0.1*sin(w)")],
        "d_omega_zero",
    ),
    (
        "t4-contact-pair",
        "beta-inside",
        "beta",
        &[(&[3], "1")],
        "volume",
    ),
    (
        "t4-contact-pair",
        "beta-contact",
        "beta",
        &[(&[2], "0.2*sin(th1)"), (&[4], "1 + 0.2*t*sin(th4)")],
        "d_beta_power_vanishes",
    ),
    (
        "t3-cs-pair",
        "eta-inside",
        "eta",
        &[(&[1, 3], "1")],
        "volume",
    ),
    (
        "t3-cs-pair",
        "alpha-twisted",
        "alpha",
        &[(&[2], "0.5*sin(th1)"), (&[3], "1")],
        "d_alpha_power_vanishes",
    ),
    (
        "t5-cs-structure",
        "eta-open",
        "eta",
        &[(&[4, 5], "1 + 0.3*t*cos(th4) + 0.1*sin(th1)")],
        "d_eta_zero",
    ),
    (
        "t5-cs-structure",
        "eta-square",
        "eta",
        &[(&[2, 3], "0.2"), (&[4, 5], "1 + 0.3*t*cos(th4)")],
        "eta_power_vanishes",
    ),
    (
        "t6-cc-structure",
        "beta-closed",
        "beta",
        &[(&[3], "1")],
        "volume",
    ),
    (
        "t6-cc-structure",
        "alpha-overtwisted",
        "alpha",
        &[
            (&[1], "(1 + 0.2*t*cos(th1))*cos(th3 + t)"),
            (&[2], "(1 + 0.2*t*cos(th1))*sin(th3 + t)"),
            (&[4], "0.3*sin(th6)"),
        ],
        "alpha_wedge_d_alpha_power_vanishes",
    ),
    (
        "fol-drift",
        "omega-square",
        "omega",
        &[(&[1, 2], "1"), (&[2, 3], "0.5*t"), (&[3, 4], "0.1")],
        "omega_power_vanishes",
    ),
    (
        "fol-drift",
        "eta-open",
        "eta",
        &[(&[3, 4], "1 + 0.2*sin(th1)")],
        "d_eta_zero",
    ),
];

/// Sixteen scenarios, two per reference scenario, each breaking exactly one
/// defining condition. Their only task is a validation expected to fail on
/// that condition.
pub fn mutation_files() -> Vec<ScenarioFile> {
    MUTATIONS
        .iter()
        .map(|(base, suffix, form, comps, cond)| {
            let mut f = ScenarioFile::from_json(source(base).expect("base exists")).expect("base parses");
            f.name = format!("{base}~{suffix}");
            f.description = format!("{base} with {form} altered so that {cond} fails");
            let entry = f.forms.iter_mut().find(|e| e.name == *form).expect("mutated form exists");
            *entry = FormEntry {
                name: form.to_string(),
                degree: entry.degree,
                components: comps
                    .iter()
                    .map(|(idx, e)| ComponentEntry {
                        indices: idx.to_vec(),
                        expr: e.to_string(),
                    })
                    .collect(),
            };
            f.tasks = vec![TaskEntry::Validate {
                expect: Expect::Fail,
                failed_condition: Some(cond.to_string()),
            }];
            f
        })
        .collect()
}

pub fn mutations() -> Vec<Scenario> {
    mutation_files()
        .into_iter()
        .map(|f| f.resolve().expect("mutation resolves"))
        .collect()
}
