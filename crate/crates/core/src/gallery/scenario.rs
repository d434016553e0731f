//! Scenario documents: serde types mirroring the JSON layout (1-based
//! indices) and their resolution into models, forms and structures.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::DifferentialForm;
use crate::model::{CoframeModel, ModelSpec, Shear};
use crate::rank::{FoliationSpec, GeometricStructure};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub model: ModelEntry,
    pub forms: Vec<FormEntry>,
    pub structure: StructureEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub primitives: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub foliations: Vec<FoliationEntry>,
    #[serde(default, skip_serializing_if = "Settings::is_empty")]
    pub settings: Settings,
    pub tasks: Vec<TaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Builtin { builtin: String },
    Explicit(ExplicitModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub name: String,
    pub coords: Vec<String>,
    pub periods: Vec<f64>,
    /// `[i, j, k, c]`: `de^i` contains `c e^j ∧ e^k`.
    #[serde(default)]
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    pub frame: Vec<Vec<String>>,
    pub coframe: Vec<Vec<String>>,
    #[serde(default)]
    pub shears: Vec<ShearEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearEntry {
    pub shift: usize,
    pub target: usize,
    pub source: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormEntry {
    pub name: String,
    pub degree: usize,
    pub components: Vec<ComponentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentEntry {
    pub indices: Vec<usize>,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub kind: String,
    pub forms: [String; 2],
    #[serde(rename = "type")]
    pub type_pair: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_of: Option<String>,
}

/// Defaults a scenario may set; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_order: Option<usize>,
}

impl Settings {
    pub fn is_empty(&self) -> bool {
        *self == Settings::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskEntry {
    Validate {
        expect: Expect,
        /// Condition that must be the only failing defining condition.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failed_condition: Option<String>,
    },
    Reeb {
        expect: Expect,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        commuting: Option<bool>,
    },
    Periods {
        form: String,
        cycles: Vec<[usize; 2]>,
        expect: Expect,
    },
    Primitive {
        form: String,
        #[serde(default)]
        derivative: bool,
        foliation: String,
        expect: Expect,
    },
    BasicH2 {
        foliation: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grows: Option<bool>,
        expect: Expect,
    },
    ReebClass {
        form: String,
        expect: Expect,
    },
    Monodromy {
        shift: usize,
        matrix: [[f64; 2]; 2],
        expect: Expect,
    },
    Necessity {
        expect: Expect,
    },
    Moser {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        primitives: Option<PrimitiveChoice>,
        expect: Expect,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveChoice {
    Supplied,
    Spectral,
}

impl TaskEntry {
    pub fn op(&self) -> &'static str {
        match self {
            TaskEntry::Validate { .. } => "validate",
            TaskEntry::Reeb { .. } => "reeb",
            TaskEntry::Periods { .. } => "periods",
            TaskEntry::Primitive { .. } => "primitive",
            TaskEntry::BasicH2 { .. } => "basic_h2",
            TaskEntry::ReebClass { .. } => "reeb_class",
            TaskEntry::Monodromy { .. } => "monodromy",
            TaskEntry::Necessity { .. } => "necessity",
            TaskEntry::Moser { .. } => "moser",
        }
    }

    pub fn expect(&self) -> Expect {
        match self {
            TaskEntry::Validate { expect, .. }
            | TaskEntry::Reeb { expect, .. }
            | TaskEntry::Periods { expect, .. }
            | TaskEntry::Primitive { expect, .. }
            | TaskEntry::BasicH2 { expect, .. }
            | TaskEntry::ReebClass { expect, .. }
            | TaskEntry::Monodromy { expect, .. }
            | TaskEntry::Necessity { expect }
            | TaskEntry::Moser { expect, .. } => *expect,
        }
    }
}

/// A scenario with every reference resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub model: Arc<CoframeModel>,
    pub forms: BTreeMap<String, DifferentialForm>,
    pub structure: GeometricStructure,
    pub foliations: BTreeMap<String, FoliationSpec>,
    pub primitives: Vec<DifferentialForm>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn form(&self, name: &str) -> Result<&DifferentialForm> {
        self.forms
            .get(name)
            .ok_or_else(|| Error::Scenario(format!("unknown form '{name}'")))
    }

    pub fn foliation(&self, name: &str) -> Result<&FoliationSpec> {
        self.foliations
            .get(name)
            .ok_or_else(|| Error::Scenario(format!("unknown foliation '{name}'")))
    }

    pub fn to_json(&self) -> String {
        self.file.to_json()
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn resolve(self) -> Result<Scenario> {
        resolve(self)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioFile::from_json(text)?.resolve()
}

fn one_based(i: usize, n: usize, what: &str) -> Result<usize> {
    if i == 0 || i > n {
        return Err(Error::Dimension(format!("{what} index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

fn build_model(entry: &ModelEntry) -> Result<CoframeModel> {
    match entry {
        ModelEntry::Builtin { builtin } => {
            CoframeModel::builtin(builtin).ok_or_else(|| Error::Scenario(format!("unknown builtin model '{builtin}'")))
        }
        ModelEntry::Explicit(m) => {
            let n = m.coords.len();
            let structure_constants = m
                .structure_constants
                .iter()
                .map(|&(i, j, k, c)| {
                    Ok((
                        one_based(i, n, "structure constant")?,
                        one_based(j, n, "structure constant")?,
                        one_based(k, n, "structure constant")?,
                        c,
                    ))
                })
                .collect::<Result<_>>()?;
            let shears = m
                .shears
                .iter()
                .map(|s| {
                    Ok(Shear {
                        shift: one_based(s.shift, n, "shear")?,
                        target: one_based(s.target, n, "shear")?,
                        source: one_based(s.source, n, "shear")?,
                        coef: s.coef,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(CoframeModel::from_spec(&ModelSpec {
                name: m.name.clone(),
                coord_names: m.coords.clone(),
                periods: m.periods.clone(),
                structure_constants,
                frame: m.frame.clone(),
                coframe: m.coframe.clone(),
                shears,
            })?)
        }
    }
}

fn resolve(file: ScenarioFile) -> Result<Scenario> {
    if file.schema != SCHEMA {
        return Err(Error::Scenario(format!("unsupported schema {} (expected {SCHEMA})", file.schema)));
    }
    let model = Arc::new(build_model(&file.model)?);
    let mut forms = BTreeMap::new();
    for f in &file.forms {
        let comps: Vec<(Vec<usize>, &str)> = f.components.iter().map(|c| (c.indices.clone(), c.expr.as_str())).collect();
        let form = DifferentialForm::parse(&model, f.degree, &comps).map_err(|e| match e {
            Error::Parse(p) => Error::Scenario(format!("form '{}': {p}", f.name)),
            other => other,
        })?;
        if forms.insert(f.name.clone(), form).is_some() {
            return Err(Error::Scenario(format!("duplicate form name '{}'", f.name)));
        }
    }
    let get = |name: &str| -> Result<DifferentialForm> {
        forms
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Scenario(format!("unresolved form reference '{name}'")))
    };
    let s = &file.structure;
    let (a, b) = (get(&s.forms[0])?, get(&s.forms[1])?);
    let [h, k] = s.type_pair;
    let structure = match s.kind.as_str() {
        "symplectic_pair" => GeometricStructure::SymplecticPair { omega: a, eta: b, k: h, l: k },
        "contact_pair" => GeometricStructure::ContactPair { alpha: a, beta: b, h, k },
        "contact_symplectic_pair" => GeometricStructure::ContactSymplecticPair { alpha: a, eta: b, h, k },
        "contact_symplectic_structure" => GeometricStructure::ContactSymplecticStructure { alpha: a, eta: b, h },
        "contact_contact_structure" => GeometricStructure::ContactContactStructure { alpha: a, beta: b, h },
        other => return Err(Error::Scenario(format!("unknown structure kind '{other}'"))),
    };
    structure.check_dimension()?;
    if structure.type_pair() != (h, k) {
        return Err(Error::Dimension(format!(
            "{} on a {}-dimensional model has type {:?}, not ({h}, {k})",
            structure.kind(),
            model.dim,
            structure.type_pair()
        )));
    }
    let mut foliations = BTreeMap::new();
    for f in &file.foliations {
        let spec = match (&f.span, &f.kernel_of) {
            (Some(span), None) => {
                let idx = span
                    .iter()
                    .map(|&i| one_based(i, model.dim, "foliation span"))
                    .collect::<Result<Vec<_>>>()?;
                FoliationSpec::FrameSpan(idx)
            }
            (None, Some(name)) => {
                let form = get(name)?;
                let probe = crate::sample::halton_points(&model.periods, 1).remove(0);
                let kernel = crate::rank::kernel_of_value(&form.evaluate(&probe, 0.0)?);
                FoliationSpec::KernelOf {
                    corank: model.dim - kernel.ncols(),
                    form,
                }
            }
            _ => {
                return Err(Error::Scenario(format!(
                    "foliation '{}' needs exactly one of span or kernel_of",
                    f.name
                )))
            }
        };
        if foliations.insert(f.name.clone(), spec).is_some() {
            return Err(Error::Scenario(format!("duplicate foliation name '{}'", f.name)));
        }
    }
    let primitives = file.primitives.iter().map(|n| get(n)).collect::<Result<Vec<_>>>()?;
    for task in &file.tasks {
        let forms_used: Vec<&String> = match task {
            TaskEntry::Periods { form, .. } | TaskEntry::ReebClass { form, .. } => vec![form],
            TaskEntry::Primitive { form, .. } => vec![form],
            _ => Vec::new(),
        };
        for f in forms_used {
            get(f)?;
        }
        let fol = match task {
            TaskEntry::Primitive { foliation, .. } | TaskEntry::BasicH2 { foliation, .. } => Some(foliation),
            _ => None,
        };
        if let Some(f) = fol {
            if !foliations.contains_key(f) {
                return Err(Error::Scenario(format!("unresolved foliation reference '{f}'")));
            }
        }
    }
    Ok(Scenario {
        file,
        model,
        forms,
        structure,
        foliations,
        primitives,
    })
}
