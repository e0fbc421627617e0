//! Config-driven experiment runner.
//!
//! One experiment per invocation: `ergodic-lab <command> --config PATH
//! [--out DIR] [--seed N]`. The config is a single JSON document; flags only
//! override the output directory and the seed. Every run writes
//! `report.json` and `report.csv` into the output directory and prints a
//! one-line summary. Exit codes: 0 success, 2 validation error, 3 wrap-around
//! guard violation, 4 numerical degeneracy.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::averaging::{
    brute_force_average, brute_force_maximal, discrete_maximal, multi_average, MaximalMode,
    MaximalSpec, WindowSpec,
};
use crate::geometry::{
    decompose, inscribed_ball, random_dual_boxes, verify_domination, DualBox, Parallelepiped,
    UnitVectorSet,
};
use crate::lattice::{convergents, parse_rational, rotation_to_shift, ShiftFamily};
use crate::space::{fmt_float, GridFunction, GridSpace};
use crate::verify::{
    convergence_probe, default_lambda_grid, divergence_extension_check, sharpness_sweep,
    weak_type_sweep,
};
use crate::{Error, Result};

/// All recognized commands.
pub const COMMANDS: &[&str] = &[
    "rank",
    "reduce",
    "average",
    "maximal",
    "weaktype",
    "converge",
    "extend",
    "sharpness",
    "geometry-decompose",
    "geometry-ball",
    "geometry-measure",
];

/// Shift system: either explicit moduli + generators, or rotation
/// frequencies conjugated onto a cycle with `guard` headroom.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<i64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<FrequencySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<u64>,
}

/// A rotation frequency: `"p/q"`, or a continued-fraction approximation
/// `{ "approx": x, "depth": k }` of an irrational target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencySpec {
    Exact(String),
    Approx { approx: f64, depth: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeSpec {
    pub height: i64,
    pub point: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub dist: String,
}

/// Function source: exactly one of the fields must be set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spike: Option<SpikeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Per-command operation parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<u64>>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    /// `"exact"` or `"dyadic"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// `"fast"` or `"brute"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<Vec<u64>>>,
    /// Cube rungs `(2^1..2^e)^n` when no explicit ladder is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dyadic_exponents: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extension: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heights: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Membership scale for geometry checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub vectors: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Normalize the vectors instead of requiring unit input.
    #[serde(default)]
    pub normalize: bool,
}

/// The experiment description: one JSON document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("bad config JSON: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// One validation finding; `field` names what is wrong.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(list: &mut Vec<Diagnostic>, field: &str, message: impl Into<String>) {
    list.push(Diagnostic { field: field.into(), message: message.into() });
}

fn build_family(spec: &SystemSpec) -> Result<ShiftFamily> {
    match (&spec.moduli, &spec.generators, &spec.rotation) {
        (Some(moduli), Some(gens), None) => {
            let space = GridSpace::new(moduli.clone())?;
            ShiftFamily::new(space, gens.clone())
        }
        (None, None, Some(rotation)) => {
            let mut freqs = Vec::with_capacity(rotation.len());
            for f in rotation {
                match f {
                    FrequencySpec::Exact(text) => freqs.push(parse_rational(text)?),
                    FrequencySpec::Approx { approx, depth } => {
                        let convs = convergents(*approx, *depth)?;
                        freqs.push(*convs.last().expect("nonempty"));
                    }
                }
            }
            rotation_to_shift(&freqs, spec.guard.unwrap_or(1))
        }
        _ => Err(Error::Domain(
            "system must give either moduli + generators or rotation (+ guard)".into(),
        )),
    }
}

fn build_function(
    space: &GridSpace,
    spec: &FunctionSpec,
    default_seed: Option<u64>,
) -> Result<GridFunction> {
    let sources = [
        spec.values.is_some(),
        spec.file.is_some(),
        spec.spike.is_some(),
        spec.random.is_some(),
        spec.constant.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(Error::Domain(
            "function must give exactly one of values, file, spike, random, constant".into(),
        ));
    }
    if let Some(values) = &spec.values {
        let integral = values.iter().all(|v| v.fract() == 0.0 && v.abs() < 9e15);
        return if integral {
            GridFunction::from_integers(
                space.clone(),
                values.iter().map(|&v| v as i128).collect(),
                1,
            )
        } else {
            GridFunction::from_values(space.clone(), values.clone())
        };
    }
    if let Some(path) = &spec.file {
        let file = fs::File::open(path)
            .map_err(|e| Error::Domain(format!("cannot open {}: {e}", path.display())))?;
        return GridFunction::parse_csv(space.clone(), BufReader::new(file));
    }
    if let Some(spike) = &spec.spike {
        return GridFunction::spike(space.clone(), &spike.point, spike.height as i128);
    }
    if let Some(random) = &spec.random {
        let seed = random
            .seed
            .or(default_seed)
            .ok_or_else(|| Error::Domain("random function needs a seed".into()))?;
        return match random.dist.as_str() {
            "pm1" => Ok(GridFunction::random_pm1(space.clone(), seed)),
            "uniform" => Ok(GridFunction::random_uniform(space.clone(), seed)),
            other => Err(Error::Domain(format!(
                "unknown random dist '{other}' (expected pm1 or uniform)"
            ))),
        };
    }
    let c = spec.constant.expect("checked above");
    GridFunction::constant(space.clone(), c)
}

fn build_parallelepiped(spec: &GeometrySpec) -> Result<Parallelepiped> {
    let vectors = if spec.normalize {
        UnitVectorSet::from_directions(spec.vectors.clone())?
    } else {
        UnitVectorSet::new(spec.vectors.clone())?
    };
    Parallelepiped::new(vectors, spec.radii.clone())
}

fn maximal_spec(params: &Params) -> Result<MaximalSpec> {
    let cap = params.cap.ok_or_else(|| Error::Domain("params.M is required".into()))?;
    let mode = match params.mode.as_deref() {
        None | Some("dyadic") => MaximalMode::Dyadic,
        Some("exact") => MaximalMode::Exact,
        Some(other) => {
            return Err(Error::Domain(format!(
                "unknown mode '{other}' (expected exact or dyadic)"
            )))
        }
    };
    MaximalSpec::new(cap, mode)
}

fn needs_system(command: &str) -> bool {
    matches!(
        command,
        "rank" | "reduce" | "average" | "maximal" | "weaktype" | "converge" | "extend"
            | "sharpness"
    )
}

fn needs_function(command: &str) -> bool {
    matches!(command, "average" | "maximal" | "weaktype" | "converge" | "extend")
}

/// Static validation without execution. An empty list means runnable.
pub fn validate(config: &ExperimentConfig, command: &str) -> Vec<Diagnostic> {
    validate_inner(config, command, true)
}

/// `run` skips the guard arithmetic here so the operations themselves can
/// raise [`Error::Guard`] and exit with the dedicated code 3.
fn validate_inner(config: &ExperimentConfig, command: &str, include_guard: bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !COMMANDS.contains(&command) {
        diag(&mut out, "command", format!("unknown command '{command}'"));
        return out;
    }
    if let Some(inner) = &config.command {
        if inner != command {
            diag(
                &mut out,
                "command",
                format!("config says '{inner}' but '{command}' was invoked"),
            );
        }
    }

    let family = if needs_system(command) {
        match config.system.as_ref() {
            None => {
                diag(&mut out, "system", "this command needs a shift system");
                None
            }
            Some(spec) => match build_family(spec) {
                Ok(f) => Some(f),
                Err(e) => {
                    diag(&mut out, "system", e.to_string());
                    None
                }
            },
        }
    } else {
        None
    };

    if needs_function(command) {
        match (&config.function, &family) {
            (None, _) => diag(&mut out, "function", "this command needs a function"),
            (Some(spec), Some(fam)) => {
                if let Some(path) = &spec.file {
                    if !path.exists() {
                        diag(
                            &mut out,
                            "function.file",
                            format!("file {} does not exist", path.display()),
                        );
                    }
                }
                if spec.random.is_some()
                    && spec.random.as_ref().unwrap().seed.is_none()
                    && config.seed.is_none()
                {
                    diag(&mut out, "seed", "random function needs a seed");
                }
                if let Err(e) = build_function(fam.space(), spec, config.seed.or(Some(0))) {
                    diag(&mut out, "function", e.to_string());
                }
            }
            _ => {}
        }
    }

    if let Some(fam) = &family {
        // wrap-around guard arithmetic for the guarded commands
        let max_side = match command {
            "average" => config.params.sides.as_ref().and_then(|s| s.iter().max().copied()),
            "maximal" | "weaktype" | "sharpness" => config.params.cap,
            _ => None,
        };
        if let Some(m) = max_side.filter(|_| include_guard) {
            if let Err(Error::Guard { reach, modulus }) = fam.window_guard(m) {
                diag(
                    &mut out,
                    "params",
                    format!(
                        "wrap-around guard violated: (max side - 1) * max ||v|| * n = {reach} \
                         must stay below the smallest modulus {modulus}"
                    ),
                );
            }
        }
        match command {
            "average" => {
                match &config.params.sides {
                    None => diag(&mut out, "params.sides", "average needs window sides"),
                    Some(s) if s.len() != fam.len() => diag(
                        &mut out,
                        "params.sides",
                        format!("{} sides given, family has {} generators", s.len(), fam.len()),
                    ),
                    _ => {}
                }
            }
            "maximal" | "weaktype" => {
                if config.params.cap.is_none() {
                    diag(&mut out, "params.M", "this command needs the window cap M");
                }
            }
            "sharpness" => {
                if config.params.cap.is_none() {
                    diag(&mut out, "params.M", "this command needs the window cap M");
                }
                match &config.params.heights {
                    None => diag(&mut out, "params.heights", "sharpness needs a height ladder"),
                    Some(h) if h.windows(2).any(|w| w[0] >= w[1]) => {
                        diag(&mut out, "params.heights", "heights must be strictly increasing")
                    }
                    _ => {}
                }
                if fam.rank() == 0 {
                    diag(&mut out, "system", "sharpness needs a family of rank >= 1");
                }
                if config.seed.is_none() {
                    diag(&mut out, "seed", "sharpness places spikes randomly and needs a seed");
                }
                if config.function.is_some() {
                    diag(
                        &mut out,
                        "function",
                        "sharpness generates its own spike functions; drop the function field",
                    );
                }
            }
            "reduce" => {
                if fam.rank() == 0 {
                    diag(&mut out, "system", "reduce needs at least one independent generator");
                }
            }
            "converge" => {
                if config.params.ladder.is_none() && config.params.dyadic_exponents.is_none() {
                    diag(
                        &mut out,
                        "params.ladder",
                        "converge needs a ladder or dyadic_exponents",
                    );
                }
                if let Some(ladder) = &config.params.ladder {
                    if ladder.iter().any(|rung| rung.len() != fam.len()) {
                        diag(
                            &mut out,
                            "params.ladder",
                            format!("every rung needs {} sides", fam.len()),
                        );
                    }
                }
            }
            "extend" => {
                let s_len = config.params.sides.as_ref().map_or(0, |s| s.len());
                let t_len = config.params.extension.as_ref().map_or(0, |t| t.len());
                if config.params.sides.is_none() {
                    diag(&mut out, "params.sides", "extend needs base window sides");
                }
                if config.params.extension.is_none() {
                    diag(&mut out, "params.extension", "extend needs extension sides");
                }
                if config.params.sides.is_some()
                    && config.params.extension.is_some()
                    && s_len + t_len != fam.len()
                {
                    diag(
                        &mut out,
                        "params",
                        format!(
                            "sides ({s_len}) + extension ({t_len}) must cover all {} generators",
                            fam.len()
                        ),
                    );
                }
            }
            _ => {}
        }
        if matches!(command, "weaktype") && fam.rank() == 0 {
            diag(&mut out, "system", "weaktype needs a family of rank >= 1");
        }
    }

    if command.starts_with("geometry-") {
        match &config.geometry {
            None => diag(&mut out, "geometry", "geometry commands need a parallelepiped"),
            Some(spec) => {
                if let Err(e) = build_parallelepiped(spec) {
                    diag(&mut out, "geometry", e.to_string());
                }
            }
        }
        if command == "geometry-measure" {
            if config.seed.is_none() {
                diag(&mut out, "seed", "Monte Carlo sampling needs a seed");
            }
            if let Some(boxes) = &config.params.boxes {
                if boxes.iter().any(|b| b.lo.len() != b.hi.len()) {
                    diag(&mut out, "params.boxes", "box lo/hi lengths differ");
                }
            }
        }
    }

    if let Some(lambdas) = &config.params.lambdas {
        if lambdas.iter().any(|&l| !(l > 0.0)) {
            diag(&mut out, "params.lambdas", "lambda values must be positive");
        }
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            diag(&mut out, "params.lambdas", "lambdas must be strictly increasing");
        }
    }
    out
}

/// Outcome of a successful run.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: String,
    pub json: serde_json::Value,
    pub csv: String,
}

fn grid_stats(name: &str, g: &GridFunction, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "command": name,
        "mean": g.mean(),
        "l1_norm": g.l1_norm(),
        "sup_norm": g.linf_norm(),
        "points": g.len(),
        "params": extra,
    })
}

/// Execute one experiment. Validation runs first; any diagnostics abort with
/// a domain error listing them.
pub fn run(config: &ExperimentConfig, command: &str) -> Result<RunOutput> {
    let diagnostics = validate_inner(config, command, false);
    if !diagnostics.is_empty() {
        let mut msg = String::from("invalid config:");
        for d in &diagnostics {
            msg.push_str("\n  ");
            msg.push_str(&d.to_string());
        }
        return Err(Error::Domain(msg));
    }

    match command {
        "rank" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let rank = family.rank();
            let kernel = family.relation_kernel();
            let mut csv = String::from("relation,component,value\n");
            for (i, rel) in kernel.iter().enumerate() {
                for (j, &c) in rel.coeffs.iter().enumerate() {
                    csv.push_str(&format!("{i},{j},{c}\n"));
                }
            }
            Ok(RunOutput {
                summary: format!("rank = {rank} (kernel dimension {})", kernel.len()),
                json: json!({
                    "command": "rank",
                    "rank": rank,
                    "kernel": kernel.iter().map(|r| r.coeffs.clone()).collect::<Vec<_>>(),
                    "generators": family.generators(),
                    "moduli": family.space().moduli(),
                }),
                csv,
            })
        }
        "reduce" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let reduction = family.build_reduction()?;
            let mut csv = String::from("item,row,col,value\n");
            for (i, &b) in reduction.basis.iter().enumerate() {
                csv.push_str(&format!("basis,{i},0,{b}\n"));
            }
            for (i, &l) in reduction.l.iter().enumerate() {
                csv.push_str(&format!("l,{i},0,{l}\n"));
            }
            for (c, col) in reduction.a.iter().enumerate() {
                for (r, &v) in col.iter().enumerate() {
                    csv.push_str(&format!("a,{r},{c},{v}\n"));
                }
            }
            Ok(RunOutput {
                summary: format!(
                    "reduction: basis {:?}, {} non-basis generator(s)",
                    reduction.basis,
                    reduction.nonbasis.len()
                ),
                json: serde_json::to_value(&reduction).expect("serializable"),
                csv,
            })
        }
        "average" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let f = build_function(family.space(), config.function.as_ref().unwrap(), config.seed)?;
            let w = WindowSpec::new(config.params.sides.clone().unwrap())?;
            let brute = config.params.engine.as_deref() == Some("brute");
            let g = if brute {
                brute_force_average(&f, &family, &w)?
            } else {
                multi_average(&f, &family, &w)?
            };
            Ok(RunOutput {
                summary: format!(
                    "average over {:?}: mean = {:.6}, sup = {:.6}",
                    w.sides(),
                    g.mean(),
                    g.linf_norm()
                ),
                json: grid_stats(
                    "average",
                    &g,
                    json!({"sides": w.sides(), "engine": if brute { "brute" } else { "fast" }}),
                ),
                csv: g.to_csv_string(),
            })
        }
        "maximal" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let f = build_function(family.space(), config.function.as_ref().unwrap(), config.seed)?;
            let spec = maximal_spec(&config.params)?;
            let brute = config.params.engine.as_deref() == Some("brute");
            let g = if brute {
                brute_force_maximal(&f, &family, &spec)?
            } else {
                discrete_maximal(&f, &family, &spec)?
            };
            Ok(RunOutput {
                summary: format!(
                    "maximal (M = {}, {:?}): sup = {:.6}",
                    spec.cap,
                    spec.mode,
                    g.linf_norm()
                ),
                json: grid_stats(
                    "maximal",
                    &g,
                    json!({"M": spec.cap, "mode": format!("{:?}", spec.mode),
                           "engine": if brute { "brute" } else { "fast" }}),
                ),
                csv: g.to_csv_string(),
            })
        }
        "weaktype" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let f = build_function(family.space(), config.function.as_ref().unwrap(), config.seed)?;
            let spec = maximal_spec(&config.params)?;
            let lambdas = match &config.params.lambdas {
                Some(l) => l.clone(),
                None => default_lambda_grid(&f)?,
            };
            let report = weak_type_sweep(&f, &family, &spec, &lambdas)?;
            Ok(RunOutput {
                summary: format!(
                    "weaktype: rank {} of {} generators, sup ratio = {:.4} over {} lambdas",
                    report.rank,
                    report.generators,
                    report.sup_ratio,
                    report.lambdas.len()
                ),
                json: serde_json::to_value(&report).expect("serializable"),
                csv: report.to_csv_string(),
            })
        }
        "converge" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let f = build_function(family.space(), config.function.as_ref().unwrap(), config.seed)?;
            let rungs: Vec<WindowSpec> = match (&config.params.ladder, config.params.dyadic_exponents)
            {
                (Some(ladder), _) => ladder
                    .iter()
                    .map(|r| WindowSpec::new(r.clone()))
                    .collect::<Result<_>>()?,
                (None, Some(e)) => (1..=e)
                    .map(|i| WindowSpec::new(vec![1u64 << i; family.len()]))
                    .collect::<Result<_>>()?,
                (None, None) => unreachable!("validated"),
            };
            let report = convergence_probe(&f, &family, &rungs)?;
            let worst = report.sup_deviation.iter().copied().fold(0.0f64, f64::max);
            let last = *report.sup_deviation.last().expect("nonempty ladder");
            Ok(RunOutput {
                summary: format!(
                    "converge: {} rungs, final sup deviation = {:.3e}, worst = {:.3e}",
                    report.rungs.len(),
                    last,
                    worst
                ),
                json: serde_json::to_value(&report).expect("serializable"),
                csv: report.to_csv_string(),
            })
        }
        "extend" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let f = build_function(family.space(), config.function.as_ref().unwrap(), config.seed)?;
            let s = WindowSpec::new(config.params.sides.clone().unwrap())?;
            let t = config.params.extension.clone().unwrap();
            let check = divergence_extension_check(&f, &family, &s, &t)?;
            Ok(RunOutput {
                summary: if check.ok {
                    format!("extend: inequality holds (min slack = {:.3e})", check.min_slack)
                } else {
                    format!("extend: VIOLATED at index {}", check.witness.as_ref().unwrap().index)
                },
                json: serde_json::to_value(&check).expect("serializable"),
                csv: check.to_csv_string(),
            })
        }
        "sharpness" => {
            let family = build_family(config.system.as_ref().unwrap())?;
            let spec = maximal_spec(&config.params)?;
            let heights = config.params.heights.clone().unwrap();
            let seed = config.seed.expect("validated");
            let report = sharpness_sweep(&family, &heights, &spec, seed)?;
            Ok(RunOutput {
                summary: format!(
                    "sharpness: Log_{} grew x{:.2} ({}), Log_{} tail spread {:.1}%",
                    report.order_low,
                    report.growth.low_growth_factor,
                    if report.growth.low_monotone { "monotone" } else { "not monotone" },
                    report.order_high,
                    100.0 * report.growth.high_tail_spread
                ),
                json: serde_json::to_value(&report).expect("serializable"),
                csv: report.to_csv_string(),
            })
        }
        "geometry-decompose" => {
            let r = build_parallelepiped(config.geometry.as_ref().unwrap())?;
            let d = decompose(&r)?;
            // vertex containment check doubles as a membership exercise
            let scale = config.params.scale.unwrap_or(1.0 + 1e-9);
            let mut vertices_inside = true;
            if r.len() <= 16 {
                for v in r.vertices() {
                    if !crate::geometry::membership(&d.inner, &v, d.containment * scale)? {
                        vertices_inside = false;
                    }
                }
            }
            let mut csv = String::from("key,index,value\n");
            csv.push_str(&format!("containment,0,{}\n", fmt_float(d.containment)));
            csv.push_str(&format!("gram_det,0,{}\n", fmt_float(d.gram_det)));
            for (i, &idx) in d.independent.iter().enumerate() {
                csv.push_str(&format!("independent,{i},{idx}\n"));
            }
            for (i, &b) in d.blocks.iter().enumerate() {
                csv.push_str(&format!("block,{i},{b}\n"));
            }
            let summary = format!(
                "decompose: rank {} of {}, c* = {:.5}, vertices inside c*Q: {}",
                d.independent.len(),
                r.len(),
                d.containment,
                vertices_inside
            );
            let mut value = serde_json::to_value(&d).expect("serializable");
            value["inner"] = json!({
                "vectors": d.inner.vectors().vectors(),
                "radii": d.inner.radii(),
            });
            value["vertices_inside"] = json!(vertices_inside);
            Ok(RunOutput { summary, json: value, csv })
        }
        "geometry-ball" => {
            let r = build_parallelepiped(config.geometry.as_ref().unwrap())?;
            let ball = inscribed_ball(&r)?;
            let mut csv = String::from("index,h,c\n");
            for i in 0..ball.h.len() {
                csv.push_str(&format!(
                    "{i},{},{}\n",
                    fmt_float(ball.h[i]),
                    fmt_float(ball.c[i])
                ));
            }
            Ok(RunOutput {
                summary: format!("inscribed ball: rho = {:.6} (facet {})", ball.rho, ball.worst),
                json: serde_json::to_value(&ball).expect("serializable"),
                csv,
            })
        }
        "geometry-measure" => {
            let r = build_parallelepiped(config.geometry.as_ref().unwrap())?;
            let seed = config.seed.expect("validated");
            let samples = config.params.samples.unwrap_or(1_000_000);
            let boxes: Vec<DualBox> = match &config.params.boxes {
                Some(list) => list
                    .iter()
                    .map(|b| DualBox { lo: b.lo.clone(), hi: b.hi.clone() })
                    .collect(),
                None => {
                    let d = decompose(&r)?;
                    random_dual_boxes(
                        &d,
                        config.params.box_count.unwrap_or(100),
                        seed,
                        config.params.box_scale.unwrap_or(1.2),
                    )
                }
            };
            let report = verify_domination(&r, &boxes, samples, seed)?;
            let mut csv = String::from("box,empirical,stderr,bound,pass\n");
            for i in 0..report.boxes.len() {
                let ok = report.empirical[i] <= report.bound[i] + 3.0 * report.stderr[i];
                csv.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    fmt_float(report.empirical[i]),
                    fmt_float(report.stderr[i]),
                    fmt_float(report.bound[i]),
                    ok
                ));
            }
            Ok(RunOutput {
                summary: format!(
                    "measure: {} boxes at {} samples, pass = {}, max density ratio = {:.4}",
                    report.boxes.len(),
                    report.samples,
                    report.pass,
                    report.max_density
                ),
                json: serde_json::to_value(&report).expect("serializable"),
                csv,
            })
        }
        other => Err(Error::Domain(format!("unknown command '{other}'"))),
    }
}

/// Write `report.json` and `report.csv` into `out`.
pub fn write_reports(out_dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut json_text = serde_json::to_string_pretty(&output.json)
        .map_err(|e| Error::Degenerate(format!("report serialization failed: {e}")))?;
    json_text.push('\n');
    fs::write(out_dir.join("report.json"), json_text)?;
    fs::write(out_dir.join("report.csv"), &output.csv)?;
    Ok(())
}

fn print_usage() {
    eprintln!("usage: ergodic-lab <command> --config PATH [--out DIR] [--seed N]");
    eprintln!("commands: {}", COMMANDS.join(", "));
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match cli_main(&args) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Domain(_)) && std::env::args().len() <= 1 {
                print_usage();
            }
            e.exit_code()
        }
    }
}

/// Parse arguments, honor `ERGODIC_LAB_THREADS`, run, write reports.
pub fn cli_main(args: &[String]) -> Result<String> {
    if let Ok(threads) = std::env::var("ERGODIC_LAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            // ignore failure: the pool can only be installed once per process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let mut command: Option<String> = None;
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                config_path = Some(PathBuf::from(it.next().ok_or_else(|| {
                    Error::Domain("--config needs a path".into())
                })?));
            }
            "--out" => {
                out_dir = Some(PathBuf::from(
                    it.next().ok_or_else(|| Error::Domain("--out needs a path".into()))?,
                ));
            }
            "--seed" => {
                let text =
                    it.next().ok_or_else(|| Error::Domain("--seed needs a number".into()))?;
                seed = Some(
                    text.parse()
                        .map_err(|_| Error::Domain(format!("bad seed '{text}'")))?,
                );
            }
            other if command.is_none() && !other.starts_with('-') => {
                command = Some(other.to_string());
            }
            other => {
                return Err(Error::Domain(format!("unexpected argument '{other}'")));
            }
        }
    }
    let command = command.ok_or_else(|| Error::Domain("missing command".into()))?;
    let config_path =
        config_path.ok_or_else(|| Error::Domain("missing --config PATH".into()))?;
    let mut config = ExperimentConfig::from_file(&config_path)?;
    if let Some(seed) = seed {
        config.seed = Some(seed);
    }
    let out = out_dir
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let output = run(&config, &command)?;
    write_reports(&out, &output)?;
    Ok(output.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Operation coverage: every module operation is reachable from at least
    /// one CLI command.
    #[test]
    fn command_table_covers_every_operation() {
        let table: &[(&str, &[&str])] = &[
            ("rank", &["lattice::rank", "lattice::relation_kernel", "lattice::rotation_to_shift", "lattice::convergents"]),
            ("reduce", &["lattice::select_independent", "lattice::build_reduction"]),
            ("average", &["averaging::multi_average", "averaging::directional_window_sum", "averaging::brute_force_average"]),
            ("maximal", &["averaging::discrete_maximal", "averaging::brute_force_maximal"]),
            ("weaktype", &["verify::weak_type_sweep", "space::level_set_measure", "space::orlicz_integral", "space::orlicz_eval"]),
            ("converge", &["verify::convergence_probe"]),
            ("extend", &["verify::divergence_extension_check"]),
            ("sharpness", &["verify::sharpness_sweep"]),
            ("geometry-decompose", &["geometry::decompose", "geometry::support", "geometry::membership"]),
            ("geometry-ball", &["geometry::inscribed_ball"]),
            ("geometry-measure", &["geometry::sample_mu_r", "geometry::verify_domination"]),
            ("<runner>", &["cli::run", "cli::validate"]),
        ];
        let all_operations = [
            "space::orlicz_eval",
            "space::orlicz_integral",
            "space::level_set_measure",
            "lattice::rank",
            "lattice::relation_kernel",
            "lattice::select_independent",
            "lattice::build_reduction",
            "lattice::rotation_to_shift",
            "lattice::convergents",
            "averaging::multi_average",
            "averaging::directional_window_sum",
            "averaging::discrete_maximal",
            "averaging::brute_force_average",
            "averaging::brute_force_maximal",
            "geometry::support",
            "geometry::membership",
            "geometry::inscribed_ball",
            "geometry::decompose",
            "geometry::sample_mu_r",
            "geometry::verify_domination",
            "verify::weak_type_sweep",
            "verify::convergence_probe",
            "verify::divergence_extension_check",
            "verify::sharpness_sweep",
            "cli::run",
            "cli::validate",
        ];
        let covered: std::collections::HashSet<&str> =
            table.iter().flat_map(|(_, ops)| ops.iter().copied()).collect();
        for op in all_operations {
            assert!(covered.contains(op), "operation {op} unreachable from the command table");
        }
        for (cmd, _) in table.iter().filter(|(c, _)| *c != "<runner>") {
            assert!(COMMANDS.contains(cmd), "table names unknown command {cmd}");
        }
    }

    #[test]
    fn validate_unknown_command() {
        let config = ExperimentConfig::default();
        let diags = validate(&config, "frobnicate");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "command");
    }

    #[test]
    fn validate_minimal_rank_config() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"moduli": [7, 7], "generators": [[1,0],[0,1],[1,1]]}}"#,
        )
        .unwrap();
        assert!(validate(&config, "rank").is_empty());
    }

    #[test]
    fn validate_guard_violation_mentions_numbers() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"moduli": [5], "generators": [[1],[2]]},
                "function": {"spike": {"height": 1, "point": [0]}},
                "params": {"M": 3}}"#,
        )
        .unwrap();
        let diags = validate(&config, "maximal");
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains('8'), "message: {}", diags[0].message);
        assert!(diags[0].message.contains('5'));
    }

    #[test]
    fn validate_catches_missing_pieces() {
        let config = ExperimentConfig::from_json_str(r#"{}"#).unwrap();
        let diags = validate(&config, "weaktype");
        let fields: Vec<&str> = diags.iter().map(|d| d.field.as_str()).collect();
        assert!(fields.contains(&"system"));
        assert!(fields.contains(&"function"));

        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"moduli": [8], "generators": [[1]]},
                "function": {"file": "/definitely/not/here.csv"},
                "params": {"M": 4}}"#,
        )
        .unwrap();
        let diags = validate(&config, "weaktype");
        assert!(diags.iter().any(|d| d.field == "function.file"));
    }

    #[test]
    fn config_rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json_str(r#"{"comand": "rank"}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"params": {"M": 1, "bogus": 2}}"#).is_err());
    }

    #[test]
    fn run_rank_end_to_end() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"moduli": [7, 7], "generators": [[1,0],[0,1],[1,1]]}}"#,
        )
        .unwrap();
        let out = run(&config, "rank").unwrap();
        assert_eq!(out.summary, "rank = 2 (kernel dimension 1)");
        assert_eq!(out.json["rank"], 2);
        assert!(out.csv.starts_with("relation,component,value\n"));
    }

    #[test]
    fn run_weaktype_rotation_config() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"rotation": ["1/2", "1/3"], "guard": 64},
                "function": {"spike": {"height": 64, "point": [0]}},
                "params": {"M": 16}}"#,
        )
        .unwrap();
        let out = run(&config, "weaktype").unwrap();
        assert!(out.summary.starts_with("weaktype"));
        assert_eq!(out.json["rank"], 1);
        assert!(out.csv.lines().count() > 1);
    }

    #[test]
    fn run_guard_violation_is_guard_error() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"moduli": [5], "generators": [[1],[2]]},
                "function": {"spike": {"height": 1, "point": [0]}},
                "params": {"sides": [3, 3]}}"#,
        )
        .unwrap();
        // the operation raises the guard error itself: exit code 3
        let err = run(&config, "average").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("wrap-around"));
        // the validate operation still diagnoses it statically
        assert!(validate(&config, "average").iter().any(|d| d.message.contains("guard")));
    }

    #[test]
    fn rotation_approx_frequency() {
        let config = ExperimentConfig::from_json_str(
            r#"{"system": {"rotation": [{"approx": 0.6180339887, "depth": 4}], "guard": 2}}"#,
        )
        .unwrap();
        let out = run(&config, "rank").unwrap();
        // fourth convergent of the golden mean is 3/5, guard 2 gives Z_10
        assert_eq!(out.json["moduli"][0], 10);
        assert_eq!(out.json["generators"][0][0], 6);
    }
}
