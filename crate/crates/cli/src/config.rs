//! Configuration files: flat-sectioned text with explicit keys, strict
//! schema (unknown sections or keys are rejected), and full error collection
//! (validation reports every problem, not just the first).
//!
//! ```text
//! [system]
//! type = two_row          # two_row | homogeneous | custom
//! d = 800                 # two_row only
//! k1 = 100
//! k2 = 150
//! k3 = 200
//! mass_file = m.txt       # custom only: count header + values
//! stiffness_file = k.txt  # custom only: rows cols header + row-major values
//!
//! [internal]
//! model = critical_proportional   # or rayleigh
//! alpha = 0.02
//! beta = 0.005            # rayleigh only
//!
//! [dampers]
//! damper = grounded 50
//! damper = connecting 220 620
//! viscosities = 721.1 656.5 415.4   # used by command = trace
//!
//! [criterion]
//! s = 27
//!
//! [optimize]
//! lo = 0.01
//! hi = 10000
//! initial = 10 10 10
//! budget = 300
//! tol = 1e-6
//! multistarts = 0 1.5 2.5
//! history = false
//! basis = phase           # or transformed
//!
//! [sweep]
//! candidate = grounded 50; grounded 950; connecting 220 620
//!
//! [run]
//! command = optimize      # trace | optimize | sweep | bench | check
//! threads = 2
//! seed = 1
//! out = report.txt
//! format = table          # or records
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use viscopt::dense::RMat;
use viscopt::model::{DamperSpec, InternalDampingModel, MassSpringSystem};
use viscopt::optimize::{CriterionBasis, OptimizerSettings};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemCfg {
    TwoRow { d: usize, k1: f64, k2: f64, k3: f64 },
    Homogeneous,
    Custom { mass_file: PathBuf, stiffness_file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Trace,
    Optimize,
    Sweep,
    Bench,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::Optimize => "optimize",
            Command::Sweep => "sweep",
            Command::Bench => "bench",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Records,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemCfg,
    pub internal: InternalDampingModel,
    pub dampers: Vec<DamperSpec>,
    pub viscosities: Option<Vec<f64>>,
    pub s: usize,
    pub settings: OptimizerSettings,
    pub sweep: Vec<Vec<DamperSpec>>,
    pub command: Command,
    pub threads: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// flattened `section.key = value` pairs for the report echo
    pub echo: Vec<(String, String)>,
}

/// Parse and fully validate a configuration file. On failure every detected
/// problem is reported.
pub fn load(path: &Path) -> Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("cannot read config {}: {e}", path.display())])?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse(&text, &base)
}

const SECTIONS: &[&str] = &["system", "internal", "dampers", "criterion", "optimize", "sweep", "run"];

const KEYS: &[(&str, &[&str])] = &[
    ("system", &["type", "d", "k1", "k2", "k3", "mass_file", "stiffness_file"]),
    ("internal", &["model", "alpha", "beta"]),
    ("dampers", &["damper", "viscosities"]),
    ("criterion", &["s"]),
    ("optimize", &["lo", "hi", "initial", "budget", "tol", "multistarts", "history", "basis"]),
    ("sweep", &["candidate"]),
    ("run", &["command", "threads", "seed", "out", "format"]),
];

struct Raw {
    /// (section, key) -> values in file order (repeatable keys keep all)
    map: BTreeMap<(String, String), Vec<String>>,
    echo: Vec<(String, String)>,
}

fn parse_raw(text: &str, errors: &mut Vec<String>) -> Raw {
    let mut map: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    let mut echo = Vec::new();
    let mut section = String::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if !SECTIONS.contains(&section.as_str()) {
                errors.push(format!("line {}: unknown section [{section}]", lineno + 1));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value', got '{line}'", lineno + 1));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            errors.push(format!("line {}: key '{key}' outside any section", lineno + 1));
            continue;
        }
        let allowed = KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, ks)| ks.contains(&key.as_str()))
            .unwrap_or(false);
        if !allowed {
            errors.push(format!("line {}: unknown key '{section}.{key}'", lineno + 1));
            continue;
        }
        echo.push((format!("{section}.{key}"), value.clone()));
        map.entry((section.clone(), key)).or_default().push(value);
    }
    Raw { map, echo }
}

impl Raw {
    fn single(&self, section: &str, key: &str, errors: &mut Vec<String>) -> Option<String> {
        let vals = self.map.get(&(section.to_string(), key.to_string()))?;
        if vals.len() > 1 {
            errors.push(format!("{section}.{key}: given {} times, expected once", vals.len()));
        }
        vals.last().cloned()
    }

    fn repeated(&self, section: &str, key: &str) -> Vec<String> {
        self.map
            .get(&(section.to_string(), key.to_string()))
            .cloned()
            .unwrap_or_default()
    }
}

fn parse_f64(s: &str, path: &str, errors: &mut Vec<String>) -> Option<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(format!("{path}: expected a finite number, got '{s}'"));
            None
        }
    }
}

fn parse_usize(s: &str, path: &str, errors: &mut Vec<String>) -> Option<usize> {
    match s.parse::<usize>() {
        Ok(v) => Some(v),
        Err(_) => {
            errors.push(format!("{path}: expected a nonnegative integer, got '{s}'"));
            None
        }
    }
}

fn parse_f64_list(s: &str, path: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        out.push(parse_f64(tok, path, errors)?);
    }
    Some(out)
}

fn parse_damper(s: &str, path: &str, errors: &mut Vec<String>) -> Option<DamperSpec> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    match toks.as_slice() {
        ["grounded", i] => parse_usize(i, path, errors).map(|index| DamperSpec::Grounded { index }),
        ["connecting", i, j] => {
            let index = parse_usize(i, path, errors)?;
            let partner = parse_usize(j, path, errors)?;
            Some(DamperSpec::Connecting { index, partner })
        }
        _ => {
            errors.push(format!(
                "{path}: expected 'grounded INDEX' or 'connecting INDEX PARTNER', got '{s}'"
            ));
            None
        }
    }
}

fn parse(text: &str, base: &Path) -> Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    let raw = parse_raw(text, &mut errors);

    // [system]
    let system = match raw.single("system", "type", &mut errors).as_deref() {
        Some("two_row") => {
            let d = raw
                .single("system", "d", &mut errors)
                .and_then(|v| parse_usize(&v, "system.d", &mut errors));
            let mut ks = [0.0f64; 3];
            let mut ok = d.is_some();
            for (slot, key) in ks.iter_mut().zip(["k1", "k2", "k3"]) {
                match raw
                    .single("system", key, &mut errors)
                    .and_then(|v| parse_f64(&v, &format!("system.{key}"), &mut errors))
                {
                    Some(v) => *slot = v,
                    None => {
                        errors.push(format!("system.{key}: required for type = two_row"));
                        ok = false;
                    }
                }
            }
            ok.then(|| SystemCfg::TwoRow { d: d.unwrap(), k1: ks[0], k2: ks[1], k3: ks[2] })
        }
        Some("homogeneous") => Some(SystemCfg::Homogeneous),
        Some("custom") => {
            let mf = raw.single("system", "mass_file", &mut errors);
            let sf = raw.single("system", "stiffness_file", &mut errors);
            match (mf, sf) {
                (Some(m), Some(s)) => Some(SystemCfg::Custom {
                    mass_file: base.join(m),
                    stiffness_file: base.join(s),
                }),
                _ => {
                    errors.push(
                        "system: custom type requires mass_file and stiffness_file".to_string(),
                    );
                    None
                }
            }
        }
        Some(other) => {
            errors.push(format!(
                "system.type: expected two_row | homogeneous | custom, got '{other}'"
            ));
            None
        }
        None => {
            errors.push("system.type: required".to_string());
            None
        }
    };

    // [internal]
    let alpha = raw
        .single("internal", "alpha", &mut errors)
        .and_then(|v| parse_f64(&v, "internal.alpha", &mut errors));
    let beta = raw
        .single("internal", "beta", &mut errors)
        .and_then(|v| parse_f64(&v, "internal.beta", &mut errors));
    let internal = match raw.single("internal", "model", &mut errors).as_deref() {
        Some("critical_proportional") | None => {
            if raw.map.contains_key(&("internal".into(), "beta".into())) {
                errors.push("internal.beta: only valid for model = rayleigh".to_string());
            }
            alpha.map(|alpha| InternalDampingModel::CriticalProportional { alpha })
        }
        Some("rayleigh") => match (alpha, beta) {
            (Some(alpha), Some(beta)) => Some(InternalDampingModel::Rayleigh { alpha, beta }),
            _ => {
                errors.push("internal: rayleigh model requires alpha and beta".to_string());
                None
            }
        },
        Some(other) => {
            errors.push(format!(
                "internal.model: expected critical_proportional | rayleigh, got '{other}'"
            ));
            None
        }
    };

    // [dampers]
    let dampers: Vec<DamperSpec> = raw
        .repeated("dampers", "damper")
        .iter()
        .filter_map(|v| parse_damper(v, "dampers.damper", &mut errors))
        .collect();
    let viscosities = raw
        .single("dampers", "viscosities", &mut errors)
        .and_then(|v| parse_f64_list(&v, "dampers.viscosities", &mut errors));

    // [criterion]
    let s = match raw.single("criterion", "s", &mut errors) {
        Some(v) => parse_usize(&v, "criterion.s", &mut errors),
        None => {
            errors.push("criterion.s: required".to_string());
            None
        }
    };

    // [optimize]
    let mut settings = OptimizerSettings::default();
    if let Some(v) = raw.single("optimize", "lo", &mut errors) {
        if let Some(x) = parse_f64(&v, "optimize.lo", &mut errors) {
            settings.lo = x;
        }
    }
    if let Some(v) = raw.single("optimize", "hi", &mut errors) {
        if let Some(x) = parse_f64(&v, "optimize.hi", &mut errors) {
            settings.hi = x;
        }
    }
    if let Some(v) = raw.single("optimize", "initial", &mut errors) {
        settings.initial = parse_f64_list(&v, "optimize.initial", &mut errors);
    }
    if let Some(v) = raw.single("optimize", "budget", &mut errors) {
        if let Some(x) = parse_usize(&v, "optimize.budget", &mut errors) {
            settings.max_evals = x;
        }
    }
    if let Some(v) = raw.single("optimize", "tol", &mut errors) {
        if let Some(x) = parse_f64(&v, "optimize.tol", &mut errors) {
            settings.tol = x;
        }
    }
    if let Some(v) = raw.single("optimize", "multistarts", &mut errors) {
        if let Some(x) = parse_f64_list(&v, "optimize.multistarts", &mut errors) {
            settings.multistart_offsets = x;
        }
    }
    if let Some(v) = raw.single("optimize", "history", &mut errors) {
        match v.as_str() {
            "true" => settings.keep_history = true,
            "false" => settings.keep_history = false,
            other => errors.push(format!("optimize.history: expected true|false, got '{other}'")),
        }
    }
    if let Some(v) = raw.single("optimize", "basis", &mut errors) {
        match v.as_str() {
            "phase" => settings.criterion_basis = CriterionBasis::PhaseSelector,
            "transformed" => settings.criterion_basis = CriterionBasis::TransformedSelector,
            other => errors.push(format!("optimize.basis: expected phase|transformed, got '{other}'")),
        }
    }

    // [sweep]
    let mut sweep = Vec::new();
    for cand in raw.repeated("sweep", "candidate") {
        let specs: Vec<DamperSpec> = cand
            .split(';')
            .filter_map(|part| parse_damper(part.trim(), "sweep.candidate", &mut errors))
            .collect();
        sweep.push(specs);
    }

    // [run]
    let command = match raw.single("run", "command", &mut errors).as_deref() {
        Some("trace") => Some(Command::Trace),
        Some("optimize") => Some(Command::Optimize),
        Some("sweep") => Some(Command::Sweep),
        Some("bench") => Some(Command::Bench),
        Some("check") => Some(Command::Check),
        Some(other) => {
            errors.push(format!(
                "run.command: expected trace | optimize | sweep | bench | check, got '{other}'"
            ));
            None
        }
        None => {
            errors.push("run.command: required".to_string());
            None
        }
    };
    let threads = raw
        .single("run", "threads", &mut errors)
        .and_then(|v| parse_usize(&v, "run.threads", &mut errors));
    let seed = raw
        .single("run", "seed", &mut errors)
        .and_then(|v| v.parse::<u64>().ok().or_else(|| {
            errors.push(format!("run.seed: expected an integer, got '{v}'"));
            None
        }))
        .unwrap_or(0);
    let out = raw.single("run", "out", &mut errors).map(|v| base.join(v));
    let format = match raw.single("run", "format", &mut errors).as_deref() {
        Some("records") => OutputFormat::Records,
        Some("table") | None => OutputFormat::Table,
        Some(other) => {
            errors.push(format!("run.format: expected table|records, got '{other}'"));
            OutputFormat::Table
        }
    };

    // semantic validation needing the assembled pieces
    let (Some(system), Some(internal), Some(s), Some(command)) =
        (system, internal, s, command)
    else {
        return Err(errors);
    };
    if internal.validate().is_err() {
        errors.push("internal: damping coefficients must be nonnegative".to_string());
    }
    let n = match &system {
        SystemCfg::TwoRow { d, .. } => {
            if *d < 2 || d % 2 != 0 {
                errors.push(format!("system.d: must be even and >= 2, got {d}"));
            }
            2 * d + 1
        }
        SystemCfg::Homogeneous => 2001,
        SystemCfg::Custom { mass_file, stiffness_file } => {
            for f in [mass_file, stiffness_file] {
                if !f.exists() {
                    errors.push(format!("system: referenced file {} does not exist", f.display()));
                }
            }
            load_vector(mass_file).map(|v| v.len()).unwrap_or(0)
        }
    };
    if s == 0 || (n > 0 && s > n) {
        errors.push(format!("criterion.s: must satisfy 1 <= s <= n = {n}, got {s}"));
    }
    for (i, d) in dampers.iter().enumerate() {
        if n > 0 {
            if let Err(e) = d.validate(n) {
                errors.push(format!("dampers.damper[{}]: {e}", i + 1));
            }
        }
    }
    match command {
        Command::Optimize if dampers.is_empty() => {
            errors.push("dampers: at least one damper is required for command = optimize".into())
        }
        Command::Trace => {
            match &viscosities {
                None => errors
                    .push("dampers.viscosities: required for command = trace".to_string()),
                Some(v) if v.len() != dampers.len() => errors.push(format!(
                    "dampers.viscosities: {} values for {} dampers",
                    v.len(),
                    dampers.len()
                )),
                _ => {}
            }
        }
        Command::Sweep if sweep.is_empty() => {
            errors.push("sweep.candidate: at least one candidate is required".to_string())
        }
        _ => {}
    }
    if !(settings.lo > 0.0 && settings.lo < settings.hi) {
        errors.push(format!(
            "optimize: bounds must satisfy 0 < lo < hi, got [{}, {}]",
            settings.lo, settings.hi
        ));
    }
    if let Some(init) = &settings.initial {
        if init.len() != dampers.len() {
            errors.push(format!(
                "optimize.initial: {} values for {} dampers",
                init.len(),
                dampers.len()
            ));
        }
        for &v in init {
            if !(v >= settings.lo && v <= settings.hi) {
                errors.push(format!("optimize.initial: {v} outside bounds"));
            }
        }
    }
    if settings.max_evals == 0 {
        errors.push("optimize.budget: must be positive".to_string());
    }

    if errors.is_empty() {
        Ok(RunConfig {
            system,
            internal,
            dampers,
            viscosities,
            s,
            settings,
            sweep,
            command,
            threads,
            seed,
            out,
            format,
            echo: raw.echo,
        })
    } else {
        Err(errors)
    }
}

/// Plain-text vector file: count header, then that many values.
pub fn load_vector(path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut toks = text.split_whitespace();
    let count: usize = toks
        .next()
        .ok_or_else(|| format!("{}: empty file", path.display()))?
        .parse()
        .map_err(|_| format!("{}: bad count header", path.display()))?;
    let vals: Result<Vec<f64>, _> = toks.take(count).map(|t| t.parse::<f64>()).collect();
    let vals = vals.map_err(|_| format!("{}: bad numeric value", path.display()))?;
    if vals.len() != count {
        return Err(format!("{}: expected {count} values, found {}", path.display(), vals.len()));
    }
    Ok(vals)
}

/// Plain-text matrix file: `rows cols` header, then row-major values.
pub fn load_matrix(path: &Path) -> Result<RMat, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut toks = text.split_whitespace();
    let rows: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| format!("{}: bad rows header", path.display()))?;
    let cols: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| format!("{}: bad cols header", path.display()))?;
    let mut m = RMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v: f64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format!("{}: missing value at ({i},{j})", path.display()))?;
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

impl SystemCfg {
    pub fn build(&self) -> Result<MassSpringSystem, String> {
        match self {
            SystemCfg::TwoRow { d, k1, k2, k3 } => viscopt::model::build_two_row_oscillator(
                *d,
                *k1,
                *k2,
                *k3,
                viscopt::model::MassProfile::PaperLarge,
            )
            .map_err(|e| e.to_string()),
            SystemCfg::Homogeneous => Ok(viscopt::model::build_homogeneous_oscillator()),
            SystemCfg::Custom { mass_file, stiffness_file } => {
                let masses = load_vector(mass_file)?;
                let k = load_matrix(stiffness_file)?;
                MassSpringSystem::new(masses, k, "custom").map_err(|e| e.to_string())
            }
        }
    }

}
