//! Flat `key = value` experiment files.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated
//! and numeric lists also accept an inclusive `start:stop:step` range.
//! Per-solver settings are written `<solver>.<param>`, e.g.
//! `csgl-amp.alpha2 = 0.6`. Unknown keys, duplicate keys and keys that do
//! not apply to the chosen scenario or solver list are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use csgl_amp::harness::{ExperimentConfig, GaussianScenario, OtfsScenario, Scenario, SolverKind, SolverSpec};
use csgl_amp::otfs::{ChannelProfile, VEH_A_DELAY_BINS, VEH_A_POWERS_DB};
use csgl_amp::solvers::{OstConfig, OstRule, SolverConfig, Variant};
use csgl_amp::OnsagerForm;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' {reason}")]
    NotApplicable { line: usize, key: String, reason: String },
    #[error("line {line}: duplicate key '{key}'")]
    Duplicate { line: usize, key: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("line {line}: bad value for '{key}': {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] csgl_amp::Error),
}

pub const SOLVER_IDS: [&str; 5] = ["ost", "ost-topk", "cl-amp", "cgl-amp", "csgl-amp"];
pub const DEFAULT_SOLVERS: [&str; 4] = ["ost-topk", "cl-amp", "cgl-amp", "csgl-amp"];

const OTFS_KEYS: [&str; 6] =
    ["delay_bins", "doppler_bins", "max_delay_shift", "max_doppler_shift", "profile_powers_db", "profile_delay_bins"];
const GAUSSIAN_KEYS: [&str; 3] = ["rows", "group_size", "nonzeros"];
const AMP_PARAMS: [&str; 6] = ["alpha1", "alpha2", "max_iters", "stop_tol", "onsager", "onsager_form"];
const OST_PARAMS: [&str; 2] = ["pfa", "calibration_draws"];

fn params_for(solver: &str) -> &'static [&'static str] {
    match solver {
        "ost" => &OST_PARAMS,
        "ost-topk" => &[],
        "cl-amp" => &["alpha1", "max_iters", "stop_tol", "onsager", "onsager_form"],
        "cgl-amp" => &["alpha2", "max_iters", "stop_tol", "onsager", "onsager_form"],
        _ => &AMP_PARAMS,
    }
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, msg: format!("expected 'key = value', got '{content}'") });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "empty key".into() });
            }
            if map.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
                return Err(ConfigError::Duplicate { line, key });
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                v.parse::<T>().map(Some).map_err(|e| ConfigError::Value { line, key: key.to_string(), msg: format!("'{v}': {e}") })
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)?.ok_or(ConfigError::Missing(key))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.take_raw(key) else { return Ok(None) };
        let err = |msg: String| ConfigError::Value { line, key: key.to_string(), msg };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| item.trim().parse::<T>().map_err(|e| err(format!("'{}': {e}", item.trim()))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Comma list whose items are reals or inclusive `start:stop:step` ranges.
    fn take_reals(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((v, line)) = self.take_raw(key) else { return Ok(None) };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim) {
            let parsed = if item.contains(':') {
                parse_range(item)
            } else {
                item.parse::<f64>().map(|x| vec![x]).map_err(|e| format!("'{item}': {e}"))
            };
            out.extend(parsed.map_err(|msg| ConfigError::Value { line, key: key.to_string(), msg })?);
        }
        Ok(Some(out))
    }
}

/// Inclusive `start:stop:step`; values are rounded to 12 decimals so that
/// `0:1:0.1` yields `0.3` rather than `0.30000000000000004`.
fn parse_range(v: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("range '{v}' must be start:stop:step"));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("'{s}': {e}"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(format!("range '{v}' needs finite start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean")),
    }
}

fn parse_form(v: &str) -> Result<OnsagerForm, String> {
    match v {
        "exact" => Ok(OnsagerForm::Exact),
        "compat" => Ok(OnsagerForm::Compat),
        _ => Err(format!("'{v}' is not an Onsager form (exact | compat)")),
    }
}

fn form_name(f: OnsagerForm) -> &'static str {
    match f {
        OnsagerForm::Exact => "exact",
        OnsagerForm::Compat => "compat",
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

/// Parses and validates a configuration, filling documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut e = Entries::parse(text)?;
    let (kind, kind_line) = e.take_raw("scenario").ok_or(ConfigError::Missing("scenario"))?;
    let groups: usize = e.required("groups")?;
    let scenario = match kind.as_str() {
        "otfs" => {
            let powers: Vec<f64> = e.take_reals("profile_powers_db")?.unwrap_or_else(|| VEH_A_POWERS_DB.to_vec());
            let bins: Vec<usize> = e.take_list("profile_delay_bins")?.unwrap_or_else(|| VEH_A_DELAY_BINS.to_vec());
            Scenario::Otfs(OtfsScenario {
                delay_bins: e.take("delay_bins")?.unwrap_or(31),
                doppler_bins: e.take("doppler_bins")?.unwrap_or(37),
                max_delay_shift: e.take("max_delay_shift")?.unwrap_or(3),
                max_doppler_shift: e.take("max_doppler_shift")?.unwrap_or(2),
                groups,
                profile: ChannelProfile::from_db(&powers, &bins)?,
            })
        }
        "gaussian" => Scenario::Gaussian(GaussianScenario {
            rows: e.required("rows")?,
            groups,
            group_size: e.required("group_size")?,
            nonzeros: e.required("nonzeros")?,
        }),
        other => {
            return Err(ConfigError::Value {
                line: kind_line,
                key: "scenario".into(),
                msg: format!("'{other}' is not a scenario (otfs | gaussian)"),
            })
        }
    };

    let active: usize = e.required("active")?;
    let snr_points = e.take_reals("snr_db")?.ok_or(ConfigError::Missing("snr_db"))?;
    let solver_line = e.map.get("solvers").map_or(0, |(_, l)| *l);
    let solver_names: Vec<String> =
        e.take_list::<String>("solvers")?.unwrap_or_else(|| DEFAULT_SOLVERS.iter().map(|s| s.to_string()).collect());
    let mut solvers = Vec::with_capacity(solver_names.len());
    for name in &solver_names {
        solvers.push(parse_solver(&mut e, name, solver_line)?);
    }

    let mut config = ExperimentConfig::new(scenario, active, solvers);
    config.snr_points = snr_points;
    if let Some(t) = e.take("trials")? {
        config.trials = t;
    }
    if let Some(s) = e.take("seed")? {
        config.seed = s;
    }
    if let Some(t) = e.take("target_pmd")? {
        config.target_pmd = t;
    }
    if let Some(d) = e.take_reals("delta_grid")? {
        config.delta_grid = d;
    }
    if let Some(r) = e.take_reals("rho_grid")? {
        config.rho_grid = r;
    }
    if let Some((v, line)) = e.take_raw("record_timing") {
        config.record_timing = parse_bool(&v).map_err(|msg| ConfigError::Value { line, key: "record_timing".into(), msg })?;
    }

    if let Some((key, (_, line))) = e.map.into_iter().next() {
        return Err(leftover(key, line, &kind, &solver_names));
    }
    config.validate()?;
    Ok(config)
}

fn parse_solver(e: &mut Entries, name: &str, line: usize) -> Result<SolverSpec, ConfigError> {
    let key = |p: &str| format!("{name}.{p}");
    let bad = |k: String, line: usize, msg: String| ConfigError::Value { line, key: k, msg };
    let variant = match name {
        "ost" => {
            let pfa = e.take(&key("pfa"))?.unwrap_or(1e-3);
            let draws = e.take(&key("calibration_draws"))?.unwrap_or(OstConfig::default().calibration_draws);
            return Ok(SolverSpec::ost(OstConfig { rule: OstRule::NullQuantile { pfa }, calibration_draws: draws }));
        }
        "ost-topk" => return Ok(SolverSpec::ost(OstConfig { rule: OstRule::TopK, ..OstConfig::default() })),
        "cl-amp" => Variant::Cl,
        "cgl-amp" => Variant::Cgl,
        "csgl-amp" => Variant::Csgl,
        other => return Err(bad("solvers".into(), line, format!("'{other}' is not a solver ({})", SOLVER_IDS.join(" | ")))),
    };
    let mut cfg = SolverConfig::variant(variant);
    let applies = params_for(name);
    if applies.contains(&"alpha1") {
        if let Some(v) = e.take(&key("alpha1"))? {
            cfg.alpha1 = v;
        }
    }
    if applies.contains(&"alpha2") {
        if let Some(v) = e.take(&key("alpha2"))? {
            cfg.alpha2 = v;
        }
    }
    if let Some(v) = e.take(&key("max_iters"))? {
        cfg.max_iters = v;
    }
    if let Some(v) = e.take(&key("stop_tol"))? {
        cfg.stop_tol = v;
    }
    if let Some((v, l)) = e.take_raw(&key("onsager")) {
        cfg.onsager = parse_bool(&v).map_err(|m| bad(key("onsager"), l, m))?;
    }
    if let Some((v, l)) = e.take_raw(&key("onsager_form")) {
        cfg.onsager_form = parse_form(&v).map_err(|m| bad(key("onsager_form"), l, m))?;
    }
    Ok(SolverSpec::amp(cfg))
}

fn leftover(key: String, line: usize, scenario: &str, solvers: &[String]) -> ConfigError {
    let not = |reason: String| ConfigError::NotApplicable { line, key: key.clone(), reason };
    if OTFS_KEYS.contains(&key.as_str()) || GAUSSIAN_KEYS.contains(&key.as_str()) {
        return not(format!("does not apply to scenario '{scenario}'"));
    }
    if let Some((solver, param)) = key.split_once('.') {
        if SOLVER_IDS.contains(&solver) && (AMP_PARAMS.contains(&param) || OST_PARAMS.contains(&param)) {
            if !solvers.iter().any(|s| s == solver) {
                return not(format!("names solver '{solver}', which is not in 'solvers'"));
            }
            return not(format!("is not a parameter of '{solver}'"));
        }
    }
    ConfigError::UnknownKey { line, key }
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical text form: every resolved value, fixed key order. Parsing the
/// output yields an equal configuration.
pub fn serialize_config(c: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    match &c.scenario {
        Scenario::Otfs(o) => {
            line("scenario", "otfs".into());
            line("delay_bins", o.delay_bins.to_string());
            line("doppler_bins", o.doppler_bins.to_string());
            line("max_delay_shift", o.max_delay_shift.to_string());
            line("max_doppler_shift", o.max_doppler_shift.to_string());
            line("profile_powers_db", join(o.profile.powers_db()));
            line("profile_delay_bins", join(o.profile.delay_bins()));
            line("groups", o.groups.to_string());
        }
        Scenario::Gaussian(g) => {
            line("scenario", "gaussian".into());
            line("rows", g.rows.to_string());
            line("group_size", g.group_size.to_string());
            line("nonzeros", g.nonzeros.to_string());
            line("groups", g.groups.to_string());
        }
    }
    line("active", c.active.to_string());
    line("snr_db", join(&c.snr_points));
    line("trials", c.trials.to_string());
    line("seed", c.seed.to_string());
    line("target_pmd", c.target_pmd.to_string());
    line("delta_grid", join(&c.delta_grid));
    line("rho_grid", join(&c.rho_grid));
    line("record_timing", c.record_timing.to_string());
    let names: Vec<&str> = c.solvers.iter().map(|s| s.name.as_str()).collect();
    line("solvers", names.join(", "));
    for s in &c.solvers {
        let applies = params_for(&s.name);
        match &s.kind {
            SolverKind::Amp(cfg) => {
                if applies.contains(&"alpha1") {
                    line(&format!("{}.alpha1", s.name), cfg.alpha1.to_string());
                }
                if applies.contains(&"alpha2") {
                    line(&format!("{}.alpha2", s.name), cfg.alpha2.to_string());
                }
                line(&format!("{}.max_iters", s.name), cfg.max_iters.to_string());
                line(&format!("{}.stop_tol", s.name), cfg.stop_tol.to_string());
                line(&format!("{}.onsager", s.name), cfg.onsager.to_string());
                line(&format!("{}.onsager_form", s.name), form_name(cfg.onsager_form).into());
            }
            SolverKind::Ost(cfg) => {
                if let OstRule::NullQuantile { pfa } = cfg.rule {
                    line(&format!("{}.pfa", s.name), pfa.to_string());
                    line(&format!("{}.calibration_draws", s.name), cfg.calibration_draws.to_string());
                }
            }
        }
    }
    out
}
