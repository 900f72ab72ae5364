//! Scenario files: `[section]` headers and `key = value` lines, `#` comments.
//! Lists are comma separated, optionally wrapped in brackets. All lengths are
//! in meters and every decibel quantity carries a `_db` suffix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::SurfaceConfig;
use crate::joint::AltOptParams;
use crate::position::EpsoParams;

use super::{Architecture, ChannelSpec, FitMethod, FitSpec, ScenarioSpec};

const REQUIRED: &[&str] = &["scenario.architecture"];

struct Entry {
    value: String,
    line: usize,
}

/// Parses a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioSpec> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioSpec> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = strip_comment(raw).trim();
        if t.is_empty() {
            continue;
        }
        if let Some(name) = t.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                key: t.to_string(),
                line,
                reason: "unterminated section header".into(),
            })?;
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| Error::Parse {
            key: t.to_string(),
            line,
            reason: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let full = match &section {
            Some(s) => format!("{s}.{key}"),
            None => {
                return Err(Error::Parse {
                    key: key.to_string(),
                    line,
                    reason: "key outside of any [section]".into(),
                })
            }
        };
        if entries.contains_key(&full) {
            return Err(Error::Parse {
                key: full,
                line,
                reason: "duplicate key".into(),
            });
        }
        entries.insert(
            full,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }

    let unknown: Vec<String> = entries
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| !entries.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingKeys {
            keys: missing,
            defaults: defaults_table(),
        });
    }

    let mut r = Reader { entries: &entries };
    let d = ScenarioSpec::default();

    let wavelength_m = r.get("surface.wavelength_m", d.surface.wavelength_m)?;
    let spacing_h_m = r.get("surface.spacing_h_m", d.surface.spacing_h_m)?;
    let spacing_v_m = r.get("surface.spacing_v_m", d.surface.spacing_v_m)?;
    let surface = SurfaceConfig {
        wavelength_m,
        spacing_h_m,
        spacing_v_m,
        n_h: r.get("surface.n_h", d.surface.n_h)?,
        n_v: r.get("surface.n_v", d.surface.n_v)?,
        num_active: r.get("surface.num_active", d.surface.num_active)?,
        min_distance_m: r.get("surface.min_distance_m", spacing_h_m.max(spacing_v_m))?,
    };

    let spec = ScenarioSpec {
        compact_spacing_m: r.get("surface.compact_spacing_m", 0.5 * wavelength_m)?,
        surface,
        architecture: r.get("scenario.architecture", d.architecture)?,
        num_bs_antennas: r.get("scenario.num_bs_antennas", d.num_bs_antennas)?,
        gamma_bar_grid_db: r.list("scenario.gamma_bar_grid_db", d.gamma_bar_grid_db.clone())?,
        trials: r.get("scenario.trials", d.trials)?,
        rate: r.get("scenario.rate", d.rate)?,
        master_seed: r.get("scenario.master_seed", d.master_seed)?,
        channel: ChannelSpec {
            beta1_db: r.get("pathloss.beta1_db", d.channel.beta1_db)?,
            beta2_db: r.get("pathloss.beta2_db", d.channel.beta2_db)?,
            arg_scale: r.get("channel.arg_scale", d.channel.arg_scale)?,
            jitter_floor: r.get("channel.jitter_floor", d.channel.jitter_floor)?,
        },
        epso: EpsoParams {
            swarm_size: r.get("epso.swarm_size", d.epso.swarm_size)?,
            max_iter: r.get("epso.max_iter", d.epso.max_iter)?,
            inertia: r.get("epso.inertia", d.epso.inertia)?,
            c1: r.get("epso.c1", d.epso.c1)?,
            c2: r.get("epso.c2", d.epso.c2)?,
            mutation_std_m: r.get("epso.mutation_std_m", spacing_h_m)?,
            rng_seed: 0,
        },
        altopt: AltOptParams {
            tolerance: r.get("altopt.tolerance", d.altopt.tolerance)?,
            max_iter: r.get("altopt.max_iter", d.altopt.max_iter)?,
        },
        fit: FitSpec {
            q: r.get("fit.q", d.fit.q)?,
            t_sp: r.get("fit.t_sp", d.fit.t_sp)?,
            tol: r.get("fit.tol", d.fit.tol)?,
            methods: r.list("fit.methods", d.fit.methods.clone())?,
        },
    };
    if let Err(e) = spec.validate() {
        // point validation failures at the offending line when the key is present
        if let Error::Config { field, reason } = &e {
            if let Some((k, entry)) = entries.iter().find(|(k, _)| k.rsplit('.').next() == Some(field)) {
                return Err(Error::Parse {
                    key: k.clone(),
                    line: entry.line,
                    reason: reason.clone(),
                });
            }
        }
        return Err(e);
    }
    Ok(spec)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, Entry>,
}

impl Reader<'_> {
    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => parse_scalar(key, e),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(default);
        };
        let inner = e.value.trim();
        let inner = inner
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .unwrap_or(inner);
        inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                unquote(item).parse::<T>().map_err(|err| Error::Parse {
                    key: key.to_string(),
                    line: e.line,
                    reason: format!("`{item}`: {err}"),
                })
            })
            .collect()
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(s)
}

fn parse_scalar<T: FromStr>(key: &str, e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    unquote(&e.value).parse::<T>().map_err(|err| Error::Parse {
        key: key.to_string(),
        line: e.line,
        reason: format!("`{}`: {err}", e.value),
    })
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.architecture",
    "scenario.num_bs_antennas",
    "scenario.gamma_bar_grid_db",
    "scenario.trials",
    "scenario.rate",
    "scenario.master_seed",
    "surface.wavelength_m",
    "surface.spacing_h_m",
    "surface.spacing_v_m",
    "surface.n_h",
    "surface.n_v",
    "surface.num_active",
    "surface.min_distance_m",
    "surface.compact_spacing_m",
    "pathloss.beta1_db",
    "pathloss.beta2_db",
    "channel.arg_scale",
    "channel.jitter_floor",
    "epso.swarm_size",
    "epso.max_iter",
    "epso.inertia",
    "epso.c1",
    "epso.c2",
    "epso.mutation_std_m",
    "altopt.tolerance",
    "altopt.max_iter",
    "fit.q",
    "fit.t_sp",
    "fit.tol",
    "fit.methods",
];

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Serializes a spec so that `parse_config_str(&emit_config(s)) == s`.
pub fn emit_config(s: &ScenarioSpec) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "[scenario]");
    let _ = writeln!(o, "architecture = {}", s.architecture);
    let _ = writeln!(o, "num_bs_antennas = {}", s.num_bs_antennas);
    let _ = writeln!(o, "gamma_bar_grid_db = {}", join(&s.gamma_bar_grid_db));
    let _ = writeln!(o, "trials = {}", s.trials);
    let _ = writeln!(o, "rate = {}", s.rate);
    let _ = writeln!(o, "master_seed = {}", s.master_seed);
    let _ = writeln!(o, "\n[surface]");
    let _ = writeln!(o, "wavelength_m = {}", s.surface.wavelength_m);
    let _ = writeln!(o, "spacing_h_m = {}", s.surface.spacing_h_m);
    let _ = writeln!(o, "spacing_v_m = {}", s.surface.spacing_v_m);
    let _ = writeln!(o, "n_h = {}", s.surface.n_h);
    let _ = writeln!(o, "n_v = {}", s.surface.n_v);
    let _ = writeln!(o, "num_active = {}", s.surface.num_active);
    let _ = writeln!(o, "min_distance_m = {}", s.surface.min_distance_m);
    let _ = writeln!(o, "compact_spacing_m = {}", s.compact_spacing_m);
    let _ = writeln!(o, "\n[pathloss]");
    let _ = writeln!(o, "beta1_db = {}", s.channel.beta1_db);
    let _ = writeln!(o, "beta2_db = {}", s.channel.beta2_db);
    let _ = writeln!(o, "\n[channel]");
    let _ = writeln!(o, "arg_scale = {}", s.channel.arg_scale);
    let _ = writeln!(o, "jitter_floor = {}", s.channel.jitter_floor);
    let _ = writeln!(o, "\n[epso]");
    let _ = writeln!(o, "swarm_size = {}", s.epso.swarm_size);
    let _ = writeln!(o, "max_iter = {}", s.epso.max_iter);
    let _ = writeln!(o, "inertia = {}", s.epso.inertia);
    let _ = writeln!(o, "c1 = {}", s.epso.c1);
    let _ = writeln!(o, "c2 = {}", s.epso.c2);
    let _ = writeln!(o, "mutation_std_m = {}", s.epso.mutation_std_m);
    let _ = writeln!(o, "\n[altopt]");
    let _ = writeln!(o, "tolerance = {}", s.altopt.tolerance);
    let _ = writeln!(o, "max_iter = {}", s.altopt.max_iter);
    let _ = writeln!(o, "\n[fit]");
    let _ = writeln!(o, "q = {}", s.fit.q);
    let _ = writeln!(o, "t_sp = {}", s.fit.t_sp);
    let _ = writeln!(o, "tol = {}", s.fit.tol);
    let _ = writeln!(o, "methods = {}", join(&s.fit.methods));
    o
}

fn defaults_table() -> String {
    let mut o = String::from("defaults:\n");
    for line in emit_config(&ScenarioSpec::default()).lines() {
        if !line.is_empty() {
            let _ = writeln!(o, "  {line}");
        }
    }
    o
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Architecture::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Architecture::ALL.iter().map(|a| a.name()).collect();
                format!("expected one of {}", names.join(", "))
            })
    }
}

impl FromStr for FitMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "em" => Ok(FitMethod::Em),
            "mom" => Ok(FitMethod::Mom),
            "ks" => Ok(FitMethod::Ks),
            _ => Err("expected em, mom or ks".into()),
        }
    }
}
