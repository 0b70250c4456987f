//! Subcommand dispatch, output files and exit codes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use dyadlab_core::config::GridConfig;
use dyadlab_core::diagnostics::{compactness_report, DecayCurve, ReportConfig, WeightPair};
use dyadlab_core::io::{curves_csv, mesh_csv, write_mesh};
use dyadlab_core::lorentz::{averaged_modulus, lorentz_norm, tail_restrict, translate};
use dyadlab_core::weights::{ap_constant, factorization_check, multilinear_ap_constant};
use dyadlab_core::{Error, MeasureSpec, MeshFunction, Result};
use serde_json::{json, Value};

use crate::experiment::{ExperimentConfig, Format};
use crate::suites::{self, Check, SuiteReport};

pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOLUTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dyadlab", version, about = "Dyadic harmonic analysis experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Haar and grid invariants.
    Selfcheck,
    /// Lorentz quasi-norm and Kolmogorov-Riesz quantities of a function.
    Norm,
    /// Muckenhoupt constants of one or several weights.
    Weights,
    /// Apply an operator and write the result.
    Apply,
    /// Compactness report.
    Diag,
    /// Named counterexample suites.
    Repro {
        #[arg(value_enum)]
        name: ReproName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReproName {
    RankOne,
    LorentzTail,
    Acn,
    RieszWcp,
    #[value(name = "card-DN", alias = "card-dn")]
    CardDn,
}

impl Command {
    fn stem(&self) -> String {
        match self {
            Command::Selfcheck => "selfcheck".into(),
            Command::Norm => "norm".into(),
            Command::Weights => "weights".into(),
            Command::Apply => "apply".into(),
            Command::Diag => "diag".into(),
            Command::Repro { name } => format!("repro-{}", name.to_possible_value().unwrap().get_name()),
        }
    }
}

/// Round-to-nearest-even on the running platform.
pub fn round_to_nearest_even() -> bool {
    let one = std::hint::black_box(1.0f64);
    let eps = std::hint::black_box(f64::EPSILON);
    one + eps / 2.0 == one && one + 1.5 * eps == one + 2.0 * eps && -one - eps / 2.0 == -one
}

struct Artifact {
    result: Value,
    checks: Vec<Check>,
    csv: String,
    mesh: Option<MeshFunction>,
}

impl Artifact {
    fn from_suite(rep: SuiteReport) -> Result<Self> {
        let mut csv = String::from("check,measured,relation,bound,pass\n");
        for c in &rep.checks {
            writeln!(csv, "\"{}\",{},{},{},{}", c.name.replace('"', "'"), c.measured, relation(c), c.bound, c.pass).unwrap();
        }
        for (name, t) in &rep.tables {
            writeln!(csv, "\n# {name}\n{}", t.columns.join(",")).unwrap();
            for row in &t.rows {
                writeln!(csv, "{}", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")).unwrap();
            }
        }
        Ok(Artifact { result: serde_json::to_value(&rep)?, checks: rep.checks, csv, mesh: None })
    }
}

fn relation(c: &Check) -> &'static str {
    match c.relation {
        suites::Relation::Le => "<=",
        suites::Relation::Ge => ">=",
        suites::Relation::Eq => "==",
    }
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::config(format!("the config has no `{what}` section")))
}

fn execute(cmd: Command, cfg: Option<&ExperimentConfig>, seed: u64) -> Result<Artifact> {
    let need = || cfg.ok_or_else(|| Error::config("this subcommand needs --config"));
    match cmd {
        Command::Selfcheck => {
            let grid = cfg.map(|c| c.grid.clone()).unwrap_or(GridConfig { n: 1, l: 6, m: 3, seed: None }).build()?;
            let samples = cfg.and_then(|c| c.selfcheck.as_ref()).map_or(100, |s| s.samples);
            Artifact::from_suite(suites::selfcheck(&grid, samples, seed)?)
        }
        Command::Repro { name } => Artifact::from_suite(match name {
            ReproName::RankOne => {
                let grid = cfg.map(|c| c.grid.clone()).unwrap_or(GridConfig { n: 1, l: 6, m: 6, seed: None }).build()?;
                suites::repro_rank_one(&grid)?
            }
            ReproName::LorentzTail => suites::repro_lorentz_tail()?,
            ReproName::Acn => suites::repro_acn()?,
            ReproName::RieszWcp => suites::repro_riesz_wcp(seed)?,
            ReproName::CardDn => suites::repro_card_dn()?,
        }),
        Command::Norm => {
            let cfg = need()?;
            let grid = cfg.grid.build()?;
            let sec = require(&cfg.norm, "norm")?;
            let f = require(&cfg.function, "function")?.build(&grid)?;
            let mu = match &sec.weight {
                Some(w) => MeasureSpec::weighted(w.build(&grid)?.mesh().clone())?,
                None => MeasureSpec::Lebesgue,
            };
            let norm = |g: &MeshFunction| Ok::<f64, Error>(lorentz_norm(g, sec.p, sec.q, &mu)?.value);
            let res = lorentz_norm(&f, sec.p, sec.q, &mu)?;
            let tails = sec.tails.iter().map(|&a| norm(&tail_restrict(&f, a))).collect::<Result<Vec<_>>>()?;
            let shifts = sec
                .shifts
                .iter()
                .map(|&h| norm(&translate(&f, [h, 0.0])?.sub(&f)?))
                .collect::<Result<Vec<_>>>()?;
            let radii = sec.radii.iter().map(|&r| norm(&averaged_modulus(&f, r, sec.a)?)).collect::<Result<Vec<_>>>()?;
            let curves = [
                ("tail", DecayCurve::new("tail", sec.tails.clone(), tails, 0, 0)),
                ("translation", DecayCurve::new("translation", sec.shifts.clone(), shifts, 0, 0)),
                ("averaged-modulus", DecayCurve::new("averaged-modulus", sec.radii.clone(), radii, 0, 0)),
            ];
            let mut csv = format!("p,q,measure,value\n{},{},{},{}\n\n", res.p, res.q, res.measure, res.value);
            csv += &curves_csv(&curves.iter().map(|(n, c)| (*n, c)).collect::<Vec<_>>());
            let result = json!({
                "norm": res,
                "curves": curves.iter().map(|(_, c)| c).collect::<Vec<_>>(),
            });
            Ok(Artifact { result, checks: Vec::new(), csv, mesh: None })
        }
        Command::Weights => {
            let cfg = need()?;
            let grid = cfg.grid.build()?;
            let sec = require(&cfg.weights, "weights")?;
            let ws = sec.weights.iter().map(|w| w.build(&grid)).collect::<Result<Vec<_>>>()?;
            let report = if ws.len() == 1 {
                serde_json::to_value(ap_constant(&ws[0], sec.p[0])?)?
            } else {
                serde_json::to_value(multilinear_ap_constant(&ws, &sec.p)?)?
            };
            let factorization = if sec.factorization && ws.len() > 1 {
                Some(serde_json::to_value(factorization_check(&ws, &sec.p)?)?)
            } else {
                None
            };
            let mut csv = String::from("key,value\n");
            flatten_csv(&mut csv, "report", &report);
            if let Some(f) = &factorization {
                flatten_csv(&mut csv, "factorization", f);
            }
            Ok(Artifact { result: json!({ "report": report, "factorization": factorization }), checks: Vec::new(), csv, mesh: None })
        }
        Command::Apply => {
            let cfg = need()?;
            let grid = cfg.grid.build()?;
            let t = require(&cfg.operator, "operator")?.build(&grid)?;
            let [a, b] = require(&cfg.inputs, "inputs")?;
            let out = t.apply(&a.build(&grid)?, &b.build(&grid)?)?;
            let result = json!({
                "operator": t.describe(),
                "cells": out.len(),
                "integral": out.integral(),
                "l2": dyadlab_core::lorentz::lp_norm(&out, 2.0, &MeasureSpec::Lebesgue)?,
                "max_abs": out.max_abs(),
            });
            Ok(Artifact { result, checks: Vec::new(), csv: mesh_csv(&out), mesh: Some(out) })
        }
        Command::Diag => {
            let cfg = need()?;
            let grid = cfg.grid.build()?;
            let t = require(&cfg.operator, "operator")?.build(&grid)?;
            let mut rc: ReportConfig = require(&cfg.diagnostics, "diagnostics")?.clone();
            rc.seed = seed;
            let weights = match &cfg.diag_weights {
                Some([w1, w2]) => Some(WeightPair::new(w1.build(&grid)?, w2.build(&grid)?)?),
                None => None,
            };
            let rep = compactness_report(&t, &grid, weights.as_ref(), &rc)?;
            let mut curves: Vec<(&str, &DecayCurve)> = Vec::new();
            if let Some(c) = &rep.projection_tail {
                curves.push(("projection-tail", &c.data));
            }
            if let Some(k) = &rep.kr {
                curves.extend([("kr-tail", &k.tail), ("kr-translation", &k.translation), ("kr-averaged", &k.averaged)]);
            }
            if let Some(w) = &rep.weak_compactness {
                curves.extend([("wcp-small", &w.small), ("wcp-large", &w.large), ("wcp-far", &w.far)]);
            }
            if let Some(k) = &rep.kernel_envelope {
                curves.extend([("kernel-small", &k.small), ("kernel-large", &k.large), ("kernel-far", &k.far)]);
            }
            if let Some(t) = &rep.t11 {
                curves.push(("t11-cmo-tail", &t.tail));
            }
            let csv = curves_csv(&curves);
            Ok(Artifact { result: serde_json::to_value(&rep)?, checks: Vec::new(), csv, mesh: None })
        }
    }
}

fn flatten_csv(out: &mut String, prefix: &str, v: &Value) {
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten_csv(out, &format!("{prefix}.{k}"), v)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten_csv(out, &format!("{prefix}.{i}"), v)),
        Value::String(s) => writeln!(out, "{prefix},{s}").unwrap(),
        other => writeln!(out, "{prefix},{other}").unwrap(),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resolution(_) => EXIT_RESOLUTION,
        _ => EXIT_CONFIG,
    }
}

fn write_out(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn configure_threads(jobs: Option<usize>) {
    let serial = std::env::var("DYADLAB_NO_PARALLEL").is_ok_and(|v| v == "1");
    let threads = if serial { Some(1) } else { jobs };
    if let Some(n) = threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn run(cli: Cli) -> i32 {
    if !round_to_nearest_even() {
        eprintln!("floating point rounding is not round-to-nearest-even");
        return EXIT_ASSERTION;
    }
    configure_threads(cli.jobs);
    let cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        },
        None => None,
    };
    let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let out_dir = cli.out.clone().or_else(|| cfg.as_ref().and_then(|c| c.output.as_ref()?.dir.clone()).map(PathBuf::from));
    let format = cli.format.or_else(|| cfg.as_ref().and_then(|c| c.output.as_ref()?.format)).unwrap_or(Format::Json);
    let stem = cli.command.stem();
    let art = match execute(cli.command, cfg.as_ref(), seed) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    let failures: Vec<&Check> = art.checks.iter().filter(|c| !c.pass).collect();
    let status = if failures.is_empty() { "pass" } else { "fail" };
    let written = (|| -> Result<()> {
        if let (Some(mesh), Some(dir)) = (&art.mesh, out_dir.as_deref()) {
            fs::create_dir_all(dir)?;
            write_mesh(dir.join(format!("{stem}.f64")), mesh)?;
        }
        match format {
            Format::Json => {
                let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                let doc = json!({
                    "command": stem,
                    "seed": seed,
                    "status": status,
                    "result": art.result,
                    "timestamp": timestamp,
                });
                write_out(out_dir.as_deref(), &format!("{stem}.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))
            }
            Format::Csv => write_out(out_dir.as_deref(), &format!("{stem}.csv"), &art.csv),
        }
    })();
    if let Err(e) = written {
        eprintln!("{e}");
        return exit_code(&e);
    }
    if !failures.is_empty() {
        let manifest = json!({ "command": stem, "seed": seed, "failures": failures });
        let text = serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n";
        eprint!("{text}");
        if let Some(d) = out_dir.as_deref() {
            let _ = fs::write(d.join("failures.json"), &text);
        }
        return EXIT_ASSERTION;
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn platform_rounds_to_even() {
        assert!(round_to_nearest_even());
    }

    #[test]
    fn repro_names_parse() {
        let cli = Cli::try_parse_from(["dyadlab", "repro", "card-DN", "--jobs", "2"]).unwrap();
        assert_eq!(cli.command, Command::Repro { name: ReproName::CardDn });
        assert_eq!(cli.command.stem(), "repro-card-DN");
        assert!(Cli::try_parse_from(["dyadlab", "repro", "nope"]).is_err());
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::resolution("x")), EXIT_RESOLUTION);
        assert_eq!(exit_code(&Error::config("x")), EXIT_CONFIG);
        assert!(matches!(execute(Command::Diag, None, 0), Err(Error::Config(_))));
    }
}
