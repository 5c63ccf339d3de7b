//! Command-line driver: fixture catalog, JSON config, check runners and reports.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::birkhoff::{birkhoff_factorize, gmt_report};
use crate::cohring::{sign, BaseKind, Q};
use crate::defect::{check_all_triples, pairing_check};
use crate::extremal::{delta_series, f_series, functional_equation_check, two_point_series};
use crate::flopmodel::FlopModel;
use crate::ifunc::{assemble_i, quasi_linearity_check, vanishing_violations, TruncationWindow};
use crate::pfops::{check_annihilation, pf_ideal_check, picard_fuchs_ops};
use crate::qlh::{
    birkhoff_cross_check, build_connection, coefficient_shape_check, fit_rational, flatness_check, gauge_reduce,
    invariance_check, sigma, LiftChoice,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown fixture {0}")]
    Fixture(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "flopcalc", version, about = "Exact checks on local models of split ordinary flops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Pairing preservation and the triple-product defect.
    Defect(Common),
    /// Extremal functional equations and two-point consistency.
    Extremal(Common),
    /// Truncated I-function: quasi-linearity and vanishing.
    Ifun(Common),
    /// Picard–Fuchs annihilation and ideal invariance.
    PfCheck(Common),
    /// Birkhoff factorization and the mirror transform.
    Bf(Common),
    /// Connection matrices, flatness, coefficient shape and gauge reduction.
    Qlh(Common),
    /// Invariance of the structure constants across the flop.
    Invariance(Common),
    /// Every check above.
    All(Common),
}

#[derive(Args, Debug, Clone, PartialEq, Eq)]
pub struct Common {
    /// Built-in fixture name.
    #[arg(long, conflicts_with = "config")]
    pub fixture: Option<String>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Window `B,D,D2` (base degree, d, d₂ bounds).
    #[arg(long, value_parser = parse_window)]
    pub window: Option<TruncationWindow>,
    /// Single extremal index ν.
    #[arg(long)]
    pub nu: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report on stdout.
    #[arg(long)]
    pub json: bool,
}

fn parse_window(s: &str) -> Result<TruncationWindow, String> {
    let v: Vec<i64> = s.split(',').map(|p| p.trim().parse::<i64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [b, d, d2] if *b >= 0 && *d >= 0 && *d2 >= 0 => Ok(TruncationWindow::new(*b, *d, *d2)),
        _ => Err(format!("expected three nonnegative integers B,D,D2, got {s}")),
    }
}

/// Base of a config, e.g. `"point"`, `{"projspace": 2}` or `{"product": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseSpec {
    Point,
    Projspace(usize),
    Product(Vec<BaseSpec>),
}

impl BaseSpec {
    pub fn kind(&self) -> BaseKind {
        match self {
            BaseSpec::Point => BaseKind::Point,
            BaseSpec::Projspace(n) => BaseKind::Projspace(*n),
            BaseSpec::Product(l) => BaseKind::Product(l.iter().map(|b| b.kind()).collect()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BaseSpec::Point => 0,
            BaseSpec::Projspace(n) => *n,
            BaseSpec::Product(l) => l.iter().map(|b| b.dimension()).sum(),
        }
    }

    /// Number of Mori generators, one per projective-space factor.
    pub fn num_generators(&self) -> usize {
        match self {
            BaseSpec::Point => 0,
            BaseSpec::Projspace(_) => 1,
            BaseSpec::Product(l) => l.iter().map(|b| b.num_generators()).sum(),
        }
    }
}

/// `𝒪(k)` on `P¹` is the degree vector `[k]`; one vector per summand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub base: BaseSpec,
    pub r: usize,
    #[serde(rename = "F_degrees")]
    pub f_degrees: Vec<Vec<i64>>,
    #[serde(rename = "Fp_degrees")]
    pub fp_degrees: Vec<Vec<i64>>,
    #[serde(default)]
    pub window: Option<[i64; 3]>,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, CliError> {
        let c: Config = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if c.f_degrees.len() != c.r + 1 || c.fp_degrees.len() != c.r + 1 {
            return Err(CliError::Config(format!("need r+1 = {} degree vectors per bundle", c.r + 1)));
        }
        let ng = c.base.num_generators();
        if c.f_degrees.iter().chain(&c.fp_degrees).any(|v| v.len() != ng) {
            return Err(CliError::Config(format!("degree vectors must have {ng} entries")));
        }
        if let Some(w) = c.window {
            if w.iter().any(|v| *v < 0) {
                return Err(CliError::Config("window bounds must be nonnegative".into()));
            }
        }
        for name in &c.checks {
            if !CHECKS.contains(&name.as_str()) {
                return Err(CliError::Config(format!("unknown check {name}")));
            }
        }
        Ok(c)
    }

    pub fn model(&self) -> Result<FlopModel, CliError> {
        FlopModel::from_kind(&self.base.kind(), self.r, self.f_degrees.clone(), self.fp_degrees.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

pub const CHECKS: [&str; 7] = ["defect", "extremal", "ifun", "pf-check", "bf", "qlh", "invariance"];

pub const FIXTURES: [&str; 7] = ["SF1", "SF2", "SF3", "SP1-pos", "SP1-neg", "SP2", "P2"];

/// Built-in fixtures. `SP*` live over `P¹`, `P2` over `P²`.
pub fn fixture(name: &str) -> Result<Config, CliError> {
    let point = |r: usize| Config {
        base: BaseSpec::Point,
        r,
        f_degrees: vec![vec![]; r + 1],
        fp_degrees: vec![vec![]; r + 1],
        window: None,
        checks: vec![],
        output: None,
    };
    let over = |n: usize, f: &[i64], fp: &[i64]| Config {
        base: BaseSpec::Projspace(n),
        r: f.len() - 1,
        f_degrees: f.iter().map(|k| vec![*k]).collect(),
        fp_degrees: fp.iter().map(|k| vec![*k]).collect(),
        window: None,
        checks: vec![],
        output: None,
    };
    Ok(match name {
        "SF1" => point(1),
        "SF2" => point(2),
        "SF3" => point(3),
        "SP1-pos" => over(1, &[1, 0], &[1, 0]),
        "SP1-neg" => over(1, &[-1, -1], &[0, 0]),
        "SP2" => over(1, &[1, 0, -1], &[-1, 0, 0]),
        "P2" => over(2, &[1, 0, -1], &[2, 0, 0]),
        _ => return Err(CliError::Fixture(name.to_string())),
    })
}

/// One machine-readable check result.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check: String,
    pub fixture: String,
    pub window: [i64; 3],
    pub pass: bool,
    pub details: Value,
}

/// Default window per check; bases of dimension above one get `B = 1`.
pub fn default_window(check: &str, base: &BaseSpec) -> TruncationWindow {
    let b = if base.dimension() > 1 { 1 } else { 2 };
    match check {
        "qlh" | "invariance" => TruncationWindow::new(b, 8, 2),
        _ => TruncationWindow::new(b, 3, 3),
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report values serialize")
}

fn error_details(e: impl std::fmt::Display) -> (bool, Value) {
    (false, json!({ "error": e.to_string() }))
}

fn run_defect(m: &FlopModel) -> (bool, Value) {
    let pr = pairing_check(m);
    let dr = check_all_triples(m);
    let n = m.x.rank();
    (
        pr.pass && dr.pass,
        json!({
            "pairing": to_value(&pr),
            "triples_total": n * n * n,
            "triples_checked": dr.triples_checked,
            "nonzero_defects": dr.nonzero_defects,
            "failures": dr.failures,
            "rows": to_value(&dr.rows),
        }),
    )
}

/// `f(y) + f(1/y)` after continuation, as a `y`-series through `n`.
pub fn f_continuation_sum(r: usize, n: usize) -> Option<Vec<Q>> {
    let s = sigma(r);
    let mut ser = vec![Q::from_integer(0.into())];
    ser.extend(f_series(r, n));
    let fit = fit_rational(&ser, 0, &s)?;
    Some((0..=n as i64).map(|p| &ser[p as usize] + fit.continued_coefficient(0, p, &s)).collect())
}

fn run_extremal(m: &FlopModel, nu: Option<usize>) -> (bool, Value) {
    let r = m.r;
    let nus: Vec<usize> = match nu {
        Some(v) => vec![v],
        None => (0..r).collect(),
    };
    let mut pass = true;
    let mut eqs = Vec::new();
    for v in nus {
        match functional_equation_check(m, v) {
            Ok(rep) => {
                pass &= rep.pass;
                eqs.push(to_value(&rep));
            }
            Err(e) => {
                pass = false;
                eqs.push(json!({ "nu": v, "error": e.to_string() }));
            }
        }
    }
    let n = 10;
    let sum = f_continuation_sum(r, n);
    let f_ok = match &sum {
        Some(s) => s[0] == sign(r as i64) && s[1..].iter().all(|c| *c == Q::from_integer(0.into())),
        None => false,
    };
    let two_ok = delta_series(&two_point_series(r, n)) == f_series(r, n);
    pass &= f_ok && two_ok;
    (pass, json!({ "functional_equations": eqs, "f_plus_continued_f": f_ok, "two_point_delta_is_f": two_ok, "order": n }))
}

fn run_ifun(m: &FlopModel, w: &TruncationWindow) -> (bool, Value) {
    let ql = quasi_linearity_check(m, w);
    let van = vanishing_violations(&m.x, w, 2);
    let van_p = vanishing_violations(&m.xp, w, 2);
    let classes = w.i_effective_classes(&m.x).len();
    (
        ql.pass && van.is_empty() && van_p.is_empty(),
        json!({
            "i_effective_classes": classes,
            "quasi_linearity": to_value(&ql),
            "vanishing_violations": to_value(&van),
            "vanishing_violations_primed": to_value(&van_p),
        }),
    )
}

fn run_pf(m: &FlopModel, w: &TruncationWindow) -> (bool, Value) {
    let (bl, bg, blp, bgp) = picard_fuchs_ops(m);
    let i = assemble_i(&m.x, w);
    let ip = assemble_i(&m.xp, w);
    let reps = [
        ("box_l", check_annihilation(&bl, &m.x, &i)),
        ("box_g", check_annihilation(&bg, &m.x, &i)),
        ("box_l_primed", check_annihilation(&blp, &m.xp, &ip)),
        ("box_g_primed", check_annihilation(&bgp, &m.xp, &ip)),
    ];
    let ideal = pf_ideal_check(m);
    let mut pass = ideal.pass;
    let mut details = serde_json::Map::new();
    for (k, r) in &reps {
        pass &= r.pass;
        details.insert(k.to_string(), to_value(r));
    }
    details.insert("ideal".into(), to_value(&ideal));
    (pass, Value::Object(details))
}

fn run_bf(m: &FlopModel, w: &TruncationWindow) -> (bool, Value) {
    let i = assemble_i(&m.x, w);
    let res = match birkhoff_factorize(&m.x, &i) {
        Ok(r) => r,
        Err(e) => return error_details(e),
    };
    match gmt_report(&m.x, &i, &res) {
        Ok(rep) => (rep.normalized && rep.trivial_on_fiber && rep.deterministic, to_value(&rep)),
        Err(e) => error_details(e),
    }
}

fn run_qlh(m: &FlopModel, w: &TruncationWindow) -> (bool, Value) {
    let mut pass = true;
    let mut details = serde_json::Map::new();
    for (side, x) in [("X", &m.x), ("X'", &m.xp)] {
        let conn = match build_connection(x, w, LiftChoice::matched(x)) {
            Ok(c) => c,
            Err(e) => {
                details.insert(side.into(), json!({ "error": e.to_string() }));
                pass = false;
                continue;
            }
        };
        let fl = flatness_check(x, &conn);
        let shape = coefficient_shape_check(x, &conn);
        let mut side_pass = fl.pass && shape.pass;
        let mut d = json!({ "flatness": to_value(&fl), "shape": to_value(&shape) });
        match gauge_reduce(x, &conn) {
            Ok((g, rep)) => {
                side_pass &= rep.pass;
                let i = assemble_i(x, w);
                let cross = birkhoff_factorize(x, &i).map_err(|e| e.to_string()).and_then(|gmt| {
                    birkhoff_cross_check(x, &g, &gmt).map_err(|e| e.to_string())
                });
                side_pass &= matches!(cross, Ok(true));
                d["gauge"] = to_value(&rep);
                d["birkhoff_cross_check"] = match cross {
                    Ok(b) => json!(b),
                    Err(e) => json!({ "error": e }),
                };
            }
            Err(e) => {
                side_pass = false;
                d["gauge"] = json!({ "error": e.to_string() });
            }
        }
        pass &= side_pass;
        details.insert(side.into(), d);
    }
    (pass, Value::Object(details))
}

fn run_invariance(m: &FlopModel, w: &TruncationWindow) -> (bool, Value) {
    match invariance_check(m, w) {
        Ok(rep) => (rep.pass, to_value(&rep)),
        Err(e) => error_details(e),
    }
}

/// Run one named check.
pub fn run_check(check: &str, name: &str, config: &Config, m: &FlopModel, w: Option<TruncationWindow>, nu: Option<usize>) -> Report {
    let w = w.unwrap_or_else(|| default_window(check, &config.base));
    let (pass, details) = match check {
        "defect" => run_defect(m),
        "extremal" => run_extremal(m, nu),
        "ifun" => run_ifun(m, &w),
        "pf-check" => run_pf(m, &w),
        "bf" => run_bf(m, &w),
        "qlh" => run_qlh(m, &w),
        "invariance" => run_invariance(m, &w),
        other => error_details(format!("unknown check {other}")),
    };
    Report { check: check.to_string(), fixture: name.to_string(), window: [w.bs_bound, w.d_max, w.d2_max], pass, details }
}

fn load(common: &Common) -> Result<(String, Config), CliError> {
    match (&common.fixture, &common.config) {
        (Some(f), None) => Ok((f.clone(), fixture(f)?)),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "config".into());
            Ok((name, Config::from_json(&text)?))
        }
        _ => Err(CliError::Config("exactly one of --fixture or --config is required".into())),
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(reports) => {
            if reports.iter().all(|r| r.pass) {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("flopcalc: {e}");
            2
        }
    }
}

/// Run a parsed command, print and write its reports.
pub fn execute(cmd: &Command) -> Result<Vec<Report>, CliError> {
    let (check, common) = match cmd {
        Command::Defect(c) => ("defect", c),
        Command::Extremal(c) => ("extremal", c),
        Command::Ifun(c) => ("ifun", c),
        Command::PfCheck(c) => ("pf-check", c),
        Command::Bf(c) => ("bf", c),
        Command::Qlh(c) => ("qlh", c),
        Command::Invariance(c) => ("invariance", c),
        Command::All(c) => ("all", c),
    };
    let (name, config) = load(common)?;
    let model = config.model()?;
    let window = common.window.or(config.window.map(|w| TruncationWindow::new(w[0], w[1], w[2])));
    let checks: Vec<&str> = if check == "all" {
        if config.checks.is_empty() {
            CHECKS.to_vec()
        } else {
            config.checks.iter().map(|s| s.as_str()).collect()
        }
    } else {
        vec![check]
    };
    let reports: Vec<Report> = checks.iter().map(|c| run_check(c, &name, &config, &model, window, common.nu)).collect();
    let text = if check == "all" {
        serde_json::to_string_pretty(&reports)
    } else {
        serde_json::to_string_pretty(&reports[0])
    }
    .expect("reports serialize");
    if common.json {
        println!("{text}");
    } else {
        for r in &reports {
            println!("{} {} [{},{},{}]: {}", r.check, r.fixture, r.window[0], r.window[1], r.window[2], if r.pass { "PASS" } else { "FAIL" });
        }
    }
    if let Some(p) = common.out.as_ref().or(config.output.as_ref()) {
        write_out(p, &text)?;
    }
    Ok(reports)
}
