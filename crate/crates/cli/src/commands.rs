use crate::output::{to_canonical_json, to_csv, Artifact};
use crate::{Format, Global};
use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use sandlab::experiments::{iid_trials, pairing_invariance, HeightDistribution};
use sandlab::gamma::{compute_gamma, DEFAULT_THRESHOLD};
use sandlab::greens::{
    derivative_decay_report, fit_asymptotics, greens_torus, greens_z2, log_bound_check,
    lp_membership_report, GreensMeta,
};
use sandlab::rng::stream;
use sandlab::sandpile::{
    group_structure, identity, is_recurrent, markov_step, stabilize_with, Policy, Sandpile,
};
use sandlab::spectral::{
    cutoff_profile, dual_group_oracle, gap_search, DualFrequency, DEFAULT_B, DEFAULT_R,
};
use sandlab::{Domain, Error};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn render<T: Serialize>(value: &T, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => Ok(to_canonical_json(value)?),
        Format::Csv => to_csv(value),
        Format::Bin => Err(usage("binary output is only available for `greens`")),
    }
}

fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    seed: Option<u64>,
    started: Instant,
    result: R,
    g: &Global,
) -> Result<()> {
    let wall = started.elapsed().as_secs_f64();
    let artifact = Artifact {
        sandlab_version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        seed,
        wall_time_s: (!g.reproducible).then_some(wall),
        result,
    };
    write_bytes(g.out.as_deref(), &render(&artifact, g.format)?)
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GreensDomain {
    Torus,
    Plane,
}

#[derive(Args, Debug, Serialize)]
pub struct GreensArgs {
    #[arg(long, value_enum, default_value_t = GreensDomain::Torus)]
    pub domain: GreensDomain,
    /// Torus side.
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Window radius for the plane.
    #[arg(long, default_value_t = 32)]
    pub radius: usize,
}

#[derive(Serialize)]
struct GreensOut<'a> {
    domain: Domain,
    meta: &'a GreensMeta,
    /// Values over the domain's sites in storage order (row-major; windows skip
    /// the corners outside the l1 ball).
    values: Vec<f64>,
}

const BIN_MAGIC: &[u8; 4] = b"SLGF";

/// `SLGF`, kind (`0` torus, `1` window), side parameter, count (u64 LE), then f64 LE values.
fn greens_bin(domain: Domain, values: &[f64]) -> Vec<u8> {
    let (kind, param) = match domain {
        Domain::Torus { m } => (0u8, m as u64),
        Domain::Window { radius } => (1u8, radius as u64),
    };
    let mut out = Vec::with_capacity(21 + 8 * values.len());
    out.extend_from_slice(BIN_MAGIC);
    out.push(kind);
    out.extend_from_slice(&param.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn greens(a: &GreensArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let table = match a.domain {
        GreensDomain::Torus => {
            if a.m < 2 {
                return Err(usage("torus side must be at least 2"));
            }
            greens_torus(a.m)
        }
        GreensDomain::Plane => greens_z2(a.radius)?,
    };
    let domain = table.domain();
    let values: Vec<f64> = domain.sites().map(|(i, j)| table.get(i, j)).collect();
    if g.format == Format::Bin {
        let path = g.out.as_deref().ok_or_else(|| usage("binary output needs --out"))?;
        return write_bytes(Some(path), &greens_bin(domain, &values));
    }
    let out = GreensOut {
        domain,
        meta: &table.meta,
        values,
    };
    emit("greens", a, None, t, out, g)
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Decay,
    Lp,
    Asymptotics,
}

#[derive(Args, Debug, Serialize)]
pub struct GreensReportArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    /// Torus side for the decay check.
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    /// Largest box half-side for the l^p check, and window radius for the asymptotic fit.
    #[arg(long, default_value_t = 128)]
    pub radius: usize,
}

pub fn greens_report(a: &GreensReportArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    match a.check {
        Check::Decay => {
            let pairs = [(1, 0), (0, 1), (1, 1), (2, 0), (3, 0), (2, 1)];
            let reports = pairs
                .iter()
                .map(|&(x, y)| derivative_decay_report(a.m, x, y))
                .collect::<sandlab::Result<Vec<_>>>()?;
            emit("greens-report", a, None, t, reports, g)
        }
        Check::Lp => {
            let cases = [(3, 0, 1.0), (1, 1, 2.0), (1, 0, 2.0)];
            let reports = cases
                .iter()
                .map(|&(x, y, p)| lp_membership_report(x, y, p, a.radius))
                .collect::<sandlab::Result<Vec<_>>>()?;
            emit("greens-report", a, None, t, reports, g)
        }
        Check::Asymptotics => {
            let table = greens_z2(a.radius)?;
            let fit = fit_asymptotics(&table)?;
            let bound = log_bound_check(&table, fit.a, a.radius as f64);
            #[derive(Serialize)]
            struct Out {
                fit: sandlab::greens::AsymptoticFit,
                log_bound: sandlab::greens::LogBoundCheck,
            }
            emit("greens-report", a, None, t, Out { fit, log_bound: bound }, g)
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Fifo,
    Lifo,
}

#[derive(Args, Debug, Serialize)]
pub struct StabilizeArgs {
    /// Torus side; checked against the input file when both are given.
    #[arg(long)]
    pub m: Option<usize>,
    /// JSON pile `{"m": .., "heights": [[..], ..]}`, sink entry zero.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Start from this height at every non-sink site instead of a file.
    #[arg(long, conflicts_with = "input")]
    pub constant: Option<u64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Fifo)]
    pub policy: PolicyArg,
}

fn read_pile(path: &Path) -> Result<Sandpile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("malformed pile {}: {e}", path.display())))
}

pub fn stabilize(a: &StabilizeArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let pile = match (&a.input, a.constant, a.m) {
        (Some(p), _, m) => {
            let s = read_pile(p)?;
            if m.is_some_and(|m| m != s.m()) {
                return Err(usage(format!("--m {} does not match the file (m = {})", m.unwrap(), s.m())));
            }
            s
        }
        (None, Some(h), Some(m)) if m >= 2 => Sandpile::constant(m, h),
        (None, Some(_), _) => return Err(usage("--constant needs --m >= 2")),
        (None, None, _) => return Err(usage("give --in FILE or --constant H")),
    };
    let policy = match a.policy {
        PolicyArg::Fifo => Policy::Fifo,
        PolicyArg::Lifo => Policy::Lifo,
    };
    let r = stabilize_with(&pile, policy);
    let initial_total = pile.total();
    let final_total = r.state.total();
    if initial_total != final_total + r.lost || !r.odometer.explains(&pile, &r.state) {
        return Err(Error::NumericalGuard("grain accounting does not close".into()).into());
    }
    #[derive(Serialize)]
    struct Out {
        m: usize,
        initial_total: u64,
        final_total: u64,
        lost: u64,
        topplings: u64,
        recurrent: bool,
        state: Sandpile,
        odometer: Vec<u64>,
    }
    let out = Out {
        m: pile.m(),
        initial_total,
        final_total,
        lost: r.lost,
        topplings: r.odometer.total(),
        recurrent: is_recurrent(&r.state),
        state: r.state,
        odometer: r.odometer.counts,
    };
    emit("stabilize", a, None, t, out, g)
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    Zeros,
    Identity,
    Max,
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("expected a nonnegative integer, got {s:?}")),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ChainArgs {
    #[arg(long)]
    pub m: usize,
    /// Number of steps (`1e6` style accepted).
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub steps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Start::Zeros)]
    pub start: Start,
    /// Statistics file (same as --out).
    #[arg(long)]
    #[serde(skip)]
    pub stats: Option<PathBuf>,
}

/// Largest torus whose recurrent states are tallied individually.
const TALLY_MAX_M: usize = 3;

pub fn chain(a: &ChainArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    if a.m < 2 {
        return Err(usage("torus side must be at least 2"));
    }
    let mut s = match a.start {
        Start::Zeros => Sandpile::zeros(a.m),
        Start::Identity => identity(a.m),
        Start::Max => Sandpile::max_stable(a.m),
    };
    let mut rng = stream(a.seed, 0);
    let mut hit = is_recurrent(&s).then_some(0u64);
    let mut height_sum = vec![0u64; a.m * a.m];
    let mut recurrent_steps = 0u64;
    let mut tally: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for k in 1..=a.steps {
        s = markov_step(&s, &mut rng);
        if hit.is_none() && is_recurrent(&s) {
            hit = Some(k);
        }
        if hit.is_some() {
            recurrent_steps += 1;
            for (acc, &h) in height_sum.iter_mut().zip(s.heights()) {
                *acc += h;
            }
            if a.m <= TALLY_MAX_M {
                *tally.entry(s.heights().to_vec()).or_insert(0) += 1;
            }
        }
    }
    let mean_height = if recurrent_steps > 0 {
        let total: u64 = height_sum.iter().sum();
        Some(total as f64 / (recurrent_steps as f64 * (a.m * a.m - 1) as f64))
    } else {
        None
    };
    // time-averaged occupation of the recurrent class against the uniform law
    let occupation_tv = (a.m <= TALLY_MAX_M && recurrent_steps > 0).then(|| {
        let n = sandlab::spectral::recurrent_states(a.m).len() as f64;
        let visited: f64 = tally
            .values()
            .map(|&c| (c as f64 / recurrent_steps as f64 - 1.0 / n).abs())
            .sum();
        let unvisited = (n - tally.len() as f64) / n;
        0.5 * (visited + unvisited)
    });
    #[derive(Serialize)]
    struct Out {
        m: usize,
        steps: u64,
        hitting_step: Option<u64>,
        recurrent_steps: u64,
        mean_height: Option<f64>,
        distinct_states: Option<usize>,
        occupation_tv: Option<f64>,
        final_state: Sandpile,
    }
    let out = Out {
        m: a.m,
        steps: a.steps,
        hitting_step: hit,
        recurrent_steps,
        mean_height,
        distinct_states: (a.m <= TALLY_MAX_M).then_some(tally.len()),
        occupation_tv,
        final_state: s,
    };
    let mut g = g.clone();
    if a.stats.is_some() {
        g.out = a.stats.clone();
    }
    emit("chain", a, Some(a.seed), t, out, &g)
}

#[derive(Args, Debug, Serialize)]
pub struct GroupArgs {
    #[arg(long)]
    pub m: usize,
    /// Include the invariant factors.
    #[arg(long)]
    pub snf: bool,
}

pub fn group(a: &GroupArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    if a.m < 2 {
        return Err(usage("torus side must be at least 2"));
    }
    let s = group_structure(a.m)?;
    #[derive(Serialize)]
    struct Out {
        m: usize,
        order: String,
        log_order_per_site: f64,
        unit_factors: Option<usize>,
        invariant_factors: Option<Vec<String>>,
    }
    let out = Out {
        m: a.m,
        order: s.order.to_string(),
        log_order_per_site: s.log_order_per_site(),
        unit_factors: a.snf.then_some(s.unit_factors),
        invariant_factors: a.snf.then(|| s.invariant_factors.iter().map(|x| x.to_string()).collect()),
    };
    emit("group", a, None, t, out, g)
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    #[arg(long)]
    pub m: usize,
    /// Bound on `‖v‖_1` of candidate prevectors.
    #[arg(long = "B", default_value_t = DEFAULT_B)]
    #[serde(rename = "B")]
    pub b: usize,
    /// Radius of the l1 ball holding candidate supports.
    #[arg(long = "R", default_value_t = DEFAULT_R)]
    #[serde(rename = "R")]
    pub r: usize,
    /// Enumerate the dual group instead of searching (m <= 3).
    #[arg(long, conflicts_with = "search")]
    pub exact: bool,
    /// Prevector search (the default).
    #[arg(long)]
    pub search: bool,
}

pub fn gap(a: &GapArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    #[derive(Serialize)]
    struct Out {
        m: usize,
        method: &'static str,
        gap: f64,
        scaled_gap: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        search: Option<sandlab::spectral::GapSearch>,
    }
    let m2 = (a.m * a.m) as f64;
    let out = if a.exact {
        let o = dual_group_oracle(a.m)?;
        Out {
            m: a.m,
            method: "exact",
            gap: o.gap,
            scaled_gap: m2 * o.gap,
            search: None,
        }
    } else {
        let s = gap_search(a.m, a.b, a.r)?;
        Out {
            m: a.m,
            method: "search",
            gap: s.gap,
            scaled_gap: s.scaled_gap,
            search: Some(s),
        }
    };
    emit("gap", a, None, t, out, g)
}

fn parse_list(s: &str) -> std::result::Result<Vec<u64>, String> {
    s.split(',').map(|x| parse_count(x.trim())).collect()
}

#[derive(Args, Debug, Serialize)]
pub struct DualArgs {
    #[arg(long)]
    pub m: usize,
    /// Exact enumeration (the only method; accepted for symmetry with `gap`).
    #[arg(long)]
    pub exact: bool,
    /// Steps at which to report the L^2 distance, comma separated.
    #[arg(long = "N", value_delimiter = ',', value_parser = parse_count, default_value = "0,1,2,4,8,16,32")]
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    /// Include every character with its eigenvalue.
    #[arg(long)]
    pub list: bool,
}

pub fn dual(a: &DualArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let o = dual_group_oracle(a.m)?;
    #[derive(Serialize)]
    struct Row {
        n: u64,
        l2_distance: f64,
    }
    #[derive(Serialize)]
    struct Out {
        m: usize,
        order: usize,
        denominator: i64,
        gap: f64,
        l2: Vec<Row>,
        #[serde(skip_serializing_if = "Option::is_none")]
        frequencies: Option<Vec<DualFrequency>>,
    }
    let l2 = a
        .n
        .iter()
        .map(|&n| Row {
            n,
            l2_distance: o.l2_distance(n),
        })
        .collect();
    let out = Out {
        m: o.m,
        order: o.order,
        denominator: o.denominator,
        gap: o.gap,
        l2,
        frequencies: a.list.then(|| o.frequencies.clone()),
    };
    emit("dual", a, None, t, out, g)
}

#[derive(Args, Debug, Serialize)]
pub struct CutoffArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long = "B", default_value_t = DEFAULT_B)]
    #[serde(rename = "B")]
    pub b: usize,
    #[arg(long = "R", default_value_t = DEFAULT_R)]
    #[serde(rename = "R")]
    pub r: usize,
    /// `auto` (0.5, 0.6, ..., 1.5 times log m / gap) or a comma-separated list of N.
    #[arg(long = "N-grid", default_value = "auto")]
    #[serde(rename = "N_grid")]
    pub n_grid: String,
}

pub fn cutoff(a: &CutoffArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let grid = if a.n_grid == "auto" {
        Vec::new()
    } else {
        parse_list(&a.n_grid).map_err(usage)?
    };
    let p = cutoff_profile(a.m, a.b, a.r, &grid)?;
    emit("cutoff", a, None, t, p, g)
}

#[derive(Args, Debug, Serialize)]
pub struct GammaArgs {
    /// Target accuracy of the reported constant.
    #[arg(long, default_value_t = 1e-9)]
    pub precision: f64,
    /// Pruning threshold for the support enumeration.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Write the full pipeline audit to this file.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

pub fn gamma(a: &GammaArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let r = compute_gamma(a.threshold, a.precision)?;
    #[derive(Serialize)]
    struct Out<'a> {
        gamma: f64,
        c0: f64,
        minimizer: &'a [((i64, i64), i64)],
        minimizer_is_delta12: bool,
        margin: f64,
        error_bound: f64,
        #[serde(rename = "M")]
        radius: usize,
        survivors: usize,
        evaluated_classes: usize,
    }
    let out = Out {
        gamma: r.gamma,
        c0: r.c0,
        minimizer: &r.minimizer,
        minimizer_is_delta12: r.minimizer_is_delta12,
        margin: r.margin,
        error_bound: r.error_bound,
        radius: r.audit.radius,
        survivors: r.audit.supports.survivors.len(),
        evaluated_classes: r.audit.evaluations.len(),
    };
    if let Some(path) = &a.audit {
        let mut ga = g.clone();
        ga.out = Some(path.clone());
        ga.format = Format::Json;
        emit("gamma-audit", a, None, t, &r.audit, &ga)?;
    }
    emit("gamma", a, None, t, out, g)
}

#[derive(Args, Debug, Serialize)]
pub struct IidArgs {
    /// Height law as `value:probability` pairs.
    #[arg(long, default_value = "2:0.9,4:0.1")]
    pub law: String,
    #[arg(long, default_value_t = 64)]
    pub radius: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Cap on parallel toppling steps (default: the radius).
    #[arg(long)]
    pub max_steps: Option<usize>,
}

pub fn iid(a: &IidArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let law: HeightDistribution = a.law.parse()?;
    if a.trials == 0 || a.radius == 0 {
        return Err(usage("--trials and --radius must be positive"));
    }
    let cap = a.max_steps.unwrap_or(a.radius);
    let s = iid_trials(&law, a.radius, cap, a.trials, a.seed)?;
    emit("iid", a, Some(a.seed), t, s, g)
}

#[derive(Args, Debug, Serialize)]
pub struct InvariantsArgs {
    #[arg(long, default_value_t = 32)]
    pub radius: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value = "0:0.125,1:0.125,2:0.125,3:0.125,4:0.125,5:0.125,6:0.125,7:0.125")]
    pub law: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn invariants(a: &InvariantsArgs, g: &Global) -> Result<()> {
    let t = Instant::now();
    let law: HeightDistribution = a.law.parse()?;
    let r = pairing_invariance(a.radius, a.trials, &law, a.seed)?;
    if r.max_drift >= 1e-8 {
        return Err(Error::NumericalGuard(format!("pairing drift {:.3e}", r.max_drift)).into());
    }
    emit("invariants", a, Some(a.seed), t, r, g)
}
