//! Simulation scenarios, fit scoring and replicate-parallel benchmark runs.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{hpd_interval, median};
use crate::dist;
use crate::engine::{self, BetaHyper, GroupDef, ModelData, Response, RunConfig, RunOutcome};
use crate::error::{Error, Result};
use crate::group::GroupTauPrior;
use crate::model::DesignMatrix;
use crate::noise::NoiseKind;
use crate::tempering::TemperatureLadder;

/// Magnitudes of the credibility-study signals; each appears once with
/// each sign.
pub const CREDIBILITY_MAGNITUDES: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
/// Values of an active group.
pub const GROUP_PATTERN: [f64; 5] = [1.0, 1.0, 0.0, -1.0, -1.0];
/// Nonzero values of the duplicated-design study.
pub const DUPLICATED_PATTERN: [f64; 6] = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BetaPattern {
    /// k randomly placed coordinates with signs alternating -1, +1.
    Alternating,
    /// k randomly placed groups of `group_size` set to the group pattern.
    Group,
    /// The 18 signed credibility magnitudes at random coordinates.
    Credibility,
    /// The first p/2 columns are copied into the second half; the first
    /// six coordinates carry the duplicated pattern.
    Duplicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Nonzero coordinates, or active groups for the group pattern.
    pub k: usize,
    pub pattern: BetaPattern,
    pub rho: f64,
    pub sigma: f64,
    pub group_size: usize,
    pub noise: NoiseKind,
    pub replicates: usize,
    pub seed: u64,
}

impl SimScenario {
    fn base(name: &str, n: usize, p: usize, k: usize, rho: f64, sigma: f64) -> Self {
        Self {
            name: name.into(),
            n,
            p,
            k,
            pattern: BetaPattern::Alternating,
            rho,
            sigma,
            group_size: 1,
            noise: NoiseKind::Gaussian,
            replicates: 50,
            seed: 20_170_101,
        }
    }

    /// n = 100, p = 25, k = 6, sigma = 1.5, rho = 0.9.
    pub fn small() -> Self {
        Self::base("small", 100, 25, 6, 0.9, 1.5)
    }

    /// n = 100, p = 1000, k = 6, sigma = 1.5, rho = 0.9.
    pub fn medium() -> Self {
        Self::base("medium", 100, 1000, 6, 0.9, 1.5)
    }

    /// Desk-scale large-p run: n = 200, p = 10000.
    pub fn large() -> Self {
        Self::base("large", 200, 10_000, 6, 0.9, 1.5)
    }

    /// Desk-scale grouped run: 200 groups of 5, 5 active, rho = 0.2.
    pub fn group() -> Self {
        Self { pattern: BetaPattern::Group, group_size: 5, ..Self::base("group", 200, 1000, 5, 0.2, 1.5) }
    }

    /// Logistic response with 5 active groups of 5 among 1000 coordinates.
    pub fn logistic() -> Self {
        Self {
            pattern: BetaPattern::Group,
            group_size: 5,
            noise: NoiseKind::Logistic,
            ..Self::base("logistic", 400, 1000, 5, 0.2, 1.0)
        }
    }

    /// n = 100, p = 1000, sigma = 1, rho = 0.2, 18 signals.
    pub fn credibility() -> Self {
        Self {
            pattern: BetaPattern::Credibility,
            replicates: 100,
            ..Self::base("credibility", 100, 1000, 18, 0.2, 1.0)
        }
    }

    /// 500 AR(0.2) columns duplicated to p = 1000, six signals.
    pub fn ee() -> Self {
        Self { pattern: BetaPattern::Duplicated, replicates: 20, ..Self::base("ee", 100, 1000, 6, 0.2, 1.0) }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "small" => Self::small(),
            "medium" => Self::medium(),
            "large" => Self::large(),
            "group" => Self::group(),
            "logistic" => Self::logistic(),
            "credibility" => Self::credibility(),
            "ee" => Self::ee(),
            other => return Err(Error::Config(format!("unknown scenario {other}"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("scenario {}: {m}", self.name)));
        if self.n == 0 || self.p == 0 {
            return fail("n and p must be positive");
        }
        if !(self.rho.abs() < 1.0) || !(self.sigma >= 0.0) {
            return fail("need |rho| < 1 and sigma >= 0");
        }
        match self.pattern {
            BetaPattern::Alternating if self.k > self.p => fail("k exceeds p"),
            BetaPattern::Group if self.group_size == 0 || !self.p.is_multiple_of(self.group_size) => {
                fail("group size must divide p")
            }
            BetaPattern::Group if self.k > self.p / self.group_size => fail("more active groups than groups"),
            BetaPattern::Credibility if self.p < 2 * CREDIBILITY_MAGNITUDES.len() => fail("p too small"),
            BetaPattern::Duplicated if !self.p.is_multiple_of(2) || self.p / 2 < DUPLICATED_PATTERN.len() => {
                fail("duplicated design needs an even p of at least 12")
            }
            _ => Ok(()),
        }
    }

    /// Group membership (consecutive blocks) for grouped patterns.
    pub fn group_members(&self) -> Vec<Vec<usize>> {
        match self.pattern {
            BetaPattern::Group => {
                (0..self.p / self.group_size).map(|g| (g * self.group_size..(g + 1) * self.group_size).collect()).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Number of truly nonzero coordinates.
    pub fn true_nonzero(&self) -> usize {
        match self.pattern {
            BetaPattern::Alternating => self.k,
            BetaPattern::Group => self.k * GROUP_PATTERN.iter().filter(|v| **v != 0.0).count(),
            BetaPattern::Credibility => 2 * CREDIBILITY_MAGNITUDES.len(),
            BetaPattern::Duplicated => DUPLICATED_PATTERN.len(),
        }
    }
}

/// One generated data set.
#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DesignMatrix,
    pub response: Response,
    pub beta: Vec<f64>,
    pub groups: Vec<Vec<usize>>,
}

/// Rows with AR(rho) correlation across columns: x_j = rho x_(j-1) +
/// sqrt(1 - rho^2) z_j.
pub fn ar_design<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DesignMatrix {
    let c = (1.0 - rho * rho).sqrt();
    let mut cols = vec![0.0; n * p];
    for i in 0..n {
        let mut prev = dist::std_normal(rng);
        cols[i] = prev;
        for j in 1..p {
            prev = rho * prev + c * dist::std_normal(rng);
            cols[j * n + i] = prev;
        }
    }
    DesignMatrix::from_column_major(n, p, cols).expect("dimensions match")
}

/// Draws (X, Y, beta) for a scenario.
pub fn generate_scenario<R: Rng + ?Sized>(s: &SimScenario, rng: &mut R) -> Result<SimData> {
    s.validate()?;
    let (n, p) = (s.n, s.p);
    let x = match s.pattern {
        BetaPattern::Duplicated => {
            let half = ar_design(n, p / 2, s.rho, rng);
            let mut v = half.values().to_vec();
            v.extend_from_slice(half.values());
            DesignMatrix::from_column_major(n, p, v)?
        }
        _ => ar_design(n, p, s.rho, rng),
    };
    let mut beta = vec![0.0; p];
    match s.pattern {
        BetaPattern::Alternating => {
            for (i, j) in sample(rng, p, s.k).into_iter().enumerate() {
                beta[j] = if i % 2 == 0 { -1.0 } else { 1.0 };
            }
        }
        BetaPattern::Group => {
            for g in sample(rng, p / s.group_size, s.k) {
                for (a, v) in GROUP_PATTERN.iter().cycle().take(s.group_size).enumerate() {
                    beta[g * s.group_size + a] = *v;
                }
            }
        }
        BetaPattern::Credibility => {
            let locs = sample(rng, p, 2 * CREDIBILITY_MAGNITUDES.len()).into_vec();
            for (i, m) in CREDIBILITY_MAGNITUDES.iter().enumerate() {
                beta[locs[2 * i]] = -m;
                beta[locs[2 * i + 1]] = *m;
            }
        }
        BetaPattern::Duplicated => beta[..DUPLICATED_PATTERN.len()].copy_from_slice(&DUPLICATED_PATTERN),
    }
    let eta = x.mul_vec(&beta);
    let response = match s.noise {
        NoiseKind::Gaussian => Response::Continuous(eta.iter().map(|e| e + s.sigma * dist::std_normal(rng)).collect()),
        NoiseKind::StudentT { nu } => Response::Continuous(
            eta.iter()
                .map(|e| {
                    let w = dist::gamma(0.5 * nu, 0.5 * nu, rng);
                    e + s.sigma * dist::std_normal(rng) / w.sqrt()
                })
                .collect(),
        ),
        NoiseKind::Logistic => {
            Response::Binary(eta.iter().map(|e| rng.random::<f64>() < dist::logistic(*e)).collect())
        }
        NoiseKind::Robit { nu } => Response::Binary(
            eta.iter()
                .map(|e| {
                    let w = dist::gamma(0.5 * nu, 0.5 * nu, rng);
                    e + dist::std_normal(rng) / w.sqrt() > 0.0
                })
                .collect(),
        ),
    };
    Ok(SimData { x, response, beta, groups: s.group_members() })
}

/// Error metrics of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub l2: f64,
    pub type1: usize,
    pub type2: usize,
    pub seconds: f64,
}

/// L2 = sum (beta - hat)^2 / sum beta^2; a coordinate is selected when
/// its estimate is nonzero.
pub fn score_fit(beta_hat: &[f64], truth: &[f64]) -> Result<MetricRow> {
    if beta_hat.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!("{} estimates for {} coefficients", beta_hat.len(), truth.len())));
    }
    let num: f64 = beta_hat.iter().zip(truth).map(|(h, b)| (h - b) * (h - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    let mut type1 = 0;
    let mut type2 = 0;
    for (h, b) in beta_hat.iter().zip(truth) {
        match (*h != 0.0, *b != 0.0) {
            (true, false) => type1 += 1,
            (false, true) => type2 += 1,
            _ => {}
        }
    }
    Ok(MetricRow { l2: if den > 0.0 { num / den } else { num }, type1, type2, seconds: 0.0 })
}

/// Type 1 and Type 2 counts for the selection MIP > 0.5.
pub fn mip_errors(mips: &[f64], truth: &[f64]) -> (usize, usize) {
    let mut t1 = 0;
    let mut t2 = 0;
    for (m, b) in mips.iter().zip(truth) {
        match (*m > 0.5, *b != 0.0) {
            (true, false) => t1 += 1,
            (false, true) => t2 += 1,
            _ => {}
        }
    }
    (t1, t2)
}

/// Median of weighted draws: the smallest value whose cumulative weight
/// reaches half the total.
pub fn weighted_median(draws: &[f64], weights: &[f64]) -> f64 {
    let mut v: Vec<(f64, f64)> = draws.iter().copied().zip(weights.iter().copied()).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|e| e.1).sum();
    let mut acc = 0.0;
    for (x, w) in &v {
        acc += w;
        if acc >= 0.5 * total {
            return *x;
        }
    }
    v.last().map_or(0.0, |e| e.0)
}

/// Posterior medians per coordinate from a finished run; logistic runs
/// weight the robit draws by their importance weights.
pub fn posterior_median(out: &RunOutcome, noise: NoiseKind) -> Vec<f64> {
    let records = out.records();
    let weights = match noise {
        NoiseKind::Logistic => crate::noise::self_normalize(&out.log_weights()),
        _ => vec![1.0; records.len()],
    };
    let mut dense: Vec<Vec<f64>> = vec![Vec::new(); out.p];
    let mut touched = vec![false; out.p];
    for r in &records {
        for &(j, _) in &r.entries {
            touched[j] = true;
        }
    }
    for j in (0..out.p).filter(|&j| touched[j]) {
        dense[j] = records
            .iter()
            .map(|r| r.entries.binary_search_by_key(&j, |e| e.0).map_or(0.0, |i| r.entries[i].1))
            .collect();
    }
    (0..out.p).map(|j| if touched[j] { weighted_median(&dense[j], &weights) } else { 0.0 }).collect()
}

/// Inclusion prior used by a benchmark fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorChoice {
    /// pi ~ Beta(1, p).
    BetaOneP,
    /// pi ~ Beta(k_noise, p - k_noise) with k_noise = k exp(N(0, 3)).
    KNoise,
}

impl PriorChoice {
    pub fn label(self) -> &'static str {
        match self {
            PriorChoice::BetaOneP => "GB Prior(1,p)",
            PriorChoice::KNoise => "GB Prior(k-noise,p)",
        }
    }
}

/// Draws k_noise = k exp(N(0, 3)), clamped to [0.5, p - 0.5].
pub fn draw_k_noise<R: Rng + ?Sized>(k: usize, p: usize, rng: &mut R) -> f64 {
    let kn = k as f64 * (3f64.sqrt() * dist::std_normal(rng)).exp();
    kn.clamp(0.5, p as f64 - 0.5)
}

/// Sampler settings applied to every replicate of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub prior: PriorChoice,
    pub chains: usize,
    pub sweeps: u64,
    pub burnin: u64,
    pub ladder: TemperatureLadder,
    pub watch_zeros: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            prior: PriorChoice::BetaOneP,
            chains: 3,
            sweeps: 1100,
            burnin: 100,
            ladder: TemperatureLadder::default(),
            watch_zeros: 0,
        }
    }
}

/// Builds the run configuration for one replicate.
pub fn fit_config<R: Rng + ?Sized>(
    s: &SimScenario,
    data: &SimData,
    fit: &FitSettings,
    seed: u64,
    rng: &mut R,
) -> Result<RunConfig> {
    let var_y = if s.noise.is_binary() { 1.0 } else { data.response.variance() };
    let mut cfg = RunConfig::default_for(s.p, var_y)?;
    let n_groups = data.groups.len();
    let units = if n_groups > 0 { n_groups } else { s.p };
    let (pi_a, hyper) = match fit.prior {
        PriorChoice::BetaOneP => (1.0 / (1.0 + units as f64), BetaHyper { a: 1.0, b: units as f64 }),
        PriorChoice::KNoise => {
            let kn = draw_k_noise(s.k, units, rng);
            (kn / units as f64, BetaHyper { a: kn, b: units as f64 - kn })
        }
    };
    cfg.fixed.pi_a = pi_a;
    cfg.fixed.pi_hyper = Some(hyper);
    cfg.groups = data
        .groups
        .iter()
        .map(|m| GroupDef { members: m.clone(), zero_sum: false, pi_a, tau_prior: GroupTauPrior::default() })
        .collect();
    cfg.noise = s.noise;
    cfg.plan.ladder = fit.ladder.clone();
    cfg.plan.chains = fit.chains;
    cfg.plan.sweeps = fit.sweeps;
    cfg.plan.burnin = fit.burnin;
    cfg.plan.seed = seed;
    cfg.plan.keep_records = true;
    cfg.plan.workers = 0;
    Ok(cfg)
}

/// Outcome of one benchmark replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub metrics: MetricRow,
    pub mip_type1: usize,
    pub mip_type2: usize,
}

/// Mean, standard deviation and Monte Carlo standard error of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub mcse: f64,
}

impl MetricSummary {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        if v.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN, mcse: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, sd, mcse: sd / n.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub scenario: String,
    pub prior: String,
    pub replicates: usize,
    pub l2: MetricSummary,
    pub type1: MetricSummary,
    pub type2: MetricSummary,
    pub mip_type1: MetricSummary,
    pub mip_type2: MetricSummary,
    pub seconds: MetricSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub summary: BenchmarkSummary,
    pub replicates: Vec<ReplicateResult>,
}

/// Seeds of replicate `r`: (data seed stream, fit seed).
pub fn replicate_seeds(base: u64, r: usize) -> (u64, u64) {
    (r as u64, base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64 + 1))
}

pub fn replicate_rng(base: u64, r: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base);
    rng.set_stream(replicate_seeds(base, r).0);
    rng
}

/// Generates, fits and scores one replicate.
pub fn run_replicate(s: &SimScenario, fit: &FitSettings, r: usize) -> Result<ReplicateResult> {
    let mut rng = replicate_rng(s.seed, r);
    let data = generate_scenario(s, &mut rng)?;
    let cfg = fit_config(s, &data, fit, replicate_seeds(s.seed, r).1, &mut rng)?;
    let model = ModelData::new(&data.x, data.response.clone(), &cfg.groups)?;
    let start = Instant::now();
    let out = engine::run(&model, &cfg, None)?;
    let seconds = start.elapsed().as_secs_f64();
    let hat = posterior_median(&out, s.noise);
    let mut metrics = score_fit(&hat, &data.beta)?;
    metrics.seconds = seconds;
    let (mip_type1, mip_type2) = mip_errors(&out.mips(), &data.beta);
    Ok(ReplicateResult { replicate: r, metrics, mip_type1, mip_type2 })
}

/// Runs `s.replicates` replicates in parallel and summarises them.
pub fn run_benchmark(s: &SimScenario, fit: &FitSettings) -> Result<BenchmarkResult> {
    let reps = (0..s.replicates)
        .into_par_iter()
        .map(|r| run_replicate(s, fit, r))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&ReplicateResult) -> f64| MetricSummary::of(&reps.iter().map(f).collect::<Vec<_>>());
    let summary = BenchmarkSummary {
        scenario: s.name.clone(),
        prior: fit.prior.label().into(),
        replicates: reps.len(),
        l2: col(&|r| r.metrics.l2),
        type1: col(&|r| r.metrics.type1 as f64),
        type2: col(&|r| r.metrics.type2 as f64),
        mip_type1: col(&|r| r.mip_type1 as f64),
        mip_type2: col(&|r| r.mip_type2 as f64),
        seconds: col(&|r| r.metrics.seconds),
    };
    Ok(BenchmarkResult { summary, replicates: reps })
}

fn cell(m: MetricSummary) -> String {
    format!("{:.3}({:.3}) +/- {:.3}", m.mean, m.sd, m.mcse)
}

/// Markdown table of benchmark summaries: mean(sd) +/- Monte Carlo
/// standard error.
pub fn markdown_table(rows: &[BenchmarkSummary]) -> String {
    let mut s = String::from("| scenario | prior | reps | L2 | Type 1 | Type 2 | Type 1 (MIP>0.5)* | Type 2 (MIP>0.5)* | seconds |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.scenario,
            r.prior,
            r.replicates,
            cell(r.l2),
            cell(r.type1),
            cell(r.type2),
            cell(r.mip_type1),
            cell(r.mip_type2),
            cell(r.seconds)
        );
    }
    s.push_str("\nType 1/Type 2 select coordinates with a nonzero posterior median. *Columns marked MIP>0.5 use the median probability model threshold, which is our choice of rule.\n");
    s
}

/// Summary CSV (one row per scenario and prior).
pub fn summary_csv(rows: &[BenchmarkSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario", "prior", "replicates", "metric", "mean", "sd", "mcse", "threshold_rule",
    ])?;
    for r in rows {
        for (name, m, rule) in [
            ("l2", r.l2, "median"),
            ("type1", r.type1, "median"),
            ("type2", r.type2, "median"),
            ("type1", r.mip_type1, "mip>0.5"),
            ("type2", r.mip_type2, "mip>0.5"),
            ("seconds", r.seconds, ""),
        ] {
            w.write_record([
                r.scenario.clone(),
                r.prior.clone(),
                r.replicates.to_string(),
                name.to_string(),
                m.mean.to_string(),
                m.sd.to_string(),
                m.mcse.to_string(),
                rule.to_string(),
            ])?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).map_err(|e| Error::Parse(e.to_string()))
}

/// Long-format per-replicate data for plotting.
pub fn long_csv(scenario: &str, prior: &str, reps: &[ReplicateResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "prior", "replicate", "metric", "value"])?;
    for r in reps {
        for (name, v) in [
            ("l2", r.metrics.l2),
            ("type1", r.metrics.type1 as f64),
            ("type2", r.metrics.type2 as f64),
            ("type1_mip", r.mip_type1 as f64),
            ("type2_mip", r.mip_type2 as f64),
            ("seconds", r.metrics.seconds),
        ] {
            w.write_record([scenario, prior, &r.replicate.to_string(), name, &v.to_string()])?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).map_err(|e| Error::Parse(e.to_string()))
}

/// Coverage and width of unbounded HPD intervals for one coordinate of
/// one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageObs {
    pub replicate: usize,
    pub magnitude: f64,
    pub mip: f64,
    /// (level, covered, width) per requested level.
    pub intervals: Vec<(f64, bool, f64)>,
}

/// Fits one credibility replicate and scores the unbounded HPD intervals
/// of every signal and of `fit.watch_zeros` random zero coordinates.
pub fn run_credibility_replicate(
    s: &SimScenario,
    fit: &FitSettings,
    levels: &[f64],
    r: usize,
) -> Result<Vec<CoverageObs>> {
    let mut rng = replicate_rng(s.seed, r);
    let data = generate_scenario(s, &mut rng)?;
    let mut cfg = fit_config(s, &data, fit, replicate_seeds(s.seed, r).1, &mut rng)?;
    cfg.plan.keep_records = false;
    let signals: Vec<usize> = (0..s.p).filter(|&j| data.beta[j] != 0.0).collect();
    let zeros: Vec<usize> = (0..s.p).filter(|&j| data.beta[j] == 0.0).collect();
    let picked = sample(&mut rng, zeros.len(), fit.watch_zeros.min(zeros.len()));
    let mut watch = signals;
    watch.extend(picked.into_iter().map(|i| zeros[i]));
    cfg.plan.watchlist = watch.clone();
    let model = ModelData::new(&data.x, data.response.clone(), &cfg.groups)?;
    let out = engine::run(&model, &cfg, None)?;
    let mips = out.mips();
    let mut obs = Vec::with_capacity(watch.len());
    for &j in &watch {
        let draws = out.unbounded(j)?;
        let mut intervals = Vec::with_capacity(levels.len());
        for &lv in levels {
            let (lo, hi) = hpd_interval(&draws, lv)?;
            intervals.push((lv, lo <= data.beta[j] && data.beta[j] <= hi, hi - lo));
        }
        obs.push(CoverageObs { replicate: r, magnitude: data.beta[j].abs(), mip: mips[j], intervals });
    }
    Ok(obs)
}

/// Coverage summary for one |beta| class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub magnitude: f64,
    pub count: usize,
    pub mean_mip: f64,
    /// (level, coverage, mean width) per level.
    pub levels: Vec<(f64, f64, f64)>,
}

pub fn summarize_coverage(obs: &[CoverageObs]) -> Vec<CoverageRow> {
    let mut mags: Vec<f64> = obs.iter().map(|o| o.magnitude).collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    mags.into_iter()
        .map(|m| {
            let sel: Vec<&CoverageObs> = obs.iter().filter(|o| o.magnitude == m).collect();
            let c = sel.len() as f64;
            let nl = sel.first().map_or(0, |o| o.intervals.len());
            let levels = (0..nl)
                .map(|i| {
                    let cov = sel.iter().filter(|o| o.intervals[i].1).count() as f64 / c;
                    let width = sel.iter().map(|o| o.intervals[i].2).sum::<f64>() / c;
                    (sel[0].intervals[i].0, cov, width)
                })
                .collect();
            CoverageRow { magnitude: m, count: sel.len(), mean_mip: sel.iter().map(|o| o.mip).sum::<f64>() / c, levels }
        })
        .collect()
}

pub fn run_credibility(s: &SimScenario, fit: &FitSettings, levels: &[f64]) -> Result<Vec<CoverageObs>> {
    let per = (0..s.replicates)
        .into_par_iter()
        .map(|r| run_credibility_replicate(s, fit, levels, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn coverage_markdown(rows: &[CoverageRow]) -> String {
    let mut s = String::from("| abs(beta) | n | av. MIP |");
    let levels: Vec<f64> = rows.first().map_or(Vec::new(), |r| r.levels.iter().map(|l| l.0).collect());
    for l in &levels {
        let _ = write!(s, " {l} |");
    }
    s.push_str("\n|---|---|---|");
    s.push_str(&"---|".repeat(levels.len()));
    s.push('\n');
    for r in rows {
        let _ = write!(s, "| {} | {} | {:.3} |", r.magnitude, r.count, r.mean_mip);
        for (_, cov, w) in &r.levels {
            let _ = write!(s, " {cov:.3} [{w:.3}] |");
        }
        s.push('\n');
    }
    s.push_str("\nCoverage [mean width] of unbounded HPD intervals.\n");
    s
}

pub fn coverage_csv(obs: &[CoverageObs]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["replicate", "magnitude", "mip", "level", "covered", "width"])?;
    for o in obs {
        for (lv, c, wd) in &o.intervals {
            w.write_record([
                o.replicate.to_string(),
                o.magnitude.to_string(),
                o.mip.to_string(),
                lv.to_string(),
                (*c as u8).to_string(),
                wd.to_string(),
            ])?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).map_err(|e| Error::Parse(e.to_string()))
}

/// MIP summary of one duplicated-design fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicationSummary {
    pub replicate: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Mean over pairs of |MIP_j - MIP_(j + p/2)|.
    pub asymmetry: f64,
    pub mean_zero_mip: f64,
    pub max_zero_mip: f64,
}

/// Fits one duplicated-design replicate started at the mode of the first
/// copy (the true coefficients on the first half).
pub fn run_duplication_replicate(s: &SimScenario, fit: &FitSettings, r: usize) -> Result<DuplicationSummary> {
    if s.pattern != BetaPattern::Duplicated {
        return Err(Error::Config("duplication study needs the duplicated pattern".into()));
    }
    let mut rng = replicate_rng(s.seed, r);
    let data = generate_scenario(s, &mut rng)?;
    let mut cfg = fit_config(s, &data, fit, replicate_seeds(s.seed, r).1, &mut rng)?;
    cfg.plan.keep_records = false;
    cfg.plan.initial_beta = (0..s.p).filter(|&j| data.beta[j] != 0.0).map(|j| (j, data.beta[j])).collect();
    let model = ModelData::new(&data.x, data.response.clone(), &cfg.groups)?;
    let mips = engine::run(&model, &cfg, None)?.mips();
    let half = s.p / 2;
    let k = DUPLICATED_PATTERN.len();
    let first: Vec<f64> = mips[..k].to_vec();
    let second: Vec<f64> = mips[half..half + k].to_vec();
    let asymmetry = first.iter().zip(&second).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
    let zeros: Vec<f64> = (0..s.p).filter(|&j| j % half >= k).map(|j| mips[j]).collect();
    Ok(DuplicationSummary {
        replicate: r,
        first,
        second,
        asymmetry,
        mean_zero_mip: zeros.iter().sum::<f64>() / zeros.len().max(1) as f64,
        max_zero_mip: zeros.iter().copied().fold(0.0, f64::max),
    })
}

pub fn run_duplication(s: &SimScenario, fit: &FitSettings) -> Result<Vec<DuplicationSummary>> {
    (0..s.replicates).into_par_iter().map(|r| run_duplication_replicate(s, fit, r)).collect()
}

/// Long-format duplication results: one row per (replicate, copy, pair)
/// MIP plus one asymmetry row per replicate.
pub fn duplication_csv(label: &str, rows: &[DuplicationSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ladder", "replicate", "metric", "pair", "value"])?;
    for r in rows {
        for (name, half) in [("mip_first", &r.first), ("mip_second", &r.second)] {
            for (k, v) in half.iter().enumerate() {
                w.write_record([label, &r.replicate.to_string(), name, &k.to_string(), &v.to_string()])?;
            }
        }
        w.write_record([label, &r.replicate.to_string(), "asymmetry", "", &r.asymmetry.to_string()])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).map_err(|e| Error::Parse(e.to_string()))
}

pub fn duplication_markdown(label: &str, rows: &[DuplicationSummary]) -> String {
    let stat = |f: &dyn Fn(&DuplicationSummary) -> f64| MetricSummary::of(&rows.iter().map(f).collect::<Vec<_>>());
    let ext = |v: &[f64], pick: usize| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        match pick {
            0 => s[s.len() - 1],
            1 => median(&s),
            _ => s[0],
        }
    };
    let mut out = format!("| {label} | mean [sd] |\n|---|---|\n");
    for (name, half, pick) in [
        ("Max first 6", 0, 0),
        ("Med first 6", 0, 1),
        ("Min first 6", 0, 2),
        ("Max second 6", 1, 0),
        ("Med second 6", 1, 1),
        ("Min second 6", 1, 2),
    ] {
        let m = stat(&|d| ext(if half == 0 { &d.first } else { &d.second }, pick));
        let _ = writeln!(out, "| {name} | {:.3} [{:.3}] |", m.mean, m.sd);
    }
    let a = stat(&|d| d.asymmetry);
    let z = stat(&|d| d.mean_zero_mip);
    let zm = stat(&|d| d.max_zero_mip);
    let _ = writeln!(out, "| Pair asymmetry | {:.3} [{:.3}] |", a.mean, a.sd);
    let _ = writeln!(out, "| Average zeros | {:.2e} [{:.2e}] |", z.mean, z.sd);
    let _ = writeln!(out, "| Max zeros | {:.3} [{:.3}] |", zm.mean, zm.sd);
    out
}
