use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use spikegibbs::engine::{self, GroupDef};
use spikegibbs::model::io::{read_csv_matrix, read_csv_vector};
use spikegibbs::{ModelData, NoiseKind, Response, RunConfig};

use crate::table::{parse_list, Table};
use crate::OutputArgs;

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Design matrix CSV, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// Response CSV (first column); 0/1 for binary noise models.
    #[arg(long)]
    response: PathBuf,
    /// TOML run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for chain files and summaries.
    #[arg(long)]
    out: PathBuf,
    /// Both CSV files start with a header row.
    #[arg(long)]
    header: bool,
    /// gaussian, t:NU, robit:NU or logistic.
    #[arg(long)]
    noise: Option<NoiseKind>,
    /// Fix the fixed-effect inclusion probability (drops its Beta hyperprior).
    #[arg(long)]
    pi_a: Option<f64>,
    /// Fix the fixed-effect slab variance (drops its hyperprior).
    #[arg(long)]
    tau_f2: Option<f64>,
    /// Noise variance prior as DOF,SCALE or fixed:VALUE.
    #[arg(long)]
    sigma2_prior: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweeps per chain, burn-in included.
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Worker threads for chains (0 uses all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    record_every: Option<u64>,
    /// Coordinates whose unrestricted draws are stored, e.g. 0,4,9.
    #[arg(long)]
    watch: Option<String>,
    /// Group of coordinates, e.g. "0-7:zerosum"; repeatable.
    #[arg(long = "group")]
    groups: Vec<String>,
    /// Group mapping CSV with rows (coordinate, group id, constrained flag).
    #[arg(long)]
    groups_csv: Option<PathBuf>,
    /// Prior inclusion probability of each group.
    #[arg(long, default_value_t = 0.1)]
    group_pi: f64,
    /// Temperature ladder, hottest first, ending at 1, e.g. "1.6,1.4,1.2,1".
    #[arg(long)]
    temps: Option<String>,
    #[arg(long)]
    merge_period: Option<u64>,
    #[arg(long)]
    anneal_period: Option<u64>,
    #[arg(long)]
    ee_epsilon: Option<f64>,
    /// Write the switching-chain trace of every group.
    #[arg(long)]
    switch_trace: bool,
}

fn load_response(path: &Path, header: bool, noise: NoiseKind) -> anyhow::Result<Response> {
    let v = read_csv_vector(path, header)?;
    if !noise.is_binary() {
        return Ok(Response::Continuous(v));
    }
    v.iter()
        .enumerate()
        .map(|(i, &z)| match z {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => bail!("binary response row {} is {z}, expected 0 or 1", i + 1),
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map(Response::Binary)
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build_config(a: &FitArgs, base: Option<RunConfig>, p: usize, var_y: f64) -> anyhow::Result<RunConfig> {
    let mut cfg = match base {
        Some(c) => c,
        None => RunConfig::default_for(p, var_y)?,
    };
    if let Some(n) = a.noise {
        cfg.noise = n;
    }
    if let Some(v) = a.pi_a {
        cfg.fixed.pi_a = v;
        cfg.fixed.pi_hyper = None;
    }
    if let Some(v) = a.tau_f2 {
        cfg.fixed.tau_f2 = v;
        cfg.fixed.tau_hyper = None;
    }
    if let Some(s) = &a.sigma2_prior {
        match s.split_once(':') {
            Some(("fixed", v)) => cfg.sigma2.fixed = Some(v.trim().parse().context("fixed sigma2")?),
            _ => {
                let v: Vec<f64> = parse_list(s)?;
                let [dof, scale] = v[..] else { bail!("--sigma2-prior expects DOF,SCALE or fixed:VALUE") };
                cfg.sigma2.dof = dof;
                cfg.sigma2.scale = scale;
                cfg.sigma2.fixed = None;
            }
        }
    }
    let plan = &mut cfg.plan;
    plan.seed = a.seed.unwrap_or(plan.seed);
    plan.sweeps = a.iters.unwrap_or(plan.sweeps);
    plan.burnin = a.burnin.unwrap_or(plan.burnin);
    plan.chains = a.chains.unwrap_or(plan.chains);
    plan.workers = a.workers.unwrap_or(plan.workers);
    plan.record_every = a.record_every.unwrap_or(plan.record_every);
    if let Some(w) = &a.watch {
        plan.watchlist = parse_list(w)?;
    }
    let ladder = &mut plan.ladder;
    if let Some(t) = &a.temps {
        ladder.temperatures = parse_list(t)?;
    }
    ladder.merge_period = a.merge_period.unwrap_or(ladder.merge_period);
    ladder.anneal_period = a.anneal_period.unwrap_or(ladder.anneal_period);
    ladder.epsilon = a.ee_epsilon.unwrap_or(ladder.epsilon);
    for g in &a.groups {
        cfg.groups.push(GroupDef::parse(g, a.group_pi)?);
    }
    if let Some(path) = &a.groups_csv {
        cfg.groups.extend(GroupDef::read_csv(path, a.group_pi)?);
    }
    cfg.sampler.record_switch_trace |= a.switch_trace;
    cfg.validate(p)?;
    Ok(cfg)
}

pub fn run(a: &FitArgs) -> anyhow::Result<()> {
    let x = read_csv_matrix(&a.data, a.header).with_context(|| format!("reading {}", a.data.display()))?;
    let base = a.config.as_deref().map(load_config).transpose()?;
    let noise = a.noise.or(base.as_ref().map(|c| c.noise)).unwrap_or_default();
    let response = load_response(&a.response, a.header, noise)?;
    if response.len() != x.n() {
        bail!("{} responses for {} design rows", response.len(), x.n());
    }
    let var_y = if noise.is_binary() { 1.0 } else { response.variance() };
    let cfg = build_config(a, base, x.p(), var_y)?;
    let data = ModelData::new(&x, response, &cfg.groups)?;
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("config.toml"), toml::to_string(&cfg)?)?;
    let out = engine::run(&data, &cfg, Some(&a.out))?;

    let (mips, freq) = (out.mips(), out.inclusion_freq());
    let mut t = Table::new(&["coordinate", "mip", "inclusion_freq"]);
    for j in 0..mips.len() {
        t.row(vec![j.to_string(), mips[j].to_string(), freq[j].to_string()]);
    }
    t.emit(&OutputArgs { out: Some(a.out.join("mips.csv")), tsv: false })?;

    let mut order: Vec<usize> = (0..mips.len()).collect();
    order.sort_by(|&i, &j| mips[j].total_cmp(&mips[i]));
    println!("wrote {} chains to {}", out.chains.len() + out.hotter.len(), a.out.display());
    println!("highest inclusion probabilities:");
    for &j in order.iter().take(10).filter(|&&j| mips[j] > 0.0) {
        println!("  {j:>8}  {:.4}", mips[j]);
    }
    for c in &out.chains {
        let s = c.stats;
        if s.merges_attempted > 0 {
            println!(
                "chain {}: equi-energy merges attempted {}, proposed {}, accepted {}",
                c.chain, s.merges_attempted, s.merges_proposed, s.merges_accepted
            );
        }
        if s.envelope_failures > 0 {
            println!("chain {}: {} envelope failures", c.chain, s.envelope_failures);
        }
    }
    Ok(())
}
