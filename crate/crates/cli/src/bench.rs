use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use spikegibbs::tempering::TemperatureLadder;
use spikegibbs::harness::{
    coverage_csv, coverage_markdown, duplication_csv, duplication_markdown, long_csv, markdown_table, run_benchmark,
    run_credibility, run_duplication, summarize_coverage, summary_csv, FitSettings, PriorChoice, SimScenario,
};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorArg {
    /// Beta(1, p) inclusion prior.
    Beta1p,
    /// Beta(k_noise, p - k_noise) with a noisy guess of the true sparsity.
    Knoise,
    /// Both priors, one summary row each.
    Both,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// small, medium, large, group, logistic, credibility or ee.
    #[arg(long)]
    scenario: String,
    /// Replicates (defaults to the scenario's own count).
    #[arg(long)]
    replicates: Option<usize>,
    /// Directory for the CSV, Markdown and long-format outputs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = PriorArg::Both)]
    prior: PriorArg,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

fn settings(a: &BenchArgs, base: FitSettings) -> FitSettings {
    FitSettings {
        sweeps: a.sweeps.unwrap_or(base.sweeps),
        burnin: a.burnin.unwrap_or(base.burnin),
        chains: a.chains.unwrap_or(base.chains),
        ..base
    }
}

fn credibility(a: &BenchArgs, s: &SimScenario) -> anyhow::Result<()> {
    let fit = settings(a, FitSettings { chains: 1, sweeps: 2200, burnin: 200, watch_zeros: 20, ..Default::default() });
    let obs = run_credibility(s, &fit, &[0.5, 0.9, 0.95, 0.99])?;
    let md = coverage_markdown(&summarize_coverage(&obs));
    write(&a.out, "coverage.csv", &coverage_csv(&obs)?)?;
    write(&a.out, "table.md", &md)?;
    print!("{md}");
    Ok(())
}

fn equi_energy(a: &BenchArgs, s: &SimScenario) -> anyhow::Result<()> {
    let base = FitSettings { chains: 1, sweeps: 1200, burnin: 200, ..Default::default() };
    let ladders = [
        ("tempered", TemperatureLadder { temperatures: vec![1.5, 1.25, 1.0], merge_period: 10, anneal_period: 50, epsilon: 0.5 }),
        ("untempered", TemperatureLadder::default()),
    ];
    let (mut md, mut long, mut summary) = (String::new(), String::new(), String::from("ladder,replicates,mean_asymmetry\n"));
    for (i, (label, ladder)) in ladders.into_iter().enumerate() {
        let rows = run_duplication(s, &settings(a, FitSettings { ladder, ..base.clone() }))?;
        let mean = rows.iter().map(|r| r.asymmetry).sum::<f64>() / rows.len().max(1) as f64;
        summary.push_str(&format!("{label},{},{mean}\n", rows.len()));
        md.push_str(&duplication_markdown(label, &rows));
        md.push('\n');
        let csv = duplication_csv(label, &rows)?;
        // keep a single header in the combined long file
        long.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |x| x.1) });
    }
    write(&a.out, "table.md", &md)?;
    write(&a.out, "long.csv", &long)?;
    write(&a.out, "summary.csv", &summary)?;
    print!("{md}");
    Ok(())
}

pub fn run(a: &BenchArgs) -> anyhow::Result<()> {
    let mut s = SimScenario::by_name(&a.scenario)?;
    s.replicates = a.replicates.unwrap_or(s.replicates);
    s.seed = a.seed.unwrap_or(s.seed);
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.scenario.as_str() {
        "credibility" => return credibility(a, &s),
        "ee" => return equi_energy(a, &s),
        _ => {}
    }
    let priors = match a.prior {
        PriorArg::Beta1p => vec![PriorChoice::BetaOneP],
        PriorArg::Knoise => vec![PriorChoice::KNoise],
        PriorArg::Both => vec![PriorChoice::BetaOneP, PriorChoice::KNoise],
    };
    let (mut summaries, mut long) = (Vec::new(), String::new());
    for (i, prior) in priors.into_iter().enumerate() {
        let r = run_benchmark(&s, &settings(a, FitSettings { prior, ..Default::default() }))?;
        let csv = long_csv(&s.name, prior.label(), &r.replicates)?;
        long.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |x| x.1) });
        summaries.push(r.summary);
    }
    let md = markdown_table(&summaries);
    write(&a.out, "summary.csv", &summary_csv(&summaries)?)?;
    write(&a.out, "table.md", &md)?;
    write(&a.out, "long.csv", &long)?;
    print!("{md}");
    Ok(())
}
