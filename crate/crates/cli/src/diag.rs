use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Subcommand;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use spikegibbs::diagnostics::{
    median, nested_hpd, read_switch_trace, switch_theory_check, union_inclusion, weighted_mips,
};
use spikegibbs::noise::self_normalize;
use spikegibbs::store::{read_coefficient_trace, read_scalars, ChainFileSet, UnboundedReader};
use spikegibbs::{SparseChainReader, SparseChainRecord};

use crate::table::{parse_list, Table};
use crate::OutputArgs;

#[derive(Subcommand, Debug)]
pub enum DiagCommand {
    /// Inclusion probabilities pooled over the coldest chains of a run.
    Mips {
        /// Run directory written by `fit`, or one chain directory.
        run: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Nested HPD intervals of one coefficient, from the sparse draws and,
    /// when the coefficient was watched, from its unbounded draws.
    Hpd {
        run: PathBuf,
        #[arg(long)]
        coef: usize,
        #[arg(long, default_value = "0.5,0.9,0.95,0.99")]
        levels: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Posterior probability that at least one of the coefficients is nonzero.
    Union {
        run: PathBuf,
        #[arg(long)]
        coefs: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Coupling-time and effective-sample-size summaries of a switching-chain trace.
    SwitchCheck {
        /// Trace CSV written by `fit --switch-trace`.
        trace: PathBuf,
        /// Paired coupling replicates.
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Chain directories of the coldest temperature of a run directory, or the
/// directory itself when it holds one chain.
fn coldest_chains(run: &Path) -> anyhow::Result<Vec<ChainFileSet>> {
    if ChainFileSet::new(run).beta().exists() {
        return Ok(vec![ChainFileSet::new(run)]);
    }
    let numbered = |dir: &Path, prefix: char| -> anyhow::Result<Vec<(usize, PathBuf)>> {
        let mut v = Vec::new();
        for e in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = e?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if let Some(i) = name.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()) {
                if path.is_dir() {
                    v.push((i, path));
                }
            }
        }
        v.sort();
        Ok(v)
    };
    let Some((_, coldest)) = numbered(run, 't')?.pop() else {
        bail!("{} holds no chain files", run.display());
    };
    let chains: Vec<ChainFileSet> = numbered(&coldest, 'c')?.into_iter().map(|(_, p)| ChainFileSet::new(p)).collect();
    if chains.is_empty() {
        bail!("{} holds no chains", coldest.display());
    }
    Ok(chains)
}

fn records(path: &Path) -> anyhow::Result<(usize, Vec<SparseChainRecord>)> {
    let r = SparseChainReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let p = r.p();
    let out = r.read_all()?;
    if let Some(off) = out.truncated_at {
        eprintln!("warning: {} has a truncated record at byte {off}", path.display());
    }
    Ok((p, out.records))
}

fn mips(run: &Path, output: &OutputArgs) -> anyhow::Result<()> {
    let (mut mip_recs, mut beta_recs, mut log_w, mut p) = (Vec::new(), Vec::new(), Vec::new(), 0);
    for c in coldest_chains(run)? {
        let (pm, m) = records(&c.mip())?;
        let (_, b) = records(&c.beta())?;
        p = pm;
        mip_recs.extend(m);
        beta_recs.extend(b);
        log_w.extend(read_scalars(&c.scalars())?.into_iter().map(|s| s.log_weight));
    }
    let n = mip_recs.len().max(1) as f64;
    let flat = vec![1.0; mip_recs.len()];
    let mip = weighted_mips(&mip_recs, &flat, p)?;
    let mut freq = vec![0.0; p];
    for r in &beta_recs {
        for &(j, _) in &r.entries {
            freq[j] += 1.0;
        }
    }
    freq.iter_mut().for_each(|f| *f /= n);
    // logistic fits carry importance weights toward the exact logistic posterior
    let weighted = log_w.iter().any(|w| *w != 0.0).then(|| weighted_mips(&mip_recs, &self_normalize(&log_w), p));
    let mut header = vec!["coordinate", "mip", "inclusion_freq"];
    if weighted.is_some() {
        header.push("weighted_mip");
    }
    let weighted = weighted.transpose()?;
    let mut t = Table::new(&header);
    for j in 0..p {
        let mut row = vec![j.to_string(), mip[j].to_string(), freq[j].to_string()];
        if let Some(w) = &weighted {
            row.push(w[j].to_string());
        }
        t.row(row);
    }
    t.emit(output)
}

fn hpd(run: &Path, coef: usize, levels: &str, output: &OutputArgs) -> anyhow::Result<()> {
    let levels: Vec<f64> = parse_list(levels)?;
    let chains = coldest_chains(run)?;
    let mut sparse = Vec::new();
    let mut unbounded = Vec::new();
    for c in &chains {
        sparse.extend(read_coefficient_trace(&c.beta(), coef, None)?.values);
        if c.unbounded().exists() {
            let u = UnboundedReader::open(&c.unbounded())?;
            if u.watchlist().contains(&coef) {
                unbounded.extend(u.draws(coef)?);
            }
        }
    }
    let mip = sparse.iter().filter(|v| **v != 0.0).count() as f64 / sparse.len().max(1) as f64;
    let mut t = Table::new(&["coefficient", "draws", "mip", "median", "level", "lower", "upper", "width"]);
    for (name, draws) in [("sparse", &sparse), ("unbounded", &unbounded)] {
        if draws.is_empty() {
            continue;
        }
        let med = median(draws);
        for (lv, (lo, hi)) in levels.iter().zip(nested_hpd(draws, &levels)?) {
            t.row(vec![
                coef.to_string(),
                name.into(),
                mip.to_string(),
                med.to_string(),
                lv.to_string(),
                lo.to_string(),
                hi.to_string(),
                (hi - lo).to_string(),
            ]);
        }
    }
    t.emit(output)
}

pub fn run(c: &DiagCommand) -> anyhow::Result<()> {
    match c {
        DiagCommand::Mips { run, output } => mips(run, output),
        DiagCommand::Hpd { run, coef, levels, output } => hpd(run, *coef, levels, output),
        DiagCommand::Union { run, coefs, output } => {
            let coords: Vec<usize> = parse_list(coefs)?;
            let mut all = Vec::new();
            for ch in coldest_chains(run)? {
                all.extend(records(&ch.beta())?.1);
            }
            let mut t = Table::new(&["coefficients", "records", "union_probability"]);
            let joined = coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
            t.row(vec![joined, all.len().to_string(), union_inclusion(&all, &coords).to_string()]);
            t.emit(output)
        }
        DiagCommand::SwitchCheck { trace, replicates, seed, output } => {
            let tr = read_switch_trace(trace)?;
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            let d = switch_theory_check(&tr, *replicates, &mut rng)?;
            let mut t = Table::new(&["metric", "value"]);
            for (k, v) in [
                ("steps", d.steps as f64),
                ("on_frequency", d.on_frequency),
                ("mean_a", d.mean_a),
                ("mean_d", d.mean_d),
                ("lambda2_bar", d.lambda2_bar),
                ("t_int_w", d.t_int_w),
                ("n_independent", d.n_independent),
                ("ess_autocorrelation", d.ess_autocorrelation),
                ("p_bar", d.p_bar),
                ("p_bar_printed_expression", d.p_bar_printed),
                ("expected_coupling_time", d.expected_coupling_time),
                ("var_coupling_time", d.var_coupling_time),
                ("mean_coupling_time", d.mean_coupling_time),
                ("sd_coupling_time", d.sd_coupling_time),
                ("coupling_replicates", d.replicates as f64),
            ] {
                t.row(vec![k.into(), v.to_string()]);
            }
            t.emit(output)
        }
    }
}
