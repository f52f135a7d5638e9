use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Subcommand;
use spikegibbs::store::{
    compute_mips, inclusion_frequency, payload_size, read_coefficient_trace, read_energy, read_scalars,
    ChainFileSet, EnergyIndex, UnboundedReader, HEADER_LEN, PAIR_LEN,
};
use spikegibbs::SparseChainReader;

use crate::table::Table;
use crate::OutputArgs;

#[derive(Subcommand, Debug)]
pub enum ChainstoreCommand {
    /// Summarise any chain file: kind, dimensions, record count and size check.
    Inspect { file: PathBuf },
    /// Dense per-iteration series of one coefficient from a coefficient file.
    Trace {
        file: PathBuf,
        #[arg(long)]
        coef: usize,
        /// First stored iteration to include.
        #[arg(long)]
        from: Option<u64>,
        /// Last stored iteration to include.
        #[arg(long)]
        to: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rao-Blackwellized inclusion probabilities and inclusion frequencies of one chain directory.
    Mips {
        dir: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn magic(path: &Path) -> anyhow::Result<[u8; 4]> {
    let mut m = [0u8; 4];
    std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_exact(&mut m)
        .with_context(|| format!("{} is too short to be a chain file", path.display()))?;
    Ok(m)
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let len = std::fs::metadata(path)?.len();
    println!("file: {}", path.display());
    println!("bytes: {len}");
    match &magic(path)? {
        b"SGBC" | b"SGBT" | b"SGBM" => {
            let r = SparseChainReader::open(path)?;
            let (kind, p) = (r.kind(), r.p());
            let out = r.read_all()?;
            let entries: u64 = out.records.iter().map(|r| r.entries.len() as u64).sum();
            let sweeps = out.records.len() as u64;
            let want = HEADER_LEN + payload_size(sweeps, entries);
            println!("kind: sparse {kind:?}");
            println!("dimension: {p}");
            println!("records: {sweeps}");
            println!("entries: {entries}");
            if let (Some(a), Some(b)) = (out.records.first(), out.records.last()) {
                println!("iterations: {} to {}", a.iter, b.iter);
                println!("mean entries per record: {:.3}", entries as f64 / sweeps as f64);
            }
            match out.truncated_at {
                Some(off) => println!("truncated: partial record at byte {off}, {} trailing bytes", len - off),
                None => println!("size check: header {HEADER_LEN} + 16 x (records + entries) = {want}: {}", want == len),
            }
        }
        b"SGBE" => {
            let e = read_energy(path)?;
            println!("kind: energy");
            println!("records: {}", e.len());
            if let Some(best) = e.iter().map(|x| x.1).reduce(f64::max) {
                println!("log posterior: max {best:.4}, last {:.4}", e[e.len() - 1].1);
            }
            println!("trailing bytes: {}", (len - HEADER_LEN) % PAIR_LEN);
        }
        b"SGBI" => {
            let idx = EnergyIndex::read_sorted(path)?;
            println!("kind: sorted energy index");
            println!("records: {}", idx.len());
            if let (Some(a), Some(b)) = (idx.entries().first(), idx.entries().last()) {
                println!("log posterior range: {:.4} to {:.4}", a.log_p, b.log_p);
            }
        }
        b"SGBS" => {
            let s = read_scalars(path)?;
            println!("kind: scalars");
            println!("records: {}", s.len());
            if let Some(l) = s.last() {
                println!("last: iteration {}, sigma2 {:.5}, pi_a {:.5}, tau_f2 {:.5}", l.iter, l.sigma2, l.pi_a, l.tau_f2);
            }
        }
        b"SGBU" => {
            let u = UnboundedReader::open(path)?;
            println!("kind: unbounded draws");
            println!("watchlist: {:?}", u.watchlist());
            println!("sweeps: {}", u.sweeps());
        }
        m => bail!("{} is not a chain file (magic {:?})", path.display(), String::from_utf8_lossy(m)),
    }
    Ok(())
}

pub fn run(c: &ChainstoreCommand) -> anyhow::Result<()> {
    match c {
        ChainstoreCommand::Inspect { file } => inspect(file),
        ChainstoreCommand::Trace { file, coef, from, to, output } => {
            let range = match (from, to) {
                (None, None) => None,
                (a, b) => Some(a.unwrap_or(0)..=b.unwrap_or(u64::MAX)),
            };
            let tr = read_coefficient_trace(file, *coef, range)?;
            if let Some(off) = tr.truncated_at {
                eprintln!("warning: truncated record at byte {off} ignored");
            }
            let mut t = Table::new(&["iteration", "coefficient", "value"]);
            for (i, v) in tr.iters.iter().zip(&tr.values) {
                t.row(vec![i.to_string(), coef.to_string(), v.to_string()]);
            }
            t.emit(output)
        }
        ChainstoreCommand::Mips { dir, output } => {
            let files = ChainFileSet::new(dir);
            let p = SparseChainReader::open(&files.beta())?.p();
            let (mips, freq) = (compute_mips(&files.mip(), p)?, inclusion_frequency(&files.beta(), p)?);
            let mut t = Table::new(&["coordinate", "mip", "inclusion_freq"]);
            for j in 0..p {
                t.row(vec![j.to_string(), mips[j].to_string(), freq[j].to_string()]);
            }
            t.emit(output)
        }
    }
}
