use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::RunConfig;
use super::data::ModelData;
use super::sampler::{ChainSampler, SweepStats};
use crate::diagnostics::{write_switch_trace, SwitchRecord};
use crate::error::{Error, Result};
use crate::store::{
    read_scalars, ChainFileSet, EnergyIndex, EnergyWriter, ScalarRecord, ScalarWriter, SparseChainReader,
    SparseChainRecord, SparseChainWriter, SparseKind, UnboundedWriter,
};

/// Writers for one chain plus running MIP and inclusion sums.
pub struct ChainRecorder {
    beta: SparseChainWriter,
    tau: SparseChainWriter,
    mip: SparseChainWriter,
    energy: EnergyWriter,
    scalars: ScalarWriter,
    unbounded: UnboundedWriter,
    keep: Option<Vec<SparseChainRecord>>,
    unbounded_draws: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    mip_sum: Vec<f64>,
    incl_count: Vec<f64>,
    n: u64,
}

impl ChainRecorder {
    pub fn create(files: &ChainFileSet, p: usize, n_groups: usize, watch: &[usize], keep: bool) -> Result<Self> {
        Ok(Self {
            beta: SparseChainWriter::create(&files.beta(), SparseKind::Beta, p)?,
            tau: SparseChainWriter::create(&files.tau(), SparseKind::Tau, n_groups)?,
            mip: SparseChainWriter::create(&files.mip(), SparseKind::Mip, p)?,
            energy: EnergyWriter::create(&files.energy())?,
            scalars: ScalarWriter::create(&files.scalars())?,
            unbounded: UnboundedWriter::create(&files.unbounded(), p, watch)?,
            keep: keep.then(Vec::new),
            unbounded_draws: vec![Vec::new(); watch.len()],
            log_weights: Vec::new(),
            mip_sum: vec![0.0; p],
            incl_count: vec![0.0; p],
            n: 0,
        })
    }

    pub fn append(
        &mut self,
        beta: &SparseChainRecord,
        taus: &SparseChainRecord,
        mip: &SparseChainRecord,
        log_p: f64,
        scalars: &ScalarRecord,
        unbounded: &[f64],
    ) -> Result<()> {
        self.beta.append(beta)?;
        self.tau.append(taus)?;
        self.mip.append(mip)?;
        self.energy.append(beta.iter, log_p)?;
        self.scalars.append(scalars)?;
        self.unbounded.append(unbounded)?;
        for &(j, v) in &mip.entries {
            self.mip_sum[j] += v;
        }
        for &(j, _) in &beta.entries {
            self.incl_count[j] += 1.0;
        }
        for (d, v) in self.unbounded_draws.iter_mut().zip(unbounded) {
            d.push(*v);
        }
        self.log_weights.push(scalars.log_weight);
        if let Some(k) = &mut self.keep {
            k.push(beta.clone());
        }
        self.n += 1;
        Ok(())
    }

    fn finish(self) -> Result<RecordedDraws> {
        self.beta.finish()?;
        self.tau.finish()?;
        self.mip.finish()?;
        self.energy.finish()?;
        self.scalars.finish()?;
        self.unbounded.finish()?;
        let n = self.n.max(1) as f64;
        Ok(RecordedDraws {
            n_records: self.n,
            mips: self.mip_sum.iter().map(|s| s / n).collect(),
            inclusion_freq: self.incl_count.iter().map(|s| s / n).collect(),
            records: self.keep,
            unbounded: self.unbounded_draws,
            log_weights: self.log_weights,
        })
    }
}

struct RecordedDraws {
    n_records: u64,
    mips: Vec<f64>,
    inclusion_freq: Vec<f64>,
    records: Option<Vec<SparseChainRecord>>,
    unbounded: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
}

/// A stored state loaded for an equi-energy jump.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredState {
    pub beta: Vec<(usize, f64)>,
    pub taus: Vec<(usize, f64)>,
    pub scalars: ScalarRecord,
}

/// Random access to one finished chain's stored states by iteration id.
pub struct ChainArchive {
    files: ChainFileSet,
    beta_offsets: HashMap<u64, u64>,
    tau_offsets: HashMap<u64, u64>,
    scalars: HashMap<u64, ScalarRecord>,
}

impl ChainArchive {
    pub fn open(files: ChainFileSet) -> Result<Self> {
        let beta_offsets = SparseChainReader::open(&files.beta())?.build_offset_index()?.into_iter().collect();
        let tau_offsets = SparseChainReader::open(&files.tau())?.build_offset_index()?.into_iter().collect();
        let scalars = read_scalars(&files.scalars())?.into_iter().map(|s| (s.iter, s)).collect();
        Ok(Self { files, beta_offsets, tau_offsets, scalars })
    }

    fn read_at(path: &Path, offset: u64) -> Result<SparseChainRecord> {
        let mut r = SparseChainReader::open(path)?;
        r.seek(offset)?;
        r.next_record()?.ok_or_else(|| Error::CorruptRecord { offset, reason: "missing record".into() })
    }

    pub fn load(&self, iter: u64) -> Result<StoredState> {
        let missing = || Error::Config(format!("iteration {iter} is not stored"));
        let beta = Self::read_at(&self.files.beta(), *self.beta_offsets.get(&iter).ok_or_else(missing)?)?;
        let taus = Self::read_at(&self.files.tau(), *self.tau_offsets.get(&iter).ok_or_else(missing)?)?;
        let scalars = *self.scalars.get(&iter).ok_or_else(missing)?;
        Ok(StoredState { beta: beta.entries, taus: taus.entries, scalars })
    }
}

/// Stored states of all chains at the next-hotter temperature.
pub struct MergeSource {
    pub temperature: f64,
    pub index: EnergyIndex,
    archives: Vec<ChainArchive>,
}

impl MergeSource {
    pub fn open(temperature: f64, chains: &[ChainFileSet]) -> Result<Self> {
        let mut parts = Vec::with_capacity(chains.len());
        let mut archives = Vec::with_capacity(chains.len());
        for (c, files) in chains.iter().enumerate() {
            parts.push(EnergyIndex::from_energy_file(&files.energy(), c as u32)?);
            archives.push(ChainArchive::open(files.clone())?);
        }
        Ok(Self { temperature, index: EnergyIndex::merge(parts), archives })
    }

    pub fn load(&self, chain: u32, iter: u64) -> Result<StoredState> {
        self.archives
            .get(chain as usize)
            .ok_or_else(|| Error::Config(format!("no stored chain {chain}")))?
            .load(iter)
    }
}

/// Summary of one finished chain.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub temperature: f64,
    pub chain: usize,
    pub dir: PathBuf,
    pub n_records: u64,
    /// Rao-Blackwellised inclusion probabilities per original coordinate.
    pub mips: Vec<f64>,
    /// Fraction of stored iterations in which each coordinate was nonzero.
    pub inclusion_freq: Vec<f64>,
    pub records: Option<Vec<SparseChainRecord>>,
    /// Unrestricted draws per watched coordinate, in watchlist order.
    pub unbounded: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
    pub switch_traces: Vec<Vec<SwitchRecord>>,
    pub stats: SweepStats,
    pub final_beta: Vec<(usize, f64)>,
    pub final_sigma2: f64,
}

/// All chains of a run. `chains` holds the temperature-1 chains.
pub struct RunOutcome {
    pub chains: Vec<ChainOutcome>,
    pub hotter: Vec<ChainOutcome>,
    pub root: PathBuf,
    pub p: usize,
    pub watchlist: Vec<usize>,
    _tmp: Option<tempfile::TempDir>,
}

impl RunOutcome {
    /// MIPs averaged over the temperature-1 chains.
    pub fn mips(&self) -> Vec<f64> {
        average(self.chains.iter().map(|c| &c.mips), self.p)
    }

    pub fn inclusion_freq(&self) -> Vec<f64> {
        average(self.chains.iter().map(|c| &c.inclusion_freq), self.p)
    }

    /// Kept coefficient records of all temperature-1 chains.
    pub fn records(&self) -> Vec<SparseChainRecord> {
        self.chains.iter().flat_map(|c| c.records.iter().flatten().cloned()).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.log_weights.iter().copied()).collect()
    }

    /// Unrestricted draws of a watched coordinate pooled over chains.
    pub fn unbounded(&self, coord: usize) -> Result<Vec<f64>> {
        let k = self.watchlist.iter().position(|&j| j == coord).ok_or(Error::NotWatched(coord))?;
        Ok(self.chains.iter().flat_map(|c| c.unbounded[k].iter().copied()).collect())
    }

    /// Per-coordinate draws (zeros included) from the kept records.
    pub fn coefficient_draws(&self, coord: usize) -> Vec<f64> {
        self.records()
            .iter()
            .map(|r| r.entries.binary_search_by_key(&coord, |e| e.0).map(|i| r.entries[i].1).unwrap_or(0.0))
            .collect()
    }

    pub fn file_sets(&self) -> Vec<ChainFileSet> {
        self.chains.iter().map(|c| ChainFileSet::new(c.dir.clone())).collect()
    }
}

fn average<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, p: usize) -> Vec<f64> {
    let mut sum = vec![0.0; p];
    let mut n = 0.0;
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
        n += 1.0;
    }
    if n > 0.0 {
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// RNG stream of chain `ci` at ladder position `ti`.
pub fn chain_stream(ti: usize, ci: usize) -> u64 {
    ((ti as u64) << 32) | ci as u64
}

fn run_chain(
    data: &ModelData,
    cfg: &RunConfig,
    ti: usize,
    ci: usize,
    files: &ChainFileSet,
    source: Option<&MergeSource>,
    keep: bool,
) -> Result<ChainOutcome> {
    let ladder = &cfg.plan.ladder;
    let t = ladder.temperatures[ti];
    let anneal_t = if ladder.anneal_period > 0 { ladder.temperatures.get(ti + 1).copied() } else { None };
    let mut sampler = ChainSampler::new(data, cfg, t, chain_stream(ti, ci))?;
    let mut rec = ChainRecorder::create(files, data.p_orig, data.groups.len(), &cfg.plan.watchlist, keep)?;
    let plan = &cfg.plan;
    for it in 1..=plan.sweeps {
        let t_eff = match anneal_t {
            Some(lower) if it % ladder.anneal_period == 0 => lower,
            _ => t,
        };
        sampler
            .sweep(t_eff, source)
            .map_err(|e| Error::Config(format!("chain {ci} at temperature {t} failed at sweep {it}: {e}")))?;
        if it > plan.burnin && (it - plan.burnin).is_multiple_of(plan.record_every) {
            sampler.record(&mut rec)?;
        }
    }
    let switch_traces = sampler.take_switch_traces();
    if cfg.sampler.record_switch_trace {
        for (k, tr) in switch_traces.iter().enumerate() {
            write_switch_trace(&files.switch_trace(k), tr)?;
        }
    }
    let stats = sampler.stats();
    let final_beta = sampler.beta_original();
    let final_sigma2 = sampler.sigma2();
    let d = rec.finish()?;
    EnergyIndex::from_energy_file(&files.energy(), ci as u32)?.write_sorted(&files.energy_sorted())?;
    Ok(ChainOutcome {
        temperature: t,
        chain: ci,
        dir: files.dir.clone(),
        n_records: d.n_records,
        mips: d.mips,
        inclusion_freq: d.inclusion_freq,
        records: d.records,
        unbounded: d.unbounded,
        log_weights: d.log_weights,
        switch_traces,
        stats,
        final_beta,
        final_sigma2,
    })
}

/// Runs every temperature of the ladder from hottest to coldest. Chains at
/// one temperature run in parallel; each reads the finished stored states
/// of the temperature above it for equi-energy jumps. Chain files go to
/// `out/t{i}/c{j}`, or to a temporary directory owned by the outcome.
pub fn run(data: &ModelData, cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate(data.p_orig)?;
    let (root, tmp) = match out {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            (d.to_path_buf(), None)
        }
        None => {
            let t = tempfile::tempdir()?;
            (t.path().to_path_buf(), Some(t))
        }
    };
    let pool = match cfg.plan.workers {
        0 => None,
        w => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
    };
    let temps = &cfg.plan.ladder.temperatures;
    let mut hotter = Vec::new();
    let mut prev: Option<MergeSource> = None;
    let mut coldest = Vec::new();
    for ti in 0..temps.len() {
        let last = ti + 1 == temps.len();
        let sets = (0..cfg.plan.chains)
            .map(|ci| ChainFileSet::create(root.join(format!("t{ti}")).join(format!("c{ci}"))))
            .collect::<Result<Vec<_>>>()?;
        let keep = last && cfg.plan.keep_records;
        let body = || -> Vec<Result<ChainOutcome>> {
            sets.par_iter()
                .enumerate()
                .map(|(ci, files)| run_chain(data, cfg, ti, ci, files, prev.as_ref(), keep))
                .collect()
        };
        let outs = match &pool {
            Some(p) => p.install(body),
            None => body(),
        };
        let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
        if last {
            coldest = outs;
        } else {
            prev = Some(MergeSource::open(temps[ti], &sets)?);
            hotter.extend(outs);
        }
    }
    Ok(RunOutcome {
        chains: coldest,
        hotter,
        root,
        p: data.p_orig,
        watchlist: cfg.plan.watchlist.clone(),
        _tmp: tmp,
    })
}
