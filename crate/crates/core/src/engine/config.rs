use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{EnvelopeOptions, GroupTauPrior};
use crate::noise::NoiseKind;
use crate::tempering::TemperatureLadder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaHyper {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaHyper {
    pub shape: f64,
    pub scale: f64,
}

/// A coordinate with its own fixed prior inclusion probability; 1 forces
/// the coordinate into every model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiOverride {
    pub coord: usize,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedEffectPrior {
    /// Shared prior inclusion probability (initial value when a hyperprior is set).
    pub pi_a: f64,
    pub pi_hyper: Option<BetaHyper>,
    pub pi_overrides: Vec<PiOverride>,
    /// Slab variance; relative to sigma2 when `slab_relative`.
    pub tau_f2: f64,
    pub tau_hyper: Option<InvGammaHyper>,
    pub slab_relative: bool,
    /// Degrees of freedom of an optional Student-t slab (scale mixture).
    pub long_tail_nu: Option<f64>,
}

impl Default for FixedEffectPrior {
    fn default() -> Self {
        Self {
            pi_a: 0.5,
            pi_hyper: None,
            pi_overrides: Vec::new(),
            tau_f2: 1.0,
            tau_hyper: None,
            slab_relative: true,
            long_tail_nu: None,
        }
    }
}

/// Scaled inverse chi-square prior on the noise variance, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sigma2Prior {
    pub dof: f64,
    pub scale: f64,
    pub fixed: Option<f64>,
}

impl Default for Sigma2Prior {
    fn default() -> Self {
        Self { dof: 1.0, scale: 1.0, fixed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDef {
    /// Original coordinates in the group.
    pub members: Vec<usize>,
    #[serde(default)]
    pub zero_sum: bool,
    pub pi_a: f64,
    #[serde(default)]
    pub tau_prior: GroupTauPrior,
}

impl GroupDef {
    /// Parses a range list such as `0-7:zerosum` or `3,5,9`. Ranges are
    /// inclusive; the optional `:zerosum` suffix constrains the group.
    pub fn parse(text: &str, pi_a: f64) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("group {text:?}: {why}"));
        let (body, zero_sum) = match text.trim().split_once(':') {
            Some((b, "zerosum")) => (b, true),
            Some(_) => return Err(bad("the only suffix is :zerosum")),
            None => (text.trim(), false),
        };
        let idx = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("expected coordinate indices"));
        let mut members = Vec::new();
        for part in body.split(',') {
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (idx(a)?, idx(b)?);
                    if a > b {
                        return Err(bad("descending range"));
                    }
                    members.extend(a..=b);
                }
                None => members.push(idx(part)?),
            }
        }
        Ok(Self { members, zero_sum, pi_a, tau_prior: GroupTauPrior::default() })
    }

    /// Reads a mapping file with rows (coordinate, group id, constrained
    /// flag). A non-numeric first row is taken as a header. Groups are
    /// returned in ascending id order.
    pub fn read_csv(path: &Path, pi_a: f64) -> Result<Vec<Self>> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut groups: BTreeMap<i64, Self> = BTreeMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let Ok(coord) = field(0).parse::<usize>() else {
                if row == 0 {
                    continue;
                }
                return Err(Error::Parse(format!("group map row {}: bad coordinate {:?}", row + 1, field(0))));
            };
            let id = field(1)
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("group map row {}: bad group id {:?}", row + 1, field(1))))?;
            let zero_sum = match field(2) {
                "" | "0" | "false" | "FALSE" => false,
                "1" | "true" | "TRUE" => true,
                other => return Err(Error::Parse(format!("group map row {}: bad flag {other:?}", row + 1))),
            };
            let g = groups.entry(id).or_insert_with(|| Self {
                members: Vec::new(),
                zero_sum,
                pi_a,
                tau_prior: GroupTauPrior::default(),
            });
            if g.zero_sum != zero_sum {
                return Err(Error::Parse(format!("group {id} has mixed constrained flags")));
            }
            g.members.push(coord);
        }
        Ok(groups.into_values().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    /// Largest block in the joint coefficient draw.
    pub block_limit: usize,
    /// Columns added to the Gram cache per allocation.
    pub cache_block: usize,
    /// Sweeps a cached column may stay unused before eviction.
    pub eviction_age: u64,
    /// Sweeps between full rebuilds of the residual correlations.
    pub resid_rebuild_period: u64,
    /// Sweeps between t-noise weight redraws.
    pub weight_refresh_period: u64,
    /// Scale of the laziness in the group switching chain.
    pub hold_scale: f64,
    pub slice_width: f64,
    /// Keep per-group (W, A, D) switching traces in memory.
    pub record_switch_trace: bool,
    #[serde(skip)]
    pub envelope: Option<EnvelopeOptions>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            block_limit: 400,
            cache_block: 16,
            eviction_age: 100,
            resid_rebuild_period: 50,
            weight_refresh_period: 1,
            hold_scale: (-0.5f64).exp(),
            slice_width: 1.0,
            record_switch_trace: false,
            envelope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunPlan {
    pub ladder: TemperatureLadder,
    pub chains: usize,
    pub sweeps: u64,
    pub burnin: u64,
    pub record_every: u64,
    pub seed: u64,
    /// Original coordinates whose unrestricted draws are recorded.
    pub watchlist: Vec<usize>,
    /// Keep stored coefficient records of the coldest chains in memory.
    pub keep_records: bool,
    /// Worker threads for chains (0 = the ambient rayon pool).
    pub workers: usize,
    /// Starting coefficients as (original coordinate, value); empty starts at zero.
    pub initial_beta: Vec<(usize, f64)>,
}

impl Default for RunPlan {
    fn default() -> Self {
        Self {
            ladder: TemperatureLadder::default(),
            chains: 1,
            sweeps: 1000,
            burnin: 100,
            record_every: 1,
            seed: 1,
            watchlist: Vec::new(),
            keep_records: false,
            workers: 0,
            initial_beta: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub fixed: FixedEffectPrior,
    pub sigma2: Sigma2Prior,
    pub groups: Vec<GroupDef>,
    pub noise: NoiseKind,
    pub sampler: SamplerOptions,
    pub plan: RunPlan,
}

impl RunConfig {
    /// Default priors: pi ~ Beta(1, p), sigma2 ~ Inv-chi-square(Var(y)/4, n)/n,
    /// i.e. Var(y)/4 degrees of freedom and unit scale, slab tau2 = sigma2 x
    /// IG(1, 1).
    pub fn default_for(p: usize, var_y: f64) -> Result<Self> {
        if !(var_y.is_finite() && var_y > 0.0) {
            return Err(Error::NonFiniteInput("response variance"));
        }
        Ok(Self {
            fixed: FixedEffectPrior {
                pi_a: 1.0 / (1.0 + p as f64),
                pi_hyper: Some(BetaHyper { a: 1.0, b: p as f64 }),
                pi_overrides: Vec::new(),
                tau_f2: 1.0,
                tau_hyper: Some(InvGammaHyper { shape: 1.0, scale: 1.0 }),
                slab_relative: true,
                long_tail_nu: None,
            },
            sigma2: Sigma2Prior { dof: 0.25 * var_y, scale: 1.0, fixed: None },
            ..Default::default()
        })
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let f = &self.fixed;
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(f.pi_a) || f.pi_overrides.iter().any(|o| !prob(o.pi) || o.coord >= p) {
            return Err(Error::Config("inclusion probabilities must lie in [0, 1]".into()));
        }
        if !(f.tau_f2 > 0.0 && f.tau_f2.is_finite()) {
            return Err(Error::Config("tau_f2 must be positive".into()));
        }
        if let Some(h) = f.pi_hyper {
            if !(h.a > 0.0 && h.b > 0.0) {
                return Err(Error::Config("Beta hyperparameters must be positive".into()));
            }
        }
        if let Some(h) = f.tau_hyper {
            if !(h.shape > 0.0 && h.scale > 0.0) {
                return Err(Error::Config("slab hyperparameters must be positive".into()));
            }
        }
        if f.long_tail_nu.is_some_and(|nu| !(nu > 0.0)) {
            return Err(Error::Config("long-tail dof must be positive".into()));
        }
        let s = &self.sigma2;
        if s.fixed.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("fixed sigma2 must be positive".into()));
        }
        if s.fixed.is_none() && !self.noise.is_binary() && !(s.dof >= 0.0 && s.scale >= 0.0) {
            return Err(Error::Config("sigma2 prior must have non-negative dof and scale".into()));
        }
        self.noise.validate()?;
        let mut seen = vec![false; p];
        for g in &self.groups {
            if g.members.is_empty() {
                return Err(Error::Config("empty group".into()));
            }
            if !prob(g.pi_a) {
                return Err(Error::Config("group inclusion probability outside [0, 1]".into()));
            }
            g.tau_prior.validate()?;
            if g.members.len() == 1 && g.tau_prior == GroupTauPrior::Flat {
                return Err(Error::Config("single-member group needs a proper slab prior".into()));
            }
            for &m in &g.members {
                if m >= p {
                    return Err(Error::Config(format!("group member {m} >= p = {p}")));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::Config(format!("coordinate {m} is in two groups")));
                }
            }
            if g.zero_sum && g.members.len() < 2 {
                return Err(Error::GroupTooSmall(g.members.len()));
            }
        }
        if f.pi_overrides.iter().any(|o| seen[o.coord]) {
            return Err(Error::Config("inclusion overrides apply to ungrouped coordinates only".into()));
        }
        let pl = &self.plan;
        pl.ladder.validate()?;
        if pl.sweeps <= pl.burnin {
            return Err(Error::Config("sweeps must exceed burnin".into()));
        }
        if pl.chains == 0 || pl.record_every == 0 {
            return Err(Error::Config("chains and record_every must be positive".into()));
        }
        if pl.initial_beta.iter().any(|&(j, v)| j >= p || !v.is_finite()) {
            return Err(Error::Config("initial coefficients must be finite and within range".into()));
        }
        if pl.watchlist.iter().any(|&j| j >= p || seen[j]) {
            return Err(Error::Config("watchlist entries must be ungrouped coordinates".into()));
        }
        let o = &self.sampler;
        if o.block_limit == 0 || o.resid_rebuild_period == 0 || o.weight_refresh_period == 0 {
            return Err(Error::Config("sampler periods and block limit must be positive".into()));
        }
        if !(o.hold_scale >= 0.0 && o.slice_width > 0.0) {
            return Err(Error::Config("hold_scale must be >= 0 and slice_width > 0".into()));
        }
        Ok(())
    }
}
