use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::config::RunConfig;
use super::data::{ColumnKind, ModelData, Response};
use super::plan::{ChainRecorder, MergeSource, StoredState};
use crate::diagnostics::SwitchRecord;
use crate::dist;
use crate::error::{Error, Result};
use crate::fixed::{self, Sigma2Conditional};
use crate::group::{build_envelope, find_mode, EnvelopeOptions, GroupDensity, GroupEigen, SwitchState};
use crate::model::{ActiveSet, ObservationWeights, ResidCorrelation, XtXCache};
use crate::noise::{self, NoiseKind};
use crate::slice::SliceSampler;
use crate::store::{ScalarRecord, SparseChainRecord};
use crate::tempering::{accept_merge, equi_energy_terms, propose_merge, EpsilonState};

/// Threshold below which Rao-Blackwellised probabilities are not stored.
pub const MIP_STORE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
enum PiSource {
    Shared,
    Fixed(f64),
    Singleton(f64),
}

/// Counters reported with each chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub merges_attempted: u64,
    pub merges_proposed: u64,
    pub merges_accepted: u64,
    pub envelope_failures: u64,
}

/// One Markov chain at a fixed temperature.
pub struct ChainSampler<'a> {
    data: &'a ModelData,
    cfg: &'a RunConfig,
    temperature: f64,
    rng: ChaCha20Rng,
    iter: u64,
    beta: Vec<f64>,
    included: Vec<bool>,
    groups: Vec<SwitchState>,
    sigma2: f64,
    pi_a: f64,
    tau_f2: f64,
    coord_scale: Vec<f64>,
    singleton_tau: Vec<f64>,
    weights: ObservationWeights,
    y_work: Vec<f64>,
    cache: XtXCache,
    resid: ResidCorrelation,
    active: ActiveSet,
    pi_source: Vec<PiSource>,
    rb_prob: Vec<f64>,
    unbounded_alt: Vec<f64>,
    watched: Vec<bool>,
    slice: SliceSampler,
    env_opts: EnvelopeOptions,
    eps: EpsilonState,
    switch_traces: Vec<Vec<SwitchRecord>>,
    phases: Option<Vec<&'static str>>,
    stats: SweepStats,
}

impl<'a> ChainSampler<'a> {
    /// Builds the initial state: beta = 0, all groups off, sigma2 =
    /// Var(y)/4 (or its fixed value), pi at its prior mean.
    pub fn new(data: &'a ModelData, cfg: &'a RunConfig, temperature: f64, stream: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.plan.seed);
        rng.set_stream(stream);
        let n = data.n();
        let pw = data.p_work();
        let sigma2 = match (cfg.noise.fixed_sigma(), cfg.sigma2.fixed) {
            (Some(s), _) => s * s,
            (None, Some(v)) => v,
            (None, None) => 0.25 * data.var_y.max(f64::MIN_POSITIVE),
        };
        let pi_a = match cfg.fixed.pi_hyper {
            Some(h) => h.a / (h.a + h.b),
            None => cfg.fixed.pi_a,
        };
        let mut pi_source = vec![PiSource::Shared; pw];
        let mut singleton_tau = vec![0.0; pw];
        for (w, s) in data.singletons.iter().enumerate() {
            if let Some(s) = s {
                pi_source[w] = PiSource::Singleton(s.pi_a);
                singleton_tau[w] = s.scale;
            }
        }
        for o in &cfg.fixed.pi_overrides {
            if let Some(w) = data.orig_to_work[o.coord] {
                pi_source[w] = PiSource::Fixed(o.pi);
            }
        }
        let mut watched = vec![false; pw];
        for &j in &cfg.plan.watchlist {
            let w = data.orig_to_work[j].ok_or_else(|| Error::Config(format!("coordinate {j} cannot be watched")))?;
            watched[w] = true;
        }
        let mut weights = ObservationWeights::unit(n);
        let y_work = match &data.response {
            Response::Continuous(y) => y.clone(),
            Response::Binary(z) => {
                let nu = cfg.noise.nu().unwrap_or(noise::LOGISTIC_ROBIT_NU);
                let s = sigma2.sqrt();
                let latent: Vec<f64> = z.iter().map(|&zi| noise::exact_robit_latent(zi, 0.0, s, nu, &mut rng)).collect();
                weights.set(noise::draw_t_weights(&latent, sigma2, nu, temperature, &mut rng))?;
                latent
            }
        };
        let mut init: Vec<(usize, f64)> = cfg.plan.initial_beta.clone();
        init.sort_by_key(|e| e.0);
        let beta = data.to_working(&init);
        let mut included = vec![false; pw];
        for &w in &data.fixed_cols {
            included[w] = beta[w] != 0.0;
        }
        let groups: Vec<SwitchState> = data
            .groups
            .iter()
            .map(|g| {
                let ss: f64 = g.cols.iter().map(|&c| beta[c] * beta[c]).sum();
                if ss > 0.0 {
                    SwitchState { active: true, x2: ss / g.cols.len() as f64 }
                } else {
                    SwitchState::inactive()
                }
            })
            .collect();
        let resid = ResidCorrelation::rebuild(&data.x, &y_work, &beta, &weights)?;
        let slice = SliceSampler::new(cfg.sampler.slice_width, 50);
        let mut cache = XtXCache::new(pw, cfg.sampler.cache_block, cfg.sampler.eviction_age);
        cache.refresh_diag(&data.x, &weights);
        Ok(Self {
            data,
            cfg,
            temperature,
            rng,
            iter: 0,
            beta,
            included,
            groups,
            sigma2,
            pi_a,
            tau_f2: cfg.fixed.tau_f2,
            coord_scale: vec![1.0; pw],
            singleton_tau,
            weights,
            y_work,
            cache,
            resid,
            active: ActiveSet::new(),
            pi_source,
            rb_prob: vec![0.0; pw],
            unbounded_alt: vec![0.0; pw],
            watched,
            slice,
            env_opts: cfg.sampler.envelope.unwrap_or_default(),
            eps: EpsilonState::new(cfg.plan.ladder.epsilon),
            switch_traces: vec![Vec::new(); data.groups.len()],
            phases: None,
            stats: SweepStats::default(),
        })
    }

    /// Records the name of every sweep phase as it runs.
    pub fn enable_phase_trace(&mut self) {
        self.phases = Some(Vec::new());
    }

    pub fn phase_trace(&self) -> Option<&[&'static str]> {
        self.phases.as_deref()
    }

    fn phase(&mut self, name: &'static str) {
        if let Some(p) = &mut self.phases {
            p.push(name);
        }
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn beta_working(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_original(&self) -> Vec<(usize, f64)> {
        self.data.to_original(&self.beta)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn pi_a(&self) -> f64 {
        self.pi_a
    }

    pub fn tau_f2(&self) -> f64 {
        self.tau_f2
    }

    pub fn group_states(&self) -> &[SwitchState] {
        &self.groups
    }

    pub fn stats(&self) -> SweepStats {
        self.stats
    }

    pub fn switch_traces(&self) -> &[Vec<SwitchRecord>] {
        &self.switch_traces
    }

    pub fn take_switch_traces(&mut self) -> Vec<Vec<SwitchRecord>> {
        std::mem::replace(&mut self.switch_traces, vec![Vec::new(); self.data.groups.len()])
    }

    /// Rao-Blackwellised inclusion probabilities of the fixed working
    /// columns from the latest sweep.
    pub fn inclusion_probabilities(&self) -> &[f64] {
        &self.rb_prob
    }

    pub fn xt_resid(&self) -> &ResidCorrelation {
        &self.resid
    }

    pub fn cache(&self) -> &XtXCache {
        &self.cache
    }

    pub fn weights(&self) -> &ObservationWeights {
        &self.weights
    }

    pub fn response_working(&self) -> &[f64] {
        &self.y_work
    }

    fn slab_var(&self, w: usize) -> f64 {
        if let PiSource::Singleton(_) = self.pi_source[w] {
            return self.singleton_tau[w];
        }
        let base = if self.cfg.fixed.slab_relative { self.tau_f2 * self.sigma2 } else { self.tau_f2 };
        base * self.coord_scale[w]
    }

    fn pi_for(&self, w: usize) -> f64 {
        match self.pi_source[w] {
            PiSource::Shared => self.pi_a,
            PiSource::Fixed(p) | PiSource::Singleton(p) => p,
        }
    }

    fn eta(&self) -> Vec<f64> {
        self.data.x.mul_vec(&self.beta)
    }

    fn rebuild_resid(&mut self) -> Result<()> {
        self.resid = ResidCorrelation::rebuild(&self.data.x, &self.y_work, &self.beta, &self.weights)?;
        Ok(())
    }

    fn set_coordinate(&mut self, w: usize, value: f64) -> Result<()> {
        let old = self.beta[w];
        if value == old {
            return Ok(());
        }
        self.cache.ensure_column(w, &self.data.x, &self.weights, self.iter)?;
        self.resid.update_after_coordinate(w, value - old, &self.cache, self.weights.epoch())?;
        self.beta[w] = value;
        Ok(())
    }

    /// One full sweep at temperature `t` (the chain's own temperature, or a
    /// lower one on annealing sweeps). `merge` supplies the stored states
    /// of the next-hotter temperature.
    pub fn sweep(&mut self, t: f64, merge: Option<&MergeSource>) -> Result<()> {
        self.iter += 1;
        let it = self.iter;
        if let Some(src) = merge {
            if it.is_multiple_of(self.cfg.plan.ladder.merge_period) {
                self.phase("merge");
                self.try_merge(src)?;
            }
        }
        self.cache.refresh_diag(&self.data.x, &self.weights);
        self.phase("fixed_b");
        self.sweep_fixed(t)?;
        self.phase("group_tau");
        self.sweep_groups(t)?;
        self.phase("cache_refresh");
        self.refresh_active()?;
        self.phase("joint_beta");
        self.draw_joint(t)?;
        self.phase("xt_resid");
        if it.is_multiple_of(self.cfg.sampler.resid_rebuild_period) {
            self.rebuild_resid()?;
        }
        if self.cfg.noise.is_binary() {
            self.phase("latent");
            self.update_latent(t)?;
        } else {
            self.phase("sigma2");
            self.update_sigma2(t)?;
            if matches!(self.cfg.noise, NoiseKind::StudentT { .. })
                && it.is_multiple_of(self.cfg.sampler.weight_refresh_period)
            {
                self.phase("weights");
                self.update_weights(t)?;
            }
        }
        self.phase("hyper");
        self.update_hyper(t);
        Ok(())
    }

    fn sweep_fixed(&mut self, t: f64) -> Result<()> {
        // the tempered likelihood is the likelihood at noise variance T sigma2
        let sigma2 = t * self.sigma2;
        for idx in 0..self.data.fixed_cols.len() {
            let w = self.data.fixed_cols[idx];
            let s = self.cache.diag()[w];
            let r = self.resid.get(w) + s * self.beta[w];
            let v = self.slab_var(w);
            let lo = fixed::collapsed_log_odds(r, s, sigma2, v)?;
            let prob = fixed::inclusion_probability(lo, self.pi_for(w), t);
            self.rb_prob[w] = prob;
            let inc = fixed::draw_with_probability(prob, &mut self.rng);
            let new = if inc || self.watched[w] {
                let (m, var) = fixed::coordinate_conditional(r, s, sigma2, v);
                let draw = m + var.sqrt() * dist::std_normal(&mut self.rng);
                self.unbounded_alt[w] = draw;
                if inc {
                    draw
                } else {
                    0.0
                }
            } else {
                0.0
            };
            self.included[w] = inc;
            self.set_coordinate(w, new)?;
        }
        Ok(())
    }

    fn group_stats(&mut self, k: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let cols = &self.data.groups[k].cols;
        let jn = cols.len();
        // only the J x J block is needed; full X'WX columns would cost O(np) each
        // whenever the observation weights change
        let x = &self.data.x;
        let mut g = DMatrix::zeros(jn, jn);
        for (a, &ca) in cols.iter().enumerate() {
            let xa = x.column(ca);
            let v: Vec<f64> = if self.weights.is_unit() {
                xa.to_vec()
            } else {
                xa.iter().zip(self.weights.as_slice()).map(|(p, q)| p * q).collect()
            };
            for (b, &cb) in cols.iter().enumerate() {
                g[(a, b)] = x.column(cb).iter().zip(&v).map(|(p, q)| p * q).sum();
            }
        }
        let r = DVector::from_fn(jn, |a, _| {
            self.resid.get(cols[a]) + (0..jn).map(|b| g[(a, b)] * self.beta[cols[b]]).sum::<f64>()
        });
        Ok((g, r))
    }

    fn sweep_groups(&mut self, t: f64) -> Result<()> {
        let sigma2 = t * self.sigma2;
        for k in 0..self.data.groups.len() {
            let layout = &self.data.groups[k];
            let (g, r) = self.group_stats(k)?;
            let pi = layout.pi_a.clamp(1e-300, 1.0 - 1e-16);
            let log_odds = (pi.ln() - (-pi).ln_1p()) / t;
            let built = GroupEigen::from_gram(&g, &r, 0.0).and_then(|ge| {
                let f = GroupDensity::new(&ge, layout.prior, sigma2, log_odds)?;
                let env = build_envelope(&f, find_mode(&f), &self.env_opts)?;
                Ok((f, env))
            });
            let (f, env) = match built {
                Ok(v) => v,
                Err(Error::EnvelopeDegenerate(_)) | Err(Error::EigenFailure) => {
                    self.stats.envelope_failures += 1;
                    self.groups[k].active = false;
                    for &c in &layout.cols {
                        self.set_coordinate(c, 0.0)?;
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let step = crate::group::switch_step(
                &mut self.groups[k],
                &env,
                &f,
                &self.slice,
                self.cfg.sampler.hold_scale,
                &mut self.rng,
            );
            if self.cfg.sampler.record_switch_trace {
                self.switch_traces[k].push(SwitchRecord { w: step.active, a: step.a, d: step.d });
            }
            let cols = layout.cols.clone();
            if self.groups[k].active {
                let tau2 = self.groups[k].x2;
                let mut h = g;
                for a in 0..cols.len() {
                    h[(a, a)] += sigma2 / tau2;
                }
                let draw = fixed::gaussian_block_draw(h, &r, sigma2, &mut self.rng)?;
                for (a, &c) in cols.iter().enumerate() {
                    self.set_coordinate(c, draw[a])?;
                }
            } else {
                for &c in &cols {
                    self.set_coordinate(c, 0.0)?;
                }
            }
        }
        Ok(())
    }

    fn refresh_active(&mut self) -> Result<()> {
        let mut idx: Vec<usize> = self.data.fixed_cols.iter().copied().filter(|&w| self.included[w]).collect();
        for (k, g) in self.data.groups.iter().enumerate() {
            if self.groups[k].active {
                idx.extend_from_slice(&g.cols);
            }
        }
        self.active = ActiveSet::from_unsorted(idx);
        for j in self.active.as_slice() {
            self.cache.ensure_column(*j, &self.data.x, &self.weights, self.iter)?;
        }
        self.cache.evict_stale(self.iter, &self.active);
        Ok(())
    }

    fn draw_joint(&mut self, t: f64) -> Result<()> {
        if self.active.is_empty() {
            return Ok(());
        }
        let prec: Vec<f64> = self
            .active
            .iter()
            .map(|w| {
                let var = match self.data.columns[w] {
                    ColumnKind::Fixed { .. } => self.slab_var(w),
                    ColumnKind::Group { group, .. } => self.groups[group].x2,
                };
                t * self.sigma2 / var
            })
            .collect();
        let epoch = self.weights.epoch();
        fixed::draw_active_beta(
            self.active.as_slice(),
            &prec,
            &self.cache,
            epoch,
            &mut self.resid,
            &mut self.beta,
            t * self.sigma2,
            self.cfg.sampler.block_limit,
            &mut self.rng,
        )
    }

    /// sum beta^2 / (lambda tau-scale) and count over included fixed
    /// columns that use the shared slab.
    fn shared_slab_ss(&self, divide_sigma2: bool) -> (f64, usize) {
        let mut ss = 0.0;
        let mut k = 0;
        for &w in &self.data.fixed_cols {
            if self.included[w] && !matches!(self.pi_source[w], PiSource::Singleton(_)) {
                let mut d = self.coord_scale[w];
                if divide_sigma2 {
                    d *= self.sigma2;
                }
                ss += self.beta[w] * self.beta[w] / d;
                k += 1;
            }
        }
        (ss, k)
    }

    fn update_sigma2(&mut self, t: f64) -> Result<()> {
        if self.cfg.sigma2.fixed.is_some() {
            return Ok(());
        }
        let eta = self.eta();
        let rss: f64 = self
            .y_work
            .iter()
            .zip(&eta)
            .zip(self.weights.as_slice())
            .map(|((y, e), w)| w * (y - e) * (y - e))
            .sum();
        let relative_slab = if self.cfg.fixed.slab_relative {
            let (ss, k) = self.shared_slab_ss(false);
            Some((ss / self.tau_f2, k))
        } else {
            None
        };
        let c = Sigma2Conditional {
            rss,
            n: self.data.n(),
            prior_dof: self.cfg.sigma2.dof,
            prior_scale: self.cfg.sigma2.scale,
            relative_slab,
        };
        self.sigma2 = fixed::update_sigma2(&c, t, &mut self.rng)?;
        Ok(())
    }

    fn update_weights(&mut self, t: f64) -> Result<()> {
        let nu = self.cfg.noise.nu().expect("t noise has dof");
        let eta = self.eta();
        let r: Vec<f64> = self.y_work.iter().zip(&eta).map(|(y, e)| y - e).collect();
        let w = noise::draw_t_weights(&r, self.sigma2, nu, t, &mut self.rng);
        self.weights.set(w)?;
        self.rebuild_resid()
    }

    fn update_latent(&mut self, t: f64) -> Result<()> {
        let Response::Binary(z) = &self.data.response else {
            return Ok(());
        };
        let nu = self.cfg.noise.nu().unwrap_or(noise::LOGISTIC_ROBIT_NU);
        let sigma = self.sigma2.sqrt();
        let eta = self.eta();
        noise::draw_robit_latent(
            &mut self.y_work,
            z,
            &eta,
            self.weights.as_slice(),
            sigma,
            nu,
            t,
            &self.slice,
            &mut self.rng,
        );
        if self.iter.is_multiple_of(self.cfg.sampler.weight_refresh_period) {
            let r: Vec<f64> = self.y_work.iter().zip(&eta).map(|(y, e)| y - e).collect();
            let w = noise::draw_t_weights(&r, self.sigma2, nu, t, &mut self.rng);
            self.weights.set(w)?;
        }
        self.rebuild_resid()
    }

    fn update_hyper(&mut self, t: f64) {
        let fx = &self.cfg.fixed;
        if let Some(h) = fx.pi_hyper {
            let eligible: Vec<usize> = self
                .data
                .fixed_cols
                .iter()
                .copied()
                .filter(|&w| self.pi_source[w] == PiSource::Shared)
                .collect();
            let k = eligible.iter().filter(|&&w| self.included[w]).count();
            self.pi_a = fixed::update_pi(k, eligible.len(), h.a, h.b, t, &mut self.rng);
        }
        if let Some(h) = fx.tau_hyper {
            let (ss, k) = self.shared_slab_ss(fx.slab_relative);
            self.tau_f2 = fixed::update_tau_f2(ss, k, h.shape, h.scale, &mut self.rng);
        }
        if let Some(nu) = fx.long_tail_nu {
            let base = if fx.slab_relative { self.tau_f2 * self.sigma2 } else { self.tau_f2 };
            for i in 0..self.data.fixed_cols.len() {
                let w = self.data.fixed_cols[i];
                if matches!(self.pi_source[w], PiSource::Singleton(_)) {
                    continue;
                }
                let (a, b) = if self.included[w] {
                    (0.5 * (nu + 1.0), 0.5 * (nu + self.beta[w] * self.beta[w] / base))
                } else {
                    (0.5 * nu, 0.5 * nu)
                };
                self.coord_scale[w] = dist::inv_gamma(a, b, &mut self.rng);
            }
        }
        for i in 0..self.data.fixed_cols.len() {
            let w = self.data.fixed_cols[i];
            if let Some(s) = self.data.singletons[w] {
                let (a, b) = if self.included[w] {
                    (0.5 * s.dof + 0.5, 0.5 * s.dof * s.scale + 0.5 * self.beta[w] * self.beta[w])
                } else {
                    (0.5 * s.dof, 0.5 * s.dof * s.scale)
                };
                self.singleton_tau[w] = dist::inv_gamma(a, b, &mut self.rng);
            }
        }
    }

    /// Unnormalised log posterior of the current state with observation
    /// weights and latent responses integrated out. A chain at temperature
    /// T targets the likelihood and inclusion-indicator prior raised to 1/T
    /// times the remaining priors.
    pub fn log_posterior(&self) -> f64 {
        self.log_likelihood(&self.eta(), self.sigma2, 1.0) + self.log_prior()
    }

    /// Log-likelihood raised to 1/t at linear predictor `eta`, with weights
    /// and latents integrated out.
    fn log_likelihood(&self, eta: &[f64], sigma2: f64, t: f64) -> f64 {
        match (&self.data.response, self.cfg.noise) {
            (Response::Continuous(y), NoiseKind::StudentT { nu }) => {
                let r: Vec<f64> = y.iter().zip(eta).map(|(y, e)| y - e).collect();
                noise::tempered_t_log_likelihood(&r, sigma2, nu, t)
            }
            (Response::Continuous(y), _) => {
                y.iter().zip(eta).map(|(y, e)| dist::normal_ln_pdf(y - e, sigma2)).sum::<f64>() / t
            }
            (Response::Binary(z), kind) => {
                let nu = kind.nu().unwrap_or(noise::LOGISTIC_ROBIT_NU);
                noise::tempered_robit_log_likelihood(eta, z, sigma2.sqrt(), nu, t)
            }
        }
    }

    /// log P(inclusion indicators | pi) at working coefficients `beta`,
    /// active group flags and shared inclusion probability `pi_a`.
    fn indicator_log_prior(&self, beta: &[f64], active: &[bool], pi_a: f64) -> f64 {
        let mut lp = 0.0;
        for &w in &self.data.fixed_cols {
            let pi = match self.pi_source[w] {
                PiSource::Shared => pi_a,
                PiSource::Fixed(p) | PiSource::Singleton(p) => p,
            };
            if beta[w] != 0.0 {
                if pi < 1.0 {
                    lp += pi.ln();
                }
            } else {
                lp += (-pi).ln_1p();
            }
        }
        for (g, &on) in self.data.groups.iter().zip(active) {
            lp += if on { g.pi_a.ln() } else { (-g.pi_a).ln_1p() };
        }
        lp
    }

    fn group_flags(&self) -> Vec<bool> {
        self.groups.iter().map(|g| g.active).collect()
    }

    /// Part of the log posterior raised to 1/t on a tempered chain: the
    /// likelihood and the inclusion-indicator prior.
    fn tempered_energy(&self, eta: &[f64], sigma2: f64, beta: &[f64], active: &[bool], pi_a: f64, t: f64) -> f64 {
        self.log_likelihood(eta, sigma2, t) + self.indicator_log_prior(beta, active, pi_a) / t
    }

    /// Log prior of the current state: untempered continuous priors plus
    /// the inclusion-indicator prior.
    fn log_prior(&self) -> f64 {
        let mut lp = self.indicator_log_prior(&self.beta, &self.group_flags(), self.pi_a);
        let fx = &self.cfg.fixed;
        for &w in &self.data.fixed_cols {
            if self.included[w] {
                lp += dist::normal_ln_pdf(self.beta[w], self.slab_var(w));
            }
            if let Some(s) = self.data.singletons[w] {
                lp += dist::inv_chi_sq_ln_pdf(self.singleton_tau[w], s.dof, s.scale);
            } else if let Some(nu) = fx.long_tail_nu {
                lp += dist::inv_gamma_ln_pdf(self.coord_scale[w], 0.5 * nu, 0.5 * nu);
            }
        }
        for (k, g) in self.data.groups.iter().enumerate() {
            let st = self.groups[k];
            if st.active {
                lp += g.prior.ln_pdf(st.x2);
                lp += g.cols.iter().map(|&c| dist::normal_ln_pdf(self.beta[c], st.x2)).sum::<f64>();
            }
        }
        if self.cfg.sigma2.fixed.is_none() && !self.cfg.noise.is_binary() {
            lp += dist::inv_chi_sq_ln_pdf(self.sigma2, self.cfg.sigma2.dof, self.cfg.sigma2.scale);
        }
        if let Some(h) = fx.pi_hyper {
            lp += dist::beta_ln_pdf(self.pi_a, h.a, h.b);
        }
        if let Some(h) = fx.tau_hyper {
            lp += dist::inv_gamma_ln_pdf(self.tau_f2, h.shape, h.scale);
        }
        lp
    }

    fn try_merge(&mut self, src: &MergeSource) -> Result<()> {
        self.stats.merges_attempted += 1;
        let eta = self.eta();
        let cur = self.log_likelihood(&eta, self.sigma2, 1.0) + self.log_prior();
        let Some(entry) = propose_merge(cur, &src.index, &mut self.eps, &mut self.rng) else {
            return Ok(());
        };
        self.stats.merges_proposed += 1;
        let state = src.load(entry.chain, entry.iter)?;
        let cand_beta = self.data.to_working(&state.beta);
        let cand_eta = self.data.x.mul_vec(&cand_beta);
        let cand_sigma2 = if self.cfg.sigma2.fixed.is_none() && !self.cfg.noise.is_binary() {
            state.scalars.sigma2
        } else {
            self.sigma2
        };
        let cand_pi = if self.cfg.fixed.pi_hyper.is_some() { state.scalars.pi_a } else { self.pi_a };
        let mut cand_active = vec![false; self.groups.len()];
        for &(k, tau2) in &state.taus {
            if k < cand_active.len() && tau2 > 0.0 {
                cand_active[k] = true;
            }
        }
        let active = self.group_flags();
        let (t, ts) = (self.temperature, src.temperature);
        let cand = |tt| self.tempered_energy(&cand_eta, cand_sigma2, &cand_beta, &cand_active, cand_pi, tt);
        let cur = |tt| self.tempered_energy(&eta, self.sigma2, &self.beta, &active, self.pi_a, tt);
        let (c, u) = equi_energy_terms((cand(t), cand(ts)), (cur(t), cur(ts)));
        if accept_merge(c, u, &mut self.rng) {
            self.install(&state)?;
            self.stats.merges_accepted += 1;
        }
        Ok(())
    }

    /// Replaces the chain state with a stored one and redraws the
    /// augmentation variables from their exact conditionals.
    pub fn install(&mut self, s: &StoredState) -> Result<()> {
        self.beta = self.data.to_working(&s.beta);
        for &w in &self.data.fixed_cols {
            self.included[w] = self.beta[w] != 0.0;
        }
        for g in self.groups.iter_mut() {
            g.active = false;
        }
        for &(k, tau2) in &s.taus {
            if k < self.groups.len() && tau2 > 0.0 {
                self.groups[k] = SwitchState { active: true, x2: tau2 };
            }
        }
        if self.cfg.sigma2.fixed.is_none() && !self.cfg.noise.is_binary() {
            self.sigma2 = s.scalars.sigma2;
        }
        if self.cfg.fixed.pi_hyper.is_some() {
            self.pi_a = s.scalars.pi_a;
        }
        if self.cfg.fixed.tau_hyper.is_some() {
            self.tau_f2 = s.scalars.tau_f2;
        }
        let eta = self.eta();
        match (&self.data.response, self.cfg.noise) {
            (Response::Continuous(y), NoiseKind::StudentT { nu }) => {
                let r: Vec<f64> = y.iter().zip(&eta).map(|(y, e)| y - e).collect();
                let w = noise::draw_t_weights(&r, self.sigma2, nu, self.temperature, &mut self.rng);
                self.weights.set(w)?;
            }
            (Response::Binary(z), kind) => {
                let nu = kind.nu().unwrap_or(noise::LOGISTIC_ROBIT_NU);
                let sigma = self.sigma2.sqrt();
                for i in 0..z.len() {
                    self.y_work[i] = noise::exact_robit_latent(z[i], eta[i], sigma, nu, &mut self.rng);
                }
                let r: Vec<f64> = self.y_work.iter().zip(&eta).map(|(y, e)| y - e).collect();
                let w = noise::draw_t_weights(&r, self.sigma2, nu, self.temperature, &mut self.rng);
                self.weights.set(w)?;
            }
            _ => {}
        }
        self.rebuild_resid()?;
        self.cache.refresh_diag(&self.data.x, &self.weights);
        self.refresh_active()
    }

    /// Appends the current state to the chain files.
    pub fn record(&mut self, rec: &mut ChainRecorder) -> Result<()> {
        self.phase("record");
        let it = self.iter;
        let beta = SparseChainRecord { iter: it, entries: self.data.to_original(&self.beta) };
        let taus = SparseChainRecord {
            iter: it,
            entries: self
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.active)
                .map(|(k, g)| (k, g.x2))
                .collect(),
        };
        let mut mip = Vec::new();
        for &w in &self.data.fixed_cols {
            if let ColumnKind::Fixed { orig } = self.data.columns[w] {
                if self.rb_prob[w] > MIP_STORE_THRESHOLD {
                    mip.push((orig, self.rb_prob[w]));
                }
            }
        }
        for (k, g) in self.data.groups.iter().enumerate() {
            if self.groups[k].active {
                mip.extend(g.members.iter().map(|&m| (m, 1.0)));
            }
        }
        mip.sort_by_key(|e| e.0);
        let mip = SparseChainRecord { iter: it, entries: mip };
        let log_weight = match (&self.data.response, self.cfg.noise) {
            (Response::Binary(z), NoiseKind::Logistic) => noise::logistic_log_importance_weight(&self.eta(), z),
            _ => 0.0,
        };
        let scalars = ScalarRecord { iter: it, sigma2: self.sigma2, pi_a: self.pi_a, tau_f2: self.tau_f2, log_weight };
        let unbounded: Vec<f64> = self
            .cfg
            .plan
            .watchlist
            .iter()
            .map(|&j| {
                let w = self.data.orig_to_work[j].expect("validated watchlist");
                if self.included[w] {
                    self.beta[w]
                } else {
                    self.unbounded_alt[w]
                }
            })
            .collect();
        rec.append(&beta, &taus, &mip, self.log_posterior(), &scalars, &unbounded)
    }
}
