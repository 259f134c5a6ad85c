use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AcceptanceRates, McmcConfig, ModelSpec, ModelState, PosteriorSamples, Priors, StepSizes};
use crate::copula::{link_value, CopulaFamily, CopulaParam, UnitPoint};
use crate::data::ReferenceData;
use crate::error::{Error, Result};
use crate::geom::Location;
use crate::marginal::{CountDist, MarginalFamily, MarginalParams};
use crate::stats::{
    norm_cdf, norm_quantile, norm_sf, open01, sample_inverse_gamma, sample_log_categorical, sample_truncated_normal,
};
use crate::weights::cutoffs_into;

/// Per-site quantities that depend on the marginal parameters, the jitters
/// and (for `lc`) the copula parameter of the current component.
#[derive(Clone)]
struct SiteCache {
    below: Vec<f64>,
    g: Vec<f64>,
    ln_g: Vec<f64>,
    pts: Vec<UnitPoint>,
    lc: Vec<f64>,
}

impl SiteCache {
    fn new(n: usize, family: CopulaFamily) -> Self {
        SiteCache {
            below: vec![0.0; n],
            g: vec![0.0; n],
            ln_g: vec![0.0; n],
            pts: vec![family.prepare(0.5); n],
            lc: vec![0.0; n],
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Counter {
    acc: u64,
    tries: u64,
    acc_post: u64,
    tries_post: u64,
}

impl Counter {
    fn record(&mut self, accepted: bool, post: bool) {
        self.tries += 1;
        self.acc += accepted as u64;
        if post {
            self.tries_post += 1;
            self.acc_post += accepted as u64;
        }
    }

    fn rate(&self) -> Option<f64> {
        if self.tries_post > 0 {
            Some(self.acc_post as f64 / self.tries_post as f64)
        } else if self.tries > 0 {
            Some(self.acc as f64 / self.tries as f64)
        } else {
            None
        }
    }
}

#[derive(Default)]
struct Counters {
    o: Counter,
    lambda: Counter,
    beta: Counter,
    r: Counter,
    phi: Counter,
    zeta: Counter,
}

pub(super) struct Chain<'a> {
    data: &'a ReferenceData,
    spec: ModelSpec,
    priors: Priors,
    config: McmcConfig,
    rng: ChaCha8Rng,
    n: usize,
    nbr: Vec<Vec<usize>>,
    dist: Vec<Vec<f64>>,
    loc: Vec<Location>,
    distinct_y: Vec<u64>,
    y_code: Vec<usize>,

    st: ModelState,
    cur: SiteCache,
    prop: SiteCache,
    par: Vec<CopulaParam>,
    /// Copula parameter of every (site, component) pair at the current φ.
    pars: Vec<Vec<CopulaParam>>,
    rstar: Vec<Vec<f64>>,
    rstar_prop: Vec<Vec<f64>>,
    children: Vec<Vec<usize>>,

    gamma_prec: Matrix3<f64>,
    gamma_prec_mean: Vector3<f64>,
    dtd: Matrix3<f64>,
    beta_prec: DMatrix<f64>,
    beta_mean: DVector<f64>,
    beta_chol: DMatrix<f64>,

    steps: StepSizes,
    counts: Counters,
    scratch: Vec<f64>,
    scratch_r: Vec<f64>,
    tails: Vec<f64>,
    lcs: Vec<f64>,
}

pub(super) fn initial_state(data: &ReferenceData, spec: &ModelSpec, priors: &Priors) -> Result<ModelState> {
    let n = data.len();
    if n == 0 {
        return Err(Error::data("no sites"));
    }
    let ys: Vec<f64> = data.counts.iter().map(|&y| y as f64).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let marginal = match spec.marginal {
        MarginalFamily::Poisson => MarginalParams::poisson(if mean > 0.0 { mean } else { 0.5 })?,
        MarginalFamily::NegBinom => {
            let p = data.covariates.ncol();
            let x = DMatrix::from_fn(n, p, |i, j| data.covariates.row(i)[j]);
            let z = DVector::from_iterator(n, ys.iter().map(|y| (y + 0.5).ln()));
            let xtx = x.transpose() * &x;
            let beta = match xtx.clone().cholesky() {
                Some(ch) if n >= p => ch.solve(&(x.transpose() * z)).iter().copied().collect(),
                _ => {
                    let mut b = vec![0.0; p];
                    b[0] = (mean + 0.5).ln();
                    b
                }
            };
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
            let r = if var > mean && mean > 0.0 {
                mean * mean / (var - mean)
            } else {
                100.0
            };
            MarginalParams::negbinom(beta, r.clamp(0.1, 100.0))?
        }
    };
    let gamma = [priors.gamma.mean[0], priors.gamma.mean[1], priors.gamma.mean[2]];
    let kappa2 = priors.kappa2.center();
    let zeta = priors.zeta.center();
    let mut t = vec![0.0; n];
    let mut rs = Vec::new();
    let mut rbuf = Vec::new();
    for i in 2..n {
        let site = data.reference.site(i);
        let mu = gamma[0] + gamma[1] * site.x + gamma[2] * site.y;
        let kappa = kappa2.sqrt();
        let d: Vec<f64> = data
            .reference
            .neighbors(i)
            .iter()
            .map(|&j| site.distance(&data.reference.site(j)))
            .collect();
        cutoffs_into(&d, zeta, &mut rbuf, &mut rs);
        let hi = rs[1];
        t[i] = if hi.is_infinite() {
            mu
        } else {
            let p = 0.5 * norm_cdf((hi - mu) / kappa);
            if p > 0.0 {
                (mu + kappa * norm_quantile(p)).min(hi.next_down())
            } else {
                hi - kappa.min(1.0)
            }
        };
    }
    Ok(ModelState {
        marginal,
        phi: priors.phi.center(),
        zeta,
        gamma,
        kappa2,
        o: vec![0.5; n],
        t,
        ell: vec![0; n],
    })
}

#[inline]
fn normal_step(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl<'a> Chain<'a> {
    pub(super) fn new(
        data: &'a ReferenceData,
        spec: ModelSpec,
        priors: Priors,
        config: McmcConfig,
        mut init: ModelState,
    ) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::data("no sites"));
        }
        if init.t.is_empty() && init.ell.is_empty() {
            let fresh = initial_state(data, &spec, &priors)?;
            init.t = fresh.t;
            init.ell = fresh.ell;
        }
        init.check(data, &spec)?;
        if init.t.len() != n || init.ell.len() != n {
            return Err(Error::invalid("initial state needs full-length t and ell"));
        }
        let loc: Vec<Location> = (0..n).map(|i| data.reference.site(i)).collect();
        let nbr: Vec<Vec<usize>> = (0..n).map(|i| data.reference.neighbors(i).to_vec()).collect();
        let dist: Vec<Vec<f64>> = (0..n)
            .map(|i| nbr[i].iter().map(|&j| loc[i].distance(&loc[j])).collect())
            .collect();
        for i in 1..n {
            if init.ell[i] as usize >= nbr[i].len() {
                return Err(Error::invalid(format!("ell[{i}] exceeds the neighbor count")));
            }
        }

        let mut distinct_y: Vec<u64> = data.counts.clone();
        distinct_y.sort_unstable();
        distinct_y.dedup();
        let y_code = data
            .counts
            .iter()
            .map(|y| distinct_y.binary_search(y).expect("present"))
            .collect();

        // γ: prior precision and the fixed cross-product of the design rows (1, x, y).
        let g_cov = priors.gamma.covariance()?;
        let g_cov3 = Matrix3::from_fn(|i, j| g_cov[(i, j)]);
        let gamma_prec = g_cov3
            .try_inverse()
            .ok_or_else(|| Error::config("gamma prior covariance is singular"))?;
        let gamma_prec_mean = gamma_prec * Vector3::from_column_slice(&priors.gamma.mean);
        let mut dtd = Matrix3::zeros();
        for site in loc.iter().skip(2) {
            let d = Vector3::new(1.0, site.x, site.y);
            dtd += d * d.transpose();
        }

        let p = data.covariates.ncol();
        let bp = priors.beta_prior(p);
        let beta_prec = bp
            .covariance()?
            .try_inverse()
            .ok_or_else(|| Error::config("beta prior covariance is singular"))?;
        let beta_mean = DVector::from_column_slice(&bp.mean);
        let beta_chol = match &init.marginal {
            MarginalParams::NegBinom { beta, r } => glm_proposal_factor(data, beta, *r, &beta_prec)?,
            MarginalParams::Poisson { .. } => DMatrix::zeros(0, 0),
        };

        let family = spec.copula;
        let mut chain = Chain {
            data,
            spec,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            steps: config.steps,
            priors,
            config,
            n,
            nbr,
            dist,
            loc,
            distinct_y,
            y_code,
            cur: SiteCache::new(n, family),
            prop: SiteCache::new(n, family),
            par: vec![CopulaParam::independence(family); n],
            rstar: vec![Vec::new(); n],
            rstar_prop: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
            st: init,
            gamma_prec,
            gamma_prec_mean,
            dtd,
            beta_prec,
            beta_mean,
            beta_chol,
            counts: Counters::default(),
            scratch: Vec::new(),
            scratch_r: Vec::new(),
            tails: Vec::new(),
            lcs: Vec::new(),
            pars: Vec::new(),
        };
        chain.build_caches()?;
        Ok(chain)
    }

    fn build_caches(&mut self) -> Result<()> {
        let n = self.n;
        self.refresh_pars();
        for i in 1..n {
            let l = self.st.ell[i] as usize;
            self.par[i] = self.pars[i][l];
            self.children[self.nbr[i][l]].push(i);
        }
        for i in 2..n {
            let mut r = Vec::new();
            cutoffs_into(&self.dist[i], self.st.zeta, &mut self.scratch_r, &mut r);
            let l = self.st.ell[i] as usize;
            if !(r[l] < self.st.t[i] && self.st.t[i] < r[l + 1]) {
                return Err(Error::invalid(format!(
                    "initial t[{i}] = {} lies outside the interval of component {l}",
                    self.st.t[i]
                )));
            }
            self.rstar[i] = r.clone();
            self.rstar_prop[i] = r;
        }
        let marginal = self.st.marginal.clone();
        let ll = self.fill_marginal(&marginal, true);
        std::mem::swap(&mut self.cur, &mut self.prop);
        match ll {
            Some(v) if v.is_finite() => Ok(()),
            _ => Err(Error::numerical("initial state has a non-finite likelihood")),
        }
    }

    fn refresh_pars(&mut self) {
        let phi = self.st.phi;
        self.pars = (0..self.n)
            .map(|i| (0..self.nbr[i].len()).map(|l| self.param(i, l, phi)).collect())
            .collect();
    }

    #[inline]
    fn param(&self, i: usize, l: usize, phi: f64) -> CopulaParam {
        CopulaParam::unchecked(self.spec.copula, link_value(self.spec.copula, phi, self.dist[i][l]))
    }

    /// Fill `prop` with site terms under `marginal` (jitters, ℓ and φ as
    /// current). Returns the data log-likelihood, or `None` for invalid
    /// parameters. With `with_data == false` only the caches are filled.
    fn fill_marginal(&mut self, marginal: &MarginalParams, with_data: bool) -> Option<f64> {
        let fam = self.spec.copula;
        let n = self.n;
        match marginal {
            MarginalParams::Poisson { .. } => {
                let d = marginal.dist(&[]).ok()?;
                let tab: Vec<(f64, f64, f64)> = self
                    .distinct_y
                    .iter()
                    .map(|&y| {
                        let (b, g) = d.cdf_below_and_pmf(y);
                        (b, g, d.ln_pmf(y))
                    })
                    .collect();
                for i in 0..n {
                    let (b, g, lg) = tab[self.y_code[i]];
                    self.prop.below[i] = b;
                    self.prop.g[i] = g;
                    self.prop.ln_g[i] = lg;
                }
            }
            MarginalParams::NegBinom { .. } => {
                for i in 0..n {
                    let d: CountDist = marginal.dist(self.data.covariates.row(i)).ok()?;
                    let y = self.data.counts[i];
                    let (b, g) = d.cdf_below_and_pmf(y);
                    self.prop.below[i] = b;
                    self.prop.g[i] = g;
                    self.prop.ln_g[i] = d.ln_pmf(y);
                }
            }
        }
        for i in 0..n {
            let u = self.prop.below[i] + (1.0 - self.st.o[i]) * self.prop.g[i];
            self.prop.pts[i] = fam.prepare(u);
        }
        let mut ll = 0.0;
        for i in 0..n {
            ll += self.prop.ln_g[i];
            if i >= 1 {
                let j = self.nbr[i][self.st.ell[i] as usize];
                let v = self.par[i].ln_density_at(&self.prop.pts[i], &self.prop.pts[j]);
                self.prop.lc[i] = v;
                ll += v;
            }
        }
        if !with_data {
            return Some(0.0);
        }
        if ll.is_nan() {
            None
        } else {
            Some(ll)
        }
    }

    fn current_data_ll(&self) -> f64 {
        self.cur.ln_g.iter().sum::<f64>() + self.cur.lc.iter().skip(1).sum::<f64>()
    }

    #[inline]
    fn mean_at(&self, i: usize) -> f64 {
        let g = &self.st.gamma;
        g[0] + g[1] * self.loc[i].x + g[2] * self.loc[i].y
    }

    pub(super) fn run(&mut self) -> Result<PosteriorSamples> {
        let cfg = self.config.clone();
        let mut samples = Vec::with_capacity(cfg.n_samples());
        for it in 1..=cfg.n_iter {
            let post = it > cfg.burnin;
            let adapt = cfg.adapt && !post;
            self.sweep(post, adapt.then_some(it))?;
            if post && (it - cfg.burnin).is_multiple_of(cfg.thin) {
                let mut s = self.st.clone();
                if !cfg.store_configuration {
                    s.t = Vec::new();
                    s.ell = Vec::new();
                }
                samples.push(s);
            }
        }
        let mut acceptance = AcceptanceRates::new();
        let c = &self.counts;
        for (name, ctr) in [
            ("o", c.o),
            ("lambda", c.lambda),
            ("beta", c.beta),
            ("r", c.r),
            ("phi", c.phi),
            ("zeta", c.zeta),
        ] {
            if let Some(r) = ctr.rate() {
                acceptance.insert(name.to_string(), r);
            }
        }
        Ok(PosteriorSamples {
            spec: self.spec,
            priors: self.priors.clone(),
            config: cfg,
            samples,
            acceptance,
            final_steps: self.steps,
            last_state: self.st.clone(),
        })
    }

    fn sweep(&mut self, post: bool, adapt_iter: Option<usize>) -> Result<()> {
        let m = self.config.updates;
        if m.t_ell {
            self.update_t_ell()?;
        }
        if m.o {
            self.update_o(post);
        }
        if m.gamma {
            self.update_gamma();
        }
        if m.kappa2 {
            self.update_kappa2();
        }
        if m.marginal {
            match self.st.marginal.family() {
                MarginalFamily::Poisson => {
                    let a = self.update_lambda();
                    self.counts.lambda.record(a, post);
                    self.adapt(adapt_iter, a, |s| &mut s.lambda);
                }
                MarginalFamily::NegBinom => {
                    let a = self.update_beta();
                    self.counts.beta.record(a, post);
                    self.adapt(adapt_iter, a, |s| &mut s.beta);
                    let a = self.update_r();
                    self.counts.r.record(a, post);
                    self.adapt(adapt_iter, a, |s| &mut s.r);
                }
            }
        }
        if m.phi {
            let a = self.update_phi();
            self.counts.phi.record(a, post);
            self.adapt(adapt_iter, a, |s| &mut s.phi);
        }
        if m.zeta {
            let a = self.update_zeta();
            self.counts.zeta.record(a, post);
            self.adapt(adapt_iter, a, |s| &mut s.zeta);
        }
        Ok(())
    }

    /// Robbins–Monro step on the log of a proposal scale.
    fn adapt<F: Fn(&mut StepSizes) -> &mut f64>(&mut self, iter: Option<usize>, accepted: bool, field: F) {
        if let Some(k) = iter {
            let gain = (k as f64).powf(-0.6);
            let target = self.config.target_acceptance;
            let s = field(&mut self.steps);
            let delta = gain * (accepted as u8 as f64 - target);
            *s = (*s * delta.exp()).clamp(1e-4, 10.0);
        }
    }

    /// Exact joint draw of `(t_i, ℓ_i)`: `ℓ_i ∝ w_l c*_l`, then `t_i` from the
    /// normal truncated to the chosen interval.
    fn update_t_ell(&mut self) -> Result<()> {
        let kappa = self.st.kappa2.sqrt();
        let prior_only = self.config.prior_only;
        for i in 2..self.n {
            let k = self.nbr[i].len();
            let mu = self.mean_at(i);
            if k == 1 {
                self.st.t[i] = mu + kappa * normal_step(&mut self.rng);
                continue;
            }
            // One tail probability per cutoff: Φ(s) below zero, 1 - Φ(s) above,
            // so every interval mass is a cancellation-free combination.
            self.tails.clear();
            for &r in &self.rstar[i] {
                let s = (r - mu) / kappa;
                self.tails.push(if s < 0.0 { norm_cdf(s) } else { norm_sf(s) });
            }
            self.scratch.clear();
            self.lcs.clear();
            for l in 0..k {
                let (a, b) = (self.rstar[i][l], self.rstar[i][l + 1]);
                let (ta, tb) = (self.tails[l], self.tails[l + 1]);
                let p = if a >= mu {
                    ta - tb
                } else if b <= mu {
                    tb - ta
                } else {
                    1.0 - ta - tb
                };
                let c = self.pars[i][l].ln_density_at(&self.cur.pts[i], &self.cur.pts[self.nbr[i][l]]);
                self.lcs.push(c);
                let lw = p.max(0.0).ln();
                self.scratch.push(if prior_only { lw } else { lw + c });
            }
            let l = sample_log_categorical(&mut self.rng, &self.scratch)
                .ok_or_else(|| Error::numerical(format!("component weights at site {i} are degenerate")))?;
            let (lo, hi) = (self.rstar[i][l], self.rstar[i][l + 1]);
            self.st.t[i] = sample_truncated_normal(&mut self.rng, mu, kappa, lo, hi);
            let old = self.st.ell[i] as usize;
            if l != old {
                let pa = self.nbr[i][old];
                if let Some(pos) = self.children[pa].iter().position(|&c| c == i) {
                    self.children[pa].swap_remove(pos);
                }
                self.children[self.nbr[i][l]].push(i);
                self.st.ell[i] = l as u32;
                self.par[i] = self.pars[i][l];
            }
            self.cur.lc[i] = self.lcs[l];
        }
        Ok(())
    }

    /// Independence Metropolis for each jitter with a uniform proposal; the
    /// target is the site's own copula term plus the terms of the sites that
    /// currently use it as their component neighbor.
    fn update_o(&mut self, post: bool) {
        let fam = self.spec.copula;
        let prior_only = self.config.prior_only;
        let mut child_new: Vec<f64> = Vec::new();
        for i in 0..self.n {
            let o_new = open01(&mut self.rng);
            let p_new = fam.prepare(self.cur.below[i] + (1.0 - o_new) * self.cur.g[i]);
            let mut delta = 0.0;
            let own = if i >= 1 {
                let j = self.nbr[i][self.st.ell[i] as usize];
                let v = self.par[i].ln_density_at(&p_new, &self.cur.pts[j]);
                delta += v - self.cur.lc[i];
                v
            } else {
                0.0
            };
            child_new.clear();
            for &c in &self.children[i] {
                let v = self.par[c].ln_density_at(&self.cur.pts[c], &p_new);
                delta += v - self.cur.lc[c];
                child_new.push(v);
            }
            let accept = prior_only || {
                let u: f64 = open01(&mut self.rng);
                !delta.is_nan() && u.ln() < delta
            };
            self.counts.o.record(accept, post);
            if accept {
                self.st.o[i] = o_new;
                self.cur.pts[i] = p_new;
                if i >= 1 {
                    self.cur.lc[i] = own;
                }
                for (k, &c) in self.children[i].iter().enumerate() {
                    self.cur.lc[c] = child_new[k];
                }
            }
        }
    }

    fn update_gamma(&mut self) {
        let inv_k2 = 1.0 / self.st.kappa2;
        let mut b = Vector3::zeros();
        for i in 2..self.n {
            b += Vector3::new(1.0, self.loc[i].x, self.loc[i].y) * self.st.t[i];
        }
        let prec = self.gamma_prec + self.dtd * inv_k2;
        let ch = Cholesky::new(prec).expect("posterior precision is positive definite");
        let mean = ch.solve(&(self.gamma_prec_mean + b * inv_k2));
        let z = Vector3::new(
            normal_step(&mut self.rng),
            normal_step(&mut self.rng),
            normal_step(&mut self.rng),
        );
        let lt = ch.l().transpose();
        let dev = lt.solve_upper_triangular(&z).expect("nonsingular factor");
        let g = mean + dev;
        self.st.gamma = [g[0], g[1], g[2]];
    }

    fn update_kappa2(&mut self) {
        let m = self.n.saturating_sub(2) as f64;
        let mut ss = 0.0;
        for i in 2..self.n {
            let e = self.st.t[i] - self.mean_at(i);
            ss += e * e;
        }
        let pr = self.priors.kappa2;
        self.st.kappa2 = sample_inverse_gamma(&mut self.rng, pr.shape + 0.5 * m, pr.scale + 0.5 * ss);
    }

    /// Metropolis decision for a marginal proposal already filled into `prop`.
    fn accept_marginal(&mut self, new: MarginalParams, ll_new: Option<f64>, ln_ratio_rest: f64) -> bool {
        let Some(ll_new) = ll_new else { return false };
        let data_part = if self.config.prior_only {
            0.0
        } else {
            ll_new - self.current_data_ll()
        };
        let ln_a = data_part + ln_ratio_rest;
        let u: f64 = open01(&mut self.rng);
        if ln_a.is_nan() || u.ln() >= ln_a {
            return false;
        }
        self.st.marginal = new;
        std::mem::swap(&mut self.cur, &mut self.prop);
        true
    }

    fn update_lambda(&mut self) -> bool {
        let MarginalParams::Poisson { lambda } = self.st.marginal else {
            unreachable!()
        };
        let step = self.steps.lambda * normal_step(&mut self.rng);
        let lambda_new = lambda * step.exp();
        let Ok(new) = MarginalParams::poisson(lambda_new) else {
            return false;
        };
        let pr = self.priors.lambda;
        // log-scale walk: Jacobian adds ln λ' - ln λ = step.
        let rest = pr.ln_pdf_unnorm(lambda_new) - pr.ln_pdf_unnorm(lambda) + step;
        let ll = self.fill_marginal(&new, !self.config.prior_only);
        self.accept_marginal(new, ll, rest)
    }

    fn ln_beta_prior(&self, beta: &[f64]) -> f64 {
        let d = DVector::from_column_slice(beta) - &self.beta_mean;
        -0.5 * (d.transpose() * &self.beta_prec * &d)[(0, 0)]
    }

    fn update_beta(&mut self) -> bool {
        let MarginalParams::NegBinom { beta, r } = self.st.marginal.clone() else {
            unreachable!()
        };
        let p = beta.len();
        let z = DVector::from_iterator(p, (0..p).map(|_| normal_step(&mut self.rng)));
        let step = &self.beta_chol * z * self.steps.beta;
        let beta_new: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
        let Ok(new) = MarginalParams::negbinom(beta_new.clone(), r) else {
            return false;
        };
        let rest = self.ln_beta_prior(&beta_new) - self.ln_beta_prior(&beta);
        let ll = self.fill_marginal(&new, !self.config.prior_only);
        self.accept_marginal(new, ll, rest)
    }

    fn update_r(&mut self) -> bool {
        let MarginalParams::NegBinom { beta, r } = self.st.marginal.clone() else {
            unreachable!()
        };
        let step = self.steps.r * normal_step(&mut self.rng);
        let r_new = r * step.exp();
        let Ok(new) = MarginalParams::negbinom(beta, r_new) else {
            return false;
        };
        let pr = self.priors.r;
        let rest = pr.ln_pdf_unnorm(r_new) - pr.ln_pdf_unnorm(r) + step;
        let ll = self.fill_marginal(&new, !self.config.prior_only);
        self.accept_marginal(new, ll, rest)
    }

    /// Log-scale walk on `φ`; only the copula terms change.
    fn update_phi(&mut self) -> bool {
        let phi = self.st.phi;
        let step = self.steps.phi * normal_step(&mut self.rng);
        let phi_new = phi * step.exp();
        if !(phi_new > 0.0 && phi_new.is_finite()) {
            return false;
        }
        let pr = self.priors.phi;
        let mut ln_a = pr.ln_pdf_unnorm(phi_new) - pr.ln_pdf_unnorm(phi) + step;
        let mut sum_new = 0.0;
        let mut sum_old = 0.0;
        for i in 1..self.n {
            let l = self.st.ell[i] as usize;
            let v = self
                .param(i, l, phi_new)
                .ln_density_at(&self.cur.pts[i], &self.cur.pts[self.nbr[i][l]]);
            self.prop.lc[i] = v;
            sum_new += v;
            sum_old += self.cur.lc[i];
        }
        if !self.config.prior_only {
            ln_a += sum_new - sum_old;
        }
        let u: f64 = open01(&mut self.rng);
        if ln_a.is_nan() || u.ln() >= ln_a {
            return false;
        }
        self.st.phi = phi_new;
        self.refresh_pars();
        for i in 1..self.n {
            self.cur.lc[i] = self.prop.lc[i];
            self.par[i] = self.pars[i][self.st.ell[i] as usize];
        }
        true
    }

    /// Log-scale walk on `ζ`. Given `t` and `ℓ`, `ζ` enters only through the
    /// constraint that every `t_i` stays inside its component's interval.
    fn update_zeta(&mut self) -> bool {
        let zeta = self.st.zeta;
        let step = self.steps.zeta * normal_step(&mut self.rng);
        let zeta_new = zeta * step.exp();
        if !(zeta_new > 0.0 && zeta_new.is_finite()) {
            return false;
        }
        let pr = self.priors.zeta;
        let ln_a = pr.ln_pdf_unnorm(zeta_new) - pr.ln_pdf_unnorm(zeta) + step;
        let u: f64 = open01(&mut self.rng);
        if ln_a.is_nan() || u.ln() >= ln_a {
            return false;
        }
        for i in 2..self.n {
            if self.nbr[i].len() < 2 {
                continue;
            }
            let r = &mut self.rstar_prop[i];
            cutoffs_into(&self.dist[i], zeta_new, &mut self.scratch_r, r);
            let l = self.st.ell[i] as usize;
            let t = self.st.t[i];
            if !(r[l] < t && t < r[l + 1]) {
                return false;
            }
        }
        self.st.zeta = zeta_new;
        std::mem::swap(&mut self.rstar, &mut self.rstar_prop);
        true
    }
}

/// Cholesky factor of the inverse of `Σ x xᵀ μ/(1 + μ/r) + P`, the negative
/// binomial GLM information at `(β, r)` plus the prior precision.
fn glm_proposal_factor(data: &ReferenceData, beta: &[f64], r: f64, prior_prec: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = beta.len();
    let mut info = prior_prec.clone();
    for i in 0..data.len() {
        let x = data.covariates.row(i);
        let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = eta.exp().min(1e12);
        let w = mu / (1.0 + mu / r);
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::numerical("GLM information matrix is singular"))?;
    let cov = (&cov + cov.transpose()) * 0.5;
    Cholesky::new(cov)
        .map(|c| c.l())
        .ok_or_else(|| Error::numerical("GLM proposal covariance is not positive definite"))
}
