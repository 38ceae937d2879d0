use std::path::Path;

use crate::error::{Error, Result};
use crate::prior::PriorConfig;

/// Tuning parameters of the stochastic variational fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SviConfig {
    /// Latent dimension.
    pub d: usize,
    /// Fractional likelihood power.
    pub alpha: f64,
    /// Fraction of snapshots sampled per iteration.
    pub gamma_m: f64,
    /// Non-edges sampled per edge.
    pub gamma_n: f64,
    /// Step-size decay exponent and delay.
    pub kappa: f64,
    pub tau_step: f64,
    pub max_iter: usize,
    /// Relative tolerance on the change of windowed log-likelihood medians.
    pub tol: f64,
    pub window: usize,
    /// Interior knot count; `None` picks `⌈(nM)^{1/5}⌉`.
    pub knots: Option<usize>,
    pub degree: usize,
    /// Walk order per covariate (missing entries default to 1).
    pub orders: Vec<usize>,
    pub seed: u64,
    pub self_loops: bool,
    /// Probability clip range used by the spectral initializer.
    pub usvt_clip: (f64, f64),
}

impl Default for SviConfig {
    fn default() -> Self {
        SviConfig {
            d: 6,
            alpha: 0.95,
            gamma_m: 0.25,
            gamma_n: 2.0,
            kappa: 0.75,
            tau_step: 1.0,
            max_iter: 250,
            tol: 1e-3,
            window: 20,
            knots: None,
            degree: 3,
            orders: Vec::new(),
            seed: 0,
            self_loops: false,
            usvt_clip: (0.01, 0.5),
        }
    }
}

impl SviConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if self.d == 0 {
            return fail("latent dimension d must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.gamma_m > 0.0 && self.gamma_m <= 1.0) {
            return fail(format!("gamma_m must lie in (0, 1], got {}", self.gamma_m));
        }
        if !(self.gamma_n >= 1.0) || !self.gamma_n.is_finite() {
            return fail(format!("gamma_n must be at least 1, got {}", self.gamma_n));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return fail(format!("kappa must lie in (0.5, 1], got {}", self.kappa));
        }
        if !(self.tau_step > 0.0) || !self.tau_step.is_finite() {
            return fail(format!("tau_step must be positive, got {}", self.tau_step));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be positive".into());
        }
        if !(self.tol >= 0.0) {
            return fail(format!("tol must be nonnegative, got {}", self.tol));
        }
        if self.window == 0 {
            return fail("window must be positive".into());
        }
        if self.degree == 0 {
            return fail("degree must be positive".into());
        }
        let (lo, hi) = self.usvt_clip;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return fail(format!("usvt_clip must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"));
        }
        Ok(())
    }

    pub fn prior(&self) -> PriorConfig {
        PriorConfig {
            orders: self.orders.clone(),
            ..PriorConfig::default()
        }
    }

    /// Parse `key=value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SviConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key=value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("config line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse::<T>().map_err(|_| format!("cannot parse `{v}` for `{key}`"))
        }
        match key {
            "d" => self.d = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "gamma_m" => self.gamma_m = num(key, value)?,
            "gamma_n" => self.gamma_n = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "tau_step" => self.tau_step = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "knots" => {
                self.knots = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "degree" => self.degree = num(key, value)?,
            "orders" => {
                self.orders = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|v| num::<usize>(key, v.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "seed" => self.seed = num(key, value)?,
            "self_loops" => self.self_loops = num(key, value)?,
            "usvt_clip" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| format!("`usvt_clip` expects lo,hi, got `{value}`"))?;
                self.usvt_clip = (num(key, lo.trim())?, num(key, hi.trim())?);
            }
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// `key=value` lines that [`SviConfig::parse`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let knots = self.knots.map_or("auto".to_string(), |k| k.to_string());
        let orders: Vec<String> = self.orders.iter().map(|r| r.to_string()).collect();
        format!(
            "d={}\nalpha={}\ngamma_m={}\ngamma_n={}\nkappa={}\ntau_step={}\nmax_iter={}\ntol={}\nwindow={}\nknots={}\ndegree={}\norders={}\nseed={}\nself_loops={}\nusvt_clip={},{}\n",
            self.d,
            self.alpha,
            self.gamma_m,
            self.gamma_n,
            self.kappa,
            self.tau_step,
            self.max_iter,
            self.tol,
            self.window,
            knots,
            self.degree,
            orders.join(","),
            self.seed,
            self.self_loops,
            self.usvt_clip.0,
            self.usvt_clip.1
        )
    }
}
