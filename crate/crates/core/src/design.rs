//! Design specification: hypotheses, error targets, interim schedule, prior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{OutcomeProbabilities, PriorHyperparameters};

/// One scheduled analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Look {
    /// Cumulative sample size at the analysis.
    pub n: usize,
    #[serde(default = "yes")]
    pub check_efficacy: bool,
    #[serde(default = "yes")]
    pub check_toxicity: bool,
}

fn yes() -> bool {
    true
}

impl Look {
    pub fn both(n: usize) -> Self {
        Look { n, check_efficacy: true, check_toxicity: true }
    }

    pub fn efficacy_only(n: usize) -> Self {
        Look { n, check_efficacy: true, check_toxicity: false }
    }

    pub fn toxicity_only(n: usize) -> Self {
        Look { n, check_efficacy: false, check_toxicity: true }
    }
}

/// Merge separate efficacy and toxicity look lists into one schedule.
pub fn merge_schedule(efficacy_looks: &[usize], toxicity_looks: &[usize]) -> Vec<Look> {
    let mut ns: Vec<usize> = efficacy_looks.iter().chain(toxicity_looks).copied().collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| Look { n, check_efficacy: efficacy_looks.contains(&n), check_toxicity: toxicity_looks.contains(&n) })
        .collect()
}

/// Upper limits on the three type I errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTargets {
    /// Futile and toxic.
    pub alpha00: f64,
    /// Futile but safe.
    pub alpha01: f64,
    /// Efficacious but toxic.
    pub alpha10: f64,
}

impl AlphaTargets {
    pub fn new(alpha00: f64, alpha01: f64, alpha10: f64) -> Self {
        AlphaTargets { alpha00, alpha01, alpha10 }
    }
}

/// Where the default prior puts its marginal means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorConvention {
    /// Marginal means at the unacceptable rates `(ηE*, ηT*)`.
    #[default]
    NullCentered,
    /// Marginal means at the target rates `(ηE, ηT)`.
    AlternativeCentered,
}

/// Either a named convention (effective sample size one) or explicit τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorChoice {
    Convention(PriorConvention),
    Explicit(PriorHyperparameters),
}

impl Default for PriorChoice {
    fn default() -> Self {
        PriorChoice::Convention(PriorConvention::NullCentered)
    }
}

fn default_attenuation() -> f64 {
    3.0
}

fn default_phi() -> f64 {
    1.0
}

/// Full description of a single-arm design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Target response rate ηE.
    pub eta_e: f64,
    /// Unacceptable response rate ηE*.
    pub eta_e_null: f64,
    /// Desirable toxicity rate ηT.
    pub eta_t: f64,
    /// Unacceptable toxicity rate ηT*.
    pub eta_t_null: f64,
    pub alpha_targets: AlphaTargets,
    pub schedule: Vec<Look>,
    #[serde(default)]
    pub prior: PriorChoice,
    /// Divisor applied to γ in the toxicity cutoff.
    #[serde(default = "default_attenuation")]
    pub attenuation: f64,
    /// Odds ratio assumed when evaluating error rates at design time.
    #[serde(default = "default_phi")]
    pub design_phi: f64,
}

impl DesignSpec {
    /// A spec with default prior, attenuation 3 and `φ = 1`.
    pub fn new(
        eta_e: f64,
        eta_e_null: f64,
        eta_t: f64,
        eta_t_null: f64,
        alpha_targets: AlphaTargets,
        schedule: Vec<Look>,
    ) -> Self {
        DesignSpec {
            eta_e,
            eta_e_null,
            eta_t,
            eta_t_null,
            alpha_targets,
            schedule,
            prior: PriorChoice::default(),
            attenuation: default_attenuation(),
            design_phi: default_phi(),
        }
    }

    pub fn with_prior(mut self, prior: PriorChoice) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_attenuation(mut self, attenuation: f64) -> Self {
        self.attenuation = attenuation;
        self
    }

    pub fn with_design_phi(mut self, phi: f64) -> Self {
        self.design_phi = phi;
        self
    }

    pub fn max_n(&self) -> usize {
        self.schedule.last().map_or(0, |l| l.n)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |field: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} must lie strictly between 0 and 1")))
            }
        };
        open_unit("eta_e", self.eta_e)?;
        open_unit("eta_e_null", self.eta_e_null)?;
        open_unit("eta_t", self.eta_t)?;
        open_unit("eta_t_null", self.eta_t_null)?;
        if self.eta_e_null >= self.eta_e {
            return Err(Error::config(
                "eta_e_null",
                format!("unacceptable response rate {} must be below target {}", self.eta_e_null, self.eta_e),
            ));
        }
        if self.eta_t >= self.eta_t_null {
            return Err(Error::config(
                "eta_t",
                format!("desirable toxicity rate {} must be below unacceptable {}", self.eta_t, self.eta_t_null),
            ));
        }
        open_unit("alpha_targets.alpha00", self.alpha_targets.alpha00)?;
        open_unit("alpha_targets.alpha01", self.alpha_targets.alpha01)?;
        open_unit("alpha_targets.alpha10", self.alpha_targets.alpha10)?;

        if self.schedule.is_empty() {
            return Err(Error::config("schedule", "at least one look is required"));
        }
        let mut prev = 0;
        for (i, look) in self.schedule.iter().enumerate() {
            if look.n <= prev {
                return Err(Error::config(
                    format!("schedule[{i}].n"),
                    "sample sizes must be positive and strictly increasing",
                ));
            }
            if !look.check_efficacy && !look.check_toxicity {
                return Err(Error::config(format!("schedule[{i}]"), "look monitors neither endpoint"));
            }
            prev = look.n;
        }
        let last = self.schedule.last().expect("non-empty");
        if !(last.check_efficacy && last.check_toxicity) {
            return Err(Error::config("schedule", "the final look must monitor both endpoints"));
        }
        if !(self.attenuation > 0.0 && self.attenuation.is_finite()) {
            return Err(Error::config("attenuation", "must be positive"));
        }
        if !(self.design_phi > 0.0 && self.design_phi.is_finite()) {
            return Err(Error::config("design_phi", "must be positive"));
        }
        let prior = self.prior_hyperparameters();
        prior.validate()?;
        let (te, tt, total) = (prior.tau_e(), prior.tau_t(), prior.total());
        if !(te > 0.0 && te < total && tt > 0.0 && tt < total) {
            return Err(Error::config(
                "prior",
                "marginal prior masses tau_e and tau_t must lie strictly inside (0, sum tau)",
            ));
        }
        Ok(())
    }

    pub fn prior_hyperparameters(&self) -> PriorHyperparameters {
        match self.prior {
            PriorChoice::Convention(PriorConvention::NullCentered) => {
                PriorHyperparameters::centered(self.eta_e_null, self.eta_t_null, 1.0)
            }
            PriorChoice::Convention(PriorConvention::AlternativeCentered) => {
                PriorHyperparameters::centered(self.eta_e, self.eta_t, 1.0)
            }
            PriorChoice::Explicit(p) => p,
        }
    }

    /// `(πE, πT)` under one of the four hypotheses.
    pub fn hypothesis_point(&self, h: Hypothesis) -> (f64, f64) {
        match h {
            Hypothesis::H00 => (self.eta_e_null, self.eta_t_null),
            Hypothesis::H01 => (self.eta_e_null, self.eta_t),
            Hypothesis::H10 => (self.eta_e, self.eta_t_null),
            Hypothesis::H11 => (self.eta_e, self.eta_t),
        }
    }

    /// Joint outcome distribution under `h` with odds ratio `phi`.
    pub fn hypothesis_outcome(&self, h: Hypothesis, phi: f64) -> Result<OutcomeProbabilities> {
        let (pe, pt) = self.hypothesis_point(h);
        OutcomeProbabilities::with_odds_ratio(pe, pt, phi)
    }
}

/// The four corner hypotheses. The first digit is efficacy, the second
/// safety: `H01` is futile but safe, `H10` efficacious but toxic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H00,
    H01,
    H10,
    H11,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 4] = [Hypothesis::H00, Hypothesis::H01, Hypothesis::H10, Hypothesis::H11];

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::H00 => "H00",
            Hypothesis::H01 => "H01",
            Hypothesis::H10 => "H10",
            Hypothesis::H11 => "H11",
        }
    }
}

/// One value per hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerHypothesis<T> {
    pub h00: T,
    pub h01: T,
    pub h10: T,
    pub h11: T,
}

impl<T> PerHypothesis<T> {
    pub fn from_fn(mut f: impl FnMut(Hypothesis) -> T) -> Self {
        PerHypothesis {
            h00: f(Hypothesis::H00),
            h01: f(Hypothesis::H01),
            h10: f(Hypothesis::H10),
            h11: f(Hypothesis::H11),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(Hypothesis) -> std::result::Result<T, E>) -> std::result::Result<Self, E> {
        Ok(PerHypothesis {
            h00: f(Hypothesis::H00)?,
            h01: f(Hypothesis::H01)?,
            h10: f(Hypothesis::H10)?,
            h11: f(Hypothesis::H11)?,
        })
    }

    pub fn get(&self, h: Hypothesis) -> &T {
        match h {
            Hypothesis::H00 => &self.h00,
            Hypothesis::H01 => &self.h01,
            Hypothesis::H10 => &self.h10,
            Hypothesis::H11 => &self.h11,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerHypothesis<U> {
        PerHypothesis { h00: f(&self.h00), h01: f(&self.h01), h10: f(&self.h10), h11: f(&self.h11) }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Hypothesis, &T)> {
        Hypothesis::ALL.into_iter().map(move |h| (h, self.get(h)))
    }
}

/// Decision variables `(λE, λT, γ)` of the cutoff functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffParameters {
    pub lambda_e: f64,
    pub lambda_t: f64,
    pub gamma: f64,
}

impl CutoffParameters {
    pub fn new(lambda_e: f64, lambda_t: f64, gamma: f64) -> Result<Self> {
        let q = CutoffParameters { lambda_e, lambda_t, gamma };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("lambda_e", self.lambda_e), ("lambda_t", self.lambda_t), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("{v} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}
