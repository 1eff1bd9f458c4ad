//! Posterior-probability cutoffs, the integer stopping boundaries they imply,
//! and go/no-go evaluation of interim data.
//!
//! At a look with `n` patients the trial continues only if
//! `Pr(πE > ηE* | data) > CE(n)` and `Pr(πT ≤ ηT* | data) > CT(n)`, where
//! `CE(n) = λE (n/N)^γ` and `CT(n) = λT (n/N)^(γ/attenuation)`. Both posterior
//! probabilities are monotone in the observed count, so each rule collapses to
//! an integer threshold fixed before the trial starts.

use serde::{Deserialize, Serialize};

use crate::design::{CutoffParameters, DesignSpec};
use crate::error::{Error, Result};
use crate::prob::{beta_posterior_tail, TailDirection};

/// Posterior probabilities within this distance of a cutoff count as equal
/// to it, which resolves to a stop.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `λE (n/N)^γ`
pub fn cutoff_efficacy(n: usize, max_n: usize, q: &CutoffParameters) -> f64 {
    q.lambda_e * (n as f64 / max_n as f64).powf(q.gamma)
}

/// `λT (n/N)^(γ/attenuation)`
pub fn cutoff_toxicity(n: usize, max_n: usize, q: &CutoffParameters, attenuation: f64) -> f64 {
    q.lambda_t * (n as f64 / max_n as f64).powf(q.gamma / attenuation)
}

/// Thresholds at one look. `l_e`: stop if responses ≤ `l_e`. `l_t`: stop if
/// toxicities ≥ `l_t`. `None` means the endpoint is not checked at this look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LookBoundary {
    pub n: usize,
    pub l_e: Option<i64>,
    pub l_t: Option<i64>,
}

impl LookBoundary {
    /// `l_e`, with an unchecked endpoint mapped to the non-binding value −1.
    pub fn futility_bound(&self) -> i64 {
        self.l_e.unwrap_or(-1)
    }

    /// `l_t`, with an unchecked endpoint mapped to the non-binding value n+1.
    pub fn toxicity_bound(&self) -> i64 {
        self.l_t.unwrap_or(self.n as i64 + 1)
    }

    /// Whether cumulative counts `(s_e, s_t)` pass this look.
    pub fn passes(&self, s_e: usize, s_t: usize) -> bool {
        (s_e as i64) > self.futility_bound() && (s_t as i64) < self.toxicity_bound()
    }
}

/// Per-look integer boundaries for a whole design.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoppingBoundaries {
    pub looks: Vec<LookBoundary>,
}

impl StoppingBoundaries {
    pub fn new(looks: Vec<LookBoundary>) -> Result<Self> {
        let b = StoppingBoundaries { looks };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.looks.is_empty() {
            return Err(Error::config("boundaries", "no looks"));
        }
        let mut prev_n = 0;
        for (i, look) in self.looks.iter().enumerate() {
            if look.n <= prev_n {
                return Err(Error::config(format!("boundaries[{i}].n"), "must be strictly increasing"));
            }
            prev_n = look.n;
            if let Some(le) = look.l_e {
                if le < -1 || le > look.n as i64 {
                    return Err(Error::config(
                        format!("boundaries[{i}].l_e"),
                        format!("{le} outside [-1, {}]", look.n),
                    ));
                }
            }
            if let Some(lt) = look.l_t {
                if lt < 0 || lt > look.n as i64 + 1 {
                    return Err(Error::config(
                        format!("boundaries[{i}].l_t"),
                        format!("{lt} outside [0, {}]", look.n + 1),
                    ));
                }
            }
        }
        let last = self.looks.last().expect("non-empty");
        if last.l_e.is_none() || last.l_t.is_none() {
            return Err(Error::config("boundaries", "the final look must bound both endpoints"));
        }
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        self.looks.last().map_or(0, |l| l.n)
    }

    pub fn look_at(&self, n: usize) -> Option<(usize, &LookBoundary)> {
        self.looks.iter().enumerate().find(|(_, l)| l.n == n)
    }

    /// Futility bounds at looks where efficacy is checked, in order.
    pub fn efficacy_bounds(&self) -> Vec<i64> {
        self.looks.iter().filter_map(|l| l.l_e).collect()
    }

    /// Toxicity bounds at looks where toxicity is checked, in order.
    pub fn toxicity_bounds(&self) -> Vec<i64> {
        self.looks.iter().filter_map(|l| l.l_t).collect()
    }
}

/// Posterior tail tables for every look of a design, reused across many
/// cutoff parameter values.
#[derive(Debug, Clone)]
pub struct BoundaryDeriver {
    looks: Vec<crate::design::Look>,
    max_n: usize,
    attenuation: f64,
    /// `Pr(πE > ηE* | n, x)` for `x = 0..=n`.
    efficacy_tail: Vec<Vec<f64>>,
    /// `Pr(πT ≤ ηT* | n, y)` for `y = 0..=n`.
    safety_tail: Vec<Vec<f64>>,
}

impl BoundaryDeriver {
    pub fn new(spec: &DesignSpec) -> Result<Self> {
        spec.validate()?;
        let prior = spec.prior_hyperparameters();
        let (tau_e, tau_t, total) = (prior.tau_e(), prior.tau_t(), prior.total());
        let mut efficacy_tail = Vec::with_capacity(spec.schedule.len());
        let mut safety_tail = Vec::with_capacity(spec.schedule.len());
        for look in &spec.schedule {
            let n = look.n;
            efficacy_tail.push(
                (0..=n)
                    .map(|x| beta_posterior_tail(x, n, tau_e, total, spec.eta_e_null, TailDirection::Above))
                    .collect::<Result<Vec<_>>>()?,
            );
            safety_tail.push(
                (0..=n)
                    .map(|y| beta_posterior_tail(y, n, tau_t, total, spec.eta_t_null, TailDirection::AtOrBelow))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(BoundaryDeriver {
            looks: spec.schedule.clone(),
            max_n: spec.max_n(),
            attenuation: spec.attenuation,
            efficacy_tail,
            safety_tail,
        })
    }

    pub fn derive(&self, q: &CutoffParameters) -> StoppingBoundaries {
        let mut looks = Vec::with_capacity(self.looks.len());
        let mut run_e: Option<i64> = None;
        let mut run_t: Option<i64> = None;
        for (i, look) in self.looks.iter().enumerate() {
            let l_e = look.check_efficacy.then(|| {
                let c = cutoff_efficacy(look.n, self.max_n, q);
                let raw = self.efficacy_tail[i].iter().rposition(|&p| p <= c + TIE_TOLERANCE).map_or(-1, |x| x as i64);
                let bound = run_e.map_or(raw, |prev| raw.max(prev)).min(look.n as i64);
                run_e = Some(bound);
                bound
            });
            let l_t = look.check_toxicity.then(|| {
                let c = cutoff_toxicity(look.n, self.max_n, q, self.attenuation);
                let raw = self.safety_tail[i]
                    .iter()
                    .position(|&p| p <= c + TIE_TOLERANCE)
                    .map_or(look.n as i64 + 1, |y| y as i64);
                let bound = run_t.map_or(raw, |prev| raw.max(prev)).min(look.n as i64 + 1);
                run_t = Some(bound);
                bound
            });
            looks.push(LookBoundary { n: look.n, l_e, l_t });
        }
        StoppingBoundaries { looks }
    }
}

/// Integer stopping boundaries implied by cutoff parameters `q`.
pub fn derive_boundaries(spec: &DesignSpec, q: &CutoffParameters) -> Result<StoppingBoundaries> {
    q.validate()?;
    Ok(BoundaryDeriver::new(spec)?.derive(q))
}

/// Cumulative responses and toxicities observed at an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterimCounts {
    pub n: usize,
    pub x_e: usize,
    pub x_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "go")]
    Go,
    #[serde(rename = "no-go")]
    NoGo,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Go => "go",
            Decision::NoGo => "no-go",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Futility,
    Toxicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub n: usize,
    pub x_e: usize,
    pub x_t: usize,
    pub decision: Decision,
    pub reasons: Vec<StopReason>,
    /// `Pr(πE > ηE* | data)`
    pub posterior_prob_eff: f64,
    /// `Pr(πT ≤ ηT* | data)`
    pub posterior_prob_tox: f64,
    /// Cutoff in force for efficacy, when efficacy is checked and the
    /// boundaries came from cutoff parameters.
    pub cutoff_eff: Option<f64>,
    pub cutoff_tox: Option<f64>,
    pub l_e: Option<i64>,
    pub l_t: Option<i64>,
    pub final_look: bool,
}

/// Go/no-go for cumulative counts observed at a scheduled look.
///
/// `q` supplies the cutoff values reported alongside the decision; the
/// decision itself depends only on `boundaries`.
pub fn interim_decision(
    spec: &DesignSpec,
    boundaries: &StoppingBoundaries,
    q: Option<&CutoffParameters>,
    data: InterimCounts,
) -> Result<DecisionRecord> {
    let (idx, look) = boundaries.look_at(data.n).ok_or(Error::NotALook(data.n))?;
    if data.x_e > data.n || data.x_t > data.n {
        return Err(Error::domain(format!("counts ({}, {}) exceed the sample size {}", data.x_e, data.x_t, data.n)));
    }
    let prior = spec.prior_hyperparameters();
    let posterior_prob_eff =
        beta_posterior_tail(data.x_e, data.n, prior.tau_e(), prior.total(), spec.eta_e_null, TailDirection::Above)?;
    let posterior_prob_tox =
        beta_posterior_tail(data.x_t, data.n, prior.tau_t(), prior.total(), spec.eta_t_null, TailDirection::AtOrBelow)?;

    let mut reasons = Vec::new();
    if look.l_e.is_some_and(|l| data.x_e as i64 <= l) {
        reasons.push(StopReason::Futility);
    }
    if look.l_t.is_some_and(|l| data.x_t as i64 >= l) {
        reasons.push(StopReason::Toxicity);
    }
    let max_n = boundaries.max_n();
    Ok(DecisionRecord {
        n: data.n,
        x_e: data.x_e,
        x_t: data.x_t,
        decision: if reasons.is_empty() { Decision::Go } else { Decision::NoGo },
        reasons,
        posterior_prob_eff,
        posterior_prob_tox,
        cutoff_eff: q.filter(|_| look.l_e.is_some()).map(|q| cutoff_efficacy(data.n, max_n, q)),
        cutoff_tox: q.filter(|_| look.l_t.is_some()).map(|q| cutoff_toxicity(data.n, max_n, q, spec.attenuation)),
        l_e: look.l_e,
        l_t: look.l_t,
        final_look: idx + 1 == boundaries.looks.len(),
    })
}
