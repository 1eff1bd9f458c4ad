//! Protocol text for the statistical section of a trial protocol.
//!
//! Output depends only on the stored spec and result, never on timestamps,
//! so the same document always renders to the same bytes.

use std::fmt::Write;

use bop2te::design::{Hypothesis, PriorChoice, PriorConvention};

use crate::app::{oc_report, OcReport};
use crate::config::OcRequest;
use crate::error::AppError;
use crate::report::{boundary_table, oc_table};
use crate::store::DesignDocument;

pub fn render_protocol(doc: &DesignDocument) -> Result<String, AppError> {
    let result = doc
        .result
        .as_ref()
        .ok_or_else(|| AppError::Conflict(format!("design `{}` has no boundaries to describe", doc.id)))?;
    let spec = &doc.spec;
    let oc: OcReport = oc_report(doc, &OcRequest::default())?;
    let max_n = spec.max_n();
    let prior = spec.prior_hyperparameters();
    let prior_text = match spec.prior {
        PriorChoice::Convention(PriorConvention::NullCentered) => "centred at the unacceptable rates",
        PriorChoice::Convention(PriorConvention::AlternativeCentered) => "centred at the target rates",
        PriorChoice::Explicit(_) => "specified explicitly",
    };
    let efficacy_looks: Vec<String> =
        spec.schedule.iter().filter(|l| l.check_efficacy).map(|l| l.n.to_string()).collect();
    let toxicity_looks: Vec<String> =
        spec.schedule.iter().filter(|l| l.check_toxicity).map(|l| l.n.to_string()).collect();
    let (a00, a01, a10) = result.type_i_errors();

    let mut t = String::new();
    writeln!(t, "STATISTICAL DESIGN: JOINT EFFICACY AND TOXICITY MONITORING").unwrap();
    writeln!(t, "Design reference: {}", doc.id).unwrap();
    writeln!(t, "Specification hash: {}", doc.spec_hash).unwrap();
    writeln!(t).unwrap();

    writeln!(t, "1. Endpoints and hypotheses").unwrap();
    writeln!(
        t,
        "Each patient is classified by a binary response indicator and a binary toxicity indicator. \
The design treats a response rate of {:.2} or lower as unacceptable and targets {:.2}; a toxicity \
rate of {:.2} or higher is unacceptable and {:.2} is desirable.",
        spec.eta_e_null, spec.eta_e, spec.eta_t_null, spec.eta_t
    )
    .unwrap();
    writeln!(
        t,
        "The treatment is wrongly declared promising with probability at most {:.3} when both rates \
are unacceptable, at most {:.3} when only the response rate is unacceptable, and at most {:.3} \
when only the toxicity rate is unacceptable. These limits are evaluated with an odds ratio of {} \
between response and toxicity.",
        spec.alpha_targets.alpha00, spec.alpha_targets.alpha01, spec.alpha_targets.alpha10, spec.design_phi
    )
    .unwrap();
    writeln!(t).unwrap();

    writeln!(t, "2. Sample size and interim analyses").unwrap();
    writeln!(
        t,
        "Up to {max_n} patients are enrolled. Efficacy is assessed after {} patients; toxicity after {} patients.",
        efficacy_looks.join(", "),
        toxicity_looks.join(", ")
    )
    .unwrap();
    writeln!(t).unwrap();

    writeln!(t, "3. Decision rule").unwrap();
    writeln!(
        t,
        "Response and toxicity follow a Dirichlet-multinomial model with a prior of total weight {:.3} \
{prior_text} (tau = [{:.4}, {:.4}, {:.4}, {:.4}]).",
        prior.total(),
        prior.tau[0],
        prior.tau[1],
        prior.tau[2],
        prior.tau[3]
    )
    .unwrap();
    match &result.q {
        Some(q) => writeln!(
            t,
            "At an analysis with n patients the trial continues only if the posterior probability that the \
response rate exceeds {:.2} is above {:.3}*(n/{max_n})^{:.4}, and the posterior probability that the \
toxicity rate is at most {:.2} is above {:.3}*(n/{max_n})^{:.4}.",
            spec.eta_e_null,
            q.lambda_e,
            q.gamma,
            spec.eta_t_null,
            q.lambda_t,
            q.gamma / spec.attenuation
        )
        .unwrap(),
        None => writeln!(
            t,
            "The stopping boundaries below were chosen by exhaustive search ({}) rather than from cutoff functions.",
            result.method.label()
        )
        .unwrap(),
    }
    writeln!(
        t,
        "Equivalently, the trial stops for futility when the number of responses is at or below the \
bound in the table, and for toxicity when the number of toxicities is at or above it. At the final \
analysis the treatment is declared promising if neither bound is crossed."
    )
    .unwrap();
    writeln!(t).unwrap();
    t.push_str(&boundary_table(&result.boundaries));
    writeln!(t).unwrap();

    writeln!(t, "4. Operating characteristics").unwrap();
    writeln!(
        t,
        "Computed exactly. PCP is the probability of declaring the treatment promising, PET the \
probability of stopping early and ESS the expected number of patients."
    )
    .unwrap();
    t.push_str(&oc_table(&oc));
    let h11 = &oc.hypotheses[Hypothesis::ALL.len() - 1];
    writeln!(
        t,
        "Type I errors are {a00:.4}, {a01:.4} and {a10:.4}; power is {:.4} when the response rate is {:.2} and the toxicity rate is {:.2}.",
        result.power(),
        h11.pi_e,
        h11.pi_t
    )
    .unwrap();
    if !result.feasible {
        writeln!(t, "NOTE: no design met every type I error limit; the closest one is shown.").unwrap();
    }
    Ok(t)
}
