//! Annealed moment functionals of an environment law and the resulting
//! existence/uniqueness classification of mean-one fixed points.
//!
//! * `c1 = 𝔼[Σ y (log⁺ y)²]`
//! * `c2 = 𝔼[(Σ y)|log Σ y|]`
//! * `κ  = 𝔼[Σ y log y]` (with `0·log 0 = 0`)

use rayon::prelude::*;
use serde::Serialize;

use crate::burst;
use crate::env_model::{EnvState, EnvironmentLaw, Outcome, StateKind};
use crate::extended::ExtReal;
use crate::labels;
use crate::seed::{self, derive_seed};
use crate::stats::{self, CompensatedSum};

/// Width, in standard errors, of the interval a Monte Carlo κ must clear
/// before its sign is trusted.
pub const CONFIDENCE_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    pub mc_budget: usize,
    pub mc_batches: usize,
    pub seed: u64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { mc_budget: 1_000_000, mc_batches: 100, seed: 0x5EED_0001 }
    }
}

/// How a moment was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Series { terms: u32, tail_bound: f64 },
    DivergentSeries { terms: u32, partial_sum: f64 },
    MonteCarlo { budget: usize, std_error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub value: ExtReal,
    pub method: Method,
}

impl Moment {
    fn exact(v: f64) -> Self {
        Moment { value: ExtReal::Finite(v), method: Method::Exact }
    }

    pub fn std_error(&self) -> Option<f64> {
        match self.method {
            Method::MonteCarlo { std_error, .. } => Some(std_error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub c1: Moment,
    pub c2: Moment,
    pub kappa: Moment,
    /// `𝔼[Σ y log⁺ y]`, an upper bound for κ whenever both are finite.
    pub kappa_positive_part: Moment,
}

/// Per-state summands of the four functionals.
#[derive(Debug, Clone, Copy, Default)]
struct Summands {
    c1: f64,
    c2: f64,
    kappa: f64,
    kappa_pos: f64,
}

impl Summands {
    fn of_weights(ws: &[f64]) -> Self {
        let mut s = Summands::default();
        let mut total = 0.0;
        for &y in ws {
            total += y;
            if y > 0.0 {
                let l = y.ln();
                s.kappa += y * l;
                if l > 0.0 {
                    s.c1 += y * l * l;
                    s.kappa_pos += y * l;
                }
            }
        }
        if total > 0.0 {
            s.c2 = total * total.ln().abs();
        }
        s
    }
}

fn exact_report(outcomes: &[Outcome]) -> MomentReport {
    let mut acc = [CompensatedSum::new(); 4];
    for o in outcomes {
        let s = Summands::of_weights(o.weights.as_slice());
        acc[0].add(o.prob * s.c1);
        acc[1].add(o.prob * s.c2);
        acc[2].add(o.prob * s.kappa);
        acc[3].add(o.prob * s.kappa_pos);
    }
    MomentReport {
        c1: Moment::exact(acc[0].value()),
        c2: Moment::exact(acc[1].value()),
        kappa: Moment::exact(acc[2].value()),
        kappa_positive_part: Moment::exact(acc[3].value()),
    }
}

fn burst_report(b: &burst::BurstLaw) -> MomentReport {
    let mean = b.mean_count();
    let per_child = burst::CHILD_WEIGHT * burst::CHILD_WEIGHT.ln();
    MomentReport {
        c1: Moment::exact(0.0),
        c2: Moment {
            value: ExtReal::PosInf,
            method: Method::DivergentSeries { terms: burst::SERIES_TERMS, partial_sum: b.c2_partial_sum() },
        },
        kappa: Moment {
            value: ExtReal::Finite(per_child * mean.value),
            method: Method::Series { terms: mean.terms, tail_bound: per_child.abs() * mean.tail_bound },
        },
        kappa_positive_part: Moment::exact(0.0),
    }
}

fn monte_carlo_report(state: &EnvState, opts: &MomentOptions) -> MomentReport {
    let batches = opts.mc_batches.max(2);
    let per_batch = (opts.mc_budget / batches).max(1);
    let batch: Vec<[f64; 4]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::rng(derive_seed(opts.seed, &labels!["moments", state.id.as_str(), b]));
            let mut acc = [CompensatedSum::new(); 4];
            for _ in 0..per_batch {
                let v = state.sample_weights_with(&mut rng);
                let s = Summands::of_weights(v.as_slice());
                acc[0].add(s.c1);
                acc[1].add(s.c2);
                acc[2].add(s.kappa);
                acc[3].add(s.kappa_pos);
            }
            acc.map(|a| a.value() / per_batch as f64)
        })
        .collect();
    let moment = |i: usize| {
        let xs: Vec<f64> = batch.iter().map(|b| b[i]).collect();
        let e = stats::mean_and_se(&xs);
        Moment {
            value: ExtReal::Finite(e.mean),
            method: Method::MonteCarlo { budget: per_batch * batches, std_error: e.std_error },
        }
    };
    MomentReport { c1: moment(0), c2: moment(1), kappa: moment(2), kappa_positive_part: moment(3) }
}

/// Moments of a single state.
pub fn state_report(state: &EnvState, opts: &MomentOptions) -> MomentReport {
    match &state.kind {
        StateKind::Burst(b) => burst_report(b),
        _ => match state.finite_outcomes() {
            Some(o) => exact_report(&o),
            None => monte_carlo_report(state, opts),
        },
    }
}

fn combine(parts: &[(f64, Moment)]) -> Moment {
    let mut value = ExtReal::ZERO;
    let mut mc: Option<(usize, f64)> = None;
    let mut series: Option<(u32, f64)> = None;
    let mut divergent: Option<Method> = None;
    for (p, m) in parts {
        value = value.add(m.value.scale(*p));
        match m.method {
            Method::Exact => {}
            Method::Series { terms, tail_bound } => {
                let (t, b) = series.unwrap_or((terms, 0.0));
                series = Some((t.min(terms), b + p * tail_bound));
            }
            Method::DivergentSeries { .. } if *p > 0.0 => divergent = Some(m.method),
            Method::DivergentSeries { .. } => {}
            Method::MonteCarlo { budget, std_error } => {
                let (n, var) = mc.unwrap_or((0, 0.0));
                mc = Some((n + budget, var + (p * std_error).powi(2)));
            }
        }
    }
    let method = match (divergent, mc, series) {
        (Some(d), _, _) if !value.is_finite() => d,
        (_, Some((budget, var)), _) => Method::MonteCarlo { budget, std_error: var.sqrt() },
        (_, None, Some((terms, tail_bound))) => Method::Series { terms, tail_bound },
        _ => Method::Exact,
    };
    Moment { value, method }
}

pub fn moment_report_with(law: &EnvironmentLaw, opts: &MomentOptions) -> MomentReport {
    let per_state: Vec<(f64, MomentReport)> =
        law.states().iter().map(|(p, s)| (*p, state_report(s, opts))).collect();
    let pick = |f: fn(&MomentReport) -> Moment| -> Moment {
        combine(&per_state.iter().map(|(p, r)| (*p, f(r))).collect::<Vec<_>>())
    };
    MomentReport {
        c1: pick(|r| r.c1),
        c2: pick(|r| r.c2),
        kappa: pick(|r| r.kappa),
        kappa_positive_part: pick(|r| r.kappa_positive_part),
    }
}

pub fn moment_report(law: &EnvironmentLaw) -> MomentReport {
    moment_report_with(law, &MomentOptions::default())
}

/// `E_state[Σᵢ yᵢ]`.
pub fn quenched_mean(state: &EnvState) -> f64 {
    state.quenched_mean()
}

pub fn moment_c1(law: &EnvironmentLaw) -> Moment {
    moment_report(law).c1
}

pub fn moment_c2(law: &EnvironmentLaw) -> Moment {
    moment_report(law).c2
}

pub fn kappa_weights(law: &EnvironmentLaw) -> Moment {
    moment_report(law).kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictClass {
    #[serde(rename = "UNIQUE_L1")]
    UniqueL1,
    #[serde(rename = "NO_L1_DRIFT")]
    NoL1Drift,
    #[serde(rename = "NO_L1_XLOGX")]
    NoL1Xlogx,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl VerdictClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictClass::UniqueL1 => "UNIQUE_L1",
            VerdictClass::NoL1Drift => "NO_L1_DRIFT",
            VerdictClass::NoL1Xlogx => "NO_L1_XLOGX",
            VerdictClass::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Flag attached when κ = −∞ is classified under the literal `κ < 0` reading.
pub const FLAG_LITERAL_C3: &str = "literal-(c3)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub verdict: VerdictClass,
    pub report: MomentReport,
    pub flags: Vec<String>,
    /// `κ ± z·SE` when κ was estimated by Monte Carlo.
    pub kappa_interval: Option<(f64, f64)>,
}

pub fn classify_report(report: MomentReport) -> Verdict {
    let kappa = report.kappa.value;
    let mut flags = Vec::new();
    let kappa_interval = report.kappa.std_error().and_then(|se| {
        kappa.finite().map(|k| (k - CONFIDENCE_Z * se, k + CONFIDENCE_Z * se))
    });
    let straddles = matches!(kappa_interval, Some((lo, hi)) if lo <= 0.0 && hi >= 0.0);
    let finite = |m: &Moment| m.value.is_finite();
    let verdict = if straddles {
        VerdictClass::Inconclusive
    } else if kappa.exists() && !kappa.is_negative() {
        VerdictClass::NoL1Drift
    } else if finite(&report.c1) && finite(&report.c2) && kappa.is_negative() {
        if kappa == ExtReal::NegInf {
            flags.push(FLAG_LITERAL_C3.to_owned());
        }
        VerdictClass::UniqueL1
    } else if finite(&report.c1) && kappa.is_finite() && kappa.is_negative() && report.c2.value == ExtReal::PosInf {
        VerdictClass::NoL1Xlogx
    } else {
        VerdictClass::Inconclusive
    };
    Verdict { verdict, report, flags, kappa_interval }
}

pub fn classify_with(law: &EnvironmentLaw, opts: &MomentOptions) -> Verdict {
    classify_report(moment_report_with(law, opts))
}

pub fn classify(law: &EnvironmentLaw) -> Verdict {
    classify_report(moment_report(law))
}

/// The flat JSON record `{"verdict", "c1", "c2", "kappa", "method", …}`.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub verdict: VerdictClass,
    pub c1: ExtReal,
    pub c2: ExtReal,
    pub kappa: ExtReal,
    pub method: MethodRecord,
    pub flags: Vec<String>,
    pub kappa_interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRecord {
    pub c1: Method,
    pub c2: Method,
    pub kappa: Method,
}

impl Verdict {
    pub fn record(&self) -> VerdictRecord {
        VerdictRecord {
            verdict: self.verdict,
            c1: self.report.c1.value,
            c2: self.report.c2.value,
            kappa: self.report.kappa.value,
            method: MethodRecord { c1: self.report.c1.method, c2: self.report.c2.method, kappa: self.report.kappa.method },
            flags: self.flags.clone(),
            kappa_interval: self.kappa_interval,
        }
    }

    pub const CSV_HEADER: &'static str = "verdict,c1,c2,kappa,c1_method,c2_method,kappa_method";

    pub fn csv_line(&self) -> String {
        let tag = |m: &Method| match m {
            Method::Exact => "exact".to_owned(),
            Method::Series { terms, .. } => format!("series({terms})"),
            Method::DivergentSeries { .. } => "divergent-series".to_owned(),
            Method::MonteCarlo { budget, std_error } => {
                format!("monte-carlo({budget};{})", crate::io::fmt_f64(*std_error))
            }
        };
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{}",
            self.verdict.as_str(),
            r.c1.value,
            r.c2.value,
            r.kappa.value,
            tag(&r.c1.method),
            tag(&r.c2.method),
            tag(&r.kappa.method)
        )
    }
}
