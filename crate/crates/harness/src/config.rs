//! Experiment configuration files.
//!
//! A config is a TOML document with a few top-level keys and one section per
//! concern. Unknown keys are rejected. The only optional keys are the
//! verifier slack (default `sqrt(2/pi) * sigma`), the filter mode (default
//! `direct`), the schedule unit (default `total`), the rank policy (default
//! `strict`) and the landscape log-ratio statistic (default
//! `per_replication`).
//!
//! ```toml
//! experiment = "iterate"
//! seed = 7
//! replications = 200
//!
//! [problem]
//! dimension = 8
//! true_theta = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
//! sigma = 1.0
//! n0 = 100
//! covariates = { law = "standard_normal", draw = "per_experiment" }
//!
//! [verifier]
//! delta = 1.0
//! radius = 1.8
//!
//! [schedule]
//! kind = "linear"
//! start = 100
//! end = 5500
//! rounds = 60
//! unit = "per_direction"
//!
//! [iterate]
//! baseline = true
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use verisim_core::gaussian1d::{Crossing, Gaussian1DConfig, StopRule};
use verisim_core::linreg::{CovariateLaw, LinRegConfig, RankPolicy, ScheduleUnit};
use verisim_core::verifier::default_slack;
use verisim_core::{FilterMode, Interval1D, KnowledgeBall, Schedule, ScheduleKind};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Landscape,
    Iterate,
    Gaussian1d,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Landscape => "landscape",
            ExperimentKind::Iterate => "iterate",
            ExperimentKind::Gaussian1d => "gaussian1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<VerifierSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterate: Option<IterateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian1d: Option<Gaussian1DSection>,
}

/// The linear-regression problem shared by `landscape` and `iterate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub dimension: usize,
    pub true_theta: Vec<f64>,
    pub sigma: f64,
    pub n0: usize,
    pub covariates: CovariatesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_policy: Option<RankPolicyName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariatesSection {
    StandardNormal {
        draw: DrawScope,
    },
    /// Rows of `X0`.
    Fixed {
        matrix: Vec<Vec<f64>>,
    },
}

/// How often random covariates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawScope {
    /// One `X0` for the whole experiment, from the master seed.
    PerExperiment,
    PerReplication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicyName {
    Strict,
    Subspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterModeName {
    Direct,
    Reject,
    None,
}

impl From<FilterModeName> for FilterMode {
    fn from(m: FilterModeName) -> Self {
        match m {
            FilterModeName::Direct => FilterMode::Direct,
            FilterModeName::Reject => FilterMode::Reject,
            FilterModeName::None => FilterMode::None,
        }
    }
}

/// The knowledge ball for `iterate`: `theta_c = theta_star + delta * u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierSection {
    pub delta: f64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_mode: Option<FilterModeName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKindName {
    Fixed,
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleUnitName {
    Total,
    PerDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKindName,
    pub start: u64,
    /// Final count, `linear` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    /// Growth factor, `geometric` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub rounds: usize,
    /// Whether counts are totals over all directions (linear regression only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<ScheduleUnitName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRatioStatistic {
    /// Mean over replications of `log(|e0| / |e1|)`.
    PerReplication,
    /// `log(mean |e0| / mean |e1|)`.
    RatioOfMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    /// Verified samples per direction in the single retraining round.
    pub n1: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_mode: Option<FilterModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_ratio: Option<LogRatioStatistic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateSection {
    /// Also run the unfiltered arm.
    pub baseline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingName {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian1DSection {
    pub true_mean: f64,
    pub sigma: f64,
    pub n0: u64,
    /// Verifier interval; `-inf` / `inf` allowed.
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_mode: Option<FilterModeName>,
    /// Stop a replication once its mean crosses this level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_crossing: Option<CrossingName>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Check the config and translate it into core types.
    pub fn resolve(&self) -> Result<Resolved> {
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if self.replications > verisim_core::StreamKey::MAX_REPLICATIONS {
            return invalid("replications exceed the seed space");
        }
        let forbid = |present: bool, section: &str| -> Result<()> {
            if present {
                return invalid(&format!(
                    "section [{section}] is not used by a {} experiment",
                    self.experiment.name()
                ));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::Landscape => {
                forbid(self.verifier.is_some(), "verifier")?;
                forbid(self.schedule.is_some(), "schedule")?;
                forbid(self.iterate.is_some(), "iterate")?;
                forbid(self.gaussian1d.is_some(), "gaussian1d")?;
                let problem = require(&self.problem, "problem")?.resolve()?;
                let landscape = require(&self.landscape, "landscape")?;
                if landscape.deltas.is_empty() || landscape.radii.is_empty() {
                    return invalid("landscape grids must be non-empty");
                }
                if landscape.deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                    return invalid("landscape deltas must be finite and non-negative");
                }
                if landscape.radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                    return invalid("landscape radii must be finite and non-negative");
                }
                if landscape.n1 == 0 {
                    return invalid("landscape.n1 must be at least 1");
                }
                let slack = resolve_slack(landscape.slack, problem.sigma)?;
                Ok(Resolved::Landscape(LandscapeSpec {
                    problem,
                    deltas: landscape.deltas.clone(),
                    radii: landscape.radii.clone(),
                    n1: landscape.n1,
                    slack,
                    filter_mode: landscape.filter_mode.map_or(FilterMode::Direct, Into::into),
                    log_ratio: landscape.log_ratio.unwrap_or(LogRatioStatistic::PerReplication),
                }))
            }
            ExperimentKind::Iterate => {
                forbid(self.landscape.is_some(), "landscape")?;
                forbid(self.gaussian1d.is_some(), "gaussian1d")?;
                let problem = require(&self.problem, "problem")?.resolve()?;
                let verifier = require(&self.verifier, "verifier")?;
                let schedule = require(&self.schedule, "schedule")?;
                let iterate = require(&self.iterate, "iterate")?;
                if !(verifier.delta >= 0.0) || !verifier.delta.is_finite() {
                    return invalid("verifier.delta must be finite and non-negative");
                }
                let slack = resolve_slack(verifier.slack, problem.sigma)?;
                let unit = match schedule.unit.unwrap_or(ScheduleUnitName::Total) {
                    ScheduleUnitName::Total => ScheduleUnit::Total,
                    ScheduleUnitName::PerDirection => ScheduleUnit::PerDirection,
                };
                Ok(Resolved::Iterate(IterateSpec {
                    problem,
                    delta: verifier.delta,
                    radius: verifier.radius,
                    slack,
                    filter_mode: verifier.filter_mode.map_or(FilterMode::Direct, Into::into),
                    schedule: schedule.resolve()?,
                    schedule_unit: unit,
                    baseline: iterate.baseline,
                }))
            }
            ExperimentKind::Gaussian1d => {
                forbid(self.problem.is_some(), "problem")?;
                forbid(self.verifier.is_some(), "verifier")?;
                forbid(self.landscape.is_some(), "landscape")?;
                forbid(self.iterate.is_some(), "iterate")?;
                let section = require(&self.gaussian1d, "gaussian1d")?;
                let schedule = require(&self.schedule, "schedule")?;
                if schedule.unit.is_some() {
                    return invalid("schedule.unit applies to linear regression only");
                }
                let stop = match (section.stop_level, section.stop_crossing) {
                    (None, None) => None,
                    (Some(level), Some(crossing)) => Some(StopRule {
                        level,
                        crossing: match crossing {
                            CrossingName::Below => Crossing::Below,
                            CrossingName::Above => Crossing::Above,
                        },
                    }),
                    _ => return invalid("stop_level and stop_crossing must be given together"),
                };
                let config = Gaussian1DConfig {
                    true_mean: section.true_mean,
                    sigma: section.sigma,
                    interval: Interval1D::new(section.lower, section.upper)?,
                    n0: section.n0,
                    schedule: schedule.resolve()?,
                    filter_mode: section.filter_mode.map_or(FilterMode::Direct, Into::into),
                    stop,
                };
                config.validate()?;
                Ok(Resolved::Gaussian1d(config))
            }
        }
    }

    /// The config with every defaulted key written out.
    pub fn with_defaults(&self) -> Result<Self> {
        let mut out = self.clone();
        match self.resolve()? {
            Resolved::Landscape(spec) => {
                let l = out.landscape.as_mut().expect("checked by resolve");
                l.slack = Some(spec.slack);
                l.filter_mode = Some(mode_name(spec.filter_mode));
                l.log_ratio = Some(spec.log_ratio);
                out.problem.as_mut().expect("checked").rank_policy =
                    Some(policy_name(spec.problem.rank_policy));
            }
            Resolved::Iterate(spec) => {
                let v = out.verifier.as_mut().expect("checked by resolve");
                v.slack = Some(spec.slack);
                v.filter_mode = Some(mode_name(spec.filter_mode));
                out.schedule.as_mut().expect("checked").unit = Some(match spec.schedule_unit {
                    ScheduleUnit::Total => ScheduleUnitName::Total,
                    ScheduleUnit::PerDirection => ScheduleUnitName::PerDirection,
                });
                out.problem.as_mut().expect("checked").rank_policy =
                    Some(policy_name(spec.problem.rank_policy));
            }
            Resolved::Gaussian1d(config) => {
                out.gaussian1d.as_mut().expect("checked").filter_mode = Some(mode_name(config.filter_mode));
            }
        }
        Ok(out)
    }
}

fn mode_name(mode: FilterMode) -> FilterModeName {
    match mode {
        FilterMode::Direct => FilterModeName::Direct,
        FilterMode::Reject => FilterModeName::Reject,
        FilterMode::None => FilterModeName::None,
    }
}

fn policy_name(policy: RankPolicy) -> RankPolicyName {
    match policy {
        RankPolicy::Strict => RankPolicyName::Strict,
        RankPolicy::Subspace => RankPolicyName::Subspace,
    }
}

fn invalid<T>(msg: &str) -> Result<T> {
    Err(Error::Invalid(msg.to_string()))
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| Error::Invalid(format!("missing section [{name}]")))
}

fn resolve_slack(slack: Option<f64>, sigma: f64) -> Result<f64> {
    match slack {
        Some(s) if !(s >= 0.0) || !s.is_finite() => invalid("slack must be finite and non-negative"),
        Some(s) => Ok(s),
        None => Ok(default_slack(sigma)),
    }
}

impl ScheduleSection {
    pub fn resolve(&self) -> Result<Schedule> {
        let kind = match (self.kind, self.end, self.ratio) {
            (ScheduleKindName::Fixed, None, None) => ScheduleKind::Fixed,
            (ScheduleKindName::Linear, Some(end), None) => ScheduleKind::Linear { end },
            (ScheduleKindName::Geometric, None, Some(ratio)) => ScheduleKind::Geometric { ratio },
            (ScheduleKindName::Fixed, _, _) => {
                return invalid("a fixed schedule takes neither end nor ratio")
            }
            (ScheduleKindName::Linear, _, _) => return invalid("a linear schedule needs end and no ratio"),
            (ScheduleKindName::Geometric, _, _) => {
                return invalid("a geometric schedule needs ratio and no end")
            }
        };
        Ok(Schedule::new(kind, self.start, self.rounds)?)
    }
}

/// The linear-regression problem in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub true_theta: DVector<f64>,
    pub sigma: f64,
    pub n0: usize,
    pub covariates: CovariateSpec,
    pub rank_policy: RankPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateSpec {
    StandardNormal(DrawScope),
    Fixed(DMatrix<f64>),
}

impl ProblemSection {
    fn resolve(&self) -> Result<ProblemSpec> {
        let p = self.dimension;
        if p == 0 {
            return invalid("problem.dimension must be at least 1");
        }
        if p as u64 > verisim_core::StreamKey::MAX_DIRECTIONS {
            return invalid("problem.dimension exceeds the seed space");
        }
        if self.true_theta.len() != p {
            return invalid("problem.true_theta must have `dimension` entries");
        }
        if self.true_theta.iter().any(|t| !t.is_finite()) {
            return invalid("problem.true_theta must be finite");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return invalid("problem.sigma must be finite and positive");
        }
        let covariates = match &self.covariates {
            CovariatesSection::StandardNormal { draw } => CovariateSpec::StandardNormal(*draw),
            CovariatesSection::Fixed { matrix } => {
                if matrix.len() != self.n0 || matrix.iter().any(|row| row.len() != p) {
                    return invalid("problem.covariates.matrix must be n0 rows of `dimension` entries");
                }
                CovariateSpec::Fixed(DMatrix::from_row_iterator(
                    self.n0,
                    p,
                    matrix.iter().flatten().copied(),
                ))
            }
        };
        let rank_policy = match self.rank_policy.unwrap_or(RankPolicyName::Strict) {
            RankPolicyName::Strict => RankPolicy::Strict,
            RankPolicyName::Subspace => RankPolicy::Subspace,
        };
        if self.n0 < p && rank_policy == RankPolicy::Strict {
            return invalid("problem.n0 must be at least the dimension");
        }
        Ok(ProblemSpec {
            true_theta: DVector::from_column_slice(&self.true_theta),
            sigma: self.sigma,
            n0: self.n0,
            covariates,
            rank_policy,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSpec {
    pub problem: ProblemSpec,
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    pub n1: u64,
    pub slack: f64,
    pub filter_mode: FilterMode,
    pub log_ratio: LogRatioStatistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateSpec {
    pub problem: ProblemSpec,
    pub delta: f64,
    pub radius: f64,
    pub slack: f64,
    pub filter_mode: FilterMode,
    pub schedule: Schedule,
    pub schedule_unit: ScheduleUnit,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Landscape(LandscapeSpec),
    Iterate(IterateSpec),
    Gaussian1d(Gaussian1DConfig),
}

impl ProblemSpec {
    pub fn dimension(&self) -> usize {
        self.true_theta.len()
    }

    /// A linear-regression config around `ball`; `covariates` is the law
    /// each replication uses.
    pub fn linreg_config(
        &self,
        ball: KnowledgeBall,
        covariates: CovariateLaw,
        schedule: Schedule,
        schedule_unit: ScheduleUnit,
        filter_mode: FilterMode,
    ) -> LinRegConfig {
        LinRegConfig {
            true_theta: self.true_theta.clone(),
            ball,
            sigma: self.sigma,
            n0: self.n0,
            schedule,
            schedule_unit,
            covariate_law: covariates,
            filter_mode,
            rank_policy: self.rank_policy,
        }
    }
}
