//! Episode metrics and the rubric judge panel.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::Channel;
use crate::sim::{SimConfig, Termination, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub score_s: f64,
    pub mean_forward_speed: f64,
    pub survival_frac: f64,
    pub mean_abs_pitch: f64,
    pub total_ctrl_cost: f64,
    pub total_contact_cost: f64,
    pub total_action_delta: f64,
    pub fell: bool,
    /// Set when the policy behind this episode came from a failed training run.
    #[serde(default)]
    pub training_failed: bool,
}

pub fn compute_metrics(trajectory: &Trajectory, cfg: &SimConfig) -> EpisodeMetrics {
    let obs = &trajectory.observations;
    let steps = trajectory.steps();
    let score_s = trajectory.displacement();
    let elapsed = steps as f64 * cfg.dt;
    let mut m = EpisodeMetrics {
        score_s,
        mean_forward_speed: if steps > 0 { score_s / elapsed } else { 0.0 },
        survival_frac: (steps as f64 / cfg.horizon_steps as f64).min(1.0),
        fell: trajectory.termination == Termination::Unhealthy,
        ..EpisodeMetrics::default()
    };
    for o in obs.iter().skip(1) {
        m.mean_abs_pitch += o[Channel::Pitch].abs();
        m.total_ctrl_cost += o[Channel::CtrlCost];
        m.total_contact_cost += o[Channel::ContactCost];
        m.total_action_delta += o[Channel::ActionDeltaCost];
    }
    if steps > 0 {
        m.mean_abs_pitch /= steps as f64;
    }
    m
}

/// Mean of per-episode metrics. `fell` is set if any episode fell.
pub fn mean_metrics(ms: &[EpisodeMetrics]) -> EpisodeMetrics {
    if ms.is_empty() {
        return EpisodeMetrics::default();
    }
    let n = ms.len() as f64;
    let avg = |f: fn(&EpisodeMetrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
    EpisodeMetrics {
        score_s: avg(|m| m.score_s),
        mean_forward_speed: avg(|m| m.mean_forward_speed),
        survival_frac: avg(|m| m.survival_frac),
        mean_abs_pitch: avg(|m| m.mean_abs_pitch),
        total_ctrl_cost: avg(|m| m.total_ctrl_cost),
        total_contact_cost: avg(|m| m.total_contact_cost),
        total_action_delta: avg(|m| m.total_action_delta),
        fell: ms.iter().any(|m| m.fell),
        training_failed: ms.iter().any(|m| m.training_failed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specialty {
    Speed,
    Stability,
    Efficiency,
    Smoothness,
}

impl Specialty {
    pub const ALL: [Specialty; 4] = [
        Specialty::Speed,
        Specialty::Stability,
        Specialty::Efficiency,
        Specialty::Smoothness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Specialty::Speed => "speed",
            Specialty::Stability => "stability",
            Specialty::Efficiency => "efficiency",
            Specialty::Smoothness => "smoothness",
        }
    }

    /// Default grade boundaries, ascending.
    pub fn default_bins(self) -> [f64; 4] {
        match self {
            Specialty::Speed => [0.05, 0.2, 0.5, 1.0],
            Specialty::Stability => [0.1, 0.25, 0.5, 1.0],
            Specialty::Efficiency => [50.0, 150.0, 400.0, 1000.0],
            Specialty::Smoothness => [5.0, 20.0, 60.0, 150.0],
        }
    }

    /// The metric the specialty grades on.
    pub fn measure(self, m: &EpisodeMetrics) -> f64 {
        match self {
            Specialty::Speed => m.mean_forward_speed,
            // pitch error plus the fraction of the horizon lost to a fall
            Specialty::Stability => m.mean_abs_pitch + (1.0 - m.survival_frac),
            Specialty::Efficiency => m.total_ctrl_cost,
            Specialty::Smoothness => m.total_action_delta,
        }
    }

    fn higher_is_better(self) -> bool {
        self == Specialty::Speed
    }
}

impl fmt::Display for Specialty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Machine-readable suggestions passed from judges to the design agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuggestionTag {
    LowerCenterOfMass,
    ReduceTorque,
    IncreaseTorque,
    LengthenStride,
    DampOscillation,
}

impl SuggestionTag {
    pub const ALL: [SuggestionTag; 5] = [
        SuggestionTag::LowerCenterOfMass,
        SuggestionTag::ReduceTorque,
        SuggestionTag::IncreaseTorque,
        SuggestionTag::LengthenStride,
        SuggestionTag::DampOscillation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuggestionTag::LowerCenterOfMass => "LOWER_CENTER_OF_MASS",
            SuggestionTag::ReduceTorque => "REDUCE_TORQUE",
            SuggestionTag::IncreaseTorque => "INCREASE_TORQUE",
            SuggestionTag::LengthenStride => "LENGTHEN_STRIDE",
            SuggestionTag::DampOscillation => "DAMP_OSCILLATION",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for SuggestionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSpec {
    pub name: String,
    pub specialty: Specialty,
    /// Grade boundaries on the specialty's measure, ascending.
    #[serde(default)]
    pub bins: Option<[f64; 4]>,
}

impl JudgeSpec {
    pub fn new(name: impl Into<String>, specialty: Specialty) -> Self {
        Self {
            name: name.into(),
            specialty,
            bins: None,
        }
    }

    pub fn bins(&self) -> [f64; 4] {
        self.bins.unwrap_or_else(|| self.specialty.default_bins())
    }
}

/// One judge per specialty, in the order speed, stability, efficiency,
/// smoothness.
pub fn default_judges() -> Vec<JudgeSpec> {
    Specialty::ALL
        .iter()
        .map(|&s| JudgeSpec::new(format!("{s}_judge"), s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge_name: String,
    pub specialty: Specialty,
    pub grade: u8,
    pub strengths: Vec<String>,
    pub weaknesses: Vec<String>,
    pub suggestion_tags: Vec<SuggestionTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelFeedback {
    pub verdicts: Vec<JudgeVerdict>,
    pub rationale: String,
    pub aggregate_grade: f64,
}

impl PanelFeedback {
    /// Distinct tags across all verdicts, sorted.
    pub fn tags(&self) -> Vec<SuggestionTag> {
        let mut tags: Vec<SuggestionTag> = self
            .verdicts
            .iter()
            .flat_map(|v| v.suggestion_tags.iter().copied())
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("judge panel is empty")]
    EmptyPanel,
}

fn grade(value: f64, bins: [f64; 4], higher_is_better: bool) -> u8 {
    let below = bins.iter().filter(|&&b| value >= b).count() as u8;
    if value.is_nan() {
        return 1;
    }
    if higher_is_better {
        1 + below
    } else {
        5 - below
    }
}

pub fn run_judge(j: &JudgeSpec, m: &EpisodeMetrics) -> JudgeVerdict {
    let value = j.specialty.measure(m);
    let g = grade(value, j.bins(), j.specialty.higher_is_better());
    let mut strengths = Vec::new();
    let mut weaknesses = Vec::new();
    let mut tags = Vec::new();
    match j.specialty {
        Specialty::Speed => {
            if m.mean_forward_speed <= 0.0 || g == 1 {
                weaknesses.push("no forward progress".to_string());
            } else if g <= 3 {
                weaknesses.push(format!("slow gait at {:.3} m/s", m.mean_forward_speed));
            } else {
                strengths.push(format!(
                    "covers {:.2} m at {:.3} m/s",
                    m.score_s, m.mean_forward_speed
                ));
            }
            if g <= 3 {
                tags.push(SuggestionTag::LengthenStride);
            }
        }
        Specialty::Stability => {
            if m.fell {
                weaknesses.push(format!(
                    "fell after {:.0}% of the horizon",
                    100.0 * m.survival_frac
                ));
                tags.push(SuggestionTag::LowerCenterOfMass);
            } else {
                strengths.push("stayed upright for the whole horizon".to_string());
            }
            if m.mean_abs_pitch >= j.bins()[0] {
                weaknesses.push(format!("torso pitch averages {:.3} rad", m.mean_abs_pitch));
                tags.push(SuggestionTag::DampOscillation);
            } else {
                strengths.push(format!(
                    "level torso ({:.3} rad mean pitch)",
                    m.mean_abs_pitch
                ));
            }
        }
        Specialty::Efficiency => {
            if g <= 2 {
                weaknesses.push(format!("high control effort ({:.1})", m.total_ctrl_cost));
                tags.push(SuggestionTag::ReduceTorque);
            } else {
                strengths.push(format!(
                    "moderate control effort ({:.1})",
                    m.total_ctrl_cost
                ));
            }
        }
        Specialty::Smoothness => {
            if g <= 2 {
                weaknesses.push(format!(
                    "jerky actuation ({:.1} total action change)",
                    m.total_action_delta
                ));
                tags.push(SuggestionTag::DampOscillation);
            } else {
                strengths.push(format!(
                    "smooth actuation ({:.1} total action change)",
                    m.total_action_delta
                ));
            }
        }
    }
    JudgeVerdict {
        judge_name: j.name.clone(),
        specialty: j.specialty,
        grade: g,
        strengths,
        weaknesses,
        suggestion_tags: tags,
    }
}

fn sentence(v: &JudgeVerdict) -> String {
    let mut s = format!("{} ({}) grades {}/5", v.judge_name, v.specialty, v.grade);
    if !v.strengths.is_empty() {
        s.push_str(&format!("; strengths: {}", v.strengths.join(", ")));
    }
    if !v.weaknesses.is_empty() {
        s.push_str(&format!("; weaknesses: {}", v.weaknesses.join(", ")));
    }
    if !v.suggestion_tags.is_empty() {
        let tags: Vec<&str> = v.suggestion_tags.iter().map(|t| t.name()).collect();
        s.push_str(&format!("; suggests {}", tags.join(", ")));
    }
    s.push('.');
    s
}

pub fn run_panel(judges: &[JudgeSpec], m: &EpisodeMetrics) -> Result<PanelFeedback, PanelError> {
    if judges.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let verdicts: Vec<JudgeVerdict> = judges.iter().map(|j| run_judge(j, m)).collect();
    let aggregate_grade =
        verdicts.iter().map(|v| v.grade as f64).sum::<f64>() / verdicts.len() as f64;
    let rationale = verdicts.iter().map(sentence).collect::<Vec<_>>().join(" ");
    Ok(PanelFeedback {
        verdicts,
        rationale,
        aggregate_grade,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Observation;

    fn traj(xs: &[f64]) -> Trajectory {
        let observations = xs
            .iter()
            .map(|&x| {
                let mut o = Observation::default();
                o[Channel::TorsoX] = x;
                o
            })
            .collect();
        Trajectory {
            observations,
            termination: Termination::Horizon,
        }
    }

    #[test]
    fn linear_motion() {
        let cfg = SimConfig::default();
        let xs: Vec<f64> = (0..=1000).map(|i| i as f64 * cfg.dt).collect();
        let m = compute_metrics(&traj(&xs), &cfg);
        assert!((m.score_s - 10.0).abs() < 1e-9);
        assert!((m.mean_forward_speed - 1.0).abs() < 1e-9);
        assert_eq!(m.survival_frac, 1.0);
    }

    #[test]
    fn single_step_and_zero_trajectories() {
        let cfg = SimConfig::default();
        let m = compute_metrics(&traj(&[0.0, 0.0]), &cfg);
        assert_eq!(m.score_s, 0.0);
        assert_eq!(m.survival_frac, 1.0 / cfg.horizon_steps as f64);
        let m = compute_metrics(&traj(&[0.0; 50]), &cfg);
        assert_eq!(
            m.total_ctrl_cost + m.total_contact_cost + m.total_action_delta,
            0.0
        );
        assert!(!m.fell);
    }

    #[test]
    fn speed_rubric_bins() {
        let j = JudgeSpec::new("s", Specialty::Speed);
        let at = |v: f64| {
            run_judge(
                &j,
                &EpisodeMetrics {
                    mean_forward_speed: v,
                    ..Default::default()
                },
            )
        };
        let v = at(0.0);
        assert_eq!(v.grade, 1);
        assert!(v.weaknesses.contains(&"no forward progress".to_string()));
        for (speed, g) in [
            (0.049, 1),
            (0.05, 2),
            (0.19, 2),
            (0.3, 3),
            (0.7, 4),
            (1.0, 5),
            (3.0, 5),
        ] {
            assert_eq!(at(speed).grade, g, "{speed}");
        }
    }

    #[test]
    fn stability_top_bin() {
        let j = JudgeSpec::new("st", Specialty::Stability);
        let m = EpisodeMetrics {
            survival_frac: 1.0,
            mean_abs_pitch: 0.05,
            ..Default::default()
        };
        assert_eq!(run_judge(&j, &m).grade, 5);
        assert_eq!(run_judge(&j, &m), run_judge(&j, &m));
    }

    #[test]
    fn panel_aggregates() {
        let m = EpisodeMetrics {
            survival_frac: 1.0,
            ..Default::default()
        };
        assert_eq!(run_panel(&[], &m), Err(PanelError::EmptyPanel));
        let p = run_panel(&default_judges(), &m).unwrap();
        assert_eq!(p.verdicts.len(), 4);
        assert!(!p.rationale.is_empty());
        assert!(p.rationale.starts_with("speed_judge"));
        let grades: Vec<u8> = p.verdicts.iter().map(|v| v.grade).collect();
        assert_eq!(grades, vec![1, 5, 5, 5]);
        assert_eq!(p.aggregate_grade, 4.0);
    }
}
