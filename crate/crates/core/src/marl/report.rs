use crate::link::{Assignment, NetworkEvaluation};
use crate::sf::NUM_SF;

use super::Algorithm;

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    pub algorithm: Algorithm,
    /// Network average EPP of the greedy assignment after each episode.
    pub avg_epp: Vec<f64>,
    /// Network average EPP of the explored actions the agents learned from.
    pub behavior_epp: Vec<f64>,
    /// SF counts of the greedy assignment after each episode.
    pub sf_histograms: Vec<[usize; NUM_SF]>,
    /// First episode (0-based) after which the trace stays within 5 % of
    /// the mean of its last 500 episodes.
    pub convergence_episode: Option<usize>,
    /// Greedy actions of the trained agents.
    pub final_assignment: Assignment,
    pub final_evaluation: NetworkEvaluation,
}

pub const PLATEAU_WINDOW: usize = 500;
pub const PLATEAU_TOLERANCE: f64 = 0.05;

impl TrainingReport {
    pub(crate) fn new(
        algorithm: Algorithm,
        avg_epp: Vec<f64>,
        behavior_epp: Vec<f64>,
        sf_histograms: Vec<[usize; NUM_SF]>,
        final_assignment: Assignment,
        final_evaluation: NetworkEvaluation,
    ) -> Self {
        let convergence_episode = convergence_episode(&avg_epp, PLATEAU_WINDOW, PLATEAU_TOLERANCE);
        Self {
            algorithm,
            avg_epp,
            behavior_epp,
            sf_histograms,
            convergence_episode,
            final_assignment,
            final_evaluation,
        }
    }

    pub fn final_avg_epp(&self) -> f64 {
        self.final_evaluation.avg_epp_j
    }

    pub fn episodes(&self) -> usize {
        self.avg_epp.len()
    }
}

/// First index from which every value stays within `tolerance` (relative)
/// of the mean of the last `window` values. `None` for an empty trace or a
/// non-finite plateau.
pub fn convergence_episode(trace: &[f64], window: usize, tolerance: f64) -> Option<usize> {
    if trace.is_empty() {
        return None;
    }
    let tail = &trace[trace.len() - window.min(trace.len()).max(1)..];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    if !plateau.is_finite() {
        return None;
    }
    let band = tolerance * plateau.abs();
    let within = |v: f64| (v - plateau).abs() <= band;
    match trace.iter().rposition(|&v| !within(v)) {
        None => Some(0),
        Some(last_out) if last_out + 1 < trace.len() => Some(last_out + 1),
        Some(_) => None,
    }
}
