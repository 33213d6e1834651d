//! The decision engine: maps percepts (endpoint/knot detections, traces,
//! grasp proposals) to manipulation actions, with an ablation mode that
//! treats every uncertainty signal as certain.

use crate::acts::{
    cage_pinch_dilation, exposure, incremental_reidemeister, partial_cage_pinch_dilation,
    reidemeister_move, Event, Verdict,
};
use crate::cable::SimState;
use crate::config::SimConfig;
use crate::error::SimError;
use crate::observe::{render, save_png, Observation, PixelRect};
use crate::percept::{
    detect_endpoints, detect_knots, score_cage_pinch, trace, Detection, GraspProposal,
    NetworkStatus, TraceResult, TraceStatus, TraceStop,
};
use crate::quasistatics::advance_clock;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Everything the policy is allowed to see for one decision.
pub struct Percepts {
    pub endpoints: Vec<Detection>,
    pub knots: Vec<Detection>,
    /// One knot-mode trace per detected endpoint.
    pub traces: Vec<TraceResult>,
    /// Present only when some trace is certain (always, when ablated).
    pub proposal: Option<ScoredProposal>,
}

/// A grasp proposal plus the trace context it came from.
pub struct ScoredProposal {
    pub proposal: GraspProposal,
    pub trace_len_px: f64,
    /// Index into the observation's truth knot list, when the traced knot
    /// box overlaps a real knot (used only by the outcome models).
    pub truth_knot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Exposure,
    Reidemeister,
    IncrementalReidemeister,
    CagePinchDilation {
        proposal: GraspProposal,
        trace_len_px: f64,
    },
    PartialCagePinchDilation {
        proposal: GraspProposal,
    },
    Done,
}

/// The exact decision table over one set of percepts.
pub fn decide(percepts: &Percepts, cfg: &SimConfig) -> Action {
    let ne = percepts.endpoints.len();
    let nk = percepts.knots.len();
    if ne == 0 || (ne < 2 && nk == 0) {
        return Action::Exposure;
    }
    if nk == 0 {
        return Action::IncrementalReidemeister;
    }
    // >=1 endpoint and >=1 knot: act on the traced knot if any trace
    // resolved, otherwise fall back by endpoint count.
    match &percepts.proposal {
        Some(sp) => {
            let certain = !cfg.uncertainty_enabled || sp.proposal.status == NetworkStatus::Certain;
            if certain {
                Action::CagePinchDilation {
                    proposal: sp.proposal,
                    trace_len_px: sp.trace_len_px,
                }
            } else {
                Action::PartialCagePinchDilation {
                    proposal: sp.proposal,
                }
            }
        }
        None => {
            if ne >= 2 {
                Action::Reidemeister
            } else {
                Action::Exposure
            }
        }
    }
}

fn trace_usable(t: &TraceResult, cfg: &SimConfig) -> bool {
    if t.splines.is_empty() {
        return false;
    }
    !cfg.uncertainty_enabled || t.status == TraceStatus::Certain
}

/// Truth knot whose box contains the trace terminal, for the outcome model.
fn truth_knot_at(obs: &Observation, tail: (i32, i32)) -> Option<usize> {
    obs.truth
        .knots
        .iter()
        .position(|(bbox, _)| bbox.contains(tail.0, tail.1))
}

/// Run the full perception pipeline on one observation.
pub fn perceive(
    obs: &Observation,
    state: &SimState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Percepts {
    let endpoints = detect_endpoints(obs, &cfg.percept, rng);
    let knots = detect_knots(obs, &cfg.percept, rng);
    let mut traces = Vec::new();
    let mut proposal = None;

    if !endpoints.is_empty() && !knots.is_empty() {
        let boxes: Vec<PixelRect> = knots.iter().map(|d| d.bbox).collect();
        let stop = TraceStop::KnotBoxes(boxes);
        for ep in &endpoints {
            traces.push(trace(obs, ep.bbox.center(), &stop, &cfg.percept));
        }
        // Among usable traces, act on the knot reached by the shortest one.
        let best = traces
            .iter()
            .filter(|t| trace_usable(t, cfg))
            .min_by(|a, b| a.trace_len_px.partial_cmp(&b.trace_len_px).unwrap());
        if let Some(t) = best {
            let tail = *t.splines[t.representative].last().unwrap();
            let truth_knot = truth_knot_at(obs, tail);
            let mut p = match truth_knot {
                Some(k) => {
                    let span = &obs.truth.knots[k].1;
                    let u_mid = (span.u_interval.0 + span.u_interval.1) / 2.0;
                    let relief = state.relief_factor(u_mid);
                    score_cage_pinch(obs, k, tail, relief, &cfg.percept, rng)
                }
                // A phantom knot box: nothing real to score against.
                None => GraspProposal {
                    cage_px: tail,
                    pinch_px: tail,
                    confidence: 0.0,
                    status: NetworkStatus::Uncertain,
                },
            };
            if !cfg.uncertainty_enabled {
                p.status = NetworkStatus::Certain;
            }
            proposal = Some(ScoredProposal {
                proposal: p,
                trace_len_px: t.trace_len_px,
                truth_knot,
            });
        }
    }
    Percepts {
        endpoints,
        knots,
        traces,
        proposal,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: Action,
    /// Total sim-clock advance over the step (perception + primitive).
    pub duration_s: f64,
    pub events: Vec<Event>,
    /// Ground-truth knot count after the step.
    pub k_t: usize,
    pub trace_statuses: Vec<TraceStatus>,
    pub network_status: Option<NetworkStatus>,
    pub error: Option<String>,
    pub frame: Option<String>,
}

/// Per-rollout policy state: the only memory is the pending-done latch set
/// by a clean incremental-Reidemeister verification.
#[derive(Default)]
pub struct Policy {
    pending_done: bool,
}

impl Policy {
    pub fn new() -> Policy {
        Policy::default()
    }

    pub fn done(&self) -> bool {
        self.pending_done
    }

    /// One perceive-decide-act cycle. Returns the record; `Done` leaves the
    /// state untouched.
    pub fn step(
        &mut self,
        state: &mut SimState,
        cfg: &SimConfig,
        rng: &mut ChaCha8Rng,
        step_index: usize,
        frame_dir: Option<&std::path::Path>,
    ) -> StepRecord {
        if self.pending_done {
            return StepRecord {
                step: step_index,
                action: Action::Done,
                duration_s: 0.0,
                events: Vec::new(),
                k_t: state.knot_spans().len(),
                trace_statuses: Vec::new(),
                network_status: None,
                error: None,
                frame: None,
            };
        }

        let clock0 = state.sim_clock;
        let obs = render(state, step_index);
        let frame = frame_dir.and_then(|dir| {
            let path = dir.join(format!("step_{step_index}.png"));
            save_png(&obs, &path, None)
                .ok()
                .map(|_| path.to_string_lossy().into_owned())
        });
        let percepts = perceive(&obs, state, cfg, rng);
        advance_clock(state, cfg.durations.perception_s);
        let action = decide(&percepts, cfg);

        let mut events = Vec::new();
        let mut error = None;
        let result = match &action {
            Action::Exposure => exposure(state, cfg, rng).map(Some),
            Action::Reidemeister => reidemeister_move(state, cfg, rng).map(Some),
            Action::IncrementalReidemeister => {
                incremental_reidemeister(state, cfg, rng).map(|(out, verdict, _views)| {
                    if verdict == Verdict::NoKnots {
                        self.pending_done = true;
                    }
                    Some(out)
                })
            }
            Action::CagePinchDilation {
                proposal,
                trace_len_px,
            } => cage_pinch_dilation(state, proposal, *trace_len_px, cfg, rng).map(Some),
            Action::PartialCagePinchDilation { proposal } => {
                partial_cage_pinch_dilation(state, proposal, cfg, rng).map(Some)
            }
            Action::Done => unreachable!("handled above"),
        };
        match result {
            Ok(Some(out)) => events = out.events,
            Ok(None) => {}
            Err(e) => {
                error = Some(e.to_string());
                // A knot we cannot reach: free up cable instead.
                if matches!(e, SimError::Unreachable(_)) {
                    if let Ok(out) = exposure(state, cfg, rng) {
                        events = out.events;
                    }
                }
            }
        }

        StepRecord {
            step: step_index,
            action,
            duration_s: state.sim_clock - clock0,
            events,
            k_t: state.knot_spans().len(),
            trace_statuses: percepts.traces.iter().map(|t| t.status).collect(),
            network_status: percepts.proposal.as_ref().map(|p| p.proposal.status),
            error,
            frame,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::{generate_initial_state, straight_state, KnotRequest};
    use crate::percept::DetKind;
    use rand_chacha::rand_core::SeedableRng;

    fn det(kind: DetKind) -> Detection {
        Detection {
            kind,
            bbox: PixelRect {
                x0: 100,
                y0: 100,
                x1: 140,
                y1: 140,
            },
            confidence: 1.0,
        }
    }

    fn synthetic(
        ne: usize,
        nk: usize,
        trace: Option<TraceStatus>,
        net: Option<(NetworkStatus, f64)>,
    ) -> Percepts {
        let traces = trace
            .map(|status| {
                vec![TraceResult {
                    splines: vec![vec![(100, 100), (120, 120)]],
                    terminal_bbox: None,
                    status,
                    trace_len_px: 200.0,
                    representative: 0,
                    dead_end: false,
                }]
            })
            .unwrap_or_default();
        Percepts {
            endpoints: (0..ne).map(|_| det(DetKind::Endpoint)).collect(),
            knots: (0..nk).map(|_| det(DetKind::Knot)).collect(),
            traces,
            proposal: net.map(|(status, confidence)| ScoredProposal {
                proposal: GraspProposal {
                    cage_px: (110, 110),
                    pinch_px: (130, 130),
                    confidence,
                    status,
                },
                trace_len_px: 200.0,
                truth_knot: None,
            }),
        }
    }

    #[test]
    fn decision_table_worked_examples() {
        let cfg = SimConfig::default();
        assert_eq!(
            decide(&synthetic(2, 0, None, None), &cfg),
            Action::IncrementalReidemeister
        );
        let p = synthetic(
            1,
            1,
            Some(TraceStatus::Certain),
            Some((NetworkStatus::Uncertain, 0.28)),
        );
        assert!(matches!(
            decide(&p, &cfg),
            Action::PartialCagePinchDilation { .. }
        ));
        assert_eq!(decide(&synthetic(0, 2, None, None), &cfg), Action::Exposure);
    }

    #[test]
    fn decision_table_is_total_and_consistent() {
        let cfg = SimConfig::default();
        let ablated = SimConfig::default().with_uncertainty_disabled();
        for ne in 0..=2 {
            for nk in 0..=3 {
                for trace in [None, Some(TraceStatus::Certain), Some(TraceStatus::Uncertain)] {
                    for net in [
                        None,
                        Some((NetworkStatus::Certain, 0.8)),
                        Some((NetworkStatus::Uncertain, 0.2)),
                    ] {
                        let p = synthetic(ne, nk, trace, net);
                        let a = decide(&p, &cfg);
                        // Spot-check the table rows.
                        match (ne, nk, &p.proposal) {
                            (0, _, _) => assert_eq!(a, Action::Exposure),
                            (1, 0, _) => assert_eq!(a, Action::Exposure),
                            (2, 0, _) => assert_eq!(a, Action::IncrementalReidemeister),
                            (_, _, None) => assert!(
                                a == Action::Reidemeister || a == Action::Exposure
                            ),
                            (_, _, Some(sp)) => match sp.proposal.status {
                                NetworkStatus::Certain => {
                                    assert!(matches!(a, Action::CagePinchDilation { .. }))
                                }
                                NetworkStatus::Uncertain => assert!(matches!(
                                    a,
                                    Action::PartialCagePinchDilation { .. }
                                )),
                            },
                        }
                        // Ablated mode never yields a partial dilation.
                        let b = decide(&p, &ablated);
                        assert!(!matches!(b, Action::PartialCagePinchDilation { .. }));
                    }
                }
            }
        }
    }

    #[test]
    fn untangled_cable_terminates_in_two_steps() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = straight_state(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = Policy::new();
        let a = policy.step(&mut st, &cfg, &mut rng, 0, None);
        assert_eq!(a.action, Action::IncrementalReidemeister);
        let b = policy.step(&mut st, &cfg, &mut rng, 1, None);
        assert_eq!(b.action, Action::Done);
        assert_eq!(b.k_t, 0);
        assert!(policy.done());
    }

    #[test]
    fn noise_off_tier1_removes_knot_with_one_dilation() {
        let cfg = SimConfig::default().with_noise_off();
        let reqs = KnotRequest::defaults(1, 3);
        let mut st = generate_initial_state(1, &reqs, 3, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut policy = Policy::new();
        let mut dilations = 0;
        let mut removed = 0;
        for i in 0..10 {
            let rec = policy.step(&mut st, &cfg, &mut rng, i, None);
            if matches!(rec.action, Action::CagePinchDilation { .. }) {
                dilations += 1;
            }
            removed += rec
                .events
                .iter()
                .filter(|e| matches!(e, Event::KnotRemoved { .. }))
                .count();
            if rec.action == Action::Done {
                break;
            }
        }
        assert_eq!(dilations, 1);
        assert_eq!(removed, 1);
        assert!(st.is_untangled());
    }
}
