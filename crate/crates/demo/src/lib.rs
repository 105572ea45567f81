//! Browser bindings: the dynamic budget curve, a label propagation scene and
//! a single simulation run. Inputs and outputs of the scene and the run are
//! JSON strings so the page needs no generated type definitions.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use streamal::drift::DetectorKind;
use streamal::oracle::{DelayKind, LatencyDistribution};
use streamal::propagate::{nearest_labeled, propagated_labels, time_weight, PrConfig};
use streamal::query::StrategyKind;
use streamal::schedule::{BudgetSchedule, ScheduleParams};
use streamal::window::{LabelState, SlidingWindow, StreamEvent, WindowEntry};
use streamal::{simulate, EstimatorKind, SimConfig, StreamSpec};

/// `B(t)` for `t` in `0..len` with drifts detected at `drifts`.
pub fn budget_curve(b: f64, m_high: f64, m_low: f64, delta_t: f64, drifts: &[u32], len: u32) -> Result<Vec<f64>, String> {
    let params = ScheduleParams { m_high, m_low, delta_t };
    let mut schedule = BudgetSchedule::from_multipliers(b, &params).map_err(|e| e.to_string())?;
    Ok((0..len as u64)
        .map(|t| {
            if drifts.contains(&(t as u32)) {
                schedule.on_drift(t);
            }
            schedule.budget_at(t)
        })
        .collect())
}

#[derive(Debug, Deserialize)]
pub struct ScenePoint {
    pub x: f64,
    pub y: f64,
    pub t: u64,
    /// Missing for pending samples.
    pub label: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct Scene {
    pub points: Vec<ScenePoint>,
    pub k: usize,
    pub lambda: f64,
}

#[derive(Debug, Serialize)]
pub struct Link {
    pub t: u64,
    pub label: usize,
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct Imputed {
    pub t: u64,
    pub label: Option<usize>,
    pub neighbours: Vec<Link>,
}

/// Imputes a label for every pending point of the scene and lists the
/// neighbours that voted, with their time weights.
pub fn propagation_scene(scene: &Scene) -> Result<Vec<Imputed>, String> {
    let cfg = PrConfig {
        k: scene.k,
        lambda: scene.lambda,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let mut points: Vec<&ScenePoint> = scene.points.iter().collect();
    points.sort_by_key(|p| p.t);
    let mut window = SlidingWindow::new(points.len().max(1)).map_err(|e| e.to_string())?;
    let n_classes = points.iter().filter_map(|p| p.label).max().map_or(1, |c| c + 1);
    for p in &points {
        window
            .push_sample(StreamEvent::new(p.t, vec![p.x, p.y], 0))
            .map_err(|e| e.to_string())?;
        window.mark_pending(p.t, p.t).map_err(|e| e.to_string())?;
        if let Some(label) = p.label {
            window.attach_label(p.t, label).map_err(|e| e.to_string())?;
        }
    }
    let labels = propagated_labels(&window, &cfg, n_classes);
    let labeled: Vec<&WindowEntry> = window
        .entries()
        .filter(|e| matches!(e.state, LabelState::Labeled(_)))
        .collect();
    Ok(window
        .entries()
        .filter(|e| e.state.is_pending())
        .map(|e| Imputed {
            t: e.event.t,
            label: labels.iter().find(|(t, _)| *t == e.event.t).map(|(_, y)| *y),
            neighbours: nearest_labeled(&labeled, &e.event.x, cfg.k)
                .into_iter()
                .map(|n| Link {
                    t: n.t,
                    label: n.label,
                    weight: time_weight(e.event.t, n.t, cfg.lambda),
                })
                .collect(),
        })
        .collect())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct RunRequest {
    pub stream: String,
    pub seed: u64,
    pub budget: f64,
    pub delay: u64,
    pub delay_dist: DelayKind,
    pub strategy: StrategyKind,
    pub estimator: EstimatorKind,
    pub detector: DetectorKind,
    pub dynamic: bool,
    /// Keep every `stride`-th step in the returned curves.
    pub stride: usize,
}

impl Default for RunRequest {
    fn default() -> Self {
        Self {
            stream: "rbf_2_2".into(),
            seed: 0,
            budget: 0.05,
            delay: 200,
            delay_dist: DelayKind::TruncNorm,
            strategy: StrategyKind::Split,
            estimator: EstimatorKind::Pr,
            detector: DetectorKind::Hdddm,
            dynamic: true,
            stride: 20,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunResult {
    pub accuracy: f64,
    pub queries: u64,
    pub detections: Vec<u64>,
    pub drift_start: Option<u64>,
    pub h_score: Option<f64>,
    pub t: Vec<u64>,
    pub acc_preq: Vec<f64>,
    pub budget: Vec<f64>,
}

pub fn run(req: &RunRequest) -> Result<RunResult, String> {
    let stream = StreamSpec::preset(&req.stream)
        .and_then(|s| s.build())
        .map_err(|e| e.to_string())?;
    let cfg = SimConfig {
        budget: req.budget,
        latency: LatencyDistribution {
            kind: req.delay_dist,
            delta: req.delay,
        },
        strategy: req.strategy,
        estimator: req.estimator,
        detector: req.detector,
        dynamic: req.dynamic.then(ScheduleParams::default),
        ..SimConfig::default()
    };
    let trace = simulate(&cfg, &stream, req.seed).map_err(|e| e.to_string())?;
    let kept: Vec<_> = trace
        .steps
        .iter()
        .filter(|s| s.acc_preq.is_some())
        .step_by(req.stride.max(1))
        .collect();
    Ok(RunResult {
        accuracy: trace.summary.accuracy,
        queries: trace.summary.queries,
        detections: trace.summary.detections.clone(),
        drift_start: stream.drift.as_ref().map(|d| d.start_t),
        h_score: trace.summary.h_score,
        t: kept.iter().map(|s| s.t).collect(),
        acc_preq: kept.iter().filter_map(|s| s.acc_preq).collect(),
        budget: kept.iter().map(|s| s.budget).collect(),
    })
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = budgetCurve)]
pub fn budget_curve_js(b: f64, m_high: f64, m_low: f64, delta_t: f64, drifts: &[u32], len: u32) -> Result<Vec<f64>, JsError> {
    js(budget_curve(b, m_high, m_low, delta_t, drifts, len))
}

#[wasm_bindgen(js_name = propagationScene)]
pub fn propagation_scene_js(scene: &str) -> Result<String, JsError> {
    let scene: Scene = js(serde_json::from_str(scene).map_err(|e| e.to_string()))?;
    let out = js(propagation_scene(&scene))?;
    js(serde_json::to_string(&out).map_err(|e| e.to_string()))
}

#[wasm_bindgen(js_name = runSimulation)]
pub fn run_js(request: &str) -> Result<String, JsError> {
    let req: RunRequest = js(serde_json::from_str(request).map_err(|e| e.to_string()))?;
    let out = js(run(&req))?;
    js(serde_json::to_string(&out).map_err(|e| e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_has_three_levels() {
        let c = budget_curve(0.1, 4.0, 0.5, 1000.0, &[100], 1500).unwrap();
        assert_eq!(c[99], 0.1);
        assert_eq!(c[100], 0.4);
        assert_eq!(c[242], 0.4);
        assert_eq!(c[243], 0.05);
        assert_eq!(c[1099], 0.05);
        assert_eq!(c[1100], 0.1);
        assert!(budget_curve(1.0, 4.0, 0.5, 1000.0, &[], 10).is_err());
    }

    #[test]
    fn recent_neighbour_wins_the_scene() {
        let scene: Scene = serde_json::from_str(
            r#"{"k": 3, "lambda": 0.01, "points": [
                {"x": 0.1, "y": 0.0, "t": 10, "label": 0},
                {"x": -0.1, "y": 0.0, "t": 12, "label": 0},
                {"x": 0.0, "y": 0.15, "t": 95, "label": 1},
                {"x": 0.0, "y": 0.0, "t": 100}
            ]}"#,
        )
        .unwrap();
        let out = propagation_scene(&scene).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, Some(1));
        assert_eq!(out[0].neighbours.len(), 3);
        let recent = out[0].neighbours.iter().find(|n| n.t == 95).unwrap();
        assert!((recent.weight - (-0.25f64).exp()).abs() < 1e-12);

        let flat = Scene { lambda: 0.0, ..scene };
        assert_eq!(propagation_scene(&flat).unwrap()[0].label, Some(0));
    }

    #[test]
    fn scene_rejects_duplicate_times() {
        let scene: Scene = serde_json::from_str(
            r#"{"k": 1, "lambda": 0.0, "points": [{"x": 0, "y": 0, "t": 1, "label": 0}, {"x": 1, "y": 1, "t": 1}]}"#,
        )
        .unwrap();
        assert!(propagation_scene(&scene).is_err());
    }

    #[test]
    fn small_run_round_trips_json() {
        let req: RunRequest = serde_json::from_str(r#"{"stream": "stagger", "budget": 0.2, "delay": 50, "stride": 100}"#).unwrap();
        let out = run(&req).unwrap();
        assert_eq!(out.t.len(), out.acc_preq.len());
        assert_eq!(out.t.len(), 39);
        assert!(out.accuracy > 0.5);
        assert!(serde_json::to_string(&out).unwrap().contains("\"acc_preq\""));
        assert!(run(&RunRequest { budget: 2.0, ..RunRequest::default() }).is_err());
    }
}
