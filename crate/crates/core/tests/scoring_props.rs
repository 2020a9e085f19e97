use gazeprompt_core::gaze::Split;
use gazeprompt_core::scoring::{aggregate_table, scale_scores, RawScore, ScoreTask, COLUMNS};
use proptest::prelude::*;

const METRICS: [&str; 3] = ["chexbert_f1", "radgraph_xl", "rate_score"];
const MODELS: [&str; 3] = ["baseline", "model_a", "model_b"];
const METHODS: [&str; 2] = ["base", "video"];

fn scores_from(values: &[f64]) -> Vec<RawScore> {
    let mut out = Vec::new();
    let mut it = values.iter();
    for model in MODELS {
        for method in METHODS {
            for metric in METRICS {
                for (task, split) in COLUMNS {
                    out.push(RawScore {
                        model_id: model.into(),
                        method_id: method.into(),
                        metric_id: metric.into(),
                        task,
                        split,
                        value: *it.next().unwrap(),
                    });
                }
            }
        }
    }
    // single-method baseline
    out.retain(|s| s.model_id != "baseline" || s.method_id == "base");
    out
}

const N: usize = 3 * 2 * 3 * 4;

proptest! {
    #[test]
    fn per_metric_rescaling_changes_nothing(values in prop::collection::vec(0.01f64..1.0, N), c in 0.1f64..10.0, m in 0usize..3) {
        let raw = scores_from(&values);
        let mut rescaled = raw.clone();
        for s in rescaled.iter_mut().filter(|s| s.metric_id == METRICS[m]) {
            s.value *= c;
        }
        let a = scale_scores(&raw, "baseline").unwrap();
        let b = scale_scores(&rescaled, "baseline").unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.scaled - y.scaled).abs() <= 1e-9 * x.scaled.abs().max(1.0));
        }
    }

    #[test]
    fn baseline_row_is_exactly_100(values in prop::collection::vec(0.01f64..1.0, N)) {
        let raw = scores_from(&values);
        let table = aggregate_table(&scale_scores(&raw, "baseline").unwrap(), "base").unwrap();
        let row = table.row("baseline", "base").unwrap();
        prop_assert_eq!(row.cells, [100.0; 4]);
        prop_assert_eq!(row.overall, 100.0);
        for r in &table.rows {
            if r.method_id == "base" {
                prop_assert_eq!(r.delta.unwrap().overall, 0.0);
                prop_assert_eq!(r.delta.unwrap().cells, [0.0; 4]);
            }
        }
    }

    #[test]
    fn scaling_against_self_gives_100(values in prop::collection::vec(0.01f64..1.0, 4)) {
        let raw: Vec<RawScore> = COLUMNS.iter().zip(&values).map(|(&(task, split), &v)| RawScore {
            model_id: "m".into(), method_id: "base".into(), metric_id: "x".into(), task, split, value: v,
        }).collect();
        for c in scale_scores(&raw, "m").unwrap() {
            prop_assert_eq!(c.scaled, 100.0);
        }
    }
}

#[test]
fn columns_are_fixed() {
    assert_eq!(
        COLUMNS,
        [
            (ScoreTask::Report, Split::Alpha),
            (ScoreTask::Report, Split::Beta),
            (ScoreTask::Diagnosis, Split::Alpha),
            (ScoreTask::Diagnosis, Split::Beta),
        ]
    );
}
