use elastic_eig::eigen::EigenSolverRegistry;
use elastic_eig::error::Result;
use elastic_eig::study::{
    compute_order, run_study, run_study_with, to_csv, to_markdown, EigenMethod, LevelJob, LevelOutcome, MethodRegistry,
    RunOptions, StudyConfig, CSV_HEADER,
};
use proptest::prelude::*;

fn config(text: &str) -> StudyConfig {
    StudyConfig::from_json(text).unwrap()
}

/// Synthetic method: gamma_j(h) = (j + 1) (10 - h^p).
struct Synthetic(f64);

impl EigenMethod for Synthetic {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn uses_wg_params(&self) -> bool {
        false
    }

    fn run_level(&self, job: &LevelJob<'_>) -> Result<LevelOutcome> {
        let h = 1.0 / job.level.coarse_cells() as f64;
        let gammas = (0..job.config.m).map(|j| (j + 1) as f64 * (10.0 - h.powf(self.0))).collect();
        Ok(LevelOutcome { coarse_h: None, h, gammas, residuals: vec![0.0; job.config.m], lower_bound_regime: None })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn order_recovers_geometric_rates(p in 0.5f64..4.0, c in 1.0f64..100.0, h in 0.1f64..0.5) {
        let g = |h: f64| c - h.powf(p);
        let o = compute_order(g(h), g(h / 2.0), g(h / 4.0)).unwrap();
        prop_assert!((o - p).abs() < 1e-6);
    }
}

#[test]
fn registered_methods_flow_through_the_report() {
    let mut methods = MethodRegistry::with_builtins();
    methods.register(Box::new(Synthetic(3.0)));
    assert!(methods.names().contains(&"synthetic"));
    let cfg = config(r#"{"method": "synthetic", "domain": "unit_square", "nu": [0.3], "levels": [4, 8, 16], "m": 2}"#);
    let result = run_study_with(&cfg, &RunOptions::default(), &methods, &EigenSolverRegistry::with_builtins()).unwrap();
    let csv = to_csv(&result);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], CSV_HEADER);
    assert_eq!(rows.len(), 1 + 3 * 2);
    for row in &rows[1..] {
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
    }
    assert!(rows[5].ends_with(",3.00,↗,"), "{}", rows[5]);
    let md = to_markdown(&result);
    assert!(md.contains("| h | 1/4 | 1/8 | 1/16 | Order | Trend |"), "{md}");
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let cfg = config(r#"{"method": "wg_direct", "domain": "l_shape", "nu": [0.3, 0.49], "k": 1, "levels": [2, 4], "m": 3}"#);
    let one = RunOptions { threads: Some(1), ..Default::default() };
    let a = to_csv(&run_study(&cfg, &one).unwrap());
    let b = to_csv(&run_study(&cfg, &one).unwrap());
    let c = to_csv(&run_study(&cfg, &RunOptions { threads: Some(2), ..Default::default() }).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn residuals_meet_the_tolerance_below_the_locking_limit() {
    for method in ["wg_direct", "ecr"] {
        let cfg = config(&format!(
            r#"{{"method": "{method}", "domain": "unit_square", "nu": [0.3, 0.4999], "levels": [4, 8], "m": 4, "tol": 1e-9}}"#
        ));
        let result = run_study(&cfg, &RunOptions::default()).unwrap();
        assert!(!result.has_failures());
        for block in &result.blocks {
            for rec in &block.levels {
                let o = rec.outcome.as_ref().unwrap();
                assert!(o.residuals.iter().all(|&r| r <= 1e-9), "{method} nu={} {:?}", block.nu, o.residuals);
            }
        }
    }
}

#[test]
fn two_grid_markdown_lists_level_pairs() {
    let cfg = config(
        r#"{"method": "wg_two_grid", "domain": "unit_square", "nu": [0.3], "k": 1,
            "levels": [2, {"coarse": 4, "refinements": 1}], "m": 2, "format": "markdown"}"#,
    );
    let result = run_study(&cfg, &RunOptions::default()).unwrap();
    let md = to_markdown(&result);
    assert!(md.contains("| H / h | 1/2 / 1/4 | 1/4 / 1/8 | Order | Trend |"), "{md}");
    assert_eq!(md.lines().filter(|l| l.starts_with("| ω")).count(), 2);
    // two levels leave the order undefined
    assert!(md.lines().filter(|l| l.starts_with("| ω")).all(|l| l.contains("| — |")));
    assert!(md.contains("Lower-bound regime per level:"));
}

#[test]
fn solver_failures_are_reported_per_cell() {
    let cfg = config(r#"{"method": "wg_direct", "domain": "unit_square", "nu": [0.3], "levels": [1, 2], "m": 20}"#);
    let result = run_study(&cfg, &RunOptions::default()).unwrap();
    let failed: Vec<usize> = result.failures().map(|(_, rec, _)| rec.index).collect();
    assert_eq!(failed, vec![0]);
    assert!(to_csv(&result).contains("ERROR: "));
}

#[test]
fn configuration_errors_come_before_any_solve() {
    let bad = [
        r#"{"method": "wg_direct", "domain": "unit_square", "nu": [], "levels": [2]}"#,
        r#"{"method": "wg_direct", "domain": "unit_square", "nu": [0.5], "levels": [2]}"#,
        r#"{"method": "nope", "domain": "unit_square", "nu": [0.3], "levels": [2]}"#,
        r#"{"method": "ecr", "domain": "unit_square", "dirichlet_spec": "bottom", "nu": [0.3], "levels": [2]}"#,
        r#"{"method": "wg_two_grid", "domain": "unit_square", "nu": [0.3], "levels": [{"coarse": 2, "refinements": 0}]}"#,
    ];
    for text in bad {
        let err = run_study(&config(text), &RunOptions::default()).unwrap_err();
        assert!(err.is_config_error(), "{text}: {err}");
    }
    let ok = config(r#"{"method": "wg_direct", "domain": "unit_square", "nu": [0.3], "levels": [2]}"#);
    let err = run_study(&ok, &RunOptions { eigensolver: "arpack".into(), ..Default::default() }).unwrap_err();
    assert!(err.is_config_error());
}
