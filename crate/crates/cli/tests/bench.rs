use predint_cli::bench::{self, BenchConfig, BenchKind};
use predint_core::complexity::CompressorSpec;

fn check_doubling(kind: BenchKind) {
    let config = BenchConfig {
        kind,
        points: 4,
        runs: 20,
        start: 4000,
        seed: 1,
    };
    let report = bench::run(&config, &CompressorSpec::default()).unwrap();
    assert_eq!(report.points.len(), 4);
    for w in report.points.windows(2) {
        assert_eq!(w[1].predictions, 2 * w[0].predictions);
        let ratio = w[1].mean_seconds / w[0].mean_seconds;
        assert!((1.6..=2.6).contains(&ratio), "{kind:?} ratio {ratio}");
        assert!(w[0].sd_seconds >= 0.0);
    }
    assert!(report.fit.r_squared >= 0.95, "{}", report.fit.r_squared);
    assert_eq!(report.to_csv().lines().count(), 5);
}

#[test]
fn doubling_predictions_doubles_time() {
    check_doubling(BenchKind::Maze);
    check_doubling(BenchKind::Series);
}
