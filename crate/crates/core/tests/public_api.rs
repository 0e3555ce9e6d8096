use bralev_core::branching::{cluster_pmf, sample_cluster_size, ClusterMode};
use bralev_core::limit::{max_law_cdf, sample_limit_process};
use bralev_core::normalization::compute_h;
use bralev_core::rng::replication_stream;
use bralev_core::tree::simulate_tree;
use bralev_core::{BranchingConfig, LimitSpec, MotionSpec};

#[test]
fn extremal_measure_tracks_the_rightmost_particle() {
    let cfg = BranchingConfig::yule(1.0).unwrap();
    let motion = MotionSpec::symmetric_stable(1.5, 1.0);
    let t = 4.0;
    let h = compute_h(cfg.lambda(), &motion.tail_scale().unwrap(), t).unwrap();
    for i in 0..20 {
        let mut rng = replication_stream(3, i);
        let tree = simulate_tree(&cfg, &motion, t, &mut rng).unwrap();
        let measure = tree.extremal_measure(h);
        assert_eq!(measure.total_mass(), tree.population());
        let rightmost = tree.alive_positions().into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(measure.order_statistics(1)[0], rightmost / h);
    }
}

#[test]
fn limit_maximum_matches_its_closed_form() {
    let cfg = BranchingConfig::yule(1.0).unwrap();
    let spec = LimitSpec::from_model(&cfg, &MotionSpec::symmetric_stable(1.5, 1.0)).unwrap();
    assert!((max_law_cdf(&spec, 1.0).unwrap() - 0.6).abs() < 1e-12);
    let n = 20_000;
    let mut rng = replication_stream(11, 0);
    let below = (0..n)
        .filter(|_| sample_limit_process(&spec, 0.5, &mut rng).unwrap().order_statistics(1)[0] <= 1.0)
        .count();
    let p = below as f64 / n as f64;
    assert!((p - 0.6).abs() < 4.0 * (0.24 / n as f64).sqrt(), "{p}");
}

#[test]
fn cluster_sizes_follow_the_tabulated_law() {
    let cfg = BranchingConfig::yule(1.0).unwrap();
    let pmf = cluster_pmf(&cfg, 3).unwrap();
    let n = 20_000;
    let mut rng = replication_stream(5, 0);
    let mut ones = 0;
    for _ in 0..n {
        if sample_cluster_size(&cfg, ClusterMode::Auto, &mut rng).unwrap() == 1 {
            ones += 1;
        }
    }
    let p = ones as f64 / n as f64;
    assert!((pmf[0] - 0.5).abs() < 1e-9);
    assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{p}");
}
