use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mstrel::experiment::{run_cell, run_experiment, ExperimentConfig, Mixing, TieRuleKind};
use mstrel::ingest::load_fixture;
use mstrel::metrics::confusion;
use mstrel::mst::kruskal_mst;
use mstrel::sampling::{sample_mixture, MeanVector, MixtureModel, SeedSpec};
use mstrel::similarity::{estimate, MeanMode, NetworkKind};

fn config(n: usize, s: usize, grid: &[f64]) -> ExperimentConfig {
    let model = MixtureModel::new(
        MeanVector::zeros(10),
        load_fixture("paper10").unwrap(),
        0.0,
        3,
    )
    .unwrap();
    let mut c = ExperimentConfig::new(model, n);
    c.replications = s;
    c.epsilon_grid = grid.to_vec();
    c
}

#[test]
fn identical_configs_give_identical_reports() {
    let c = config(25, 40, &[0.0, 0.3, 1.0]);
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.cells, b.cells);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.true_tree, b.true_tree);
}

#[test]
fn more_observations_mean_fewer_false_edges() {
    let grid = [0.0, 0.5, 1.0];
    let small = run_experiment(&config(10, 200, &grid)).unwrap();
    let large = run_experiment(&config(1000, 200, &grid)).unwrap();
    for (a, b) in small.cells.iter().zip(&large.cells) {
        assert_eq!((&a.network, a.epsilon), (&b.network, b.epsilon));
        assert!(
            b.aggregate.mean_fdr < a.aggregate.mean_fdr,
            "{} eps {}: n=1000 {} vs n=10 {}",
            a.network,
            a.epsilon,
            b.aggregate.mean_fdr,
            a.aggregate.mean_fdr
        );
    }
}

#[test]
fn reordering_observations_changes_no_tree() {
    let model = MixtureModel::new(
        MeanVector::zeros(10),
        load_fixture("paper10").unwrap(),
        0.5,
        3,
    )
    .unwrap();
    let kinds = [
        NetworkKind::Pearson,
        NetworkKind::Fechner(MeanMode::KnownMean),
        NetworkKind::Fechner(MeanMode::SampleMean),
        NetworkKind::Kendall,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for r in 0..20 {
        let sample = sample_mixture(&model, 60, SeedSpec::new(3, r)).unwrap();
        let mut perm: Vec<usize> = (0..60).collect();
        perm.shuffle(&mut rng);
        let shuffled = sample.permute_observations(&perm);
        for kind in kinds {
            let a = estimate(&sample, kind, Some(&model.mean)).unwrap();
            let b = estimate(&shuffled, kind, Some(&model.mean)).unwrap();
            let (ta, _) = kruskal_mst(&a).unwrap();
            let (tb, _) = kruskal_mst(&b).unwrap();
            assert_eq!(ta, tb, "{kind} replication {r}");
            assert_eq!(confusion(&ta, &tb).unwrap().fp, 0);
        }
    }
}

#[test]
fn single_cell_matches_sweep_under_every_option() {
    for (tie, mixing) in [
        (TieRuleKind::Lexicographic, Mixing::PerObservation),
        (TieRuleKind::Random, Mixing::PerSample),
    ] {
        let mut c = config(12, 25, &[0.2, 0.7]);
        c.tie_rule = tie;
        c.mixing = mixing;
        let report = run_experiment(&c).unwrap();
        let cell = run_cell(&c, NetworkKind::Kendall, 0.7).unwrap();
        assert_eq!(Some(&cell), report.cell("kendall", 0.7));
        assert_eq!(report.config.tie_rule, tie.as_str());
        assert_eq!(report.config.mixing, mixing.as_str());
    }
}

#[test]
fn synthetic_fixture_runs() {
    let model = MixtureModel::new(
        MeanVector::zeros(50),
        load_fixture("synthetic50").unwrap(),
        0.0,
        3,
    )
    .unwrap();
    let mut c = ExperimentConfig::new(model, 50);
    c.replications = 5;
    c.epsilon_grid = vec![0.0];
    let r = run_experiment(&c).unwrap();
    assert_eq!(r.true_tree.edges().len(), 49);
    assert!(r.cells.iter().all(|x| x.n_nodes == 50));
}
