//! End-to-end continuous pipeline checks.

use rand::Rng;

use dpsynth::continuous::{
    discretize, pipeline_bound, release_continuous, ContinuousDatabase, ContinuousPipeline, LipschitzFunction,
    LipschitzQuery,
};
use dpsynth::RandomSource;

#[test]
fn heterogeneous_lipschitz_query_stays_within_leading_term() {
    let n = 512;
    let rng = RandomSource::from_seed(17);
    let mut r = rng.rng();
    let x = ContinuousDatabase::new((0..n).map(|_| r.gen::<f64>()).collect()).unwrap();
    let f = LipschitzFunction::new(|u| u, 1.0, 0.0, 1.0).unwrap();
    let h = LipschitzFunction::new(|u| (u - 0.5).abs(), 1.0, 0.0, 0.5).unwrap();
    let q = LipschitzQuery::new(vec![f, h], (0..n).map(|i| i % 2).collect()).unwrap();
    let truth = q.evaluate(&x).unwrap();
    let pipeline = ContinuousPipeline::new(&q, n, 1.0).unwrap();
    let trials = 4000;
    let mse = (0..trials)
        .map(|t| (pipeline.release(&x, &rng.child(t)).unwrap().estimate - truth).powi(2))
        .sum::<f64>()
        / trials as f64;
    let bound = pipeline_bound(&q, 1.0).unwrap();
    assert!(mse <= 1.25 * bound, "MSE {mse} vs {bound}");
}

#[test]
fn discretization_and_release_shapes() {
    let x = ContinuousDatabase::new(vec![0.0, 0.26, 0.5, 0.99, 1.0]).unwrap();
    let d = discretize(&x, 2).unwrap();
    assert_eq!(d.universe().bits(), 2);
    assert_eq!(d.rows(), &[0, 1, 2, 3, 3]);
    let q = LipschitzQuery::uniform(LipschitzFunction::new(|u| u, 1.0, 0.0, 1.0).unwrap(), 5).unwrap();
    let out = release_continuous(&x, &q, 1.0, &RandomSource::from_seed(1)).unwrap();
    assert!(out.estimate.is_finite());
    assert!(release_continuous(&x, &q, 0.0, &RandomSource::from_seed(1)).is_err());
}
