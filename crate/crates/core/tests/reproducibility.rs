use simcmc::sampler::Checkpoint;
use simcmc::ssm::{prior_path, simulate, Filtering, Kitagawa, LinearGaussianOptimal, LinearGaussianSpec};
use simcmc::{Interaction, Simcmc, SimcmcConfig};

fn lg_model(p: usize) -> (LinearGaussianOptimal, simcmc::Path<Vec<f64>>) {
    let spec = LinearGaussianSpec::random(2, 2.0, 0.5, 3).unwrap();
    let ys = simulate(&spec, p, 8)
        .observations
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let mut rng = simcmc::rng::substream(8, 1);
    let init = prior_path(&spec, p, &mut rng);
    (LinearGaussianOptimal::new(spec, ys), init)
}

#[test]
fn shortcut_gives_identical_reservoirs() {
    let (model, init) = lg_model(10);
    let run = |shortcut: bool, interaction: Interaction| {
        let cfg = SimcmcConfig {
            accept_before_sample: shortcut,
            interaction,
            ..SimcmcConfig::with_seed(17)
        };
        let mut s = Simcmc::nested(&model, cfg, init.clone()).unwrap();
        s.run(10_000);
        s
    };
    for mode in [Interaction::Sequential, Interaction::ParallelLagged] {
        let a = run(true, mode);
        let b = run(false, mode);
        for n in 1..=10 {
            let (ra, rb) = (a.reservoir(n).unwrap(), b.reservoir(n).unwrap());
            assert!(ra.blocks_from(0).eq(rb.blocks_from(0)));
        }
        assert_eq!(a.norm_const_estimates(), b.norm_const_estimates());
        assert_eq!(a.acceptance_rates(), b.acceptance_rates());
    }
}

#[test]
fn same_seed_same_run() {
    let (model, init) = lg_model(5);
    let run = |seed| {
        let mut s = Simcmc::nested(&model, SimcmcConfig::with_seed(seed), init.clone()).unwrap();
        s.run(500);
        s.checkpoint()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn checkpoint_resumes_exactly() {
    let model = Filtering::new(
        Kitagawa::new(5.0, 5.0),
        simulate(&Kitagawa::new(5.0, 5.0), 12, 4).observations,
    );
    let mut rng = simcmc::rng::substream(4, 2);
    let init = prior_path(model.model(), 12, &mut rng);
    let cfg = SimcmcConfig {
        burn_in: 100,
        diagnose_weights: true,
        ..SimcmcConfig::with_seed(5)
    };
    let mut whole = Simcmc::nested(&model, cfg.clone(), init.clone()).unwrap();
    whole.run(1000);

    let mut first = Simcmc::nested(&model, cfg, init).unwrap();
    first.run(400);
    let json = first.checkpoint().to_json().unwrap();
    drop(first);
    let restored = Checkpoint::<f64>::from_json(&json).unwrap();
    let mut resumed = Simcmc::restore(&model, restored).unwrap();
    resumed.run(600);

    assert_eq!(resumed.checkpoint(), whole.checkpoint());
    assert_eq!(resumed.iteration(), 1000);
    assert_eq!(
        resumed.expectation(12, |x| *x).unwrap(),
        whole.expectation(12, |x| *x).unwrap()
    );
}

#[test]
fn full_path_checkpoint_round_trips() {
    let (model, init) = lg_model(4);
    let cfg = SimcmcConfig {
        storage: simcmc::StorageMode::FullPath,
        ..SimcmcConfig::with_seed(6)
    };
    let mut a = Simcmc::nested(&model, cfg, init).unwrap();
    a.run(50);
    let cp = a.checkpoint();
    let mut b = Simcmc::restore(&model, Checkpoint::from_json(&cp.to_json().unwrap()).unwrap()).unwrap();
    a.run(50);
    b.run(50);
    assert_eq!(a.checkpoint(), b.checkpoint());
    assert_eq!(
        a.expectation_path(4, |xs| xs[0][0]).unwrap(),
        b.expectation_path(4, |xs| xs[0][0]).unwrap()
    );
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    assert!(Checkpoint::<f64>::from_json("{").is_err());
    let (model, init) = lg_model(3);
    let s = Simcmc::nested(&model, SimcmcConfig::default(), init).unwrap();
    let mut cp = s.checkpoint();
    cp.format = "other".into();
    assert!(Checkpoint::<Vec<f64>>::from_json(&cp.to_json().unwrap()).is_err());
    let mut cp = s.checkpoint();
    cp.levels.pop();
    assert!(Simcmc::restore(&model, cp).is_err());
}
