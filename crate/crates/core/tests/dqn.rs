use coded_edge::dqn::{
    combine_max, combine_mean, train_dueling, train_plain_dqn, Architecture, QNetwork, Sample, TrainConfig,
};
use coded_edge::policy::masked_argmax;
use coded_edge::rng::{derive, stream};
use coded_edge::sim::TwoArmedBandit;
use coded_edge::{ActionMask, EdgeEnv, SystemConfig};
use rand::Rng;

fn random_input(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.5)).collect()
}

fn argmax(v: &[f64]) -> usize {
    masked_argmax(v, &ActionMask::all(v.len())).unwrap()
}

#[test]
fn dueling_streams_are_identifiable() {
    let mut rng = derive(10, stream::LEARNER);
    for trial in 0..1000 {
        let net = QNetwork::dueling(7, 16, 81, &mut rng).unwrap();
        let x = random_input(&mut rng, 7);
        let out = net.forward(&x).unwrap();
        let mean_adv = out.q.iter().map(|q| q - out.value).sum::<f64>() / 81.0;
        assert!(mean_adv.abs() < 1e-6, "trial {trial}: {mean_adv}");
        let qmax = net.forward_max_variant(&x).unwrap();
        assert_eq!(argmax(&out.q), argmax(&qmax));
        assert!((qmax[argmax(&qmax)] - out.value).abs() < 1e-9);
        assert_eq!(net.q_values(&x).unwrap(), out.q);
    }
}

#[test]
fn combine_functions_on_fixed_values() {
    assert_eq!(combine_mean(1.0, &[1.0, -1.0]), vec![2.0, 0.0]);
    assert_eq!(combine_max(1.0, &[1.0, -1.0]), vec![1.0, -1.0]);
    assert_eq!(combine_mean(-3.0, &[0.5; 4]), vec![-3.0; 4]);
}

fn gradient_check(arch: Architecture, batches: usize) -> f64 {
    let mut rng = derive(99, stream::LEARNER);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..batches {
        let net = QNetwork::new(arch, 7, 16, 81, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..16).map(|_| random_input(&mut rng, 7)).collect();
        let batch: Vec<Sample<'_>> = inputs
            .iter()
            .map(|x| Sample {
                features: x,
                action: rng.gen_range(0..81),
                target: rng.gen_range(-2.0..2.0),
            })
            .collect();
        let (_, grad) = net.loss_and_gradient(&batch).unwrap();
        let mut probe = net.clone();
        for i in 0..grad.len() {
            let w = net.params()[i];
            probe.params_mut()[i] = w + h;
            let up = probe.loss(&batch).unwrap();
            probe.params_mut()[i] = w - h;
            let down = probe.loss(&batch).unwrap();
            probe.params_mut()[i] = w;
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    let d = gradient_check(Architecture::Dueling, 4);
    let p = gradient_check(Architecture::Plain, 4);
    assert!(d <= 1e-4, "dueling worst relative error {d}");
    assert!(p <= 1e-4, "plain worst relative error {p}");
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let mut rng = derive(3, stream::LEARNER);
    for arch in [Architecture::Dueling, Architecture::Plain] {
        let net = QNetwork::new(arch, 7, 16, 81, &mut rng).unwrap();
        let dir = std::env::temp_dir().join(format!("qnet-{}-{}", std::process::id(), arch.as_str()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.txt");
        net.save(&path).unwrap();
        let back = QNetwork::load(&path).unwrap();
        assert_eq!(back, net);
        let x = random_input(&mut rng, 7);
        assert_eq!(back.q_values(&x).unwrap(), net.q_values(&x).unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }
    assert!(QNetwork::load(std::path::Path::new("/nonexistent/net.txt")).is_err());
}

fn bandit_config() -> TrainConfig {
    TrainConfig {
        iterations: 10_000,
        eval_every: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn both_networks_solve_the_bandit() {
    for seed in 0..3 {
        let mut env = TwoArmedBandit::default();
        let d = train_dueling(&mut env, &bandit_config(), seed).unwrap();
        assert_eq!(argmax(&d.net.q_values(&[1.0]).unwrap()), 0, "dueling seed {seed}");
        let p = train_plain_dqn(&mut env, &bandit_config(), seed).unwrap();
        assert_eq!(argmax(&p.net.q_values(&[1.0]).unwrap()), 0, "dqn seed {seed}");
    }
}

#[test]
fn training_on_the_edge_env_is_deterministic() {
    let cfg = TrainConfig {
        iterations: 600,
        eval_every: 200,
        eval_slots: 100,
        ..TrainConfig::default()
    };
    let run = || {
        let mut env = EdgeEnv::new(SystemConfig::default(), 17).unwrap();
        train_dueling(&mut env, &cfg, 17).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.net, b.net);
    assert_eq!(a.curve.len(), 4);
    assert_eq!(
        a.curve.iter().map(|c| c.eval_reward).collect::<Vec<_>>(),
        b.curve.iter().map(|c| c.eval_reward).collect::<Vec<_>>()
    );
    assert!(a.curve.iter().all(|c| c.eval_reward <= 0.0 && c.eval_reward >= -10.0));
}
