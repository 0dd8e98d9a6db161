use std::time::Instant;
use rail::config::{Mode, RunConfig};
use rail::disc::{DiscBatch, Discriminator, Normalizer};
use rail::envs::rollout_batch;
use rail::policy::GaussianPolicy;
use rail::numerics::ParamVector;
use rail::rng::{stream_rng, Stream};
use rail::trainer::{train_expert, NoHooks};
use rail::trpo::{fisher_vector_product, ValueBaseline};

fn main() {
    let mut cfg = RunConfig::for_env("point_goal");
    cfg.train.mode = Mode::Expert;
    cfg.train.iterations = 0;
    let config = cfg.resolve().unwrap();
    let out = train_expert(&config, &mut NoHooks).unwrap();
    let policy = out.policy;

    let seeds: Vec<u64> = (0..20).collect();
    let t0 = Instant::now();
    let trajs = rollout_batch(&config.env, &policy, &seeds).unwrap();
    println!("rollouts: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    let states: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.transitions.iter().map(|tr| tr.state.clone())).collect();
    println!("states: {}", states.len());

    // forward pass batch
    let t0 = Instant::now();
    for s in &states { let _ = policy.mean(s).unwrap(); }
    println!("1000 forwards serial: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    // log_prob_grad batch
    let mut acc = ParamVector::zeros(policy.param_count());
    let t0 = Instant::now();
    for (s, t) in states.iter().zip(trajs.iter().flat_map(|t| t.transitions.iter())) {
        policy.log_prob_grad_into(s, &t.action, 1.0, acc.as_mut_slice()).unwrap();
    }
    println!("1000 logp grads serial: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    // FVP
    let v = ParamVector::from_vec((0..policy.param_count()).map(|i| (i as f64).sin()).collect());
    let sub: Vec<Vec<f64>> = states.iter().step_by(4).cloned().collect();
    let t0 = Instant::now();
    for _ in 0..11 { let _ = fisher_vector_product(&policy, &sub, &v, 0.1).unwrap(); }
    println!("11 FVPs over {} states: {:.0} ms", sub.len(), t0.elapsed().as_secs_f64()*1e3);

    // baseline fit
    let mut baseline = ValueBaseline::new(4, vec![100,100], 0.01, 5, &mut stream_rng(0, Stream::BaselineInit)).unwrap();
    let targets: Vec<f64> = (0..states.len()).map(|i| i as f64 * 0.01).collect();
    let t0 = Instant::now();
    baseline.fit(&states, &targets).unwrap();
    println!("baseline fit 5 epochs: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    // disc gradient
    let norm = Normalizer::identity(6);
    let disc = Discriminator::new(4, 2, vec![100,100], norm, &mut stream_rng(0, Stream::DiscInit)).unwrap();
    let batch = DiscBatch::from_trajectories(&trajs, &trajs).unwrap();
    let t0 = Instant::now();
    let _ = disc.gail_gradient(&batch).unwrap();
    println!("disc gradient (2000 pairs): {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    // surrogate-like: 1000 log_probs
    let t0 = Instant::now();
    let _lps: Vec<f64> = rail::parallel::indexed_map(states.len(), |i| {
        policy.log_prob(&states[i], &trajs[i/50].transitions[i%50].action).unwrap()
    });
    println!("1000 log_probs parallel: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);

    let p2 = GaussianPolicy::new(4, 2, vec![100,100], &mut stream_rng(9, Stream::PolicyInit)).unwrap();
    let t0 = Instant::now();
    let _ = GaussianPolicy::kl_mean(&policy, &p2, &states).unwrap();
    println!("KL over 1000 states: {:.0} ms", t0.elapsed().as_secs_f64()*1e3);
}
