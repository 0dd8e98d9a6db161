use std::time::Instant;

use rail::config::{Mode, RunConfig};
use rail::envs::{ConstantPolicy, GreedyGoalPolicy};
use rail::trainer::{evaluate, reference_mean_cost, train_expert, NoHooks};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let env_id = args.get(2).map(|s| s.as_str()).unwrap_or("point_goal");

    let mut cfg = RunConfig::for_env(env_id);
    cfg.train.mode = Mode::Expert;
    cfg.train.iterations = iters;
    cfg.train.seed = 0;
    let config = cfg.resolve().unwrap();

    let zero = reference_mean_cost(&config.env, &ConstantPolicy { action: vec![0.0, 0.0] }, 50, 123).unwrap();
    let greedy = reference_mean_cost(&config.env, &GreedyGoalPolicy::default(), 50, 123).unwrap();
    println!("zero-action mean cost: {zero:.3}, greedy mean cost: {greedy:.3}");

    let t0 = Instant::now();
    let out = train_expert(&config, &mut NoHooks).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("trained {} iters in {:.1}s ({:.2} s/iter), diverged: {:?}", iters, dt, dt / iters as f64, out.diverged);
    for log in out.logs.iter().step_by((iters / 10).max(1)) {
        println!("  iter {:3}  mean {:8.3}  cvar {:8.3}  kl {:.4}  accepted {}", log.iteration, log.mean_true_cost, log.cvar_true, log.kl, log.accepted);
    }
    let costs = evaluate(&out.policy, &config.env, 50, 999).unwrap();
    let mean: f64 = costs.iter().sum::<f64>() / costs.len() as f64;
    println!("eval mean {mean:.3} vs zero baseline {zero:.3} ratio {:.3}", mean / zero);
}
