use trustbeta_core::env::{reset, rollout, synth_demo, task_success, TaskConfig};
use trustbeta_core::learning::{random_trajectories, train_stage2, trajectory_reward, TrainConfig};
use trustbeta_core::rng::{seeded_rng, stream_for};

fn main() {
    let task = TaskConfig::default();
    for (lr, m) in [(3e-4, 32usize), (3e-4, 64), (1e-3, 64), (1e-3, 128), (3e-4, 128)] {
        for demo_seed in [7001u64, 42, 101] {
            let mut rng = seeded_rng(demo_seed);
            let demos: Vec<_> = (0..30)
                .map(|_| {
                    let s0 = reset(&task, &mut rng).unwrap();
                    synth_demo(&s0, &task, &mut rng, 0.01).unwrap()
                })
                .collect();
            let config = TrainConfig {
                epochs: 200,
                seed: demo_seed + 1,
                maxent_steps_per_epoch: 1,
                reward_learning_rate: lr,
                rollouts_per_epoch: m,
                ..TrainConfig::default()
            };
            let t0 = std::time::Instant::now();
            let result = train_stage2(&demos, &task, &config).unwrap();
            let dt = t0.elapsed().as_secs_f64();

            let mut rng2 = stream_for(7004, "discrimination");
            let mut rng3 = seeded_rng(7005);
            let randoms = random_trajectories(&task, 100, &mut rng2).unwrap();
            let fresh: Vec<_> = (0..100)
                .map(|_| {
                    let s0 = reset(&task, &mut rng3).unwrap();
                    synth_demo(&s0, &task, &mut rng3, 0.01).unwrap()
                })
                .collect();
            let wins = fresh
                .iter()
                .zip(&randoms)
                .filter(|(d, r)| {
                    trajectory_reward(&result.reward, d).unwrap()
                        > trajectory_reward(&result.reward, r).unwrap()
                })
                .count();

            let mut rng4 = stream_for(7003, "held-out-starts");
            let succ = (0..10)
                .filter(|_| {
                    let s0 = reset(&task, &mut rng4).unwrap();
                    let t = rollout(&result.policy, &s0, &task, &mut rng4, false).unwrap();
                    task_success(&t, &task)
                })
                .count();
            println!(
                "lr {lr:.0e} M {m} demo_seed {demo_seed}: wins {wins}/100 success {succ}/10 ({dt:.0}s)"
            );
        }
    }
}
