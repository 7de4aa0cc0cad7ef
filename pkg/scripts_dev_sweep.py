import sys
import time

from hytl.harness import RunConfig, train

tag, hidden, ratio, lr, batch = (
    sys.argv[1], int(sys.argv[2]), float(sys.argv[3]), float(sys.argv[4]), int(sys.argv[5])
)
cfg = RunConfig(
    task="ReachPoint", seed=0, total_env_steps=30000, eval_interval=1000,
    eval_episodes=10, warmup_env_steps=500, batch_size=batch,
    updates_per_env_step=ratio, early_stop_success=0.9,
    alpha_k=0.02, alpha_p=0.02, random_env_steps=4000, hidden=hidden, lr=lr,
)
t0 = time.time()
res = train(cfg, f"/tmp/sweep_run_{tag}")
print(f"{tag}: steps={res.env_steps} wall={time.time()-t0:.0f}s success={res.final_eval_success}")
print(open(res.eval_path).read())
