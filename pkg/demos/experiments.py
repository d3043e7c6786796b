"""Run the line, round and perception experiments and print their aggregates."""
from batterbot import sim
from batterbot.control import speed_dataset, time_dataset, train_control_model
from batterbot.eval import (
    run_line_experiment,
    run_perception_experiment,
    run_round_experiment,
    train_ratio_model,
)

params = sim.SurrogateParams()
ratio_model = train_ratio_model(params, seed=0)
speed = train_control_model(speed_dataset(params, seed=0), "speed")[0]
timing = train_control_model(time_dataset(params, seed=0), "time")[0]

reports = [
    run_perception_experiment(ratio_model, seed=0, params=params),
    run_line_experiment(speed, seed=0, params=params, ratio_model=ratio_model),
    run_round_experiment(timing, seed=0, params=params, ratio_model=ratio_model),
]
for rep in reports:
    print(rep.experiment)
    for key, agg in rep.aggregates().items():
        print(f"  {key:18s} n={agg['n']:3d}  error {agg['mean_pct_error']:7.2%}  "
              f"spread {agg['pct_variance']:6.2%}")
