"""Pour each fixture at several batter ratios and score the deposit against the image."""
from batterbot import sim
from batterbot.control import speed_dataset, train_control_model
from batterbot.eval import simulate_pour
from batterbot.fixtures import FIXTURES, fixture
from batterbot.planner import plan_trajectory

params = sim.SurrogateParams()
speed_model = train_control_model(speed_dataset(params, seed=0), "speed")[0]

print("shape    " + "  ".join(f"r={r:.2f}" for r in (1.25, 1.35, 1.45)))
for name in FIXTURES:
    mask = fixture(name)
    traj = plan_trajectory(mask, 0.01)
    scores = [simulate_pour(mask, traj, r, 0.03, speed_model, params)[2] for r in (1.25, 1.35, 1.45)]
    print(f"{name:8s} " + "  ".join(f"{s:6.3f}" for s in scores))
