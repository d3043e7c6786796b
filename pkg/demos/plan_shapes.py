"""Plan trajectories for the built-in fixture shapes and write SVG previews."""
import sys
from pathlib import Path

from batterbot.fixtures import FIXTURES, fixture
from batterbot.planner import classify_shape, plan_trajectory

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
for name in FIXTURES:
    mask = fixture(name)
    traj = plan_trajectory(mask, 0.01)
    mode = classify_shape(mask, 0.01 / mask.scale).value
    length = sum(s.length for s in traj.strokes)
    (out / f"{name}.svg").write_text(traj.to_svg())
    print(f"{name:8s} {mode:8s} {len(traj):2d} strokes, {length * 100:.1f} cm of batter path")
print(f"previews in {out}/")
