"""Stir a simulated batter, then read its level and water-flour ratio from push torques."""
import numpy as np

from batterbot import sim
from batterbot.eval import train_ratio_model
from batterbot.perception import perceive, stir_until_uniform

params = sim.SurrogateParams()
model = train_ratio_model(params, seed=0)

rng = np.random.default_rng(7)
for bowl_name, bowl in (("small", sim.SMALL_BOWL), ("large", sim.LARGE_BOWL)):
    truth = sim.BatterTruth(float(rng.uniform(1.0, 1.5)), float(rng.uniform(0.01, 0.05)), bowl=bowl)
    stirred = stir_until_uniform(truth, params, rng_seed=1)
    torques = ", ".join(f"{t * 1e3:.2f}" for t in stirred.monitor.trial_torques)
    print(f"{bowl_name} bowl: stopped after trial {stirred.stop_trial} (torques {torques} mN*m)")
    p = perceive(stirred.truth, params, model, rng_seed=2)
    print(f"  level {p.level.level * 1e3:.2f} mm (true {truth.level * 1e3:.2f} mm)")
    print(f"  ratio {p.ratio:.3f} (true {truth.ratio:.3f})")
