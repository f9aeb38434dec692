"""Train one multi-section VQ model per user and identify test signatures.

Each signature is split into time sections; every section gets its own
LBG codebook. A test signature is assigned to the user whose codebooks
quantize it with the least distortion.

    python3 demos/03_vq_identification.py
"""

import numpy as np

from stylusnorm import evaluation as ev
from stylusnorm import vq
from stylusnorm.dataio import SyntheticConfig, synth_database

db = synth_database(SyntheticConfig(n_users=12, n_train=5, n_test=3, seed=11))
models = [vq.train_user_model(train, s=2, bits=5, user_id=u) for u, (train, _) in db.items()]
print(f"{len(models)} users, {models[0].s} sections x {2 ** models[0].bits} centroids")

# Codebook training never increases distortion from one iteration to the next.
hist = models[0].codebooks[0].history[-1]
print(f"last LBG stage distortion: {hist[0]:.1f} -> {hist[-1]:.1f} over {len(hist)} iterations")

trials = [(u, sig) for u, (_, test) in db.items() for sig in test]
rate = ev.identification_rate(models, trials)
print(f"identification rate: {100 * rate:.1f}% on {len(trials)} signatures")

# Verification scores: own model (genuine) against other users' models (random forgeries).
genuine, impostor = [], []
for u, sig in trials:
    for m in models:
        (genuine if m.user_id == u else impostor).append(vq.score(m, sig))
curve = ev.far_frr_sweep(ev.ScoreSet(genuine, impostor))
value, thr = ev.min_dcf(curve)
print(f"min DCF {100 * value:.2f}% at threshold {thr:.1f}, EER {100 * ev.eer(curve):.2f}%")
print(f"median genuine score {np.median(genuine):.1f}, impostor {np.median(impostor):.1f}")
