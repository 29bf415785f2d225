#!/usr/bin/env python3
"""The comparison embeddings: random projections, CCA, kernel CCA, and the
direct state regressor, fitted on the same paired data."""
import numpy as np

from morphtransfer import baselines
from morphtransfer.embedding import PairSet

# synthetic paired data with a shared 3-dim latent cause
rng = np.random.default_rng(0)
Z = rng.normal(size=(300, 3))
X = Z @ rng.normal(size=(3, 6)) + 0.2 * rng.normal(size=(300, 6))
Y = np.tanh(Z @ rng.normal(size=(3, 8))) + 0.2 * rng.normal(size=(300, 8))
pairs = PairSet(source=X, target=Y)

cca = baselines.cca_fit(X, Y, feature_dim=3, reg=1e-3)
print("CCA canonical correlations:", np.round(cca.correlations, 3))

for kind in ("linear", "quad", "rbf"):
    kcca = baselines.kcca_fit(X, Y, kind=kind, feature_dim=3)
    print(f"KCCA ({kind:6s}) correlations:", np.round(kcca.correlations, 3))

proj = baselines.random_projection(6, 8, 3, seed=1)
zx = proj.embed_source(X)
print("\nrandom projection feature variance:", np.round(np.var(zx, axis=0), 3))

mapping = baselines.fit_direct_mapping(pairs, epochs=100, seed=0)
pred = mapping.predict(X)
err = np.mean(np.linalg.norm(pred - Y, axis=1))
print(f"direct mapping: mean prediction error {err:.3f} "
      f"(loss {mapping.loss_history[0]:.3f} -> {mapping.loss_history[-1]:.3f})")
