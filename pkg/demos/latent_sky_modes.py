"""
Low-rank structure in flattened sky states
==========================================

"""

import numpy as np

# flattened "sky state" rows: many more pixels than snapshots, the
# setting where the Gram-matrix route pays off. Two latent weather
# modes plus pixel noise.
rng = np.random.default_rng(8)
pixels, snapshots = 4096, 60
modes = rng.normal(size=(2, pixels))
amplitude = rng.normal(size=(snapshots, 2)) * np.array([5.0, 2.0])
X = amplitude @ modes + rng.normal(0, 0.05, size=(snapshots, pixels))

from skycast.latent import gmm_fit, pca_fit, pca_project

model = pca_fit(X, k=4)
print("explained variance ratio", np.round(model.explained_variance_ratio, 4))

# nearly everything lives in the first two components
scores = pca_project(model, X)
print("score std per component ", np.round(scores.std(axis=0, ddof=1), 2))

# cluster the 2-d scores; with two amplitude regimes planted below,
# the mixture sorts the snapshots cleanly
amp2 = np.concatenate([rng.normal(size=(80, 2)) * 0.3 + [-4, 0],
                       rng.normal(size=(80, 2)) * 0.3 + [4, 1]])
X2 = amp2 @ modes + rng.normal(0, 0.05, size=(160, pixels))
s2 = pca_project(pca_fit(X2, k=2), X2)[:, :2]

gmm = gmm_fit(s2, k=2, seed=0)
print("mixture weights         ", np.round(gmm.weights, 3))
print("log-likelihood improved ",
      round(gmm.log_likelihoods[-1] - gmm.log_likelihoods[0], 1),
      "over", len(gmm.log_likelihoods), "iterations")
labels = gmm.predict(s2)
print("cluster sizes           ", np.bincount(labels).tolist())
