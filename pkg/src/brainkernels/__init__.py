"""Graph-kernel classification of multivariate time-series recordings.

Per-subject similarity graphs (correlation, RBF, PCA+RBF, l1 sparse coding,
persistence of delay embeddings) are compared with Weisfeiler-Lehman and
shortest-path graph kernels or vectorized baselines, and evaluated with a
kernel SVM under leave-one-out cross-validation.
"""

__version__ = "0.1.0"
