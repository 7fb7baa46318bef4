"""Base classifiers behind a uniform fit / predict-probability interface.

The pipeline-level search only tunes which classifier runs in each phase,
never the classifiers' own hyperparameters, so each registry key maps to a
fixed factory with frozen defaults. Standard algorithms are backed by
scikit-learn; the cascade deep forest is implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis
from sklearn.ensemble import (
    AdaBoostClassifier,
    BaggingClassifier,
    ExtraTreesClassifier,
    GradientBoostingClassifier,
    HistGradientBoostingClassifier,
    RandomForestClassifier,
    RandomForestRegressor,
)
from sklearn.gaussian_process import GaussianProcessClassifier
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.model_selection import train_test_split
from sklearn.naive_bayes import BernoulliNB, GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier, ExtraTreeClassifier


class ClassifierError(ValueError):
    pass


class CascadeForest(BaseEstimator, ClassifierMixin):
    """Cascade-forest core of the deep forest design.

    Layers of (random forest + completely-random extra-trees) each append
    their class-probability vectors to the input features. Growth stops when
    a 20% validation split stops improving, capped at ``max_layers``. No
    multi-grained scanning.
    """

    def __init__(self, n_estimators=100, max_layers=5, random_state=0):
        self.n_estimators = n_estimators
        self.max_layers = max_layers
        self.random_state = random_state

    def _layer(self, seed):
        rf = RandomForestClassifier(
            n_estimators=self.n_estimators, random_state=seed, n_jobs=1
        )
        et = ExtraTreesClassifier(
            n_estimators=self.n_estimators,
            max_features=1,
            random_state=seed + 1,
            n_jobs=1,
        )
        return rf, et

    @staticmethod
    def _f_measure(y_true, y_pred):
        tp = np.sum((y_pred == 1) & (y_true == 1))
        fp = np.sum((y_pred == 1) & (y_true == 0))
        fn = np.sum((y_pred == 0) & (y_true == 1))
        if tp == 0:
            return 0.0
        prec = tp / (tp + fp)
        rec = tp / (tp + fn)
        return 2 * prec * rec / (prec + rec)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.classes_ = np.unique(y)
        # Too little data to split off validation: fall back to a single layer
        # trained on everything.
        stratify = y if np.min(np.bincount(y)) >= 2 else None
        if len(y) >= 10 and stratify is not None:
            X_tr, X_val, y_tr, y_val = train_test_split(
                X, y, test_size=0.2, random_state=self.random_state, stratify=stratify
            )
        else:
            X_tr, X_val, y_tr, y_val = X, X, y, y

        layers = []
        aug_tr, aug_val = X_tr, X_val
        best_score, best_depth = -1.0, 0
        val_scores = []
        for depth in range(self.max_layers):
            rf, et = self._layer(self.random_state + 10 * depth)
            rf.fit(aug_tr, y_tr)
            et.fit(aug_tr, y_tr)
            layers.append((rf, et))
            p_tr = (rf.predict_proba(aug_tr) + et.predict_proba(aug_tr)) / 2
            p_val = (rf.predict_proba(aug_val) + et.predict_proba(aug_val)) / 2
            score = self._f_measure(y_val, self.classes_[np.argmax(p_val, axis=1)])
            val_scores.append(score)
            if score > best_score:
                best_score, best_depth = score, depth + 1
            elif depth + 1 - best_depth >= 1:
                break
            aug_tr = np.hstack([X_tr, p_tr])
            aug_val = np.hstack([X_val, p_val])

        self.layers_ = layers[:best_depth]
        self.validation_scores_ = val_scores
        # Refit the retained layers on the full data so nothing is wasted.
        aug = X
        refit = []
        for depth, (rf, et) in enumerate(self.layers_):
            rf = clone(rf).fit(aug, y)
            et = clone(et).fit(aug, y)
            refit.append((rf, et))
            if depth + 1 < len(self.layers_):
                p = (rf.predict_proba(aug) + et.predict_proba(aug)) / 2
                aug = np.hstack([X, p])
        self.layers_ = refit
        # Guard: the cascade must not end up weaker than its own first layer
        # on training data.
        if len(self.layers_) > 1:
            full = self._f_measure(y, self.predict(X))
            first = self._f_measure(
                y, self.classes_[np.argmax(
                    (refit[0][0].predict_proba(X) + refit[0][1].predict_proba(X)) / 2,
                    axis=1)]
            )
            if full < first:
                self.layers_ = refit[:1]
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        aug = X
        for depth, (rf, et) in enumerate(self.layers_):
            p = (rf.predict_proba(aug) + et.predict_proba(aug)) / 2
            if depth + 1 < len(self.layers_):
                aug = np.hstack([X, p])
        return p

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


# Registry order is part of the one-hot encoding layout and must stay stable.
_FACTORIES = {
    "gaussian_nb": lambda seed: GaussianNB(),
    "bernoulli_nb": lambda seed: BernoulliNB(binarize=0.0),
    "random_forest": lambda seed: RandomForestClassifier(
        n_estimators=100, random_state=seed, n_jobs=1
    ),
    "decision_tree": lambda seed: DecisionTreeClassifier(random_state=seed),
    "mlp": lambda seed: MLPClassifier(random_state=seed, max_iter=300),
    "svm": lambda seed: SVC(probability=True, random_state=seed),
    "sgd_linear": lambda seed: SGDClassifier(
        loss="log_loss", random_state=seed
    ),
    "logistic_regression": lambda seed: LogisticRegression(max_iter=1000),
    "knn": lambda seed: KNeighborsClassifier(),
    "deep_forest": lambda seed: CascadeForest(random_state=seed),
    "adaboost": lambda seed: AdaBoostClassifier(n_estimators=50, random_state=seed),
    "gradient_boosting": lambda seed: GradientBoostingClassifier(
        n_estimators=50, random_state=seed
    ),
    "lda": lambda seed: LinearDiscriminantAnalysis(),
    "extra_tree": lambda seed: ExtraTreeClassifier(random_state=seed),
    "extra_trees_ensemble": lambda seed: ExtraTreesClassifier(
        n_estimators=100, random_state=seed, n_jobs=1
    ),
    "bagging": lambda seed: BaggingClassifier(n_estimators=100, random_state=seed, n_jobs=1),
    "gaussian_process": lambda seed: GaussianProcessClassifier(random_state=seed),
    "hist_gradient_boosting": lambda seed: HistGradientBoostingClassifier(
        max_iter=50, random_state=seed
    ),
}

_REGISTRY_ORDER = tuple(_FACTORIES)

# Fast subset suited to desk-scale experiments and smoke runs.
FAST_REGISTRY = (
    "gaussian_nb",
    "bernoulli_nb",
    "logistic_regression",
    "decision_tree",
    "lda",
    "knn",
)


def registry():
    """Ordered list of available classifier keys (ordering is stable)."""
    return list(_REGISTRY_ORDER)


@dataclass
class TrainedModel:
    """Fitted classifier plus metadata; immutable after fit."""

    key: str
    estimator: object
    n_features: int
    seed: int
    single_class: Optional[int] = None  # sole target value, when degenerate

    def predict_proba_pos(self, X):
        """Positive-class probability for each row of X."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ClassifierError(
                f"feature count {X.shape[1] if X.ndim == 2 else '?'} does not "
                f"match training shape {self.n_features}"
            )
        if self.single_class is not None:
            return np.full(X.shape[0], float(self.single_class))
        proba = self.estimator.predict_proba(X)
        classes = list(self.estimator.classes_)
        return np.clip(proba[:, classes.index(1)], 0.0, 1.0)


def fit(key, features, targets, seed) -> TrainedModel:
    """Fit the registry classifier ``key`` on a binary target.

    A single-class target yields a degenerate model predicting that class
    with probability 1, flagged in metadata.
    """
    if key not in _FACTORIES:
        raise ClassifierError(f"unknown classifier key: {key}")
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=int)
    if X.shape[0] == 0:
        raise ClassifierError("cannot fit on empty data")
    if X.shape[0] != y.shape[0]:
        raise ClassifierError("features/targets length mismatch")
    values = np.unique(y)
    if len(values) == 1:
        return TrainedModel(key, None, X.shape[1], seed, single_class=int(values[0]))
    est = _FACTORIES[key](int(seed))
    est.fit(X, y)
    return TrainedModel(key, est, X.shape[1], seed)


def predict_proba(model: TrainedModel, features):
    return model.predict_proba_pos(features)


@dataclass
class RegressionForest:
    """Random-forest regressor used as the search surrogate."""

    estimator: RandomForestRegressor
    n_features: int

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features:
            raise ClassifierError("surrogate feature-count mismatch")
        return self.estimator.predict(X)


def fit_regressor(data, targets, seed, n_trees=100, max_features=1 / 3,
                  min_samples_leaf=2) -> RegressionForest:
    X = np.asarray(data, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.shape[0] < 1:
        raise ClassifierError("cannot fit regressor on empty data")
    est = RandomForestRegressor(
        n_estimators=n_trees,
        max_features=max_features,
        min_samples_leaf=min_samples_leaf,
        random_state=int(seed),
        n_jobs=1,
    )
    est.fit(X, y)
    return RegressionForest(est, X.shape[1])
