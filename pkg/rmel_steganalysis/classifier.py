"""Soft-margin RBF support vector machine.

The dual is solved by pairwise working-set updates: each step picks the
maximal violating pair with second-order selection for the partner, moves
both multipliers analytically, clips them to the box and updates the
gradient.  Stego is the positive class.
"""

from __future__ import annotations
from typing import (
    Any,
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import json
import math

import numpy as np
import numpy.typing as npt
import scipy.spatial.distance
from sklearn.model_selection import StratifiedGroupKFold

from . import errors
from . import seeding
from ._logging import logger
from .audio import FloatArray, PathLike
from .calibration import FeatureKind, FeatureSet, FeatureVector, Label
from .embedders import EmbedConfig


MODEL_VERSION = 1

KKT_TOL = 1e-3
MAX_PAIR_UPDATES = 10**6
TAU = 1e-12

DEFAULT_C_GRID = tuple(2.0**e for e in range(-1, 10, 2))
DEFAULT_GAMMA_GRID = tuple(2.0**e for e in range(-9, 2, 2))
DEFAULT_FOLDS = 5

BoolArray = npt.NDArray[np.bool_]
IntArray = npt.NDArray[np.int64]


def rbf_kernel(a: npt.ArrayLike, b: npt.ArrayLike, gamma: float) -> float:
    x = np.asarray(a, dtype=np.float64).ravel()
    z = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise errors.DimMismatchError(
            f"kernel arguments differ in size: {x.size} vs {z.size}"
        )
    _check_gamma(gamma)
    d = x - z
    return math.exp(-gamma * float(d @ d))


def kernel_matrix(a: FloatArray, b: FloatArray, gamma: float) -> FloatArray:
    _check_gamma(gamma)
    if a.shape[1] != b.shape[1]:
        raise errors.DimMismatchError(
            f"kernel arguments differ in size: {a.shape[1]} vs {b.shape[1]}"
        )
    sq = scipy.spatial.distance.cdist(a, b, metric="sqeuclidean")
    return np.exp(-gamma * sq)


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise errors.BadConfigError(f"gamma must be positive, got {gamma}")


class Scaler(NamedTuple):
    """Per-dimension affine map of the training range onto [-1, 1]."""

    lo: FloatArray
    hi: FloatArray

    @classmethod
    def fit(cls, x: FloatArray) -> Scaler:
        if x.shape[0] == 0:
            raise errors.SingleClassError("cannot fit a scaler on no data")
        return cls(x.min(axis=0), x.max(axis=0))

    def transform(self, x: FloatArray) -> FloatArray:
        span = self.hi - self.lo
        flat = span == 0
        safe = np.where(flat, 1.0, span)
        scaled = 2.0 * (x - self.lo) / safe - 1.0
        # constant training dimensions carry no information
        return np.where(flat, 0.0, scaled)


def scale_features(
    train: FeatureSet | FloatArray,
) -> Tuple[Scaler, FloatArray]:
    x = train.matrix if isinstance(train, FeatureSet) else train
    scaler = Scaler.fit(np.asarray(x, dtype=np.float64))
    return scaler, scaler.transform(x)


class DualSolution(NamedTuple):
    alpha: FloatArray
    rho: float
    converged: bool
    updates: int


def dual_objective(k: FloatArray, y: IntArray, alpha: FloatArray) -> float:
    """0.5 * a'Qa - sum(a) with Q = yy' * K."""
    ya = alpha * y
    return float(0.5 * ya @ k @ ya - alpha.sum())


def solve_dual(
    k: FloatArray,
    y: IntArray,
    c_reg: float,
    *,
    tol: float = KKT_TOL,
    max_updates: int = MAX_PAIR_UPDATES,
) -> DualSolution:
    yf = y.astype(np.float64)
    n = yf.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(k).copy()
    c = float(c_reg)

    converged = False
    updates = 0
    while updates < max_updates:
        v = -yf * grad
        up = ((yf > 0) & (alpha < c)) | ((yf < 0) & (alpha > 0))
        low = ((yf > 0) & (alpha > 0)) | ((yf < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break

        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m_up = v_up[i]
        m_low = float(np.min(np.where(low, v, np.inf)))
        if m_up - m_low < tol:
            converged = True
            break

        b = m_up - v
        quad = diag[i] + diag - 2.0 * k[i]
        quad = np.where(quad > 0, quad, TAU)
        score = np.where(low & (b > 0), -(b * b) / quad, np.inf)
        j = int(np.argmin(score))

        ai, aj = _pair_update(alpha[i], alpha[j], grad[i], grad[j],
                              yf[i], yf[j], quad[j], c)
        d_i = ai - alpha[i]
        d_j = aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        grad += yf * (yf[i] * d_i * k[i] + yf[j] * d_j * k[j])
        updates += 1

    return DualSolution(alpha, _rho(alpha, grad, yf, c), converged, updates)


def _pair_update(
    a_i: float,
    a_j: float,
    g_i: float,
    g_j: float,
    y_i: float,
    y_j: float,
    quad: float,
    c: float,
) -> Tuple[float, float]:
    if y_i != y_j:
        delta = (-g_i - g_j) / quad
        diff = a_i - a_j
        a_i += delta
        a_j += delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
            if a_i > c:
                a_i, a_j = c, c - diff
        else:
            if a_i < 0:
                a_i, a_j = 0.0, -diff
            if a_j > c:
                a_j, a_i = c, c + diff
    else:
        delta = (g_i - g_j) / quad
        total = a_i + a_j
        a_i -= delta
        a_j += delta
        if total > c:
            if a_i > c:
                a_i, a_j = c, total - c
            if a_j > c:
                a_j, a_i = c, total - c
        else:
            if a_j < 0:
                a_j, a_i = 0.0, total
            if a_i < 0:
                a_i, a_j = 0.0, total
    return a_i, a_j


def _rho(
    alpha: FloatArray, grad: FloatArray, yf: FloatArray, c: float
) -> float:
    yg = yf * grad
    upper = alpha >= c
    lower = alpha <= 0
    free = ~upper & ~lower
    if free.any():
        return float(yg[free].mean())
    ub_mask = (upper & (yf < 0)) | (lower & (yf > 0))
    lb_mask = (upper & (yf > 0)) | (lower & (yf < 0))
    ub = float(yg[ub_mask].min()) if ub_mask.any() else math.inf
    lb = float(yg[lb_mask].max()) if lb_mask.any() else -math.inf
    if math.isinf(ub) or math.isinf(lb):
        return ub if math.isinf(lb) else lb
    return 0.5 * (ub + lb)


class SvmModel:
    def __init__(
        self,
        *,
        support_vectors: FloatArray,
        alphas: FloatArray,
        bias: float,
        gamma: float,
        c_reg: float,
        feature_mask: BoolArray,
        scaler: Scaler,
        feature_kind: Optional[FeatureKind] = None,
        calibration: Optional[EmbedConfig] = None,
        converged: bool = True,
    ) -> None:
        self._sv = np.asarray(support_vectors, dtype=np.float64)
        self._alphas = np.asarray(alphas, dtype=np.float64)
        self._bias = float(bias)
        self._gamma = float(gamma)
        self._c_reg = float(c_reg)
        self._mask = np.asarray(feature_mask, dtype=bool)
        self._scaler = scaler
        self._kind = feature_kind
        self._calibration = calibration
        self._converged = converged

    @property
    def support_vectors(self) -> FloatArray:
        return self._sv

    @property
    def alphas(self) -> FloatArray:
        """Signed dual coefficients, alpha_i * y_i."""
        return self._alphas

    @property
    def bias(self) -> float:
        return self._bias

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def c_reg(self) -> float:
        return self._c_reg

    @property
    def feature_mask(self) -> BoolArray:
        return self._mask

    @property
    def scaler(self) -> Scaler:
        return self._scaler

    @property
    def feature_kind(self) -> Optional[FeatureKind]:
        return self._kind

    @property
    def calibration(self) -> Optional[EmbedConfig]:
        return self._calibration

    @property
    def converged(self) -> bool:
        return self._converged

    @property
    def n_features(self) -> int:
        return int(self._mask.size)

    def prepare(self, x: npt.ArrayLike) -> FloatArray:
        """Mask and scale raw feature rows."""
        rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if rows.shape[1] != self.n_features:
            raise errors.DimMismatchError(
                f"model expects {self.n_features} features, "
                f"got {rows.shape[1]}"
            )
        return self._scaler.transform(rows[:, self._mask])

    def decision_function(self, x: npt.ArrayLike) -> FloatArray:
        k = kernel_matrix(self.prepare(x), self._sv, self._gamma)
        return k @ self._alphas + self._bias

    def check_kind(
        self,
        kind: Optional[FeatureKind],
        calibration: Optional[EmbedConfig] = None,
    ) -> None:
        if self._kind is not None and kind is not None and kind != self._kind:
            raise errors.FeatureKindMismatchError(
                f"model was trained on {self._kind.value} features, "
                f"got {kind.value}"
            )
        if (
            self._calibration is not None
            and calibration is not None
            and calibration != self._calibration
        ):
            raise errors.FeatureKindMismatchError(
                f"model was calibrated with {self._calibration.to_json()}, "
                f"features with {calibration.to_json()}"
            )


def fit_svm(
    x: FloatArray,
    y: IntArray,
    c_reg: float,
    gamma: float,
    *,
    feature_mask: Optional[BoolArray] = None,
    tol: float = KKT_TOL,
    max_updates: int = MAX_PAIR_UPDATES,
    strict: bool = False,
) -> SvmModel:
    """Train on a raw feature matrix with targets in {-1, +1}."""
    if not c_reg > 0:
        raise errors.BadConfigError(f"C must be positive, got {c_reg}")
    _check_gamma(gamma)
    if set(np.unique(y).tolist()) != {-1, 1}:
        raise errors.SingleClassError(
            "both cover and stego examples are required"
        )

    mask = (
        np.ones(x.shape[1], dtype=bool)
        if feature_mask is None
        else np.asarray(feature_mask, dtype=bool)
    )
    if mask.size != x.shape[1]:
        raise errors.DimMismatchError(
            f"mask covers {mask.size} features, data has {x.shape[1]}"
        )
    if not mask.any():
        raise errors.BadConfigError("feature mask selects no features")

    scaler, scaled = scale_features(x[:, mask])
    k = kernel_matrix(scaled, scaled, gamma)
    sol = solve_dual(k, y, c_reg, tol=tol, max_updates=max_updates)

    if not sol.converged:
        logger.warning(
            "svm training hit the update cap",
            extra={"updates": sol.updates, "c_reg": c_reg, "gamma": gamma},
        )
        if strict:
            raise errors.NoConvergenceError(
                f"no convergence after {sol.updates} pair updates"
            )

    sv = sol.alpha > 0
    return SvmModel(
        support_vectors=scaled[sv],
        alphas=(sol.alpha * y)[sv],
        bias=-sol.rho,
        gamma=gamma,
        c_reg=c_reg,
        feature_mask=mask,
        scaler=scaler,
        converged=sol.converged,
    )


def train_svm(
    data: FeatureSet,
    c_reg: float,
    gamma: float,
    *,
    feature_mask: Optional[BoolArray] = None,
    tol: float = KKT_TOL,
    max_updates: int = MAX_PAIR_UPDATES,
    strict: bool = False,
) -> SvmModel:
    data.require_both_classes()
    model = fit_svm(
        data.matrix,
        data.targets,
        c_reg,
        gamma,
        feature_mask=feature_mask,
        tol=tol,
        max_updates=max_updates,
        strict=strict,
    )
    model._kind = data.kind
    if data.kind is FeatureKind.CALIBRATED:
        model._calibration = data[0].calibration
    return model


def predict(model: SvmModel, x: FeatureVector) -> Tuple[Label, float]:
    model.check_kind(x.kind, x.calibration)
    value = float(model.decision_function(x.values)[0])
    return (Label.STEGO if value > 0 else Label.COVER), value


def decision_values(model: SvmModel, data: FeatureSet) -> FloatArray:
    model.check_kind(data.kind, data[0].calibration if len(data) else None)
    if not len(data):
        return np.empty(0)
    return model.decision_function(data.matrix)


def cv_splits(
    y: IntArray,
    groups: Sequence[str],
    folds: int,
    seed: int,
) -> List[Tuple[IntArray, IntArray]]:
    """Class-stratified folds that never split a source across folds."""
    if folds < 2:
        raise errors.BadConfigError(f"need at least 2 folds, got {folds}")
    if len(set(groups)) < folds:
        raise errors.BadConfigError(
            f"{len(set(groups))} sources cannot fill {folds} folds"
        )
    splitter = StratifiedGroupKFold(
        n_splits=folds,
        shuffle=True,
        random_state=seeding.sklearn_state(seed, seeding.FOLDS),
    )
    placeholder = np.zeros((y.size, 1))
    return [
        (np.asarray(tr, dtype=np.int64), np.asarray(te, dtype=np.int64))
        for tr, te in splitter.split(placeholder, y, groups=list(groups))
    ]


def cv_accuracy_grid(
    x: FloatArray,
    y: IntArray,
    splits: Sequence[Tuple[IntArray, IntArray]],
    c_grid: Sequence[float],
    gamma_grid: Sequence[float],
    *,
    feature_mask: Optional[BoolArray] = None,
) -> FloatArray:
    """Mean fold accuracy for every (C, gamma) cell."""
    if feature_mask is not None:
        x = x[:, np.asarray(feature_mask, dtype=bool)]
    scores = np.zeros((len(c_grid), len(gamma_grid)))

    for train, test in splits:
        y_train, y_test = y[train], y[test]
        classes = np.unique(y_train)
        if classes.size < 2:
            # degenerate fold: the only class seen is the only answer
            hit = float(np.mean(y_test == classes[0]))
            scores += hit
            continue
        scaler, x_train = scale_features(x[train])
        x_test = scaler.transform(x[test])
        for gi, gamma in enumerate(gamma_grid):
            k_train = kernel_matrix(x_train, x_train, gamma)
            k_test = kernel_matrix(x_test, x_train, gamma)
            for ci, c_reg in enumerate(c_grid):
                sol = solve_dual(k_train, y_train, c_reg)
                dec = k_test @ (sol.alpha * y_train) - sol.rho
                pred = np.where(dec > 0, 1, -1)
                scores[ci, gi] += float(np.mean(pred == y_test))

    return scores / max(len(splits), 1)


def grid_search(
    data: FeatureSet,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    folds: int = DEFAULT_FOLDS,
    *,
    seed: int = 0,
) -> Tuple[float, float]:
    if not c_grid or not gamma_grid:
        raise errors.BadConfigError("grid search needs non-empty grids")
    data.require_both_classes()

    cs = sorted(float(c) for c in c_grid)
    gammas = sorted(float(g) for g in gamma_grid)
    y = data.targets
    splits = cv_splits(y, data.source_ids, folds, seed)
    scores = cv_accuracy_grid(data.matrix, y, splits, cs, gammas)

    # first maximum in C-major order: ties go to smaller C, then gamma
    ci, gi = np.unravel_index(int(np.argmax(scores)), scores.shape)
    best = (cs[int(ci)], gammas[int(gi)])
    logger.debug(
        "grid search done",
        extra={
            "c_reg": best[0],
            "gamma": best[1],
            "cv_accuracy": float(scores[ci, gi]),
        },
    )
    return best


def model_to_dict(model: SvmModel) -> Dict[str, Any]:
    return {
        "version": MODEL_VERSION,
        "feature_kind": (
            model.feature_kind.value if model.feature_kind else None
        ),
        "calibration": (
            model.calibration.to_dict() if model.calibration else None
        ),
        "scaler": {
            "lo": model.scaler.lo.tolist(),
            "hi": model.scaler.hi.tolist(),
        },
        "feature_mask": model.feature_mask.tolist(),
        "gamma": model.gamma,
        "c_reg": model.c_reg,
        "bias": model.bias,
        "support_vectors": model.support_vectors.tolist(),
        "alphas": model.alphas.tolist(),
        "converged": model.converged,
    }


def model_from_dict(data: Dict[str, Any]) -> SvmModel:
    version = data.get("version")
    if version != MODEL_VERSION:
        raise errors.ModelVersionError(
            f"model file version {version!r} is not {MODEL_VERSION}"
        )
    calibrated = data.get("feature_kind") == FeatureKind.CALIBRATED.value
    if calibrated and not data.get("calibration"):
        raise errors.InputError(
            "model on calibrated features does not record its embedder"
        )
    try:
        mask = np.asarray(data["feature_mask"], dtype=bool)
        sv = np.asarray(data["support_vectors"], dtype=np.float64)
        return SvmModel(
            support_vectors=sv.reshape(-1, int(mask.sum())),
            alphas=np.asarray(data["alphas"], dtype=np.float64),
            bias=float(data["bias"]),
            gamma=float(data["gamma"]),
            c_reg=float(data["c_reg"]),
            feature_mask=mask,
            scaler=Scaler(
                np.asarray(data["scaler"]["lo"], dtype=np.float64),
                np.asarray(data["scaler"]["hi"], dtype=np.float64),
            ),
            feature_kind=(
                FeatureKind(data["feature_kind"])
                if data["feature_kind"]
                else None
            ),
            calibration=(
                EmbedConfig.from_dict(data["calibration"])
                if data["calibration"]
                else None
            ),
            converged=bool(data["converged"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise errors.InputError(f"malformed model file: {e}") from None


def save_model(model: SvmModel, path: PathLike) -> None:
    try:
        with open(path, "w") as f:
            json.dump(model_to_dict(model), f, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def load_model(path: PathLike) -> SvmModel:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {path}: {e}") from None
    except ValueError as e:
        raise errors.InputError(f"{path} is not JSON: {e}") from None
    if not isinstance(data, dict):
        raise errors.InputError(f"{path} is not a model file")
    return model_from_dict(data)
