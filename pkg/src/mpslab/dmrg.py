"""Sweeping single-site training with nonlinear conjugate gradient.

The chain is kept in mixed canonical gauge; per-sample left/right partial
contractions make the loss and its gradient local to the center core.
Each center update runs a few Polak-Ribiere CG steps with an Armijo
backtracking line search, so the training objective never increases.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .features import FeatureMap, featurize_batch
from .mps import MPS, canonicalize

ARMIJO_C = 1e-4
MAX_HALVINGS = 40
PROB_FLOOR = 1e-300

MSE = "mse"
CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class TrainConfig:
    sweeps: int = 50
    cg_steps: int = 5
    ridge: float = 0.0
    loss_kind: str = MSE
    checkpoint: str = "best_validation"  # or "last"
    sweep_tol: float = 1e-10  # early stop when a full sweep improves less

    def __post_init__(self):
        if self.sweeps < 1 or self.cg_steps < 1:
            raise ValueError("sweeps and cg_steps must be >= 1")
        if self.ridge < 0.0:
            raise ValueError("ridge coefficient must be >= 0")
        if self.loss_kind not in (MSE, CROSS_ENTROPY):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if self.checkpoint not in ("best_validation", "last"):
            raise ValueError(f"unknown checkpoint policy {self.checkpoint!r}")


@dataclass
class TrainTrace:
    """Per-sweep record of a training run (sweep 0 is the initial state)."""

    sweeps: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)
    best_validation_sweep: int = 0
    stalls: int = 0
    max_monotonicity_violation: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("sweep,train_loss,val_loss,test_loss\n")
            for row in zip(self.sweeps, self.train_loss, self.val_loss,
                           self.test_loss):
                fh.write(",".join(repr(v) for v in row) + "\n")


class EnvironmentCache:
    """Per-sample partial contractions L_j / R_j around the center site.

    Environments on the label side of a labeled MPS carry the extra class
    axis.  Entries go stale (None) when the center moves past them.
    """

    def __init__(self, cores, phi, label_site=None, center=0):
        n = len(cores)
        t = phi.shape[0]
        self.phi = phi
        self.label_site = label_site
        self.center = center
        self.left = [None] * (n + 1)
        self.right = [None] * (n + 1)
        self.left[0] = np.ones((t, 1))
        self.right[n] = np.ones((t, 1))
        for j in range(n - 1, center, -1):
            self.right[j] = self._absorb_right(self.right[j + 1], cores[j], j)
        for j in range(center):
            self.left[j + 1] = self._absorb_left(self.left[j], cores[j], j)

    def _absorb_left(self, env, core, j):
        phi_j = self.phi[:, j]
        if j == self.label_site:
            return np.einsum("tl,lfcr,tf->trc", env, core, phi_j, optimize=True)
        if env.ndim == 3:
            return np.einsum("tlc,lfr,tf->trc", env, core, phi_j, optimize=True)
        return np.einsum("tl,lfr,tf->tr", env, core, phi_j, optimize=True)

    def _absorb_right(self, env, core, j):
        phi_j = self.phi[:, j]
        if j == self.label_site:
            return np.einsum("tr,lfcr,tf->tlc", env, core, phi_j, optimize=True)
        if env.ndim == 3:
            return np.einsum("trc,lfr,tf->tlc", env, core, phi_j, optimize=True)
        return np.einsum("tr,lfr,tf->tl", env, core, phi_j, optimize=True)

    def move_right(self, new_core):
        """Center c -> c+1 after ``new_core`` replaced core c."""
        c = self.center
        self.left[c + 1] = self._absorb_left(self.left[c], new_core, c)
        self.right[c + 1] = None
        self.center = c + 1

    def move_left(self, new_core):
        """Center c -> c-1 after ``new_core`` replaced core c."""
        c = self.center
        self.right[c] = self._absorb_right(self.right[c + 1], new_core, c)
        self.left[c] = None
        self.center = c - 1

    def apply(self, core) -> np.ndarray:
        """Model outputs with ``core`` in the center slot: (T,) or (T, C)."""
        c = self.center
        lenv, renv = self.left[c], self.right[c + 1]
        phi_c = self.phi[:, c]
        if c == self.label_site:
            return np.einsum("tl,lfcr,tf,tr->tc", lenv, core, phi_c, renv,
                             optimize=True)
        if lenv.ndim == 3:
            return np.einsum("tlc,lfr,tf,tr->tc", lenv, core, phi_c, renv,
                             optimize=True)
        if renv.ndim == 3:
            return np.einsum("tl,lfr,tf,trc->tc", lenv, core, phi_c, renv,
                             optimize=True)
        return np.einsum("tl,lfr,tf,tr->t", lenv, core, phi_c, renv,
                         optimize=True)

    def grad_from_output_coeffs(self, coeffs) -> np.ndarray:
        """Chain rule: d(loss)/d(core) from d(loss)/d(output) coefficients."""
        c = self.center
        lenv, renv = self.left[c], self.right[c + 1]
        phi_c = self.phi[:, c]
        if c == self.label_site:
            return np.einsum("tc,tl,tf,tr->lfcr", coeffs, lenv, phi_c, renv,
                             optimize=True)
        if lenv.ndim == 3:
            return np.einsum("tc,tlc,tf,tr->lfr", coeffs, lenv, phi_c, renv,
                             optimize=True)
        if renv.ndim == 3:
            return np.einsum("tc,tl,tf,trc->lfr", coeffs, lenv, phi_c, renv,
                             optimize=True)
        return np.einsum("t,tl,tf,tr->lfr", coeffs, lenv, phi_c, renv,
                         optimize=True)


def data_loss(outputs: np.ndarray, y: np.ndarray, kind: str) -> float:
    """Data term of the training objective (no ridge)."""
    if kind == MSE:
        return float(0.5 * np.mean((outputs - y) ** 2))
    p_true = _true_class_probabilities(outputs, y)
    return float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))


def _true_class_probabilities(v: np.ndarray, y: np.ndarray) -> np.ndarray:
    sq = v**2
    total = sq.sum(axis=1)
    return sq[np.arange(len(y)), y] / total


def output_grad_coeffs(outputs: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
    """d(data term)/d(outputs), already divided by the sample count."""
    t = outputs.shape[0]
    if kind == MSE:
        return (outputs - y) / t
    # -ln(v_true^2 / sum v^2): d/dv_c = 2 v_c / sum(v^2) - 2 delta_{c,true}/v_true
    total = (outputs**2).sum(axis=1, keepdims=True)
    g = 2.0 * outputs / total
    rows = np.arange(t)
    g[rows, y] -= 2.0 / outputs[rows, y]
    return g / t


def site_loss(cache: EnvironmentCache, core, y, kind, ridge) -> float:
    """Training objective as a function of the center core (mixed gauge)."""
    value = data_loss(cache.apply(core), y, kind)
    if ridge:
        value += 0.5 * ridge * float(np.sum(core**2))
    return value


def site_gradient(cache: EnvironmentCache, core, y, kind, ridge) -> np.ndarray:
    grad = cache.grad_from_output_coeffs(
        output_grad_coeffs(cache.apply(core), y, kind))
    if ridge:
        grad = grad + ridge * core
    return grad


def optimize_site(cache: EnvironmentCache, core, y, config: TrainConfig):
    """Polak-Ribiere CG with Armijo backtracking on the center core.

    Returns (new_core, final_objective, stalled).  The objective never
    increases: a failed line search keeps the old core.
    """
    f0 = site_loss(cache, core, y, config.loss_kind, config.ridge)
    g = site_gradient(cache, core, y, config.loss_kind, config.ridge)
    d = -g
    stalled = False
    alpha_prev = 1.0
    for _ in range(config.cg_steps):
        gnorm2 = float(np.sum(g * g))
        if gnorm2 <= 1e-28 * max(1.0, abs(f0)):
            break
        g_dot_d = float(np.sum(g * d))
        if g_dot_d >= 0.0:  # lost descent; restart on steepest descent
            d = -g
            g_dot_d = -gnorm2
        alpha = _initial_step(cache, core, d, g_dot_d, config, alpha_prev)
        if alpha is None:
            break
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = core + alpha * d
            f1 = site_loss(cache, candidate, y, config.loss_kind, config.ridge)
            if f1 <= f0 + ARMIJO_C * alpha * g_dot_d:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            stalled = True
            break
        alpha_prev = alpha
        core, f0 = candidate, f1
        g_new = site_gradient(cache, core, y, config.loss_kind, config.ridge)
        beta = max(0.0, float(np.sum(g_new * (g_new - g))) / gnorm2)
        d = -g_new + beta * d
        g = g_new
    return core, f0, stalled


def _initial_step(cache, core, d, g_dot_d, config, alpha_prev):
    if config.loss_kind == MSE:
        # exact minimizer along d of the quadratic local objective
        dv = cache.apply(d)
        curvature = float(np.mean(dv**2)) + config.ridge * float(np.sum(d * d))
        if curvature <= 0.0:
            return None
        return -g_dot_d / curvature
    return min(1.0, 4.0 * alpha_prev)


def loss(w: MPS, d: Dataset, ridge: float, fmap: FeatureMap | None = None) -> float:
    """Regularized half-MSE objective of a regression MPS on a dataset."""
    if fmap is None:
        fmap = FeatureMap(dim=w.phys_dim)
    pred = w.evaluate_batch(featurize_batch(fmap, d.features))
    return data_loss(pred, d.labels, MSE) + 0.5 * ridge * w.norm_squared()


def gradient_site(w: MPS, site: int, d: Dataset, ridge: float,
                  fmap: FeatureMap | None = None) -> np.ndarray:
    """Gradient of the objective w.r.t. the core at ``site`` (mixed gauge)."""
    if fmap is None:
        fmap = FeatureMap(dim=w.phys_dim)
    work = canonicalize(w, site)
    cache = EnvironmentCache(work.cores, featurize_batch(fmap, d.features),
                             label_site=w.label_site, center=site)
    return site_gradient(cache, work.cores[site], d.labels, MSE, ridge)


def _accuracy(outputs: np.ndarray, y: np.ndarray) -> float:
    # predicted class maximizes the squared, normalized output
    return float(np.mean(np.argmax(outputs**2, axis=1) == y))


def train_arrays(w0: MPS, phi_tr, y_tr, phi_val=None, y_val=None,
                 phi_te=None, y_te=None, config: TrainConfig = TrainConfig()):
    """Sweeping CG training on featurized arrays.

    Alternates left-to-right and right-to-left passes, regauging by QR and
    updating the environment cache incrementally.  Returns the checkpointed
    model and the complete TrainTrace.
    """
    n = w0.n_sites
    work = canonicalize(w0, 0)
    cores = [c.copy() for c in work.cores]
    label_site = w0.label_site
    cache = EnvironmentCache(cores, phi_tr, label_site=label_site, center=0)
    classifying = config.loss_kind == CROSS_ENTROPY

    trace = TrainTrace()
    best_val = np.inf
    best_cores = None

    def record(sweep, elapsed, objective):
        model = MPS(cores, label_site=label_site)
        out_tr = model.evaluate_batch(phi_tr)
        trace.sweeps.append(sweep)
        trace.train_loss.append(data_loss(out_tr, y_tr, config.loss_kind))
        trace.objective.append(objective)
        trace.seconds.append(elapsed)
        if classifying:
            trace.train_accuracy.append(_accuracy(out_tr, y_tr))
        for phi, y, losses, accs in (
            (phi_val, y_val, trace.val_loss, trace.val_accuracy),
            (phi_te, y_te, trace.test_loss, trace.test_accuracy),
        ):
            if phi is None:
                losses.append(np.nan)
                if classifying:
                    accs.append(np.nan)
                continue
            out = model.evaluate_batch(phi)
            losses.append(data_loss(out, y, config.loss_kind))
            if classifying:
                accs.append(_accuracy(out, y))

    def objective_now():
        return site_loss(cache, cores[cache.center], y_tr, config.loss_kind,
                         config.ridge)

    def checkpoint(sweep):
        nonlocal best_val, best_cores
        if trace.val_loss[-1] <= best_val:
            best_val = trace.val_loss[-1]
            trace.best_validation_sweep = sweep
            best_cores = [c.copy() for c in cores]

    use_best = (config.checkpoint == "best_validation" and phi_val is not None)
    record(0, 0.0, objective_now())
    if use_best:
        checkpoint(0)

    previous_objective = trace.objective[0]
    for sweep in range(1, config.sweeps + 1):
        started = time.perf_counter()
        obj = previous_objective
        for site, direction in _sweep_plan(n):
            new_core, obj_new, stalled = optimize_site(cache, cores[site],
                                                       y_tr, config)
            if stalled:
                trace.stalls += 1
            violation = obj_new - obj - 1e-12
            if violation > trace.max_monotonicity_violation:
                trace.max_monotonicity_violation = violation
            cores[site] = new_core
            obj = obj_new
            if direction == "R":
                _shift_right(cores, site)
                cache.move_right(cores[site])
            elif direction == "L":
                _shift_left(cores, site)
                cache.move_left(cores[site])
        record(sweep, time.perf_counter() - started, obj)
        if use_best:
            checkpoint(sweep)
        if previous_objective - obj < config.sweep_tol:
            break
        previous_objective = obj

    final = best_cores if (use_best and best_cores is not None) else cores
    return MPS(final, label_site=label_site), trace


def _sweep_plan(n):
    """Site visit order for one full sweep: left-to-right, then back."""
    if n == 1:
        return [(0, None)]
    plan = [(s, "R") for s in range(n - 1)]
    plan += [(s, "L") for s in range(n - 1, 0, -1)]
    plan.append((0, None))
    return plan


def _shift_right(cores, j):
    core = cores[j]
    mat = core.reshape(-1, core.shape[-1])
    q, r = np.linalg.qr(mat)
    cores[j] = q.reshape(core.shape[:-1] + (q.shape[1],))
    cores[j + 1] = np.tensordot(r, cores[j + 1], axes=(1, 0))


def _shift_left(cores, j):
    core = cores[j]
    mat = core.reshape(core.shape[0], -1)
    q, r = np.linalg.qr(mat.T)
    cores[j] = q.T.reshape((q.shape[1],) + core.shape[1:])
    prev = cores[j - 1]
    cores[j - 1] = np.tensordot(prev, r.T, axes=(prev.ndim - 1, 0))


def frame_labels(d: Dataset, frame: Dataset) -> np.ndarray:
    """Re-express d's labels in ``frame``'s normalization (training frame)."""
    raw = d.labels * d.label_std + d.label_mean
    return (raw - frame.label_mean) / frame.label_std


def train(w0: MPS, train_set: Dataset, val_set: Dataset | None,
          test_set: Dataset | None, config: TrainConfig,
          fmap: FeatureMap | None = None):
    """Dataset-level wrapper around train_arrays for regression.

    Validation and test labels are evaluated in the training set's
    normalization frame.
    """
    if fmap is None:
        fmap = FeatureMap(dim=w0.phys_dim)

    def prep(ds):
        if ds is None:
            return None, None
        return featurize_batch(fmap, ds.features), frame_labels(ds, train_set)

    phi_val, y_val = prep(val_set)
    phi_te, y_te = prep(test_set)
    return train_arrays(w0, featurize_batch(fmap, train_set.features),
                        train_set.labels, phi_val, y_val, phi_te, y_te, config)
