"""Linear classifiers and full-batch gradient-descent training.

Three parameterizations of the same function class (scores linear in x):

* ``1layer`` - a single weight vector w, score w @ x.
* ``conv``   - width-k filter w1 and output weights w2; the score is
               ``sum_i w2[i] * sum_j w1[j] * x[i + j]`` (zero padded),
               i.e. w2 dotted with the valid-start correlation of x
               against w1.
* ``fc``     - dense first layer W1 (d x d) and output weights w2.

Two losses: the standard hinge ``max(0, 1 - y f)`` with the strict
subgradient (active iff y f < 1), and the extreme hinge ``-y f`` whose
full-batch gradient is constant in the weights, so conv training reduces
to two matrix products with the training average.  Layer updates are
always simultaneous: both gradients are evaluated at the old weights.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .shift import training_average

MODELS = ("1layer", "conv", "fc")
LOSSES = ("hinge", "xhinge")
INIT_SCHEMES = ("gaussian", "uniform", "zero")

DEFAULT_ALPHA = {"hinge": 0.1, "xhinge": 0.1}
DEFAULT_B = 0.1

# Joint max-abs weight magnitude beyond which extreme-hinge training
# rescales both layers by a common factor.  Updates are linear, so the
# rescale only changes the overall scale of the trajectory, never the
# direction or any classification.
RENORM_THRESHOLD = 1e100


@dataclass
class LinearWeights:
    w: np.ndarray

    def copy(self):
        return LinearWeights(self.w.copy())


@dataclass
class ConvWeights:
    w1: np.ndarray
    w2: np.ndarray

    def copy(self):
        return ConvWeights(self.w1.copy(), self.w2.copy())


@dataclass
class FCWeights:
    W1: np.ndarray
    w2: np.ndarray

    def copy(self):
        return FCWeights(self.W1.copy(), self.w2.copy())


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``alpha`` defaults per loss (see DEFAULT_ALPHA); ``init`` is an
    initialization scheme name applied to every weight
    tensor, or a tuple with one scheme per tensor in layer order
    (first layer, then output).  None picks the per-loss default:
    gaussian everywhere for hinge, (gaussian, zero) for xhinge.
    ``stop_rule`` is "loss_zero" (hinge only: stop at exact 0.0 training
    loss) or "fixed_steps"; ``renormalize`` applies to xhinge only.
    """

    loss: str = "hinge"
    alpha: float | None = None
    max_steps: int = 100_000
    init: str | tuple | None = None
    b: float = DEFAULT_B
    renormalize: bool | None = None
    stop_rule: str | None = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.alpha is None:
            self.alpha = DEFAULT_ALPHA[self.loss]
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.b <= 0:
            raise ConfigError(f"init scale b must be positive, got {self.b}")
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.stop_rule is None:
            self.stop_rule = "loss_zero" if self.loss == "hinge" else "fixed_steps"
        if self.stop_rule not in ("loss_zero", "fixed_steps"):
            raise ConfigError(f"unknown stop rule {self.stop_rule!r}")
        if self.stop_rule == "loss_zero" and self.loss != "hinge":
            raise ConfigError("stop rule 'loss_zero' is only defined for hinge")
        if self.renormalize is None:
            self.renormalize = self.loss == "xhinge"
        if self.renormalize and self.loss == "hinge":
            raise ConfigError("renormalization applies to xhinge only")
        for scheme in self._schemes(2):
            if scheme not in INIT_SCHEMES:
                raise ConfigError(
                    f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}"
                )

    def _schemes(self, n_tensors):
        """Resolved init scheme per weight tensor (first layer first)."""
        init = self.init
        if init is None:
            init = ("gaussian", "zero") if self.loss == "xhinge" else "gaussian"
        if isinstance(init, str):
            return (init,) * n_tensors
        if len(init) != n_tensors:
            raise ConfigError(
                f"init tuple has {len(init)} entries for {n_tensors} weight tensors"
            )
        return tuple(init)


@dataclass
class TrainTrace:
    """Per-step training record plus the final weights.

    Arrays all have one entry per recorded step (t = 0 is the untrained
    state).  ``test_error`` is NaN-filled when no eval set was supplied.
    ``weights_per_step`` is populated only on request.
    """

    steps: np.ndarray
    train_loss: np.ndarray
    train_error: np.ndarray
    test_error: np.ndarray
    weights: object
    stop_reason: str
    renormalizations: int = 0
    weights_per_step: list | None = None

    @property
    def steps_run(self):
        return int(self.steps[-1])

    @property
    def budget_exhausted(self):
        return self.stop_reason == "step-budget"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "train_loss", "train_err", "test_err"])
            for i in range(self.steps.shape[0]):
                te = self.test_error[i]
                writer.writerow([
                    int(self.steps[i]),
                    repr(float(self.train_loss[i])),
                    repr(float(self.train_error[i])),
                    "" if np.isnan(te) else repr(float(te)),
                ])


def effective_weights(weights):
    """Collapse any model to the equivalent single weight vector c with
    score(x) = c @ x.  For conv, c is the (truncated) convolution of w2
    with w1; for fc it is W1.T @ w2."""
    if isinstance(weights, LinearWeights):
        return weights.w
    if isinstance(weights, ConvWeights):
        d = weights.w2.shape[0]
        return np.convolve(weights.w2, weights.w1)[:d]
    if isinstance(weights, FCWeights):
        return weights.W1.T @ weights.w2
    raise TypeError(f"unsupported weights type {type(weights).__name__}")


def forward(weights, x):
    """Score a single dense input."""
    return float(effective_weights(weights) @ np.asarray(x, dtype=float))


def scores(weights, data):
    """Scores for a whole Dataset/TrainingSet (sparse path) or a dense
    (N, d) matrix."""
    c = effective_weights(weights)
    if hasattr(data, "positions"):
        return (data.values * c[data.positions]).sum(axis=1)
    X = np.asarray(data, dtype=float)
    return X @ c


def margins(weights, data):
    y = data.y if hasattr(data, "y") else None
    if y is None:
        raise TypeError("data must carry labels")
    return y * scores(weights, data)


def error_from_margins(m, zero_tol=0.0):
    """Mean classification error with the half-credit zero rule.

    A margin below -zero_tol counts 1, within +-zero_tol counts 1/2,
    above counts 0.  ``zero_tol`` may be a per-point array; the default
    0.0 treats only exact float zeros as ties."""
    m = np.asarray(m, dtype=float)
    wrong = m < -zero_tol
    tied = np.abs(m) <= zero_tol
    return float(np.mean(wrong + 0.5 * tied))


def classification_error(weights, dataset, zero_tol=0.0):
    """Mean error of a model over a dataset (ties count half)."""
    return error_from_margins(margins(weights, dataset), zero_tol)


def hinge_loss(weights, tr):
    """Mean hinge loss max(0, 1 - y f) over a training set."""
    return float(np.mean(np.maximum(0.0, 1.0 - margins(weights, tr))))


def init_weights(model, d, k, config, rng):
    """Draw initial weights for a model.

    Tensors are drawn in layer order (filter/first layer, then output),
    one scheme each: gaussian = N(0, b^2) entries, uniform = U[-b, b],
    zero = zeros.
    """
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; expected one of {MODELS}")

    def draw(scheme, shape):
        if scheme == "gaussian":
            return rng.normal(0.0, config.b, size=shape)
        if scheme == "uniform":
            return rng.uniform(-config.b, config.b, size=shape)
        return np.zeros(shape)

    if model == "1layer":
        (s,) = config._schemes(1)
        return LinearWeights(w=draw(s, (d,)))
    if model == "conv":
        if k is None or not 1 <= k <= d:
            raise ConfigError(f"conv model needs a filter width 1 <= k <= d, got {k}")
        s1, s2 = config._schemes(2)
        return ConvWeights(w1=draw(s1, (k,)), w2=draw(s2, (d,)))
    s1, s2 = config._schemes(2)
    return FCWeights(W1=draw(s1, (d, d)), w2=draw(s2, (d,)))


def _active_sum(tr, act):
    """sum over active points of y_i * x_i, as a dense d-vector."""
    w = (tr.y[act, None] * tr.values[act]).ravel()
    return np.bincount(tr.positions[act].ravel(), weights=w, minlength=tr.d)


def _corr_filter(s, w2, k):
    """(A_s).T @ w2 for the shift matrix of s: out[j] = s[j:] @ w2[:d-j]."""
    d = s.shape[0]
    out = np.empty(k)
    for j in range(k):
        out[j] = s[j:] @ w2[: d - j]
    return out


def _conv_vec(s, w1):
    """A_s @ w1: out[i] = sum_j w1[j] * s[i + j] (zero padded)."""
    d = s.shape[0]
    out = np.zeros(d)
    for j, cj in enumerate(w1):
        if cj != 0.0:
            out[: d - j] += cj * s[j:]
    return out


def _hinge_step(model, weights, tr, alpha):
    """One simultaneous full-batch hinge subgradient step, in place."""
    m = margins(weights, tr)
    act = m < 1.0
    if not np.any(act):
        return
    s = _active_sum(tr, act)
    scale = alpha / len(tr)
    if model == "1layer":
        weights.w += scale * s
    elif model == "conv":
        g1 = _corr_filter(s, weights.w2, weights.w1.shape[0])
        g2 = _conv_vec(s, weights.w1)
        weights.w1 += scale * g1
        weights.w2 += scale * g2
    else:
        g_W1 = np.outer(weights.w2, s)
        g_w2 = weights.W1 @ s
        weights.W1 += scale * g_W1
        weights.w2 += scale * g_w2


def train(model, tr, config, rng, k=None, eval_set=None, initial=None,
          record_weights=False):
    """Full-batch gradient descent on a training set.

    ``initial`` overrides the drawn init (it is copied, never mutated).
    With ``eval_set`` given, the whole-dataset error is recorded every
    step.  Returns a TrainTrace; the stop reason is "loss-zero",
    "step-budget" (loss_zero rule ran out of steps) or "fixed-steps".
    """
    if config.loss == "xhinge" and model != "conv":
        raise ConfigError("extreme-hinge training is defined for the conv model")
    weights = initial.copy() if initial is not None else init_weights(
        model, tr.d, k, config, rng)

    mtr = None
    if config.loss == "xhinge":
        mtr = training_average(tr, weights.w1.shape[0]).matrix

    steps, losses, terrs, eerrs = [], [], [], []
    snaps = [] if record_weights else None
    renorms = 0
    stop_reason = "fixed-steps"

    for t in range(config.max_steps + 1):
        m = margins(weights, tr)
        if config.loss == "hinge":
            loss = float(np.mean(np.maximum(0.0, 1.0 - m)))
        else:
            loss = float(np.mean(-m))
        steps.append(t)
        losses.append(loss)
        terrs.append(error_from_margins(m))
        eerrs.append(classification_error(weights, eval_set)
                     if eval_set is not None else np.nan)
        if snaps is not None:
            snaps.append(weights.copy())

        if config.stop_rule == "loss_zero" and loss == 0.0:
            stop_reason = "loss-zero"
            break
        if t == config.max_steps:
            stop_reason = ("step-budget" if config.stop_rule == "loss_zero"
                           else "fixed-steps")
            break

        if config.loss == "hinge":
            _hinge_step(model, weights, tr, config.alpha)
        else:
            w1_new = weights.w1 + config.alpha * (mtr.T @ weights.w2)
            w2_new = weights.w2 + config.alpha * (mtr @ weights.w1)
            weights.w1, weights.w2 = w1_new, w2_new
            if config.renormalize:
                mx = max(np.max(np.abs(weights.w1)), np.max(np.abs(weights.w2)))
                if mx > RENORM_THRESHOLD:
                    weights.w1 /= mx
                    weights.w2 /= mx
                    renorms += 1

    return TrainTrace(
        steps=np.asarray(steps),
        train_loss=np.asarray(losses),
        train_error=np.asarray(terrs),
        test_error=np.asarray(eerrs),
        weights=weights,
        stop_reason=stop_reason,
        renormalizations=renorms,
        weights_per_step=snaps,
    )


def xhinge_config(steps, alpha=None, b=DEFAULT_B, init=None):
    """Convenience TrainConfig for a fixed-step extreme-hinge run."""
    return TrainConfig(loss="xhinge", alpha=alpha, max_steps=steps, b=b, init=init)


def continue_config(config, extra_steps):
    """Config for extending a finished run by a fixed number of steps."""
    return replace(config, max_steps=extra_steps, stop_rule="fixed_steps",
                   renormalize=config.renormalize)
