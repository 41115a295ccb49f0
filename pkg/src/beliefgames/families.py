"""Per-action marginal distributions of payoff perturbations.

A family bundles one CDF per action.  Three things are derived from it:

* quantiles, used by the learning dynamics and by sampling oracles;
* densities evaluated at quantiles, which set the curvature of the induced
  regularizer (and hence stability margins);
* the concave regularizer itself, ``h(p) = sum_i integral of the quantile
  over [1 - p_i, 1]``, whose maximization over the simplex defines the
  quantal response.

Closed forms are used where they exist (exponential, uniform, tabulated);
otherwise the regularizer falls back to composite Gauss-Legendre quadrature
with dyadic refinement toward the possibly singular endpoint.
"""

from __future__ import annotations

import numpy as np

from .games import SIMPLEX_TOL

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gl_panel(f, a: float, b: float) -> float:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_WEIGHTS, f(mid + half * _GL_NODES)))


def integrate_quantile_tail(tail_fn, mass: float, tol: float = 1e-10,
                            max_levels: int = 600) -> float:
    """Integrate ``s -> tail_fn(s)`` over (0, mass].

    ``tail_fn(s)`` is the quantile at probability 1 - s, parameterized by the
    upper-tail mass so tiny arguments stay exact.  The integrand may blow up
    (integrably) as s -> 0, so panels are refined dyadically toward that
    endpoint: [mass/2, mass], [mass/4, mass/2], ...  Refinement stops once
    the geometric tail estimate drops below ``tol``.  A single panel can be
    near zero only because the integrand changes sign inside it, so the
    estimate uses the larger of the last two panels.
    """
    if mass < 0.0:
        raise ValueError("mass must be nonnegative")
    if mass == 0.0:
        return 0.0
    total = 0.0
    b = float(mass)
    sizes: list[float] = []
    for _ in range(max_levels):
        a = 0.5 * b
        panel = _gl_panel(tail_fn, a, b)
        total += panel
        sizes.append(abs(panel))
        b = a
        if len(sizes) < 3:
            continue
        head = max(sizes[-1], sizes[-2])
        prior = max(sizes[-2], sizes[-3])
        if head == 0.0:
            break
        if prior > 0.0 and head < prior:
            ratio = min(head / prior, 0.95)
            if head * (1.0 + ratio / (1.0 - ratio)) < 0.5 * tol:
                break
    return total


def _validate_simplex(p, n: int) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"probability vector must have length {n}")
    if arr.min() < 0.0 or abs(arr.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("probability vector must be on the simplex (tol 1e-12)")
    return arr


def _check_unit(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("argument must lie in [0, 1]")
    return arr


class MarginalFamily:
    """Base class: N per-action marginals plus the induced regularizer."""

    kind = "generic"

    def __init__(self, n_actions: int) -> None:
        if n_actions < 1:
            raise ValueError("need at least one action")
        self.n_actions = int(n_actions)

    # -- per-marginal queries ------------------------------------------------

    def cdf(self, i: int, s):
        """F_i evaluated at s (scalar or array)."""
        raise NotImplementedError

    def quantile(self, i: int, t):
        """Left quantile F_i^{-1}(t) for t in [0, 1].

        t = 0 gives the lower end of the support; t = 1 gives the upper end,
        which is +inf for unbounded marginals.
        """
        raise NotImplementedError

    def density_at_quantile(self, i: int, p):
        """F_i' evaluated at F_i^{-1}(1 - p); default is a central difference.

        Valid for p in (0, 1); bounded subclasses extend this one-sidedly to
        the endpoints.
        """
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("density_at_quantile needs p in (0, 1)")
        s = self.quantile(i, 1.0 - p)
        h = 1e-7 * max(1.0, float(np.max(np.abs(s))))
        return (self.cdf(i, s + h) - self.cdf(i, s - h)) / (2.0 * h)

    def quantile_vector(self, t: np.ndarray) -> np.ndarray:
        """Per-action quantiles: component i is F_i^{-1}(t_i)."""
        t = np.asarray(t, dtype=float)
        return np.array([float(self.quantile(i, t[i])) for i in range(self.n_actions)])

    def tail_quantile(self, i: int, mass):
        """Quantile at probability 1 - mass, stable for tiny tail masses.

        Closed-form subclasses evaluate directly in the mass variable, so
        masses far below float epsilon do not collapse onto t = 1.
        """
        mass = np.asarray(mass, dtype=float)
        return self.quantile(i, 1.0 - mass)

    def tail_quantile_vector(self, mass: np.ndarray) -> np.ndarray:
        """Per-action quantiles at 1 - mass_i (see :meth:`tail_quantile`)."""
        mass = np.asarray(mass, dtype=float)
        return np.array([
            float(self.tail_quantile(i, mass[i])) for i in range(self.n_actions)
        ])

    def cdf_vector(self, s: np.ndarray) -> np.ndarray:
        """Per-action CDF values: component i is F_i(s_i)."""
        s = np.asarray(s, dtype=float)
        return np.array([float(self.cdf(i, s[i])) for i in range(self.n_actions)])

    def support(self, i: int) -> tuple[float, float]:
        """Essential range of marginal i (upper end may be inf)."""
        return float(self.quantile(i, 0.0)), float(self.quantile(i, 1.0))

    #: False for families whose CDF has flat stretches strictly inside (0, 1),
    #: which break uniqueness of the quantal response.
    @property
    def strictly_increasing_cdf(self) -> bool:
        return True

    # -- regularizer ---------------------------------------------------------

    def regularizer_terms(self, p) -> float:
        """Sum over actions of the quantile integral over [1 - p_i, 1].

        Unlike :meth:`regularizer` this does not require p to be on the
        simplex, which makes it usable inside finite-difference checks.
        """
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_actions,):
            raise ValueError(f"need a length-{self.n_actions} vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("components must lie in [0, 1]")
        return sum(
            integrate_quantile_tail(lambda s, i=i: self.tail_quantile(i, s), float(p[i]))
            for i in range(self.n_actions)
        )

    def regularizer(self, p) -> float:
        """Concave perturbation value h(p) for a simplex point p."""
        return self.regularizer_terms(_validate_simplex(p, self.n_actions))

    # -- analysis hooks ------------------------------------------------------

    def curvature_scale(self):
        """Closed form of inf over p of 1 / min_i density_at_quantile(i, p).

        This is the regularization-strength side of the stability condition.
        ``None`` means no closed form; callers fall back to a p-grid.
        """
        return None

    def lipschitz_constant(self):
        """Closed-form common Lipschitz constant of the CDFs, if available."""
        return None

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError


class ExponentialFamily(MarginalFamily):
    """Shifted-exponential marginals with per-action weights eta.

    F_i(s) = max(0, 1 - eta_i * exp(-s / gamma - 1)).  The induced
    regularizer is the weighted entropy gamma * sum_i p_i log(eta_i / p_i)
    and the quantal response is a weighted softmax.
    """

    kind = "exponential"

    def __init__(self, gamma: float, eta=None, n_actions: int | None = None) -> None:
        if eta is None:
            if n_actions is None:
                raise ValueError("give eta or n_actions")
            eta = np.ones(n_actions)
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 0:
            if n_actions is None:
                raise ValueError("scalar eta needs n_actions")
            eta = np.full(n_actions, float(eta))
        super().__init__(eta.size)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if np.any(eta <= 0.0) or not np.all(np.isfinite(eta)):
            raise ValueError("eta must be positive and finite")
        self.gamma = float(gamma)
        self.eta = eta.copy()
        self.eta.setflags(write=False)

    def cdf(self, i: int, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(over="ignore"):
            return np.maximum(0.0, 1.0 - self.eta[i] * np.exp(-s / self.gamma - 1.0))

    def quantile(self, i: int, t):
        t = _check_unit(t)
        p = 1.0 - t
        with np.errstate(divide="ignore"):
            out = self.gamma * (np.log(self.eta[i] / p) - 1.0)
        return out if out.ndim else float(out)

    def density_at_quantile(self, i: int, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p > 1.0):
            raise ValueError("density_at_quantile needs p in (0, 1]")
        out = p / self.gamma
        return out if out.ndim else float(out)

    def quantile_vector(self, t: np.ndarray) -> np.ndarray:
        t = _check_unit(t)
        with np.errstate(divide="ignore"):
            return self.gamma * (np.log(self.eta / (1.0 - t)) - 1.0)

    def tail_quantile(self, i: int, mass):
        mass = _check_unit(mass)
        with np.errstate(divide="ignore"):
            out = self.gamma * (np.log(self.eta[i] / mass) - 1.0)
        return out if out.ndim else float(out)

    def tail_quantile_vector(self, mass: np.ndarray) -> np.ndarray:
        mass = _check_unit(mass)
        with np.errstate(divide="ignore"):
            return self.gamma * (np.log(self.eta / mass) - 1.0)

    def cdf_vector(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        with np.errstate(over="ignore"):
            return np.maximum(0.0, 1.0 - self.eta * np.exp(-s / self.gamma - 1.0))

    def regularizer_terms(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_actions,):
            raise ValueError(f"need a length-{self.n_actions} vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("components must lie in [0, 1]")
        # p log(eta/p) with the 0 log 0 = 0 convention
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0.0, p * np.log(self.eta / np.where(p > 0.0, p, 1.0)), 0.0)
        return float(self.gamma * terms.sum())

    def curvature_scale(self) -> float:
        return self.gamma

    def lipschitz_constant(self) -> float:
        return 1.0 / self.gamma

    def to_dict(self) -> dict:
        return {"type": "exponential", "gamma": self.gamma, "eta": self.eta.tolist()}


class UniformFamily(MarginalFamily):
    """Identical uniform marginals on [gamma * (1 - 2N), gamma].

    F(s) = min(1, max(0, 1 - ((1/2) - s / (2 gamma)) / N)).  The induced
    regularizer is gamma * (sum_i p_i - N sum_i p_i^2) and the quantal
    response is the sparse thresholded map (see ``response.sparsemax``).
    """

    kind = "uniform"

    def __init__(self, gamma: float, n_actions: int) -> None:
        super().__init__(n_actions)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        self.gamma = float(gamma)

    def cdf(self, i: int, s):
        self._check_action(i)
        s = np.asarray(s, dtype=float)
        raw = 1.0 - (0.5 - s / (2.0 * self.gamma)) / self.n_actions
        return np.clip(raw, 0.0, 1.0)

    def quantile(self, i: int, t):
        self._check_action(i)
        t = _check_unit(t)
        out = self.gamma * (1.0 - 2.0 * self.n_actions * (1.0 - t))
        return out if out.ndim else float(out)

    def density_at_quantile(self, i: int, p):
        self._check_action(i)
        p = np.asarray(p, dtype=float)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("density_at_quantile needs p in [0, 1]")
        out = np.full_like(p, 1.0 / (2.0 * self.gamma * self.n_actions))
        return out if out.ndim else float(out)

    def quantile_vector(self, t: np.ndarray) -> np.ndarray:
        t = _check_unit(t)
        return self.gamma * (1.0 - 2.0 * self.n_actions * (1.0 - np.asarray(t, dtype=float)))

    def tail_quantile(self, i: int, mass):
        self._check_action(i)
        mass = _check_unit(mass)
        out = self.gamma * (1.0 - 2.0 * self.n_actions * mass)
        return out if out.ndim else float(out)

    def tail_quantile_vector(self, mass: np.ndarray) -> np.ndarray:
        mass = _check_unit(mass)
        return self.gamma * (1.0 - 2.0 * self.n_actions * np.asarray(mass, dtype=float))

    def cdf_vector(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        raw = 1.0 - (0.5 - s / (2.0 * self.gamma)) / self.n_actions
        return np.clip(raw, 0.0, 1.0)

    def regularizer_terms(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_actions,):
            raise ValueError(f"need a length-{self.n_actions} vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("components must lie in [0, 1]")
        return float(self.gamma * (p.sum() - self.n_actions * np.dot(p, p)))

    def curvature_scale(self) -> float:
        return 2.0 * self.gamma * self.n_actions

    def lipschitz_constant(self) -> float:
        return 1.0 / (2.0 * self.gamma * self.n_actions)

    def _check_action(self, i: int) -> None:
        if not 0 <= i < self.n_actions:
            raise ValueError(f"action index {i} out of range")

    def to_dict(self) -> dict:
        return {"type": "uniform", "gamma": self.gamma, "actions": self.n_actions}


class ParetoFamily(MarginalFamily):
    """Generalized Pareto marginals with shape q > 0 (q != 1) and weights eta.

    F_i(s) = max(0, 1 - eta_i * w(s)^(1/(q-1))) on its support, where
    w(s) = 1/q - s (q - 1) / (gamma q).  The quantile has the closed form
    F_i^{-1}(1 - p) = gamma / (q - 1) * (1 - q (p / eta_i)^(q - 1)); the
    regularizer is integrated numerically.  q -> 1 recovers the exponential
    family and q = 2 with eta = 1/N recovers the uniform family.
    """

    kind = "pareto"

    def __init__(self, gamma: float, q: float, eta) -> None:
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 0:
            raise ValueError("eta must be a per-action vector")
        super().__init__(eta.size)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if q <= 0.0 or q == 1.0:
            raise ValueError("q must be positive and different from 1")
        if np.any(eta <= 0.0) or not np.all(np.isfinite(eta)):
            raise ValueError("eta must be positive and finite")
        self.gamma = float(gamma)
        self.q = float(q)
        self.eta = eta.copy()
        self.eta.setflags(write=False)

    def cdf(self, i: int, s):
        s = np.asarray(s, dtype=float)
        q, g, eta = self.q, self.gamma, self.eta[i]
        w = 1.0 / q - s * (q - 1.0) / (g * q)
        with np.errstate(invalid="ignore", divide="ignore"):
            body = 1.0 - eta * np.power(np.maximum(w, 0.0), 1.0 / (q - 1.0))
        # beyond the zero of w: above the support when q > 1, below it when q < 1
        edge = 1.0 if q > 1.0 else 0.0
        out = np.where(w > 0.0, np.clip(body, 0.0, 1.0), edge)
        return out if out.ndim else float(out)

    def quantile(self, i: int, t):
        t = _check_unit(t)
        p = 1.0 - np.asarray(t, dtype=float)
        q, g, eta = self.q, self.gamma, self.eta[i]
        with np.errstate(divide="ignore"):
            ratio = np.power(p / eta, q - 1.0) if q > 1.0 else _neg_power(p / eta, q - 1.0)
        out = g / (q - 1.0) * (1.0 - q * ratio)
        return out if out.ndim else float(out)

    def density_at_quantile(self, i: int, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p > 1.0):
            raise ValueError("density_at_quantile needs p in (0, 1]")
        q, g, eta = self.q, self.gamma, self.eta[i]
        out = eta / (g * q) * np.power(p / eta, 2.0 - q)
        return out if out.ndim else float(out)

    def quantile_vector(self, t: np.ndarray) -> np.ndarray:
        t = _check_unit(t)
        p = 1.0 - np.asarray(t, dtype=float)
        q, g = self.q, self.gamma
        with np.errstate(divide="ignore"):
            ratio = np.power(p / self.eta, q - 1.0) if q > 1.0 else _neg_power(p / self.eta, q - 1.0)
        return g / (q - 1.0) * (1.0 - q * ratio)

    def tail_quantile(self, i: int, mass):
        mass = _check_unit(mass)
        q, g, eta = self.q, self.gamma, self.eta[i]
        ratio = np.power(mass / eta, q - 1.0) if q > 1.0 else _neg_power(mass / eta, q - 1.0)
        out = g / (q - 1.0) * (1.0 - q * ratio)
        return out if out.ndim else float(out)

    def tail_quantile_vector(self, mass: np.ndarray) -> np.ndarray:
        mass = _check_unit(mass)
        q, g = self.q, self.gamma
        scaled = np.asarray(mass, dtype=float) / self.eta
        ratio = np.power(scaled, q - 1.0) if q > 1.0 else _neg_power(scaled, q - 1.0)
        return g / (q - 1.0) * (1.0 - q * ratio)

    def cdf_vector(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        q, g = self.q, self.gamma
        w = 1.0 / q - s * (q - 1.0) / (g * q)
        with np.errstate(invalid="ignore", divide="ignore"):
            body = 1.0 - self.eta * np.power(np.maximum(w, 0.0), 1.0 / (q - 1.0))
        edge = 1.0 if q > 1.0 else 0.0
        return np.where(w > 0.0, np.clip(body, 0.0, 1.0), edge)

    def to_dict(self) -> dict:
        return {"type": "pareto", "gamma": self.gamma, "q": self.q, "eta": self.eta.tolist()}


def _neg_power(x, e: float):
    """x**e for negative exponents, mapping x = 0 to +inf without warnings."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0.0, np.power(np.where(x > 0.0, x, 1.0), e), np.inf)
    return out


class TabulatedFamily(MarginalFamily):
    """Marginals given by per-action quantile tables, interpolated linearly.

    Each table is a sequence of (t, value) rows with t strictly increasing
    from 0 to 1 and values nondecreasing.  Piecewise-linear quantiles keep the
    regularizer concave and piecewise quadratic, so it integrates exactly.
    """

    kind = "tabulated"

    def __init__(self, tables) -> None:
        grids = []
        for i, table in enumerate(tables):
            arr = np.asarray(table, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
                raise ValueError(f"table {i} must be a list of (t, value) rows")
            ts, vs = arr[:, 0], arr[:, 1]
            if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0.0):
                raise ValueError(f"table {i}: t grid must increase strictly from 0 to 1")
            if np.any(np.diff(vs) < 0.0):
                raise ValueError(f"table {i}: quantile values must be nondecreasing")
            if not np.all(np.isfinite(vs)):
                raise ValueError(f"table {i}: quantile values must be finite")
            grids.append((ts.copy(), vs.copy()))
        super().__init__(len(grids))
        self._grids = grids

    @property
    def strictly_increasing_cdf(self) -> bool:
        # a flat run of quantile values is an atom of the marginal
        return all(np.all(np.diff(vs) > 0.0) for _, vs in self._grids)

    def cdf(self, i: int, s):
        ts, vs = self._grids[i]
        out = np.interp(np.asarray(s, dtype=float), vs, ts)
        return out if out.ndim else float(out)

    def quantile(self, i: int, t):
        t = _check_unit(t)
        ts, vs = self._grids[i]
        out = np.interp(np.asarray(t, dtype=float), ts, vs)
        return out if out.ndim else float(out)

    def quantile_vector(self, t: np.ndarray) -> np.ndarray:
        t = _check_unit(t)
        return np.array([
            float(np.interp(t[i], ts, vs)) for i, (ts, vs) in enumerate(self._grids)
        ])

    def density_at_quantile(self, i: int, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("density_at_quantile needs p in [0, 1]")
        ts, _ = self._grids[i]
        h = min(1e-7, 0.49 * float(np.min(np.diff(ts))))

        def slope(pp: float) -> float:
            lo, hi = max(1.0 - pp - h, 0.0), min(1.0 - pp + h, 1.0)
            dq = self.quantile(i, hi) - self.quantile(i, lo)
            if dq <= 0.0:
                return np.inf
            return (hi - lo) / dq

        if p.ndim:
            return np.array([slope(float(x)) for x in p])
        return slope(float(p))

    def regularizer_terms(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_actions,):
            raise ValueError(f"need a length-{self.n_actions} vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("components must lie in [0, 1]")
        total = 0.0
        for i in range(self.n_actions):
            total += self._exact_tail(i, float(p[i]))
        return total

    def _exact_tail(self, i: int, mass: float) -> float:
        """Exact integral of the piecewise-linear quantile over [1 - mass, 1]."""
        if mass == 0.0:
            return 0.0
        ts, vs = self._grids[i]
        a = 1.0 - mass
        knots = ts[(ts > a) & (ts < 1.0)]
        xs = np.concatenate(([a], knots, [1.0]))
        ys = np.interp(xs, ts, vs)
        return float(np.trapezoid(ys, xs))

    def to_dict(self) -> dict:
        return {
            "type": "tabulated",
            "table": [np.column_stack((ts, vs)).tolist() for ts, vs in self._grids],
        }


def family_from_dict(doc: dict, n_actions: int | None = None) -> MarginalFamily:
    """Build a family from its JSON form; ``n_actions`` fills in defaults.

    Raises ValueError for unknown types, bad parameters, or an action-count
    mismatch with ``n_actions``.
    """
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("family spec must be an object with a 'type' field")
    kind = doc["type"]
    if kind == "exponential":
        eta = doc.get("eta")
        fam: MarginalFamily = ExponentialFamily(
            float(doc.get("gamma", 1.0)), eta=eta,
            n_actions=n_actions if eta is None or np.ndim(eta) == 0 else None,
        )
    elif kind == "uniform":
        n = doc.get("actions", n_actions)
        if n is None:
            raise ValueError("uniform family needs an action count")
        fam = UniformFamily(float(doc.get("gamma", 1.0)), int(n))
    elif kind == "pareto":
        eta = doc.get("eta")
        if eta is None:
            if n_actions is None:
                raise ValueError("pareto family needs eta or an action count")
            eta = np.ones(n_actions)
        elif np.ndim(eta) == 0:
            if n_actions is None:
                raise ValueError("scalar eta needs an action count")
            eta = np.full(int(n_actions), float(eta))
        fam = ParetoFamily(float(doc.get("gamma", 1.0)), float(doc["q"]), eta)
    elif kind == "tabulated":
        fam = TabulatedFamily(doc["table"])
    else:
        raise ValueError(f"unknown family type {kind!r}")
    if n_actions is not None and fam.n_actions != n_actions:
        raise ValueError(
            f"family covers {fam.n_actions} actions, game has {n_actions}"
        )
    return fam
