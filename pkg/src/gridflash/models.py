"""Parametric thermodynamic models.

Gibbs energy of mixing for binary and ternary liquids with trainable
parameters and analytic derivatives, plus a reduced van der Waals Helmholtz
model for the pure-component vapor-pressure application.

Conventions:
    . binary models take the mole fraction of component 1 as a scalar or
      1-D array; multicomponent models take full composition vectors as rows
    . every energy is molar and dimensionless (units of RT); the van der
      Waals Helmholtz energy is in units of R*T_c
    . Δg_mix = (excess part) + Σ x_i ln x_i, with the excess part scaled by
      x(1-x) so the mixing energy vanishes at the pure-component boundaries
"""

import numpy as np

from .grids import SimplexGrid


class NotTrainableError(TypeError):
    """Raised when parameter gradients are requested from a fixed model."""


def _check_interior(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise ValueError("compositions must lie strictly inside (0, 1)")
    return x


def ideal_mixing(x):
    """Ideal Gibbs energy of mixing, Σ x_i ln x_i (always < 0 in the interior).

    Parameters
    ----------
    x : composition vector, or 2-D array with one composition per row.

    Returns
    -------
    float or 1-D array, in units of RT.
    """
    x = _check_interior(x)
    return np.sum(x * np.log(x), axis=-1)


def _ideal_binary(x):
    # binary ideal term from the component-1 fraction alone
    return x * np.log(x) + (1.0 - x) * np.log(1.0 - x)


class GeModel:
    """Base class for excess-Gibbs-energy models.

    Subclasses provide ``gmix`` (and, when trainable, ``param_gradient``
    plus a parameter vector ``theta``). Models are immutable value objects;
    ``with_theta`` returns an updated copy instead of mutating.
    """

    kind = "base"
    n_components = 2
    trainable = False

    def gmix(self, x):
        raise NotImplementedError

    @property
    def theta(self):
        raise NotTrainableError(f"{self.kind} model has no trainable parameters")

    def with_theta(self, theta):
        raise NotTrainableError(f"{self.kind} model has no trainable parameters")

    def param_gradient(self, x):
        raise NotTrainableError(f"{self.kind} model has no trainable parameters")

    def curvature(self, x):
        """Analytic d2(Δg_mix)/dx2 where available; None otherwise."""
        return None

    def spec(self):
        raise NotImplementedError


class IdealModel(GeModel):
    """Pure ideal mixing; no excess term, not trainable."""

    kind = "ideal"

    def gmix(self, x):
        x = _check_interior(x)
        return _ideal_binary(x)

    def curvature(self, x):
        x = _check_interior(x)
        return 1.0 / (x * (1.0 - x))

    def spec(self):
        return {"kind": "ideal"}


class MargulesModel(GeModel):
    """One-parameter symmetric excess model.

    Δg_mix(x) = A x(1-x) + x ln x + (1-x) ln(1-x)

    Symmetric under x -> 1-x; splits into two phases for A > 2 with binodal
    compositions at the roots of ln(x/(1-x)) + A(1-2x) = 0.
    """

    kind = "margules"
    trainable = True

    def __init__(self, A):
        self.A = float(A)

    def gmix(self, x):
        x = _check_interior(x)
        return self.A * x * (1.0 - x) + _ideal_binary(x)

    @property
    def theta(self):
        return np.array([self.A])

    def with_theta(self, theta):
        return MargulesModel(np.asarray(theta, dtype=float).reshape(-1)[0])

    def param_gradient(self, x):
        x = _check_interior(x)
        return np.stack([x * (1.0 - x)], axis=-1)

    def curvature(self, x):
        x = _check_interior(x)
        return -2.0 * self.A + 1.0 / (x * (1.0 - x))

    def spec(self):
        return {"kind": "margules", "A": self.A}


class NRTLModel(GeModel):
    """Binary NRTL model with fixed nonrandomness factor.

    gE/RT = x1 x2 [ τ21 G21/(x1 + x2 G21) + τ12 G12/(x2 + x1 G12) ],
    G_ij = exp(-α τ_ij). Reduces to ideal mixing for τ12 = τ21 = 0.
    The trainable parameters are (τ12, τ21); α stays fixed.
    """

    kind = "nrtl"
    trainable = True

    def __init__(self, tau12, tau21, alpha=0.2):
        self.tau12 = float(tau12)
        self.tau21 = float(tau21)
        self.alpha = float(alpha)

    def excess(self, x):
        x = _check_interior(x)
        x1, x2 = x, 1.0 - x
        g12 = np.exp(-self.alpha * self.tau12)
        g21 = np.exp(-self.alpha * self.tau21)
        return x1 * x2 * (self.tau21 * g21 / (x1 + x2 * g21)
                          + self.tau12 * g12 / (x2 + x1 * g12))

    def gmix(self, x):
        return self.excess(x) + _ideal_binary(np.asarray(x, dtype=float))

    @property
    def theta(self):
        return np.array([self.tau12, self.tau21])

    def with_theta(self, theta):
        t = np.asarray(theta, dtype=float).reshape(-1)
        return NRTLModel(t[0], t[1], self.alpha)

    def param_gradient(self, x):
        x = _check_interior(x)
        x1, x2 = x, 1.0 - x
        a = self.alpha
        g12 = np.exp(-a * self.tau12)
        g21 = np.exp(-a * self.tau21)
        d21 = x1 + x2 * g21
        d12 = x2 + x1 * g12
        # d/dτ of τ G/D with G = exp(-ατ): G[(1-ατ)/D + ατ G x_other / D^2]
        dt21 = g21 * ((1.0 - a * self.tau21) / d21
                      + a * self.tau21 * g21 * x2 / d21 ** 2)
        dt12 = g12 * ((1.0 - a * self.tau12) / d12
                      + a * self.tau12 * g12 * x1 / d12 ** 2)
        return np.stack([x1 * x2 * dt12, x1 * x2 * dt21], axis=-1)

    def spec(self):
        return {"kind": "nrtl", "tau12": self.tau12, "tau21": self.tau21,
                "alpha": self.alpha}


class FlexibleModel(GeModel):
    """Redlich-Kister expansion with trainable coefficients.

    Δg_mix(x) = x(1-x) Σ_k θ_k (2x-1)^k + x ln x + (1-x) ln(1-x)

    θ_0 alone reproduces the Margules model; odd coefficients break the
    x -> 1-x symmetry. All derivatives in x and θ are closed-form.
    """

    kind = "flexible"
    trainable = True

    def __init__(self, theta):
        t = np.asarray(theta, dtype=float).reshape(-1).copy()
        if t.size < 1:
            raise ValueError("theta needs at least one coefficient")
        t.setflags(write=False)
        self._theta = t

    @classmethod
    def zeros(cls, order):
        """Flexible model of polynomial order K with all coefficients zero."""
        return cls(np.zeros(order + 1))

    @property
    def order(self):
        return self._theta.size - 1

    def _poly(self, u):
        f = np.zeros_like(u)
        for k in range(self._theta.size - 1, -1, -1):
            f = f * u + self._theta[k]
        return f

    def gmix(self, x):
        x = _check_interior(x)
        u = 2.0 * x - 1.0
        return x * (1.0 - x) * self._poly(u) + _ideal_binary(x)

    @property
    def theta(self):
        return self._theta

    def with_theta(self, theta):
        return FlexibleModel(theta)

    def param_gradient(self, x):
        x = _check_interior(x)
        u = 2.0 * x - 1.0
        w = x * (1.0 - x)
        return np.stack([w * u ** k for k in range(self._theta.size)], axis=-1)

    def curvature(self, x):
        x = _check_interior(x)
        basis = self.curvature_param_gradient(x)
        return basis @ self._theta + 1.0 / (x * (1.0 - x))

    def curvature_param_gradient(self, x):
        """d/dθ_k of d2(Δg_mix)/dx2, i.e. k(k-1)u^(k-2) - (k+2)(k+1)u^k."""
        x = _check_interior(x)
        u = 2.0 * x - 1.0
        cols = []
        for k in range(self._theta.size):
            c = -(k + 2.0) * (k + 1.0) * u ** k
            if k >= 2:
                c = c + k * (k - 1.0) * u ** (k - 2)
            cols.append(c)
        return np.stack(cols, axis=-1)

    def spec(self):
        return {"kind": "flexible", "theta": self._theta.tolist()}


class SymmetricTernaryModel(GeModel):
    """Ternary model with one shared pairwise interaction.

    Δg_mix(x) = A (x1 x2 + x1 x3 + x2 x3) + Σ x_i ln x_i

    Invariant under any permutation of the components; develops three
    coexisting liquid phases for sufficiently large A.
    """

    kind = "symmetric_ternary"
    n_components = 3

    def __init__(self, A):
        self.A = float(A)

    def gmix(self, x):
        x = _check_interior(x)
        x = np.atleast_2d(x)
        pair = x[:, 0] * x[:, 1] + x[:, 0] * x[:, 2] + x[:, 1] * x[:, 2]
        out = self.A * pair + np.sum(x * np.log(x), axis=1)
        return out if out.size > 1 else float(out[0])

    def spec(self):
        return {"kind": "symmetric_ternary", "A": self.A}


class VdwHelmholtz:
    """Reduced-form van der Waals Helmholtz energy for a pure fluid.

    a(v) = -Tr ln(3v - 1) - 9/(8v) on reduced molar volume v > 1/3, in units
    of R*T_c (temperature-only additive terms dropped; they do not move the
    double tangent). The reduced pressure is p_r = -(8/3) da/dv
    = 8 Tr/(3v - 1) - 3/v^2, equal to 1 at the critical point (Tr=1, v=1).
    """

    kind = "vdw"
    PRESSURE_SCALE = 8.0 / 3.0  # converts -da/dv (RT_c units) to p_c units

    def __init__(self, tr):
        if tr <= 0.0:
            raise ValueError("reduced temperature must be positive")
        self.tr = float(tr)

    def _check_v(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v <= 1.0 / 3.0):
            raise ValueError("reduced volume must exceed 1/3")
        return v

    def helmholtz(self, v):
        v = self._check_v(v)
        return -self.tr * np.log(3.0 * v - 1.0) - 9.0 / (8.0 * v)

    def pressure(self, v):
        v = self._check_v(v)
        return 8.0 * self.tr / (3.0 * v - 1.0) - 3.0 / v ** 2

    def curvature(self, v):
        """d2a/dv2; its sign changes bracket the spinodal volumes."""
        v = self._check_v(v)
        return 9.0 * self.tr / (3.0 * v - 1.0) ** 2 - 9.0 / (4.0 * v ** 3)

    def spec(self):
        return {"kind": "vdw", "tr": self.tr}


def vdw_reduced_helmholtz(tr, v):
    """Reduced van der Waals Helmholtz energy, -Tr ln(3v-1) - 9/(8v)."""
    return VdwHelmholtz(tr).helmholtz(v)


class GibbsCurve:
    """Δg_mix values (units of RT) evaluated on a composition grid."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        npts = grid.n if hasattr(grid, "n") else len(grid.points)
        if values.shape[0] != npts:
            raise ValueError("curve length must match grid size")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @property
    def n(self):
        return self.values.size


def eval_gmix(model, x):
    """Gibbs energy of mixing of ``model`` at composition ``x`` (RT units)."""
    return model.gmix(x)


def eval_curve(model, grid):
    """Evaluate Δg_mix elementwise over a grid."""
    if isinstance(grid, SimplexGrid):
        values = np.atleast_1d(model.gmix(grid.points))
    else:
        values = model.gmix(grid.points)
    return GibbsCurve(grid, values)


def second_derivative(model, x, h=None):
    """Curvature d2(Δg_mix)/dx2 at x, analytic when the model provides one.

    Falls back to the central difference (g(x+h) - 2g(x) + g(x-h))/h^2.
    An explicit h must keep the stencil inside (0, 1); the default (1e-5)
    is clamped per point so boundary-adjacent evaluations stay interior.
    """
    analytic = model.curvature(x)
    if analytic is not None:
        return analytic
    x = np.asarray(x, dtype=float)
    if h is not None:
        if np.any(x - h <= 0.0) or np.any(x + h >= 1.0):
            raise ValueError("finite-difference stencil leaves (0, 1)")
    else:
        h = np.minimum(1e-5, 0.5 * np.minimum(x, 1.0 - x))
    return (model.gmix(x + h) - 2.0 * model.gmix(x) + model.gmix(x - h)) / h ** 2


def param_gradient(model, x):
    """Analytic gradient of Δg_mix with respect to the model parameters."""
    return model.param_gradient(x)


_MODEL_KINDS = {}


def _register(cls, builder):
    _MODEL_KINDS[cls.kind] = builder


_register(IdealModel, lambda s: IdealModel())
_register(MargulesModel, lambda s: MargulesModel(s["A"]))
_register(NRTLModel, lambda s: NRTLModel(s["tau12"], s["tau21"],
                                         s.get("alpha", 0.2)))
_register(FlexibleModel, lambda s: FlexibleModel(s["theta"]))
_register(SymmetricTernaryModel, lambda s: SymmetricTernaryModel(s["A"]))
_register(VdwHelmholtz, lambda s: VdwHelmholtz(s["tr"]))


def model_from_spec(spec):
    """Build a model from a JSON-style mapping, e.g. {"kind": "margules", "A": 2.5}."""
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ValueError("model spec must be a mapping with a 'kind' entry")
    try:
        builder = _MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; "
                         f"expected one of {sorted(_MODEL_KINDS)}")
    return builder(spec)
