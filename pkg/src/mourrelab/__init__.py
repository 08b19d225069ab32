"""Finite-section laboratory for positive-commutator spectral theory of unitary operators.

Submodules
----------
opcore
    Dense matrix substrate: windows, truncated operators, eigendecompositions.
bandalg
    Exact algebra of band operators ``sum_n D_{c_n} T^n``.
models
    GGT (CMV-type) unitary blocks and the truncated Bernoulli-shift Koopman operator.
commutators
    Iterated commutators, the ``B_p`` recursion, ``Q^{+/-}`` and a Gronwall bound.
spectral
    Functional calculus, Mourre constants, virial scans and the commutator symbol.
lap
    Weighted resolvents near the unit circle and spectral densities.
correlations
    Correlation norms and their decay exponents.
experiments, cli
    Config-driven experiment runner.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.1.0"

from .errors import ConfigError, MourreLabError, NumericalFailure  # noqa: E402

__all__ = ["ConfigError", "MourreLabError", "NumericalFailure", "__version__"]
