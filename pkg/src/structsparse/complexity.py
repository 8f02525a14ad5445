"""Approximate operation counts of dictionary learning methods.

Counts are closed-form polynomials in the problem sizes, evaluated with
Python integers so they are exact at any magnitude.

Symbols: ``C`` classes, ``k`` atoms per class, ``n`` training samples per
class, ``d`` signal dimension, ``L`` sparsity level, ``q`` iterations of the
inner solver, ``q2`` ADMM iterations for the shared dictionary. ``c`` and
``N`` are accepted as aliases of ``C`` and ``n``.
"""

from __future__ import annotations

from typing import Callable

_ALIASES = {"c": "C", "N": "n"}


def _dfdl(C, k, n, d, L, **_):
    return C * C * k * n * (2 * d + L * L)


def _lcksvd(C, k, n, d, L, **_):
    return C * C * k * n * (2 * d + 2 * C * k + L * L)


def _nayak(C, k, n, d, q, **_):
    return C * C * k * n * (2 * d + 2 * q * C * k) + C * C * d * k * k


def _fddl_total(C, k, n, d, q, **_):
    return C * C * k * n * (2 * d + 2 * q * C * k) + C**3 * d * k * k


def _dlsi_x(C, k, n, d, q):
    return C * k * (k * d + d * n + q * k * n)


def _edlsi_core(C, k, d, q, last):
    return C * d**3 + C * q * d * k * (q * k + last)


def _copar_x(C, k, n, d, q):
    return C**3 * k * k * (2 * d + C * k + q * n)


def _efddl(C, k, n, d, q):
    return C * C * k * ((q + 1) * k * (d + C * n) + 2 * d * n)


_FORMULAS: dict[str, tuple[tuple[str, ...], Callable[..., int]]] = {
    "dfdl": (("C", "k", "n", "d", "L"), _dfdl),
    "lc-ksvd": (("C", "k", "n", "d", "L"), _lcksvd),
    "nayak": (("C", "k", "n", "d", "q"), _nayak),
    "fddl": (("C", "k", "n", "d", "q"), _fddl_total),
    "o-dlsi-d": (("C", "k", "d", "q"), lambda C, k, d, q, **_: C * q * k * d**3),
    "e-dlsi-d": (("C", "k", "d", "q"), lambda C, k, d, q, **_: _edlsi_core(C, k, d, q, k)),
    "o-fddl-x": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: C * C * k * (d * n + q * C * k * n + C * d * k),
    ),
    "e-fddl-x": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: C * C * k * (d * n + q * C * n * k + d * k),
    ),
    "o-fddl-d": (("C", "k", "n", "d", "q"), lambda C, k, n, d, q, **_: C * d * k * (q * k + C * C * n)),
    "e-fddl-d": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: C * d * k * (C * n + C * q * k) + C**3 * k * k * n,
    ),
    "o-dlsi": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: _dlsi_x(C, k, n, d, q) + C * q * k * d**3,
    ),
    "e-dlsi": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: _dlsi_x(C, k, n, d, q) + _edlsi_core(C, k, d, q, d),
    ),
    "o-fddl": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: C * C * d * k * (n + C * k + C * n) + C * k * k * q * (d + C * C * n),
    ),
    "e-fddl": (("C", "k", "n", "d", "q"), lambda C, k, n, d, q, **_: _efddl(C, k, n, d, q)),
    "o-copar": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: _copar_x(C, k, n, d, q) + C * q * k * d**3,
    ),
    "e-copar": (
        ("C", "k", "n", "d", "q"),
        lambda C, k, n, d, q, **_: _copar_x(C, k, n, d, q) + _edlsi_core(C, k, d, q, d),
    ),
    "lrsdl": (
        ("C", "k", "n", "d", "q", "q2"),
        lambda C, k, n, d, q, q2, **_: _efddl(C, k, n, d, q) + C * C * d * k * n + (q + q2) * d * k * k,
    ),
}

METHODS = tuple(_FORMULAS)


def required_params(method: str) -> tuple[str, ...]:
    """Parameter names ``method`` needs."""
    return _FORMULAS[_method_key(method)][0]


def _method_key(method: str) -> str:
    key = method.strip().lower().replace("_", "-")
    key = {"lcksvd": "lc-ksvd"}.get(key, key)
    if key not in _FORMULAS:
        raise KeyError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return key


def complexity_eval(method: str, **params: int) -> int:
    """Approximate number of multiplications for ``method``.

    Example:
        >>> complexity_eval("dfdl", c=2, k=500, N=10000, d=1200, L=30)
        66000000000

    Raises:
        KeyError: unknown method.
        ValueError: missing, non-integer or non-positive parameter.
    """
    key = _method_key(method)
    names, fn = _FORMULAS[key]
    vals: dict[str, int] = {}
    for name, v in params.items():
        if v is None:
            continue
        canon = _ALIASES.get(name, name)
        if isinstance(v, bool) or int(v) != v:
            raise ValueError(f"parameter {name} must be an integer, got {v!r}")
        if canon in vals and vals[canon] != int(v):
            raise ValueError(f"conflicting values for {canon}")
        vals[canon] = int(v)
    missing = [n for n in names if n not in vals]
    if missing:
        raise ValueError(f"{key} needs parameters {', '.join(missing)}")
    bad = [n for n in names if vals[n] <= 0]
    if bad:
        raise ValueError(f"parameters must be positive: {', '.join(bad)}")
    return int(fn(**{n: vals[n] for n in names}))
