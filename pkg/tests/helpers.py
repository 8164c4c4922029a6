"""Shared builders for the test suite."""

import numpy as np

from t2m.calculus import from_scalar_function


def poly_coefficients(rng, n_in, n_out):
    """Random quadratic-plus-cubic coefficients for an R^n_in -> R^n_out polynomial."""
    return (
        rng.standard_normal(n_out),
        rng.standard_normal((n_out, n_in)),
        0.5 * rng.standard_normal((n_out, n_in, n_in)),
        0.2 * rng.standard_normal((n_out, n_in)),
    )


def poly_func(coeffs):
    c0, c1, c2, c3 = coeffs
    n_out, n_in = c1.shape

    def f(y):
        out = []
        for k in range(n_out):
            acc = c0[k]
            for i in range(n_in):
                acc = acc + c1[k, i] * y[i] + c3[k, i] * y[i] * y[i] * y[i]
                for j in range(n_in):
                    acc = acc + c2[k, i, j] * y[i] * y[j]
            out.append(acc)
        return out

    return f


def poly_map(rng, n_in, n_out, name="poly"):
    coeffs = poly_coefficients(rng, n_in, n_out)
    return from_scalar_function(poly_func(coeffs), n_in, n_out, name=name), poly_func(coeffs)


def rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / max(1.0, float(np.linalg.norm(b)))
