"""Central finite-difference helpers shared by the gradient tests."""

import numpy as np

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8


def finite_diff(f, arr, eps=FD_STEP):
    """Central differences of scalar f wrt every entry of arr (in place)."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def assert_close_grad(analytic, numeric, label="", rel_tol=REL_TOL, floor=ABS_FLOOR):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    err = np.abs(analytic - numeric) / denom
    worst = float(err.max()) if err.size else 0.0
    assert worst < rel_tol, f"{label}: max relative error {worst:.3e} (tol {rel_tol})"


def check_param_grads(f, params: dict, analytic: dict, label=""):
    """f() recomputes the scalar objective with the current params."""
    for name, arr in params.items():
        numeric = finite_diff(f, arr)
        assert_close_grad(analytic[name], numeric, label=f"{label}{name}")
