"""Central finite-difference oracle for gradient checks.

Independent of the tape: it only perturbs raw float buffers and re-runs a
forward closure, so it validates the analytic gradients rather than assuming
them. Errors are reported relative to the scale of the compared vectors.
"""

import numpy as np

FD_H = 1e-5


def fd_grad(f, tensor, h=FD_H):
    """Central-difference gradient of scalar f() w.r.t. tensor.data."""
    g = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def fd_grad_components(f, tensor, indices, h=FD_H):
    """Central differences at selected flat indices only."""
    flat = tensor.data.reshape(-1)
    out = np.zeros(len(indices))
    for k, i in enumerate(indices):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        out[k] = (fp - fm) / (2.0 * h)
    return out


def rel_err(analytic, numeric):
    """Max absolute difference relative to the larger vector scale."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    num = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    den = max(float(np.max(np.abs(numeric), initial=0.0)),
              float(np.max(np.abs(analytic), initial=0.0)), 1e-10)
    return num / den
