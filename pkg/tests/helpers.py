"""Shared sampling and reference-spectrum helpers for the test suite."""
import numpy as np

from lightray.fields import VectorField, d_form_rules
from lightray.spectral import dft_field, sample_field


def spacelike_covectors(rng, n, size):
    """Space-like (tau, xi) rows with |tau| <= 0.95 |xi| and |xi| in [0.2, 3]."""
    xi = rng.normal(size=(size, n))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    xi *= rng.uniform(0.2, 3.0, size=(size, 1))
    tau = rng.uniform(-0.95, 0.95, size) * np.linalg.norm(xi, axis=1)
    return np.concatenate([tau[:, None], xi], axis=1)


def sampled_pair_truth(f, pairs, origin, spacing, counts):
    """True d-form spectra per index pair, via sampling the analytic rules.

    Independent of the hat-function route used elsewhere: each rule is
    sampled on the lattice and transformed with the grid DFT.
    """
    rules = d_form_rules(f)
    dim = len(counts)
    out = []
    for i, j in pairs:
        comp = VectorField((rules[(i, j)],) * dim, envelope=f.envelope)
        g = sample_field(comp, origin=origin, spacing=spacing, counts=counts)
        out.append(dft_field(g).coeffs[0])
    return np.stack(out)


def masked_rel_error(res, truth):
    """Relative l2 distance of recovered pair coefficients over usable bins."""
    m = res.dform.mask.mask & res.dform.recovered
    num = den = 0.0
    for p in range(truth.shape[0]):
        num += float(np.sum(np.abs(res.dform.coeffs[p][m] - truth[p][m]) ** 2))
        den += float(np.sum(np.abs(truth[p][m]) ** 2))
    return float(np.sqrt(num / den))
