"""Central-difference verification of the analytic gradients.

Runs entirely in float64. Checks the gradient of the selected class score
with respect to a random subset of parameters and tap activations; tap
coordinates are finite-differenced by substituting the perturbed activation
and replaying the tail of the network.
"""

from __future__ import annotations

import numpy as np

from . import model as M


def finite_diff_check(model: M.Model, clip: np.ndarray, eps: float = 1e-5,
                      n_coords: int = 200, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients."""
    m64 = model.astype(np.float64)
    clip64 = clip.astype(np.float64)
    logits, tape = M.forward(m64, clip64)
    cls = int(logits[0].argmax())

    dlogits = np.zeros_like(logits)
    dlogits[0, cls] = 1.0
    _, param_grads, adjoints = M.backward(m64, tape, dlogits)
    names = {d.name: i for i, d in enumerate(m64.spec.layers) if d.name is not None}
    tap_indices = [names[t] for t in m64.spec.taps]

    # Flat coordinate space spanning every parameter array and tap activation.
    sites = []
    for i, p in enumerate(m64.params):
        for key in sorted(p):
            sites.append(("param", i, key, p[key].size))
    for idx in tap_indices:
        sites.append(("tap", idx, None, tape.outputs[idx].size))
    total = sum(s[3] for s in sites)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(n_coords, total), replace=False)

    def score_with_param(i, key, j, value):
        old = m64.params[i][key].flat[j]
        m64.params[i][key].flat[j] = value
        out, _ = M.forward(m64, clip64)
        m64.params[i][key].flat[j] = old
        return out[0, cls]

    def score_with_tap(idx, j, value):
        replaced = tape.outputs[idx].copy()
        replaced.flat[j] = value
        out = M.forward_from(m64, tape, idx, replaced)
        return out[0, cls]

    max_err = 0.0
    for flat in np.sort(chosen):
        offset = int(flat)
        for kind, i, key, size in sites:
            if offset < size:
                break
            offset -= size
        if kind == "param":
            base = m64.params[i][key].flat[offset]
            plus = score_with_param(i, key, offset, base + eps)
            minus = score_with_param(i, key, offset, base - eps)
            analytic = param_grads[i][key].flat[offset]
        else:
            base = tape.outputs[i].flat[offset]
            plus = score_with_tap(i, offset, base + eps)
            minus = score_with_tap(i, offset, base - eps)
            analytic = adjoints[i].flat[offset]
        fd = (plus - minus) / (2 * eps)
        err = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)
        max_err = max(max_err, err)
    return max_err
