"""Pure numpy coordinate-descent kernel, vectorised over the batch axis.

Used when the compiled extension is unavailable; semantics match
``_ckernels.layer_pass`` exactly.
"""

import numpy as np

LINEAR, NONNEGATIVE, UNIT_INTERVAL = 0, 1, 2


def layer_pass(WT, z, a, z_next, a_next, kind, gamma, colsq):
    """One in-order pass of exact coordinate minimisation over a hidden layer.

    ``WT`` is the transposed outgoing weight matrix ``(n_k, n_{k+1})``; ``z``
    and ``a`` are the layer's activations and pre-activations, ``z_next`` and
    ``a_next`` those of the following layer. ``z`` and ``a_next`` are updated
    in place. Returns the largest absolute coordinate change.
    """
    max_change = 0.0
    for j in range(WT.shape[0]):
        col = WT[j]
        cj = colsq[j]
        zj = z[:, j]
        num = a[:, j] + gamma * ((z_next - a_next) @ col + cj * zj)
        new = num / (1.0 + gamma * cj)
        if kind == NONNEGATIVE:
            np.maximum(new, 0.0, out=new)
        elif kind == UNIT_INTERVAL:
            np.clip(new, 0.0, 1.0, out=new)
        d = new - zj
        z[:, j] = new
        a_next += d[:, None] * col
        m = np.max(np.abs(d))
        if m > max_change:
            max_change = m
    return float(max_change)
