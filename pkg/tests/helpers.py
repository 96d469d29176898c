"""Shared zoo lists and ground-truth comparisons for the test suite."""

import numpy as np

from dqms import zoo
from dqms.linalg import trace_norm

# name -> (dim H0, sorted [(d, m)], cycle type of pi)
NAMED = {
    "identity-2": (0, [(2, 1)], (1,)),
    "identity-3": (0, [(3, 1)], (1,)),
    "depolarizing-2": (0, [(1, 2)], (1,)),
    "depolarizing-3": (0, [(1, 3)], (1,)),
    "pinching-2-1": (0, [(1, 1), (2, 1)], (1, 1)),
    "shift-dephase-3": (0, [(1, 1), (1, 1), (1, 1)], (3,)),
    "ad-0.5": (1, [(1, 1)], (1,)),
    "ad-0.75": (1, [(1, 1)], (1,)),
    "transient-qutrit": (1, [(2, 1)], (1,)),
}

RANDOM_SEEDS = list(range(20))
ZOO_NAMES = list(NAMED) + [f"random-block-{s}" for s in RANDOM_SEEDS]


def expected_structure(name):
    """``(dim_h0, sorted (d, m) pairs, cycle type)`` from the construction."""
    if name in NAMED:
        return NAMED[name]
    truth = zoo.random_block(int(name.rsplit("-", 1)[1]))
    pairs = sorted((b.d, b.m) for b in truth.blocks)
    return truth.dim_h0, pairs, tuple(truth.cycle_type)


def observed_structure(decomp):
    pairs = sorted(zip(decomp.ds, decomp.ms))
    return decomp.dim_h0, pairs, tuple(decomp.cycle_type)


def delta_errors(decomp, truth):
    """Trace distance between recovered and constructed ``W (I/d kron delta) W^dag``.

    The embedded state does not depend on the frame chosen inside each
    block, so it compares ``delta_k`` without fixing a basis. Blocks are
    matched by support overlap.
    """
    errs = []
    used = set()
    for b in decomp.blocks:
        mine = b.embed(np.eye(b.d) / b.d)
        best, best_k = -1.0, None
        for k, w in enumerate(truth.embeddings):
            if k in used:
                continue
            overlap = np.trace(w.conj().T @ mine @ w).real
            if overlap > best:
                best, best_k = overlap, k
        used.add(best_k)
        spec = truth.blocks[best_k]
        w = truth.embeddings[best_k]
        theirs = w @ np.kron(np.eye(spec.d) / spec.d, spec.delta) @ w.conj().T
        errs.append(trace_norm(mine - theirs))
    return errs


ACCEPTANCE_LINES = {}


class criterion:
    """Record a PASS/FAIL line for acceptance criterion ``k``; failures propagate."""

    def __init__(self, k, title):
        self.k, self.title = k, title
        self.notes = []

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        extra = "; ".join(self.notes)
        if exc_type is not None:
            extra = f"{extra}; {exc_type.__name__}: {exc}".strip("; ")
        line = f"{status} criterion {self.k:2d}: {self.title}" + (f" ({extra})" if extra else "")
        ACCEPTANCE_LINES[self.k] = line
        print(line)
        return False
