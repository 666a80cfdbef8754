"""Closed-form first and second Haar moments, with Monte-Carlo verification.

The closed forms are the element-wise Weingarten formulas

    E[w_ij w*_pq] = delta_ip delta_jq / d
    E[w_i1j1 w_i2j2 w*_i1'j1' w*_i2'j2']
        = (D1 - D2/d) / (d^2 - 1)

(D1, D2 the direct and crossed index-pairing delta products) plus the trace
identities they imply for conjugation averages E[Tr[W A W^t B]] and friends.
Every oracle here is checked against direct sampling over Haar unitaries at
3 standard errors; the sampler's exactness (Ginibre + phase-fixed QR) is what
makes these tests meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import spawn_rng

MIN_CHECK_SAMPLES = 10_000
_BATCH = 10_000


def lemma1_value(A: np.ndarray, B: np.ndarray, d: int) -> complex:
    """E[Tr[W A W^t B]] = Tr[A] Tr[B] / d."""
    return complex(np.trace(A) * np.trace(B) / d)


def lemma2_value(A, B, C, D, d: int) -> complex:
    """E[Tr[W A W^t B W C W^t D]]."""
    trA, trB, trC, trD = (complex(np.trace(M)) for M in (A, B, C, D))
    trAC = complex(np.trace(A @ C))
    trBD = complex(np.trace(B @ D))
    return (trA * trC * trBD + trAC * trB * trD) / (d**2 - 1) - (
        trAC * trBD + trA * trB * trC * trD
    ) / (d * (d**2 - 1))


def lemma3_value(A, B, C, D, d: int) -> complex:
    """E[Tr[W A W^t B] Tr[W C W^t D]]."""
    trA, trB, trC, trD = (complex(np.trace(M)) for M in (A, B, C, D))
    trAC = complex(np.trace(A @ C))
    trBD = complex(np.trace(B @ D))
    return (trA * trB * trC * trD + trAC * trBD) / (d**2 - 1) - (
        trAC * trB * trD + trA * trC * trBD
    ) / (d * (d**2 - 1))


def lemma5_reduction(A: np.ndarray, d_w: int) -> np.ndarray:
    """E[(I (x) W) A (I (x) W^t)] = Tr_w[A] (x) I / d_w on a bipartite space."""
    dim = A.shape[0]
    if dim % d_w != 0:
        raise ValueError("A's dimension must be divisible by d_w")
    d_rest = dim // d_w
    a4 = A.reshape(d_rest, d_w, d_rest, d_w)
    tr_w = np.einsum("ajcj->ac", a4)
    return np.kron(tr_w, np.eye(d_w)) / d_w


def first_moment_value(d: int, i: int, j: int, ip: int, jp: int) -> complex:
    return complex((i == ip) * (j == jp) / d)


def second_moment_value(d: int, idx) -> complex:
    """E[w_i1j1 w_i2j2 w*_i1'j1' w*_i2'j2'] for the index tuple ``idx``."""
    i1, j1, i2, j2, i1p, j1p, i2p, j2p = idx
    d1 = (i1 == i1p) * (i2 == i2p) * (j1 == j1p) * (j2 == j2p) + (i1 == i2p) * (
        i2 == i1p
    ) * (j1 == j2p) * (j2 == j1p)
    d2 = (i1 == i1p) * (i2 == i2p) * (j1 == j2p) * (j2 == j1p) + (i1 == i2p) * (
        i2 == i1p
    ) * (j1 == j1p) * (j2 == j2p)
    return complex((d1 - d2 / d) / (d**2 - 1))


def _haar_batch(d: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, d, d) stack of independent Haar unitaries."""
    g = rng.standard_normal((size, d, d)) + 1j * rng.standard_normal((size, d, d))
    q, r = np.linalg.qr(g)
    diag = np.einsum("bii->bi", r)
    return q * (diag / np.abs(diag))[:, None, :]


def _conjugate_batch(w: np.ndarray, A: np.ndarray) -> np.ndarray:
    """W A W^t for a (batch, d, d) stack of unitaries."""
    return np.matmul(np.matmul(w, A), w.conj().transpose(0, 2, 1))


@dataclass(frozen=True)
class MomentCheckReport:
    which: str
    d: int
    n_samples: int
    closed_form: complex
    monte_carlo_mean: complex
    std_error: float
    passed: bool
    detail: str = ""


def _finalize(which, d, n, closed, samples_sum, samples_sq_sum) -> MomentCheckReport:
    mean = samples_sum / n
    var = samples_sq_sum / n - abs(mean) ** 2
    se = float(np.sqrt(max(var, 0.0) / n))
    diff = abs(mean - closed)
    return MomentCheckReport(
        which=which,
        d=d,
        n_samples=n,
        closed_form=complex(closed),
        monte_carlo_mean=complex(mean),
        std_error=se,
        passed=bool(diff <= 3 * se + 1e-15),
    )


def moment_check(which: str, n_samples: int, seed: int, **inputs) -> MomentCheckReport:
    """Monte-Carlo check of one closed-form moment at 3 standard errors.

    ``which`` is one of ``lemma1``, ``lemma2``, ``lemma3``, ``lemma5``,
    ``first-moment``, ``second-moment``; ``inputs`` carries the operators /
    index tuples the check needs.
    """
    if n_samples < MIN_CHECK_SAMPLES:
        raise ValueError(f"moment checks need at least {MIN_CHECK_SAMPLES} samples")
    rng = spawn_rng(seed, 0)

    if which == "lemma5":
        return _lemma5_check(n_samples, rng, **inputs)

    if which == "lemma1":
        A, B, d = inputs["A"], inputs["B"], inputs["d"]
        closed = lemma1_value(A, B, d)

        def estimator(w):
            conj = _conjugate_batch(w, A)
            return np.einsum("bij,ji->b", conj, B)

    elif which == "lemma2":
        A, B, C, D, d = (inputs[k] for k in ("A", "B", "C", "D", "d"))
        closed = lemma2_value(A, B, C, D, d)

        def estimator(w):
            m1 = _conjugate_batch(w, A)
            m2 = _conjugate_batch(w, C)
            z = np.matmul(np.matmul(m1, B), np.matmul(m2, D))
            return np.einsum("bii->b", z)

    elif which == "lemma3":
        A, B, C, D, d = (inputs[k] for k in ("A", "B", "C", "D", "d"))
        closed = lemma3_value(A, B, C, D, d)

        def estimator(w):
            t1 = np.einsum("bij,ji->b", _conjugate_batch(w, A), B)
            t2 = np.einsum("bij,ji->b", _conjugate_batch(w, C), D)
            return t1 * t2

    elif which == "first-moment":
        d = inputs["d"]
        i, j, ip, jp = inputs["indices"]
        closed = first_moment_value(d, i, j, ip, jp)

        def estimator(w):
            return w[:, i, j] * w[:, ip, jp].conj()

    elif which == "second-moment":
        d = inputs["d"]
        i1, j1, i2, j2, i1p, j1p, i2p, j2p = inputs["indices"]
        closed = second_moment_value(d, inputs["indices"])

        def estimator(w):
            return (
                w[:, i1, j1]
                * w[:, i2, j2]
                * w[:, i1p, j1p].conj()
                * w[:, i2p, j2p].conj()
            )

    else:
        raise ValueError(f"unknown moment check {which!r}")

    total = 0.0 + 0.0j
    total_sq = 0.0
    done = 0
    while done < n_samples:
        b = min(_BATCH, n_samples - done)
        vals = estimator(_haar_batch(d, b, rng))
        total += vals.sum()
        total_sq += float(np.abs(vals) ** 2 @ np.ones(b))
        done += b
    return _finalize(which, d, n_samples, closed, total, total_sq)


def _lemma5_check(n_samples: int, rng, *, A: np.ndarray, d_w: int) -> MomentCheckReport:
    """Element-wise check of the conjugation average against Tr_w[A] (x) I / d_w.

    Reports the worst element (largest |deviation| / stderr); passes when even
    that one sits within 3 standard errors.
    """
    dim = A.shape[0]
    d_rest = dim // d_w
    a4 = A.reshape(d_rest, d_w, d_rest, d_w)
    closed = lemma5_reduction(A, d_w)

    total = np.zeros((dim, dim), dtype=complex)
    total_sq = np.zeros((dim, dim))
    done = 0
    while done < n_samples:
        b = min(_BATCH, n_samples - done)
        w = _haar_batch(d_w, b, rng)
        # (I (x) W) A (I (x) W^t), batched over samples
        out = np.einsum("bij,ajck,blk->baicl", w, a4, w.conj())
        out = out.reshape(b, dim, dim)
        total += out.sum(axis=0)
        total_sq += (np.abs(out) ** 2).sum(axis=0)
        done += b
    mean = total / n_samples
    var = total_sq / n_samples - np.abs(mean) ** 2
    se = np.sqrt(np.maximum(var, 0.0) / n_samples)
    dev = np.abs(mean - closed)
    z = dev / np.maximum(se, 1e-30)
    worst = np.unravel_index(int(np.argmax(z)), z.shape)
    return MomentCheckReport(
        which="lemma5",
        d=d_w,
        n_samples=n_samples,
        closed_form=complex(closed[worst]),
        monte_carlo_mean=complex(mean[worst]),
        std_error=float(se[worst]),
        passed=bool(np.all(dev <= 3 * se + 1e-15)),
        detail=f"worst element {worst}",
    )


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


# Index tuples covering every structurally distinct delta pattern of the
# second-moment formula (direct, swapped, crossed, fully diagonal, mixed
# diagonal, and a vanishing case).
SECOND_MOMENT_PATTERNS = (
    (0, 0, 1, 1, 0, 0, 1, 1),
    (0, 0, 1, 1, 1, 1, 0, 0),
    (0, 0, 1, 1, 0, 1, 1, 0),
    (0, 0, 0, 0, 0, 0, 0, 0),
    (0, 0, 0, 1, 0, 0, 0, 1),
    (0, 0, 0, 0, 0, 1, 0, 0),
)

FIRST_MOMENT_PATTERNS = ((0, 0, 0, 0), (0, 1, 0, 1), (0, 0, 1, 0), (0, 0, 0, 1))


def standard_battery(n_samples: int, seed: int, dims=(2, 4)) -> list[MomentCheckReport]:
    """The canned check set used by the CLI and the acceptance suite."""
    reports = []
    for d in dims:
        rng = spawn_rng(seed, d)
        ops = {name: random_matrix(d, rng) for name in "ABCD"}
        reports.append(moment_check("lemma1", n_samples, seed + d, A=ops["A"], B=ops["B"], d=d))
        reports.append(moment_check("lemma2", n_samples, seed + d, d=d, **ops))
        reports.append(moment_check("lemma3", n_samples, seed + d, d=d, **ops))
        reports.append(
            moment_check(
                "lemma5", n_samples, seed + d, A=random_matrix(2 * d, rng), d_w=d
            )
        )
        for idx in FIRST_MOMENT_PATTERNS:
            reports.append(
                moment_check("first-moment", n_samples, seed + d, d=d, indices=idx)
            )
        for idx in SECOND_MOMENT_PATTERNS:
            reports.append(
                moment_check("second-moment", n_samples, seed + d, d=d, indices=idx)
            )
    return reports
