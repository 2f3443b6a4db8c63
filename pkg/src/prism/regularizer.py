"""Differentiable shape penalty and a toy drift demonstration.

The shape penalty is 1 - omega(Z_ref, Z_cur): zero when current features
match the reference up to positive scaling, 2 when they are anti-aligned.
Because omega is scale-invariant, the penalty constrains feature *geometry*
without pinning feature magnitude, which makes it usable as a training-time
regularizer against backbone drift. Its gradient with respect to the
current features has the closed form

    d omega / d Z = Z_ref / (a b) - Tr(Z_ref^T Z) * Z / (a b^3),
    a = ||Z_ref||_F,  b = ||Z||_F,

and the penalty gradient is the negation.

The drift demo realizes the full training objective
task_CE + lambda * (1 - omega) on a deliberately small system: a linear
backbone under full-batch gradient descent, a fixed linear head, and a task
whose labels come from a different random teacher so the unregularized run
is guaranteed to drift away from its initialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix, check_same_shape
from .errors import DegenerateInputError
from .geometry import omega_trace
from .oracle import empirical_risk

DEFAULT_LAMBDA_GRID = (0.0, 0.01, 0.05, 0.1, 0.5, 1.0)
DEFAULT_DEMO_SEEDS = tuple(range(8))


@dataclass(frozen=True)
class PenaltyGradient:
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class DemoResult:
    lam: float
    steps: int
    omega_trajectory: list[float]
    task_loss_trajectory: list[float]
    downstream_gap_trajectory: list[float]
    diverged: bool = False


def shape_penalty(z_ref, z_cur) -> float:
    """1 - omega(Z_ref, Z_cur), in [0, 2]."""
    z_ref = as_matrix(z_ref, "Z_ref")
    if float(np.linalg.norm(z_ref)) == 0.0:
        raise DegenerateInputError("shape penalty undefined for a zero reference matrix")
    return 1.0 - omega_trace(z_ref, z_cur)


def shape_penalty_grad(z_ref, z_cur) -> PenaltyGradient:
    """Penalty value together with its analytic gradient in Z_cur.

    The gradient vanishes identically on the ray Z_cur = c * Z_ref (c > 0):
    omega is stationary there because it is scale-invariant.
    """
    z_ref = as_matrix(z_ref, "Z_ref")
    z_cur = as_matrix(z_cur, "Z_cur")
    check_same_shape(z_ref, z_cur, "Z_ref", "Z_cur")
    a = float(np.linalg.norm(z_ref))
    b = float(np.linalg.norm(z_cur))
    if a == 0.0 or b == 0.0:
        raise DegenerateInputError("shape penalty gradient undefined for zero-norm input")
    t = float(np.sum(z_ref * z_cur))
    d_omega = z_ref / (a * b) - (t / (a * b ** 3)) * z_cur
    value = 1.0 - min(1.0, max(-1.0, t / (a * b)))
    return PenaltyGradient(value=value, grad=-d_omega)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def drift_demo(
    seed: int,
    lam: float,
    steps: int,
    lr: float,
    input_dim: int = 12,
    hidden_dim: int = 8,
    vocab: int = 12,
    n_task: int = 96,
    n_ref: int = 32,
    n_down: int = 96,
) -> DemoResult:
    """Fine-tuning drift with and without the shape penalty, end to end.

    A linear backbone (input_dim x hidden_dim) followed by a fixed linear
    head is trained by full-batch gradient descent on cross-entropy against
    labels produced by an independent random teacher, optionally plus
    lambda * (1 - omega) on a fixed reference batch. Per step the demo
    records omega between frozen and current reference features, the task
    loss, and the downstream empirical risk gap against the frozen model
    (downstream labels are the frozen model's own argmax predictions, so
    the gap starts at zero and grows with drift).

    Trajectories have length steps + 1 (initial state plus one point per
    step) unless the task loss turns NaN, in which case the run aborts with
    the partial trajectories and diverged=True.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")

    root = np.random.SeedSequence(seed).spawn(6)
    rng_theta, rng_teacher, rng_head, rng_task, rng_ref, rng_down = (
        np.random.Generator(np.random.PCG64(s)) for s in root
    )

    theta0 = rng_theta.standard_normal((input_dim, hidden_dim)) / math.sqrt(input_dim)
    teacher = rng_teacher.standard_normal((input_dim, hidden_dim)) / math.sqrt(input_dim)
    head = rng_head.standard_normal((hidden_dim, vocab)) / math.sqrt(hidden_dim)

    x_task = rng_task.standard_normal((n_task, input_dim))
    x_ref = rng_ref.standard_normal((n_ref, input_dim))
    x_down = rng_down.standard_normal((n_down, input_dim))

    y_task = np.argmax(x_task @ teacher @ head, axis=1)
    y_down = np.argmax(x_down @ theta0 @ head, axis=1)

    z_ref_frozen = x_ref @ theta0
    risk_down_frozen = empirical_risk(x_down @ theta0, head, y_down)

    theta = theta0.copy()
    omegas: list[float] = []
    task_losses: list[float] = []
    gaps: list[float] = []
    diverged = False

    # Feature magnitudes past this are treated as divergence outright; the cap
    # also keeps every downstream norm/logit computation overflow-free.
    blowup_limit = 1e150

    def observe() -> bool:
        """Record one trajectory point; False once the run has blown up."""
        z_ref_cur = x_ref @ theta
        z_task_cur = x_task @ theta
        z_down_cur = x_down @ theta
        for z in (z_ref_cur, z_task_cur, z_down_cur):
            if not np.isfinite(z).all() or np.abs(z).max() > blowup_limit:
                return False
        omegas.append(omega_trace(z_ref_frozen, z_ref_cur))
        task_losses.append(empirical_risk(z_task_cur, head, y_task))
        gaps.append(abs(risk_down_frozen - empirical_risk(z_down_cur, head, y_down)))
        return True

    observe()
    for _ in range(steps):
        probs = _softmax(x_task @ theta @ head)
        probs[np.arange(n_task), y_task] -= 1.0
        grad = x_task.T @ probs @ head.T / n_task
        if lam > 0.0:
            pen = shape_penalty_grad(z_ref_frozen, x_ref @ theta)
            grad = grad + lam * (x_ref.T @ pen.grad)
        theta = theta - lr * grad
        if not observe():
            diverged = True
            break

    return DemoResult(
        lam=lam,
        steps=steps,
        omega_trajectory=omegas,
        task_loss_trajectory=task_losses,
        downstream_gap_trajectory=gaps,
        diverged=diverged,
    )


def gradient_check(seed: int = 0, instances: int = 50, coords: int = 20,
                   rows: int = 6, cols: int = 4) -> float:
    """Max relative disagreement between the analytic penalty gradient and
    central finite differences over random instances and coordinates.

    Step size follows h = 1e-5 * (1 + |entry|) per probed coordinate.
    """
    if instances < 1 or coords < 1:
        raise ValueError("instances and coords must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        z_ref = rng.standard_normal((rows, cols))
        z_cur = rng.standard_normal((rows, cols))
        analytic = shape_penalty_grad(z_ref, z_cur).grad
        for _ in range(coords):
            i = int(rng.integers(rows))
            j = int(rng.integers(cols))
            h = 1e-5 * (1.0 + abs(z_cur[i, j]))
            z_plus = z_cur.copy()
            z_plus[i, j] += h
            z_minus = z_cur.copy()
            z_minus[i, j] -= h
            fd = (shape_penalty(z_ref, z_plus) - shape_penalty(z_ref, z_minus)) / (2 * h)
            rel = abs(analytic[i, j] - fd) / max(abs(fd), abs(analytic[i, j]), 1e-8)
            if rel > worst:
                worst = rel
    return worst


def demo_to_csv(result: DemoResult) -> str:
    """Per-step trajectory CSV: step, omega, task_loss, downstream_gap."""
    lines = ["step,omega,task_loss,downstream_gap"]
    for i, (o, l, g) in enumerate(zip(
        result.omega_trajectory, result.task_loss_trajectory, result.downstream_gap_trajectory
    )):
        lines.append(f"{i},{o:.17g},{l:.17g},{g:.17g}")
    return "\n".join(lines) + "\n"
