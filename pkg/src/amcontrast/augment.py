"""Stochastic IQ augmentations and the policy that composes them.

All ops take a (2, T) float array (rails I and Q) and return a new array.
A policy applies the five ops in the fixed order mask -> scale -> shift ->
rotate -> invert, each independently activated with its own Bernoulli draw,
so two policies given independent RNG streams produce independent views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OP_ORDER = ("mask", "scale", "shift", "rotate", "invert")
MIN_RUN = 4
MAX_RUN = 16


def _check_iq(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != 2:
        raise ValueError(f"expected a (2, T) IQ array, got shape {x.shape}")
    return x


def random_mask(x: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Zero exactly floor(fraction * T) columns, laid out as contiguous runs.

    Run lengths are drawn uniformly from [4, 16] samples; the last run is
    truncated so the total hits the exact count. Runs never overlap (their
    placement is a uniform composition of the free space), so the zeroed
    column count is exact for any draw.
    """
    x = _check_iq(x)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"mask fraction must lie in [0, 1], got {fraction}")
    t = x.shape[1]
    target = int(np.floor(fraction * t))
    out = x.copy()
    if target == 0:
        return out
    lengths = []
    remaining = target
    while remaining > 0:
        run = min(int(rng.integers(MIN_RUN, MAX_RUN + 1)), remaining)
        lengths.append(run)
        remaining -= run
    k = len(lengths)
    free = t - target
    # Uniform composition of the free space into k+1 gaps via the
    # stars-and-bars draw; runs are then placed gap/run/gap/run/...
    cuts = np.sort(rng.choice(free + k, size=k, replace=False))
    gaps = np.diff(np.concatenate(([-1], cuts))) - 1
    start = 0
    for gap, run in zip(gaps, lengths):
        start += int(gap)
        out[:, start:start + run] = 0.0
        start += run
    return out


def amplitude_scale(x: np.ndarray, factor: float) -> np.ndarray:
    """Scale both rails by a positive finite factor."""
    x = _check_iq(x)
    if not np.isfinite(factor) or factor <= 0:
        raise ValueError(f"scale factor must be positive and finite, got {factor}")
    return x * factor


def time_shift(x: np.ndarray, k: int) -> np.ndarray:
    """Circularly shift both rails by k samples (positive k delays)."""
    x = _check_iq(x)
    if abs(int(k)) >= x.shape[1]:
        raise ValueError(f"|shift| must be < T={x.shape[1]}, got {k}")
    return np.roll(x, int(k), axis=1)


def phase_rotate(x: np.ndarray, theta: float) -> np.ndarray:
    """Rotate the complex sample sequence by angle theta.

    (I', Q') = (I cos(theta) - Q sin(theta), I sin(theta) + Q cos(theta)).
    """
    x = _check_iq(x)
    if not np.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta}")
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([x[0] * c - x[1] * s, x[0] * s + x[1] * c])


def sign_invert(x: np.ndarray) -> np.ndarray:
    """Negate both rails; equivalent to a pi phase rotation."""
    return -_check_iq(x)


@dataclass(frozen=True)
class AugmentPolicy:
    """Which ops may fire and with what parameter ranges.

    Attributes:
        ops: Subset of OP_ORDER that is enabled; application order is always
            OP_ORDER regardless of the order given here.
        activation_prob: Per-op independent Bernoulli activation probability.
        mask_fraction_range: Uniform range of the zeroed-column fraction.
        scale_range: Uniform range of the amplitude factor.
        max_shift: Largest |shift| in samples; None means T // 4 at apply time.
        rotation_range: Uniform range of the rotation angle in radians.
        rng_seed: Identity of this policy's stream; training derives per-run
            generators from it so two policies stay independent.
    """

    ops: tuple[str, ...] = OP_ORDER
    activation_prob: float = 0.5
    mask_fraction_range: tuple[float, float] = (0.0, 0.25)
    scale_range: tuple[float, float] = (0.5, 2.0)
    max_shift: int | None = None
    rotation_range: tuple[float, float] = (0.0, 2 * np.pi)
    rng_seed: int = 0

    def __post_init__(self):
        unknown = [op for op in self.ops if op not in OP_ORDER]
        if unknown:
            raise ValueError(f"unknown ops {unknown}, expected subset of {OP_ORDER}")
        if len(set(self.ops)) != len(self.ops):
            raise ValueError(f"duplicate ops in {self.ops}")
        if not 0.0 <= self.activation_prob <= 1.0:
            raise ValueError(f"activation_prob must be in [0, 1], got {self.activation_prob}")
        for name, (lo, hi) in (("mask_fraction_range", self.mask_fraction_range),
                               ("scale_range", self.scale_range),
                               ("rotation_range", self.rotation_range)):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be an ordered finite pair, got ({lo}, {hi})")
        if not 0.0 <= self.mask_fraction_range[0] <= self.mask_fraction_range[1] <= 1.0:
            raise ValueError("mask_fraction_range must lie within [0, 1]")
        if self.scale_range[0] <= 0:
            raise ValueError("scale_range must be positive")
        if self.max_shift is not None and self.max_shift < 0:
            raise ValueError(f"max_shift must be >= 0, got {self.max_shift}")


def apply_policy(x: np.ndarray, policy: AugmentPolicy,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw activations and parameters from rng and apply the enabled ops.

    Draw order is fixed (one activation draw per enabled op in OP_ORDER, then
    that op's parameter draw if it fired), so the output is a pure function
    of (x, policy, rng state).
    """
    x = _check_iq(x)
    t = x.shape[1]
    out = x
    for op in OP_ORDER:
        if op not in policy.ops:
            continue
        if rng.random() >= policy.activation_prob:
            continue
        if op == "mask":
            fraction = rng.uniform(*policy.mask_fraction_range)
            out = random_mask(out, fraction, rng)
        elif op == "scale":
            out = amplitude_scale(out, rng.uniform(*policy.scale_range))
        elif op == "shift":
            limit = t // 4 if policy.max_shift is None else policy.max_shift
            out = time_shift(out, int(rng.integers(-limit, limit + 1)))
        elif op == "rotate":
            out = phase_rotate(out, rng.uniform(*policy.rotation_range))
        else:
            out = sign_invert(out)
    return out if out is not x else x.copy()
