"""Monotone transforms with first-order (delta method) variance propagation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logit

from .core import Dataset, FirstStageRecord
from .errors import DomainError, UsageError

KINDS = ("identity", "log", "logit", "power")


@dataclass(frozen=True)
class TransformSpec:
    """``f(z) = g(scale * z)`` for a named ``g``.

    ``exponent`` is only meaningful for ``kind="power"``.
    """

    kind: str = "identity"
    scale: float = 1.0
    exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown transform {self.kind!r}; expected one of {KINDS}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise UsageError("transform scale must be positive")
        if self.kind == "power":
            if self.exponent is None or not np.isfinite(self.exponent) or self.exponent <= 0:
                raise UsageError("power transform needs a positive exponent")

    @classmethod
    def parse(cls, text: str, scale: float = 1.0) -> "TransformSpec":
        """Parse ``identity``, ``log``, ``logit``, ``power:0.5`` or ``power(0.5)``."""
        text = text.strip().lower()
        m = re.fullmatch(r"power[:(]\s*([-+0-9.eE]+)\s*\)?", text)
        if m:
            return cls("power", scale, float(m.group(1)))
        return cls(text, scale)

    def label(self) -> str:
        return f"power({self.exponent:g})" if self.kind == "power" else self.kind

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d) -> "TransformSpec":
        return cls(d.get("kind", "identity"), float(d.get("scale", 1.0)), d.get("exponent"))

    # -- evaluation -------------------------------------------------------

    def check_domain(self, z):
        cz = self.scale * np.asarray(z, dtype=float)
        if self.kind == "identity":
            bad = ~np.isfinite(cz)
        elif self.kind == "logit":
            bad = ~((cz > 0) & (cz < 1))
        elif self.kind in ("log", "power"):
            bad = ~(cz > 0)
        bad = np.atleast_1d(bad)
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(
                f"value {np.atleast_1d(z)[i]!r} outside the domain of {self.label()} "
                f"with scale {self.scale:g}",
                index=i,
            )

    def __call__(self, z):
        self.check_domain(z)
        cz = self.scale * np.asarray(z, dtype=float)
        if self.kind == "identity":
            return cz
        if self.kind == "log":
            return np.log(cz)
        if self.kind == "logit":
            return logit(cz)
        return cz**self.exponent

    def derivative(self, z):
        """d/dz of g(scale * z)."""
        self.check_domain(z)
        z = np.asarray(z, dtype=float)
        c = self.scale
        if self.kind == "identity":
            return np.full_like(z, c)
        if self.kind == "log":
            # scale cancels: d/dz log(c z) = 1/z
            return 1.0 / z
        if self.kind == "logit":
            cz = c * z
            return c / (cz * (1.0 - cz))
        p = self.exponent
        return p * c * (c * z) ** (p - 1.0)

    def inverse(self, x):
        """Map a transformed value back to the raw scale (display only)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            cz = x
        elif self.kind == "log":
            cz = np.exp(x)
        elif self.kind == "logit":
            cz = expit(x)
        else:
            cz = np.where(x > 0, x, np.nan) ** (1.0 / self.exponent)
        return cz / self.scale


IDENTITY = TransformSpec()


def propagate_variance(value, variance, spec: TransformSpec):
    """Delta-method variance of ``spec(value)``: ``f'(value)**2 * variance``.

    Works elementwise on arrays. Raises :class:`DomainError` naming the first
    offending element when ``value`` lies outside the transform's domain.
    """
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise DomainError("variance must be non-negative")
    out = spec.derivative(value) ** 2 * variance
    return float(out) if np.ndim(out) == 0 else out


def transform_dataset(
    records: Sequence[FirstStageRecord],
    spec_x: TransformSpec = IDENTITY,
    spec_y: TransformSpec = IDENTITY,
) -> Dataset:
    """Turn first-stage records into second-stage observations.

    All records are checked before anything is produced, so a domain error in
    any row aborts the whole transformation.
    """
    z = np.array([r.z for r in records], dtype=float)
    w = np.array([r.w for r in records], dtype=float)
    var_z = np.array([r.var_z for r in records], dtype=float)
    var_w = np.array([r.var_w for r in records], dtype=float)
    weight = np.array([r.weight for r in records], dtype=float)
    spec_x.check_domain(z)
    spec_y.check_domain(w)
    return Dataset(
        x=spec_x(z),
        y=spec_y(w),
        var_x=np.atleast_1d(propagate_variance(z, var_z, spec_x)),
        var_y=np.atleast_1d(propagate_variance(w, var_w, spec_y)),
        weight=weight,
    )


def records_from_dataset(dataset: Dataset) -> list[FirstStageRecord]:
    """View a second-stage dataset as raw records (used when transforming x,y CSVs)."""
    return [
        FirstStageRecord(o.x, o.y, o.var_x, o.var_y, o.weight) for o in dataset.observations
    ]
