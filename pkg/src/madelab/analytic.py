"""Analyticity and harmonicity diagnostics, and machine-checkable verdicts
for the five structural properties of stationary Madelung states.

Two analyticity residuals are computed side by side and reported without
adjudication:

  * orth     = gradS . gradI            (the orthogonality criterion)
  * crStrict = sqrt((Sx - Iy)^2 + (Sy + Ix)^2)   (textbook Cauchy-Riemann
    defect of g = S + iI; strictly stronger than orthogonality)

Equivalence-style properties are scored as boolean agreement of both sides
at one shared tolerance: at finite grid spacing both sides carry O(h^2)
noise, so agreement is the falsifiable form of "if and only if".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .currents import CurrentFields
from .grid import ScalarField, interior_mask, max_norm, rms_norm
from .madelung import MadelungFields

HOLDS = "holds"
FAILS = "fails"
PRECONDITION_NOT_MET = "precondition-not-met"

PROPERTY_NAMES = ("P1", "P2", "P3", "P4", "P5")


class EmptyInteriorError(ValueError):
    """No interior valid cells to diagnose."""


@dataclass
class AnalyticityReport:
    orth: ScalarField
    crStrict: ScalarField
    harmS: ScalarField
    harmI: ScalarField
    norms: dict = field(default_factory=dict)


@dataclass
class PropertyVerdict:
    status: str
    residuals: dict
    tol: float
    note: str = ""


def _norms(f: ScalarField) -> dict:
    return {"max": max_norm(f.values, f.mask), "rms": rms_norm(f.values, f.mask)}


def analyze(m: MadelungFields) -> AnalyticityReport:
    spec = m.spec
    gmask = m.gradS.mask & m.gradI.mask
    orth = ScalarField(
        spec,
        m.gradS.vx * m.gradI.vx + m.gradS.vy * m.gradI.vy,
        gmask.copy(),
    )
    cr = np.sqrt(
        (m.gradS.vx - m.gradI.vy) ** 2 + (m.gradS.vy + m.gradI.vx) ** 2
    )
    crStrict = ScalarField(spec, cr, gmask.copy())
    harmS = ScalarField(spec, m.lapS.values.copy(), m.lapS.mask.copy())
    harmI = ScalarField(spec, m.lapI.values.copy(), m.lapI.mask.copy())
    if not interior_mask(harmS.mask).any():
        raise EmptyInteriorError("empty interior after node masking")
    report = AnalyticityReport(orth, crStrict, harmS, harmI)
    report.norms = {
        "orth": _norms(orth),
        "crStrict": _norms(crStrict),
        "harmS": _norms(harmS),
        "harmI": _norms(harmI),
    }
    return report


def default_tolerance(m: MadelungFields) -> float:
    """max(10 h^2, 1e-8), scaled by the state's typical gradient size."""
    h = max(m.spec.dx, m.spec.dy)
    g = np.sqrt(
        m.gradS.vx**2 + m.gradS.vy**2 + m.gradI.vx**2 + m.gradI.vy**2
    )
    scale = rms_norm(g, m.gradS.mask & m.gradI.mask)
    scale = max(1.0, scale if scale is not None else 1.0)
    return max(10.0 * h * h, 1e-8) * scale


def _max(f: ScalarField | None) -> float | None:
    if f is None:
        return None
    return max_norm(f.values, f.mask)


def check_properties(
    m: MadelungFields,
    c: CurrentFields,
    r: AnalyticityReport,
    tol: float,
) -> dict[str, PropertyVerdict]:
    """Verdicts for the five properties at interior max-norm tolerance tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")

    gradS_mag = np.hypot(m.gradS.vx, m.gradS.vy)
    n_gradS = max_norm(gradS_mag, m.gradS.mask)
    n_orth = _max(r.orth)
    n_harmS = _max(r.harmS)
    n_harmI = _max(r.harmI)
    n_defC = _max(c.defectC)
    n_defA = _max(c.defectA)

    # div J~ rescaled by (m/hbar) e^{-2I}: the raw divergence carries the
    # anchor-dependent e^{2I} prefactor, which has no structural meaning.
    n_divJt_scaled = None
    if c.divJtilde is not None and m.I_unwrapped is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            scaled = c.divJtilde.values * np.exp(-2.0 * m.I_unwrapped.values)
        mask = c.divJtilde.mask & m.I_unwrapped.mask & np.isfinite(scaled)
        n_divJt_scaled = max_norm(scaled, mask)

    def ok(n: float | None) -> bool | None:
        return None if n is None else n <= tol

    verdicts: dict[str, PropertyVerdict] = {}

    # P1: under the stationary continuity hypothesis (defectC ~ 0),
    # "I harmonic" and "g analytic" (orthogonality) must agree.
    if None in (n_defC, n_harmI, n_orth):
        verdicts["P1"] = PropertyVerdict(PRECONDITION_NOT_MET, {}, tol, "indeterminate input")
    elif not ok(n_defC):
        verdicts["P1"] = PropertyVerdict(
            PRECONDITION_NOT_MET,
            {"defectC": n_defC, "harmI": n_harmI, "orth": n_orth},
            tol,
            "state is not stationary at this tolerance (defectC > tol)",
        )
    else:
        agree = ok(n_harmI) == ok(n_orth)
        verdicts["P1"] = PropertyVerdict(
            HOLDS if agree else FAILS,
            {"defectC": n_defC, "harmI": n_harmI, "orth": n_orth},
            tol,
        )

    # P2: gradS ~ 0 (plus stationarity) forces I harmonic and g analytic.
    if None in (n_gradS, n_defC, n_harmI, n_orth):
        verdicts["P2"] = PropertyVerdict(PRECONDITION_NOT_MET, {}, tol, "indeterminate input")
    elif not (ok(n_gradS) and ok(n_defC)):
        verdicts["P2"] = PropertyVerdict(
            PRECONDITION_NOT_MET,
            {"gradS": n_gradS, "defectC": n_defC},
            tol,
            "hypothesis |gradS| ~ 0 (with defectC ~ 0) not met",
        )
    else:
        conclusion = ok(n_harmI) and ok(n_orth)
        verdicts["P2"] = PropertyVerdict(
            HOLDS if conclusion else FAILS,
            {"gradS": n_gradS, "harmI": n_harmI, "orth": n_orth},
            tol,
        )

    # P3: "div J~ = 0" iff the analytic bracket vanishes. The two sides are
    # algebraically the same expression, so this doubles as a self-test.
    lhs_name, lhs = ("divJtilde_scaled", n_divJt_scaled)
    if lhs is None:
        lhs_name, lhs = ("defectA", n_defA)
    if lhs is None or n_defA is None:
        verdicts["P3"] = PropertyVerdict(PRECONDITION_NOT_MET, {}, tol, "indeterminate input")
    else:
        agree = ok(lhs) == ok(n_defA)
        verdicts["P3"] = PropertyVerdict(
            HOLDS if agree else FAILS,
            {lhs_name: lhs, "defectA": n_defA},
            tol,
            "" if lhs_name != "defectA" else "J~ unavailable; bracket used for both sides",
        )

    # P4: with S harmonic, "div J~ = 0" (via defectA) must agree with orth.
    if None in (n_harmS, n_defA, n_orth):
        verdicts["P4"] = PropertyVerdict(PRECONDITION_NOT_MET, {}, tol, "indeterminate input")
    elif not ok(n_harmS):
        verdicts["P4"] = PropertyVerdict(
            PRECONDITION_NOT_MET,
            {"harmS": n_harmS},
            tol,
            "hypothesis lapS ~ 0 not met",
        )
    else:
        agree = ok(n_defA) == ok(n_orth)
        verdicts["P4"] = PropertyVerdict(
            HOLDS if agree else FAILS,
            {"harmS": n_harmS, "defectA": n_defA, "orth": n_orth},
            tol,
        )

    # P5: constant S forces defectA ~ 0 and analyticity.
    if None in (n_gradS, n_defA, n_orth):
        verdicts["P5"] = PropertyVerdict(PRECONDITION_NOT_MET, {}, tol, "indeterminate input")
    elif not ok(n_gradS):
        verdicts["P5"] = PropertyVerdict(
            PRECONDITION_NOT_MET,
            {"gradS": n_gradS},
            tol,
            "hypothesis |gradS| ~ 0 not met",
        )
    else:
        conclusion = ok(n_defA) and ok(n_orth)
        verdicts["P5"] = PropertyVerdict(
            HOLDS if conclusion else FAILS,
            {"gradS": n_gradS, "defectA": n_defA, "orth": n_orth},
            tol,
        )

    return verdicts
