import random
from fractions import Fraction

from nilhodge.algebra import InvariantForm, basis
from nilhodge.exact import Qi


def random_form(coframe, rng: random.Random, degrees=range(5), size=6):
    """Random form with exact Gaussian-rational coefficients."""
    coeffs = {}
    for k in degrees:
        for idx in basis(k):
            coeffs[idx] = Qi(Fraction(rng.randint(-size, size), rng.randint(1, size)),
                             Fraction(rng.randint(-size, size), rng.randint(1, size)))
    return InvariantForm(coframe, coeffs)


# acceptance results: criterion -> list of (label, ok, detail)
ACCEPTANCE: dict[int, list] = {}


def record(criterion: int, label: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    return bool(ok)


def acceptance_lines() -> list[str]:
    lines = []
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[1] for p in parts)
        body = "; ".join(f"{label}: {'ok' if good else 'FAILED'} ({detail})" for label, good, detail in parts)
        lines.append(f"{'PASS' if ok else 'FAIL'} criterion {c}: {body}")
    return lines
