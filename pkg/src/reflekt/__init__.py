"""Exact tools for linear reflection maps f = omega o A over diagonal reflection groups."""
from __future__ import annotations

from .certify import (BranchClass, Status, Verdict, certify_afinite, certify_via_normal_crossings,
                      check_C2, check_C3, check_C4, stability_verdict, verify_coprime_lemmas, verify_witness)
from .group import GroupSpec
from .refmap import ReflectionMapSpec, analyze

__version__ = "0.1.0"

__all__ = [
    "BranchClass", "GroupSpec", "ReflectionMapSpec", "Status", "Verdict", "analyze", "certify_afinite",
    "certify_via_normal_crossings", "check_C2", "check_C3", "check_C4", "stability_verdict",
    "verify_coprime_lemmas", "verify_witness",
]
