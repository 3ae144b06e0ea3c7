"""Abstract value lattice for nullability inference.

The reference lattice has five shapes of values:

    NonNull        -- non-null, object fully initialized (bottom)
    Raw(C)         -- non-null, constructors of C and all its superclasses
                      have completed
    RawMinus       -- non-null, no initialization guarantee
    NullableInit   -- null, or non-null and fully initialized
    Nullable       -- anything (top)

NullableInit sits between NonNull and Nullable but is incomparable with
the Raw family: null separates it from Raw values in one direction, and
partially-initialized objects separate it in the other.

Field-initialization facts for the current object are a two point lattice
Def < UnDef per field; a state is represented as the frozenset of fields
still UnDef (absent field = Def, the bottom, so the common all-initialized
case costs nothing to store).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional


class Kind(enum.Enum):
    NONNULL = "NonNull"
    RAW = "Raw"
    RAW_MINUS = "RawMinus"
    NULLABLE_INIT = "NullableInit"
    NULLABLE = "Nullable"


@dataclass(frozen=True)
class AVal:
    kind: Kind
    cls: Optional[str] = None  # only for Kind.RAW

    def __post_init__(self):
        if (self.kind is Kind.RAW) != (self.cls is not None):
            raise ValueError("Raw values carry a class name, others do not")

    def excludes_null(self) -> bool:
        return self.kind in (Kind.NONNULL, Kind.RAW, Kind.RAW_MINUS)

    def annotation(self) -> str:
        if self.kind is Kind.RAW:
            return f"@Raw({self.cls})"
        if self.kind is Kind.RAW_MINUS:
            return "@Raw"
        return "@" + self.kind.value

    def __repr__(self):
        return self.annotation()


NONNULL = AVal(Kind.NONNULL)
RAW_MINUS = AVal(Kind.RAW_MINUS)
NULLABLE_INIT = AVal(Kind.NULLABLE_INIT)
NULLABLE = AVal(Kind.NULLABLE)


def raw(cls: str) -> AVal:
    return AVal(Kind.RAW, cls)


def leq(a: AVal, b: AVal, hierarchy) -> bool:
    """Concretization inclusion on the lattice.

    `hierarchy` must provide is_subclass(A, B) and least_common_superclass.
    """
    if a == b or a.kind is Kind.NONNULL or b.kind is Kind.NULLABLE:
        return True
    if a.kind is Kind.RAW:
        if b.kind is Kind.RAW:
            return hierarchy.is_subclass(a.cls, b.cls)
        return b.kind is Kind.RAW_MINUS
    if a.kind is Kind.RAW_MINUS:
        return False  # only RawMinus itself and Nullable above it
    if a.kind is Kind.NULLABLE_INIT:
        return False  # only NullableInit itself and Nullable above it
    return False


def join(a: AVal, b: AVal, hierarchy) -> AVal:
    if leq(a, b, hierarchy):
        return b
    if leq(b, a, hierarchy):
        return a
    if a.kind is Kind.RAW and b.kind is Kind.RAW:
        return raw(hierarchy.least_common_superclass(a.cls, b.cls))
    if a.kind in (Kind.RAW, Kind.RAW_MINUS) and b.kind in (Kind.RAW, Kind.RAW_MINUS):
        return RAW_MINUS
    # remaining incomparable pairs mix NullableInit with the Raw family
    return NULLABLE


def nonnull_refine(a: AVal) -> AVal:
    """Best abstraction of gamma(a) with null stripped out."""
    if a.kind is Kind.NULLABLE:
        return RAW_MINUS
    if a.kind is Kind.NULLABLE_INIT:
        return NONNULL
    return a


# --- field-initialization states (set of UnDef fields; absent = Def) ------

TVal = FrozenSet[str]

TVAL_BOTTOM: TVal = frozenset()


def tval_top(fields: Iterable[str]) -> TVal:
    """All declared fields UnDef: no initialization information."""
    return frozenset(fields)


def tval_join(t1: TVal, t2: TVal) -> TVal:
    return t1 | t2


def tval_leq(t1: TVal, t2: TVal) -> bool:
    return t1 <= t2


def tval_set_def(t: TVal, field: str) -> TVal:
    return t - {field}


def tval_is_def(t: TVal, field: str) -> bool:
    return field not in t
