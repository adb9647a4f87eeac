"""Python access to the targetiv library.

Every function takes dicts (or JSON strings) and returns the parsed JSON report.
"""

import json as _json

from . import _core
from ._core import (
    AssumptionViolated,
    DesignViolated,
    Error,
    InvalidInput,
    InvalidModel,
    ParseError,
    RankDeficient,
    WeakIdentification,
    count_classes,
    philox4x32,
)

__all__ = [
    "AssumptionViolated",
    "DesignViolated",
    "Error",
    "InvalidInput",
    "InvalidModel",
    "ParseError",
    "RankDeficient",
    "WeakIdentification",
    "count_classes",
    "enumerate_classes",
    "estimate",
    "identify",
    "philox4x32",
    "simulate",
    "validate",
]


def _text(doc):
    if doc is None or isinstance(doc, str):
        return doc
    return _json.dumps(doc)


def enumerate_classes(model, regime="strict_one_to_one"):
    return _json.loads(_core.enumerate(_text(model), regime))


def simulate(model, errors=None, outcomes=None, n=10000, seed=0, threads=1, filter=False, dump=""):
    return _json.loads(
        _core.simulate(_text(model), _text(errors), _text(outcomes), n, seed, threads, filter, dump)
    )


def identify(moments, design, homog=(), tsls=False, strict_estimands=False,
             min_denominator=1e-12, merge=()):
    return _json.loads(
        _core.identify(_text(moments), design, list(homog), tsls, strict_estimands,
                       min_denominator, list(merge))
    )


def estimate(path, design, boot=999, seed=0, cluster=None, by=None, y="y", arm="t", z="z",
             reference="", min_first_stage=0.01, threads=1):
    return _json.loads(
        _core.estimate(path, design, boot, seed, cluster, by, y, arm, z, reference,
                       min_first_stage, threads)
    )


def validate(model, errors=None, outcomes=None, n=200000, seed=0, threads=1, tol=1e-10):
    return _json.loads(
        _core.validate(_text(model), _text(errors), _text(outcomes), n, seed, threads, tol)
    )
