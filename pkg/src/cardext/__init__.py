"""Cardinality estimation for queries with AND, OR and NOT.

GenCrd lifts any conjunctive-only bag estimator to general queries by
inclusion-exclusion over a DNF list. PUNQ turns a bag estimator into a set
(DISTINCT) estimator by multiplying with a learned uniqueness rate.
"""

from .dnf import DnfList, get_dnf_list
from .errors import CardExtError
from .estimators import (
    OracleEstimator,
    HistogramEstimator,
    PunqExtended,
    SamplingEstimator,
    histogram_estimator,
    oracle_estimator,
    punq_extended,
    sampling_estimator,
)
from .evaluation import EvalReport, evaluate, render_report
from .gencrd import GenCrdResult, gen_crd, gen_crd_list
from .implyfalse import imply_false
from .parser import parse, render
from .query import ConjunctiveQuery, QueryAst, to_conjunctive
from .store import Database, Schema, execute, execute_general

__version__ = "0.1.0"

__all__ = [
    "CardExtError",
    "ConjunctiveQuery",
    "Database",
    "DnfList",
    "EvalReport",
    "GenCrdResult",
    "HistogramEstimator",
    "OracleEstimator",
    "PunqExtended",
    "QueryAst",
    "SamplingEstimator",
    "Schema",
    "evaluate",
    "execute",
    "execute_general",
    "gen_crd",
    "gen_crd_list",
    "get_dnf_list",
    "histogram_estimator",
    "imply_false",
    "oracle_estimator",
    "parse",
    "punq_extended",
    "render",
    "render_report",
    "sampling_estimator",
    "to_conjunctive",
]
