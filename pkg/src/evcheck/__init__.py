"""Explicit-value software model checking with interpolation-based refinement."""
from .cegar import AnalysisResult, Config, Verdict, cegar
from .cfa import load_problem, problem_from_source

__all__ = ["AnalysisResult", "Config", "Verdict", "cegar", "load_problem", "problem_from_source"]
__version__ = "0.1.0"
