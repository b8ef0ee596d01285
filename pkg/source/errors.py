#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Error Types Module
Exception hierarchy shared by every fracreg module.

Input problems derive from ValueError and failed computations from
RuntimeError, so callers that only know the builtins still catch them.
"""

from typing import Optional


class FracregError(Exception):
    """Base class for all fracreg errors."""


class ConfigError(FracregError, ValueError):
    """Invalid, unreadable or out-of-range run configuration."""


class GeometryError(FracregError, ValueError):
    """A geometric invariant failed after construction."""

    def __init__(self, message: str, invariant: Optional[str] = None):
        super().__init__(message)
        self.invariant = invariant


class PreconditionError(FracregError, ValueError):
    """An operation was called outside its stated precondition."""


class ContractError(FracregError, ValueError):
    """Kind, grid or feasibility mismatch between arguments."""


class ResolutionError(FracregError, ValueError):
    """Too few grid nodes inside a measurement set."""


class FitError(FracregError, ValueError):
    """Not enough usable levels for a log-log fit."""


class DivergenceError(FracregError, ValueError):
    """A series was requested outside its convergence regime."""


class NumericError(FracregError, ArithmeticError):
    """
    A non-finite value appeared, or a minimizer accepted a step above its
    reference energy.
    """


class NonConvergenceError(FracregError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, residual_norm: float = float('nan'),
                 iterations: int = 0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


class ConstructionError(FracregError, RuntimeError):
    """A barrier construction could not satisfy its own requirements."""
