"""Run orchestration: setup, initial adaptation, time loop, output and convergence studies."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .adapt import AdaptDriver
from .basis import Space
from .config import RunConfig
from .dgop import DiscreteFunction, OperatorError, SpatialOperator, interpolate
from .output import write_csv_1d, write_table, write_vtk
from .problems import build_problem, error_norms
from .stabilize import LimiterConfig
from .timeint import StepperConfig, make_stepper

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    problem: str
    final_time: float
    steps: int
    cells: int
    max_cells: int
    dofs: int
    wallclock: float
    minimum: np.ndarray
    maximum: np.ndarray
    drift: np.ndarray
    norms: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"problem      {self.problem}",
                 f"final time   {self.final_time:.6g}",
                 f"steps        {self.steps}",
                 f"cells        {self.cells} (max {self.max_cells})",
                 f"dofs         {self.dofs}",
                 f"wallclock    {self.wallclock:.3f} s",
                 f"min          {np.array2string(self.minimum, precision=6)}",
                 f"max          {np.array2string(self.maximum, precision=6)}",
                 f"mass drift   {np.array2string(self.drift, precision=3)}"]
        for k, v in self.norms.items():
            lines.append(f"{k + ' error':<13}{v:.6e}")
        return "\n".join(lines)


def component_names(model):
    """Output names of the solution components."""
    if model.gas is not None:
        axes = "xyz"[:model.dim]
        return ["density"] + [f"momentum_{a}" for a in axes] + ["energy"]
    if model.dim_range == 1:
        return [model.name]
    return [f"{model.name}_{i}" for i in range(model.dim_range)]


class Simulation:
    """Everything needed to run one configuration."""

    def __init__(self, config: RunConfig, workers=1):
        config.validate()
        self.config = config
        model, exact = build_problem(config.problem, **dict(config.params))
        if config.end_time is not None:
            model = model.with_(end_time=config.end_time)
        self.model = model
        self.exact = exact
        counts = tuple(config.counts) if config.counts else tuple(model.domain.counts)
        if len(counts) == 1 and model.dim == 2:
            counts = counts * 2
        if len(counts) != model.dim:
            raise OperatorError(f"space.counts needs {model.dim} entries")
        self.mesh = model.domain.make_mesh(counts)
        self.space = Space(config.basis, config.order, model.dim, model.dim_range)
        limiter = LimiterConfig(mode=config.limiter, tol=config.limiter_tol, indicator=config.indicator)
        self.op = SpatialOperator(model, self.space, self.mesh, flux=config.flux, penalty=config.penalty,
                                  limiter=limiter, workers=workers)
        sc = StepperConfig(config.stepper, order=config.stepper_order, cfl=config.cfl, dt=config.dt,
                           stages=config.stages)
        self.stepper = make_stepper(sc, self.op)
        self.driver = None
        if config.max_level > 0:
            if model.indicator is None:
                raise OperatorError(f"problem {config.problem!r} has no refinement indicator")
            self.driver = AdaptDriver(self.op, self.stepper, max_level=config.max_level)
        self.U = interpolate(self.space, self.mesh, model.U0, name=model.name)
        self.op.apply_limiter(self.U)

    def point_range(self):
        vals = self.op.plan.check_values(self.U.dofs)
        return vals.min(axis=(0, 1)), vals.max(axis=(0, 1))

    def run(self, out_dir=None, vtk_every=0, write_csv=None, callback=None) -> RunReport:
        """Integrate to the end time; ``callback(sim, t, dt)`` runs after every step."""
        cfg, model, U = self.config, self.model, self.U
        start = time.perf_counter()
        files = []
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        T = float(model.end_time)
        if self.driver is not None and T > 0:
            self.driver.initial_adapt(U)
        total0 = U.totals()
        self.op.set_time(0.0)
        t = 0.0
        steps = 0
        max_cells = self.mesh.n_cells

        def snapshot(tag):
            if out_dir is None:
                return
            extra = {}
            if self.driver is not None and self.driver.last_indicator is not None \
                    and len(self.driver.last_indicator) == self.mesh.n_cells:
                extra["indicator"] = self.driver.last_indicator
            path = os.path.join(out_dir, f"{model.name}_{tag}.vtk")
            files.append(write_vtk(U, path, cell_data=extra, names=component_names(model)))

        if vtk_every:
            snapshot("00000")
        tiny = 1e-12 * max(1.0, T)
        while T - t > tiny:
            old = U.copy() if self.driver is not None else None
            dt = self.stepper(U, max_dt=T - t)
            if not np.all(np.isfinite(U.dofs)):
                bad = np.flatnonzero(~np.all(np.isfinite(U.dofs), axis=(1, 2)))[0]
                raise OperatorError(f"non-finite solution in cell {bad} at t={t + dt:g}")
            t_old, t = t, self.op.time
            steps += 1
            if self.driver is not None and T - t > tiny:
                self.driver.adapt_step(old, U, t_old, dt)
            max_cells = max(max_cells, self.mesh.n_cells)
            if vtk_every and steps % vtk_every == 0:
                snapshot(f"{steps:05d}")
            if callback is not None:
                callback(self, t, dt)
            log.debug("step %d t=%.6g dt=%.3g cells=%d", steps, t, dt, self.mesh.n_cells)
        snapshot("final")
        csv_wanted = cfg.csv if write_csv is None else write_csv
        if out_dir is not None and csv_wanted and model.dim == 1:
            files.append(write_csv_1d(U, os.path.join(out_dir, f"{model.name}_final.csv"),
                                     names=component_names(model)))
        lo, hi = self.point_range()
        norms = {}
        if self.exact is not None:
            errs = error_norms(U, self.exact, t)
            norms = {k: errs[k] for k in cfg.norms}
        drift = U.totals() + self.stepper.ledger - total0
        return RunReport(model.name, t, steps, self.mesh.n_cells, max_cells,
                         int(U.dofs.size), time.perf_counter() - start, lo, hi, drift, norms, files)


def run(config: RunConfig, out_dir=None, workers=1, vtk_every=None, callback=None) -> RunReport:
    sim = Simulation(config, workers=workers)
    every = config.vtk_every if vtk_every is None else vtk_every
    return sim.run(out_dir, every, callback=callback)


def eoc(errors):
    """Experimental orders log2(e_{i-1}/e_i) for dyadic refinement; first entry NaN."""
    e = np.asarray(errors, dtype=float)
    out = np.full(len(e), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.log2(e[:-1] / e[1:])
    return out


def convergence_study(config: RunConfig, levels: int, out_dir=None, workers=1):
    """Run on ``levels`` dyadically refined base grids; returns (header, rows)."""
    if levels < 1:
        raise ValueError("a study needs at least one level")
    model, exact = build_problem(config.problem, **dict(config.params))
    if exact is None:
        raise OperatorError(f"problem {config.problem!r} has no exact solution for a convergence study")
    base = tuple(config.counts) if config.counts else tuple(model.domain.counts)
    reports = []
    for lv in range(levels):
        cfg = replace(config, counts=tuple(c * 2**lv for c in base), vtk_every=0)
        reports.append(run(cfg, None, workers))
    header = ["level", "cells", "dofs"]
    cols = []
    for n in config.norms:
        errs = [r.norms[n] for r in reports]
        cols.append((errs, eoc(errs)))
        header += [f"{n}_error", f"{n}_eoc"]
    header.append("runtime")
    rows = []
    for i, r in enumerate(reports):
        row = [i, r.cells, r.dofs]
        for errs, orders in cols:
            row += [f"{errs[i]:.10e}", "" if np.isnan(orders[i]) else f"{orders[i]:.4f}"]
        row.append(f"{r.wallclock:.3f}")
        rows.append(row)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_table(rows, os.path.join(out_dir, f"{config.problem}_convergence.csv"), header)
    return header, rows
