"""Stochastic detection: fringe scans and full measurement campaigns.

Determinism contract: every random draw is made from a generator seeded
by ``SeedSequence([seed, *context, cell_index, point_index])``; within a
point the per-shot draws are vectorized arrays indexed by shot.  Results
are therefore bit-identical for a given (plan, model, noise, seed),
independent of scheduling: cells may run concurrently.

An exact-probability mode replaces sampled counts with real-valued
n * p computed on the noise-free trajectory; it separates dynamics bugs
from statistics bugs in oracle tests.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .atommodel import (FieldConfig, IonModel, NoiseModel,
                        sample_noise_trajectory, zero_trajectory)
from .errors import SimulationError
from .sequence import build_quadrupole_dd_sequence, initial_state, run_sequence

D_SLICE = slice(2, 8)


@dataclass(frozen=True)
class DetectionModel:
    """Binary detection with optional misassignment probabilities."""

    eps_bright: float = 0.0   # P(detect D | ion in S)
    eps_dark: float = 0.0     # P(detect S | ion in D)

    def __post_init__(self):
        if not (0.0 <= self.eps_bright <= 0.5 and 0.0 <= self.eps_dark <= 0.5):
            raise ValueError("detection error probabilities must lie in [0, 0.5]")


@dataclass(frozen=True)
class FringePoint:
    phi_laser: float
    n_shots: int
    k_D: float  # integer count, or real-valued n*p in exact mode


@dataclass(frozen=True)
class FringeDataset:
    points: tuple
    context: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        phis = [p.phi_laser for p in self.points]
        if any(p2 <= p1 for p1, p2 in zip(phis, phis[1:])):
            raise ValueError("phi_laser grid must be strictly increasing")
        for p in self.points:
            if not 0.0 <= p.k_D <= p.n_shots:
                raise ValueError("counts must satisfy 0 <= k_D <= n_shots")


@dataclass(frozen=True)
class CampaignCell:
    beta_nominal: float
    dEz_dz: float
    tau_total: float
    fringe: FringeDataset
    reference_fringe: FringeDataset


@dataclass(frozen=True)
class CampaignDataset:
    cells: tuple
    plan_snapshot: dict = field(default_factory=dict, compare=False)
    model_snapshot: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class CampaignPlan:
    """Grids and sampling parameters for one campaign."""

    beta_list: tuple
    gradient_list: tuple
    tau_total_list: tuple
    n_echo: int = 8
    shots_per_point: int = 300
    n_phases: int = 12
    exact_probabilities: bool = False
    per_angle_offsets: tuple | None = None  # extra rad per angle, signal only

    def __post_init__(self):
        if not (self.beta_list and self.gradient_list and self.tau_total_list):
            raise ValueError("plan grids must be non-empty")
        if self.n_echo < 2 or self.n_echo % 2:
            raise ValueError("n_echo must be even and >= 2")
        if self.shots_per_point < 1:
            raise ValueError("shots_per_point must be >= 1")
        if self.per_angle_offsets is not None \
                and len(self.per_angle_offsets) != len(self.beta_list):
            raise ValueError("per_angle_offsets must match beta_list length")


def default_phi_grid(n_phases: int = 12) -> np.ndarray:
    """Equally spaced laser phases over [0, 2pi)."""
    return np.arange(n_phases) * 2.0 * math.pi / n_phases


def measure_population_D(state: np.ndarray,
                         detection: DetectionModel | None = None):
    """Detection probability: total D population through the error map."""
    p = np.sum(np.abs(state[..., D_SLICE]) ** 2, axis=-1)
    if detection is not None:
        p = detection.eps_bright + p * (1.0 - detection.eps_bright - detection.eps_dark)
    return p


def sample_shot(p: float, rng: np.random.Generator) -> int:
    """One Bernoulli detection outcome."""
    if not -1e-12 <= p <= 1.0 + 1e-12:
        raise ValueError(f"probability {p} outside [0, 1]")
    return int(rng.random() < min(max(p, 0.0), 1.0))


def run_fringe_scan(n_echo: int, tau: float, model: IonModel, noise: NoiseModel,
                    phi_grid, shots_per_point: int, rng_seed,
                    detection: DetectionModel | None = None,
                    exact: bool = False,
                    extra_phase: float = 0.0,
                    seed_context: tuple = ()) -> FringeDataset:
    """Simulate one Ramsey fringe: one noise trajectory per shot, full
    sequence run, Bernoulli detection, counts aggregated per phase."""
    phi_grid = np.asarray(phi_grid, dtype=float)
    if phi_grid.size == 0:
        raise ValueError("phi grid must be non-empty")
    if shots_per_point < 1:
        raise ValueError("shots_per_point must be >= 1")
    duration = 2.0 * n_echo * tau
    init = initial_state("S:-1/2")
    points = []
    for point_idx, phi in enumerate(phi_grid):
        seq = build_quadrupole_dd_sequence(n_echo, tau, phi + extra_phase)
        if exact:
            state = run_sequence(init, seq, model, zero_trajectory())
            p = float(measure_population_D(state, detection))
            k = shots_per_point * min(max(p, 0.0), 1.0)
        else:
            ss = np.random.SeedSequence([np.uint32(s) for s in
                                         _entropy(rng_seed, seed_context, point_idx)])
            rng = np.random.default_rng(ss)
            traj = sample_noise_trajectory(noise, duration, rng,
                                           n_shots=shots_per_point)
            batch = np.broadcast_to(init, (shots_per_point, 8))
            states = run_sequence(batch, seq, model, traj)
            p = np.clip(measure_population_D(states, detection), 0.0, 1.0)
            k = int(np.sum(rng.random(shots_per_point) < p))
        points.append(FringePoint(phi_laser=float(phi), n_shots=shots_per_point,
                                  k_D=k))
    return FringeDataset(tuple(points), context={
        "n_echo": n_echo, "tau": tau, "exact": exact,
        "beta": model.field_cfg.beta, "dEz_dz": model.trap.dEz_dz,
        "B": model.field_cfg.B,
    })


def _entropy(seed, context, point_idx):
    """Flat non-negative entropy words for SeedSequence."""
    words = [int(seed) & 0xFFFFFFFF]
    for c in context:
        words.append(int(c) & 0xFFFFFFFF)
    words.append(int(point_idx) & 0xFFFFFFFF)
    return words


def _cell_model(model: IonModel, beta_nominal: float, gradient: float) -> IonModel:
    """Per-cell model: true angle = nominal + beta0, requested gradient."""
    field_cfg = replace(model.field_cfg, beta=beta_nominal + model.field_cfg.beta0)
    trap = replace(model.trap, dEz_dz=gradient)
    return replace(model, field_cfg=field_cfg, trap=trap)


def run_campaign(plan: CampaignPlan, model: IonModel, noise: NoiseModel,
                 rng_seed, detection: DetectionModel | None = None,
                 phi_grid=None, workers: int = 1) -> CampaignDataset:
    """Simulate every (beta, gradient, tau_total) cell plus its tau=0
    reference fringe.  Results are bit-identical regardless of
    ``workers``: each cell draws from its own seed substream."""
    if phi_grid is None:
        phi_grid = default_phi_grid(plan.n_phases)
    specs = []
    cell_idx = 0
    for angle_idx, beta in enumerate(plan.beta_list):
        offset = (plan.per_angle_offsets[angle_idx]
                  if plan.per_angle_offsets is not None else 0.0)
        for gradient in plan.gradient_list:
            for tau_total in plan.tau_total_list:
                tau = tau_total / (2.0 * plan.n_echo)
                specs.append((cell_idx, beta, gradient, tau_total, tau, offset))
                cell_idx += 1

    def simulate(spec):
        idx, beta, gradient, tau_total, tau, offset = spec
        cm = _cell_model(model, beta, gradient)
        fringe = run_fringe_scan(
            plan.n_echo, tau, cm, noise, phi_grid, plan.shots_per_point,
            rng_seed, detection=detection, exact=plan.exact_probabilities,
            extra_phase=offset, seed_context=(2 * idx,))
        reference = run_fringe_scan(
            plan.n_echo, 0.0, cm, noise, phi_grid, plan.shots_per_point,
            rng_seed, detection=detection, exact=plan.exact_probabilities,
            seed_context=(2 * idx + 1,))
        return CampaignCell(beta_nominal=beta, dEz_dz=gradient,
                            tau_total=tau_total, fringe=fringe,
                            reference_fringe=reference)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(simulate, specs))
    else:
        cells = [simulate(s) for s in specs]
    return CampaignDataset(tuple(cells),
                           plan_snapshot=plan_snapshot(plan, rng_seed),
                           model_snapshot=model_snapshot(model, noise, detection))


def plan_snapshot(plan: CampaignPlan, seed) -> dict:
    d = asdict(plan)
    d["seed"] = int(seed)
    return d


def model_snapshot(model: IonModel, noise: NoiseModel,
                   detection: DetectionModel | None) -> dict:
    return {
        "species": asdict(model.species),
        "trap": asdict(model.trap),
        "field": asdict(model.field_cfg),
        "theta": model.theta,
        "noise": asdict(noise),
        "detection": asdict(detection) if detection else None,
    }


CSV_COLUMNS = ["beta_nominal", "dEz_dz", "tau_total", "n_echo", "phi_laser",
               "n_shots", "k_D", "is_reference"]


def campaign_to_csv(campaign: CampaignDataset) -> str:
    """One row per fringe point; see docs/formats.md."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell in campaign.cells:
        n_echo = cell.fringe.context.get("n_echo", 0)
        for is_ref, fringe in ((0, cell.fringe), (1, cell.reference_fringe)):
            for pt in fringe.points:
                writer.writerow([repr(cell.beta_nominal), repr(cell.dEz_dz),
                                 repr(cell.tau_total), n_echo,
                                 repr(pt.phi_laser), pt.n_shots, repr(pt.k_D),
                                 is_ref])
    return buf.getvalue()


def campaign_from_csv(text: str) -> CampaignDataset:
    """Rebuild a CampaignDataset from its CSV serialization."""
    reader = csv.DictReader(io.StringIO(text))
    groups: dict = {}
    for row in reader:
        key = (float(row["beta_nominal"]), float(row["dEz_dz"]),
               float(row["tau_total"]), int(row["n_echo"]))
        is_ref = bool(int(row["is_reference"]))
        ks = row["k_D"]
        pt = FringePoint(phi_laser=float(row["phi_laser"]),
                         n_shots=int(row["n_shots"]),
                         k_D=int(ks) if ks.isdigit() else float(ks))
        groups.setdefault(key, ([], []))[1 if is_ref else 0].append(pt)
    cells = []
    for (beta, grad, tau_total, n_echo), (sig, ref) in groups.items():
        if not sig or not ref:
            raise SimulationError(
                f"cell (beta={beta}, dEz_dz={grad}, tau_total={tau_total}) "
                "is missing its signal or reference fringe")
        tau = tau_total / (2.0 * n_echo) if n_echo else 0.0
        ctx = {"n_echo": n_echo, "tau": tau}
        cells.append(CampaignCell(
            beta_nominal=beta, dEz_dz=grad, tau_total=tau_total,
            fringe=FringeDataset(tuple(sig), context=dict(ctx)),
            reference_fringe=FringeDataset(tuple(ref), context=dict(ctx, tau=0.0))))
    return CampaignDataset(tuple(cells))


def campaign_to_json(campaign: CampaignDataset) -> str:
    """Provenance document: plan, model snapshot, and all counts."""
    doc = {
        "plan": campaign.plan_snapshot,
        "model": campaign.model_snapshot,
        "cells": [{
            "beta_nominal": c.beta_nominal,
            "dEz_dz": c.dEz_dz,
            "tau_total": c.tau_total,
            "fringe": [asdict(p) for p in c.fringe.points],
            "reference_fringe": [asdict(p) for p in c.reference_fringe.points],
        } for c in campaign.cells],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
