"""Behavior cloning from SIPP demonstrations and the DAgger loop.

Training is single-threaded and bit-deterministic given the seed: problem
order is a seeded shuffle, one Adam update per problem batch, and all
samples of a problem share one stage-1 forward pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .model import (
    GnnModel,
    GraphFeatures,
    build_graph_features,
    encode,
    predict_priorities,
    quantize_step,
)
from .planners import greedy_rollout, plan
from .roadmap import ProblemInstance
from .sipp import TimedPath, sipp_search
from .world import CollisionLedger, DynamicWorld, travel_time


@dataclass
class BcSample:
    vertex: int
    t_depart: float  # departure-decision time; SIPP waits are absorbed here
    candidates: list[int]  # neighbor vertices, ascending index order
    target: int  # index of the demonstrated neighbor within candidates

    def to_obj(self) -> dict:
        return {"v": self.vertex, "t": self.t_depart,
                "cands": self.candidates, "target": self.target}

    @classmethod
    def from_obj(cls, o: dict) -> "BcSample":
        return cls(o["v"], o["t"], list(o["cands"]), o["target"])


@dataclass
class TrainRun:
    seed: int = 0
    epochs_bc: int = 200
    epochs_dagger: int = 100
    lr: float = 1e-3
    loss_history: list[float] = field(default_factory=list)


@dataclass
class DatasetEntry:
    problem: ProblemInstance
    samples: list[BcSample]
    features: Optional[GraphFeatures] = None

    def get_features(self) -> GraphFeatures:
        if self.features is None:
            self.features = build_graph_features(self.problem)
        return self.features


def extract_bc_samples(problem: ProblemInstance, path: TimedPath) -> list[BcSample]:
    """One sample per move on the demonstrated path."""
    graph = problem.graph
    dt = problem.grid.dt
    samples = []
    for (v, t_arr), (u, t_next) in zip(path.steps, path.steps[1:]):
        if u not in graph.adjacency[v]:
            raise ValueError(f"path edge ({v},{u}) not in graph")
        delta = travel_time(graph.vertices[v], graph.vertices[u], problem.speed, dt)
        t_dep = t_next - delta
        candidates = list(graph.adjacency[v])
        samples.append(BcSample(v, t_dep, candidates, candidates.index(u)))
    return samples


def demonstrate(problem: ProblemInstance) -> Optional[list[BcSample]]:
    """Run the oracle on a problem; None when it finds no path."""
    world = problem.world()
    path = sipp_search(problem, world, CollisionLedger())
    if path is None:
        return None
    return extract_bc_samples(problem, path)


def _problem_loss(entry: DatasetEntry, model: GnnModel) -> nn.Tensor:
    gf = entry.get_features()
    _, y, obs = encode(gf, model.config, model.params)
    dt = entry.problem.grid.dt
    horizon = entry.problem.grid.horizon
    losses = []
    for s in entry.samples:
        eids = [gf.edge_id[(s.vertex, u)] for u in s.candidates]
        step = quantize_step(s.t_depart, dt, horizon)
        eta = predict_priorities(eids, y, obs, step, model.config, model.params)
        logits = nn.transpose(eta)
        losses.append(nn.cross_entropy_from_logits(logits, s.target))
    return nn.mean_of(losses)


def train_epochs(
    dataset: list[DatasetEntry],
    model: GnnModel,
    optimizer: nn.Adam,
    epochs: int,
    rng: np.random.Generator,
    run: TrainRun,
    log=None,
) -> None:
    """Seed-shuffled full passes; one Adam update per problem batch."""
    entries = [e for e in dataset if e.samples]
    if not entries:
        raise ValueError("empty dataset")
    for _ in range(epochs):
        order = rng.permutation(len(entries))
        total, count = 0.0, 0
        for idx in order:
            entry = entries[idx]
            optimizer.zero_grad()
            loss = _problem_loss(entry, model)
            nn.backward(loss)
            optimizer.step()
            total += float(loss.value[0, 0]) * len(entry.samples)
            count += len(entry.samples)
        mean = total / count
        run.loss_history.append(mean)
        if log is not None:
            log(len(run.loss_history), mean)


def train_bc(
    dataset: list[DatasetEntry],
    model: GnnModel,
    run: TrainRun,
    rng: np.random.Generator,
    optimizer: Optional[nn.Adam] = None,
    log=None,
) -> nn.Adam:
    if optimizer is None:
        optimizer = nn.Adam(model.params.named_tensors(), lr=run.lr)
    train_epochs(dataset, model, optimizer, run.epochs_bc, rng, run, log)
    return optimizer


def dagger_round(
    model: GnnModel,
    dataset: list[DatasetEntry],
    rng: np.random.Generator,
    run: TrainRun,
    optimizer: nn.Adam,
    log=None,
) -> int:
    """Roll out the learner, query the oracle from a random visited state,
    aggregate the optimal suffix, then continue training. Returns the number
    of aggregated samples."""
    added = 0
    for entry in dataset:
        problem = entry.problem
        world = problem.world()
        result = plan(problem, model, world, CollisionLedger(),
                      gf=entry.get_features(), return_trace=True)
        stops = [(v, t) for v, t in result.trace if v != problem.goal]
        if not stops:
            continue
        v, t = stops[int(rng.integers(len(stops)))]
        t_step = quantize_step(t, problem.grid.dt, problem.grid.horizon)
        shifted = world_shifted(problem, t_step)
        suffix = sipp_search(problem, shifted, CollisionLedger(), start_vertex=v)
        if suffix is None:
            continue
        abs_path = TimedPath([(sv, st + t_step * problem.grid.dt) for sv, st in suffix.steps])
        new_samples = extract_bc_samples(problem, abs_path)
        entry.samples.extend(new_samples)
        added += len(new_samples)
    train_epochs(dataset, model, optimizer, run.epochs_dagger, rng, run, log)
    return added


def world_shifted(problem: ProblemInstance, offset_steps: int) -> DynamicWorld:
    """World whose obstacle trajectory starts `offset_steps` later (clamped)."""
    world = problem.world()
    return DynamicWorld(
        ego_arm=world.ego_arm,
        statics=world.statics,
        trajectory=world.trajectory.shifted(offset_steps),
        grid=world.grid,
        speed=world.speed,
    )


# -- dataset cache file (JSONL keyed by problem index) ----------------------------


def save_samples(path, dataset: list[DatasetEntry]) -> None:
    with open(path, "w") as f:
        for pid, entry in enumerate(dataset):
            for i, s in enumerate(entry.samples):
                rec = {"problem": pid, "step": i, **s.to_obj()}
                f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_samples(path, problems: list[ProblemInstance]) -> list[DatasetEntry]:
    dataset = [DatasetEntry(p, []) for p in problems]
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            dataset[rec["problem"]].samples.append(BcSample.from_obj(rec))
    return dataset
