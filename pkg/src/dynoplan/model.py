"""The learned edge-priority planner: feature construction, temporal
encoding, the two-stage network (global graph encoder + local planner).

Stage 1 encodes vertices, edges, and the obstacle trajectory (with attention
injection); stage 2 scores the candidate edges at the current vertex using
the encoded obstacle rows inside a time window around the arrival step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nn
from .nn import Mlp, Tensor
from .roadmap import ProblemInstance, RoadmapGraph
from .world import ObstacleTrajectory, workspace_obstacle_feature

HIDDEN = 32


@dataclass
class ModelConfig:
    d_hidden: int = HIDDEN
    d_te: int = HIDDEN
    omega: float = 10000.0
    window: int = 2
    loops: int = 3  # message-passing iterations with shared weights
    global_obstacle_encoding: bool = True
    local_obstacle_encoding: bool = True
    temporal_encoding: bool = True
    top_k: int = 5
    goal_delta: float = 0.0

    def __post_init__(self):
        if self.d_te % 2 != 0:
            raise ValueError("d_te must be even")
        if self.window < 0 or self.loops < 1:
            raise ValueError("need window >= 0 and loops >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def temporal_encoding(t: float, cfg: ModelConfig) -> np.ndarray:
    """Interleaved sin/cos of t at geometrically spaced frequencies."""
    k = np.arange(cfg.d_te // 2)
    freq = cfg.omega ** (-2.0 * k / cfg.d_te)
    out = np.empty(cfg.d_te)
    out[0::2] = np.sin(freq * t)
    out[1::2] = np.cos(freq * t)
    return out


def te_matrix(horizon: int, cfg: ModelConfig) -> np.ndarray:
    return np.stack([temporal_encoding(t, cfg) for t in range(horizon + 1)])


@dataclass
class ModelParameters:
    """Every learned block; field order fixes the Adam update order."""

    g_x: Mlp  # node encoder
    g_y: Mlp  # edge encoder
    g_o: Mlp  # obstacle encoder
    k_x: Mlp
    q_x: Mlp
    v_x: Mlp
    k_y: Mlp
    q_y: Mlp
    v_y: Mlp
    ffn_x: Mlp
    ffn_y: Mlp
    f_x: Mlp  # node message net
    f_y: Mlp  # edge message net
    f_p: Mlp  # planner net

    @classmethod
    def init(cls, n_dof: int, obstacle_size: int, cfg: ModelConfig,
             rng: np.random.Generator) -> "ModelParameters":
        h = cfg.d_hidden
        conf = n_dof + 1  # configuration plus the goal one-hot
        w = 2 * cfg.window + 1
        return cls(
            g_x=nn.mlp_init([conf * 4, h, h], rng),
            g_y=nn.mlp_init([conf * 3, h, h], rng),
            g_o=nn.mlp_init([obstacle_size, h, h], rng),
            k_x=nn.mlp_init([h, h], rng),
            q_x=nn.mlp_init([h, h], rng),
            v_x=nn.mlp_init([h, h], rng),
            k_y=nn.mlp_init([h, h], rng),
            q_y=nn.mlp_init([h, h], rng),
            v_y=nn.mlp_init([h, h], rng),
            ffn_x=nn.mlp_init([h, h, h], rng),
            ffn_y=nn.mlp_init([h, h, h], rng),
            f_x=nn.mlp_init([h * 4, h, h], rng),
            f_y=nn.mlp_init([h * 3, h, h], rng),
            f_p=nn.mlp_init([h + h * w, 64, h, h, 1], rng),
        )

    def named_tensors(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name in self.__dataclass_fields__:
            mlp: Mlp = getattr(self, name)
            for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
                out[f"{name}.{i}.w"] = w
                out[f"{name}.{i}.b"] = b
        return out


@dataclass
class GnnModel:
    params: ModelParameters
    config: ModelConfig
    n_dof: int
    obstacle_size: int

    def save(self, path) -> None:
        header = {
            "config": self.config.to_dict(),
            "n_dof": self.n_dof,
            "obstacle_size": self.obstacle_size,
        }
        blocks = {k: t.value for k, t in self.params.named_tensors().items()}
        nn.save_blocks(path, blocks, header)

    @classmethod
    def load(cls, path) -> "GnnModel":
        header, blocks = nn.load_blocks(path)
        cfg = ModelConfig.from_dict(header["config"])
        model = cls.fresh(header["n_dof"], header["obstacle_size"], cfg,
                          np.random.default_rng(0))
        for name, tensor in model.params.named_tensors().items():
            if name not in blocks:
                raise ValueError(f"model file missing block {name}")
            if blocks[name].shape != tensor.value.shape:
                raise ValueError(f"block {name} shape mismatch")
            tensor.value = blocks[name]
        return model

    @classmethod
    def fresh(cls, n_dof: int, obstacle_size: int, cfg: ModelConfig,
              rng: np.random.Generator) -> "GnnModel":
        return cls(ModelParameters.init(n_dof, obstacle_size, cfg, rng),
                   cfg, n_dof, obstacle_size)


# -- per-problem static features ------------------------------------------------


@dataclass
class GraphFeatures:
    """Precomputed arrays the forward pass needs; independent of parameters."""

    node_in: np.ndarray  # (|V|, 4(n+1))
    edge_in: np.ndarray  # (|E|, 3(n+1)), canonical i < j orientation
    edges: list[tuple[int, int]]
    edge_id: dict[tuple[int, int], int]  # both orientations map to the row
    dir_center: np.ndarray  # directed incidence grouped by center vertex
    dir_neighbor: np.ndarray
    dir_edge: np.ndarray
    seg_starts: np.ndarray  # group boundaries of dir_center (one per vertex)
    obstacle_feats: np.ndarray  # (T+1, obstacle_size)
    _gather_plans: dict = field(default_factory=dict, repr=False, compare=False)

    def gather_plan(self, name: str) -> nn.GatherPlan:
        """Cached scatter-add plan for one of the directed incidence arrays."""
        if name not in self._gather_plans:
            idx = {"center": self.dir_center, "neighbor": self.dir_neighbor,
                   "edge": self.dir_edge}[name]
            self._gather_plans[name] = nn.GatherPlan(idx)
        return self._gather_plans[name]


def vertex_features(graph: RoadmapGraph) -> np.ndarray:
    """Rows (v_i, flag_i) in R^{n+1}."""
    return np.hstack([graph.vertices, graph.goal_flag[:, None]])


def build_graph_features(problem: ProblemInstance) -> GraphFeatures:
    graph = problem.graph
    vf = vertex_features(graph)
    vg = vf[graph.goal_index]
    diff = vf - vg[None, :]
    dist2 = np.sum(diff**2, axis=1, keepdims=True)
    # the scalar heuristic occupies the first slot of a zero-padded block
    pad = np.zeros((vf.shape[0], vf.shape[1]))
    pad[:, 0:1] = dist2
    node_in = np.hstack([vf, np.tile(vg, (vf.shape[0], 1)), diff, pad])

    # Orient each undirected edge by comparing the endpoint feature vectors
    # themselves (not the indices), so features are relabeling-invariant.
    edges = []
    for i, j in graph.edge_list():
        if tuple(vf[j]) < tuple(vf[i]):
            i, j = j, i
        edges.append((i, j))
    edge_id: dict[tuple[int, int], int] = {}
    rows = []
    for eid, (i, j) in enumerate(edges):
        edge_id[(i, j)] = eid
        edge_id[(j, i)] = eid
        rows.append(np.concatenate([vf[i], vf[j], vf[j] - vf[i]]))
    edge_in = np.stack(rows) if rows else np.zeros((0, vf.shape[1] * 3))

    centers, neighbors, eids = [], [], []
    starts = []
    for v in range(graph.n_vertices):
        starts.append(len(centers))
        for u in graph.adjacency[v]:
            centers.append(v)
            neighbors.append(u)
            eids.append(edge_id[(v, u)])

    T = problem.grid.horizon
    feats = np.stack(
        [workspace_obstacle_feature(problem.trajectory, s) for s in range(T + 1)]
    ) if problem.obstacle_arms else np.zeros((T + 1, 0))

    return GraphFeatures(
        node_in=node_in,
        edge_in=edge_in,
        edges=edges,
        edge_id=edge_id,
        dir_center=np.asarray(centers, dtype=np.intp),
        dir_neighbor=np.asarray(neighbors, dtype=np.intp),
        dir_edge=np.asarray(eids, dtype=np.intp),
        seg_starts=np.asarray(starts, dtype=np.intp),
        obstacle_feats=feats,
    )


def obstacle_size_of(problem: ProblemInstance) -> int:
    return sum(2 * (a.n_dof + 1) for a in problem.obstacle_arms)


# -- forward passes ---------------------------------------------------------------


def encode_obstacles(gf: GraphFeatures, cfg: ModelConfig, params: ModelParameters) -> Tensor:
    """Encoded obstacle rows, one per grid step, with temporal encoding added."""
    enc = nn.mlp_forward(params.g_o, Tensor(gf.obstacle_feats))
    if cfg.temporal_encoding:
        te = Tensor(te_matrix(gf.obstacle_feats.shape[0] - 1, cfg))
        enc = nn.add(enc, te)
    return enc


def init_features(gf: GraphFeatures, params: ModelParameters) -> tuple[Tensor, Tensor]:
    x = nn.mlp_forward(params.g_x, Tensor(gf.node_in))
    y = nn.mlp_forward(params.g_y, Tensor(gf.edge_in))
    return x, y


def attention_inject(
    x: Tensor, y: Tensor, obs: Tensor, cfg: ModelConfig, params: ModelParameters
) -> tuple[Tensor, Tensor]:
    """Residual obstacle attention plus residual feed-forward, on x and y."""
    if not cfg.global_obstacle_encoding:
        return x, y
    kx = nn.mlp_forward(params.k_x, obs)
    vx = nn.mlp_forward(params.v_x, obs)
    qx = nn.mlp_forward(params.q_x, x)
    x = nn.add(x, nn.attention(kx, qx, vx))
    x = nn.add(x, nn.mlp_forward(params.ffn_x, x))
    ky = nn.mlp_forward(params.k_y, obs)
    vy = nn.mlp_forward(params.v_y, obs)
    qy = nn.mlp_forward(params.q_y, y)
    y = nn.add(y, nn.attention(ky, qy, vy))
    y = nn.add(y, nn.mlp_forward(params.ffn_y, y))
    return x, y


def message_passing(
    x: Tensor, y: Tensor, gf: GraphFeatures, params: ModelParameters, loops: int
) -> tuple[Tensor, Tensor]:
    """Max-residual aggregation, `loops` iterations with the same weights.

    Vertex and edge updates within one loop both read the pre-update features.
    """
    src = np.asarray([i for i, _ in gf.edges], dtype=np.intp)
    dst = np.asarray([j for _, j in gf.edges], dtype=np.intp)
    for _ in range(loops):
        xc = nn.gather_rows(x, gf.dir_center, gf.gather_plan("center"))
        xn = nn.gather_rows(x, gf.dir_neighbor, gf.gather_plan("neighbor"))
        ye = nn.gather_rows(y, gf.dir_edge, gf.gather_plan("edge"))
        msg = nn.mlp_forward(
            params.f_x, nn.concat_cols([nn.sub(xn, xc), xn, xc, ye])
        )
        agg = nn.segment_max_rows(msg, gf.seg_starts)
        if gf.edges:
            xi = nn.gather_rows(x, src)
            xj = nn.gather_rows(x, dst)
            emsg = nn.mlp_forward(params.f_y, nn.concat_cols([nn.sub(xj, xi), xj, xi]))
            y = nn.maximum(y, emsg)
        x = nn.maximum(x, agg)
    return x, y


def encode(
    gf: GraphFeatures, cfg: ModelConfig, params: ModelParameters
) -> tuple[Tensor, Tensor, Tensor]:
    """Full stage-1 pass: returns (x, y, encoded obstacle rows)."""
    obs = encode_obstacles(gf, cfg, params)
    x, y = init_features(gf, params)
    x, y = attention_inject(x, y, obs, cfg, params)
    x, y = message_passing(x, y, gf, params, cfg.loops)
    return x, y, obs


def quantize_step(t: float, dt: float, horizon: int) -> int:
    return min(max(int(round(t / dt)), 0), horizon)


def predict_priorities(
    candidate_edge_ids: Sequence[int],
    y: Tensor,
    obs: Tensor,
    t_step: int,
    cfg: ModelConfig,
    params: ModelParameters,
) -> Tensor:
    """Scalar priority per candidate edge, as a (C, 1) tensor."""
    if len(candidate_edge_ids) == 0:
        raise ValueError("empty candidate set")
    horizon = obs.value.shape[0] - 1
    w = cfg.window
    if cfg.local_obstacle_encoding:
        idx = np.clip(np.arange(t_step - w, t_step + w + 1), 0, horizon)
        window_rows = [nn.gather_rows(obs, np.full(len(candidate_edge_ids), s)) for s in idx]
    else:
        te_row = temporal_encoding(t_step, cfg)[None, :]
        const = Tensor(np.tile(te_row, (len(candidate_edge_ids), 1)))
        window_rows = [const] * (2 * w + 1)
    ye = nn.gather_rows(y, np.asarray(candidate_edge_ids, dtype=np.intp))
    inp = nn.concat_cols([ye] + window_rows)
    return nn.mlp_forward(params.f_p, inp)


def priorities_at(
    problem: ProblemInstance,
    gf: GraphFeatures,
    model: GnnModel,
    y: Tensor,
    obs: Tensor,
    vertex: int,
    t: float,
) -> list[tuple[float, int]]:
    """(priority, neighbor) for every edge out of `vertex` at time t."""
    neighbors = problem.graph.adjacency[vertex]
    eids = [gf.edge_id[(vertex, u)] for u in neighbors]
    step = quantize_step(t, problem.grid.dt, problem.grid.horizon)
    eta = predict_priorities(eids, y, obs, step, model.config, model.params)
    return [(float(eta.value[i, 0]), u) for i, u in enumerate(neighbors)]
