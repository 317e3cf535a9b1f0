"""Multi-objective search over real genomes.

Variation follows the sub-vector discipline: SBX (or DE) and polynomial
mutation are applied independently to each Normal-block slice of the real
vector, and every product stays in [0,1] so offspring decode without repair.
Algorithms: NSGA-II with SBX or DE variation, Tchebycheff MOEA/D and
steady-state SMS-EMOA, all sharing one evaluation interface and one elitist
archive of every non-dominated genotype seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .cgp import IntegerCgpGenome
from .errors import ConfigError


class ObjectiveVector(NamedTuple):
    """(classification error, raw MAdd count); both minimized."""

    f1: float
    f2: float


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return a.f1 <= b.f1 and a.f2 <= b.f2 and (a.f1 < b.f1 or a.f2 < b.f2)


@dataclass
class Individual:
    id: int
    real: np.ndarray
    stages: tuple[IntegerCgpGenome, ...]
    objectives: ObjectiveVector | None = None
    params: int = 0
    failed: bool = False
    birth_gen: int = 0
    rank: int = 0
    crowding: float = 0.0

    @property
    def madds(self) -> int:
        return int(self.objectives.f2) if self.objectives is not None else 0

    def genotype_key(self) -> tuple:
        return tuple(g.genes for g in self.stages)


ALGORITHMS = ("nsga2_sbx", "nsga2_de", "moead", "smsemoa")


@dataclass
class SearchConfig:
    """Search parameters; the shipped defaults are the engine defaults."""

    population_size: int = 24
    generations: int = 30
    pm: float = 0.3
    pc: float = 0.9
    sbx_eta: float = 20.0
    pm_eta: float = 20.0
    algorithm: str = "nsga2_sbx"
    de_cr: float = 1.0
    de_f: float = 0.5
    moead_neighborhood: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.pm <= 1.0 or not 0.0 <= self.pc <= 1.0:
            raise ConfigError("pm and pc must lie in [0,1]")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.algorithm.startswith("nsga2") and (self.population_size < 2 or self.population_size % 2):
            raise ConfigError("population must be even and >= 2 for pairwise crossover")
        if self.algorithm == "nsga2_de" and self.population_size < 4:
            raise ConfigError("DE variation needs a population of at least 4")
        if self.algorithm == "smsemoa" and self.population_size < 2:
            raise ConfigError("steady-state selection needs a population of at least 2")
        if self.population_size < 1:
            raise ConfigError("population must be >= 1")


# ---------------------------------------------------------------------------
# NSGA-II machinery


def dominance_matrix(objectives: Sequence[ObjectiveVector]) -> np.ndarray:
    f = np.asarray(objectives, dtype=np.float64)
    le = (f[:, None, :] <= f[None, :, :]).all(axis=-1)
    lt = (f[:, None, :] < f[None, :, :]).any(axis=-1)
    return le & lt


def nondominated_sort(objectives: Sequence[ObjectiveVector]) -> list[list[int]]:
    """Fronts of indices; front 0 is the non-dominated set."""
    n = len(objectives)
    if n == 0:
        return []
    dom = dominance_matrix(objectives)
    counts = dom.sum(axis=0).astype(np.int64)
    assigned = np.zeros(n, dtype=bool)
    fronts: list[list[int]] = []
    while not assigned.all():
        current = (counts == 0) & ~assigned
        idxs = np.flatnonzero(current)
        fronts.append(idxs.tolist())
        assigned |= current
        counts = counts - dom[idxs].sum(axis=0)
    return fronts


def crowding_distance(objectives: Sequence[ObjectiveVector]) -> np.ndarray:
    """Per-member crowding; boundaries get +inf, interiors the normalized
    neighbor-gap sum.  Ties sort by the other objective, so the result does
    not depend on input order."""
    f = np.asarray(objectives, dtype=np.float64)
    n = len(f)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(f.shape[1]):
        order = np.lexsort((f[:, 1 - m], f[:, m]))
        vals = f[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


# ---------------------------------------------------------------------------
# Variation operators (bounded to [0,1])

_SBX_EPS = 1e-14


def sbx_pair(
    parent_a: np.ndarray, parent_b: np.ndarray, eta: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Bounded simulated binary crossover on one sub-vector."""
    n = parent_a.size
    apply_gene = rng.random(n) <= 0.5
    u = rng.random(n)
    swap = rng.random(n) <= 0.5
    lo = np.minimum(parent_a, parent_b)
    hi = np.maximum(parent_a, parent_b)
    diff = hi - lo
    active = apply_gene & (diff > _SBX_EPS)
    child_a = parent_a.copy()
    child_b = parent_b.copy()
    if not active.any():
        return child_a, child_b

    d = diff[active]
    y1 = lo[active]
    y2 = hi[active]
    uu = u[active]
    exp = 1.0 / (eta + 1.0)

    def spread(beta: np.ndarray) -> np.ndarray:
        alpha = 2.0 - beta ** -(eta + 1.0)
        return np.where(uu <= 1.0 / alpha, (uu * alpha) ** exp, (1.0 / (2.0 - uu * alpha)) ** exp)

    bq1 = spread(1.0 + 2.0 * y1 / d)
    bq2 = spread(1.0 + 2.0 * (1.0 - y2) / d)
    c1 = np.clip(0.5 * ((y1 + y2) - bq1 * d), 0.0, 1.0)
    c2 = np.clip(0.5 * ((y1 + y2) + bq2 * d), 0.0, 1.0)
    sw = swap[active]
    child_a[active] = np.where(sw, c2, c1)
    child_b[active] = np.where(sw, c1, c2)
    return child_a, child_b


def polynomial_mutation(
    x: np.ndarray, eta: float, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Bounded polynomial mutation with per-gene probability `rate`."""
    n = x.size
    do = rng.random(n) < rate
    u = rng.random(n)
    y = x.copy()
    if not do.any():
        return y
    xi = x[do]
    ui = u[do]
    exp = 1.0 / (eta + 1.0)
    toward_lower = ui < 0.5
    xy = np.where(toward_lower, 1.0 - xi, xi)
    val = np.where(
        toward_lower,
        2.0 * ui + (1.0 - 2.0 * ui) * xy ** (eta + 1.0),
        2.0 * (1.0 - ui) + 2.0 * (ui - 0.5) * xy ** (eta + 1.0),
    )
    deltaq = np.where(toward_lower, val**exp - 1.0, 1.0 - val**exp)
    y[do] = np.clip(xi + deltaq, 0.0, 1.0)
    return y


def vary_subvectorwise(
    parent_a: np.ndarray,
    parent_b: np.ndarray,
    slices: Sequence[slice],
    config: SearchConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Crossover and mutation applied independently per Normal-block slice."""
    if parent_a.shape != parent_b.shape:
        raise AssertionError("parents do not share the sub-vector partition")
    child_a = parent_a.copy()
    child_b = parent_b.copy()
    for s in slices:
        if rng.random() < config.pc:
            child_a[s], child_b[s] = sbx_pair(parent_a[s], parent_b[s], config.sbx_eta, rng)
    for child in (child_a, child_b):
        for s in slices:
            if rng.random() < config.pm:
                length = s.stop - s.start
                child[s] = polynomial_mutation(child[s], config.pm_eta, 1.0 / length, rng)
    return child_a, child_b


def de_variation(
    target_index: int,
    reals: Sequence[np.ndarray],
    slices: Sequence[slice],
    config: SearchConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """rand/1/bin trial for one target, applied slice by slice."""
    others = [i for i in range(len(reals)) if i != target_index]
    if len(others) < 3:
        raise ConfigError("DE needs a population of at least 4 distinct individuals")
    pick = rng.choice(len(others), size=3, replace=False)
    a, b, c = (reals[others[int(i)]] for i in pick)
    target = reals[target_index]
    trial = target.copy()
    for s in slices:
        length = s.stop - s.start
        mutant = a[s] + config.de_f * (b[s] - c[s])
        cross = rng.random(length) <= config.de_cr
        cross[int(rng.integers(length))] = True
        trial[s] = np.where(cross, mutant, target[s])
    return np.clip(trial, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Elitist archive


class Archive:
    """Every non-dominated genotype seen, deduplicated by integer genome."""

    def __init__(self) -> None:
        self.members: list[Individual] = []
        self._keys: set = set()

    def update(self, individual: Individual) -> None:
        if individual.objectives is None:
            return
        key = individual.genotype_key()
        if key in self._keys:
            return
        obj = individual.objectives
        if any(dominates(m.objectives, obj) for m in self.members):
            return
        self.members = [m for m in self.members if not dominates(obj, m.objectives)]
        self.members.append(individual)
        self.members.sort(key=lambda m: m.id)
        self._keys = {m.genotype_key() for m in self.members}

    def update_all(self, individuals: Sequence[Individual]) -> None:
        for ind in individuals:
            self.update(ind)

    def objectives(self) -> list[ObjectiveVector]:
        return [m.objectives for m in self.members]


# ---------------------------------------------------------------------------
# Algorithm steps

EvaluateFn = Callable[[list[np.ndarray]], list[Individual]]


@dataclass
class MoeadState:
    weights: np.ndarray            # (N, 2)
    neighbors: np.ndarray          # (N, T)
    z: np.ndarray                  # raw ideal point
    f2_lo: float
    f2_hi: float

    def observe(self, obj: ObjectiveVector) -> None:
        self.z[0] = min(self.z[0], obj.f1)
        self.z[1] = min(self.z[1], obj.f2)
        self.f2_lo = min(self.f2_lo, obj.f2)
        self.f2_hi = max(self.f2_hi, obj.f2)

    def scalarize(self, obj: ObjectiveVector, w: np.ndarray) -> float:
        d1 = obj.f1 - self.z[0]
        span = self.f2_hi - self.f2_lo
        d2 = (obj.f2 - self.z[1]) / span if span > 0 else 0.0
        return max(w[0] * d1, w[1] * d2)


@dataclass
class SearchState:
    config: SearchConfig
    population: list[Individual]
    slices: tuple[slice, ...]
    evaluate: EvaluateFn
    archive: Archive
    rng_variation: np.random.Generator
    generation: int = 0
    moead: MoeadState | None = None


def uniform_weights(n: int) -> np.ndarray:
    if n < 2:
        return np.array([[0.5, 0.5]])
    t = np.arange(n) / (n - 1)
    return np.column_stack([t, 1.0 - t])


def nearest_neighbors(weights: np.ndarray, t: int) -> np.ndarray:
    n = len(weights)
    t = min(t, n)
    dist = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=-1)
    order = np.lexsort((np.tile(np.arange(n), (n, 1)), dist), axis=-1)
    return order[:, :t]


def assign_ranks(population: list[Individual]) -> None:
    objs = [ind.objectives for ind in population]
    for rank, front in enumerate(nondominated_sort(objs)):
        dists = crowding_distance([objs[i] for i in front])
        for member, d in zip(front, dists):
            population[member].rank = rank
            population[member].crowding = float(d)


def _tournament(population: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(len(population), size=2)
    a, b = population[int(i)], population[int(j)]
    return min(a, b, key=lambda ind: (ind.rank, -ind.crowding, ind.id))


def _survival(combined: list[Individual], size: int) -> list[Individual]:
    objs = [ind.objectives for ind in combined]
    survivors: list[Individual] = []
    for rank, front in enumerate(nondominated_sort(objs)):
        dists = crowding_distance([objs[i] for i in front])
        members = []
        for member, d in zip(front, dists):
            combined[member].rank = rank
            combined[member].crowding = float(d)
            members.append(combined[member])
        members.sort(key=lambda ind: (-ind.crowding, ind.id))
        take = min(len(members), size - len(survivors))
        survivors.extend(members[:take])
        if len(survivors) >= size:
            break
    return survivors


def step_nsga2(state: SearchState) -> SearchState:
    """One (mu + lambda) generation; variation is SBX or DE per config."""
    cfg = state.config
    rng = state.rng_variation
    pop = state.population
    offspring_reals: list[np.ndarray] = []
    if cfg.algorithm == "nsga2_de":
        reals = [ind.real for ind in pop]
        for target in range(len(pop)):
            trial = de_variation(target, reals, state.slices, cfg, rng)
            for s in state.slices:
                if rng.random() < cfg.pm:
                    length = s.stop - s.start
                    trial[s] = polynomial_mutation(trial[s], cfg.pm_eta, 1.0 / length, rng)
            offspring_reals.append(trial)
    else:
        for _ in range(len(pop) // 2):
            pa = _tournament(pop, rng)
            pb = _tournament(pop, rng)
            child_a, child_b = vary_subvectorwise(pa.real, pb.real, state.slices, cfg, rng)
            offspring_reals.extend([child_a, child_b])
    offspring = state.evaluate(offspring_reals)
    state.population = _survival(pop + offspring, cfg.population_size)
    state.generation += 1
    return state


def init_moead(state: SearchState) -> None:
    cfg = state.config
    weights = uniform_weights(cfg.population_size)
    neighbors = nearest_neighbors(weights, cfg.moead_neighborhood)
    objs = [ind.objectives for ind in state.population]
    f1 = [o.f1 for o in objs]
    f2 = [o.f2 for o in objs]
    state.moead = MoeadState(
        weights=weights,
        neighbors=neighbors,
        z=np.array([min(f1), min(f2)]),
        f2_lo=min(f2),
        f2_hi=max(f2),
    )


def step_moead(state: SearchState) -> SearchState:
    """One pass over all subproblems: neighbor mating, Tchebycheff update."""
    cfg = state.config
    rng = state.rng_variation
    ms = state.moead
    if ms is None:
        raise AssertionError("moead state not initialized")
    for i in range(cfg.population_size):
        hood = ms.neighbors[i]
        if len(hood) >= 2:
            pick = rng.choice(len(hood), size=2, replace=False)
            pa = state.population[int(hood[int(pick[0])])]
            pb = state.population[int(hood[int(pick[1])])]
        else:
            pa = pb = state.population[int(hood[0])]
        child_real, _ = vary_subvectorwise(pa.real, pb.real, state.slices, cfg, rng)
        child = state.evaluate([child_real])[0]
        ms.observe(child.objectives)
        replaced = 0
        for j in hood:
            j = int(j)
            w = ms.weights[j]
            if ms.scalarize(child.objectives, w) <= ms.scalarize(state.population[j].objectives, w):
                state.population[j] = child
                replaced += 1
                if replaced >= 2:
                    break
    state.generation += 1
    return state


def hv_contributions(front: Sequence[ObjectiveVector]) -> np.ndarray:
    """Exclusive bi-objective hypervolume contribution of each front member.

    Objectives are min-max normalized over the front first (raw MAdd counts
    would otherwise dwarf the error axis and starve the low-error boundary),
    and the reference sits one normalized unit beyond the maxima, at (2, 2).
    """
    f = np.asarray(front, dtype=np.float64)
    span = f.max(axis=0) - f.min(axis=0)
    f = np.where(span > 0, (f - f.min(axis=0)) / np.where(span > 0, span, 1.0), 0.0)
    ref = (2.0, 2.0)
    order = np.lexsort((f[:, 1], f[:, 0]))
    contrib = np.zeros(len(f))
    for pos, idx in enumerate(order):
        f1_next = ref[0] if pos == len(order) - 1 else f[order[pos + 1], 0]
        f2_prev = ref[1] if pos == 0 else f[order[pos - 1], 1]
        contrib[idx] = (f1_next - f[idx, 0]) * (f2_prev - f[idx, 1])
    return contrib


def step_smsemoa(state: SearchState) -> SearchState:
    """population_size steady-state steps (= one generation of budget): add
    one offspring, drop the minimal-contribution member of the worst front."""
    cfg = state.config
    rng = state.rng_variation
    for _ in range(cfg.population_size):
        pick = rng.choice(len(state.population), size=2, replace=False)
        pa = state.population[int(pick[0])]
        pb = state.population[int(pick[1])]
        child_real, _ = vary_subvectorwise(pa.real, pb.real, state.slices, cfg, rng)
        child = state.evaluate([child_real])[0]
        combined = state.population + [child]
        fronts = nondominated_sort([ind.objectives for ind in combined])
        worst = fronts[-1]
        if len(worst) == 1:
            drop = worst[0]
        else:
            contrib = hv_contributions([combined[i].objectives for i in worst])
            drop = min(zip(contrib, (combined[i].id for i in worst), worst))[2]
        state.population = [ind for k, ind in enumerate(combined) if k != drop]
    state.generation += 1
    return state


STEPPERS = {
    "nsga2_sbx": step_nsga2,
    "nsga2_de": step_nsga2,
    "moead": step_moead,
    "smsemoa": step_smsemoa,
}
