"""Elitist non-dominated sorting machinery over real-coded genomes.

The genome is a vector of reals with per-gene bounds.  For tree tuning it has
five genes: criterion code in [0, 1] (< 0.5 reads gini, otherwise entropy),
depth, min samples to split, leaf budget, and the positive class weight.
Integer-natured genes are real-coded and rounded half-up at decode time (and
inside crossover, which hands rounded genomes to the next generation).

Domination follows the classic rule on (f1, f2), extended for the
non-injective genotype-to-tree map: when two individuals tie exactly on both
objectives, the one whose tree has fewer leaves dominates, and if those tie
as well, the lower ``max_leaf_nodes`` hyperparameter wins.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import ObjectiveVector
from .tree import ENTROPY, GINI, DecisionTree, Hyperparameters
from .util import clamp, round_half_up

GENE_CRITERION = 0
GENE_DEPTH = 1
GENE_MIN_SPLIT = 2
GENE_MAX_LEAVES = 3
GENE_CLASS_WEIGHT = 4
N_GENES = 5

#: genes decoded by rounding half-up to an integer
INTEGER_GENES = (GENE_DEPTH, GENE_MIN_SPLIT, GENE_MAX_LEAVES)


@dataclass
class Genome:
    """Real gene values plus the fixed per-gene (low, high) bounds."""

    genes: np.ndarray
    bounds: np.ndarray  # shape (len(genes), 2)

    def __post_init__(self):
        self.genes = np.asarray(self.genes, dtype=np.float64)
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if self.bounds.shape != (len(self.genes), 2):
            raise ValueError("bounds must be one (low, high) pair per gene")

    def copy(self):
        return Genome(self.genes.copy(), self.bounds)

    def in_bounds(self):
        return bool((self.genes >= self.bounds[:, 0]).all()
                    and (self.genes <= self.bounds[:, 1]).all())


@dataclass
class Individual:
    """A genome with its decoded tree, objective scores and NSGA-II state."""

    genome: Genome
    hp: Hyperparameters = None
    tree: DecisionTree = field(default=None, repr=False)
    objectives: ObjectiveVector = None       # scored on validation
    test_objectives: ObjectiveVector = None  # filled for the final front only
    tree_depth: int = 0
    tree_leaves: int = 0
    rank: int = 0
    crowding: float = 0.0


def decode(genome: Genome, learn_size: int) -> Hyperparameters:
    """Genome -> hyperparameters: threshold the criterion gene, round and
    clamp the integer genes to [1, D], [2, learn_size], [2, L]."""
    g = genome.genes
    if len(g) != N_GENES:
        raise ValueError(f"expected {N_GENES} genes, got {len(g)}")
    depth_cap = int(genome.bounds[GENE_DEPTH, 1])
    leaf_cap = int(genome.bounds[GENE_MAX_LEAVES, 1])
    return Hyperparameters(
        criterion=GINI if g[GENE_CRITERION] < 0.5 else ENTROPY,
        max_depth=clamp(round_half_up(g[GENE_DEPTH]), 1, depth_cap),
        min_samples_split=clamp(round_half_up(g[GENE_MIN_SPLIT]), 2, int(learn_size)),
        max_leaf_nodes=clamp(round_half_up(g[GENE_MAX_LEAVES]), 2, max(leaf_cap, 2)),
        class_weight=float(g[GENE_CLASS_WEIGHT]),
    )


def dominates(a: Individual, b: Individual) -> bool:
    """Pareto domination on (f1, f2) with the equal-objectives tie-break:
    fewer tree leaves dominates, then a lower max_leaf_nodes bound."""
    fa, fb = a.objectives, b.objectives
    if fa.f1 <= fb.f1 and fa.f2 <= fb.f2 and (fa.f1 < fb.f1 or fa.f2 < fb.f2):
        return True
    if fa.f1 == fb.f1 and fa.f2 == fb.f2:
        if a.tree_leaves != b.tree_leaves:
            return a.tree_leaves < b.tree_leaves
        return _leaf_bound(a) < _leaf_bound(b)
    return False


def _leaf_bound(ind: Individual) -> float:
    if ind.hp is None or ind.hp.max_leaf_nodes is None:
        return math.inf
    return ind.hp.max_leaf_nodes


def fast_nondominated_sort(population) -> list:
    """Deb's fast non-dominated sort; assigns 1-based ranks and returns the
    ordered list of fronts."""
    n = len(population)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    fronts = [[]]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if dominates(population[i], population[j]):
                dominated_by[i].append(j)
            elif dominates(population[j], population[i]):
                counts[i] += 1
        if counts[i] == 0:
            population[i].rank = 1
            fronts[0].append(i)
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    population[j].rank = len(fronts) + 1
                    nxt.append(j)
        fronts.append(nxt)
    fronts.pop()
    return [[population[i] for i in front] for front in fronts]


def crowding_distance(front) -> list:
    """Per-objective neighbor-gap sum; boundary members get +inf.  Assigns
    ``crowding`` on the individuals and returns the distances."""
    n = len(front)
    distance = [0.0] * n
    for objective in (0, 1):
        values = [ind.objectives[objective] for ind in front]
        order = sorted(range(n), key=lambda i: values[i])
        distance[order[0]] = distance[order[-1]] = math.inf
        span = values[order[-1]] - values[order[0]]
        if span > 0:
            for k in range(1, n - 1):
                i = order[k]
                if distance[i] != math.inf:
                    distance[i] += (values[order[k + 1]] - values[order[k - 1]]) / span
    for ind, d in zip(front, distance):
        ind.crowding = d
    return distance


def assign_rank_and_crowding(population) -> list:
    fronts = fast_nondominated_sort(population)
    for front in fronts:
        crowding_distance(front)
    return fronts


def tournament_select(population, rng) -> Individual:
    """Binary tournament: lower rank wins, then larger crowding, then the
    first individual drawn."""
    a = population[int(rng.integers(len(population)))]
    b = population[int(rng.integers(len(population)))]
    if b.rank < a.rank:
        return b
    if b.rank == a.rank and b.crowding > a.crowding:
        return b
    return a


def crossover(parent_a: Genome, parent_b: Genome, pc: float, rng):
    """Per-gene blend crossover.

    Each gene blends with probability ``pc`` using a fresh beta ~ U(0,1):
    children get mean +/- beta * |ga - gb| / 2, staying inside the parents'
    interval; otherwise the gene is copied from the parents.  Integer genes
    of the finished children are rounded half-up, then everything is clamped
    to the bounds.
    """
    ga, gb = parent_a.genes, parent_b.genes
    child_a = ga.copy()
    child_b = gb.copy()
    for k in range(len(ga)):
        if rng.random() <= pc:
            beta = rng.random()
            mean = (ga[k] + gb[k]) / 2.0
            dev = beta * abs(ga[k] - gb[k]) / 2.0
            child_a[k] = mean + dev
            child_b[k] = mean - dev
    return (_finish_child(child_a, parent_a.bounds),
            _finish_child(child_b, parent_a.bounds))


def _finish_child(genes, bounds):
    if len(genes) == N_GENES:
        for k in INTEGER_GENES:
            genes[k] = round_half_up(genes[k])
    genes = np.clip(genes, bounds[:, 0], bounds[:, 1])
    return Genome(genes, bounds)


def polynomial_delta(u: float, mu: float) -> float:
    """Perturbation factor in [-1, 1]: -1 + (2u)^(1/(mu+1)) for u <= 0.5,
    1 - (2(1-u))^(1/(mu+1)) above."""
    if u <= 0.5:
        return (2.0 * u) ** (1.0 / (mu + 1.0)) - 1.0
    return 1.0 - (2.0 * (1.0 - u)) ** (1.0 / (mu + 1.0))


def mutate(genome: Genome, pm: float, mu: float, rng, per_gene: bool = False) -> Genome:
    """Polynomial mutation.

    With probability ``pm`` (per individual) one uniformly chosen gene g
    moves by delta * (g - low) or delta * (high - g), the direction picked by
    a fair coin and delta by ``polynomial_delta``.  ``per_gene=True`` instead
    gives every gene an independent ``pm`` chance.
    """
    genes = genome.genes.copy()
    bounds = genome.bounds
    if per_gene:
        targets = [k for k in range(len(genes)) if rng.random() < pm]
    else:
        targets = [int(rng.integers(len(genes)))] if rng.random() < pm else []
    for k in targets:
        direction = rng.random()
        delta = polynomial_delta(rng.random(), mu)
        low, high = bounds[k]
        if direction < 0.5:
            genes[k] = genes[k] + delta * (genes[k] - low)
        else:
            genes[k] = genes[k] + delta * (high - genes[k])
        genes[k] = clamp(genes[k], low, high)
    return Genome(genes, bounds)


def elitist_replacement(parents, offspring, n: int) -> list:
    """Take the best ``n`` of parents + offspring: whole fronts while they
    fit, then the last front's most spread-out members."""
    union = list(parents) + list(offspring)
    if len(union) < n:
        raise ValueError(f"cannot select {n} from {len(union)} individuals")
    fronts = fast_nondominated_sort(union)
    survivors = []
    for front in fronts:
        crowding_distance(front)
        if len(survivors) + len(front) <= n:
            survivors.extend(front)
        else:
            room = n - len(survivors)
            by_spread = sorted(range(len(front)), key=lambda i: -front[i].crowding)
            survivors.extend(front[i] for i in sorted(by_spread[:room]))
        if len(survivors) == n:
            break
    return survivors
