"""Generational meta-learning: evolve tree hyperparameters on the learn set,
score objectives on validation, and return the final Pareto front scored on
test.

Pool initialization is adaptive: the first individual is the default tree
(gini, unbounded depth/leaves, min split 2, even class weights); its actual
depth D and leaf count L become the gene bounds for the whole run.  The
second individual is its entropy twin (entropy, D, 2, L, 0.5) and the rest
are sampled uniformly inside the bounds.

Per generation: binary tournament on the current population, per-gene blend
crossover, polynomial mutation, children trained on learn and scored on
validation, then elitist replacement of the 2N union down to N.  Validation
is the only guidance signal; test is touched once, for the returned front.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .metrics import evaluate
from .nsga2 import (Genome, Individual, assign_rank_and_crowding, crossover,
                    decode, dominates, elitist_replacement, mutate,
                    tournament_select)
from .tree import Hyperparameters, TreeBuilder


@dataclass(frozen=True)
class EAParams:
    """Evolution settings (defaults follow the experimental protocol)."""

    generations: int = 300
    population: int = 50
    crossover_prob: float = 1.0
    mutation_prob: float = 0.3
    mutation_mu: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be even and >= 4")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.mutation_mu <= 0:
            raise ValueError("mutation_mu must be positive")


@dataclass(frozen=True)
class GenerationTrace:
    """Distribution snapshot of the validation Pareto set at one generation."""

    generation: int
    front_size: int
    f1_mean: float
    f1_q1: float
    f1_q3: float
    f2_mean: float
    f2_q1: float
    f2_q3: float


def initialize_population(learn, n: int, rng, builder: TreeBuilder = None):
    """Adaptive first pool; returns (individuals, depth_cap, leaf_cap).

    Gene bounds derived from the default tree stay fixed for the whole run;
    degenerate default trees are floored to depth >= 2 / leaves >= 3 so the
    search space never collapses.
    """
    builder = builder or TreeBuilder(learn.features, learn.y)
    try:
        default_tree = builder.train(Hyperparameters())
    except TrainingError as exc:
        raise TrainingError(f"cannot initialize population: {exc}") from exc
    depth_cap = max(default_tree.depth, 2)
    leaf_cap = max(default_tree.leaf_count, 3)
    bounds = np.array([
        [0.0, 1.0],
        [1.0, depth_cap],
        [2.0, learn.n],
        [1.0, leaf_cap],
        [0.0, 1.0],
    ])

    population = []
    first = Individual(genome=Genome(np.array([0.0, depth_cap, 2.0, leaf_cap, 0.5]), bounds))
    first.hp = decode(first.genome, learn.n)
    first.tree = default_tree
    population.append(first)

    second = Individual(genome=Genome(np.array([1.0, depth_cap, 2.0, leaf_cap, 0.5]), bounds))
    second.hp = decode(second.genome, learn.n)
    second.tree = builder.train(second.hp)
    population.append(second)

    while len(population) < n:
        genes = rng.uniform(bounds[:, 0], bounds[:, 1])
        ind = Individual(genome=Genome(genes, bounds))
        ind.hp = decode(ind.genome, learn.n)
        ind.tree = builder.train(ind.hp)
        population.append(ind)

    for ind in population:
        ind.tree_depth = ind.tree.depth
        ind.tree_leaves = ind.tree.leaf_count
    return population, depth_cap, leaf_cap


def _pareto_points(population):
    """Distinct objective pairs of the current rank-1 front, sorted."""
    return sorted({(i.objectives.f1, i.objectives.f2) for i in population if i.rank == 1})


def _trace(generation, population) -> GenerationTrace:
    points = _pareto_points(population)
    f1 = np.array([p[0] for p in points])
    f2 = np.array([p[1] for p in points])
    return GenerationTrace(
        generation=generation,
        front_size=len(points),
        f1_mean=float(f1.mean()),
        f1_q1=float(np.percentile(f1, 25)),
        f1_q3=float(np.percentile(f1, 75)),
        f2_mean=float(f2.mean()),
        f2_q1=float(np.percentile(f2, 25)),
        f2_q3=float(np.percentile(f2, 75)),
    )


def save_checkpoint(path, generation, population, traces, rng):
    state = {
        "generation": generation,
        "bounds": population[0].genome.bounds.tolist(),
        "genomes": [ind.genome.genes.tolist() for ind in population],
        "rng_state": rng.bit_generator.state,
        "traces": [asdict(t) for t in traces],
    }
    Path(path).write_text(json.dumps(state, indent=2, sort_keys=True))


def load_checkpoint(path):
    state = json.loads(Path(path).read_text())
    bounds = np.array(state["bounds"])
    genomes = [Genome(np.array(genes), bounds) for genes in state["genomes"]]
    traces = [GenerationTrace(**t) for t in state["traces"]]
    return state["generation"], genomes, traces, state["rng_state"]


def run(split, params: EAParams, per_gene_mutation: bool = False,
        checkpoint_path=None, checkpoint_every: int = 0, resume: bool = False):
    """Execute the full meta-learning loop on one split.

    Returns ``(front, traces)``: the mutually non-dominated final individuals
    (validation objectives plus a one-shot test evaluation, sorted by
    ascending error) and one trace per generation.
    """
    learn = split.learn
    builder = TreeBuilder(learn.features, learn.y)
    rng = np.random.default_rng(params.seed)

    if resume:
        start_gen, genomes, traces, rng_state = load_checkpoint(checkpoint_path)
        population = []
        for genome in genomes:
            ind = Individual(genome=genome)
            ind.hp = decode(genome, learn.n)
            ind.tree = builder.train(ind.hp)
            ind.tree_depth = ind.tree.depth
            ind.tree_leaves = ind.tree.leaf_count
            population.append(ind)
        rng.bit_generator.state = rng_state
        traces = list(traces)
    else:
        population, _, _ = initialize_population(learn, params.population, rng, builder)
        traces = []
        start_gen = 0

    for ind in population:
        ind.objectives = evaluate(ind.tree, split.validation)
    assign_rank_and_crowding(population)

    for generation in range(start_gen + 1, params.generations + 1):
        offspring = []
        while len(offspring) < params.population:
            parent_a = tournament_select(population, rng)
            parent_b = tournament_select(population, rng)
            for genome in crossover(parent_a.genome, parent_b.genome,
                                    params.crossover_prob, rng):
                genome = mutate(genome, params.mutation_prob, params.mutation_mu,
                                rng, per_gene=per_gene_mutation)
                child = Individual(genome=genome)
                child.hp = decode(genome, learn.n)
                child.tree = builder.train(child.hp)
                child.tree_depth = child.tree.depth
                child.tree_leaves = child.tree.leaf_count
                child.objectives = evaluate(child.tree, split.validation)
                offspring.append(child)
        population = elitist_replacement(population, offspring, params.population)
        assign_rank_and_crowding(population)
        traces.append(_trace(generation, population))
        if checkpoint_path and checkpoint_every and generation % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, generation, population, traces, rng)

    front = [ind for ind in population if ind.rank == 1]
    for ind in front:
        ind.test_objectives = evaluate(ind.tree, split.test)
    for a in front:  # the returned set must be mutually non-dominated
        for b in front:
            assert a is b or not dominates(a, b), "final front contains a dominated member"
    front.sort(key=lambda i: (i.objectives.f1, i.objectives.f2, i.tree_leaves))
    if checkpoint_path:
        save_checkpoint(checkpoint_path, params.generations, population, traces, rng)
    return front, traces
