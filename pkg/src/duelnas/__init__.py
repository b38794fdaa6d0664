"""Surrogate-driven multi-objective architecture search over tabular benchmarks."""

from .bench import (
    AccuracyField,
    ArchRecord,
    BenchmarkTable,
    CountingTable,
    global_pareto_front,
    load_table,
    synthetic_table,
    write_table,
)
from .evolve import (
    FrontEntry,
    Individual,
    RunConfig,
    SearchResult,
    biased_selection,
    extract_final_front,
    non_dominated_sort,
    run_search,
    tournament_select,
    true_comparator,
)
from .metrics import Confusion, RunStats, evaluate_surrogate, front_recall, run_stats
from .pairs import Sample, TrainingPair, assemble_training_set, sample_architectures
from .space import (
    Genotype,
    ObjectiveVector,
    OneHotBits,
    decode,
    dominates,
    encode,
    random_genotype,
    repair,
)
from .surrogate import (
    DominanceRelation,
    Ensemble,
    SiameseBlock,
    TrainConfig,
    ensemble_predict,
    forward,
    load_ensemble,
    loss_and_grads,
    predict_bit,
    save_ensemble,
    train_block,
    train_ensemble,
)

__version__ = "0.1.0"
