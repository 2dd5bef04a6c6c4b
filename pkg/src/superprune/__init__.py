"""Learned candidate pruning for a small enumerative superoptimizer.

Modules, bottom up:

* :mod:`.ir`: the integer IR, its canonical form, text format and cost model
* :mod:`.semantics`: bit-exact evaluation and the equivalence oracle
* :mod:`.synth`: bottom-up candidate enumeration
* :mod:`.features`: the 20 LHS/RHS similarity features
* :mod:`.dataset`: labeled datasets, balancing, feature selection, scaling
* :mod:`.mlp`: the classifier
* :mod:`.pipeline`: pruning strategies, the verification cache, benchmarks
* :mod:`.workflow` and :mod:`.cli`: the scripted experiment and its driver
"""

from .cache import CacheStore
from .corpus import BUNDLED_CORPUS, load_corpus
from .dataset import (FeatureMask, LabeledDataset, Scaler, build_dataset, cluster_centroids_balance,
                      select_k_best, split, standardize_apply, standardize_fit)
from .features import FEATURE_NAMES, FeatureConfig, FeatureVector, extract, icd_similarity, lzw_size
from .ir import Block, CostModel, Opcode, block_cost, build_dfg, normalize_opcode, parse_block, print_block
from .mlp import SHIPPED_MODEL, MlpModel, TrainConfig, evaluate, gradient_check, roc_points, train
from .pipeline import (OptimizationResult, Strategy, StrategyKind, StrategyReport, model_prune,
                       optimize_lhs, pareto_front, quickcheck_prune, run_benchmark)
from .semantics import (InputAssignment, OracleConfig, Status, Verdict, check_equivalence, eval_block,
                        probe_vectors)
from .synth import SynthConfig, enumerate_candidates
from .workflow import RunConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "BUNDLED_CORPUS", "Block", "CacheStore", "CostModel", "FEATURE_NAMES", "FeatureConfig",
    "FeatureMask", "FeatureVector", "InputAssignment", "LabeledDataset", "MlpModel", "Opcode",
    "OptimizationResult", "OracleConfig", "RunConfig", "SHIPPED_MODEL", "Scaler", "Status",
    "Strategy", "StrategyKind", "StrategyReport", "SynthConfig", "TrainConfig", "Verdict",
    "block_cost", "build_dataset", "build_dfg", "check_equivalence", "cluster_centroids_balance",
    "enumerate_candidates", "eval_block", "evaluate", "extract", "gradient_check", "icd_similarity",
    "load_corpus", "lzw_size", "model_prune", "normalize_opcode", "optimize_lhs", "parse_block",
    "pareto_front", "print_block", "probe_vectors", "quickcheck_prune", "roc_points",
    "run_benchmark", "run_pipeline", "select_k_best", "split", "standardize_apply",
    "standardize_fit", "train",
]
