"""dgslow: a multi-objective word-substitution attack engine for dialogue models.

The library crafts small perturbations of a dialogue utterance that push a
victim model toward longer and less accurate responses, then scores the
attack with sentence-level accuracy metrics. See README.md for a tour.
"""

from .corpus import (
    CorpusSpec,
    DialogueInstance,
    TokenizedSentence,
    detokenize,
    generate_synthetic_corpus,
    grammar_word_groups,
    load_jsonl,
    tokenize,
    write_jsonl,
)
from .metrics import (
    AttackSuccessRecord,
    MetricScores,
    aggregate,
    bleu,
    meteor_lite,
    rouge_l,
    score_generation,
    success,
)
from .objectives import (
    ObjectiveValues,
    ParetoSolution,
    SaliencyRanking,
    compute_tc,
    evaluate_objectives,
    loss_eos,
    loss_ll,
    loss_reg,
    loss_stop,
    solve_pareto,
    word_saliency,
)
from .perturber import (
    AntonymLexicon,
    RuleGrammarChecker,
    SentenceEncoder,
    StaticNeighborGenerator,
    StaticWordEmbeddings,
    ValidationVerdict,
    substitute,
    validate,
)
from .search import (
    AdversarialCandidate,
    AttackConfig,
    AttackOutcome,
    PerturbationPipeline,
    attack,
    attack_all,
    fitness,
    fitness_length_only,
    preference,
    quality,
    select,
)
from .victim import (
    GenerationResult,
    GradientPair,
    ReferenceScore,
    StopLossParams,
    ToyVictim,
    ToyVictimConfig,
    VictimModel,
    check_victim_contract,
    connect_remote,
    mean_reference_confidence,
    serialize_input,
)

__version__ = "0.1.0"
