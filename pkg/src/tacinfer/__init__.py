"""tacinfer: learn state-machine models from tactic traces, search them for proofs.

Pipeline: proof scripts are parsed into (label, params) trace sequences
preserving semicolon composition; traces are arranged into a prefix tree and
generalised by red-blue state merging with k-tails scoring; the inferred
machine is traversed breadth-first against a prover backend to find the
shortest accepted proof; a k-folds harness evaluates how well a corpus's
proofs generalise to held-out lemmas.
"""
from ._kernel import active_kernel, have_compiled_kernel, set_kernel
from .efsm import (
    Efsm,
    Guard,
    Transition,
    accepts,
    build_prefix_tree,
    guard_allows,
    load_model,
    machine_from_json,
    machine_to_json,
    save_model,
    to_dot,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    LemmaResult,
    TooFewLemmas,
    iterate_adaptive,
    partition_kfolds,
    render_report,
    run_baseline,
    run_cross_validation,
)
from .inference import (
    InferenceConfig,
    MergeCandidate,
    infer,
    language_is_superset,
    merge_states,
    score_pair,
)
from .prover import (
    BackendError,
    BackendUnavailable,
    MockBackend,
    MockWorld,
    NothingToUndo,
    OutcomeKind,
    ProverSession,
    SessionDead,
    SubprocessBackend,
    SubprocessConfig,
    TacticOutcome,
    TacticTimeout,
    UnknownLemma,
    load_backend,
    run_builtin_baseline,
    start_session,
)
from .search import (
    DanglingComposition,
    ProofResult,
    SearchConfig,
    SearchNode,
    bfs_search,
    classify_proof,
    compose_sentences,
    render_result_block,
    sentences_to_elements,
)
from .traces import (
    Corpus,
    EmptySentence,
    ParseError,
    SchemaError,
    Trace,
    TraceElement,
    UnterminatedProof,
    load_corpus,
    parse_proof_script,
    read_traces,
    split_tactic_sentence,
    write_traces,
)

__version__ = "0.1.0"
