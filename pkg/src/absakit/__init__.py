"""Marker-format structured generation for cross-lingual ABSA.

The toolkit serializes (aspect term, category, polarity) tuples into a
marker wire format, decodes greedily over any scorer with an optional
grammar constraint, builds few-shot training mixtures, and scores
predictions with exact-match micro F1.
"""

from .corpus import (
    BadSpanError,
    CorpusError,
    Dataset,
    MalformedXmlError,
    MixRecipe,
    NTooLargeError,
    TooFewExamplesError,
    UnknownPolarityLabelError,
    few_shot_mix,
    ingest_semeval,
    read_jsonl,
    split_dev,
    stats,
    write_jsonl,
)
from .decoding import (
    DecodeResult,
    DecoderState,
    DisallowedTokenError,
    EmptyInventoryError,
    MarkerGrammar,
    PhraseTrie,
    Scorer,
    TermTokenSet,
    TokenizerView,
    VectorScorer,
    decode,
    term_token_set,
)
from .domain import (
    ACSA,
    ACTE,
    DEFAULT_LEX,
    E2E,
    IMPLICIT_LABEL,
    TASD,
    TASKS,
    AspectTerm,
    Category,
    CategoryInventory,
    Element,
    Example,
    InventoryCollisionError,
    Lexicalization,
    Polarity,
    SentimentTuple,
    TaskSpec,
    UnknownCategoryError,
    UnknownPolarityError,
    default_inventory,
    delexicalize,
    lexicalize,
    project,
    task_by_id,
)
from .evaluation import (
    Aggregate,
    EmptyScoresError,
    ErrorKind,
    ErrorRecord,
    LengthMismatchError,
    RunScore,
    aggregate,
    classify_errors,
    micro_f1,
)
from .experiment import (
    BridgeUnreachableError,
    ExperimentConfig,
    MissingCorpusError,
    run_experiment,
)
from .scorers import (
    AdversarialScorer,
    BadSubstitutionStepError,
    ScriptedScorer,
    UnencodableTargetError,
    WordTokenizer,
    scripted,
    tokenizer_for_corpus,
)
from .seqformat import (
    A_MARKER,
    C_MARKER,
    P_MARKER,
    SEPARATOR,
    DiagnosticKind,
    EmptySentenceError,
    ParseDiagnostic,
    build_input,
    build_target,
    parse_output,
)

__version__ = "0.1.0"
