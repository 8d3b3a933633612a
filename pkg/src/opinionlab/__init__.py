"""Holistic analysis of vaccine-debate text: declarative relational rules
with hard consistency constraints, exact MAP inference over a compiled 0-1
linear program, locally normalized scorers trained by an EM loop that works
from a small seeded fraction of labels, plus an embedding-grounded reason
workbench and annotation/agreement analytics.

The package splits along those lines: ``rules`` parses the declarative
program, ``inference`` grounds and solves it, ``scorers`` holds the feature
hashing and softmax classifiers, ``training`` runs distant initialization
and the EM loop, ``evaluation`` has folds/reports/correlations/ablations,
``reasons`` is the catalog workbench (served over HTTP by ``service``),
``agreement`` computes Krippendorff's alpha, and ``synthetic`` samples the
planted corpus used for end-to-end checks. The ``opinionlab`` console
script in ``cli`` fronts the common workflows.
"""

from .agreement import (
    AgreementError,
    AgreementReport,
    FrameTuple,
    NominalAnnotations,
    SpanAnnotations,
    SpanLabel,
    char_level_alpha,
    krippendorff_alpha,
    load_annotations,
    majority_vote,
    merge_frame_tuples,
)
from .corpus import (
    CorpusError,
    EmbeddingStore,
    EntityMention,
    Tweet,
    embed,
    load_corpus,
    make_tweet,
    serialize_corpus,
    weak_label_liberty,
    weak_label_stance,
)
from .evaluation import (
    CorrelationMatrix,
    CrossValidation,
    EvaluationError,
    FoldPlan,
    MetricReport,
    ablation_run,
    ablation_table,
    cross_validate,
    default_ablation_subsets,
    f1_report,
    make_folds,
    pearson_matrix,
    pearson_r,
    smoke_plan,
    task_reports,
)
from .inference import (
    AssignmentResult,
    Infeasible,
    InferenceError,
    InferenceProblem,
    ScorerSuite,
    brute_force_map,
    check_hard_constraints,
    evaluate_objective,
    ground,
    horn_to_linear,
    solve_map,
    write_lp,
)
from .reasons import (
    CatalogError,
    CatalogSession,
    Reason,
    add_phrase,
    add_reason,
    assign_all,
    closest_tweets,
    final_catalog,
    initial_catalog,
    load_catalog,
    project_2d,
    remove_reason,
    save_catalog,
    silhouette,
    undo,
    wordcloud_terms,
)
from .rules import (
    RuleError,
    RuleProgram,
    default_program,
    parse_program,
    render_program,
)
from .scorers import (
    ScorerError,
    ScorerParams,
    TrainConfig,
    load_params,
    save_params,
    train_local,
)
from .service import create_app, open_session
from .synthetic import make_distant, make_synthetic, split_corpus
from .training import (
    AnnotatedCorpus,
    DistantCorpora,
    EMConfig,
    TrainingError,
    em_train,
    init_distant,
    initial_suite,
    predict,
    seed_labels,
)

__version__ = "0.1.0"
