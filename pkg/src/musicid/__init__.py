"""Music-stimulated EEG band-power user identification and verification."""

from .anova import AnovaResult, anova_f, anova_oneway, anova_per_feature, f_pvalue
from .evaluation import (
    EvalReport,
    SplitSpec,
    ablate,
    cross_condition,
    cross_validate,
    evaluate_identification,
    evaluate_verification,
    kfold,
    split_matrix,
    split_session_frames,
)
from .features import (
    FEATURE_NAMES,
    FeatureMatrix,
    FeatureVector,
    Frame,
    featurize_dataset,
    featurize_session,
    frame_stats,
    make_frames,
    select_features,
    zcr,
)
from .forest import (
    Forest,
    ForestParams,
    OvrModel,
    best_split,
    feature_importance,
    gini_impurity,
    load_model,
    predict,
    save_model,
    train_forest,
    train_ovr,
    verify,
)
from .ingest import (
    ChannelId,
    Condition,
    ReducedSession,
    Session,
    SignalKind,
    drop_delta,
    parse_session,
    serialize_session,
    validate_session,
)
from .synth import CohortSpec, SubjectProfile, generate_cohort, generate_session, make_profile

__version__ = "0.1.0"
