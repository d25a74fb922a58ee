"""Foveated vision toolkit.

Log-polar retinotopic mapping around a fixation point, geometric
worst-case attacks (rotation, zoom, translation), and fixation-grid
likelihood maps with localization metrics, all against a pluggable
classifier oracle (a built-in deterministic toy, or an external model
bridge over a stdio wire protocol).
"""

from .attacks import (
    AttackOutcome,
    PipelineSpec,
    accuracy_sweep,
    attack_accuracy,
    prepare_input,
    rotation_attack,
    translation_attack,
    zoom_attack,
)
from .datasets import (
    SCENE_LABELS,
    AnnotationRecord,
    SyntheticScene,
    bbox_mask,
    generate_scene,
    keypoint_mask,
    load_manifest,
    make_suite,
)
from .imgops import (
    BoundingBox,
    circular_mask,
    fixation_sample,
    focus_crop,
    resize,
    roll_translate,
    rotate_about_fixation,
    zoom_about_fixation,
)
from .localize import (
    LikelihoodMap,
    MaskedGrid,
    RecenteredMean,
    diff_map,
    fixation_grid,
    iou_curve,
    likelihood_map,
    log_odds_map,
    mean_in_out,
    pointing_game,
    recenter_mean,
    saccade_and_classify,
)
from .oracle import (
    BridgeClient,
    BridgeError,
    LabelSet,
    ToyClassifier,
    classify,
    cross_entropy,
    label_set_likelihood,
    softmax,
    toy_descriptor,
    toy_fit,
)
from .retina import (
    LogPolarGrid,
    build_grid,
    from_logpolar,
    logpolar_coords,
    sample_bilinear,
    to_logpolar,
)

__version__ = "0.1.0"
