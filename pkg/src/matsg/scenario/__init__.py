from .distribution import (
    EPS_FLOOR,
    TRAIN_SEED_LIMIT,
    BernoulliFactor,
    CategoricalFactor,
    GaussianFactor,
    GeneratorDistribution,
    ScenarioParams,
    UniformFactor,
    check_distribution,
    min_std,
    project_floor,
    sample_value,
    dr_distribution,
    sample_params,
    uniform_distribution,
)
from .dsl import (
    Boolean,
    Categorical,
    Diagnostic,
    EgoRole,
    IntRange,
    ParamDomain,
    RealRange,
    ScenarioSpec,
    SpecError,
    format_spec,
    load_spec,
    parse_spec,
)
