from .adaptive import (
    Amplified,
    Capped,
    Chain,
    TrivAlg,
    build_linear_strategy,
    build_poly_strategy,
    poly_claim_failures,
    poly_delta,
    poly_plan,
    trivalg2,
)
from .base import (
    AdaptiveContext,
    FillerStrategy,
    ObliviousContext,
    OscillatingFiller,
    RandomFiller,
    Repeat,
    ScriptedFiller,
    UniformFill,
    anchored,
)
from .oblivious import (
    DeskParams,
    FlatAlg,
    ObliviousAmplified,
    ObliviousBase,
    ObliviousChain,
    RandAlg,
    Rep,
    build_oblivious_poly,
    flatness_bound,
    harmonic_gain,
    oblivious_amplify,
    oblivious_claim_failures,
    oblivious_delta,
    asymptotic_parameters,
)
