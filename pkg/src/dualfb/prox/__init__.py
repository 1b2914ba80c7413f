"""Closed-form proximity operators, projectors and conjugates."""

from .functions import (
    DistSq,
    Indicator,
    PhiOfDist,
    ProxFunction,
    Quadratic,
    ScalarLift,
    SeparableBasis,
    SqMinusDist,
    SumQuadratics,
    Support,
    SupportPlusPhiNorm,
    TightFrameComposite,
    Zero,
    conj_envelope_value,
    moreau_envelope_value,
    prox_conjugate,
    prox_vector,
)
from .scalar import (
    Huber,
    LogBarrier,
    NegLog,
    PlusIndicatorInterval,
    PlusSupportInterval,
    Power,
    ScalarFun,
    ZeroFun,
    scalar_prox,
    soft_interval,
)
from .sets import (
    Affine,
    Box,
    ConvexSet,
    Halfspace,
    Interval,
    L1Ball,
    L2Ball,
    LinfBall,
    NonnegOrthant,
    PairBall,
    ScaledSet,
    Singleton,
    Subspace,
    WholeSpace,
    project,
    project_l1_ball,
)
