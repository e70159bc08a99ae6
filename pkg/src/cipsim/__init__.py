"""Artificial-wrestling simulator: two cart-mounted inverted pendula coupled
tip to tip by a viscoelastic rod, each stabilized by a deadband PD controller
and optionally armed with an impulse-firing intelligent controller driven by
an offline-learned reachable-set classifier table.
"""

from .control import (
    CompositeController,
    DisturbanceImpulse,
    ImpulseGenerator,
    MeasurementMap,
    PdController,
    TableController,
    measure,
    mirror_set,
    mirror_transform,
    reconstruct,
)
from .dynamics import (
    Outcome,
    SimResult,
    equilibrium_index,
    mirror_index,
    simulate,
    trivial_state,
    win_loss,
)
from .engine import AgentIC, TrialResult, run
from .errors import (
    CipError,
    ConstraintInfeasibleError,
    DegenerateRodError,
    DigestMismatchError,
    NonFiniteStateError,
    TableFormatError,
    TruncatedTableError,
)
from .experiments import (
    SweepConfig,
    SweepResult,
    TrialRecord,
    competition_run,
    delay_scan,
    export_results,
    impulse_response_sweep,
)
from .learning import (
    ClassifierTable,
    GridSpec,
    ReachableSetClassifier,
    learn_table,
    load_table,
    quantized_classify,
    reachable_slice,
    save_table,
)
from .params import (
    CipParams,
    FloorParams,
    ImpulseParams,
    PendulumParams,
    RodParams,
    SimulationSettings,
    StandingControlParams,
)

__version__ = "1.0.0"
