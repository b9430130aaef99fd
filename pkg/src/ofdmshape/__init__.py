"""OFDM spectral shaping under conventional and symmetric pulses."""

from .core import (
    CarrierSets,
    PowerAllocation,
    PrecoderSpec,
    Pulse,
    PulseBank,
    PulseKind,
    SystemConfig,
    Window,
    WindowShape,
    conventional_pulse,
    hermitian_pulse,
    make_window,
    spectrum_at,
)
from .exceptions import (
    ConfigError,
    GridMismatchError,
    IllConditionedError,
    InfeasibleConstraintError,
)
from .spectrum import (
    FrequencyGrid,
    PsdCurve,
    SpectralMask,
    analytic_psd,
    band_mask,
    masked_power,
    peak_relative_diff,
    welch_psd,
)
from .shapers import (
    NotchSet,
    RealnessCertificate,
    ShaperSolution,
    baseline_solution,
    framework_objective,
    solution_from_text,
    solution_to_text,
    solve_aic,
    solve_aic_ast,
    solve_ast,
    solve_nullspace_precoder,
    solve_orthogonal_precoder,
    solve_weighted_precoder,
    transform_solution,
)
from .synth import (
    LoopbackResult,
    SymbolStream,
    Waveform,
    circular_shift_amount,
    loopback_receive,
    random_symbols,
    synthesize,
    synthesize_fast_hermitian,
)
from .complexity import (
    ComplexityReport,
    ProductCounter,
    measured_count,
    symbolic_count,
)

__version__ = "0.1.0"
