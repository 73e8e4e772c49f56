"""Short-term real-time electricity price forecasting.

Hourly real-time prices are forecast either directly (seasonal ARIMA on
the price level) or through the day-ahead/real-time differential (ARMA on
``dalmp - rtlmp``, reconstructed against the published day-ahead price).
Both routes support spike clipping, a shifted log transform, exogenous
regressors, and a GARCH layer on the innovation variance. Evaluation is
rolling-origin, scored by per-horizon improvement over the day-ahead
price used as the forecast.
"""

from .arima import (
    DEFAULT_ORIGIN,
    ExogenousMatrix,
    ForecastResult,
    ModelSpec,
    ParameterVector,
    ar_polynomial,
    burn_in,
    check_conforms,
    forecast,
    log_likelihood,
    ma_polynomial,
    profiled_log_likelihood,
    residuals,
    simulate,
)
from .backtest import (
    BacktestReport,
    ComparisonTable,
    PipelineConfig,
    compare_models,
    fit_pipeline,
    improvement_index,
    mae,
    pipeline_forecast,
    restore_pipeline_fit,
    rolling_backtest,
)
from .dataio import (
    MarketDataset,
    SynthConfig,
    export_plot_data,
    load_lmp_csv,
    synth_market,
    write_lmp_csv,
)
from .errors import (
    AlignmentError,
    AllTermsExcluded,
    DegenerateSeries,
    EstimationFailed,
    GapError,
    InsufficientPresample,
    InvalidParameters,
    IoError,
    LmpcastError,
    MismatchedWindows,
    MissingExogenousFuture,
    NonPositiveArgument,
    ParseError,
    SchemaError,
    SeriesTooShort,
    UnstableParameters,
)
from .estimation import (
    BicTable,
    Diagnostics,
    FitOptions,
    FittedModel,
    bic,
    fit,
    fit_garch,
    grid_select,
    model_forecast,
)
from .garch import (
    GarchParams,
    GarchSpec,
    attach_garch,
    conditional_variances,
    forecast_variance,
    garch_log_likelihood,
)
from .lagpoly import (
    DifferenceSpec,
    LagPolynomial,
    StabilityResult,
    apply,
    difference_polynomial,
    integrate,
    is_stable,
    multiply,
)
from .series import (
    HOUR,
    UNITS_LOG,
    UNITS_NONE,
    UNITS_PRICE,
    ClipBounds,
    HourlySeries,
    LogOffset,
    clip_prices,
    concat,
    delta_lmp,
    format_hour,
    inverse_log_transform,
    log_transform,
    parse_hour,
    reconstruct_rtlmp,
    require_aligned,
    sample_acf,
    sample_pacf,
    weekend_indicator,
)

__version__ = "0.1.0"
