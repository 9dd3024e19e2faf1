"""Monte Carlo campaigns, metrics, result files and the command line."""

from .campaign import (
    WORKERS_ENV,
    CampaignResult,
    CampaignSpec,
    FilterSummary,
    RunRecord,
    StepAggregate,
    StepRecord,
    aggregate,
    default_workers,
    execute,
    filter_stream_id,
    run_campaign,
    run_single,
)
from .cli import build_parser, main
from .io import (
    RUN_FIELDS,
    SCHEMA_VERSION,
    SELECTION_FIELDS,
    STEP_FIELDS,
    emit_results,
    load_results,
    results_dict,
    step_fields,
    summary_dict,
)
