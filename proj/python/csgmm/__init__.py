"""Compressed sparse GMM channel and DoA estimation."""

from ._csgmm import (  # noqa: F401
    Dataset,
    Estimator,
    FormatError,
    Model,
    __version__,
    dictionary,
    dml_index,
    estimate_op_count,
    genie_lmmse,
    grid_sines,
    nmse,
    parameter_counts,
    pas_covariance,
    read_dataset,
    rmse_deg,
    sample_lmmse,
    sbl,
    simulate,
    steering,
    train,
    write_dataset,
)
