"""Columnar CSV dumps of retained draws, one row per retained iteration."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataValidationError
from ..model.sampler import PosteriorDraws
from .counts import write_table

SCALAR_COLUMNS = ["draw", "beta0", "sigma2", "tau2", "a0_hat"]


def draws_frame(draws: PosteriorDraws) -> pd.DataFrame:
    columns: dict[str, np.ndarray] = {
        "draw": np.arange(draws.n_draws),
        "beta0": draws.beta0,
        "sigma2": draws.sigma2,
        "tau2": draws.tau2,
        "a0_hat": draws.a0_hat,
    }
    for j, region in enumerate(draws.region_ids):
        columns[f"pi[{region}]"] = draws.pi[:, j]
    for j, region in enumerate(draws.region_ids):
        columns[f"z[{region}]"] = draws.z[:, j]
    return pd.DataFrame(columns)


def write_draws(draws: PosteriorDraws, path: str | Path) -> None:
    write_table(draws_frame(draws), path)


def read_draws(path: str | Path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"draw": np.int64})
    missing = [c for c in SCALAR_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError(f"{path}: not a draws dump, missing {missing}")
    return frame
