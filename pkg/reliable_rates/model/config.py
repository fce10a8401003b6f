from __future__ import annotations

from typing import TYPE_CHECKING, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

if TYPE_CHECKING:  # pragma: no cover - type checking only
    from ..config import Settings


class InverseGammaPrior(BaseModel):
    """IG(shape, scale) with density proportional to x^(-shape-1) exp(-scale / x).

    IG(1, 1/100) therefore has its mode at 1/200; the "1/100" is a scale, not
    a rate on the variance itself.
    """

    model_config = ConfigDict(frozen=True)

    shape: PositiveFloat
    scale: PositiveFloat


class ModelConfig(BaseModel):
    """Configuration of one binomial-logit CAR chain."""

    model_config = ConfigDict(frozen=True)

    total_iterations: PositiveInt = 100_000
    burn_in: int = Field(default=50_000, ge=0)
    thin: PositiveInt = 10
    seed: int = Field(default=2010, ge=0, lt=2**64)
    sigma2_prior: InverseGammaPrior = InverseGammaPrior(shape=1.0, scale=1 / 100)
    tau2_prior: InverseGammaPrior = InverseGammaPrior(shape=1.0, scale=1 / 7)
    restriction_bound: PositiveFloat | None = None
    baseline_m0: PositiveInt = 3
    proposal_sd_init: PositiveFloat = 0.5

    z_update: Literal["block", "sweep"] = "block"
    adapt_window: PositiveInt = 100
    max_rejections: PositiveInt = 1000
    stall_abort_rate: float = Field(default=0.5, gt=0.0, le=1.0)

    # Degenerate priors: hold a parameter at a fixed value instead of updating it.
    fixed_beta0: float | None = None
    fixed_sigma2: PositiveFloat | None = None
    fixed_tau2: PositiveFloat | None = None

    @model_validator(mode="after")
    def _check_schedule(self) -> ModelConfig:
        if self.burn_in >= self.total_iterations:
            raise ValueError("burn_in must be smaller than total_iterations")
        if self.retained_draws < 1:
            raise ValueError("no draws retained after burn-in and thinning")
        return self

    @property
    def retained_draws(self) -> int:
        return (self.total_iterations - self.burn_in) // self.thin

    @property
    def restricted(self) -> bool:
        return self.restriction_bound is not None

    @classmethod
    def from_settings(
        cls, settings: Settings, *, restricted: bool, **overrides: object
    ) -> ModelConfig:
        values: dict[str, object] = {
            "total_iterations": settings.iterations,
            "burn_in": settings.burn_in,
            "thin": settings.thin,
            "seed": settings.seed,
            "restriction_bound": settings.a0_max if restricted else None,
            "baseline_m0": settings.m0,
            "proposal_sd_init": settings.proposal_sd,
        }
        values.update(overrides)
        return cls.model_validate(values)
