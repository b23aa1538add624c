from .base import Decision, Router
from .carl import CarlParams, CarlRouter
from .epidemic import EpidemicRouter
from .prophet import ProphetParams, ProphetRouter
from .snw import SnwParams, SprayAndWaitRouter


def make_router(scenario, name: str | None = None) -> Router:
    """Fresh router instance for ``scenario`` (or ``name`` with its parameters)."""
    name = name or scenario.router
    if name == "epidemic":
        return EpidemicRouter(scenario.epidemic_acks)
    if name == "prophet":
        return ProphetRouter(scenario.prophet)
    if name == "snw":
        return SprayAndWaitRouter(scenario.snw)
    if name == "carl":
        return CarlRouter(scenario.carl)
    raise ValueError(f"unknown router {name!r}")


__all__ = ["CarlParams", "CarlRouter", "Decision", "EpidemicRouter", "ProphetParams",
           "ProphetRouter", "Router", "SnwParams", "SprayAndWaitRouter", "make_router"]
