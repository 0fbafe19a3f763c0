"""User pixelization: stance picks the color, influence sets the brightness."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .graph import Stance, UserNode

RED = (255, 0, 0)
GREEN = (0, 255, 0)
BLUE = (0, 0, 255)

_STANCE_RGB = {
    Stance.POSITIVE: RED,
    Stance.NEGATIVE: GREEN,
    Stance.NEUTRAL: BLUE,
}

# attenuation presets for the two platform styles
PSI_WEIBO = 0.62
PSI_TWITTER = 0.68


@dataclass(frozen=True)
class PixelizerConfig:
    fans_threshold: int = 1000
    psi: float = PSI_WEIBO

    def __post_init__(self):
        if self.fans_threshold < 1:
            raise ValueError("fans_threshold must be >= 1")
        if not 0.0 <= self.psi <= 1.0:
            raise ValueError("psi must lie in [0, 1]")


@dataclass(frozen=True)
class UserPixel:
    rgb: tuple
    brightness: float


def stance_to_rgb(stance: Stance) -> tuple:
    return _STANCE_RGB[Stance(stance)]


def influence_to_brightness(offic_lev: int, fans: int, config: PixelizerConfig = PixelizerConfig()) -> float:
    """Official level plus the attenuated fans level (fans / threshold, real-valued)."""
    if offic_lev < 0 or fans < 0:
        raise ValueError("offic_lev and fans must be non-negative")
    return offic_lev + config.psi * (fans / config.fans_threshold)


def pixelize_user(node: UserNode, config: PixelizerConfig = PixelizerConfig()) -> UserPixel:
    return UserPixel(stance_to_rgb(node.stance), influence_to_brightness(node.offic_lev, node.fans, config))


def pixelize_all(nodes: Iterable[UserNode], config: PixelizerConfig = PixelizerConfig()) -> dict:
    """id -> UserPixel, preserving input order."""
    return {n.id: pixelize_user(n, config) for n in nodes}
