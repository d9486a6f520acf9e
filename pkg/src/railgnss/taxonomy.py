"""Railway environment taxonomy: ten primary classes and three mixed ones."""

from __future__ import annotations

import enum


class EnvironmentClass(enum.IntEnum):
    """Environment surrounding the track at one epoch.

    Integer values are stable serialization codes.
    """

    Trees = 0
    Buildings = 1
    OpenSkyUrban = 2
    OpenSkyRural = 3
    Bridge = 4
    PostBridge = 5
    Station = 6
    Triage = 7
    Tunnel = 8
    PostTunnel = 9
    MixedTreesOpenSky = 10
    MixedTreesBuildings = 11
    MixedBuildingsOpenSky = 12

    @property
    def is_clear(self) -> bool:
        """True for the primary (homogeneous on both sides) classes."""
        return self.value < 10

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def parse(cls, token: str) -> EnvironmentClass:
        """Accept either the canonical identifier or the long display name."""
        token = token.strip()
        if token in cls.__members__:
            return cls[token]
        try:
            return _BY_DISPLAY[token]
        except KeyError:
            raise ValueError(f"unknown environment class {token!r}") from None


_DISPLAY = {
    EnvironmentClass.Trees: "Trees",
    EnvironmentClass.Buildings: "Buildings",
    EnvironmentClass.OpenSkyUrban: "Open-sky (urban)",
    EnvironmentClass.OpenSkyRural: "Open-sky (rural)",
    EnvironmentClass.Bridge: "Bridge",
    EnvironmentClass.PostBridge: "Post-bridge",
    EnvironmentClass.Station: "Station",
    EnvironmentClass.Triage: "Triage",
    EnvironmentClass.Tunnel: "Tunnel",
    EnvironmentClass.PostTunnel: "Post-tunnel",
    EnvironmentClass.MixedTreesOpenSky: "Mixed trees and open-sky",
    EnvironmentClass.MixedTreesBuildings: "Mixed trees and buildings",
    EnvironmentClass.MixedBuildingsOpenSky: "Mixed buildings and open-sky",
}
_BY_DISPLAY = {v: k for k, v in _DISPLAY.items()}

CLEAR_CLASSES = tuple(c for c in EnvironmentClass if c.is_clear)
MIXED_CLASSES = tuple(c for c in EnvironmentClass if not c.is_clear)
