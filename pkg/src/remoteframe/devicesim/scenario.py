"""Scenario scripts: a screen size, a seed, ordered generator steps and
optional piecewise-linear sensor tables, loadable from a plain text file.

File format, one directive per line (# starts a comment):

    screen = 480x800
    seed = 7
    tap_skip = off
    step home 1000 icons=20
    step transition 300
    step browser_scroll 3000 velocity=160
    sensor gps 0 41.3851 2.1734
    sensor gps 10000 41.3860 2.1720

Transition steps crossfade between their neighbours and are wired up by the
loader; they cannot open or close a script.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ScenarioFormatError, TimeRegressionError, UnknownGeneratorError
from ..pixels import CANONICAL_FORMAT, FrameBuffer
from .generators import GENERATORS


@dataclass(frozen=True)
class ScenarioStep:
    generator: str
    duration_ms: int
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioScript:
    width: int = 480
    height: int = 800
    seed: int = 0
    tap_skip: bool = False
    steps: tuple[ScenarioStep, ...] = ()
    sensors: dict = field(default_factory=dict)  # kind -> [(t_ms, (values...)), ...]

    @property
    def total_duration_ms(self) -> int:
        return sum(s.duration_ms for s in self.steps)

    def validate(self) -> None:
        if not self.steps:
            raise ScenarioFormatError("scenario has no steps")
        if self.total_duration_ms <= 0:
            raise ScenarioFormatError("total duration must be positive")
        for i, step in enumerate(self.steps):
            if step.generator not in GENERATORS:
                raise UnknownGeneratorError(f"no generator named {step.generator!r}")
            if step.duration_ms <= 0:
                raise ScenarioFormatError(f"step {i} has non-positive duration")
            if step.generator == "transition" and (i == 0 or i == len(self.steps) - 1):
                raise ScenarioFormatError("transition steps need a neighbour on both sides")


def _parse_value(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def parse_scenario(text: str) -> ScenarioScript:
    width, height, seed, tap_skip = 480, 800, 0, False
    steps: list[ScenarioStep] = []
    sensors: dict[str, list] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and not line.startswith(("step ", "sensor ")):
            key, _, value = (p.strip() for p in line.partition("="))
            if key == "screen":
                try:
                    w, _, h = value.partition("x")
                    width, height = int(w), int(h)
                except ValueError:
                    raise ScenarioFormatError(f"line {lineno}: bad screen size {value!r}") from None
            elif key == "seed":
                seed = int(value)
            elif key == "tap_skip":
                tap_skip = value.lower() in ("on", "true", "1", "yes")
            else:
                raise ScenarioFormatError(f"line {lineno}: unknown setting {key!r}")
            continue
        fields = line.split()
        if fields[0] == "step":
            if len(fields) < 3:
                raise ScenarioFormatError(f"line {lineno}: step needs generator and duration")
            params = {}
            for assignment in fields[3:]:
                if "=" not in assignment:
                    raise ScenarioFormatError(f"line {lineno}: bad step parameter {assignment!r}")
                k, _, v = assignment.partition("=")
                params[k] = _parse_value(v)
            steps.append(ScenarioStep(fields[1], int(fields[2]), params))
        elif fields[0] == "sensor":
            if len(fields) < 4:
                raise ScenarioFormatError(f"line {lineno}: sensor needs kind, time and values")
            kind = fields[1]
            sensors.setdefault(kind, []).append(
                (int(fields[2]), tuple(float(v) for v in fields[3:]))
            )
        else:
            raise ScenarioFormatError(f"line {lineno}: unrecognized directive {fields[0]!r}")
    for table in sensors.values():
        table.sort(key=lambda row: row[0])
    script = ScenarioScript(width, height, seed, tap_skip, tuple(steps), sensors)
    script.validate()
    return script


def load_scenario(path: str | Path) -> ScenarioScript:
    return parse_scenario(Path(path).read_text())


def benchmark_workload(seed: int = 7, width: int = 480, height: int = 800) -> ScenarioScript:
    """The ~10 s benchmark workload: home, browser, music player, home again,
    with 0.3 s crossfades between activities."""
    steps = (
        ScenarioStep("home", 1000),
        ScenarioStep("transition", 300),
        ScenarioStep("browser_scroll", 3000),
        ScenarioStep("transition", 300),
        ScenarioStep("music_player", 3000),
        ScenarioStep("transition", 300),
        ScenarioStep("home", 2100),
    )
    script = ScenarioScript(width, height, seed, False, steps)
    script.validate()
    return script


class ScenarioPlayer:
    """Deterministic playback: same script and seed give byte-identical
    frames at every queried time.  Past the end, the last frame freezes."""

    def __init__(self, script: ScenarioScript):
        script.validate()
        self.script = script
        self._offsets: list[int] = []
        total = 0
        for step in script.steps:
            self._offsets.append(total)
            total += step.duration_ms
        self.total_duration_ms = total
        self._params = [self._resolve_params(i) for i in range(len(script.steps))]
        self._last_time = -1
        self._time_shift = 0

    def _base_params(self, index: int) -> dict:
        step = self.script.steps[index]
        return {**step.params, "width": self.script.width, "height": self.script.height}

    def _resolve_params(self, index: int) -> dict:
        step = self.script.steps[index]
        params = self._base_params(index)
        if step.generator == "transition":
            prev_step = self.script.steps[index - 1]
            next_step = self.script.steps[index + 1]
            params["duration_ms"] = step.duration_ms
            params["from"] = (
                prev_step.generator,
                self._base_params(index - 1),
                prev_step.duration_ms - 1,
            )
            params["to"] = (next_step.generator, self._base_params(index + 1), 0)
        return params

    def frame_at(self, t_ms: int) -> np.ndarray:
        """Pixel grid at scenario time t (clamped into the script's span)."""
        t = max(0, min(int(t_ms), self.total_duration_ms - 1))
        index = 0
        for i, offset in enumerate(self._offsets):
            if t >= offset:
                index = i
        step = self.script.steps[index]
        local = t - self._offsets[index]
        return GENERATORS[step.generator](self._params[index], self.script.seed, local)

    def advance(self, now_ms: int) -> FrameBuffer:
        """Snapshot for a monotonically advancing clock."""
        if now_ms < self._last_time:
            raise TimeRegressionError(f"time went backwards: {now_ms} < {self._last_time}")
        self._last_time = now_ms
        grid = self.frame_at(now_ms + self._time_shift)
        return FrameBuffer(self.script.width, self.script.height, CANONICAL_FORMAT, grid)

    def skip_step(self) -> None:
        """Jump the remainder of the current step (tap-to-skip contract)."""
        t = self._last_time + self._time_shift
        if t >= self.total_duration_ms:
            return
        index = 0
        for i, offset in enumerate(self._offsets):
            if t >= offset:
                index = i
        step_end = self._offsets[index] + self.script.steps[index].duration_ms
        self._time_shift += step_end - t


def load_player(script: ScenarioScript) -> ScenarioPlayer:
    return ScenarioPlayer(script)
