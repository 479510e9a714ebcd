"""File-loadable pipeline configuration.

Format: one ``key = value`` per line, ``#`` starts a comment, lists are
comma-separated. Keys are dotted with the stage name, e.g.::

    preprocess.tophat_radius = 8
    filter.rho_list = 0,2,4,6,8
    postprocess.min_cluster = 11

Unknown keys are errors (they catch typos in tuning sweeps); missing keys
take the documented defaults. Grid files for parameter sweeps use the
same syntax where the value lists the alternatives for the key
(``|``-separated for keys whose value is itself a list).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .bcosfire import CENTER_OFF, CENTER_ON, BCosfireConfig
from .preprocess import PreprocessConfig


class ConfigError(ValueError):
    """Malformed configuration or grid file."""


@dataclass(frozen=True)
class PostprocessConfig:
    min_cluster: int = 11
    otsu_bins: int = 256
    connectivity: int = 8

    def __post_init__(self):
        if self.min_cluster < 0:
            raise ValueError("postprocess.min_cluster must be >= 0")
        if self.otsu_bins < 2:
            raise ValueError("postprocess.otsu_bins must be >= 2")
        if self.connectivity not in (4, 8):
            raise ValueError("postprocess.connectivity must be 4 or 8")


@dataclass(frozen=True)
class EvaluationConfig:
    gt_observer: int = 1
    auc_thresholds: int = 256

    def __post_init__(self):
        if self.gt_observer not in (1, 2):
            raise ValueError("evaluation.gt_observer must be 1 or 2")
        if self.auc_thresholds < 1:
            raise ValueError("evaluation.auc_thresholds must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    filter: BCosfireConfig = field(default_factory=BCosfireConfig)
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_float_list(text: str) -> tuple:
    items = [part.strip() for part in text.split(",")]
    if not any(items):
        raise ValueError("expected a nonempty comma-separated list")
    return tuple(_parse_float(part) for part in items if part)


def _parse_polarity(text: str) -> str:
    if text in (CENTER_ON, CENTER_OFF):
        return text
    raise ValueError(f"expected {CENTER_ON!r} or {CENTER_OFF!r}, got {text!r}")


def _show(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (section attribute, field name, parser, is_list)
_REGISTRY = {
    "preprocess.tophat_radius": ("preprocess", "tophat_radius", _parse_int, False),
    "preprocess.pad_width": ("preprocess", "pad_width", _parse_int, False),
    "preprocess.clahe_tiles_x": ("preprocess", "clahe_tiles_x", _parse_int, False),
    "preprocess.clahe_tiles_y": ("preprocess", "clahe_tiles_y", _parse_int, False),
    "preprocess.clahe_clip": ("preprocess", "clahe_clip", _parse_float, False),
    "preprocess.clahe_bins": ("preprocess", "clahe_bins", _parse_int, False),
    "preprocess.tophat_enabled": ("preprocess", "tophat_enabled", _parse_bool, False),
    "filter.sigma": ("filter", "sigma", _parse_float, False),
    "filter.rho_list": ("filter", "rho_list", _parse_float_list, True),
    "filter.sigma0": ("filter", "sigma0", _parse_float, False),
    "filter.alpha": ("filter", "alpha", _parse_float, False),
    "filter.t": ("filter", "t", _parse_float, False),
    "filter.n_orientations": ("filter", "n_orientations", _parse_int, False),
    "filter.weight_exponent": ("filter", "weight_exponent", _parse_int, False),
    "filter.dog_polarity": ("filter", "dog_polarity", _parse_polarity, False),
    "filter.dog_kernel_radius_factor": ("filter", "dog_kernel_radius_factor", _parse_float, False),
    "postprocess.min_cluster": ("postprocess", "min_cluster", _parse_int, False),
    "postprocess.otsu_bins": ("postprocess", "otsu_bins", _parse_int, False),
    "postprocess.connectivity": ("postprocess", "connectivity", _parse_int, False),
    "evaluation.gt_observer": ("evaluation", "gt_observer", _parse_int, False),
    "evaluation.auc_thresholds": ("evaluation", "auc_thresholds", _parse_int, False),
}


def default_config() -> PipelineConfig:
    return PipelineConfig()


def _strip_line(raw: str) -> str:
    return raw.split("#", 1)[0].strip()


def _scan_pairs(text: str, source: str):
    """Yield (line_number, key, raw_value) for every assignment line."""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_line(raw)
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _REGISTRY:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{line_no}: missing value for {key!r}")
        yield line_no, key, value


def _build(overrides: dict, source: str) -> PipelineConfig:
    sections: dict[str, dict] = {}
    for key, value in overrides.items():
        section, attr, _, _ = _REGISTRY[key]
        sections.setdefault(section, {})[attr] = value
    try:
        return PipelineConfig(
            preprocess=PreprocessConfig(**sections.get("preprocess", {})),
            filter=BCosfireConfig(**sections.get("filter", {})),
            postprocess=PostprocessConfig(**sections.get("postprocess", {})),
            evaluation=EvaluationConfig(**sections.get("evaluation", {})),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> PipelineConfig:
    overrides: dict = {}
    for line_no, key, value in _scan_pairs(text, source):
        if key in overrides:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        parser = _REGISTRY[key][2]
        try:
            overrides[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{line_no}: {exc}") from exc
    return _build(overrides, source)


def parse_config(path) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def serialize_config(cfg: PipelineConfig) -> str:
    """Emit every key; parse_config_text(serialize_config(c)) == c."""
    lines = []
    for key, (section, attr, _, _) in _REGISTRY.items():
        lines.append(f"{key} = {_show(getattr(getattr(cfg, section), attr))}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: PipelineConfig, overrides: dict, source: str = "<override>") -> PipelineConfig:
    """Return a config with the given parsed key values substituted."""
    sections: dict[str, dict] = {}
    for key, value in overrides.items():
        if key not in _REGISTRY:
            raise ConfigError(f"{source}: unknown key {key!r}")
        section, attr, _, _ = _REGISTRY[key]
        sections.setdefault(section, {})[attr] = value
    out = cfg
    try:
        for section, attrs in sections.items():
            out = replace(out, **{section: replace(getattr(out, section), **attrs)})
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return out


def parse_grid_text(text: str, source: str = "<grid>") -> list:
    """Parse a sweep grid: each line lists the alternative values of a key.

    Scalar keys: ``filter.t = 0, 0.1, 0.2``. List-valued keys separate
    alternatives with ``|``: ``filter.rho_list = 0,2,4 | 0,2,4,6,8``.
    Returns [(key, [parsed values...]), ...] in file order.
    """
    grid: list = []
    seen: set = set()
    for line_no, key, value in _scan_pairs(text, source):
        if key in seen:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        seen.add(key)
        _, _, parser, is_list = _REGISTRY[key]
        alternatives = value.split("|") if is_list else value.split(",")
        parsed = []
        for alt in alternatives:
            alt = alt.strip()
            if not alt:
                raise ConfigError(f"{source}:{line_no}: empty alternative for {key!r}")
            try:
                parsed.append(parser(alt))
            except ValueError as exc:
                raise ConfigError(f"{source}:{line_no}: {exc}") from exc
        grid.append((key, parsed))
    return grid


def parse_grid(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read grid {path}: {exc}") from exc
    return parse_grid_text(text, source=str(path))


def grid_combinations(grid: list) -> list:
    """Cross-product of the grid as a list of {key: value} dicts."""
    if not grid:
        return [{}]
    keys = [key for key, _ in grid]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(vals for _, vals in grid))]


def grid_size(grid: list) -> int:
    size = 1
    for _, vals in grid:
        size *= len(vals)
    return size
