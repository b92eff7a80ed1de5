"""INI run configuration: case geometry, stresses, loads, training, outputs.

The schema is flat key=value under fixed sections ([case], [airy], [loads],
[train], [outputs], [reference]).  Unknown sections or keys are rejected so a
typo cannot silently fall back to a default.  ``save_config`` writes a
canonical form (fixed key order, repr floats), which makes
parse -> serialize -> parse idempotent.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .geometry import BoundaryProfile, DomainSpec, FourierProfile
from .stress import AiryField, LoadModel, PointLoad
from .trainer import Problem, TrainConfig

__all__ = [
    "ConfigError",
    "OutputConfig",
    "ReferenceConfig",
    "RunConfig",
    "load_config",
    "save_config",
]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/out"
    formats: tuple[str, ...] = ("csv",)
    grid: tuple[int, int] = (65, 65)

    def resolved_directory(self) -> Path:
        root = os.environ.get("MEMFORM_OUTPUT_ROOT")
        path = Path(self.directory)
        if root and not path.is_absolute():
            return Path(root) / path
        return path


@dataclass(frozen=True)
class ReferenceConfig:
    kind: str = "none"  # 'none' | 'fd' | 'manufactured'
    nx: int = 129
    ny: int = 81
    choice: str = ""


@dataclass(frozen=True)
class RunConfig:
    problem: Problem
    train: TrainConfig
    outputs: OutputConfig = field(default_factory=OutputConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)


_CASE_KEYS = {
    "name",
    "domain",
    "l",
    "b",
    "r",
    "r_in",
    "r_out",
    "h_arch",
    "outer_a0",
    "outer_a",
    "outer_b",
    "inner_a0",
    "inner_a",
    "inner_b",
}
_AIRY_KEYS = {"l1", "l2", "l3", "sign"}
_LOADS_KEYS = {"rho", "t", "alpha_h", "theta_h", "theta_h_deg", "point_loads", "ref"}
_TRAIN_KEYS = {f.name for f in dc_fields(TrainConfig)}
_OUTPUT_KEYS = {"directory", "formats", "grid"}
_REFERENCE_KEYS = {"kind", "nx", "ny", "choice"}
_SCHEMA = {
    "case": _CASE_KEYS,
    "airy": _AIRY_KEYS,
    "loads": _LOADS_KEYS,
    "train": _TRAIN_KEYS,
    "outputs": _OUTPUT_KEYS,
    "reference": _REFERENCE_KEYS,
}


def _check_schema(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    for required in ("case", "airy", "train"):
        if required not in parser:
            raise ConfigError(f"missing required section [{required}]")


def _float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _parse_domain(sec) -> DomainSpec:
    kind = sec.get("domain", "").strip()
    try:
        if kind == "rectangle":
            return DomainSpec.rectangle(sec.getfloat("l"), sec.getfloat("b"))
        if kind == "disk":
            return DomainSpec.disk(sec.getfloat("r"))
        if kind == "annulus":
            return DomainSpec.annulus(sec.getfloat("r_in"), sec.getfloat("r_out"))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad [case] geometry: {err}") from err
    raise ConfigError(f"domain must be rectangle, disk, or annulus (got {kind!r})")


def _parse_fourier(sec, prefix: str) -> FourierProfile:
    a0 = sec.getfloat(f"{prefix}_a0", fallback=None)
    if a0 is None:
        raise ConfigError(f"[case] {prefix}_a0 is required for this domain")
    return FourierProfile(
        a0,
        _float_list(sec.get(f"{prefix}_a", fallback="")),
        _float_list(sec.get(f"{prefix}_b", fallback="")),
    )


def _parse_profile(sec, domain: DomainSpec) -> BoundaryProfile:
    if domain.kind == "rectangle":
        h = sec.getfloat("h_arch", fallback=None)
        if h is None:
            raise ConfigError("[case] h_arch is required for rectangles")
        return BoundaryProfile.rect_arch(h)
    if domain.kind == "disk":
        return BoundaryProfile.disk_fourier(_parse_fourier(sec, "outer"))
    return BoundaryProfile.annulus_fourier(
        _parse_fourier(sec, "outer"), _parse_fourier(sec, "inner")
    )


def _parse_airy(sec) -> AiryField:
    try:
        return AiryField(
            sec.getfloat("l1"), sec.getfloat("l2"), sec.getfloat("l3"), sec.get("sign")
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad [airy] section: {err}") from err


def _parse_point_loads(text: str) -> tuple[PointLoad, ...]:
    loads = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        vals = _float_list(part)
        if len(vals) != 4:
            raise ConfigError(
                "each point load needs 'x1 x2 P sigma' (semicolon-separated)"
            )
        loads.append(PointLoad(vals[2], (vals[0], vals[1]), vals[3]))
    return tuple(loads)


def _parse_loads(parser) -> LoadModel:
    if "loads" not in parser:
        return LoadModel()
    sec = parser["loads"]
    if "theta_h" in sec and "theta_h_deg" in sec:
        raise ConfigError("[loads] give theta_h (radians) or theta_h_deg, not both")
    try:
        ref = _float_list(sec.get("ref", fallback="0 0"))
        if len(ref) != 2:
            raise ConfigError("[loads] ref needs exactly two numbers")
        if "theta_h_deg" in sec:
            theta = float(np.deg2rad(sec.getfloat("theta_h_deg")))
        else:
            theta = sec.getfloat("theta_h", fallback=0.0)
        return LoadModel(
            rho=sec.getfloat("rho", fallback=0.0),
            t=sec.getfloat("t", fallback=0.1),
            point_loads=_parse_point_loads(sec.get("point_loads", fallback="")),
            alpha_h=sec.getfloat("alpha_h", fallback=0.0),
            theta_h=theta,
            ref=(ref[0], ref[1]),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad [loads] section: {err}") from err


def _parse_train(sec) -> TrainConfig:
    kwargs = {}
    for f in dc_fields(TrainConfig):
        if f.name not in sec:
            continue
        raw = sec.get(f.name)
        if f.name == "formulation":
            kwargs[f.name] = raw.strip()
        elif f.name == "k_resample":
            kwargs[f.name] = float(raw)  # 'inf' disables resampling
        elif f.type in ("int", int):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    if "formulation" not in kwargs:
        raise ConfigError("[train] formulation is required")
    try:
        config = TrainConfig(**kwargs)
        config.validate()
    except ValueError as err:
        raise ConfigError(f"bad [train] section: {err}") from err
    return config


def _parse_outputs(parser) -> OutputConfig:
    if "outputs" not in parser:
        return OutputConfig()
    sec = parser["outputs"]
    formats = tuple(
        tok.strip() for tok in sec.get("formats", fallback="csv").split(",") if tok.strip()
    )
    for fmt in formats:
        if fmt not in ("csv", "obj"):
            raise ConfigError(f"unsupported export format {fmt!r}")
    grid_text = sec.get("grid", fallback="65x65")
    try:
        nx, ny = (int(tok) for tok in grid_text.lower().split("x"))
    except ValueError as err:
        raise ConfigError(f"[outputs] grid must look like '129x81': {err}") from err
    return OutputConfig(sec.get("directory", fallback="runs/out"), formats, (nx, ny))


def _parse_reference(parser) -> ReferenceConfig:
    if "reference" not in parser:
        return ReferenceConfig()
    sec = parser["reference"]
    kind = sec.get("kind", fallback="none").strip()
    if kind not in ("none", "fd", "manufactured"):
        raise ConfigError(f"[reference] kind must be none, fd, or manufactured (got {kind!r})")
    return ReferenceConfig(
        kind,
        sec.getint("nx", fallback=129),
        sec.getint("ny", fallback=81),
        sec.get("choice", fallback="").strip(),
    )


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    _check_schema(parser)
    case = parser["case"]
    domain = _parse_domain(case)
    profile = _parse_profile(case, domain)
    problem = Problem(
        domain,
        _parse_airy(parser["airy"]),
        _parse_loads(parser),
        profile,
        name=case.get("name", fallback="case").strip(),
    )
    return RunConfig(
        problem,
        _parse_train(parser["train"]),
        _parse_outputs(parser),
        _parse_reference(parser),
    )


def _r(value) -> str:
    # repr of a builtin float round-trips bit-exactly; np scalars would not parse
    return repr(float(value))


def _fmt_floats(values) -> str:
    return " ".join(_r(v) for v in values)


def save_config(config: RunConfig, path) -> None:
    """Serialize in canonical key order (the exact form load_config reads back)."""
    problem, train = config.problem, config.train
    domain, profile, loads = problem.domain, problem.profile, problem.loads
    lines = ["[case]", f"name = {problem.name}", f"domain = {domain.kind}"]
    if domain.kind == "rectangle":
        lines += [f"l = {_r(domain.l)}", f"b = {_r(domain.b)}", f"h_arch = {_r(profile.h_arch)}"]
    else:
        if domain.kind == "disk":
            lines.append(f"r = {_r(domain.R)}")
        else:
            lines += [f"r_in = {_r(domain.R_in)}", f"r_out = {_r(domain.R_out)}"]
        lines += [
            f"outer_a0 = {_r(profile.fourier.a0)}",
            f"outer_a = {_fmt_floats(profile.fourier.a)}",
            f"outer_b = {_fmt_floats(profile.fourier.b)}",
        ]
        if domain.kind == "annulus":
            lines += [
                f"inner_a0 = {_r(profile.fourier_inner.a0)}",
                f"inner_a = {_fmt_floats(profile.fourier_inner.a)}",
                f"inner_b = {_fmt_floats(profile.fourier_inner.b)}",
            ]
    airy = problem.airy
    lines += [
        "",
        "[airy]",
        f"l1 = {_r(airy.l1)}",
        f"l2 = {_r(airy.l2)}",
        f"l3 = {_r(airy.l3)}",
        f"sign = {airy.sign}",
    ]
    point_loads = "; ".join(
        f"{_r(pl.center[0])} {_r(pl.center[1])} {_r(pl.P)} {_r(pl.sigma)}"
        for pl in loads.point_loads
    )
    lines += [
        "",
        "[loads]",
        f"rho = {_r(loads.rho)}",
        f"t = {_r(loads.t)}",
        f"alpha_h = {_r(loads.alpha_h)}",
        f"theta_h = {_r(loads.theta_h)}",  # radians, bit-exact round-trip
        f"point_loads = {point_loads}",
        f"ref = {_fmt_floats(loads.ref)}",
    ]
    lines += ["", "[train]"]
    for f in dc_fields(TrainConfig):
        value = getattr(train, f.name)
        if f.type == "str":
            text = value
        elif f.type == "int":
            text = repr(int(value))
        else:
            text = _r(value)
        lines.append(f"{f.name} = {text}")
    out = config.outputs
    lines += [
        "",
        "[outputs]",
        f"directory = {out.directory}",
        f"formats = {','.join(out.formats)}",
        f"grid = {out.grid[0]}x{out.grid[1]}",
    ]
    ref = config.reference
    lines += [
        "",
        "[reference]",
        f"kind = {ref.kind}",
        f"nx = {ref.nx}",
        f"ny = {ref.ny}",
        f"choice = {ref.choice}",
    ]
    text = "\n".join(lines) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
