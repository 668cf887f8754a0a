"""Config-driven parameter sweeps and CSV output.

Configs are INI files; see ``configs/`` for annotated examples. Budgets that
should be unlimited are simply left out.
"""

from __future__ import annotations

import configparser
import csv
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import (
    REFERENCE_LEDS,
    REFERENCE_RECEIVER,
    DiffuseParams,
    Geometry,
    subcarrier_gains,
)
from .constellation import Constellation, from_name
from .ee_alloc import ee_maximize
from .errors import AcoError, ConfigError
from .params import SystemParams
from .quadrature import QuadratureSpec
from .rates import model_from_name, total_rate
from .se_alloc import se_optimize

SWEEP_VARS = {"P": "power_budget", "P_o": "optical_budget", "r": "rate_floor"}
OBJECTIVES = ("SE", "EE")
MODELS = ("gaussian", "finite", "lower")
CSV_HEADER = [
    "sweep_var",
    "sweep_value",
    "model",
    "objective",
    "value",
    "sum_power",
    "active_subcarriers",
    "dual",
    "iterations",
    "status",
]


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemParams = field(default_factory=SystemParams)
    geometries: Tuple[Geometry, ...] = ()
    diffuse: DiffuseParams = field(default_factory=DiffuseParams)
    constellation: Constellation = field(default_factory=lambda: from_name("qam4"))
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    sweep_var: str = "P"
    grid: Tuple[float, ...] = (20.0,)
    objective: str = "SE"
    models: Tuple[str, ...] = MODELS
    output_path: Optional[str] = None
    seed: int = 0
    lower_bound_display_offset: float = 0.0
    workers: int = 1
    waveform_frames: int = 100_000
    waveform_symbols: str = "gaussian"

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep variable must be one of {sorted(SWEEP_VARS)}, got {self.sweep_var!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be SE or EE, got {self.objective!r}")
        if not self.models:
            raise ConfigError("at least one model is required")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ConfigError(f"unknown models {bad}; choose from {MODELS}")
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if any(not math.isfinite(v) for v in self.grid) or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("sweep grid must be finite and strictly increasing")
        if not (self.lower_bound_display_offset >= 0):
            raise ConfigError("lower_bound_display_offset must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.geometries:
            object.__setattr__(self, "geometries", tuple(Geometry(led_position=led) for led in REFERENCE_LEDS))

    def channel(self):
        return subcarrier_gains(list(self.geometries), self.diffuse, self.system)


@dataclass
class SweepRecord:
    sweep_var: str
    sweep_value: float
    model: str
    objective: str
    value: Optional[float]
    sum_power: Optional[float]
    active_subcarriers: Optional[int]
    dual: Optional[float]
    iterations: Optional[int]
    status: str
    rate: Optional[float] = None
    se: Optional[float] = None
    ee: Optional[float] = None
    display_offset: float = 0.0
    message: str = ""
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "saturated")


# ---------------------------------------------------------------------------
# config parsing


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _vec(text: str) -> Tuple[float, float, float]:
    v = _floats(text)
    if len(v) != 3:
        raise ConfigError(f"expected x, y, z; got {text!r}")
    return tuple(v)


def _grid(sec) -> Tuple[float, ...]:
    if "values" in sec:
        return tuple(_floats(sec["values"]))
    try:
        start, stop, num = float(sec["start"]), float(sec["stop"]), int(sec["num"])
    except KeyError as exc:
        raise ConfigError("sweep needs either 'values' or 'start', 'stop' and 'num'") from exc
    spacing = sec.get("spacing", "linear")
    if spacing == "log":
        return tuple(np.logspace(math.log10(start), math.log10(stop), num).tolist())
    if spacing == "linear":
        return tuple(np.linspace(start, stop, num).tolist())
    raise ConfigError(f"spacing must be linear or log, got {spacing!r}")


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    try:
        return _from_parser(cp)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    s = sec("system")
    system = SystemParams(
        n=int(s.get("n", 64)),
        bandwidth=float(s.get("bandwidth", 1e6)),
        noise_psd=float(s.get("noise_psd", 1e-18)),
        power_budget=float(s.get("power_budget", 20.0)),
        optical_budget=float(s["optical_budget"]) if "optical_budget" in s else None,
        circuit_power=float(s.get("circuit_power", 0.2)),
        rate_floor=float(s.get("rate_floor", 0.0)),
    )

    c = sec("channel")
    receiver = _vec(c["receiver"]) if "receiver" in c else REFERENCE_RECEIVER
    leds = [_vec(t) for t in c["leds"].split(";")] if "leds" in c else list(REFERENCE_LEDS)
    geom_kw = {}
    for key, attr in (
        ("irradiance_angle_deg", "irradiance_angle"),
        ("incidence_angle_deg", "incidence_angle"),
        ("half_power_angle_deg", "half_power_angle"),
        ("fov_deg", "fov"),
    ):
        if key in c:
            geom_kw[attr] = math.radians(float(c[key]))
    for key in ("detector_area", "filter_gain", "concentrator_gain"):
        if key in c:
            geom_kw[key] = float(c[key])
    geometries = tuple(Geometry(led_position=led, receiver_position=receiver, **geom_kw) for led in leds)
    diffuse = DiffuseParams(
        efficiency=float(c.get("diffuse_efficiency", DiffuseParams.efficiency)),
        decay_time=float(c.get("decay_time", DiffuseParams.decay_time)),
        delay=float(c.get("diffuse_delay", 0.0)),
    )

    run = sec("run")
    seed = int(run.get("seed", 0))
    q = sec("quadrature")
    defaults = QuadratureSpec()
    quadrature = QuadratureSpec(
        method=q.get("method", defaults.method),
        nodes_per_dim=int(q.get("nodes_per_dim", defaults.nodes_per_dim)),
        half_width=float(q.get("half_width", defaults.half_width)),
        sample_count=int(q.get("sample_count", defaults.sample_count)),
        seed=seed,
    )

    sw = sec("sweep")
    out = sec("output")
    wf = sec("waveform")
    return ExperimentConfig(
        system=system,
        geometries=geometries,
        diffuse=diffuse,
        constellation=from_name(sec("modulation").get("constellation", "qam4")),
        quadrature=quadrature,
        sweep_var=sw.get("variable", "P"),
        grid=_grid(sw) if sw else (system.power_budget,),
        objective=sw.get("objective", "SE").upper(),
        models=tuple(m.strip() for m in sw.get("models", ",".join(MODELS)).split(",") if m.strip()),
        output_path=out.get("path"),
        seed=seed,
        lower_bound_display_offset=float(out.get("lower_bound_display_offset", 0.0)),
        workers=int(run.get("workers", 1)),
        waveform_frames=int(wf.get("frames", 100_000)),
        waveform_symbols=wf.get("symbols", "gaussian"),
    )


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seed=seed, quadrature=replace(cfg.quadrature, seed=seed))


# ---------------------------------------------------------------------------
# sweeps


def _solve_point(job) -> SweepRecord:
    cfg, ch, model_name, value = job
    params = cfg.system.with_(**{SWEEP_VARS[cfg.sweep_var]: value})
    model = model_from_name(model_name, cfg.constellation, cfg.quadrature)
    offset = cfg.lower_bound_display_offset if model_name == "lower" else 0.0
    t0 = time.perf_counter()
    try:
        res = ee_maximize(ch, params, model) if cfg.objective == "EE" else se_optimize(ch, params, model)
    except AcoError as exc:
        return SweepRecord(
            cfg.sweep_var, value, model_name, cfg.objective, None, None, None, None, None,
            status=type(exc).__name__, display_offset=offset, message=str(exc),
            wall_time=time.perf_counter() - t0,
        )
    rate = total_rate(res.alloc, ch, model, params) + offset * params.bandwidth * params.n_data
    sum_power = res.alloc.total
    se = rate / params.total_bandwidth
    ee = rate / (2.0 * sum_power + params.circuit_power)
    return SweepRecord(
        cfg.sweep_var,
        value,
        model_name,
        cfg.objective,
        se if cfg.objective == "SE" else ee,
        sum_power,
        res.alloc.active,
        res.dual,
        res.iterations,
        res.status,
        rate=rate,
        se=se,
        ee=ee,
        display_offset=offset,
        wall_time=time.perf_counter() - t0,
    )


def run_sweep(cfg: ExperimentConfig) -> List[SweepRecord]:
    """Solve every (model, sweep value) point; rows come back ordered by model, then value.

    Solver errors are recorded in the row's status and the sweep continues.
    """
    ch = cfg.channel()
    jobs = [(cfg, ch, m, v) for m in cfg.models for v in cfg.grid]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        if cfg.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                return list(pool.map(_solve_point, jobs))
        return [_solve_point(j) for j in jobs]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def emit_csv(records: Sequence[SweepRecord], path) -> None:
    """Write records with 12 significant digits.

    A ``display_offset`` column is appended when any row carries a nonzero
    lower-bound display offset.
    """
    flag = any(r.display_offset for r in records)
    header = CSV_HEADER + (["display_offset"] if flag else [])
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = [
                r.sweep_var,
                _fmt(r.sweep_value),
                r.model,
                r.objective,
                _fmt(r.value),
                _fmt(r.sum_power),
                _fmt(r.active_subcarriers),
                _fmt(r.dual),
                _fmt(r.iterations),
                r.status,
            ]
            if flag:
                row.append(_fmt(r.display_offset))
            w.writerow(row)


# ---------------------------------------------------------------------------
# waveform Monte Carlo suite


@dataclass(frozen=True)
class WaveformCheck:
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.value <= self.limit


def waveform_suite(cfg: ExperimentConfig, batch: int = 20_000) -> List[WaveformCheck]:
    """Clipping, symmetry and optical-power checks on random frames.

    The allocation is Gaussian water-filling at the configured budget.
    Frames are generated in batches from one Philox stream, so the result
    depends only on the seed.
    """
    from . import waveform as wv
    from .se_alloc import effective_budget, waterfill
    from .rates import Gaussian

    params = cfg.system
    ch = cfg.channel()
    p = waterfill(ch, effective_budget(params, Gaussian()), params).alloc.powers
    n = params.n
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    c = None if cfg.waveform_symbols == "gaussian" else cfg.constellation

    anti = half = 0.0
    opt_sum = e_sum = ec_sum = 0.0
    frames = 0
    qam_opt = 0.0
    while frames < cfg.waveform_frames:
        k = min(batch, cfg.waveform_frames - frames)
        f = wv.synthesize(wv.random_symbols(rng, k, n // 2, c), p, n)
        anti = max(anti, wv.antisymmetry_error(f))
        half = max(half, wv.half_amplitude_check(f))
        opt_sum += float(f.clipped.sum())
        e_sum += float((f.time_samples**2).sum())
        ec_sum += float((f.clipped**2).sum())
        fq = wv.synthesize(wv.random_symbols(rng, k, n // 2, cfg.constellation), p, n)
        qam_opt += float(fq.clipped.sum())
        frames += k
    if frames < wv.MIN_FRAMES:
        raise ConfigError(f"waveform suite needs at least {wv.MIN_FRAMES} frames")
    total = float(p.sum())
    optical = opt_sum / (frames * 2 * n)
    elec = e_sum / frames
    closed = wv.gaussian_optical_power(total, n)
    parseval = wv.clipped_gaussian_mean(total, n)
    bound = wv.optical_power_bound(p, cfg.constellation, n)
    return [
        WaveformCheck("antisymmetry max |x_l + x_(l+N)|", anti, 1e-9),
        WaveformCheck("odd-bin half amplitude, max rel. deviation", half, 1e-9),
        WaveformCheck("optical power vs sqrt(sum p/(pi N)), rel. error", abs(optical / closed - 1), 0.02),
        WaveformCheck("optical power vs sqrt(sum p/(2 pi N)), rel. error", abs(optical / parseval - 1), 0.02),
        WaveformCheck("sum E x^2 vs 2 sum p, rel. error", abs(elec / (2 * total) - 1), 0.01),
        WaveformCheck("clipped/unclipped electrical power vs 1/2, rel. error", abs(ec_sum / e_sum / 0.5 - 1), 0.01),
        WaveformCheck(
            f"{cfg.constellation.name} optical power minus bound (1/sqrt(2N)) sum sqrt(p) E|X|",
            qam_opt / (frames * 2 * n) - bound,
            0.0,
        ),
    ]
