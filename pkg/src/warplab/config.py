"""Scenario configuration files.

A scenario is an INI file (``configparser`` syntax, ``;`` or ``#`` comments)
with these sections; keys not listed are rejected.

``[scenario]``
    ``name`` (required), ``description``.
``[ambient]``
    ``dim`` n (required), ``warping`` (``space_form:<b>`` or ``custom:<expr in r>``),
    ``christoffel`` (``auto`` | ``analytic`` | ``finite_difference``).
``[model]``
    ``dim`` m of the comparison model; it shares the ambient warping.
``[immersion]``
    either ``builtin = <name>`` plus that example's parameters as extra keys,
    or ``chart = <expr>; <expr>; ...`` in ``u1..um`` together with
    ``domain = lo:hi, lo:hi, ...``, optional ``wrap = false, true`` and ``fd_step``.
``[mesh]``
    ``resolution = N1, N2, ...`` samples per parameter axis.
``[radii]``
    ``t_lo``, ``t_hi``, ``count``: sampled radii ``linspace(t_lo, t_hi, count)``.
``[hypotheses]``
    ``forms`` (comma list), ``c`` (bound forms), ``bins`` (default 20),
    ``range = lo:hi`` (default the radii range), ``epsilon_form`` (decay form
    feeding the area-growth and boundary bounds; default the first decay form).
``[verifier]``
    ``area_growth_t_min``, ``bishop_radii`` (comma list of sampled radii),
    ``critical_scan = lo:hi``, ``convexity_scan = lo:hi``,
    ``convexity_function`` (``integrated_warping`` | ``half_square``).
``[tolerances]``
    overrides of :data:`warplab.verifier.DEFAULT_TOLERANCES`.
``[output]``
    ``directory``, ``formats`` (subset of ``csv, json, mesh``).
"""
from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .verifier import DEFAULT_TOLERANCES, HYPOTHESIS_FORMS

__all__ = ["ScenarioConfig", "load_config", "parse_config", "apply_tolerance_overrides", "config_to_text"]

_ALLOWED = {
    "scenario": {"name", "description"},
    "ambient": {"dim", "warping", "christoffel"},
    "model": {"dim"},
    "immersion": None,  # builtin parameters are free-form
    "mesh": {"resolution"},
    "radii": {"t_lo", "t_hi", "count"},
    "hypotheses": {"forms", "c", "bins", "range", "epsilon_form"},
    "verifier": {"area_growth_t_min", "bishop_radii", "critical_scan", "convexity_scan", "convexity_function"},
    "tolerances": set(DEFAULT_TOLERANCES),
    "output": {"directory", "formats"},
}
_REQUIRED = {"scenario": {"name"}, "ambient": {"dim", "warping"}, "model": {"dim"}, "immersion": set(), "mesh": {"resolution"}, "radii": {"t_lo", "t_hi", "count"}}


@dataclass
class ScenarioConfig:
    name: str
    description: str
    ambient_dim: int
    warping: str
    christoffel: str
    model_dim: int
    builtin: Optional[str]
    builtin_params: dict
    chart: Optional[list]
    domain: Optional[list]
    wrap: Optional[list]
    fd_step: float
    resolution: list
    t_lo: float
    t_hi: float
    count: int
    forms: list
    c: Optional[float]
    bins: int
    hyp_range: Optional[tuple]
    epsilon_form: Optional[str]
    area_growth_t_min: Optional[float]
    bishop_radii: list
    critical_scan: Optional[tuple]
    convexity_scan: Optional[tuple]
    convexity_function: str
    tolerances: dict
    output_dir: Optional[str]
    formats: list
    parser: configparser.ConfigParser = field(repr=False)
    text: str = field(repr=False, default="")

    @property
    def radii(self):
        import numpy as np

        return np.linspace(self.t_lo, self.t_hi, self.count)


def _line_of(text, section, key):
    cur = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            cur = m.group(1).strip()
            continue
        if cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return no
    return None


class _Reader:
    def __init__(self, cp, text, source):
        self.cp, self.text, self.source = cp, text, source

    def fail(self, section, key, msg):
        line = _line_of(self.text, section, key) if key else None
        where = f"{self.source}:{line}: " if line else f"{self.source}: "
        field_name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}{field_name}: {msg}")

    def get(self, section, key, default=None):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        return default

    def num(self, section, key, kind=float, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {raw!r}")

    def nums(self, section, key, kind=float):
        raw = self.get(section, key)
        if raw is None:
            return []
        try:
            return [kind(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            self.fail(section, key, f"expected a comma-separated list of numbers, got {raw!r}")

    def interval(self, section, key):
        raw = self.get(section, key)
        if raw is None:
            return None
        return self._interval(section, key, raw)

    def _interval(self, section, key, raw):
        parts = raw.split(":")
        try:
            lo, hi = (float(p) for p in parts)
        except ValueError:
            self.fail(section, key, f"expected lo:hi, got {raw!r}")
        if not hi > lo:
            self.fail(section, key, f"interval {raw!r} needs lo < hi")
        return lo, hi


def _auto_value(raw):
    for kind in (int, float):
        try:
            return kind(raw)
        except ValueError:
            pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse and validate scenario text; errors carry the file line and field."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keep parameter names such as R case-sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    rd = _Reader(cp, text, source)
    for section in cp.sections():
        if section not in _ALLOWED:
            rd.fail(section, None, f"unknown section; expected one of {', '.join(_ALLOWED)}")
        allowed = _ALLOWED[section]
        if allowed is not None:
            for key in cp.options(section):
                if key not in allowed:
                    rd.fail(section, key, f"unknown key; expected one of {', '.join(sorted(allowed))}")
    for section, keys in _REQUIRED.items():
        if not cp.has_section(section):
            raise ConfigError(f"{source}: missing section [{section}]")
        for key in keys:
            if not cp.has_option(section, key):
                raise ConfigError(f"{source}: [{section}] missing required key {key!r}")

    n = rd.num("ambient", "dim", int)
    m = rd.num("model", "dim", int)
    if m < 2:
        rd.fail("model", "dim", f"model dimension m = {m} violates m >= 2")
    if not n > m:
        rd.fail("ambient", "dim", f"ambient dimension n = {n} must exceed the submanifold dimension m = {m} (n > m >= 2)")
    christoffel = rd.get("ambient", "christoffel", "auto")
    if christoffel not in ("auto", "analytic", "finite_difference"):
        rd.fail("ambient", "christoffel", f"unknown mode {christoffel!r}")

    builtin = rd.get("immersion", "builtin")
    chart = rd.get("immersion", "chart")
    if (builtin is None) == (chart is None):
        rd.fail("immersion", None, "give exactly one of 'builtin' or 'chart'")
    builtin_params, domain, wrap = {}, None, None
    if builtin is not None:
        for key in cp.options("immersion"):
            if key != "builtin":
                builtin_params[key] = _auto_value(cp.get("immersion", key).strip())
        chart_list = None
    else:
        extra = set(cp.options("immersion")) - {"chart", "domain", "wrap", "fd_step"}
        if extra:
            rd.fail("immersion", sorted(extra)[0], "unknown key for a chart immersion")
        chart_list = [c.strip() for c in chart.split(";")]
        raw = rd.get("immersion", "domain")
        if raw is None:
            rd.fail("immersion", "chart", "a chart immersion needs 'domain = lo:hi, ...'")
        domain = [rd._interval("immersion", "domain", p.strip()) for p in raw.split(",")]
        if len(domain) != m:
            rd.fail("immersion", "domain", f"needs {m} intervals (one per parameter), got {len(domain)}")
        if len(chart_list) != n:
            rd.fail("immersion", "chart", f"needs {n} components separated by ';', got {len(chart_list)}")
        wraw = rd.get("immersion", "wrap")
        if wraw is not None:
            wrap = [w.strip().lower() == "true" for w in wraw.split(",")]
            if len(wrap) != m:
                rd.fail("immersion", "wrap", f"needs {m} flags")
    fd_step = rd.num("immersion", "fd_step", float, 1e-4) if builtin is None else 1e-4

    resolution = rd.nums("mesh", "resolution", int)
    if len(resolution) != m or any(c < 2 for c in resolution):
        rd.fail("mesh", "resolution", f"needs {m} per-axis counts, each >= 2")

    t_lo = rd.num("radii", "t_lo")
    t_hi = rd.num("radii", "t_hi")
    count = rd.num("radii", "count", int)
    if not (t_lo > 0 and t_hi > t_lo):
        rd.fail("radii", "t_hi", f"need 0 < t_lo < t_hi, got t_lo={t_lo}, t_hi={t_hi}")
    if count < 2:
        rd.fail("radii", "count", "need at least 2 radii")

    forms = [f.strip() for f in (rd.get("hypotheses", "forms", "") or "").split(",") if f.strip()]
    for f in forms:
        if f not in HYPOTHESIS_FORMS:
            rd.fail("hypotheses", "forms", f"unknown form {f!r}; choose from {', '.join(HYPOTHESIS_FORMS)}")
    c = rd.num("hypotheses", "c")
    if any(HYPOTHESIS_FORMS[f][0] == "bound" for f in forms) and c is None:
        rd.fail("hypotheses", "forms", "bound forms need a constant 'c'")
    bins = rd.num("hypotheses", "bins", int, 20)
    if bins < 1:
        rd.fail("hypotheses", "bins", "need at least one bin")
    eps_form = rd.get("hypotheses", "epsilon_form")
    if eps_form is not None and (eps_form not in HYPOTHESIS_FORMS or HYPOTHESIS_FORMS[eps_form][0] != "decay"):
        rd.fail("hypotheses", "epsilon_form", f"{eps_form!r} is not a decay form")
    if eps_form is None:
        eps_form = next((f for f in forms if HYPOTHESIS_FORMS[f][0] == "decay"), None)
    elif eps_form not in forms:
        forms.append(eps_form)

    tolerances = dict(DEFAULT_TOLERANCES)
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            tolerances[key] = rd.num("tolerances", key)
            if tolerances[key] < 0:
                rd.fail("tolerances", key, "tolerances must be nonnegative")

    conv_fn = rd.get("verifier", "convexity_function", "integrated_warping")
    if conv_fn not in ("integrated_warping", "half_square"):
        rd.fail("verifier", "convexity_function", f"unknown function {conv_fn!r}")
    formats = [f.strip() for f in (rd.get("output", "formats", "csv, json, mesh")).split(",") if f.strip()]
    for f in formats:
        if f not in ("csv", "json", "mesh"):
            rd.fail("output", "formats", f"unknown format {f!r}")

    return ScenarioConfig(
        name=rd.get("scenario", "name"),
        description=rd.get("scenario", "description", ""),
        ambient_dim=n,
        warping=rd.get("ambient", "warping"),
        christoffel=christoffel,
        model_dim=m,
        builtin=builtin,
        builtin_params=builtin_params,
        chart=chart_list,
        domain=domain,
        wrap=wrap,
        fd_step=fd_step,
        resolution=resolution,
        t_lo=t_lo,
        t_hi=t_hi,
        count=count,
        forms=forms,
        c=c,
        bins=bins,
        hyp_range=rd.interval("hypotheses", "range"),
        epsilon_form=eps_form,
        area_growth_t_min=rd.num("verifier", "area_growth_t_min"),
        bishop_radii=rd.nums("verifier", "bishop_radii"),
        critical_scan=rd.interval("verifier", "critical_scan"),
        convexity_scan=rd.interval("verifier", "convexity_scan"),
        convexity_function=conv_fn,
        tolerances=tolerances,
        output_dir=rd.get("output", "directory"),
        formats=formats,
        parser=cp,
        text=text,
    )


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def apply_tolerance_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``name=value`` strings on top of the config's tolerances (and its echo)."""
    for item in overrides or ():
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tolerance {item!r}: expected <name>=<value> with name in {', '.join(DEFAULT_TOLERANCES)}")
        try:
            val = float(value)
        except ValueError:
            raise ConfigError(f"--tolerance {item!r}: value is not a number") from None
        if val < 0:
            raise ConfigError(f"--tolerance {item!r}: tolerances must be nonnegative")
        cfg.tolerances[name] = val
        if not cfg.parser.has_section("tolerances"):
            cfg.parser.add_section("tolerances")
        cfg.parser.set("tolerances", name, repr(val))
    return cfg


def config_to_text(cfg: ScenarioConfig) -> str:
    """Effective configuration (after overrides) as INI text."""
    buf = io.StringIO()
    cfg.parser.write(buf)
    return buf.getvalue()
