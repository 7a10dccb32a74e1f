"""JSON run configuration in engineering units.

A document has up to six top-level sections::

    {
      "preset": "smf",                       # optional starting point
      "fiber": {"attenuation_db_per_km": 0.2, "dispersion_ps_nm_km": 17.0,
                "dispersion_slope_ps_nm2_km": 0.067, "gamma_per_w_km": 1.2,
                "raman_slope_per_w_km_thz": 0.028, "span_length_km": 100.0,
                "reference_wavelength_nm": 1550.0},
      "grid": {"channel_count": 251, "spacing_ghz": 40.005,
               "bandwidth_ghz": 40.004, "power_dbm": 0.0, "modulation": "qpsk",
               "overrides": [{"index": 125, "modulation": "gaussian"}]},
      "link": {"spans": 6, "coherence_exponent": 0.0, "noise_figure_db": null},
      "simulation": {"symbols_per_channel": 8192, "steps_per_span": 400, ...},
      "sweep": {"spans": [1, 2, 5], "modulations": ["qpsk", "gaussian"],
                "powers_dbm": [-2, 0, 2]},
      "identity_pairs": [[1, 1], [1, 3], [1, 50]]
    }

Keys given in the document replace the preset's. Schema violations raise
:class:`ConfigurationError` whose message starts with ``source:line:``.
"""
from dataclasses import dataclass, field, fields, replace
import json
import json.decoder
import json.scanner

from .core import Channel, ChannelGrid, FiberSpec, LinkPlan
from .errors import ConfigurationError, DomainError
from .formats import named_format
from .ssfm import SimulationPlan
from .units import (attenuation_db_per_km_to_natural, dbm_to_watt, per_w_km, ps_nm2_km,
                    ps_nm_km, raman_slope_per_w_km_thz)

__all__ = ["RunConfig", "PRESETS", "parse_config", "load_config", "config_to_dict", "dump_config"]

PRESETS = {
    "smf": {
        "fiber": {"attenuation_db_per_km": 0.2, "dispersion_ps_nm_km": 17.0,
                  "dispersion_slope_ps_nm2_km": 0.067, "gamma_per_w_km": 1.2,
                  "raman_slope_per_w_km_thz": 0.028, "span_length_km": 100.0,
                  "reference_wavelength_nm": 1550.0},
        "grid": {"channel_count": 251, "spacing_ghz": 40.005, "bandwidth_ghz": 40.004,
                 "power_dbm": 0.0, "modulation": "gaussian"},
    },
    "nzdsf": {
        "fiber": {"attenuation_db_per_km": 0.19, "dispersion_ps_nm_km": 4.5,
                  "dispersion_slope_ps_nm2_km": 0.05, "gamma_per_w_km": 1.3,
                  "raman_slope_per_w_km_thz": 0.031, "span_length_km": 100.0,
                  "reference_wavelength_nm": 1550.0},
        "grid": {"channel_count": 251, "spacing_ghz": 40.005, "bandwidth_ghz": 40.004,
                 "power_dbm": -2.0, "modulation": "gaussian"},
    },
}

_FIBER_KEYS = {
    "attenuation_db_per_km": float, "dispersion_ps_nm_km": float,
    "dispersion_slope_ps_nm2_km": float, "gamma_per_w_km": float,
    "raman_slope_per_w_km_thz": float, "span_length_km": float,
    "reference_wavelength_nm": float,
}
_GRID_KEYS = {
    "channel_count": int, "spacing_ghz": float, "bandwidth_ghz": float,
    "power_dbm": float, "modulation": str, "overrides": list, "channels": list,
}
_CHANNEL_KEYS = {"frequency_ghz": float, "bandwidth_ghz": float, "power_dbm": float,
                 "modulation": str}
_OVERRIDE_KEYS = {"index": int, "modulation": str, "power_dbm": float}
_LINK_KEYS = {"spans": int, "coherence_exponent": float, "noise_figure_db": (float, type(None))}
_SIM_KEYS = {
    "symbols_per_channel": int, "samples_per_symbol": (int, type(None)),
    "steps_per_span": int, "step_distribution": str, "realizations": int,
    "rng_seed": int, "roll_off": float, "isrs": bool, "workers": int,
}
_SWEEP_KEYS = {"spans": list, "modulations": list, "powers_dbm": list, "channels": list}
_TOP_KEYS = {"preset", "fiber", "grid", "link", "simulation", "sweep", "identity_pairs"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: SI-unit model objects plus the source document."""

    fiber: FiberSpec
    grid: ChannelGrid
    link: LinkPlan
    simulation: SimulationPlan
    sweep_spans: tuple = (1, 2, 5, 10, 20, 50, 100)
    sweep_modulations: tuple = ()
    sweep_powers_dbm: tuple = ()
    identity_pairs: tuple = ((1.0, 1.0), (1.0, 3.0), (1.0, 50.0))
    noise_figure_db: float | None = None
    document: dict = field(default_factory=dict, compare=False)


class _Located(dict):
    """dict remembering the character span of its JSON object."""

    start = 0
    end = 0


def _parse_object(s_and_end, *args, **kwargs):
    start = s_and_end[1] - 1
    obj, end = json.decoder.JSONObject(s_and_end, *args, **kwargs)
    loc = _Located(obj)
    loc.start, loc.end = start, end
    return loc, end


def _decoder():
    dec = json.JSONDecoder()
    dec.parse_object = _parse_object
    # the C scanner ignores parse_object, the pure-Python one honours it
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


class _Ctx:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def line_of(self, obj, key=None):
        if not isinstance(obj, _Located):
            return 1
        pos = obj.start
        if key is not None:
            idx = self.text.find(f'"{key}"', obj.start, obj.end)
            if idx >= 0:
                pos = idx
        return self.text.count("\n", 0, pos) + 1

    def fail(self, obj, key, message):
        raise ConfigurationError(f"{self.source}:{self.line_of(obj, key)}: {message}")


def _check_section(ctx, obj, allowed, name):
    if not isinstance(obj, dict):
        ctx.fail(obj, None, f"'{name}' must be an object")
    for key, value in obj.items():
        if key not in allowed:
            ctx.fail(obj, key, f"unknown key '{key}' in '{name}'")
        want = allowed[key]
        want = want if isinstance(want, tuple) else (want,)
        ok = any(
            (isinstance(value, (int, float)) and not isinstance(value, bool)) if w is float
            else (isinstance(value, int) and not isinstance(value, bool)) if w is int
            else isinstance(value, w)
            for w in want)
        if not ok:
            names = " or ".join("number" if w is float else "integer" if w is int
                                else "null" if w is type(None) else w.__name__ for w in want)
            ctx.fail(obj, key, f"'{name}.{key}' must be {names}, got {json.dumps(value)}")


def _merge(base, doc):
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for key, value in doc.items():
        if key == "preset":
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            merged = dict(out[key])
            merged.update(value)
            loc = _Located(merged)
            if isinstance(value, _Located):
                loc.start, loc.end = value.start, value.end
            out[key] = loc
        else:
            out[key] = value
    return out


def _modulation(ctx, obj, key):
    try:
        return named_format(obj[key])
    except DomainError as exc:
        ctx.fail(obj, key, str(exc))


def _build_fiber(ctx, f):
    required = ["attenuation_db_per_km", "dispersion_ps_nm_km", "gamma_per_w_km", "span_length_km"]
    for key in required:
        if key not in f:
            ctx.fail(f, None, f"'fiber' is missing '{key}'")
    try:
        return FiberSpec(
            alpha=attenuation_db_per_km_to_natural(f["attenuation_db_per_km"]),
            gamma=f["gamma_per_w_km"] * per_w_km,
            dispersion=f["dispersion_ps_nm_km"] * ps_nm_km,
            dispersion_slope=f.get("dispersion_slope_ps_nm2_km", 0.0) * ps_nm2_km,
            raman_slope=f.get("raman_slope_per_w_km_thz", 0.0) * raman_slope_per_w_km_thz,
            length=f["span_length_km"] * 1e3,
            reference_wavelength=f.get("reference_wavelength_nm", 1550.0) * 1e-9,
        )
    except DomainError as exc:
        ctx.fail(f, None, f"invalid fiber: {exc}")


def _build_grid(ctx, g, wavelength):
    try:
        if "channels" in g:
            chans = []
            for ch in g["channels"]:
                _check_section(ctx, ch, _CHANNEL_KEYS, "grid.channels[]")
                for key in ("frequency_ghz", "bandwidth_ghz", "power_dbm"):
                    if key not in ch:
                        ctx.fail(ch, None, f"channel entry is missing '{key}'")
                mod = _modulation(ctx, ch, "modulation") if "modulation" in ch \
                    else named_format(g.get("modulation", "gaussian"))
                chans.append(Channel(ch["frequency_ghz"] * 1e9, ch["bandwidth_ghz"] * 1e9,
                                     dbm_to_watt(ch["power_dbm"]), mod))
            grid = ChannelGrid(tuple(chans), wavelength)
        else:
            for key in ("channel_count", "spacing_ghz", "bandwidth_ghz", "power_dbm"):
                if key not in g:
                    ctx.fail(g, None, f"'grid' is missing '{key}'")
            if g["channel_count"] < 1:
                ctx.fail(g, "channel_count", "'grid.channel_count' must be >= 1")
            mod = _modulation(ctx, g, "modulation") if "modulation" in g else None
            grid = ChannelGrid.uniform(g["channel_count"], g["spacing_ghz"] * 1e9,
                                       g["bandwidth_ghz"] * 1e9, dbm_to_watt(g["power_dbm"]),
                                       mod, wavelength)
    except DomainError as exc:
        ctx.fail(g, None, f"invalid grid: {exc}")
    for ov in g.get("overrides", []):
        _check_section(ctx, ov, _OVERRIDE_KEYS, "grid.overrides[]")
        if "index" not in ov:
            ctx.fail(ov, None, "override is missing 'index'")
        idx = ov["index"]
        if not 0 <= idx < len(grid):
            ctx.fail(ov, "index", f"override index {idx} outside 0..{len(grid) - 1}")
        ch = grid.channels[idx]
        if "modulation" in ov:
            ch = replace(ch, modulation=_modulation(ctx, ov, "modulation"))
        if "power_dbm" in ov:
            ch = replace(ch, launch_power=dbm_to_watt(ov["power_dbm"]))
        chans = list(grid.channels)
        chans[idx] = ch
        grid = replace(grid, channels=tuple(chans))
    return grid


def parse_config(text, source="<config>"):
    """Parse and validate a configuration document given as a string."""
    ctx = _Ctx(text, source)
    try:
        doc = _decoder().decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}:1: top level must be an object")
    for key in doc:
        if key not in _TOP_KEYS:
            ctx.fail(doc, key, f"unknown top-level key '{key}'")
    base = {}
    if "preset" in doc:
        name = doc["preset"]
        if not isinstance(name, str) or name.lower() not in PRESETS:
            ctx.fail(doc, "preset", f"unknown preset {json.dumps(name)}; "
                                    f"choose from {', '.join(sorted(PRESETS))}")
        base = PRESETS[name.lower()]
    merged = _merge(base, doc)
    for key in ("fiber", "grid"):
        if key not in merged:
            ctx.fail(doc, None, f"missing section '{key}' (or give a 'preset')")
    _check_section(ctx, merged["fiber"], _FIBER_KEYS, "fiber")
    _check_section(ctx, merged["grid"], _GRID_KEYS, "grid")
    link_doc = merged.get("link", {})
    _check_section(ctx, link_doc, _LINK_KEYS, "link")
    sim_doc = merged.get("simulation", {})
    _check_section(ctx, sim_doc, _SIM_KEYS, "simulation")
    sweep_doc = merged.get("sweep", {})
    _check_section(ctx, sweep_doc, _SWEEP_KEYS, "sweep")

    fiber = _build_fiber(ctx, merged["fiber"])
    grid = _build_grid(ctx, merged["grid"], fiber.reference_wavelength)
    try:
        link = LinkPlan(link_doc.get("spans", 1), link_doc.get("coherence_exponent", 0.0))
    except DomainError as exc:
        ctx.fail(link_doc, None, f"invalid link: {exc}")
    nf = link_doc.get("noise_figure_db")
    if nf is not None:
        link = replace(link, ase_power=tuple(
            LinkPlan.ase_from_amplifiers(grid, fiber, link.span_count, nf)))
    try:
        sim = SimulationPlan(**sim_doc)
    except ConfigurationError as exc:
        ctx.fail(sim_doc, None, f"invalid simulation: {exc}")

    spans = sweep_doc.get("spans", list(RunConfig.sweep_spans))
    if not spans or any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in spans):
        ctx.fail(sweep_doc, "spans", "'sweep.spans' must be a non-empty list of integers >= 1")
    mods = sweep_doc.get("modulations", [])
    for m in mods:
        if not isinstance(m, str):
            ctx.fail(sweep_doc, "modulations", "'sweep.modulations' must list format names")
        try:
            named_format(m)
        except DomainError as exc:
            ctx.fail(sweep_doc, "modulations", str(exc))
    for c in sweep_doc.get("channels", []):
        if not isinstance(c, int) or isinstance(c, bool) or not 0 <= c < len(grid):
            ctx.fail(sweep_doc, "channels", f"'sweep.channels' entry {json.dumps(c)} is not a channel index")
    powers = sweep_doc.get("powers_dbm", [])
    if any(not isinstance(p, (int, float)) or isinstance(p, bool) for p in powers):
        ctx.fail(sweep_doc, "powers_dbm", "'sweep.powers_dbm' must list numbers")

    pairs = doc.get("identity_pairs", [list(p) for p in RunConfig.identity_pairs])
    checked = []
    for pair in pairs:
        if (not isinstance(pair, list) or len(pair) != 2
                or any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in pair)):
            ctx.fail(doc, "identity_pairs", "'identity_pairs' entries must be [a, b] number pairs")
        a, b = float(pair[0]), float(pair[1])
        if not a > 0 or b < a:
            ctx.fail(doc, "identity_pairs", f"identity pair [{a:g}, {b:g}] needs a > 0 and b >= a")
        checked.append((a, b))

    return RunConfig(fiber, grid, link, sim, tuple(spans), tuple(mods),
                     tuple(float(p) for p in powers), tuple(checked), nf, doc)


def load_config(path):
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}:0: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def config_to_dict(cfg):
    """Engineering-unit document that parses back to an equivalent :class:`RunConfig`."""
    from .units import attenuation_natural_to_db_per_km, watt_to_dbm
    f = cfg.fiber
    channels = [{"frequency_ghz": ch.center_freq / 1e9, "bandwidth_ghz": ch.bandwidth / 1e9,
                 "power_dbm": watt_to_dbm(ch.launch_power),
                 "modulation": _format_name(ch.modulation)} for ch in cfg.grid.channels]
    sim = {fl.name: getattr(cfg.simulation, fl.name) for fl in fields(SimulationPlan)}
    return {
        "fiber": {
            "attenuation_db_per_km": attenuation_natural_to_db_per_km(f.alpha),
            "dispersion_ps_nm_km": f.dispersion / ps_nm_km,
            "dispersion_slope_ps_nm2_km": f.dispersion_slope / ps_nm2_km,
            "gamma_per_w_km": f.gamma / per_w_km,
            "raman_slope_per_w_km_thz": f.raman_slope / raman_slope_per_w_km_thz,
            "span_length_km": f.length / 1e3,
            "reference_wavelength_nm": f.reference_wavelength * 1e9,
        },
        "grid": {"channels": channels},
        "link": {"spans": cfg.link.span_count,
                 "coherence_exponent": cfg.link.coherence_exponent,
                 "noise_figure_db": cfg.noise_figure_db},
        "simulation": sim,
        "sweep": dict({"spans": list(cfg.sweep_spans), "modulations": list(cfg.sweep_modulations),
                       "powers_dbm": list(cfg.sweep_powers_dbm)},
                      **({"channels": list(cfg.document["sweep"]["channels"])}
                         if "channels" in cfg.document.get("sweep", {}) else {})),
        "identity_pairs": [list(p) for p in cfg.identity_pairs],
    }


def _format_name(fmt):
    name = fmt.name
    if name == "Gaussian":
        return "gaussian"
    if name.startswith("PS-"):
        raise ConfigurationError(f"shaped format {name} has no configuration name")
    return name.lower()


def dump_config(cfg):
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
