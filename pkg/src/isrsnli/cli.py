"""Command-line front end.

Every command writes CSV files into ``--out``. Files start with ``#``
comment lines recording the command, the config path and every override;
nothing time-dependent is written, so identical inputs give identical bytes.
Outputs are assembled in memory and only written once the whole command
has succeeded.
"""
import argparse
import io
import math
import os
import sys
import tempfile
from dataclasses import replace

from . import __version__
from .closedform import appendix_identity, total_nli_closedform
from .config import load_config
from .errors import IsrsNliError
from .formats import named_format
from .integral import (gn_xpm_spm_integral, normalization_Cn, normalization_Cn_increment,
                       xpm_correction_integral_1d_sum)
from .units import dbm_to_watt

COMMANDS = ("estimate", "validate", "simulate", "sweep", "identity-check")
TIERS = ("cf", "int", "ssfm")
IDENTITY_SPANS = (2, 5, 10, 20, 50, 100, 200, 500, 1000)


def _db(x):
    return f"{10.0 * math.log10(x):.6f}" if x > 0 else ("-inf" if x == 0 else "nan")


def _num(x):
    return f"{x:.9e}"


class _Table:
    def __init__(self, header_lines, columns):
        self.buf = io.StringIO()
        for line in header_lines:
            self.buf.write(f"# {line}\n")
        self.buf.write(",".join(columns) + "\n")

    def row(self, *values):
        self.buf.write(",".join(str(v) for v in values) + "\n")

    def text(self):
        return self.buf.getvalue()


def _header(args, cfg, command):
    lines = [f"isrsnli {__version__} {command}", f"config: {os.path.basename(args.config)}"]
    overrides = []
    if args.spans is not None:
        overrides.append(f"spans={args.spans}")
    if args.epsilon is not None:
        overrides.append(f"epsilon={args.epsilon:g}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.tier:
        overrides.append("tier=" + "+".join(args.tier))
    lines.append("overrides: " + (", ".join(overrides) if overrides else "none"))
    lines.append(f"channels: {len(cfg.grid)}; spans: {cfg.link.span_count}; "
                 f"epsilon: {cfg.link.coherence_exponent:g}")
    lines.append("eta columns in dB(1/W^2) = 10 log10(eta * 1 W^2); "
                 "eta_corr is linear in 1/W^2 (it may be zero or negative)")
    return lines


def _apply_overrides(cfg, args):
    link = cfg.link
    if args.spans is not None:
        link = link.with_spans(args.spans)
    if args.epsilon is not None:
        link = replace(link, coherence_exponent=args.epsilon)
    sim = cfg.simulation
    if args.seed is not None:
        sim = replace(sim, rng_seed=args.seed)
    return replace(cfg, link=link, simulation=sim)


def _estimate(cfg, args):
    tier = (args.tier or ["cf"])[0]
    cols = ["channel", "frequency_thz", "eta_gn_db", "eta_corr", "eta_total_db", "snr_db"]
    t = _Table(_header(args, cfg, "estimate") + [f"tier: {tier}"], cols)
    if tier == "cf":
        rep = total_nli_closedform(cfg.grid, cfg.fiber, cfg.link)
    elif tier == "int":
        rep = gn_xpm_spm_integral(cfg.grid, cfg.fiber, cfg.link.span_count,
                                  coherence_exponent=cfg.link.coherence_exponent,
                                  include_correction=True, ase_power=cfg.link.ase_per_channel(len(cfg.grid)))
    else:
        from .ssfm import simulate
        res = simulate(cfg.grid, cfg.fiber, cfg.simulation, cfg.link.span_count)
        for c in range(len(cfg.grid)):
            t.row(c, f"{res.grid.frequencies[c] / 1e12:.9f}", "nan", "nan", _db(res.eta[c]),
                  _db(res.snr[c]))
        return {"estimate.csv": t.text()}
    for c in range(len(cfg.grid)):
        t.row(c, f"{rep.frequencies[c] / 1e12:.9f}", _db(rep.eta_gn[c]), _num(rep.eta_corr[c]),
              _db(rep.eta_total[c]), _db(rep.snr[c]))
    return {"estimate.csv": t.text()}


def _validate_channels(cfg):
    doc = cfg.document.get("sweep", {})
    return list(doc.get("channels", [len(cfg.grid) // 2]))


def _validate(cfg, args):
    tiers = args.tier or ["cf", "int"]
    spans = [args.spans] if args.spans is not None else list(cfg.sweep_spans)
    chans = _validate_channels(cfg)
    for c in chans:
        if not 0 <= c < len(cfg.grid):
            raise IsrsNliError(f"validate channel index {c} outside the grid")
    cols = ["n", "channel", "frequency_thz", "tier", "eta_gn_db", "eta_corr", "eta_total_db",
            "delta_corr_db_vs_cf", "delta_total_db_vs_cf"]
    t = _Table(_header(args, cfg, "validate") + ["delta = 10 log10(tier / closed form)"], cols)
    f = cfg.grid.frequencies
    for n in spans:
        link = cfg.link.with_spans(n)
        cf = total_nli_closedform(cfg.grid, cfg.fiber, link)
        for c in chans:
            t.row(n, c, f"{f[c] / 1e12:.9f}", "cf", _db(cf.eta_gn[c]), _num(cf.eta_corr[c]),
                  _db(cf.eta_total[c]), "0.000000", "0.000000")
        if "int" in tiers:
            for c in chans:
                try:
                    corr = xpm_correction_integral_1d_sum(c, cfg.fiber, cfg.grid, n)
                except IsrsNliError as exc:
                    raise IsrsNliError(f"integral tier failed (n={n}, channel {c}): {exc}") from exc
                total = cf.eta_gn[c] + corr
                t.row(n, c, f"{f[c] / 1e12:.9f}", "int", _db(cf.eta_gn[c]), _num(corr),
                      _db(total), _ratio_db(corr, cf.eta_corr[c]), _ratio_db(total, cf.eta_total[c]))
    if "ssfm" in tiers:
        from .ssfm import simulate
        n = cfg.link.span_count
        try:
            res = simulate(cfg.grid, cfg.fiber, cfg.simulation, n)
        except IsrsNliError as exc:
            raise IsrsNliError(f"ssfm tier failed: {exc}") from exc
        cf = total_nli_closedform(res.grid, cfg.fiber, cfg.link)
        for c in range(len(res.grid)):
            t.row(n, c, f"{res.grid.frequencies[c] / 1e12:.9f}", "ssfm", "nan", "nan",
                  _db(res.eta[c]), "nan", _ratio_db(res.eta[c], cf.eta_total[c]))
    return {"validate.csv": t.text()}


def _ratio_db(a, b):
    if a == 0 and b == 0:
        return "0.000000"
    if a * b <= 0:
        return "nan"
    return f"{10.0 * math.log10(a / b):.6f}"


def _simulate(cfg, args):
    from .ssfm import simulate
    res = simulate(cfg.grid, cfg.fiber, cfg.simulation, cfg.link.span_count)
    cf = total_nli_closedform(res.grid, cfg.fiber, cfg.link)
    cols = ["channel", "frequency_thz", "eta_ssfm_db", "eta_stderr_db", "snr_db",
            "eta_cf_total_db", "eta_cf_gn_db", "delta_db"]
    plan = cfg.simulation
    t = _Table(_header(args, cfg, "simulate") + [
        f"symbols: {plan.symbols_per_channel}; steps/span: {plan.steps_per_span}; "
        f"realizations: {plan.realizations}; seed: {plan.rng_seed}"], cols)
    for c in range(len(res.grid)):
        rel = res.eta_stderr[c] / res.eta[c] if res.eta[c] > 0 else 0.0
        t.row(c, f"{res.grid.frequencies[c] / 1e12:.9f}", _db(res.eta[c]),
              f"{10 * math.log10(1 + rel):.6f}", _db(res.snr[c]), _db(cf.eta_total[c]),
              _db(cf.eta_gn[c]), _ratio_db(res.eta[c], cf.eta_total[c]))
    return {"simulate.csv": t.text(), "simulate_realizations.csv": res.csv_text()}


def _sweep(cfg, args):
    spans = [args.spans] if args.spans is not None else list(cfg.sweep_spans)
    mods = list(cfg.sweep_modulations) or [None]
    powers = list(cfg.sweep_powers_dbm) or [None]
    cols = ["n", "modulation", "power_dbm", "channel", "frequency_thz", "eta_gn_db", "eta_corr",
            "eta_total_db", "snr_db"]
    t = _Table(_header(args, cfg, "sweep"), cols)
    for mod in mods:
        grid = cfg.grid if mod is None else cfg.grid.with_modulation(named_format(mod))
        for p in powers:
            g = grid if p is None else grid.with_powers(dbm_to_watt(p))
            for n in spans:
                rep = total_nli_closedform(g, cfg.fiber, cfg.link.with_spans(n))
                for c in range(len(g)):
                    t.row(n, mod or "config", "config" if p is None else f"{p:g}", c,
                          f"{rep.frequencies[c] / 1e12:.9f}", _db(rep.eta_gn[c]),
                          _num(rep.eta_corr[c]), _db(rep.eta_total[c]), _db(rep.snr[c]))
    return {"sweep.csv": t.text()}


def _identity(cfg, args):
    cols = ["a", "b", "n", "C_n", "finite_difference", "closed_form", "relative_error"]
    t = _Table(_header(args, cfg, "identity-check") + [
        "C_n uses phi = 1, B_k = 2a, delta_f = b; finite_difference = C_(n+1) - C_n"], cols)
    summary = []
    for a, b in cfg.identity_pairs:
        target = appendix_identity(a, b)
        err = math.nan
        for n in IDENTITY_SPANS:
            cn = normalization_Cn(n, 1.0, 2 * a, b, method="spectral")
            dc = normalization_Cn_increment(n, 1.0, 2 * a, b, method="spectral")
            err = abs(dc / target - 1.0)
            t.row(f"{a:g}", f"{b:g}", n, _num(cn), _num(dc), _num(target), f"{err:.6e}")
        summary.append(f"a={a:g} b={b:g}: relative error at n={IDENTITY_SPANS[-1]} is {err:.3e}")
    text = t.text()
    return {"identity.csv": text}, summary


def _write_outputs(outdir, files):
    os.makedirs(outdir, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(outdir, name)))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def build_parser():
    p = argparse.ArgumentParser(prog="isrsnli",
                                description="Format-aware NLI estimates for ISRS-impaired links.")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--spans", type=int, help="override the span count")
    p.add_argument("--tier", action="append", choices=TIERS,
                   help="evaluation tier (repeat for validate)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--epsilon", type=float, help="override the SPM coherence exponent")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.spans is not None and args.spans < 1:
            raise IsrsNliError("--spans must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise IsrsNliError("--seed must be an unsigned 64-bit integer")
        cfg = _apply_overrides(load_config(args.config), args)
        summary = []
        if args.command == "estimate":
            files = _estimate(cfg, args)
        elif args.command == "validate":
            files = _validate(cfg, args)
        elif args.command == "simulate":
            files = _simulate(cfg, args)
        elif args.command == "sweep":
            files = _sweep(cfg, args)
        else:
            files, summary = _identity(cfg, args)
        _write_outputs(args.out, files)
    except (IsrsNliError, ValueError, OSError) as exc:
        print(f"isrsnli: error: {exc}", file=sys.stderr)
        return 2
    for line in summary:
        print(line)
    for name in sorted(files):
        print(os.path.join(args.out, name))
    return 0


if __name__ == "__main__":
    sys.exit(main())
