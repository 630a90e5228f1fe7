"""Batch command-line front end.

Run configurations are INI files::

    [run]
    scenario = phase_noise
    output = results/phase_noise      ; optional

    [parameters]
    gamma_p = 1.5                     ; any keyword of the scenario

    [grid]
    n_steps = 1280                    ; optional grid settings

Values are Python literals (numbers, tuples, booleans); anything that does
not parse as a literal is kept as a string. Unknown sections or keys are
rejected. Every run writes ``config.resolved.ini`` with all defaults filled.
"""
import argparse
import ast
import configparser
from dataclasses import dataclass, field
import inspect
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import correlations as co
from . import pulses as pu
from . import scenarios as sc
from .errors import ConfigError, NumericalInstabilityError, PulseCascadeError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
GRID_KEYS = ("t_end", "n_steps", "kernel_points", "samples_per_time")
RUN_KEYS = ("scenario", "output")


@dataclass
class RunConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    output: str = None

    def resolved(self):
        """Every keyword the scenario will receive, defaults included."""
        out = scenario_defaults(self.scenario)
        out.update(self.parameters)
        out.update(self.grid)
        return out


def scenario_defaults(name):
    sig = inspect.signature(sc.SCENARIOS[name])
    return {k: p.default for k, p in sig.parameters.items()
            if k not in ("strict", "jobs")}


def _literal(raw):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()


def _coerce(key, value, default):
    """Match the type of the scenario default; ints are accepted for floats."""
    if default is None:
        return value
    if isinstance(default, str):
        if isinstance(value, str) or (key == "input_state" and isinstance(value, (tuple, list))):
            return value
        raise ConfigError(f"{key} must be a string, got {value!r}", key=key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}", key=key)
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}", key=key)
        if isinstance(default, int) and not isinstance(default, bool):
            if float(value) != int(value):
                raise ConfigError(f"{key} must be an integer, got {value!r}", key=key)
            return int(value)
        return float(value)
    if isinstance(default, tuple):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (float(value),)
        if not isinstance(value, (tuple, list)):
            raise ConfigError(f"{key} must be a number or a tuple, got {value!r}", key=key)
        return tuple(float(v) for v in value)
    return value


_POSITIVE = ("gamma", "tau", "kappa", "kappa_prime", "K", "t_end", "n_steps", "kernel_points",
             "samples_per_time", "amplitude", "bandwidth", "order")
_NONNEG = ("gamma_p", "gamma_phase", "flux", "g", "omega12")


def _validate_values(values):
    for key, v in values.items():
        vals = v if isinstance(v, tuple) else (v,)
        for x in vals:
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                continue
            if key in _POSITIVE and not x > 0:
                raise ConfigError(f"{key} must be positive, got {x}", key=key)
            if key in _NONNEG and x < 0:
                raise ConfigError(f"{key} must be nonnegative, got {x}", key=key)


def parse_config(path):
    """Read and validate a run configuration file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_parser(cp, path)


def config_from_parser(cp, source="<config>"):
    unknown = set(cp.sections()) - {"run", "parameters", "grid"}
    if unknown:
        raise ConfigError(f"{source}: unknown section [{sorted(unknown)[0]}]",
                          key=sorted(unknown)[0])
    if not cp.has_section("run") or "scenario" not in cp["run"]:
        raise ConfigError(f"{source}: [run] needs a 'scenario' key", key="scenario")
    run = dict(cp["run"])
    for key in run:
        if key not in RUN_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r} in [run]", key=key)
    name = run["scenario"].strip()
    if name not in sc.SCENARIOS:
        raise ConfigError(f"{source}: unknown scenario {name!r}", key="scenario")
    defaults = scenario_defaults(name)
    parsed = {}
    for section in ("parameters", "grid"):
        parsed[section] = {}
        if not cp.has_section(section):
            continue
        for key, raw in cp[section].items():
            if key not in defaults or (section == "grid") != (key in GRID_KEYS):
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}] for scenario "
                                  f"{name!r}", key=key)
            parsed[section][key] = _coerce(key, _literal(raw), defaults[key])
    _validate_values({**parsed["parameters"], **parsed["grid"]})
    return RunConfig(name, parsed["parameters"], parsed["grid"], run.get("output") or None)


def write_resolved(config, path):
    """Echo of the fully resolved configuration; it parses back to an equivalent config."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {"scenario": config.scenario}
    if config.output:
        cp["run"]["output"] = config.output
    values = config.resolved()
    cp["parameters"] = {k: repr(v) for k, v in values.items() if k not in GRID_KEYS}
    grid = {k: repr(v) for k, v in values.items() if k in GRID_KEYS}
    if grid:
        cp["grid"] = grid
    with open(path, "w") as fh:
        fh.write("# fully resolved run configuration\n")
        cp.write(fh)


def _run(args):
    config = parse_config(args.config)
    if args.grid_steps is not None:
        if "n_steps" not in scenario_defaults(config.scenario):
            raise ConfigError(f"scenario {config.scenario!r} has no n_steps", key="n_steps")
        if args.grid_steps <= 0 or args.grid_steps % 2:
            raise ConfigError(f"--grid-steps must be a positive even number, got "
                              f"{args.grid_steps}", key="n_steps")
        config.grid["n_steps"] = args.grid_steps
    outdir = args.output or config.output or os.path.join("results", config.scenario)
    kwargs = config.resolved()
    kwargs["strict"] = args.strict
    if config.scenario == "blockade":
        kwargs["jobs"] = args.jobs
    log.info("running %s into %s", config.scenario, outdir)
    with warnings.catch_warnings():
        if args.strict:
            warnings.simplefilter("error")
        result = sc.SCENARIOS[config.scenario](**kwargs)
    os.makedirs(outdir, exist_ok=True)
    write_resolved(config, os.path.join(outdir, "config.resolved.ini"))
    result.write(outdir)
    _report(result, outdir)
    return EXIT_OK if result.passed else EXIT_VALIDATION


def _report(result, outdir):
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'} "
          f"({result.runtime:.1f} s) -> {outdir}")
    for name, m in result.metrics.items():
        status = "" if m.passed is None else ("pass" if m.passed else "FAIL")
        v = complex(m.value)
        val = f"{v.real:.6g}" if v.imag == 0 else f"{v:.6g}"
        print(f"  {name:<40s} {val:>14s}  {status}")
    for w in result.warnings:
        print(f"  warning: {w}")


def _list(args):
    for name, desc in sc.DESCRIPTIONS.items():
        print(f"{name:<12s} {desc}")
    return EXIT_OK


def _decompose(args):
    kernel = co.load_kernel_csv(args.kernel)
    spectrum = co.decompose(kernel, min(args.modes, len(kernel.times)))
    print("index,occupation")
    for i, n in enumerate(spectrum.occupations):
        print(f"{i + 1},{float(n)!r}")
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        co.save_spectrum(spectrum, os.path.join(args.output, "occupations.csv"),
                         os.path.join(args.output, "modes.csv"))
    return EXIT_OK


def _couplings(args):
    raw = np.loadtxt(args.mode, delimiter=",", skiprows=1, ndmin=2)
    mode = pu.load_mode_csv(args.mode)
    norm = float(np.sqrt(pu._norm2(mode.grid, raw[:, 1] + 1j * raw[:, 2])))
    if abs(norm - 1) > 1e-3:
        log.warning("%s: mode norm is %.6g, rescaled to 1", args.mode, norm)
    g = pu.coupling_in(mode) if args.direction == "in" else pu.coupling_out(mode)
    if args.output:
        pu.save_coupling_csv(g, args.output)
    else:
        print("t,re,im,valid")
        for t, z, ok in zip(g.grid.times, g.samples, g.valid_mask):
            print(f"{float(t)!r},{float(z.real)!r},{float(z.imag)!r},{int(ok)}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="pulsecascade",
                                description="Cascaded master-equation simulations of "
                                            "travelling quantum pulses.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario configuration file")
    r.add_argument("config")
    r.add_argument("--output", help="result directory (overrides the config)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    r.add_argument("--grid-steps", type=int, help="override the number of grid steps")
    r.add_argument("--strict", action="store_true", help="promote warnings to errors")
    r.set_defaults(func=_run)

    sub.add_parser("list-scenarios", help="list the built-in scenarios").set_defaults(func=_list)

    d = sub.add_parser("decompose", help="eigenmodes of an exported kernel CSV")
    d.add_argument("kernel")
    d.add_argument("--modes", type=int, default=10)
    d.add_argument("--output", help="directory for occupations.csv and modes.csv")
    d.set_defaults(func=_decompose)

    c = sub.add_parser("couplings", help="virtual-cavity coupling of a mode CSV")
    c.add_argument("mode")
    c.add_argument("--direction", choices=("in", "out"), required=True)
    c.add_argument("--output", help="CSV path (stdout by default)")
    c.set_defaults(func=_couplings)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except NumericalInstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (RuntimeWarning, UserWarning) as exc:
        # only reachable with --strict
        print(f"numerical failure (strict): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PulseCascadeError, ValueError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
