"""Run configuration: an INI file with a fixed set of sections and keys.

Unknown sections or keys are errors. Relative paths resolve against the
directory containing the config file.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


def _int(lo=None, hi=None):
    def conv(v):
        x = int(v)
        if lo is not None and x < lo:
            raise ValueError(f"must be >= {lo}")
        if hi is not None and x > hi:
            raise ValueError(f"must be <= {hi}")
        return x
    return conv


def _float(lo=None, hi=None, open_lo=False, open_hi=False):
    def conv(v):
        x = float(v)
        if lo is not None and (x < lo or (open_lo and x == lo)):
            raise ValueError(f"must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and (x > hi or (open_hi and x == hi)):
            raise ValueError(f"must be {'<' if open_hi else '<='} {hi}")
        return x
    return conv


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return conv


def _widths(v):
    out = tuple(int(t) for t in v.replace(" ", "").split(",") if t)
    if not out or any(w < 1 for w in out):
        raise ValueError("must be a comma-separated list of positive integers")
    return out


def _names(v):
    return tuple(t.strip() for t in v.split(",") if t.strip())


def _bool(v):
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


_PATH = "path"
_ACT = _choice("softplus", "prelu", "identity")

SCHEMA = {
    "data": {
        "benchmark": (_choice("algebraic", "synthetic_flow", "none"), "algebraic"),
        "coords": (_PATH, None), "params": (_PATH, None), "values": (_PATH, None),
        "test_params": (_PATH, None), "test_values": (_PATH, None),
        "n_spatial": (_int(2), 500), "n_lhs": (_int(0), 36), "test_grid": (_int(1), 20),
        "flow_side": (_int(2), 40), "n_train": (_int(1), 20), "n_test": (_int(1), 500),
        "seed": (_int(), 0),
    },
    "pod": {
        "energy": (_float(0, 1, open_lo=True, open_hi=True), 0.99), "rank": (_int(1), None),
        "energy_power": (_int(1, 2), 2),
    },
    "rbf": {
        "kernel": (_choice("thin_plate", "gaussian", "multiquadric"), "thin_plate"),
        "shape": (_float(0, open_lo=True), 1.0), "smoothing": (_float(0), 0.0),
    },
    "sensors": {
        "count": (_int(1), 5), "rank": (_int(1), 10),
        "underdetermined": (_choice("truncate", "min_norm"), "truncate"),
    },
    "net": {
        "branch_hidden": (_widths, (30, 30)), "trunk_hidden": (_widths, (30, 30)),
        "latent_dim": (_int(1), 30), "branch_activation": (_ACT, "softplus"),
        "trunk_activation": (_ACT, "softplus"), "normalize": (_bool, True),
    },
    "train": {
        "epochs": (_int(1), 10000), "learning_rate": (_float(0), 0.005),
        "l2_weight": (_float(0), 1e-4), "seed": (_int(), 0),
    },
    "model": {
        "low_fidelity": (_choice("pod_rbf", "gappy"), "pod_rbf"),
        "method": (_choice("mfdeeponet", "deeponet", "lf"), "mfdeeponet"),
    },
    "evaluate": {"methods": (_names, None), "label": (str, "")},
    "output": {"dir": (_PATH, "out")},
}


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)
    source: Path | None = None

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]


def defaults() -> RunConfig:
    return RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def load_config(path=None, text: str | None = None, check_paths: bool = True) -> RunConfig:
    """Parse and validate a config file (or ``text``); missing keys get defaults."""
    cfg = defaults()
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"{path}: config file not found")
        text = path.read_text()
        base = path.resolve().parent
        cfg.source = path
    if text is None:
        text = ""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    name = str(path) if path is not None else "<config>"
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{name}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{name}: unknown key '{key}' in [{section}]")
            conv = SCHEMA[section][key][0]
            if conv == _PATH:
                value = (base / raw).resolve() if raw else None
                if value is not None and check_paths and section == "data" and not value.exists():
                    raise ConfigError(f"{name}: [{section}] {key} = {raw}: file not found")
            else:
                try:
                    value = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{name}: [{section}] {key} = {raw!r}: {exc}") from None
            cfg.sections[section][key] = value
    return cfg
