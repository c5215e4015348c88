"""Run configuration: flat sectioned key-value text, strictly validated.

Grammar: INI-style sections of `key = value` lines, `#` comments.  Every
section and key must appear in the schema below; unknown names are
rejected so typos in physics parameters fail loudly instead of being
ignored.  Which sections a run needs depends on the subcommand; a
missing required section is a configuration error.

    [spin]      h1z h2z h1x h2x j s1 dmin1        gadget coefficients, GHz
    [waveform]  s_min t_ramp t_hold               gate excursion (ns)
    [gate]      t_f restarts                      optimizer budget (ns)
    [sweep]     s_points tf_min tf_max tf_points trace_points
    [circuit]   ec1 el1 ej1 ec2 el2 ej2 m_scale n_levels samples
    [run]       out_dir seed
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from fluxgate.spin_model import SpinParams
from fluxgate.gate import GateWaveform
from fluxgate.circuit import CircuitParams


class ConfigError(Exception):
    """Malformed, unknown, or missing configuration content."""


_SCHEMA = {
    "spin": {"h1z": float, "h2z": float, "h1x": float, "h2x": float,
             "j": float, "s1": float, "dmin1": float},
    "waveform": {"s_min": float, "t_ramp": float, "t_hold": float},
    "gate": {"t_f": float, "restarts": int},
    "sweep": {"s_points": int, "tf_min": float, "tf_max": float,
              "tf_points": int, "trace_points": int},
    "circuit": {"ec1": float, "el1": float, "ej1": float,
                "ec2": float, "el2": float, "ej2": float,
                "m_scale": float, "n_levels": int, "samples": int},
    "run": {"out_dir": str, "seed": int},
}


@dataclass
class RunConfig:
    """Parsed configuration; sections absent from the file are None."""

    sections: dict
    path: str

    def has(self, name):
        return name in self.sections

    def require(self, *names):
        missing = [n for n in names if n not in self.sections]
        if missing:
            raise ConfigError(
                f"{self.path}: missing required section(s) "
                + ", ".join(f"[{n}]" for n in missing))

    def get(self, section, key, default=None):
        if section in self.sections and key in self.sections[section]:
            return self.sections[section][key]
        return default

    def spin_params(self) -> SpinParams:
        self.require("spin")
        s = self.sections["spin"]
        return SpinParams(h1z=s["h1z"], h2z=s["h2z"], h1x=s["h1x"],
                          h2x=s["h2x"], J=s["j"], s1=s["s1"],
                          dmin1=s["dmin1"])

    def waveform(self) -> GateWaveform:
        self.require("waveform")
        w = self.sections["waveform"]
        return GateWaveform(s_min=w["s_min"], t_ramp=w["t_ramp"],
                            t_hold=w["t_hold"])

    def circuit_params(self) -> CircuitParams:
        self.require("circuit")
        c = self.sections["circuit"]
        return CircuitParams(ec1=c["ec1"], el1=c["el1"], ej1=c["ej1"],
                             ec2=c["ec2"], el2=c["el2"], ej2=c["ej2"],
                             m_scale=c["m_scale"],
                             n_levels=c["n_levels"])


def load_config(path: str) -> RunConfig:
    """Parse and validate a configuration file (strict schema)."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",),
        inline_comment_prefixes=("#",), strict=True,
        default_section="__defaults__")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    sections = {}
    for name in parser.sections():
        if name not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{name}]")
        out = {}
        for key, raw in parser.items(name):
            if key not in _SCHEMA[name]:
                raise ConfigError(
                    f"{path}: unknown key '{key}' in section [{name}]")
            typ = _SCHEMA[name][key]
            try:
                out[key] = typ(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: key '{key}' in [{name}]: cannot parse "
                    f"{raw!r} as {typ.__name__}") from exc
        sections[name] = out
    return RunConfig(sections=sections, path=path)
