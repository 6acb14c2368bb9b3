"""Scenario configuration, INI round-trip, and operating-mode constants."""

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .phy import PowerConfig

SU = "su"
SU_AAUAV = "su_aauav"
MMIMO = "mmimo"
MMIMO_AAUAV = "mmimo_aauav"
MMIMO_NULLS = "mmimo_nulls"
MMIMO_GUESPLIT = "mmimo_guesplit"
ALL_MODES = (SU, SU_AAUAV, MMIMO, MMIMO_AAUAV, MMIMO_NULLS, MMIMO_GUESPLIT)

DIRECTIONS = ("dl", "ul")
COV_MODES = ("sample", "genie")


def mode_base(mode: str) -> str:
    return mode[:-len("_aauav")] if mode.endswith("_aauav") else mode


def mode_uses_aauav(mode: str) -> bool:
    return mode.endswith("_aauav")


def parse_height_spec(text: str):
    parts = text.split(":")
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return ("fixed", float(parts[1]))
        if parts[0] == "uniform" and len(parts) == 3:
            return ("uniform", float(parts[1]), float(parts[2]))
    except ValueError:
        pass
    raise ConfigError(f"bad uav_height value {text!r}, want fixed:H or uniform:LO:HI")


def format_height_spec(spec) -> str:
    return ":".join([spec[0]] + [repr(float(v)) for v in spec[1:]])


@dataclass(frozen=True)
class ScenarioConfig:
    master_seed: int = 1
    n_drops: int = 200
    direction: str = "dl"
    output_dir: str = "results"
    label: str = "custom"

    n_rings: int = 1
    isd_m: float = 500.0
    bs_height_m: float = 25.0

    n_gue: int = 14
    n_uav: int = 1
    uav_height_spec: tuple = ("fixed", 150.0)
    indoor_ratio: float = 0.8

    carrier_ghz: float = 2.0
    n_prb: int = 50
    power: PowerConfig = field(default_factory=PowerConfig)

    pilot_len: int = 8
    reuse_factor: int = 3
    n_nulls: int = 16
    n_cov_snapshots: int = 256
    cov_mode: str = "sample"
    leak_gate: float = 0.5

    modes: tuple = ALL_MODES
    # sweep points: ((token, ((field, value-string), ...)), ...); empty = single run
    sweep: tuple = ()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if self.master_seed < 0:
            bad("master_seed", "must be >= 0")
        if self.n_drops < 0:
            bad("n_drops", "must be >= 0")
        if self.direction not in DIRECTIONS:
            bad("direction", f"must be one of {DIRECTIONS}")
        if self.n_rings < 0:
            bad("n_rings", "must be >= 0")
        if self.isd_m <= 0:
            bad("isd_m", "must be positive")
        if not 1.0 < self.bs_height_m:
            bad("bs_height_m", "must exceed 1 m")
        if self.n_gue < 0 or self.n_uav < 0:
            bad("n_gue/n_uav", "must be >= 0")
        if self.n_gue + self.n_uav < 1:
            bad("n_gue/n_uav", "need at least one user per sector")
        spec = self.uav_height_spec
        if spec[0] == "fixed":
            hs = (spec[1], spec[1])
        elif spec[0] == "uniform":
            hs = (spec[1], spec[2])
            if spec[1] > spec[2]:
                bad("uav_height_spec", "uniform bounds reversed")
        else:
            bad("uav_height_spec", f"unknown kind {spec[0]!r}")
        if self.n_uav and not (1.5 <= hs[0] and hs[1] <= 300.0):
            bad("uav_height_spec", "heights must lie in [1.5, 300] m")
        if not 0.0 <= self.indoor_ratio <= 1.0:
            bad("indoor_ratio", "must lie in [0, 1]")
        if self.carrier_ghz <= 0:
            bad("carrier_ghz", "must be positive")
        if self.n_prb < 1:
            bad("n_prb", "must be >= 1")
        if self.pilot_len < 1:
            bad("pilot_len", "must be >= 1")
        if self.reuse_factor < 1:
            bad("reuse_factor", "must be >= 1")
        n_cells = 3 * (1 + 3 * self.n_rings * (self.n_rings + 1))
        if n_cells % self.reuse_factor:
            bad("reuse_factor", f"must divide the cell count {n_cells}")
        if not 0 <= self.n_nulls <= 128:
            bad("n_nulls", "must lie in [0, 128]")
        if self.n_cov_snapshots < 1:
            bad("n_cov_snapshots", "must be >= 1")
        if self.cov_mode not in COV_MODES:
            bad("cov_mode", f"must be one of {COV_MODES}")
        if not 0.0 <= self.leak_gate <= 1.0:
            bad("leak_gate", "must lie in [0, 1]")
        if not self.modes:
            bad("modes", "must list at least one mode")
        for m in self.modes:
            if m not in ALL_MODES:
                bad("modes", f"unknown mode {m!r}")
        if len(set(self.modes)) != len(self.modes):
            bad("modes", "duplicate mode")
        seen = set()
        for token, overrides in self.sweep:
            if not token or "/" in token or token in seen:
                bad("sweep", f"bad or duplicate token {token!r}")
            seen.add(token)
            for key, _ in overrides:
                if key not in _SWEEPABLE:
                    bad("sweep", f"field {key!r} cannot be swept")

    def sweep_points(self):
        """Resolved (scenario name, point config) pairs; the point configs
        carry no sweep of their own."""
        if not self.sweep:
            return [(self.label, replace(self))]
        out = []
        for token, overrides in self.sweep:
            cfg = replace(self, sweep=())
            for key, raw in overrides:
                cfg = replace(cfg, **{key: _SWEEPABLE[key](raw)})
            cfg.validate()
            out.append((f"{self.label}/{token}", cfg))
        return out


_SWEEPABLE = {
    "n_gue": int,
    "n_uav": int,
    "uav_height_spec": parse_height_spec,
}


def _modes_str(modes) -> str:
    return ",".join(modes)


def to_ini(cfg: ScenarioConfig) -> str:
    cp = configparser.ConfigParser()
    cp["run"] = {
        "master_seed": str(cfg.master_seed),
        "n_drops": str(cfg.n_drops),
        "direction": cfg.direction,
        "output_dir": cfg.output_dir,
        "label": cfg.label,
    }
    cp["layout"] = {
        "n_rings": str(cfg.n_rings),
        "isd_m": repr(cfg.isd_m),
        "bs_height_m": repr(cfg.bs_height_m),
    }
    cp["population"] = {
        "n_gue": str(cfg.n_gue),
        "n_uav": str(cfg.n_uav),
        "uav_height": format_height_spec(cfg.uav_height_spec),
        "indoor_ratio": repr(cfg.indoor_ratio),
    }
    cp["radio"] = {
        "carrier_ghz": repr(cfg.carrier_ghz),
        "n_prb": str(cfg.n_prb),
        "bs_total_dbm": repr(cfg.power.bs_total_dbm),
        "ue_pmax_dbm": repr(cfg.power.ue_pmax_dbm),
        "fpc_p0_dbm": repr(cfg.power.fpc_p0_dbm),
        "fpc_alpha": repr(cfg.power.fpc_alpha),
        "nf_bs_db": repr(cfg.power.nf_bs_db),
        "nf_ue_db": repr(cfg.power.nf_ue_db),
    }
    cp["csi"] = {
        "pilot_len": str(cfg.pilot_len),
        "reuse_factor": str(cfg.reuse_factor),
        "n_nulls": str(cfg.n_nulls),
        "n_cov_snapshots": str(cfg.n_cov_snapshots),
        "cov_mode": cfg.cov_mode,
        "leak_gate": repr(cfg.leak_gate),
    }
    cp["modes"] = {"enabled": _modes_str(cfg.modes)}
    for token, overrides in cfg.sweep:
        cp[f"sweep.{token}"] = {k: v for k, v in overrides}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    def get(section, key, cast, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return cast(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    base = ScenarioConfig()
    power = PowerConfig(
        bs_total_dbm=get("radio", "bs_total_dbm", float, base.power.bs_total_dbm),
        ue_pmax_dbm=get("radio", "ue_pmax_dbm", float, base.power.ue_pmax_dbm),
        fpc_p0_dbm=get("radio", "fpc_p0_dbm", float, base.power.fpc_p0_dbm),
        fpc_alpha=get("radio", "fpc_alpha", float, base.power.fpc_alpha),
        nf_bs_db=get("radio", "nf_bs_db", float, base.power.nf_bs_db),
        nf_ue_db=get("radio", "nf_ue_db", float, base.power.nf_ue_db),
    )
    sweep = []
    for section in cp.sections():
        if section.startswith("sweep."):
            token = section[len("sweep."):]
            sweep.append((token, tuple((k, cp.get(section, k)) for k in cp[section])))
    cfg = ScenarioConfig(
        master_seed=get("run", "master_seed", int, base.master_seed),
        n_drops=get("run", "n_drops", int, base.n_drops),
        direction=get("run", "direction", str, base.direction),
        output_dir=get("run", "output_dir", str, base.output_dir),
        label=get("run", "label", str, base.label),
        n_rings=get("layout", "n_rings", int, base.n_rings),
        isd_m=get("layout", "isd_m", float, base.isd_m),
        bs_height_m=get("layout", "bs_height_m", float, base.bs_height_m),
        n_gue=get("population", "n_gue", int, base.n_gue),
        n_uav=get("population", "n_uav", int, base.n_uav),
        uav_height_spec=get("population", "uav_height", parse_height_spec,
                            base.uav_height_spec),
        indoor_ratio=get("population", "indoor_ratio", float, base.indoor_ratio),
        carrier_ghz=get("radio", "carrier_ghz", float, base.carrier_ghz),
        n_prb=get("radio", "n_prb", int, base.n_prb),
        power=power,
        pilot_len=get("csi", "pilot_len", int, base.pilot_len),
        reuse_factor=get("csi", "reuse_factor", int, base.reuse_factor),
        n_nulls=get("csi", "n_nulls", int, base.n_nulls),
        n_cov_snapshots=get("csi", "n_cov_snapshots", int, base.n_cov_snapshots),
        cov_mode=get("csi", "cov_mode", str, base.cov_mode),
        leak_gate=get("csi", "leak_gate", float, base.leak_gate),
        modes=tuple(m.strip() for m in get("modes", "enabled", str,
                                           _modes_str(base.modes)).split(",") if m.strip()),
        sweep=tuple(sweep),
    )
    cfg.validate()
    return cfg


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_ini(text)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(to_ini(cfg).encode("utf-8")).hexdigest()[:16]
