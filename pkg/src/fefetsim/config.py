"""Memory configuration and TOML experiment files."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .device import DeviceParams
from .programming import (
    EnergyModel,
    SinglePulseScheme,
    WriteVerifyScheme,
    calibrate_single_pulse,
)
from .sensing import AdcConfig, target_levels

SCHEMES = ("single", "verify")


class ConfigError(ValueError):
    pass


@lru_cache(maxsize=256)
def _calibrated(params: DeviceParams, adc: AdcConfig, duration: float) -> SinglePulseScheme:
    return calibrate_single_pulse(params.nominal(), target_levels(adc), duration)


@dataclass(frozen=True)
class MemConfig:
    """Everything needed to store and read back one cell: device, ADC and write scheme."""

    device: DeviceParams = DeviceParams()
    adc: AdcConfig = AdcConfig()
    scheme_name: str = "verify"
    verify: WriteVerifyScheme = WriteVerifyScheme()
    single_pulse_duration: float = 100e-9
    energy: EnergyModel = EnergyModel()

    def __post_init__(self):
        if self.scheme_name not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme_name!r}")
        if (self.device.i_low, self.device.i_high) != (self.adc.i_low, self.adc.i_high):
            raise ConfigError("device and adc current ranges disagree")

    @property
    def scheme(self):
        if self.scheme_name == "verify":
            return self.verify
        return _calibrated(self.device, self.adc, self.single_pulse_duration)

    def with_(self, n_domains=None, bits_per_cell=None, scheme=None) -> "MemConfig":
        m = self
        if n_domains is not None:
            m = replace(m, device=replace(m.device, n_domains=n_domains))
        if bits_per_cell is not None:
            m = replace(m, adc=replace(m.adc, bits_per_cell=bits_per_cell))
        if scheme is not None:
            m = replace(m, scheme_name=scheme)
        return m

    def zero_variance(self) -> "MemConfig":
        return replace(self, device=self.device.nominal(), adc=replace(self.adc, sigma_rel=0.0))


# --- experiment files --------------------------------------------------------

_DEVICE_KEYS = {
    "n_domains": "n_domains",
    "vc_median": "vc_median",
    "vc_sigma_ln": "vc_sigma_ln",
    "tau0": "tau0",
    "alpha": "alpha",
    "beta": "beta",
    "i_low_ua": "i_low",
    "i_high_ua": "i_high",
    "stochastic": "stochastic",
}
_ADC_KEYS = {
    "bits_per_cell": "bits_per_cell",
    "i_low_ua": "i_low",
    "i_high_ua": "i_high",
    "sigma_rel": "sigma_rel",
    "n_instances": "n_instances",
}
_PROGRAM_KEYS = {"scheme", "v_set", "v_soft_reset", "pulse_ns", "max_soft_resets",
                 "max_total_pulses", "window_frac", "t_verify_ns", "single_pulse_ns"}
_ARRAY_KEYS = {"capacity_mb", "word_width", "layout_factor", "opt", "subarray_rows",
               "subarray_cols", "n_banks"}
_WORKLOAD_KEYS = {"kind", "graph", "directed", "n_queries", "replicates", "epsilon",
                  "domain_grid", "n_nodes", "edge_prob", "n_classes", "dim", "n_train",
                  "n_test", "ridge_lambda", "tensor"}
_TOP_KEYS = {"master_seed", "samples", "replicates", "threads"}
_SECTIONS = {"device", "adc", "program", "array", "workload"}


def _check_keys(section: str, got: dict, allowed) -> None:
    unknown = set(got) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


@dataclass
class ExperimentConfig:
    mem: MemConfig = field(default_factory=MemConfig)
    array: dict = field(default_factory=dict)
    workload: dict = field(default_factory=dict)
    master_seed: int = 0
    samples: int = 10_000
    replicates: int = 3
    threads: int | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
        sections = {k: v for k, v in raw.items() if isinstance(v, dict)}
        _check_keys("top level", top, _TOP_KEYS)
        unknown = set(sections) - _SECTIONS
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
        dev_raw = sections.get("device", {})
        adc_raw = sections.get("adc", {})
        prog = sections.get("program", {})
        _check_keys("device", dev_raw, _DEVICE_KEYS)
        _check_keys("adc", adc_raw, _ADC_KEYS)
        _check_keys("program", prog, _PROGRAM_KEYS)
        _check_keys("array", sections.get("array", {}), _ARRAY_KEYS)
        _check_keys("workload", sections.get("workload", {}), _WORKLOAD_KEYS)

        # the current range is shared; either section may set it
        for key in ("i_low_ua", "i_high_ua"):
            if key in dev_raw and key in adc_raw and dev_raw[key] != adc_raw[key]:
                raise ConfigError(f"[device].{key} and [adc].{key} disagree")
            if key in dev_raw or key in adc_raw:
                dev_raw = {**dev_raw, key: dev_raw.get(key, adc_raw.get(key))}
                adc_raw = {**adc_raw, key: dev_raw[key]}
        try:
            device = DeviceParams(**{_DEVICE_KEYS[k]: v for k, v in dev_raw.items()})
            adc = AdcConfig(**{_ADC_KEYS[k]: v for k, v in adc_raw.items()})
            verify_kw = {}
            for k in ("v_set", "v_soft_reset", "max_soft_resets", "max_total_pulses",
                      "window_frac"):
                if k in prog:
                    verify_kw[k] = prog[k]
            if "pulse_ns" in prog:
                verify_kw["pulse_duration"] = prog["pulse_ns"] / 1e9
            if "t_verify_ns" in prog:
                verify_kw["t_verify"] = prog["t_verify_ns"] / 1e9
            mem_kw = {}
            if "single_pulse_ns" in prog:
                mem_kw["single_pulse_duration"] = prog["single_pulse_ns"] / 1e9
            mem = MemConfig(
                device=device,
                adc=adc,
                scheme_name=prog.get("scheme", "verify"),
                verify=WriteVerifyScheme(**verify_kw),
                **mem_kw,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            mem=mem,
            array=dict(sections.get("array", {})),
            workload=dict(sections.get("workload", {})),
            master_seed=int(top.get("master_seed", 0)),
            samples=int(top.get("samples", 10_000)),
            replicates=int(top.get("replicates", 3)),
            threads=top.get("threads"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(raw)
