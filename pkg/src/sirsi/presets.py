"""Fitted parameter sets for Santos, Campinas and Sao Paulo (March 2020 - March 2021).

Values are kept as the published decimal strings so they can be dumped
digit for digit.  Populations are not part of the fitted tables; they are
IBGE 2020 municipal estimates used only to convert fractions to counts.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import Params, State3

TABLE_FIELDS = ("mu", "gamma", "alpha", "theta", "beta1", "beta2", "beta3", "s0", "i0")

_TABLES = {
    "santos": {
        "mu": "0.000027", "gamma": "0.100000", "alpha": "0.775985", "theta": "0.415355",
        "beta1": "0.200000", "beta2": "0.200000", "beta3": "0.047847",
        "s0": "0.999754", "i0": "0.000246",
    },
    "campinas": {
        "mu": "0.000034", "gamma": "0.038255", "alpha": "0.776520", "theta": "0.414454",
        "beta1": "0.200000", "beta2": "0.200000", "beta3": "0.067000",
        "s0": "0.999883", "i0": "0.000117",
    },
    "saopaulo": {
        "mu": "0.000036", "gamma": "0.032774", "alpha": "0.811656", "theta": "0.444603",
        "beta1": "0.200000", "beta2": "0.200000", "beta3": "0.058792",
        "s0": "0.999800", "i0": "0.000200",
    },
}

_POPULATION = {"santos": 433_991, "campinas": 1_213_792, "saopaulo": 12_325_232}


@dataclass(frozen=True)
class CityPreset:
    name: str
    params: Params
    s0: float
    i0: float
    population: int
    table: dict

    @property
    def initial_state(self) -> State3:
        return State3(self.s0, self.i0, 0.0)


def names() -> list[str]:
    return list(_TABLES)


def get(name: str) -> CityPreset:
    key = name.lower().replace(" ", "").replace("_", "").replace("-", "")
    if key not in _TABLES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(_TABLES)}")
    table = _TABLES[key]
    values = {k: float(v) for k, v in table.items()}
    params = Params(
        mu=values["mu"], gamma=values["gamma"], alpha=values["alpha"], theta=values["theta"],
        beta1=values["beta1"], beta2=values["beta2"], beta3=values["beta3"], omega=0.0,
    )
    return CityPreset(key, params, values["s0"], values["i0"], _POPULATION[key], dict(table))


def dump(name: str) -> str:
    """JSON text of the nine published values, with the published digits."""
    table = get(name).table
    body = ",\n".join(f'  "{k}": {table[k]}' for k in TABLE_FIELDS)
    return "{\n" + body + "\n}\n"
