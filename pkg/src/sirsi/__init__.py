"""SIRSi / SIRSi-Vaccine compartmental models: simulation, equilibria, fitting, sweeps."""
from .model import (Params, ParameterError, State3, State4, r0, rhs_sirsi_vaccine_3d,
                    rhs_sirsi_vaccine_4d)
from .odeint import IntegrationError, IntegratorConfig, ThetaSchedule, TimeSeries, integrate, steady_state
from .equilibria import EquilibriumReport, classify, disease_free_point, endemic_point, omega_threshold
from .fitting import CaseSeries, FitConfig, FitResult, fit_model
from .sweep import SweepGrid, run_sweep

__version__ = "0.1.0"
