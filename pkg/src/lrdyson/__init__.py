"""Exact linear density response and adiabatic Dyson equations on finite fermion lattices."""

from .analysis import PoleTable, PolarizabilitySeries, export_results, poles_chi0, poles_chiF, polarizability, stone_check
from .dyson import (CasidaOperator, StabilityReport, TimeGrid, casida_operator, chiF_freq, chiF_freq_direct,
                    chiF_time_sinc, m_operator, solve_dyson_time, stability_report)
from .errors import (ConfigError, DegenerateGroundState, LRDysonError, NonHermitian, PoleProximity,
                     SingularDielectric)
from .fock import build_hamiltonian, build_site_space, density_of, enumerate_basis, ground_state
from .kernels import (Kernel, Pw92Params, alda_kernel, bfb_operator, diagonal_kernel, fxc_heg,
                      one_body_density_matrix, pgg_kernel, rpa_kernel)
from .models import System, build_system, dark_ring, dimer, make_kernel, random_system
from .response import build_response_context, chi0_freq, chi0_time, single_particle_spectrum

__version__ = "0.1.0"
