"""Neumann eigenwavenumbers of the unit ball located by maximizing cond(A).

For the sphere the eigenwavenumbers of mode n = 1 are roots of j_l', with
l >= 1, so the search can be checked against a spherical-Bessel oracle.
"""

import numpy as np

from axisym_nystrom.assembly import Discretization, ModalSolution
from axisym_nystrom.eigen import find_eigenwavenumber
from axisym_nystrom.field import normalized_solution
from axisym_nystrom.geometry import sphere
from axisym_nystrom.oracles import sphere_bessel_reference, sphere_eigenfunction_profile

disc = Discretization.build(sphere(), 8, N_ratio=4.0)
for m in (1, 2, 3):
    ref = sphere_bessel_reference(1, m)
    res = find_eigenwavenumber(disc, 1, ref - 0.2, ref + 0.2)
    raw = ModalSolution(1, res.k, res.rho, np.zeros_like(res.rho), disc)
    _, ef = normalized_solution(raw)
    profile = sphere_eigenfunction_profile(res.k, disc.grid.nodes.t)
    print(f"m={m}: k = {res.k:.15f}  oracle {ref:.15f}  rel err {abs(res.k - ref) / ref:.1e}  "
          f"cond {res.cond:.1e}  max |u - u_exact| = {np.max(np.abs(ef.u - profile)):.1e}")
