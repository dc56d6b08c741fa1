"""Independent brute-force oracles shared by the unit and acceptance tests.

These deliberately avoid the library's inference code paths: expectations are
computed from first principles (edge-factorized weights over full
enumerations) so that agreement with the package is evidence, not tautology.
"""

import numpy as np

from condphase import crf


def exact_mu_nu_difference(params, window, x, obs, f_sites, f_tables):
    """|mu(f) - nu(f)| where mu conditions on (time-0 row, observations) and
    nu on observations alone, by enumerating every window configuration."""
    n = len(window.all_sites)
    states = np.arange(1 << n, dtype=np.int64)
    spins = 1 - 2 * ((states[:, None] >> np.arange(n)) & 1)
    energy = np.zeros(len(states))
    for e, (q, r) in enumerate(window.edges):
        energy += (
            obs.values[e]
            * spins[:, window.site_index[q]]
            * spins[:, window.site_index[r]]
        )
    w = np.exp(params.beta * (energy - energy.max()))
    f_vals = np.ones(len(states))
    for site, table in zip(f_sites, f_tables):
        col = spins[:, window.site_index[site]]
        f_vals *= np.where(col == 1, table[0], table[1])
    mask = np.ones(len(states), dtype=bool)
    for site in window.boundary_sites:
        if site[0] == 0:
            mask &= spins[:, window.site_index[site]] == x.value_at(site)
    mu = float(np.dot(w[mask], f_vals[mask]) / w[mask].sum())
    nu = float(np.dot(w, f_vals) / w.sum())
    return abs(mu - nu)


def compose_kernels_discrepancy(spec, volume, inner, bc):
    """Entrywise discrepancy of gamma_V gamma_W against gamma_V from a fixed
    outside configuration (the defining consistency of a specification)."""
    base = np.zeros(spec.box.n_sites, dtype=np.int64)
    gv = crf.gamma_dense(spec, volume, base, bc)
    nv = len(volume)
    comp = np.zeros_like(gv)
    for zstate in range(1 << nv):
        zbits = base.copy()
        for pos, i in enumerate(volume):
            zbits[i] = (zstate >> pos) & 1
        gw = crf.gamma_dense(spec, inner, zbits, bc)
        for wstate in range(1 << len(inner)):
            nb = zbits.copy()
            for pos, i in enumerate(inner):
                nb[i] = (wstate >> pos) & 1
            tgt = 0
            for pos, i in enumerate(volume):
                tgt |= int(nb[i]) << pos
            comp[tgt] += gv[zstate] * gw[wstate]
    return float(np.abs(comp - gv).max())
