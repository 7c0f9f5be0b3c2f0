"""The spectrum, sweep and evolve experiments as table-producing functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import BathParams
from .config import RunConfig
from .eigensolver import complete_clusters, lowest, overlaps
from .master import assemble_rates, escape_rate, evolve, initial_state, stationary
from .pauli import build_coupling, build_down_hamiltonian, build_source_hamiltonian
from .tomography import (SweepSpec, TomographyGrid, coupler_for_kink, direct_amplitudes,
                         extract_peaks, grid_fidelities, reconstruct_amplitudes, run_sweep)


@dataclass
class CommandResult:
    tables: dict[str, tuple[list[str], list[list]]]
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def bath_notes(bath: BathParams) -> list[str]:
    return [f"bath mode={bath.mode} W_ghz={bath.W!r} eps_p_ghz={bath.eps_p!r} T_ghz={bath.T!r} "
            f"eta={bath.eta!r} omega_c_ghz={bath.omega_c!r}"]


def spectrum(cfg: RunConfig) -> CommandResult:
    h_s = build_source_hamiltonian(cfg.model.build())
    ex = cfg.experiment
    es = lowest(h_s, min(ex.k, h_s.dim), tol=ex.tol, seed=ex.seed, solver=ex.solver)
    e0 = es.values[0]
    rows = [[n, e, e - e0, r] for n, (e, r) in enumerate(zip(es.values, es.residuals))]
    return CommandResult({"spectrum": (["n", "energy_ghz", "excitation_ghz", "residual"], rows)},
                         extra={"eigenset": es})


def sweep_spec(cfg: RunConfig, threads: int = 1) -> SweepSpec:
    ex, pr = cfg.experiment, cfg.probe
    eps = None if pr.epsilon == "auto" else (pr.epsilon.start, pr.epsilon.stop, pr.epsilon.step)
    ls = None if ex.l == "all" else tuple(ex.l)
    return SweepSpec(j_p=pr.j_p, delta_p=pr.delta_p, ls=ls, n_levels=ex.n_levels, k=ex.k, eps=eps,
                     axis=pr.epsilon_axis, mode=ex.rate_mode, solver=ex.solver, tol=ex.tol,
                     seed=ex.seed, threads=threads)


def sweep(cfg: RunConfig, threads: int = 1) -> CommandResult:
    bath = cfg.bath.build()
    model = cfg.model.build()
    grid = run_sweep(model, sweep_spec(cfg, threads), bath)
    tables = {}
    norm = grid.normalized
    rows = []
    for j, col in enumerate(grid.columns):
        for i in range(len(col.eps)):
            rows.append([col.l, col.eps[i], col.eps_rel[i], col.gamma[i],
                         norm[j, i] if cfg.output.normalize else None])
    tables["grid"] = (["l", "epsilon_ghz", "epsilon_rel_ghz", "gamma_over_deltap_sq", "gamma_normalized"], rows)
    tables["references"] = (
        ["l", "fidelity", "gap_ghz", "e0_down_ghz", "flagged", "reasons"],
        [[c.l, c.reference.fidelity, c.reference.gap, c.e0_down, c.reference.flagged,
          "; ".join(c.reference.reasons)] for c in grid.columns])
    e0 = grid.level_energies[0]
    tables["levels"] = (["n", "energy_ghz", "excitation_ghz", "multiplicity"],
                        [[n, e, e - e0, len(g)] for n, (e, g) in
                         enumerate(zip(grid.level_energies, grid.level_groups))])
    result = CommandResult(tables, notes=bath_notes(bath) + [f"warning {w}" for w in grid.warnings],
                           extra={"grid": grid})
    if cfg.experiment.peaks:
        _peak_tables(grid, model.n_qubits, result)
    return result


def _peak_tables(grid: TomographyGrid, n_qubits: int, result: CommandResult):
    peaks = extract_peaks(grid)
    fid = grid_fidelities(grid)
    amps = reconstruct_amplitudes(peaks, fid)
    direct = direct_amplitudes(grid.up, grid.level_groups, n_qubits, grid.ls)
    prow = []
    for p in sorted(peaks.peaks + peaks.unmatched, key=lambda p: (p.l, p.eps)):
        prow.append([p.l, p.level, p.eps, p.eps_rel, p.height, p.width, p.detected,
                     " ".join(map(str, p.merged))])
    result.tables["peaks"] = (["l", "n", "epsilon_ghz", "epsilon_rel_ghz", "height", "width_ghz",
                               "detected", "merged_levels"], prow)
    arow = []
    for n in range(grid.n_levels):
        for j, col in enumerate(grid.columns):
            arow.append([n, col.l, peaks.positions[n, j], peaks.positions_rel[n, j], peaks.heights[n, j],
                         bool(peaks.detected[n, j]), amps.raw[n, j], amps.correction[j], amps.values[n, j],
                         direct[n, j], col.level_overlaps[n]])
    result.tables["amplitudes"] = (
        ["n", "l", "epsilon_ghz", "epsilon_rel_ghz", "peak_height", "detected", "amplitude_sq_raw",
         "fidelity_correction", "amplitude_sq", "direct_sq", "reference_overlap_sq"], arow)
    result.extra.update(peaks=peaks, amplitudes=amps, direct=direct)


def evolve_command(cfg: RunConfig) -> CommandResult:
    ex, ev, pr = cfg.experiment, cfg.experiment.evolve, cfg.probe
    bath = cfg.bath.build()
    model = cfg.model.build()
    h_s = build_source_hamiltonian(model)
    up = complete_clusters(lowest(h_s, min(ex.k, h_s.dim), tol=ex.tol, seed=ex.seed, solver=ex.solver), h_s.dim)
    pc = coupler_for_kink(model.n_qubits, ev.l, pr.j_p, pr.delta_p)
    h_down = build_down_hamiltonian(h_s, build_coupling(pc))
    down = lowest(h_down, min(ev.n_down, h_down.dim), tol=ex.tol, seed=ex.seed, solver=ex.solver)
    eps = up.values[0] - down.values[0] + bath.eps_p + ev.epsilon_rel
    rm = assemble_rates(up, down, overlaps(up, down), eps, bath, ex.rate_mode, delta_p=pr.delta_p)
    g0 = escape_rate(rm, 0)
    if ev.t_max_ns is not None:
        t_max = ev.t_max_ns
    elif g0 > 0:
        t_max = ev.t_max_escape / g0
    else:
        t_max = 1.0
    t_grid = np.linspace(0.0, t_max, ev.n_times)
    traj = evolve(rm, initial_state(rm, 0), t_grid)
    cols = ["t_ns"] + [f"p_down_{m}" for m in range(rm.n_down)] + [f"p_up_{n}" for n in range(rm.n_up)]
    rows = [[s.t, *s.p] for s in traj]
    notes = bath_notes(bath) + [f"epsilon_ghz={eps!r} gamma0_per_ns={g0!r} l={ev.l}",
                                "stationary " + " ".join(repr(float(x)) for x in stationary(rm))]
    return CommandResult({"trajectory": (cols, rows)}, notes,
                         extra={"rates": rm, "trajectory": traj, "gamma0": g0, "eps": eps})


COMMANDS = {"spectrum": spectrum, "sweep": sweep, "evolve": evolve_command}
