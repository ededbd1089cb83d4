"""Command-line entry point: ``esqpt {stationary,density,flow,classify,report}``.

Settings come from built-in defaults, then an optional flat ``key = value``
config file, then command-line flags, later sources overriding earlier ones.
Hamiltonian lines (``variables``, ``dof``, ``param.X``, ``term``, ``block``,
``name``) in the config file define a custom model.

Exit codes: 0 success, 2 classification mismatch, 3 numerical-quality
failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import cuspmodel, flow, quantum, semiclassics, singularity, stationary
from .hamiltonian import HamiltonianSpec, harmonic, parse_config_lines, quartic_minimum, spec_from_text
from .io import config_hash, plot_curves, write_csv, write_json

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_QUALITY = 3

MODELS = ("cusp3", "cusp1", "harmonic", "quartic", "custom")
_SPEC_KEYS = ("name", "variables", "dof", "term", "block")
_RANGES = {"cusp3": (-4.7, 0.5), "cusp1": (-2.0, 1.0), "harmonic": (-0.5, 2.0),
           "quartic": (-0.25, 1.0)}


class OverlapWarning(UserWarning):
    """Another stationary energy lies inside a fit window."""


@dataclass
class RunConfig:
    """All settings of one run. Numeric fields must be positive where they
    are sizes, widths or counts."""

    seed: int | None = None
    model: str = "cusp3"
    A: tuple[float, ...] = cuspmodel.DEFAULT_A
    hbar: float = 0.05
    e_min: float | None = None
    e_max: float | None = None
    spacing: float = 0.0005
    samples: int = 10**7
    window: float | None = None
    fit_width: float = 5.0
    threads: int = 1
    out: str = "esqpt-out"
    box: float = 2.0
    basis: int = 200
    cutoff: float | None = None
    bins: int = 400
    quantum: bool = False
    parameter: str | None = None
    dlam: float = 1e-3
    flow_width: float = 0.05
    error_budget: float = 0.05
    hamiltonian_text: str = ""

    def validate(self) -> "RunConfig":
        if self.seed is None:
            raise ValueError("a seed is required (--seed or 'seed = N' in the config)")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.model == "custom" and not self.hamiltonian_text:
            raise ValueError("model 'custom' needs Hamiltonian lines in the config file")
        for name in ("hbar", "spacing", "samples", "fit_width", "threads", "box", "basis", "bins",
                     "dlam", "flow_width", "error_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.window is not None and not self.window >= self.spacing:
            raise ValueError("window must be at least the grid spacing")
        if self.e_min is not None and self.e_max is not None and not self.e_max > self.e_min:
            raise ValueError("e_max must exceed e_min")
        return self

    @property
    def smoothing(self) -> float:
        return 10.0 * self.spacing if self.window is None else self.window

    def digest(self) -> str:
        d = asdict(self)
        for k in ("out", "threads"):
            d.pop(k)
        return config_hash(d)


def _coerce(name: str, value: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if name == "A":
        return tuple(float(x) for x in value.replace(",", " ").split())
    if name == "quantum":
        return value.strip().lower() in ("1", "true", "yes", "on")
    if value.strip().lower() == "none":
        return None
    if "int" in str(kind):
        return int(float(value))
    if "float" in str(kind):
        return float(value)
    return value.strip()


def load_config(text: str) -> dict:
    """Parse a flat config document into RunConfig overrides."""
    kv = parse_config_lines(text)
    names = {f.name for f in fields(RunConfig)} - {"hamiltonian_text"}
    out: dict = {}
    spec_lines = []
    for key, values in kv.items():
        if key in names:
            out[key] = _coerce(key, values[-1])
        elif key in _SPEC_KEYS or key.startswith("param."):
            spec_lines += [f"{key} = {v}" for v in values]
        else:
            raise ValueError(f"unknown config key {key!r}")
    if spec_lines:
        out["hamiltonian_text"] = "\n".join(spec_lines) + "\n"
        out.setdefault("model", "custom")
    return out


# ---------------------------------------------------------------------------
# model and shared computations
# ---------------------------------------------------------------------------


def build_model(cfg: RunConfig) -> HamiltonianSpec:
    if cfg.model == "cusp3":
        return cuspmodel.build(cuspmodel.CuspParams(tuple(cfg.A)))
    if cfg.model == "cusp1":
        return cuspmodel.cusp_1d(cfg.A[0])
    if cfg.model == "harmonic":
        return harmonic(1, [1.0])
    if cfg.model == "quartic":
        return quartic_minimum()
    return spec_from_text(cfg.hamiltonian_text)


def find_points(cfg: RunConfig, h: HamiltonianSpec) -> tuple[list[stationary.StationaryPoint], list[str]]:
    """Stationary points plus human-readable warnings about the search box."""
    sc = stationary.SearchConfig(box=(-cfg.box, cfg.box))
    pts = stationary.find_stationary_points(h, sc)
    notes = []
    margin = 0.01 * 2 * cfg.box
    for p in pts:
        if np.any(np.abs(p.x) > cfg.box - margin):
            notes.append(f"stationary point at E={p.energy:.6g} lies at the search-box edge; "
                         "enlarge --box")
    if not pts:
        notes.append("no stationary point found inside the search box")
    return pts, notes


def energy_range(cfg: RunConfig, pts: Sequence[stationary.StationaryPoint]) -> tuple[float, float]:
    lo, hi = _RANGES.get(cfg.model, (None, None))
    if lo is None:
        es = [p.energy for p in pts] or [0.0]
        span = max(es) - min(es)
        lo = min(es) - 0.1 * span - 0.2
        hi = max(es) + 0.3 * span + 0.2
    lo = lo if cfg.e_min is None else cfg.e_min
    hi = hi if cfg.e_max is None else cfg.e_max
    return float(lo), float(hi)


def point_type(p: stationary.StationaryPoint, f: float) -> str:
    if p.degenerate:
        return "degenerate"
    if p.index_r == 0:
        return "min"
    return "max" if p.index_r == int(f) else "sad"


def _grid(lo: float, hi: float, h: float) -> np.ndarray:
    return lo + h * np.arange(int(math.floor((hi - lo) / h + 1e-9)) + 1)


def classical_density(cfg: RunConfig, h: HamiltonianSpec, lo: float, hi: float, *,
                      parameter: str | None = None) -> tuple[semiclassics.DensityCurve, list[str]]:
    """Scaled classical density ``dOmega/dE`` and quality notes."""
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        blocks = h.separable_blocks
        if blocks is not None and all(len(b) <= 3 for b in blocks):
            curve = semiclassics.separable_density(
                h, cfg.hbar, lo, hi, cfg.spacing, cfg.samples, cfg.seed, parameter=parameter,
                normalization=semiclassics.SCALED, threads=cfg.threads)
        else:
            if h.nvars <= 3:
                box = semiclassics.sublevel_box(h, hi + cfg.spacing)
            else:
                box = np.tile([-cfg.box, cfg.box], (h.nvars, 1))
            v = semiclassics.volume_mc(h, box, _grid(lo, hi, cfg.spacing), cfg.samples, cfg.seed,
                                       parameter=parameter, threads=cfg.threads)
            curve = semiclassics.density_from_volume(v, cfg.hbar, centering="cells",
                                                     normalization=semiclassics.SCALED)
    for w in caught:
        if issubclass(w.category, semiclassics.BoxTooSmallWarning):
            notes.append(f"box too small: {w.message}")
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if curve.mc_error is not None:
        big = curve.values > 0.01 * np.max(curve.values)
        if np.any(big):
            rel = float(np.median(curve.mc_error[big] / curve.values[big]))
            if rel > cfg.error_budget:
                notes.append(f"median relative MC error {rel:.3g} exceeds budget {cfg.error_budget}")
    return curve, notes


def _meta(cfg: RunConfig, command: str) -> dict:
    return {"esqpt": __version__, "command": command, "config": cfg.digest(), "seed": cfg.seed}


def _markers(pts) -> list[tuple[float, int]]:
    return [(p.energy, p.index_r) for p in pts]


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_stationary(cfg: RunConfig) -> int:
    """Stationary points with index and energy; CSV and JSON tables."""
    h = build_model(cfg)
    pts, notes = find_points(cfg, h)
    out = Path(cfg.out)
    meta = _meta(cfg, "stationary")
    cols = ["number", "energy", "r", "type", "degenerate"] + [f"x_{v}" for v in h.variables]
    rows = [[i + 1, p.energy, p.index_r, point_type(p, h.dof), int(p.degenerate), *p.x]
            for i, p in enumerate(pts)]
    write_csv(out / "stationary.csv", cols, rows, meta=meta)
    write_json(out / "stationary.json",
               {"points": [dict(zip(cols, r)) for r in rows],
                "histogram": stationary.index_histogram(pts), "warnings": notes}, meta=meta)
    for n in notes:
        _say(f"warning: {n}")
    hist = stationary.index_histogram(pts)
    print(f"{len(pts)} stationary points; index histogram {hist}")
    code = EXIT_OK
    if cfg.model == "cusp3" and tuple(cfg.A) == cuspmodel.DEFAULT_A:
        code = _diff_reference(pts)
    return code


def _diff_reference(pts) -> int:
    ref = cuspmodel.reference_table()
    print("diff against the reference table (number, E_ref, E_found, dE, r_ref, r_found):")
    bad = len(ref) != len(pts)
    for row, p in zip(ref, pts):
        dE = p.energy - row.energy
        flag = ""
        if abs(dE) > 0.005 or row.r != p.index_r:
            flag = "  <-- mismatch"
            bad = True
        print(f"  {row.number:2d} {row.energy:9.4f} {p.energy:9.4f} {dE:+.1e} {row.r} {p.index_r}{flag}")
    if len(ref) != len(pts):
        print(f"  point count differs: reference {len(ref)}, found {len(pts)}")
    print("reference table reproduced" if not bad else "reference table NOT reproduced")
    return EXIT_MISMATCH if bad else EXIT_OK


def _order_for(f: float) -> int:
    return max(singularity.defect_order(f), 1)


def cmd_density(cfg: RunConfig) -> int:
    """Classical (and optionally quantum) level density with smoothed derivatives."""
    h = build_model(cfg)
    pts, notes = find_points(cfg, h)
    lo, hi = energy_range(cfg, pts)
    curve, qnotes = classical_density(cfg, h, lo, hi)
    order = _order_for(h.dof)
    sm = semiclassics.smooth_derivative(curve, order, cfg.smoothing)
    raw = sm.as_raw()
    out = Path(cfg.out)
    meta = _meta(cfg, "density")
    cols = ["energy", "rho_raw", "omega_prime", "mc_error_raw"] + [f"d{k}_rho_smoothed"
                                                                  for k in range(order + 1)]
    err = raw.mc_error if raw.mc_error is not None else np.full(raw.energies.size, np.nan)
    data = [raw.energies, raw.values, sm.values, err] + [raw.derivatives[k] for k in range(order + 1)]
    write_csv(out / "density.csv", cols, np.column_stack(data), meta=meta)
    panels = [("rho", raw.derivatives[0])] + [(f"d^{k}rho/dE^{k}", raw.derivatives[k])
                                              for k in range(1, order + 1)]
    if cfg.quantum:
        try:
            spec = quantum.combine(quantum.solve_blocks(h, cfg.hbar, cfg.basis, "widest"),
                                   hi if cfg.cutoff is None else cfg.cutoff)
        except ValueError as exc:
            qnotes.append(f"quantum spectrum unavailable: {exc}")
        else:
            q = quantum.histogram_density(spec, cfg.bins, (lo, hi))
            write_csv(out / "density_quantum.csv", ["energy", "rho", "poisson_error"],
                      np.column_stack([q.energies, q.values, q.mc_error]), meta=meta)
            panels.append(("quantum rho", np.interp(raw.energies, q.energies, q.values)))
    plot_curves(out / "density.svg", raw.energies, panels, _markers(pts),
                title=f"{h.name or cfg.model} level density", meta=meta)
    for n in notes + qnotes:
        _say(f"warning: {n}")
    print(f"density on [{lo:g}, {hi:g}] with {raw.energies.size} points written to {out}")
    return EXIT_QUALITY if qnotes else EXIT_OK


def _pure_powers(h: HamiltonianSpec, p: stationary.StationaryPoint):
    """Separable power-law form ``sum c_i x_i^m_i`` around the origin, or None."""
    if np.any(np.abs(p.x) > 1e-5) or abs(p.energy) > 1e-12:
        return None
    coef, exps = h.coefficient_arrays()
    powers = [0] * h.nvars
    cs = [0.0] * h.nvars
    for c, e in zip(coef, exps):
        nz = np.nonzero(e)[0]
        if len(nz) != 1 or powers[nz[0]] or c <= 0 or e[nz[0]] % 2:
            return None
        powers[nz[0]] = int(e[nz[0]])
        cs[nz[0]] = float(c)
    if not all(powers):
        return None
    jac = math.prod(c ** (1.0 / m) for c, m in zip(cs, powers))
    return singularity.DegenerateSpec(tuple(powers), jac, 1.0)


def degenerate_report(h, p, curve, hi) -> dict:
    """Log-log power-law fit above a degenerate minimum."""
    d = curve.energies - p.energy
    span = hi - p.energy
    m = (d >= 0.05 * span) & (d <= span) & (curve.values > 0)
    res = {"E_w": p.energy, "r_predicted": p.index_r, "kind": singularity.POWER,
           "predicted_kind": singularity.POWER,
           "exponent": None, "predicted_exponent": None, "match": None}
    if m.sum() < 5:
        return res
    slope, icpt = np.polyfit(np.log(d[m]), np.log(curve.values[m]), 1)
    res["exponent"] = float(slope)
    ds = _pure_powers(h, p)
    if ds is not None:
        res["predicted_exponent"] = ds.g - 1.0
        res["match"] = bool(abs(slope - (ds.g - 1.0)) <= 0.03)
    return res


def run_classification(cfg, h, pts, sm, hi) -> tuple[list[dict], bool]:
    """Detect a defect at every stationary energy; returns rows and a mismatch flag."""
    f = h.dof
    sigma = sm.window
    W = cfg.fit_width * sigma
    energies = [p.energy for p in pts]
    rows, mismatch = [], False
    for i, p in enumerate(pts):
        if not sm.energies[0] <= p.energy <= sm.energies[-1]:
            rows.append({"number": i + 1, "E_w": p.energy, "status": "outside grid"})
            continue
        if p.degenerate:
            rep = degenerate_report(h, p, sm, hi)
            rep["number"] = i + 1
            rows.append(rep)
            mismatch |= rep["match"] is False
            continue
        others = [e for e in energies if e != p.energy]
        close = [e for e in others if 0.5 * sigma < abs(e - p.energy) <= W]
        if close:
            warnings.warn(f"E={p.energy:.5g}: {len(close)} other stationary energies inside the "
                          "fit window (fitted as nuisance defects)", OverlapWarning, stacklevel=2)
        exp = singularity.classify_nondegenerate(f, p.index_r, energy=p.energy)
        rep = singularity.detect_defect(sm, p.energy, f, W, neighbours=others, r_predicted=p.index_r)
        ok = singularity.matches(rep, exp)
        mismatch |= not ok
        row = rep.to_json()
        row.update(number=i + 1, predicted_kind=exp.kind, predicted_sign=exp.sign, match=ok)
        rows.append(row)
    return rows, mismatch


def cmd_classify(cfg: RunConfig) -> int:
    """Detect and classify the density defect at every stationary energy."""
    h = build_model(cfg)
    pts, notes = find_points(cfg, h)
    lo, hi = energy_range(cfg, pts)
    curve, qnotes = classical_density(cfg, h, lo, hi)
    k = singularity.defect_order(h.dof)
    sm = semiclassics.smooth_derivative(curve, k, cfg.smoothing)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OverlapWarning)
        rows, mismatch = run_classification(cfg, h, pts, sm, hi)
    for w in caught:
        _say(f"warning: {w.message}")
    out = Path(cfg.out)
    meta = _meta(cfg, "classify")
    cols = ["number", "E_w", "r", "predicted_kind", "predicted_sign", "kind", "sign",
            "amplitude", "stderr", "match"]
    table = []
    for row, p in zip(rows, pts):
        table.append([row["number"], p.energy, p.index_r, row.get("predicted_kind", ""),
                      row.get("predicted_sign", ""), row.get("kind") or "", row.get("sign") or "",
                      row.get("amplitude", row.get("exponent", float("nan"))) or float("nan"),
                      row.get("stderr", float("nan")), row.get("match")])
    write_csv(out / "classify.csv", cols, table, meta=meta)
    write_json(out / "classify.json", {"derivative_order": k, "window": sm.window,
                                       "fit_half_width": cfg.fit_width * sm.window,
                                       "reports": rows}, meta=meta)
    print(f"{'#':>3} {'E_w':>9} r  {'predicted':<28} {'detected':<28} ok")
    for t in table:
        pred = f"{t[3]}/{t[4]}" if t[3] else "-"
        det = f"{t[5]}/{t[6]}" if t[5] else "none"
        print(f"{t[0]:3d} {t[1]:9.4f} {t[2]}  {pred:<28} {det:<28} {t[9]}")
    n_ok = sum(1 for r in rows if r.get("match"))
    print(f"{n_ok}/{len(rows)} stationary energies match their predicted defect")
    for n in notes + qnotes:
        _say(f"warning: {n}")
    if mismatch:
        return EXIT_MISMATCH
    return EXIT_QUALITY if qnotes else EXIT_OK


def _flow_parameter(cfg: RunConfig, h: HamiltonianSpec) -> str:
    if cfg.parameter is not None:
        if cfg.parameter not in h.parameters:
            raise ValueError(f"model has no parameter {cfg.parameter!r}")
        return cfg.parameter
    if not h.parameters:
        raise ValueError("flow needs a model with a parameter")
    return list(h.parameters)[-1]


def quantum_flow(cfg: RunConfig, h: HamiltonianSpec, name: str, lo: float, hi: float,
                 critical: Sequence[float]) -> dict:
    """Both flow-rate methods on the quantum spectrum plus continuity checks."""
    sig = cfg.flow_width
    lam = h.parameters[name]
    cutoff = hi + 8 * sig if cfg.cutoff is None else cfg.cutoff
    top = min(hi, cutoff - 8 * sig)
    specs = []
    for dl in (-cfg.dlam, 0.0, cfg.dlam):
        hh = h.with_parameters(**{name: lam + dl})
        specs.append(quantum.combine(quantum.solve_blocks(hh, cfg.hbar, cfg.basis, "widest"), cutoff))
    grid = _grid(lo, top, sig / 20.0)
    slopes = quantum.hf_slopes(specs[1], name)
    slope_avg = flow.flow_slope_average(specs[1].energies, slopes, sig, grid)
    rho_stencil = np.array([
        flow.flow_slope_average(s.energies, np.zeros(s.energies.size), sig, grid).rho[0]
        for s in specs])
    i0 = flow.default_anchor(grid, slope_avg.rho[0], critical, 2 * sig)
    cont = flow.flow_continuity_integral(rho_stencil, cfg.dlam, grid, (i0, slope_avg.phi[0, i0]),
                                         lam=lam, width=sig)
    mask = flow.critical_mask(grid, critical, 2 * sig) & (grid >= grid[i0])
    agree = flow.relative_l2(cont.phi[0], slope_avg.phi[0], mask)
    reports = [flow.verify_continuity(rho_stencil, slope_avg.phi[0], cfg.dlam, grid, k, mask)
               for k in (0, 1)]
    return {"grid": grid, "rho": slope_avg.rho[0], "phi_slope": slope_avg.phi[0],
            "phi_continuity": cont.phi[0], "agreement_l2": agree,
            "continuity": [r.to_json() for r in reports],
            "mass_change": flow.mass_change(rho_stencil, grid), "levels": int(specs[1].energies.size),
            "anchor_energy": float(grid[i0])}


def classical_flow_defects(cfg, h, name, pts, lo, hi) -> tuple[list[dict], list[str], object]:
    """Defects of the second-order (or ``ceil(f-1)``) derivatives of rho and phi."""
    curve, notes = classical_density(cfg, h, lo, hi, parameter=name)
    k = singularity.defect_order(h.dof)
    sm = semiclassics.smooth_derivative(curve, k, cfg.smoothing)
    phi = flow.classical_flow_curve(sm, order=k)
    W = cfg.fit_width * sm.window
    energies = [p.energy for p in pts]
    rows = []
    for i, p in enumerate(pts):
        row = {"number": i + 1, "E_w": p.energy, "r": p.index_r}
        if p.degenerate or not lo <= p.energy <= hi:
            row["status"] = "skipped"
            rows.append(row)
            continue
        others = [e for e in energies if e != p.energy]
        for label, c in (("rho", sm), ("phi", phi)):
            try:
                rep = singularity.detect_defect(c, p.energy, h.dof, W, neighbours=others)
                row[f"{label}_kind"], row[f"{label}_sign"] = rep.kind, rep.sign
                row[f"{label}_amplitude"], row[f"{label}_stderr"] = rep.amplitude, rep.stderr
            except ValueError as exc:  # phi undefined below the spectrum
                row[f"{label}_kind"], row[f"{label}_sign"] = None, None
                row[f"{label}_error"] = str(exc)
        row["same_kind"] = row["rho_kind"] is not None and row["rho_kind"] == row["phi_kind"]
        rows.append(row)
    return rows, notes, (sm, phi)


def cmd_flow(cfg: RunConfig) -> int:
    """Flow rate by both methods, continuity check and rho/phi defect comparison."""
    h = build_model(cfg)
    name = _flow_parameter(cfg, h)
    pts, notes = find_points(cfg, h)
    lo, hi = energy_range(cfg, pts)
    critical = [p.energy for p in pts]
    try:
        q = quantum_flow(cfg, h, name, lo, hi, critical)
    except ValueError as exc:
        _say(f"error: quantum flow failed: {exc}")
        return EXIT_QUALITY
    out = Path(cfg.out)
    meta = _meta(cfg, "flow")
    meta["parameter"] = name
    write_csv(out / "flow.csv", ["energy", "rho", "phi_slope_average", "phi_continuity"],
              np.column_stack([q["grid"], q["rho"], q["phi_slope"], q["phi_continuity"]]), meta=meta)
    rows, qnotes, (sm, phi) = classical_flow_defects(cfg, h, name, pts, lo, hi)
    k = singularity.defect_order(h.dof)
    write_csv(out / "flow_classical.csv", ["energy", "rho", "phi", f"d{k}_rho", f"d{k}_phi"],
              np.column_stack([sm.energies, sm.derivatives[0], phi.derivatives[0],
                               sm.derivatives[k], phi.derivatives[k]]), meta=meta)
    summary = {key: q[key] for key in ("agreement_l2", "continuity", "mass_change", "levels",
                                       "anchor_energy")}
    summary["defects"] = rows
    write_json(out / "flow.json", summary, meta=meta)
    plot_curves(out / "flow.svg", q["grid"],
                [("rho (quantum)", q["rho"]), ("phi slope average", q["phi_slope"]),
                 ("phi continuity", q["phi_continuity"])], _markers(pts),
                title=f"flow rate along {name}", meta=meta)
    plot_curves(out / "flow_classical.svg", sm.energies,
                [(f"d^{k}rho", sm.derivatives[k]), (f"d^{k}phi", phi.derivatives[k])],
                _markers(pts), title=f"classical defects along {name}", meta=meta)
    c0 = q["continuity"][0]
    print(f"flow along {name}: {q['levels']} levels, method agreement L2 {q['agreement_l2']:.3g}, "
          f"continuity residual k=0 {c0['relative_max']:.3g}")
    same = sum(1 for r in rows if r.get("same_kind"))
    print(f"{same}/{len(rows)} stationary energies show the same defect kind in rho and phi")
    for n in notes + qnotes:
        _say(f"warning: {n}")
    bad = q["agreement_l2"] > 0.03 or c0["relative_max"] > 0.02 or bool(qnotes)
    return EXIT_QUALITY if bad else EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    """All applicable subcommands, each in its own subdirectory."""
    base = Path(cfg.out)
    codes = {}
    codes["stationary"] = cmd_stationary(replace(cfg, out=str(base / "stationary")))
    codes["density"] = cmd_density(replace(cfg, out=str(base / "density")))
    codes["classify"] = cmd_classify(replace(cfg, out=str(base / "classify")))
    h = build_model(cfg)
    if h.parameters and h.separable_blocks is not None:
        codes["flow"] = cmd_flow(replace(cfg, out=str(base / "flow")))
    write_json(base / "report.json", {"exit_codes": codes, "config": asdict(cfg)},
               meta=_meta(cfg, "report"))
    print(f"report written to {base}: {codes}")
    if EXIT_MISMATCH in codes.values():
        return EXIT_MISMATCH
    return max(codes.values())


COMMANDS = {"stationary": cmd_stationary, "density": cmd_density, "flow": cmd_flow,
            "classify": cmd_classify, "report": cmd_report}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--out", help="output directory")
    m = common.add_argument_group("model and numerics")
    m.add_argument("--model", choices=MODELS)
    m.add_argument("--A", nargs="+", help="cusp parameters, e.g. 0.25,0.5,0.75")
    m.add_argument("--hbar", type=float)
    m.add_argument("--samples", type=int, help="Monte Carlo samples (per block when separable)")
    m.add_argument("--spacing", "--grid", dest="spacing", type=float, help="energy grid spacing")
    m.add_argument("--e-min", dest="e_min", type=float)
    m.add_argument("--e-max", dest="e_max", type=float)
    m.add_argument("--window", type=float, help="Gaussian smoothing width")
    m.add_argument("--fit-width", dest="fit_width", type=float,
                   help="defect fit half-width in smoothing widths")
    m.add_argument("--box", type=float, help="stationary search half-width")
    m.add_argument("--basis", type=int, help="oscillator basis size per block")
    m.add_argument("--cutoff", type=float, help="quantum energy cutoff")
    m.add_argument("--bins", type=int, help="quantum histogram bins")
    m.add_argument("--quantum", action="store_true", default=None,
                   help="also compute the quantum histogram density")
    m.add_argument("--parameter", help="flow parameter (default: last model parameter)")
    m.add_argument("--dlam", type=float, help="parameter step for the continuity stencil")
    m.add_argument("--flow-width", dest="flow_width", type=float,
                   help="Gaussian width for quantum flow rates")
    m.add_argument("--error-budget", dest="error_budget", type=float,
                   help="largest acceptable median relative MC error")
    p = argparse.ArgumentParser(prog="esqpt", description="Stationary points, level-density "
                                "defects and spectral flow of polynomial Hamiltonians.")
    p.add_argument("--version", action="version", version=f"esqpt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__.splitlines()[0] if fn.__doc__ else name)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if ns.config:
        values.update(load_config(Path(ns.config).read_text()))
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            values[f.name] = _coerce("A", " ".join(v)) if f.name == "A" else v
    return RunConfig(**values).validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    return COMMANDS[ns.command](cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
