"""Command-line front end.

Every subcommand reads a JSON config (``--config``) and/or flags, writes CSV
artifacts with a ``#`` metadata header into ``--out`` and prints a manifest
JSON on stdout. Exit status: 0 on success, 2 for invalid input, 3 for
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel, ConfigDict, Field

from . import current, dynamics, fields, potential, triplets
from .continuation import PeriodMap, continue_in_k, newton_shoot
from .errors import NumericalError, ValidationError
from .orbit_search import find_subharmonic, stability_probe
from .twist import check_twist, compute_coefficients

log = logging.getLogger("wirefield")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


# ------------------------------------------------------------------ configs
class _Cfg(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProfileCfg(_Cfg):
    type: Literal["fourier", "sinusoid", "smoothed_square"] = "sinusoid"
    T: float = 2 * math.pi
    I0: float = 1.0
    cos_coeffs: list[float] = []
    sin_coeffs: list[float] = []
    amplitude: float = 1.0
    harmonic: int = 1
    n_harmonics: int = 15

    def build(self, k: float = 0.0) -> current.CurrentProfile:
        d = self.model_dump()
        kind = d.pop("type")
        keep = {"fourier": ("T", "I0", "cos_coeffs", "sin_coeffs"),
                "sinusoid": ("T", "I0", "amplitude", "harmonic"),
                "smoothed_square": ("T", "I0", "n_harmonics", "amplitude")}[kind]
        cfg = {key: d[key] for key in keep}
        cfg.update(type=kind, k=k)
        return current.profile_from_config(cfg)


class TripletCfg(_Cfg):
    rbar: float
    I0: Optional[float] = None
    L: Optional[float] = None
    p_z: Optional[float] = None
    branch: int = 1

    def build(self, I0: float) -> triplets.Triplet:
        I0 = I0 if self.I0 is None else self.I0
        if self.L is None and self.p_z is None:
            return triplets.complete_triplet(self.rbar, I0, self.branch)
        if self.L is None or self.p_z is None:
            raise ValidationError("give both L and p_z, or neither")
        return triplets.Triplet(self.rbar, self.L, self.p_z, I0)


class Tolerances(_Cfg):
    rtol: float = 1e-10
    atol: float = 1e-12
    quad_tol: float = 1e-10
    exact: bool = False


class PotentialTableCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    c: float = 1.0
    t: list[float] = Field(default_factory=lambda: [0.0])
    r: list[float] = Field(default_factory=lambda: [1.0])
    dt_order: int = 0
    dr_order: int = 0


class FieldsCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    k: float = 0.0
    c: float = 1.0
    t: list[float] = Field(default_factory=lambda: [0.0])
    r: list[float] = Field(default_factory=lambda: [1.0])


class SimulateCfg(_Cfg):
    system: Literal["radial", "cylindrical", "cartesian"] = "radial"
    profile: ProfileCfg = ProfileCfg()
    triplet: Optional[TripletCfg] = None
    state: Optional[list[float]] = None
    momenta: Optional[list[float]] = None
    k: float = 0.0
    t_span: list[float] = Field(default_factory=lambda: [0.0, 10.0])
    n_samples: int = 201
    r_range: Optional[list[float]] = None


class ContinueCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    triplet: TripletCfg = TripletCfg(rbar=1.0)
    T: Optional[float] = None
    k_list: list[float] = Field(default_factory=lambda: [1e-4, 1e-3, 1e-2])
    dk_max: Optional[float] = None


class TwistCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    triplet: TripletCfg = TripletCfg(rbar=1.0)
    T: Optional[float] = None
    k: float = 0.0
    form: Literal["taylor", "paper"] = "taylor"


class SubharmonicsCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    triplet: TripletCfg = TripletCfg(rbar=1.0)
    T: Optional[float] = None
    k: float = 0.01
    pairs: list[tuple[int, int]] = Field(default_factory=lambda: [(1, 8)])


class StabilityCfg(_Cfg):
    profile: ProfileCfg = ProfileCfg()
    triplet: TripletCfg = TripletCfg(rbar=1.0)
    T: Optional[float] = None
    k: float = 0.01
    delta: float = 1e-3
    horizon: int = 1000
    n_members: int = 200
    eps: float = 1e-2


COMMAND_CFG = {
    "potential-table": PotentialTableCfg,
    "fields": FieldsCfg,
    "simulate": SimulateCfg,
    "continue": ContinueCfg,
    "twist-check": TwistCfg,
    "subharmonics": SubharmonicsCfg,
    "stability": StabilityCfg,
}


# ------------------------------------------------------------------ artifacts
def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, command: str, chash: str, columns: list[str], rows, meta=None) -> Path:
    """CSV with a '#' header holding the command and the config hash."""
    buf = io.StringIO()
    buf.write(f"# wirefield {command}\n")
    buf.write(f"# config_hash={chash}\n")
    for key, val in (meta or {}).items():
        buf.write(f"# {key}={val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def _versions() -> dict:
    try:
        own = metadata.version("wirefield")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"wirefield": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "pydantic": pydantic.VERSION, "python": platform.python_version()}


# ------------------------------------------------------------------ commands
def _period_map(cfg, tol: Tolerances):
    prof = cfg.profile.build()
    field = potential.PotentialField(prof, quad=potential.QuadConfig(tol=tol.quad_tol))
    trip = cfg.triplet.build(prof.I0)
    return PeriodMap(trip, field, T=cfg.T, fast=not tol.exact), trip, field


def cmd_potential_table(cfg: PotentialTableCfg, tol, out: Path, chash):
    prof = cfg.profile.build()
    field = potential.PotentialField(prof, cfg.c, potential.QuadConfig(tol=tol.quad_tol))
    tt, rr = np.meshgrid(cfg.t, cfg.r, indexing="ij")
    res = field.evaluate(tt, rr, cfg.dt_order, cfg.dr_order)
    rows = zip(tt.ravel(), rr.ravel(), np.ravel(res.value), np.ravel(res.error))
    path = write_csv(out / "potential_table.csv", "potential-table", chash,
                     ["t", "r", "value", "error"], rows,
                     {"dt_order": cfg.dt_order, "dr_order": cfg.dr_order})
    return {"max_error": float(np.max(res.error))}, [path]


def cmd_fields(cfg: FieldsCfg, tol, out: Path, chash):
    prof = cfg.profile.build(cfg.k)
    field = potential.PotentialField(prof, cfg.c, potential.QuadConfig(tol=tol.quad_tol))
    tt, rr = np.meshgrid(cfg.t, cfg.r, indexing="ij")
    Ez, Bt = fields.field_components(field, tt, rr, cfg.k)
    Ez = np.broadcast_to(Ez, tt.shape)
    rows = zip(tt.ravel(), rr.ravel(), Ez.ravel(), np.ravel(Bt))
    path = write_csv(out / "fields.csv", "fields", chash, ["t", "r", "E_z", "B_theta"], rows)
    return {"n_points": int(tt.size)}, [path]


def cmd_simulate(cfg: SimulateCfg, tol: Tolerances, out: Path, chash):
    prof = cfg.profile.build(cfg.k)
    field = potential.PotentialField(prof, quad=potential.QuadConfig(tol=tol.quad_tol))
    if cfg.triplet is not None:
        trip = cfg.triplet.build(prof.I0)
        L, p_z = trip.L, trip.p_z
        r0, v0 = trip.rbar, 0.0
    elif cfg.state is not None and cfg.momenta is not None:
        L, p_z = cfg.momenta
        r0, v0 = cfg.state[0], cfg.state[1]
    else:
        raise ValidationError("simulate needs a triplet or an initial state with momenta")
    I0 = prof.I0
    if cfg.system == "radial":
        y0 = [r0, v0]
    elif cfg.system == "cylindrical":
        y0 = [r0, v0, 0.0, 0.0]
    else:
        vz = p_z + I0 * math.log(r0)
        if cfg.k:
            vz += cfg.k * float(field.partial(cfg.t_span[0], r0))
        y0 = [r0, 0.0, 0.0, v0, L / r0, vz]
    t_eval = np.linspace(cfg.t_span[0], cfg.t_span[1], cfg.n_samples)
    traj = dynamics.integrate(cfg.system, y0, tuple(cfg.t_span), field, momenta=(L, p_z),
                              k=cfg.k, rtol=tol.rtol, atol=tol.atol, t_eval=t_eval,
                              fast=not tol.exact, r_range=cfg.r_range)
    n = traj.t.size
    if cfg.system == "cartesian":
        fi = dynamics.first_integrals(traj, field, cfg.k, fast=not tol.exact)
        theta = np.unwrap(np.arctan2(traj.y[1], traj.y[0]))
        z = traj.y[2]
        Ls, pzs, E0 = fi["L"], fi["p_z"], fi["E0"]
    else:
        r, rd = traj.y[0], traj.y[1]
        if cfg.system == "cylindrical":
            theta, z = traj.y[2], traj.y[3]
        else:
            theta = z = np.full(n, np.nan)
        Ls, pzs = np.full(n, L), np.full(n, p_z)
        E0 = 0.5 * rd**2 + dynamics.static_potential(r, (L, p_z), I0)
    rows = zip(traj.t, traj.r, traj.rdot, theta, z, Ls, pzs, E0)
    path = write_csv(out / "trajectory.csv", "simulate", chash,
                     ["t", "r", "rdot", "theta", "z", "L", "p_z", "E0"], rows,
                     {"system": cfg.system, "status": traj.status})
    summary = {"status": traj.status, "collision_time": traj.collision_time,
               "r_min": float(np.min(traj.r)), "r_max": float(np.max(traj.r))}
    return summary, [path]


def cmd_continue(cfg: ContinueCfg, tol, out: Path, chash):
    pm, trip, _ = _period_map(cfg, tol)
    branch = continue_in_k(pm, cfg.k_list, dk_max=cfg.dk_max)
    res = branch.as_dict()
    res["triplet"] = trip.as_dict()
    res["deviation_over_k"] = [o.deviation(trip.rbar) / o.k if o.k else None for o in branch.orbits]
    paths = [write_json(out / "branch.json", res)]
    cols = ["t"] + [f"r_k={o.k!r}" for o in branch.orbits]
    rows = zip(branch.orbits[0].t, *[o.r for o in branch.orbits])
    paths.append(write_csv(out / "branch_samples.csv", "continue", chash, cols, rows))
    return {"reason": branch.reason, "k_reached": branch.k_reached, "ks": branch.ks}, paths


def cmd_twist(cfg: TwistCfg, tol, out: Path, chash):
    pm, trip, field = _period_map(cfg, tol)
    if cfg.k == 0:
        orbit = newton_shoot(pm, [trip.rbar, 0.0], 0.0)
    else:
        orbit = continue_in_k(pm, [cfg.k]).orbits[-1]
    coeffs = compute_coefficients(orbit, field, trip, form=cfg.form, exact=tol.exact)
    cert = check_twist(coeffs, pm.T)
    res = cert.as_dict()
    res.update(Abar=coeffs.Abar, Bbar=coeffs.Bbar, Cbar=coeffs.Cbar, k=cfg.k, form=cfg.form)
    paths = [write_json(out / "twist_certificate.json", res)]
    paths.append(write_csv(out / "twist_coefficients.csv", "twist-check", chash,
                           ["t", "r", "A", "B", "C"],
                           zip(coeffs.t, coeffs.r, coeffs.A, coeffs.B, coeffs.C)))
    return {"certified": cert.certified, "margins": [cert.margin_i, cert.margin_ii, cert.margin_iii],
            "h": cert.h}, paths


def cmd_subharmonics(cfg: SubharmonicsCfg, tol, out: Path, chash):
    pm, trip, _ = _period_map(cfg, tol)
    orbit = continue_in_k(pm, [cfg.k]).orbits[-1] if cfg.k else newton_shoot(pm, [trip.rbar, 0.0], 0.0)
    summaries, paths = [], []
    for p, q in cfg.pairs:
        rep = find_subharmonic(pm, cfg.k, p, q, orbit=orbit)
        summaries.append(rep.summary())
        if rep.orbit is not None:
            o = rep.orbit
            paths.append(write_csv(out / f"subharmonic_{p}_{q}.csv", "subharmonics", chash,
                                   ["t", "r", "rdot"], zip(o.t, o.r, o.rdot), {"p": p, "q": q}))
    paths.insert(0, write_json(out / "subharmonics.json", {"results": summaries}))
    return {"results": [{k: s[k] for k in ("p", "q", "found", "residual", "zeros")}
                        for s in summaries]}, paths


def cmd_stability(cfg: StabilityCfg, tol, out: Path, chash, seed: int):
    pm, trip, _ = _period_map(cfg, tol)
    orbit = continue_in_k(pm, [cfg.k]).orbits[-1] if cfg.k else newton_shoot(pm, [trip.rbar, 0.0], 0.0)
    probe = stability_probe(pm, orbit, cfg.delta, cfg.horizon, cfg.n_members, seed, cfg.eps)
    rows = ((i, *probe.perturbations[i], probe.excursions[i]) for i in range(cfg.n_members))
    paths = [write_csv(out / "stability_ensemble.csv", "stability", chash,
                       ["member", "d_r0", "d_rdot0", "d_L", "d_p_z", "max_excursion"], rows,
                       {"seed": seed})]
    summary = probe.summary()
    paths.append(write_json(out / "stability.json", summary))
    return summary, paths


def cmd_triplet(args) -> dict:
    if args.L is not None or args.p_z is not None:
        if args.L is None or args.p_z is None:
            raise ValidationError("give both --L and --p_z, or neither")
        trip = triplets.Triplet(args.rbar, args.L, args.p_z, args.I0)
    else:
        trip = triplets.complete_triplet(args.rbar, args.I0, args.branch)
    return triplets.classify(trip, args.T)


# ------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wirefield", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("wirefield_out"), help="artifact directory")
        p.add_argument("--rtol", type=float, default=1e-10)
        p.add_argument("--atol", type=float, default=1e-12)
        p.add_argument("--quad-tol", type=float, default=1e-10)
        p.add_argument("--exact", action="store_true",
                       help="direct quadrature instead of the memoized interpolant")
        p.add_argument("--seed", type=int, default=0)

    for name in COMMAND_CFG:
        common(sub.add_parser(name))
    tp = sub.add_parser("triplet", help="classify a (rbar, L, p_z) triplet")
    tp.add_argument("--rbar", type=float, required=True)
    tp.add_argument("--I0", type=float, required=True)
    tp.add_argument("--T", type=float, required=True)
    tp.add_argument("--L", type=float)
    tp.add_argument("--p_z", type=float)
    tp.add_argument("--branch", type=int, default=1)
    return ap


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    try:
        text = args.config.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {args.config}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return data


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    manifest = {"command": args.command, "versions": _versions()}
    try:
        if args.command == "triplet":
            inputs = {k: getattr(args, k) for k in ("rbar", "I0", "T", "L", "p_z", "branch")}
            manifest.update(inputs=inputs, config_hash=config_hash(inputs), seed=None,
                            artifacts=[], result=cmd_triplet(args))
        else:
            raw = _load_config(args)
            cfg = COMMAND_CFG[args.command].model_validate(raw)
            tol = Tolerances(rtol=args.rtol, atol=args.atol, quad_tol=args.quad_tol,
                             exact=args.exact)
            inputs = {"config": cfg.model_dump(mode="json"), "tolerances": tol.model_dump(),
                      "seed": args.seed}
            chash = config_hash(inputs)
            handler = {
                "potential-table": cmd_potential_table,
                "fields": cmd_fields,
                "simulate": cmd_simulate,
                "continue": cmd_continue,
                "twist-check": cmd_twist,
                "subharmonics": cmd_subharmonics,
            }.get(args.command)
            if handler is None:
                result, paths = cmd_stability(cfg, tol, args.out, chash, args.seed)
            else:
                result, paths = handler(cfg, tol, args.out, chash)
            manifest.update(inputs=inputs, config_hash=chash, seed=args.seed,
                            artifacts=[str(p) for p in paths], result=result)
    except (ValidationError, pydantic.ValidationError) as exc:
        print(f"wirefield: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"wirefield: I/O failure: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"wirefield: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest["wall_time"] = time.perf_counter() - start
    print(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
