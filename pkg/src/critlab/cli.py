"""Command-line front end.

Exit codes: 0 success, 1 bad configuration or runtime failure (one JSON
line on stderr), 2 a report that found violated hypotheses or lemma
violations.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

THREADS_ENV = "CRITLAB_THREADS"
COMMANDS = ("green", "norm", "fit", "hardy", "frac", "landis", "criticality", "verify-lemmas")


class ConfigError(ValueError):
    pass


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["lattice", "tree", "fractional", "file"]
    d: Optional[int] = Field(None, ge=1)
    radius: Optional[int] = Field(None, ge=1)
    norm_kind: Literal["linf", "l1", "l2"] = "linf"
    degree: Optional[int] = Field(None, ge=2)
    sigma: Optional[float] = Field(None, gt=0, lt=1)
    rw: Optional[int] = Field(None, ge=1)
    edges: Optional[str] = None
    vertices: Optional[str] = None
    root: Optional[str] = None

    @model_validator(mode="after")
    def _required(self):
        need = {"lattice": ("d",), "tree": ("degree",), "fractional": ("d", "sigma", "rw", "radius"),
                "file": ("edges", "vertices")}[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"model {self.kind!r} needs {', '.join(missing)}")
        return self

    def spec(self, default_radius: Optional[int] = None):
        from .builders import LatticeSpec, TreeSpec
        from .fractional import FractionalSpec

        r = self.radius if self.radius is not None else default_radius
        if self.kind == "lattice":
            return LatticeSpec(self.d, r or 1, self.norm_kind)
        if self.kind == "tree":
            return TreeSpec(self.degree, max(r or 2, 2))
        if self.kind == "fractional":
            return FractionalSpec(self.d, self.sigma, self.radius, self.rw)
        raise ConfigError("file models have no builder spec")


class GreenParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float = Field(0.0, ge=0)
    core_radius: int = Field(5, ge=0)
    tol: float = Field(1e-8, gt=0)
    exhaust: bool = True
    include_values: bool = True


class NormParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    x: list[int] = Field(min_length=1)
    a: Optional[float] = Field(None, gt=0)
    a2: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one(self):
        if sum(v is not None for v in (self.a, self.a2, self.alpha)) != 1:
            raise ValueError("give exactly one of a, a2, alpha")
        return self


class FitParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float = Field(1.0, gt=0)
    window: tuple[int, int] = (5, 25)
    directions: list[Literal["axis", "diagonal"]] = ["axis", "diagonal"]


class HardyParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    tol: float = Field(1e-3, gt=0)
    tests: int = Field(200, ge=0)
    seed: int = 0
    include_values: bool = False


class FracParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    d: int = Field(ge=1)
    sigma: float = Field(gt=0, lt=1)
    alpha: float = Field(ge=0)
    box: int = Field(ge=2)
    rw: int = Field(ge=1)
    window: Optional[tuple[int, int]] = None
    tail: Literal["drop", "kill"] = "drop"
    include_table: bool = True


class LandisParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    theorem: str
    u: Optional[Literal["sharpness", "zero", "ground-state"]] = None
    u_file: Optional[str] = None
    v_file: Optional[str] = None
    ref_alpha: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _source(self):
        from .landis import canonical_theorem

        canonical_theorem(self.theorem)
        if (self.u is None) == (self.u_file is None):
            raise ValueError("give exactly one of u, u_file")
        return self


class CriticalityParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float = Field(0.0, ge=0)
    radii: list[int] = Field(min_length=1)
    bisect_tol: float = Field(1e-9, gt=0)


class LemmaParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    d_max: int = Field(4, ge=1, le=6)
    radius: int = Field(20, ge=1)
    a2: Optional[list[float]] = None


PARAMS = {"green": GreenParams, "norm": NormParams, "fit": FitParams, "hardy": HardyParams,
          "frac": FracParams, "landis": LandisParams, "criticality": CriticalityParams,
          "verify-lemmas": LemmaParams}
NEEDS_MODEL = {"green", "fit", "hardy", "landis", "criticality"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    command: Literal[COMMANDS]
    model: Optional[ModelConfig] = None
    params: dict[str, Any] = {}
    output: Optional[str] = None
    format: Literal["json", "csv"] = "json"

    @model_validator(mode="after")
    def _check(self):
        if self.command in NEEDS_MODEL and self.model is None:
            raise ValueError(f"{self.command} needs a model (--model)")
        self.params = PARAMS[self.command](**self.params).model_dump(mode="json")
        return self

    def typed(self):
        return PARAMS[self.command](**self.params)


# ---------------------------------------------------------------- argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=["lattice", "tree", "fractional", "file"])
    g.add_argument("--d", type=int)
    g.add_argument("--radius", type=int)
    g.add_argument("--norm-kind", choices=["linf", "l1", "l2"])
    g.add_argument("--degree", type=int)
    g.add_argument("--sigma", type=float)
    g.add_argument("--rw", type=int)
    g.add_argument("--edges")
    g.add_argument("--vertices")
    g.add_argument("--root")


MODEL_KEYS = ("d", "radius", "norm_kind", "degree", "sigma", "rw", "edges", "vertices", "root")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="critlab", description="Green functions, Hardy weights and Landis-type "
                                            "checks on weighted graphs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        if model:
            _model_flags(sp)
        sp.add_argument("--config", help="JSON file; its values override flags")
        sp.add_argument("--output", "-o")
        sp.add_argument("--format", choices=["json", "csv"])

    sp = sub.add_parser("green", help="Green function G_alpha")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--core-radius", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--no-exhaust", dest="exhaust", action="store_const", const=False,
                    help="single Dirichlet solve on the given radius")
    sp.add_argument("--no-values", dest="include_values", action="store_const", const=False)

    sp = sub.add_parser("norm", help="the norm |x|_a and the resolvent asymptotic")
    common(sp, model=False)
    sp.add_argument("--x", type=lambda s: [int(v) for v in s.split(",")])
    sp.add_argument("--a", type=float)
    sp.add_argument("--a2", type=float)
    sp.add_argument("--alpha", type=float)

    sp = sub.add_parser("fit", help="asymptotic fit of G_alpha along rays")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--window", type=int, nargs=2)
    sp.add_argument("--directions", type=lambda s: s.split(","))

    sp = sub.add_parser("hardy", help="Hardy weight from G_0 (lattice) or the tree ground state")
    common(sp)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--tests", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--values", dest="include_values", action="store_const", const=True)

    sp = sub.add_parser("frac", help="fractional weights and Green function slopes")
    common(sp, model=False)
    sp.add_argument("--d", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--box", type=int)
    sp.add_argument("--rw", type=int)
    sp.add_argument("--window", type=int, nargs=2)
    sp.add_argument("--tail", choices=["drop", "kill"])
    sp.add_argument("--no-table", dest="include_table", action="store_const", const=False)

    sp = sub.add_parser("landis", help="check a Landis-type hypothesis set")
    common(sp)
    sp.add_argument("--theorem")
    sp.add_argument("--u", choices=["sharpness", "zero", "ground-state"])
    sp.add_argument("--u-file")
    sp.add_argument("--v-file", help="potential as name<TAB>value lines")
    sp.add_argument("--ref-alpha", type=float)

    sp = sub.add_parser("criticality", help="criticality constants C*_R")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--radii", type=lambda s: [int(v) for v in s.split(",")])
    sp.add_argument("--bisect-tol", type=float)

    sp = sub.add_parser("verify-lemmas", help="exhaustive check of the |x|_a norm bounds")
    common(sp, model=False)
    sp.add_argument("--d-max", type=int)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--a2", type=lambda s: [float(v) for v in s.split(",")])
    return p


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def config_from_args(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    cfg_path = ns.pop("config", None)
    data: dict = {"command": command, "params": {}}
    for key in ("output", "format"):
        if ns.get(key) is not None:
            data[key] = ns.pop(key)
        else:
            ns.pop(key, None)
    if command in NEEDS_MODEL:
        kind = ns.pop("model", None)
        model = {k: ns.pop(k) for k in MODEL_KEYS if ns.get(k) is not None}
        for k in MODEL_KEYS:
            ns.pop(k, None)
        if kind is not None:
            model["kind"] = kind
        if model:
            data["model"] = model
    data["params"] = {k: v for k, v in ns.items() if v is not None}
    if cfg_path is not None:
        try:
            over = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(over, dict):
            raise ConfigError("config file must hold a JSON object")
        if over.get("command", command) != command:
            raise ConfigError(f"config is for {over['command']!r}, not {command!r}")
        data = _merge(data, over)
    return RunConfig(**data)


# ---------------------------------------------------------------- commands

def _graph(cfg: RunConfig, default_radius=None):
    from .builders import build, load_graph

    m = cfg.model
    if m.kind == "file":
        g, V = load_graph(m.edges, m.vertices, root=m.root, with_potential=True)
        return g, V
    return build(m.spec(default_radius)), None


def _green_rows(table):
    g = table.graph
    coords = g.coords if g.coords is not None else [[k] for k in range(g.n)]
    width = len(coords[0])
    header = [f"x{k}" for k in range(width)] + ["value", "boundary"]
    rows = [list(map(int, c)) + [float(v), int(b)] for c, v, b in
            zip(coords, table.values, g.boundary)]
    return header, rows


def run_green(cfg: RunConfig):
    from .resolvent import green_dirichlet, green_exhaustion

    p = cfg.typed()
    if cfg.model.kind == "file" or not p.exhaust:
        if cfg.model.kind != "file" and cfg.model.radius is None:
            raise ConfigError("a single solve needs --radius")
        g, _ = _graph(cfg)
        table = green_dirichlet(g, alpha=p.alpha)
    else:
        table = green_exhaustion(cfg.model.spec(), alpha=p.alpha, core_radius=p.core_radius,
                                 tol=p.tol)
    return table.to_dict(p.include_values), _green_rows(table), 0


def run_norm(cfg: RunConfig):
    from .lattice_norms import a_from_alpha, norm_a

    p = cfg.typed()
    d = len(p.x)
    a = p.a if p.a is not None else (p.a2 ** 0.5 if p.a2 is not None else a_from_alpha(d, p.alpha))
    res = norm_a(p.x, d, a).to_dict()
    return res, (list(res), [list(res.values())]), 0


def run_fit(cfg: RunConfig):
    from .lattice_norms import asymptotic_fit
    from .resolvent import green_dirichlet

    p = cfg.typed()
    if cfg.model.kind != "lattice" or cfg.model.radius is None:
        raise ConfigError("fit needs --model lattice with --radius")
    g, _ = _graph(cfg)
    table = green_dirichlet(g, alpha=p.alpha)
    rep = asymptotic_fit(table, directions=p.directions, window=tuple(p.window))
    rows = [[ray.direction, int(n), float(r)] for ray in rep.rays
            for n, r in zip(ray.n, ray.residual)]
    return rep.to_dict(), (["direction", "n", "residual"], rows), 0


def run_hardy(cfg: RunConfig):
    import numpy as np

    from .hardy import hardy_form_check, supersolution_hardy, tree_ground_state
    from .resolvent import green_exhaustion

    p = cfg.typed()
    m = cfg.model
    out: dict = {}
    if m.kind == "tree":
        _, table = tree_ground_state(m.spec(8))
    elif m.kind == "lattice":
        if m.d < 3:
            raise ConfigError("G_0 is infinite on Z^1 and Z^2; use d >= 3")
        R = m.radius or 10
        g0 = green_exhaustion(m.spec(R), alpha=0, core_radius=R, tol=p.tol, order=m.d - 2.0)
        if not g0.converged:
            raise RuntimeError("G_0 did not converge")
        table = supersolution_hardy(g0.graph, g0.values)
        out["green0"] = g0.to_dict(include_values=False)
    else:
        raise ConfigError("hardy supports lattice and tree models")
    out.update(table.to_dict(p.include_values))
    if p.tests:
        out["form_check"] = hardy_form_check(table, p.tests, p.seed)
    g = table.graph
    coords = g.coords
    rows = [list(map(int, c)) + [float(f), None if np.isnan(w) else float(w)]
            for c, f, w in zip(coords, table.phi, table.W)]
    header = [f"x{k}" for k in range(coords.shape[1])] + ["phi", "W"]
    return out, (header, rows), 0


def run_frac(cfg: RunConfig):
    from .fractional import fractional_green_slopes, fractional_weights

    p = cfg.typed()
    fit = fractional_green_slopes(p.d, p.sigma, p.alpha, p.box, p.rw,
                                  window=tuple(p.window) if p.window else None, tail=p.tail)
    fw = fractional_weights(p.d, p.sigma, p.rw)
    out = {"fit": fit.to_dict(), "weights": fw.to_dict(p.include_table)}
    rows = [[int(r), float(v)] for r, v in zip(fit.radii, fit.values)]
    return out, (["radius", "green"], rows), 0


def _read_values(path: str, g) -> "np.ndarray":
    import numpy as np

    from .builders import GraphFormatError, _vertex_name

    index = {_vertex_name(g, k): k for k in range(g.n)}
    out = np.zeros(g.n)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected name<TAB>value")
            if parts[0] not in index:
                raise GraphFormatError(f"{path}:{lineno}: unknown vertex {parts[0]!r}")
            out[index[parts[0]]] = float(parts[1])
    return out


def landis_case(theorem: str, g, u_kind: Optional[str], sigma: Optional[float] = None,
                V=None, u=None, ref_alpha: float = 1.0):
    """Assemble ``u``, ``V`` and the reference objects for a theorem on ``g``."""
    import numpy as np

    from .landis import canonical_theorem, sharpness_instance
    from .resolvent import green_dirichlet

    tid = canonical_theorem(theorem)
    green1 = green_dirichlet(g, alpha=1.0)
    if u_kind == "sharpness":
        inst = sharpness_instance(green1)
        u, V = inst.u, inst.V
    elif u_kind == "zero":
        u = np.zeros(g.n)
    refs: dict = {"green1": green1, "sigma": sigma}
    r = g.distance
    if g.kind == "tree":
        q = float(g.meta.get("degree", g.degree[g.root]))
        v = np.sqrt(r) * q ** (-r / 2)
        v[r == 0] = 1.0
    elif g.coords is not None and g.kind == "fractional" and sigma is not None:
        v = np.maximum(r, 1.0) ** ((2 * sigma - g.coords.shape[1]) / 2)
    elif g.coords is not None and g.coords.shape[1] >= 3:
        g0 = green_dirichlet(g, alpha=0.0)
        v = np.sqrt(np.clip(g0.values, 0, None))
        refs["green0"] = g0
    else:
        v = np.ones(g.n)
    if tid in ("general", "hardy-ground-state"):
        refs["v"] = v
    if tid == "green-root" and "green0" not in refs:
        refs["green0"] = green_dirichlet(g, alpha=0.0)
    if tid == "green-alpha":
        refs["green_alpha"] = green_dirichlet(g, alpha=ref_alpha)
    if u_kind == "ground-state":
        u = v
    return u, V, refs


def run_landis(cfg: RunConfig):
    from .landis import check_theorem

    p = cfg.typed()
    g, V = _graph(cfg)
    sigma = cfg.model.sigma
    u = None
    if p.u_file is not None:
        u = _read_values(p.u_file, g)
        if p.v_file is not None:
            V = _read_values(p.v_file, g)
    else:
        V = None
    u, V, refs = landis_case(p.theorem, g, p.u, sigma=sigma, V=V, u=u, ref_alpha=p.ref_alpha)
    rep = check_theorem(p.theorem, g, u, V, **refs)
    out = rep.to_dict()
    rows = [[int(r), float(v)] for r, v in zip(rep.decay.radii, rep.decay.values)]
    return out, (["radius", "decay_profile"], rows), 2 if rep.violated else 0


def run_criticality(cfg: RunConfig):
    from .resolvent import criticality_constant

    p = cfg.typed()
    if cfg.model.kind not in ("lattice", "tree"):
        raise ConfigError("criticality supports lattice and tree models")
    res = criticality_constant(cfg.model.spec(max(p.radii)), alpha=p.alpha, radii=p.radii,
                               bisect_tol=p.bisect_tol)
    rows = [[int(r), float(c)] for r, c in zip(res.radii, res.constants)]
    return res.to_dict(), (["radius", "constant"], rows), 0


def run_lemmas(cfg: RunConfig):
    from .lattice_norms import verify_norm_lemmas

    p = cfg.typed()
    kw = {} if p.a2 is None else {"a2_grid": tuple(p.a2)}
    rep = verify_norm_lemmas(d_max=p.d_max, radius=p.radius, **kw)
    out = rep.to_dict()
    rows = [[e.d, float(e.a2), e.points, e.a1_lower_violations + e.a1_upper_violations
             + e.a2_violations, float(e.axis_max_error)] for e in rep.entries]
    return out, (["d", "a2", "points", "violations", "axis_max_error"], rows), \
        2 if rep.violations else 0


RUNNERS = {"green": run_green, "norm": run_norm, "fit": run_fit, "hardy": run_hardy,
           "frac": run_frac, "landis": run_landis, "criticality": run_criticality,
           "verify-lemmas": run_lemmas}


def _apply_threads():
    n = os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _fail(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        msg = "; ".join(f"{'.'.join(map(str, e['loc'])) or 'config'}: {e['msg']}"
                        for e in exc.errors())
    else:
        msg = str(exc)
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": msg}) + "\n")
    return 1


def main(argv=None) -> int:
    _apply_threads()
    from . import jsonio

    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except (ConfigError, ValidationError, ValueError) as exc:
        return _fail(exc)
    try:
        result, table, code = RUNNERS[cfg.command](cfg)
    except Exception as exc:  # noqa: BLE001  one-line report, never a traceback
        return _fail(exc)
    echo = cfg.model_dump(mode="json")
    if cfg.format == "csv":
        text = jsonio.to_csv(*table)
    else:
        text = jsonio.dumps(jsonio.document(cfg.command, echo, result))
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
