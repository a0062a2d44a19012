"""Command line front end.

Runs are driven by an INI config file; every command writes its artifacts
plus a ``resolved.ini`` (the config with all defaults filled in) into the
output directory, so a run can be reproduced from its artifacts alone.

Exit codes: 0 success, 1 runtime or validation failure, 2 config error.
"""

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import geometry, solve, validation
from .assembly import assemble, write_matrix
from .errors import ConfigError, FraclapError
from .kernel import FracParams
from .quadrature import QuadratureConfig

_G = "%.17g"

_KNOWN_KEYS = {
    "geometry": {"kind", "radius", "center", "n_panels", "corners", "path", "refine"},
    "fractional": {"s"},
    "quadrature": {"gauss_order", "graded_levels", "near_field_ratio"},
    "data": {"kind", "value", "mode", "coefficients"},
    "output": {"directory", "matrix"},
    "eval": {"points", "ray", "radii"},
    "convergence": {"sizes"},
    "validate": {"s_values", "circle_sizes", "polygon_size"},
}


def _fail(path, section, key, message):
    where = f"{path}: [{section}]" + (f" {key}" if key else "")
    raise ConfigError(f"{where}: {message}")


class _Section:
    """Typed accessors for one INI section with uniform error reporting."""

    def __init__(self, parser, name, path):
        self.name = name
        self.path = path
        self.raw = dict(parser[name]) if parser.has_section(name) else {}

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key):
        if key not in self.raw:
            _fail(self.path, self.name, key, "required key is missing")
        return self.raw[key]

    def _convert(self, key, text, conv, what):
        try:
            return conv(text)
        except (ValueError, TypeError):
            _fail(self.path, self.name, key, f"expected {what}, got {text!r}")

    def getfloat(self, key, default=None, required=False):
        text = self.require(key) if required else self.get(key)
        if text is None:
            return default
        return self._convert(key, text, float, "a number")

    def getint(self, key, default=None, required=False):
        text = self.require(key) if required else self.get(key)
        if text is None:
            return default
        return self._convert(key, text, int, "an integer")

    def getbool(self, key, default=False):
        text = self.get(key)
        if text is None:
            return default
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        _fail(self.path, self.name, key, f"expected a boolean, got {text!r}")

    def getfloats(self, key, default=None, required=False):
        text = self.require(key) if required else self.get(key)
        if text is None:
            return default
        return self._convert(key, text, lambda t: [float(v) for v in t.split()],
                             "whitespace-separated numbers")

    def getints(self, key, default=None, required=False):
        text = self.require(key) if required else self.get(key)
        if text is None:
            return default
        return self._convert(key, text, lambda t: [int(v) for v in t.split()],
                             "whitespace-separated integers")

    def getpoints(self, key, required=False):
        """Parse ``x1 x2; x1 x2; ...`` into an (m, 2) array."""
        text = self.require(key) if required else self.get(key)
        if text is None:
            return None

        def conv(t):
            rows = [chunk.split() for chunk in t.split(";") if chunk.strip()]
            pts = np.array([[float(a), float(b)] for a, b in rows], dtype=float)
            if pts.size == 0:
                raise ValueError("empty")
            return pts

        return self._convert(key, text, conv, "points as 'x1 x2; x1 x2; ...'")


@dataclass
class RunConfig:
    """Fully parsed and defaulted run configuration."""

    path: str
    kind: str | None
    radius: float
    center: tuple
    n_panels: int | None
    corners: np.ndarray | None
    mesh_path: str | None
    refine: int
    s: float | None
    quad: QuadratureConfig
    data_kind: str | None
    data_value: float
    data_mode: int
    data_coeffs: list | None
    out_dir: Path
    dump_matrix: bool
    eval_points: np.ndarray | None
    eval_ray: np.ndarray | None
    eval_radii: list | None
    conv_sizes: list | None
    val_s_values: list
    val_circle_sizes: list
    val_polygon_size: int

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh, source=str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            if section not in _KNOWN_KEYS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key in parser[section]:
                if key not in _KNOWN_KEYS[section]:
                    _fail(path, section, key, "unknown key")

        geo = _Section(parser, "geometry", path)
        kind = geo.get("kind")
        if kind is not None and kind not in ("circle", "polygon", "file"):
            _fail(path, "geometry", "kind", f"must be circle, polygon or file, got {kind!r}")
        center_pts = geo.getpoints("center")
        if center_pts is not None and len(center_pts) != 1:
            _fail(path, "geometry", "center", "expected a single point 'x1 x2'")
        corners = geo.getpoints("corners")

        frac = _Section(parser, "fractional", path)
        s = frac.getfloat("s")

        qsec = _Section(parser, "quadrature", path)
        try:
            quad = QuadratureConfig(
                gauss_order=qsec.getint("gauss_order", 8),
                graded_levels=qsec.getint("graded_levels", 8),
                near_field_ratio=qsec.getfloat("near_field_ratio", 3.0),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: [quadrature] {exc}") from exc

        dsec = _Section(parser, "data", path)
        data_kind = dsec.get("kind")
        if data_kind is not None and data_kind not in ("constant", "cosine", "polynomial"):
            _fail(path, "data", "kind",
                  f"must be constant, cosine or polynomial, got {data_kind!r}")
        data_coeffs = dsec.getfloats("coefficients")
        if data_kind == "polynomial":
            if data_coeffs is None:
                _fail(path, "data", "coefficients", "required for polynomial data")
            if len(data_coeffs) != 6:
                _fail(path, "data", "coefficients",
                      f"expected 6 values c00 c10 c01 c20 c11 c02, got {len(data_coeffs)}")

        out = _Section(parser, "output", path)
        ev = _Section(parser, "eval", path)
        eval_ray_pts = ev.getpoints("ray")
        if eval_ray_pts is not None and len(eval_ray_pts) != 1:
            _fail(path, "eval", "ray", "expected a single direction 'x1 x2'")
        conv = _Section(parser, "convergence", path)
        val = _Section(parser, "validate", path)

        return cls(
            path=str(path),
            kind=kind,
            radius=geo.getfloat("radius", 1.0),
            center=tuple(center_pts[0]) if center_pts is not None else (0.0, 0.0),
            n_panels=geo.getint("n_panels"),
            corners=corners,
            mesh_path=geo.get("path"),
            refine=geo.getint("refine", 0),
            s=s,
            quad=quad,
            data_kind=data_kind,
            data_value=dsec.getfloat("value", 1.0),
            data_mode=dsec.getint("mode", 1),
            data_coeffs=data_coeffs,
            out_dir=Path(out.get("directory", "out")),
            dump_matrix=out.getbool("matrix", False),
            eval_points=ev.getpoints("points"),
            eval_ray=eval_ray_pts[0] if eval_ray_pts is not None else None,
            eval_radii=ev.getfloats("radii"),
            conv_sizes=conv.getints("sizes"),
            val_s_values=val.getfloats("s_values", [0.6, 0.75, 0.9]),
            val_circle_sizes=val.getints("circle_sizes", [32, 64]),
            val_polygon_size=val.getint("polygon_size", 48),
        )

    # -- derived objects ---------------------------------------------------

    def params(self):
        if self.s is None:
            raise ConfigError(f"{self.path}: [fractional] s: required key is missing")
        try:
            return FracParams(self.s)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: [fractional] s: {exc}") from exc

    def build_mesh(self):
        mesh = self._base_mesh(self.n_panels)
        for _ in range(self.refine):
            mesh = geometry.refine(mesh)
        return mesh

    def _base_mesh(self, n_panels):
        if self.kind is None:
            raise ConfigError(f"{self.path}: [geometry] kind: required key is missing")
        if self.kind == "circle":
            if n_panels is None:
                _fail(self.path, "geometry", "n_panels", "required for circle geometry")
            return geometry.mesh_circle(n_panels, radius=self.radius, center=self.center)
        if self.kind == "polygon":
            if self.corners is None:
                _fail(self.path, "geometry", "corners", "required for polygon geometry")
            if n_panels is None:
                _fail(self.path, "geometry", "n_panels", "required for polygon geometry")
            return geometry.mesh_polygon(self.corners, n_panels)
        if self.mesh_path is None:
            _fail(self.path, "geometry", "path", "required for file geometry")
        return geometry.read_mesh(self.mesh_path)

    def geometry_factory(self):
        """N -> mesh map for convergence studies (circle/polygon only)."""
        if self.kind == "file":
            _fail(self.path, "geometry", "kind",
                  "convergence studies need a parametric geometry (circle or polygon)")
        refine = self.refine

        def factory(n):
            mesh = self._base_mesh(n)
            for _ in range(refine):
                mesh = geometry.refine(mesh)
            return mesh

        return factory

    def boundary_data(self):
        if self.data_kind is None:
            raise ConfigError(f"{self.path}: [data] kind: required key is missing")
        if self.data_kind == "constant":
            return solve.constant_trace(self.data_value)
        if self.data_kind == "cosine":
            return solve.cosine_mode_trace(self.data_mode)
        return solve.polynomial_trace(self.data_coeffs)

    def eval_targets(self):
        have_points = self.eval_points is not None
        have_ray = self.eval_ray is not None or self.eval_radii is not None
        if have_points and have_ray:
            raise ConfigError(f"{self.path}: [eval]: give either points or ray+radii, not both")
        if have_points:
            return self.eval_points
        if self.eval_ray is None or self.eval_radii is None:
            raise ConfigError(f"{self.path}: [eval]: need points, or both ray and radii")
        e = np.asarray(self.eval_ray, dtype=float)
        norm = float(np.hypot(e[0], e[1]))
        if norm == 0.0:
            _fail(self.path, "eval", "ray", "direction must be nonzero")
        e = e / norm
        return np.asarray(self.eval_radii, dtype=float)[:, None] * e[None, :]

    # -- resolved snapshot ---------------------------------------------------

    def write_resolved(self):
        p = configparser.ConfigParser(interpolation=None)
        if self.kind is not None:
            sec = {"kind": self.kind, "refine": str(self.refine)}
            if self.kind == "circle":
                sec["radius"] = _G % self.radius
                sec["center"] = f"{_G % self.center[0]} {_G % self.center[1]}"
                sec["n_panels"] = str(self.n_panels)
            elif self.kind == "polygon":
                sec["corners"] = "; ".join(f"{_G % x} {_G % y}" for x, y in self.corners)
                sec["n_panels"] = str(self.n_panels)
            else:
                sec["path"] = self.mesh_path
            p["geometry"] = sec
        if self.s is not None:
            p["fractional"] = {"s": _G % self.s}
        p["quadrature"] = {
            "gauss_order": str(self.quad.gauss_order),
            "graded_levels": str(self.quad.graded_levels),
            "near_field_ratio": _G % self.quad.near_field_ratio,
        }
        if self.data_kind is not None:
            sec = {"kind": self.data_kind}
            if self.data_kind == "constant":
                sec["value"] = _G % self.data_value
            elif self.data_kind == "cosine":
                sec["mode"] = str(self.data_mode)
            else:
                sec["coefficients"] = " ".join(_G % c for c in self.data_coeffs)
            p["data"] = sec
        p["output"] = {
            "directory": str(self.out_dir),
            "matrix": "true" if self.dump_matrix else "false",
        }
        if self.eval_points is not None:
            p["eval"] = {"points": "; ".join(f"{_G % x} {_G % y}" for x, y in self.eval_points)}
        elif self.eval_ray is not None and self.eval_radii is not None:
            p["eval"] = {
                "ray": f"{_G % self.eval_ray[0]} {_G % self.eval_ray[1]}",
                "radii": " ".join(_G % r for r in self.eval_radii),
            }
        if self.conv_sizes is not None:
            p["convergence"] = {"sizes": " ".join(str(n) for n in self.conv_sizes)}
        p["validate"] = {
            "s_values": " ".join(_G % s for s in self.val_s_values),
            "circle_sizes": " ".join(str(n) for n in self.val_circle_sizes),
            "polygon_size": str(self.val_polygon_size),
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / "resolved.ini", "w", encoding="utf-8") as fh:
            p.write(fh)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _solve_chain(cfg):
    mesh = cfg.build_mesh()
    params = cfg.params()
    matrix = assemble(mesh, params, cfg.quad)
    data = cfg.boundary_data()
    rhs = solve.galerkin_rhs(mesh, data)
    density = solve.solve_dirichlet(matrix, rhs)
    residual = solve.trace_residual(matrix, density, rhs, mesh)
    return mesh, matrix, density, residual


def cmd_mesh(cfg):
    mesh = cfg.build_mesh()
    cfg.write_resolved()
    geometry.write_mesh(cfg.out_dir / "mesh.txt", mesh)
    print(f"mesh: {mesh.n_panels} panels, diameter {mesh.diameter:.6g}, "
          f"hash {mesh.mesh_hash[:12]}")
    return 0


def cmd_assemble(cfg):
    mesh = cfg.build_mesh()
    matrix = assemble(mesh, cfg.params(), cfg.quad)
    cfg.write_resolved()
    geometry.write_mesh(cfg.out_dir / "mesh.txt", mesh)
    write_matrix(cfg.out_dir / "matrix.bin", matrix)
    print(f"assembled {mesh.n_panels}x{mesh.n_panels} matrix, s={cfg.s:g}, "
          f"hash {mesh.mesh_hash[:12]}")
    return 0


def cmd_solve(cfg):
    mesh, matrix, density, residual = _solve_chain(cfg)
    cfg.write_resolved()
    geometry.write_mesh(cfg.out_dir / "mesh.txt", mesh)
    if cfg.dump_matrix:
        write_matrix(cfg.out_dir / "matrix.bin", matrix)
    solve.write_solution(cfg.out_dir / "solution.json", density, mesh, residual)
    print(f"solved {mesh.n_panels} panels, s={cfg.s:g}, trace residual {residual:.3e}")
    return 0


def cmd_eval(cfg):
    points = cfg.eval_targets()
    mesh, matrix, density, residual = _solve_chain(cfg)
    cfg.write_resolved()
    geometry.write_mesh(cfg.out_dir / "mesh.txt", mesh)
    if cfg.dump_matrix:
        write_matrix(cfg.out_dir / "matrix.bin", matrix)
    solve.write_solution(cfg.out_dir / "solution.json", density, mesh, residual)
    samples = solve.evaluate_field(density, mesh, points, cfg.quad)
    with open(cfg.out_dir / "field.csv", "w", encoding="utf-8") as fh:
        fh.write("x1,x2,dist,value\n")
        for pt, sample in zip(points, samples):
            if sample is None:
                fh.write(f"{_G % pt[0]},{_G % pt[1]},nan,nan\n")
            else:
                fh.write(f"{_G % pt[0]},{_G % pt[1]},"
                         f"{_G % sample.dist},{_G % sample.value}\n")
    skipped = sum(1 for smp in samples if smp is None)
    print(f"evaluated field at {len(samples)} points "
          f"({skipped} on the boundary, skipped), trace residual {residual:.3e}")
    return 0


def cmd_convergence(cfg):
    if cfg.conv_sizes is None:
        raise ConfigError(f"{cfg.path}: [convergence] sizes: required key is missing")
    cfg.params()  # validate early
    rows = validation.convergence_study(
        cfg.conv_sizes, cfg.s, cfg.boundary_data(),
        geometry_factory=cfg.geometry_factory(), quad=cfg.quad,
    )
    cfg.write_resolved()
    with open(cfg.out_dir / "convergence.csv", "w", encoding="utf-8") as fh:
        fh.write("N,L2_trace_error,slobodeckij_error,runtime\n")
        for row in rows:
            fh.write(f"{row['N']},{_G % row['L2_trace_error']},"
                     f"{_G % row['slobodeckij_error']},{_G % row['runtime']}\n")
    for row in rows:
        print(f"N={row['N']:>6d}  L2 trace error {row['L2_trace_error']:.6e}  "
              f"seminorm {row['slobodeckij_error']:.6e}  {row['runtime']:.2f}s")
    return 0


def cmd_validate(cfg):
    records = validation.run_validation_suite(
        s_values=tuple(cfg.val_s_values),
        circle_sizes=tuple(cfg.val_circle_sizes),
        polygon_size=cfg.val_polygon_size,
        quad=cfg.quad,
    )
    cfg.write_resolved()
    failed = [r for r in records if not r["pass"]]
    with open(cfg.out_dir / "validation.json", "w", encoding="utf-8") as fh:
        json.dump({"n_checks": len(records), "n_failed": len(failed), "records": records},
                  fh, indent=2)
        fh.write("\n")
    for r in records:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"{status}  {r['name']:<32s} value {r['value']: .6e}  "
              f"reference {r['reference']: .6e}  tol {r['tolerance']:.1e}")
    print(f"{len(records) - len(failed)}/{len(records)} checks passed")
    return 1 if failed else 0


_COMMANDS = {
    "mesh": cmd_mesh,
    "assemble": cmd_assemble,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "convergence": cmd_convergence,
    "validate": cmd_validate,
}


def _thread_limit():
    raw = os.environ.get("FRACLAP_MAX_THREADS")
    if raw is None:
        return None
    try:
        limit = int(raw)
        if limit < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(
            f"FRACLAP_MAX_THREADS must be a positive integer, got {raw!r}") from None
    return limit


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fraclap",
        description="Boundary-element solver for the fractional Dirichlet problem "
                    "via single layer potentials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("mesh", "build the boundary mesh and write it out"),
        ("assemble", "assemble and dump the Galerkin matrix"),
        ("solve", "solve for the layer density"),
        ("eval", "solve and evaluate the potential at field points"),
        ("convergence", "run a mesh refinement study"),
        ("validate", "run the full validation suite"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the INI run configuration")
    args = parser.parse_args(argv)

    try:
        limit = _thread_limit()
        cfg = RunConfig.from_file(args.config)
        if limit is not None:
            with threadpool_limits(limits=limit):
                return _COMMANDS[args.command](cfg)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FraclapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
