"""Command-line orchestration: reproducible experiments and artifact emission.

Subcommand grammar::

    pws-mpp <experiment> [--config FILE] [--set key=value]... [--out DIR]
            [--threads N] [--seed S]
    pws-mpp figure <preset> [same flags; --set accepts part.key=value]

Each run writes CSV artifacts plus a JSON manifest named
``<experiment>-<hash>[-<part>].csv`` / ``<experiment>-<hash>.json`` where
``<hash>`` is the first 12 hex digits of the SHA-256 of the canonical
(sorted ``key=value``) configuration text.  Config files are flat
``key=value`` lines; unknown keys are rejected and command-line ``--set``
pairs override file values.  Exit status is 0 on success, 2 on validation
errors, and 3 on numerical failures.

CSV output is RFC 4180 (CRLF, header row) with round-trip float
formatting, so reruns with the same seed in sequential-reduction mode are
bit-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys

import numpy as np
import scipy.linalg
from scipy.optimize import minimize as _minimize

from . import __version__
from .action import DiscretePath, action_gradient, fw_action, gamma_action, gamma_action_1d
from .fields import NonAutonomousParams1D, PiecewiseLinearParams2D
from .filippov import (
    EventResolutionError,
    NotALimitCycleError,
    classify_sigma,
    cycle_data_2d,
    equilibrium_class_2d,
    filippov_lambda,
    h_minus_peak_time,
    integrate_filippov,
    nullclines_1d,
    stable_cycles_1d,
)
from .mc import (
    BallTipping1D,
    BallTipping2D,
    CycleTipping1D,
    DoubleWellToy1D,
    EnsembleConfig,
    InsufficientDataError,
    mean_transition_path,
    run_ensemble,
)
from .mollifier import KernelError, MollifierKernel, as_drift, mollify
from .mpath import (
    GradientFlowDivergenceError,
    PathNeverCrossesError,
    ShootingConvergenceError,
    TheoremInapplicableError,
    analytic_mpp_case2,
    gradient_flow_minimize,
    kramers_lower_bound,
    shoot_heteroclinic_case1,
    sliding_family_case1,
)

__all__ = ["main", "figure_presets", "run_experiment"]


class CLIValidationError(ValueError):
    """Raised for config parse, schema, or argument errors (exit 2)."""


_NUMERICAL_ERRORS = (
    TheoremInapplicableError,
    ShootingConvergenceError,
    GradientFlowDivergenceError,
    PathNeverCrossesError,
    NotALimitCycleError,
    EventResolutionError,
    KernelError,
)


# ---------------------------------------------------------------------------
# config schema


@dataclasses.dataclass(frozen=True)
class Key:
    typ: str  # int | float | str | bool | floats | ints
    default: object = None
    required: bool = False
    choices: tuple | None = None
    help: str = ""


_FAMILY_KEYS = {
    "case1": {
        "a": Key("float", -2.0),
        "b": Key("float", -7.0),
        "c": Key("float", 1.0),
        "p": Key("float", -2.0),
        "q": Key("float", -7.0),
        "r": Key("float", 1.0),
        "eta": Key("float", -2.0),
    },
    "case2": {
        "r_plus": Key("float", 2.0),
        "r_minus": Key("float", 3.0),
        "A_plus": Key("float", 1.0),
        "A_minus": Key("float", 1.0),
        "p": Key("float", 0.0),
        "a": Key("float", -0.5),
    },
    "toy": {},
}

_KERNEL_KEYS = {
    "kernel_kind": Key("str", None, choices=("compact_bump", "gaussian"),
                       help="default: compact_bump (case1), gaussian (case2)"),
    "kernel_eps": Key("float", required=True),
}

_SCHEMAS: dict[str, dict[str, Key]] = {
    "classify": {
        "family": Key("str", "case1", choices=("case1", "case2")),
        "grid_min": Key("float", None, help="y for case1, t for case2"),
        "grid_max": Key("float", None),
        "grid_n": Key("int", 241),
    },
    "integrate": {
        "family": Key("str", "case1", choices=("case1", "case2", "toy")),
        "x0": Key("floats", required=True),
        "t0": Key("float", 0.0),
        "tf": Key("float", required=True),
        "tol": Key("float", 1e-9),
        "max_step": Key("float", 0.1),
    },
    "mollify-sample": {
        "family": Key("str", "case1", choices=("case1", "case2")),
        **_KERNEL_KEYS,
        "x_min": Key("float", -1.0),
        "x_max": Key("float", 1.0),
        "n": Key("int", 401),
        "y": Key("float", 0.0, help="second state component (case1 only)"),
        "t": Key("float", 0.0),
    },
    "action-eval": {
        "family": Key("str", "case1", choices=("case1", "case2")),
        "input": Key("str", required=True, help="CSV path with t,x[,y] columns"),
        "kernel_kind": Key("str", None, choices=("compact_bump", "gaussian")),
        "kernel_eps": Key("float", None, help="if set, also report the mollified action"),
    },
    "mpp-gradflow": {
        "family": Key("str", "case1", choices=("case1", "case2")),
        **_KERNEL_KEYS,
        "t0": Key("float", 0.0),
        "tf": Key("float", 20.0),
        "m": Key("int", 800),
        "coarse_m": Key("int", None,
                        help="relax on this coarser grid first, then refine to m"),
        "eps_stages": Key("floats", None,
                          help="kernel-width continuation ladder polished in "
                               "order before the final kernel_eps"),
        "ds": Key("float", None),
        "max_iters": Key("int", 200_000),
        "grad_tol": Key("float", 1e-6),
        "init": Key("str", "line", choices=("line", "analytic")),
        "polish": Key("bool", True),
        "bc_x0": Key("floats", None, help="start state; family default if unset"),
        "bc_xf": Key("floats", None, help="end state; family default if unset"),
    },
    "mpp-shoot": {
        "family": Key("str", "case1", choices=("case1",)),
        **_KERNEL_KEYS,
        "theta_samples": Key("int", None),
        "t2_max": Key("float", None),
        "match_tol": Key("float", None),
    },
    "mpp-analytic": {
        "family": Key("str", "case2", choices=("case2",)),
        "m": Key("int", 4000),
        "t_start": Key("float", None),
        "t_end": Key("float", None),
        "shifts": Key("ints", (0,), help="integer period shifts, comma separated"),
    },
    "mc-run": {
        "family": Key("str", "case1", choices=("case1", "case2", "toy")),
        "sigma": Key("float", required=True),
        "dt": Key("float", 1e-3),
        "n_trajectories": Key("int", required=True),
        "t0": Key("float", 0.0),
        "tf": Key("float", required=True),
        "master_seed": Key("int", 0),
        "alignment": Key("str", "auto", choices=("auto", "crossing", "symmetric", "phase")),
        "mean_bin_width": Key("float", None),
        "phase_bins": Key("int", 200),
        "allow_large_dt": Key("bool", False),
        "radius": Key("float", 0.1, help="target-entry radius (ball tipping families)"),
        "source_radius": Key("float", 0.1),
        "x0": Key("floats", None),
        "dens_x_min": Key("float", None),
        "dens_x_max": Key("float", None),
        "dens_x_n": Key("int", None),
        "dens_v_min": Key("float", None, help="second density axis: y (case1) or phase"),
        "dens_v_max": Key("float", None),
        "dens_v_n": Key("int", None),
    },
    "cycle-sweep": {
        "family": Key("str", "case1", choices=("case1",)),
        "eta_min": Key("float", 0.0),
        "eta_max": Key("float", 0.85),
        "n_eta": Key("int", 86),
    },
}

# cycle-sweep sweeps eta itself
_SCHEMAS["cycle-sweep"].update(
    {k: v for k, v in _FAMILY_KEYS["case1"].items() if k != "eta"}
)

_EXPERIMENTS = tuple(_SCHEMAS) + ("figure",)


def _schema_for(kind: str, config: dict[str, str]) -> dict[str, Key]:
    base = dict(_SCHEMAS[kind])
    if "family" in base and kind != "cycle-sweep":
        family = config.get("family", base["family"].default)
        if family in _FAMILY_KEYS:
            base.update(_FAMILY_KEYS[family])
    return base


def _parse_value(key: str, spec: Key, raw: str):
    raw = raw.strip()
    try:
        if spec.typ == "int":
            return int(raw)
        if spec.typ == "float":
            return float(raw)
        if spec.typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if spec.typ == "floats":
            return tuple(float(part) for part in raw.split(","))
        if spec.typ == "ints":
            return tuple(int(part) for part in raw.split(","))
        value = raw
    except ValueError:
        raise CLIValidationError(
            f"key {key!r}: cannot parse {raw!r} as {spec.typ}"
        ) from None
    if spec.choices is not None and value not in spec.choices:
        raise CLIValidationError(
            f"key {key!r}: {value!r} not one of {sorted(spec.choices)}"
        )
    return value


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _validate_config(kind: str, raw: dict[str, str]) -> dict:
    schema = _schema_for(kind, raw)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise CLIValidationError(
            f"unknown keys for {kind}: {', '.join(unknown)}; "
            f"valid keys: {', '.join(sorted(schema))}"
        )
    config = {}
    for key, spec in schema.items():
        if key in raw:
            config[key] = _parse_value(key, spec, raw[key])
        elif spec.required:
            missing = sorted(
                k for k, s in schema.items() if s.required and k not in raw
            )
            raise CLIValidationError(
                f"missing required keys for {kind}: {', '.join(missing)}"
            )
        else:
            config[key] = spec.default
    if "kernel_kind" in config and config["kernel_kind"] is None:
        config["kernel_kind"] = (
            "gaussian" if config.get("family") == "case2" else "compact_bump"
        )
    return config


def _canonical(kind: str, config: dict) -> str:
    lines = [f"experiment={kind}"]
    for key in sorted(config):
        value = config[key]
        if value is None:
            continue
        lines.append(f"{key}={_format_value(value)}")
    return "\n".join(lines) + "\n"


def _hash(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _read_config_file(path: str) -> dict[str, str]:
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise CLIValidationError(f"cannot read config file {path}: {exc}") from None
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise CLIValidationError(f"{path}:{lineno}: expected key=value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in out:
            raise CLIValidationError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


# ---------------------------------------------------------------------------
# emission helpers


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(cell) for cell in row])


def _path_rows(path: DiscretePath):
    states = np.atleast_2d(path.states.T).T
    for t, row in zip(path.times, states):
        yield (t, *row)


def _path_header(dim: int):
    return ("t", "x") if dim == 1 else ("t", "x", "y")


# ---------------------------------------------------------------------------
# shared model construction


def _build_params(config: dict):
    family = config["family"]
    if family == "case1":
        return PiecewiseLinearParams2D(
            a=config["a"], b=config["b"], c=config["c"],
            p=config["p"], q=config["q"], r=config["r"], eta=config["eta"],
        )
    if family == "case2":
        return NonAutonomousParams1D(
            r_plus=config["r_plus"], r_minus=config["r_minus"],
            A_plus=config["A_plus"], A_minus=config["A_minus"],
            p=config["p"], a=config["a"],
        )
    return DoubleWellToy1D()


def _build_kernel(config: dict) -> MollifierKernel:
    return MollifierKernel(config["kernel_kind"], config["kernel_eps"])


def _default_bc(config: dict, params):
    if config["family"] == "case1":
        return np.asarray(params.x_plus, dtype=float), np.asarray(params.x_minus, dtype=float)
    h_plus, h_minus = stable_cycles_1d(params)
    return (np.asarray([float(h_minus(config["t0"]))]),
            np.asarray([float(h_plus(config["tf"]))]))


def _flow_with_backoff(field, kernel, bc, m, ds, max_iters, grad_tol, initial):
    t0, _, tf, _ = bc
    dt = (tf - t0) / m
    step = ds if ds is not None else 0.4 * dt * dt
    last_error = None
    for _ in range(12):
        try:
            result = gradient_flow_minimize(
                field, kernel, bc, m, ds=step, max_iters=max_iters,
                grad_tol=grad_tol, initial=initial,
            )
            return result, step
        except GradientFlowDivergenceError as exc:
            last_error = exc
            step /= 4.0
    raise last_error


def _lbfgs_polish(path: DiscretePath, drift, maxiter=20_000, gtol=1e-9) -> DiscretePath:
    states = path.states
    scalar = states.ndim == 1
    interior = states[1:-1]
    shape = interior.shape

    def rebuild(flat):
        mid = flat.reshape(shape)
        if scalar:
            stacked = np.concatenate([[states[0]], mid, [states[-1]]])
        else:
            stacked = np.vstack([states[:1], mid, states[-1:]])
        return DiscretePath(path.t0, path.tf, stacked)

    def fg(flat):
        candidate = rebuild(flat)
        grad = action_gradient(candidate, drift)
        return fw_action(candidate, drift), (-2.0 * candidate.dt * grad).ravel()

    result = _minimize(
        fg, interior.ravel(), jac=True, method="L-BFGS-B",
        options={"maxiter": maxiter, "ftol": 1e-18, "gtol": gtol},
    )

    # Descent stalls once achievable action decrements drop below float64
    # resolution; a root solve on the stationarity system is not bound by
    # that floor and reaches gradient norms well under any descent method.
    return _banded_newton_refine(rebuild(result.x), drift)


def _banded_newton_refine(path: DiscretePath, drift, f_tol=1e-9, maxiter=120):
    """Levenberg-Marquardt on the stationarity system, exact banded Jacobian.

    The discrete action gradient at interior node k involves nodes
    k-1..k+1 only, so in interleaved layout the Jacobian is banded with
    half-bandwidth 2n-1 and coloured central differences recover every
    entry in 2*(4n-1) residual sweeps.  The Marquardt multiple of the
    Gram diagonal caps each node's move at its own curvature scale
    (mollified-layer nodes are orders stiffer than the rest) and decays
    toward plain Gauss-Newton as the root is approached.  Never returns
    a path with a larger sup-norm gradient than the input.
    """

    import scipy.sparse
    import scipy.sparse.linalg

    states = np.asarray(path.states, dtype=float)
    scalar = states.ndim == 1
    work = states.reshape(states.shape[0], -1).copy()
    n = work.shape[1]
    nv = (work.shape[0] - 2) * n
    if nv == 0:
        return path

    def rebuild(flat):
        full = work.copy()
        full[1:-1] = flat.reshape(-1, n)
        return DiscretePath(path.t0, path.tf, full[:, 0] if scalar else full)

    def residual(flat):
        return np.asarray(action_gradient(rebuild(flat), drift), dtype=float).ravel()

    band = 2 * n - 1
    stride = 2 * band + 1
    x = work[1:-1].ravel().copy()
    r = residual(x)
    sq = float(r @ r)
    best_x, best_sup = x.copy(), float(np.max(np.abs(r)))
    lam = 1e-3
    for _ in range(maxiter):
        if not math.isfinite(best_sup) or best_sup < f_tol:
            break
        # Step below the finest mollifier-layer feature scale; gradient
        # evaluation noise (~1e-10) stays negligible against every row's
        # curvature at this width.
        ab = np.zeros((2 * band + 1, nv))
        h = 1e-8 * np.maximum(1.0, np.abs(x))
        for color in range(stride):
            idx = np.arange(color, nv, stride)
            if idx.size == 0:
                continue
            probe = np.zeros(nv)
            probe[idx] = h[idx]
            rp = residual(x + probe)
            rm = residual(x - probe)
            for j in idx:
                lo = max(0, j - band)
                hi = min(nv, j + band + 1)
                rows = np.arange(lo, hi)
                ab[band + rows - j, j] = (rp[lo:hi] - rm[lo:hi]) / (2.0 * h[j])
        rows_il, cols_il, vals_il = [], [], []
        for off in range(-band, band + 1):
            cols = np.arange(max(0, -off), nv - max(0, off))
            rows_il.append(cols + off)
            cols_il.append(cols)
            vals_il.append(ab[band + off, cols])
        jac = scipy.sparse.csr_matrix(
            (np.concatenate(vals_il), (np.concatenate(rows_il), np.concatenate(cols_il))),
            shape=(nv, nv),
        )
        gram = (jac.T @ jac).tocsr()
        grad = jac.T @ r
        if float(np.max(np.abs(grad))) <= 1e-30:
            break
        dscale = np.maximum(gram.diagonal(), 1e-30)
        reg = scipy.sparse.diags(dscale)
        accepted = False
        for _ in range(30):
            try:
                delta = scipy.sparse.linalg.spsolve(
                    (gram + lam * reg).tocsc(), -grad
                )
            except RuntimeError:
                lam *= 8.0
                continue
            if not np.all(np.isfinite(delta)):
                lam *= 8.0
                continue
            candidate = x + delta
            rc = residual(candidate)
            sqc = float(rc @ rc)
            if math.isfinite(sqc) and sqc < sq:
                x, r, sq = candidate, rc, sqc
                sup = float(np.max(np.abs(rc)))
                if sup < best_sup:
                    best_x, best_sup = candidate.copy(), sup
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 8.0
        if not accepted:
            break
    return rebuild(best_x)


# ---------------------------------------------------------------------------
# experiment runners: each returns (parts, outputs) where parts is a list of
# (part_name_or_None, header, rows)


def _run_classify(config, threads):
    params = _build_params(config)
    field = params.as_field()
    if config["family"] == "case1":
        lo = -3.0 if config["grid_min"] is None else config["grid_min"]
        hi = 3.0 if config["grid_max"] is None else config["grid_max"]
        grid = np.linspace(lo, hi, config["grid_n"])
        header = ("y", "lambda", "label")
        point = lambda v: np.asarray([v])
        times = np.zeros_like(grid)
    else:
        lo = 0.0 if config["grid_min"] is None else config["grid_min"]
        hi = 1.0 if config["grid_max"] is None else config["grid_max"]
        grid = np.linspace(lo, hi, config["grid_n"])
        header = ("t", "lambda", "label")
        point = lambda v: np.empty(0)
        times = grid

    rows = []
    counts: dict[str, int] = {}
    for v, t in zip(grid, times):
        label = classify_sigma(field, point(v), float(t)).name
        try:
            lam = filippov_lambda(field, point(v), float(t))
        except (ValueError, ZeroDivisionError):
            lam = None
        if lam is not None and not math.isfinite(lam):
            lam = None
        rows.append((v, lam, label))
        counts[label] = counts.get(label, 0) + 1
    return [(None, header, rows)], {"label_counts": counts, "n_points": len(rows)}


def _run_integrate(config, threads):
    params = _build_params(config)
    field = params.as_field()
    x0 = np.asarray(config["x0"], dtype=float)
    dim = 2 if config["family"] == "case1" else 1
    if x0.shape != (dim,):
        raise CLIValidationError(f"x0 must have {dim} components for {config['family']}")
    traj = integrate_filippov(
        field, x0, config["t0"], config["tf"],
        tol=config["tol"], max_step=config["max_step"],
    )
    times, states, modes = traj.concatenated()
    states = np.atleast_2d(states.T).T
    header = _path_header(dim) + ("mode",)
    rows = [(t, *row, mode) for t, row, mode in zip(times, states, modes)]
    events = [
        {"time": ev.time, "from": str(ev.from_mode), "to": str(ev.to_mode)}
        for ev in traj.events
    ]
    outputs = {
        "n_samples": len(rows),
        "n_events": len(events),
        "final_state": [float(v) for v in np.atleast_1d(traj.final_state)],
        "final_time": float(traj.final_time),
    }
    return [(None, header, rows)], outputs


def _run_mollify_sample(config, threads):
    params = _build_params(config)
    field = params.as_field()
    kernel = _build_kernel(config)
    xs = np.linspace(config["x_min"], config["x_max"], config["n"])
    rows = []
    if config["family"] == "case1":
        header = ("x", "Fx", "Fy")
        for x in xs:
            value = np.atleast_1d(mollify(field, kernel, float(x), np.asarray([config["y"]]), config["t"]))
            rows.append((x, value[0], value[1]))
    else:
        header = ("x", "Fx")
        for x in xs:
            value = np.atleast_1d(mollify(field, kernel, float(x), np.empty(0), config["t"]))
            rows.append((x, value[0]))
    return [(None, header, rows)], {"n_points": len(rows), "support_radius": kernel.support_radius}


def _read_path_csv(path_str: str) -> DiscretePath:
    try:
        with open(path_str, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = [[float(cell) for cell in row] for row in reader if row]
    except OSError as exc:
        raise CLIValidationError(f"cannot read input CSV {path_str}: {exc}") from None
    except (ValueError, StopIteration):
        raise CLIValidationError(f"input CSV {path_str} is not numeric t,x[,y]") from None
    if len(header) < 2 or header[0].strip().lower() != "t":
        raise CLIValidationError("input CSV must have header t,x[,y]")
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise CLIValidationError("input CSV needs at least two samples")
    times, states = arr[:, 0], arr[:, 1:]
    steps = np.diff(times)
    if steps.min() <= 0 or abs(steps.max() - steps.min()) > 1e-9 * max(steps.max(), 1.0):
        raise CLIValidationError("input CSV must be sampled on a uniform time grid")
    return DiscretePath(float(times[0]), float(times[-1]), states)


def _run_action_eval(config, threads):
    params = _build_params(config)
    path = _read_path_csv(config["input"])
    expected_dim = 2 if config["family"] == "case1" else 1
    if path.dim != expected_dim:
        raise CLIValidationError(
            f"input path has dim {path.dim}, family {config['family']} needs {expected_dim}"
        )
    if config["family"] == "case1":
        breakdown = gamma_action(path, params.as_field())
    else:
        breakdown = gamma_action_1d(path, params)
    outputs = {
        "total": breakdown.total,
        "smooth_action": breakdown.smooth_action,
        "sliding_action": breakdown.sliding_action,
        "sigma_time_fraction": breakdown.sigma_time_fraction,
        "m": breakdown.m,
        "dt": breakdown.dt,
    }
    if config["kernel_eps"] is not None:
        kernel = MollifierKernel(config["kernel_kind"], config["kernel_eps"])
        drift = as_drift(params, kernel)
        outputs["mollified_action"] = fw_action(path, drift)
    header = tuple(outputs)
    return [(None, header, [tuple(outputs[k] for k in header)])], outputs


def _run_mpp_gradflow(config, threads):
    params = _build_params(config)
    field = params.as_field()
    kernel = _build_kernel(config)
    t0, tf, m = config["t0"], config["tf"], config["m"]
    dim = 2 if config["family"] == "case1" else 1

    initial = None
    if config["init"] == "analytic":
        if config["family"] != "case2":
            raise CLIValidationError("init=analytic requires family=case2")
        initial, _ = analytic_mpp_case2(params, grid=(t0, tf, m))

    if initial is not None:
        x0 = np.atleast_1d(initial.states[0]).astype(float)
        xf = np.atleast_1d(initial.states[-1]).astype(float)
    else:
        x0_default, xf_default = _default_bc(config, params)
        x0 = np.asarray(config["bc_x0"], dtype=float) if config["bc_x0"] else x0_default
        xf = np.asarray(config["bc_xf"], dtype=float) if config["bc_xf"] else xf_default
    if x0.shape != (dim,) or xf.shape != (dim,):
        raise CLIValidationError(f"boundary states must have {dim} components")
    if dim == 1:
        bc = (t0, x0[0], tf, xf[0])
    else:
        bc = (t0, x0, tf, xf)

    # Descent alone stalls on soft modes, and descent run too long at full
    # resolution can wander into the near-flat mollified layer; the robust
    # order is shape-establishing flow, then L-BFGS with a Newton finish,
    # then a confirming flow.  Kernel widths far below the grid scale make
    # the explicit flow unable to move at all, so those are reached by
    # polishing down a continuation ladder of widths instead.
    stage_eps = list(config["eps_stages"] or ()) + [config["kernel_eps"]]
    first_kernel = MollifierKernel(config["kernel_kind"], stage_eps[0])
    if config["eps_stages"] and initial is None:
        initial = DiscretePath.straight_line(bc[1], bc[3], t0, tf, m)

    iterations = 0
    if config["coarse_m"] is not None:
        coarse_initial = None
        if config["init"] == "analytic":
            coarse_initial, _ = analytic_mpp_case2(
                params, grid=(t0, tf, config["coarse_m"])
            )
        coarse, _ = _flow_with_backoff(
            params, first_kernel, bc, config["coarse_m"], config["ds"],
            config["max_iters"], config["grad_tol"], coarse_initial,
        )
        iterations += coarse.iterations
        initial = _resample(coarse.path, m)

    polished_first = False
    if config["polish"] and initial is not None:
        for eps in stage_eps:
            drift = as_drift(params, MollifierKernel(config["kernel_kind"], eps))
            initial = _lbfgs_polish(initial, drift)
        polished_first = True

    result, ds_used = _flow_with_backoff(
        params, kernel, bc, m, config["ds"], config["max_iters"],
        config["grad_tol"], initial,
    )
    iterations += result.iterations
    if config["polish"] and not polished_first:
        drift = as_drift(params, kernel)
        polished = _lbfgs_polish(result.path, drift)
        result, ds_used = _flow_with_backoff(
            params, kernel, bc, m, ds_used, config["max_iters"],
            config["grad_tol"], polished,
        )
        iterations += result.iterations

    path = result.path
    history = np.asarray(result.action_history)
    if config["family"] == "case1":
        breakdown = gamma_action(path, field)
    else:
        breakdown = gamma_action_1d(path, params)
    outputs = {
        "action": history[-1],
        "gamma_total": breakdown.total,
        "gamma_sliding": breakdown.sliding_action,
        "sigma_time_fraction": breakdown.sigma_time_fraction,
        "iterations": iterations,
        "converged": bool(result.converged),
        "final_gradient_norm": result.final_gradient_norm,
        "ds_used": ds_used,
        "monotone_history": bool(np.all(np.diff(history) <= 1e-12 * max(1.0, history[0]))),
        "polished": bool(config["polish"]),
    }
    return [(None, _path_header(dim), list(_path_rows(path)))], outputs


def _run_mpp_shoot(config, threads):
    from .mpath import ShootingControls

    params = _build_params(config)
    kernel = _build_kernel(config)
    controls = ShootingControls()
    overrides = {
        k: config[k]
        for k in ("theta_samples", "t2_max", "match_tol")
        if config[k] is not None
    }
    if overrides:
        controls = dataclasses.replace(controls, **overrides)
    result = shoot_heteroclinic_case1(params, kernel, controls=controls)
    xy_times, xy_states = result.xy_path()
    parts = [(None, ("t", "x", "y"),
              [(t, *row) for t, row in zip(xy_times, xy_states)])]
    full_t = result.full_times()
    full_s = result.full_states()
    parts.append(
        ("el", ("t", "z", "y", "phi", "psi"),
         [(t, *row) for t, row in zip(full_t, full_s)])
    )
    outputs = {
        "eps": result.eps,
        "theta": result.theta,
        "matching_residual": result.matching_residual,
        "endpoint_error": result.endpoint_error,
        "h_max": result.h_max,
    }
    return parts, outputs


def _run_mpp_analytic(config, threads):
    params = _build_params(config)
    base_path, action = analytic_mpp_case2(params)
    if config["t_start"] is not None or config["t_end"] is not None:
        if config["t_start"] is None or config["t_end"] is None:
            raise CLIValidationError("t_start and t_end must be set together")
        base_path, action = analytic_mpp_case2(
            params, grid=(config["t_start"], config["t_end"], config["m"])
        )
    elif config["m"] != 4000:
        base_path, action = analytic_mpp_case2(params, grid=config["m"])

    rows = []
    for shift in config["shifts"]:
        shifted, _ = analytic_mpp_case2(
            params, grid=(base_path.t0 + shift, base_path.tf + shift, base_path.m)
        )
        for t, x in zip(shifted.times, shifted.states.ravel()):
            rows.append((shift, t, x))
    t_max = h_minus_peak_time(params)
    outputs = {
        "action": action,
        "t_max": t_max,
        "gamma_total": gamma_action_1d(base_path, params).total,
        "kramers_lower_bound": kramers_lower_bound(params, base_path),
        "shifts": list(config["shifts"]),
    }
    return [(None, ("shift", "t", "x"), rows)], outputs


def _density_parts(ensemble, config, family):
    x_edges, v_edges = ensemble.density_edges
    x_centers = 0.5 * (x_edges[:-1] + x_edges[1:])
    v_centers = 0.5 * (v_edges[:-1] + v_edges[1:])
    second_axis = "y" if family == "case1" else "phase"
    header = ["x_center"] + [repr(float(c)) for c in v_centers]
    rows = [
        (x_centers[i], *ensemble.density[i, :]) for i in range(len(x_centers))
    ]
    return header, rows, second_axis


def _run_mc(config, threads):
    params = _build_params(config)
    family = config["family"]
    if family == "case1":
        tipping = BallTipping2D(
            target_center=np.asarray(params.x_minus, dtype=float),
            source_center=np.asarray(params.x_plus, dtype=float),
            radius=config["radius"], source_radius=config["source_radius"],
        )
    elif family == "case2":
        tipping = CycleTipping1D(source_radius=config["source_radius"])
    else:
        tipping = BallTipping1D(
            radius=config["radius"], source_radius=config["source_radius"]
        )

    grid_keys = ("dens_x_min", "dens_x_max", "dens_x_n", "dens_v_min", "dens_v_max", "dens_v_n")
    grid_values = [config[k] for k in grid_keys]
    density_grid = None
    if any(v is not None for v in grid_values):
        if any(v is None for v in grid_values):
            raise CLIValidationError(
                "density grid overrides require all of " + ", ".join(grid_keys)
            )
        density_grid = (
            (config["dens_x_min"], config["dens_x_max"], config["dens_x_n"]),
            (config["dens_v_min"], config["dens_v_max"], config["dens_v_n"]),
        )

    x0 = None
    if config["x0"] is not None:
        x0 = np.asarray(config["x0"], dtype=float)
        if family != "case1":
            x0 = float(x0[0])

    ens_config = EnsembleConfig(
        sigma=config["sigma"], dt=config["dt"],
        n_trajectories=config["n_trajectories"],
        t0=config["t0"], tf=config["tf"], master_seed=config["master_seed"],
        tipping=tipping, density_grid=density_grid, x0=x0,
        mean_bin_width=config["mean_bin_width"], phase_bins=config["phase_bins"],
        allow_large_dt=config["allow_large_dt"],
    )
    ensemble = run_ensemble(params, ens_config, workers=threads)

    header, rows, second_axis = _density_parts(ensemble, config, family)
    parts = [(None, header, rows)]
    outputs = {
        "tip_count": ensemble.tip_count,
        "fraction": ensemble.fraction,
        "standard_error": ensemble.standard_error,
        "master_seed": config["master_seed"],
        "n_trajectories": ensemble.n,
        "n_steps": ens_config.n_steps,
        "density_axis2": second_axis,
        "density_x_edges": [float(x_) for x_ in ensemble.density_edges[0][[0, -1]]],
        "density_v_edges": [float(v_) for v_ in ensemble.density_edges[1][[0, -1]]],
    }
    if ensemble.warning:
        outputs["warning"] = ensemble.warning
    try:
        mean_path = mean_transition_path(ensemble, alignment=config["alignment"])
        dim = 2 if family == "case1" else 1
        parts.append(("mean", _path_header(dim), list(_path_rows(mean_path))))
        outputs["mean_bins"] = mean_path.m + 1
    except InsufficientDataError as exc:
        outputs["mean_path"] = f"skipped: {exc}"
    return parts, outputs


def _run_cycle_sweep(config, threads):
    params = PiecewiseLinearParams2D(
        a=config["a"], b=config["b"], c=config["c"],
        p=config["p"], q=config["q"], r=config["r"], eta=config["eta_min"],
    )
    grid = np.linspace(config["eta_min"], config["eta_max"], config["n_eta"])
    records = cycle_data_2d(params, grid)
    slots = 4
    header = ["eta", "crossing_y_upper", "crossing_y_lower", "crossing_period",
              "crossing_residual", "n_sliding"]
    for i in range(1, slots + 1):
        header += [f"sliding{i}_side", f"sliding{i}_y_fold", f"sliding{i}_y_exit",
                   f"sliding{i}_arc_time"]
    header.append("seed_note")
    rows = []
    max_sliding = 0
    for rec in records:
        cross = rec.crossing
        row = [rec.eta]
        row += ([cross.y_upper, cross.y_lower, cross.period, cross.residual]
                if cross is not None else [None] * 4)
        row.append(len(rec.sliding))
        max_sliding = max(max_sliding, len(rec.sliding))
        for i in range(slots):
            if i < len(rec.sliding):
                s = rec.sliding[i]
                row += [s.side, s.y_fold, s.y_exit, s.arc_time]
            else:
                row += [None] * 4
        row.append(rec.seed_note)
        rows.append(tuple(row))
    outputs = {
        "n_eta": len(records),
        "with_crossing": sum(1 for r in records if r.crossing is not None),
        "max_sliding_cycles": max_sliding,
    }
    return [(None, tuple(header), rows)], outputs


_RUNNERS = {
    "classify": _run_classify,
    "integrate": _run_integrate,
    "mollify-sample": _run_mollify_sample,
    "action-eval": _run_action_eval,
    "mpp-gradflow": _run_mpp_gradflow,
    "mpp-shoot": _run_mpp_shoot,
    "mpp-analytic": _run_mpp_analytic,
    "mc-run": _run_mc,
    "cycle-sweep": _run_cycle_sweep,
}


# ---------------------------------------------------------------------------
# figure presets


_CASE1_FIG = {"a": "-2.0", "b": "-7.0", "c": "1.0", "p": "-2.0", "q": "-7.0", "r": "1.0"}


def _case2_kernel_window(p: float, r_minus: float) -> tuple[float, float]:
    t_max = p + math.atan(2.0 * math.pi / r_minus) / (2.0 * math.pi)
    return t_max - 8.0, t_max + 12.0


def _figure_presets() -> dict[str, dict]:
    fig8a_t0, fig8a_tf = _case2_kernel_window(0.25, 3.0)
    sigma_8a, sigma_8b = 0.22, 0.07
    presets: dict[str, dict] = {}

    presets["fig2a"] = {
        "description": "stability classes of the positive-side equilibrium over (a, b)",
        "parts": [("stability", "_fig2a", {})],
    }
    presets["fig2b"] = {
        "description": "crossing and sliding limit-cycle sweep over eta",
        "parts": [("cycles", "cycle-sweep", {**{k: v for k, v in _CASE1_FIG.items()},
                                             "eta_min": "0.0", "eta_max": "0.85",
                                             "n_eta": "86"})],
    }
    presets["fig3"] = {
        "description": "heteroclinic most probable paths for decreasing mollifier widths",
        "parts": [
            (f"eps-{eps}", "mpp-shoot",
             {**_CASE1_FIG, "eta": "-2.0", "kernel_eps": str(eps)})
            for eps in (0.5, 0.1, 0.05)
        ],
    }
    presets["fig4a"] = {
        "description": "attracting-sliding tipping density, mean path, and MPP",
        "parts": [
            ("mpp", "mpp-shoot", {**_CASE1_FIG, "eta": "-2.0", "kernel_eps": "0.05"}),
            ("density", "mc-run",
             {**_CASE1_FIG, "eta": "-2.0", "sigma": "0.3", "dt": "0.001",
              "n_trajectories": "1000000", "tf": "60.0", "master_seed": "41"}),
        ],
    }
    presets["fig4b"] = {
        "description": "repelling-sliding tipping density, mean path, and crossing MPP",
        "parts": [
            ("mpp", "mpp-gradflow",
             {**_CASE1_FIG, "eta": "1.0", "kernel_eps": "0.1", "t0": "0.0",
              "tf": "20.0", "m": "1000", "coarse_m": "250",
              "max_iters": "30000"}),
            ("density", "mc-run",
             {**_CASE1_FIG, "eta": "1.0", "sigma": "0.3", "dt": "0.001",
              "n_trajectories": "2000000", "tf": "10.0", "master_seed": "12"}),
        ],
    }
    presets["fig5"] = {
        "description": "rate functional of crossing vs sliding paths as the width shrinks",
        "parts": [("actions", "_fig5", {})],
    }
    presets["fig6a"] = {
        "description": "non-unique analytic minimizers shifted by whole periods",
        "parts": [("mpp", "mpp-analytic",
                   {"family": "case2", "shifts": "0,1,2", "m": "4000"})],
    }
    presets["fig6b"] = {
        "description": "forced-cycle tipping density, mean path, and analytic MPP",
        "parts": [
            ("mpp", "mpp-analytic", {"family": "case2", "m": "4000"}),
            ("density", "mc-run",
             {"family": "case2", "sigma": "0.2", "dt": "0.001",
              "n_trajectories": "400000", "tf": "25.0", "master_seed": "61"}),
        ],
    }
    panels = {
        "a": ("1.0", "1.0", "0.0"),
        "b": ("3.0", "1.0", "0.0"),
        "c": ("1.0", "2.0", "0.0"),
        "d": ("3.0", "2.0", "0.0"),
        "e": ("3.0", "2.0", "0.25"),
        "f": ("3.0", "2.0", "0.5"),
    }
    presets["fig7"] = {
        "description": "forced-cycle deterministic dynamics across nullcline regimes",
        "parts": [
            (f"panel-{name}", "_fig7",
             {"A_plus": ap, "A_minus": am, "p": pp})
            for name, (ap, am, pp) in panels.items()
        ],
    }
    presets["fig8a"] = {
        "description": "gradient-flow MPP and tipping density, moderate forcing asymmetry",
        "parts": [
            ("mpp", "mpp-gradflow",
             {"family": "case2", "r_plus": "2.0", "r_minus": "3.0", "A_plus": "3.0",
              "A_minus": "1.0", "p": "0.25", "a": "-0.5",
              "kernel_kind": "gaussian", "kernel_eps": repr(sigma_8a ** 4),
              "init": "line", "coarse_m": "250", "max_iters": "30000",
              "t0": repr(fig8a_t0), "tf": repr(fig8a_tf), "m": "2000"}),
            ("density", "mc-run",
             {"family": "case2", "r_plus": "2.0", "r_minus": "3.0", "A_plus": "3.0",
              "A_minus": "1.0", "p": "0.25", "a": "-0.5", "sigma": repr(sigma_8a),
              "dt": "0.001", "n_trajectories": "400000", "tf": "25.0",
              "master_seed": "62"}),
        ],
    }
    presets["fig8b"] = {
        "description": "gradient-flow MPP and tipping density, strong forcing asymmetry",
        "parts": [
            ("mpp", "mpp-gradflow",
             {"family": "case2", "r_plus": "2.0", "r_minus": "3.0", "A_plus": "4.0",
              "A_minus": "3.0", "p": "0.25", "a": "-0.5",
              "kernel_kind": "gaussian", "kernel_eps": repr(sigma_8b ** 4),
              "eps_stages": "0.01,0.003,0.001,0.0003,0.0001",
              "init": "line", "coarse_m": "250", "max_iters": "30000",
              "grad_tol": "0.05",
              "t0": repr(fig8a_t0), "tf": repr(fig8a_tf), "m": "2000"}),
            ("density", "mc-run",
             {"family": "case2", "r_plus": "2.0", "r_minus": "3.0", "A_plus": "4.0",
              "A_minus": "3.0", "p": "0.25", "a": "-0.5", "sigma": repr(sigma_8b),
              "dt": "0.001", "n_trajectories": "400000", "tf": "25.0",
              "master_seed": "63"}),
        ],
    }
    return presets


def figure_presets() -> list[str]:
    """Names of the built-in figure presets."""

    return sorted(_figure_presets())


def _run_fig2a(overrides, threads):
    a_grid = np.linspace(-6.0, 2.0, 161)
    b_grid = np.linspace(-10.0, 2.0, 121)
    rows = []
    for a in a_grid:
        for b in b_grid:
            params = PiecewiseLinearParams2D(
                a=float(a), b=float(b), c=1.0, p=float(a), q=float(b), r=1.0, eta=-2.0
            )
            plus, _ = equilibrium_class_2d(params)
            rows.append((a, b, plus.label, plus.trace, plus.det, plus.discriminant))
    header = ("a", "b", "label", "trace", "det", "discriminant")
    config = {"a_min": -6.0, "a_max": 2.0, "a_n": 161,
              "b_min": -10.0, "b_max": 2.0, "b_n": 121, "c": 1.0}
    return config, [(None, header, rows)], {"n_points": len(rows)}


def _resample(path: DiscretePath, m: int) -> DiscretePath:
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(path.times, path.states, axis=0)
    times = np.linspace(path.t0, path.tf, m + 1)
    return DiscretePath(path.t0, path.tf, spline(times))


def _run_fig5(overrides, threads):
    eps_values = (0.5, 0.1, 0.05)
    params = PiecewiseLinearParams2D(a=-2.0, b=-7.0, c=1.0, p=-2.0, q=-7.0, r=1.0, eta=1.0)
    field = params.as_field()
    rows = []
    summary = {}
    for eps in eps_values:
        kernel = MollifierKernel("compact_bump", eps)
        bc = (0.0, np.asarray(params.x_plus, float), 20.0, np.asarray(params.x_minus, float))
        coarse, ds_used = _flow_with_backoff(params, kernel, bc, 250, None, 30_000, 1e-6, None)
        drift = as_drift(params, kernel)
        polished = _lbfgs_polish(_resample(coarse.path, 1000), drift, gtol=1e-9)
        crossing_action = fw_action(polished, drift)
        rows.append((eps, "crossing", 0, None, crossing_action))
        members = sliding_family_case1(params, polished)
        member_actions = []
        for idx, member in enumerate(members, start=1):
            value = gamma_action(member.path, field).total
            member_actions.append(value)
            rows.append((eps, "sliding", idx, member.y_exit, value))
        summary[repr(eps)] = {
            "crossing": crossing_action,
            "sliding_min": min(member_actions),
            "sliding_max": max(member_actions),
            "ratio_min": min(member_actions) / crossing_action,
        }
    header = ("eps", "kind", "member", "y_exit", "action")
    return ({"eps_values": eps_values, "eta": 1.0},
            [(None, header, rows)], summary)


def _run_fig7(overrides, threads):
    params = NonAutonomousParams1D(
        r_plus=2.0, r_minus=3.0,
        A_plus=float(overrides["A_plus"]), A_minus=float(overrides["A_minus"]),
        p=float(overrides["p"]), a=-0.5,
    )
    field = params.as_field()
    h_plus, h_minus = stable_cycles_1d(params)
    ts = np.linspace(0.0, 1.0, 401)
    rows = []
    for t in ts:
        info = nullclines_1d(params, float(t))
        label = classify_sigma(field, np.empty(0), float(t)).name
        rows.append((t, float(h_plus(t)), float(h_minus(t)),
                     float(info.n_plus), float(info.n_minus), label))
    info0 = nullclines_1d(params, 0.0)
    header = ("t", "h_plus", "h_minus", "n_plus", "n_minus", "sigma_label")
    config = {"r_plus": 2.0, "r_minus": 3.0, "a": -0.5,
              "A_plus": float(overrides["A_plus"]),
              "A_minus": float(overrides["A_minus"]), "p": float(overrides["p"])}
    outputs = {
        "plus_intersects_sigma": bool(info0.plus_intersects_sigma),
        "minus_intersects_sigma": bool(info0.minus_intersects_sigma),
    }
    return config, [(None, header, rows)], outputs


_FIGURE_RUNNERS = {
    "_fig2a": _run_fig2a,
    "_fig5": _run_fig5,
    "_fig7": _run_fig7,
}


# ---------------------------------------------------------------------------
# orchestration


def _part_filename(experiment: str, digest: str, part: str | None, ext: str) -> str:
    if part is None:
        return f"{experiment}-{digest}.{ext}"
    return f"{experiment}-{digest}-{part}.{ext}"


def run_experiment(kind: str, raw_config: dict[str, str], out_dir: str,
                   threads: int | None) -> list[str]:
    """Validate, run, and emit one experiment; returns written file paths."""

    config = _validate_config(kind, raw_config)
    canonical = _canonical(kind, config)
    digest = _hash(canonical)
    os.makedirs(out_dir, exist_ok=True)

    parts, outputs = _RUNNERS[kind](config, threads)
    written = []
    for part, header, rows in parts:
        filename = _part_filename(kind, digest, part, "csv")
        _write_csv(os.path.join(out_dir, filename), header, rows)
        written.append(filename)

    manifest = {
        "experiment": kind,
        "config_hash": digest,
        "config": {k: _format_value(v) for k, v in config.items() if v is not None},
        "files": written,
        "outputs": outputs,
        "threads": threads if threads is not None else 1,
        "version": __version__,
    }
    manifest_name = _part_filename(kind, digest, None, "json")
    with open(os.path.join(out_dir, manifest_name), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(manifest_name)
    return [os.path.join(out_dir, name) for name in written]


def _run_figure(preset_name: str, set_pairs: list[tuple[str, str]], out_dir: str,
                threads: int | None, seed: int | None) -> list[str]:
    presets = _figure_presets()
    if preset_name not in presets:
        raise CLIValidationError(
            f"unknown preset {preset_name!r}; valid presets: {', '.join(sorted(presets))}"
        )
    preset = presets[preset_name]

    resolved_parts = []
    consumed = [False] * len(set_pairs)
    for part_name, kind, overrides in preset["parts"]:
        raw = dict(overrides)
        if kind in _SCHEMAS:
            schema = _schema_for(kind, raw)
            for i, (key, value) in enumerate(set_pairs):
                if "." in key:
                    target, _, bare = key.partition(".")
                    if target == part_name:
                        raw[bare] = value
                        consumed[i] = True
                elif key in schema:
                    raw[key] = value
                    consumed[i] = True
            if seed is not None and "master_seed" in schema:
                raw["master_seed"] = str(seed)
        resolved_parts.append((part_name, kind, raw))
    for i, flag in enumerate(consumed):
        if not flag:
            key = set_pairs[i][0]
            raise CLIValidationError(
                f"--set key {key!r} does not apply to any part of preset {preset_name}"
            )

    echoed_config = {"preset": preset_name}
    canonical_lines = [f"preset={preset_name}"]
    for part_name, kind, raw in resolved_parts:
        for key in sorted(raw):
            canonical_lines.append(f"{part_name}.{key}={raw[key]}")
            echoed_config[f"{part_name}.{key}"] = raw[key]
    canonical = "\n".join(canonical_lines) + "\n"
    digest = _hash(canonical)
    os.makedirs(out_dir, exist_ok=True)

    written = []
    part_manifests = {}
    for part_name, kind, raw in resolved_parts:
        if kind in _SCHEMAS:
            config = _validate_config(kind, raw)
            parts, outputs = _RUNNERS[kind](config, threads)
            echoed = {k: _format_value(v) for k, v in config.items() if v is not None}
        else:
            echoed_values, parts, outputs = _FIGURE_RUNNERS[kind](raw, threads)
            echoed = {k: _format_value(v) for k, v in echoed_values.items()}
        files = []
        for sub, header, rows in parts:
            suffix = part_name if sub is None else f"{part_name}-{sub}"
            filename = _part_filename(preset_name, digest, suffix, "csv")
            _write_csv(os.path.join(out_dir, filename), header, rows)
            files.append(filename)
        written.extend(files)
        part_manifests[part_name] = {
            "kind": kind.lstrip("_"),
            "config": echoed,
            "files": files,
            "outputs": outputs,
        }

    manifest = {
        "experiment": preset_name,
        "description": preset["description"],
        "config_hash": digest,
        "config": echoed_config,
        "parts": part_manifests,
        "files": written,
        "threads": threads if threads is not None else 1,
        "version": __version__,
    }
    manifest_name = _part_filename(preset_name, digest, None, "json")
    with open(os.path.join(out_dir, manifest_name), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(manifest_name)
    return [os.path.join(out_dir, name) for name in written]


def _parse_set(pair: str) -> tuple[str, str]:
    if "=" not in pair:
        raise CLIValidationError(f"--set expects key=value, got {pair!r}")
    key, _, value = pair.partition("=")
    key = key.strip()
    if not key:
        raise CLIValidationError(f"--set expects key=value, got {pair!r}")
    return key, value.strip()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pws-mpp",
        description="Most probable transition paths for piecewise-smooth SDEs.",
    )
    parser.add_argument("experiment", choices=_EXPERIMENTS)
    parser.add_argument("preset", nargs="?", default=None,
                        help="figure preset name (figure experiment only)")
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="sets", help="override a config key")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: PWS_MPP_THREADS or 1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed where applicable")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        set_pairs = [_parse_set(pair) for pair in args.sets]
        if args.experiment == "figure":
            if args.preset is None:
                raise CLIValidationError(
                    "figure requires a preset name; valid presets: "
                    + ", ".join(figure_presets())
                )
            if args.config is not None:
                raise CLIValidationError("figure presets do not take --config files")
            files = _run_figure(args.preset, set_pairs, args.out, args.threads, args.seed)
        else:
            if args.preset is not None:
                raise CLIValidationError(
                    f"positional preset only applies to the figure experiment"
                )
            raw = _read_config_file(args.config) if args.config else {}
            for key, value in set_pairs:
                raw[key] = value
            if args.seed is not None:
                if "master_seed" not in _SCHEMAS[args.experiment]:
                    raise CLIValidationError(
                        f"--seed does not apply to {args.experiment}"
                    )
                raw["master_seed"] = str(args.seed)
            files = run_experiment(args.experiment, raw, args.out, args.threads)
    except CLIValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
