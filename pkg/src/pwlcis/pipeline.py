"""Stage functions shared by the fused pipeline and the per-stage commands.

Every stage reads its inputs from the output directory and writes its
artifacts back there, so running the stages one by one is the same code path
as running them fused.  Each stage also records a small JSON stats file;
``report.txt`` is rebuilt from whatever stats exist after every stage.
Wall-clock timings go to ``timings.txt`` so the remaining artifacts stay
byte-deterministic.
"""
from __future__ import annotations

import itertools
import json
import logging
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .geometry import (Degenerate, Polyhedron, contains_many, hull_2d, polygon_2d,
                       polygon_area, project, vertices)
from .invariant import assemble, certify_invariance, containment_stats, maximal_ci_oracle
from .mpc import SampleSet, collect, partition, read_points_csv, symmetrize, write_points_csv
from .numerics import Rng
from .pruning import prune
from .pwlfit import PwlModel, fit, max_violation

logger = logging.getLogger(__name__)

STAGES = ("sample", "prune", "fit", "assemble", "certify", "oracle", "plot")
SAMPLE_STREAM = 0


class MissingArtifact(FileNotFoundError):
    pass


def _need(out: Path, name: str) -> Path:
    p = out / name
    if not p.is_file():
        raise MissingArtifact(f"{name} not found in {out}; run the earlier stage first")
    return p


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _write_stats(out: Path, stage: str, stats: dict):
    d = out / "stats"
    d.mkdir(exist_ok=True)
    (d / f"{stage}.json").write_text(json.dumps(_jsonable(stats), indent=1, sort_keys=True) + "\n")


def _read_stats(out: Path, stage: str):
    p = out / "stats" / f"{stage}.json"
    return json.loads(p.read_text()) if p.is_file() else None


def _record_time(out: Path, stage: str, seconds: float):
    p = out / "timings.txt"
    rows = {}
    if p.is_file():
        for ln in p.read_text().splitlines():
            k, _, v = ln.partition(" ")
            rows[k] = v
    rows[stage] = f"{seconds:.3f}s"
    p.write_text("".join(f"{k} {rows[k]}\n" for k in STAGES if k in rows))


def write_report(cfg: RunConfig, out: Path):
    lines = [f"config {cfg.name}", f"seed {cfg.seed}",
             f"sampling stream Rng({cfg.seed}).child({SAMPLE_STREAM}, i) for start i",
             f"fitting stream Rng({cfg.seed}).child(M, r) for piece count M, restart r",
             "timings in timings.txt"]
    for stage in STAGES:
        st = _read_stats(out, stage)
        if st is None:
            continue
        lines.append(f"[{stage}]")
        lines += [f"{k} {json.dumps(st[k])}" for k in sorted(st)]
    (out / "report.txt").write_text("\n".join(lines) + "\n")


# -- stages -------------------------------------------------------------------

def stage_sample(cfg: RunConfig, out: Path, workers: int = 1):
    rng = Rng(cfg.seed).child(SAMPLE_STREAM)
    s = collect(cfg.mpc, cfg.n_starts, rng, cfg.conv_tol, cfg.max_steps, workers)
    s.to_csv(out / "samples.csv")
    _write_stats(out, "sample", s.stats)


def load_symmetrized(out: Path) -> SampleSet:
    return symmetrize(SampleSet.from_csv(_need(out, "samples.csv")))


def stage_prune(cfg: RunConfig, out: Path, workers: int = 1):
    s = load_symmetrized(out)
    p = prune(s)
    p.to_csv(out / "pruned.csv")
    _write_stats(out, "prune", {
        "symmetrized": len(s), "pruned": len(p),
        "I0": len(p.i0), "IN": len(p.i_neg), "IP": len(p.i_pos),
    })


def stage_fit(cfg: RunConfig, out: Path, workers: int = 1):
    p = partition(SampleSet.from_csv(_need(out, "pruned.csv"), symmetric=True))
    pts = p.fit_points
    # pieces must also stay below the hull vertices with x_n > 0, or those
    # samples (and the mirrored ones) can fall outside the assembled set
    model, rep = fit(pts, cfg.fit, workers, bound=p.points[p.i_pos])
    model.save(out / "model.txt")
    (out / "fit_runs.txt").write_text("\n".join(rep.summary_lines()) + "\n")
    _write_stats(out, "fit", {
        "fit_points": len(pts), "M": rep.chosen[0], "restart": rep.chosen[1], "J": rep.J,
        "safeguard_steps": rep.safeguard_count, "runs": len(rep.runs),
        "max_constraint_violation": max_violation(model, p.points),
    })


def stage_assemble(cfg: RunConfig, out: Path, workers: int = 1):
    model = PwlModel.load(_need(out, "model.txt"))
    omega = assemble(model, cfg.X)
    omega.save(out / "invariant_set.txt")
    _write_stats(out, "assemble", {
        "rows_raw": 2 * model.M + cfg.X.n_rows, "rows_reduced": omega.n_rows,
        "symmetric": omega.is_symmetric(),
    })


def stage_certify(cfg: RunConfig, out: Path, workers: int = 1):
    omega = Polyhedron.load(_need(out, "invariant_set.txt"))
    cert = certify_invariance(omega, cfg.system, cfg.U)
    (out / "certification.csv").write_text(cert.to_csv())
    s = load_symmetrized(out)
    V = cert.vertices
    stats = {
        "vertices": len(V),
        "max_violation": cert.max_violation,
        "certified": cert.certified,
        "sample_containment": containment_stats(omega, s.points, 1e-8),
        "vertices_in_X": bool(np.all(contains_many(cfg.X, V, 1e-8))),
    }
    if omega.dim == 2:
        stats["area"] = polygon_area(polygon_2d(omega))
    _write_stats(out, "certify", stats)


def stage_oracle(cfg: RunConfig, out: Path, workers: int = 1):
    res = maximal_ci_oracle(cfg.system, cfg.X, cfg.U, cfg.oracle_max_iters)
    res.omega.save(out / "oracle_set.txt")
    cert = certify_invariance(res.omega, cfg.system, cfg.U)
    stats = {"iterations": res.iterations, "converged": res.converged,
             "rows": res.omega.n_rows, "max_violation": cert.max_violation}
    if res.omega.dim == 2:
        stats["area"] = polygon_area(polygon_2d(res.omega))
        approx = out / "invariant_set.txt"
        if approx.is_file():
            stats["area_ratio"] = polygon_area(polygon_2d(Polyhedron.load(approx))) / stats["area"]
    _write_stats(out, "oracle", stats)


def planes(n: int):
    return list(itertools.combinations(range(n), 2))


def projected_polygon(omega: Polyhedron, dims) -> np.ndarray:
    """Counter-clockwise vertices of ``omega`` projected onto two coordinates."""
    if omega.dim == 2 and tuple(dims) == (0, 1):
        return polygon_2d(omega)
    return polygon_2d(project(omega, list(dims)))


def _svg(lo, hi, layers) -> str:
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="600" height="{600 * h / w:.0f}" '
            f'viewBox="{lo[0]:.17g} {-hi[1]:.17g} {w:.17g} {h:.17g}">')
    body = ['<g transform="scale(1,-1)">']
    for kind, pts, style in layers:
        if kind == "polygon":
            coords = " ".join(f"{x:.9g},{y:.9g}" for x, y in pts)
            body.append(f'<polygon points="{coords}" {style} vector-effect="non-scaling-stroke"/>')
        else:
            r = 0.004 * max(w, h)
            body += [f'<circle cx="{x:.9g}" cy="{y:.9g}" r="{r:.4g}" {style}/>' for x, y in pts]
    body.append("</g>")
    return "\n".join([head] + body + ["</svg>"]) + "\n"


def stage_plot(cfg: RunConfig, out: Path, workers: int = 1):
    """Per coordinate plane: projected set vertices, projected samples and an SVG.

    The SVG draws X (grey), the oracle set when present (red), the
    approximation (blue), the outline of the projected samples (dashed) and
    the pruned samples (dots).
    """
    omega = Polyhedron.load(_need(out, "invariant_set.txt"))
    samples = load_symmetrized(out).points
    pruned = read_points_csv(_need(out, "pruned.csv"))
    oracle = Polyhedron.load(out / "oracle_set.txt") if (out / "oracle_set.txt").is_file() else None
    lo, hi = cfg.X.bounding_box()
    made = []
    for i, j in planes(omega.dim):
        tag = f"{i + 1}_{j + 1}"
        poly = projected_polygon(omega, (i, j))
        write_points_csv(out / f"proj_{tag}_set.csv", poly)
        write_points_csv(out / f"proj_{tag}_samples.csv", samples[:, [i, j]])
        layers = [("polygon", projected_polygon(cfg.X, (i, j)),
                   'fill="#eeeeee" stroke="#888888"')]
        if oracle is not None:
            opoly = projected_polygon(oracle, (i, j))
            write_points_csv(out / f"proj_{tag}_oracle.csv", opoly)
            layers.append(("polygon", opoly, 'fill="#f4b4b4" stroke="#c00000"'))
        layers.append(("polygon", poly, 'fill="#b4c8f4" fill-opacity="0.7" stroke="#0030a0"'))
        try:
            layers.append(("polygon", hull_2d(samples[:, [i, j]]),
                           'fill="none" stroke="#000000" stroke-dasharray="4 3"'))
        except Degenerate:
            pass
        layers.append(("points", pruned[:, [i, j]], 'fill="#000000"'))
        (out / f"plot_{tag}.svg").write_text(_svg(lo[[i, j]], hi[[i, j]], layers))
        made.append(tag)
    _write_stats(out, "plot", {"planes": made, "set_vertices_total": int(len(vertices(omega)))})


STAGE_FUNCS = {
    "sample": stage_sample, "prune": stage_prune, "fit": stage_fit,
    "assemble": stage_assemble, "certify": stage_certify, "oracle": stage_oracle,
    "plot": stage_plot,
}


def run_stage(stage: str, cfg: RunConfig, out, workers: int = 1):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    STAGE_FUNCS[stage](cfg, out, workers)
    _record_time(out, stage, time.perf_counter() - t0)
    write_report(cfg, out)
    logger.info("stage %s done", stage)


def pipeline_stages(cfg: RunConfig):
    """sample, prune, fit, assemble, certify, oracle (when enabled), plot."""
    return [s for s in STAGES if s != "oracle" or cfg.oracle_enabled]


def run_pipeline(cfg: RunConfig, out, workers: int = 1):
    for stage in pipeline_stages(cfg):
        run_stage(stage, cfg, out, workers)
