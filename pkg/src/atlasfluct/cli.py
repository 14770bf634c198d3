"""Command-line entry point.

Every subcommand resolves a :class:`RunConfig` from three layers (flags
over a JSON config file over defaults), writes its data as CSV into the
output directory and finishes with a ``manifest.json`` that lists each
emitted file with its SHA-256 hash.  Logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance, estimators as est, kernels, limit_field as lf, stats
from .dynamics import gap_series, simulate_paths
from .errors import AtlasError
from .model import ModelParams
from .rng import RngSpec
from .samplers import ProfileKind, ProfileSpec, sample_batch

log = logging.getLogger("atlasfluct")

OUTPUT_ENV = "ATLASFLUCT_OUTPUT_DIR"
COMMANDS = ("profile", "simulate", "gaps", "field", "gpath", "kernels", "limitcov",
            "limitsample", "lowest", "verify")


@dataclass
class RunConfig:
    a: float = 1.0
    gamma: float = 0.0
    n_particles: int = 2000
    dt: float = 1e-3
    horizon: float = 1.0
    profile: str = "nu"
    eps: float = 1e-4
    t_grid: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    x_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    record_times: list | None = None
    replicas: int = 10
    master_seed: int = 0
    output_dir: str | None = None
    suites: list = field(default_factory=lambda: ["fast"])
    burn_in: float = 0.0
    thin: int = 10
    field_kind: str = "ranked"
    workers: int | None = None
    backend: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_mapping(json.loads(text))

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise AtlasError("config must be a single JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise AtlasError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def layered(cls, file_values: dict | None, flag_values: dict) -> "RunConfig":
        merged = dataclasses.asdict(cls())
        merged.update(file_values or {})
        merged.update({k: v for k, v in flag_values.items() if v is not None})
        return cls.from_mapping(merged)

    def model(self) -> ModelParams:
        return ModelParams(a=self.a, gamma=self.gamma, n_particles=self.n_particles,
                           dt=self.dt, horizon=self.horizon)

    def out(self) -> Path:
        d = Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "atlas_out")
        d.mkdir(parents=True, exist_ok=True)
        return d


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    started: float = field(default_factory=time.time)
    wall_seconds: float = 0.0
    suites: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_file(self, path: Path):
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write(self, out: Path) -> Path:
        self.wall_seconds = time.time() - self.started
        p = out / "manifest.json"
        p.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_json_default))
        return p


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows, manifest: RunManifest | None = None) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    if manifest is not None:
        manifest.add_file(path)
    return path


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _common_parser():
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON config file (single object)")
    g.add_argument("--a", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--N", dest="n_particles", type=int)
    g.add_argument("--dt", type=float)
    g.add_argument("--T", dest="horizon", type=float)
    g.add_argument("--profile", choices=[k.value for k in ProfileKind])
    g.add_argument("--eps", type=float)
    g.add_argument("--t-grid", dest="t_grid", type=_float_list, help="comma-separated times")
    g.add_argument("--x-grid", dest="x_grid", type=_float_list, help="comma-separated x values")
    g.add_argument("--record-times", dest="record_times", type=_float_list)
    g.add_argument("--replicas", type=int)
    g.add_argument("--seed", dest="master_seed", type=int)
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--burn-in", dest="burn_in", type=float)
    g.add_argument("--thin", type=int)
    g.add_argument("--kind", dest="field_kind",
                   choices=["count", "ranked", "chi_check", "chi_tilde", "chi"])
    g.add_argument("--suite", dest="suites", action="append",
                   choices=sorted(acceptance.SUITES))
    g.add_argument("--workers", type=int)
    g.add_argument("--backend", choices=["numba", "numpy"])
    g.add_argument("--log-level", dest="log_level", default="INFO")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="atlasfluct", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "profile": "sample a stationary initial profile",
        "simulate": "integrate paths and write ranked frames",
        "gaps": "long single-replica gap series with batch-means summary",
        "field": "fluctuation field on a (t, x) grid",
        "gpath": "recentred bulk ranked-particle trajectories",
        "kernels": "kernel mass-identity residual table",
        "limitcov": "limit covariances cov_G, cov_W, cov_M on the grids",
        "limitsample": "exact samples of the limit process G^x",
        "lowest": "lowest-particle statistic with a KS test against its limit",
        "verify": "run acceptance suites",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "log_level")}
    file_values = None
    if getattr(ns, "config", None):
        file_values = json.loads(Path(ns.config).read_text())
        if not isinstance(file_values, dict):
            raise AtlasError("config must be a single JSON object")
    return RunConfig.layered(file_values, flags)


def _times(cfg: RunConfig):
    if cfg.record_times:
        return sorted(set([0.0] + list(cfg.record_times)))
    return sorted(set([0.0] + list(cfg.t_grid)))


def _ensemble(cfg, times, ranks=None, profile=None):
    p = cfg.model()
    kind = ProfileKind(profile or cfg.profile)
    return simulate_paths(ProfileSpec(kind, p), p, times, cfg.replicas, RngSpec(cfg.master_seed),
                          ranks=ranks, backend=cfg.backend, workers=cfg.workers)


def cmd_profile(cfg, man, out):
    p = cfg.model()
    x = sample_batch(ProfileSpec(ProfileKind(cfg.profile), p), RngSpec(cfg.master_seed),
                     np.arange(cfg.replicas))
    for r in range(cfg.replicas):
        write_csv(out / f"profile_r{r}.csv", ["rank", "position"], enumerate(x[r]), man)
    return 0


def cmd_simulate(cfg, man, out):
    ens = _ensemble(cfg, _times(cfg))
    for r in range(len(ens)):
        rows = ((t, k, ens.positions[r, it, j]) for it, t in enumerate(ens.times)
                for j, k in enumerate(ens.ranks))
        write_csv(out / f"paths_r{r}.csv", ["time", "rank", "position"], rows, man)
    man.extra["report"] = ens.report.to_dict()
    man.extra["record_times"] = ens.times.tolist()
    return 0


def cmd_gaps(cfg, man, out):
    times, gaps = gap_series(cfg.model(), RngSpec(cfg.master_seed), cfg.burn_in, cfg.thin,
                             backend=cfg.backend)
    rows = ((t, i + 1, gaps[k, i]) for k, t in enumerate(times) for i in range(gaps.shape[1]))
    write_csv(out / "gaps.csv", ["time", "rank", "gap"], rows, man)
    mean, half = stats.batch_mean_ci(gaps, batches=20)
    write_csv(out / "gap_means.csv", ["rank", "mean", "halfwidth99"],
              ((i + 1, m, h) for i, (m, h) in enumerate(zip(mean, half))), man)
    return 0


def _write_field(fg: est.FieldGrid, path, man, replica_ids=None):
    write_csv(path, ["replica", "t", "x", "value"],
              ((int(r[0]), r[1], r[2], r[3]) for r in fg.rows(replica_ids)), man)


def cmd_field(cfg, man, out):
    ens = _ensemble(cfg, _times(cfg))
    kind = cfg.field_kind
    if kind == "count":
        fg = est.count_field(ens, cfg.eps, cfg.t_grid, cfg.x_grid)
    elif kind == "ranked":
        fg = est.ranked_field(ens, cfg.eps, cfg.t_grid, cfg.x_grid)
    else:
        trio = dict(zip(("chi_check", "chi_tilde", "chi"),
                        est.chi_triple(ens, cfg.eps, cfg.t_grid, cfg.x_grid)))
        fg = trio[kind]
    _write_field(fg, out / f"field_{kind}.csv", man, ens.replica_ids)
    return 0


def cmd_gpath(cfg, man, out):
    x = float(cfg.x_grid[0])
    i = est.bulk_index(cfg.eps, x)
    ens = _ensemble(cfg, _times(cfg), ranks=[i])
    tg = [0.0] + [t for t in cfg.t_grid if t > 0]
    g = est.g_path_estimator(ens, cfg.eps, x, tg)
    rows = ((int(ens.replica_ids[r]), t, x, g[r, k]) for r in range(g.shape[0])
            for k, t in enumerate(tg))
    write_csv(out / "gpath.csv", ["replica", "t", "x", "value"], rows, man)
    return 0


def cmd_kernels(cfg, man, out):
    rows = kernels.identity_table()
    write_csv(out / "kernel_identities.csv", ["identity", "params", "residual"],
              ((r[0], r[1], r[2]) for r in rows), man)
    ok = all(r[2] <= r[3] for r in rows)
    man.suites["kernels"] = ok
    return 0 if ok else 1


def cmd_limitcov(cfg, man, out):
    rows = []
    for x in cfg.x_grid:
        for t in cfg.t_grid:
            for tp in cfg.t_grid:
                rows.append((t, tp, x, lf.cov_G(t, tp, x, cfg.a), lf.cov_W(t, x, tp, x, cfg.a),
                             lf.cov_M(t, x, tp, x, cfg.a)))
    write_csv(out / "limit_cov.csv", ["t", "t2", "x", "cov_G", "cov_W", "cov_M"], rows, man)
    return 0


def cmd_limitsample(cfg, man, out):
    x = float(cfg.x_grid[0])
    grid = sorted(set([0.0] + list(cfg.t_grid)))
    g = lf.sample_limit_G(x, grid, cfg.replicas, RngSpec(cfg.master_seed), cfg.a)
    rows = ((r, t, x, g[r, k]) for r in range(g.shape[0]) for k, t in enumerate(grid))
    write_csv(out / "limit_samples.csv", ["replica", "t", "x", "value"], rows, man)
    return 0


def cmd_lowest(cfg, man, out):
    ens = _ensemble(cfg, [0.0, cfg.horizon], ranks=[0], profile="tilde_nu")
    s = est.lowest_statistic(ens)
    law = lf.lowest_limit(cfg.gamma, cfg.a)
    cdf = (lambda d: lf.logistic_cdf(d, cfg.a)) if cfg.gamma == 0 else law.diff_cdf
    ks = stats.ks_test(s, cdf)
    write_csv(out / "lowest.csv", ["replica", "value"], zip(ens.replica_ids, s), man)
    write_csv(out / "lowest_ks.csv", ["gamma", "a", "T", "n", "statistic", "p_value"],
              [(cfg.gamma, cfg.a, cfg.horizon, ks.n, ks.statistic, ks.p_value)], man)
    print(f"gamma={cfg.gamma} a={cfg.a} T={cfg.horizon} n={ks.n} "
          f"D={ks.statistic:.6g} p={ks.p_value:.6g}")
    man.extra["report"] = ens.report.to_dict()
    return 0


def cmd_verify(cfg, man, out):
    results = acceptance.run_suites(cfg.suites)
    for res in results:
        print(res.line(), flush=True)
    write_csv(out / "verify.csv", ["criterion", "title", "passed", "seconds", "detail"],
              ((r.number, r.title, r.passed, r.seconds, json.dumps(r.detail, default=_json_default))
               for r in results), man)
    if any(s == "kernels" or s == "all" or s == "fast" for s in cfg.suites):
        cmd_kernels(cfg, man, out)
    for s in cfg.suites:
        nums = acceptance.SUITES[s]
        man.suites[s] = all(r.passed for r in results if r.number in nums)
    failed = [r for r in results if not r.passed]
    for r in failed:
        log.error("failed: %s", r.line())
    return 1 if failed else 0


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=getattr(logging, str(getattr(ns, "log_level", "INFO")).upper(), logging.INFO),
                        stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(ns)
        out = cfg.out()
        man = RunManifest(command=ns.command, config=dataclasses.asdict(cfg))
        (out / "config.json").write_text(cfg.to_json())
        code = HANDLERS[ns.command](cfg, man, out)
        man.write(out)
        log.info("wrote %d file(s) to %s", len(man.files), out)
        return code
    except (AtlasError, ValueError, OSError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
