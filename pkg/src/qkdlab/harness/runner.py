"""In-process runs and parameter sweeps."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .. import commit as bc
from ..qkd.session import run_session
from ..rng import Rng, derive_seed
from .spec import SWEEPABLE, RunSpec, SpecError, key_paths, render, stats_record, to_csv, write_key

log = logging.getLogger(__name__)


def commit_demo(spec: RunSpec) -> dict:
    """Open `trials` commitments toward each bit and count Bob's accepts."""
    demo = spec.commit
    rng = Rng(spec.seed).child("commit")
    rec = {"protocol": "commit-demo", "seed": spec.seed, "photons": demo.photons, "cheat": demo.cheat,
           "trials": demo.trials}
    for desired in (0, 1):
        accepts = 0
        for _ in range(demo.trials):
            if demo.cheat == "epr":
                record, holding = bc.cheat_epr_commit(demo.photons, rng)
                opening = bc.cheat_epr_open(record, desired, rng)
            elif demo.cheat == "classical":
                record, holding = bc.commit(1 - desired, demo.photons, rng)
                opening = bc.cheat_classical(record, desired)
            else:
                record, holding = bc.commit(desired, demo.photons, rng)
                opening = bc.open_honest(record)
            accepts += bc.verify(holding, opening, rng) is bc.Outcome.ACCEPT
        rec[f"accepted_bit{desired}"] = accepts
    return rec


def execute(spec: RunSpec) -> tuple[dict, object]:
    """Run one session in-process; returns (flat stats record, Session or None)."""
    spec.validate()
    if spec.protocol == "commit-demo":
        return commit_demo(spec), None
    session = run_session(spec.protocol, spec.config, spec.source, spec.channel, spec.eve, Rng(spec.seed))
    return stats_record(spec, session.stats.to_dict()), session


def run(spec: RunSpec, timing: bool = False) -> dict:
    """Run and write outputs: stats to spec.out (stdout if unset), key files on success."""
    t0 = time.perf_counter()
    record, session = execute(spec)
    wall = time.perf_counter() - t0
    log.info("%s seed=%s finished in %.3fs", spec.protocol, spec.seed, wall)
    if timing:
        record["wall_time"] = wall
    text = render([record], spec.format) if spec.protocol != "commit-demo" or spec.format == "json" else \
        to_csv([record], columns=tuple(record))
    if spec.out:
        Path(spec.out).write_text(text)
        paths = key_paths(spec.out)
        if session is not None and session.key is not None and len(session.key) > 0:
            write_key(paths[0], session.key.hex())
            write_key(paths[1], session.bob_key.hex())
    else:
        print(text, end="")
    return record


def _child(args):
    spec, i, name, value = args
    child = spec.with_param(name, value)
    child = replace(child, seed=derive_seed(spec.seed, i), out=None)
    record, _ = execute(child)
    return record


def sweep(spec: RunSpec, parameter: str, values: list, jobs: int = 1) -> str:
    """One child run per value with seeds derived from (master seed, index); CSV rows in input order."""
    if parameter not in SWEEPABLE:
        raise SpecError("parameter", f"{parameter!r} is not sweepable ({', '.join(SWEEPABLE)})")
    if spec.protocol == "commit-demo":
        raise SpecError("protocol", "commit-demo cannot be swept")
    spec.validate()
    work = [(spec, i, parameter, v) for i, v in enumerate(values)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_child, work))
    else:
        records = [_child(w) for w in work]
    return to_csv(records)
