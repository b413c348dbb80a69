"""Command-line entry points: synth, preprocess, render, make-session, analyze, serve.

Every command accepts ``--config FILE`` (JSON) whose keys match the long
option names; explicit flags override the config file.  The PHOSPHOR_SEED
environment variable overrides any configured seed.  Exit codes: 0 ok,
1 input error, 2 internal error; errors are emitted as one JSON object on
stderr.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import pnm
from .dataset import (
    Category,
    StimulusCatalog,
    generate_synthetic_catalog,
    generate_synthetic_clip,
    load_catalog,
    load_clip_frames,
)
from .errors import PhosphorError
from .render import (
    AmplitudeFrame,
    AxonMapParams,
    ElectrodeGrid,
    build_percept_grid,
    build_sensitivity_table,
    render_fast,
    render_oracle,
)
from .retina import DEFAULT_BUNDLE_MODEL, DEFAULT_FRAME
from .scene import Strategy, apply_strategy, encode_amplitudes
from .server import read_response_log
from .session import (
    GRID_SIZES,
    PARAM_CELLS,
    SessionPlan,
    TrialRecord,
    analyze_records,
    load_session,
    make_session,
    save_session,
)
from .stats import FdrMode, Pooling, RateCorrection, adjust_results, bootstrap_diff


def _fail(exc: BaseException) -> None:
    code = 1 if isinstance(
        exc, (PhosphorError, click.ClickException, OSError, ValueError, KeyError)
    ) else 2
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SystemExit:
            raise
        except BaseException as exc:  # noqa: BLE001 - CLI boundary
            _fail(exc)

    return wrapper


def _load_config(config_path):
    if config_path is None:
        return {}
    return json.loads(Path(config_path).read_text())


def _opt(value, config: dict, key: str, default):
    """Flag > config file > default."""
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _seed(value, config: dict, default=0):
    env = os.environ.get("PHOSPHOR_SEED")
    if env is not None:
        return int(env)
    return int(_opt(value, config, "seed", default))


def _hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(str(p) for p in paths):
        h.update(Path(p).read_bytes())
    return h.hexdigest()


@click.group()
def main():
    """Simulated prosthetic vision toolkit."""


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None, help="output root directory")
@click.option("--seed", type=int, default=None)
@click.option("--fps", type=float, default=None)
@click.option("--duration", type=float, default=None)
@click.option("--frame-size", type=int, default=None, help="square frame side in px")
@click.option("--practice/--no-practice", default=True,
              help="also generate 8 practice clips")
@guarded
def synth(config, out, seed, fps, duration, frame_size, practice):
    """Generate a balanced 16-clip synthetic catalog (plus practice clips)."""
    cfg = _load_config(config)
    out = Path(_opt(out, cfg, "out", "synthetic"))
    seed = _seed(seed, cfg)
    fps = float(_opt(fps, cfg, "fps", 25.0))
    duration = float(_opt(duration, cfg, "duration", 5.0))
    side = int(_opt(frame_size, cfg, "frame_size", 64))
    catalog = generate_synthetic_catalog(out, seed=seed, fps=fps, duration_s=duration,
                                         frame_size=(side, side))
    if practice:
        cats = [Category.N, Category.C, Category.CP, Category.P]
        for i in range(8):
            generate_synthetic_clip(
                cats[i % 4], seed * 1000 + 500 + i, out / f"practice_{i:02d}",
                fps=fps, duration_s=duration, frame_size=(side, side),
                clip_id=f"practice_{i:02d}",
            )
    click.echo(f"wrote {len(catalog.clips)} clips under {out}")


def _iter_clips(catalog_path, catalog: StimulusCatalog, include_practice: bool):
    yield from catalog.clips
    if include_practice:
        root = Path(catalog_path).parent
        for d in sorted(root.glob("practice_*")):
            if d.is_dir():
                n = len(list(d.glob("frame_*.pgm")))
                if n:
                    first = catalog.clips[0]
                    yield type(first)(
                        clip_id=d.name, frame_dir=d.name, fps=first.fps,
                        duration_s=n / first.fps, category=Category.N,
                        has_people=False, has_cars=False,
                    )


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--decay-rate", type=float, default=None)
@click.option("--normalized-depth", is_flag=True, default=False)
@click.option("--include-practice", is_flag=True, default=False)
@click.option("--strict/--no-strict", default=True,
              help="enforce the balanced 16-clip, 5 s catalog design")
@guarded
def preprocess(config, catalog_path, strategy, out, decay_rate, normalized_depth,
               include_practice, strict):
    """Run a scene-simplification strategy over every clip in a catalog."""
    cfg = _load_config(config)
    catalog_path = Path(_opt(catalog_path, cfg, "catalog", "synthetic/catalog.json"))
    strategy = Strategy(_opt(strategy, cfg, "strategy", "segmentation"))
    out = Path(_opt(out, cfg, "out", "preprocessed"))
    decay_rate = float(_opt(decay_rate, cfg, "decay_rate", 2.0))
    catalog = load_catalog(catalog_path, standard_design=strict)
    kwargs = {}
    if strategy == Strategy.DEPTH:
        kwargs["decay_rate"] = decay_rate
    elif strategy == Strategy.COMBINATION:
        kwargs["normalized_depth"] = bool(_opt(normalized_depth or None, cfg,
                                               "normalized_depth", False))
    for clip in _iter_clips(catalog_path, catalog, include_practice):
        clip_dir = out / clip.clip_id / strategy.value
        clip_dir.mkdir(parents=True, exist_ok=True)
        inputs = []
        for t, (frame, aux) in enumerate(load_clip_frames(catalog_path, clip)):
            gray = apply_strategy(strategy, frame, aux, **kwargs)
            pnm.write_pgm(pnm.frame_path(clip_dir, "gray", t, "pgm"),
                          np.rint(gray.pixels).astype(np.uint8))
            inputs.append(pnm.frame_path(catalog_path.parent / clip.frame_dir,
                                         "frame", t, "pgm"))
        sidecar = {
            "strategy": strategy.value,
            "parameters": {"decay_rate": decay_rate,
                           "normalized_depth": bool(kwargs.get("normalized_depth", False)),
                           "depth_cut_percentile": 80.0,
                           "saliency_top_percentile": 90.0},
            "fps": clip.fps,
            "input_hash": _hash_files(inputs),
        }
        (clip_dir / "pipeline.json").write_text(json.dumps(sidecar, indent=2))
    click.echo(f"preprocessed {strategy.value} -> {out}")


@main.command("render")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--preprocessed", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]), multiple=True)
@click.option("--grid", "grids", type=int, multiple=True)
@click.option("--rho", "rhos", type=float, multiple=True)
@click.option("--lam", "lams", type=float, multiple=True)
@click.option("--percept-size", type=int, default=None)
@click.option("--w-min", type=float, default=None)
@click.option("--oracle", is_flag=True, default=False,
              help="use the brute-force reference renderer")
@guarded
def render_cmd(config, preprocessed, out, strategy, grids, rhos, lams, percept_size,
               w_min, oracle):
    """Render preprocessed grayscale clips into simulated prosthetic vision."""
    cfg = _load_config(config)
    preprocessed = Path(_opt(preprocessed, cfg, "preprocessed", "preprocessed"))
    out = Path(_opt(out, cfg, "out", "spv"))
    strategies = [Strategy(s) for s in (strategy or cfg.get("strategies", ["segmentation"]))]
    grids = list(grids or cfg.get("grids", [16]))
    rhos = list(rhos or cfg.get("rhos", [300.0]))
    lams = list(lams or cfg.get("lams", [1000.0]))
    size = int(_opt(percept_size, cfg, "percept_size", 256))
    w_min = float(_opt(w_min, cfg, "w_min", 1e-3))
    percept = build_percept_grid(DEFAULT_FRAME, size, size)

    for rho in rhos:
        for lam in lams:
            params = AxonMapParams(rho=float(rho), lam=float(lam))
            table = None if oracle else build_sensitivity_table(percept, params,
                                                                w_min=w_min)
            for n in grids:
                egrid = ElectrodeGrid.square(int(n))
                for strat in strategies:
                    for clip_dir in sorted(preprocessed.iterdir()):
                        gray_dir = clip_dir / strat.value
                        if not gray_dir.is_dir():
                            continue
                        frames = sorted(gray_dir.glob("gray_*.pgm"))
                        if not frames:
                            continue
                        meta = json.loads((gray_dir / "pipeline.json").read_text())
                        suffix = f"{params.rho:g}_{params.lam:g}"
                        out_dir = out / clip_dir.name / f"{strat.value}_{n}"
                        if len(rhos) > 1 or len(lams) > 1:
                            out_dir = out / clip_dir.name / f"{strat.value}_{n}_{suffix}"
                        out_dir.mkdir(parents=True, exist_ok=True)
                        for t, fp in enumerate(frames):
                            gray = pnm.read_pgm(fp).astype(float)
                            from .scene import GrayFrame, Provenance

                            amps = encode_amplitudes(
                                GrayFrame(pixels=gray, provenance=Provenance(strat.value)),
                                egrid,
                            )
                            amps = AmplitudeFrame(values=amps.values, frame_index=t)
                            if oracle:
                                pf = render_oracle(amps, egrid, params, percept)
                            else:
                                pf = render_fast(amps, egrid, params, table)
                            pnm.write_percept_pgm(
                                pnm.frame_path(out_dir, "frame", t, "pgm"), pf.brightness
                            )
                        sidecar = {
                            "grid": {"rows": n, "cols": n, "pitch": egrid.pitch,
                                     "center": list(egrid.center)},
                            "params": {"rho": params.rho, "lam": params.lam},
                            "bundle_model": DEFAULT_BUNDLE_MODEL.to_json(),
                            "w_min": w_min,
                            "oracle": oracle,
                            "percept": {"size": size,
                                        "extent": list(percept.extent)},
                            "fps": meta.get("fps", 25.0),
                            "input_hash": _hash_files(frames),
                        }
                        (out_dir / "render.json").write_text(json.dumps(sidecar, indent=2))
    click.echo(f"rendered SPV -> {out}")


@main.command("make-session")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--subject", default=None)
@click.option("--rho", type=float, default=None)
@click.option("--lam", type=float, default=None)
@click.option("--cell-index", type=int, default=None,
              help="index 0..8 into the (rho, lambda) sweep, row-major")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="sessions directory")
@click.option("--strict/--no-strict", default=True,
              help="enforce the balanced 16-clip, 5 s catalog design")
@guarded
def make_session_cmd(config, catalog_path, subject, rho, lam, cell_index, seed, out,
                     strict):
    """Generate a 192-trial session plan for one subject."""
    cfg = _load_config(config)
    catalog_path = Path(_opt(catalog_path, cfg, "catalog", "synthetic/catalog.json"))
    subject = _opt(subject, cfg, "subject", "S00")
    seed = _seed(seed, cfg)
    out = Path(_opt(out, cfg, "out", "sessions"))
    if cell_index is not None:
        cell = PARAM_CELLS[cell_index]
    else:
        cell = (float(_opt(rho, cfg, "rho", 300.0)), float(_opt(lam, cfg, "lam", 1000.0)))
    catalog = load_catalog(catalog_path, standard_design=strict)
    plan = make_session(subject, catalog, cell, seed)
    out.mkdir(parents=True, exist_ok=True)
    save_session(plan, out / f"{subject}.json")
    click.echo(f"session {subject}: {len(plan.trials)} trials, cell {cell}")


def _records_for(plan: SessionPlan, envelopes: list[dict], catalog: StimulusCatalog):
    records = []
    for env in envelopes:
        if env.get("practice", False):
            continue
        idx = int(env["trial_index"])
        if not 0 <= idx < len(plan.trials):
            continue
        clip = catalog.clip(plan.trials[idx].clip_id)
        resp = env["response"]
        records.append((idx, TrialRecord(
            trial_index=idx,
            saw_people=bool(resp["saw_people"]),
            saw_cars=bool(resp["saw_cars"]),
            confidence=int(resp["confidence"]),
            response_time_ms=float(resp["response_time_ms"]),
            has_people=clip.has_people,
            has_cars=clip.has_cars,
        )))
    return records


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--sessions", type=click.Path(exists=True), default=None)
@click.option("--responses", type=click.Path(exists=True), default=None)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--pooling", type=click.Choice([p.value for p in Pooling]), default=None)
@click.option("--fdr-mode", type=click.Choice([m.value for m in FdrMode]), default=None)
@click.option("--correction", type=click.Choice([c.value for c in RateCorrection]),
              default=None)
@click.option("--n-resamples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--strict/--no-strict", default=True,
              help="enforce the balanced 16-clip, 5 s catalog design")
@guarded
def analyze(config, sessions, responses, catalog_path, out, pooling, fdr_mode,
            correction, n_resamples, seed, strict):
    """Compute per-subject metrics and cross-subject bootstrap comparisons."""
    cfg = _load_config(config)
    sessions = Path(_opt(sessions, cfg, "sessions", "sessions"))
    responses = Path(_opt(responses, cfg, "responses", "responses"))
    catalog_path = Path(_opt(catalog_path, cfg, "catalog", "synthetic/catalog.json"))
    out = Path(_opt(out, cfg, "out", "analysis"))
    pooling = Pooling(_opt(pooling, cfg, "pooling", Pooling.PER_TARGET_TYPE.value))
    fdr_mode = FdrMode(_opt(fdr_mode, cfg, "fdr_mode", FdrMode.FD_OVER_YES.value))
    correction = RateCorrection(_opt(correction, cfg, "correction",
                                     RateCorrection.LOG_LINEAR.value))
    n_resamples = int(_opt(n_resamples, cfg, "n_resamples", 10_000))
    seed = _seed(seed, cfg)
    catalog = load_catalog(catalog_path, standard_design=strict, check_frames=False)
    out.mkdir(parents=True, exist_ok=True)

    metrics: dict = {}
    per_subject_strategy_dprime: dict[str, dict[str, float]] = {}
    incomplete = []
    for plan_path in sorted(sessions.glob("*.json")):
        plan = load_session(plan_path)
        envelopes = read_response_log(responses / f"{plan.subject_id}.jsonl")
        records = _records_for(plan, envelopes, catalog)
        if not records:
            incomplete.append(plan.subject_id)
            continue
        if len(records) < len(plan.trials):
            incomplete.append(plan.subject_id)
        subject_metrics = {}
        overall = analyze_records([r for _, r in records], len(plan.trials),
                                  pooling, correction, fdr_mode)
        subject_metrics["overall"] = dict(overall.report.to_json(),
                                          coverage=overall.coverage)
        by_strategy: dict[str, float] = {}
        for strat in Strategy:
            for grid in GRID_SIZES:
                cell_records = [r for idx, r in records
                                if plan.trials[idx].strategy == strat
                                and plan.trials[idx].grid == grid]
                if not cell_records:
                    continue
                res = analyze_records(cell_records, 16, pooling, correction, fdr_mode)
                subject_metrics[f"{strat.value}_{grid}"] = dict(
                    res.report.to_json(), coverage=res.n_answered / 16)
            strat_records = [r for idx, r in records
                             if plan.trials[idx].strategy == strat]
            if strat_records:
                res = analyze_records(strat_records, len(plan.trials) // 4,
                                      pooling, correction, fdr_mode)
                subject_metrics[strat.value] = dict(res.report.to_json(),
                                                    coverage=res.coverage)
                by_strategy[strat.value] = res.report.d_prime
        metrics[plan.subject_id] = subject_metrics
        per_subject_strategy_dprime[plan.subject_id] = by_strategy

    if incomplete:
        click.echo(f"warning: incomplete sessions excluded/partial: {incomplete}",
                   err=True)

    # cross-subject paired comparisons of per-strategy d'
    results = []
    strategies = [s.value for s in Strategy]
    for i, sa in enumerate(strategies):
        for sb in strategies[i + 1:]:
            a = [v[sa] for v in per_subject_strategy_dprime.values()
                 if sa in v and sb in v]
            b = [v[sb] for v in per_subject_strategy_dprime.values()
                 if sa in v and sb in v]
            if len(a) >= 2:
                results.append(bootstrap_diff(a, b, n_resamples=n_resamples, seed=seed,
                                              paired=True, comparison=f"{sa}-vs-{sb}"))
    results = adjust_results(results)

    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    (out / "stats.json").write_text(json.dumps([r.to_json() for r in results], indent=2))

    # one row per condition, one column per classification metric
    click.echo(f"{'condition':<16}{'accuracy':>10}{'precision':>10}{'recall':>10}{'f1':>10}")
    for strat in strategies:
        vals = {"accuracy": [], "precision": [], "recall": [], "f1": []}
        for sm in metrics.values():
            if strat in sm:
                for k in vals:
                    if sm[strat][k] is not None:
                        vals[k].append(sm[strat][k])
        row = "".join(f"{(np.mean(v) if v else float('nan')):>10.2f}"
                      for v in vals.values())
        click.echo(f"{strat:<16}{row}")
    click.echo(f"wrote {out / 'metrics.json'} and {out / 'stats.json'}")


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--sessions", type=click.Path(exists=True), default=None)
@click.option("--stimuli", type=click.Path(exists=True), default=None)
@click.option("--responses", type=click.Path(), default=None)
@click.option("--originals", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@guarded
def serve(config, sessions, stimuli, responses, originals, port, host):
    """Serve sessions, stimuli, and response collection for the trial UI."""
    import uvicorn

    from .server import create_app

    cfg = _load_config(config)
    sessions = Path(_opt(sessions, cfg, "sessions", "sessions"))
    stimuli = Path(_opt(stimuli, cfg, "stimuli", "spv"))
    responses = Path(_opt(responses, cfg, "responses", "responses"))
    originals = _opt(originals, cfg, "originals", None)
    port = int(_opt(port, cfg, "port", 8750))
    host = _opt(host, cfg, "host", "127.0.0.1")
    app = create_app(sessions, stimuli, responses, originals)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
