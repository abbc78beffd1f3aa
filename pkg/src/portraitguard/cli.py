"""portraitguard command line.

Exit codes: 0 success, 1 usage or config error, 2 scenario invariant breach.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .evaluation import DEFAULT_GRID, build_trials, mode_agreement, rows_to_csv, self_cross, sweep
from .matching import SimilaritySpace
from .scenario import ConfigError, ScenarioConfig, demo_config, run_scenario
from .synth import PRESETS, corpus_manifest, gen_corpus, load_corpus, write_corpus

EXIT_OK, EXIT_USAGE, EXIT_BREACH = 0, 1, 2


class UsageError(Exception):
    pass


def _load_json(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config: {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config: not valid JSON ({exc})") from None


def _persons(corpus: str | None, seed: int):
    if corpus:
        try:
            return load_corpus(corpus)[1]
        except FileNotFoundError:
            raise UsageError(f"corpus: no manifest under {corpus}") from None
    return gen_corpus(42, seed=seed)


def _scenario_config(args) -> ScenarioConfig:
    if args.config:
        data = _load_json(args.config)
        base = demo_config().to_dict()
        base.update(data)
        cfg = ScenarioConfig.from_dict(base)
    else:
        cfg = demo_config()
    for name in ("mode", "seed", "photos", "theta", "xi", "m", "W", "N", "corpus", "out_dir"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if args.dishonest:
        cfg.dishonest = list(args.dishonest)
    return cfg.validate()


# ----------------------------------------------------------------------------
# commands


def cmd_gen_corpus(args) -> int:
    conf = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(conf.get("seed", 0))
    n = args.n_persons if args.n_persons is not None else int(conf.get("n_persons", 42))
    preset = args.preset or conf.get("preset", "small")
    p_face = args.p_face if args.p_face is not None else float(conf.get("p_face", 0.8))
    if preset not in PRESETS:
        raise UsageError(f"preset: unknown preset {preset!r}")
    if n < 1:
        raise UsageError("n_persons: must be positive")
    plain, hashed = SimilaritySpace.plain(), SimilaritySpace.hashed()
    calibration = {"scale": plain.scale, "hash_scale": hashed.hash_scale, "m": hashed.m, "W": 3.0,
                   "xi": 0.5, "theta": 0.5, "extra_edge_rate": 0.3}
    persons = gen_corpus(n, seed=seed, preset=preset, p_face=p_face)
    manifest = corpus_manifest(persons, seed, preset, p_face, calibration=calibration)
    try:
        path = write_corpus(args.out, persons, manifest, force=args.force)
    except FileExistsError as exc:
        raise UsageError(f"out: {exc}") from None
    print(f"wrote {len(persons)} persons to {path.parent} (manifest {path.name})")
    return EXIT_OK


def _print_reports(result) -> None:
    for r in result.reports:
        acts = ", ".join(f"{m['action']}:{m['user_id']}" for m in r.matches) or "none"
        t = r.timings
        print(f"{r.photo_id} [{r.mode}] {r.status}: {len(r.directives)} directives ({acts}); "
              f"matching {t['matching'] * 1e3:.1f} ms, agreement {t['agreement'] * 1e3:.1f} ms, "
              f"agreement msgs {r.stats['agreement']}")
        for v in r.verification:
            print(f"  verify[{v['variant']}] {v['user']}: {v['verdict']}")


def cmd_run_scenario(args) -> int:
    cfg = _scenario_config(args)
    result = run_scenario(cfg, _persons(cfg.corpus, cfg.seed), write=True)
    _print_reports(result)
    print(f"outputs in {cfg.out_dir}")
    if "baseline" in result.worlds and "advanced" in result.worlds:
        same = result.directive_summary("baseline") == result.directive_summary("advanced")
        print(f"paired-mode directives identical: {same}")
    if not result.ok:
        for mode, fs in result.findings.items():
            for f in fs:
                print(f"CONFIDENTIALITY {mode} seq {f.seq}: {f.what}", file=sys.stderr)
        for b in result.breaches:
            print(f"BUDGET {b}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def cmd_verify(args) -> int:
    """Dishonest-photographer drill: verification must flag exactly the
    planted users in both variants."""
    cfg = _scenario_config(args)
    if not cfg.dishonest:
        cfg.dishonest = [r.user_id for r in cfg.roster if r.intent == "invisible"][:1]
    cfg.mode = "both"
    result = run_scenario(cfg, _persons(cfg.corpus, cfg.seed), write=True)
    planted = set(cfg.dishonest)
    ok = result.ok
    for mode, sessions in result.sessions.items():
        for sess in sessions:
            found = {u for _, u in sess.violations}
            expect = planted & set(sess.in_fov)
            status = "ok" if found == expect else "MISMATCH"
            ok &= found == expect
            print(f"{sess.photo_id} [{mode}] violations {sorted(found)} planted {sorted(expect)}: {status}")
    return EXIT_OK if ok else EXIT_BREACH


def _grid(text: str | None) -> list[float]:
    if text is None:
        return list(DEFAULT_GRID)
    vals = [v for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("thetas: empty grid")
    try:
        return [float(v) for v in vals]
    except ValueError:
        raise UsageError(f"thetas: cannot parse {text!r}") from None


def cmd_sweep(args) -> int:
    conf = _load_json(args.config)
    thetas = _grid(args.thetas if args.thetas is not None else
                   (",".join(map(str, conf["thetas"])) if "thetas" in conf else None))
    seed = args.seed if args.seed is not None else int(conf.get("seed", 0))
    trials_n = args.trials if args.trials is not None else int(conf.get("trials", 200))
    persons = _persons(args.corpus or conf.get("corpus"), seed)
    trials = build_trials(persons, trials_n, seed=seed + 1)
    rows = sweep(trials, thetas)
    absent = sweep(build_trials(persons, max(trials_n // 2, 1), seed=seed + 2, absent=True), [0.5])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    (out / "no_true_match.csv").write_text(rows_to_csv(absent), encoding="utf-8")
    with open(out / "sweep.dat", "w", encoding="utf-8") as fh:
        fh.write("# theta fn_plain fp_plain fn_hashed fp_hashed\n")
        by = {(r.mode, r.theta): r for r in rows}
        for t in thetas:
            p, h = by[("plain", float(t))], by[("hashed", float(t))]
            fh.write(f"{t:.3f} {p.fn_rate:.6f} {p.fp_rate:.6f} {h.fn_rate:.6f} {h.fp_rate:.6f}\n")
    same, cross = self_cross(persons, trials_n, seed=seed + 3)
    summary = {"agreement_at_0.5": mode_agreement(trials, 0.5), "self_mean": float(same.mean()),
               "cross_mean": float(cross.mean()), "trials": trials_n}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(rows_to_csv(rows), end="")
    print("no-true-match:", ", ".join(f"{r.mode} FP {r.fp_rate:.4f}" for r in absent))
    print(f"plain/hashed decision agreement at 0.5: {summary['agreement_at_0.5']:.3f}; "
          f"self {summary['self_mean']:.3f} vs cross {summary['cross_mean']:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    report = bench_mod.full_report(seed=args.seed or 0, N=args.N or 512, preset=args.preset or "dense",
                                   pairs=args.pairs)
    pay, ag, mt = report["payloads"], report["agreement"], report["matching"]
    print(f"payload plain 10 body nodes: {pay['plain_10_body_bytes']} B; "
          f"hashed 10 nodes: {pay['hashed_10_node_bytes']} B (one code per node); "
          f"hashed 10 body nodes: {pay['hashed_10_body_bytes']} B")
    print(f"agreement N={ag['N']} n={ag['n']}: {ag['messages']} messages, "
          f"{ag['bytes_per_user_max']} B per user max ({ag['ratio_to_target']:.2f}x the 0.19 KB figure)")
    s = mt["seconds"]
    print(f"matching [{mt['preset']}, {mt['backend']}]: plain {s['plain']['total'] * 1e3:.2f} ms, "
          f"hashed {s['hashed']['total'] * 1e3:.2f} ms, plain/hashed {mt['plain_over_hashed']:.2f} "
          f"(similarity only {mt['similarity_plain_over_hashed']:.2f})")
    for name, row in report["kernels"]["kernels"].items():
        extra = f", cython {row['cython'] * 1e6:.1f} us, x{row['speedup']:.1f}" if "cython" in row else ""
        print(f"kernel {name}: python {row['python'] * 1e6:.1f} us{extra}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(json.dumps(report, indent=2, default=str) + "\n", encoding="utf-8")
    ok = (pay["plain_10_body_bytes"] == 840 and pay["hashed_10_node_bytes"] == 160
          and ag["bytes_per_user_max"] <= 512)
    return EXIT_OK if ok else EXIT_BREACH


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="portraitguard", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    g.add_argument("--out", default="corpus")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-persons", type=int)
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--p-face", type=float)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_gen_corpus)

    for name, func, hlp in (("run-scenario", cmd_run_scenario, "run capture sessions"),
                            ("verify", cmd_verify, "dishonest-photographer verification drill")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config")
        s.add_argument("--mode", choices=["baseline", "advanced", "both"])
        s.add_argument("--seed", type=int)
        s.add_argument("--photos", type=int)
        s.add_argument("--theta", type=float)
        s.add_argument("--xi", type=float)
        s.add_argument("--m", type=int)
        s.add_argument("--W", type=float)
        s.add_argument("--N", type=int)
        s.add_argument("--corpus")
        s.add_argument("--dishonest", action="append", metavar="USER")
        s.add_argument("--out", dest="out_dir")
        s.set_defaults(func=func)

    w = sub.add_parser("sweep", help="FN/FP over a threshold grid")
    w.add_argument("--config")
    w.add_argument("--corpus")
    w.add_argument("--thetas", help="comma-separated grid, default 0.1..0.9")
    w.add_argument("--trials", type=int)
    w.add_argument("--seed", type=int)
    w.add_argument("--out", default="sweep")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="timing and payload report")
    b.add_argument("--seed", type=int)
    b.add_argument("--N", type=int)
    b.add_argument("--preset", choices=sorted(PRESETS))
    b.add_argument("--pairs", type=int, default=3)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
