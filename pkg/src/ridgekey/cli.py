"""Command-line surface: key management, enrollment, verification,
evaluation, dataset synthesis and security diagnostics.

Exit codes: 0 success (or verify-accept), 1 verify-reject, 2 any error.
No command ever writes raw minutiae or intermediate feature matrices into
its outputs; template and report files carry only protected data.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import evalharness, synth
from .model import Params, deserialize_template, parse_minutiae, parse_skeleton, serialize_template
from .pipeline import DEFAULT_VERIFY_THRESHOLD, enroll, match_score, verify
from .project import ProjectionKey, ProjectionMatrix

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_ERROR = 2


def _read_sample(minutiae_path: str, skeleton_path: str):
    ms = parse_minutiae(Path(minutiae_path).read_text())
    skel = parse_skeleton(Path(skeleton_path).read_bytes())
    return ms, skel


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_keygen(args) -> int:
    from .project import save_key

    key = ProjectionKey(seed=args.seed, s=args.s, t=args.t, b=args.b)
    save_key(key, args.out)
    print(key.key_id)
    return EXIT_OK


def cmd_enroll(args) -> int:
    from .project import load_key

    key = load_key(args.key)
    ms, skel = _read_sample(args.minutiae, args.skeleton)
    template = enroll(ms, skel, key)
    Path(args.out).write_bytes(serialize_template(template) + b"\n")
    print(f"enrolled n={template.n} t={template.params.t} key_id={template.key_id}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .project import load_key

    key = load_key(args.key)
    template = deserialize_template(Path(args.template).read_bytes())
    ms, skel = _read_sample(args.minutiae, args.skeleton)
    score, accepted = verify(template, ms, skel, key, threshold=args.threshold)
    print(f"score={score:.6f} threshold={args.threshold} decision={'accept' if accepted else 'reject'}")
    return EXIT_OK if accepted else EXIT_REJECT


def cmd_synth(args) -> int:
    noise = synth.moderate_noise() if args.noise == "moderate" else synth.zero_noise()
    spec = synth.SynthSpec(seed=0, noise=noise)
    population = synth.generate_population(args.seed, args.subjects, args.impressions, spec)
    synth.write_dataset(population, args.out)
    print(f"wrote {args.subjects} subjects x {args.impressions} impressions to {args.out}")
    return EXIT_OK


def _evaluate_dataset(args):
    if args.dataset:
        return evalharness.load_dataset(args.dataset)
    preset = args.synthetic
    noise = {"default": synth.moderate_noise(), "moderate": synth.moderate_noise(),
             "none": synth.zero_noise()}.get(preset)
    if noise is None:
        raise ValueError(f"unknown synthetic preset {preset!r}")
    spec = synth.SynthSpec(seed=0, noise=noise)
    population = synth.generate_population(args.seed, args.subjects, args.impressions, spec)
    return [list(subject.impressions) for subject in population]


def cmd_evaluate(args) -> int:
    params = Params(s=args.s, b=args.b, t=args.t)
    dataset = _evaluate_dataset(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.sweep_s or args.sweep_b:
        s_values = _int_list(args.sweep_s) if args.sweep_s else [params.s]
        b_values = _float_list(args.sweep_b) if args.sweep_b else [params.b]
        rows = evalharness.parameter_sweep(
            dataset, s_values, b_values, protocol=args.protocol,
            key_policy=args.key_policy, master_seed=args.seed, trials=args.trials,
        )
        sweep_path = out_dir / "sweep.csv"
        with open(sweep_path, "w") as fh:
            fh.write("s,b,t,eer\n")
            for row in rows:
                fh.write(f"{row['s']},{row['b']},{row['t']},{row['eer']!r}\n")
        print(f"wrote {sweep_path} ({len(rows)} rows)")
        return EXIT_OK

    score_sets = evalharness.run_trials(
        dataset, params, key_policy=args.key_policy, protocol=args.protocol,
        master_seed=args.seed, trials=args.trials,
    )
    reports = [evalharness.compute_eer(ss) for ss in score_sets]
    evalharness.write_scores_csv(score_sets[0], out_dir / "scores.csv")
    evalharness.write_curves_csv(reports[0], out_dir / "curves.csv")
    evalharness.write_summary_json(reports, score_sets, out_dir / "report.json")
    mean_eer = statistics.fmean(r.eer for r in reports)
    print(f"eer={mean_eer:.6f} over {args.trials} trial(s); reports in {out_dir}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .encode import cantor_pair, cantor_unpair
    from .project import (
        generate_rp, gram_statistics, load_key, null_space_of_projection,
        pseudo_inverse_attack, rank_of,
    )

    report: dict = {}
    if args.matrix:
        doc = json.loads(Path(args.matrix).read_text())
        rp = ProjectionMatrix(rp=np.array(doc["rows"], dtype=float))
        report["source"] = str(args.matrix)
    else:
        key = load_key(args.key)
        rp = generate_rp(key)
        report["source"] = key.key_id
        sample = [ProjectionKey(seed=key.seed + i, s=key.s, t=key.t, b=key.b) for i in range(200)]
        gram = gram_statistics(sample, normalize=True)
        report["gram"] = {
            "n_keys": gram.n_keys,
            "w_diag_mean": gram.w_diag_mean,
            "w_off_mean": gram.w_off_mean,
            "w_diag_var": gram.w_diag_var,
            "w_off_var": gram.w_off_var,
            "wp_diag_mean": gram.wp_diag_mean,
            "checks": gram.checks,
        }

    report["shape"] = list(rp.rp.shape)
    report["rank"] = rank_of(rp)

    # non-recovery demo: a self-test row with a planted null-space component
    rng = np.random.default_rng(7)
    nullspace = null_space_of_projection(rp)
    row_space = rng.uniform(10.0, 60.0, rp.s)
    lt_true = row_space + (nullspace[:, 0] * 0.5 * np.linalg.norm(row_space)
                           if nullspace.shape[1] else 0.0)
    ct = lt_true @ rp.rp
    lt_hat = pseudo_inverse_attack(ct[None, :], rp)[0]
    report["pseudo_inverse"] = {
        "preimage_reproduces_ct": bool(np.allclose(lt_hat @ rp.rp, ct, atol=1e-9)),
        "relative_error_vs_true": float(np.linalg.norm(lt_hat - lt_true) / np.linalg.norm(lt_true)),
    }

    # inverse pairing is exact: the protection cannot come from the encoding
    probe = [(0, 0), (1, 2), (37, 251), (100, 359)]
    report["cantor_round_trip"] = all(cantor_unpair(cantor_pair(a, b)) == (a, b) for a, b in probe)

    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s", type=int, default=8, help="sector count (default 8)")
    p.add_argument("--b", type=float, default=1.2, help="log base (default 1.2)")
    p.add_argument("--t", type=int, default=4, help="projected dimension (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ridgekey",
                                     description="cancelable fingerprint template toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="issue a projection key file")
    p.add_argument("--seed", type=int, required=True)
    _add_params(p)
    p.add_argument("--out", default="key.json")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("enroll", help="create a protected template")
    p.add_argument("--minutiae", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", default="template.json")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="score a sample against a stored template")
    p.add_argument("--template", required=True)
    p.add_argument("--minutiae", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_VERIFY_THRESHOLD)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--impressions", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--noise", choices=["none", "moderate"], default="moderate")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="run a verification protocol and report error rates")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="dataset directory (<subject>/<impression>.min/.pgm)")
    src.add_argument("--synthetic", help="synthetic preset: default|moderate|none")
    p.add_argument("--protocol", choices=list(evalharness.PROTOCOLS), default="fvc")
    p.add_argument("--key-policy", choices=list(evalharness.KEY_POLICIES), default="same_key")
    p.add_argument("--subjects", type=int, default=20, help="synthetic subject count")
    p.add_argument("--impressions", type=int, default=4, help="synthetic impressions per subject")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="master seed for keys (and synthetic data)")
    p.add_argument("--sweep-s", help="comma-separated sector counts to sweep")
    p.add_argument("--sweep-b", help="comma-separated log bases to sweep")
    p.add_argument("--out", default="eval-out")
    _add_params(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="security diagnostics for a key or matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--key", help="projection key file")
    src.add_argument("--matrix", help='JSON file {"rows": [[...], ...]} with an explicit matrix')
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # uniform error contract
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
