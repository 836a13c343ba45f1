"""Command-line front end.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.
Every subcommand accepts ``--config FILE`` with ``key = value`` lines
(keys are long option names); explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .attack import AttackScheme, TriangulationAttack, run_attack
from .evaluation import (
    ClusterSpec,
    ExperimentSpec,
    attack_experiment,
    load_csv,
    pr_experiment,
    summarize_pr,
    synth_dataset,
    write_attack_csv,
    write_csv,
    write_pr_csv,
)
from .index import HammingIndex
from .noise import BITFLIP, PROJECTION, NoiseParams, noisy_embed_bits, noisy_scheme_id, required_f
from .protocol import ProtocolConfig, TwoServerProtocol, audit_views, write_trace
from .scheme import BitEmbedding, FamilyKind, SchemeConfig
from .secure import (
    PrivacyBudget,
    mutual_info_bound,
    required_k,
    secure_embed_bits,
    tradeoff_report,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def read_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# -- subcommands ----------------------------------------------------------------

def _noise_from_args(a):
    if a.noise_mode is None:
        return None
    if a.noise_mode == BITFLIP and a.f is None:
        raise UsageError("--noise-mode bitflip needs --f")
    if a.noise_mode == PROJECTION and a.sigma is None:
        raise UsageError("--noise-mode projection needs --sigma")
    return NoiseParams(f=a.f or 0.0, sigma=a.sigma or 0.0, seed=a.noise_seed, mode=a.noise_mode)


def _read_records(a, family: FamilyKind):
    given = [x is not None for x in (a.input, a.vector, a.set)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --input, --vector, --set")
    if a.vector is not None:
        return [0], np.array([_float_list(a.vector)])
    if a.set is not None:
        return [0], [set(_int_list(a.set))]
    ds = load_csv(a.input, set_column=a.set_column if family.is_minhash else None)
    return ds.ids.tolist(), ds.vectors


def cmd_hash(a):
    family = FamilyKind.parse(a.family)
    cfg = SchemeConfig.create(family, a.k, a.l, a.seed)
    ids, X = _read_records(a, family)
    noise = _noise_from_args(a)
    if noise is None:
        bits, sid, scheme = secure_embed_bits(X, cfg), cfg.scheme_id, cfg.to_dict()
    else:
        bits = noisy_embed_bits(X, cfg, noise, ids)
        sid = noisy_scheme_id(cfg, noise)
        scheme = dict(cfg.to_dict(), noise=noise.mode, noise_seed=noise.seed,
                      **({"f": noise.f} if noise.mode == BITFLIP else {"sigma": noise.sigma}))
    _emit({
        "scheme": scheme,
        "scheme_id": sid,
        "l": a.l,
        "embeddings": [{"id": int(i), "bits": BitEmbedding(b, sid).to_hex()} for i, b in zip(ids, bits)],
    }, a.out)


def cmd_budget(a):
    family = FamilyKind.parse(a.family)
    budget = PrivacyBudget(a.s0, a.epsilon)
    k = required_k(family, budget)
    doc = {
        "family": str(family),
        "s0": a.s0,
        "epsilon": a.epsilon,
        "k": k,
        "f_noise": required_f(family, budget),
        "mi_bound_bits_per_bit": mutual_info_bound(family, a.s0, k),
        "s_near": a.s_near,
    }
    if a.s_near > a.s0:
        rep = tradeoff_report(family, a.s_near, a.s0, k)
        doc.update(rho=rep.rho, rho_prime=rep.rho_prime, rho_prime_post_rehash=rep.rho_prime_post_rehash)
    else:
        doc.update(rho=None, rho_prime=None, rho_prime_post_rehash=None)
    if a.l:
        doc["mi_bound_bits_total"] = a.l * doc["mi_bound_bits_per_bit"]
    _emit(doc, a.out)


def _load_embeddings(path):
    with open(path) as fh:
        doc = json.load(fh)
    sid, l = doc["scheme_id"], int(doc["l"])
    ids = [int(e["id"]) for e in doc["embeddings"]]
    bits = np.array([BitEmbedding.from_hex(e["bits"], l, sid).bits for e in doc["embeddings"]],
                    dtype=np.uint8).reshape(len(ids), l)
    return ids, bits, sid, l


def cmd_index(a):
    ids, bits, sid, l = _load_embeddings(a.embeddings)
    index = HammingIndex(a.tables, a.band_bits, random_state=a.seed).fit(bits, ids, scheme_id=sid, l=l)
    if not a.out:
        raise UsageError("index needs --out FILE")
    index.save(a.out)
    print(json.dumps({"n": len(index), "l": l, "tables": a.tables, "band_bits": a.band_bits,
                      "scheme_id": sid, "path": a.out}))


def cmd_query(a):
    index = HammingIndex.load(a.index)
    ids, bits, sid, l = _load_embeddings(a.embeddings)
    results = []
    for qid, q in zip(ids, bits):
        res = index.query(BitEmbedding(q, sid), top_k=a.top_k, max_distance=a.max_distance)
        results.append({
            "query": qid,
            "neighbors": [{"id": int(i), "distance": int(d)} for i, d in res.neighbors],
            "candidates_examined": res.candidates_examined,
            "overflow": res.overflow,
        })
    _emit({"results": results}, a.out)


def _experiment_spec(a):
    ks = a.k or ()
    return ExperimentSpec(
        family=a.family, ks=tuple(k for k in ks if k > 1), sigmas=a.sigma or (), fs=a.f or (),
        l=a.l, threshold=a.threshold, train_fraction=a.split, seeds=a.seeds or (a.seed,),
        vanilla=1 in ks, controls=a.controls, trials=getattr(a, "trials", 100),
        attack_dim=getattr(a, "dim", 50), attack_l=a.l,
    )


def cmd_eval_pr(a):
    spec = _experiment_spec(a)
    queries = None
    if a.data:
        data = load_csv(a.data, normalize=True)
        if a.queries:
            queries = load_csv(a.queries, normalize=True)
    else:
        if a.queries:
            raise UsageError("--queries needs --data")
        data = None
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        for seed in spec.seeds:
            ds = data if data is not None else synth_dataset(a.n, a.dim, _clusters(a), seed)
            one = ExperimentSpec(**{**spec.__dict__, "seeds": (seed,)})
            results += pr_experiment(ds, one, queries)
    if a.out:
        write_pr_csv(results, a.out)
    summary = [{"scheme": s, "param": p, "ap_mean": m, "ap_std": sd, "seeds": n}
               for s, p, m, sd, n in summarize_pr(results)]
    print(json.dumps({"summary": summary}, indent=2))


def cmd_attack(a):
    family = str(FamilyKind.parse(a.family))
    attack = TriangulationAttack(n_probes=a.probes, restarts=a.restarts, random_state=a.seed)
    if a.noise_mode is not None:
        levels = (a.f if a.noise_mode == BITFLIP else a.sigma) or ()
        if not levels:
            raise UsageError(f"--noise-mode {a.noise_mode} needs --{'f' if a.noise_mode == BITFLIP else 'sigma'}")
        cells = []
        for v in levels:
            noise = NoiseParams(f=v if a.noise_mode == BITFLIP else 0.0,
                                sigma=v if a.noise_mode == PROJECTION else 0.0,
                                seed=a.noise_seed, mode=a.noise_mode)
            scheme = AttackScheme(family, 1, a.l, noise)
            rep = run_attack(scheme, a.trials, a.dim, attack=attack, seed=a.seed)
            cells.append((scheme.label(), rep))
    else:
        spec = ExperimentSpec(family=family, ks=tuple(k for k in a.k if k > 1), sigmas=(),
                              vanilla=1 in a.k, trials=a.trials, attack_dim=a.dim, attack_l=a.l)
        cells = [((c.scheme, c.param), c.report) for c in attack_experiment(spec, a.seed, attack)]
    if a.csv:
        from .evaluation import AttackCell
        write_attack_csv([AttackCell(s, p, r) for (s, p), r in cells], a.csv)
    _emit({"reports": [dict(r.to_dict(), label=list(lbl)) for lbl, r in cells]}, a.out)


def cmd_protocol_demo(a):
    cfg = ProtocolConfig(a.family, a.k, a.l, a.dim)
    index = HammingIndex(a.tables, a.band_bits, random_state=a.seed).fit(np.zeros((0, a.l), np.uint8), [], l=a.l)
    proto = TwoServerProtocol(cfg, seed=a.seed, index=index, leak=a.leak)
    rng = np.random.default_rng(a.seed)
    if cfg.is_sets:
        inputs = [set(rng.choice(a.dim, max(1, a.dim // 10), replace=False).tolist()) for _ in range(a.runs)]
    else:
        inputs = list(rng.standard_normal((a.runs, a.dim)))
    results = [proto.enroll(i, x) for i, x in enumerate(inputs)]
    scheme = cfg.scheme(proto.combined_seed)
    direct = secure_embed_bits(inputs if cfg.is_sets else np.array(inputs), scheme)
    correct = bool(all(np.array_equal(r.hash_bits, d) for r, d in zip(results, direct)))
    report = audit_views(results, inputs, proto.combined_seed, cfg)
    if a.trace:
        write_trace(results, a.trace)
    _emit({
        "runs": a.runs,
        "reconstruction_matches_direct": correct,
        "audit_ok": report.ok,
        "violations": report.violations[:20],
        "violation_count": len(report.violations),
        "correlation_tests": report.tests,
        "correlation_threshold": report.threshold,
        "index_size": len(index),
        "leak_injected": a.leak,
    }, a.out)


def _clusters(a):
    n_clusters = a.n // a.cluster_size if a.clusters is None else a.clusters
    return ClusterSpec(n_clusters, a.cluster_size, a.min_cosine)


def cmd_synth(a):
    ds = synth_dataset(a.n, a.dim, _clusters(a), a.seed)
    if not a.out:
        raise UsageError("synth needs --out FILE")
    write_csv(ds, a.out)
    print(json.dumps(ds.metadata()))


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="securelsh", description="Secure locality-sensitive hashing toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp, out_help="output file (default: stdout)"):
        sp.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
        sp.add_argument("--out", default=None, help=out_help)
        sp.add_argument("--config", default=None, help="key = value file of option defaults")

    def noise_opts(sp, many=False):
        kind = _float_list if many else float
        sp.add_argument("--noise-mode", choices=[BITFLIP, PROJECTION], default=None)
        sp.add_argument("--f", type=kind, default=None, help="bit corruption probability")
        sp.add_argument("--sigma", type=kind, default=None, help="projection noise std")
        sp.add_argument("--noise-seed", type=int, default=1)

    sp = sub.add_parser("hash", help="embed vectors or sets")
    common(sp, "embeddings JSON (default: stdout)")
    sp.add_argument("--family", default="simhash", help="simhash, simhash:gaussian or minhash")
    sp.add_argument("--k", type=int, default=1, help="composition order (1 = vanilla)")
    sp.add_argument("--l", type=int, default=64, help="signature bits")
    sp.add_argument("--input", help="CSV with an id column")
    sp.add_argument("--set-column", default="members", help="set-valued column for MinHash input")
    sp.add_argument("--vector", help="one dense vector, comma-separated")
    sp.add_argument("--set", help="one set of integer ids, comma-separated")
    noise_opts(sp)
    sp.set_defaults(func=cmd_hash)

    sp = sub.add_parser("budget", help="parameters meeting a privacy budget")
    common(sp)
    sp.add_argument("--family", default="simhash")
    sp.add_argument("--s0", type=float, required=True, help="non-neighbour similarity threshold")
    sp.add_argument("--epsilon", type=float, required=True, help="allowed collision excess over 1/2")
    sp.add_argument("--s-near", type=float, default=0.95, help="neighbour similarity for rho")
    sp.add_argument("--l", type=int, default=None, help="also report the bound for l bits")
    sp.set_defaults(func=cmd_budget)

    sp = sub.add_parser("index", help="build a Hamming index from embeddings JSON")
    common(sp, "index file to write")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--tables", type=int, default=16)
    sp.add_argument("--band-bits", type=int, default=16)
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("query", help="query an index with embeddings JSON")
    common(sp)
    sp.add_argument("--index", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--top-k", type=int, default=10)
    sp.add_argument("--max-distance", type=int, default=None)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("eval-pr", help="precision-recall of Hamming ranking")
    common(sp, "pr_curves.csv path")
    sp.add_argument("--data", help="CSV dataset (default: synthetic)")
    sp.add_argument("--queries", help="CSV of query vectors; --data is then all train")
    sp.add_argument("--family", default="simhash")
    sp.add_argument("--k", type=_int_list, default=(1, 2, 4, 8), help="k values; 1 = vanilla")
    noise_opts(sp, many=True)
    sp.add_argument("--l", type=int, default=64)
    sp.add_argument("--threshold", type=float, default=0.95, help="gold cosine threshold")
    sp.add_argument("--split", type=float, default=0.8, help="train fraction")
    sp.add_argument("--seeds", type=_int_list, default=None, help="comma-separated seeds")
    sp.add_argument("--controls", action="store_true", help="add oracle and random rankings")
    sp.add_argument("--n", type=int, default=5000)
    sp.add_argument("--dim", type=int, default=128)
    sp.add_argument("--clusters", type=int, default=None, help="default: n // cluster-size")
    sp.add_argument("--cluster-size", type=int, default=20)
    sp.add_argument("--min-cosine", type=float, default=0.8)
    sp.set_defaults(func=cmd_eval_pr)

    sp = sub.add_parser("attack", help="triangulation attack benchmark")
    common(sp, "report JSON")
    sp.add_argument("--family", default="simhash")
    sp.add_argument("--k", type=_int_list, default=(1,), help="k values to attack")
    noise_opts(sp, many=True)
    sp.add_argument("--l", type=int, default=1024)
    sp.add_argument("--dim", type=int, default=50)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--probes", type=int, default=None, help="probe count (default D + 1)")
    sp.add_argument("--restarts", type=int, default=5)
    sp.add_argument("--csv", default=None, help="also write attack.csv here")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("protocol-demo", help="simulate two-server hashing and audit the views")
    common(sp, "summary JSON")
    sp.add_argument("--runs", type=int, default=1000)
    sp.add_argument("--family", default="simhash")
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--l", type=int, default=64)
    sp.add_argument("--dim", type=int, default=16, help="attributes, or universe size for minhash")
    sp.add_argument("--tables", type=int, default=16)
    sp.add_argument("--band-bits", type=int, default=16)
    sp.add_argument("--trace", default=None, help="write the message trace as JSON lines")
    sp.add_argument("--leak", action="store_true", help="inject a plaintext leak (negative control)")
    sp.set_defaults(func=cmd_protocol_demo)

    sp = sub.add_parser("synth", help="write a synthetic clustered dataset")
    common(sp, "CSV path")
    sp.add_argument("--n", type=int, default=5000)
    sp.add_argument("--dim", type=int, default=128)
    sp.add_argument("--clusters", type=int, default=None, help="default: n // cluster-size")
    sp.add_argument("--cluster-size", type=int, default=20)
    sp.add_argument("--min-cosine", type=float, default=0.8)
    sp.set_defaults(func=cmd_synth)
    return p


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _parse(parser, argv):
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if path and command in subparsers:
        sp = subparsers[command]
        known = {act.dest: act for act in sp._actions}
        cfg = read_config(path)
        unknown = sorted(set(cfg) - set(known) - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for key, value in cfg.items():
            act = known.get(key)
            if act is None:
                continue
            try:
                if isinstance(act, argparse._StoreTrueAction):
                    defaults[key] = value.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[key] = act.type(value) if act.type else value
            except (ValueError, argparse.ArgumentTypeError) as e:
                raise UsageError(f"config key {key}: {e}") from None
            act.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, sys.argv[1:] if argv is None else argv)
        args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
