"""Command-line front end: corpus ingestion, pairwise experiments,
certificates, and machine-readable reports.

Exit codes: 0 success (any verdict), 2 usage error, 3 input parse error,
4 size-cap refusal, 1 unexpected failure.  Reports are deterministic:
identical configurations produce byte-identical JSON regardless of the
WALKDIST_THREADS setting.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import reports
from .cellular import graph_closure, matrix_similarity
from .errors import Graph6ParseError, SizeCapError, WalkdistError
from .extensions import DEFAULT_POINT_CAP, k_equivalence_evidence
from .graphs import Graph, cfi_pair, paley, parse_graph6, read_graph6_file, rook_graph, shrikhande
from .walk import (
    DEFAULT_TIMES,
    DEFAULT_TOL,
    ModelSpec,
    build_hamiltonian,
    compare_walks,
    greens_signature,
    parse_interaction,
    relation_decomposition,
    sign_canonical,
    unitary,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_REFUSED = 4


class UsageError(WalkdistError):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    k: int = 2
    interaction: tuple = ("none",)
    statistics: str = "boson"
    space: str = "full"
    times: tuple = DEFAULT_TIMES
    tol: float = DEFAULT_TOL
    cap: int = DEFAULT_POINT_CAP
    timeout_ms: int | None = None
    out: str | None = None
    format: str = "json"
    pairs_file: str | None = None
    set_semantics: bool = False
    with_signatures: bool = False

    def __post_init__(self):
        if not self.times or not all(np.isfinite(self.times)):
            raise UsageError("times must be non-empty and finite")
        if self.tol <= 0:
            raise UsageError("tol must be positive")
        if self.k < 1:
            raise UsageError("k must be at least 1")

    def provenance(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "model": {
                "k": self.k,
                "statistics": self.statistics,
                "interaction": list(self.interaction),
                "space": self.space,
            },
            "times": list(self.times),
            "tol": self.tol,
            "cap": self.cap,
            "timeout_ms": self.timeout_ms,
            "set_semantics": self.set_semantics,
        }


def resolve_inputs(specs: list[str]) -> list[tuple[str, Graph]]:
    """Each input is a graph6 path or a generator name (shrikhande, rook:M,
    paley:Q, cfi:FILE); paths may hold several graphs, one per line."""
    out: list[tuple[str, Graph]] = []
    for spec in specs:
        if spec == "shrikhande":
            out.append((spec, shrikhande()))
        elif spec.startswith("rook:"):
            out.append((spec, rook_graph(int(spec.split(":", 1)[1]))))
        elif spec.startswith("paley:"):
            out.append((spec, paley(int(spec.split(":", 1)[1]))))
        elif spec.startswith("cfi:"):
            path = spec.split(":", 1)[1]
            for base_name, base in resolve_inputs([path]):
                plain, twisted = cfi_pair(base)
                out.append((f"cfi0:{base_name}", plain))
                out.append((f"cfi1:{base_name}", twisted))
        else:
            for i, g in enumerate(read_graph6_file(spec)):
                out.append((f"{spec}#{i + 1}", g))
    return out


def read_pair_file(path: str) -> list[tuple[tuple[str, Graph], tuple[str, Graph]]]:
    """Pair corpus: two graph6 strings per line, whitespace-separated."""
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith(">>"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise UsageError(f"{path}:{lineno}: expected two graph6 strings per line")
            try:
                a = parse_graph6(parts[0], label=f"{path}:{lineno}a")
                b = parse_graph6(parts[1], label=f"{path}:{lineno}b")
            except Graph6ParseError as exc:
                raise Graph6ParseError(f"{path}:{lineno}: {exc}", offset=exc.offset) from exc
            pairs.append(((f"{path}:{lineno}:1", a), (f"{path}:{lineno}:2", b)))
    return pairs


def model_from_config(config: RunConfig) -> ModelSpec:
    stats = config.statistics
    try:
        if stats == "single":
            if config.interaction != ("none",):
                raise UsageError("the single-particle model takes no interaction")
            return ModelSpec(1, "single", ("none",))
        if stats == "fermion":
            return ModelSpec(config.k, "fermion", config.interaction)
        return ModelSpec(config.k, "boson", config.interaction, config.space)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_closure(config: RunConfig) -> dict:
    if not config.inputs:
        raise UsageError("closure needs at least one input graph")
    results = []
    for name, g in resolve_inputs(config.inputs):
        basis = graph_closure(g)
        results.append({
            "input": name,
            "label": g.label,
            "n": g.n,
            "summary": reports.basis_summary(basis),
            "basis": reports.basis_to_json(basis),
        })
    return {"results": results}


def _two_inputs(config: RunConfig) -> list[tuple[str, Graph]]:
    resolved = resolve_inputs(config.inputs)
    if len(resolved) != 2:
        raise UsageError(f"expected exactly two graphs, resolved {len(resolved)}")
    return resolved


def cmd_equiv(config: RunConfig) -> dict:
    (name_a, a), (name_b, b) = _two_inputs(config)
    result = k_equivalence_evidence(a, b, config.k, cap=config.cap,
                                    timeout_ms=config.timeout_ms)
    verdict = {"certificate": "equivalent", "none": "not-equivalent",
               "inconclusive": "inconclusive"}[result.status]
    doc = {
        "pair": [name_a, name_b],
        "k": config.k,
        "verdict": verdict,
        "message": result.message,
    }
    if result.certificate is not None:
        doc["certificate"] = reports.bijection_to_json(result.certificate)
    if result.base_similarity is not None:
        doc["base_similarity"] = reports.bijection_to_json(result.base_similarity)
    return {"results": [doc]}


def _walk_one(config: RunConfig, model: ModelSpec,
              named_a: tuple[str, Graph], named_b: tuple[str, Graph]) -> dict:
    (name_a, a), (name_b, b) = named_a, named_b
    verdict = compare_walks(a, b, model, times=config.times, tol=config.tol,
                            cap=config.cap, set_semantics=config.set_semantics)
    doc = {
        "pair": [name_a, name_b],
        "verdict": "distinguished" if verdict.distinguished else "indistinguishable",
        "detail": reports.verdict_to_json(verdict),
    }
    if config.with_signatures and a.n == b.n:
        sigs = []
        for named, g in ((name_a, a), (name_b, b)):
            h = build_hamiltonian(g, model, cap=config.cap)
            per_graph = []
            for t in config.times:
                u = unitary(h, t)
                vals = u.ravel()
                if model.statistics == "fermion":
                    vals = sign_canonical(vals)
                sig = greens_signature(vals.reshape(u.shape), t, config.tol)
                per_graph.append(reports.signature_to_json(sig))
            sigs.append({"input": named, "signatures": per_graph})
        doc["signatures"] = sigs
    return doc


def cmd_walk(config: RunConfig) -> dict:
    model = model_from_config(config)
    if config.pairs_file:
        pairs = read_pair_file(config.pairs_file)
    else:
        resolved = resolve_inputs(config.inputs)
        if len(resolved) != 2:
            raise UsageError(f"expected exactly two graphs, resolved {len(resolved)}")
        pairs = [(resolved[0], resolved[1])]
    threads = max(1, int(os.environ.get("WALKDIST_THREADS", "1")))
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _walk_one(config, model, *p), pairs))
    else:
        results = [_walk_one(config, model, *pair) for pair in pairs]
    return {"results": results}


def cmd_certify(config: RunConfig) -> dict:
    (name_a, a), (name_b, b) = _two_inputs(config)
    model = model_from_config(config)
    ha = build_hamiltonian(a, model, cap=config.cap)
    hb = build_hamiltonian(b, model, cap=config.cap)
    cert = matrix_similarity(ha.matrix, hb.matrix, timeout_ms=config.timeout_ms)
    doc: dict = {"pair": [name_a, name_b], "model": model.describe()}
    if cert is None:
        doc["verdict"] = "not-applicable"
        doc["message"] = "no certificate; theorem not applicable"
        return {"results": [doc]}
    rows = []
    passed = True
    for t in config.times:
        ua = unitary(ha, t)
        ub = unitary(hb, t)
        dec_a = relation_decomposition(ua, cert.source)
        dec_b = relation_decomposition(ub, cert.target)
        for r in range(cert.source.size):
            image = int(cert.map[r])
            dx = abs(dec_a[r].x - dec_b[image].x)
            ok = (dx <= config.tol and dec_a[r].m == dec_b[image].m
                  and dec_a[r].residual <= config.tol and dec_b[image].residual <= config.tol)
            passed = passed and ok
            rows.append({
                "time": t,
                "relation": r,
                "image": image,
                "value_deviation": dx,
                "m_source": dec_a[r].m,
                "m_target": dec_b[image].m,
                "residual_source": dec_a[r].residual,
                "residual_target": dec_b[image].residual,
            })
    doc["verdict"] = "pass" if passed else "fail"
    doc["certificate"] = reports.bijection_to_json(cert)
    doc["matched_relations"] = rows
    return {"results": [doc]}


COMMANDS = {
    "closure": cmd_closure,
    "equiv": cmd_equiv,
    "walk": cmd_walk,
    "certify": cmd_certify,
}


# ---------------------------------------------------------------------------
# Formatting and entry point
# ---------------------------------------------------------------------------

def format_report(config: RunConfig, body: dict) -> str:
    doc = {
        "schema": reports.REPORT_SCHEMA,
        "command": config.command,
        "config": config.provenance(),
        **body,
    }
    if config.format == "json":
        return reports.dump_json(doc)
    if config.format == "csv":
        lines = []
        if config.command == "closure":
            lines.append("input,n,relations,cells")
            for row in body["results"]:
                s = row["summary"]
                lines.append(f"{row['input']},{row['n']},{s['relation_count']},{len(s['cell_sizes'])}")
        elif config.command in ("equiv", "certify"):
            lines.append("a,b,verdict")
            for row in body["results"]:
                lines.append(f"{row['pair'][0]},{row['pair'][1]},{row['verdict']}")
        else:
            lines.append("a,b,verdict,witness_time,max_deviation")
            for row in body["results"]:
                d = row["detail"]
                wt = "" if d["witness_time"] is None else reports.round_float(d["witness_time"])
                md = "" if d["max_deviation"] is None else reports.round_float(d["max_deviation"])
                lines.append(f"{row['pair'][0]},{row['pair'][1]},{row['verdict']},{wt},{md}")
        return "\n".join(lines) + "\n"
    # human
    lines = [f"walkdist {config.command}"]
    for row in body["results"]:
        if config.command == "closure":
            s = row["summary"]
            lines.append(f"  {row['input']}: n={row['n']} relations={s['relation_count']} "
                         f"cells={len(s['cell_sizes'])}")
        elif config.command == "equiv":
            lines.append(f"  {row['pair'][0]} vs {row['pair'][1]} (k={row['k']}): {row['verdict']}")
        elif config.command == "certify":
            lines.append(f"  {row['pair'][0]} vs {row['pair'][1]}: {row['verdict']}")
        else:
            d = row["detail"]
            extra = ""
            if d["witness_time"] is not None:
                extra = f" at t={reports.round_float(d['witness_time'])}"
            lines.append(f"  {row['pair'][0]} vs {row['pair'][1]}: {row['verdict']}{extra}")
    return "\n".join(lines) + "\n"


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walkdist",
        description="Multi-particle quantum-walk distinguishability and "
                    "cellular-algebra certificates for graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "closure": "compute and serialize the cellular closure of each input graph",
        "equiv": "search for a k-equivalence certificate between two graphs",
        "walk": "compare Green's-function signatures of walks on graph pairs",
        "certify": "match per-relation walk values across an equivalence certificate",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("inputs", nargs="*",
                       help="graph6 files or generator names "
                            "(shrikhande, rook:M, paley:Q, cfi:FILE)")
        p.add_argument("--k", type=int, default=2 if name != "certify" else 1)
        p.add_argument("--interaction", default="none",
                       help="none | hubbard:U | onsite:U1,U2,...")
        p.add_argument("--model", dest="statistics", default="boson",
                       choices=["boson", "fermion", "single"])
        p.add_argument("--space", default="full", choices=["full", "symmetric"])
        p.add_argument("--times", default=",".join(str(t) for t in DEFAULT_TIMES))
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--cap", type=int, default=DEFAULT_POINT_CAP)
        p.add_argument("--timeout-ms", type=int, default=None)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", default="json", choices=["json", "csv", "human"])
        if name == "walk":
            p.add_argument("--pairs", default=None,
                           help="file of graph pairs, two graph6 strings per line")
            p.add_argument("--set-semantics", action="store_true",
                           help="compare clustered value sets, ignoring multiplicities")
            p.add_argument("--signatures", action="store_true",
                           help="include full Green's signatures in the report")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        times = tuple(float(x) for x in str(args.times).split(",") if x)
        interaction = parse_interaction(args.interaction)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return RunConfig(
        command=args.command,
        inputs=list(args.inputs),
        k=args.k,
        interaction=interaction,
        statistics=args.statistics,
        space=args.space,
        times=times,
        tol=args.tol,
        cap=args.cap,
        timeout_ms=args.timeout_ms,
        out=args.out,
        format=args.format,
        pairs_file=getattr(args, "pairs", None),
        set_semantics=getattr(args, "set_semantics", False),
        with_signatures=getattr(args, "signatures", False),
    )


def _emit_error(code: str, message: str, **extra) -> None:
    doc = {"schema": "walkdist.error/1", "code": code, "message": message}
    doc.update(extra)
    sys.stderr.write(reports.dump_json(doc))


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        body = COMMANDS[config.command](config)
        text = format_report(config, body)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except Graph6ParseError as exc:
        _emit_error("parse", str(exc), offset=exc.offset)
        return EXIT_PARSE
    except SizeCapError as exc:
        _emit_error("refused:size", str(exc), dimension=exc.dimension, cap=exc.cap)
        return EXIT_REFUSED
    except (ValueError, OSError) as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except WalkdistError as exc:
        _emit_error("internal", str(exc))
        return EXIT_INTERNAL

    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
