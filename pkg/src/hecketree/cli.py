"""Command-line entry point: ``hecketree <command> ...``.

Every artifact starts with the run configuration, so two runs with the same
flags and seed write byte-identical files.  HECKETREE_OUT overrides the
default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

OUT_ENV = "HECKETREE_OUT"

CAPS = {
    "tree_vertices": 200_000,
    "hecke_level": 2,
    "chartab_order": 20_000,
    "assembly_level": {2: 2, 3: 1},
    "cube_n": 8,
    "samples": 100_000,
}


class ConfigError(ValueError):
    """Bad flags or a request outside the computation caps (exit 2)."""


@dataclass
class RunConfig:
    command: str
    p: int | None = None
    precision: int | None = None
    level: int | None = None
    samples: int | None = None
    seed: int = 0
    out: str = "artifacts"
    extra: dict = field(default_factory=dict)

    def header(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return {k: v for k, v in d.items() if v not in (None, {})}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


class Writer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return self.dir / name

    def json(self, name: str, result) -> None:
        self._path(name).write_text(_dump({"config": self.cfg.header(), "result": result}))

    def text(self, name: str, body: str, comment: str) -> None:
        head = f"{comment} config: {json.dumps(self.cfg.header(), sort_keys=True)}\n"
        self._path(name).write_text(head + body)


def _check_prime(p: int) -> None:
    if p < 2 or any(p % q == 0 for q in range(2, int(p**0.5) + 1)):
        raise ConfigError(f"{p} is not a prime")


def _check_samples(n: int) -> None:
    if not 0 <= n <= CAPS["samples"]:
        raise ConfigError(f"samples must lie in [0, {CAPS['samples']}]")


# ---------------------------------------------------------------------------
# subcommands; each returns (report, counterexample or None)


def cmd_tree(args, w: Writer):
    from .building import ball, check_tree_axioms

    _check_prime(args.p)
    if args.radius < 0:
        raise ConfigError("radius must be non-negative")
    count = 1 + sum((args.p + 1) * args.p ** (r - 1) for r in range(1, args.radius + 1))
    if count > CAPS["tree_vertices"]:
        raise ConfigError(f"ball has {count} vertices, over the cap {CAPS['tree_vertices']}")
    b = ball(args.p, args.radius)
    axioms = check_tree_axioms(b)
    stem = f"tree_p{args.p}_r{args.radius}"
    if args.dot:
        w.text(stem + ".dot", b.to_dot(), "//")
    else:
        w.json(stem + ".json", b.to_json())
    report = {"vertices": len(b.vertices), "edges": len(b.edges), "axioms": axioms}
    return report, None if axioms["ok"] else {"check": "tree_axioms", "axioms": axioms}


def cmd_hecke(args, w: Writer):
    from .hecke import check_suite

    _check_prime(args.p)
    _check_samples(args.samples)
    if not 1 <= args.level <= CAPS["hecke_level"]:
        raise ConfigError(f"hecke level must lie in [1, {CAPS['hecke_level']}]")
    rep = check_suite(args.p, args.level, args.samples, args.seed)
    w.json(f"hecke_p{args.p}_L{args.level}.json", rep)
    return {k: v for k, v in rep.items() if k != "counterexample"}, rep["counterexample"]


def cmd_chartab(args, w: Writer):
    from .reptheory import finite_quotient

    _check_prime(args.p)
    if args.level < 1:
        raise ConfigError("level must be at least 1")
    report = {}
    bad = None
    for spec in ("U0", "I"):
        G = finite_quotient(spec, args.level, args.p, cap=CAPS["chartab_order"])
        T = G.character_table
        chk = T.check()
        w.json(f"chartab_{spec}_p{args.p}_L{args.level}.json", {"table": T.to_json(), "check": chk})
        report[spec] = {"order": G.order, "classes": T.size, "degrees": T.degrees, "ok": chk["ok"]}
        if not chk["ok"] and bad is None:
            bad = {"check": "character_table", "group": G.name, "residuals": chk}
    return report, bad


def cmd_assembly(args, w: Writer):
    from .assembly import assembly_matrix, cokernel_report, depth_compatibility, sl3_cube_report, smith_normal_form, mat_mul_int

    _check_prime(args.p)
    if args.sl3:
        if args.p not in (2, 3) or not 1 <= args.level <= 2:
            raise ConfigError("sl3 report needs p in {2, 3} and level <= 2")
        rep = sl3_cube_report(args.p, args.level)
        w.json(f"sl3_p{args.p}_L{args.level}.json", rep)
        ok = rep["consistent"] and rep["h_cycle_symmetric"]
        return rep, None if ok else {"check": "sl3_indices", "report": rep}
    cap = CAPS["assembly_level"].get(args.p)
    if cap is None:
        raise ConfigError(f"assembly is available for p in {sorted(CAPS['assembly_level'])}")
    if not 1 <= args.level <= cap:
        raise ConfigError(f"assembly at p={args.p} is capped at level {cap}")
    A = assembly_matrix(args.p, args.level, oracle=True)
    D, U, V = smith_normal_form(A.matrix)
    snf_ok = mat_mul_int(mat_mul_int(U, A.matrix), V) == D
    balance = A.degree_balance()
    rep = A.to_json()
    rep["degree_balance"] = balance
    rep["snf_reconstructs"] = snf_ok
    rep["coker"]["describe"] = cokernel_report(A).describe()
    flipped = cokernel_report(assembly_matrix(args.p, args.level, sign=-1))
    rep["sign_flip_same_coker"] = flipped.diagonal == cokernel_report(A).diagonal
    bad = None
    if args.level > 1:
        dc = depth_compatibility(args.p, args.level - 1, args.level)
        rep["depth_compatibility"] = {k: dc[k] for k in ("commutes", "residual", "coker_map_injective", "coker")}
        if not dc["commutes"]:
            bad = {"check": "depth_compatibility", "levels": [args.level - 1, args.level]}
    w.json(f"assembly_p{args.p}_L{args.level}.json", rep)
    w.text(f"assembly_p{args.p}_L{args.level}.csv", A.to_csv(), "#")
    if not snf_ok:
        bad = bad or {"check": "snf", "matrix": A.matrix}
    if not all(balance):
        bad = bad or {"check": "degree_balance", "columns": [i for i, b in enumerate(balance) if not b]}
    if not rep["sign_flip_same_coker"]:
        bad = bad or {"check": "sign_flip", "diagonals": [rep["snf_diagonal"], flipped.diagonal]}
    return {"shape": list(A.shape), "coker": rep["coker"], "degree_balance": all(balance)}, bad


def cmd_dynamics(args, w: Writer):
    from .dynamics import suite

    _check_prime(args.p)
    _check_samples(args.samples)
    rep = suite(args.p, args.samples, args.seed)
    w.json(f"dynamics_p{args.p}.json", rep)
    rows = ["eps,delta,hits,counterexamples"]
    rows += [f"{e},{r['delta']},{r['hits']},{r['counterexamples']}" for e, r in rep["triangle_delta"].items()]
    w.text(f"triangle_delta_p{args.p}.csv", "\n".join(rows) + "\n", "#")
    return {k: v for k, v in rep.items() if k != "counterexample"}, rep["counterexample"]


def cmd_cube(args, w: Writer):
    from .cubecx import augmentation_kernel_is_boundary, boundary_csv, boundary_matrix, homology_report, is_point_homology

    if not 1 <= args.n <= CAPS["cube_n"]:
        raise ConfigError(f"n must lie in [1, {CAPS['cube_n']}]")
    n = args.n
    dd = all(
        not (boundary_matrix(n, k - 1) @ boundary_matrix(n, k)).any() for k in range(2, n)
    )
    rep = homology_report(n)
    rep["d_squared_zero"] = dd
    rep["point_homology"] = is_point_homology(n)
    rep["augmentation_exact"] = augmentation_kernel_is_boundary(n)
    w.json(f"cube_n{n}.json", rep)
    for k in range(1, n):
        w.text(f"cube_n{n}_d{k}.csv", boundary_csv(n, k), "#")
    ok = dd and rep["point_homology"] and rep["augmentation_exact"]
    return rep, None if ok else {"check": "cube", "report": rep}


def cmd_invariants(args, w: Writer):
    """A small fixed instance of every suite, driven by one seed."""
    s = args.seed
    plan = [
        ("tree", argparse.Namespace(p=2, radius=3, dot=False)),
        ("tree", argparse.Namespace(p=3, radius=2, dot=False)),
        ("hecke", argparse.Namespace(p=2, level=1, samples=5, seed=s)),
        ("chartab", argparse.Namespace(p=2, level=1)),
        ("assembly", argparse.Namespace(p=2, level=1, sl3=False)),
        ("dynamics", argparse.Namespace(p=2, samples=20, seed=s)),
        ("cube", argparse.Namespace(n=4)),
    ]
    summary = {}
    bad = None
    for name, ns in plan:
        report, cx = COMMANDS[name](ns, w)
        key = name + "".join(f"_{k}{v}" for k, v in sorted(vars(ns).items()) if k not in ("seed", "dot"))
        summary[key] = {"ok": cx is None}
        if cx is not None and bad is None:
            bad = {"suite": key, **cx}
    w.json("invariants_all.json", {"suites": summary, "files": sorted(set(w.written))})
    return summary, bad


COMMANDS = {
    "tree": cmd_tree,
    "hecke": cmd_hecke,
    "chartab": cmd_chartab,
    "assembly": cmd_assembly,
    "dynamics": cmd_dynamics,
    "cube": cmd_cube,
    "invariants": cmd_invariants,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hecketree", description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help=f"output directory (default ./artifacts, or ${OUT_ENV})")
    sub = ap.add_subparsers(dest="command", required=True)

    tree = sub.add_parser("tree", help="balls in the tree")
    tsub = tree.add_subparsers(dest="action", required=True)
    tb = tsub.add_parser("build")
    tb.add_argument("--p", type=int, required=True)
    tb.add_argument("--radius", type=int, required=True)
    fmt = tb.add_mutually_exclusive_group()
    fmt.add_argument("--dot", action="store_true")
    fmt.add_argument("--json", action="store_true")

    hk = sub.add_parser("hecke", help="Hecke algebra checks")
    hsub = hk.add_subparsers(dest="action", required=True)
    hc = hsub.add_parser("check")
    hc.add_argument("--p", type=int, required=True)
    hc.add_argument("--level", type=int, default=1)
    hc.add_argument("--samples", type=int, default=50)
    hc.add_argument("--seed", type=int, default=0)

    ct = sub.add_parser("chartab", help="character tables of the chamber quotients")
    ct.add_argument("--p", type=int, required=True)
    ct.add_argument("--level", type=int, default=1)

    asm = sub.add_parser("assembly", help="assembly matrix and cokernel")
    asm.add_argument("--p", type=int, required=True)
    asm.add_argument("--level", type=int, default=1)
    asm.add_argument("--sl3", action="store_true")

    dy = sub.add_parser("dynamics", help="flow space and foliated distance checks")
    dsub = dy.add_subparsers(dest="action", required=True)
    ds = dsub.add_parser("suite")
    ds.add_argument("--p", type=int, default=2)
    ds.add_argument("--samples", type=int, default=200)
    ds.add_argument("--seed", type=int, default=0)

    cb = sub.add_parser("cube", help="homology of the cube complexes")
    cb.add_argument("--n", type=int, required=True)

    inv = sub.add_parser("invariants", help="run every suite")
    isub = inv.add_subparsers(dest="action", required=True)
    ia = isub.add_parser("all")
    ia.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or os.environ.get(OUT_ENV) or "artifacts"
    cfg = RunConfig(
        command=" ".join(x for x in (args.command, getattr(args, "action", None)) if x),
        p=getattr(args, "p", None),
        level=getattr(args, "level", None),
        samples=getattr(args, "samples", None),
        seed=getattr(args, "seed", 0),
        out=out,
        extra={k: v for k, v in vars(args).items() if k in ("radius", "n", "dot", "sl3") and v not in (None, False)},
    )
    w = Writer(cfg)
    try:
        report, bad = COMMANDS[args.command](args, w)
    except ConfigError as exc:
        print(f"hecketree: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OverflowError) as exc:
        print(f"hecketree: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:  # enumeration caps
        print(f"hecketree: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:  # a table or oracle failed to snap
        sys.stdout.write(_dump({"counterexample": {"check": type(exc).__name__, "message": str(exc)}}))
        return 1
    sys.stdout.write(_dump({"config": cfg.header(), "result": report, "files": w.written}))
    if bad is not None:
        sys.stdout.write(_dump({"counterexample": bad}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
