"""Command-line front end: problem documents in TOML, reports in text or JSON.

A problem document names a coefficient ring, some complexes and modules, and a
list of tasks::

    ring = { kind = "Integers" }

    [complexes.moore]
    ranks = { "0" = 1, "1" = 1 }
    d = { "1" = [[2]] }

    [modules.Z2]
    generators = 1
    relations = [[2]]

    [[tasks]]
    task = "abc"
    complex = "moore"
    coefficients = "Z2"

Complexes may instead be given by ``blocks`` and ``attachments`` (iterated
cones of zero-differential blocks).  Matrices are row-major lists; entries of
TruncatedPoly matrices are coefficient lists.
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli
import tomlkit

from . import abcss
from .chaincx import ChainComplex
from .couples import TowerCouple, certify_page, differential, functor_rows, page
from .errors import DocumentError, PhantomCastleError, UnknownFixture
from .fgmod import FgModule
from .ideals import _filtration, make_power_projective
from .ringlin import RMatrix, ring_from_descriptor
from .towers import build_castle, build_tower

REPORT_SCHEMA = "phantomcastle-report/1"
TASKS = ("tower", "castle", "pages", "filtration", "abc", "ext", "adjunction", "verify-all")
TASK_KEYS = {"task", "name", "complex", "coefficients", "variance", "depth", "r_max", "target",
             "ranks", "power"}
# run order when a document lists several kinds of task
TASK_ORDER = {t: i for i, t in enumerate(TASKS)}


# ---------------------------------------------------------------------------
# documents


@dataclass
class ProblemDocument:
    ring: object
    complexes: dict  # name -> ChainComplex
    modules: dict  # name -> FgModule
    tasks: list  # normalized task dicts
    raw_complexes: dict = field(default_factory=dict)  # name -> normalized source description

    def to_dict(self) -> dict:
        ring = self.ring
        mods = {}
        for name, M in sorted(self.modules.items()):
            rel = [[ring.to_json(x) for x in row] for row in M.relations.data]
            mods[name] = {"generators": M.generators, "relations": rel}
        return {"ring": dict(ring.descriptor()),
                "complexes": {k: self.raw_complexes[k] for k in sorted(self.raw_complexes)},
                "modules": mods, "tasks": [dict(sorted(t.items())) for t in self.tasks]}


def _int_keys(table, what):
    out = {}
    for k, v in table.items():
        try:
            out[int(k)] = v
        except (TypeError, ValueError):
            raise DocumentError(f"{what}: degree key {k!r} is not an integer") from None
    return out


def _matrix(ring, rows, what):
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise DocumentError(f"{what} must be a list of rows")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DocumentError(f"{what} has rows of different lengths")
    try:
        return RMatrix.from_rows(ring, [[ring.coerce(x) for x in r] for r in rows])
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{what}: {exc}") from None


def _matrix_json(ring, m: RMatrix):
    return [[ring.to_json(x) for x in row] for row in m.data]


def _build_complex(ring, name, spec):
    what = f"complex {name!r}"
    if "blocks" in spec:
        blocks = [{k: int(v) for k, v in _int_keys(b, what).items()} for b in spec["blocks"]]
        atts = []
        for i, a in enumerate(spec.get("attachments", [])):
            atts.append({n: _matrix(ring, m, f"{what} attachment {i} degree {n}")
                         for n, m in _int_keys(a, what).items()})
        try:
            A = make_power_projective(ring, blocks, atts)
        except PhantomCastleError as exc:
            raise DocumentError(f"{what}: {exc}") from None
        raw = {"blocks": [{str(n): r for n, r in sorted(b.items())} for b in blocks],
               "attachments": [{str(n): _matrix_json(ring, m) for n, m in sorted(a.items())}
                               for a in atts]}
        return A, raw
    if "ranks" not in spec:
        raise DocumentError(f"{what} needs 'ranks' or 'blocks'")
    ranks = {n: int(r) for n, r in _int_keys(spec["ranks"], what).items()}
    diffs = {}
    for n, rows in _int_keys(spec.get("d", {}), what).items():
        m = _matrix(ring, rows, f"{what} differential d_{n}")
        if m.rows == 0 and ranks.get(n - 1, 0):
            m = RMatrix(ring, ranks.get(n - 1, 0), ranks.get(n, 0))
        diffs[n] = m
    try:
        A = ChainComplex(ring, ranks, diffs)
    except PhantomCastleError as exc:
        raise DocumentError(f"{what}: {exc}") from None
    raw = {"ranks": {str(n): r for n, r in sorted(ranks.items())},
           "d": {str(n): _matrix_json(ring, m) for n, m in sorted(diffs.items())}}
    return A, raw


def _build_module(ring, name, spec):
    what = f"module {name!r}"
    g = spec.get("generators")
    if not isinstance(g, int) or g < 0:
        raise DocumentError(f"{what} needs a nonnegative integer 'generators'")
    rel = spec.get("relations", [])
    if rel:
        m = _matrix(ring, rel, f"{what} relations")
    else:
        m = RMatrix(ring, g, 0)
    try:
        return FgModule(ring, g, m)
    except PhantomCastleError as exc:
        raise DocumentError(f"{what}: {exc}") from None


def _check_task(t, i, complexes, modules):
    if not isinstance(t, dict):
        raise DocumentError(f"task {i} is not a table")
    extra = set(t) - TASK_KEYS
    if extra:
        raise DocumentError(f"task {i}: unknown keys {sorted(extra)}")
    kind = t.get("task")
    if kind not in TASKS:
        raise DocumentError(f"task {i}: unknown task {kind!r}")
    for key in ("complex", "target"):
        if key in t and t[key] not in complexes:
            raise DocumentError(f"task {i}: unknown complex {t[key]!r}")
    if "coefficients" in t and t["coefficients"] not in modules:
        raise DocumentError(f"task {i}: unknown module {t['coefficients']!r}")
    need = {"adjunction": ("ranks", "target"), "ext": ("complex", "target")}.get(kind, ("complex",))
    for key in need:
        if key not in t:
            raise DocumentError(f"task {i} ({kind}) needs {key!r}")
    if kind in ("abc", "pages", "filtration") and "coefficients" not in t and "target" not in t:
        raise DocumentError(f"task {i} ({kind}) needs 'coefficients' or 'target'")
    v = t.get("variance", "homological")
    if v not in ("homological", "cohomological", "both"):
        raise DocumentError(f"task {i}: unknown variance {v!r}")
    out = dict(t)
    if "ranks" in out:
        out["ranks"] = {str(n): int(r) for n, r in sorted(_int_keys(out["ranks"], f"task {i}").items())}
    return out


def parse_document(text: str) -> ProblemDocument:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise DocumentError(exc.msg, getattr(exc, "lineno", None), getattr(exc, "colno", None)) from None
    return document_from_dict(data)


def document_from_dict(data: dict) -> ProblemDocument:
    if "ring" not in data:
        raise DocumentError("missing 'ring'")
    try:
        ring = ring_from_descriptor(data["ring"])
    except (PhantomCastleError, TypeError, ValueError) as exc:
        raise DocumentError(f"ring: {exc}") from None
    complexes, raw = {}, {}
    for name, spec in data.get("complexes", {}).items():
        complexes[name], raw[name] = _build_complex(ring, name, spec)
    modules = {name: _build_module(ring, name, spec) for name, spec in data.get("modules", {}).items()}
    tasks = [_check_task(t, i, complexes, modules) for i, t in enumerate(data.get("tasks", []))]
    return ProblemDocument(ring, complexes, modules, tasks, raw)


def dump_document(doc: ProblemDocument) -> str:
    """Normalized TOML text for a parsed document."""
    d = doc.to_dict()
    out = tomlkit.document()
    out["ring"] = tomlkit.inline_table()
    out["ring"].update(d["ring"])
    for section in ("complexes", "modules"):
        if d[section]:
            tbl = tomlkit.table(is_super_table=True)
            for name, spec in d[section].items():
                tbl[name] = spec
            out[section] = tbl
    if d["tasks"]:
        arr = tomlkit.aot()
        for t in d["tasks"]:
            arr.append(t)
        out["tasks"] = arr
    return tomlkit.dumps(out)


def normalize(text: str) -> str:
    return dump_document(parse_document(text))


def load_document(path) -> ProblemDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    return parse_document(text)


# ---------------------------------------------------------------------------
# tasks


def _verdict(certs: dict) -> str:
    return "verified" if all(certs.values()) else "failed"


def _failures(certs: dict) -> list:
    return sorted(k for k, v in certs.items() if not v)


def _functor(doc, task):
    if "coefficients" in task:
        return doc.modules[task["coefficients"]], None
    return None, doc.complexes[task["target"]]


def _variances(task):
    v = task.get("variance", "homological")
    return ["homological", "cohomological"] if v == "both" else [v]


def task_tower(doc, task, opts):
    A = doc.complexes[task["complex"]]
    T = opts.depth or task.get("depth", 3)
    t = build_tower(A, T)
    certs = t.certify()
    return {"depth": T, "collapsed_at": t.collapsed_at(),
            "P": [t.P(n).to_json() for n in range(T)],
            "N": [t.N(n).to_json() for n in range(T + 1)]}, certs


def task_castle(doc, task, opts):
    A = doc.complexes[task["complex"]]
    T = opts.depth or task.get("depth", 3)
    c = build_castle(build_tower(A, T))
    certs = c.certify()
    return {"depth": T, "At": [c.At(n).to_json() for n in range(T + 1)]}, certs


def task_pages(doc, task, opts):
    A = doc.complexes[task["complex"]]
    T = opts.depth or task.get("depth", 3)
    R = opts.rmax or task.get("r_max", 3)
    M, B = _functor(doc, task)
    t = build_tower(A, T)
    out, certs = {}, {}
    for v in ([None] if B is not None else _variances(task)):
        C = TowerCouple(t, abcss.make_functor(v, M, B))
        certs.update({f"{C.variance}:couple:{c.pos}:{c.leg}": c.ok for c in C.validate()})
        pages = []
        for r in range(1, R + 1):
            pg = page(C, r).to_json(doc.ring)
            diffs = []
            for pos in C.window_positions():
                try:
                    d = differential(C, r, *pos)
                except PhantomCastleError:
                    continue
                if not d.is_zero():
                    diffs.append({"r": r, "from": list(d.source_pos), "to": list(d.target_pos)})
            pg["nonzero_differentials"] = diffs
            pages.append(pg)
            certs.update({f"{C.variance}:{k}": x
                          for k, x in certify_page(C, r, seed=opts.seed).items()})
        out[C.variance] = pages
    return out, certs


def task_filtration(doc, task, opts):
    A = doc.complexes[task["complex"]]
    T = opts.depth or task.get("depth", 3)
    M, B = _functor(doc, task)
    t = build_tower(A, T)
    out, certs = {}, {}
    for v in ([None] if B is not None else _variances(task)):
        F = abcss.make_functor(v, M, B)
        lo, hi = functor_rows(F, A)
        rep = _filtration(F, t, range(lo, hi + 1), T)
        out[F.variance] = rep.to_json()
        certs[f"{F.variance}:monotone"] = rep.is_monotone()
    return out, certs


def task_abc(doc, task, opts, *, with_cellular=True):
    A = doc.complexes[task["complex"]]
    T = opts.depth or task.get("depth", 3)
    R = opts.rmax or task.get("r_max", 3)
    M, B = _functor(doc, task)
    out, certs, verdicts = {}, {}, {}
    for v in ([None] if B is not None else _variances(task)):
        F = abcss.make_functor(v, M, B)
        run = abcss.run_abc(A, M, F.variance, T, max(R, 2), functor=F, seed=opts.seed)
        key = F.variance
        rep = run.to_json()
        certs.update({f"{key}:{k}": x for k, x in run.certificates().items()})
        if M is not None:
            e2 = abcss.verify_e2(run)
            rep["e2"] = {f"{p},{q}": {"page": [doc.ring.to_json(x) for x in c.page_form],
                                      "derived_functor": [doc.ring.to_json(x) for x in c.oracle_form],
                                      "isomorphism": c.isomorphism}
                         for (p, q), c in sorted(e2.items())}
            certs.update({f"{key}:e2:{p},{q}": c.ok for (p, q), c in e2.items()})
        if with_cellular:
            cr = abcss.cellular_couple(run)
            rep["cellular"] = cr.to_json()
            certs[f"{key}:cellular"] = cr.ok()
        out[key] = rep
        for m, dv in run.convergence.items():
            verdicts[f"{key}:degree{m}"] = dv.status
    return out, certs, verdicts


def task_ext(doc, task, opts):
    A = doc.complexes[task["complex"]]
    B = doc.complexes[task["target"]]
    T = max(3, opts.depth or task.get("depth", 3))
    es = abcss.ext_sequences(A, B, build_tower(A, T))
    return es.to_json(doc.ring), es.certify()


def task_adjunction(doc, task, opts):
    B = doc.complexes[task["target"]]
    ranks = {int(n): r for n, r in task["ranks"].items()}
    ad = abcss.adjunction_check((doc.ring, ranks), B)
    ring = doc.ring
    return {"ho_hom": [ring.to_json(x) for x in ad.left.normal_form()],
            "graded_hom": [ring.to_json(x) for x in ad.right.normal_form()]}, ad.checks


def task_verify_all(doc, task, opts):
    out, certs, verdicts = {}, {}, {}
    r, c = task_tower(doc, task, opts)
    out["tower"] = r
    certs.update({f"tower:{k}": v for k, v in c.items()})
    r, c = task_castle(doc, task, opts)
    out["castle"] = r
    certs.update({f"castle:{k}": v for k, v in c.items()})
    if "coefficients" in task or "target" in task:
        sub = dict(task)
        if "coefficients" in task:
            sub["variance"] = "both"
        r, c, v = task_abc(doc, sub, opts)
        out["abc"] = r
        certs.update({f"abc:{k}": x for k, x in c.items()})
        verdicts.update(v)
    if "power" in task:
        A = doc.complexes[task["complex"]]
        M = doc.modules[task["coefficients"]] if "coefficients" in task else FgModule(doc.ring, 1)
        rep = abcss.collapse_report(A, int(task["power"]), M)
        out["collapse"] = {"power": rep.m,
                           "entries": {f"{p},{q}": {"normal_form": [doc.ring.to_json(x) for x in nf],
                                                    "stabilized_at": s}
                                       for (p, q), (nf, s) in sorted(rep.entries.items())}}
        certs.update({f"collapse:null:{n}": v for n, v in rep.iota_null.items()})
        certs.update({f"collapse:{k}": v for k, v in rep.checks.items()})
    return out, certs, verdicts


RUNNERS = {"tower": task_tower, "castle": task_castle, "pages": task_pages,
           "filtration": task_filtration, "abc": task_abc, "ext": task_ext,
           "adjunction": task_adjunction, "verify-all": task_verify_all}


@dataclass
class Options:
    depth: int | None = None
    rmax: int | None = None
    seed: int = 0


def run_document(doc: ProblemDocument, opts: Options | None = None, source: str = "") -> dict:
    opts = opts or Options()
    results = []
    order = sorted(range(len(doc.tasks)), key=lambda i: (TASK_ORDER[doc.tasks[i]["task"]], i))
    for i in order:
        task = doc.tasks[i]
        t0 = time.perf_counter()
        try:
            res = RUNNERS[task["task"]](doc, task, opts)
        except PhantomCastleError as exc:
            res = ({"error": f"{type(exc).__name__}: {exc}"}, {"completed": False}, {})
        result, certs = res[0], res[1]
        degree_verdicts = res[2] if len(res) > 2 else {}
        verdict = _verdict(certs)
        if verdict == "verified" and any(v == "failed" for v in degree_verdicts.values()):
            verdict = "failed"
        results.append({
            "index": i, "task": task["task"], "name": task.get("name", f"{task['task']}-{i}"),
            "parameters": {k: v for k, v in sorted(task.items()) if k not in ("task", "name")},
            "verdict": verdict, "failed_certificates": _failures(certs),
            "certificate_count": len(certs), "certificates": dict(sorted(certs.items())),
            "degree_verdicts": dict(sorted(degree_verdicts.items())), "result": result,
            "elapsed_s": round(time.perf_counter() - t0, 4)})
    return {"schema": REPORT_SCHEMA, "source": source, "ring": doc.ring.name(),
            "options": {"depth": opts.depth, "rmax": opts.rmax, "seed": opts.seed},
            "all_verified": all(r["verdict"] == "verified" for r in results), "tasks": results}


def strip_timing(report):
    """Copy of a report without the timing fields."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k != "elapsed_s"}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report


def format_text(report: dict) -> str:
    lines = [f"{report['source'] or 'document'}  [{report['ring']}]"]
    if not report["tasks"]:
        lines.append("  no tasks")
    for r in report["tasks"]:
        lines.append(f"  {r['name']:<28} {r['verdict']:<9} {r['certificate_count']:>5} certificates"
                     f"  {r['elapsed_s']:.2f}s")
        for k, v in r["degree_verdicts"].items():
            lines.append(f"      {k:<26} {v}")
        for k in r["failed_certificates"][:10]:
            lines.append(f"      failed: {k}")
        if "error" in r["result"]:
            lines.append(f"      error: {r['result']['error']}")
    lines.append("all verified" if report["all_verified"] else "NOT all verified")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# fixtures


def fixture_dir() -> Path:
    return Path(str(resources.files("phantomcastle") / "fixtures"))


def fixture_names() -> list:
    return sorted(p.stem for p in fixture_dir().glob("*.toml"))


def fixture_path(name: str) -> Path:
    p = fixture_dir() / f"{name}.toml"
    if not p.exists():
        raise UnknownFixture(f"no fixture named {name!r}")
    return p


def select_fixtures(selector: str) -> list:
    names = [n for n in fixture_names() if fnmatch.fnmatchcase(n, selector)]
    if not names:
        raise UnknownFixture(f"selector {selector!r} matches no fixture")
    return names


def run_corpus(selector: str, opts: Options | None = None) -> dict:
    reports = []
    for name in select_fixtures(selector):
        doc = load_document(fixture_path(name))
        reports.append(run_document(doc, opts, source=name))
    return {"schema": REPORT_SCHEMA, "selector": selector,
            "all_verified": all(r["all_verified"] for r in reports), "documents": reports}


# ---------------------------------------------------------------------------
# explanations

EXPLANATIONS = {
    "converged": "Every entry on the diagonal p+q = m stabilized inside the window, each stable "
                 "entry is isomorphic to its filtration quotient through the explicit comparison "
                 "map, and the filtration reached all of F_m(A) within the tower depth.",
    "partial-at-depth": "All computed comparisons hold, but some entry on the diagonal did not "
                        "stabilize within r_max or the window, or the filtration was cut off by "
                        "the tower depth.  The obstruction groups at depth are listed per stage.",
    "caveat": "Cohomological run on a tower that does not terminate: the decreasing filtration "
              "is compared with the stable entries, but limits of the filtration are not "
              "certified, so no convergence claim is made.",
    "failed": "At least one certificate returned false; its identifier is listed under "
              "failed_certificates.",
    "verified": "Every certificate produced by the task returned true.",
    "couple": "Kernel equals image at each of the three joints of the exact couple.",
    "dd": "The page differential squares to zero at this position.",
    "recursion": "E^{r+1} computed from the subquotient formulas equals the homology of (E^r, d^r).",
    "lift": "The page differential does not depend on the chosen preimage under i^{r-1}.",
    "iso:E_inf": "The stable entry maps isomorphically onto the filtration quotient.",
    "edge": "At p = 0 the convergence map agrees with F(pi_0).",
    "exhaustive": "The top filtration step equals the whole group.",
    "separated": "The deepest cohomological filtration step is zero.",
    "seq": "The four-term sequence linking the obstruction groups at depth with E^{r+1} is exact; "
           "bad_* entries identify its outer terms with the obstruction groups.",
    "e2": "The second page is isomorphic to Tor_p(M, H_q) or Ext^p(H_q, M) through the map "
          "comparing the tower strand with a minimal free resolution.",
    "cellular": "Identity on E and gamma on D form a morphism from the tower couple to the "
                "cellular couple, inducing isomorphisms on every computed page.",
    "exact": "The triangle is exact: its cone comparison is a homotopy equivalence.",
    "phantom": "The tower map induces zero on homology.",
    "projective": "The object is homotopy equivalent to a free complex with zero differential.",
    "resolution_exact": "The homology of the spliced tower is a free resolution.",
    "commutes": "The square of castle maps commutes up to an explicit homotopy.",
    "power_projective": "The castle stage is projective for the matching power of the ideal.",
    "collapse": "Tower composites of length m+1 are null and the pages are stable from E^{m+2}.",
    "ext0": "Ho/I(A,B) -> Ext^0 -> I(N_1[-1],B) -> I^2(A[-1],B) is exact.",
    "ext1": "I/I^2(A,B) -> Ext^1 -> I^2(N_1[-1],B)-type terms, exact at every joint.",
    "in_ideal": "The generator of the image subgroup is zero on homology.",
    "in_power": "The generator factors through the tower composite of the given length.",
    "unit": "Reading off homology classes and then choosing cycles is the identity.",
    "counit": "Choosing cycles and then reading off classes is the identity.",
    "monotone": "The filtration steps are nested in the expected direction.",
}


def explain(key: str) -> str:
    parts = [p for p in key.replace("@", ":").split(":") if p]
    for p in [key] + parts:
        base = p.rstrip("0123456789,-")
        for cand in (p, base):
            if cand in EXPLANATIONS:
                return f"{cand}: {EXPLANATIONS[cand]}"
    raise KeyError(key)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phantomcastle",
                                 description="Phantom towers, castles and ABC spectral sequences "
                                             "of chain complexes.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=int, help="override the tower depth of every task")
    common.add_argument("--rmax", type=int, help="override the last page of every task")
    common.add_argument("--out", help="write the report to this file")
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized lift checks")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run the tasks of a problem document")
    p.add_argument("path")
    p = sub.add_parser("corpus", parents=[common], help="run bundled fixtures matching a glob")
    p.add_argument("selector", nargs="?", default="*")
    p = sub.add_parser("explain", help="describe a verdict or certificate identifier")
    p.add_argument("key")
    sub.add_parser("fixtures", help="list bundled fixtures")
    return ap


def _emit(report, args, text):
    if args.format == "structured" or args.out:
        payload = json.dumps(report, indent=2, sort_keys=False)
        if args.out:
            Path(args.out).write_text(payload + "\n")
            if args.format == "text":
                print(text)
        else:
            print(payload)
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "explain":
        try:
            print(explain(args.key))
        except KeyError:
            print(f"no explanation for {args.key!r}", file=sys.stderr)
            return 1
        return 0
    if args.command == "fixtures":
        print("\n".join(fixture_names()))
        return 0
    opts = Options(args.depth, args.rmax, args.seed)
    try:
        if args.command == "run":
            doc = load_document(args.path)
            report = run_document(doc, opts, source=str(args.path))
            text = format_text(report)
        else:
            report = run_corpus(args.selector, opts)
            text = "\n".join(format_text(r) for r in report["documents"])
    except PhantomCastleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(report, args, text)
    return 0 if report["all_verified"] else 2


if __name__ == "__main__":
    sys.exit(main())
