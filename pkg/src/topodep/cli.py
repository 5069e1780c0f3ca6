"""Command-line front end: ``topodep <command> ...``.

Every command prints a human-readable report by default and a canonical JSON
document with ``--json``.  Exit status 2 signals a usage or input error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import checker, constructions, models, proofs, sat
from .formula import (
    LANGUAGES, FormulaSyntaxError, closure, language, modal_depth, parse, random_formula, size,
    to_text, variables,
)


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}") from None


def _formula(text: str):
    try:
        return parse(text)
    except FormulaSyntaxError as e:
        raise UsageError(f"syntax error: {e}") from None


def _model(path: str):
    try:
        return models.load_model(_read(path))
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"bad model file {path}: {e}") from None


# ---------------------------------------------------------------------------
# commands; each returns (exit code, json object, text)


def cmd_parse(a):
    phi = _formula(a.formula)
    out = {"formula": to_text(phi), "language": language(phi), "size": size(phi),
           "modal_depth": modal_depth(phi), "variables": list(variables(phi))}
    text = "\n".join(f"{k}: {v}" for k, v in out.items())
    return 0, out, text


def cmd_closure(a):
    phi = _formula(a.formula)
    lang = a.lang or language(phi)
    if lang == "ext":
        raise UsageError("closure sets are defined for lfd, lcd and lud formulas")
    c = closure(phi, lang)
    members = [to_text(f) for f in c.ordered]
    out = {"formula": to_text(phi), "language": lang, "variables": list(c.variables),
           "size": len(members), "members": members}
    return 0, out, f"{len(members)} formulas\n" + "\n".join(members)


def cmd_model_validate(a):
    M = _model(a.model)
    if isinstance(M, models.StandardModel):
        bad = models.check_standard(M)
    elif isinstance(M, models.PseudoMetricModel):
        bad = models.check_pseudometric(M)
    else:
        bad = models.validate_preorder_model(M)
    out = {"ok": not bad, "violations": [v.to_json() for v in bad]}
    text = "ok" if not bad else "\n".join(str(v) for v in bad)
    return (0 if not bad else 1), out, text


def cmd_model_expand(a):
    M = _model(a.model)
    try:
        P = models.as_preorder_model(M)
    except models.ModelError as e:
        raise UsageError(str(e)) from None
    obj = models.model_to_json(P)
    return 0, obj, models.dumps(obj).rstrip("\n")


def cmd_check(a):
    M = _model(a.model)
    if not a.formula:
        raise UsageError("--formula is required")
    phi = _formula(a.formula)
    try:
        if isinstance(M, models.StandardModel):
            sc = checker.StandardChecker(M)
            states, truth = sc.M.states, sc.eval_all(phi)
        else:
            P = models.as_preorder_model(M)
            states, truth = P.states, checker.eval_all(P, phi)
    except (checker.EvalError, models.ModelError) as e:
        raise UsageError(str(e)) from None
    if a.all:
        rows = {s: s in truth for s in states}
        out = {"formula": to_text(phi), "truth": rows}
        text = "\n".join(f"{s}\t{'T' if v else 'F'}" for s, v in rows.items())
        return 0, out, text
    s = a.state or states[0]
    if s not in states:
        raise UsageError(f"unknown state {s!r}")
    v = s in truth
    return (0 if v else 1), {"formula": to_text(phi), "state": s, "value": v}, f"{s}: {v}"


def _lang(a, phi):
    lang = a.lang or language(phi)
    if lang == "ext":
        raise UsageError("satisfiability is decided for lfd, lcd and lud only")
    return lang


def cmd_sat(a):
    phi = _formula(a.formula)
    lang = _lang(a, phi)
    try:
        r = sat.decide_sat(phi, lang)
    except (sat.SatResourceError, ValueError) as e:
        raise UsageError(str(e)) from None
    out = {"formula": to_text(phi), "language": lang, "status": r.status, "stats": r.stats}
    lines = [r.status]
    if r.sat:
        cert = models.model_to_json(r.model)
        out["state"] = r.state
        if a.certificate:
            _write(a.certificate, models.dumps(cert))
            lines.append(f"certificate ({len(r.model.states)} states) written to {a.certificate}")
        else:
            out["certificate"] = cert
            lines.append(models.dumps(cert).rstrip("\n"))
    else:
        out["trace"] = r.trace[-20:]
    if a.oracle:
        o = sat.brute_force_oracle(phi, a.max_states, lang)
        out["oracle"] = o.status
        lines.append(f"oracle (<= {a.max_states} states): {o.status}")
    return (0 if r.sat else 1), out, "\n".join(lines)


def cmd_valid(a):
    phi = _formula(a.formula)
    lang = _lang(a, phi)
    try:
        r = sat.decide_valid(phi, lang)
    except (sat.SatResourceError, ValueError) as e:
        raise UsageError(str(e)) from None
    out = {"formula": to_text(phi), "language": lang, "status": r.status}
    lines = [r.status]
    if not r.valid:
        cm = models.model_to_json(r.countermodel)
        out["state"] = r.state
        if a.certificate:
            _write(a.certificate, models.dumps(cm))
            lines.append(f"countermodel written to {a.certificate}")
        else:
            out["countermodel"] = cm
            lines.append(f"fails at {r.state} in:\n" + models.dumps(cm).rstrip("\n"))
    return (0 if r.valid else 1), out, "\n".join(lines)


def cmd_unravel(a):
    M = _model(a.model)
    try:
        P = models.as_preorder_model(M)
        betas = constructions.parse_betas(a.betas)
    except (models.ModelError, ValueError) as e:
        raise UsageError(str(e)) from None
    root = a.root or P.states[0]
    try:
        n = constructions.count_nodes(P, root, a.depth, betas) if root in P.states else None
        T = constructions.unravel(P, root, a.depth, betas, a.max_nodes,
                                  repair_constants=not a.literal)
    except (constructions.TreeBudgetError, ValueError) as e:
        raise UsageError(str(e)) from None
    if P.language == "lud":
        T = constructions.pseudo_metrize(T)
    out = {"root": root, "depth": a.depth, "nodes": n, "metrized": T.metrized}
    lines = [f"{n} histories (root {root}, depth {a.depth})"]
    code = 0
    if a.verify:
        findings = constructions.verify_representation(T)
        out["violations"] = constructions.report_json(findings)
        lines.append(f"{len(findings)} violations")
        lines += [f"  {f.claim} {f.item} {list(f.witness)} {f.detail}" for f in findings]
        code = 0 if not findings else 1
    if a.out:
        _write(a.out, _dump(T.to_json(relations=a.relations)) + "\n")
        lines.append(f"tree written to {a.out}")
    return code, out, "\n".join(lines)


def cmd_proof_verify(a):
    try:
        d = proofs.load_derivation(_read(a.proof))
    except (proofs.ProofFormatError, FormulaSyntaxError, ValueError) as e:
        raise UsageError(f"bad proof file: {e}") from None
    r = proofs.check_derivation(d, a.lang or "lud")
    out = {"ok": r.ok, "lines": len(d.lines), "failed_line": r.line, "reason": r.reason,
           "conclusion": to_text(d.conclusion) if d.conclusion is not None else None}
    text = (f"ok: {out['conclusion']}" if r.ok else f"line {r.line}: {r.reason}")
    return (0 if r.ok else 1), out, text


def cmd_oracle_compare(a):
    lang = a.lang or "lcd"
    if a.formula:
        formulas = [_formula(t) for t in a.formula]
    else:
        if a.seed is None:
            raise UsageError("--seed is required to generate random formulas")
        rng = random.Random(a.seed)
        formulas = [random_formula(rng, ("x",), {"P": 1}, 2, lang) for _ in range(a.count)]
    rows, disagree = [], 0
    for phi in formulas:
        try:
            r = sat.decide_sat(phi, lang)
            o = sat.brute_force_oracle(phi, a.max_states, lang)
        except (sat.SatResourceError, sat.OracleBudgetError, ValueError) as e:
            raise UsageError(str(e)) from None
        # the oracle is bounded: it can confirm SAT but never refute it
        bad = (o.sat and not r.sat) or (r.sat and len(r.model.states) <= a.max_states and not o.sat)
        disagree += bad
        rows.append({"formula": to_text(phi), "decider": r.status, "oracle": o.status,
                     "agree": not bad})
    out = {"language": lang, "max_states": a.max_states, "compared": len(rows),
           "disagreements": disagree, "results": rows}
    text = "\n".join(f"{'ok ' if r['agree'] else 'BAD'} {r['decider']:5} {r['oracle']:20} {r['formula']}"
                     for r in rows)
    text += f"\n{len(rows)} compared, {disagree} disagreements"
    return (0 if not disagree else 1), out, text


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topodep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--json", action="store_true", help="emit canonical JSON")
        q.set_defaults(fn=fn)
        return q

    def lang(q):
        q.add_argument("--lang", choices=[l for l in LANGUAGES if l != "ext"])

    q = add("parse", cmd_parse, "parse a formula and report its properties")
    q.add_argument("formula")
    q = add("closure", cmd_closure, "list the closure set of a formula")
    q.add_argument("formula")
    lang(q)
    q = add("model-validate", cmd_model_validate, "check a model file against its invariants")
    q.add_argument("model")
    q = add("model-expand", cmd_model_expand, "expand a standard or pseudo-metric model")
    q.add_argument("model")
    q = add("check", cmd_check, "evaluate a formula on a model")
    q.add_argument("model")
    q.add_argument("--formula", required=True)
    q.add_argument("--state")
    q.add_argument("--all", action="store_true", help="print the truth value at every state")
    q = add("sat", cmd_sat, "decide satisfiability (exit 0 SAT, 1 UNSAT)")
    q.add_argument("formula")
    lang(q)
    q.add_argument("--certificate", metavar="PATH", help="write the certificate model here")
    q.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    q.add_argument("--max-states", type=int, default=3)
    q = add("valid", cmd_valid, "decide validity (exit 0 valid, 1 invalid)")
    q.add_argument("formula")
    lang(q)
    q.add_argument("--certificate", metavar="PATH", help="write the countermodel here")
    q = add("unravel", cmd_unravel, "unravel a model into a tree of histories")
    q.add_argument("model")
    q.add_argument("--root")
    q.add_argument("--depth", type=int, default=constructions.DEFAULT_DEPTH)
    q.add_argument("--betas", default="0,1/2,1/4,1/8")
    q.add_argument("--max-nodes", type=int, default=constructions.DEFAULT_MAX_NODES)
    q.add_argument("--verify", action="store_true", help="run the representation checks")
    q.add_argument("--literal", action="store_true",
                   help="do not treat constant variables specially (for comparison)")
    q.add_argument("--out", metavar="PATH", help="write the tree as JSON")
    q.add_argument("--relations", action="store_true", help="include relations and distances in --out")
    q = add("proof-verify", cmd_proof_verify, "check a Hilbert-style derivation file")
    q.add_argument("proof")
    lang(q)
    q = add("oracle-compare", cmd_oracle_compare, "compare the decider with the brute-force oracle")
    q.add_argument("formula", nargs="*")
    lang(q)
    q.add_argument("--seed", type=int)
    q.add_argument("--count", type=int, default=20)
    q.add_argument("--max-states", type=int, default=3)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        code, obj, text = a.fn(a)
    except UsageError as e:
        if a.json:
            print(_dump({"error": str(e)}), file=stdout)
        print(f"topodep {a.command}: {e}", file=stderr)
        return 2
    print(_dump(obj) if a.json else text, file=stdout)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
