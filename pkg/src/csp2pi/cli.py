"""Command-line interface: ``csp2pi <command> ...``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import csp, encoder, equivalence as Q, lts as L, target

KIND = click.Choice(encoder.KINDS)
CHECKS = ("bisim", "coupled", "opcorr-strong", "opcorr-weak", "sensitivity",
          "divergence", "distributability", "locks")
DEFAULT_KIND = {"bisim": "central", "coupled": "decentral", "opcorr-strong": "central",
                "opcorr-weak": "decentral", "sensitivity": "central", "divergence": "central",
                "distributability": "decentral", "locks": "decentral"}


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _parse(path: str):
    text = _read(path)
    try:
        return csp.parse_csp(text)
    except csp.CspSyntaxError as exc:
        raise click.ClickException(f"{path}: {exc}") from None


def _emit(obj, fmt: str, text: str | None = None):
    if fmt == "json":
        click.echo(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        click.echo(text if text is not None else str(obj))


def budget_options(f):
    f = click.option("--max-states", type=click.IntRange(min=1), default=None,
                     help="State budget for target graphs.")(f)
    f = click.option("--max-depth", type=click.IntRange(min=1), default=None,
                     help="Depth budget for target graphs.")(f)
    f = click.option("--gc-junk", is_flag=True, help="Drop provably inert threads.")(f)
    return f


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Translate CSP terms into a pi-calculus and check the translations."""


@main.command()
@click.argument("path")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def parse(path, fmt):
    """Parse a CSP term and print it back."""
    S = _parse(path)
    _emit({"term": csp.pretty(S), "names": sorted(csp.names_of(S)),
           "free_vars": sorted(csp.free_vars(S))}, fmt, csp.pretty(S))


@main.command()
@click.argument("path")
@click.option("--kind", type=KIND, default="inner", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--map", "map_path", default=None, metavar="FILE",
              help="Write the occurrence-to-name map as JSON.")
def translate(path, kind, fmt, map_path):
    """Encode a CSP term."""
    S = _parse(path)
    term, name_map = encoder.encode(S, kind)
    text = target.pretty(term)
    if map_path:
        Path(map_path).write_text(json.dumps(
            {str(k): {kk: str(vv) for kk, vv in v.items()} for k, v in sorted(name_map.items())},
            indent=2, sort_keys=True) + "\n")
    _emit({"kind": kind, "term": text, "size": target.size(term)}, fmt, text)


def _load_any(path, kind):
    """A CSP term (encoded when a kind is given) or a target term."""
    text = _read(path)
    try:
        S = csp.parse_csp(text)
    except csp.CspSyntaxError:
        try:
            return "target", target.parse_target(text)
        except target.TargetSyntaxError as exc:
            raise click.ClickException(f"{path}: not a CSP or target term ({exc})") from None
    if kind is None:
        return "csp", S
    return "target", encoder.encode(S, kind)[0]


@main.command()
@click.argument("path")
@click.option("--kind", type=KIND, default=None, help="Encode first and step the target term.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--gc-junk", is_flag=True)
def steps(path, kind, fmt, gc_junk):
    """List the one-step reductions of a term."""
    sem, term = _load_any(path, kind)
    rows = []
    if sem == "csp":
        for a, p, rx in csp.labelled_steps(term):
            rows.append({"label": a, "redex": sorted(rx), "to": csp.pretty(p)})
        text = "\n".join(f"--{r['label']}--> {r['to']}" for r in rows)
    else:
        for nxt, info in target.reductions_target(term, gc=gc_junk):
            rec = info.to_json()
            if kind in ("central", "decentral"):
                c = encoder.classify_step(kind, target.canonicalize(term), info)
                rec["class"], rec["reason"] = c.cls, c.reason
            rec["to"] = str(nxt)
            rows.append(rec)
        text = "\n".join(f"--{r['channel']}{'/' + r['class'] if r.get('class') else ''}--> {r['to']}"
                         for r in rows)
    _emit(rows, fmt, text or "(no steps)")


@main.command("lts")
@click.argument("path")
@click.option("--kind", type=KIND, default=None, help="Explore the encoding of this kind.")
@click.option("--format", "fmt", type=click.Choice(["text", "json", "dot"]), default="text")
@budget_options
def lts_cmd(path, kind, fmt, max_states, max_depth, gc_junk):
    """Explore the reduction graph of a term."""
    sem, term = _load_any(path, kind)
    if sem == "csp":
        g = L.explore(term, "csp", max_states=max_states, max_depth=max_depth)
        L.observe(g)
    else:
        g = L.explore(term, "target", max_states=max_states, max_depth=max_depth, gc=gc_junk)
        L.observe(g, kind or "inner")
        if kind in ("central", "decentral"):
            L.classify_edges(g, kind)
    if fmt == "dot":
        click.echo(L.to_dot(g), nl=False)
        return
    data = L.to_json(g)
    text = (f"states: {len(g.states)}\nedges: {len(g.edges)}\n"
            f"complete: {g.complete}\ndivergent: {L.divergence_check(g)['divergent']}")
    _emit(data, fmt, text)


@main.command()
@click.argument("path")
@click.option("--kind", type=KIND, default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def barbs(path, kind, fmt):
    """Immediate barbs (translated barbs for target terms) and success."""
    sem, term = _load_any(path, kind)
    if sem == "csp":
        b, ok = csp.barbs(term), csp.has_success(term)
        unknown = []
    else:
        tb = encoder.translated_barbs(term, kind or "inner")
        b, ok, unknown = tb, target.has_success_target(term), [str(u) for u in tb.unknown]
    obj = {"barbs": sorted(b), "success": ok, "unknown": unknown}
    _emit(obj, fmt, f"barbs: {{{', '.join(sorted(b))}}}\nsuccess: {ok}")


def run_check(which, S, kind, max_states=None, max_depth=None, gc=False) -> Q.CheckVerdict:
    kind = kind or DEFAULT_KIND[which]
    kw = {"max_states": max_states, "max_depth": max_depth, "gc": gc}
    if which == "distributability":
        return Q.check_distributability(S, kind, **kw)
    fn = {"bisim": Q.check_bisim, "coupled": Q.check_coupled,
          "opcorr-strong": Q.check_opcorr_strong, "opcorr-weak": Q.check_opcorr_weak,
          "sensitivity": Q.check_sensitivity, "divergence": Q.check_divergence,
          "locks": Q.check_lock_invariants}[which]
    if which == "locks" and kind == "inner":
        raise click.BadParameter("lock invariants concern outer encodings", param_hint="--kind")
    return fn(S, kind, **kw)


@main.command()
@click.argument("which", type=click.Choice(CHECKS))
@click.argument("path")
@click.option("--kind", type=KIND, default=None, help="Encoding (default depends on the check).")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="json")
@budget_options
def check(which, path, kind, fmt, max_states, max_depth, gc_junk):
    """Run a check; exit 0 holds, 1 fails, 2 inconclusive."""
    S = _parse(path)
    v = run_check(which, S, kind, max_states, max_depth, gc_junk)
    _emit(v.to_json(), fmt, f"{which}: {v.status}")
    sys.exit(v.exit_code)


@main.command()
@click.argument("manifest")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def corpus(manifest, fmt):
    """Run a JSON manifest of checks and compare with expected verdicts.

    The manifest is a list of entries {"file" or "term", "check", "kind",
    "expect", "max_states", "max_depth", "gc_junk"}; files are relative to
    the manifest.
    """
    mpath = Path(manifest)
    try:
        entries = json.loads(mpath.read_text() or "[]")
    except FileNotFoundError:
        raise click.ClickException(f"manifest not found: {manifest}") from None
    if isinstance(entries, dict):
        entries = entries.get("entries", [])
    rows = []
    for i, ent in enumerate(entries):
        if "file" in ent:
            f = mpath.parent / ent["file"]
            if not f.exists():
                raise click.ClickException(f"entry {i}: missing file {f}")
            S = csp.parse_csp(f.read_text())
            label = ent["file"]
        else:
            S = csp.parse_csp(ent["term"])
            label = ent["term"]
        v = run_check(ent["check"], S, ent.get("kind"), ent.get("max_states"),
                      ent.get("max_depth"), bool(ent.get("gc_junk")))
        expect = ent.get("expect", "holds")
        rows.append({"entry": label, "check": ent["check"], "kind": ent.get("kind")
                     or DEFAULT_KIND[ent["check"]], "expect": expect, "got": v.status,
                     "ok": v.status == expect})
    if fmt == "json":
        click.echo(json.dumps(rows, indent=2))
    else:
        for r in rows:
            click.echo(f"{'PASS' if r['ok'] else 'FAIL'}  {r['check']:<17} {r['kind']:<9} "
                       f"expect={r['expect']:<12} got={r['got']:<12} {r['entry']}")
        click.echo(f"{sum(r['ok'] for r in rows)}/{len(rows)} as expected")
    sys.exit(0 if all(r["ok"] for r in rows) else 1)


if __name__ == "__main__":
    main()
