"""``raevolve`` command line.

A workspace is a directory holding the description under evolution next to
its reference data (kinds, questions, catalog).  It may also hold an
imported assessment, and it keeps the linear change-set history::

    description.rad.json
    kinds.json
    questions.json
    catalog/*.guideline.json, catalog/rules/*.rule.json
    assessment.json
    history/<n>-<rule>.changeset.json

Exit codes: 0 success, 1 operational error, 2 advisory findings under
``--strict``.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from . import advisor, engine
from .catalog import (
    catalog_warnings,
    check_catalog_docs,
    load_catalog,
    read_catalog_dir,
    render_index,
    seed_catalog_root,
)
from .errors import AlreadyInitialized, HashMismatch, ParseError, RaevolveError
from .fera import Policy, deficiencies, load_assessment, load_registry, seed_registry_document
from .model import (
    ArchitectureDescription,
    canonical_bytes,
    content_hash,
    deserialize,
    display_name,
    load_kinds,
    new_description,
    parse_json,
    seed_kinds_document,
    serialize,
)

EXIT_OK, EXIT_ERROR, EXIT_ADVISORY = 0, 1, 2

DESCRIPTION_FILE = "description.rad.json"
KINDS_FILE = "kinds.json"
QUESTIONS_FILE = "questions.json"
ASSESSMENT_FILE = "assessment.json"
LOCK_FILE = ".raevolve.lock"


class WorkspaceLocked(RaevolveError):
    pass


@dataclass
class Workspace:
    root: Path

    @property
    def description_path(self) -> Path:
        return self.root / DESCRIPTION_FILE

    @property
    def kinds_path(self) -> Path:
        return self.root / KINDS_FILE

    @property
    def registry_path(self) -> Path:
        return self.root / QUESTIONS_FILE

    @property
    def catalog_dir(self) -> Path:
        return self.root / "catalog"

    @property
    def assessment_path(self) -> Path:
        return self.root / ASSESSMENT_FILE

    @property
    def history_dir(self) -> Path:
        return self.root / "history"

    def kinds(self):
        return load_kinds(self.kinds_path.read_bytes())

    def registry(self):
        return load_registry(self.registry_path.read_bytes(), self.kinds())

    def catalog(self):
        guideline_docs, rule_docs = read_catalog_dir(self.catalog_dir)
        return load_catalog(guideline_docs, rule_docs, self.registry(), self.kinds())

    def description(self) -> ArchitectureDescription:
        return deserialize(self.description_path.read_bytes(), self.kinds())

    def save_description(self, desc: ArchitectureDescription) -> None:
        _atomic_write(self.description_path, serialize(desc))

    def assessment(self, path: str | Path | None = None):
        source = Path(path) if path else self.assessment_path
        return load_assessment(source.read_bytes(), self.registry())

    def history(self) -> list[tuple[Path, engine.ChangeSet]]:
        if not self.history_dir.is_dir():
            return []
        files = sorted(self.history_dir.glob("*.changeset.json"), key=lambda p: int(p.name.split("-", 1)[0]))
        return [(p, engine.changeset_from_dict(parse_json(p.read_bytes(), p.name))) for p in files]

    def record(self, cs: engine.ChangeSet) -> Path:
        n = len(self.history()) + 1
        path = self.history_dir / f"{n}-{cs.rule}.changeset.json"
        _atomic_write(path, canonical_bytes(cs.to_dict()))
        return path

    @contextmanager
    def lock(self):
        path = self.root / LOCK_FILE
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLocked(f"workspace is locked by {path}; remove it if no other process is running") from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            path.unlink(missing_ok=True)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def init_workspace(root: str | Path, name: str = "Reference Architecture",
                   description: str | Path | None = None) -> Workspace:
    ws = Workspace(Path(root))
    if ws.description_path.exists():
        raise AlreadyInitialized(f"{ws.root} already holds a workspace")
    ws.root.mkdir(parents=True, exist_ok=True)
    ws.history_dir.mkdir(exist_ok=True)
    ws.kinds_path.write_bytes(canonical_bytes(seed_kinds_document()))
    ws.registry_path.write_bytes(canonical_bytes(seed_registry_document()))
    _copy_seed_catalog(ws.catalog_dir)
    if description is not None:
        desc = deserialize(Path(description).read_bytes(), ws.kinds())
        problems = desc.validate()
        if problems:
            raise ParseError(f"initial description is invalid: {problems[0]}")
    else:
        desc = new_description(name, ws.kinds())
    ws.save_description(desc)
    return ws


def _copy_seed_catalog(dest: Path) -> None:
    src = seed_catalog_root()
    (dest / "rules").mkdir(parents=True, exist_ok=True)
    for entry in src.iterdir():
        if entry.name.endswith(".guideline.json"):
            (dest / entry.name).write_bytes(entry.read_bytes())
    for entry in src.joinpath("rules").iterdir():
        if entry.name.endswith(".rule.json"):
            (dest / "rules" / entry.name).write_bytes(entry.read_bytes())


def parse_inputs(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ParseError(f"--input expects key=value, got {pair!r}")
        out[key.strip()] = value
    return out


def verify_history(ws: Workspace, desc: ArchitectureDescription | None = None) -> list[engine.ChangeSet]:
    """Check that recorded change sets chain and end at the current description."""
    entries = ws.history()
    for (prev_path, prev), (path, cs) in zip(entries, entries[1:]):
        if cs.pre_hash != prev.post_hash:
            raise HashMismatch(f"{path.name}: pre_hash does not match post_hash of {prev_path.name}")
    if entries:
        desc = desc or ws.description()
        path, last = entries[-1]
        if content_hash(desc) != last.post_hash:
            raise HashMismatch(f"{path.name}: post_hash does not match {DESCRIPTION_FILE}")
    return [cs for _, cs in entries]


# -- output helpers ---------------------------------------------------------------


def _emit(args, text: str | None = None, doc=None) -> None:
    if args.format == "json" and doc is not None:
        sys.stdout.write(canonical_bytes(doc).decode("utf-8"))
    elif text is not None:
        sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


def _violation_dict(v) -> dict:
    return {"subject": v.subject, "invariant": v.invariant, "message": v.message}


# -- commands -------------------------------------------------------------------------


def cmd_init(args) -> int:
    ws = init_workspace(args.workspace, args.name, args.description)
    _emit(args, f"initialized workspace {ws.root}", {"workspace": str(ws.root), "version": 0})
    return EXIT_OK


def cmd_catalog_validate(args) -> int:
    ws = Workspace(Path(args.workspace))
    registry, kinds = ws.registry(), ws.kinds()
    guideline_docs, rule_docs = read_catalog_dir(ws.catalog_dir)
    problems = check_catalog_docs(guideline_docs, rule_docs, registry, kinds)
    warnings = [] if problems else catalog_warnings(load_catalog(guideline_docs, rule_docs, registry, kinds))
    lines = [f"error: {v}" for v in problems] + [f"warning: {v}" for v in warnings]
    lines.append(f"{len(problems)} violation(s), {len(warnings)} warning(s)")
    _emit(args, "\n".join(lines), {"violations": [_violation_dict(v) for v in problems],
                                   "warnings": [_violation_dict(v) for v in warnings]})
    if problems:
        return EXIT_ERROR
    return EXIT_ADVISORY if args.strict and warnings else EXIT_OK


def cmd_catalog_index(args) -> int:
    index = render_index(Workspace(Path(args.workspace)).catalog())
    _emit(args, index.to_table(), index.to_dict())
    return EXIT_OK


def cmd_assess_import(args) -> int:
    ws = Workspace(Path(args.workspace))
    assessment = load_assessment(Path(args.file).read_bytes(), ws.registry())
    _atomic_write(ws.assessment_path, canonical_bytes(assessment.to_dict()))
    _emit(args, f"imported {len(assessment.answers)} answer(s) for {assessment.architecture or 'unnamed architecture'}",
          {"answers": len(assessment.answers)})
    return EXIT_OK


def cmd_deficiencies(args) -> int:
    ws = Workspace(Path(args.workspace))
    found = deficiencies(ws.assessment(args.assessment), args.policy)
    lines = [f"{d.question} {d.severity.value} {display_name(d.category)}"
             + "".join(f"\n  {role}: {c}" if c else f"\n  {role}" for role, c in d.evidence) for d in found]
    _emit(args, "\n".join(lines) if lines else "No deficiencies.",
          {"policy": Policy(args.policy).value, "deficiencies": [d.to_dict() for d in found]})
    return EXIT_OK


def cmd_recommend(args) -> int:
    ws = Workspace(Path(args.workspace))
    registry, catalog, desc = ws.registry(), ws.catalog(), ws.description()
    if args.question:
        assessment = None
        source = Path(args.assessment) if args.assessment else ws.assessment_path
        if source.exists():
            assessment = ws.assessment(source)
        recs = [advisor.recommend_question(args.question, desc, registry, catalog, assessment)]
    else:
        recs = advisor.recommend(ws.assessment(args.assessment), desc, registry, catalog, args.policy)
    if args.format == "json":
        sys.stdout.write(advisor.report_json(recs).decode("utf-8"))
    else:
        sys.stdout.write(advisor.report_text(recs, catalog))
    if args.strict and any(r.is_advisory for r in recs):
        return EXIT_ADVISORY
    return EXIT_OK


def _prompt_inputs(rule, values: dict[str, str]) -> dict[str, str]:
    values = dict(values)
    choices = {c.input: c for c in engine._choices(rule)}
    for item in rule.inputs:
        if item.name in values:
            continue
        if item.name in choices:
            c = choices[item.name]
            print(c.prompt, file=sys.stderr)
            for i, option in enumerate(c.options, 1):
                print(f"  {i}. {option}", file=sys.stderr)
            answer = input(f"{item.name} [1-{len(c.options)}]: ").strip()
            values[item.name] = c.options[int(answer) - 1] if answer.isdigit() and 0 < int(answer) <= len(c.options) else answer
        else:
            hint = f" ({item.description})" if item.description else ""
            default = f" [{item.default}]" if item.default is not None else ""
            answer = input(f"{item.name}{hint}{default}: ")
            if answer or item.default is None:
                values[item.name] = answer
    return values


def cmd_apply(args) -> int:
    ws = Workspace(Path(args.workspace))
    catalog = ws.catalog()
    rule = catalog.rule(args.rule)
    inputs = parse_inputs(args.input)
    if args.prompt:
        inputs = _prompt_inputs(rule, inputs)
    if args.dry_run:
        plan = engine.dry_run(rule, ws.description(), inputs)
        _emit(args, "\n".join([f"plan for {rule.id} ({rule.event}):"] + plan.lines()), plan.to_dict())
        return EXIT_OK
    with ws.lock():
        desc = ws.description()
        verify_history(ws, desc)
        cs = engine.execute(rule, desc, inputs)
        path = ws.record(cs)
        ws.save_description(desc)
    _emit(args, "\n".join(cs.summary() + [f"recorded {path.relative_to(ws.root)}"]), cs.to_dict())
    return EXIT_OK


def _find_changeset(ws: Workspace, ref: str | None) -> engine.ChangeSet:
    entries = ws.history()
    if not entries:
        raise RaevolveError("history is empty; nothing to revert")
    if ref is None:
        return entries[-1][1]
    candidate = Path(ref)
    if candidate.is_file():
        return engine.changeset_from_dict(parse_json(candidate.read_bytes(), candidate.name))
    for path, cs in entries:
        if ref in (cs.id, path.name, path.name.removesuffix(".changeset.json")):
            return cs
    raise RaevolveError(f"no change set {ref!r} in the history")


def cmd_revert(args) -> int:
    ws = Workspace(Path(args.workspace))
    with ws.lock():
        desc = ws.description()
        cs = _find_changeset(ws, args.changeset)
        undo = engine.revert(desc, cs)
        path = ws.record(undo)
        ws.save_description(desc)
    _emit(args, "\n".join(undo.summary() + [f"recorded {path.relative_to(ws.root)}"]), undo.to_dict())
    return EXIT_OK


def build_report(ws: Workspace, policy: str = "any-negative") -> dict:
    desc = ws.description()
    history = verify_history(ws, desc)
    violations = desc.validate()
    traced = {t.target for t in desc.traceability if t.changeset != "imported"}
    open_items = []
    if ws.assessment_path.exists():
        for d in deficiencies(ws.assessment(), policy):
            status = "addressed" if str(d.question) in traced else "open"
            open_items.append({**d.to_dict(), "status": status})
    return {
        "description": {"name": desc.name, "version": desc.version, "elements": len(desc.elements),
                        "traces": len(desc.traceability), "hash": content_hash(desc)},
        "violations": [_violation_dict(v) for v in violations],
        "changesets": [{"id": cs.id, "rule": cs.rule, "reverts": cs.reverts} for cs in history],
        "deficiencies": open_items,
    }


def cmd_report(args) -> int:
    ws = Workspace(Path(args.workspace))
    doc = build_report(ws, args.policy)
    d = doc["description"]
    lines = [f"{d['name']}: version {d['version']}, {d['elements']} element(s), {d['traces']} trace(s)"]
    lines.append(f"validation: {len(doc['violations'])} violation(s)")
    lines += [f"  {v['subject']}: [{v['invariant']}] {v['message']}" for v in doc["violations"]]
    lines.append(f"history: {len(doc['changesets'])} change set(s)")
    lines += [f"  {c['id']} {c['rule']}" + (f" (reverts {c['reverts']})" if c["reverts"] else "")
              for c in doc["changesets"]]
    if doc["deficiencies"]:
        lines.append("deficiencies:")
        lines += [f"  {x['question']} {x['severity']} {display_name(x['category'])}: {x['status']}"
                  for x in doc["deficiencies"]]
    _emit(args, "\n".join(lines), doc)
    return EXIT_ADVISORY if args.strict and doc["violations"] else EXIT_OK


def render_outline(desc: ArchitectureDescription) -> str:
    lines = [f"# {desc.name} (version {desc.version})", ""]
    for s in desc.general_sections:
        lines += [f"## {s.name}", "", s.content, ""]
    children = {c for el in desc.elements.values() for c in el.children}

    def walk(el_id: str, depth: int) -> None:
        el = desc.elements[el_id]
        attrs = "".join(f"; {k}: {v}" for k, v in sorted(el.attributes.items()))
        lines.append(f"{'  ' * depth}- {display_name(el.kind)} \"{el.name}\" ({el.id}{attrs})")
        for s in el.body:
            lines.append(f"{'  ' * (depth + 1)}* {s.name}: {s.content}")
        for c in el.children:
            walk(c, depth + 1)

    for el_id in desc.elements:
        if el_id not in children:
            walk(el_id, 0)
    if desc.traceability:
        lines += ["", "Traceability:"]
        lines += [f"  {t.source} -{t.relation}-> {t.target} [{t.changeset}]" for t in desc.traceability]
    return "\n".join(lines) + "\n"


def cmd_export(args) -> int:
    ws = Workspace(Path(args.workspace))
    desc = ws.description()
    data = render_outline(desc).encode("utf-8") if args.outline else serialize(desc)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", "-w", default=argparse.SUPPRESS, help="workspace directory (default: .)")
    common.add_argument("--format", choices=("text", "table", "json"), default=argparse.SUPPRESS,
                        help="output format; table is an alias of text")
    common.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                        help="exit 2 when advisory findings are reported")

    parser = argparse.ArgumentParser(prog="raevolve", parents=[common],
                                     description="Evolve reference architecture descriptions from assessment results.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[common], help="create a workspace")
    p.add_argument("--name", default="Reference Architecture", help="name of the new description")
    p.add_argument("--description", help="start from an existing description file")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("catalog", parents=[common], help="inspect the guideline catalog")
    csub = p.add_subparsers(dest="catalog_command", required=True)
    csub.add_parser("validate", parents=[common]).set_defaults(func=cmd_catalog_validate)
    csub.add_parser("index", parents=[common]).set_defaults(func=cmd_catalog_index)

    p = sub.add_parser("assess", parents=[common], help="manage the assessment")
    asub = p.add_subparsers(dest="assess_command", required=True)
    q = asub.add_parser("import", parents=[common])
    q.add_argument("file")
    q.set_defaults(func=cmd_assess_import)

    policies = [x.value for x in Policy]
    p = sub.add_parser("deficiencies", parents=[common], help="list deficient questions")
    p.add_argument("--assessment")
    p.add_argument("--policy", choices=policies, default="any-negative")
    p.set_defaults(func=cmd_deficiencies)

    p = sub.add_parser("recommend", parents=[common], help="guidelines and candidate rules per deficiency")
    p.add_argument("--assessment")
    p.add_argument("--question")
    p.add_argument("--policy", choices=policies, default="any-negative")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("apply", parents=[common], help="execute an evolution rule")
    p.add_argument("--rule", required=True)
    p.add_argument("--input", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--prompt", action="store_true", help="ask for inputs that were not given")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("revert", parents=[common], help="undo a recorded change set")
    p.add_argument("changeset", nargs="?", help="change set id, history file name or path (default: latest)")
    p.set_defaults(func=cmd_revert)

    p = sub.add_parser("report", parents=[common], help="workspace status")
    p.add_argument("--policy", choices=policies, default="any-negative")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export", parents=[common], help="write the description")
    p.add_argument("--output", "-o")
    p.add_argument("--outline", action="store_true", help="human-readable outline instead of canonical JSON")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for key, default in (("workspace", "."), ("format", "text"), ("strict", False)):
        if not hasattr(args, key):
            setattr(args, key, default)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
    except (RaevolveError, KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
