"""Operator command line: ``itb run|smoke|fault|trace|rtm|defect|cycle|report``.

Exit codes: 0 pass, 1 assertion failure, 2 usage or schema error,
3 blocked or absent, 4 sequencing error.

Every command delegates to the library; this module only parses flags,
loads and saves state files, and renders results.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Sequence

from itb.domain import ConfigurationError, parse_bin_table
from itb.env import EnvConfig, Environment
from itb.netsim import check_availability_pair, export_trace, parse_trace, query
from itb.stlc import (
    Campaign,
    CampaignFormatError,
    DefectDraft,
    DefectRejected,
    Direction,
    EntryInputs,
    LifecycleError,
    PermissionDenied,
    Requirement,
    RtmError,
    SequencingError,
    Source,
    report,
)
from itb.storefront import parse_fraud_list
from itb.testkit import (
    CaseSchemaError,
    Verdict,
    load_case,
    render_structured,
    render_text,
    run_smoke,
    run_suite,
    shipped_case_paths,
)
from itb.testkit.case import SHIPPED_CASES, Severity

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_ABSENT, EXIT_SEQUENCE = 0, 1, 2, 3, 4

DEFAULT_STATE_DIR = ".itb"
FAULTS_FILE = "faults.ini"
TRACE_FILE = "last_trace.txt"
CAMPAIGN_FILE = "campaign.txt"


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    clock: datetime | None = None
    bin_table: Path | None = None
    fraud_list: Path | None = None
    tax_rate: Decimal | None = None
    campaign: Path | None = None
    output_format: str = "text"
    jobs: int = 1
    state_dir: Path = Path(DEFAULT_STATE_DIR)
    faults: dict[str, str] = field(default_factory=dict)

    @property
    def campaign_path(self) -> Path:
        return self.campaign or self.state_dir / CAMPAIGN_FILE

    def base_env(self) -> EnvConfig:
        cfg = EnvConfig()
        if self.bin_table is not None:
            cfg.bin_table = parse_bin_table(_read(self.bin_table))
        if self.fraud_list is not None:
            cfg.fraud_rules = parse_fraud_list(_read(self.fraud_list))
        if self.tax_rate is not None:
            cfg.tax_rate = self.tax_rate
        if self.clock is not None:
            cfg.clock = self.clock
        return cfg


def _read(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _clock(value: str) -> datetime:
    try:
        return datetime.fromisoformat(value)
    except ValueError:
        raise UsageError(f"clock {value!r} is not ISO-8601") from None


def _tax(value: str) -> Decimal:
    try:
        return Decimal(value)
    except InvalidOperation:
        raise UsageError(f"tax rate {value!r} is not a number") from None


def resolve_config(args: argparse.Namespace, environ: dict[str, str] | None = None) -> CliConfig:
    """Flags beat ``ITB_CLOCK``, which beats the config file, which beats defaults."""
    environ = os.environ if environ is None else environ
    cfg = CliConfig()
    if args.config:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep service names upper-case
        try:
            with open(args.config, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
        sec = parser["itb"] if parser.has_section("itb") else {}
        if "clock" in sec:
            cfg.clock = _clock(sec["clock"])
        if "bin_table" in sec:
            cfg.bin_table = Path(sec["bin_table"])
        if "fraud_list" in sec:
            cfg.fraud_list = Path(sec["fraud_list"])
        if "tax_rate" in sec:
            cfg.tax_rate = _tax(sec["tax_rate"])
        if "campaign" in sec:
            cfg.campaign = Path(sec["campaign"])
        if "format" in sec:
            cfg.output_format = sec["format"]
        if "jobs" in sec:
            cfg.jobs = int(sec["jobs"])
        if "state_dir" in sec:
            cfg.state_dir = Path(sec["state_dir"])
        if parser.has_section("faults"):
            cfg.faults.update(parser["faults"])
    if environ.get("ITB_CLOCK"):
        cfg.clock = _clock(environ["ITB_CLOCK"])
    if args.clock:
        cfg.clock = _clock(args.clock)
    if args.bin_table:
        cfg.bin_table = Path(args.bin_table)
    if args.fraud_list:
        cfg.fraud_list = Path(args.fraud_list)
    if args.tax_rate:
        cfg.tax_rate = _tax(args.tax_rate)
    if args.campaign:
        cfg.campaign = Path(args.campaign)
    if args.format:
        cfg.output_format = args.format
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    if args.state_dir:
        cfg.state_dir = Path(args.state_dir)
    if cfg.output_format not in ("text", "structured"):
        raise UsageError(f"unknown output format {cfg.output_format!r}")
    for svc, state in cfg.faults.items():
        check_availability_pair(svc, state)
    return cfg


# --- persisted state ---------------------------------------------------------


def load_faults(cfg: CliConfig) -> dict[str, str]:
    path = cfg.state_dir / FAULTS_FILE
    if not path.exists():
        return {}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read(path, encoding="utf-8")
    return dict(parser["faults"]) if parser.has_section("faults") else {}


def save_faults(cfg: CliConfig, faults: dict[str, str]) -> None:
    cfg.state_dir.mkdir(parents=True, exist_ok=True)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["faults"] = dict(sorted(faults.items()))
    with open(cfg.state_dir / FAULTS_FILE, "w", encoding="utf-8") as fh:
        parser.write(fh)


def save_trace(cfg: CliConfig, text: str) -> None:
    cfg.state_dir.mkdir(parents=True, exist_ok=True)
    (cfg.state_dir / TRACE_FILE).write_text(text, encoding="utf-8")


def effective_faults(cfg: CliConfig, flags: Sequence[str]) -> dict[str, str]:
    faults = dict(cfg.faults)
    faults.update(load_faults(cfg))
    for item in flags or ():
        svc, sep, state = item.partition("=")
        if not sep:
            raise UsageError(f"--fault expects SVC=STATE, got {item!r}")
        svc, state = check_availability_pair(svc.strip(), state.strip())
        faults[svc.value] = state.value
    return faults


def load_campaign(cfg: CliConfig) -> Campaign:
    path = cfg.campaign_path
    return Campaign.load(path) if path.exists() else Campaign()


def save_campaign(cfg: CliConfig, campaign: Campaign) -> None:
    path = cfg.campaign_path
    path.parent.mkdir(parents=True, exist_ok=True)
    campaign.save(path)


def find_case(name: str) -> Path:
    """A path on disk, else a shipped case by file name or stem."""
    path = Path(name)
    if path.is_file():
        return path
    for candidate in sorted(SHIPPED_CASES.rglob("*.case")):
        if name in (candidate.name, candidate.stem):
            return candidate
    raise UsageError(f"case file {name!r} not found")


# --- commands ----------------------------------------------------------------


def cmd_run(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    paths = [find_case(n) for n in args.cases] if args.cases else shipped_case_paths()
    cases = [load_case(p) for p in paths]
    faults = effective_faults(cfg, args.fault)
    results = run_suite(cases, jobs=max(1, cfg.jobs), faults=faults, clock=cfg.clock, base=cfg.base_env())
    for r in results:
        out.write(render_structured(r) if cfg.output_format == "structured" else render_text(r))
    save_trace(cfg, results[-1].trace_export())
    if args.record:
        campaign = load_campaign(cfg)
        for r in results:
            campaign.record(r.case.case_id, r.verdict.value)
        save_campaign(cfg, campaign)
    verdicts = {r.verdict for r in results}
    if Verdict.BLOCKED in verdicts:
        return EXIT_ABSENT
    return EXIT_FAIL if Verdict.FAIL in verdicts else EXIT_PASS


def cmd_smoke(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    faults = effective_faults(cfg, args.fault)
    env = Environment(cfg.base_env().with_faults(faults))
    result = run_smoke(env)
    save_trace(cfg, env.bus.export())
    if cfg.output_format == "structured":
        out.write(json.dumps({"passed": result.passed, "boundary": result.boundary, "detail": result.detail}) + "\n")
    elif result.passed:
        out.write(f"smoke: PASS ({result.detail})\n")
    else:
        out.write(f"smoke: FAIL at {result.boundary}: {result.detail}\n")
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_fault(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    faults = load_faults(cfg)
    if args.clear:
        faults = {}
    elif args.service:
        if not args.state:
            raise UsageError("fault needs SERVICE STATE")
        svc, state = check_availability_pair(args.service, args.state)
        faults[svc.value] = state.value
    if args.clear or args.service:
        save_faults(cfg, faults)
    for svc, state in sorted(faults.items()):
        out.write(f"{svc}={state}\n")
    return EXIT_PASS


def cmd_trace(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    path = cfg.state_dir / TRACE_FILE
    if not path.exists():
        sys.stderr.write("no trace yet: run a case or the smoke test first\n")
        return EXIT_ABSENT
    envelopes = query(parse_trace(path.read_text(encoding="utf-8")), src=args.src, dst=args.dst, kind=args.kind)
    out.write(export_trace(envelopes))
    return EXIT_PASS


def cmd_rtm(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    campaign = load_campaign(cfg)
    rtm = campaign.rtm
    if args.rtm_cmd == "add":
        rtm.add_requirement(Requirement(args.req_id, Source(args.source), args.text, not args.out_of_scope))
        save_campaign(cfg, campaign)
    elif args.rtm_cmd == "link":
        rtm.link(args.req_id, args.scenario, args.condition, args.case_id)
        save_campaign(cfg, campaign)
    elif args.rtm_cmd == "trace":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ids = rtm.trace(Direction(args.direction.capitalize()), args.ident)
        for w in caught:
            sys.stderr.write(f"warning: {w.message}\n")
        for ident in sorted(ids):
            out.write(ident + "\n")
    else:
        cov = rtm.coverage()
        if cfg.output_format == "structured":
            out.write(json.dumps({"covered": list(cov.covered), "uncovered": list(cov.uncovered)}) + "\n")
        else:
            out.write(f"covered ({len(cov.covered)}): {' '.join(cov.covered)}\n".replace(": \n", ":\n"))
            out.write(f"uncovered ({len(cov.uncovered)}): {' '.join(cov.uncovered)}\n".replace(": \n", ":\n"))
    return EXIT_PASS


def cmd_defect(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    campaign = load_campaign(cfg)
    if args.defect_cmd == "file":
        draft = DefectDraft(
            description=args.description,
            steps_to_reproduce=args.steps,
            environment=args.env,
            application=args.app,
            test_data=args.test_data,
            expected=args.expected,
            actual=args.actual,
            blocked_case_ids=frozenset(c for c in args.blocked.split(",") if c),
            severity=Severity(args.severity) if args.severity else None,
            severity_justification=args.justification,
            trace_excerpt=_read(Path(args.trace_excerpt)) if args.trace_excerpt else "",
        )
        defect = campaign.file_defect(draft)
        save_campaign(cfg, campaign)
        out.write(f"{defect.defect_id} {defect.severity.value} (suggested {defect.suggested_severity.value}) {defect.title}\n")
    elif args.defect_cmd == "move":
        defect = campaign.move_defect(args.defect_id, args.to_state, args.role)
        save_campaign(cfg, campaign)
        out.write(f"{defect.defect_id} -> {defect.state.value}\n")
    else:
        for d in sorted(campaign.defects.values(), key=lambda d: d.defect_id):
            out.write(f"{d.defect_id} {d.state.value} {d.severity.value} {d.title}\n")
    return EXIT_PASS


def cmd_cycle(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    campaign = load_campaign(cfg)
    sub = args.cycle_cmd
    if sub == "plan":
        cycle = campaign.plan(args.cases or _default_cases(campaign))
        out.write(f"cycle {cycle.cycle_no} planned with {len(cycle.cases)} cases\n")
    elif sub == "open":
        inputs = EntryInputs.of(args.system_pass, args.smoke_passed, args.integrated)
        cycle, decision = campaign.open_next(inputs, args.cases or _default_cases(campaign))
        save_campaign(cfg, campaign)
        if not decision.opened:
            out.write(f"cycle {cycle.cycle_no} not opened\n")
            for reason in decision.unmet:
                out.write(f"  - {reason}\n")
            return EXIT_FAIL
        out.write(f"cycle {cycle.cycle_no} opened\n")
        return EXIT_PASS
    elif sub == "record":
        campaign.record(args.case_id, args.verdict.upper())
        out.write(f"{args.case_id}: {args.verdict.upper()}\n")
    elif sub == "close":
        cycle = campaign.close()
        out.write(f"cycle {cycle.cycle_no} closed: {cycle.passed}/{len(cycle.cases)} passed\n")
    else:
        if args.regression_done:
            campaign.regression_done = True
        decision = campaign.exit_check()
        save_campaign(cfg, campaign)
        if cfg.output_format == "structured":
            out.write(json.dumps({"done": decision.done, "reasons": list(decision.reasons)}) + "\n")
        else:
            out.write("done\n" if decision.done else "not done\n")
            for reason in decision.reasons:
                out.write(f"  - {reason}\n")
        return EXIT_PASS if decision.done else EXIT_FAIL
    save_campaign(cfg, campaign)
    return EXIT_PASS


def _default_cases(campaign: Campaign) -> list[str]:
    linked = sorted(campaign.rtm.cases())
    return linked or [load_case(p).case_id for p in shipped_case_paths()]


def cmd_report(args: argparse.Namespace, cfg: CliConfig, out) -> int:
    text = report(load_campaign(cfg))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_PASS


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itb", description="Integration test bench for the simulated order pipeline.")
    p.add_argument("--config", help="INI file with an [itb] section and optional [faults]")
    p.add_argument("--clock", help="simulation clock, ISO-8601 (also ITB_CLOCK)")
    p.add_argument("--bin-table", help="file of NETWORK=prefix,prefix lines")
    p.add_argument("--fraud-list", help="file of RULE_ID=ip,ip lines")
    p.add_argument("--tax-rate", help="tax rate as a decimal fraction, e.g. 0.08")
    p.add_argument("--campaign", help="campaign file (default <state-dir>/campaign.txt)")
    p.add_argument("--format", choices=("text", "structured"), help="output format")
    p.add_argument("--state-dir", help="where faults and the last trace are kept (default .itb)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run case files (all shipped cases when none given)")
    run.add_argument("cases", nargs="*")
    run.add_argument("--fault", action="append", default=[], metavar="SVC=STATE")
    run.add_argument("--jobs", type=int, help="run cases on N threads")
    run.add_argument("--record", action="store_true", help="record verdicts into the open cycle")
    run.set_defaults(func=cmd_run)

    smoke = sub.add_parser("smoke", help="end-to-end happy path")
    smoke.add_argument("--fault", action="append", default=[], metavar="SVC=STATE")
    smoke.set_defaults(func=cmd_smoke)

    fault = sub.add_parser("fault", help="persist a service state for later runs")
    fault.add_argument("service", nargs="?")
    fault.add_argument("state", nargs="?")
    fault.add_argument("--clear", action="store_true")
    fault.set_defaults(func=cmd_fault)

    trace = sub.add_parser("trace", help="dump the last run's envelopes")
    trace.add_argument("--from", dest="src")
    trace.add_argument("--to", dest="dst")
    trace.add_argument("--kind")
    trace.set_defaults(func=cmd_trace)

    rtm = sub.add_parser("rtm", help="requirement traceability")
    rsub = rtm.add_subparsers(dest="rtm_cmd", required=True)
    add = rsub.add_parser("add")
    add.add_argument("req_id")
    add.add_argument("--source", required=True, choices=[s.value for s in Source])
    add.add_argument("--text", default="")
    add.add_argument("--out-of-scope", action="store_true")
    link = rsub.add_parser("link")
    for name in ("req_id", "scenario", "condition", "case_id"):
        link.add_argument(name)
    tr = rsub.add_parser("trace")
    tr.add_argument("direction", choices=("forward", "back"))
    tr.add_argument("ident")
    rsub.add_parser("coverage")
    rtm.set_defaults(func=cmd_rtm)

    defect = sub.add_parser("defect", help="file and move defects")
    dsub = defect.add_subparsers(dest="defect_cmd", required=True)
    f = dsub.add_parser("file")
    f.add_argument("--description", required=True)
    f.add_argument("--steps", default="")
    f.add_argument("--env", default="")
    f.add_argument("--app", default="")
    f.add_argument("--test-data", default="")
    f.add_argument("--expected", default="")
    f.add_argument("--actual", default="")
    f.add_argument("--blocked", default="", help="comma-separated blocked case ids")
    f.add_argument("--severity", choices=[s.value for s in Severity])
    f.add_argument("--justification", default="")
    f.add_argument("--trace-excerpt", help="file holding the relevant trace lines")
    mv = dsub.add_parser("move")
    mv.add_argument("defect_id")
    mv.add_argument("to_state")
    mv.add_argument("--role", required=True)
    dsub.add_parser("list")
    defect.set_defaults(func=cmd_defect)

    cycle = sub.add_parser("cycle", help="plan, open, record, close, exit-check")
    csub = cycle.add_subparsers(dest="cycle_cmd", required=True)
    plan = csub.add_parser("plan")
    plan.add_argument("cases", nargs="*")
    op = csub.add_parser("open")
    op.add_argument("--system-pass", required=True, help="system-test pass rate, 0..1")
    op.add_argument("--smoke-passed", action="store_true")
    op.add_argument("--integrated", action="store_true")
    op.add_argument("--cases", nargs="*", help="cases when no cycle is planned yet")
    rec = csub.add_parser("record")
    rec.add_argument("case_id")
    rec.add_argument("verdict", choices=("PASS", "FAIL", "BLOCKED", "pass", "fail", "blocked"))
    csub.add_parser("close")
    ex = csub.add_parser("exit-check")
    ex.add_argument("--regression-done", action="store_true")
    cycle.set_defaults(func=cmd_cycle)

    rep = sub.add_parser("report", help="campaign report")
    rep.add_argument("--output")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg, out)
    except SequencingError as exc:
        sys.stderr.write(f"sequencing: {exc}\n")
        return EXIT_SEQUENCE
    except (LifecycleError, PermissionDenied) as exc:
        sys.stderr.write(f"defect: {exc}\n")
        return EXIT_SEQUENCE
    except RtmError as exc:
        sys.stderr.write(f"rtm: {exc.args[0]}\n")
        return EXIT_ABSENT
    except KeyError as exc:
        sys.stderr.write(f"not found: {exc.args[0]}\n")
        return EXIT_ABSENT
    except (UsageError, CaseSchemaError, CampaignFormatError, DefectRejected, ConfigurationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
