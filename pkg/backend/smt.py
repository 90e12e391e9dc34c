# =======================================================================
# Project:      SeqPack Solver
# File:         SMT-LIB solver process client
# =======================================================================

"""
SMT solver session over a child process speaking SMT-LIB v2.6.

The solver runs with :print-success so every command has exactly one
answer. A reader thread moves stdout lines into a queue; reads wait on the
queue with a deadline, and a check that overruns its deadline kills the
process and reports TIMEOUT.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union
import logging
import queue
import re
import subprocess
import threading
import time

from config import settings
from constants import SMT_LOGIC
from encoder import (
    Formula,
    TaggedFormula,
    VarKind,
    VarRef,
    emit_assert,
    emit_declaration,
)
from exceptions import (
    HandshakeError,
    MalformedModelValue,
    SolverCrashed,
    SolverProtocolError,
    SolverSpawnError,
    StackUnderflow,
)

logger = logging.getLogger(__name__)

SExpr = Union[str, List["SExpr"]]

_EOF = object()
_NUMERAL = re.compile(r"^\d+(\.\d+)?$")
_TOKEN = re.compile(r'\(|\)|"(?:[^"]|"")*"|\|[^|]*\||[^\s()"|]+')


class SmtStatus(str, Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass
class SmtResult:
    status: SmtStatus
    model: Optional[Dict[VarRef, Fraction]] = None
    reason: str = ""

    def __post_init__(self):
        if (self.model is not None) != (self.status == SmtStatus.SAT):
            raise ValueError("A model is present exactly when the status is SAT")


# -----------------------------------------------------------------------
# S-expressions and values
# -----------------------------------------------------------------------

def _balance(text: str) -> int:
    depth = 0
    for token in _TOKEN.findall(text):
        if token == "(":
            depth += 1
        elif token == ")":
            depth -= 1
    return depth


def parse_sexpr(text: str) -> SExpr:
    """Parse the first s-expression in text into nested lists of atoms"""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise SolverProtocolError("Empty solver response")
    stack: List[List[SExpr]] = [[]]
    for token in tokens:
        if token == "(":
            stack.append([])
        elif token == ")":
            if len(stack) == 1:
                raise SolverProtocolError(f"Unbalanced solver response: {text!r}")
            done = stack.pop()
            stack[-1].append(done)
            if len(stack) == 1:
                break
        else:
            stack[-1].append(token)
            if len(stack) == 1:
                break
    if len(stack) != 1 or not stack[0]:
        raise SolverProtocolError(f"Unbalanced solver response: {text!r}")
    return stack[0][0]


def parse_rational(tree: SExpr) -> Fraction:
    """
    Exact value of a model literal.

    Accepts numerals, decimals, (/ a b) and (- x), nested, either as
    parsed trees or as raw text.

    Raises:
        MalformedModelValue: For anything else
    """
    if isinstance(tree, str) and tree.lstrip().startswith("("):
        try:
            tree = parse_sexpr(tree)
        except SolverProtocolError as e:
            raise MalformedModelValue(f"Cannot parse model value {tree!r}", details=e.message)

    if isinstance(tree, str):
        token = tree.strip()
        if not _NUMERAL.match(token):
            raise MalformedModelValue(f"Not a rational literal: {token!r}")
        return Fraction(token)

    if len(tree) == 2 and tree[0] == "-":
        return -parse_rational(tree[1])
    if len(tree) == 3 and tree[0] == "/":
        numerator = parse_rational(tree[1])
        denominator = parse_rational(tree[2])
        if denominator == 0:
            raise MalformedModelValue("Division by zero in model value")
        return numerator / denominator
    raise MalformedModelValue(f"Unsupported model value form: {tree!r}")


def _atom_text(tree: SExpr) -> str:
    if isinstance(tree, list):
        return " ".join(_atom_text(t) for t in tree)
    return tree.strip('"|')


# -----------------------------------------------------------------------
# Session
# -----------------------------------------------------------------------

class SolverSession:
    """
    One solver process for one solve.

    Tracks declared variables, the push depth and a replayable log of
    everything asserted at depth 0. Declarations are global, so they
    survive pops and always go into the log.
    """

    def __init__(
        self,
        command: List[str],
        timeout_ms: Optional[int] = None,
        handshake_ms: Optional[int] = None,
        grace_ms: Optional[int] = None,
        timeout_option: Optional[str] = None,
    ):
        if not command:
            raise SolverSpawnError(
                "No SMT solver configured",
                details="Install z3 or cvc5, or set SOLVER_CMD / --solver-cmd"
            )
        self.command = list(command)
        self.timeout_ms = timeout_ms
        self.handshake_ms = handshake_ms if handshake_ms is not None else settings.SOLVER_HANDSHAKE_MS
        self.grace_ms = grace_ms if grace_ms is not None else settings.SOLVER_GRACE_MS
        self._timeout_option = timeout_option if timeout_option is not None else settings.SOLVER_TIMEOUT_OPTION

        self.depth = 0
        self.base_log: List[str] = []
        self.declared: Set[VarRef] = set()
        self.name = ""
        self.version = ""
        self.commands_sent = 0
        self.checks = 0

        self._process: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue" = queue.Queue()
        self._start()

    # --- process lifecycle ---

    def _start(self) -> None:
        try:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                text=True,
                bufsize=1,
            )
        except (OSError, ValueError) as e:
            raise SolverSpawnError(f"Cannot start solver {self.command[0]!r}", details=str(e))

        self._lines = queue.Queue()
        reader = threading.Thread(target=self._pump, args=(self._process, self._lines), daemon=True)
        reader.start()

        try:
            self._command("(set-option :print-success true)", self.handshake_ms)
        except (SolverCrashed, SolverProtocolError, TimeoutError) as e:
            self._kill()
            raise HandshakeError(
                f"Solver {self.command[0]!r} did not answer the SMT-LIB handshake",
                details=str(e)
            )

        self._command("(set-option :produce-models true)")
        self._command("(set-option :global-declarations true)", allow_unsupported=True)
        self._command(f"(set-logic {SMT_LOGIC})")
        self.name = self._info(":name")
        self.version = self._info(":version")
        logger.info(f"Solver session started: {self.name} {self.version} (pid {self._process.pid})")

    @staticmethod
    def _pump(process: subprocess.Popen, lines: "queue.Queue") -> None:
        try:
            for line in process.stdout:
                lines.put(line)
        except (OSError, ValueError):
            pass
        lines.put(_EOF)

    @property
    def alive(self) -> bool:
        return self._process is not None and self._process.poll() is None

    def _kill(self) -> None:
        if self._process is None:
            return
        try:
            self._process.kill()
            self._process.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired) as e:
            logger.warning(f"Could not reap solver process: {e}")

    def close(self) -> None:
        if self.alive:
            try:
                self._send("(exit)")
                self._process.wait(timeout=1)
            except (SolverCrashed, subprocess.TimeoutExpired):
                pass
        self._kill()
        logger.debug(f"Solver session closed after {self.commands_sent} commands, {self.checks} checks")

    def restart(self) -> None:
        """Kill the process and rebuild the base state from the replay log"""
        self._kill()
        log = list(self.base_log)
        self.depth = 0
        self._start()
        for line in log:
            self._command(line)
        logger.info(f"Solver session restarted, replayed {len(log)} base commands")

    def replay_script(self) -> str:
        """SMT-LIB text reproducing the base state in a fresh solver"""
        preamble = ["(set-option :produce-models true)", f"(set-logic {SMT_LOGIC})"]
        return "\n".join(preamble + self.base_log) + "\n"

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    # --- wire ---

    def _send(self, line: str) -> None:
        if not self.alive:
            raise SolverCrashed(f"Solver process is not running (exit code {self._exit_code()})")
        try:
            self._process.stdin.write(line + "\n")
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverCrashed("Solver process closed its input", details=str(e))
        self.commands_sent += 1

    def _exit_code(self) -> Optional[int]:
        return self._process.poll() if self._process is not None else None

    def _read(self, timeout_ms: float) -> str:
        """
        Read one complete response.

        Raises:
            TimeoutError: Nothing complete arrived in time
            SolverCrashed: The process closed its output
        """
        deadline = time.monotonic() + timeout_ms / 1000
        text = ""
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"No solver response within {timeout_ms} ms")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise TimeoutError(f"No solver response within {timeout_ms} ms")
            if line is _EOF:
                raise SolverCrashed(
                    f"Solver process exited (exit code {self._exit_code()})",
                    details=text.strip() or None
                )
            text += line
            stripped = text.strip()
            if stripped and _balance(stripped) == 0:
                return stripped

    def _command(self, line: str, timeout_ms: Optional[float] = None, allow_unsupported: bool = False) -> bool:
        self._send(line)
        try:
            response = self._read(timeout_ms or self.handshake_ms)
        except TimeoutError:
            raise SolverProtocolError(f"Solver did not acknowledge {line[:80]!r}")
        if response == "success":
            return True
        if response == "unsupported" and allow_unsupported:
            logger.debug(f"Solver does not support {line!r}")
            return False
        raise SolverProtocolError(f"Unexpected answer to {line[:80]!r}", details=response)

    def _info(self, key: str) -> str:
        self._send(f"(get-info {key})")
        try:
            tree = parse_sexpr(self._read(self.handshake_ms))
        except TimeoutError:
            logger.warning(f"Solver did not answer get-info {key} within {self.handshake_ms} ms")
            self._resync()
            return ""
        if isinstance(tree, list) and len(tree) >= 2 and tree[0] == key:
            return _atom_text(tree[1])
        return ""

    def _resync(self) -> None:
        """
        Drop late answers up to an echoed marker so the next command reads
        its own response. A solver that does not echo the marker in time is
        killed.
        """
        marker = f"seqpack-sync-{self.commands_sent}"
        self._send(f'(echo "{marker}")')
        deadline = time.monotonic() + (self.handshake_ms + self.grace_ms) / 1000
        while True:
            try:
                response = self._read(max(0.0, deadline - time.monotonic()) * 1000)
            except TimeoutError:
                self._kill()
                raise SolverProtocolError("Solver stopped responding; session closed",
                                          details=f"no echo of {marker}")
            if response.strip('"') == marker:
                return
            logger.debug(f"Discarding late solver answer {response[:80]!r}")

    # --- declarations and assertions ---

    def _declare(self, variables: Iterable[VarRef]) -> None:
        for var in sorted(set(variables) - self.declared):
            line = emit_declaration(var)
            self._command(line)
            self.base_log.append(line)
            self.declared.add(var)

    def _assert(self, item: Union[Formula, TaggedFormula]) -> str:
        formula = item.formula if isinstance(item, TaggedFormula) else item
        self._declare(formula.variables())
        line = emit_assert(formula)
        self._command(line)
        return line

    def declare(self, variables: Iterable[VarRef]) -> None:
        self._declare(variables)

    def assert_base(self, item: Union[Formula, TaggedFormula]) -> None:
        """Assert at depth 0; the assertion joins the replay log"""
        if self.depth != 0:
            raise SolverProtocolError(f"Base assertions need depth 0, session is at depth {self.depth}")
        self.base_log.append(self._assert(item))

    def push(self) -> None:
        self._command("(push 1)")
        self.depth += 1

    def assert_scoped(self, item: Union[Formula, TaggedFormula]) -> None:
        """Assert inside the innermost open scope; gone after the matching pop"""
        if self.depth == 0:
            raise SolverProtocolError("Scoped assertion without an open scope")
        self._assert(item)

    def pop(self) -> None:
        if self.depth == 0:
            raise StackUnderflow("pop at depth 0")
        self._command("(pop 1)")
        self.depth -= 1

    # --- checking ---

    def model_variables(self) -> List[VarRef]:
        return sorted(v for v in self.declared if v.kind in (VarKind.X, VarKind.Y, VarKind.T))

    def check(self, timeout_ms: Optional[int] = None) -> SmtResult:
        """
        check-sat bounded by timeout_ms (or the session default); on SAT the
        model holds every declared X/Y/T variable.
        """
        budget = timeout_ms if timeout_ms is not None else self.timeout_ms
        if budget is not None and budget <= 0:
            return SmtResult(SmtStatus.TIMEOUT, reason="budget exhausted")

        if budget is not None and self._timeout_option:
            try:
                supported = self._command(f"(set-option {self._timeout_option} {int(budget)})",
                                          allow_unsupported=True)
            except SolverProtocolError as e:
                supported = False
                logger.debug(f"Per-check timeout option rejected: {e.details}")
            if not supported:
                logger.warning(f"Solver ignores {self._timeout_option}; relying on the watchdog")
                self._timeout_option = ""

        self.checks += 1
        self._send("(check-sat)")
        wait_ms = (budget + self.grace_ms) if budget is not None else 24 * 3600 * 1000
        try:
            answer = self._read(wait_ms)
        except TimeoutError:
            logger.warning(f"Solver overran its {budget} ms budget; killing process")
            self._kill()
            return SmtResult(SmtStatus.TIMEOUT, reason="watchdog")

        if answer == "unsat":
            return SmtResult(SmtStatus.UNSAT)
        if answer == "sat":
            return SmtResult(SmtStatus.SAT, model=self._get_values(self.model_variables()))
        if answer == "unknown":
            reason = self._info(":reason-unknown")
            if any(word in reason for word in ("timeout", "canceled", "resource")):
                return SmtResult(SmtStatus.TIMEOUT, reason=reason)
            logger.warning(f"Solver answered unknown: {reason or 'no reason given'}")
            return SmtResult(SmtStatus.UNKNOWN, reason=reason)
        if answer.startswith("(error"):
            raise SolverProtocolError("Solver rejected check-sat", details=answer)
        raise SolverProtocolError(f"Unexpected check-sat answer: {answer[:80]!r}")

    def _get_values(self, variables: List[VarRef]) -> Dict[VarRef, Fraction]:
        if not variables:
            return {}
        by_name = {v.name: v for v in variables}
        self._send(f"(get-value ({' '.join(by_name)}))")
        try:
            response = self._read(self.handshake_ms)
        except TimeoutError:
            raise SolverProtocolError("Solver did not answer get-value")
        tree = parse_sexpr(response)
        if not isinstance(tree, list) or (tree and tree[0] == "error"):
            raise SolverProtocolError("Malformed get-value answer", details=response)

        model: Dict[VarRef, Fraction] = {}
        for entry in tree:
            if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[0], str):
                raise SolverProtocolError("Malformed get-value entry", details=str(entry))
            var = by_name.get(entry[0].strip("|"))
            if var is None:
                raise SolverProtocolError(f"get-value returned unknown symbol {entry[0]}")
            model[var] = parse_rational(entry[1])
        missing = set(variables) - set(model)
        if missing:
            raise SolverProtocolError(f"get-value omitted {len(missing)} variables")
        return model

    @property
    def solver_info(self) -> Tuple[str, str]:
        return self.name, self.version


def open_session(command: List[str], timeout_ms: Optional[int] = None) -> SolverSession:
    """
    Start a solver process ready for incremental QF_LRA solving.

    Raises:
        SolverSpawnError: Command missing or not executable
        HandshakeError: Process started but does not speak SMT-LIB
    """
    return SolverSession(command, timeout_ms=timeout_ms)
