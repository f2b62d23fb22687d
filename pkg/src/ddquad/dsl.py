"""Text format for pulse sequences.

One statement per line, ``#`` starts a comment.  Statements:

    init S:-1/2
    pulse optical <area> <S-level> <D-level> phase <phase>
    pulse rf <area> phase <phase>
    wait <duration>
    repeat <N> { ... }
    measure

Areas accept ``pi`` literals (``pi``, ``pi/2``, ``0.5pi``, ``2pi``) or
decimal radians.  Durations take ns/us/ms/s suffixes.  Inside a repeat
block, ``alt(a,b)`` alternates a phase per iteration.  ``$name`` marks a
scan variable bound at parse time through the ``variables`` mapping.

The serializer emits a flat canonical program (repeat blocks unrolled,
floats via repr) that parses back to a structurally equal sequence.
"""

from __future__ import annotations

import math
import re
from decimal import Decimal, InvalidOperation

from .atommodel import BASIS_LABELS
from .errors import SequenceSemanticError, SequenceSyntaxError
from .sequence import Measure, OpticalPulse, PulseSequence, RFPulse, Wait

_TIME_SUFFIXES = {"ns": "1e-9", "us": "1e-6", "ms": "1e-3", "s": "1"}
_PI_RE = re.compile(r"^([+-]?)(\d+\.?\d*|\.\d+)?pi(?:/(\d+\.?\d*))?$")
_DURATION_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(ns|us|ms|s)$")


def _parse_scalar(token: str, variables: dict, line_no: int):
    """Number, pi-literal, or $variable -> float radians."""
    if token.startswith("$"):
        name = token[1:]
        if variables is None or name not in variables:
            raise SequenceSemanticError(
                f"line {line_no}: unbound scan variable ${name}")
        return float(variables[name])
    m = _PI_RE.match(token)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        coeff = float(m.group(2)) if m.group(2) else 1.0
        div = float(m.group(3)) if m.group(3) else 1.0
        return sign * coeff * math.pi / div
    try:
        return float(token)
    except ValueError:
        raise SequenceSyntaxError(f"expected a number, pi-literal or $var, got {token!r}",
                                  line=line_no, column=1) from None


def _parse_duration(token: str, line_no: int, variables: dict | None = None) -> float:
    if token.startswith("$"):
        return _parse_scalar(token, variables, line_no)
    m = _DURATION_RE.match(token)
    if not m:
        try:
            return float(token)
        except ValueError:
            raise SequenceSyntaxError(
                f"bad duration {token!r} (use e.g. 250us, 1.5ms)",
                line=line_no, column=1) from None
    # decimal arithmetic keeps e.g. "250us" bit-identical to the literal 250e-6
    try:
        return float(Decimal(m.group(1)) * Decimal(_TIME_SUFFIXES[m.group(2)]))
    except InvalidOperation:
        raise SequenceSyntaxError(f"bad duration {token!r}", line=line_no, column=1) from None


def _check_level(label: str, line_no: int, manifold: str | None = None) -> str:
    if label not in BASIS_LABELS:
        raise SequenceSemanticError(f"line {line_no}: unknown level label {label!r}")
    if manifold and not label.startswith(manifold):
        raise SequenceSemanticError(
            f"line {line_no}: expected a {manifold} level, got {label!r}")
    return label


def _level_m(label: str) -> float:
    num, den = label.split(":")[1].split("/")
    return float(num) / float(den)


class _AltPhase:
    """Deferred alt(a, b) phase, resolved per repeat iteration."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def resolve(self, iteration: int) -> float:
        return self.a if iteration % 2 == 0 else self.b


def _parse_phase(token: str, variables, line_no: int, allow_alt: bool):
    m = re.match(r"^alt\((.+),(.+)\)$", token)
    if m:
        if not allow_alt:
            raise SequenceSemanticError(
                f"line {line_no}: alt(...) is only valid inside a repeat block")
        return _AltPhase(_parse_scalar(m.group(1).strip(), variables, line_no),
                         _parse_scalar(m.group(2).strip(), variables, line_no))
    return _parse_scalar(token, variables, line_no)


def _parse_statement(parts, variables, line_no, in_repeat):
    """One statement -> element template (possibly with _AltPhase)."""
    head = parts[0]
    if head == "measure":
        if len(parts) != 1:
            raise SequenceSyntaxError("measure takes no arguments", line=line_no, column=1)
        return Measure()
    if head == "wait":
        if len(parts) != 2:
            raise SequenceSyntaxError("usage: wait <duration>", line=line_no, column=1)
        tau = _parse_duration(parts[1], line_no, variables)
        if tau < 0:
            raise SequenceSemanticError(f"line {line_no}: negative wait duration")
        return Wait(tau)
    if head == "init":
        if len(parts) != 2:
            raise SequenceSyntaxError("usage: init <level>", line=line_no, column=1)
        _check_level(parts[1], line_no)
        return None  # declaration only; initial state is supplied at run time
    if head == "pulse":
        if len(parts) < 2:
            raise SequenceSyntaxError("usage: pulse optical|rf ...", line=line_no, column=1)
        kind = parts[1]
        if kind == "rf":
            # pulse rf <area> phase <phase>
            if len(parts) != 5 or parts[3] != "phase":
                raise SequenceSyntaxError("usage: pulse rf <area> phase <phase>",
                                          line=line_no, column=1)
            area = _parse_scalar(parts[2], variables, line_no)
            phase = _parse_phase(parts[4], variables, line_no, allow_alt=in_repeat)
            if isinstance(phase, _AltPhase):
                return ("rf_alt", area, phase)
            return RFPulse(area=area, rf_phase=phase)
        if kind == "optical":
            # pulse optical <area> <S-level> <D-level> phase <phase>
            if len(parts) != 7 or parts[5] != "phase":
                raise SequenceSyntaxError(
                    "usage: pulse optical <area> <S-level> <D-level> phase <phase>",
                    line=line_no, column=1)
            area = _parse_scalar(parts[2], variables, line_no)
            _check_level(parts[3], line_no, manifold="S")
            d_level = _check_level(parts[4], line_no, manifold="D")
            if parts[3] != "S:-1/2":
                raise SequenceSemanticError(
                    f"line {line_no}: optical pulses couple S:-1/2 only")
            phase = _parse_phase(parts[6], variables, line_no, allow_alt=False)
            return OpticalPulse(target_m=_level_m(d_level), area=area, laser_phase=phase)
        raise SequenceSyntaxError(f"unknown pulse kind {kind!r}", line=line_no, column=7)
    raise SequenceSyntaxError(f"unknown statement {head!r}", line=line_no, column=1)


def parse_sequence_text(text: str, variables: dict | None = None) -> PulseSequence:
    """Parse DSL text into a PulseSequence.

    Raises SequenceSyntaxError (with line/column) on malformed input and
    SequenceSemanticError for unknown labels, odd repeat counts on
    alternating-phase echo blocks, unbound variables and negative
    durations.
    """
    lines = text.splitlines()
    elements: list = []
    i = 0
    echo_count = 0
    echo_tau = None
    while i < len(lines):
        line_no = i + 1
        raw = lines[i].split("#", 1)[0].strip()
        i += 1
        if not raw:
            continue
        parts = raw.replace("{", " { ").split()
        if parts[0] == "repeat":
            if len(parts) != 3 or parts[2] != "{":
                raise SequenceSyntaxError("usage: repeat <N> {", line=line_no, column=1)
            try:
                count = int(parts[1])
            except ValueError:
                raise SequenceSyntaxError(f"bad repeat count {parts[1]!r}",
                                          line=line_no, column=8) from None
            if count < 1:
                raise SequenceSemanticError(f"line {line_no}: repeat count must be >= 1")
            body: list = []
            closed = False
            while i < len(lines):
                body_line_no = i + 1
                braw = lines[i].split("#", 1)[0].strip()
                i += 1
                if not braw:
                    continue
                if braw == "}":
                    closed = True
                    break
                if braw.startswith("repeat"):
                    raise SequenceSyntaxError("nested repeat is not supported",
                                              line=body_line_no, column=1)
                stmt = _parse_statement(braw.split(), variables, body_line_no,
                                        in_repeat=True)
                if stmt is not None:
                    body.append(stmt)
            if not closed:
                raise SequenceSyntaxError("unterminated repeat block",
                                          line=line_no, column=1)
            has_alt = any(isinstance(s, tuple) and s[0] == "rf_alt" for s in body)
            if has_alt and count % 2 != 0:
                raise SequenceSemanticError(
                    f"line {line_no}: alternating-phase echo blocks must repeat "
                    f"an even number of times, got {count}")
            for k in range(count):
                for stmt in body:
                    if isinstance(stmt, tuple) and stmt[0] == "rf_alt":
                        elements.append(RFPulse(area=stmt[1], rf_phase=stmt[2].resolve(k)))
                    else:
                        elements.append(stmt)
            if has_alt:
                echo_count = count
                waits = [s.tau for s in body if isinstance(s, Wait)]
                echo_tau = waits[0] if waits else None
            continue
        stmt = _parse_statement(parts, variables, line_no, in_repeat=False)
        if stmt is not None:
            elements.append(stmt)
    if any(isinstance(e, Measure) for e in elements[:-1]):
        raise SequenceSemanticError("measure must be the final statement")
    n_echo = echo_count if echo_count else None
    return PulseSequence(tuple(elements), n_echo=n_echo, tau=echo_tau)


def _format_area(area: float) -> str:
    for text, value in (("pi/2", math.pi / 2), ("pi", math.pi), ("2pi", 2 * math.pi),
                        ("3pi/2", 3 * math.pi / 2)):
        if area == value:
            return text
    return repr(area)


def _format_phase(phase: float) -> str:
    return _format_area(phase) if phase != 0.0 else "0"


_D_LABELS = {-2.5: "D:-5/2", -1.5: "D:-3/2", -0.5: "D:-1/2",
             0.5: "D:+1/2", 1.5: "D:+3/2", 2.5: "D:+5/2"}


def _echo_block_span(seq: PulseSequence):
    """Locate a builder-style echo block [wait, rf-pi-alt, wait] * n_echo.

    Returns (start, end) element indices, or None when the sequence does
    not carry matching metadata.
    """
    n = seq.n_echo
    if not n or seq.tau is None:
        return None
    for start in range(len(seq.elements) - 3 * n + 1):
        ok = True
        for k in range(n):
            w1, rf, w2 = seq.elements[start + 3 * k: start + 3 * k + 3]
            if not (isinstance(w1, Wait) and w1.tau == seq.tau
                    and isinstance(w2, Wait) and w2.tau == seq.tau
                    and isinstance(rf, RFPulse) and rf.area == math.pi
                    and rf.rf_phase == (0.0 if k % 2 == 0 else math.pi)):
                ok = False
                break
        if ok:
            return start, start + 3 * n
    return None


def serialize_sequence(seq: PulseSequence) -> str:
    """Canonical DSL text; parse(serialize(seq)) == seq structurally.

    Builder-style echo blocks are emitted as a repeat/alt block so the
    n_echo/tau metadata survives the round trip; everything else is flat.
    """
    span = _echo_block_span(seq)
    out = ["init S:-1/2"]
    for idx, e in enumerate(seq.elements):
        if span and span[0] <= idx < span[1]:
            if idx == span[0]:
                out.append(f"repeat {seq.n_echo} {{")
                out.append(f"  wait {repr(seq.tau)}s")
                out.append("  pulse rf pi phase alt(0,pi)")
                out.append(f"  wait {repr(seq.tau)}s")
                out.append("}")
            continue
        if isinstance(e, OpticalPulse):
            out.append(f"pulse optical {_format_area(e.area)} S:-1/2 "
                       f"{_D_LABELS[e.target_m]} phase {_format_phase(e.laser_phase)}")
        elif isinstance(e, RFPulse):
            out.append(f"pulse rf {_format_area(e.area)} phase {_format_phase(e.rf_phase)}")
        elif isinstance(e, Wait):
            out.append(f"wait {repr(e.tau)}s")
        elif isinstance(e, Measure):
            out.append("measure")
        else:
            raise ValueError(f"cannot serialize element {e!r}")
    return "\n".join(out) + "\n"
