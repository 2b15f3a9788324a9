"""The typed register machine that evaluates one specification round.

Programs are straight-line sequences of typed instructions over registers
tagged Arith or Bool.  Arithmetic instructions (ADD, SUB, MUL, ADDC) work
on arithmetic shares, Boolean instructions (XOR, AND, NOT) on Boolean
shares, and the comparisons (LT, EQ) bridge the two: they take arithmetic
operands and produce a Boolean share, performing share conversion
internally.  B2A embeds a Boolean share back into the arithmetic domain.
REVEAL is the single instruction that opens a secret, and a well-typed
program contains exactly one, targeting the declared flag register.

Registers are single-assignment within a round; the carry map names which
written registers become next-round state.  The same Program drives three
interpreters: the secure per-party executor (`execute_round`), the
plaintext reference (`plain_execute`), and the static cost estimator
(`cost_estimate`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import engine
from .algebra import Element
from .errors import ParseError, ProtocolError, TypeCheckError
from .sharing import (SType, local_add, local_add_const, local_scale,
                      local_sub, local_xor_const, public_share)


class Opcode(enum.Enum):
    ADD = "ADD"
    SUB = "SUB"
    MUL = "MUL"
    ADDC = "ADDC"
    XOR = "XOR"
    AND = "AND"
    NOT = "NOT"
    LT = "LT"
    EQ = "EQ"
    B2A = "B2A"
    REVEAL = "REVEAL"


_A, _B = SType.ARITH, SType.BOOL

# opcode -> (dst type, src1 type, src2 type, takes const, takes width)
_SIG = {
    Opcode.ADD: (_A, _A, _A, False, False),
    Opcode.SUB: (_A, _A, _A, False, False),
    Opcode.MUL: (_A, _A, _A, False, False),
    Opcode.ADDC: (_A, _A, None, True, False),
    Opcode.XOR: (_B, _B, _B, False, False),
    Opcode.AND: (_B, _B, _B, False, False),
    Opcode.NOT: (_B, _B, None, False, False),
    Opcode.LT: (_B, _A, _A, False, True),
    Opcode.EQ: (_B, _A, _A, False, True),
    Opcode.B2A: (_A, _B, None, False, False),
    Opcode.REVEAL: (None, _B, None, False, False),
}

DEFAULT_WIDTH = 32


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    dst: int | None
    src1: int
    src2: int | None = None
    const: int | str | None = None  # int literal or $-parameter name
    width: int | None = None

    def render(self) -> str:
        parts = [self.opcode.value]
        if self.dst is not None:
            parts.append(f"R{self.dst}")
        parts.append(f"R{self.src1}")
        if self.src2 is not None:
            parts.append(f"R{self.src2}")
        if self.width is not None:
            parts.append(f"#{self.width}")
        if self.const is not None:
            parts.append(f"${self.const}" if isinstance(self.const, str) else str(self.const))
        return " ".join(parts)


@dataclass
class Program:
    """Declarations plus the instruction list for one monitoring round."""

    reg_types: dict = field(default_factory=dict)   # reg index -> SType
    instructions: list = field(default_factory=list)
    state_regs: list = field(default_factory=list)  # loaded with mu_t
    obs_regs: list = field(default_factory=list)    # loaded with sigma_t
    zero_regs: list = field(default_factory=list)   # loaded with public zero
    flag_reg: int = -1
    carry: dict = field(default_factory=dict)       # state reg -> source reg

    def param_names(self):
        return sorted({i.const for i in self.instructions if isinstance(i.const, str)})

    # -- textual format ----------------------------------------------------

    def serialize(self) -> str:
        lines = []
        for idx in sorted(self.reg_types):
            lines.append(f"reg {idx} {self.reg_types[idx].value}")
        for idx in self.zero_regs:
            lines.append(f"zero {idx}")
        if self.state_regs:
            lines.append("state " + " ".join(str(i) for i in self.state_regs))
        if self.obs_regs:
            lines.append("obs " + " ".join(str(i) for i in self.obs_regs))
        lines.append(f"flag {self.flag_reg}")
        for s in self.state_regs:
            if s in self.carry:
                lines.append(f"carry {s} {self.carry[s]}")
        lines.extend(i.render() for i in self.instructions)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Program":
        return _parse_program(text)


def _parse_reg(tok: str, line_no: int, col: int) -> int:
    if tok.startswith("R") and tok[1:].isdigit():
        return int(tok[1:])
    raise ParseError(f"expected register (R<idx>), got {tok!r}", line_no, col)


def _parse_program(text: str) -> Program:
    prog = Program()
    scratch_next = [None]

    def fresh_reg():
        idx = max(prog.reg_types, default=-1) + 1 if scratch_next[0] is None else scratch_next[0]
        scratch_next[0] = idx + 1
        return idx

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip().replace(",", " ")
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        col = raw.index(head) + 1
        if head == "reg":
            if len(toks) != 3 or not toks[1].isdigit() or toks[2] not in ("arith", "bool"):
                raise ParseError("expected: reg <idx> arith|bool", line_no, col)
            prog.reg_types[int(toks[1])] = SType(toks[2])
        elif head == "zero":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ParseError("expected: zero <idx>", line_no, col)
            idx = int(toks[1])
            prog.zero_regs.append(idx)
            prog.reg_types.setdefault(idx, SType.ARITH)
        elif head in ("state", "obs"):
            if len(toks) < 2 or not all(t.isdigit() for t in toks[1:]):
                raise ParseError(f"expected: {head} <idx...>", line_no, col)
            getattr(prog, f"{head}_regs").extend(int(t) for t in toks[1:])
        elif head == "flag":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ParseError("expected: flag <idx>", line_no, col)
            prog.flag_reg = int(toks[1])
        elif head == "carry":
            if len(toks) != 3 or not all(t.isdigit() for t in toks[1:]):
                raise ParseError("expected: carry <state idx> <src idx>", line_no, col)
            prog.carry[int(toks[1])] = int(toks[2])
        else:
            prog.instructions.extend(
                _parse_instruction(toks, line_no, col, prog, fresh_reg))
    if prog.flag_reg < 0:
        raise ParseError("missing flag declaration", 0)
    return prog


def _parse_instruction(toks, line_no, col, prog, fresh_reg):
    try:
        op = Opcode(toks[0])
    except ValueError:
        raise ParseError(f"unknown opcode {toks[0]!r}", line_no, col) from None
    _, _, src2_t, takes_const, takes_width = _SIG[op]
    width = None
    const = None
    operands = []
    for tok in toks[1:]:
        if tok.startswith("#"):
            if not takes_width or not tok[1:].isdigit():
                raise ParseError(f"unexpected width marker {tok!r}", line_no, col)
            width = int(tok[1:])
        elif tok.startswith("$"):
            const = tok[1:]
        elif tok.lstrip("-").isdigit():
            const = int(tok)
        else:
            operands.append(_parse_reg(tok, line_no, col))

    if takes_width and width is None:
        width = DEFAULT_WIDTH

    if op is Opcode.REVEAL:
        if len(operands) != 1 or const is not None:
            raise ParseError("expected: REVEAL R<idx>", line_no, col)
        return [Instruction(op, None, operands[0])]

    prelude = []
    if op in (Opcode.LT, Opcode.EQ) and const is not None:
        # assembly sugar: a public literal operand is loaded via ADDC
        # into a fresh scratch register backed by an implicit zero reg
        if len(operands) != 2:
            raise ParseError("comparison needs two operands", line_no, col)
        zero = fresh_reg()
        prog.zero_regs.append(zero)
        prog.reg_types[zero] = SType.ARITH
        scratch = fresh_reg()
        prog.reg_types[scratch] = SType.ARITH
        prelude.append(Instruction(Opcode.ADDC, scratch, zero, const=const))
        # the literal replaces whichever operand slot the source text put it in:
        # "<OP> Rd, <lit>, Rs" means src1 is the literal
        lit_first = not toks[2].startswith("R")
        dst = operands[0]
        if lit_first:
            return prelude + [Instruction(op, dst, scratch, operands[1], width=width)]
        return prelude + [Instruction(op, dst, operands[1], scratch, width=width)]

    if takes_const:
        if const is None or len(operands) != 2:
            raise ParseError(f"expected: {op.value} Rdst Rsrc <const>", line_no, col)
        return [Instruction(op, operands[0], operands[1], const=const)]
    n_ops = 3 if src2_t is not None else 2
    if len(operands) != n_ops or const is not None:
        raise ParseError(f"wrong operand count for {op.value}", line_no, col)
    if n_ops == 2:
        return [Instruction(op, operands[0], operands[1], width=width)]
    return [Instruction(op, operands[0], operands[1], operands[2], width=width)]


# ---------------------------------------------------------------------------
# Static type checking


@dataclass(frozen=True)
class TypeIssue:
    index: int | None  # instruction index, or None for a program-level issue
    message: str
    expected: str = ""
    actual: str = ""

    def __str__(self):
        where = f"instr {self.index}" if self.index is not None else "program"
        detail = f" (expected {self.expected}, got {self.actual})" if self.expected else ""
        return f"{where}: {self.message}{detail}"


def typecheck(program: Program):
    """Return the list of type issues; empty means well-typed."""
    issues = []
    types = program.reg_types

    def reg_type(idx):
        return types.get(idx)

    for r in program.zero_regs:
        if reg_type(r) is not SType.ARITH:
            issues.append(TypeIssue(None, f"zero register R{r} must be arith"))

    written = set(program.state_regs) | set(program.obs_regs) | set(program.zero_regs)
    for r in written:
        if reg_type(r) is None:
            issues.append(TypeIssue(None, f"register R{r} used but not declared"))

    reveals = []
    for idx, ins in enumerate(program.instructions):
        dst_t, s1_t, s2_t, takes_const, takes_width = _SIG[ins.opcode]
        srcs = [(ins.src1, s1_t)]
        if s2_t is not None:
            if ins.src2 is None:
                issues.append(TypeIssue(idx, f"{ins.opcode.value} needs two sources"))
                continue
            srcs.append((ins.src2, s2_t))
        for reg, want in srcs:
            have = reg_type(reg)
            if have is None:
                issues.append(TypeIssue(idx, f"register R{reg} not declared"))
            elif have is not want:
                issues.append(TypeIssue(idx, f"operand R{reg} has wrong sharing type",
                                        want.value, have.value))
            if reg not in written:
                issues.append(TypeIssue(idx, f"register R{reg} read before written"))
        if takes_const and ins.const is None:
            issues.append(TypeIssue(idx, f"{ins.opcode.value} needs a constant"))
        if takes_width and (ins.width is None or ins.width < 1):
            issues.append(TypeIssue(idx, f"{ins.opcode.value} needs a positive width"))
        if ins.opcode is Opcode.REVEAL:
            reveals.append(idx)
            if ins.src1 != program.flag_reg:
                issues.append(TypeIssue(idx, "REVEAL must target the flag register",
                                        f"R{program.flag_reg}", f"R{ins.src1}"))
        else:
            have = reg_type(ins.dst)
            if have is None:
                issues.append(TypeIssue(idx, f"register R{ins.dst} not declared"))
            elif have is not dst_t:
                issues.append(TypeIssue(idx, f"destination R{ins.dst} has wrong sharing type",
                                        dst_t.value, have.value))
            if ins.dst in written:
                issues.append(TypeIssue(idx, f"register R{ins.dst} written twice"))
            written.add(ins.dst)

    if len(reveals) != 1:
        issues.append(TypeIssue(None, f"program must contain exactly one REVEAL, found {len(reveals)}"))
    if reg_type(program.flag_reg) is not SType.BOOL:
        issues.append(TypeIssue(None, f"flag register R{program.flag_reg} must be bool"))
    for s in program.state_regs:
        src = program.carry.get(s)
        if src is None:
            issues.append(TypeIssue(None, f"state register R{s} has no carry source"))
            continue
        if src not in written:
            issues.append(TypeIssue(None, f"carry source R{src} never written"))
        if reg_type(src) is not reg_type(s):
            issues.append(TypeIssue(None, f"carry R{s} <- R{src} changes sharing type"))
    return issues


def check(program: Program) -> Program:
    issues = typecheck(program)
    if issues:
        raise TypeCheckError(issues)
    return program


# ---------------------------------------------------------------------------
# Secure execution (per party; generator driven by the transport pump)


def execute_round(program: Program, ctx, state_shares, obs_shares, params=None):
    """Run one round on this party's shares.

    ``state_shares`` and ``obs_shares`` map register index to TypedShare.
    Returns (flag bit, next-state share map).  The flag opening is the
    only unmasked reconstruction the round performs.
    """
    params = params or {}
    arith = ctx.arith
    boolean = ctx.boolean
    m = arith.modulus
    regs = {}
    regs.update(state_shares)
    regs.update(obs_shares)
    for z in program.zero_regs:
        regs[z] = public_share(arith, 0, ctx.party)

    def const_value(c):
        if isinstance(c, str):
            if c not in params:
                raise ProtocolError(f"missing public parameter ${c}")
            return params[c]
        return c

    flag = None
    for ins in program.instructions:
        op = ins.opcode
        if op is Opcode.ADD:
            regs[ins.dst] = local_add(regs[ins.src1], regs[ins.src2])
        elif op is Opcode.SUB:
            regs[ins.dst] = local_sub(regs[ins.src1], regs[ins.src2])
        elif op is Opcode.XOR:
            regs[ins.dst] = local_add(regs[ins.src1], regs[ins.src2])
        elif op is Opcode.ADDC:
            c = Element(const_value(ins.const) % m.value, m)
            regs[ins.dst] = local_add_const(regs[ins.src1], c)
        elif op is Opcode.NOT:
            regs[ins.dst] = local_xor_const(regs[ins.src1], 1)
        elif op is Opcode.MUL:
            regs[ins.dst] = yield from engine.beaver_mul(ctx, regs[ins.src1], regs[ins.src2])
        elif op is Opcode.AND:
            regs[ins.dst] = yield from engine.bool_and(ctx, regs[ins.src1], regs[ins.src2])
        elif op is Opcode.LT:
            regs[ins.dst] = yield from engine.secure_lt(ctx, regs[ins.src1], regs[ins.src2], ins.width)
        elif op is Opcode.EQ:
            regs[ins.dst] = yield from engine.secure_eq(ctx, regs[ins.src1], regs[ins.src2], ins.width)
        elif op is Opcode.B2A:
            regs[ins.dst] = yield from engine.bits_to_arith(ctx, [regs[ins.src1]])
        elif op is Opcode.REVEAL:
            opened = yield from engine.open_value(ctx, regs[ins.src1], label="flag", masked=False)
            flag = opened.value
            if ctx.record_view:
                ctx.view.flags.append((ctx.round, flag))
        else:  # pragma: no cover
            raise ProtocolError(f"unhandled opcode {op}")
    next_state = {s: regs[program.carry[s]] for s in program.state_regs}
    return flag, next_state


# ---------------------------------------------------------------------------
# Plaintext reference interpreter


def plain_execute(program: Program, modulus, state, obs, params=None):
    """Evaluate the program on plain integers; the differential oracle."""
    params = params or {}
    m = modulus.value
    regs = {}
    regs.update(state)
    regs.update(obs)
    for z in program.zero_regs:
        regs[z] = 0

    def const_value(c):
        return params[c] if isinstance(c, str) else c

    flag = None
    for ins in program.instructions:
        op = ins.opcode
        if op is Opcode.ADD:
            regs[ins.dst] = (regs[ins.src1] + regs[ins.src2]) % m
        elif op is Opcode.SUB:
            regs[ins.dst] = (regs[ins.src1] - regs[ins.src2]) % m
        elif op is Opcode.MUL:
            regs[ins.dst] = (regs[ins.src1] * regs[ins.src2]) % m
        elif op is Opcode.ADDC:
            regs[ins.dst] = (regs[ins.src1] + const_value(ins.const)) % m
        elif op is Opcode.XOR:
            regs[ins.dst] = regs[ins.src1] ^ regs[ins.src2]
        elif op is Opcode.AND:
            regs[ins.dst] = regs[ins.src1] & regs[ins.src2]
        elif op is Opcode.NOT:
            regs[ins.dst] = regs[ins.src1] ^ 1
        elif op is Opcode.LT:
            regs[ins.dst] = 1 if regs[ins.src1] < regs[ins.src2] else 0
        elif op is Opcode.EQ:
            regs[ins.dst] = 1 if regs[ins.src1] == regs[ins.src2] else 0
        elif op is Opcode.B2A:
            regs[ins.dst] = regs[ins.src1]
        elif op is Opcode.REVEAL:
            flag = regs[ins.src1]
    next_state = {s: regs[program.carry[s]] for s in program.state_regs}
    return flag, next_state


class PlainMonitor:
    """Round-by-round plaintext execution of a Program; keeps state."""

    def __init__(self, program: Program, modulus, initial_state, params_fn=None):
        self.program = program
        self.modulus = modulus
        self.state = dict(initial_state)
        self.params_fn = params_fn
        self.t = 0

    def step(self, obs):
        self.t += 1
        params = self.params_fn(self.t) if self.params_fn else {}
        flag, self.state = plain_execute(self.program, self.modulus, self.state, obs, params)
        return flag


# ---------------------------------------------------------------------------
# Static resource estimate


@dataclass
class CostEstimate:
    """Per-round material and communication counts; must match the ledger."""

    triples: int = 0
    bit_triples: int = 0
    dabits: int = 0
    edabits: dict = field(default_factory=dict)  # width -> count
    rounds: int = 0

    @property
    def edabits_total(self):
        return sum(self.edabits.values())

    def as_counts(self):
        return {"triples": self.triples, "bit_triples": self.bit_triples,
                "dabits": self.dabits, "edabits": dict(self.edabits)}

    def scaled(self, factor: int) -> dict:
        c = self.as_counts()
        c["triples"] *= factor
        c["bit_triples"] *= factor
        c["dabits"] *= factor
        c["edabits"] = {w: n * factor for w, n in c["edabits"].items()}
        return c


def cost_estimate(program: Program, modulus) -> CostEstimate:
    """Static per-round counts of consumed material and exchange rounds."""
    est = CostEstimate()
    for ins in program.instructions:
        op = ins.opcode
        if op is Opcode.MUL:
            est.triples += 1
            est.rounds += 1
        elif op is Opcode.AND:
            est.bit_triples += 1
            est.rounds += 1
        elif op is Opcode.LT:
            ands, widths, rounds = engine.lt_cost(modulus, ins.width)
            est.bit_triples += ands
            for w in widths:
                est.edabits[w] = est.edabits.get(w, 0) + 1
            est.rounds += rounds
        elif op is Opcode.EQ:
            ands, widths, rounds = engine.eq_cost(modulus, ins.width)
            est.bit_triples += ands
            for w in widths:
                est.edabits[w] = est.edabits.get(w, 0) + 1
            est.rounds += rounds
        elif op is Opcode.B2A:
            est.dabits += 1
            est.rounds += 1
        elif op is Opcode.REVEAL:
            est.rounds += 1
    return est
