"""Compile high-level specifications into well-typed VM programs.

A specification is a pair: one next-state expression per state variable
(delta) and one Boolean flag expression (phi), both over state/observation
variables.  Lowering performs interval analysis on nonnegative ranges to
pick comparison widths, guard subtractions, and reject modular overflow,
and shares subexpressions structurally, so compilation is deterministic:
the same spec always yields byte-identical program text.

The four benchmark scenarios are built here as ordinary specifications
plus a :class:`ScenarioConfig` describing bounds, trace generation and
per-round public parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import engine
from .algebra import DEFAULT_PRIME, Modulus
from .errors import CompileError, MonitorError, ParseError, SchemeError
from .sharing import SType
from .vm import Instruction, Opcode, Program, check


# ---------------------------------------------------------------------------
# Expression language

@dataclass(frozen=True)
class Var:
    kind: str  # "state" | "obs"
    index: int


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Param:
    """A public per-round parameter, resolved by the runtime."""

    name: str
    bound: int


@dataclass(frozen=True)
class Bin:
    op: str  # add sub mul and or lt le eq
    a: object
    b: object
    width: int | None = None  # comparisons only; override the inferred width


@dataclass(frozen=True)
class Not:
    a: object


@dataclass(frozen=True)
class Mux:
    cond: object
    if_true: object
    if_false: object


@dataclass(frozen=True)
class SqDiff:
    """(a - b)^2; exact under modular arithmetic regardless of sign."""

    a: object
    b: object


def state(i):       return Var("state", i)
def obs(i):         return Var("obs", i)
def const(v):       return Const(v)
def add(a, b):      return Bin("add", a, b)
def sub(a, b):      return Bin("sub", a, b)
def mul(a, b):      return Bin("mul", a, b)
def lt(a, b, width=None):  return Bin("lt", a, b, width)
def le(a, b, width=None):  return Bin("le", a, b, width)
def eq(a, b, width=None):  return Bin("eq", a, b, width)
def and_(a, b):     return Bin("and", a, b)
def or_(a, b):      return Bin("or", a, b)
def not_(a):        return Not(a)
def mux(c, t, f):   return Mux(c, t, f)
def sq_diff(a, b):  return SqDiff(a, b)


def or_tree(exprs):
    """Balanced OR of a list of Boolean expressions."""
    items = list(exprs)
    if not items:
        raise CompileError("empty OR")
    while len(items) > 1:
        nxt = [or_(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def add_chain(exprs):
    items = list(exprs)
    if not items:
        raise CompileError("empty sum")
    acc = items[0]
    for e in items[1:]:
        acc = add(acc, e)
    return acc


@dataclass(frozen=True)
class VarDecl:
    """Type and inclusive upper bound of one state/observation variable."""

    stype: SType
    bound: int = 1
    init: int = 0


# ---------------------------------------------------------------------------
# Lowering

class _Lowering:
    def __init__(self, state_decls, obs_decls, modulus):
        self.modulus = modulus
        self.prog = Program()
        self.memo = {}
        self.next_reg = 0
        self._zero = None
        self._consts = {}
        for i, d in enumerate(state_decls):
            r = self._alloc(d.stype)
            self.prog.state_regs.append(r)
            self.memo[Var("state", i)] = (r, d.stype, 0, d.bound)
        for i, d in enumerate(obs_decls):
            r = self._alloc(d.stype)
            self.prog.obs_regs.append(r)
            self.memo[Var("obs", i)] = (r, d.stype, 0, d.bound)

    def _alloc(self, stype):
        r = self.next_reg
        self.next_reg += 1
        self.prog.reg_types[r] = stype
        return r

    def _emit(self, *args, **kw):
        self.prog.instructions.append(Instruction(*args, **kw))

    def _zero_reg(self):
        if self._zero is None:
            self._zero = self._alloc(SType.ARITH)
            self.prog.zero_regs.append(self._zero)
        return self._zero

    def _check_range(self, hi, what):
        if hi >= self.modulus.value:
            raise CompileError(f"{what} can reach {hi}, overflowing {self.modulus}")

    def _load_const(self, value):
        key = ("const", value)
        if key not in self._consts:
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.ADDC, r, self._zero_reg(), const=value)
            self._consts[key] = r
        return self._consts[key]

    def _cmp_width(self, node, lo_a, hi_a, lo_b, hi_b):
        needed = max(1, max(hi_a, hi_b).bit_length())
        width = node.width or needed
        if width < needed:
            raise CompileError(
                f"declared width {width} too small for operand range up to {max(hi_a, hi_b)}")
        try:
            engine.mask_width(self.modulus, width + 1)
        except SchemeError as exc:
            raise CompileError(str(exc)) from exc
        return width

    def lower(self, node):
        got = self.memo.get(node)
        if got is not None:
            return got
        res = self._lower(node)
        self.memo[node] = res
        return res

    def _lower(self, node):
        if isinstance(node, Const):
            if node.value < 0:
                raise CompileError("negative constants are not representable")
            self._check_range(node.value, "constant")
            return self._load_const(node.value), SType.ARITH, node.value, node.value
        if isinstance(node, Param):
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.ADDC, r, self._zero_reg(), const=node.name)
            return r, SType.ARITH, 0, node.bound
        if isinstance(node, Var):
            raise CompileError(f"undeclared variable {node}")
        if isinstance(node, Not):
            r_a, t_a, _, _ = self.lower(node.a)
            if t_a is not SType.BOOL:
                raise CompileError("NOT needs a Boolean operand")
            r = self._alloc(SType.BOOL)
            self._emit(Opcode.NOT, r, r_a)
            return r, SType.BOOL, 0, 1
        if isinstance(node, Mux):
            return self._lower_mux(node)
        if isinstance(node, SqDiff):
            r_a, t_a, lo_a, hi_a = self.lower(node.a)
            r_b, t_b, lo_b, hi_b = self.lower(node.b)
            if t_a is not SType.ARITH or t_b is not SType.ARITH:
                raise CompileError("sq_diff needs arithmetic operands")
            hi = max(hi_a, hi_b) ** 2
            self._check_range(hi, "squared difference")
            d = self._alloc(SType.ARITH)
            self._emit(Opcode.SUB, d, r_a, r_b)
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.MUL, r, d, d)
            return r, SType.ARITH, 0, hi
        if isinstance(node, Bin):
            return self._lower_bin(node)
        raise CompileError(f"unsupported expression node {node!r}")

    def _lower_bin(self, node):
        op = node.op
        if op in ("and", "or"):
            r_a, t_a, _, _ = self.lower(node.a)
            r_b, t_b, _, _ = self.lower(node.b)
            if t_a is not SType.BOOL or t_b is not SType.BOOL:
                raise CompileError(f"{op} needs Boolean operands")
            if op == "and":
                r = self._alloc(SType.BOOL)
                self._emit(Opcode.AND, r, r_a, r_b)
                return r, SType.BOOL, 0, 1
            # a or b = not(not a and not b)
            na = self._alloc(SType.BOOL)
            self._emit(Opcode.NOT, na, r_a)
            nb = self._alloc(SType.BOOL)
            self._emit(Opcode.NOT, nb, r_b)
            ab = self._alloc(SType.BOOL)
            self._emit(Opcode.AND, ab, na, nb)
            r = self._alloc(SType.BOOL)
            self._emit(Opcode.NOT, r, ab)
            return r, SType.BOOL, 0, 1

        if op == "le":
            # a <= b  ==  not (b < a)
            inner = self.lower(Bin("lt", node.b, node.a, node.width))
            r = self._alloc(SType.BOOL)
            self._emit(Opcode.NOT, r, inner[0])
            return r, SType.BOOL, 0, 1

        r_a, t_a, lo_a, hi_a = self.lower(node.a)
        r_b, t_b, lo_b, hi_b = self.lower(node.b)
        if t_a is not SType.ARITH or t_b is not SType.ARITH:
            raise CompileError(f"{op} needs arithmetic operands")

        if op in ("lt", "eq"):
            width = self._cmp_width(node, lo_a, hi_a, lo_b, hi_b)
            r = self._alloc(SType.BOOL)
            self._emit(Opcode.LT if op == "lt" else Opcode.EQ, r, r_a, r_b, width=width)
            return r, SType.BOOL, 0, 1

        if op == "add":
            hi = hi_a + hi_b
            self._check_range(hi, "sum")
            if isinstance(node.b, Const):
                r = self._alloc(SType.ARITH)
                self._emit(Opcode.ADDC, r, r_a, const=node.b.value)
            elif isinstance(node.a, Const):
                r = self._alloc(SType.ARITH)
                self._emit(Opcode.ADDC, r, r_b, const=node.a.value)
            else:
                r = self._alloc(SType.ARITH)
                self._emit(Opcode.ADD, r, r_a, r_b)
            return r, SType.ARITH, lo_a + lo_b, hi
        if op == "sub":
            if lo_a - hi_b < 0:
                raise CompileError(
                    f"subtraction can go negative ({lo_a} - {hi_b}); restructure the spec")
            r = self._alloc(SType.ARITH)
            if isinstance(node.b, Const):
                self._emit(Opcode.ADDC, r, r_a,
                           const=(self.modulus.value - node.b.value) % self.modulus.value)
            else:
                self._emit(Opcode.SUB, r, r_a, r_b)
            return r, SType.ARITH, lo_a - hi_b, hi_a - lo_b
        if op == "mul":
            hi = hi_a * hi_b
            self._check_range(hi, "product")
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.MUL, r, r_a, r_b)
            return r, SType.ARITH, lo_a * lo_b, hi
        raise CompileError(f"unknown operator {op!r}")

    def _lower_mux(self, node):
        r_c, t_c, _, _ = self.lower(node.cond)
        if t_c is not SType.BOOL:
            raise CompileError("mux condition must be Boolean")
        # reuse one B2A per condition across every mux that branches on it
        key = ("b2a", node.cond)
        if key in self.memo:
            c_arith = self.memo[key][0]
        else:
            c_arith = self._alloc(SType.ARITH)
            self._emit(Opcode.B2A, c_arith, r_c)
            self.memo[key] = (c_arith, SType.ARITH, 0, 1)
        r_t, tt, lo_t, hi_t = self.lower(node.if_true)
        r_f, tf, lo_f, hi_f = self.lower(node.if_false)
        if tt is not SType.ARITH or tf is not SType.ARITH:
            raise CompileError("mux branches must be arithmetic")
        # c*t + (1-c)*f, computed as f + c*t - c*f to stay nonnegative
        if isinstance(node.if_true, Const) and node.if_true.value == 0:
            ct = self._alloc(SType.ARITH)
            self._emit(Opcode.MUL, ct, c_arith, r_f)
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.SUB, r, r_f, ct)
        else:
            ct = self._alloc(SType.ARITH)
            self._emit(Opcode.MUL, ct, c_arith, r_t)
            acc = self._alloc(SType.ARITH)
            self._check_range(hi_f + hi_t, "mux intermediate")
            self._emit(Opcode.ADD, acc, r_f, ct)
            cf = self._alloc(SType.ARITH)
            self._emit(Opcode.MUL, cf, c_arith, r_f)
            r = self._alloc(SType.ARITH)
            self._emit(Opcode.SUB, r, acc, cf)
        return r, SType.ARITH, min(lo_t, lo_f), max(hi_t, hi_f)


def compile_spec(state_decls, obs_decls, delta, phi, modulus) -> Program:
    """Lower (delta, phi) to a typechecked Program.

    ``delta`` lists one expression per state variable; ``phi`` is the
    Boolean flag expression.  Raises CompileError on type errors or when
    a range can overflow the modulus or go negative.
    """
    if len(delta) != len(state_decls):
        raise CompileError("delta must have one expression per state variable")
    low = _Lowering(state_decls, obs_decls, modulus)
    flag_reg, flag_t, _, _ = low.lower(phi)
    if flag_t is not SType.BOOL:
        raise CompileError("phi must be Boolean")
    for i, expr in enumerate(delta):
        r, t, lo, hi = low.lower(expr)
        want = state_decls[i].stype
        if t is not want:
            raise CompileError(f"delta[{i}] has type {t}, state var declared {want}")
        low.prog.carry[low.prog.state_regs[i]] = r
    low.prog.flag_reg = flag_reg
    low._emit(Opcode.REVEAL, None, flag_reg)
    return check(low.prog)


# ---------------------------------------------------------------------------
# Scenario configurations

@dataclass
class ScenarioConfig:
    """Everything the runtime and the System need to drive one scenario."""

    name: str
    size: int
    modulus: Modulus
    rounds: int
    bounds: dict = field(default_factory=dict)
    initial_state: list = field(default_factory=list)
    obs_bounds: list = field(default_factory=list)  # inclusive max per obs slot

    def params(self, t: int) -> dict:
        if self.name == "car":
            r = min(self.bounds["r_base"] + self.bounds["growth"] * t, self.bounds["r_max"])
            return {"rsq": r * r}
        if self.name == "bloodsugar":
            a, b = self.bounds["window"]
            return {"phi_thr": (b - a + 1) if t >= b else 0}
        return {}

    def validate_obs(self, obs) -> None:
        if len(obs) != len(self.obs_bounds):
            raise MonitorError(f"expected {len(self.obs_bounds)} observation values, got {len(obs)}")
        for i, (v, hi) in enumerate(zip(obs, self.obs_bounds)):
            if not 0 <= v <= hi:
                raise MonitorError(f"observation {i} = {v} outside [0, {hi}]")
        if self.name == "locks":
            for j in range(self.size):
                if obs[2 * j] and obs[2 * j + 1]:
                    raise MonitorError(f"lock {j}: lock and unlock flags both set")

    def random_obs(self, rng):
        """One plausible observation vector; violations occur with fair odds."""
        if self.name == "acs":
            hi = self.bounds["door_max"]
            return [rng.randint(0, min(3, hi)) for _ in range(4 * self.size)]
        if self.name == "locks":
            out = []
            for _ in range(self.size):
                ev = rng.randrange(4)  # 0,1 skip-leaning; 2 lock; 3 unlock
                out += [1, 0] if ev == 2 else ([0, 1] if ev == 3 else [0, 0])
            return out
        if self.name == "car":
            hi = self.bounds["disp_max"]
            return [rng.randint(0, hi) for _ in range(2 * self.size)]
        if self.name == "bloodsugar":
            theta = self.bounds["threshold"]
            hi = self.bounds["reading_max"]
            if rng.random() < 0.05:
                return [rng.randint(theta + 1, hi)]
            return [rng.randint(0, theta)]
        raise MonitorError(f"no trace generator for scenario {self.name!r}")

    def random_trace(self, rng, rounds=None):
        return [self.random_obs(rng) for _ in range(rounds or self.rounds)]

    # -- key-value config text ---------------------------------------------

    def serialize(self) -> str:
        lines = [f"name = {self.name}", f"size = {self.size}",
                 f"modulus = {_modulus_str(self.modulus)}", f"rounds = {self.rounds}"]
        for k in sorted(self.bounds):
            v = self.bounds[k]
            if isinstance(v, tuple):
                v = ":".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def _modulus_str(m: Modulus) -> str:
    return f"prime:{m.value}" if m.is_prime_field else f"pow2:{m.width}"


def parse_modulus(text: str) -> Modulus:
    kind, _, val = text.partition(":")
    if kind == "prime" and val.isdigit():
        return Modulus.prime(int(val))
    if kind == "pow2" and val.isdigit():
        return Modulus.power_of_two(int(val))
    raise ParseError(f"bad modulus spec {text!r} (want prime:<p> or pow2:<w>)")


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a dict; values stay strings."""
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line_no)
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------------------
# Benchmark scenario builders

def build_acs(doors: int, modulus: Modulus | None = None, rounds: int = 100,
              door_max: int = 15, width: int = 32):
    """Access control: type-A occupancy must never fall below type-B.

    Observations per door: entries/exits for A then B.  State keeps the
    four cumulative totals, so the occupancy comparison
    inA < inB becomes entA + exB < entB + exA over nonnegative sums.
    """
    if doors < 1:
        raise CompileError("need at least one door")
    modulus = modulus or Modulus.prime(DEFAULT_PRIME)
    bound = (rounds + 1) * doors * door_max  # per-category running total
    if 2 * bound >= 1 << width:
        raise CompileError(f"width {width} cannot hold {rounds} rounds of totals")
    state_decls = [VarDecl(SType.ARITH, bound) for _ in range(4)]  # entA exA entB exB
    obs_decls = [VarDecl(SType.ARITH, door_max) for _ in range(4 * doors)]
    totals = []
    for cat in range(4):
        per_door = [obs(4 * d + cat) for d in range(doors)]
        totals.append(add_chain([state(cat)] + per_door))
    ent_a, ex_a, ent_b, ex_b = totals
    phi = lt(add(ent_a, ex_b), add(ent_b, ex_a), width=width)
    prog = compile_spec(state_decls, obs_decls, totals, phi, modulus)
    cfg = ScenarioConfig(
        name="acs", size=doors, modulus=modulus, rounds=rounds,
        bounds={"door_max": door_max, "width": width},
        initial_state=[0, 0, 0, 0],
        obs_bounds=[door_max] * (4 * doors))
    return prog, cfg


def build_locks(locks: int, modulus: Modulus | None = None, rounds: int = 100):
    """Lock discipline: lock() or unlock() never called twice in a row.

    Each lock contributes two observation bits (is_lock, is_unlock) with
    (1,1) forbidden; state is one bit per lock (1 = locked).
    """
    if locks < 1:
        raise CompileError("need at least one lock")
    modulus = modulus or Modulus.prime(DEFAULT_PRIME)
    state_decls = [VarDecl(SType.BOOL) for _ in range(locks)]
    obs_decls = [VarDecl(SType.BOOL) for _ in range(2 * locks)]
    viols = []
    delta = []
    for j in range(locks):
        lk, ul, st = obs(2 * j), obs(2 * j + 1), state(j)
        viols.append(or_(and_(lk, st), and_(ul, not_(st))))
        delta.append(or_(lk, and_(st, not_(ul))))
    prog = compile_spec(state_decls, obs_decls, delta, or_tree(viols), modulus)
    cfg = ScenarioConfig(
        name="locks", size=locks, modulus=modulus, rounds=rounds,
        bounds={}, initial_state=[0] * locks, obs_bounds=[1] * (2 * locks))
    return prog, cfg


def build_car(dims: int, modulus: Modulus | None = None, rounds: int = 100,
              disp_max: int = 3, r_base: int = 20, growth: int = 1,
              r_max: int = 1000, width: int = 32, initial_position=None):
    """Geofence: the position must stay inside a sphere of radius
    r(t) = min(r_base + growth*t, r_max).

    Position is kept as cumulative nonnegative plus/minus limbs per axis;
    the squared norm uses one multiplication per axis and is compared
    against the publicly computed r(t)^2.
    """
    if dims < 1:
        raise CompileError("need at least one dimension")
    modulus = modulus or Modulus.prime(DEFAULT_PRIME)
    initial_position = list(initial_position or [0] * dims)
    if len(initial_position) != dims:
        raise CompileError("initial position must have one entry per dimension")
    limb_bound = (rounds + 1) * disp_max + max(initial_position, default=0)
    norm_bound = dims * limb_bound * limb_bound
    if max(norm_bound, r_max * r_max) >= 1 << width:
        raise CompileError(f"width {width} cannot hold the squared norm bound {norm_bound}")
    state_decls = [VarDecl(SType.ARITH, limb_bound - disp_max) for _ in range(2 * dims)]
    obs_decls = [VarDecl(SType.ARITH, disp_max) for _ in range(2 * dims)]
    delta = [add(state(i), obs(i)) for i in range(2 * dims)]
    squares = [sq_diff(delta[2 * i], delta[2 * i + 1]) for i in range(dims)]
    norm = add_chain(squares)
    phi = lt(Param("rsq", r_max * r_max), norm, width=width)
    prog = compile_spec(state_decls, obs_decls, delta, phi, modulus)
    init = []
    for p in initial_position:
        init += [p, 0]
    cfg = ScenarioConfig(
        name="car", size=dims, modulus=modulus, rounds=rounds,
        bounds={"disp_max": disp_max, "r_base": r_base, "growth": growth,
                "r_max": r_max, "width": width,
                "initial_position": tuple(initial_position)},
        initial_state=init, obs_bounds=[disp_max] * (2 * dims))
    return prog, cfg


def build_bloodsugar(window=(600, 700), threshold: int = 200,
                     modulus: Modulus | None = None, rounds: int = 750,
                     reading_max: int = 1023):
    """Sliding-window bound: within any window of length in [a, b] time
    units the reading never exceeds the threshold.

    State is a saturating counter of steps since the last exceedance,
    capped at b-a+2.  The verdict for the window anchored at t-b is final
    at time t; rounds before t=b report no violation (the public phi
    threshold parameter is 0 until then).
    """
    a, b = window
    if not 0 < a < b:
        raise CompileError("window must satisfy 0 < a < b")
    if threshold >= reading_max:
        raise CompileError("threshold must be below the maximum reading")
    modulus = modulus or Modulus.prime(DEFAULT_PRIME)
    cap = b - a + 2
    state_decls = [VarDecl(SType.ARITH, cap, init=cap)]
    obs_decls = [VarDecl(SType.ARITH, reading_max)]
    s, x = state(0), obs(0)
    exceed = lt(const(threshold), x)
    bumped = mux(lt(s, const(cap)), add(s, const(1)), s)  # min(s+1, cap)
    s_next = mux(exceed, const(0), bumped)
    phi = lt(s_next, Param("phi_thr", b - a + 1))
    prog = compile_spec(state_decls, obs_decls, [s_next], phi, modulus)
    cfg = ScenarioConfig(
        name="bloodsugar", size=b, modulus=modulus, rounds=rounds,
        bounds={"window": (a, b), "threshold": threshold, "reading_max": reading_max},
        initial_state=[cap], obs_bounds=[reading_max])
    return prog, cfg


_BUILDERS = {"acs": build_acs, "locks": build_locks, "car": build_car,
             "bloodsugar": build_bloodsugar}

SCENARIO_NAMES = tuple(sorted(_BUILDERS))


def build_scenario(name: str, size: int | None = None, modulus: Modulus | None = None,
                   rounds: int | None = None, **bounds):
    """Dispatch to a named scenario builder with defaulted arguments."""
    if name not in _BUILDERS:
        raise CompileError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    kw = dict(bounds)
    if modulus is not None:
        kw["modulus"] = modulus
    if rounds is not None:
        kw["rounds"] = rounds
    if name == "bloodsugar":
        if size is not None and "window" not in kw:
            # size stands for the window upper bound b; keep the b-a=100 shape
            kw["window"] = (max(1, size - 100), size)
        return build_bloodsugar(**kw)
    return _BUILDERS[name](size or 1, **kw)


def scenario_from_config(text: str):
    """Build (Program, ScenarioConfig) from key-value config text."""
    kv = parse_config_text(text)
    if "name" not in kv:
        raise ParseError("config is missing 'name'")
    name = kv.pop("name")
    size = int(kv.pop("size", "1"))
    modulus = parse_modulus(kv.pop("modulus")) if "modulus" in kv else None
    rounds = int(kv.pop("rounds")) if "rounds" in kv else None
    bounds = {}
    for key, val in kv.items():
        if key in ("scheme", "parties", "threshold", "seed", "base_port", "host",
                   "mode", "material", "program", "trace"):
            continue  # session-level keys live in the same file; not bounds
        if ":" in val:
            bounds[key] = tuple(int(x) for x in val.split(":"))
        elif val.lstrip("-").isdigit():
            bounds[key] = int(val)
        else:
            bounds[key] = val
    return build_scenario(name, size, modulus, rounds, **bounds)
