"""Line-oriented scenario description language.

::

    version 1
    scenario nested
    description "free text"
    mode A                      # path[.H|.V][#tag]
    bs A B r=1/2                # [convention=symmetric|real]
    phase B -pi/2
    mirror A
    pbs I B1
    swmirror B1 on              # [sink=B1_sink]
    tag B theta=pi/4
    rot I theta=pi/6
    identity
    detector D2 B
    input : A
    postselect D2 : sqrt(2)/2*A + 1/2*B - 1/2*C
    segment A @4 A
    cut 4
    role coupled_segment=arm_a
    analysis weakvalue detector=D2 segments=B,C

Numbers accept ``pi``, ``sqrt(...)``, ``i`` (imaginary unit), ``+ - * /`` and
parentheses.  Unknown statements, keys and modes are errors, reported with
line and column.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from weaktrace.circuit import (
    BeamSplitter,
    Circuit,
    DimensionMismatchError as _CircuitDimensionError,
    Element,
    Identity,
    Mirror,
    NonUnitaryError as _CircuitNonUnitary,
    PhaseShift,
    PolarizingBS,
    Rotator,
    Segment,
    SwitchableMirror,
    Tag,
    default_sink,
    element_unitary,
)
from weaktrace.hilbert import BasisMismatchError, ModeLabel, StateVector, make_basis, resolve_modes
from weaktrace.scenarios import Scenario

FORMAT_VERSION = 1


class DSLError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class DSLSyntaxError(DSLError):
    pass


class UnknownElementError(DSLError):
    pass


class ArityError(DSLError):
    pass


class DimensionMismatchError(DSLError):
    pass


class NonUnitaryError(DSLError):
    pass


ANALYSIS_KEYS = {
    "weakvalue": {"detector", "segments", "property", "cut"},
    "trace-map": {"detector"},
    "pointer-sweep": {"detector", "segment", "sigma", "lambda_min", "lambda_max", "points"},
    "ensemble": {"detector", "segment", "lambda", "sigma", "n", "seed"},
    "fringe-sweep": {"points"},
}

# kind -> (positional arity, required keys, optional keys)
ELEMENT_SYNTAX = {
    "bs": (2, {"r"}, {"convention"}),
    "phase": (2, set(), set()),
    "mirror": (1, set(), set()),
    "pbs": (2, set(), set()),
    "swmirror": (2, set(), {"sink"}),
    "tag": (1, {"theta"}, set()),
    "rot": (1, {"theta"}, set()),
    "identity": (0, set(), set()),
}

OTHER_STATEMENTS = {"version", "scenario", "description", "mode", "detector", "input",
                    "postselect", "segment", "cut", "role", "analysis"}


@dataclass(frozen=True)
class AnalysisRequest:
    kind: str
    params: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class ScenarioDocument:
    version: int
    name: str
    modes: tuple[ModeLabel, ...]
    layers: tuple[Element, ...]
    detectors: tuple[tuple[str, tuple[str, ...]], ...]
    input: tuple[tuple[str, complex], ...]
    postselections: tuple[tuple[str, tuple[tuple[str, complex], ...]], ...]
    segments: tuple[tuple[str, int, tuple[str, ...]], ...] = ()
    default_cut: int = 0
    description: str = ""
    roles: tuple[tuple[str, object], ...] = ()
    analyses: tuple[AnalysisRequest, ...] = ()
    # statement positions for diagnostics; not part of document identity
    positions: dict = field(default_factory=dict, compare=False, repr=False)


# ---------------------------------------------------------------- expressions

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z]+)?(?:\#[A-Za-z0-9_]+)?)
  | (?P<op>[-+*/()])
""", re.VERBOSE)

_KEYWORDS = {"pi", "i", "sqrt"}


def _lex_expr(text: str, line: int, col0: int):
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group(), col0 + pos))
        pos = m.end()
    toks.append(("end", "", col0 + len(text)))
    return toks


class _ExprParser:
    """Recursive descent over ``+ - * /``; values are complex scalars or {mode: amplitude} dicts."""

    def __init__(self, text: str, line: int, col: int, allow_modes: bool):
        self.toks = _lex_expr(text, line, col)
        self.i = 0
        self.line = line
        self.allow_modes = allow_modes

    def error(self, msg: str, tok=None) -> DSLSyntaxError:
        tok = tok or self.toks[self.i]
        return DSLSyntaxError(msg, self.line, tok[2])

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        val = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return val

    def expr(self):
        val = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()
            rhs = self.term()
            val = self._combine(val, rhs, op)
        return val

    def term(self):
        val = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()
            rhs = self.factor()
            if op[1] == "*":
                if isinstance(val, dict) and isinstance(rhs, dict):
                    raise self.error("cannot multiply two mode vectors", op)
                if isinstance(val, dict):
                    val = {k: v * rhs for k, v in val.items()}
                elif isinstance(rhs, dict):
                    val = {k: val * v for k, v in rhs.items()}
                else:
                    val = val * rhs
            else:
                if isinstance(rhs, dict):
                    raise self.error("cannot divide by a mode vector", op)
                if rhs == 0:
                    raise self.error("division by zero", op)
                val = {k: v / rhs for k, v in val.items()} if isinstance(val, dict) else val / rhs
        return val

    def factor(self):
        kind, text, col = tok = self.take()
        if kind == "op" and text == "-":
            val = self.factor()
            return {k: -v for k, v in val.items()} if isinstance(val, dict) else -val
        if kind == "op" and text == "+":
            return self.factor()
        if kind == "op" and text == "(":
            val = self.expr()
            if self.take()[1] != ")":
                raise self.error("expected ')'", tok)
            return val
        if kind == "num":
            return complex(float(text))
        if kind == "name":
            if text == "pi":
                return complex(math.pi)
            if text == "i":
                return 1j
            if text == "sqrt":
                if self.take()[1] != "(":
                    raise self.error("expected '(' after sqrt", tok)
                arg = self.expr()
                if self.take()[1] != ")":
                    raise self.error("expected ')'", tok)
                if isinstance(arg, dict) or arg.imag != 0 or arg.real < 0:
                    raise self.error("sqrt needs a nonnegative real argument", tok)
                return complex(math.sqrt(arg.real))
            if not self.allow_modes:
                raise self.error(f"unexpected name {text!r} in a number", tok)
            return {(text, col): 1 + 0j}
        raise self.error(f"unexpected {text or 'end of line'!r}", tok)

    def _combine(self, a, b, op):
        sign = 1 if op[1] == "+" else -1
        if isinstance(a, dict) != isinstance(b, dict):
            raise self.error("cannot add a number and a mode vector", op)
        if isinstance(a, dict):
            out = dict(a)
            for k, v in b.items():
                out[k] = out.get(k, 0) + sign * v
            return out
        return a + sign * b


def parse_number(text: str, line: int = 1, col: int = 1) -> float:
    val = _ExprParser(text, line, col, allow_modes=False).parse()
    if val.imag != 0:
        raise DSLSyntaxError("expected a real number", line, col)
    return float(val.real)


def _parse_amplitudes(text: str, line: int, col: int):
    val = _ExprParser(text, line, col, allow_modes=True).parse()
    if not isinstance(val, dict):
        raise DSLSyntaxError("expected a combination of modes", line, col)
    merged: dict[str, complex] = {}
    cols = {}
    for (ref, c), amp in val.items():
        merged[ref] = merged.get(ref, 0) + amp
        cols.setdefault(ref, c)
    return tuple(merged.items()), cols


def format_number(x: complex | float) -> str:
    x = complex(x)
    re_, im = x.real, x.imag
    if im == 0:
        return repr(re_)
    if re_ == 0:
        return f"{im!r}*i"
    sign = "-" if math.copysign(1, im) < 0 else "+"
    return f"({re_!r}{sign}{abs(im)!r}*i)"


# ---------------------------------------------------------------- statements

@dataclass
class _Tok:
    text: str
    col: int


def _split(line: str) -> list[_Tok]:
    return [_Tok(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted and (not out or out[-1].isspace()):
            break
        out.append(ch)
    return "".join(out)


def _keyvals(toks: list[_Tok], lineno: int, allowed: set[str], what: str):
    pos, kv = [], {}
    for t in toks:
        if "=" in t.text:
            k, v = t.text.split("=", 1)
            if k not in allowed:
                raise DSLSyntaxError(f"unknown key {k!r} for {what}", lineno, t.col)
            if k in kv:
                raise DSLSyntaxError(f"duplicate key {k!r}", lineno, t.col)
            if not v:
                raise DSLSyntaxError(f"empty value for {k!r}", lineno, t.col)
            kv[k] = (v, t.col + len(k) + 1)
        else:
            if kv:
                raise DSLSyntaxError("positional argument after key=value", lineno, t.col)
            pos.append(t)
    return pos, kv


def _parse_element(kind: str, args: list[_Tok], lineno: int, col: int) -> Element:
    arity, required, optional = ELEMENT_SYNTAX[kind]
    pos, kv = _keyvals(args, lineno, required | optional, kind)
    if len(pos) != arity:
        raise ArityError(f"element '{kind}' takes {arity} mode argument(s), got {len(pos)}", lineno, col)
    for k in required - kv.keys():
        raise DSLSyntaxError(f"element '{kind}' needs {k}=...", lineno, col)
    try:
        if kind == "bs":
            r = parse_number(kv["r"][0], lineno, kv["r"][1])
            conv = kv.get("convention", ("symmetric",))[0]
            if conv not in ("symmetric", "real"):
                raise DSLSyntaxError(f"unknown convention {conv!r}", lineno, kv["convention"][1])
            return BeamSplitter(pos[0].text, pos[1].text, r, conv)
        if kind == "phase":
            return PhaseShift(pos[0].text, parse_number(pos[1].text, lineno, pos[1].col))
        if kind == "mirror":
            return Mirror(pos[0].text)
        if kind == "pbs":
            return PolarizingBS(pos[0].text, pos[1].text)
        if kind == "swmirror":
            if pos[1].text not in ("on", "off"):
                raise DSLSyntaxError("switchable mirror state must be 'on' or 'off'", lineno, pos[1].col)
            sink = kv.get("sink", ("",))[0]
            return SwitchableMirror(pos[0].text, pos[1].text == "on", sink)
        if kind in ("tag", "rot"):
            theta = parse_number(kv["theta"][0], lineno, kv["theta"][1])
            return (Tag if kind == "tag" else Rotator)(pos[0].text, theta)
        return Identity()
    except _CircuitNonUnitary as exc:
        raise NonUnitaryError(f"{kind}: {exc}", lineno, col) from None


def _role_value(text: str):
    if "," in text:
        return tuple(p for p in text.split(",") if p)
    return text


def _format_role(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v) + ("," if len(v) == 1 else "")
    return str(v)


def parse_scenario(text: str) -> ScenarioDocument:
    """Parse DSL text into a validated document."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    version = name = None
    description = ""
    modes, mode_pos = [], {}
    layers, layer_pos = [], []
    detectors, det_pos = {}, {}
    input_terms = None
    posts, post_pos = {}, {}
    segments, seg_pos = {}, {}
    default_cut, cut_pos = 0, None
    roles = {}
    analyses = []
    seen_any = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        toks = _split(line)
        if not toks:
            continue
        head, args = toks[0], toks[1:]
        kw = head.text
        if not seen_any and kw != "version":
            raise DSLSyntaxError("first statement must be 'version'", lineno, head.col)
        seen_any = True

        if kw in ELEMENT_SYNTAX:
            layers.append(_parse_element(kw, args, lineno, head.col))
            layer_pos.append((lineno, head.col, kw))
            continue
        if kw not in OTHER_STATEMENTS:
            raise UnknownElementError(f"unknown element kind {kw!r}", lineno, head.col)

        if kw == "version":
            if version is not None:
                raise DSLSyntaxError("duplicate version", lineno, head.col)
            if len(args) != 1 or not args[0].text.isdigit():
                raise DSLSyntaxError("expected 'version <int>'", lineno, head.col)
            version = int(args[0].text)
            if version != FORMAT_VERSION:
                raise DSLSyntaxError(f"unsupported version {version}", lineno, args[0].col)
        elif kw == "scenario":
            if len(args) != 1:
                raise ArityError("expected 'scenario <name>'", lineno, head.col)
            name = args[0].text
        elif kw == "description":
            rest = line[head.col - 1 + len(kw):].strip()
            if len(rest) < 2 or rest[0] != '"' or rest[-1] != '"':
                raise DSLSyntaxError('description must be a "quoted" string', lineno, head.col)
            description = rest[1:-1]
        elif kw == "mode":
            if len(args) != 1:
                raise ArityError("expected 'mode <path>[.<pol>][#<tag>]'", lineno, head.col)
            try:
                lab = ModeLabel.parse(args[0].text)
            except ValueError as exc:
                raise DSLSyntaxError(str(exc), lineno, args[0].col) from None
            if lab in mode_pos:
                raise DSLSyntaxError(f"duplicate mode {lab}", lineno, args[0].col)
            modes.append(lab)
            mode_pos[lab] = (lineno, args[0].col)
        elif kw == "detector":
            if len(args) < 2:
                raise ArityError("expected 'detector <name> <mode>...'", lineno, head.col)
            detectors[args[0].text] = tuple(a.text for a in args[1:])
            det_pos[args[0].text] = (lineno, args[1].col)
        elif kw in ("input", "postselect"):
            want = 1 if kw == "input" else 2
            if len(args) < want or args[want - 1].text != ":":
                raise DSLSyntaxError(f"expected '{kw}{' <detector>' if want == 2 else ''} : <amplitudes>'",
                                     lineno, head.col)
            colon = args[want - 1].col
            terms = _parse_amplitudes(line[colon:], lineno, colon + 1)
            if kw == "input":
                input_terms = (terms, lineno)
            else:
                posts[args[0].text] = terms[0]
                post_pos[args[0].text] = (lineno, terms[1])
        elif kw == "segment":
            if len(args) < 3 or not args[1].text.startswith("@") or not args[1].text[1:].isdigit():
                raise DSLSyntaxError("expected 'segment <name> @<cut> <mode>...'", lineno, head.col)
            segments[args[0].text] = (int(args[1].text[1:]), tuple(a.text for a in args[2:]))
            seg_pos[args[0].text] = (lineno, args[1].col)
        elif kw == "cut":
            if len(args) != 1 or not args[0].text.isdigit():
                raise DSLSyntaxError("expected 'cut <int>'", lineno, head.col)
            default_cut, cut_pos = int(args[0].text), (lineno, args[0].col)
        elif kw == "role":
            for t in args:
                if "=" not in t.text:
                    raise DSLSyntaxError("expected key=value", lineno, t.col)
                k, v = t.text.split("=", 1)
                roles[k] = _role_value(v)
        elif kw == "analysis":
            if not args:
                raise ArityError("expected 'analysis <kind> key=value...'", lineno, head.col)
            kind = args[0].text
            if kind not in ANALYSIS_KEYS:
                raise DSLSyntaxError(f"unknown analysis {kind!r}", lineno, args[0].col)
            pos, kv = _keyvals(args[1:], lineno, ANALYSIS_KEYS[kind], f"analysis {kind}")
            if pos:
                raise DSLSyntaxError("analysis takes only key=value arguments", lineno, pos[0].col)
            analyses.append(AnalysisRequest(kind, tuple((k, v[0]) for k, v in kv.items())))

    if not seen_any:
        raise DSLSyntaxError("empty scenario: expected 'version'", 1, 1)
    if name is None:
        raise DSLSyntaxError("missing 'scenario <name>'", 1, 1)
    if not modes:
        raise DSLSyntaxError("no modes declared", 1, 1)
    if input_terms is None:
        raise DSLSyntaxError("missing 'input : ...'", 1, 1)

    doc = ScenarioDocument(
        version=version, name=name, description=description, modes=tuple(modes),
        layers=tuple(layers), detectors=tuple(detectors.items()),
        input=input_terms[0][0], postselections=tuple(posts.items()),
        segments=tuple((k, c, m) for k, (c, m) in segments.items()),
        default_cut=default_cut, roles=tuple(roles.items()), analyses=tuple(analyses),
        positions={"layers": layer_pos, "detectors": det_pos, "segments": seg_pos,
                   "posts": post_pos, "input": input_terms, "cut": cut_pos, "modes": mode_pos},
    )
    _validate(doc)
    return doc


def _validate(doc: ScenarioDocument) -> None:
    """Check every reference against the declared basis, reporting statement locations."""
    basis = make_basis(doc.modes)
    pos = doc.positions
    for e, (line, col, kind) in zip(doc.layers, pos["layers"]):
        try:
            element_unitary(e, basis)
        except _CircuitDimensionError as exc:
            raise DimensionMismatchError(f"{kind}: {exc}", line, col) from None
        except _CircuitNonUnitary as exc:
            raise NonUnitaryError(f"{kind}: {exc}", line, col) from None
        except BasisMismatchError as exc:
            raise DSLSyntaxError(f"{kind}: {exc}", line, col) from None
    n = len(doc.layers)
    for name, modes in doc.detectors:
        try:
            resolve_modes(basis, modes)
        except BasisMismatchError as exc:
            raise DSLSyntaxError(f"detector {name}: {exc}", *pos["detectors"][name]) from None
    for name, cut, modes in doc.segments:
        line, col = pos["segments"][name]
        if cut > n:
            raise DSLSyntaxError(f"segment {name}: cut {cut} beyond {n} layers", line, col)
        try:
            resolve_modes(basis, modes)
        except BasisMismatchError as exc:
            raise DSLSyntaxError(f"segment {name}: {exc}", line, col) from None
    if doc.default_cut > n:
        raise DSLSyntaxError(f"cut {doc.default_cut} beyond {n} layers", *(pos["cut"] or (1, 1)))
    det_names = {d for d, _ in doc.detectors}
    for det, terms in doc.postselections:
        line, cols = pos["posts"][det]
        if det not in det_names:
            raise DSLSyntaxError(f"postselection for undeclared detector {det!r}", line, 1)
        _state(terms, basis, line, cols)
    (terms, cols), line = pos["input"]
    _state(terms, basis, line, cols)


def _state(terms, basis, line: int, cols: dict) -> StateVector:
    vec = {}
    for ref, amp in terms:
        try:
            idx = resolve_modes(basis, [ref])
        except BasisMismatchError:
            raise DSLSyntaxError(f"unknown mode {ref!r}", line, cols.get(ref, 1)) from None
        if len(idx) != 1:
            raise DimensionMismatchError(f"{ref!r} names {len(idx)} modes; amplitudes need one", line,
                                         cols.get(ref, 1))
        vec[basis[idx[0]]] = amp
    st = StateVector.from_dict(basis, vec)
    if not st.is_normalized(1e-12):
        raise DSLSyntaxError(f"state is not normalized (norm {st.norm():.15g})", line, 1)
    return st


def document_to_scenario(doc: ScenarioDocument) -> Scenario:
    basis = make_basis(doc.modes)
    circuit = Circuit(
        basis, doc.layers,
        {name: Segment(cut, modes) for name, cut, modes in doc.segments},
        dict(doc.detectors),
    )

    def state(terms):
        return StateVector.from_dict(basis, {ModeLabel.parse(r) if _exact(r, basis) else r: a
                                             for r, a in terms})

    return Scenario(
        doc.name, circuit, state(doc.input),
        {det: state(terms) for det, terms in doc.postselections},
        description=doc.description, default_cut=doc.default_cut, roles=dict(doc.roles),
    )


def _exact(ref: str, basis) -> bool:
    try:
        return ModeLabel.parse(ref) in basis
    except ValueError:
        return False


def _terms(st: StateVector) -> tuple[tuple[str, complex], ...]:
    return tuple((str(lab), complex(a)) for lab, a in zip(st.basis, st.amplitudes) if a != 0)


def scenario_to_document(sc: Scenario) -> ScenarioDocument:
    c = sc.circuit
    return ScenarioDocument(
        version=FORMAT_VERSION, name=sc.name, description=sc.description, modes=tuple(c.basis),
        layers=tuple(c.layers), detectors=tuple(c.detectors.items()), input=_terms(sc.input),
        postselections=tuple((d, _terms(s)) for d, s in sc.postselections.items()),
        segments=tuple((n, s.cut, tuple(s.modes)) for n, s in c.segments.items()),
        default_cut=sc.default_cut, roles=tuple(sc.roles.items()),
    )


def format_element(e: Element) -> str:
    if isinstance(e, BeamSplitter):
        s = f"bs {e.mode1} {e.mode2} r={format_number(e.reflectivity)}"
        return s + (f" convention={e.convention}" if e.convention != "symmetric" else "")
    if isinstance(e, PhaseShift):
        return f"phase {e.mode} {format_number(e.angle)}"
    if isinstance(e, Mirror):
        return f"mirror {e.mode}"
    if isinstance(e, PolarizingBS):
        return f"pbs {e.mode1} {e.mode2}"
    if isinstance(e, SwitchableMirror):
        s = f"swmirror {e.mode} {'on' if e.on else 'off'}"
        return s + (f" sink={e.sink}" if e.sink != default_sink(e.mode) else "")
    if isinstance(e, Tag):
        return f"tag {e.mode} theta={format_number(e.theta)}"
    if isinstance(e, Rotator):
        return f"rot {e.mode} theta={format_number(e.theta)}"
    if isinstance(e, Identity):
        return "identity"
    raise TypeError(f"cannot format {e!r}")


def _format_terms(terms) -> str:
    parts = [f"{format_number(a)}*{ref}" for ref, a in terms]
    return " + ".join(parts) if parts else "0*" + "?"


def format_scenario(doc: ScenarioDocument) -> str:
    """Print a document; ``parse_scenario(format_scenario(d)) == d``."""
    out = [f"version {doc.version}", f"scenario {doc.name}"]
    if doc.description:
        out.append(f'description "{doc.description}"')
    out += [f"mode {m}" for m in doc.modes]
    out += [format_element(e) for e in doc.layers]
    out += [f"detector {name} {' '.join(modes)}" for name, modes in doc.detectors]
    out.append(f"input : {_format_terms(doc.input)}")
    out += [f"postselect {d} : {_format_terms(t)}" for d, t in doc.postselections]
    out += [f"segment {n} @{c} {' '.join(m)}" for n, c, m in doc.segments]
    out.append(f"cut {doc.default_cut}")
    out += [f"role {k}={_format_role(v)}" for k, v in doc.roles]
    for a in doc.analyses:
        out.append(" ".join(["analysis", a.kind] + [f"{k}={v}" for k, v in a.params]))
    return "\n".join(out) + "\n"


def builtin_text(name: str) -> str:
    """Text of a shipped scenario file."""
    from importlib import resources

    path = resources.files("weaktrace.data").joinpath(f"{name}.wv")
    if not path.is_file():
        raise FileNotFoundError(f"no built-in scenario file {name!r}")
    return path.read_text(encoding="utf-8")
