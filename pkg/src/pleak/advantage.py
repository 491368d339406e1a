"""Guessing advantage: attacker priors, the advantage-to-epsilon conversion, and its pipeline.

Attacker file::

    ship.latitude range 0 300;
    ship.name total 53;

Sensitive-attributes file::

    leak ship.latitude approx 5, ship.longitude approx 5 cost 1.0;
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from pleak.errors import PolicyError
from pleak.sensitivity.analysis import analyze_table, output_value
from pleak.sensitivity.local import local_row_sensitivity
from pleak.sensitivity.noise import SmoothParams, gen_cauchy_quantile, relative_error
from pleak.sensitivity.norm import attacker_norm
from pleak.sensitivity.smooth import as_workflow


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PolicyError(f"range needs lo < hi, got {self.lo} and {self.hi}")


@dataclass(frozen=True)
class Total:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise PolicyError(f"total needs at least one value, got {self.n}")


@dataclass(frozen=True)
class Approx:
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise PolicyError(f"approx radius must be positive, got {self.r}")


Knowledge = Exact | Range | Total
Guess = Exact | Approx


@dataclass(frozen=True)
class LeakTarget:
    table: str
    column: str
    guess: Guess
    cost: float = 0.0

    @property
    def name(self) -> str:
        return f"{self.table}.{self.column}"

    @property
    def radius(self) -> float:
        return self.guess.r if isinstance(self.guess, Approx) else 1.0


@dataclass
class AttackerKnowledge:
    entries: dict[tuple[str, str], Knowledge] = field(default_factory=dict)

    def ranges(self) -> dict[tuple[str, str], tuple[float, float]]:
        return {k: (v.lo, v.hi) for k, v in self.entries.items() if isinstance(v, Range)}


@dataclass
class SensitiveSpec:
    targets: list[LeakTarget] = field(default_factory=list)


@dataclass
class TargetProbability:
    target: str
    prior: float
    posterior: float
    epsilon: float
    cost: float


@dataclass
class AdvantageResult:
    advantage: float
    epsilon: float
    beta: float | None
    targets: list[TargetProbability]
    noise_scale: float
    relative_error: float
    expected_cost: float
    sensitivity: float | None = None
    output: float | None = None


_ATTR = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)$")


def _statements(text: str) -> list[list[str]]:
    text = re.sub(r"#[^\n]*", "", text)
    out = []
    for chunk in text.split(";"):
        words = chunk.replace(",", " , ").split()
        if words:
            out.append(words)
    if text.strip() and not text.strip().endswith(";"):
        raise PolicyError("policy statements must end with ';'")
    return out


def _attr(word: str) -> tuple[str, str]:
    m = _ATTR.match(word)
    if m is None:
        raise PolicyError(f"expected <table>.<column>, found {word!r}")
    return m.group(1).lower(), m.group(2).lower()


def _number(words, i, what):
    try:
        return float(words[i])
    except (IndexError, ValueError):
        raise PolicyError(f"expected a number for {what}") from None


def parse_attacker(text: str) -> AttackerKnowledge:
    entries: dict = {}
    for words in _statements(text):
        key = _attr(words[0])
        if key in entries:
            raise PolicyError(f"{key[0]}.{key[1]} described twice")
        kind = words[1].lower() if len(words) > 1 else ""
        if kind == "exact" and len(words) == 2:
            entries[key] = Exact()
        elif kind == "range" and len(words) == 4:
            entries[key] = Range(_number(words, 2, "range"), _number(words, 3, "range"))
        elif kind == "total" and len(words) == 3:
            n = _number(words, 2, "total")
            if not n.is_integer():
                raise PolicyError(f"total needs an integer count, got {words[2]}")
            entries[key] = Total(int(n))
        else:
            raise PolicyError(f"cannot parse attacker statement {' '.join(words)!r}")
    return AttackerKnowledge(entries)


def parse_sensitive(text: str) -> SensitiveSpec:
    targets = []
    for words in _statements(text):
        if words[0].lower() != "leak":
            raise PolicyError(f"sensitive statements start with 'leak', found {words[0]!r}")
        if len(words) < 3 or words[-2].lower() != "cost":
            raise PolicyError("a leak statement ends with 'cost <number>'")
        cost = _number(words, len(words) - 1, "cost")
        if cost < 0:
            raise PolicyError("cost must be non-negative")
        body = words[1:-2]
        items, cur = [], []
        for w in body + [","]:
            if w == ",":
                if not cur:
                    raise PolicyError("empty leak target")
                items.append(cur)
                cur = []
            else:
                cur.append(w)
        for item in items:
            table, column = _attr(item[0])
            if len(item) == 2 and item[1].lower() == "exact":
                guess = Exact()
            elif len(item) == 3 and item[1].lower() == "approx":
                guess = Approx(_number(item, 2, "approx"))
            else:
                raise PolicyError(f"cannot parse leak target {' '.join(item)!r}")
            targets.append(LeakTarget(table, column, guess, cost))
    return SensitiveSpec(targets)


def parse_policy(attacker_text: str, sensitive_text: str, schemas=None) -> tuple[AttackerKnowledge, SensitiveSpec]:
    knowledge, spec = parse_attacker(attacker_text), parse_sensitive(sensitive_text)
    if schemas is not None:
        for (t, c), k in knowledge.entries.items():
            _check_column(schemas, t, c)
            if isinstance(k, Range) and not schemas[t].is_numeric(c):
                raise PolicyError(f"range given for non-numeric column {t}.{c}")
        for target in spec.targets:
            _check_column(schemas, target.table, target.column)
            if isinstance(target.guess, Approx) and not schemas[target.table].is_numeric(target.column):
                raise PolicyError(f"approx guess on non-numeric column {target.name}")
    return knowledge, spec


def _check_column(schemas, t, c):
    if t not in schemas or c not in schemas[t].column_names:
        raise PolicyError(f"unknown attribute {t}.{c}")


def _fmt(x: float) -> str:
    return repr(float(x))


def format_attacker(k: AttackerKnowledge) -> str:
    lines = []
    for (t, c), v in k.entries.items():
        if isinstance(v, Exact):
            lines.append(f"{t}.{c} exact;")
        elif isinstance(v, Range):
            lines.append(f"{t}.{c} range {_fmt(v.lo)} {_fmt(v.hi)};")
        else:
            lines.append(f"{t}.{c} total {v.n};")
    return "\n".join(lines) + ("\n" if lines else "")


def format_sensitive(spec: SensitiveSpec) -> str:
    lines = []
    for t in spec.targets:
        guess = "exact" if isinstance(t.guess, Exact) else f"approx {_fmt(t.guess.r)}"
        lines.append(f"leak {t.name} {guess} cost {_fmt(t.cost)};")
    return "\n".join(lines) + ("\n" if lines else "")


def prior_probability(knowledge: Knowledge, guess: Guess) -> float:
    if isinstance(knowledge, Exact):
        return 1.0
    if isinstance(knowledge, Range):
        if not isinstance(guess, Approx):
            raise PolicyError("an exact guess needs discrete (total) knowledge, not a range")
        return min(1.0, 2.0 * guess.r / (knowledge.hi - knowledge.lo))
    if isinstance(knowledge, Total):
        if not isinstance(guess, Exact):
            raise PolicyError("an approximate guess needs range knowledge, not a total count")
        return 1.0 / knowledge.n
    raise TypeError(knowledge)


def advantage_to_epsilon(adv: float, p: float, r: float = 1.0) -> float:
    """Smallest epsilon per unit distance whose posterior bound reaches p + adv."""
    if not 0 <= adv <= 1:
        raise ValueError("advantage must lie in [0, 1]")
    if not 0 < p <= 1:
        raise ValueError("prior must lie in (0, 1]")
    if not r > 0:
        raise ValueError("radius must be positive")
    if adv == 0:
        return 0.0
    if p + adv >= 1:
        return math.inf
    return math.log((p + adv) * (1 - p) / (p * (1 - p - adv))) / r


def posterior_from_epsilon(eps: float, p: float, r: float = 1.0) -> float:
    """Largest posterior reachable under epsilon-per-unit indistinguishability at distance r."""
    if math.isinf(eps):
        return 1.0
    k = math.exp(eps * r)
    return k * p / (1 - p + k * p)


def advantage_analysis(source, db, knowledge: AttackerKnowledge, spec: SensitiveSpec, adv: float,
                       params: SmoothParams, output: str | None = None) -> AdvantageResult:
    if not spec.targets:
        raise PolicyError("no sensitive attributes given")
    probs = []
    for t in spec.targets:
        k = knowledge.entries.get((t.table, t.column))
        if k is None:
            raise PolicyError(f"attacker knowledge does not cover {t.name}")
        p = prior_probability(k, t.guess)
        eps_t = math.inf if p >= 1 else advantage_to_epsilon(adv, p, t.radius)
        probs.append(TargetProbability(t.name, p, min(1.0, p + adv), eps_t, t.cost))
    eps = min(tp.epsilon for tp in probs)
    cost = sum(tp.cost * tp.posterior for tp in probs)
    if eps == 0:
        return AdvantageResult(adv, 0.0, None, probs, math.inf, math.inf, cost)
    if math.isinf(eps):
        return AdvantageResult(adv, math.inf, None, probs, 0.0, 0.0, cost)

    # capping beta at half its limit keeps the noise denominator at least eps/2,
    # so a larger advantage never buys a noisier release
    beta = min(params.beta, eps / (2 * (params.gamma + 1)))
    run = SmoothParams(eps, beta, params.gamma, params.a, params.confidence)
    wf = as_workflow(source, db)
    if output is None:
        finals = wf.final_outputs()
        if len(finals) != 1:
            raise PolicyError(f"choose one output to analyze among {finals}")
        output = finals[0]
    ranges = knowledge.ranges()
    by_table: dict[str, list[LeakTarget]] = {}
    for t in spec.targets:
        by_table.setdefault(t.table, []).append(t)
    bound = 0.0
    sens = 0.0
    for table, targets in sorted(by_table.items()):
        numeric = [t.column for t in targets if isinstance(t.guess, Approx)]
        discrete = [t for t in targets if isinstance(t.guess, Exact)]
        if numeric:
            res = analyze_table(wf, db, table, attacker_norm(dict.fromkeys(numeric)), ranges, run, output)
            bound = max(bound, res.smooth)
            sens = max(sens, res.derivative)
        if discrete:
            # replacing a discrete value is one removal plus one addition
            local = local_row_sensitivity(wf, db, table, None, output)
            bound = max(bound, 2 * local.value)
            sens = max(sens, 2 * local.value)
    y = output_value(wf, db, output)
    lam = bound / run.denominator
    q = gen_cauchy_quantile(run.gamma, run.confidence)
    return AdvantageResult(adv, eps, beta, probs, lam, relative_error(lam, y, q), cost, sens, y)
