"""Synthetic scene world: generator and ground-truth oracle.

Scenes are small sets of attributed objects. Requirements are word sequences
in a closed grammar (attribute predicates, negation, count thresholds,
two-term conjunction) that the oracle can evaluate exactly, so every label in
every generated file is machine-verifiable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from typing import Iterator, Optional, Sequence

from .vocab import SCENE_START, SCENE_END

# Fixed text of the dependency requirement; its gold answer is the negation
# of the previous requirement's answer.
DEPENDENCY_TEXT = (
    "the answer to this question is the opposite of the answer "
    "to the previous question"
).split()

_NUMBER_WORDS = tuple(str(k) for k in range(0, 10))


class WorldError(ValueError):
    pass


class MalformedRequirementError(WorldError):
    pass


class WorldTooSmallError(WorldError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    colors: tuple[str, ...] = ("red", "blue", "green", "yellow", "black", "white")
    sizes: tuple[str, ...] = ("small", "medium", "large")
    patterns: tuple[str, ...] = ("plain", "striped", "dotted", "checked")
    categories: tuple[str, ...] = (
        "circle", "square", "triangle", "star", "hexagon", "cross",
    )
    min_objects: int = 1
    max_objects: int = 6
    properties_low: int = 9
    properties_high: int = 11
    count_thresholds: tuple[int, ...] = (2, 3)
    # sampling weights for (atom, negation, count, conjunction)
    kind_weights: tuple[float, float, float, float] = (0.40, 0.25, 0.15, 0.20)

    def attribute_values(self) -> tuple[str, ...]:
        return self.sizes + self.colors + self.patterns

    def all_words(self) -> list[str]:
        """Every content word the generator can emit, deterministic order."""
        structural = ["no", "at", "least", "and", "object"]
        reason_words = ["there", "is", "a", "nothing", "matches", "count"]
        words = (
            list(self.sizes)
            + list(self.colors)
            + list(self.patterns)
            + list(self.categories)
            + structural
            + list(_NUMBER_WORDS)
            + reason_words
            + list(DEPENDENCY_TEXT)
        )
        return list(dict.fromkeys(words))


@dataclass(frozen=True)
class SceneObject:
    category: str
    color: str
    size: str
    pattern: str

    def words(self) -> tuple[str, ...]:
        return (self.size, self.color, self.pattern, self.category)


@dataclass(frozen=True)
class Scene:
    objects: tuple[SceneObject, ...]

    def to_words(self) -> list[str]:
        out = [SCENE_START]
        for obj in self.objects:
            out.extend(obj.words())
        out.append(SCENE_END)
        return out

    def to_dict(self) -> dict:
        return {"objects": [asdict(o) for o in self.objects]}

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        return cls(tuple(SceneObject(**o) for o in d["objects"]))

    @classmethod
    def from_words(cls, words: Sequence[str]) -> "Scene":
        if len(words) < 2 or words[0] != SCENE_START or words[-1] != SCENE_END:
            raise WorldError("scene words must be delimited by scene markers")
        body = words[1:-1]
        if len(body) % 4 != 0:
            raise WorldError("scene body length must be a multiple of 4")
        objects = []
        for i in range(0, len(body), 4):
            size, color, pattern, category = body[i : i + 4]
            objects.append(SceneObject(category, color, size, pattern))
        return cls(tuple(objects))


# ---------------------------------------------------------------------------
# Requirement predicates


@dataclass(frozen=True)
class Atom:
    """Conjunction of attribute constraints, optionally anchored to a category.

    Matches an object iff every named attribute value matches.
    """

    size: Optional[str] = None
    color: Optional[str] = None
    pattern: Optional[str] = None
    category: Optional[str] = None

    def matches(self, obj: SceneObject) -> bool:
        return (
            (self.size is None or obj.size == self.size)
            and (self.color is None or obj.color == self.color)
            and (self.pattern is None or obj.pattern == self.pattern)
            and (self.category is None or obj.category == self.category)
        )

    def is_empty(self) -> bool:
        return (
            self.size is None
            and self.color is None
            and self.pattern is None
            and self.category is None
        )

    def words(self) -> list[str]:
        out = [w for w in (self.size, self.color, self.pattern) if w is not None]
        out.append(self.category if self.category is not None else "object")
        return out


@dataclass(frozen=True)
class Predicate:
    kind: str  # "atom" | "neg" | "count" | "and"
    atom: Atom
    threshold: int = 0
    second: Optional[Atom] = None

    def words(self) -> list[str]:
        if self.kind == "atom":
            return self.atom.words()
        if self.kind == "neg":
            return ["no"] + self.atom.words()
        if self.kind == "count":
            return ["at", "least", str(self.threshold)] + self.atom.words()
        if self.kind == "and":
            return self.atom.words() + ["and"] + self.second.words()
        raise WorldError(f"unknown predicate kind: {self.kind}")

    def holds(self, scene: Scene) -> bool:
        n = sum(1 for obj in scene.objects if self.atom.matches(obj))
        if self.kind == "atom":
            return n >= 1
        if self.kind == "neg":
            return n == 0
        if self.kind == "count":
            return n >= self.threshold
        if self.kind == "and":
            m = sum(1 for obj in scene.objects if self.second.matches(obj))
            return n >= 1 and m >= 1
        raise WorldError(f"unknown predicate kind: {self.kind}")


def _parse_atom(words: Sequence[str], cfg: WorldConfig) -> Atom:
    size = color = pattern = category = None
    for w in words:
        if w in cfg.sizes and size is None:
            size = w
        elif w in cfg.colors and color is None:
            color = w
        elif w in cfg.patterns and pattern is None:
            pattern = w
        elif w in cfg.categories and category is None:
            category = w
        elif w == "object" and category is None:
            pass  # explicit "any category" head
        else:
            raise MalformedRequirementError(f"unexpected word in atom: {w!r}")
    atom = Atom(size=size, color=color, pattern=pattern, category=category)
    if atom.is_empty() and "object" not in words:
        raise MalformedRequirementError("empty atom")
    return atom


def parse_requirement(words: Sequence[str], cfg: WorldConfig) -> Predicate:
    words = list(words)
    if not words:
        raise MalformedRequirementError("empty requirement")
    if words[0] == "no":
        return Predicate("neg", _parse_atom(words[1:], cfg))
    if words[:2] == ["at", "least"]:
        if len(words) < 4 or not words[2].isdigit():
            raise MalformedRequirementError("count requirement needs a threshold")
        return Predicate("count", _parse_atom(words[3:], cfg), threshold=int(words[2]))
    if "and" in words:
        i = words.index("and")
        if "and" in words[i + 1 :]:
            raise MalformedRequirementError("only two-term conjunctions supported")
        return Predicate(
            "and", _parse_atom(words[:i], cfg), second=_parse_atom(words[i + 1 :], cfg)
        )
    return Predicate("atom", _parse_atom(words, cfg))


def oracle_eval(scene: Scene, requirement: Sequence[str], cfg: WorldConfig) -> str:
    """Ground-truth yes/no for a requirement text against a scene."""
    if list(requirement) == DEPENDENCY_TEXT:
        raise MalformedRequirementError(
            "dependency requirement has no standalone truth value"
        )
    return "yes" if parse_requirement(requirement, cfg).holds(scene) else "no"


# ---------------------------------------------------------------------------
# Reason templates


def reason_for(pred: Predicate, scene: Scene, answer: str) -> list[str]:
    matched = [o for o in scene.objects if pred.atom.matches(o)]
    if pred.kind == "count":
        return ["count", "is", str(len(matched))]
    witness = matched[0] if matched else None
    if witness is None:
        return ["nothing", "matches"]
    if pred.kind == "neg" and answer == "yes":
        return ["nothing", "matches"]
    return ["there", "is", "a", *witness.words()]


# ---------------------------------------------------------------------------
# Generated records


@dataclass(frozen=True)
class PropertySpec:
    text: tuple[str, ...]
    answer: str  # "yes" | "no"
    reason: tuple[str, ...]
    kind: str = "literal"  # "literal" | "dependency"


@dataclass(frozen=True)
class GeneratedSample:
    scene: Scene
    properties: tuple[PropertySpec, ...]

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "scene": self.scene.to_dict(),
                "properties": [
                    {
                        "text": " ".join(p.text),
                        "answer": p.answer,
                        "reason": " ".join(p.reason),
                        "kind": p.kind,
                    }
                    for p in self.properties
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "GeneratedSample":
        d = json.loads(line)
        props = tuple(
            PropertySpec(
                text=tuple(p["text"].split()),
                answer=p["answer"],
                reason=tuple(p.get("reason", "").split()),
                kind=p.get("kind", "literal"),
            )
            for p in d["properties"]
        )
        return cls(Scene.from_dict(d["scene"]), props)


@dataclass(frozen=True)
class PairSample:
    scene_1: Scene
    scene_2: Scene
    requirements: tuple[tuple[str, ...], ...]
    expression: str
    label: str  # "first" | "second"

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "scene_1": self.scene_1.to_dict(),
                "scene_2": self.scene_2.to_dict(),
                "requirements": [" ".join(r) for r in self.requirements],
                "expression": self.expression,
                "label": self.label,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "PairSample":
        d = json.loads(line)
        return cls(
            Scene.from_dict(d["scene_1"]),
            Scene.from_dict(d["scene_2"]),
            tuple(tuple(r.split()) for r in d["requirements"]),
            d["expression"],
            d["label"],
        )


# ---------------------------------------------------------------------------
# Sampling


def _sample_scene(rng: random.Random, cfg: WorldConfig) -> Scene:
    n = rng.randint(cfg.min_objects, cfg.max_objects)
    return Scene(
        tuple(
            SceneObject(
                category=rng.choice(cfg.categories),
                color=rng.choice(cfg.colors),
                size=rng.choice(cfg.sizes),
                pattern=rng.choice(cfg.patterns),
            )
            for _ in range(n)
        )
    )


def _sample_atom(rng: random.Random, cfg: WorldConfig, scene: Scene, want: bool) -> Atom:
    # Bias toward the wanted truth value; callers still verify with holds().
    if want and scene.objects:
        obj = rng.choice(scene.objects)
        size, color, pattern, category = obj.size, obj.color, obj.pattern, obj.category
    else:
        size = rng.choice(cfg.sizes)
        color = rng.choice(cfg.colors)
        pattern = rng.choice(cfg.patterns)
        category = rng.choice(cfg.categories)
    fields = {"size": size, "color": color, "pattern": pattern, "category": category}
    keep = rng.sample(list(fields), rng.randint(1, 2))
    return Atom(**{k: (v if k in keep else None) for k, v in fields.items()})


def _sample_predicate(
    rng: random.Random, cfg: WorldConfig, scene: Scene, want: bool
) -> Predicate:
    kind = rng.choices(["atom", "neg", "count", "and"], weights=cfg.kind_weights)[0]
    if kind == "atom":
        return Predicate("atom", _sample_atom(rng, cfg, scene, want))
    if kind == "neg":
        return Predicate("neg", _sample_atom(rng, cfg, scene, not want))
    if kind == "count":
        return Predicate(
            "count",
            _sample_atom(rng, cfg, scene, want),
            threshold=rng.choice(cfg.count_thresholds),
        )
    return Predicate(
        "and",
        _sample_atom(rng, cfg, scene, want),
        second=_sample_atom(rng, cfg, scene, want),
    )


_MAX_ATTEMPTS = 400


def _sample_property(
    rng: random.Random,
    cfg: WorldConfig,
    scene: Scene,
    want: bool,
    used: set,
) -> PropertySpec:
    for _ in range(_MAX_ATTEMPTS):
        pred = _sample_predicate(rng, cfg, scene, want)
        if pred.holds(scene) != want:
            continue
        text = tuple(pred.words())
        if text in used:
            continue
        used.add(text)
        answer = "yes" if want else "no"
        return PropertySpec(text, answer, tuple(reason_for(pred, scene, answer)))
    raise WorldTooSmallError(
        "could not find a distinct property with the requested truth value"
    )


def generate_sample(rng: random.Random, cfg: WorldConfig) -> GeneratedSample:
    scene = _sample_scene(rng, cfg)
    n_props = rng.randint(cfg.properties_low, cfg.properties_high)
    wants = [True] * (n_props // 2) + [False] * (n_props - n_props // 2)
    rng.shuffle(wants)
    used: set = set()
    props = tuple(_sample_property(rng, cfg, scene, w, used) for w in wants)
    return GeneratedSample(scene, props)


def generate_training_set(
    cfg: WorldConfig, n_samples: int, seed: int
) -> Iterator[GeneratedSample]:
    if n_samples < 1:
        raise WorldError("n_samples must be >= 1")
    rng = random.Random(seed)
    for _ in range(n_samples):
        yield generate_sample(rng, cfg)


def generate_dependency_set(
    cfg: WorldConfig, n_samples: int, seed: int, dep_fraction: float = 0.5
) -> Iterator[GeneratedSample]:
    """Regular-size samples; in a dep_fraction of them one literal slot is
    followed by the fixed dependency sentence whose label negates it. The
    dependency slot always sits directly after its anchor."""
    rng = random.Random(seed)
    for _ in range(n_samples):
        sample = generate_sample(rng, cfg)
        if rng.random() >= dep_fraction:
            yield sample
            continue
        props = list(sample.properties)
        anchor = rng.randrange(len(props) - 1)
        dep = PropertySpec(
            text=tuple(DEPENDENCY_TEXT),
            answer="no" if props[anchor].answer == "yes" else "yes",
            reason=("the", "opposite", "of", "the", "previous", "answer"),
            kind="dependency",
        )
        # the dependency slot replaces the anchor's successor so the property
        # count stays within the configured range
        props[anchor + 1 : anchor + 2] = [dep]
        yield GeneratedSample(sample.scene, tuple(props))


def _sample_pair_requirement(
    rng: random.Random, cfg: WorldConfig
) -> Predicate:
    # Pair queries mimic decomposed user requirements: atoms and negations only.
    size = rng.choice(cfg.sizes)
    color = rng.choice(cfg.colors)
    pattern = rng.choice(cfg.patterns)
    category = rng.choice(cfg.categories)
    fields = {"size": size, "color": color, "pattern": pattern, "category": category}
    keep = rng.sample(list(fields), rng.randint(1, 2))
    atom = Atom(**{k: (v if k in keep else None) for k, v in fields.items()})
    return Predicate("neg" if rng.random() < 0.25 else "atom", atom)


def _sample_expression(rng: random.Random, m: int) -> str:
    terms = []
    style = rng.random()
    for k in range(1, m + 1):
        var = f"r{k}"
        if style < 0.15 and rng.random() < 0.3:
            var = f"not({var})"
        if 0.15 <= style < 0.45:
            var = f"{rng.choice(['0.5', '1', '1.5', '2'])}*{var}"
        terms.append(var)
    if style >= 0.85 and m >= 2:
        head = f"max({terms[0]}, {terms[1]})"
        return " + ".join([head] + terms[2:])
    return " + ".join(terms)


def generate_pair_set(
    cfg: WorldConfig, n_pairs: int, seed: int
) -> Iterator[PairSample]:
    from .rankexpr import parse, evaluate

    rng = random.Random(seed)
    produced = 0
    while produced < n_pairs:
        scene_1 = _sample_scene(rng, cfg)
        shared = rng.choice(scene_1.objects).category
        scene_2 = _sample_scene(rng, cfg)
        if not any(o.category == shared for o in scene_2.objects):
            objs = list(scene_2.objects)
            i = rng.randrange(len(objs))
            objs[i] = SceneObject(
                shared, objs[i].color, objs[i].size, objs[i].pattern
            )
            scene_2 = Scene(tuple(objs))
        m = rng.randint(2, 6)
        reqs, seen = [], set()
        while len(reqs) < m:
            pred = _sample_pair_requirement(rng, cfg)
            text = tuple(pred.words())
            if text not in seen:
                seen.add(text)
                reqs.append(text)
        expr_src = _sample_expression(rng, m)
        expr = parse(expr_src)
        j1 = [oracle_eval(scene_1, r, cfg) for r in reqs]
        j2 = [oracle_eval(scene_2, r, cfg) for r in reqs]
        s1, s2 = evaluate(expr, j1), evaluate(expr, j2)
        if s1 == s2:
            continue  # ties are regenerated
        yield PairSample(
            scene_1, scene_2, tuple(reqs), expr_src,
            "first" if s1 > s2 else "second",
        )
        produced += 1


# ---------------------------------------------------------------------------
# JSONL helpers


def write_jsonl(path, records) -> int:
    n = 0
    with open(path, "w") as f:
        for rec in records:
            f.write(rec.to_json_line())
            f.write("\n")
            n += 1
    return n


def read_samples(path) -> list[GeneratedSample]:
    with open(path) as f:
        return [GeneratedSample.from_json_line(line) for line in f if line.strip()]


def read_pairs(path) -> list[PairSample]:
    with open(path) as f:
        return [PairSample.from_json_line(line) for line in f if line.strip()]
