import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import bruteforce_eval
from slotjudge.rankexpr import evaluate, parse
from slotjudge.vocab import RESERVED_TOKENS, build_vocabulary
from slotjudge.world import (
    DEPENDENCY_TEXT,
    GeneratedSample,
    MalformedRequirementError,
    PairSample,
    Scene,
    SceneObject,
    WorldConfig,
    WorldTooSmallError,
    generate_dependency_set,
    generate_pair_set,
    generate_training_set,
    oracle_eval,
)

CFG = WorldConfig()


def scene_of(*objs):
    return Scene(tuple(SceneObject(*o) for o in objs))


RED_CIRCLE = scene_of(("circle", "red", "small", "plain"))


def test_oracle_positive_atom():
    assert oracle_eval(RED_CIRCLE, ["red", "circle"], CFG) == "yes"


def test_oracle_negation():
    assert oracle_eval(RED_CIRCLE, ["no", "red", "object"], CFG) == "no"
    assert oracle_eval(RED_CIRCLE, ["no", "blue", "object"], CFG) == "yes"


def test_oracle_count():
    scene = scene_of(
        ("circle", "red", "small", "plain"), ("circle", "blue", "large", "plain")
    )
    assert oracle_eval(scene, ["at", "least", "2", "circle"], CFG) == "yes"
    assert oracle_eval(scene, ["at", "least", "3", "circle"], CFG) == "no"


def test_oracle_conjunction():
    scene = scene_of(
        ("circle", "red", "small", "plain"), ("square", "blue", "large", "dotted")
    )
    assert oracle_eval(scene, ["red", "circle", "and", "blue", "square"], CFG) == "yes"
    assert oracle_eval(scene, ["red", "circle", "and", "blue", "circle"], CFG) == "no"


def test_oracle_rejects_malformed():
    for bad in (["frobnicate"], [], ["at", "least", "circle"], ["no"],
                ["red", "and", "blue", "and", "green"]):
        with pytest.raises(MalformedRequirementError):
            oracle_eval(RED_CIRCLE, bad, CFG)


def test_dependency_text_has_no_standalone_truth():
    with pytest.raises(MalformedRequirementError):
        oracle_eval(RED_CIRCLE, DEPENDENCY_TEXT, CFG)


def test_oracle_agrees_with_bruteforce_reimplementation():
    # random scenes crossed with requirements drawn from other samples
    samples = list(generate_training_set(CFG, 60, 123))
    rng = random.Random(5)
    checked = 0
    for s in samples:
        other = rng.choice(samples)
        for p in other.properties:
            if p.kind != "literal":
                continue
            assert oracle_eval(s.scene, p.text, CFG) == bruteforce_eval(s.scene, p.text)
            checked += 1
    assert checked > 300


def test_generator_deterministic():
    a = [s.to_json_line() for s in generate_training_set(CFG, 20, 77)]
    b = [s.to_json_line() for s in generate_training_set(CFG, 20, 77)]
    assert a == b


def test_generator_yes_fraction_balanced():
    samples = list(generate_training_set(CFG, 1000, 3))
    answers = [p.answer for s in samples for p in s.properties]
    frac = answers.count("yes") / len(answers)
    assert 0.45 <= frac <= 0.55


def test_generator_answers_verified_by_oracle():
    for s in generate_training_set(CFG, 200, 8):
        for p in s.properties:
            assert oracle_eval(s.scene, p.text, CFG) == p.answer


def test_generator_property_count_near_ten():
    for s in generate_training_set(CFG, 50, 4):
        assert CFG.properties_low <= len(s.properties) <= CFG.properties_high


def test_generator_never_emits_reserved_tokens():
    assert not set(CFG.all_words()) & set(RESERVED_TOKENS)
    vocab_words = set(CFG.all_words())
    for s in generate_training_set(CFG, 30, 9):
        for p in s.properties:
            assert set(p.text) <= vocab_words
            assert set(p.reason) <= vocab_words


def test_world_too_small_raises():
    # one object over single-value attributes: every atom is true, so the
    # false half of the sample cannot be filled
    tiny = WorldConfig(
        colors=("red",), sizes=("small",), patterns=("plain",),
        categories=("circle",), min_objects=1, max_objects=1,
        properties_low=12, properties_high=12, kind_weights=(1.0, 0.0, 0.0, 0.0),
    )
    with pytest.raises(WorldTooSmallError):
        list(generate_training_set(tiny, 5, 0))


def test_sample_jsonl_round_trip():
    for s in generate_training_set(CFG, 10, 2):
        assert GeneratedSample.from_json_line(s.to_json_line()) == s


# -- pairs --------------------------------------------------------------------


def test_pair_label_matches_oracle_scores():
    for pair in generate_pair_set(CFG, 30, 21):
        expr = parse(pair.expression)
        s1 = evaluate(expr, [oracle_eval(pair.scene_1, r, CFG) for r in pair.requirements])
        s2 = evaluate(expr, [oracle_eval(pair.scene_2, r, CFG) for r in pair.requirements])
        assert s1 != s2  # ties regenerated
        assert pair.label == ("first" if s1 > s2 else "second")


def test_pair_scenes_share_a_category():
    for pair in generate_pair_set(CFG, 30, 22):
        cats_1 = {o.category for o in pair.scene_1.objects}
        cats_2 = {o.category for o in pair.scene_2.objects}
        assert cats_1 & cats_2


def test_pair_label_flips_under_swap():
    for pair in generate_pair_set(CFG, 20, 23):
        swapped = PairSample(
            pair.scene_2, pair.scene_1, pair.requirements,
            pair.expression, pair.label,
        )
        expr = parse(pair.expression)
        s1 = evaluate(expr, [oracle_eval(swapped.scene_1, r, CFG) for r in pair.requirements])
        s2 = evaluate(expr, [oracle_eval(swapped.scene_2, r, CFG) for r in pair.requirements])
        flipped = "first" if s1 > s2 else "second"
        assert flipped != pair.label


def test_pair_label_balance():
    labels = [p.label for p in generate_pair_set(CFG, 500, 24)]
    frac = labels.count("first") / len(labels)
    assert 0.4 <= frac <= 0.6


def test_pair_requirement_counts():
    for pair in generate_pair_set(CFG, 30, 25):
        assert 2 <= len(pair.requirements) <= 6


def test_pair_jsonl_round_trip():
    for pair in generate_pair_set(CFG, 10, 26):
        assert PairSample.from_json_line(pair.to_json_line()) == pair


# -- dependency samples ---------------------------------------------------------


def test_dependency_samples_shape():
    n_dep = 0
    samples = list(generate_dependency_set(CFG, 200, 31))
    for s in samples:
        assert CFG.properties_low <= len(s.properties) <= CFG.properties_high
        kinds = [p.kind for p in s.properties]
        if "dependency" in kinds:
            n_dep += 1
            assert kinds.count("dependency") == 1
            slot = kinds.index("dependency")
            assert slot >= 1  # the anchor precedes it
            dep = s.properties[slot]
            assert dep.text == tuple(DEPENDENCY_TEXT)
            # gold is the negation of the immediately preceding answer
            assert dep.answer != s.properties[slot - 1].answer
    assert 0.35 <= n_dep / len(samples) <= 0.65  # default 50% mixing


def test_dependency_fraction_configurable():
    samples = list(generate_dependency_set(CFG, 100, 32, dep_fraction=1.0))
    assert all(
        sum(p.kind == "dependency" for p in s.properties) == 1 for s in samples
    )
    # literal slots still carry oracle-consistent answers
    for s in samples[:20]:
        for p in s.properties:
            if p.kind == "literal":
                assert oracle_eval(s.scene, p.text, CFG) == p.answer


# -- scenes --------------------------------------------------------------------


scene_strategy = st.builds(
    Scene,
    st.lists(
        st.builds(
            SceneObject,
            category=st.sampled_from(CFG.categories),
            color=st.sampled_from(CFG.colors),
            size=st.sampled_from(CFG.sizes),
            pattern=st.sampled_from(CFG.patterns),
        ),
        min_size=1,
        max_size=6,
    ).map(tuple),
)


@given(scene_strategy)
@settings(max_examples=50)
def test_scene_word_round_trip(scene):
    assert Scene.from_words(scene.to_words()) == scene


@given(scene_strategy)
@settings(max_examples=50)
def test_scene_serialization_round_trips_through_vocab(scene):
    v = build_vocabulary(CFG)
    words = scene.to_words()
    assert v.decode(v.encode(words)) == words


def test_object_count_bounds():
    for s in generate_training_set(CFG, 50, 33):
        assert CFG.min_objects <= len(s.scene.objects) <= CFG.max_objects
