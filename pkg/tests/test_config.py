import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttifair.config import (
    ConfigError,
    config_from_dict,
    load_config,
    save_config,
    validate_config,
)

from conftest import paper_config_dict


def test_uniform_fair_distribution_is_exactly_one_over_n(paper_config):
    probs = paper_config.fair_distribution.probs_for(paper_config.attribute.values)
    assert probs == tuple([1 / 6] * 6)


def test_paper_thresholds_accepted_verbatim(paper_config):
    t = paper_config.thresholds
    assert (t.diversity_min, t.inclusion_min, t.parity_epsilon) == (0.70, 0.55, 0.15)


def test_explicit_weights_not_summing_to_one_rejected():
    d = paper_config_dict(
        fair_distribution={
            "kind": "explicit",
            "weights": {r: 0.15 for r in paper_config_dict()["attribute"]["values"]},
        }
    )
    with pytest.raises(ConfigError, match="sum to 1"):
        config_from_dict(d)


def test_explicit_weights_accepted_and_used():
    values = paper_config_dict()["attribute"]["values"]
    weights = {r: w for r, w in zip(values, (0.3, 0.2, 0.2, 0.1, 0.1, 0.1))}
    cfg = config_from_dict(paper_config_dict(fair_distribution={"kind": "explicit", "weights": weights}))
    assert cfg.fair_distribution.probs_for(cfg.attribute.values) == (0.3, 0.2, 0.2, 0.1, 0.1, 0.1)


def test_validate_paper_config_clean(paper_config):
    assert validate_config(paper_config) == []


def test_numeric_feature_min_equal_max_is_violation(paper_config):
    d = paper_config_dict()
    d["features"][1]["range"] = [30, 30]
    with pytest.raises(ConfigError, match="age.*min < max"):
        config_from_dict(d)


def test_single_value_attribute_is_violation():
    d = paper_config_dict(attribute={"name": "race", "values": ["Caucasian"]})
    with pytest.raises(ConfigError, match="at least 2"):
        config_from_dict(d)


def test_load_save_round_trip(tmp_path, paper_config):
    path = tmp_path / "audit.yaml"
    save_config(paper_config, path)
    assert load_config(path) == paper_config


def test_load_config_accepts_json(tmp_path):
    path = tmp_path / "audit.json"
    path.write_text(json.dumps(paper_config_dict()))
    cfg = load_config(path)
    assert cfg.queries[0] == "doctor"


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_malformed_yaml_is_config_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("queries: [unclosed\n  - nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_violations_name_field_and_rule():
    with pytest.raises(ConfigError) as exc_info:
        config_from_dict({"queries": [], "attribute": {"name": "race", "values": ["a"]}})
    messages = exc_info.value.violations
    assert any(m.startswith("queries:") for m in messages)
    assert any(m.startswith("attribute.values:") for m in messages)


_tree = st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(max_size=8),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20,
)


@settings(max_examples=200, deadline=None)
@given(_tree)
def test_validation_is_total_over_arbitrary_trees(raw):
    # Any malformed input must surface as ConfigError, never as a crash.
    try:
        cfg = config_from_dict(raw)
    except ConfigError:
        return
    assert validate_config(cfg) == []


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.sampled_from(["queries", "attribute", "features", "thresholds", "seeds", "personas", "master_seed", "fair_distribution"]), _tree, max_size=6))
def test_validation_is_total_over_plausible_keys(raw):
    try:
        config_from_dict(raw)
    except ConfigError:
        pass
