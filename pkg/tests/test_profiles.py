from __future__ import annotations

import pytest

from reldetr.profiles import DEFAULT_PROFILE, get_profile, list_profiles, profile_names


def test_profiles_are_listed_by_name() -> None:
    assert profile_names() == ["gradcheck", "paper", "toy"]
    assert [profile.name for profile in list_profiles()] == profile_names()
    assert DEFAULT_PROFILE in profile_names()


def test_paper_profile_values() -> None:
    paper = get_profile("paper")
    assert paper.decoder.layers == 6
    assert paper.decoder.d_model == 256
    assert paper.decoder.num_matching == 900
    assert paper.decoder.num_hybrid == 1500
    assert paper.decoder.repeat == 6
    assert paper.relenc.d_re == 16
    assert paper.relenc.temperature == 10000.0
    assert paper.relenc.scale == 100.0
    assert paper.relenc.heads == paper.decoder.heads == 8


def test_profile_heads_agree() -> None:
    for profile in list_profiles():
        assert profile.relenc.heads == profile.decoder.heads


def test_get_profile_normalizes_and_rejects() -> None:
    assert get_profile(" TOY ").name == "toy"
    with pytest.raises(ValueError, match="Unknown profile"):
        get_profile("huge")


def test_profile_as_dict_sections() -> None:
    payload = get_profile("toy").as_dict()
    assert set(payload) == {"profile", "relenc", "decoder", "memory", "loss", "train"}
    assert payload["loss"]["classification"] == "quality_focal"
