"""Shared fixture towers used across the suite."""

import pytest

from r1lab import CutRule, Recipe, SpacerRule, Tower, example52_recipe


def odometer_recipe(depth: int) -> Recipe:
    return Recipe("odometer", CutRule.constant(2), SpacerRule.zero(), depth)


def chacon_recipe(depth: int) -> Recipe:
    return Recipe("chacon", CutRule.constant(3), SpacerRule.from_pattern([0, 1, 0]), depth)


def staircase_recipe(cuts, depth: int) -> Recipe:
    return Recipe("staircase", CutRule.explicit(cuts), SpacerRule.staircase(), depth)


def ornstein_recipe(depth: int, seed: int = 2026) -> Recipe:
    return Recipe(
        "ornstein", CutRule.affine(1, 2),
        SpacerRule.ornstein(CutRule.affine(1, 2), seed), depth,
    )


@pytest.fixture(scope="session")
def odometer6() -> Tower:
    return Tower.build(odometer_recipe(6))


@pytest.fixture(scope="session")
def odometer4() -> Tower:
    return Tower.build(odometer_recipe(4))


@pytest.fixture(scope="session")
def chacon6() -> Tower:
    return Tower.build(chacon_recipe(6))


@pytest.fixture(scope="session")
def staircase5() -> Tower:
    return Tower.build(staircase_recipe([2, 3, 4, 5, 6], 5))


@pytest.fixture(scope="session")
def example52_4() -> Tower:
    return Tower.build(example52_recipe(4))


@pytest.fixture(scope="session")
def ornstein4() -> Tower:
    return Tower.build(ornstein_recipe(4))


@pytest.fixture(scope="session")
def all_fixtures(odometer6, chacon6, staircase5, example52_4, ornstein4):
    return {
        "odometer": odometer6,
        "chacon": chacon6,
        "staircase": staircase5,
        "example52": example52_4,
        "ornstein": ornstein4,
    }


def evens_of(tower: Tower):
    """The even levels of the deepest column of a zero-spacer doubling tower."""
    return tower.refine(tower.level_set(1, [0]))
