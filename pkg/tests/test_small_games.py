from fractions import Fraction

import pytest

from oracles import two_card_policy_value
from stopping_lab.small_games import optimal_small_n_value, pairing_value, rank_pairings


def test_pairing_counts():
    assert len(list(rank_pairings(1))) == 1
    assert len(list(rank_pairings(2))) == 3
    assert len(list(rank_pairings(3))) == 15


def test_single_card_is_always_won():
    assert optimal_small_n_value(1) == 1


@pytest.mark.parametrize("pairing", list(rank_pairings(2)))
def test_two_cards_match_policy_enumeration(pairing):
    assert pairing_value(pairing) == two_card_policy_value(pairing)


def test_two_and_three_card_values():
    value, per_pairing = optimal_small_n_value(2, return_all=True)
    assert value == Fraction(3, 4)
    assert per_pairing[((0, 2), (1, 3))] == Fraction(3, 4)
    assert optimal_small_n_value(3) >= Fraction(1, 2)


def test_size_guard():
    with pytest.raises(ValueError):
        optimal_small_n_value(4)
