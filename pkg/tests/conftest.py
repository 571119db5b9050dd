import numpy as np
import pytest

from charlev import Alphabet, CharEncoder, params_for_alphabet


@pytest.fixture(scope="session")
def tiny_alphabet():
    return Alphabet(tuple("abcdefghij "))


@pytest.fixture(scope="session")
def tiny_encoder(tiny_alphabet):
    params = params_for_alphabet(tiny_alphabet, seed=7, d_e=8, m=64, d_h=16, h=12)
    return CharEncoder(params, tiny_alphabet)


def random_sentence(rng: np.random.Generator, alphabet: Alphabet, max_len: int = 12) -> str:
    length = int(rng.integers(0, max_len + 1))
    return "".join(alphabet.chars[i] for i in rng.integers(0, len(alphabet), size=length))
