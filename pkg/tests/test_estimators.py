import numpy as np
import pytest
from sklearn.base import clone

from heightlab.estimators import ExactGibbs, HeightChain


def test_params_roundtrip_and_clone():
    est = ExactGibbs(box=(2, 1), beta=0.5, M=3)
    assert est.get_params()["beta"] == 0.5
    c = clone(est).set_params(M=2)
    assert c.M == 2 and est.M == 3


def test_exact_gibbs_fit():
    est = ExactGibbs(box=(2, 1), beta=1.0, M=2).fit()
    assert est.root_marginal_.probs.sum() == pytest.approx(1)
    X = est.table_.configs
    assert est.predict_proba(X).sum() == pytest.approx(1)
    assert est.score(X[:1]) == pytest.approx(np.log(est.predict_proba(X[:1])[0]))


def test_height_chain_fit_agrees_with_exact():
    exact = ExactGibbs(n=1, beta=1.0, M=4).fit().second_moment_
    ch = HeightChain(n=1, beta=1.0, M=4, seed=2, sweeps=40_000).fit()
    assert abs(ch.second_moment_ - exact) < 4 * ch.stderr_
