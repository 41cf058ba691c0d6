import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fmixcert.certify import (ABSTAIN, CERT_HEADER, CertConfig, CertResult, acr, acr_from_csv_rows,
                              acr_from_results, certified_radius, certify_dataset, macr,
                              radius_from_lower_bound, read_cert_csv, sample_counts,
                              smoothed_certify, write_cert_csv)
from fmixcert.errors import DomainError, FormatError, InvalidParameterError
from fmixcert.numerics import Rng, clopper_pearson_lower, std_normal_cdf, std_normal_inv_cdf


def constant(c):
    return lambda x: np.full(len(x), c)


def first_pixel_positive(x):
    # linear rule w.x > 0 with w = e_1
    return (np.asarray(x).reshape(len(x), -1)[:, 0] > 0).astype(int)


def test_radius_examples():
    assert certified_radius(0.25, 0.5, 0.5) == 0.0
    assert abs(certified_radius(0.25, 0.999, 0.001) - 0.77256) < 1e-4
    assert certified_radius(0.5, 0.8, 0.1) == -certified_radius(0.5, 0.1, 0.8)


@pytest.mark.parametrize("pa,pb", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)])
def test_radius_domain(pa, pb):
    with pytest.raises(DomainError):
        certified_radius(0.25, pa, pb)


@given(st.integers(1, 1000), st.data())
def test_radius_monotone_in_hits_and_sigma(n, data):
    k = data.draw(st.integers(0, n - 1))
    lo1 = clopper_pearson_lower(k, n, 0.001)
    lo2 = clopper_pearson_lower(k + 1, n, 0.001)
    if lo1 > 0.5:
        assert radius_from_lower_bound(0.25, lo2) >= radius_from_lower_bound(0.25, lo1)
        assert radius_from_lower_bound(0.5, lo1) >= radius_from_lower_bound(0.25, lo1)


def test_config_defaults_and_validation():
    cfg = CertConfig()
    assert (cfg.n0, cfg.n, cfg.alpha, cfg.sigma) == (100, 100_000, 0.001, 0.25)
    for kw in (dict(sigma=0), dict(n=0), dict(n0=0), dict(alpha=1.0), dict(batch_size=0)):
        with pytest.raises(InvalidParameterError):
            CertConfig(**kw)


def test_constant_model_closed_form():
    cfg = CertConfig(n0=10, n=500, alpha=0.001)
    res = smoothed_certify(constant(2), np.zeros((2, 2, 1)), cfg, Rng(0))
    assert res.prediction == 2 and res.count == 500
    assert abs(res.radius - 0.25 * std_normal_inv_cdf(0.001 ** (1 / 500))) < 1e-12


def test_bisecting_model_abstains():
    cfg = CertConfig(n0=100, n=1000, alpha=0.001)
    abst = [smoothed_certify(first_pixel_positive, np.zeros((1, 2, 1)), cfg, Rng(s)).abstained
            for s in range(40)]
    assert np.mean(abst) >= 0.9


def test_linear_model_hit_rate_within_binomial_band():
    d, sigma, n = 0.2, 0.25, 2000
    p = std_normal_cdf(d / sigma)
    sd = math.sqrt(n * p * (1 - p))
    x = np.array([[[d], [0.0]]])
    for s in range(100):
        k = sample_counts(first_pixel_positive, x, n, sigma, Rng(s), batch_size=512)[1]
        assert abs(k - n * p) <= 4 * sd


def test_abstain_has_zero_radius():
    res = smoothed_certify(first_pixel_positive, np.zeros((1, 2, 1)), CertConfig(n=200), Rng(0))
    assert res.prediction == ABSTAIN and res.radius == 0.0 and res.abstained


def test_counts_independent_of_batch_size():
    x = np.array([[[0.1], [0.0]]])
    a = sample_counts(first_pixel_positive, x, 3000, 0.25, Rng(4), batch_size=1)
    b = sample_counts(first_pixel_positive, x, 3000, 0.25, Rng(4), batch_size=4096)
    assert np.array_equal(a, b)


def test_dataset_certification_thread_independent():
    imgs = np.random.default_rng(0).normal(scale=0.3, size=(9, 1, 2, 1))
    cfg = CertConfig(n0=20, n=300)
    a = certify_dataset(first_pixel_positive, imgs, cfg, Rng(1), threads=1)
    b = certify_dataset(first_pixel_positive, imgs, cfg, Rng(1), threads=4)
    assert a == b


def test_acr_examples():
    assert acr_from_results([CertResult(ABSTAIN, 0.0, 0.3)] * 3, [0, 1, 0]) == 0.0
    assert acr_from_results([CertResult(1, 0.4, 0.9)], [1]) == 0.4
    assert acr_from_results([CertResult(1, 0.4, 0.9), CertResult(0, 0.7, 0.99)], [1, 1]) == 0.2
    with pytest.raises(ValueError):
        acr_from_results([], [])


def test_acr_constant_model_fraction():
    cfg = CertConfig(n0=10, n=400, alpha=0.001)
    labels = np.array([1, 0, 1, 1, 2, 1, 0, 1])
    imgs = np.zeros((8, 2, 2, 1))
    q = np.mean(labels == 1)
    expected = q * 0.25 * std_normal_inv_cdf(0.001 ** (1 / 400))
    assert abs(acr(constant(1), imgs, labels, cfg, Rng(0)) - expected) < 1e-12
    with pytest.raises(ValueError):
        acr(constant(1), np.zeros((0, 2, 2, 1)), [], cfg, Rng(0))


def test_macr():
    assert macr([0.3]) == 0.3
    assert abs(macr([0.2, 0.4]) - 0.3) < 1e-15
    vals = list(np.random.default_rng(0).uniform(size=15))
    total = 0.0
    for v in vals:
        total += v
    assert abs(macr(vals) - total / 15) < 1e-15
    with pytest.raises(ValueError):
        macr([])


def test_cert_csv_round_trip(tmp_path):
    res = [CertResult(1, 0.1234567, 0.7), CertResult(ABSTAIN, 0.0, 0.4), CertResult(0, 0.5, 0.9)]
    write_cert_csv(tmp_path / "c.csv", [0, 1, 2], [1, 1, 2], res)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == ",".join(CERT_HEADER)
    assert lines[1] == "0,1,1,0.7,0.123457,1"
    rows = read_cert_csv(tmp_path / "c.csv")
    assert [r["correct"] for r in rows] == [1, 0, 0]
    assert abs(acr_from_csv_rows(rows) - 0.123457 / 3) < 1e-12


def test_cert_csv_malformed(tmp_path):
    (tmp_path / "a.csv").write_text("index,label\n0,1\n")
    with pytest.raises(FormatError):
        read_cert_csv(tmp_path / "a.csv")
    (tmp_path / "b.csv").write_text(",".join(CERT_HEADER) + "\n0,1,x,0.5,0.1,1\n")
    with pytest.raises(FormatError):
        read_cert_csv(tmp_path / "b.csv")
