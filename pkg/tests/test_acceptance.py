"""Release acceptance suite.

Each test is one criterion. Outcomes are collected in ``RESULTS`` and printed
as ``criterion N ... PASS|FAIL`` lines at the end of the pytest run (see the
``pytest_terminal_summary`` hook in conftest.py). Running this file directly
does the same for just these nine tests.
"""

import math
import os
import shutil
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy.special import erf

from rdlab.codec import CodecConfig, decode_image, encode_image_report
from rdlab.coder import CdfTable, rc_decode, rc_encode
from rdlab.ggm import (
    GGMParams,
    build_cdf_table,
    ggm_cdf,
    ggm_pmf_integer,
    ggm_sample,
    rate_bits,
    reg_lower_incomplete_gamma,
)
from rdlab.metrics import RDCurve, bd_rate
from rdlab.scaling import (
    PowerLawFit,
    ScalePoint,
    TrainingCurve,
    compute_pflops,
    evaluate_fit,
    fit_power_law,
    fit_power_law_floor,
    pareto_frontier,
)

DATA = Path(__file__).parent / "data"
RESULTS: dict[int, tuple[str, str, float]] = {}


@contextmanager
def criterion(number, title, budget_s):
    """Record PASS/FAIL for one criterion; exceeding the time budget fails it."""
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
    except BaseException:
        RESULTS[number] = (title, "FAIL", time.perf_counter() - start)
        raise
    RESULTS[number] = (title, "PASS", elapsed)


def summary_lines():
    return [f"criterion {n} {title:<32} {status}  ({secs:.2f}s)"
            for n, (title, status, secs) in sorted(RESULTS.items())]


def test_1_forecast_reproduction():
    with criterion(1, "forecast reproduction", 1.0):
        law = PowerLawFit(gamma=0.7172, alpha_exp=0.0147)
        assert abs(evaluate_fit(law, 2.0) - 0.7099) <= 5e-4
        assert abs(evaluate_fit(law, 10.0) - 0.6933) <= 5e-4


def test_2_fit_recovery():
    with criterion(2, "fit recovery", 1.0):
        xs = [1.0, 2.0, 4.0, 8.0, 16.0]
        fit = fit_power_law([ScalePoint(x, 2.0 * x**-0.5) for x in xs])
        assert abs(fit.gamma - 2.0) <= 1e-9
        assert abs(fit.alpha_exp - 0.5) <= 1e-9
        assert abs(fit.pearson_r + 1.0) <= 1e-9

        rng = np.random.default_rng(2)
        for _ in range(20):
            lo = 10 ** rng.uniform(-1, 1)
            xs = np.geomspace(lo, lo * 10 ** rng.uniform(2, 4), int(rng.integers(6, 16)))
            fit = fit_power_law_floor([ScalePoint(x, 0.5 + x**-0.3) for x in xs])
            assert abs(fit.floor - 0.5) <= 0.01
            assert abs(fit.alpha_exp - 0.3) <= 0.01


def brute_frontier(curves):
    """O(n^2) check: a smoothed point survives if no earlier point is as low."""
    pts = []
    for c in curves:
        best = math.inf
        for comp, loss in c.samples:
            best = min(best, loss)
            pts.append((comp, best))
    keep = set()
    for i, p in enumerate(pts):
        if all(q[1] > p[1] for j, q in enumerate(pts) if q < p or (q == p and j < i)):
            keep.add(p)
    return sorted(keep)


def test_3_pareto_correctness():
    with criterion(3, "pareto correctness", 5.0):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n_curves = int(rng.integers(1, 8))
            curves = []
            for k, idx in enumerate(np.array_split(np.arange(int(rng.integers(1, 201))), n_curves)):
                if len(idx) == 0:
                    continue
                comp = np.unique(np.round(rng.uniform(0.1, 100, len(idx)), 1))
                loss = np.abs(np.round(comp ** -rng.uniform(0.05, 0.5) + rng.normal(0, 0.05, len(comp)), 2)) + 0.01
                curves.append(TrainingCurve(f"m{k}", k + 1.0, tuple(zip(comp, loss))))
            got = [(p.x, p.loss) for p in pareto_frontier(curves)]
            assert got == brute_frontier(curves)


def test_4_ggm_correctness():
    with criterion(4, "ggm correctness", 1.0):
        x = np.linspace(-10, 10, 1000)
        for mu, alpha in [(0.0, 1.0), (0.7, 0.3), (-2.0, 4.0)]:
            laplace = np.where(x < mu, 0.5 * np.exp((x - mu) / alpha), 1 - 0.5 * np.exp(-(x - mu) / alpha))
            assert np.max(np.abs(ggm_cdf(GGMParams(mu, alpha, 1.0), x) - laplace)) <= 1e-9
            gauss = 0.5 * (1 + erf((x - mu) / alpha))
            assert np.max(np.abs(ggm_cdf(GGMParams(mu, alpha, 2.0), x) - gauss)) <= 1e-9
        k = np.arange(-2048, 2048)
        for params in [GGMParams(0, 1, 1.5), GGMParams(0.3, 5, 1.5), GGMParams(0, 0.01, 1.5)]:
            assert abs(ggm_pmf_integer(params, k, floor=False).sum() - 1) <= 1e-6
        assert abs(reg_lower_incomplete_gamma(0.5, 1.0) - 0.8427007929) <= 1e-10


def test_5_coder_lossless_and_tight():
    with criterion(5, "coder losslessness + tightness", 30.0):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            n_tables = int(rng.integers(1, 4))
            tables = []
            for _ in range(n_tables):
                bits = int(rng.integers(1, 17))
                n = int(rng.integers(1, min(1 << bits, 64) + 1))
                cuts = np.sort(rng.choice(np.arange(1, 1 << bits), n - 1, replace=False))
                tables.append(CdfTable(int(rng.integers(-50, 51)), 1 << bits, (0, *cuts.tolist(), 1 << bits)))
            which = rng.integers(0, n_tables, int(rng.integers(0, 40)))
            seq = [tables[w] for w in which]
            syms = [int(rng.integers(t.min_symbol, t.max_symbol + 1)) for t in seq]
            assert rc_decode(rc_encode(syms, seq), seq, len(syms)) == syms

        params = GGMParams(0.0, 1.0, 1.5)
        syms = np.rint(ggm_sample(params, 10**6, rng)).astype(int).tolist()
        table = build_cdf_table(params, -16, 16)
        seq = [table] * len(syms)
        stream = rc_encode(syms, seq)
        ideal = rate_bits(params, syms)
        assert 8 * len(stream) <= ideal + 64 + 0.001 * ideal
        assert rc_decode(stream, seq, len(syms)) == syms


def test_6_codec_pipeline(corpus):
    with criterion(6, "codec pipeline", 120.0):
        assert len(corpus) >= 8
        for img in corpus:
            bpps, psnrs = [], []
            for delta in (0.5, 1, 2, 4, 8, 16):
                rep = encode_image_report(img, CodecConfig(delta=delta))
                # (a) decoder output equals encoder reconstruction
                assert decode_image(rep.encoded.to_bytes()) == rep.reconstruction
                # (b) estimated vs actual bits, per stream
                assert 8 * len(rep.encoded.side_stream) <= rep.side_estimate_bits + 64
                for stream, est in zip(rep.encoded.coeff_streams, rep.coeff_estimate_bits):
                    assert abs(8 * len(stream) - est) <= 0.001 * est + 64
                bpps.append(rep.point.bpp)
                psnrs.append(rep.point.psnr)
                # (d) a context model with rho = 0 codes at the plain rate
                ctx = encode_image_report(img, CodecConfig(delta=delta, context_enabled=True))
                assert abs(ctx.point.bpp - rep.point.bpp) <= 0.001 * rep.point.bpp
            # (c) coarser quantization: fewer bits, no better quality
            assert all(a > b for a, b in zip(bpps, bpps[1:]))
            assert all(a >= b for a, b in zip(psnrs, psnrs[1:]))


def quadrature_bd_rate(anchor, test, n=100_000):
    lo = max(anchor.psnr.min(), test.psnr.min())
    hi = min(anchor.psnr.max(), test.psnr.max())
    grid = np.linspace(lo, hi, n)

    def mean_log_rate(c):
        vals = np.polyval(np.polyfit(c.psnr, np.log10(c.bpp), 3), grid)
        return np.trapezoid(vals, grid) / (hi - lo)

    return (10 ** (mean_log_rate(test) - mean_log_rate(anchor)) - 1) * 100


def test_7_bd_rate_analytic():
    with criterion(7, "bd-rate analytic cases", 5.0):
        anchor = RDCurve.from_arrays([0.12, 0.25, 0.5, 0.9], [29.1, 31.8, 34.6, 37.2])
        assert abs(bd_rate(anchor, anchor)) <= 1e-9
        assert abs(bd_rate(anchor, RDCurve.from_arrays(anchor.bpp * 1.10, anchor.psnr)) - 10.0) <= 1e-9
        rng = np.random.default_rng(7)
        for _ in range(50):
            curves = []
            for _ in range(2):
                q = np.sort(np.concatenate(([rng.uniform(28, 31)], rng.uniform(32, 36, 2), [rng.uniform(37, 40)])))
                curves.append(RDCurve.from_arrays(0.05 * 2 ** ((q - 27) / rng.uniform(4, 6)), q))
            assert abs(bd_rate(*curves) - quadrature_bd_rate(*curves)) <= 1e-6
        # the monotone-spline variant reduces to the same analytic cases
        assert abs(bd_rate(anchor, RDCurve.from_arrays(anchor.bpp * 1.10, anchor.psnr), pchip=True) - 10.0) <= 1e-9


def test_8_compute_accounting():
    with criterion(8, "compute accounting", 1.0):
        hand = 256 * 256 * 32 * 9625.24e3 * 2 * 3 / 1e15
        got = compute_pflops(9625.24, pixels_per_sample=256 * 256, batch=32, steps=1, backward_factor=3)
        assert abs(got - hand) <= 1e-4
        assert abs(got - 0.12113) <= 1e-4


def cli(*args):
    env = {**os.environ, "SOURCE_DATE_EPOCH": "1700000000"}
    proc = subprocess.run([sys.executable, "-m", "rdlab", *map(str, args)],
                          env=env, capture_output=True, timeout=120)
    return proc.returncode, proc.stdout


def test_9_cli_determinism(tmp_path):
    with criterion(9, "cli determinism", 60.0):
        corpus = DATA / "corpus"
        fixtures = DATA / "cli"
        imgs = tmp_path / "imgs"
        imgs.mkdir()
        for name in ("06_camera.pgm", "07_moon.pgm"):
            shutil.copy(corpus / name, imgs / name)
        (tmp_path / "empty").mkdir()
        (tmp_path / "junk.gglc").write_bytes(b"JUNK" + bytes(40))

        def session(d):
            d.mkdir()
            cmds = [
                (0, "encode", corpus / "01_chelsea.ppm", d / "a.gglc", "--delta", "2", "--ycbcr", "--context", "--rho", "0.5"),
                (0, "decode", d / "a.gglc", d / "a.ppm", "--compare", corpus / "01_chelsea.ppm"),
                (0, "rd-sweep", imgs, "--deltas", "1,2,4,8", "--out", d / "rd.csv"),
                (0, "bdrate", fixtures / "anchor.csv", fixtures / "scaled.csv"),
                (0, "scaling", "fit", fixtures / "powerlaw.csv", "--out", d / "fit.svg"),
                (0, "scaling", "frontier", fixtures / "two_curves.csv", "--out", d / "front.csv"),
                (0, "scaling", "forecast", "--targets", "2,10", "--out", d / "fc.svg"),
                (1, "encode", d / "missing.ppm", d / "m.gglc"),
                (2, "encode", corpus / "07_moon.pgm", d / "b.gglc", "--delta", "0.1"),
                (2, "rd-sweep", tmp_path / "empty"),
                (2, "bdrate", fixtures / "anchor.csv", fixtures / "three_points.csv"),
                (3, "decode", tmp_path / "junk.gglc", d / "j.ppm"),
            ]
            outs = []
            for want, *args in cmds:
                code, stdout = cli(*args)
                assert code == want, (args, code)
                outs.append(stdout.replace(str(d).encode(), b"<dir>"))
            files = {p.name: p.read_bytes().replace(str(d).encode(), b"<dir>") for p in sorted(d.iterdir())}
            return outs, files

        first, second = session(tmp_path / "one"), session(tmp_path / "two")
        assert first == second
        assert b"10.000000" in first[0][3]
        assert not any(name.startswith(("m.", "b.", "j.")) for name in first[1])


if __name__ == "__main__":
    code = pytest.main([__file__, "-q"])
    sys.exit(code)
