"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test records a one-line verdict; the lines are printed together when
the module finishes, whatever the outcome.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from helpers import SR, clip, make_asset, tone
from oracles import brute_force_dual, brute_glcm, movement_oracle, moving_square
from microvid import audioaffect as aa
from microvid import imgproc as ip
from microvid import sensory as se
from microvid import visaffect as va
from microvid.analysis import mpc, pearson, rank_features
from microvid.cli import main
from microvid.groups import Group
from microvid.ingest import LabeledDataset
from microvid.learn import expand_instances, fuse_median, predict_video, split_dataset
from microvid.novelty import AttributeSpace
from microvid.svm import KernelSVC, rbf_kernel, smo

VERDICTS = {}


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    writer = request.config.pluginmanager.get_plugin("terminalreporter")
    lines = [VERDICTS[k] for k in sorted(VERDICTS)]
    if writer is not None:
        writer.write_line("")
        for line in lines:
            writer.write_line(line)
    else:  # pragma: no cover
        print("\n".join(lines))


@contextmanager
def criterion(number, title, budget=None):
    start = time.perf_counter()
    notes = []
    try:
        yield notes
    except BaseException as exc:
        VERDICTS[number] = f"criterion {number:2d} FAIL  {title}: {type(exc).__name__} {exc}".splitlines()[0]
        raise
    elapsed = time.perf_counter() - start
    extra = f" ({'; '.join(notes)})" if notes else ""
    if budget is not None and elapsed >= budget:
        VERDICTS[number] = f"criterion {number:2d} FAIL  {title}: {elapsed:.1f} s over the {budget} s budget"
        pytest.fail(f"took {elapsed:.1f} s, budget {budget} s")
    VERDICTS[number] = f"criterion {number:2d} PASS  {title} [{elapsed:.2f} s]{extra}"


def gray_frames(values, size=16):
    return np.stack([np.full((size, size), v, dtype=np.float64) for v in values])


def test_01_stop_motion():
    with criterion(1, "stop motion fixtures", budget=1):
        n = 30
        assert se.stop_motion(make_asset(gray_frames([0.5] * n))) == n
        assert se.stop_motion(make_asset(np.random.default_rng(0).random((n, 16, 16)))) == 1.0
        assert se.stop_motion(make_asset(gray_frames([0.2 + 0.05 * (i // 3) for i in range(12)]))) == 3.0


def test_02_movement():
    with criterion(2, "movement vs termwise oracle", budget=5) as notes:
        asset = make_asset(moving_square())
        err = abs(se.movement(asset) - movement_oracle(asset))
        notes.append(f"abs error {err:.1e}")
        assert err < 1e-9


def test_03_loop():
    with criterion(3, "loop distance"):
        f = np.random.default_rng(1).random((4, 16, 16))
        f[-1] = f[0]
        assert se.loop_distance(make_asset(f)) == 0.0
        assert se.loop_distance(make_asset(gray_frames([0.0, 0.3, 1.0]))) == 1.0


def test_04_frame_invariants():
    with criterion(4, "invariants over 100 random frames", budget=30):
        rng = np.random.default_rng(2)
        spectrum = np.zeros((64, 64))
        for _ in range(100):
            h, w = rng.integers(8, 80, size=2)
            frame = rng.random((h, w, 3)) ** rng.uniform(0.3, 3)
            assert abs(ip.spectral_residual_saliency(frame).sum() - 1.0) <= 1e-9
            assert abs(va.color_names(frame).sum() - 1.0) <= 1e-9
            patch = ip.to_gray(frame[:8, :8])
            q = ip.quantize(patch)
            for off in ((1, 0), (0, 1)):
                ours = ip.haralick(ip.glcm(patch, off))
                ref = ip.haralick(brute_glcm(q, *off, 32))
                assert all(abs(ours[k] - ref[k]) <= 1e-9 for k in ours)
            v = se.composition(frame, spectrum)
            assert np.all((v[:12] >= 0) & (v[:12] <= 1))
            assert 0 <= v[12] <= 1 and v[13] >= 0 and v[14] >= 0
            assert np.all((v[15:] >= 0) & (v[15:] <= 1))


def test_05_audio():
    with criterion(5, "audio suite", budget=30) as notes:
        assert abs(aa.total_energy(clip(tone(440, amp=1.0))) - 0.5) <= 1e-6
        assert abs(aa.zero_crossing_rate(clip(tone(440, amp=1.0))) - 880) <= 1
        major = aa.mode_estimate(clip(tone([261.63, 329.63, 392.0])))
        minor = aa.mode_estimate(clip(tone([220.0, 261.63, 329.63])))
        notes.append(f"mode {major:+.3f}/{minor:+.3f}")
        assert major > 0 > minor
        assert aa.roughness(clip(tone([440, 466.16]))) > aa.roughness(clip(tone([440, 880])))
        x = np.zeros(6 * SR)
        x[(np.arange(0.25, 6, 0.5) * SR).astype(int)] = 1.0
        rate = aa.onset_rate(clip(x))
        notes.append(f"onsets {rate:.2f}/s")
        assert abs(rate - 2.0) <= 0.2


def _blobs(n, std, seed):
    rng = np.random.default_rng(0)
    cells = rng.choice(125, size=10, replace=False)
    gen = np.array(np.unravel_index(cells, (5, 5, 5))).T * 10.0
    noise = np.random.default_rng(seed).standard_normal((n, 3))
    return gen[np.arange(n) % 10] + std * noise, gen


def _matched(a, b):
    d = cdist(a, b)
    r, c = linear_sum_assignment(d)
    return d[r, c].max(), c


def test_06_novelty():
    with criterion(6, "novelty clustering", budget=60) as notes:
        X, gen = _blobs(200, 0.01, 1)
        space = AttributeSpace().fit(X)
        err, _ = _matched(space.centers_in_input_space, gen)
        notes.append(f"centroid error {err:.3f}")
        assert err < 0.05
        dist = space.transform(space.centers_in_input_space[:1])[0]
        assert abs(dist[0]) < 1e-9
        small = AttributeSpace().fit(_blobs(500, 0.2, 2)[0])
        large = AttributeSpace().fit(_blobs(2000, 0.2, 3)[0])
        err, cols = _matched(small.centers_in_input_space, large.centers_in_input_space)
        drift = np.abs(small.transform(gen) - large.transform(gen)[:, cols]).max()
        notes.append(f"500 vs 2000 centroid gap {err:.3f}, novelty gap {drift:.3f}")
        assert err < 0.1 and drift < 0.1


def test_07_learning():
    with criterion(7, "svm solutions", budget=60) as notes:
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(-2, 0.4, (50, 2)), rng.normal(2, 0.4, (50, 2))])
        y = np.repeat([0, 1], 50)
        assert KernelSVC().fit(X, y).score(X, y) == 1.0
        centers = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]]) * 2.0
        Xx = np.vstack([c + 0.4 * rng.standard_normal((50, 2)) for c in centers])
        yx = np.repeat([1, 1, 0, 0], 50)
        xor = KernelSVC().fit(Xx, yx).score(Xx, yx)
        notes.append(f"xor {xor:.3f}")
        assert xor >= 0.95
        X10 = rng.standard_normal((10, 2))
        y10 = np.where(X10[:, 0] + 0.5 * rng.standard_normal(10) > 0, 1.0, -1.0)
        K = rbf_kernel(X10, X10, 0.5)
        alpha, rho, _ = smo(K, y10, 1.0, tol=1e-6)
        ref_alpha, ref_rho = brute_force_dual(K, y10, 1.0)
        grid = rng.uniform(-3, 3, (200, 2))
        Kg = rbf_kernel(grid, X10, 0.5)
        gap = np.abs((Kg @ (alpha * y10) - rho) - (Kg @ (ref_alpha * y10) - ref_rho)).max()
        notes.append(f"dual gap {gap:.1e}")
        assert gap < 1e-3


class _Votes:
    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def predict(self, rows):
        return self.labels

    def score_instances(self, rows):
        return np.full(len(self.labels), 0.5)


def test_08_protocol():
    with criterion(8, "protocol fidelity"):
        entries = tuple((f"p{i}", True) for i in range(471)) + tuple((f"n{i}", False) for i in range(500))
        plan = split_dataset(LabeledDataset(1.0, entries), 0)
        assert (len(plan.train_pos), len(plan.test_pos), len(plan.train_neg), len(plan.test_neg)) == (314, 157, 314, 157)
        ids = [f"v{i}" for i in range(10)]
        X, _ = expand_instances({v: np.zeros((12, 4)) for v in ids}, ids, {v: 1 for v in ids})
        assert X.shape[0] == 120
        X, _ = expand_instances({v: np.zeros(6) for v in ids}, ids, {v: 1 for v in ids})
        assert X.shape[0] == 10
        assert predict_video(_Votes([1] * 7 + [0] * 5), np.zeros((12, 1)))[0] == 1
        assert predict_video(_Votes([1] * 6 + [0] * 6), np.zeros((12, 1)))[0] == 1
        assert predict_video(_Votes([0] * 12), np.zeros((12, 1))) == (0, 0.5)
        assert fuse_median([0.2, 0.9, 0.6]) == (0.6, 1)
        fused, label = fuse_median([0.2, 0.4])
        assert abs(fused - 0.3) < 1e-15 and label == 0
        assert fuse_median([0.42]) == (0.42, 0)


def test_09_analysis():
    with criterion(9, "analysis identities") as notes:
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(5, 80))
            x = rng.standard_normal(n)
            y = rng.integers(0, 2, n)
            y[:2] = (0, 1)
            worst = max(worst, abs(mpc(x, y) - abs(pearson(x, y))))
        notes.append(f"max |mpc - |rho|| {worst:.1e}")
        assert worst <= 1e-12
        y = np.repeat([0, 1], 2500)
        z = (y - y.mean()) / y.std()
        cols = [r * z + np.sqrt(1 - r * r) * rng.standard_normal(y.size) for r in (0.1, 0.3, 0.2)]
        report = rank_features({Group.FILMMAKING: np.column_stack(cols)}, y, {Group.FILMMAKING: ["r10", "r30", "r20"]})
        assert [n for n, _ in report.feature_rho] == ["r30", "r20", "r10"]


FAMILIES = ("Sensory", "Emotional", "All Aesthetic Value", "Novelty")


def test_10_end_to_end(tmp_path):
    with criterion(10, "synthetic end-to-end experiment", budget=600) as notes:
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data), "--seed", "0"]) == 0
        assert main(["extract", "--manifest", str(data / "background.jsonl"), "--out", str(tmp_path / "bg")]) == 0
        assert main(["novelty-fit", "--features", str(tmp_path / "bg"), "--out", str(tmp_path / "novelty.json")]) == 0
        assert main(["extract", "--manifest", str(data / "manifest.jsonl"), "--novelty-model",
                     str(tmp_path / "novelty.json"), "--out", str(tmp_path / "feat")]) == 0
        assert main(["evaluate", "--features", str(tmp_path / "feat"), "--annotations", str(data / "annotations.csv"),
                     "--threshold", "60", "--seed", "0", "--out", str(tmp_path / "report")]) == 0
        doc = json.loads((tmp_path / "report" / "report.json").read_text())["D-60"]
        fusion = doc["fusion"]
        combined = fusion["Novelty + Aesthetic Value"]
        notes.append(f"fused {combined:.4f}; " + ", ".join(f"{k} {fusion[k]:.4f}" for k in FAMILIES))
        assert all(acc > 0.5 for acc in doc["groups"].values())
        assert combined >= 0.90
        assert all(combined >= fusion[k] for k in FAMILIES)
