import math
import os

import pytest

import crftrack

SPEC = """num_frames=80
num_targets=6
camera_pan=1.5,0
drift_event=20,0,1
drift_event=50,2,3
"""


def default_params():
    return crftrack.ModelParams.load(os.environ["CRFTRACK_DEFAULT_PARAMS"])


def test_default_parameters():
    p = default_params()
    assert (p.theta_u, p.theta_b) == (0.98, 0.12)
    assert (p.alpha1, p.alpha2, p.beta) == (1.05, 1.20, 10.80)
    assert p.node_budget == 10
    again = crftrack.ModelParams.from_text(p.to_text())
    assert again.beta == p.beta


def test_inference_on_a_pair():
    g = crftrack.FactorGraph(2)
    g.set_unary(0, [0.0, 1.0])
    g.add_pair(0, 1, [0.0, 0.0, 0.0, 2.0])
    exact = crftrack.exact_inference(g)
    config = crftrack.BpConfig()
    config.tolerance = 1e-13
    config.max_iterations = 2000
    bp = crftrack.sum_product(g, config)
    for a, b in zip(exact["marginals"], bp["marginals"]):
        assert a == pytest.approx(b, abs=1e-9)
    z = 1 + 1 + math.exp(-1) + math.exp(-3)
    assert exact["log_partition"] == pytest.approx(math.log(z))
    assert crftrack.max_product(g)["map"] == exact["map"]
    assert bp["log_partition"] is None


def test_capacity_error():
    with pytest.raises(crftrack.CapacityError):
        crftrack.exact_inference(crftrack.FactorGraph(21))


def test_track_and_evaluate():
    s = crftrack.generate_scenario(SPEC, seed=4)
    assert s == crftrack.generate_scenario(SPEC, seed=4)
    p = default_params()
    base = crftrack.track(s["hypotheses"], s["seqinfo"], p, "threshold", "loopy-bp")
    ours = crftrack.track(s["hypotheses"], s["seqinfo"], p, "crf", "exact")
    b = crftrack.evaluate(s["ground_truth"], base)
    o = crftrack.evaluate(s["ground_truth"], ours)
    assert o["IDS"] < b["IDS"]
    assert o["IDF1"] > b["IDF1"]
    for r in (b, o):
        assert r["MOTA"] == pytest.approx(1 - (r["FP"] + r["FN"] + r["IDS"]) / r["GT"])


def test_dataset_and_training():
    s = crftrack.generate_scenario(SPEC, seed=1)
    p = default_params()
    base = crftrack.track(s["hypotheses"], s["seqinfo"], p, "threshold", "exact")
    data = crftrack.build_dataset("seq", base, s["ground_truth"], s["seqinfo"], p)
    assert "negative" in data
    assert crftrack.check_gradients(p, data) <= 1e-4
    init = default_params()
    init.theta_u = 0.5
    init.theta_b = 0.5
    trained, trace = crftrack.train(init, data, epochs=5)
    assert len(trace) == 6
    assert trace[-1] > trace[0]
    assert crftrack.log_likelihood(trained, data) == pytest.approx(trace[-1])


def test_single_frame():
    frame = """context 1920 1080 30
window 1 10 0.9 400 300 50 120 402 300 50 120 404 300 50 120
window 2 10 0.3 900 300 50 120 902 300 50 120 904 300 50 120
"""
    labels = crftrack.infer(frame, default_params(), "exact")
    assert labels == {1: 1, 2: 0}


def test_format_error():
    with pytest.raises(crftrack.FormatError):
        crftrack.evaluate("1,1,10,20,0,60,0.9,-1,-1,-1\n", "")
