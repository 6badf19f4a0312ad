import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evag.experiment import ExperimentConfig, simulate
from evag.netsim import DELIVER, LinkSpec, SimNetwork, build_complete, latency_stats, send, step


class Recorder:
    def __init__(self):
        self.events = []

    def handle(self, net, ev):
        self.events.append((net.clock, ev.kind, ev.source, ev.msg_class, ev.payload))


@pytest.mark.parametrize("n,links", [(1, 0), (4, 6), (8, 28)])
def test_complete_graph_link_count(n, links):
    net = build_complete(n, 0.002, 125e6)
    assert len(net.links) == links
    if n > 1:
        assert net.neighbours(0) == list(range(1, n))


def test_zero_nodes_rejected():
    with pytest.raises(ValueError):
        build_complete(0, 0.002, 125e6)


@pytest.mark.parametrize("kw", [{"latency": -1.0, "bandwidth": 1.0}, {"latency": 0.0, "bandwidth": 0.0},
                                {"latency": 0.0, "bandwidth": 1.0, "drop_probability": 2.0}])
def test_link_spec_validation(kw):
    with pytest.raises(ValueError):
        LinkSpec(**kw)


def test_delivery_formula():
    net = build_complete(2, 0.002, 1.25e8)
    arrival = send(net, 0, 1, bytes(47), msg_class="migrant")
    assert arrival == 0.002 + 47 / 1.25e8
    step(net)
    assert net.clock == arrival
    mean, sd, count = latency_stats(net, "migrant")
    assert mean == pytest.approx(0.002 + 47 / 1.25e8, abs=1e-15) and sd == 0.0 and count == 1


def test_degenerate_link():
    net = build_complete(2, 0.0, 1e300)
    assert send(net, 0, 1, bytes(100)) == pytest.approx(0.0, abs=1e-290)


def test_same_instant_fifo():
    net = build_complete(2, 0.001, 1e9)
    rec = Recorder()
    net.attach(1, rec)
    for i in range(5):
        send(net, 0, 1, bytes([i]) * 4)
    net.run()
    assert [e[4][0] for e in rec.events] == [0, 1, 2, 3, 4]


def test_send_errors():
    net = SimNetwork(3)
    net.set_link(0, 1, LinkSpec(0.001, 1e6))
    with pytest.raises(ValueError):
        send(net, 1, 1, b"x")
    with pytest.raises(KeyError):
        send(net, 0, 2, b"x")
    with pytest.raises(ValueError):
        send(net, 0, 1, b"x", now=5.0)
    with pytest.raises(ValueError):
        net.set_link(0, 0, LinkSpec(0.0, 1.0))


def test_empty_queue_is_exhausted():
    net = SimNetwork(1)
    assert step(net) is None and net.run() == 0


def test_timers_in_order():
    net = SimNetwork(1)
    rec = Recorder()
    net.attach(0, rec)
    net.schedule(0, 2.0, "b")
    net.schedule(0, 1.0, "a")
    net.run()
    assert [(t, c) for t, _, _, c, _ in rec.events] == [(1.0, "a"), (2.0, "b")]
    assert net.clock == 2.0
    with pytest.raises(ValueError):
        net.schedule(0, -1.0, "past")


def test_run_limits():
    net = SimNetwork(1)
    for i in range(10):
        net.schedule(0, float(i), "t")
    assert net.run(until=4.5) == 5
    assert net.run(max_events=2) == 2
    assert net.run(stop=lambda: net.clock >= 8.0) == 2
    assert net.pending == 1


def test_latency_stats_examples():
    net = SimNetwork(1)
    with pytest.raises(ValueError):
        latency_stats(net, "migrant")
    net.metrics["a"] = [0.004] * 5
    assert latency_stats(net, "a") == (pytest.approx(0.004), 0.0, 5)
    net.metrics["b"] = [0.003, 0.005]
    assert latency_stats(net, "b")[0] == pytest.approx(0.004)


def test_heterogeneous_override():
    net = build_complete(3, 0.001, 1e9)
    net.set_link(2, 0, LinkSpec(0.05, 1e9))
    assert net.link(0, 2).latency == 0.05 and net.link(0, 1).latency == 0.001


def test_fault_injection_conserves_messages():
    net = SimNetwork(2, seed=4)
    net.set_link(0, 1, LinkSpec(0.001, 1e9, drop_probability=0.3))
    results = [send(net, 0, 1, b"abc") for _ in range(2000)]
    net.run()
    assert net.sent == 2000 == net.delivered + net.dropped
    assert net.dropped == results.count(None)
    assert 450 < net.dropped < 750


class Chatter:
    """Bounces each message to a random peer a bounded number of times."""

    def __init__(self, node, n, rng):
        self.node, self.n, self.rng = node, n, rng

    def handle(self, net, ev):
        hops = ev.payload[0] if ev.kind == DELIVER else 12
        if hops == 0:
            return
        dst = int(self.rng.integers(self.n - 1))
        dst += dst >= self.node
        send(net, self.node, dst, bytes([hops - 1]) * int(self.rng.integers(1, 200)))
        if ev.kind != DELIVER and self.rng.random() < 0.5:
            net.schedule(self.node, float(self.rng.random()), "again")


def chatter_run(n, seed, drop=0.0):
    net = SimNetwork(n, seed=seed, record_log=True)
    rng = np.random.default_rng(seed)
    for a in range(n):
        for b in range(a + 1, n):
            net.set_link(a, b, LinkSpec(float(rng.uniform(0, 0.01)), float(rng.uniform(1e5, 1e8)), drop))
    for i in range(n):
        net.attach(i, Chatter(i, n, np.random.default_rng([seed, i])))
        net.schedule(i, float(rng.random()), "start")
    net.run()
    return net


@settings(max_examples=25)
@given(st.integers(2, 6), st.integers(0, 10_000), st.sampled_from([0.0, 0.2]))
def test_simulator_invariants(n, seed, drop):
    net = chatter_run(n, seed, drop)
    times = [t for t, kind, *_ in net.log if kind != "send" and kind != "drop"]
    assert times == sorted(times)
    assert net.sent == net.delivered + net.dropped
    # causality and metric soundness against the log
    sends = [e for e in net.log if e[1] == "send"]
    delivers = [e for e in net.log if e[1] == DELIVER]
    assert len(delivers) == net.delivered
    transits = net.metrics.get("data", [])
    assert len(transits) == net.delivered
    for tr, d in zip(transits, delivers):
        spec = net.link(d[2], d[3])
        assert tr >= spec.latency
        assert tr == pytest.approx(spec.transit(d[5]), rel=1e-9, abs=1e-12)
    assert len(sends) == net.sent


def test_event_log_is_reproducible(tmp_path):
    a, b = chatter_run(5, 3), chatter_run(5, 3)
    a.export_log(tmp_path / "a.log")
    b.export_log(tmp_path / "b.log")
    assert (tmp_path / "a.log").read_bytes() == (tmp_path / "b.log").read_bytes()
    first = (tmp_path / "a.log").read_text().splitlines()[0].split()
    assert len(first) == 6
    with pytest.raises(ValueError):
        SimNetwork(1).export_log(tmp_path / "c.log")


def test_migrant_latency_on_uniform_links():
    cfg = ExperimentConfig(model="evag", problem="sphere", dim=2, nodes=4, population=32, budget=200_000,
                           network=LinkSpec(0.002, 1e15), runs=1)
    trial = simulate(cfg, 0)
    mean, sd, count = latency_stats(trial.net, "migrant")
    assert count > 10 and abs(mean - 0.002) <= 1e-6
