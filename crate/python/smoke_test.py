"""Smoke test for the gravis Python module.

Build and install first:  pip install ./crates/py
Then run from the repository root:  python python/smoke_test.py
"""

import json
import pathlib
import sys

import gravis

ROOT = pathlib.Path(__file__).resolve().parent.parent
CANONICAL = ROOT / "scenarios" / "canonical.json"


def check(cond, msg):
    if not cond:
        print("FAIL:", msg)
        sys.exit(1)
    print("ok:", msg)


def main():
    trace = gravis.run_scenario(str(CANONICAL))
    check(trace.outcome == "completed", f"canonical run completes ({trace!r})")
    check(sorted(trace.stages) == list(range(1, 9)), "all eight stages reached")
    cube = next(o for o in trace.footer["final_scene"]["objects"] if o["id"] == "red-cube")
    check(abs(cube["position"][0] - 200) <= 12.5 and abs(cube["position"][1] - 300) <= 12.5, "red cube placed at the second gesture")

    again = gravis.run_scenario(json.loads(CANONICAL.read_text()))
    check(again.jsonl() == trace.jsonl(), "same seed gives a byte-identical trace")

    report = gravis.replay(trace.jsonl())
    check(report["identical"], report["summary"])

    frame = gravis.understand("take the red cube")
    check(frame["action"] == "take" and frame["intended"] == {"type": "cube", "color": "red"}, "utterance parsed")
    try:
        gravis.understand("flobble")
        check(False, "garbled utterance rejected")
    except ValueError:
        check(True, "garbled utterance rejected")

    snapshot = {
        "hypotheses": [
            {"id": 1, "centroid": [250, 450], "color": "red", "kind": "cube", "hits": 3, "last_seen": 0, "confirmed": True},
            {"id": 2, "centroid": [550, 450], "color": "red", "kind": "cube", "hits": 3, "last_seen": 0, "confirmed": True},
        ],
        "relations": {"pairs": []},
    }
    check(gravis.fuse(snapshot, frame)["status"] == "ambiguous", "identical cubes are ambiguous")
    region = {"target": [560, 440], "region_radius": 100, "confidence": 1.0}
    pointed = gravis.fuse(snapshot, frame, region=region)
    check(pointed["status"] == "resolved" and pointed["io"] == 2, "pointing resolves to the nearer cube")

    step = gravis.dialog_step({"FrameArrived": frame})
    check(step["state"]["current"] == "Interpreting", "dialog starts interpreting")

    scenario = json.loads(CANONICAL.read_text())
    scenario["script"] = []
    session = gravis.Session(scenario)
    session.step(40)
    session.inject({"type": "point", "x": 400, "y": 500})
    session.inject({"type": "utterance", "text": "take the red cube"})
    session.step(20)
    check(session.dialog_state == "AwaitDeployLocation", f"live session asks where to put it ({session.dialog_state})")
    kinds = [e["payload"]["act"]["kind"] for e in session.log() if e["topic"] == "dialog-act"]
    check("AskDeploy" in kinds, "AskDeploy published")
    check(session.snapshot()["sim_time"] == session.now, "snapshot time matches")
    print("all checks passed")


if __name__ == "__main__":
    main()
