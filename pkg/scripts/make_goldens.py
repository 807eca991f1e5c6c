"""Regenerate the checked-in service fixtures under tests/golden/.

Run only when the wire format changes on purpose; the golden tests exist to
catch accidental drift.
"""

import argparse
import json
from pathlib import Path

from fastapi.testclient import TestClient

from conan_air.cli import help_texts
from conan_air.service import create_app

WELL_FORMED_MC = (
    "<identification>0:irrelevant,4:contextual,8:evidence</identification>\n"
    "<reasoning>The man at 8s picks up something red; 4s shows him entering.</reasoning>\n"
    "<action>specific_frame_retrieval 4.0-8.0</action>\n"
    "<identification>0:irrelevant,4:contextual,5:evidence,6:evidence,8:evidence</identification>\n"
    "<reasoning>Frames 5 and 6 show a red ball in his hand.</reasoning>\n"
    "<action>confident_question_answering</action>\n"
    "<answer>B</answer>"
)
DUPLICATE_ACTION = (
    "<identification>0:evidence</identification><reasoning>sure</reasoning>"
    "<action>random_frame_sampling</action><action>confident_question_answering</action><answer>B</answer>"
)
FREE_FORM = (
    "<identification>0:evidence,1:irrelevant</identification>\n"
    "<reasoning>The dog runs toward the ball.</reasoning>\n"
    "<action>confident_question_answering</action>\n"
    "<answer>a dog runs across the park</answer>"
)

SCORE_REQUEST = {
    "items": [
        {
            "task_type": "multi_choice",
            "raw_output": WELL_FORMED_MC,
            "truth": {
                "answer": "B",
                "gt_labels": [
                    {"0": "irrelevant", "4": "contextual", "8": "evidence"},
                    {"0": "irrelevant", "4": "contextual", "5": "evidence", "6": "contextual", "8": "evidence"},
                ],
                "retrieved_labels": [["evidence", "contextual"]],
            },
        },
        {
            "task_type": "multi_choice",
            "raw_output": DUPLICATE_ACTION,
            "truth": {"answer": "B", "gt_labels": [{"0": "evidence"}], "retrieved_labels": []},
        },
        {
            "task_type": "free_form",
            "raw_output": FREE_FORM,
            "truth": {"answer": "A dog runs across the field.", "gt_labels": [{"0": "evidence", "1": "irrelevant"}]},
        },
        {
            "task_type": "multi_choice",
            "raw_output": FREE_FORM,
            "truth": {"answer": "B", "gt_labels": []},
        },
        {"task_type": "essay", "raw_output": "", "truth": {"answer": "B"}},
    ]
}

ADVANTAGES_REQUEST = {"groups": [[1, 1], [0, 1], [2.8, 0.5, 0.5, 0.5], [3.5, 0.0, 1.2, 2.8, 0.5, 0.5, 3.5, 1.0]]}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "golden"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app())
    for name, path, body in [("score", "/v1/score", SCORE_REQUEST), ("advantages", "/v1/advantages", ADVANTAGES_REQUEST)]:
        req = json.dumps(body, indent=2, sort_keys=True) + "\n"
        resp = client.post(path, content=req.encode(), headers={"content-type": "application/json"})
        resp.raise_for_status()
        (out / f"{name}_request.json").write_text(req, encoding="utf-8")
        (out / f"{name}_response.json").write_bytes(resp.content)
        print(f"wrote {name}_request.json / {name}_response.json")
    (out / "help").mkdir(exist_ok=True)
    for cmd, text in help_texts().items():
        (out / "help" / f"{cmd}.txt").write_text(text, encoding="utf-8")
    print("wrote help texts")


if __name__ == "__main__":
    main()
