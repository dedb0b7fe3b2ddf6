#!/usr/bin/env python3
"""Convert a DSTC2 dataset export to the canonical corpus JSON schema.

The DSTC2 distribution ships one directory per call containing ``log.json``
(system output and ASR input) and ``label.json`` (per-turn annotations), plus
``.flist`` files listing the call directories of each split and an ontology
JSON with an ``informable`` section.

Output schema (what ``statenet`` consumes):

    {"ontology": {slot: ["none", value, ...]},
     "dialogues": [{"id": str,
                    "turns": [{"asr":  [{"text": str, "score": float}, ...],
                               "acts": [{"type": str, "slot": str?, "value": str?}, ...],
                               "goal": {slot: value}}]}]}

Goals are the accumulated per-turn joint goal exactly as annotated in
``label.json`` (``goal-labels``); slots the user has not constrained yet are
simply absent and default to "none" downstream.

Usage:
    python3 dstc2_to_corpus.py --data-root DIR --flist dstc2_train.flist \
        --ontology scripts/config/ontology_dstc2.json --out train.json
"""

import argparse
import json
import sys
from pathlib import Path

INFORMABLE = ("food", "pricerange", "area")


def load_ontology(path, slots):
    raw = json.loads(Path(path).read_text())
    informable = raw.get("informable", raw)
    ontology = {}
    for slot in slots:
        if slot not in informable:
            sys.exit(f"ontology {path} has no informable slot '{slot}'")
        values = list(dict.fromkeys(informable[slot]))
        if "none" not in values:
            values = ["none"] + values
        ontology[slot] = values
    return ontology


def convert_acts(dialog_acts):
    """Flatten DSTC2 machine dialog-acts to (type, slot?, value?) entries."""
    acts = []
    for act in dialog_acts or []:
        act_type = act.get("act", "")
        slots = act.get("slots") or []
        if not slots:
            acts.append({"type": act_type})
            continue
        for pair in slots:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                continue
            first, second = pair
            if first == "slot":
                # request-style acts name the slot as the value of "slot"
                acts.append({"type": act_type, "slot": str(second)})
            else:
                acts.append({"type": act_type, "slot": str(first), "value": str(second)})
    return acts


def convert_asr(turn_input, max_hyps):
    hyps = []
    live = (turn_input or {}).get("live") or {}
    for hyp in (live.get("asr-hyps") or [])[:max_hyps]:
        text = hyp.get("asr-hyp", "")
        score = float(hyp.get("score", 0.0))
        if score < 0.0:
            score = 0.0  # a handful of live scores dip below zero
        hyps.append({"text": text, "score": score})
    if not hyps:
        hyps.append({"text": "", "score": 1.0})
    return hyps


def convert_call(call_dir, ontology, max_hyps):
    log = json.loads((call_dir / "log.json").read_text())
    label = json.loads((call_dir / "label.json").read_text())
    turns = []
    for log_turn, label_turn in zip(log.get("turns", []), label.get("turns", [])):
        goal = {}
        for slot, value in (label_turn.get("goal-labels") or {}).items():
            if slot not in ontology:
                continue
            goal[slot] = value if value in ontology[slot] else "none"
        turns.append({
            "asr": convert_asr(log_turn.get("input"), max_hyps),
            "acts": convert_acts((log_turn.get("output") or {}).get("dialog-acts")),
            "goal": goal,
        })
    if not turns:
        return None
    return {"id": log.get("session-id", call_dir.name), "turns": turns}


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--data-root", required=True,
                        help="directory containing the per-call directories")
    parser.add_argument("--flist", required=True,
                        help="split file listing call directories relative to --data-root")
    parser.add_argument("--ontology", required=True,
                        help="DSTC2 ontology JSON (with an 'informable' section)")
    parser.add_argument("--out", required=True, help="output corpus JSON path")
    parser.add_argument("--max-hyps", type=int, default=10,
                        help="keep at most this many ASR hypotheses per turn (default 10; "
                             "the tracker truncates further at featurization time)")
    parser.add_argument("--slots", nargs="*", default=list(INFORMABLE),
                        help="informable slots to track (default: food pricerange area)")
    args = parser.parse_args()

    ontology = load_ontology(args.ontology, args.slots)
    root = Path(args.data_root)

    dialogues = []
    skipped = 0
    for line in Path(args.flist).read_text().splitlines():
        rel = line.strip()
        if not rel:
            continue
        call_dir = root / rel
        if not (call_dir / "log.json").exists():
            skipped += 1
            continue
        dialogue = convert_call(call_dir, ontology, args.max_hyps)
        if dialogue:
            dialogues.append(dialogue)
        else:
            skipped += 1

    if not dialogues:
        sys.exit("no dialogues converted; check --data-root and --flist")
    if skipped:
        print(f"warning: skipped {skipped} call(s) without usable logs", file=sys.stderr)

    corpus = {"ontology": ontology, "dialogues": dialogues}
    Path(args.out).write_text(json.dumps(corpus, indent=1) + "\n")
    print(f"wrote {len(dialogues)} dialogues to {args.out}")


if __name__ == "__main__":
    main()
