#!/usr/bin/env python3
"""Convert a WOZ 2.0 split (woz_train_en.json / woz_validate_en.json /
woz_test_en.json) to the canonical corpus JSON schema.

WOZ users typed their side of the conversation, so each turn becomes a single
ASR hypothesis with confidence 1.0 — the tracker then treats typed and spoken
corpora identically. The accumulated joint goal is reconstructed from each
turn's ``belief_state`` inform entries.

System acts arrive either as plain strings (slots the system requested) or as
[slot, value] pairs (values the system offered); they map to request/inform
machine acts.

Usage:
    python3 woz_to_corpus.py --input woz_train_en.json \
        --ontology ontology_en.json --out woz_train.json
"""

import argparse
import json
import sys
from pathlib import Path

INFORMABLE = ("food", "pricerange", "area")

# WOZ files spell the slot "price range"; the tracker's schema uses the
# DSTC2-compatible single token.
SLOT_CANON = {"price range": "pricerange"}


def canon_slot(slot):
    return SLOT_CANON.get(slot, slot)


def load_ontology(path, slots):
    raw = json.loads(Path(path).read_text())
    informable = raw.get("informable", raw)
    informable = {canon_slot(k): v for k, v in informable.items()}
    ontology = {}
    for slot in slots:
        if slot not in informable:
            sys.exit(f"ontology {path} has no informable slot '{slot}'")
        values = list(dict.fromkeys(informable[slot]))
        if "none" not in values:
            values = ["none"] + values
        ontology[slot] = values
    return ontology


def convert_system_acts(system_acts):
    acts = []
    for act in system_acts or []:
        if isinstance(act, str):
            acts.append({"type": "request", "slot": canon_slot(act)})
        elif isinstance(act, (list, tuple)) and len(act) == 2:
            acts.append({"type": "inform", "slot": canon_slot(str(act[0])), "value": str(act[1])})
    return acts


def goal_from_belief_state(belief_state, ontology):
    goal = {}
    for entry in belief_state or []:
        if entry.get("act") != "inform":
            continue
        for pair in entry.get("slots") or []:
            if len(pair) != 2:
                continue
            slot, value = canon_slot(str(pair[0])), str(pair[1])
            if slot in ontology:
                goal[slot] = value if value in ontology[slot] else "none"
    return goal


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--input", required=True, help="WOZ 2.0 split JSON")
    parser.add_argument("--ontology", required=True,
                        help="ontology JSON (with an 'informable' section)")
    parser.add_argument("--out", required=True, help="output corpus JSON path")
    parser.add_argument("--slots", nargs="*", default=list(INFORMABLE))
    args = parser.parse_args()

    ontology = load_ontology(args.ontology, args.slots)
    raw = json.loads(Path(args.input).read_text())

    dialogues = []
    for entry in raw:
        turns = []
        for turn in entry.get("dialogue", []):
            turns.append({
                "asr": [{"text": turn.get("transcript", ""), "score": 1.0}],
                "acts": convert_system_acts(turn.get("system_acts")),
                "goal": goal_from_belief_state(turn.get("belief_state"), ontology),
            })
        if turns:
            dialogues.append({"id": f"woz-{entry.get('dialogue_idx', len(dialogues))}",
                              "turns": turns})

    if not dialogues:
        sys.exit("no dialogues converted; is --input a WOZ 2.0 split file?")

    corpus = {"ontology": ontology, "dialogues": dialogues}
    Path(args.out).write_text(json.dumps(corpus, indent=1) + "\n")
    print(f"wrote {len(dialogues)} dialogues to {args.out}")


if __name__ == "__main__":
    main()
