#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures under tests/data.

Needs Pillow, numpy and sacrebleu (2.x). Output is deterministic; rerunning
should leave git clean. The evaluation golden (eval3/expected_report.json) is
not produced here: it comes from the C++ regen_eval_golden tool.
"""

import json
import random
from pathlib import Path

import numpy as np
from PIL import Image
from sacrebleu.metrics import BLEU

ROOT = Path(__file__).resolve().parents[2]
DATA = ROOT / "tests" / "data"


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# raster clips: a directory of PNG frames plus frames.json

def raster_clip(name, seed, camera, n_frames=8, fps=4.0, size=(64, 48)):
    out = DATA / "rasters" / name
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    w, h = size
    base = rng.integers(0, 256, size=3)
    names = []
    for i in range(n_frames):
        yy, xx = np.mgrid[0:h, 0:w]
        img = np.zeros((h, w, 3), dtype=np.uint8)
        img[..., 0] = (xx * 4 + base[0]) % 256
        img[..., 1] = (yy * 5 + base[1]) % 256
        img[..., 2] = (base[2] + 20 * i) % 256
        # a moving block so consecutive frames differ
        x0 = (i * 6) % (w - 12)
        y0 = 10 if camera == "road" else 24
        img[y0:y0 + 12, x0:x0 + 12] = (255, 255, 255) if camera == "road" else (0, 0, 0)
        fname = f"frame_{i:03d}.png"
        Image.fromarray(img, "RGB").save(out / fname)
        names.append(fname)
    write_json(out / "frames.json", {"fps": fps, "frames": names})


def make_rasters():
    for k, clip in enumerate(["c1", "c2", "c3"]):
        raster_clip(f"{clip}_road", 100 + k, "road")
        raster_clip(f"{clip}_driver", 200 + k, "driver")


# --------------------------------------------------------------------------
# merge golden: composite built independently with numpy

def make_merge():
    out = DATA / "merge"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)
    road = rng.integers(0, 256, size=(30, 40, 3), dtype=np.uint8)
    driver = rng.integers(0, 256, size=(30, 40, 3), dtype=np.uint8)
    Image.fromarray(road, "RGB").save(out / "road.png")
    Image.fromarray(driver, "RGB").save(out / "driver.png")
    Image.fromarray(np.hstack([road, driver]), "RGB").save(out / "composite_road_left.png")


# --------------------------------------------------------------------------
# BLEU corpus with sacreBLEU goldens

EDGE_PAIRS = [
    ("The ego-car slows down at the intersection.", "The ego-car slows down at the intersection."),
    ("", "A truck merges into the left lane."),
    ("car", "The car in front brakes suddenly."),
    ("The speed was 3.5 km/h, then 1,000 m later it stopped.", "Speed was 3.5 km/h and it stopped 1,000 m later."),
    ("Rock &amp; roll on the highway &quot;fast&quot;.", "Rock & roll on the highway \"fast\"."),
    ("A pick-\nup truck turns left.", "A pickup truck turns left."),
    ("Turn left;   then right:\tstop!", "Turn left; then right: stop!"),
    ("The driver (on the left) looks [down] at {the} phone?", "The driver looks down at the phone."),
    ("Is it 5-10 cars? Yes - about 7-8.", "About 7-8 cars, yes."),
    ("  leading and trailing spaces   ", "leading and trailing spaces"),
    ("Café au lait near the naïve driver.", "The naïve driver drinks café au lait."),
    ("the the the the the the", "The cat is on the mat."),
    ("It's raining; the road's wet.", "It is raining and the road is wet."),
    ("<skipped> The vehicle stops.", "The vehicle stops."),
    ("Numbers 12,345.67 and 8.9% and $100.", "Numbers 12,345.67 and 8.9 % and $ 100 ."),
    ("Rain", "Rain"),
    ("Two words", "Two words here"),
    ("Long hypothesis with many extra words that keep going past the reference length by a lot.",
     "Long hypothesis with words."),
    ("E-mail: driver@fleet.example.com / ID #42.", "Email driver@fleet.example.com ID 42."),
    ("A&B &lt;tag&gt; C", "A&B <tag> C"),
]

SUBJECTS = ["The ego-car", "A white van", "The truck ahead", "A cyclist", "The driver", "A silver sedan",
            "The bus on the right", "A pedestrian"]
VERBS = ["slows down", "changes lanes", "brakes hard", "turns left", "merges onto the highway",
         "stops at the sign", "speeds up", "cuts into the lane"]
TAILS = ["near the intersection.", "in heavy rain.", "at night.", "on a wet road.", "before the tunnel.",
         "in the school zone.", ", then keeps a safe distance.", "without signalling."]


def perturb(words, rng):
    words = list(words)
    op = rng.randrange(4)
    if op == 0 and len(words) > 2:
        del words[rng.randrange(len(words))]
    elif op == 1 and len(words) > 2:
        i = rng.randrange(len(words) - 1)
        words[i], words[i + 1] = words[i + 1], words[i]
    elif op == 2:
        words[rng.randrange(len(words))] = rng.choice(["quickly", "slowly", "the", "a", "car", "lane"])
    else:
        words.insert(rng.randrange(len(words) + 1), rng.choice(["suddenly", "again", "clearly"]))
    return words


def make_bleu():
    rng = random.Random(1313)
    pairs = list(EDGE_PAIRS)
    while len(pairs) < 50:
        ref = f"{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(TAILS)}"
        words = ref.split()
        for _ in range(rng.randrange(1, 4)):
            words = perturb(words, rng)
        pairs.append((" ".join(words), ref))

    bleu = BLEU()
    rows = []
    for hyp, ref in pairs:
        s = bleu.corpus_score([hyp], [[ref]])
        rows.append({"hyp": hyp, "ref": ref, "expected_bleu": round(s.score, 10)})
    write_jsonl(DATA / "bleu" / "corpus.jsonl", rows)

    s = bleu.corpus_score([h for h, _ in pairs], [[r for _, r in pairs]])
    write_json(DATA / "bleu" / "corpus_expected.json", {
        "score": round(s.score, 10),
        "precisions": [round(p, 10) for p in s.precisions],
        "brevity_penalty": round(s.bp, 10),
        "hyp_len": s.sys_len,
        "ref_len": s.ref_len,
        "sacrebleu_version": __import__("sacrebleu").__version__,
    })


# --------------------------------------------------------------------------
# parser corpus: hand-curated expectations, not computed by the parser

B, C, O = "harsh_braking", None, "scene_description"


def b(raw, expected, normalized):
    return {"raw": raw, "template": B, "expected": expected, "normalized": normalized}


def c(template, raw, expected, normalized):
    return {"raw": raw, "template": template, "expected": expected, "normalized": normalized}


def o(raw, expected, normalized):
    return {"raw": raw, "template": O, "expected": expected, "normalized": normalized}


PARSER_CORPUS = [
    b("Yes.", "yes", "Yes."),
    b("No.", "no", "No."),
    b("yes", "yes", "yes"),
    b("NO", "no", "NO"),
    b("Sure! Yes, the ego-car braked hard.", "yes", "Yes, the ego-car braked hard."),
    b("Certainly. No, there is no stop sign in the video.", "no", "No, there is no stop sign in the video."),
    b("Hello! Yes.", "yes", "Yes."),
    b("Hi there, no.", "no", "no."),
    b("Great question! The driver is not smoking.", "no", "The driver is not smoking."),
    b("Thanks for the video. Yes, a lane change happened.", "yes", "Yes, a lane change happened."),
    b("Thank you! No.", "no", "No."),
    b("I'd be happy to help. Yes, the driver is using a phone.", "yes", "Yes, the driver is using a phone."),
    b("Let me take a look at the video. No lane cut off occurred.", "no", "No lane cut off occurred."),
    b("Here is my answer: yes.", "yes", "yes."),
    b("As an AI language model, I cannot be sure, but it appears so.", "unparseable",
      "I cannot be sure, but it appears so."),
    b("Based on the video, the ego-car did not ignore the stop sign.", "no",
      "the ego-car did not ignore the stop sign."),
    b("Assistant: Yes", "yes", "Yes"),
    b("### Assistant: No, it did not.", "no", "No, it did not."),
    b("[/INST] yes, the driver is visible.", "yes", "yes, the driver is visible."),
    b("<s> Answer: No </s>", "no", "No </s>"),
    b("  Yes,   the   driver   is   smoking.  ", "yes", "Yes, the driver is smoking."),
    b("Yes\n\nThe ego-car made a sharp turn.", "yes", "Yes The ego-car made a sharp turn."),
    b("Sure! Certainly! Yes.", "yes", "Yes."),
    b("Okay, Answer: no.", "no", "no."),
    b("The driver appears to be holding a phone.", "yes", "The driver appears to be holding a phone."),
    b("There was a lane change to the left.", "yes", "There was a lane change to the left."),
    b("The driver isn't smoking.", "no", "The driver isn't smoking."),
    b("It is hard to tell from the footage.", "unparseable", "It is hard to tell from the footage."),
    b("Maybe.", "unparseable", "Maybe."),
    b("Possibly, the vehicle slowed down.", "unparseable", "Possibly, the vehicle slowed down."),
    b("I'm not sure whether a stop sign is visible.", "unparseable", "I'm not sure whether a stop sign is visible."),
    b("The image is unclear.", "unparseable", "The image is unclear."),
    b("Yes, although it might have been brief.", "yes", "Yes, although it might have been brief."),
    b("No, I can't tell.", "no", "No, I can't tell."),
    b("Nope.", "no", "Nope."),
    b("Yeah, the car braked hard.", "yes", "Yeah, the car braked hard."),
    b("Yep", "yes", "Yep"),
    b("Correct.", "yes", "Correct."),
    b("Incorrect, there was no lane cut off.", "no", "Incorrect, there was no lane cut off."),
    b("Affirmative.", "yes", "Affirmative."),
    b("Negative.", "no", "Negative."),
    b("Absolutely! The driver is using a phone.", "yes", "The driver is using a phone."),
    b("Of course. There is a stop sign on the right.", "yes", "There is a stop sign on the right."),
    b("Nothing unusual happened.", "no", "Nothing unusual happened."),
    b("Never.", "no", "Never."),
    b("The ego-car kept a safe distance without braking.", "no", "The ego-car kept a safe distance without braking."),
    b("Blue sedan.", "unparseable", "Blue sedan."),
    b("", "unparseable", ""),
    b("!!!", "unparseable", "!!!"),
    b("The driver isn’t using a phone.", "no", "The driver isn’t using a phone."),
    b("Hey! Is the driver smoking? Yes.", "yes", "Is the driver smoking? Yes."),
    b("Response: The vehicle did not change lanes.", "no", "The vehicle did not change lanes."),
    b("Output: yes", "yes", "yes"),
    b("A: No", "no", "No"),
    b("Alright, yes.", "yes", "yes."),
    b("Hi! Thanks for your question. No.", "no", "No."),
    b("According to the footage, the ego-car did make a sharp turn at the intersection.", "yes",
      "the ego-car did make a sharp turn at the intersection."),
    b("After watching the video, I do not know.", "unparseable", "I do not know."),
    b("Difficult to determine.", "unparseable", "Difficult to determine."),
    b("TRUE", "yes", "TRUE"),
    b("false", "no", "false"),
    b("Yes!", "yes", "Yes!"),
    b("No problem! Yes, the driver is visible.", "yes", "Yes, the driver is visible."),
    b("The driver was seen smoking a cigarette.", "yes", "The driver was seen smoking a cigarette."),
    b("Neither a stop sign nor a signal is visible.", "no", "Neither a stop sign nor a signal is visible."),
    b("Good question. There has been a hard brake.", "yes", "There has been a hard brake."),
    b("From the frames, no harsh braking is visible.", "no", "no harsh braking is visible."),
    c("weather", "Snowy.", "Snowy", "Snowy."),
    c("weather", "The weather is rainly.", "Rainy", "The weather is rainly."),
    c("weather", "It's clear and sunny.", "Clear", "It's clear and sunny."),
    c("weather", "Foggy, with low visibility.", "Foggy", "Foggy, with low visibility."),
    c("weather", "Sure! The weather condition is Rainy.", "Rainy", "The weather condition is Rainy."),
    c("weather", "It looks sunny.", "unparseable", "It looks sunny."),
    c("weather", "Clear skies, though it looks foggy ahead.", "Clear", "Clear skies, though it looks foggy ahead."),
    c("road_condition", "Wet", "Wet", "Wet"),
    c("road_condition", "The road appears dry.", "Dry", "The road appears dry."),
    c("road_condition", "ICY", "Icy", "ICY"),
    c("road_condition", "The road is wet, not dry.", "Wet", "The road is wet, not dry."),
    c("road_condition", "Dryness", "unparseable", "Dryness"),
    c("visibility", "Night", "Night", "Night"),
    c("visibility", "Visibility is moderate.", "Moderate", "Visibility is moderate."),
    c("visibility", "Poor visibility due to fog.", "Poor", "Poor visibility due to fog."),
    c("road_information", "Highway Merge", "Highway Merge", "Highway Merge"),
    c("road_information", "The ego-car is on a highway.", "Highway", "The ego-car is on a highway."),
    c("road_information", "School Zone", "School Zone", "School Zone"),
    c("road_information", "A 3-leg intersection.", "3-leg intersection", "A 3-leg intersection."),
    c("road_information", "Intersection", "Intersection", "Intersection"),
    c("road_information", "Local road near a residential area", "Local road", "Local road near a residential area"),
    c("road_information", "It is a construction zone on a rural road.", "Construction Zone",
      "It is a construction zone on a rural road."),
    c("road_information", "Tunnel.", "Tunnel", "Tunnel."),
    c("road_information", "Pedestrian crossroad ahead.", "Pedestrian crossroad", "Pedestrian crossroad ahead."),
    c("road_information", "Answer: Residential Area", "Residential Area", "Residential Area"),
    c("road_information", "Parking lot", "unparseable", "Parking lot"),
    o("Hello! The ego-car is driving on a highway in clear weather.", "explanation",
      "The ego-car is driving on a highway in clear weather."),
    o("Sure, here's my analysis: a truck merges into the left lane.", "explanation",
      "a truck merges into the left lane."),
    o("   ", "unparseable", ""),
    o("Assistant: Based on the video, the car ahead brakes suddenly.", "explanation",
      "the car ahead brakes suddenly."),
    o("As an AI, I cannot see the video.", "explanation", "I cannot see the video."),
    o("Thanks! Slow down before the curve.", "explanation", "Slow down before the curve."),
    o("</s>", "unparseable", ""),
]


def make_parser_corpus():
    assert len(PARSER_CORPUS) == 100, len(PARSER_CORPUS)
    write_jsonl(DATA / "parser_corpus.jsonl", PARSER_CORPUS)


# --------------------------------------------------------------------------
# manifests and gold

CATALOG = json.loads((ROOT / "data" / "default_catalog.json").read_text())

SCENES = {
    "c1": "The ego-car drives on a wet highway while a white van merges from the right.",
    "c2": "A truck ahead brakes suddenly at an intersection and the ego-car stops behind it.",
    "c3": "The driver looks down at a phone while the car waits at a stop sign.",
}
ACTIONS = {
    "c1": "Keep a safe following distance and let the van merge.",
    "c2": "Increase the following distance to avoid braking hard.",
    "c3": "Put the phone away and watch the road.",
}


def make_eval3():
    out = DATA / "eval3"
    clips = []
    for clip in ["c1", "c2", "c3"]:
        clips.append({"id": clip, "road_video": f"../rasters/{clip}_road", "driver_video": f"../rasters/{clip}_driver",
                      "duration_s": 2.0, "split": "test"})
    clips.append({"id": "t1", "road_video": "../rasters/c1_road", "driver_video": "../rasters/c1_driver",
                  "duration_s": 2.0, "split": "train"})
    write_json(out / "manifest.json", {"clips": clips})

    rng = random.Random(4242)
    rows = []
    for clip in ["c1", "c2", "c3"]:
        er = {}
        for t in CATALOG["templates"]:
            if t["kind"] == "binary":
                er[t["id"]] = rng.choice(["yes", "no"])
            elif t["kind"] == "categorical":
                er[t["id"]] = rng.choice(t["choices"])
        rows.append({"clip_id": clip, "er": er,
                     "oq": {"scene_description": SCENES[clip], "recommended_action": ACTIONS[clip]}})
    write_jsonl(out / "gold.jsonl", rows)


def make_split_manifest():
    clips = []
    for split, n in [("train", 95), ("valid", 24), ("test", 100)]:
        for i in range(n):
            clips.append({"id": f"{split}_{i:03d}", "road_video": "rasters/c1_road",
                          "driver_video": "rasters/c1_driver", "duration_s": 2.0, "split": split})
    write_json(DATA / "split_manifest.json", {"clips": clips})


if __name__ == "__main__":
    make_rasters()
    make_merge()
    make_bleu()
    make_parser_corpus()
    make_eval3()
    make_split_manifest()
    print("fixtures written to", DATA)
