#!/usr/bin/env python3
"""Regenerates the bundled fixture images, exemplar pools and the 10-sample
mock evaluation set under data/. Output is deterministic; rerunning it
rewrites identical files."""

import json
import pathlib

from PIL import Image, ImageDraw

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def solid(path, color, size=(32, 32), box=None, box_color=(255, 255, 255)):
    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.new("RGB", size, color)
    if box:
        ImageDraw.Draw(img).rectangle(box, fill=box_color)
    if path.suffix == ".jpg":
        img.save(path, quality=90)
    else:
        img.save(path, optimize=False)


def mask(path, box, size=(32, 32)):
    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.new("L", size, 0)
    ImageDraw.Draw(img).rectangle(box, fill=255)
    img.save(path, optimize=False)


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


def exemplars():
    base = DATA / "exemplars"
    detect = []
    for i in range(10):
        fake = i % 2 == 1
        eid = f"ex{i:02d}"
        img = f"img/{eid}.png"
        solid(base / img, (20 * i, 100, 200 - 15 * i), box=(4, 4, 12, 12) if fake else None)
        detect.append({
            "id": eid,
            "image_path": img,
            "assistant_answer": "Yes." if fake else "No.",
            "label": "fake" if fake else "real",
        })
    write_jsonl(base / "detect_pool.jsonl", detect)

    analyze = []
    reports = [
        ("an01", "Absolute: upper-right quadrant.\nRelative: above the table, to the right of the lamp.",
         "A single potted plant placed on the shelf.",
         ["- The plant casts no shadow on the shelf.", "- Leaf edges are blurred compared with the shelf."],
         "Diffusion", "local"),
        ("an02", "Absolute: the whole image.\nRelative: every region of the frame.",
         "An entire face portrait of a young man.",
         ["- Asymmetric earrings.", "- Background texture repeats behind the head."],
         "GAN", "global"),
    ]
    for eid, loc, contents, details, method, kind in reports:
        img = f"img/{eid}.png"
        solid(base / img, (180, 60, 60), box=(16, 2, 28, 12))
        text = (
            f"1. Location of the Tampering Area:\n{loc}\n"
            f"2. Contents of the Tampered Area:\n{contents}\n"
            f"3. Visible Details in the Tampered Area:\n" + "\n".join(details) + "\n"
            f"4. Generation Method and Type of the Image:\nA {method}-based method produced this {kind} forgery."
        )
        analyze.append({"id": eid, "image_path": img, "assistant_answer": text, "label": "fake"})
    write_jsonl(base / "analyze_pool.jsonl", analyze)


# (id, label, generator, scope, content, dataset, detect answers, analysis, judge answers)
FLAG_REPORT = """**1. Location of the Tampering Area:**
- **Absolute:** The lower center of the image, occupying roughly the bottom third.
- **Relative:** In the foreground, in front of the crowd and below the building facade.

**2. Contents of the Tampered Area:**
A single waving flag held up in the foreground; it is the primary forged object.

**3. Visible Details in the Tampered Area:**
- The lighting on the flag is brighter than the rest of the scene.
- The edges of the flag are unnaturally smooth and blend into the background.
- The flag casts no shadow on the people behind it.

**4. Generation Method and Type of the Image:**
The smooth, painterly texture suggests a Diffusion method; this is a local forgery."""

LAMA_REPORT = """## Location of the Tampering Area
Absolute: left half of the image, near the middle.
Relative: between the bench and the tree trunk.
## Contents of the Tampered Area
A patch of grass that replaces a removed bicycle.
## Visible Details in the Tampered Area
- Repeated grass texture.
- A faint seam along the bench leg.
## Generation Method and Type of the Image
The repeated texture is typical of GAN inpainting, a local edit."""

STYLE_REPORT = """1. Location of the Tampering Area: Absolute: the whole image. Relative: the entire face and background.
2. Contents of the Tampered Area: a synthetic portrait of a woman.
3. Visible Details in the Tampered Area: the teeth are blurred together. The hair merges into the background.
4. Generation Method and Type of the Image: a GAN (StyleGAN-like) generator produced this global image."""

STABLE_REPORT = """Location of the Tampering Area: Absolute: the entire frame. Relative: all objects.
Contents of the Tampered Area: a fully generated street scene.
Visible Details in the Tampered Area:
- Illegible shop signs.
- Inconsistent window reflections.
Generation Method and Type of the Image: Diffusion model, global generation."""

AS2_REPORT = """1. **Location of the Tampering Area:** Absolute: the top-left corner. Relative: above the car roof.
2. **Contents of the Tampered Area:** a small drone in the sky.
3. **Visible Details in the Tampered Area:** The drone has no motion blur while the car does.
4. **Generation Method and Type of the Image:** Diffusion; local."""

FALSE_POSITIVE_REPORT = """1. Location of the Tampering Area: Absolute: center. Relative: on the table.
2. Contents of the Tampered Area: a coffee cup.
3. Visible Details in the Tampered Area: the cup handle is slightly warped.
4. Generation Method and Type of the Image: unclear which generator; possibly a local edit."""

SAMPLES = [
    ("cal_001", "real", "none", "none", "general", "caltech101", ["No.", "No.", "No, this image appears authentic.", "No.", "Yes."], None, None),
    ("cal_002", "real", "none", "none", "general", "caltech101", ["No.", "Yes.", "Yes, it looks AI-generated.", "No.", "Yes."], FALSE_POSITIVE_REPORT, None),
    ("wf_001", "real", "none", "none", "face", "webfaces", ["I'm sorry, I can't help identify people in images.", "No.", "No.", "No.", "No."], None, None),
    ("wf_002", "real", "none", "none", "face", "webfaces", ["No.", "No.", "No.", "No.", "No, the photo looks genuine."], None, None),
    ("as_001", "fake", "diffusion", "local", "general", "autosplice", ["Yes.", "Yes.", "Yes.", "Yes.", "No."], FLAG_REPORT, ["Absolute Position Accuracy: 4\nRelative Position Accuracy: 3\nReadability: 5\nCompleteness: 4"]),
    ("as_002", "fake", "diffusion", "local", "general", "autosplice", ["Yes.", "I am unable to determine that.", "No.", "Yes.", "I can't assist with that."], AS2_REPORT, ["The description is good.", "Absolute: 5, Relative: 4, Readability: 5, Completeness: 6/5"]),
    ("lama_001", "fake", "gan", "local", "general", "lama", ["Yes.", "Yes.", "No.", "Yes.", "Yes."], LAMA_REPORT, ["**Absolute Position Accuracy** (0-5): 3.5\n**Relative Position Accuracy** (0-5): 2\n**Readability** (0-5): 4\n**Completeness** (0-5): 3"]),
    ("sd_001", "fake", "diffusion", "global", "general", "stable", ["Yes, this appears synthesized.", "Yes.", "Yes.", "Yes.", "Yes."], STABLE_REPORT, None),
    ("sg_001", "fake", "gan", "global", "face", "stylegan", ["As an AI, I cannot judge people.", "I'm sorry, I can't assist with that.", "I cannot help with this request.", "", "I'm unable to evaluate faces."], None, None),
    ("sg_002", "fake", "gan", "global", "face", "stylegan", ["No.", "Yes.", "No.", "No.", "Yes."], STYLE_REPORT, None),
]


def mock10():
    base = DATA / "fixtures" / "mock10"
    manifest, script = [], []
    for n, (sid, label, gen, scope, content, ds, detect, report, judge) in enumerate(SAMPLES):
        img = f"img/{sid}.png"
        box = (8, 16, 24, 30) if scope == "local" else None
        solid(base / img, (25 * n, 255 - 20 * n, (60 * n) % 256), box=box)
        row = {"id": sid, "image_path": img, "label": label, "generator": gen, "scope": scope,
               "content": content, "dataset_name": ds}
        if scope == "local":
            solid(base / f"gt/{sid}.png", (25 * n, 255 - 20 * n, (60 * n) % 256))
            mask(base / f"mask/{sid}.png", box)
            row["gt_path"] = f"gt/{sid}.png"
            row["mask_path"] = f"mask/{sid}.png"
        manifest.append(row)
        for r, text in enumerate(detect):
            script.append({"sample_id": sid, "stage": "detect", "round_index": r, "text": text})
        if report is not None:
            script.append({"sample_id": sid, "stage": "analyze", "round_index": 0, "text": report})
        for r, text in enumerate(judge or []):
            script.append({"sample_id": sid, "stage": "judge", "round_index": r, "text": text})
    write_jsonl(base / "manifest.jsonl", manifest)
    write_jsonl(base / "mock_script.jsonl", script)


def oracle_image():
    solid(DATA / "fixtures" / "oracle" / "blank.png", (128, 128, 128), size=(8, 8))


if __name__ == "__main__":
    exemplars()
    mock10()
    oracle_image()
