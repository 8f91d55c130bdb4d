"""Regenerates the checked-in test fixtures.

Run from this directory: python3 make_fixtures.py
Outputs are committed; the Rust test suite never runs this script.
"""

import hashlib
import json
import os
import shutil

import numpy as np
import torch
from PIL import Image

torch.manual_seed(0)
rng = np.random.default_rng(0)

PREPROCESSING = {"resize": [32, 32], "mean": [0.485, 0.456, 0.406], "std": [0.229, 0.224, 0.225]}


class TinyCnn(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = torch.nn.Conv2d(3, 4, kernel_size=4, stride=4)
        self.fc = torch.nn.Linear(4, 10)

    def features(self, x):
        return torch.relu(self.conv(x))

    def head(self, m):
        return self.fc(m.mean(dim=(2, 3)))

    def forward(self, x):
        return self.head(self.features(x))


class GapLinear(torch.nn.Module):
    def __init__(self, classes):
        super().__init__()
        self.fc = torch.nn.Linear(3, classes)

    def forward(self, x):
        return self.fc(x.mean(dim=(2, 3)))


class FlatLinear(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.fc = torch.nn.Linear(28 * 28, 10)

    def forward(self, x):
        return self.fc(x.flatten(1))


def export(model, shape, path):
    model.eval()
    torch.onnx.export(
        model,
        torch.zeros(shape),
        path,
        input_names=["input"],
        output_names=["logits"],
        opset_version=13,
        dynamo=False,
    )


def image_hash(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = np.asarray(arr.shape, dtype="<u8").tobytes()
    return hashlib.sha256(head + arr.tobytes()).hexdigest()


def synthetic_image(cy, cx, radius, color):
    yy, xx = np.mgrid[0:32, 0:32]
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    img = rng.normal(0.0, 0.3, size=(3, 32, 32)).astype(np.float32)
    for ch in range(3):
        img[ch][inside] += color[ch]
    return img, inside


def save_indexed_png(labels, path):
    im = Image.fromarray(labels.astype(np.uint8), mode="P")
    palette = [0, 0, 0] * 256
    for i in range(1, 21):
        palette[3 * i : 3 * i + 3] = [(i * 53) % 256, (i * 97) % 256, (i * 151) % 256]
    palette[3 * 255 : 3 * 256] = [224, 224, 192]
    im.putpalette(palette)
    im.save(path)


def write_bundle(path, image, features, gradients, logits, class_index):
    os.makedirs(path, exist_ok=True)
    tensors = {
        "image": image,
        "features": features,
        "gradients": gradients,
        "class_scores": logits,
    }
    entries = {}
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        np.save(os.path.join(path, f"{name}.npy"), arr)
        entries[name] = {"file": f"{name}.npy", "shape": list(arr.shape)}
    manifest = {
        "version": 1,
        "model_id": "tiny_cnn",
        "layer_name": "conv",
        "class_index": int(class_index),
        "tensors": entries,
        "preprocessing": PREPROCESSING,
        "gradient_target": "logit",
    }
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def main():
    for d in ["collection"]:
        shutil.rmtree(d, ignore_errors=True)
    os.makedirs("collection")

    cnn = TinyCnn()
    export(cnn, (1, 3, 32, 32), "tiny_cnn.onnx")
    export(GapLinear(1000), (1, 3, 224, 224), "gap_1000.onnx")
    export(FlatLinear(), (1, 1, 28, 28), "mnist_like.onnx")

    # stub scorer: linear in the per-channel means, 10 classes
    weights = rng.normal(0.0, 1.5, size=(10, 3)).astype(np.float32)
    bias = rng.normal(0.0, 0.2, size=10).astype(np.float32)

    def stub_logits(img):
        means = img.astype(np.float64).reshape(3, -1).mean(axis=1)
        return (bias.astype(np.float64) + weights.astype(np.float64) @ means).astype(np.float32)

    items = {
        "a": dict(cy=10, cx=11, radius=6, color=(1.5, -0.5, 0.8), cls=3, mask=True, boxes=True),
        "b": dict(cy=22, cx=20, radius=7, color=(-0.8, 1.2, 0.4), cls=5, mask=True, boxes=False),
        "c": dict(cy=16, cx=8, radius=5, color=(0.6, 0.9, -1.1), cls=7, mask=False, boxes=True),
    }
    table = {}
    for stem, spec in items.items():
        img, inside = synthetic_image(spec["cy"], spec["cx"], spec["radius"], spec["color"])
        x = torch.from_numpy(img)[None]
        feats = cnn.features(x)
        feats.retain_grad()
        logits = cnn.head(feats)
        logits[0, spec["cls"]].backward()
        write_bundle(
            f"collection/{stem}.bundle",
            img,
            feats[0].detach().numpy(),
            feats.grad[0].numpy(),
            logits[0].detach().numpy(),
            spec["cls"],
        )
        if spec["mask"]:
            labels = np.zeros((32, 32), dtype=np.uint8)
            yy, xx = np.mgrid[0:32, 0:32]
            ring = ((yy - spec["cy"]) ** 2 + (xx - spec["cx"]) ** 2 <= (spec["radius"] + 1) ** 2) & ~inside
            labels[ring] = 255
            labels[inside] = spec["cls"]
            save_indexed_png(labels, f"collection/{stem}.mask.png")
        if spec["boxes"]:
            r = spec["radius"]
            boxes = [
                {"class": spec["cls"], "box": [spec["cx"] - r, spec["cy"] - r, spec["cx"] + r, spec["cy"] + r]},
                {"class": 1, "box": [26, 26, 31, 31]},
            ]
            with open(f"collection/{stem}.boxes.json", "w") as f:
                json.dump(boxes, f)
                f.write("\n")
        table[image_hash(img)] = [float(v) for v in stub_logits(img)]

    stub = {
        "table": table,
        "fallback": {
            "channel_means": {
                "weights": [[float(v) for v in row] for row in weights],
                "bias": [float(v) for v in bias],
            }
        },
    }
    with open("stub_scorer.json", "w") as f:
        json.dump(stub, f, indent=2)
        f.write("\n")

    labels = np.zeros((4, 4), dtype=np.uint8)
    labels[1:3, 1:3] = 12
    save_indexed_png(labels, "classes_0_12.mask.png")

    np.save("numpy_reference.npy", np.arange(6, dtype="<f4").reshape(2, 3) / 4)


if __name__ == "__main__":
    main()
