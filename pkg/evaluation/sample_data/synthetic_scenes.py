"""
Synthetic scene generator for PICNIQ experiments.

This script:
- draws zero-mean true JOD scores per scene,
- derives feature vectors whose first coordinate is the true score plus noise
  (the remaining coordinates are pure noise),
- simulates a full-design forced-choice experiment per scene with the
  Thurstone observer,
- writes everything as a scene manifest usable by `train`, `calibrate`
  and `eval`.

Output layout (under --out):
    manifest.json
    <scene>_features.csv
    <scene>_<attribute>.csv         comparison matrix
    truth/<scene>.json              true scores
"""

import argparse
import json
from pathlib import Path
from typing import Tuple

from picniq.comparison_matrix import save_matrix
from picniq.models.configs import ObserverConfig
from picniq.models.matrix import ComparisonMatrix, ItemSet
from picniq.models.scores import JodScale
from picniq.observer import make_design, make_features, sample_true_scores, simulate_matrix
from picniq.scaling import save_scores
from picniq.scenes import save_features


SCENE_SEED_STRIDE = 1000


def scene_name(index: int) -> str:
    return f"scene{index:02d}"


def make_scene(
    index: int,
    seed: int,
    n_items: int = 12,
    dim: int = 8,
    noise: float = 0.1,
    spread: float = 1.0,
    k: int = 30,
) -> Tuple[JodScale, ItemSet, ComparisonMatrix]:
    """
    One synthetic scene. Item ids carry the scene index so that items from
    different scenes never collide.
    """
    scene_seed = seed * SCENE_SEED_STRIDE + index
    truth = sample_true_scores(n_items, spread, scene_seed, prefix=f"s{index:02d}i")
    items = make_features(truth, dim, noise, scene_seed)
    design = make_design("full", n_items, k=k)
    matrix = simulate_matrix(truth, design, ObserverConfig(rng_seed=scene_seed))
    return truth, items, matrix


def write_synthetic_manifest(
    out_dir: Path,
    n_scenes: int,
    seed: int,
    attribute: str = "quality",
    first_index: int = 0,
    **scene_options,
) -> Path:
    """Write n_scenes synthetic scenes plus their manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "truth").mkdir(parents=True, exist_ok=True)
    manifest = {}
    for index in range(first_index, first_index + n_scenes):
        name = scene_name(index)
        truth, items, matrix = make_scene(index, seed, **scene_options)
        save_features(items, out_dir / f"{name}_features.csv")
        save_matrix(matrix, out_dir / f"{name}_{attribute}.csv")
        save_scores(truth, out_dir / "truth" / f"{name}.json")
        manifest[name] = {
            "features": f"{name}_features.csv",
            "attributes": {attribute: f"{name}_{attribute}.csv"},
            "truth": {attribute: f"truth/{name}.json"},
        }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def main():
    parser = argparse.ArgumentParser(description="Write a synthetic PICNIQ scene manifest.")
    parser.add_argument("--out", default="synthetic", help="Output directory")
    parser.add_argument("--scenes", type=int, default=25)
    parser.add_argument("--items", type=int, default=12)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--k", type=int, default=30)
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--spread", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--attribute", default="quality")
    args = parser.parse_args()

    manifest_path = write_synthetic_manifest(
        Path(args.out), args.scenes, args.seed, attribute=args.attribute,
        n_items=args.items, dim=args.dim, noise=args.noise, spread=args.spread, k=args.k,
    )
    print(f"Wrote {args.scenes} scenes to {manifest_path}")


if __name__ == "__main__":
    main()
