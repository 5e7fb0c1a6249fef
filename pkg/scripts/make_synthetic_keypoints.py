"""Write a synthetic keypoint CSV plus the AU matrix that generated it.

The AUs are a planted two-level model (U A) with rows at registration
anchors zeroed, so standardization removes pose without bending the motion.

    python scripts/make_synthetic_keypoints.py --out data/ --subjects 8 --frames 250
"""
import argparse
from pathlib import Path

from dfecs.io import save_au_matrix, write_keypoints
from dfecs.synthetic import anchor_free_aus, synthetic_frames


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="synthetic")
    ap.add_argument("--subjects", type=int, default=8)
    ap.add_argument("--frames", type=int, default=250)
    ap.add_argument("--q", type=int, default=8)
    ap.add_argument("--magnitude", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--missing-jawline", action="store_true")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    U = anchor_free_aus(args.q, args.seed)
    frames = synthetic_frames(U, args.subjects, args.frames, seed=args.seed,
                              magnitude=args.magnitude, missing_jawline=args.missing_jawline)
    write_keypoints(frames, out / "keypoints.csv")
    save_au_matrix(U, out / "planted_aus.dfecs", "planted")
    print(f"wrote {len(frames)} frames to {out / 'keypoints.csv'}")


if __name__ == "__main__":
    main()
