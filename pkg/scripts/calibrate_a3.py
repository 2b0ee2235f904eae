#!/usr/bin/env python3
"""Scratch calibration harness for the warm-start comparison benchmark.

Runs the pipeline phases with explicit timing so model size, step counts and
learning rates can be tuned for a clear WARM2WARM > WARM2RND > RND2RND
separation inside the CPU-time budget. Not part of the test suite.
"""

import argparse
import shutil
import time
from pathlib import Path

from warmsum.experiment import (CorpusSettings, DecodingSettings, ExperimentConfig,
                                ModelSettings, TokenizerSettings, run_experiment)
from warmsum.synthetic import SyntheticSettings
from warmsum.training import TrainConfig


def build_config(out, ft_lr, pt_lr, ft_steps, pt_steps, seeds, d_model, n_words,
                 chain_prob, lead_k, body_min=12, body_max=24, batch=8):
    return ExperimentConfig(
        corpus=CorpusSettings(
            synthetic=SyntheticSettings(n_pairs=5000, seed=7, n_words=n_words,
                                        body_min=body_min, body_max=body_max,
                                        lead_k=lead_k, chain_prob=chain_prob),
            ratios=(0.8, 0.1, 0.1), split_seed=13, dataset_name="synthetic"),
        tokenizer=TokenizerSettings(target_vocab_size=256),
        model=ModelSettings(d_model=d_model, n_heads=4, d_ff=2 * d_model,
                            n_enc_layers=2, n_dec_layers=2, max_positions=48,
                            dropout=0.1),
        pretrain=TrainConfig(learning_rate=pt_lr, total_steps=pt_steps,
                             warmup_steps=100, batch_size=batch,
                             max_src_len=body_max + 2, seed=0),
        finetune=TrainConfig(learning_rate=ft_lr, total_steps=ft_steps,
                             warmup_steps=100, batch_size=batch,
                             max_src_len=body_max + 2, max_tgt_len=lead_k + 2),
        modes=("RND2RND", "WARM2RND", "WARM2WARM"),
        seeds=seeds,
        decoding=DecodingSettings(method="greedy", max_len=lead_k + 2),
        output_dir=str(out),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="/tmp/a3_calib")
    ap.add_argument("--ft-lr", type=float, default=3e-3)
    ap.add_argument("--pt-lr", type=float, default=1e-2)
    ap.add_argument("--ft-steps", type=int, default=2000)
    ap.add_argument("--pt-steps", type=int, default=2000)
    ap.add_argument("--seeds", default="1,2,3")
    ap.add_argument("--d-model", type=int, default=32)
    ap.add_argument("--n-words", type=int, default=60)
    ap.add_argument("--chain-prob", type=float, default=0.75)
    ap.add_argument("--lead-k", type=int, default=8)
    ap.add_argument("--fresh", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    if args.fresh and out.exists():
        shutil.rmtree(out)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    cfg = build_config(out, args.ft_lr, args.pt_lr, args.ft_steps, args.pt_steps,
                       seeds, args.d_model, args.n_words, args.chain_prob, args.lead_k)
    t0 = time.time()
    table = run_experiment(cfg)
    print(table.render_text())
    print(f"total wall time: {time.time() - t0:.1f}s")
    meds = table.medians()
    if len(meds) == 3:
        gap = meds["WARM2WARM"][2] - meds["RND2RND"][2]
        print(f"medians rougeL: W2W={meds['WARM2WARM'][2]:.2f} "
              f"W2R={meds['WARM2RND'][2]:.2f} R2R={meds['RND2RND'][2]:.2f} gap={gap:.2f}")


if __name__ == "__main__":
    main()
