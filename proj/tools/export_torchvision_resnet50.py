#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Write torchvision ResNet-50 ImageNet weights as safetensors.

Feed the result to `xfer import-checkpoint --source-kind supervised`.
Needs torch, torchvision and safetensors; downloads the weights on first use.
A SwAV state dict (a .pth.tar with a "module." prefix) can be converted with
--state-dict instead.
"""

import argparse

import torch
from safetensors.torch import save_file


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--state-dict", help="convert this torch state dict instead of the torchvision download")
    args = ap.parse_args()

    if args.state_dict:
        sd = torch.load(args.state_dict, map_location="cpu")
        if isinstance(sd, dict) and "state_dict" in sd:
            sd = sd["state_dict"]
    else:
        import torchvision

        sd = torchvision.models.resnet50(weights=torchvision.models.ResNet50_Weights.IMAGENET1K_V1).state_dict()

    tensors = {k: v.detach().float().contiguous() for k, v in sd.items() if torch.is_tensor(v) and v.is_floating_point()}
    save_file(tensors, args.out)
    print(f"{len(tensors)} tensors -> {args.out}")


if __name__ == "__main__":
    main()
