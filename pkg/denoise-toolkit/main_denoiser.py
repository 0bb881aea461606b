"""
main_denoiser.py
================
PN2V 디노이징 툴킷 진입점(Entry Point).

사용 예:
    python main_denoiser.py synth data/gauss --kind gaussian --sigma 25 --n 20 --seed 7
    python main_denoiser.py build-nm data/gauss --out gauss.nm
    python main_denoiser.py train data/gauss --mode pn2v --noise-model gauss.nm --out pn2v.ckpt
    python main_denoiser.py denoise pn2v.ckpt data/gauss/noisy --noise-model gauss.nm --out out/pn2v
    python main_denoiser.py evaluate out/pn2v data/gauss/clean --metric psnr
"""

import sys

from cli.command_router import CommandRouter


def main(argv: list[str] | None = None) -> int:
    return CommandRouter().run(argv)


if __name__ == "__main__":
    sys.exit(main())
