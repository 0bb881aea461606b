"""
command_router.py
=================
명령줄 인자를 파싱하고, 하위 명령(subcommand)에 따라
PipelineController 의 작업으로 라우팅하는 중앙 명령 라우터.

[명령 규격]
  synth     <out_dir>     --kind --pattern --size --n --sigma --gain --n-average --drift --seed
                          [--from-manifest manifest.json] [--format raw|png]
  build-nm  <pairs_dir>   --out model.nm [--bins N] [--range-min --range-max]
  train     <data_dir>    --mode pn2v|n2v|supervised --out model.ckpt [--noise-model model.nm]
  denoise   <checkpoint> <inputs...> --out dir --mode mmse|prior_mean|n2v_direct
                          [--noise-model model.nm] [--tile --overlap] [--dump-posterior r,c]
  evaluate  <pred_dir> <gt_dir> [--metric psnr|si_psnr] [--records out.jsonl]
  compare   <gt_dir> NAME=DIR ... [--metrics psnr,si_psnr] [--records out.jsonl]

  공통: --config FILE (명령별 [section]), --threads N (기본 $PN2V_THREADS), -v, --force

[종료 코드]
  0 성공 / 1 검증 오류 (작업 시작 전) / 2 실행 중 실패
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from core.config import default_threads, load_config_file, merge_options, split_known
from core.errors import DenoiserError, ValidationError
from core.log import configure_logging
from core.pipeline_controller import PipelineController
from data.synthetic import NoiseKind, Pattern, SynthSpec
from evaluation.metrics import MetricKind
from inference.denoiser import DenoiseMode
from inference.tiling import TilingConfig
from network.unet import UNetConfig
from noise.noise_model import DEFAULT_BINS
from training.config import TrainConfig, TrainMode


logger = logging.getLogger(__name__)


# ──────────────────────────────────────────────
#  명령별 옵션 (설정 파일 section 과 1:1)
# ──────────────────────────────────────────────

@dataclass
class NoiseModelOptions:
    bins_s: int = DEFAULT_BINS
    bins_x: int = DEFAULT_BINS
    range_min: float | None = None
    range_max: float | None = None

    def value_range(self) -> tuple[float, float] | None:
        if (self.range_min is None) != (self.range_max is None):
            raise ValidationError("--range-min and --range-max must be given together")
        return None if self.range_min is None else (self.range_min, self.range_max)


@dataclass
class DenoiseOptions:
    mode: DenoiseMode = DenoiseMode.MMSE
    format: str = "raw"


@dataclass
class EvaluateOptions:
    metric: MetricKind = MetricKind.PSNR


@dataclass
class CompareOptions:
    metrics: str = "psnr,si_psnr"

    def metric_kinds(self) -> list[MetricKind]:
        try:
            return [MetricKind(m.strip()) for m in self.metrics.split(",") if m.strip()]
        except ValueError as e:
            raise ValidationError(f"unknown metric in '{self.metrics}'") from e


class _ArgumentParser(argparse.ArgumentParser):
    """사용법 오류를 SystemExit(2) 대신 ValidationError(종료 코드 1) 로 바꾼다."""

    def error(self, message):
        raise ValidationError(f"usage: {message}")


def _coordinate(text: str) -> tuple[int, int]:
    try:
        row, col = (int(v) for v in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected 'row,col', got '{text}'") from e
    return row, col


def _method(text: str) -> tuple[str, str]:
    name, sep, directory = text.partition("=")
    if not sep or not name or not directory:
        raise argparse.ArgumentTypeError(f"expected NAME=DIR, got '{text}'")
    return name, directory


class CommandRouter:
    """
    파싱된 하위 명령의 이름에 따라 등록된 핸들러 함수로 분배하는 라우터 클래스.

    설정 우선순위: dataclass 기본값 < --config 파일 [명령] section < 명시적 플래그
    """

    def __init__(self):
        self.parser = self._build_parser()

        # ── 하위 명령 → 핸들러 매핑 ──
        self._handlers: dict[str, callable] = {
            "synth":    self._on_synth,
            "build-nm": self._on_build_nm,
            "train":    self._on_train,
            "denoise":  self._on_denoise,
            "evaluate": self._on_evaluate,
            "compare":  self._on_compare,
        }

    # ============================================================
    #  파서 구성
    # ============================================================

    def _build_parser(self) -> argparse.ArgumentParser:
        common = _ArgumentParser(add_help=False)
        common.add_argument("--config", type=Path, help="명령별 [section] 을 가진 key = value 설정 파일")
        common.add_argument("--threads", type=int, help="스레드/워커 수 (기본 $PN2V_THREADS 또는 1)")
        common.add_argument("-v", "--verbose", action="store_true", help="DEBUG 로그 출력")
        common.add_argument("--force", action="store_true", help="기존 출력 덮어쓰기")
        common.add_argument("--no-progress", action="store_true", help="진행 표시줄 끄기")

        parser = _ArgumentParser(prog="main_denoiser.py", description="PN2V denoising toolkit")
        sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

        # ── synth ──
        p = sub.add_parser("synth", parents=[common], help="합성 (clean, noisy) 데이터셋 생성")
        p.add_argument("out_dir", type=Path)
        p.add_argument("--kind", choices=[k.value for k in NoiseKind])
        p.add_argument("--pattern", choices=[k.value for k in Pattern])
        p.add_argument("--size", type=int)
        p.add_argument("--n", dest="n_images", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--gain", type=float)
        p.add_argument("--n-average", dest="n_average", type=int)
        p.add_argument("--drift", type=float)
        p.add_argument("--signal-min", dest="signal_min", type=float)
        p.add_argument("--signal-max", dest="signal_max", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--format", dest="image_format", choices=["raw", "png"])
        p.add_argument("--from-manifest", dest="manifest", type=Path, help="manifest.json 으로 재생성")

        # ── build-nm ──
        p = sub.add_parser("build-nm", parents=[common], help="(clean, noisy) 쌍으로 히스토그램 노이즈 모델 생성")
        p.add_argument("pairs_dir", type=Path)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--bins", type=int, help="bins_s = bins_x")
        p.add_argument("--bins-s", dest="bins_s", type=int)
        p.add_argument("--bins-x", dest="bins_x", type=int)
        p.add_argument("--range-min", dest="range_min", type=float)
        p.add_argument("--range-max", dest="range_max", type=float)

        # ── train ──
        p = sub.add_parser("train", parents=[common], help="네트워크 학습")
        p.add_argument("data_dir", type=Path)
        p.add_argument("--mode", choices=[m.value for m in TrainMode])
        p.add_argument("--noise-model", dest="noise_model", type=Path)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--log", type=Path, help="epoch 로그 (기본 <out>.log.jsonl)")
        p.add_argument("--epochs", type=int)
        p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--patch-size", dest="patch_size", type=int)
        p.add_argument("--lr", dest="learning_rate", type=float)
        p.add_argument("--plateau-factor", dest="plateau_factor", type=float)
        p.add_argument("--patience", type=int)
        p.add_argument("--n-masked", dest="n_masked", type=int)
        p.add_argument("--window", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--val-fraction", dest="val_fraction", type=float)
        p.add_argument("--val-batches", dest="val_batches", type=int)
        p.add_argument("--no-augment", dest="augment", action="store_const", const=False)
        p.add_argument("--workers", dest="num_workers", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--samples", dest="out_channels", type=int, help="픽셀당 샘플 수 K")
        p.add_argument("--base-features", dest="base_features", type=int)
        p.add_argument("--full-scale", action="store_true", help="depth 3, base 64, K 800")

        # ── denoise ──
        p = sub.add_parser("denoise", parents=[common], help="체크포인트로 이미지 복원")
        p.add_argument("checkpoint", type=Path)
        p.add_argument("inputs", type=Path, nargs="+")
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--mode", choices=[m.value for m in DenoiseMode])
        p.add_argument("--noise-model", dest="noise_model", type=Path)
        p.add_argument("--tile", type=int)
        p.add_argument("--overlap", type=int)
        p.add_argument("--tile-batch", dest="batch_size", type=int)
        p.add_argument("--format", choices=["raw", "png"])
        p.add_argument("--dump-posterior", dest="dump_at", type=_coordinate, action="append", default=[],
                       metavar="ROW,COL")

        # ── evaluate ──
        p = sub.add_parser("evaluate", parents=[common], help="PSNR / SI-PSNR 평가")
        p.add_argument("pred_dir", type=Path)
        p.add_argument("gt_dir", type=Path)
        p.add_argument("--metric", choices=[m.value for m in MetricKind])
        p.add_argument("--records", type=Path, help="기계 판독용 JSON lines (기본 <pred_dir>.<metric>.jsonl)")

        # ── compare ──
        p = sub.add_parser("compare", parents=[common], help="방법별 mean ± 2SEM 비교표")
        p.add_argument("gt_dir", type=Path)
        p.add_argument("methods", type=_method, nargs="+", metavar="NAME=DIR")
        p.add_argument("--metrics")
        p.add_argument("--records", type=Path)
        return parser

    # ============================================================
    #  실행
    # ============================================================

    def run(self, argv: list[str] | None = None) -> int:
        """인자를 파싱해 핸들러를 호출하고 종료 코드를 반환한다."""
        command = "cli"
        try:
            args = self.parser.parse_args(argv)
            command = args.command
            configure_logging(args.verbose)
            threads = args.threads if args.threads is not None else default_threads()
            controller = PipelineController(threads=threads, progress=not args.no_progress)
            logger.debug("📨 [CommandRouter] '%s' 명령 수신 → 핸들러 호출", command)
            self._handlers[command](args, controller)
            return 0
        except DenoiserError as e:
            print(f"❌ [{command}] {e}", file=sys.stderr)
            return e.exit_code
        except Exception as e:
            # 파일 시스템, torch 등 툴킷 밖의 실행 오류
            logger.debug("💥 [CommandRouter] 처리되지 않은 예외", exc_info=True)
            print(f"❌ [{command}] {type(e).__name__}: {e}", file=sys.stderr)
            return DenoiserError.exit_code
        except SystemExit as e:
            # --help
            return int(e.code or 0)

    def _file_values(self, args, section: str) -> dict[str, str]:
        return load_config_file(args.config, section)

    @staticmethod
    def _flags(args, cls) -> dict:
        values, _ = split_known(vars(args), cls)
        return values

    @staticmethod
    def _reject_unknown(section: str, leftover: dict):
        if leftover:
            raise ValidationError(f"unknown keys in [{section}]: {sorted(leftover)}")

    # ============================================================
    #  핸들러
    # ============================================================

    def _on_synth(self, args, controller: PipelineController):
        file_values = self._file_values(args, "synth")
        image_format = file_values.pop("format", None)
        if args.manifest is not None:
            spec, manifest_format = controller.spec_from_manifest(args.manifest)
            image_format = args.image_format or manifest_format
        else:
            spec = merge_options(SynthSpec, file_values, self._flags(args, SynthSpec))
            image_format = args.image_format or image_format or "raw"
        controller.synth(spec, args.out_dir, image_format, force=args.force)

    def _on_build_nm(self, args, controller: PipelineController):
        flags = self._flags(args, NoiseModelOptions)
        if args.bins is not None:
            flags["bins_s"] = flags["bins_s"] if flags["bins_s"] is not None else args.bins
            flags["bins_x"] = flags["bins_x"] if flags["bins_x"] is not None else args.bins
        options = merge_options(NoiseModelOptions, self._file_values(args, "build-nm"), flags)
        controller.build_noise_model(
            args.pairs_dir, args.out, options.bins_s, options.bins_x, options.value_range(), force=args.force
        )

    def _on_train(self, args, controller: PipelineController):
        file_values = self._file_values(args, "train")
        train_file, rest = split_known(file_values, TrainConfig)
        net_file, rest = split_known(rest, UNetConfig)
        self._reject_unknown("train", rest)
        if "seed" in train_file:
            net_file.setdefault("seed", train_file["seed"])

        flags = self._flags(args, TrainConfig)
        if flags.get("num_workers") is None and "num_workers" not in train_file:
            flags["num_workers"] = controller.threads
        train_cfg = merge_options(TrainConfig, train_file, flags)

        if args.full_scale:
            preset = {k: str(v) for k, v in UNetConfig.full_scale().to_dict().items()}
            net_file = {**preset, **net_file}
        net_flags = self._flags(args, UNetConfig)
        net_flags.setdefault("seed", None)
        if net_flags["seed"] is None and "seed" not in net_file:
            net_flags["seed"] = train_cfg.seed
        net_cfg = merge_options(UNetConfig, net_file, net_flags)

        controller.train(
            args.data_dir, train_cfg, net_cfg, args.out,
            noise_model_path=args.noise_model, log_path=args.log, force=args.force,
        )

    def _on_denoise(self, args, controller: PipelineController):
        file_values = self._file_values(args, "denoise")
        tiling_file, rest = split_known(file_values, TilingConfig)
        option_file, rest = split_known(rest, DenoiseOptions)
        self._reject_unknown("denoise", rest)

        tiling = merge_options(TilingConfig, tiling_file, self._flags(args, TilingConfig))
        options = merge_options(DenoiseOptions, option_file, self._flags(args, DenoiseOptions))
        controller.denoise(
            args.checkpoint, args.inputs, args.out,
            mode=options.mode, tiling=tiling, noise_model_path=args.noise_model,
            dump_at=args.dump_at, image_format=options.format, force=args.force,
        )

    def _on_evaluate(self, args, controller: PipelineController):
        options = merge_options(EvaluateOptions, self._file_values(args, "evaluate"), self._flags(args, EvaluateOptions))
        metric = MetricKind(options.metric)
        records = args.records or args.pred_dir.with_name(f"{args.pred_dir.name}.{metric.value}.jsonl")
        controller.evaluate(args.pred_dir, args.gt_dir, metric, records)

    def _on_compare(self, args, controller: PipelineController):
        options = merge_options(CompareOptions, self._file_values(args, "compare"), self._flags(args, CompareOptions))
        methods = dict(args.methods)
        if len(methods) != len(args.methods):
            raise ValidationError("method names must be unique")
        controller.compare(args.gt_dir, methods, options.metric_kinds(), args.records)
