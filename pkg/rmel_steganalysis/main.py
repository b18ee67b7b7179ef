from __future__ import annotations
from typing import (
    Any,
    Callable,
    Optional,
    Tuple,
    TypeVar,
)

import functools
import pathlib

import click

from . import classifier
from . import corpus
from . import errors
from . import features
from . import harness
from . import seeding
from . import selection
from ._logging import configure
from .audio import read_wav
from .calibration import (
    FeatureKind,
    feature_vector,
    read_features_csv,
    write_features_csv,
)
from .embedders import Algorithm, EmbedConfig


F = TypeVar("F", bound=Callable[..., Any])

_ALGORITHMS = click.Choice([a.value for a in Algorithm])
_KINDS = click.Choice([k.value for k in FeatureKind])
_ORDERS = click.Choice(["normalize-first", "derivative-first"])


def _reraise(fn: F) -> F:
    """Turn package errors into click's exit-code contract."""

    @functools.wraps(fn)
    def inner(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except errors.SteganalysisError as e:
            if e.exit_code == 2:
                raise click.UsageError(str(e)) from None
            raise click.ClickException(str(e)) from None

    return inner  # type: ignore[return-value]


def _embed_options(*, required: bool) -> Callable[[F], F]:
    def inner(fn: F) -> F:
        for option in reversed(
            [
                click.option(
                    "--algo",
                    type=_ALGORITHMS,
                    required=required,
                    default=None,
                    help="Embedding algorithm.",
                ),
                click.option(
                    "--bpb",
                    type=float,
                    default=None,
                    help="Capacity in percent of cover bits (LSB methods).",
                ),
                click.option(
                    "--strength",
                    type=float,
                    default=None,
                    help="Watermark strength (alpha).",
                ),
                click.option(
                    "--target-snr",
                    type=float,
                    default=None,
                    help="Target SNR in dB (DSSS).",
                ),
            ]
        ):
            fn = option(fn)
        return fn

    return inner


def _seed_option(fn: F) -> F:
    return click.option(  # type: ignore[no-any-return]
        "--seed",
        type=click.IntRange(0, seeding.SEED_MAX),
        default=0,
        show_default=True,
        help="Seed every random draw derives from.",
    )(fn)


def _jobs_option(fn: F) -> F:
    return click.option(  # type: ignore[no-any-return]
        "--jobs",
        type=click.IntRange(min=1),
        default=1,
        show_default=True,
        help="Files processed in parallel.",
    )(fn)


def _embed_config(
    algo: Optional[str],
    bpb: Optional[float],
    strength: Optional[float],
    target_snr: Optional[float],
    seed: int,
) -> Optional[EmbedConfig]:
    if algo is None:
        return None
    return EmbedConfig.for_algorithm(
        algo,
        capacity_bpb=bpb,
        strength=strength,
        target_snr_db=target_snr,
        seed=seed,
    )


def _calibration_config(
    algo: Optional[str],
    bpb: Optional[float],
    strength: Optional[float],
    target_snr: Optional[float],
    seed: int,
) -> Optional[EmbedConfig]:
    return _embed_config(
        algo,
        bpb,
        strength,
        target_snr,
        seeding.derive_seed(seed, seeding.CALIBRATION),
    )


def _hyper(
    c_reg: Optional[float], gamma: Optional[float]
) -> Tuple[Optional[float], Optional[float]]:
    if (c_reg is None) != (gamma is None):
        raise click.UsageError("give both --c-reg and --gamma, or neither")
    return c_reg, gamma


@click.group()
@click.option(
    "-v", "--verbose", count=True, help="More logging; repeat for debug."
)
def main(*, verbose: int) -> None:
    """Calibrated R-MFCC audio steganalysis."""
    configure(verbose)


@main.command("corpus")
@click.option("--synthetic", type=int, default=None, help="Synthetic covers.")
@click.option(
    "--covers",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="Directory of cover WAV files.",
)
@click.option("--duration", type=float, default=1.0, show_default=True)
@click.option("--max-duration", type=float, default=None)
@click.option("--sample-rate", type=int, default=44100, show_default=True)
@_embed_options(required=True)
@_seed_option
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_jobs_option
@_reraise
def cmd_corpus(
    *,
    synthetic: Optional[int],
    covers: Optional[str],
    duration: float,
    max_duration: Optional[float],
    sample_rate: int,
    algo: str,
    bpb: Optional[float],
    strength: Optional[float],
    target_snr: Optional[float],
    seed: int,
    out: str,
    jobs: int,
) -> None:
    """Build paired cover/stego WAVs and a manifest."""
    if (synthetic is None) == (covers is None):
        raise click.UsageError("give exactly one of --synthetic or --covers")
    cfg = _embed_config(algo, bpb, strength, target_snr, seed)
    assert cfg is not None

    sources: corpus.SynthesisSpec | list[pathlib.Path]
    if synthetic is not None:
        sources = corpus.SynthesisSpec(
            count=synthetic,
            duration=duration,
            max_duration=max_duration,
            sample_rate=sample_rate,
            seed=seeding.derive_seed(seed, seeding.SYNTHESIS),
        )
    else:
        assert covers is not None
        sources = sorted(pathlib.Path(covers).glob("*.wav"))

    manifest = corpus.build_corpus(sources, cfg, out, jobs=jobs)
    summary = manifest.snr_summary()
    click.echo(
        f"{len(manifest) // 2} pairs written to {out}, "
        f"snr {summary.mean:.2f} +/- {summary.std:.2f} dB"
    )


@main.command("extract")
@click.option(
    "--manifest", type=click.Path(exists=True, dir_okay=False), required=True
)
@click.option("--kind", type=_KINDS, default="plain", show_default=True)
@_embed_options(required=False)
@_seed_option
@click.option("--order", type=_ORDERS, default="normalize-first")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option(
    "--keep-going", is_flag=True, help="Skip files that cannot be used."
)
@_jobs_option
@_reraise
def cmd_extract(
    *,
    manifest: str,
    kind: str,
    algo: Optional[str],
    bpb: Optional[float],
    strength: Optional[float],
    target_snr: Optional[float],
    seed: int,
    order: features.PipelineOrder,
    out: str,
    keep_going: bool,
    jobs: int,
) -> None:
    """Write one feature row per manifest entry.

    Calibrated features also get OUT with a .calibration.json suffix,
    recording the embedder that later commands calibrate with.
    """
    if FeatureKind(kind) is FeatureKind.CALIBRATED and algo is None:
        raise click.UsageError("calibrated features need --algo")
    cal_cfg = _calibration_config(algo, bpb, strength, target_snr, seed)
    data = harness.extract_features(
        corpus.read_manifest(manifest),
        FeatureKind(kind),
        cal_cfg=cal_cfg,
        order=order,
        keep_going=keep_going,
        jobs=jobs,
    )
    write_features_csv(data, out)


@main.command("train")
@click.option(
    "--features",
    "features_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option("--c-reg", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option(
    "--folds", type=int, default=classifier.DEFAULT_FOLDS, show_default=True
)
@_seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_reraise
def cmd_train(
    *,
    features_path: str,
    c_reg: Optional[float],
    gamma: Optional[float],
    folds: int,
    seed: int,
    out: str,
) -> None:
    """Train an SVM; grid-search C and gamma unless both are given."""
    c_reg, gamma = _hyper(c_reg, gamma)
    data = read_features_csv(features_path)
    if c_reg is None or gamma is None:
        c_reg, gamma = classifier.grid_search(data, folds=folds, seed=seed)
    model = classifier.train_svm(data, c_reg, gamma)
    classifier.save_model(model, out)
    click.echo(
        f"C={c_reg!r} gamma={gamma!r} "
        f"support_vectors={len(model.support_vectors)}"
    )


@main.command("eval")
@click.option(
    "--features",
    "features_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--repetitions",
    type=click.IntRange(min=1),
    default=harness.DEFAULT_REPETITIONS,
    show_default=True,
)
@click.option("--c-reg", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option(
    "--folds", type=int, default=classifier.DEFAULT_FOLDS, show_default=True
)
@_seed_option
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_reraise
def cmd_eval(
    *,
    features_path: str,
    repetitions: int,
    c_reg: Optional[float],
    gamma: Optional[float],
    folds: int,
    seed: int,
    out: str,
) -> None:
    """Repeated 70/30 evaluation; writes report.json and roc.csv."""
    c_reg, gamma = _hyper(c_reg, gamma)
    report = harness.run_trials(
        read_features_csv(features_path),
        repetitions,
        c_reg=c_reg,
        gamma=gamma,
        folds=folds,
        seed=seed,
    )
    out_dir = pathlib.Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise errors.IoFailureError(f"cannot create {out}: {e}") from None
    harness.save_report(report, out_dir / "report.json")
    harness.write_roc_csv(report.roc, out_dir / "roc.csv")
    _echo_report("", report)


def _echo_report(prefix: str, report: harness.EvalReport) -> None:
    se, sp, ac = report.sensitivity, report.specificity, report.accuracy
    click.echo(
        f"{prefix}Se {se[0]:.2f}+/-{se[1]:.2f} "
        f"Sp {sp[0]:.2f}+/-{sp[1]:.2f} "
        f"Ac {ac[0]:.2f}+/-{ac[1]:.2f} "
        f"AUC {report.roc.auc:.4f}"
    )


@main.command("compare")
@click.option(
    "--manifest", type=click.Path(exists=True, dir_okay=False), required=True
)
@_embed_options(required=True)
@click.option(
    "--repetitions",
    type=click.IntRange(min=1),
    default=harness.DEFAULT_REPETITIONS,
    show_default=True,
)
@click.option("--c-reg", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option(
    "--folds", type=int, default=classifier.DEFAULT_FOLDS, show_default=True
)
@_seed_option
@click.option("--order", type=_ORDERS, default="normalize-first")
@click.option(
    "--ga", is_flag=True, help="Pick scatter features among GA-selected ones."
)
@click.option("--ga-population", type=int, default=200, show_default=True)
@click.option("--ga-generations", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_jobs_option
@_reraise
def cmd_compare(
    *,
    manifest: str,
    algo: str,
    bpb: Optional[float],
    strength: Optional[float],
    target_snr: Optional[float],
    repetitions: int,
    c_reg: Optional[float],
    gamma: Optional[float],
    folds: int,
    seed: int,
    order: features.PipelineOrder,
    ga: bool,
    ga_population: int,
    ga_generations: int,
    out: str,
    jobs: int,
) -> None:
    """Plain against calibrated features on identical splits."""
    c_reg, gamma = _hyper(c_reg, gamma)
    cal_cfg = _calibration_config(algo, bpb, strength, target_snr, seed)
    assert cal_cfg is not None
    ga_cfg = None
    if ga:
        ga_cfg = selection.GaConfig(
            population=ga_population,
            generations=ga_generations,
            folds=folds,
            seed=seeding.derive_seed(seed, seeding.GA),
        )
    comparison = harness.compare_feature_kinds(
        corpus.read_manifest(manifest),
        cal_cfg,
        repetitions=repetitions,
        c_reg=c_reg,
        gamma=gamma,
        folds=folds,
        seed=seed,
        order=order,
        ga=ga_cfg,
        jobs=jobs,
    )
    harness.write_comparison(comparison, out)
    _echo_report("plain      ", comparison.plain)
    _echo_report("calibrated ", comparison.calibrated)
    click.echo(f"AUC delta {comparison.auc_delta:+.4f}")


@main.command("scan")
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--features",
    "features_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Scan rows of a feature file instead of WAV files.",
)
@click.option("--order", type=_ORDERS, default="normalize-first")
@click.argument("wavs", nargs=-1, type=click.Path(dir_okay=False))
@_reraise
def cmd_scan(
    *,
    model_path: str,
    features_path: Optional[str],
    order: features.PipelineOrder,
    wavs: Tuple[str, ...],
) -> None:
    """Print a verdict and decision value per input."""
    if (features_path is None) == (not wavs):
        raise click.UsageError("give WAV files or --features, not both")
    model = classifier.load_model(model_path)

    if features_path is not None:
        data = read_features_csv(features_path)
        names = data.source_ids
        vectors = list(data)
    else:
        kind = model.feature_kind or FeatureKind.PLAIN
        names = list(wavs)
        vectors = [
            feature_vector(
                read_wav(path),
                kind,
                cal_cfg=model.calibration,
                source_id=corpus.source_id_of(path),
                order=order,
            )
            for path in wavs
        ]

    for name, vector in zip(names, vectors):
        label, value = classifier.predict(model, vector)
        click.echo(f"{name} {label.value} {value!r}")


@main.command("scales")
@click.option("--fs", type=float, default=44100.0, show_default=True)
@click.option("--points", type=int, default=512, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_reraise
def cmd_scales(*, fs: float, points: int, out: str) -> None:
    """Mel and R-Mel values over [0, fs/2] as CSV."""
    features.write_scale_csv(fs, points, out)
