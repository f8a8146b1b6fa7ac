"""Command-line interface: ingest, search, temporal, i2i, eval, serve."""

from __future__ import annotations

import json

import click

from .config import load_config
from .engine import build_engine
from .errors import FrameseekError
from .landmark import I2IParams
from .planner import ModalityWeights


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Engine config JSON (or ENGINE_CONFIG).")
@click.option("--mock/--no-mock", "mock_mode", default=None, help="Force deterministic mock clients.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, mock_mode: bool | None) -> None:
    """Multimodal video retrieval engine."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["mock_mode"] = mock_mode


def _load(ctx: click.Context, **overrides):
    if ctx.obj.get("mock_mode") is not None:
        overrides["mock_mode"] = ctx.obj["mock_mode"]
    return load_config(ctx.obj.get("config_path"), **overrides)


def _engine(ctx: click.Context, count_objects: bool = False, **overrides):
    try:
        return build_engine(_load(ctx, **overrides), count_objects=count_objects)
    except FrameseekError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option("--include-group", multiple=True, help="Only ingest these groups.")
@click.option("--exclude-group", multiple=True, help="Skip these groups.")
@click.option("--include-video", multiple=True, help="Only ingest these group/video names.")
@click.option("--exclude-video", multiple=True, help="Skip these group/video names.")
@click.pass_context
def ingest(ctx, include_group, exclude_group, include_video, exclude_video):
    """Build all indices from the configured data files and print the report."""
    overrides = {}
    if include_group:
        overrides["include_groups"] = tuple(include_group)
    if exclude_group:
        overrides["exclude_groups"] = tuple(exclude_group)
    if include_video:
        overrides["include_videos"] = tuple(include_video)
    if exclude_video:
        overrides["exclude_videos"] = tuple(exclude_video)
    engine = _engine(ctx, count_objects=True, **overrides)
    click.echo(json.dumps(engine.report.as_dict(), indent=2, ensure_ascii=False))


def _parse_weights(text: str | None) -> ModalityWeights | None:
    if not text:
        return None
    parts = dict(piece.split("=", 1) for piece in text.split(","))
    return ModalityWeights(**{name: float(value) for name, value in parts.items()})


@main.command()
@click.option("--mode", type=click.Choice(["semantic", "asr", "ocr", "object", "llandmark"]), default="semantic")
@click.option("--query", required=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--weights", "weights_text", default=None, help="e.g. semantic=0.5,asr=0.2,ocr=0.2,object=0.1")
@click.option("--include", multiple=True, help="Restrict to groups or group/video names.")
@click.option("--exclude", multiple=True, help="Drop groups or group/video names.")
@click.option("--translate/--no-translate", default=False)
@click.option("--json", "as_json", is_flag=True, help="Print the full response JSON.")
@click.option("--report-dir", type=click.Path(), default=None, help="Also write hits.tsv and figures here.")
@click.pass_context
def search(ctx, mode, query, k, weights_text, include, exclude, translate, as_json, report_dir):
    """Run one search and print 'key<TAB>score' lines (or full JSON)."""
    engine = _engine(ctx)
    try:
        response = engine.search(
            mode,
            query,
            k=k,
            weights=_parse_weights(weights_text),
            include=list(include) or None,
            exclude=list(exclude) or None,
            translate=translate,
        )
    except (FrameseekError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(json.dumps(response, indent=2, ensure_ascii=False))
        return
    rows = []
    for row in response["results"]:
        if "key" in row:
            rows.append((row["key"], row.get("fused", row.get("score", 0.0))))
        else:
            rows.append((f"{row['group_id']}/{row['video_id']}[{row['start_frame']}-{row['end_frame']}]", row["score"]))
    for key, score in rows:
        click.echo(f"{key}\t{score:.6f}")
    if report_dir:
        from .report import write_search_report

        for path in write_search_report(rows, report_dir, title=f"{mode}: {query[:40]}"):
            click.echo(f"wrote {path}", err=True)


@main.command()
@click.option("--query", "queries", multiple=True, required=True, help="Ordered step queries; repeat per step.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--k-per-step", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def temporal(ctx, queries, k, k_per_step, as_json):
    """Retrieve videos containing the ordered sequence of events."""
    engine = _engine(ctx)
    try:
        response = engine.temporal(list(queries), k=k, k_per_step=k_per_step)
    except (FrameseekError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(json.dumps(response, indent=2, ensure_ascii=False))
        return
    for row in response["results"]:
        click.echo(f"{row['group_id']}/{row['video_id']}\t{row['score']:.6f}")


@main.command()
@click.option("--query", required=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--per-reference-top-k", type=int, default=50, show_default=True)
@click.option("--max-landmarks", type=int, default=2, show_default=True)
@click.option("--images-per-landmark", type=int, default=3, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def i2i(ctx, query, k, per_reference_top_k, max_landmarks, images_per_landmark, as_json):
    """Landmark image-to-image retrieval."""
    engine = _engine(ctx)
    params = I2IParams(
        per_reference_top_k=per_reference_top_k,
        max_landmarks=max_landmarks,
        images_per_landmark=images_per_landmark,
    )
    try:
        response = engine.i2i(query, params=params, k=k)
    except (FrameseekError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(json.dumps(response, indent=2, ensure_ascii=False))
        return
    for row in response["results"]:
        click.echo(f"{row['key']}\t{row['score']:.6f}")


@main.command("refine-ocr")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True), help="OCR JSONL to refine.")
@click.option("--output", "output_path", required=True, type=click.Path(), help="Where to write refined JSONL.")
@click.option("--batch-size", type=int, default=20, show_default=True)
@click.pass_context
def refine_ocr(ctx, input_path, output_path, batch_size):
    """Fill text_refined on an OCR file via the configured LLM (offline step)."""
    import json as json_mod

    from .catalog import FrameKey
    from .engine import Engine
    from .ocr import OcrEntry, refine_batch, strip_diacritics

    engine = Engine(_load(ctx))
    if engine.llm is None:
        raise click.ClickException("no LLM configured; set LLM_ENDPOINT or use --mock")
    records = []
    entries = []
    with open(input_path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            raw = raw.strip()
            if not raw:
                continue
            record = json_mod.loads(raw)
            records.append(record)
            entries.append(
                OcrEntry(
                    key=FrameKey(str(record["group_id"]), str(record["video_id"]), int(record["frame_id"])),
                    text_raw=str(record["text_raw"]),
                    text_nonaccent=strip_diacritics(str(record["text_raw"])),
                    confidence=float(record.get("confidence", 1.0)),
                    text_refined=record.get("text_refined"),
                )
            )
    pending = [e for e in entries if e.text_refined is None]
    refined = refine_batch(pending, engine.llm, batch_size=batch_size)
    refined_iter = iter(refined)
    with open(output_path, "w", encoding="utf-8") as handle:
        for record, entry in zip(records, entries):
            out = dict(record)
            out["text_refined"] = entry.text_refined if entry.text_refined is not None else next(refined_iter).text_refined
            handle.write(json_mod.dumps(out, ensure_ascii=False) + "\n")
    click.echo(f"refined {len(pending)} of {len(entries)} entries -> {output_path}", err=True)


@main.command("eval")
@click.option("--submission", required=True, type=click.Path(exists=True))
@click.option("--ground-truth", required=True, type=click.Path(exists=True))
@click.option("--ks", default="1,5,20,50,100", show_default=True)
@click.option("--strict-answers", is_flag=True, help="Disable answer normalization for QA.")
@click.option("--report-dir", type=click.Path(), default=None, help="Write scores.tsv and figures here.")
def eval_command(submission, ground_truth, ks, strict_answers, report_dir):
    """Score a submission file against ground truth."""
    from .evaluation import KSet, evaluate, parse_ground_truth, parse_submission

    try:
        kset = KSet(tuple(int(piece) for piece in ks.split(",")))
        report = evaluate(
            parse_submission(submission),
            parse_ground_truth(ground_truth),
            ks=kset,
            strict_answers=strict_answers,
        )
    except (FrameseekError, ValueError) as exc:
        raise click.ClickException(str(exc))
    for query_id, score in report.per_query:
        click.echo(f"{query_id}\t{score:.6f}")
    click.echo(f"MEAN\t{report.mean_score:.6f}")
    if report.missing_queries:
        click.echo(f"missing predictions for: {', '.join(report.missing_queries)}", err=True)
    if report_dir:
        from .report import write_eval_report

        for path in write_eval_report(report, report_dir):
            click.echo(f"wrote {path}", err=True)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--allow-reingest", is_flag=True, help="Permit POST /api/ingest to rebuild indices.")
@click.pass_context
def serve(ctx, host, port, allow_reingest):
    """Start the HTTP API (and static UI if configured)."""
    from .server import serve as run_server

    try:
        run_server(_load(ctx), host=host, port=port, allow_reingest=allow_reingest)
    except FrameseekError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
