"""HTTP facade over a prediction run: review queue, document views with
character-anchored highlights, decision recording, and KB emission.

The service is read-only with respect to model artifacts; the only mutable
state is the review store, whose decisions append to the run's decision
log.  Highlight offsets always come from the server-side token spans; the
client never re-tokenizes.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import PipelineConfig
from .pipeline import MissingStageError, RunPaths
from .review import (AlreadyDecidedError, ReviewStore, UnknownItemError,
                     load_queue_items)
from .riskdb import ROD_COLUMNS, KB_PROVENANCE_COLUMNS, emit_kb, record_to_cells


class RunContext:
    """Run artifacts loaded for serving."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.run_id = config.resolved_run_id()
        self.paths = RunPaths(config.run_dir())
        if not self.paths.queue.exists():
            raise MissingStageError("predict", "serve")
        self.store = ReviewStore(load_queue_items(self.paths.queue),
                                 self.paths.decisions_log)
        self.sentences: dict[str, list[dict]] = {}
        with open(self.paths.sentences, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.sentences.setdefault(rec["pmid"], []).append(rec)
        self.triples: dict[tuple[str, int], list[dict]] = {}
        if self.paths.predictions.exists():
            with open(self.paths.predictions, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        key = (rec["pmid"], rec["sent_id"])
                        self.triples.setdefault(key, []).append(rec)
        self.asc_scores: dict[tuple[str, int], float] = {}
        if self.paths.asc_scores.exists():
            with open(self.paths.asc_scores, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self.asc_scores[(rec["pmid"], rec["sent_id"])] = rec["score"]

    def document_view(self, pmid: str) -> dict | None:
        records = self.sentences.get(pmid)
        if records is None:
            return None
        from .review import triple_item_id

        sentences = []
        for rec in sorted(records, key=lambda r: r["sent_id"]):
            tokens = rec["tokens"]
            key = (pmid, rec["sent_id"])

            def char_span(tok_span):
                return [tokens[tok_span[0]]["start"], tokens[tok_span[1] - 1]["end"]]

            triples = []
            entities: dict[tuple, dict] = {}
            for t in self.triples.get(key, ()):
                gene_span = tuple(t["gene_span"])
                est_span = tuple(t["estimate_span"])
                for span, etype in ((gene_span, "germline_mutation"),
                                    (est_span, "risk_estimate")):
                    entities.setdefault(span, {
                        "token_start": span[0], "token_end": span[1],
                        "start": char_span(span)[0], "end": char_span(span)[1],
                        "type": etype,
                    })
                triples.append({
                    **t,
                    "item_id": triple_item_id(pmid, rec["sent_id"],
                                              gene_span, est_span),
                    "gene_chars": char_span(gene_span),
                    "estimate_chars": char_span(est_span),
                })
            score = self.asc_scores.get(key)
            asc = None
            if score is not None:
                asc = {"score": score,
                       "predicted": score >= self.config.ascertainment.threshold}
            sentences.append({
                "sent_id": rec["sent_id"], "section": rec["section"],
                "text": rec["text"], "ascertainment": asc,
                "entities": sorted(entities.values(), key=lambda e: e["token_start"]),
                "triples": triples,
            })
        return {"pmid": pmid, "sentences": sentences}

    def list_runs(self) -> list[dict]:
        out = []
        workdir = Path(self.config.workdir)
        if workdir.exists():
            for metadata in sorted(workdir.glob("*/metadata.json")):
                try:
                    out.append(json.loads(metadata.read_text(encoding="utf-8")))
                except json.JSONDecodeError:
                    continue
        return out


class DecisionRequest(BaseModel):
    item_id: str
    status: str
    edited_payload: dict | None = None


class EmitRequest(BaseModel):
    path: str | None = None


def build_app(ctx: RunContext) -> FastAPI:
    app = FastAPI(title="penkb review service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.get("/queue")
    def queue(pmid: str | None = None, kind: str | None = None,
              min_confidence: float | None = None):
        items = ctx.store.pending(pmid=pmid, kind=kind,
                                  min_confidence=min_confidence)
        return {"items": [i.as_dict() for i in items]}

    @app.get("/document/{pmid}")
    def document(pmid: str):
        view = ctx.document_view(pmid)
        if view is None:
            raise HTTPException(status_code=404, detail=f"unknown document {pmid}")
        return view

    @app.post("/decision")
    def decision(req: DecisionRequest,
                 x_reviewer_id: str | None = Header(default="anonymous")):
        if req.status not in ("accepted", "edited", "rejected"):
            raise HTTPException(status_code=400,
                                detail=f"invalid decision status {req.status!r}")
        try:
            item = ctx.store.decide(req.item_id, req.status, req.edited_payload,
                                    reviewer=x_reviewer_id or "anonymous")
        except UnknownItemError:
            raise HTTPException(status_code=404,
                                detail=f"unknown item {req.item_id}") from None
        except AlreadyDecidedError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return item.as_dict()

    @app.post("/emit-kb")
    def emit(req: EmitRequest):
        rows, problems = ctx.store.kb_rows(model_version=ctx.run_id)
        path = Path(req.path) if req.path else ctx.paths.kb_csv
        emit_kb(rows, path)
        emitted = [dict(zip(ROD_COLUMNS + KB_PROVENANCE_COLUMNS,
                            record_to_cells(r.record)
                            + [str(r.sent_id), r.model_version, r.reviewer_decision]))
                   for r in rows if r.reviewer_decision in ("accepted", "edited")]
        return {"path": str(path), "n_rows": len(emitted), "rows": emitted,
                "problems": problems}

    @app.get("/runs")
    def runs():
        return JSONResponse(ctx.list_runs())

    frontend = ctx.config.service.frontend_dir
    if frontend and Path(frontend).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="ui")
    return app


def serve(config: PipelineConfig):
    import uvicorn

    ctx = RunContext(config)
    app = build_app(ctx)
    uvicorn.run(app, host=config.service.host, port=config.service.port,
                log_level="info")
