"""Session state machine and job execution for the interactive service.

A session wraps one mask corpus plus its embeddings. Mutations (prompts,
cluster decisions, recluster, resample, reset) recompute the filter state and
append to an event log; replaying that log against a fresh session over the
same corpus reproduces the same state hash. At most one mutating operation
runs per session at a time.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from maskforge.core.serial import canonical_json
from maskforge.core.types import MaskRecord
from maskforge.embedding import EmbeddingMatrix, load_embeddings, synthetic_text_embed
from maskforge.errors import (
    BusyError,
    MaskforgeError,
    ParameterError,
    StaleStateError,
    ValidationError,
)
from maskforge.filtering import (
    ClusterAssignment,
    TextPrompt,
    deduplicate,
    hac_cluster,
    histogram,
    resample_balanced,
    text_filter,
)
from maskforge.segmentation import import_masks

MUTATING_KINDS = ("text_filter", "recluster", "resample", "decision", "reset")
JOB_KINDS = ("recluster", "resample", "text_filter", "augment", "train", "eval")


@dataclass
class Job:
    id: str
    session_id: str
    kind: str
    params: dict
    status: str = "queued"
    result: dict | None = None
    error: dict | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "kind": self.kind,
            "params": self.params,
            "status": self.status,
            "result": self.result,
            "error": self.error,
        }


class Session:
    def __init__(
        self,
        session_id: str,
        mask_path: str,
        embedding_path: str,
        frames_dir: str | None = None,
        dedup_tau: float | None = None,
        seed: int = 0,
    ):
        self.id = session_id
        self.mask_path = str(mask_path)
        self.embedding_path = str(embedding_path)
        self.frames_dir = str(frames_dir) if frames_dir else None
        self.dedup_tau = dedup_tau
        self.seed = seed
        self.lock = threading.Lock()

        self.masks: dict[str, MaskRecord] = {}
        self.matrix: EmbeddingMatrix | None = None
        self.prompts: list[TextPrompt] = []
        self.survivors: list[str] = []
        self.assignment: ClusterAssignment | None = None
        self.decisions: dict[int, str] = {}
        self.resample_ids: list[str] | None = None
        self.log: list[dict] = []
        self.version = 0

        self._load_corpus()
        self._recompute_survivors()

    # -- corpus ------------------------------------------------------------

    def _load_corpus(self) -> None:
        masks = import_masks(self.mask_path)
        matrix = load_embeddings(self.embedding_path)
        mask_ids = {m.id for m in masks}
        matrix_ids = set(matrix.ids)
        if mask_ids != matrix_ids:
            orphans = sorted(mask_ids ^ matrix_ids)
            raise ValidationError(
                f"mask/embedding id mismatch; {len(orphans)} orphan id(s), "
                f"e.g. {orphans[:5]}"
            )
        self.masks = {m.id: m for m in masks}
        self.matrix = matrix

    # -- state recomputation -----------------------------------------------

    def _recompute_survivors(self) -> None:
        surviving = sorted(self.masks)
        for prompt in self.prompts:
            record = synthetic_text_embed(prompt.text)
            sub = self.matrix.subset(surviving)
            surviving = text_filter(sub, [record.vector], prompt.mode, prompt.tau)
        if self.dedup_tau is not None and surviving:
            surviving = deduplicate(self.matrix.subset(surviving), self.dedup_tau)
        self.survivors = sorted(surviving)

    def _invalidate_clustering(self) -> None:
        self.assignment = None
        self.decisions = {}
        self.resample_ids = None

    # -- mutations (callers hold the lock) ----------------------------------

    def apply_prompt(self, text: str, mode: str, tau: float) -> dict:
        before = len(self.survivors)
        self.prompts.append(TextPrompt(text, mode, tau))
        try:
            self._recompute_survivors()
        except MaskforgeError:
            self.prompts.pop()
            raise
        self._invalidate_clustering()
        return {"before": before, "after": len(self.survivors)}

    def recluster(self, k: int) -> dict:
        if not self.survivors:
            raise ParameterError("no surviving masks to cluster")
        k = min(int(k), len(self.survivors))
        if k < 1:
            raise ParameterError("k must be >= 1")
        decisions_reset = bool(self.decisions)
        self.assignment = hac_cluster(self.matrix.subset(self.survivors), k)
        self.decisions = {}
        self.resample_ids = None
        return {"k": k, "decisions_reset": decisions_reset}

    def decide(self, cluster_id: int, decision: str) -> dict:
        if self.assignment is None:
            raise ParameterError("no clustering available; recluster first")
        if decision not in ("keep", "drop"):
            raise ParameterError(f"decision must be keep or drop, got {decision!r}")
        if not 0 <= cluster_id < self.assignment.k:
            raise KeyError(f"unknown cluster {cluster_id}")
        self.decisions[cluster_id] = decision
        self.resample_ids = None
        return {"cluster_id": cluster_id, "decision": decision}

    def resample(self, quota: int, seed: int) -> dict:
        if self.assignment is None:
            raise ParameterError("no clustering available; recluster first")
        if quota < 1:
            raise ParameterError("quota must be >= 1")
        kept_clusters = [
            c for c in range(self.assignment.k) if self.decisions.get(c) != "drop"
        ]
        members = self.assignment.members()
        # sample per original cluster index so seeds stay stable under decisions
        from maskforge.core.seeding import rng_for

        selected: list[str] = []
        for cluster in kept_clusters:
            ids = members[cluster]
            if len(ids) <= quota:
                selected.extend(ids)
                continue
            rng = rng_for(seed, "resample", cluster)
            picks = rng.choice(len(ids), size=quota, replace=False)
            selected.extend(ids[p] for p in sorted(picks))
        self.resample_ids = sorted(selected)
        return {"count": len(self.resample_ids), "empty_result": not self.resample_ids}

    def reset(self) -> dict:
        self.prompts = []
        self._recompute_survivors()
        self._invalidate_clustering()
        return {"count": len(self.survivors)}

    # -- views ---------------------------------------------------------------

    def label_of(self, mask_id: str) -> str | None:
        return self.masks[mask_id].label

    def histogram_payload(self) -> dict:
        survivors_hist = histogram(self.label_of(i) for i in self.survivors)
        payload = {
            "survivors": [[label, count] for label, count in survivors_hist],
            "resampled": None,
        }
        if self.resample_ids is not None:
            resampled_hist = histogram(self.label_of(i) for i in self.resample_ids)
            payload["resampled"] = [[label, count] for label, count in resampled_hist]
        return payload

    def clusters_payload(self, samples_per_cluster: int = 6) -> list[dict]:
        if self.assignment is None:
            return []
        out = []
        for cluster, members in enumerate(self.assignment.members()):
            out.append({
                "cluster_id": cluster,
                "size": len(members),
                "decision": self.decisions.get(cluster, "undecided"),
                "sample_mask_ids": members[:samples_per_cluster],
                "histogram": [
                    [label, count]
                    for label, count in histogram(self.label_of(i) for i in members)
                ],
            })
        return out

    def state_doc(self) -> dict:
        return {
            "prompts": [
                {"text": p.text, "mode": p.mode, "tau": p.tau} for p in self.prompts
            ],
            "dedup_tau": self.dedup_tau,
            "survivors": self.survivors,
            "assignment": None if self.assignment is None else {
                "k": self.assignment.k,
                "assignment": self.assignment.assignment,
                "merge_tree": [list(e) for e in self.assignment.merge_tree],
            },
            "decisions": {str(k): v for k, v in sorted(self.decisions.items())},
            "resample_ids": self.resample_ids,
        }

    def state_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.state_doc()).encode()).hexdigest()

    def to_snapshot(self) -> dict:
        return {
            "id": self.id,
            "mask_path": self.mask_path,
            "embedding_path": self.embedding_path,
            "frames_dir": self.frames_dir,
            "dedup_tau": self.dedup_tau,
            "seed": self.seed,
            "log": self.log,
            "version": self.version,
        }


def apply_log_entry(session: Session, entry: dict) -> None:
    """Re-apply one state-mutating log entry; artifact jobs are skipped."""
    kind = entry["kind"]
    params = entry["params"]
    if kind == "text_filter":
        session.apply_prompt(params["text"], params["mode"], params["tau"])
    elif kind == "recluster":
        session.recluster(params["k"])
    elif kind == "decision":
        session.decide(params["cluster_id"], params["decision"])
    elif kind == "resample":
        session.resample(params["quota"], params["seed"])
    elif kind == "reset":
        session.reset()


def replay_log(session: Session, entries: list[dict]) -> None:
    for entry in entries:
        if entry.get("status") == "done" and entry["kind"] in MUTATING_KINDS:
            apply_log_entry(session, entry)


class SessionStore:
    """In-memory sessions with JSON snapshots on disk and a small job pool."""

    def __init__(self, sessions_dir: str | Path | None = None, job_workers: int = 2):
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self.sessions_dir = Path(sessions_dir) if sessions_dir else None
        self._pool = ThreadPoolExecutor(max_workers=job_workers)
        self._guard = threading.Lock()

    def create_session(
        self,
        mask_path: str,
        embedding_path: str,
        frames_dir: str | None = None,
        dedup_tau: float | None = None,
        seed: int = 0,
    ) -> Session:
        session_id = f"s-{uuid.uuid4().hex[:10]}"
        session = Session(session_id, mask_path, embedding_path, frames_dir, dedup_tau, seed)
        with self._guard:
            self.sessions[session_id] = session
        self._persist(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._guard:
            if session_id in self.sessions:
                return self.sessions[session_id]
        loaded = self._load_snapshot(session_id)
        if loaded is None:
            raise KeyError(f"unknown session {session_id}")
        with self._guard:
            self.sessions[session_id] = loaded
        return loaded

    def find_mask(self, mask_id: str) -> tuple[Session, MaskRecord]:
        with self._guard:
            candidates = list(self.sessions.values())
        for session in candidates:
            if mask_id in session.masks:
                return session, session.masks[mask_id]
        raise KeyError(f"mask {mask_id} not loaded in any session")

    # -- mutations -----------------------------------------------------------

    def mutate(self, session_id: str, kind: str, params: dict,
               expected_version: int | None = None) -> dict:
        session = self.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise BusyError(f"session {session_id} has a mutating operation in flight")
        try:
            if expected_version is not None and expected_version != session.version:
                raise StaleStateError(
                    f"expected version {expected_version}, session is at {session.version}"
                )
            entry = {
                "seq": len(session.log),
                "kind": kind,
                "params": params,
                "status": "running",
            }
            try:
                result = apply_or_run(session, kind, params)
                entry["status"] = "done"
                entry["result"] = result
            except Exception:
                entry["status"] = "failed"
                session.log.append(entry)
                self._persist(session)
                raise
            session.log.append(entry)
            session.version += 1
            self._persist(session)
            return result
        finally:
            session.lock.release()

    # -- jobs ------------------------------------------------------------------

    def launch_job(self, session_id: str, kind: str, params: dict) -> Job:
        if kind not in JOB_KINDS:
            raise ParameterError(f"unknown job kind {kind!r}; expected one of {JOB_KINDS}")
        session = self.get(session_id)
        mutating = kind in MUTATING_KINDS
        if mutating and session.lock.locked():
            raise BusyError(f"session {session_id} has a mutating operation in flight")
        job = Job(id=f"j-{uuid.uuid4().hex[:10]}", session_id=session_id,
                  kind=kind, params=params)
        with self._guard:
            self.jobs[job.id] = job
        self._pool.submit(self._run_job, job)
        return job

    def get_job(self, job_id: str) -> Job:
        with self._guard:
            if job_id not in self.jobs:
                raise KeyError(f"unknown job {job_id}")
            return self.jobs[job_id]

    def _run_job(self, job: Job) -> None:
        job.status = "running"
        session = self.get(job.session_id)
        try:
            if job.kind in MUTATING_KINDS:
                result = self.mutate(job.session_id, job.kind, job.params)
            else:
                with session.lock:
                    result = run_artifact_job(session, job.kind, job.params)
                    entry = {
                        "seq": len(session.log),
                        "kind": job.kind,
                        "params": job.params,
                        "status": "done",
                        "result": result,
                    }
                    session.log.append(entry)
                    self._persist(session)
            job.result = result
            job.status = "done"
        except Exception as exc:  # failure payload is part of the job contract
            job.error = {"code": type(exc).__name__, "message": str(exc)}
            job.status = "failed"

    # -- persistence ------------------------------------------------------------

    def _persist(self, session: Session) -> None:
        if self.sessions_dir is None:
            return
        path = self.sessions_dir / session.id / "session.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(session.to_snapshot(), sort_keys=True, indent=2) + "\n")

    def _load_snapshot(self, session_id: str) -> Session | None:
        if self.sessions_dir is None:
            return None
        path = self.sessions_dir / session_id / "session.json"
        if not path.exists():
            return None
        doc = json.loads(path.read_text())
        session = Session(
            doc["id"], doc["mask_path"], doc["embedding_path"],
            doc.get("frames_dir"), doc.get("dedup_tau"), int(doc.get("seed", 0)),
        )
        replay_log(session, doc.get("log", []))
        session.log = doc.get("log", [])
        session.version = int(doc.get("version", 0))
        return session


def apply_or_run(session: Session, kind: str, params: dict) -> dict:
    if kind == "text_filter":
        return session.apply_prompt(str(params["text"]), str(params["mode"]),
                                    float(params["tau"]))
    if kind == "recluster":
        return session.recluster(int(params["k"]))
    if kind == "decision":
        return session.decide(int(params["cluster_id"]), str(params["decision"]))
    if kind == "resample":
        params.setdefault("seed", session.seed)
        return session.resample(int(params["quota"]), int(params["seed"]))
    if kind == "reset":
        return session.reset()
    raise ParameterError(f"unknown mutation {kind!r}")


def run_artifact_job(session: Session, kind: str, params: dict) -> dict:
    """Non-mutating jobs: augment from the session's current mask set, train, eval."""
    if kind == "augment":
        return _augment_job(session, params)
    if kind in ("train", "eval"):
        return _pipeline_job(kind, params)
    raise ParameterError(f"unknown job kind {kind!r}")


def _augment_job(session: Session, params: dict) -> dict:
    from maskforge.augmentation import PROFILES, generate_pairs
    from maskforge.dataset import emit_dataset
    from maskforge.pipeline import _load_frames, _load_targets

    if session.frames_dir is None:
        raise ParameterError("session was created without frames_dir; cannot render")
    use = params.get("use", "resample" if session.resample_ids is not None else "survivors")
    ids = session.resample_ids if use == "resample" else session.survivors
    if not ids:
        raise ParameterError(f"current {use} set is empty")
    masks = [session.masks[i] for i in ids]
    frames = _load_frames(Path(session.frames_dir))
    targets = _load_targets(Path(params["targets_root"]))
    profile = PROFILES[params.get("profile", "limited")]
    seed = int(params.get("seed", session.seed))
    samples = generate_pairs(masks, frames, targets, profile, seed=seed, render=True)
    out_dir = Path(params["out_dir"])
    manifest = emit_dataset(samples, out_dir, config_hash=params.get("config_hash", ""))
    return {
        "samples": len(manifest.samples),
        "positives": manifest.positives,
        "manifest": str(out_dir / "manifest.json"),
    }


def _pipeline_job(kind: str, params: dict) -> dict:
    from maskforge.config import PipelineConfig
    from maskforge.pipeline import stage_eval, stage_train

    cfg = PipelineConfig.load(params.get("config_path"), params.get("overrides", {}))
    out_root = Path(params["out_root"])
    if kind == "train":
        path = stage_train(cfg, out_root, protocol=params.get("protocol", "pretrain_finetune"))
    else:
        model = params.get("model_path")
        path = stage_eval(cfg, out_root, model_path=Path(model) if model else None)
    report = json.loads((path / "report.json").read_text())
    return {"artifact": str(path), "report": report}
