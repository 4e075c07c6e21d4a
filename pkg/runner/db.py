"""
Run ledger.
Stores one row per distinct command line (keyed by its fingerprint) using SQLAlchemy.
"""
import hashlib
import json
import logging
import os
import time
from typing import List, Optional, Sequence

from sqlalchemy import Column, Integer, Text, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

logger = logging.getLogger(__name__)

DATABASE_URL = os.environ.get("UNCOND_DATABASE_URL", "sqlite:///./data/runs.db")

Base = declarative_base()
SessionLocal = sessionmaker(autocommit=False, autoflush=False)
_initialized_url: Optional[str] = None


class Run(Base):
    """
    One recorded CLI run. Re-running the same argv updates the row.
    """
    __tablename__ = "runs"

    run_id = Column(Text, primary_key=True, index=True)  # SHA-256 of the canonical argv
    subcommand = Column(Text, nullable=False)
    argv = Column(Text, nullable=False)  # JSON list
    seed = Column(Integer, nullable=True)
    exit_status = Column(Integer, nullable=False)
    summary = Column(Text, nullable=True)
    output_path = Column(Text, nullable=True)
    created_at = Column(Integer, default=lambda: int(time.time()))

    def to_dict(self) -> dict:
        return {
            "runId": self.run_id,
            "subcommand": self.subcommand,
            "argv": json.loads(self.argv),
            "seed": self.seed,
            "exitStatus": self.exit_status,
            "summary": self.summary,
            "outputPath": self.output_path,
            "createdAt": self.created_at,
        }


def init_db(url: Optional[str] = None) -> None:
    """
    Bind the session factory to a database and create tables.

    Args:
        url: SQLAlchemy URL; defaults to UNCOND_DATABASE_URL
    """
    global _initialized_url
    url = url or DATABASE_URL
    if url == _initialized_url:
        return
    if url.startswith("sqlite:///"):
        db_path = url.replace("sqlite:///", "")
        os.makedirs(os.path.dirname(db_path) or ".", exist_ok=True)
    engine = create_engine(url, connect_args={"check_same_thread": False} if "sqlite" in url else {})
    Base.metadata.create_all(bind=engine)
    SessionLocal.configure(bind=engine)
    _initialized_url = url
    logger.debug(f"Run ledger bound to {url}")


def fingerprint(argv: Sequence[str]) -> str:
    """
    Stable run id: SHA-256 over the sorted `option=value` check string.

    Flags are paired with the value that follows them, so reordering options
    on the command line does not change the id.
    """
    args = list(argv)
    head = args[0] if args else ""
    pairs = []
    i = 1
    while i < len(args):
        key = args[i]
        if key.startswith("--") and i + 1 < len(args) and not args[i + 1].startswith("--"):
            pairs.append(f"{key}={args[i + 1]}")
            i += 2
        else:
            pairs.append(key)
            i += 1
    check_string = "\n".join([head] + sorted(pairs))
    return hashlib.sha256(check_string.encode()).hexdigest()


def record_run(argv: Sequence[str], subcommand: str, seed: Optional[int], exit_status: int,
               summary: Optional[str] = None, output_path: Optional[str] = None) -> str:
    """
    Create or update the ledger row for this command line.

    Returns:
        The run id
    """
    init_db()
    run_id = fingerprint(argv)
    db = SessionLocal()
    try:
        run = db.query(Run).filter(Run.run_id == run_id).first()
        if run:
            run.exit_status = exit_status
            run.summary = summary
            run.output_path = output_path
            run.created_at = int(time.time())
        else:
            run = Run(
                run_id=run_id,
                subcommand=subcommand,
                argv=json.dumps(list(argv)),
                seed=seed,
                exit_status=exit_status,
                summary=summary,
                output_path=output_path,
                created_at=int(time.time()),
            )
            db.add(run)
        db.commit()
    finally:
        db.close()
    logger.info(f"Recorded run {run_id[:12]} ({subcommand}, exit {exit_status})")
    return run_id


def get_run(run_id: str) -> Optional[dict]:
    init_db()
    db = SessionLocal()
    try:
        run = db.query(Run).filter(Run.run_id == run_id).first()
        return run.to_dict() if run else None
    finally:
        db.close()


def list_runs(limit: int = 20) -> List[dict]:
    """Most recent runs first."""
    init_db()
    db = SessionLocal()
    try:
        runs = db.query(Run).order_by(Run.created_at.desc(), Run.run_id).limit(limit).all()
        return [run.to_dict() for run in runs]
    finally:
        db.close()
