"""Subprocess sandbox for candidate training scripts.

Each run gets a private working directory. A ``sitecustomize`` audit hook
refuses writes outside that directory and blocks process spawning; resource
limits cap file size and CPU time, and a wall-clock timeout kills the whole
process group.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from pathlib import Path

try:
    import resource
except ImportError:  # pragma: no cover - non-POSIX
    resource = None

from ..scoring import ProxyRegistry
from . import protocol
from .base import (
    BuggyVerdict,
    CandidatePayload,
    FullEvalResult,
    MalformedReport,
    ProxyReport,
    SandboxFailure,
    SandboxLimits,
)

log = logging.getLogger(__name__)

CANDIDATE_FILE = "candidate.py"
RUNNER_FILE = "_proxy_runner.py"

GUARD_SOURCE = r'''
import os, sys

_ROOT = os.path.realpath(os.environ.get("SANDBOX_ROOT", os.getcwd()))
_ALLOWED = (_ROOT, "/dev/null")
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_APPEND | os.O_TRUNC


def _inside(path):
    try:
        p = os.path.realpath(os.fsdecode(path))
    except Exception:
        return False
    return any(p == a or p.startswith(a + os.sep) for a in _ALLOWED)


def _deny(what):
    raise PermissionError("sandbox: " + what)


def _hook(event, args):
    if event == "open":
        path, mode, flags = args
        if isinstance(path, int):
            return
        writing = (mode is not None and any(c in mode for c in "wax+")) or (
            mode is None and isinstance(flags, int) and flags & _WRITE_FLAGS
        )
        if writing and not _inside(path):
            _deny("write outside workdir: %s" % (path,))
    elif event in ("os.remove", "os.rmdir", "os.mkdir", "os.truncate", "os.chmod",
                   "os.chown", "os.utime", "shutil.rmtree", "shutil.copyfile"):
        target = args[1] if event == "shutil.copyfile" else args[0]
        if not isinstance(target, int) and not _inside(target):
            _deny("%s outside workdir: %s" % (event, target))
    elif event in ("os.rename", "os.link", "os.symlink"):
        if not _inside(args[0]) or not _inside(args[1]):
            _deny(event + " outside workdir")
    elif event in ("os.system", "os.exec", "os.posix_spawn", "os.spawn",
                   "subprocess.Popen", "os.fork", "os.forkpty", "pty.spawn"):
        _deny(event + " is not allowed")


sys.addaudithook(_hook)
'''

RUNNER_SOURCE = r'''
import importlib.util, json, os, sys, traceback
import numpy as np

SENTINEL = float(os.environ["PROXY_SENTINEL"])
NAMES = json.loads(os.environ["PROXY_NAMES"])
NOISE_FRAC = float(os.environ.get("PROXY_NOISE_FRAC", "0.1"))
MASK_FRAC = float(os.environ.get("PROXY_MASK_FRAC", "0.2"))
rng = np.random.default_rng(int(os.environ.get("PROXY_SEED", "0")))

spec = importlib.util.spec_from_file_location("candidate", "candidate.py")
cand = importlib.util.module_from_spec(spec)
sys.modules["candidate"] = cand
spec.loader.exec_module(cand)

model = cand.train(epochs=1, data_fraction=float(os.environ.get("PROXY_DATA_FRACTION", "0.1")))
if hasattr(cand, "save_submission"):
    cand.save_submission(model, os.environ["ARTIFACT_PATH"])


def _noisy(X):
    X = np.asarray(X, dtype=float)
    return X + rng.normal(0.0, 1.0, X.shape) * NOISE_FRAC * X.std(axis=0)


def _dropout(X):
    X = np.asarray(X, dtype=float)
    return X * (rng.random(X.shape) >= MASK_FRAC)


BUILTIN = {
    "one_epoch": lambda: cand.validate(model),
    "noisy": lambda: cand.validate(model, transform=_noisy),
    "dropout": lambda: cand.validate(model, transform=_dropout),
}
extra = getattr(cand, "PROXIES", {})
scores = {}
for name in NAMES:
    try:
        if name in BUILTIN:
            value = float(BUILTIN[name]())
        else:
            value = float(extra[name](model, cand.validate))
        if value != value:
            raise ValueError("nan proxy value")
    except Exception:
        traceback.print_exc()
        value = SENTINEL
    scores[name] = value
print(json.dumps({"proxy_scores": scores}), flush=True)
'''


def has_entry_points(script: str) -> bool:
    """True when the script defines module-level ``train`` and ``validate``."""
    try:
        tree = ast.parse(script)
    except SyntaxError:
        return False
    defined = {n.name for n in tree.body if isinstance(n, ast.FunctionDef)}
    return {"train", "validate"} <= defined


def _dir_size(path: Path) -> int:
    return sum(p.stat().st_size for p in path.rglob("*") if p.is_file())


class SandboxEvaluator:
    """Evaluation agent that executes scripts as isolated subprocesses."""

    def __init__(
        self,
        python: str = sys.executable,
        artifact_name: str = "submission.csv",
        noise_frac: float = 0.1,
        mask_frac: float = 0.2,
        data_fraction: float = 0.1,
        seed: int = 0,
        keep_workdirs: bool = False,
    ):
        self.python = python
        self.artifact_name = artifact_name
        self.noise_frac = noise_frac
        self.mask_frac = mask_frac
        self.data_fraction = data_fraction
        self.seed = seed
        self.keep_workdirs = keep_workdirs

    def probe(self, payload: CandidatePayload, limits: SandboxLimits) -> BuggyVerdict | None:
        """Cheap forward check: the script must at least parse."""
        t0 = time.monotonic()
        try:
            compile(payload.script, CANDIDATE_FILE, "exec")
        except SyntaxError as exc:
            return BuggyVerdict(f"SyntaxError: {exc}", None, time.monotonic() - t0)
        return None

    def _workdir(self, payload: CandidatePayload) -> Path:
        try:
            work = Path(tempfile.mkdtemp(prefix="cand_"))
            (work / CANDIDATE_FILE).write_text(payload.script, encoding="utf-8")
            (work / "sitecustomize.py").write_text(GUARD_SOURCE, encoding="utf-8")
        except OSError as exc:
            raise SandboxFailure(f"cannot prepare workdir: {exc}") from exc
        return work

    def _env(self, work: Path, extra: dict[str, str]) -> dict[str, str]:
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": str(work),
            "TMPDIR": str(work),
            "PYTHONPATH": str(work),
            "PYTHONDONTWRITEBYTECODE": "1",
            "PYTHONHASHSEED": "0",
            "MPLCONFIGDIR": str(work),
            "SANDBOX_ROOT": str(work),
            "ARTIFACT_PATH": str(work / self.artifact_name),
        }
        env.update(extra)
        return env

    def _execute(self, argv: list[str], work: Path, env: dict, limits: SandboxLimits):
        def limit_child():
            os.setsid()
            if resource is not None:
                cpu = int(limits.wall) + 5
                resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu))
                q = limits.workdir_quota_bytes
                resource.setrlimit(resource.RLIMIT_FSIZE, (q, q))

        t0 = time.monotonic()
        try:
            proc = subprocess.Popen(
                argv,
                cwd=work,
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                preexec_fn=limit_child,
            )
        except OSError as exc:
            raise SandboxFailure(f"cannot launch {argv[0]}: {exc}") from exc
        timed_out = False
        try:
            out, err = proc.communicate(timeout=limits.wall)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            out, err = proc.communicate()
        elapsed = time.monotonic() - t0
        cap = limits.max_stdout_bytes
        stdout = out[-cap:].decode("utf-8", errors="replace")
        stderr = err[-cap:].decode("utf-8", errors="replace")
        return proc.returncode, stdout, stderr, elapsed, timed_out

    def _cleanup(self, work: Path) -> None:
        if not self.keep_workdirs:
            shutil.rmtree(work, ignore_errors=True)

    def run_proxy(
        self,
        payload: CandidatePayload,
        registry: ProxyRegistry,
        limits: SandboxLimits,
        *,
        node_id: int | None = None,
    ) -> ProxyReport | BuggyVerdict | MalformedReport:
        work = self._workdir(payload)
        try:
            env = self._env(
                work,
                {
                    "PROXY_MODE": "1",
                    "PROXY_EPOCHS": "1",
                    "PROXY_DATA_FRACTION": str(self.data_fraction),
                    "PROXY_NAMES": json.dumps(registry.names),
                    "PROXY_SENTINEL": repr(registry.sentinel),
                    "PROXY_NOISE_FRAC": repr(self.noise_frac),
                    "PROXY_MASK_FRAC": repr(self.mask_frac),
                    "PROXY_SEED": str(self.seed if node_id is None else self.seed + node_id),
                },
            )
            if has_entry_points(payload.script):
                (work / RUNNER_FILE).write_text(RUNNER_SOURCE, encoding="utf-8")
                argv = [self.python, RUNNER_FILE]
            else:
                argv = [self.python, CANDIDATE_FILE]
            code, stdout, stderr, elapsed, timed_out = self._execute(argv, work, env, limits)
            over_quota = _dir_size(work) > limits.workdir_quota_bytes
        finally:
            self._cleanup(work)

        if timed_out:
            return BuggyVerdict(f"timeout after {limits.wall}s\n{stderr[-2000:]}", code, elapsed, True)
        if over_quota:
            return BuggyVerdict("working directory quota exceeded", code, elapsed)
        line = protocol.find_proxy_line(stdout)
        if line is None:
            if code != 0:
                return BuggyVerdict(stderr[-4000:], code, elapsed)
            return MalformedReport("no proxy line on stdout", stdout[-2000:], elapsed)
        try:
            scores = protocol.parse_proxy_line(line, registry.names)
        except ValueError as exc:
            return MalformedReport(str(exc), line, elapsed)
        return ProxyReport(scores=scores, raw_stdout_line=line, wall_time=elapsed)

    def run_full(
        self, payload: CandidatePayload, limits: SandboxLimits, *, node_id: int | None = None
    ) -> FullEvalResult:
        work = self._workdir(payload)
        try:
            env = self._env(work, {"FULL_RUN": "1"})
            code, stdout, stderr, elapsed, timed_out = self._execute(
                [self.python, CANDIDATE_FILE], work, env, limits
            )
            artifact = (work / self.artifact_name).is_file()
        finally:
            self._cleanup(work)
        logs = (stdout[-2000:] + "\n" + stderr[-2000:]).strip()
        if timed_out:
            return FullEvalResult(None, False, f"timeout after {limits.wall}s\n{logs}", elapsed, -1)
        score = protocol.parse_final_score(stdout) if code == 0 else None
        if not artifact:
            score = None
        return FullEvalResult(score, artifact, logs, elapsed, code)
